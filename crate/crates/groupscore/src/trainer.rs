//! Training loop and hyperparameter grid.
//!
//! Mini-batches of window samples, class-weighted cross-entropy averaged per
//! batch, Adam updates. Per-sample losses and gradients are computed in
//! parallel but reduced in sample order, so runs are bit-reproducible for a
//! fixed seed regardless of worker count.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::datamodel::WindowSample;
use crate::error::{Error, Result};
use crate::eval;
use crate::han::{Aggregator, Model, ModelConfig, ModelVariant};
use crate::kv;
use crate::nn::{AdamState, Grads, Tape};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Positive-class weight in the loss.
    pub weight_penalty: f64,
    pub activity_hidden: usize,
    pub week_hidden: usize,
    pub embed_dim: usize,
    pub agg_hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub aggregator: Aggregator,
    pub use_time_deltas: bool,
    pub variant: ModelVariant,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            weight_penalty: 500.0,
            activity_hidden: 40,
            week_hidden: 20,
            embed_dim: 16,
            agg_hidden: 20,
            epochs: 30,
            batch_size: 32,
            seed: 0,
            aggregator: Aggregator::M2mGruAttn,
            use_time_deltas: false,
            variant: ModelVariant::Han,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0
            || self.weight_penalty < 1.0
            || self.epochs == 0
            || self.batch_size == 0
            || self.activity_hidden == 0
            || self.week_hidden == 0
        {
            return Err(Error::Config(
                "learning_rate and sizes must be positive; weight_penalty must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn from_kv_file(path: &Path) -> Result<TrainConfig> {
        let map = kv::read_file(path)?;
        let mut cfg = TrainConfig::default();
        if let Some(v) = kv::get_parsed(&map, "learning_rate")? {
            cfg.learning_rate = v;
        }
        if let Some(v) = kv::get_parsed(&map, "weight_penalty")? {
            cfg.weight_penalty = v;
        }
        if let Some(v) = kv::get_parsed(&map, "activity_hidden")? {
            cfg.activity_hidden = v;
        }
        if let Some(v) = kv::get_parsed(&map, "week_hidden")? {
            cfg.week_hidden = v;
        }
        if let Some(v) = kv::get_parsed(&map, "embed_dim")? {
            cfg.embed_dim = v;
        }
        if let Some(v) = kv::get_parsed(&map, "agg_hidden")? {
            cfg.agg_hidden = v;
        }
        if let Some(v) = kv::get_parsed(&map, "epochs")? {
            cfg.epochs = v;
        }
        if let Some(v) = kv::get_parsed(&map, "batch_size")? {
            cfg.batch_size = v;
        }
        if let Some(v) = kv::get_parsed(&map, "seed")? {
            cfg.seed = v;
        }
        if let Some(v) = map.get("aggregator") {
            cfg.aggregator = Aggregator::parse(v)
                .ok_or_else(|| Error::Config(format!("unknown aggregator `{v}`")))?;
        }
        if let Some(v) = kv::get_parsed(&map, "use_time_deltas")? {
            cfg.use_time_deltas = v;
        }
        if let Some(v) = map.get("baseline") {
            cfg.variant = match v.as_str() {
                "1" => ModelVariant::Baseline1,
                "2" => ModelVariant::Baseline2,
                "none" => ModelVariant::Han,
                _ => return Err(Error::Config(format!("baseline must be 1, 2 or none, got `{v}`"))),
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv_string(&self) -> String {
        let baseline = match self.variant {
            ModelVariant::Han => "none",
            ModelVariant::Baseline1 => "1",
            ModelVariant::Baseline2 => "2",
        };
        format!(
            "learning_rate = {}\nweight_penalty = {}\nactivity_hidden = {}\nweek_hidden = {}\n\
             embed_dim = {}\nagg_hidden = {}\nepochs = {}\nbatch_size = {}\nseed = {}\n\
             aggregator = {}\nuse_time_deltas = {}\nbaseline = {}\n",
            self.learning_rate,
            self.weight_penalty,
            self.activity_hidden,
            self.week_hidden,
            self.embed_dim,
            self.agg_hidden,
            self.epochs,
            self.batch_size,
            self.seed,
            self.aggregator.name(),
            self.use_time_deltas,
            baseline
        )
    }

    pub fn model_config(&self, samples: &[WindowSample]) -> ModelConfig {
        let mut config = ModelConfig {
            variant: self.variant,
            aggregator: self.aggregator,
            activity_hidden: self.activity_hidden,
            week_hidden: self.week_hidden,
            embed_dim: self.embed_dim,
            agg_hidden: self.agg_hidden,
            use_time_deltas: self.use_time_deltas,
            ..Default::default()
        };
        config.fit_statics(samples);
        config
    }
}

#[derive(Debug)]
pub struct TrainResult {
    pub model: Model,
    /// Mean per-sample loss per epoch.
    pub loss_curve: Vec<f64>,
}

/// Train a model, calling `epoch_hook(epoch, model, mean_loss)` after every
/// epoch (checkpointing hangs off this).
pub fn train_with<F>(
    samples: &[WindowSample],
    cfg: &TrainConfig,
    mut epoch_hook: F,
) -> Result<TrainResult>
where
    F: FnMut(usize, &Model, f64) -> Result<()>,
{
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Other("training set is empty".into()));
    }
    if !samples.iter().any(|s| s.label) {
        return Err(Error::NoPositiveSamples);
    }

    let config = cfg.model_config(samples);
    let mut model = Model::init(config, derive_seed(cfg.seed, 0));
    let mut adam = AdamState::new(cfg.learning_rate, &model.params);
    let mut shuffle_rng = ChaCha20Rng::seed_from_u64(derive_seed(cfg.seed, 1));

    let mut indices: Vec<usize> = (0..samples.len()).collect();
    let mut loss_curve = Vec::with_capacity(cfg.epochs);
    let mut batch_grads = Grads::zeros_like(&model.params);

    // Sub-batches are summed internally and then reduced in order, so the
    // floating-point addition order is fixed by the batch layout alone.
    let sub_batch = cfg.batch_size.div_ceil(4).max(1);

    for epoch in 0..cfg.epochs {
        indices.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in indices.chunks(cfg.batch_size) {
            let results: Vec<Result<(f64, Grads)>> = batch
                .par_chunks(sub_batch)
                .map_init(
                    || Tape::new(&model.params),
                    |tape, chunk| {
                        let mut grads = Grads::zeros_like(&model.params);
                        let mut loss_sum = 0.0;
                        for &idx in chunk {
                            tape.reset();
                            let (loss, _) =
                                model.loss(tape, &samples[idx], cfg.weight_penalty)?;
                            tape.backward(loss, &mut grads);
                            loss_sum += tape.scalar(loss);
                        }
                        Ok((loss_sum, grads))
                    },
                )
                .collect();

            batch_grads.zero();
            for result in results {
                let (loss, grads) = result?;
                epoch_loss += loss;
                batch_grads.add_assign(&grads);
            }
            batch_grads.scale(1.0 / batch.len() as f64);
            adam.update(&mut model.params, &batch_grads)?;
        }
        let mean_loss = epoch_loss / samples.len() as f64;
        loss_curve.push(mean_loss);
        epoch_hook(epoch, &model, mean_loss)?;
    }

    Ok(TrainResult { model, loss_curve })
}

pub fn train(samples: &[WindowSample], cfg: &TrainConfig) -> Result<TrainResult> {
    train_with(samples, cfg, |_, _, _| Ok(()))
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 over (seed, stream)
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Account-level validation carve-out from the training samples.
pub fn carve_validation(
    samples: Vec<WindowSample>,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<WindowSample>, Vec<WindowSample>)> {
    let accounts: BTreeSet<_> = samples.iter().map(|s| s.account_id.clone()).collect();
    let accounts: Vec<_> = accounts.into_iter().collect();
    let (train_accounts, val_accounts) = crate::ingest::split_accounts(
        &accounts,
        &crate::ingest::SplitSpec {
            test_fraction: fraction,
            seed,
        },
    )?;
    let val_set: BTreeSet<_> = val_accounts.into_iter().collect();
    let _ = train_accounts;
    let (val, train): (Vec<_>, Vec<_>) = samples
        .into_iter()
        .partition(|s| val_set.contains(&s.account_id));
    Ok((train, val))
}

#[derive(Debug, Clone)]
pub struct GridRun {
    pub activity_hidden: usize,
    pub weight_penalty: f64,
    pub val_auc: f64,
}

#[derive(Debug)]
pub struct GridSearchResult {
    pub best: TrainConfig,
    pub best_val_auc: f64,
    pub runs: Vec<GridRun>,
}

pub const GRID_HIDDEN: [usize; 2] = [40, 56];
pub const GRID_WEIGHT: [f64; 2] = [500.0, 750.0];

/// Exhaustive grid over hidden size and weight penalty, selected by
/// validation AUC. Ties break toward the smaller weight penalty, then the
/// smaller hidden size.
pub fn grid_search(
    train_samples: &[WindowSample],
    val_samples: &[WindowSample],
    base: &TrainConfig,
) -> Result<GridSearchResult> {
    let mut runs = Vec::new();
    let mut best: Option<(TrainConfig, f64)> = None;
    for hidden in GRID_HIDDEN {
        for weight in GRID_WEIGHT {
            let cfg = TrainConfig {
                activity_hidden: hidden,
                weight_penalty: weight,
                ..base.clone()
            };
            let result = train(train_samples, &cfg)?;
            let rows = eval::score_rows(&result.model, val_samples)?;
            let scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
            let labels: Vec<bool> = rows.iter().map(|r| r.label).collect();
            let val_auc = eval::auc(&scores, &labels)?;
            runs.push(GridRun {
                activity_hidden: hidden,
                weight_penalty: weight,
                val_auc,
            });
            let better = match &best {
                None => true,
                Some((b, a)) => {
                    val_auc > *a
                        || (val_auc == *a
                            && (weight < b.weight_penalty
                                || (weight == b.weight_penalty && hidden < b.activity_hidden)))
                }
            };
            if better {
                best = Some((cfg, val_auc));
            }
        }
    }
    let (best, best_val_auc) = best.expect("grid is nonempty");
    Ok(GridSearchResult {
        best,
        best_val_auc,
        runs,
    })
}
