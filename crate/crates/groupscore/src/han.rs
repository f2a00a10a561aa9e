//! The three-level hierarchical attention model and its aggregation heads.
//!
//! Per individual, an activity-layer GRU encodes each week's activity
//! sequence (attention-pooled over the valid steps), a week-layer GRU encodes
//! the four-week window (attention-pooled over all four positions, with
//! inactive weeks entering as zero vectors), and a shared fully connected
//! layer turns
//! the individual representation into a conversion logit. The account-level
//! probability comes from one of six aggregators over the individuals:
//! three neural heads that consume the representation vectors, and three
//! statistical functions over the per-individual probabilities. Individual
//! scores are always recovered below the aggregation step, so they are
//! identical across aggregator choices given the same encoder parameters.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::datamodel::{
    encode_individual_static, AccountStandardizer, AccountStatic, IndividualStatic, ScoreRecord,
    WeekSequence, WindowSample,
};
use crate::error::{Error, Result};
use crate::nn::{
    attention_pool, checkpoint, gru_sequence, gru_step, AttentionParams, Direction, GruParams,
    Init, ParamId, ParamSet, Tape, Var,
};

/// Account-level aggregation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    Fnn,
    M2oGru,
    M2mGruAttn,
    MaxProb,
    NoisyOr,
    GeoMean,
}

impl Aggregator {
    pub const ALL: [Aggregator; 6] = [
        Aggregator::Fnn,
        Aggregator::M2oGru,
        Aggregator::M2mGruAttn,
        Aggregator::MaxProb,
        Aggregator::NoisyOr,
        Aggregator::GeoMean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Aggregator::Fnn => "fnn",
            Aggregator::M2oGru => "m2o_gru",
            Aggregator::M2mGruAttn => "m2m_gru_attn",
            Aggregator::MaxProb => "max_prob",
            Aggregator::NoisyOr => "noisy_or",
            Aggregator::GeoMean => "geo_mean",
        }
    }

    pub fn parse(s: &str) -> Option<Aggregator> {
        Self::ALL.iter().copied().find(|a| a.name() == s)
    }

    /// Neural heads consume representation vectors; statistical ones consume
    /// the per-individual probabilities.
    pub fn is_neural(self) -> bool {
        matches!(
            self,
            Aggregator::Fnn | Aggregator::M2oGru | Aggregator::M2mGruAttn
        )
    }
}

/// Which architecture a parameter set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    /// Full hierarchy with aggregation.
    Han,
    /// Same encoders, per-individual loss, no aggregation; the group score is
    /// the mean of the individual probabilities.
    Baseline1,
    /// Weekly frequency vectors instead of activity sequences; one week-level
    /// attention per individual, aggregation fixed to the many-to-many head.
    Baseline2,
}

impl ModelVariant {
    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::Han => "han",
            ModelVariant::Baseline1 => "baseline1",
            ModelVariant::Baseline2 => "baseline2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: ModelVariant,
    pub aggregator: Aggregator,
    pub activity_hidden: usize,
    pub week_hidden: usize,
    pub embed_dim: usize,
    pub window_len: usize,
    pub seq_len: usize,
    /// Concatenate log1p(hours since previous activity) to each step input.
    pub use_time_deltas: bool,
    /// Hidden size of the aggregation GRUs.
    pub agg_hidden: usize,
    pub fnn_hidden: (usize, usize),
    pub source_vocab: Vec<String>,
    pub standardizer: AccountStandardizer,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: ModelVariant::Han,
            aggregator: Aggregator::M2mGruAttn,
            activity_hidden: 40,
            week_hidden: 20,
            embed_dim: 16,
            window_len: 4,
            seq_len: 9,
            use_time_deltas: false,
            agg_hidden: 20,
            fnn_hidden: (32, 16),
            source_vocab: Vec::new(),
            standardizer: AccountStandardizer::default(),
        }
    }
}

impl ModelConfig {
    pub fn individual_static_dim(&self) -> usize {
        self.source_vocab.len() + 2
    }

    pub fn account_static_dim(&self) -> usize {
        2
    }

    /// Dimension of the per-individual representation o_k.
    pub fn o_dim(&self) -> usize {
        self.week_hidden + self.individual_static_dim()
    }

    pub fn activity_input_dim(&self) -> usize {
        self.embed_dim + usize::from(self.use_time_deltas)
    }

    /// Input dimension of the week-layer GRU.
    fn week_input_dim(&self) -> usize {
        match self.variant {
            ModelVariant::Baseline2 => crate::datamodel::ActivityType::COUNT,
            _ => self.activity_hidden,
        }
    }

    /// Fit the static-feature encodings (source vocabulary, account
    /// standardization) on training samples.
    pub fn fit_statics(&mut self, samples: &[WindowSample]) {
        let mut sources: Vec<&IndividualStatic> = Vec::new();
        let mut accounts: Vec<&AccountStatic> = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        for s in samples {
            if seen.insert(&s.account_id) {
                accounts.push(&s.account_static);
            }
            for iw in &s.per_individual {
                sources.push(&iw.statics);
            }
        }
        self.source_vocab = crate::datamodel::source_vocabulary(sources.into_iter());
        self.standardizer = AccountStandardizer::fit(&accounts);
    }
}

/// Resolved tensor handles for one aggregation head.
#[derive(Debug, Clone, Copy)]
enum HeadHandles {
    Fnn {
        w1: ParamId,
        b1: ParamId,
        w2: ParamId,
        b2: ParamId,
        w3: ParamId,
        b3: ParamId,
    },
    M2o {
        gru: GruParams,
        out_w: ParamId,
        out_b: ParamId,
    },
    M2m {
        gru: GruParams,
        attn: AttentionParams,
        out_w: ParamId,
        out_b: ParamId,
    },
    Statistical,
}

#[derive(Debug, Clone)]
struct Handles {
    embed: Option<ParamId>,
    act_gru: Option<GruParams>,
    act_attn: Option<AttentionParams>,
    week_gru: GruParams,
    week_attn: AttentionParams,
    pers_w: Option<ParamId>,
    pers_b: Option<ParamId>,
    head: HeadHandles,
}

/// A parameterized model (encoders plus head) for one configuration.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamSet,
    handles: Handles,
}

const CONFIG_FILE: &str = "model_config.json";

impl Model {
    /// Register all tensors for `config` with fan-in uniform initialization.
    pub fn init(config: ModelConfig, seed: u64) -> Model {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let handles = Self::register(&config, &mut params, &mut rng);
        Model {
            config,
            params,
            handles,
        }
    }

    fn register(config: &ModelConfig, params: &mut ParamSet, rng: &mut ChaCha20Rng) -> Handles {
        let uses_activity_layer = !matches!(config.variant, ModelVariant::Baseline2);
        let (embed, act_gru, act_attn) = if uses_activity_layer {
            let embed = params.add(
                "embed.table",
                &[crate::datamodel::ActivityType::COUNT, config.embed_dim],
                Init::UniformFanIn(config.embed_dim),
                rng,
            );
            let act_gru = GruParams::register(
                params,
                "act_gru",
                config.activity_input_dim(),
                config.activity_hidden,
                rng,
            );
            let act_attn =
                AttentionParams::register(params, "act_attn", config.activity_hidden, rng);
            (Some(embed), Some(act_gru), Some(act_attn))
        } else {
            (None, None, None)
        };

        let week_gru = GruParams::register(
            params,
            "week_gru",
            config.week_input_dim(),
            config.week_hidden,
            rng,
        );
        let week_attn = AttentionParams::register(params, "week_attn", config.week_hidden, rng);

        let (pers_w, pers_b) = if matches!(config.variant, ModelVariant::Baseline2) {
            (None, None)
        } else {
            (
                Some(params.add(
                    "personalize.w",
                    &[1, config.o_dim()],
                    Init::UniformFanIn(config.o_dim()),
                    rng,
                )),
                Some(params.add(
                    "personalize.b",
                    &[1],
                    Init::UniformFanIn(config.o_dim()),
                    rng,
                )),
            )
        };

        let aggregator = match config.variant {
            ModelVariant::Baseline1 => None,
            ModelVariant::Baseline2 => Some(Aggregator::M2mGruAttn),
            ModelVariant::Han => Some(config.aggregator),
        };
        let acct_dim = config.account_static_dim();
        let head = match aggregator {
            None => HeadHandles::Statistical,
            Some(Aggregator::MaxProb) | Some(Aggregator::NoisyOr) | Some(Aggregator::GeoMean) => {
                HeadHandles::Statistical
            }
            Some(Aggregator::Fnn) => {
                let input = config.o_dim() + acct_dim;
                let (h1, h2) = config.fnn_hidden;
                HeadHandles::Fnn {
                    w1: params.add("agg_fnn.w1", &[h1, input], Init::UniformFanIn(input), rng),
                    b1: params.add("agg_fnn.b1", &[h1], Init::UniformFanIn(input), rng),
                    w2: params.add("agg_fnn.w2", &[h2, h1], Init::UniformFanIn(h1), rng),
                    b2: params.add("agg_fnn.b2", &[h2], Init::UniformFanIn(h1), rng),
                    w3: params.add("agg_fnn.w3", &[1, h2], Init::UniformFanIn(h2), rng),
                    b3: params.add("agg_fnn.b3", &[1], Init::UniformFanIn(h2), rng),
                }
            }
            Some(Aggregator::M2oGru) => {
                let gru =
                    GruParams::register(params, "agg_gru", config.o_dim(), config.agg_hidden, rng);
                let input = config.agg_hidden + acct_dim;
                HeadHandles::M2o {
                    gru,
                    out_w: params.add("agg_out.w", &[1, input], Init::UniformFanIn(input), rng),
                    out_b: params.add("agg_out.b", &[1], Init::UniformFanIn(input), rng),
                }
            }
            Some(Aggregator::M2mGruAttn) => {
                let gru =
                    GruParams::register(params, "agg_gru", config.o_dim(), config.agg_hidden, rng);
                let attn = AttentionParams::register(params, "agg_attn", config.agg_hidden, rng);
                let input = config.agg_hidden + acct_dim;
                HeadHandles::M2m {
                    gru,
                    attn,
                    out_w: params.add("agg_out.w", &[1, input], Init::UniformFanIn(input), rng),
                    out_b: params.add("agg_out.b", &[1], Init::UniformFanIn(input), rng),
                }
            }
        };

        Handles {
            embed,
            act_gru,
            act_attn,
            week_gru,
            week_attn,
            pers_w,
            pers_b,
            head,
        }
    }

    /// Rebind handles after the parameter values were replaced (for example
    /// when loading a checkpoint into a freshly initialized model).
    pub fn with_params(config: ModelConfig, params: ParamSet) -> Model {
        // Registration on a scratch set yields the same names; resolve them
        // against the provided set instead.
        let mut probe_rng = ChaCha20Rng::seed_from_u64(0);
        let mut probe = ParamSet::new();
        let _ = Self::register(&config, &mut probe, &mut probe_rng);
        for spec in probe.specs() {
            let found = params
                .id(&spec.name)
                .map(|id| params.spec(id).shape == spec.shape)
                .unwrap_or(false);
            assert!(
                found,
                "parameter set is missing tensor `{}` required by the config",
                spec.name
            );
        }
        let handles = Self::resolve(&config, &params);
        Model {
            config,
            params,
            handles,
        }
    }

    fn resolve(config: &ModelConfig, params: &ParamSet) -> Handles {
        let uses_activity_layer = !matches!(config.variant, ModelVariant::Baseline2);
        let (embed, act_gru, act_attn) = if uses_activity_layer {
            (
                Some(params.id("embed.table").expect("embed.table")),
                Some(GruParams::resolve(
                    params,
                    "act_gru",
                    config.activity_input_dim(),
                    config.activity_hidden,
                )),
                Some(AttentionParams::resolve(
                    params,
                    "act_attn",
                    config.activity_hidden,
                )),
            )
        } else {
            (None, None, None)
        };
        let week_gru = GruParams::resolve(
            params,
            "week_gru",
            config.week_input_dim(),
            config.week_hidden,
        );
        let week_attn = AttentionParams::resolve(params, "week_attn", config.week_hidden);
        let (pers_w, pers_b) = if matches!(config.variant, ModelVariant::Baseline2) {
            (None, None)
        } else {
            (
                Some(params.id("personalize.w").expect("personalize.w")),
                Some(params.id("personalize.b").expect("personalize.b")),
            )
        };
        let aggregator = match config.variant {
            ModelVariant::Baseline1 => None,
            ModelVariant::Baseline2 => Some(Aggregator::M2mGruAttn),
            ModelVariant::Han => Some(config.aggregator),
        };
        let head = match aggregator {
            None | Some(Aggregator::MaxProb) | Some(Aggregator::NoisyOr)
            | Some(Aggregator::GeoMean) => HeadHandles::Statistical,
            Some(Aggregator::Fnn) => HeadHandles::Fnn {
                w1: params.id("agg_fnn.w1").expect("agg_fnn.w1"),
                b1: params.id("agg_fnn.b1").expect("agg_fnn.b1"),
                w2: params.id("agg_fnn.w2").expect("agg_fnn.w2"),
                b2: params.id("agg_fnn.b2").expect("agg_fnn.b2"),
                w3: params.id("agg_fnn.w3").expect("agg_fnn.w3"),
                b3: params.id("agg_fnn.b3").expect("agg_fnn.b3"),
            },
            Some(Aggregator::M2oGru) => HeadHandles::M2o {
                gru: GruParams::resolve(params, "agg_gru", config.o_dim(), config.agg_hidden),
                out_w: params.id("agg_out.w").expect("agg_out.w"),
                out_b: params.id("agg_out.b").expect("agg_out.b"),
            },
            Some(Aggregator::M2mGruAttn) => HeadHandles::M2m {
                gru: GruParams::resolve(params, "agg_gru", config.o_dim(), config.agg_hidden),
                attn: AttentionParams::resolve(params, "agg_attn", config.agg_hidden),
                out_w: params.id("agg_out.w").expect("agg_out.w"),
                out_b: params.id("agg_out.b").expect("agg_out.b"),
            },
        };
        Handles {
            embed,
            act_gru,
            act_attn,
            week_gru,
            week_attn,
            pers_w,
            pers_b,
            head,
        }
    }

    // -- persistence --------------------------------------------------------

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let config_path = dir.join(CONFIG_FILE);
        std::fs::write(&config_path, self.config_json())
            .map_err(|e| Error::io(&config_path, e))?;
        checkpoint::save(&self.params, dir)
    }

    pub fn load(dir: &Path) -> Result<Model> {
        let config_path = dir.join(CONFIG_FILE);
        let text = std::fs::read_to_string(&config_path).map_err(|e| Error::io(&config_path, e))?;
        let config: ModelConfig =
            serde_json::from_str(&text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let params = checkpoint::load(dir)?;
        Ok(Model::with_params(config, params))
    }

    pub fn config_json(&self) -> String {
        serde_json::to_string_pretty(&self.config).expect("config serializes")
    }

    /// Hash of the serialized config, reported alongside evaluations.
    pub fn config_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(self.config_json().as_bytes()))
    }

    // -- encoders -----------------------------------------------------------

    /// Encode one week of one individual's activity into a vector.
    /// Inactive weeks (valid_len 0) encode as the zero vector.
    pub fn encode_week(&self, tape: &mut Tape, seq: &WeekSequence) -> (Var, Option<Var>) {
        let gru = self.handles.act_gru.as_ref().expect("activity layer");
        let attn = self.handles.act_attn.as_ref().expect("activity layer");
        if seq.valid_len == 0 {
            return (tape.zeros(attn.dim), None);
        }
        let embed = self.handles.embed.expect("embedding table");
        let inputs: Vec<Var> = seq.codes[..seq.valid_len]
            .iter()
            .zip(&seq.deltas)
            .map(|(code, delta)| {
                let e = tape.embed_row(embed, code.code() as usize);
                if self.config.use_time_deltas {
                    let d = tape.scalar_input((1.0 + delta.max(0.0)).ln());
                    tape.concat(&[e, d])
                } else {
                    e
                }
            })
            .collect();
        let states = gru_sequence(tape, gru, &inputs, seq.valid_len, Direction::Forward);
        let pooled = attention_pool(tape, attn, &states);
        (pooled.context, pooled.weights)
    }

    /// Encode the window of week representations into one context vector.
    pub fn encode_individual(&self, tape: &mut Tape, week_reps: &[Var]) -> (Var, Var) {
        assert_eq!(
            week_reps.len(),
            self.config.window_len,
            "expected one representation per window week"
        );
        let states = gru_sequence(
            tape,
            &self.handles.week_gru,
            week_reps,
            week_reps.len(),
            Direction::Forward,
        );
        let pooled = attention_pool(tape, &self.handles.week_attn, &states);
        (pooled.context, pooled.weights.expect("nonempty window"))
    }

    /// Shared fully connected scoring layer: representation to logit and
    /// probability. Weight sharing across individuals is what lets the layer
    /// score never-seen individuals.
    pub fn personalize(&self, tape: &mut Tape, o: Var) -> (Var, Var) {
        let w = self.handles.pers_w.expect("personalized layer");
        let b = self.handles.pers_b.expect("personalized layer");
        let wx = tape.matvec(w, o);
        let bias = tape.param(b);
        let logit = tape.add(wx, bias);
        let prob = tape.sigmoid(logit);
        (logit, prob)
    }

    fn encode_account_static(&self, tape: &mut Tape, statics: &AccountStatic) -> Var {
        let enc = self.config.standardizer.encode(statics);
        tape.input(&enc)
    }

    fn member_representation(&self, tape: &mut Tape, member: &crate::datamodel::IndividualWindow, diag: &mut AttentionDiag) -> Var {
        let week_reps: Vec<Var> = match self.config.variant {
            ModelVariant::Baseline2 => member
                .weeks
                .iter()
                .map(|w| {
                    let freq: Vec<f64> =
                        w.counts.iter().map(|c| (1.0 + *c as f64).ln()).collect();
                    tape.input(&freq)
                })
                .collect(),
            _ => member
                .weeks
                .iter()
                .map(|w| {
                    let (rep, weights) = self.encode_week(tape, w);
                    diag.activity.push(weights.map(|v| tape.value(v).to_vec()));
                    rep
                })
                .collect(),
        };
        let (ctx, week_weights) = self.encode_individual(tape, &week_reps);
        diag.week.push(tape.value(week_weights).to_vec());
        let statics = tape.input(&encode_individual_static(
            &member.statics,
            &self.config.source_vocab,
        ));
        tape.concat(&[ctx, statics])
    }

    // -- full forward pass ---------------------------------------------------

    pub fn forward_account(&self, tape: &mut Tape, sample: &WindowSample) -> Result<ForwardPass> {
        if sample.per_individual.is_empty() {
            return Err(Error::EmptyGroup);
        }
        let mut diag = AttentionDiag::default();

        let reps: Vec<Var> = sample
            .per_individual
            .iter()
            .map(|m| self.member_representation(tape, m, &mut diag))
            .collect();

        let individual_probs: Option<Vec<(Var, Var)>> =
            if matches!(self.config.variant, ModelVariant::Baseline2) {
                None
            } else {
                Some(reps.iter().map(|o| self.personalize(tape, *o)).collect())
            };

        let account_prob = match (&self.handles.head, self.config.variant) {
            (HeadHandles::Statistical, ModelVariant::Baseline1) => {
                // Mean of individual probabilities ("added and normalized").
                let probs: Vec<Var> = individual_probs
                    .as_ref()
                    .expect("baseline1 has individual scores")
                    .iter()
                    .map(|(_, p)| *p)
                    .collect();
                let stacked = tape.concat(&probs);
                tape.mean(stacked)
            }
            (HeadHandles::Statistical, _) => {
                let probs: Vec<Var> = individual_probs
                    .as_ref()
                    .expect("statistical aggregation needs individual scores")
                    .iter()
                    .map(|(_, p)| *p)
                    .collect();
                let stacked = tape.concat(&probs);
                match self.config.aggregator {
                    Aggregator::MaxProb => tape.max_reduce(stacked),
                    Aggregator::NoisyOr => {
                        let misses = tape.one_minus(stacked);
                        let none = tape.prod(misses);
                        tape.one_minus(none)
                    }
                    Aggregator::GeoMean => {
                        let lnp = tape.ln(stacked);
                        let mean = tape.mean(lnp);
                        tape.exp(mean)
                    }
                    _ => unreachable!("neural aggregator with statistical head"),
                }
            }
            (HeadHandles::Fnn { w1, b1, w2, b2, w3, b3 }, _) => {
                let mut pooled = reps[0];
                for rep in &reps[1..] {
                    pooled = tape.add(pooled, *rep);
                }
                let pooled = tape.scale(pooled, 1.0 / reps.len() as f64);
                let acct = self.encode_account_static(tape, &sample.account_static);
                let x = tape.concat(&[pooled, acct]);
                let a1 = tape.matvec(*w1, x);
                let b1v = tape.param(*b1);
                let a1 = tape.add(a1, b1v);
                let h1 = tape.relu(a1);
                let a2 = tape.matvec(*w2, h1);
                let b2v = tape.param(*b2);
                let a2 = tape.add(a2, b2v);
                let h2 = tape.relu(a2);
                let logit = tape.matvec(*w3, h2);
                let b3v = tape.param(*b3);
                let logit = tape.add(logit, b3v);
                tape.sigmoid(logit)
            }
            (HeadHandles::M2o { gru, out_w, out_b }, _) => {
                let mut h = tape.zeros(gru.hidden_dim);
                for rep in &reps {
                    h = gru_step(tape, gru, *rep, h);
                }
                let acct = self.encode_account_static(tape, &sample.account_static);
                let x = tape.concat(&[h, acct]);
                let logit = tape.matvec(*out_w, x);
                let bias = tape.param(*out_b);
                let logit = tape.add(logit, bias);
                tape.sigmoid(logit)
            }
            (HeadHandles::M2m { gru, attn, out_w, out_b }, _) => {
                let states = gru_sequence(tape, gru, &reps, reps.len(), Direction::Forward);
                let pooled = attention_pool(tape, attn, &states);
                diag.members = pooled.weights.map(|v| tape.value(v).to_vec());
                let acct = self.encode_account_static(tape, &sample.account_static);
                let x = tape.concat(&[pooled.context, acct]);
                let logit = tape.matvec(*out_w, x);
                let bias = tape.param(*out_b);
                let logit = tape.add(logit, bias);
                tape.sigmoid(logit)
            }
        };

        let individuals = match individual_probs {
            Some(pairs) => sample
                .per_individual
                .iter()
                .zip(pairs)
                .map(|(m, (logit, prob))| IndividualForward {
                    individual_id: m.individual_id.clone(),
                    logit,
                    prob,
                })
                .collect(),
            None => Vec::new(),
        };

        Ok(ForwardPass {
            account_prob,
            individuals,
            diag,
        })
    }

    /// Training loss for one sample.
    pub fn loss(&self, tape: &mut Tape, sample: &WindowSample, weight_penalty: f64) -> Result<(Var, ForwardPass)> {
        let pass = self.forward_account(tape, sample)?;
        let loss = match self.config.variant {
            ModelVariant::Baseline1 => {
                // Per-individual loss with the group target copied to each
                // member, averaged over the group.
                let losses: Vec<Var> = pass
                    .individuals
                    .iter()
                    .map(|ind| tape.weighted_bce(ind.prob, sample.label, weight_penalty))
                    .collect();
                let stacked = tape.concat(&losses);
                tape.mean(stacked)
            }
            _ => tape.weighted_bce(pass.account_prob, sample.label, weight_penalty),
        };
        Ok((loss, pass))
    }

    /// Forward pass returning plain numbers, for scoring and evaluation.
    pub fn score_sample(&self, tape: &mut Tape, sample: &WindowSample) -> Result<ScoreRecord> {
        tape.reset();
        let pass = self.forward_account(tape, sample)?;
        Ok(ScoreRecord {
            account_id: sample.account_id.clone(),
            target_week: sample.target_week,
            account_probability: tape.scalar(pass.account_prob),
            individual_scores: pass
                .individuals
                .iter()
                .map(|ind| (ind.individual_id.clone(), tape.scalar(ind.prob)))
                .collect(),
        })
    }
}

/// Attention weights observed during one forward pass, for diagnostics.
#[derive(Debug, Clone, Default)]
pub struct AttentionDiag {
    /// Per (individual, window week) in traversal order; `None` for inactive
    /// weeks.
    pub activity: Vec<Option<Vec<f64>>>,
    /// Per individual: weights over the window weeks.
    pub week: Vec<Vec<f64>>,
    /// Per-individual influence weights from the many-to-many head.
    pub members: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct IndividualForward {
    pub individual_id: crate::datamodel::IndividualId,
    pub logit: Var,
    pub prob: Var,
}

#[derive(Debug)]
pub struct ForwardPass {
    pub account_prob: Var,
    pub individuals: Vec<IndividualForward>,
    pub diag: AttentionDiag,
}

/// Closed-form statistical aggregators over per-individual probabilities.
pub mod aggregators {
    /// Largest individual probability.
    pub fn max_prob(probs: &[f64]) -> f64 {
        probs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Probability that at least one individual converts:
    /// `1 - prod(1 - p_k)`.
    pub fn noisy_or(probs: &[f64]) -> f64 {
        1.0 - probs.iter().map(|p| 1.0 - p).product::<f64>()
    }

    /// Geometric mean of the probabilities.
    pub fn geo_mean(probs: &[f64]) -> f64 {
        let k = probs.len() as f64;
        probs.iter().product::<f64>().powf(1.0 / k)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::datamodel::{
        AccountId, ActivityType, IndividualId, IndividualWindow, WindowSample,
    };
    use crate::nn::{grad_check, Grads};
    use rand::Rng;

    pub fn toy_config(aggregator: Aggregator) -> ModelConfig {
        ModelConfig {
            aggregator,
            activity_hidden: 4,
            week_hidden: 3,
            embed_dim: 2,
            agg_hidden: 3,
            fnn_hidden: (4, 3),
            source_vocab: vec!["web".into(), "event".into()],
            standardizer: AccountStandardizer {
                revenue_mean: 5e6,
                revenue_std: 2e6,
                employees_mean: 120.0,
                employees_std: 60.0,
            },
            ..Default::default()
        }
    }

    pub fn random_week(rng: &mut impl Rng, week_index: i64, n: usize) -> WeekSequence {
        let mut week = WeekSequence::inactive(week_index, 9);
        week.valid_len = n;
        for i in 0..n {
            let code = rng.random_range(0..ActivityType::COUNT as u8);
            week.codes[i] = ActivityType::from_code(code).unwrap();
            week.counts[code as usize] += 1;
            if i > 0 {
                week.deltas[i] = rng.random::<f64>() * 40.0;
            }
        }
        week
    }

    pub fn toy_sample(seed: u64, k: usize, label: bool) -> WindowSample {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        let per_individual = (0..k)
            .map(|i| {
                let weeks = (0..4)
                    .map(|w| {
                        let n = rng.random_range(0..=4);
                        random_week(&mut rng, 10 + w, n)
                    })
                    .collect();
                IndividualWindow {
                    individual_id: IndividualId::new(format!("i{i}")),
                    weeks,
                    statics: IndividualStatic {
                        individual_id: IndividualId::new(format!("i{i}")),
                        source_of_arrival: if i % 2 == 0 { "web" } else { "event" }.into(),
                        opt_out_email: false,
                        opt_out_phone: i % 3 == 0,
                    },
                }
            })
            .collect();
        WindowSample {
            account_id: AccountId::new("acct"),
            target_week: 14,
            per_individual,
            account_static: AccountStatic {
                account_id: AccountId::new("acct"),
                revenue: 5e6,
                num_employees: 120,
            },
            label,
        }
    }

    #[test]
    fn inactive_week_encodes_to_zero_vector() {
        let model = Model::init(toy_config(Aggregator::MaxProb), 1);
        let mut tape = Tape::new(&model.params);
        let week = WeekSequence::inactive(3, 9);
        let (rep, weights) = model.encode_week(&mut tape, &week);
        assert!(weights.is_none());
        assert!(tape.value(rep).iter().all(|v| *v == 0.0));
        assert_eq!(rep.len(), 4);
    }

    #[test]
    fn single_activity_week_gets_attention_weight_one() {
        let model = Model::init(toy_config(Aggregator::MaxProb), 2);
        let mut tape = Tape::new(&model.params);
        let mut rng = rand::rng();
        let week = random_week(&mut rng, 0, 1);
        let (_, weights) = model.encode_week(&mut tape, &week);
        assert_eq!(tape.value(weights.unwrap()), &[1.0]);
    }

    #[test]
    fn padded_slots_are_inert() {
        let model = Model::init(toy_config(Aggregator::MaxProb), 3);
        let mut rng = rand::rng();
        let week = random_week(&mut rng, 0, 3);

        let mut tape = Tape::new(&model.params);
        let (rep, _) = model.encode_week(&mut tape, &week);
        let baseline = tape.value(rep).to_vec();

        for _ in 0..10 {
            let mut perturbed = week.clone();
            for slot in perturbed.valid_len..9 {
                perturbed.codes[slot] =
                    ActivityType::from_code(rng.random_range(0..9) as u8).unwrap();
                perturbed.deltas[slot] = rng.random::<f64>() * 100.0;
            }
            let mut tape2 = Tape::new(&model.params);
            let (rep2, _) = model.encode_week(&mut tape2, &perturbed);
            assert_eq!(tape2.value(rep2), &baseline[..], "padding leaked");
        }
    }

    #[test]
    fn all_inactive_window_is_a_function_of_params_only() {
        let model = Model::init(toy_config(Aggregator::MaxProb), 4);
        let encode = |weeks: &[WeekSequence]| {
            let mut tape = Tape::new(&model.params);
            let reps: Vec<Var> = weeks
                .iter()
                .map(|w| model.encode_week(&mut tape, w).0)
                .collect();
            let (ctx, weights) = model.encode_individual(&mut tape, &reps);
            let sum: f64 = tape.value(weights).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            tape.value(ctx).to_vec()
        };
        let a: Vec<WeekSequence> = (0..4).map(|w| WeekSequence::inactive(w, 9)).collect();
        let b: Vec<WeekSequence> = (10..14).map(|w| WeekSequence::inactive(w, 9)).collect();
        let ctx_a = encode(&a);
        let ctx_b = encode(&b);
        assert_eq!(ctx_a, ctx_b);
        // Biases make this nonzero: the GRU runs on zero inputs.
        assert!(ctx_a.iter().any(|v| v.abs() > 1e-12));
    }

    #[test]
    fn personalize_shares_weights_and_respects_bias() {
        let mut model = Model::init(toy_config(Aggregator::MaxProb), 5);
        // zero weights -> logit = bias
        let wid = model.params.id("personalize.w").unwrap();
        model.params.values_mut(wid).fill(0.0);
        let bid = model.params.id("personalize.b").unwrap();
        model.params.values_mut(bid)[0] = 0.3;
        let mut tape = Tape::new(&model.params);
        let o1 = tape.input(&vec![0.5; model.config.o_dim()]);
        let (logit, prob) = model.personalize(&mut tape, o1);
        assert!((tape.scalar(logit) - 0.3).abs() < 1e-12);
        assert!((tape.scalar(prob) - 1.0 / (1.0 + (-0.3f64).exp())).abs() < 1e-12);

        // identical representations -> identical scores
        let o2 = tape.input(&vec![0.5; model.config.o_dim()]);
        let (logit2, _) = model.personalize(&mut tape, o2);
        assert_eq!(tape.scalar(logit), tape.scalar(logit2));
    }

    #[test]
    fn singleton_max_prob_account_score_equals_the_individual() {
        let model = Model::init(toy_config(Aggregator::MaxProb), 6);
        let sample = toy_sample(7, 1, false);
        let mut tape = Tape::new(&model.params);
        let pass = model.forward_account(&mut tape, &sample).unwrap();
        assert_eq!(pass.individuals.len(), 1);
        assert_eq!(
            tape.scalar(pass.account_prob),
            tape.scalar(pass.individuals[0].prob)
        );
    }

    #[test]
    fn empty_group_is_an_error() {
        let model = Model::init(toy_config(Aggregator::MaxProb), 6);
        let mut sample = toy_sample(7, 1, false);
        sample.per_individual.clear();
        let mut tape = Tape::new(&model.params);
        assert!(matches!(
            model.forward_account(&mut tape, &sample),
            Err(Error::EmptyGroup)
        ));
    }

    #[test]
    fn account_probability_stays_in_unit_interval() {
        for (i, aggregator) in Aggregator::ALL.into_iter().enumerate() {
            let model = Model::init(toy_config(aggregator), 100 + i as u64);
            let mut tape = Tape::new(&model.params);
            for seed in 0..200 {
                tape.reset();
                let k = 1 + (seed as usize % 6);
                let sample = toy_sample(seed, k, seed % 7 == 0);
                let pass = model.forward_account(&mut tape, &sample).unwrap();
                let p = tape.scalar(pass.account_prob);
                assert!((0.0..=1.0).contains(&p), "{}: p={p}", aggregator.name());
                for ind in &pass.individuals {
                    let pk = tape.scalar(ind.prob);
                    assert!((0.0..1.0).contains(&pk) || pk == 0.0 || pk == 1.0);
                }
            }
        }
    }

    #[test]
    fn individual_scores_are_identical_across_aggregators_with_shared_encoders() {
        let reference = Model::init(toy_config(Aggregator::MaxProb), 42);
        let sample = toy_sample(3, 4, true);
        let mut tape = Tape::new(&reference.params);
        let ref_pass = reference.forward_account(&mut tape, &sample).unwrap();
        let ref_probs: Vec<f64> = ref_pass
            .individuals
            .iter()
            .map(|i| tape.scalar(i.prob))
            .collect();

        for aggregator in Aggregator::ALL {
            let mut model = Model::init(toy_config(aggregator), 999);
            let copied = model.params.copy_matching(&reference.params);
            assert!(copied >= 8, "encoder tensors should copy over");
            let mut tape = Tape::new(&model.params);
            let pass = model.forward_account(&mut tape, &sample).unwrap();
            let probs: Vec<f64> = pass
                .individuals
                .iter()
                .map(|i| tape.scalar(i.prob))
                .collect();
            assert_eq!(probs, ref_probs, "{} diverged", aggregator.name());
        }
    }

    #[test]
    fn statistical_aggregator_tape_paths_match_closed_forms() {
        use super::aggregators::*;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(8);
        for aggregator in [Aggregator::MaxProb, Aggregator::NoisyOr, Aggregator::GeoMean] {
            let model = Model::init(toy_config(aggregator), 50);
            for seed in 0..50 {
                let k = 1 + rng.random_range(0..8);
                let sample = toy_sample(seed + 1000, k, false);
                let mut tape = Tape::new(&model.params);
                let pass = model.forward_account(&mut tape, &sample).unwrap();
                let probs: Vec<f64> = pass
                    .individuals
                    .iter()
                    .map(|i| tape.scalar(i.prob))
                    .collect();
                let expect = match aggregator {
                    Aggregator::MaxProb => max_prob(&probs),
                    Aggregator::NoisyOr => noisy_or(&probs),
                    Aggregator::GeoMean => geo_mean(&probs),
                    _ => unreachable!(),
                };
                let got = tape.scalar(pass.account_prob);
                assert!((got - expect).abs() < 1e-12, "{}", aggregator.name());
            }
        }
    }

    #[test]
    fn fnn_mean_pool_is_idempotent_over_identical_individuals() {
        let model = Model::init(toy_config(Aggregator::Fnn), 60);
        let single = toy_sample(11, 1, false);
        let mut cloned = single.clone();
        for _ in 0..3 {
            let mut dup = single.per_individual[0].clone();
            dup.individual_id = IndividualId::new(format!("copy{}", cloned.per_individual.len()));
            cloned.per_individual.push(dup);
        }
        let mut tape = Tape::new(&model.params);
        let p1 = {
            let pass = model.forward_account(&mut tape, &single).unwrap();
            tape.scalar(pass.account_prob)
        };
        tape.reset();
        let p4 = {
            let pass = model.forward_account(&mut tape, &cloned).unwrap();
            tape.scalar(pass.account_prob)
        };
        assert!((p1 - p4).abs() < 1e-12);
    }

    #[test]
    fn permutation_invariance_for_unordered_aggregators() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(12);
        for aggregator in [
            Aggregator::Fnn,
            Aggregator::MaxProb,
            Aggregator::NoisyOr,
            Aggregator::GeoMean,
        ] {
            let model = Model::init(toy_config(aggregator), 70);
            let sample = toy_sample(21, 5, false);
            let mut tape = Tape::new(&model.params);
            let base = {
                let pass = model.forward_account(&mut tape, &sample).unwrap();
                tape.scalar(pass.account_prob)
            };
            for _ in 0..5 {
                let mut shuffled = sample.clone();
                shuffled.per_individual.shuffle(&mut rng);
                tape.reset();
                let pass = model.forward_account(&mut tape, &shuffled).unwrap();
                let p = tape.scalar(pass.account_prob);
                assert!(
                    (p - base).abs() < 1e-12,
                    "{} not permutation invariant",
                    aggregator.name()
                );
            }
        }
    }

    #[test]
    fn arrival_order_matters_for_the_recurrent_head() {
        let model = Model::init(toy_config(Aggregator::M2oGru), 80);
        let sample = toy_sample(31, 4, false);
        let mut reversed = sample.clone();
        reversed.per_individual.reverse();
        let mut tape = Tape::new(&model.params);
        let a = {
            let pass = model.forward_account(&mut tape, &sample).unwrap();
            tape.scalar(pass.account_prob)
        };
        tape.reset();
        let b = {
            let pass = model.forward_account(&mut tape, &reversed).unwrap();
            tape.scalar(pass.account_prob)
        };
        assert!((a - b).abs() > 1e-9, "order had no effect: {a} vs {b}");
    }

    #[test]
    fn m2m_attention_exports_member_weights_summing_to_one() {
        let model = Model::init(toy_config(Aggregator::M2mGruAttn), 90);
        let sample = toy_sample(41, 1, false);
        let mut tape = Tape::new(&model.params);
        let pass = model.forward_account(&mut tape, &sample).unwrap();
        let weights = pass.diag.members.unwrap();
        assert_eq!(weights, vec![1.0]);

        tape.reset();
        let sample = toy_sample(42, 6, false);
        let pass = model.forward_account(&mut tape, &sample).unwrap();
        let sum: f64 = pass.diag.members.unwrap().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn full_model_gradient_check_on_toy_dims() {
        let sample = toy_sample(55, 2, true);
        let mut model = Model::init(toy_config(Aggregator::M2mGruAttn), 7);
        let config = model.config.clone();
        let report = grad_check(
            &mut model.params,
            |params, tape| {
                let probe = Model::with_params(config.clone(), params.clone());
                let (loss, _) = probe.loss(tape, &sample, 3.0).unwrap();
                loss
            },
            1e-5,
        );
        assert!(
            report.pass(),
            "worst {} at {}[{}]",
            report.max_rel_err,
            report.worst_param,
            report.worst_index
        );
    }

    #[test]
    fn baseline1_group_score_is_the_mean_probability() {
        let config = ModelConfig {
            variant: ModelVariant::Baseline1,
            ..toy_config(Aggregator::MaxProb)
        };
        let model = Model::init(config, 8);
        let sample = toy_sample(61, 3, false);
        let mut tape = Tape::new(&model.params);
        let pass = model.forward_account(&mut tape, &sample).unwrap();
        let probs: Vec<f64> = pass
            .individuals
            .iter()
            .map(|i| tape.scalar(i.prob))
            .collect();
        let mean = probs.iter().sum::<f64>() / probs.len() as f64;
        let got = tape.scalar(pass.account_prob);
        assert!((got - mean).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&got));

        // K=1: group score is the single individual's score.
        let single = toy_sample(62, 1, false);
        tape.reset();
        let pass = model.forward_account(&mut tape, &single).unwrap();
        assert_eq!(
            tape.scalar(pass.account_prob),
            tape.scalar(pass.individuals[0].prob)
        );
    }

    #[test]
    fn checkpoint_roundtrip_preserves_scores_to_f32_precision() {
        let model = Model::init(toy_config(Aggregator::M2mGruAttn), 17);
        let sample = toy_sample(71, 3, false);
        let mut tape = Tape::new(&model.params);
        let before = {
            let pass = model.forward_account(&mut tape, &sample).unwrap();
            tape.scalar(pass.account_prob)
        };
        let dir = tempfile::tempdir().unwrap();
        model.save(dir.path()).unwrap();
        let loaded = Model::load(dir.path()).unwrap();
        assert_eq!(loaded.config, model.config);
        let mut tape2 = Tape::new(&loaded.params);
        let after = {
            let pass = loaded.forward_account(&mut tape2, &sample).unwrap();
            tape2.scalar(pass.account_prob)
        };
        assert!((before - after).abs() < 1e-6, "{before} vs {after}");
    }

    #[test]
    fn neural_heads_backpropagate_without_touching_personalize() {
        let model = Model::init(toy_config(Aggregator::M2mGruAttn), 19);
        let sample = toy_sample(81, 3, true);
        let mut tape = Tape::new(&model.params);
        let (loss, _) = model.loss(&mut tape, &sample, 5.0).unwrap();
        let mut grads = Grads::zeros_like(&model.params);
        tape.backward(loss, &mut grads);
        // Aggregation sits above the personalized layer, so its gradient must
        // be exactly zero here while the encoders receive signal.
        let pw = model.params.id("personalize.w").unwrap();
        assert!(grads.slice(&model.params, pw).iter().all(|g| *g == 0.0));
        let eg = model.params.id("act_gru.wz").unwrap();
        assert!(grads.slice(&model.params, eg).iter().any(|g| *g != 0.0));
    }
}
