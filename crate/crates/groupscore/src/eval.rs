//! Per-period scoring, AUC computation, score time-series export and the
//! activity-volume correlation analysis.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::datamodel::{AccountId, ConversionLabel, ScoreRecord, WindowSample};
use crate::error::{Error, Result};
use crate::han::Model;
use crate::ingest::{build_window_at, build_windows, AccountHistory, IngestConfig, PeriodGrid};
use crate::nn::Tape;

/// Mann-Whitney AUC: the probability that a random positive outranks a random
/// negative, ties counting one half. Computed from average ranks, which
/// equals the pairwise concordance count exactly.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    assert_eq!(scores.len(), labels.len(), "scores/labels length mismatch");
    let n = scores.len();
    let pos = labels.iter().filter(|l| **l).count();
    let neg = n - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::AucUndefined);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based positions i+1..=j+1 share the averaged rank.
        let avg_rank = (i + j + 2) as f64 / 2.0;
        for k in i..=j {
            if labels[order[k]] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let pos = pos as f64;
    let neg = neg as f64;
    Ok((rank_sum_pos - pos * (pos + 1.0) / 2.0) / (pos * neg))
}

/// One scored evaluation sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub account_id: AccountId,
    pub target_week: i64,
    pub score: f64,
    pub label: bool,
}

/// Score samples in parallel; output order matches input order.
pub fn score_rows(model: &Model, samples: &[WindowSample]) -> Result<Vec<EvalRow>> {
    samples
        .par_iter()
        .map_init(
            || Tape::new(&model.params),
            |tape, sample| {
                tape.reset();
                let pass = model.forward_account(tape, sample)?;
                Ok(EvalRow {
                    account_id: sample.account_id.clone(),
                    target_week: sample.target_week,
                    score: tape.scalar(pass.account_prob),
                    label: sample.label,
                })
            },
        )
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekAuc {
    pub auc: Option<f64>,
    pub n_pos: usize,
    pub n_neg: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub lower: f64,
    pub upper: f64,
    pub resamples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pooled_auc: f64,
    /// AUC per target week; `None` where the week lacks a class.
    pub per_week: BTreeMap<i64, WeekAuc>,
    /// Mean over weeks with a defined AUC.
    pub mean_weekly_auc: Option<f64>,
    pub n_samples: usize,
    pub n_pos: usize,
    pub n_neg: usize,
    pub config_hash: String,
    pub bootstrap: Option<BootstrapCi>,
}

/// Assemble the report from scored rows.
pub fn report_from_rows(
    rows: &[EvalRow],
    config_hash: String,
    bootstrap: Option<(usize, u64)>,
) -> Result<EvalReport> {
    let scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
    let labels: Vec<bool> = rows.iter().map(|r| r.label).collect();
    let pooled_auc = auc(&scores, &labels)?;

    let mut by_week: BTreeMap<i64, (Vec<f64>, Vec<bool>)> = BTreeMap::new();
    for row in rows {
        let entry = by_week.entry(row.target_week).or_default();
        entry.0.push(row.score);
        entry.1.push(row.label);
    }
    let mut per_week = BTreeMap::new();
    let mut defined = Vec::new();
    for (week, (scores, labels)) in by_week {
        let n_pos = labels.iter().filter(|l| **l).count();
        let n_neg = labels.len() - n_pos;
        let week_auc = auc(&scores, &labels).ok();
        if let Some(a) = week_auc {
            defined.push(a);
        }
        per_week.insert(
            week,
            WeekAuc {
                auc: week_auc,
                n_pos,
                n_neg,
            },
        );
    }
    let mean_weekly_auc = if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    };

    let bootstrap = bootstrap.and_then(|(n, seed)| bootstrap_account_auc(rows, n, seed));

    Ok(EvalReport {
        pooled_auc,
        per_week,
        mean_weekly_auc,
        n_samples: rows.len(),
        n_pos: labels.iter().filter(|l| **l).count(),
        n_neg: labels.iter().filter(|l| !**l).count(),
        config_hash,
        bootstrap,
    })
}

/// Percentile bootstrap of the pooled AUC, resampling whole accounts to
/// respect within-account correlation. Resamples that end up single-class
/// are skipped.
pub fn bootstrap_account_auc(rows: &[EvalRow], resamples: usize, seed: u64) -> Option<BootstrapCi> {
    let mut by_account: BTreeMap<&AccountId, Vec<&EvalRow>> = BTreeMap::new();
    for row in rows {
        by_account.entry(&row.account_id).or_default().push(row);
    }
    let accounts: Vec<&Vec<&EvalRow>> = by_account.values().collect();
    if accounts.is_empty() || resamples == 0 {
        return None;
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut aucs = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..accounts.len() {
            let pick = accounts[rng.random_range(0..accounts.len())];
            for row in pick {
                scores.push(row.score);
                labels.push(row.label);
            }
        }
        if let Ok(a) = auc(&scores, &labels) {
            aucs.push(a);
        }
    }
    if aucs.len() < resamples / 2 {
        return None;
    }
    aucs.sort_by(f64::total_cmp);
    let pick = |q: f64| aucs[((aucs.len() - 1) as f64 * q).round() as usize];
    Some(BootstrapCi {
        lower: pick(0.025),
        upper: pick(0.975),
        resamples,
        seed,
    })
}

/// Score test samples and assemble the evaluation report. When the training
/// account set is provided, any overlap with the evaluated accounts is a
/// fatal leakage error.
pub fn evaluate(
    model: &Model,
    samples: &[WindowSample],
    train_accounts: Option<&HashSet<AccountId>>,
    bootstrap: Option<(usize, u64)>,
) -> Result<EvalReport> {
    if let Some(train) = train_accounts {
        for sample in samples {
            if train.contains(&sample.account_id) {
                return Err(Error::Leakage(sample.account_id.to_string()));
            }
        }
    }
    let rows = score_rows(model, samples)?;
    report_from_rows(&rows, model.config_hash(), bootstrap)
}

pub fn write_report(report: &EvalReport, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Score time series (joint account/individual scores per week)
// ---------------------------------------------------------------------------

/// Score every scoreable week of one account: the same windows that training
/// would see, so records stop at the conversion week.
pub fn score_timeseries(
    model: &Model,
    history: &AccountHistory,
    cfg: &IngestConfig,
) -> Result<Vec<ScoreRecord>> {
    let windows = build_windows(history, cfg);
    let mut tape = Tape::new(&model.params);
    windows
        .iter()
        .map(|w| model.score_sample(&mut tape, w))
        .collect()
}

/// Score one specific target week of one account.
pub fn score_week(
    model: &Model,
    history: &AccountHistory,
    cfg: &IngestConfig,
    target_week: i64,
) -> Result<ScoreRecord> {
    let window = build_window_at(history, cfg, target_week);
    let mut tape = Tape::new(&model.params);
    model.score_sample(&mut tape, &window)
}

/// CSV export: week, account score, one column per individual (ordered by
/// first contact).
pub fn write_score_csv(records: &[ScoreRecord], path: &Path) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let individuals: Vec<String> = records
        .first()
        .map(|r| {
            r.individual_scores
                .iter()
                .map(|(id, _)| id.to_string())
                .collect()
        })
        .unwrap_or_default();
    let mut header = vec!["week".to_owned(), "account_score".to_owned()];
    header.extend(individuals.iter().cloned());
    writer
        .write_record(&header)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    for record in records {
        let mut row = vec![
            record.target_week.to_string(),
            format!("{:.6}", record.account_probability),
        ];
        let by_id: HashMap<&str, f64> = record
            .individual_scores
            .iter()
            .map(|(id, p)| (id.as_str(), *p))
            .collect();
        for id in &individuals {
            row.push(
                by_id
                    .get(id.as_str())
                    .map(|p| format!("{p:.6}"))
                    .unwrap_or_default(),
            );
        }
        writer
            .write_record(&row)
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Activity-volume correlation analysis
// ---------------------------------------------------------------------------

/// Weekly (total activity volume, group score) series for one account.
#[derive(Debug, Clone)]
pub struct AccountSeries {
    pub account_id: AccountId,
    pub converted: bool,
    /// (volume, score) per scored week.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationReport {
    /// Mean per-account Pearson r over converted accounts.
    pub r_converted: Option<f64>,
    /// Mean per-account Pearson r over non-converted accounts.
    pub r_not_converted: Option<f64>,
    /// Two-sided p-value of the volume-by-converted interaction slope in the
    /// pooled regression `score ~ volume * converted`.
    pub interaction_p_value: Option<f64>,
    pub n_accounts_used: usize,
    pub n_excluded_zero_variance: usize,
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Ordinary least squares of `score` on `[1, volume, converted,
/// volume*converted]`, returning the two-sided p-value of the interaction
/// coefficient.
fn interaction_p_value(series: &[&AccountSeries]) -> Option<f64> {
    let mut xs: Vec<[f64; 4]> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for s in series {
        let conv = if s.converted { 1.0 } else { 0.0 };
        for (volume, score) in &s.points {
            xs.push([1.0, *volume, conv, volume * conv]);
            ys.push(*score);
        }
    }
    let n = xs.len();
    if n < 6 {
        return None;
    }
    // Normal equations: (X'X) beta = X'y, solved by Gaussian elimination.
    let mut xtx = [[0.0f64; 4]; 4];
    let mut xty = [0.0f64; 4];
    for (x, y) in xs.iter().zip(&ys) {
        for i in 0..4 {
            for j in 0..4 {
                xtx[i][j] += x[i] * x[j];
            }
            xty[i] += x[i] * y;
        }
    }
    let inv = invert4(&xtx)?;
    let mut beta = [0.0f64; 4];
    for i in 0..4 {
        for j in 0..4 {
            beta[i] += inv[i][j] * xty[j];
        }
    }
    let dof = n as f64 - 4.0;
    let mut rss = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        let fit: f64 = (0..4).map(|i| beta[i] * x[i]).sum();
        rss += (y - fit) * (y - fit);
    }
    let sigma2 = rss / dof;
    let se = (sigma2 * inv[3][3]).sqrt();
    if !(se > 0.0) {
        return None;
    }
    let t = beta[3] / se;
    let dist = StudentsT::new(0.0, 1.0, dof).ok()?;
    Some(2.0 * (1.0 - dist.cdf(t.abs())))
}

fn invert4(m: &[[f64; 4]; 4]) -> Option<[[f64; 4]; 4]> {
    let mut a = *m;
    let mut inv = [[0.0f64; 4]; 4];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..4 {
        let pivot = (col..4).max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let scale = a[col][col];
        for j in 0..4 {
            a[col][j] /= scale;
            inv[col][j] /= scale;
        }
        for row in 0..4 {
            if row != col {
                let factor = a[row][col];
                for j in 0..4 {
                    a[row][j] -= factor * a[col][j];
                    inv[row][j] -= factor * inv[col][j];
                }
            }
        }
    }
    Some(inv)
}

/// Per-account Pearson correlation between weekly activity volume and the
/// weekly group score, plus the pooled interaction regression. Accounts with
/// fewer than 3 weeks or zero variance in either series are excluded and
/// counted.
pub fn correlation_analysis(series: &[AccountSeries]) -> CorrelationReport {
    let mut used: Vec<&AccountSeries> = Vec::new();
    let mut excluded = 0usize;
    let mut rs_converted = Vec::new();
    let mut rs_not = Vec::new();
    for s in series {
        if s.points.len() < 3 {
            excluded += 1;
            continue;
        }
        let xs: Vec<f64> = s.points.iter().map(|(v, _)| *v).collect();
        let ys: Vec<f64> = s.points.iter().map(|(_, p)| *p).collect();
        match pearson(&xs, &ys) {
            Some(r) => {
                if s.converted {
                    rs_converted.push(r);
                } else {
                    rs_not.push(r);
                }
                used.push(s);
            }
            None => excluded += 1,
        }
    }
    let mean = |v: &[f64]| {
        if v.is_empty() {
            None
        } else {
            Some(v.iter().sum::<f64>() / v.len() as f64)
        }
    };
    CorrelationReport {
        r_converted: mean(&rs_converted),
        r_not_converted: mean(&rs_not),
        interaction_p_value: interaction_p_value(&used),
        n_accounts_used: used.len(),
        n_excluded_zero_variance: excluded,
    }
}

/// Build the per-account (volume, score) series from score records and the
/// account's weekly totals.
pub fn build_series(
    records_by_account: &BTreeMap<AccountId, Vec<ScoreRecord>>,
    histories: &[AccountHistory],
    labels: &[ConversionLabel],
    _grid: &PeriodGrid,
) -> Vec<AccountSeries> {
    let converted: HashMap<&AccountId, bool> =
        labels.iter().map(|l| (&l.account_id, l.converted)).collect();
    let mut volumes: HashMap<(&AccountId, i64), f64> = HashMap::new();
    for history in histories {
        for member in &history.members {
            for week in &member.weeks {
                *volumes
                    .entry((&history.account_id, week.week_index))
                    .or_insert(0.0) += week.counts.iter().sum::<u32>() as f64;
            }
        }
    }
    records_by_account
        .iter()
        .map(|(account_id, records)| AccountSeries {
            account_id: account_id.clone(),
            converted: converted.get(account_id).copied().unwrap_or(false),
            points: records
                .iter()
                .map(|r| {
                    let volume = volumes
                        .get(&(account_id, r.target_week))
                        .copied()
                        .unwrap_or(0.0);
                    (volume, r.account_probability)
                })
                .collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force concordance count over all (positive, negative) pairs.
    pub fn auc_pair_oracle(scores: &[f64], labels: &[bool]) -> Option<f64> {
        let pos: Vec<f64> = scores
            .iter()
            .zip(labels)
            .filter(|(_, l)| **l)
            .map(|(s, _)| *s)
            .collect();
        let neg: Vec<f64> = scores
            .iter()
            .zip(labels)
            .filter(|(_, l)| !**l)
            .map(|(s, _)| *s)
            .collect();
        if pos.is_empty() || neg.is_empty() {
            return None;
        }
        let mut concordant = 0.0;
        for p in &pos {
            for n in &neg {
                if p > n {
                    concordant += 1.0;
                } else if p == n {
                    concordant += 0.5;
                }
            }
        }
        Some(concordant / (pos.len() * neg.len()) as f64)
    }

    #[test]
    fn perfect_separation_scores_one() {
        let scores = [0.9, 0.8, 0.1, 0.2];
        let labels = [true, true, false, false];
        assert_eq!(auc(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn all_ties_score_half() {
        let scores = [0.5; 6];
        let labels = [true, false, true, false, false, true];
        assert_eq!(auc(&scores, &labels).unwrap(), 0.5);
    }

    #[test]
    fn hand_enumerated_case_gives_three_quarters() {
        // positives {0.9, 0.2}, negatives {0.1, 0.5}: 3 of 4 pairs concordant
        let scores = [0.1, 0.9, 0.5, 0.2];
        let labels = [false, true, false, true];
        assert_eq!(auc(&scores, &labels).unwrap(), 0.75);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(
            auc(&[0.1, 0.9], &[true, true]),
            Err(Error::AucUndefined)
        ));
        assert!(matches!(
            auc(&[0.1, 0.9], &[false, false]),
            Err(Error::AucUndefined)
        ));
    }

    #[test]
    fn rank_implementation_equals_pair_oracle_exactly() {
        let mut rng = ChaCha20Rng::seed_from_u64(4242);
        for trial in 0..300 {
            let n = 2 + rng.random_range(0..60);
            // coarse grid forces plenty of ties
            let scores: Vec<f64> = (0..n)
                .map(|_| (rng.random_range(0..32) as f64) / 32.0)
                .collect();
            let labels: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.4).collect();
            match (auc(&scores, &labels), auc_pair_oracle(&scores, &labels)) {
                (Ok(fast), Some(oracle)) => {
                    assert_eq!(fast, oracle, "trial {trial} diverged");
                }
                (Err(_), None) => {}
                (a, b) => panic!("trial {trial}: definedness mismatch {a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn auc_is_invariant_under_monotone_transforms() {
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        for _ in 0..50 {
            let n = 5 + rng.random_range(0..40);
            let scores: Vec<f64> = (0..n)
                .map(|_| (rng.random_range(0..64) as f64) / 64.0)
                .collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.5).collect();
            labels[0] = true;
            labels[1] = false;
            let base = auc(&scores, &labels).unwrap();
            let exp_scores: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
            let affine_scores: Vec<f64> = scores.iter().map(|s| 2.0 * s + 1.0).collect();
            assert_eq!(auc(&exp_scores, &labels).unwrap(), base);
            assert_eq!(auc(&affine_scores, &labels).unwrap(), base);
        }
    }

    #[test]
    fn complement_symmetry_holds() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = 4 + rng.random_range(0..30);
            let scores: Vec<f64> = (0..n)
                .map(|_| (rng.random_range(0..16) as f64) / 16.0)
                .collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.5).collect();
            labels[0] = true;
            labels[1] = false;
            let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
            let a = auc(&scores, &labels).unwrap();
            let b = auc(&scores, &flipped).unwrap();
            assert!((a + b - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn pearson_matches_textbook_four_point_instance() {
        // x = [1,2,3,4], y = [2,4,5,9]:
        // r = (sum xy - n mx my) / sqrt((sum x^2 - n mx^2)(sum y^2 - n my^2))
        //   = 11 / sqrt(5 * 26)
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [2.0, 4.0, 5.0, 9.0];
        let expect = 11.0 / (5.0f64 * 26.0).sqrt();
        let got = pearson(&xs, &ys).unwrap();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn pearson_is_one_for_scaled_series_and_undefined_for_constant() {
        let xs = [3.0, 7.0, 11.0, 2.0];
        let scaled: Vec<f64> = xs.iter().map(|x| 0.25 * x).collect();
        assert!((pearson(&xs, &scaled).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(pearson(&xs, &[5.0, 5.0, 5.0, 5.0]), None);
    }

    #[test]
    fn correlation_analysis_reports_and_excludes() {
        let series = vec![
            AccountSeries {
                account_id: AccountId::new("c1"),
                converted: true,
                points: vec![(1.0, 0.1), (2.0, 0.2), (3.0, 0.3), (4.0, 0.4)],
            },
            AccountSeries {
                account_id: AccountId::new("n1"),
                converted: false,
                points: vec![(1.0, 0.4), (2.0, 0.3), (3.0, 0.2), (4.0, 0.1)],
            },
            AccountSeries {
                account_id: AccountId::new("flat"),
                converted: false,
                points: vec![(1.0, 0.5), (2.0, 0.5), (3.0, 0.5), (4.0, 0.5)],
            },
            AccountSeries {
                account_id: AccountId::new("short"),
                converted: false,
                points: vec![(1.0, 0.5)],
            },
        ];
        let report = correlation_analysis(&series);
        assert_eq!(report.n_accounts_used, 2);
        assert_eq!(report.n_excluded_zero_variance, 2);
        assert!((report.r_converted.unwrap() - 1.0).abs() < 1e-12);
        assert!((report.r_not_converted.unwrap() + 1.0).abs() < 1e-12);
        let p = report.interaction_p_value.unwrap();
        assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn bootstrap_interval_brackets_the_point_estimate() {
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let rows: Vec<EvalRow> = (0..60)
            .flat_map(|a| {
                let account = AccountId::new(format!("a{a}"));
                let converted = a % 3 == 0;
                (0..5)
                    .map(|w| EvalRow {
                        account_id: account.clone(),
                        target_week: w,
                        score: rng.random::<f64>() * 0.5 + if converted && w == 4 { 0.4 } else { 0.0 },
                        label: converted && w == 4,
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        let scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
        let labels: Vec<bool> = rows.iter().map(|r| r.label).collect();
        let point = auc(&scores, &labels).unwrap();
        let ci = bootstrap_account_auc(&rows, 200, 5).unwrap();
        assert!(ci.lower <= point && point <= ci.upper);
        assert!(ci.lower < ci.upper);
        // deterministic
        let ci2 = bootstrap_account_auc(&rows, 200, 5).unwrap();
        assert_eq!(ci, ci2);
    }
}
