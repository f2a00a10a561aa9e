//! Synthetic behavior-log generator with a planted group-level signal.
//!
//! Every account carries a latent intent trajectory (a monotone-trend random
//! walk in [0,1]). Members see that intent through noisy per-individual
//! lenses: each individual has an engagement propensity and a signal quality
//! that mixes account intent with an idiosyncratic walk. Weekly activity
//! counts follow an overdispersed (gamma-Poisson) distribution scaled by the
//! individual's effective intent, and activity types shift with intent
//! (click/sales mass grows, unsubscribe mass shrinks). The conversion hazard
//! per week is `logistic(signal_strength * intent - offset)`, with the offset
//! calibrated so the expected ever-converted fraction matches the configured
//! rate. At `signal_strength = 0` labels are independent of all activity.
//!
//! Generation is deterministic: every account draws from its own counter
//! stream of the seed, so parallelism cannot change the output.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Normal, Poisson};
use rayon::prelude::*;

use crate::datamodel::{
    AccountId, AccountStatic, ActivityEvent, ActivityType, ConversionLabel, Dataset, IndividualId,
    IndividualStatic,
};
use crate::error::{Error, Result};
use crate::kv;

/// Generator configuration. Defaults mirror the reference dataset's shape:
/// 3..25 individuals per account, a 35-week horizon, a 90th-percentile
/// weekly activity count of 8 capped at 114, and individual activity spans
/// with a 90th percentile around 27 weeks.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_accounts: usize,
    pub group_size_min: usize,
    pub group_size_max: usize,
    pub span_weeks: usize,
    /// Fraction of accounts that ever convert.
    pub conversion_rate: f64,
    /// Calibration target for the 90th percentile of weekly activity counts
    /// over active (individual, week) pairs.
    pub activity_rate_90pct: f64,
    pub max_weekly_activities: u32,
    pub duration_90pct_weeks: u32,
    pub seed: u64,
    /// Coupling between intent and the conversion hazard; 0 = pure noise.
    pub signal_strength: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_accounts: 100,
            group_size_min: 3,
            group_size_max: 25,
            span_weeks: 35,
            conversion_rate: 0.1,
            activity_rate_90pct: 8.0,
            max_weekly_activities: 114,
            duration_90pct_weeks: 27,
            seed: 0,
            signal_strength: 2.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_accounts == 0 || self.span_weeks < 6 {
            return Err(Error::Config(
                "n_accounts must be positive and span_weeks at least 6".into(),
            ));
        }
        if self.group_size_min < 1 || self.group_size_max > 25 || self.group_size_min > self.group_size_max
        {
            return Err(Error::Config(
                "group size range must lie within [1, 25]".into(),
            ));
        }
        if !(self.conversion_rate > 0.0 && self.conversion_rate < 1.0) {
            return Err(Error::InfeasibleCalibration(format!(
                "conversion_rate {} is not reachable; it must lie strictly in (0, 1)",
                self.conversion_rate
            )));
        }
        if self.activity_rate_90pct <= 0.0 || self.max_weekly_activities == 0 {
            return Err(Error::Config("activity rates must be positive".into()));
        }
        if self.signal_strength < 0.0 {
            return Err(Error::Config("signal_strength must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn from_kv_file(path: &Path) -> Result<SynthConfig> {
        let map = kv::read_file(path)?;
        let mut cfg = SynthConfig::default();
        if let Some(v) = kv::get_parsed(&map, "n_accounts")? {
            cfg.n_accounts = v;
        }
        if let Some(v) = kv::get_parsed(&map, "group_size_min")? {
            cfg.group_size_min = v;
        }
        if let Some(v) = kv::get_parsed(&map, "group_size_max")? {
            cfg.group_size_max = v;
        }
        if let Some(v) = kv::get_parsed(&map, "span_weeks")? {
            cfg.span_weeks = v;
        }
        if let Some(v) = kv::get_parsed(&map, "conversion_rate")? {
            cfg.conversion_rate = v;
        }
        if let Some(v) = kv::get_parsed(&map, "activity_rate_90pct")? {
            cfg.activity_rate_90pct = v;
        }
        if let Some(v) = kv::get_parsed(&map, "max_weekly_activities")? {
            cfg.max_weekly_activities = v;
        }
        if let Some(v) = kv::get_parsed(&map, "duration_90pct_weeks")? {
            cfg.duration_90pct_weeks = v;
        }
        if let Some(v) = kv::get_parsed(&map, "seed")? {
            cfg.seed = v;
        }
        if let Some(v) = kv::get_parsed(&map, "signal_strength")? {
            cfg.signal_strength = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv_string(&self) -> String {
        format!(
            "n_accounts = {}\ngroup_size_min = {}\ngroup_size_max = {}\nspan_weeks = {}\n\
             conversion_rate = {}\nactivity_rate_90pct = {}\nmax_weekly_activities = {}\n\
             duration_90pct_weeks = {}\nseed = {}\nsignal_strength = {}\n",
            self.n_accounts,
            self.group_size_min,
            self.group_size_max,
            self.span_weeks,
            self.conversion_rate,
            self.activity_rate_90pct,
            self.max_weekly_activities,
            self.duration_90pct_weeks,
            self.seed,
            self.signal_strength
        )
    }
}

/// Latent intent for one account-week; diagnostics only, never model input.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GroundTruthIntent {
    pub account_id: AccountId,
    pub week_index: i64,
    pub intent: f64,
}

#[derive(Debug)]
pub struct SynthOutput {
    pub dataset: Dataset,
    pub ground_truth: Vec<GroundTruthIntent>,
}

/// Generation grid anchor: Sunday 2024-01-07 00:00:00 UTC.
const ANCHOR: i64 = 1_704_585_600;
const WEEK_SECS: i64 = 7 * 86_400;

/// Baseline weekly-count scale at the default 90th-percentile target of 8.
const RATE_C0: f64 = 2.5;
/// Overdispersion of the gamma-Poisson weekly counts.
const NB_SHAPE: f64 = 3.0;

/// Base mass per activity type; the first three (open/click/send) carry
/// most of the traffic.
const TYPE_BASE: [f64; 9] = [0.30, 0.10, 0.09, 0.05, 0.16, 0.07, 0.06, 0.09, 0.08];

fn type_weights(eff: f64, out: &mut [f64; 9]) {
    *out = TYPE_BASE;
    out[ActivityType::ClickEmail.code() as usize] *= 1.0 + 1.5 * eff;
    out[ActivityType::OpenSalesEmail.code() as usize] *= 1.0 + 0.8 * eff;
    out[ActivityType::ClickSalesEmail.code() as usize] *= 1.0 + 2.2 * eff;
    out[ActivityType::SendSalesEmail.code() as usize] *= 1.0 + 1.8 * eff;
    out[ActivityType::UnsubscribeEmail.code() as usize] *= (1.0 - eff).max(0.05);
}

struct MemberPlan {
    onboard: i64,
    end: i64,
    propensity: f64,
    quality: f64,
    /// Idiosyncratic walk, indexed by week - onboard.
    noise: Vec<f64>,
    source: &'static str,
    opt_out_email: bool,
    opt_out_phone: bool,
}

struct CompactEvent {
    member: u32,
    timestamp: i64,
    code: u8,
}

struct AccountBundle {
    start: i64,
    /// Intent indexed by week - start, covering start..=start+span_len.
    intent: Vec<f64>,
    members: Vec<MemberPlan>,
    events: Vec<CompactEvent>,
    first_event_week: i64,
    last_event_week: i64,
    revenue: f64,
    employees: u64,
}

const SOURCES: [&str; 4] = ["web", "event", "referral", "ad"];

fn generate_account(cfg: &SynthConfig, index: usize) -> AccountBundle {
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64 + 1);

    let group_size = rng.random_range(cfg.group_size_min..=cfg.group_size_max);
    let max_len = (cfg.span_weeks - 1).min(34).max(9);
    let min_len = 12.min(max_len - 1);
    let span_len = rng.random_range(min_len..=max_len) as i64;
    let start = rng.random_range(0..=(cfg.span_weeks as i64 - span_len)).max(0);

    // Monotone-trend random walk in [0, 1].
    let drift = rng.random::<f64>() * 0.05;
    let walk_noise = Normal::new(0.0, 0.03).expect("valid normal");
    let mut intent = Vec::with_capacity(span_len as usize + 1);
    let mut level: f64 = 0.05 + rng.random::<f64>() * 0.30;
    for _ in 0..=span_len {
        intent.push(level);
        level = (level + drift + walk_noise.sample(&mut rng)).clamp(0.0, 1.0);
    }

    let propensity_dist = LogNormal::new(-0.125, 0.5).expect("valid lognormal");
    let duration_scale = cfg.duration_90pct_weeks as f64 / 0.9f64.sqrt();
    let mut members = Vec::with_capacity(group_size);
    for _ in 0..group_size {
        let onboard = start + rng.random_range(0..=(span_len / 2).max(0));
        let u: f64 = rng.random();
        let duration = (duration_scale * u.sqrt()).round().clamp(1.0, 35.0) as i64;
        let end = (onboard + duration - 1).min(start + span_len - 1);
        let quality = 0.15 + 0.85 * rng.random::<f64>();
        let n_weeks = (end - onboard + 1).max(0) as usize;
        let mut noise = Vec::with_capacity(n_weeks);
        let mut nu: f64 = 0.2 + 0.6 * rng.random::<f64>();
        for _ in 0..n_weeks {
            noise.push(nu);
            nu = (nu + walk_noise.sample(&mut rng)).clamp(0.0, 1.0);
        }
        members.push(MemberPlan {
            onboard,
            end,
            propensity: propensity_dist.sample(&mut rng),
            quality,
            noise,
            source: SOURCES[rng.random_range(0..SOURCES.len())],
            opt_out_email: rng.random::<f64>() < 0.03,
            opt_out_phone: rng.random::<f64>() < 0.10,
        });
    }

    let rate_scale = RATE_C0 * cfg.activity_rate_90pct / 8.0;
    let count_gamma_scale = 1.0 / NB_SHAPE;
    let mut events = Vec::new();
    let mut weights = [0.0f64; 9];
    for (mi, member) in members.iter().enumerate() {
        for week in member.onboard..=member.end {
            let eff = member.quality * intent[(week - start) as usize]
                + (1.0 - member.quality) * member.noise[(week - member.onboard) as usize];
            let mu = rate_scale * member.propensity * (0.35 + 1.8 * eff);
            let lambda = Gamma::new(NB_SHAPE, mu * count_gamma_scale)
                .expect("valid gamma")
                .sample(&mut rng);
            let count = if lambda < 1e-9 {
                0
            } else {
                (Poisson::new(lambda).expect("valid poisson").sample(&mut rng) as u32)
                    .min(cfg.max_weekly_activities)
            };
            if count == 0 {
                continue;
            }
            let mut offsets: Vec<i64> = (0..count)
                .map(|_| rng.random_range(0..WEEK_SECS))
                .collect();
            offsets.sort_unstable();
            for i in 1..offsets.len() {
                if offsets[i] <= offsets[i - 1] {
                    offsets[i] = offsets[i - 1] + 1;
                }
            }
            type_weights(eff, &mut weights);
            let total: f64 = weights.iter().sum();
            for offset in offsets {
                let mut pick = rng.random::<f64>() * total;
                let mut code = 8u8;
                for (c, w) in weights.iter().enumerate() {
                    if pick < *w {
                        code = c as u8;
                        break;
                    }
                    pick -= w;
                }
                events.push(CompactEvent {
                    member: mi as u32,
                    timestamp: ANCHOR + week * WEEK_SECS + offset,
                    code,
                });
            }
        }
    }
    events.sort_by_key(|e| (e.timestamp, e.member, e.code));

    let (first_event_week, last_event_week) = if events.is_empty() {
        (start, start)
    } else {
        (
            (events.first().unwrap().timestamp - ANCHOR).div_euclid(WEEK_SECS),
            (events.last().unwrap().timestamp - ANCHOR).div_euclid(WEEK_SECS),
        )
    };

    let revenue_dist = LogNormal::<f64>::new(16.0, 1.0).expect("valid lognormal");
    let employees_dist = LogNormal::<f64>::new(5.3, 1.0).expect("valid lognormal");
    AccountBundle {
        start,
        intent,
        members,
        events,
        first_event_week,
        last_event_week,
        revenue: (revenue_dist.sample(&mut rng) * 100.0).round() / 100.0,
        employees: employees_dist.sample(&mut rng).round().max(1.0) as u64,
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Hazards over the account's decision weeks `first_event..=last_event+1`.
fn hazards(bundle: &AccountBundle, signal: f64, offset: f64) -> Vec<f64> {
    (bundle.first_event_week..=bundle.last_event_week + 1)
        .map(|week| {
            let idx = (week - bundle.start).clamp(0, bundle.intent.len() as i64 - 1) as usize;
            sigmoid(signal * bundle.intent[idx] - offset)
        })
        .collect()
}

fn expected_conversion_rate(bundles: &[AccountBundle], signal: f64, offset: f64) -> f64 {
    let total: f64 = bundles
        .iter()
        .map(|b| {
            let miss: f64 = hazards(b, signal, offset).iter().map(|h| 1.0 - h).product();
            1.0 - miss
        })
        .sum();
    total / bundles.len() as f64
}

/// Solve for the hazard offset that hits the configured conversion rate in
/// expectation. Monotone in the offset, so plain bisection.
fn calibrate_offset(bundles: &[AccountBundle], cfg: &SynthConfig) -> Result<f64> {
    let (mut lo, mut hi) = (-40.0, 40.0 + cfg.signal_strength);
    let f_lo = expected_conversion_rate(bundles, cfg.signal_strength, lo);
    let f_hi = expected_conversion_rate(bundles, cfg.signal_strength, hi);
    if !(f_hi <= cfg.conversion_rate && cfg.conversion_rate <= f_lo) {
        return Err(Error::InfeasibleCalibration(format!(
            "target rate {} outside achievable range [{f_hi:.6}, {f_lo:.6}]",
            cfg.conversion_rate
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected_conversion_rate(bundles, cfg.signal_strength, mid) >= cfg.conversion_rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let offset = 0.5 * (lo + hi);
    let achieved = expected_conversion_rate(bundles, cfg.signal_strength, offset);
    if (achieved - cfg.conversion_rate).abs() > 1e-3 {
        return Err(Error::InfeasibleCalibration(format!(
            "calibrated rate {achieved:.6} missed target {}",
            cfg.conversion_rate
        )));
    }
    Ok(offset)
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;

    let bundles: Vec<AccountBundle> = (0..cfg.n_accounts)
        .into_par_iter()
        .map(|i| generate_account(cfg, i))
        .collect();

    let offset = calibrate_offset(&bundles, cfg)?;

    // Conversion draws use their own seed streams, so activity generation and
    // labels stay decoupled.
    let conversions: Vec<Option<i64>> = (0..bundles.len())
        .map(|i| {
            let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
            rng.set_stream((1u64 << 32) + i as u64 + 1);
            let b = &bundles[i];
            for (j, h) in hazards(b, cfg.signal_strength, offset).iter().enumerate() {
                if rng.random::<f64>() < *h {
                    return Some(b.first_event_week + j as i64);
                }
            }
            None
        })
        .collect();

    let epoch = bundles
        .iter()
        .zip(&conversions)
        .filter(|(b, _)| !b.events.is_empty())
        .map(|(b, _)| b.first_event_week)
        .min()
        .ok_or_else(|| Error::Other("generator produced no events".into()))?;

    let mut events = Vec::new();
    let mut labels = Vec::with_capacity(cfg.n_accounts);
    let mut individual_statics = Vec::new();
    let mut account_statics = Vec::with_capacity(cfg.n_accounts);
    let mut ground_truth = Vec::new();

    for (i, (bundle, conversion)) in bundles.iter().zip(&conversions).enumerate() {
        let account_id = AccountId::new(format!("acct{i:05}"));
        let member_id =
            |mi: u32| IndividualId::new(format!("ind{i:05}m{mi:02}"));

        let cutoff = conversion.unwrap_or(i64::MAX);
        for ev in &bundle.events {
            let week = (ev.timestamp - ANCHOR).div_euclid(WEEK_SECS);
            if week > cutoff {
                continue;
            }
            events.push(ActivityEvent {
                account_id: account_id.clone(),
                individual_id: member_id(ev.member),
                timestamp: ev.timestamp,
                activity: ActivityType::from_code(ev.code).expect("valid code"),
            });
        }

        labels.push(ConversionLabel {
            account_id: account_id.clone(),
            converted: conversion.is_some(),
            conversion_week: conversion.map(|w| w - epoch),
        });

        for (mi, member) in bundle.members.iter().enumerate() {
            individual_statics.push(IndividualStatic {
                individual_id: member_id(mi as u32),
                source_of_arrival: member.source.to_owned(),
                opt_out_email: member.opt_out_email,
                opt_out_phone: member.opt_out_phone,
            });
        }

        account_statics.push(AccountStatic {
            account_id: account_id.clone(),
            revenue: bundle.revenue,
            num_employees: bundle.employees,
        });

        let last_decision = (bundle.last_event_week + 1).min(cutoff);
        for week in bundle.first_event_week..=last_decision {
            let idx = (week - bundle.start).clamp(0, bundle.intent.len() as i64 - 1) as usize;
            ground_truth.push(GroundTruthIntent {
                account_id: account_id.clone(),
                week_index: week - epoch,
                intent: bundle.intent[idx],
            });
        }
    }

    events.sort_by(|a, b| {
        (a.timestamp, &a.account_id, &a.individual_id, a.activity.code()).cmp(&(
            b.timestamp,
            &b.account_id,
            &b.individual_id,
            b.activity.code(),
        ))
    });

    Ok(SynthOutput {
        dataset: Dataset {
            events,
            labels,
            individual_statics,
            account_statics,
        },
        ground_truth,
    })
}

pub fn write_ground_truth(path: &Path, records: &[GroundTruthIntent]) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    writer
        .write_record(["account_id", "week_index", "intent"])
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    for r in records {
        writer
            .write_record([
                r.account_id.as_str(),
                &r.week_index.to_string(),
                &format!("{:.6}", r.intent),
            ])
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruthIntent>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(path, 0, e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        out.push(GroundTruthIntent {
            account_id: AccountId::new(record.get(0).unwrap_or("")),
            week_index: record
                .get(1)
                .unwrap_or("")
                .parse()
                .map_err(|_| Error::parse(path, line, "bad week_index"))?,
            intent: record
                .get(2)
                .unwrap_or("")
                .parse()
                .map_err(|_| Error::parse(path, line, "bad intent"))?,
        });
    }
    Ok(out)
}
