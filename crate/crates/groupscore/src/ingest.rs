//! Turn raw event logs into labeled window samples with account-level
//! train/test splits.
//!
//! Events are bucketed into weekly periods (Sunday 00:00 UTC boundaries),
//! each week becomes a fixed-length activity sequence, and every account
//! yields one sample per scoreable target week: the window of the preceding
//! four weeks for every member, labeled with "converts in the target week".

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::datamodel::{
    absolute_week, AccountId, AccountStatic, ActivityEvent, ActivityType, ConversionLabel,
    Dataset, IndividualId, IndividualStatic, IndividualWindow, WeekSequence, WindowSample,
};
use crate::error::{Error, Result};

/// Account-level split specification. The individual sets of the two sides
/// are disjoint because every individual belongs to exactly one account.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

/// How a member's window weeks are selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowMode {
    /// The four calendar weeks before the target week; weeks without
    /// activity appear as inactive sequences.
    Calendar,
    /// Per individual, inactive weeks are dropped and older active weeks
    /// back-fill the window, so the window holds the individual's most
    /// recent four active weeks before the target.
    Compress,
}

impl WindowMode {
    pub fn parse(s: &str) -> Option<WindowMode> {
        match s {
            "calendar" => Some(WindowMode::Calendar),
            "compress" => Some(WindowMode::Compress),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WindowMode::Calendar => "calendar",
            WindowMode::Compress => "compress",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub window_len: usize,
    pub seq_len: usize,
    /// Days per period. Weekly (7) is the tested configuration; other values
    /// are supported as a knob.
    pub period_days: u32,
    pub window_mode: WindowMode,
    /// Drop individuals that opted out of email.
    pub exclude_opt_out: bool,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            window_len: 4,
            seq_len: 9,
            period_days: 7,
            window_mode: WindowMode::Calendar,
            exclude_opt_out: true,
        }
    }
}

/// Maps timestamps to period indices relative to the dataset epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodGrid {
    /// Absolute Sunday-week index of the epoch week.
    pub epoch_week: i64,
    pub period_days: u32,
}

impl PeriodGrid {
    /// Anchor the grid at the week of the earliest event.
    pub fn from_events(events: &[ActivityEvent], period_days: u32) -> Option<PeriodGrid> {
        let first = events.iter().map(|e| e.timestamp).min()?;
        Some(PeriodGrid {
            epoch_week: absolute_week(first),
            period_days,
        })
    }

    pub fn period_of(&self, timestamp: i64) -> i64 {
        if self.period_days == 7 {
            absolute_week(timestamp) - self.epoch_week
        } else {
            let anchor = (self.epoch_week * 7 - 4) * 86_400;
            (timestamp - anchor).div_euclid(self.period_days as i64 * 86_400)
        }
    }
}

/// Bucket one individual's events into per-week sequences.
///
/// Within a week, activities are ordered by timestamp; when a week holds more
/// than `seq_len` activities the most recent `seq_len` are kept. `deltas`
/// holds hours between kept consecutive activities (slot 0 is 0), and
/// `counts` the untruncated per-type totals.
pub fn bucket_weeks(
    events: &[&ActivityEvent],
    grid: &PeriodGrid,
    seq_len: usize,
) -> Vec<WeekSequence> {
    let mut sorted: Vec<&ActivityEvent> = events.to_vec();
    sorted.sort_by_key(|e| (e.timestamp, e.activity.code()));

    let mut weeks: BTreeMap<i64, Vec<&ActivityEvent>> = BTreeMap::new();
    for ev in sorted {
        weeks.entry(grid.period_of(ev.timestamp)).or_default().push(ev);
    }

    weeks
        .into_iter()
        .map(|(week_index, evs)| {
            let mut counts = vec![0u32; ActivityType::COUNT];
            for ev in &evs {
                counts[ev.activity.code() as usize] += 1;
            }
            let kept = if evs.len() > seq_len {
                &evs[evs.len() - seq_len..]
            } else {
                &evs[..]
            };
            let valid_len = kept.len();
            let mut codes = vec![ActivityType::OpenEmail; seq_len];
            let mut deltas = vec![0.0; seq_len];
            for (i, ev) in kept.iter().enumerate() {
                codes[i] = ev.activity;
                if i > 0 {
                    deltas[i] = (ev.timestamp - kept[i - 1].timestamp) as f64 / 3600.0;
                }
            }
            WeekSequence {
                week_index,
                codes,
                valid_len,
                deltas,
                counts,
            }
        })
        .collect()
}

/// Everything known about one account before windowing.
#[derive(Debug, Clone)]
pub struct AccountHistory {
    pub account_id: AccountId,
    /// Members ordered by first-contact time, each with their active weeks.
    pub members: Vec<MemberHistory>,
    pub account_static: AccountStatic,
    pub conversion_week: Option<i64>,
}

#[derive(Debug, Clone)]
pub struct MemberHistory {
    pub individual_id: IndividualId,
    pub first_contact: i64,
    pub weeks: Vec<WeekSequence>,
    pub statics: IndividualStatic,
}

impl AccountHistory {
    pub fn first_active_week(&self) -> Option<i64> {
        self.members
            .iter()
            .flat_map(|m| m.weeks.first().map(|w| w.week_index))
            .min()
    }

    pub fn last_active_week(&self) -> Option<i64> {
        self.members
            .iter()
            .flat_map(|m| m.weeks.last().map(|w| w.week_index))
            .max()
    }
}

/// Build per-account histories from a raw dataset.
pub fn build_histories(dataset: &Dataset, cfg: &IngestConfig) -> Result<(Vec<AccountHistory>, PeriodGrid)> {
    let grid = PeriodGrid::from_events(&dataset.events, cfg.period_days)
        .ok_or_else(|| Error::Other("dataset has no events".into()))?;

    let statics_by_individual: HashMap<&IndividualId, &IndividualStatic> = dataset
        .individual_statics
        .iter()
        .map(|s| (&s.individual_id, s))
        .collect();
    let statics_by_account: HashMap<&AccountId, &AccountStatic> = dataset
        .account_statics
        .iter()
        .map(|s| (&s.account_id, s))
        .collect();
    let labels_by_account: HashMap<&AccountId, &ConversionLabel> = dataset
        .labels
        .iter()
        .map(|l| (&l.account_id, l))
        .collect();

    let mut events_by_account: BTreeMap<&AccountId, BTreeMap<&IndividualId, Vec<&ActivityEvent>>> =
        BTreeMap::new();
    for ev in &dataset.events {
        events_by_account
            .entry(&ev.account_id)
            .or_default()
            .entry(&ev.individual_id)
            .or_default()
            .push(ev);
    }

    let mut histories = Vec::with_capacity(events_by_account.len());
    for (account_id, members) in events_by_account {
        let mut member_histories = Vec::new();
        for (individual_id, events) in members {
            let statics = statics_by_individual
                .get(individual_id)
                .map(|s| (*s).clone())
                .unwrap_or_else(|| IndividualStatic::unknown(individual_id.clone()));
            if cfg.exclude_opt_out && statics.opt_out_email {
                continue;
            }
            let first_contact = events.iter().map(|e| e.timestamp).min().expect("nonempty");
            let weeks = bucket_weeks(&events, &grid, cfg.seq_len);
            member_histories.push(MemberHistory {
                individual_id: individual_id.clone(),
                first_contact,
                weeks,
                statics,
            });
        }
        if member_histories.is_empty() {
            continue;
        }
        member_histories.sort_by(|a, b| {
            a.first_contact
                .cmp(&b.first_contact)
                .then_with(|| a.individual_id.cmp(&b.individual_id))
        });
        let account_static = statics_by_account
            .get(account_id)
            .map(|s| (*s).clone())
            .unwrap_or_else(|| AccountStatic::unknown(account_id.clone()));
        let conversion_week = labels_by_account
            .get(account_id)
            .and_then(|l| l.conversion_week);
        histories.push(AccountHistory {
            account_id: account_id.clone(),
            members: member_histories,
            account_static,
            conversion_week,
        });
    }
    Ok((histories, grid))
}

/// One window sample per target week from `first_active + window_len` through
/// `min(last_active + 1, conversion_week)`. Windows after the conversion are
/// dropped; the label is true exactly at the conversion week.
pub fn build_windows(history: &AccountHistory, cfg: &IngestConfig) -> Vec<WindowSample> {
    let (Some(first), Some(last)) = (history.first_active_week(), history.last_active_week())
    else {
        return Vec::new();
    };
    let start = first + cfg.window_len as i64;
    let mut end = last + 1;
    if let Some(conv) = history.conversion_week {
        end = end.min(conv);
    }
    (start..=end)
        .map(|target_week| build_window_at(history, cfg, target_week))
        .collect()
}

/// Materialize the sample predicting `target_week`.
pub fn build_window_at(history: &AccountHistory, cfg: &IngestConfig, target_week: i64) -> WindowSample {
    let per_individual = history
        .members
        .iter()
        .map(|m| {
            let weeks = match cfg.window_mode {
                WindowMode::Calendar => calendar_window(m, cfg, target_week),
                WindowMode::Compress => compress_window(m, cfg, target_week),
            };
            IndividualWindow {
                individual_id: m.individual_id.clone(),
                weeks,
                statics: m.statics.clone(),
            }
        })
        .collect();
    WindowSample {
        account_id: history.account_id.clone(),
        target_week,
        per_individual,
        account_static: history.account_static.clone(),
        label: history.conversion_week == Some(target_week),
    }
}

fn calendar_window(m: &MemberHistory, cfg: &IngestConfig, target_week: i64) -> Vec<WeekSequence> {
    let by_week: HashMap<i64, &WeekSequence> =
        m.weeks.iter().map(|w| (w.week_index, w)).collect();
    (target_week - cfg.window_len as i64..target_week)
        .map(|w| {
            by_week
                .get(&w)
                .map(|seq| (*seq).clone())
                .unwrap_or_else(|| WeekSequence::inactive(w, cfg.seq_len))
        })
        .collect()
}

fn compress_window(m: &MemberHistory, cfg: &IngestConfig, target_week: i64) -> Vec<WeekSequence> {
    let recent: Vec<&WeekSequence> = m
        .weeks
        .iter()
        .filter(|w| w.week_index < target_week)
        .collect();
    let take = recent.len().min(cfg.window_len);
    let kept = &recent[recent.len() - take..];
    let mut weeks: Vec<WeekSequence> = Vec::with_capacity(cfg.window_len);
    for pad in 0..cfg.window_len - take {
        weeks.push(WeekSequence::inactive(
            target_week - (cfg.window_len - pad) as i64,
            cfg.seq_len,
        ));
    }
    weeks.extend(kept.iter().map(|w| (*w).clone()));
    weeks
}

/// Deterministic account-level partition.
pub fn split_accounts(accounts: &[AccountId], spec: &SplitSpec) -> Result<(Vec<AccountId>, Vec<AccountId>)> {
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(Error::InvalidSplitFraction(spec.test_fraction));
    }
    let mut sorted: Vec<AccountId> = accounts.to_vec();
    sorted.sort();
    sorted.dedup();
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    sorted.shuffle(&mut rng);
    let n = sorted.len();
    let mut n_test = (n as f64 * spec.test_fraction).round() as usize;
    if n >= 2 {
        n_test = n_test.clamp(1, n - 1);
    }
    let mut test: Vec<AccountId> = sorted[..n_test].to_vec();
    let mut train: Vec<AccountId> = sorted[n_test..].to_vec();
    train.sort();
    test.sort();
    Ok((train, test))
}

/// Full ingest output: windows for both splits plus the split itself.
#[derive(Debug)]
pub struct IngestOutput {
    pub train: Vec<WindowSample>,
    pub test: Vec<WindowSample>,
    pub train_accounts: Vec<AccountId>,
    pub test_accounts: Vec<AccountId>,
    pub grid: PeriodGrid,
}

pub fn ingest(dataset: &Dataset, cfg: &IngestConfig, split: &SplitSpec) -> Result<IngestOutput> {
    let (histories, grid) = build_histories(dataset, cfg)?;
    let accounts: Vec<AccountId> = histories.iter().map(|h| h.account_id.clone()).collect();
    let (train_accounts, test_accounts) = split_accounts(&accounts, split)?;
    let test_set: HashSet<&AccountId> = test_accounts.iter().collect();

    let mut train = Vec::new();
    let mut test = Vec::new();
    for history in &histories {
        let windows = build_windows(history, cfg);
        if test_set.contains(&history.account_id) {
            test.extend(windows);
        } else {
            train.extend(windows);
        }
    }
    Ok(IngestOutput {
        train,
        test,
        train_accounts,
        test_accounts,
        grid,
    })
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

pub const MANIFEST_FILE: &str = "ingest_manifest.json";
pub const TRAIN_SAMPLES_FILE: &str = "train_samples.csv";
pub const TEST_SAMPLES_FILE: &str = "test_samples.csv";

/// On-disk description of an ingest run. Training loads samples through this
/// manifest and only ever touches the train side; the test sample file is
/// read exclusively by evaluation commands.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestManifest {
    pub data_dir: PathBuf,
    pub config: IngestConfig,
    pub split: SplitSpec,
    pub grid: PeriodGrid,
    pub train_accounts: Vec<AccountId>,
    pub test_accounts: Vec<AccountId>,
    pub n_train_samples: usize,
    pub n_test_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleRole {
    Train,
    Test,
}

fn write_sample_manifest(path: &Path, samples: &[WindowSample]) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    writer
        .write_record(["account_id", "target_week", "label"])
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    for s in samples {
        writer
            .write_record([
                s.account_id.as_str(),
                &s.target_week.to_string(),
                if s.label { "true" } else { "false" },
            ])
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Write the split, config and per-split sample manifests to `out_dir`.
pub fn write_ingest_outputs(
    out_dir: &Path,
    data_dir: &Path,
    cfg: &IngestConfig,
    split: &SplitSpec,
    output: &IngestOutput,
) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let manifest = IngestManifest {
        data_dir: data_dir.to_path_buf(),
        config: cfg.clone(),
        split: *split,
        grid: output.grid,
        train_accounts: output.train_accounts.clone(),
        test_accounts: output.test_accounts.clone(),
        n_train_samples: output.train.len(),
        n_test_samples: output.test.len(),
    };
    let manifest_path = out_dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))?;
    write_sample_manifest(&out_dir.join(TRAIN_SAMPLES_FILE), &output.train)?;
    write_sample_manifest(&out_dir.join(TEST_SAMPLES_FILE), &output.test)?;
    Ok(())
}

pub fn read_manifest(ingest_dir: &Path) -> Result<IngestManifest> {
    let path = ingest_dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(&path, 0, e.to_string()))
}

/// Rebuild the samples for one side of the split from the manifest.
///
/// This is the path-level guard that keeps training away from test data:
/// `SampleRole::Train` rebuilds windows only for train-side accounts and
/// never opens the test sample manifest.
pub fn load_samples(ingest_dir: &Path, role: SampleRole) -> Result<(IngestManifest, Vec<WindowSample>)> {
    let manifest = read_manifest(ingest_dir)?;
    let dataset = Dataset::read_dir(&manifest.data_dir)?;
    let (histories, grid) = build_histories(&dataset, &manifest.config)?;
    if grid != manifest.grid {
        return Err(Error::Other(
            "dataset changed since ingest: period grid mismatch".into(),
        ));
    }
    let wanted: BTreeSet<&AccountId> = match role {
        SampleRole::Train => manifest.train_accounts.iter().collect(),
        SampleRole::Test => manifest.test_accounts.iter().collect(),
    };
    let mut samples = Vec::new();
    for history in &histories {
        if wanted.contains(&history.account_id) {
            samples.extend(build_windows(history, &manifest.config));
        }
    }
    // Cross-check against the sample manifest written at ingest time.
    let expected = match role {
        SampleRole::Train => manifest.n_train_samples,
        SampleRole::Test => manifest.n_test_samples,
    };
    if samples.len() != expected {
        return Err(Error::Other(format!(
            "dataset changed since ingest: expected {expected} samples, rebuilt {}",
            samples.len()
        )));
    }
    Ok((manifest, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::validate_dataset;

    /// Sunday 2024-01-07 00:00:00 UTC.
    pub const WEEK0: i64 = 1_704_585_600;

    pub fn ts(week: i64, offset_secs: i64) -> i64 {
        WEEK0 + week * 7 * 86_400 + offset_secs
    }

    pub fn ev(acct: &str, ind: &str, timestamp: i64, act: ActivityType) -> ActivityEvent {
        ActivityEvent {
            account_id: AccountId::new(acct),
            individual_id: IndividualId::new(ind),
            timestamp,
            activity: act,
        }
    }

    fn grid() -> PeriodGrid {
        PeriodGrid {
            epoch_week: absolute_week(WEEK0),
            period_days: 7,
        }
    }

    #[test]
    fn under_capacity_week_pads_and_masks() {
        let events = vec![
            ev("a", "i", ts(0, 100), ActivityType::OpenEmail),
            ev("a", "i", ts(0, 200), ActivityType::ClickEmail),
            ev("a", "i", ts(0, 300), ActivityType::SendEmail),
        ];
        let refs: Vec<&ActivityEvent> = events.iter().collect();
        let weeks = bucket_weeks(&refs, &grid(), 9);
        assert_eq!(weeks.len(), 1);
        let week = &weeks[0];
        assert_eq!(week.valid_len, 3);
        assert_eq!(week.week_index, 0);
        assert_eq!(
            &week.codes[..3],
            &[
                ActivityType::OpenEmail,
                ActivityType::ClickEmail,
                ActivityType::SendEmail
            ]
        );
        assert_eq!(week.codes.len(), 9);
        assert_eq!(week.counts[ActivityType::OpenEmail.code() as usize], 1);
    }

    #[test]
    fn over_capacity_week_keeps_the_last_nine() {
        let events: Vec<ActivityEvent> = (0..12)
            .map(|i| {
                let act = if i < 3 {
                    ActivityType::UnsubscribeEmail
                } else {
                    ActivityType::OpenEmail
                };
                ev("a", "i", ts(0, 60 * i), act)
            })
            .collect();
        let refs: Vec<&ActivityEvent> = events.iter().collect();
        let weeks = bucket_weeks(&refs, &grid(), 9);
        let week = &weeks[0];
        assert_eq!(week.valid_len, 9);
        // first 3 (the unsubscribes) dropped
        assert!(week.codes.iter().all(|c| *c == ActivityType::OpenEmail));
        // counts keep everything
        assert_eq!(week.counts[ActivityType::UnsubscribeEmail.code() as usize], 3);
        assert_eq!(week.counts[ActivityType::OpenEmail.code() as usize], 9);
    }

    #[test]
    fn deltas_are_hours_between_kept_events() {
        let events = vec![
            ev("a", "i", ts(0, 0), ActivityType::OpenEmail),
            ev("a", "i", ts(0, 90 * 60), ActivityType::ClickEmail),
        ];
        let refs: Vec<&ActivityEvent> = events.iter().collect();
        let weeks = bucket_weeks(&refs, &grid(), 9);
        assert_eq!(weeks[0].deltas[0], 0.0);
        assert!((weeks[0].deltas[1] - 1.5).abs() < 1e-12);
    }

    fn history_active_weeks(active: &[i64], conversion_week: Option<i64>) -> AccountHistory {
        let events: Vec<ActivityEvent> = active
            .iter()
            .map(|w| ev("a", "i", ts(*w, 100), ActivityType::OpenEmail))
            .collect();
        let refs: Vec<&ActivityEvent> = events.iter().collect();
        let weeks = bucket_weeks(&refs, &grid(), 9);
        AccountHistory {
            account_id: AccountId::new("a"),
            members: vec![MemberHistory {
                individual_id: IndividualId::new("i"),
                first_contact: ts(active[0], 100),
                weeks,
                statics: IndividualStatic::unknown(IndividualId::new("i")),
            }],
            account_static: AccountStatic::unknown(AccountId::new("a")),
            conversion_week,
        }
    }

    #[test]
    fn windows_for_six_active_weeks_without_conversion() {
        // active weeks 1..=6 -> targets 5, 6, 7
        let history = history_active_weeks(&[1, 2, 3, 4, 5, 6], None);
        let windows = build_windows(&history, &IngestConfig::default());
        assert_eq!(windows.len(), 3);
        assert_eq!(
            windows.iter().map(|w| w.target_week).collect::<Vec<_>>(),
            vec![5, 6, 7]
        );
        assert!(windows.iter().all(|w| !w.label));
    }

    #[test]
    fn conversion_cuts_off_later_windows_and_sets_the_label() {
        let history = history_active_weeks(&[1, 2, 3, 4, 5, 6], Some(6));
        let windows = build_windows(&history, &IngestConfig::default());
        assert_eq!(
            windows.iter().map(|w| w.target_week).collect::<Vec<_>>(),
            vec![5, 6]
        );
        assert_eq!(
            windows.iter().map(|w| w.label).collect::<Vec<_>>(),
            vec![false, true]
        );
    }

    #[test]
    fn window_weeks_are_the_four_preceding_calendar_weeks() {
        let history = history_active_weeks(&[1, 3, 4, 5, 6], None);
        let cfg = IngestConfig::default();
        let windows = build_windows(&history, &cfg);
        let w5 = windows.iter().find(|w| w.target_week == 5).unwrap();
        let weeks: Vec<i64> = w5.per_individual[0]
            .weeks
            .iter()
            .map(|w| w.week_index)
            .collect();
        assert_eq!(weeks, vec![1, 2, 3, 4]);
        // week 2 was inactive
        assert!(w5.per_individual[0].weeks[1].is_inactive());
        assert!(!w5.per_individual[0].weeks[0].is_inactive());
    }

    #[test]
    fn compress_mode_backfills_older_active_weeks() {
        let history = history_active_weeks(&[0, 1, 3, 5, 6], None);
        let cfg = IngestConfig {
            window_mode: WindowMode::Compress,
            ..Default::default()
        };
        let windows = build_windows(&history, &cfg);
        let w7 = windows.iter().find(|w| w.target_week == 7).unwrap();
        let weeks: Vec<i64> = w7.per_individual[0]
            .weeks
            .iter()
            .map(|w| w.week_index)
            .collect();
        // most recent four active weeks before 7
        assert_eq!(weeks, vec![1, 3, 5, 6]);
        assert!(w7.per_individual[0].weeks.iter().all(|w| !w.is_inactive()));
    }

    #[test]
    fn account_with_too_short_history_yields_no_samples() {
        let history = history_active_weeks(&[2, 3], None);
        // first=2, last=3 -> start 6 > end 4: no windows
        let windows = build_windows(&history, &IngestConfig::default());
        assert!(windows.is_empty());
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let accounts: Vec<AccountId> = (0..10).map(|i| AccountId::new(format!("a{i}"))).collect();
        let spec = SplitSpec {
            test_fraction: 0.5,
            seed: 99,
        };
        let (train, test) = split_accounts(&accounts, &spec).unwrap();
        assert_eq!(train.len(), 5);
        assert_eq!(test.len(), 5);
        let (train2, test2) = split_accounts(&accounts, &spec).unwrap();
        assert_eq!(train, train2);
        assert_eq!(test, test2);
        let all: BTreeSet<_> = train.iter().chain(test.iter()).collect();
        assert_eq!(all.len(), 10);
    }

    #[test]
    fn split_matches_reference_proportions() {
        let accounts: Vec<AccountId> =
            (0..2516).map(|i| AccountId::new(format!("acct{i:05}"))).collect();
        let spec = SplitSpec {
            test_fraction: 0.1514,
            seed: 7,
        };
        let (train, test) = split_accounts(&accounts, &spec).unwrap();
        assert!((380..=382).contains(&test.len()), "test={}", test.len());
        assert!((2134..=2136).contains(&train.len()), "train={}", train.len());
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let accounts = vec![AccountId::new("a")];
        for bad in [0.0, 1.0, -0.3, 1.7] {
            let spec = SplitSpec {
                test_fraction: bad,
                seed: 1,
            };
            assert!(split_accounts(&accounts, &spec).is_err());
        }
    }

    #[test]
    fn opt_out_individuals_are_excluded_from_ingestion() {
        let dataset = Dataset {
            events: vec![
                ev("a", "keep", ts(0, 10), ActivityType::OpenEmail),
                ev("a", "drop", ts(0, 20), ActivityType::OpenEmail),
            ],
            labels: vec![],
            individual_statics: vec![
                IndividualStatic {
                    individual_id: IndividualId::new("keep"),
                    source_of_arrival: "web".into(),
                    opt_out_email: false,
                    opt_out_phone: false,
                },
                IndividualStatic {
                    individual_id: IndividualId::new("drop"),
                    source_of_arrival: "web".into(),
                    opt_out_email: true,
                    opt_out_phone: false,
                },
            ],
            account_statics: vec![],
        };
        let (histories, _) = build_histories(&dataset, &IngestConfig::default()).unwrap();
        assert_eq!(histories.len(), 1);
        assert_eq!(histories[0].members.len(), 1);
        assert_eq!(histories[0].members[0].individual_id.as_str(), "keep");
        assert!(!validate_dataset(&dataset).fatal);
    }

    #[test]
    fn members_are_ordered_by_first_contact() {
        let dataset = Dataset {
            events: vec![
                ev("a", "late", ts(2, 10), ActivityType::OpenEmail),
                ev("a", "early", ts(0, 10), ActivityType::OpenEmail),
                ev("a", "early", ts(3, 10), ActivityType::OpenEmail),
            ],
            ..Default::default()
        };
        let (histories, _) = build_histories(&dataset, &IngestConfig::default()).unwrap();
        let order: Vec<&str> = histories[0]
            .members
            .iter()
            .map(|m| m.individual_id.as_str())
            .collect();
        assert_eq!(order, vec!["early", "late"]);
    }
}
