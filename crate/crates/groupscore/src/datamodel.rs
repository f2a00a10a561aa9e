//! Domain types shared by every other module, plus the line-delimited file
//! formats they are stored in (see `docs/FORMATS.md`) and dataset validation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The nine activity codes observed in marketing-email behavior logs.
///
/// The integer encoding 0..8 (declaration order) is stable: it is used for
/// sequence inputs, frequency vectors and the event file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityType {
    OpenEmail,
    ClickEmail,
    SendEmail,
    UnsubscribeEmail,
    OpenSalesEmail,
    ClickSalesEmail,
    SendSalesEmail,
    ForwardedEmailReceived,
    ForwardedEmailSent,
}

impl ActivityType {
    pub const COUNT: usize = 9;

    pub const ALL: [ActivityType; Self::COUNT] = [
        ActivityType::OpenEmail,
        ActivityType::ClickEmail,
        ActivityType::SendEmail,
        ActivityType::UnsubscribeEmail,
        ActivityType::OpenSalesEmail,
        ActivityType::ClickSalesEmail,
        ActivityType::SendSalesEmail,
        ActivityType::ForwardedEmailReceived,
        ActivityType::ForwardedEmailSent,
    ];

    /// Stable integer code in 0..=8.
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<ActivityType> {
        Self::ALL.get(code as usize).copied()
    }

    /// Wire name used in the event file format.
    pub fn name(self) -> &'static str {
        match self {
            ActivityType::OpenEmail => "open_email",
            ActivityType::ClickEmail => "click_email",
            ActivityType::SendEmail => "send_email",
            ActivityType::UnsubscribeEmail => "unsubscribe_email",
            ActivityType::OpenSalesEmail => "open_sales_email",
            ActivityType::ClickSalesEmail => "click_sales_email",
            ActivityType::SendSalesEmail => "send_sales_email",
            ActivityType::ForwardedEmailReceived => "forwarded_email_received",
            ActivityType::ForwardedEmailSent => "forwarded_email_sent",
        }
    }

    pub fn parse(name: &str) -> Option<ActivityType> {
        Self::ALL.iter().copied().find(|a| a.name() == name)
    }
}

impl fmt::Display for ActivityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

macro_rules! id_type {
    ($name:ident) => {
        #[derive(
            Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
        )]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                Self(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }
    };
}

id_type!(AccountId);
id_type!(IndividualId);

/// One timestamped action by one individual. Timestamps are UTC unix seconds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityEvent {
    pub account_id: AccountId,
    pub individual_id: IndividualId,
    pub timestamp: i64,
    pub activity: ActivityType,
}

/// Static features of one individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualStatic {
    pub individual_id: IndividualId,
    pub source_of_arrival: String,
    pub opt_out_email: bool,
    pub opt_out_phone: bool,
}

impl IndividualStatic {
    /// Fallback used when an individual has events but no statics record.
    pub fn unknown(individual_id: IndividualId) -> Self {
        IndividualStatic {
            individual_id,
            source_of_arrival: String::new(),
            opt_out_email: false,
            opt_out_phone: false,
        }
    }
}

/// Static features of one account.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountStatic {
    pub account_id: AccountId,
    pub revenue: f64,
    pub num_employees: u64,
}

impl AccountStatic {
    pub fn unknown(account_id: AccountId) -> Self {
        AccountStatic {
            account_id,
            revenue: 0.0,
            num_employees: 0,
        }
    }
}

/// Conversion outcome for one account. `conversion_week` is a week index
/// relative to the dataset epoch week and is present iff `converted`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversionLabel {
    pub account_id: AccountId,
    pub converted: bool,
    pub conversion_week: Option<i64>,
}

/// One calendar week of one individual's activity, encoded as a fixed-length
/// sequence plus per-type frequency counts.
///
/// Slots at positions >= `valid_len` are padding and must never influence any
/// computation. `counts` holds the full per-type counts for the week, before
/// the sequence was truncated to the last `codes.len()` events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekSequence {
    pub week_index: i64,
    pub codes: Vec<ActivityType>,
    pub valid_len: usize,
    /// Hours between consecutive kept activities; slot 0 is 0.
    pub deltas: Vec<f64>,
    /// Full event counts per activity code for the week (no truncation).
    pub counts: Vec<u32>,
}

impl WeekSequence {
    /// A week with no activity.
    pub fn inactive(week_index: i64, seq_len: usize) -> Self {
        WeekSequence {
            week_index,
            codes: vec![ActivityType::OpenEmail; seq_len],
            valid_len: 0,
            deltas: vec![0.0; seq_len],
            counts: vec![0; ActivityType::COUNT],
        }
    }

    pub fn is_inactive(&self) -> bool {
        self.valid_len == 0
    }
}

/// One individual's slice of a window sample.
#[derive(Debug, Clone, PartialEq)]
pub struct IndividualWindow {
    pub individual_id: IndividualId,
    /// Exactly `window_len` entries, chronological.
    pub weeks: Vec<WeekSequence>,
    pub statics: IndividualStatic,
}

/// One (account, target week) training or scoring instance: the four weeks
/// preceding `target_week` for every member, with the label "account converts
/// in `target_week`".
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub account_id: AccountId,
    pub target_week: i64,
    /// Members ordered by first-contact time.
    pub per_individual: Vec<IndividualWindow>,
    pub account_static: AccountStatic,
    pub label: bool,
}

impl WindowSample {
    pub fn group_size(&self) -> usize {
        self.per_individual.len()
    }
}

/// Joint scores for one account at one week: the account-level conversion
/// probability plus the per-individual scores recovered below the
/// aggregation step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub account_id: AccountId,
    pub target_week: i64,
    pub account_probability: f64,
    /// Ordered by first-contact time, like `WindowSample::per_individual`.
    pub individual_scores: Vec<(IndividualId, f64)>,
}

// ---------------------------------------------------------------------------
// Dataset container and file formats
// ---------------------------------------------------------------------------

pub const EVENTS_FILE: &str = "events.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const INDIVIDUALS_FILE: &str = "individuals.csv";
pub const ACCOUNTS_FILE: &str = "accounts.csv";
pub const INTENT_FILE: &str = "intent.csv";

/// A raw dataset: events, labels and static features.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub events: Vec<ActivityEvent>,
    pub labels: Vec<ConversionLabel>,
    pub individual_statics: Vec<IndividualStatic>,
    pub account_statics: Vec<AccountStatic>,
}

pub fn format_timestamp(ts: i64) -> String {
    Utc.timestamp_opt(ts, 0)
        .single()
        .expect("timestamp in range")
        .to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub fn parse_timestamp(s: &str) -> std::result::Result<i64, String> {
    DateTime::parse_from_rfc3339(s)
        .map(|dt| dt.timestamp())
        .map_err(|e| format!("bad timestamp `{s}`: {e}"))
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))
}

fn csv_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

pub fn read_events(path: &Path) -> Result<Vec<ActivityEvent>> {
    let mut reader = open_reader(path)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(path, 0, e.to_string()))?;
        let line = csv_line(&record);
        let field = |i: usize| {
            record
                .get(i)
                .ok_or_else(|| Error::parse(path, line, format!("missing field {i}")))
        };
        let timestamp =
            parse_timestamp(field(2)?).map_err(|m| Error::parse(path, line, m))?;
        let activity_name = field(3)?;
        let activity = ActivityType::parse(activity_name).ok_or_else(|| {
            Error::parse(path, line, format!("unknown activity `{activity_name}`"))
        })?;
        out.push(ActivityEvent {
            account_id: AccountId::new(field(0)?),
            individual_id: IndividualId::new(field(1)?),
            timestamp,
            activity,
        });
    }
    Ok(out)
}

pub fn write_events(path: &Path, events: &[ActivityEvent]) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    writer
        .write_record(["account_id", "individual_id", "timestamp", "activity"])
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    for ev in events {
        writer
            .write_record([
                ev.account_id.as_str(),
                ev.individual_id.as_str(),
                &format_timestamp(ev.timestamp),
                ev.activity.name(),
            ])
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    writer
        .flush()
        .map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<Vec<ConversionLabel>> {
    let mut reader = open_reader(path)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(path, 0, e.to_string()))?;
        let line = csv_line(&record);
        let account_id = AccountId::new(record.get(0).unwrap_or(""));
        let converted: bool = record
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::parse(path, line, "converted must be true/false"))?;
        let week_field = record.get(2).unwrap_or("");
        let conversion_week = if week_field.is_empty() {
            None
        } else {
            Some(
                week_field
                    .parse::<i64>()
                    .map_err(|_| Error::parse(path, line, "conversion_week must be an integer"))?,
            )
        };
        if converted != conversion_week.is_some() {
            return Err(Error::parse(
                path,
                line,
                "conversion_week must be present exactly when converted=true",
            ));
        }
        out.push(ConversionLabel {
            account_id,
            converted,
            conversion_week,
        });
    }
    Ok(out)
}

pub fn write_labels(path: &Path, labels: &[ConversionLabel]) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    writer
        .write_record(["account_id", "converted", "conversion_week"])
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    for label in labels {
        let week = label
            .conversion_week
            .map(|w| w.to_string())
            .unwrap_or_default();
        writer
            .write_record([
                label.account_id.as_str(),
                if label.converted { "true" } else { "false" },
                &week,
            ])
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_individual_statics(path: &Path) -> Result<Vec<IndividualStatic>> {
    let mut reader = open_reader(path)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(path, 0, e.to_string()))?;
        let line = csv_line(&record);
        let parse_bool = |i: usize, name: &str| {
            record
                .get(i)
                .unwrap_or("")
                .parse::<bool>()
                .map_err(|_| Error::parse(path, line, format!("{name} must be true/false")))
        };
        out.push(IndividualStatic {
            individual_id: IndividualId::new(record.get(0).unwrap_or("")),
            source_of_arrival: record.get(1).unwrap_or("").to_owned(),
            opt_out_email: parse_bool(2, "opt_out_email")?,
            opt_out_phone: parse_bool(3, "opt_out_phone")?,
        });
    }
    Ok(out)
}

pub fn write_individual_statics(path: &Path, statics: &[IndividualStatic]) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    writer
        .write_record([
            "individual_id",
            "source_of_arrival",
            "opt_out_email",
            "opt_out_phone",
        ])
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    for s in statics {
        writer
            .write_record([
                s.individual_id.as_str(),
                &s.source_of_arrival,
                if s.opt_out_email { "true" } else { "false" },
                if s.opt_out_phone { "true" } else { "false" },
            ])
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_account_statics(path: &Path) -> Result<Vec<AccountStatic>> {
    let mut reader = open_reader(path)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(path, 0, e.to_string()))?;
        let line = csv_line(&record);
        let revenue: f64 = record
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::parse(path, line, "revenue must be a number"))?;
        let num_employees: u64 = record
            .get(2)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::parse(path, line, "num_employees must be an integer"))?;
        if !revenue.is_finite() || revenue < 0.0 {
            return Err(Error::parse(path, line, "revenue must be nonnegative"));
        }
        out.push(AccountStatic {
            account_id: AccountId::new(record.get(0).unwrap_or("")),
            revenue,
            num_employees,
        });
    }
    Ok(out)
}

pub fn write_account_statics(path: &Path, statics: &[AccountStatic]) -> Result<()> {
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    writer
        .write_record(["account_id", "revenue", "num_employees"])
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    for s in statics {
        writer
            .write_record([
                s.account_id.as_str(),
                &format!("{:.2}", s.revenue),
                &s.num_employees.to_string(),
            ])
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

impl Dataset {
    pub fn read_dir(dir: &Path) -> Result<Dataset> {
        Ok(Dataset {
            events: read_events(&dir.join(EVENTS_FILE))?,
            labels: read_labels(&dir.join(LABELS_FILE))?,
            individual_statics: read_individual_statics(&dir.join(INDIVIDUALS_FILE))?,
            account_statics: read_account_statics(&dir.join(ACCOUNTS_FILE))?,
        })
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_events(&dir.join(EVENTS_FILE), &self.events)?;
        write_labels(&dir.join(LABELS_FILE), &self.labels)?;
        write_individual_statics(&dir.join(INDIVIDUALS_FILE), &self.individual_statics)?;
        write_account_statics(&dir.join(ACCOUNTS_FILE), &self.account_statics)?;
        Ok(())
    }

    pub fn input_files(dir: &Path) -> Vec<PathBuf> {
        [EVENTS_FILE, LABELS_FILE, INDIVIDUALS_FILE, ACCOUNTS_FILE]
            .iter()
            .map(|f| dir.join(f))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ValidationIssue {
    /// Violates the many-to-one individual/account mapping. Fatal.
    IndividualInMultipleAccounts {
        individual_id: IndividualId,
        accounts: Vec<AccountId>,
    },
    /// A conversion week outside `[first_week, last_week + 1]`. Fatal.
    ConversionWeekOutsideSpan {
        account_id: AccountId,
        conversion_week: i64,
        span: (i64, i64),
    },
    DuplicateEvents {
        individual_id: IndividualId,
        timestamp: i64,
        activity: ActivityType,
        count: usize,
    },
    LabelWithoutEvents {
        account_id: AccountId,
    },
    EventsAfterConversion {
        account_id: AccountId,
        count: usize,
    },
    MissingIndividualStatic {
        individual_id: IndividualId,
    },
    MissingAccountStatic {
        account_id: AccountId,
    },
}

impl ValidationIssue {
    pub fn is_fatal(&self) -> bool {
        matches!(
            self,
            ValidationIssue::IndividualInMultipleAccounts { .. }
                | ValidationIssue::ConversionWeekOutsideSpan { .. }
        )
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
    pub fatal: bool,
    pub n_events: usize,
    pub n_accounts: usize,
    pub n_individuals: usize,
}

/// Absolute Sunday-start week index of a unix timestamp.
///
/// Week boundaries run Sunday 00:00:00 UTC through Saturday 23:59:59 UTC.
pub fn absolute_week(timestamp: i64) -> i64 {
    let days = timestamp.div_euclid(86_400);
    // 1970-01-01 was a Thursday; day -4 (1969-12-28) was a Sunday.
    (days + 4).div_euclid(7)
}

/// Check a raw dataset for structural problems. Produces a report rather than
/// failing: issues that break downstream invariants are marked fatal and the
/// caller decides what to do.
pub fn validate_dataset(dataset: &Dataset) -> ValidationReport {
    let mut report = ValidationReport {
        n_events: dataset.events.len(),
        ..Default::default()
    };

    let mut accounts_of: HashMap<&IndividualId, BTreeSet<&AccountId>> = HashMap::new();
    let mut account_weeks: HashMap<&AccountId, (i64, i64)> = HashMap::new();
    let mut dup_counts: HashMap<(&IndividualId, i64, ActivityType), usize> = HashMap::new();
    let mut global_span: Option<(i64, i64)> = None;

    for ev in &dataset.events {
        accounts_of
            .entry(&ev.individual_id)
            .or_default()
            .insert(&ev.account_id);
        let week = absolute_week(ev.timestamp);
        let entry = account_weeks
            .entry(&ev.account_id)
            .or_insert((week, week));
        entry.0 = entry.0.min(week);
        entry.1 = entry.1.max(week);
        let span = global_span.get_or_insert((week, week));
        span.0 = span.0.min(week);
        span.1 = span.1.max(week);
        *dup_counts
            .entry((&ev.individual_id, ev.timestamp, ev.activity))
            .or_insert(0) += 1;
    }

    report.n_accounts = account_weeks.len();
    report.n_individuals = accounts_of.len();

    let mut multi: Vec<_> = accounts_of
        .iter()
        .filter(|(_, accounts)| accounts.len() > 1)
        .collect();
    multi.sort_by_key(|(id, _)| *id);
    for (individual_id, accounts) in multi {
        report.issues.push(ValidationIssue::IndividualInMultipleAccounts {
            individual_id: (*individual_id).clone(),
            accounts: accounts.iter().map(|a| (*a).clone()).collect(),
        });
    }

    let mut dups: Vec<_> = dup_counts
        .into_iter()
        .filter(|(_, count)| *count > 1)
        .collect();
    dups.sort_by(|a, b| a.0.cmp(&b.0));
    for ((individual_id, timestamp, activity), count) in dups {
        report.issues.push(ValidationIssue::DuplicateEvents {
            individual_id: individual_id.clone(),
            timestamp,
            activity,
            count,
        });
    }

    if let Some((first, last)) = global_span {
        let epoch = first;
        // The week after the last observation is still a valid decision week.
        let relative_span = (0, last - epoch + 1);
        for label in &dataset.labels {
            if !account_weeks.contains_key(&label.account_id) {
                report.issues.push(ValidationIssue::LabelWithoutEvents {
                    account_id: label.account_id.clone(),
                });
                continue;
            }
            if let Some(week) = label.conversion_week {
                if week < relative_span.0 || week > relative_span.1 {
                    report.issues.push(ValidationIssue::ConversionWeekOutsideSpan {
                        account_id: label.account_id.clone(),
                        conversion_week: week,
                        span: relative_span,
                    });
                } else {
                    let after: usize = dataset
                        .events
                        .iter()
                        .filter(|ev| {
                            ev.account_id == label.account_id
                                && absolute_week(ev.timestamp) - epoch > week
                        })
                        .count();
                    if after > 0 {
                        report.issues.push(ValidationIssue::EventsAfterConversion {
                            account_id: label.account_id.clone(),
                            count: after,
                        });
                    }
                }
            }
        }
    } else {
        for label in &dataset.labels {
            report.issues.push(ValidationIssue::LabelWithoutEvents {
                account_id: label.account_id.clone(),
            });
        }
    }

    let known_individuals: BTreeSet<_> = dataset
        .individual_statics
        .iter()
        .map(|s| &s.individual_id)
        .collect();
    let mut individuals: Vec<_> = accounts_of.keys().collect();
    individuals.sort();
    for individual_id in individuals {
        if !known_individuals.contains(*individual_id) {
            report.issues.push(ValidationIssue::MissingIndividualStatic {
                individual_id: (*individual_id).clone(),
            });
        }
    }

    let known_accounts: BTreeSet<_> = dataset
        .account_statics
        .iter()
        .map(|s| &s.account_id)
        .collect();
    let mut accounts: Vec<_> = account_weeks.keys().collect();
    accounts.sort();
    for account_id in accounts {
        if !known_accounts.contains(*account_id) {
            report.issues.push(ValidationIssue::MissingAccountStatic {
                account_id: (*account_id).clone(),
            });
        }
    }

    report.fatal = report.issues.iter().any(|i| i.is_fatal());
    report
}

// ---------------------------------------------------------------------------
// Static-feature encoding
// ---------------------------------------------------------------------------

/// Encode individual statics as one-hot source-of-arrival over a training
/// vocabulary plus the two opt-out booleans. Unseen categories map to the
/// all-zeros slot so that never-seen test individuals still encode.
pub fn encode_individual_static(statics: &IndividualStatic, vocab: &[String]) -> Vec<f64> {
    let mut out = vec![0.0; vocab.len() + 2];
    if let Some(pos) = vocab.iter().position(|v| *v == statics.source_of_arrival) {
        out[pos] = 1.0;
    }
    out[vocab.len()] = if statics.opt_out_email { 1.0 } else { 0.0 };
    out[vocab.len() + 1] = if statics.opt_out_phone { 1.0 } else { 0.0 };
    out
}

/// Standardization constants for account numeric features, fit on training
/// accounts and stored with the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccountStandardizer {
    pub revenue_mean: f64,
    pub revenue_std: f64,
    pub employees_mean: f64,
    pub employees_std: f64,
}

impl Default for AccountStandardizer {
    fn default() -> Self {
        AccountStandardizer {
            revenue_mean: 0.0,
            revenue_std: 1.0,
            employees_mean: 0.0,
            employees_std: 1.0,
        }
    }
}

impl AccountStandardizer {
    pub fn fit(accounts: &[&AccountStatic]) -> AccountStandardizer {
        fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
            let n = values.clone().count();
            if n == 0 {
                return (0.0, 1.0);
            }
            let mean = values.clone().sum::<f64>() / n as f64;
            let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let std = var.sqrt();
            (mean, if std > 0.0 { std } else { 1.0 })
        }
        let (revenue_mean, revenue_std) = mean_std(accounts.iter().map(|a| a.revenue));
        let (employees_mean, employees_std) =
            mean_std(accounts.iter().map(|a| a.num_employees as f64));
        AccountStandardizer {
            revenue_mean,
            revenue_std,
            employees_mean,
            employees_std,
        }
    }

    pub fn encode(&self, statics: &AccountStatic) -> Vec<f64> {
        vec![
            (statics.revenue - self.revenue_mean) / self.revenue_std,
            (statics.num_employees as f64 - self.employees_mean) / self.employees_std,
        ]
    }
}

/// Build the source-of-arrival vocabulary from training individuals, sorted
/// for determinism.
pub fn source_vocabulary<'a>(statics: impl Iterator<Item = &'a IndividualStatic>) -> Vec<String> {
    let set: BTreeSet<String> = statics
        .filter(|s| !s.source_of_arrival.is_empty())
        .map(|s| s.source_of_arrival.clone())
        .collect();
    set.into_iter().collect()
}

/// Group events by account, preserving nothing about order.
pub fn events_by_account(events: &[ActivityEvent]) -> BTreeMap<AccountId, Vec<&ActivityEvent>> {
    let mut map: BTreeMap<AccountId, Vec<&ActivityEvent>> = BTreeMap::new();
    for ev in events {
        map.entry(ev.account_id.clone()).or_default().push(ev);
    }
    map
}
