//! Trial tables, diff arithmetic and summary statistics.
//!
//! Scores here are percentages with two decimals, the way results tables
//! print them. Arithmetic on two-decimal inputs runs in integer hundredths so
//! rounding is exact half-up.

mod stats;
mod table;
mod verify;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::{CampaignResult, View};

pub use stats::{campaign_statistics, emit_stats, emit_view_stats, StatsContext};
pub use table::{export_table, parse_markdown, render_table, TableFormat};
pub use verify::{verify_tables, CellCheck, Outcome, TablesFixture, Verification};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("invalid trial record: {0}")]
    InvalidRecord(String),
    #[error("bad environment tag {0:?}: use D or N, optionally with H")]
    Environment(String),
    #[error("cannot parse table: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Fixture { path: std::path::PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lighting {
    Day,
    Night,
}

/// Capture conditions: day or night lighting, and whether a hat was worn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Environment {
    pub lighting: Option<Lighting>,
    pub hat: bool,
}

impl FromStr for Environment {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, ReportError> {
        let mut env = Environment::default();
        let bad = || ReportError::Environment(s.to_string());
        for c in s.trim().chars() {
            match c.to_ascii_uppercase() {
                'D' | 'N' if env.lighting.is_some() => return Err(bad()),
                'D' => env.lighting = Some(Lighting::Day),
                'N' => env.lighting = Some(Lighting::Night),
                'H' if env.hat => return Err(bad()),
                'H' => env.hat = true,
                _ => return Err(bad()),
            }
        }
        Ok(env)
    }
}

impl fmt::Display for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.lighting {
            Some(Lighting::Day) => f.write_str("D")?,
            Some(Lighting::Night) => f.write_str("N")?,
            None => {}
        }
        if self.hat {
            f.write_str("H")?;
        }
        Ok(())
    }
}

impl Serialize for Environment {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Environment {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One row of a results table: a view tested once on both oracles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub view: View,
    pub trial: u32,
    pub fd_initial: f64,
    pub fd_final: f64,
    pub fr_initial: f64,
    pub fr_final: f64,
    #[serde(default)]
    pub environment: Environment,
}

impl TrialRecord {
    pub fn validate(&self) -> Result<(), ReportError> {
        for (name, v) in [
            ("fd_initial", self.fd_initial),
            ("fd_final", self.fd_final),
            ("fr_initial", self.fr_initial),
            ("fr_final", self.fr_final),
        ] {
            if !(0.0..=100.0).contains(&v) {
                return Err(ReportError::InvalidRecord(format!(
                    "{} test {}: {name} = {v} is not a percentage",
                    self.view, self.trial
                )));
            }
        }
        Ok(())
    }

    /// `front-3`; the `trial` column of exported tables.
    pub fn id(&self) -> String {
        format!("{}-{}", self.view, self.trial)
    }

    /// One record per view of a scored campaign, scores rounded to two
    /// decimals. A missing detection counts as 0%.
    pub fn from_campaign(result: &CampaignResult, trial: u32) -> Result<Vec<TrialRecord>, ReportError> {
        if !result.is_complete() {
            return Err(ReportError::InvalidRecord("campaign has no phase 2 scores".into()));
        }
        let environment = match &result.config.environment {
            Some(tag) => tag.parse()?,
            None => Environment::default(),
        };
        let pct = |d: Option<&crate::oracle::Detection>| d.map_or(0.0, |d| round2(d.confidence * 100.0));
        Ok(result
            .views
            .iter()
            .map(|v| TrialRecord {
                view: v.view,
                trial,
                fd_initial: round2(v.initial_fd.confidence * 100.0),
                fd_final: pct(v.final_fd.as_ref()),
                fr_initial: pct(v.initial_fr.as_ref()),
                fr_final: pct(v.final_fr.as_ref()),
                environment,
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Down,
    Up,
}

impl Direction {
    pub fn arrow(self) -> char {
        match self {
            Direction::Down => '↓',
            Direction::Up => '↑',
        }
    }
}

/// Change of one oracle's score between the initial and final photo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Change {
    pub initial: f64,
    #[serde(rename = "final")]
    pub final_score: f64,
    /// `|final - initial|`, two decimals.
    pub diff: f64,
    pub direction: Direction,
    /// `100 |final - initial| / initial`, two decimals; `None` for a zero
    /// initial score.
    pub diff_pct: Option<f64>,
}

impl Change {
    pub fn between(initial: f64, final_score: f64) -> Change {
        let direction = if final_score <= initial { Direction::Down } else { Direction::Up };
        let (diff, diff_pct) = match (hundredths(initial), hundredths(final_score)) {
            (Some(i), Some(f)) => {
                let d = (f - i).abs();
                // half-up of 100 * d / i, in hundredths of a percent
                let pct = (i > 0).then(|| (20_000 * d + i) / (2 * i));
                (d as f64 / 100.0, pct.map(|p| p as f64 / 100.0))
            }
            _ => {
                let d = (final_score - initial).abs();
                let pct = (initial > 0.0).then(|| round2(100.0 * d / initial));
                (round2(d), pct)
            }
        };
        Change {
            initial,
            final_score,
            diff,
            direction,
            diff_pct,
        }
    }

    /// Raw `final < initial`. A tie is not a success even though it is
    /// printed as a drop.
    pub fn improved(&self) -> bool {
        self.final_score < self.initial
    }

    /// `↓ 12.74`
    pub fn diff_cell(&self) -> String {
        format!("{} {:.2}", self.direction.arrow(), self.diff)
    }

    pub fn pct_cell(&self) -> String {
        match self.diff_pct {
            Some(p) => format!("{p:.2}"),
            None => "n/a".to_string(),
        }
    }
}

/// Exact value in hundredths when `x` has at most two decimals.
fn hundredths(x: f64) -> Option<i64> {
    let scaled = x * 100.0;
    let r = scaled.round();
    ((scaled - r).abs() < 1e-6 && r.abs() < 1e15).then_some(r as i64)
}

/// Half-up to two decimals, for non-negative values.
pub fn round2(x: f64) -> f64 {
    match hundredths(x) {
        Some(h) => h as f64 / 100.0,
        None => (x * 100.0 + 0.5).floor() / 100.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffRow {
    pub fd: Change,
    pub fr: Change,
}

pub fn diff_row(record: &TrialRecord) -> DiffRow {
    DiffRow {
        fd: Change::between(record.fd_initial, record.fd_final),
        fr: Change::between(record.fr_initial, record.fr_final),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    Fd,
    Fr,
}

/// Success statistics for one oracle over a set of trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleStats {
    pub success_count: usize,
    pub trial_count: usize,
    /// Percent of trials where the score fell.
    pub success_rate: f64,
    /// Mean relative drop over successful trials.
    pub mean_drop: Option<f64>,
    /// Mean relative rise over failed trials.
    pub mean_rise: Option<f64>,
}

#[derive(Default)]
struct Tally {
    success: usize,
    trials: usize,
    drop_sum: i64,
    drop_n: usize,
    rise_sum: i64,
    rise_n: usize,
}

impl Tally {
    fn add(&mut self, c: &Change) {
        self.trials += 1;
        // sums in hundredths keep the mean independent of row order
        let pct = c.diff_pct.map(|p| (p * 100.0).round() as i64);
        if c.improved() {
            self.success += 1;
            if let Some(p) = pct {
                self.drop_sum += p;
                self.drop_n += 1;
            }
        } else if let Some(p) = pct {
            self.rise_sum += p;
            self.rise_n += 1;
        }
    }

    fn stats(&self) -> OracleStats {
        let mean = |sum: i64, n: usize| (n > 0).then(|| sum as f64 / n as f64 / 100.0);
        OracleStats {
            success_count: self.success,
            trial_count: self.trials,
            success_rate: if self.trials == 0 {
                0.0
            } else {
                100.0 * self.success as f64 / self.trials as f64
            },
            mean_drop: mean(self.drop_sum, self.drop_n),
            mean_rise: mean(self.rise_sum, self.rise_n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewStats {
    pub fd: OracleStats,
    pub fr: OracleStats,
}

impl ViewStats {
    pub fn get(&self, oracle: OracleKind) -> &OracleStats {
        match oracle {
            OracleKind::Fd => &self.fd,
            OracleKind::Fr => &self.fr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub per_view: BTreeMap<View, ViewStats>,
    pub overall: ViewStats,
}

/// Success partition on raw scores; means over each row's `diff_pct`.
///
/// Callers replaying printed tables pass the printed percentages in the
/// diff rows; live campaigns pass [`diff_row`] output.
pub fn aggregate(rows: &[(TrialRecord, DiffRow)]) -> Summary {
    let mut per_view: BTreeMap<View, (Tally, Tally)> = BTreeMap::new();
    let mut all = (Tally::default(), Tally::default());
    for (record, diff) in rows {
        let entry = per_view.entry(record.view).or_default();
        entry.0.add(&diff.fd);
        entry.1.add(&diff.fr);
        all.0.add(&diff.fd);
        all.1.add(&diff.fr);
    }
    let stats = |t: &(Tally, Tally)| ViewStats {
        fd: t.0.stats(),
        fr: t.1.stats(),
    };
    Summary {
        per_view: per_view.iter().map(|(v, t)| (*v, stats(t))).collect(),
        overall: stats(&all),
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.2}"));
        let line = |f: &mut fmt::Formatter<'_>, name: &str, s: &ViewStats| {
            for (oracle, st) in [("FD", &s.fd), ("FR", &s.fr)] {
                writeln!(
                    f,
                    "{name:<7} {oracle}: {}/{} success ({:.0}%), mean drop {}, mean rise {}",
                    st.success_count,
                    st.trial_count,
                    st.success_rate,
                    opt(st.mean_drop),
                    opt(st.mean_rise)
                )?;
            }
            Ok(())
        };
        for (view, s) in &self.per_view {
            line(f, view.title(), s)?;
        }
        line(f, "All", &self.overall)
    }
}

/// Loads every `campaign.json` under `dir` (the directory itself or its
/// immediate subdirectories), numbering trials in path order.
pub fn load_campaign_records(dir: &std::path::Path) -> Result<Vec<TrialRecord>, ReportError> {
    let io = |path: &std::path::Path| {
        let path = path.to_path_buf();
        move |source| ReportError::Io { path, source }
    };
    let mut files = Vec::new();
    let direct = dir.join(crate::pipeline::RECORD_FILE);
    if direct.is_file() {
        files.push(direct);
    }
    for entry in std::fs::read_dir(dir).map_err(io(dir))? {
        let p = entry.map_err(io(dir))?.path().join(crate::pipeline::RECORD_FILE);
        if p.is_file() {
            files.push(p);
        }
    }
    files.sort();
    let mut records = Vec::new();
    for (i, file) in files.iter().enumerate() {
        let text = std::fs::read_to_string(file).map_err(io(file))?;
        let result: CampaignResult = serde_json::from_str(&text).map_err(|e| ReportError::Fixture {
            path: file.clone(),
            message: e.to_string(),
        })?;
        records.extend(TrialRecord::from_campaign(&result, i as u32 + 1)?);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(view: View, fd: (f64, f64), fr: (f64, f64)) -> TrialRecord {
        TrialRecord {
            view,
            trial: 1,
            fd_initial: fd.0,
            fd_final: fd.1,
            fr_initial: fr.0,
            fr_final: fr.1,
            environment: Environment::default(),
        }
    }

    #[test]
    fn printed_rows_recompute() {
        let c = Change::between(71.79, 59.05);
        assert_eq!(c.diff, 12.74);
        assert_eq!(c.direction, Direction::Down);
        assert!((c.diff_pct.unwrap() - 17.74).abs() <= 0.01 + 1e-9);

        let c = Change::between(98.79, 78.54);
        assert_eq!((c.diff, c.diff_pct), (20.25, Some(20.50)));

        let c = Change::between(77.20, 92.65);
        assert_eq!((c.diff, c.direction, c.diff_pct), (15.45, Direction::Up, Some(20.01)));

        let c = Change::between(92.12, 67.47);
        assert_eq!((c.diff, c.diff_pct), (24.65, Some(26.76)));
    }

    #[test]
    fn ties_and_zero_initial() {
        let c = Change::between(50.0, 50.0);
        assert_eq!((c.diff, c.direction, c.diff_pct), (0.0, Direction::Down, Some(0.0)));
        assert!(!c.improved());
        let c = Change::between(0.0, 12.5);
        assert_eq!((c.diff, c.diff_pct), (12.5, None));
        assert_eq!(c.pct_cell(), "n/a");
        assert_eq!(c.diff_cell(), "↑ 12.50");
    }

    #[test]
    fn half_up_on_exact_ties() {
        // 100 * 1 / 8 = 12.5 exactly, 100 * 0.01 / 0.08 = 12.5
        assert_eq!(Change::between(8.0, 7.0).diff_pct, Some(12.5));
        // 100 * 0.01 / 16 = 0.0625 -> 0.06; 100 * 0.01 / 8 = 0.125 -> 0.13
        assert_eq!(Change::between(16.0, 15.99).diff_pct, Some(0.06));
        assert_eq!(Change::between(8.0, 7.99).diff_pct, Some(0.13));
        assert_eq!(round2(0.125), 0.13);
        assert_eq!(round2(2.0 / 3.0), 0.67);
    }

    #[test]
    fn environment_tags() {
        assert_eq!("DH".parse::<Environment>().unwrap().to_string(), "DH");
        assert_eq!("hn".parse::<Environment>().unwrap().to_string(), "NH");
        assert_eq!("".parse::<Environment>().unwrap().to_string(), "");
        assert!("DN".parse::<Environment>().is_err());
        assert!("X".parse::<Environment>().is_err());
    }

    #[test]
    fn record_validation() {
        assert!(rec(View::Left, (50.0, 101.0), (1.0, 1.0)).validate().is_err());
        assert!(rec(View::Left, (50.0, 100.0), (0.0, 1.0)).validate().is_ok());
    }

    #[test]
    fn single_improving_row() {
        let r = rec(View::Front, (90.0, 80.0), (60.0, 45.0));
        let d = diff_row(&r);
        let s = aggregate(&[(r, d)]);
        let fr = s.per_view[&View::Front].fr;
        assert_eq!(fr.success_rate, 100.0);
        assert_eq!(fr.mean_drop, d.fr.diff_pct);
        assert_eq!(fr.mean_rise, None);
    }

    #[test]
    fn duplication_doubles_counts_only() {
        let rows: Vec<_> = [
            rec(View::Front, (90.0, 80.0), (60.0, 45.0)),
            rec(View::Front, (70.0, 80.0), (30.0, 45.0)),
            rec(View::Right, (99.0, 98.5), (10.0, 9.0)),
        ]
        .into_iter()
        .map(|r| {
            let d = diff_row(&r);
            (r, d)
        })
        .collect();
        let once = aggregate(&rows);
        let twice = aggregate(&[rows.clone(), rows].concat());
        assert_eq!(twice.overall.fr.trial_count, 2 * once.overall.fr.trial_count);
        assert_eq!(twice.overall.fr.success_count, 2 * once.overall.fr.success_count);
        assert_eq!(twice.overall.fr.mean_drop, once.overall.fr.mean_drop);
        assert_eq!(twice.overall.fd.mean_rise, once.overall.fd.mean_rise);
        assert_eq!(twice.overall.fd.success_rate, once.overall.fd.success_rate);
    }
}
