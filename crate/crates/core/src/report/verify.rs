//! Recomputes printed results tables and checks them cell by cell.

use std::collections::BTreeMap;
use std::fmt::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{aggregate, Change, DiffRow, Direction, Environment, OracleKind, ReportError, Summary, TrialRecord};
use crate::pipeline::View;

const TOLERANCE: f64 = 0.01 + 1e-9;
const BUNDLED: &str = include_str!("../../fixtures/tables.json");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrintedChange {
    pub initial: f64,
    #[serde(rename = "final")]
    pub final_score: f64,
    pub diff: f64,
    pub direction: Direction,
    #[serde(default)]
    pub diff_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreliminaryRow {
    pub oracle: OracleKind,
    #[serde(flatten)]
    pub printed: PrintedChange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRow {
    pub view: View,
    pub trial: u32,
    pub environment: Environment,
    pub fd: PrintedChange,
    pub fr: PrintedChange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    Diff,
    DiffPct,
    Direction,
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Column::Diff => "diff",
            Column::DiffPct => "diff_pct",
            Column::Direction => "direction",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Erratum {
    pub view: View,
    pub trial: u32,
    pub oracle: OracleKind,
    pub column: Column,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateErratum {
    pub view: View,
    pub oracle: OracleKind,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claimed {
    pub fr_success_mean: f64,
    pub fr_failed_mean: f64,
    /// Percent success per oracle and view.
    pub success_rate: BTreeMap<OracleKind, BTreeMap<View, f64>>,
}

/// Printed results tables with their stated summary figures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TablesFixture {
    pub preliminary: Vec<PreliminaryRow>,
    pub rows: Vec<FixtureRow>,
    #[serde(default)]
    pub known_errata: Vec<Erratum>,
    pub claimed: Claimed,
    #[serde(default)]
    pub known_rate_errata: Vec<RateErratum>,
}

impl TablesFixture {
    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let text = std::fs::read_to_string(path).map_err(|source| ReportError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| ReportError::Fixture {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// The fixture shipped with the crate.
    pub fn bundled() -> Self {
        serde_json::from_str(BUNDLED).expect("bundled tables fixture parses")
    }

    /// Table rows as records plus diff rows carrying the printed magnitudes,
    /// which is what the stated means were computed from.
    pub fn printed_rows(&self) -> Vec<(TrialRecord, DiffRow)> {
        let printed = |p: &PrintedChange| Change {
            initial: p.initial,
            final_score: p.final_score,
            diff: p.diff,
            direction: p.direction,
            diff_pct: p.diff_pct,
        };
        self.rows
            .iter()
            .map(|r| {
                (
                    TrialRecord {
                        view: r.view,
                        trial: r.trial,
                        fd_initial: r.fd.initial,
                        fd_final: r.fd.final_score,
                        fr_initial: r.fr.initial,
                        fr_final: r.fr.final_score,
                        environment: r.environment,
                    },
                    DiffRow {
                        fd: printed(&r.fd),
                        fr: printed(&r.fr),
                    },
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Pass,
    Known,
    Fail,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Pass => "PASS",
            Outcome::Known => "KNOWN",
            Outcome::Fail => "FAIL",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellCheck {
    /// `front test 3` or `preliminary`.
    pub row: String,
    pub oracle: OracleKind,
    pub column: Column,
    pub printed: String,
    pub recomputed: String,
    pub matches: bool,
    /// Listed as a known erratum.
    pub known: bool,
}

impl CellCheck {
    pub fn outcome(&self) -> Outcome {
        match (self.matches, self.known) {
            (true, false) => Outcome::Pass,
            (false, true) => Outcome::Known,
            // a listed erratum that does not reproduce is as wrong as an
            // unlisted mismatch
            _ => Outcome::Fail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowCheck {
    pub row: String,
    pub outcome: Outcome,
    pub cells: Vec<CellCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatCheck {
    pub label: String,
    pub claimed: f64,
    pub computed: f64,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verification {
    pub rows: Vec<RowCheck>,
    /// Relative-percentage cells within tolerance, over the results tables.
    pub pct_matches: usize,
    pub pct_total: usize,
    pub summary: Summary,
    pub stats: Vec<StatCheck>,
}

impl Verification {
    pub fn cells(&self) -> impl Iterator<Item = &CellCheck> {
        self.rows.iter().flat_map(|r| r.cells.iter())
    }

    pub fn known_mismatches(&self) -> impl Iterator<Item = &CellCheck> {
        self.cells().filter(|c| c.outcome() == Outcome::Known)
    }

    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.outcome != Outcome::Fail) && self.stats.iter().all(|s| s.outcome != Outcome::Fail)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let _ = write!(s, "{} {}", r.outcome, r.row);
            let notes: Vec<String> = r
                .cells
                .iter()
                .filter(|c| c.outcome() != Outcome::Pass)
                .map(|c| {
                    format!(
                        "{} {} printed {} recomputed {}",
                        oracle_name(c.oracle),
                        c.column,
                        c.printed,
                        c.recomputed
                    )
                })
                .collect();
            if !notes.is_empty() {
                let _ = write!(s, ": {}", notes.join("; "));
            }
            s.push('\n');
        }
        let _ = writeln!(s, "diff_pct cells within 0.01: {}/{}", self.pct_matches, self.pct_total);
        for st in &self.stats {
            let _ = write!(
                s,
                "{} {}: computed {:.2}, claimed {:.2}",
                st.outcome, st.label, st.computed, st.claimed
            );
            if let Some(n) = &st.note {
                let _ = write!(s, " ({n})");
            }
            s.push('\n');
        }
        s
    }
}

fn oracle_name(o: OracleKind) -> &'static str {
    match o {
        OracleKind::Fd => "FD",
        OracleKind::Fr => "FR",
    }
}

fn arrow(d: Direction) -> String {
    d.arrow().to_string()
}

fn check_change(row: &str, oracle: OracleKind, printed: &PrintedChange, known: &dyn Fn(Column) -> bool) -> Vec<CellCheck> {
    let c = Change::between(printed.initial, printed.final_score);
    let mut cells = vec![
        CellCheck {
            row: row.to_string(),
            oracle,
            column: Column::Direction,
            printed: arrow(printed.direction),
            recomputed: arrow(c.direction),
            matches: printed.direction == c.direction,
            known: known(Column::Direction),
        },
        CellCheck {
            row: row.to_string(),
            oracle,
            column: Column::Diff,
            printed: format!("{:.2}", printed.diff),
            recomputed: format!("{:.2}", c.diff),
            matches: (printed.diff - c.diff).abs() <= TOLERANCE,
            known: known(Column::Diff),
        },
    ];
    if let Some(p) = printed.diff_pct {
        let matches = c.diff_pct.is_some_and(|r| (p - r).abs() <= TOLERANCE);
        cells.push(CellCheck {
            row: row.to_string(),
            oracle,
            column: Column::DiffPct,
            printed: format!("{p:.2}"),
            recomputed: c.pct_cell(),
            matches,
            known: known(Column::DiffPct),
        });
    }
    cells
}

fn row_check(row: String, cells: Vec<CellCheck>) -> RowCheck {
    let outcome = cells
        .iter()
        .map(CellCheck::outcome)
        .max_by_key(|o| match o {
            Outcome::Pass => 0,
            Outcome::Known => 1,
            Outcome::Fail => 2,
        })
        .unwrap_or(Outcome::Pass);
    RowCheck { row, outcome, cells }
}

/// Recomputes every diff cell and the summary figures of a fixture.
pub fn verify_tables(fixture: &TablesFixture) -> Verification {
    let mut rows = Vec::new();
    for p in &fixture.preliminary {
        let label = format!("preliminary {}", oracle_name(p.oracle));
        let cells = check_change(&label, p.oracle, &p.printed, &|_| false);
        rows.push(row_check(label, cells));
    }

    let mut pct_matches = 0;
    let mut pct_total = 0;
    for r in &fixture.rows {
        let label = format!("{} test {}", r.view, r.trial);
        let mut cells = Vec::new();
        for (oracle, printed) in [(OracleKind::Fd, &r.fd), (OracleKind::Fr, &r.fr)] {
            let known = |col: Column| {
                fixture
                    .known_errata
                    .iter()
                    .any(|e| e.view == r.view && e.trial == r.trial && e.oracle == oracle && e.column == col)
            };
            cells.extend(check_change(&label, oracle, printed, &known));
        }
        for c in cells.iter().filter(|c| c.column == Column::DiffPct) {
            pct_total += 1;
            pct_matches += usize::from(c.matches);
        }
        rows.push(row_check(label, cells));
    }

    let summary = aggregate(&fixture.printed_rows());
    let mut stats = Vec::new();
    let mean = |label: &str, claimed: f64, computed: Option<f64>| {
        let computed = computed.unwrap_or(f64::NAN);
        StatCheck {
            label: label.to_string(),
            claimed,
            computed,
            outcome: if (claimed - computed).abs() <= TOLERANCE {
                Outcome::Pass
            } else {
                Outcome::Fail
            },
            note: None,
        }
    };
    stats.push(mean(
        "FR mean drop over successful trials",
        fixture.claimed.fr_success_mean,
        summary.overall.fr.mean_drop,
    ));
    stats.push(mean(
        "FR mean rise over failed trials",
        fixture.claimed.fr_failed_mean,
        summary.overall.fr.mean_rise,
    ));
    for (&oracle, per_view) in &fixture.claimed.success_rate {
        for (&view, &claimed) in per_view {
            let computed = summary.per_view.get(&view).map_or(f64::NAN, |s| s.get(oracle).success_rate);
            let erratum = fixture
                .known_rate_errata
                .iter()
                .find(|e| e.view == view && e.oracle == oracle);
            let matches = claimed == computed;
            let outcome = match (matches, erratum) {
                (true, None) => Outcome::Pass,
                (false, Some(_)) => Outcome::Known,
                _ => Outcome::Fail,
            };
            stats.push(StatCheck {
                label: format!("{} {} success rate", oracle_name(oracle), view.title()),
                claimed,
                computed,
                outcome,
                note: erratum.map(|e| e.note.clone()),
            });
        }
    }

    Verification {
        rows,
        pct_matches,
        pct_total,
        summary,
        stats,
    }
}
