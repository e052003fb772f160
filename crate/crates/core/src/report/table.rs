use std::path::Path;
use std::str::FromStr;

use serde_json::{json, Value};

use super::{Change, DiffRow, Direction, Environment, ReportError, TrialRecord};
use crate::pipeline::View;

pub const COLUMNS: [&str; 10] = [
    "trial",
    "fd_initial",
    "fd_final",
    "fd_diff",
    "fd_diff_pct",
    "fr_initial",
    "fr_final",
    "fr_diff",
    "fr_diff_pct",
    "environment",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
    Json,
}

impl FromStr for TableFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, ReportError> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "md" | "markdown" => Ok(TableFormat::Markdown),
            "json" => Ok(TableFormat::Json),
            other => Err(ReportError::Parse(format!("unknown table format {other:?}"))),
        }
    }
}

fn cells(record: &TrialRecord, diff: &DiffRow) -> [String; 10] {
    [
        record.id(),
        format!("{:.2}", record.fd_initial),
        format!("{:.2}", record.fd_final),
        diff.fd.diff_cell(),
        diff.fd.pct_cell(),
        format!("{:.2}", record.fr_initial),
        format!("{:.2}", record.fr_final),
        diff.fr.diff_cell(),
        diff.fr.pct_cell(),
        record.environment.to_string(),
    ]
}

fn json_row(record: &TrialRecord, diff: &DiffRow) -> Value {
    let c = cells(record, diff);
    json!({
        "trial": c[0],
        "fd_initial": record.fd_initial,
        "fd_final": record.fd_final,
        "fd_diff": c[3],
        "fd_diff_pct": diff.fd.diff_pct,
        "fr_initial": record.fr_initial,
        "fr_final": record.fr_final,
        "fr_diff": c[7],
        "fr_diff_pct": diff.fr.diff_pct,
        "environment": c[9],
    })
}

/// Renders rows in the given format. An empty list gives just the header
/// (or `[]` for JSON).
pub fn render_table(rows: &[(TrialRecord, DiffRow)], format: TableFormat) -> String {
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str(&COLUMNS.join(","));
            out.push('\n');
            for (r, d) in rows {
                out.push_str(&cells(r, d).join(","));
                out.push('\n');
            }
        }
        TableFormat::Markdown => {
            out.push_str(&format!("| {} |\n", COLUMNS.join(" | ")));
            out.push_str(&format!("|{}\n", "---|".repeat(COLUMNS.len())));
            for (r, d) in rows {
                out.push_str(&format!("| {} |\n", cells(r, d).join(" | ")));
            }
        }
        TableFormat::Json => {
            let v: Vec<Value> = rows.iter().map(|(r, d)| json_row(r, d)).collect();
            out = serde_json::to_string_pretty(&v).expect("table rows serialize");
            out.push('\n');
        }
    }
    out
}

pub fn export_table(rows: &[(TrialRecord, DiffRow)], format: TableFormat, path: &Path) -> Result<(), ReportError> {
    std::fs::write(path, render_table(rows, format)).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_trial(s: &str) -> Result<(View, u32), ReportError> {
    let bad = || ReportError::Parse(format!("bad trial id {s:?}"));
    let (view, n) = s.split_once('-').ok_or_else(bad)?;
    let view = match view {
        "front" => View::Front,
        "left" => View::Left,
        "right" => View::Right,
        _ => return Err(bad()),
    };
    Ok((view, n.parse().map_err(|_| bad())?))
}

fn parse_num(s: &str) -> Result<f64, ReportError> {
    s.parse().map_err(|_| ReportError::Parse(format!("bad number {s:?}")))
}

fn parse_change(initial: &str, final_score: &str, diff: &str, pct: &str) -> Result<Change, ReportError> {
    let (direction, magnitude) = match diff.chars().next() {
        Some('↓') => (Direction::Down, &diff['↓'.len_utf8()..]),
        Some('↑') => (Direction::Up, &diff['↑'.len_utf8()..]),
        _ => return Err(ReportError::Parse(format!("diff {diff:?} has no direction arrow"))),
    };
    Ok(Change {
        initial: parse_num(initial)?,
        final_score: parse_num(final_score)?,
        diff: parse_num(magnitude.trim())?,
        direction,
        diff_pct: match pct {
            "n/a" => None,
            p => Some(parse_num(p)?),
        },
    })
}

/// Reads back a table written with [`TableFormat::Markdown`].
pub fn parse_markdown(text: &str) -> Result<Vec<(TrialRecord, DiffRow)>, ReportError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let split = |l: &str| -> Vec<String> {
        l.trim()
            .trim_start_matches('|')
            .trim_end_matches('|')
            .split('|')
            .map(|c| c.trim().to_string())
            .collect()
    };
    let header = lines.next().ok_or_else(|| ReportError::Parse("empty table".into()))?;
    if split(header) != COLUMNS {
        return Err(ReportError::Parse(format!("unexpected header {header:?}")));
    }
    lines.next();
    let mut rows = Vec::new();
    for line in lines {
        let c = split(line);
        if c.len() != COLUMNS.len() {
            return Err(ReportError::Parse(format!("row {line:?} has {} cells", c.len())));
        }
        let (view, trial) = parse_trial(&c[0])?;
        let fd = parse_change(&c[1], &c[2], &c[3], &c[4])?;
        let fr = parse_change(&c[5], &c[6], &c[7], &c[8])?;
        let record = TrialRecord {
            view,
            trial,
            fd_initial: fd.initial,
            fd_final: fd.final_score,
            fr_initial: fr.initial,
            fr_final: fr.final_score,
            environment: c[9].parse::<Environment>()?,
        };
        rows.push((record, DiffRow { fd, fr }));
    }
    Ok(rows)
}
