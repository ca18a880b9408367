//! CSV and JSON artifacts exchanged between subcommands.

use std::fs;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use bidguard::assign::Assignment;
use bidguard::defense::DetectionVerdict;
use bidguard::scoring::ScoreMatrix;

use crate::{CliResult, Failure};

fn io_error(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Other(format!("{}: {e}", path.display()))
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| io_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> CliResult<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    r.deserialize().collect::<Result<Vec<T>, _>>().map_err(|e| io_error(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    fs::write(path, text + "\n").map_err(|e| io_error(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_error(path, e))
}

#[derive(Serialize, Deserialize)]
struct ScoreRow {
    reviewer_index: usize,
    paper_index: usize,
    score: f64,
}

/// Scores keep full precision so a re-read ranks exactly as the model did.
pub fn write_scores(path: &Path, scores: &ScoreMatrix) -> CliResult<()> {
    let (m, n) = (scores.n_reviewers(), scores.n_papers());
    write_rows(
        path,
        (0..m)
            .flat_map(|r| (0..n).map(move |p| ScoreRow { reviewer_index: r, paper_index: p, score: scores.get(r, p) })),
    )
}

pub fn read_scores(path: &Path) -> CliResult<ScoreMatrix> {
    let rows: Vec<ScoreRow> = read_rows(path)?;
    let m = rows.iter().map(|r| r.reviewer_index + 1).max().unwrap_or(0);
    let n = rows.iter().map(|r| r.paper_index + 1).max().unwrap_or(0);
    if rows.len() != m * n {
        return Err(Failure::Other(format!("{}: {} rows do not cover a {m}x{n} table", path.display(), rows.len())));
    }
    let mut values = vec![f64::NAN; m * n];
    for row in rows {
        values[row.reviewer_index * n + row.paper_index] = row.score;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Failure::Other(format!("{}: duplicate or missing pairs", path.display())));
    }
    Ok(ScoreMatrix::new(m, n, values)?)
}

#[derive(Serialize, Deserialize)]
pub struct VerdictRow {
    pub reviewer_index: usize,
    pub paper_index: usize,
    pub score: f64,
    pub robust_score: f64,
    pub removed: bool,
    /// Party members joined by `|`.
    pub party: String,
}

pub fn write_verdicts(path: &Path, verdicts: &[DetectionVerdict]) -> CliResult<()> {
    write_rows(
        path,
        verdicts.iter().map(|v| VerdictRow {
            reviewer_index: v.reviewer,
            paper_index: v.paper,
            score: v.score,
            robust_score: v.robust_score,
            removed: v.removed,
            party: v.party.iter().map(usize::to_string).collect::<Vec<_>>().join("|"),
        }),
    )
}

pub fn read_verdicts(path: &Path) -> CliResult<Vec<VerdictRow>> {
    read_rows(path)
}

#[derive(Serialize)]
struct AssignmentRow {
    paper_index: usize,
    /// -1 marks an unfilled slot.
    reviewer_index: i64,
}

pub fn write_assignment(path: &Path, a: &Assignment) -> CliResult<()> {
    let mut rows = Vec::new();
    for (p, &missing) in a.deficit.iter().enumerate() {
        rows.extend(a.reviewers_of(p).map(|r| AssignmentRow { paper_index: p, reviewer_index: r as i64 }));
        rows.extend((0..missing).map(|_| AssignmentRow { paper_index: p, reviewer_index: -1 }));
    }
    write_rows(path, rows)
}

#[derive(Serialize)]
struct ClusterRow<'a> {
    cluster_id: usize,
    paper_id: &'a str,
}

pub fn write_clusters<'a>(path: &Path, clusters: impl IntoIterator<Item = (usize, &'a str)>) -> CliResult<()> {
    write_rows(path, clusters.into_iter().map(|(cluster_id, paper_id)| ClusterRow { cluster_id, paper_id }))
}
