//! Static and adaptive evaluation reports, error metrics against the full
//! evaluation, and per-attribute / per-difficulty tables.
//!
//! Scores are percent of the maximum attainable points; accuracies are percent
//! correct. Both pool over the cells of an attribute:
//! `score = 100 * Σ points / Σ max_points`, `accuracy = 100 * Σ correct / Σ asked`.

use std::fmt;

use indexmap::IndexMap;
use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adaptive::{AdaptiveRunResult, DEFAULT_POINTS};
use crate::corpus::{Cell, Difficulty, Manifest, PerDifficulty};
use crate::responses::ResponseMatrix;
use crate::seeding;
use crate::stats;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("k = {k} outside [1, {items_per_cell}]")]
    KOutOfRange { k: u32, items_per_cell: u32 },
    #[error("matrix for {model} is incomplete: {missing} items lack a response (e.g. {example})")]
    Incomplete {
        model: String,
        missing: usize,
        example: String,
    },
    #[error("run has no session for cell {0}")]
    MissingCell(Cell),
    #[error("run has a session for cell {0} which is not in the manifest")]
    UnexpectedCell(Cell),
    #[error("ground report must be a full static evaluation, got {0}")]
    NotGroundTruth(Strategy),
    #[error("attribute sets differ: {0}")]
    AttributeMismatch(String),
    #[error("model mismatch: ground is {ground:?}, candidate is {candidate:?}")]
    ModelMismatch { ground: String, candidate: String },
    #[error("candidates mix strategies {0} and {1}")]
    MixedStrategies(String, String),
    #[error("no candidate reports")]
    NoCandidates,
    #[error("no reports to tabulate")]
    NoReports,
    #[error("model {model}: no {difficulty} items asked for attribute {attribute}")]
    EmptyCell {
        model: String,
        attribute: String,
        difficulty: Difficulty,
    },
    #[error("repeats must be at least 1")]
    ZeroRepeats,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub cell: Cell,
    pub asked: PerDifficulty<u32>,
    pub correct: PerDifficulty<u32>,
    pub points: u32,
    pub max_points: u32,
}

impl CellOutcome {
    pub fn from_counts(cell: Cell, asked: PerDifficulty<u32>, correct: PerDifficulty<u32>) -> Self {
        CellOutcome {
            points: correct.dot(&DEFAULT_POINTS),
            max_points: asked.dot(&DEFAULT_POINTS),
            cell,
            asked,
            correct,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Strategy {
    Static {
        k: u32,
        items_per_cell: u32,
        /// Absent for the full evaluation, which uses every item.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        repeat: u32,
    },
    Adaptive {
        preset: String,
        seed: u64,
        repeat: u32,
    },
}

impl Strategy {
    pub fn is_full(&self) -> bool {
        matches!(self, Strategy::Static { k, items_per_cell, .. } if k == items_per_cell)
    }

    /// Label without seed or repeat, e.g. `Static 3` or `Adaptive ours_old`.
    pub fn label(&self) -> String {
        match self {
            Strategy::Static { k, .. } => format!("Static {k}"),
            Strategy::Adaptive { preset, .. } => format!("Adaptive {preset}"),
        }
    }

    pub fn repeat(&self) -> u32 {
        match self {
            Strategy::Static { repeat, .. } | Strategy::Adaptive { repeat, .. } => *repeat,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (repeat {})", self.label(), self.repeat())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model_id: String,
    pub strategy: Strategy,
    pub attribute_scores: IndexMap<String, f64>,
    pub attribute_accuracies: IndexMap<String, f64>,
    pub per_difficulty_accuracies: IndexMap<String, PerDifficulty<Option<f64>>>,
    pub global_score: f64,
    pub global_accuracy: f64,
    pub images_used: u64,
    pub cells: Vec<CellOutcome>,
}

fn pct(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

#[derive(Default, Clone, Copy)]
struct Totals {
    asked: PerDifficulty<u32>,
    correct: PerDifficulty<u32>,
    points: u64,
    max_points: u64,
}

impl Totals {
    fn add(&mut self, o: &CellOutcome) {
        self.asked.add_assign(&o.asked);
        self.correct.add_assign(&o.correct);
        self.points += o.points as u64;
        self.max_points += o.max_points as u64;
    }
}

/// Pools cell outcomes per attribute (in manifest order) and globally.
pub fn aggregate(
    model_id: &str,
    strategy: Strategy,
    manifest: &Manifest,
    cells: Vec<CellOutcome>,
) -> EvaluationReport {
    let mut per_attr: IndexMap<String, Totals> = manifest
        .attribute_names()
        .into_iter()
        .map(|a| (a.to_string(), Totals::default()))
        .collect();
    let mut global = Totals::default();
    for o in &cells {
        per_attr.entry(o.cell.attribute.clone()).or_default().add(o);
        global.add(o);
    }
    let attribute_scores = per_attr
        .iter()
        .map(|(a, t)| (a.clone(), pct(t.points, t.max_points)))
        .collect();
    let attribute_accuracies = per_attr
        .iter()
        .map(|(a, t)| {
            (
                a.clone(),
                pct(t.correct.total() as u64, t.asked.total() as u64),
            )
        })
        .collect();
    let per_difficulty_accuracies = per_attr
        .iter()
        .map(|(a, t)| {
            let acc = PerDifficulty::from_fn(|d| {
                (t.asked[d] > 0).then(|| pct(t.correct[d] as u64, t.asked[d] as u64))
            });
            (a.clone(), acc)
        })
        .collect();
    EvaluationReport {
        model_id: model_id.to_string(),
        strategy,
        attribute_scores,
        attribute_accuracies,
        per_difficulty_accuracies,
        global_score: pct(global.points, global.max_points),
        global_accuracy: pct(global.correct.total() as u64, global.asked.total() as u64),
        images_used: global.asked.total() as u64,
        cells,
    }
}

fn require_complete(matrix: &ResponseMatrix, manifest: &Manifest) -> Result<(), EvalError> {
    let mut missing = manifest
        .items()
        .iter()
        .filter(|i| matrix.get(&i.item_id).is_none());
    if let Some(first) = missing.next() {
        return Err(EvalError::Incomplete {
            model: matrix.model_id.clone(),
            missing: 1 + missing.count(),
            example: first.item_id.clone(),
        });
    }
    Ok(())
}

/// Static-k evaluation: `k` items per difficulty per cell drawn uniformly
/// without replacement; `k = items_per_cell` is the full evaluation and ignores
/// the seed.
pub fn static_eval(
    matrix: &ResponseMatrix,
    manifest: &Manifest,
    k: u32,
    seed: u64,
    repeat: u32,
) -> Result<EvaluationReport, EvalError> {
    let n = manifest.items_per_cell();
    if k == 0 || k > n {
        return Err(EvalError::KOutOfRange {
            k,
            items_per_cell: n,
        });
    }
    require_complete(matrix, manifest)?;
    let full = k == n;
    let rep = repeat.to_string();
    let mut cells = Vec::with_capacity(manifest.cell_count());
    for cell in manifest.cells() {
        let mut asked = PerDifficulty::default();
        let mut correct = PerDifficulty::default();
        for d in Difficulty::ALL {
            let pool = manifest.cell_items(&cell, d).expect("cell exists");
            let chosen: Vec<usize> = if full {
                (0..pool.len()).collect()
            } else {
                let mut rng = seeding::stream(
                    seed,
                    &["static", &rep, &cell.class, &cell.attribute, d.as_str()],
                );
                index::sample(&mut rng, pool.len(), k as usize).into_vec()
            };
            for i in chosen {
                asked[d] += 1;
                if matrix.is_correct(&pool[i].item_id) == Some(true) {
                    correct[d] += 1;
                }
            }
        }
        cells.push(CellOutcome::from_counts(cell, asked, correct));
    }
    let strategy = Strategy::Static {
        k,
        items_per_cell: n,
        seed: (!full).then_some(seed),
        repeat: if full { 0 } else { repeat },
    };
    Ok(aggregate(&matrix.model_id, strategy, manifest, cells))
}

pub fn static_eval_repeats(
    matrix: &ResponseMatrix,
    manifest: &Manifest,
    k: u32,
    seed: u64,
    repeats: u32,
) -> Result<Vec<EvaluationReport>, EvalError> {
    if repeats == 0 {
        return Err(EvalError::ZeroRepeats);
    }
    (0..repeats)
        .map(|r| static_eval(matrix, manifest, k, seed, r))
        .collect()
}

pub fn full_eval(
    matrix: &ResponseMatrix,
    manifest: &Manifest,
) -> Result<EvaluationReport, EvalError> {
    static_eval(matrix, manifest, manifest.items_per_cell(), 0, 0)
}

pub fn adaptive_eval(
    run: &AdaptiveRunResult,
    manifest: &Manifest,
) -> Result<EvaluationReport, EvalError> {
    let mut by_cell: IndexMap<&Cell, _> = run.sessions.iter().map(|s| (&s.cell, s)).collect();
    let mut cells = Vec::with_capacity(manifest.cell_count());
    for cell in manifest.cells() {
        let s = by_cell
            .shift_remove(&cell)
            .ok_or_else(|| EvalError::MissingCell(cell.clone()))?;
        cells.push(CellOutcome {
            cell,
            asked: s.asked,
            correct: s.correct,
            points: s.points,
            max_points: s.max_points,
        });
    }
    if let Some((extra, _)) = by_cell.into_iter().next() {
        return Err(EvalError::UnexpectedCell(extra.clone()));
    }
    let strategy = Strategy::Adaptive {
        preset: run.preset.clone(),
        seed: run.seed,
        repeat: run.repeat,
    };
    Ok(aggregate(&run.model_id, strategy, manifest, cells))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Mae,
    Rmse,
    Mse,
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Mae => "mae",
            Metric::Rmse => "rmse",
            Metric::Mse => "mse",
        })
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mae" => Ok(Metric::Mae),
            "rmse" => Ok(Metric::Rmse),
            "mse" => Ok(Metric::Mse),
            other => Err(format!(
                "unknown metric {other:?} (expected mae, rmse or mse)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub mae: f64,
    pub rmse: f64,
    pub mse: f64,
}

impl ErrorMetrics {
    pub fn between(a: &[f64], b: &[f64]) -> Self {
        assert_eq!(a.len(), b.len(), "vectors must align");
        if a.is_empty() {
            return Self::default();
        }
        let n = a.len() as f64;
        let mae = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / n;
        let mse = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n;
        ErrorMetrics {
            mae,
            rmse: mse.sqrt(),
            mse,
        }
    }

    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::Mae => self.mae,
            Metric::Rmse => self.rmse,
            Metric::Mse => self.mse,
        }
    }

    fn from_fn(f: impl Fn(Metric) -> f64) -> Self {
        ErrorMetrics {
            mae: f(Metric::Mae),
            rmse: f(Metric::Rmse),
            mse: f(Metric::Mse),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorPair {
    pub score: ErrorMetrics,
    pub accuracy: ErrorMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatError {
    pub strategy: Strategy,
    pub images_used: u64,
    pub score: ErrorMetrics,
    pub accuracy: ErrorMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub model_id: String,
    pub ground: Strategy,
    pub candidate: String,
    pub headline: Metric,
    pub ground_score: f64,
    pub ground_accuracy: f64,
    pub ground_attribute_scores: IndexMap<String, f64>,
    pub ground_attribute_accuracies: IndexMap<String, f64>,
    pub repeats: usize,
    pub per_repeat: Vec<RepeatError>,
    /// Mean over repeats.
    pub mean: ErrorPair,
    /// Sample standard deviation over repeats.
    pub std: ErrorPair,
}

impl ComparisonReport {
    pub fn headline_score_error(&self) -> f64 {
        self.mean.score.get(self.headline)
    }

    pub fn headline_accuracy_error(&self) -> f64 {
        self.mean.accuracy.get(self.headline)
    }
}

fn aligned(
    ground: &IndexMap<String, f64>,
    other: &IndexMap<String, f64>,
) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
    if ground.len() != other.len() || ground.keys().any(|k| !other.contains_key(k)) {
        let g: Vec<_> = ground.keys().collect();
        let o: Vec<_> = other.keys().collect();
        return Err(EvalError::AttributeMismatch(format!("{g:?} vs {o:?}")));
    }
    Ok(ground.iter().map(|(k, v)| (*v, other[k])).unzip())
}

/// Errors of each candidate's attribute vectors against the full evaluation,
/// with mean and spread across candidates (one candidate per repeat).
pub fn compare(
    ground: &EvaluationReport,
    candidates: &[EvaluationReport],
    headline: Metric,
) -> Result<ComparisonReport, EvalError> {
    if !ground.strategy.is_full() {
        return Err(EvalError::NotGroundTruth(ground.strategy.clone()));
    }
    let first = candidates.first().ok_or(EvalError::NoCandidates)?;
    let label = first.strategy.label();
    let mut per_repeat = Vec::with_capacity(candidates.len());
    for c in candidates {
        if c.model_id != ground.model_id {
            return Err(EvalError::ModelMismatch {
                ground: ground.model_id.clone(),
                candidate: c.model_id.clone(),
            });
        }
        if c.strategy.label() != label {
            return Err(EvalError::MixedStrategies(label, c.strategy.label()));
        }
        let (gs, cs) = aligned(&ground.attribute_scores, &c.attribute_scores)?;
        let (ga, ca) = aligned(&ground.attribute_accuracies, &c.attribute_accuracies)?;
        per_repeat.push(RepeatError {
            strategy: c.strategy.clone(),
            images_used: c.images_used,
            score: ErrorMetrics::between(&gs, &cs),
            accuracy: ErrorMetrics::between(&ga, &ca),
        });
    }
    let summarize = |pick: &dyn Fn(&RepeatError) -> ErrorMetrics,
                     reduce: &dyn Fn(&[f64]) -> f64| {
        ErrorMetrics::from_fn(|m| {
            let xs: Vec<f64> = per_repeat.iter().map(|r| pick(r).get(m)).collect();
            reduce(&xs)
        })
    };
    let mean_of = |xs: &[f64]| stats::mean(xs).unwrap_or(0.0);
    let mean = ErrorPair {
        score: summarize(&|r| r.score, &mean_of),
        accuracy: summarize(&|r| r.accuracy, &mean_of),
    };
    let std = ErrorPair {
        score: summarize(&|r| r.score, &stats::sample_std),
        accuracy: summarize(&|r| r.accuracy, &stats::sample_std),
    };
    Ok(ComparisonReport {
        model_id: ground.model_id.clone(),
        ground: ground.strategy.clone(),
        candidate: label,
        headline,
        ground_score: ground.global_score,
        ground_accuracy: ground.global_accuracy,
        ground_attribute_scores: ground.attribute_scores.clone(),
        ground_attribute_accuracies: ground.attribute_accuracies.clone(),
        repeats: per_repeat.len(),
        per_repeat,
        mean,
        std,
    })
}

fn fmt_cell(v: f64) -> String {
    format!("{v:.2}")
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Full-vs-subset summary: one column per model, rows for the ground score and
/// accuracy and the headline error (plus its spread) of each candidate strategy.
pub fn comparison_table_csv(comparisons: &[ComparisonReport]) -> String {
    let mut models: Vec<&str> = Vec::new();
    let mut strategies: Vec<&str> = Vec::new();
    for c in comparisons {
        if !models.contains(&c.model_id.as_str()) {
            models.push(&c.model_id);
        }
        if !strategies.contains(&c.candidate.as_str()) {
            strategies.push(&c.candidate);
        }
    }
    let find = |m: &str, s: &str| {
        comparisons
            .iter()
            .find(|c| c.model_id == m && c.candidate == s)
    };
    let ground_of = |m: &str| comparisons.iter().find(|c| c.model_id == m);
    let ground_label = comparisons
        .first()
        .map(|c| c.ground.label())
        .unwrap_or_default();

    let mut out = String::from("metric,strategy");
    for m in &models {
        out.push(',');
        out.push_str(&csv_field(m));
    }
    out.push('\n');
    let mut row = |metric: &str, strategy: &str, f: &dyn Fn(&str) -> Option<f64>| {
        out.push_str(&format!("{},{}", csv_field(metric), csv_field(strategy)));
        for m in &models {
            out.push(',');
            if let Some(v) = f(m) {
                out.push_str(&fmt_cell(v));
            }
        }
        out.push('\n');
    };
    row("Score", &ground_label, &|m| {
        ground_of(m).map(|c| c.ground_score)
    });
    for s in &strategies {
        row("Score Error", s, &|m| {
            find(m, s).map(|c| c.headline_score_error())
        });
    }
    row("Acc", &ground_label, &|m| {
        ground_of(m).map(|c| c.ground_accuracy)
    });
    for s in &strategies {
        row("Acc Error", s, &|m| {
            find(m, s).map(|c| c.headline_accuracy_error())
        });
    }
    for s in &strategies {
        row("Std of Score Error", s, &|m| {
            find(m, s).map(|c| c.std.score.get(c.headline))
        });
    }
    out
}

/// Table with one row per attribute and one column per model. Rank columns
/// name the best and second-best model of each row (ties share a rank).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTable {
    pub title: String,
    pub models: Vec<String>,
    pub rows: Vec<RankedRow>,
    /// Per-model mean over attributes, with its own ranks.
    pub average: RankedRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRow {
    pub label: String,
    pub values: Vec<f64>,
    /// Mean over models; absent for the average row.
    pub average: Option<f64>,
    #[serde(rename = "rank:1")]
    pub rank1: Vec<String>,
    #[serde(rename = "rank:2")]
    pub rank2: Vec<String>,
}

fn ranked_row(label: &str, values: Vec<f64>, models: &[String], with_average: bool) -> RankedRow {
    let mut distinct: Vec<f64> = values.clone();
    distinct.sort_by(|a, b| b.total_cmp(a));
    distinct.dedup();
    let holders = |rank: usize| -> Vec<String> {
        distinct
            .get(rank)
            .map(|&v| {
                models
                    .iter()
                    .zip(&values)
                    .filter(|(_, &x)| x == v)
                    .map(|(m, _)| m.clone())
                    .collect()
            })
            .unwrap_or_default()
    };
    RankedRow {
        label: label.to_string(),
        average: with_average.then(|| stats::mean(&values).unwrap_or(0.0)),
        rank1: holders(0),
        rank2: holders(1),
        values,
    }
}

fn build_ranked(
    title: String,
    models: Vec<String>,
    attributes: &[String],
    grid: Vec<Vec<f64>>,
) -> RankedTable {
    let rows: Vec<RankedRow> = attributes
        .iter()
        .zip(&grid)
        .map(|(a, vals)| ranked_row(a, vals.clone(), &models, true))
        .collect();
    let col_avg: Vec<f64> = (0..models.len())
        .map(|j| stats::mean(&grid.iter().map(|r| r[j]).collect::<Vec<_>>()).unwrap_or(0.0))
        .collect();
    let average = ranked_row("Average", col_avg, &models, false);
    RankedTable {
        title,
        models,
        rows,
        average,
    }
}

impl RankedTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("attribute");
        for m in &self.models {
            out.push(',');
            out.push_str(&csv_field(m));
        }
        out.push_str(",Average (Attributes),rank:1,rank:2\n");
        for row in self.rows.iter().chain(std::iter::once(&self.average)) {
            out.push_str(&csv_field(&row.label));
            for v in &row.values {
                out.push(',');
                out.push_str(&fmt_cell(*v));
            }
            out.push(',');
            if let Some(a) = row.average {
                out.push_str(&fmt_cell(a));
            }
            out.push_str(&format!(
                ",{},{}\n",
                csv_field(&row.rank1.join("|")),
                csv_field(&row.rank2.join("|"))
            ));
        }
        out
    }
}

/// Per-attribute accuracy at each difficulty over every item of a complete
/// matrix (the full-evaluation variant).
pub fn difficulty_breakdown(
    matrix: &ResponseMatrix,
    manifest: &Manifest,
) -> Result<DifficultyBreakdown, EvalError> {
    Ok(full_eval(matrix, manifest)?.per_difficulty_accuracies)
}

/// Attribute name to per-difficulty accuracy; `None` where a level was empty.
pub type DifficultyBreakdown = IndexMap<String, PerDifficulty<Option<f64>>>;

/// One table per difficulty: rows are attributes, columns are models.
/// Input is `(model_id, attribute -> per-difficulty accuracy)` per model.
pub fn difficulty_tables(
    models: &[(String, DifficultyBreakdown)],
) -> Result<Vec<(Difficulty, RankedTable)>, EvalError> {
    let (_, first) = models.first().ok_or(EvalError::NoReports)?;
    let attributes: Vec<String> = first.keys().cloned().collect();
    for (_, b) in models {
        if b.len() != attributes.len() || attributes.iter().any(|a| !b.contains_key(a)) {
            return Err(EvalError::AttributeMismatch(format!(
                "{:?} vs {:?}",
                attributes,
                b.keys().collect::<Vec<_>>()
            )));
        }
    }
    let names: Vec<String> = models.iter().map(|(m, _)| m.clone()).collect();
    Difficulty::ALL
        .into_iter()
        .map(|d| {
            let mut grid = Vec::with_capacity(attributes.len());
            for a in &attributes {
                let mut row = Vec::with_capacity(models.len());
                for (model, b) in models {
                    row.push(b[a][d].ok_or_else(|| EvalError::EmptyCell {
                        model: model.clone(),
                        attribute: a.clone(),
                        difficulty: d,
                    })?);
                }
                grid.push(row);
            }
            let title = format!("Accuracy at the {d} difficulty level");
            Ok((d, build_ranked(title, names.clone(), &attributes, grid)))
        })
        .collect()
}

/// Attribute scores per model.
pub fn attribute_score_table(reports: &[EvaluationReport]) -> Result<RankedTable, EvalError> {
    let first = reports.first().ok_or(EvalError::NoReports)?;
    let attributes: Vec<String> = first.attribute_scores.keys().cloned().collect();
    let mut grid = vec![Vec::with_capacity(reports.len()); attributes.len()];
    for r in reports {
        let (_, vals) = aligned(&first.attribute_scores, &r.attribute_scores)?;
        for (row, v) in grid.iter_mut().zip(vals) {
            row.push(v);
        }
    }
    let names = reports.iter().map(|r| r.model_id.clone()).collect();
    Ok(build_ranked(
        "Score per attribute".into(),
        names,
        &attributes,
        grid,
    ))
}
