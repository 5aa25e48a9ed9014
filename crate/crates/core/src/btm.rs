//! Pairwise "which image is harder" comparisons: scheduling, Bradley-Terry
//! fitting and correlation of fitted strengths with difficulty labels.
//!
//! Under the model, `P(i judged harder than j) = e^λi / (e^λi + e^λj)`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Difficulty, Manifest};
use crate::seeding;
use crate::stats::{self, StatsError};

#[derive(Debug, Error)]
pub enum BtmError {
    #[error("cell {class}/{attribute} has {available} {difficulty} items, {needed} needed")]
    InsufficientItems {
        class: String,
        attribute: String,
        difficulty: Difficulty,
        available: u32,
        needed: u32,
    },
    #[error("images_per_level must be at least 1")]
    ZeroImages,
    #[error("unknown class {0:?}")]
    UnknownClass(String),
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("comparison list is empty")]
    Empty,
    #[error("comparison {position}: left and right are both {item:?}")]
    SelfComparison { position: usize, item: String },
    #[error("invalid fit options: {0}")]
    Options(String),
    #[error("with epsilon = 0 the likelihood has no finite maximum: {0}")]
    Degenerate(String),
    #[error("no label for item {0:?}")]
    MissingLabel(String),
    #[error("no true strength for item {0:?}")]
    MissingStrength(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    Left,
    Right,
}

/// One judgement; the winner is the image judged more difficult.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub left: String,
    pub right: String,
    pub winner: Winner,
    #[serde(default)]
    pub rater: String,
}

impl Comparison {
    pub fn winner_id(&self) -> &str {
        match self.winner {
            Winner::Left => &self.left,
            Winner::Right => &self.right,
        }
    }

    pub fn loser_id(&self) -> &str {
        match self.winner {
            Winner::Left => &self.right,
            Winner::Right => &self.left,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub class: String,
    pub attribute: String,
    pub left: String,
    pub right: String,
    pub left_difficulty: Difficulty,
    pub right_difficulty: Difficulty,
}

pub const LEVEL_PAIRS: [(Difficulty, Difficulty); 3] = [
    (Difficulty::Easy, Difficulty::Medium),
    (Difficulty::Medium, Difficulty::Hard),
    (Difficulty::Easy, Difficulty::Hard),
];

/// Comparison slots for every (class, attribute) in the selection: all
/// cross-level pairs among `images_per_level` sampled images per level, with
/// left/right placement randomised per slot. Empty selections mean "all".
pub fn schedule(
    manifest: &Manifest,
    classes: &[String],
    attributes: &[String],
    images_per_level: u32,
    seed: u64,
) -> Result<Vec<Slot>, BtmError> {
    if images_per_level == 0 {
        return Err(BtmError::ZeroImages);
    }
    let pick = |wanted: &[String], all: Vec<String>, err: fn(String) -> BtmError| {
        if wanted.is_empty() {
            return Ok(all);
        }
        match wanted.iter().find(|w| !all.contains(w)) {
            Some(w) => Err(err(w.clone())),
            None => Ok(wanted.to_vec()),
        }
    };
    let classes = pick(classes, manifest.classes().to_vec(), BtmError::UnknownClass)?;
    let attribute_names = manifest
        .attribute_names()
        .iter()
        .map(|s| s.to_string())
        .collect();
    let attributes = pick(attributes, attribute_names, BtmError::UnknownAttribute)?;

    let n = manifest.items_per_cell();
    let mut slots = Vec::new();
    for class in &classes {
        for attribute in &attributes {
            let cell = crate::corpus::Cell::new(class.clone(), attribute.clone());
            let chosen = crate::corpus::PerDifficulty::from_fn(|d| {
                let pool = manifest.cell_items(&cell, d).unwrap_or(&[]);
                if images_per_level > n {
                    return Err(BtmError::InsufficientItems {
                        class: class.clone(),
                        attribute: attribute.clone(),
                        difficulty: d,
                        available: n,
                        needed: images_per_level,
                    });
                }
                let idx: Vec<usize> = if images_per_level == n {
                    (0..pool.len()).collect()
                } else {
                    let mut rng =
                        seeding::stream(seed, &["btm-select", class, attribute, d.as_str()]);
                    let mut v =
                        index::sample(&mut rng, pool.len(), images_per_level as usize).into_vec();
                    v.sort_unstable();
                    v
                };
                Ok(idx
                    .into_iter()
                    .map(|i| pool[i].item_id.clone())
                    .collect::<Vec<_>>())
            });
            let chosen =
                crate::corpus::PerDifficulty::new(chosen.easy?, chosen.medium?, chosen.hard?);
            let mut placement = seeding::stream(seed, &["btm-placement", class, attribute]);
            for (da, db) in LEVEL_PAIRS {
                for a in &chosen[da] {
                    for b in &chosen[db] {
                        let swap = placement.gen::<bool>();
                        let ((left, ld), (right, rd)) = if swap {
                            ((b, db), (a, da))
                        } else {
                            ((a, da), (b, db))
                        };
                        slots.push(Slot {
                            class: class.clone(),
                            attribute: attribute.clone(),
                            left: left.clone(),
                            right: right.clone(),
                            left_difficulty: ld,
                            right_difficulty: rd,
                        });
                    }
                }
            }
        }
    }
    Ok(slots)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub epsilon: f64,
    pub tol: f64,
    pub max_iter: u32,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            epsilon: 0.1,
            tol: 1e-8,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtScores {
    /// Fitted strengths, sorted by item id, summing to zero.
    pub lambda: BTreeMap<String, f64>,
    pub iterations: u32,
    pub converged: bool,
    pub epsilon: f64,
    pub log_likelihood: f64,
}

struct WinTable {
    ids: Vec<String>,
    /// `wins[i][j]`: times i was judged harder than j, plus smoothing.
    wins: Vec<Vec<f64>>,
}

impl WinTable {
    fn build(comparisons: &[Comparison], epsilon: f64) -> Result<Self, BtmError> {
        if comparisons.is_empty() {
            return Err(BtmError::Empty);
        }
        let mut ids = BTreeSet::new();
        for (k, c) in comparisons.iter().enumerate() {
            if c.left == c.right {
                return Err(BtmError::SelfComparison {
                    position: k + 1,
                    item: c.left.clone(),
                });
            }
            ids.insert(c.left.as_str());
            ids.insert(c.right.as_str());
        }
        let ids: Vec<String> = ids.into_iter().map(String::from).collect();
        let pos: HashMap<&str, usize> = ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let n = ids.len();
        let mut wins = vec![vec![0.0; n]; n];
        for c in comparisons {
            wins[pos[c.winner_id()]][pos[c.loser_id()]] += 1.0;
        }
        for (i, row) in wins.iter_mut().enumerate() {
            for (j, w) in row.iter_mut().enumerate() {
                if i != j {
                    *w += epsilon;
                }
            }
        }
        Ok(WinTable { ids, wins })
    }

    /// Every item must be reachable from every other along "beat" edges,
    /// otherwise some strengths run off to ±∞.
    fn check_strongly_connected(&self) -> Result<(), BtmError> {
        let n = self.ids.len();
        let reach = |forward: bool| {
            let mut seen = vec![false; n];
            let mut stack = vec![0];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for (j, flag) in seen.iter_mut().enumerate() {
                    let w = if forward {
                        self.wins[i][j]
                    } else {
                        self.wins[j][i]
                    };
                    if w > 0.0 && !*flag {
                        *flag = true;
                        stack.push(j);
                    }
                }
            }
            seen
        };
        for forward in [true, false] {
            if let Some(j) = reach(forward).iter().position(|s| !s) {
                return Err(BtmError::Degenerate(format!(
                    "items {:?} and {:?} are not linked by wins in both directions",
                    self.ids[0], self.ids[j]
                )));
            }
        }
        Ok(())
    }

    fn log_likelihood(&self, lambda: &[f64]) -> f64 {
        let mut ll = 0.0;
        for (i, row) in self.wins.iter().enumerate() {
            for (j, &w) in row.iter().enumerate() {
                if w > 0.0 {
                    let hi = lambda[i].max(lambda[j]);
                    let lse = hi + ((lambda[i] - hi).exp() + (lambda[j] - hi).exp()).ln();
                    ll += w * (lambda[i] - lse);
                }
            }
        }
        ll
    }
}

fn recentre(lambda: &mut [f64]) {
    let m = lambda.iter().sum::<f64>() / lambda.len() as f64;
    lambda.iter_mut().for_each(|l| *l -= m);
}

pub fn fit(comparisons: &[Comparison], opts: FitOptions) -> Result<BtScores, BtmError> {
    fit_traced(comparisons, opts).map(|(s, _)| s)
}

/// Fits strengths by minorization-maximization on `γ = e^λ`:
/// `γ_i ← W_i / Σ_j n_ij / (γ_i + γ_j)`, applied to all items at once and
/// followed by recentring `λ = ln γ` to sum zero. Also returns the smoothed
/// log-likelihood before the first and after every update.
pub fn fit_traced(
    comparisons: &[Comparison],
    opts: FitOptions,
) -> Result<(BtScores, Vec<f64>), BtmError> {
    if !(opts.epsilon.is_finite() && opts.epsilon >= 0.0) {
        return Err(BtmError::Options(format!(
            "epsilon {} must be ≥ 0",
            opts.epsilon
        )));
    }
    if !(opts.tol.is_finite() && opts.tol > 0.0) {
        return Err(BtmError::Options(format!("tol {} must be > 0", opts.tol)));
    }
    let table = WinTable::build(comparisons, opts.epsilon)?;
    let n = table.ids.len();
    if opts.epsilon == 0.0 {
        table.check_strongly_connected()?;
    }
    let total_wins: Vec<f64> = table.wins.iter().map(|r| r.iter().sum()).collect();
    let mut lambda = vec![0.0; n];
    let mut trace = vec![table.log_likelihood(&lambda)];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let gamma: Vec<f64> = lambda.iter().map(|l| l.exp()).collect();
        let mut next: Vec<f64> = (0..n)
            .map(|i| {
                let denom: f64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (table.wins[i][j] + table.wins[j][i]) / (gamma[i] + gamma[j]))
                    .sum();
                (total_wins[i] / denom).ln()
            })
            .collect();
        recentre(&mut next);
        let delta = next
            .iter()
            .zip(&lambda)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        lambda = next;
        trace.push(table.log_likelihood(&lambda));
        if delta < opts.tol {
            converged = true;
            break;
        }
    }
    let scores = BtScores {
        lambda: table.ids.into_iter().zip(lambda).collect(),
        iterations,
        converged,
        epsilon: opts.epsilon,
        log_likelihood: *trace.last().unwrap(),
    };
    Ok((scores, trace))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub pearson: f64,
    pub spearman: f64,
    pub kendall_tau_b: f64,
    pub variant: String,
    pub n: usize,
}

/// Correlates fitted strengths with integer difficulty labels (1, 2, 3).
pub fn correlate(
    scores: &BtScores,
    labels: &BTreeMap<String, u8>,
) -> Result<Correlation, BtmError> {
    let mut x = Vec::with_capacity(scores.lambda.len());
    let mut y = Vec::with_capacity(scores.lambda.len());
    for (id, &l) in &scores.lambda {
        let label = labels
            .get(id)
            .ok_or_else(|| BtmError::MissingLabel(id.clone()))?;
        x.push(*label as f64);
        y.push(l);
    }
    Ok(Correlation {
        pearson: stats::pearson(&x, &y)?,
        spearman: stats::spearman(&x, &y)?,
        kendall_tau_b: stats::kendall_tau_b(&x, &y)?,
        variant: "tau-b".into(),
        n: x.len(),
    })
}

/// Difficulty level (1 = easy, 2 = medium, 3 = hard) of every manifest item.
pub fn labels_from_manifest(manifest: &Manifest) -> BTreeMap<String, u8> {
    manifest
        .items()
        .iter()
        .map(|i| (i.item_id.clone(), i.difficulty.level()))
        .collect()
}

/// Default true strengths for simulated raters: `spacing * (level - 2)`.
pub fn level_strengths(slots: &[Slot], spacing: f64) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for s in slots {
        out.insert(
            s.left.clone(),
            spacing * (s.left_difficulty.level() as f64 - 2.0),
        );
        out.insert(
            s.right.clone(),
            spacing * (s.right_difficulty.level() as f64 - 2.0),
        );
    }
    out
}

/// Judgements drawn from the model with the given true strengths,
/// `per_slot` per slot. Raters are assigned two classes each, in order of
/// first appearance.
pub fn simulate_raters(
    slots: &[Slot],
    truth: &BTreeMap<String, f64>,
    per_slot: u32,
    seed: u64,
) -> Result<Vec<Comparison>, BtmError> {
    let mut class_order: Vec<&str> = Vec::new();
    let mut out = Vec::with_capacity(slots.len() * per_slot as usize);
    for (k, s) in slots.iter().enumerate() {
        let ci = match class_order.iter().position(|c| *c == s.class) {
            Some(i) => i,
            None => {
                class_order.push(&s.class);
                class_order.len() - 1
            }
        };
        let strength = |id: &String| {
            truth
                .get(id)
                .copied()
                .ok_or_else(|| BtmError::MissingStrength(id.clone()))
        };
        let (ll, lr) = (strength(&s.left)?, strength(&s.right)?);
        let p_left = 1.0 / (1.0 + (lr - ll).exp());
        let mut rng = seeding::stream(seed, &["raters", &k.to_string(), &s.left, &s.right]);
        for _ in 0..per_slot {
            out.push(Comparison {
                left: s.left.clone(),
                right: s.right.clone(),
                winner: if rng.gen::<f64>() < p_left {
                    Winner::Left
                } else {
                    Winner::Right
                },
                rater: format!("rater-{:03}", ci / 2),
            });
        }
    }
    Ok(out)
}

pub fn parse_comparisons(reader: impl BufRead) -> Result<Vec<Comparison>, BtmError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let c: Comparison = serde_json::from_str(&line).map_err(|e| BtmError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if c.left == c.right {
            return Err(BtmError::Parse {
                line: i + 1,
                message: format!("left and right are both {:?}", c.left),
            });
        }
        out.push(c);
    }
    Ok(out)
}

pub fn comparisons_to_jsonl(comparisons: &[Comparison]) -> String {
    comparisons
        .iter()
        .map(|c| serde_json::to_string(c).expect("serializable") + "\n")
        .collect()
}
