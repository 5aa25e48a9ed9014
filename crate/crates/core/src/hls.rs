//! Easy/medium/hard triplets and the hierarchical-learning score.
//!
//! A triplet's correctness pattern (e, m, h) follows the hierarchical
//! principle when correctness never increases with difficulty: e >= m >= h.
//! Four of the eight patterns qualify.

use std::collections::HashSet;
use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Cell, Difficulty, Manifest};
use crate::responses::ResponseMatrix;
use crate::seeding;
use crate::stats::{self, StatsError};

#[derive(Debug, Error)]
pub enum HlsError {
    #[error("no response for item {0}")]
    MissingResponse(String),
    #[error("tally is empty")]
    EmptyTally,
    #[error("correlation needs at least two reports, got {0}")]
    TooFewReports(usize),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pattern {
    pub easy: bool,
    pub medium: bool,
    pub hard: bool,
}

impl Pattern {
    pub const fn new(easy: bool, medium: bool, hard: bool) -> Self {
        Pattern { easy, medium, hard }
    }

    /// Report order: (1,1,1), (1,1,0), (1,0,1), ..., (0,0,0).
    pub fn all() -> [Pattern; 8] {
        std::array::from_fn(|i| Pattern::from_bits(7 - i as u8))
    }

    pub fn bits(self) -> u8 {
        (self.easy as u8) << 2 | (self.medium as u8) << 1 | self.hard as u8
    }

    pub fn from_bits(bits: u8) -> Self {
        Pattern::new(bits & 4 != 0, bits & 2 != 0, bits & 1 != 0)
    }

    pub fn follows_principle(self) -> bool {
        self.easy >= self.medium && self.medium >= self.hard
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}{}",
            self.easy as u8, self.medium as u8, self.hard as u8
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub cell: Cell,
    pub easy: String,
    pub medium: String,
    pub hard: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "seed")]
pub enum Pairing {
    /// i-th easy with i-th medium and i-th hard item of the cell.
    ByIndex,
    /// Medium and hard indices permuted per cell from a seed-derived stream.
    SeededRandom(u64),
}

pub fn build_triplets(manifest: &Manifest, pairing: Pairing) -> Vec<Triplet> {
    let n = manifest.items_per_cell() as usize;
    let mut out = Vec::with_capacity(manifest.cell_count() * n);
    for cell in manifest.cells() {
        let easy = manifest
            .cell_items(&cell, Difficulty::Easy)
            .expect("cell exists");
        let medium = manifest
            .cell_items(&cell, Difficulty::Medium)
            .expect("cell exists");
        let hard = manifest
            .cell_items(&cell, Difficulty::Hard)
            .expect("cell exists");
        let mut m_order: Vec<usize> = (0..n).collect();
        let mut h_order: Vec<usize> = (0..n).collect();
        if let Pairing::SeededRandom(seed) = pairing {
            let mut rng = seeding::stream(seed, &["triplets", &cell.class, &cell.attribute]);
            m_order.shuffle(&mut rng);
            h_order.shuffle(&mut rng);
        }
        for i in 0..n {
            out.push(Triplet {
                cell: cell.clone(),
                easy: easy[i].item_id.clone(),
                medium: medium[m_order[i]].item_id.clone(),
                hard: hard[h_order[i]].item_id.clone(),
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternTally {
    /// Indexed by [`Pattern::bits`].
    pub counts: [u64; 8],
    pub total: u64,
}

impl PatternTally {
    pub fn add(&mut self, p: Pattern) {
        self.counts[p.bits() as usize] += 1;
        self.total += 1;
    }

    pub fn count(&self, p: Pattern) -> u64 {
        self.counts[p.bits() as usize]
    }

    pub fn merge(mut self, other: &PatternTally) -> PatternTally {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self.total += other.total;
        self
    }

    pub fn principle_following(&self) -> u64 {
        Pattern::all()
            .into_iter()
            .filter(|p| p.follows_principle())
            .map(|p| self.count(p))
            .sum()
    }
}

pub fn triplet_pattern(triplet: &Triplet, matrix: &ResponseMatrix) -> Result<Pattern, HlsError> {
    let look = |id: &str| {
        matrix
            .is_correct(id)
            .ok_or_else(|| HlsError::MissingResponse(id.to_string()))
    };
    Ok(Pattern::new(
        look(&triplet.easy)?,
        look(&triplet.medium)?,
        look(&triplet.hard)?,
    ))
}

pub fn tally_patterns(
    triplets: &[Triplet],
    matrix: &ResponseMatrix,
) -> Result<PatternTally, HlsError> {
    let mut tally = PatternTally::default();
    for t in triplets {
        tally.add(triplet_pattern(t, matrix)?);
    }
    Ok(tally)
}

/// Percentage of triplets whose pattern follows the principle.
pub fn hls_score(tally: &PatternTally) -> Result<f64, HlsError> {
    if tally.total == 0 {
        return Err(HlsError::EmptyTally);
    }
    Ok(100.0 * tally.principle_following() as f64 / tally.total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternShare {
    pub pattern: String,
    pub easy: bool,
    pub medium: bool,
    pub hard: bool,
    pub principle_following: bool,
    pub count: u64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HlsReport {
    pub model_id: String,
    pub triplets: u64,
    /// All eight patterns in report order.
    pub patterns: Vec<PatternShare>,
    pub hls: f64,
    pub top1_accuracy: f64,
}

impl HlsReport {
    pub fn tally(&self) -> PatternTally {
        let mut t = PatternTally::default();
        for p in &self.patterns {
            let pat = Pattern::new(p.easy, p.medium, p.hard);
            t.counts[pat.bits() as usize] = p.count;
        }
        t.total = self.triplets;
        t
    }

    /// Plot data: one row per pattern.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("model,pattern,easy,medium,hard,principle_following,count,percent\n");
        for p in &self.patterns {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{:.4}\n",
                self.model_id,
                p.pattern,
                p.easy as u8,
                p.medium as u8,
                p.hard as u8,
                p.principle_following,
                p.count,
                p.percent
            ));
        }
        out.push_str(&format!("{},hls,,,,,,{:.4}\n", self.model_id, self.hls));
        out.push_str(&format!(
            "{},top1_accuracy,,,,,,{:.4}\n",
            self.model_id, self.top1_accuracy
        ));
        out
    }
}

/// Tallies the triplets and computes top-1 accuracy over the items they cover.
pub fn hls_report(triplets: &[Triplet], matrix: &ResponseMatrix) -> Result<HlsReport, HlsError> {
    let tally = tally_patterns(triplets, matrix)?;
    let hls = hls_score(&tally)?;
    let mut seen = HashSet::new();
    let (mut asked, mut correct) = (0u64, 0u64);
    for t in triplets {
        for id in [&t.easy, &t.medium, &t.hard] {
            if seen.insert(id.as_str()) {
                asked += 1;
                correct += matrix.is_correct(id).unwrap_or(false) as u64;
            }
        }
    }
    let patterns = Pattern::all()
        .into_iter()
        .map(|p| PatternShare {
            pattern: p.to_string(),
            easy: p.easy,
            medium: p.medium,
            hard: p.hard,
            principle_following: p.follows_principle(),
            count: tally.count(p),
            percent: 100.0 * tally.count(p) as f64 / tally.total as f64,
        })
        .collect();
    Ok(HlsReport {
        model_id: matrix.model_id.clone(),
        triplets: tally.total,
        patterns,
        hls,
        top1_accuracy: 100.0 * correct as f64 / asked as f64,
    })
}

/// Pearson correlation between top-1 accuracy and HLS across models.
pub fn hls_accuracy_correlation(reports: &[HlsReport]) -> Result<f64, HlsError> {
    if reports.len() < 2 {
        return Err(HlsError::TooFewReports(reports.len()));
    }
    let acc: Vec<f64> = reports.iter().map(|r| r.top1_accuracy).collect();
    let hls: Vec<f64> = reports.iter().map(|r| r.hls).collect();
    Ok(stats::pearson(&acc, &hls)?)
}
