//! Synthetic responders with known ground truth.
//!
//! Every random draw is keyed by `(pool seed, responder seed, model id, item id)`
//! so adding or reordering responders never changes another responder's output.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use indexmap::IndexMap;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Difficulty, Item, Manifest, PerDifficulty};
use crate::evalkit::{self, EvalError, EvaluationReport};
use crate::responses::{self, ResponseError, ResponseMatrix, ResponseRecord};
use crate::seeding;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("responder {model}: {message}")]
    InvalidSpec { model: String, message: String },
    #[error("duplicate responder id {0:?}")]
    DuplicateModel(String),
    #[error("responder {model}: cell offset for {cell:?} does not match any manifest cell")]
    UnknownCell { model: String, cell: String },
    #[error("pool file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Responses(#[from] ResponseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ResponderKind {
    /// Correct with probability `logistic(θ − b_d − cell offset)`.
    Irt,
    /// Correct iff `θ ≥ b_d + u`, where `u` is shared by the three items of a
    /// (cell, index) triplet, so easy ≤ medium ≤ hard latents always hold.
    Threshold {
        #[serde(default = "default_spread")]
        spread: f64,
    },
    Constant {
        p: f64,
    },
}

fn default_spread() -> f64 {
    0.5
}

fn default_offsets() -> PerDifficulty<f64> {
    PerDifficulty::new(-1.0, 0.0, 1.0)
}

fn default_jitter() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponderSpec {
    pub model_id: String,
    pub kind: ResponderKind,
    #[serde(default)]
    pub theta: f64,
    #[serde(default = "default_offsets")]
    pub difficulty_offsets: PerDifficulty<f64>,
    /// Keyed by `class/attribute`; cells not listed use 0.
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub cell_offsets: IndexMap<String, f64>,
    #[serde(default)]
    pub seed: u64,
    /// Half-width of the uniform noise added to emitted confidences.
    #[serde(default = "default_jitter")]
    pub confidence_jitter: f64,
}

impl ResponderSpec {
    pub fn irt(model_id: impl Into<String>, theta: f64, seed: u64) -> Self {
        Self::with_kind(model_id, ResponderKind::Irt, theta, seed)
    }

    pub fn threshold(model_id: impl Into<String>, theta: f64, seed: u64) -> Self {
        Self::with_kind(
            model_id,
            ResponderKind::Threshold {
                spread: default_spread(),
            },
            theta,
            seed,
        )
    }

    pub fn constant(model_id: impl Into<String>, p: f64, seed: u64) -> Self {
        Self::with_kind(model_id, ResponderKind::Constant { p }, 0.0, seed)
    }

    fn with_kind(model_id: impl Into<String>, kind: ResponderKind, theta: f64, seed: u64) -> Self {
        ResponderSpec {
            model_id: model_id.into(),
            kind,
            theta,
            difficulty_offsets: default_offsets(),
            cell_offsets: IndexMap::new(),
            seed,
            confidence_jitter: default_jitter(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |message: String| {
            Err(SimError::InvalidSpec {
                model: self.model_id.clone(),
                message,
            })
        };
        if self.model_id.is_empty() {
            return fail("empty model_id".into());
        }
        let b = &self.difficulty_offsets;
        if [b.easy, b.medium, b.hard, self.theta]
            .iter()
            .any(|v| !v.is_finite())
        {
            return fail("theta and difficulty offsets must be finite".into());
        }
        if !(b.easy < b.medium && b.medium < b.hard) {
            return fail(format!(
                "difficulty offsets must be strictly increasing, got ({}, {}, {})",
                b.easy, b.medium, b.hard
            ));
        }
        if let Some((cell, _)) = self.cell_offsets.iter().find(|(_, v)| !v.is_finite()) {
            return fail(format!("cell offset for {cell} is not finite"));
        }
        if !(0.0..=1.0).contains(&self.confidence_jitter) {
            return fail(format!(
                "confidence_jitter {} outside [0, 1]",
                self.confidence_jitter
            ));
        }
        match self.kind {
            ResponderKind::Constant { p } if !(0.0..=1.0).contains(&p) => {
                fail(format!("probability {p} outside [0, 1]"))
            }
            ResponderKind::Threshold { spread } if !(spread.is_finite() && spread >= 0.0) => {
                fail(format!("spread {spread} must be finite and non-negative"))
            }
            _ => Ok(()),
        }
    }

    fn cell_offset(&self, item: &Item) -> f64 {
        if self.cell_offsets.is_empty() {
            return 0.0;
        }
        let key = format!("{}/{}", item.class, item.attribute);
        self.cell_offsets.get(&key).copied().unwrap_or(0.0)
    }

    /// Success probability for an item (for Threshold, the latent margin
    /// squashed through the logistic, used only for the emitted confidence).
    pub fn probability(&self, latent: f64) -> f64 {
        match self.kind {
            ResponderKind::Irt | ResponderKind::Threshold { .. } => logistic(self.theta - latent),
            ResponderKind::Constant { p } => p,
        }
    }

    fn latent(&self, pool_seed: u64, item: &Item) -> f64 {
        let base = self.difficulty_offsets[item.difficulty] + self.cell_offset(item);
        match self.kind {
            ResponderKind::Threshold { spread } => {
                let mut rng = seeding::stream(
                    pool_seed,
                    &[
                        "threshold",
                        &self.seed.to_string(),
                        &self.model_id,
                        &item.class,
                        &item.attribute,
                        &item.index.to_string(),
                    ],
                );
                base + spread * (2.0 * rng.gen::<f64>() - 1.0)
            }
            _ => base,
        }
    }

    pub fn respond(&self, pool_seed: u64, item: &Item) -> ResponseRecord {
        let latent = self.latent(pool_seed, item);
        let p = self.probability(latent);
        let mut rng = seeding::stream(
            pool_seed,
            &[
                "simulate",
                &self.seed.to_string(),
                &self.model_id,
                &item.item_id,
            ],
        );
        let draw: f64 = rng.gen();
        let jitter: f64 = rng.gen::<f64>() * 2.0 - 1.0;
        let correct = match self.kind {
            ResponderKind::Threshold { .. } => self.theta >= latent,
            _ => draw < p,
        };
        ResponseRecord {
            model: self.model_id.clone(),
            item_id: item.item_id.clone(),
            correct,
            confidence: Some((p + self.confidence_jitter * jitter).clamp(0.0, 1.0)),
            predicted_class: None,
        }
    }
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub seed: u64,
    pub responders: Vec<ResponderSpec>,
    /// Optional manifest path, used by the command line when none is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
}

impl PoolSpec {
    /// `n` Irt responders `m00, m01, ...` with θ evenly spaced over `[lo, hi]`.
    pub fn irt_spread(n: usize, lo: f64, hi: f64, seed: u64) -> Self {
        let responders = (0..n)
            .map(|i| {
                let t = if n > 1 {
                    i as f64 / (n - 1) as f64
                } else {
                    0.5
                };
                ResponderSpec::irt(format!("m{i:02}"), lo + t * (hi - lo), i as u64)
            })
            .collect();
        PoolSpec {
            seed,
            responders,
            manifest: None,
        }
    }

    pub fn from_json(json: &str) -> Result<Self, SimError> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self, manifest: Option<&Manifest>) -> Result<(), SimError> {
        let mut seen = HashSet::new();
        for r in &self.responders {
            r.validate()?;
            if !seen.insert(r.model_id.as_str()) {
                return Err(SimError::DuplicateModel(r.model_id.clone()));
            }
            if let Some(m) = manifest {
                let cells: HashSet<String> = m.cells().map(|c| c.to_string()).collect();
                if let Some(key) = r.cell_offsets.keys().find(|k| !cells.contains(*k)) {
                    return Err(SimError::UnknownCell {
                        model: r.model_id.clone(),
                        cell: key.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Response records for every responder over every manifest item, grouped by
/// responder in pool order and by item in manifest order.
pub fn simulate(pool: &PoolSpec, manifest: &Manifest) -> Result<Vec<ResponseRecord>, SimError> {
    pool.validate(Some(manifest))?;
    Ok(pool
        .responders
        .iter()
        .flat_map(|r| {
            manifest
                .items()
                .iter()
                .map(move |i| r.respond(pool.seed, i))
        })
        .collect())
}

pub fn simulate_matrices(
    pool: &PoolSpec,
    manifest: &Manifest,
) -> Result<BTreeMap<String, ResponseMatrix>, SimError> {
    Ok(responses::ingest(manifest, simulate(pool, manifest)?)?)
}

/// Full (all-items) evaluation for each responder, in pool order.
pub fn reference_full_eval(
    pool: &PoolSpec,
    manifest: &Manifest,
) -> Result<Vec<EvaluationReport>, SimError> {
    let matrices = simulate_matrices(pool, manifest)?;
    pool.responders
        .iter()
        .map(|r| Ok(evalkit::full_eval(&matrices[&r.model_id], manifest)?))
        .collect()
}

/// Expected accuracy of an Irt responder at one difficulty with zero cell offsets.
pub fn irt_expected_accuracy(spec: &ResponderSpec, difficulty: Difficulty) -> f64 {
    logistic(spec.theta - spec.difficulty_offsets[difficulty])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_manifest, AttributeDescriptor, TemplateTable};
    use crate::hls::{build_triplets, hls_report, Pairing};

    fn manifest(classes: usize, attrs: usize, per_cell: u32) -> Manifest {
        let attrs: Vec<_> = (0..attrs)
            .map(|i| AttributeDescriptor {
                name: format!("a{i}"),
                descriptors: PerDifficulty::new("e".into(), "m".into(), "h".into()),
            })
            .collect();
        let t = TemplateTable::uniform("{class}", &attrs);
        let classes: Vec<String> = (0..classes).map(|i| format!("c{i}")).collect();
        build_manifest(&classes, &attrs, per_cell, &t).unwrap()
    }

    fn pool(responders: Vec<ResponderSpec>, seed: u64) -> PoolSpec {
        PoolSpec {
            seed,
            responders,
            manifest: None,
        }
    }

    #[test]
    fn constant_one_is_all_correct() {
        let m = manifest(3, 2, 4);
        let r =
            reference_full_eval(&pool(vec![ResponderSpec::constant("c", 1.0, 0)], 1), &m).unwrap();
        assert_eq!(r[0].global_accuracy, 100.0);
    }

    #[test]
    fn constant_half_within_binomial_bounds() {
        let m = manifest(20, 10, 12);
        let n = m.len() as f64;
        let r =
            reference_full_eval(&pool(vec![ResponderSpec::constant("c", 0.5, 0)], 4), &m).unwrap();
        let sigma = 100.0 * (0.25 / n).sqrt();
        assert!(
            (r[0].global_accuracy - 50.0).abs() < 3.0 * sigma,
            "{}",
            r[0].global_accuracy
        );
    }

    #[test]
    fn threshold_extremes_and_hls() {
        let m = manifest(4, 3, 6);
        let triplets = build_triplets(&m, Pairing::ByIndex);
        let p = pool(
            vec![
                ResponderSpec::threshold("top", 1e9, 0),
                ResponderSpec::threshold("mid", 0.1, 1),
            ],
            3,
        );
        let mats = simulate_matrices(&p, &m).unwrap();
        assert!(mats["top"].entries.values().all(|r| r.correct));
        for mx in mats.values() {
            assert_eq!(hls_report(&triplets, mx).unwrap().hls, 100.0);
        }
    }

    #[test]
    fn streams_do_not_depend_on_pool_composition() {
        let m = manifest(2, 2, 3);
        let a = ResponderSpec::irt("a", 0.3, 5);
        let alone = simulate(&pool(vec![a.clone()], 9), &m).unwrap();
        let with_other = simulate(&pool(vec![ResponderSpec::irt("b", 1.0, 6), a], 9), &m).unwrap();
        assert_eq!(alone[..], with_other[m.len()..]);
    }

    #[test]
    fn invalid_specs() {
        let mut s = ResponderSpec::irt("x", 0.0, 0);
        s.difficulty_offsets = PerDifficulty::new(0.0, 0.0, 1.0);
        assert!(s.validate().is_err());
        assert!(ResponderSpec::constant("x", 1.5, 0).validate().is_err());
        let dup = pool(
            vec![
                ResponderSpec::irt("x", 0.0, 0),
                ResponderSpec::irt("x", 1.0, 1),
            ],
            0,
        );
        assert!(matches!(
            dup.validate(None),
            Err(SimError::DuplicateModel(_))
        ));
        let mut off = ResponderSpec::irt("y", 0.0, 0);
        off.cell_offsets.insert("nosuch/a0".into(), 1.0);
        assert!(matches!(
            pool(vec![off], 0).validate(Some(&manifest(1, 1, 1))),
            Err(SimError::UnknownCell { .. })
        ));
    }

    #[test]
    fn pool_json_defaults() {
        let p = PoolSpec::from_json(
            r#"{"seed": 3, "responders": [{"model_id": "m", "kind": {"type": "irt"}, "theta": 0.5}]}"#,
        )
        .unwrap();
        let r = &p.responders[0];
        assert_eq!(r.difficulty_offsets, PerDifficulty::new(-1.0, 0.0, 1.0));
        assert_eq!(r.confidence_jitter, 0.05);
        let back = PoolSpec::from_json(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn higher_theta_dominates_over_seeds() {
        let m = manifest(5, 4, 12);
        let mut wins = 0;
        for seed in 0..20 {
            let p = pool(
                vec![
                    ResponderSpec::irt("hi", 1.0, 1),
                    ResponderSpec::irt("lo", 0.0, 2),
                ],
                seed,
            );
            let r = reference_full_eval(&p, &m).unwrap();
            if r[0].global_accuracy >= r[1].global_accuracy {
                wins += 1;
            }
        }
        assert!(wins >= 19, "{wins}");
    }

    #[test]
    fn irt_accuracy_falls_with_difficulty() {
        let m = manifest(20, 10, 12);
        let spec = ResponderSpec::irt("m", 0.5, 0);
        let mx = &simulate_matrices(&pool(vec![spec.clone()], 11), &m).unwrap()["m"];
        let acc = |d: Difficulty| {
            let items: Vec<_> = m.items().iter().filter(|i| i.difficulty == d).collect();
            items
                .iter()
                .filter(|i| mx.is_correct(&i.item_id) == Some(true))
                .count() as f64
                / items.len() as f64
        };
        let (e, md, h) = (
            acc(Difficulty::Easy),
            acc(Difficulty::Medium),
            acc(Difficulty::Hard),
        );
        assert!(e > md && md > h, "{e} {md} {h}");
        // 800 items per level: expected values within 4 standard errors
        for (d, a) in [
            (Difficulty::Easy, e),
            (Difficulty::Medium, md),
            (Difficulty::Hard, h),
        ] {
            let p = irt_expected_accuracy(&spec, d);
            assert!(
                (a - p).abs() < 4.0 * (p * (1.0 - p) / 800.0).sqrt(),
                "{d}: {a} vs {p}"
            );
        }
    }
}
