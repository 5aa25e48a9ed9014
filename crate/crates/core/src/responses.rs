//! Per-model response matrices and confidence histograms.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Difficulty, Manifest};

#[derive(Debug, Error)]
pub enum ResponseError {
    #[error("record {position}: unknown item_id {item_id:?}")]
    UnknownItem { position: usize, item_id: String },
    #[error("record {position}: duplicate response for model {model:?}, item {item_id:?}")]
    Duplicate {
        position: usize,
        model: String,
        item_id: String,
    },
    #[error("record {position}: confidence {value} outside [0, 1]")]
    ConfidenceOutOfRange { position: usize, value: f64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no {difficulty} items carry a confidence value ({excluded} excluded)")]
    EmptyHistogram {
        difficulty: Difficulty,
        excluded: usize,
    },
    #[error("bins must be at least 1")]
    ZeroBins,
    #[error("cannot average zero histograms")]
    NothingToAverage,
    #[error("histograms disagree on {0}")]
    Mismatch(&'static str),
    #[error("matrix was built against manifest {found}, expected {expected}")]
    ManifestMismatch { expected: String, found: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// One line of a response log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub model: String,
    pub item_id: String,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_class: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_class: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseMatrix {
    pub model_id: String,
    /// Identity hash of the manifest the entries were validated against.
    pub manifest_ref: String,
    pub complete: bool,
    pub entries: BTreeMap<String, Response>,
}

impl ResponseMatrix {
    pub fn get(&self, item_id: &str) -> Option<&Response> {
        self.entries.get(item_id)
    }

    pub fn is_correct(&self, item_id: &str) -> Option<bool> {
        self.entries.get(item_id).map(|r| r.correct)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Errors when the matrix was ingested against a different manifest.
    pub fn check_manifest(&self, manifest: &Manifest) -> Result<(), ResponseError> {
        let expected = manifest.identity_hash();
        if self.manifest_ref != expected {
            return Err(ResponseError::ManifestMismatch {
                expected,
                found: self.manifest_ref.clone(),
            });
        }
        Ok(())
    }
}

/// Groups records by model, validating every item against the manifest.
pub fn ingest(
    manifest: &Manifest,
    records: impl IntoIterator<Item = ResponseRecord>,
) -> Result<BTreeMap<String, ResponseMatrix>, ResponseError> {
    let manifest_ref = manifest.identity_hash();
    let mut out: BTreeMap<String, ResponseMatrix> = BTreeMap::new();
    for (position, rec) in records.into_iter().enumerate() {
        let position = position + 1;
        if !manifest.contains(&rec.item_id) {
            return Err(ResponseError::UnknownItem {
                position,
                item_id: rec.item_id,
            });
        }
        if let Some(c) = rec.confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(ResponseError::ConfidenceOutOfRange { position, value: c });
            }
        }
        let matrix = out
            .entry(rec.model.clone())
            .or_insert_with(|| ResponseMatrix {
                model_id: rec.model.clone(),
                manifest_ref: manifest_ref.clone(),
                complete: false,
                entries: BTreeMap::new(),
            });
        if matrix.entries.contains_key(&rec.item_id) {
            return Err(ResponseError::Duplicate {
                position,
                model: rec.model,
                item_id: rec.item_id,
            });
        }
        matrix.entries.insert(
            rec.item_id,
            Response {
                correct: rec.correct,
                confidence: rec.confidence,
                predicted_class: rec.predicted_class,
            },
        );
    }
    for m in out.values_mut() {
        m.complete = m.entries.len() == manifest.len();
    }
    Ok(out)
}

pub fn parse_response_log(reader: impl BufRead) -> Result<Vec<ResponseRecord>, ResponseError> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| ResponseError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok(records)
}

pub fn read_response_log(path: &Path) -> Result<Vec<ResponseRecord>, ResponseError> {
    parse_response_log(BufReader::new(File::open(path)?))
}

pub fn write_response_log(records: &[ResponseRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceHistogram {
    pub difficulty: Difficulty,
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub fraction: Vec<f64>,
    pub excluded_missing_confidence: usize,
}

fn edges(bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| i as f64 / bins as f64).collect()
}

/// Bin index on `bins` equal-width bins over [0, 1], left-closed with the last
/// bin also closed on the right.
pub fn bin_of(value: f64, edges: &[f64]) -> usize {
    let bins = edges.len() - 1;
    let mut b = ((value * bins as f64).floor() as usize).min(bins - 1);
    // floor() can land one off the edge table for values near a boundary
    while b > 0 && value < edges[b] {
        b -= 1;
    }
    while b + 1 < bins && value >= edges[b + 1] {
        b += 1;
    }
    b
}

/// Distribution of confidence values over items of one difficulty.
pub fn confidence_histogram(
    matrix: &ResponseMatrix,
    manifest: &Manifest,
    difficulty: Difficulty,
    bins: usize,
) -> Result<ConfidenceHistogram, ResponseError> {
    if bins == 0 {
        return Err(ResponseError::ZeroBins);
    }
    let bin_edges = edges(bins);
    let mut counts = vec![0u64; bins];
    let mut excluded = 0usize;
    for item in manifest
        .items()
        .iter()
        .filter(|i| i.difficulty == difficulty)
    {
        match matrix.get(&item.item_id) {
            Some(Response {
                confidence: Some(c),
                ..
            }) => counts[bin_of(*c, &bin_edges)] += 1,
            Some(_) => excluded += 1,
            None => {}
        }
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(ResponseError::EmptyHistogram {
            difficulty,
            excluded,
        });
    }
    let fraction = counts.iter().map(|&c| c as f64 / total as f64).collect();
    Ok(ConfidenceHistogram {
        difficulty,
        bin_edges,
        counts,
        fraction,
        excluded_missing_confidence: excluded,
    })
}

/// Per-bin mean of fractions, renormalized. Counts and exclusions are summed.
pub fn average_histograms(
    histograms: &[ConfidenceHistogram],
) -> Result<ConfidenceHistogram, ResponseError> {
    let first = histograms.first().ok_or(ResponseError::NothingToAverage)?;
    for h in &histograms[1..] {
        if h.bin_edges != first.bin_edges {
            return Err(ResponseError::Mismatch("bin_edges"));
        }
        if h.difficulty != first.difficulty {
            return Err(ResponseError::Mismatch("difficulty"));
        }
    }
    let bins = first.counts.len();
    let mut fraction = vec![0.0; bins];
    let mut counts = vec![0u64; bins];
    let mut excluded = 0;
    for h in histograms {
        for b in 0..bins {
            fraction[b] += h.fraction[b] / histograms.len() as f64;
            counts[b] += h.counts[b];
        }
        excluded += h.excluded_missing_confidence;
    }
    let sum: f64 = fraction.iter().sum();
    if sum > 0.0 {
        fraction.iter_mut().for_each(|f| *f /= sum);
    }
    Ok(ConfidenceHistogram {
        difficulty: first.difficulty,
        bin_edges: first.bin_edges.clone(),
        counts,
        fraction,
        excluded_missing_confidence: excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_manifest, AttributeDescriptor, PerDifficulty, TemplateTable};

    fn manifest(classes: usize, per_cell: u32) -> Manifest {
        let attrs = vec![AttributeDescriptor {
            name: "size".into(),
            descriptors: PerDifficulty::new("big".into(), "small".into(), "tiny".into()),
        }];
        let t = TemplateTable::uniform("{class}", &attrs);
        let classes: Vec<String> = (0..classes).map(|i| format!("c{i}")).collect();
        build_manifest(&classes, &attrs, per_cell, &t).unwrap()
    }

    fn rec(model: &str, item: &str, correct: bool, conf: Option<f64>) -> ResponseRecord {
        ResponseRecord {
            model: model.into(),
            item_id: item.into(),
            correct,
            confidence: conf,
            predicted_class: None,
        }
    }

    #[test]
    fn complete_matrix_from_full_log() {
        let m = manifest(3, 4);
        assert_eq!(m.len(), 36);
        let recs: Vec<_> = m
            .items()
            .iter()
            .map(|i| rec("a", &i.item_id, true, None))
            .collect();
        let out = ingest(&m, recs).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out["a"].complete);
        assert_eq!(out["a"].len(), 36);
    }

    #[test]
    fn ingest_errors() {
        let m = manifest(1, 1);
        let id = m.items()[0].item_id.clone();
        let err = ingest(&m, vec![rec("a", &id, true, Some(1.2))]).unwrap_err();
        assert!(matches!(
            err,
            ResponseError::ConfidenceOutOfRange { position: 1, .. }
        ));
        let err = ingest(
            &m,
            vec![rec("a", &id, true, None), rec("a", &id, false, None)],
        )
        .unwrap_err();
        assert!(matches!(err, ResponseError::Duplicate { position: 2, .. }));
        let err = ingest(&m, vec![rec("a", "nope", true, None)]).unwrap_err();
        assert!(matches!(
            err,
            ResponseError::UnknownItem { position: 1, .. }
        ));
        let err = ingest(&m, vec![rec("a", &id, true, Some(f64::NAN))]).unwrap_err();
        assert!(matches!(err, ResponseError::ConfidenceOutOfRange { .. }));
        // the same item for two models is fine
        let out = ingest(
            &m,
            vec![rec("a", &id, true, None), rec("b", &id, false, None)],
        )
        .unwrap();
        assert_eq!(out.len(), 2);
        assert!(!out["a"].complete);
    }

    fn matrix_with(m: &Manifest, confs: &[Option<f64>]) -> ResponseMatrix {
        let easy: Vec<_> = m
            .items()
            .iter()
            .filter(|i| i.difficulty == Difficulty::Easy)
            .collect();
        let recs = easy
            .iter()
            .zip(confs)
            .map(|(i, c)| rec("a", &i.item_id, true, *c));
        ingest(m, recs).unwrap().remove("a").unwrap()
    }

    #[test]
    fn histogram_all_ones_lands_in_last_bin() {
        let m = manifest(1, 3);
        let mx = matrix_with(&m, &[Some(1.0), Some(1.0), Some(1.0)]);
        let h = confidence_histogram(&mx, &m, Difficulty::Easy, 10).unwrap();
        assert_eq!(h.counts[9], 3);
        assert_eq!(h.counts.iter().sum::<u64>(), 3);
        assert_eq!(h.fraction[9], 1.0);
    }

    #[test]
    fn histogram_hand_binning() {
        let m = manifest(1, 3);
        let mx = matrix_with(&m, &[Some(0.05), Some(0.55), None]);
        let h = confidence_histogram(&mx, &m, Difficulty::Easy, 10).unwrap();
        let mut expected = vec![0u64; 10];
        expected[0] = 1;
        expected[5] = 1;
        assert_eq!(h.counts, expected);
        assert_eq!(h.excluded_missing_confidence, 1);
        assert!((h.fraction.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn histogram_without_confidence_signals_empty() {
        let m = manifest(1, 2);
        let mx = matrix_with(&m, &[None, None]);
        let err = confidence_histogram(&mx, &m, Difficulty::Easy, 10).unwrap_err();
        assert!(matches!(
            err,
            ResponseError::EmptyHistogram { excluded: 2, .. }
        ));
    }

    #[test]
    fn bin_boundaries() {
        let e = edges(10);
        assert_eq!(bin_of(0.0, &e), 0);
        assert_eq!(bin_of(0.1, &e), 1);
        assert_eq!(bin_of(0.3, &e), 3);
        assert_eq!(bin_of(0.7, &e), 7);
        assert_eq!(bin_of(0.9999, &e), 9);
        assert_eq!(bin_of(1.0, &e), 9);
    }

    fn hist(fraction: Vec<f64>, counts: Vec<u64>) -> ConfidenceHistogram {
        ConfidenceHistogram {
            difficulty: Difficulty::Hard,
            bin_edges: edges(fraction.len()),
            counts,
            fraction,
            excluded_missing_confidence: 0,
        }
    }

    #[test]
    fn averaging() {
        let a = hist(vec![1.0, 0.0], vec![4, 0]);
        let b = hist(vec![0.0, 1.0], vec![0, 2]);
        assert_eq!(average_histograms(std::slice::from_ref(&a)).unwrap(), a);
        let avg = average_histograms(&[a.clone(), b]).unwrap();
        assert_eq!(avg.fraction, vec![0.5, 0.5]);
        assert_eq!(avg.counts, vec![4, 2]);
        let c = hist(vec![0.2, 0.3, 0.5], vec![1, 1, 1]);
        assert!(matches!(
            average_histograms(&[a, c]),
            Err(ResponseError::Mismatch("bin_edges"))
        ));
        assert!(matches!(
            average_histograms(&[]),
            Err(ResponseError::NothingToAverage)
        ));
    }
}
