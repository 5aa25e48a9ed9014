//! Two-round adaptive test over one (class, attribute) cell.
//!
//! Round one asks a fixed difficulty mix. Its points (easy/medium/hard weights,
//! nothing for a miss) select the round-two mix from the preset's mapping
//! table. Items are never reused within a session.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Cell, Difficulty, Item, Manifest, PerDifficulty};
use crate::responses::ResponseMatrix;
use crate::seeding;

#[derive(Debug, Error)]
pub enum PresetError {
    #[error("unknown preset {name:?}; valid presets: {}", valid.join(", "))]
    Unknown { name: String, valid: Vec<String> },
    #[error("preset {0}: mapping table is empty")]
    EmptyMapping(String),
    #[error("preset {preset}: {message}")]
    Invalid { preset: String, message: String },
    #[error("preset file: {0}")]
    Parse(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum AdaptiveError {
    #[error("cell {cell}: needs {needed} {difficulty} items, manifest has {available}")]
    InsufficientItems {
        cell: Cell,
        difficulty: Difficulty,
        needed: u32,
        available: u32,
    },
    #[error("cell {0} is not in the manifest")]
    UnknownCell(Cell),
    #[error("no response for item {0}")]
    MissingResponse(String),
    #[error("session for {cell}: {message}")]
    Protocol { cell: Cell, message: String },
    #[error("repeats must be at least 1")]
    ZeroRepeats,
}

/// Round-two mix for round-one scores in `min..=max`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingRow {
    pub min: u32,
    pub max: u32,
    #[serde(flatten)]
    pub round2: PerDifficulty<u32>,
}

impl MappingRow {
    pub const fn new(min: u32, max: u32, easy: u32, medium: u32, hard: u32) -> Self {
        MappingRow {
            min,
            max,
            round2: PerDifficulty::new(easy, medium, hard),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolPreset {
    pub name: String,
    pub round1: PerDifficulty<u32>,
    #[serde(default = "default_points")]
    pub points: PerDifficulty<u32>,
    pub mapping: Vec<MappingRow>,
    /// Provenance remark carried into every report that uses the preset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub const DEFAULT_POINTS: PerDifficulty<u32> = PerDifficulty::new(1, 2, 4);

fn default_points() -> PerDifficulty<u32> {
    DEFAULT_POINTS
}

pub const BUILTIN_PRESETS: [&str; 2] = ["ours_old", "ours_new"];

impl ProtocolPreset {
    /// Round one (1, 2, 1), five round-two items. Only the score-7 row is
    /// anchored; the other rows are a monotone default completion.
    pub fn ours_old() -> Self {
        ProtocolPreset {
            name: "ours_old".into(),
            round1: PerDifficulty::new(1, 2, 1),
            points: DEFAULT_POINTS,
            mapping: vec![
                MappingRow::new(0, 0, 4, 1, 0),
                MappingRow::new(1, 2, 3, 2, 0),
                MappingRow::new(3, 4, 2, 2, 1),
                MappingRow::new(5, 6, 1, 3, 1),
                MappingRow::new(7, 8, 0, 2, 3),
                MappingRow::new(9, 9, 0, 1, 4),
            ],
            note: Some(
                "mapping rows other than score 7 -> (0,2,3) are a default monotone completion"
                    .into(),
            ),
        }
    }

    /// Round one (1, 3, 1), four round-two items, fully specified table.
    pub fn ours_new() -> Self {
        ProtocolPreset {
            name: "ours_new".into(),
            round1: PerDifficulty::new(1, 3, 1),
            points: DEFAULT_POINTS,
            mapping: vec![
                MappingRow::new(0, 0, 4, 0, 0),
                MappingRow::new(1, 3, 3, 1, 0),
                MappingRow::new(4, 6, 1, 2, 1),
                MappingRow::new(7, 10, 0, 1, 3),
                MappingRow::new(11, 11, 0, 0, 4),
            ],
            note: None,
        }
    }

    pub fn builtin(name: &str) -> Result<Self, PresetError> {
        match name {
            "ours_old" => Ok(Self::ours_old()),
            "ours_new" => Ok(Self::ours_new()),
            _ => Err(PresetError::Unknown {
                name: name.to_string(),
                valid: BUILTIN_PRESETS.iter().map(|s| s.to_string()).collect(),
            }),
        }
    }

    pub fn from_json(json: &str) -> Result<Self, PresetError> {
        let preset: ProtocolPreset =
            serde_json::from_str(json).map_err(|e| PresetError::Parse(e.to_string()))?;
        preset.validate()?;
        Ok(preset)
    }

    /// A built-in name, or otherwise a path to a preset file.
    pub fn resolve(name_or_path: &str) -> Result<Self, PresetError> {
        match Self::builtin(name_or_path) {
            Ok(p) => Ok(p),
            Err(unknown) => {
                let path = Path::new(name_or_path);
                if path.is_file() {
                    Self::from_json(&fs::read_to_string(path)?)
                } else {
                    Err(unknown)
                }
            }
        }
    }

    pub fn max_round1_score(&self) -> u32 {
        self.round1.dot(&self.points)
    }

    pub fn round2_size(&self) -> u32 {
        self.mapping.first().map_or(0, |r| r.round2.total())
    }

    pub fn total_questions(&self) -> u32 {
        self.round1.total() + self.round2_size()
    }

    /// Most items a session can draw per difficulty.
    pub fn demand(&self) -> PerDifficulty<u32> {
        PerDifficulty::from_fn(|d| {
            self.round1[d] + self.mapping.iter().map(|r| r.round2[d]).max().unwrap_or(0)
        })
    }

    pub fn round2_for(&self, score: u32) -> Option<PerDifficulty<u32>> {
        self.mapping
            .iter()
            .find(|r| r.min <= score && score <= r.max)
            .map(|r| r.round2)
    }

    pub fn validate(&self) -> Result<(), PresetError> {
        let invalid = |message: String| PresetError::Invalid {
            preset: self.name.clone(),
            message,
        };
        if self.round1.total() == 0 {
            return Err(invalid("round 1 asks no items".into()));
        }
        for (d, &p) in self.points.iter() {
            if p == 0 {
                return Err(invalid(format!("{d} points must be positive")));
            }
        }
        let first = self
            .mapping
            .first()
            .ok_or_else(|| PresetError::EmptyMapping(self.name.clone()))?;
        if first.min != 0 {
            return Err(invalid(format!(
                "score range gap: 0..{} unmapped",
                first.min
            )));
        }
        let size = first.round2.total();
        let mut prev: Option<&MappingRow> = None;
        for row in &self.mapping {
            if row.min > row.max {
                return Err(invalid(format!("row [{}, {}] is empty", row.min, row.max)));
            }
            if row.round2.total() != size {
                return Err(invalid(format!(
                    "row [{}, {}] asks {} round-2 items, expected {}",
                    row.min,
                    row.max,
                    row.round2.total(),
                    size
                )));
            }
            if let Some(p) = prev {
                if row.min <= p.max {
                    return Err(invalid(format!(
                        "score ranges [{}, {}] and [{}, {}] overlap",
                        p.min, p.max, row.min, row.max
                    )));
                }
                if row.min > p.max + 1 {
                    return Err(invalid(format!(
                        "score range gap between {} and {}",
                        p.max, row.min
                    )));
                }
                if row.round2.hard < p.round2.hard {
                    return Err(invalid(format!(
                        "non-monotone mapping: row [{}, {}] asks fewer hard items than the row below it",
                        row.min, row.max
                    )));
                }
            }
            prev = Some(row);
        }
        let last = prev.expect("non-empty");
        let max = self.max_round1_score();
        if last.max != max {
            return Err(invalid(format!(
                "score ranges end at {} but the maximum round-1 score is {}",
                last.max, max
            )));
        }
        Ok(())
    }
}

/// One answered question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Answer {
    pub item_id: String,
    pub difficulty: Difficulty,
    pub correct: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Round1,
    Round2,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionResult {
    pub cell: Cell,
    pub asked: PerDifficulty<u32>,
    pub correct: PerDifficulty<u32>,
    pub points: u32,
    pub max_points: u32,
    pub round1_points: u32,
    pub round2: PerDifficulty<u32>,
    /// Round-one items first, then round-two items.
    pub asked_items: Vec<String>,
}

/// State machine for one session. Callers ask for the current round's mix with
/// [`AdaptiveSession::plan`] and hand back the answers with
/// [`AdaptiveSession::submit`].
#[derive(Debug, Clone)]
pub struct AdaptiveSession<'p> {
    preset: &'p ProtocolPreset,
    cell: Cell,
    stage: Stage,
    round1_points: u32,
    round2: PerDifficulty<u32>,
    asked: PerDifficulty<u32>,
    correct: PerDifficulty<u32>,
    points: u32,
    asked_items: Vec<String>,
    seen: HashSet<String>,
}

impl<'p> AdaptiveSession<'p> {
    pub fn new(preset: &'p ProtocolPreset, cell: Cell) -> Self {
        AdaptiveSession {
            preset,
            cell,
            stage: Stage::Round1,
            round1_points: 0,
            round2: PerDifficulty::default(),
            asked: PerDifficulty::default(),
            correct: PerDifficulty::default(),
            points: 0,
            asked_items: Vec::new(),
            seen: HashSet::new(),
        }
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn plan(&self) -> Option<PerDifficulty<u32>> {
        match self.stage {
            Stage::Round1 => Some(self.preset.round1),
            Stage::Round2 => Some(self.round2),
            Stage::Finished => None,
        }
    }

    pub fn is_used(&self, item_id: &str) -> bool {
        self.seen.contains(item_id)
    }

    fn protocol(&self, message: String) -> AdaptiveError {
        AdaptiveError::Protocol {
            cell: self.cell.clone(),
            message,
        }
    }

    pub fn submit(&mut self, answers: &[Answer]) -> Result<(), AdaptiveError> {
        let plan = self
            .plan()
            .ok_or_else(|| self.protocol("session already finished".into()))?;
        let mut got = PerDifficulty::<u32>::default();
        let mut round_ids = HashSet::new();
        for a in answers {
            got[a.difficulty] += 1;
            if self.seen.contains(&a.item_id) || !round_ids.insert(a.item_id.as_str()) {
                return Err(self.protocol(format!("item {} asked twice", a.item_id)));
            }
        }
        if got != plan {
            return Err(self.protocol(format!(
                "round answered ({}, {}, {}) but planned ({}, {}, {})",
                got.easy, got.medium, got.hard, plan.easy, plan.medium, plan.hard
            )));
        }
        let mut round_points = 0;
        for a in answers {
            self.asked[a.difficulty] += 1;
            if a.correct {
                self.correct[a.difficulty] += 1;
                round_points += self.preset.points[a.difficulty];
            }
            self.seen.insert(a.item_id.clone());
            self.asked_items.push(a.item_id.clone());
        }
        self.points += round_points;
        match self.stage {
            Stage::Round1 => {
                self.round1_points = round_points;
                self.round2 = self.preset.round2_for(round_points).ok_or_else(|| {
                    self.protocol(format!("round-1 score {round_points} is not mapped"))
                })?;
                self.stage = if self.round2.total() == 0 {
                    Stage::Finished
                } else {
                    Stage::Round2
                };
            }
            Stage::Round2 => self.stage = Stage::Finished,
            Stage::Finished => unreachable!(),
        }
        Ok(())
    }

    pub fn finish(self) -> Result<SessionResult, AdaptiveError> {
        if self.stage != Stage::Finished {
            return Err(self.protocol("session is not finished".into()));
        }
        Ok(SessionResult {
            max_points: self.asked.dot(&self.preset.points),
            cell: self.cell,
            asked: self.asked,
            correct: self.correct,
            points: self.points,
            round1_points: self.round1_points,
            round2: self.round2,
            asked_items: self.asked_items,
        })
    }
}

/// Draws `count` unused items of one difficulty uniformly without replacement.
fn draw<'m, R: Rng>(
    pool: &'m [Item],
    session: &AdaptiveSession<'_>,
    count: u32,
    rng: &mut R,
) -> Vec<&'m Item> {
    let unused: Vec<&Item> = pool
        .iter()
        .filter(|i| !session.is_used(&i.item_id))
        .collect();
    index::sample(rng, unused.len(), count as usize)
        .into_iter()
        .map(|i| unused[i])
        .collect()
}

pub fn run_session<R: Rng>(
    cell: &Cell,
    matrix: &ResponseMatrix,
    manifest: &Manifest,
    preset: &ProtocolPreset,
    rng: &mut R,
) -> Result<SessionResult, AdaptiveError> {
    let demand = preset.demand();
    let mut pools: PerDifficulty<&[Item]> = PerDifficulty::default();
    for d in Difficulty::ALL {
        pools[d] = manifest
            .cell_items(cell, d)
            .ok_or_else(|| AdaptiveError::UnknownCell(cell.clone()))?;
        let available = pools[d].len() as u32;
        if available < demand[d] {
            return Err(AdaptiveError::InsufficientItems {
                cell: cell.clone(),
                difficulty: d,
                needed: demand[d],
                available,
            });
        }
    }
    let mut session = AdaptiveSession::new(preset, cell.clone());
    while let Some(plan) = session.plan() {
        let mut answers = Vec::with_capacity(plan.total() as usize);
        for d in Difficulty::ALL {
            for item in draw(pools[d], &session, plan[d], rng) {
                let correct = matrix
                    .is_correct(&item.item_id)
                    .ok_or_else(|| AdaptiveError::MissingResponse(item.item_id.clone()))?;
                answers.push(Answer {
                    item_id: item.item_id.clone(),
                    difficulty: d,
                    correct,
                });
            }
        }
        session.submit(&answers)?;
    }
    session.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveRunResult {
    pub model_id: String,
    pub preset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset_note: Option<String>,
    pub seed: u64,
    pub repeat: u32,
    pub sessions: Vec<SessionResult>,
    /// Mean asked count per difficulty across sessions.
    pub average_asked: PerDifficulty<f64>,
}

/// Stream for one session, keyed by everything that identifies it.
pub fn session_rng(master_seed: u64, repeat: u32, cell: &Cell) -> seeding::StreamRng {
    seeding::stream(
        master_seed,
        &[
            "adaptive",
            &repeat.to_string(),
            &cell.class,
            &cell.attribute,
        ],
    )
}

pub fn run_adaptive(
    matrix: &ResponseMatrix,
    manifest: &Manifest,
    preset: &ProtocolPreset,
    master_seed: u64,
    repeats: u32,
) -> Result<Vec<AdaptiveRunResult>, AdaptiveError> {
    if repeats == 0 {
        return Err(AdaptiveError::ZeroRepeats);
    }
    (0..repeats)
        .map(|repeat| {
            let sessions = manifest
                .cells()
                .map(|cell| {
                    let mut rng = session_rng(master_seed, repeat, &cell);
                    run_session(&cell, matrix, manifest, preset, &mut rng)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let n = sessions.len().max(1) as f64;
            let average_asked = PerDifficulty::from_fn(|d| {
                sessions.iter().map(|s| s.asked[d] as f64).sum::<f64>() / n
            });
            Ok(AdaptiveRunResult {
                model_id: matrix.model_id.clone(),
                preset: preset.name.clone(),
                preset_note: preset.note.clone(),
                seed: master_seed,
                repeat,
                sessions,
                average_asked,
            })
        })
        .collect()
}
