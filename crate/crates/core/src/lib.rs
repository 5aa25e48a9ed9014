//! Evaluation engine for difficulty-graded classification benchmarks.
//!
//! The crate is organised around a balanced benchmark grid (classes x
//! attributes x easy/medium/hard x images per cell) and a per-model
//! [`responses::ResponseMatrix`] of top-1 correctness. Everything else is
//! analytics over those two values:
//!
//! - [`hls`]: easy/medium/hard triplets and the hierarchical-learning score.
//! - [`adaptive`]: the two-round, table-driven adaptive test.
//! - [`evalkit`]: static and adaptive evaluation reports, error metrics and
//!   per-attribute breakdown tables.
//! - [`btm`]: pairwise "which is harder" schedules and Bradley-Terry fitting.
//! - [`simlab`]: synthetic responders used as ground-truth oracles.

pub mod adaptive;
pub mod btm;
pub mod corpus;
pub mod evalkit;
pub mod hls;
pub mod responses;
pub mod seeding;
pub mod simlab;
pub mod stats;

pub use corpus::{Cell, Difficulty, Item, Manifest, PerDifficulty};
pub use responses::{ResponseMatrix, ResponseRecord};
