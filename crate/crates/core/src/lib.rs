//! Evolutionary neural architecture search over discrete layered spaces.
//!
//! The crate is organized bottom-up:
//!
//! * [`space`]: search-space description, genomes and their mixed-radix ids.
//! * [`cost`]: per-layer FLOPs tables and the complexity bound.
//! * [`diversity`]: network similarity, average population similarity and the
//!   similarity-directed population initializer.
//! * [`fitness`]: evaluator oracles, MMD estimators and summary statistics.
//! * [`evolve`]: constrained evolutionary search and the random-search baseline.
//! * [`harness`]: JSON experiment configs, multi-seed studies and reports.
//!
//! All randomness flows through [`SeededRng`], a portable ChaCha stream, so a
//! trial is reproducible bit-for-bit from its seed.

pub mod cost;
pub mod diversity;
pub mod error;
pub mod evolve;
pub mod fitness;
pub mod harness;
pub mod space;

pub use cost::CostTable;
pub use diversity::{NsdiConfig, NsdiStats, Population};
pub use error::{NasError, Result};
pub use evolve::{CrossoverKind, EaConfig, InitMethod, TrialRecord};
pub use fitness::{Evaluator, FitnessReport};
pub use space::{ArchGenome, SearchSpaceSpec};

use rand::SeedableRng;

/// The random source used by every seeded operation.
pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Builds the per-trial random source for `seed`.
pub fn seeded_rng(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

/// Upper bound on samples drawn by any rejection loop before giving up.
pub const MAX_REJECTION_SAMPLES: u64 = 10_000_000;
