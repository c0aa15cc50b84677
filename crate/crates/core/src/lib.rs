//! gatescope-core: numerics for training and dissecting small LSTM language models.
//!
//! The crate is organized around a pipeline:
//!
//! - [`math`] — dense vectors/matrices, activations, and a seeded PRNG
//! - [`lm`] — a one-layer LSTM language model with deterministic SGD/BPTT
//!   training, checkpoint persistence, and a gradient-magnitude probe
//! - [`cd`] — contextual decomposition: splitting hidden states and logits
//!   into contributions of a chosen set of input positions vs. everything else
//! - [`interdep`] — a normalized measure of nonlinear interaction between two
//!   disjoint word sets, plus batch sweeps over word pairs
//! - [`synth`] — deterministic generators for long-range-rule corpora
//!   (open symbol, conduit, close symbol) in familiar/unfamiliar settings
//! - [`ud`] — CoNLL-U ingestion, dependency-tree distances, POS classes, and
//!   stratified aggregation tables

pub mod cd;
pub mod interdep;
pub mod lm;
pub mod math;
pub mod synth;
pub mod ud;

pub use math::{Mat64, Rng, Vec64};
