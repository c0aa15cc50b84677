//! Experiment presets over gatescope-core: synthetic long-range-rule
//! replications, the rule-frequency grid, the gradient probe, and the
//! English dependency-syntax pipeline, plus CSV/JSON emission for plotting.

pub mod engen;
pub mod plan;
pub mod presets;
pub mod series;
pub mod stats;
