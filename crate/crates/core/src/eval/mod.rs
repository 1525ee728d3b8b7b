//! Metrics, synthetic benchmarks and ablation runners.

pub mod ablation;
pub mod judge;
pub mod metrics;
pub mod synth;

pub use ablation::{run_suite, AblationSuite, EvalError, EvalReport, RecommendVariant, RetrievalVariant};
pub use synth::{synth_generate, Dataset, SynthParams};
