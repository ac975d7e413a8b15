//! Monte-Carlo scenarios, the replication engine, and table rendering.

mod engine;
mod output;
mod scenario;

pub use engine::{
    generate_sample, run_replicates, run_scenario, run_scenario_with_progress, summarize,
    MetricsRow, ReplicateSet, Sample,
};
pub use output::{emit_table, emit_table_with_notes, format_sig, OutputFormat, TableDocument, TableMetadata, CI_METHOD};
pub use scenario::{
    builtin_scenario, builtin_scenarios, coefficient_name, population_ols_slopes, Contamination,
    ErrorLaw, HeteroMultiplier, HeteroRule, NoiseShape, RegressorLaw, ScenarioConfig,
};
