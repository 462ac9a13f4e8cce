//! Dataset ingestion, missing-data scenarios, constraint generation and the
//! experiment runner.

mod experiment;
mod generate;
mod ingest;
mod scenario;

pub use experiment::{
    generate_queries, run_experiment, run_on, Baseline, BaselineMetrics, DatasetConfig, ExperimentConfig, ExperimentOutput, MetricsReport,
    PcConfig, QueryConfig, QueryRecord, ScenarioConfig,
};
pub use generate::{gen_corr_pc, gen_rand_pc, inject_noise};
pub use ingest::{ingest_csv, ingest_reader, IngestMode, Ingested, SkippedRow};
pub use scenario::{make_scenario, synthetic_dataset, synthetic_schema, RemovalMode, Scenario, SYNTHETIC_END, SYNTHETIC_START};
