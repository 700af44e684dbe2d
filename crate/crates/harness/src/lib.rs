//! Instance generators, seeded experiment orchestration and lemma suites
//! built on `prophetlab-core`.

pub mod experiment;
pub mod generate;
pub mod seeds;
pub mod suite;

pub use experiment::{run_experiment, ExperimentConfig, Mode, OrderPolicy, RunSummary};
pub use generate::{generate_instance, GeneratedInstance, GeneratorSpec};
pub use seeds::{config_hash, thread_pool, trial_seed};
pub use suite::{run_lemma_suite, Lemma};
