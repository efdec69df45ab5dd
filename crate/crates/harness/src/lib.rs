//! Scenario runner for rule programs: event traces in, JSON-lines records
//! out, plus multi-layer perceptrons compiled to rules.

pub mod mlp;
pub mod rational;
pub mod record;
pub mod scenario;
pub mod trace;

pub use mlp::{gen_mlp_program, Activation, Calculator, MlpError, MlpSpec, Neuron};
pub use record::{Header, Record, RecordFile, RunConfig};
pub use scenario::{
    engine_config, load_init, load_mlp, load_program, replay, run_scenario, step_after, HarnessError, RunResult,
    Scenario, ScenarioSources,
};
pub use trace::{load_trace, parse_trace, TraceError};
