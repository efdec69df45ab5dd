//! Operational semantics: one macro-step maps a state of affairs, a rule base
//! and the events of one instant to the next state and rule base.
//!
//! A macro-step resets the fired registry, chains if-rules, applies
//! force-rules (which may add events), then applies ECA rules. Every rule's
//! action sequence is applied atomically and rolled back when it brings about
//! a prevented state; each committed sequence is followed by if-rule chaining.

mod builtins;
mod eval;
mod step;

pub use builtins::{Builtin, BuiltinRegistry};
pub use eval::{apply_action, check_prv, holds, ignored, match_events, EvalContext};
pub use step::{macro_step, run, FiredRegistry, RunOutput, StepOutput};

use std::fmt;
use std::time::{SystemTime, UNIX_EPOCH};

use thiserror::Error;

use crate::constraints::ConstraintError;
use crate::kernel::{Atom, KernelError, StateOfAffairs, Substitution};

/// Agent tag given to events produced by force-rules.
pub const INSTITUTION: &str = "institution";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ClockMode {
    /// `time(T)` binds `T` to the 0-based step index.
    #[default]
    Logical,
    /// `time(T)` binds `T` to wall-clock seconds since the Unix epoch.
    /// Not deterministic.
    Injected,
}

impl ClockMode {
    pub fn now(self, step: usize) -> i64 {
        match self {
            ClockMode::Logical => step as i64,
            ClockMode::Injected => {
                SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs() as i64).unwrap_or(0)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct EngineConfig {
    /// If-rule firings allowed per macro-step before giving up.
    pub max_chain_iterations: usize,
    pub clock_mode: ClockMode,
    /// Allows `add(rule(...))` and `del(rule(...))` actions.
    pub istar_enabled: bool,
    pub builtins: BuiltinRegistry,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            max_chain_iterations: 10_000,
            clock_mode: ClockMode::Logical,
            istar_enabled: false,
            builtins: BuiltinRegistry::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("unknown builtin `{0}`")]
    UnknownBuiltin(String),
    #[error("builtin `{name}` called with non-ground input `{arg}`")]
    NonGroundBuiltinInput { name: String, arg: String },
    #[error("builtin `{name}` failed: {message}")]
    BuiltinFailed { name: String, message: String },
    #[error("rule action on `{0}` needs rule management enabled")]
    IstarDisabled(String),
    #[error("event `{0}` is not ground")]
    NonGroundEvent(String),
    #[error("if-rule chaining exceeded {0} firings in one step")]
    ChainLimitExceeded(usize),
}

/// A ground event and the agent that emitted it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    pub agent: String,
    pub atom: Atom,
}

impl Event {
    pub fn new(agent: impl Into<String>, atom: Atom) -> Self {
        Event { agent: agent.into(), atom }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.agent, self.atom)
    }
}

/// A rule instance: its id and the bindings it was instantiated with.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Firing {
    pub rule_id: Atom,
    pub substitution: Substitution,
}

impl fmt::Display for Firing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.rule_id, self.substitution)
    }
}

/// One transition of the labelled transition system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionRecord {
    pub step: usize,
    pub state_before: StateOfAffairs,
    /// Events after force-rules ran, agent events first.
    pub events: Vec<Event>,
    /// The events added by force-rules, also present in `events`.
    pub forced_events: Vec<Event>,
    /// Rule instances whose actions were committed, in commit order.
    pub fired: Vec<Firing>,
    /// ECA and force instances skipped because an ignore-rule applied.
    pub ignored: Vec<Firing>,
    /// Rule instances whose actions were rolled back by a prevent-rule.
    pub prevented: Vec<Firing>,
    pub state_after: StateOfAffairs,
}
