//! Scenarios: a program, an initial state, an event trace and settings.

use std::path::{Path, PathBuf};

use inst_core::engine::{macro_step, EngineConfig, EngineError, Event};
use inst_core::kernel::{KernelError, StateOfAffairs};
use inst_core::parser::{parse_atom, parse_facts, parse_formula, parse_program, parse_program_checked, serialize, RuleBase};
use serde::Deserialize;
use thiserror::Error;

use crate::mlp::{gen_mlp_program, Calculator, MlpError, MlpSpec};
use crate::record::{parse_line, state_strings, Header, Line, Record, RecordError, RecordFile, RunConfig};
use crate::trace::{load_trace, TraceError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error("{0}")]
    Invalid(String),
}

fn read(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.display().to_string(), source })
}

/// Parses a program file; diagnostics carry the file name.
pub fn load_program(path: &Path) -> Result<(RuleBase, Vec<String>), HarnessError> {
    let text = read(path)?;
    let file = path.display().to_string();
    match parse_program_checked(&text) {
        Ok(out) => Ok((out.rules, out.warnings.iter().map(|w| w.with_file(&file)).collect())),
        Err(e) => Err(HarnessError::Parse(
            e.diagnostics.iter().map(|d| d.with_file(&file)).collect::<Vec<_>>().join("\n"),
        )),
    }
}

/// Reads `formula.` clauses into a state.
pub fn load_init(path: &Path) -> Result<StateOfAffairs, HarnessError> {
    let text = read(path)?;
    let file = path.display().to_string();
    let facts = parse_facts(&text).map_err(|e| {
        HarnessError::Parse(e.diagnostics.iter().map(|d| d.with_file(&file)).collect::<Vec<_>>().join("\n"))
    })?;
    Ok(StateOfAffairs::from_formulae(facts)?)
}

pub fn load_mlp(path: &Path) -> Result<MlpSpec, HarnessError> {
    let spec: MlpSpec = serde_json::from_str(&read(path)?)
        .map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))?;
    spec.validate()?;
    Ok(spec)
}

/// The engine settings for `cfg`, with `calculate` registered when a
/// network is attached.
pub fn engine_config(cfg: &RunConfig) -> Result<EngineConfig, MlpError> {
    let mut ec = EngineConfig { max_chain_iterations: cfg.max_chain, istar_enabled: cfg.istar, ..Default::default() };
    if let Some(spec) = &cfg.mlp {
        Calculator::new(spec)?.register(&mut ec.builtins);
    }
    Ok(ec)
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub program: RuleBase,
    pub init: StateOfAffairs,
    pub trace: Vec<Vec<Event>>,
    pub config: RunConfig,
}

/// Scenario file (TOML). Paths are relative to the file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    program: Option<PathBuf>,
    init: Option<PathBuf>,
    trace: Option<PathBuf>,
    steps: Option<usize>,
    #[serde(default)]
    istar: bool,
    max_chain: Option<usize>,
    mlp: Option<PathBuf>,
}

/// Where a scenario's parts come from.
#[derive(Clone, Debug, Default)]
pub struct ScenarioSources {
    pub program: Option<PathBuf>,
    pub init: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    /// Pads the trace with empty steps or cuts it to this length.
    pub steps: Option<usize>,
    pub istar: bool,
    pub max_chain: Option<usize>,
    /// A network spec; its program is used when `program` is absent.
    pub mlp: Option<PathBuf>,
}

impl Scenario {
    /// Reads a scenario file; also returns program warnings.
    pub fn load(path: &Path) -> Result<(Scenario, Vec<String>), HarnessError> {
        let file: ScenarioFile = toml::from_str(&read(path)?)
            .map_err(|e| HarnessError::Parse(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let sources = ScenarioSources {
            program: file.program.map(|p| base.join(p)),
            init: file.init.map(|p| base.join(p)),
            trace: file.trace.map(|p| base.join(p)),
            steps: file.steps,
            istar: file.istar,
            max_chain: file.max_chain,
            mlp: file.mlp.map(|p| base.join(p)),
        };
        Scenario::from_sources(&sources)
    }

    pub fn from_sources(src: &ScenarioSources) -> Result<(Scenario, Vec<String>), HarnessError> {
        let mlp = src.mlp.as_deref().map(load_mlp).transpose()?;
        let (program, warnings) = match (&src.program, &mlp) {
            (Some(p), _) => load_program(p)?,
            (None, Some(spec)) => (gen_mlp_program(spec)?, vec![]),
            (None, None) => return Err(HarnessError::Invalid("a scenario needs a program or a network".into())),
        };
        let init = src.init.as_deref().map(load_init).transpose()?.unwrap_or_default();
        let mut trace = src.trace.as_deref().map(load_trace).transpose()?.unwrap_or_default();
        if let Some(n) = src.steps {
            trace.resize_with(n, Vec::new);
        }
        let config = RunConfig {
            istar: src.istar,
            max_chain: src.max_chain.unwrap_or(RunConfig::default().max_chain),
            mlp,
        };
        Ok((Scenario { program, init, trace, config }, warnings))
    }

    pub fn header(&self) -> Header {
        Header { program: serialize(&self.program), init: state_strings(&self.init), config: self.config.clone() }
    }

    /// Rebuilds the scenario recorded in a record file.
    pub fn from_records(file: &RecordFile) -> Result<Scenario, HarnessError> {
        let h = &file.header;
        let program = parse_program(&h.program).map_err(|e| HarnessError::Parse(format!("header program: {e}")))?;
        let init = h
            .init
            .iter()
            .map(|f| parse_formula(f).map_err(|e| HarnessError::Parse(format!("header init `{f}`: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let trace = file.records.iter().map(record_events).collect::<Result<Vec<_>, _>>()?;
        Ok(Scenario { program, init: StateOfAffairs::from_formulae(init)?, trace, config: h.config.clone() })
    }
}

fn record_events(r: &Record) -> Result<Vec<Event>, HarnessError> {
    r.agent_events()
        .iter()
        .map(|e| {
            parse_atom(&e.event)
                .map(|a| Event::new(e.agent.clone(), a))
                .map_err(|err| HarnessError::Parse(format!("step {} event `{}`: {err}", r.step, e.event)))
        })
        .collect()
}

/// A finished run: the record file and, if a step failed, its error.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub file: RecordFile,
    pub state: StateOfAffairs,
    pub rules: RuleBase,
    pub error: Option<(usize, EngineError)>,
}

/// Folds the engine over the trace. A failing step ends the run with a
/// record carrying the error.
pub fn run_scenario(s: &Scenario) -> Result<RunResult, HarnessError> {
    let cfg = engine_config(&s.config)?;
    let mut state = s.init.clone();
    let mut rules = s.program.clone();
    let mut records = Vec::new();
    let mut error = None;
    for (i, events) in s.trace.iter().enumerate() {
        match macro_step(&state, events, &rules, &cfg, i, cfg.clock_mode.now(i)) {
            Ok(out) => {
                records.push(Record::from(&out.record));
                state = out.state;
                rules = out.rules;
            }
            Err(e) => {
                records.push(Record::failed(i, &state, events, e.to_string()));
                error = Some((i, e));
                break;
            }
        }
    }
    Ok(RunResult { file: RecordFile { header: s.header(), records }, state, rules, error })
}

/// Runs again the scenario recorded in `file`.
pub fn replay(file: &RecordFile) -> Result<RunResult, HarnessError> {
    run_scenario(&Scenario::from_records(file)?)
}

/// One macro-step after the last line of a record file (a header or a
/// record), as the `step` command does. Rule changes made by earlier steps
/// are not visible: `program` is the rule base to use.
pub fn step_after(
    last_line: &str,
    program: &RuleBase,
    config: &RunConfig,
    events: &[Event],
) -> Result<(Record, Option<EngineError>), HarnessError> {
    let line = parse_line(last_line).map_err(|e| HarnessError::Parse(format!("input record: {e}")))?;
    let (step, state) = match line {
        Line::Header(h) => (0, h.init),
        Line::Record(r) => {
            if let Some(e) = r.error {
                return Err(HarnessError::Invalid(format!("input record is a failed step: {e}")));
            }
            (r.step + 1, r.state_after)
        }
    };
    let facts = state
        .iter()
        .map(|f| parse_formula(f).map_err(|e| HarnessError::Parse(format!("input state `{f}`: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let state = StateOfAffairs::from_formulae(facts)?;
    let cfg = engine_config(config)?;
    match macro_step(&state, events, program, &cfg, step, cfg.clock_mode.now(step)) {
        Ok(out) => Ok((Record::from(&out.record), None)),
        Err(e) => Ok((Record::failed(step, &state, events, e.to_string()), Some(e))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::parse_trace;

    fn scenario(program: &str, trace: &str) -> Scenario {
        Scenario {
            program: parse_program(program).unwrap(),
            init: StateOfAffairs::new(),
            trace: parse_trace(trace).unwrap(),
            config: RunConfig::default(),
        }
    }

    #[test]
    fn zero_steps_give_only_the_header() {
        let s = scenario("rule(r, on a if true do add(p)).", "");
        let out = run_scenario(&s).unwrap();
        assert!(out.file.records.is_empty());
        assert_eq!(out.file.to_jsonl().lines().count(), 1);
    }

    #[test]
    fn errors_end_the_file() {
        let s = scenario("rule(r, on a if true do add(rule(x, if true do add(p)))).", "0 e a\n1 e a\n");
        let out = run_scenario(&s).unwrap();
        assert_eq!(out.file.records.len(), 1);
        assert!(matches!(out.error, Some((0, EngineError::IstarDisabled(_)))));
        assert!(out.file.error().unwrap().contains("rule management"));
    }

    #[test]
    fn replay_reproduces_the_file() {
        let s = scenario(
            "rule(r1, on a(X) if not(seen(X)) do add(seen(X))).\nrule(f, force b on a(1) if true do add(q)).",
            "0 e a(1)\n0 e a(2)\n1 e a(1/2)\n",
        );
        let first = run_scenario(&s).unwrap().file;
        let text = first.to_jsonl();
        let parsed = RecordFile::from_jsonl(&text).unwrap();
        assert_eq!(parsed, first);
        assert_eq!(replay(&parsed).unwrap().file.to_jsonl(), text);
        assert!(text.contains(r#""forced_events":[{"agent":"institution","event":"b"}]"#), "{text}");
    }

    #[test]
    fn step_after_continues_a_file() {
        let s = scenario("rule(r1, on a(X) if true do add(seen(X))).", "0 e a(1)\n1 e a(2)\n");
        let full = run_scenario(&s).unwrap().file;
        let text = full.to_jsonl();
        let lines: Vec<&str> = text.lines().collect();
        let (r0, _) = step_after(lines[0], &s.program, &s.config, &s.trace[0]).unwrap();
        assert_eq!(r0, full.records[0]);
        let (r1, _) = step_after(lines[1], &s.program, &s.config, &s.trace[1]).unwrap();
        assert_eq!(r1, full.records[1]);
    }
}
