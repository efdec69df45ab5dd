use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use inst_core::parser::{parse_program_checked, serialize};
use inst_harness::{
    gen_mlp_program, load_mlp, load_program, load_trace, replay, run_scenario, step_after, HarnessError, RecordFile,
    RunConfig, Scenario, ScenarioSources,
};

const OK: u8 = 0;
const DIAGNOSTICS: u8 = 1;
const ENGINE_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "inst", version, about = "Run normative rule programs over event traces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a program and print it in canonical form.
    Parse { file: PathBuf },
    /// Run a scenario and write its record file.
    Run {
        /// Scenario file (TOML); the other inputs override its entries.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        program: Option<PathBuf>,
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        istar: bool,
        #[arg(long)]
        max_chain: Option<usize>,
        /// Network spec (JSON); registers `calculate`.
        #[arg(long)]
        mlp: Option<PathBuf>,
    },
    /// Read a record file on standard input and run the next macro-step.
    Step {
        #[arg(long)]
        program: PathBuf,
        /// Trace whose step-0 events are the events of this step.
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long)]
        istar: bool,
        #[arg(long)]
        max_chain: Option<usize>,
        #[arg(long)]
        mlp: Option<PathBuf>,
    },
    /// Run again the scenario stored in a record file.
    Replay {
        records: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compile a network spec into a rule program.
    GenMlp {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Parse { file } => cmd_parse(&file),
        Command::Run { scenario, program, init, trace, steps, out, istar, max_chain, mlp } => {
            let overrides = ScenarioSources { program, init, trace, steps, istar, max_chain, mlp };
            cmd_run(scenario.as_deref(), overrides, out.as_deref())
        }
        Command::Step { program, events, istar, max_chain, mlp } => {
            cmd_step(&program, events.as_deref(), istar, max_chain, mlp.as_deref())
        }
        Command::Replay { records, out } => cmd_replay(&records, out.as_deref()),
        Command::GenMlp { spec, out } => cmd_gen_mlp(&spec, out.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(DIAGNOSTICS)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), HarnessError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|source| HarnessError::Io { path: path.display().to_string(), source }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| HarnessError::Io { path: "<stdout>".into(), source }),
    }
}

fn cmd_parse(file: &Path) -> Result<u8, HarnessError> {
    let text = std::fs::read_to_string(file)
        .map_err(|source| HarnessError::Io { path: file.display().to_string(), source })?;
    let name = file.display().to_string();
    match parse_program_checked(&text) {
        Ok(out) => {
            for w in &out.warnings {
                eprintln!("warning: {}", w.with_file(&name));
            }
            emit(None, &serialize(&out.rules))?;
            Ok(OK)
        }
        Err(e) => {
            for d in &e.diagnostics {
                eprintln!("{}", d.with_file(&name));
            }
            Ok(DIAGNOSTICS)
        }
    }
}

fn cmd_run(scenario: Option<&Path>, o: ScenarioSources, out: Option<&Path>) -> Result<u8, HarnessError> {
    let (s, warnings) = match scenario {
        None => Scenario::from_sources(&o)?,
        Some(path) => {
            let (mut s, mut warnings) = Scenario::load(path)?;
            if let Some(p) = &o.mlp {
                s.config.mlp = Some(load_mlp(p)?);
                if o.program.is_none() {
                    s.program = gen_mlp_program(s.config.mlp.as_ref().expect("set above"))?;
                }
            }
            if let Some(p) = &o.program {
                let (rules, w) = load_program(p)?;
                s.program = rules;
                warnings = w;
            }
            if let Some(p) = &o.init {
                s.init = inst_harness::load_init(p)?;
            }
            if let Some(p) = &o.trace {
                s.trace = load_trace(p)?;
            }
            if let Some(n) = o.steps {
                s.trace.resize_with(n, Vec::new);
            }
            s.config.istar |= o.istar;
            if let Some(n) = o.max_chain {
                s.config.max_chain = n;
            }
            (s, warnings)
        }
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let result = run_scenario(&s)?;
    emit(out, &result.file.to_jsonl())?;
    Ok(report(result.error.map(|(step, e)| format!("step {step}: {e}"))))
}

fn report(error: Option<String>) -> u8 {
    match error {
        None => OK,
        Some(e) => {
            eprintln!("engine error: {e}");
            ENGINE_ERROR
        }
    }
}

fn cmd_step(
    program: &Path,
    events: Option<&Path>,
    istar: bool,
    max_chain: Option<usize>,
    mlp: Option<&Path>,
) -> Result<u8, HarnessError> {
    let (rules, warnings) = load_program(program)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let events = match events {
        Some(p) => load_trace(p)?.into_iter().next().unwrap_or_default(),
        None => Vec::new(),
    };
    let config = RunConfig {
        istar,
        max_chain: max_chain.unwrap_or(RunConfig::default().max_chain),
        mlp: mlp.map(load_mlp).transpose()?,
    };
    let mut input = String::new();
    std::io::stdin()
        .read_to_string(&mut input)
        .map_err(|source| HarnessError::Io { path: "<stdin>".into(), source })?;
    let last = input
        .lines()
        .rev()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| HarnessError::Invalid("no record on standard input".into()))?;
    let (record, error) = step_after(last, &rules, &config, &events)?;
    emit(None, &(inst_harness::record::record_line(&record) + "\n"))?;
    Ok(report(error.map(|e| e.to_string())))
}

fn cmd_replay(records: &Path, out: Option<&Path>) -> Result<u8, HarnessError> {
    let text = std::fs::read_to_string(records)
        .map_err(|source| HarnessError::Io { path: records.display().to_string(), source })?;
    let file = RecordFile::from_jsonl(&text)?;
    let result = replay(&file)?;
    emit(out, &result.file.to_jsonl())?;
    Ok(report(result.error.map(|(step, e)| format!("step {step}: {e}"))))
}

fn cmd_gen_mlp(spec: &Path, out: Option<&Path>) -> Result<u8, HarnessError> {
    let spec = load_mlp(spec)?;
    emit(out, &serialize(&gen_mlp_program(&spec)?))?;
    Ok(OK)
}
