//! Acceptance criteria, one pass/fail line each.

use std::cell::Cell;
use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use inst_core::constraints::{eval_term, sat, ConstraintError};
use inst_core::engine::{macro_step, run, EngineConfig, Event};
use inst_core::kernel::{Atom, Constraint, Number, RelOp, StateOfAffairs, Term};
use inst_core::parser::{
    desugar_expectations, parse_atom, parse_condition, parse_facts, parse_program, parse_program_checked,
    parse_term, serialize,
};
use inst_harness::mlp::{input_events, read_outputs, SIGMOID_TABLE};
use inst_harness::{
    engine_config, gen_mlp_program, load_mlp, run_scenario, Activation, MlpSpec, Neuron, RunConfig, Scenario,
};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn scenario(name: &str) -> Result<Scenario, String> {
    Scenario::load(&corpus().join(name)).map(|(s, _)| s).map_err(|e| e.to_string())
}

fn rendered(state: &StateOfAffairs) -> Vec<String> {
    state.iter().map(|f| f.to_string()).collect()
}

fn q(n: i64, d: i64) -> Number {
    Number::new(n.into(), d.into())
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config { cases, failure_persistence: None, ..Config::default() },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("prevent scenario", prevent_scenario),
        ("ignore table", ignore_table),
        ("expectation lifecycle", expectation_lifecycle),
        ("MLP equivalence", mlp_equivalence),
        ("differential vs reference interpreter", differential),
        ("determinism", determinism),
        ("parser round-trip and fuzz", round_trip_and_fuzz),
        ("rule management dynamics", rule_management),
        ("constraint solver vs grid oracle", solver_grid),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = start.elapsed();
        match result {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail} [{took:.2?}]", i + 1),
            Err(why) => {
                failures += 1;
                println!("criterion {}: FAIL {name}: {why} [{took:.2?}]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

// --- 1 -------------------------------------------------------------------------

fn prevent_scenario() -> Check {
    let start = Instant::now();
    let out = run_scenario(&scenario("prevent.toml")?).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    ensure!(out.error.is_none(), "engine error {:?}", out.error);
    let got: BTreeSet<String> = rendered(&out.state).into_iter().collect();
    let want: BTreeSet<String> = ["p", "r"].iter().map(|s| s.to_string()).collect();
    ensure!(got == want, "final state {got:?}, expected {want:?}");
    let prevented: Vec<&str> = out.file.records[0].prevented.iter().map(|f| f.rule_id.as_str()).collect();
    ensure!(prevented == ["r5"], "prevented {prevented:?}");
    ensure!(took < Duration::from_secs(1), "took {took:?}");
    Ok(format!("final state {{p, r}}, r5 rolled back, {took:.2?}"))
}

// --- 2 -------------------------------------------------------------------------

fn ignore_table() -> Check {
    let start = Instant::now();
    // (ignored events, occurring events, ECA rule on a1 skipped)
    let table: [(&str, &[&str], bool); 6] = [
        ("a1", &["a1"], true),
        ("a1", &["a1", "a2"], true),
        ("a1", &["a1", "a2", "a3"], true),
        ("a1, a2", &["a1"], false),
        ("a1, a2", &["a1", "a2"], true),
        ("a1, a2", &["a1", "a2", "a3"], true),
    ];
    let done = parse_atom("done").unwrap().into();
    for (ignore, xi, skipped) in table {
        for with_ignore in [true, false] {
            let mut src = "rule(e, on a1 if true do add(done)).\n".to_string();
            if with_ignore {
                src.push_str(&format!("rule(i, ignore {ignore} if true).\n"));
            }
            let rules = parse_program(&src).map_err(|e| e.to_string())?;
            let events: Vec<Event> = xi.iter().map(|a| Event::new("ag", parse_atom(a).unwrap())).collect();
            let out = macro_step(&StateOfAffairs::new(), &events, &rules, &EngineConfig::default(), 0, 0)
                .map_err(|e| e.to_string())?;
            let was_skipped = !out.state.contains(&done);
            let expect = with_ignore && skipped;
            ensure!(
                was_skipped == expect,
                "ignore {ignore} (present: {with_ignore}) with events {xi:?}: skipped={was_skipped}, expected {expect}"
            );
            ensure!(out.record.ignored.len() == usize::from(expect), "ignored record {:?}", out.record.ignored);
        }
    }
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(1), "took {took:?}");
    Ok(format!("6 rows and 6 controls match, {took:.2?}"))
}

// --- 3 -------------------------------------------------------------------------

/// The value of `credit(agent, V)`, reading `V` from a pinning equality when
/// the fact is constrained.
fn credit(state: &StateOfAffairs, agent: &str) -> Result<Number, String> {
    let facts: Vec<_> = state
        .iter()
        .filter(|cf| cf.atom.pred == "credit" && cf.atom.args.first() == Some(&Term::constant(agent)))
        .collect();
    ensure!(facts.len() == 1, "{} credit facts for {agent}", facts.len());
    let cf = facts[0];
    match &cf.atom.args[1] {
        Term::Num(n) => Ok(n.clone()),
        Term::Var(v) => {
            let value = cf
                .constraints
                .iter()
                .find_map(|c| match (&c.lhs, c.op) {
                    (Term::Var(w), RelOp::Eq) if w == v => eval_term(&c.rhs).ok(),
                    _ => None,
                })
                .ok_or_else(|| format!("credit of {agent} is not pinned: {cf}"))?;
            // No other value is possible.
            let mut other = cf.constraints.clone();
            other.push(Constraint::new(Term::var(v), RelOp::Ne, Term::Num(value.clone())));
            ensure!(!sat(&other).map_err(|e| e.to_string())?, "credit of {agent} not unique: {cf}");
            Ok(value)
        }
        other => Err(format!("credit of {agent} is {other}")),
    }
}

fn expectation_lifecycle() -> Check {
    let init = scenario("auction-violated.toml")?.init;
    let before = credit(&init, "ag1")?;

    let violated = run_scenario(&scenario("auction-violated.toml")?).map_err(|e| e.to_string())?;
    ensure!(violated.error.is_none(), "engine error {:?}", violated.error);
    let after = credit(&violated.state, "ag1")?;
    ensure!(&before - &after == q(10, 1), "violation: credit {before} -> {after}");
    ensure!(credit(&violated.state, "ag2")? == q(100, 1), "bystander credit changed");
    ensure!(!violated.state.iter().any(|f| f.atom.pred == "exp"), "expectation left: {:?}", rendered(&violated.state));
    let sanctions: Vec<usize> = violated
        .file
        .records
        .iter()
        .filter(|r| r.fired.iter().any(|f| f.rule_id == "'pay-sanction'"))
        .map(|r| r.step)
        .collect();
    ensure!(sanctions == [3], "sanction fired at steps {sanctions:?}");

    let fulfilled = run_scenario(&scenario("auction-fulfilled.toml")?).map_err(|e| e.to_string())?;
    ensure!(fulfilled.error.is_none(), "engine error {:?}", fulfilled.error);
    ensure!(credit(&fulfilled.state, "ag1")? == before, "fulfilled: credit changed");
    ensure!(!fulfilled.state.iter().any(|f| f.atom.pred == "exp"), "expectation left: {:?}", rendered(&fulfilled.state));
    ensure!(
        !fulfilled.file.records.iter().any(|r| r.fired.iter().any(|f| f.rule_id == "'pay-sanction'")),
        "sanction fired after payment"
    );
    Ok(format!("violated: credit {before} -> {after}; fulfilled: expectation removed, credit {before}"))
}

// --- 4 -------------------------------------------------------------------------

/// Logistic table interpolation, written independently of the harness.
fn oracle_sigmoid(x: &Number) -> Number {
    let pts: Vec<(Number, Number)> =
        SIGMOID_TABLE.iter().map(|&(k, v)| (q(k, 1), q(v, 1000))).collect();
    if x <= &pts[0].0 {
        return pts[0].1.clone();
    }
    for w in pts.windows(2) {
        let ((x0, y0), (x1, y1)) = (&w[0], &w[1]);
        if x <= x1 {
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
        }
    }
    pts[pts.len() - 1].1.clone()
}

fn oracle_forward(spec: &MlpSpec, inputs: &[Number]) -> Vec<Vec<Number>> {
    let mut layers = Vec::new();
    let mut prev = inputs.to_vec();
    for layer in &spec.layers {
        let out: Vec<Number> = layer
            .iter()
            .map(|n| {
                let s = n.weights.iter().zip(&prev).fold(n.bias.clone(), |acc, (w, x)| acc + w * x);
                let zero = q(0, 1);
                match spec.activation {
                    Activation::Step => {
                        if s > zero {
                            q(1, 1)
                        } else {
                            zero
                        }
                    }
                    Activation::Relu => s.max(zero),
                    Activation::Sigmoid => oracle_sigmoid(&s),
                }
            })
            .collect();
        layers.push(out.clone());
        prev = out;
    }
    layers
}

fn run_network(spec: &MlpSpec, inputs: &[Number]) -> Result<(Vec<Vec<Option<Number>>>, usize), String> {
    let rules = gen_mlp_program(spec).map_err(|e| e.to_string())?;
    let cfg = engine_config(&RunConfig { mlp: Some(spec.clone()), ..RunConfig::default() }).map_err(|e| e.to_string())?;
    let out = macro_step(&StateOfAffairs::new(), &input_events("env", inputs), &rules, &cfg, 0, 0)
        .map_err(|e| e.to_string())?;
    let layers = (1..=spec.depth()).map(|k| read_outputs(&out.state, k, spec.layer_sizes[k])).collect();
    let o_facts = out.state.iter().filter(|f| f.atom.pred == "o").count();
    Ok((layers, o_facts))
}

fn weight() -> impl Strategy<Value = Number> {
    (1i64..=4).prop_flat_map(|d| (-2 * d..=2 * d).prop_map(move |n| q(n, d)))
}

fn network() -> impl Strategy<Value = (MlpSpec, Vec<Number>)> {
    (1usize..=4, prop::collection::vec(1usize..=4, 1..=3), 0u8..3).prop_flat_map(|(inputs, sizes, act)| {
        let mut layer_sizes = vec![inputs];
        layer_sizes.extend(sizes);
        let layers: Vec<_> = layer_sizes
            .windows(2)
            .map(|w| {
                prop::collection::vec(
                    (prop::collection::vec(weight(), w[0]), weight())
                        .prop_map(|(weights, bias)| Neuron { weights, bias }),
                    w[1],
                )
            })
            .collect();
        let activation = [Activation::Step, Activation::Relu, Activation::Sigmoid][act as usize];
        let xs = prop::collection::vec((0i64..=1).prop_map(|b| q(b, 1)), inputs);
        (layers, xs).prop_map(move |(layers, xs)| {
            (MlpSpec { layer_sizes: layer_sizes.clone(), activation, layers }, xs)
        })
    })
}

fn mlp_equivalence() -> Check {
    let start = Instant::now();
    let xor = load_mlp(&corpus().join("xor.json")).map_err(|e| e.to_string())?;
    for (a, b, want) in [(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0)] {
        let inputs = [q(a, 1), q(b, 1)];
        let (layers, _) = run_network(&xor, &inputs)?;
        ensure!(layers[1] == [Some(q(want, 1))], "xor({a},{b}) gave {:?}", layers[1]);
        ensure!(oracle_forward(&xor, &inputs)[1] == [q(want, 1)], "oracle disagrees with the truth table");
    }
    let mut cases_runner = runner(200);
    let count = Cell::new(0usize);
    let result = cases_runner.run(&network(), |(spec, inputs)| {
        count.set(count.get() + 1);
        let (layers, o_facts) = run_network(&spec, &inputs).map_err(TestCaseError::fail)?;
        let want: Vec<Vec<Option<Number>>> =
            oracle_forward(&spec, &inputs).into_iter().map(|l| l.into_iter().map(Some).collect()).collect();
        prop_assert_eq!(&layers, &want);
        prop_assert_eq!(o_facts, spec.layer_sizes[1..].iter().sum::<usize>());
        Ok(())
    });
    result.map_err(|e| e.to_string())?;
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(30), "took {took:?}");
    Ok(format!("XOR table exact, {} random networks match the forward pass, {took:.2?}", count.get()))
}

// --- 5 -------------------------------------------------------------------------

const EVENTS: [&str; 6] = ["a(1)", "a(2)", "a(3)", "b", "c(1)", "c(2)"];
const FACTS: [&str; 12] = [
    "p(1)", "p(2)", "p(3)", "q(1)", "q(2)", "q(3)", "r", "s", "s2(1)", "s2(2)", "lim(L):{L >= 2}", "w(1):{1 < 2}",
];
const LITERALS: [&str; 13] = [
    "true",
    "p(X)",
    "not(q(X))",
    "sat({X > 1})",
    "q(Y)",
    "not(p(1))",
    "r",
    "not(r)",
    "time(T) & T > 0",
    "X < 3",
    "lim(Z):{Z >= 2}",
    "seteq([X, 1], [1, X])",
    "X != 2",
];
const ACTIONS: [&str; 11] = [
    "add(p(X))",
    "del(p(X))",
    "add(q(X))",
    "del(q(X))",
    "add(r)",
    "del(r)",
    "add(w(X):{X >= 1})",
    "add(rule(dyn, on b if true do add(r)))",
    "del(rule(dyn, _))",
    "add(rule(dyn2, if r do add(p(3))))",
    // Y is bound only by some conditions; unbound, this is an engine error.
    "add(v(Y))",
];

fn pick(options: &'static [&'static str]) -> impl Strategy<Value = &'static str> {
    prop::sample::select(options)
}

fn condition() -> impl Strategy<Value = String> {
    prop::collection::vec(pick(&LITERALS), 1..=2).prop_map(|ls| ls.join(" & "))
}

fn actions() -> impl Strategy<Value = String> {
    prop::collection::vec(pick(&ACTIONS), 1..=2).prop_map(|a| a.join(", "))
}

/// A rule body, without its id.
fn rule_body() -> impl Strategy<Value = String> {
    const ON: [&str; 5] = ["a(X)", "c(X)", "a(X), b", "c(X), a(X)", "a(X), c(Y)"];
    prop_oneof![
        3 => (pick(&ON), condition(), actions()).prop_map(|(e, c, a)| format!("on {e} if {c} do {a}")),
        3 => (pick(&["p(X)", "q(X)"]), condition(), actions())
            .prop_map(|(f, c, a)| format!("if {f} & {c} do {a}")),
        1 => (pick(&["b", "c(X)", "a(2)", "c(1), b"]), pick(&ON), condition(), actions())
            .prop_map(|(fe, e, c, a)| format!("force {fe} on {e} if {c} do {a}")),
        1 => (pick(&["a(1)", "b", "c(X)", "a(X), b", "c(2)"]), pick(&["true", "r", "not(r)", "s", "p(X)"]))
            .prop_map(|(e, c)| format!("ignore {e} if {c}")),
        // Prevent conditions only read facts no action changes, so reading
        // them before or after an update gives the same answer.
        1 => (pick(&["p(2)", "q(X)", "r", "p(X) & q(X)", "w(3):{3 >= 1}"]), pick(&["true", "s", "not(s)", "s2(X)"]))
            .prop_map(|(t, c)| format!("prevent {t} if {c}")),
    ]
}

#[derive(Debug, Clone)]
struct Case {
    program: String,
    init: String,
    trace: Vec<Vec<(usize, &'static str)>>,
}

fn case() -> impl Strategy<Value = Case> {
    (
        prop::collection::vec(rule_body(), 1..=6),
        prop::collection::vec(pick(&FACTS), 0..=8),
        prop::collection::vec(prop::collection::vec((0usize..3, pick(&EVENTS)), 0..=4), 3),
    )
        .prop_map(|(bodies, facts, trace)| Case {
            program: bodies.iter().enumerate().map(|(i, b)| format!("rule(r{i}, {b}).\n")).collect(),
            init: facts.iter().map(|f| format!("{f}.\n")).collect(),
            trace,
        })
}

fn differential() -> Check {
    let cfg = EngineConfig { istar_enabled: true, max_chain_iterations: 50, ..EngineConfig::default() };
    let mut cases_runner = runner(600);
    let (cases, errors) = (Cell::new(0usize), Cell::new(0usize));
    let counts = Cell::new([0usize; 4]);
    let result = cases_runner.run(&case(), |c| {
        let rules = parse_program(&c.program).map_err(|e| TestCaseError::fail(format!("{e}\n{}", c.program)))?;
        let init = StateOfAffairs::from_formulae(parse_facts(&c.init).map_err(|e| TestCaseError::fail(e.to_string()))?)
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        let trace: Vec<Vec<Event>> = c
            .trace
            .iter()
            .map(|step| step.iter().map(|(ag, e)| Event::new(format!("ag{ag}"), parse_atom(e).unwrap())).collect())
            .collect();
        let engine = run(&init, &trace, &rules, &cfg);
        let (records, error) = inst_reference::run(&init, &trace, &rules, &cfg);
        cases.set(cases.get() + 1);
        errors.set(errors.get() + usize::from(error.is_some()));
        let mut n = counts.get();
        for r in &records {
            n[0] += r.fired.len();
            n[1] += r.prevented.len();
            n[2] += r.ignored.len();
            n[3] += r.forced_events.len();
        }
        counts.set(n);
        prop_assert_eq!(&engine.records, &records, "program:\n{}init:\n{}", c.program, c.init);
        let e1 = engine.error.map(|(i, e)| (i, e.to_string()));
        let e2 = error.map(|(i, e)| (i, e.to_string()));
        prop_assert_eq!(e1, e2, "program:\n{}", c.program);
        Ok(())
    });
    result.map_err(|e| e.to_string())?;
    let (cases, errors, [fired, prevented, ignored, forced]) = (cases.get(), errors.get(), counts.get());
    ensure!(cases >= 500, "only {cases} programs");
    Ok(format!(
        "{cases} programs identical ({fired} fired, {prevented} prevented, {ignored} ignored, \
         {forced} forced events, {errors} runs ending in an engine error)"
    ))
}

// --- 6 -------------------------------------------------------------------------

fn corpus_scenarios() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(corpus())
        .expect("corpus directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    v.sort();
    v
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let files = corpus_scenarios();
    ensure!(files.len() >= 5, "corpus has {} scenarios", files.len());
    for path in &files {
        let (s, _) = Scenario::load(path).map_err(|e| e.to_string())?;
        let library = run_scenario(&s).map_err(|e| e.to_string())?.file.to_jsonl();
        for i in 0..10 {
            let out = dir.path().join(format!("run{i}.jsonl"));
            let status = Command::new(env!("CARGO_BIN_EXE_inst"))
                .arg("run")
                .arg("--scenario")
                .arg(path)
                .arg("--out")
                .arg(&out)
                .status()
                .map_err(|e| e.to_string())?;
            ensure!(status.success(), "{}: exit {status}", path.display());
            let bytes = std::fs::read(&out).map_err(|e| e.to_string())?;
            ensure!(bytes == library.as_bytes(), "{}: run {i} differs", path.display());
        }
    }
    Ok(format!("{} scenarios x 10 CLI runs byte-identical", files.len()))
}

// --- 7 -------------------------------------------------------------------------

fn round_trip(text: &str, what: &str) -> Result<(), String> {
    let rb1 = parse_program(text).map_err(|e| format!("{what}: {e}"))?;
    let s1 = serialize(&rb1);
    let rb2 = parse_program(&s1).map_err(|e| format!("{what}: canonical form does not parse: {e}\n{s1}"))?;
    ensure!(rb1 == rb2, "{what}: parse(serialize(p)) != p");
    ensure!(serialize(&rb2) == s1, "{what}: serialize is not a fixpoint");
    Ok(())
}

const TOKENS: [&str; 48] = [
    "rule", "(", ")", ",", ".", "on", "if", "do", "ignore", "prevent", "force", "expected", "fulfilled-if",
    "violated-if", "sanction-do", "add", "del", "not", "sat", "seteq", "time", "true", "builtin", "in", "&", "[",
    "]", "{", "}", ":", "=", "!=", "<", ">=", "+", "-", "*", "/", "p", "q1", "X", "_", "Y2", "0", "12", "1.5",
    "'a b'", "∅",
];

fn fuzz_input(rng: &mut TestRng, seeds: &[String]) -> String {
    match rng.random_range(0..3) {
        0 => {
            let n = rng.random_range(0..64);
            let bytes: Vec<u8> = (0..n).map(|_| rng.random()).collect();
            String::from_utf8_lossy(&bytes).into_owned()
        }
        1 => {
            let n = rng.random_range(0..40);
            (0..n).map(|_| TOKENS[rng.random_range(0..TOKENS.len())]).collect::<Vec<_>>().join(" ")
        }
        _ => {
            let mut bytes = seeds[rng.random_range(0..seeds.len())].clone().into_bytes();
            for _ in 0..rng.random_range(1..4) {
                let at = rng.random_range(0..=bytes.len());
                match rng.random_range(0..3) {
                    0 => {
                        let end = (at + rng.random_range(0..8)).min(bytes.len());
                        bytes.drain(at..end);
                    }
                    1 => bytes.insert(at, rng.random()),
                    _ => {
                        let tok = TOKENS[rng.random_range(0..TOKENS.len())];
                        bytes.splice(at..at, tok.bytes());
                    }
                }
            }
            String::from_utf8_lossy(&bytes).into_owned()
        }
    }
}

fn round_trip_and_fuzz() -> Check {
    let mut seeds = Vec::new();
    let mut programs = 0;
    let mut paths: Vec<PathBuf> = std::fs::read_dir(corpus()).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    for path in &paths {
        let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
        match path.extension().and_then(|x| x.to_str()) {
            Some("inst") => {
                round_trip(&text, &path.display().to_string())?;
                let desugared = serialize(&desugar_expectations(&parse_program(&text).unwrap()));
                round_trip(&desugared, &format!("{} desugared", path.display()))?;
                programs += 2;
                seeds.push(text);
            }
            Some("init") => {
                let facts = parse_facts(&text).map_err(|e| e.to_string())?;
                let again: String = facts.iter().map(|f| format!("{f}.\n")).collect();
                ensure!(parse_facts(&again).map_err(|e| e.to_string())? == facts, "{}: facts", path.display());
            }
            Some("json") => {
                let spec = load_mlp(path).map_err(|e| e.to_string())?;
                round_trip(&serialize(&gen_mlp_program(&spec).unwrap()), &path.display().to_string())?;
                programs += 1;
            }
            _ => {}
        }
    }

    let mut rng = TestRng::deterministic_rng(RngAlgorithm::ChaCha);
    let hook = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    let mut crashes = Vec::new();
    let mut accepted = 0;
    let mut fixpoint_failures = Vec::new();
    for _ in 0..100_000 {
        let input = fuzz_input(&mut rng, &seeds);
        let outcome = panic::catch_unwind(AssertUnwindSafe(|| {
            let _ = parse_facts(&input);
            let _ = parse_term(&input);
            let _ = parse_condition(&input);
            match parse_program_checked(&input) {
                Ok(out) => Some(round_trip(&serialize(&out.rules), "fuzz").is_ok()),
                Err(_) => None,
            }
        }));
        match outcome {
            Err(_) => crashes.push(input),
            Ok(Some(ok)) => {
                accepted += 1;
                if !ok {
                    fixpoint_failures.push(input);
                }
            }
            Ok(None) => {}
        }
    }
    panic::set_hook(hook);
    ensure!(crashes.is_empty(), "{} crashing inputs, first: {:?}", crashes.len(), crashes[0]);
    ensure!(fixpoint_failures.is_empty(), "round-trip failed on fuzz input {:?}", fixpoint_failures[0]);
    Ok(format!("{programs} corpus programs at fixpoint; 100000 fuzz inputs, no crash, {accepted} accepted and stable"))
}

// --- 8 -------------------------------------------------------------------------

fn rule_management() -> Check {
    let expected = [
        r#"{"step":0,"state_before":[],"events":[{"agent":"admin","event":"open_market"},{"agent":"ag1","event":"bid(ag1,1)"}],"forced_events":[],"fired":[{"rule_id":"open","substitution":{}}],"ignored":[],"prevented":[],"state_after":[]}"#,
        r#"{"step":1,"state_before":[],"events":[{"agent":"ag1","event":"bid(ag1,2)"}],"forced_events":[],"fired":[{"rule_id":"trade","substitution":{"A":"ag1","X":"2"}}],"ignored":[],"prevented":[],"state_after":["bought(ag1,2)"]}"#,
        r#"{"step":2,"state_before":["bought(ag1,2)"],"events":[{"agent":"admin","event":"close_market"},{"agent":"ag2","event":"bid(ag2,3)"}],"forced_events":[],"fired":[{"rule_id":"close","substitution":{}},{"rule_id":"trade","substitution":{"A":"ag2","X":"3"}}],"ignored":[],"prevented":[],"state_after":["bought(ag1,2)","bought(ag2,3)"]}"#,
        r#"{"step":3,"state_before":["bought(ag1,2)","bought(ag2,3)"],"events":[{"agent":"ag2","event":"bid(ag2,4)"}],"forced_events":[],"fired":[],"ignored":[],"prevented":[],"state_after":["bought(ag1,2)","bought(ag2,3)"]}"#,
    ];
    let out = run_scenario(&scenario("istar.toml")?).map_err(|e| e.to_string())?;
    ensure!(out.error.is_none(), "engine error {:?}", out.error);
    let text = out.file.to_jsonl();
    let got: Vec<&str> = text.lines().skip(1).collect();
    ensure!(got.len() == expected.len(), "{} records", got.len());
    for (g, e) in got.iter().zip(expected) {
        ensure!(*g == e, "record mismatch:\n got {g}\nwant {e}");
    }
    let trade_steps: Vec<usize> = out
        .file
        .records
        .iter()
        .filter(|r| r.fired.iter().any(|f| f.rule_id == "trade"))
        .map(|r| r.step)
        .collect();
    ensure!(trade_steps == [1, 2], "trade fired at {trade_steps:?}");
    ensure!(!out.rules.contains(&Atom::prop("trade")), "trade still installed");
    Ok("added at step 0, fires at steps 1-2, removed at step 2, silent at step 3".into())
}

// --- 9 -------------------------------------------------------------------------

/// `Σ coeff·var ◁ constant` over variables 0..3, integer data.
#[derive(Debug, Clone)]
struct Lin {
    coeffs: [i64; 3],
    op: RelOp,
    constant: i64,
    term: Constraint,
}

const VARS: [&str; 3] = ["X", "Y", "Z"];

fn lin(coeffs: [i64; 3], op: RelOp, constant: i64, term: Constraint) -> Lin {
    Lin { coeffs, op, constant, term }
}

fn op() -> impl Strategy<Value = RelOp> {
    prop::sample::select(vec![RelOp::Eq, RelOp::Ne, RelOp::Lt, RelOp::Le, RelOp::Gt, RelOp::Ge])
}

fn supported_constraint() -> impl Strategy<Value = Lin> {
    let v = 0usize..3;
    let c = -8i64..=8;
    prop_oneof![
        // X ◁ c
        (v.clone(), op(), c.clone()).prop_map(|(x, op, k)| {
            let mut co = [0; 3];
            co[x] = 1;
            lin(co, op, k, Constraint::new(Term::var(VARS[x]), op, Term::int(k)))
        }),
        // c ◁ X
        (v.clone(), op(), c.clone()).prop_map(|(x, op, k)| {
            let mut co = [0; 3];
            co[x] = -1;
            lin(co, op, -k, Constraint::new(Term::int(k), op, Term::var(VARS[x])))
        }),
        // m·X ◁ c
        (v.clone(), 2i64..=3, op(), c.clone()).prop_map(|(x, m, op, k)| {
            let mut co = [0; 3];
            co[x] = m;
            let t = Term::binary("*", Term::int(m), Term::var(VARS[x]));
            lin(co, op, k, Constraint::new(t, op, Term::int(k)))
        }),
        // X ◁ Y + c
        (v.clone(), v.clone(), op(), c.clone()).prop_map(|(x, y, op, k)| {
            let mut co = [0; 3];
            co[x] += 1;
            co[y] -= 1;
            let rhs = Term::binary("+", Term::var(VARS[y]), Term::int(k));
            lin(co, op, k, Constraint::new(Term::var(VARS[x]), op, rhs))
        }),
        // X - Y ◁ c
        (v.clone(), v.clone(), op(), c.clone()).prop_map(|(x, y, op, k)| {
            let mut co = [0; 3];
            co[x] += 1;
            co[y] -= 1;
            let lhs = Term::binary("-", Term::var(VARS[x]), Term::var(VARS[y]));
            lin(co, op, k, Constraint::new(lhs, op, Term::int(k)))
        }),
        // X ◁ Y
        (v.clone(), v, op()).prop_map(|(x, y, op)| {
            let mut co = [0; 3];
            co[x] += 1;
            co[y] -= 1;
            lin(co, op, 0, Constraint::new(Term::var(VARS[x]), op, Term::var(VARS[y])))
        }),
        // ground
        (c.clone(), op(), c).prop_map(|(a, op, b)| lin([0; 3], op, b - a, Constraint::new(Term::int(a), op, Term::int(b)))),
    ]
}

/// Grid step 1/12 over [-26, 26]: bounds and difference constants lie in
/// [-8, 8], so a solution, if any, has one within 3·8 plus slack of 0, and
/// chains of at most four strict steps fit between integers.
const SCALE: i64 = 12;
const RANGE: i64 = 26 * SCALE;

fn cmp(op: RelOp, lhs: i64, rhs: i64) -> bool {
    match op {
        RelOp::Eq => lhs == rhs,
        RelOp::Ne => lhs != rhs,
        RelOp::Lt => lhs < rhs,
        RelOp::Le => lhs <= rhs,
        RelOp::Gt => lhs > rhs,
        RelOp::Ge => lhs >= rhs,
    }
}

/// Whether some grid point satisfies every constraint: X and Y are
/// enumerated, Z is solved exactly on the grid line.
fn grid_oracle(cs: &[Lin]) -> bool {
    for x in -RANGE..=RANGE {
        if !cs.iter().filter(|c| c.coeffs[1] == 0 && c.coeffs[2] == 0).all(|c| cmp(c.op, c.coeffs[0] * x, c.constant * SCALE)) {
            continue;
        }
        for y in -RANGE..=RANGE {
            let fixed = cs.iter().filter(|c| c.coeffs[2] == 0);
            if !fixed.clone().all(|c| cmp(c.op, c.coeffs[0] * x + c.coeffs[1] * y, c.constant * SCALE)) {
                continue;
            }
            let (mut lo, mut hi) = (-RANGE, RANGE);
            let mut excluded = Vec::new();
            let mut possible = true;
            for c in cs.iter().filter(|c| c.coeffs[2] != 0) {
                // a·z ◁ r
                let a = c.coeffs[2];
                let r = c.constant * SCALE - c.coeffs[0] * x - c.coeffs[1] * y;
                let op = if a < 0 { flip(c.op) } else { c.op };
                let (a, r) = (a.abs(), if a < 0 { -r } else { r });
                // z ◁ r/a on the integers
                let floor = r.div_euclid(a);
                let exact = r.rem_euclid(a) == 0;
                let ceil = if exact { floor } else { floor + 1 };
                match op {
                    RelOp::Eq => {
                        if !exact {
                            possible = false;
                        } else {
                            lo = lo.max(floor);
                            hi = hi.min(floor);
                        }
                    }
                    RelOp::Ne => {
                        if exact {
                            excluded.push(floor);
                        }
                    }
                    RelOp::Lt => hi = hi.min(if exact { floor - 1 } else { floor }),
                    RelOp::Le => hi = hi.min(floor),
                    RelOp::Gt => lo = lo.max(if exact { ceil + 1 } else { ceil }),
                    RelOp::Ge => lo = lo.max(ceil),
                }
            }
            if possible && (lo..=hi).any(|z| !excluded.contains(&z)) {
                return true;
            }
        }
    }
    false
}

fn flip(op: RelOp) -> RelOp {
    match op {
        RelOp::Lt => RelOp::Gt,
        RelOp::Le => RelOp::Ge,
        RelOp::Gt => RelOp::Lt,
        RelOp::Ge => RelOp::Le,
        other => other,
    }
}

fn unsupported_constraint() -> impl Strategy<Value = Constraint> {
    let names = prop::sample::select(VARS.to_vec());
    prop_oneof![
        (names.clone(), names.clone(), op(), -8i64..=8).prop_filter("distinct", |(a, b, _, _)| a != b).prop_map(
            |(a, b, op, k)| Constraint::new(Term::binary("+", Term::var(a), Term::var(b)), op, Term::int(k))
        ),
        (names.clone(), names.clone(), op(), -8i64..=8).prop_map(|(a, b, op, k)| {
            Constraint::new(Term::binary("*", Term::var(a), Term::var(b)), op, Term::int(k))
        }),
        (names.clone(), op()).prop_map(|(a, op)| Constraint::new(Term::var(a), op, Term::constant("c"))),
        (names.clone(), names, op(), -8i64..=8).prop_filter("distinct", |(a, b, _, _)| a != b).prop_map(
            |(a, b, op, k)| {
                let lhs = Term::binary("-", Term::binary("*", Term::int(2), Term::var(a)), Term::var(b));
                Constraint::new(lhs, op, Term::int(k))
            }
        ),
        op().prop_map(|op| {
            let sum = Term::binary("+", Term::binary("+", Term::var("X"), Term::var("Y")), Term::var("Z"));
            Constraint::new(sum, op, Term::int(0))
        }),
    ]
}

fn solver_grid() -> Check {
    let mut cases_runner = runner(1000);
    let (n, satisfiable) = (Cell::new(0usize), Cell::new(0usize));
    cases_runner
        .run(&prop::collection::vec(supported_constraint(), 1..=5), |cs| {
            let gamma: Vec<Constraint> = cs.iter().map(|c| c.term.clone()).collect();
            let got = sat(&gamma).map_err(|e| TestCaseError::fail(format!("{e} on {gamma:?}")))?;
            let want = grid_oracle(&cs);
            n.set(n.get() + 1);
            satisfiable.set(satisfiable.get() + usize::from(want));
            let shown: Vec<String> = gamma.iter().map(|c| c.to_string()).collect();
            prop_assert_eq!(got, want, "{:?}", shown);
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    let mut rejected = 0usize;
    let mut tree_runner = self::runner(300);
    let mixed = (prop::collection::vec(supported_constraint(), 0..=3), unsupported_constraint(), any::<prop::sample::Index>());
    for _ in 0..300 {
        let (cs, bad, at) = mixed.new_tree(&mut tree_runner).map_err(|e| e.to_string())?.current();
        let mut gamma: Vec<Constraint> = cs.into_iter().map(|c| c.term).collect();
        gamma.insert(at.index(gamma.len() + 1), bad.clone());
        match sat(&gamma) {
            Err(ConstraintError::UnsupportedConstraint(_)) => rejected += 1,
            other => return Err(format!("{bad} in {gamma:?} gave {other:?}")),
        }
    }
    let (n, satisfiable) = (n.get(), satisfiable.get());
    Ok(format!("{n} sets agree with the grid ({satisfiable} satisfiable); {rejected} out-of-fragment sets rejected"))
}

#[allow(dead_code)]
fn parse_constraint(text: &str) -> Constraint {
    match parse_condition(&format!("sat({{{text}}})")).unwrap() {
        inst_core::parser::Condition::Sat(cs) => cs[0].clone(),
        _ => unreachable!(),
    }
}
