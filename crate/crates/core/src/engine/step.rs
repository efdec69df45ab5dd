use std::collections::HashSet;
use std::sync::Arc;

use super::eval::{apply_action, check_prv, dedup, holds, ignored, match_events, EvalContext};
use super::{EngineConfig, EngineError, Event, Firing, TransitionRecord, INSTITUTION};
use crate::kernel::{Atom, StateOfAffairs, Substitution};
use crate::parser::{desugar_expectations, Action, Condition, Rule, RuleBase};

/// Instantiated `(condition, actions)` pairs of if-rules fired in the current
/// macro-step.
#[derive(Clone, Debug)]
pub struct FiredRegistry {
    seen: HashSet<(Condition, Vec<Action>)>,
}

impl FiredRegistry {
    /// A fresh registry holding only the `(not(true), [])` sentinel.
    pub fn new() -> Self {
        let mut seen = HashSet::new();
        seen.insert((Condition::Not(Box::new(Condition::True)), Vec::new()));
        FiredRegistry { seen }
    }

    pub fn contains(&self, cond: &Condition, actions: &[Action]) -> bool {
        self.seen.contains(&(cond.clone(), actions.to_vec()))
    }

    pub fn insert(&mut self, cond: Condition, actions: Vec<Action>) -> bool {
        self.seen.insert((cond, actions))
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }
}

impl Default for FiredRegistry {
    fn default() -> Self {
        Self::new()
    }
}

/// Result of one macro-step.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub state: StateOfAffairs,
    pub rules: RuleBase,
    pub record: TransitionRecord,
}

/// Result of a run; `error` is set when a step failed, in which case
/// `state` and `rules` are those before the failing step.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<TransitionRecord>,
    pub state: StateOfAffairs,
    pub rules: RuleBase,
    pub error: Option<(usize, EngineError)>,
}

#[derive(Clone)]
struct World {
    delta: StateOfAffairs,
    rules: RuleBase,
}

/// An instantiated action sequence waiting to be applied.
struct Pending {
    rule_id: Atom,
    sigma: Substitution,
    actions: Vec<Action>,
}

/// The rule base of the step, split by kind. Rule changes made during the
/// step are seen from the next step on.
struct RuleSets {
    eca: Vec<(Atom, Arc<Rule>)>,
    ifs: Vec<(Atom, Arc<Rule>)>,
    force: Vec<(Atom, Arc<Rule>)>,
    ignore: Vec<(Vec<Atom>, Condition)>,
    prevent: Vec<(Condition, Condition)>,
}

impl RuleSets {
    fn of(rules: &RuleBase) -> RuleSets {
        let has_expectations = rules.iter().any(|(_, r)| matches!(**r, Rule::Expectation { .. }));
        let desugared;
        let rules = if has_expectations {
            desugared = desugar_expectations(rules);
            &desugared
        } else {
            rules
        };
        let mut sets = RuleSets { eca: vec![], ifs: vec![], force: vec![], ignore: vec![], prevent: vec![] };
        for (id, rule) in rules.iter() {
            let entry = (id.clone(), Arc::clone(rule));
            match &**rule {
                Rule::Eca { .. } => sets.eca.push(entry),
                Rule::If { .. } => sets.ifs.push(entry),
                Rule::Force { .. } => sets.force.push(entry),
                Rule::Ignore { events, cond } => sets.ignore.push((events.clone(), cond.clone())),
                Rule::Prevent { target, cond } => sets.prevent.push((target.clone(), cond.clone())),
                Rule::Expectation { .. } => unreachable!("expectations are desugared above"),
            }
        }
        sets
    }
}

struct Machine<'a> {
    cfg: &'a EngineConfig,
    ctx: EvalContext<'a>,
    sets: RuleSets,
    registry: FiredRegistry,
    chain_count: usize,
    fired: Vec<Firing>,
    ignored: Vec<Firing>,
    prevented: Vec<Firing>,
}

impl Machine<'_> {
    /// Applies one rule instance atomically; keeps it only if no prevent-rule
    /// objects to the resulting state.
    fn commit(&mut self, world: &mut World, p: Pending) -> Result<bool, EngineError> {
        let mut candidate = world.clone();
        for a in &p.actions {
            apply_action(&mut candidate.delta, &mut candidate.rules, a, self.cfg.istar_enabled, &self.ctx)?;
        }
        let firing = Firing { rule_id: p.rule_id, substitution: p.sigma.resolved() };
        if check_prv(&world.delta, &candidate.delta, &self.sets.prevent, &self.ctx)? {
            *world = candidate;
            self.fired.push(firing);
            Ok(true)
        } else {
            self.prevented.push(firing);
            Ok(false)
        }
    }

    /// First if-rule instance, in declaration then holds order, not yet fired.
    fn select_rule(&self, delta: &StateOfAffairs) -> Result<Option<(Atom, Substitution, Condition, Vec<Action>)>, EngineError> {
        for (id, rule) in &self.sets.ifs {
            let Rule::If { cond, actions } = &**rule else { continue };
            for sigma in holds(delta, cond, &Substitution::new(), &self.ctx)? {
                let c = sigma.apply(cond);
                let a = sigma.apply_all(actions);
                if !self.registry.contains(&c, &a) {
                    return Ok(Some((id.clone(), sigma, c, a)));
                }
            }
        }
        Ok(None)
    }

    fn chain_if(&mut self, world: &mut World) -> Result<(), EngineError> {
        while let Some((rule_id, sigma, c, a)) = self.select_rule(&world.delta)? {
            self.chain_count += 1;
            if self.chain_count > self.cfg.max_chain_iterations {
                return Err(EngineError::ChainLimitExceeded(self.cfg.max_chain_iterations));
            }
            self.registry.insert(c, a.clone());
            // A prevented instance stays in the registry: it is consumed.
            self.commit(world, Pending { rule_id, sigma, actions: a })?;
        }
        Ok(())
    }

    fn apply_rule_action_sets(&mut self, world: &mut World, pending: Vec<Pending>) -> Result<(), EngineError> {
        for p in pending {
            if self.commit(world, p)? {
                self.chain_if(world)?;
            }
        }
        Ok(())
    }

    fn note_ignored(&mut self, rule_id: &Atom, sigma: &Substitution) {
        let firing = Firing { rule_id: rule_id.clone(), substitution: sigma.resolved() };
        if !self.ignored.contains(&firing) {
            self.ignored.push(firing);
        }
    }

    /// Every non-ignored ECA (or force) instance triggered by `xi` in
    /// `delta`, in rule then match order, without duplicates.
    #[allow(clippy::type_complexity)]
    fn collect(
        &mut self,
        delta: &StateOfAffairs,
        xi: &[Atom],
        force: bool,
    ) -> Result<Vec<(usize, Atom, Substitution, Vec<Atom>, Vec<Action>)>, EngineError> {
        let rules = if force { self.sets.force.clone() } else { self.sets.eca.clone() };
        let mut out: Vec<(usize, Atom, Substitution, Vec<Atom>, Vec<Action>)> = Vec::new();
        for (index, (id, rule)) in rules.iter().enumerate() {
            let (forced, events, cond, actions) = match &**rule {
                Rule::Eca { events, cond, actions } => (&[][..], events, cond, actions),
                Rule::Force { forced, events, cond, actions } => (&forced[..], events, cond, actions),
                _ => continue,
            };
            for s1 in match_events(events, xi, &Substitution::new()) {
                let triggers = s1.apply_all(events);
                for sigma in holds(delta, cond, &s1, &self.ctx)? {
                    if ignored(delta, xi, &triggers, &self.sets.ignore, &self.ctx)? {
                        self.note_ignored(id, &sigma);
                        continue;
                    }
                    let fe = sigma.apply_all(forced);
                    if let Some(open) = fe.iter().find(|a| !a.is_ground()) {
                        return Err(EngineError::NonGroundEvent(open.to_string()));
                    }
                    let acts = sigma.apply_all(actions);
                    let dup = out.iter().any(|(i, _, _, f, a)| *i == index && *f == fe && *a == acts);
                    if !dup {
                        out.push((index, id.clone(), sigma, fe, acts));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Force-rules: extends `xi` with forced events and applies their actions.
    fn step_force(&mut self, world: &mut World, xi: &mut Vec<Event>) -> Result<Vec<Event>, EngineError> {
        let atoms: Vec<Atom> = xi.iter().map(|e| e.atom.clone()).collect();
        let found = self.collect(&world.delta.clone(), &atoms, true)?;
        let mut forced = Vec::new();
        let mut pending = Vec::new();
        for (_, rule_id, sigma, fe, actions) in found {
            for atom in fe {
                if !xi.iter().any(|e| e.atom == atom) {
                    let ev = Event::new(INSTITUTION, atom);
                    xi.push(ev.clone());
                    forced.push(ev);
                }
            }
            pending.push(Pending { rule_id, sigma, actions });
        }
        self.apply_rule_action_sets(world, pending)?;
        Ok(forced)
    }

    fn step_eca(&mut self, world: &mut World, xi: &[Event]) -> Result<(), EngineError> {
        let atoms: Vec<Atom> = xi.iter().map(|e| e.atom.clone()).collect();
        let found = self.collect(&world.delta.clone(), &atoms, false)?;
        let pending = found
            .into_iter()
            .map(|(_, rule_id, sigma, _, actions)| Pending { rule_id, sigma, actions })
            .collect();
        self.apply_rule_action_sets(world, pending)
    }
}

/// One macro-step at logical step `step` with `time(T)` reading `clock`.
/// On error nothing is returned but the diagnostic; the caller keeps the
/// pre-step state.
pub fn macro_step(
    delta: &StateOfAffairs,
    events: &[Event],
    rules: &RuleBase,
    cfg: &EngineConfig,
    step: usize,
    clock: i64,
) -> Result<StepOutput, EngineError> {
    if let Some(open) = events.iter().find(|e| !e.atom.is_ground()) {
        return Err(EngineError::NonGroundEvent(open.atom.to_string()));
    }
    let mut machine = Machine {
        cfg,
        ctx: EvalContext { time: clock, builtins: &cfg.builtins },
        sets: RuleSets::of(rules),
        registry: FiredRegistry::new(),
        chain_count: 0,
        fired: Vec::new(),
        ignored: Vec::new(),
        prevented: Vec::new(),
    };
    let mut world = World { delta: delta.clone(), rules: rules.clone() };
    machine.chain_if(&mut world)?;
    let mut xi = events.to_vec();
    dedup(&mut xi);
    let forced_events = machine.step_force(&mut world, &mut xi)?;
    machine.step_eca(&mut world, &xi)?;
    let record = TransitionRecord {
        step,
        state_before: delta.clone(),
        events: xi,
        forced_events,
        fired: machine.fired,
        ignored: machine.ignored,
        prevented: machine.prevented,
        state_after: world.delta.clone(),
    };
    Ok(StepOutput { state: world.delta, rules: world.rules, record })
}

/// Folds [`macro_step`] over `trace`, stopping at the first error.
pub fn run(delta: &StateOfAffairs, trace: &[Vec<Event>], rules: &RuleBase, cfg: &EngineConfig) -> RunOutput {
    let mut out = RunOutput { records: Vec::new(), state: delta.clone(), rules: rules.clone(), error: None };
    for (step, events) in trace.iter().enumerate() {
        match macro_step(&out.state, events, &out.rules, cfg, step, cfg.clock_mode.now(step)) {
            Ok(next) => {
                out.state = next.state;
                out.rules = next.rules;
                out.records.push(next.record);
            }
            Err(e) => {
                out.error = Some((step, e));
                break;
            }
        }
    }
    out
}
