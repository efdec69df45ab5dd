//! A deliberately naive interpreter for rule programs, written as a
//! clause-by-clause logic program: states are plain lists, bindings are
//! association lists, every collection is a full `findall`. It exists to be compared against `inst_core::engine`.
//!
//! Differences from the engine, all deliberate:
//! - prevent-rules are checked on the updated state only (`C` and `C'` both
//!   read after the update);
//! - `add` appends to the state list rather than consing onto its front, so
//!   both report facts in insertion order.

use inst_core::constraints::{constraint_member, sat, seteq};
use inst_core::engine::{EngineConfig, EngineError, Event, Firing, TransitionRecord, INSTITUTION};
use inst_core::kernel::{Atom, ConstrainedFormula, Constraint, StateOfAffairs, Substitution, Term, KernelError};
use inst_core::parser::{desugar_expectations, Action, Condition, OpenUnit, Rule, RuleBase};

type Bindings = Vec<(String, Term)>;

fn lookup<'a>(b: &'a Bindings, v: &str) -> Option<&'a Term> {
    b.iter().find(|(k, _)| k == v).map(|(_, t)| t)
}

fn to_subst(b: &Bindings) -> Substitution {
    Substitution::from_pairs(b.iter().cloned()).resolved()
}

fn walk(t: &Term, b: &Bindings) -> Term {
    match t {
        Term::Var(v) => match lookup(b, v) {
            Some(bound) => walk(bound, b),
            None => t.clone(),
        },
        Term::Compound(f, args) => Term::Compound(f.clone(), args.iter().map(|a| walk(a, b)).collect()),
        _ => t.clone(),
    }
}

/// One-way matching of `pattern` onto `target`.
fn match_term(pattern: &Term, target: &Term, b: &Bindings) -> Option<Bindings> {
    match pattern {
        Term::Var(v) => match lookup(b, v) {
            Some(bound) => {
                let bound = walk(bound, b);
                (bound == *target).then(|| b.clone())
            }
            None => {
                if matches!(target, Term::Var(w) if w == v) {
                    return Some(b.clone());
                }
                let mut out = b.clone();
                out.push((v.clone(), target.clone()));
                Some(out)
            }
        },
        Term::Compound(f, args) => match target {
            Term::Compound(g, targs) if f == g && args.len() == targs.len() => {
                let mut cur = b.clone();
                for (p, t) in args.iter().zip(targs) {
                    cur = match_term(p, t, &cur)?;
                }
                Some(cur)
            }
            _ => None,
        },
        _ => (pattern == target).then(|| b.clone()),
    }
}

fn match_atom(pattern: &Atom, target: &Atom, b: &Bindings) -> Option<Bindings> {
    if pattern.pred != target.pred || pattern.args.len() != target.args.len() {
        return None;
    }
    let mut cur = b.clone();
    for (p, t) in pattern.args.iter().zip(&target.args) {
        cur = match_term(p, t, &cur)?;
    }
    Some(cur)
}

fn match_constraint(p: &Constraint, t: &Constraint, b: &Bindings) -> Option<Bindings> {
    if p.op != t.op {
        return None;
    }
    let b = match_term(&p.lhs, &t.lhs, b)?;
    match_term(&p.rhs, &t.rhs, &b)
}

/// Every way of pairing the pattern constraints with distinct targets.
fn match_constraints(ps: &[Constraint], ts: &[Constraint], used: &mut Vec<bool>, b: &Bindings) -> Vec<Bindings> {
    let Some((p, rest)) = ps.split_first() else {
        return vec![b.clone()];
    };
    let mut out = Vec::new();
    for i in 0..ts.len() {
        if used[i] {
            continue;
        }
        if let Some(b1) = match_constraint(p, &ts[i], b) {
            used[i] = true;
            out.extend(match_constraints(rest, ts, used, &b1));
            used[i] = false;
        }
    }
    out
}

fn member_formula(cf: &ConstrainedFormula, state: &[ConstrainedFormula], b: &Bindings) -> Vec<Bindings> {
    let mut out = Vec::new();
    for entry in state {
        if entry.constraints.len() != cf.constraints.len() {
            continue;
        }
        let Some(b1) = match_atom(&cf.atom, &entry.atom, b) else { continue };
        let mut used = vec![false; entry.constraints.len()];
        for b2 in match_constraints(&cf.constraints, &entry.constraints, &mut used, &b1) {
            if to_subst(&b2).apply(cf).same_as(entry) {
                out.push(b2);
                break;
            }
        }
    }
    out
}

/// `subset2(E, Xi)`: every way of finding each pattern in `xi`.
fn subset2(patterns: &[Atom], xi: &[Atom], b: &Bindings) -> Vec<Bindings> {
    match patterns.split_first() {
        None => vec![b.clone()],
        Some((first, rest)) => {
            let mut out = Vec::new();
            for e in xi {
                if let Some(b1) = match_atom(first, e, b) {
                    out.extend(subset2(rest, xi, &b1));
                }
            }
            out
        }
    }
}

fn push_unique<T: PartialEq>(v: &mut Vec<T>, x: T) {
    if !v.contains(&x) {
        v.push(x);
    }
}

struct Interp<'a> {
    cfg: &'a EngineConfig,
    time: i64,
    fired: Vec<(Condition, Vec<Action>)>,
    chain: usize,
    ifs: Vec<(Atom, Condition, Vec<Action>)>,
    ecas: Vec<(Atom, Vec<Atom>, Condition, Vec<Action>)>,
    forces: Vec<(Atom, Vec<Atom>, Vec<Atom>, Condition, Vec<Action>)>,
    ignores: Vec<(Vec<Atom>, Condition)>,
    prevents: Vec<(Condition, Condition)>,
    log_fired: Vec<Firing>,
    log_ignored: Vec<Firing>,
    log_prevented: Vec<Firing>,
}

impl Interp<'_> {
    fn s_l(&self, s: &[ConstrainedFormula], c: &Condition, b: &Bindings) -> Result<Vec<Bindings>, EngineError> {
        let sigma = to_subst(b);
        Ok(match c {
            Condition::Conj(l, r) => {
                let mut out = Vec::new();
                for b1 in self.s_l(s, l, b)? {
                    for b2 in self.s_l(s, r, &b1)? {
                        push_unique(&mut out, b2);
                    }
                }
                out
            }
            Condition::Not(inner) => {
                if self.s_l(s, inner, b)?.is_empty() {
                    vec![b.clone()]
                } else {
                    vec![]
                }
            }
            Condition::SetEq(l, r) => {
                if seteq(&sigma.apply_all(l), &sigma.apply_all(r)) {
                    vec![b.clone()]
                } else {
                    vec![]
                }
            }
            Condition::Sat(cs) => {
                if sat(&sigma.apply_all(cs))? {
                    vec![b.clone()]
                } else {
                    vec![]
                }
            }
            Condition::Member(g, set) => {
                if constraint_member(g, set, &sigma) {
                    vec![b.clone()]
                } else {
                    vec![]
                }
            }
            Condition::Time(t) => match match_term(&walk(t, b), &Term::int(self.time), b) {
                Some(b1) => vec![b1],
                None => vec![],
            },
            Condition::True => vec![b.clone()],
            Condition::Fact(cf) => {
                let mut out = Vec::new();
                for b1 in member_formula(cf, s, b) {
                    push_unique(&mut out, b1);
                }
                out
            }
            Condition::Builtin(name, args) => {
                let builtin =
                    self.cfg.builtins.get(name).ok_or_else(|| EngineError::UnknownBuiltin(name.clone()))?;
                let args: Vec<Term> = args.iter().map(|a| walk(a, b)).collect();
                let k = args.len() - builtin.outputs().min(args.len());
                if let Some(a) = args[..k].iter().find(|a| !a.is_ground()) {
                    return Err(EngineError::NonGroundBuiltinInput { name: name.clone(), arg: a.to_string() });
                }
                let res = builtin
                    .call(&args[..k])
                    .map_err(|message| EngineError::BuiltinFailed { name: name.clone(), message })?;
                match res {
                    None => vec![],
                    Some(outs) => {
                        let mut cur = Some(b.clone());
                        for (pat, val) in args[k..].iter().zip(&outs) {
                            cur = cur.and_then(|c| match_term(pat, val, &c));
                        }
                        cur.into_iter().collect()
                    }
                }
            }
        })
    }

    fn s_r(
        &self,
        s: &mut Vec<ConstrainedFormula>,
        rules: &mut RuleBase,
        actions: &[Action],
    ) -> Result<(), EngineError> {
        for a in actions {
            match a {
                Action::Add(OpenUnit::Fact(cf)) => {
                    let free = cf.free_vars();
                    if !free.is_empty() {
                        return Err(KernelError::NonGroundFact {
                            formula: cf.to_string(),
                            vars: free.into_iter().collect(),
                        }
                        .into());
                    }
                    if !s.iter().any(|e| e.same_as(cf)) {
                        s.push(cf.clone());
                    }
                }
                Action::Del(OpenUnit::Fact(cf)) => {
                    if let Some(i) = s.iter().position(|e| e.same_as(cf)) {
                        s.remove(i);
                    }
                }
                Action::Add(OpenUnit::Rule { id, body }) | Action::Del(OpenUnit::Rule { id, body }) => {
                    if !self.cfg.istar_enabled {
                        return Err(EngineError::IstarDisabled(id.to_string()));
                    }
                    if let Action::Add(_) = a {
                        let body = body.as_ref().ok_or_else(|| EngineError::IstarDisabled(id.to_string()))?;
                        if !rules.contains(id) {
                            rules.insert(id.clone(), (**body).clone());
                        }
                    } else if let Some(stored) = rules.get(id) {
                        if body.as_ref().is_none_or(|b| **b == **stored) {
                            rules.remove(id);
                        }
                    }
                }
                Action::Builtin(name, args) => {
                    let builtin =
                        self.cfg.builtins.get(name).ok_or_else(|| EngineError::UnknownBuiltin(name.clone()))?;
                    let k = args.len() - builtin.outputs().min(args.len());
                    if let Some(a) = args[..k].iter().find(|a| !a.is_ground()) {
                        return Err(EngineError::NonGroundBuiltinInput { name: name.clone(), arg: a.to_string() });
                    }
                    builtin
                        .call(&args[..k])
                        .map_err(|message| EngineError::BuiltinFailed { name: name.clone(), message })?;
                }
            }
        }
        Ok(())
    }

    /// Single-state reading: `C` and `C'` are both checked on `s`.
    fn check_prv(&self, s: &[ConstrainedFormula]) -> Result<bool, EngineError> {
        for (c, c2) in &self.prevents {
            for b in self.s_l(s, c2, &Vec::new())? {
                if !self.s_l(s, c, &b)?.is_empty() {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    fn ignored(&self, s: &[ConstrainedFormula], xi: &[Atom], e: &[Atom]) -> Result<bool, EngineError> {
        for (e2, c) in &self.ignores {
            for b in subset2(e2, xi, &Vec::new()) {
                let sigma = to_subst(&b);
                let intersects = e2.iter().any(|x| e.contains(&sigma.apply(x)));
                if intersects && !self.s_l(s, c, &b)?.is_empty() {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    /// `fire` followed by the prevent check; returns whether it committed.
    fn attempt(
        &mut self,
        s: &mut Vec<ConstrainedFormula>,
        rules: &mut RuleBase,
        id: &Atom,
        b: &Bindings,
        actions: &[Action],
    ) -> Result<bool, EngineError> {
        let mut tmp_s = s.clone();
        let mut tmp_rules = rules.clone();
        self.s_r(&mut tmp_s, &mut tmp_rules, actions)?;
        let firing = Firing { rule_id: id.clone(), substitution: to_subst(b) };
        if self.check_prv(&tmp_s)? {
            *s = tmp_s;
            *rules = tmp_rules;
            self.log_fired.push(firing);
            Ok(true)
        } else {
            self.log_prevented.push(firing);
            Ok(false)
        }
    }

    fn s_if(&mut self, s: &mut Vec<ConstrainedFormula>, rules: &mut RuleBase) -> Result<(), EngineError> {
        loop {
            // select_rule: first rule, first binding, not yet fired.
            let mut selected = None;
            'rules: for (id, c, a) in &self.ifs {
                for b in self.s_l(s, c, &Vec::new())? {
                    let sigma = to_subst(&b);
                    let key = (sigma.apply(c), sigma.apply_all(a));
                    if !self.fired.contains(&key) {
                        selected = Some((id.clone(), b, key));
                        break 'rules;
                    }
                }
            }
            let Some((id, b, key)) = selected else { return Ok(()) };
            self.chain += 1;
            if self.chain > self.cfg.max_chain_iterations {
                return Err(EngineError::ChainLimitExceeded(self.cfg.max_chain_iterations));
            }
            self.fired.push(key.clone());
            self.attempt(s, rules, &id, &b, &key.1)?;
        }
    }

    fn s_prime_r(
        &mut self,
        s: &mut Vec<ConstrainedFormula>,
        rules: &mut RuleBase,
        todo: Vec<(Atom, Bindings, Vec<Action>)>,
    ) -> Result<(), EngineError> {
        for (id, b, actions) in todo {
            if self.attempt(s, rules, &id, &b, &actions)? {
                self.s_if(s, rules)?;
            }
        }
        Ok(())
    }
}

/// One step with the same contract as `inst_core::engine::macro_step`.
pub fn step(
    delta: &StateOfAffairs,
    events: &[Event],
    rules: &RuleBase,
    cfg: &EngineConfig,
    index: usize,
    clock: i64,
) -> Result<(StateOfAffairs, RuleBase, TransitionRecord), EngineError> {
    for e in events {
        if !e.atom.is_ground() {
            return Err(EngineError::NonGroundEvent(e.atom.to_string()));
        }
    }
    let program = desugar_expectations(rules);
    let mut it = Interp {
        cfg,
        time: clock,
        fired: vec![(Condition::Not(Box::new(Condition::True)), vec![])],
        chain: 0,
        ifs: vec![],
        ecas: vec![],
        forces: vec![],
        ignores: vec![],
        prevents: vec![],
        log_fired: vec![],
        log_ignored: vec![],
        log_prevented: vec![],
    };
    for (id, r) in program.iter() {
        match &**r {
            Rule::If { cond, actions } => it.ifs.push((id.clone(), cond.clone(), actions.clone())),
            Rule::Eca { events, cond, actions } => {
                it.ecas.push((id.clone(), events.clone(), cond.clone(), actions.clone()))
            }
            Rule::Force { forced, events, cond, actions } => {
                it.forces.push((id.clone(), forced.clone(), events.clone(), cond.clone(), actions.clone()))
            }
            Rule::Ignore { events, cond } => it.ignores.push((events.clone(), cond.clone())),
            Rule::Prevent { target, cond } => it.prevents.push((target.clone(), cond.clone())),
            Rule::Expectation { .. } => {}
        }
    }

    let mut s: Vec<ConstrainedFormula> = delta.iter().cloned().collect();
    let mut rb = rules.clone();

    // reset, then s_if
    it.s_if(&mut s, &mut rb)?;

    // s_f
    let mut xi_events: Vec<Event> = Vec::new();
    for e in events {
        push_unique(&mut xi_events, e.clone());
    }
    let xi: Vec<Atom> = xi_events.iter().map(|e| e.atom.clone()).collect();
    let snapshot = s.clone();
    let mut eas: Vec<(usize, Atom, Bindings, Vec<Atom>, Vec<Action>)> = Vec::new();
    for (i, (id, fe, e, c, a)) in it.forces.clone().iter().enumerate() {
        for b1 in subset2(e, &xi, &Vec::new()) {
            let trig: Vec<Atom> = e.iter().map(|x| to_subst(&b1).apply(x)).collect();
            for b in it.s_l(&snapshot, c, &b1)? {
                let sigma = to_subst(&b);
                if it.ignored(&snapshot, &xi, &trig)? {
                    push_unique(&mut it.log_ignored, Firing { rule_id: id.clone(), substitution: sigma });
                    continue;
                }
                let fev = sigma.apply_all(fe);
                if let Some(x) = fev.iter().find(|x| !x.is_ground()) {
                    return Err(EngineError::NonGroundEvent(x.to_string()));
                }
                let acts = sigma.apply_all(a);
                if !eas.iter().any(|(j, _, _, f, x)| *j == i && *f == fev && *x == acts) {
                    eas.push((i, id.clone(), b, fev, acts));
                }
            }
        }
    }
    let mut forced = Vec::new();
    for (_, _, _, fev, _) in &eas {
        for atom in fev {
            if !xi_events.iter().any(|e| e.atom == *atom) {
                let ev = Event::new(INSTITUTION, atom.clone());
                xi_events.push(ev.clone());
                forced.push(ev);
            }
        }
    }
    let todo = eas.into_iter().map(|(_, id, b, _, acts)| (id, b, acts)).collect();
    it.s_prime_r(&mut s, &mut rb, todo)?;

    // s_on
    let xi: Vec<Atom> = xi_events.iter().map(|e| e.atom.clone()).collect();
    let snapshot = s.clone();
    let mut found: Vec<(usize, Atom, Bindings, Vec<Action>)> = Vec::new();
    for (i, (id, e, c, a)) in it.ecas.clone().iter().enumerate() {
        for b1 in subset2(e, &xi, &Vec::new()) {
            let trig: Vec<Atom> = e.iter().map(|x| to_subst(&b1).apply(x)).collect();
            for b in it.s_l(&snapshot, c, &b1)? {
                let sigma = to_subst(&b);
                if it.ignored(&snapshot, &xi, &trig)? {
                    push_unique(&mut it.log_ignored, Firing { rule_id: id.clone(), substitution: sigma });
                    continue;
                }
                let acts = sigma.apply_all(a);
                if !found.iter().any(|(j, _, _, x)| *j == i && *x == acts) {
                    found.push((i, id.clone(), b, acts));
                }
            }
        }
    }
    let todo = found.into_iter().map(|(_, id, b, acts)| (id, b, acts)).collect();
    it.s_prime_r(&mut s, &mut rb, todo)?;

    let after = StateOfAffairs::from_formulae(s)?;
    let record = TransitionRecord {
        step: index,
        state_before: delta.clone(),
        events: xi_events,
        forced_events: forced,
        fired: it.log_fired,
        ignored: it.log_ignored,
        prevented: it.log_prevented,
        state_after: after.clone(),
    };
    Ok((after, rb, record))
}

/// Runs a whole trace; stops at the first error.
pub fn run(
    delta: &StateOfAffairs,
    trace: &[Vec<Event>],
    rules: &RuleBase,
    cfg: &EngineConfig,
) -> (Vec<TransitionRecord>, Option<(usize, EngineError)>) {
    let mut records = Vec::new();
    let mut state = delta.clone();
    let mut rb = rules.clone();
    for (i, events) in trace.iter().enumerate() {
        match step(&state, events, &rb, cfg, i, cfg.clock_mode.now(i)) {
            Ok((s, r, rec)) => {
                state = s;
                rb = r;
                records.push(rec);
            }
            Err(e) => return (records, Some((i, e))),
        }
    }
    (records, None)
}
