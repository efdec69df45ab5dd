use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::kernel::{
    write_constraint_set, write_name, Atom, ConstrainedFormula, Constraint, Substitutable, Substitution,
    Term,
};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    Conj(Box<Condition>, Box<Condition>),
    Not(Box<Condition>),
    Sat(Vec<Constraint>),
    SetEq(Vec<Term>, Vec<Term>),
    Member(Constraint, Vec<Constraint>),
    Time(Term),
    True,
    Fact(ConstrainedFormula),
    Builtin(String, Vec<Term>),
}

impl Condition {
    /// Right-nested conjunction of `parts`; `true` when empty.
    pub fn conj(parts: Vec<Condition>) -> Condition {
        let mut iter = parts.into_iter().rev();
        let Some(mut acc) = iter.next() else {
            return Condition::True;
        };
        for c in iter {
            acc = Condition::Conj(Box::new(c), Box::new(acc));
        }
        acc
    }

    pub fn fact(atom: Atom) -> Condition {
        Condition::Fact(atom.into())
    }

    /// Left-to-right conjuncts of a conjunction tree.
    pub fn conjuncts(&self) -> Vec<&Condition> {
        match self {
            Condition::Conj(a, b) => {
                let mut out = a.conjuncts();
                out.extend(b.conjuncts());
                out
            }
            other => vec![other],
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Condition::Conj(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Condition::Not(c) => c.collect_vars(out),
            Condition::Sat(cs) => cs.iter().for_each(|c| c.collect_vars(out)),
            Condition::SetEq(l, r) => l.iter().chain(r).for_each(|t| t.collect_vars(out)),
            Condition::Member(c, cs) => {
                c.collect_vars(out);
                cs.iter().for_each(|c| c.collect_vars(out));
            }
            Condition::Time(t) => t.collect_vars(out),
            Condition::True => {}
            Condition::Fact(cf) => out.extend(cf.vars()),
            Condition::Builtin(_, args) => args.iter().for_each(|t| t.collect_vars(out)),
        }
    }
}

/// What `add`/`del` operate on: a fact, or under the runtime rule-management
/// extension a whole rule. `body: None` is the `_` wildcard of `del`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpenUnit {
    Fact(ConstrainedFormula),
    Rule { id: Atom, body: Option<Box<Rule>> },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Add(OpenUnit),
    Del(OpenUnit),
    Builtin(String, Vec<Term>),
}

impl Action {
    pub fn add(cf: impl Into<ConstrainedFormula>) -> Action {
        Action::Add(OpenUnit::Fact(cf.into()))
    }

    pub fn del(cf: impl Into<ConstrainedFormula>) -> Action {
        Action::Del(OpenUnit::Fact(cf.into()))
    }

    pub fn is_rule_action(&self) -> bool {
        matches!(self, Action::Add(OpenUnit::Rule { .. }) | Action::Del(OpenUnit::Rule { .. }))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    Eca { events: Vec<Atom>, cond: Condition, actions: Vec<Action> },
    If { cond: Condition, actions: Vec<Action> },
    Ignore { events: Vec<Atom>, cond: Condition },
    Prevent { target: Condition, cond: Condition },
    Force { forced: Vec<Atom>, events: Vec<Atom>, cond: Condition, actions: Vec<Action> },
    Expectation {
        event: Atom,
        events: Vec<Atom>,
        cond: Condition,
        fulfilled: Condition,
        violated: Condition,
        sanction: Vec<Action>,
    },
}

impl Rule {
    pub fn kind(&self) -> &'static str {
        match self {
            Rule::Eca { .. } => "on",
            Rule::If { .. } => "if",
            Rule::Ignore { .. } => "ignore",
            Rule::Prevent { .. } => "prevent",
            Rule::Force { .. } => "force",
            Rule::Expectation { .. } => "expected",
        }
    }

    /// Every atomic formula mentioned, for arity checks.
    pub(crate) fn visit_atoms<'a>(&'a self, f: &mut impl FnMut(&'a Atom)) {
        fn cond<'a>(c: &'a Condition, f: &mut impl FnMut(&'a Atom)) {
            match c {
                Condition::Conj(a, b) => {
                    cond(a, f);
                    cond(b, f);
                }
                Condition::Not(c) => cond(c, f),
                Condition::Fact(cf) => f(&cf.atom),
                _ => {}
            }
        }
        fn actions<'a>(acts: &'a [Action], f: &mut impl FnMut(&'a Atom)) {
            for a in acts {
                match a {
                    Action::Add(OpenUnit::Fact(cf)) | Action::Del(OpenUnit::Fact(cf)) => f(&cf.atom),
                    Action::Add(OpenUnit::Rule { body: Some(r), .. })
                    | Action::Del(OpenUnit::Rule { body: Some(r), .. }) => r.visit_atoms(f),
                    _ => {}
                }
            }
        }
        match self {
            Rule::Eca { events, cond: c, actions: a } => {
                events.iter().for_each(&mut *f);
                cond(c, f);
                actions(a, f);
            }
            Rule::If { cond: c, actions: a } => {
                cond(c, f);
                actions(a, f);
            }
            Rule::Ignore { events, cond: c } => {
                events.iter().for_each(&mut *f);
                cond(c, f);
            }
            Rule::Prevent { target, cond: c } => {
                cond(target, f);
                cond(c, f);
            }
            Rule::Force { forced, events, cond: c, actions: a } => {
                forced.iter().chain(events).for_each(&mut *f);
                cond(c, f);
                actions(a, f);
            }
            Rule::Expectation { event, events, cond: c, fulfilled, violated, sanction } => {
                f(event);
                events.iter().for_each(&mut *f);
                cond(c, f);
                cond(fulfilled, f);
                cond(violated, f);
                actions(sanction, f);
            }
        }
    }
}

/// Rules keyed by id in declaration order, which is also firing priority.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RuleBase {
    entries: Vec<(Atom, Arc<Rule>)>,
}

impl RuleBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Atom, &Arc<Rule>)> {
        self.entries.iter().map(|(id, r)| (id, r))
    }

    pub fn get(&self, id: &Atom) -> Option<&Arc<Rule>> {
        self.entries.iter().find(|(i, _)| i == id).map(|(_, r)| r)
    }

    pub fn contains(&self, id: &Atom) -> bool {
        self.get(id).is_some()
    }

    /// Appends a rule. Returns false, leaving the base unchanged, when the id
    /// is already taken.
    pub fn insert(&mut self, id: Atom, rule: Rule) -> bool {
        self.insert_arc(id, Arc::new(rule))
    }

    pub fn insert_arc(&mut self, id: Atom, rule: Arc<Rule>) -> bool {
        if self.contains(&id) {
            return false;
        }
        self.entries.push((id, rule));
        true
    }

    pub fn remove(&mut self, id: &Atom) -> Option<Arc<Rule>> {
        let pos = self.entries.iter().position(|(i, _)| i == id)?;
        Some(self.entries.remove(pos).1)
    }

    pub fn ids(&self) -> impl Iterator<Item = &Atom> {
        self.entries.iter().map(|(id, _)| id)
    }
}

impl FromIterator<(Atom, Rule)> for RuleBase {
    /// Later duplicates of an id are dropped.
    fn from_iter<I: IntoIterator<Item = (Atom, Rule)>>(iter: I) -> Self {
        let mut rb = RuleBase::new();
        for (id, rule) in iter {
            rb.insert(id, rule);
        }
        rb
    }
}

// --- substitution -----------------------------------------------------------

impl Substitutable for Condition {
    fn subst(&self, s: &Substitution) -> Condition {
        match self {
            Condition::Conj(a, b) => Condition::Conj(a.subst(s), b.subst(s)),
            Condition::Not(c) => Condition::Not(c.subst(s)),
            Condition::Sat(cs) => Condition::Sat(cs.subst(s)),
            Condition::SetEq(l, r) => Condition::SetEq(l.subst(s), r.subst(s)),
            Condition::Member(c, cs) => Condition::Member(c.subst(s), cs.subst(s)),
            Condition::Time(t) => Condition::Time(t.subst(s)),
            Condition::True => Condition::True,
            Condition::Fact(cf) => Condition::Fact(cf.subst(s)),
            Condition::Builtin(n, args) => Condition::Builtin(n.clone(), args.subst(s)),
        }
    }
}

impl Substitutable for OpenUnit {
    fn subst(&self, s: &Substitution) -> OpenUnit {
        match self {
            OpenUnit::Fact(cf) => OpenUnit::Fact(cf.subst(s)),
            OpenUnit::Rule { id, body } => OpenUnit::Rule {
                id: id.subst(s),
                body: body.as_ref().map(|b| b.subst(s)),
            },
        }
    }
}

impl Substitutable for Action {
    fn subst(&self, s: &Substitution) -> Action {
        match self {
            Action::Add(u) => Action::Add(u.subst(s)),
            Action::Del(u) => Action::Del(u.subst(s)),
            Action::Builtin(n, args) => Action::Builtin(n.clone(), args.subst(s)),
        }
    }
}

impl Substitutable for Rule {
    fn subst(&self, s: &Substitution) -> Rule {
        match self {
            Rule::Eca { events, cond, actions } => Rule::Eca {
                events: events.subst(s),
                cond: cond.subst(s),
                actions: actions.subst(s),
            },
            Rule::If { cond, actions } => Rule::If { cond: cond.subst(s), actions: actions.subst(s) },
            Rule::Ignore { events, cond } => Rule::Ignore { events: events.subst(s), cond: cond.subst(s) },
            Rule::Prevent { target, cond } => Rule::Prevent { target: target.subst(s), cond: cond.subst(s) },
            Rule::Force { forced, events, cond, actions } => Rule::Force {
                forced: forced.subst(s),
                events: events.subst(s),
                cond: cond.subst(s),
                actions: actions.subst(s),
            },
            Rule::Expectation { event, events, cond, fulfilled, violated, sanction } => Rule::Expectation {
                event: event.subst(s),
                events: events.subst(s),
                cond: cond.subst(s),
                fulfilled: fulfilled.subst(s),
                violated: violated.subst(s),
                sanction: sanction.subst(s),
            },
        }
    }
}

// --- canonical rendering ----------------------------------------------------

fn write_list<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T], sep: &str) -> fmt::Result {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        write!(f, "{item}")?;
    }
    Ok(())
}

fn write_events(f: &mut fmt::Formatter<'_>, events: &[Atom]) -> fmt::Result {
    if events.is_empty() {
        f.write_str("[]")
    } else {
        write_list(f, events, ", ")
    }
}

fn write_actions(f: &mut fmt::Formatter<'_>, actions: &[Action]) -> fmt::Result {
    if actions.is_empty() {
        f.write_str("[]")
    } else {
        write_list(f, actions, ", ")
    }
}

fn write_builtin(f: &mut fmt::Formatter<'_>, name: &str, args: &[Term]) -> fmt::Result {
    f.write_str("builtin(")?;
    write_name(f, name)?;
    for a in args {
        write!(f, ", {a}")?;
    }
    f.write_str(")")
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Conj(a, b) => {
                if matches!(**a, Condition::Conj(..)) {
                    write!(f, "({a}) & {b}")
                } else {
                    write!(f, "{a} & {b}")
                }
            }
            Condition::Not(c) => write!(f, "not({c})"),
            Condition::Sat(cs) => {
                f.write_str("sat(")?;
                write_constraint_set(f, cs)?;
                f.write_str(")")
            }
            Condition::SetEq(l, r) => {
                f.write_str("seteq([")?;
                write_list(f, l, ",")?;
                f.write_str("], [")?;
                write_list(f, r, ",")?;
                f.write_str("])")
            }
            Condition::Member(c, cs) => {
                write!(f, "{c} in ")?;
                write_constraint_set(f, cs)
            }
            Condition::Time(t) => write!(f, "time({t})"),
            Condition::True => f.write_str("true"),
            Condition::Fact(cf) => write!(f, "{cf}"),
            Condition::Builtin(name, args) => write_builtin(f, name, args),
        }
    }
}

impl fmt::Display for OpenUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpenUnit::Fact(cf) => write!(f, "{cf}"),
            OpenUnit::Rule { id, body: Some(body) } => write!(f, "rule({id}, {body})"),
            OpenUnit::Rule { id, body: None } => write!(f, "rule({id}, _)"),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Add(u) => write!(f, "add({u})"),
            Action::Del(u) => write!(f, "del({u})"),
            Action::Builtin(name, args) => write_builtin(f, name, args),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::Eca { events, cond, actions } => {
                f.write_str("on ")?;
                write_events(f, events)?;
                write!(f, " if {cond} do ")?;
                write_actions(f, actions)
            }
            Rule::If { cond, actions } => {
                write!(f, "if {cond} do ")?;
                write_actions(f, actions)
            }
            Rule::Ignore { events, cond } => {
                f.write_str("ignore ")?;
                write_events(f, events)?;
                write!(f, " if {cond}")
            }
            Rule::Prevent { target, cond } => write!(f, "prevent {target} if {cond}"),
            Rule::Force { forced, events, cond, actions } => {
                f.write_str("force ")?;
                write_events(f, forced)?;
                f.write_str(" on ")?;
                write_events(f, events)?;
                write!(f, " if {cond} do ")?;
                write_actions(f, actions)
            }
            Rule::Expectation { event, events, cond, fulfilled, violated, sanction } => {
                write!(f, "expected {event} on ")?;
                write_events(f, events)?;
                write!(f, " if {cond} fulfilled-if {fulfilled} violated-if {violated} sanction-do ")?;
                write_actions(f, sanction)
            }
        }
    }
}

impl fmt::Display for RuleBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (id, rule) in &self.entries {
            writeln!(f, "rule({id}, {rule}).")?;
        }
        Ok(())
    }
}
