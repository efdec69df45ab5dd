//! Expectation rules become three plain rules:
//!
//! ```text
//! on E if C do add(exp(ev))                     % <id>-add
//! if exp(ev) & C' do del(exp(ev))               % <id>-fulfil
//! if exp(ev) & C'' do del(exp(ev)), A           % <id>-sanction
//! ```
//!
//! Rule-valued `add`/`del` actions carrying an expectation body are expanded
//! the same way. `del(rule(Id, _))` is left alone.

use std::collections::HashSet;
use std::sync::Arc;

use super::ast::{Action, Condition, OpenUnit, Rule, RuleBase};
use crate::kernel::{Atom, ConstrainedFormula};

const SUFFIXES: [&str; 3] = ["add", "fulfil", "sanction"];

pub fn desugar_expectations(rb: &RuleBase) -> RuleBase {
    let mut taken: HashSet<Atom> = rb.ids().cloned().collect();
    let mut out = RuleBase::new();
    for (id, rule) in rb.iter() {
        if !mentions_expectation(rule) {
            out.insert_arc(id.clone(), Arc::clone(rule));
            continue;
        }
        for (new_id, new_rule) in expand(id, rule, &mut taken) {
            out.insert(new_id, new_rule);
        }
    }
    out
}

fn mentions_expectation(rule: &Rule) -> bool {
    let acts = match rule {
        Rule::Expectation { .. } => return true,
        Rule::Eca { actions, .. } | Rule::If { actions, .. } | Rule::Force { actions, .. } => actions,
        Rule::Ignore { .. } | Rule::Prevent { .. } => return false,
    };
    acts.iter().any(|a| match a {
        Action::Add(OpenUnit::Rule { body: Some(r), .. }) | Action::Del(OpenUnit::Rule { body: Some(r), .. }) => {
            mentions_expectation(r)
        }
        _ => false,
    })
}

fn fresh_id(id: &Atom, suffix: &str, taken: &mut HashSet<Atom>) -> Atom {
    let base = format!("{}-{suffix}", id.pred);
    let mut candidate = Atom::new(base.clone(), id.args.clone());
    let mut n = 2;
    while taken.contains(&candidate) {
        candidate = Atom::new(format!("{base}{n}"), id.args.clone());
        n += 1;
    }
    taken.insert(candidate.clone());
    candidate
}

/// Expands one rule into its desugared replacement(s).
fn expand(id: &Atom, rule: &Rule, taken: &mut HashSet<Atom>) -> Vec<(Atom, Rule)> {
    match rule {
        Rule::Expectation { event, events, cond, fulfilled, violated, sanction } => {
            let exp = ConstrainedFormula::bare(Atom::new("exp", vec![event.to_term()]));
            let ids: Vec<Atom> = SUFFIXES.iter().map(|s| fresh_id(id, s, taken)).collect();
            let mut sanction_actions = vec![Action::Del(OpenUnit::Fact(exp.clone()))];
            sanction_actions.extend(sanction.iter().flat_map(|a| desugar_action(a, taken)));
            vec![
                (
                    ids[0].clone(),
                    Rule::Eca {
                        events: events.clone(),
                        cond: cond.clone(),
                        actions: vec![Action::Add(OpenUnit::Fact(exp.clone()))],
                    },
                ),
                (
                    ids[1].clone(),
                    Rule::If {
                        cond: Condition::conj(vec![Condition::Fact(exp.clone()), fulfilled.clone()]),
                        actions: vec![Action::Del(OpenUnit::Fact(exp.clone()))],
                    },
                ),
                (
                    ids[2].clone(),
                    Rule::If {
                        cond: Condition::conj(vec![Condition::Fact(exp), violated.clone()]),
                        actions: sanction_actions,
                    },
                ),
            ]
        }
        Rule::Eca { events, cond, actions } => vec![(
            id.clone(),
            Rule::Eca { events: events.clone(), cond: cond.clone(), actions: desugar_actions(actions, taken) },
        )],
        Rule::If { cond, actions } => {
            vec![(id.clone(), Rule::If { cond: cond.clone(), actions: desugar_actions(actions, taken) })]
        }
        Rule::Force { forced, events, cond, actions } => vec![(
            id.clone(),
            Rule::Force {
                forced: forced.clone(),
                events: events.clone(),
                cond: cond.clone(),
                actions: desugar_actions(actions, taken),
            },
        )],
        other => vec![(id.clone(), other.clone())],
    }
}

fn desugar_actions(actions: &[Action], taken: &mut HashSet<Atom>) -> Vec<Action> {
    actions.iter().flat_map(|a| desugar_action(a, taken)).collect()
}

fn desugar_action(action: &Action, taken: &mut HashSet<Atom>) -> Vec<Action> {
    let (is_add, id, body) = match action {
        Action::Add(OpenUnit::Rule { id, body: Some(body) }) => (true, id, body),
        Action::Del(OpenUnit::Rule { id, body: Some(body) }) => (false, id, body),
        other => return vec![other.clone()],
    };
    if !mentions_expectation(body) {
        return vec![action.clone()];
    }
    expand(id, body, taken)
        .into_iter()
        .map(|(id, rule)| {
            let unit = OpenUnit::Rule { id, body: Some(Box::new(rule)) };
            if is_add {
                Action::Add(unit)
            } else {
                Action::Del(unit)
            }
        })
        .collect()
}
