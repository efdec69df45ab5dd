//! Condition satisfaction, event matching and single actions.

use super::{BuiltinRegistry, EngineError};
use crate::constraints::{constraint_member, sat, seteq};
use crate::kernel::{match_atom, unify_terms, Atom, StateOfAffairs, Substitution, Term};
use crate::parser::{Action, Condition, OpenUnit, Rule, RuleBase};

/// What conditions may consult besides the state of affairs.
#[derive(Clone, Copy, Debug)]
pub struct EvalContext<'a> {
    pub time: i64,
    pub builtins: &'a BuiltinRegistry,
}

/// Every extension of `sigma` under which `cond` holds in `delta`, in
/// evaluation order and without duplicates.
pub fn holds(
    delta: &StateOfAffairs,
    cond: &Condition,
    sigma: &Substitution,
    ctx: &EvalContext<'_>,
) -> Result<Vec<Substitution>, EngineError> {
    let mut out = match cond {
        Condition::Conj(left, right) => {
            let mut out = Vec::new();
            for s1 in holds(delta, left, sigma, ctx)? {
                out.extend(holds(delta, right, &s1, ctx)?);
            }
            out
        }
        Condition::Not(inner) => {
            if holds(delta, inner, sigma, ctx)?.is_empty() {
                vec![sigma.clone()]
            } else {
                Vec::new()
            }
        }
        Condition::Sat(cs) => keep_if(sat(&sigma.apply_all(cs))?, sigma),
        Condition::SetEq(l, r) => keep_if(seteq(&sigma.apply_all(l), &sigma.apply_all(r)), sigma),
        Condition::Member(c, set) => keep_if(constraint_member(c, set, sigma), sigma),
        Condition::Time(t) => {
            let mut s = sigma.clone();
            let now = Term::int(ctx.time);
            if unify_terms(&sigma.apply(t), &now, &mut s) {
                vec![s]
            } else {
                Vec::new()
            }
        }
        Condition::True => vec![sigma.clone()],
        Condition::Fact(cf) => delta.match_formula_with(cf, sigma),
        Condition::Builtin(name, args) => call_builtin(name, args, sigma, ctx)?.into_iter().collect(),
    };
    dedup(&mut out);
    Ok(out)
}

fn keep_if(ok: bool, sigma: &Substitution) -> Vec<Substitution> {
    if ok {
        vec![sigma.clone()]
    } else {
        Vec::new()
    }
}

/// Removes later duplicates, keeping first-occurrence order.
pub(crate) fn dedup<T: PartialEq>(items: &mut Vec<T>) {
    let mut i = 0;
    while i < items.len() {
        if items[..i].contains(&items[i]) {
            items.remove(i);
        } else {
            i += 1;
        }
    }
}

/// Runs a builtin; `Ok(None)` when it fails or its outputs do not unify.
fn call_builtin(
    name: &str,
    args: &[Term],
    sigma: &Substitution,
    ctx: &EvalContext<'_>,
) -> Result<Option<Substitution>, EngineError> {
    let builtin = ctx.builtins.get(name).ok_or_else(|| EngineError::UnknownBuiltin(name.to_string()))?;
    let args = sigma.apply_all(args);
    let n_out = builtin.outputs().min(args.len());
    let (inputs, outputs) = args.split_at(args.len() - n_out);
    if let Some(arg) = inputs.iter().find(|t| !t.is_ground()) {
        return Err(EngineError::NonGroundBuiltinInput { name: name.to_string(), arg: arg.to_string() });
    }
    let results = builtin
        .call(inputs)
        .map_err(|message| EngineError::BuiltinFailed { name: name.to_string(), message })?;
    let Some(results) = results else {
        return Ok(None);
    };
    if results.len() != outputs.len() {
        return Err(EngineError::BuiltinFailed {
            name: name.to_string(),
            message: format!("returned {} output(s), expected {}", results.len(), outputs.len()),
        });
    }
    let mut s = sigma.clone();
    for (out, value) in outputs.iter().zip(&results) {
        if !unify_terms(out, value, &mut s) {
            return Ok(None);
        }
    }
    Ok(Some(s))
}

/// All extensions of `sigma` mapping every pattern into `xi`.
/// Distinct patterns may map to the same event.
pub fn match_events(patterns: &[Atom], xi: &[Atom], sigma: &Substitution) -> Vec<Substitution> {
    let Some((first, rest)) = patterns.split_first() else {
        return vec![sigma.clone()];
    };
    let mut out = Vec::new();
    for event in xi {
        if let Some(s) = match_atom(first, event, sigma) {
            out.extend(match_events(rest, xi, &s));
        }
    }
    dedup(&mut out);
    out
}

/// Whether some `ignore E' if C` has `E'·s ⊆ xi`, `E'·s` meeting `triggers`,
/// and `C·s` holding in `delta`.
pub fn ignored(
    delta: &StateOfAffairs,
    xi: &[Atom],
    triggers: &[Atom],
    ignore_rules: &[(Vec<Atom>, Condition)],
    ctx: &EvalContext<'_>,
) -> Result<bool, EngineError> {
    for (patterns, cond) in ignore_rules {
        for s in match_events(patterns, xi, &Substitution::new()) {
            let meets = patterns.iter().any(|p| triggers.contains(&s.apply(p)));
            if meets && !holds(delta, cond, &s, ctx)?.is_empty() {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// `true` when no prevent rule `prevent C if C'` has `C'` holding before and
/// `C` (under the bindings of `C'`) holding after.
pub fn check_prv(
    before: &StateOfAffairs,
    after: &StateOfAffairs,
    prevent_rules: &[(Condition, Condition)],
    ctx: &EvalContext<'_>,
) -> Result<bool, EngineError> {
    for (target, cond) in prevent_rules {
        for s in holds(before, cond, &Substitution::new(), ctx)? {
            if !holds(after, target, &s, ctx)?.is_empty() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Applies one action, already instantiated, to `delta` and `rules` in place.
pub fn apply_action(
    delta: &mut StateOfAffairs,
    rules: &mut RuleBase,
    action: &Action,
    istar_enabled: bool,
    ctx: &EvalContext<'_>,
) -> Result<(), EngineError> {
    match action {
        Action::Add(OpenUnit::Fact(cf)) => {
            delta.add(cf.clone())?;
        }
        Action::Del(OpenUnit::Fact(cf)) => {
            delta.del(cf);
        }
        Action::Add(OpenUnit::Rule { id, body }) => {
            if !istar_enabled {
                return Err(EngineError::IstarDisabled(id.to_string()));
            }
            let Some(body) = body else {
                return Err(EngineError::IstarDisabled(format!("{id} (no rule body to add)")));
            };
            rules.insert(id.clone(), Rule::clone(body));
        }
        Action::Del(OpenUnit::Rule { id, body }) => {
            if !istar_enabled {
                return Err(EngineError::IstarDisabled(id.to_string()));
            }
            let matches = match (body, rules.get(id)) {
                (_, None) => false,
                (None, Some(_)) => true,
                (Some(body), Some(stored)) => **body == **stored,
            };
            if matches {
                rules.remove(id);
            }
        }
        Action::Builtin(name, args) => {
            call_builtin(name, args, &Substitution::new(), ctx)?;
        }
    }
    Ok(())
}
