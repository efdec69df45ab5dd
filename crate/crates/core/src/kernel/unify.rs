//! Most-general unification and one-way matching.

use super::subst::Substitution;
use super::term::{Atom, ConstrainedFormula, Constraint, Term};

fn walk<'a>(t: &'a Term, sigma: &'a Substitution) -> &'a Term {
    let mut cur = t;
    while let Term::Var(v) = cur {
        match sigma.get(v) {
            Some(next) => cur = next,
            None => break,
        }
    }
    cur
}

fn occurs_resolved(var: &str, t: &Term, sigma: &Substitution) -> bool {
    match walk(t, sigma) {
        Term::Var(v) => v == var,
        Term::Const(_) | Term::Num(_) => false,
        Term::Compound(_, args) => args.iter().any(|a| occurs_resolved(var, a, sigma)),
    }
}

/// Extends `sigma` so that `a·sigma = b·sigma`. Returns false (leaving
/// `sigma` partially extended) when no unifier exists.
pub fn unify_terms(a: &Term, b: &Term, sigma: &mut Substitution) -> bool {
    let a = walk(a, sigma).clone();
    let b = walk(b, sigma).clone();
    match (&a, &b) {
        (Term::Var(x), Term::Var(y)) if x == y => true,
        (Term::Var(x), other) | (other, Term::Var(x)) => {
            if occurs_resolved(x, other, sigma) {
                return false;
            }
            sigma.bind(x.clone(), other.clone());
            true
        }
        (Term::Compound(f, xs), Term::Compound(g, ys)) => {
            f == g
                && xs.len() == ys.len()
                && xs.iter().zip(ys).all(|(x, y)| unify_terms(x, y, sigma))
        }
        _ => a == b,
    }
}

pub fn unify_atoms_with(a: &Atom, b: &Atom, sigma: &Substitution) -> Option<Substitution> {
    if a.pred != b.pred || a.args.len() != b.args.len() {
        return None;
    }
    let mut s = sigma.clone();
    a.args
        .iter()
        .zip(&b.args)
        .all(|(x, y)| unify_terms(x, y, &mut s))
        .then_some(s)
}

/// Most general unifier of two atomic formulae, with occurs-check.
pub fn unify(pattern: &Atom, target: &Atom) -> Option<Substitution> {
    unify_atoms_with(pattern, target, &Substitution::new())
}

/// One-way matching: binds variables of `pattern` only; the variables of
/// `target` are treated as rigid names.
pub fn match_term(pattern: &Term, target: &Term, sigma: &mut Substitution) -> bool {
    match pattern {
        Term::Var(v) => match sigma.get(v) {
            Some(bound) => sigma.apply(bound) == *target,
            None => {
                if target.occurs(v) || occurs_resolved(v, target, sigma) {
                    // Would make the substitution cyclic.
                    return matches!(target, Term::Var(t) if t == v);
                }
                sigma.bind(v.clone(), target.clone());
                true
            }
        },
        Term::Const(_) | Term::Num(_) => pattern == target,
        Term::Compound(f, xs) => match target {
            Term::Compound(g, ys) if f == g && xs.len() == ys.len() => {
                xs.iter().zip(ys).all(|(x, y)| match_term(x, y, sigma))
            }
            _ => false,
        },
    }
}

pub fn match_atom(pattern: &Atom, target: &Atom, sigma: &Substitution) -> Option<Substitution> {
    if pattern.pred != target.pred || pattern.args.len() != target.args.len() {
        return None;
    }
    let mut s = sigma.clone();
    pattern
        .args
        .iter()
        .zip(&target.args)
        .all(|(x, y)| match_term(x, y, &mut s))
        .then_some(s)
}

fn match_constraint(p: &Constraint, t: &Constraint, sigma: &Substitution) -> Option<Substitution> {
    if p.op != t.op {
        return None;
    }
    let mut s = sigma.clone();
    (match_term(&p.lhs, &t.lhs, &mut s) && match_term(&p.rhs, &t.rhs, &mut s)).then_some(s)
}

fn match_constraint_multiset(
    pattern: &[Constraint],
    target: &[Constraint],
    used: &mut Vec<bool>,
    sigma: &Substitution,
) -> Option<Substitution> {
    let Some((first, rest)) = pattern.split_first() else {
        return Some(sigma.clone());
    };
    for (j, t) in target.iter().enumerate() {
        if used[j] {
            continue;
        }
        if let Some(s) = match_constraint(first, t, sigma) {
            used[j] = true;
            if let Some(done) = match_constraint_multiset(rest, target, used, &s) {
                return Some(done);
            }
            used[j] = false;
        }
    }
    None
}

/// Matches a constrained formula against a stored one: atoms match and the
/// constraint multisets coincide after substitution. The first pairing of
/// constraints found is returned.
pub fn match_formula(
    pattern: &ConstrainedFormula,
    target: &ConstrainedFormula,
    sigma: &Substitution,
) -> Option<Substitution> {
    if pattern.constraints.len() != target.constraints.len() {
        return None;
    }
    let s = match_atom(&pattern.atom, &target.atom, sigma)?;
    let mut used = vec![false; target.constraints.len()];
    let s = match_constraint_multiset(&pattern.constraints, &target.constraints, &mut used, &s)?;
    // Guards against name clashes between pattern and stored variables.
    s.apply(pattern).same_as(target).then_some(s)
}
