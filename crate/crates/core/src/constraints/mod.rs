//! Ground arithmetic, constraint satisfiability and the set primitives used
//! by conditions.

mod solver;

pub use solver::{sat, Normalized};

use num_traits::Zero;
use thiserror::Error;

use crate::kernel::{Constraint, Number, RelOp, Substitution, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstraintError {
    #[error("division by zero in `{0}`")]
    DivisionByZero(String),
    #[error("free variable `{0}` in arithmetic expression")]
    NonGround(String),
    #[error("`{0}` is not an arithmetic function")]
    UnknownFunctor(String),
    #[error("ordered comparison `{0}` between non-numbers")]
    TypeMismatch(String),
    #[error("constraint `{0}` is outside the supported fragment (bounds and differences)")]
    UnsupportedConstraint(String),
}

/// Evaluates a ground arithmetic term to an exact rational.
pub fn eval_term(t: &Term) -> Result<Number, ConstraintError> {
    match t {
        Term::Num(n) => Ok(n.clone()),
        Term::Var(v) => Err(ConstraintError::NonGround(v.clone())),
        Term::Const(c) => Err(ConstraintError::UnknownFunctor(format!("{c}/0"))),
        Term::Compound(f, args) => match (f.as_str(), args.as_slice()) {
            ("-", [a]) => Ok(-eval_term(a)?),
            ("+", [a, b]) => Ok(eval_term(a)? + eval_term(b)?),
            ("-", [a, b]) => Ok(eval_term(a)? - eval_term(b)?),
            ("*", [a, b]) => Ok(eval_term(a)? * eval_term(b)?),
            ("/", [a, b]) => {
                let num = eval_term(a)?;
                let den = eval_term(b)?;
                if den.is_zero() {
                    return Err(ConstraintError::DivisionByZero(t.to_string()));
                }
                Ok(num / den)
            }
            _ => Err(ConstraintError::UnknownFunctor(format!("{f}/{}", args.len()))),
        },
    }
}

/// Decides a ground constraint. Numbers compare as rationals; other ground
/// terms support only `=` and `!=`, by syntactic identity.
pub fn holds_constraint(c: &Constraint) -> Result<bool, ConstraintError> {
    if !c.is_ground() {
        let mut vars = std::collections::BTreeSet::new();
        c.collect_vars(&mut vars);
        return Err(ConstraintError::NonGround(vars.into_iter().next().unwrap_or_default()));
    }
    match (eval_term(&c.lhs), eval_term(&c.rhs)) {
        (Ok(a), Ok(b)) => Ok(c.op.compare(&a, &b)),
        (Err(e @ ConstraintError::DivisionByZero(_)), _) | (_, Err(e @ ConstraintError::DivisionByZero(_))) => {
            Err(e)
        }
        _ if c.op.is_ordering() => Err(ConstraintError::TypeMismatch(c.to_string())),
        _ => Ok(match c.op {
            RelOp::Eq => c.lhs == c.rhs,
            _ => c.lhs != c.rhs,
        }),
    }
}

/// Set equality over ground terms: mutual inclusion and equal
/// cardinality.
pub fn seteq(left: &[Term], right: &[Term]) -> bool {
    left.len() == right.len()
        && left.iter().all(|x| right.contains(x))
        && right.iter().all(|x| left.contains(x))
}

/// Syntactic membership of `gamma·sigma` in `set·sigma`.
pub fn constraint_member(gamma: &Constraint, set: &[Constraint], sigma: &Substitution) -> bool {
    let needle = sigma.apply(gamma);
    set.iter().any(|c| sigma.apply(c) == needle)
}
