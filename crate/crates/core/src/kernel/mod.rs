//! Terms, atomic and constrained formulae, substitutions, unification and
//! the state of affairs.

mod state;
mod subst;
mod term;
mod unify;

pub use state::StateOfAffairs;
pub use subst::{Substitutable, Substitution};
pub use term::{
    format_number, is_plain_name, write_name, Atom, ConstrainedFormula, Constraint, Number, RelOp,
    Term, ARITH_OPS, RESERVED, TUPLE,
};
pub(crate) use term::write_constraint_set;
pub use unify::{match_atom, match_formula, match_term, unify, unify_atoms_with, unify_terms};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KernelError {
    #[error("cannot store `{formula}`: free variable(s) {}", vars.join(", "))]
    NonGroundFact { formula: String, vars: Vec<String> },
}

/// Applies `sigma` to any substitutable item.
pub fn apply_subst<T: Substitutable>(item: &T, sigma: &Substitution) -> T {
    item.subst(sigma)
}

/// All substitutions under which `cf` names an entry of `state`, in entry order.
pub fn match_in_state(state: &StateOfAffairs, cf: &ConstrainedFormula) -> Vec<Substitution> {
    state.match_formula(cf)
}

pub fn state_add(state: &StateOfAffairs, cf: ConstrainedFormula) -> Result<StateOfAffairs, KernelError> {
    state.with_added(cf)
}

pub fn state_del(state: &StateOfAffairs, cf: &ConstrainedFormula) -> StateOfAffairs {
    state.with_removed(cf)
}
