use std::fmt;

use indexmap::IndexMap;

use super::subst::Substitution;
use super::term::{Atom, ConstrainedFormula, Constraint};
use super::unify::match_formula;
use super::KernelError;

type Key = (Atom, Vec<Constraint>);

/// The institution's current facts (Δ): an insertion-ordered set of
/// constrained formulae without syntactic duplicates.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StateOfAffairs {
    entries: IndexMap<Key, ConstrainedFormula>,
}

impl StateOfAffairs {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a state from formulae, dropping later duplicates.
    pub fn from_formulae<I>(formulae: I) -> Result<Self, KernelError>
    where
        I: IntoIterator<Item = ConstrainedFormula>,
    {
        let mut state = StateOfAffairs::new();
        for cf in formulae {
            state.add(cf)?;
        }
        Ok(state)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ConstrainedFormula> {
        self.entries.values()
    }

    pub fn contains(&self, cf: &ConstrainedFormula) -> bool {
        self.entries.contains_key(&cf.canonical_key())
    }

    /// Appends `cf` unless an identical entry exists. Returns whether the
    /// state changed.
    pub fn add(&mut self, cf: ConstrainedFormula) -> Result<bool, KernelError> {
        let free = cf.free_vars();
        if !free.is_empty() {
            return Err(KernelError::NonGroundFact {
                formula: cf.to_string(),
                vars: free.into_iter().collect(),
            });
        }
        let key = cf.canonical_key();
        if self.entries.contains_key(&key) {
            return Ok(false);
        }
        self.entries.insert(key, cf);
        Ok(true)
    }

    /// Removes the identical entry if present, keeping the order of the rest.
    pub fn del(&mut self, cf: &ConstrainedFormula) -> bool {
        self.entries.shift_remove(&cf.canonical_key()).is_some()
    }

    pub fn with_added(&self, cf: ConstrainedFormula) -> Result<Self, KernelError> {
        let mut next = self.clone();
        next.add(cf)?;
        Ok(next)
    }

    pub fn with_removed(&self, cf: &ConstrainedFormula) -> Self {
        let mut next = self.clone();
        next.del(cf);
        next
    }

    /// One substitution per entry that `cf` matches, in insertion order.
    pub fn match_formula(&self, cf: &ConstrainedFormula) -> Vec<Substitution> {
        self.match_formula_with(cf, &Substitution::new())
    }

    /// Like [`StateOfAffairs::match_formula`], extending `sigma`.
    pub fn match_formula_with(&self, cf: &ConstrainedFormula, sigma: &Substitution) -> Vec<Substitution> {
        let pattern = sigma.apply(cf);
        self.entries
            .values()
            .filter(|e| e.atom.pred == pattern.atom.pred && e.atom.arity() == pattern.atom.arity())
            .filter_map(|e| match_formula(&pattern, e, sigma))
            .collect()
    }

    /// Same members regardless of order.
    pub fn set_eq(&self, other: &StateOfAffairs) -> bool {
        self.len() == other.len() && self.entries.keys().all(|k| other.entries.contains_key(k))
    }
}

impl fmt::Display for StateOfAffairs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, e) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{e}")?;
        }
        f.write_str("}")
    }
}

impl<'a> IntoIterator for &'a StateOfAffairs {
    type Item = &'a ConstrainedFormula;
    type IntoIter = indexmap::map::Values<'a, Key, ConstrainedFormula>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.values()
    }
}
