use std::collections::BTreeMap;
use std::fmt;

use super::term::{Atom, ConstrainedFormula, Constraint, Term};

/// Finite map from variable names to terms.
///
/// Bindings may refer to other bound variables (triangular form, as built by
/// unification); [`Substitution::apply`] resolves them to a fixpoint.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Substitution {
    bindings: BTreeMap<String, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, Term)>,
        S: Into<String>,
    {
        let mut s = Substitution::new();
        for (v, t) in pairs {
            s.bind(v, t);
        }
        s
    }

    /// Adds `var/term`. Identity bindings are dropped.
    pub fn bind(&mut self, var: impl Into<String>, term: Term) {
        let var = var.into();
        if matches!(&term, Term::Var(v) if *v == var) {
            return;
        }
        self.bindings.insert(var, term);
    }

    pub fn get(&self, var: &str) -> Option<&Term> {
        self.bindings.get(var)
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Term)> {
        self.bindings.iter()
    }

    /// Fully resolved view: every binding with the substitution applied.
    pub fn resolved(&self) -> Substitution {
        Substitution {
            bindings: self
                .bindings
                .iter()
                .map(|(k, v)| (k.clone(), self.apply(v)))
                .collect(),
        }
    }

    pub fn apply<T: Substitutable>(&self, item: &T) -> T {
        item.subst(self)
    }

    pub fn apply_all<T: Substitutable>(&self, items: &[T]) -> Vec<T> {
        items.iter().map(|i| i.subst(self)).collect()
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.bindings.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}/{v}")?;
        }
        f.write_str("}")
    }
}

/// Anything a substitution can be applied to.
pub trait Substitutable: Sized {
    fn subst(&self, sigma: &Substitution) -> Self;
}

impl Substitutable for Term {
    fn subst(&self, sigma: &Substitution) -> Term {
        match self {
            Term::Var(v) => match sigma.get(v) {
                Some(t) => t.subst(sigma),
                None => self.clone(),
            },
            Term::Const(_) | Term::Num(_) => self.clone(),
            Term::Compound(f, args) => {
                Term::Compound(f.clone(), args.iter().map(|a| a.subst(sigma)).collect())
            }
        }
    }
}

impl Substitutable for Atom {
    fn subst(&self, sigma: &Substitution) -> Atom {
        Atom {
            pred: self.pred.clone(),
            args: self.args.iter().map(|a| a.subst(sigma)).collect(),
        }
    }
}

impl Substitutable for Constraint {
    fn subst(&self, sigma: &Substitution) -> Constraint {
        Constraint {
            lhs: self.lhs.subst(sigma),
            op: self.op,
            rhs: self.rhs.subst(sigma),
        }
    }
}

impl Substitutable for ConstrainedFormula {
    fn subst(&self, sigma: &Substitution) -> ConstrainedFormula {
        ConstrainedFormula {
            atom: self.atom.subst(sigma),
            constraints: self.constraints.iter().map(|c| c.subst(sigma)).collect(),
        }
    }
}

impl<T: Substitutable> Substitutable for Vec<T> {
    fn subst(&self, sigma: &Substitution) -> Vec<T> {
        self.iter().map(|i| i.subst(sigma)).collect()
    }
}

impl<T: Substitutable> Substitutable for Box<T> {
    fn subst(&self, sigma: &Substitution) -> Box<T> {
        Box::new((**self).subst(sigma))
    }
}
