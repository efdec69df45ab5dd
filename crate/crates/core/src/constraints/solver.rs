//! Satisfiability of conjunctions of bound and difference constraints over
//! the rationals.
//!
//! Every supported constraint normalises to `x - y ◁ c` where `y` may be the
//! distinguished zero node. Ordered relations become weighted edges of a
//! difference-bound matrix whose entries carry a strictness flag; after
//! closure the system is feasible iff no diagonal entry is below `(0, ≤)`.
//! A disequality `x - y ≠ c` only fails when the closed matrix pins
//! `x - y` to exactly `c`: a convex region not contained in any single
//! excluded hyperplane cannot be covered by finitely many of them.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};

use super::{holds_constraint, ConstraintError};
use crate::kernel::{Constraint, Number, RelOp, Term};

/// Linear form `Σ coeff·var + constant`.
#[derive(Clone, Debug, Default)]
struct Linear {
    coeffs: BTreeMap<String, Number>,
    constant: Number,
}

impl Linear {
    fn constant(n: Number) -> Self {
        Linear { coeffs: BTreeMap::new(), constant: n }
    }

    fn var(v: &str) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(v.to_string(), Number::from_integer(1.into()));
        Linear { coeffs, constant: Number::zero() }
    }

    fn scale(mut self, k: &Number) -> Self {
        self.coeffs.values_mut().for_each(|c| *c = &*c * k);
        self.constant = &self.constant * k;
        self.prune()
    }

    fn add(mut self, other: Linear, sign: i32) -> Self {
        for (v, c) in other.coeffs {
            let entry = self.coeffs.entry(v).or_insert_with(Number::zero);
            if sign < 0 {
                *entry = &*entry - c;
            } else {
                *entry = &*entry + c;
            }
        }
        if sign < 0 {
            self.constant = &self.constant - other.constant;
        } else {
            self.constant = &self.constant + other.constant;
        }
        self.prune()
    }

    fn prune(mut self) -> Self {
        self.coeffs.retain(|_, c| !c.is_zero());
        self
    }

    fn as_constant(&self) -> Option<&Number> {
        self.coeffs.is_empty().then_some(&self.constant)
    }
}

fn linearize(t: &Term, whole: &Constraint) -> Result<Linear, ConstraintError> {
    let unsupported = || ConstraintError::UnsupportedConstraint(whole.to_string());
    match t {
        Term::Num(n) => Ok(Linear::constant(n.clone())),
        Term::Var(v) => Ok(Linear::var(v)),
        Term::Const(_) => Err(unsupported()),
        Term::Compound(f, args) => match (f.as_str(), args.as_slice()) {
            ("-", [a]) => Ok(linearize(a, whole)?.scale(&-Number::from_integer(1.into()))),
            ("+", [a, b]) => Ok(linearize(a, whole)?.add(linearize(b, whole)?, 1)),
            ("-", [a, b]) => Ok(linearize(a, whole)?.add(linearize(b, whole)?, -1)),
            ("*", [a, b]) => {
                let (la, lb) = (linearize(a, whole)?, linearize(b, whole)?);
                match (la.as_constant(), lb.as_constant()) {
                    (Some(k), _) => Ok(lb.clone().scale(&k.clone())),
                    (_, Some(k)) => Ok(la.clone().scale(&k.clone())),
                    _ => Err(unsupported()),
                }
            }
            ("/", [a, b]) => {
                let lb = linearize(b, whole)?;
                let k = lb.as_constant().ok_or_else(unsupported)?;
                if k.is_zero() {
                    return Err(ConstraintError::DivisionByZero(t.to_string()));
                }
                Ok(linearize(a, whole)?.scale(&k.recip()))
            }
            _ => Err(unsupported()),
        },
    }
}

/// A constraint reduced to one of the decidable shapes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Normalized {
    /// Ground and already decided.
    Ground(bool),
    /// `var ◁ value`.
    Bound { var: String, op: RelOp, value: Number },
    /// `x - y ◁ value`.
    Difference { x: String, y: String, op: RelOp, value: Number },
}

impl Normalized {
    pub fn of(c: &Constraint) -> Result<Normalized, ConstraintError> {
        if c.is_ground() {
            return holds_constraint(c).map(Normalized::Ground);
        }
        let diff = linearize(&c.lhs, c)?.add(linearize(&c.rhs, c)?, -1);
        let k = diff.constant.clone();
        let terms: Vec<(String, Number)> = diff.coeffs.into_iter().collect();
        match terms.as_slice() {
            [] => Ok(Normalized::Ground(c.op.compare(&k, &Number::zero()))),
            // a·x + k ◁ 0  ⇔  x ◁' -k/a
            [(x, a)] => {
                let op = if a.is_negative() { c.op.flip() } else { c.op };
                Ok(Normalized::Bound { var: x.clone(), op, value: -k / a })
            }
            // a·x - a·y + k ◁ 0  ⇔  x - y ◁' -k/a
            [(x, a), (y, b)] if (a + b).is_zero() => {
                let op = if a.is_negative() { c.op.flip() } else { c.op };
                Ok(Normalized::Difference { x: x.clone(), y: y.clone(), op, value: -k / a })
            }
            _ => Err(ConstraintError::UnsupportedConstraint(c.to_string())),
        }
    }
}

/// Upper bound on a difference, `value` or `value - ε` when strict.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Bound {
    value: Number,
    strict: bool,
}

impl Bound {
    fn tighter_than(&self, other: &Bound) -> bool {
        self.value < other.value || (self.value == other.value && self.strict && !other.strict)
    }

    fn plus(&self, other: &Bound) -> Bound {
        Bound { value: &self.value + &other.value, strict: self.strict || other.strict }
    }

    fn is_negative(&self) -> bool {
        self.value.is_negative() || (self.value.is_zero() && self.strict)
    }
}

struct Dbm {
    /// `m[i][j]` bounds `node_i - node_j`; node 0 is the constant zero.
    m: Vec<Vec<Option<Bound>>>,
}

impl Dbm {
    fn new(nodes: usize) -> Self {
        let mut m = vec![vec![None; nodes]; nodes];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = Some(Bound { value: Number::zero(), strict: false });
        }
        Dbm { m }
    }

    fn constrain(&mut self, i: usize, j: usize, bound: Bound) {
        let tighter = match &self.m[i][j] {
            None => true,
            Some(cur) => bound.tighter_than(cur),
        };
        if tighter {
            self.m[i][j] = Some(bound);
        }
    }

    /// `node_i - node_j ◁ value` for the ordered relations and `=`.
    fn relate(&mut self, i: usize, j: usize, op: RelOp, value: &Number) {
        let up = |strict| Bound { value: value.clone(), strict };
        let down = |strict| Bound { value: -value.clone(), strict };
        match op {
            RelOp::Le => self.constrain(i, j, up(false)),
            RelOp::Lt => self.constrain(i, j, up(true)),
            RelOp::Ge => self.constrain(j, i, down(false)),
            RelOp::Gt => self.constrain(j, i, down(true)),
            RelOp::Eq => {
                self.constrain(i, j, up(false));
                self.constrain(j, i, down(false));
            }
            RelOp::Ne => {}
        }
    }

    /// Floyd–Warshall closure; false when a negative cycle exists.
    fn close(&mut self) -> bool {
        let n = self.m.len();
        for k in 0..n {
            for i in 0..n {
                let Some(ik) = self.m[i][k].clone() else { continue };
                for j in 0..n {
                    let Some(via) = self.m[k][j].as_ref().map(|kj| ik.plus(kj)) else { continue };
                    self.constrain(i, j, via);
                }
            }
        }
        (0..n).all(|i| !self.m[i][i].as_ref().is_some_and(Bound::is_negative))
    }

    fn pinned(&self, i: usize, j: usize, value: &Number) -> bool {
        let up = Bound { value: value.clone(), strict: false };
        let down = Bound { value: -value.clone(), strict: false };
        self.m[i][j].as_ref() == Some(&up) && self.m[j][i].as_ref() == Some(&down)
    }
}

/// Whether some rational assignment satisfies every constraint in `gamma`.
///
/// Supported shapes: ground, `X ◁ c`, `X ◁ Y`, `X ◁ Y + c` (and anything
/// that rearranges linearly into them). Other constraints raise
/// [`ConstraintError::UnsupportedConstraint`], even if a ground constraint
/// elsewhere in the set is already false.
pub fn sat(gamma: &[Constraint]) -> Result<bool, ConstraintError> {
    let normalized = gamma.iter().map(Normalized::of).collect::<Result<Vec<_>, _>>()?;

    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let node = |v: &str, index: &mut BTreeMap<String, usize>| {
        let next = index.len() + 1;
        *index.entry(v.to_string()).or_insert(next)
    };
    let mut relations = Vec::new();
    for n in &normalized {
        match n {
            Normalized::Ground(false) => return Ok(false),
            Normalized::Ground(true) => {}
            Normalized::Bound { var, op, value } => {
                let i = node(var, &mut index);
                relations.push((i, 0, *op, value.clone()));
            }
            Normalized::Difference { x, y, op, value } => {
                let i = node(x, &mut index);
                let j = node(y, &mut index);
                relations.push((i, j, *op, value.clone()));
            }
        }
    }

    let mut dbm = Dbm::new(index.len() + 1);
    for (i, j, op, value) in &relations {
        dbm.relate(*i, *j, *op, value);
    }
    if !dbm.close() {
        return Ok(false);
    }
    Ok(relations
        .iter()
        .filter(|(_, _, op, _)| *op == RelOp::Ne)
        .all(|(i, j, _, value)| !dbm.pinned(*i, *j, value)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Term {
        Term::var("X")
    }
    fn y() -> Term {
        Term::var("Y")
    }
    fn c(lhs: Term, op: RelOp, rhs: Term) -> Constraint {
        Constraint::new(lhs, op, rhs)
    }

    #[test]
    fn interval() {
        assert!(sat(&[c(x(), RelOp::Gt, Term::int(1)), c(x(), RelOp::Lt, Term::int(3))]).unwrap());
        assert!(!sat(&[c(x(), RelOp::Gt, Term::int(3)), c(x(), RelOp::Lt, Term::int(1))]).unwrap());
    }

    #[test]
    fn strict_bounds_meeting_at_a_point() {
        assert!(sat(&[c(x(), RelOp::Ge, Term::int(2)), c(x(), RelOp::Le, Term::int(2))]).unwrap());
        assert!(!sat(&[c(x(), RelOp::Gt, Term::int(2)), c(x(), RelOp::Le, Term::int(2))]).unwrap());
    }

    #[test]
    fn disequality_only_fails_when_pinned() {
        let pinned = [c(x(), RelOp::Eq, Term::int(2)), c(x(), RelOp::Ne, Term::int(2))];
        assert!(!sat(&pinned).unwrap());
        let open = [
            c(x(), RelOp::Ge, Term::int(2)),
            c(x(), RelOp::Le, Term::int(3)),
            c(x(), RelOp::Ne, Term::int(2)),
            c(x(), RelOp::Ne, Term::int(3)),
        ];
        assert!(sat(&open).unwrap());
    }

    #[test]
    fn difference_chain_through_equality() {
        // {X=Y, Y>2, X<2}: unsatisfiable. Independent check: no point of the
        // grid {-4, -3.5, ..., 4}² satisfies all three.
        let gamma = [
            c(x(), RelOp::Eq, y()),
            c(y(), RelOp::Gt, Term::int(2)),
            c(x(), RelOp::Lt, Term::int(2)),
        ];
        let grid: Vec<Number> = (-8..=8).map(|k| Number::new(k.into(), 2.into())).collect();
        let two = Number::from_integer(2.into());
        let witness = grid.iter().any(|xv| grid.iter().any(|yv| xv == yv && *yv > two && *xv < two));
        assert!(!witness);
        assert!(!sat(&gamma).unwrap());
    }

    #[test]
    fn rearranged_difference_form() {
        // X + 1 <= Y - 2 ⇔ X - Y <= -3
        let gamma = [
            c(Term::binary("+", x(), Term::int(1)), RelOp::Le, Term::binary("-", y(), Term::int(2))),
            c(y(), RelOp::Le, Term::int(0)),
            c(x(), RelOp::Ge, Term::int(-3)),
        ];
        assert!(sat(&gamma).unwrap());
        let tighter = [gamma[0].clone(), gamma[1].clone(), c(x(), RelOp::Gt, Term::int(-3))];
        assert!(!sat(&tighter).unwrap());
    }

    #[test]
    fn out_of_fragment_is_reported() {
        let sum = c(Term::binary("+", x(), y()), RelOp::Gt, Term::int(1));
        assert!(matches!(sat(&[sum]), Err(ConstraintError::UnsupportedConstraint(_))));
        let product = c(Term::binary("*", x(), y()), RelOp::Gt, Term::int(1));
        assert!(matches!(sat(&[product]), Err(ConstraintError::UnsupportedConstraint(_))));
        let symbolic = c(x(), RelOp::Eq, Term::constant("a"));
        assert!(matches!(sat(&[symbolic]), Err(ConstraintError::UnsupportedConstraint(_))));
        let three = c(Term::binary("-", x(), y()), RelOp::Lt, Term::var("Z"));
        assert!(matches!(sat(&[three]), Err(ConstraintError::UnsupportedConstraint(_))));
    }

    #[test]
    fn scaled_single_variable() {
        // 2X > 3 and X < 2 leaves (3/2, 2).
        let gamma = [
            c(Term::binary("*", Term::int(2), x()), RelOp::Gt, Term::int(3)),
            c(x(), RelOp::Lt, Term::int(2)),
        ];
        assert!(sat(&gamma).unwrap());
    }
}
