use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;

/// Exact rational used for every number in the language.
pub type Number = BigRational;

/// Functor of the tuple compound `(a, b, ...)`.
pub const TUPLE: &str = ",";

/// Functors rendered with infix (or prefix, for unary `-`) syntax.
pub const ARITH_OPS: [&str; 4] = ["+", "-", "*", "/"];

/// Words with a syntactic role; constants spelled like these are rendered quoted.
pub const RESERVED: [&str; 20] = [
    "on", "if", "do", "ignore", "prevent", "force", "expected", "not", "sat", "seteq", "in",
    "time", "true", "add", "del", "rule", "builtin", "fulfilled", "violated", "sanction",
];

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(String),
    Num(Number),
    Compound(String, Vec<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn constant(name: impl Into<String>) -> Self {
        Term::Const(name.into())
    }

    pub fn int(value: i64) -> Self {
        Term::Num(BigRational::from_integer(BigInt::from(value)))
    }

    pub fn ratio(numer: i64, denom: i64) -> Self {
        Term::Num(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn compound(functor: impl Into<String>, args: Vec<Term>) -> Self {
        let functor = functor.into();
        if args.is_empty() {
            Term::Const(functor)
        } else {
            Term::Compound(functor, args)
        }
    }

    pub fn binary(op: &str, lhs: Term, rhs: Term) -> Self {
        Term::Compound(op.to_string(), vec![lhs, rhs])
    }

    pub fn tuple(items: Vec<Term>) -> Self {
        Term::Compound(TUPLE.to_string(), items)
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Const(_) | Term::Num(_) => true,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Const(_) | Term::Num(_) => {}
            Term::Compound(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn occurs(&self, var: &str) -> bool {
        match self {
            Term::Var(v) => v == var,
            Term::Const(_) | Term::Num(_) => false,
            Term::Compound(_, args) => args.iter().any(|a| a.occurs(var)),
        }
    }

    pub fn as_number(&self) -> Option<&Number> {
        match self {
            Term::Num(n) => Some(n),
            _ => None,
        }
    }
}

impl From<Number> for Term {
    fn from(n: Number) -> Self {
        Term::Num(n)
    }
}

/// `p(t1, ..., tn)`; `n = 0` is a proposition.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: impl Into<String>, args: Vec<Term>) -> Self {
        Atom { pred: pred.into(), args }
    }

    pub fn prop(pred: impl Into<String>) -> Self {
        Atom::new(pred, Vec::new())
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        self.args.iter().for_each(|a| a.collect_vars(out));
    }

    /// The atom read as a term, e.g. to nest an event inside `exp(...)`.
    pub fn to_term(&self) -> Term {
        Term::compound(self.pred.clone(), self.args.clone())
    }

    /// Inverse of [`Atom::to_term`]; numbers and variables are not atoms.
    pub fn from_term(term: &Term) -> Option<Atom> {
        match term {
            Term::Const(c) => Some(Atom::prop(c.clone())),
            Term::Compound(f, args) => Some(Atom::new(f.clone(), args.clone())),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelOp {
    Eq,
    Ne,
    Gt,
    Ge,
    Lt,
    Le,
}

impl RelOp {
    pub const ALL: [RelOp; 6] = [RelOp::Eq, RelOp::Ne, RelOp::Gt, RelOp::Ge, RelOp::Lt, RelOp::Le];

    pub fn symbol(self) -> &'static str {
        match self {
            RelOp::Eq => "=",
            RelOp::Ne => "!=",
            RelOp::Gt => ">",
            RelOp::Ge => ">=",
            RelOp::Lt => "<",
            RelOp::Le => "<=",
        }
    }

    /// The relation with its operands swapped: `a op b` iff `b op.flip() a`.
    pub fn flip(self) -> RelOp {
        match self {
            RelOp::Gt => RelOp::Lt,
            RelOp::Ge => RelOp::Le,
            RelOp::Lt => RelOp::Gt,
            RelOp::Le => RelOp::Ge,
            other => other,
        }
    }

    pub fn is_ordering(self) -> bool {
        !matches!(self, RelOp::Eq | RelOp::Ne)
    }

    pub fn compare<T: Ord>(self, lhs: &T, rhs: &T) -> bool {
        match self {
            RelOp::Eq => lhs == rhs,
            RelOp::Ne => lhs != rhs,
            RelOp::Gt => lhs > rhs,
            RelOp::Ge => lhs >= rhs,
            RelOp::Lt => lhs < rhs,
            RelOp::Le => lhs <= rhs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Constraint {
    pub lhs: Term,
    pub op: RelOp,
    pub rhs: Term,
}

impl Constraint {
    pub fn new(lhs: Term, op: RelOp, rhs: Term) -> Self {
        Constraint { lhs, op, rhs }
    }

    pub fn is_ground(&self) -> bool {
        self.lhs.is_ground() && self.rhs.is_ground()
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        self.lhs.collect_vars(out);
        self.rhs.collect_vars(out);
    }
}

/// `atom : {c1, ..., cn}`. The constraint list is a multiset: its order is
/// kept for rendering but ignored by [`ConstrainedFormula::same_as`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConstrainedFormula {
    pub atom: Atom,
    pub constraints: Vec<Constraint>,
}

impl ConstrainedFormula {
    pub fn new(atom: Atom, constraints: Vec<Constraint>) -> Self {
        ConstrainedFormula { atom, constraints }
    }

    pub fn bare(atom: Atom) -> Self {
        ConstrainedFormula { atom, constraints: Vec::new() }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.atom.collect_vars(&mut out);
        self.constraints.iter().for_each(|c| c.collect_vars(&mut out));
        out
    }

    pub fn is_ground(&self) -> bool {
        self.atom.is_ground() && self.constraints.iter().all(Constraint::is_ground)
    }

    /// Variables that are neither bound nor restricted by a constraint.
    /// A formula may be stored only when this is empty: a variable that
    /// appears in the constraint set is read as universally quantified.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut atom_vars = BTreeSet::new();
        self.atom.collect_vars(&mut atom_vars);
        let mut constrained = BTreeSet::new();
        self.constraints.iter().for_each(|c| c.collect_vars(&mut constrained));
        atom_vars.difference(&constrained).cloned().collect()
    }

    /// Key under which two formulae are syntactically identical: same atom
    /// and same constraint multiset.
    pub fn canonical_key(&self) -> (Atom, Vec<Constraint>) {
        let mut cs = self.constraints.clone();
        cs.sort();
        (self.atom.clone(), cs)
    }

    pub fn same_as(&self, other: &ConstrainedFormula) -> bool {
        self.atom == other.atom && self.constraints.len() == other.constraints.len() && {
            let mut a: Vec<&Constraint> = self.constraints.iter().collect();
            let mut b: Vec<&Constraint> = other.constraints.iter().collect();
            a.sort();
            b.sort();
            a == b
        }
    }
}

impl From<Atom> for ConstrainedFormula {
    fn from(atom: Atom) -> Self {
        ConstrainedFormula::bare(atom)
    }
}

// ---------------------------------------------------------------------------
// Canonical rendering. The parser reads every string produced here back to an
// equal value.

pub fn is_plain_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_') && !RESERVED.contains(&name)
}

pub fn write_name(f: &mut impl fmt::Write, name: &str) -> fmt::Result {
    if is_plain_name(name) {
        f.write_str(name)
    } else {
        f.write_char('\'')?;
        for c in name.chars() {
            match c {
                '\'' => f.write_str("\\'")?,
                '\\' => f.write_str("\\\\")?,
                '\n' => f.write_str("\\n")?,
                '\t' => f.write_str("\\t")?,
                c => f.write_char(c)?,
            }
        }
        f.write_char('\'')
    }
}

/// `p/q` for non-integers, bare digits for integers.
pub fn format_number(n: &Number) -> String {
    if n.is_integer() {
        n.numer().to_string()
    } else {
        format!("{}/{}", n.numer(), n.denom())
    }
}

fn op_prec(functor: &str, arity: usize) -> Option<u32> {
    match (functor, arity) {
        ("+", 2) | ("-", 2) => Some(500),
        ("*", 2) | ("/", 2) => Some(400),
        ("-", 1) => Some(200),
        _ => None,
    }
}

/// Binding strength of a rendered term; 0 for primaries.
fn term_prec(t: &Term) -> u32 {
    match t {
        Term::Num(n) if n.is_negative() => 200,
        Term::Num(n) if !n.is_integer() => 400,
        Term::Compound(f, args) => op_prec(f, args.len()).unwrap_or(0),
        _ => 0,
    }
}

fn starts_with_minus(t: &Term) -> bool {
    match t {
        Term::Num(n) => n.is_negative(),
        Term::Compound(f, args) => match (f.as_str(), args.len()) {
            ("-", 1) => true,
            (op, 2) if op_prec(op, 2).is_some() => starts_with_minus(&args[0]),
            _ => false,
        },
        _ => false,
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, t: &Term, paren: bool) -> fmt::Result {
    if paren {
        write!(f, "({t})")
    } else {
        write!(f, "{t}")
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => write_name(f, c),
            Term::Num(n) => f.write_str(&format_number(n)),
            Term::Compound(functor, args) if functor == TUPLE => {
                f.write_char('(')?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_char(',')?;
                    }
                    write!(f, "{a}")?;
                }
                if args.len() == 1 {
                    f.write_char(',')?;
                }
                f.write_char(')')
            }
            Term::Compound(functor, args) if functor == "-" && args.len() == 1 => {
                let arg = &args[0];
                // A bare number after `-` would be read back as a negative literal.
                let paren = term_prec(arg) > 200 || matches!(arg, Term::Num(_)) || starts_with_minus(arg);
                f.write_char('-')?;
                write_operand(f, arg, paren)
            }
            Term::Compound(functor, args) if op_prec(functor, args.len()).is_some() => {
                let prec = op_prec(functor, 2).unwrap_or(0);
                let (lhs, rhs) = (&args[0], &args[1]);
                // Two number literals around `/` are folded by the parser.
                let literal_div = functor == "/"
                    && matches!(lhs, Term::Num(_))
                    && matches!(rhs, Term::Num(n) if !n.is_negative());
                let left_paren = term_prec(lhs) > prec || literal_div;
                let right_paren = term_prec(rhs) >= prec || starts_with_minus(rhs);
                write_operand(f, lhs, left_paren)?;
                f.write_str(functor)?;
                write_operand(f, rhs, right_paren)
            }
            Term::Compound(functor, args) => {
                write_name(f, functor)?;
                f.write_char('(')?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_char(',')?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_char(')')
            }
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_name(f, &self.pred)?;
        if !self.args.is_empty() {
            f.write_char('(')?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_char(',')?;
                }
                write!(f, "{a}")?;
            }
            f.write_char(')')?;
        }
        Ok(())
    }
}

impl fmt::Display for RelOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.lhs, self.op, self.rhs)
    }
}

pub fn write_constraint_set(f: &mut fmt::Formatter<'_>, cs: &[Constraint]) -> fmt::Result {
    f.write_char('{')?;
    for (i, c) in cs.iter().enumerate() {
        if i > 0 {
            f.write_char(',')?;
        }
        write!(f, "{c}")?;
    }
    f.write_char('}')
}

impl fmt::Display for ConstrainedFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.atom)?;
        if !self.constraints.is_empty() {
            f.write_char(':')?;
            write_constraint_set(f, &self.constraints)?;
        }
        Ok(())
    }
}
