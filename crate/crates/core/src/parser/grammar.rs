//! Recursive-descent parser for rule programs.
//!
//! Rule bodies are parsed by keyword (`on`, `if`, `ignore`, `prevent`,
//! `force`, `expected`); terms use precedence climbing with `+ -` at 500,
//! `* /` at 400 (both left-associative) and prefix `-` at 200.

use num_traits::Zero;

use super::ast::{Action, Condition, OpenUnit, Rule};
use super::lexer::{Tok, Token};
use super::Diagnostic;
use crate::kernel::{Atom, ConstrainedFormula, Constraint, RelOp, Term, ARITH_OPS, RESERVED, TUPLE};

const MAX_DEPTH: usize = 200;
const RED_ZONE: usize = 64 * 1024;
const STACK_CHUNK: usize = 1024 * 1024;

type PResult<T> = Result<T, Diagnostic>;

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
    depth: usize,
    anon: usize,
}

impl Parser {
    pub(crate) fn new(toks: Vec<Token>) -> Self {
        Parser { toks, pos: 0, depth: 0, anon: 0 }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos.min(self.toks.len() - 1)].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        &self.toks[(self.pos + offset).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos.min(self.toks.len() - 1)];
        (t.line, t.col)
    }

    fn bump(&mut self) -> Tok {
        let t = self.peek().clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub(crate) fn error(&self, expected: &str) -> Diagnostic {
        let (line, col) = self.here();
        Diagnostic::new(line, col, format!("expected {expected}, found {}", self.peek().describe()))
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Name(n) if n == kw)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        let hit = self.is_punct(p);
        if hit {
            self.bump();
        }
        hit
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.error(&format!("`{p}`")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&format!("`{kw}`")))
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            let (line, col) = self.here();
            return Err(Diagnostic::new(line, col, "nesting too deep"));
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    /// Skips past the next `.` so parsing can resume at the following clause.
    pub(crate) fn recover(&mut self) {
        self.depth = 0;
        while !self.at_eof() {
            if let Tok::Punct(".") = self.bump() {
                return;
            }
        }
    }

    pub(crate) fn position(&self) -> (usize, usize) {
        self.here()
    }

    // --- program structure ---------------------------------------------------

    /// `rule(Id, Body).`
    pub(crate) fn clause(&mut self) -> PResult<(Atom, Rule)> {
        self.expect_kw("rule")?;
        self.expect_punct("(")?;
        let id = self.atom()?;
        self.expect_punct(",")?;
        let body = self.rule_body()?;
        self.expect_punct(")")?;
        self.expect_punct(".")?;
        Ok((id, body))
    }

    /// `formula.` as used by initial-state files.
    pub(crate) fn fact_clause(&mut self) -> PResult<ConstrainedFormula> {
        let cf = self.constrained_formula()?;
        self.expect_punct(".")?;
        Ok(cf)
    }

    pub(crate) fn expect_eof(&mut self) -> PResult<()> {
        if self.at_eof() {
            Ok(())
        } else {
            Err(self.error("end of input"))
        }
    }

    pub(crate) fn rule_body(&mut self) -> PResult<Rule> {
        self.enter()?;
        let rule = stacker::maybe_grow(RED_ZONE, STACK_CHUNK, || self.rule_body_inner());
        self.leave();
        rule
    }

    fn rule_body_inner(&mut self) -> PResult<Rule> {
        let Tok::Name(kw) = self.peek().clone() else {
            return Err(self.error("a rule (`on`, `if`, `ignore`, `prevent`, `force` or `expected`)"));
        };
        match kw.as_str() {
            "on" => {
                self.bump();
                let events = self.events(false)?;
                self.expect_kw("if")?;
                let cond = self.condition()?;
                self.expect_kw("do")?;
                let actions = self.actions()?;
                Ok(Rule::Eca { events, cond, actions })
            }
            "if" => {
                self.bump();
                let cond = self.condition()?;
                self.expect_kw("do")?;
                let actions = self.actions()?;
                Ok(Rule::If { cond, actions })
            }
            "ignore" => {
                self.bump();
                let events = self.events(false)?;
                self.expect_kw("if")?;
                let cond = self.condition()?;
                Ok(Rule::Ignore { events, cond })
            }
            "prevent" => {
                self.bump();
                let target = self.condition()?;
                self.expect_kw("if")?;
                let cond = self.condition()?;
                Ok(Rule::Prevent { target, cond })
            }
            "force" => {
                self.bump();
                let forced = self.events(false)?;
                self.expect_kw("on")?;
                let events = self.events(true)?;
                self.expect_kw("if")?;
                let cond = self.condition()?;
                self.expect_kw("do")?;
                let actions = self.actions()?;
                Ok(Rule::Force { forced, events, cond, actions })
            }
            "expected" => {
                self.bump();
                let event = self.atom()?;
                self.expect_kw("on")?;
                let events = self.events(false)?;
                self.expect_kw("if")?;
                let cond = self.condition()?;
                self.expect_kw("fulfilled-if")?;
                let fulfilled = self.condition()?;
                self.expect_kw("violated-if")?;
                let violated = self.condition()?;
                self.expect_kw("sanction-do")?;
                let sanction = self.actions()?;
                Ok(Rule::Expectation { event, events, cond, fulfilled, violated, sanction })
            }
            _ => Err(self.error("a rule (`on`, `if`, `ignore`, `prevent`, `force` or `expected`)")),
        }
    }

    /// `a1, ..., an`, or `[]` where the empty set is allowed.
    fn events(&mut self, allow_empty: bool) -> PResult<Vec<Atom>> {
        if self.is_punct("[") && matches!(self.peek_at(1), Tok::Punct("]")) || self.is_punct("[]") {
            if !allow_empty {
                return Err(self.error("at least one event (`[]` is only allowed after `force ... on`)"));
            }
            if !self.eat_punct("[]") {
                self.bump();
                self.bump();
            }
            return Ok(Vec::new());
        }
        let mut events = vec![self.atom()?];
        while self.eat_punct(",") {
            events.push(self.atom()?);
        }
        Ok(events)
    }

    fn actions(&mut self) -> PResult<Vec<Action>> {
        if self.is_punct("[") && matches!(self.peek_at(1), Tok::Punct("]")) {
            self.bump();
            self.bump();
            return Ok(Vec::new());
        }
        if self.eat_punct("[]") {
            return Ok(Vec::new());
        }
        let mut actions = vec![self.action()?];
        while self.eat_punct(",") {
            actions.push(self.action()?);
        }
        Ok(actions)
    }

    fn action(&mut self) -> PResult<Action> {
        let Tok::Name(kw) = self.peek().clone() else {
            return Err(self.error("an action (`add`, `del` or `builtin`)"));
        };
        match kw.as_str() {
            "add" | "del" => {
                self.bump();
                self.expect_punct("(")?;
                let unit = self.open_unit(kw == "del")?;
                self.expect_punct(")")?;
                Ok(if kw == "add" { Action::Add(unit) } else { Action::Del(unit) })
            }
            "builtin" => {
                let (name, args) = self.builtin()?;
                Ok(Action::Builtin(name, args))
            }
            _ => Err(self.error("an action (`add`, `del` or `builtin`)")),
        }
    }

    fn open_unit(&mut self, wildcard_ok: bool) -> PResult<OpenUnit> {
        if !self.is_kw("rule") {
            return Ok(OpenUnit::Fact(self.constrained_formula()?));
        }
        self.bump();
        self.expect_punct("(")?;
        let id = self.atom()?;
        self.expect_punct(",")?;
        let body = match self.peek() {
            Tok::Var(v) if v == "_" && wildcard_ok => {
                self.bump();
                None
            }
            _ => Some(Box::new(self.rule_body()?)),
        };
        self.expect_punct(")")?;
        Ok(OpenUnit::Rule { id, body })
    }

    fn builtin(&mut self) -> PResult<(String, Vec<Term>)> {
        self.expect_kw("builtin")?;
        self.expect_punct("(")?;
        let name = match self.bump() {
            Tok::Name(n) | Tok::Quoted(n) => n,
            _ => {
                self.pos -= 1;
                return Err(self.error("builtin name"));
            }
        };
        let mut args = Vec::new();
        while self.eat_punct(",") {
            args.push(self.term()?);
        }
        self.expect_punct(")")?;
        Ok((name, args))
    }

    // --- conditions -------------------------------------------------------------

    pub(crate) fn condition(&mut self) -> PResult<Condition> {
        self.enter()?;
        let result = stacker::maybe_grow(RED_ZONE, STACK_CHUNK, || {
            let mut units = vec![self.condition_unit()?];
            while self.eat_punct("&") {
                units.push(self.condition_unit()?);
            }
            Ok(Condition::conj(units))
        });
        self.leave();
        result
    }

    fn followed_by_paren(&self) -> bool {
        matches!(self.peek_at(1), Tok::Punct("("))
    }

    fn condition_unit(&mut self) -> PResult<Condition> {
        if let Tok::Name(kw) = self.peek().clone() {
            match kw.as_str() {
                "not" if self.followed_by_paren() => {
                    self.bump();
                    self.bump();
                    let inner = self.condition()?;
                    self.expect_punct(")")?;
                    return Ok(Condition::Not(Box::new(inner)));
                }
                "sat" if self.followed_by_paren() => {
                    self.bump();
                    self.bump();
                    let cs = self.constraint_set()?;
                    self.expect_punct(")")?;
                    return Ok(Condition::Sat(cs));
                }
                "seteq" if self.followed_by_paren() => {
                    self.bump();
                    self.bump();
                    let l = self.term_list()?;
                    self.expect_punct(",")?;
                    let r = self.term_list()?;
                    self.expect_punct(")")?;
                    return Ok(Condition::SetEq(l, r));
                }
                "time" if self.followed_by_paren() => {
                    self.bump();
                    self.bump();
                    let t = self.term()?;
                    if !matches!(t, Term::Var(_) | Term::Num(_)) {
                        return Err(self.error("a variable or number inside `time(...)`"));
                    }
                    self.expect_punct(")")?;
                    return Ok(Condition::Time(t));
                }
                "true" if !self.followed_by_paren() => {
                    self.bump();
                    return Ok(Condition::True);
                }
                "builtin" if self.followed_by_paren() => {
                    let (name, args) = self.builtin()?;
                    return Ok(Condition::Builtin(name, args));
                }
                _ => {}
            }
        }
        if self.is_punct("(") {
            // A parenthesised condition, unless it turns out to be the start
            // of an arithmetic constraint such as `(X+1) > 2`.
            let save = (self.pos, self.depth, self.anon);
            self.bump();
            if let Ok(inner) = self.condition() {
                if self.eat_punct(")") && !self.at_relop() && !self.at_arith_op() {
                    return Ok(inner);
                }
            }
            (self.pos, self.depth, self.anon) = save;
        }
        let lhs = self.term()?;
        if let Some(op) = self.relop() {
            let rhs = self.term()?;
            let c = Constraint::new(lhs, op, rhs);
            if self.is_kw("in") {
                self.bump();
                let set = self.constraint_set()?;
                return Ok(Condition::Member(c, set));
            }
            return Ok(Condition::Sat(vec![c]));
        }
        let atom = self.atom_from_term(lhs)?;
        let constraints = if self.eat_punct(":") { self.constraint_set()? } else { Vec::new() };
        Ok(Condition::Fact(ConstrainedFormula::new(atom, constraints)))
    }

    fn at_relop(&self) -> bool {
        matches!(self.peek(), Tok::Punct("=" | "!=" | ">" | ">=" | "<" | "<="))
    }

    fn at_arith_op(&self) -> bool {
        matches!(self.peek(), Tok::Punct("+" | "-" | "*" | "/"))
    }

    fn relop(&mut self) -> Option<RelOp> {
        let op = match self.peek() {
            Tok::Punct("=") => RelOp::Eq,
            Tok::Punct("!=") => RelOp::Ne,
            Tok::Punct(">") => RelOp::Gt,
            Tok::Punct(">=") => RelOp::Ge,
            Tok::Punct("<") => RelOp::Lt,
            Tok::Punct("<=") => RelOp::Le,
            _ => return None,
        };
        self.bump();
        Some(op)
    }

    pub(crate) fn constraint(&mut self) -> PResult<Constraint> {
        let lhs = self.term()?;
        let op = self.relop().ok_or_else(|| self.error("a relation (`=`, `!=`, `>`, `>=`, `<`, `<=`)"))?;
        let rhs = self.term()?;
        Ok(Constraint::new(lhs, op, rhs))
    }

    /// `{c1, ..., cn}`
    fn constraint_set(&mut self) -> PResult<Vec<Constraint>> {
        self.expect_punct("{")?;
        let mut cs = Vec::new();
        if self.eat_punct("}") {
            return Ok(cs);
        }
        loop {
            cs.push(self.constraint()?);
            if self.eat_punct("}") {
                return Ok(cs);
            }
            self.expect_punct(",")?;
        }
    }

    /// `[t1, ..., tn]`
    fn term_list(&mut self) -> PResult<Vec<Term>> {
        if self.eat_punct("[]") {
            return Ok(Vec::new());
        }
        self.expect_punct("[")?;
        let mut ts = Vec::new();
        if self.eat_punct("]") {
            return Ok(ts);
        }
        loop {
            ts.push(self.term()?);
            if self.eat_punct("]") {
                return Ok(ts);
            }
            self.expect_punct(",")?;
        }
    }

    // --- formulae and terms -------------------------------------------------------

    pub(crate) fn constrained_formula(&mut self) -> PResult<ConstrainedFormula> {
        let atom = self.atom()?;
        let constraints = if self.eat_punct(":") { self.constraint_set()? } else { Vec::new() };
        Ok(ConstrainedFormula::new(atom, constraints))
    }

    pub(crate) fn atom(&mut self) -> PResult<Atom> {
        if !matches!(self.peek(), Tok::Name(_) | Tok::Quoted(_)) {
            return Err(self.error("an atomic formula"));
        }
        let t = self.term()?;
        self.atom_from_term(t)
    }

    fn atom_from_term(&self, t: Term) -> PResult<Atom> {
        match &t {
            Term::Compound(f, args)
                if f == TUPLE || (ARITH_OPS.contains(&f.as_str()) && args.len() <= 2) =>
            {
                Err(self.error("an atomic formula (not an arithmetic expression)"))
            }
            _ => Atom::from_term(&t).ok_or_else(|| self.error("an atomic formula")),
        }
    }

    pub(crate) fn term(&mut self) -> PResult<Term> {
        self.expr(1200).map(|(t, _)| t)
    }

    /// Returns the term and whether it is a bare number literal.
    fn expr(&mut self, max_prec: u32) -> PResult<(Term, bool)> {
        self.enter()?;
        let result = stacker::maybe_grow(RED_ZONE, STACK_CHUNK, || self.expr_inner(max_prec));
        self.leave();
        result
    }

    fn expr_inner(&mut self, max_prec: u32) -> PResult<(Term, bool)> {
        let (mut left, mut literal) = self.prefix()?;
        loop {
            let (op, prec) = match self.peek() {
                Tok::Punct(op @ ("+" | "-")) => (*op, 500),
                Tok::Punct(op @ ("*" | "/")) => (*op, 400),
                _ => break,
            };
            if prec > max_prec {
                break;
            }
            self.bump();
            let (right, right_literal) = self.expr(prec - 1)?;
            left = match (&left, &right) {
                (Term::Num(a), Term::Num(b)) if op == "/" && literal && right_literal && !b.is_zero() => {
                    Term::Num(a / b)
                }
                _ => Term::binary(op, left, right),
            };
            literal = false;
        }
        Ok((left, literal))
    }

    fn prefix(&mut self) -> PResult<(Term, bool)> {
        if self.is_punct("-") {
            self.bump();
            if let Tok::Num(n) = self.peek().clone() {
                self.bump();
                return Ok((Term::Num(-n), true));
            }
            let (operand, _) = self.expr(200)?;
            return Ok((Term::Compound("-".into(), vec![operand]), false));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<(Term, bool)> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok((Term::Num(n), true))
            }
            Tok::Var(v) => {
                self.bump();
                if v == "_" {
                    self.anon += 1;
                    Ok((Term::Var(format!("_G{}", self.anon)), false))
                } else {
                    Ok((Term::Var(v), false))
                }
            }
            Tok::Name(name) if RESERVED.contains(&name.as_str()) || name.contains('-') => {
                Err(self.error("a term (keywords must be quoted to be used as names)"))
            }
            Tok::Name(name) | Tok::Quoted(name) => {
                self.bump();
                if !self.eat_punct("(") {
                    return Ok((Term::Const(name), false));
                }
                let mut args = vec![self.term()?];
                while self.eat_punct(",") {
                    args.push(self.term()?);
                }
                self.expect_punct(")")?;
                Ok((Term::Compound(name, args), false))
            }
            Tok::Punct("(") => {
                self.bump();
                let first = self.term()?;
                if self.eat_punct(")") {
                    return Ok((first, false));
                }
                let mut items = vec![first];
                while self.eat_punct(",") {
                    if self.is_punct(")") && items.len() == 1 {
                        break;
                    }
                    items.push(self.term()?);
                }
                self.expect_punct(")")?;
                Ok((Term::tuple(items), false))
            }
            _ => Err(self.error("a term")),
        }
    }
}
