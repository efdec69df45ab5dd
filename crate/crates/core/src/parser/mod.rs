//! Text to rule bases and back.
//!
//! Programs are sequences of `rule(Id, Body).` clauses with `%` line comments.
//! Serialization is the `Display` form of [`RuleBase`], which reparses to an
//! equal structure.

mod ast;
mod desugar;
mod grammar;
mod lexer;

pub use ast::{Action, Condition, OpenUnit, Rule, RuleBase};
pub use desugar::desugar_expectations;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::kernel::{Atom, ConstrainedFormula, Term};
use grammar::Parser;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl Diagnostic {
    pub fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        Diagnostic { line, col, message: message.into() }
    }

    /// `file:line:col: message`
    pub fn with_file(&self, file: &str) -> String {
        format!("{file}:{self}")
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ParseError {
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl From<Diagnostic> for ParseError {
    fn from(d: Diagnostic) -> Self {
        ParseError { diagnostics: vec![d] }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseOutput {
    pub rules: RuleBase,
    /// Non-fatal findings such as inconsistent predicate arities.
    pub warnings: Vec<Diagnostic>,
}

fn parser_for(text: &str) -> Result<Parser, ParseError> {
    Ok(Parser::new(lexer::tokenize(text)?))
}

/// Parses a whole program, collecting every syntax error and duplicate id.
pub fn parse_program_checked(text: &str) -> Result<ParseOutput, ParseError> {
    let mut p = parser_for(text)?;
    let mut rules = RuleBase::new();
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let mut arities: HashMap<String, usize> = HashMap::new();
    while !p.at_eof() {
        let (line, col) = p.position();
        match p.clause() {
            Ok((id, rule)) => {
                let mut mismatches = Vec::new();
                rule.visit_atoms(&mut |a: &Atom| {
                    let seen = *arities.entry(a.pred.clone()).or_insert(a.arity());
                    if seen != a.arity() {
                        mismatches.push((a.pred.clone(), seen, a.arity()));
                    }
                });
                for (pred, seen, now) in mismatches {
                    warnings.push(Diagnostic::new(
                        line,
                        col,
                        format!("arity mismatch: `{pred}` used with {now} argument(s), earlier with {seen}"),
                    ));
                }
                if rules.contains(&id) {
                    errors.push(Diagnostic::new(line, col, format!("duplicate rule id `{id}`")));
                } else {
                    rules.insert(id, rule);
                }
            }
            Err(d) => {
                errors.push(d);
                p.recover();
            }
        }
    }
    if errors.is_empty() {
        Ok(ParseOutput { rules, warnings })
    } else {
        Err(ParseError { diagnostics: errors })
    }
}

pub fn parse_program(text: &str) -> Result<RuleBase, ParseError> {
    parse_program_checked(text).map(|out| out.rules)
}

/// Parses `formula.` clauses, as used for initial states.
pub fn parse_facts(text: &str) -> Result<Vec<ConstrainedFormula>, ParseError> {
    let mut p = parser_for(text)?;
    let mut facts = Vec::new();
    let mut errors = Vec::new();
    while !p.at_eof() {
        match p.fact_clause() {
            Ok(cf) => facts.push(cf),
            Err(d) => {
                errors.push(d);
                p.recover();
            }
        }
    }
    if errors.is_empty() {
        Ok(facts)
    } else {
        Err(ParseError { diagnostics: errors })
    }
}

fn parse_whole<T>(text: &str, f: impl FnOnce(&mut Parser) -> Result<T, Diagnostic>) -> Result<T, ParseError> {
    let mut p = parser_for(text)?;
    let item = f(&mut p)?;
    p.expect_eof()?;
    Ok(item)
}

pub fn parse_formula(text: &str) -> Result<ConstrainedFormula, ParseError> {
    parse_whole(text, |p| p.constrained_formula())
}

pub fn parse_atom(text: &str) -> Result<Atom, ParseError> {
    parse_whole(text, |p| p.atom())
}

pub fn parse_term(text: &str) -> Result<Term, ParseError> {
    parse_whole(text, |p| p.term())
}

pub fn parse_condition(text: &str) -> Result<Condition, ParseError> {
    parse_whole(text, |p| p.condition())
}

/// Parses a rule body without the `rule(Id, ...)` wrapper.
pub fn parse_rule(text: &str) -> Result<Rule, ParseError> {
    parse_whole(text, |p| p.rule_body())
}

/// Canonical text; `parse_program(&serialize(rb)) == Ok(rb)`.
pub fn serialize(rb: &RuleBase) -> String {
    rb.to_string()
}
