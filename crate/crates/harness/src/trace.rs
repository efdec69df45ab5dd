//! Event trace files: one `<step> <agent> <formula>` per line, `%` comments.

use std::path::Path;

use inst_core::engine::Event;
use inst_core::parser::parse_atom;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: event `{event}` is not ground")]
    NonGroundEvent { line: usize, event: String },
}

/// Event sets indexed by step. Missing steps are empty; within a step the
/// file order is kept.
pub fn parse_trace(text: &str) -> Result<Vec<Vec<Event>>, TraceError> {
    let mut steps: Vec<Vec<Event>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |message: String| TraceError::Syntax { line: line_no, message };
        let (step, rest) = line.split_once(char::is_whitespace).ok_or_else(|| syntax("expected `<step> <agent> <event>`".into()))?;
        let step: usize = step.parse().map_err(|_| syntax(format!("bad step index `{step}`")))?;
        let (agent, formula) = rest
            .trim_start()
            .split_once(char::is_whitespace)
            .ok_or_else(|| syntax("expected `<agent> <event>`".into()))?;
        let formula = formula.trim();
        let formula = formula.strip_suffix('.').unwrap_or(formula);
        let atom = parse_atom(formula).map_err(|e| syntax(e.to_string()))?;
        if !atom.is_ground() {
            return Err(TraceError::NonGroundEvent { line: line_no, event: atom.to_string() });
        }
        if steps.len() <= step {
            steps.resize_with(step + 1, Vec::new);
        }
        steps[step].push(Event::new(agent, atom));
    }
    Ok(steps)
}

pub fn load_trace(path: &Path) -> Result<Vec<Vec<Event>>, TraceError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| TraceError::Io { path: path.display().to_string(), source })?;
    parse_trace(&text)
}

/// Cuts a `%` comment, ignoring `%` inside quoted names.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' if quoted => escaped = true,
            '\'' => quoted = !quoted,
            '%' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

/// Renders event sets back into trace syntax.
pub fn write_trace(steps: &[Vec<Event>]) -> String {
    let mut out = String::new();
    for (i, events) in steps.iter().enumerate() {
        for e in events {
            out.push_str(&format!("{i} {} {}\n", e.agent, e.atom));
        }
    }
    out
}
