//! Record files: a header line, then one JSON object per macro-step.

use std::collections::BTreeMap;

use inst_core::engine::{Event, Firing, TransitionRecord};
use inst_core::kernel::StateOfAffairs;
use serde::{Deserialize, Serialize};

use crate::mlp::MlpSpec;

/// Engine settings that affect a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub istar: bool,
    pub max_chain: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mlp: Option<MlpSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { istar: false, max_chain: 10_000, mlp: None }
    }
}

/// Everything needed to replay the file: the canonical program, the
/// initial state and the configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub program: String,
    pub init: Vec<String>,
    pub config: RunConfig,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventJson {
    pub agent: String,
    pub event: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiringJson {
    pub rule_id: String,
    pub substitution: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub step: usize,
    pub state_before: Vec<String>,
    pub events: Vec<EventJson>,
    pub forced_events: Vec<EventJson>,
    pub fired: Vec<FiringJson>,
    pub ignored: Vec<FiringJson>,
    pub prevented: Vec<FiringJson>,
    pub state_after: Vec<String>,
    /// Set on the last record of a run that stopped on an engine error;
    /// that record's states are both the state before the failed step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn state_strings(state: &StateOfAffairs) -> Vec<String> {
    state.iter().map(|cf| cf.to_string()).collect()
}

pub fn event_json(e: &Event) -> EventJson {
    EventJson { agent: e.agent.clone(), event: e.atom.to_string() }
}

pub fn firing_json(f: &Firing) -> FiringJson {
    FiringJson {
        rule_id: f.rule_id.to_string(),
        substitution: f.substitution.iter().map(|(v, t)| (v.clone(), t.to_string())).collect(),
    }
}

impl From<&TransitionRecord> for Record {
    fn from(r: &TransitionRecord) -> Self {
        Record {
            step: r.step,
            state_before: state_strings(&r.state_before),
            events: r.events.iter().map(event_json).collect(),
            forced_events: r.forced_events.iter().map(event_json).collect(),
            fired: r.fired.iter().map(firing_json).collect(),
            ignored: r.ignored.iter().map(firing_json).collect(),
            prevented: r.prevented.iter().map(firing_json).collect(),
            state_after: state_strings(&r.state_after),
            error: None,
        }
    }
}

impl Record {
    /// The record of a step that failed in `state` with `events`.
    pub fn failed(step: usize, state: &StateOfAffairs, events: &[Event], error: String) -> Self {
        let s = state_strings(state);
        Record {
            step,
            state_before: s.clone(),
            events: events.iter().map(event_json).collect(),
            forced_events: vec![],
            fired: vec![],
            ignored: vec![],
            prevented: vec![],
            state_after: s,
            error: Some(error),
        }
    }

    /// The agent events of the step, without those added by force-rules.
    pub fn agent_events(&self) -> &[EventJson] {
        &self.events[..self.events.len() - self.forced_events.len().min(self.events.len())]
    }
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: Header,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecordFile {
    pub header: Header,
    pub records: Vec<Record>,
}

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("missing header line")]
    MissingHeader,
}

/// One line of a record file.
#[derive(Clone, Debug, PartialEq)]
pub enum Line {
    Header(Header),
    Record(Record),
}

pub fn parse_line(text: &str) -> Result<Line, serde_json::Error> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.get("header").is_some() {
        Ok(Line::Header(serde_json::from_value::<HeaderLine>(value)?.header))
    } else {
        Ok(Line::Record(serde_json::from_value(value)?))
    }
}

pub fn record_line(r: &Record) -> String {
    serde_json::to_string(r).expect("records serialize")
}

impl RecordFile {
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&HeaderLine { header: self.header.clone() }).expect("headers serialize");
        out.push('\n');
        for r in &self.records {
            out.push_str(&record_line(r));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<RecordFile, RecordError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(RecordError::MissingHeader)?;
        let header: HeaderLine =
            serde_json::from_str(first).map_err(|source| RecordError::Json { line: 1, source })?;
        let mut records = Vec::new();
        for (i, l) in lines {
            records.push(serde_json::from_str(l).map_err(|source| RecordError::Json { line: i + 1, source })?);
        }
        Ok(RecordFile { header: header.header, records })
    }

    pub fn error(&self) -> Option<&str> {
        self.records.last().and_then(|r| r.error.as_deref())
    }
}
