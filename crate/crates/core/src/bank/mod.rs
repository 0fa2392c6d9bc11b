//! The canonical question record, bank files, and session selection.
//!
//! Bank files are UTF-8 JSON with lexicographically ordered keys so they can
//! be diffed and compared byte for byte.

mod select;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::strategy::Strategy;

pub use select::{select_session_questions, ScheduledQuestion, SelectionError, SessionPlan, DEFAULT_SESSION_SIZE};

/// Questions every strategy must have for a bank to be complete.
pub const MIN_PER_STRATEGY: usize = 10;

/// Default gap between the end of the reference span and the popup.
pub const POPUP_OFFSET_MS: u64 = 2000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("schema violation in field `{field}`: {detail}")]
pub struct SchemaViolation {
    pub field: String,
    pub detail: String,
}

impl SchemaViolation {
    fn new(field: &str, detail: impl Into<String>) -> Self {
        SchemaViolation { field: field.to_string(), detail: detail.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuestionKind {
    TF,
    MC,
}

impl QuestionKind {
    pub fn parse(s: &str) -> Option<QuestionKind> {
        match s {
            "TF" => Some(QuestionKind::TF),
            "MC" => Some(QuestionKind::MC),
            _ => None,
        }
    }
}

// Field order is alphabetical: serialization order is the file's key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub is_correct: bool,
    pub text: String,
}

impl Answer {
    pub fn new(text: impl Into<String>, is_correct: bool) -> Self {
        Answer { is_correct, text: text.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub answers: Vec<Answer>,
    pub id: String,
    pub kind: QuestionKind,
    /// The stem shown to the learner.
    pub question: String,
    pub strategy: Strategy,
    /// When the question pops up, in ms.
    pub timestamp: u64,
    pub transcript_reference: String,
    pub transcript_timestamp_start: u64,
}

impl Question {
    /// Index of the single correct answer, if exactly one is marked.
    pub fn correct_index(&self) -> Option<usize> {
        let mut correct = self.answers.iter().enumerate().filter(|(_, a)| a.is_correct);
        match (correct.next(), correct.next()) {
            (Some((i, _)), None) => Some(i),
            _ => None,
        }
    }

    pub fn check_invariants(&self) -> Result<(), SchemaViolation> {
        if self.id.trim().is_empty() {
            return Err(SchemaViolation::new("id", "must be non-empty"));
        }
        if self.question.trim().is_empty() {
            return Err(SchemaViolation::new("question", format!("{}: stem must be non-empty", self.id)));
        }
        if self.correct_index().is_none() {
            return Err(SchemaViolation::new("answers", format!("{}: exactly one answer must be correct", self.id)));
        }
        if self.kind == QuestionKind::TF {
            let labels: Vec<&str> = self.answers.iter().map(|a| a.text.as_str()).collect();
            if labels != ["True", "False"] {
                return Err(SchemaViolation::new("answers", format!("{}: TF answers must be [\"True\", \"False\"]", self.id)));
            }
        }
        if self.timestamp < self.transcript_timestamp_start {
            return Err(SchemaViolation::new(
                "timestamp",
                format!("{}: popup {} precedes transcript_timestamp_start {}", self.id, self.timestamp, self.transcript_timestamp_start),
            ));
        }
        if self.transcript_reference.trim().is_empty() {
            return Err(SchemaViolation::new("transcript_reference", format!("{}: must be non-empty", self.id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuestionBank {
    questions: Vec<Question>,
    video_duration_ms: u64,
    video_id: String,
}

impl QuestionBank {
    /// Validates every question and groups them by strategy (stable within a group).
    pub fn new(video_id: impl Into<String>, video_duration_ms: u64, mut questions: Vec<Question>) -> Result<Self, SchemaViolation> {
        let video_id = video_id.into();
        if video_id.trim().is_empty() {
            return Err(SchemaViolation::new("video_id", "must be non-empty"));
        }
        let mut ids = HashSet::new();
        for q in &questions {
            q.check_invariants()?;
            if q.timestamp > video_duration_ms {
                return Err(SchemaViolation::new(
                    "timestamp",
                    format!("{}: popup {} is after the end of the video ({video_duration_ms})", q.id, q.timestamp),
                ));
            }
            if !ids.insert(q.id.as_str()) {
                return Err(SchemaViolation::new("id", format!("duplicate id {:?}", q.id)));
            }
        }
        questions.sort_by_key(|q| q.strategy);
        Ok(QuestionBank { questions, video_duration_ms, video_id })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn video_duration_ms(&self) -> u64 {
        self.video_duration_ms
    }

    pub fn questions(&self) -> &[Question] {
        &self.questions
    }

    pub fn by_strategy(&self, strategy: Strategy) -> impl Iterator<Item = &Question> {
        self.questions.iter().filter(move |q| q.strategy == strategy)
    }

    pub fn get(&self, id: &str) -> Option<&Question> {
        self.questions.iter().find(|q| q.id == id)
    }

    pub fn counts(&self) -> BTreeMap<Strategy, usize> {
        let mut out = BTreeMap::new();
        for q in &self.questions {
            *out.entry(q.strategy).or_insert(0) += 1;
        }
        out
    }

    /// Every strategy present must have at least `min_per_strategy` questions.
    pub fn ensure_complete(&self, min_per_strategy: usize) -> Result<(), SchemaViolation> {
        for (strategy, count) in self.counts() {
            if count < min_per_strategy {
                return Err(SchemaViolation::new(
                    "questions",
                    format!("strategy {strategy} has {count} questions, needs at least {min_per_strategy}"),
                ));
            }
        }
        if self.questions.is_empty() {
            return Err(SchemaViolation::new("questions", "bank is empty"));
        }
        Ok(())
    }
}

pub fn save_bank(bank: &QuestionBank) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(bank).expect("bank always serializes");
    out.push(b'\n');
    out
}

/// Strictly decodes a bank file, naming the offending field on failure.
pub fn load_bank(bytes: &[u8]) -> Result<QuestionBank, SchemaViolation> {
    let root: Value = serde_json::from_slice(bytes).map_err(|e| SchemaViolation::new("<root>", format!("not valid JSON: {e}")))?;
    let root = object(&root, "<root>")?;
    reject_unknown(root, &["questions", "video_duration_ms", "video_id"], "")?;
    let video_id = string(root, "video_id", "")?;
    let video_duration_ms = uint(root, "video_duration_ms", "")?;
    let questions = root
        .get("questions")
        .ok_or_else(|| SchemaViolation::new("questions", "missing"))?
        .as_array()
        .ok_or_else(|| SchemaViolation::new("questions", "must be an array"))?;
    let questions = questions
        .iter()
        .enumerate()
        .map(|(i, v)| decode_question(v, &format!("questions[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    QuestionBank::new(video_id, video_duration_ms, questions)
}

const QUESTION_FIELDS: [&str; 8] = [
    "answers",
    "id",
    "kind",
    "question",
    "strategy",
    "timestamp",
    "transcript_reference",
    "transcript_timestamp_start",
];

fn decode_question(v: &Value, at: &str) -> Result<Question, SchemaViolation> {
    let obj = object(v, at)?;
    reject_unknown(obj, &QUESTION_FIELDS, at)?;
    let kind_raw = string(obj, "kind", at)?;
    let kind = QuestionKind::parse(&kind_raw)
        .ok_or_else(|| SchemaViolation::new("kind", format!("{at}: expected \"TF\" or \"MC\", found {kind_raw:?}")))?;
    let strategy_raw = string(obj, "strategy", at)?;
    let strategy = strategy_raw
        .parse()
        .map_err(|_| SchemaViolation::new("strategy", format!("{at}: unknown strategy {strategy_raw:?}")))?;
    let answers_raw = obj
        .get("answers")
        .ok_or_else(|| SchemaViolation::new("answers", format!("{at}: missing")))?
        .as_array()
        .ok_or_else(|| SchemaViolation::new("answers", format!("{at}: must be an array")))?;
    let mut answers = Vec::with_capacity(answers_raw.len());
    for (j, a) in answers_raw.iter().enumerate() {
        let where_ = format!("{at}.answers[{j}]");
        let a = a.as_object().ok_or_else(|| SchemaViolation::new("answers", format!("{where_}: must be an object")))?;
        reject_unknown(a, &["is_correct", "text"], &where_)?;
        let is_correct = a
            .get("is_correct")
            .and_then(Value::as_bool)
            .ok_or_else(|| SchemaViolation::new("is_correct", format!("{where_}: missing or not a boolean")))?;
        let text = string(a, "text", &where_)?;
        answers.push(Answer { is_correct, text });
    }
    Ok(Question {
        answers,
        id: string(obj, "id", at)?,
        kind,
        question: string(obj, "question", at)?,
        strategy,
        timestamp: uint(obj, "timestamp", at)?,
        transcript_reference: string(obj, "transcript_reference", at)?,
        transcript_timestamp_start: uint(obj, "transcript_timestamp_start", at)?,
    })
}

fn object<'a>(v: &'a Value, at: &str) -> Result<&'a Map<String, Value>, SchemaViolation> {
    v.as_object().ok_or_else(|| SchemaViolation::new(at.rsplit('.').next().unwrap_or(at), "must be an object"))
}

fn reject_unknown(obj: &Map<String, Value>, allowed: &[&str], at: &str) -> Result<(), SchemaViolation> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(SchemaViolation::new(k, format!("{at}: unknown field"))),
        None => Ok(()),
    }
}

fn string(obj: &Map<String, Value>, field: &str, at: &str) -> Result<String, SchemaViolation> {
    obj.get(field)
        .ok_or_else(|| SchemaViolation::new(field, format!("{at}: missing")))?
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| SchemaViolation::new(field, format!("{at}: must be a string")))
}

fn uint(obj: &Map<String, Value>, field: &str, at: &str) -> Result<u64, SchemaViolation> {
    obj.get(field)
        .ok_or_else(|| SchemaViolation::new(field, format!("{at}: missing")))?
        .as_u64()
        .ok_or_else(|| SchemaViolation::new(field, format!("{at}: must be a non-negative integer")))
}
