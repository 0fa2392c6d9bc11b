//! Gated playback: popups, answers with feedback, seek clamping, and the event log.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bank::{Question, SessionPlan};
use crate::strategy::{Strategy, StrategySet};

pub trait Clock: Send + Sync {
    /// Milliseconds on a monotonic timeline.
    fn now_ms(&self) -> u64;
}

/// Milliseconds since the clock was created.
#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        SystemClock { origin: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        self.origin.elapsed().as_millis() as u64
    }
}

#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(start_ms: u64) -> Self {
        ManualClock(AtomicU64::new(start_ms))
    }

    pub fn set(&self, ms: u64) {
        self.0.store(ms, Ordering::SeqCst);
    }

    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("playback is paused for an unanswered question")]
    PausedForQuestion,
    #[error("no question is active")]
    NoActiveQuestion,
    #[error("question {0:?} is not in this session")]
    UnknownQuestion(String),
    #[error("question {found:?} is not the active question ({expected:?})")]
    QuestionMismatch { expected: String, found: String },
    #[error("option {index} is out of range (question has {count} options)")]
    OptionOutOfRange { index: usize, count: usize },
    #[error("seek target {0} ms is negative")]
    NegativeTarget(i64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Feedback {
    Encouragement,
    ReviewReference { reference_start_ms: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub question_id: String,
    pub strategy: Strategy,
    pub attempt_index: u32,
    pub chosen_index: usize,
    pub correct: bool,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventBody {
    SessionStarted { question_count: usize, strategies: StrategySet, video_duration_ms: u64 },
    PopupShown { playhead_ms: u64, position: usize, total: usize },
    AnswerSubmitted(AnswerRecord),
    FeedbackShown(Feedback),
    SeekPerformed { from_ms: u64, requested_ms: u64, granted_ms: u64 },
    SessionCompleted { answered: usize, attempts: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub at_wall_ms: u64,
    pub question_id: Option<String>,
    #[serde(flatten)]
    pub body: EventBody,
}

/// What the learner sees when a question pops up. Correctness is not included.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Popup {
    pub question_id: String,
    pub position: usize,
    pub total: usize,
    pub strategy: Strategy,
    pub question: String,
    pub options: Vec<String>,
    pub popup_ms: u64,
    pub reference_start_ms: u64,
}

impl Popup {
    fn new(q: &Question, popup_ms: u64, position: usize, total: usize) -> Self {
        Popup {
            question_id: q.id.clone(),
            position,
            total,
            strategy: q.strategy,
            question: q.question.clone(),
            options: q.answers.iter().map(|a| a.text.clone()).collect(),
            popup_ms,
            reference_start_ms: q.transcript_timestamp_start,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeUpdate {
    pub playhead_ms: u64,
    pub popup: Option<Popup>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerOutcome {
    pub feedback: Feedback,
    pub remaining_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionState {
    plan: SessionPlan,
    playhead_ms: u64,
    /// Correctly answered question ids, in answer order.
    answered: Vec<String>,
    active: Option<usize>,
    paused_by_question: bool,
    shown: Vec<bool>,
    attempts: Vec<u32>,
    timer_from_ms: Option<u64>,
    completed: bool,
    log: Vec<Event>,
}

pub fn start_session(plan: SessionPlan, wall_ms: u64) -> SessionState {
    let n = plan.scheduled.len();
    let mut state = SessionState {
        playhead_ms: 0,
        answered: Vec::new(),
        active: None,
        paused_by_question: false,
        shown: vec![false; n],
        attempts: vec![0; n],
        timer_from_ms: None,
        completed: false,
        log: Vec::new(),
        plan,
    };
    let body = EventBody::SessionStarted {
        question_count: n,
        strategies: state.plan.selected_strategies,
        video_duration_ms: state.plan.video_duration_ms,
    };
    state.push(wall_ms, None, body);
    state
}

impl SessionState {
    pub fn plan(&self) -> &SessionPlan {
        &self.plan
    }

    pub fn playhead_ms(&self) -> u64 {
        self.playhead_ms
    }

    pub fn answered(&self) -> &[String] {
        &self.answered
    }

    pub fn is_answered(&self, question_id: &str) -> bool {
        self.answered.iter().any(|a| a == question_id)
    }

    pub fn active_question(&self) -> Option<&Question> {
        self.active.map(|i| &self.plan.scheduled[i].question)
    }

    pub fn active_popup(&self) -> Option<Popup> {
        self.active.map(|i| self.popup(i))
    }

    pub fn paused_by_question(&self) -> bool {
        self.paused_by_question
    }

    pub fn remaining(&self) -> usize {
        self.plan.len() - self.answered.len()
    }

    pub fn is_completed(&self) -> bool {
        self.completed
    }

    pub fn log(&self) -> &[Event] {
        &self.log
    }

    pub fn answer_records(&self) -> impl Iterator<Item = &AnswerRecord> {
        self.log.iter().filter_map(|e| match &e.body {
            EventBody::AnswerSubmitted(r) => Some(r),
            _ => None,
        })
    }

    fn first_unanswered(&self) -> Option<usize> {
        self.plan.scheduled.iter().position(|s| !self.is_answered(&s.question.id))
    }

    /// Furthest playhead currently allowed.
    pub fn gate(&self) -> u64 {
        self.first_unanswered().map(|i| self.plan.scheduled[i].popup_ms).unwrap_or(self.plan.video_duration_ms)
    }

    fn popup(&self, i: usize) -> Popup {
        let s = &self.plan.scheduled[i];
        Popup::new(&s.question, s.popup_ms, i + 1, self.plan.len())
    }

    fn push(&mut self, wall_ms: u64, question_id: Option<String>, body: EventBody) {
        let at_wall_ms = self.log.last().map_or(wall_ms, |e| e.at_wall_ms.max(wall_ms));
        self.log.push(Event { at_wall_ms, question_id, body });
    }

    fn last_wall(&self, wall_ms: u64) -> u64 {
        self.log.last().map_or(wall_ms, |e| e.at_wall_ms.max(wall_ms))
    }

    pub fn on_time_update(&mut self, wall_ms: u64, new_playhead_ms: u64) -> Result<TimeUpdate, EngineError> {
        let gate = self.gate();
        if self.active.is_some() && self.playhead_ms >= gate {
            return Err(EngineError::PausedForQuestion);
        }
        let mut popup = None;
        if new_playhead_ms >= gate {
            self.playhead_ms = gate;
            if let (None, Some(i)) = (self.active, self.first_unanswered()) {
                self.active = Some(i);
                self.paused_by_question = true;
                if !self.shown[i] {
                    self.shown[i] = true;
                    self.timer_from_ms = Some(self.last_wall(wall_ms));
                    let body = EventBody::PopupShown { playhead_ms: gate, position: i + 1, total: self.plan.len() };
                    self.push(wall_ms, Some(self.plan.scheduled[i].question.id.clone()), body);
                }
                popup = Some(self.popup(i));
            }
        } else {
            self.playhead_ms = new_playhead_ms;
        }
        self.completion_check(wall_ms);
        Ok(TimeUpdate { playhead_ms: self.playhead_ms, popup })
    }

    pub fn submit_answer(&mut self, wall_ms: u64, question_id: &str, chosen_index: usize) -> Result<AnswerOutcome, EngineError> {
        let Some(i) = self.active else {
            return match self.plan.position(question_id) {
                Some(_) => Err(EngineError::NoActiveQuestion),
                None => Err(EngineError::UnknownQuestion(question_id.to_string())),
            };
        };
        let question = &self.plan.scheduled[i].question;
        if question.id != question_id {
            return match self.plan.position(question_id) {
                Some(_) => Err(EngineError::QuestionMismatch { expected: question.id.clone(), found: question_id.to_string() }),
                None => Err(EngineError::UnknownQuestion(question_id.to_string())),
            };
        }
        if chosen_index >= question.answers.len() {
            return Err(EngineError::OptionOutOfRange { index: chosen_index, count: question.answers.len() });
        }
        let correct = question.answers[chosen_index].is_correct;
        let reference_start_ms = question.transcript_timestamp_start;
        let strategy = question.strategy;
        let id = question.id.clone();
        let wall = self.last_wall(wall_ms);
        self.attempts[i] += 1;
        let record = AnswerRecord {
            question_id: id.clone(),
            strategy,
            attempt_index: self.attempts[i],
            chosen_index,
            correct,
            elapsed_ms: wall - self.timer_from_ms.unwrap_or(wall).min(wall),
        };
        self.push(wall, Some(id.clone()), EventBody::AnswerSubmitted(record));
        let feedback = if correct { Feedback::Encouragement } else { Feedback::ReviewReference { reference_start_ms } };
        self.push(wall, Some(id.clone()), EventBody::FeedbackShown(feedback.clone()));
        if correct {
            self.answered.push(id);
            self.active = None;
            self.paused_by_question = false;
            self.timer_from_ms = None;
        } else {
            self.timer_from_ms = Some(wall);
        }
        self.completion_check(wall);
        Ok(AnswerOutcome { feedback, remaining_count: self.remaining() })
    }

    /// Moves the playhead, never past the gate. Returns the granted position.
    pub fn request_seek(&mut self, wall_ms: u64, target_ms: i64) -> Result<u64, EngineError> {
        if target_ms < 0 {
            return Err(EngineError::NegativeTarget(target_ms));
        }
        let requested_ms = target_ms as u64;
        let granted_ms = requested_ms.min(self.gate());
        let from_ms = self.playhead_ms;
        self.playhead_ms = granted_ms;
        let qid = self.active_question().map(|q| q.id.clone());
        self.push(wall_ms, qid, EventBody::SeekPerformed { from_ms, requested_ms, granted_ms });
        self.completion_check(wall_ms);
        Ok(granted_ms)
    }

    /// Logs SessionCompleted the first time every question is answered and the
    /// playhead sits at the end of the video.
    pub fn completion_check(&mut self, wall_ms: u64) -> Option<&Event> {
        if self.completed || self.remaining() > 0 || self.playhead_ms < self.plan.video_duration_ms {
            return None;
        }
        self.completed = true;
        let attempts = self.attempts.iter().map(|&a| a as usize).sum();
        self.push(wall_ms, None, EventBody::SessionCompleted { answered: self.answered.len(), attempts });
        self.log.last()
    }
}

/// One JSON object per line, each line newline-terminated.
pub fn export_jsonl(log: &[Event]) -> String {
    let mut out = String::new();
    for e in log {
        out.push_str(&serde_json::to_string(e).expect("events always serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_jsonl(text: &str) -> Result<Vec<Event>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bank::{select_session_questions, QuestionBank};
    use crate::bank::tests::tf;

    fn state(times: &[u64]) -> SessionState {
        let qs = times.iter().enumerate().map(|(i, t)| tf(&format!("q{i}"), Strategy::Transcript, *t)).collect();
        let bank = QuestionBank::new("v", 100_000, qs).unwrap();
        let plan = select_session_questions(&bank, StrategySet::single(Strategy::Transcript), times.len(), 0).unwrap();
        start_session(plan, 0)
    }

    #[test]
    fn gate_and_popup() {
        let mut s = state(&[60_000]);
        assert_eq!(s.gate(), 60_000);
        assert_eq!(s.on_time_update(1, 59_000).unwrap().popup, None);
        let up = s.on_time_update(2, 61_500).unwrap();
        assert_eq!(up.playhead_ms, 60_000);
        assert_eq!(up.popup.unwrap().question_id, "q0");
        assert_eq!(s.on_time_update(3, 60_500), Err(EngineError::PausedForQuestion));
    }

    #[test]
    fn wrong_then_right() {
        let mut s = state(&[50_000]);
        s.on_time_update(1000, 50_000).unwrap();
        let out = s.submit_answer(4000, "q0", 1).unwrap();
        assert_eq!(out.feedback, Feedback::ReviewReference { reference_start_ms: 45_000 });
        assert_eq!(s.active_question().unwrap().id, "q0");
        let out = s.submit_answer(9000, "q0", 0).unwrap();
        assert_eq!(out.feedback, Feedback::Encouragement);
        assert_eq!(out.remaining_count, 0);
        let recs: Vec<_> = s.answer_records().map(|r| (r.attempt_index, r.correct, r.elapsed_ms)).collect();
        assert_eq!(recs, [(1, false, 3000), (2, true, 5000)]);
        assert_eq!(s.gate(), 100_000);
    }

    #[test]
    fn rewind_while_active_does_not_repeat_popup() {
        let mut s = state(&[50_000]);
        s.on_time_update(0, 50_000).unwrap();
        assert_eq!(s.request_seek(1, 45_000).unwrap(), 45_000);
        assert_eq!(s.active_question().unwrap().id, "q0");
        assert_eq!(s.on_time_update(2, 48_000).unwrap().playhead_ms, 48_000);
        let up = s.on_time_update(3, 52_000).unwrap();
        assert_eq!(up.playhead_ms, 50_000);
        let popups = s.log().iter().filter(|e| matches!(e.body, EventBody::PopupShown { .. })).count();
        assert_eq!(popups, 1);
    }

    #[test]
    fn seek_clamps_and_rejects_negative() {
        let mut s = state(&[60_000]);
        assert_eq!(s.request_seek(0, 90_000).unwrap(), 60_000);
        assert_eq!(s.request_seek(0, -1), Err(EngineError::NegativeTarget(-1)));
    }

    #[test]
    fn answer_errors() {
        let mut s = state(&[60_000, 70_000]);
        assert_eq!(s.submit_answer(0, "q0", 0), Err(EngineError::NoActiveQuestion));
        assert_eq!(s.submit_answer(0, "zz", 0), Err(EngineError::UnknownQuestion("zz".into())));
        s.on_time_update(0, 60_000).unwrap();
        assert!(matches!(s.submit_answer(0, "q1", 0), Err(EngineError::QuestionMismatch { .. })));
        assert_eq!(s.submit_answer(0, "q0", 2), Err(EngineError::OptionOutOfRange { index: 2, count: 2 }));
    }

    #[test]
    fn completes_once_at_end() {
        let mut s = state(&[10_000]);
        s.on_time_update(0, 10_000).unwrap();
        s.submit_answer(1, "q0", 0).unwrap();
        assert!(!s.is_completed());
        s.on_time_update(2, 100_000).unwrap();
        s.on_time_update(3, 100_000).unwrap();
        let done: Vec<_> = s.log().iter().filter(|e| matches!(e.body, EventBody::SessionCompleted { .. })).collect();
        assert_eq!(done.len(), 1);
        assert!(matches!(s.log().last().unwrap().body, EventBody::SessionCompleted { answered: 1, attempts: 1 }));
    }

    #[test]
    fn event_json_shape() {
        let s = state(&[10_000]);
        let line = export_jsonl(s.log());
        assert!(line.starts_with(r#"{"at_wall_ms":0,"question_id":null,"kind":"SessionStarted","payload":{"#), "{line}");
        assert_eq!(parse_jsonl(&line).unwrap(), s.log());
    }
}
