//! Scripted playback sessions with a virtual wall clock.

use serde::{Deserialize, Serialize};

use crate::bank::{select_session_questions, QuestionBank, SelectionError, DEFAULT_SESSION_SIZE};
use crate::engine::{start_session, EngineError, SessionState};
use crate::strategy::StrategySet;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScriptError {
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error("action {step}: {source}")]
    Engine { step: usize, source: EngineError },
    #[error("action {step}: {detail}")]
    Invalid { step: usize, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedChoice {
    Correct,
    Wrong,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Choice {
    Named(NamedChoice),
    Index(usize),
}

/// `after_ms` advances the virtual wall clock before the action runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    Time {
        playhead_ms: u64,
        #[serde(default)]
        after_ms: u64,
    },
    /// Ticks forward by `step_ms` (playhead and wall clock alike) until
    /// `until_ms`, a popup, or the gate.
    Play { until_ms: u64, step_ms: u64 },
    Answer {
        choice: Choice,
        #[serde(default)]
        after_ms: u64,
    },
    Seek {
        target_ms: i64,
        #[serde(default)]
        after_ms: u64,
    },
}

fn default_size() -> usize {
    DEFAULT_SESSION_SIZE
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    pub strategies: StrategySet,
    pub seed: u64,
    #[serde(default = "default_size")]
    pub session_size: usize,
    pub actions: Vec<Action>,
}

pub fn run_script(bank: &QuestionBank, script: &Script) -> Result<SessionState, ScriptError> {
    let plan = select_session_questions(bank, script.strategies, script.session_size, script.seed)?;
    let mut state = start_session(plan, 0);
    let mut wall = 0u64;
    for (step, action) in script.actions.iter().enumerate() {
        let engine = |source| ScriptError::Engine { step, source };
        match *action {
            Action::Time { playhead_ms, after_ms } => {
                wall += after_ms;
                state.on_time_update(wall, playhead_ms).map_err(engine)?;
            }
            Action::Play { until_ms, step_ms } => {
                if step_ms == 0 {
                    return Err(ScriptError::Invalid { step, detail: "step_ms must be positive".into() });
                }
                while state.playhead_ms() < until_ms && !(state.active_question().is_some() && state.playhead_ms() >= state.gate()) {
                    let next = (state.playhead_ms() + step_ms).min(until_ms);
                    wall += step_ms;
                    let update = state.on_time_update(wall, next).map_err(engine)?;
                    if update.popup.is_some() || update.playhead_ms < next {
                        break;
                    }
                }
            }
            Action::Answer { choice, after_ms } => {
                wall += after_ms;
                let q = state.active_question().ok_or(ScriptError::Engine { step, source: EngineError::NoActiveQuestion })?;
                let index = match choice {
                    Choice::Index(i) => i,
                    Choice::Named(NamedChoice::Correct) => q.correct_index().expect("bank questions have one correct answer"),
                    Choice::Named(NamedChoice::Wrong) => q
                        .answers
                        .iter()
                        .position(|a| !a.is_correct)
                        .ok_or_else(|| ScriptError::Invalid { step, detail: "question has no wrong option".into() })?,
                };
                let id = q.id.clone();
                state.submit_answer(wall, &id, index).map_err(engine)?;
            }
            Action::Seek { target_ms, after_ms } => {
                wall += after_ms;
                state.request_seek(wall, target_ms).map_err(engine)?;
            }
        }
    }
    Ok(state)
}
