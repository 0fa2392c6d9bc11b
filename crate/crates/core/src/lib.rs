//! Generate accessible in-video quiz questions from lesson captions and learner
//! annotations, then deliver them through a gated, server-authoritative video
//! session with feedback, event logging, and post-hoc analytics.
//!
//! The crate is organised the way the data flows:
//!
//! * [`captions`] parses WebVTT/SRT into a [`captions::Transcript`].
//! * [`annotations`] aggregates learner emotion observations and visual
//!   annotations into cues and fuses them with the transcript.
//! * [`llm`] is the single seam for every model call (live HTTP, record, replay).
//! * [`pipeline`] builds prompts, parses and validates candidates, and runs the
//!   revision loop.
//! * [`bank`] holds the canonical question record, bank persistence, and
//!   session selection.
//! * [`chat`] is the deterministic strategy-selection dialog.
//! * [`engine`] is the gated playback state machine.
//! * [`analytics`] computes time-to-answer, correct-rate, Likert, attitude and
//!   correlation statistics.
//! * [`service`] exposes all of it over JSON/HTTP.
//!
//! Runnable walkthroughs for each capability live in the crate's `examples/`
//! directory.

pub mod analytics;
pub mod annotations;
pub mod bank;
pub mod captions;
pub mod chat;
pub mod cli;
pub mod engine;
pub mod llm;
pub mod pipeline;
pub mod service;
pub mod simulate;
pub mod strategy;

pub use strategy::{Strategy, StrategySet};
