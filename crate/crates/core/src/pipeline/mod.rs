//! Strategy prompts, candidate parsing, validation, and the revision loop.

mod inputs;
mod parse;
mod prompt;
mod validate;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::annotations::{EnhancedKind, EnhancedTranscript};
use crate::bank::{Answer, Question, QuestionKind};
use crate::llm::{Gateway, LlmError, LlmSettings};
use crate::strategy::Strategy;

pub use inputs::{generate_bank, load_transcript, GenerateConfig, GenerateError, InputError, VideoInputs};
pub use parse::{parse_candidates, ParsedCandidates};
pub use prompt::{build_generation_prompt, build_revision_prompt, draft_json, PromptTemplates};
pub use validate::{
    default_popup_ms, resolve_reference, tally, validate_question, ReferenceSpan, ValidationReport, Violation,
    MAX_REFERENCE_SEGMENTS,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PipelineError {
    #[error("strategy {strategy} cannot use a {transcript:?} transcript")]
    StrategyMismatch { strategy: Strategy, transcript: EnhancedKind },
    #[error("a revision prompt needs at least one violation")]
    EmptyReport,
    #[error("no parsable candidates in model output ({malformed_count} malformed)")]
    NoParsableCandidates { malformed_count: usize },
    #[error("only {accepted} of {required} questions passed validation; remaining violations: {tallies:?}")]
    InsufficientValidQuestions { accepted: usize, required: usize, tallies: BTreeMap<String, usize> },
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub strategy: Strategy,
    pub candidates_per_strategy: usize,
    pub max_revision_rounds: usize,
    pub mc_option_count: usize,
    pub max_stem_words: usize,
    pub max_option_words: usize,
    /// Lowercase word to its plainer replacement.
    pub simplification_lexicon: BTreeMap<String, String>,
    pub llm: LlmSettings,
    pub templates: PromptTemplates,
}

pub fn default_lexicon() -> BTreeMap<String, String> {
    [
        ("foray", "attempt"),
        ("utilize", "use"),
        ("commence", "start"),
        ("facilitate", "help"),
        ("subsequently", "later"),
        ("approximately", "about"),
        ("endeavor", "try"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            strategy: Strategy::Transcript,
            candidates_per_strategy: 10,
            max_revision_rounds: 3,
            mc_option_count: 4,
            max_stem_words: 25,
            max_option_words: 12,
            simplification_lexicon: default_lexicon(),
            llm: LlmSettings::generation(),
            templates: PromptTemplates::default(),
        }
    }
}

impl GenerationConfig {
    pub fn for_strategy(strategy: Strategy) -> Self {
        GenerationConfig { strategy, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::InvalidConfig(m.to_string()));
        if self.candidates_per_strategy == 0 {
            return bad("candidates_per_strategy must be positive");
        }
        if !(3..=5).contains(&self.mc_option_count) {
            return bad("mc_option_count must be between 3 and 5");
        }
        if self.max_stem_words == 0 || self.max_option_words == 0 {
            return bad("word limits must be positive");
        }
        if let Some(k) = self.simplification_lexicon.keys().find(|k| **k != k.to_lowercase()) {
            return Err(PipelineError::InvalidConfig(format!("lexicon key {k:?} must be lowercase")));
        }
        Ok(())
    }
}

/// A parsed but not yet accepted question. `kind` is kept raw so that
/// non-closed kinds can be reported.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Draft {
    pub id: String,
    pub strategy: Strategy,
    pub kind: String,
    pub question: String,
    pub answers: Vec<Answer>,
    pub transcript_timestamp_start: u64,
    pub transcript_reference: String,
    pub timestamp: u64,
}

impl Draft {
    pub fn from_question(q: &Question) -> Self {
        Draft {
            id: q.id.clone(),
            strategy: q.strategy,
            kind: format!("{:?}", q.kind),
            question: q.question.clone(),
            answers: q.answers.clone(),
            transcript_timestamp_start: q.transcript_timestamp_start,
            transcript_reference: q.transcript_reference.clone(),
            timestamp: q.timestamp,
        }
    }

    /// None when the kind is not a closed type.
    pub fn to_question(&self) -> Option<Question> {
        Some(Question {
            answers: self.answers.clone(),
            id: self.id.clone(),
            kind: QuestionKind::parse(&self.kind)?,
            question: self.question.clone(),
            strategy: self.strategy,
            timestamp: self.timestamp,
            transcript_reference: self.transcript_reference.clone(),
            transcript_timestamp_start: self.transcript_timestamp_start,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineOutput {
    pub questions: Vec<Question>,
    /// Reports from the initial round, by draft index.
    pub initial_reports: Vec<ValidationReport>,
    pub malformed_count: usize,
    pub revision_calls: usize,
}

enum Revised {
    Accepted(Draft),
    Failed(ValidationReport),
}

fn check(
    draft: &Draft,
    index: usize,
    stems: &[(usize, String)],
    enhanced: &EnhancedTranscript,
    config: &GenerationConfig,
) -> ValidationReport {
    let mut report = validate_question(draft, enhanced, config);
    let key = validate::stem_key(&draft.question);
    if stems.iter().any(|(i, k)| *i != index && *k == key) {
        report.violations.push(Violation::DuplicateStem { stem: draft.question.clone() });
    }
    report
}

fn revise(
    mut draft: Draft,
    mut report: ValidationReport,
    index: usize,
    round0: &[(usize, String)],
    enhanced: &EnhancedTranscript,
    config: &GenerationConfig,
    gateway: &Gateway,
) -> Result<(Revised, usize), LlmError> {
    let mut calls = 0;
    for _ in 0..config.max_revision_rounds {
        let request = build_revision_prompt(&draft, &report, enhanced, config).expect("report is non-empty");
        let reply = gateway.complete(&request)?;
        calls += 1;
        let Ok(parsed) = parse_candidates(&reply.content, config.strategy, enhanced.base()) else {
            continue;
        };
        let mut candidate = parsed.drafts.into_iter().next().expect("parse yields at least one draft");
        candidate.id = draft.id.clone();
        let candidate_report = check(&candidate, index, round0, enhanced, config);
        draft = candidate;
        report = candidate_report;
        if report.is_accepted() {
            return Ok((Revised::Accepted(draft), calls));
        }
    }
    Ok((Revised::Failed(report), calls))
}

/// Generate, validate, and revise until `candidates_per_strategy` questions pass.
///
/// Revision calls for different drafts run concurrently; output order always
/// follows draft order.
pub fn run_pipeline(enhanced: &EnhancedTranscript, config: &GenerationConfig, gateway: &Gateway) -> Result<PipelineOutput, PipelineError> {
    config.validate()?;
    let request = build_generation_prompt(enhanced, config)?;
    let reply = gateway.complete(&request)?;
    let parsed = parse_candidates(&reply.content, config.strategy, enhanced.base())?;
    let mut drafts = parsed.drafts;
    for (i, d) in drafts.iter_mut().enumerate() {
        d.id = format!("{}-{:02}", config.strategy, i + 1);
    }
    let round0: Vec<(usize, String)> = drafts.iter().enumerate().map(|(i, d)| (i, validate::stem_key(&d.question))).collect();
    let initial_reports: Vec<ValidationReport> =
        drafts.iter().enumerate().map(|(i, d)| check(d, i, &round0[..i], enhanced, config)).collect();

    let outcomes: Vec<Result<(Revised, usize), LlmError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = drafts
            .iter()
            .zip(&initial_reports)
            .enumerate()
            .map(|(i, (d, r))| {
                let (d, r, round0) = (d.clone(), r.clone(), &round0);
                if r.is_accepted() {
                    None
                } else {
                    Some(scope.spawn(move || revise(d, r, i, round0, enhanced, config, gateway)))
                }
            })
            .collect();
        handles
            .into_iter()
            .zip(&drafts)
            .map(|(h, d)| match h {
                None => Ok((Revised::Accepted(d.clone()), 0)),
                Some(h) => h.join().expect("revision thread panicked"),
            })
            .collect()
    });

    let mut accepted = Vec::new();
    let mut failed = Vec::new();
    let mut revision_calls = 0;
    let mut seen = HashSet::new();
    for outcome in outcomes {
        let (revised, calls) = outcome?;
        revision_calls += calls;
        match revised {
            Revised::Accepted(d) => {
                let key = validate::stem_key(&d.question);
                if seen.insert(key) {
                    accepted.push(d.to_question().expect("accepted drafts have a closed kind"));
                } else {
                    failed.push(ValidationReport {
                        question_id: d.id.clone(),
                        violations: vec![Violation::DuplicateStem { stem: d.question.clone() }],
                    });
                }
            }
            Revised::Failed(report) => failed.push(report),
        }
    }
    if accepted.len() < config.candidates_per_strategy {
        let tallies = tally(&failed).into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        return Err(PipelineError::InsufficientValidQuestions {
            accepted: accepted.len(),
            required: config.candidates_per_strategy,
            tallies,
        });
    }
    Ok(PipelineOutput { questions: accepted, initial_reports, malformed_count: parsed.malformed_count, revision_calls })
}
