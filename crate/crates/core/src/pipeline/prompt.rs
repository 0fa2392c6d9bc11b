use serde::{Deserialize, Serialize};
use serde_json::json;

use super::validate::ValidationReport;
use super::{Draft, GenerationConfig, PipelineError};
use crate::annotations::{EnhancedKind, EnhancedTranscript};
use crate::captions::render_segment;
use crate::llm::{ChatMessage, CompletionRequest};
use crate::strategy::Strategy;

/// Prompt text. Placeholders in braces are filled from [`GenerationConfig`]:
/// `{count}`, `{mc_option_count}`, `{max_stem_words}`, `{max_option_words}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptTemplates {
    pub generation_intro: String,
    pub criteria: Vec<String>,
    pub layout: String,
    pub emotion_markers: String,
    pub visual_markers: String,
    pub generation_request: String,
    pub revision_intro: String,
    pub revision_request: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            generation_intro: "You write quiz questions that pop up during an educational video watched by deaf and hard-of-hearing learners. \
Each question must follow these rules:"
                .into(),
            criteria: vec![
                "Every question can be answered from what the video says or shows.".into(),
                "Ask about key ideas, or about parts of the lesson that often confuse learners.".into(),
                "Use closed questions only: True/False (TF) or multiple choice (MC).".into(),
                "Use plain language: short sentences, common words, no compound clauses, and no double negatives.".into(),
            ],
            layout: "Write one JSON object per line and nothing else. Each object has these fields:\n\
- \"kind\": \"TF\" or \"MC\"\n\
- \"question\": the question, at most {max_stem_words} words\n\
- \"answers\": a list of {\"text\", \"is_correct\"} objects, each text at most {max_option_words} words; \
TF questions use exactly [\"True\", \"False\"] in that order; MC questions have exactly {mc_option_count} answers; exactly one answer is correct\n\
- \"transcript_timestamp_start\": the start time (ms) of the transcript line the answer comes from\n\
- \"transcript_reference\": the exact transcript text the answer comes from, starting in that line\n\
Transcript lines look like [index|start_ms-end_ms] text."
                .into(),
            emotion_markers: "Lines starting with <<EMOTION n=N>> mark parts where N or more learners looked confused. \
The marker names the transcript lines it covers. Base every question on a marked part."
                .into(),
            visual_markers: "Lines starting with <<VISUAL reason=R>> mark parts that annotators found hard to follow, \
for example because of fast movement or captions that do not line up. \
The marker names the transcript lines it covers. Base every question on a marked part."
                .into(),
            generation_request: "Write exactly {count} questions for this transcript.".into(),
            revision_intro: "You fix one quiz question for deaf and hard-of-hearing learners so that it follows the rules.".into(),
            revision_request: "Rewrite the question to fix every problem. Keep the same fact. Reply with exactly one JSON object in the same layout."
                .into(),
        }
    }
}

impl PromptTemplates {
    fn fill(&self, text: &str, config: &GenerationConfig) -> String {
        text.replace("{count}", &config.candidates_per_strategy.to_string())
            .replace("{mc_option_count}", &config.mc_option_count.to_string())
            .replace("{max_stem_words}", &config.max_stem_words.to_string())
            .replace("{max_option_words}", &config.max_option_words.to_string())
    }

    fn system(&self, intro: &str, config: &GenerationConfig) -> String {
        let mut out = self.fill(intro, config);
        for (i, c) in self.criteria.iter().enumerate() {
            out.push_str(&format!("\n{}. {}", i + 1, self.fill(c, config)));
        }
        out.push_str("\n\n");
        out.push_str(&self.fill(&self.layout, config));
        out
    }
}

fn expected_kind(strategy: Strategy) -> EnhancedKind {
    match strategy {
        Strategy::Transcript => EnhancedKind::Plain,
        Strategy::Emotion => EnhancedKind::Emotion,
        Strategy::Visual => EnhancedKind::Visual,
    }
}

pub fn build_generation_prompt(enhanced: &EnhancedTranscript, config: &GenerationConfig) -> Result<CompletionRequest, PipelineError> {
    if enhanced.kind() != expected_kind(config.strategy) {
        return Err(PipelineError::StrategyMismatch { strategy: config.strategy, transcript: enhanced.kind() });
    }
    let t = &config.templates;
    let mut system = t.system(&t.generation_intro, config);
    let markers = match enhanced.kind() {
        EnhancedKind::Plain => None,
        EnhancedKind::Emotion => Some(&t.emotion_markers),
        EnhancedKind::Visual => Some(&t.visual_markers),
    };
    if let Some(m) = markers {
        system.push_str("\n\n");
        system.push_str(&t.fill(m, config));
    }
    let user = format!("{}\n\nTranscript:\n{}", t.fill(&t.generation_request, config), enhanced.render());
    Ok(config.llm.request(vec![ChatMessage::system(system), ChatMessage::user(user)]))
}

/// The layout-shaped JSON of a draft, as quoted back to the model.
pub fn draft_json(draft: &Draft) -> String {
    let answers: Vec<_> = draft.answers.iter().map(|a| json!({"text": a.text, "is_correct": a.is_correct})).collect();
    json!({
        "kind": draft.kind,
        "question": draft.question,
        "answers": answers,
        "transcript_timestamp_start": draft.transcript_timestamp_start,
        "transcript_reference": draft.transcript_reference,
    })
    .to_string()
}

pub fn build_revision_prompt(
    draft: &Draft,
    report: &ValidationReport,
    enhanced: &EnhancedTranscript,
    config: &GenerationConfig,
) -> Result<CompletionRequest, PipelineError> {
    if report.violations.is_empty() {
        return Err(PipelineError::EmptyReport);
    }
    let t = &config.templates;
    let system = t.system(&t.revision_intro, config);
    let base = enhanced.base();
    let end = draft.timestamp.max(draft.transcript_timestamp_start + 1);
    let context: Vec<String> = base.segments()[base.overlapping(draft.transcript_timestamp_start, end)]
        .iter()
        .map(render_segment)
        .collect();
    let mut user = format!("Question:\n{}\n\nProblems:", draft_json(draft));
    for v in &report.violations {
        user.push_str(&format!("\n- {v}"));
    }
    if !context.is_empty() {
        user.push_str("\n\nTranscript lines:\n");
        user.push_str(&context.join("\n"));
    }
    user.push_str("\n\n");
    user.push_str(&t.fill(&t.revision_request, config));
    Ok(config.llm.request(vec![ChatMessage::system(system), ChatMessage::user(user)]))
}
