use serde_json::Value;

use super::validate::{default_popup_ms, resolve_reference};
use super::{Draft, PipelineError};
use crate::bank::Answer;
use crate::captions::Transcript;
use crate::strategy::Strategy;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedCandidates {
    pub drafts: Vec<Draft>,
    pub malformed_count: usize,
}

/// Top-level `{...}` spans in `text`, ignoring braces inside JSON strings.
/// An object still open at the end of input is returned as an unterminated tail.
fn object_spans(text: &str) -> (Vec<&str>, bool) {
    let mut spans = Vec::new();
    let (mut depth, mut in_string, mut escaped, mut start) = (0usize, false, false, 0usize);
    for (i, c) in text.char_indices() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' if depth > 0 => in_string = true,
            '{' => {
                if depth == 0 {
                    start = i;
                }
                depth += 1;
            }
            '}' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    spans.push(&text[start..=i]);
                }
            }
            _ => {}
        }
    }
    (spans, depth > 0)
}

fn draft_from(value: &Value, strategy: Strategy, transcript: &Transcript) -> Option<Draft> {
    let obj = value.as_object()?;
    let kind = obj.get("kind")?.as_str()?.trim().to_string();
    let question = obj.get("question")?.as_str()?.trim().to_string();
    let mut answers = obj
        .get("answers")?
        .as_array()?
        .iter()
        .map(|a| Some(Answer::new(a.get("text")?.as_str()?.trim(), a.get("is_correct")?.as_bool()?)))
        .collect::<Option<Vec<_>>>()?;
    if answers.is_empty() || question.is_empty() {
        return None;
    }
    if kind == "TF" {
        canonicalize_tf(&mut answers);
    }
    let transcript_timestamp_start = obj.get("transcript_timestamp_start")?.as_u64()?;
    let transcript_reference = obj.get("transcript_reference")?.as_str()?.trim().to_string();
    let timestamp = match obj.get("timestamp") {
        Some(t) => t.as_u64()?,
        None => resolve_reference(transcript, transcript_timestamp_start, &transcript_reference)
            .map(|span| default_popup_ms(span.end_ms, transcript.duration_ms()))
            .unwrap_or(transcript_timestamp_start),
    };
    Some(Draft {
        id: String::new(),
        strategy,
        kind,
        question,
        answers,
        transcript_timestamp_start,
        transcript_reference,
        timestamp,
    })
}

/// Normalizes label case and puts True before False.
fn canonicalize_tf(answers: &mut [Answer]) {
    if answers.len() != 2 {
        return;
    }
    let lower: Vec<String> = answers.iter().map(|a| a.text.to_lowercase()).collect();
    match (lower[0].as_str(), lower[1].as_str()) {
        ("true", "false") => {}
        ("false", "true") => answers.swap(0, 1),
        _ => return,
    }
    answers[0].text = "True".into();
    answers[1].text = "False".into();
}

/// Extracts question objects from untrusted model output.
pub fn parse_candidates(output: &str, strategy: Strategy, transcript: &Transcript) -> Result<ParsedCandidates, PipelineError> {
    let (spans, unterminated) = object_spans(output);
    let mut drafts = Vec::new();
    let mut malformed_count = usize::from(unterminated);
    for span in spans {
        match serde_json::from_str::<Value>(span).ok().and_then(|v| draft_from(&v, strategy, transcript)) {
            Some(d) => drafts.push(d),
            None => malformed_count += 1,
        }
    }
    if drafts.is_empty() {
        return Err(PipelineError::NoParsableCandidates { malformed_count });
    }
    Ok(ParsedCandidates { drafts, malformed_count })
}
