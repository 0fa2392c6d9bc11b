use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Draft, GenerationConfig};
use crate::annotations::EnhancedTranscript;
use crate::bank::{QuestionKind, POPUP_OFFSET_MS};
use crate::captions::Transcript;
use crate::strategy::Strategy;

/// Longest run of segments a single reference excerpt may span.
pub const MAX_REFERENCE_SEGMENTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "violation")]
pub enum Violation {
    /// The kind is neither TF nor MC, or a TF item does not offer True and False.
    NotClosedType { kind: String },
    WrongOptionCount { expected: usize, found: usize },
    /// Anything other than exactly one correct option.
    MultipleCorrect { correct: usize },
    StemTooLong { words: usize, limit: usize },
    OptionTooLong { option: usize, words: usize, limit: usize },
    DoubleNegative { sentence: String },
    ComplexWord { word: String, replacement: String },
    MissingReference,
    ReferenceOutOfRange { start_ms: u64, reason: String },
    PopupBeforeReference { popup_ms: u64, reference_end_ms: u64 },
    DuplicateStem { stem: String },
    /// Emotion or visual question whose reference span touches no cue.
    NotAnchored { start_ms: u64, end_ms: u64 },
}

impl Violation {
    pub fn name(&self) -> &'static str {
        match self {
            Violation::NotClosedType { .. } => "NotClosedType",
            Violation::WrongOptionCount { .. } => "WrongOptionCount",
            Violation::MultipleCorrect { .. } => "MultipleCorrect",
            Violation::StemTooLong { .. } => "StemTooLong",
            Violation::OptionTooLong { .. } => "OptionTooLong",
            Violation::DoubleNegative { .. } => "DoubleNegative",
            Violation::ComplexWord { .. } => "ComplexWord",
            Violation::MissingReference => "MissingReference",
            Violation::ReferenceOutOfRange { .. } => "ReferenceOutOfRange",
            Violation::PopupBeforeReference { .. } => "PopupBeforeReference",
            Violation::DuplicateStem { .. } => "DuplicateStem",
            Violation::NotAnchored { .. } => "NotAnchored",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotClosedType { kind } => {
                write!(f, "The question type {kind:?} is not allowed. Use \"TF\" with options True and False, or \"MC\".")
            }
            Violation::WrongOptionCount { expected, found } => {
                write!(f, "The question has {found} options. It must have exactly {expected}.")
            }
            Violation::MultipleCorrect { correct } => {
                write!(f, "{correct} options are marked correct. Mark exactly one option as correct.")
            }
            Violation::StemTooLong { words, limit } => {
                write!(f, "The question has {words} words. Keep it to at most {limit} words.")
            }
            Violation::OptionTooLong { option, words, limit } => {
                write!(f, "Option {} has {words} words. Keep each option to at most {limit} words.", option + 1)
            }
            Violation::DoubleNegative { sentence } => {
                write!(f, "This sentence uses more than one negative word: {sentence:?}. Say it in a positive way.")
            }
            Violation::ComplexWord { word, replacement } => write!(f, "Use \"{replacement}\" instead of \"{word}\"."),
            Violation::MissingReference => write!(f, "The transcript_reference is empty. Quote the transcript text the answer comes from."),
            Violation::ReferenceOutOfRange { start_ms, reason } => {
                write!(f, "The reference at {start_ms} ms does not match the transcript: {reason}.")
            }
            Violation::PopupBeforeReference { popup_ms, reference_end_ms } => write!(
                f,
                "The question would appear at {popup_ms} ms, before the referenced content ends at {reference_end_ms} ms."
            ),
            Violation::DuplicateStem { stem } => write!(f, "Another question already asks {stem:?}. Ask about something else."),
            Violation::NotAnchored { start_ms, end_ms } => write!(
                f,
                "The referenced span {start_ms}-{end_ms} ms is not inside any marked segment. Base the question on a marked part."
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub question_id: String,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_accepted(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Transcript segments a reference excerpt was found in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferenceSpan {
    pub first_segment: usize,
    pub last_segment: usize,
    pub start_ms: u64,
    pub end_ms: u64,
}

fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Locates `excerpt` in the segments starting exactly at `start_ms`.
pub fn resolve_reference(transcript: &Transcript, start_ms: u64, excerpt: &str) -> Result<ReferenceSpan, String> {
    if start_ms > transcript.duration_ms() {
        return Err(format!("start is after the end of the video ({} ms)", transcript.duration_ms()));
    }
    let first = transcript
        .segment_starting_at(start_ms)
        .ok_or_else(|| "no transcript segment starts at this time".to_string())?;
    let needle = normalize(excerpt);
    let segs = transcript.segments();
    let head_len = normalize(&segs[first].text).len();
    let mut joined = String::new();
    for (last, seg) in segs.iter().enumerate().skip(first).take(MAX_REFERENCE_SEGMENTS) {
        if !joined.is_empty() {
            joined.push(' ');
        }
        joined.push_str(&normalize(&seg.text));
        if joined.match_indices(&needle).any(|(at, _)| at < head_len) {
            return Ok(ReferenceSpan { first_segment: first, last_segment: last, start_ms, end_ms: seg.end_ms });
        }
    }
    Err("the quoted text is not in the transcript at that time".to_string())
}

/// Popup time used when the model does not supply one.
pub fn default_popup_ms(span_end_ms: u64, duration_ms: u64) -> u64 {
    (span_end_ms + POPUP_OFFSET_MS).min(duration_ms)
}

pub(crate) fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\'' || c == '’'))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

fn is_negation(word: &str) -> bool {
    matches!(word, "not" | "no" | "never" | "neither" | "nor" | "none") || word.ends_with("n't") || word.ends_with("n’t")
}

fn double_negatives(text: &str) -> Vec<String> {
    text.split_inclusive(['.', '!', '?'])
        .map(str::trim)
        .filter(|s| words(s).filter(|w| is_negation(w)).count() >= 2)
        .map(str::to_string)
        .collect()
}

/// Checks one draft against every rule, in a fixed order.
pub fn validate_question(draft: &Draft, enhanced: &EnhancedTranscript, config: &GenerationConfig) -> ValidationReport {
    let mut v = Vec::new();
    let kind = QuestionKind::parse(draft.kind.trim());
    let labels: Vec<&str> = draft.answers.iter().map(|a| a.text.trim()).collect();
    match kind {
        None => v.push(Violation::NotClosedType { kind: draft.kind.clone() }),
        Some(QuestionKind::TF) if labels.len() != 2 => v.push(Violation::WrongOptionCount { expected: 2, found: labels.len() }),
        Some(QuestionKind::TF) if labels != ["True", "False"] => v.push(Violation::NotClosedType { kind: draft.kind.clone() }),
        Some(QuestionKind::MC) if labels.len() != config.mc_option_count => {
            v.push(Violation::WrongOptionCount { expected: config.mc_option_count, found: labels.len() })
        }
        Some(_) => {}
    }
    let correct = draft.answers.iter().filter(|a| a.is_correct).count();
    if correct != 1 {
        v.push(Violation::MultipleCorrect { correct });
    }
    let stem_words = draft.question.split_whitespace().count();
    if stem_words > config.max_stem_words {
        v.push(Violation::StemTooLong { words: stem_words, limit: config.max_stem_words });
    }
    for (i, a) in draft.answers.iter().enumerate() {
        let n = a.text.split_whitespace().count();
        if n > config.max_option_words {
            v.push(Violation::OptionTooLong { option: i, words: n, limit: config.max_option_words });
        }
    }
    let texts = std::iter::once(draft.question.as_str()).chain(draft.answers.iter().map(|a| a.text.as_str()));
    for text in texts.clone() {
        v.extend(double_negatives(text).into_iter().map(|sentence| Violation::DoubleNegative { sentence }));
    }
    let mut seen = Vec::new();
    for w in texts.flat_map(words) {
        if let Some(replacement) = config.simplification_lexicon.get(&w) {
            if !seen.contains(&w) {
                seen.push(w.clone());
                v.push(Violation::ComplexWord { word: w, replacement: replacement.clone() });
            }
        }
    }
    let transcript = enhanced.base();
    if draft.transcript_reference.trim().is_empty() {
        v.push(Violation::MissingReference);
    } else {
        match resolve_reference(transcript, draft.transcript_timestamp_start, &draft.transcript_reference) {
            Err(reason) => v.push(Violation::ReferenceOutOfRange { start_ms: draft.transcript_timestamp_start, reason }),
            Ok(span) => {
                if draft.timestamp < span.end_ms {
                    v.push(Violation::PopupBeforeReference { popup_ms: draft.timestamp, reference_end_ms: span.end_ms });
                } else if draft.timestamp > transcript.duration_ms() {
                    v.push(Violation::ReferenceOutOfRange {
                        start_ms: draft.transcript_timestamp_start,
                        reason: format!("popup {} ms is after the end of the video", draft.timestamp),
                    });
                }
                if draft.strategy != Strategy::Transcript
                    && !enhanced.cue_spans().iter().any(|&(s, e)| s < span.end_ms && span.start_ms < e)
                {
                    v.push(Violation::NotAnchored { start_ms: span.start_ms, end_ms: span.end_ms });
                }
            }
        }
    }
    ValidationReport { question_id: draft.id.clone(), violations: v }
}

/// Count of each violation kind across reports.
pub fn tally<'a>(reports: impl IntoIterator<Item = &'a ValidationReport>) -> BTreeMap<&'static str, usize> {
    let mut out = BTreeMap::new();
    for r in reports {
        for v in &r.violations {
            *out.entry(v.name()).or_insert(0) += 1;
        }
    }
    out
}

pub(crate) fn stem_key(stem: &str) -> String {
    words(stem).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bank::Answer;
    use crate::captions::{RawCue, Transcript};

    fn transcript() -> Transcript {
        let texts = ["Welcome to the lesson.", "AR means augmented reality.", "It adds digital", "information to the world."];
        let cues = texts
            .iter()
            .enumerate()
            .map(|(i, t)| RawCue { start_ms: i as u64 * 5000, end_ms: i as u64 * 5000 + 4000, text: t.to_string() })
            .collect();
        Transcript::from_cues(cues).unwrap()
    }

    fn draft(question: &str) -> Draft {
        Draft {
            id: "transcript-01".into(),
            strategy: Strategy::Transcript,
            kind: "TF".into(),
            question: question.into(),
            answers: vec![Answer::new("True", true), Answer::new("False", false)],
            transcript_timestamp_start: 5000,
            transcript_reference: "AR means augmented reality.".into(),
            timestamp: 11_000,
        }
    }

    fn check(d: &Draft) -> Vec<Violation> {
        validate_question(d, &EnhancedTranscript::plain(transcript()), &GenerationConfig::default()).violations
    }

    #[test]
    fn clean_tf_passes() {
        assert_eq!(check(&draft("AR means Augmented Reality.")), vec![]);
    }

    #[test]
    fn double_negative() {
        let v = check(&draft("It is not true that AR was never used before 1990."));
        assert!(matches!(&v[..], [Violation::DoubleNegative { .. }]), "{v:?}");
        assert!(check(&draft("AR isn't new and it is not hard.")).iter().any(|v| v.name() == "DoubleNegative"));
        assert_eq!(check(&draft("AR is not new. It is no fad.")), vec![]);
    }

    #[test]
    fn mc_option_count() {
        let mut d = draft("Which word does AR stand for?");
        d.kind = "MC".into();
        d.answers = (0..5).map(|i| Answer::new(format!("opt {i}"), i == 0)).collect();
        assert_eq!(check(&d), vec![Violation::WrongOptionCount { expected: 4, found: 5 }]);
    }

    #[test]
    fn complex_word_reported_once() {
        let v = check(&draft("Was the first foray into AR a foray by Boeing?"));
        assert_eq!(v, vec![Violation::ComplexWord { word: "foray".into(), replacement: "attempt".into() }]);
    }

    #[test]
    fn reference_spanning_segments() {
        let mut d = draft("AR adds digital information.");
        d.transcript_timestamp_start = 10_000;
        d.transcript_reference = "It adds  digital\ninformation to the world".into();
        d.timestamp = 19_000;
        assert_eq!(check(&d), vec![]);
        d.timestamp = 18_999;
        assert_eq!(check(&d), vec![Violation::PopupBeforeReference { popup_ms: 18_999, reference_end_ms: 19_000 }]);
    }

    #[test]
    fn reference_must_start_in_first_segment() {
        let mut d = draft("AR adds digital information.");
        d.transcript_timestamp_start = 5000;
        d.transcript_reference = "information to the world".into();
        d.timestamp = 20_000;
        assert!(matches!(&check(&d)[..], [Violation::ReferenceOutOfRange { .. }]));
        d.transcript_timestamp_start = 5001;
        assert!(matches!(&check(&d)[..], [Violation::ReferenceOutOfRange { .. }]));
        d.transcript_reference = " ".into();
        assert_eq!(check(&d), vec![Violation::MissingReference]);
    }

    #[test]
    fn anchoring_needs_overlap() {
        use crate::annotations::{build_enhanced_transcript, EmotionCue};
        let cue = EmotionCue { start_ms: 9000, end_ms: 12_000, support_count: 3 };
        let enhanced = build_enhanced_transcript(&transcript(), &[cue]).unwrap();
        let mut d = draft("AR means Augmented Reality.");
        d.strategy = Strategy::Emotion;
        let cfg = GenerationConfig::for_strategy(Strategy::Emotion);
        assert_eq!(validate_question(&d, &enhanced, &cfg).violations, vec![Violation::NotAnchored { start_ms: 5000, end_ms: 9000 }]);
        d.transcript_timestamp_start = 10_000;
        d.transcript_reference = "It adds digital".into();
        d.timestamp = 16_000;
        assert_eq!(validate_question(&d, &enhanced, &cfg).violations, vec![]);
    }

    #[test]
    fn ordered_multiple_violations() {
        let mut d = draft(&"word ".repeat(26));
        d.answers[1].is_correct = true;
        let names: Vec<&str> = check(&d).iter().map(Violation::name).collect();
        assert_eq!(names, ["MultipleCorrect", "StemTooLong"]);
    }
}
