//! Learner-sourced annotations and the enhanced transcripts built from them.
//!
//! Emotion observations are aggregated into cues where at least `k` distinct
//! participants were simultaneously showing a negative expression. Intervals
//! are half-open: two observations that merely touch at an endpoint never
//! overlap.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::captions::{render_segment, Transcript};

/// Participant threshold used when none is configured.
pub const DEFAULT_THRESHOLD_K: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnnotationError {
    #[error("threshold k must be at least 1")]
    InvalidThreshold,
    #[error("observation {index} ({participant_id}) has start_ms >= end_ms or an empty participant id")]
    InvalidInterval { index: usize, participant_id: String },
    #[error("no observations given")]
    NoObservations,
    #[error("malformed row on line {line}: {detail}")]
    MalformedRow { line: u64, detail: String },
    #[error("unknown reason {value:?} on line {line}")]
    UnknownReason { line: u64, value: String },
    #[error("unknown role {value:?} on line {line}")]
    UnknownRole { line: u64, value: String },
    #[error("cue [{start_ms}, {end_ms}) lies outside the transcript (duration {duration_ms} ms)")]
    CueOutOfRange { start_ms: u64, end_ms: u64, duration_ms: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmotionObservation {
    pub participant_id: String,
    pub start_ms: u64,
    pub end_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmotionCue {
    pub start_ms: u64,
    pub end_ms: u64,
    /// Minimum number of distinct participants covering any instant of the cue.
    pub support_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VisualReason {
    IntensiveMovement,
    CaptionMisalignment,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AnnotatorRole {
    Learner,
    Instructor,
}

impl fmt::Display for VisualReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for VisualReason {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "IntensiveMovement" => Ok(VisualReason::IntensiveMovement),
            "CaptionMisalignment" => Ok(VisualReason::CaptionMisalignment),
            "Other" => Ok(VisualReason::Other),
            _ => Err(()),
        }
    }
}

impl FromStr for AnnotatorRole {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "Learner" => Ok(AnnotatorRole::Learner),
            "Instructor" => Ok(AnnotatorRole::Instructor),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VisualCue {
    pub start_ms: u64,
    pub end_ms: u64,
    pub reason: VisualReason,
    pub annotator_role: AnnotatorRole,
}

/// Anything that marks a time interval of the video for the prompt.
pub trait Cue {
    const KIND: EnhancedKind;

    fn span(&self) -> (u64, u64);

    fn marker_label(&self) -> String;
}

impl Cue for EmotionCue {
    const KIND: EnhancedKind = EnhancedKind::Emotion;

    fn span(&self) -> (u64, u64) {
        (self.start_ms, self.end_ms)
    }

    fn marker_label(&self) -> String {
        format!("<<EMOTION n={}>>", self.support_count)
    }
}

impl Cue for VisualCue {
    const KIND: EnhancedKind = EnhancedKind::Visual;

    fn span(&self) -> (u64, u64) {
        (self.start_ms, self.end_ms)
    }

    fn marker_label(&self) -> String {
        format!("<<VISUAL reason={}>>", self.reason)
    }
}

/// Computes the maximal intervals during which at least `threshold_k`
/// distinct participants are all inside one of their observations.
pub fn aggregate_emotion_cues(observations: &[EmotionObservation], threshold_k: u32) -> Result<Vec<EmotionCue>, AnnotationError> {
    if threshold_k < 1 {
        return Err(AnnotationError::InvalidThreshold);
    }
    if observations.is_empty() {
        return Err(AnnotationError::NoObservations);
    }

    let mut by_participant: BTreeMap<&str, Vec<(u64, u64)>> = BTreeMap::new();
    for (index, obs) in observations.iter().enumerate() {
        if obs.start_ms >= obs.end_ms || obs.participant_id.is_empty() {
            return Err(AnnotationError::InvalidInterval { index, participant_id: obs.participant_id.clone() });
        }
        by_participant.entry(&obs.participant_id).or_default().push((obs.start_ms, obs.end_ms));
    }

    // One participant contributes at most 1 to the count at any instant, so
    // each participant's own intervals are unioned first.
    let mut events: Vec<(u64, i64)> = Vec::new();
    for intervals in by_participant.values_mut() {
        for (start, end) in union_intervals(intervals) {
            events.push((start, 1));
            events.push((end, -1));
        }
    }
    events.sort_unstable();

    let mut cues: Vec<EmotionCue> = Vec::new();
    let mut count: i64 = 0;
    let mut i = 0;
    while i < events.len() {
        let pos = events[i].0;
        while i < events.len() && events[i].0 == pos {
            count += events[i].1;
            i += 1;
        }
        let Some(&(next, _)) = events.get(i) else { break };
        if count >= threshold_k as i64 {
            let support = count as u32;
            match cues.last_mut() {
                Some(last) if last.end_ms == pos => {
                    last.end_ms = next;
                    last.support_count = last.support_count.min(support);
                }
                _ => cues.push(EmotionCue { start_ms: pos, end_ms: next, support_count: support }),
            }
        }
    }
    Ok(cues)
}

fn union_intervals(intervals: &mut [(u64, u64)]) -> Vec<(u64, u64)> {
    intervals.sort_unstable();
    let mut out: Vec<(u64, u64)> = Vec::with_capacity(intervals.len());
    for &(start, end) in intervals.iter() {
        match out.last_mut() {
            Some(last) if start <= last.1 => last.1 = last.1.max(end),
            _ => out.push((start, end)),
        }
    }
    out
}

fn csv_reader(content: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(content.as_bytes())
}

fn check_header(reader: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<(), AnnotationError> {
    let headers = reader
        .headers()
        .map_err(|e| AnnotationError::MalformedRow { line: 1, detail: e.to_string() })?;
    if headers.iter().ne(expected.iter().copied()) {
        return Err(AnnotationError::MalformedRow {
            line: 1,
            detail: format!("expected header {:?}, found {:?}", expected.join(","), headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    Ok(())
}

fn parse_ms(field: Option<&str>, line: u64, name: &str) -> Result<u64, AnnotationError> {
    let raw = field.ok_or_else(|| AnnotationError::MalformedRow { line, detail: format!("missing {name}") })?;
    raw.parse()
        .map_err(|_| AnnotationError::MalformedRow { line, detail: format!("{name} is not a non-negative integer: {raw:?}") })
}

/// Reads the `participant_id,start_ms,end_ms` observation CSV.
pub fn load_emotion_observations(content: &str) -> Result<Vec<EmotionObservation>, AnnotationError> {
    let mut reader = csv_reader(content);
    check_header(&mut reader, &["participant_id", "start_ms", "end_ms"])?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| AnnotationError::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            detail: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(AnnotationError::MalformedRow { line, detail: format!("expected 3 fields, found {}", record.len()) });
        }
        let participant_id = record[0].to_string();
        let start_ms = parse_ms(record.get(1), line, "start_ms")?;
        let end_ms = parse_ms(record.get(2), line, "end_ms")?;
        if participant_id.is_empty() || start_ms >= end_ms {
            return Err(AnnotationError::MalformedRow { line, detail: "empty participant or start_ms >= end_ms".into() });
        }
        out.push(EmotionObservation { participant_id, start_ms, end_ms });
    }
    Ok(out)
}

/// Reads the `start_ms,end_ms,reason,role` visual annotation CSV, sorted by start.
pub fn load_visual_cues(content: &str) -> Result<Vec<VisualCue>, AnnotationError> {
    let mut reader = csv_reader(content);
    check_header(&mut reader, &["start_ms", "end_ms", "reason", "role"])?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| AnnotationError::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            detail: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 4 {
            return Err(AnnotationError::MalformedRow { line, detail: format!("expected 4 fields, found {}", record.len()) });
        }
        let start_ms = parse_ms(record.get(0), line, "start_ms")?;
        let end_ms = parse_ms(record.get(1), line, "end_ms")?;
        if start_ms >= end_ms {
            return Err(AnnotationError::MalformedRow { line, detail: "start_ms must be before end_ms".into() });
        }
        let reason = record[2]
            .parse()
            .map_err(|_| AnnotationError::UnknownReason { line, value: record[2].to_string() })?;
        let annotator_role = record[3]
            .parse()
            .map_err(|_| AnnotationError::UnknownRole { line, value: record[3].to_string() })?;
        out.push(VisualCue { start_ms, end_ms, reason, annotator_role });
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnhancedKind {
    Plain,
    Emotion,
    Visual,
}

/// A marker placed before segment `first_segment`, covering through `last_segment`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Marker {
    pub first_segment: usize,
    pub last_segment: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnhancedTranscript {
    base: Transcript,
    kind: EnhancedKind,
    markers: Vec<Marker>,
    /// The cue intervals behind the markers, sorted.
    cue_spans: Vec<(u64, u64)>,
}

impl EnhancedTranscript {
    pub fn plain(base: Transcript) -> Self {
        EnhancedTranscript { base, kind: EnhancedKind::Plain, markers: Vec::new(), cue_spans: Vec::new() }
    }

    pub fn base(&self) -> &Transcript {
        &self.base
    }

    pub fn kind(&self) -> EnhancedKind {
        self.kind
    }

    pub fn markers(&self) -> &[Marker] {
        &self.markers
    }

    pub fn cue_spans(&self) -> &[(u64, u64)] {
        &self.cue_spans
    }

    /// Transcript lines with a marker line inserted before each marked range.
    pub fn render(&self) -> String {
        let mut lines = Vec::with_capacity(self.base.len() + self.markers.len());
        let mut markers = self.markers.iter().peekable();
        for seg in self.base.segments() {
            while let Some(m) = markers.next_if(|m| m.first_segment == seg.index) {
                lines.push(format!("{} segments {}-{}", m.label, m.first_segment, m.last_segment));
            }
            lines.push(render_segment(seg));
        }
        lines.join("\n")
    }
}

/// Maps each cue onto the transcript segments it overlaps and records a marker.
///
/// A cue that falls entirely inside a gap between segments is attached to the
/// nearest segment (the earlier one on a tie).
pub fn build_enhanced_transcript<C: Cue>(transcript: &Transcript, cues: &[C]) -> Result<EnhancedTranscript, AnnotationError> {
    let duration_ms = transcript.duration_ms();
    let mut markers = Vec::with_capacity(cues.len());
    let mut cue_spans = Vec::with_capacity(cues.len());
    for cue in cues {
        let (start_ms, end_ms) = cue.span();
        if start_ms >= end_ms || end_ms > duration_ms {
            return Err(AnnotationError::CueOutOfRange { start_ms, end_ms, duration_ms });
        }
        let range = transcript.overlapping(start_ms, end_ms);
        let (first, last) = if range.is_empty() {
            let idx = nearest_segment(transcript, start_ms, end_ms, range.start);
            (idx, idx)
        } else {
            (range.start, range.end - 1)
        };
        markers.push(Marker { first_segment: first, last_segment: last, label: cue.marker_label() });
        cue_spans.push((start_ms, end_ms));
    }
    markers.sort();
    markers.dedup();
    cue_spans.sort_unstable();
    Ok(EnhancedTranscript { base: transcript.clone(), kind: C::KIND, markers, cue_spans })
}

fn nearest_segment(transcript: &Transcript, start_ms: u64, end_ms: u64, next: usize) -> usize {
    let segs = transcript.segments();
    match (next.checked_sub(1).map(|i| &segs[i]), segs.get(next)) {
        (Some(prev), Some(after)) => {
            let before_gap = start_ms.saturating_sub(prev.end_ms);
            let after_gap = after.start_ms.saturating_sub(end_ms);
            if before_gap <= after_gap {
                prev.index
            } else {
                after.index
            }
        }
        (Some(prev), None) => prev.index,
        (None, Some(after)) => after.index,
        (None, None) => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::captions::{render_plain, RawCue};

    fn obs(p: &str, start_ms: u64, end_ms: u64) -> EmotionObservation {
        EmotionObservation { participant_id: p.to_string(), start_ms, end_ms }
    }

    fn transcript(spans: &[(u64, u64)]) -> Transcript {
        let cues = spans
            .iter()
            .enumerate()
            .map(|(i, &(s, e))| RawCue { start_ms: s, end_ms: e, text: format!("segment {i}") })
            .collect();
        Transcript::from_cues(cues).unwrap()
    }

    #[test]
    fn three_participant_overlap() {
        let o = vec![obs("A", 10_000, 20_000), obs("B", 12_000, 25_000), obs("C", 15_000, 18_000), obs("D", 40_000, 50_000)];
        let cues = aggregate_emotion_cues(&o, 3).unwrap();
        assert_eq!(cues, vec![EmotionCue { start_ms: 15_000, end_ms: 18_000, support_count: 3 }]);
    }

    #[test]
    fn single_observation_identity() {
        let cues = aggregate_emotion_cues(&[obs("A", 5, 9)], 1).unwrap();
        assert_eq!(cues, vec![EmotionCue { start_ms: 5, end_ms: 9, support_count: 1 }]);
    }

    #[test]
    fn same_participant_counts_once() {
        let cues = aggregate_emotion_cues(&[obs("A", 0, 10), obs("A", 20, 30)], 2).unwrap();
        assert!(cues.is_empty());
        let overlapping_self = aggregate_emotion_cues(&[obs("A", 0, 10), obs("A", 5, 30)], 2).unwrap();
        assert!(overlapping_self.is_empty());
    }

    #[test]
    fn touching_endpoints_do_not_overlap() {
        let cues = aggregate_emotion_cues(&[obs("A", 0, 10), obs("B", 10, 20)], 2).unwrap();
        assert!(cues.is_empty());
    }

    #[test]
    fn adjacent_qualifying_runs_merge_with_minimum_support() {
        let o = vec![obs("A", 0, 30), obs("B", 0, 30), obs("C", 10, 20)];
        let cues = aggregate_emotion_cues(&o, 2).unwrap();
        assert_eq!(cues, vec![EmotionCue { start_ms: 0, end_ms: 30, support_count: 2 }]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(aggregate_emotion_cues(&[obs("A", 0, 1)], 0), Err(AnnotationError::InvalidThreshold));
        assert!(matches!(aggregate_emotion_cues(&[obs("A", 5, 5)], 1), Err(AnnotationError::InvalidInterval { index: 0, .. })));
        assert_eq!(aggregate_emotion_cues(&[], 1), Err(AnnotationError::NoObservations));
    }

    #[test]
    fn visual_row() {
        let cues = load_visual_cues("start_ms,end_ms,reason,role\n12000,18500,IntensiveMovement,Learner\n").unwrap();
        assert_eq!(
            cues,
            vec![VisualCue { start_ms: 12_000, end_ms: 18_500, reason: VisualReason::IntensiveMovement, annotator_role: AnnotatorRole::Learner }]
        );
    }

    #[test]
    fn visual_row_errors() {
        let h = "start_ms,end_ms,reason,role\n";
        assert!(matches!(load_visual_cues(&format!("{h}18500,12000,Other,Learner\n")), Err(AnnotationError::MalformedRow { line: 2, .. })));
        assert!(matches!(load_visual_cues(&format!("{h}1,2,Blurry,Learner\n")), Err(AnnotationError::UnknownReason { .. })));
        assert!(matches!(load_visual_cues(&format!("{h}1,2,Other,Student\n")), Err(AnnotationError::UnknownRole { .. })));
        assert!(matches!(load_visual_cues(&format!("{h}1,2,Other\n")), Err(AnnotationError::MalformedRow { .. })));
        assert!(matches!(load_visual_cues("start,end,reason,role\n1,2,Other,Learner\n"), Err(AnnotationError::MalformedRow { line: 1, .. })));
    }

    #[test]
    fn emotion_csv() {
        let o = load_emotion_observations("participant_id,start_ms,end_ms\nP1,10,20\nP2, 15 ,30\n").unwrap();
        assert_eq!(o, vec![obs("P1", 10, 20), obs("P2", 15, 30)]);
        assert!(load_emotion_observations("participant_id,start_ms,end_ms\nP1,x,20\n").is_err());
    }

    #[test]
    fn marker_on_overlapped_segment() {
        let spans: Vec<(u64, u64)> = vec![(0, 3000), (3000, 7000), (7000, 10_000), (10_000, 14_000), (14_000, 19_000), (19_000, 25_000)];
        let t = transcript(&spans);
        let cue = EmotionCue { start_ms: 15_000, end_ms: 18_000, support_count: 3 };
        let e = build_enhanced_transcript(&t, &[cue]).unwrap();
        assert_eq!(e.markers(), &[Marker { first_segment: 4, last_segment: 4, label: "<<EMOTION n=3>>".into() }]);
        assert!(e.render().contains("<<EMOTION n=3>> segments 4-4\n[4|14000-19000] segment 4"));
    }

    #[test]
    fn zero_cues_render_as_plain() {
        let t = transcript(&[(0, 10), (10, 20)]);
        let e = build_enhanced_transcript::<VisualCue>(&t, &[]).unwrap();
        assert_eq!(e.kind(), EnhancedKind::Visual);
        assert_eq!(e.render(), render_plain(&t));
        assert_eq!(EnhancedTranscript::plain(t.clone()).render(), render_plain(&t));
    }

    #[test]
    fn gap_cue_attaches_to_nearest() {
        let t = transcript(&[(0, 10), (40, 50)]);
        let near_end = EmotionCue { start_ms: 12, end_ms: 14, support_count: 3 };
        let near_start = EmotionCue { start_ms: 35, end_ms: 38, support_count: 3 };
        let e = build_enhanced_transcript(&t, &[near_start, near_end]).unwrap();
        assert_eq!(e.markers()[0].first_segment, 0);
        assert_eq!(e.markers()[1].first_segment, 1);
    }

    #[test]
    fn cue_beyond_duration() {
        let t = transcript(&[(0, 10)]);
        let cue = EmotionCue { start_ms: 5, end_ms: 11, support_count: 3 };
        assert!(matches!(build_enhanced_transcript(&t, &[cue]), Err(AnnotationError::CueOutOfRange { .. })));
    }
}
