//! Caption files to timed transcript segments.
//!
//! Times are integer milliseconds everywhere. Overlapping cues are clipped so
//! that the playhead is inside at most one segment: the earlier cue's end is
//! pulled back to the later cue's start, and cues sharing a start time are
//! merged into one segment.

mod srt;
mod webvtt;

use serde::{Deserialize, Serialize};

pub use srt::{parse_srt, to_srt};
pub use webvtt::{parse_webvtt, to_webvtt};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CaptionError {
    #[error("missing WEBVTT header")]
    MalformedHeader,
    #[error("malformed timing on line {line}: {detail}")]
    MalformedTiming { line: usize, detail: String },
    #[error("malformed cue index on line {line}: {detail}")]
    MalformedCueIndex { line: usize, detail: String },
    #[error("caption file contains no cues")]
    EmptyTranscript,
    #[error("invalid segment {index}: {reason}")]
    InvalidSegment { index: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptSegment {
    pub index: usize,
    pub start_ms: u64,
    pub end_ms: u64,
    pub text: String,
}

impl TranscriptSegment {
    /// Half-open overlap test against `[start_ms, end_ms)`.
    pub fn overlaps(&self, start_ms: u64, end_ms: u64) -> bool {
        self.start_ms < end_ms && start_ms < self.end_ms
    }
}

/// A cue as read from a caption file, before normalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawCue {
    pub start_ms: u64,
    pub end_ms: u64,
    pub text: String,
}

/// An ordered, non-empty, non-overlapping list of segments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TranscriptRepr")]
pub struct Transcript {
    segments: Vec<TranscriptSegment>,
    duration_ms: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TranscriptRepr {
    segments: Vec<TranscriptSegment>,
    duration_ms: u64,
}

impl TryFrom<TranscriptRepr> for Transcript {
    type Error = CaptionError;

    fn try_from(repr: TranscriptRepr) -> Result<Self, Self::Error> {
        Transcript::new(repr.segments, repr.duration_ms)
    }
}

impl Transcript {
    /// Builds a transcript from already-normalized segments, checking every
    /// invariant.
    pub fn new(segments: Vec<TranscriptSegment>, duration_ms: u64) -> Result<Self, CaptionError> {
        if segments.is_empty() {
            return Err(CaptionError::EmptyTranscript);
        }
        let mut prev_end = 0u64;
        for (i, seg) in segments.iter().enumerate() {
            let invalid = |reason: &str| CaptionError::InvalidSegment { index: i, reason: reason.to_string() };
            if seg.index != i {
                return Err(invalid("indices must be contiguous from 0"));
            }
            if seg.start_ms >= seg.end_ms {
                return Err(invalid("start_ms must be before end_ms"));
            }
            if seg.text.trim().is_empty() {
                return Err(invalid("text is empty"));
            }
            if i > 0 && seg.start_ms < prev_end {
                return Err(invalid("overlaps the previous segment"));
            }
            if seg.end_ms > duration_ms {
                return Err(invalid("ends after duration_ms"));
            }
            prev_end = seg.end_ms;
        }
        Ok(Transcript { segments, duration_ms })
    }

    /// Sorts, clips overlaps, merges cues with equal start times, and indexes.
    pub fn from_cues(mut cues: Vec<RawCue>) -> Result<Self, CaptionError> {
        if cues.is_empty() {
            return Err(CaptionError::EmptyTranscript);
        }
        let duration_ms = cues.iter().map(|c| c.end_ms).max().unwrap_or(0);
        cues.sort_by_key(|c| (c.start_ms, c.end_ms));
        let mut out: Vec<RawCue> = Vec::with_capacity(cues.len());
        for cue in cues {
            if let Some(last) = out.last_mut() {
                if last.start_ms == cue.start_ms {
                    last.end_ms = last.end_ms.max(cue.end_ms);
                    last.text.push(' ');
                    last.text.push_str(&cue.text);
                    continue;
                }
                if last.end_ms > cue.start_ms {
                    last.end_ms = cue.start_ms;
                }
            }
            out.push(cue);
        }
        let segments = out
            .into_iter()
            .enumerate()
            .map(|(index, c)| TranscriptSegment { index, start_ms: c.start_ms, end_ms: c.end_ms, text: c.text })
            .collect();
        Transcript::new(segments, duration_ms)
    }

    pub fn segments(&self) -> &[TranscriptSegment] {
        &self.segments
    }

    pub fn duration_ms(&self) -> u64 {
        self.duration_ms
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segment(&self, index: usize) -> Option<&TranscriptSegment> {
        self.segments.get(index)
    }

    /// Index of the segment that starts exactly at `start_ms`.
    pub fn segment_starting_at(&self, start_ms: u64) -> Option<usize> {
        self.segments.binary_search_by_key(&start_ms, |s| s.start_ms).ok()
    }

    /// Indices of all segments overlapping `[start_ms, end_ms)`.
    pub fn overlapping(&self, start_ms: u64, end_ms: u64) -> std::ops::Range<usize> {
        let first = self.segments.partition_point(|s| s.end_ms <= start_ms);
        let last = self.segments.partition_point(|s| s.start_ms < end_ms);
        first..last.max(first)
    }
}

/// Formats a segment as `[<index>|<start_ms>-<end_ms>] <text>`.
pub fn render_segment(seg: &TranscriptSegment) -> String {
    format!("[{}|{}-{}] {}", seg.index, seg.start_ms, seg.end_ms, seg.text)
}

/// One bracketed line per segment, newline separated, no trailing newline.
pub fn render_plain(transcript: &Transcript) -> String {
    transcript.segments().iter().map(render_segment).collect::<Vec<_>>().join("\n")
}

/// Which caption syntax a file uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaptionFormat {
    WebVtt,
    Srt,
}

impl CaptionFormat {
    /// Picks a format from a file extension, falling back to sniffing content.
    pub fn detect(path: Option<&std::path::Path>, content: &str) -> CaptionFormat {
        if let Some(ext) = path.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
            match ext.to_ascii_lowercase().as_str() {
                "vtt" => return CaptionFormat::WebVtt,
                "srt" => return CaptionFormat::Srt,
                _ => {}
            }
        }
        if content.trim_start_matches('\u{feff}').starts_with("WEBVTT") {
            CaptionFormat::WebVtt
        } else {
            CaptionFormat::Srt
        }
    }

    pub fn parse(self, content: &str) -> Result<Transcript, CaptionError> {
        match self {
            CaptionFormat::WebVtt => parse_webvtt(content),
            CaptionFormat::Srt => parse_srt(content),
        }
    }
}

/// Parses `HH:MM:SS<sep>mmm` (hours optional when `hours_optional`).
pub(crate) fn parse_timestamp(s: &str, sep: char, hours_optional: bool) -> Option<u64> {
    let (clock, millis) = s.split_once(sep)?;
    if millis.len() != 3 || !millis.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let parts: Vec<&str> = clock.split(':').collect();
    let (h, m, sec) = match parts.as_slice() {
        [h, m, s] => (*h, *m, *s),
        [m, s] if hours_optional => ("0", *m, *s),
        _ => return None,
    };
    let digits = |x: &str| !x.is_empty() && x.bytes().all(|b| b.is_ascii_digit());
    if !digits(h) || m.len() != 2 || sec.len() != 2 || !digits(m) || !digits(sec) {
        return None;
    }
    let (h, m, sec): (u64, u64, u64) = (h.parse().ok()?, m.parse().ok()?, sec.parse().ok()?);
    if m >= 60 || sec >= 60 {
        return None;
    }
    let ms: u64 = millis.parse().ok()?;
    Some(((h * 60 + m) * 60 + sec) * 1000 + ms)
}

pub(crate) fn format_timestamp(ms: u64, sep: char) -> String {
    let h = ms / 3_600_000;
    let m = ms / 60_000 % 60;
    let s = ms / 1000 % 60;
    format!("{h:02}:{m:02}:{s:02}{sep}{:03}", ms % 1000)
}

/// Removes `<...>` markup and `{\...}` override blocks.
pub(crate) fn strip_tags(line: &str) -> String {
    let mut out = String::with_capacity(line.len());
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '<' => {
                for c in chars.by_ref() {
                    if c == '>' {
                        break;
                    }
                }
            }
            '{' if chars.peek() == Some(&'\\') => {
                for c in chars.by_ref() {
                    if c == '}' {
                        break;
                    }
                }
            }
            _ => out.push(c),
        }
    }
    out
}

/// Joins payload lines into one whitespace-normalized line.
pub(crate) fn collapse_whitespace(lines: &[String]) -> String {
    lines.iter().flat_map(|l| l.split_whitespace()).collect::<Vec<_>>().join(" ")
}

/// Splits content into blank-line separated blocks of `(first_line_number, lines)`.
pub(crate) fn blocks(content: &str) -> Vec<(usize, Vec<&str>)> {
    let mut out = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    let mut start = 0;
    for (i, raw) in content.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !current.is_empty() {
                out.push((start, std::mem::take(&mut current)));
            }
        } else {
            if current.is_empty() {
                start = i + 1;
            }
            current.push(line);
        }
    }
    if !current.is_empty() {
        out.push((start, current));
    }
    out
}
