use super::{blocks, collapse_whitespace, format_timestamp, parse_timestamp, strip_tags, CaptionError, RawCue, Transcript};

/// Parses a SubRip document. Cue counters must be strictly increasing.
pub fn parse_srt(content: &str) -> Result<Transcript, CaptionError> {
    let content = content.strip_prefix('\u{feff}').unwrap_or(content);
    let mut cues = Vec::new();
    let mut last_counter: Option<u64> = None;
    for (line_no, lines) in blocks(content) {
        let counter: u64 = lines[0].trim().parse().map_err(|_| CaptionError::MalformedCueIndex {
            line: line_no,
            detail: format!("expected a cue number, found {:?}", lines[0]),
        })?;
        if let Some(prev) = last_counter {
            if counter <= prev {
                return Err(CaptionError::MalformedCueIndex {
                    line: line_no,
                    detail: format!("cue number {counter} does not follow {prev}"),
                });
            }
        }
        last_counter = Some(counter);
        let timing = lines.get(1).copied().ok_or_else(|| CaptionError::MalformedTiming {
            line: line_no + 1,
            detail: "missing timing line".into(),
        })?;
        let (start_ms, end_ms) = parse_timing(timing, line_no + 1)?;
        let payload: Vec<String> = lines[2..].iter().map(|l| strip_tags(l)).collect();
        let text = collapse_whitespace(&payload);
        if text.is_empty() {
            continue;
        }
        cues.push(RawCue { start_ms, end_ms, text });
    }
    Transcript::from_cues(cues)
}

fn parse_timing(line: &str, line_no: usize) -> Result<(u64, u64), CaptionError> {
    let err = |detail: String| CaptionError::MalformedTiming { line: line_no, detail };
    let (left, right) = line.split_once("-->").ok_or_else(|| err("missing -->".into()))?;
    let start_str = left.trim();
    // SRT extensions may append coordinates after the end time
    let end_str = right.split_whitespace().next().unwrap_or("");
    let start = parse_timestamp(start_str, ',', false).ok_or_else(|| err(format!("bad start timestamp {start_str:?}")))?;
    let end = parse_timestamp(end_str, ',', false).ok_or_else(|| err(format!("bad end timestamp {end_str:?}")))?;
    if start >= end {
        return Err(err(format!("cue ends at or before its start ({start_str} --> {end_str})")));
    }
    Ok((start, end))
}

pub fn to_srt(transcript: &Transcript) -> String {
    let mut out = String::new();
    for seg in transcript.segments() {
        out.push_str(&format!(
            "{}\n{} --> {}\n{}\n\n",
            seg.index + 1,
            format_timestamp(seg.start_ms, ','),
            format_timestamp(seg.end_ms, ','),
            seg.text
        ));
    }
    out
}
