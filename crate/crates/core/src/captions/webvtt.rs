use super::{blocks, collapse_whitespace, format_timestamp, parse_timestamp, strip_tags, CaptionError, RawCue, Transcript};

/// Parses a WebVTT document.
///
/// Cue identifiers, cue settings, markup, NOTE/STYLE/REGION blocks and header
/// metadata are dropped; only timing and plain payload text survive.
pub fn parse_webvtt(content: &str) -> Result<Transcript, CaptionError> {
    let content = content.strip_prefix('\u{feff}').unwrap_or(content);
    let first = content.lines().next().unwrap_or("").trim_end_matches('\r');
    let header_ok = first == "WEBVTT" || first.starts_with("WEBVTT ") || first.starts_with("WEBVTT\t");
    if !header_ok {
        return Err(CaptionError::MalformedHeader);
    }

    let mut cues = Vec::new();
    // the first block is the header plus its metadata lines
    for (line_no, lines) in blocks(content).into_iter().skip(1) {
        let head = lines[0];
        if is_block_keyword(head, "NOTE") || is_block_keyword(head, "STYLE") || is_block_keyword(head, "REGION") {
            continue;
        }
        let timing_at = if head.contains("-->") {
            0
        } else if lines.len() > 1 && lines[1].contains("-->") {
            1
        } else {
            return Err(CaptionError::MalformedTiming { line: line_no, detail: "cue block has no timing line".into() });
        };
        let (start_ms, end_ms) = parse_timing(lines[timing_at], line_no + timing_at)?;
        let payload: Vec<String> = lines[timing_at + 1..].iter().map(|l| decode_entities(&strip_tags(l))).collect();
        let text = collapse_whitespace(&payload);
        if text.is_empty() {
            continue;
        }
        cues.push(RawCue { start_ms, end_ms, text });
    }
    Transcript::from_cues(cues)
}

fn is_block_keyword(line: &str, keyword: &str) -> bool {
    line == keyword || line.starts_with(&format!("{keyword} ")) || line.starts_with(&format!("{keyword}\t"))
}

fn parse_timing(line: &str, line_no: usize) -> Result<(u64, u64), CaptionError> {
    let err = |detail: String| CaptionError::MalformedTiming { line: line_no, detail };
    let (left, right) = line.split_once("-->").ok_or_else(|| err("missing -->".into()))?;
    let start_str = left.trim();
    let end_str = right.split_whitespace().next().unwrap_or("");
    let start = parse_timestamp(start_str, '.', true).ok_or_else(|| err(format!("bad start timestamp {start_str:?}")))?;
    let end = parse_timestamp(end_str, '.', true).ok_or_else(|| err(format!("bad end timestamp {end_str:?}")))?;
    if start >= end {
        return Err(err(format!("cue ends at or before its start ({start_str} --> {end_str})")));
    }
    Ok((start, end))
}

fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(pos) = rest.find('&') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos..];
        let decoded = tail.find(';').filter(|&end| end <= 10).and_then(|end| {
            let name = &tail[1..end];
            let ch = match name {
                "amp" => Some("&".to_string()),
                "lt" => Some("<".to_string()),
                "gt" => Some(">".to_string()),
                "quot" => Some("\"".to_string()),
                "apos" => Some("'".to_string()),
                "nbsp" => Some(" ".to_string()),
                "lrm" | "rlm" => Some(String::new()),
                _ => numeric_entity(name).map(String::from),
            }?;
            Some((ch, end + 1))
        });
        match decoded {
            Some((text, consumed)) => {
                out.push_str(&text);
                rest = &tail[consumed..];
            }
            None => {
                out.push('&');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn numeric_entity(name: &str) -> Option<char> {
    let code = if let Some(hex) = name.strip_prefix("#x").or_else(|| name.strip_prefix("#X")) {
        u32::from_str_radix(hex, 16).ok()?
    } else {
        name.strip_prefix('#')?.parse().ok()?
    };
    char::from_u32(code)
}

/// Serializes a transcript as WebVTT, escaping markup-significant characters.
pub fn to_webvtt(transcript: &Transcript) -> String {
    let mut out = String::from("WEBVTT\n");
    for seg in transcript.segments() {
        let text = seg.text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
        out.push('\n');
        out.push_str(&format!(
            "{} --> {}\n{}\n",
            format_timestamp(seg.start_ms, '.'),
            format_timestamp(seg.end_ms, '.'),
            text
        ));
    }
    out
}
