//! Parses a WebVTT or SRT file and prints the normalized transcript.
//!
//! cargo run --example parse_captions [-- path/to/captions.vtt]

use std::path::PathBuf;

use vidquiz::captions::{render_segment, CaptionFormat};

fn main() {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/captions/ar_intro.srt"));
    let content = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let format = CaptionFormat::detect(Some(&path), &content);
    let transcript = format.parse(&content).unwrap_or_else(|e| panic!("{}: {e}", path.display()));

    println!("{format:?}: {} segments, {} ms", transcript.len(), transcript.duration_ms());
    for seg in transcript.segments().iter().take(8) {
        println!("{}", render_segment(seg));
    }
    if transcript.len() > 8 {
        println!("...");
    }
    let window = transcript.overlapping(60_000, 90_000);
    println!("segments overlapping [60000, 90000): {window:?}");
}
