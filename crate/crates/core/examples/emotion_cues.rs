//! Turns per-participant emotion observations into agreed cues and shows how
//! cues and visual annotations are marked up in the transcript.
//!
//! cargo run --example emotion_cues [-- K]

use std::path::Path;

use vidquiz::annotations::{aggregate_emotion_cues, build_enhanced_transcript, load_emotion_observations, load_visual_cues};
use vidquiz::pipeline::load_transcript;

fn main() {
    let k: u32 = std::env::args().nth(1).map_or(3, |s| s.parse().expect("K must be a positive integer"));
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let transcript = load_transcript(&root.join("captions/ar_intro.vtt")).unwrap();
    let observations = load_emotion_observations(&std::fs::read_to_string(root.join("annotations/emotion_observations.csv")).unwrap()).unwrap();

    for k in 1..=k + 1 {
        let cues = aggregate_emotion_cues(&observations, k).unwrap();
        let covered: u64 = cues.iter().map(|c| c.end_ms - c.start_ms).sum();
        println!("k={k}: {} cues covering {covered} ms", cues.len());
    }

    let cues = aggregate_emotion_cues(&observations, k).unwrap();
    for c in &cues {
        println!("  [{}, {}) support {}", c.start_ms, c.end_ms, c.support_count);
    }
    let enhanced = build_enhanced_transcript(&transcript, &cues).unwrap();
    println!("\nemotion-enhanced excerpt:");
    for line in enhanced.render().lines().filter(|l| l.starts_with("<<")).take(4) {
        println!("  {line}");
    }

    let visual = load_visual_cues(&std::fs::read_to_string(root.join("annotations/visual_annotations.csv")).unwrap()).unwrap();
    let enhanced = build_enhanced_transcript(&transcript, &visual).unwrap();
    println!("\n{} visual cues, {} markers", visual.len(), enhanced.markers().len());
    for m in enhanced.markers().iter().take(3) {
        println!("  segments {}..={}: {}", m.first_segment, m.last_segment, m.label);
    }
}
