mod common;

use proptest::prelude::*;
use vidquiz::captions::{parse_srt, parse_webvtt, render_plain, to_srt, to_webvtt, CaptionFormat, RawCue, Transcript};

fn caption(name: &str) -> String {
    std::fs::read_to_string(common::fixtures().join("captions").join(name)).unwrap()
}

#[test]
fn short_file_renders_expected_plain_text() {
    let t = parse_webvtt(&caption("short.vtt")).unwrap();
    assert_eq!(render_plain(&t), caption("short_plain.txt"));
}

#[test]
fn vtt_and_srt_copies_agree() {
    let vtt = parse_webvtt(&caption("ar_intro.vtt")).unwrap();
    let srt = parse_srt(&caption("ar_intro.srt")).unwrap();
    assert_eq!(vtt, srt);
    assert!(vtt.len() > 50);
    assert_eq!(CaptionFormat::detect(None, &caption("ar_intro.srt")).parse(&caption("ar_intro.srt")).unwrap(), srt);
}

#[test]
fn lookups_use_half_open_intervals() {
    let t = parse_webvtt(&caption("short.vtt")).unwrap();
    assert_eq!(t.overlapping(3000, 3500), 1..1);
    assert_eq!(t.overlapping(2999, 6001), 0..3);
    assert_eq!(t.segment_starting_at(3500), Some(1));
    assert_eq!(t.segment_starting_at(3000), None);
}

fn cues() -> impl Strategy<Value = Vec<RawCue>> {
    prop::collection::vec((0u64..600_000, 1u64..20_000, "[a-z]{1,8}( [a-z]{1,8}){0,3}"), 1..30)
        .prop_map(|v| v.into_iter().map(|(start_ms, len, text)| RawCue { start_ms, end_ms: start_ms + len, text }).collect())
}

proptest! {
    #[test]
    fn normalized_segments_are_ordered_and_disjoint(raw in cues()) {
        let t = Transcript::from_cues(raw).unwrap();
        for (i, s) in t.segments().iter().enumerate() {
            prop_assert_eq!(s.index, i);
            prop_assert!(s.start_ms < s.end_ms);
        }
        for w in t.segments().windows(2) {
            prop_assert!(w[0].end_ms <= w[1].start_ms);
        }
        prop_assert!(t.segments().last().unwrap().end_ms <= t.duration_ms());
    }

    #[test]
    fn writers_round_trip(raw in cues()) {
        let t = Transcript::from_cues(raw).unwrap();
        let vtt = parse_webvtt(&to_webvtt(&t)).unwrap();
        let srt = parse_srt(&to_srt(&t)).unwrap();
        prop_assert_eq!(vtt.segments(), t.segments());
        prop_assert_eq!(srt.segments(), t.segments());
    }
}
