mod common;

use vidquiz::analytics::{
    attitude_change, likert_summary, load_attitudes, load_ratings, load_self_efficacy, mean, median, pearson_r, quantile_sorted, report,
    sample_sd, AnalyticsError, OutlierRule, ReportInput, Stage,
};
use vidquiz::engine::parse_jsonl;

fn study(name: &str) -> String {
    std::fs::read_to_string(common::fixtures().join("study").join(name)).unwrap()
}

fn study_input() -> ReportInput {
    let mut paths: Vec<_> = std::fs::read_dir(common::fixtures().join("study/logs")).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    ReportInput {
        logs: paths.iter().map(|p| parse_jsonl(&std::fs::read_to_string(p).unwrap()).unwrap()).collect(),
        ratings: load_ratings(&study("ratings.csv")).unwrap(),
        self_efficacy: load_self_efficacy(&study("self_efficacy.csv")).unwrap(),
        attitudes: load_attitudes(&study("attitudes.csv")).unwrap(),
        outlier_rule: OutlierRule::default(),
    }
}

#[test]
fn hand_checked_descriptives() {
    assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
    assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
    assert_eq!(mean(&[1.0, 2.0, 6.0]), Some(3.0));
    assert_eq!(sample_sd(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).map(|s| (s * s * 7.0).round()), Some(32.0));
    assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.25), 2.0);
    assert_eq!(quantile_sorted(&[10.0, 20.0, 30.0, 40.0], 0.75), 32.5);
    assert_eq!(median(&[]), None);
}

#[test]
fn tukey_fence_drops_the_straggler() {
    let times = [4000.0, 4500.0, 5000.0, 5200.0, 6000.0, 90_000.0];
    let kept = OutlierRule::TukeyUpper { k: 1.5 }.retain(&times);
    assert_eq!(kept, &times[..5]);
}

#[test]
fn correlation_edge_cases() {
    let r = pearson_r(&[1.0, 2.0, 3.0, 4.0], &[2.0, 4.0, 6.0, 8.0]).unwrap();
    assert!((r.r - 1.0).abs() < 1e-12);
    assert!(matches!(pearson_r(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(AnalyticsError::ConstantSeries)));
    assert!(matches!(pearson_r(&[1.0, 2.0], &[1.0, 2.0, 3.0]), Err(AnalyticsError::LengthMismatch { .. })));
    assert_eq!(pearson_r(&[1.0, 2.0], &[1.0, 2.0]), Err(AnalyticsError::TooFewPoints(2)));
}

#[test]
fn reversed_items_are_rescored() {
    let surveys = load_attitudes(&study("attitudes.csv")).unwrap();
    let pre = surveys.iter().find(|s| s.participant_id == "P01" && s.stage == Stage::Pre).unwrap();
    let post = surveys.iter().find(|s| s.participant_id == "P01" && s.stage == Stage::Post).unwrap();
    let change = attitude_change(pre, post).unwrap();
    for (i, d) in change.deltas.iter().enumerate() {
        let (a, b) = (pre.scores[i] as i32, post.scores[i] as i32);
        assert_eq!(*d, if pre.reversed_flags[i] { a - b } else { b - a });
    }
    assert!(attitude_change(pre, pre).unwrap().deltas.iter().all(|d| *d == 0));
}

#[test]
fn ratings_summary_covers_every_dimension() {
    let summary = likert_summary(&load_ratings(&study("ratings.csv")).unwrap()).unwrap();
    assert_eq!(summary.len(), 6);
    assert!(summary.iter().all(|s| s.n == 16 && (1.0..=7.0).contains(&s.mean)));
}

#[test]
fn study_report_matches_golden() {
    let out = report(&study_input());
    common::check_golden("study_report.txt", &out.text).unwrap();
    assert!(out.tables.keys().any(|k| k.ends_with(".csv")));
}
