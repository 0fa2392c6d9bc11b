//! Builds the study report from session logs, rating forms, and surveys.
//!
//! cargo run --example analytics_report [-- out_dir]

use std::path::Path;

use vidquiz::analytics::{load_attitudes, load_ratings, load_self_efficacy, point_biserial_r, report, OutlierRule, ReportInput};
use vidquiz::engine::{parse_jsonl, EventBody};

fn main() {
    let study = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/study");
    let read = |name: &str| std::fs::read_to_string(study.join(name)).unwrap();
    let mut logs = Vec::new();
    let mut paths: Vec<_> = std::fs::read_dir(study.join("logs")).unwrap().map(|e| e.unwrap().path()).collect();
    paths.sort();
    for p in paths {
        logs.push(parse_jsonl(&std::fs::read_to_string(p).unwrap()).unwrap());
    }

    let input = ReportInput {
        logs,
        ratings: load_ratings(&read("ratings.csv")).unwrap(),
        self_efficacy: load_self_efficacy(&read("self_efficacy.csv")).unwrap(),
        attitudes: load_attitudes(&read("attitudes.csv")).unwrap(),
        outlier_rule: OutlierRule::TukeyUpper { k: 1.5 },
    };
    let out = report(&input);
    println!("{}", out.text);

    // first-attempt correctness against time to answer
    let (mut correct, mut times) = (Vec::new(), Vec::new());
    for e in input.logs.iter().flatten() {
        if let EventBody::AnswerSubmitted(r) = &e.body {
            if r.attempt_index == 1 {
                correct.push(u8::from(r.correct));
                times.push(r.elapsed_ms as f64);
            }
        }
    }
    let r = point_biserial_r(&correct, &times).unwrap();
    println!("point-biserial r(correct, time) = {:.3} (df {}, t {:.2})", r.r, r.df, r.t_stat);

    if let Some(dir) = std::env::args().nth(1) {
        out.write_to(Path::new(&dir)).unwrap();
        println!("tables written to {dir}");
    }
}
