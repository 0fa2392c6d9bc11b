use std::collections::BTreeMap;

use serde::Deserialize;

use super::{check_score, AnalyticsError, AttitudeSurvey, Dimension, RatingForm, SelfEfficacySurvey, Stage};
use crate::strategy::Strategy;

fn rows<T: for<'de> Deserialize<'de>>(content: &str) -> Result<Vec<(u64, T)>, AnalyticsError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(content.as_bytes());
    let mut out = Vec::new();
    for row in reader.deserialize::<T>() {
        match row {
            Ok(r) => out.push((out.len() as u64 + 2, r)),
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                return Err(AnalyticsError::MalformedRow { line, detail: e.to_string() });
            }
        }
    }
    Ok(out)
}

#[derive(Deserialize)]
struct RatingRow {
    participant_id: String,
    strategy: Strategy,
    reduce_irrelevant: i64,
    focus_essential: i64,
    connect_text_image: i64,
    recall_facts: i64,
    understand_explain: i64,
    apply_new: i64,
}

/// Columns: participant_id, strategy, then one per rating dimension.
pub fn load_ratings(content: &str) -> Result<Vec<RatingForm>, AnalyticsError> {
    rows::<RatingRow>(content)?
        .into_iter()
        .map(|(_, r)| {
            let values = [r.reduce_irrelevant, r.focus_essential, r.connect_text_image, r.recall_facts, r.understand_explain, r.apply_new];
            let scores = Dimension::ALL
                .iter()
                .zip(values)
                .map(|(d, v)| Ok((*d, check_score(d.column(), v)?)))
                .collect::<Result<_, AnalyticsError>>()?;
            Ok(RatingForm { participant_id: r.participant_id, strategy: r.strategy, scores })
        })
        .collect()
}

#[derive(Deserialize)]
struct SelfEfficacyRow {
    participant_id: String,
    q1: i64,
    q2: i64,
    q3: i64,
    q4: i64,
    q5: i64,
    q6: i64,
    q7: i64,
    q8: i64,
}

/// Columns: participant_id, q1..q8.
pub fn load_self_efficacy(content: &str) -> Result<Vec<SelfEfficacySurvey>, AnalyticsError> {
    rows::<SelfEfficacyRow>(content)?
        .into_iter()
        .map(|(_, r)| {
            let scores = [r.q1, r.q2, r.q3, r.q4, r.q5, r.q6, r.q7, r.q8]
                .iter()
                .enumerate()
                .map(|(i, v)| check_score(&format!("q{}", i + 1), *v))
                .collect::<Result<_, _>>()?;
            Ok(SelfEfficacySurvey { participant_id: r.participant_id, scores })
        })
        .collect()
}

#[derive(Deserialize)]
struct AttitudeRow {
    participant_id: String,
    stage: Stage,
    item: usize,
    score: i64,
    reversed: bool,
}

/// Item number to (score, reversed, line).
type ItemRows = BTreeMap<usize, (u8, bool, u64)>;

/// Long format, one row per item: participant_id, stage, item (1-based), score, reversed.
pub fn load_attitudes(content: &str) -> Result<Vec<AttitudeSurvey>, AnalyticsError> {
    let mut grouped: BTreeMap<(String, Stage), ItemRows> = BTreeMap::new();
    for (line, r) in rows::<AttitudeRow>(content)? {
        let score = check_score(&format!("item {}", r.item), r.score)?;
        let items = grouped.entry((r.participant_id, r.stage)).or_default();
        if items.insert(r.item, (score, r.reversed, line)).is_some() {
            return Err(AnalyticsError::MalformedRow { line, detail: format!("item {} repeated", r.item) });
        }
    }
    grouped
        .into_iter()
        .map(|((participant_id, stage), items)| {
            for (expected, (item, (_, _, line))) in (1..).zip(&items) {
                if *item != expected {
                    return Err(AnalyticsError::MalformedRow { line: *line, detail: format!("expected item {expected}, found {item}") });
                }
            }
            let (scores, reversed_flags) = items.values().map(|(s, r, _)| (*s, *r)).unzip();
            Ok(AttitudeSurvey { participant_id, stage, scores, reversed_flags })
        })
        .collect()
}
