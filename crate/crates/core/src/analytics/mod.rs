//! Time-to-answer statistics, survey summaries, and correlations.

mod io;
mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::AnswerRecord;
use crate::strategy::Strategy;

pub use io::{load_attitudes, load_ratings, load_self_efficacy};
pub use report::{report, Report, ReportInput};

pub const LIKERT_MIN: u8 = 1;
pub const LIKERT_MAX: u8 = 7;
pub const SELF_EFFICACY_ITEMS: usize = 8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("no data")]
    NoData,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("series is constant")]
    ConstantSeries,
    #[error("binary series must contain both 0 and 1 and nothing else")]
    DegenerateGroup,
    #[error("score {value} for {field} is outside 1..=7")]
    InvalidScore { field: String, value: i64 },
    #[error("pre and post surveys do not match: {0}")]
    SurveyMismatch(String),
    #[error("line {line}: {detail}")]
    MalformedRow { line: u64, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    ReduceIrrelevant,
    FocusEssential,
    ConnectTextImage,
    RecallFacts,
    UnderstandExplain,
    ApplyNew,
}

impl Dimension {
    pub const ALL: [Dimension; 6] = [
        Dimension::ReduceIrrelevant,
        Dimension::FocusEssential,
        Dimension::ConnectTextImage,
        Dimension::RecallFacts,
        Dimension::UnderstandExplain,
        Dimension::ApplyNew,
    ];

    pub fn column(self) -> &'static str {
        match self {
            Dimension::ReduceIrrelevant => "reduce_irrelevant",
            Dimension::FocusEssential => "focus_essential",
            Dimension::ConnectTextImage => "connect_text_image",
            Dimension::RecallFacts => "recall_facts",
            Dimension::UnderstandExplain => "understand_explain",
            Dimension::ApplyNew => "apply_new",
        }
    }
}

fn check_score(field: &str, value: i64) -> Result<u8, AnalyticsError> {
    if (LIKERT_MIN as i64..=LIKERT_MAX as i64).contains(&value) {
        Ok(value as u8)
    } else {
        Err(AnalyticsError::InvalidScore { field: field.to_string(), value })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingForm {
    pub participant_id: String,
    pub strategy: Strategy,
    pub scores: BTreeMap<Dimension, u8>,
}

impl RatingForm {
    pub fn validate(&self) -> Result<(), AnalyticsError> {
        for d in Dimension::ALL {
            let v = self.scores.get(&d).ok_or(AnalyticsError::InvalidScore { field: d.column().into(), value: 0 })?;
            check_score(d.column(), *v as i64)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfEfficacySurvey {
    pub participant_id: String,
    pub scores: Vec<u8>,
}

impl SelfEfficacySurvey {
    pub fn validate(&self) -> Result<(), AnalyticsError> {
        if self.scores.len() != SELF_EFFICACY_ITEMS {
            return Err(AnalyticsError::LengthMismatch { left: self.scores.len(), right: SELF_EFFICACY_ITEMS });
        }
        for (i, s) in self.scores.iter().enumerate() {
            check_score(&format!("q{}", i + 1), *s as i64)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Pre,
    Post,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttitudeSurvey {
    pub participant_id: String,
    pub stage: Stage,
    pub scores: Vec<u8>,
    pub reversed_flags: Vec<bool>,
}

impl AttitudeSurvey {
    pub fn validate(&self) -> Result<(), AnalyticsError> {
        if self.scores.len() != self.reversed_flags.len() {
            return Err(AnalyticsError::LengthMismatch { left: self.scores.len(), right: self.reversed_flags.len() });
        }
        for (i, s) in self.scores.iter().enumerate() {
            check_score(&format!("item {}", i + 1), *s as i64)?;
        }
        Ok(())
    }
}

/// Any survey the service accepts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Survey {
    SelfEfficacy(SelfEfficacySurvey),
    Attitude(AttitudeSurvey),
}

impl Survey {
    pub fn validate(&self) -> Result<(), AnalyticsError> {
        match self {
            Survey::SelfEfficacy(s) => s.validate(),
            Survey::Attitude(s) => s.validate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule")]
pub enum OutlierRule {
    None,
    /// Exclude values above Q3 + k * IQR.
    TukeyUpper { k: f64 },
    /// Exclude values above a fixed bound.
    Fixed { max_ms: u64 },
}

impl Default for OutlierRule {
    fn default() -> Self {
        OutlierRule::TukeyUpper { k: 1.5 }
    }
}

impl OutlierRule {
    /// Values kept for time statistics, in input order.
    pub fn retain(&self, values: &[f64]) -> Vec<f64> {
        match *self {
            OutlierRule::None => values.to_vec(),
            OutlierRule::Fixed { max_ms } => values.iter().copied().filter(|v| *v <= max_ms as f64).collect(),
            OutlierRule::TukeyUpper { k } => {
                let mut sorted = values.to_vec();
                sorted.sort_by(f64::total_cmp);
                let q1 = quantile_sorted(&sorted, 0.25);
                let q3 = quantile_sorted(&sorted, 0.75);
                let fence = q3 + k * (q3 - q1);
                values.iter().copied().filter(|v| *v <= fence).collect()
            }
        }
    }
}

/// Linear-interpolation quantile of sorted data (the common "type 7" rule).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(quantile_sorted(&sorted, 0.5))
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Sample standard deviation; 0 for a single value.
pub fn sample_sd(values: &[f64]) -> Option<f64> {
    let m = mean(values)?;
    if values.len() == 1 {
        return Some(0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Some((ss / (values.len() - 1) as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyStats {
    pub strategy: Strategy,
    pub n_responses: usize,
    pub median_ms: f64,
    pub mean_ms: f64,
    pub first_attempt_correct_rate: f64,
    pub excluded_outliers: usize,
}

pub fn strategy_stats(records: &[AnswerRecord], strategy: Strategy, rule: OutlierRule) -> Result<StrategyStats, AnalyticsError> {
    let firsts: Vec<&AnswerRecord> = records.iter().filter(|r| r.strategy == strategy && r.attempt_index == 1).collect();
    if firsts.is_empty() {
        return Err(AnalyticsError::NoData);
    }
    let times: Vec<f64> = firsts.iter().map(|r| r.elapsed_ms as f64).collect();
    let kept = rule.retain(&times);
    let correct = firsts.iter().filter(|r| r.correct).count();
    Ok(StrategyStats {
        strategy,
        n_responses: firsts.len(),
        median_ms: median(&kept).ok_or(AnalyticsError::NoData)?,
        mean_ms: mean(&kept).ok_or(AnalyticsError::NoData)?,
        first_attempt_correct_rate: correct as f64 / firsts.len() as f64,
        excluded_outliers: times.len() - kept.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikertSummary {
    pub dimension: Dimension,
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

pub fn likert_summary(forms: &[RatingForm]) -> Result<Vec<LikertSummary>, AnalyticsError> {
    if forms.is_empty() {
        return Err(AnalyticsError::NoData);
    }
    for f in forms {
        f.validate()?;
    }
    Ok(Dimension::ALL
        .iter()
        .map(|d| {
            let xs: Vec<f64> = forms.iter().map(|f| f.scores[d] as f64).collect();
            LikertSummary { dimension: *d, mean: mean(&xs).unwrap(), sd: sample_sd(&xs).unwrap(), n: xs.len() }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttitudeChange {
    pub participant_id: String,
    pub deltas: Vec<i32>,
    pub mean_delta: f64,
}

/// Post minus pre, with reversed items rescored as 8 - score first.
pub fn attitude_change(pre: &AttitudeSurvey, post: &AttitudeSurvey) -> Result<AttitudeChange, AnalyticsError> {
    pre.validate()?;
    post.validate()?;
    if pre.participant_id != post.participant_id {
        return Err(AnalyticsError::SurveyMismatch(format!("participants {} and {}", pre.participant_id, post.participant_id)));
    }
    if pre.scores.len() != post.scores.len() {
        return Err(AnalyticsError::LengthMismatch { left: pre.scores.len(), right: post.scores.len() });
    }
    if pre.reversed_flags != post.reversed_flags {
        return Err(AnalyticsError::SurveyMismatch("reversed flags differ".into()));
    }
    if pre.scores.is_empty() {
        return Err(AnalyticsError::NoData);
    }
    let rescore = |s: u8, reversed: bool| if reversed { 8 - s as i32 } else { s as i32 };
    let deltas: Vec<i32> = pre
        .scores
        .iter()
        .zip(&post.scores)
        .zip(&pre.reversed_flags)
        .map(|((a, b), r)| rescore(*b, *r) - rescore(*a, *r))
        .collect();
    let mean_delta = deltas.iter().sum::<i32>() as f64 / deltas.len() as f64;
    Ok(AttitudeChange { participant_id: pre.participant_id.clone(), deltas, mean_delta })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub df: usize,
    /// Infinite when |r| = 1; serialized as null in JSON.
    pub t_stat: f64,
}

pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<CorrelationResult, AnalyticsError> {
    if x.len() != y.len() {
        return Err(AnalyticsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    let n = x.len();
    if n < 3 {
        return Err(AnalyticsError::TooFewPoints(n));
    }
    let mx = mean(x).unwrap();
    let my = mean(y).unwrap();
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalyticsError::ConstantSeries);
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = n - 2;
    let t_stat = if r.abs() == 1.0 { f64::INFINITY.copysign(r) } else { r * (df as f64 / (1.0 - r * r)).sqrt() };
    Ok(CorrelationResult { r, df, t_stat })
}

/// Pearson's r on the 0/1 coding of `binary`.
pub fn point_biserial_r(binary: &[u8], y: &[f64]) -> Result<CorrelationResult, AnalyticsError> {
    if binary.iter().any(|b| *b > 1) || !binary.contains(&0) || !binary.contains(&1) {
        return Err(AnalyticsError::DegenerateGroup);
    }
    let x: Vec<f64> = binary.iter().map(|b| *b as f64).collect();
    pearson_r(&x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(strategy: Strategy, attempt_index: u32, correct: bool, elapsed_ms: u64) -> AnswerRecord {
        AnswerRecord { question_id: "q".into(), strategy, attempt_index, chosen_index: 0, correct, elapsed_ms }
    }

    #[test]
    fn stats_simple() {
        let rs: Vec<_> = [5000, 6000, 7000].iter().map(|&t| rec(Strategy::Transcript, 1, true, t)).collect();
        let s = strategy_stats(&rs, Strategy::Transcript, OutlierRule::default()).unwrap();
        assert_eq!((s.median_ms, s.mean_ms, s.first_attempt_correct_rate, s.excluded_outliers), (6000.0, 6000.0, 1.0, 0));
    }

    #[test]
    fn stats_outlier_only_affects_times() {
        let mut rs: Vec<_> = [5000, 5000, 5000, 5000].iter().map(|&t| rec(Strategy::Emotion, 1, true, t)).collect();
        rs.push(rec(Strategy::Emotion, 1, false, 500_000));
        rs.push(rec(Strategy::Emotion, 2, true, 1));
        let s = strategy_stats(&rs, Strategy::Emotion, OutlierRule::default()).unwrap();
        assert_eq!(s.excluded_outliers, 1);
        assert_eq!(s.mean_ms, 5000.0);
        assert_eq!(s.n_responses, 5);
        assert!((s.first_attempt_correct_rate - 0.8).abs() < 1e-12);
        assert_eq!(strategy_stats(&rs, Strategy::Visual, OutlierRule::None), Err(AnalyticsError::NoData));
    }

    #[test]
    fn likert() {
        let form = |v: u8| RatingForm {
            participant_id: "p".into(),
            strategy: Strategy::Visual,
            scores: Dimension::ALL.iter().map(|d| (*d, v)).collect(),
        };
        let one = likert_summary(&[form(7)]).unwrap();
        assert_eq!((one[0].mean, one[0].sd, one[0].n), (7.0, 0.0, 1));
        let two = likert_summary(&[form(4), form(6)]).unwrap();
        assert_eq!(two[0].mean, 5.0);
        assert!((two[0].sd - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn attitude_sign_convention() {
        let s = |stage, scores: Vec<u8>, rev: Vec<bool>| AttitudeSurvey { participant_id: "p".into(), stage, scores, reversed_flags: rev };
        let c = attitude_change(&s(Stage::Pre, vec![5, 5, 4], vec![false, true, false]), &s(Stage::Post, vec![3, 3, 4], vec![false, true, false])).unwrap();
        assert_eq!(c.deltas, [-2, 2, 0]);
        assert_eq!(c.mean_delta, 0.0);
        assert!(matches!(
            attitude_change(&s(Stage::Pre, vec![5], vec![false]), &s(Stage::Post, vec![5, 5], vec![false, false])),
            Err(AnalyticsError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn correlations() {
        let r = pearson_r(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap();
        assert_eq!((r.r, r.df), (-1.0, 1));
        assert_eq!(r.t_stat, f64::NEG_INFINITY);
        assert_eq!(pearson_r(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(AnalyticsError::ConstantSeries));
        assert_eq!(pearson_r(&[1.0, 2.0], &[1.0, 2.0]), Err(AnalyticsError::TooFewPoints(2)));
        assert_eq!(point_biserial_r(&[0, 0, 1, 1], &[1.0, 1.0, 3.0, 3.0]).unwrap().r, 1.0);
        assert_eq!(point_biserial_r(&[1, 1, 1], &[1.0, 2.0, 3.0]), Err(AnalyticsError::DegenerateGroup));
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(json, r#"{"r":-1.0,"df":1,"t_stat":null}"#);
    }
}
