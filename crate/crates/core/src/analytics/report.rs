use std::collections::BTreeMap;
use std::path::Path;

use super::{
    attitude_change, likert_summary, mean, pearson_r, strategy_stats, AnalyticsError, AttitudeSurvey, Dimension, OutlierRule,
    RatingForm, SelfEfficacySurvey, Stage, SELF_EFFICACY_ITEMS,
};
use crate::engine::{AnswerRecord, Event, EventBody};
use crate::strategy::Strategy;

#[derive(Debug, Clone, Default)]
pub struct ReportInput {
    /// One event log per session.
    pub logs: Vec<Vec<Event>>,
    pub ratings: Vec<RatingForm>,
    pub self_efficacy: Vec<SelfEfficacySurvey>,
    pub attitudes: Vec<AttitudeSurvey>,
    pub outlier_rule: OutlierRule,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub text: String,
    /// File name to CSV content.
    pub tables: BTreeMap<String, String>,
}

impl Report {
    /// Writes `report.txt` and every table into `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.txt"), &self.text)?;
        for (name, content) in &self.tables {
            std::fs::write(dir.join(name), content)?;
        }
        Ok(())
    }
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.6}")
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

fn completed(log: &[Event]) -> bool {
    log.iter().any(|e| matches!(e.body, EventBody::SessionCompleted { .. }))
}

/// Deterministic text report plus CSV tables.
pub fn report(input: &ReportInput) -> Report {
    let mut text = String::new();
    let mut tables = BTreeMap::new();

    let done: Vec<&Vec<Event>> = input.logs.iter().filter(|l| completed(l)).collect();
    let records: Vec<AnswerRecord> = done
        .iter()
        .flat_map(|l| l.iter())
        .filter_map(|e| match &e.body {
            EventBody::AnswerSubmitted(r) => Some(r.clone()),
            _ => None,
        })
        .collect();
    text.push_str(&format!(
        "Sessions: {} completed, {} incomplete (excluded)\n\n",
        done.len(),
        input.logs.len() - done.len()
    ));

    text.push_str("Time to answer and correct rate (first attempts)\n");
    text.push_str(&format!("{:<11} {:>4} {:>11} {:>11} {:>8} {:>8}\n", "strategy", "n", "median_ms", "mean_ms", "correct", "excluded"));
    let mut rows = Vec::new();
    for s in Strategy::ALL {
        match strategy_stats(&records, s, input.outlier_rule) {
            Ok(st) => {
                text.push_str(&format!(
                    "{:<11} {:>4} {:>11.1} {:>11.1} {:>7.1}% {:>8}\n",
                    s.as_str(),
                    st.n_responses,
                    st.median_ms,
                    st.mean_ms,
                    st.first_attempt_correct_rate * 100.0,
                    st.excluded_outliers
                ));
                rows.push(vec![
                    s.as_str().to_string(),
                    st.n_responses.to_string(),
                    num(st.median_ms),
                    num(st.mean_ms),
                    num(st.first_attempt_correct_rate),
                    st.excluded_outliers.to_string(),
                ]);
            }
            Err(_) => text.push_str(&format!("{:<11} no data\n", s.as_str())),
        }
    }
    tables.insert(
        "strategy_stats.csv".into(),
        csv_table(&["strategy", "n_responses", "median_ms", "mean_ms", "first_attempt_correct_rate", "excluded_outliers"], &rows),
    );

    text.push_str("\nRatings (mean, sd, n)\n");
    let mut rows = Vec::new();
    let groups: Vec<(String, Vec<RatingForm>)> = Strategy::ALL
        .iter()
        .map(|s| (s.as_str().to_string(), input.ratings.iter().filter(|f| f.strategy == *s).cloned().collect()))
        .chain(std::iter::once(("all".to_string(), input.ratings.clone())))
        .collect();
    for (label, forms) in groups {
        match likert_summary(&forms) {
            Ok(summary) => {
                for l in summary {
                    text.push_str(&format!("{label:<11} {:<19} {:.2} {:.2} {}\n", l.dimension.column(), l.mean, l.sd, l.n));
                    rows.push(vec![label.clone(), l.dimension.column().into(), l.n.to_string(), num(l.mean), num(l.sd)]);
                }
            }
            Err(AnalyticsError::NoData) => text.push_str(&format!("{label:<11} no data\n")),
            Err(e) => text.push_str(&format!("{label:<11} error: {e}\n")),
        }
    }
    tables.insert("likert.csv".into(), csv_table(&["strategy", "dimension", "n", "mean", "sd"], &rows));

    text.push_str("\nAttitude change (post - pre; negative is more positive)\n");
    let mut rows = Vec::new();
    let mut by_participant: BTreeMap<&str, [Option<&AttitudeSurvey>; 2]> = BTreeMap::new();
    for s in &input.attitudes {
        let slot = if s.stage == Stage::Pre { 0 } else { 1 };
        by_participant.entry(s.participant_id.as_str()).or_default()[slot] = Some(s);
    }
    for (pid, pair) in &by_participant {
        let [Some(pre), Some(post)] = pair else {
            text.push_str(&format!("{pid:<11} incomplete pair\n"));
            continue;
        };
        match attitude_change(pre, post) {
            Ok(c) => {
                let deltas: Vec<String> = c.deltas.iter().map(i32::to_string).collect();
                text.push_str(&format!("{pid:<11} mean {:+.3}  [{}]\n", c.mean_delta, deltas.join(" ")));
                rows.push(vec![pid.to_string(), c.deltas.len().to_string(), num(c.mean_delta), deltas.join(";")]);
            }
            Err(e) => text.push_str(&format!("{pid:<11} error: {e}\n")),
        }
    }
    tables.insert("attitude.csv".into(), csv_table(&["participant_id", "n_items", "mean_delta", "deltas"], &rows));

    text.push_str("\nCorrelations: rating dimension vs self-efficacy item (r, df, t)\n");
    let mut rows = Vec::new();
    let mut per_participant: BTreeMap<&str, Vec<&RatingForm>> = BTreeMap::new();
    for f in &input.ratings {
        per_participant.entry(f.participant_id.as_str()).or_default().push(f);
    }
    let paired: Vec<(&SelfEfficacySurvey, &Vec<&RatingForm>)> = input
        .self_efficacy
        .iter()
        .filter_map(|s| per_participant.get(s.participant_id.as_str()).map(|f| (s, f)))
        .collect();
    for d in Dimension::ALL {
        let x: Vec<f64> = paired
            .iter()
            .map(|(_, forms)| mean(&forms.iter().map(|f| f.scores[&d] as f64).collect::<Vec<_>>()).unwrap())
            .collect();
        let mut cells = Vec::new();
        for item in 0..SELF_EFFICACY_ITEMS {
            let y: Vec<f64> = paired.iter().map(|(s, _)| s.scores.get(item).copied().unwrap_or(0) as f64).collect();
            let (r, df, t) = match pearson_r(&x, &y) {
                Ok(c) => {
                    cells.push(format!("{:>5.2}", c.r));
                    (num(c.r), c.df.to_string(), num(c.t_stat))
                }
                Err(_) => {
                    cells.push("   NA".to_string());
                    ("NA".to_string(), "NA".to_string(), "NA".to_string())
                }
            };
            rows.push(vec![d.column().into(), format!("q{}", item + 1), x.len().to_string(), r, df, t]);
        }
        text.push_str(&format!("{:<19} {}\n", d.column(), cells.join(" ")));
    }
    tables.insert("correlations.csv".into(), csv_table(&["dimension", "item", "n", "r", "df", "t_stat"], &rows));

    Report { text, tables }
}
