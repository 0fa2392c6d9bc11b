use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Question, QuestionBank};
use crate::strategy::{Strategy, StrategySet};

pub const DEFAULT_SESSION_SIZE: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SelectionError {
    #[error("no strategies selected")]
    EmptyStrategySet,
    #[error("session size must be at least 1")]
    ZeroQuestions,
    #[error("insufficient candidates{}: need {needed}, have {available}", strategy.map(|s| format!(" for {s}")).unwrap_or_default())]
    InsufficientCandidates { strategy: Option<Strategy>, needed: usize, available: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledQuestion {
    /// Popup time in this schedule; may differ from `question.timestamp` by jitter.
    pub popup_ms: u64,
    pub question: Question,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub selected_strategies: StrategySet,
    pub scheduled: Vec<ScheduledQuestion>,
    pub seed: u64,
    pub video_duration_ms: u64,
}

impl SessionPlan {
    pub fn len(&self) -> usize {
        self.scheduled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scheduled.is_empty()
    }

    pub fn position(&self, question_id: &str) -> Option<usize> {
        self.scheduled.iter().position(|s| s.question.id == question_id)
    }

    /// Index of the equal-width bin containing `t`.
    pub fn bin_of(&self, t: u64) -> usize {
        bin_of(t, self.video_duration_ms, self.scheduled.len())
    }
}

fn bin_of(t: u64, duration: u64, n: usize) -> usize {
    if duration == 0 {
        return 0;
    }
    let b = (t as u128 * n as u128 / duration as u128) as usize;
    b.min(n - 1)
}

fn bin_bounds(b: usize, duration: u64, n: usize) -> (u64, u64) {
    let lo = (b as u128 * duration as u128 / n as u128) as u64;
    let hi = ((b as u128 + 1) * duration as u128 / n as u128) as u64;
    (lo, hi)
}

fn distance_to_bin(t: u64, lo: u64, hi: u64) -> u64 {
    if t < lo {
        lo - t
    } else if t >= hi {
        t + 1 - hi.max(1)
    } else {
        0
    }
}

fn reference_key(q: &Question) -> String {
    q.transcript_reference.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Seeded, bin-spread selection of `n` questions from the chosen strategies.
pub fn select_session_questions(
    bank: &QuestionBank,
    strategies: StrategySet,
    n: usize,
    seed: u64,
) -> Result<SessionPlan, SelectionError> {
    if strategies.is_empty() {
        return Err(SelectionError::EmptyStrategySet);
    }
    if n == 0 {
        return Err(SelectionError::ZeroQuestions);
    }
    let order: Vec<Strategy> = strategies.iter().collect();
    let per = n.div_ceil(order.len());
    let pools: Vec<Vec<&Question>> = order.iter().map(|s| bank.by_strategy(*s).collect()).collect();
    for (s, pool) in order.iter().zip(&pools) {
        if pool.len() < per {
            return Err(SelectionError::InsufficientCandidates { strategy: Some(*s), needed: per, available: pool.len() });
        }
    }
    let total: usize = pools.iter().map(Vec::len).sum();
    if total < n {
        return Err(SelectionError::InsufficientCandidates { strategy: None, needed: n, available: total });
    }

    let duration = bank.video_duration_ms();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset = rng.gen_range(0..order.len());
    let mut used_ids: HashSet<&str> = HashSet::new();
    let mut used_refs: HashSet<String> = HashSet::new();
    let mut picked: Vec<&Question> = Vec::with_capacity(n);

    for b in 0..n {
        let slot = (b + offset) % order.len();
        let available = |pool: &[&'_ Question]| -> Vec<usize> {
            (0..pool.len())
                .filter(|&i| !used_ids.contains(pool[i].id.as_str()) && !used_refs.contains(&reference_key(pool[i])))
                .collect()
        };
        let mut choice = pick(&pools[slot], &available(&pools[slot]), b, duration, n, &mut rng);
        if choice.is_none() {
            for k in 1..order.len() {
                let pool = &pools[(slot + k) % order.len()];
                choice = pick(pool, &available(pool), b, duration, n, &mut rng);
                if choice.is_some() {
                    break;
                }
            }
        }
        let q = choice.ok_or(SelectionError::InsufficientCandidates { strategy: None, needed: n, available: picked.len() })?;
        used_ids.insert(q.id.as_str());
        used_refs.insert(reference_key(q));
        picked.push(q);
    }

    picked.sort_by(|a, b| (a.timestamp, a.strategy, &a.id).cmp(&(b.timestamp, b.strategy, &b.id)));
    let mut popups: Vec<u64> = picked.iter().map(|q| q.timestamp).collect();
    for i in 1..popups.len() {
        if popups[i] <= popups[i - 1] {
            popups[i] = popups[i - 1] + 1;
        }
    }
    if popups.last().is_some_and(|&t| t > duration) {
        let last = popups.len() - 1;
        popups[last] = duration;
        for i in (0..last).rev() {
            if popups[i] >= popups[i + 1] {
                popups[i] = popups[i + 1].saturating_sub(1);
            }
        }
    }
    let scheduled = picked
        .into_iter()
        .zip(popups)
        .map(|(q, popup_ms)| ScheduledQuestion { popup_ms, question: q.clone() })
        .collect();
    Ok(SessionPlan { selected_strategies: strategies, scheduled, seed, video_duration_ms: duration })
}

fn pick<'a>(
    pool: &[&'a Question],
    available: &[usize],
    bin: usize,
    duration: u64,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Option<&'a Question> {
    if available.is_empty() {
        return None;
    }
    let in_bin: Vec<usize> = available.iter().copied().filter(|&i| bin_of(pool[i].timestamp, duration, n) == bin).collect();
    if !in_bin.is_empty() {
        return Some(pool[in_bin[rng.gen_range(0..in_bin.len())]]);
    }
    let (lo, hi) = bin_bounds(bin, duration, n);
    let key = |i: usize| (distance_to_bin(pool[i].timestamp, lo, hi), pool[i].timestamp);
    let best = available.iter().map(|&i| key(i)).min()?;
    let ties: Vec<usize> = available.iter().copied().filter(|&i| key(i) == best).collect();
    Some(pool[ties[rng.gen_range(0..ties.len())]])
}
