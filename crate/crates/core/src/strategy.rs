//! The three question-generation strategies and sets of them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// How a question was generated.
///
/// The declaration order is the canonical order everywhere: menus, token
/// lines, bank grouping, and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Plain transcript only.
    Transcript,
    /// Transcript with aggregated learner emotion cues.
    Emotion,
    /// Transcript with hard-to-follow visual cues.
    Visual,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Transcript, Strategy::Emotion, Strategy::Visual];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Transcript => "transcript",
            Strategy::Emotion => "emotion",
            Strategy::Visual => "visual",
        }
    }

    /// Human label used in menus and reports.
    pub fn label(self) -> &'static str {
        match self {
            Strategy::Transcript => "Transcript questions",
            Strategy::Emotion => "Emotion questions",
            Strategy::Visual => "Visual questions",
        }
    }

    /// 1-based position in the selection menu.
    pub fn menu_position(self) -> usize {
        match self {
            Strategy::Transcript => 1,
            Strategy::Emotion => 2,
            Strategy::Visual => 3,
        }
    }

    fn bit(self) -> u8 {
        1 << (self.menu_position() - 1)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown strategy {0:?}")]
pub struct UnknownStrategy(pub String);

impl FromStr for Strategy {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "transcript" => Ok(Strategy::Transcript),
            "emotion" => Ok(Strategy::Emotion),
            "visual" => Ok(Strategy::Visual),
            other => Err(UnknownStrategy(other.to_string())),
        }
    }
}

/// A set of strategies, always iterated in canonical order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct StrategySet(u8);

impl StrategySet {
    pub const EMPTY: StrategySet = StrategySet(0);
    pub const ALL: StrategySet = StrategySet(0b111);

    pub fn single(strategy: Strategy) -> Self {
        StrategySet(strategy.bit())
    }

    pub fn insert(&mut self, strategy: Strategy) {
        self.0 |= strategy.bit();
    }

    pub fn contains(self, strategy: Strategy) -> bool {
        self.0 & strategy.bit() != 0
    }

    pub fn union(self, other: StrategySet) -> StrategySet {
        StrategySet(self.0 | other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Strategy> {
        Strategy::ALL.into_iter().filter(move |s| self.contains(*s))
    }

    /// All seven non-empty subsets, in bit order.
    pub fn non_empty_subsets() -> impl Iterator<Item = StrategySet> {
        (1u8..=7).map(StrategySet)
    }
}

impl FromIterator<Strategy> for StrategySet {
    fn from_iter<I: IntoIterator<Item = Strategy>>(iter: I) -> Self {
        let mut set = StrategySet::EMPTY;
        for s in iter {
            set.insert(s);
        }
        set
    }
}

impl fmt::Debug for StrategySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl Serialize for StrategySet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for StrategySet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let items = Vec::<Strategy>::deserialize(deserializer)?;
        Ok(items.into_iter().collect())
    }
}
