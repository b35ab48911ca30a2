//! Leaderboard medal classification.

use std::io::Read;

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Medal {
    Gold,
    Silver,
    Bronze,
    AboveMedian,
    BelowMedian,
}

impl Medal {
    /// 4 for gold down to 0 for below median.
    pub fn level(self) -> u8 {
        match self {
            Medal::Gold => 4,
            Medal::Silver => 3,
            Medal::Bronze => 2,
            Medal::AboveMedian => 1,
            Medal::BelowMedian => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedalThresholds {
    pub id: String,
    pub name: String,
    pub gold: f64,
    pub silver: f64,
    pub bronze: f64,
    pub median: f64,
    pub higher_is_better: bool,
}

/// Highest tier whose threshold the value meets or beats.
///
/// `negated_input` marks lower-is-better scores reported with flipped sign.
pub fn classify_medal(value: f64, t: &MedalThresholds, negated_input: bool) -> Medal {
    let v = if negated_input && !t.higher_is_better {
        -value
    } else {
        value
    };
    let meets = |threshold: f64| {
        if t.higher_is_better {
            v >= threshold
        } else {
            v <= threshold
        }
    };
    if meets(t.gold) {
        Medal::Gold
    } else if meets(t.silver) {
        Medal::Silver
    } else if meets(t.bronze) {
        Medal::Bronze
    } else if meets(t.median) {
        Medal::AboveMedian
    } else {
        Medal::BelowMedian
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlebenchResult {
    pub agent: String,
    pub id: String,
    /// `None` when the agent produced no valid submission.
    pub value: Option<f64>,
}

pub fn load_thresholds<R: Read>(reader: R) -> Result<Vec<MedalThresholds>, EvalError> {
    let mut rdr = csv::Reader::from_reader(reader);
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}

pub fn load_results<R: Read>(reader: R) -> Result<Vec<MlebenchResult>, EvalError> {
    let mut rdr = csv::Reader::from_reader(reader);
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MlebenchSummary {
    pub agent: String,
    pub gold: usize,
    pub silver: usize,
    pub bronze: usize,
    pub above_median: usize,
    pub below_median: usize,
    pub valid: usize,
    pub total: usize,
    /// Per competition: id and medal, or `None` when invalid.
    pub per_task: Vec<(String, Option<Medal>)>,
}

impl MlebenchSummary {
    pub fn any_medal(&self) -> usize {
        self.gold + self.silver + self.bronze
    }

    pub fn valid_rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.valid as f64 / self.total as f64 * 100.0
        }
    }

    /// Counts competitions per agent; results for unknown ids are ignored.
    pub fn compute(
        agent: &str,
        thresholds: &[MedalThresholds],
        results: &[MlebenchResult],
        negated_input: bool,
    ) -> Self {
        let mut s = MlebenchSummary {
            agent: agent.to_string(),
            total: thresholds.len(),
            ..Default::default()
        };
        for t in thresholds {
            let value = results
                .iter()
                .find(|r| r.agent == agent && r.id == t.id)
                .and_then(|r| r.value);
            let medal = value.map(|v| classify_medal(v, t, negated_input));
            match medal {
                Some(Medal::Gold) => s.gold += 1,
                Some(Medal::Silver) => s.silver += 1,
                Some(Medal::Bronze) => s.bronze += 1,
                Some(Medal::AboveMedian) => s.above_median += 1,
                Some(Medal::BelowMedian) => s.below_median += 1,
                None => {}
            }
            if medal.is_some() {
                s.valid += 1;
            }
            s.per_task.push((t.id.clone(), medal));
        }
        s
    }
}
