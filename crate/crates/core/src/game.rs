//! Shared abstractions over symmetric finite games.
//!
//! Both the Cournot model and general aggregative games implement
//! [`StageGame`], which is all the revision dynamics need. [`LreGame`] adds
//! the two distinguished strategies (Nash and the imitation attractor) used by
//! the long-run equilibrium engine.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::Result;
use crate::rules::BehavioralRule;

/// Relative tolerance used whenever payoffs or fitness values are compared
/// for ties.
pub const TIE_TOL: f64 = 1e-9;

/// `a` and `b` are equal up to [`TIE_TOL`] relative to their magnitude.
pub fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOL * 1f64.max(a.abs()).max(b.abs())
}

/// Indices of the entries within tolerance of the maximum.
pub fn argmax_set(values: &[f64]) -> Vec<usize> {
    let Some(max) = values.iter().copied().reduce(f64::max) else {
        return Vec::new();
    };
    values.iter().enumerate().filter(|(_, &v)| ties(v, max)).map(|(i, _)| i).collect()
}

/// A symmetric n-player game over a finite, ordered strategy set. Strategies
/// are addressed by level index `0..levels()`.
pub trait StageGame: Sync {
    fn players(&self) -> usize;

    fn levels(&self) -> usize;

    /// Numeric value of a strategy level.
    fn level_value(&self, level: usize) -> f64;

    /// Payoff of every player at `profile`, written into `out`.
    fn payoffs(&self, profile: &[usize], out: &mut [f64]);

    /// All maximizers of `player`'s payoff holding the rest of `profile`
    /// fixed, in ascending level order. Cleared before writing.
    fn best_responses(&self, player: usize, profile: &[usize], out: &mut Vec<usize>);

    /// Payoff advantage of a single deviant playing `to` against `n - 1`
    /// opponents at `from`.
    fn relative_advantage(&self, from: usize, to: usize) -> f64 {
        let n = self.players();
        let mut profile = vec![from; n];
        profile[0] = to;
        let mut pay = vec![0.0; n];
        self.payoffs(&profile, &mut pay);
        pay[0] - pay[1]
    }
}

/// Distinguished strategies of a game with a unique symmetric Nash
/// equilibrium and a unique imitation attractor (Walrasian quantity or
/// aggregate-taking strategy).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anchors {
    pub nash: usize,
    pub imitation: usize,
}

/// What the closed-form characterization predicts for the LRE set.
#[derive(Debug, Clone, PartialEq)]
pub enum ClosedForm {
    /// The LRE set is exactly this.
    Exact(Vec<AbsorbingSet>),
    /// The LRE set contains at least these.
    Superset(Vec<AbsorbingSet>),
    NotApplicable(String),
}

pub trait LreGame: StageGame {
    fn anchors(&self) -> Result<Anchors>;

    fn closed_form(&self, eta: f64) -> ClosedForm {
        let _ = eta;
        ClosedForm::NotApplicable("no closed form for this game".into())
    }

    /// Interval of imitation quantities predicted to be long-run equilibria
    /// when rule and action mistakes are equally costly, if known.
    fn bounds(&self) -> Option<(f64, f64)> {
        None
    }
}

/// Monomorphic pattern mon(q, rho): every firm uses `rule` and plays `level`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AbsorbingSet {
    pub rule: BehavioralRule,
    pub level: usize,
}

impl AbsorbingSet {
    pub fn imitation(level: usize) -> Self {
        Self { rule: BehavioralRule::Imitation, level }
    }

    pub fn best_response(level: usize) -> Self {
        Self { rule: BehavioralRule::BestResponse, level }
    }
}

impl fmt::Display for AbsorbingSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "mon(#{},{})", self.level, self.rule)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_collects_near_ties() {
        let v = [1.0, 3.0, 3.0 + 1e-12, 2.0];
        assert_eq!(argmax_set(&v), vec![1, 2]);
        assert!(argmax_set(&[]).is_empty());
    }

    #[test]
    fn ties_is_relative() {
        assert!(ties(1e6, 1e6 + 1e-4));
        assert!(!ties(1.0, 1.0 + 1e-6));
    }
}
