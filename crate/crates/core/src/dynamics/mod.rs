//! The revision process as a Markov chain over M-period histories.
//!
//! Each period every firm may revise its rule (probability γ), then may revise
//! its quantity (probability θ) using the rule it holds after the first stage.
//! Revisions are perturbed: rule choices are replaced by a draw from the rule
//! mistake law with probability ε^η, quantity choices by a draw from the action
//! mistake law with probability ε.

mod absorb;
pub mod exact;
mod montecarlo;

pub use absorb::{absorbing_pattern, find_absorbing, is_absorbing_pattern, AbsorptionOutcome};
pub use exact::{exact_chain_oracle, ExactStationary, DEFAULT_STATE_CAP};
pub use montecarlo::{
    estimate_stationary, random_initial_state, replication_rng, simulate_trajectory, InitialCondition, Occupancy,
    OccupancyEntry, SimulationControls, TrajectoryRow,
};

use std::collections::VecDeque;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{AbsorbingSet, StageGame};
use crate::rules::{action_revise, rule_revise, BehavioralRule, CriterionSpec, ObservedPeriod};

/// Full-support distribution used when a revision is replaced by a mistake.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MistakeLaw {
    #[default]
    Uniform,
    Weighted {
        weights: Vec<f64>,
    },
}

impl MistakeLaw {
    pub fn validate(&self, support: usize, what: &str) -> Result<()> {
        if let MistakeLaw::Weighted { weights } = self {
            if weights.len() != support {
                return Err(Error::InvalidConfig(format!(
                    "{what} weights: expected {support} entries, got {}",
                    weights.len()
                )));
            }
            if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                return Err(Error::InvalidConfig(format!("{what} weights must all be positive")));
            }
        }
        Ok(())
    }

    pub fn probability(&self, k: usize, support: usize) -> f64 {
        match self {
            MistakeLaw::Uniform => 1.0 / support as f64,
            MistakeLaw::Weighted { weights } => weights[k] / weights.iter().sum::<f64>(),
        }
    }

    pub fn sample(&self, support: usize, rng: &mut (impl RngCore + ?Sized)) -> usize {
        match self {
            MistakeLaw::Uniform => rng.gen_range(0..support),
            MistakeLaw::Weighted { weights } => WeightedIndex::new(weights).expect("validated weights").sample(rng),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub gamma: f64,
    pub theta: f64,
    pub epsilon: f64,
    pub eta: f64,
    #[serde(default)]
    pub action_mistake_law: MistakeLaw,
    #[serde(default)]
    pub rule_mistake_law: MistakeLaw,
}

impl NoiseConfig {
    pub fn new(gamma: f64, theta: f64, epsilon: f64, eta: f64) -> Self {
        Self {
            gamma,
            theta,
            epsilon,
            eta,
            action_mistake_law: MistakeLaw::Uniform,
            rule_mistake_law: MistakeLaw::Uniform,
        }
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, ..self.clone() }
    }

    pub fn rule_mistake_probability(&self) -> f64 {
        if self.epsilon == 0.0 {
            0.0
        } else {
            self.epsilon.powf(self.eta)
        }
    }

    /// Opportunity probabilities in `(0, 1]`; a probability of one is allowed
    /// so that scripted realizations can be replayed without inertia.
    pub fn validate(&self, levels: usize) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        if !unit(self.gamma) {
            return Err(Error::InvalidConfig(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !unit(self.theta) {
            return Err(Error::InvalidConfig(format!("theta must lie in (0, 1], got {}", self.theta)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!("epsilon must lie in [0, 1), got {}", self.epsilon)));
        }
        if !(self.eta >= 1.0 && self.eta.is_finite()) {
            return Err(Error::InvalidConfig(format!("eta must be at least 1, got {}", self.eta)));
        }
        self.action_mistake_law.validate(levels, "action mistake")?;
        self.rule_mistake_law.validate(BehavioralRule::ALL.len(), "rule mistake")
    }
}

/// Everything that governs revisions: per-firm criteria, noise, the fitness
/// window `M` and an optional discount on older profits.
#[derive(Debug, Clone, PartialEq)]
pub struct RevisionConfig {
    pub criteria: Vec<CriterionSpec>,
    pub noise: NoiseConfig,
    pub memory: usize,
    pub discount: f64,
}

impl RevisionConfig {
    pub fn new(criteria: Vec<CriterionSpec>, noise: NoiseConfig, memory: usize) -> Self {
        Self { criteria, noise, memory, discount: 1.0 }
    }

    /// The same criterion for all `n` firms.
    pub fn uniform(n: usize, criterion: CriterionSpec, noise: NoiseConfig, memory: usize) -> Self {
        Self::new(vec![criterion; n], noise, memory)
    }

    pub fn validate<G: StageGame + ?Sized>(&self, game: &G) -> Result<()> {
        let n = game.players();
        if self.criteria.len() != n {
            return Err(Error::InvalidConfig(format!(
                "expected {n} criteria (one per firm), got {}",
                self.criteria.len()
            )));
        }
        for c in &self.criteria {
            c.validate(n)?;
        }
        if self.memory < 1 {
            return Err(Error::InvalidConfig("memory M must be at least 1".into()));
        }
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::InvalidConfig(format!("discount must lie in (0, 1], got {}", self.discount)));
        }
        self.noise.validate(game.levels())
    }

    pub fn all_satisfy_sf(&self) -> bool {
        self.criteria.iter().all(CriterionSpec::satisfies_sf)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirmRecord {
    pub level: usize,
    pub rule: BehavioralRule,
    /// Periods since the last rule revision, unclamped.
    pub tenure: u64,
    /// Most recent profits, oldest first, at most `M` of them.
    pub payoff_window: VecDeque<f64>,
}

impl FirmRecord {
    pub fn clamped_tenure(&self, memory: usize) -> usize {
        self.tenure.min(memory as u64) as usize
    }

    /// Mean of the last `min(τ, M)` profits, optionally discounted by age.
    pub fn fitness(&self, memory: usize, discount: f64) -> f64 {
        let k = self.clamped_tenure(memory).min(self.payoff_window.len());
        let recent = self.payoff_window.iter().rev().take(k);
        if discount == 1.0 {
            recent.sum::<f64>() / k as f64
        } else {
            let (mut num, mut den, mut w) = (0.0, 0.0, 1.0);
            for &p in recent {
                num += w * p;
                den += w;
                w *= discount;
            }
            num / den
        }
    }
}

/// One played period as stored in the chain state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PeriodRecord {
    pub levels: Vec<usize>,
    pub rules: Vec<BehavioralRule>,
    pub tenures: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndustryState {
    pub firms: Vec<FirmRecord>,
    pub period: u64,
    /// The last `M` periods, oldest first.
    pub history: VecDeque<PeriodRecord>,
    pub last_profits: Vec<f64>,
    memory: usize,
}

impl IndustryState {
    /// Replays the initial profile for `M` warm-up periods so that every
    /// firm has a full window and tenure `M`.
    pub fn new<G: StageGame + ?Sized>(
        game: &G,
        levels: &[usize],
        rules: &[BehavioralRule],
        memory: usize,
    ) -> Result<Self> {
        let n = game.players();
        if levels.len() != n || rules.len() != n {
            return Err(Error::InvalidConfig(format!("initial profile must have {n} entries")));
        }
        if memory < 1 {
            return Err(Error::InvalidConfig("memory M must be at least 1".into()));
        }
        if let Some(&k) = levels.iter().find(|&&k| k >= game.levels()) {
            return Err(Error::InvalidConfig(format!("initial level {k} outside the grid")));
        }
        let mut profits = vec![0.0; n];
        game.payoffs(levels, &mut profits);
        let firms = (0..n)
            .map(|i| FirmRecord {
                level: levels[i],
                rule: rules[i],
                tenure: memory as u64,
                payoff_window: std::iter::repeat_n(profits[i], memory).collect(),
            })
            .collect();
        let record = PeriodRecord { levels: levels.to_vec(), rules: rules.to_vec(), tenures: vec![memory; n] };
        Ok(Self {
            firms,
            period: 0,
            history: std::iter::repeat_n(record, memory).collect(),
            last_profits: profits,
            memory,
        })
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn levels(&self) -> Vec<usize> {
        self.firms.iter().map(|f| f.level).collect()
    }

    pub fn rules(&self) -> Vec<BehavioralRule> {
        self.firms.iter().map(|f| f.rule).collect()
    }

    pub fn observed(&self, discount: f64) -> ObservedPeriod {
        ObservedPeriod {
            levels: self.levels(),
            profits: self.last_profits.clone(),
            rules: self.rules(),
            fitness: self.firms.iter().map(|f| f.fitness(self.memory, discount)).collect(),
            tenures: self.firms.iter().map(|f| f.clamped_tenure(self.memory)).collect(),
        }
    }

    /// `mon(q, ρ)` if every firm currently plays `q` under `ρ`.
    pub fn monomorphic(&self) -> Option<AbsorbingSet> {
        let first = &self.firms[0];
        self.firms
            .iter()
            .all(|f| f.level == first.level && f.rule == first.rule)
            .then_some(AbsorbingSet { rule: first.rule, level: first.level })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RulePlan {
    /// No revision opportunity.
    Keep,
    /// Revise according to the firm's criterion.
    Revise,
    /// Revise, but adopt this rule by mistake.
    Mistake(BehavioralRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionPlan {
    Keep,
    /// Follow the post-revision rule.
    Revise,
    /// Play this level by mistake.
    Mistake(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FirmPlan {
    pub rule: RulePlan,
    pub action: ActionPlan,
}

impl FirmPlan {
    pub const IDLE: FirmPlan = FirmPlan { rule: RulePlan::Keep, action: ActionPlan::Keep };
}

/// The random events of one period, one entry per firm. Drawing and applying
/// them separately lets tests script exact realizations.
pub type PeriodPlan = Vec<FirmPlan>;

pub fn draw_plan(config: &RevisionConfig, n: usize, levels: usize, rng: &mut (impl RngCore + ?Sized)) -> PeriodPlan {
    let noise = &config.noise;
    let rule_mistake = noise.rule_mistake_probability();
    (0..n)
        .map(|_| {
            let rule = if rng.gen_bool(noise.gamma) {
                if rule_mistake > 0.0 && rng.gen_bool(rule_mistake) {
                    RulePlan::Mistake(BehavioralRule::ALL[noise.rule_mistake_law.sample(2, rng)])
                } else {
                    RulePlan::Revise
                }
            } else {
                RulePlan::Keep
            };
            let action = if rng.gen_bool(noise.theta) {
                if noise.epsilon > 0.0 && rng.gen_bool(noise.epsilon) {
                    ActionPlan::Mistake(noise.action_mistake_law.sample(levels, rng))
                } else {
                    ActionPlan::Revise
                }
            } else {
                ActionPlan::Keep
            };
            FirmPlan { rule, action }
        })
        .collect()
}

/// Executes one period under a given plan. Randomness is only used for tie
/// breaks and sampling inside the criteria and rules.
pub fn apply_plan<G: StageGame + ?Sized>(
    state: &mut IndustryState,
    game: &G,
    config: &RevisionConfig,
    plan: &[FirmPlan],
    rng: &mut (impl RngCore + ?Sized),
) {
    let last = state.observed(config.discount);
    let mut reset = vec![false; state.firms.len()];
    for (i, p) in plan.iter().enumerate() {
        let rule = match p.rule {
            RulePlan::Keep => state.firms[i].rule,
            RulePlan::Revise => rule_revise(i, &config.criteria[i], &last, rng),
            RulePlan::Mistake(r) => r,
        };
        reset[i] = p.rule != RulePlan::Keep;
        let level = match p.action {
            ActionPlan::Keep => last.levels[i],
            ActionPlan::Revise => action_revise(i, rule, &last, game, rng),
            ActionPlan::Mistake(k) => k,
        };
        let f = &mut state.firms[i];
        f.rule = rule;
        f.level = level;
    }
    let levels = state.levels();
    let mut profits = vec![0.0; levels.len()];
    game.payoffs(&levels, &mut profits);
    let memory = state.memory;
    for (i, f) in state.firms.iter_mut().enumerate() {
        if f.payoff_window.len() == memory {
            f.payoff_window.pop_front();
        }
        f.payoff_window.push_back(profits[i]);
        f.tenure = if reset[i] { 1 } else { f.tenure + 1 };
    }
    if state.history.len() == memory {
        state.history.pop_front();
    }
    state.history.push_back(PeriodRecord {
        levels,
        rules: state.rules(),
        tenures: state.firms.iter().map(|f| f.clamped_tenure(memory)).collect(),
    });
    state.last_profits = profits;
    state.period += 1;
}

/// One period of the perturbed chain (the unperturbed one when `ε = 0`).
pub fn step<G: StageGame + ?Sized>(
    state: &mut IndustryState,
    game: &G,
    config: &RevisionConfig,
    rng: &mut (impl RngCore + ?Sized),
) {
    let plan = draw_plan(config, state.firms.len(), game.levels(), rng);
    apply_plan(state, game, config, &plan, rng);
}
