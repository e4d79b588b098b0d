//! Behavioral rules (best response, imitation) and the criteria firms use to
//! switch between them.

use std::fmt;

use rand::seq::index::sample;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{argmax_set, ties, StageGame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BehavioralRule {
    #[serde(rename = "BR")]
    BestResponse,
    #[serde(rename = "IM")]
    Imitation,
}

impl BehavioralRule {
    pub const ALL: [BehavioralRule; 2] = [BehavioralRule::BestResponse, BehavioralRule::Imitation];

    pub fn tag(self) -> &'static str {
        match self {
            BehavioralRule::BestResponse => "BR",
            BehavioralRule::Imitation => "IM",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for BehavioralRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// What every firm sees after a period is played.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedPeriod {
    pub levels: Vec<usize>,
    pub profits: Vec<f64>,
    pub rules: Vec<BehavioralRule>,
    pub fitness: Vec<f64>,
    pub tenures: Vec<usize>,
}

impl ObservedPeriod {
    pub fn firms(&self) -> usize {
        self.levels.len()
    }

    /// Checks the bookkeeping against `game` and the window length `m`.
    pub fn validate<G: StageGame + ?Sized>(&self, game: &G, m: usize) -> Result<()> {
        let n = self.levels.len();
        if [self.profits.len(), self.rules.len(), self.fitness.len(), self.tenures.len()].iter().any(|&l| l != n) {
            return Err(Error::Precondition("observed period vectors differ in length".into()));
        }
        let mut pay = vec![0.0; n];
        game.payoffs(&self.levels, &mut pay);
        if pay.iter().zip(&self.profits).any(|(a, b)| (a - b).abs() > 1e-12 * 1f64.max(a.abs())) {
            return Err(Error::Precondition("profits inconsistent with quantities".into()));
        }
        if self.tenures.iter().any(|&t| t < 1 || t > m) {
            return Err(Error::Precondition(format!("tenures must lie in 1..={m}")));
        }
        Ok(())
    }
}

fn pick<T: Copy>(items: &[T], rng: &mut (impl RngCore + ?Sized)) -> T {
    items[if items.len() == 1 { 0 } else { rng.gen_range(0..items.len()) }]
}

fn distinct_rules(firms: impl Iterator<Item = usize>, rules: &[BehavioralRule]) -> Vec<BehavioralRule> {
    let mut out: Vec<BehavioralRule> = firms.map(|j| rules[j]).collect();
    out.sort();
    out.dedup();
    out
}

/// Distinct levels played by the firms with the highest profit, ascending.
pub fn imitation_targets(last: &ObservedPeriod) -> Vec<usize> {
    let mut out: Vec<usize> = argmax_set(&last.profits).into_iter().map(|j| last.levels[j]).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// The quantity level `firm` chooses under `rule` after observing `last`.
pub fn action_revise<G: StageGame + ?Sized>(
    firm: usize,
    rule: BehavioralRule,
    last: &ObservedPeriod,
    game: &G,
    rng: &mut (impl RngCore + ?Sized),
) -> usize {
    match rule {
        BehavioralRule::BestResponse => {
            let mut br = Vec::with_capacity(2);
            game.best_responses(firm, &last.levels, &mut br);
            pick(&br, rng)
        }
        BehavioralRule::Imitation => pick(&imitation_targets(last), rng),
    }
}

fn default_sample_size() -> usize {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CriterionSpec {
    /// Copy a rule of a firm with the highest fitness.
    ImitateBestMax,
    /// As above, within a sample of `sample_size` firms that includes self.
    ImitateBestMaxSampling {
        #[serde(default = "default_sample_size")]
        sample_size: usize,
    },
    /// Copy the rule of a uniformly drawn firm.
    Experimental,
    /// Keep the rule when fitness is maximal, else copy a strictly better firm.
    ImitateIfBetter,
}

impl CriterionSpec {
    pub fn name(&self) -> &'static str {
        match self {
            CriterionSpec::ImitateBestMax => "imitate_best_max",
            CriterionSpec::ImitateBestMaxSampling { .. } => "imitate_best_max_sampling",
            CriterionSpec::Experimental => "experimental",
            CriterionSpec::ImitateIfBetter => "imitate_if_better",
        }
    }

    /// Whether the criterion is known to give every best-performing rule a
    /// positive adoption probability.
    pub fn satisfies_sf(&self) -> bool {
        !matches!(self, CriterionSpec::ImitateIfBetter)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if let CriterionSpec::ImitateBestMaxSampling { sample_size } = *self {
            if sample_size < 1 || sample_size > n {
                return Err(Error::InvalidConfig(format!("sample_size must lie in 1..={n}, got {sample_size}")));
            }
        }
        Ok(())
    }
}

/// The rule `firm` adopts when it revises after observing `last`.
pub fn rule_revise(
    firm: usize,
    criterion: &CriterionSpec,
    last: &ObservedPeriod,
    rng: &mut (impl RngCore + ?Sized),
) -> BehavioralRule {
    let n = last.firms();
    match *criterion {
        CriterionSpec::ImitateBestMax => pick(&distinct_rules(argmax_set(&last.fitness).into_iter(), &last.rules), rng),
        CriterionSpec::ImitateBestMaxSampling { sample_size } => {
            let size = sample_size.clamp(1, n);
            let mut members = vec![firm];
            if size > 1 {
                let others: Vec<usize> = (0..n).filter(|&j| j != firm).collect();
                members.extend(sample(rng, n - 1, size - 1).into_iter().map(|k| others[k]));
            }
            let fit: Vec<f64> = members.iter().map(|&j| last.fitness[j]).collect();
            let best = argmax_set(&fit).into_iter().map(|k| members[k]);
            pick(&distinct_rules(best, &last.rules), rng)
        }
        CriterionSpec::Experimental => last.rules[rng.gen_range(0..n)],
        CriterionSpec::ImitateIfBetter => {
            let own = last.fitness[firm];
            let better: Vec<usize> = (0..n).filter(|&j| last.fitness[j] > own && !ties(last.fitness[j], own)).collect();
            if better.is_empty() {
                last.rules[firm]
            } else {
                last.rules[pick(&better, rng)]
            }
        }
    }
}

/// Any rule-revision criterion, so the principle checks can also run on test
/// doubles.
pub trait RuleCriterion: Sync {
    fn label(&self) -> String;

    fn revise(&self, firm: usize, last: &ObservedPeriod, rng: &mut dyn RngCore) -> BehavioralRule;
}

impl RuleCriterion for CriterionSpec {
    fn label(&self) -> String {
        self.name().to_string()
    }

    fn revise(&self, firm: usize, last: &ObservedPeriod, rng: &mut dyn RngCore) -> BehavioralRule {
        rule_revise(firm, self, last, rng)
    }
}

const FIXTURE_MAX_FIRMS: usize = 6;
/// Draws per fixture when estimating adoption frequencies.
pub const SF_DRAWS_PER_FIXTURE: usize = 200;

/// A random observation with a small fitness alphabet so that ties are common.
pub fn random_fixture(rng: &mut (impl RngCore + ?Sized)) -> (usize, ObservedPeriod) {
    let n = rng.gen_range(2..=FIXTURE_MAX_FIRMS);
    let rules = (0..n)
        .map(|_| if rng.gen_bool(0.5) { BehavioralRule::BestResponse } else { BehavioralRule::Imitation })
        .collect();
    let fitness: Vec<f64> = (0..n).map(|_| rng.gen_range(0..4) as f64 * 2.5).collect();
    let last = ObservedPeriod {
        levels: (0..n).map(|_| rng.gen_range(0..10)).collect(),
        profits: fitness.clone(),
        rules,
        fitness,
        tenures: vec![1; n],
    };
    (rng.gen_range(0..n), last)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrincipleReport {
    pub criterion: String,
    pub trials: usize,
    pub violations: usize,
    pub first_violation: Option<String>,
}

impl PrincipleReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Every adopted rule must already be in use.
pub fn check_no_birth(criterion: &dyn RuleCriterion, trials: usize, rng: &mut dyn RngCore) -> PrincipleReport {
    let mut violations = 0;
    let mut first = None;
    for _ in 0..trials {
        let (firm, last) = random_fixture(rng);
        let rule = criterion.revise(firm, &last, rng);
        if !last.rules.contains(&rule) {
            violations += 1;
            first.get_or_insert_with(|| format!("firm {firm} adopted {rule} with rules {:?}", last.rules));
        }
    }
    PrincipleReport { criterion: criterion.label(), trials, violations, first_violation: first }
}

/// Every rule held by a firm with maximal fitness must be adopted at least
/// once in [`SF_DRAWS_PER_FIXTURE`] draws. `trials` counts draws in total.
pub fn check_survival_of_fittest(
    criterion: &dyn RuleCriterion,
    trials: usize,
    rng: &mut dyn RngCore,
) -> PrincipleReport {
    let fixtures = (trials / SF_DRAWS_PER_FIXTURE).max(1);
    let mut violations = 0;
    let mut first = None;
    for _ in 0..fixtures {
        let (firm, last) = random_fixture(rng);
        let wanted = distinct_rules(argmax_set(&last.fitness).into_iter(), &last.rules);
        let mut seen = [false; 2];
        for _ in 0..SF_DRAWS_PER_FIXTURE {
            seen[criterion.revise(firm, &last, rng).index()] = true;
        }
        if let Some(&missing) = wanted.iter().find(|r| !seen[r.index()]) {
            violations += 1;
            first.get_or_insert_with(|| {
                format!("firm {firm} never adopted {missing}; fitness {:?}, rules {:?}", last.fitness, last.rules)
            });
        }
    }
    PrincipleReport {
        criterion: criterion.label(),
        trials: fixtures * SF_DRAWS_PER_FIXTURE,
        violations,
        first_violation: first,
    }
}
