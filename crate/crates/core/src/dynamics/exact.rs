//! Exact stationary distribution of the perturbed chain on small instances.
//!
//! This is a second implementation of the period law, written from the
//! per-firm outcome probabilities rather than by sampling, so that it can
//! serve as an oracle for the simulator.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::RevisionConfig;
use crate::error::{Error, Result};
use crate::game::{ties, AbsorbingSet, StageGame};
use crate::rules::{BehavioralRule, CriterionSpec};

pub const DEFAULT_STATE_CAP: usize = 200_000;
/// Largest chain solved by direct elimination; larger ones use power iteration.
const DENSE_LIMIT: usize = 2_500;
const RESIDUAL_TOL: f64 = 1e-12;
const POWER_MAX_ITER: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Key {
    /// The last M profiles, oldest first, flattened.
    profiles: Vec<u16>,
    rules: Vec<u8>,
    tenures: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactStationary {
    pub states: usize,
    pub residual: f64,
    pub method: &'static str,
    /// Stationary mass of each monomorphic current-period pattern.
    pub pattern_mass: BTreeMap<AbsorbingSet, f64>,
    #[serde(skip)]
    pub probabilities: Vec<f64>,
}

impl ExactStationary {
    pub fn mass(&self, patterns: &[AbsorbingSet]) -> f64 {
        patterns.iter().filter_map(|p| self.pattern_mass.get(p)).sum()
    }
}

fn argmax_indices(values: &[f64]) -> Vec<usize> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..values.len()).filter(|&j| ties(values[j], max)).collect()
}

fn rule_of(x: u8) -> BehavioralRule {
    BehavioralRule::ALL[x as usize]
}

/// Probability of each rule (indexed by `BehavioralRule::index`) under a
/// criterion, given everyone's fitness and rules.
fn criterion_law(criterion: &CriterionSpec, firm: usize, fitness: &[f64], rules: &[u8]) -> [f64; 2] {
    let n = fitness.len();
    let mut law = [0.0; 2];
    let uniform_over_rules = |members: &[usize], law: &mut [f64; 2], weight: f64| {
        let sub: Vec<f64> = members.iter().map(|&j| fitness[j]).collect();
        let mut present = [false; 2];
        for k in argmax_indices(&sub) {
            present[rules[members[k]] as usize] = true;
        }
        let count = present.iter().filter(|&&b| b).count() as f64;
        for r in 0..2 {
            if present[r] {
                law[r] += weight / count;
            }
        }
    };
    match *criterion {
        CriterionSpec::ImitateBestMax => {
            let all: Vec<usize> = (0..n).collect();
            uniform_over_rules(&all, &mut law, 1.0);
        }
        CriterionSpec::ImitateBestMaxSampling { sample_size } => {
            let others: Vec<usize> = (0..n).filter(|&j| j != firm).collect();
            let subsets = combinations(others.len(), sample_size.clamp(1, n) - 1);
            let w = 1.0 / subsets.len() as f64;
            for s in subsets {
                let mut members = vec![firm];
                members.extend(s.iter().map(|&k| others[k]));
                uniform_over_rules(&members, &mut law, w);
            }
        }
        CriterionSpec::Experimental => {
            for &r in rules {
                law[r as usize] += 1.0 / n as f64;
            }
        }
        CriterionSpec::ImitateIfBetter => {
            let own = fitness[firm];
            let better: Vec<usize> = (0..n).filter(|&j| fitness[j] > own && !ties(fitness[j], own)).collect();
            if better.is_empty() {
                law[rules[firm] as usize] = 1.0;
            } else {
                for &j in &better {
                    law[rules[j] as usize] += 1.0 / better.len() as f64;
                }
            }
        }
    }
    law
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

struct Chain<'a, G: StageGame + ?Sized> {
    game: &'a G,
    config: &'a RevisionConfig,
    n: usize,
    levels: usize,
    memory: usize,
}

impl<G: StageGame + ?Sized> Chain<'_, G> {
    fn payoffs(&self, profile: &[u16]) -> Vec<f64> {
        let p: Vec<usize> = profile.iter().map(|&k| k as usize).collect();
        let mut out = vec![0.0; self.n];
        self.game.payoffs(&p, &mut out);
        out
    }

    /// Level probabilities for `firm` following `rule` after profile `last`.
    fn action_law(&self, firm: usize, rule: BehavioralRule, last: &[u16], profits: &[f64]) -> Vec<f64> {
        let mut law = vec![0.0; self.levels];
        let targets: Vec<usize> = match rule {
            BehavioralRule::BestResponse => {
                let mut profile: Vec<usize> = last.iter().map(|&k| k as usize).collect();
                let mut pay = vec![0.0; self.n];
                let own: Vec<f64> = (0..self.levels)
                    .map(|k| {
                        profile[firm] = k;
                        self.game.payoffs(&profile, &mut pay);
                        pay[firm]
                    })
                    .collect();
                argmax_indices(&own)
            }
            BehavioralRule::Imitation => {
                let mut t: Vec<usize> = argmax_indices(profits).into_iter().map(|j| last[j] as usize).collect();
                t.sort_unstable();
                t.dedup();
                t
            }
        };
        for &k in &targets {
            law[k] += 1.0 / targets.len() as f64;
        }
        law
    }

    fn successors(&self, key: &Key) -> Vec<(Key, f64)> {
        let (n, m) = (self.n, self.memory);
        let noise = &self.config.noise;
        let last = &key.profiles[(m - 1) * n..];
        let history: Vec<Vec<f64>> = (0..m).map(|r| self.payoffs(&key.profiles[r * n..(r + 1) * n])).collect();
        let profits = &history[m - 1];
        let discount = self.config.discount;
        let fitness: Vec<f64> = (0..n)
            .map(|i| {
                let k = key.tenures[i] as usize;
                let (mut num, mut den, mut w) = (0.0, 0.0, 1.0);
                for r in (m - k..m).rev() {
                    num += w * history[r][i];
                    den += w;
                    w *= discount;
                }
                num / den
            })
            .collect();
        let rule_eps = if noise.epsilon == 0.0 { 0.0 } else { noise.epsilon.powf(noise.eta) };

        // Per firm: outcomes (rule, reset, level) with probabilities.
        let per_firm: Vec<Vec<((u8, bool, u16), f64)>> = (0..n)
            .map(|i| {
                let crit = criterion_law(&self.config.criteria[i], i, &fitness, &key.rules);
                let mut rule_outcomes = vec![((key.rules[i], false), 1.0 - noise.gamma)];
                for r in 0..2u8 {
                    let p = noise.gamma
                        * (rule_eps * noise.rule_mistake_law.probability(r as usize, 2)
                            + (1.0 - rule_eps) * crit[r as usize]);
                    rule_outcomes.push(((r, true), p));
                }
                let mut out = Vec::new();
                for ((r, reset), pr) in rule_outcomes {
                    if pr == 0.0 {
                        continue;
                    }
                    let follow = self.action_law(i, rule_of(r), last, profits);
                    let mut level_law = vec![0.0; self.levels];
                    level_law[last[i] as usize] += 1.0 - noise.theta;
                    for k in 0..self.levels {
                        level_law[k] += noise.theta
                            * (noise.epsilon * noise.action_mistake_law.probability(k, self.levels)
                                + (1.0 - noise.epsilon) * follow[k]);
                    }
                    for (k, &pk) in level_law.iter().enumerate() {
                        if pk > 0.0 {
                            out.push(((r, reset, k as u16), pr * pk));
                        }
                    }
                }
                out
            })
            .collect();

        let mut result: HashMap<Key, f64> = HashMap::new();
        let mut idx = vec![0usize; n];
        loop {
            let mut prob = 1.0;
            let mut profiles = key.profiles[n..].to_vec();
            let mut rules = Vec::with_capacity(n);
            let mut tenures = Vec::with_capacity(n);
            for i in 0..n {
                let ((r, reset, k), p) = per_firm[i][idx[i]];
                prob *= p;
                profiles.push(k);
                rules.push(r);
                tenures.push(if reset { 1 } else { (key.tenures[i] + 1).min(m as u8) });
            }
            *result.entry(Key { profiles, rules, tenures }).or_insert(0.0) += prob;
            // Odometer over the per-firm outcome lists.
            let mut f = 0;
            while f < n {
                idx[f] += 1;
                if idx[f] < per_firm[f].len() {
                    break;
                }
                idx[f] = 0;
                f += 1;
            }
            if f == n {
                break;
            }
        }
        let mut v: Vec<(Key, f64)> = result.into_iter().collect();
        v.sort_by(|a, b| (&a.0.profiles, &a.0.rules, &a.0.tenures).cmp(&(&b.0.profiles, &b.0.rules, &b.0.tenures)));
        v
    }
}

/// Enumerates the states reachable from the all-zero imitation state, builds
/// the exact transition matrix and solves for its stationary vector.
pub fn exact_chain_oracle<G: StageGame + ?Sized>(
    game: &G,
    config: &RevisionConfig,
    cap: usize,
) -> Result<ExactStationary> {
    config.validate(game)?;
    if config.noise.epsilon <= 0.0 {
        return Err(Error::Precondition("the exact oracle needs epsilon > 0 (irreducible chain)".into()));
    }
    let n = game.players();
    let memory = config.memory;
    if game.levels() > u16::MAX as usize || memory > u8::MAX as usize - 1 {
        return Err(Error::StateSpaceTooLarge { cap });
    }
    let chain = Chain { game, config, n, levels: game.levels(), memory };
    let start = Key {
        profiles: vec![0; n * memory],
        rules: vec![BehavioralRule::Imitation.index() as u8; n],
        tenures: vec![memory as u8; n],
    };
    let mut index: HashMap<Key, usize> = HashMap::new();
    let mut keys = vec![start.clone()];
    index.insert(start, 0);
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut next = 0;
    while next < keys.len() {
        let succ = chain.successors(&keys[next]);
        let mut row = Vec::with_capacity(succ.len());
        for (k, p) in succ {
            let j = match index.get(&k) {
                Some(&j) => j,
                None => {
                    if keys.len() >= cap {
                        return Err(Error::StateSpaceTooLarge { cap });
                    }
                    index.insert(k.clone(), keys.len());
                    keys.push(k);
                    keys.len() - 1
                }
            };
            row.push((j, p));
        }
        rows.push(row);
        next += 1;
    }

    let (pi, method) = if keys.len() <= DENSE_LIMIT { (gth(&rows), "gth") } else { (power(&rows)?, "power") };
    let residual = residual(&rows, &pi);
    if !(residual < RESIDUAL_TOL) {
        return Err(Error::Discrepancy(format!("stationary residual {residual:e} above {RESIDUAL_TOL:e}")));
    }
    let mut pattern_mass = BTreeMap::new();
    for (key, &p) in keys.iter().zip(&pi) {
        let last = &key.profiles[(memory - 1) * n..];
        if last.iter().all(|&k| k == last[0]) && key.rules.iter().all(|&r| r == key.rules[0]) {
            let pattern = AbsorbingSet { rule: rule_of(key.rules[0]), level: last[0] as usize };
            *pattern_mass.entry(pattern).or_insert(0.0) += p;
        }
    }
    Ok(ExactStationary { states: keys.len(), residual, method, pattern_mass, probabilities: pi })
}

/// Grassmann-Taksar-Heyman elimination: subtraction-free, so accurate even
/// when transition probabilities span many orders of magnitude.
fn gth(rows: &[Vec<(usize, f64)>]) -> Vec<f64> {
    let s = rows.len();
    let mut p = vec![0.0; s * s];
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            if i != j {
                p[i * s + j] += v;
            }
        }
    }
    for k in (1..s).rev() {
        let total: f64 = p[k * s..k * s + k].iter().sum();
        let (head, tail) = p.split_at_mut(k * s);
        let row_k = &tail[..k];
        for i in 0..k {
            let a = head[i * s + k] / total;
            head[i * s + k] = a;
            if a != 0.0 {
                for (x, &y) in head[i * s..i * s + k].iter_mut().zip(row_k) {
                    *x += a * y;
                }
            }
        }
    }
    let mut pi = vec![0.0; s];
    pi[0] = 1.0;
    for k in 1..s {
        pi[k] = (0..k).map(|i| pi[i] * p[i * s + k]).sum();
    }
    let z: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= z);
    pi
}

fn apply(rows: &[Vec<(usize, f64)>], pi: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; pi.len()];
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            out[j] += pi[i] * v;
        }
    }
    out
}

fn residual(rows: &[Vec<(usize, f64)>], pi: &[f64]) -> f64 {
    apply(rows, pi).iter().zip(pi).map(|(a, b)| (a - b).abs()).sum()
}

fn power(rows: &[Vec<(usize, f64)>]) -> Result<Vec<f64>> {
    let s = rows.len();
    let mut pi = vec![1.0 / s as f64; s];
    for _ in 0..POWER_MAX_ITER {
        let next = apply(rows, &pi);
        let change: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if change < RESIDUAL_TOL / 4.0 {
            let z: f64 = pi.iter().sum();
            pi.iter_mut().for_each(|x| *x /= z);
            return Ok(pi);
        }
    }
    Err(Error::Discrepancy("power iteration did not converge".into()))
}
