//! Symmetric aggregative games: payoffs depend on the own strategy and a
//! symmetric, monotone aggregate of the whole profile. The Cournot model is
//! the special case with the sum aggregator and `π̃(q, Q) = p(Q)q − c(q)`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{argmax_set, ties, AbsorbingSet, Anchors, ClosedForm, LreGame, StageGame};
use crate::oligopoly::{Cost, Demand, OligopolyModel};

/// Largest number of distinct aggregates or table profiles handled.
pub const AGGREGATE_CAP: usize = 1_000_000;
const MAX_BR_ROUNDS: usize = 10_000;
const VALUE_TOL: f64 = 1e-9;

pub type KernelFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Aggregator {
    Sum,
    Mean,
    /// Value for every multiset of strategy indices, keyed in ascending order.
    Table(BTreeMap<Vec<usize>, f64>),
}

impl fmt::Debug for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Aggregator::Sum => f.write_str("Sum"),
            Aggregator::Mean => f.write_str("Mean"),
            Aggregator::Table(t) => write!(f, "Table({} entries)", t.len()),
        }
    }
}

#[derive(Clone)]
pub enum PayoffKernel {
    Cournot {
        demand: Demand,
        cost: Cost,
    },
    /// `rows[s][j]` is the payoff of strategy `s` at `aggregates[j]`.
    Table {
        aggregates: Vec<f64>,
        rows: Vec<Vec<f64>>,
    },
    Custom(KernelFn),
}

impl fmt::Debug for PayoffKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PayoffKernel::Cournot { demand, cost } => {
                f.debug_struct("Cournot").field("demand", demand).field("cost", cost).finish()
            }
            PayoffKernel::Table { aggregates, .. } => write!(f, "Table({} aggregates)", aggregates.len()),
            PayoffKernel::Custom(_) => f.write_str("Custom"),
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= VALUE_TOL * 1f64.max(a.abs()).max(b.abs())
}

/// Sorted values with near-duplicates merged.
fn dedup_sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|b, a| close(*a, *b));
    v
}

fn find_value(sorted: &[f64], x: f64) -> Option<usize> {
    let i = sorted.partition_point(|&v| v < x);
    [i.checked_sub(1), Some(i)].into_iter().flatten().find(|&j| j < sorted.len() && close(sorted[j], x))
}

/// Number of multisets of size `n` from `s` kinds, saturating above the cap.
fn multiset_count(s: usize, n: usize) -> usize {
    let mut c: u128 = 1;
    for k in 0..n as u128 {
        c = c * (s as u128 + k) / (k + 1);
        if c > AGGREGATE_CAP as u128 {
            return usize::MAX;
        }
    }
    c as usize
}

/// Every ascending index multiset of size `n` over `0..s`, the key set of a
/// table aggregator.
pub fn multisets(s: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; n];
    loop {
        out.push(cur.clone());
        let Some(i) = (0..n).rev().find(|&i| cur[i] + 1 < s) else {
            return out;
        };
        let v = cur[i] + 1;
        for c in &mut cur[i..] {
            *c = v;
        }
    }
}

#[derive(Debug, Clone)]
pub struct AggregativeGame {
    n: usize,
    strategies: Vec<f64>,
    aggregator: Aggregator,
    kernel: PayoffKernel,
    reachable: Vec<f64>,
    nash: OnceLock<Result<usize>>,
}

impl AggregativeGame {
    pub fn new(n: usize, strategies: Vec<f64>, aggregator: Aggregator, kernel: PayoffKernel) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGame("at least two agents are required".into()));
        }
        if strategies.is_empty() || strategies.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidGame("strategy set must be non-empty and finite".into()));
        }
        if strategies.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGame("strategies must be strictly increasing".into()));
        }
        if let Aggregator::Table(table) = &aggregator {
            check_table_aggregator(table, strategies.len(), n)?;
        }
        let mut game = Self { n, strategies, aggregator, kernel, reachable: Vec::new(), nash: OnceLock::new() };
        game.reachable = game.compute_reachable()?;
        if let PayoffKernel::Table { aggregates, rows } = &game.kernel {
            if rows.len() != game.strategies.len() || rows.iter().any(|r| r.len() != aggregates.len()) {
                return Err(Error::InvalidGame(
                    "payoff table must have one row per strategy and one column per aggregate".into(),
                ));
            }
            let sorted = dedup_sorted(aggregates.clone());
            if sorted.len() != aggregates.len() || aggregates.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidGame("payoff table aggregates must be strictly increasing".into()));
            }
            if let Some(t) = game.reachable.iter().find(|&&t| find_value(aggregates, t).is_none()) {
                return Err(Error::InvalidGame(format!("payoff table has no column for reachable aggregate {t}")));
            }
        }
        Ok(game)
    }

    /// The Cournot model as an aggregative game over its quantity grid.
    pub fn cournot(model: &OligopolyModel) -> Result<Self> {
        Self::new(
            model.n(),
            model.grid().values().collect(),
            Aggregator::Sum,
            PayoffKernel::Cournot { demand: model.demand().clone(), cost: model.cost().clone() },
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn strategies(&self) -> &[f64] {
        &self.strategies
    }

    pub fn aggregator(&self) -> &Aggregator {
        &self.aggregator
    }

    /// Every value the aggregator attains on `S^n`, ascending.
    pub fn reachable_aggregates(&self) -> &[f64] {
        &self.reachable
    }

    fn compute_reachable(&self) -> Result<Vec<f64>> {
        let too_large = Error::StateSpaceTooLarge { cap: AGGREGATE_CAP };
        match &self.aggregator {
            Aggregator::Table(t) => Ok(dedup_sorted(t.values().copied().collect())),
            Aggregator::Sum | Aggregator::Mean => {
                let mut sums = vec![0.0];
                for _ in 0..self.n {
                    let next: Vec<f64> =
                        sums.iter().flat_map(|&r| self.strategies.iter().map(move |&s| r + s)).collect();
                    sums = dedup_sorted(next);
                    if sums.len() > AGGREGATE_CAP {
                        return Err(too_large);
                    }
                }
                if matches!(self.aggregator, Aggregator::Mean) {
                    let n = self.n as f64;
                    sums.iter_mut().for_each(|x| *x /= n);
                }
                Ok(sums)
            }
        }
    }

    /// `g` at a profile of strategy indices.
    pub fn aggregate(&self, profile: &[usize]) -> f64 {
        match &self.aggregator {
            Aggregator::Sum => profile.iter().map(|&k| self.strategies[k]).sum(),
            Aggregator::Mean => profile.iter().map(|&k| self.strategies[k]).sum::<f64>() / profile.len() as f64,
            Aggregator::Table(t) => {
                let mut key = profile.to_vec();
                key.sort_unstable();
                t[&key]
            }
        }
    }

    /// `π̃(s, t)` for strategy index `s`.
    pub fn kernel(&self, s: usize, t: f64) -> f64 {
        let x = self.strategies[s];
        match &self.kernel {
            PayoffKernel::Cournot { demand, cost } => demand.price(t) * x - cost.value(x),
            PayoffKernel::Table { aggregates, rows } => {
                let j = find_value(aggregates, t).unwrap_or_else(|| panic!("aggregate {t} is not a table column"));
                rows[s][j]
            }
            PayoffKernel::Custom(f) => f(x, t),
        }
    }

    fn symmetric_aggregate(&self, s: usize) -> f64 {
        self.aggregate(&vec![s; self.n])
    }

    fn mixed_aggregate(&self, deviation: usize, deviators: usize, rest: usize) -> f64 {
        let mut profile = vec![rest; self.n];
        profile[..deviators].fill(deviation);
        self.aggregate(&profile)
    }

    /// The symmetric Nash strategy, from round-robin best-response iteration
    /// started at every symmetric profile. All runs must settle on the same
    /// symmetric profile.
    pub fn nash_strategy(&self) -> Result<usize> {
        self.nash.get_or_init(|| self.search_nash()).clone()
    }

    fn search_nash(&self) -> Result<usize> {
        let ends = (0..self.strategies.len())
            .into_par_iter()
            .map(|s| self.iterate_best_response(vec![s; self.n]))
            .collect::<Result<Vec<_>>>()?;
        let first = &ends[0];
        if ends.iter().any(|e| e != first) || first.iter().any(|&k| k != first[0]) {
            let mut distinct: Vec<usize> = ends.iter().flatten().copied().collect();
            distinct.sort_unstable();
            distinct.dedup();
            return Err(Error::NashNotUnique(distinct));
        }
        Ok(first[0])
    }

    fn iterate_best_response(&self, mut profile: Vec<usize>) -> Result<Vec<usize>> {
        let mut br = Vec::new();
        for _ in 0..MAX_BR_ROUNDS {
            let mut changed = false;
            for i in 0..self.n {
                self.best_responses(i, &profile, &mut br);
                if !br.contains(&profile[i]) {
                    profile[i] = br[0];
                    changed = true;
                }
            }
            if !changed {
                return Ok(profile);
            }
        }
        Err(Error::NonTermination(MAX_BR_ROUNDS))
    }
}

fn check_table_aggregator(table: &BTreeMap<Vec<usize>, f64>, s: usize, n: usize) -> Result<()> {
    let expected = multiset_count(s, n);
    if expected == usize::MAX {
        return Err(Error::StateSpaceTooLarge { cap: AGGREGATE_CAP });
    }
    for (key, v) in table {
        if key.len() != n || key.windows(2).any(|w| w[0] > w[1]) || key.iter().any(|&k| k >= s) {
            return Err(Error::InvalidGame(format!(
                "aggregator table key {key:?} is not a sorted profile of {n} strategies"
            )));
        }
        if !v.is_finite() {
            return Err(Error::InvalidGame(format!("aggregator value at {key:?} is not finite")));
        }
    }
    if table.len() != expected {
        return Err(Error::InvalidGame(format!(
            "aggregator table has {} entries, a symmetric {n}-agent aggregator needs {expected}",
            table.len()
        )));
    }
    // Raising one coordinate to the next strategy never lowers the aggregate.
    for (key, &v) in table {
        for i in 0..n {
            if key[i] + 1 < s && (i + 1 == n || key[i + 1] > key[i]) {
                let mut up = key.clone();
                up[i] += 1;
                let w = table[&up];
                if w < v && !close(w, v) {
                    return Err(Error::InvalidGame(format!("aggregator decreases from {key:?} to {up:?}")));
                }
            }
        }
    }
    Ok(())
}

impl StageGame for AggregativeGame {
    fn players(&self) -> usize {
        self.n
    }

    fn levels(&self) -> usize {
        self.strategies.len()
    }

    fn level_value(&self, level: usize) -> f64 {
        self.strategies[level]
    }

    fn payoffs(&self, profile: &[usize], out: &mut [f64]) {
        let t = self.aggregate(profile);
        for (o, &k) in out.iter_mut().zip(profile) {
            *o = self.kernel(k, t);
        }
    }

    fn best_responses(&self, player: usize, profile: &[usize], out: &mut Vec<usize>) {
        let mut p = profile.to_vec();
        let values: Vec<f64> = (0..self.strategies.len())
            .map(|k| {
                p[player] = k;
                self.kernel(k, self.aggregate(&p))
            })
            .collect();
        *out = argmax_set(&values);
    }
}

impl LreGame for AggregativeGame {
    fn anchors(&self) -> Result<Anchors> {
        let nash = self.nash_strategy()?;
        let ats = compute_ats(self)?;
        Ok(Anchors { nash, imitation: ats.strategy })
    }

    fn closed_form(&self, eta: f64) -> ClosedForm {
        let anchors = match self.anchors() {
            Ok(a) => a,
            Err(e) => return ClosedForm::NotApplicable(e.to_string()),
        };
        if anchors.nash == anchors.imitation {
            return ClosedForm::NotApplicable("the Nash strategy coincides with the aggregate-taking strategy".into());
        }
        if !verify_quasi_submodularity(self).passed {
            return ClosedForm::NotApplicable("the game is not strictly quasi-submodular".into());
        }
        let nash_br = AbsorbingSet::best_response(anchors.nash);
        let ats_im = AbsorbingSet::imitation(anchors.imitation);
        if eta > 1.0 {
            ClosedForm::Exact(vec![nash_br, ats_im])
        } else {
            ClosedForm::Superset(vec![nash_br, AbsorbingSet::imitation(anchors.nash), ats_im])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasiSubmodularityReport {
    pub passed: bool,
    pub strategy_pairs: usize,
    pub aggregates: usize,
    pub counterexample: Option<QsmCounterexample>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QsmCounterexample {
    /// `[s1, s2]` with `s1 < s2`.
    pub strategies: [f64; 2],
    /// `[t1, t2]` with `t1 < t2`.
    pub aggregates: [f64; 2],
    /// Which implication fails: `lower_implies_lower` is
    /// `π̃(s2,t1) ≤ π̃(s1,t1) ⇒ π̃(s2,t2) < π̃(s1,t2)`, `upper_implies_upper`
    /// is `π̃(s2,t2) ≥ π̃(s1,t2) ⇒ π̃(s2,t1) > π̃(s1,t1)`.
    pub implication: &'static str,
}

/// Exhaustive check of both single-crossing implications over every strategy
/// pair and every pair of reachable aggregates. With `d(t) = π̃(s2,t) − π̃(s1,t)`
/// each implication fails exactly when some `d(t1) ≤ 0` precedes a
/// `d(t2) ≥ 0`, so one scan per strategy pair finds the first violation.
pub fn verify_quasi_submodularity(game: &AggregativeGame) -> QuasiSubmodularityReport {
    let s = game.strategies.len();
    let t = &game.reachable;
    let first = (0..s).into_par_iter().find_map_first(|s1| {
        (s1 + 1..s).find_map(|s2| {
            let mut bad: Option<usize> = None;
            for (j, &tj) in t.iter().enumerate() {
                let (a, b) = (game.kernel(s2, tj), game.kernel(s1, tj));
                let nonneg = a > b || ties(a, b);
                let nonpos = a < b || ties(a, b);
                if nonneg {
                    if let Some(i) = bad {
                        // Report the implication violated in its own terms: a
                        // tie at t2 breaks the first, a tie at t1 the second.
                        let implication = if nonpos { "lower_implies_lower" } else { "upper_implies_upper" };
                        return Some(QsmCounterexample {
                            strategies: [game.strategies[s1], game.strategies[s2]],
                            aggregates: [t[i], tj],
                            implication,
                        });
                    }
                }
                if nonpos && bad.is_none() {
                    bad = Some(j);
                }
            }
            None
        })
    });
    QuasiSubmodularityReport {
        passed: first.is_none(),
        strategy_pairs: s * (s - 1) / 2,
        aggregates: t.len(),
        counterexample: first,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtsMargin {
    pub deviation: f64,
    pub deviators: usize,
    /// `π̃(s*, t) − π̃(s′, t)` at the mixed profile's aggregate `t`.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtsAdvantageReport {
    pub passed: bool,
    pub min_margin: f64,
    pub margins: Vec<AtsMargin>,
}

/// With `m` agents at `s′ ≠ s*` and the rest at `s*`, the `s*` agents earn
/// strictly more, for every `s′` and `1 ≤ m < n`.
pub fn verify_ats_advantage(game: &AggregativeGame, ats: usize) -> AtsAdvantageReport {
    let mut margins = Vec::new();
    for dev in (0..game.strategies.len()).filter(|&k| k != ats) {
        for m in 1..game.n {
            let t = game.mixed_aggregate(dev, m, ats);
            margins.push(AtsMargin {
                deviation: game.strategies[dev],
                deviators: m,
                margin: game.kernel(ats, t) - game.kernel(dev, t),
            });
        }
    }
    let min_margin = margins.iter().map(|m| m.margin).fold(f64::INFINITY, f64::min);
    AtsAdvantageReport { passed: margins.iter().all(|m| m.margin > 0.0 && !ties(m.margin, 0.0)), min_margin, margins }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtsResult {
    pub strategy: usize,
    pub value: f64,
    /// Every strategy satisfying the fixed-point condition.
    pub candidates: Vec<usize>,
    pub is_unique: bool,
    pub quasi_submodular: bool,
    pub relative_advantage: AtsAdvantageReport,
}

/// Scans `S` for strategies that are best replies to the aggregate they
/// generate when everyone plays them.
pub fn compute_ats(game: &AggregativeGame) -> Result<AtsResult> {
    let levels = game.strategies.len();
    let is_ats = |s: usize| {
        let t = game.symmetric_aggregate(s);
        let values: Vec<f64> = (0..levels).map(|k| game.kernel(k, t)).collect();
        argmax_set(&values).contains(&s)
    };
    let candidates: Vec<usize> = (0..levels).filter(|&s| is_ats(s)).collect();
    let Some(&strategy) = candidates.first() else {
        return Err(Error::NoAts);
    };
    let qsm = verify_quasi_submodularity(game);
    if qsm.passed && candidates.len() > 1 {
        return Err(Error::Discrepancy(format!(
            "strictly quasi-submodular game with several aggregate-taking strategies {candidates:?}"
        )));
    }
    debug_assert!(is_ats(strategy));
    Ok(AtsResult {
        strategy,
        value: game.strategies[strategy],
        is_unique: candidates.len() == 1,
        candidates,
        quasi_submodular: qsm.passed,
        relative_advantage: verify_ats_advantage(game, strategy),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lre::compute_lre;
    use crate::oligopoly::fixtures::{duopoly, four_firm};
    use proptest::prelude::*;

    fn commons() -> AggregativeGame {
        AggregativeGame::new(
            2,
            vec![0.0, 0.25, 0.5],
            Aggregator::Sum,
            PayoffKernel::Custom(Arc::new(|s, t| s * (1.0 - t).max(0.0))),
        )
        .unwrap()
    }

    #[test]
    fn reachable_sums() {
        let g = AggregativeGame::cournot(&four_firm()).unwrap();
        assert_eq!(g.reachable_aggregates().len(), 361);
        assert_eq!(g.reachable_aggregates()[360], 360.0);
        assert_eq!(commons().reachable_aggregates(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn multiset_enumeration() {
        let all = multisets(4, 3);
        assert_eq!(all.len(), multiset_count(4, 3));
        assert_eq!(all.len(), 20);
        assert!(all.iter().all(|m| m.windows(2).all(|w| w[0] <= w[1])));
        assert_eq!(multiset_count(94, 4), usize::MAX);
    }

    #[test]
    fn cournot_embedding() {
        let m = four_firm();
        let g = AggregativeGame::cournot(&m).unwrap();
        let r = verify_quasi_submodularity(&g);
        assert!(r.passed, "{:?}", r.counterexample);
        let ats = compute_ats(&g).unwrap();
        assert_eq!(ats.value, 18.0);
        assert_eq!(ats.value, m.benchmarks().unwrap().walrasian.value);
        assert!(ats.is_unique && ats.quasi_submodular);
        assert!(ats.relative_advantage.passed);
        assert_eq!(ats.relative_advantage.margins.len(), 90 * 3);
        assert_eq!(g.nash_strategy().unwrap(), 15);
        // Payoffs agree with the model's own tables.
        let (mut a, mut b) = (vec![0.0; 4], vec![0.0; 4]);
        for profile in [[15, 18, 0, 90], [30, 30, 30, 30], [1, 2, 3, 4]] {
            g.payoffs(&profile, &mut a);
            m.payoffs(&profile, &mut b);
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-9));
        }
    }

    #[test]
    fn four_firm_ats_margin_at_15() {
        let g = AggregativeGame::cournot(&four_firm()).unwrap();
        let r = verify_ats_advantage(&g, 18);
        let m = r.margins.iter().find(|m| m.deviation == 15.0 && m.deviators == 1).unwrap();
        // Aggregate 69, price 21: 21·18 − 162 versus 21·15 − 112.5.
        assert!((m.margin - (216.0 - 202.5)).abs() < 1e-9);
    }

    #[test]
    fn constant_kernel_fails() {
        let g = AggregativeGame::new(3, vec![0.0, 1.0], Aggregator::Sum, PayoffKernel::Custom(Arc::new(|_, _| 1.0)))
            .unwrap();
        let r = verify_quasi_submodularity(&g);
        assert!(!r.passed);
        assert_eq!(r.counterexample.unwrap().strategies, [0.0, 1.0]);
    }

    #[test]
    fn commons_by_exhaustion() {
        let g = commons();
        let r = verify_quasi_submodularity(&g);
        // Oracle: enumerate both implications literally.
        let k = |s: f64, t: f64| s * (1.0 - t).max(0.0);
        let (s, t) = ([0.0, 0.25, 0.5], [0.0, 0.25, 0.5, 0.75, 1.0]);
        let mut holds = true;
        for i in 0..3 {
            for j in i + 1..3 {
                for a in 0..5 {
                    for b in a + 1..5 {
                        let (lo, hi) = (k(s[j], t[a]) - k(s[i], t[a]), k(s[j], t[b]) - k(s[i], t[b]));
                        if (lo <= 0.0 && !(hi < 0.0)) || (hi >= 0.0 && !(lo > 0.0)) {
                            holds = false;
                        }
                    }
                }
            }
        }
        assert_eq!(r.passed, holds);
    }

    #[test]
    fn singleton_strategy_set() {
        let g =
            AggregativeGame::new(2, vec![3.0], Aggregator::Mean, PayoffKernel::Custom(Arc::new(|s, t| s - t))).unwrap();
        let ats = compute_ats(&g).unwrap();
        assert_eq!(ats.strategy, 0);
        assert!(ats.is_unique);
    }

    #[test]
    fn table_forms_match_cournot() {
        let m = duopoly();
        let direct = AggregativeGame::cournot(&m).unwrap();
        let s = direct.strategies().len();
        let table: BTreeMap<Vec<usize>, f64> =
            multisets(s, 2).into_iter().map(|k| (k.clone(), direct.aggregate(&k))).collect();
        let aggregates = direct.reachable_aggregates().to_vec();
        let rows = (0..s).map(|k| aggregates.iter().map(|&t| direct.kernel(k, t)).collect()).collect();
        let tabled = AggregativeGame::new(
            2,
            direct.strategies().to_vec(),
            Aggregator::Table(table),
            PayoffKernel::Table { aggregates, rows },
        )
        .unwrap();
        assert_eq!(compute_ats(&tabled).unwrap().strategy, compute_ats(&direct).unwrap().strategy);
        assert_eq!(tabled.nash_strategy().unwrap(), direct.nash_strategy().unwrap());
        assert_eq!(verify_quasi_submodularity(&tabled).passed, verify_quasi_submodularity(&direct).passed);
    }

    #[test]
    fn table_validation() {
        let mut table: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        table.insert(vec![0, 0], 0.0);
        table.insert(vec![0, 1], 2.0);
        let kernel = || PayoffKernel::Custom(Arc::new(|s, _| s));
        assert!(AggregativeGame::new(2, vec![0.0, 1.0], Aggregator::Table(table.clone()), kernel()).is_err());
        table.insert(vec![1, 1], 1.0);
        let err = AggregativeGame::new(2, vec![0.0, 1.0], Aggregator::Table(table.clone()), kernel()).unwrap_err();
        assert!(err.to_string().contains("decreases"));
        table.insert(vec![1, 1], 3.0);
        assert!(AggregativeGame::new(2, vec![0.0, 1.0], Aggregator::Table(table), kernel()).is_ok());
        let missing = PayoffKernel::Table { aggregates: vec![0.0, 1.0], rows: vec![vec![0.0, 0.0]; 2] };
        assert!(AggregativeGame::new(2, vec![0.0, 1.0], Aggregator::Sum, missing).is_err());
        assert!(AggregativeGame::new(2, vec![1.0, 0.0], Aggregator::Sum, kernel()).is_err());
    }

    #[test]
    fn lre_on_embedding() {
        let g = AggregativeGame::cournot(&four_firm()).unwrap();
        let r = compute_lre(&g, 2.0).unwrap();
        let mut set = r.lre_set.clone();
        set.sort();
        assert_eq!(set, vec![AbsorbingSet::best_response(15), AbsorbingSet::imitation(18)]);
        let r1 = compute_lre(&g, 1.0).unwrap();
        assert_eq!(r1.lre_set.len(), 62);
        assert!(r1.beyond_guaranteed.iter().all(|x| x.rule == crate::BehavioralRule::Imitation));
        assert_eq!(r1.beyond_guaranteed.len(), 59);
    }

    proptest! {
        #[test]
        fn aggregator_symmetric(profile in proptest::collection::vec(0usize..10, 4), shift in 0usize..4) {
            let g = AggregativeGame::cournot(&duopoly()).unwrap();
            let g4 = AggregativeGame::new(4, g.strategies().to_vec(), Aggregator::Mean, PayoffKernel::Custom(Arc::new(|s, t| s - t))).unwrap();
            let mut rotated = profile.clone();
            rotated.rotate_left(shift);
            prop_assert!((g4.aggregate(&profile) - g4.aggregate(&rotated)).abs() < 1e-12);
            let mut up = profile.clone();
            up[shift] = (up[shift] + 1).min(g4.levels() - 1);
            prop_assert!(g4.aggregate(&up) >= g4.aggregate(&profile));
        }
    }
}
