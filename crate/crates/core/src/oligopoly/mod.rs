//! Symmetric Cournot oligopoly on a finite quantity grid.
//!
//! Inverse demand and cost come with closed forms for the built-in families
//! (linear and piecewise-linear demand, power and polynomial cost), plus a
//! `Custom` variant for user closures whose shape assumptions are trusted
//! and spot-checked by sampling.

mod advantage;
mod benchmarks;
mod verify;

pub use advantage::{
    advantage_set, delta, descent_sequences, grid_descent, h_of, l_of, lre_bounds, m_of, AdvantageKind, AdvantageSet,
    DescentSequences, GridDescent, LreBounds,
};
pub use benchmarks::{compute_benchmarks, continuous_best_response, Benchmark, BenchmarkQuantities};
pub use verify::{
    verify_delta_properties, verify_strategic_substitutes, verify_walrasian_advantage, PropertyCheck,
    SubstitutesReport, WalrasianAdvantageReport,
};

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::game::{ties, AbsorbingSet, Anchors, ClosedForm, LreGame, StageGame};

/// Default tolerance for snapping benchmark quantities onto the grid.
pub const SNAP_TOL: f64 = 1e-9;

const SAMPLE_POINTS: usize = 256;
const DIFF_STEP: f64 = 1e-6;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Demand {
    /// `p(Q) = max(intercept - slope * Q, 0)`.
    Linear { intercept: f64, slope: f64 },
    /// Piecewise-linear interpolation through `(Q, p)` points. The first
    /// point sits at `Q = 0` and the last one at the choke quantity, where
    /// the price is zero.
    Table { points: Vec<(f64, f64)> },
    /// Trusted closure with a declared choke quantity; clamped to zero beyond.
    Custom { price: ScalarFn, q_max: f64 },
}

impl fmt::Debug for Demand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Demand::Linear { intercept, slope } => {
                f.debug_struct("Linear").field("intercept", intercept).field("slope", slope).finish()
            }
            Demand::Table { points } => f.debug_struct("Table").field("points", points).finish(),
            Demand::Custom { q_max, .. } => f.debug_struct("Custom").field("q_max", q_max).finish(),
        }
    }
}

impl Demand {
    pub fn q_max(&self) -> f64 {
        match self {
            Demand::Linear { intercept, slope } => {
                if *slope > 0.0 {
                    intercept / slope
                } else {
                    f64::INFINITY
                }
            }
            Demand::Table { points } => points.last().map_or(0.0, |p| p.0),
            Demand::Custom { q_max, .. } => *q_max,
        }
    }

    pub fn price(&self, q: f64) -> f64 {
        match self {
            Demand::Linear { intercept, slope } => (intercept - slope * q).max(0.0),
            Demand::Table { points } => {
                if q <= points[0].0 {
                    return points[0].1;
                }
                for w in points.windows(2) {
                    let ((x0, y0), (x1, y1)) = (w[0], w[1]);
                    if q <= x1 {
                        return y0 + (y1 - y0) * (q - x0) / (x1 - x0);
                    }
                }
                0.0
            }
            Demand::Custom { price, q_max } => {
                if q >= *q_max {
                    0.0
                } else {
                    price(q).max(0.0)
                }
            }
        }
    }

    /// Right derivative of the (clamped) inverse demand.
    pub fn derivative(&self, q: f64) -> f64 {
        if q >= self.q_max() {
            return 0.0;
        }
        match self {
            Demand::Linear { slope, .. } => -slope,
            Demand::Table { points } => {
                for w in points.windows(2) {
                    let ((x0, y0), (x1, y1)) = (w[0], w[1]);
                    if q < x1 {
                        return (y1 - y0) / (x1 - x0);
                    }
                }
                0.0
            }
            Demand::Custom { price, q_max } => {
                let h = DIFF_STEP * 1f64.max(q.abs());
                let hi = (q + h).min(*q_max);
                let lo = (q - h).max(0.0);
                (price(hi) - price(lo)) / (hi - lo)
            }
        }
    }

    fn validate_structure(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidModel(m));
        match self {
            Demand::Linear { intercept, slope } => {
                if !intercept.is_finite() || !slope.is_finite() {
                    return bad("demand parameters must be finite".into());
                }
            }
            Demand::Table { points } => {
                if points.len() < 2 {
                    return bad("demand table needs at least two points".into());
                }
                if points[0].0 != 0.0 {
                    return bad("demand table must start at Q = 0".into());
                }
                if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return bad("demand table quantities must be strictly increasing".into());
                }
                if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
                    return bad("demand table entries must be finite".into());
                }
                if points.last().unwrap().1 != 0.0 {
                    return bad("demand table must end at a zero price".into());
                }
            }
            Demand::Custom { q_max, .. } => {
                if !(q_max.is_finite() && *q_max > 0.0) {
                    return bad("custom demand needs a finite positive q_max".into());
                }
            }
        }
        Ok(())
    }

    /// Strictly decreasing and weakly concave on `[0, Q_max]`, positive at 0.
    fn check_shape(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidModel(m.into()));
        if !(self.price(0.0) > 0.0) {
            return bad("inverse demand must satisfy p(0) > 0");
        }
        let q_max = self.q_max();
        if !q_max.is_finite() {
            return bad("inverse demand must reach zero at a finite Q_max");
        }
        match self {
            Demand::Linear { slope, .. } => {
                if !(*slope > 0.0) {
                    return bad("linear demand slope must be positive (p strictly decreasing)");
                }
            }
            Demand::Table { points } => {
                let slopes: Vec<f64> = points.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
                if slopes.iter().any(|&s| !(s < 0.0)) {
                    return bad("demand table must be strictly decreasing");
                }
                if slopes.windows(2).any(|w| w[1] > w[0] + 1e-12) {
                    return bad("demand table must be weakly concave");
                }
            }
            Demand::Custom { .. } => {
                let xs: Vec<f64> = (0..=SAMPLE_POINTS).map(|k| q_max * k as f64 / SAMPLE_POINTS as f64).collect();
                let ys: Vec<f64> = xs.iter().map(|&x| self.price(x)).collect();
                if ys.windows(2).any(|w| !(w[1] < w[0])) {
                    return bad("custom demand is not strictly decreasing on samples");
                }
                let scale = ys[0].abs().max(1.0);
                if ys.windows(3).any(|w| w[2] - 2.0 * w[1] + w[0] > 1e-9 * scale) {
                    return bad("custom demand is not weakly concave on samples");
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone)]
pub enum Cost {
    /// `c(q) = coeff * q^exponent`.
    Power {
        coeff: f64,
        exponent: f64,
    },
    /// `c(q) = sum_k coeffs[k] * q^k`.
    Polynomial {
        coeffs: Vec<f64>,
    },
    Custom {
        cost: ScalarFn,
    },
}

impl fmt::Debug for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cost::Power { coeff, exponent } => {
                f.debug_struct("Power").field("coeff", coeff).field("exponent", exponent).finish()
            }
            Cost::Polynomial { coeffs } => f.debug_struct("Polynomial").field("coeffs", coeffs).finish(),
            Cost::Custom { .. } => f.write_str("Custom"),
        }
    }
}

impl Cost {
    pub fn value(&self, q: f64) -> f64 {
        match self {
            Cost::Power { coeff, exponent } => coeff * q.powf(*exponent),
            Cost::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, &a| acc * q + a),
            Cost::Custom { cost } => cost(q),
        }
    }

    pub fn derivative(&self, q: f64) -> f64 {
        match self {
            Cost::Power { coeff, exponent } => {
                if *exponent == 1.0 {
                    *coeff
                } else if q == 0.0 {
                    if *exponent > 1.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    coeff * exponent * q.powf(exponent - 1.0)
                }
            }
            Cost::Polynomial { coeffs } => {
                coeffs.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, &a)| acc * q + k as f64 * a)
            }
            Cost::Custom { cost } => {
                let h = DIFF_STEP * 1f64.max(q.abs());
                let lo = (q - h).max(0.0);
                (cost(q + h) - cost(lo)) / (q + h - lo)
            }
        }
    }

    fn validate_structure(&self) -> Result<()> {
        let ok = match self {
            Cost::Power { coeff, exponent } => coeff.is_finite() && exponent.is_finite(),
            Cost::Polynomial { coeffs } => !coeffs.is_empty() && coeffs.iter().all(|c| c.is_finite()),
            Cost::Custom { .. } => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel("cost parameters must be finite".into()))
        }
    }

    /// Strictly increasing and weakly convex on `[0, upto]`.
    fn check_shape(&self, upto: f64) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidModel(m.into()));
        if let Cost::Power { coeff, exponent } = self {
            if !(*coeff > 0.0 && *exponent >= 1.0) {
                return bad("power cost needs coeff > 0 and exponent >= 1");
            }
            return Ok(());
        }
        let xs: Vec<f64> = (0..=SAMPLE_POINTS).map(|k| upto * k as f64 / SAMPLE_POINTS as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| self.value(x)).collect();
        if ys.windows(2).any(|w| !(w[1] > w[0])) {
            return bad("cost is not strictly increasing on samples");
        }
        let scale = ys.last().unwrap().abs().max(1.0);
        if ys.windows(3).any(|w| w[2] - 2.0 * w[1] + w[0] < -1e-9 * scale) {
            return bad("cost is not weakly convex on samples");
        }
        Ok(())
    }
}

/// `Γ = {0, λ, 2λ, …, νλ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantityGrid {
    step: f64,
    top: usize,
}

impl QuantityGrid {
    /// Grid `{0, step, …, top_level · step}`.
    pub fn new(step: f64, top_level: usize) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidModel("grid step must be positive".into()));
        }
        if top_level < 1 {
            return Err(Error::InvalidModel("grid needs at least one step".into()));
        }
        Ok(Self { step, top: top_level })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// ν, the index of the largest grid point.
    pub fn top_level(&self) -> usize {
        self.top
    }

    /// |Γ| = ν + 1.
    pub fn len(&self) -> usize {
        self.top + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn max_value(&self) -> f64 {
        self.value(self.top)
    }

    pub fn value(&self, level: usize) -> f64 {
        level as f64 * self.step
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.value(k))
    }

    /// Level of the grid point within `tol` of `x`, if any.
    pub fn snap(&self, x: f64, tol: f64) -> Option<usize> {
        let k = (x / self.step).round();
        if k < 0.0 || k > self.top as f64 {
            return None;
        }
        let k = k as usize;
        ((self.value(k) - x).abs() <= tol).then_some(k)
    }

    /// Levels whose values lie in `[lo - tol, hi + tol]`.
    pub fn levels_in(&self, lo: f64, hi: f64, tol: f64) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| {
                let v = self.value(k);
                v >= lo - tol && v <= hi + tol
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct OligopolyModel {
    n: usize,
    demand: Demand,
    cost: Cost,
    grid: QuantityGrid,
    benchmarks: Option<BenchmarkQuantities>,
    // p at every achievable aggregate level, c at every grid level.
    price_by_total: Vec<f64>,
    cost_by_level: Vec<f64>,
}

impl OligopolyModel {
    /// Builds a model and checks every standing assumption: shape of demand
    /// and cost, a nontrivial market, and a grid that contains both the Nash
    /// and the Walrasian quantity (within [`SNAP_TOL`]).
    pub fn new(n: usize, demand: Demand, cost: Cost, grid: QuantityGrid) -> Result<Self> {
        Self::with_snap_tolerance(n, demand, cost, grid, SNAP_TOL)
    }

    pub fn with_snap_tolerance(
        n: usize,
        demand: Demand,
        cost: Cost,
        grid: QuantityGrid,
        snap_tol: f64,
    ) -> Result<Self> {
        let mut model = Self::unchecked(n, demand, cost, grid)?;
        model.check_assumptions()?;
        let bench = benchmarks::compute_with_tol(&model, snap_tol)?;
        for (name, b) in [("Nash", &bench.nash), ("Walrasian", &bench.walrasian)] {
            if b.level.is_none() {
                return Err(Error::InvalidModel(format!(
                    "grid with step {} does not contain the {name} quantity {}",
                    grid.step, b.raw
                )));
            }
        }
        model.benchmarks = Some(bench);
        Ok(model)
    }

    /// Builds a model checking only structural validity. Used for negative
    /// controls and for dynamics on grids that miss the benchmarks.
    pub fn unchecked(n: usize, demand: Demand, cost: Cost, grid: QuantityGrid) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidModel("at least two firms required".into()));
        }
        demand.validate_structure()?;
        cost.validate_structure()?;
        let step = grid.step();
        let price_by_total = (0..=n * grid.top_level()).map(|k| demand.price(k as f64 * step)).collect();
        let cost_by_level = grid.values().map(|q| cost.value(q)).collect();
        Ok(Self { n, demand, cost, grid, benchmarks: None, price_by_total, cost_by_level })
    }

    pub fn check_assumptions(&self) -> Result<()> {
        self.demand.check_shape()?;
        let q_max = self.demand.q_max();
        self.cost.check_shape(q_max.max(self.grid.max_value()))?;
        if !(self.cost.derivative(0.0) < self.demand.price(0.0)) {
            return Err(Error::InvalidModel("market is trivial: c'(0) >= p(0)".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn demand(&self) -> &Demand {
        &self.demand
    }

    pub fn cost(&self) -> &Cost {
        &self.cost
    }

    pub fn grid(&self) -> &QuantityGrid {
        &self.grid
    }

    pub fn q_max(&self) -> f64 {
        self.demand.q_max()
    }

    pub fn price(&self, total: f64) -> f64 {
        self.demand.price(total)
    }

    /// Benchmarks computed at construction; for unchecked models they are
    /// computed on the fly and may fail.
    pub fn benchmarks(&self) -> Result<BenchmarkQuantities> {
        match &self.benchmarks {
            Some(b) => Ok(b.clone()),
            None => compute_benchmarks(self),
        }
    }

    pub fn is_validated(&self) -> bool {
        self.benchmarks.is_some()
    }

    /// `π(q, Q) = p(Q) q − c(q)`.
    pub fn profit(&self, q: f64, total: f64) -> Result<f64> {
        if q < 0.0 {
            return Err(Error::Domain(format!("negative quantity {q}")));
        }
        if total < q - 1e-12 * 1f64.max(q) {
            return Err(Error::Domain(format!("aggregate {total} below own quantity {q}")));
        }
        Ok(self.demand.price(total) * q - self.cost.value(q))
    }

    fn grid_profit(&self, level: usize, total_level: usize) -> f64 {
        self.price_by_total[total_level] * self.grid.value(level) - self.cost_by_level[level]
    }

    /// Every grid maximizer of `q ↦ π(q, q + Q_{-i})`, ascending.
    pub fn best_response(&self, q_minus: f64) -> Vec<usize> {
        let profits: Vec<f64> = (0..self.grid.len())
            .map(|k| {
                let q = self.grid.value(k);
                self.demand.price(q + q_minus) * q - self.cost_by_level[k]
            })
            .collect();
        crate::game::argmax_set(&profits)
    }
}

impl StageGame for OligopolyModel {
    fn players(&self) -> usize {
        self.n
    }

    fn levels(&self) -> usize {
        self.grid.len()
    }

    fn level_value(&self, level: usize) -> f64 {
        self.grid.value(level)
    }

    fn payoffs(&self, profile: &[usize], out: &mut [f64]) {
        let total: usize = profile.iter().sum();
        for (o, &k) in out.iter_mut().zip(profile) {
            *o = self.grid_profit(k, total);
        }
    }

    fn best_responses(&self, player: usize, profile: &[usize], out: &mut Vec<usize>) {
        out.clear();
        let others: usize = profile.iter().sum::<usize>() - profile[player];
        let mut best = f64::NEG_INFINITY;
        for k in 0..self.grid.len() {
            let v = self.grid_profit(k, k + others);
            if v > best && !ties(v, best) {
                best = v;
                out.clear();
                out.push(k);
            } else if ties(v, best) {
                best = best.max(v);
                out.push(k);
            }
        }
        // A later strict improvement may have left stale near-ties behind only
        // when it was itself within tolerance, so re-filter against the max.
        out.retain(|&k| ties(self.grid_profit(k, k + others), best));
    }

    fn relative_advantage(&self, from: usize, to: usize) -> f64 {
        let total = to + (self.n - 1) * from;
        self.grid_profit(to, total) - self.grid_profit(from, total)
    }
}

impl LreGame for OligopolyModel {
    fn anchors(&self) -> Result<Anchors> {
        let b = self.benchmarks()?;
        match (b.nash.level, b.walrasian.level) {
            (Some(nash), Some(imitation)) => Ok(Anchors { nash, imitation }),
            _ => Err(Error::InvalidModel("grid does not contain the Nash and Walrasian quantities".into())),
        }
    }

    /// Exact for `η > 1`; for `η = 1` the interval `[q̲, q̄]` of imitation states when the
    /// bounds can be established on this grid.
    fn closed_form(&self, eta: f64) -> ClosedForm {
        let anchors = match self.anchors() {
            Ok(a) => a,
            Err(e) => return ClosedForm::NotApplicable(e.to_string()),
        };
        if eta > 1.0 {
            return ClosedForm::Exact(vec![
                AbsorbingSet::imitation(anchors.imitation),
                AbsorbingSet::best_response(anchors.nash),
            ]);
        }
        match lre_bounds(self) {
            Ok(bounds) => {
                let mut set: Vec<AbsorbingSet> = bounds.grid_levels().map(AbsorbingSet::imitation).collect();
                set.push(AbsorbingSet::best_response(anchors.nash));
                ClosedForm::Exact(set)
            }
            Err(e) => ClosedForm::NotApplicable(e.to_string()),
        }
    }

    fn bounds(&self) -> Option<(f64, f64)> {
        lre_bounds(self).ok().map(|b| (b.lower, b.upper))
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn profit_examples() {
        let m = four_firm();
        assert_eq!(m.profit(15.0, 60.0).unwrap(), 337.5);
        assert_eq!(m.profit(18.0, 72.0).unwrap(), 162.0);
        assert_eq!(m.profit(0.0, 123.0).unwrap(), 0.0);
        assert!(matches!(m.profit(-1.0, 3.0), Err(Error::Domain(_))));
        assert!(matches!(m.profit(5.0, 3.0), Err(Error::Domain(_))));
    }

    #[test]
    fn best_response_examples() {
        let m = four_firm();
        assert_eq!(m.best_response(45.0), vec![15]);
        assert_eq!(m.best_response(0.0), vec![30]);
        assert_eq!(m.best_response(54.0), vec![12]);
        assert_eq!(m.best_response(90.0), vec![0]);
        assert_eq!(m.best_response(200.0), vec![0]);
    }

    #[test]
    fn best_response_ties_have_two_members() {
        // (90 - 46.5 - 0)/3 → maximizer 14.5 → grid neighbours 14 and 15 tie.
        let m = four_firm();
        let br = m.best_response(46.5);
        assert_eq!(br, vec![14, 15]);
        let p = |q: f64| m.profit(q, q + 46.5).unwrap();
        assert!((p(14.0) - p(15.0)).abs() <= 1e-12);
    }

    #[test]
    fn stage_best_responses_match_model_best_response() {
        let m = four_firm();
        let mut out = Vec::new();
        for others in [[0, 0, 0], [18, 18, 18], [15, 16, 14], [40, 40, 40], [3, 60, 2]] {
            let profile = [7, others[0], others[1], others[2]];
            m.best_responses(0, &profile, &mut out);
            let q_minus: usize = others.iter().sum();
            assert_eq!(out, m.best_response(q_minus as f64));
        }
    }

    #[test]
    fn grid_snapping() {
        let g = QuantityGrid::new(2.5, 36).unwrap();
        assert_eq!(g.snap(22.5, 1e-9), Some(9));
        assert_eq!(g.snap(22.5 + 1e-10, 1e-9), Some(9));
        assert_eq!(g.snap(23.0, 1e-9), None);
        assert_eq!(g.snap(-2.5, 1e-9), None);
        assert_eq!(g.len(), 37);
        assert!(QuantityGrid::new(0.0, 3).is_err());
        assert!(QuantityGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn constructor_rejects_grid_missing_benchmarks() {
        let r = OligopolyModel::new(
            2,
            Demand::Linear { intercept: 90.0, slope: 1.0 },
            Cost::Power { coeff: 0.5, exponent: 2.0 },
            QuantityGrid::new(1.0, 90).unwrap(),
        );
        assert!(matches!(r, Err(Error::InvalidModel(m)) if m.contains("Nash")));
    }

    #[test]
    fn constructor_rejects_bad_shapes() {
        let grid = QuantityGrid::new(1.0, 90).unwrap();
        let cost = Cost::Power { coeff: 0.5, exponent: 2.0 };
        let increasing = Demand::Linear { intercept: 10.0, slope: -1.0 };
        assert!(OligopolyModel::new(4, increasing.clone(), cost.clone(), grid).is_err());
        assert!(OligopolyModel::unchecked(4, increasing, cost.clone(), grid).is_ok());
        assert!(OligopolyModel::unchecked(1, Demand::Linear { intercept: 1.0, slope: 1.0 }, cost, grid).is_err());
    }

    #[test]
    fn table_demand_matches_linear() {
        let table = Demand::Table { points: vec![(0.0, 90.0), (45.0, 45.0), (90.0, 0.0)] };
        let linear = Demand::Linear { intercept: 90.0, slope: 1.0 };
        for q in [0.0, 10.0, 44.9, 45.0, 70.0, 90.0, 120.0] {
            assert!((table.price(q) - linear.price(q)).abs() < 1e-12);
            assert!((table.derivative(q) - linear.derivative(q)).abs() < 1e-12);
        }
        let m = OligopolyModel::new(
            4,
            table,
            Cost::Polynomial { coeffs: vec![0.0, 0.0, 0.5] },
            QuantityGrid::new(1.0, 90).unwrap(),
        )
        .unwrap();
        let b = m.benchmarks().unwrap();
        assert_eq!((b.nash.level, b.walrasian.level), (Some(15), Some(18)));
    }

    #[test]
    fn custom_closures_are_spot_checked() {
        let grid = QuantityGrid::new(1.0, 90).unwrap();
        let demand = Demand::Custom { price: Arc::new(|q| 90.0 - q), q_max: 90.0 };
        let cost = Cost::Custom { cost: Arc::new(|q| 0.5 * q * q) };
        let m = OligopolyModel::new(4, demand, cost.clone(), grid).unwrap();
        let b = m.benchmarks().unwrap();
        assert_eq!(b.nash.level, Some(15));
        let convex_demand = Demand::Custom { price: Arc::new(|q| (90.0 - q).powi(2) / 90.0), q_max: 90.0 };
        assert!(OligopolyModel::new(4, convex_demand, cost, grid).is_err());
    }
}
