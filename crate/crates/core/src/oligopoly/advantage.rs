//! Relative-payoff machinery: Δ, the advantage set D(q), its boundary roots
//! h and ℓ, the interior point m, and the descent sequences used for the
//! long-run-equilibrium bounds.

use serde::Serialize;

use super::OligopolyModel;
use crate::error::{Error, Result};
use crate::game::ties;
use crate::numeric::bisect;

/// Tolerance for comparing a quantity against q^W or zero.
const SIDE_TOL: f64 = 1e-9;
const DESCENT_CAP: usize = 10_000;

/// `Δ(q, q′) = p(q′ + (n−1)q)(q′ − q) + c(q) − c(q′)`: the profit advantage
/// of one firm at `q′` over the `n − 1` others at `q`.
pub fn delta(model: &OligopolyModel, q: f64, q_prime: f64) -> f64 {
    let total = q_prime + (model.n() - 1) as f64 * q;
    let c = model.cost();
    model.price(total) * (q_prime - q) + c.value(q) - c.value(q_prime)
}

/// `Δ(q, q′) ≥ 0` where equality is judged up to the payoff tie tolerance,
/// the same test imitation uses to decide that the deviator is among the best.
pub(crate) fn weakly_advantaged(model: &OligopolyModel, q: f64, q_prime: f64) -> bool {
    let total = q_prime + (model.n() - 1) as f64 * q;
    let p = model.price(total);
    let c = model.cost();
    let dev = p * q_prime - c.value(q_prime);
    let inc = p * q - c.value(q);
    dev > inc || ties(dev, inc)
}

fn walrasian(model: &OligopolyModel) -> Result<f64> {
    Ok(model.benchmarks()?.walrasian.value)
}

/// Upper root of `Δ(q, ·)` for `q < q^W`.
pub fn h_of(model: &OligopolyModel, q: f64) -> Result<f64> {
    let qw = walrasian(model)?;
    if !(q >= 0.0 && q < qw - SIDE_TOL) {
        return Err(Error::Domain(format!("h is defined on [0, q^W) = [0, {qw}); got {q}")));
    }
    let hi = model.q_max() - (model.n() - 1) as f64 * q;
    bisect(|x| delta(model, q, x), qw, hi, "h(q)")
}

/// Lower boundary of `D(q)` for `q > q^W`; zero when `Δ(q, 0) ≥ 0`.
pub fn l_of(model: &OligopolyModel, q: f64) -> Result<f64> {
    let qw = walrasian(model)?;
    if !(q > qw + SIDE_TOL) {
        return Err(Error::Domain(format!("ℓ is defined for q > q^W = {qw}; got {q}")));
    }
    if lower_deviations_free(model, q) || delta(model, q, 0.0) >= 0.0 {
        return Ok(0.0);
    }
    let m = m_of(model, q)?;
    let hi = if delta(model, q, m) > 0.0 { m } else { qw };
    bisect(|x| delta(model, q, x), 0.0, hi, "ℓ(q)")
}

/// `p((n−1)q) − c′(0) ≤ 0`: every lower deviation is weakly advantageous.
fn lower_deviations_free(model: &OligopolyModel, q: f64) -> bool {
    model.price((model.n() - 1) as f64 * q) - model.cost().derivative(0.0) <= 0.0
}

/// Solution of `p(q′ + (n−1)q) = c′(q′)` on `[0, q]` for `q > q^W`.
pub fn m_of(model: &OligopolyModel, q: f64) -> Result<f64> {
    let qw = walrasian(model)?;
    if !(q > qw + SIDE_TOL) {
        return Err(Error::Domain(format!("m is defined for q > q^W = {qw}; got {q}")));
    }
    if lower_deviations_free(model, q) {
        return Ok(0.0);
    }
    let others = (model.n() - 1) as f64 * q;
    let (d, c) = (model.demand(), model.cost());
    bisect(|x| d.price(x + others) - c.derivative(x), 0.0, q, "m(q)")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvantageKind {
    /// `D(q^W) = {q^W}`.
    Point,
    /// `[q, h(q)]` for `q < q^W`.
    Upper,
    /// `[ℓ(q), q]` for `q > q^W`.
    Lower,
}

/// `D(q) = {q′ : Δ(q, q′) ≥ 0}` as an interval plus its grid points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdvantageSet {
    pub kind: AdvantageKind,
    pub lo: f64,
    pub hi: f64,
    /// Grid levels `k` with `Δ(q, kλ) ≥ 0`, by exhaustive evaluation.
    pub grid: Vec<usize>,
}

pub fn advantage_set(model: &OligopolyModel, q: f64) -> Result<AdvantageSet> {
    let grid = model.grid();
    if q < 0.0 || q > grid.max_value() + SIDE_TOL {
        return Err(Error::Domain(format!("quantity {q} outside the grid range")));
    }
    let qw = walrasian(model)?;
    let (kind, lo, hi) = if (q - qw).abs() <= SIDE_TOL {
        (AdvantageKind::Point, qw, qw)
    } else if q < qw {
        (AdvantageKind::Upper, q, h_of(model, q)?)
    } else {
        (AdvantageKind::Lower, l_of(model, q)?, q)
    };
    let levels = (0..grid.len()).filter(|&k| weakly_advantaged(model, q, grid.value(k))).collect();
    Ok(AdvantageSet { kind, lo, hi, grid: levels })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescentSequences {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// `a₁ = q^N`, `b_k = h(a_k)`, `a_{k+1} = ℓ(b_k)` until `a` reaches zero.
pub fn descent_sequences(model: &OligopolyModel) -> Result<DescentSequences> {
    if model.n() < 3 {
        return Err(Error::Precondition("descent sequences need n >= 3".into()));
    }
    let mut a = vec![model.benchmarks()?.nash.value];
    let mut b = Vec::new();
    while b.len() < DESCENT_CAP {
        let ak = *a.last().unwrap();
        let bk = h_of(model, ak)?;
        b.push(bk);
        if ak == 0.0 {
            return Ok(DescentSequences { a, b });
        }
        let next = l_of(model, bk)?;
        a.push(if next <= SIDE_TOL { 0.0 } else { next });
    }
    Err(Error::NonTermination(DESCENT_CAP))
}

/// The descent carried out on grid levels: from `a`, one action mistake can
/// reach at most `b = max Γ∩D(a)`; from `b`, at least `min Γ∩D(b)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridDescent {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    /// False when the chain stalls above zero.
    pub reaches_zero: bool,
}

pub fn grid_descent(model: &OligopolyModel) -> Result<GridDescent> {
    let grid = model.grid();
    let Some(start) = model.benchmarks()?.nash.level else {
        return Err(Error::GridTooCoarse("the Nash quantity is not on the grid".into()));
    };
    let reach = |k: usize| -> Vec<usize> {
        let q = grid.value(k);
        (0..grid.len()).filter(|&j| weakly_advantaged(model, q, grid.value(j))).collect()
    };
    let mut a = vec![start];
    let mut b = Vec::new();
    loop {
        let ak = *a.last().unwrap();
        let bk = *reach(ak).last().unwrap();
        b.push(bk);
        if ak == 0 {
            return Ok(GridDescent { a, b, reaches_zero: true });
        }
        let next = reach(bk)[0];
        if next >= ak {
            return Ok(GridDescent { a, b, reaches_zero: false });
        }
        a.push(next);
    }
}

/// `(q̲, q̄)` bracketing the imitation states that are long-run equilibria
/// when rule and action mistakes are equally costly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LreBounds {
    pub lower: f64,
    pub upper: f64,
    #[serde(skip)]
    step: f64,
    #[serde(skip)]
    top: usize,
}

impl LreBounds {
    /// Grid levels in `[q̲, q̄]`.
    pub fn grid_levels(&self) -> impl Iterator<Item = usize> + '_ {
        (0..=self.top).filter(move |&k| {
            let v = k as f64 * self.step;
            v >= self.lower - SIDE_TOL && v <= self.upper + SIDE_TOL
        })
    }
}

/// Duopoly: `(q^N, h(q^N))`. Three or more firms: `(0, h(0))`, provided the
/// descent is realizable on the grid; otherwise `GridTooCoarse`.
pub fn lre_bounds(model: &OligopolyModel) -> Result<LreBounds> {
    let grid = model.grid();
    let wrap = |lower: f64, upper: f64| LreBounds { lower, upper, step: grid.step(), top: grid.top_level() };
    if model.n() == 2 {
        let qn = model.benchmarks()?.nash.value;
        return Ok(wrap(qn, h_of(model, qn)?));
    }
    let descent = grid_descent(model)?;
    if !descent.reaches_zero {
        return Err(Error::GridTooCoarse(format!(
            "one-mistake descent on the grid stalls at level {} (sequence {:?})",
            descent.a.last().unwrap(),
            descent.a
        )));
    }
    Ok(wrap(0.0, h_of(model, 0.0)?))
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::{Cost, Demand, QuantityGrid};
    use super::*;

    // Independent closed forms for the four-firm market: Δ(q, q′) = (q′ − q)(90 − 3.5q − 1.5q′)
    // below the choke point, so h(q) = 60 − 7q/3 and ℓ agrees with it for q > 18.
    fn delta_closed(q: f64, qp: f64) -> f64 {
        if qp + 3.0 * q >= 90.0 {
            0.5 * q * q - 0.5 * qp * qp
        } else {
            (qp - q) * (90.0 - 3.5 * q - 1.5 * qp)
        }
    }

    #[test]
    fn delta_matches_closed_form() {
        let m = four_firm();
        for q in 0..=90 {
            for qp in (0..=90).step_by(7) {
                let (q, qp) = (q as f64, qp as f64);
                assert!((delta(&m, q, qp) - delta_closed(q, qp)).abs() < 1e-9, "{q} {qp}");
            }
        }
        assert_eq!(delta(&m, 55.0, 0.0), 1512.5);
        assert_eq!(delta(&m, 15.0, 25.0), 0.0);
        assert_eq!(delta(&m, 33.0, 33.0), 0.0);
    }

    #[test]
    fn four_firm_roots() {
        let m = four_firm();
        assert!((h_of(&m, 15.0).unwrap() - 25.0).abs() < 1e-8);
        assert!((l_of(&m, 25.0).unwrap() - 5.0 / 3.0).abs() < 1e-8);
        assert!((h_of(&m, 2.0).unwrap() - 166.0 / 3.0).abs() < 1e-8);
        assert!((h_of(&m, 0.0).unwrap() - 60.0).abs() < 1e-8);
        assert_eq!(l_of(&m, 55.0).unwrap(), 0.0);
        for q in [0.0, 3.3, 10.0, 17.9] {
            assert!((h_of(&m, q).unwrap() - (60.0 - 7.0 * q / 3.0)).abs() < 1e-8);
        }
        for q in [18.5, 20.0, 24.0] {
            assert!((l_of(&m, q).unwrap() - (60.0 - 7.0 * q / 3.0)).abs() < 1e-8);
        }
    }

    #[test]
    fn roots_reject_wrong_side() {
        let m = four_firm();
        assert!(matches!(h_of(&m, 18.0), Err(Error::Domain(_))));
        assert!(matches!(h_of(&m, 30.0), Err(Error::Domain(_))));
        assert!(matches!(l_of(&m, 10.0), Err(Error::Domain(_))));
        assert!(matches!(m_of(&m, 18.0), Err(Error::Domain(_))));
    }

    #[test]
    fn m_solves_first_order_condition() {
        // 90 − (q′ + 3q) = q′  ⇒  q′ = (90 − 3q)/2.
        let m = four_firm();
        assert!((m_of(&m, 25.0).unwrap() - 7.5).abs() < 1e-9);
        assert!((m_of(&m, 19.0).unwrap() - 16.5).abs() < 1e-9);
        // p(3·30) = 0 = c′(0): every lower deviation is free.
        assert_eq!(m_of(&m, 30.0).unwrap(), 0.0);
        for q in [18.1, 20.0, 25.0, 29.0] {
            let v = m_of(&m, q).unwrap();
            assert!(v < 18.0);
            assert!(l_of(&m, q).unwrap() <= v + 1e-9);
        }
    }

    #[test]
    fn advantage_sets() {
        let m = four_firm();
        let d = advantage_set(&m, 15.0).unwrap();
        assert_eq!(d.kind, AdvantageKind::Upper);
        assert!((d.hi - 25.0).abs() < 1e-8);
        assert_eq!(d.grid, (15..=25).collect::<Vec<_>>());

        let d = advantage_set(&m, 25.0).unwrap();
        assert_eq!(d.kind, AdvantageKind::Lower);
        assert!((d.lo - 5.0 / 3.0).abs() < 1e-8);
        assert_eq!(d.grid, (2..=25).collect::<Vec<_>>());

        let d = advantage_set(&m, 18.0).unwrap();
        assert_eq!(d.kind, AdvantageKind::Point);
        assert_eq!(d.grid, vec![18]);
    }

    #[test]
    fn continuous_descent() {
        let d = descent_sequences(&four_firm()).unwrap();
        assert_eq!(d.a.len(), 3);
        assert!((d.a[0] - 15.0).abs() < 1e-9);
        assert!((d.a[1] - 5.0 / 3.0).abs() < 1e-8);
        assert_eq!(d.a[2], 0.0);
        assert!((d.b[0] - 25.0).abs() < 1e-8);
        assert!((d.b[1] - (60.0 - 35.0 / 9.0)).abs() < 1e-8);
        assert!((d.b[2] - 60.0).abs() < 1e-8);
        assert!(matches!(descent_sequences(&duopoly()), Err(Error::Precondition(_))));
    }

    #[test]
    fn grid_descent_four_firm() {
        let d = grid_descent(&four_firm()).unwrap();
        assert_eq!(d.a, vec![15, 2, 0]);
        assert_eq!(d.b, vec![25, 55, 60]);
        assert!(d.reaches_zero);
    }

    #[test]
    fn bounds() {
        let b = lre_bounds(&four_firm()).unwrap();
        assert_eq!(b.lower, 0.0);
        assert!((b.upper - 60.0).abs() < 1e-8);
        assert_eq!(b.grid_levels().collect::<Vec<_>>(), (0..=60).collect::<Vec<_>>());

        // Duopoly: Δ(q, q′) = (q′ − q)(90 − 1.5(q + q′)) so h(q) = 60 − q.
        let m = duopoly();
        let b = lre_bounds(&m).unwrap();
        assert!((b.lower - 22.5).abs() < 1e-9);
        assert!((b.upper - 37.5).abs() < 1e-8);
        assert_eq!(b.grid_levels().collect::<Vec<_>>(), (9..=15).collect::<Vec<_>>());
    }

    #[test]
    fn coarse_grid_is_reported() {
        // Step 3 keeps q^N = 15 and q^W = 18 on the grid. From 15 the largest
        // reachable point is 24 and ℓ(24) = 4 rounds up to 6; then h(6) = 46
        // gives 45, ℓ(45) = 0. Coarser steps stall instead.
        let fine = OligopolyModel::new(
            4,
            Demand::Linear { intercept: 90.0, slope: 1.0 },
            Cost::Power { coeff: 0.5, exponent: 2.0 },
            QuantityGrid::new(3.0, 30).unwrap(),
        )
        .unwrap();
        let d = grid_descent(&fine).unwrap();
        assert_eq!(d.a, vec![5, 2, 0]);
        assert!(lre_bounds(&fine).is_ok());

        // Six firms: q^N = 90/8 = 11.25, q^W = 90/7. A grid holding both is
        // λ = 90/56; if the walk stalls, lre_bounds must refuse.
        let six = OligopolyModel::new(
            6,
            Demand::Linear { intercept: 90.0, slope: 1.0 },
            Cost::Power { coeff: 0.5, exponent: 2.0 },
            QuantityGrid::new(90.0 / 56.0, 56).unwrap(),
        )
        .unwrap();
        let d = grid_descent(&six).unwrap();
        assert_eq!(d.reaches_zero, lre_bounds(&six).is_ok());
    }
}
