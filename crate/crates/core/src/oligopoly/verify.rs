use serde::Serialize;

use super::advantage::{delta, h_of, l_of};
use super::OligopolyModel;
use crate::error::Result;
use crate::game::ties;

const MARGIN_TOL: f64 = 1e-9;
const MONOTONE_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubstitutesReport {
    pub passed: bool,
    pub checked_pairs: usize,
    /// `(q1, q2, Q1, Q2)` with `q1 < q2`, `Q1 < Q2`, `π(q2,Q2) ≥ π(q1,Q2)` but
    /// `π(q2,Q1) ≤ π(q1,Q1)`.
    pub counterexample: Option<[f64; 4]>,
}

/// Single-crossing check over every pair of grid quantities and every pair of
/// achievable aggregates. For fixed `q1 < q2` let `d(Q) = π(q2,Q) − π(q1,Q)`;
/// the condition fails exactly when some `d(Q1) ≤ 0` precedes a `d(Q2) ≥ 0`,
/// so one ascending scan per quantity pair suffices.
pub fn verify_strategic_substitutes(model: &OligopolyModel) -> SubstitutesReport {
    let grid = model.grid();
    let step = grid.step();
    let others_max = (model.n() - 1) * grid.top_level();
    let c = model.cost();
    let mut checked = 0;
    for k1 in 0..grid.len() {
        for k2 in k1 + 1..grid.len() {
            let (q1, q2) = (grid.value(k1), grid.value(k2));
            let (c1, c2) = (c.value(q1), c.value(q2));
            let mut bad: Option<f64> = None;
            // Aggregates feasible for both own quantities.
            for t in k2..=k1 + others_max {
                checked += 1;
                let total = t as f64 * step;
                let p = model.price(total);
                let (a, b) = (p * q2 - c2, p * q1 - c1);
                let nonneg = a > b || ties(a, b);
                let nonpos = a < b || ties(a, b);
                if nonneg {
                    if let Some(t1) = bad {
                        return SubstitutesReport {
                            passed: false,
                            checked_pairs: checked,
                            counterexample: Some([q1, q2, t1, total]),
                        };
                    }
                }
                if nonpos && bad.is_none() {
                    bad = Some(total);
                }
            }
        }
    }
    SubstitutesReport { passed: true, checked_pairs: checked, counterexample: None }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalrasianAdvantageReport {
    pub passed: bool,
    pub checked: usize,
    pub min_margin: f64,
    /// `(q, m)` attaining the smallest margin.
    pub argmin: Option<(f64, usize)>,
}

/// With `m` firms at `q^W` and `n − m` at `q ≠ q^W`, the firms at `q^W` earn
/// strictly more, for every `1 ≤ m < n` and grid `q`.
pub fn verify_walrasian_advantage(model: &OligopolyModel) -> Result<WalrasianAdvantageReport> {
    let b = model.benchmarks()?;
    let qw = b.walrasian.value;
    let n = model.n();
    let c = model.cost();
    let grid = model.grid();
    let mut min_margin = f64::INFINITY;
    let mut argmin = None;
    let mut checked = 0;
    for k in 0..grid.len() {
        if Some(k) == b.walrasian.level {
            continue;
        }
        let q = grid.value(k);
        for m in 1..n {
            let p = model.price(m as f64 * qw + (n - m) as f64 * q);
            let margin = (p * qw - c.value(qw)) - (p * q - c.value(q));
            checked += 1;
            if margin < min_margin {
                min_margin = margin;
                argmin = Some((q, m));
            }
        }
    }
    Ok(WalrasianAdvantageReport { passed: min_margin > MARGIN_TOL, checked, min_margin, argmin })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl PropertyCheck {
    fn new(name: &str, failure: Option<String>, ok: String) -> Self {
        Self { name: name.into(), passed: failure.is_none(), detail: failure.unwrap_or(ok) }
    }
}

/// Structural properties of Δ plus the root cross-check, all on grid data.
pub fn verify_delta_properties(model: &OligopolyModel) -> Result<Vec<PropertyCheck>> {
    let b = model.benchmarks()?;
    let qw = b.walrasian.value;
    let n = model.n();
    let grid = model.grid();
    let values: Vec<f64> = grid.values().collect();
    let q_max = model.q_max();
    let mut out = Vec::new();

    let fail = values.iter().find(|&&q| delta(model, q, q).abs() > 1e-12);
    out.push(PropertyCheck::new(
        "delta_diagonal_zero",
        fail.map(|q| format!("Δ({q}, {q}) = {}", delta(model, *q, *q))),
        format!("{} grid points", values.len()),
    ));

    let fail = values.iter().filter(|&&q| (q - qw).abs() > 1e-9).find(|&&q| !(delta(model, q, qw) > 0.0));
    out.push(PropertyCheck::new(
        "walrasian_deviation_profitable",
        fail.map(|q| format!("Δ({q}, q^W) = {}", delta(model, *q, qw))),
        format!("q^W = {qw}"),
    ));

    let mut fail = None;
    'outer: for &q in values.iter().filter(|&&q| q < qw - 1e-9) {
        let hi = q_max - (n - 1) as f64 * q;
        let inside: Vec<f64> = values.iter().copied().filter(|&x| x >= q && x <= hi + 1e-12).collect();
        for w in inside.windows(3) {
            let d2 = delta(model, q, w[2]) - 2.0 * delta(model, q, w[1]) + delta(model, q, w[0]);
            if !(d2 < 0.0) {
                fail = Some(format!("second difference {d2} at q = {q}, q′ = {}", w[1]));
                break 'outer;
            }
        }
    }
    out.push(PropertyCheck::new("delta_strictly_concave", fail, "all q < q^W".into()));

    if n == 2 {
        // The zero set of Δ is symmetric because Δ(q, q′) = −Δ(q′, q).
        let mut fail = None;
        for &q in &values {
            for &qp in &values {
                let (a, b) = (delta(model, q, qp), delta(model, qp, q));
                if (a + b).abs() > 1e-9 * 1f64.max(a.abs()) {
                    fail = Some(format!("Δ({q}, {qp}) = {a}, Δ({qp}, {q}) = {b}"));
                }
            }
        }
        out.push(PropertyCheck::new("duopoly_delta_antisymmetric", fail, "all grid pairs".into()));
    } else {
        // Once both aggregates pass Q_max the price is zero and the sum vanishes.
        let mut fail = None;
        let mut skipped = 0;
        for (i, &q) in values.iter().enumerate() {
            for &qp in &values[i + 1..] {
                if qp + (n - 1) as f64 * q >= q_max {
                    skipped += 1;
                    continue;
                }
                let s = delta(model, q, qp) + delta(model, qp, q);
                if !(s > 0.0) {
                    fail = Some(format!("Δ({q}, {qp}) + Δ({qp}, {q}) = {s}"));
                }
            }
        }
        out.push(PropertyCheck::new(
            "delta_sum_positive",
            fail,
            format!("pairs below the choke aggregate; {skipped} pairs at zero price skipped"),
        ));
    }

    let upto = grid.max_value().min(q_max);
    let h_samples: Vec<f64> = (0..MONOTONE_SAMPLES).map(|k| qw * k as f64 / MONOTONE_SAMPLES as f64).collect();
    let l_samples: Vec<f64> =
        (1..=MONOTONE_SAMPLES).map(|k| qw + (upto - qw) * k as f64 / MONOTONE_SAMPLES as f64).collect();
    let hs = h_samples.iter().map(|&q| h_of(model, q)).collect::<Result<Vec<_>>>()?;
    let ls = l_samples.iter().map(|&q| l_of(model, q)).collect::<Result<Vec<_>>>()?;
    let h_fail = hs.windows(2).position(|w| !(w[1] < w[0] - 1e-9));
    out.push(PropertyCheck::new(
        "h_strictly_decreasing",
        h_fail.map(|i| format!("h({}) = {} vs h({}) = {}", h_samples[i], hs[i], h_samples[i + 1], hs[i + 1])),
        format!("{MONOTONE_SAMPLES} samples on [0, q^W)"),
    ));
    // ℓ is clamped at zero; monotonicity is strict only where it is positive.
    let l_fail = ls.windows(2).position(|w| w[0] > 0.0 && !(w[1] < w[0] - 1e-9));
    out.push(PropertyCheck::new(
        "l_strictly_decreasing",
        l_fail.map(|i| format!("ℓ({}) = {} vs ℓ({}) = {}", l_samples[i], ls[i], l_samples[i + 1], ls[i + 1])),
        format!("{MONOTONE_SAMPLES} samples on (q^W, {upto}]"),
    ));

    let residual = h_samples
        .iter()
        .zip(&hs)
        .chain(l_samples.iter().zip(&ls).filter(|(_, &l)| l > 0.0))
        .map(|(&q, &r)| delta(model, q, r).abs())
        .fold(0.0, f64::max);
    out.push(PropertyCheck::new(
        "root_residual",
        (residual >= 1e-8).then(|| format!("max |Δ(q, root)| = {residual}")),
        format!("max |Δ(q, root)| = {residual:e}"),
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::{Cost, Demand, QuantityGrid};
    use super::*;

    #[test]
    fn four_firm_is_strategic_substitutes() {
        let r = verify_strategic_substitutes(&four_firm());
        assert!(r.passed, "{:?}", r.counterexample);
        assert!(r.checked_pairs > 900_000);
    }

    #[test]
    fn increasing_demand_fails_substitutes() {
        let m = OligopolyModel::unchecked(
            2,
            Demand::Linear { intercept: 1.0, slope: -1.0 },
            Cost::Power { coeff: 2.0, exponent: 2.0 },
            QuantityGrid::new(1.0, 10).unwrap(),
        )
        .unwrap();
        let r = verify_strategic_substitutes(&m);
        assert!(!r.passed);
        let [q1, q2, t1, t2] = r.counterexample.unwrap();
        assert!(q1 < q2 && t1 < t2);
        let pi = |q: f64, t: f64| m.profit(q, t).unwrap();
        assert!(pi(q2, t2) >= pi(q1, t2));
        assert!(pi(q2, t1) <= pi(q1, t1));
    }

    #[test]
    fn walrasian_advantage_four_firm() {
        let r = verify_walrasian_advantage(&four_firm()).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.checked, 90 * 3);
    }

    #[test]
    fn delta_properties_hold() {
        for m in [four_firm(), duopoly()] {
            for check in verify_delta_properties(&m).unwrap() {
                assert!(check.passed, "{}: {}", check.name, check.detail);
            }
        }
    }
}
