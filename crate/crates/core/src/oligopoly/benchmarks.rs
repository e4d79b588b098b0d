use serde::Serialize;

use super::{OligopolyModel, SNAP_TOL};
use crate::error::{Error, Result};
use crate::numeric::{bisect, sign_changes};

const UNIQUENESS_SAMPLES: usize = 2000;

/// A benchmark quantity: the continuous root plus its grid level when the
/// root lies on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Benchmark {
    pub raw: f64,
    pub level: Option<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkQuantities {
    pub nash: Benchmark,
    pub walrasian: Benchmark,
    pub collusive: Benchmark,
}

pub fn compute_benchmarks(model: &OligopolyModel) -> Result<BenchmarkQuantities> {
    compute_with_tol(model, SNAP_TOL)
}

pub(super) fn compute_with_tol(model: &OligopolyModel, snap_tol: f64) -> Result<BenchmarkQuantities> {
    let n = model.n() as f64;
    let (d, c) = (model.demand(), model.cost());
    let hi = model.q_max() / n;
    if !hi.is_finite() {
        return Err(Error::InvalidModel("inverse demand never reaches zero".into()));
    }
    let nash = symmetric_root(|q| d.price(n * q) + q * d.derivative(n * q) - c.derivative(q), hi, "Nash")?;
    let walrasian = symmetric_root(|q| d.price(n * q) - c.derivative(q), hi, "Walrasian")?;
    let collusive =
        symmetric_root(|q| d.price(n * q) + n * q * d.derivative(n * q) - c.derivative(q), hi, "collusive")?;

    if !(0.0 < nash && nash < walrasian) {
        return Err(Error::InvalidModel(format!(
            "benchmark ordering 0 < q^N < q^W violated (q^N = {nash}, q^W = {walrasian})"
        )));
    }
    if collusive > nash + snap_tol {
        return Err(Error::InvalidModel(format!(
            "benchmark ordering q^C <= q^N violated (q^C = {collusive}, q^N = {nash})"
        )));
    }
    let grid = model.grid();
    let snap = |raw: f64| {
        let level = grid.snap(raw, snap_tol);
        Benchmark { raw, level, value: level.map_or(raw, |k| grid.value(k)) }
    };
    Ok(BenchmarkQuantities { nash: snap(nash), walrasian: snap(walrasian), collusive: snap(collusive) })
}

fn symmetric_root<F: Fn(f64) -> f64>(foc: F, hi: f64, what: &str) -> Result<f64> {
    if sign_changes(&foc, 0.0, hi, UNIQUENESS_SAMPLES) > 1 {
        return Err(Error::RootFinding(format!("{what} first-order condition has several roots")));
    }
    bisect(foc, 0.0, hi, what)
}

/// Continuous maximizer of `q ↦ π(q, q + q_minus)` on `[0, Q_max − q_minus]`.
pub fn continuous_best_response(model: &OligopolyModel, q_minus: f64) -> Result<f64> {
    let (d, c) = (model.demand(), model.cost());
    let hi = model.q_max() - q_minus;
    let foc = |q: f64| d.price(q + q_minus) + q * d.derivative(q + q_minus) - c.derivative(q);
    if hi <= 0.0 || foc(0.0) <= 0.0 {
        return Ok(0.0);
    }
    bisect(foc, 0.0, hi, "best response")
}
