//! Emitted quantities and file output.

use std::path::{Path, PathBuf};

use num_rational::Ratio;
use serde::Serialize;

use crate::CliError;

const MAX_DENOMINATOR: i64 = 10_000;
const RATIONAL_TOL: f64 = 1e-9;

/// A real number as a portable decimal string plus its exact rational form
/// when a small-denominator fraction matches it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Quantity {
    pub decimal: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rational: Option<String>,
}

impl Quantity {
    pub fn new(x: f64) -> Self {
        Self { decimal: format!("{x}"), rational: rational(x).map(|r| r.to_string()) }
    }
}

impl From<f64> for Quantity {
    fn from(x: f64) -> Self {
        Self::new(x)
    }
}

/// Best continued-fraction convergent with denominator at most
/// [`MAX_DENOMINATOR`] that lies within tolerance of `x`.
pub fn rational(x: f64) -> Option<Ratio<i64>> {
    if !x.is_finite() || x.abs() > 1e12 {
        return None;
    }
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut r = x;
    for _ in 0..40 {
        let a = r.floor();
        let ai = a as i64;
        let h = ai.checked_mul(h1)?.checked_add(h0)?;
        let k = ai.checked_mul(k1)?.checked_add(k0)?;
        if k > MAX_DENOMINATOR {
            return None;
        }
        (h0, h1, k0, k1) = (h1, h, k1, k);
        if (h as f64 / k as f64 - x).abs() <= RATIONAL_TOL * 1f64.max(x.abs()) {
            return Some(Ratio::new(h, k));
        }
        let frac = r - a;
        if frac == 0.0 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

pub fn list(xs: &[f64]) -> Vec<Quantity> {
    xs.iter().copied().map(Quantity::new).collect()
}

/// Where results go: stdout, and also files under `--out` when given.
pub struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    pub fn new(dir: Option<&Path>) -> Result<Self, CliError> {
        if let Some(d) = dir {
            std::fs::create_dir_all(d).map_err(|e| CliError::Io(format!("cannot create {}: {e}", d.display())))?;
        }
        Ok(Self { dir: dir.map(Path::to_path_buf) })
    }

    /// Prints `text` and writes it to `name` under the output directory.
    pub fn emit(&self, name: &str, text: &str) -> Result<(), CliError> {
        print!("{text}");
        if !text.ends_with('\n') {
            println!();
        }
        self.file(name, text)
    }

    /// Writes `text` to `name` only when an output directory is configured.
    pub fn file(&self, name: &str, text: &str) -> Result<(), CliError> {
        if let Some(d) = &self.dir {
            let path = d.join(name);
            std::fs::write(&path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        }
        Ok(())
    }

    pub fn has_dir(&self) -> bool {
        self.dir.is_some()
    }
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

pub fn csv<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_forms() {
        assert_eq!(rational(166.0 / 3.0), Some(Ratio::new(166, 3)));
        assert_eq!(rational(60.0 - 35.0 / 9.0), Some(Ratio::new(505, 9)));
        assert_eq!(rational(15.0), Some(Ratio::new(15, 1)));
        assert_eq!(rational(-2.5), Some(Ratio::new(-5, 2)));
        assert_eq!(rational(std::f64::consts::PI), None);
        assert_eq!(Quantity::new(5.0 / 3.0).rational.as_deref(), Some("5/3"));
        assert_eq!(Quantity::new(18.0).decimal, "18");
    }
}
