//! Gauss–Legendre rules and generalized Richardson extrapolation.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WickError};

/// Gauss–Legendre rule mapped to `[0, 1]`.
#[derive(Clone, Debug)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        let rule = GaussLegendre::new(NonZeroUsize::new(n.max(1)).expect("nonzero"));
        let (nodes, weights) = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .unzip();
        GaussRule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights on `[0, 1]`.
    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let len = b - a;
        self.pairs().map(|(x, w)| w * f(a + len * x)).sum::<f64>() * len
    }

    /// `∫_a^b f` for `f` with an algebraic endpoint singularity
    /// `(s − a)^{p}` at `a`, using `s = a + (b − a) u^{1/q}`, `q > 0`.
    ///
    /// Choosing `q` equal to the singular exponent makes the integrand
    /// smooth in `u` when `f ∼ (s − a)^{q − 1}`.
    pub fn integrate_left_singular(&self, a: f64, b: f64, q: f64, f: impl Fn(f64) -> f64) -> f64 {
        let len = b - a;
        let r = 1.0 / q;
        self.pairs()
            .map(|(u, w)| {
                let s = a + len * u.powf(r);
                w * f(s) * len * r * u.powf(r - 1.0)
            })
            .sum()
    }
}

/// Value and error estimate from an extrapolated refinement sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extrapolated {
    pub value: f64,
    pub error: f64,
    /// `(h, raw value)` at each refinement level, coarsest first.
    pub levels: Vec<(f64, f64)>,
}

fn basis_columns(exponents: &[f64]) -> Vec<(f64, bool)> {
    let mut cols: Vec<(f64, bool)> = Vec::new();
    for &p in exponents {
        let log = cols.iter().any(|&(q, _)| (q - p).abs() < 1e-9);
        if !cols.iter().any(|&(q, l)| (q - p).abs() < 1e-9 && l == log) {
            cols.push((p, log));
        }
    }
    cols
}

fn fit(hs: &[f64], values: &[f64], cols: &[(f64, bool)]) -> Result<f64> {
    let n = cols.len() + 1;
    let k0 = hs.len() - n;
    let h0 = hs[k0];
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for r in 0..n {
        let h = hs[k0 + r] / h0;
        m[(r, 0)] = 1.0;
        for (c, &(p, log)) in cols.iter().enumerate() {
            m[(r, c + 1)] = if log { h.powf(p) * h.ln() } else { h.powf(p) };
        }
        rhs[r] = values[k0 + r];
    }
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| WickError::NonConvergence("singular extrapolation system".into()))?;
    Ok(sol[0])
}

/// Extrapolates `v(h) = V + Σ_j a_j h^{p_j}` to `h = 0`.
///
/// Uses the finest `L + 1` levels for the `L` leading exponents that the
/// data supports; repeated exponents get an `h^p log h` column. The error
/// estimate is the change from dropping the last exponent (and the
/// coarsest level).
pub fn richardson(hs: &[f64], values: &[f64], exponents: &[f64]) -> Result<Extrapolated> {
    if hs.len() != values.len() || hs.len() < 2 || exponents.is_empty() {
        return Err(WickError::Invalid("extrapolation needs at least three levels".into()));
    }
    let mut sorted = exponents.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite exponents"));
    let cols = basis_columns(&sorted);
    let used = cols.len().min(hs.len() - 1);
    let value = fit(hs, values, &cols[..used])?;
    let coarser = fit(hs, values, &cols[..used - 1])?;
    Ok(Extrapolated {
        value,
        error: (value - coarser).abs(),
        levels: hs.iter().copied().zip(values.iter().copied()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_is_exact_for_polynomials() {
        let g = GaussRule::new(5);
        let v = g.integrate(-1.0, 2.0, |x| x.powi(9) - 3.0 * x.powi(4));
        let exact = (2f64.powi(10) - 1.0) / 10.0 - 3.0 * (32.0 + 1.0) / 5.0;
        assert!((v - exact).abs() < 1e-11);
    }

    #[test]
    fn left_singular_substitution() {
        let p = 0.35;
        let v = GaussRule::new(4).integrate_left_singular(0.0, 2.0, p, |s| s.powf(p - 1.0) * (1.0 + s.powf(p)));
        let exact = 2f64.powf(p) / p + 2f64.powf(2.0 * p) / (2.0 * p);
        assert!((v - exact).abs() < 1e-13, "{v} {exact}");
        let v = GaussRule::new(20).integrate_left_singular(0.0, 2.0, p, |s| s.powf(p - 1.0) * (1.0 + s));
        let exact = 2f64.powf(p) / p + 2f64.powf(p + 1.0) / (p + 1.0);
        assert!((v - exact).abs() < 1e-10, "{v} {exact}");
    }

    #[test]
    fn richardson_recovers_fractional_expansion() {
        let hs: Vec<f64> = (0..7).map(|k| 0.5f64.powi(k)).collect();
        let f = |h: f64| 1.25 + 0.7 * h.powf(0.4) - 2.0 * h.powf(1.4) + 0.3 * h * h;
        let vals: Vec<f64> = hs.iter().map(|&h| f(h)).collect();
        let e = richardson(&hs, &vals, &[0.4, 1.4, 2.0]).unwrap();
        assert!((e.value - 1.25).abs() < 1e-12, "{e:?}");
    }

    #[test]
    fn richardson_handles_repeated_exponent() {
        let hs: Vec<f64> = (0..6).map(|k| 0.5f64.powi(k)).collect();
        let f = |h: f64| 3.0 + h * h + 0.5 * h * h * h.ln();
        let vals: Vec<f64> = hs.iter().map(|&h| f(h)).collect();
        let e = richardson(&hs, &vals, &[2.0, 2.0]).unwrap();
        assert!((e.value - 3.0).abs() < 1e-11, "{e:?}");
    }
}
