//! Rosenblatt process: cumulants by singular quadrature and finite-rank
//! kernel discretization.
//!
//! With `α = H/2` the kernel is
//! `f_t(x, y) = c_H ∫₀ᵗ (s − x)₊^{α−1} (s − y)₊^{α−1} ds`, and
//! `∫ (u − x)₊^{α−1} (v − x)₊^{α−1} dx = B(α, 1 − 2α) |u − v|^{H−1}` turns
//! every cumulant into an integral of cyclic products of `|s_i − s_j|^{H−1}`.

use std::collections::HashMap;
use std::sync::RwLock;

use itertools::Itertools;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;

use super::Chaos2Kernel;
use crate::cumulants::{CumulantModel, Variable};
use crate::error::{Result, WickError};
use crate::quadrature::{richardson, Extrapolated, GaussRule};

/// Refinement schedule for [`cyclic_power_integral`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    /// Cells on the coarsest mesh.
    pub base_cells: usize,
    /// Number of dyadic refinements, including the coarsest.
    pub levels: usize,
    /// Relative error estimate above which the result is rejected.
    pub tol: f64,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            base_cells: 64,
            levels: 6,
            tol: 1e-8,
        }
    }
}

impl QuadratureOptions {
    /// Coarser schedule for joint cumulants at distinct times.
    pub fn joint() -> Self {
        QuadratureOptions {
            base_cells: 32,
            levels: 5,
            tol: 1e-6,
        }
    }
}

/// Mesh of `[0, T]` refined dyadically from a base mesh whose edges contain
/// every breakpoint.
fn mesh(breaks: &[f64], base_cells: usize, level: usize) -> Vec<f64> {
    let t_max = breaks[breaks.len() - 1];
    let mut edges = vec![0.0];
    let mut prev = 0.0;
    for &b in breaks {
        let cells = ((base_cells as f64 * (b - prev) / t_max).round() as usize).max(1) << level;
        for k in 1..=cells {
            edges.push(prev + (b - prev) * k as f64 / cells as f64);
        }
        prev = b;
    }
    edges
}

/// `F(x) = |x|^{β+2} / ((β+1)(β+2))`, so that `F'' = |x|^β`.
fn antiderivative(beta: f64, x: f64) -> f64 {
    x.abs().powf(beta + 2.0) / ((beta + 1.0) * (beta + 2.0))
}

/// Galerkin matrix of `|s − u|^β` on piecewise constants, orthonormalized.
fn galerkin(beta: f64, edges: &[f64]) -> DMatrix<f64> {
    let n = edges.len() - 1;
    let f = |x: f64| antiderivative(beta, x);
    DMatrix::from_fn(n, n, |i, j| {
        let (a, b) = (edges[i], edges[i + 1]);
        let (c, d) = (edges[j], edges[j + 1]);
        let v = f(b - c) + f(a - d) - f(a - c) - f(b - d);
        v / ((b - a) * (d - c)).sqrt()
    })
}

/// `∫_{[0,t_1]×⋯×[0,t_n]} ∏_i |s_i − s_{i+1}|^β ds` with `s_{n+1} = s_1`.
///
/// Each level computes `Tr(D_1 K D_2 K ⋯ D_n K)` for the Galerkin matrix `K`
/// and cell masks `D_i = 1_{[0,t_i]}`; the sequence is extrapolated in the
/// mesh width with exponents `nH − 1 + j` and `2, 4`, where `H = β + 1`.
pub fn cyclic_power_integral(beta: f64, times: &[f64], opts: &QuadratureOptions) -> Result<Extrapolated> {
    let n = times.len();
    if n < 2 {
        return Err(WickError::Invalid("cyclic integral needs at least two factors".into()));
    }
    if times.iter().any(|&t| !(t > 0.0)) {
        return Err(WickError::Invalid("times must be positive".into()));
    }
    let breaks: Vec<f64> = times
        .iter()
        .copied()
        .sorted_by(|a, b| a.partial_cmp(b).expect("finite"))
        .dedup()
        .collect();
    let t_max = breaks[breaks.len() - 1];
    let mut hs = Vec::with_capacity(opts.levels);
    let mut vals = Vec::with_capacity(opts.levels);
    for level in 0..opts.levels {
        let edges = mesh(&breaks, opts.base_cells, level);
        let k = galerkin(beta, &edges);
        let masked: Vec<DMatrix<f64>> = times
            .iter()
            .map(|&t| {
                let mut m = k.clone();
                for (i, mut row) in m.row_iter_mut().enumerate() {
                    if edges[i + 1] > t * (1.0 + 1e-12) {
                        row.fill(0.0);
                    }
                }
                m
            })
            .collect();
        let mut acc = masked[0].clone();
        for m in &masked[1..n - 1] {
            acc = &acc * m;
        }
        let last = &masked[n - 1];
        let tr = acc.component_mul(&last.transpose()).sum();
        hs.push(t_max / (opts.base_cells << level) as f64);
        vals.push(tr);
    }
    let h = beta + 1.0;
    let mut exps: Vec<f64> = (0..4).map(|j| n as f64 * h - 1.0 + j as f64).collect();
    exps.extend([2.0, 4.0]);
    richardson(&hs, &vals, &exps)
}

/// Cumulant estimate with its extrapolation error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulantEstimate {
    pub value: f64,
    pub error: f64,
    pub levels: Vec<(f64, f64)>,
}

/// Hurst parameter and normalization of the Rosenblatt kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RosenblattSpec {
    pub hurst: f64,
    /// `c_H`, chosen so that `𝔼[X_1²] = 1` under the quadrature.
    pub c_h: f64,
    /// Relative gap between the quadrature of `∫∫|s−u|^{2H−2}` over `[0,1]²`
    /// and its closed form `1/(H(2H−1))`.
    pub c_h_residual: f64,
    /// `B(H/2, 1 − H)`.
    pub beta_const: f64,
    pub options: QuadratureOptions,
}

impl RosenblattSpec {
    pub fn new(hurst: f64) -> Result<Self> {
        Self::with_options(hurst, QuadratureOptions::default())
    }

    pub fn with_options(hurst: f64, options: QuadratureOptions) -> Result<Self> {
        if !(hurst > 0.5 && hurst < 1.0) {
            return Err(WickError::Invalid(format!("Hurst parameter {hurst} outside (1/2, 1)")));
        }
        let beta_const = beta(hurst / 2.0, 1.0 - hurst);
        let i2 = cyclic_power_integral(hurst - 1.0, &[1.0, 1.0], &options)?;
        let closed = 1.0 / (hurst * (2.0 * hurst - 1.0));
        let c_h = 1.0 / (beta_const * (2.0 * i2.value).sqrt());
        Ok(RosenblattSpec {
            hurst,
            c_h,
            c_h_residual: (i2.value - closed) / closed,
            beta_const,
            options,
        })
    }

    fn prefactor(&self, m: usize) -> f64 {
        2f64.powi(m as i32 - 1) * (self.c_h * self.beta_const).powi(m as i32)
    }
}

fn check_order(n: usize) -> Result<()> {
    if !(2..=6).contains(&n) {
        return Err(WickError::Invalid(format!("cumulant order {n} outside [2, 6]")));
    }
    Ok(())
}

fn estimate(scale: f64, e: Extrapolated, tol: f64) -> Result<CumulantEstimate> {
    let value = scale * e.value;
    let error = scale * e.error;
    if !(error <= tol * value.abs().max(1e-300)) {
        return Err(WickError::NonConvergence(format!(
            "refinement stalled: estimate {value} with error {error} above relative tolerance {tol}"
        )));
    }
    Ok(CumulantEstimate {
        value,
        error,
        levels: e.levels.into_iter().map(|(h, v)| (h, scale * v)).collect(),
    })
}

/// `κ_n[X_t] = 2^{n−1}(n−1)! c_H^n B(H/2, 1−H)^n ∫_{[0,t]^n} ∏|s_i − s_{i+1}|^{H−1} ds`.
pub fn rosenblatt_cumulant(n: usize, t: f64, spec: &RosenblattSpec) -> Result<CumulantEstimate> {
    check_order(n)?;
    let e = cyclic_power_integral(spec.hurst - 1.0, &vec![t; n], &spec.options)?;
    let fact: f64 = (1..n).map(|k| k as f64).product();
    estimate(spec.prefactor(n) * fact, e, spec.options.tol)
}

/// Joint cumulant `κ[X_{t_1}, …, X_{t_m}]`: one cyclic integral per
/// permutation of the first `m − 1` times.
pub fn rosenblatt_joint_cumulant(times: &[f64], spec: &RosenblattSpec, opts: &QuadratureOptions) -> Result<f64> {
    let m = times.len();
    check_order(m)?;
    let mut total = 0.0;
    for p in (0..m - 1).permutations(m - 1) {
        let mut order: Vec<f64> = p.iter().map(|&i| times[i]).collect();
        order.push(times[m - 1]);
        total += cyclic_power_integral(spec.hurst - 1.0, &order, opts)?.value;
    }
    Ok(spec.prefactor(m) * total)
}

/// `κ_n[X_t] = t^{nH} κ_n[X_1]`.
pub fn rosenblatt_cumulant_scaled(n: usize, t: f64, hurst: f64, kappa_one: f64) -> f64 {
    t.powf(n as f64 * hurst) * kappa_one
}

/// Quadrature of `∫_{−∞}^{min(u,v)} (u − x)^{α−1} (v − x)^{α−1} dx`.
///
/// With `y = min(u,v) − x` and `d = |u − v|` the range splits at `y = d`;
/// `y = d z^{1/α}` removes the singularity on `[0, d]` and
/// `y = d w^{−1/(1−2α)}` maps the tail onto `(0, 1]`.
pub fn beta_identity_quadrature(u: f64, v: f64, alpha: f64) -> f64 {
    let d = (u - v).abs();
    let g = GaussRule::new(60);
    let near = g.integrate(0.0, 1.0, |z| {
        let y = d * z.powf(1.0 / alpha);
        (y + d).powf(alpha - 1.0) * d.powf(alpha) / alpha
    });
    let q = 1.0 - 2.0 * alpha;
    let far = g.integrate(0.0, 1.0, |z| {
        let w = z.powf(1.0 / q);
        d.powf(2.0 * alpha - 1.0) * (1.0 + w).powf(alpha - 1.0) / q
    });
    near + far
}

/// Default number of geometric tail cells beyond `−L`.
pub const DEFAULT_TAIL_CELLS: usize = 12;

/// Spatial grid for [`rosenblatt_kernel_discretize`].
///
/// Plain cells cover `[−L, T]`: uniform on `[0, T]` and graded
/// quadratically towards 0 on `[−L, 0]`. Beyond `−L`, tail cells with
/// edges `−2^k L` and a final unbounded cell carry the profile
/// `(−x)^{H/2−1}`, matching the decay of the kernel, so no variance is lost
/// to truncation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelGrid {
    /// `(a, b)` per cell; the first cell starts at `−∞` when tails are on.
    pub cells: Vec<(f64, f64)>,
    /// Leading cells that carry the tail profile.
    pub tail_cells: usize,
    pub support: f64,
    pub horizon: f64,
}

impl KernelGrid {
    /// `n_grid` plain cells split evenly between the two sides of 0, plus
    /// `tail` profile cells (`0` truncates the support at `−L`).
    pub fn new(horizon: f64, n_grid: usize, support: f64, tail: usize) -> Result<Self> {
        if n_grid < 16 {
            return Err(WickError::Invalid("kernel grid needs at least 16 cells".into()));
        }
        if !(horizon > 0.0 && support > 0.0) {
            return Err(WickError::Invalid("grid horizon and support must be positive".into()));
        }
        let n_pos = n_grid / 2;
        let n_neg = n_grid - n_pos;
        let mut edges: Vec<f64> = (0..n_neg)
            .map(|k| -support * (1.0 - k as f64 / n_neg as f64).powi(2))
            .collect();
        edges.extend((0..=n_pos).map(|k| horizon * k as f64 / n_pos as f64));
        let mut cells = Vec::with_capacity(n_grid + tail);
        if tail > 0 {
            cells.push((f64::NEG_INFINITY, -support * 2f64.powi(tail as i32 - 1)));
            for k in (1..tail).rev() {
                cells.push((-support * 2f64.powi(k as i32), -support * 2f64.powi(k as i32 - 1)));
            }
        }
        cells.extend(edges.windows(2).map(|w| (w[0], w[1])));
        Ok(KernelGrid {
            cells,
            tail_cells: tail,
            support,
            horizon,
        })
    }

    /// Default support `L = 10·T` with [`DEFAULT_TAIL_CELLS`] tail cells.
    pub fn with_defaults(horizon: f64, n_grid: usize) -> Result<Self> {
        Self::new(horizon, n_grid, 10.0 * horizon, DEFAULT_TAIL_CELLS)
    }

    pub fn cells(&self) -> usize {
        self.cells.len()
    }

    /// Squared norms of the basis functions: cell widths, or `∫ (−x)^{H−2}`
    /// over tail cells.
    pub fn weights(&self, hurst: f64) -> Vec<f64> {
        let q = 1.0 - hurst;
        self.cells
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| {
                if i < self.tail_cells {
                    let far = if a.is_finite() { (-a).powf(-q) } else { 0.0 };
                    ((-b).powf(-q) - far) / q
                } else {
                    b - a
                }
            })
            .collect()
    }

    fn plain_edges(&self) -> impl Iterator<Item = f64> + '_ {
        self.cells[self.tail_cells..]
            .iter()
            .map(|c| c.0)
            .chain(self.cells.last().map(|c| c.1))
    }
}

/// `∫_{a}^{b} (s − x)₊^{α−1} dx = ((s − a)₊^α − (s − b)₊^α)/α`.
fn cell_power(s: f64, a: f64, b: f64, alpha: f64) -> f64 {
    let p = |x: f64| if x > 0.0 { x.powf(alpha) } else { 0.0 };
    (p(s - a) - p(s - b)) / alpha
}

/// `∫_{a}^{b} (s − x)^{α−1} (−x)^{α−1} dx` for `a < b < 0 ≤ s`.
fn tail_power(s: f64, a: f64, b: f64, alpha: f64, rule: &GaussRule) -> f64 {
    let big_b = -b;
    if a.is_finite() {
        return rule.integrate(big_b, -a, |y| (s + y).powf(alpha - 1.0) * y.powf(alpha - 1.0));
    }
    // y = B/w, w = z^{1/(1−2α)}
    let q = 1.0 - 2.0 * alpha;
    rule.integrate(0.0, 1.0, |z| {
        let w = z.powf(1.0 / q);
        big_b.powf(2.0 * alpha - 1.0) * (1.0 + s * w / big_b).powf(alpha - 1.0) / q
    })
}

/// `s`-nodes on `[0, t]`: each path cell split geometrically towards its
/// left edge, where the cell integrals have `(s − e)^α` behaviour.
fn s_nodes(edges: &[f64], t: f64) -> Vec<(f64, f64)> {
    const RATIO: f64 = 0.15;
    const DEPTH: usize = 8;
    let g = GaussRule::new(10);
    let mut out = Vec::new();
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1].min(t));
        if a < 0.0 || b <= a {
            continue;
        }
        let len = b - a;
        let mut hi = len;
        for k in 0..=DEPTH {
            let lo = if k == DEPTH { 0.0 } else { hi * RATIO };
            for (x, wt) in g.pairs() {
                out.push((a + lo + (hi - lo) * x, wt * (hi - lo)));
            }
            hi = lo;
        }
    }
    out
}

/// Galerkin coefficients of `f_t` on `grid`: `⟨f_t, φ_i ⊗ φ_j⟩ / (w_i w_j)`
/// for the grid basis `φ_i`, as a second-chaos kernel with weights `w_i`.
pub fn rosenblatt_kernel_discretize(t: f64, spec: &RosenblattSpec, grid: &KernelGrid) -> Result<Chaos2Kernel<f64>> {
    if !(spec.hurst > 0.5 && spec.hurst < 1.0) {
        return Err(WickError::Invalid(format!("Hurst parameter {} outside (1/2, 1)", spec.hurst)));
    }
    if !(t > 0.0 && t <= grid.horizon * (1.0 + 1e-12)) {
        return Err(WickError::Invalid(format!("time {t} outside (0, {}]", grid.horizon)));
    }
    let alpha = spec.hurst / 2.0;
    let n = grid.cells();
    let edges: Vec<f64> = grid.plain_edges().collect();
    let nodes = s_nodes(&edges, t);
    let rule = GaussRule::new(24);
    let g = DMatrix::from_fn(n, nodes.len(), |i, q| {
        let (a, b) = grid.cells[i];
        if i < grid.tail_cells {
            tail_power(nodes[q].0, a, b, alpha, &rule)
        } else {
            cell_power(nodes[q].0, a, b, alpha)
        }
    });
    let mut gw = g.clone();
    for (q, &(_, wt)) in nodes.iter().enumerate() {
        gw.column_mut(q).scale_mut(wt);
    }
    let raw = &g * gw.transpose();
    let w = grid.weights(spec.hurst);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| spec.c_h * raw[(i, j)] / (w[i] * w[j])).collect())
        .collect();
    Chaos2Kernel::new(&rows, w, format!("f_{t}"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub n_grid: usize,
    pub support: f64,
    pub tail_cells: usize,
    pub variance: f64,
    pub bias: f64,
}

/// `2 Tr(A²)` for the discretized kernel against `t^{2H}`, over the given
/// `(n_grid, L, tail cells)` choices.
pub fn kernel_truncation_report(t: f64, spec: &RosenblattSpec, grids: &[(usize, f64, usize)]) -> Result<Vec<TruncationRow>> {
    grids
        .iter()
        .map(|&(n_grid, support, tail_cells)| {
            let grid = KernelGrid::new(t, n_grid, support, tail_cells)?;
            let k = rosenblatt_kernel_discretize(t, spec, &grid)?;
            let variance = 2.0 * k.hs_norm_sq();
            Ok(TruncationRow {
                n_grid,
                support,
                tail_cells,
                variance,
                bias: variance - t.powf(2.0 * spec.hurst),
            })
        })
        .collect()
}

/// Rosenblatt process `X_t` as a cumulant model over `(0, time)` variables.
///
/// Equal-time cumulants use the scaling law from cached `κ_n[X_1]`; pairs
/// use the covariance `(s^{2H} + t^{2H} − |t − s|^{2H})/2`; other mixed
/// times fall back to [`rosenblatt_joint_cumulant`]. Variables without a
/// time are read at `t = 1`. Panics if a requested order exceeds 6.
pub struct RosenblattModel {
    spec: RosenblattSpec,
    unit: RwLock<HashMap<usize, f64>>,
    joint: RwLock<HashMap<Vec<u64>, f64>>,
}

impl RosenblattModel {
    pub fn new(spec: RosenblattSpec) -> Self {
        RosenblattModel {
            spec,
            unit: RwLock::new(HashMap::new()),
            joint: RwLock::new(HashMap::new()),
        }
    }

    pub fn spec(&self) -> &RosenblattSpec {
        &self.spec
    }

    /// `κ_n[X_1]`, computed once per order.
    pub fn unit_cumulant(&self, n: usize) -> Result<f64> {
        match n {
            1 => return Ok(0.0),
            2 => return Ok(1.0),
            _ => {}
        }
        if let Some(v) = self.unit.read().expect("lock").get(&n) {
            return Ok(*v);
        }
        let v = rosenblatt_cumulant(n, 1.0, &self.spec)?.value;
        self.unit.write().expect("lock").insert(n, v);
        Ok(v)
    }
}

impl CumulantModel<f64> for RosenblattModel {
    fn id(&self) -> String {
        format!("rosenblatt:{}", self.spec.hurst)
    }

    fn dim(&self) -> usize {
        1
    }

    fn kappa(&self, vars: &[Variable]) -> f64 {
        let n = vars.len();
        let h = self.spec.hurst;
        let times: Vec<f64> = vars.iter().map(|v| v.time.unwrap_or(1.0)).collect();
        if n == 0 || n == 1 || times.iter().any(|&t| t == 0.0) {
            return 0.0;
        }
        if n == 2 {
            let (s, t) = (times[0], times[1]);
            return 0.5 * (s.powf(2.0 * h) + t.powf(2.0 * h) - (t - s).abs().powf(2.0 * h));
        }
        if times.iter().all(|&t| t == times[0]) {
            let unit = self.unit_cumulant(n).expect("Rosenblatt cumulant quadrature");
            return rosenblatt_cumulant_scaled(n, times[0], h, unit);
        }
        let mut key: Vec<u64> = times.iter().map(|t| t.to_bits()).collect();
        key.sort_unstable();
        if let Some(v) = self.joint.read().expect("lock").get(&key) {
            return *v;
        }
        let v = rosenblatt_joint_cumulant(&times, &self.spec, &QuadratureOptions::joint())
            .expect("Rosenblatt joint cumulant quadrature");
        self.joint.write().expect("lock").insert(key, v);
        v
    }

    fn polynomial_relation_free(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaos2::joint_cumulant_trace;

    #[test]
    fn second_order_integral_matches_closed_form() {
        for h in [0.6, 0.7, 0.8] {
            let e = cyclic_power_integral(h - 1.0, &[1.0, 1.0], &QuadratureOptions::default()).unwrap();
            let exact = 1.0 / (h * (2.0 * h - 1.0));
            assert!(((e.value - exact) / exact).abs() < 1e-10, "H={h}: {e:?}");
        }
    }

    #[test]
    fn mixed_times_second_order() {
        // ∫₀ˢ∫₀ᵗ |x−y|^{2H−2} = (s^{2H} + t^{2H} − |t−s|^{2H}) / (2H(2H−1))
        let h = 0.7;
        let (s, t) = (0.4, 1.0);
        let e = cyclic_power_integral(h - 1.0, &[s, t], &QuadratureOptions::joint()).unwrap();
        let exact = (s.powf(2.0 * h) + t.powf(2.0 * h) - (t - s).powf(2.0 * h)) / (2.0 * h * (2.0 * h - 1.0));
        assert!(((e.value - exact) / exact).abs() < 1e-7, "{e:?} {exact}");
    }

    #[test]
    fn third_cumulant_frozen_value() {
        let e = cyclic_power_integral(-0.3, &[1.0; 3], &QuadratureOptions::default()).unwrap();
        assert!((e.value - 4.9325660615).abs() < 1e-8, "{e:?}");
    }

    #[test]
    fn beta_identity() {
        for h in [0.6, 0.7, 0.8] {
            let a = h / 2.0;
            for (u, v) in [(0.3, 1.0), (2.0, 0.5), (-1.0, 1.5)] {
                let q = beta_identity_quadrature(u, v, a);
                let exact = beta(a, 1.0 - 2.0 * a) * ((u - v) as f64).abs().powf(2.0 * a - 1.0);
                assert!(((q - exact) / exact).abs() < 1e-8, "H={h} ({u},{v}): {q} {exact}");
            }
        }
    }

    #[test]
    fn spec_rejects_bad_hurst() {
        assert!(RosenblattSpec::new(0.4).is_err());
        assert!(RosenblattSpec::new(1.0).is_err());
    }

    #[test]
    fn kernel_is_symmetric_and_tails_remove_truncation_loss() {
        let spec = RosenblattSpec::new(0.7).unwrap();
        let rows = kernel_truncation_report(1.0, &spec, &[(32, 10.0, 0), (32, 100.0, 0), (32, 10.0, 12)]).unwrap();
        for r in &rows {
            assert!(r.variance > 0.0 && r.variance < 1.0, "{r:?}");
        }
        assert!(rows[1].bias.abs() < rows[0].bias.abs());
        assert!(rows[2].bias.abs() < rows[1].bias.abs());
        let grid = KernelGrid::with_defaults(1.0, 32).unwrap();
        let k = rosenblatt_kernel_discretize(1.0, &spec, &grid).unwrap();
        for i in 0..k.n() {
            for j in 0..k.n() {
                assert_eq!(k.entry(i, j), k.entry(j, i));
            }
        }
    }

    #[test]
    fn kernel_variance_converges_at_rate_two_h_minus_one() {
        let h = 0.7;
        let spec = RosenblattSpec::new(h).unwrap();
        let grids: Vec<(usize, f64, usize)> = [32, 64, 128].iter().map(|&n| (n, 10.0, 12)).collect();
        let rows = kernel_truncation_report(1.0, &spec, &grids).unwrap();
        let want = 2f64.powf(-(2.0 * h - 1.0));
        for w in rows.windows(2) {
            let ratio = w[1].bias / w[0].bias;
            assert!((ratio - want).abs() < 0.05, "{ratio} vs {want}: {rows:?}");
        }
    }

    #[test]
    fn third_cumulant_two_routes() {
        let spec = RosenblattSpec::new(0.7).unwrap();
        let quad = rosenblatt_cumulant(3, 1.0, &spec).unwrap().value;
        let grid = KernelGrid::with_defaults(1.0, 128).unwrap();
        let k = rosenblatt_kernel_discretize(1.0, &spec, &grid).unwrap();
        let trace = joint_cumulant_trace(&[&k, &k, &k]).unwrap();
        assert!((trace / quad - 1.0).abs() < 3e-3, "{trace} vs {quad}");
    }

    #[test]
    fn model_scaling_and_covariance() {
        let m = RosenblattModel::new(RosenblattSpec::new(0.7).unwrap());
        let v = |t: f64, n: usize| vec![Variable::at(0, t); n];
        assert!((m.kappa(&v(0.5, 2)) - 0.5f64.powf(1.4)).abs() < 1e-15);
        let k3 = m.kappa(&v(1.0, 3));
        assert!((m.kappa(&v(0.5, 3)) / k3 - 0.5f64.powf(2.1)).abs() < 1e-12);
        let cov = m.kappa(&[Variable::at(0, 0.25), Variable::at(0, 1.0)]);
        assert!((cov - 0.5 * (0.25f64.powf(1.4) + 1.0 - 0.75f64.powf(1.4))).abs() < 1e-15);
    }
}
