//! Time-indexed cumulant models and their time derivatives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chaos2::rosenblatt::RosenblattModel;
use crate::chaos2::{joint_cumulant_trace, Chaos2Kernel};
use crate::combinatorics::{Multiset, Symbol};
use crate::cumulants::{CumulantModel, Variable};
use crate::error::{Result, WickError};
use crate::scalar::Scalar;
use crate::Rational;

/// A cumulant model over `(component, time)` variables on `[0, T]`, with
/// optional closed-form time derivatives.
pub trait ProcessModel: CumulantModel<f64> {
    fn horizon(&self) -> f64 {
        1.0
    }

    /// `∂_{t_last} κ[vars]`, when available in closed form.
    fn d_last(&self, _vars: &[Variable]) -> Option<f64> {
        None
    }

    /// `d/du κ[X^{γ_1}_u, …, X^{γ_n}_u]`, when available in closed form.
    fn d_total(&self, _gamma: &Multiset, _u: f64) -> Option<f64> {
        None
    }
}

impl<M: ProcessModel + ?Sized> ProcessModel for &M {
    fn horizon(&self) -> f64 {
        (**self).horizon()
    }
    fn d_last(&self, vars: &[Variable]) -> Option<f64> {
        (**self).d_last(vars)
    }
    fn d_total(&self, gamma: &Multiset, u: f64) -> Option<f64> {
        (**self).d_total(gamma, u)
    }
}

fn at_time(m: &Multiset, u: f64) -> Vec<Variable> {
    m.items().iter().map(|&c| Variable::at(c, u)).collect()
}

/// Derivative of `f` at `u` with step `h`, central where `[u − 2h, u + 2h]`
/// lies in `[0, T]` and second-order one-sided otherwise. Compares steps `h`
/// and `2h`, and the two one-sided differences, and rejects the result
/// when either pair disagrees.
fn finite_difference(f: impl Fn(f64) -> f64, u: f64, horizon: f64) -> Result<f64> {
    let h = 1e-5 * horizon;
    let d = |h: f64| {
        if u - 2.0 * h >= 0.0 && u + 2.0 * h <= horizon {
            (f(u + h) - f(u - h)) / (2.0 * h)
        } else if u - 2.0 * h < 0.0 {
            (-3.0 * f(u) + 4.0 * f(u + h) - f(u + 2.0 * h)) / (2.0 * h)
        } else {
            (3.0 * f(u) - 4.0 * f(u - h) + f(u - 2.0 * h)) / (2.0 * h)
        }
    };
    let (d1, d2) = (d(h), d(2.0 * h));
    let scale = d1.abs().max(d2.abs()).max(1e-8);
    let interior = u - 2.0 * h >= 0.0 && u + 2.0 * h <= horizon;
    let one_sided = interior && {
        let fwd = (-3.0 * f(u) + 4.0 * f(u + h) - f(u + 2.0 * h)) / (2.0 * h);
        let bwd = (3.0 * f(u) - 4.0 * f(u - h) + f(u - 2.0 * h)) / (2.0 * h);
        (fwd - bwd).abs() > 0.1 * fwd.abs().max(bwd.abs()).max(1e-8)
    };
    if one_sided || (d1 - d2).abs() > 1e-3 * scale {
        return Err(WickError::NonConvergence(format!(
            "cumulant is not numerically C1 at u = {u}: differences {d1} and {d2}"
        )));
    }
    Ok((4.0 * d1 - d2) / 3.0)
}

/// `∂_{|α|+1} κ^{αβ}(u, …, u, u)`.
pub fn last_slot_derivative<M: ProcessModel + ?Sized>(model: &M, alpha: &Multiset, beta: Symbol, u: f64) -> Result<f64> {
    let mut vars = at_time(alpha, u);
    vars.push(Variable::at(beta, u));
    if let Some(v) = model.d_last(&vars) {
        return Ok(v);
    }
    finite_difference(
        |v| {
            let mut vs = at_time(alpha, u);
            vs.push(Variable::at(beta, v));
            model.kappa(&vs)
        },
        u,
        model.horizon(),
    )
}

/// `d/du κ^γ(u)`.
pub fn total_derivative<M: ProcessModel + ?Sized>(model: &M, gamma: &Multiset, u: f64) -> Result<f64> {
    if let Some(v) = model.d_total(gamma, u) {
        return Ok(v);
    }
    finite_difference(|t| model.kappa(&at_time(gamma, t)), u, model.horizon())
}

/// `d` independent fractional Brownian motions with Hurst parameter `H`.
#[derive(Clone, Debug, PartialEq)]
pub struct FbmModel {
    pub hurst: f64,
    pub dim: usize,
    pub horizon: f64,
}

impl FbmModel {
    pub fn new(hurst: f64) -> Result<Self> {
        Self::with_dim(hurst, 1)
    }

    pub fn with_dim(hurst: f64, dim: usize) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(WickError::Invalid(format!("Hurst parameter {hurst} outside (0, 1)")));
        }
        Ok(FbmModel { hurst, dim, horizon: 1.0 })
    }

    /// `½(s^{2H} + t^{2H} − |t − s|^{2H})`.
    pub fn covariance(&self, s: f64, t: f64) -> f64 {
        let h2 = 2.0 * self.hurst;
        0.5 * (s.abs().powf(h2) + t.abs().powf(h2) - (t - s).abs().powf(h2))
    }
}

impl CumulantModel<f64> for FbmModel {
    fn id(&self) -> String {
        if self.dim == 1 {
            format!("fbm:{}", self.hurst)
        } else {
            format!("fbm:{}x{}", self.hurst, self.dim)
        }
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn kappa(&self, vars: &[Variable]) -> f64 {
        match vars {
            [a, b] if a.component == b.component => self.covariance(a.time.unwrap_or(1.0), b.time.unwrap_or(1.0)),
            _ => 0.0,
        }
    }
    fn max_order(&self) -> Option<usize> {
        Some(2)
    }
}

impl ProcessModel for FbmModel {
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn d_last(&self, vars: &[Variable]) -> Option<f64> {
        Some(match vars {
            [a, b] if a.component == b.component => {
                let (s, t) = (a.time.unwrap_or(1.0), b.time.unwrap_or(1.0));
                let q = 2.0 * self.hurst - 1.0;
                let cross = if t == s { 0.0 } else { (t - s).signum() * (t - s).abs().powf(q) };
                self.hurst * (t.abs().powf(q) - cross)
            }
            _ => 0.0,
        })
    }
    fn d_total(&self, gamma: &Multiset, u: f64) -> Option<f64> {
        Some(match gamma.items() {
            [a, b] if a == b => 2.0 * self.hurst * u.powf(2.0 * self.hurst - 1.0),
            _ => 0.0,
        })
    }
}

/// Equal-time derivatives follow from `κ_n[X_t] = t^{nH} κ_n[X_1]`; second
/// order uses the covariance at any pair of times.
impl ProcessModel for RosenblattModel {
    fn d_last(&self, vars: &[Variable]) -> Option<f64> {
        let h = self.spec().hurst;
        let times: Vec<f64> = vars.iter().map(|v| v.time.unwrap_or(1.0)).collect();
        let n = times.len();
        if n == 2 {
            let (s, t) = (times[0], times[1]);
            let cross = if t == s { 0.0 } else { (t - s).signum() * (t - s).abs().powf(2.0 * h - 1.0) };
            return Some(h * (t.powf(2.0 * h - 1.0) - cross));
        }
        if n < 2 {
            return Some(0.0);
        }
        if times.iter().all(|&t| t == times[0]) {
            let k = self.unit_cumulant(n).ok()?;
            return Some(h * times[0].powf(n as f64 * h - 1.0) * k);
        }
        None
    }

    fn d_total(&self, gamma: &Multiset, u: f64) -> Option<f64> {
        let n = gamma.len();
        if n < 2 {
            return Some(0.0);
        }
        let h = self.spec().hurst;
        let k = self.unit_cumulant(n).ok()?;
        Some(n as f64 * h * u.powf(n as f64 * h - 1.0) * k)
    }
}

/// Time profile `a(t) = Σ c t^e`.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile(pub Vec<(f64, f64)>);

impl Profile {
    pub fn value(&self, t: f64) -> f64 {
        self.0.iter().map(|&(c, e)| c * t.powf(e)).sum()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.0
            .iter()
            .filter(|&&(_, e)| e != 0.0)
            .map(|&(c, e)| c * e * t.powf(e - 1.0))
            .sum()
    }
}

/// Exchangeable Gaussian vector process
/// `X^α_t = Σ_k φ_k(t) (√c Z_{0k} + √(1−c) Z_{αk})`, so that
/// `κ^{αβ}(s, t) = (c + (1−c)δ_{αβ}) Σ_k φ_k(s) φ_k(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExchangeableGaussian {
    pub dim: usize,
    pub correlation: f64,
    pub profiles: Vec<Profile>,
}

impl ExchangeableGaussian {
    /// Random profiles `φ_k(t) = a t^{e}` with `e ≥ 1/2`, `a ∈ (−1, 1)`.
    pub fn random(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let profiles = (0..3)
            .map(|_| Profile(vec![(rng.gen_range(-1.0..1.0), rng.gen_range(0.5..2.5))]))
            .collect();
        ExchangeableGaussian {
            dim,
            correlation: rng.gen_range(0.1..0.9),
            profiles,
        }
    }

    fn weight(&self, a: Symbol, b: Symbol) -> f64 {
        if a == b {
            1.0
        } else {
            self.correlation
        }
    }

    fn gram(&self, s: f64, t: f64) -> f64 {
        self.profiles.iter().map(|p| p.value(s) * p.value(t)).sum()
    }

    fn gram_dt(&self, s: f64, t: f64) -> f64 {
        self.profiles.iter().map(|p| p.value(s) * p.derivative(t)).sum()
    }

    /// `dσ²/du`, the rate of the common variance.
    pub fn variance_rate(&self, u: f64) -> f64 {
        2.0 * self.gram_dt(u, u)
    }

    /// `dρ/du`, the rate of the common off-diagonal covariance.
    pub fn covariance_rate(&self, u: f64) -> f64 {
        2.0 * self.correlation * self.gram_dt(u, u)
    }
}

impl CumulantModel<f64> for ExchangeableGaussian {
    fn id(&self) -> String {
        format!("exchangeable-gaussian:{}", self.dim)
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn kappa(&self, vars: &[Variable]) -> f64 {
        match vars {
            [a, b] => self.weight(a.component, b.component) * self.gram(a.time.unwrap_or(1.0), b.time.unwrap_or(1.0)),
            _ => 0.0,
        }
    }
    fn max_order(&self) -> Option<usize> {
        Some(2)
    }
    fn polynomial_relation_free(&self) -> bool {
        self.correlation < 1.0
    }
}

impl ProcessModel for ExchangeableGaussian {
    fn d_last(&self, vars: &[Variable]) -> Option<f64> {
        Some(match vars {
            [a, b] => self.weight(a.component, b.component) * self.gram_dt(a.time.unwrap_or(1.0), b.time.unwrap_or(1.0)),
            _ => 0.0,
        })
    }
    fn d_total(&self, gamma: &Multiset, u: f64) -> Option<f64> {
        Some(match gamma.items() {
            [a, b] => 2.0 * self.weight(*a, *b) * self.gram_dt(u, u),
            _ => 0.0,
        })
    }
}

/// Finite-rank second-chaos process `X^β_t = ℐ²(Σ_k a_{βk}(t) K_{βk})`.
#[derive(Clone, Debug)]
pub struct Chaos2Process {
    id: String,
    components: Vec<Vec<(Chaos2Kernel<f64>, Profile)>>,
    horizon: f64,
}

impl Chaos2Process {
    pub fn new(id: impl Into<String>, components: Vec<Vec<(Chaos2Kernel<f64>, Profile)>>) -> Result<Self> {
        let first = components
            .iter()
            .flatten()
            .next()
            .ok_or_else(|| WickError::Invalid("process needs at least one kernel".into()))?;
        for (k, _) in components.iter().flatten() {
            first.0.check_grid(k)?;
        }
        Ok(Chaos2Process {
            id: id.into(),
            components,
            horizon: 1.0,
        })
    }

    /// Random process on `n` grid points with unit weights: each component
    /// has two kernels with profiles `t^{e}`, `e ∈ [1/2, 2]`. With
    /// `independent`, components use disjoint grid blocks.
    pub fn random(dim: usize, n: usize, independent: bool, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total = if independent { n * dim } else { n };
        let mut components = Vec::with_capacity(dim);
        for beta in 0..dim {
            let offset = if independent { beta * n } else { 0 };
            let mut kernels = Vec::new();
            for _ in 0..2 {
                let mut rows = vec![vec![0.0; total]; total];
                for i in 0..n {
                    for j in 0..=i {
                        let v = rng.gen_range(-0.5..0.5);
                        rows[offset + i][offset + j] = v;
                        rows[offset + j][offset + i] = v;
                    }
                }
                let k = Chaos2Kernel::new(&rows, vec![1.0; total], format!("K{beta}"))?;
                kernels.push((k, Profile(vec![(1.0, rng.gen_range(0.5..2.0))])));
            }
            components.push(kernels);
        }
        Self::new(format!("chaos2-process:{dim}x{n}:{seed}"), components)
    }

    /// Kernel of `X^β_t`.
    pub fn kernel(&self, beta: Symbol, t: f64) -> Chaos2Kernel<f64> {
        self.combine(beta, |p| p.value(t))
    }

    fn combine(&self, beta: Symbol, coef: impl Fn(&Profile) -> f64) -> Chaos2Kernel<f64> {
        let parts = &self.components[beta as usize];
        let n = parts[0].0.n();
        let mut m = vec![0.0; n * n];
        for (k, p) in parts {
            let c = coef(p);
            for (x, y) in m.iter_mut().zip(k.matrix()) {
                *x += c * y;
            }
        }
        Chaos2Kernel::symmetrized(n, &m, parts[0].0.weights().to_vec(), format!("X{beta}"))
    }

    fn trace(&self, kernels: &[Chaos2Kernel<f64>]) -> f64 {
        let refs: Vec<&Chaos2Kernel<f64>> = kernels.iter().collect();
        joint_cumulant_trace(&refs).expect("kernels share a grid and the order is within the cap")
    }
}

impl CumulantModel<f64> for Chaos2Process {
    fn id(&self) -> String {
        self.id.clone()
    }
    fn dim(&self) -> usize {
        self.components.len()
    }
    fn kappa(&self, vars: &[Variable]) -> f64 {
        let ks: Vec<Chaos2Kernel<f64>> = vars
            .iter()
            .map(|v| self.kernel(v.component, v.time.unwrap_or(1.0)))
            .collect();
        self.trace(&ks)
    }
}

impl ProcessModel for Chaos2Process {
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn d_last(&self, vars: &[Variable]) -> Option<f64> {
        let n = vars.len();
        let mut ks: Vec<Chaos2Kernel<f64>> = vars[..n - 1]
            .iter()
            .map(|v| self.kernel(v.component, v.time.unwrap_or(1.0)))
            .collect();
        let last = vars[n - 1];
        let t = last.time.unwrap_or(1.0);
        ks.push(self.combine(last.component, |p| p.derivative(t)));
        Some(self.trace(&ks))
    }
    fn d_total(&self, gamma: &Multiset, u: f64) -> Option<f64> {
        let items = gamma.items();
        let mut total = 0.0;
        for i in 0..items.len() {
            let ks: Vec<Chaos2Kernel<f64>> = items
                .iter()
                .enumerate()
                .map(|(j, &c)| {
                    if j == i {
                        self.combine(c, |p| p.derivative(u))
                    } else {
                        self.kernel(c, u)
                    }
                })
                .collect();
            total += self.trace(&ks);
        }
        Some(total)
    }
}

/// Increment process `Y_t = X_t − X_s` for a fixed base time `s`.
pub struct IncrementModel<M> {
    pub inner: M,
    pub base: f64,
}

impl<M> IncrementModel<M> {
    pub fn new(inner: M, base: f64) -> Self {
        IncrementModel { inner, base }
    }

    /// Multilinear expansion over the slots moved to the base time.
    fn expand<T: Scalar>(&self, vars: &[Variable], fixed_last: bool, mut f: impl FnMut(&[Variable]) -> T) -> T {
        let n = vars.len();
        let free = if fixed_last { n - 1 } else { n };
        let mut total = T::zero();
        for mask in 0u32..(1 << free) {
            let vs: Vec<Variable> = vars
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    if i < free && mask >> i & 1 == 1 {
                        Variable::at(v.component, self.base)
                    } else {
                        *v
                    }
                })
                .collect();
            let term = f(&vs);
            if mask.count_ones() % 2 == 1 {
                total = total - term;
            } else {
                total = total + term;
            }
        }
        total
    }
}

impl<T: Scalar, M: CumulantModel<T>> CumulantModel<T> for IncrementModel<M> {
    fn id(&self) -> String {
        format!("{}-from-{}", self.inner.id(), self.base)
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn kappa(&self, vars: &[Variable]) -> T {
        let vars: Vec<Variable> = vars.iter().map(|v| Variable::at(v.component, v.time.unwrap_or(1.0))).collect();
        self.expand(&vars, false, |vs| self.inner.kappa(vs))
    }
    fn polynomial_relation_free(&self) -> bool {
        self.inner.polynomial_relation_free()
    }
    fn max_order(&self) -> Option<usize> {
        self.inner.max_order()
    }
    fn names(&self) -> Vec<String> {
        self.inner.names()
    }
}

impl<M: ProcessModel> ProcessModel for IncrementModel<M> {
    fn horizon(&self) -> f64 {
        self.inner.horizon()
    }
    fn d_last(&self, vars: &[Variable]) -> Option<f64> {
        let vars: Vec<Variable> = vars.iter().map(|v| Variable::at(v.component, v.time.unwrap_or(1.0))).collect();
        let mut ok = true;
        let v = self.expand(&vars, true, |vs| match self.inner.d_last(vs) {
            Some(d) => d,
            None => {
                ok = false;
                0.0
            }
        });
        ok.then_some(v)
    }
}

/// Law of `X_t` at a fixed time, as a static model over components.
pub struct AtTime<M> {
    pub inner: M,
    pub time: f64,
}

impl<T: Scalar, M: CumulantModel<T>> CumulantModel<T> for AtTime<M> {
    fn id(&self) -> String {
        format!("{}@{}", self.inner.id(), self.time)
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn kappa(&self, vars: &[Variable]) -> T {
        let vs: Vec<Variable> = vars
            .iter()
            .map(|v| Variable::at(v.component, v.time.unwrap_or(self.time)))
            .collect();
        self.inner.kappa(&vs)
    }
    fn polynomial_relation_free(&self) -> bool {
        self.inner.polynomial_relation_free()
    }
    fn max_order(&self) -> Option<usize> {
        self.inner.max_order()
    }
    fn names(&self) -> Vec<String> {
        self.inner.names()
    }
}

/// Adds a deterministic mean `μ^β(t)` to a model.
pub struct WithMean<T, M> {
    pub inner: M,
    #[allow(clippy::type_complexity)]
    pub mean: Box<dyn Fn(Symbol, f64) -> T + Send + Sync>,
}

impl<T: Scalar, M: CumulantModel<T>> CumulantModel<T> for WithMean<T, M> {
    fn id(&self) -> String {
        format!("{}+mean", self.inner.id())
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn kappa(&self, vars: &[Variable]) -> T {
        let k = self.inner.kappa(vars);
        match vars {
            [v] => k + (self.mean)(v.component, v.time.unwrap_or(1.0)),
            _ => k,
        }
    }
    fn polynomial_relation_free(&self) -> bool {
        self.inner.polynomial_relation_free()
    }
    fn names(&self) -> Vec<String> {
        self.inner.names()
    }
}

/// Reads a double-valued model exactly as rationals.
pub struct Exactify<M>(pub M);

impl<M: CumulantModel<f64>> CumulantModel<Rational> for Exactify<M> {
    fn id(&self) -> String {
        self.0.id()
    }
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn kappa(&self, vars: &[Variable]) -> Rational {
        Rational::real(self.0.kappa(vars))
    }
    fn rational_exact(&self) -> bool {
        false
    }
    fn polynomial_relation_free(&self) -> bool {
        self.0.polynomial_relation_free()
    }
    fn max_order(&self) -> Option<usize> {
        self.0.max_order()
    }
    fn names(&self) -> Vec<String> {
        self.0.names()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ms(v: &[Symbol]) -> Multiset {
        Multiset::new(v.iter().copied())
    }

    #[test]
    fn fbm_derivatives_match_finite_differences() {
        let m = FbmModel::new(0.7).unwrap();
        for u in [0.2, 0.5, 0.9] {
            let a = last_slot_derivative(&m, &ms(&[0]), 0, u).unwrap();
            assert!((a - 0.7 * u.powf(0.4)).abs() < 1e-14);
            let fd = finite_difference(|v| m.covariance(u, v), u, 1.0).unwrap();
            assert!((a - fd).abs() < 1e-6, "{a} {fd}");
            let tot = total_derivative(&m, &ms(&[0, 0]), u).unwrap();
            assert!((tot - 2.0 * a).abs() < 1e-14);
        }
    }

    #[test]
    fn chaos2_process_derivatives_match_finite_differences() {
        let p = Chaos2Process::random(2, 3, false, 5).unwrap();
        let u = 0.6;
        for alpha in [ms(&[0]), ms(&[0, 1]), ms(&[1, 1])] {
            let mut vars = at_time(&alpha, u);
            vars.push(Variable::at(1, u));
            let analytic = p.d_last(&vars).unwrap();
            let fd = finite_difference(
                |v| {
                    let mut vs = at_time(&alpha, u);
                    vs.push(Variable::at(1, v));
                    p.kappa(&vs)
                },
                u,
                1.0,
            )
            .unwrap();
            assert!((analytic - fd).abs() < 1e-6 * analytic.abs().max(1.0), "{alpha:?}: {analytic} {fd}");
        }
        let g = ms(&[0, 0, 1]);
        let analytic = p.d_total(&g, u).unwrap();
        let fd = finite_difference(|t| p.kappa(&at_time(&g, t)), u, 1.0).unwrap();
        assert!((analytic - fd).abs() < 1e-6 * analytic.abs().max(1.0));
    }

    #[test]
    fn finite_difference_flags_kinks() {
        assert!(finite_difference(|t| (t - 0.5).abs(), 0.5, 1.0).is_err());
        let d = finite_difference(|t| t * t, 0.0, 1.0).unwrap();
        assert!(d.abs() < 1e-9);
    }

    #[test]
    fn increment_model_covariance() {
        let m = FbmModel::new(0.7).unwrap();
        let y = IncrementModel::new(m.clone(), 0.3);
        let (a, b) = (0.5, 0.8);
        let want = m.covariance(a, b) - m.covariance(0.3, b) - m.covariance(a, 0.3) + m.covariance(0.3, 0.3);
        let got: f64 = y.kappa(&[Variable::at(0, a), Variable::at(0, b)]);
        assert!((got - want).abs() < 1e-15);
        let d = y.d_last(&[Variable::at(0, a), Variable::at(0, a)]).unwrap();
        let fd = finite_difference(|v| y.kappa(&[Variable::at(0, a), Variable::at(0, v)]), a, 1.0).unwrap();
        assert!((d - fd).abs() < 1e-6);
    }

    #[test]
    fn exchangeable_rates() {
        let m = ExchangeableGaussian::random(3, 4);
        let u = 0.4;
        let fd = finite_difference(|t| m.kappa(&[Variable::at(0, t), Variable::at(1, t)]), u, 1.0).unwrap();
        assert!((m.covariance_rate(u) - fd).abs() < 1e-6);
        let fd = finite_difference(|t| m.kappa(&[Variable::at(2, t), Variable::at(2, t)]), u, 1.0).unwrap();
        assert!((m.variance_rate(u) - fd).abs() < 1e-6);
    }
}
