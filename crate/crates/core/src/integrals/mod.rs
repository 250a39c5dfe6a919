//! Left-point Wick and Young sums along sample paths, and the Itô-type
//! correction formulas relating them.

mod process;

pub use process::*;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::appell::{differentiate, AppellEngine, Basis, WickPolynomial};
use crate::chaos2::rosenblatt::RosenblattModel;
use crate::combinatorics::{Multiset, Symbol};
use crate::cumulants::{moment, CumulantModel, Variable};
use crate::error::{Result, WickError};
use crate::scalar::Scalar;
use crate::FloatPoly;

/// Values of `X_t` on a strictly increasing time grid in `[0, T]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePath<T> {
    times: Vec<f64>,
    values: Vec<Vec<T>>,
}

impl<T: Scalar> SamplePath<T> {
    pub fn new(times: Vec<f64>, values: Vec<Vec<T>>) -> Result<Self> {
        if times.is_empty() {
            return Err(WickError::Invalid("empty time grid".into()));
        }
        if times.len() != values.len() {
            return Err(WickError::Invalid(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) || times[0] < 0.0 {
            return Err(WickError::Invalid("times must be finite and non-negative".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(WickError::Invalid("times must be strictly increasing".into()));
        }
        let d = values[0].len();
        if d == 0 || values.iter().any(|v| v.len() != d) {
            return Err(WickError::Invalid("every time needs a value of the same dimension".into()));
        }
        if values.iter().flatten().any(|x| !x.approx().is_finite()) {
            return Err(WickError::Invalid("path values must be finite".into()));
        }
        Ok(SamplePath { times, values })
    }

    pub fn scalar(times: Vec<f64>, xs: Vec<T>) -> Result<Self> {
        Self::new(times, xs.into_iter().map(|x| vec![x]).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<T>] {
        &self.values
    }

    pub fn value(&self, k: usize) -> &[T] {
        &self.values[k]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    /// Largest step of the grid (0 for a single point).
    pub fn mesh(&self) -> f64 {
        self.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Keeps every `factor`-th point; the endpoints are preserved.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || (self.len() - 1) % factor != 0 {
            return Err(WickError::GridMismatch(format!(
                "{} points cannot be coarsened by {factor}",
                self.len()
            )));
        }
        Ok(SamplePath {
            times: self.times.iter().step_by(factor).copied().collect(),
            values: self.values.iter().step_by(factor).cloned().collect(),
        })
    }

    /// `X_{s,t} = X_t − X_s` with `s` the first grid time.
    pub fn relative_to_start(&self) -> Self {
        let x0 = self.values[0].clone();
        SamplePath {
            times: self.times.clone(),
            values: self
                .values
                .iter()
                .map(|v| v.iter().zip(&x0).map(|(a, b)| a.clone() - b.clone()).collect())
                .collect(),
        }
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> SamplePath<U> {
        SamplePath {
            times: self.times.clone(),
            values: self.values.iter().map(|v| v.iter().map(&f).collect()).collect(),
        }
    }
}

type DynamicIntegrand<'a, T> = Box<dyn Fn(f64) -> Result<Vec<WickPolynomial<T>>> + Send + Sync + 'a>;

/// One-form `(p_β)_β` of monomial-basis polynomials, optionally depending
/// on time.
pub enum Integrand<'a, T> {
    Fixed(Vec<WickPolynomial<T>>),
    Dynamic(DynamicIntegrand<'a, T>),
}

impl<'a, T: Scalar> Integrand<'a, T> {
    pub fn scalar(p: WickPolynomial<T>) -> Self {
        Integrand::Fixed(vec![p])
    }

    pub fn dynamic(f: impl Fn(f64) -> Result<Vec<WickPolynomial<T>>> + Send + Sync + 'a) -> Self {
        Integrand::Dynamic(Box::new(f))
    }

    pub fn at(&self, u: f64) -> Result<Vec<WickPolynomial<T>>> {
        let ps = match self {
            Integrand::Fixed(ps) => ps.clone(),
            Integrand::Dynamic(f) => f(u)?,
        };
        if ps.iter().any(|p| p.basis() != Basis::Monomial) {
            return Err(WickError::Invalid("integrands must be given in the monomial basis".into()));
        }
        Ok(ps)
    }
}

fn check_dim(ps: &[impl Sized], d: usize) -> Result<()> {
    if ps.len() != d {
        return Err(WickError::Invalid(format!(
            "integrand has {} components, process has {d}",
            ps.len()
        )));
    }
    Ok(())
}

fn check_relation_free<T: Scalar, M: CumulantModel<T> + ?Sized>(model: &M) -> Result<()> {
    if !model.polynomial_relation_free() {
        return Err(WickError::NotWellDefined { model: model.id() });
    }
    Ok(())
}

fn check_grid<T>(times: &[f64], path: &SamplePath<T>) -> Result<()> {
    if times != path.times.as_slice() {
        return Err(WickError::GridMismatch("path grid differs from the plan grid".into()));
    }
    Ok(())
}

fn exceeds(order: usize, max: Option<usize>) -> bool {
    max.is_some_and(|m| order > m)
}

fn vars_at(items: &[Symbol], u: f64) -> Vec<Variable> {
    items.iter().map(|&c| Variable::at(c, u)).collect()
}

/// `κ[X^{α_1}_u, …, X^{α_m}_u, X^β_{u,v}]` via `κ[…, X^β_v] − κ[…, X^β_u]`.
fn increment_kappa<T: Scalar, M: CumulantModel<T> + ?Sized>(model: &M, alpha: &[Symbol], beta: Symbol, u: f64, v: f64) -> T {
    let mut vars = vars_at(alpha, u);
    vars.push(Variable::at(beta, v));
    let at_v = model.kappa(&vars);
    *vars.last_mut().expect("nonempty") = Variable::at(beta, u);
    at_v - model.kappa(&vars)
}

/// `Σ_{∅≠A} X_u^{γ∖A} κ[X_u^{A}, X^β_{u,v}]` summed over subsets `A` of
/// factor positions of each monomial `x^γ` of `p_β`.
fn reverse_product_correction<T: Scalar, M: CumulantModel<T> + ?Sized>(
    ps: &[WickPolynomial<T>],
    model: &M,
    u: f64,
    v: f64,
) -> Result<WickPolynomial<T>> {
    let mut out = WickPolynomial::zero();
    if u == v {
        return Ok(out);
    }
    let max = model.max_order();
    for (beta, p) in ps.iter().enumerate() {
        let mut memo: HashMap<Multiset, T> = HashMap::new();
        for (gamma, c) in p.terms() {
            let items = gamma.items();
            let n = items.len();
            if n > 24 {
                return Err(WickError::CapExceeded { size: n, cap: 24 });
            }
            for mask in 1u32..(1 << n) {
                if exceeds(mask.count_ones() as usize + 1, max) {
                    continue;
                }
                let (mut alpha, mut rest) = (Vec::new(), Vec::new());
                for (i, &s) in items.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        alpha.push(s);
                    } else {
                        rest.push(s);
                    }
                }
                let key = Multiset::new(alpha.iter().copied());
                let k = memo
                    .entry(key)
                    .or_insert_with(|| increment_kappa(model, &alpha, beta as Symbol, u, v))
                    .clone();
                if !k.is_zero() {
                    out.add_term(Multiset::new(rest), c.clone() * k);
                }
            }
        }
    }
    Ok(out)
}

fn derivative_multisets<T: Scalar>(p: &WickPolynomial<T>, min: usize, max: Option<usize>) -> BTreeSet<Multiset> {
    p.terms()
        .flat_map(|(g, _)| g.submultisets())
        .filter(|a| a.len() >= min && !exceeds(a.len(), max))
        .collect()
}

/// `Σ_{α≠∅} (1/α!) ∂_α p_β(x) Δκ^{αβ}(u; u, v)`.
fn derivative_form_correction<T: Scalar, M: CumulantModel<T> + ?Sized>(
    ps: &[WickPolynomial<T>],
    model: &M,
    u: f64,
    v: f64,
) -> Result<WickPolynomial<T>> {
    let mut out = WickPolynomial::zero();
    if u == v {
        return Ok(out);
    }
    let max = model.max_order().map(|m| m.saturating_sub(1));
    for (beta, p) in ps.iter().enumerate() {
        for alpha in derivative_multisets(p, 1, max) {
            let k = increment_kappa(model, alpha.items(), beta as Symbol, u, v);
            if !k.is_zero() {
                out = out.add(&differentiate(p, &alpha).scale(&k))?;
            }
        }
    }
    Ok(out)
}

/// Young, correction and Wick parts of a left-point sum.
#[derive(Clone, Debug, PartialEq)]
pub struct RiemannSums<T> {
    pub young: T,
    pub correction: T,
    pub wick: T,
}

/// Path-independent data of the left-point Wick sum on a fixed grid: the
/// integrand at each left endpoint and the polynomial `q_k` with
/// `p_β(X_u) ⋄ X^β_{u,v} = p_β(X_u) X^β_{u,v} − q_k(X_u)`.
#[derive(Clone, Debug)]
pub struct WickSumPlan<T> {
    times: Vec<f64>,
    integrand: Vec<Vec<WickPolynomial<T>>>,
    correction: Vec<WickPolynomial<T>>,
}

impl<T: Scalar> WickSumPlan<T> {
    /// Expands each summand with the reverse product formula.
    pub fn new<M: CumulantModel<T> + ?Sized>(integrand: &Integrand<T>, model: &M, times: &[f64]) -> Result<Self> {
        Self::build(integrand, model, times, reverse_product_correction)
    }

    /// Same sum with the correction written as `(1/α!) ∂_α p_β Δκ^{αβ}`.
    pub fn derivative_form<M: CumulantModel<T> + ?Sized>(integrand: &Integrand<T>, model: &M, times: &[f64]) -> Result<Self> {
        Self::build(integrand, model, times, derivative_form_correction)
    }

    fn build<M: CumulantModel<T> + ?Sized>(
        integrand: &Integrand<T>,
        model: &M,
        times: &[f64],
        step: fn(&[WickPolynomial<T>], &M, f64, f64) -> Result<WickPolynomial<T>>,
    ) -> Result<Self> {
        if times.is_empty() {
            return Err(WickError::Invalid("empty time grid".into()));
        }
        check_relation_free(model)?;
        let mut ps = Vec::with_capacity(times.len().saturating_sub(1));
        let mut qs = Vec::with_capacity(times.len().saturating_sub(1));
        for w in times.windows(2) {
            let p = integrand.at(w[0])?;
            check_dim(&p, model.dim())?;
            qs.push(step(&p, model, w[0], w[1])?);
            ps.push(p);
        }
        Ok(WickSumPlan {
            times: times.to_vec(),
            integrand: ps,
            correction: qs,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `q_k` for each interval.
    pub fn corrections(&self) -> &[WickPolynomial<T>] {
        &self.correction
    }

    pub fn evaluate(&self, path: &SamplePath<T>) -> Result<RiemannSums<T>> {
        check_grid(&self.times, path)?;
        let (mut young, mut correction) = (T::zero(), T::zero());
        for (k, (ps, q)) in self.integrand.iter().zip(&self.correction).enumerate() {
            let (xu, xv) = (path.value(k), path.value(k + 1));
            for (beta, p) in ps.iter().enumerate() {
                young = young + p.eval(xu)? * (xv[beta].clone() - xu[beta].clone());
            }
            correction = correction + q.eval(xu)?;
        }
        Ok(RiemannSums {
            wick: young.clone() - correction.clone(),
            young,
            correction,
        })
    }
}

/// `Σ_{[u,v]} Σ_β p_β(X_u) X^β_{u,v}`.
pub fn young_integral<T: Scalar>(integrand: &Integrand<T>, path: &SamplePath<T>) -> Result<T> {
    let mut acc = T::zero();
    for k in 0..path.len() - 1 {
        let ps = integrand.at(path.times[k])?;
        check_dim(&ps, path.dim())?;
        let (xu, xv) = (path.value(k), path.value(k + 1));
        for (beta, p) in ps.iter().enumerate() {
            acc = acc + p.eval(xu)? * (xv[beta].clone() - xu[beta].clone());
        }
    }
    Ok(acc)
}

/// `Σ_{[u,v]} Σ_β p_β(X_u) ⋄ X^β_{u,v}`.
pub fn wick_riemann_sum<T: Scalar, M: CumulantModel<T> + ?Sized>(
    integrand: &Integrand<T>,
    path: &SamplePath<T>,
    model: &M,
) -> Result<T> {
    Ok(WickSumPlan::new(integrand, model, path.times())?.evaluate(path)?.wick)
}

/// Discretized Itô–Stratonovich correction
/// `Σ_{[u,v]} Σ_{α≠∅} (1/α!) ∂_α p_β(X_u) (κ^{αβ}(u,…,u,v) − κ^{αβ}(u,…,u,u))`.
pub fn discrete_correction<T: Scalar, M: CumulantModel<T> + ?Sized>(
    integrand: &Integrand<T>,
    path: &SamplePath<T>,
    model: &M,
) -> Result<T> {
    Ok(WickSumPlan::derivative_form(integrand, model, path.times())?
        .evaluate(path)?
        .correction)
}

/// `Σ_{[u,v]} Σ_β p_β(X_u) (μ^β(v) − μ^β(u))`.
pub fn drift_sum<T: Scalar>(integrand: &Integrand<T>, path: &SamplePath<T>, mean: impl Fn(Symbol, f64) -> T) -> Result<T> {
    let mut acc = T::zero();
    let t = path.times();
    for k in 0..path.len() - 1 {
        let ps = integrand.at(t[k])?;
        check_dim(&ps, path.dim())?;
        for (beta, p) in ps.iter().enumerate() {
            let b = beta as Symbol;
            acc = acc + p.eval(path.value(k))? * (mean(b, t[k + 1]) - mean(b, t[k]));
        }
    }
    Ok(acc)
}

/// `(∂_β p)_β`.
pub fn gradient<T: Scalar>(p: &WickPolynomial<T>, d: usize) -> Vec<WickPolynomial<T>> {
    (0..d).map(|b| differentiate(p, &Multiset::repeat(b as Symbol, 1))).collect()
}

/// `Σ_{[u,v]} Σ_{|γ|≥2} (1/γ!) ∂_γ p(X_u) (κ^γ(v) − κ^γ(u))`.
pub fn discrete_ito_correction<T: Scalar, M: CumulantModel<T> + ?Sized>(
    p: &WickPolynomial<T>,
    path: &SamplePath<T>,
    model: &M,
) -> Result<T> {
    let gammas = derivative_multisets(p, 2, model.max_order());
    let t = path.times();
    let mut acc = T::zero();
    for k in 0..path.len() - 1 {
        for g in &gammas {
            let dk = model.kappa(&vars_at(g.items(), t[k + 1])) - model.kappa(&vars_at(g.items(), t[k]));
            if !dk.is_zero() {
                acc = acc + differentiate(p, g).eval(path.value(k))? * dk;
            }
        }
    }
    Ok(acc)
}

/// `p(X)_{s,t} − Σ ∂_β p(X_u) ⋄ X^β_{u,v} − Σ_{|γ|≥2} (1/γ!) ∂_γ p(X_u) Δκ^γ`
/// on the path grid.
pub fn ito_residual<T: Scalar, M: CumulantModel<T> + ?Sized>(p: &WickPolynomial<T>, path: &SamplePath<T>, model: &M) -> Result<T> {
    let grad = Integrand::Fixed(gradient(p, path.dim()));
    let wick = wick_riemann_sum(&grad, path, model)?;
    let corr = discrete_ito_correction(p, path, model)?;
    let inc = p.eval(path.value(path.len() - 1))? - p.eval(path.value(0))?;
    Ok(inc - wick - corr)
}

/// One term `(1/α!) ∫ ∂_α p_β(X_u) κ^{αβ}(u,…,u,du)` of the
/// Itô–Stratonovich correction.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectionTerm {
    pub alpha: Multiset,
    pub beta: Symbol,
    pub weight: f64,
}

/// Terms with nonzero `∂_α p_β`; orders `|α| + 1` above the model's
/// `max_order` are omitted.
pub fn correction_terms<T: Scalar>(ps: &[WickPolynomial<T>], max_order: Option<usize>) -> Vec<CorrectionTerm> {
    let max = max_order.map(|m| m.saturating_sub(1));
    let mut out = Vec::new();
    for (beta, p) in ps.iter().enumerate() {
        for alpha in derivative_multisets(p, 1, max) {
            out.push(CorrectionTerm {
                weight: 1.0 / alpha.factorial() as f64,
                alpha,
                beta: beta as Symbol,
            });
        }
    }
    out
}

fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1]))
        .sum()
}

/// Path-independent data of a correction integral `∫ r_u(X_u) du` on a
/// grid: the polynomial `r_u` at each grid time, for trapezoid quadrature.
#[derive(Clone, Debug)]
pub struct CorrectionPlan {
    times: Vec<f64>,
    polys: Vec<FloatPoly>,
}

impl CorrectionPlan {
    fn build(times: &[f64], mut at: impl FnMut(f64) -> Result<FloatPoly>) -> Result<Self> {
        if times.is_empty() {
            return Err(WickError::Invalid("empty time grid".into()));
        }
        let polys = times.iter().map(|&u| at(u)).collect::<Result<Vec<_>>>()?;
        Ok(CorrectionPlan {
            times: times.to_vec(),
            polys,
        })
    }

    /// `r_u = Σ_β Σ_{α≠∅} (1/α!) ∂_α p_β ∂_{|α|+1}κ^{αβ}(u,…,u)`.
    pub fn ito_stratonovich<M: ProcessModel + ?Sized>(integrand: &Integrand<f64>, model: &M, times: &[f64]) -> Result<Self> {
        Self::build(times, |u| {
            let ps = integrand.at(u)?;
            check_dim(&ps, model.dim())?;
            let mut r = FloatPoly::zero();
            for term in correction_terms(&ps, model.max_order()) {
                let k = last_slot_derivative(model, &term.alpha, term.beta, u)?;
                if k != 0.0 {
                    r = r.add(&differentiate(&ps[term.beta as usize], &term.alpha).scale(&k))?;
                }
            }
            Ok(r)
        })
    }

    /// `r_u = Σ_{|γ|≥2} (1/γ!) ∂_γ p · d/du κ^γ(u)`.
    pub fn ito<M: ProcessModel + ?Sized>(p: &FloatPoly, model: &M, times: &[f64]) -> Result<Self> {
        let gammas = derivative_multisets(p, 2, model.max_order());
        Self::build(times, |u| {
            let mut r = FloatPoly::zero();
            for g in &gammas {
                let k = total_derivative(model, g, u)?;
                if k != 0.0 {
                    r = r.add(&differentiate(p, g).scale(&k))?;
                }
            }
            Ok(r)
        })
    }

    /// Independent components:
    /// `r_u = Σ_β Σ_{n≥2} (1/n!) ∂_{β^{n−1}} p_β · d/du κ_n[X^β_u]`.
    pub fn independent_components<M: ProcessModel + ?Sized>(integrand: &Integrand<f64>, model: &M, times: &[f64]) -> Result<Self> {
        Self::build(times, |u| {
            let ps = integrand.at(u)?;
            check_dim(&ps, model.dim())?;
            let mut r = FloatPoly::zero();
            for (beta, p) in ps.iter().enumerate() {
                let b = beta as Symbol;
                for n in 2..=p.degree() + 1 {
                    if exceeds(n, model.max_order()) {
                        break;
                    }
                    let d = differentiate(p, &Multiset::repeat(b, n - 1));
                    if d.is_zero() {
                        continue;
                    }
                    // ∂_{β^{n−1}} = (n−1)! × differentiate, so the weight is 1/n.
                    let k = total_derivative(model, &Multiset::repeat(b, n), u)? / n as f64;
                    r = r.add(&d.scale(&k))?;
                }
            }
            Ok(r)
        })
    }

    /// Exchangeable Gaussian components:
    /// `r_u = ½ Σ_{α≠β} ∂_α p_β ρ'(u) + ½ Σ_β ∂_β p_β σ²'(u)`.
    pub fn exchangeable_gaussian(integrand: &Integrand<f64>, model: &ExchangeableGaussian, times: &[f64]) -> Result<Self> {
        Self::build(times, |u| {
            let ps = integrand.at(u)?;
            check_dim(&ps, model.dim)?;
            let (rho, sigma) = (0.5 * model.covariance_rate(u), 0.5 * model.variance_rate(u));
            let mut r = FloatPoly::zero();
            for (beta, p) in ps.iter().enumerate() {
                for alpha in 0..model.dim {
                    let w = if alpha == beta { sigma } else { rho };
                    r = r.add(&differentiate(p, &Multiset::repeat(alpha as Symbol, 1)).scale(&w))?;
                }
            }
            Ok(r)
        })
    }

    /// Rosenblatt process:
    /// `r_u = Σ_{n≥2} κ_n[X_1] H/(n−1)! p^{(n)} u^{nH−1}`.
    pub fn rosenblatt(p: &FloatPoly, model: &RosenblattModel, times: &[f64]) -> Result<Self> {
        let h = model.spec().hurst;
        let mut derivs = Vec::new();
        for n in 2..=p.degree() {
            // p^{(n)} = n! × differentiate.
            let d = differentiate(p, &Multiset::repeat(0, n));
            let k = model.unit_cumulant(n)? * h * n as f64;
            derivs.push((n, d.scale(&k)));
        }
        Self::build(times, |u| {
            let mut r = FloatPoly::zero();
            for (n, d) in &derivs {
                r = r.add(&d.scale(&u.powf(*n as f64 * h - 1.0)))?;
            }
            Ok(r)
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn polynomials(&self) -> &[FloatPoly] {
        &self.polys
    }

    /// Trapezoid rule for `∫ r_u(X_u) du` along the path.
    pub fn evaluate(&self, path: &SamplePath<f64>) -> Result<f64> {
        check_grid(&self.times, path)?;
        let vals = self
            .polys
            .iter()
            .enumerate()
            .map(|(k, r)| r.eval(path.value(k)))
            .collect::<Result<Vec<_>>>()?;
        finite(trapezoid(&self.times, &vals))
    }

    /// Trapezoid rule for `∫ 𝔼[r_u(X_u)] du` under the model.
    pub fn mean<M: CumulantModel<f64> + ?Sized>(&self, model: &M) -> Result<f64> {
        let vals = self
            .times
            .iter()
            .zip(&self.polys)
            .map(|(&u, r)| expectation(r, model, u))
            .collect::<Result<Vec<_>>>()?;
        finite(trapezoid(&self.times, &vals))
    }
}

fn finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(WickError::NonConvergence("correction integrand is not finite on the grid".into()))
    }
}

/// `𝔼[p(X_u)]` from the model's moments.
pub fn expectation<T: Scalar, M: CumulantModel<T> + ?Sized>(p: &WickPolynomial<T>, model: &M, u: f64) -> Result<T> {
    let mut acc = T::zero();
    for (g, c) in p.terms() {
        let m = if g.is_empty() {
            T::one()
        } else {
            moment(&vars_at(g.items(), u), model)?
        };
        acc = acc + c.clone() * m;
    }
    Ok(acc)
}

/// Continuous Itô–Stratonovich correction along the path (trapezoid on the
/// path grid).
pub fn ito_stratonovich_correction<M: ProcessModel + ?Sized>(
    integrand: &Integrand<f64>,
    path: &SamplePath<f64>,
    model: &M,
) -> Result<f64> {
    CorrectionPlan::ito_stratonovich(integrand, model, path.times())?.evaluate(path)
}

/// `𝔼 ∫ p_β(X) dX^β = Σ_α (1/α!) ∫ 𝔼[∂_α p_β(X_u)] κ^{αβ}(u,…,u,du)`.
pub fn ito_stratonovich_mean<M: ProcessModel + ?Sized>(integrand: &Integrand<f64>, model: &M, quad_grid: &[f64]) -> Result<f64> {
    CorrectionPlan::ito_stratonovich(integrand, model, quad_grid)?.mean(model)
}

/// `Σ_{|γ|≥2} (1/γ!) ∫ ∂_γ p(X_u) κ^γ(du)` along the path.
pub fn ito_correction<M: ProcessModel + ?Sized>(p: &FloatPoly, path: &SamplePath<f64>, model: &M) -> Result<f64> {
    CorrectionPlan::ito(p, model, path.times())?.evaluate(path)
}

/// `x ↦ x^{⋄n}` under the law of `X_u`.
pub fn appell_integrand<'a, T: Scalar, M: CumulantModel<T> + ?Sized>(n: usize, model: &'a M) -> Integrand<'a, T> {
    Integrand::dynamic(move |u| Ok(vec![appell_at(n, model, u)?]))
}

fn appell_at<T: Scalar, M: CumulantModel<T> + ?Sized>(n: usize, model: &M, u: f64) -> Result<WickPolynomial<T>> {
    let at = AtTime { inner: model, time: u };
    AppellEngine::new(&at).closed_form(&Multiset::repeat(0, n))
}

/// Both sides of `∫ X^{⋄n} ⋄ dX = (X^{⋄(n+1)})_{s,t}/(n+1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarIdentity<T> {
    pub lhs: T,
    pub rhs: T,
    pub residual: T,
}

pub fn scalar_identity<T: Scalar, M: CumulantModel<T> + ?Sized>(n: usize, path: &SamplePath<T>, model: &M) -> Result<ScalarIdentity<T>> {
    if model.dim() != 1 || path.dim() != 1 {
        return Err(WickError::Invalid("the scalar identity needs a one-dimensional process".into()));
    }
    let lhs = wick_riemann_sum(&appell_integrand(n, model), path, model)?;
    let t = path.times();
    let last = path.len() - 1;
    let end = appell_at(n + 1, model, t[last])?.eval(path.value(last))?;
    let start = appell_at(n + 1, model, t[0])?.eval(path.value(0))?;
    let rhs = (end - start) / T::count(n as u128 + 1);
    Ok(ScalarIdentity {
        residual: lhs.clone() - rhs.clone(),
        lhs,
        rhs,
    })
}

/// Scalar identity for the increment process `X_{s,·}` with `s` the first
/// grid time.
pub fn shifted_scalar_identity<T: Scalar, M: CumulantModel<T> + ?Sized>(
    n: usize,
    path: &SamplePath<T>,
    model: &M,
) -> Result<ScalarIdentity<T>> {
    let y = IncrementModel::new(model, path.times()[0]);
    scalar_identity(n, &path.relative_to_start(), &y)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshRow {
    pub points: usize,
    pub mesh: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Scalar identity on the path and its dyadic coarsenings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarReport {
    pub n: usize,
    pub shifted: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// Coarsest first.
    pub mesh_table: Vec<MeshRow>,
    pub seed: Option<u64>,
    pub model: String,
    pub grid: usize,
}

/// Evaluates the identity on `levels` dyadic levels ending at the full path
/// grid; levels whose coarsening is not exact are skipped.
pub fn verify_scalar_identities<T: Scalar, M: CumulantModel<T> + ?Sized>(
    n: usize,
    path: &SamplePath<T>,
    model: &M,
    levels: usize,
    shifted: bool,
) -> Result<ScalarReport> {
    let mut mesh_table = Vec::new();
    for j in (0..levels.max(1)).rev() {
        let Ok(p) = path.coarsen(1 << j) else { continue };
        let r = if shifted {
            shifted_scalar_identity(n, &p, model)?
        } else {
            scalar_identity(n, &p, model)?
        };
        mesh_table.push(MeshRow {
            points: p.len(),
            mesh: p.mesh(),
            lhs: r.lhs.approx(),
            rhs: r.rhs.approx(),
            residual: r.residual.approx(),
        });
    }
    let fine = mesh_table.last().expect("the full grid is always a level").clone();
    Ok(ScalarReport {
        n,
        shifted,
        lhs: fine.lhs,
        rhs: fine.rhs,
        residual: fine.residual,
        mesh_table,
        seed: None,
        model: model.id(),
        grid: path.len(),
    })
}

#[cfg(test)]
mod tests;
