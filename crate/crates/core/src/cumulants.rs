//! Cumulant models and the Leonov–Shiraev moment/cumulant relations.
//!
//! A model is an oracle `κ[X^{β₁}_{t₁}, …, X^{βₙ}_{tₙ}]`; static models ignore
//! the times. Moments, cumulants of Appell products and the diagram sums are
//! all computed from this one oracle.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::combinatorics::{
    check_cap, enumerate_set_partitions, for_each_diagram, DiagramFilter, Multiset, Symbol,
};
use crate::error::{Result, WickError};
use crate::scalar::{factorial, sign, Scalar};

/// One base random variable `X^β_t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub component: Symbol,
    pub time: Option<f64>,
}

impl Variable {
    pub fn fixed(component: Symbol) -> Self {
        Variable { component, time: None }
    }

    pub fn at(component: Symbol, time: f64) -> Self {
        Variable {
            component,
            time: Some(time),
        }
    }

    fn key(&self) -> (Symbol, u64) {
        (self.component, self.time.map_or(u64::MAX, f64::to_bits))
    }
}

/// Static variables for each element of a multiset.
pub fn vars_of(m: &Multiset) -> Vec<Variable> {
    m.items().iter().map(|&s| Variable::fixed(s)).collect()
}

pub trait CumulantModel<T: Scalar>: Send + Sync {
    /// Identity used to tag Appell bases built from this model.
    fn id(&self) -> String;

    /// Number of components `d`.
    fn dim(&self) -> usize;

    /// Joint cumulant of the given variables; symmetric in its arguments.
    fn kappa(&self, vars: &[Variable]) -> T;

    fn rational_exact(&self) -> bool {
        T::EXACT
    }

    /// Whether no nonzero polynomial vanishes on the base variables.
    fn polynomial_relation_free(&self) -> bool {
        true
    }

    /// Cumulants of higher order vanish identically (Gaussian: 2).
    fn max_order(&self) -> Option<usize> {
        None
    }

    fn names(&self) -> Vec<String> {
        default_names(self.dim())
    }
}

pub fn default_names(d: usize) -> Vec<String> {
    match d {
        0 | 1 => vec!["x".into()],
        2 | 3 => ["x", "y", "z"][..d].iter().map(|s| s.to_string()).collect(),
        _ => (0..d).map(|k| format!("x{k}")).collect(),
    }
}

impl<T: Scalar, M: CumulantModel<T> + ?Sized> CumulantModel<T> for &M {
    fn id(&self) -> String {
        (**self).id()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn kappa(&self, vars: &[Variable]) -> T {
        (**self).kappa(vars)
    }
    fn rational_exact(&self) -> bool {
        (**self).rational_exact()
    }
    fn polynomial_relation_free(&self) -> bool {
        (**self).polynomial_relation_free()
    }
    fn max_order(&self) -> Option<usize> {
        (**self).max_order()
    }
    fn names(&self) -> Vec<String> {
        (**self).names()
    }
}

impl<T: Scalar, M: CumulantModel<T> + ?Sized> CumulantModel<T> for Arc<M> {
    fn id(&self) -> String {
        (**self).id()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn kappa(&self, vars: &[Variable]) -> T {
        (**self).kappa(vars)
    }
    fn rational_exact(&self) -> bool {
        (**self).rational_exact()
    }
    fn polynomial_relation_free(&self) -> bool {
        (**self).polynomial_relation_free()
    }
    fn max_order(&self) -> Option<usize> {
        (**self).max_order()
    }
    fn names(&self) -> Vec<String> {
        (**self).names()
    }
}

/// `κ[X^m]` for a static multiset.
pub fn kappa_of<T: Scalar, M: CumulantModel<T> + ?Sized>(model: &M, m: &Multiset) -> T {
    model.kappa(&vars_of(m))
}

/// Explicit table of joint cumulants over static components.
#[derive(Clone, Debug)]
pub struct TableModel<T> {
    id: String,
    names: Vec<String>,
    values: HashMap<Multiset, T>,
    relation_free: bool,
}

impl<T: Scalar> TableModel<T> {
    pub fn new(id: impl Into<String>, names: Vec<String>) -> Self {
        TableModel {
            id: id.into(),
            names,
            values: HashMap::new(),
            relation_free: true,
        }
    }

    pub fn set(&mut self, m: Multiset, value: T) -> &mut Self {
        if value.is_zero() {
            self.values.remove(&m);
        } else {
            self.values.insert(m, value);
        }
        self
    }

    pub fn with_relation_free(mut self, flag: bool) -> Self {
        self.relation_free = flag;
        self
    }

    /// Random small rationals for every multiset of size `1..=max_size`.
    pub fn random(d: usize, max_size: usize, seed: u64) -> Self {
        let names = default_names(d);
        let mut t = TableModel::new(format!("table:random-{d}-{seed}"), names);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let full = Multiset::new((0..d as Symbol).flat_map(|s| std::iter::repeat_n(s, max_size)));
        for m in full.submultisets() {
            if m.is_empty() || m.len() > max_size {
                continue;
            }
            let num = rng.gen_range(-4i64..=4);
            let den = rng.gen_range(1i64..=3);
            t.set(m, T::ratio(num, den));
        }
        t
    }

    /// Parses `{"vars": [...], "kappa": {"x,x": 1, "x,y": "1/2"}}`.
    pub fn from_json(id: impl Into<String>, v: &Value) -> Result<Self> {
        let bad = |msg: &str| WickError::Parse(format!("table model: {msg}"));
        let names: Vec<String> = v
            .get("vars")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing `vars` array"))?
            .iter()
            .map(|n| n.as_str().map(str::to_string).ok_or_else(|| bad("var names must be strings")))
            .collect::<Result<_>>()?;
        let kappa = v
            .get("kappa")
            .and_then(Value::as_object)
            .ok_or_else(|| bad("missing `kappa` object"))?;
        let mut t = TableModel::new(id, names.clone());
        for (key, val) in kappa {
            let syms = if key.trim().is_empty() {
                Vec::new()
            } else {
                key.split(',')
                    .map(|n| {
                        names
                            .iter()
                            .position(|x| x == n.trim())
                            .map(|p| p as Symbol)
                            .ok_or_else(|| bad(&format!("unknown variable `{n}`")))
                    })
                    .collect::<Result<Vec<_>>>()?
            };
            if syms.is_empty() {
                return Err(bad("empty multiset key"));
            }
            let value = T::from_json(val).ok_or_else(|| bad(&format!("bad value for `{key}`")))?;
            t.set(Multiset::new(syms), value);
        }
        if let Some(flag) = v.get("relation_free").and_then(Value::as_bool) {
            t.relation_free = flag;
        }
        Ok(t)
    }

    pub fn to_json(&self) -> Value {
        let mut keys: Vec<&Multiset> = self.values.keys().collect();
        keys.sort();
        let mut kappa = Map::new();
        for k in keys {
            kappa.insert(k.named_key(&self.names), self.values[k].to_json());
        }
        serde_json::json!({ "vars": self.names, "kappa": kappa })
    }
}

impl<T: Scalar> CumulantModel<T> for TableModel<T> {
    fn id(&self) -> String {
        self.id.clone()
    }
    fn dim(&self) -> usize {
        self.names.len()
    }
    fn kappa(&self, vars: &[Variable]) -> T {
        let m = Multiset::new(vars.iter().map(|v| v.component));
        self.values.get(&m).cloned().unwrap_or_else(T::zero)
    }
    fn polynomial_relation_free(&self) -> bool {
        self.relation_free
    }
    fn names(&self) -> Vec<String> {
        self.names.clone()
    }
}

/// Gaussian vector with mean `μ` and covariance `C`.
#[derive(Clone, Debug)]
pub struct GaussianModel<T> {
    id: String,
    mean: Vec<T>,
    cov: Vec<Vec<T>>,
}

impl<T: Scalar> GaussianModel<T> {
    pub fn new(id: impl Into<String>, mean: Vec<T>, cov: Vec<Vec<T>>) -> Self {
        GaussianModel {
            id: id.into(),
            mean,
            cov,
        }
    }

    pub fn scalar(variance: T) -> Self {
        let id = format!("gaussian:{variance}");
        GaussianModel::new(id, vec![T::zero()], vec![vec![variance]])
    }

    /// `N(0, I_d)`.
    pub fn standard(d: usize) -> Self {
        let cov = (0..d)
            .map(|i| (0..d).map(|j| if i == j { T::one() } else { T::zero() }).collect())
            .collect();
        GaussianModel::new(format!("gaussian:std{d}"), vec![T::zero(); d], cov)
    }
}

impl<T: Scalar> CumulantModel<T> for GaussianModel<T> {
    fn id(&self) -> String {
        self.id.clone()
    }
    fn dim(&self) -> usize {
        self.mean.len()
    }
    fn kappa(&self, vars: &[Variable]) -> T {
        match vars {
            [a] => self.mean[a.component as usize].clone(),
            [a, b] => self.cov[a.component as usize][b.component as usize].clone(),
            _ => T::zero(),
        }
    }
    fn max_order(&self) -> Option<usize> {
        Some(2)
    }
}

/// Poisson(λ): every cumulant equals `λ`.
#[derive(Clone, Debug)]
pub struct PoissonModel<T> {
    pub lambda: T,
}

impl<T: Scalar> CumulantModel<T> for PoissonModel<T> {
    fn id(&self) -> String {
        format!("poisson:{}", self.lambda)
    }
    fn dim(&self) -> usize {
        1
    }
    fn kappa(&self, vars: &[Variable]) -> T {
        if vars.is_empty() {
            T::zero()
        } else {
            self.lambda.clone()
        }
    }
}

/// Sets all first cumulants to zero, leaving higher ones untouched.
#[derive(Clone, Debug)]
pub struct Centred<M>(pub M);

impl<T: Scalar, M: CumulantModel<T>> CumulantModel<T> for Centred<M> {
    fn id(&self) -> String {
        format!("centred({})", self.0.id())
    }
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn kappa(&self, vars: &[Variable]) -> T {
        if vars.len() == 1 {
            T::zero()
        } else {
            self.0.kappa(vars)
        }
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

/// Thread-safe memo of `κ` keyed by the canonically sorted variable list.
pub struct Cached<T, M> {
    inner: M,
    cache: RwLock<HashMap<Vec<(Symbol, u64)>, T>>,
}

impl<T: Scalar, M: CumulantModel<T>> Cached<T, M> {
    pub fn new(inner: M) -> Self {
        Cached {
            inner,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }
}

impl<T: Scalar, M: CumulantModel<T>> CumulantModel<T> for Cached<T, M> {
    fn id(&self) -> String {
        self.inner.id()
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn kappa(&self, vars: &[Variable]) -> T {
        let mut key: Vec<(Symbol, u64)> = vars.iter().map(Variable::key).collect();
        key.sort_unstable();
        if let Some(v) = self.cache.read().expect("cache lock").get(&key) {
            return v.clone();
        }
        let v = self.inner.kappa(vars);
        self.cache.write().expect("cache lock").insert(key, v.clone());
        v
    }
    fn rational_exact(&self) -> bool {
        self.inner.rational_exact()
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

/// Variables `Y^k = X^{⋄I_k}`; their joint cumulants come from the
/// non-flat connected diagram sum over the rows `I_k`.
pub struct AppellInduced<T, M> {
    base: M,
    rows: Vec<Multiset>,
    relation_free: bool,
    cache: RwLock<HashMap<Vec<Symbol>, T>>,
}

impl<T: Scalar, M: CumulantModel<T>> AppellInduced<T, M> {
    pub fn new(base: M, rows: Vec<Multiset>) -> Self {
        AppellInduced {
            base,
            rows,
            relation_free: false,
            cache: RwLock::new(HashMap::new()),
        }
    }

    /// Declares the `Y` family free of polynomial relations.
    pub fn with_relation_free(mut self, flag: bool) -> Self {
        self.relation_free = flag;
        self
    }

    pub fn rows(&self) -> &[Multiset] {
        &self.rows
    }

    pub fn base(&self) -> &M {
        &self.base
    }
}

impl<T: Scalar, M: CumulantModel<T>> CumulantModel<T> for AppellInduced<T, M> {
    fn id(&self) -> String {
        let rows: Vec<String> = self.rows.iter().map(|r| format!("[{}]", r.key())).collect();
        format!("appell({};{})", self.base.id(), rows.join(""))
    }
    fn dim(&self) -> usize {
        self.rows.len()
    }
    fn kappa(&self, vars: &[Variable]) -> T {
        let mut key: Vec<Symbol> = vars.iter().map(|v| v.component).collect();
        key.sort_unstable();
        if let Some(v) = self.cache.read().expect("cache lock").get(&key) {
            return v.clone();
        }
        let rows: Vec<Multiset> = key.iter().map(|&k| self.rows[k as usize].clone()).collect();
        let v = ekw_identity(EkwKind::KappaAppell, &rows, &self.base)
            .expect("row sizes exceed the slot cap");
        self.cache.write().expect("cache lock").insert(key, v.clone());
        v
    }
    fn polynomial_relation_free(&self) -> bool {
        self.relation_free
    }
    fn names(&self) -> Vec<String> {
        (1..=self.rows.len()).map(|k| format!("y{k}")).collect()
    }
}

/// `𝔼[X^{I}] = Σ_π κ^π` over set partitions of the positions of `vars`.
pub fn moment<T: Scalar, M: CumulantModel<T> + ?Sized>(vars: &[Variable], model: &M) -> Result<T> {
    let ground: Vec<usize> = (0..vars.len()).collect();
    let mut total = T::zero();
    for p in enumerate_set_partitions(&ground)? {
        let mut term = T::one();
        for block in &p.blocks {
            let bv: Vec<Variable> = block.iter().map(|&i| vars[i]).collect();
            term = term * model.kappa(&bv);
            if term.is_zero() {
                break;
            }
        }
        total = total + term;
    }
    Ok(total)
}

/// `κ[X^{I}] = Σ_π (|π|−1)! (−1)^{|π|−1} 𝔼^π`.
pub fn cumulant_from_moments<T: Scalar>(vars: &[Variable], moment_oracle: impl Fn(&[Variable]) -> T) -> Result<T> {
    if vars.is_empty() {
        return Ok(T::zero());
    }
    let ground: Vec<usize> = (0..vars.len()).collect();
    let mut total = T::zero();
    for p in enumerate_set_partitions(&ground)? {
        let k = p.len();
        let mut term = sign::<T>((k - 1) % 2 == 1) * factorial::<T>(k - 1);
        for block in &p.blocks {
            let bv: Vec<Variable> = block.iter().map(|&i| vars[i]).collect();
            term = term * moment_oracle(&bv);
        }
        total = total + term;
    }
    Ok(total)
}

/// The four diagram identities: which diagram class is summed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EkwKind {
    /// `𝔼[∏ X^{I_j}]`: all total diagrams.
    EMonomial,
    /// `𝔼[∏ X^{⋄I_j}]`: total non-flat diagrams.
    EAppell,
    /// `κ[X^{I_1}, …, X^{I_m}]`: total connected diagrams.
    KappaMonomial,
    /// `κ[X^{⋄I_1}, …, X^{⋄I_m}]`: total non-flat connected diagrams.
    KappaAppell,
}

impl EkwKind {
    pub fn filter(self) -> DiagramFilter {
        let f = DiagramFilter::all().total();
        match self {
            EkwKind::EMonomial => f,
            EkwKind::EAppell => f.non_flat(),
            EkwKind::KappaMonomial => f.connected(),
            EkwKind::KappaAppell => f.non_flat().connected(),
        }
    }
}

/// Sum of `κ^π` over the diagram class selected by `kind`.
pub fn ekw_identity<T: Scalar, M: CumulantModel<T> + ?Sized>(kind: EkwKind, rows: &[Multiset], model: &M) -> Result<T> {
    let n: usize = rows.iter().map(Multiset::len).sum();
    check_cap(n)?;
    let mut filter = kind.filter();
    if model.max_order() == Some(2) && model_is_centred(model, rows) {
        filter = filter.gaussian();
    }
    let mut total = T::zero();
    for_each_diagram(rows, filter, |d| {
        let mut term = T::one();
        for e in d.edges {
            let vars: Vec<Variable> = e.iter().map(|&s| Variable::fixed(d.nodes.symbol(s))).collect();
            term = term * model.kappa(&vars);
            if term.is_zero() {
                return;
            }
        }
        total = total.clone() + term;
    })?;
    Ok(total)
}

fn model_is_centred<T: Scalar, M: CumulantModel<T> + ?Sized>(model: &M, rows: &[Multiset]) -> bool {
    let mut syms: Vec<Symbol> = rows.iter().flat_map(|r| r.items().iter().copied()).collect();
    syms.sort_unstable();
    syms.dedup();
    syms.iter().all(|&s| model.kappa(&[Variable::fixed(s)]).is_zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;

    type Q = Rational;

    fn q(n: i64, d: i64) -> Q {
        Q::ratio(n, d)
    }

    fn x(s: Symbol) -> Variable {
        Variable::fixed(s)
    }

    #[test]
    fn moment_examples() {
        let mut t = TableModel::<Q>::new("t", default_names(2));
        t.set(Multiset::new([0, 1]), q(2, 3));
        assert_eq!(moment(&[x(0), x(1)], &t).unwrap(), q(2, 3));
        let g = GaussianModel::<Q>::standard(1);
        assert_eq!(moment(&[x(0); 4], &g).unwrap(), q(3, 1));
        let lam = q(5, 2);
        let p = PoissonModel { lambda: lam.clone() };
        assert_eq!(moment(&[x(0); 2], &p).unwrap(), lam.clone() + lam.clone() * lam);
    }

    #[test]
    fn cumulant_examples() {
        let t = Centred(TableModel::<Q>::random(4, 4, 7));
        let e = |v: &[Variable]| moment(v, &t).unwrap();
        let (i, j, h, k) = (x(0), x(1), x(2), x(3));
        assert_eq!(cumulant_from_moments(&[i, j, h], e).unwrap(), e(&[i, j, h]));
        let expected = e(&[i, j, h, k]) - e(&[i, j]) * e(&[h, k]) - e(&[i, h]) * e(&[j, k]) - e(&[i, k]) * e(&[j, h]);
        assert_eq!(cumulant_from_moments(&[i, j, h, k], e).unwrap(), expected);

        let lam = q(3, 4);
        let moments = [
            lam.clone(),
            lam.clone() + lam.powi(2),
            lam.clone() + Q::int(3) * lam.powi(2) + lam.powi(3),
        ];
        let k3 = cumulant_from_moments(&[x(0); 3], |v| moments[v.len() - 1].clone()).unwrap();
        assert_eq!(k3, lam);
    }

    #[test]
    fn round_trip_through_moments() {
        let t = TableModel::<Q>::random(2, 6, 3);
        for m in Multiset::new([0, 0, 0, 1, 1, 1]).submultisets() {
            if m.is_empty() {
                continue;
            }
            let vars = vars_of(&m);
            let k = cumulant_from_moments(&vars, |v| moment(v, &t).unwrap()).unwrap();
            assert_eq!(k, kappa_of(&t, &m), "{m:?}");
        }
    }

    #[test]
    fn ekw_examples() {
        let t = TableModel::<Q>::random(2, 6, 11);
        assert_eq!(ekw_identity(EkwKind::EAppell, &[Multiset::new([0])], &t).unwrap(), Q::int(0));
        let i = Multiset::new([0, 0, 1, 1]);
        assert_eq!(
            ekw_identity(EkwKind::EMonomial, &[i.clone()], &t).unwrap(),
            moment(&vars_of(&i), &t).unwrap()
        );
        // κ[H2(X0), H2(X1), H2(X2)] = 8 c01 c12 c02 for a correlated Gaussian
        let (a, b, c) = (q(1, 2), q(-1, 3), q(1, 5));
        let cov = vec![
            vec![Q::int(1), a.clone(), c.clone()],
            vec![a.clone(), Q::int(1), b.clone()],
            vec![c.clone(), b.clone(), Q::int(1)],
        ];
        let g = GaussianModel::new("g3", vec![Q::int(0); 3], cov);
        let rows: Vec<Multiset> = (0..3).map(|s| Multiset::repeat(s, 2)).collect();
        assert_eq!(ekw_identity(EkwKind::KappaAppell, &rows, &g).unwrap(), Q::int(8) * a * b * c);
    }

    #[test]
    fn merging_rows_preserves_expectation() {
        let t = TableModel::<Q>::random(2, 8, 5);
        let rows = vec![Multiset::new([0, 1]), Multiset::new([0]), Multiset::new([1, 1])];
        let merged = rows.iter().fold(Multiset::empty(), |a, r| a.union(r));
        assert_eq!(
            ekw_identity(EkwKind::EMonomial, &rows, &t).unwrap(),
            moment(&vars_of(&merged), &t).unwrap()
        );
    }

    #[test]
    fn cumulant_of_monomials_via_moments() {
        // κ[X^{I_1}, X^{I_2}] = 𝔼[X^{I_1} X^{I_2}] − 𝔼X^{I_1} 𝔼X^{I_2}
        let t = TableModel::<Q>::random(2, 6, 9);
        let (r1, r2) = (Multiset::new([0, 1]), Multiset::new([0, 0, 1]));
        let e = |m: &Multiset| moment(&vars_of(m), &t).unwrap();
        let expected = e(&r1.union(&r2)) - e(&r1) * e(&r2);
        assert_eq!(ekw_identity(EkwKind::KappaMonomial, &[r1, r2], &t).unwrap(), expected);
    }

    #[test]
    fn gaussian_single_row_appell_cumulant_vanishes() {
        let g = GaussianModel::<Q>::standard(2);
        for row in [Multiset::new([0, 0]), Multiset::new([0, 1, 1]), Multiset::new([0, 0, 1, 1])] {
            assert_eq!(ekw_identity(EkwKind::EAppell, &[row], &g).unwrap(), Q::int(0));
        }
    }

    #[test]
    fn table_json_round_trip() {
        let t = TableModel::<Q>::random(2, 3, 1);
        let back = TableModel::<Q>::from_json("t", &t.to_json()).unwrap();
        for m in Multiset::new([0, 0, 0, 1, 1, 1]).submultisets() {
            assert_eq!(kappa_of(&t, &m), kappa_of(&back, &m));
        }
    }

    #[test]
    fn cached_model_is_transparent() {
        let t = TableModel::<Q>::random(3, 4, 2);
        let c = Cached::new(t.clone());
        let vars = [x(2), x(0), x(2)];
        assert_eq!(c.kappa(&vars), t.kappa(&vars));
        assert_eq!(c.kappa(&[x(0), x(2), x(2)]), t.kappa(&vars));
    }
}
