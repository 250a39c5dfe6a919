//! Sparse multiset-indexed polynomials, Appell polynomials and the Wick
//! product.
//!
//! A [`WickPolynomial`] is either in the monomial basis `x^I` or in the Appell
//! basis `x^{⋄I}` of a specific model. Appell-basis polynomials carry the
//! model id, and operations refuse to mix ids.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::combinatorics::{check_cap, for_each_diagram, multiplicity_coefficient, DiagramFilter, Multiset, Symbol};
use crate::cumulants::{kappa_of, moment, vars_of, CumulantModel, Variable};
use crate::error::{Result, WickError};
use crate::scalar::{factorial, sign, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Monomial,
    Appell,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WickPolynomial<T> {
    basis: Basis,
    model_id: Option<String>,
    terms: BTreeMap<Multiset, T>,
}

impl<T: Scalar> WickPolynomial<T> {
    /// Zero polynomial in the monomial basis.
    pub fn zero() -> Self {
        WickPolynomial {
            basis: Basis::Monomial,
            model_id: None,
            terms: BTreeMap::new(),
        }
    }

    /// Zero polynomial in the Appell basis of `model_id`.
    pub fn zero_appell(model_id: impl Into<String>) -> Self {
        WickPolynomial {
            basis: Basis::Appell,
            model_id: Some(model_id.into()),
            terms: BTreeMap::new(),
        }
    }

    fn empty_like(&self) -> Self {
        WickPolynomial {
            basis: self.basis,
            model_id: self.model_id.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(c: T) -> Self {
        Self::monomial(Multiset::empty(), c)
    }

    /// `c · x^I`.
    pub fn monomial(i: Multiset, c: T) -> Self {
        let mut p = Self::zero();
        p.add_term(i, c);
        p
    }

    /// `c · x^{⋄I}` for the model `model_id`.
    pub fn appell_term(i: Multiset, c: T, model_id: impl Into<String>) -> Self {
        let mut p = Self::zero_appell(model_id);
        p.add_term(i, c);
        p
    }

    /// Univariate polynomial in symbol 0 from ascending coefficients.
    pub fn from_coeffs(coeffs: &[T]) -> Self {
        let mut p = Self::zero();
        for (k, c) in coeffs.iter().enumerate() {
            p.add_term(Multiset::repeat(0, k), c.clone());
        }
        p
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn model_id(&self) -> Option<&str> {
        self.model_id.as_deref()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Multiset, &T)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, i: &Multiset) -> T {
        self.terms.get(i).cloned().unwrap_or_else(T::zero)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Multiset::len).max().unwrap_or(0)
    }

    /// Adds `c` to the coefficient of `I`, dropping it if it becomes zero.
    pub fn add_term(&mut self, i: Multiset, c: T) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&i) {
            Some(v) => {
                *v = v.clone() + c;
                if v.is_zero() {
                    self.terms.remove(&i);
                }
            }
            None => {
                self.terms.insert(i, c);
            }
        }
    }

    fn same_space(&self, other: &Self) -> Result<()> {
        if self.basis != other.basis || self.model_id != other.model_id {
            return Err(WickError::ModelMismatch {
                left: self.describe(),
                right: other.describe(),
            });
        }
        Ok(())
    }

    fn describe(&self) -> String {
        match (&self.basis, &self.model_id) {
            (Basis::Appell, Some(id)) => format!("appell[{id}]"),
            _ => "monomial".to_string(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        let mut out = self.clone();
        for (i, c) in &other.terms {
            out.add_term(i.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(&-T::one()))
    }

    pub fn scale(&self, c: &T) -> Self {
        let mut out = self.empty_like();
        for (i, v) in &self.terms {
            out.add_term(i.clone(), v.clone() * c.clone());
        }
        out
    }

    /// Pointwise product; both operands must be in the monomial basis.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.basis != Basis::Monomial || other.basis != Basis::Monomial {
            return Err(WickError::Invalid(
                "pointwise products are only defined in the monomial basis".into(),
            ));
        }
        let mut out = Self::zero();
        for (i, a) in &self.terms {
            for (j, b) in &other.terms {
                out.add_term(i.union(j), a.clone() * b.clone());
            }
        }
        Ok(out)
    }

    /// Evaluates a monomial-basis polynomial at `x` (indexed by symbol).
    pub fn eval(&self, x: &[T]) -> Result<T> {
        if self.basis != Basis::Monomial {
            return Err(WickError::Invalid("evaluate after converting to the monomial basis".into()));
        }
        let mut acc = T::zero();
        for (i, c) in &self.terms {
            let mut term = c.clone();
            for &s in i.items() {
                let v = x
                    .get(s as usize)
                    .ok_or_else(|| WickError::Invalid(format!("no value for symbol {s}")))?;
                term = term * v.clone();
            }
            acc = acc + term;
        }
        Ok(acc)
    }

    /// Coefficient-wise conversion to another scalar type.
    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> WickPolynomial<U> {
        let mut out = WickPolynomial {
            basis: self.basis,
            model_id: self.model_id.clone(),
            terms: BTreeMap::new(),
        };
        for (i, c) in &self.terms {
            out.add_term(i.clone(), f(c));
        }
        out
    }

    /// Dense descending rendering of a univariate polynomial, zeros included:
    /// `x^3 - 3x^2 + 0x + 1`.
    pub fn pretty_dense(&self, name: &str) -> String {
        let n = self.degree();
        let mut out = String::new();
        for k in (0..=n).rev() {
            let c = self.coefficient(&Multiset::repeat(0, k));
            let body = match k {
                0 => String::new(),
                1 => name.to_string(),
                _ => format!("{name}^{k}"),
            };
            push_term(&mut out, &c, &body, k == n, self.basis == Basis::Appell);
        }
        out
    }

    /// Sparse rendering, highest degree first.
    pub fn pretty(&self, names: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut out = String::new();
        for (idx, (i, c)) in self.terms.iter().rev().enumerate() {
            let body = monomial_name(i, names);
            push_term(&mut out, c, &body, idx == 0, self.basis == Basis::Appell);
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let mut terms = Map::new();
        for (i, c) in &self.terms {
            terms.insert(i.key(), c.to_json());
        }
        serde_json::json!({
            "basis": self.basis,
            "model_id": self.model_id,
            "terms": terms,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |m: &str| WickError::Parse(format!("polynomial: {m}"));
        let basis: Basis = serde_json::from_value(v.get("basis").cloned().ok_or_else(|| bad("missing basis"))?)
            .map_err(|_| bad("bad basis"))?;
        let model_id = v.get("model_id").and_then(Value::as_str).map(str::to_string);
        if basis == Basis::Appell && model_id.is_none() {
            return Err(bad("appell basis requires model_id"));
        }
        let mut p = WickPolynomial {
            basis,
            model_id: if basis == Basis::Appell { model_id } else { None },
            terms: BTreeMap::new(),
        };
        let terms = v.get("terms").and_then(Value::as_object).ok_or_else(|| bad("missing terms"))?;
        for (k, c) in terms {
            let c = T::from_json(c).ok_or_else(|| bad(&format!("bad coefficient for `{k}`")))?;
            p.add_term(Multiset::parse_key(k)?, c);
        }
        Ok(p)
    }
}

fn monomial_name(i: &Multiset, names: &[String]) -> String {
    let mut s = String::new();
    for (sym, n) in i.counts() {
        let name = names.get(sym as usize).cloned().unwrap_or_else(|| format!("x{sym}"));
        if n == 1 {
            s.push_str(&name);
        } else {
            s.push_str(&format!("{name}^{n}"));
        }
    }
    s
}

fn push_term<T: Scalar>(out: &mut String, c: &T, body: &str, first: bool, appell: bool) {
    let neg = c.is_negative();
    let mag = c.abs();
    if first {
        if neg {
            out.push('-');
        }
    } else {
        out.push_str(if neg { " - " } else { " + " });
    }
    let body = if appell && !body.is_empty() {
        format!("⋄{body}")
    } else {
        body.to_string()
    };
    let text = mag.to_string();
    let is_one = mag.is_one();
    if body.is_empty() {
        out.push_str(&text);
    } else if is_one {
        out.push_str(&body);
    } else if text.contains('/') {
        out.push_str(&format!("({text}){body}"));
    } else {
        out.push_str(&format!("{text}{body}"));
    }
}

/// Memoized partition sums and Appell expansions for one model.
pub struct AppellEngine<'m, T, M: ?Sized> {
    model: &'m M,
    kappa: RefCell<HashMap<Multiset, T>>,
    sums: RefCell<HashMap<(Multiset, bool), T>>,
    moments: RefCell<HashMap<Multiset, T>>,
    inverse: RefCell<HashMap<Multiset, WickPolynomial<T>>>,
    recursive: RefCell<HashMap<Multiset, WickPolynomial<T>>>,
}

impl<'m, T: Scalar, M: CumulantModel<T> + ?Sized> AppellEngine<'m, T, M> {
    pub fn new(model: &'m M) -> Self {
        AppellEngine {
            model,
            kappa: RefCell::new(HashMap::new()),
            sums: RefCell::new(HashMap::new()),
            moments: RefCell::new(HashMap::new()),
            inverse: RefCell::new(HashMap::new()),
            recursive: RefCell::new(HashMap::new()),
        }
    }

    pub fn model_id(&self) -> String {
        self.model.id()
    }

    pub fn kappa(&self, m: &Multiset) -> T {
        if let Some(v) = self.kappa.borrow().get(m) {
            return v.clone();
        }
        let v = kappa_of(self.model, m);
        self.kappa.borrow_mut().insert(m.clone(), v.clone());
        v
    }

    /// `Σ_{π ∈ 𝒫(M)} c^{|π|} κ^π` with `c = −1` when `negative`.
    ///
    /// Expands over the block containing the first position, so each block
    /// is weighted by the number of ways to pick its other positions.
    pub fn partition_sum(&self, m: &Multiset, negative: bool) -> T {
        if m.is_empty() {
            return T::one();
        }
        let key = (m.clone(), negative);
        if let Some(v) = self.sums.borrow().get(&key) {
            return v.clone();
        }
        let first = m.items()[0];
        let rest = m.difference(&Multiset::new([first])).expect("first element present");
        let mut total = T::zero();
        for b in rest.submultisets() {
            let k = self.kappa(&b.with(first));
            if k.is_zero() {
                continue;
            }
            let remaining = rest.difference(&b).expect("submultiset");
            let mult = T::count(multiplicity_coefficient(&rest, &b));
            total = total + sign::<T>(negative) * mult * k * self.partition_sum(&remaining, negative);
        }
        self.sums.borrow_mut().insert(key, total.clone());
        total
    }

    fn moment(&self, m: &Multiset) -> Result<T> {
        if let Some(v) = self.moments.borrow().get(m) {
            return Ok(v.clone());
        }
        let v = moment(&vars_of(m), self.model)?;
        self.moments.borrow_mut().insert(m.clone(), v.clone());
        Ok(v)
    }

    /// `x^{⋄I} = x^I − Σ_{∅≠J⊆I} C(I,J) 𝔼[X^J] x^{⋄I∖J}`, moments from the
    /// Leonov–Shiraev sum over set partitions.
    pub fn recursive(&self, i: &Multiset) -> Result<WickPolynomial<T>> {
        check_cap(i.len())?;
        if let Some(p) = self.recursive.borrow().get(i) {
            return Ok(p.clone());
        }
        let mut p = WickPolynomial::monomial(i.clone(), T::one());
        for j in i.submultisets() {
            if j.is_empty() {
                continue;
            }
            let e = self.moment(&j)?;
            if e.is_zero() {
                continue;
            }
            let c = T::count(multiplicity_coefficient(i, &j)) * e;
            let sub = self.recursive(&i.difference(&j).expect("submultiset"))?;
            p = p.sub(&sub.scale(&c))?;
        }
        self.recursive.borrow_mut().insert(i.clone(), p.clone());
        Ok(p)
    }

    /// `x^{⋄I} = Σ_{J⊆I} C(I,J) x^J Σ_{π∈𝒫(I∖J)} (−1)^{|π|} κ^π`.
    pub fn closed_form(&self, i: &Multiset) -> Result<WickPolynomial<T>> {
        check_cap(i.len())?;
        let mut p = WickPolynomial::zero();
        for j in i.submultisets() {
            let rest = i.difference(&j).expect("submultiset");
            let c = T::count(multiplicity_coefficient(i, &j)) * self.partition_sum(&rest, true);
            p.add_term(j, c);
        }
        Ok(p)
    }

    /// Inverts `x^I = Σ_J C(I,J) x^{⋄J} Σ_{π∈𝒫(I∖J)} κ^π` triangularly.
    pub fn inverse(&self, i: &Multiset) -> Result<WickPolynomial<T>> {
        check_cap(i.len())?;
        if let Some(p) = self.inverse.borrow().get(i) {
            return Ok(p.clone());
        }
        let mut p = WickPolynomial::monomial(i.clone(), T::one());
        for j in i.submultisets() {
            if j.len() == i.len() {
                continue;
            }
            let rest = i.difference(&j).expect("submultiset");
            let s = self.partition_sum(&rest, false);
            if s.is_zero() {
                continue;
            }
            let c = T::count(multiplicity_coefficient(i, &j)) * s;
            p = p.sub(&self.inverse(&j)?.scale(&c))?;
        }
        self.inverse.borrow_mut().insert(i.clone(), p.clone());
        Ok(p)
    }

    /// Univariate Appell polynomial from `∂_θ^n exp(θx − 𝒦(θ))|_{θ=0}`.
    pub fn generating(&self, i: &Multiset) -> Result<WickPolynomial<T>> {
        check_cap(i.len())?;
        let counts = i.counts();
        if counts.len() > 1 {
            return Err(WickError::Invalid(
                "generating-series form needs a single-symbol multiset".into(),
            ));
        }
        let (s, n) = counts.first().copied().unwrap_or((0, 0));
        // b = exp(−𝒦) as a power series in θ, via k b_k = Σ_j j c_j b_{k−j}
        let c: Vec<T> = (0..=n)
            .map(|k| {
                if k == 0 {
                    T::zero()
                } else {
                    -self.kappa(&Multiset::repeat(s, k)) / factorial::<T>(k)
                }
            })
            .collect();
        let mut b = vec![T::one()];
        for k in 1..=n {
            let mut acc = T::zero();
            for j in 1..=k {
                acc = acc + T::int(j as i64) * c[j].clone() * b[k - j].clone();
            }
            b.push(acc / T::int(k as i64));
        }
        let mut p = WickPolynomial::zero();
        for (k, bk) in b.iter().enumerate() {
            let c = factorial::<T>(n) / factorial::<T>(n - k) * bk.clone();
            p.add_term(Multiset::repeat(s, n - k), c);
        }
        Ok(p)
    }

    pub fn to_appell_basis(&self, p: &WickPolynomial<T>) -> Result<WickPolynomial<T>> {
        match p.basis {
            Basis::Appell => {
                self.check_model(p)?;
                Ok(p.clone())
            }
            Basis::Monomial => {
                let mut out = WickPolynomial::zero_appell(self.model.id());
                for (i, c) in &p.terms {
                    check_cap(i.len())?;
                    for j in i.submultisets() {
                        let rest = i.difference(&j).expect("submultiset");
                        let s = self.partition_sum(&rest, false);
                        let w = T::count(multiplicity_coefficient(i, &j)) * s * c.clone();
                        out.add_term(j, w);
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn to_monomial_basis(&self, p: &WickPolynomial<T>) -> Result<WickPolynomial<T>> {
        match p.basis {
            Basis::Monomial => Ok(p.clone()),
            Basis::Appell => {
                self.check_model(p)?;
                let mut out = WickPolynomial::zero();
                for (i, c) in &p.terms {
                    for (j, v) in &self.inverse(i)?.terms {
                        out.add_term(j.clone(), v.clone() * c.clone());
                    }
                }
                Ok(out)
            }
        }
    }

    fn check_model(&self, p: &WickPolynomial<T>) -> Result<()> {
        let id = self.model.id();
        match &p.model_id {
            Some(m) if *m == id => Ok(()),
            other => Err(WickError::ModelMismatch {
                left: other.clone().unwrap_or_else(|| "none".into()),
                right: id,
            }),
        }
    }

    /// Symbolic Wick product `p ⋄ q`, returned in `out`.
    pub fn wick_product(&self, p: &WickPolynomial<T>, q: &WickPolynomial<T>, out: Basis) -> Result<WickPolynomial<T>> {
        check_cap(p.degree() + q.degree())?;
        let (a, b) = (self.to_appell_basis(p)?, self.to_appell_basis(q)?);
        let mut prod = WickPolynomial::zero_appell(self.model.id());
        for (i, x) in &a.terms {
            for (j, y) in &b.terms {
                prod.add_term(i.union(j), x.clone() * y.clone());
            }
        }
        match out {
            Basis::Appell => Ok(prod),
            Basis::Monomial => self.to_monomial_basis(&prod),
        }
    }
}

pub fn appell_recursive<T: Scalar, M: CumulantModel<T> + ?Sized>(i: &Multiset, model: &M) -> Result<WickPolynomial<T>> {
    AppellEngine::new(model).recursive(i)
}

pub fn appell_closed_form<T: Scalar, M: CumulantModel<T> + ?Sized>(i: &Multiset, model: &M) -> Result<WickPolynomial<T>> {
    AppellEngine::new(model).closed_form(i)
}

/// Univariate Appell polynomial of degree `n` in symbol 0.
pub fn appell_from_generating<T: Scalar, M: CumulantModel<T> + ?Sized>(n: usize, model: &M) -> Result<WickPolynomial<T>> {
    if model.dim() != 1 {
        return Err(WickError::Invalid("generating-series form is univariate".into()));
    }
    AppellEngine::new(model).generating(&Multiset::repeat(0, n))
}

pub fn differentiate<T: Scalar>(p: &WickPolynomial<T>, j: &Multiset) -> WickPolynomial<T> {
    let mut out = p.empty_like();
    for (i, c) in &p.terms {
        if let Some(rest) = i.difference(j) {
            out.add_term(rest, T::count(multiplicity_coefficient(i, j)) * c.clone());
        }
    }
    out
}

pub fn to_appell_basis<T: Scalar, M: CumulantModel<T> + ?Sized>(p: &WickPolynomial<T>, model: &M) -> Result<WickPolynomial<T>> {
    AppellEngine::new(model).to_appell_basis(p)
}

pub fn to_monomial_basis<T: Scalar, M: CumulantModel<T> + ?Sized>(p: &WickPolynomial<T>, model: &M) -> Result<WickPolynomial<T>> {
    AppellEngine::new(model).to_monomial_basis(p)
}

/// Symbolic `p ⋄ q` on abstract polynomials.
pub fn wick_product<T: Scalar, M: CumulantModel<T> + ?Sized>(
    p: &WickPolynomial<T>,
    q: &WickPolynomial<T>,
    model: &M,
    out: Basis,
) -> Result<WickPolynomial<T>> {
    AppellEngine::new(model).wick_product(p, q, out)
}

/// `p(X) ⋄ q(X)` as a product of random variables; refuses models that
/// admit polynomial relations, where the product depends on the
/// representing polynomials.
pub fn wick_product_of_variables<T: Scalar, M: CumulantModel<T> + ?Sized>(
    p: &WickPolynomial<T>,
    q: &WickPolynomial<T>,
    model: &M,
    out: Basis,
) -> Result<WickPolynomial<T>> {
    if !model.polynomial_relation_free() {
        return Err(WickError::NotWellDefined { model: model.id() });
    }
    wick_product(p, q, model, out)
}

fn edge_weight<T: Scalar, M: CumulantModel<T> + ?Sized>(model: &M, d: &crate::combinatorics::DiagramView) -> T {
    let mut w = T::one();
    for e in d.edges {
        let vars: Vec<Variable> = e.iter().map(|&s| Variable::fixed(d.nodes.symbol(s))).collect();
        w = w * model.kappa(&vars);
        if w.is_zero() {
            break;
        }
    }
    w
}

fn diagram_sum<T: Scalar, M: CumulantModel<T> + ?Sized>(
    rows: &[Multiset],
    model: &M,
    filter: DiagramFilter,
    mut out: WickPolynomial<T>,
    signed: bool,
) -> Result<WickPolynomial<T>> {
    let mut buf: HashMap<Multiset, T> = HashMap::new();
    for_each_diagram(rows, filter, |d| {
        let w = edge_weight(model, d);
        if w.is_zero() {
            return;
        }
        let w = if signed { sign::<T>(d.edges.len() % 2 == 1) * w } else { w };
        let k = d.residual_multiset();
        let slot = buf.entry(k).or_insert_with(T::zero);
        *slot = slot.clone() + w;
    })?;
    for (k, c) in buf {
        out.add_term(k, c);
    }
    Ok(out)
}

/// `∏_j x^{⋄I_j} = Σ_{D ∈ 𝒟_NF} x^{⋄D}`, in the Appell basis.
pub fn product_formula_expand<T: Scalar, M: CumulantModel<T> + ?Sized>(rows: &[Multiset], model: &M) -> Result<WickPolynomial<T>> {
    diagram_sum(rows, model, DiagramFilter::all().non_flat(), WickPolynomial::zero_appell(model.id()), false)
}

/// `x^{I_1} ⋄ ⋯ ⋄ x^{I_m} = Σ_{D ∈ 𝒟_NF} (−1)^{|π|} x^D`, in the monomial basis.
pub fn reverse_product_expand<T: Scalar, M: CumulantModel<T> + ?Sized>(rows: &[Multiset], model: &M) -> Result<WickPolynomial<T>> {
    diagram_sum(rows, model, DiagramFilter::all().non_flat(), WickPolynomial::zero(), true)
}

/// `y¹ ⋄_Y ⋯ ⋄_Y y^m` with `Y^k = X^{⋄I_k}`, substituted after the product
/// and expressed in the `X`-Appell basis.
pub fn change_of_chaos_expand<T: Scalar, M: CumulantModel<T> + ?Sized>(rows: &[Multiset], model: &M) -> Result<WickPolynomial<T>> {
    let filter = DiagramFilter::all().non_flat().connected().nonempty_residual();
    diagram_sum(rows, model, filter, WickPolynomial::zero_appell(model.id()), false)
}

/// Substitutes `y^k = x^{⋄I_k}` into a monomial-basis polynomial in the `y`
/// symbols and returns the result in the `X`-Appell basis.
pub fn substitute_appell_rows<T: Scalar, M: CumulantModel<T> + ?Sized>(
    p: &WickPolynomial<T>,
    rows: &[Multiset],
    model: &M,
) -> Result<WickPolynomial<T>> {
    if p.basis() != Basis::Monomial {
        return Err(WickError::Invalid("substitute into a monomial-basis polynomial".into()));
    }
    let engine = AppellEngine::new(model);
    let mut acc = WickPolynomial::zero();
    for (j, c) in p.terms() {
        let mut term = WickPolynomial::constant(c.clone());
        for &k in j.items() {
            let row = rows
                .get(k as usize)
                .ok_or_else(|| WickError::Invalid(format!("no row for y{}", k + 1)))?;
            term = term.mul(&engine.inverse(row)?)?;
        }
        acc = acc.add(&term)?;
    }
    engine.to_appell_basis(&acc)
}

/// Convergence verdict of the ratio test on `Σ_{l≥2} κ_l/(l−1)!`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesStatus {
    /// Terms vanish beyond the truncation order.
    Finite,
    Converged,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpSeries {
    pub partial_sum: f64,
    pub terms: Vec<f64>,
    pub ratio: Option<f64>,
    pub tail_bound: Option<f64>,
    pub status: SeriesStatus,
}

/// Partial sums of `Σ_{l=2}^{N} κ_l/(l−1)!` with a geometric tail bound.
///
/// `cumulants[l]` is `κ_l`. The last ratio `|t_N/t_{N−1}|` decides: below
/// `threshold` the series is reported converged with tail `|t_N| r/(1−r)`;
/// at or above 1 it is rejected; in between the verdict is inconclusive.
pub fn exp_wick_series(cumulants: &[f64], threshold: f64) -> Result<ExpSeries> {
    let n = cumulants.len().saturating_sub(1);
    if n < 2 {
        return Err(WickError::Invalid("need cumulants up to order at least 2".into()));
    }
    let mut fact = 1.0f64;
    let mut terms = Vec::with_capacity(n - 1);
    for l in 2..=n {
        fact *= (l - 1) as f64;
        terms.push(cumulants[l] / fact);
    }
    let partial_sum = pairwise_sum(&terms);
    let last = terms.len() - 1;
    let nonzero: Vec<usize> = (0..terms.len()).filter(|&k| terms[k] != 0.0).collect();
    let trailing_zero = nonzero.last().map_or(true, |&k| k + 2 <= last);
    if trailing_zero {
        return Ok(ExpSeries {
            partial_sum,
            terms,
            ratio: None,
            tail_bound: Some(0.0),
            status: SeriesStatus::Finite,
        });
    }
    if terms[last - 1] == 0.0 {
        return Ok(ExpSeries {
            partial_sum,
            terms,
            ratio: None,
            tail_bound: None,
            status: SeriesStatus::Inconclusive,
        });
    }
    let r = (terms[last] / terms[last - 1]).abs();
    if r >= 1.0 {
        return Err(WickError::NonConvergence(format!(
            "ratio test gives |t_N / t_(N-1)| = {r} at N = {n}"
        )));
    }
    let (tail_bound, status) = if r < threshold {
        (Some(terms[last].abs() * r / (1.0 - r)), SeriesStatus::Converged)
    } else {
        (None, SeriesStatus::Inconclusive)
    };
    Ok(ExpSeries {
        partial_sum,
        terms,
        ratio: Some(r),
        tail_bound,
        status,
    })
}

/// [`exp_wick_series`] for a univariate centred model truncated at `order`.
pub fn exp_wick_coefficient<T: Scalar, M: CumulantModel<T> + ?Sized>(model: &M, order: usize, threshold: f64) -> Result<ExpSeries> {
    if model.dim() != 1 {
        return Err(WickError::Invalid("exponential coefficient needs a univariate model".into()));
    }
    if !kappa_of(model, &Multiset::new([0 as Symbol])).is_zero() {
        return Err(WickError::Invalid("exponential coefficient needs a centred model".into()));
    }
    let cumulants: Vec<f64> = (0..=order)
        .map(|l| if l == 0 { 0.0 } else { kappa_of(model, &Multiset::repeat(0, l)).approx() })
        .collect();
    exp_wick_series(&cumulants, threshold)
}

/// Pairwise summation in fixed order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}
