//! Finite-rank second-chaos kernels.
//!
//! A kernel `f ∈ ℋ^{⊙2}` is stored as a symmetric matrix over a weighted
//! grid: `⟨u, v⟩ = Σ_i w_i u_i v_i`. The Hilbert–Schmidt operator `A_f` acts
//! as `u ↦ F·diag(w)·u`, so all contractions are weighted matrix products.

pub mod rosenblatt;

use itertools::Itertools;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::cumulants::{CumulantModel, Variable};
use crate::error::{Result, WickError};
use crate::scalar::Scalar;

/// Largest kernel count accepted by [`joint_cumulant_trace`].
pub const MAX_TRACE_ORDER: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct Chaos2Kernel<T> {
    n: usize,
    matrix: Vec<T>,
    weights: Vec<T>,
    label: String,
}

impl<T: Scalar> Chaos2Kernel<T> {
    /// Builds a kernel from the lower triangle of `rows`, mirrored, so the
    /// result is symmetric exactly.
    pub fn new(rows: &[Vec<T>], weights: Vec<T>, label: impl Into<String>) -> Result<Self> {
        let n = rows.len();
        if weights.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(WickError::Invalid("kernel matrix must be square and match the weights".into()));
        }
        if weights.iter().any(|w| !w.is_positive()) {
            return Err(WickError::Invalid("quadrature weights must be positive".into()));
        }
        let mut matrix = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                matrix[i * n + j] = rows[i][j].clone();
                matrix[j * n + i] = rows[i][j].clone();
            }
        }
        Ok(Chaos2Kernel {
            n,
            matrix,
            weights,
            label: label.into(),
        })
    }

    /// `Σ_i (M + Mᵀ)/2` of a possibly non-symmetric row-major matrix.
    pub fn symmetrized(n: usize, m: &[T], weights: Vec<T>, label: impl Into<String>) -> Self {
        let two = T::int(2);
        let mut matrix = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                matrix[i * n + j] = (m[i * n + j].clone() + m[j * n + i].clone()) / two.clone();
            }
        }
        Chaos2Kernel {
            n,
            matrix,
            weights,
            label: label.into(),
        }
    }

    /// `c · h ⊗ h`.
    pub fn rank_one(h: &[T], c: T, weights: Vec<T>, label: impl Into<String>) -> Result<Self> {
        let rows: Vec<Vec<T>> = h
            .iter()
            .map(|a| h.iter().map(|b| c.clone() * a.clone() * b.clone()).collect())
            .collect();
        Self::new(&rows, weights, label)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> &T {
        &self.matrix[i * self.n + j]
    }

    pub fn matrix(&self) -> &[T] {
        &self.matrix
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn scale(&self, c: &T) -> Self {
        let mut out = self.clone();
        for v in &mut out.matrix {
            *v = v.clone() * c.clone();
        }
        out
    }

    pub fn check_grid(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.weights != other.weights {
            return Err(WickError::GridMismatch(format!(
                "`{}` and `{}` live on different grids",
                self.label, other.label
            )));
        }
        Ok(())
    }

    /// `F·diag(w)`, the matrix of `A_f` in grid coordinates.
    fn operator(&self) -> Vec<T> {
        let n = self.n;
        let mut out = self.matrix.clone();
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = out[i * n + j].clone() * self.weights[j].clone();
            }
        }
        out
    }

    /// `A_f g`: the kernel of `A_f ∘ A_g`, symmetrized, since second-chaos
    /// integrals only see the symmetric part.
    pub fn operator_apply(&self, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        let m = matmul(self.n, &self.operator(), &other.matrix);
        Ok(Self::symmetrized(
            self.n,
            &m,
            self.weights.clone(),
            format!("A_{} {}", self.label, other.label),
        ))
    }

    /// `⟨f, g⟩_{ℋ^{⊗2}} = Tr(A_f A_g)`.
    pub fn inner(&self, other: &Self) -> Result<T> {
        trace_chain(&[self, other])
    }

    /// Squared Hilbert–Schmidt norm `Σ_ij w_i w_j f_ij²`.
    pub fn hs_norm_sq(&self) -> T {
        let n = self.n;
        let mut acc = T::zero();
        for i in 0..n {
            for j in 0..n {
                let v = self.matrix[i * n + j].clone();
                acc = acc + self.weights[i].clone() * self.weights[j].clone() * v.clone() * v;
            }
        }
        acc
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Chaos2Kernel<U> {
        Chaos2Kernel {
            n: self.n,
            matrix: self.matrix.iter().map(&f).collect(),
            weights: self.weights.iter().map(&f).collect(),
            label: self.label.clone(),
        }
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Vec<Value>> = (0..self.n)
            .map(|i| (0..self.n).map(|j| self.entry(i, j).to_json()).collect())
            .collect();
        json!({
            "label": self.label,
            "weights": self.weights.iter().map(Scalar::to_json).collect::<Vec<_>>(),
            "matrix": rows,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |m: &str| WickError::Parse(format!("kernel: {m}"));
        let arr = |v: &Value| -> Result<Vec<T>> {
            v.as_array()
                .ok_or_else(|| bad("expected an array"))?
                .iter()
                .map(|x| T::from_json(x).ok_or_else(|| bad("bad number")))
                .collect()
        };
        let weights = arr(v.get("weights").ok_or_else(|| bad("missing weights"))?)?;
        let rows = v
            .get("matrix")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing matrix"))?
            .iter()
            .map(arr)
            .collect::<Result<Vec<_>>>()?;
        for i in 0..rows.len() {
            for j in 0..i {
                if rows[i].get(j) != rows.get(j).and_then(|r| r.get(i)) {
                    return Err(bad("matrix is not symmetric"));
                }
            }
        }
        let label = v.get("label").and_then(Value::as_str).unwrap_or("f");
        Self::new(&rows, weights, label)
    }
}

fn matmul<T: Scalar>(n: usize, a: &[T], b: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = &a[i * n + k];
            if aik.is_zero() {
                continue;
            }
            for j in 0..n {
                out[i * n + j] = out[i * n + j].clone() + aik.clone() * b[k * n + j].clone();
            }
        }
    }
    out
}

/// `Tr(A_{f_1} ⋯ A_{f_m})`.
pub fn trace_chain<T: Scalar>(kernels: &[&Chaos2Kernel<T>]) -> Result<T> {
    let first = kernels
        .first()
        .ok_or_else(|| WickError::Invalid("empty trace chain".into()))?;
    for k in &kernels[1..] {
        first.check_grid(k)?;
    }
    let n = first.n;
    let mut acc = first.operator();
    if kernels.len() == 1 {
        return Ok((0..n).fold(T::zero(), |s, i| s + acc[i * n + i].clone()));
    }
    for k in &kernels[1..kernels.len() - 1] {
        acc = matmul(n, &acc, &k.operator());
    }
    let last = kernels[kernels.len() - 1].operator();
    let mut tr = T::zero();
    for i in 0..n {
        for j in 0..n {
            tr = tr + acc[i * n + j].clone() * last[j * n + i].clone();
        }
    }
    Ok(tr)
}

/// `κ[ℐ²(f_1), …, ℐ²(f_m)] = 2^{m−1} Σ_{σ ∈ S_{m−1}} Tr(A_{f_σ(1)} ⋯ A_{f_σ(m−1)} A_{f_m})`.
///
/// Terms are evaluated in parallel and summed in permutation order.
pub fn joint_cumulant_trace<T: Scalar>(kernels: &[&Chaos2Kernel<T>]) -> Result<T> {
    let m = kernels.len();
    if m > MAX_TRACE_ORDER {
        return Err(WickError::CapExceeded {
            size: m,
            cap: MAX_TRACE_ORDER,
        });
    }
    match m {
        0 => return Err(WickError::Invalid("cumulant of no variables".into())),
        1 => return Ok(T::zero()),
        _ => {}
    }
    for k in &kernels[1..] {
        kernels[0].check_grid(k)?;
    }
    let perms: Vec<Vec<usize>> = (0..m - 1).permutations(m - 1).collect();
    let terms: Vec<T> = perms
        .par_iter()
        .map(|p| {
            let mut chain: Vec<&Chaos2Kernel<T>> = p.iter().map(|&i| kernels[i]).collect();
            chain.push(kernels[m - 1]);
            trace_chain(&chain)
        })
        .collect::<Result<_>>()?;
    let sum = terms.into_iter().fold(T::zero(), |a, b| a + b);
    Ok(T::int(1 << (m - 1)) * sum)
}

/// Cumulant model of `Y^k = ℐ²(f_k)` for a fixed list of kernels.
#[derive(Clone, Debug)]
pub struct Chaos2Model<T> {
    id: String,
    kernels: Vec<Chaos2Kernel<T>>,
    relation_free: bool,
}

impl<T: Scalar> Chaos2Model<T> {
    /// A single kernel is taken to be free of polynomial relations; several
    /// kernels may be linearly dependent, so they are not by default.
    pub fn new(id: impl Into<String>, kernels: Vec<Chaos2Kernel<T>>) -> Result<Self> {
        if let Some(k0) = kernels.first() {
            for k in &kernels[1..] {
                k0.check_grid(k)?;
            }
        }
        let relation_free = kernels.len() <= 1;
        Ok(Chaos2Model {
            id: id.into(),
            kernels,
            relation_free,
        })
    }

    pub fn with_relation_free(mut self, flag: bool) -> Self {
        self.relation_free = flag;
        self
    }

    pub fn kernels(&self) -> &[Chaos2Kernel<T>] {
        &self.kernels
    }
}

impl<T: Scalar> CumulantModel<T> for Chaos2Model<T> {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn dim(&self) -> usize {
        self.kernels.len()
    }

    fn kappa(&self, vars: &[Variable]) -> T {
        let ks: Vec<&Chaos2Kernel<T>> = vars.iter().map(|v| &self.kernels[v.component as usize]).collect();
        joint_cumulant_trace(&ks).expect("kernels share a grid and the order is within the cap")
    }

    fn polynomial_relation_free(&self) -> bool {
        self.relation_free
    }

    fn names(&self) -> Vec<String> {
        self.kernels.iter().map(|k| format!("I2({})", k.label)).collect()
    }
}

/// One term `c · ℐ²(g_1) ⋄_W ⋯ ⋄_W ℐ²(g_r)` of a change-of-chaos expansion.
#[derive(Clone, Debug, PartialEq)]
pub struct Chaos2Term<T> {
    pub coefficient: T,
    pub kernels: Vec<Chaos2Kernel<T>>,
}

impl<T: Scalar> Chaos2Term<T> {
    pub fn label(&self) -> String {
        let parts: Vec<String> = self.kernels.iter().map(|k| format!("I2({})", k.label)).collect();
        format!("{} {}", self.coefficient, parts.join(" <>W "))
    }
}

/// `ℐ²(f_1) ⋄ ⋯ ⋄ ℐ²(f_m)` (Wick product of the `ℐ²` variables) rewritten
/// through the Wick product `⋄_W` of the underlying Gaussian field.
#[derive(Clone, Debug, PartialEq)]
pub struct Chaos2Decomposition<T> {
    /// `ℐ²(f_1) ⋄_W ⋯ ⋄_W ℐ²(f_m)`.
    pub pure: Chaos2Term<T>,
    pub contractions: Vec<Chaos2Term<T>>,
}

fn chain<T: Scalar>(ks: &[&Chaos2Kernel<T>]) -> Chaos2Kernel<T> {
    let n = ks[0].n;
    let mut acc = ks[0].operator();
    for k in &ks[1..ks.len() - 1] {
        acc = matmul(n, &acc, &k.operator());
    }
    let m = matmul(n, &acc, &ks[ks.len() - 1].matrix);
    let label = ks
        .iter()
        .enumerate()
        .map(|(i, k)| if i + 1 < ks.len() { format!("A_{}", k.label) } else { k.label.clone() })
        .join(" ");
    Chaos2Kernel::symmetrized(n, &m, ks[0].weights.clone(), label)
}

/// Change of chaos for two or three second-chaos variables.
///
/// For `m = 2` the contractions are `2ℐ²(A_f g) + 2ℐ²(A_g f)`. For `m = 3`
/// each pair `(a, b)` contributes `4ℐ²(A_a b) ⋄_W ℐ²(c)` and each choice of
/// middle kernel contributes `8ℐ²(A_a A_mid b)`.
pub fn chaos2_change_of_chaos<T: Scalar>(kernels: &[&Chaos2Kernel<T>]) -> Result<Chaos2Decomposition<T>> {
    for k in kernels.iter().skip(1) {
        kernels[0].check_grid(k)?;
    }
    let pure = Chaos2Term {
        coefficient: T::one(),
        kernels: kernels.iter().map(|k| (*k).clone()).collect(),
    };
    let mut contractions = Vec::new();
    match kernels.len() {
        2 => {
            let (f, g) = (kernels[0], kernels[1]);
            for (a, b) in [(f, g), (g, f)] {
                contractions.push(Chaos2Term {
                    coefficient: T::int(2),
                    kernels: vec![chain(&[a, b])],
                });
            }
        }
        3 => {
            for (a, b, c) in [(0, 1, 2), (0, 2, 1), (1, 2, 0)] {
                contractions.push(Chaos2Term {
                    coefficient: T::int(4),
                    kernels: vec![chain(&[kernels[a], kernels[b]]), kernels[c].clone()],
                });
            }
            for (a, mid, b) in [(0, 1, 2), (1, 0, 2), (0, 2, 1)] {
                contractions.push(Chaos2Term {
                    coefficient: T::int(8),
                    kernels: vec![chain(&[kernels[a], kernels[mid], kernels[b]])],
                });
            }
        }
        m => {
            return Err(WickError::Invalid(format!(
                "second-chaos change of chaos is implemented for 2 or 3 kernels, got {m}"
            )))
        }
    }
    Ok(Chaos2Decomposition { pure, contractions })
}
