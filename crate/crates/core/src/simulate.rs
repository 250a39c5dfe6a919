//! Seeded samplers for fractional Brownian motion and finite-rank
//! second-chaos paths, and a Monte Carlo harness whose reports do not depend
//! on the number of worker threads.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::appell::{exp_wick_series, pairwise_sum, WickPolynomial};
use crate::chaos2::rosenblatt::{rosenblatt_kernel_discretize, KernelGrid, RosenblattSpec};
use crate::chaos2::Chaos2Kernel;
use crate::cumulants::CumulantModel;
use crate::error::{Result, WickError};
use crate::integrals::{appell_integrand, AtTime, Chaos2Process, FbmModel, Integrand, SamplePath, WickSumPlan};
use crate::{FloatPoly, Multiset, Symbol};

/// Largest grid accepted by the dense fBm sampler.
pub const MAX_FBM_POINTS: usize = 4096;

/// Independent random stream for path `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Standard normal by inversion of a 53-bit uniform in `(0, 1)`.
pub fn standard_normal(rng: &mut impl RngCore) -> f64 {
    let u = ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
    Normal::standard().inverse_cdf(u)
}

pub fn standard_normals(rng: &mut impl RngCore, n: usize) -> Vec<f64> {
    (0..n).map(|_| standard_normal(rng)).collect()
}

/// Exact fBm sampler from the Cholesky factor of the covariance on the
/// positive grid times (`X_0 = 0`).
#[derive(Clone, Debug)]
pub struct FbmSampler {
    model: FbmModel,
    times: Vec<f64>,
    offset: usize,
    factor: DMatrix<f64>,
}

impl FbmSampler {
    pub fn new(hurst: f64, times: &[f64]) -> Result<Self> {
        let model = FbmModel::new(hurst)?;
        if times.is_empty() || times.len() > MAX_FBM_POINTS {
            return Err(WickError::Invalid(format!(
                "fBm grid needs 1 to {MAX_FBM_POINTS} points, got {}",
                times.len()
            )));
        }
        SamplePath::scalar(times.to_vec(), vec![0.0; times.len()])?;
        let offset = usize::from(times[0] == 0.0);
        let pos = &times[offset..];
        let cov = DMatrix::from_fn(pos.len(), pos.len(), |i, j| model.covariance(pos[i], pos[j]));
        let factor = match cov.clone().cholesky() {
            Some(c) => c.l(),
            None => {
                let jitter = 1e-12 * cov.diagonal().max();
                let n = pos.len();
                (cov + DMatrix::identity(n, n) * jitter)
                    .cholesky()
                    .ok_or(WickError::NotPositiveDefinite)?
                    .l()
            }
        };
        Ok(FbmSampler {
            model,
            times: times.to_vec(),
            offset,
            factor,
        })
    }

    pub fn model(&self) -> &FbmModel {
        &self.model
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn sample(&self, rng: &mut impl RngCore) -> SamplePath<f64> {
        let z = DVector::from_vec(standard_normals(rng, self.factor.nrows()));
        let x = &self.factor * z;
        let mut xs = vec![0.0; self.offset];
        xs.extend(x.iter());
        SamplePath::scalar(self.times.clone(), xs).expect("sampler grid is valid")
    }
}

/// One fBm path on stream 0 of `seed`.
pub fn fbm_sample(hurst: f64, times: &[f64], seed: u64) -> Result<SamplePath<f64>> {
    Ok(FbmSampler::new(hurst, times)?.sample(&mut substream(seed, 0)))
}

/// `X^β_t = Zᵀ diag(√w) A^β_t diag(√w) Z − Tr(A^β_t W)` for one Gaussian
/// vector `Z` shared by all times and components.
#[derive(Clone, Debug)]
pub struct Chaos2Sampler {
    times: Vec<f64>,
    n: usize,
    /// Per time, per component: scaled matrix and centring trace.
    scaled: Vec<Vec<(DMatrix<f64>, f64)>>,
}

impl Chaos2Sampler {
    /// `kernels[k][β]` is the kernel of `X^β` at `times[k]`.
    pub fn new(times: &[f64], kernels: &[Vec<Chaos2Kernel<f64>>]) -> Result<Self> {
        if times.len() != kernels.len() || kernels.iter().any(|k| k.is_empty()) {
            return Err(WickError::Invalid("one nonempty kernel list per time is required".into()));
        }
        let first = &kernels[0][0];
        let d = kernels[0].len();
        let mut scaled = Vec::with_capacity(times.len());
        for ks in kernels {
            if ks.len() != d {
                return Err(WickError::Invalid("every time needs the same number of components".into()));
            }
            let mut row = Vec::with_capacity(d);
            for k in ks {
                first.check_grid(k)?;
                let root: Vec<f64> = k.weights().iter().map(|w| w.sqrt()).collect();
                let n = k.n();
                let m = DMatrix::from_fn(n, n, |i, j| root[i] * k.entry(i, j) * root[j]);
                let tr = m.trace();
                row.push((m, tr));
            }
            scaled.push(row);
        }
        SamplePath::scalar(times.to_vec(), vec![0.0; times.len()])?;
        Ok(Chaos2Sampler {
            times: times.to_vec(),
            n: first.n(),
            scaled,
        })
    }

    pub fn from_process(process: &Chaos2Process, times: &[f64]) -> Result<Self> {
        let kernels: Vec<Vec<Chaos2Kernel<f64>>> = times
            .iter()
            .map(|&t| (0..process.dim()).map(|b| process.kernel(b as Symbol, t)).collect())
            .collect();
        Self::new(times, &kernels)
    }

    /// Rosenblatt approximation from truncated kernels on a shared cell
    /// grid; a time `0` entry is the zero kernel.
    pub fn rosenblatt(hurst: f64, times: &[f64], n_grid: usize) -> Result<Self> {
        let spec = RosenblattSpec::new(hurst)?;
        let horizon = *times.last().ok_or_else(|| WickError::Invalid("empty time grid".into()))?;
        let grid = KernelGrid::with_defaults(horizon, n_grid)?;
        let mut kernels = Vec::with_capacity(times.len());
        let mut zero = None;
        for &t in times {
            if t == 0.0 {
                kernels.push(Vec::new());
                continue;
            }
            let k = rosenblatt_kernel_discretize(t, &spec, &grid)?;
            zero.get_or_insert_with(|| k.scale(&0.0));
            kernels.push(vec![k]);
        }
        let zero = zero.ok_or_else(|| WickError::Invalid("grid needs a positive time".into()))?;
        for ks in &mut kernels {
            if ks.is_empty() {
                ks.push(zero.clone());
            }
        }
        Self::new(times, &kernels)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// `2 Tr((A W)²)`, the model variance of each component at each time.
    pub fn variances(&self) -> Vec<Vec<f64>> {
        self.scaled
            .iter()
            .map(|row| row.iter().map(|(m, _)| 2.0 * m.component_mul(m).sum()).collect())
            .collect()
    }

    pub fn sample(&self, rng: &mut impl RngCore) -> SamplePath<f64> {
        let z = DVector::from_vec(standard_normals(rng, self.n));
        let values = self
            .scaled
            .iter()
            .map(|row| row.iter().map(|(m, tr)| (m * &z).dot(&z) - tr).collect())
            .collect();
        SamplePath::new(self.times.clone(), values).expect("sampler grid is valid")
    }
}

/// One second-chaos path on stream 0 of `seed`, one scalar kernel per time.
pub fn chaos2_path_sample(times: &[f64], kernels: &[Chaos2Kernel<f64>], seed: u64) -> Result<SamplePath<f64>> {
    let ks: Vec<Vec<Chaos2Kernel<f64>>> = kernels.iter().map(|k| vec![k.clone()]).collect();
    Ok(Chaos2Sampler::new(times, &ks)?.sample(&mut substream(seed, 0)))
}

fn default_hurst() -> f64 {
    0.7
}
fn default_grid() -> usize {
    256
}
fn default_degree() -> usize {
    2
}
fn default_n() -> usize {
    1
}
fn default_levels() -> usize {
    4
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_kernel_grid() -> usize {
    32
}

/// Experiment configuration; unset keys take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default = "default_hurst")]
    pub hurst: f64,
    /// Number of grid steps on `[0, 1]`.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Integrand degree for `zero-mean-wick`.
    #[serde(default = "default_degree")]
    pub degree: usize,
    /// Appell degree for `scalar-identity`.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Dyadic refinement levels for `scalar-identity` and `young-mean`.
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Cells on `[0, 1]` for Rosenblatt kernels.
    #[serde(default = "default_kernel_grid")]
    pub kernel_grid: usize,
}

pub const EXPERIMENTS: [&str; 5] = [
    "zero-mean-wick",
    "young-mean",
    "exp-example",
    "scalar-identity",
    "rosenblatt-variance",
];

impl ExperimentConfig {
    pub fn new(experiment: impl Into<String>) -> Self {
        ExperimentConfig {
            experiment: experiment.into(),
            hurst: default_hurst(),
            grid: default_grid(),
            degree: default_degree(),
            n: default_n(),
            levels: default_levels(),
            epsilon: default_epsilon(),
            kernel_grid: default_kernel_grid(),
        }
    }

    /// Parses a JSON object or flat `key = value` lines (`#` comments).
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            return serde_json::from_str(trimmed).map_err(|e| WickError::Parse(e.to_string()));
        }
        let mut obj = serde_json::Map::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| WickError::Parse(format!("expected key=value, got {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            let value = match serde_json::from_str::<serde_json::Value>(v) {
                Ok(n @ serde_json::Value::Number(_)) => n,
                _ => serde_json::Value::String(v.to_string()),
            };
            obj.insert(k.to_string(), value);
        }
        serde_json::from_value(serde_json::Value::Object(obj)).map_err(|e| WickError::Parse(e.to_string()))
    }

    fn times(&self) -> Vec<f64> {
        (0..=self.grid).map(|k| k as f64 / self.grid as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub points: usize,
    pub mesh: f64,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub estimate: f64,
    pub stderr: f64,
    pub target: Option<f64>,
    pub n_paths: usize,
    pub seed: u64,
    pub config: ExperimentConfig,
    /// Coarsest first.
    pub refinements: Vec<RefinementRow>,
    pub details: BTreeMap<String, f64>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Mean and standard error (sample deviation over `√n`).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Ratio `Σa / Σb` with delta-method standard error.
pub fn ratio_stderr(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len() as f64;
    let (ma, mb) = (pairwise_sum(a) / n, pairwise_sum(b) / n);
    let r = ma / mb;
    let resid: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - r * y).collect();
    let (_, se) = mean_stderr(&resid);
    (r, se / mb.abs())
}

enum Prepared {
    ZeroMeanWick {
        sampler: FbmSampler,
        plan: WickSumPlan<f64>,
    },
    YoungMean {
        sampler: FbmSampler,
        factors: Vec<usize>,
        integrand: Integrand<'static, f64>,
    },
    ExpExample {
        epsilon: f64,
    },
    ScalarIdentity {
        sampler: FbmSampler,
        levels: Vec<(usize, WickSumPlan<f64>)>,
        end: FloatPoly,
        start: FloatPoly,
        scale: f64,
    },
    RosenblattVariance {
        sampler: Chaos2Sampler,
    },
}

fn dyadic_factors(grid: usize, levels: usize) -> Result<Vec<usize>> {
    let factors: Vec<usize> = (0..levels.max(1)).rev().map(|j| 1usize << j).collect();
    if factors.iter().any(|f| grid % f != 0) {
        return Err(WickError::Invalid(format!(
            "grid {grid} does not admit {levels} dyadic levels"
        )));
    }
    Ok(factors)
}

impl Prepared {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let times = cfg.times();
        Ok(match cfg.experiment.as_str() {
            "zero-mean-wick" => {
                let sampler = FbmSampler::new(cfg.hurst, &times)?;
                let mut c = vec![0.0; cfg.degree + 1];
                c[cfg.degree] = 1.0;
                let plan = WickSumPlan::new(&Integrand::scalar(WickPolynomial::from_coeffs(&c)), sampler.model(), &times)?;
                Prepared::ZeroMeanWick { sampler, plan }
            }
            "young-mean" => Prepared::YoungMean {
                sampler: FbmSampler::new(cfg.hurst, &times)?,
                factors: dyadic_factors(cfg.grid, cfg.levels.max(2))?,
                integrand: Integrand::scalar(WickPolynomial::from_coeffs(&[0.0, 1.0])),
            },
            "exp-example" => {
                if !(cfg.epsilon > 0.0 && cfg.epsilon < 0.5) {
                    return Err(WickError::Invalid(format!("epsilon {} outside (0, 1/2)", cfg.epsilon)));
                }
                Prepared::ExpExample { epsilon: cfg.epsilon }
            }
            "scalar-identity" => {
                let sampler = FbmSampler::new(cfg.hurst, &times)?;
                let model = sampler.model().clone();
                let integrand = appell_integrand::<f64, _>(cfg.n, &model);
                let mut levels = Vec::new();
                for f in dyadic_factors(cfg.grid, cfg.levels)? {
                    let ts: Vec<f64> = times.iter().step_by(f).copied().collect();
                    levels.push((f, WickSumPlan::new(&integrand, &model, &ts)?));
                }
                let appell = |t: f64| {
                    crate::appell::AppellEngine::new(&AtTime { inner: &model, time: t })
                        .closed_form(&Multiset::repeat(0, cfg.n + 1))
                };
                Prepared::ScalarIdentity {
                    end: appell(times[times.len() - 1])?,
                    start: appell(times[0])?,
                    scale: 1.0 / (cfg.n + 1) as f64,
                    levels,
                    sampler,
                }
            }
            "rosenblatt-variance" => Prepared::RosenblattVariance {
                sampler: Chaos2Sampler::rosenblatt(cfg.hurst, &[1.0], cfg.kernel_grid)?,
            },
            other => return Err(WickError::UnknownExperiment(other.to_string())),
        })
    }

    /// Per-path statistics.
    fn run(&self, rng: &mut ChaCha20Rng) -> Result<Vec<f64>> {
        Ok(match self {
            Prepared::ZeroMeanWick { sampler, plan } => vec![plan.evaluate(&sampler.sample(rng))?.wick],
            Prepared::YoungMean {
                sampler,
                factors,
                integrand,
            } => {
                let path = sampler.sample(rng);
                factors
                    .iter()
                    .map(|&f| crate::integrals::young_integral(integrand, &path.coarsen(f)?))
                    .collect::<Result<Vec<_>>>()?
            }
            Prepared::ExpExample { epsilon } => {
                let z = standard_normal(rng);
                let x = epsilon * (z * z - 1.0);
                vec![x.exp() * x, x.exp()]
            }
            Prepared::ScalarIdentity {
                sampler,
                levels,
                end,
                start,
                scale,
            } => {
                let path = sampler.sample(rng);
                let rhs = (end.eval(path.value(path.len() - 1))? - start.eval(path.value(0))?) * scale;
                levels
                    .iter()
                    .map(|(f, plan)| Ok((plan.evaluate(&path.coarsen(*f)?)?.wick - rhs).abs()))
                    .collect::<Result<Vec<_>>>()?
            }
            Prepared::RosenblattVariance { sampler } => {
                let x = sampler.sample(rng).value(0)[0];
                vec![x * x, x]
            }
        })
    }
}

/// Runs `n_paths` independent replications of an experiment on substreams
/// `0..n_paths` of `seed`.
pub fn monte_carlo(cfg: &ExperimentConfig, n_paths: usize, seed: u64, workers: usize) -> Result<ExperimentReport> {
    if n_paths < 100 {
        return Err(WickError::Invalid(format!("need at least 100 paths, got {n_paths}")));
    }
    let prepared = Prepared::new(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| WickError::Invalid(e.to_string()))?;
    let stats: Vec<Vec<f64>> = pool.install(|| {
        (0..n_paths)
            .into_par_iter()
            .map(|i| prepared.run(&mut substream(seed, i as u64)))
            .collect::<Result<Vec<_>>>()
    })?;
    let column = |j: usize| -> Vec<f64> { stats.iter().map(|s| s[j]).collect() };
    let mut details = BTreeMap::new();
    let mut refinements = Vec::new();
    let (estimate, stderr, target) = match &prepared {
        Prepared::ZeroMeanWick { .. } => {
            let (m, s) = mean_stderr(&column(0));
            (m, s, Some(0.0))
        }
        Prepared::YoungMean { factors, .. } => {
            for (j, f) in factors.iter().enumerate() {
                let (m, s) = mean_stderr(&column(j));
                let steps = cfg.grid / f;
                refinements.push(RefinementRow {
                    points: steps + 1,
                    mesh: 1.0 / steps as f64,
                    mean: m,
                    stderr: s,
                });
            }
            // Left-point bias is a multiple of mesh^{2H−1}; eliminate it
            // from the two finest levels, path by path.
            let p = 2.0 * cfg.hurst - 1.0;
            let r = 2f64.powf(p);
            let last = factors.len() - 1;
            let extrapolated: Vec<f64> = stats
                .iter()
                .map(|s| (r * s[last] - s[last - 1]) / (r - 1.0))
                .collect();
            let (raw, raw_se) = mean_stderr(&column(last));
            details.insert("left_point_estimate".into(), raw);
            details.insert("left_point_stderr".into(), raw_se);
            details.insert("bias_exponent".into(), p);
            let (m, s) = mean_stderr(&extrapolated);
            (m, s, Some(0.5))
        }
        Prepared::ExpExample { epsilon } => {
            let (r, s) = ratio_stderr(&column(0), &column(1));
            let kappas: Vec<f64> = (0..=60)
                .map(|l| {
                    if l < 2 {
                        0.0
                    } else {
                        epsilon * (2.0 * epsilon).powi(l as i32 - 1) * crate::scalar::factorial::<f64>(l - 1)
                    }
                })
                .collect();
            let series = exp_wick_series(&kappas, 1e-15)?;
            if let Some(b) = series.tail_bound {
                details.insert("series_tail_bound".into(), b);
            }
            (r, s, Some(series.partial_sum))
        }
        Prepared::ScalarIdentity { levels, .. } => {
            let mut last = (0.0, 0.0);
            for (j, (f, _)) in levels.iter().enumerate() {
                let (m, s) = mean_stderr(&column(j));
                let steps = cfg.grid / f;
                refinements.push(RefinementRow {
                    points: steps + 1,
                    mesh: 1.0 / steps as f64,
                    mean: m,
                    stderr: s,
                });
                last = (m, s);
            }
            (last.0, last.1, None)
        }
        Prepared::RosenblattVariance { sampler } => {
            let (m, s) = mean_stderr(&column(0));
            let (mean, mean_se) = mean_stderr(&column(1));
            details.insert("kernel_variance".into(), sampler.variances()[0][0]);
            details.insert("truncation_bias".into(), sampler.variances()[0][0] - 1.0);
            details.insert("sample_mean".into(), mean);
            details.insert("sample_mean_stderr".into(), mean_se);
            (m, s, Some(1.0))
        }
    };
    Ok(ExperimentReport {
        experiment: cfg.experiment.clone(),
        estimate,
        stderr,
        target,
        n_paths,
        seed,
        config: cfg.clone(),
        refinements,
        details,
    })
}
