//! One function per subcommand; each returns the result in every output format.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Value};

use wick_core::appell::{
    change_of_chaos_expand, reverse_product_expand, AppellEngine, Basis, WickPolynomial,
};
use wick_core::chaos2::rosenblatt::{kernel_truncation_report, rosenblatt_cumulant, KernelGrid, RosenblattSpec};
use wick_core::chaos2::{chaos2_change_of_chaos, joint_cumulant_trace, Chaos2Kernel, Chaos2Term};
use wick_core::combinatorics::{count_diagrams, enumerate_diagrams, DiagramFilter};
use wick_core::cumulants::{moment, vars_of, CumulantModel, Variable};
use wick_core::integrals::{
    discrete_correction, ito_residual, verify_scalar_identities, wick_riemann_sum, young_integral, Exactify, FbmModel,
    Integrand, SamplePath, WickSumPlan,
};
use wick_core::simulate::{fbm_sample, monte_carlo, ExperimentConfig};
use wick_core::{Multiset, Rational, Result, Scalar, WickError};

use crate::model::{self, Model, ModelSpec};
use crate::{
    AppellArgs, BasisArg, ChangeChaosArgs, Check, CumulantArgs, DiagramsArgs, Form, McArgs, Method, Outcome,
    RosenblattArgs, VerifyArgs, WickProductArgs,
};

/// Runs `$body` with `$m` bound to the model over its own scalar type.
macro_rules! with_model {
    ($model:expr, $m:ident => $body:expr) => {
        match $model {
            Model::Exact(boxed) => {
                let $m = &*boxed;
                $body
            }
            Model::Float(boxed) => {
                let $m = &*boxed;
                $body
            }
        }
    };
}

fn build(spec: &str) -> Result<Model> {
    model::parse_model(spec).map_err(WickError::Invalid)?.build()
}

fn rows(s: &str) -> Result<Vec<Multiset>> {
    model::parse_rows(s).map_err(WickError::Invalid)
}

fn word(s: &str) -> Result<Multiset> {
    model::parse_word(s).map_err(WickError::Invalid)
}

fn render<T: Scalar>(p: &WickPolynomial<T>, names: &[String]) -> String {
    if names.len() == 1 {
        p.pretty_dense(&names[0])
    } else {
        p.pretty(names)
    }
}

fn poly_outcome<T: Scalar>(p: &WickPolynomial<T>, names: &[String]) -> Outcome {
    Outcome {
        result: p.to_json(),
        text: render(p, names),
        csv: None,
    }
}

pub fn appell(a: &AppellArgs) -> Result<Outcome> {
    let index = match (&a.degree, &a.index) {
        (Some(n), _) => Multiset::repeat(0, *n),
        (None, Some(w)) => word(w)?,
        (None, None) => return Err(WickError::Invalid("give --degree or --index".into())),
    };
    with_model!(build(&a.model)?, m => {
        fits(std::slice::from_ref(&index), m.dim())?;
        let engine = AppellEngine::new(m);
        let p = match a.form {
            Form::Closed => engine.closed_form(&index)?,
            Form::Recursive => engine.recursive(&index)?,
            Form::Inverse => engine.inverse(&index)?,
            Form::Generating => engine.generating(&index)?,
        };
        Ok(poly_outcome(&p, &m.names()))
    })
}

pub fn wick_product(a: &WickProductArgs) -> Result<Outcome> {
    let rows = rows(&a.rows)?;
    with_model!(build(&a.model)?, m => {
        fits(&rows, m.dim())?;
        let engine = AppellEngine::new(m);
        let p = match a.method {
            Method::Diagrams => {
                let p = reverse_product_expand(&rows, m)?;
                match a.basis {
                    BasisArg::Monomial => p,
                    BasisArg::Appell => engine.to_appell_basis(&p)?,
                }
            }
            Method::Iterate => {
                let out = match a.basis {
                    BasisArg::Monomial => Basis::Monomial,
                    BasisArg::Appell => Basis::Appell,
                };
                let mut acc = WickPolynomial::monomial(rows[0].clone(), Scalar::int(1));
                if rows.len() == 1 {
                    acc = engine.wick_product(&acc, &WickPolynomial::constant(Scalar::int(1)), out)?;
                }
                for r in &rows[1..] {
                    let next = WickPolynomial::monomial(r.clone(), Scalar::int(1));
                    acc = engine.wick_product(&acc, &next, out)?;
                }
                acc
            }
        };
        Ok(poly_outcome(&p, &m.names()))
    })
}

/// Rejects symbols beyond the model's components.
fn fits(sets: &[Multiset], dim: usize) -> Result<()> {
    let top = sets.iter().flat_map(|r| r.items().iter().copied()).max();
    match top {
        Some(s) if s as usize >= dim => Err(WickError::Invalid(format!(
            "symbol {} needs a model with at least {} components; this one has {dim}",
            model::names(s as usize + 1)[s as usize],
            s as usize + 1
        ))),
        _ => Ok(()),
    }
}

pub fn diagrams(a: &DiagramsArgs) -> Result<Outcome> {
    let rows = rows(&a.rows)?;
    let mut filter = DiagramFilter::all();
    if a.total {
        filter = filter.total();
    }
    if a.nonflat {
        filter = filter.non_flat();
    }
    if a.gaussian {
        filter = filter.gaussian();
    }
    if a.connected {
        filter = filter.connected();
    }
    if a.nonempty_residual {
        filter = filter.nonempty_residual();
    }
    if a.count {
        let n = count_diagrams(&rows, filter)?;
        return Ok(Outcome {
            result: json!({ "count": n }),
            text: n.to_string(),
            csv: Some(format!("count\n{n}\n")),
        });
    }
    let all = enumerate_diagrams(&rows, filter)?;
    let list: Vec<_> = all.iter().map(|d| d.to_json()).collect();
    let mut text = String::new();
    let mut csv = String::from("edges,residual\n");
    for d in &list {
        let edges: Vec<String> = d.edges.iter().map(|e| format!("{{{}}}", e.join(" "))).collect();
        let _ = writeln!(text, "{}  | {}", edges.join(" "), d.residual.join(" "));
        let _ = writeln!(csv, "{},{}", edges.join(" "), d.residual.join(" "));
    }
    let _ = write!(text, "{} diagrams", list.len());
    Ok(Outcome {
        result: json!({ "count": list.len(), "diagrams": list }),
        text,
        csv: Some(csv),
    })
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| WickError::Invalid(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| WickError::Parse(format!("{}: {e}", path.display())))
}

fn read_kernels(path: &Path) -> Result<Vec<Chaos2Kernel<f64>>> {
    let v = read_json(path)?;
    let items = v
        .as_array()
        .ok_or_else(|| WickError::Parse("expected a JSON array of kernels".into()))?;
    items.iter().map(Chaos2Kernel::from_json).collect()
}

pub fn cumulant(a: &CumulantArgs) -> Result<Outcome> {
    if let Some(path) = &a.kernels {
        let ks = read_kernels(path)?;
        let refs: Vec<_> = ks.iter().collect();
        let value = joint_cumulant_trace(&refs)?;
        return Ok(Outcome {
            result: json!({ "value": value }),
            text: format!("{value}"),
            csv: None,
        });
    }
    let w = word(a.vars.as_deref().unwrap_or_default())?;
    let vars = vars_of(&w);
    with_model!(build(&a.model)?, m => {
        fits(std::slice::from_ref(&w), m.dim())?;
        let value = if a.moment { moment(&vars, m)? } else { m.kappa(&vars) };
        Ok(Outcome {
            result: json!({ "value": value.to_json(), "approx": value.approx() }),
            text: format!("{value}"),
            csv: None,
        })
    })
}

fn term_json(t: &Chaos2Term<f64>) -> Value {
    json!({
        "coefficient": t.coefficient,
        "kernels": t.kernels.iter().map(Chaos2Kernel::to_json).collect::<Vec<_>>(),
        "label": t.label(),
    })
}

pub fn change_chaos(a: &ChangeChaosArgs) -> Result<Outcome> {
    if let Some(path) = &a.kernels {
        let ks = read_kernels(path)?;
        let refs: Vec<_> = ks.iter().collect();
        let d = chaos2_change_of_chaos(&refs)?;
        let mut text = d.pure.label();
        for t in &d.contractions {
            let _ = write!(text, "\n+ {}", t.label());
        }
        return Ok(Outcome {
            result: json!({
                "pure": term_json(&d.pure),
                "contractions": d.contractions.iter().map(term_json).collect::<Vec<_>>(),
            }),
            text,
            csv: None,
        });
    }
    let rows = rows(a.rows.as_deref().unwrap_or_default())?;
    with_model!(build(&a.model)?, m => {
        fits(&rows, m.dim())?;
        let p = change_of_chaos_expand(&rows, m)?;
        Ok(poly_outcome(&p, &m.names()))
    })
}

pub fn rosenblatt(a: &RosenblattArgs) -> Result<Outcome> {
    let spec = RosenblattSpec::new(a.hurst)?;
    if let Some(grids) = &a.truncation {
        let defaults = KernelGrid::with_defaults(a.t, 16)?;
        let choices: Vec<_> = grids.iter().map(|&n| (n, defaults.support, defaults.tail_cells)).collect();
        let rows = kernel_truncation_report(a.t, &spec, &choices)?;
        let mut text = String::from("n_grid  support  tail  variance  bias");
        let mut csv = String::from("n_grid,support,tail_cells,variance,bias\n");
        for r in &rows {
            let _ = write!(
                text,
                "\n{:>6}  {:>7}  {:>4}  {:.8}  {:.3e}",
                r.n_grid, r.support, r.tail_cells, r.variance, r.bias
            );
            let _ = writeln!(csv, "{},{},{},{},{}", r.n_grid, r.support, r.tail_cells, r.variance, r.bias);
        }
        return Ok(Outcome {
            result: json!({ "hurst": a.hurst, "t": a.t, "rows": rows }),
            text,
            csv: Some(csv),
        });
    }
    let est = rosenblatt_cumulant(a.order, a.t, &spec)?;
    let mut csv = String::from("level,value\n");
    for (h, v) in &est.levels {
        let _ = writeln!(csv, "{h},{v}");
    }
    Ok(Outcome {
        text: format!("kappa_{}(X_{}) = {:.10} (error {:.1e})", a.order, a.t, est.value, est.error),
        result: json!({ "hurst": a.hurst, "order": a.order, "t": a.t, "c_h": spec.c_h, "estimate": est }),
        csv: Some(csv),
    })
}

fn fbm_of(spec: &str) -> Result<FbmModel> {
    match model::parse_model(spec).map_err(WickError::Invalid)? {
        ModelSpec::Fbm(h) => FbmModel::new(h),
        _ => Err(WickError::Invalid(format!("verify needs an fbm:H model, got `{spec}`"))),
    }
}

pub fn verify(a: &VerifyArgs) -> Result<Outcome> {
    let fbm = fbm_of(&a.model)?;
    if a.grid == 0 {
        return Err(WickError::Invalid("--grid must be positive".into()));
    }
    let times: Vec<f64> = (0..=a.grid).map(|k| k as f64 / a.grid as f64).collect();
    let path = fbm_sample(fbm.hurst, &times, a.seed)?;
    match a.check {
        Check::ScalarIdentity => {
            let mut report = verify_scalar_identities(a.n, &path, &fbm, a.levels, a.shifted)?;
            report.seed = Some(a.seed);
            let mut text = format!("n = {}, shifted = {}\npoints  mesh  lhs  rhs  residual", a.n, a.shifted);
            let mut csv = String::from("points,mesh,lhs,rhs,residual\n");
            for r in &report.mesh_table {
                let _ = write!(text, "\n{}  {:.3e}  {:.8}  {:.8}  {:.3e}", r.points, r.mesh, r.lhs, r.rhs, r.residual);
                let _ = writeln!(csv, "{},{},{},{},{}", r.points, r.mesh, r.lhs, r.rhs, r.residual);
            }
            Ok(Outcome {
                result: serde_json::to_value(&report).expect("report serializes"),
                text,
                csv: Some(csv),
            })
        }
        Check::ItoResidual => {
            let exact = Exactify(&fbm);
            let path: SamplePath<Rational> = path.map(|v| Rational::real(*v));
            let square = WickPolynomial::monomial(Multiset::repeat(0, 2), Rational::int(1));
            let residual = ito_residual(&square, &path, &exact)?;
            let mut quadratic = Rational::int(0);
            for k in 0..path.len() - 1 {
                let (u, v) = (path.times()[k], path.times()[k + 1]);
                let dx = path.value(k + 1)[0].clone() - path.value(k)[0].clone();
                let var = exact.kappa(&[Variable::at(0, v), Variable::at(0, v)])
                    - Rational::int(2) * exact.kappa(&[Variable::at(0, u), Variable::at(0, v)])
                    + exact.kappa(&[Variable::at(0, u), Variable::at(0, u)]);
                quadratic = quadratic + dx.clone() * dx - var;
            }
            let difference = residual.clone() - quadratic.clone();
            let exact_match = difference == Rational::int(0);
            Ok(Outcome {
                text: format!(
                    "residual = {:.12}\nquadratic variation sum = {:.12}\nexact match: {exact_match}",
                    residual.approx(),
                    quadratic.approx()
                ),
                result: json!({
                    "residual": residual.approx(),
                    "quadratic_sum": quadratic.approx(),
                    "difference": difference.to_json(),
                    "exact": exact_match,
                    "seed": a.seed,
                }),
                csv: None,
            })
        }
        Check::Consistency => {
            let exact = Exactify(&fbm);
            let path: SamplePath<Rational> = path.map(|v| Rational::real(*v));
            let p = WickPolynomial::monomial(Multiset::repeat(0, a.n), Rational::int(1));
            let integrand = Integrand::scalar(p);
            let wick = wick_riemann_sum(&integrand, &path, &exact)?;
            let young = young_integral(&integrand, &path)?;
            let correction = discrete_correction(&integrand, &path, &exact)?;
            let identity = wick == young.clone() - correction.clone();
            let a_plan = WickSumPlan::new(&integrand, &exact, path.times())?;
            let b_plan = WickSumPlan::derivative_form(&integrand, &exact, path.times())?;
            let routes = a_plan.corrections() == b_plan.corrections();
            Ok(Outcome {
                text: format!(
                    "wick = {:.12}\nyoung = {:.12}\ncorrection = {:.12}\nwick = young - correction: {identity}\nroutes agree: {routes}",
                    wick.approx(),
                    young.approx(),
                    correction.approx()
                ),
                result: json!({
                    "wick": wick.approx(),
                    "young": young.approx(),
                    "correction": correction.approx(),
                    "identity_exact": identity,
                    "routes_agree": routes,
                    "seed": a.seed,
                }),
                csv: None,
            })
        }
    }
}

pub fn mc(a: &McArgs) -> Result<Outcome> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| WickError::Invalid(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::new(a.experiment.clone().unwrap_or_default()),
    };
    if let Some(e) = &a.experiment {
        cfg.experiment = e.clone();
    }
    if let Some(h) = a.hurst {
        cfg.hurst = h;
    }
    if let Some(v) = a.grid {
        cfg.grid = v;
    }
    if let Some(v) = a.degree {
        cfg.degree = v;
    }
    if let Some(v) = a.n {
        cfg.n = v;
    }
    if let Some(v) = a.levels {
        cfg.levels = v;
    }
    if let Some(v) = a.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = a.kernel_grid {
        cfg.kernel_grid = v;
    }
    let report = monte_carlo(&cfg, a.paths, a.seed, a.workers)?;
    let mut text = format!(
        "{}: {:.6} ± {:.6} ({} paths, seed {})",
        report.experiment, report.estimate, report.stderr, report.n_paths, report.seed
    );
    if let Some(t) = report.target {
        let _ = write!(text, "\ntarget {t:.6}, z = {:.2}", (report.estimate - t) / report.stderr);
    }
    for (k, v) in &report.details {
        let _ = write!(text, "\n{k} = {v}");
    }
    let mut csv = String::from("points,mesh,mean,stderr\n");
    for r in &report.refinements {
        let _ = writeln!(csv, "{},{},{},{}", r.points, r.mesh, r.mean, r.stderr);
    }
    Ok(Outcome {
        result: serde_json::to_value(&report).expect("report serializes"),
        text,
        csv: Some(csv),
    })
}
