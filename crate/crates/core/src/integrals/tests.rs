use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use num_traits::Zero;

use crate::scalar::Scalar;
use crate::chaos2::Chaos2Model;
use crate::{Kernel, Rational};

fn x(i: Symbol) -> Multiset {
    Multiset::repeat(i, 1)
}

fn poly(coeffs: &[f64]) -> FloatPoly {
    WickPolynomial::from_coeffs(coeffs)
}

fn uniform_grid(n: usize) -> Vec<f64> {
    (0..=n).map(|k| k as f64 / n as f64).collect()
}

fn random_path(times: &[f64], d: usize, seed: u64) -> SamplePath<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = times
        .iter()
        .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    SamplePath::new(times.to_vec(), values).unwrap()
}

fn random_poly(d: usize, degree: usize, rng: &mut ChaCha8Rng) -> FloatPoly {
    let mut p = FloatPoly::zero();
    for _ in 0..4 {
        let n = rng.gen_range(0..=degree);
        let m = Multiset::new((0..n).map(|_| rng.gen_range(0..d) as Symbol));
        p.add_term(m, rng.gen_range(-2i32..=2) as f64 / 2.0);
    }
    p
}

fn exact(p: &FloatPoly) -> WickPolynomial<Rational> {
    p.map(|c| Rational::real(*c))
}

/// Path of a second-chaos process from one Gaussian draw on its grid.
fn chaos2_path(model: &Chaos2Process, times: &[f64], seed: u64) -> SamplePath<f64> {
    let n = model.kernel(0, 1.0).n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..n)
        .map(|_| {
            let (a, b): (f64, f64) = (rng.gen_range(1e-12..1.0), rng.gen_range(0.0..1.0));
            (-2.0 * a.ln()).sqrt() * (std::f64::consts::TAU * b).cos()
        })
        .collect();
    let values = times
        .iter()
        .map(|&t| {
            (0..model.dim())
                .map(|b| {
                    let k = model.kernel(b as Symbol, t);
                    let mut acc = 0.0;
                    for i in 0..n {
                        acc -= *k.entry(i, i);
                        for j in 0..n {
                            acc += *k.entry(i, j) * z[i] * z[j];
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    SamplePath::new(times.to_vec(), values).unwrap()
}

#[test]
fn young_sum_of_constant_telescopes() {
    let path = random_path(&uniform_grid(13), 1, 1);
    let v = young_integral(&Integrand::scalar(poly(&[1.0])), &path).unwrap();
    assert!((v - (path.value(13)[0] - path.value(0)[0])).abs() < 1e-14);
}

#[test]
fn young_sum_on_smooth_paths() {
    let g = uniform_grid(4000);
    let lin = SamplePath::scalar(g.clone(), g.clone()).unwrap();
    let v = young_integral(&Integrand::scalar(poly(&[0.0, 1.0])), &lin).unwrap();
    assert!((v - 0.5).abs() < 2e-4);
    let sq = SamplePath::scalar(g.clone(), g.iter().map(|u| u * u).collect()).unwrap();
    let v = young_integral(&Integrand::scalar(poly(&[0.0, 1.0])), &sq).unwrap();
    assert!((v - 0.5).abs() < 1e-3, "{v}");
}

#[test]
fn single_point_grid_gives_zero() {
    let path = SamplePath::scalar(vec![0.5], vec![1.3]).unwrap();
    let m = FbmModel::new(0.7).unwrap();
    let p = Integrand::scalar(poly(&[0.0, 0.0, 1.0]));
    assert_eq!(young_integral(&p, &path).unwrap(), 0.0);
    assert_eq!(wick_riemann_sum(&p, &path, &m).unwrap(), 0.0);
}

#[test]
fn fbm_single_interval() {
    let h: f64 = 0.7;
    let m = FbmModel::new(h).unwrap();
    let (u, v) = (0.3, 0.8);
    let path = SamplePath::scalar(vec![u, v], vec![0.4, -0.9]).unwrap();
    let got = wick_riemann_sum(&Integrand::scalar(poly(&[0.0, 1.0])), &path, &m).unwrap();
    let corr = 0.5 * (v.powf(2.0 * h) - u.powf(2.0 * h) - (v - u).powf(2.0 * h));
    assert!((got - (0.4 * -1.3 - corr)).abs() < 1e-15);

    let bm = FbmModel::new(0.5).unwrap();
    let got = wick_riemann_sum(&Integrand::scalar(poly(&[0.0, 1.0])), &path, &bm).unwrap();
    assert!((got - 0.4 * -1.3).abs() < 1e-15);
}

#[test]
fn wick_sum_over_constant_has_no_correction() {
    let m = FbmModel::new(0.7).unwrap();
    let path = random_path(&uniform_grid(9), 1, 2);
    let plan = WickSumPlan::new(&Integrand::scalar(poly(&[2.0])), &m, path.times()).unwrap();
    assert!(plan.corrections().iter().all(|q| q.is_zero()));
}

#[test]
fn same_grid_identity_is_exact() {
    let process = Chaos2Process::random(2, 3, false, 11).unwrap();
    let model = Exactify(&process);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ps: Vec<_> = (0..2).map(|_| exact(&random_poly(2, 3, &mut rng))).collect();
    let integrand = Integrand::Fixed(ps);
    let times = vec![0.0, 0.125, 0.3, 0.5, 0.8, 1.0];
    let path = random_path(&times, 2, 4).map(|v| Rational::real(*v));
    let wick = wick_riemann_sum(&integrand, &path, &model).unwrap();
    let young = young_integral(&integrand, &path).unwrap();
    let corr = discrete_correction(&integrand, &path, &model).unwrap();
    assert_eq!(wick, young - corr.clone());
    assert!(!corr.is_zero());

    let a = WickSumPlan::new(&integrand, &model, &times).unwrap();
    let b = WickSumPlan::derivative_form(&integrand, &model, &times).unwrap();
    assert_eq!(a.corrections(), b.corrections());
}

#[test]
fn relation_free_flag_is_required() {
    let m = Chaos2Model::new("two", vec![Kernel::rank_one(&[1.0], 1.0, vec![1.0], "h").unwrap(); 2]).unwrap();
    let path = random_path(&uniform_grid(3), 2, 1);
    let p = Integrand::Fixed(vec![poly(&[1.0]), poly(&[1.0])]);
    assert!(matches!(
        wick_riemann_sum(&p, &path, &m),
        Err(WickError::NotWellDefined { .. })
    ));
}

#[test]
fn gaussian_models_only_need_first_order_terms() {
    let m = FbmModel::with_dim(0.7, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let ps: Vec<_> = (0..2).map(|_| random_poly(2, 4, &mut rng)).collect();
    let terms = correction_terms(&ps, m.max_order());
    assert!(!terms.is_empty());
    assert!(terms.iter().all(|t| t.alpha.len() == 1));
}

#[test]
fn rosenblatt_square_has_two_terms() {
    let spec = crate::chaos2::rosenblatt::RosenblattSpec::new(0.7).unwrap();
    let m = RosenblattModel::new(spec);
    let terms = correction_terms(&[poly(&[0.0, 0.0, 1.0])], CumulantModel::max_order(&m));
    let got: Vec<(usize, f64)> = terms.iter().map(|t| (t.alpha.len(), t.weight)).collect();
    assert_eq!(got, vec![(1, 1.0), (2, 0.5)]);
}

#[test]
fn fbm_mean_of_x_dx_is_half() {
    for h in [0.6, 0.7, 0.9] {
        let m = FbmModel::new(h).unwrap();
        let mean = ito_stratonovich_mean(&Integrand::scalar(poly(&[0.0, 1.0])), &m, &uniform_grid(1024)).unwrap();
        assert!((mean - 0.5).abs() < 1e-3, "{h}: {mean}");
    }
}

#[test]
fn discrete_ito_residual_of_square() {
    let fbm = FbmModel::new(0.7).unwrap();
    let model = Exactify(&fbm);
    let times = vec![0.0, 0.1, 0.35, 0.6, 1.0];
    let path = random_path(&times, 1, 9).map(|v| Rational::real(*v));
    let p = exact(&poly(&[0.0, 0.0, 1.0]));
    let r = ito_residual(&p, &path, &model).unwrap();
    let mut want = Rational::zero();
    for k in 0..times.len() - 1 {
        let (u, v) = (times[k], times[k + 1]);
        let dx = path.value(k + 1)[0].clone() - path.value(k)[0].clone();
        let var = model.kappa(&[Variable::at(0, v), Variable::at(0, v)])
            - Rational::int(2) * model.kappa(&[Variable::at(0, u), Variable::at(0, v)])
            + model.kappa(&[Variable::at(0, u), Variable::at(0, u)]);
        want = want + dx.clone() * dx - var;
    }
    assert_eq!(r, want);
}

#[test]
fn ito_correction_of_square_and_linear() {
    let m = FbmModel::new(0.7).unwrap();
    let path = random_path(&uniform_grid(2048), 1, 5);
    let c = ito_correction(&poly(&[0.0, 0.0, 1.0]), &path, &m).unwrap();
    assert!((c - 1.0).abs() < 1e-4, "{c}");
    assert_eq!(ito_correction(&poly(&[3.0, -1.0]), &path, &m).unwrap(), 0.0);
}

#[test]
fn rosenblatt_ito_correction_matches_generic() {
    let spec = crate::chaos2::rosenblatt::RosenblattSpec::new(0.7).unwrap();
    let m = RosenblattModel::new(spec);
    let times: Vec<f64> = uniform_grid(64).into_iter().skip(1).collect();
    let p = poly(&[0.5, -1.0, 0.0, 2.0, 0.25]);
    let a = CorrectionPlan::ito(&p, &m, &times).unwrap();
    let b = CorrectionPlan::rosenblatt(&p, &m, &times).unwrap();
    let path = random_path(&times, 1, 6);
    let (va, vb) = (a.evaluate(&path).unwrap(), b.evaluate(&path).unwrap());
    assert!((va - vb).abs() < 1e-10 * va.abs().max(1.0), "{va} {vb}");
}

fn plans_agree(a: &CorrectionPlan, b: &CorrectionPlan, tol: f64) {
    for (p, q) in a.polynomials().iter().zip(b.polynomials()) {
        let keys: BTreeSet<&Multiset> = p.terms().chain(q.terms()).map(|(k, _)| k).collect();
        for k in keys {
            let (x, y) = (p.coefficient(k), q.coefficient(k));
            assert!((x - y).abs() <= tol * x.abs().max(1.0), "{k:?}: {x} {y}");
        }
    }
}

#[test]
fn exchangeable_gaussian_simplification() {
    for seed in 0..5 {
        let m = ExchangeableGaussian::random(3, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        let ps: Vec<_> = (0..3).map(|_| random_poly(3, 3, &mut rng)).collect();
        let integrand = Integrand::Fixed(ps);
        let times: Vec<f64> = uniform_grid(16).into_iter().skip(1).collect();
        let generic = CorrectionPlan::ito_stratonovich(&integrand, &m, &times).unwrap();
        let special = CorrectionPlan::exchangeable_gaussian(&integrand, &m, &times).unwrap();
        plans_agree(&generic, &special, 1e-10);
    }
}

#[test]
fn independent_components_simplification() {
    let m = Chaos2Process::random(2, 3, true, 21).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let ps: Vec<_> = (0..2).map(|_| random_poly(2, 3, &mut rng)).collect();
    let integrand = Integrand::Fixed(ps);
    let times: Vec<f64> = uniform_grid(8).into_iter().skip(1).collect();
    let generic = CorrectionPlan::ito_stratonovich(&integrand, &m, &times).unwrap();
    let special = CorrectionPlan::independent_components(&integrand, &m, &times).unwrap();
    plans_agree(&generic, &special, 1e-10);
}

#[test]
fn non_centred_split_is_exact() {
    let fbm = FbmModel::new(0.7).unwrap();
    let mean = |b: Symbol, t: f64| Rational::real(1.5 * t - 0.25 * b as f64);
    let model = WithMean {
        inner: Exactify(&fbm),
        mean: Box::new(mean),
    };
    let centred = Exactify(&fbm);
    let times = vec![0.0, 0.2, 0.45, 0.7, 1.0];
    let tilde = random_path(&times, 1, 12).map(|v| Rational::real(*v));
    let path = SamplePath::new(
        times.clone(),
        times
            .iter()
            .zip(tilde.values())
            .map(|(&t, v)| vec![v[0].clone() + mean(0, t)])
            .collect(),
    )
    .unwrap();
    let p = exact(&poly(&[1.0, -2.0, 0.5, 1.0]));
    let lhs = wick_riemann_sum(&Integrand::scalar(p.clone()), &path, &model).unwrap();
    // p̃(u, x) = p(x + μ(u)) by Taylor expansion.
    let shifted = Integrand::dynamic(|u| {
        let mut q = WickPolynomial::zero();
        for k in 0..=p.degree() {
            let d = differentiate(&p, &Multiset::repeat(0, k));
            q.add_term(Multiset::repeat(0, k), d.eval(&[mean(0, u)])?);
        }
        Ok(vec![q])
    });
    let rhs = wick_riemann_sum(&shifted, &tilde, &centred).unwrap()
        + drift_sum(&Integrand::scalar(p.clone()), &path, mean).unwrap();
    assert_eq!(lhs, rhs);
}

#[test]
fn scalar_identity_degree_zero_is_exact() {
    let fbm = FbmModel::new(0.7).unwrap();
    let model = Exactify(&fbm);
    let times = vec![0.0, 0.3, 0.5, 1.0];
    let path = random_path(&times, 1, 13).map(|v| Rational::real(*v));
    let r = scalar_identity(0, &path, &model).unwrap();
    assert!(r.residual.is_zero());
    assert_eq!(r.lhs, path.value(3)[0].clone() - path.value(0)[0].clone());
    let r = shifted_scalar_identity(0, &path, &model).unwrap();
    assert!(r.residual.is_zero());
}

#[test]
fn scalar_identity_on_chaos2_path() {
    let process = Chaos2Process::random(1, 4, false, 31).unwrap();
    let times = uniform_grid(512);
    let path = chaos2_path(&process, &times, 32);
    for shifted in [false, true] {
        let report = verify_scalar_identities(2, &path, &process, 4, shifted).unwrap();
        assert_eq!(report.mesh_table.len(), 4);
        let res: Vec<f64> = report.mesh_table.iter().map(|r| r.residual.abs()).collect();
        assert!(res[3] < res[0], "{res:?}");
        assert!(res[3] < 1e-2 * report.rhs.abs().max(1.0), "{res:?}");
    }
}

#[test]
fn grid_mismatch_is_reported() {
    let m = FbmModel::new(0.7).unwrap();
    let plan = WickSumPlan::new(&Integrand::scalar(poly(&[0.0, 1.0])), &m, &uniform_grid(4)).unwrap();
    let path = random_path(&uniform_grid(5), 1, 1);
    assert!(matches!(plan.evaluate(&path), Err(WickError::GridMismatch(_))));
}

#[test]
fn invalid_paths_are_rejected() {
    assert!(SamplePath::<f64>::scalar(vec![], vec![]).is_err());
    assert!(SamplePath::scalar(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
    assert!(SamplePath::scalar(vec![0.0, 1.0], vec![1.0, f64::NAN]).is_err());
}

#[test]
fn appell_integrand_uses_law_at_time() {
    let m = FbmModel::new(0.7).unwrap();
    let ps = appell_integrand::<f64, _>(2, &m).at(0.5).unwrap();
    assert!((ps[0].coefficient(&Multiset::empty()) + 0.5f64.powf(1.4)).abs() < 1e-15);
    assert_eq!(ps[0].coefficient(&x(0).with(0)), 1.0);
}
