//! Worked examples per module, each against an oracle computed here.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr_free::normal;

use weakdep::bedistance::{
    dkw_halfwidth, empirical_delta, exact_delta_for_model, exact_delta_gaussian_linear, gaussian_closed_form_delta,
    BEEstimate, DeltaMethod, Normalization,
};
use weakdep::blocks::{conditional_variances, degeneracy_probability, make_layout, BlockMode};
use weakdep::dependence::{
    check_assumptions, closed_form_profile, dyadic_grid, theta_gl_surrogate, theta_profile, AssumptionSpec, Verdict,
};
use weakdep::innovations::{CoupledStream, InnovationLaw, Series};
use weakdep::numerics::normal_cdf;
use weakdep::processes::{CoefficientScheme, DoublingObservable, GlWalkModel, LinearModel, ProcessModel, Truncation};
use weakdep::rates::{dyadic_n_grid, fit_rate};
use weakdep::variance::{
    autocovariance, exact_longrun_variance_linear, exact_sum_variance_linear, longrun_variance, sigma_hat_m,
    AutocovMethod, MonteCarlo,
};

/// Box-Muller draws for synthetic data, independent of the library's streams.
mod rand_distr_free {
    use rand::Rng;

    pub fn normal(rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.gen_range(f64::EPSILON..1.0);
        let v: f64 = rng.gen();
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    }
}

fn gaussian(scheme: CoefficientScheme, depth: Option<usize>) -> ProcessModel {
    ProcessModel::linear(scheme, InnovationLaw::StandardGaussian, depth.map(Truncation::Depth)).unwrap()
}

/// `zeta(s)` by Euler-Maclaurin with three correction terms.
fn zeta(s: f64) -> f64 {
    let n = 1000.0f64;
    let head: f64 = (1..1000).map(|j| (j as f64).powf(-s)).sum();
    head + n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + s * n.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * n.powf(-s - 3.0) / 720.0
}

// innovations

#[test]
fn base_and_prime_series_are_uncorrelated() {
    let r = 1_000_000u64;
    let (mut sxy, mut sx, mut sy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for rep in 0..r {
        let s = CoupledStream::new(11, rep, InnovationLaw::StandardGaussian);
        let (x, y) = (s.value(Series::Base, 5), s.value(Series::Prime, 5));
        sxy += x * y;
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
    }
    let rf = r as f64;
    let cov = sxy / rf - sx * sy / rf / rf;
    let corr = cov / ((sxx / rf - (sx / rf).powi(2)) * (syy / rf - (sy / rf).powi(2))).sqrt();
    assert!(corr.abs() <= 4.0 / rf.sqrt(), "corr {corr}");
    // unit variance within Monte Carlo error
    assert!((sxx / rf - 1.0).abs() < 5.0 * (2.0 / rf).sqrt());
}

#[test]
fn sample_moments_of_centered_laws() {
    for law in [InnovationLaw::Rademacher, InnovationLaw::CenteredUniform] {
        let s = CoupledStream::new(4, 0, law);
        let r = 200_000;
        let xs: Vec<f64> = (0..r).map(|t| s.value(Series::Base, t)).collect();
        let mean = xs.iter().sum::<f64>() / r as f64;
        let var = xs.iter().map(|x| x * x).sum::<f64>() / r as f64 - mean * mean;
        assert!(mean.abs() < 5.0 / (r as f64).sqrt(), "{law:?} mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "{law:?} var {var}");
    }
}

#[test]
fn raw_bits_concentrate_at_one_half() {
    let r = 10_000u64;
    let mut total = 0.0;
    for rep in 0..r {
        let w = CoupledStream::new(3, rep, InnovationLaw::RawBit).draw_window(Series::Base, 0, 64);
        assert!(w.values().iter().all(|v| *v == 0.0 || *v == 1.0));
        total += w.values().iter().sum::<f64>();
    }
    let mean = total / (64 * r) as f64;
    assert!((mean - 0.5).abs() <= 4.0 * 0.5 / ((64 * r) as f64).sqrt());
}

#[test]
fn filter_examples() {
    let w = CoupledStream::new(1, 2, InnovationLaw::StandardGaussian).draw_window(Series::Base, 10, 8);
    let p = w.primed(3).unwrap();
    for j in [0, 1, 2, 4, 5, 6, 7] {
        assert_eq!(p.get(j).to_bits(), w.get(j).to_bits());
    }
    assert_eq!(p, w.primed(3).unwrap());
    assert_eq!(p.get(3), w.starred(3).unwrap().get(3));
    let s0 = w.starred(0).unwrap();
    let prime = CoupledStream::new(1, 2, InnovationLaw::StandardGaussian).draw_window(Series::Prime, 10, 8);
    assert_eq!(s0.values(), prime.values());
    let p0 = w.primed(0).unwrap();
    assert!((1..8).all(|j| p0.get(j) == w.get(j)) && p0.get(0) != w.get(0));
    let last = w.starred(7).unwrap();
    assert!((0..7).all(|j| last.get(j) == w.get(j)) && last.get(7) != w.get(7));
}

// processes

#[test]
fn evaluate_readouts() {
    let id = gaussian(CoefficientScheme::identity(), None);
    let mut w = CoupledStream::new(0, 0, InnovationLaw::StandardGaussian).draw_window(Series::Base, 0, 1);
    w.set(0, 0.7);
    assert_eq!(id.evaluate(&w).unwrap(), 0.7);

    let pl = gaussian(CoefficientScheme::power_law(1.3), Some(8));
    let mut w = CoupledStream::new(0, 0, InnovationLaw::StandardGaussian).draw_window(Series::Base, 0, 8);
    (0..8).for_each(|j| w.set(j, 0.0));
    w.set(2, 1.0);
    assert!((pl.evaluate(&w).unwrap() - 2f64.powf(-1.3)).abs() < 1e-15);

    let d = ProcessModel::doubling(DoublingObservable::CenteredX);
    let mut w = CoupledStream::new(0, 0, InnovationLaw::RawBit).draw_window(Series::Base, 0, 64);
    (0..64).for_each(|j| w.set(j, 0.0));
    assert_eq!(d.evaluate(&w).unwrap(), -0.5);
}

#[test]
fn identity_path_is_the_innovation_sequence() {
    let m = gaussian(CoefficientScheme::identity(), None);
    let s = CoupledStream::new(9, 4, InnovationLaw::StandardGaussian);
    let path = m.sample_path(9, 4, 20);
    for (k, x) in path.iter().enumerate() {
        assert_eq!(*x, s.value(Series::Base, k as i64 + 1));
    }
    assert_eq!(path, m.sample_path(9, 4, 20));
}

#[test]
fn doubling_cos_lag_one_covariance_vanishes() {
    let m = ProcessModel::doubling(DoublingObservable::Cos2pi);
    let r = 100_000u64;
    let c: f64 = (0..r)
        .map(|rep| {
            let p = m.sample_path(5, rep, 2);
            p[0] * p[1]
        })
        .sum::<f64>()
        / r as f64;
    assert!(c.abs() <= 5.0 / (r as f64).sqrt(), "{c}");
}

#[test]
fn truncation_error_examples() {
    let g = gaussian(CoefficientScheme::geometric(0.5), Some(64));
    let want = 2f64.powi(-10) * (4.0f64 / 3.0).sqrt();
    assert!((g.truncation_error(10).unwrap() - want).abs() < 1e-15);

    let p = gaussian(CoefficientScheme::power_law(1.3), Some(1 << 16));
    let brute: f64 = (10_000..1_000_000).map(|j| (j as f64).powf(-2.6)).sum::<f64>().sqrt();
    let got = p.truncation_error(10_000).unwrap();
    assert!((got / brute - 1.0).abs() < 0.01, "{got} vs {brute}");

    let d = ProcessModel::doubling(DoublingObservable::Cos2pi);
    assert_eq!(d.truncation_error(64).unwrap(), 2.0 * std::f64::consts::PI * 2f64.powi(-64));
}

#[test]
fn projection_examples() {
    let p = gaussian(CoefficientScheme::power_law(1.3), Some(64));
    let ProcessModel::Linear(proj) = p.m_project(5).unwrap() else { panic!() };
    let want = [0.0, 1.0, 2f64.powf(-1.3), 3f64.powf(-1.3), 4f64.powf(-1.3)];
    assert_eq!(&proj.coefficients()[..5], &want);
    assert!(proj.coefficients()[5..].iter().all(|a| *a == 0.0));

    let g = gaussian(CoefficientScheme::geometric(0.5), Some(20));
    assert_eq!(g.m_project(20).unwrap(), g);
}

// dependence

#[test]
fn profile_triangle_and_closed_form_stderr() {
    let m = gaussian(CoefficientScheme::power_law(1.5), Some(512));
    let ls: Vec<usize> = (1..=16).collect();
    let prof = theta_profile(&m, &ls, 2.0, MonteCarlo::new(2, 4000)).unwrap();
    for w in prof.entries.windows(2) {
        let se = 3.0 * (w[0].se_prime + w[0].se_star + w[1].se_star);
        assert!(w[0].theta_prime <= w[0].theta_star + w[1].theta_star + se);
        assert!(w[0].theta_prime >= 0.0 && w[0].theta_star >= 0.0);
    }
    let ProcessModel::Linear(lin) = &m else { panic!() };
    let closed = closed_form_profile(lin, &ls, 2.0).unwrap();
    assert!(closed.entries.iter().all(|e| e.se_prime == 0.0 && e.se_star == 0.0));
}

#[test]
fn gl_surrogate_examples() {
    let gl = GlWalkModel::new(2, 1.0, vec![1.0, 0.0], 0, 0).unwrap();
    assert_eq!(theta_gl_surrogate(&gl, 0, 2.0, MonteCarlo::new(1, 100)).unwrap().value, 0.0);
    let rot = GlWalkModel::new(2, 0.0, vec![1.0, 0.0], 0, 0).unwrap();
    let s = theta_gl_surrogate(&rot, 5, 2.0, MonteCarlo::new(1, 200)).unwrap();
    assert!(s.value.abs() < 1e-12, "{}", s.value);
    let a = theta_gl_surrogate(&gl, 1, 2.0, MonteCarlo::new(1, 10_000)).unwrap();
    let b = theta_gl_surrogate(&gl, 20, 2.0, MonteCarlo::new(1, 10_000)).unwrap();
    assert!(a.value - b.value > 3.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt());
}

fn verdict(scheme: CoefficientScheme, b: f64) -> Verdict {
    let lin = LinearModel::new(scheme, InnovationLaw::StandardGaussian, Some(Truncation::Depth(1 << 16))).unwrap();
    let prof = closed_form_profile(&lin, &dyadic_grid(12), 2.0).unwrap();
    check_assumptions(&prof, &AssumptionSpec::new(2.0, 1.0, b).unwrap()).unwrap().prime.verdict
}

#[test]
fn assumption_verdicts() {
    assert_eq!(verdict(CoefficientScheme::geometric(0.5), 0.9), Verdict::SatisfiedByFit);
    assert_eq!(verdict(CoefficientScheme::power_law(1.3), 0.6), Verdict::ViolatedByFit);
    assert_eq!(verdict(CoefficientScheme::power_law(3.0), 1.1), Verdict::SatisfiedByFit);
}

// variance

#[test]
fn autocovariance_examples() {
    let id = autocovariance(&gaussian(CoefficientScheme::identity(), None), 5, AutocovMethod::ExactLinear, None).unwrap();
    assert_eq!(id.gamma, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let d = autocovariance(&ProcessModel::doubling(DoublingObservable::Cos2pi), 5, AutocovMethod::ExactDoubling, None)
        .unwrap();
    assert_eq!(d.gamma, vec![0.5, 0.0, 0.0, 0.0, 0.0, 0.0]);

    let g = gaussian(CoefficientScheme::geometric(0.5), Some(60));
    let t = autocovariance(&g, 10, AutocovMethod::ExactLinear, None).unwrap();
    for k in 0..=10usize {
        let brute: f64 = (0..60 - k).map(|j| 0.5f64.powi(j as i32) * 0.5f64.powi((j + k) as i32)).sum();
        assert!((t.gamma[k] - brute).abs() < 1e-12);
    }
    assert!((longrun_variance(&id).unwrap().value - 1.0).abs() < 1e-15);
}

#[test]
fn power_law_longrun_is_zeta_squared() {
    let z = zeta(1.3);
    let got = exact_longrun_variance_linear(&CoefficientScheme::power_law(1.3)).unwrap();
    assert!((got - z * z).abs() < 1e-6, "{got} vs {}", z * z);
}

#[test]
fn sum_variance_examples() {
    assert!((exact_sum_variance_linear(&CoefficientScheme::identity(), 100) - 100.0).abs() < 1e-12);
    let t = autocovariance(&gaussian(CoefficientScheme::identity(), None), 16, AutocovMethod::ExactLinear, None).unwrap();
    for m in 1..=16 {
        assert!((sigma_hat_m(&t, m).unwrap().value - 0.5).abs() < 1e-15);
    }
    let g = gaussian(CoefficientScheme::geometric(0.5), None);
    let t = autocovariance(&g, 8, AutocovMethod::ExactLinear, None).unwrap();
    assert!(sigma_hat_m(&t, 8).unwrap().residual < 1e-12);
}

/// `sigma_hat_m^2 - ss_m^2 / 2` shrinks with m for a = 1.3, but slowly: the
/// gap is still about 0.5 at m = 2^10.
#[test]
fn sigma_hat_approaches_half_longrun() {
    let model = gaussian(CoefficientScheme::power_law(1.3), Some(1 << 16));
    let gaps: Vec<f64> = [256usize, 1024, 4096]
        .iter()
        .map(|&m| {
            let p = model.m_project(m).unwrap();
            let t = autocovariance(&p, m, AutocovMethod::ExactLinear, None).unwrap();
            let s = sigma_hat_m(&t, m).unwrap();
            (s.value - s.longrun / 2.0).abs()
        })
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[1] > 0.1, "{gaps:?}");
}

// bedistance

#[test]
fn rademacher_single_step() {
    let m = ProcessModel::linear(CoefficientScheme::identity(), InnovationLaw::Rademacher, None).unwrap();
    let e = empirical_delta(&m, 1, Normalization::SqrtNSs2, MonteCarlo::new(5, 10_000), None, 0.01).unwrap();
    let truth = normal_cdf(1.0) - 0.5;
    assert!((e.delta - truth).abs() <= dkw_halfwidth(10_000, 0.01));
}

#[test]
fn closed_form_matches_grid_search() {
    let r = 1.1;
    let mut best = 0.0f64;
    for i in 0..=200_000 {
        let x = -10.0 + i as f64 * 1e-4;
        best = best.max((normal_cdf(x / r) - normal_cdf(x)).abs());
    }
    assert!((gaussian_closed_form_delta(r) - best).abs() < 1e-6);
    assert_eq!(
        exact_delta_gaussian_linear(&CoefficientScheme::identity(), 77, Normalization::SqrtNSs2).unwrap().delta,
        0.0
    );
}

#[test]
fn closed_form_matches_monte_carlo() {
    let m = gaussian(CoefficientScheme::power_law(1.3), Some(256));
    let n = 1024;
    let exact = exact_delta_for_model(&m, n, Normalization::SqrtNSs2).unwrap();
    let mc = empirical_delta(&m, n, Normalization::SqrtNSs2, MonteCarlo::new(8, 1_000_000), None, 0.01).unwrap();
    assert!(exact.delta > 0.0);
    assert!((mc.delta - exact.delta).abs() <= mc.halfwidth(), "{} vs {}", mc.delta, exact.delta);
}

// blocks

#[test]
fn identity_blocks_are_one_half() {
    let m = gaussian(CoefficientScheme::identity(), None);
    let layout = make_layout(2 * 9 * 8 + 8, 8).unwrap();
    let d = conditional_variances(&m, &layout, BlockMode::ExactLinear, 0, 0).unwrap();
    assert!(d.per_block[..layout.blocks - 1].iter().all(|v| (*v - 0.5).abs() < 1e-15));
    let freq = degeneracy_probability(&m, &layout, BlockMode::ExactLinear, MonteCarlo::new(0, 10_000), 1e-10).unwrap();
    assert_eq!(freq, 0.0);
    // every conditional variance sits below twice ss_m^2 = 2
    let freq = degeneracy_probability(&m, &layout, BlockMode::ExactLinear, MonteCarlo::new(0, 100), 2.0).unwrap();
    assert_eq!(freq, 1.0);
}

#[test]
fn geometric_block_identity() {
    let m = gaussian(CoefficientScheme::geometric(0.5), None);
    let d = conditional_variances(&m, &make_layout(16 * 11, 16).unwrap(), BlockMode::ExactLinear, 0, 0).unwrap();
    assert!(d.residual.unwrap() < 1e-10);
    assert!(d.per_block.iter().all(|v| *v >= 0.0) && d.varsigma_bar.unwrap() >= 0.0);
}

#[test]
fn nested_blocks_agree_with_exact() {
    let m = gaussian(CoefficientScheme::geometric(0.5), None);
    let layout = make_layout(7 * 8, 8).unwrap();
    let exact = conditional_variances(&m, &layout, BlockMode::ExactLinear, 4, 0).unwrap();
    let inner = 10_000;
    let nested = conditional_variances(&m, &layout, BlockMode::NestedMc { inner }, 4, 0).unwrap();
    for (e, n) in exact.per_block.iter().zip(&nested.per_block) {
        // the conditional block sum is Gaussian: Var(sample variance) = 2 s^4 / K
        let se = e * (2.0 / inner as f64).sqrt();
        assert!((e - n).abs() <= 3.0 * se, "{e} vs {n}");
    }
}

// rates

#[test]
fn closed_form_grid_is_strictly_decreasing() {
    let s = CoefficientScheme::power_law(1.3);
    let d: Vec<f64> = dyadic_n_grid(8, 18)
        .into_iter()
        .map(|n| exact_delta_gaussian_linear(&s, n, Normalization::SqrtNSs2).unwrap().delta)
        .collect();
    assert!(d[0] > 0.0 && d.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
}

#[test]
fn noisy_power_law_coverage() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let grid = dyadic_n_grid(4, 14);
    let covered = (0..100)
        .filter(|_| {
            let est: Vec<BEEstimate> = grid
                .iter()
                .map(|&n| {
                    let d = 0.8 * (n as f64).powf(-0.5) * (0.1 * normal(&mut rng)).exp();
                    BEEstimate {
                        n,
                        normalization: Normalization::SqrtNSs2,
                        delta: d,
                        low: d * 0.9,
                        high: d * 1.1,
                        method: DeltaMethod::Empirical,
                        replications: 1,
                        seed: 0,
                        first_replication: 0,
                    }
                })
                .collect();
            let fit = fit_rate(&est).unwrap();
            (fit.slope + 0.5).abs() <= fit.slope_halfwidth
        })
        .count();
    assert!(covered >= 90, "{covered}/100");
}
