//! Special functions, quadrature and line fitting shared by the estimators.

use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::{erfc, erfc_inv};

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile for `u` in the open unit interval.
pub fn normal_quantile(u: f64) -> f64 {
    let x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u);
    // one Newton step polishes the inverse to full precision
    let density = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if density > 0.0 {
        x - (normal_cdf(x) - u) / density
    } else {
        x
    }
}

/// Two-sided Student-t critical value for the given confidence level.
pub fn student_t_critical(confidence: f64, dof: f64) -> f64 {
    let t = StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom");
    t.inverse_cdf(0.5 + confidence / 2.0)
}

// B_2, B_4, ..., B_20
const BERNOULLI_EVEN: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

const EM_SHIFT: f64 = 20.0;

/// `w^{-t} - (w + n)^{-t}` without cancellation when `n << w`.
pub fn power_diff(w: f64, n: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    -w.powf(-t) * (-t * (n / w).ln_1p()).exp_m1()
}

/// Euler-Maclaurin correction terms of the Hurwitz zeta function at `w`,
/// each term mapped through `term(t, coefficient)` where the term is
/// `coefficient * w^{-t}`.
fn em_terms(s: f64, mut term: impl FnMut(f64, f64) -> f64) -> f64 {
    let mut acc = 0.0;
    // w^{1-s}/(s-1)
    if s != 1.0 {
        acc += term(s - 1.0, 1.0 / (s - 1.0));
    }
    acc += term(s, 0.5);
    let mut rising = s; // s (s+1) ... (s+2j-2)
    let mut fact = 2.0; // (2j)!
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let j = j + 1;
        acc += term(s + 2.0 * j as f64 - 1.0, b / fact * rising);
        let k = 2.0 * j as f64;
        rising *= (s + k - 1.0) * (s + k);
        fact *= (k + 1.0) * (k + 2.0);
    }
    acc
}

/// Hurwitz zeta function `sum_{k >= 0} (q + k)^{-s}` for `s > 1`, `q > 0`.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    assert!(s > 1.0 && q > 0.0, "hurwitz_zeta requires s > 1, q > 0");
    let mut head = 0.0;
    let mut w = q;
    while w < EM_SHIFT {
        head += w.powf(-s);
        w += 1.0;
    }
    head + em_terms(s, |t, c| c * w.powf(-t))
}

/// `sum_{k=0}^{n-1} (q + k)^{-s}`, i.e. `zeta(s, q) - zeta(s, q + n)`, valid
/// for any `s > 0` (the difference converges even where the series does not).
pub fn hurwitz_diff(s: f64, q: f64, n: f64) -> f64 {
    assert!(s > 0.0 && q > 0.0 && n >= 0.0);
    if n == 0.0 {
        return 0.0;
    }
    if n <= 64.0 && n.fract() == 0.0 {
        return (0..n as u64).map(|k| (q + k as f64).powf(-s)).sum();
    }
    let mut head = 0.0;
    let mut w = q;
    while w < EM_SHIFT {
        head += power_diff(w, n, s);
        w += 1.0;
    }
    head + em_terms(s, |t, c| {
        if t == 0.0 {
            // s = 1: the w^{1-s}/(s-1) term becomes a logarithm
            0.0
        } else {
            c * power_diff(w, n, t)
        }
    }) + if s == 1.0 { (n / w).ln_1p() } else { 0.0 }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

/// Integral of `f` over `[a, b]` with a composite Gauss-Legendre rule.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let (x, w) = gauss_legendre(16);
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let lo = a + h * p as f64;
        let mid = lo + 0.5 * h;
        let part: f64 = x
            .iter()
            .zip(&w)
            .map(|(xi, wi)| wi * f(mid + 0.5 * h * xi))
            .sum();
        acc += 0.5 * h * part;
    }
    acc
}

/// `int_start^inf f(x) dx` for a smooth, eventually monotone, integrable `f`,
/// on dyadic panels until the contribution is negligible.
pub fn smooth_tail_integral(f: impl Fn(f64) -> f64, start: f64) -> f64 {
    let mut acc = 0.0;
    let mut lo = start;
    for _ in 0..200 {
        let hi = lo * 2.0;
        let part = integrate(&f, lo, hi, 2);
        acc += part;
        if part.abs() <= 1e-17 * acc.abs() || part == 0.0 {
            break;
        }
        lo = hi;
    }
    acc
}

/// Maximize a unimodal function on `[lo, hi]` by golden-section search.
/// Returns `(argmax, max)`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Weighted least-squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
    pub points: usize,
}

impl LineFit {
    /// Half-width of the two-sided slope confidence interval.
    pub fn slope_halfwidth(&self, confidence: f64) -> f64 {
        if self.points <= 2 {
            return f64::INFINITY;
        }
        student_t_critical(confidence, (self.points - 2) as f64) * self.slope_stderr
    }
}

/// Weighted least squares; weights are relative (inverse variances up to a
/// common scale), so the slope error is estimated from the weighted residuals.
pub fn weighted_line_fit(x: &[f64], y: &[f64], w: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n || w.len() != n {
        return None;
    }
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        sxx += w[i] * (x[i] - xm) * (x[i] - xm);
        sxy += w[i] * (x[i] - xm) * (y[i] - ym);
        syy += w[i] * (y[i] - ym) * (y[i] - ym);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = (0..n)
        .map(|i| {
            let r = y[i] - intercept - slope * x[i];
            w[i] * r * r
        })
        .sum();
    let slope_stderr = if n > 2 {
        (rss / (n - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    let r_squared = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    Some(LineFit {
        slope,
        intercept,
        slope_stderr,
        r_squared,
        points: n,
    })
}

/// Ordinary least squares line through `(x, y)`.
pub fn line_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    weighted_line_fit(x, y, &vec![1.0; x.len()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hurwitz_matches_direct_summation() {
        // zeta(2) = pi^2 / 6
        let z2 = hurwitz_zeta(2.0, 1.0);
        assert!((z2 - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-14);
        // brute force plus integral tail for s = 2.6, q = 7.5
        let direct: f64 = (0..200_000).map(|k| (7.5 + k as f64).powf(-2.6)).sum();
        let w: f64 = 7.5 + 200_000.0;
        let tail = w.powf(-1.6) / 1.6 + 0.5 * w.powf(-2.6);
        assert!((hurwitz_zeta(2.6, 7.5) - direct - tail).abs() < 1e-13);
    }

    #[test]
    fn hurwitz_diff_matches_difference_and_sum() {
        for &(s, q, n) in &[(1.3, 1.0, 100.0), (1.3, 5e6, 256.0), (0.25, 3.0, 1000.0), (1.0, 2.0, 500.0)] {
            let direct: f64 = (0..n as u64).map(|k| (q + k as f64).powf(-s)).sum();
            let d = hurwitz_diff(s, q, n);
            assert!(((d - direct) / direct).abs() < 1e-11, "s={s} q={q} n={n}: {d} vs {direct}");
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        let i: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((i - 2.0 / 15.0).abs() < 1e-14);
        let e = integrate(f64::exp, 0.0, 1.0, 4);
        assert!((e - (std::f64::consts::E - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn normal_quantile_inverts_cdf() {
        for &u in &[1e-12, 0.01, 0.3, 0.5, 0.77, 0.999999] {
            assert!((normal_cdf(normal_quantile(u)) - u).abs() < 1e-15 * u.max(1e-2) * 10.0);
        }
    }

    #[test]
    fn golden_section_finds_peak() {
        let (x, v) = golden_section_max(|x| -(x - 1.3) * (x - 1.3) + 2.0, 0.0, 10.0, 1e-10);
        assert!((x - 1.3).abs() < 1e-7 && (v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn line_fit_recovers_exact_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|x| 3.0 - 0.5 * x).collect();
        let fit = line_fit(&x, &y).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-14 && (fit.intercept - 3.0).abs() < 1e-13);
        assert!(fit.slope_stderr < 1e-14);
    }
}
