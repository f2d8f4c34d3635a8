//! Reference estimators of the memory parameter: log-periodogram regression
//! (GPH), the local Whittle Fourier estimator, and log-scale regression of
//! wavelet variances.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::ScaleRange;
use crate::wavelet::Pyramid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gph,
    Lwf,
    Logscale,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Gph => "gph",
            Method::Lwf => "lwf",
            Method::Logscale => "logscale",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineResult {
    pub method: Method,
    pub d_hat: f64,
    /// Number of Fourier frequencies, or of scales for the log-scale fit.
    pub m: usize,
    /// Asymptotic variance of `d_hat` times `effective_size`.
    pub nominal_var: f64,
    /// `m` for the Fourier methods, `n 2^-L` for the log-scale fit.
    pub effective_size: f64,
    pub std_error: f64,
    /// The minimizer hit the end of the search bracket.
    pub boundary: bool,
}

/// Default Fourier bandwidth `floor(n^0.65)`, kept within `[2, n/2]`.
pub fn default_bandwidth(n: usize) -> usize {
    ((n as f64).powf(0.65).floor() as usize).clamp(2, (n / 2).max(2))
}

/// `|DFT(x)_k|^2 / (2 pi n)` at `lambda_k = 2 pi k / n`, `k = 1..=n/2`.
pub fn periodogram(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 {
        return Err(Error::SeriesTooShort(format!(
            "{n} sample(s), the periodogram needs 2"
        )));
    }
    let mut buffer: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buffer);
    let scale = 1.0 / (2.0 * PI * n as f64);
    Ok(buffer[1..=n / 2]
        .iter()
        .map(|c| c.norm_sqr() * scale)
        .collect())
}

fn fourier_frequency(k: usize, n: usize) -> f64 {
    2.0 * PI * k as f64 / n as f64
}

fn check_bandwidth(n: usize, m: usize) -> Result<()> {
    if m < 2 || m > n / 2 {
        return Err(Error::InvalidArgument(format!(
            "bandwidth m = {m} outside [2, {}] for n = {n}",
            n / 2
        )));
    }
    Ok(())
}

/// Least-squares fit of `log I(lambda_k)` on `-2 log |1 - e^{-i lambda_k}|`,
/// `k = 1..=m`; the slope estimates `d`.
pub fn gph(x: &[f64], m: usize) -> Result<BaselineResult> {
    let n = x.len();
    check_bandwidth(n, m)?;
    let pg = periodogram(x)?;
    let regressor: Vec<f64> = (1..=m)
        .map(|k| -2.0 * (2.0 * (0.5 * fourier_frequency(k, n)).sin()).ln())
        .collect();
    if pg[..m].iter().any(|&v| v <= 0.0) {
        return Err(Error::Degenerate("zero periodogram ordinate".into()));
    }
    let response: Vec<f64> = pg[..m].iter().map(|v| v.ln()).collect();
    let weights = vec![1.0; m];
    let slope = weighted_slope(&regressor, &response, &weights)?;
    let nominal_var = PI * PI / 24.0;
    Ok(BaselineResult {
        method: Method::Gph,
        d_hat: slope,
        m,
        nominal_var,
        effective_size: m as f64,
        std_error: (nominal_var / m as f64).sqrt(),
        boundary: false,
    })
}

/// Local Whittle Fourier contrast
/// `R(d) = log(mean lambda_k^{2d} I_k) - 2 d mean log lambda_k`.
pub fn lwf_contrast(x: &[f64], m: usize, d: f64) -> Result<f64> {
    check_bandwidth(x.len(), m)?;
    let pg = periodogram(x)?;
    Ok(LwfTerms::new(&pg[..m], x.len()).contrast(d))
}

struct LwfTerms {
    log_lambda: Vec<f64>,
    ordinates: Vec<f64>,
    mean_log: f64,
}

impl LwfTerms {
    fn new(pg: &[f64], n: usize) -> Self {
        let log_lambda: Vec<f64> = (1..=pg.len())
            .map(|k| fourier_frequency(k, n).ln())
            .collect();
        let mean_log = log_lambda.iter().sum::<f64>() / pg.len() as f64;
        LwfTerms {
            log_lambda,
            ordinates: pg.to_vec(),
            mean_log,
        }
    }

    fn contrast(&self, d: f64) -> f64 {
        let m = self.ordinates.len() as f64;
        let s: f64 = self
            .log_lambda
            .iter()
            .zip(&self.ordinates)
            .map(|(l, i)| (2.0 * d * l).exp() * i)
            .sum();
        (s / m).ln() - 2.0 * d * self.mean_log
    }

    /// First and second derivatives of the contrast.
    fn derivatives(&self, d: f64) -> (f64, f64) {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for (l, i) in self.log_lambda.iter().zip(&self.ordinates) {
            let w = (2.0 * d * l).exp() * i;
            s0 += w;
            s1 += w * l;
            s2 += w * l * l;
        }
        let mean = s1 / s0;
        (2.0 * (mean - self.mean_log), 4.0 * (s2 / s0 - mean * mean))
    }
}

/// Local Whittle Fourier estimate over `k = 1..=m`: golden-section search on
/// `[-1, 1]` polished by Newton steps.
pub fn lwf(x: &[f64], m: usize) -> Result<BaselineResult> {
    let n = x.len();
    check_bandwidth(n, m)?;
    let pg = periodogram(x)?;
    if pg[..m].iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("all periodogram ordinates vanish".into()));
    }
    let terms = LwfTerms::new(&pg[..m], n);
    let (lo, hi) = (-1.0, 1.0);
    let mut d = golden_section(|d| terms.contrast(d), lo, hi, 1e-6);
    for _ in 0..20 {
        let (g, h) = terms.derivatives(d);
        if h <= 0.0 {
            break;
        }
        let next = (d - g / h).clamp(lo, hi);
        let step = next - d;
        d = next;
        if step.abs() < 1e-12 {
            break;
        }
    }
    let boundary = (d - lo).abs() < 1e-6 || (hi - d).abs() < 1e-6;
    let nominal_var = 0.25;
    Ok(BaselineResult {
        method: Method::Lwf,
        d_hat: d,
        m,
        nominal_var,
        effective_size: m as f64,
        std_error: (nominal_var / m as f64).sqrt(),
        boundary,
    })
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    // the bracket ends are candidates too
    let mid = 0.5 * (a + b);
    [(a, f(a)), (mid, f(mid)), (b, f(b))]
        .into_iter()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("three candidates")
        .0
}

/// Weighted least squares of `log2(mean W_j^2)` on `j` over the scale range;
/// half the slope estimates `d`. Scale `j` gets weight `n_j`, the inverse of
/// the approximate variance of its log-variance.
pub fn logscale_regression(pyramid: &Pyramid, range: ScaleRange) -> Result<BaselineResult> {
    let max = pyramid.max_scale();
    if range.lower < 1 || range.lower > range.upper || range.upper > max {
        return Err(Error::InvalidRange(format!(
            "scales {}..={} with finest scale 1 and coarsest {max}",
            range.lower, range.upper
        )));
    }
    let mut js = Vec::new();
    let mut logs = Vec::new();
    let mut weights = Vec::new();
    for j in range.lower..=range.upper {
        let c = &pyramid.coeffs[j];
        if c.is_empty() {
            continue;
        }
        let mean = c.iter().map(|w| w * w).sum::<f64>() / c.len() as f64;
        if mean <= 0.0 {
            return Err(Error::Degenerate(format!(
                "scale {j} has only zero coefficients"
            )));
        }
        js.push(j as f64);
        logs.push(mean.log2());
        weights.push(c.len() as f64);
    }
    if js.len() < 2 {
        return Err(Error::Degenerate(format!(
            "{} nonempty scale(s) in range, the regression needs 2",
            js.len()
        )));
    }
    let slope = weighted_slope(&js, &logs, &weights)?;
    // Var(log2 mean of n_j squared Gaussians) ~ 2 / (n_j ln^2 2)
    let total: f64 = weights.iter().sum();
    let centre: f64 = js.iter().zip(&weights).map(|(j, w)| j * w).sum::<f64>() / total;
    let spread: f64 = js
        .iter()
        .zip(&weights)
        .map(|(j, w)| w * (j - centre).powi(2))
        .sum();
    let var = 0.25 * 2.0 / (LN_2 * LN_2 * spread);
    let effective_size = pyramid.n as f64 * 0.5f64.powi(range.lower as i32);
    Ok(BaselineResult {
        method: Method::Logscale,
        d_hat: slope / 2.0,
        m: js.len(),
        nominal_var: var * effective_size,
        effective_size,
        std_error: var.sqrt(),
        boundary: false,
    })
}

fn weighted_slope(x: &[f64], y: &[f64], w: &[f64]) -> Result<f64> {
    let total: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / total;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / total;
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - mx).powi(2)).sum();
    let sxy: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((a, c), b)| b * (a - mx) * (c - my))
        .sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("regressor has no spread".into()));
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::{simulate, ProcessModel};
    use crate::wavelet::make_wavelet;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        simulate(&ProcessModel::fractional_noise(0.0).unwrap(), n, seed).unwrap()
    }

    #[test]
    fn parseval() {
        for n in [64, 65] {
            let x = noise(n, 1);
            let pg = periodogram(&x).unwrap();
            // full grid k = 1..n-1 by symmetry I_k = I_{n-k}
            let mut full: f64 = 2.0 * pg.iter().sum::<f64>();
            if n % 2 == 0 {
                full -= pg[n / 2 - 1];
            }
            let mean = x.iter().sum::<f64>() / n as f64;
            let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            assert!((2.0 * PI / n as f64 * full - var).abs() < 1e-9);
        }
    }

    #[test]
    fn pure_cosine_has_one_peak() {
        let n = 128;
        let x: Vec<f64> = (0..n)
            .map(|t| (fourier_frequency(5, n) * t as f64).cos())
            .collect();
        let pg = periodogram(&x).unwrap();
        let peak = pg.iter().cloned().fold(0.0, f64::max);
        assert_eq!(pg[4], peak);
        assert!(pg
            .iter()
            .enumerate()
            .all(|(i, &v)| i == 4 || v < 1e-20 * peak));
    }

    #[test]
    fn white_noise_ordinates_average_one_over_two_pi() {
        let pg = periodogram(&noise(1 << 14, 3)).unwrap();
        let mean = pg.iter().sum::<f64>() / pg.len() as f64;
        let se = 1.0 / (2.0 * PI) / (pg.len() as f64).sqrt();
        assert!((mean - 1.0 / (2.0 * PI)).abs() < 5.0 * se);
    }

    #[test]
    fn periodogram_rejects_single_sample() {
        assert!(periodogram(&[1.0]).is_err());
    }

    #[test]
    fn nominal_constants() {
        let x = noise(1024, 4);
        assert!((gph(&x, 64).unwrap().nominal_var - 0.4112).abs() < 1e-4);
        assert_eq!(lwf(&x, 64).unwrap().nominal_var, 0.25);
    }

    #[test]
    fn bandwidth_checks() {
        let x = noise(64, 4);
        assert!(gph(&x, 1).is_err());
        assert!(gph(&x, 33).is_err());
        assert!(lwf(&x, 33).is_err());
        assert_eq!(default_bandwidth(8192), 349);
        assert_eq!(default_bandwidth(4), 2);
    }

    #[test]
    fn location_and_scale_invariance() {
        let x = noise(512, 6);
        let shifted: Vec<f64> = x.iter().map(|v| 3.0 * v + 10.0).collect();
        for f in [gph, lwf] {
            let a = f(&x, 40).unwrap().d_hat;
            let b = f(&shifted, 40).unwrap().d_hat;
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn lwf_stationary_point() {
        let x = noise(2048, 9);
        let r = lwf(&x, 100).unwrap();
        let pg = periodogram(&x).unwrap();
        let terms = LwfTerms::new(&pg[..100], x.len());
        assert!(terms.derivatives(r.d_hat).0.abs() < 1e-9);
        let h = 1e-4;
        let fd = (lwf_contrast(&x, 100, r.d_hat + h).unwrap()
            - lwf_contrast(&x, 100, r.d_hat - h).unwrap())
            / (2.0 * h);
        assert!(fd.abs() < 1e-6);
        assert!(!r.boundary);
    }

    #[test]
    fn lwf_flags_bracket_end() {
        // twice-integrated noise has d = 2, beyond the bracket
        let mut x = noise(256, 2);
        crate::synthesis::integrate(&mut x);
        crate::synthesis::integrate(&mut x);
        assert!(lwf(&x, 20).unwrap().boundary);
    }

    #[test]
    fn logscale_exact_power_law() {
        let d0 = 0.35;
        let coeffs: Vec<Vec<f64>> = (0..7)
            .map(|j| vec![1.7 * 2f64.powf(d0 * j as f64); 1 << (7 - j)])
            .collect();
        let p = Pyramid::from_coefficients(make_wavelet("db2").unwrap(), 256, coeffs);
        let r = logscale_regression(&p, ScaleRange::new(1, 6).unwrap()).unwrap();
        assert!((r.d_hat - d0).abs() < 1e-12);
        assert_eq!(r.m, 6);
        assert!(logscale_regression(&p, ScaleRange::new(1, 9).unwrap()).is_err());
    }
}
