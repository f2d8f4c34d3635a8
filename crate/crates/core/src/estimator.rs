//! Local Whittle wavelet estimator of the memory parameter.
//!
//! For a set `I` of coefficients `W_{j,k}` spanning scales `L..=U`, the
//! profile contrast is
//! `L(d) = log sum_{(j,k) in I} 2^{2d(<I> - j)} W_{j,k}^2`
//! with `<I>` the average scale. It is convex in `d`, so Newton's method
//! from any start finds its unique minimizer `d_hat`.

use std::f64::consts::LN_2;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::asymptotics::{self, Ell};
use crate::error::{Error, Result};
use crate::wavelet::{max_scale, FourierWavelet, Pyramid, WaveletSpec};

const MAX_ITERATIONS: usize = 100;
const STEP_TOL: f64 = 1e-10;

/// Inclusive range of scale indices `L..=U` entering the contrast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScaleRange {
    #[serde(rename = "L")]
    pub lower: usize,
    #[serde(rename = "U")]
    pub upper: usize,
}

impl ScaleRange {
    pub fn new(lower: usize, upper: usize) -> Result<Self> {
        if lower >= upper {
            return Err(Error::InvalidRange(format!(
                "need L < U, got L = {lower}, U = {upper}"
            )));
        }
        Ok(ScaleRange { lower, upper })
    }

    /// `ell = U - L`.
    pub fn ell(&self) -> usize {
        self.upper - self.lower
    }
}

/// A two-sided confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub low: f64,
    pub high: f64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    pub d_hat: f64,
    /// `|I|^-1 sum 2^{-2 d_hat j} W_{j,k}^2`.
    pub sigma2_hat: f64,
    pub range: ScaleRange,
    pub mean_scale: f64,
    /// Number of coefficients `|I|`.
    pub n_eff: usize,
    /// Length of the analysed series.
    pub n: usize,
    pub iterations: usize,
    /// Asymptotic variance of `sqrt(n 2^-L) (d_hat - d)` used for `ci`.
    pub asymp_var: Option<f64>,
    /// Scale count the variance was evaluated at.
    pub variance_ell: Option<Ell>,
    pub ci: Option<ConfidenceInterval>,
}

impl EstimateResult {
    /// `n 2^-L`, the normalization of the limiting law.
    pub fn effective_size(&self) -> f64 {
        self.n as f64 * 0.5f64.powi(self.range.lower as i32)
    }
}

/// Average scale `sum_j j n_j / sum_j n_j` over `(j, n_j)` pairs.
pub fn mean_scale(counts: &[(usize, usize)]) -> Result<f64> {
    let total: usize = counts.iter().map(|&(_, n)| n).sum();
    if total == 0 {
        return Err(Error::Degenerate(
            "no coefficients in the scale range".into(),
        ));
    }
    let weighted: f64 = counts.iter().map(|&(j, n)| j as f64 * n as f64).sum();
    Ok(weighted / total as f64)
}

/// Per-scale sums of squares, the sufficient statistic of the contrast.
#[derive(Debug, Clone)]
struct ScaleSums {
    /// `(j, n_j, sum_k W_{j,k}^2)` for the nonempty scales.
    scales: Vec<(f64, usize, f64)>,
    mean: f64,
    total: usize,
}

impl ScaleSums {
    fn new(pyramid: &Pyramid, range: &ScaleRange) -> Result<Self> {
        if range.lower == 0 {
            return Err(Error::InvalidRange(
                "L must be at least 1: scale 0 coefficients vanish identically".into(),
            ));
        }
        if range.lower >= range.upper {
            return Err(Error::InvalidRange(format!(
                "need L < U, got L = {}, U = {}",
                range.lower, range.upper
            )));
        }
        if range.upper > pyramid.max_scale() {
            return Err(Error::ScaleOutOfRange {
                requested: range.upper,
                max: pyramid.max_scale(),
            });
        }
        let scales: Vec<(f64, usize, f64)> = (range.lower..=range.upper)
            .filter_map(|j| {
                let c = &pyramid.coeffs[j];
                (!c.is_empty()).then(|| (j as f64, c.len(), c.iter().map(|w| w * w).sum()))
            })
            .collect();
        let counts: Vec<(usize, usize)> = scales.iter().map(|&(j, n, _)| (j as usize, n)).collect();
        let mean = mean_scale(&counts)?;
        if scales.iter().all(|&(_, _, s)| s == 0.0) {
            return Err(Error::Degenerate(
                "all wavelet coefficients are zero".into(),
            ));
        }
        let total = counts.iter().map(|&(_, n)| n).sum();
        Ok(ScaleSums {
            scales,
            mean,
            total,
        })
    }

    /// Log-weights `2d log2 (<I> - j) + log S_j` of the nonzero scales.
    fn log_terms(&self, d: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.scales
            .iter()
            .filter(|s| s.2 > 0.0)
            .map(move |&(j, _, s)| (j, 2.0 * d * LN_2 * (self.mean - j) + s.ln()))
    }

    fn contrast(&self, d: f64) -> f64 {
        let max = self
            .log_terms(d)
            .map(|t| t.1)
            .fold(f64::NEG_INFINITY, f64::max);
        max + self
            .log_terms(d)
            .map(|t| (t.1 - max).exp())
            .sum::<f64>()
            .ln()
    }

    /// Contrast with its first two derivatives. Under the weights
    /// `w_j ∝ 2^{-2dj} S_j`, `L' = -2 log 2 E_w[j - <I>]` and
    /// `L'' = (2 log 2)^2 Var_w(j)`.
    fn derivatives(&self, d: f64) -> (f64, f64, f64) {
        let max = self
            .log_terms(d)
            .map(|t| t.1)
            .fold(f64::NEG_INFINITY, f64::max);
        let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for (j, t) in self.log_terms(d) {
            let w = (t - max).exp();
            let offset = j - self.mean;
            z += w;
            m1 += w * offset;
            m2 += w * offset * offset;
        }
        let (m1, m2) = (m1 / z, m2 / z);
        let c = 2.0 * LN_2;
        (max + z.ln(), -c * m1, c * c * (m2 - m1 * m1).max(0.0))
    }

    fn score(&self, d: f64) -> f64 {
        self.scales
            .iter()
            .map(|&(j, _, s)| (j - self.mean) * 2f64.powf(-2.0 * j * d) * s)
            .sum()
    }

    fn sigma2(&self, d: f64) -> f64 {
        let s: f64 = self
            .scales
            .iter()
            .map(|&(j, _, s)| 2f64.powf(-2.0 * j * d) * s)
            .sum();
        s / self.total as f64
    }
}

/// Profile contrast `L(d)`.
pub fn contrast(pyramid: &Pyramid, range: &ScaleRange, d: f64) -> Result<f64> {
    Ok(ScaleSums::new(pyramid, range)?.contrast(d))
}

/// Score `S(d) = sum_{(j,k) in I} (j - <I>) 2^{-2jd} W_{j,k}^2`; the
/// derivative of the contrast is `-2 log 2 S(d) / (|I| sigma2(d))` with
/// `sigma2(d) = |I|^-1 sum 2^{-2jd} W_{j,k}^2`.
pub fn score(pyramid: &Pyramid, range: &ScaleRange, d: f64) -> Result<f64> {
    Ok(ScaleSums::new(pyramid, range)?.score(d))
}

/// Minimizes the contrast by safeguarded Newton iteration from `d = 0`.
pub fn estimate(pyramid: &Pyramid, range: &ScaleRange) -> Result<EstimateResult> {
    let sums = ScaleSums::new(pyramid, range)?;
    if sums.scales.iter().filter(|s| s.2 > 0.0).count() < 2 {
        return Err(Error::Degenerate(
            "need nonzero coefficients at two or more scales".into(),
        ));
    }

    let mut d = 0.0;
    let mut last_step = f64::INFINITY;
    for iteration in 1..=MAX_ITERATIONS {
        let (value, grad, hess) = sums.derivatives(d);
        if hess <= 0.0 || !hess.is_finite() {
            return Err(Error::Numerical(format!(
                "contrast curvature vanished at d = {d} (weights collapsed on one scale)"
            )));
        }
        let mut step = -grad / hess;
        // halve on any increase beyond rounding
        let slack = 4.0 * f64::EPSILON * value.abs().max(1.0);
        while sums.contrast(d + step) > value + slack && step.abs() > STEP_TOL {
            step *= 0.5;
        }
        d += step;
        last_step = step;
        if step.abs() < STEP_TOL {
            return Ok(EstimateResult {
                d_hat: d,
                sigma2_hat: sums.sigma2(d),
                range: *range,
                mean_scale: sums.mean,
                n_eff: sums.total,
                n: pyramid.n,
                iterations: iteration,
                asymp_var: None,
                variance_ell: None,
                ci: None,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITERATIONS,
        last_step,
    })
}

/// Lower scale `L = round(log2(n) / (1 + 2 beta))`, clamped to
/// `[1, J_n - 2]`, and `U = J_n`.
pub fn select_scales(n: usize, support: usize, beta: f64) -> Result<ScaleRange> {
    if !(beta > 0.0 && beta <= 2.0) {
        return Err(Error::InvalidArgument(format!(
            "beta = {beta} outside (0, 2]"
        )));
    }
    let top = max_scale(n, support)?;
    if top < 2 {
        return Err(Error::SeriesTooShort(format!(
            "{n} samples give only {top} scale(s); two are needed"
        )));
    }
    let target = ((n as f64).log2() / (1.0 + 2.0 * beta)).round() as usize;
    let lower = target.clamp(1, top.saturating_sub(2).max(1));
    ScaleRange::new(lower, top)
}

/// Two-sided standard Gaussian quantile `z_{(1 + level)/2}`.
pub fn gaussian_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence level {level} outside (0, 1)"
        )));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(0.5 * (1.0 + level)))
}

/// Interval `d_hat ± z sqrt(variance / (n 2^-L))` for a given asymptotic
/// variance.
pub fn interval_from_variance(
    result: &EstimateResult,
    variance: f64,
    level: f64,
) -> Result<ConfidenceInterval> {
    let z = gaussian_quantile(level)?;
    let half = z * (variance / result.effective_size()).sqrt();
    Ok(ConfidenceInterval {
        low: result.d_hat - half,
        high: result.d_hat + half,
        level,
    })
}

/// Plug-in confidence interval with `V(d_hat, ell)`; `ell` defaults to the
/// number of scales `U - L` actually used. Returns the result with
/// `asymp_var` and `ci` filled in.
pub fn confidence_interval(
    result: &EstimateResult,
    spec: &WaveletSpec,
    level: f64,
    ell: Option<Ell>,
) -> Result<EstimateResult> {
    gaussian_quantile(level)?;
    let ell = ell.unwrap_or(Ell::Finite(result.range.ell()));
    let variance =
        asymptotics::variance(result.d_hat, ell, &FourierWavelet::Compact(spec.clone()))?;
    let ci = interval_from_variance(result, variance, level)?;
    Ok(EstimateResult {
        asymp_var: Some(variance),
        variance_ell: Some(ell),
        ci: Some(ci),
        ..result.clone()
    })
}
