//! Exact Gaussian simulation of processes with generalized spectral density
//! `|1 - e^{-i lambda}|^{-2 d0} f*(lambda)`.
//!
//! The memory parameter is split as `d0 = k + delta` with `delta` in
//! `(-1/2, 1/2)`. A stationary path with memory `delta` is drawn by circulant
//! embedding and then integrated `k` times (or differenced `-k` times).
//! Autocovariances use `gamma(h) = (2 pi)^-1 int e^{i h lambda} f(lambda) d lambda`,
//! so white noise with `f* = 1` has unit variance.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::wavelet::Pyramid;

/// Short-memory factor `f*` of the spectral density.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShortMemory {
    /// `f* = level`.
    Constant { level: f64 },
    /// `f*(lambda) = |1 - rho e^{-i lambda}|^-2`, smooth at 0 (`beta = 2`).
    Ar1 { rho: f64 },
    /// Piecewise linear through `(lambda_i, value_i)` on `[0, pi]`,
    /// extended evenly to `[-pi, 0]`.
    Grid { lambdas: Vec<f64>, values: Vec<f64> },
}

impl ShortMemory {
    pub fn eval(&self, lambda: f64) -> f64 {
        let l = lambda.abs();
        match self {
            ShortMemory::Constant { level } => *level,
            ShortMemory::Ar1 { rho } => 1.0 / (1.0 - 2.0 * rho * l.cos() + rho * rho),
            ShortMemory::Grid { lambdas, values } => {
                let i = lambdas
                    .partition_point(|&x| x <= l)
                    .clamp(1, lambdas.len() - 1);
                let (x0, x1) = (lambdas[i - 1], lambdas[i]);
                let t = ((l - x0) / (x1 - x0)).clamp(0.0, 1.0);
                (1.0 - t) * values[i - 1] + t * values[i]
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ShortMemory::Constant { level } if !(*level > 0.0 && level.is_finite()) => Err(
                Error::InvalidArgument(format!("constant level {level} must be positive")),
            ),
            ShortMemory::Ar1 { rho } if !(rho.abs() < 1.0) => Err(Error::InvalidArgument(format!(
                "AR(1) coefficient {rho} must satisfy |rho| < 1"
            ))),
            ShortMemory::Grid { lambdas, values } => {
                if lambdas.len() < 2 || lambdas.len() != values.len() {
                    return Err(Error::InvalidArgument(
                        "spectral grid needs at least two (lambda, value) pairs".into(),
                    ));
                }
                if lambdas[0] != 0.0 || (lambdas[lambdas.len() - 1] - PI).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(
                        "spectral grid must span [0, pi]".into(),
                    ));
                }
                if lambdas.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidArgument(
                        "spectral grid must be increasing".into(),
                    ));
                }
                if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(Error::InvalidArgument(
                        "spectral grid values must be positive".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// A Gaussian process with memory parameter `d0` and short-memory factor `f*`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcessModel {
    pub d0: f64,
    pub short_memory: ShortMemory,
    /// Declared smoothness `beta` of `f*` at the origin,
    /// `|f*(lambda) - f*(0)| <= gamma f*(0) |lambda|^beta`.
    pub beta: f64,
    /// The constant `gamma` of the smoothness class; descriptive only.
    pub gamma: Option<f64>,
}

impl ProcessModel {
    pub fn new(d0: f64, short_memory: ShortMemory, beta: f64) -> Result<Self> {
        let model = ProcessModel {
            d0,
            short_memory,
            beta,
            gamma: None,
        };
        model.validate()?;
        Ok(model)
    }

    /// Fractionally integrated white noise, `f* = 1`.
    pub fn fractional_noise(d0: f64) -> Result<Self> {
        ProcessModel::new(d0, ShortMemory::Constant { level: 1.0 }, 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.d0.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "d0 = {} is not finite",
                self.d0
            )));
        }
        if !(self.beta > 0.0 && self.beta <= 2.0) {
            return Err(Error::InvalidArgument(format!(
                "beta = {} outside (0, 2]",
                self.beta
            )));
        }
        self.short_memory.validate()?;
        split_memory(self.d0)?;
        Ok(())
    }

    /// Number `k` of integrations and stationary remainder `delta = d0 - k`.
    pub fn memory_split(&self) -> Result<(i64, f64)> {
        split_memory(self.d0)
    }
}

/// `d0 = k + delta`, with `k` the smallest integer above `d0 - 1/2`.
pub fn split_memory(d0: f64) -> Result<(i64, f64)> {
    let k = (d0 + 0.5).floor();
    let delta = d0 - k;
    if delta <= -0.5 {
        return Err(Error::InvalidArgument(format!(
            "d0 = {d0}: d0 - 1/2 is an integer, the stationary part would have memory -1/2"
        )));
    }
    Ok((k as i64, delta))
}

/// Density `|1 - e^{-i lambda}|^{-2 delta} f*(lambda)` of the stationary
/// component, `delta` being the fractional part of `d0`.
pub fn spectral_density(model: &ProcessModel, lambda: f64) -> Result<f64> {
    let (_, delta) = model.memory_split()?;
    if !(lambda.abs() <= PI) {
        return Err(Error::InvalidArgument(format!(
            "lambda = {lambda} outside [-pi, pi]"
        )));
    }
    if lambda == 0.0 && delta > 0.0 {
        return Err(Error::InvalidArgument(
            "the spectral density is infinite at lambda = 0 for positive memory".into(),
        ));
    }
    let modulus = 2.0 * (0.5 * lambda).sin().abs();
    Ok(modulus.powf(-2.0 * delta) * model.short_memory.eval(lambda))
}

/// Autocovariances `gamma(0..=max_lag)` of fractionally integrated white
/// noise: `gamma(0) = Gamma(1 - 2d) / Gamma(1 - d)^2`,
/// `gamma(h) = gamma(h-1) (h - 1 + d) / (h - d)`.
pub fn arfima_autocovariance(d: f64, max_lag: usize) -> Result<Vec<f64>> {
    if !(d.abs() < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "|d| = {} must be below 1/2",
            d.abs()
        )));
    }
    use statrs::function::gamma::ln_gamma;
    let mut gamma = Vec::with_capacity(max_lag + 1);
    gamma.push((ln_gamma(1.0 - 2.0 * d) - 2.0 * ln_gamma(1.0 - d)).exp());
    for h in 1..=max_lag {
        let h = h as f64;
        gamma.push(gamma[gamma.len() - 1] * (h - 1.0 + d) / (h - d));
    }
    Ok(gamma)
}

/// Autocovariances of the stationary component by FFT quadrature.
///
/// The trapezoid rule on `N` equispaced frequencies, skipping `lambda = 0`,
/// is exact for the smooth periodic part; the algebraic singularity
/// `|lambda|^{-2 delta}` at the origin is removed with the generalized
/// Euler-Maclaurin expansion
/// `h sum_{p != 0} F(ph) = int F + 2 sum_{m even} zeta(s - m) G_m h^{m+1-s}`,
/// where `F = |lambda|^-s G`, `s = 2 delta`, and `G_m` are the Taylor
/// coefficients of `G`.
pub fn autocovariance(model: &ProcessModel, max_lag: usize) -> Result<Vec<f64>> {
    let (_, delta) = model.memory_split()?;
    let s = 2.0 * delta;
    let points = (32 * (max_lag + 1)).next_power_of_two().max(1 << 20);
    let h = 2.0 * PI / points as f64;

    let mut buffer: Vec<Complex64> = (0..points)
        .map(|p| {
            let p = if p > points / 2 { points - p } else { p };
            if p == 0 {
                return Complex64::new(0.0, 0.0);
            }
            let lambda = p as f64 * h;
            let f = (2.0 * (0.5 * lambda).sin()).powf(-s) * model.short_memory.eval(lambda);
            Complex64::new(f, 0.0)
        })
        .collect();
    FftPlanner::new()
        .plan_fft_forward(points)
        .process(&mut buffer);

    // even Taylor coefficients of (x / (2 sin(x/2)))^s and of f*
    let a2 = s / 24.0;
    let a4 = s / 2880.0 + s * s / 1152.0;
    let f = |x: f64| model.short_memory.eval(x);
    let step = 0.02;
    let (f0, f1, f2) = (f(0.0), f(step), f(2.0 * step));
    let b0 = f0;
    let b2 = (16.0 * f1 - f2 - 15.0 * f0) / (12.0 * step * step);
    let b4 = (2.0 * f2 - 8.0 * f1 + 6.0 * f0) / (24.0 * step.powi(4));
    let p0 = b0;
    let p2 = b2 + a2 * b0;
    let p4 = b4 + a2 * b2 + a4 * b0;
    let z = [zeta(s), zeta(s - 2.0), zeta(s - 4.0)];

    Ok((0..=max_lag)
        .map(|lag| {
            let k = lag as f64;
            let c2 = -k * k / 2.0;
            let c4 = k.powi(4) / 24.0;
            let g = [p0, p2 + c2 * p0, p4 + c2 * p2 + c4 * p0];
            let correction: f64 = (0..3)
                .map(|i| {
                    let m = 2.0 * i as f64;
                    2.0 * z[i] * g[i] * h.powf(m + 1.0 - s)
                })
                .sum();
            (h * buffer[lag].re - correction) / (2.0 * PI)
        })
        .collect())
}

/// Riemann zeta function for real `s != 1`, by Euler-Maclaurin summation,
/// which also covers negative arguments.
pub(crate) fn zeta(s: f64) -> f64 {
    const N: usize = 24;
    // B_{2k} / (2k)!
    const BERNOULLI: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1307674368000.0,
        1.0 / 74724249600.0,
        -3617.0 / 10670622842880000.0,
    ];
    let n = N as f64;
    let mut sum: f64 = (1..N).map(|k| (k as f64).powf(-s)).sum();
    sum += n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    // rising factorial s (s+1) ... (s + 2k - 2) times N^{-s-2k+1}
    let mut rising = s;
    let mut power = n.powf(-s - 1.0);
    for (k, b) in BERNOULLI.iter().enumerate() {
        sum += b * rising * power;
        let j = 2.0 * k as f64;
        rising *= (s + j + 1.0) * (s + j + 2.0);
        power /= n * n;
    }
    sum
}

/// Reusable sampler: the circulant eigenvalues are computed once per
/// `(model, n)` and shared between replications.
#[derive(Clone)]
pub struct Simulator {
    model: ProcessModel,
    n: usize,
    integrations: i64,
    /// `sqrt(eigenvalue / m)` of the circulant embedding of size `m`.
    scales: Arc<Vec<f64>>,
    fft: Arc<dyn rustfft::Fft<f64>>,
}

impl std::fmt::Debug for Simulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulator")
            .field("model", &self.model)
            .field("n", &self.n)
            .field("embedding", &self.scales.len())
            .finish()
    }
}

const MAX_DOUBLINGS: usize = 4;

impl Simulator {
    pub fn new(model: &ProcessModel, n: usize) -> Result<Self> {
        model.validate()?;
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "series length {n} must be at least 2"
            )));
        }
        let (k, _) = model.memory_split()?;
        // differencing consumes samples
        let stationary_len = n + k.min(0).unsigned_abs() as usize;
        let mut half = stationary_len.next_power_of_two();
        let mut planner = FftPlanner::new();
        let mut min_ratio = 0.0;
        for _ in 0..=MAX_DOUBLINGS {
            let m = 2 * half;
            let gamma = autocovariance(model, half)?;
            let mut row: Vec<Complex64> = (0..m)
                .map(|j| Complex64::new(gamma[if j <= half { j } else { m - j }], 0.0))
                .collect();
            let fft = planner.plan_fft_forward(m);
            fft.process(&mut row);
            let max = row.iter().map(|c| c.re).fold(0.0, f64::max);
            let min = row.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
            min_ratio = min / max;
            // negative eigenvalues at rounding level are clipped
            if min >= -1e-10 * max {
                let scales = row
                    .iter()
                    .map(|c| (c.re.max(0.0) / m as f64).sqrt())
                    .collect();
                return Ok(Simulator {
                    model: model.clone(),
                    n,
                    integrations: k,
                    scales: Arc::new(scales),
                    fft,
                });
            }
            half *= 2;
        }
        Err(Error::EmbeddingFailed {
            doublings: MAX_DOUBLINGS,
            min_eigenvalue: min_ratio,
        })
    }

    pub fn model(&self) -> &ProcessModel {
        &self.model
    }

    /// Sample path for replication `rep` of the seeded stream `seed`. Each
    /// replication reads its own ChaCha20 stream, so paths do not depend on
    /// the order in which replications are drawn.
    pub fn sample(&self, seed: u64, rep: u64) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(rep);
        let mut buffer: Vec<Complex64> = self
            .scales
            .iter()
            .map(|&s| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(s * re, s * im)
            })
            .collect();
        self.fft.process(&mut buffer);
        let extra = self.integrations.min(0).unsigned_abs() as usize;
        let mut x: Vec<f64> = buffer[..self.n + extra].iter().map(|c| c.re).collect();
        if self.integrations > 0 {
            for _ in 0..self.integrations {
                integrate(&mut x);
            }
        } else {
            for _ in 0..extra {
                x = difference(&x);
            }
        }
        x
    }
}

/// Cumulative sum in place, `X_t = sum_{s <= t} Y_s` (zero initial value).
pub fn integrate(x: &mut [f64]) {
    let mut acc = 0.0;
    for v in x.iter_mut() {
        acc += *v;
        *v = acc;
    }
}

/// First difference, one sample shorter than the input.
pub fn difference(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

/// One exact Gaussian sample path of length `n`.
pub fn simulate(model: &ProcessModel, n: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(Simulator::new(model, n)?.sample(seed, 0))
}

/// Log2 of the mean squared coefficient per scale, `(j, log2 mean W_j^2)`,
/// for every nonempty scale `j >= 1`.
pub fn scaling_diagnostic(pyramid: &Pyramid) -> Result<Vec<(usize, f64)>> {
    let points: Vec<(usize, f64)> = pyramid
        .coeffs
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, c)| !c.is_empty())
        .map(|(j, c)| {
            (
                j,
                (c.iter().map(|w| w * w).sum::<f64>() / c.len() as f64).log2(),
            )
        })
        .collect();
    if points.len() < 3 {
        return Err(Error::SeriesTooShort(format!(
            "{} nonempty scale(s), at least 3 are needed",
            points.len()
        )));
    }
    Ok(points)
}
