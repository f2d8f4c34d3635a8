//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::{LN_2, PI};

use longmem::wavelet::{FourierWavelet, Pyramid, WaveletSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

const GL8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

/// Nodes and weights of 8-point Gauss-Legendre on equal panels of `[a, b]`.
pub fn composite_rule(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let h = (b - a) / panels as f64;
    let mut rule = Vec::with_capacity(8 * panels);
    for p in 0..panels {
        let mid = a + h * (p as f64 + 0.5);
        for &(x, w) in &GL8 {
            rule.push((mid - 0.5 * h * x, 0.5 * h * w));
            rule.push((mid + 0.5 * h * x, 0.5 * h * w));
        }
    }
    rule
}

/// Mean and variance of the scale index under weights `2^-j`, `j = 0..=ell`.
pub fn eta_kappa(ell: usize) -> (f64, f64) {
    let w: Vec<f64> = (0..=ell).map(|j| 0.5f64.powi(j as i32)).collect();
    let total: f64 = w.iter().sum();
    let mean = w.iter().enumerate().map(|(j, w)| j as f64 * w).sum::<f64>() / total;
    let var = w
        .iter()
        .enumerate()
        .map(|(j, w)| (j as f64 - mean).powi(2) * w)
        .sum::<f64>()
        / total;
    (mean, var)
}

/// `eta_ell = (2 - (ell + 2) 2^-ell) / (2 - 2^-ell)`.
pub fn eta_closed(ell: usize) -> f64 {
    let p = 0.5f64.powi(ell as i32);
    (2.0 - (ell as f64 + 2.0) * p) / (2.0 - p)
}

/// Asymptotic variance at `d = 0` for an orthonormal wavelet.
pub fn null_variance(ell: usize) -> f64 {
    let (_, kappa) = eta_kappa(ell);
    1.0 / (2.0 * (2.0 - 0.5f64.powi(ell as i32)) * kappa * LN_2 * LN_2)
}

/// `int_pi^{2 pi} xi^x d xi`.
fn band_power(x: f64) -> f64 {
    if (x + 1.0).abs() < 1e-12 {
        LN_2
    } else {
        ((2.0 * PI).powf(x + 1.0) - PI.powf(x + 1.0)) / (x + 1.0)
    }
}

/// Asymptotic variance for the Shannon wavelet, whose scales do not
/// overlap in frequency.
pub fn shannon_variance(d: f64, ell: usize) -> f64 {
    let (_, kappa) = eta_kappa(ell);
    let g2 = band_power(-2.0 * d);
    PI * band_power(-4.0 * d)
        / (2.0 * (2.0 - 0.5f64.powi(ell as i32)) * kappa * LN_2 * LN_2 * g2 * g2)
}

/// `(2 pi)^-1 sum_tau Cov(W_{0,0}, W_{-u,tau})^2` for the wavelet coefficients
/// of a process with spectral density `|xi|^-2d`, each covariance computed by
/// direct quadrature of
/// `2^{-u/2} int |xi|^-2d psi_hat(xi) conj(psi_hat(xi / 2^u)) e^{i tau xi / 2^u} d xi`.
pub fn covariance_sum(u: usize, d: f64, wavelet: &FourierWavelet) -> f64 {
    let eval = wavelet.evaluator();
    let dilation = 2f64.powi(u as i32);
    let cutoff = 4096.0;
    let rule = composite_rule(0.0, cutoff, (cutoff / 0.05) as usize);
    let values: Vec<(f64, f64, f64)> = rule
        .iter()
        .map(|&(xi, w)| {
            let g = eval.psi_hat(xi) * eval.psi_hat(xi / dilation).conj() * xi.powf(-2.0 * d);
            (xi / dilation, w * g.re, w * g.im)
        })
        .collect();
    let reach = 40 * dilation as i64;
    let mut sum = 0.0;
    for tau in -reach..=reach {
        let t = tau as f64;
        let integral: f64 = values
            .iter()
            .map(|&(x, re, im)| re * (t * x).cos() - im * (t * x).sin())
            .sum();
        let cov = 2.0 * integral / dilation.sqrt();
        sum += cov * cov;
    }
    sum / (2.0 * PI)
}

/// Pyramid with `|W_{j,k}| = sigma 2^{d0 j}` (alternating signs) and
/// `n_j = 2^{top - j}`.
pub fn power_law_pyramid(spec: &WaveletSpec, d0: f64, sigma: f64, top: usize) -> Pyramid {
    let coeffs = (0..=top)
        .map(|j| {
            let size = 1usize << (top - j);
            if j == 0 {
                return vec![0.0; size];
            }
            let a = sigma * 2f64.powf(d0 * j as f64);
            (0..size).map(|k| if k % 2 == 0 { a } else { -a }).collect()
        })
        .collect();
    Pyramid::from_coefficients(spec.clone(), 1 << top, coeffs)
}

pub fn gaussian_series(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

pub fn sample_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}
