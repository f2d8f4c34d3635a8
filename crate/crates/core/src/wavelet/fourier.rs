//! Fourier transforms of the scaling and wavelet functions.
//!
//! `psi_hat(xi) = m1(xi/2) prod_{r>=2} m0(xi/2^r)` where `m0`, `m1` are the
//! normalized transfer functions of the lowpass and highpass filters. The
//! product is expanded until the argument falls below `1/T`; the remaining
//! tail `phi_hat(w)` is summed from its Taylor series, whose coefficients
//! are the moments of `phi` obtained exactly from the refinement equation.

use num_complex::Complex64;
use serde::Serialize;

use super::WaveletSpec;

const TAYLOR_TERMS: usize = 24;
const MAX_DEPTH: usize = 96;

/// A wavelet seen through its Fourier transform: either a compactly
/// supported filter-bank wavelet or the ideal Shannon band-pass reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FourierWavelet {
    Compact(WaveletSpec),
    /// `|psi_hat| = 1` on `pi <= |xi| <= 2 pi`, zero elsewhere. Not compactly
    /// supported, so it never drives a transform.
    Shannon,
}

impl From<WaveletSpec> for FourierWavelet {
    fn from(spec: WaveletSpec) -> Self {
        FourierWavelet::Compact(spec)
    }
}

impl FourierWavelet {
    pub fn name(&self) -> &str {
        match self {
            FourierWavelet::Compact(s) => &s.name,
            FourierWavelet::Shannon => "shannon",
        }
    }

    pub fn d_lower(&self) -> f64 {
        match self {
            FourierWavelet::Compact(s) => s.d_lower(),
            FourierWavelet::Shannon => f64::NEG_INFINITY,
        }
    }

    pub fn d_upper(&self) -> f64 {
        match self {
            FourierWavelet::Compact(s) => s.d_upper(),
            FourierWavelet::Shannon => f64::INFINITY,
        }
    }

    /// Decay exponent of `|psi_hat|` (infinite for Shannon).
    pub fn alpha(&self) -> f64 {
        match self {
            FourierWavelet::Compact(s) => s.alpha,
            FourierWavelet::Shannon => f64::INFINITY,
        }
    }

    pub fn evaluator(&self) -> PsiHatEvaluator {
        PsiHatEvaluator::new(self)
    }
}

/// Precomputed state for fast repeated evaluation of `psi_hat`.
#[derive(Debug, Clone)]
pub struct PsiHatEvaluator {
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    Compact {
        m0: Vec<f64>,
        m1: Vec<f64>,
        phi_taylor: [Complex64; TAYLOR_TERMS],
        psi_taylor: [Complex64; TAYLOR_TERMS],
        radius: f64,
        moments: usize,
    },
    Shannon,
}

impl PsiHatEvaluator {
    pub fn new(wavelet: &FourierWavelet) -> Self {
        let kind = match wavelet {
            FourierWavelet::Shannon => Kind::Shannon,
            FourierWavelet::Compact(spec) => {
                let norm = std::f64::consts::FRAC_1_SQRT_2;
                let m0: Vec<f64> = spec.lowpass.iter().map(|h| h * norm).collect();
                let m1: Vec<f64> = spec.highpass.iter().map(|g| g * norm).collect();
                let (phi_taylor, mut psi_taylor) = taylor_coefficients(&m0, &m1);
                // exact zeros of the vanishing moments, not rounding residue
                for c in psi_taylor.iter_mut().take(spec.vanishing_moments) {
                    *c = Complex64::new(0.0, 0.0);
                }
                Kind::Compact {
                    m0,
                    m1,
                    phi_taylor,
                    psi_taylor,
                    radius: 1.0 / spec.support.max(1) as f64,
                    moments: spec.vanishing_moments,
                }
            }
        };
        PsiHatEvaluator { kind }
    }

    pub fn psi_hat(&self, xi: f64) -> Complex64 {
        match &self.kind {
            Kind::Shannon => shannon(xi),
            Kind::Compact {
                m0,
                m1,
                phi_taylor,
                psi_taylor,
                radius,
                ..
            } => {
                if xi.abs() <= *radius {
                    return horner(psi_taylor, xi);
                }
                let mut w = 0.5 * xi;
                let mut value = transfer(m1, w);
                while w.abs() > *radius {
                    w *= 0.5;
                    value *= transfer(m0, w);
                }
                value * horner(phi_taylor, w)
            }
        }
    }

    pub fn phi_hat(&self, xi: f64) -> Complex64 {
        match &self.kind {
            Kind::Shannon => {
                if xi.abs() <= std::f64::consts::PI {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            Kind::Compact {
                m0,
                phi_taylor,
                radius,
                ..
            } => {
                let mut w = xi;
                let mut value = Complex64::new(1.0, 0.0);
                while w.abs() > *radius {
                    w *= 0.5;
                    value *= transfer(m0, w);
                }
                value * horner(phi_taylor, w)
            }
        }
    }

    /// Fills `out[u] = psi_hat(xi / 2^u)` for `u = 0..out.len()`, sharing the
    /// infinite-product factors between the dilations.
    pub fn psi_hat_dyadic(&self, xi: f64, out: &mut [Complex64]) {
        let (m0, m1, phi_taylor, psi_taylor, radius, moments) = match &self.kind {
            Kind::Shannon => {
                let mut w = xi;
                for o in out.iter_mut() {
                    *o = shannon(w);
                    w *= 0.5;
                }
                return;
            }
            Kind::Compact {
                m0,
                m1,
                phi_taylor,
                psi_taylor,
                radius,
                moments,
            } => (m0, m1, phi_taylor, psi_taylor, *radius, moments),
        };

        // Depth at which the argument xi/2^k enters the Taylor disc.
        let mut depth = 0;
        let mut w = xi;
        while w.abs() > radius && depth < MAX_DEPTH - 1 {
            w *= 0.5;
            depth += 1;
        }
        // phi[k] = phi_hat(xi/2^k) and high[k] = m1(xi/2^k) for k = 1..=depth,
        // filled from the Taylor disc outwards.
        let mut phi = [Complex64::new(0.0, 0.0); MAX_DEPTH];
        let mut high = [Complex64::new(0.0, 0.0); MAX_DEPTH];
        if depth >= 1 {
            phi[depth] = horner(phi_taylor, w);
            let mut w_k = w;
            for k in (1..=depth).rev() {
                let (lo, hi) = transfer_pair(m0, m1, w_k);
                high[k] = hi;
                if k >= 2 {
                    phi[k - 1] = lo * phi[k];
                }
                w_k *= 2.0;
            }
        }

        let mut w_u = xi;
        for (u, o) in out.iter_mut().enumerate() {
            *o = if u < depth {
                high[u + 1] * phi[u + 1]
            } else {
                horner_short(psi_taylor, w_u, radius, *moments)
            };
            w_u *= 0.5;
        }
    }
}

/// Evaluates `psi_hat` on a grid of frequencies.
pub fn psi_hat(wavelet: &FourierWavelet, grid: &[f64]) -> Vec<Complex64> {
    let eval = wavelet.evaluator();
    grid.iter().map(|&xi| eval.psi_hat(xi)).collect()
}

fn shannon(xi: f64) -> Complex64 {
    let a = xi.abs();
    if (std::f64::consts::PI..=2.0 * std::f64::consts::PI).contains(&a) {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::new(0.0, 0.0)
    }
}

#[inline]
fn transfer(coeffs: &[f64], w: f64) -> Complex64 {
    let z = Complex64::from_polar(1.0, -w);
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

#[inline]
fn transfer_pair(lo: &[f64], hi: &[f64], w: f64) -> (Complex64, Complex64) {
    let z = Complex64::from_polar(1.0, -w);
    let a = lo
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c);
    let b = hi
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c);
    (a, b)
}

#[inline]
fn horner(coeffs: &[Complex64; TAYLOR_TERMS], w: f64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * w + c)
}

/// Taylor sum of a series whose first nonzero term has order `lead`, with
/// the number of terms cut to what `|w|` needs for full relative accuracy.
/// The coefficient of order `p` is bounded by `T^p / p!` (moments of a
/// function supported on an interval of length `T`), with `radius = 1/T`.
#[inline]
fn horner_short(coeffs: &[Complex64; TAYLOR_TERMS], w: f64, radius: f64, lead: usize) -> Complex64 {
    let x = w.abs() / radius;
    let mut terms = lead + 1;
    let mut ratio = 1.0;
    while terms < TAYLOR_TERMS {
        ratio *= x / terms as f64;
        terms += 1;
        if ratio < 1e-20 {
            break;
        }
    }
    coeffs[..terms]
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * w + c)
}

/// Taylor coefficients of `phi_hat` and `psi_hat` at the origin from the
/// moments `int t^p phi(t) dt`, which satisfy
/// `mu_p (1 - 2^-p) = 2^-p sum_{q<p} C(p,q) a_{p-q} mu_q` with `a_p` the
/// discrete moments of `m0`.
fn taylor_coefficients(
    m0: &[f64],
    m1: &[f64],
) -> ([Complex64; TAYLOR_TERMS], [Complex64; TAYLOR_TERMS]) {
    let discrete_moments = |c: &[f64]| -> Vec<f64> {
        (0..TAYLOR_TERMS)
            .map(|p| {
                c.iter()
                    .enumerate()
                    .map(|(m, v)| (m as f64).powi(p as i32) * v)
                    .sum()
            })
            .collect()
    };
    let a = discrete_moments(m0);
    let b = discrete_moments(m1);
    let binom = |p: usize, q: usize| -> f64 {
        (0..q).fold(1.0, |acc, i| acc * (p - i) as f64 / (i + 1) as f64)
    };

    let mut mu = [0.0; TAYLOR_TERMS];
    mu[0] = 1.0;
    for p in 1..TAYLOR_TERMS {
        let scale = 0.5f64.powi(p as i32);
        let s: f64 = (0..p).map(|q| binom(p, q) * a[p - q] * mu[q]).sum();
        mu[p] = scale * s / (1.0 - scale);
    }
    let nu: Vec<f64> = (0..TAYLOR_TERMS)
        .map(|p| {
            let scale = 0.5f64.powi(p as i32);
            scale * (0..=p).map(|q| binom(p, q) * b[p - q] * mu[q]).sum::<f64>()
        })
        .collect();

    let mut phi = [Complex64::new(0.0, 0.0); TAYLOR_TERMS];
    let mut psi = [Complex64::new(0.0, 0.0); TAYLOR_TERMS];
    let mut factorial = 1.0;
    let mut minus_i_pow = Complex64::new(1.0, 0.0);
    for p in 0..TAYLOR_TERMS {
        if p > 0 {
            factorial *= p as f64;
            minus_i_pow *= Complex64::new(0.0, -1.0);
        }
        phi[p] = minus_i_pow * (mu[p] / factorial);
        psi[p] = minus_i_pow * (nu[p] / factorial);
    }
    (phi, psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::make_wavelet;
    use std::f64::consts::PI;

    fn direct_product(spec: &WaveletSpec, xi: f64, depth: usize) -> Complex64 {
        let n = std::f64::consts::FRAC_1_SQRT_2;
        let m0: Vec<f64> = spec.lowpass.iter().map(|h| h * n).collect();
        let m1: Vec<f64> = spec.highpass.iter().map(|g| g * n).collect();
        let mut v = transfer(&m1, xi / 2.0);
        for r in 2..=depth {
            v *= transfer(&m0, xi / 2f64.powi(r as i32));
        }
        v
    }

    #[test]
    fn taylor_tail_matches_long_product() {
        for name in ["haar", "db2", "db4", "db8"] {
            let spec = make_wavelet(name).unwrap();
            let eval = FourierWavelet::Compact(spec.clone()).evaluator();
            for &xi in &[0.01, 0.3, 1.7, PI, 5.0, 40.0, 313.0] {
                let a = eval.psi_hat(xi);
                let b = direct_product(&spec, xi, 70);
                assert!((a - b).norm() < 1e-12, "{name} xi={xi}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn haar_closed_form() {
        // phi = 1 on [0,1] and psi = 1 on [0, 1/2), -1 on [1/2, 1)
        let eval = FourierWavelet::Compact(make_wavelet("haar").unwrap()).evaluator();
        for &xi in &[0.2, 1.0, 3.0, 11.0] {
            let e = |a: f64| Complex64::from_polar(1.0, -a);
            let i = Complex64::new(0.0, 1.0);
            let phi = (Complex64::new(1.0, 0.0) - e(xi)) / (i * xi);
            let psi = (Complex64::new(1.0, 0.0) - e(xi / 2.0)).powi(2) / (i * xi);
            assert!((eval.phi_hat(xi) - phi).norm() < 1e-12);
            assert!((eval.psi_hat(xi) - psi).norm() < 1e-12);
        }
    }

    #[test]
    fn dyadic_chain_agrees_with_pointwise() {
        for name in ["haar", "db2", "db4"] {
            let w = FourierWavelet::Compact(make_wavelet(name).unwrap());
            let eval = w.evaluator();
            let mut out = vec![Complex64::new(0.0, 0.0); 60];
            for &xi in &[-2000.3, -7.1, 0.004, 2.5, 9.0, 1234.5] {
                eval.psi_hat_dyadic(xi, &mut out);
                for (u, o) in out.iter().enumerate() {
                    let direct = eval.psi_hat(xi / 2f64.powi(u as i32));
                    let tol = 1e-13 * direct.norm().min(1.0);
                    assert!(
                        (o - direct).norm() <= tol,
                        "{name} xi={xi} u={u}: {o} vs {direct}"
                    );
                }
            }
        }
    }

    #[test]
    fn shannon_is_an_indicator() {
        let v = psi_hat(
            &FourierWavelet::Shannon,
            &[0.5, PI, 4.0, 2.0 * PI, 7.0, -4.0],
        );
        let re: Vec<f64> = v.iter().map(|c| c.re).collect();
        assert_eq!(re, vec![0.0, 1.0, 1.0, 1.0, 0.0, 1.0]);
        assert!(v.iter().all(|c| c.im == 0.0));
    }

    #[test]
    fn vanishes_to_order_m_at_zero() {
        for (name, m) in [("db2", 2), ("db4", 4)] {
            let eval = FourierWavelet::Compact(make_wavelet(name).unwrap()).evaluator();
            let ratios: Vec<f64> = (1..=100)
                .map(|k| {
                    let xi = 0.001 * k as f64;
                    eval.psi_hat(xi).norm() / xi.powi(m)
                })
                .collect();
            let max = ratios.iter().cloned().fold(0.0, f64::max);
            let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(
                max.is_finite() && max < 10.0 * min.max(1e-300),
                "{name}: {min}..{max}"
            );
        }
    }
}
