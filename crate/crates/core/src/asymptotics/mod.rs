//! Asymptotic variance of the local Whittle wavelet estimator.
//!
//! The limiting law of `sqrt(n 2^-L) (d_hat - d)` is Gaussian with variance
//! `V(d, ell)`, built from the scaling constant `K(d)`, the squared norms
//! `I_u(d)` of the cross-scale spectral densities `D_u(. ; d)` of the
//! generalized fractional Brownian motion, and the moments `eta`, `kappa` of
//! the geometric scale weights.

pub(crate) mod quadrature;

use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::wavelet::{FourierWavelet, PsiHatEvaluator};
use quadrature::Rule;

/// Number of scales `ell = U - L` entering the estimator, possibly infinite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ell {
    Finite(usize),
    Infinite,
}

impl fmt::Display for Ell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ell::Finite(l) => write!(f, "{l}"),
            Ell::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for Ell {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if matches!(t.as_str(), "inf" | "infinity" | "∞") {
            return Ok(Ell::Infinite);
        }
        match t.parse::<usize>() {
            Ok(l) if l >= 1 => Ok(Ell::Finite(l)),
            _ => Err(Error::InvalidArgument(format!(
                "ell must be a positive integer or `inf`, got `{s}`"
            ))),
        }
    }
}

impl Serialize for Ell {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Ell::Finite(l) => s.serialize_u64(*l as u64),
            Ell::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Mean and variance `(eta, kappa)` of the scale offset `j` under the weights
/// `2^-j / (2 - 2^-ell)`, `j = 0..=ell`. The infinite limit is `(1, 2)`.
pub fn eta_kappa(ell: Ell) -> Result<(f64, f64)> {
    match ell {
        Ell::Infinite => Ok((1.0, 2.0)),
        Ell::Finite(0) => Err(Error::InvalidArgument("ell must be at least 1".into())),
        Ell::Finite(l) => {
            let norm = 2.0 - 0.5f64.powi(l as i32);
            let weight = |j: usize| 0.5f64.powi(j as i32) / norm;
            let eta: f64 = (0..=l).map(|j| j as f64 * weight(j)).sum();
            let kappa: f64 = (0..=l).map(|j| (j as f64 - eta).powi(2) * weight(j)).sum();
            Ok((eta, kappa))
        }
    }
}

/// Closed form of `eta_ell`: `(1 - 2^-ell (1 + ell/2)) / (1 - 2^-(ell+1))`.
pub fn eta_closed_form(ell: usize) -> f64 {
    let l = ell as f64;
    (1.0 - 0.5f64.powi(ell as i32) * (1.0 + l / 2.0)) / (1.0 - 0.5f64.powi(ell as i32 + 1))
}

/// `V(0, ell)` for an orthonormal wavelet basis, where `K(0) = 2 pi` and
/// `I_u(0) = 2 pi 1(u = 0)`: `1 / (2 (2 - 2^-ell) kappa_ell log^2 2)`.
pub fn orthonormal_null_variance(ell: Ell) -> Result<f64> {
    let (_, kappa) = eta_kappa(ell)?;
    Ok(1.0 / (2.0 * weight_norm(ell) * kappa * LN_2 * LN_2))
}

fn weight_norm(ell: Ell) -> f64 {
    match ell {
        Ell::Finite(l) => 2.0 - 0.5f64.powi(l as i32),
        Ell::Infinite => 2.0,
    }
}

/// `g(x) = int_pi^{2 pi} lambda^x d lambda`.
pub fn shannon_g(x: f64) -> f64 {
    if (x + 1.0).abs() < 1e-12 {
        // expansion around x = -1 to avoid cancellation
        let e = x + 1.0;
        let (a, b) = ((2.0 * PI).ln(), PI.ln());
        return LN_2 + e * (a * a - b * b) / 2.0;
    }
    ((2.0 * PI).powf(x + 1.0) - PI.powf(x + 1.0)) / (x + 1.0)
}

/// Closed-form variance for the ideal Shannon wavelet, for which
/// `D_0(lambda) = (2 pi - |lambda|)^{-2d}` and `D_u = 0` for `u >= 1`.
pub fn shannon_variance(d: f64, ell: Ell) -> Result<f64> {
    let (_, kappa) = eta_kappa(ell)?;
    let g2 = shannon_g(-2.0 * d);
    Ok(PI * shannon_g(-4.0 * d) / (2.0 * weight_norm(ell) * kappa * LN_2 * LN_2 * g2 * g2))
}

/// Discretization settings for the frequency integrals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    /// Equal Gauss-Legendre panels on `(0, pi)`.
    pub panels: usize,
    /// Geometric refinements of the first panel towards `lambda = 0`.
    pub graded: usize,
    /// Nodes per panel.
    pub order: usize,
    /// Target truncation error of the aliasing sum over `l`.
    pub aliasing_tol: f64,
    /// Bounds on the number `L_max` of aliases kept on each side.
    pub min_aliases: usize,
    pub max_aliases: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            panels: 64,
            graded: 30,
            order: 16,
            aliasing_tol: 1e-8,
            min_aliases: 32,
            max_aliases: 1024,
        }
    }
}

impl QuadratureOptions {
    /// Coarser settings, about 1e-4 relative accuracy at a fraction of the
    /// cost; used for plug-in variances inside Monte Carlo loops.
    pub fn coarse() -> Self {
        QuadratureOptions {
            panels: 24,
            graded: 20,
            order: 12,
            aliasing_tol: 1e-6,
            min_aliases: 32,
            max_aliases: 256,
        }
    }
}

/// Number of aliases kept on each side of the sum defining `D_u`. With
/// `|psi_hat(xi)| <= C (1 + |xi|)^-alpha`, the terms decay like
/// `|xi|^{-p}` with `p = 2d + 2 alpha`, so the tail beyond `L` is about
/// `(2 pi L)^{1-p} / (pi (p - 1))`.
pub fn alias_count(d: f64, alpha: f64, opts: &QuadratureOptions) -> usize {
    if !alpha.is_finite() {
        return opts.min_aliases;
    }
    let p = 2.0 * d + 2.0 * alpha;
    if p <= 1.0 + 1e-9 {
        return opts.max_aliases;
    }
    let l = (1.0 / (PI * (p - 1.0) * opts.aliasing_tol)).powf(1.0 / (p - 1.0)) / (2.0 * PI);
    if !l.is_finite() {
        return opts.max_aliases;
    }
    (l.ceil() as usize).clamp(opts.min_aliases, opts.max_aliases)
}

fn check_domain(d: f64, wavelet: &FourierWavelet, upper: f64) -> Result<()> {
    let lower = wavelet.d_lower();
    if !d.is_finite() || d <= lower || d > upper {
        return Err(Error::OutsideDomain {
            d,
            lower,
            upper,
            wavelet: wavelet.name().to_string(),
        });
    }
    Ok(())
}

/// The cross-scale density `D_u(lambda; d)` as a vector of `2^u` complex
/// components, by direct summation over `|l| <= L_max` aliases.
pub fn dinf(u: usize, lambda: f64, d: f64, wavelet: &FourierWavelet) -> Result<Vec<Complex64>> {
    check_domain(d, wavelet, wavelet.d_upper())?;
    if !(lambda.abs() < PI) {
        return Err(Error::InvalidArgument(format!(
            "lambda = {lambda} outside (-pi, pi)"
        )));
    }
    if u > 20 {
        return Err(Error::InvalidArgument(format!(
            "u = {u} too large for the vector form"
        )));
    }
    let opts = QuadratureOptions::default();
    let aliases = (alias_count(d, wavelet.alpha(), &opts) << u)
        .clamp(opts.min_aliases, opts.max_aliases) as i64;
    Ok(dinf_vector(u, lambda, d, &wavelet.evaluator(), aliases))
}

fn dinf_vector(
    u: usize,
    lambda: f64,
    d: f64,
    eval: &PsiHatEvaluator,
    aliases: i64,
) -> Vec<Complex64> {
    let width = 1usize << u;
    let dilation = 0.5f64.powi(u as i32);
    let mut out = vec![Complex64::new(0.0, 0.0); width];
    for l in -aliases..=aliases {
        let xi = lambda + 2.0 * PI * l as f64;
        if xi == 0.0 {
            continue;
        }
        let c = xi.abs().powf(-2.0 * d) * eval.psi_hat(xi).conj() * eval.psi_hat(dilation * xi);
        for (v, o) in out.iter_mut().enumerate() {
            *o += c * Complex64::from_polar(1.0, -(v as f64) * dilation * xi);
        }
    }
    let norm = dilation.sqrt();
    out.iter_mut().for_each(|o| *o *= norm);
    out
}

/// `|D_u(lambda; d)|^2` for `u = 0..out.len()` at once.
///
/// Grouping the aliases by residue `l mod 2^u` and applying Parseval to the
/// `2^u` phases gives `|D_u|^2 = sum_r |sum_{l = r mod 2^u} c_l|^2` with
/// `c_l = |xi_l|^{-2d} conj(psi_hat(xi_l)) psi_hat(xi_l / 2^u)`.
fn dinf_norms(lambda: f64, d: f64, eval: &PsiHatEvaluator, aliases: i64, out: &mut [f64]) {
    let depth = out.len();
    let count = (2 * aliases + 1) as usize;
    // scales whose residue classes hold more than one alias
    let binned = (0..depth).take_while(|&u| (1usize << u) < count).count();
    let offsets: Vec<usize> = (0..=binned).map(|u| (1usize << u) - 1).collect();
    let mut bins = vec![Complex64::new(0.0, 0.0); offsets[binned]];
    let mut squares = vec![0.0; depth];
    let mut psi = vec![Complex64::new(0.0, 0.0); depth];

    for l in -aliases..=aliases {
        let xi = lambda + 2.0 * PI * l as f64;
        if xi == 0.0 {
            continue;
        }
        eval.psi_hat_dyadic(xi, &mut psi);
        let head = xi.abs().powf(-2.0 * d) * psi[0].conj();
        for u in 0..depth {
            let c = head * psi[u];
            if u < binned {
                let r = l.rem_euclid(1i64 << u) as usize;
                bins[offsets[u] + r] += c;
            } else {
                squares[u] += c.norm_sqr();
            }
        }
    }
    for (u, o) in out.iter_mut().enumerate() {
        *o = if u < binned {
            bins[offsets[u]..offsets[u + 1]]
                .iter()
                .map(|c| c.norm_sqr())
                .sum()
        } else {
            squares[u]
        };
    }
}

/// `I_u(d) = int_{-pi}^{pi} |D_u(lambda; d)|^2 d lambda` for `u = 0..=u_max`.
pub fn cross_scale_norms(
    d: f64,
    u_max: usize,
    wavelet: &FourierWavelet,
    opts: &QuadratureOptions,
) -> Result<Vec<f64>> {
    check_domain(d, wavelet, wavelet.d_upper())?;
    let eval = wavelet.evaluator();
    // psi_hat(xi / 2^u) only starts to decay past 2^u times the usual cutoff;
    // beyond u = 3 the norms are too small to matter in V
    let aliases = (alias_count(d, wavelet.alpha(), opts) << u_max.min(3))
        .clamp(opts.min_aliases, opts.max_aliases) as i64;
    let rule = Rule::graded(PI, opts.panels, opts.graded, opts.order);
    let depth = u_max + 1;
    let per_node: Vec<Vec<f64>> = rule
        .nodes
        .par_iter()
        .map(|&lambda| {
            let mut out = vec![0.0; depth];
            dinf_norms(lambda, d, &eval, aliases, &mut out);
            out
        })
        .collect();
    let mut total = vec![0.0; depth];
    for (values, w) in per_node.iter().zip(&rule.weights) {
        for (t, v) in total.iter_mut().zip(values) {
            *t += w * v;
        }
    }
    // |D_u| is even in lambda
    total.iter_mut().for_each(|t| *t *= 2.0);
    Ok(total)
}

/// `I_u(d)` for a single `u`.
pub fn i_u(u: usize, d: f64, wavelet: &FourierWavelet) -> Result<f64> {
    Ok(cross_scale_norms(d, u, wavelet, &QuadratureOptions::default())?[u])
}

/// `K(d) = int |xi|^{-2d} |psi_hat(xi)|^2 d xi`, for `d` in
/// `(1/2 - alpha, M + 1/2)`.
///
/// Adaptive Gauss-Kronrod on `(0, 1)` (geometric breakpoints towards the
/// origin) and on dyadic shells `[2^k, 2^{k+1}]` up to `2^15`; the remaining
/// tail is extrapolated from the ratio of the last two shells.
pub fn k_psi(d: f64, wavelet: &FourierWavelet) -> Result<f64> {
    check_domain(d, wavelet, wavelet.d_upper() + 0.5 - 1e-12)?;
    let eval = wavelet.evaluator();
    let f = |xi: f64| xi.powf(-2.0 * d) * eval.psi_hat(xi).norm_sqr();

    let mut total = 0.0;
    // below 2^-40, f(xi) ~ c xi^{2M - 2d}
    let tiny = 0.5f64.powi(40);
    if let FourierWavelet::Compact(spec) = wavelet {
        let exponent = 2.0 * spec.vanishing_moments as f64 - 2.0 * d;
        total += tiny * f(tiny) / (exponent + 1.0);
    }
    let mut breaks: Vec<f64> = (0..=40).rev().map(|k| 0.5f64.powi(k)).collect();
    let top_shell = 15;
    for k in 1..=top_shell {
        breaks.push(2f64.powi(k));
    }
    // keep panels narrower than pi, and split at the Shannon band edges
    let mut fine = vec![breaks[0]];
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let pieces = ((b - a) / PI).ceil().max(1.0) as usize;
        for i in 1..=pieces {
            fine.push(a + (b - a) * i as f64 / pieces as f64);
        }
    }
    fine.extend([PI, 2.0 * PI]);
    fine.sort_by(f64::total_cmp);
    fine.dedup();

    let pieces: Vec<(f64, f64)> = fine.windows(2).map(|p| (p[0], p[1])).collect();
    let values: Vec<f64> = pieces
        .par_iter()
        .map(|&(a, b)| quadrature::adaptive(f, a, b, 1e-16 * (b - a), 1e-11))
        .collect();
    let mut shells = vec![0.0; top_shell as usize + 1];
    for (&(a, _), v) in pieces.iter().zip(&values) {
        total += v;
        if a >= 1.0 {
            shells[a.log2().floor() as usize] += v;
        }
    }
    let last = shells[top_shell as usize - 1];
    let previous = shells[top_shell as usize - 2];
    if last > 0.0 && previous > 0.0 {
        let ratio = last / previous;
        if ratio < 1.0 {
            total += last * ratio / (1.0 - ratio);
        }
    }
    Ok(2.0 * total)
}

/// Largest `u` used when summing the `ell = inf` series.
const INFINITE_SERIES_CAP: usize = 40;

/// Assembles `V(d, ell)` from `K(d)` and `I_0..I_{u_max}`.
pub fn variance_from_parts(d: f64, ell: Ell, k: f64, norms: &[f64]) -> Result<f64> {
    let (eta, kappa) = eta_kappa(ell)?;
    let lk = LN_2 * k;
    match ell {
        Ell::Finite(l) => {
            if norms.len() <= l {
                return Err(Error::InvalidArgument(format!(
                    "need I_u for u <= {l}, got {} values",
                    norms.len()
                )));
            }
            let s = weight_norm(ell);
            let mut cross = 0.0;
            for (u, &iu) in norms.iter().enumerate().take(l + 1).skip(1) {
                let inner: f64 = (0..=l - u)
                    .map(|i| {
                        let i = i as f64;
                        0.5f64.powi(i as i32) / s * (i - eta) * (i + u as f64 - eta)
                    })
                    .sum();
                cross += iu * 2f64.powf((2.0 * d - 1.0) * u as f64) * inner;
            }
            Ok(PI / (s * kappa * lk * lk) * (norms[0] + 2.0 / kappa * cross))
        }
        Ell::Infinite => {
            let mut sum = norms[0];
            for (u, &iu) in norms.iter().enumerate().skip(1) {
                let term = 2.0 * iu * 2f64.powf((2.0 * d - 1.0) * u as f64);
                sum += term;
                if term.abs() < 1e-10 * sum.abs() {
                    break;
                }
            }
            Ok(PI / (2.0 * lk).powi(2) * sum)
        }
    }
}

fn series_depth(ell: Ell) -> usize {
    match ell {
        Ell::Finite(l) => l,
        Ell::Infinite => INFINITE_SERIES_CAP,
    }
}

/// Asymptotic variance `V(d, ell)` of `sqrt(n 2^-L) (d_hat - d)`.
pub fn variance(d: f64, ell: Ell, wavelet: &FourierWavelet) -> Result<f64> {
    variance_with(d, ell, wavelet, &QuadratureOptions::default())
}

pub fn variance_with(
    d: f64,
    ell: Ell,
    wavelet: &FourierWavelet,
    opts: &QuadratureOptions,
) -> Result<f64> {
    eta_kappa(ell)?;
    check_domain(d, wavelet, wavelet.d_upper())?;
    let k = k_psi(d, wavelet)?;
    let norms = cross_scale_norms(d, series_depth(ell), wavelet, opts)?;
    variance_from_parts(d, ell, k, &norms)
}

/// `V` tabulated over a grid of memory parameters and scale counts, with the
/// Shannon closed form alongside.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceTable {
    pub family: String,
    pub d_grid: Vec<f64>,
    pub ells: Vec<Ell>,
    /// `values[i][k] = V(d_grid[i], ells[k])`.
    pub values: Vec<Vec<f64>>,
    pub shannon: Vec<Vec<f64>>,
}

pub fn variance_table(
    wavelet: &FourierWavelet,
    d_grid: &[f64],
    ells: &[Ell],
) -> Result<VarianceTable> {
    variance_table_with(wavelet, d_grid, ells, &QuadratureOptions::default())
}

pub fn variance_table_with(
    wavelet: &FourierWavelet,
    d_grid: &[f64],
    ells: &[Ell],
    opts: &QuadratureOptions,
) -> Result<VarianceTable> {
    if ells.is_empty() || d_grid.is_empty() {
        return Err(Error::InvalidArgument("empty variance table grid".into()));
    }
    for &ell in ells {
        eta_kappa(ell)?;
    }
    let depth = ells.iter().map(|&e| series_depth(e)).max().unwrap_or(0);
    let rows: Vec<Result<(Vec<f64>, Vec<f64>)>> = d_grid
        .par_iter()
        .map(|&d| {
            let k = k_psi(d, wavelet)?;
            let norms = cross_scale_norms(d, depth, wavelet, opts)?;
            let values = ells
                .iter()
                .map(|&e| variance_from_parts(d, e, k, &norms))
                .collect::<Result<Vec<_>>>()?;
            let shannon = ells
                .iter()
                .map(|&e| shannon_variance(d, e))
                .collect::<Result<Vec<_>>>()?;
            Ok((values, shannon))
        })
        .collect();
    let (mut values, mut shannon) = (Vec::new(), Vec::new());
    for row in rows {
        let (v, s) = row?;
        values.push(v);
        shannon.push(s);
    }
    Ok(VarianceTable {
        family: wavelet.name().to_string(),
        d_grid: d_grid.to_vec(),
        ells: ells.to_vec(),
        values,
        shannon,
    })
}

impl VarianceTable {
    /// Linear interpolation in `d` of the column for `ell`; `None` outside
    /// the grid or for an untabulated `ell`. The grid must be increasing.
    pub fn interpolate(&self, d: f64, ell: Ell) -> Option<f64> {
        let col = self.ells.iter().position(|&e| e == ell)?;
        let grid = &self.d_grid;
        if !(d >= grid[0] && d <= *grid.last()?) {
            return None;
        }
        let i = grid
            .partition_point(|&g| g <= d)
            .clamp(1, grid.len().max(2) - 1);
        if grid.len() == 1 {
            return Some(self.values[0][col]);
        }
        let (d0, d1) = (grid[i - 1], grid[i]);
        let t = (d - d0) / (d1 - d0);
        Some((1.0 - t) * self.values[i - 1][col] + t * self.values[i][col])
    }
}
