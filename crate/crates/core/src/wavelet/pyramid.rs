//! Boundary-aware pyramidal wavelet decomposition.
//!
//! Scale `j >= 1` is the `j`-th stage of the two-channel filter bank, so
//! `W_{j,k} = sum_m e_j[m] x[2^j k + m]` where `e_j` is the cascade of `j - 1`
//! upsampled lowpass filters followed by the highpass. Only the first `n_j`
//! coefficients are kept: each depends on samples inside the record.
//!
//! Scale `0` corresponds to projecting the sample-level approximation
//! `X(t) = sum_k X_k phi(t - k)` on `psi(t - k)`, which vanishes identically
//! for an orthonormal multiresolution; it is stored as zeros so that scale
//! indices and counts line up with `n_j`.

use serde::Serialize;

use super::WaveletSpec;
use crate::error::{Error, Result};

/// Number of coefficients at scale `j` computable from `n` samples with a
/// wavelet of support `t`: `max(floor(2^-j (n - T + 1)) - T + 1, 0)`.
pub fn num_coeffs(n: usize, t: usize, j: usize) -> usize {
    if n + 1 < t || j >= usize::BITS as usize {
        return 0;
    }
    let available = (n + 1 - t) >> j;
    (available + 1).saturating_sub(t)
}

/// Largest scale with at least one coefficient.
pub fn max_scale(n: usize, t: usize) -> Result<usize> {
    if num_coeffs(n, t, 0) == 0 {
        return Err(Error::SeriesTooShort(format!(
            "{n} samples cannot support a wavelet of support {t}"
        )));
    }
    let mut j = 0;
    while num_coeffs(n, t, j + 1) >= 1 {
        j += 1;
    }
    Ok(j)
}

/// Per-scale wavelet detail coefficients of one series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pyramid {
    pub wavelet: WaveletSpec,
    /// Length of the analysed series.
    pub n: usize,
    /// `coeffs[j]` holds `W_{j,0..n_j}`.
    pub coeffs: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
}

impl Pyramid {
    /// Highest stored scale index.
    pub fn max_scale(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn scale(&self, j: usize) -> Option<&[f64]> {
        self.coeffs.get(j).map(Vec::as_slice)
    }

    /// Builds a pyramid directly from coefficient arrays, e.g. a synthetic
    /// scalogram. Counts are taken from the array lengths.
    pub fn from_coefficients(wavelet: WaveletSpec, n: usize, coeffs: Vec<Vec<f64>>) -> Self {
        let counts = coeffs.iter().map(Vec::len).collect();
        Pyramid {
            wavelet,
            n,
            coeffs,
            counts,
        }
    }
}

/// Pyramidal transform of `x` up to scale `j_max` (default: the maximal
/// available scale). Runs in `O(n)`.
pub fn dwt(x: &[f64], spec: &WaveletSpec, j_max: Option<usize>) -> Result<Pyramid> {
    let mut pyramid = Pyramid::from_coefficients(spec.clone(), 0, Vec::new());
    dwt_into(x, spec, j_max, &mut pyramid)?;
    Ok(pyramid)
}

/// [`dwt`] writing into an existing pyramid, reusing its buffers across
/// calls (Monte Carlo loops, repeated transforms of equal-length series).
pub fn dwt_into(
    x: &[f64],
    spec: &WaveletSpec,
    j_max: Option<usize>,
    out: &mut Pyramid,
) -> Result<()> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = x.len();
    let t = spec.support;
    let top = max_scale(n, t)?;
    let top = match j_max {
        Some(j) if j > top => {
            return Err(Error::ScaleOutOfRange {
                requested: j,
                max: top,
            })
        }
        Some(j) => j,
        None => top,
    };

    if out.wavelet != *spec {
        out.wavelet = spec.clone();
    }
    out.n = n;
    out.counts.clear();
    out.counts.extend((0..=top).map(|j| num_coeffs(n, t, j)));
    out.coeffs.resize_with(top + 1, Vec::new);
    for (c, &count) in out.coeffs.iter_mut().zip(&out.counts) {
        c.clear();
        c.reserve(count);
    }
    out.coeffs[0].resize(out.counts[0], 0.0);
    let (counts, coeffs) = (&out.counts, &mut out.coeffs);

    // Blocked cascade: the input is fed in blocks through every stage, each
    // stage keeping only the approximations its next outputs still need, so
    // the working set stays in cache and x is read once.
    let taps = spec.lowpass.len();
    let mut pending: Vec<Vec<f64>> = vec![Vec::new(); top + 1];
    let mut produced = vec![0usize; top + 1];
    let mut end = if top == 0 { n } else { 0 };
    while end < n {
        end = (end + BLOCK).min(n);
        // stage 1 reads x directly
        if end >= taps {
            let last = (end - taps) / 2;
            for k in produced[1]..=last {
                let (a, d) = filter_pair(&x[2 * k..2 * k + taps], spec);
                if k < counts[1] {
                    coeffs[1].push(d);
                }
                if top > 1 {
                    pending[1].push(a);
                }
            }
            produced[1] = produced[1].max(last + 1);
        }
        for j in 2..=top {
            let (lower, upper) = pending.split_at_mut(j);
            let input = &mut lower[j - 1];
            if input.len() < taps {
                break;
            }
            let m = (input.len() - taps) / 2 + 1;
            for i in 0..m {
                let k = produced[j] + i;
                let (a, d) = filter_pair(&input[2 * i..2 * i + taps], spec);
                if k < counts[j] {
                    coeffs[j].push(d);
                }
                if j < top {
                    upper[0].push(a);
                }
            }
            produced[j] += m;
            input.drain(..2 * m);
        }
    }
    Ok(())
}

/// Input samples per block of the cascade.
const BLOCK: usize = 1 << 12;

#[inline]
fn filter_pair(window: &[f64], spec: &WaveletSpec) -> (f64, f64) {
    let (mut a, mut d) = (0.0, 0.0);
    for ((w, l), h) in window.iter().zip(&spec.lowpass).zip(&spec.highpass) {
        a += w * l;
        d += w * h;
    }
    (a, d)
}

/// Composite analysis filter of scale `j`, built by explicit convolution of
/// the upsampled stage filters.
pub(crate) fn composite_filter(spec: &WaveletSpec, j: usize) -> Vec<f64> {
    if j == 0 {
        return Vec::new();
    }
    let mut filter = vec![1.0];
    for stage in 1..=j {
        let base = if stage == j {
            &spec.highpass
        } else {
            &spec.lowpass
        };
        let stride = 1usize << (stage - 1);
        let mut upsampled = vec![0.0; (base.len() - 1) * stride + 1];
        for (i, &c) in base.iter().enumerate() {
            upsampled[i * stride] = c;
        }
        let mut out = vec![0.0; filter.len() + upsampled.len() - 1];
        for (a, &fa) in filter.iter().enumerate() {
            for (b, &ub) in upsampled.iter().enumerate() {
                out[a + b] += fa * ub;
            }
        }
        filter = out;
    }
    filter
}

/// `W_{j,k}` computed by direct convolution with the composite filter of
/// scale `j`; the reference against which [`dwt`] is checked.
pub fn direct_coeff(x: &[f64], spec: &WaveletSpec, j: usize, k: usize) -> Result<f64> {
    let count = num_coeffs(x.len(), spec.support, j);
    if k >= count {
        return Err(Error::CoefficientOutOfRange { j, k, count });
    }
    if j == 0 {
        return Ok(0.0);
    }
    let filter = composite_filter(spec, j);
    let start = k << j;
    Ok(filter
        .iter()
        .zip(&x[start..start + filter.len()])
        .map(|(f, v)| f * v)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::make_wavelet;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_series(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn coefficient_counts() {
        assert_eq!(num_coeffs(100, 1, 1), 50);
        assert_eq!(num_coeffs(100, 1, 7), 0);
        // floor(4094 / 32) - 2
        assert_eq!(num_coeffs(4096, 3, 5), 125);
        assert_eq!(num_coeffs(2, 5, 0), 0);
    }

    #[test]
    fn maximal_scale() {
        assert_eq!(max_scale(100, 1).unwrap(), 6);
        assert_eq!(max_scale(2, 1).unwrap(), 1);
        let j = max_scale(4096, 3).unwrap();
        assert!(num_coeffs(4096, 3, j) >= 1 && num_coeffs(4096, 3, j + 1) == 0);
        assert_eq!(j, 10);
        assert!(matches!(max_scale(3, 3), Err(Error::SeriesTooShort(_))));
    }

    #[test]
    fn counts_follow_formula() {
        let spec = make_wavelet("db2").unwrap();
        for n in [7usize, 16, 100, 257, 1000] {
            let p = dwt(&random_series(n, 1), &spec, None).unwrap();
            for (j, c) in p.coeffs.iter().enumerate() {
                assert_eq!(c.len(), num_coeffs(n, 3, j));
                assert_eq!(p.counts[j], c.len());
            }
        }
    }

    #[test]
    fn matches_direct_convolution() {
        for name in ["haar", "db2", "db4"] {
            let spec = make_wavelet(name).unwrap();
            for seed in 0..10 {
                let x = random_series(64, seed);
                let p = dwt(&x, &spec, None).unwrap();
                for (j, level) in p.coeffs.iter().enumerate() {
                    for (k, &w) in level.iter().enumerate() {
                        let d = direct_coeff(&x, &spec, j, k).unwrap();
                        assert!((w - d).abs() <= 1e-12 * (1.0 + d.abs()), "{name} ({j},{k})");
                    }
                }
            }
        }
    }

    #[test]
    fn first_scale_is_single_highpass_stage() {
        let spec = make_wavelet("db2").unwrap();
        let x = random_series(40, 3);
        let w = direct_coeff(&x, &spec, 1, 4).unwrap();
        let expected: f64 = (0..4).map(|m| spec.highpass[m] * x[8 + m]).sum();
        assert!((w - expected).abs() < 1e-15);
    }

    #[test]
    fn constants_and_ramps_are_annihilated() {
        let db2 = make_wavelet("db2").unwrap();
        let ramp: Vec<f64> = (0..300).map(|i| 3.0 + 0.25 * i as f64).collect();
        let p = dwt(&ramp, &db2, None).unwrap();
        assert!(p.coeffs.iter().flatten().all(|w| w.abs() < 1e-9));

        let haar = make_wavelet("haar").unwrap();
        let p = dwt(&[2.5; 128], &haar, None).unwrap();
        assert!(p.coeffs.iter().flatten().all(|w| w.abs() < 1e-10));
        assert!(direct_coeff(&[1.0; 64], &db2, 2, 3).unwrap().abs() < 1e-12);
    }

    #[test]
    fn shift_by_dyadic_step_shifts_index() {
        let spec = make_wavelet("db4").unwrap();
        let x = random_series(600, 9);
        let j = 3;
        let shifted = &x[8..];
        let a = dwt(&x, &spec, Some(j)).unwrap();
        let b = dwt(shifted, &spec, Some(j)).unwrap();
        for k in 0..b.counts[j] {
            assert!((a.coeffs[j][k + 1] - b.coeffs[j][k]).abs() < 1e-12);
        }
    }

    #[test]
    fn reused_buffers_give_identical_pyramids() {
        let db2 = make_wavelet("db2").unwrap();
        let db4 = make_wavelet("db4").unwrap();
        let mut out = dwt(&random_series(5000, 1), &db4, None).unwrap();
        for (n, spec, j_max) in [(300, &db2, None), (9000, &db4, Some(5)), (64, &db4, None)] {
            let x = random_series(n, n as u64);
            dwt_into(&x, spec, j_max, &mut out).unwrap();
            assert_eq!(out, dwt(&x, spec, j_max).unwrap());
        }
    }

    #[test]
    fn blocks_do_not_change_coefficients() {
        // lengths straddling the block size of the cascade
        let spec = make_wavelet("db3").unwrap();
        for n in [BLOCK - 1, BLOCK, BLOCK + 1, 3 * BLOCK + 5] {
            let x = random_series(n, 7);
            let p = dwt(&x, &spec, None).unwrap();
            for j in 1..=p.max_scale() {
                assert_eq!(p.coeffs[j].len(), num_coeffs(n, spec.support, j));
                for k in [0, p.coeffs[j].len() / 2, p.coeffs[j].len() - 1] {
                    let direct = direct_coeff(&x, &spec, j, k).unwrap();
                    assert!((p.coeffs[j][k] - direct).abs() < 1e-10 * (1.0 + direct.abs()));
                }
            }
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let spec = make_wavelet("haar").unwrap();
        assert!(matches!(dwt(&[], &spec, None), Err(Error::EmptyInput)));
        assert!(matches!(
            dwt(&[1.0; 16], &spec, Some(5)),
            Err(Error::ScaleOutOfRange {
                requested: 5,
                max: 4
            })
        ));
        assert!(matches!(
            direct_coeff(&[1.0; 16], &spec, 2, 4),
            Err(Error::CoefficientOutOfRange { .. })
        ));
    }
}
