//! Compactly supported wavelet families, their Fourier transforms and the
//! boundary-aware pyramidal transform.

mod daubechies;
mod fourier;
mod pyramid;

pub use daubechies::daubechies_lowpass;
pub use fourier::{psi_hat, FourierWavelet, PsiHatEvaluator};
pub use pyramid::{direct_coeff, dwt, dwt_into, max_scale, num_coeffs, Pyramid};

use serde::Serialize;

use crate::error::{Error, Result};

/// Fourier decay exponents of the Daubechies wavelets indexed by the number
/// of vanishing moments (entry `M - 1`). The exponent of `db2` and `db4` are
/// the four-digit published values; the others come from the classical
/// Sobolev-type table and are accurate to about three digits. Haar decays
/// exactly like `1/|xi|`.
const DAUBECHIES_ALPHA: [f64; 10] = [
    1.0, 1.3390, 1.6360, 1.9125, 2.1770, 2.4320, 2.6820, 2.9270, 3.1680, 3.4060,
];

/// Largest number of vanishing moments produced by [`make_wavelet`].
pub const MAX_DAUBECHIES_MOMENTS: usize = DAUBECHIES_ALPHA.len();

/// A compactly supported orthonormal wavelet described by its two-channel
/// filter bank.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveletSpec {
    pub name: String,
    /// Number of vanishing moments `M`.
    pub vanishing_moments: usize,
    /// Decay exponent of `|psi_hat|`. For some families this is only a lower
    /// bound, and it can be overridden with [`WaveletSpec::with_alpha`].
    pub alpha: f64,
    /// Support length `T`: `phi` and `psi` are supported on intervals of length `T`.
    pub support: usize,
    pub lowpass: Vec<f64>,
    pub highpass: Vec<f64>,
}

impl WaveletSpec {
    /// Builds a spec from a lowpass filter; the highpass is its quadrature
    /// mirror `g_k = (-1)^k h_{T-k}`.
    pub fn from_lowpass(
        name: impl Into<String>,
        lowpass: Vec<f64>,
        vanishing_moments: usize,
        alpha: f64,
    ) -> Result<Self> {
        if lowpass.len() < 2 {
            return Err(Error::InvalidFilter(
                "lowpass filter needs at least two taps".into(),
            ));
        }
        let last = lowpass.len() - 1;
        let highpass = (0..lowpass.len())
            .map(|k| {
                if k % 2 == 0 {
                    lowpass[last - k]
                } else {
                    -lowpass[last - k]
                }
            })
            .collect();
        let spec = WaveletSpec {
            name: name.into(),
            vanishing_moments,
            alpha,
            support: last,
            lowpass,
            highpass,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Replaces the decay exponent, e.g. with a sharper bound.
    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        self.alpha = alpha;
        self.validate()?;
        Ok(self)
    }

    /// Checks the filter invariants: lowpass sums to `sqrt(2)`, unit energy,
    /// `M` vanishing discrete moments of the highpass, and `alpha >= 1`.
    ///
    /// Haar has `alpha = 1` exactly; every other family must have `alpha > 1`.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidFilter(format!("{}: {msg}", self.name)));
        if self.vanishing_moments == 0 {
            return fail("at least one vanishing moment is required".into());
        }
        if self.lowpass.len() > 2 * self.support.max(1)
            || self.highpass.len() > 2 * self.support.max(1)
        {
            return fail("filters longer than twice the support".into());
        }
        let sum: f64 = self.lowpass.iter().sum();
        if (sum - std::f64::consts::SQRT_2).abs() > 1e-10 {
            return fail(format!("lowpass sums to {sum}, expected sqrt(2)"));
        }
        let energy: f64 = self.highpass.iter().map(|g| g * g).sum();
        if (energy - 1.0).abs() > 1e-10 {
            return fail(format!("highpass energy {energy}, expected 1"));
        }
        for m in 0..self.vanishing_moments {
            let (moment, scale) = self
                .highpass
                .iter()
                .enumerate()
                .map(|(k, g)| {
                    let w = (k as f64).powi(m as i32) * g;
                    (w, w.abs())
                })
                .fold((0.0, 0.0), |(s, a), (w, aw)| (s + w, a + aw));
            // relative to the magnitude of the summands: k^m grows quickly for long filters
            if moment.abs() > 1e-10 * scale.max(1.0) {
                return fail(format!("highpass moment {m} is {moment:e}, expected 0"));
            }
        }
        let haar = self.lowpass.len() == 2;
        if !(self.alpha > 1.0 || (haar && self.alpha >= 1.0)) || !self.alpha.is_finite() {
            return fail(format!(
                "decay exponent alpha = {} must exceed 1",
                self.alpha
            ));
        }
        Ok(())
    }

    /// Lower end of the admissible memory window `(1/2 - alpha, M]`.
    pub fn d_lower(&self) -> f64 {
        0.5 - self.alpha
    }

    /// Upper end of the admissible memory window `(1/2 - alpha, M]`.
    pub fn d_upper(&self) -> f64 {
        self.vanishing_moments as f64
    }
}

/// Builds a wavelet by family name: `haar`, or `dbM` for `M` in `1..=10`.
pub fn make_wavelet(name: &str) -> Result<WaveletSpec> {
    let lower = name.trim().to_ascii_lowercase();
    let moments = match lower.as_str() {
        "haar" => 1,
        s => s
            .strip_prefix("db")
            .and_then(|m| m.parse::<usize>().ok())
            .filter(|m| (1..=MAX_DAUBECHIES_MOMENTS).contains(m))
            .ok_or_else(|| Error::UnknownWavelet(name.to_string()))?,
    };
    let lowpass = daubechies_lowpass(moments)?;
    WaveletSpec::from_lowpass(lower, lowpass, moments, DAUBECHIES_ALPHA[moments - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_spec() {
        let w = make_wavelet("haar").unwrap();
        assert_eq!(w.vanishing_moments, 1);
        assert_eq!(w.support, 1);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((w.lowpass[0] - r).abs() < 1e-15 && (w.lowpass[1] - r).abs() < 1e-15);
        assert!((w.highpass[0] - r).abs() < 1e-15 && (w.highpass[1] + r).abs() < 1e-15);
    }

    #[test]
    fn db2_and_db4_published_exponents() {
        let db2 = make_wavelet("db2").unwrap();
        assert_eq!((db2.vanishing_moments, db2.support), (2, 3));
        assert_eq!(db2.alpha, 1.3390);
        let db4 = make_wavelet("DB4").unwrap();
        assert_eq!((db4.vanishing_moments, db4.support), (4, 7));
        assert_eq!(db4.alpha, 1.9125);
    }

    #[test]
    fn every_family_member_validates() {
        for m in 1..=MAX_DAUBECHIES_MOMENTS {
            let w = make_wavelet(&format!("db{m}")).unwrap();
            w.validate().unwrap();
            let hsum: f64 = w.highpass.iter().sum();
            assert!(hsum.abs() < 1e-12);
        }
    }

    #[test]
    fn unknown_family_is_rejected() {
        assert!(matches!(
            make_wavelet("coif2"),
            Err(Error::UnknownWavelet(_))
        ));
        assert!(matches!(make_wavelet("db0"), Err(Error::UnknownWavelet(_))));
        assert!(matches!(
            make_wavelet("db11"),
            Err(Error::UnknownWavelet(_))
        ));
    }

    #[test]
    fn alpha_override_is_validated() {
        let w = make_wavelet("db2").unwrap();
        assert!(w.clone().with_alpha(0.9).is_err());
        assert_eq!(w.with_alpha(1.5).unwrap().alpha, 1.5);
    }

    #[test]
    fn broken_filter_fails_validation() {
        let mut h = daubechies_lowpass(2).unwrap();
        h[0] += 1e-3;
        assert!(WaveletSpec::from_lowpass("bad", h, 2, 1.3).is_err());
    }
}
