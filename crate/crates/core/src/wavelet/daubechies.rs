//! Daubechies scaling filters by spectral factorization.
//!
//! The squared modulus of the minimum-phase lowpass transfer function is
//! `cos^{2M}(w/2) P(sin^2(w/2))` with `P(y) = sum_{k<M} C(M-1+k, k) y^k`.
//! Each root of `P` maps to a pair `z, 1/z` through `z + 1/z = 2 - 4y`; the
//! factor keeps the root inside the unit circle.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Lowpass filter of the Daubechies wavelet with `m` vanishing moments,
/// ordered so that the energy is front-loaded (`db2` starts with 0.4830).
pub fn daubechies_lowpass(m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::InvalidArgument(
            "number of vanishing moments must be positive".into(),
        ));
    }
    // P(y) coefficients in ascending powers.
    let p: Vec<f64> = (0..m).map(|k| binomial(m - 1 + k, k)).collect();
    let y_roots = polynomial_roots(&p)?;

    // Polynomial in z with ascending coefficients, starting from (1 + z)^M.
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for _ in 0..m {
        poly = multiply_linear(&poly, Complex64::new(1.0, 0.0));
    }
    for y in y_roots {
        let b = Complex64::new(2.0, 0.0) - 4.0 * y;
        let disc = (b * b - 4.0).sqrt();
        let z1 = (b + disc) / 2.0;
        let z2 = (b - disc) / 2.0;
        let z = if z1.norm() < z2.norm() { z1 } else { z2 };
        poly = multiply_linear(&poly, -z);
    }

    let mut h: Vec<f64> = poly.iter().rev().map(|c| c.re).collect();
    let sum: f64 = h.iter().sum();
    let scale = std::f64::consts::SQRT_2 / sum;
    for c in &mut h {
        *c *= scale;
    }
    Ok(h)
}

// (p(z)) * (z + a), ascending coefficients
fn multiply_linear(p: &[Complex64], a: Complex64) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); p.len() + 1];
    for (i, &c) in p.iter().enumerate() {
        out[i] += c * a;
        out[i + 1] += c;
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn eval(p: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut value = Complex64::new(0.0, 0.0);
    let mut deriv = Complex64::new(0.0, 0.0);
    for &c in p.iter().rev() {
        deriv = deriv * z + value;
        value = value * z + c;
    }
    (value, deriv)
}

/// All complex roots of a real polynomial (ascending coefficients) by the
/// Aberth-Ehrlich iteration followed by a Newton polish.
fn polynomial_roots(p: &[f64]) -> Result<Vec<Complex64>> {
    let degree = p.len() - 1;
    if degree == 0 {
        return Ok(Vec::new());
    }
    let lead = p[degree];
    // Cauchy bound for the initial circle.
    let radius = 1.0
        + p[..degree]
            .iter()
            .map(|c| (c / lead).abs())
            .fold(0.0, f64::max);
    let mut roots: Vec<Complex64> = (0..degree)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / degree as f64 + 0.4;
            Complex64::from_polar(radius * 0.5, angle)
        })
        .collect();

    for _ in 0..500 {
        let mut max_step: f64 = 0.0;
        for i in 0..degree {
            let (v, dv) = eval(p, roots[i]);
            if v.norm() == 0.0 {
                continue;
            }
            let ratio = v / dv;
            let repulsion: Complex64 = (0..degree)
                .filter(|&k| k != i)
                .map(|k| (roots[i] - roots[k]).inv())
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            roots[i] -= step;
            max_step = max_step.max(step.norm() / roots[i].norm().max(1.0));
        }
        if max_step < 1e-15 {
            break;
        }
    }

    for root in &mut roots {
        for _ in 0..3 {
            let (v, dv) = eval(p, *root);
            if dv.norm() == 0.0 {
                break;
            }
            *root -= v / dv;
        }
        if !root.re.is_finite() || !root.im.is_finite() {
            return Err(Error::Numerical("polynomial root finding diverged".into()));
        }
    }
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db2_matches_closed_form() {
        let h = daubechies_lowpass(2).unwrap();
        let s3 = 3f64.sqrt();
        let d = 4.0 * std::f64::consts::SQRT_2;
        let expected = [
            (1.0 + s3) / d,
            (3.0 + s3) / d,
            (3.0 - s3) / d,
            (1.0 - s3) / d,
        ];
        for (a, b) in h.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn haar_is_the_unit_average() {
        let h = daubechies_lowpass(1).unwrap();
        assert_eq!(h.len(), 2);
        for c in h {
            assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        }
    }

    #[test]
    fn orthonormal_up_to_db10() {
        for m in 1..=10 {
            let h = daubechies_lowpass(m).unwrap();
            assert_eq!(h.len(), 2 * m);
            for shift in 0..m {
                let dot: f64 = (0..h.len() - 2 * shift)
                    .map(|k| h[k] * h[k + 2 * shift])
                    .sum();
                let target = if shift == 0 { 1.0 } else { 0.0 };
                assert!((dot - target).abs() < 1e-10, "db{m} shift {shift}: {dot}");
            }
        }
    }

    #[test]
    fn roots_of_known_quadratic() {
        // (y - 1)(y - 2) = 2 - 3y + y^2
        let mut r = polynomial_roots(&[2.0, -3.0, 1.0]).unwrap();
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((r[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((r[1] - Complex64::new(2.0, 0.0)).norm() < 1e-12);
    }
}
