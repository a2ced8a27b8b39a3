//! Closed-form construction of the Daubechies and Cohen low-pass filters by
//! spectral factorization of the halfband polynomial
//! `P_p(y) = sum_{k<p} C(p-1+k, k) y^k`, where `y = sin^2(w/2)`.
//!
//! The printed tables carry 8 to 12 decimals, which is not enough for the
//! 1e-12 filter-bank identities, so the registry builds the filters here and
//! the tests pin them against the printed values.

use num_complex::Complex64;
use std::f64::consts::SQRT_2;

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn eval(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    // Horner for value and derivative, coefficients in ascending powers.
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// Coefficients of `P_p(y)` in ascending powers of `y`.
pub fn halfband_poly(p: usize) -> Vec<f64> {
    (0..p as u64).map(|k| binomial(p as u64 - 1 + k, k)).collect()
}

/// Roots of `P_p`, sorted by ascending real part with conjugates adjacent
/// (negative imaginary part first).
pub fn halfband_roots(p: usize) -> Vec<Complex64> {
    let coeffs = halfband_poly(p);
    let degree = coeffs.len() - 1;
    if degree == 0 {
        return Vec::new();
    }
    let lead = coeffs[degree];
    let monic: Vec<f64> = coeffs.iter().map(|c| c / lead).collect();

    // Durand-Kerner, then Newton polish on the original polynomial.
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..degree).map(|k| seed.powu(k as u32)).collect();
    for _ in 0..1000 {
        let mut delta = 0.0f64;
        for i in 0..degree {
            let (num, _) = eval(&monic, roots[i]);
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..degree {
                if i != j {
                    den *= roots[i] - roots[j];
                }
            }
            let step = num / den;
            roots[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 {
            break;
        }
    }
    for r in roots.iter_mut() {
        for _ in 0..4 {
            let (v, dv) = eval(&coeffs, *r);
            if dv.norm() == 0.0 {
                break;
            }
            *r -= v / dv;
        }
        if r.im.abs() < 1e-12 {
            r.im = 0.0;
        }
    }
    roots.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
    // Sorting by real part separates a conjugate pair only if another root
    // shares its real part, which does not happen for p <= 6.
    roots
}

fn zeros_at_pi(count: usize) -> Vec<Complex64> {
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for _ in 0..count {
        poly = convolve(&poly, &[Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]);
    }
    poly
}

fn normalize_dc(poly: &[Complex64]) -> Vec<f64> {
    let real: Vec<f64> = poly.iter().map(|c| c.re).collect();
    let sum: f64 = real.iter().sum();
    real.iter().map(|c| c * SQRT_2 / sum).collect()
}

/// Minimum-phase Daubechies low-pass filter of order `p` (length `2p`),
/// normalized to sum `sqrt(2)`.
pub fn daubechies(p: usize) -> Vec<f64> {
    assert!(p >= 1, "Daubechies order starts at 1");
    let mut poly = zeros_at_pi(p);
    for y in halfband_roots(p) {
        // y = (2 - z - 1/z) / 4  =>  z^2 - 2(1 - 2y) z + 1 = 0
        let c = Complex64::new(1.0, 0.0) - 2.0 * y;
        let disc = (c * c - 1.0).sqrt();
        let (r1, r2) = (c + disc, c - disc);
        let inner = if r1.norm() < 1.0 { r1 } else { r2 };
        poly = convolve(&poly, &[Complex64::new(1.0, 0.0), -inner]);
    }
    normalize_dc(&poly)
}

/// Symmetric Cohen (CDF) pair of orders `(p, p)`.
///
/// The `2p` zeros at `z = -1` and the `p - 1` roots of `P_p` are split
/// between the two filters: the primal filter takes `primal_zeros` zeros
/// and the first `primal_roots` roots in [`halfband_roots`] order, the dual
/// takes the rest. Each filter is returned unpadded, with sum `sqrt(2)`.
pub fn cohen_pair(p: usize, primal_zeros: usize, primal_roots: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(primal_zeros <= 2 * p, "only 2p zeros at pi are available");
    let roots = halfband_roots(p);
    let build = |zeros: usize, ys: &[Complex64]| {
        let mut poly = zeros_at_pi(zeros);
        for &y in ys {
            let quad = [Complex64::new(1.0, 0.0), -(Complex64::new(2.0, 0.0) - 4.0 * y), Complex64::new(1.0, 0.0)];
            poly = convolve(&poly, &quad);
        }
        normalize_dc(&poly)
    };
    let primal = build(primal_zeros, &roots[..primal_roots]);
    let dual = build(2 * p - primal_zeros, &roots[primal_roots..]);
    (primal, dual)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halfband_roots_are_roots() {
        for p in 2..=6 {
            let coeffs = halfband_poly(p);
            let roots = halfband_roots(p);
            assert_eq!(roots.len(), p - 1);
            for r in roots {
                let (v, _) = eval(&coeffs, r);
                assert!(v.norm() < 1e-10, "p={p} residual {}", v.norm());
            }
        }
    }

    #[test]
    fn db2_closed_form() {
        let s3 = 3f64.sqrt();
        let f = 1.0 / (4.0 * SQRT_2);
        let want = [(1.0 + s3) * f, (3.0 + s3) * f, (3.0 - s3) * f, (1.0 - s3) * f];
        for (a, b) in daubechies(2).iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn cohen_2_2_is_the_5_3_spline_pair() {
        let (l, d) = cohen_pair(2, 2, 0);
        let want_l = [0.25, 0.5, 0.25].map(|v| v * SQRT_2);
        let want_d = [-0.125, 0.25, 0.75, 0.25, -0.125].map(|v| v * SQRT_2);
        assert_eq!(l.len(), 3);
        assert_eq!(d.len(), 5);
        for (a, b) in l.iter().zip(want_l) {
            assert!((a - b).abs() < 1e-15);
        }
        for (a, b) in d.iter().zip(want_d) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
