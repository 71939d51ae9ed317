//! Quadrature rules for periodic integrands on the uniform grid `t_m = 2 pi m / n`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Weights `R_l` such that `int_0^{2pi} ln(4 sin^2((t_i - s)/2)) f(s) ds ~ sum_j R_{(i-j) mod n} f(t_j)`.
///
/// Exact on trigonometric polynomials of degree `< n/2`.
pub fn log_weights(n: usize) -> Vec<f64> {
    let half = n / 2;
    let nf = n as f64;
    (0..n)
        .map(|l| {
            let d = 2.0 * PI * l as f64 / nf;
            let sum: f64 = (1..half).map(|k| (k as f64 * d).cos() / k as f64).sum();
            -4.0 * PI / nf * sum - 4.0 * PI / (nf * nf) * (half as f64 * d).cos()
        })
        .collect()
}

/// Weights `H_l` such that `(1/2pi) p.v. int cot((s - t_i)/2) f(s) ds ~ sum_j H_{(j-i) mod n} f(t_j)`.
///
/// Maps `sin(ks)` to `cos(kt)` and `cos(ks)` to `-sin(kt)` for `0 < k < n/2`.
pub fn conjugate_weights(n: usize) -> Vec<f64> {
    let half = n / 2;
    let nf = n as f64;
    (0..n)
        .map(|l| {
            let d = 2.0 * PI * l as f64 / nf;
            2.0 / nf * (1..half).map(|q| (q as f64 * d).sin()).sum::<f64>()
        })
        .collect()
}

/// Gauss-Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..(n + 1) / 2 {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    (
        nodes.iter().map(|x| mid + half * x).collect(),
        weights.iter().map(|w| w * half).collect(),
    )
}

/// Normalized Fourier coefficients `(1/n) sum_m f(t_m) e^{-i k t_m}` in FFT order.
pub fn fourier_coefficients(values: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

/// Signed wavenumber of FFT bin `idx` for length `n`, in `[-n/2, n/2)`.
pub fn wavenumber(idx: usize, n: usize) -> i64 {
    if idx < n / 2 {
        idx as i64
    } else {
        idx as i64 - n as i64
    }
}

/// Trigonometric interpolation of `n` equispaced samples onto `m >= n` equispaced samples.
pub fn trig_resample(values: &[f64], m: usize) -> Vec<f64> {
    let n = values.len();
    assert!(m >= n && n % 2 == 0, "resample needs even n <= m");
    if m == n {
        return values.to_vec();
    }
    let coeffs = fourier_coefficients(values);
    let mut spec = vec![Complex64::new(0.0, 0.0); m];
    let half = n / 2;
    for (idx, c) in coeffs.iter().enumerate() {
        if idx < half {
            spec[idx] = *c;
        } else if idx == half {
            spec[half] += *c * 0.5;
            spec[m - half] += *c * 0.5;
        } else {
            spec[m - (n - idx)] = *c;
        }
    }
    FftPlanner::new().plan_fft_inverse(m).process(&mut spec);
    spec.iter().map(|c| c.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn nodes(n: usize) -> Vec<f64> {
        (0..n).map(|m| 2.0 * PI * m as f64 / n as f64).collect()
    }

    #[test]
    fn log_weights_on_fourier_modes() {
        // int ln(4 sin^2((t-s)/2)) cos(ks) ds = -2pi cos(kt)/|k|, and 0 for k = 0.
        let n = 32;
        let w = log_weights(n);
        let t = nodes(n);
        for k in 0..n / 2 {
            for i in [0usize, 5, 17] {
                let q: f64 = (0..n).map(|j| w[(i + n - j) % n] * (k as f64 * t[j]).cos()).sum();
                let exact = if k == 0 { 0.0 } else { -2.0 * PI * (k as f64 * t[i]).cos() / k as f64 };
                assert_relative_eq!(q, exact, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn log_weights_on_smooth_function() {
        // f = e^{cos s}; reference by brute-force midpoint sums away from the singularity is
        // too slow to converge, so compare against a finer grid instead.
        let f = |s: f64| s.cos().exp();
        let apply = |n: usize| -> f64 {
            let w = log_weights(n);
            let t = nodes(n);
            (0..n).map(|j| w[(n - j) % n] * f(t[j])).sum()
        };
        assert!((apply(32) - apply(128)).abs() < 1e-13);
    }

    #[test]
    fn conjugate_weights_on_fourier_modes() {
        let n = 32;
        let w = conjugate_weights(n);
        let t = nodes(n);
        for k in 1..n / 2 {
            for i in [0usize, 3, 20] {
                let s: f64 = (0..n).map(|j| w[(j + n - i) % n] * (k as f64 * t[j]).sin()).sum();
                let c: f64 = (0..n).map(|j| w[(j + n - i) % n] * (k as f64 * t[j]).cos()).sum();
                assert_relative_eq!(s, (k as f64 * t[i]).cos(), epsilon = 1e-13);
                assert_relative_eq!(c, -(k as f64 * t[i]).sin(), epsilon = 1e-13);
            }
        }
        assert_eq!(w[0], 0.0);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10, -1.0, 2.0);
        for deg in 0..20 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let exact = (2f64.powi(deg + 1) - (-1f64).powi(deg + 1)) / (deg + 1) as f64;
            assert_relative_eq!(q, exact, max_relative = 1e-13);
        }
        let (x, w) = gauss_legendre(64, 0.0, 1.0);
        assert_relative_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn resample_is_exact_for_band_limited_data() {
        let n = 16;
        let f = |t: f64| 0.3 + t.cos() - 2.0 * (3.0 * t).sin() + 0.5 * (7.0 * t).cos();
        let v: Vec<f64> = nodes(n).into_iter().map(f).collect();
        let up = trig_resample(&v, 64);
        for (t, u) in nodes(64).into_iter().zip(up) {
            assert_relative_eq!(u, f(t), epsilon = 1e-13);
        }
        // Restriction of the refined samples returns the original samples.
        let back: Vec<f64> = trig_resample(&v, 64).into_iter().step_by(4).collect();
        for (a, b) in back.iter().zip(&v) {
            assert_relative_eq!(a, b, epsilon = 1e-13);
        }
    }
}
