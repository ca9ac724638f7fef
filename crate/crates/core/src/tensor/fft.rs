//! Complex FFT: iterative radix-2 for power-of-two lengths, Bluestein's
//! chirp-z reduction for everything else.

use crate::error::{Error, Result};
pub use num_complex::Complex64 as Complex;
use std::f64::consts::PI;

/// In-place forward DFT, `X_k = Σ x_t e^{-2πikt/n}`. Any length ≥ 1.
pub fn fft_inplace(buf: &mut [Complex]) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    if n.is_power_of_two() {
        radix2(buf, false);
    } else {
        bluestein(buf);
    }
}

fn radix2(buf: &mut [Complex], inverse: bool) {
    let n = buf.len();
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * PI / len as f64;
        let half = len / 2;
        // Twiddles computed directly per index; repeated multiplication drifts.
        let tw: Vec<Complex> = (0..half).map(|k| Complex::from_polar(1.0, ang * k as f64)).collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let u = buf[start + k];
                let v = buf[start + k + half] * tw[k];
                buf[start + k] = u + v;
                buf[start + k + half] = u - v;
            }
        }
        len <<= 1;
    }
}

fn bluestein(buf: &mut [Complex]) {
    let n = buf.len();
    let m = (2 * n - 1).next_power_of_two();
    // chirp w_k = e^{-iπk²/n}; k² reduced mod 2n keeps the angle exact.
    let chirp: Vec<Complex> = (0..n)
        .map(|k| {
            let k2 = (k as u128 * k as u128 % (2 * n as u128)) as f64;
            Complex::from_polar(1.0, -PI * k2 / n as f64)
        })
        .collect();
    let mut a = vec![Complex::new(0.0, 0.0); m];
    for k in 0..n {
        a[k] = buf[k] * chirp[k];
    }
    let mut b = vec![Complex::new(0.0, 0.0); m];
    b[0] = chirp[0].conj();
    for k in 1..n {
        b[k] = chirp[k].conj();
        b[m - k] = chirp[k].conj();
    }
    radix2(&mut a, false);
    radix2(&mut b, false);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    radix2(&mut a, true);
    let scale = 1.0 / m as f64;
    for k in 0..n {
        buf[k] = a[k] * scale * chirp[k];
    }
}

/// Full complex spectrum of a real signal.
pub(crate) fn real_spectrum(x: &[f64]) -> Vec<Complex> {
    let mut buf: Vec<Complex> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft_inplace(&mut buf);
    buf
}

/// Magnitudes `|X_k|` for `k = 0..=n/2` of the real-input DFT.
pub fn rfft_magnitudes(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::Input(format!("rfft needs at least 2 samples, got {}", x.len())));
    }
    let spec = real_spectrum(x);
    Ok(spec[..=x.len() / 2].iter().map(|c| c.norm()).collect())
}

/// Direct O(n²) DFT, kept as an independent reference.
pub fn dft_naive(x: &[Complex]) -> Vec<Complex> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, &v)| {
                    let ang = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
                    v * Complex::from_polar(1.0, ang)
                })
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_err(a: &[Complex], b: &[Complex]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn matches_naive_dft_for_all_small_lengths() {
        for n in 1..=70 {
            let x: Vec<Complex> =
                (0..n).map(|i| Complex::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos())).collect();
            let mut f = x.clone();
            fft_inplace(&mut f);
            assert!(max_err(&f, &dft_naive(&x)) < 1e-9, "n={n}");
        }
    }

    #[test]
    fn constant_series_is_pure_dc() {
        let m = rfft_magnitudes(&[3.0; 10]).unwrap();
        assert!((m[0] - 30.0).abs() < 1e-12);
        assert!(m[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn too_short_is_input_error() {
        assert!(matches!(rfft_magnitudes(&[1.0]), Err(Error::Input(_))));
    }
}
