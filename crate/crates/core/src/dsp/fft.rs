use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

fn check_finite(signal: &[f64]) -> Result<()> {
    match signal.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::Validation(format!("sample {i} is not finite"))),
        None => Ok(()),
    }
}

/// Direct O(N²) evaluation of `X[k] = Σ x[n]·exp(-2πi·kn/N)`.
pub fn dft_naive(signal: &[f64]) -> Result<Vec<Complex64>> {
    if signal.is_empty() {
        return Err(Error::contract("DFT of an empty signal"));
    }
    check_finite(signal)?;
    let n = signal.len();
    Ok((0..n)
        .map(|k| {
            signal
                .iter()
                .enumerate()
                .map(|(t, &x)| {
                    // reduce k·t mod N first so the angle stays accurate
                    let phase = -2.0 * PI * ((k * t) % n) as f64 / n as f64;
                    Complex64::from_polar(x, phase)
                })
                .sum()
        })
        .collect())
}

/// Radix-2 decimation-in-time FFT of a real signal whose length is a power of two.
pub fn fft(signal: &[f64]) -> Result<Vec<Complex64>> {
    let n = signal.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::contract(format!(
            "fft length must be a power of two, got {n}"
        )));
    }
    check_finite(signal)?;
    let mut buf: Vec<Complex64> = signal.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_in_place(&mut buf);
    Ok(buf)
}

pub(crate) fn fft_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    if n == 1 {
        return;
    }

    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            buf.swap(i, j);
        }
    }

    let twiddles: Vec<Complex64> = (0..n / 2)
        .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64))
        .collect();

    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let stride = n / len;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let w = twiddles[k * stride];
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}
