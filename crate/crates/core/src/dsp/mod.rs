//! Signal-processing kernels shared by the DEMON pipeline and the synthesizer.

mod fft;
mod fir;
mod window;

pub use fft::{dft_naive, fft};
pub use fir::{design_fir, filter_apply, FirFilter, FirKind};
pub use window::{apply_window, hann, WindowKind};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One-sided power spectrum with its bin spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub magnitudes: Vec<f64>,
    pub bin_hz: f64,
}

impl PowerSpectrum {
    pub fn n_bins(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn freq_of(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_hz
    }
}

/// Square-law demodulator, `y[n] = x[n]²`.
pub fn square_law_envelope(signal: &[f64]) -> Vec<f64> {
    signal.iter().map(|x| x * x).collect()
}

/// Anti-alias filter length used by [`decimate`] for a given factor.
pub fn decimation_taps(factor: usize) -> usize {
    20 * factor + 1
}

/// Lowpass at 0.45 of the output rate, then keep every `factor`-th sample.
///
/// Only the retained outputs of the filter are evaluated; the result is
/// identical to filtering the whole signal and then discarding samples.
pub fn decimate(signal: &[f64], sample_rate_hz: f64, factor: usize) -> Result<(Vec<f64>, f64)> {
    if factor < 1 {
        return Err(Error::contract("decimation factor must be at least 1"));
    }
    if factor == 1 {
        return Ok((signal.to_vec(), sample_rate_hz));
    }
    let new_rate = sample_rate_hz / factor as f64;
    let filter = design_fir(
        FirKind::Lowpass {
            cutoff_hz: 0.45 * new_rate,
        },
        sample_rate_hz,
        decimation_taps(factor),
    )?;
    let out = (0..signal.len())
        .step_by(factor)
        .map(|n| filter.output_at(signal, n))
        .collect();
    Ok((out, new_rate))
}

/// Welch-averaged one-sided power spectrum.
///
/// Each frame contributes `|FFT(w·x)|² / (frame_len·Σw²)`; frames start every
/// `round(frame_len·(1 − overlap_frac))` samples and trailing partial frames
/// are dropped.
pub fn welch_spectrum(
    signal: &[f64],
    sample_rate_hz: f64,
    frame_len: usize,
    overlap_frac: f64,
    window_kind: WindowKind,
) -> Result<PowerSpectrum> {
    if frame_len == 0 || !frame_len.is_power_of_two() {
        return Err(Error::contract(format!(
            "Welch frame length must be a power of two, got {frame_len}"
        )));
    }
    if !(0.0..1.0).contains(&overlap_frac) {
        return Err(Error::contract(format!(
            "overlap fraction {overlap_frac} outside [0, 1)"
        )));
    }
    if signal.len() < frame_len {
        return Err(Error::contract(format!(
            "signal of {} samples is shorter than one {frame_len}-sample frame",
            signal.len()
        )));
    }
    let hop = ((frame_len as f64 * (1.0 - overlap_frac)).round() as usize).max(1);
    let window = window_kind.coefficients(frame_len);
    let energy: f64 = window.iter().map(|w| w * w).sum();
    let scale = 1.0 / (frame_len as f64 * energy);
    let n_bins = frame_len / 2 + 1;

    let mut acc = vec![0.0; n_bins];
    let mut frames = 0usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); frame_len];
    let mut start = 0;
    while start + frame_len <= signal.len() {
        for ((b, &x), &w) in buf.iter_mut().zip(&signal[start..start + frame_len]).zip(&window) {
            *b = Complex64::new(x * w, 0.0);
        }
        fft::fft_in_place(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf[..n_bins]) {
            *a += c.norm_sqr() * scale;
        }
        frames += 1;
        start += hop;
    }
    let inv = 1.0 / frames as f64;
    for a in &mut acc {
        *a *= inv;
    }
    Ok(PowerSpectrum {
        magnitudes: acc,
        bin_hz: sample_rate_hz / frame_len as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    use rand_xoshiro::Xoshiro256PlusPlus;
    use std::f64::consts::PI;

    fn peak_bin(p: &PowerSpectrum) -> usize {
        p.magnitudes
            .iter()
            .enumerate()
            .skip(1)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0
    }

    #[test]
    fn square_law() {
        assert_eq!(square_law_envelope(&[-1.0, 0.0, 2.0]), vec![1.0, 0.0, 4.0]);
    }

    #[test]
    fn pure_carrier_envelope_lines_at_dc_and_twice_carrier() {
        let fs = 1024.0;
        let fc = 64.0;
        let x: Vec<f64> = (0..4096).map(|n| (2.0 * PI * fc * n as f64 / fs).cos()).collect();
        let env = square_law_envelope(&x);
        let p = welch_spectrum(&env, fs, 1024, 0.0, WindowKind::Rectangular).unwrap();
        let total: f64 = p.magnitudes.iter().sum();
        let lines = p.magnitudes[0] + p.magnitudes[128];
        assert!(lines / total > 1.0 - 1e-12);
    }

    #[test]
    fn am_envelope_peaks_at_modulation_rate() {
        let fs = 2000.0;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(5);
        let carrier = design_fir(FirKind::Bandpass { lo_hz: 300.0, hi_hz: 700.0 }, fs, 101).unwrap();
        let noise: Vec<f64> = (0..40_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let band = filter_apply(&carrier, &noise).unwrap();
        let x: Vec<f64> = band
            .iter()
            .enumerate()
            .map(|(n, w)| (1.0 + 0.5 * (2.0 * PI * 10.0 * n as f64 / fs).cos()) * w)
            .collect();
        let env = square_law_envelope(&x);
        let (mut low, rate) = decimate(&env, fs, 10).unwrap();
        let mean = low.iter().sum::<f64>() / low.len() as f64;
        low.iter_mut().for_each(|v| *v -= mean);
        let p = welch_spectrum(&low, rate, 512, 0.5, WindowKind::Hann).unwrap();
        let f = p.freq_of(peak_bin(&p));
        assert!((f - 10.0).abs() <= p.bin_hz, "peak at {f}");
    }

    #[test]
    fn decimate_identity_and_constant() {
        let x: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(decimate(&x, 1000.0, 1).unwrap(), (x, 1000.0));

        let (y, rate) = decimate(&vec![2.0; 4000], 1000.0, 4).unwrap();
        assert_eq!(rate, 250.0);
        assert_eq!(y.len(), 1000);
        let edge = decimation_taps(4) / 4;
        for v in &y[edge..y.len() - edge] {
            assert!((v - 2.0).abs() < 0.02);
        }
        assert!(matches!(decimate(&[1.0], 1.0, 0), Err(Error::Contract(_))));
    }

    #[test]
    fn decimate_matches_filter_then_subsample() {
        let x: Vec<f64> = (0..997).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let (y, _) = decimate(&x, 800.0, 3).unwrap();
        let filt = design_fir(FirKind::Lowpass { cutoff_hz: 0.45 * (800.0 / 3.0) }, 800.0, decimation_taps(3)).unwrap();
        let full = filter_apply(&filt, &x).unwrap();
        let kept: Vec<f64> = full.into_iter().step_by(3).collect();
        assert_eq!(y, kept);
    }

    #[test]
    fn decimated_tone_keeps_frequency() {
        let fs = 1000.0;
        let x: Vec<f64> = (0..20_000).map(|n| (2.0 * PI * 5.0 * n as f64 / fs).sin()).collect();
        let before = welch_spectrum(&x, fs, 16384, 0.0, WindowKind::Hann).unwrap();
        let (y, rate) = decimate(&x, fs, 10).unwrap();
        assert_eq!(rate, 100.0);
        let after = welch_spectrum(&y, rate, 1024, 0.5, WindowKind::Hann).unwrap();
        let f_before = before.freq_of(peak_bin(&before));
        let f_after = after.freq_of(peak_bin(&after));
        assert!((f_before - 5.0).abs() <= before.bin_hz);
        assert!((f_after - 5.0).abs() <= after.bin_hz);
    }

    #[test]
    fn welch_zero_signal() {
        let p = welch_spectrum(&[0.0; 256], 10.0, 64, 0.5, WindowKind::Hann).unwrap();
        assert_eq!(p.n_bins(), 33);
        assert!(p.magnitudes.iter().all(|&m| m == 0.0));
        assert_eq!(p.bin_hz, 10.0 / 64.0);
    }

    #[test]
    fn welch_bin_centered_tone_dominates() {
        let n = 256;
        let x: Vec<f64> = (0..4 * n)
            .map(|t| (2.0 * PI * 20.0 * t as f64 / n as f64).cos())
            .collect();
        let p = welch_spectrum(&x, n as f64, n, 0.5, WindowKind::Rectangular).unwrap();
        let peak = p.magnitudes[20];
        for (k, &m) in p.magnitudes.iter().enumerate() {
            if k != 20 {
                assert!(10.0 * (peak / m.max(1e-300)).log10() >= 20.0, "bin {k}");
            }
        }
        // with a Hann window the main lobe spans ±1 bin; everything beyond is far down
        let h = welch_spectrum(&x, n as f64, n, 0.5, WindowKind::Hann).unwrap();
        for (k, &m) in h.magnitudes.iter().enumerate() {
            if !(19..=21).contains(&k) {
                assert!(10.0 * (h.magnitudes[20] / m.max(1e-300)).log10() >= 20.0, "bin {k}");
            }
        }
    }

    #[test]
    fn welch_averaging_reduces_variance() {
        let frame = 128;
        let seeds = 100;
        let n_bins = frame / 2 + 1;
        let mut welch_vals = vec![Vec::new(); n_bins];
        let mut single_vals = vec![Vec::new(); n_bins];
        for seed in 0..seeds {
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
            let x: Vec<f64> = (0..8 * frame).map(|_| StandardNormal.sample(&mut rng)).collect();
            let w = welch_spectrum(&x, 1.0, frame, 0.0, WindowKind::Hann).unwrap();
            let s = welch_spectrum(&x[..frame], 1.0, frame, 0.0, WindowKind::Hann).unwrap();
            for k in 0..n_bins {
                welch_vals[k].push(w.magnitudes[k]);
                single_vals[k].push(s.magnitudes[k]);
            }
        }
        let var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
        };
        // interior bins only: DC and Nyquist follow a different distribution
        let ratio_sum: f64 = (2..n_bins - 2)
            .map(|k| var(&single_vals[k]) / var(&welch_vals[k]))
            .sum();
        let ratio = ratio_sum / (n_bins - 4) as f64;
        assert!((4.0..=12.0).contains(&ratio), "variance ratio {ratio}");
    }

    #[test]
    fn welch_preconditions() {
        assert!(welch_spectrum(&[0.0; 10], 1.0, 16, 0.0, WindowKind::Hann).is_err());
        assert!(welch_spectrum(&[0.0; 32], 1.0, 12, 0.0, WindowKind::Hann).is_err());
        assert!(welch_spectrum(&[0.0; 32], 1.0, 16, 1.0, WindowKind::Hann).is_err());
    }
}
