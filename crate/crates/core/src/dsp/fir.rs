//! Hann-windowed sinc FIR design and zero-padded, delay-compensated filtering.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::window::hann;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FirKind {
    Lowpass { cutoff_hz: f64 },
    Bandpass { lo_hz: f64, hi_hz: f64 },
}

/// Linear-phase FIR filter with an odd number of symmetric taps.
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    taps: Vec<f64>,
    kind: FirKind,
    sample_rate_hz: f64,
}

impl FirFilter {
    /// Wraps raw taps. The tap count must be odd so the filter has an integer
    /// group delay; symmetry is not required here.
    pub fn from_taps(taps: Vec<f64>, kind: FirKind, sample_rate_hz: f64) -> Result<Self> {
        if taps.len().is_multiple_of(2) {
            return Err(Error::contract(format!(
                "FIR tap count must be odd, got {}",
                taps.len()
            )));
        }
        Ok(Self {
            taps,
            kind,
            sample_rate_hz,
        })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn kind(&self) -> FirKind {
        self.kind
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    /// Complex frequency response at `freq_hz`, referenced to the center tap.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let center = (self.taps.len() / 2) as f64;
        let omega = 2.0 * PI * freq_hz / self.sample_rate_hz;
        self.taps
            .iter()
            .enumerate()
            .map(|(n, &h)| Complex64::from_polar(h, -omega * (n as f64 - center)))
            .sum()
    }

    /// Output sample `n` of the centered convolution, zero outside the signal.
    #[inline]
    pub(crate) fn output_at(&self, signal: &[f64], n: usize) -> f64 {
        let half = self.taps.len() / 2;
        // y[n] = Σ_k h[k]·x[n + half − k]
        let lo_k = (n + half + 1).saturating_sub(signal.len());
        let hi_k = (n + half).min(self.taps.len() - 1);
        let mut acc = 0.0;
        for k in lo_k..=hi_k {
            acc += self.taps[k] * signal[n + half - k];
        }
        acc
    }
}

/// Ideal lowpass impulse response `2fc·sinc(2fc·m)` for normalized cutoff `fc`.
fn ideal_lowpass(cutoff_norm: f64, m: f64) -> f64 {
    if m == 0.0 {
        2.0 * cutoff_norm
    } else {
        (2.0 * PI * cutoff_norm * m).sin() / (PI * m)
    }
}

pub fn design_fir(kind: FirKind, sample_rate_hz: f64, n_taps: usize) -> Result<FirFilter> {
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(Error::contract("sample rate must be positive"));
    }
    if n_taps < 11 || n_taps.is_multiple_of(2) {
        return Err(Error::contract(format!(
            "FIR tap count must be odd and at least 11, got {n_taps}"
        )));
    }
    let nyquist = sample_rate_hz / 2.0;
    match kind {
        FirKind::Lowpass { cutoff_hz } if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) => {
            return Err(Error::contract(format!(
                "lowpass cutoff {cutoff_hz} Hz outside (0, {nyquist})"
            )));
        }
        FirKind::Bandpass { lo_hz, hi_hz } if !(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < nyquist) => {
            return Err(Error::contract(format!(
                "bandpass edges [{lo_hz}, {hi_hz}] Hz must satisfy 0 < lo < hi < {nyquist}"
            )));
        }
        _ => {}
    }

    let center = (n_taps / 2) as f64;
    let window = hann(n_taps);
    let mut taps: Vec<f64> = (0..n_taps)
        .map(|n| {
            let m = n as f64 - center;
            let ideal = match kind {
                FirKind::Lowpass { cutoff_hz } => ideal_lowpass(cutoff_hz / sample_rate_hz, m),
                FirKind::Bandpass { lo_hz, hi_hz } => {
                    ideal_lowpass(hi_hz / sample_rate_hz, m) - ideal_lowpass(lo_hz / sample_rate_hz, m)
                }
            };
            ideal * window[n]
        })
        .collect();

    // unity gain at DC (lowpass) or at the band center (bandpass)
    let mut filter = FirFilter {
        taps: Vec::new(),
        kind,
        sample_rate_hz,
    };
    let reference_hz = match kind {
        FirKind::Lowpass { .. } => 0.0,
        FirKind::Bandpass { lo_hz, hi_hz } => 0.5 * (lo_hz + hi_hz),
    };
    filter.taps = taps.clone();
    let gain = filter.response(reference_hz).norm();
    if gain > 0.0 {
        for t in &mut taps {
            *t /= gain;
        }
    }
    // exact symmetry regardless of rounding in sin()
    for i in 0..n_taps / 2 {
        let avg = 0.5 * (taps[i] + taps[n_taps - 1 - i]);
        taps[i] = avg;
        taps[n_taps - 1 - i] = avg;
    }
    filter.taps = taps;
    Ok(filter)
}

/// Same-length convolution aligned on the center tap, zero-padded at both edges.
pub fn filter_apply(filter: &FirFilter, signal: &[f64]) -> Result<Vec<f64>> {
    if signal.len() < filter.taps.len() {
        return Err(Error::contract(format!(
            "signal of {} samples is shorter than the {}-tap filter",
            signal.len(),
            filter.taps.len()
        )));
    }
    Ok((0..signal.len()).map(|n| filter.output_at(signal, n)).collect())
}
