//! DEMON (detection of envelope modulation on noise) analysis.
//!
//! The pipeline band-limits the recording to the cavitation carrier band,
//! square-law demodulates it, decimates the envelope to a low rate, removes the
//! envelope mean and estimates a Welch-averaged line spectrum. The spectrum is
//! peak-normalized so that line features are comparable across recordings of
//! different level. A [`DemonGram`] stacks such spectra over consecutive slices.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio_io::SampleBuffer;
use crate::dsp::{self, FirKind, WindowKind};
use crate::error::{Error, Result};
use crate::pgm;

/// Carrier band, either absolute or as fractions of the input sample rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CarrierBand {
    Hz { lo: f64, hi: f64 },
    Fraction { lo: f64, hi: f64 },
}

impl CarrierBand {
    pub fn resolve(self, sample_rate_hz: f64) -> (f64, f64) {
        match self {
            CarrierBand::Hz { lo, hi } => (lo, hi),
            CarrierBand::Fraction { lo, hi } => (lo * sample_rate_hz, hi * sample_rate_hz),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemonConfig {
    pub carrier: CarrierBand,
    /// Taps of the carrier bandpass filter.
    pub carrier_taps: usize,
    pub envelope_rate_hz: f64,
    pub frame_len: usize,
    pub overlap_frac: f64,
    pub max_line_hz: f64,
}

impl Default for DemonConfig {
    fn default() -> Self {
        Self {
            carrier: CarrierBand::Fraction { lo: 0.1, hi: 0.45 },
            carrier_taps: 129,
            envelope_rate_hz: 200.0,
            frame_len: 1024,
            overlap_frac: 0.5,
            max_line_hz: 100.0,
        }
    }
}

impl DemonConfig {
    /// Checks the configuration against an input rate and returns the
    /// decimation factor.
    pub fn validate(&self, sample_rate_hz: f64) -> Result<usize> {
        let (lo, hi) = self.carrier.resolve(sample_rate_hz);
        let nyquist = sample_rate_hz / 2.0;
        if !(lo > 0.0 && lo < hi && hi < nyquist) {
            return Err(Error::contract(format!(
                "carrier band [{lo}, {hi}] Hz must satisfy 0 < lo < hi < {nyquist}"
            )));
        }
        if !(self.envelope_rate_hz > 0.0) {
            return Err(Error::contract("envelope rate must be positive"));
        }
        if self.frame_len < 2 || !self.frame_len.is_power_of_two() {
            return Err(Error::contract(format!(
                "envelope frame length must be a power of two, got {}",
                self.frame_len
            )));
        }
        if !(0.0..1.0).contains(&self.overlap_frac) {
            return Err(Error::contract(format!(
                "overlap fraction {} outside [0, 1)",
                self.overlap_frac
            )));
        }
        if !(self.max_line_hz > 0.0 && self.max_line_hz <= self.envelope_rate_hz / 2.0) {
            return Err(Error::contract(format!(
                "max line frequency {} Hz must lie in (0, {}]",
                self.max_line_hz,
                self.envelope_rate_hz / 2.0
            )));
        }
        let factor = (sample_rate_hz / self.envelope_rate_hz + 1e-9).floor() as usize;
        if factor < 1 {
            return Err(Error::contract(format!(
                "input rate {sample_rate_hz} Hz is below the envelope rate {} Hz",
                self.envelope_rate_hz
            )));
        }
        Ok(factor)
    }

    /// Fewest input samples that still yield one full envelope frame.
    pub fn min_samples(&self, sample_rate_hz: f64) -> Result<usize> {
        let factor = self.validate(sample_rate_hz)?;
        Ok(((self.frame_len - 1) * factor + 1).max(self.carrier_taps))
    }

    /// Envelope-frame duration in seconds at the configured envelope rate.
    pub fn frame_duration_s(&self) -> f64 {
        self.frame_len as f64 / self.envelope_rate_hz
    }
}

/// Peak-normalized envelope line spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct DemonSpectrum {
    pub magnitudes: Vec<f64>,
    pub bin_hz: f64,
    pub source_duration_s: f64,
    /// Upper edge of the band that line features are computed over.
    pub max_line_hz: f64,
}

impl DemonSpectrum {
    /// Wraps precomputed magnitudes; the analysis ceiling is the top bin.
    pub fn from_magnitudes(magnitudes: Vec<f64>, bin_hz: f64) -> Self {
        let max_line_hz = magnitudes.len().saturating_sub(1) as f64 * bin_hz;
        Self {
            magnitudes,
            bin_hz,
            source_duration_s: 0.0,
            max_line_hz,
        }
    }

    pub fn freq_of(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_hz
    }

    /// Nearest bin to `freq_hz` (may be past the end).
    pub fn bin_of(&self, freq_hz: f64) -> usize {
        (freq_hz / self.bin_hz).round().max(0.0) as usize
    }

    /// Highest bin index inside the analysis band.
    pub fn max_line_bin(&self) -> usize {
        let last = self.magnitudes.len().saturating_sub(1);
        ((self.max_line_hz / self.bin_hz + 1e-9).floor() as usize).min(last)
    }

    /// Non-DC bins from 1 through [`Self::max_line_bin`].
    pub fn analysis_bins(&self) -> &[f64] {
        let hi = self.max_line_bin();
        if hi == 0 {
            &[]
        } else {
            &self.magnitudes[1..=hi]
        }
    }

    /// Median magnitude over the analysis bins (mean of the middle pair for even counts).
    pub fn median_magnitude(&self) -> f64 {
        let mut v = self.analysis_bins().to_vec();
        if v.is_empty() {
            return 0.0;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }
}

pub fn demon_spectrum(buffer: &SampleBuffer, config: &DemonConfig) -> Result<DemonSpectrum> {
    let fs = buffer.sample_rate_hz();
    let factor = config.validate(fs)?;
    let min = config.min_samples(fs)?;
    if buffer.len() < min {
        return Err(Error::contract(format!(
            "input of {:.3} s is too short: DEMON analysis needs at least {:.3} s",
            buffer.duration_s(),
            min as f64 / fs
        )));
    }
    let (lo, hi) = config.carrier.resolve(fs);
    let carrier = dsp::design_fir(FirKind::Bandpass { lo_hz: lo, hi_hz: hi }, fs, config.carrier_taps)?;
    let band = dsp::filter_apply(&carrier, buffer.samples())?;
    let envelope = dsp::square_law_envelope(&band);
    let (mut low, env_rate) = dsp::decimate(&envelope, fs, factor)?;

    let mean = low.iter().sum::<f64>() / low.len() as f64;
    for v in &mut low {
        *v -= mean;
    }
    let power = dsp::welch_spectrum(&low, env_rate, config.frame_len, config.overlap_frac, WindowKind::Hann)?;

    let mut magnitudes = power.magnitudes;
    magnitudes[0] = 0.0;
    let peak = magnitudes.iter().cloned().fold(0.0, f64::max);
    if peak > 0.0 {
        for m in &mut magnitudes {
            *m /= peak;
        }
    }
    Ok(DemonSpectrum {
        magnitudes,
        bin_hz: power.bin_hz,
        source_duration_s: buffer.duration_s(),
        max_line_hz: config.max_line_hz,
    })
}

/// Time-stacked DEMON spectra, one row per slice.
#[derive(Debug, Clone, PartialEq)]
pub struct DemonGram {
    pub rows: Vec<Vec<f64>>,
    pub slice_duration_s: f64,
    pub bin_hz: f64,
}

impl DemonGram {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_bins(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Mean magnitude of each frequency column across slices.
    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.n_bins()];
        for row in &self.rows {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = self.rows.len().max(1) as f64;
        means.iter_mut().for_each(|m| *m /= n);
        means
    }
}

pub fn demon_gram(buffer: &SampleBuffer, config: &DemonConfig, slice_s: f64) -> Result<DemonGram> {
    config.validate(buffer.sample_rate_hz())?;
    if !(slice_s >= config.frame_duration_s()) {
        return Err(Error::contract(format!(
            "slice of {slice_s} s is shorter than one envelope frame ({} s)",
            config.frame_duration_s()
        )));
    }
    let slice_len = (slice_s * buffer.sample_rate_hz()).round() as usize;
    let n_rows = buffer.len() / slice_len.max(1);
    if n_rows == 0 {
        return Err(Error::contract(format!(
            "input of {:.3} s is shorter than one {slice_s} s slice",
            buffer.duration_s()
        )));
    }
    let spectra = (0..n_rows)
        .into_par_iter()
        .map(|i| demon_spectrum(&buffer.slice(i * slice_len, (i + 1) * slice_len), config))
        .collect::<Result<Vec<_>>>()?;
    let bin_hz = spectra[0].bin_hz;
    Ok(DemonGram {
        rows: spectra.into_iter().map(|s| s.magnitudes).collect(),
        slice_duration_s: slice_len as f64 / buffer.sample_rate_hz(),
        bin_hz,
    })
}

/// Path of the metadata file written next to a rendered gram.
pub fn gram_sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("txt")
}

/// Writes the gram as a P5 graymap (row per slice, `round(255·m)` per pixel)
/// plus a `key=value` sidecar carrying the axis scales.
pub fn render_demon_gram(gram: &DemonGram, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if gram.rows.is_empty() || gram.n_bins() == 0 {
        return Err(Error::contract("cannot render an empty DEMON-gram"));
    }
    let pixels: Vec<Vec<u8>> = gram
        .rows
        .iter()
        .map(|r| r.iter().map(|&m| pgm::gray_level(m)).collect())
        .collect();
    pgm::write_pgm(&pixels, path)?;
    let meta = format!(
        "bin_hz={}\nslice_duration_s={}\nrows={}\nbins={}\n",
        gram.bin_hz,
        gram.slice_duration_s,
        gram.n_rows(),
        gram.n_bins()
    );
    let side = gram_sidecar_path(path);
    fs::write(&side, meta).map_err(|e| Error::io(&side, e))
}

/// `freq_hz,magnitude` table with one row per bin.
pub fn spectrum_csv(spectrum: &DemonSpectrum) -> String {
    let mut out = String::from("freq_hz,magnitude\n");
    for (i, m) in spectrum.magnitudes.iter().enumerate() {
        out.push_str(&format!("{},{m}\n", spectrum.freq_of(i)));
    }
    out
}

pub fn write_spectrum_csv(spectrum: &DemonSpectrum, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, spectrum_csv(spectrum)).map_err(|e| Error::io(path, e))
}
