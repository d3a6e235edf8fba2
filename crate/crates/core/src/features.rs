//! The five-dimensional salient feature vector read off a DEMON spectrum.
//!
//! Shaft rate comes from a harmonic-comb search over the spectrum, blade
//! count from the strongest multiple of the shaft rate. The two "maximum"
//! frequencies are the strongest bins in the shaft search band and above it.
//! A value of 0 for shaft or blade frequency means no line family was found.

use serde::{Deserialize, Serialize};

use crate::demon::DemonSpectrum;
use crate::error::{Error, Result};

pub const FEATURE_DIM: usize = 5;

pub const FEATURE_NAMES: [&str; FEATURE_DIM] =
    ["blade_hz", "shaft_hz", "avg_strength", "max_shaft_hz", "max_blade_hz"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub freq_hz: f64,
    pub magnitude: f64,
    pub bin_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SalientFeatures {
    pub blade_freq_hz: f64,
    pub shaft_freq_hz: f64,
    pub avg_strength: f64,
    pub max_shaft_freq_hz: f64,
    pub max_blade_freq_hz: f64,
}

impl SalientFeatures {
    /// Feature order: blade, shaft, average strength, max shaft, max blade.
    pub fn to_array(&self) -> [f64; FEATURE_DIM] {
        [
            self.blade_freq_hz,
            self.shaft_freq_hz,
            self.avg_strength,
            self.max_shaft_freq_hz,
            self.max_blade_freq_hz,
        ]
    }

    pub fn from_array(v: [f64; FEATURE_DIM]) -> Self {
        Self {
            blade_freq_hz: v[0],
            shaft_freq_hz: v[1],
            avg_strength: v[2],
            max_shaft_freq_hz: v[3],
            max_blade_freq_hz: v[4],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub shaft_min_hz: f64,
    pub shaft_max_hz: f64,
    pub n_harmonics: usize,
    pub blade_min: usize,
    pub blade_max: usize,
    pub peak_threshold: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            shaft_min_hz: 1.0,
            shaft_max_hz: 15.0,
            n_harmonics: 5,
            blade_min: 2,
            blade_max: 7,
            peak_threshold: 3.0,
        }
    }
}

/// Strict local maxima above `k` times the median analysis-band magnitude.
pub fn detect_peaks(spectrum: &DemonSpectrum, k: f64) -> Result<Vec<Peak>> {
    if !(k > 0.0) {
        return Err(Error::contract(format!("peak threshold must be positive, got {k}")));
    }
    let m = &spectrum.magnitudes;
    let threshold = k * spectrum.median_magnitude();
    let hi = spectrum.max_line_bin();
    let mut peaks = Vec::new();
    for i in 1..=hi {
        let left = m[i - 1];
        let right = m.get(i + 1).copied().unwrap_or(0.0);
        if m[i] > left && m[i] > right && m[i] > threshold {
            peaks.push(Peak {
                freq_hz: spectrum.freq_of(i),
                magnitude: m[i],
                bin_index: i,
            });
        }
    }
    Ok(peaks)
}

/// Largest magnitude within ±1 bin of `center`, restricted to the analysis band.
fn max_near(spectrum: &DemonSpectrum, center: usize) -> f64 {
    let hi = spectrum.max_line_bin();
    let lo = center.saturating_sub(1).max(1);
    let top = (center + 1).min(hi);
    if lo > top {
        return 0.0;
    }
    spectrum.magnitudes[lo..=top].iter().cloned().fold(0.0, f64::max)
}

/// Comb score of candidate fundamental bin `f0_bin`: mean over the harmonics
/// that fall inside the analysis band, or `None` when none do.
pub fn comb_score(spectrum: &DemonSpectrum, f0_bin: usize, n_harmonics: usize) -> Option<f64> {
    let hi = spectrum.max_line_bin();
    let mut sum = 0.0;
    let mut used = 0;
    for k in 1..=n_harmonics {
        let h = k * f0_bin;
        if h > hi {
            break;
        }
        sum += max_near(spectrum, h);
        used += 1;
    }
    (used > 0).then(|| sum / used as f64)
}

/// Harmonic-comb search for the shaft rate; returns `(shaft_hz, score)`, or
/// `(0, 0)` when no candidate scores at least twice the median magnitude.
pub fn estimate_shaft_frequency(
    spectrum: &DemonSpectrum,
    f_min_hz: f64,
    f_max_hz: f64,
    n_harmonics: usize,
) -> Result<(f64, f64)> {
    if !(f_min_hz >= 0.0 && f_min_hz < f_max_hz && f_max_hz <= spectrum.max_line_hz + 1e-9) {
        return Err(Error::contract(format!(
            "shaft band [{f_min_hz}, {f_max_hz}] Hz must be ordered and within {} Hz",
            spectrum.max_line_hz
        )));
    }
    if n_harmonics < 3 {
        return Err(Error::contract(format!(
            "comb needs at least 3 harmonics, got {n_harmonics}"
        )));
    }
    let first = ((f_min_hz / spectrum.bin_hz - 1e-9).ceil() as usize).max(1);
    let last = ((f_max_hz / spectrum.bin_hz + 1e-9).floor() as usize).min(spectrum.max_line_bin());

    let mut best: Option<(usize, f64)> = None;
    for bin in first..=last {
        if let Some(score) = comb_score(spectrum, bin, n_harmonics) {
            // strict comparison keeps the lowest fundamental on ties
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((bin, score));
            }
        }
    }
    match best {
        Some((bin, score)) if score > 0.0 && score >= 2.0 * spectrum.median_magnitude() => {
            Ok((spectrum.freq_of(bin), score))
        }
        _ => Ok((0.0, 0.0)),
    }
}

/// Picks the blade count whose multiple of the shaft rate carries the most energy.
pub fn estimate_blade_count(
    spectrum: &DemonSpectrum,
    shaft_freq_hz: f64,
    b_min: usize,
    b_max: usize,
) -> Result<usize> {
    if !(shaft_freq_hz > 0.0) {
        return Err(Error::contract("blade count needs a detected shaft frequency"));
    }
    if !(2 <= b_min && b_min <= b_max && b_max <= 7) {
        return Err(Error::contract(format!(
            "blade range [{b_min}, {b_max}] must satisfy 2 <= min <= max <= 7"
        )));
    }
    let mut best: Option<(usize, f64)> = None;
    for b in b_min..=b_max {
        let target = b as f64 * shaft_freq_hz;
        if target > spectrum.max_line_hz + 1e-9 {
            break;
        }
        let mag = max_near(spectrum, spectrum.bin_of(target));
        if best.is_none_or(|(_, m)| mag > m) {
            best = Some((b, mag));
        }
    }
    match best {
        Some((b, mag)) if mag >= 2.0 * spectrum.median_magnitude() => Ok(b),
        _ => Ok(b_min),
    }
}

/// Frequency of the strongest bin with index in `[lo, hi]`; lowest bin on ties, 0 if the range is empty or silent.
fn strongest_in(spectrum: &DemonSpectrum, lo: usize, hi: usize) -> f64 {
    let hi = hi.min(spectrum.max_line_bin());
    let mut best: Option<(usize, f64)> = None;
    for i in lo.max(1)..=hi {
        let m = spectrum.magnitudes[i];
        if m > 0.0 && best.is_none_or(|(_, b)| m > b) {
            best = Some((i, m));
        }
    }
    best.map_or(0.0, |(i, _)| spectrum.freq_of(i))
}

pub fn extract_salient_features(spectrum: &DemonSpectrum, config: &FeatureConfig) -> Result<SalientFeatures> {
    let f_max = config.shaft_max_hz.min(spectrum.max_line_hz);
    let (shaft, _) = estimate_shaft_frequency(spectrum, config.shaft_min_hz, f_max, config.n_harmonics)?;
    let blade = if shaft > 0.0 {
        shaft * estimate_blade_count(spectrum, shaft, config.blade_min, config.blade_max)? as f64
    } else {
        0.0
    };

    let analysis = spectrum.analysis_bins();
    let avg_strength = if analysis.is_empty() {
        0.0
    } else {
        analysis.iter().sum::<f64>() / analysis.len() as f64
    };

    let lo_bin = ((config.shaft_min_hz / spectrum.bin_hz - 1e-9).ceil() as usize).max(1);
    let hi_bin = (f_max / spectrum.bin_hz + 1e-9).floor() as usize;
    let max_shaft = strongest_in(spectrum, lo_bin, hi_bin);
    let max_blade = strongest_in(spectrum, hi_bin + 1, spectrum.max_line_bin());

    Ok(SalientFeatures {
        blade_freq_hz: blade,
        shaft_freq_hz: shaft,
        avg_strength,
        max_shaft_freq_hz: max_shaft,
        max_blade_freq_hz: max_blade,
    })
}

/// Per-dimension mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub means: [f64; FEATURE_DIM],
    pub stds: [f64; FEATURE_DIM],
}

impl FeatureStats {
    /// Identity transform: zero mean, unit spread.
    pub fn identity() -> Self {
        Self {
            means: [0.0; FEATURE_DIM],
            stds: [1.0; FEATURE_DIM],
        }
    }
}

pub fn fit_feature_stats(features: &[SalientFeatures]) -> Result<FeatureStats> {
    if features.len() < 2 {
        return Err(Error::contract(format!(
            "feature statistics need at least 2 samples, got {}",
            features.len()
        )));
    }
    let n = features.len() as f64;
    let mut means = [0.0; FEATURE_DIM];
    for f in features {
        for (m, x) in means.iter_mut().zip(f.to_array()) {
            *m += x;
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut stds = [0.0; FEATURE_DIM];
    for f in features {
        for ((s, x), m) in stds.iter_mut().zip(f.to_array()).zip(means) {
            *s += (x - m) * (x - m);
        }
    }
    stds.iter_mut().for_each(|s| *s = (*s / n).sqrt());
    Ok(FeatureStats { means, stds })
}

/// Z-scores a feature vector; zero-spread dimensions are only centered.
pub fn normalize_features(f: &SalientFeatures, stats: &FeatureStats) -> [f64; FEATURE_DIM] {
    let mut out = f.to_array();
    for i in 0..FEATURE_DIM {
        let s = if stats.stds[i] == 0.0 { 1.0 } else { stats.stds[i] };
        out[i] = (out[i] - stats.means[i]) / s;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const BIN: f64 = 0.5;

    /// Spectrum of `n` bins at 0.5 Hz spacing with the given (Hz, magnitude) lines.
    fn lines(n: usize, at: &[(f64, f64)]) -> DemonSpectrum {
        let mut m = vec![0.0; n];
        for &(f, v) in at {
            m[(f / BIN).round() as usize] = v;
        }
        DemonSpectrum::from_magnitudes(m, BIN)
    }

    /// Brute-force comb scorer written straight from the definition.
    fn brute_score(s: &DemonSpectrum, f0_hz: f64, k_max: usize) -> f64 {
        let mut total = 0.0;
        let mut used = 0;
        for k in 1..=k_max {
            let f = k as f64 * f0_hz;
            if f > s.max_line_hz + 1e-9 {
                continue;
            }
            let mut best: f64 = 0.0;
            for (i, &m) in s.magnitudes.iter().enumerate().skip(1) {
                if (i as f64 * s.bin_hz - f).abs() <= s.bin_hz + 1e-9 && i as f64 * s.bin_hz <= s.max_line_hz + 1e-9 {
                    best = best.max(m);
                }
            }
            total += best;
            used += 1;
        }
        total / used as f64
    }

    #[test]
    fn no_peaks_in_silence() {
        assert!(detect_peaks(&lines(100, &[]), 3.0).unwrap().is_empty());
    }

    #[test]
    fn single_bin_is_single_peak() {
        let p = detect_peaks(&lines(100, &[(12.0, 0.7)]), 3.0).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[0].bin_index, 24);
        assert_eq!(p[0].freq_hz, 12.0);
        assert!(detect_peaks(&lines(10, &[]), 0.0).is_err());
    }

    #[test]
    fn constructed_comb_recovers_fundamental() {
        let s = lines(100, &[(5.0, 1.0), (10.0, 1.0), (15.0, 1.0)]);
        let (f, score) = estimate_shaft_frequency(&s, 1.0, 15.0, 3).unwrap();
        assert_eq!(f, 5.0);
        assert_eq!(score, 1.0);
    }

    #[test]
    fn spurious_line_does_not_capture_comb() {
        let s = lines(100, &[(5.0, 1.0), (10.0, 1.0), (15.0, 1.0), (7.0, 0.8)]);
        let (f, _) = estimate_shaft_frequency(&s, 1.0, 15.0, 3).unwrap();
        assert_eq!(f, 5.0);
        // the winning candidate also wins under the brute-force scorer
        let best = (2..=30)
            .map(|b| (b, brute_score(&s, b as f64 * BIN, 3)))
            .fold((0, f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc });
        assert_eq!(best.0 as f64 * BIN, 5.0);
    }

    #[test]
    fn silent_spectrum_gives_sentinel() {
        assert_eq!(estimate_shaft_frequency(&lines(100, &[]), 1.0, 15.0, 5).unwrap(), (0.0, 0.0));
        assert!(estimate_shaft_frequency(&lines(100, &[]), 15.0, 1.0, 5).is_err());
        assert!(estimate_shaft_frequency(&lines(100, &[]), 1.0, 15.0, 2).is_err());
    }

    #[test]
    fn blade_count_rules() {
        let s = lines(100, &[(5.0, 0.6), (15.0, 1.0)]);
        assert_eq!(estimate_blade_count(&s, 5.0, 2, 7).unwrap(), 3);
        let tie = lines(100, &[(5.0, 0.6), (10.0, 1.0), (15.0, 1.0)]);
        assert_eq!(estimate_blade_count(&tie, 5.0, 2, 7).unwrap(), 2);
        assert!(estimate_blade_count(&s, 0.0, 2, 7).is_err());
        assert!(estimate_blade_count(&s, 5.0, 1, 7).is_err());
        assert!(estimate_blade_count(&s, 5.0, 2, 8).is_err());
    }

    #[test]
    fn all_zero_spectrum_gives_zero_vector() {
        let f = extract_salient_features(&lines(201, &[]), &FeatureConfig::default()).unwrap();
        assert_eq!(f.to_array(), [0.0; 5]);
    }

    #[test]
    fn constructed_comb_features() {
        let s = lines(201, &[(5.0, 0.6), (10.0, 0.5), (15.0, 1.0)]);
        let cfg = FeatureConfig {
            shaft_max_hz: 8.0,
            ..FeatureConfig::default()
        };
        let f = extract_salient_features(&s, &cfg).unwrap();
        assert_eq!(f.shaft_freq_hz, 5.0);
        assert_eq!(f.blade_freq_hz, 15.0);
        assert_eq!(f.max_shaft_freq_hz, 5.0);
        assert_eq!(f.max_blade_freq_hz, 15.0);
        assert!((f.avg_strength - 2.1 / 200.0).abs() < 1e-15);
    }

    #[test]
    fn stats_closed_forms() {
        let a = SalientFeatures::from_array([1.0, 2.0, 0.5, 3.0, 4.0]);
        let s = fit_feature_stats(&[a, a]).unwrap();
        assert_eq!(s.stds, [0.0; 5]);
        assert_eq!(s.means, a.to_array());

        let lo = SalientFeatures::from_array([0.0; 5]);
        let hi = SalientFeatures::from_array([2.0; 5]);
        let s = fit_feature_stats(&[lo, hi]).unwrap();
        assert_eq!(s.means, [1.0; 5]);
        assert_eq!(s.stds, [1.0; 5]);

        assert!(fit_feature_stats(&[a]).is_err());
    }

    #[test]
    fn normalization_rules() {
        let stats = FeatureStats {
            means: [1.0, 2.0, 3.0, 4.0, 5.0],
            stds: [2.0, 0.0, 1.0, 1.0, 1.0],
        };
        let at_mean = SalientFeatures::from_array(stats.means);
        assert_eq!(normalize_features(&at_mean, &stats), [0.0; 5]);
        let x = SalientFeatures::from_array([3.0, 7.0, 3.0, 4.0, 5.0]);
        let z = normalize_features(&x, &stats);
        assert_eq!(z[0], 1.0);
        assert_eq!(z[1], 5.0);
    }

    fn two_pass(xs: &[f64]) -> (f64, f64) {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
        (m, v.sqrt())
    }

    proptest! {
        #[test]
        fn stats_match_direct_computation(
            rows in proptest::collection::vec(proptest::array::uniform5(-50.0f64..50.0), 2..40)
        ) {
            let feats: Vec<_> = rows.iter().map(|r| SalientFeatures::from_array(*r)).collect();
            let s = fit_feature_stats(&feats).unwrap();
            for d in 0..FEATURE_DIM {
                let col: Vec<f64> = rows.iter().map(|r| r[d]).collect();
                let (m, sd) = two_pass(&col);
                prop_assert!((s.means[d] - m).abs() <= 1e-12 * (1.0 + m.abs()));
                prop_assert!((s.stds[d] - sd).abs() <= 1e-12 * (1.0 + sd));
            }
            // normalized set has zero mean and unit spread in every non-constant dimension
            let z: Vec<_> = feats.iter().map(|f| normalize_features(f, &s)).collect();
            for d in 0..FEATURE_DIM {
                let col: Vec<f64> = z.iter().map(|r| r[d]).collect();
                let (m, sd) = two_pass(&col);
                prop_assert!(m.abs() < 1e-9);
                if s.stds[d] > 1e-6 {
                    prop_assert!((sd - 1.0).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn comb_exact_recovery(
            f0_bin in 4usize..=60,
            k in 3usize..=5,
            amps in proptest::collection::vec(0.2f64..=1.0, 5),
        ) {
            // Noiseless comb with fundamental on a 0.25 Hz grid inside [1, 15] Hz.
            // Candidates start at bin 4, so no two harmonics of one candidate can
            // share a ±1-bin window.
            let n = 401;
            let mut m = vec![0.0; n];
            for h in 1..=k {
                if h * f0_bin < n {
                    m[h * f0_bin] = amps[h - 1];
                }
            }
            let s = DemonSpectrum::from_magnitudes(m, 0.25);
            let (f, _) = estimate_shaft_frequency(&s, 1.0, 15.0, k).unwrap();
            prop_assert_eq!(f, f0_bin as f64 * 0.25);
        }

        #[test]
        fn blade_over_shaft_is_integer(
            mags in proptest::collection::vec(0.0f64..1.0, 201)
        ) {
            let s = DemonSpectrum::from_magnitudes(mags, BIN);
            let f = extract_salient_features(&s, &FeatureConfig::default()).unwrap();
            prop_assert!((0.0..=1.0).contains(&f.avg_strength));
            if f.shaft_freq_hz > 0.0 && f.blade_freq_hz > 0.0 {
                let ratio = f.blade_freq_hz / f.shaft_freq_hz;
                prop_assert!((ratio - ratio.round()).abs() < 1e-9);
                prop_assert!((2.0..=7.0).contains(&ratio.round()));
            }
        }
    }
}
