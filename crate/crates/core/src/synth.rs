//! Propeller-modulated broadband noise with known line structure.
//!
//! A vessel is modeled as carrier-band cavitation noise whose amplitude is
//! modulated at the shaft rate and at the blade rate, plus full-band ambient
//! noise at a prescribed SNR.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::audio_io::{write_wav, SampleBuffer};
use crate::demon::{CarrierBand, DemonConfig};
use crate::dsp::{design_fir, filter_apply, FirKind};
use crate::error::{Error, Result};
use crate::eval::manifest::{write_manifest, DatasetManifest, ManifestRow};

const CARRIER_TAPS: usize = 129;
const PEAK_LEVEL: f64 = 0.9;
pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct VesselParams {
    pub shaft_hz: f64,
    pub blade_count: usize,
    pub mod_depth: f64,
    /// Shaft-line amplitude relative to the blade line.
    pub shaft_line_frac: f64,
    pub snr_db: f64,
    pub carrier: CarrierBand,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub seed: u64,
}

impl Default for VesselParams {
    fn default() -> Self {
        Self {
            shaft_hz: 5.0,
            blade_count: 3,
            mod_depth: 0.5,
            shaft_line_frac: 0.5,
            snr_db: 10.0,
            carrier: CarrierBand::Fraction { lo: 0.125, hi: 0.375 },
            duration_s: 10.0,
            sample_rate_hz: 16_000.0,
            seed: 0,
        }
    }
}

impl VesselParams {
    pub fn validate(&self) -> Result<()> {
        if !(2..=7).contains(&self.blade_count) {
            return Err(Error::contract(format!("blade count {} outside [2, 7]", self.blade_count)));
        }
        let env_nyquist = DemonConfig::default().envelope_rate_hz / 2.0;
        let blade_hz = self.blade_count as f64 * self.shaft_hz;
        if !(self.shaft_hz > 0.0 && blade_hz < env_nyquist) {
            return Err(Error::contract(format!(
                "blade rate {blade_hz} Hz must be positive and below {env_nyquist} Hz"
            )));
        }
        if !(0.0..=1.0).contains(&self.mod_depth) || !(0.0..=1.0).contains(&self.shaft_line_frac) {
            return Err(Error::contract("modulation depth and shaft line fraction must lie in [0, 1]"));
        }
        if self.mod_depth * (self.shaft_line_frac + 1.0) > 1.0 + 1e-12 {
            return Err(Error::contract(format!(
                "mod_depth * (shaft_line_frac + 1) = {} exceeds 1",
                self.mod_depth * (self.shaft_line_frac + 1.0)
            )));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::contract("SNR must be finite"));
        }
        if !(self.sample_rate_hz > 0.0 && self.duration_s > 0.0) {
            return Err(Error::contract("sample rate and duration must be positive"));
        }
        let (lo, hi) = self.carrier.resolve(self.sample_rate_hz);
        if !(lo > 0.0 && lo < hi && hi < self.sample_rate_hz / 2.0) {
            return Err(Error::contract(format!("carrier band [{lo}, {hi}] Hz is not inside (0, Nyquist)")));
        }
        if self.n_samples() < CARRIER_TAPS {
            return Err(Error::contract(format!("duration {} s is too short", self.duration_s)));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    /// The bracketed modulation factor at time `t`.
    pub fn modulation(&self, t: f64) -> f64 {
        let s = self.shaft_line_frac;
        let f = self.shaft_hz;
        let b = self.blade_count as f64;
        1.0 + self.mod_depth * (s * (TAU * f * t).cos() + (TAU * b * f * t).cos()) / (s + 1.0)
    }
}

fn mean_power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// The modulated carrier and the scaled ambient noise before they are summed
/// and peak-normalized.
pub fn vessel_components(p: &VesselParams) -> Result<(Vec<f64>, Vec<f64>)> {
    p.validate()?;
    let n = p.n_samples();
    let fs = p.sample_rate_hz;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(p.seed);

    // Extra samples on both sides keep the filter edge transients out.
    let half = CARRIER_TAPS / 2;
    let raw: Vec<f64> = (0..n + 2 * half).map(|_| rng.sample(StandardNormal)).collect();
    let (lo, hi) = p.carrier.resolve(fs);
    let bp = design_fir(FirKind::Bandpass { lo_hz: lo, hi_hz: hi }, fs, CARRIER_TAPS)?;
    let mut carrier = filter_apply(&bp, &raw)?;
    carrier.drain(..half);
    carrier.truncate(n);
    let norm = mean_power(&carrier).sqrt();

    let signal: Vec<f64> = carrier
        .iter()
        .enumerate()
        .map(|(i, w)| p.modulation(i as f64 / fs) * w / norm)
        .collect();

    let mut noise: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let a = (mean_power(&signal) / (mean_power(&noise) * 10f64.powf(p.snr_db / 10.0))).sqrt();
    noise.iter_mut().for_each(|v| *v *= a);
    Ok((signal, noise))
}

pub fn synth_vessel_signal(p: &VesselParams) -> Result<SampleBuffer> {
    let (signal, noise) = vessel_components(p)?;
    let mut x: Vec<f64> = signal.iter().zip(&noise).map(|(s, v)| s + v).collect();
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let g = PEAK_LEVEL / peak;
        x.iter_mut().for_each(|v| *v *= g);
    }
    SampleBuffer::new(x, p.sample_rate_hz)
}

/// Closed parameter box for one class. Blade counts are an inclusive integer range.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassBox {
    pub shaft_hz: (f64, f64),
    pub blade_count: (usize, usize),
    pub mod_depth: (f64, f64),
    pub snr_db: (f64, f64),
}

impl ClassBox {
    pub fn new(shaft_hz: (f64, f64), blade_count: (usize, usize), mod_depth: (f64, f64), snr_db: (f64, f64)) -> Self {
        Self {
            shaft_hz,
            blade_count,
            mod_depth,
            snr_db,
        }
    }

    fn is_well_formed(&self) -> bool {
        self.shaft_hz.0 <= self.shaft_hz.1
            && self.blade_count.0 <= self.blade_count.1
            && self.mod_depth.0 <= self.mod_depth.1
            && self.snr_db.0 <= self.snr_db.1
    }

    /// True when the boxes are separated along at least one coordinate.
    pub fn disjoint_from(&self, other: &ClassBox) -> bool {
        let apart = |a: (f64, f64), b: (f64, f64)| a.1 < b.0 || b.1 < a.0;
        apart(self.shaft_hz, other.shaft_hz)
            || self.blade_count.1 < other.blade_count.0
            || other.blade_count.1 < self.blade_count.0
            || apart(self.mod_depth, other.mod_depth)
            || apart(self.snr_db, other.snr_db)
    }

    pub fn contains_box(&self, inner: &ClassBox) -> bool {
        let within = |o: (f64, f64), i: (f64, f64)| o.0 <= i.0 && i.1 <= o.1;
        within(self.shaft_hz, inner.shaft_hz)
            && self.blade_count.0 <= inner.blade_count.0
            && inner.blade_count.1 <= self.blade_count.1
            && within(self.mod_depth, inner.mod_depth)
            && within(self.snr_db, inner.snr_db)
    }

    fn draw(&self, rng: &mut Xoshiro256PlusPlus, shaft_grid_hz: Option<f64>) -> (f64, usize, f64, f64) {
        let uni = |rng: &mut Xoshiro256PlusPlus, (lo, hi): (f64, f64)| {
            if lo == hi {
                lo
            } else {
                rng.random_range(lo..=hi)
            }
        };
        let shaft = match shaft_grid_hz {
            Some(g) => {
                let (first, last) = grid_span(self.shaft_hz, g);
                rng.random_range(first..=last) as f64 * g
            }
            None => uni(rng, self.shaft_hz),
        };
        let blades = rng.random_range(self.blade_count.0..=self.blade_count.1);
        let m = uni(rng, self.mod_depth);
        let snr = uni(rng, self.snr_db);
        (shaft, blades, m, snr)
    }
}

/// First and last multiples of `grid` inside `[lo, hi]`.
fn grid_span((lo, hi): (f64, f64), grid: f64) -> (u64, u64) {
    ((lo / grid - 1e-9).ceil() as u64, (hi / grid + 1e-9).floor() as u64)
}

/// Dataset recipe: one box per coarse class plus fine sub-boxes inside the
/// refined coarse class.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub classes: Vec<ClassBox>,
    pub fine_types: Vec<ClassBox>,
    pub refine_category: usize,
    pub samples_per_class: usize,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub shaft_line_frac: f64,
    pub carrier: CarrierBand,
    /// When set, shaft rates are drawn from multiples of this spacing.
    pub shaft_grid_hz: Option<f64>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        // Classes also differ in modulation depth, which sets how much of the
        // envelope spectrum the lines occupy relative to the floor.
        let snr = (10.0, 10.0);
        let refined_depth = (0.55, 0.6);
        let classes = vec![
            ClassBox::new((2.2, 2.8), (3, 3), (0.18, 0.22), snr),
            ClassBox::new((4.8, 10.2), (3, 5), refined_depth, snr),
            ClassBox::new((11.0, 13.0), (4, 4), (0.28, 0.32), snr),
            ClassBox::new((3.4, 4.2), (5, 5), (0.38, 0.42), snr),
            ClassBox::new((1.2, 1.6), (2, 2), (0.14, 0.16), snr),
        ];
        let fine_types = [(4.8, 5.0), (6.1, 6.3), (7.4, 7.6), (8.7, 8.9), (10.0, 10.2)]
            .into_iter()
            .flat_map(|band| [3, 5].map(|b| ClassBox::new(band, (b, b), refined_depth, snr)))
            .collect();
        Self {
            classes,
            fine_types,
            refine_category: 1,
            samples_per_class: 40,
            duration_s: 10.0,
            sample_rate_hz: 16_000.0,
            shaft_line_frac: 0.5,
            carrier: CarrierBand::Fraction { lo: 0.125, hi: 0.375 },
            shaft_grid_hz: Some(demon_bin_hz()),
            seed: 0,
        }
    }
}

/// Line-spectrum bin spacing of the default DEMON configuration.
pub fn demon_bin_hz() -> f64 {
    let c = DemonConfig::default();
    c.envelope_rate_hz / c.frame_len as f64
}

/// Drawn parameters and labels for one dataset entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleDraw {
    pub coarse: usize,
    pub fine: Option<usize>,
    pub index: usize,
    pub params: VesselParams,
}

impl SampleDraw {
    pub fn file_name(&self) -> String {
        format!("c{}_{:04}.wav", self.coarse, self.index)
    }
}

impl SynthSpec {
    /// Keeps only the first `n` coarse classes; fine types survive only if the
    /// refined class does.
    pub fn with_classes(mut self, n: usize) -> Result<Self> {
        if n == 0 || n > self.classes.len() {
            return Err(Error::contract(format!(
                "class count must lie in [1, {}], got {n}",
                self.classes.len()
            )));
        }
        self.classes.truncate(n);
        if self.refine_category >= n {
            self.fine_types.clear();
        }
        Ok(self)
    }

    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        for b in self.classes.iter_mut().chain(self.fine_types.iter_mut()) {
            b.snr_db = (snr_db, snr_db);
        }
        self
    }

    pub fn fine_classes(&self) -> usize {
        self.fine_types.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() || self.samples_per_class == 0 {
            return Err(Error::contract("need at least one class and one sample per class"));
        }
        for (i, b) in self.classes.iter().chain(&self.fine_types).enumerate() {
            if !b.is_well_formed() {
                return Err(Error::contract(format!("parameter box {i} has an inverted range")));
            }
        }
        for (name, boxes) in [("class", &self.classes), ("fine type", &self.fine_types)] {
            for i in 0..boxes.len() {
                for j in i + 1..boxes.len() {
                    if !boxes[i].disjoint_from(&boxes[j]) {
                        return Err(Error::contract(format!("{name} boxes {i} and {j} overlap")));
                    }
                }
            }
        }
        if let Some(g) = self.shaft_grid_hz {
            if !(g > 0.0) {
                return Err(Error::contract("shaft grid spacing must be positive"));
            }
            for (i, b) in self.classes.iter().chain(&self.fine_types).enumerate() {
                let (first, last) = grid_span(b.shaft_hz, g);
                if first > last {
                    return Err(Error::contract(format!("parameter box {i} holds no shaft rate on the {g} Hz grid")));
                }
            }
        }
        if !self.fine_types.is_empty() {
            let parent = self.classes.get(self.refine_category).ok_or_else(|| {
                Error::contract(format!("refined class {} does not exist", self.refine_category))
            })?;
            if let Some(i) = self.fine_types.iter().position(|f| !parent.contains_box(f)) {
                return Err(Error::contract(format!(
                    "fine type {i} lies outside class {}",
                    self.refine_category
                )));
            }
        }
        Ok(())
    }

    /// Draws every sample's parameters in (class, index) order. Samples of the
    /// refined class cycle through the fine types.
    pub fn draw_samples(&self) -> Result<Vec<SampleDraw>> {
        self.validate()?;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(self.classes.len() * self.samples_per_class);
        for (coarse, cbox) in self.classes.iter().enumerate() {
            for index in 0..self.samples_per_class {
                let fine = (coarse == self.refine_category && !self.fine_types.is_empty())
                    .then(|| index % self.fine_types.len());
                let bx = fine.map_or(cbox, |f| &self.fine_types[f]);
                let (shaft_hz, blade_count, mod_depth, snr_db) = bx.draw(&mut rng, self.shaft_grid_hz);
                let params = VesselParams {
                    shaft_hz,
                    blade_count,
                    mod_depth,
                    shaft_line_frac: self.shaft_line_frac,
                    snr_db,
                    carrier: self.carrier,
                    duration_s: self.duration_s,
                    sample_rate_hz: self.sample_rate_hz,
                    seed: rng.random(),
                };
                params.validate()?;
                out.push(SampleDraw {
                    coarse,
                    fine,
                    index,
                    params,
                });
            }
        }
        Ok(out)
    }
}

/// Writes one WAV per sample plus `manifest.csv` into `out_dir`. Manifest
/// paths are relative to `out_dir`.
pub fn generate_dataset(spec: &SynthSpec, out_dir: &Path) -> Result<DatasetManifest> {
    let draws = spec.draw_samples()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    draws.par_iter().try_for_each(|d| {
        let buf = synth_vessel_signal(&d.params)?;
        write_wav(&buf, out_dir.join(d.file_name()))
    })?;
    let manifest = DatasetManifest {
        rows: draws
            .iter()
            .map(|d| ManifestRow {
                path: d.file_name(),
                coarse: d.coarse,
                fine: d.fine,
            })
            .collect(),
    };
    write_manifest(&manifest, &out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}
