pub mod audio_io;
pub mod demon;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod features;
pub mod nn;
pub mod pgm;
pub mod pipeline;
pub mod synth;

pub use audio_io::{read_wav, write_wav, SampleBuffer};
pub use demon::{
    demon_gram, demon_spectrum, render_demon_gram, spectrum_csv, write_spectrum_csv, DemonConfig, DemonGram, DemonSpectrum,
};
pub use error::{Error, Result};
pub use features::{extract_salient_features, FeatureConfig, FeatureStats, SalientFeatures};
