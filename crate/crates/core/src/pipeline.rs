//! Audio file to feature vector, singly or over a whole manifest.

use std::path::Path;

use rayon::prelude::*;

use crate::audio_io::read_wav;
use crate::demon::{demon_spectrum, DemonConfig, DemonSpectrum};
use crate::error::{Error, Result};
use crate::eval::manifest::{resolve_entry, DatasetManifest, FeatureRow};
use crate::features::{extract_salient_features, FeatureConfig, SalientFeatures};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnalysisConfig {
    pub demon: DemonConfig,
    pub features: FeatureConfig,
}

pub fn analyze_file(path: &Path, config: &AnalysisConfig) -> Result<(DemonSpectrum, SalientFeatures)> {
    let run = || {
        let audio = read_wav(path)?;
        let spectrum = demon_spectrum(&audio, &config.demon)?;
        let features = extract_salient_features(&spectrum, &config.features)?;
        Ok((spectrum, features))
    };
    run().map_err(|e| Error::in_file(path, e))
}

/// Features for every manifest row, in manifest order. Relative entries are
/// resolved against the manifest's directory.
pub fn extract_manifest_features(
    manifest: &DatasetManifest,
    manifest_path: &Path,
    config: &AnalysisConfig,
) -> Result<Vec<FeatureRow>> {
    manifest
        .rows
        .par_iter()
        .map(|r| {
            let (_, features) = analyze_file(&resolve_entry(manifest_path, &r.path), config)?;
            Ok(FeatureRow {
                path: r.path.clone(),
                coarse: Some(r.coarse),
                fine: r.fine,
                features,
            })
        })
        .collect()
}
