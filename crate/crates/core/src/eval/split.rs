//! Stratified train/validation partitioning.

use std::collections::BTreeMap;
use std::fmt::Display;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::eval::manifest::DatasetManifest;

/// Validation share of a class of `n` rows: `floor(n·(1−ratio))`, at least one
/// and never the whole class.
pub fn val_count(n: usize, ratio: f64) -> usize {
    let raw = (n as f64 * (1.0 - ratio) + 1e-9).floor() as usize;
    raw.max(1).min(n.saturating_sub(1))
}

/// Splits row indices per stratum. Returns `(train, val)` index lists in
/// ascending order.
pub fn stratified_split_indices<K: Ord + Clone + Display>(
    keys: &[K],
    ratio: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::contract(format!("split ratio {ratio} must lie in (0, 1)")));
    }
    let mut strata: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        strata.entry(k.clone()).or_default().push(i);
    }
    if let Some((k, _)) = strata.iter().find(|(_, rows)| rows.len() < 2) {
        return Err(Error::contract(format!("class {k} has fewer than 2 rows; cannot split")));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for rows in strata.values_mut() {
        rows.shuffle(&mut rng);
        let n_val = val_count(rows.len(), ratio);
        val.extend_from_slice(&rows[..n_val]);
        train.extend_from_slice(&rows[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

fn subset(manifest: &DatasetManifest, idx: &[usize]) -> DatasetManifest {
    DatasetManifest {
        rows: idx.iter().map(|&i| manifest.rows[i].clone()).collect(),
    }
}

/// Stratified by coarse label.
pub fn split_dataset(manifest: &DatasetManifest, ratio: f64, seed: u64) -> Result<(DatasetManifest, DatasetManifest)> {
    let keys: Vec<usize> = manifest.rows.iter().map(|r| r.coarse).collect();
    let (t, v) = stratified_split_indices(&keys, ratio, seed)?;
    Ok((subset(manifest, &t), subset(manifest, &v)))
}
