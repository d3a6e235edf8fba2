//! Two-stage classification: a coarse vessel category, then a fine vessel
//! type for one refined category.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::manifest::FeatureRow;
use crate::eval::split::stratified_split_indices;
use crate::features::{fit_feature_stats, normalize_features, FeatureStats, SalientFeatures, FEATURE_DIM};
use crate::nn::mlp::{argmax, forward, init_mlp, train, Example, MlpModel, TrainConfig, TrainHistory};

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeModel {
    pub feature_stats: FeatureStats,
    pub coarse: MlpModel,
    /// Present exactly when `refine_category` is.
    pub fine: Option<MlpModel>,
    pub refine_category: Option<usize>,
}

impl CascadeModel {
    pub fn new(
        feature_stats: FeatureStats,
        coarse: MlpModel,
        fine: Option<MlpModel>,
        refine_category: Option<usize>,
    ) -> Result<Self> {
        let m = Self {
            feature_stats,
            coarse,
            fine,
            refine_category,
        };
        m.check().map_err(|(field, reason)| Error::contract(format!("{field}: {reason}")))?;
        Ok(m)
    }

    fn check(&self) -> std::result::Result<(), (String, String)> {
        for (name, net) in [("coarse", Some(&self.coarse)), ("fine", self.fine.as_ref())] {
            if let Some(net) = net {
                net.check().map_err(|(l, r)| (format!("{name}.layer[{l}]"), r))?;
                if net.input_dim() != FEATURE_DIM {
                    return Err((
                        format!("{name}.layer_dims"),
                        format!("input width must be {FEATURE_DIM}, got {}", net.input_dim()),
                    ));
                }
            }
        }
        match (self.refine_category, &self.fine) {
            (Some(r), Some(_)) if r >= self.coarse.output_dim() => Err((
                "refine_category".into(),
                format!("{r} is not a coarse class (0..{})", self.coarse.output_dim()),
            )),
            (Some(_), None) => Err(("fine".into(), "refinement enabled but fine net missing".into())),
            (None, Some(_)) => Err(("refine_category".into(), "fine net present but refinement disabled".into())),
            _ => {
                let s = &self.feature_stats;
                if !s.means.iter().chain(&s.stds).all(|v| v.is_finite()) || s.stds.iter().any(|&v| v < 0.0) {
                    return Err(("feature_stats".into(), "means and stds must be finite, stds non-negative".into()));
                }
                Ok(())
            }
        }
    }

    pub fn coarse_classes(&self) -> usize {
        self.coarse.output_dim()
    }

    pub fn fine_classes(&self) -> Option<usize> {
        self.fine.as_ref().map(MlpModel::output_dim)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub coarse_class: usize,
    pub fine_class: Option<usize>,
    pub coarse_probs: Vec<f64>,
    pub fine_probs: Option<Vec<f64>>,
}

pub fn cascade_predict(cascade: &CascadeModel, features: &SalientFeatures) -> Result<Prediction> {
    let x = normalize_features(features, &cascade.feature_stats);
    let coarse_probs = forward(&cascade.coarse, &x)?;
    let coarse_class = argmax(&coarse_probs);
    let fine_probs = match (&cascade.fine, cascade.refine_category) {
        (Some(fine), Some(r)) if r == coarse_class => Some(forward(fine, &x)?),
        _ => None,
    };
    Ok(Prediction {
        coarse_class,
        fine_class: fine_probs.as_deref().map(argmax),
        coarse_probs,
        fine_probs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeConfig {
    pub train: TrainConfig,
    pub coarse_classes: usize,
    pub fine_classes: usize,
    /// `None` trains a coarse-only model.
    pub refine_category: Option<usize>,
    pub split_ratio: f64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            coarse_classes: 5,
            fine_classes: 10,
            refine_category: Some(1),
            split_ratio: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedCascade {
    pub model: CascadeModel,
    pub coarse_history: TrainHistory,
    pub fine_history: Option<TrainHistory>,
    /// Indices into the input rows.
    pub train_rows: Vec<usize>,
    pub val_rows: Vec<usize>,
}

/// Held-out row indices used by [`train_cascade`]: stratified jointly on
/// coarse and fine labels, so one split serves both networks.
pub fn cascade_split(rows: &[FeatureRow], config: &CascadeConfig) -> Result<(Vec<usize>, Vec<usize>)> {
    let keys: Vec<String> = rows
        .iter()
        .map(|r| match r.fine {
            Some(f) if Some(r.coarse.unwrap_or(usize::MAX)) == config.refine_category => {
                format!("{}/{f}", r.coarse.unwrap_or_default())
            }
            _ => r.coarse.unwrap_or_default().to_string(),
        })
        .collect();
    stratified_split_indices(&keys, config.split_ratio, config.train.seed)
}

fn check_rows(rows: &[FeatureRow], config: &CascadeConfig) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::contract("no training rows"));
    }
    let mut unlabeled = Vec::new();
    for r in rows {
        let c = r.coarse.ok_or_else(|| Error::contract(format!("{} has no coarse label", r.path)))?;
        if c >= config.coarse_classes {
            return Err(Error::contract(format!(
                "{}: coarse label {c} outside 0..{}",
                r.path, config.coarse_classes
            )));
        }
        if !r.features.is_finite() {
            return Err(Error::Validation(format!("{}: non-finite features", r.path)));
        }
        if Some(c) == config.refine_category {
            match r.fine {
                None => unlabeled.push(r.path.as_str()),
                Some(f) if f >= config.fine_classes => {
                    return Err(Error::contract(format!(
                        "{}: fine label {f} outside 0..{}",
                        r.path, config.fine_classes
                    )))
                }
                _ => {}
            }
        }
    }
    if let Some(r) = config.refine_category {
        if r >= config.coarse_classes {
            return Err(Error::contract(format!("refined class {r} is not a coarse class")));
        }
        let mut counts = BTreeMap::new();
        for f in 0..config.fine_classes {
            counts.insert(f, 0usize);
        }
        for f in rows.iter().filter(|row| row.coarse == Some(r)).filter_map(|row| row.fine) {
            *counts.get_mut(&f).unwrap() += 1;
        }
        let deficient: Vec<String> = counts
            .iter()
            .filter(|(_, &n)| n < 2)
            .map(|(f, n)| format!("{f} ({n} rows)"))
            .collect();
        if !unlabeled.is_empty() {
            return Err(Error::contract(format!(
                "{} rows of refined class {r} have no fine label (first: {}); fine classes short of labeled rows: {}",
                unlabeled.len(),
                unlabeled[0],
                if deficient.is_empty() { "none".to_string() } else { deficient.join(", ") }
            )));
        }
        if !deficient.is_empty() {
            return Err(Error::contract(format!(
                "fine classes need at least 2 rows each; deficient: {}",
                deficient.join(", ")
            )));
        }
    }
    Ok(())
}

/// Fits feature statistics on the training rows, then trains the coarse net on
/// every row and the fine net on the refined class only.
pub fn train_cascade(rows: &[FeatureRow], config: &CascadeConfig) -> Result<TrainedCascade> {
    config.train.validate()?;
    check_rows(rows, config)?;
    let (train_rows, val_rows) = cascade_split(rows, config)?;
    let train_feats: Vec<SalientFeatures> = train_rows.iter().map(|&i| rows[i].features).collect();
    let stats = fit_feature_stats(&train_feats)?;

    let examples = |idx: &[usize], label: &dyn Fn(&FeatureRow) -> Option<usize>| -> Vec<Example> {
        idx.iter()
            .filter_map(|&i| {
                let r = &rows[i];
                label(r).map(|y| (normalize_features(&r.features, &stats).to_vec(), y))
            })
            .collect()
    };
    let width = config.train.hidden_width;
    let seed = config.train.seed;

    let coarse_label = |r: &FeatureRow| r.coarse;
    let coarse0 = init_mlp(&[FEATURE_DIM, width, config.coarse_classes], seed)?;
    let (coarse, coarse_history) = train(
        coarse0,
        &examples(&train_rows, &coarse_label),
        &examples(&val_rows, &coarse_label),
        &config.train,
    )?;

    let (fine, fine_history) = match config.refine_category {
        Some(rc) => {
            let fine_label = |r: &FeatureRow| if r.coarse == Some(rc) { r.fine } else { None };
            let fine_seed = seed.wrapping_add(1);
            let fine0 = init_mlp(&[FEATURE_DIM, width, config.fine_classes], fine_seed)?;
            let cfg = TrainConfig {
                seed: fine_seed,
                ..config.train.clone()
            };
            let (m, h) = train(
                fine0,
                &examples(&train_rows, &fine_label),
                &examples(&val_rows, &fine_label),
                &cfg,
            )?;
            (Some(m), Some(h))
        }
        None => (None, None),
    };

    Ok(TrainedCascade {
        model: CascadeModel::new(stats, coarse, fine, config.refine_category)?,
        coarse_history,
        fine_history,
        train_rows,
        val_rows,
    })
}

#[derive(Serialize, Deserialize)]
struct StatsFile {
    means: Vec<f64>,
    stds: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    refine_category: Option<usize>,
    feature_stats: StatsFile,
    coarse: MlpModel,
    fine: Option<MlpModel>,
}

pub fn model_to_json(cascade: &CascadeModel) -> String {
    let file = ModelFile {
        version: MODEL_VERSION,
        refine_category: cascade.refine_category,
        feature_stats: StatsFile {
            means: cascade.feature_stats.means.to_vec(),
            stds: cascade.feature_stats.stds.to_vec(),
        },
        coarse: cascade.coarse.clone(),
        fine: cascade.fine.clone(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("model serialization cannot fail");
    s.push('\n');
    s
}

pub fn model_from_json(text: &str) -> Result<CascadeModel> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ModelFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_data() {
            Error::model(path, inner.to_string())
        } else {
            Error::parse("model file", inner.to_string())
        }
    })?;
    if file.version != MODEL_VERSION {
        return Err(Error::model(
            "version",
            format!("unsupported version {}, expected {MODEL_VERSION}", file.version),
        ));
    }
    let arr = |v: Vec<f64>, name: &str| -> Result<[f64; FEATURE_DIM]> {
        let n = v.len();
        v.try_into()
            .map_err(|_| Error::model(format!("feature_stats.{name}"), format!("expected {FEATURE_DIM} values, got {n}")))
    };
    let m = CascadeModel {
        feature_stats: FeatureStats {
            means: arr(file.feature_stats.means, "means")?,
            stds: arr(file.feature_stats.stds, "stds")?,
        },
        coarse: file.coarse,
        fine: file.fine,
        refine_category: file.refine_category,
    };
    m.check().map_err(|(field, reason)| Error::model(field, reason))?;
    Ok(m)
}

pub fn save_model(cascade: &CascadeModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_json(cascade)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<CascadeModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Net whose output is fixed to `class` regardless of input.
    fn forced(outputs: usize, class: usize) -> MlpModel {
        let mut b2 = vec![0.0; outputs];
        b2[class] = 10.0;
        MlpModel::from_parts(
            vec![FEATURE_DIM, 2, outputs],
            vec![vec![vec![0.0; FEATURE_DIM]; 2], vec![vec![0.0; 2]; outputs]],
            vec![vec![0.0; 2], b2],
        )
        .unwrap()
    }

    fn stub(coarse: usize, fine: usize) -> CascadeModel {
        CascadeModel::new(FeatureStats::identity(), forced(5, coarse), Some(forced(10, fine)), Some(1)).unwrap()
    }

    #[test]
    fn coarse_only_branches_carry_no_fine_class() {
        for c in [0, 2, 3, 4] {
            let p = cascade_predict(&stub(c, 7), &SalientFeatures::default()).unwrap();
            assert_eq!((p.coarse_class, p.fine_class), (c, None));
            assert!(p.fine_probs.is_none());
        }
    }

    #[test]
    fn refined_branch_invokes_fine_net() {
        let p = cascade_predict(&stub(1, 7), &SalientFeatures::default()).unwrap();
        assert_eq!((p.coarse_class, p.fine_class), (1, Some(7)));
        assert_eq!(p.fine_probs.unwrap().len(), 10);
    }

    #[test]
    fn structural_invariants() {
        let s = FeatureStats::identity();
        assert!(CascadeModel::new(s.clone(), forced(5, 0), None, Some(1)).is_err());
        assert!(CascadeModel::new(s.clone(), forced(5, 0), Some(forced(10, 0)), None).is_err());
        assert!(CascadeModel::new(s.clone(), forced(5, 0), Some(forced(10, 0)), Some(5)).is_err());
        assert!(CascadeModel::new(s, forced(5, 0), None, None).is_ok());
    }

    #[test]
    fn json_round_trip_and_errors() {
        let m = stub(1, 3);
        let text = model_to_json(&m);
        assert_eq!(model_from_json(&text).unwrap(), m);
        assert!(matches!(model_from_json(""), Err(Error::Parse { .. })));

        let v2 = text.replacen("\"version\": 1", "\"version\": 2", 1);
        assert!(matches!(model_from_json(&v2), Err(Error::Model { field, .. }) if field == "version"));

        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        doc["fine"]["weights"][1].as_array_mut().unwrap().pop();
        let err = model_from_json(&doc.to_string()).unwrap_err();
        assert!(matches!(&err, Error::Model { field, .. } if field == "fine.layer[1]"), "{err}");

        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        doc["coarse"]["biases"][0][1] = serde_json::Value::Null;
        let err = model_from_json(&doc.to_string()).unwrap_err();
        assert!(matches!(&err, Error::Model { field, .. } if field.starts_with("coarse.biases")), "{err}");
    }
}
