//! Held-out evaluation of a cascade and the hidden-width sweep.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::manifest::FeatureRow;
use crate::eval::metrics::Metrics;
use crate::nn::cascade::{cascade_predict, train_cascade, CascadeConfig, CascadeModel, TrainedCascade};

/// Coarse metrics over all labeled rows, and fine metrics over rows whose true
/// coarse class is the refined one. Fine rows the cascade routed elsewhere land
/// in the not-routed column.
pub fn evaluate(cascade: &CascadeModel, rows: &[FeatureRow]) -> Result<(Metrics, Option<Metrics>)> {
    let labeled: Vec<&FeatureRow> = rows.iter().filter(|r| r.coarse.is_some()).collect();
    if labeled.is_empty() {
        return Err(Error::contract("no labeled rows to evaluate"));
    }
    let preds = labeled
        .par_iter()
        .map(|r| cascade_predict(cascade, &r.features).map_err(|e| Error::in_file(&r.path, e)))
        .collect::<Result<Vec<_>>>()?;

    let coarse = Metrics::from_pairs(
        cascade.coarse_classes(),
        false,
        labeled.iter().zip(&preds).map(|(r, p)| (r.coarse.unwrap(), Some(p.coarse_class))),
    )?;

    let fine = match (cascade.refine_category, cascade.fine_classes()) {
        (Some(rc), Some(n_fine)) => {
            let mut pairs = Vec::new();
            for (r, p) in labeled.iter().zip(&preds) {
                if r.coarse == Some(rc) {
                    let truth = r
                        .fine
                        .ok_or_else(|| Error::contract(format!("{} is in the refined class but has no fine label", r.path)))?;
                    pairs.push((truth, p.fine_class));
                }
            }
            Some(Metrics::from_pairs(n_fine, true, pairs)?)
        }
        _ => None,
    };
    Ok((coarse, fine))
}

/// Selects rows by index.
pub fn select_rows(rows: &[FeatureRow], idx: &[usize]) -> Vec<FeatureRow> {
    idx.iter().map(|&i| rows[i].clone()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub hidden_width: usize,
    pub coarse: Metrics,
    pub fine: Option<Metrics>,
    pub val_rows: Vec<usize>,
}

/// Trains one cascade per hidden width. The split depends only on the rows,
/// ratio and seed, so every width is scored on the same held-out rows.
pub fn sweep_hidden_widths(rows: &[FeatureRow], widths: &[usize], base: &CascadeConfig) -> Result<Vec<SweepEntry>> {
    if widths.is_empty() {
        return Err(Error::contract("width sweep needs at least one width"));
    }
    widths
        .iter()
        .map(|&w| {
            let mut cfg = base.clone();
            cfg.train.hidden_width = w;
            let TrainedCascade { model, val_rows, .. } = train_cascade(rows, &cfg)?;
            let (coarse, fine) = evaluate(&model, &select_rows(rows, &val_rows))?;
            Ok(SweepEntry {
                hidden_width: w,
                coarse,
                fine,
                val_rows,
            })
        })
        .collect()
}

/// One row per width: overall and per-class coarse accuracy, then the same for
/// the fine stage when present.
pub fn sweep_csv(entries: &[SweepEntry]) -> String {
    let mut out = String::from("hidden_width,coarse_overall");
    let n_coarse = entries.first().map_or(0, |e| e.coarse.per_class_accuracy.len());
    let n_fine = entries
        .first()
        .and_then(|e| e.fine.as_ref())
        .map_or(0, |f| f.per_class_accuracy.len());
    for c in 0..n_coarse {
        write!(out, ",coarse_{c}").unwrap();
    }
    if n_fine > 0 {
        out.push_str(",fine_overall");
        for c in 0..n_fine {
            write!(out, ",fine_{c}").unwrap();
        }
    }
    out.push('\n');
    for e in entries {
        write!(out, "{},{}", e.hidden_width, e.coarse.overall_accuracy).unwrap();
        for a in &e.coarse.per_class_accuracy {
            write!(out, ",{a}").unwrap();
        }
        if let Some(f) = &e.fine {
            write!(out, ",{}", f.overall_accuracy).unwrap();
            for a in &f.per_class_accuracy {
                write!(out, ",{a}").unwrap();
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_sweep_report(entries: &[SweepEntry], path: &Path) -> Result<()> {
    fs::write(path, sweep_csv(entries)).map_err(|e| Error::io(path, e))
}
