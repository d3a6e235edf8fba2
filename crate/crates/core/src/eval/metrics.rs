//! Confusion matrices, per-class accuracies, and their report files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::pgm;

/// Label of the extra column counting rows the cascade never sent to the fine net.
pub const NOT_ROUTED: &str = "not_routed";
const CELL_PX: usize = 16;

/// Rows are true classes, columns predicted classes. An optional trailing
/// column collects rows that received no prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
    not_routed: bool,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize, not_routed: bool) -> Self {
        let cols = n_classes + usize::from(not_routed);
        Self {
            counts: vec![vec![0; cols]; n_classes],
            not_routed,
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>, not_routed: bool) -> Result<Self> {
        let n = counts.len();
        let cols = n + usize::from(not_routed);
        if n == 0 || counts.iter().any(|r| r.len() != cols) {
            return Err(Error::contract(format!("confusion counts must be {n}x{cols}")));
        }
        Ok(Self { counts, not_routed })
    }

    /// Tallies one row; `predicted = None` goes to the not-routed column.
    pub fn record(&mut self, actual: usize, predicted: Option<usize>) -> Result<()> {
        let n = self.n_classes();
        if actual >= n {
            return Err(Error::contract(format!("true class {actual} outside 0..{n}")));
        }
        let col = match predicted {
            Some(p) if p < n => p,
            Some(p) => return Err(Error::contract(format!("predicted class {p} outside 0..{n}"))),
            None if self.not_routed => n,
            None => return Err(Error::contract("matrix has no not-routed column")),
        };
        self.counts[actual][col] += 1;
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn has_not_routed(&self) -> bool {
        self.not_routed
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|c| self.counts[c][c]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub per_class_accuracy: Vec<f64>,
    pub overall_accuracy: f64,
    pub confusion: ConfusionMatrix,
}

impl Metrics {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        let per_class_accuracy = (0..confusion.n_classes())
            .map(|c| match confusion.row_sum(c) {
                0 => 0.0,
                n => confusion.counts[c][c] as f64 / n as f64,
            })
            .collect();
        let overall_accuracy = match confusion.total() {
            0 => 0.0,
            n => confusion.trace() as f64 / n as f64,
        };
        Self {
            per_class_accuracy,
            overall_accuracy,
            confusion,
        }
    }

    /// Builds metrics from `(true, predicted)` pairs.
    pub fn from_pairs(
        n_classes: usize,
        not_routed: bool,
        pairs: impl IntoIterator<Item = (usize, Option<usize>)>,
    ) -> Result<Self> {
        let mut cm = ConfusionMatrix::new(n_classes, not_routed);
        for (t, p) in pairs {
            cm.record(t, p)?;
        }
        Ok(Self::from_confusion(cm))
    }

    pub fn empty_classes(&self) -> Vec<usize> {
        (0..self.confusion.n_classes())
            .filter(|&c| self.confusion.row_sum(c) == 0)
            .collect()
    }
}

pub fn report_paths(prefix: &Path) -> [PathBuf; 3] {
    let with = |suffix: &str| {
        let mut s = prefix.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    };
    [with("_confusion.csv"), with("_metrics.csv"), with("_confusion.pgm")]
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn confusion_csv(cm: &ConfusionMatrix) -> String {
    let n = cm.n_classes();
    let mut out = String::from("true\\pred");
    for c in 0..n {
        write!(out, ",{c}").unwrap();
    }
    if cm.has_not_routed() {
        write!(out, ",{NOT_ROUTED}").unwrap();
    }
    out.push('\n');
    for (c, row) in cm.counts().iter().enumerate() {
        write!(out, "{c}").unwrap();
        for v in row {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn metrics_csv(m: &Metrics) -> String {
    let mut out = String::from("class,accuracy,support\n");
    for (c, acc) in m.per_class_accuracy.iter().enumerate() {
        writeln!(out, "{c},{acc},{}", m.confusion.row_sum(c)).unwrap();
    }
    writeln!(out, "overall,{},{}", m.overall_accuracy, m.confusion.total()).unwrap();
    let empty = m.empty_classes();
    if !empty.is_empty() {
        let list: Vec<String> = empty.iter().map(usize::to_string).collect();
        writeln!(out, "# classes {} had no rows; accuracy written as 0", list.join(" ")).unwrap();
    }
    out
}

/// Row-normalized heatmap; each row's largest count maps to 255.
pub fn confusion_heatmap(cm: &ConfusionMatrix) -> Vec<Vec<u8>> {
    let mut img = Vec::new();
    for row in cm.counts() {
        let max = row.iter().copied().max().unwrap_or(0);
        let line: Vec<u8> = row
            .iter()
            .flat_map(|&v| {
                let g = if max == 0 { 0 } else { pgm::gray_level(v as f64 / max as f64) };
                std::iter::repeat_n(g, CELL_PX)
            })
            .collect();
        img.extend(std::iter::repeat_n(line, CELL_PX));
    }
    img
}

/// Writes `<prefix>_confusion.csv`, `<prefix>_metrics.csv` and `<prefix>_confusion.pgm`.
pub fn write_report(metrics: &Metrics, prefix: &Path) -> Result<()> {
    let [conf, met, img] = report_paths(prefix);
    write_text(&conf, &confusion_csv(&metrics.confusion))?;
    write_text(&met, &metrics_csv(metrics))?;
    pgm::write_pgm(&confusion_heatmap(&metrics.confusion), &img)
}

/// Parses a metrics file back into `(per_class_accuracy, overall_accuracy)`.
pub fn read_metrics_csv(path: &Path) -> Result<(Vec<f64>, f64)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let what = path.display().to_string();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    if lines.next() != Some("class,accuracy,support") {
        return Err(Error::parse(what, "missing metrics header"));
    }
    let mut per_class = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::parse(what, format!("bad row '{line}'")));
        }
        let acc: f64 = fields[1]
            .parse()
            .map_err(|_| Error::parse(what.clone(), format!("bad accuracy '{}'", fields[1])))?;
        if fields[0] == "overall" {
            return Ok((per_class, acc));
        }
        per_class.push(acc);
    }
    Err(Error::parse(what, "missing overall row"))
}
