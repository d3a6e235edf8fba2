use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Rectangular,
    Hann,
}

impl WindowKind {
    /// Window coefficients of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowKind::Rectangular => vec![1.0; n],
            WindowKind::Hann => hann(n),
        }
    }
}

impl fmt::Display for WindowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WindowKind::Rectangular => "rectangular",
            WindowKind::Hann => "hann",
        })
    }
}

impl FromStr for WindowKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rectangular" | "rect" => Ok(WindowKind::Rectangular),
            "hann" => Ok(WindowKind::Hann),
            other => Err(format!("unknown window '{other}'")),
        }
    }
}

/// Symmetric Hann window, `w[n] = 0.5·(1 − cos(2πn/(N−1)))`.
pub fn hann(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => {
            let denom = (n - 1) as f64;
            (0..n)
                .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / denom).cos()))
                .collect()
        }
    }
}

pub fn apply_window(frame: &[f64], kind: WindowKind) -> Vec<f64> {
    match kind {
        WindowKind::Rectangular => frame.to_vec(),
        WindowKind::Hann => frame.iter().zip(hann(frame.len())).map(|(x, w)| x * w).collect(),
    }
}
