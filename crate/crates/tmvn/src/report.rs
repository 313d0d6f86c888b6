//! Structured run output.

use crate::spec::ProblemSpec;
use crate::Scaled;
use serde::{Deserialize, Serialize};

/// Wall-clock seconds per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub downward: f64,
    pub leaves: f64,
    pub upward: f64,
    pub total: f64,
}

impl Timings {
    pub fn add(&self, o: &Timings) -> Timings {
        Timings {
            downward: self.downward + o.downward,
            leaves: self.leaves + o.leaves,
            upward: self.upward + o.upward,
            total: self.total + o.total,
        }
    }
}

/// Per-level summary of node functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDiagnostic {
    pub level: usize,
    /// Largest `ln max|h|` among the level's nodes.
    pub max_log_abs: f64,
    /// Largest relative magnitude on the outer grid line.
    pub edge_leakage: f64,
}

impl LevelDiagnostic {
    pub fn aggregate(raw: Vec<(usize, f64, f64)>) -> Vec<LevelDiagnostic> {
        let depth = raw.iter().map(|r| r.0).max().map_or(0, |d| d + 1);
        let mut out: Vec<LevelDiagnostic> = (0..depth)
            .map(|level| LevelDiagnostic { level, max_log_abs: f64::NEG_INFINITY, edge_leakage: 0.0 })
            .collect();
        for (level, log, leak) in raw {
            let d = &mut out[level];
            d.max_log_abs = d.max_log_abs.max(log);
            d.edge_leakage = d.edge_leakage.max(leak);
        }
        out
    }
}

/// Everything needed to interpret and replay one computation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    /// φ as a number, `null` when outside the double range.
    pub phi: Option<f64>,
    /// φ in scientific notation with 17 significant digits (valid at any magnitude).
    pub phi_text: String,
    pub log10_phi: f64,
    /// φ as `mantissa · e^{log_scale}`.
    pub phi_scaled: Scaled,
    pub m: usize,
    pub n: usize,
    pub model: String,
    pub backend: String,
    pub nufft_tol: f64,
    pub threads: usize,
    pub timings: Timings,
    pub condition_estimate: f64,
    pub imag_ratio: f64,
    pub max_range: Option<f64>,
    pub node_ranges: Option<Vec<[f64; 2]>>,
    pub seed: Option<u64>,
    pub z: Option<Vec<f64>>,
    pub level_diagnostics: Vec<LevelDiagnostic>,
    pub version: String,
    pub spec: ProblemSpec,
}
