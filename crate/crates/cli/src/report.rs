//! Evaluation reports and the Chamfer unit convention.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

/// Chamfer in units of one tenth of the object's longest bounding-box side.
pub fn paper_units(chamfer_raw: f64, longest_side: f64) -> f64 {
    chamfer_raw / (0.1 * longest_side).powi(2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    /// Seconds since the Unix epoch; excluded from reproducibility checks.
    pub created_unix: u64,
}

impl ReportMetadata {
    pub fn new(command: &str, seed: u64, config_hash: String) -> Self {
        let created_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self {
            command: command.to_string(),
            seed,
            config_hash,
            created_unix,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub chamfer_raw: f64,
    pub chamfer_paper_units: f64,
    /// Longest bounding-box side of the reference cloud the Chamfer was measured against.
    pub longest_side: f64,
    /// Normal consistency of the method (geodesic neighborhoods), when the
    /// reference has normals.
    pub normal_consistency: Option<f64>,
    pub normal_euc: Option<f64>,
    pub normal_geo: Option<f64>,
    /// Mean of `|g_hat - g| / g` against the graph geodesics.
    pub geodesic_mre: Option<f64>,
    /// Majority-label purity of the lifting-coordinate charts.
    pub chart_purity: Option<f64>,
    pub metadata: ReportMetadata,
}

impl EvalReport {
    pub fn new(chamfer_raw: f64, longest_side: f64, metadata: ReportMetadata) -> Self {
        Self {
            chamfer_raw,
            chamfer_paper_units: paper_units(chamfer_raw, longest_side),
            longest_side,
            normal_consistency: None,
            normal_euc: None,
            normal_geo: None,
            geodesic_mre: None,
            chart_purity: None,
            metadata,
        }
    }

    pub fn units_consistent(&self) -> bool {
        let expected = paper_units(self.chamfer_raw, self.longest_side);
        (self.chamfer_paper_units - expected).abs() <= 1e-9 * expected.abs().max(1.0)
    }
}
