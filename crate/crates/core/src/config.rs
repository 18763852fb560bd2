//! Shared pipeline configuration. The defaults are the working values for
//! meshes of a few thousand vertices; every output artifact embeds the full
//! configuration so runs are reproducible and comparable.

use serde::{Deserialize, Serialize};

use crate::fem::FemDegree;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PipelineConfig {
    /// Number of eigenpairs in the spectral basis.
    #[serde(default = "default_p")]
    pub p: usize,
    /// Number of diffusion times in the signature grid.
    #[serde(rename = "K", default = "default_k")]
    pub k: usize,
    /// Candidate count when recovering the point map.
    #[serde(default = "default_m")]
    pub m: usize,
    /// Ridge weight pulling map coefficients toward unit magnitude.
    #[serde(default = "default_q")]
    pub q: f64,
    /// Truncation precision for the signature time range.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_degree")]
    pub degree: FemDegree,
    /// Significance level for the single-threshold test.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Automatic region-of-interest iterations; 0 disables the recursion.
    #[serde(default)]
    pub roi_iters: usize,
}

fn default_p() -> usize {
    200
}
fn default_k() -> usize {
    100
}
fn default_m() -> usize {
    5
}
fn default_q() -> f64 {
    0.8
}
fn default_epsilon() -> f64 {
    1e-4
}
fn default_degree() -> FemDegree {
    FemDegree::P3
}
fn default_alpha() -> f64 {
    0.05
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            p: default_p(),
            k: default_k(),
            m: default_m(),
            q: default_q(),
            epsilon: default_epsilon(),
            degree: default_degree(),
            alpha: default_alpha(),
            roi_iters: 0,
        }
    }
}

impl PipelineConfig {
    /// Hash of the canonical JSON encoding; calibration stores this and
    /// diagnosis refuses to run under a different configuration.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        crate::hash::bytes_digest_hex(json.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_values() {
        let c = PipelineConfig::default();
        assert_eq!(c.p, 200);
        assert_eq!(c.k, 100);
        assert_eq!(c.m, 5);
        assert_eq!(c.q, 0.8);
        assert_eq!(c.epsilon, 1e-4);
        assert_eq!(c.degree, FemDegree::P3);
        assert_eq!(c.alpha, 0.05);
        assert_eq!(c.roi_iters, 0);
    }

    #[test]
    fn json_keys_are_flat_and_named_as_documented() {
        let json = serde_json::to_string(&PipelineConfig::default()).unwrap();
        for key in ["\"p\"", "\"K\"", "\"m\"", "\"q\"", "\"epsilon\"", "\"degree\"", "\"alpha\"", "\"roiIters\""] {
            assert!(json.contains(key), "missing {key} in {json}");
        }
        let back: PipelineConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, PipelineConfig::default());
    }

    #[test]
    fn digest_changes_with_any_field() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.q = 0.5;
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: PipelineConfig = serde_json::from_str(r#"{"p": 60, "degree": "p1"}"#).unwrap();
        assert_eq!(c.p, 60);
        assert_eq!(c.degree, FemDegree::P1);
        assert_eq!(c.k, 100);
    }
}
