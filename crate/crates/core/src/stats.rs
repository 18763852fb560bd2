//! Single-threshold calibration from in-control parts and significance
//! flagging of suspect deviations.
//!
//! Per-vertex deviations within one part are correlated and deviations from
//! different parts are not directly comparable, so the test statistic is
//! the per-part maximum: with m0 in-control maxima, the
//! (floor(alpha m0) + 1)-th largest acts as the threshold, which controls
//! the family-wise error rate at level alpha.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::mesh::{TriangleMesh, VertexMask};
use crate::pipeline::{DeviationPipeline, PipelineError, RoiProvenance};

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("no in-control parts were provided")]
    EmptyPhase1,
    #[error("alpha must be in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("pipeline failed on part {index}: {source}")]
    PartFailed {
        index: usize,
        #[source]
        source: PipelineError,
    },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("configuration does not match the calibrated model (model {model}, current {current})")]
    ConfigMismatch { model: String, current: String },
}

/// Calibrated threshold: the in-control maxima (sorted nonincreasing), the
/// level, and the selected order statistic.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ThresholdModel {
    /// Per-part maxima, sorted nonincreasing.
    pub maxima: Vec<f64>,
    pub alpha: f64,
    pub threshold: f64,
    pub m0: usize,
    /// Set when m0 < ceil(1/alpha): the order statistic degenerates to the
    /// plain maximum and the test is vacuous at this level.
    pub insufficient_phase1: bool,
    /// Digest of the calibration configuration; diagnosis enforces it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
}

impl ThresholdModel {
    pub fn attach_config(mut self, config: &PipelineConfig) -> Self {
        self.config_digest = Some(config.digest());
        self
    }
}

/// Per-vertex diagnosis of one suspect part.
#[derive(Debug)]
pub struct DiagnosisReport {
    pub deviation: Vec<f64>,
    pub significant: VertexMask,
    pub threshold: f64,
    pub meta: ReportMeta,
    pub target: Vec<Option<usize>>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReportMeta {
    pub config: PipelineConfig,
    pub m0: usize,
    pub alpha: f64,
    pub roi_provenance: RoiProvenance,
    pub symmetry_warnings: Vec<usize>,
    pub degenerate_rows: Vec<usize>,
}

/// Runs the full deviation pipeline for every in-control part against the
/// nominal mesh and records each part's maximum deviation, in input order.
/// When the configuration enables the recursive region of interest, each
/// part is filtered by its own region so Phase-I maxima and the later test
/// statistic share a null distribution.
pub fn phase1_maxima(
    parts: &[TriangleMesh],
    nominal: &TriangleMesh,
    config: &PipelineConfig,
) -> Result<Vec<f64>, StatsError> {
    if parts.is_empty() {
        return Err(StatsError::EmptyPhase1);
    }
    let pipeline = DeviationPipeline::new(nominal, config)?;
    parts
        .par_iter()
        .enumerate()
        .map(|(index, part)| {
            pipeline
                .analyze(part, None)
                .map(|a| a.max_deviation())
                .map_err(|source| StatsError::PartFailed { index, source })
        })
        .collect()
}

/// The threshold is the `(floor(alpha m0) + 1)`-th largest maximum. A tiny
/// guard absorbs the floating-point representation of `alpha * m0` so the
/// order statistic matches exact arithmetic.
pub fn calibrate(maxima: &[f64], alpha: f64) -> Result<ThresholdModel, StatsError> {
    if maxima.is_empty() {
        return Err(StatsError::EmptyPhase1);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidAlpha(alpha));
    }
    let m0 = maxima.len();
    let mut sorted = maxima.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let k = (alpha * m0 as f64 + 1e-9).floor() as usize + 1;
    let k = k.min(m0);
    let threshold = sorted[k - 1];
    let insufficient = (m0 as f64) < (1.0 / alpha - 1e-9).ceil();
    Ok(ThresholdModel {
        maxima: sorted,
        alpha,
        threshold,
        m0,
        insufficient_phase1: insufficient,
        config_digest: None,
    })
}

/// Flags vertices whose deviation strictly exceeds the threshold, inside
/// the region of interest when one is given. Ties at the threshold are not
/// significant.
pub fn flag_significant(
    deviation: &[f64],
    threshold: f64,
    roi: Option<&VertexMask>,
) -> VertexMask {
    VertexMask::new(
        deviation
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let inside = roi.map_or(true, |m| m.get(i));
                inside && d > threshold
            })
            .collect(),
    )
}

/// Diagnoses a suspect part against a calibrated model. The configuration
/// must be identical to the calibration configuration.
pub fn diagnose(
    suspect: &TriangleMesh,
    nominal: &TriangleMesh,
    model: &ThresholdModel,
    roi: Option<&VertexMask>,
    config: &PipelineConfig,
) -> Result<DiagnosisReport, StatsError> {
    let current = config.digest();
    match &model.config_digest {
        Some(digest) if *digest == current => {}
        Some(digest) => {
            return Err(StatsError::ConfigMismatch {
                model: digest.clone(),
                current,
            })
        }
        None => {
            return Err(StatsError::ConfigMismatch {
                model: "<absent>".into(),
                current,
            })
        }
    }

    let pipeline = DeviationPipeline::new(nominal, config)?;
    let analysis = pipeline.analyze(suspect, roi)?;
    let significant = flag_significant(
        &analysis.point_map.deviation,
        model.threshold,
        analysis.roi_mask.as_ref(),
    );
    Ok(DiagnosisReport {
        deviation: analysis.point_map.deviation.clone(),
        significant,
        threshold: model.threshold,
        meta: ReportMeta {
            config: config.clone(),
            m0: model.m0,
            alpha: model.alpha,
            roi_provenance: analysis.roi_provenance.clone(),
            symmetry_warnings: analysis.map_c.symmetry_warnings().to_vec(),
            degenerate_rows: analysis.map_c.degenerate_rows().to_vec(),
        },
        target: analysis.point_map.target,
    })
}
