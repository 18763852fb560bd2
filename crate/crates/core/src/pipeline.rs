//! End-to-end deviation pipeline against a fixed nominal mesh.
//!
//! The nominal spectral basis is computed once and reused across suspect
//! parts. Signature fields for a pair are evaluated on a shared time grid
//! whose endpoints come from the combined spectra (the larger of the two
//! faithful lower bounds, the smaller of the two informative upper bounds),
//! so signature vectors are compared at identical diffusion times.

use serde::Serialize;

use crate::config::PipelineConfig;
use crate::fem::{self, FemError, SpectralBasis};
use crate::funcmap::{self, FunctionalMapC, MapError, PointMap};
use crate::hks::{self, HksError, TimeGrid};
use crate::mesh::{TriangleMesh, VertexMask};
use crate::roi::{self, RoiError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Hks(#[from] HksError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Roi(#[from] RoiError),
}

/// Where the applied region of interest came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoiProvenance {
    None,
    Explicit,
    Recursive { iters: usize },
}

/// One analyzed suspect part.
#[derive(Debug)]
pub struct Analysis {
    pub point_map: PointMap,
    pub map_c: FunctionalMapC,
    pub suspect_basis: SpectralBasis,
    pub roi_mask: Option<VertexMask>,
    pub roi_provenance: RoiProvenance,
    pub grid: TimeGrid,
}

impl Analysis {
    pub fn max_deviation(&self) -> f64 {
        self.point_map
            .deviation
            .iter()
            .fold(0.0f64, |a, &d| a.max(d))
    }
}

/// Shared grid for a mesh pair: `t_min` is the larger of the two faithful
/// lower endpoints, `t_max` the smaller of the two informative upper ones.
pub fn common_time_grid(
    basis_a: &SpectralBasis,
    basis_b: &SpectralBasis,
    k: usize,
    epsilon: f64,
) -> Result<TimeGrid, HksError> {
    let first = |b: &SpectralBasis| -> Result<f64, HksError> {
        let i = fem::first_nonzero_index(b.eigenvalues()).ok_or(HksError::NoNonzeroEigenvalue)?;
        Ok(b.eigenvalues()[i])
    };
    let log_eps = -epsilon.ln();
    let last_min = basis_a.eigenvalues()[basis_a.basis_size() - 1]
        .min(basis_b.eigenvalues()[basis_b.basis_size() - 1]);
    let first_max = first(basis_a)?.max(first(basis_b)?);
    TimeGrid::from_endpoints(log_eps / last_min, log_eps / first_max, k, epsilon)
}

/// Pipeline bound to one nominal mesh and configuration.
pub struct DeviationPipeline {
    config: PipelineConfig,
    nominal: TriangleMesh,
    nominal_basis: SpectralBasis,
}

impl DeviationPipeline {
    pub fn new(nominal: &TriangleMesh, config: &PipelineConfig) -> Result<Self, PipelineError> {
        let nominal_basis = fem::spectral_basis(nominal, config.degree, config.p)?;
        Ok(DeviationPipeline {
            config: config.clone(),
            nominal: nominal.clone(),
            nominal_basis,
        })
    }

    /// Builds around a precomputed nominal basis (e.g. from the cache).
    pub fn with_basis(
        nominal: &TriangleMesh,
        basis: SpectralBasis,
        config: &PipelineConfig,
    ) -> Self {
        DeviationPipeline {
            config: config.clone(),
            nominal: nominal.clone(),
            nominal_basis: basis,
        }
    }

    pub fn nominal_basis(&self) -> &SpectralBasis {
        &self.nominal_basis
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// Full analysis of one suspect part. An explicit mask wins over the
    /// recursive search; with `roi_iters = 0` and no mask, the whole mesh
    /// is scored.
    pub fn analyze(
        &self,
        suspect: &TriangleMesh,
        explicit_roi: Option<&VertexMask>,
    ) -> Result<Analysis, PipelineError> {
        let suspect_basis = fem::spectral_basis(suspect, self.config.degree, self.config.p)?;

        let (roi_mask, roi_provenance) = match explicit_roi {
            Some(mask) => (Some(mask.clone()), RoiProvenance::Explicit),
            None if self.config.roi_iters > 0 => {
                let result = roi::recursive_roi(
                    suspect,
                    &self.nominal,
                    self.config.roi_iters,
                    self.config.degree,
                )?;
                (
                    Some(result.mask),
                    RoiProvenance::Recursive {
                        iters: self.config.roi_iters,
                    },
                )
            }
            None => (None, RoiProvenance::None),
        };

        let grid = common_time_grid(
            &suspect_basis,
            &self.nominal_basis,
            self.config.k,
            self.config.epsilon,
        )?;
        let hks_suspect = hks::hks_field(&suspect_basis, &grid)?;
        let hks_nominal = hks::hks_field(&self.nominal_basis, &grid)?;

        let coeff_suspect = funcmap::coefficients(&suspect_basis, &hks_suspect)?;
        let coeff_nominal = funcmap::coefficients(&self.nominal_basis, &hks_nominal)?;
        let map_c = funcmap::estimate_c(&coeff_suspect, &coeff_nominal, self.config.q)?;

        let point_map = funcmap::recover_point_map(
            &suspect_basis,
            &self.nominal_basis,
            &map_c,
            &hks_suspect,
            &hks_nominal,
            self.config.m,
            roi_mask.as_ref(),
        )?;

        Ok(Analysis {
            point_map,
            map_c,
            suspect_basis,
            roi_mask,
            roi_provenance,
            grid,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::FemDegree;

    fn small_config() -> PipelineConfig {
        PipelineConfig {
            p: 24,
            k: 16,
            m: 5,
            q: 0.8,
            epsilon: 1e-4,
            degree: FemDegree::P1,
            alpha: 0.05,
            roi_iters: 0,
        }
    }

    #[test]
    fn self_analysis_has_negligible_deviation() {
        let mesh = crate::synth::primitives::toothed_block([8, 6, 4]);
        let pipeline = DeviationPipeline::new(&mesh, &small_config()).unwrap();
        let analysis = pipeline.analyze(&mesh, None).unwrap();
        assert!(analysis.max_deviation() < 1e-8, "max {}", analysis.max_deviation());
        assert_eq!(analysis.roi_provenance, RoiProvenance::None);
    }

    #[test]
    fn common_grid_is_the_own_grid_for_identical_spectra() {
        let mesh = crate::synth::primitives::toothed_block([8, 6, 4]);
        let basis = fem::spectral_basis(&mesh, FemDegree::P1, 12).unwrap();
        let own = hks::time_grid(basis.eigenvalues(), 10, 1e-4).unwrap();
        let common = common_time_grid(&basis, &basis, 10, 1e-4).unwrap();
        assert_eq!(own.values(), common.values());
    }

    #[test]
    fn common_grid_uses_binding_endpoints() {
        let mesh_a = crate::synth::primitives::toothed_block([8, 6, 4]);
        let mesh_b = crate::synth::primitives::toothed_block([12, 8, 6]);
        let a = fem::spectral_basis(&mesh_a, FemDegree::P1, 16).unwrap();
        let b = fem::spectral_basis(&mesh_b, FemDegree::P1, 16).unwrap();
        let grid = common_time_grid(&a, &b, 8, 1e-4).unwrap();
        let log_eps = -(1e-4f64).ln();
        let t_min_expected = log_eps / a.eigenvalues()[15].min(b.eigenvalues()[15]);
        assert!((grid.t_min() - t_min_expected).abs() < 1e-12 * t_min_expected);
        assert!(grid.t_max() > grid.t_min());
    }
}
