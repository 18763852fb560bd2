//! Registration-free localization of shape defects on scanned triangle meshes.
//!
//! The pipeline compares a suspect mesh against a nominal mesh without ever
//! aligning them in ambient space: Laplace-Beltrami spectra (FEM, linear or
//! cubic elements) give an intrinsic basis, heat kernel signatures give
//! corresponding functions, a diagonal spectral map recovers a point-to-point
//! correspondence, and per-vertex deviations are thresholded against an
//! order statistic of in-control maxima to flag statistically significant
//! defect regions with family-wise error control.

pub mod config;
pub mod fem;
pub mod funcmap;
pub mod hash;
pub mod hks;
pub mod mesh;
pub mod pipeline;
pub mod roi;
pub mod sparse;
pub mod stats;
pub mod synth;

pub use config::PipelineConfig;
pub use fem::{FemDegree, OperatorPair, SpectralBasis};
pub use funcmap::{CoefficientMatrix, FunctionalMapC, PointMap};
pub use hks::{HksField, TimeGrid};
pub use mesh::{SubmeshResult, TriangleMesh, VertexMask};
pub use roi::{PartitionPair, RoiResult};
pub use stats::{DiagnosisReport, ThresholdModel};
pub use synth::{GroundTruth, PartSpec};
