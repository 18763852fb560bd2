//! Diagonal spectral-map estimation between two meshes, point-map recovery
//! and the per-vertex deviation field.
//!
//! With orthonormalized spectral bases on both meshes and signature
//! functions as known correspondences, the map between function spaces is
//! assumed diagonal; each diagonal entry is a one-parameter least-squares
//! fit over the K signature columns, optionally ridge-pulled toward unit
//! magnitude. The point map sends a source vertex to the best-scoring
//! candidates on the target and picks the one with the closest signature
//! vector.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::fem::SpectralBasis;
use crate::hks::HksField;
use crate::mesh::VertexMask;

#[derive(Debug, thiserror::Error)]
pub enum MapError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

/// Spectral coefficients of the signature columns: entry (i, k) is
/// `dot(phi_i, f_k) / sqrt(n)`. The scaling removes the sqrt(n) growth of
/// raw inner products so coefficient magnitudes are comparable across
/// meshes of different size.
#[derive(Debug, Clone)]
pub struct CoefficientMatrix {
    entries: DMatrix<f64>,
    scale: f64,
    symmetry_warnings: Vec<usize>,
}

impl CoefficientMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// The applied normalization factor 1/sqrt(n).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn symmetry_warnings(&self) -> &[usize] {
        &self.symmetry_warnings
    }

    pub fn basis_size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn sample_count(&self) -> usize {
        self.entries.ncols()
    }
}

/// The estimated diagonal map with its ridge weight and diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct FunctionalMapC {
    diag: Vec<f64>,
    q: f64,
    /// Indices inside repeated-eigenvalue clusters of either basis.
    symmetry_warnings: Vec<usize>,
    /// Rows whose coefficient energy was too small to estimate.
    degenerate_rows: Vec<usize>,
}

impl FunctionalMapC {
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn symmetry_warnings(&self) -> &[usize] {
        &self.symmetry_warnings
    }

    pub fn degenerate_rows(&self) -> &[usize] {
        &self.degenerate_rows
    }
}

/// Recovered point map with per-vertex deviations. Vertices outside the
/// region of interest keep `target = None` and zero deviation.
#[derive(Debug, Clone)]
pub struct PointMap {
    pub target: Vec<Option<usize>>,
    pub deviation: Vec<f64>,
    pub m: usize,
    pub roi_applied: bool,
}

/// Projects the signature columns onto the basis: `(Phi^T F) / sqrt(n)`.
pub fn coefficients(
    basis: &SpectralBasis,
    hks: &HksField,
) -> Result<CoefficientMatrix, MapError> {
    if basis.mesh_size() != hks.mesh_size() {
        return Err(MapError::DimensionMismatch(format!(
            "basis is over {} vertices but signatures cover {}",
            basis.mesh_size(),
            hks.mesh_size()
        )));
    }
    let scale = 1.0 / (basis.mesh_size() as f64).sqrt();
    let entries = basis.eigenvectors().transpose() * hks.values() * scale;
    Ok(CoefficientMatrix {
        entries,
        scale,
        symmetry_warnings: basis.symmetry_warnings().to_vec(),
    })
}

/// Threshold on a row's coefficient energy below which its diagonal entry
/// is reported as degenerate and set to zero.
pub const DEGENERATE_ROW_TOL: f64 = 1e-14;

/// Per-row least squares `c0 = <a_j, b_j> / <a_j, a_j>`, then the ridge
/// convex combination `c = (1-q) c0 + q sign(c0)`, which never flips the
/// sign and pulls magnitudes toward 1.
pub fn estimate_c(
    a: &CoefficientMatrix,
    b: &CoefficientMatrix,
    q: f64,
) -> Result<FunctionalMapC, MapError> {
    if a.basis_size() != b.basis_size() || a.sample_count() != b.sample_count() {
        return Err(MapError::DimensionMismatch(format!(
            "coefficient matrices are {}x{} and {}x{}",
            a.basis_size(),
            a.sample_count(),
            b.basis_size(),
            b.sample_count()
        )));
    }
    if !(0.0..1.0).contains(&q) {
        return Err(MapError::InvalidParams(format!(
            "ridge weight q must be in [0, 1), got {q}"
        )));
    }
    let p = a.basis_size();
    let mut diag = Vec::with_capacity(p);
    let mut degenerate_rows = Vec::new();
    for j in 0..p {
        let aj = a.entries.row(j);
        let bj = b.entries.row(j);
        let denom = aj.dot(&aj);
        if denom < DEGENERATE_ROW_TOL {
            degenerate_rows.push(j);
            diag.push(0.0);
            continue;
        }
        let c0 = aj.dot(&bj) / denom;
        let c = (1.0 - q) * c0 + q * sign(c0);
        diag.push(c);
    }

    let mut warnings: Vec<usize> = a
        .symmetry_warnings
        .iter()
        .chain(b.symmetry_warnings.iter())
        .copied()
        .collect();
    warnings.sort_unstable();
    warnings.dedup();

    Ok(FunctionalMapC {
        diag,
        q,
        symmetry_warnings: warnings,
        degenerate_rows,
    })
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// The `m` best-scoring candidates, ranked by score descending with ties
/// going to the lower index.
fn top_m_candidates(scores: &DVector<f64>, m: usize) -> Vec<usize> {
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(m + 1);
    for (idx, &s) in scores.iter().enumerate() {
        let beats = |&(bs, bi): &(f64, usize)| s > bs || (s == bs && idx < bi);
        let pos = best.partition_point(|entry| !beats(entry));
        if pos < m {
            best.insert(pos, (s, idx));
            best.truncate(m);
        }
    }
    best.into_iter().map(|(_, i)| i).collect()
}

/// Recovers the point map. For each source vertex inside the region of
/// interest, the score vector over the target mesh is
/// `PhiB * (diag(c) * row_x(PhiA))`; the m top-scoring target vertices are
/// re-ranked by signature distance and the closest wins (ties to the lower
/// vertex index). `PhiB * diag(c)` is materialized once.
pub fn recover_point_map(
    basis_a: &SpectralBasis,
    basis_b: &SpectralBasis,
    cmap: &FunctionalMapC,
    hks_a: &HksField,
    hks_b: &HksField,
    m: usize,
    roi: Option<&VertexMask>,
) -> Result<PointMap, MapError> {
    let p = basis_a.basis_size();
    if basis_b.basis_size() != p || cmap.diag.len() != p {
        return Err(MapError::DimensionMismatch(format!(
            "basis sizes differ: A has {p}, B has {}, map has {}",
            basis_b.basis_size(),
            cmap.diag.len()
        )));
    }
    let (n_a, n_b) = (basis_a.mesh_size(), basis_b.mesh_size());
    if hks_a.mesh_size() != n_a || hks_b.mesh_size() != n_b {
        return Err(MapError::DimensionMismatch(
            "signature fields do not match the bases".into(),
        ));
    }
    if hks_a.grid().len() != hks_b.grid().len() {
        return Err(MapError::DimensionMismatch(
            "signature fields use different grid sizes".into(),
        ));
    }
    if m == 0 || m > n_b {
        return Err(MapError::InvalidParams(format!(
            "candidate count m must be in [1, {n_b}], got {m}"
        )));
    }
    if let Some(mask) = roi {
        if mask.len() != n_a {
            return Err(MapError::DimensionMismatch(format!(
                "roi has {} flags for {n_a} vertices",
                mask.len()
            )));
        }
    }

    // PhiB diag(c), reused for every source vertex
    let mut weighted_b = basis_b.eigenvectors().clone();
    for (j, &c) in cmap.diag.iter().enumerate() {
        weighted_b.column_mut(j).scale_mut(c);
    }

    let results: Vec<(Option<usize>, f64)> = (0..n_a)
        .into_par_iter()
        .map(|x| {
            if let Some(mask) = roi {
                if !mask.get(x) {
                    return (None, 0.0);
                }
            }
            let g = basis_a.eigenvectors().row(x).transpose();
            let scores = &weighted_b * &g;
            let candidates = top_m_candidates(&scores, m);
            let mut best_y = candidates[0];
            let mut best_d = hks_a.row_distance(x, hks_b, best_y);
            for &y in &candidates[1..] {
                let d = hks_a.row_distance(x, hks_b, y);
                if d < best_d || (d == best_d && y < best_y) {
                    best_d = d;
                    best_y = y;
                }
            }
            (Some(best_y), best_d)
        })
        .collect();

    let (target, deviation) = results.into_iter().unzip();
    Ok(PointMap {
        target,
        deviation,
        m,
        roi_applied: roi.is_some(),
    })
}

/// Mean Euclidean distance between mapped and ground-truth target
/// positions. Unmapped vertices (outside a region of interest) contribute
/// zero, mirroring the filtered deviation definition.
pub fn accuracy(map: &PointMap, ground_truth: &[usize], coords_b: &[[f64; 3]]) -> f64 {
    assert_eq!(map.target.len(), ground_truth.len());
    let total: f64 = map
        .target
        .iter()
        .zip(ground_truth)
        .filter_map(|(t, &g)| t.map(|t| crate::mesh::dist(coords_b[t], coords_b[g])))
        .sum();
    total / map.target.len() as f64
}
