//! Normalized, scaled heat kernel signatures over a principled logarithmic
//! time grid.
//!
//! The signature at vertex x and time t is
//!
//!   f_t(x) = n * [sum_{i=0}^{p-1} e^{-lambda_i t} phi_i(x)^2]
//!              / [sum_{i=1}^{p-1} e^{-lambda_i t}]
//!
//! with the zero-eigenvalue term excluded from the denominator. Dividing by
//! the manifold integral balances the time scales; multiplying by the mesh
//! size makes values comparable across meshes of different resolution.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::fem::{first_nonzero_index, SpectralBasis};

#[derive(Debug, thiserror::Error)]
pub enum HksError {
    #[error("no eigenvalue exceeds the zero tolerance; increase p or check connectivity")]
    NoNonzeroEigenvalue,
    #[error("degenerate time range: the first nonzero and largest eigenvalues coincide")]
    DegenerateRange,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("mesh size mismatch: basis has {basis}, field has {field}")]
    MeshSizeMismatch { basis: usize, field: usize },
}

/// Strictly increasing diffusion times, log-uniform between
/// `-ln(eps)/lambda_last` and `-ln(eps)/lambda_first_nonzero`.
#[derive(Debug, Clone, Serialize)]
pub struct TimeGrid {
    values: Vec<f64>,
    epsilon: f64,
}

impl TimeGrid {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn t_min(&self) -> f64 {
        self.values[0]
    }

    pub fn t_max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Log-uniform grid on explicit endpoints.
    pub fn from_endpoints(t_min: f64, t_max: f64, k: usize, epsilon: f64) -> Result<TimeGrid, HksError> {
        if k < 2 {
            return Err(HksError::InvalidParams(format!("K must be >= 2, got {k}")));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(HksError::InvalidParams(format!(
                "epsilon must be in (0, 1), got {epsilon}"
            )));
        }
        if !(t_min > 0.0) || !(t_max > t_min) {
            return Err(HksError::DegenerateRange);
        }
        let (lo, hi) = (t_min.ln(), t_max.ln());
        let step = (hi - lo) / (k - 1) as f64;
        let mut values: Vec<f64> = (0..k).map(|i| (lo + step * i as f64).exp()).collect();
        // pin the endpoints exactly
        values[0] = t_min;
        values[k - 1] = t_max;
        Ok(TimeGrid { values, epsilon })
    }
}

/// Builds the grid from a spectrum: `K` log-uniform samples of t on
/// `[-ln(eps)/lambda_{p-1}, -ln(eps)/lambda_1]`, where `lambda_1` is the
/// first eigenvalue above the zero tolerance.
pub fn time_grid(eigenvalues: &[f64], k: usize, epsilon: f64) -> Result<TimeGrid, HksError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(HksError::InvalidParams(format!(
            "epsilon must be in (0, 1), got {epsilon}"
        )));
    }
    let first = first_nonzero_index(eigenvalues).ok_or(HksError::NoNonzeroEigenvalue)?;
    let lambda_first = eigenvalues[first];
    let lambda_last = *eigenvalues.last().unwrap();
    let log_eps = -epsilon.ln();
    TimeGrid::from_endpoints(log_eps / lambda_last, log_eps / lambda_first, k, epsilon)
}

/// The n x K field of normalized, scaled signatures.
#[derive(Debug, Clone)]
pub struct HksField {
    values: DMatrix<f64>,
    grid: TimeGrid,
    mesh_size: usize,
}

impl HksField {
    #[cfg(test)]
    pub(crate) fn from_parts(values: DMatrix<f64>, grid: TimeGrid, mesh_size: usize) -> Self {
        HksField {
            values,
            grid,
            mesh_size,
        }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn mesh_size(&self) -> usize {
        self.mesh_size
    }

    /// Signature vector of one vertex across all grid times.
    pub fn row(&self, vertex: usize) -> Vec<f64> {
        self.values.row(vertex).iter().copied().collect()
    }

    /// Euclidean distance between the signature of `x` here and the
    /// signature of `y` in another field on the same grid.
    pub fn row_distance(&self, x: usize, other: &HksField, y: usize) -> f64 {
        let a = self.values.row(x);
        let b = other.values.row(y);
        a.iter()
            .zip(b.iter())
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt()
    }
}

/// Evaluates the normalized, scaled signature field of a basis on a grid.
/// The spectral sums are truncated at the basis size; the grid construction
/// keeps the truncation error below epsilon.
pub fn hks_field(basis: &SpectralBasis, grid: &TimeGrid) -> Result<HksField, HksError> {
    let p = basis.basis_size();
    if p < 2 {
        return Err(HksError::InvalidParams(format!("basis needs p >= 2, got {p}")));
    }
    if first_nonzero_index(basis.eigenvalues()).is_none() {
        return Err(HksError::NoNonzeroEigenvalue);
    }
    let n = basis.mesh_size();
    let squared = basis.eigenvectors().map(|v| v * v);
    let mut values = DMatrix::zeros(n, grid.len());
    for (k, &t) in grid.values().iter().enumerate() {
        let weights = DVector::from_fn(p, |i, _| (-basis.eigenvalues()[i] * t).exp());
        let denom: f64 = weights.iter().skip(1).sum();
        let col = &squared * &weights * (n as f64 / denom);
        values.set_column(k, &col);
    }
    Ok(HksField {
        values,
        grid: grid.clone(),
        mesh_size: n,
    })
}

/// Unnormalized truncated signature at a single time: the plain spectral sum
/// per vertex, without scaling or mesh-size normalization.
pub fn unnormalized_hks(basis: &SpectralBasis, t: f64) -> Vec<f64> {
    let weights = DVector::from_fn(basis.basis_size(), |i, _| {
        (-basis.eigenvalues()[i] * t).exp()
    });
    let squared = basis.eigenvectors().map(|v| v * v);
    (squared * weights).iter().copied().collect()
}

/// Writes `t, f_t(x)` columns for the selected vertices.
pub fn export_hks_csv(
    field: &HksField,
    vertices: &[usize],
    mut out: impl std::io::Write,
) -> std::io::Result<()> {
    write!(out, "t")?;
    for &v in vertices {
        write!(out, ",v{v}")?;
    }
    writeln!(out)?;
    for (k, &t) in field.grid().values().iter().enumerate() {
        write!(out, "{t}")?;
        for &v in vertices {
            write!(out, ",{}", field.values()[(v, k)])?;
        }
        writeln!(out)?;
    }
    Ok(())
}
