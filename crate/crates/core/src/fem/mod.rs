//! FEM discretization of the Laplace-Beltrami operator on triangle meshes
//! (linear and cubic Lagrange elements), the generalized eigensolve for the
//! smallest eigenpairs, and the Euclidean-orthonormalized spectral basis.

pub mod cache;
mod elements;
pub mod eigen;

pub use eigen::EigenPairs;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::mesh::{TriangleMesh, AREA_TOL_FACTOR};
use crate::sparse::SymCsr;
use elements::{element_stiffness, reference_element, triangle_metric};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FemDegree {
    /// Linear Lagrange elements: one dof per vertex.
    P1,
    /// Cubic Lagrange elements: dofs at vertices, two per edge, one per face.
    P3,
}

impl std::fmt::Display for FemDegree {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FemDegree::P1 => write!(f, "p1"),
            FemDegree::P3 => write!(f, "p3"),
        }
    }
}

impl std::str::FromStr for FemDegree {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "p1" => Ok(FemDegree::P1),
            "p3" => Ok(FemDegree::P3),
            other => Err(format!("unknown FEM degree '{other}' (expected p1 or p3)")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FemError {
    #[error("face {face} is degenerate (area {area:.3e} <= tol {tol:.3e})")]
    DegenerateElement { face: usize, area: f64, tol: f64 },
    #[error("vertex {vertex} belongs to no face; the mass matrix would be singular")]
    IsolatedVertex { vertex: usize },
    #[error("p must satisfy 1 <= p < {limit}, got {p}")]
    InvalidEigenCount { p: usize, limit: usize },
    #[error(transparent)]
    Eigen(#[from] eigen::EigenError),
    #[error("rank deficiency at column {column}: residual norm collapsed to {norm:.3e}")]
    RankDeficient { column: usize, norm: f64 },
}

/// Galerkin stiffness and consistent mass matrices plus the dof layout.
#[derive(Debug, Clone)]
pub struct OperatorPair {
    pub stiffness: SymCsr,
    pub mass: SymCsr,
    /// Marks which dofs coincide with mesh vertices (always the leading block).
    pub dof_to_vertex: Vec<bool>,
}

impl OperatorPair {
    pub fn dof_count(&self) -> usize {
        self.dof_to_vertex.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.dof_to_vertex.iter().filter(|&&b| b).count()
    }
}

/// The first `p` Laplace-Beltrami eigenvalues with vertex-restricted,
/// Euclidean-orthonormalized eigenvectors.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    eigenvalues: Vec<f64>,
    /// n x p; columns are Euclidean-orthonormal.
    eigenvectors: DMatrix<f64>,
    degree: FemDegree,
    mesh_size: usize,
    symmetry_warnings: Vec<usize>,
}

impl SpectralBasis {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn degree(&self) -> FemDegree {
        self.degree
    }

    pub fn mesh_size(&self) -> usize {
        self.mesh_size
    }

    pub fn basis_size(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Indices that sit inside a repeated-eigenvalue cluster; the diagonal
    /// map assumption degrades there.
    pub fn symmetry_warnings(&self) -> &[usize] {
        &self.symmetry_warnings
    }

    pub(crate) fn from_parts(
        eigenvalues: Vec<f64>,
        eigenvectors: DMatrix<f64>,
        degree: FemDegree,
        mesh_size: usize,
        symmetry_warnings: Vec<usize>,
    ) -> Self {
        SpectralBasis {
            eigenvalues,
            eigenvectors,
            degree,
            mesh_size,
            symmetry_warnings,
        }
    }
}

/// Assembles the Galerkin stiffness and consistent mass matrices for
/// Lagrange elements of the given degree, with element integrals taken over
/// each flat embedded triangle (the induced metric).
pub fn assemble(mesh: &TriangleMesh, degree: FemDegree) -> Result<OperatorPair, FemError> {
    let n = mesh.vertex_count();
    let area_tol = AREA_TOL_FACTOR * mesh.bounding_box_diagonal().powi(2);

    let mut used = vec![false; n];
    for f in mesh.faces() {
        for &v in f {
            used[v] = true;
        }
    }
    if let Some(vertex) = used.iter().position(|&u| !u) {
        return Err(FemError::IsolatedVertex { vertex });
    }

    let re = reference_element(degree);
    let (dof_count, edge_index) = match degree {
        FemDegree::P1 => (n, HashMap::new()),
        FemDegree::P3 => {
            let edges = mesh.edges();
            let map: HashMap<(usize, usize), usize> =
                edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
            (n + 2 * edges.len() + mesh.face_count(), map)
        }
    };
    let edge_count = edge_index.len();

    let mut stiff_triplets = Vec::new();
    let mut mass_triplets = Vec::new();
    let mut local_dofs = vec![0usize; re.node_count];

    for (fi, f) in mesh.faces().iter().enumerate() {
        let [a, b, c] = *f;
        let metric = triangle_metric(
            mesh.vertices()[a],
            mesh.vertices()[b],
            mesh.vertices()[c],
        );
        let area = 0.5 * metric.scale;
        if !(area > area_tol) {
            return Err(FemError::DegenerateElement {
                face: fi,
                area,
                tol: area_tol,
            });
        }

        match degree {
            FemDegree::P1 => {
                local_dofs[..3].copy_from_slice(&[a, b, c]);
            }
            FemDegree::P3 => {
                local_dofs[0] = a;
                local_dofs[1] = b;
                local_dofs[2] = c;
                // two dofs per edge, stored from the lower-indexed endpoint
                for (slot, (u, v)) in [(3, (a, b)), (5, (b, c)), (7, (c, a))] {
                    let e = edge_index[&(u.min(v), u.max(v))];
                    let base = n + 2 * e;
                    if u < v {
                        local_dofs[slot] = base;
                        local_dofs[slot + 1] = base + 1;
                    } else {
                        local_dofs[slot] = base + 1;
                        local_dofs[slot + 1] = base;
                    }
                }
                local_dofs[9] = n + 2 * edge_count + fi;
            }
        }

        let ke = element_stiffness(re, &metric);
        for i in 0..re.node_count {
            for j in 0..re.node_count {
                let (gi, gj) = (local_dofs[i], local_dofs[j]);
                stiff_triplets.push((gi, gj, ke[(i, j)]));
                mass_triplets.push((gi, gj, metric.scale * re.mass[(i, j)]));
            }
        }
    }

    let stiffness = SymCsr::from_triplets(dof_count, &stiff_triplets, false);
    let mass = SymCsr::from_triplets(dof_count, &mass_triplets, false);
    let mut dof_to_vertex = vec![false; dof_count];
    for flag in dof_to_vertex.iter_mut().take(n) {
        *flag = true;
    }
    Ok(OperatorPair {
        stiffness,
        mass,
        dof_to_vertex,
    })
}

/// The `p` algebraically smallest generalized eigenpairs of
/// `stiffness v = lambda mass v`, mass-orthonormal, with the deterministic
/// sign convention (largest-magnitude entry positive, ties to lowest index).
pub fn solve_smallest_eigs(ops: &OperatorPair, p: usize) -> Result<EigenPairs, FemError> {
    if p == 0 || p >= ops.dof_count() {
        return Err(FemError::InvalidEigenCount {
            p,
            limit: ops.dof_count(),
        });
    }
    Ok(eigen::solve_smallest(&ops.stiffness, &ops.mass, p)?)
}

/// Modified Gram-Schmidt in input-column order. The output spans the same
/// column space and is Euclidean-orthonormal; a residual collapsing below
/// 1e-12 of the column's original norm means linear dependence.
pub fn orthonormalize(raw: &DMatrix<f64>) -> Result<DMatrix<f64>, FemError> {
    let (n, p) = raw.shape();
    let mut q = raw.clone();
    for j in 0..p {
        let orig_norm = q.column(j).norm();
        for k in 0..j {
            let proj = q.column(k).dot(&q.column(j));
            let qk = q.column(k).into_owned();
            let mut col = q.column_mut(j);
            col.axpy(-proj, &qk, 1.0);
        }
        // second pass for numerical safety on nearly dependent columns
        for k in 0..j {
            let proj = q.column(k).dot(&q.column(j));
            let qk = q.column(k).into_owned();
            let mut col = q.column_mut(j);
            col.axpy(-proj, &qk, 1.0);
        }
        let norm = q.column(j).norm();
        if norm < 1e-12 * orig_norm.max(f64::MIN_POSITIVE) || norm == 0.0 {
            return Err(FemError::RankDeficient { column: j, norm });
        }
        q.column_mut(j).scale_mut(1.0 / norm);
        let _ = n;
    }
    Ok(q)
}

/// Detects near-coincident eigenvalues: a gap `lambda[i+1] - lambda[i]`
/// smaller than `1e-6 * lambda[i+1]` marks both indices as a symmetry
/// cluster.
pub fn symmetry_clusters(eigenvalues: &[f64]) -> Vec<usize> {
    let mut flagged = vec![false; eigenvalues.len()];
    for i in 0..eigenvalues.len().saturating_sub(1) {
        let gap = eigenvalues[i + 1] - eigenvalues[i];
        if gap.abs() < 1e-6 * eigenvalues[i + 1].abs() {
            flagged[i] = true;
            flagged[i + 1] = true;
        }
    }
    flagged
        .iter()
        .enumerate()
        .filter_map(|(i, &f)| f.then_some(i))
        .collect()
}

/// Tolerance below which an eigenvalue counts as zero: `1e-6` times a coarse
/// estimate of the first nonzero eigenvalue, so it scales with mesh units.
/// Spectra lying entirely below 1e-12 are numerical kernels (disconnected
/// input or p too small) and report no usable tolerance.
pub fn zero_tolerance(eigenvalues: &[f64]) -> f64 {
    let scale = eigenvalues.last().copied().unwrap_or(0.0).abs();
    if scale <= 1e-12 {
        return 0.0;
    }
    let lambda1_estimate = eigenvalues
        .iter()
        .copied()
        .find(|&l| l > 1e-9 * scale)
        .unwrap_or(scale);
    1e-6 * lambda1_estimate
}

/// Index of the first eigenvalue exceeding the zero tolerance.
pub fn first_nonzero_index(eigenvalues: &[f64]) -> Option<usize> {
    let tol = zero_tolerance(eigenvalues);
    if tol == 0.0 {
        return None;
    }
    eigenvalues.iter().position(|&l| l > tol)
}

/// Full spectral-basis pipeline: assemble, solve, restrict to vertex dofs
/// (cubic elements drop their edge and face dofs), then orthonormalize.
pub fn spectral_basis(
    mesh: &TriangleMesh,
    degree: FemDegree,
    p: usize,
) -> Result<SpectralBasis, FemError> {
    let n = mesh.vertex_count();
    if p == 0 || p >= n {
        return Err(FemError::InvalidEigenCount { p, limit: n });
    }
    let ops = assemble(mesh, degree)?;
    let pairs = solve_smallest_eigs(&ops, p)?;

    // vertex restriction: vertex dofs are the leading block
    let restricted = DMatrix::from_fn(n, p, |i, j| pairs.vectors[(i, j)]);
    let ortho = orthonormalize(&restricted)?;
    let warnings = symmetry_clusters(&pairs.values);

    Ok(SpectralBasis::from_parts(
        pairs.values,
        ortho,
        degree,
        n,
        warnings,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn equilateral() -> TriangleMesh {
        TriangleMesh::new(
            vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.5, 3f64.sqrt() / 2.0, 0.0],
            ],
            vec![[0, 1, 2]],
            None,
        )
        .unwrap()
    }

    #[test]
    fn p1_single_triangle_matches_analytic_matrices() {
        let ops = assemble(&equilateral(), FemDegree::P1).unwrap();
        let expected_offdiag = -1.0 / (2.0 * 3f64.sqrt());
        assert_relative_eq!(ops.stiffness.get(0, 1), expected_offdiag, epsilon = 1e-12);
        assert_relative_eq!(ops.stiffness.get(1, 2), expected_offdiag, epsilon = 1e-12);
        let area = 3f64.sqrt() / 4.0;
        assert_relative_eq!(ops.mass.get(0, 0), area / 6.0, epsilon = 1e-12);
        assert_relative_eq!(ops.mass.get(0, 2), area / 12.0, epsilon = 1e-12);
    }

    #[test]
    fn stiffness_annihilates_constants_and_mass_sums_to_area() {
        let mesh = crate::synth::primitives::icosphere(2, 1.0);
        for degree in [FemDegree::P1, FemDegree::P3] {
            let ops = assemble(&mesh, degree).unwrap();
            let sums = ops.stiffness.row_sums();
            let scale = ops
                .stiffness
                .values
                .iter()
                .fold(0.0f64, |a, &v| a.max(v.abs()));
            for s in sums {
                assert!(s.abs() < 1e-9 * scale, "row sum {s}");
            }
            assert_relative_eq!(
                ops.mass.total(),
                mesh.surface_area(),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn p3_dof_layout_counts_vertices_edges_faces() {
        let mesh = crate::mesh::tests::tetrahedron();
        let ops = assemble(&mesh, FemDegree::P3).unwrap();
        // tetrahedron: 4 vertices, 6 edges, 4 faces
        assert_eq!(ops.dof_count(), 4 + 12 + 4);
        assert_eq!(ops.vertex_count(), 4);
    }

    #[test]
    fn connected_mesh_has_single_zero_mode() {
        let mesh = crate::mesh::tests::tetrahedron();
        let ops = assemble(&mesh, FemDegree::P1).unwrap();
        let pairs = solve_smallest_eigs(&ops, 1).unwrap();
        assert!(pairs.values[0].abs() < 1e-10);
        let v = pairs.vectors.column(0);
        let mean = v.sum() / v.len() as f64;
        for &x in v.iter() {
            assert_relative_eq!(x, mean, max_relative = 1e-8);
        }
    }

    #[test]
    fn rejects_p_equal_to_dof_count() {
        let mesh = crate::mesh::tests::tetrahedron();
        let ops = assemble(&mesh, FemDegree::P1).unwrap();
        assert!(matches!(
            solve_smallest_eigs(&ops, 4),
            Err(FemError::InvalidEigenCount { .. })
        ));
    }

    #[test]
    fn orthonormalize_is_idempotent_on_orthonormal_input() {
        let q = DMatrix::<f64>::identity(6, 3);
        let out = orthonormalize(&q).unwrap();
        assert!((out - q).amax() < 1e-12);
    }

    #[test]
    fn orthonormalize_produces_orthonormal_columns() {
        let mut rng = crate::synth::rng::CounterRng::new(11);
        let raw = DMatrix::from_fn(50, 10, |_, _| rng.next_symmetric());
        let q = orthonormalize(&raw).unwrap();
        let gram = q.transpose() * &q;
        assert!((gram - DMatrix::identity(10, 10)).amax() < 1e-10);
    }

    #[test]
    fn orthonormalize_rejects_duplicated_column() {
        let mut rng = crate::synth::rng::CounterRng::new(5);
        let mut raw = DMatrix::from_fn(20, 4, |_, _| rng.next_symmetric());
        let dup = raw.column(1).into_owned();
        raw.set_column(3, &dup);
        assert!(matches!(
            orthonormalize(&raw),
            Err(FemError::RankDeficient { column: 3, .. })
        ));
    }

    #[test]
    fn zero_tolerance_and_first_nonzero() {
        let eigs = [1e-13, 2.0, 2.0, 6.0];
        assert_eq!(first_nonzero_index(&eigs), Some(1));
        assert!(zero_tolerance(&eigs) > 0.0);
        assert_eq!(first_nonzero_index(&[0.0, 0.0]), None);
    }

    #[test]
    fn symmetry_clusters_flag_repeated_eigenvalues() {
        let eigs = [0.0, 2.0, 2.0 + 1e-9, 6.0];
        assert_eq!(symmetry_clusters(&eigs), vec![1, 2]);
        assert!(symmetry_clusters(&[0.0, 1.0, 2.0]).is_empty());
    }
}
