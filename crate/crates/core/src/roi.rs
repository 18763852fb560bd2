//! Region-of-interest filtering and automatic ROI discovery by recursive
//! nodal-domain partitioning.
//!
//! Both meshes are split along the sign of the eigenvector of the first
//! nonzero eigenvalue; the split components are matched across meshes by a
//! cardinality rule (eigenvector sign is not intrinsic), the pair whose
//! sub-spectra disagree more is selected, and the recursion descends into
//! it. The recursion is intentionally shallow: partition differences
//! accumulate, so it localizes a region, not a defect.

use serde::Serialize;

use crate::fem::{self, FemDegree, FemError};
use crate::mesh::{extract_submesh, MeshError, SubmeshResult, TriangleMesh, VertexMask};

/// Eigenvalues compared per submesh when scoring a partition pair.
pub const DISSIMILARITY_EIG_COUNT: usize = 15;

#[derive(Debug, thiserror::Error)]
pub enum RoiError {
    #[error("deviation field has {field} entries but the mask has {mask}")]
    DimensionMismatch { field: usize, mask: usize },
    #[error("iteration count must be in [1, 3], got {0}")]
    InvalidIters(usize),
    #[error("no nonzero eigenvalue available to split on")]
    NoNonzeroEigenvalue,
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Nodal bipartition of one mesh. The sign masks partition every vertex
/// (exact zeros go to the plus side); the submeshes keep only vertices that
/// survive in a complete face.
#[derive(Debug)]
pub struct PartitionPair {
    pub plus: SubmeshResult,
    pub minus: SubmeshResult,
    pub swapped: bool,
    pub plus_mask: VertexMask,
    pub minus_mask: VertexMask,
}

impl PartitionPair {
    pub fn plus_count(&self) -> usize {
        self.plus_mask.count_true()
    }

    pub fn minus_count(&self) -> usize {
        self.minus_mask.count_true()
    }
}

/// Result of the recursive search, mapped back to the original meshes.
#[derive(Debug)]
pub struct RoiResult {
    /// Selected region on the suspect mesh.
    pub mask: VertexMask,
    /// The matched region on the nominal mesh.
    pub nominal_mask: VertexMask,
    /// Iterations actually completed.
    pub iterations: usize,
    /// Per-iteration (plus, minus) eigenvalue-dissimilarity sums.
    pub scores: Vec<(f64, f64)>,
    pub warnings: Vec<RoiWarning>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoiWarning {
    /// The cardinality rule was a tie; no swap was performed.
    AmbiguousMatch,
    /// A side became too small to extract the comparison eigenvalues.
    SubmeshTooSmall,
    /// The dissimilarity comparison was a tie; descended into minus.
    ScoreTie,
}

/// Zeroes the deviation outside the region: `d(x)` if `x` is in the ROI,
/// 0 otherwise.
pub fn filter_roi(deviation: &[f64], roi: &VertexMask) -> Result<Vec<f64>, RoiError> {
    if deviation.len() != roi.len() {
        return Err(RoiError::DimensionMismatch {
            field: deviation.len(),
            mask: roi.len(),
        });
    }
    Ok(deviation
        .iter()
        .enumerate()
        .map(|(i, &d)| if roi.get(i) { d } else { 0.0 })
        .collect())
}

/// Splits a mesh along the sign of the eigenvector of the first eigenvalue
/// above the zero tolerance (zeros join the plus side).
pub fn nodal_split(mesh: &TriangleMesh, degree: FemDegree) -> Result<PartitionPair, RoiError> {
    let ops = fem::assemble(mesh, degree)?;
    let d = ops.dof_count();
    // enough pairs to reach past the kernel even on slightly fragmented input
    let p = (d - 1).min(6).max(2);
    let pairs = fem::solve_smallest_eigs(&ops, p)?;
    let idx = fem::first_nonzero_index(&pairs.values).ok_or(RoiError::NoNonzeroEigenvalue)?;

    let n = mesh.vertex_count();
    let fiedler = pairs.vectors.column(idx);
    let plus_flags: Vec<bool> = (0..n).map(|v| fiedler[v] >= 0.0).collect();
    let plus_mask = VertexMask::new(plus_flags.clone());
    let minus_mask = VertexMask::new(plus_flags.iter().map(|&b| !b).collect());

    let plus = extract_submesh(mesh, &plus_mask)?;
    let minus = extract_submesh(mesh, &minus_mask)?;
    Ok(PartitionPair {
        plus,
        minus,
        swapped: false,
        plus_mask,
        minus_mask,
    })
}

/// Aligns the second pair with the first: when the cardinality-difference
/// product `(|A+|-|A-|)(|B+|-|B-|)` is negative the labels of `b` are
/// exchanged. A zero product is ambiguous; nothing is swapped.
pub fn match_components(a: &PartitionPair, b: PartitionPair) -> (PartitionPair, Option<RoiWarning>) {
    let da = a.plus_count() as i64 - a.minus_count() as i64;
    let db = b.plus_count() as i64 - b.minus_count() as i64;
    let product = da * db;
    if product < 0 {
        (
            PartitionPair {
                plus: b.minus,
                minus: b.plus,
                swapped: !b.swapped,
                plus_mask: b.minus_mask,
                minus_mask: b.plus_mask,
            },
            None,
        )
    } else if product == 0 {
        (b, Some(RoiWarning::AmbiguousMatch))
    } else {
        (b, None)
    }
}

fn dof_count_for(mesh: &TriangleMesh, degree: FemDegree) -> usize {
    match degree {
        FemDegree::P1 => mesh.vertex_count(),
        FemDegree::P3 => mesh.vertex_count() + 2 * mesh.edges().len() + mesh.face_count(),
    }
}

fn smallest_eigenvalues(
    mesh: &TriangleMesh,
    degree: FemDegree,
    count: usize,
) -> Result<Vec<f64>, RoiError> {
    let ops = fem::assemble(mesh, degree)?;
    Ok(fem::solve_smallest_eigs(&ops, count)?.values)
}

/// Recursive nodal-domain search with the default 15-eigenvalue score.
pub fn recursive_roi(
    suspect: &TriangleMesh,
    nominal: &TriangleMesh,
    iters: usize,
    degree: FemDegree,
) -> Result<RoiResult, RoiError> {
    recursive_roi_with_count(suspect, nominal, iters, degree, DISSIMILARITY_EIG_COUNT)
}

/// The recursion with a configurable eigenvalue count per comparison.
pub fn recursive_roi_with_count(
    suspect: &TriangleMesh,
    nominal: &TriangleMesh,
    iters: usize,
    degree: FemDegree,
    eig_count: usize,
) -> Result<RoiResult, RoiError> {
    if !(1..=3).contains(&iters) {
        return Err(RoiError::InvalidIters(iters));
    }

    let mut current_s = suspect.clone();
    let mut current_n = nominal.clone();
    // chains mapping current submesh vertices to the original meshes
    let mut map_s: Vec<usize> = (0..suspect.vertex_count()).collect();
    let mut map_n: Vec<usize> = (0..nominal.vertex_count()).collect();
    let mut scores = Vec::new();
    let mut warnings = Vec::new();
    let mut completed = 0;

    for _ in 0..iters {
        let pair_s = nodal_split(&current_s, degree)?;
        let pair_n = nodal_split(&current_n, degree)?;
        let (pair_n, warn) = match_components(&pair_s, pair_n);
        if let Some(w) = warn {
            warnings.push(w);
        }

        let sides = [
            &pair_s.plus.mesh,
            &pair_s.minus.mesh,
            &pair_n.plus.mesh,
            &pair_n.minus.mesh,
        ];
        if sides
            .iter()
            .any(|m| dof_count_for(m, degree) <= eig_count)
        {
            warnings.push(RoiWarning::SubmeshTooSmall);
            break;
        }

        let l_sp = smallest_eigenvalues(&pair_s.plus.mesh, degree, eig_count)?;
        let l_sm = smallest_eigenvalues(&pair_s.minus.mesh, degree, eig_count)?;
        let l_np = smallest_eigenvalues(&pair_n.plus.mesh, degree, eig_count)?;
        let l_nm = smallest_eigenvalues(&pair_n.minus.mesh, degree, eig_count)?;
        let d_plus: f64 = l_sp
            .iter()
            .zip(&l_np)
            .map(|(a, b)| (a - b).abs())
            .sum();
        let d_minus: f64 = l_sm
            .iter()
            .zip(&l_nm)
            .map(|(a, b)| (a - b).abs())
            .sum();
        scores.push((d_plus, d_minus));
        if d_plus == d_minus {
            warnings.push(RoiWarning::ScoreTie);
        }

        let (chosen_s, chosen_n) = if d_plus > d_minus {
            (pair_s.plus, pair_n.plus)
        } else {
            (pair_s.minus, pair_n.minus)
        };
        map_s = chosen_s.parent_index.iter().map(|&v| map_s[v]).collect();
        map_n = chosen_n.parent_index.iter().map(|&v| map_n[v]).collect();
        current_s = chosen_s.mesh;
        current_n = chosen_n.mesh;
        completed += 1;
    }

    Ok(RoiResult {
        mask: VertexMask::from_indices(suspect.vertex_count(), &map_s),
        nominal_mask: VertexMask::from_indices(nominal.vertex_count(), &map_n),
        iterations: completed,
        scores,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::primitives;

    #[test]
    fn filter_examples() {
        let dev = vec![1.0, 2.0, 3.0, 4.0];
        let all = VertexMask::all_true(4);
        assert_eq!(filter_roi(&dev, &all).unwrap(), dev);
        let none = VertexMask::all_false(4);
        assert_eq!(filter_roi(&dev, &none).unwrap(), vec![0.0; 4]);
        let half = VertexMask::new(vec![true, false, true, false]);
        assert_eq!(filter_roi(&dev, &half).unwrap(), vec![1.0, 0.0, 3.0, 0.0]);
        assert!(filter_roi(&dev, &VertexMask::all_true(3)).is_err());
    }

    #[test]
    fn filter_is_idempotent() {
        let dev: Vec<f64> = (0..20).map(|i| (i as f64).sin().abs()).collect();
        let mask = VertexMask::new((0..20).map(|i| i % 3 == 0).collect());
        let once = filter_roi(&dev, &mask).unwrap();
        let twice = filter_roi(&once, &mask).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn strip_splits_at_the_long_axis_midline() {
        let mesh = primitives::strip(4); // 4x1 rectangle, 18x5 grid
        let pair = nodal_split(&mesh, FemDegree::P1).unwrap();
        let n = mesh.vertex_count();

        // halves are balanced
        let (p, m) = (pair.plus_count(), pair.minus_count());
        assert_eq!(p + m, n);
        assert!(p.abs_diff(m) <= n / 10, "unbalanced split {p} vs {m}");

        // the split line is x = 2: each side lies entirely on one side
        let side_of = |mask: &VertexMask| -> Vec<f64> {
            mask.indices().iter().map(|&v| mesh.vertices()[v][0]).collect()
        };
        let xs_plus = side_of(&pair.plus_mask);
        let xs_minus = side_of(&pair.minus_mask);
        let plus_max: f64 = xs_plus.iter().cloned().fold(f64::MIN, f64::max);
        let plus_min: f64 = xs_plus.iter().cloned().fold(f64::MAX, f64::min);
        let minus_max: f64 = xs_minus.iter().cloned().fold(f64::MIN, f64::max);
        let minus_min: f64 = xs_minus.iter().cloned().fold(f64::MAX, f64::min);
        // one side is [0,2), the other (2,4]
        if plus_min < 2.0 {
            assert!(plus_max < 2.0 && minus_min > 2.0);
        } else {
            assert!(minus_max < 2.0 && plus_min > 2.0);
        }
    }

    #[test]
    fn ellipsoid_splits_across_the_long_axis() {
        let mesh = primitives::ellipsoid(5);
        let pair = nodal_split(&mesh, FemDegree::P1).unwrap();
        // sides are connected and balanced; the nodal line is x ~ 0
        assert_eq!(crate::mesh::component_count(&pair.plus.mesh), 1);
        assert_eq!(crate::mesh::component_count(&pair.minus.mesh), 1);
        let balance =
            pair.plus_count().abs_diff(pair.minus_count()) as f64 / mesh.vertex_count() as f64;
        assert!(balance < 0.15, "balance {balance}");
        let plus_x: f64 = pair
            .plus_mask
            .indices()
            .iter()
            .map(|&v| mesh.vertices()[v][0])
            .sum::<f64>()
            / pair.plus_count() as f64;
        let minus_x: f64 = pair
            .minus_mask
            .indices()
            .iter()
            .map(|&v| mesh.vertices()[v][0])
            .sum::<f64>()
            / pair.minus_count() as f64;
        assert!(
            (plus_x - minus_x).abs() > 0.5,
            "sides not separated along x: {plus_x} vs {minus_x}"
        );
    }

    #[test]
    fn mirror_symmetric_mesh_splits_evenly() {
        let mesh = primitives::grid_box([6, 4, 4], [2.0, 1.0, 1.0]);
        let pair = nodal_split(&mesh, FemDegree::P1).unwrap();
        // vertices on the nodal plane x = 0 land on the plus side
        let on_line = mesh.vertices().iter().filter(|v| v[0] == 0.0).count();
        assert!(pair.plus_count().abs_diff(pair.minus_count()) <= on_line);
    }

    #[test]
    fn match_rule_arithmetic() {
        let mesh = primitives::strip(3);
        let a = nodal_split(&mesh, FemDegree::P1).unwrap();

        let synth_pair = |plus_n: usize, total: usize| -> PartitionPair {
            // fabricate masks with the requested cardinalities over the strip
            let flags: Vec<bool> = (0..total).map(|i| i < plus_n).collect();
            let plus_mask = VertexMask::new(flags.clone());
            let minus_mask = VertexMask::new(flags.iter().map(|b| !b).collect());
            PartitionPair {
                plus: a.plus.clone(),
                minus: a.minus.clone(),
                swapped: false,
                plus_mask,
                minus_mask,
            }
        };

        // |A+|=100, |A-|=50 against |B+|=48, |B-|=102: swap
        let a_called = synth_pair(100, 150);
        let (b2, warn) = match_components(&a_called, synth_pair(48, 150));
        assert!(b2.swapped && warn.is_none());

        // |B+|=101, |B-|=49: no swap
        let (b3, warn) = match_components(&a_called, synth_pair(101, 150));
        assert!(!b3.swapped && warn.is_none());

        // |B+| = |B-|: ambiguous, no swap
        let (b4, warn) = match_components(&a_called, synth_pair(75, 150));
        assert!(!b4.swapped);
        assert_eq!(warn, Some(RoiWarning::AmbiguousMatch));
    }

    #[test]
    fn swap_rule_is_an_involution() {
        // unbalanced sides so the cardinality rule is decisive
        let mesh = primitives::strip(3);
        let split = nodal_split(&mesh, FemDegree::P1).unwrap();
        let unbalanced = |plus_n: usize, total: usize| -> PartitionPair {
            let flags: Vec<bool> = (0..total).map(|i| i < plus_n).collect();
            PartitionPair {
                plus: split.plus.clone(),
                minus: split.minus.clone(),
                swapped: false,
                plus_mask: VertexMask::new(flags.clone()),
                minus_mask: VertexMask::new(flags.iter().map(|b| !b).collect()),
            }
        };
        let a = unbalanced(100, 150);
        // b's labels disagree with a's: the rule must fire exactly once
        let b = unbalanced(50, 150);
        let plus_after_swap: Vec<usize> = b.minus_mask.indices();
        let (once, warn) = match_components(&a, b);
        assert!(once.swapped && warn.is_none());
        assert_eq!(once.plus_mask.indices(), plus_after_swap);
        // matching again is a no-op
        let (twice, warn) = match_components(&a, once);
        assert!(twice.swapped && warn.is_none());
        assert_eq!(twice.plus_mask.indices(), plus_after_swap);
    }

    #[test]
    fn identical_meshes_return_a_deterministic_half() {
        let mesh = primitives::toothed_block([10, 6, 4]);
        let r1 = recursive_roi(&mesh, &mesh, 1, FemDegree::P1).unwrap();
        let r2 = recursive_roi(&mesh, &mesh, 1, FemDegree::P1).unwrap();
        assert_eq!(r1.mask.indices(), r2.mask.indices());
        assert_eq!(r1.iterations, 1);
        // identical meshes: both dissimilarity sums are ~0, ties go to minus
        let (dp, dm) = r1.scores[0];
        assert!(dp < 1e-6 && dm < 1e-6, "scores {dp} {dm}");
        // region is a nontrivial part of the mesh
        let frac = r1.mask.count_true() as f64 / mesh.vertex_count() as f64;
        assert!(frac > 0.2 && frac < 0.8, "fraction {frac}");
        // roi indices are valid on the original mesh and coordinates line up
        assert_eq!(r1.mask.len(), mesh.vertex_count());
    }

    #[test]
    fn tiny_mesh_stops_early_with_warning() {
        let mesh = primitives::strip(1); // 6x2 grid of vertices
        let r = recursive_roi(&mesh, &mesh, 3, FemDegree::P1).unwrap();
        assert!(r.warnings.contains(&RoiWarning::SubmeshTooSmall));
        assert!(r.iterations < 3);
        assert!(r.mask.count_true() > 0);
    }

    #[test]
    fn iters_out_of_range_is_rejected() {
        let mesh = primitives::strip(2);
        assert!(matches!(
            recursive_roi(&mesh, &mesh, 0, FemDegree::P1),
            Err(RoiError::InvalidIters(0))
        ));
        assert!(matches!(
            recursive_roi(&mesh, &mesh, 4, FemDegree::P1),
            Err(RoiError::InvalidIters(4))
        ));
    }

    #[test]
    fn partition_masks_cover_every_vertex_exactly_once() {
        let mesh = primitives::ellipsoid(4);
        let pair = nodal_split(&mesh, FemDegree::P1).unwrap();
        for v in 0..mesh.vertex_count() {
            assert!(pair.plus_mask.get(v) != pair.minus_mask.get(v));
        }
    }

    #[test]
    fn roi_chain_maps_back_to_original_coordinates() {
        let mesh = primitives::toothed_block([10, 6, 4]);
        let r = recursive_roi(&mesh, &mesh, 2, FemDegree::P1).unwrap();
        // every returned index is valid and the region is connected-ish
        for &v in &r.mask.indices() {
            assert!(v < mesh.vertex_count());
        }
        let sub = extract_submesh(&mesh, &r.mask).unwrap();
        for (si, &pi) in sub.parent_index.iter().enumerate() {
            assert_eq!(sub.mesh.vertices()[si], mesh.vertices()[pi]);
        }
    }
}
