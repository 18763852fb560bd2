//! Deterministic mesh primitives: geodesic spheres, grid boxes, a toothed
//! block with an asymmetric spectrum, ellipsoids and flat strips.

use std::collections::HashMap;

use crate::mesh::TriangleMesh;
use crate::synth::SynthError;

const PHI: f64 = 1.618033988749894848204586834365638118;

fn icosahedron() -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let vertices = vec![
        [-1.0, PHI, 0.0],
        [1.0, PHI, 0.0],
        [-1.0, -PHI, 0.0],
        [1.0, -PHI, 0.0],
        [0.0, -1.0, PHI],
        [0.0, 1.0, PHI],
        [0.0, -1.0, -PHI],
        [0.0, 1.0, -PHI],
        [PHI, 0.0, -1.0],
        [PHI, 0.0, 1.0],
        [-PHI, 0.0, -1.0],
        [-PHI, 0.0, 1.0],
    ];
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (vertices, faces)
}

fn normalize_to(r: f64, v: [f64; 3]) -> [f64; 3] {
    let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [r * v[0] / len, r * v[1] / len, r * v[2] / len]
}

/// Class-I geodesic sphere: each icosahedron face is split into `f^2` small
/// triangles and the lattice is projected to the sphere, giving
/// `10 f^2 + 2` vertices. Shared edge points are keyed canonically so the
/// mesh is welded exactly.
pub fn icosphere(frequency: usize, radius: f64) -> TriangleMesh {
    assert!(frequency >= 1);
    let f = frequency;
    let (base_v, base_f) = icosahedron();

    let mut vertices: Vec<[f64; 3]> = base_v.iter().map(|&v| normalize_to(radius, v)).collect();
    let mut edge_points: HashMap<(usize, usize, usize), usize> = HashMap::new();
    let mut faces = Vec::with_capacity(20 * f * f);

    for (face_id, tri) in base_f.iter().enumerate() {
        let [a, b, c] = *tri;
        let (pa, pb, pc) = (base_v[a], base_v[b], base_v[c]);
        // lattice index for barycentric steps (i toward b, j toward c)
        let mut index = vec![vec![usize::MAX; f + 1]; f + 1];
        for i in 0..=f {
            for j in 0..=(f - i) {
                let k = f - i - j;
                let idx = if i == 0 && j == 0 {
                    a
                } else if i == f {
                    b
                } else if j == f {
                    c
                } else if j == 0 {
                    // edge a-b, step i from a
                    *edge_points
                        .entry(canonical_edge_key(a, b, i, f))
                        .or_insert_with(|| {
                            push_lattice_point(&mut vertices, radius, pa, pb, pc, k, i, j)
                        })
                } else if i == 0 {
                    *edge_points
                        .entry(canonical_edge_key(a, c, j, f))
                        .or_insert_with(|| {
                            push_lattice_point(&mut vertices, radius, pa, pb, pc, k, i, j)
                        })
                } else if i + j == f {
                    *edge_points
                        .entry(canonical_edge_key(b, c, j, f))
                        .or_insert_with(|| {
                            push_lattice_point(&mut vertices, radius, pa, pb, pc, k, i, j)
                        })
                } else {
                    let _ = face_id;
                    push_lattice_point(&mut vertices, radius, pa, pb, pc, k, i, j)
                };
                index[i][j] = idx;
            }
        }
        for i in 0..f {
            for j in 0..(f - i) {
                faces.push([index[i][j], index[i + 1][j], index[i][j + 1]]);
                if i + j + 1 < f {
                    faces.push([index[i + 1][j], index[i + 1][j + 1], index[i][j + 1]]);
                }
            }
        }
    }

    debug_assert_eq!(vertices.len(), 10 * f * f + 2);
    TriangleMesh::new(vertices, faces, Some(format!("sphere-f{f}"))).expect("icosphere is valid")
}

fn canonical_edge_key(a: usize, b: usize, step_from_a: usize, f: usize) -> (usize, usize, usize) {
    if a < b {
        (a, b, step_from_a)
    } else {
        (b, a, f - step_from_a)
    }
}

#[allow(clippy::too_many_arguments)]
fn push_lattice_point(
    vertices: &mut Vec<[f64; 3]>,
    radius: f64,
    pa: [f64; 3],
    pb: [f64; 3],
    pc: [f64; 3],
    k: usize,
    i: usize,
    j: usize,
) -> usize {
    let f = (k + i + j) as f64;
    let p = [
        (pa[0] * k as f64 + pb[0] * i as f64 + pc[0] * j as f64) / f,
        (pa[1] * k as f64 + pb[1] * i as f64 + pc[1] * j as f64) / f,
        (pa[2] * k as f64 + pb[2] * i as f64 + pc[2] * j as f64) / f,
    ];
    vertices.push(normalize_to(radius, p));
    vertices.len() - 1
}

/// Geodesic frequency whose vertex count `10 f^2 + 2` is closest to the
/// requested resolution.
pub fn sphere_frequency_for(resolution: usize) -> Result<usize, SynthError> {
    if resolution < 12 {
        return Err(SynthError::ResolutionUnachievable {
            requested: resolution,
            closest: 12,
        });
    }
    let f = (((resolution - 2) as f64 / 10.0).sqrt()).round().max(1.0) as usize;
    Ok(f)
}

/// Mirror-exact coordinate of lattice step `i` of `d` across a width `w`:
/// the value for `d - i` is the exact negation of the value for `i`.
fn symmetric_coord(i: usize, d: usize, w: f64) -> f64 {
    ((2 * i) as f64 - d as f64) / (2 * d) as f64 * w
}

/// Axis-aligned box centered at the origin with an even grid per face and a
/// union-jack diagonal pattern, which makes the mesh exactly symmetric under
/// all three axis mirrors (coordinates are computed mirror-exactly).
pub fn grid_box(cells: [usize; 3], dims: [f64; 3]) -> TriangleMesh {
    let cells = cells.map(|c| (c.max(1) + 1) / 2 * 2); // force even
    let [dx, dy, dz] = cells;
    let [wx, wy, wz] = dims;

    let mut key_to_index: HashMap<(usize, usize, usize), usize> = HashMap::new();
    let mut vertices: Vec<[f64; 3]> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();

    let mut vertex_at = |i: usize, j: usize, k: usize| -> usize {
        *key_to_index.entry((i, j, k)).or_insert_with(|| {
            vertices.push([
                symmetric_coord(i, dx, wx),
                symmetric_coord(j, dy, wy),
                symmetric_coord(k, dz, wz),
            ]);
            vertices.len() - 1
        })
    };

    // each side: lattice accessor, cell counts, and whether the natural
    // (u x v) winding points outward
    type Lattice = (usize, usize, bool);
    let sides: Vec<(Box<dyn Fn(usize, usize) -> (usize, usize, usize)>, Lattice)> = vec![
        (Box::new(move |a, b| (a, b, 0)), (dx, dy, false)), // -z
        (Box::new(move |a, b| (a, b, dz)), (dx, dy, true)), // +z
        (Box::new(move |a, b| (a, 0, b)), (dx, dz, true)),  // -y
        (Box::new(move |a, b| (a, dy, b)), (dx, dz, false)), // +y
        (Box::new(move |a, b| (0, a, b)), (dy, dz, false)), // -x
        (Box::new(move |a, b| (dx, a, b)), (dy, dz, true)), // +x
    ];

    for (lattice, (du, dv, outward)) in sides {
        for a in 0..du {
            for b in 0..dv {
                let (i00, i10, i01, i11) = {
                    let p00 = lattice(a, b);
                    let p10 = lattice(a + 1, b);
                    let p01 = lattice(a, b + 1);
                    let p11 = lattice(a + 1, b + 1);
                    (
                        vertex_at(p00.0, p00.1, p00.2),
                        vertex_at(p10.0, p10.1, p10.2),
                        vertex_at(p01.0, p01.1, p01.2),
                        vertex_at(p11.0, p11.1, p11.2),
                    )
                };
                let tris = if (a + b) % 2 == 0 {
                    [[i00, i10, i11], [i00, i11, i01]]
                } else {
                    [[i00, i10, i01], [i10, i11, i01]]
                };
                for t in tris {
                    if outward {
                        faces.push(t);
                    } else {
                        faces.push([t[0], t[2], t[1]]);
                    }
                }
            }
        }
    }

    // interior faces of coincident edges cannot occur: only surface lattice
    // points are emitted
    TriangleMesh::new(vertices, faces, Some("box".into())).expect("grid box is valid")
}

pub fn box_cells_for(resolution: usize) -> Result<[usize; 3], SynthError> {
    if resolution < 8 {
        return Err(SynthError::ResolutionUnachievable {
            requested: resolution,
            closest: 8,
        });
    }
    let d = (((resolution.max(8) - 2) as f64 / 6.0).sqrt()).round().max(2.0) as usize;
    Ok([d, d, d])
}

/// One rectangular tooth footprint on the top face, in centered coordinates.
#[derive(Clone, Copy)]
pub struct Tooth {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub height: f64,
}

pub const TOOTHED_BLOCK_DIMS: [f64; 3] = [1.6, 1.0, 0.6];

/// Asymmetric tooth layout: distinct widths, heights and depth extents so
/// the block has no mirror symmetry and a simple (non-repeated) spectrum.
pub const TOOTHED_BLOCK_TEETH: [Tooth; 3] = [
    Tooth {
        x0: -0.66,
        x1: -0.50,
        y0: -0.50,
        y1: 0.50,
        height: 0.12,
    },
    Tooth {
        x0: -0.28,
        x1: -0.16,
        y0: -0.50,
        y1: 0.10,
        height: 0.18,
    },
    Tooth {
        x0: 0.14,
        x1: 0.40,
        y0: -0.10,
        y1: 0.50,
        height: 0.09,
    },
];

/// A block with rectangular teeth raised from the top face. The distinct
/// side lengths and the asymmetric teeth keep eigenvalues simple, which the
/// diagonal spectral map relies on.
pub fn toothed_block(cells: [usize; 3]) -> TriangleMesh {
    let base = grid_box(cells, TOOTHED_BLOCK_DIMS);
    let top = TOOTHED_BLOCK_DIMS[2] / 2.0;
    let vertices: Vec<[f64; 3]> = base
        .vertices()
        .iter()
        .map(|&v| {
            if v[2] == top {
                for t in TOOTHED_BLOCK_TEETH {
                    if v[0] >= t.x0 && v[0] <= t.x1 && v[1] >= t.y0 && v[1] <= t.y1 {
                        return [v[0], v[1], v[2] + t.height];
                    }
                }
            }
            v
        })
        .collect();
    TriangleMesh::new(vertices, base.faces().to_vec(), Some("toothed-block".into()))
        .expect("toothed block is valid")
}

pub fn toothed_block_cells_for(resolution: usize) -> Result<[usize; 3], SynthError> {
    if resolution < 40 {
        return Err(SynthError::ResolutionUnachievable {
            requested: resolution,
            closest: 40,
        });
    }
    let mut best = [2usize, 2, 2];
    let mut best_err = usize::MAX;
    for c in 2..200usize {
        let cells = [
            ((1.6 * c as f64).round() as usize).max(1),
            c,
            ((0.6 * c as f64).round() as usize).max(1),
        ];
        let even = cells.map(|v| (v + 1) / 2 * 2);
        let [a, b, d] = even;
        let n = (a + 1) * (b + 1) * (d + 1) - (a.saturating_sub(1)) * (b.saturating_sub(1)) * (d.saturating_sub(1));
        let err = n.abs_diff(resolution);
        if err < best_err {
            best_err = err;
            best = even;
        }
        if n > 4 * resolution {
            break;
        }
    }
    Ok(best)
}

pub const ELLIPSOID_AXES: [f64; 3] = [1.0, 0.62, 0.47];

/// Geodesic sphere scaled by three distinct axes: simple spectrum, with the
/// first nonzero eigenfunction varying along the long (x) axis.
pub fn ellipsoid(frequency: usize) -> TriangleMesh {
    let sphere = icosphere(frequency, 1.0);
    let vertices: Vec<[f64; 3]> = sphere
        .vertices()
        .iter()
        .map(|&v| {
            [
                v[0] * ELLIPSOID_AXES[0],
                v[1] * ELLIPSOID_AXES[1],
                v[2] * ELLIPSOID_AXES[2],
            ]
        })
        .collect();
    TriangleMesh::new(vertices, sphere.faces().to_vec(), Some("ellipsoid".into()))
        .expect("ellipsoid is valid")
}

/// Flat open rectangle of aspect 4:1 in the xy plane. The cell count along
/// x is kept odd so no vertex column sits on the long-axis midline.
pub fn strip(ny_cells: usize) -> TriangleMesh {
    let ny = ny_cells.max(1);
    let nx = 4 * ny + 1; // odd
    let (lx, ly) = (4.0, 1.0);
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([
                lx * i as f64 / nx as f64,
                ly * j as f64 / ny as f64,
                0.0,
            ]);
        }
    }
    let at = |i: usize, j: usize| j * (nx + 1) + i;
    let mut faces = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            faces.push([at(i, j), at(i + 1, j), at(i + 1, j + 1)]);
            faces.push([at(i, j), at(i + 1, j + 1), at(i, j + 1)]);
        }
    }
    TriangleMesh::new(vertices, faces, Some("strip".into())).expect("strip is valid")
}

pub fn strip_cells_for(resolution: usize) -> Result<usize, SynthError> {
    if resolution < 10 {
        return Err(SynthError::ResolutionUnachievable {
            requested: resolution,
            closest: 10,
        });
    }
    let mut best = 1;
    let mut best_err = usize::MAX;
    for ny in 1..400usize {
        let n = (4 * ny + 2) * (ny + 1);
        let err = n.abs_diff(resolution);
        if err < best_err {
            best_err = err;
            best = ny;
        }
        if n > 4 * resolution {
            break;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::component_count;

    #[test]
    fn icosphere_counts_and_closedness() {
        for f in [1, 2, 5] {
            let m = icosphere(f, 1.0);
            assert_eq!(m.vertex_count(), 10 * f * f + 2);
            assert_eq!(m.face_count(), 20 * f * f);
            // closed: every edge shared by exactly two faces (Euler: V - E + F = 2)
            let e = m.edges().len();
            assert_eq!(m.vertex_count() + m.face_count(), e + 2);
            assert_eq!(component_count(&m), 1);
        }
    }

    #[test]
    fn icosphere_vertices_lie_on_the_sphere() {
        let m = icosphere(4, 2.5);
        for v in m.vertices() {
            let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            assert!((r - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_box_is_closed_and_mirror_exact() {
        let m = grid_box([4, 4, 4], [1.0, 1.0, 1.0]);
        assert_eq!(m.vertex_count(), 6 * 16 + 2);
        let e = m.edges().len();
        assert_eq!(m.vertex_count() + m.face_count(), e + 2);

        // every vertex has an exact x-mirror partner
        use std::collections::HashSet;
        let coords: HashSet<[u64; 3]> = m
            .vertices()
            .iter()
            .map(|v| [v[0].to_bits(), v[1].to_bits(), v[2].to_bits()])
            .collect();
        for v in m.vertices() {
            let mx = if v[0] == 0.0 { 0.0 } else { -v[0] };
            let mirrored = [mx.to_bits(), v[1].to_bits(), v[2].to_bits()];
            assert!(coords.contains(&mirrored), "no mirror for {v:?}");
        }
    }

    #[test]
    fn toothed_block_raises_only_top_tooth_vertices() {
        let m = toothed_block([16, 10, 6]);
        let top = TOOTHED_BLOCK_DIMS[2] / 2.0;
        let raised = m.vertices().iter().filter(|v| v[2] > top + 1e-12).count();
        assert!(raised > 0);
        for v in m.vertices() {
            assert!(v[2] <= top + 0.19);
        }
        assert_eq!(component_count(&m), 1);
    }

    #[test]
    fn strip_has_odd_x_cells_and_open_boundary() {
        let m = strip(3);
        assert_eq!(m.vertex_count(), 14 * 4);
        // open mesh: boundary edges exist
        let e = m.edges().len();
        assert!(m.vertex_count() + m.face_count() < e + 2);
        assert!(m.vertices().iter().all(|v| v[2] == 0.0));
    }
}
