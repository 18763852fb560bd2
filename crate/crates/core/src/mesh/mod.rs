//! Triangle mesh representation, validation, connectivity queries and
//! submesh extraction.
//!
//! Meshes are immutable after construction: `TriangleMesh::new` runs the full
//! validation (index ranges, degenerate faces, edge manifoldness) and every
//! operation on a validated mesh is a pure function.

mod io;

pub use io::{load_mesh, save_diagnosis_mesh, MeshFormat};

use std::collections::HashMap;

use thiserror::Error;

/// Relative factor for the degenerate-face area cutoff: a face is rejected
/// when its area is below `AREA_TOL_FACTOR * diag^2` with `diag` the
/// bounding-box diagonal. Cotangent weights blow up past this point.
pub const AREA_TOL_FACTOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error in {path} (line {line}): {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("invalid mesh: {0}")]
    Validation(String),
    #[error("no complete face survives the vertex mask")]
    EmptySubmesh,
    #[error("length mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// An immutable triangle mesh: vertex coordinates plus 0-based triangle
/// connectivity. Construction validates the invariants; see [`TriangleMesh::new`].
#[derive(Debug, Clone)]
pub struct TriangleMesh {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
    name: Option<String>,
}

impl TriangleMesh {
    /// Builds a validated mesh. Checks, in order:
    /// - every face index lies in `[0, n)`,
    /// - no face repeats a vertex index,
    /// - every face area exceeds `AREA_TOL_FACTOR * diag^2`,
    /// - every edge is shared by at most two faces.
    ///
    /// Boundary edges (one adjacent face) are fine. Inconsistent winding /
    /// non-orientable connectivity is accepted with a warning since the
    /// operator assembly does not need global orientation.
    pub fn new(
        vertices: Vec<[f64; 3]>,
        faces: Vec<[usize; 3]>,
        name: Option<String>,
    ) -> Result<Self, MeshError> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= n {
                    return Err(MeshError::Validation(format!(
                        "face {fi} references vertex {v} but the mesh has only {n} vertices"
                    )));
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(MeshError::Validation(format!(
                    "face {fi} repeats a vertex index: {f:?}"
                )));
            }
        }

        let mesh = TriangleMesh {
            vertices,
            faces,
            name,
        };
        let area_tol = AREA_TOL_FACTOR * mesh.bounding_box_diagonal().powi(2);
        for (fi, f) in mesh.faces.iter().enumerate() {
            let a = mesh.face_area(*f);
            if !(a > area_tol) {
                return Err(MeshError::Validation(format!(
                    "face {fi} is degenerate: area {a:.3e} <= tolerance {area_tol:.3e}"
                )));
            }
        }

        let mut edge_count: HashMap<(usize, usize), u32> = HashMap::new();
        for f in &mesh.faces {
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                let key = (a.min(b), a.max(b));
                *edge_count.entry(key).or_insert(0) += 1;
            }
        }
        if let Some((&(a, b), &c)) = edge_count.iter().find(|(_, &c)| c > 2) {
            return Err(MeshError::Validation(format!(
                "edge ({a}, {b}) is shared by {c} faces; at most 2 allowed"
            )));
        }

        if !mesh.consistently_oriented() {
            log::warn!(
                "mesh{} has inconsistent winding or is non-orientable; continuing",
                mesh.name
                    .as_deref()
                    .map(|s| format!(" '{s}'"))
                    .unwrap_or_default()
            );
        }

        Ok(mesh)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn bounding_box_diagonal(&self) -> f64 {
        if self.vertices.is_empty() {
            return 0.0;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2) + (hi[2] - lo[2]).powi(2)).sqrt()
    }

    fn face_area(&self, f: [usize; 3]) -> f64 {
        let [a, b, c] = f;
        let u = sub(self.vertices[b], self.vertices[a]);
        let v = sub(self.vertices[c], self.vertices[a]);
        0.5 * norm(cross(u, v))
    }

    /// Total surface area (sum of face areas).
    pub fn surface_area(&self) -> f64 {
        self.faces.iter().map(|&f| self.face_area(f)).sum()
    }

    /// Area-weighted vertex normals, normalized to unit length. Vertices with
    /// no incident face (impossible on a validated mesh that uses them) or a
    /// cancelling neighborhood fall back to +z.
    pub fn vertex_normals(&self) -> Vec<[f64; 3]> {
        let mut normals = vec![[0.0; 3]; self.vertices.len()];
        for f in &self.faces {
            let u = sub(self.vertices[f[1]], self.vertices[f[0]]);
            let v = sub(self.vertices[f[2]], self.vertices[f[0]]);
            let c = cross(u, v); // magnitude = 2 * area
            for &vi in f {
                for k in 0..3 {
                    normals[vi][k] += c[k];
                }
            }
        }
        for nrm in &mut normals {
            let len = norm(*nrm);
            if len > 1e-300 {
                for k in 0..3 {
                    nrm[k] /= len;
                }
            } else {
                *nrm = [0.0, 0.0, 1.0];
            }
        }
        normals
    }

    /// Returns a copy with every vertex mapped through `x -> R x + t`.
    /// Connectivity and name are preserved; the result is re-validated.
    pub fn rigidly_transformed(&self, rotation: &[[f64; 3]; 3], translation: [f64; 3]) -> Self {
        let vertices = self
            .vertices
            .iter()
            .map(|v| {
                let mut w = translation;
                for i in 0..3 {
                    for j in 0..3 {
                        w[i] += rotation[i][j] * v[j];
                    }
                }
                w
            })
            .collect();
        TriangleMesh {
            vertices,
            faces: self.faces.clone(),
            name: self.name.clone(),
        }
    }

    /// Unique undirected edges as `(min, max)` pairs in sorted order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .faces
            .iter()
            .flat_map(|f| [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    fn consistently_oriented(&self) -> bool {
        let mut seen: HashMap<(usize, usize), bool> = HashMap::new();
        for f in &self.faces {
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                let key = (a.min(b), a.max(b));
                let forward = a < b;
                match seen.get(&key) {
                    None => {
                        seen.insert(key, forward);
                    }
                    // a shared edge must be traversed once in each direction
                    Some(&dir) if dir == forward => return false,
                    Some(_) => {}
                }
            }
        }
        true
    }
}

/// Boolean per-vertex flags aligned with one specific mesh.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexMask {
    flags: Vec<bool>,
}

impl VertexMask {
    pub fn new(flags: Vec<bool>) -> Self {
        VertexMask { flags }
    }

    pub fn all_true(n: usize) -> Self {
        VertexMask {
            flags: vec![true; n],
        }
    }

    pub fn all_false(n: usize) -> Self {
        VertexMask {
            flags: vec![false; n],
        }
    }

    pub fn from_indices(n: usize, indices: &[usize]) -> Self {
        let mut flags = vec![false; n];
        for &i in indices {
            if i < n {
                flags[i] = true;
            }
        }
        VertexMask { flags }
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.flags[i]
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn count_true(&self) -> usize {
        self.flags.iter().filter(|&&b| b).count()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.flags
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }
}

/// A submesh plus the map from its vertices back to the parent mesh.
#[derive(Debug, Clone)]
pub struct SubmeshResult {
    pub mesh: TriangleMesh,
    pub parent_index: Vec<usize>,
}

/// Labels vertices by edge-connected component; labels are `0..c-1` in order
/// of first appearance by vertex index.
pub fn connected_components(mesh: &TriangleMesh) -> Vec<usize> {
    let n = mesh.vertex_count();
    let mut parent: Vec<usize> = (0..n).collect();

    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    for f in mesh.faces() {
        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }

    let mut labels = vec![usize::MAX; n];
    let mut next = 0;
    for v in 0..n {
        let r = find(&mut parent, v);
        if labels[r] == usize::MAX {
            labels[r] = next;
            next += 1;
        }
        labels[v] = labels[r];
    }
    labels
}

/// Number of distinct labels produced by [`connected_components`].
pub fn component_count(mesh: &TriangleMesh) -> usize {
    connected_components(mesh).iter().max().map_or(0, |m| m + 1)
}

/// Keeps exactly the faces whose three vertices are all selected, densely
/// reindexing the surviving vertices. Selected vertices that end up with no
/// complete face are dropped from the submesh (they would be isolated).
pub fn extract_submesh(mesh: &TriangleMesh, keep: &VertexMask) -> Result<SubmeshResult, MeshError> {
    if keep.len() != mesh.vertex_count() {
        return Err(MeshError::DimensionMismatch {
            expected: mesh.vertex_count(),
            actual: keep.len(),
        });
    }

    let surviving: Vec<[usize; 3]> = mesh
        .faces()
        .iter()
        .copied()
        .filter(|f| f.iter().all(|&v| keep.get(v)))
        .collect();
    if surviving.is_empty() {
        return Err(MeshError::EmptySubmesh);
    }

    let mut new_index = vec![usize::MAX; mesh.vertex_count()];
    let mut parent_index = Vec::new();
    // dense reindexing in parent vertex order
    for f in &surviving {
        for &v in f {
            if new_index[v] == usize::MAX {
                new_index[v] = usize::MAX - 1; // mark as used
            }
        }
    }
    for (v, slot) in new_index.iter_mut().enumerate() {
        if *slot == usize::MAX - 1 {
            *slot = parent_index.len();
            parent_index.push(v);
        }
    }

    let vertices: Vec<[f64; 3]> = parent_index.iter().map(|&v| mesh.vertices()[v]).collect();
    let faces: Vec<[usize; 3]> = surviving
        .iter()
        .map(|f| [new_index[f[0]], new_index[f[1]], new_index[f[2]]])
        .collect();

    let sub = TriangleMesh::new(vertices, faces, mesh.name().map(|s| format!("{s}:sub")))?;
    Ok(SubmeshResult {
        mesh: sub,
        parent_index,
    })
}

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

pub(crate) fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm(sub(a, b))
}
