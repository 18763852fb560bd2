//! Deterministic generation of nominal meshes, noisy in-control replicates
//! and defective variants with known ground truth.
//!
//! All randomness comes from the counter-based stream in [`rng`], keyed on
//! `(seed, vertex index)`, so a part is a pure function of its spec and
//! identical on every platform.

pub mod primitives;
pub mod rng;

use serde::{Deserialize, Serialize};

use crate::mesh::{MeshError, TriangleMesh, VertexMask};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("resolution {requested} is unachievable for this primitive (closest {closest})")]
    ResolutionUnachievable { requested: usize, closest: usize },
    #[error("invalid part spec: {0}")]
    InvalidSpec(String),
    #[error("generated mesh failed validation: {0}")]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Primitive {
    Sphere,
    Box,
    ToothedBlock,
    Ellipsoid,
    Strip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefectKind {
    /// Inward dent with a smooth profile.
    Chip,
    /// Inward cut with a sharp conical profile.
    Notch,
    /// Outward bulge with a smooth profile.
    Bump,
}

/// Defect placement. `radius` and `depth` are fractions of the nominal
/// bounding-box diagonal; `center` is a point in mesh coordinates.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DefectSpec {
    pub kind: DefectKind,
    pub center: [f64; 3],
    pub radius: f64,
    pub depth: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PartSpec {
    pub primitive: Primitive,
    /// Target vertex count; the generator picks the closest achievable size.
    pub resolution: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defect: Option<DefectSpec>,
    /// Gaussian displacement along vertex normals, as a fraction of the
    /// bounding-box diagonal.
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

/// What is known by construction about a generated part.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Vertex map onto the nominal mesh of the same primitive and
    /// resolution (the generator preserves connectivity, so this is the
    /// identity); `None` would mean incomparable meshings.
    pub correspondence: Option<Vec<usize>>,
    /// True exactly for vertices displaced by the defect operator.
    pub defect_mask: VertexMask,
}

fn base_mesh(spec: &PartSpec) -> Result<TriangleMesh, SynthError> {
    Ok(match spec.primitive {
        Primitive::Sphere => {
            let f = primitives::sphere_frequency_for(spec.resolution)?;
            primitives::icosphere(f, 1.0)
        }
        Primitive::Box => {
            let cells = primitives::box_cells_for(spec.resolution)?;
            primitives::grid_box(cells, [1.0, 1.0, 1.0])
        }
        Primitive::ToothedBlock => {
            let cells = primitives::toothed_block_cells_for(spec.resolution)?;
            primitives::toothed_block(cells)
        }
        Primitive::Ellipsoid => {
            let f = primitives::sphere_frequency_for(spec.resolution)?;
            primitives::ellipsoid(f)
        }
        Primitive::Strip => {
            let ny = primitives::strip_cells_for(spec.resolution)?;
            primitives::strip(ny)
        }
    })
}

/// Generates a part deterministically from its spec: primitive, then the
/// defect displacement (recorded in the mask), then normal-direction noise.
pub fn generate(spec: &PartSpec) -> Result<(TriangleMesh, GroundTruth), SynthError> {
    if let Some(d) = &spec.defect {
        if !(d.radius > 0.0) || !(d.depth > 0.0) {
            return Err(SynthError::InvalidSpec(
                "defect radius and depth must be positive".into(),
            ));
        }
    }
    if spec.noise_sigma < 0.0 {
        return Err(SynthError::InvalidSpec("noiseSigma must be >= 0".into()));
    }

    let nominal = base_mesh(spec)?;
    let n = nominal.vertex_count();
    let diag = nominal.bounding_box_diagonal();

    let mut positions: Vec<[f64; 3]> = nominal.vertices().to_vec();
    let mut mask = vec![false; n];

    if let Some(d) = &spec.defect {
        let radius = d.radius * diag;
        let depth = d.depth * diag;
        let normals = nominal.vertex_normals();
        for (i, p) in positions.iter_mut().enumerate() {
            let dist = crate::mesh::dist(*p, d.center);
            if dist < radius {
                let u = dist / radius;
                let falloff = match d.kind {
                    DefectKind::Chip | DefectKind::Bump => {
                        let s = 1.0 - u * u;
                        s * s
                    }
                    DefectKind::Notch => 1.0 - u,
                };
                if falloff > 0.0 {
                    let sign = match d.kind {
                        DefectKind::Bump => 1.0,
                        DefectKind::Chip | DefectKind::Notch => -1.0,
                    };
                    let amount = sign * depth * falloff;
                    for k in 0..3 {
                        p[k] += amount * normals[i][k];
                    }
                    mask[i] = true;
                }
            }
        }
    }

    if spec.noise_sigma > 0.0 {
        let sigma = spec.noise_sigma * diag;
        // noise acts on the defected shape, like a scanner would see it
        let shaped = TriangleMesh::new(positions.clone(), nominal.faces().to_vec(), None)?;
        let normals = shaped.vertex_normals();
        for (i, p) in positions.iter_mut().enumerate() {
            let g = rng::gaussian(spec.seed, i as u64);
            for k in 0..3 {
                p[k] += sigma * g * normals[i][k];
            }
        }
    }

    let mesh = TriangleMesh::new(positions, nominal.faces().to_vec(), nominal.name().map(String::from))?;
    Ok((
        mesh,
        GroundTruth {
            correspondence: Some((0..n).collect()),
            defect_mask: VertexMask::new(mask),
        },
    ))
}

/// In-control replicates with seeds `base_seed .. base_seed + count`.
pub fn phase1_batch(
    spec: &PartSpec,
    count: usize,
    base_seed: u64,
) -> Result<Vec<TriangleMesh>, SynthError> {
    if spec.defect.is_some() {
        return Err(SynthError::InvalidSpec(
            "phase-I parts must be generated from a defect-free spec".into(),
        ));
    }
    (0..count)
        .map(|i| {
            let mut s = spec.clone();
            s.seed = base_seed + i as u64;
            generate(&s).map(|(m, _)| m)
        })
        .collect()
}
