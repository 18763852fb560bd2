//! Content hashes for meshes and configurations, used in cache keys and
//! report metadata so outputs are traceable to exact inputs.

use sha2::{Digest, Sha256};

use crate::mesh::TriangleMesh;

/// SHA-256 over a canonical little-endian encoding of vertex coordinates
/// and face indices.
pub fn mesh_digest(mesh: &TriangleMesh) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update((mesh.vertex_count() as u64).to_le_bytes());
    hasher.update((mesh.face_count() as u64).to_le_bytes());
    for v in mesh.vertices() {
        for c in v {
            hasher.update(c.to_le_bytes());
        }
    }
    for f in mesh.faces() {
        for &i in f {
            hasher.update((i as u64).to_le_bytes());
        }
    }
    hasher.finalize().into()
}

pub fn mesh_digest_hex(mesh: &TriangleMesh) -> String {
    hex(&mesh_digest(mesh))
}

pub fn bytes_digest_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = crate::mesh::tests::tetrahedron();
        let b = crate::mesh::tests::tetrahedron();
        assert_eq!(mesh_digest_hex(&a), mesh_digest_hex(&b));

        let moved = a.rigidly_transformed(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], [1e-9, 0.0, 0.0]);
        assert_ne!(mesh_digest_hex(&a), mesh_digest_hex(&moved));
    }
}
