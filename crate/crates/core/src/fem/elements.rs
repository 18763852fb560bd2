//! Reference-element integrals for linear and cubic Lagrange triangles.
//!
//! Element matrices on the flat embedded triangle reduce to constant
//! combinations of reference integrals because the map from the reference
//! triangle is affine:
//!
//!   K_e = sqrt(det G) * (G^-11 Kxx + G^-12 (Kxy + Kxy^T) + G^-22 Kyy)
//!   M_e = sqrt(det G) * M
//!
//! where G is the 2x2 metric of the embedding. The reference matrices are
//! computed once by inverting the nodal Vandermonde system and integrating
//! monomial products exactly (a! b! / (a+b+2)! on the unit triangle).

use nalgebra::DMatrix;
use std::sync::OnceLock;

use super::FemDegree;

/// Reference integrals for one element family.
pub struct ReferenceElement {
    /// Number of local nodes (3 for P1, 10 for P3).
    pub node_count: usize,
    pub mass: DMatrix<f64>,
    pub kxx: DMatrix<f64>,
    pub kxy: DMatrix<f64>,
    pub kyy: DMatrix<f64>,
}

#[derive(Clone, Copy)]
struct Mono {
    c: f64,
    a: u32,
    b: u32,
}

fn factorial(n: u32) -> f64 {
    (1..=n as u64).product::<u64>() as f64
}

/// Exact integral of x^a y^b over the unit triangle.
fn mono_integral(a: u32, b: u32) -> f64 {
    factorial(a) * factorial(b) / factorial(a + b + 2)
}

fn integrate_product(p: &[Mono], q: &[Mono]) -> f64 {
    let mut acc = 0.0;
    for mp in p {
        for mq in q {
            acc += mp.c * mq.c * mono_integral(mp.a + mq.a, mp.b + mq.b);
        }
    }
    acc
}

fn d_dx(m: &[Mono]) -> Vec<Mono> {
    m.iter()
        .filter(|m| m.a > 0)
        .map(|m| Mono {
            c: m.c * m.a as f64,
            a: m.a - 1,
            b: m.b,
        })
        .collect()
}

fn d_dy(m: &[Mono]) -> Vec<Mono> {
    m.iter()
        .filter(|m| m.b > 0)
        .map(|m| Mono {
            c: m.c * m.b as f64,
            a: m.a,
            b: m.b - 1,
        })
        .collect()
}

fn build(nodes: Vec<(f64, f64)>, exponents: &[(u32, u32)]) -> ReferenceElement {
    let k = nodes.len();
    assert_eq!(k, exponents.len());

    let vandermonde = DMatrix::from_fn(k, k, |i, j| {
        let (x, y) = nodes[i];
        let (a, b) = exponents[j];
        x.powi(a as i32) * y.powi(b as i32)
    });
    let coeffs = vandermonde
        .try_inverse()
        .expect("nodal Vandermonde must be invertible");

    // shape function k as a monomial list: column k of the inverse
    let shapes: Vec<Vec<Mono>> = (0..k)
        .map(|sk| {
            (0..k)
                .map(|j| Mono {
                    c: coeffs[(j, sk)],
                    a: exponents[j].0,
                    b: exponents[j].1,
                })
                .collect()
        })
        .collect();

    let mass = DMatrix::from_fn(k, k, |i, j| integrate_product(&shapes[i], &shapes[j]));
    let dx: Vec<Vec<Mono>> = shapes.iter().map(|s| d_dx(s)).collect();
    let dy: Vec<Vec<Mono>> = shapes.iter().map(|s| d_dy(s)).collect();
    let kxx = DMatrix::from_fn(k, k, |i, j| integrate_product(&dx[i], &dx[j]));
    let kxy = DMatrix::from_fn(k, k, |i, j| integrate_product(&dx[i], &dy[j]));
    let kyy = DMatrix::from_fn(k, k, |i, j| integrate_product(&dy[i], &dy[j]));

    ReferenceElement {
        node_count: k,
        mass,
        kxx,
        kxy,
        kyy,
    }
}

fn p1() -> ReferenceElement {
    build(
        vec![(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)],
        &[(0, 0), (1, 0), (0, 1)],
    )
}

/// Cubic Lagrange triangle. Local node order: the three vertices, then two
/// nodes per edge at 1/3 and 2/3 along (v0,v1), (v1,v2), (v2,v0), then the
/// interior node.
fn p3() -> ReferenceElement {
    let t = 1.0 / 3.0;
    let u = 2.0 / 3.0;
    build(
        vec![
            (0.0, 0.0),
            (1.0, 0.0),
            (0.0, 1.0),
            (t, 0.0),
            (u, 0.0),
            (u, t),
            (t, u),
            (0.0, u),
            (0.0, t),
            (t, t),
        ],
        &[
            (0, 0),
            (1, 0),
            (0, 1),
            (2, 0),
            (1, 1),
            (0, 2),
            (3, 0),
            (2, 1),
            (1, 2),
            (0, 3),
        ],
    )
}

pub fn reference_element(degree: FemDegree) -> &'static ReferenceElement {
    static P1: OnceLock<ReferenceElement> = OnceLock::new();
    static P3: OnceLock<ReferenceElement> = OnceLock::new();
    match degree {
        FemDegree::P1 => P1.get_or_init(p1),
        FemDegree::P3 => P3.get_or_init(p3),
    }
}

/// Metric data of one embedded triangle: inverse metric entries and the
/// area scale sqrt(det G) = 2 * area.
pub struct TriangleMetric {
    pub ginv: [f64; 3], // [g^11, g^12, g^22]
    pub scale: f64,
}

pub fn triangle_metric(p0: [f64; 3], p1: [f64; 3], p2: [f64; 3]) -> TriangleMetric {
    let e1 = [p1[0] - p0[0], p1[1] - p0[1], p1[2] - p0[2]];
    let e2 = [p2[0] - p0[0], p2[1] - p0[1], p2[2] - p0[2]];
    let g11 = e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2];
    let g12 = e1[0] * e2[0] + e1[1] * e2[1] + e1[2] * e2[2];
    let g22 = e2[0] * e2[0] + e2[1] * e2[1] + e2[2] * e2[2];
    let det = g11 * g22 - g12 * g12;
    let scale = det.max(0.0).sqrt();
    TriangleMetric {
        ginv: [g22 / det, -g12 / det, g11 / det],
        scale,
    }
}

/// Dense element stiffness for one triangle.
pub fn element_stiffness(re: &ReferenceElement, m: &TriangleMetric) -> DMatrix<f64> {
    let k = re.node_count;
    let mut out = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let v = m.ginv[0] * re.kxx[(i, j)]
                + m.ginv[1] * (re.kxy[(i, j)] + re.kxy[(j, i)])
                + m.ginv[2] * re.kyy[(i, j)];
            out[(i, j)] = m.scale * v;
        }
    }
    out
}
