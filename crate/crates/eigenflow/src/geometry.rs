//! Discrete curvature data on a triangle mesh: barycentric vertex masses,
//! outward vertex normals, cotangent mean curvature, per-face shape
//! operators with principal curvatures, and the pinching diagnostic.
//!
//! The vertex mean curvature comes from the same cotangent weights the
//! spectrum module assembles, so the flow velocity and the Dirichlet
//! energy share one discrete operator. The per-face shape operator is the
//! symmetrized variation of averaged vertex normals in the face's tangent
//! frame.

use nalgebra::{Matrix2, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use crate::util::{map_indexed, map_indexed_seq};

/// Per-face geometric quantities.
#[derive(Clone, Debug)]
pub struct FaceGeometry {
    pub area: f64,
    /// Outward unit normal.
    pub normal: Vector3<f64>,
    /// Orthonormal tangent frame (t1 along the first edge, t2 = n × t1).
    pub frame: [Vector3<f64>; 2],
    /// Cotangent of the corner angle at vertex k (opposite edge (k+1, k+2)).
    pub cot: [f64; 3],
    /// Gradients of the piecewise-linear hat functions of the three corners.
    pub grad: [Vector3<f64>; 3],
    /// Symmetric shape operator in frame coordinates (units 1/length).
    pub shape: Matrix2<f64>,
    /// Principal curvatures, ascending; trace(shape) = kappa[0] + kappa[1].
    pub kappa: [f64; 2],
}

/// Vertex- and face-level curvature data for one mesh configuration.
#[derive(Clone, Debug)]
pub struct GeometryCache {
    pub faces: Vec<FaceGeometry>,
    /// Barycentric vertex masses (area/3 per incident face); all positive.
    /// This is the quadrature weight for every surface integral.
    pub vertex_mass: Vec<f64>,
    /// Mixed (circumcentric, clamped on obtuse corners) vertex areas; the
    /// normalization that makes the cotangent curvature vector pointwise
    /// consistent at irregular vertices.
    pub vertex_mixed_area: Vec<f64>,
    /// Angle-weighted outward unit vertex normals.
    pub vertex_normal: Vec<Vector3<f64>>,
    /// Signed mean curvature (trace convention: H = n/r on a round sphere).
    pub vertex_h: Vec<f64>,
    /// Mass-averaged squared second-fundamental-form norm κ₁² + κ₂².
    pub vertex_a2: Vec<f64>,
    pub total_area: f64,
    pub mean_edge_len: f64,
}

struct FaceBase {
    area: f64,
    normal: Vector3<f64>,
    frame: [Vector3<f64>; 2],
    cot: [f64; 3],
    grad: [Vector3<f64>; 3],
}

fn face_base(mesh: &TriangleMesh, f: usize) -> FaceBase {
    let [a, b, c] = mesh.faces()[f];
    let (pa, pb, pc) = (mesh.vertices()[a], mesh.vertices()[b], mesh.vertices()[c]);
    let e_ab = pb - pa;
    let e_ac = pc - pa;
    let raw = e_ab.cross(&e_ac);
    let two_area = raw.norm();
    let area = 0.5 * two_area;
    if !(area > 0.0) {
        // flagged after the map so the error can name the face
        return FaceBase {
            area,
            normal: Vector3::zeros(),
            frame: [Vector3::zeros(), Vector3::zeros()],
            cot: [0.0; 3],
            grad: [Vector3::zeros(); 3],
        };
    }
    let normal = raw / two_area;
    let t1 = e_ab / e_ab.norm();
    let t2 = normal.cross(&t1);
    // cot of the angle at each corner = dot of the outgoing edges / 2A
    let cot = [
        e_ab.dot(&e_ac) / two_area,
        (pa - pb).dot(&(pc - pb)) / two_area,
        (pa - pc).dot(&(pb - pc)) / two_area,
    ];
    let grad = [
        normal.cross(&(pc - pb)) / two_area,
        normal.cross(&(pa - pc)) / two_area,
        normal.cross(&(pb - pa)) / two_area,
    ];
    FaceBase {
        area,
        normal,
        frame: [t1, t2],
        cot,
        grad,
    }
}

/// Shape operator of face f from the variation of vertex normals along the
/// three edges, least-squares fitted in the tangent frame and symmetrized.
fn face_shape(
    mesh: &TriangleMesh,
    base: &FaceBase,
    vertex_normal: &[Vector3<f64>],
    f: usize,
) -> (Matrix2<f64>, [f64; 2]) {
    let [a, b, c] = mesh.faces()[f];
    let (pa, pb, pc) = (mesh.vertices()[a], mesh.vertices()[b], mesh.vertices()[c]);
    let [t1, t2] = base.frame;
    let in_frame = |v: Vector3<f64>| Vector2::new(v.dot(&t1), v.dot(&t2));
    let edges = [
        (in_frame(pb - pa), in_frame(vertex_normal[b] - vertex_normal[a])),
        (in_frame(pc - pb), in_frame(vertex_normal[c] - vertex_normal[b])),
        (in_frame(pa - pc), in_frame(vertex_normal[a] - vertex_normal[c])),
    ];
    // W minimizes Σ |W e - dn|² over the three edges: W = (Σ dn eᵀ)(Σ e eᵀ)⁻¹
    let mut ete = Matrix2::zeros();
    let mut dne = Matrix2::zeros();
    for (e, dn) in edges {
        ete += e * e.transpose();
        dne += dn * e.transpose();
    }
    let det = ete.m11 * ete.m22 - ete.m12 * ete.m21;
    let inv = Matrix2::new(ete.m22, -ete.m12, -ete.m21, ete.m11) / det;
    let w = dne * inv;
    let off = 0.5 * (w.m12 + w.m21);
    let shape = Matrix2::new(w.m11, off, off, w.m22);
    let half_tr = 0.5 * (shape.m11 + shape.m22);
    let d = (0.25 * (shape.m11 - shape.m22).powi(2) + shape.m12 * shape.m12).sqrt();
    (shape, [half_tr - d, half_tr + d])
}

fn build_cache_impl(mesh: &TriangleMesh, parallel: bool) -> Result<GeometryCache> {
    let nf = mesh.face_count();
    let nv = mesh.vertex_count();

    let base: Vec<FaceBase> = if parallel {
        map_indexed(nf, |f| face_base(mesh, f))
    } else {
        map_indexed_seq(nf, |f| face_base(mesh, f))
    };

    let mean_area = base.iter().map(|b| b.area).sum::<f64>() / nf as f64;
    if let Some(f) = base.iter().position(|b| !(b.area > 1e-12 * mean_area)) {
        return Err(Error::Structural(format!(
            "face {f} is degenerate (area {:.3e} vs mean {:.3e})",
            base[f].area, mean_area
        )));
    }

    // sequential accumulation in face order keeps results bit-identical
    // between the parallel and sequential paths
    let mut vertex_mass = vec![0.0; nv];
    let mut vertex_mixed_area = vec![0.0; nv];
    let mut normal_accum = vec![Vector3::zeros(); nv];
    let mut position_lap = vec![Vector3::zeros(); nv];
    for (f, b) in base.iter().enumerate() {
        let [i, j, k] = mesh.faces()[f];
        let third = b.area / 3.0;
        let pts = [mesh.vertices()[i], mesh.vertices()[j], mesh.vertices()[k]];
        for (corner, &v) in [i, j, k].iter().enumerate() {
            vertex_mass[v] += third;
            // angle-weighted normals resolve the principal directions far
            // better than area weights near irregular vertices
            let u1 = pts[(corner + 1) % 3] - pts[corner];
            let u2 = pts[(corner + 2) % 3] - pts[corner];
            let cosine = u1.dot(&u2) / (u1.norm() * u2.norm());
            normal_accum[v] += cosine.clamp(-1.0, 1.0).acos() * b.normal;
        }
        // stiffness applied to positions: corner m's cot weights edge (other two)
        for (corner, s, t) in [(0, j, k), (1, k, i), (2, i, j)] {
            let w = 0.5 * b.cot[corner];
            let d = mesh.vertices()[s] - mesh.vertices()[t];
            position_lap[s] += w * d;
            position_lap[t] -= w * d;
        }
        // mixed (Voronoi) area pieces, with the usual obtuse clamping
        let sq = |v: Vector3<f64>| v.norm_squared();
        let (pi, pj, pk) = (mesh.vertices()[i], mesh.vertices()[j], mesh.vertices()[k]);
        if b.cot.iter().all(|&ct| ct >= 0.0) {
            vertex_mixed_area[i] += 0.125 * (sq(pi - pj) * b.cot[2] + sq(pi - pk) * b.cot[1]);
            vertex_mixed_area[j] += 0.125 * (sq(pj - pk) * b.cot[0] + sq(pj - pi) * b.cot[2]);
            vertex_mixed_area[k] += 0.125 * (sq(pk - pi) * b.cot[1] + sq(pk - pj) * b.cot[0]);
        } else {
            for (corner, &v) in [i, j, k].iter().enumerate() {
                vertex_mixed_area[v] += if b.cot[corner] < 0.0 {
                    0.5 * b.area
                } else {
                    0.25 * b.area
                };
            }
        }
    }

    let mut vertex_normal = Vec::with_capacity(nv);
    for (v, n) in normal_accum.iter().enumerate() {
        let len = n.norm();
        if !(len > 0.0) {
            return Err(Error::Structural(format!("vertex {v} has a vanishing normal")));
        }
        vertex_normal.push(n / len);
    }

    // normalizing the curvature vector by the mixed area keeps H pointwise
    // consistent at irregular vertices (the barycentric mass is the
    // integration weight, not a curvature normalizer)
    let vertex_h: Vec<f64> = (0..nv)
        .map(|v| position_lap[v].dot(&vertex_normal[v]) / vertex_mixed_area[v])
        .collect();

    let shapes: Vec<(Matrix2<f64>, [f64; 2])> = if parallel {
        map_indexed(nf, |f| face_shape(mesh, &base[f], &vertex_normal, f))
    } else {
        map_indexed_seq(nf, |f| face_shape(mesh, &base[f], &vertex_normal, f))
    };

    let mut vertex_a2 = vec![0.0; nv];
    for (f, (_, kappa)) in shapes.iter().enumerate() {
        let [i, j, k] = mesh.faces()[f];
        let a2 = kappa[0] * kappa[0] + kappa[1] * kappa[1];
        let third = base[f].area / 3.0;
        for &v in &[i, j, k] {
            vertex_a2[v] += third * a2;
        }
    }
    for v in 0..nv {
        vertex_a2[v] /= vertex_mass[v];
    }

    let total_area = base.iter().map(|b| b.area).sum();
    let mean_edge_len = mesh
        .edges()
        .iter()
        .map(|&(i, j)| (mesh.vertices()[i] - mesh.vertices()[j]).norm())
        .sum::<f64>()
        / mesh.edges().len() as f64;

    let faces = base
        .into_iter()
        .zip(shapes)
        .map(|(b, (shape, kappa))| FaceGeometry {
            area: b.area,
            normal: b.normal,
            frame: b.frame,
            cot: b.cot,
            grad: b.grad,
            shape,
            kappa,
        })
        .collect();

    Ok(GeometryCache {
        faces,
        vertex_mass,
        vertex_mixed_area,
        vertex_normal,
        vertex_h,
        vertex_a2,
        total_area,
        mean_edge_len,
    })
}

/// Build the full curvature cache (parallel face passes when enabled).
pub fn build_cache(mesh: &TriangleMesh) -> Result<GeometryCache> {
    build_cache_impl(mesh, true)
}

/// Sequential build, kept callable for benchmarks and bit-identity tests.
pub fn build_cache_seq(mesh: &TriangleMesh) -> Result<GeometryCache> {
    build_cache_impl(mesh, false)
}

/// The flow velocity −H ν at every vertex.
pub fn mean_curvature_vector(_mesh: &TriangleMesh, cache: &GeometryCache) -> Vec<Vector3<f64>> {
    cache
        .vertex_normal
        .iter()
        .zip(&cache.vertex_h)
        .map(|(nu, h)| -nu * *h)
        .collect()
}

/// Apply the negative-semidefinite Laplacian to a vertex field:
/// (Δu)_i ≈ −(S u)_i / m_i with S the cotangent stiffness.
pub fn cotan_laplacian_apply(mesh: &TriangleMesh, cache: &GeometryCache, field: &[f64]) -> Vec<f64> {
    assert_eq!(field.len(), mesh.vertex_count());
    let mut su = vec![0.0; mesh.vertex_count()];
    for (f, fc) in cache.faces.iter().enumerate() {
        let [i, j, k] = mesh.faces()[f];
        for (corner, s, t) in [(0, j, k), (1, k, i), (2, i, j)] {
            let w = 0.5 * fc.cot[corner];
            let d = field[s] - field[t];
            su[s] += w * d;
            su[t] -= w * d;
        }
    }
    su.iter()
        .zip(&cache.vertex_mass)
        .map(|(s, m)| -s / m)
        .collect()
}

/// Per-face umbilicity measurement: α_i = κ_i / H and the largest
/// deviation max_i |α_i − 1/2| over all faces.
#[derive(Clone, Debug)]
pub struct PinchingDiagnostic {
    pub max_dev: f64,
    pub per_face_alphas: Vec<[f64; 2]>,
}

/// Requires strict convexity (face mean curvature positive everywhere).
pub fn pinching_diagnostic(
    _mesh: &TriangleMesh,
    cache: &GeometryCache,
) -> Result<PinchingDiagnostic> {
    let mut alphas = Vec::with_capacity(cache.faces.len());
    let mut max_dev: f64 = 0.0;
    for (f, fc) in cache.faces.iter().enumerate() {
        let h = fc.kappa[0] + fc.kappa[1];
        if !(h > 0.0) {
            return Err(Error::Convexity(format!(
                "face {f} has non-positive mean curvature H = {h:.3e}"
            )));
        }
        let a = [fc.kappa[0] / h, fc.kappa[1] / h];
        max_dev = max_dev.max((a[0] - 0.5).abs()).max((a[1] - 0.5).abs());
        alphas.push(a);
    }
    Ok(PinchingDiagnostic {
        max_dev,
        per_face_alphas: alphas,
    })
}
