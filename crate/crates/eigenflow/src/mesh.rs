//! Closed oriented triangle meshes: construction with invariant checks,
//! icosphere/ellipsoid generators, and ASCII OFF read/write.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::util::{fmt_g17, parse_g17};

/// A closed, consistently oriented, connected triangle mesh embedded in R³.
///
/// Face windings are counterclockwise seen from outside, so face normals
/// point outward. Topology is immutable after construction; vertex positions
/// move via [`TriangleMesh::with_vertices`].
#[derive(Clone, Debug)]
pub struct TriangleMesh {
    vertices: Vec<Vector3<f64>>,
    faces: Vec<[usize; 3]>,
    /// Undirected edges (i < j), in first-encounter face order.
    edges: Vec<(usize, usize)>,
}

impl TriangleMesh {
    /// Validate all structural invariants and build the mesh.
    pub fn new(vertices: Vec<Vector3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.len() < 4 {
            return Err(Error::Structural(format!(
                "need at least 4 vertices, got {}",
                vertices.len()
            )));
        }
        for (i, v) in vertices.iter().enumerate() {
            if !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()) {
                return Err(Error::Structural(format!("vertex {i} has non-finite coordinates")));
            }
        }
        if faces.len() < 4 {
            return Err(Error::Structural(format!("need at least 4 faces, got {}", faces.len())));
        }

        let nv = vertices.len();
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for (f, &[a, b, c]) in faces.iter().enumerate() {
            if a >= nv || b >= nv || c >= nv {
                return Err(Error::Structural(format!("face {f} references a vertex out of range")));
            }
            if a == b || b == c || a == c {
                return Err(Error::Structural(format!("face {f} repeats a vertex")));
            }
            for (s, t) in [(a, b), (b, c), (c, a)] {
                if directed.insert((s, t), f).is_some() {
                    return Err(Error::Structural(format!(
                        "directed edge {s}->{t} of face {f} appears twice: \
                         non-manifold or inconsistently oriented"
                    )));
                }
            }
        }
        // closed + consistently oriented: every directed edge has its reverse
        for (&(s, t), &f) in &directed {
            if !directed.contains_key(&(t, s)) {
                return Err(Error::Structural(format!(
                    "edge {s}-{t} of face {f} is open (no oppositely oriented twin)"
                )));
            }
        }

        // non-degenerate faces, relative to the mean face area
        let areas: Vec<f64> = faces
            .iter()
            .map(|&[a, b, c]| {
                0.5 * (vertices[b] - vertices[a])
                    .cross(&(vertices[c] - vertices[a]))
                    .norm()
            })
            .collect();
        let mean_area = areas.iter().sum::<f64>() / areas.len() as f64;
        if let Some(f) = areas.iter().position(|&a| !(a > 1e-12 * mean_area)) {
            return Err(Error::Structural(format!(
                "face {f} is degenerate (area {:.3e} vs mean {:.3e})",
                areas[f], mean_area
            )));
        }

        // connectivity via BFS over the edge graph
        let mut adjacency = vec![Vec::new(); nv];
        let mut edges = Vec::new();
        let mut seen = HashSet::new();
        for &[a, b, c] in &faces {
            for (s, t) in [(a, b), (b, c), (c, a)] {
                let key = (s.min(t), s.max(t));
                if seen.insert(key) {
                    edges.push(key);
                    adjacency[key.0].push(key.1);
                    adjacency[key.1].push(key.0);
                }
            }
        }
        let mut visited = vec![false; nv];
        let mut queue = vec![0usize];
        visited[0] = true;
        let mut reached = 1;
        while let Some(v) = queue.pop() {
            for &w in &adjacency[v] {
                if !visited[w] {
                    visited[w] = true;
                    reached += 1;
                    queue.push(w);
                }
            }
        }
        if reached != nv {
            let stray = visited.iter().position(|&v| !v).unwrap();
            return Err(Error::Structural(format!(
                "mesh is disconnected: vertex {stray} unreachable from vertex 0"
            )));
        }

        Ok(Self {
            vertices,
            faces,
            edges,
        })
    }

    /// Same topology with new vertex positions (the flow's move operation).
    /// Geometric degeneracy is re-checked lazily by the geometry cache.
    pub fn with_vertices(&self, vertices: Vec<Vector3<f64>>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::InvalidInput(format!(
                "vertex count changed: {} -> {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        if let Some(i) = vertices
            .iter()
            .position(|v| !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()))
        {
            return Err(Error::Numerical {
                context: format!("vertex {i} coordinates"),
                residual: f64::NAN,
                iterations: 0,
            });
        }
        Ok(Self {
            vertices,
            faces: self.faces.clone(),
            edges: self.edges.clone(),
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Signed volume by the divergence theorem; positive for outward winding.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|&[a, b, c]| {
                self.vertices[a]
                    .cross(&self.vertices[b])
                    .dot(&self.vertices[c])
                    / 6.0
            })
            .sum()
    }

    /// Mean distance of the vertices from the origin.
    pub fn mean_radius(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).sum::<f64>() / self.vertices.len() as f64
    }
}

/// Icosahedron vertices/faces with outward (counterclockwise) winding.
fn icosahedron(radius: f64) -> (Vec<Vector3<f64>>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ];
    let vertices = raw
        .iter()
        .map(|&(x, y, z)| Vector3::new(x, y, z).normalize() * radius)
        .collect();
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

/// Geodesic sphere: icosahedron subdivided `subdivisions` times, vertices
/// projected to the given radius. 12·… pattern: 10·4^k + 2 vertices, 20·4^k faces.
pub fn make_icosphere(radius: f64, subdivisions: u32) -> Result<TriangleMesh> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidInput(format!("icosphere radius must be positive, got {radius}")));
    }
    let (mut vertices, mut faces) = icosahedron(radius);
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vector3<f64>>| -> usize {
            let key = (a.min(b), a.max(b));
            if let Some(&m) = midpoint.get(&key) {
                return m;
            }
            let p = ((vertices[a] + vertices[b]) * 0.5).normalize() * radius;
            vertices.push(p);
            let idx = vertices.len() - 1;
            midpoint.insert(key, idx);
            idx
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    TriangleMesh::new(vertices, faces)
}

/// Axis-aligned ellipsoid: unit icosphere stretched to semi-axes (a, b, c).
pub fn make_ellipsoid(a: f64, b: f64, c: f64, subdivisions: u32) -> Result<TriangleMesh> {
    for (name, s) in [("a", a), ("b", b), ("c", c)] {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::InvalidInput(format!("ellipsoid semi-axis {name} must be positive, got {s}")));
        }
    }
    let sphere = make_icosphere(1.0, subdivisions)?;
    let vertices = sphere
        .vertices()
        .iter()
        .map(|v| Vector3::new(v.x * a, v.y * b, v.z * c))
        .collect();
    sphere.with_vertices(vertices)
}

/// Write ASCII OFF with 17 significant digits (lossless f64 round trip).
pub fn save_mesh(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("OFF\n");
    out.push_str(&format!("{} {} 0\n", mesh.vertex_count(), mesh.face_count()));
    for v in mesh.vertices() {
        out.push_str(&format!("{} {} {}\n", fmt_g17(v.x), fmt_g17(v.y), fmt_g17(v.z)));
    }
    for &[a, b, c] in mesh.faces() {
        out.push_str(&format!("3 {a} {b} {c}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read ASCII OFF and validate every mesh invariant.
pub fn load_mesh(path: &Path) -> Result<TriangleMesh> {
    let text = std::fs::read_to_string(path)?;
    let mut tokens = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(|l| l.split_whitespace());
    let bad = |what: &str| Error::Parse(format!("{}: {what}", path.display()));

    match tokens.next() {
        Some("OFF") => {}
        other => return Err(bad(&format!("expected OFF header, got {other:?}"))),
    }
    let mut count = |what: &str| -> Result<usize> {
        tokens
            .next()
            .and_then(|t| t.parse::<usize>().ok())
            .ok_or_else(|| bad(&format!("missing or invalid {what} count")))
    };
    let nv = count("vertex")?;
    let nf = count("face")?;
    let _ne = count("edge")?;

    let mut vertices = Vec::with_capacity(nv);
    for i in 0..nv {
        let mut coord = |axis: &str| -> Result<f64> {
            tokens
                .next()
                .and_then(parse_g17)
                .ok_or_else(|| bad(&format!("vertex {i}: bad {axis} coordinate")))
        };
        vertices.push(Vector3::new(coord("x")?, coord("y")?, coord("z")?));
    }
    let mut faces = Vec::with_capacity(nf);
    for f in 0..nf {
        let mut idx = |what: &str| -> Result<usize> {
            tokens
                .next()
                .and_then(|t| t.parse::<usize>().ok())
                .ok_or_else(|| bad(&format!("face {f}: bad {what}")))
        };
        let n = idx("vertex count")?;
        if n != 3 {
            return Err(bad(&format!("face {f} has {n} vertices; only triangles are supported")));
        }
        faces.push([idx("index")?, idx("index")?, idx("index")?]);
    }
    if tokens.next().is_some() {
        return Err(bad("trailing data after the last face"));
    }
    TriangleMesh::new(vertices, faces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosahedron_counts_and_orientation() {
        let m = make_icosphere(1.0, 0).unwrap();
        assert_eq!(m.vertex_count(), 12);
        assert_eq!(m.face_count(), 20);
        assert_eq!(m.edges().len(), 30);
        assert!(m.signed_volume() > 0.0);
        // every face normal points away from the centroid (origin)
        for &[a, b, c] in m.faces() {
            let n = (m.vertices()[b] - m.vertices()[a]).cross(&(m.vertices()[c] - m.vertices()[a]));
            let centroid = (m.vertices()[a] + m.vertices()[b] + m.vertices()[c]) / 3.0;
            assert!(n.dot(&centroid) > 0.0);
        }
    }

    #[test]
    fn subdivision_counts() {
        for k in 0..4u32 {
            let m = make_icosphere(2.0, k).unwrap();
            assert_eq!(m.face_count(), 20 * 4usize.pow(k));
            assert_eq!(m.vertex_count(), 10 * 4usize.pow(k) + 2);
            for v in m.vertices() {
                assert!((v.norm() - 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn icosphere_volume_approaches_sphere() {
        let v3 = make_icosphere(1.0, 3).unwrap().signed_volume();
        let v4 = make_icosphere(1.0, 4).unwrap().signed_volume();
        let exact = 4.0 * std::f64::consts::PI / 3.0;
        // inscribed polyhedron: deficit shrinks ~4x per subdivision
        assert!((v4 - exact).abs() < 0.3 * (v3 - exact).abs());
        assert!((v4 - exact).abs() / exact < 3e-3);
    }

    #[test]
    fn off_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mesh.off");
        let m = make_ellipsoid(1.0, 1.0, 1.05, 2).unwrap();
        save_mesh(&m, &path).unwrap();
        let back = load_mesh(&path).unwrap();
        assert_eq!(m.face_count(), back.face_count());
        for (a, b) in m.vertices().iter().zip(back.vertices()) {
            assert_eq!(a.x.to_bits(), b.x.to_bits());
            assert_eq!(a.y.to_bits(), b.y.to_bits());
            assert_eq!(a.z.to_bits(), b.z.to_bits());
        }
        assert_eq!(m.faces(), back.faces());
    }

    #[test]
    fn open_mesh_is_rejected() {
        let m = make_icosphere(1.0, 0).unwrap();
        let faces = m.faces()[1..].to_vec();
        let err = TriangleMesh::new(m.vertices().to_vec(), faces).unwrap_err();
        assert!(matches!(err, Error::Structural(_)), "{err}");
        assert!(err.to_string().contains("open"));
    }

    #[test]
    fn inconsistent_orientation_is_rejected() {
        let m = make_icosphere(1.0, 0).unwrap();
        let mut faces = m.faces().to_vec();
        faces[3].swap(0, 1);
        let err = TriangleMesh::new(m.vertices().to_vec(), faces).unwrap_err();
        assert!(matches!(err, Error::Structural(_)), "{err}");
    }

    #[test]
    fn degenerate_face_is_rejected() {
        let m = make_icosphere(1.0, 0).unwrap();
        let mut vertices = m.vertices().to_vec();
        vertices[0] = vertices[1]; // collapses every face at vertex 0/1 junction
        let err = TriangleMesh::new(vertices, m.faces().to_vec()).unwrap_err();
        assert!(err.to_string().contains("degenerate"), "{err}");
    }

    #[test]
    fn disconnected_mesh_is_rejected() {
        let a = make_icosphere(1.0, 0).unwrap();
        let mut vertices = a.vertices().to_vec();
        let mut faces = a.faces().to_vec();
        let off = vertices.len();
        vertices.extend(a.vertices().iter().map(|v| v + Vector3::new(5.0, 0.0, 0.0)));
        faces.extend(a.faces().iter().map(|f| f.map(|i| i + off)));
        let err = TriangleMesh::new(vertices, faces).unwrap_err();
        assert!(err.to_string().contains("disconnected"), "{err}");
    }

    #[test]
    fn load_rejects_malformed_files() {
        let dir = tempfile::tempdir().unwrap();
        let bad_header = dir.path().join("a.off");
        std::fs::write(&bad_header, "PLY\n3 1 0\n").unwrap();
        assert!(matches!(load_mesh(&bad_header), Err(Error::Parse(_))));

        let truncated = dir.path().join("b.off");
        std::fs::write(&truncated, "OFF\n4 4 0\n0 0 0\n").unwrap();
        assert!(matches!(load_mesh(&truncated), Err(Error::Parse(_))));

        // structurally invalid but syntactically fine: open surface
        let open = dir.path().join("c.off");
        std::fs::write(
            &open,
            "OFF\n4 4 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 1 2\n3 0 1 3\n3 1 2 3\n3 0 1 2\n",
        )
        .unwrap();
        assert!(matches!(load_mesh(&open), Err(Error::Structural(_))));
    }

    #[test]
    fn with_vertices_rejects_non_finite() {
        let m = make_icosphere(1.0, 1).unwrap();
        let mut vertices = m.vertices().to_vec();
        vertices[5].y = f64::NAN;
        assert!(matches!(
            m.with_vertices(vertices),
            Err(Error::Numerical { .. })
        ));
    }
}
