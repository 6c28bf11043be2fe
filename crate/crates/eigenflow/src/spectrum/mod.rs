//! First nonzero closed eigenpairs on the mesh: the linear Laplace–Beltrami
//! generalized problem S u = λ M u via inverse power iteration, and the
//! variational p-Laplace eigenvalue via projected descent (see `p_laplace`).

mod p_laplace;
pub mod sparse;

pub use p_laplace::{first_p_eigenpair, p_rayleigh, PInit};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use crate::util::{map_indexed, map_indexed_seq};
use sparse::{cg_solve, dot, CsrMatrix};

/// Default residual tolerance for the linear eigensolver.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default stationarity tolerance for the p ≠ 2 solver.
pub const DEFAULT_P_TOL: f64 = 1e-7;
/// Default iteration budget for both solvers.
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Cotangent stiffness matrix plus the diagonal (lumped barycentric) mass.
#[derive(Clone, Debug)]
pub struct StiffnessMass {
    /// Symmetric positive semidefinite; u·S·u is the piecewise-linear
    /// Dirichlet energy and constants span the kernel.
    pub stiffness: CsrMatrix,
    /// Strictly positive vertex masses; trace equals the total area.
    pub mass: Vec<f64>,
}

/// One converged eigenpair.
#[derive(Clone, Debug)]
pub struct EigenResult {
    /// Eigenvalue (1/length²).
    pub lambda: f64,
    /// Eigenfunction values per vertex, normalized per the p-constraints.
    pub u: Vec<f64>,
    /// Final residual: operator-equation residual for p = 2, projected
    /// gradient norm for p ≠ 2.
    pub residual: f64,
    pub iterations: usize,
    /// Exponent of the eigenproblem (2 for the linear case).
    pub p: f64,
    /// Residual after each outer iteration.
    pub residual_history: Vec<f64>,
    /// Stationary values of every initialization tried (p ≠ 2 multistart).
    pub candidates: Vec<f64>,
}

fn assemble_impl(mesh: &TriangleMesh, parallel: bool) -> StiffnessMass {
    let nf = mesh.face_count();
    let nv = mesh.vertex_count();

    // per-face cotangents (parallel map), then ordered accumulation
    let face_cots = |f: usize| -> ([f64; 3], f64) {
        let [a, b, c] = mesh.faces()[f];
        let (pa, pb, pc) = (mesh.vertices()[a], mesh.vertices()[b], mesh.vertices()[c]);
        let two_area = (pb - pa).cross(&(pc - pa)).norm();
        let cot = [
            (pb - pa).dot(&(pc - pa)) / two_area,
            (pa - pb).dot(&(pc - pb)) / two_area,
            (pa - pc).dot(&(pb - pc)) / two_area,
        ];
        (cot, 0.5 * two_area)
    };
    let cots: Vec<([f64; 3], f64)> = if parallel {
        map_indexed(nf, face_cots)
    } else {
        map_indexed_seq(nf, face_cots)
    };

    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(8); nv];
    let add = |rows: &mut Vec<Vec<(usize, f64)>>, i: usize, j: usize, w: f64| {
        match rows[i].iter_mut().find(|(c, _)| *c == j) {
            Some((_, v)) => *v += w,
            None => rows[i].push((j, w)),
        }
    };
    let mut mass = vec![0.0; nv];
    for (f, (cot, area)) in cots.iter().enumerate() {
        let [i, j, k] = mesh.faces()[f];
        let third = area / 3.0;
        for &v in &[i, j, k] {
            mass[v] += third;
        }
        for (corner, s, t) in [(0, j, k), (1, k, i), (2, i, j)] {
            let w = 0.5 * cot[corner];
            add(&mut rows, s, s, w);
            add(&mut rows, t, t, w);
            add(&mut rows, s, t, -w);
            add(&mut rows, t, s, -w);
        }
    }
    StiffnessMass {
        stiffness: CsrMatrix::from_rows(rows),
        mass,
    }
}

/// Assemble the cotangent stiffness and lumped mass for a mesh.
pub fn assemble(mesh: &TriangleMesh) -> StiffnessMass {
    assemble_impl(mesh, true)
}

/// Sequential assembly, kept callable for benchmarks and bit-identity tests.
pub fn assemble_seq(mesh: &TriangleMesh) -> StiffnessMass {
    assemble_impl(mesh, false)
}

impl StiffnessMass {
    /// ∫ u dμ with the lumped mass quadrature.
    pub fn integral(&self, u: &[f64]) -> f64 {
        dot(&self.mass, u)
    }

    /// ⟨u, v⟩_M.
    pub fn mass_dot(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).zip(&self.mass).map(|((a, b), m)| a * b * m).sum()
    }

    /// Rayleigh quotient (u·S·u)/(u·M·u).
    pub fn rayleigh(&self, u: &[f64]) -> f64 {
        let su = self.stiffness.mul_vec(u);
        dot(u, &su) / self.mass_dot(u, u)
    }

    /// Remove the mass-weighted mean (projection against constants).
    fn project_constants(&self, u: &mut [f64]) {
        let total: f64 = self.mass.iter().sum();
        let mean = dot(&self.mass, u) / total;
        for x in u.iter_mut() {
            *x -= mean;
        }
    }

    /// Scale u so that ∫ u² dμ = 1.
    fn mass_normalize(&self, u: &mut [f64]) {
        let norm = self.mass_dot(u, u).sqrt();
        for x in u.iter_mut() {
            *x /= norm;
        }
    }

    /// ‖S u − λ M u‖ in the M⁻¹ norm.
    fn residual_norm(&self, u: &[f64], lambda: f64) -> f64 {
        let su = self.stiffness.mul_vec(u);
        su.iter()
            .zip(u)
            .zip(&self.mass)
            .map(|((s, ui), m)| {
                let r = s - lambda * m * ui;
                r * r / m
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Deterministic start vector for the iteration.
fn seeded_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn inverse_iteration(
    ops: &StiffnessMass,
    deflate: &[Vec<f64>],
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<EigenResult> {
    let n = ops.mass.len();
    // near-singular shift keeps the iteration aimed at the smallest
    // nonzero mode while making the system positive definite
    let shift = 1e-8 * ops.stiffness.trace() / n as f64;
    let apply = |x: &[f64]| -> Vec<f64> {
        let mut y = ops.stiffness.mul_vec(x);
        for i in 0..n {
            y[i] += shift * ops.mass[i] * x[i];
        }
        y
    };
    let precond: Vec<f64> = ops
        .stiffness
        .diagonal()
        .iter()
        .zip(&ops.mass)
        .map(|(d, m)| d + shift * m)
        .collect();

    // M-normalize the deflation basis once
    let deflate: Vec<Vec<f64>> = deflate
        .iter()
        .map(|d| {
            let mut d = d.clone();
            ops.mass_normalize(&mut d);
            d
        })
        .collect();
    let project = |u: &mut Vec<f64>| {
        ops.project_constants(u);
        for d in &deflate {
            let coeff = ops.mass_dot(u, d);
            for i in 0..n {
                u[i] -= coeff * d[i];
            }
        }
    };

    let mut u = seeded_vector(n, seed);
    project(&mut u);
    ops.mass_normalize(&mut u);

    let mut history = Vec::new();
    let mut lambda = ops.rayleigh(&u);
    for iter in 0..max_iter {
        let res = ops.residual_norm(&u, lambda);
        history.push(res);
        if res <= tol {
            return Ok(EigenResult {
                lambda,
                u,
                residual: res,
                iterations: iter,
                p: 2.0,
                residual_history: history,
                candidates: Vec::new(),
            });
        }
        // inner solves tighten proportionally to the outer residual
        let inner_rel = (1e-2 * res / lambda.max(1e-300)).clamp(1e-14, 1e-2);
        let b: Vec<f64> = u.iter().zip(&ops.mass).map(|(ui, m)| ui * m).collect();
        let warm: Vec<f64> = u.iter().map(|ui| ui / (lambda + shift)).collect();
        let (mut y, _, _) = cg_solve(apply, &precond, &b, Some(&warm), inner_rel, 10 * n);
        project(&mut y);
        ops.mass_normalize(&mut y);
        u = y;
        lambda = ops.rayleigh(&u);
    }
    Err(Error::Numerical {
        context: "inverse power iteration".into(),
        residual: *history.last().unwrap(),
        iterations: max_iter,
    })
}

/// Smallest nonzero eigenpair of S u = λ M u.
pub fn first_eigenpair(
    ops: &StiffnessMass,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<EigenResult> {
    inverse_iteration(ops, &[], tol, max_iter, seed)
}

/// Smallest eigenpair M-orthogonal to constants and to the supplied
/// eigenvectors; used to confirm no smaller positive mode was missed.
pub fn next_eigenpair(
    ops: &StiffnessMass,
    deflate: &[Vec<f64>],
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<EigenResult> {
    inverse_iteration(ops, deflate, tol, max_iter, seed)
}

/// Write an eigenfunction as `vertex_index,u_value` CSV (17 digits).
pub fn write_eigenfunction_csv(path: &std::path::Path, u: &[f64]) -> Result<()> {
    let mut out = String::from("vertex_index,u_value\n");
    for (i, v) in u.iter().enumerate() {
        out.push_str(&format!("{i},{}\n", crate::util::fmt_g17(*v)));
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_ellipsoid, make_icosphere};
    use approx::assert_relative_eq;

    #[test]
    fn stiffness_kernel_and_symmetry() {
        let mesh = make_ellipsoid(1.0, 0.9, 1.2, 3).unwrap();
        let ops = assemble(&mesh);
        let n = mesh.vertex_count();
        let scale = ops.stiffness.trace() / n as f64;
        // constants in the kernel: row sums vanish
        for i in 0..n {
            assert!(ops.stiffness.row_sum(i).abs() <= 1e-10 * scale);
        }
        let ones = vec![1.0; n];
        for v in ops.stiffness.mul_vec(&ones) {
            assert!(v.abs() <= 1e-10 * scale);
        }
        // assembled symmetrically: entries match bit for bit
        for i in (0..n).step_by(97) {
            for j in 0..n {
                let a = ops.stiffness.get(i, j);
                if a != 0.0 {
                    assert_eq!(a.to_bits(), ops.stiffness.get(j, i).to_bits());
                }
            }
        }
        // mass: positive, trace = total area
        assert!(ops.mass.iter().all(|&m| m > 0.0));
        let area = crate::geometry::build_cache(&mesh).unwrap().total_area;
        assert_relative_eq!(ops.mass.iter().sum::<f64>(), area, max_relative = 1e-12);
    }

    #[test]
    fn dirichlet_energy_matches_gradient_quadrature() {
        // u·S·u must equal Σ_f area |∇u|² for piecewise-linear u
        let mesh = make_ellipsoid(1.0, 0.8, 1.25, 2).unwrap();
        let ops = assemble(&mesh);
        let cache = crate::geometry::build_cache(&mesh).unwrap();
        let u: Vec<f64> = mesh.vertices().iter().map(|v| v.x * v.z + 0.3 * v.y).collect();
        let su = ops.stiffness.mul_vec(&u);
        let energy_matrix = dot(&u, &su);
        let mut energy_faces = 0.0;
        for (f, &[a, b, c]) in mesh.faces().iter().enumerate() {
            let g = cache.faces[f].grad[0] * u[a]
                + cache.faces[f].grad[1] * u[b]
                + cache.faces[f].grad[2] * u[c];
            energy_faces += cache.faces[f].area * g.norm_squared();
        }
        assert_relative_eq!(energy_matrix, energy_faces, max_relative = 1e-10);
    }

    #[test]
    fn coordinate_rayleigh_on_sphere() {
        // z restricted to the unit sphere is a first spherical harmonic
        let mesh = make_icosphere(1.0, 4).unwrap();
        let ops = assemble(&mesh);
        let mut z: Vec<f64> = mesh.vertices().iter().map(|v| v.z).collect();
        ops.project_constants(&mut z);
        let q = ops.rayleigh(&z);
        assert!((q - 2.0).abs() < 0.02 * 2.0, "rayleigh(z) = {q}");
    }

    #[test]
    fn scaling_leaves_stiffness_and_scales_mass() {
        let mesh = make_icosphere(1.0, 2).unwrap();
        // power-of-two scaling keeps every float operation exact
        let scaled = mesh
            .with_vertices(mesh.vertices().iter().map(|v| v * 2.0).collect())
            .unwrap();
        let a = assemble(&mesh);
        let b = assemble(&scaled);
        for i in 0..mesh.vertex_count() {
            assert_eq!(a.mass[i].to_bits(), (b.mass[i] / 4.0).to_bits());
            for j in 0..mesh.vertex_count() {
                let x = a.stiffness.get(i, j);
                let y = b.stiffness.get(i, j);
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn sphere_first_eigenvalue() {
        for (radius, subdiv, expect) in [(1.0, 3, 2.0), (2.0, 3, 0.5)] {
            let mesh = make_icosphere(radius, subdiv).unwrap();
            let ops = assemble(&mesh);
            let eig = first_eigenpair(&ops, DEFAULT_TOL, DEFAULT_MAX_ITER, 0).unwrap();
            assert!(
                (eig.lambda - expect).abs() < 0.02 * expect,
                "r={radius}: lambda = {}",
                eig.lambda
            );
            assert!(eig.residual <= DEFAULT_TOL);
            // normalization constraints
            assert!(ops.integral(&eig.u).abs() <= 1e-8 * ops.mass_dot(&eig.u, &eig.u).sqrt());
            assert_relative_eq!(ops.mass_dot(&eig.u, &eig.u), 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn eigenvalue_scaling_inverse_square() {
        let mesh = make_ellipsoid(1.0, 0.9, 1.1, 2).unwrap();
        let s = 3.0;
        let scaled = mesh
            .with_vertices(mesh.vertices().iter().map(|v| v * s).collect())
            .unwrap();
        let l1 = first_eigenpair(&assemble(&mesh), 1e-11, DEFAULT_MAX_ITER, 1)
            .unwrap()
            .lambda;
        let l2 = first_eigenpair(&assemble(&scaled), 1e-11, DEFAULT_MAX_ITER, 1)
            .unwrap()
            .lambda;
        assert_relative_eq!(l2 * s * s, l1, max_relative = 1e-8);
    }

    #[test]
    fn permutation_invariance() {
        let mesh = make_icosphere(1.0, 2).unwrap();
        let n = mesh.vertex_count();
        // reverse the vertex numbering
        let perm: Vec<usize> = (0..n).rev().collect();
        let vertices: Vec<_> = perm.iter().map(|&old| mesh.vertices()[old]).collect();
        let mut inverse = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let faces: Vec<[usize; 3]> = mesh
            .faces()
            .iter()
            .map(|f| f.map(|v| inverse[v]))
            .collect();
        let permuted = crate::mesh::TriangleMesh::new(vertices, faces).unwrap();
        let l1 = first_eigenpair(&assemble(&mesh), 1e-12, DEFAULT_MAX_ITER, 0)
            .unwrap()
            .lambda;
        let l2 = first_eigenpair(&assemble(&permuted), 1e-12, DEFAULT_MAX_ITER, 0)
            .unwrap()
            .lambda;
        assert!((l1 - l2).abs() <= 1e-12 * l1, "{l1} vs {l2}");
    }

    #[test]
    fn deflation_finds_no_smaller_mode() {
        let mesh = make_ellipsoid(1.0, 0.95, 1.1, 2).unwrap();
        let ops = assemble(&mesh);
        let first = first_eigenpair(&ops, DEFAULT_TOL, DEFAULT_MAX_ITER, 0).unwrap();
        let second =
            next_eigenpair(&ops, std::slice::from_ref(&first.u), 1e-9, DEFAULT_MAX_ITER, 7).unwrap();
        assert!(second.lambda >= first.lambda * (1.0 - 1e-9));
    }

    #[test]
    fn residuals_decrease_monotonically() {
        let mesh = make_icosphere(1.0, 3).unwrap();
        let ops = assemble(&mesh);
        let eig = first_eigenpair(&ops, DEFAULT_TOL, DEFAULT_MAX_ITER, 3).unwrap();
        for w in eig.residual_history.windows(2) {
            assert!(w[1] <= w[0] * 1.01, "residuals {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn minimality_over_random_trials() {
        let mesh = make_icosphere(1.0, 2).unwrap();
        let ops = assemble(&mesh);
        let eig = first_eigenpair(&ops, DEFAULT_TOL, DEFAULT_MAX_ITER, 0).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        for _ in 0..100 {
            let mut v: Vec<f64> = (0..mesh.vertex_count())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            ops.project_constants(&mut v);
            ops.mass_normalize(&mut v);
            assert!(ops.rayleigh(&v) >= eig.lambda - 1e-9);
        }
    }

    #[test]
    fn non_convergence_reports_failure() {
        let mesh = make_icosphere(1.0, 2).unwrap();
        let ops = assemble(&mesh);
        match first_eigenpair(&ops, 1e-14, 2, 0) {
            Err(Error::Numerical { iterations, .. }) => assert_eq!(iterations, 2),
            other => panic!("expected numerical failure, got {other:?}"),
        }
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_assembly_is_bit_identical() {
        let mesh = make_ellipsoid(1.0, 0.9, 1.15, 3).unwrap();
        let a = assemble(&mesh);
        let b = assemble_seq(&mesh);
        assert_eq!(a.stiffness.nnz(), b.stiffness.nnz());
        for i in 0..mesh.vertex_count() {
            assert_eq!(a.mass[i].to_bits(), b.mass[i].to_bits());
            for j in 0..mesh.vertex_count() {
                assert_eq!(a.stiffness.get(i, j).to_bits(), b.stiffness.get(i, j).to_bits());
            }
        }
    }
}
