//! Right-hand sides of the eigenvalue evolution equations and the
//! bound/derivative/monotonicity checkers that run over a trace.
//!
//! The third integral of each evolution equation contracts the divergence
//! of the shape operator against ∇u; for hypersurfaces of Euclidean space
//! the contracted Codazzi identity turns that divergence into ∇H, so the
//! evaluators use the (much less noisy) gradient of the scalar H field.

use nalgebra::Vector2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::GeometryCache;
use crate::mesh::TriangleMesh;
use crate::spectrum::EigenResult;
use crate::sphere::MonotoneDirection;
use crate::trace::{fmt_p, EigenTrace};
use crate::util::{median, percentile};

/// Face-level ingredients shared by both evolution equations.
struct FaceTerms {
    area: f64,
    /// face-average of the vertex u values
    u_avg: f64,
    /// face-average of the vertex H values
    h_avg: f64,
    /// h(∇u, ∇u) in the face frame
    h_grad_u: f64,
    /// ⟨∇H, ∇u⟩
    grad_h_dot_grad_u: f64,
    /// |∇u|²
    grad_u_sq: f64,
}

fn face_terms<'a>(
    mesh: &'a TriangleMesh,
    cache: &'a GeometryCache,
    u: &'a [f64],
) -> impl Iterator<Item = FaceTerms> + 'a {
    mesh.faces().iter().enumerate().map(move |(f, &[a, b, c])| {
        let fg = &cache.faces[f];
        let grad_u = fg.grad[0] * u[a] + fg.grad[1] * u[b] + fg.grad[2] * u[c];
        let grad_h = fg.grad[0] * cache.vertex_h[a]
            + fg.grad[1] * cache.vertex_h[b]
            + fg.grad[2] * cache.vertex_h[c];
        let gu_frame = Vector2::new(grad_u.dot(&fg.frame[0]), grad_u.dot(&fg.frame[1]));
        FaceTerms {
            area: fg.area,
            u_avg: (u[a] + u[b] + u[c]) / 3.0,
            h_avg: (cache.vertex_h[a] + cache.vertex_h[b] + cache.vertex_h[c]) / 3.0,
            h_grad_u: (fg.shape * gu_frame).dot(&gu_frame),
            grad_h_dot_grad_u: grad_h.dot(&grad_u),
            grad_u_sq: grad_u.norm_squared(),
        }
    })
}

/// dλ₁/dt prediction: −2λ₁κ + 2∫H·h(∇u,∇u) + 2∫uH⟨∇H,∇u⟩.
pub fn eq12_rhs(
    mesh: &TriangleMesh,
    cache: &GeometryCache,
    eigen: &EigenResult,
    kappa_t: f64,
) -> Result<f64> {
    if eigen.u.len() != mesh.vertex_count() {
        return Err(Error::InvalidInput("eigenfunction/mesh size mismatch".into()));
    }
    let mut curvature_term = 0.0;
    let mut gradient_term = 0.0;
    for ft in face_terms(mesh, cache, &eigen.u) {
        curvature_term += 2.0 * ft.area * ft.h_avg * ft.h_grad_u;
        gradient_term += 2.0 * ft.area * ft.u_avg * ft.h_avg * ft.grad_h_dot_grad_u;
    }
    Ok(-2.0 * eigen.lambda * kappa_t + curvature_term + gradient_term)
}

/// dλ_{1,p}/dt prediction:
/// −pκλ_{1,p} + p∫|∇u|^{p−2}H·h(∇u,∇u) + 2∫|∇u|^{p−2}uH⟨∇H,∇u⟩.
pub fn eq13_rhs(
    mesh: &TriangleMesh,
    cache: &GeometryCache,
    eigen: &EigenResult,
    kappa_t: f64,
    p: f64,
) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidInput(format!("need 1 < p < inf, got {p}")));
    }
    if eigen.u.len() != mesh.vertex_count() {
        return Err(Error::InvalidInput("eigenfunction/mesh size mismatch".into()));
    }
    let mut curvature_term = 0.0;
    let mut gradient_term = 0.0;
    for ft in face_terms(mesh, cache, &eigen.u) {
        let b = if ft.grad_u_sq <= 1e-300 && p < 2.0 {
            0.0
        } else {
            ft.grad_u_sq.powf(0.5 * p - 1.0)
        };
        curvature_term += p * ft.area * b * ft.h_avg * ft.h_grad_u;
        gradient_term += 2.0 * ft.area * b * ft.u_avg * ft.h_avg * ft.grad_h_dot_grad_u;
    }
    Ok(-p * eigen.lambda * kappa_t + curvature_term + gradient_term)
}

/// Normalized-flow variant of Eq (1.2): κ replaced by h̃/n (n = 2).
pub fn normalized_eq12_rhs(
    mesh: &TriangleMesh,
    cache: &GeometryCache,
    eigen: &EigenResult,
    h_tilde: f64,
) -> Result<f64> {
    eq12_rhs(mesh, cache, eigen, h_tilde / 2.0)
}

/// Normalized-flow variant of Eq (1.3): κ replaced by h̃/n (n = 2).
pub fn normalized_eq13_rhs(
    mesh: &TriangleMesh,
    cache: &GeometryCache,
    eigen: &EigenResult,
    h_tilde: f64,
    p: f64,
) -> Result<f64> {
    eq13_rhs(mesh, cache, eigen, h_tilde / 2.0, p)
}

/// Verdict of one check over a trace, serialized into the report JSON.
#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub pass: bool,
    pub statistic: f64,
    pub threshold: f64,
    pub worst_time: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p90: Option<f64>,
}

/// The exponential lower bound: min over records of λ₁/envelope ≥ 1 − tol.
pub fn check_bound(trace: &EigenTrace, tol: f64) -> CheckReport {
    let mut min_ratio = f64::INFINITY;
    let mut worst_time = f64::NAN;
    for r in &trace.records {
        let ratio = r.lambda1 / r.envelope;
        if ratio < min_ratio {
            min_ratio = ratio;
            worst_time = r.t;
        }
    }
    CheckReport {
        check: "bound".into(),
        pass: min_ratio >= 1.0 - tol,
        statistic: min_ratio,
        threshold: 1.0 - tol,
        worst_time,
        p90: None,
    }
}

/// FD-vs-evolution-equation consistency at interior records, plus the
/// weaker inequality dλ₁/dt ≥ −2λ₁κ.
pub fn check_derivative(trace: &EigenTrace, tol: f64) -> Vec<CheckReport> {
    let max_lambda = trace
        .records
        .iter()
        .map(|r| r.lambda1.abs())
        .fold(0.0f64, f64::max);
    let floor = 1e-6 * max_lambda + 1e-300;
    let mut rels = Vec::new();
    let mut worst = (0.0f64, f64::NAN);
    let mut ineq_min = (f64::INFINITY, f64::NAN);
    for r in &trace.records {
        if !r.fd_dlambda1.is_finite() {
            continue;
        }
        // symmetric denominator: a zeroed rhs column reads as error ≈ 1
        // instead of blowing past the floor
        let rel = (r.fd_dlambda1 - r.eq12_rhs).abs()
            / r.eq12_rhs.abs().max(r.fd_dlambda1.abs()).max(floor);
        if rel > worst.0 {
            worst = (rel, r.t);
        }
        rels.push(rel);
        let slack = (r.fd_dlambda1 + 2.0 * r.lambda1 * r.kappa) / r.lambda1.abs().max(floor);
        if slack < ineq_min.0 {
            ineq_min = (slack, r.t);
        }
    }
    let med = if rels.is_empty() { f64::NAN } else { median(&rels) };
    let p90 = if rels.is_empty() {
        None
    } else {
        Some(percentile(&rels, 90.0))
    };
    vec![
        CheckReport {
            check: "derivative_eq12".into(),
            pass: med.is_finite() && med <= tol,
            statistic: med,
            threshold: tol,
            worst_time: worst.1,
            p90,
        },
        CheckReport {
            check: "derivative_ineq43".into(),
            pass: ineq_min.0.is_finite() && ineq_min.0 >= -tol,
            statistic: ineq_min.0,
            threshold: -tol,
            worst_time: ineq_min.1,
            p90: None,
        },
    ]
}

/// Per-step monotonicity of a labeled series within relative slack `tol`.
pub fn check_monotone_series(
    label: &str,
    series: &[(f64, f64)],
    direction: MonotoneDirection,
    tol: f64,
) -> CheckReport {
    let mut worst = (0.0f64, f64::NAN);
    for w in series.windows(2) {
        let ((_, prev), (t, next)) = (w[0], w[1]);
        // relative violation of the required direction at this step
        let violation = match direction {
            MonotoneDirection::NonDecreasing => (prev - next) / prev.abs().max(1e-300),
            MonotoneDirection::NonIncreasing => (next - prev) / prev.abs().max(1e-300),
        };
        if violation > worst.0 {
            worst = (violation, t);
        }
    }
    CheckReport {
        check: format!("monotone_{label}_{direction}"),
        pass: worst.0 <= tol,
        statistic: worst.0,
        threshold: tol,
        worst_time: worst.1,
        p90: None,
    }
}

/// Monotonicity of λ₁ and of every λ_{1,p} column in the trace.
pub fn check_monotone(trace: &EigenTrace, direction: MonotoneDirection, tol: f64) -> Vec<CheckReport> {
    let mut reports = Vec::new();
    let lambda1: Vec<(f64, f64)> = trace.records.iter().map(|r| (r.t, r.lambda1)).collect();
    reports.push(check_monotone_series("lambda1", &lambda1, direction, tol));
    for (idx, p) in trace.p_values.iter().enumerate() {
        let series: Vec<(f64, f64)> = trace
            .records
            .iter()
            .map(|r| (r.t, r.lambda1p[idx]))
            .collect();
        reports.push(check_monotone_series(
            &format!("lambda1p_{}", fmt_p(*p)),
            &series,
            direction,
            tol,
        ));
    }
    reports
}
