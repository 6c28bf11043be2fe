//! Explicit-Euler integration of the forced flow ∂X/∂t = −Hν + κ(t)X,
//! adaptive step control, area-preserving rescaling, and finite-difference
//! verification of the metric and mean-curvature evolution equations.

use nalgebra::Vector2;

use crate::error::{Error, Result};
use crate::forcing::ForcingSpec;
use crate::geometry::{build_cache, cotan_laplacian_apply, pinching_diagnostic, GeometryCache};
use crate::mesh::TriangleMesh;
use crate::util::{central_derivative, median, percentile};

/// Stopping and output parameters of a flow run.
#[derive(Clone, Debug)]
pub struct FlowConfig {
    /// Safety factor in (0, 1] multiplying the stability bound.
    pub cfl: f64,
    pub t_end: f64,
    /// Stop when max vertex H reaches this cap.
    pub h_cap: f64,
    /// Stop when area falls below this fraction of the initial area.
    pub min_area_fraction: f64,
    /// Snapshot cadence in steps.
    pub snapshot_every: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            cfl: 0.5,
            t_end: 0.1,
            h_cap: 1e6,
            min_area_fraction: 0.01,
            snapshot_every: 10,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidInput(format!("cfl must be in (0,1], got {}", self.cfl)));
        }
        if !(self.t_end > 0.0) {
            return Err(Error::InvalidInput(format!("t_end must be positive, got {}", self.t_end)));
        }
        if !(self.h_cap > 0.0) {
            return Err(Error::InvalidInput(format!("h_cap must be positive, got {}", self.h_cap)));
        }
        if !(self.min_area_fraction >= 0.0 && self.min_area_fraction < 1.0) {
            return Err(Error::InvalidInput(format!(
                "min_area_fraction must be in [0,1), got {}",
                self.min_area_fraction
            )));
        }
        if self.snapshot_every == 0 {
            return Err(Error::InvalidInput("snapshot_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Scalar summaries refreshed after every step.
#[derive(Clone, Debug)]
pub struct Diagnostics {
    pub area: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// ∫H² dμ / ∫dμ, the mean-square curvature driving the rescale factor.
    pub avg_h2: f64,
    /// max_i |κ_i/H − 1/2| over faces; NaN when convexity is lost.
    pub pinch_dev: f64,
    /// Worst face quality 4√3·A/Σl² (1 for equilateral).
    pub min_face_quality: f64,
    /// All face principal curvatures positive.
    pub convex: bool,
}

/// One configuration of the evolving surface.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub mesh: TriangleMesh,
    pub cache: GeometryCache,
    pub t: f64,
    pub step: usize,
    /// Time step that produced this state (0 for the initial one).
    pub dt_last: f64,
    /// Running ∫₀ᵗ κ.
    pub k_accum: f64,
    pub diagnostics: Diagnostics,
    /// Area-preserving rescale factor; populated by [`rescale_series`].
    pub phi: f64,
    /// Normalized time ∫₀ᵗ φ²; populated by [`rescale_series`].
    pub t_tilde: f64,
}

/// Why a run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    TimeEnd,
    CurvatureCap,
    AreaFloor,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StopReason::TimeEnd => write!(f, "t_end"),
            StopReason::CurvatureCap => write!(f, "h_cap"),
            StopReason::AreaFloor => write!(f, "area_floor"),
        }
    }
}

/// Snapshots plus the stop reason and total step count.
#[derive(Clone, Debug)]
pub struct FlowRun {
    pub snapshots: Vec<FlowState>,
    pub reason: StopReason,
    pub steps: usize,
}

fn diagnostics(mesh: &TriangleMesh, cache: &GeometryCache) -> Diagnostics {
    let h_min = cache.vertex_h.iter().cloned().fold(f64::INFINITY, f64::min);
    let h_max = cache.vertex_h.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mass: f64 = cache.vertex_mass.iter().sum();
    let avg_h2 = cache
        .vertex_mass
        .iter()
        .zip(&cache.vertex_h)
        .map(|(m, h)| m * h * h)
        .sum::<f64>()
        / mass;
    let convex = cache.faces.iter().all(|f| f.kappa[0] > 0.0);
    let pinch_dev = if convex {
        pinching_diagnostic(mesh, cache).map(|p| p.max_dev).unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    let min_face_quality = mesh
        .faces()
        .iter()
        .enumerate()
        .map(|(f, &[a, b, c])| {
            let l2 = (mesh.vertices()[a] - mesh.vertices()[b]).norm_squared()
                + (mesh.vertices()[b] - mesh.vertices()[c]).norm_squared()
                + (mesh.vertices()[c] - mesh.vertices()[a]).norm_squared();
            4.0 * 3f64.sqrt() * cache.faces[f].area / l2
        })
        .fold(f64::INFINITY, f64::min);
    Diagnostics {
        area: cache.total_area,
        h_min,
        h_max,
        avg_h2,
        pinch_dev,
        min_face_quality,
        convex,
    }
}

/// Build a [`FlowState`] for a mesh at time t.
pub fn flow_state(mesh: TriangleMesh, t: f64, forcing: &ForcingSpec) -> Result<FlowState> {
    let cache = build_cache(&mesh)?;
    let diag = diagnostics(&mesh, &cache);
    Ok(FlowState {
        mesh,
        cache,
        t,
        step: 0,
        dt_last: 0.0,
        k_accum: forcing.integral(t),
        diagnostics: diag,
        phi: 1.0,
        t_tilde: 0.0,
    })
}

/// Stability bound: cfl · min(1/max|A|², 1/(2|κ|), mean-edge²/4).
pub fn timestep_bound(max_a2: f64, kappa_abs: f64, mean_edge_sq: f64, cfl: f64) -> f64 {
    let curvature = 1.0 / max_a2.max(1e-300);
    let forcing = 1.0 / (2.0 * kappa_abs + 1e-12);
    let diffusion = mean_edge_sq / 4.0;
    cfl * curvature.min(forcing).min(diffusion)
}

/// Adaptive time step for the current state.
pub fn adaptive_dt(state: &FlowState, forcing: &ForcingSpec, cfl: f64) -> f64 {
    let max_a2 = state.cache.vertex_a2.iter().cloned().fold(0.0f64, f64::max);
    let kappa = forcing.kappa(state.t).abs();
    timestep_bound(max_a2, kappa, state.cache.mean_edge_len.powi(2), cfl)
}

/// One explicit Euler step X ← X + dt·(−Hν + κ(t)X).
pub fn step_unnormalized(state: &FlowState, forcing: &ForcingSpec, dt: f64) -> Result<FlowState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    let kappa = forcing.kappa(state.t);
    let vertices = state
        .mesh
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, x)| {
            x + dt * (-state.cache.vertex_h[i] * state.cache.vertex_normal[i] + kappa * x)
        })
        .collect();
    let mesh = state.mesh.with_vertices(vertices)?;
    let cache = build_cache(&mesh)?;
    let diag = diagnostics(&mesh, &cache);
    let t = state.t + dt;
    Ok(FlowState {
        mesh,
        cache,
        t,
        step: state.step + 1,
        dt_last: dt,
        k_accum: forcing.integral(t),
        diagnostics: diag,
        phi: 1.0,
        t_tilde: 0.0,
    })
}

/// Integrate from a strictly convex initial mesh until t_end, the curvature
/// cap, or the area floor; snapshots at `snapshot_every` steps plus the
/// final state.
pub fn run_flow(mesh0: TriangleMesh, forcing: &ForcingSpec, config: &FlowConfig) -> Result<FlowRun> {
    config.validate()?;
    forcing.validate()?;
    let mut state = flow_state(mesh0, 0.0, forcing)?;
    if !state.diagnostics.convex {
        let bad = state
            .cache
            .faces
            .iter()
            .position(|f| !(f.kappa[0] > 0.0))
            .unwrap_or(0);
        return Err(Error::Convexity(format!(
            "initial mesh is not strictly convex (face {bad} has kappa_min = {:.3e})",
            state.cache.faces[bad].kappa[0]
        )));
    }
    let area0 = state.diagnostics.area;
    let mut snapshots: Vec<FlowState> = Vec::new();
    const MAX_STEPS: usize = 2_000_000;

    loop {
        let reason = if state.t >= config.t_end {
            Some(StopReason::TimeEnd)
        } else if state.diagnostics.h_max >= config.h_cap {
            Some(StopReason::CurvatureCap)
        } else if state.diagnostics.area <= config.min_area_fraction * area0 {
            Some(StopReason::AreaFloor)
        } else {
            None
        };
        let due = state.step % config.snapshot_every == 0 || reason.is_some();
        if due && snapshots.last().map(|s| s.step) != Some(state.step) {
            snapshots.push(state.clone());
        }
        if let Some(reason) = reason {
            let steps = state.step;
            return Ok(FlowRun {
                snapshots,
                reason,
                steps,
            });
        }
        if state.step >= MAX_STEPS {
            return Err(Error::Numerical {
                context: "flow step budget".into(),
                residual: state.t,
                iterations: MAX_STEPS,
            });
        }
        let dt = adaptive_dt(&state, forcing, config.cfl).min(config.t_end - state.t);
        state = step_unnormalized(&state, forcing, dt)?;
    }
}

/// Rescale snapshots to constant area: X̃ = φX with φ = (area₀/area)^{1/2},
/// and the normalized time t̃ = ∫φ² accumulated by the trapezoid rule over
/// the snapshot times. Meshes and diagnostics in the result describe the
/// normalized surfaces.
pub fn rescale_series(snapshots: &[FlowState]) -> Result<Vec<FlowState>> {
    if snapshots.is_empty() {
        return Err(Error::InvalidInput("rescale of an empty snapshot series".into()));
    }
    let area0 = snapshots[0].diagnostics.area;
    if snapshots.iter().any(|s| !(s.diagnostics.area > 0.0)) {
        return Err(Error::InvalidInput("rescale requires positive areas".into()));
    }
    let mut out = Vec::with_capacity(snapshots.len());
    let mut t_tilde = 0.0;
    let mut prev: Option<(f64, f64)> = None; // (t, phi²)
    for snap in snapshots {
        let phi = (area0 / snap.diagnostics.area).sqrt();
        let phi2 = phi * phi;
        if let Some((t_prev, phi2_prev)) = prev {
            t_tilde += 0.5 * (phi2 + phi2_prev) * (snap.t - t_prev);
        }
        prev = Some((snap.t, phi2));
        let mesh = snap
            .mesh
            .with_vertices(snap.mesh.vertices().iter().map(|v| v * phi).collect())?;
        let cache = build_cache(&mesh)?;
        let diag = diagnostics(&mesh, &cache);
        out.push(FlowState {
            mesh,
            cache,
            t: snap.t,
            step: snap.step,
            dt_last: snap.dt_last,
            k_accum: snap.k_accum,
            diagnostics: diag,
            phi,
            t_tilde,
        });
    }
    Ok(out)
}

/// Median/90th-percentile relative residual of a finite-difference check.
#[derive(Clone, Copy, Debug)]
pub struct ResidualReport {
    pub median: f64,
    pub p90: f64,
    pub count: usize,
}

fn residual_report(pairs: &[(f64, f64)]) -> ResidualReport {
    let max_rhs = pairs.iter().map(|(_, r)| r.abs()).fold(0.0f64, f64::max);
    let floor = 1e-6 * max_rhs + 1e-300;
    let rels: Vec<f64> = pairs
        .iter()
        .map(|(fd, rhs)| (fd - rhs).abs() / rhs.abs().max(floor))
        .collect();
    ResidualReport {
        median: median(&rels),
        p90: percentile(&rels, 90.0),
        count: rels.len(),
    }
}

fn require_three(snapshots: &[FlowState]) -> Result<()> {
    if snapshots.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 snapshots for time differencing, got {}",
            snapshots.len()
        )));
    }
    Ok(())
}

/// Check ∂g/∂t = −2Hh + 2κg edgewise: central differences of squared edge
/// lengths against −2H·h(e,e) + 2κ|e|² per face at interior snapshots.
pub fn verify_metric_evolution(
    snapshots: &[FlowState],
    forcing: &ForcingSpec,
) -> Result<ResidualReport> {
    require_three(snapshots)?;
    let mut pairs = Vec::new();
    for w in snapshots.windows(3) {
        let [prev, mid, next] = w else { unreachable!() };
        let kappa = forcing.kappa(mid.t);
        for (f, &[a, b, c]) in mid.mesh.faces().iter().enumerate() {
            let fg = &mid.cache.faces[f];
            let h_face = fg.kappa[0] + fg.kappa[1];
            for (s, t) in [(a, b), (b, c), (c, a)] {
                let sq = |state: &FlowState| {
                    (state.mesh.vertices()[t] - state.mesh.vertices()[s]).norm_squared()
                };
                let fd = central_derivative(prev.t, sq(prev), mid.t, sq(mid), next.t, sq(next));
                let e = mid.mesh.vertices()[t] - mid.mesh.vertices()[s];
                let ef = Vector2::new(e.dot(&fg.frame[0]), e.dot(&fg.frame[1]));
                let h_ee = (fg.shape * ef).dot(&ef);
                let rhs = -2.0 * h_face * h_ee + 2.0 * kappa * e.norm_squared();
                pairs.push((fd, rhs));
            }
        }
    }
    Ok(residual_report(&pairs))
}

/// Check ∂H/∂t = ΔH + |A|²H − κH vertexwise at interior snapshots.
pub fn verify_h_evolution(snapshots: &[FlowState], forcing: &ForcingSpec) -> Result<ResidualReport> {
    require_three(snapshots)?;
    let mut pairs = Vec::new();
    for w in snapshots.windows(3) {
        let [prev, mid, next] = w else { unreachable!() };
        let kappa = forcing.kappa(mid.t);
        let lap_h = cotan_laplacian_apply(&mid.mesh, &mid.cache, &mid.cache.vertex_h);
        for (v, lap) in lap_h.iter().enumerate() {
            let fd = central_derivative(
                prev.t,
                prev.cache.vertex_h[v],
                mid.t,
                mid.cache.vertex_h[v],
                next.t,
                next.cache.vertex_h[v],
            );
            let h = mid.cache.vertex_h[v];
            let rhs = lap + (mid.cache.vertex_a2[v] - kappa) * h;
            pairs.push((fd, rhs));
        }
    }
    Ok(residual_report(&pairs))
}

/// Relative residuals of the rescale ODE d(ln φ)/dt = avg_H2/n − κ at
/// interior snapshots (n = 2 for surfaces).
pub fn phi_log_residuals(snapshots: &[FlowState], forcing: &ForcingSpec) -> Result<Vec<f64>> {
    require_three(snapshots)?;
    let area0 = snapshots[0].diagnostics.area;
    let log_phi = |s: &FlowState| 0.5 * (area0 / s.diagnostics.area).ln();
    let mut rels = Vec::new();
    for w in snapshots.windows(3) {
        let [prev, mid, next] = w else { unreachable!() };
        let fd = central_derivative(
            prev.t,
            log_phi(prev),
            mid.t,
            log_phi(mid),
            next.t,
            log_phi(next),
        );
        let rhs = mid.diagnostics.avg_h2 / 2.0 - forcing.kappa(mid.t);
        rels.push((fd - rhs).abs() / rhs.abs().max(1e-12));
    }
    Ok(rels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_icosphere;
    use approx::assert_relative_eq;

    fn mcf_sphere_run(subdiv: u32, t_end: f64) -> FlowRun {
        let mesh = make_icosphere(1.0, subdiv).unwrap();
        let config = FlowConfig {
            t_end,
            snapshot_every: 4,
            ..FlowConfig::default()
        };
        run_flow(mesh, &ForcingSpec::Zero, &config).unwrap()
    }

    #[test]
    fn single_step_shrinks_unit_sphere() {
        let mesh = make_icosphere(1.0, 3).unwrap();
        let state = flow_state(mesh, 0.0, &ForcingSpec::Zero).unwrap();
        let next = step_unnormalized(&state, &ForcingSpec::Zero, 1e-4).unwrap();
        let dr = next.mesh.mean_radius() - 1.0;
        assert!((dr + 2e-4).abs() <= 0.01 * 2e-4, "dr = {dr:e}");
    }

    #[test]
    fn single_step_balances_forcing() {
        // r' = -n/r + kappa r = -1 + 0.5 at r = 2
        let mesh = make_icosphere(2.0, 3).unwrap();
        let forcing = ForcingSpec::Constant { c: 0.25 };
        let state = flow_state(mesh, 0.0, &forcing).unwrap();
        let next = step_unnormalized(&state, &forcing, 1e-4).unwrap();
        let dr = next.mesh.mean_radius() - 2.0;
        assert!((dr + 0.5e-4).abs() <= 0.01 * 0.5e-4, "dr = {dr:e}");
    }

    #[test]
    fn step_is_the_advertised_update() {
        let mesh = make_icosphere(1.0, 2).unwrap();
        let forcing = ForcingSpec::Constant { c: 0.3 };
        let state = flow_state(mesh, 0.0, &forcing).unwrap();
        let dt = 2e-3;
        let next = step_unnormalized(&state, &forcing, dt).unwrap();
        for i in 0..state.mesh.vertex_count() {
            let manual = state.mesh.vertices()[i]
                + dt * (-state.cache.vertex_h[i] * state.cache.vertex_normal[i]
                    + 0.3 * state.mesh.vertices()[i]);
            assert_eq!(manual, next.mesh.vertices()[i]);
        }
    }

    #[test]
    fn timestep_bound_examples() {
        // curvature term binds: 0.5 * 1/2
        assert_relative_eq!(timestep_bound(2.0, 0.0, 1e9, 0.5), 0.25);
        // forcing term binds: 1/(2*50)
        assert_relative_eq!(timestep_bound(2.0, 50.0, 1e9, 1.0), 0.01, max_relative = 1e-9);
        // linear in cfl while the same term binds
        let a = timestep_bound(3.0, 0.2, 0.5, 0.4);
        let b = timestep_bound(3.0, 0.2, 0.5, 0.8);
        assert_relative_eq!(2.0 * a, b);
    }

    #[test]
    fn mcf_matches_exact_radius() {
        let run = mcf_sphere_run(2, 0.15);
        assert_eq!(run.reason, StopReason::TimeEnd);
        let last = run.snapshots.last().unwrap();
        assert_relative_eq!(last.t, 0.15);
        let exact = (1.0f64 - 4.0 * 0.15).sqrt();
        let got = last.mesh.mean_radius();
        assert!((got - exact).abs() <= 0.01 * exact, "{got} vs {exact}");
        // K stays 0 and the state clock is monotone
        for s in &run.snapshots {
            assert_eq!(s.k_accum, 0.0);
            assert!(s.diagnostics.convex);
        }
    }

    #[test]
    fn curvature_cap_near_extinction() {
        let mesh = make_icosphere(1.0, 2).unwrap();
        let config = FlowConfig {
            t_end: 1.0,
            h_cap: 100.0,
            min_area_fraction: 1e-5, // H = 100 needs area ≈ 4e-4 of initial
            snapshot_every: 50,
            ..FlowConfig::default()
        };
        let run = run_flow(mesh, &ForcingSpec::InvLinear, &config).unwrap();
        assert_eq!(run.reason, StopReason::CurvatureCap);
        let t_stop = run.snapshots.last().unwrap().t;
        // exact extinction for r0=1, n=2 is 1/3
        assert!((0.30..=0.37).contains(&t_stop), "stopped at {t_stop}");
    }

    #[test]
    fn large_forced_sphere_expands() {
        let mesh = make_icosphere(4.0, 2).unwrap();
        let config = FlowConfig {
            t_end: 0.5,
            snapshot_every: 5,
            ..FlowConfig::default()
        };
        let run = run_flow(mesh, &ForcingSpec::Constant { c: 0.5 }, &config).unwrap();
        assert_eq!(run.reason, StopReason::TimeEnd);
        for w in run.snapshots.windows(2) {
            assert!(w[1].diagnostics.area > w[0].diagnostics.area);
        }
    }

    #[test]
    fn nonconvex_start_is_refused() {
        let mesh = make_icosphere(1.0, 2).unwrap();
        let mut vertices = mesh.vertices().to_vec();
        vertices[0] *= 0.2;
        let dented = mesh.with_vertices(vertices).unwrap();
        let err = run_flow(dented, &ForcingSpec::Zero, &FlowConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Convexity(_)), "{err}");
    }

    #[test]
    fn flow_is_deterministic() {
        let a = mcf_sphere_run(1, 0.05);
        let b = mcf_sphere_run(1, 0.05);
        assert_eq!(a.steps, b.steps);
        for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
            for (va, vb) in sa.mesh.vertices().iter().zip(sb.mesh.vertices()) {
                assert_eq!(va.x.to_bits(), vb.x.to_bits());
                assert_eq!(va.y.to_bits(), vb.y.to_bits());
                assert_eq!(va.z.to_bits(), vb.z.to_bits());
            }
        }
    }

    #[test]
    fn halving_cfl_improves_on_coarse_error() {
        let exact = (1.0f64 - 4.0 * 0.1).sqrt();
        let run_with = |cfl: f64| {
            let mesh = make_icosphere(1.0, 2).unwrap();
            let config = FlowConfig {
                cfl,
                t_end: 0.1,
                snapshot_every: 1000,
                ..FlowConfig::default()
            };
            run_flow(mesh, &ForcingSpec::Zero, &config)
                .unwrap()
                .snapshots
                .last()
                .unwrap()
                .mesh
                .mean_radius()
        };
        let coarse = run_with(0.5);
        let fine = run_with(0.25);
        assert!((fine - coarse).abs() < (coarse - exact).abs());
    }

    #[test]
    fn rescale_restores_area_and_tracks_phi() {
        let run = mcf_sphere_run(2, 0.15);
        let rescaled = rescale_series(&run.snapshots).unwrap();
        let area0 = run.snapshots[0].diagnostics.area;
        let mut prev_tilde = -1.0;
        for s in &rescaled {
            assert!((s.diagnostics.area - area0).abs() <= 1e-10 * area0);
            assert!(s.t_tilde > prev_tilde);
            prev_tilde = s.t_tilde;
        }
        // phi(t) = 1/sqrt(1-4t) for the unit MCF sphere
        for s in &rescaled {
            let exact = 1.0 / (1.0 - 4.0 * s.t).sqrt();
            assert!(
                (s.phi - exact).abs() <= 0.01 * exact,
                "phi({}) = {} vs {exact}",
                s.t,
                s.phi
            );
        }
    }

    #[test]
    fn rescale_of_constant_series_is_identity() {
        let mesh = make_icosphere(1.0, 1).unwrap();
        let state = flow_state(mesh, 0.0, &ForcingSpec::Zero).unwrap();
        let mut series = Vec::new();
        for k in 0..3 {
            let mut s = state.clone();
            s.t = 0.1 * k as f64;
            s.step = k;
            series.push(s);
        }
        let rescaled = rescale_series(&series).unwrap();
        for s in &rescaled {
            assert_eq!(s.phi, 1.0);
        }
        assert_relative_eq!(rescaled[2].t_tilde, 0.2, max_relative = 1e-14);
    }

    #[test]
    fn phi_ode_residuals_are_small() {
        let run = mcf_sphere_run(2, 0.12);
        let rels = phi_log_residuals(&run.snapshots, &ForcingSpec::Zero).unwrap();
        assert!(median(&rels) <= 0.02, "median = {}", median(&rels));
    }

    #[test]
    fn metric_evolution_residuals() {
        for forcing in [ForcingSpec::Zero, ForcingSpec::InvLinear] {
            let mesh = make_icosphere(1.0, 2).unwrap();
            let config = FlowConfig {
                t_end: 0.12,
                snapshot_every: 4,
                ..FlowConfig::default()
            };
            let run = run_flow(mesh, &forcing, &config).unwrap();
            let report = verify_metric_evolution(&run.snapshots, &forcing).unwrap();
            assert!(
                report.median <= 0.05,
                "{forcing}: median residual {}",
                report.median
            );
        }
    }

    #[test]
    fn h_evolution_residuals() {
        for forcing in [ForcingSpec::Zero, ForcingSpec::Constant { c: 0.25 }] {
            let mesh = make_icosphere(1.0, 2).unwrap();
            let config = FlowConfig {
                t_end: 0.12,
                snapshot_every: 4,
                ..FlowConfig::default()
            };
            let run = run_flow(mesh, &forcing, &config).unwrap();
            let report = verify_h_evolution(&run.snapshots, &forcing).unwrap();
            assert!(
                report.median <= 0.05,
                "{forcing}: median residual {}",
                report.median
            );
        }
    }

    #[test]
    fn table_forcing_drives_the_flow() {
        // a table that reproduces constant forcing must match it step for step
        let table = ForcingSpec::Table {
            points: vec![(0.0, 0.25), (0.5, 0.25)],
        };
        let constant = ForcingSpec::Constant { c: 0.25 };
        let config = FlowConfig {
            t_end: 0.05,
            snapshot_every: 3,
            ..FlowConfig::default()
        };
        let a = run_flow(make_icosphere(1.0, 1).unwrap(), &table, &config).unwrap();
        let b = run_flow(make_icosphere(1.0, 1).unwrap(), &constant, &config).unwrap();
        assert_eq!(a.steps, b.steps);
        for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
            assert_eq!(sa.t.to_bits(), sb.t.to_bits());
            assert!((sa.k_accum - sb.k_accum).abs() <= 1e-14);
            for (va, vb) in sa.mesh.vertices().iter().zip(sb.mesh.vertices()) {
                assert_eq!(va.x.to_bits(), vb.x.to_bits());
            }
        }
    }

    #[test]
    fn verifiers_need_three_snapshots() {
        let run = mcf_sphere_run(1, 0.02);
        let two = &run.snapshots[..2.min(run.snapshots.len())];
        assert!(verify_metric_evolution(two, &ForcingSpec::Zero).is_err());
        assert!(verify_h_evolution(two, &ForcingSpec::Zero).is_err());
    }
}
