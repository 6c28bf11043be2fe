//! End-to-end run orchestration: shape construction, flow integration,
//! rescaling, per-snapshot eigensolves, trace assembly, and artifact output.

use std::path::Path;

use crate::config::{RunConfig, ShapeSpec, SpectrumParams};
use crate::error::Result;
use crate::flow::{rescale_series, run_flow, FlowRun, FlowState};
use crate::forcing::ForcingSpec;
use crate::mesh::{load_mesh, make_ellipsoid, make_icosphere, TriangleMesh};
use crate::monotonicity::{eq12_rhs, eq13_rhs};
use crate::spectrum::{assemble, first_eigenpair, first_p_eigenpair, PInit};
use crate::trace::{EigenTrace, TraceMeta, TraceRecord};
use crate::util::fmt_g17;

/// Everything a run produces in memory.
pub struct RunArtifacts {
    pub run: FlowRun,
    pub rescaled: Vec<FlowState>,
    pub trace: EigenTrace,
}

/// Materialize the configured initial surface.
pub fn build_shape(shape: &ShapeSpec) -> Result<TriangleMesh> {
    match shape {
        ShapeSpec::Icosphere { radius, subdivisions } => make_icosphere(*radius, *subdivisions),
        ShapeSpec::Ellipsoid { a, b, c, subdivisions } => make_ellipsoid(*a, *b, *c, *subdivisions),
        ShapeSpec::File { path } => load_mesh(path),
    }
}

/// Solve the spectra snapshot by snapshot and assemble the trace.
///
/// Eigenvectors are sign-aligned to the previous snapshot by mass-weighted
/// projection so u-dependent quantities stay continuous across the
/// multiplicity-3 sphere eigenspace. For p = 2 the p-solver is warm-started
/// from the linear eigenfunction (an exact stationary point); for p ≠ 2 the
/// first snapshot runs the three-start strategy and later snapshots
/// continue from the aligned previous eigenfunction.
pub fn compute_trace(
    snapshots: &[FlowState],
    rescaled: &[FlowState],
    forcing: &ForcingSpec,
    sp: &SpectrumParams,
    meta: TraceMeta,
) -> Result<EigenTrace> {
    let mut trace = EigenTrace {
        p_values: sp.p_values.clone(),
        records: Vec::with_capacity(snapshots.len()),
        meta,
    };
    let mut prev_u: Option<Vec<f64>> = None;
    let mut prev_pu: Vec<Option<Vec<f64>>> = vec![None; sp.p_values.len()];
    let mut lambda1_first = f64::NAN;

    for (snap, resc) in snapshots.iter().zip(rescaled) {
        let ops = assemble(&snap.mesh);
        let mut linear = first_eigenpair(&ops, sp.tol, sp.max_iter, sp.seed)?;
        if let Some(prev) = &prev_u {
            if ops.mass_dot(&linear.u, prev) < 0.0 {
                for x in &mut linear.u {
                    *x = -*x;
                }
            }
        }
        let kappa = forcing.kappa(snap.t);
        let eq12 = eq12_rhs(&snap.mesh, &snap.cache, &linear, kappa)?;

        let mut lambda1p = Vec::with_capacity(sp.p_values.len());
        let mut eq13 = Vec::with_capacity(sp.p_values.len());
        for (idx, &p) in sp.p_values.iter().enumerate() {
            let init = if p == 2.0 {
                PInit::Vector(linear.u.clone())
            } else if let Some(prev) = &prev_pu[idx] {
                PInit::Vector(prev.clone())
            } else {
                PInit::Laplace
            };
            let mut eig = first_p_eigenpair(&snap.mesh, p, sp.p_tol, sp.max_iter, init, sp.seed)?;
            if let Some(prev) = &prev_pu[idx] {
                if ops.mass_dot(&eig.u, prev) < 0.0 {
                    for x in &mut eig.u {
                        *x = -*x;
                    }
                }
            }
            eq13.push(eq13_rhs(&snap.mesh, &snap.cache, &eig, kappa, p)?);
            lambda1p.push(eig.lambda);
            prev_pu[idx] = Some(eig.u);
        }

        if trace.records.is_empty() {
            lambda1_first = linear.lambda;
        }
        trace.records.push(TraceRecord {
            t: snap.t,
            dt: snap.dt_last,
            area: snap.diagnostics.area,
            h_min: snap.diagnostics.h_min,
            h_max: snap.diagnostics.h_max,
            avg_h2: snap.diagnostics.avg_h2,
            pinch_dev: snap.diagnostics.pinch_dev,
            kappa,
            k_accum: snap.k_accum,
            phi: resc.phi,
            t_tilde: resc.t_tilde,
            lambda1: linear.lambda,
            lambda1_residual: linear.residual,
            envelope: (-2.0 * snap.k_accum).exp() * lambda1_first,
            eq12_rhs: eq12,
            fd_dlambda1: f64::NAN,
            lambda1p,
            eq13_rhs: eq13,
        });
        prev_u = Some(linear.u);
    }
    trace.compute_fd();
    Ok(trace)
}

/// Run the whole pipeline described by a config (no file output).
pub fn execute_run(config: &RunConfig) -> Result<RunArtifacts> {
    config.validate()?;
    let mesh = build_shape(&config.shape)?;
    let run = run_flow(mesh, &config.forcing, &config.flow.to_flow_config())?;
    let rescaled = rescale_series(&run.snapshots)?;
    let meta = TraceMeta {
        mesh_source: config.shape.to_string(),
        forcing: config.forcing.to_string(),
        config_hash: config.hash(),
    };
    let trace = compute_trace(&run.snapshots, &rescaled, &config.forcing, &config.spectrum, meta)?;
    Ok(RunArtifacts {
        run,
        rescaled,
        trace,
    })
}

/// Snapshot manifest CSV.
pub fn manifest_csv(snapshots: &[FlowState], rescaled: &[FlowState]) -> String {
    let mut out = String::from("step,t,dt,area,H_min,H_max,avg_H2,pinch_dev,phi,t_tilde,K_accum\n");
    for (s, r) in snapshots.iter().zip(rescaled) {
        let d = &s.diagnostics;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            s.step,
            fmt_g17(s.t),
            fmt_g17(s.dt_last),
            fmt_g17(d.area),
            fmt_g17(d.h_min),
            fmt_g17(d.h_max),
            fmt_g17(d.avg_h2),
            fmt_g17(d.pinch_dev),
            fmt_g17(r.phi),
            fmt_g17(r.t_tilde),
            fmt_g17(s.k_accum),
        ));
    }
    out
}

/// Write trace.csv, manifest.csv, config_echo.json, and (optionally) the
/// snapshot OFF files into `out_dir`.
pub fn write_artifacts(config: &RunConfig, artifacts: &RunArtifacts, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("config_echo.json"), config.to_json_string())?;
    artifacts.trace.write_csv(&out_dir.join("trace.csv"))?;
    std::fs::write(
        out_dir.join("manifest.csv"),
        manifest_csv(&artifacts.run.snapshots, &artifacts.rescaled),
    )?;
    if config.output.dump_meshes {
        for snap in &artifacts.run.snapshots {
            let name = format!("snap_{:08}.off", snap.step);
            crate::mesh::save_mesh(&snap.mesh, &out_dir.join(name))?;
        }
    }
    Ok(())
}
