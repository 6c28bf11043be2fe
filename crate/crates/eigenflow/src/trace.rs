//! The per-snapshot eigenvalue ledger: every quantity the checkers need,
//! written and re-read as CSV with 17 significant digits so verdicts are
//! reproducible bit for bit from the file alone.

use std::path::Path;

use crate::error::{Error, Result};
use crate::util::{central_derivative, fmt_g17, parse_g17};

/// One snapshot row.
#[derive(Clone, Debug, Default)]
pub struct TraceRecord {
    pub t: f64,
    pub dt: f64,
    pub area: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub avg_h2: f64,
    pub pinch_dev: f64,
    pub kappa: f64,
    pub k_accum: f64,
    pub phi: f64,
    pub t_tilde: f64,
    pub lambda1: f64,
    pub lambda1_residual: f64,
    /// e^{−2K(t)}·λ₁(0).
    pub envelope: f64,
    pub eq12_rhs: f64,
    /// Central divided difference of λ₁; NaN at the endpoints.
    pub fd_dlambda1: f64,
    /// λ_{1,p} per requested p, aligned with [`EigenTrace::p_values`].
    pub lambda1p: Vec<f64>,
    /// Eq-(1.3) right-hand side per requested p.
    pub eq13_rhs: Vec<f64>,
}

/// Provenance carried in `#` comment lines of the CSV.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TraceMeta {
    pub mesh_source: String,
    pub forcing: String,
    pub config_hash: String,
}

/// Time series of eigenvalue data along one flow run.
#[derive(Clone, Debug, Default)]
pub struct EigenTrace {
    pub p_values: Vec<f64>,
    pub records: Vec<TraceRecord>,
    pub meta: TraceMeta,
}

/// Column label suffix for a p value (2.0 -> "2", 1.5 -> "1.5").
pub fn fmt_p(p: f64) -> String {
    if p == p.trunc() {
        format!("{}", p as i64)
    } else {
        format!("{p}")
    }
}

const FIXED_COLUMNS: [&str; 16] = [
    "t",
    "dt",
    "area",
    "H_min",
    "H_max",
    "avg_H2",
    "pinch_dev",
    "kappa",
    "K_accum",
    "phi",
    "t_tilde",
    "lambda1",
    "lambda1_residual",
    "envelope",
    "eq12_rhs",
    "fd_dlambda1",
];

impl EigenTrace {
    /// Fill `fd_dlambda1` with 3-point nonuniform central differences of
    /// λ₁ over the snapshot times; endpoints stay NaN.
    pub fn compute_fd(&mut self) {
        for r in &mut self.records {
            r.fd_dlambda1 = f64::NAN;
        }
        for k in 1..self.records.len().saturating_sub(1) {
            let (a, b, c) = (&self.records[k - 1], &self.records[k], &self.records[k + 1]);
            let fd = central_derivative(a.t, a.lambda1, b.t, b.lambda1, c.t, c.lambda1);
            self.records[k].fd_dlambda1 = fd;
        }
    }

    fn header(&self) -> String {
        let mut cols: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
        for p in &self.p_values {
            cols.push(format!("lambda1p_{}", fmt_p(*p)));
            cols.push(format!("eq13_rhs_{}", fmt_p(*p)));
        }
        cols.join(",")
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# mesh_source: {}\n", self.meta.mesh_source));
        out.push_str(&format!("# forcing: {}\n", self.meta.forcing));
        out.push_str(&format!("# config_hash: {}\n", self.meta.config_hash));
        out.push_str(&self.header());
        out.push('\n');
        for r in &self.records {
            let mut fields = vec![
                fmt_g17(r.t),
                fmt_g17(r.dt),
                fmt_g17(r.area),
                fmt_g17(r.h_min),
                fmt_g17(r.h_max),
                fmt_g17(r.avg_h2),
                fmt_g17(r.pinch_dev),
                fmt_g17(r.kappa),
                fmt_g17(r.k_accum),
                fmt_g17(r.phi),
                fmt_g17(r.t_tilde),
                fmt_g17(r.lambda1),
                fmt_g17(r.lambda1_residual),
                fmt_g17(r.envelope),
                fmt_g17(r.eq12_rhs),
                fmt_g17(r.fd_dlambda1),
            ];
            for (lp, rhs) in r.lambda1p.iter().zip(&r.eq13_rhs) {
                fields.push(fmt_g17(*lp));
                fields.push(fmt_g17(*rhs));
            }
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut meta = TraceMeta::default();
        let mut lines = text.lines().peekable();
        while let Some(line) = lines.peek() {
            let Some(rest) = line.strip_prefix('#') else { break };
            let rest = rest.trim();
            if let Some((key, value)) = rest.split_once(':') {
                let value = value.trim().to_string();
                match key.trim() {
                    "mesh_source" => meta.mesh_source = value,
                    "forcing" => meta.forcing = value,
                    "config_hash" => meta.config_hash = value,
                    _ => {}
                }
            }
            lines.next();
        }
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("trace CSV has no header".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < FIXED_COLUMNS.len() {
            return Err(Error::Parse(format!(
                "trace header has {} columns, expected at least {}",
                cols.len(),
                FIXED_COLUMNS.len()
            )));
        }
        for (got, want) in cols.iter().zip(FIXED_COLUMNS.iter()) {
            if got != want {
                return Err(Error::Parse(format!(
                    "trace column mismatch: got `{got}`, expected `{want}`"
                )));
            }
        }
        let mut p_values = Vec::new();
        let extra = &cols[FIXED_COLUMNS.len()..];
        if !extra.len().is_multiple_of(2) {
            return Err(Error::Parse("dangling p-column in trace header".into()));
        }
        for pair in extra.chunks(2) {
            let p_lab = pair[0]
                .strip_prefix("lambda1p_")
                .ok_or_else(|| Error::Parse(format!("unexpected column `{}`", pair[0])))?;
            let want_rhs = format!("eq13_rhs_{p_lab}");
            if pair[1] != want_rhs {
                return Err(Error::Parse(format!(
                    "expected column `{want_rhs}` after `{}`, got `{}`",
                    pair[0], pair[1]
                )));
            }
            let p: f64 = p_lab
                .parse()
                .map_err(|_| Error::Parse(format!("bad p label `{p_lab}`")))?;
            p_values.push(p);
        }

        let mut records = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols.len() {
                return Err(Error::Parse(format!(
                    "trace row {} has {} fields, expected {}",
                    lineno + 1,
                    fields.len(),
                    cols.len()
                )));
            }
            let mut vals = Vec::with_capacity(fields.len());
            for (f, c) in fields.iter().zip(&cols) {
                vals.push(parse_g17(f).ok_or_else(|| {
                    Error::Parse(format!("trace row {}: bad value `{f}` in column {c}", lineno + 1))
                })?);
            }
            let mut r = TraceRecord {
                t: vals[0],
                dt: vals[1],
                area: vals[2],
                h_min: vals[3],
                h_max: vals[4],
                avg_h2: vals[5],
                pinch_dev: vals[6],
                kappa: vals[7],
                k_accum: vals[8],
                phi: vals[9],
                t_tilde: vals[10],
                lambda1: vals[11],
                lambda1_residual: vals[12],
                envelope: vals[13],
                eq12_rhs: vals[14],
                fd_dlambda1: vals[15],
                ..TraceRecord::default()
            };
            for pair in vals[FIXED_COLUMNS.len()..].chunks(2) {
                r.lambda1p.push(pair[0]);
                r.eq13_rhs.push(pair[1]);
            }
            records.push(r);
        }
        for w in records.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(Error::Parse(format!(
                    "trace times must be strictly increasing: {} then {}",
                    w[0].t, w[1].t
                )));
            }
        }
        Ok(Self {
            p_values,
            records,
            meta,
        })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_trace() -> EigenTrace {
        let mut trace = EigenTrace {
            p_values: vec![2.0, 1.5],
            meta: TraceMeta {
                mesh_source: "icosphere r=1 subdiv=2".into(),
                forcing: "zero".into(),
                config_hash: "abc123".into(),
            },
            ..EigenTrace::default()
        };
        for k in 0..5 {
            let t = 0.01 * k as f64 * (1.0 + 0.1 * k as f64); // nonuniform
            trace.records.push(TraceRecord {
                t,
                dt: if k == 0 { 0.0 } else { 0.01 },
                area: 12.0 - t,
                h_min: 1.9,
                h_max: 2.1,
                avg_h2: 4.0,
                pinch_dev: 0.01,
                kappa: 0.0,
                k_accum: 0.0,
                phi: 1.0 + t,
                t_tilde: t,
                lambda1: 2.0 + 8.0 * t + 3.0 * t * t,
                lambda1_residual: 1e-11,
                envelope: 2.0,
                eq12_rhs: 8.0,
                fd_dlambda1: f64::NAN,
                lambda1p: vec![2.0, 1.8],
                eq13_rhs: vec![8.0, 7.5],
            });
        }
        trace.compute_fd();
        trace
    }

    #[test]
    fn header_layout_is_exact() {
        let trace = sample_trace();
        let text = trace.to_csv_string();
        let header = text.lines().nth(3).unwrap();
        assert_eq!(
            header,
            "t,dt,area,H_min,H_max,avg_H2,pinch_dev,kappa,K_accum,phi,t_tilde,\
             lambda1,lambda1_residual,envelope,eq12_rhs,fd_dlambda1,\
             lambda1p_2,eq13_rhs_2,lambda1p_1.5,eq13_rhs_1.5"
        );
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let trace = sample_trace();
        let text = trace.to_csv_string();
        let back = EigenTrace::from_csv_str(&text).unwrap();
        assert_eq!(back.meta, trace.meta);
        assert_eq!(back.p_values, trace.p_values);
        assert_eq!(back.records.len(), trace.records.len());
        for (a, b) in trace.records.iter().zip(&back.records) {
            assert_eq!(a.t.to_bits(), b.t.to_bits());
            assert_eq!(a.lambda1.to_bits(), b.lambda1.to_bits());
            assert_eq!(a.fd_dlambda1.to_bits(), b.fd_dlambda1.to_bits());
            for (x, y) in a.lambda1p.iter().zip(&b.lambda1p) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
        // and the re-serialization is byte identical
        assert_eq!(text, back.to_csv_string());
    }

    #[test]
    fn fd_matches_quadratic_exactly_inside() {
        let trace = sample_trace();
        // lambda1(t) = 2 + 8t + 3t²  =>  d/dt = 8 + 6t, exact for 3-point FD
        for (k, r) in trace.records.iter().enumerate() {
            if k == 0 || k + 1 == trace.records.len() {
                assert!(r.fd_dlambda1.is_nan());
            } else {
                let exact = 8.0 + 6.0 * r.t;
                assert!((r.fd_dlambda1 - exact).abs() < 1e-9, "{}", r.fd_dlambda1);
            }
        }
    }

    #[test]
    fn shuffled_times_are_rejected() {
        let trace = sample_trace();
        let mut lines: Vec<String> = trace.to_csv_string().lines().map(String::from).collect();
        lines.swap(5, 6); // reorder two data rows
        let err = EigenTrace::from_csv_str(&lines.join("\n")).unwrap_err();
        assert!(err.to_string().contains("strictly increasing"), "{err}");
    }

    #[test]
    fn missing_column_is_rejected() {
        let trace = sample_trace();
        let text = trace.to_csv_string();
        let broken = text.replace("lambda1_residual", "lambda_residual");
        assert!(matches!(
            EigenTrace::from_csv_str(&broken),
            Err(Error::Parse(_))
        ));
        // dropping a p column half breaks the pairing
        let broken = text.replace(",eq13_rhs_2", ",oops_2");
        assert!(EigenTrace::from_csv_str(&broken).is_err());
    }
}
