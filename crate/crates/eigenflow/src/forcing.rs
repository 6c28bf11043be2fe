//! Forcing term κ(t) of the flow, its running integral K(t) = ∫₀ᵗ κ,
//! and the shrinking integral I(t) = ∫₀ᵗ e^{−2K(τ)} dτ that governs
//! sphere trajectories and barrier ODEs.
//!
//! The preset kinds carry hand-derived antiderivatives; the table kind
//! linearly interpolates user samples and integrates numerically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::adaptive_simpson;

/// Absolute tolerance for numeric evaluation of ∫ e^{−2K}.
pub const QUADRATURE_TOL: f64 = 1e-12;

/// Time-dependent forcing κ(t).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcingSpec {
    /// κ ≡ 0, the classical mean curvature flow.
    Zero,
    /// κ ≡ c.
    Constant { c: f64 },
    /// κ(t) = 1/(t+1).
    InvLinear,
    /// κ(t) = −1/(t+1).
    NegInvLinear,
    /// Piecewise-linear interpolation of (t, κ) samples starting at t = 0;
    /// κ extends as its last value beyond the final sample.
    Table { points: Vec<(f64, f64)> },
}

impl ForcingSpec {
    /// Check the invariants a forcing must satisfy before use.
    pub fn validate(&self) -> Result<()> {
        match self {
            ForcingSpec::Constant { c } if !c.is_finite() => {
                Err(Error::InvalidInput("constant forcing must be finite".into()))
            }
            ForcingSpec::Table { points } => {
                if points.is_empty() {
                    return Err(Error::InvalidInput("table forcing needs at least one sample".into()));
                }
                if points[0].0 != 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "table forcing must start at t = 0, got t = {}",
                        points[0].0
                    )));
                }
                for w in points.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return Err(Error::InvalidInput(format!(
                            "table times must be strictly increasing, got {} then {}",
                            w[0].0, w[1].0
                        )));
                    }
                }
                if points.iter().any(|(t, k)| !t.is_finite() || !k.is_finite()) {
                    return Err(Error::InvalidInput("table forcing has non-finite entries".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// κ(t).
    pub fn kappa(&self, t: f64) -> f64 {
        match self {
            ForcingSpec::Zero => 0.0,
            ForcingSpec::Constant { c } => *c,
            ForcingSpec::InvLinear => 1.0 / (t + 1.0),
            ForcingSpec::NegInvLinear => -1.0 / (t + 1.0),
            ForcingSpec::Table { points } => {
                let (ts, ks): (Vec<f64>, Vec<f64>) = points.iter().copied().unzip();
                let last = points.len() - 1;
                if t >= ts[last] {
                    return ks[last];
                }
                if t <= ts[0] {
                    return ks[0];
                }
                let seg = ts.partition_point(|&x| x <= t) - 1;
                let w = (t - ts[seg]) / (ts[seg + 1] - ts[seg]);
                ks[seg] * (1.0 - w) + ks[seg + 1] * w
            }
        }
    }

    /// K(t) = ∫₀ᵗ κ(τ) dτ; exact for presets, exact for the piecewise-linear
    /// interpolant in the table case.
    pub fn integral(&self, t: f64) -> f64 {
        match self {
            ForcingSpec::Zero => 0.0,
            ForcingSpec::Constant { c } => c * t,
            ForcingSpec::InvLinear => t.ln_1p(),
            ForcingSpec::NegInvLinear => -t.ln_1p(),
            ForcingSpec::Table { points } => {
                let mut acc = 0.0;
                let mut prev = points[0];
                for &(ti, ki) in &points[1..] {
                    if t <= ti {
                        // partial trapezoid inside this segment
                        let w = (t - prev.0) / (ti - prev.0);
                        let kt = prev.1 * (1.0 - w) + ki * w;
                        return acc + 0.5 * (prev.1 + kt) * (t - prev.0);
                    }
                    acc += 0.5 * (prev.1 + ki) * (ti - prev.0);
                    prev = (ti, ki);
                }
                // constant extension past the last sample
                acc + prev.1 * (t - prev.0)
            }
        }
    }

    /// I(t) = ∫₀ᵗ e^{−2K(τ)} dτ; closed form for presets, adaptive Simpson
    /// plus an analytic constant-κ tail for tables.
    pub fn exp_neg2k_integral(&self, t: f64) -> f64 {
        match self {
            ForcingSpec::Zero => t,
            ForcingSpec::Constant { c } => {
                if *c == 0.0 {
                    t
                } else {
                    (1.0 - (-2.0 * c * t).exp()) / (2.0 * c)
                }
            }
            // e^{-2 ln(1+t)} = (1+t)^{-2}
            ForcingSpec::InvLinear => t / (t + 1.0),
            // e^{+2 ln(1+t)} = (1+t)^2
            ForcingSpec::NegInvLinear => (((t + 1.0).powi(3)) - 1.0) / 3.0,
            ForcingSpec::Table { points } => {
                let t_end = points.last().unwrap().0;
                if t <= t_end {
                    return self.exp_neg2k_quadrature(t);
                }
                let head = self.exp_neg2k_quadrature(t_end);
                let k_last = points.last().unwrap().1;
                let scale = (-2.0 * self.integral(t_end)).exp();
                let tail = if k_last == 0.0 {
                    t - t_end
                } else {
                    (1.0 - (-2.0 * k_last * (t - t_end)).exp()) / (2.0 * k_last)
                };
                head + scale * tail
            }
        }
    }

    /// Numeric evaluation of I(t) by adaptive Simpson, available for every
    /// kind; the preset closed forms are validated against this route.
    pub fn exp_neg2k_quadrature(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let f = |tau: f64| (-2.0 * self.integral(tau)).exp();
        match self {
            ForcingSpec::Table { points } => {
                // integrate segment by segment so kinks don't defeat Simpson
                let mut acc = 0.0;
                let mut lo = 0.0;
                for &(ti, _) in &points[1..] {
                    if t <= ti {
                        return acc + adaptive_simpson(&f, lo, t, QUADRATURE_TOL);
                    }
                    acc += adaptive_simpson(&f, lo, ti, QUADRATURE_TOL);
                    lo = ti;
                }
                acc + adaptive_simpson(&f, lo, t, QUADRATURE_TOL)
            }
            _ => adaptive_simpson(&f, 0.0, t, QUADRATURE_TOL),
        }
    }

    /// Whether evaluation at `t` relies on the constant extension of a table.
    pub fn extrapolates_at(&self, t: f64) -> bool {
        match self {
            ForcingSpec::Table { points } => t > points.last().unwrap().0,
            _ => false,
        }
    }

    /// Load a table forcing from a CSV of `t,kappa` lines (`#` comments allowed).
    pub fn table_from_csv(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split(',').map(str::trim);
            let (t, k) = match (it.next(), it.next(), it.next()) {
                (Some(t), Some(k), None) => (t, k),
                _ => {
                    return Err(Error::Parse(format!(
                        "{}:{}: expected `t,kappa`",
                        path.display(),
                        lineno + 1
                    )))
                }
            };
            let t: f64 = t
                .parse()
                .map_err(|_| Error::Parse(format!("{}:{}: bad time `{t}`", path.display(), lineno + 1)))?;
            let k: f64 = k
                .parse()
                .map_err(|_| Error::Parse(format!("{}:{}: bad kappa `{k}`", path.display(), lineno + 1)))?;
            points.push((t, k));
        }
        let spec = ForcingSpec::Table { points };
        spec.validate()?;
        Ok(spec)
    }
}

impl std::fmt::Display for ForcingSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ForcingSpec::Zero => write!(f, "zero"),
            ForcingSpec::Constant { c } => write!(f, "constant:{c}"),
            ForcingSpec::InvLinear => write!(f, "inv_linear"),
            ForcingSpec::NegInvLinear => write!(f, "neg_inv_linear"),
            ForcingSpec::Table { points } => write!(f, "table[{} samples]", points.len()),
        }
    }
}
