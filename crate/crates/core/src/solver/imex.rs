//! Backward-Euler diffusion with coefficients frozen at the new time level.
//!
//! One step solves
//!
//! ```text
//! (I - dt κ D[g + ν]) z⁺ = z + dt β div(f) + dt s
//! ```
//!
//! with `κ = a/ε^j`, `β = b/ε^i`, `D[·]` the conservative diffusion operator
//! and `s` an optional bulk source. The system is solved for the increment
//! `z⁺ - z`; its mean follows from the constant mode of the right-hand side
//! and the mean-zero part comes from conjugate gradients.

use super::forcing::Forcing;
use super::krylov::{solve_mean_zero, LinearSolveOptions, SolveStats};
use crate::error::{Error, Result};
use crate::grid::{divergence, h1_seminorm, l2_norm, mean_value, DiffusionOperator, ScalarField};
use crate::physics::{FluxClosure, RegimeParams};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Default regularisation: zero for uniformly elliptic closures, otherwise
/// `max(1e-8, 1e-3 ε^j / a)`.
pub fn default_nu(regime: &RegimeParams, closure: &FluxClosure) -> f64 {
    if closure.is_uniformly_elliptic() {
        0.0
    } else {
        (1e-3 * regime.eps.powi(regime.j as i32) / regime.a).max(1e-8)
    }
}

/// Default step `ε/50`, resolving the fast wind phase.
pub fn default_dt(regime: &RegimeParams) -> f64 {
    regime.eps / 50.0
}

/// One step with explicit factors; shared by the ε-problem and the cell
/// problem (where `κ = β = 1` and time is the phase θ).
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_scaled(
    z: &ScalarField,
    t_new: f64,
    dt: f64,
    kappa: f64,
    beta: f64,
    nu: f64,
    forcing: &dyn Forcing,
    lin: &LinearSolveOptions,
) -> Result<(ScalarField, SolveStats)> {
    let grid = *z.grid();
    if !grid.same_as(forcing.grid()) {
        return Err(Error::GridMismatch);
    }
    let c = forcing.sample(t_new)?;
    let op = DiffusionOperator::new(&c.g, nu)?;
    let n = grid.len();

    // increment right-hand side: dt (κ D z + β div f + s)
    let mut rhs = vec![0.0; n];
    op.apply(z.values(), &mut rhs);
    let div_f = divergence(&c.f);
    for (r, d) in rhs.iter_mut().zip(div_f.values()) {
        *r = dt * (kappa * *r + beta * d);
    }
    if let Some(s) = &c.bulk {
        if !s.grid().same_as(&grid) {
            return Err(Error::GridMismatch);
        }
        for (r, v) in rhs.iter_mut().zip(s.values()) {
            *r += dt * v;
        }
    }
    let rhs_mean = rhs.iter().sum::<f64>() / n as f64;

    let scale = dt * kappa;
    let mut diag = op.diagonal();
    diag.iter_mut().for_each(|d| *d = 1.0 - scale * *d);
    let apply = |v: &[f64], out: &mut [f64]| {
        op.apply(v, out);
        for k in 0..v.len() {
            out[k] = v[k] - scale * out[k];
        }
    };
    let mut delta = vec![0.0; n];
    let stats = solve_mean_zero(apply, Some(&diag), &rhs, &mut delta, lin)?;

    let mut next = z.values().to_vec();
    for k in 0..n {
        next[k] += delta[k] + rhs_mean;
    }
    Ok((ScalarField::from_vec_unchecked(grid, next), stats))
}

/// Advances `z` from `t` to `t + dt` for the regime's equation.
pub fn step_imex(
    z: &ScalarField,
    t: f64,
    dt: f64,
    regime: &RegimeParams,
    forcing: &dyn Forcing,
    lin: &LinearSolveOptions,
) -> Result<ScalarField> {
    regime.validate()?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    step_scaled(
        z,
        t + dt,
        dt,
        regime.diffusion_factor(),
        regime.source_factor(),
        regime.nu,
        forcing,
        lin,
    )
    .map(|(z, _)| z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub dt: f64,
    pub t_end: f64,
    pub linear: LinearSolveOptions,
    /// Keep every `stride`-th step as a snapshot.
    pub stride: usize,
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= self.dt) {
            return Err(Error::InvalidParameter(format!(
                "horizon {} shorter than one step {}",
                self.t_end, self.dt
            )));
        }
        if self.stride == 0 {
            return Err(Error::InvalidParameter("snapshot stride must be positive".into()));
        }
        self.linear.validate()
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt + 1e-9).floor() as usize
    }
}

/// Per-step diagnostics, index 0 being the initial state.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NormSeries {
    pub time: Vec<f64>,
    pub l2: Vec<f64>,
    pub h1_semi: Vec<f64>,
    pub mean: Vec<f64>,
    /// `(mean_k - mean_{k-1}) / dt`
    pub dmean_dt: Vec<f64>,
    /// `‖(z_k - z_{k-1}) / dt‖₂`
    pub dzdt_l2: Vec<f64>,
}

impl NormSeries {
    fn push(&mut self, t: f64, z: &ScalarField, prev: Option<(&ScalarField, f64)>) {
        let m = mean_value(z);
        let (dm, dz) = match prev {
            Some((p, dt)) => {
                let diff = z.sub(p).expect("same grid");
                ((m - mean_value(p)) / dt, l2_norm(&diff) / dt)
            }
            None => (0.0, 0.0),
        };
        self.time.push(t);
        self.l2.push(l2_norm(z));
        self.h1_semi.push(h1_seminorm(z));
        self.mean.push(m);
        self.dmean_dt.push(dm);
        self.dzdt_l2.push(dz);
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// CSV with columns `step,time,l2,h1_semi,mean,drift`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "step,time,l2,h1_semi,mean,drift")?;
        let m0 = self.mean.first().copied().unwrap_or(0.0);
        for k in 0..self.len() {
            writeln!(
                w,
                "{k},{:e},{:e},{:e},{:e},{:e}",
                self.time[k],
                self.l2[k],
                self.h1_semi[k],
                self.mean[k],
                self.mean[k] - m0
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub dt: f64,
    pub times: Vec<f64>,
    pub snapshots: Vec<ScalarField>,
    pub series: NormSeries,
    pub linear_iterations: usize,
}

impl SolveResult {
    /// Wraps externally produced snapshots (for post-processing checks);
    /// the norm series is rebuilt from the snapshots.
    pub fn from_snapshots(times: Vec<f64>, snapshots: Vec<ScalarField>) -> Result<Self> {
        if times.len() != snapshots.len() || times.is_empty() {
            return Err(Error::InvalidParameter(
                "need one time per snapshot and at least one snapshot".into(),
            ));
        }
        let mut series = NormSeries::default();
        for k in 0..times.len() {
            let prev = (k > 0).then(|| (&snapshots[k - 1], times[k] - times[k - 1]));
            series.push(times[k], &snapshots[k], prev);
        }
        let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        Ok(Self {
            dt,
            times,
            snapshots,
            series,
            linear_iterations: 0,
        })
    }

    pub fn final_state(&self) -> &ScalarField {
        self.snapshots.last().expect("at least one snapshot")
    }
}

/// Marches [`step_imex`] over `[0, T]`.
pub fn solve_parabolic(
    z0: &ScalarField,
    regime: &RegimeParams,
    forcing: &dyn Forcing,
    cfg: &SolveConfig,
) -> Result<SolveResult> {
    regime.validate()?;
    cfg.validate()?;
    if !z0.is_finite() {
        return Err(Error::NonFinite("initial data".into()));
    }
    let steps = cfg.steps();
    let (kappa, beta) = (regime.diffusion_factor(), regime.source_factor());
    let mut z = z0.clone();
    let mut series = NormSeries::default();
    series.push(0.0, &z, None);
    let mut times = vec![0.0];
    let mut snapshots = vec![z.clone()];
    let mut iterations = 0;
    for n in 1..=steps {
        let t = n as f64 * cfg.dt;
        let (next, stats) = step_scaled(&z, t, cfg.dt, kappa, beta, regime.nu, forcing, &cfg.linear)
            .map_err(|e| Error::Step {
                step: n,
                source: Box::new(e),
            })?;
        if !next.is_finite() {
            return Err(Error::Blowup { step: n });
        }
        iterations += stats.iterations;
        series.push(t, &next, Some((&z, cfg.dt)));
        z = next;
        if n % cfg.stride == 0 {
            times.push(t);
            snapshots.push(z.clone());
        }
    }
    Ok(SolveResult {
        dt: cfg.dt,
        times,
        snapshots,
        series,
        linear_iterations: iterations,
    })
}

/// Largest deviation of the mean from its initial value over all steps.
pub fn mass_drift(result: &SolveResult) -> f64 {
    let m = &result.series.mean;
    let m0 = m.first().copied().unwrap_or(0.0);
    m.iter().fold(0.0, |acc, v| acc.max((v - m0).abs()))
}
