//! θ-periodic cell problem `∂U/∂θ − ∇·(g̃∇U) = ∇·f̃` at frozen slow time,
//! its long-term elliptic limit and the first-order corrector.
//!
//! The periodic solution is found by marching whole periods with the same
//! backward-Euler step as the ε-problem (unit coefficients, step `1/M`)
//! until two consecutive period starts agree. Under a positive coefficient
//! floor each period is a contraction on the mean-zero complement.

use crate::error::{Error, Result};
use crate::field_io::write_dhf1;
use crate::grid::{l2_norm, DiffusionOperator, ScalarField, TorusGrid, VectorField2};
use crate::physics::{reduce_phase, FluxClosure, WindModel, DEFAULT_DELTA_SPEED};
use crate::solver::imex::step_scaled;
use crate::solver::{
    solve_mean_zero, CellForcing, Coefficients, Forcing, LinearSolveOptions, SolveStats,
};
use serde::{Deserialize, Serialize};
use std::io::Write;

pub const MIN_THETA_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    /// θ samples per period; the step is `1/m`.
    pub m: usize,
    pub tol_per: f64,
    pub max_periods: usize,
    pub linear: LinearSolveOptions,
}

impl Default for CellConfig {
    fn default() -> Self {
        Self {
            m: 64,
            tol_per: 1e-10,
            max_periods: 400,
            linear: LinearSolveOptions::default(),
        }
    }
}

impl CellConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < MIN_THETA_SAMPLES {
            return Err(Error::InvalidParameter(format!(
                "need at least {MIN_THETA_SAMPLES} theta samples, got {}",
                self.m
            )));
        }
        if !(self.tol_per > 0.0 && self.tol_per.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "periodicity tolerance must be positive, got {}",
                self.tol_per
            )));
        }
        if self.max_periods == 0 {
            return Err(Error::InvalidParameter("max_periods must be positive".into()));
        }
        self.linear.validate()
    }
}

/// One period of the periodic attractor: `fields[k] = U(θ_k)`, `θ_k = k/M`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSolution {
    pub t_slow: f64,
    pub thetas: Vec<f64>,
    pub fields: Vec<ScalarField>,
    /// `‖U(θ₀ + 1) − U(θ₀)‖₂` of the returned period.
    pub residual: f64,
    pub periods: usize,
    /// Residual after each marched period.
    pub history: Vec<f64>,
}

/// Metadata record written next to the DHF1 frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMeta {
    pub t_slow: f64,
    pub m: usize,
    pub residual: f64,
    pub periods: usize,
}

impl CellSolution {
    pub fn m(&self) -> usize {
        self.fields.len()
    }

    pub fn grid(&self) -> &TorusGrid {
        self.fields[0].grid()
    }

    pub fn meta(&self) -> CellMeta {
        CellMeta {
            t_slow: self.t_slow,
            m: self.m(),
            residual: self.residual,
            periods: self.periods,
        }
    }

    /// Writes the `M` fields as concatenated DHF1 frames.
    pub fn write_frames<W: Write>(&self, w: &mut W) -> Result<()> {
        self.fields.iter().try_for_each(|f| write_dhf1(w, f))
    }

    /// `U(θ)` with periodic linear interpolation between samples.
    pub fn at_phase(&self, theta: f64) -> ScalarField {
        let m = self.m();
        let s = reduce_phase(theta) * m as f64;
        let k = (s.floor() as usize).min(m - 1);
        let w = s - k as f64;
        if w == 0.0 {
            return self.fields[k].clone();
        }
        let (a, b) = (&self.fields[k], &self.fields[(k + 1) % m]);
        let v = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (1.0 - w) * x + w * y)
            .collect();
        ScalarField::from_vec_unchecked(*a.grid(), v)
    }

    pub fn same_sampling(&self, other: &CellSolution) -> bool {
        self.m() == other.m() && self.grid().same_as(other.grid())
    }
}

/// `U^ε(t) = U(t, t/ε)` for a single frozen slow time.
pub fn reconstruct(u: &CellSolution, eps: f64, t: f64) -> ScalarField {
    u.at_phase(t / eps)
}

/// Marches the θ-periodic problem driven by `forcing` (evaluated at phase θ)
/// from `init` until periodic. The result is labelled with `t_slow`.
pub fn solve_periodic_with(
    forcing: &dyn Forcing,
    t_slow: f64,
    init: &ScalarField,
    cfg: &CellConfig,
) -> Result<CellSolution> {
    cfg.validate()?;
    let grid = *forcing.grid();
    if !init.grid().same_as(&grid) {
        return Err(Error::GridMismatch);
    }
    if !init.is_finite() {
        return Err(Error::NonFinite("cell initial guess".into()));
    }
    let m = cfg.m;
    let dtheta = 1.0 / m as f64;
    let thetas: Vec<f64> = (0..m).map(|k| k as f64 * dtheta).collect();
    let mut start = init.clone();
    let mut history = Vec::new();
    for period in 1..=cfg.max_periods {
        let mut fields = Vec::with_capacity(m);
        fields.push(start.clone());
        let mut u = start.clone();
        for k in 1..=m {
            let (next, _) = step_scaled(
                &u,
                k as f64 * dtheta,
                dtheta,
                1.0,
                1.0,
                0.0,
                forcing,
                &cfg.linear,
            )?;
            if !next.is_finite() {
                return Err(Error::Blowup { step: (period - 1) * m + k });
            }
            u = next;
            if k < m {
                fields.push(u.clone());
            }
        }
        let residual = l2_norm(&u.sub(&start)?);
        history.push(residual);
        if residual < cfg.tol_per {
            return Ok(CellSolution {
                t_slow,
                thetas,
                fields,
                residual,
                periods: period,
                history,
            });
        }
        start = u;
    }
    Err(Error::NotPeriodic {
        periods: cfg.max_periods,
        last: *history.last().unwrap_or(&f64::NAN),
        tolerance: cfg.tol_per,
        history,
    })
}

fn require_elliptic(closure: &FluxClosure) -> Result<()> {
    if closure.is_uniformly_elliptic() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(
            "cell problem needs a uniformly elliptic closure (positive coefficient floor)".into(),
        ))
    }
}

/// Periodic profile `U(t_slow, ·, ·)` starting from `U = 0`.
pub fn solve_cell_periodic(
    wind: &WindModel,
    closure: &FluxClosure,
    t_slow: f64,
    grid: TorusGrid,
    cfg: &CellConfig,
) -> Result<CellSolution> {
    solve_cell_periodic_from(wind, closure, t_slow, &ScalarField::zeros(grid), cfg)
}

/// As [`solve_cell_periodic`] with an explicit initial guess at θ = 0.
pub fn solve_cell_periodic_from(
    wind: &WindModel,
    closure: &FluxClosure,
    t_slow: f64,
    init: &ScalarField,
    cfg: &CellConfig,
) -> Result<CellSolution> {
    require_elliptic(closure)?;
    let forcing = CellForcing::new(*init.grid(), *wind, *closure, t_slow);
    solve_periodic_with(&forcing, t_slow, init, cfg)
}

/// θ-samples of `g̃(t_slow, θ, ·)`.
pub fn cell_coefficients(
    wind: &WindModel,
    closure: &FluxClosure,
    t_slow: f64,
    grid: TorusGrid,
    m: usize,
) -> Result<Vec<ScalarField>> {
    (0..m)
        .map(|k| {
            let u = wind.eval(&grid, t_slow, k as f64 / m as f64);
            closure.coefficients_from_wind(&u, DEFAULT_DELTA_SPEED).map(|(g, _)| g)
        })
        .collect()
}

/// Mean-zero solution of `∇·(ḡ∇U) = s` (mean of `s` removed), with `ḡ` the
/// given coefficient.
pub fn solve_elliptic(
    g: &ScalarField,
    s: &ScalarField,
    lin: &LinearSolveOptions,
) -> Result<(ScalarField, SolveStats)> {
    lin.validate()?;
    if !g.grid().same_as(s.grid()) {
        return Err(Error::GridMismatch);
    }
    let op = DiffusionOperator::new(g, 0.0)?;
    let diag: Vec<f64> = op.diagonal().iter().map(|d| -d).collect();
    if diag.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidParameter("elliptic coefficient vanishes".into()));
    }
    let apply = |v: &[f64], out: &mut [f64]| {
        op.apply(v, out);
        out.iter_mut().for_each(|o| *o = -*o);
    };
    let rhs: Vec<f64> = s.values().iter().map(|v| -v).collect();
    let mut u = vec![0.0; rhs.len()];
    let stats = solve_mean_zero(apply, Some(&diag), &rhs, &mut u, lin)?;
    Ok((ScalarField::from_vec_unchecked(*g.grid(), u), stats))
}

/// Long-term limit `∇·(ḡ∇U) = 0` with `ḡ` the θ-average of the samples.
/// On the torus the mean-zero solution is the zero field.
pub fn solve_longterm_limit(g_tilde: &[ScalarField], lin: &LinearSolveOptions) -> Result<ScalarField> {
    let first = g_tilde
        .first()
        .ok_or_else(|| Error::InvalidParameter("no coefficient samples".into()))?;
    let grid = *first.grid();
    let mut avg = vec![0.0; grid.len()];
    for g in g_tilde {
        if !g.grid().same_as(&grid) {
            return Err(Error::GridMismatch);
        }
        for (a, v) in avg.iter_mut().zip(g.values()) {
            *a += v;
        }
    }
    let inv = 1.0 / g_tilde.len() as f64;
    avg.iter_mut().for_each(|a| *a *= inv);
    let gbar = ScalarField::new(grid, avg)?;
    solve_elliptic(&gbar, &ScalarField::zeros(grid), lin).map(|(u, _)| u)
}

/// Cell coefficients with `f̃` dropped and a θ-sampled bulk source.
struct CorrectorForcing {
    cell: CellForcing,
    source: Vec<ScalarField>,
}

impl Forcing for CorrectorForcing {
    fn grid(&self) -> &TorusGrid {
        &self.cell.grid
    }

    fn sample(&self, theta: f64) -> Result<Coefficients> {
        let c = self.cell.sample(theta)?;
        let m = self.source.len();
        let k = (reduce_phase(theta) * m as f64).round() as usize % m;
        Ok(Coefficients {
            g: c.g,
            f: VectorField2::zeros(self.cell.grid),
            bulk: Some(self.source[k].clone()),
        })
    }
}

/// Corrector `∂U¹/∂θ − ∇·(g̃∇U¹) = ∂U/∂t`, the source being the forward
/// difference of two cell solutions `dt_slow` apart; `g̃` is taken at the
/// earlier slow time.
pub fn solve_corrector(
    u_t: &CellSolution,
    u_next: &CellSolution,
    wind: &WindModel,
    closure: &FluxClosure,
    dt_slow: f64,
    cfg: &CellConfig,
) -> Result<CellSolution> {
    require_elliptic(closure)?;
    if !u_t.same_sampling(u_next) || u_t.m() != cfg.m {
        return Err(Error::GridMismatch);
    }
    if !(dt_slow > 0.0) {
        return Err(Error::InvalidParameter(format!("slow step must be positive, got {dt_slow}")));
    }
    let source = u_t
        .fields
        .iter()
        .zip(&u_next.fields)
        .map(|(a, b)| b.sub(a).map(|d| d.scaled(1.0 / dt_slow)))
        .collect::<Result<Vec<_>>>()?;
    let grid = *u_t.grid();
    let forcing = CorrectorForcing {
        cell: CellForcing::new(grid, *wind, *closure, u_t.t_slow),
        source,
    };
    solve_periodic_with(&forcing, u_t.t_slow, &ScalarField::zeros(grid), cfg)
}

/// Cell solutions on increasing slow-time nodes.
#[derive(Debug, Clone)]
pub struct CellFamily {
    pub times: Vec<f64>,
    pub cells: Vec<CellSolution>,
}

impl CellFamily {
    pub fn new(cells: Vec<CellSolution>) -> Result<Self> {
        let first = cells
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty cell family".into()))?;
        if cells.iter().any(|c| !c.same_sampling(first)) {
            return Err(Error::GridMismatch);
        }
        let times: Vec<f64> = cells.iter().map(|c| c.t_slow).collect();
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("slow-time nodes must increase".into()));
        }
        Ok(Self { times, cells })
    }

    /// Solves the cell problem at `nodes`, warm-starting each node from the
    /// previous one.
    pub fn solve(
        wind: &WindModel,
        closure: &FluxClosure,
        grid: TorusGrid,
        nodes: &[f64],
        cfg: &CellConfig,
    ) -> Result<Self> {
        let mut cells: Vec<CellSolution> = Vec::with_capacity(nodes.len());
        for &t in nodes {
            let init = cells
                .last()
                .map(|c| c.fields[0].clone())
                .unwrap_or_else(|| ScalarField::zeros(grid));
            cells.push(solve_cell_periodic_from(wind, closure, t, &init, cfg)?);
        }
        Self::new(cells)
    }

    pub fn grid(&self) -> &TorusGrid {
        self.cells[0].grid()
    }

    pub fn m(&self) -> usize {
        self.cells[0].m()
    }

    /// Nodes and weights of the four-point (or fewer) Lagrange stencil
    /// around `t`.
    fn stencil(&self, t: f64) -> Vec<(usize, f64)> {
        let n = self.times.len();
        if n == 1 {
            return vec![(0, 1.0)];
        }
        let width = n.min(4);
        let upper = self.times.partition_point(|s| *s <= t).clamp(1, n - 1);
        let lo = (upper as isize - width as isize / 2).clamp(0, (n - width) as isize) as usize;
        (lo..lo + width)
            .map(|a| {
                let w = (lo..lo + width)
                    .filter(|b| *b != a)
                    .map(|b| (t - self.times[b]) / (self.times[a] - self.times[b]))
                    .product();
                (a, w)
            })
            .collect()
    }

    /// `U(t, θ_k)` by Lagrange interpolation in slow time.
    pub fn at_sample(&self, t: f64, k: usize) -> ScalarField {
        let grid = *self.grid();
        let mut v = vec![0.0; grid.len()];
        for (a, w) in self.stencil(t) {
            if w == 0.0 {
                continue;
            }
            for (x, u) in v.iter_mut().zip(self.cells[a].fields[k].values()) {
                *x += w * u;
            }
        }
        ScalarField::from_vec_unchecked(grid, v)
    }

    /// `U(t, t/ε)`: Lagrange in slow time, periodic linear in θ.
    pub fn reconstruct(&self, eps: f64, t: f64) -> ScalarField {
        let grid = *self.grid();
        let mut v = vec![0.0; grid.len()];
        for (a, w) in self.stencil(t) {
            if w == 0.0 {
                continue;
            }
            let u = reconstruct(&self.cells[a], eps, t);
            for (x, y) in v.iter_mut().zip(u.values()) {
                *x += w * y;
            }
        }
        ScalarField::from_vec_unchecked(grid, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{gradient, mean_value, vector_l2_norm};
    use crate::physics::{Amplitude, WindFamily};

    fn cfg(m: usize) -> CellConfig {
        CellConfig {
            m,
            tol_per: 1e-11,
            max_periods: 300,
            linear: LinearSolveOptions {
                tol: 1e-13,
                max_iter: 2000,
            },
        }
    }

    #[test]
    fn zero_flux_gives_zero_profile() {
        let grid = TorusGrid::unit(8).unwrap();
        let wind = WindModel::new(WindFamily::Steady, Amplitude::uniform(0.0));
        let closure = FluxClosure::preset("smooth-saturating").unwrap();
        let u = solve_cell_periodic(&wind, &closure, 0.0, grid, &cfg(16)).unwrap();
        assert_eq!(u.periods, 1);
        assert!(u.fields.iter().all(|f| f.max_abs() == 0.0));
    }

    #[test]
    fn degenerate_closure_rejected() {
        let grid = TorusGrid::unit(8).unwrap();
        let wind = WindModel::preset("alternating").unwrap();
        let closure = FluxClosure::preset("smooth-saturating-degenerate").unwrap();
        assert!(solve_cell_periodic(&wind, &closure, 0.0, grid, &cfg(16)).is_err());
    }

    #[test]
    fn mean_is_constant_in_theta() {
        let grid = TorusGrid::unit(16).unwrap();
        let wind = WindModel::preset("rotating").unwrap();
        let closure = FluxClosure::preset("smooth-saturating").unwrap();
        let init = ScalarField::from_fn(grid, |x, y| 0.3 + x * y);
        let u = solve_cell_periodic_from(&wind, &closure, 0.0, &init, &cfg(16)).unwrap();
        let m0 = mean_value(&u.fields[0]);
        assert!((m0 - mean_value(&init)).abs() < 1e-12);
        for f in &u.fields {
            assert!((mean_value(f) - m0).abs() < 1e-12);
        }
    }

    #[test]
    fn reconstruct_on_nodes() {
        let grid = TorusGrid::unit(8).unwrap();
        let wind = WindModel::preset("alternating").unwrap();
        let closure = FluxClosure::preset("smooth-saturating").unwrap();
        let u = solve_cell_periodic(&wind, &closure, 0.0, grid, &cfg(16)).unwrap();
        let eps = 0.1;
        assert_eq!(reconstruct(&u, eps, 0.0), u.fields[0]);
        assert_eq!(reconstruct(&u, eps, eps), u.fields[0]);
        assert_eq!(reconstruct(&u, eps, eps / 2.0), u.fields[8]);
    }

    #[test]
    fn longterm_limit_is_zero() {
        let grid = TorusGrid::unit(16).unwrap();
        let wind = WindModel::preset("gusty").unwrap();
        let closure = FluxClosure::preset("smooth-saturating").unwrap();
        let g = cell_coefficients(&wind, &closure, 0.0, grid, 16).unwrap();
        let u = solve_longterm_limit(&g, &LinearSolveOptions::default()).unwrap();
        assert!(vector_l2_norm(&gradient(&u)) <= 1e-12);
    }

    #[test]
    fn elliptic_hook_residual() {
        let grid = TorusGrid::unit(16).unwrap();
        let g = ScalarField::from_fn(grid, |x, y| 1.0 + 0.5 * (6.0 * x).sin() * y);
        let s = ScalarField::from_fn(grid, |x, y| (2.0 * std::f64::consts::PI * x).cos() + y);
        let lin = LinearSolveOptions {
            tol: 1e-12,
            max_iter: 2000,
        };
        let (u, _) = solve_elliptic(&g, &s, &lin).unwrap();
        let r = crate::grid::div_flux(&g, &u).unwrap();
        let target = s.map(|v| v - mean_value(&s));
        let res = l2_norm(&r.sub(&target).unwrap());
        assert!(res <= 1e-10 * l2_norm(&target));
    }

    #[test]
    fn family_interpolation_is_exact_on_nodes_and_cubic() {
        let grid = TorusGrid::unit(4).unwrap();
        let mk = |t: f64| CellSolution {
            t_slow: t,
            thetas: (0..8).map(|k| k as f64 / 8.0).collect(),
            fields: (0..8)
                .map(|k| ScalarField::constant(grid, t * t * t - 2.0 * t + k as f64))
                .collect(),
            residual: 0.0,
            periods: 1,
            history: vec![0.0],
        };
        let fam = CellFamily::new([0.0, 0.2, 0.4, 0.6, 0.8, 1.0].map(mk).to_vec()).unwrap();
        for t in [0.0, 0.13, 0.5, 0.77, 1.0] {
            let v = fam.at_sample(t, 3).values()[0];
            assert!((v - (t * t * t - 2.0 * t + 3.0)).abs() < 1e-12, "t={t}");
        }
    }
}
