//! Time-dependent coefficient providers for the IMEX step.

use crate::error::Result;
use crate::grid::{ScalarField, TorusGrid, VectorField2};
use crate::physics::{FluxClosure, WindModel, DEFAULT_DELTA_SPEED};

/// Coefficients of one step: diffusion `g`, flux `f`, and an optional bulk
/// source added to the right-hand side as is.
#[derive(Debug, Clone)]
pub struct Coefficients {
    pub g: ScalarField,
    pub f: VectorField2,
    /// Not in divergence form, so it changes the mean. Used for the corrector
    /// source and for conservation checks.
    pub bulk: Option<ScalarField>,
}

pub trait Forcing: Sync {
    fn grid(&self) -> &TorusGrid;
    /// Coefficients at evolution time `t`.
    fn sample(&self, t: f64) -> Result<Coefficients>;
}

/// Wind-driven coefficients of the ε-problem: `u^ε(t, x) = U(t, t/ε, x)`.
#[derive(Debug, Clone)]
pub struct WindForcing {
    pub grid: TorusGrid,
    pub wind: WindModel,
    pub closure: FluxClosure,
    pub eps: f64,
    pub delta_speed: f64,
}

impl WindForcing {
    pub fn new(grid: TorusGrid, wind: WindModel, closure: FluxClosure, eps: f64) -> Self {
        Self {
            grid,
            wind,
            closure,
            eps,
            delta_speed: DEFAULT_DELTA_SPEED,
        }
    }
}

impl Forcing for WindForcing {
    fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    fn sample(&self, t: f64) -> Result<Coefficients> {
        let u = self.wind.eval(&self.grid, t, t / self.eps);
        let (g, f) = self.closure.coefficients_from_wind(&u, self.delta_speed)?;
        Ok(Coefficients { g, f, bulk: None })
    }
}

/// Cell-problem coefficients at frozen slow time; the evolution variable is
/// the fast phase θ.
#[derive(Debug, Clone)]
pub struct CellForcing {
    pub grid: TorusGrid,
    pub wind: WindModel,
    pub closure: FluxClosure,
    pub t_slow: f64,
    pub delta_speed: f64,
}

impl CellForcing {
    pub fn new(grid: TorusGrid, wind: WindModel, closure: FluxClosure, t_slow: f64) -> Self {
        Self {
            grid,
            wind,
            closure,
            t_slow,
            delta_speed: DEFAULT_DELTA_SPEED,
        }
    }
}

impl Forcing for CellForcing {
    fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    fn sample(&self, theta: f64) -> Result<Coefficients> {
        let u = self.wind.eval(&self.grid, self.t_slow, theta);
        let (g, f) = self.closure.coefficients_from_wind(&u, self.delta_speed)?;
        Ok(Coefficients { g, f, bulk: None })
    }
}
