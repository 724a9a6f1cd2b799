//! Periodic wind models `U(t, θ, x)`, 1-periodic in the fast phase θ.

use crate::grid::{TorusGrid, VectorField2};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Phase resolution: θ is reduced mod 1 and rounded to a multiple of
/// `2^-PHASE_BITS`, so `θ` and `θ + 1` land on the same phase even when the
/// addition rounds.
const PHASE_BITS: i32 = 32;

/// Reduces θ to `[0, 1)` on the dyadic phase lattice.
pub fn reduce_phase(theta: f64) -> f64 {
    let scale = (2.0f64).powi(PHASE_BITS);
    let q = (theta.rem_euclid(1.0) * scale).round();
    (q / scale).rem_euclid(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindFamily {
    /// `A(x) e`
    Steady,
    /// `A(x) e sin(2πθ)`: day/night reversal.
    Alternating,
    /// `A(x) R(2πθ) e`: direction turns once per period.
    Rotating,
    /// `A(x) e (1 + γ (sin 2πθ + ½ sin 6πθ))`
    Gusty,
}

/// Spatial amplitude `A(x, y) = base + depth cos(2π kx x/lx) cos(2π ky y/ly)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Amplitude {
    pub base: f64,
    pub depth: f64,
    pub kx: u32,
    pub ky: u32,
}

impl Amplitude {
    pub fn uniform(c: f64) -> Self {
        Self {
            base: c,
            depth: 0.0,
            kx: 0,
            ky: 0,
        }
    }

    pub fn eval(&self, grid: &TorusGrid, x: f64, y: f64) -> f64 {
        if self.depth == 0.0 {
            return self.base;
        }
        let cx = (2.0 * PI * self.kx as f64 * x / grid.lx()).cos();
        let cy = (2.0 * PI * self.ky as f64 * y / grid.ly()).cos();
        self.base + self.depth * cx * cy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindModel {
    pub family: WindFamily,
    pub amplitude: Amplitude,
    /// Direction angle of `e` in radians.
    pub direction: f64,
    /// Gust strength γ (gusty family only).
    pub gust: f64,
    /// Slow-time modulation: the field is multiplied by `1 + slow_rate t`.
    /// Zero means the wind does not depend on slow time.
    pub slow_rate: f64,
}

impl WindModel {
    pub fn new(family: WindFamily, amplitude: Amplitude) -> Self {
        Self {
            family,
            amplitude,
            direction: 0.0,
            gust: 0.5,
            slow_rate: 0.0,
        }
    }

    /// Looks up a shipped wind by id.
    pub fn preset(id: &str) -> Option<Self> {
        let varying = Amplitude {
            base: 1.0,
            depth: 0.5,
            kx: 1,
            ky: 1,
        };
        let w = match id {
            "steady" => Self::new(WindFamily::Steady, varying),
            "alternating" => Self::new(WindFamily::Alternating, varying),
            "rotating" => Self::new(WindFamily::Rotating, varying),
            "gusty" => Self::new(WindFamily::Gusty, varying),
            // alternating wind strengthening on the slow scale
            "alternating-drift" => Self {
                slow_rate: 0.5,
                ..Self::new(WindFamily::Alternating, varying)
            },
            _ => return None,
        };
        Some(w)
    }

    pub const PRESETS: [&'static str; 5] =
        ["steady", "alternating", "rotating", "gusty", "alternating-drift"];

    pub fn depends_on_slow_time(&self) -> bool {
        self.slow_rate != 0.0
    }

    /// Phase factor: scalar multiplier and direction angle at reduced phase.
    fn phase_factor(&self, phase: f64) -> (f64, f64) {
        let a = 2.0 * PI * phase;
        match self.family {
            WindFamily::Steady => (1.0, self.direction),
            WindFamily::Alternating => (a.sin(), self.direction),
            WindFamily::Rotating => (1.0, self.direction + a),
            WindFamily::Gusty => (
                1.0 + self.gust * (a.sin() + 0.5 * (3.0 * a).sin()),
                self.direction,
            ),
        }
    }

    /// Samples `U(t, θ, ·)` at cell centres.
    pub fn eval(&self, grid: &TorusGrid, t: f64, theta: f64) -> VectorField2 {
        let phase = reduce_phase(theta);
        let (s, angle) = self.phase_factor(phase);
        let scale = s * (1.0 + self.slow_rate * t);
        let (ex, ey) = (angle.cos(), angle.sin());
        VectorField2::from_fn(*grid, |x, y| {
            let a = scale * self.amplitude.eval(grid, x, y);
            (a * ex, a * ey)
        })
    }
}
