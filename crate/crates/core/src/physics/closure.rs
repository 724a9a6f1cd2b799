//! Flux closures `(g_a, g_c)` and the hypothesis validator.
//!
//! `g_a(|u|)` is the slope-diffusion coefficient and `g_c(|u|)` the
//! magnitude of the wind-driven flux. The physical laws grow without bound,
//! so above `u_max` they are continued by a C¹ exponential saturation.

use crate::error::{Error, Result};
use crate::grid::{ScalarField, VectorField2};
use serde::{Deserialize, Serialize};

/// Below this wind speed the direction `u/|u|` is undefined and the flux is
/// set to zero.
pub const DEFAULT_DELTA_SPEED: f64 = 1e-8;

/// Width of the saturating blend as a fraction of `u_max`.
const BLEND_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClosureKind {
    /// `g_c = d s²/(1+s²)`, `g_a = G̃ + (d - G̃) s²/(1+s²)`.
    SmoothSaturating,
    /// Cubic flux `α s³`, constant diffusion `Λ`.
    GekermaClamped,
    /// Shear-stress law: `g_c = α|τ|^{b+1}`, `g_a = Λ α |τ|^b`.
    Komarova,
    /// Critical-speed law `α (√|τ| - √τ_c)³₊`, diffusion `Λ g_c`.
    Bagnold,
    /// Counterexample: cubic flux with no clamp. Breaks the derivative bound.
    UnclampedCubic,
    /// Counterexample: flux overtakes diffusion at large speed.
    Inverted,
    /// Counterexample: diffusion fades at large speed. Breaks the threshold.
    Fading,
}

/// Constants of a closure. Not every kind uses every field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosureParams {
    /// Bound on `|g|` and `|g'|`.
    pub d: f64,
    pub u_thr: f64,
    pub g_thr: f64,
    /// Uniform floor `G̃_thr` of `g_a`; zero for degenerate closures.
    pub g_floor: f64,
    pub u_max: f64,
    /// Bagnold critical speed.
    pub u_c: f64,
    /// Shear-stress exponent (Komarova).
    pub b_exp: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub rho: f64,
    /// Friction coefficient `C`.
    pub friction: f64,
}

impl Default for ClosureParams {
    fn default() -> Self {
        Self {
            d: 1.0,
            u_thr: 1.0,
            g_thr: 0.5,
            g_floor: 0.0,
            u_max: 5.0,
            u_c: 0.0,
            b_exp: 0.5,
            lambda: 1.0,
            alpha: 1.0,
            rho: 1.0,
            friction: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxClosure {
    pub kind: ClosureKind,
    pub params: ClosureParams,
}

/// C¹ continuation of `h` beyond `u_max` that saturates at
/// `h(u_max) + h'(u_max) w`.
fn clamp_blend(s: f64, u_max: f64, h: impl Fn(f64) -> f64, dh: impl Fn(f64) -> f64) -> f64 {
    if s <= u_max {
        h(s)
    } else {
        let w = BLEND_FRACTION * u_max;
        h(u_max) + dh(u_max) * w * (1.0 - (-(s - u_max) / w).exp())
    }
}

impl FluxClosure {
    pub fn new(kind: ClosureKind, params: ClosureParams) -> Self {
        Self { kind, params }
    }

    /// Looks up a shipped closure by id.
    pub fn preset(id: &str) -> Option<Self> {
        let p = ClosureParams::default();
        let c = match id {
            // uniformly elliptic: floor 1/2
            "smooth-saturating" => Self::new(
                ClosureKind::SmoothSaturating,
                ClosureParams {
                    d: 1.0,
                    g_floor: 0.5,
                    u_thr: 1.0,
                    g_thr: 0.7,
                    ..p
                },
            ),
            "smooth-saturating-degenerate" => Self::new(
                ClosureKind::SmoothSaturating,
                ClosureParams {
                    d: 1.0,
                    g_floor: 0.0,
                    u_thr: 1.0,
                    g_thr: 0.45,
                    ..p
                },
            ),
            "gekerma-clamped" => Self::new(
                ClosureKind::GekermaClamped,
                ClosureParams {
                    d: 1.0,
                    alpha: 1.0 / 250.0,
                    lambda: 1.0,
                    u_max: 5.0,
                    g_floor: 1.0,
                    u_thr: 1.0,
                    g_thr: 1.0,
                    ..p
                },
            ),
            "komarova" => Self::new(
                ClosureKind::Komarova,
                ClosureParams {
                    d: 1.0,
                    alpha: 0.05,
                    lambda: 6.0,
                    rho: 1.0,
                    friction: 1.25,
                    b_exp: 0.5,
                    u_max: 2.0,
                    u_thr: 1.0,
                    g_thr: 0.2,
                    ..p
                },
            ),
            "bagnold" => Self::new(
                ClosureKind::Bagnold,
                ClosureParams {
                    d: 1.0,
                    alpha: 0.1,
                    lambda: 1.5,
                    rho: 1.0,
                    friction: 1.0,
                    u_c: 0.2,
                    u_max: 1.5,
                    u_thr: 1.0,
                    g_thr: 0.05,
                    ..p
                },
            ),
            "unclamped-cubic" => Self::new(
                ClosureKind::UnclampedCubic,
                ClosureParams {
                    d: 1.0,
                    alpha: 0.05,
                    g_floor: 0.5,
                    u_thr: 1.0,
                    g_thr: 0.5,
                    ..p
                },
            ),
            "inverted" => Self::new(
                ClosureKind::Inverted,
                ClosureParams {
                    d: 1.0,
                    g_floor: 0.5,
                    u_thr: 1.0,
                    g_thr: 0.5,
                    ..p
                },
            ),
            "fading" => Self::new(
                ClosureKind::Fading,
                ClosureParams {
                    d: 1.0,
                    u_thr: 1.0,
                    g_thr: 0.5,
                    ..p
                },
            ),
            _ => return None,
        };
        Some(c)
    }

    /// Closures expected to satisfy every hypothesis.
    pub const VALID_PRESETS: [&'static str; 5] = [
        "smooth-saturating",
        "smooth-saturating-degenerate",
        "gekerma-clamped",
        "komarova",
        "bagnold",
    ];
    /// One counterexample per hypothesis clause (boundedness, ordering,
    /// threshold).
    pub const COUNTEREXAMPLES: [&'static str; 3] = ["unclamped-cubic", "inverted", "fading"];

    /// Presets with a positive uniform floor on `g_a`.
    pub const ELLIPTIC_PRESETS: [&'static str; 2] = ["smooth-saturating", "gekerma-clamped"];

    pub fn is_uniformly_elliptic(&self) -> bool {
        self.params.g_floor > 0.0
    }

    fn shear_root(&self, s: f64) -> f64 {
        // sqrt(|tau|) with |tau| = rho s^2 / C^2
        self.params.rho.sqrt() * s / self.params.friction
    }

    /// Diffusion coefficient `g_a(s)`, `s = |u| >= 0`.
    pub fn g_a(&self, s: f64) -> f64 {
        let p = &self.params;
        match self.kind {
            ClosureKind::SmoothSaturating => {
                let r = s * s / (1.0 + s * s);
                p.g_floor + (p.d - p.g_floor) * r
            }
            ClosureKind::GekermaClamped => p.lambda,
            ClosureKind::Komarova => {
                let k = p.lambda * p.alpha * (p.rho / (p.friction * p.friction)).powf(p.b_exp);
                let e = 2.0 * p.b_exp;
                clamp_blend(s, p.u_max, |v| k * v.powf(e), |v| k * e * v.powf(e - 1.0))
            }
            ClosureKind::Bagnold => p.lambda * self.g_c(s),
            ClosureKind::UnclampedCubic => p.g_floor + p.alpha * s * s * s,
            ClosureKind::Inverted => {
                let r = s * s / (1.0 + s * s);
                p.g_floor + 0.2 * p.d * r
            }
            ClosureKind::Fading => p.d / (1.0 + s * s),
        }
    }

    /// Flux magnitude `g_c(s)`.
    pub fn g_c(&self, s: f64) -> f64 {
        let p = &self.params;
        match self.kind {
            ClosureKind::SmoothSaturating => p.d * s * s / (1.0 + s * s),
            ClosureKind::GekermaClamped => clamp_blend(
                s,
                p.u_max,
                |v| p.alpha * v * v * v,
                |v| 3.0 * p.alpha * v * v,
            ),
            ClosureKind::Komarova => {
                let k = p.alpha * (p.rho / (p.friction * p.friction)).powf(p.b_exp + 1.0);
                let e = 2.0 * (p.b_exp + 1.0);
                clamp_blend(s, p.u_max, |v| k * v.powf(e), |v| k * e * v.powf(e - 1.0))
            }
            ClosureKind::Bagnold => {
                let k = self.shear_root(1.0);
                let excess = |v: f64| (k * v - k * p.u_c).max(0.0);
                clamp_blend(
                    s,
                    p.u_max,
                    |v| p.alpha * excess(v).powi(3),
                    |v| 3.0 * p.alpha * k * excess(v).powi(2),
                )
            }
            ClosureKind::UnclampedCubic => p.alpha * s * s * s,
            ClosureKind::Inverted => {
                let r = s * s / (1.0 + s * s);
                0.9 * p.d * r
            }
            ClosureKind::Fading => 0.0,
        }
    }

    /// `(g, f)` with `g = g_a(|u|)` and `f = g_c(|u|) u/|u|`; `f = 0` where
    /// `|u| <= delta_speed`.
    pub fn coefficients_from_wind(
        &self,
        u: &VectorField2,
        delta_speed: f64,
    ) -> Result<(ScalarField, VectorField2)> {
        if !u.is_finite() {
            return Err(Error::NonFinite("wind field".into()));
        }
        let grid = *u.grid();
        let n = grid.len();
        let mut g = Vec::with_capacity(n);
        let mut fx = Vec::with_capacity(n);
        let mut fy = Vec::with_capacity(n);
        for (&ux, &uy) in u.x().iter().zip(u.y()) {
            let s = ux.hypot(uy);
            g.push(self.g_a(s));
            if s > delta_speed {
                let c = self.g_c(s) / s;
                fx.push(c * ux);
                fy.push(c * uy);
            } else {
                fx.push(0.0);
                fy.push(0.0);
            }
        }
        let g = ScalarField::new(grid, g)?;
        if g.min() < 0.0 {
            return Err(Error::InvalidParameter(
                "closure produced a negative diffusion coefficient".into(),
            ));
        }
        Ok((g, VectorField2::new(grid, fx, fy)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub passed: bool,
    /// Smallest slack over the samples; negative when violated.
    pub worst_margin: f64,
    /// Sample speed where the worst margin occurs.
    pub at_speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub samples: usize,
    pub max_speed: f64,
    pub checks: Vec<HypothesisCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Tolerance on the finite-difference `g_c'(0)`.
const ORIGIN_SLOPE_TOL: f64 = 1e-6;

fn fd_derivative(f: impl Fn(f64) -> f64, s: f64) -> f64 {
    if s == 0.0 {
        let h = 1e-7;
        (f(h) - f(0.0)) / h
    } else {
        let h = 1e-6 * s.max(1e-3);
        let lo = (s - h).max(0.0);
        (f(s + h) - f(lo)) / (s + h - lo)
    }
}

struct Worst {
    margin: f64,
    at: f64,
}

impl Worst {
    fn new() -> Self {
        Self {
            margin: f64::INFINITY,
            at: 0.0,
        }
    }
    fn see(&mut self, margin: f64, s: f64) {
        if margin < self.margin || margin.is_nan() {
            self.margin = margin;
            self.at = s;
        }
    }
    fn into_check(self, name: &str) -> HypothesisCheck {
        HypothesisCheck {
            name: name.into(),
            passed: self.margin >= 0.0,
            worst_margin: self.margin,
            at_speed: self.at,
        }
    }
}

/// Checks the closure hypotheses on `samples` points of `[0, 10 U_thr + 1]`:
/// zero plus log-spaced speeds, with `U_thr` itself inserted.
pub fn validate_closure(closure: &FluxClosure, samples: usize) -> Result<ValidationReport> {
    if samples < 100 {
        return Err(Error::InvalidParameter(format!(
            "validation needs at least 100 samples, got {samples}"
        )));
    }
    let p = &closure.params;
    let s_max = 10.0 * p.u_thr + 1.0;
    let s_min = 1e-4 * s_max;
    let mut speeds = vec![0.0];
    let m = samples - 1;
    let ratio = (s_max / s_min).ln();
    speeds.extend((0..m).map(|k| s_min * (ratio * k as f64 / (m - 1) as f64).exp()));
    if p.u_thr > 0.0 {
        speeds.push(p.u_thr);
    }

    let ga = |s: f64| closure.g_a(s);
    let gc = |s: f64| closure.g_c(s);

    let mut ordering = Worst::new();
    let mut bounded = Worst::new();
    let mut threshold = Worst::new();
    let mut floor = Worst::new();
    for &s in &speeds {
        let (a, c) = (ga(s), gc(s));
        ordering.see((a - c).min(c), s);
        let sup = a
            .abs()
            .max(c.abs())
            .max(fd_derivative(ga, s).abs())
            .max(fd_derivative(gc, s).abs());
        bounded.see(p.d - sup, s);
        if s >= p.u_thr {
            threshold.see(a - p.g_thr, s);
        }
        if p.g_floor > 0.0 {
            floor.see(a - p.g_floor, s);
        }
    }
    let origin_margin =
        (ORIGIN_SLOPE_TOL - fd_derivative(gc, 0.0).abs()).min(if gc(0.0) == 0.0 { 0.0 } else { -gc(0.0).abs() });
    let mut checks = vec![
        ordering.into_check("ordering"),
        HypothesisCheck {
            name: "origin".into(),
            passed: origin_margin >= 0.0,
            worst_margin: origin_margin,
            at_speed: 0.0,
        },
        bounded.into_check("bounded"),
        threshold.into_check("threshold"),
    ];
    if p.g_floor > 0.0 {
        checks.push(floor.into_check("uniform_floor"));
    }
    Ok(ValidationReport {
        samples: speeds.len(),
        max_speed: s_max,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;

    #[test]
    fn shipped_presets_pass() {
        for id in FluxClosure::VALID_PRESETS {
            let c = FluxClosure::preset(id).unwrap();
            let rep = validate_closure(&c, 400).unwrap();
            assert!(rep.all_passed(), "{id}: {rep:#?}");
        }
    }

    #[test]
    fn counterexamples_fail_their_clause() {
        let expect = [
            ("unclamped-cubic", "bounded"),
            ("inverted", "ordering"),
            ("fading", "threshold"),
        ];
        for (id, clause) in expect {
            let rep = validate_closure(&FluxClosure::preset(id).unwrap(), 200).unwrap();
            for c in &rep.checks {
                assert_eq!(c.passed, c.name != clause, "{id}/{}: {c:?}", c.name);
            }
        }
    }

    #[test]
    fn validator_requires_enough_samples() {
        let c = FluxClosure::preset("smooth-saturating").unwrap();
        assert!(validate_closure(&c, 99).is_err());
    }

    #[test]
    fn blend_is_c1() {
        let c = FluxClosure::preset("gekerma-clamped").unwrap();
        let um = c.params.u_max;
        let h = 1e-6;
        let left = (c.g_c(um) - c.g_c(um - h)) / h;
        let right = (c.g_c(um + h) - c.g_c(um)) / h;
        assert!((left - right).abs() < 1e-4 * left);
        assert!(c.g_c(1e3) < c.params.d);
    }

    #[test]
    fn coefficients_at_rest() {
        let grid = TorusGrid::unit(8).unwrap();
        let c = FluxClosure::preset("smooth-saturating").unwrap();
        let (g, f) = c
            .coefficients_from_wind(&VectorField2::zeros(grid), DEFAULT_DELTA_SPEED)
            .unwrap();
        assert!(g.values().iter().all(|v| *v == c.g_a(0.0)));
        assert!(f.x().iter().chain(f.y()).all(|v| *v == 0.0));
    }

    #[test]
    fn threshold_speed_gives_floor() {
        let grid = TorusGrid::unit(8).unwrap();
        for id in FluxClosure::VALID_PRESETS {
            let c = FluxClosure::preset(id).unwrap();
            let s = c.params.u_thr;
            let u = VectorField2::from_fn(grid, |x, y| {
                let a = 6.0 * x + 2.0 * y;
                (s * a.cos(), s * a.sin())
            });
            let (g, _) = c.coefficients_from_wind(&u, DEFAULT_DELTA_SPEED).unwrap();
            assert!(g.min() >= c.params.g_thr, "{id}");
        }
    }

    #[test]
    fn saturating_flux_magnitude_closed_form() {
        // g_c(1) = d/2
        let grid = TorusGrid::unit(4).unwrap();
        let c = FluxClosure::preset("smooth-saturating").unwrap();
        let u = VectorField2::constant(grid, 0.6, 0.8);
        let (_, f) = c.coefficients_from_wind(&u, DEFAULT_DELTA_SPEED).unwrap();
        for (fx, fy) in f.x().iter().zip(f.y()) {
            assert!((fx.hypot(*fy) - c.params.d / 2.0).abs() < 1e-15);
            assert!((fx / fy - 0.75).abs() < 1e-14);
        }
    }

    #[test]
    fn non_finite_wind_rejected() {
        let grid = TorusGrid::unit(4).unwrap();
        let c = FluxClosure::preset("smooth-saturating").unwrap();
        let u = VectorField2::from_vecs_unchecked(grid, vec![f64::NAN; 16], vec![0.0; 16]);
        assert!(c.coefficients_from_wind(&u, DEFAULT_DELTA_SPEED).is_err());
    }
}
