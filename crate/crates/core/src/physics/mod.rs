//! Closures, wind models, shear stress and the scaling pipeline.

pub mod closure;
pub mod scaling;
pub mod wind;

pub use closure::{
    validate_closure, ClosureKind, ClosureParams, FluxClosure, HypothesisCheck, ValidationReport,
    DEFAULT_DELTA_SPEED,
};
pub use scaling::{
    classify_regime, friction_c, nondimensionalize, regime_preset, regime_presets, scale_row,
    snap_coefficient, CharacteristicScales, DimensionlessModel, ModelKind, Rational, RegimeParams,
    RegimePreset, ScaleRow, Snap,
};
pub use wind::{reduce_phase, Amplitude, WindFamily, WindModel};

use crate::grid::VectorField2;

/// Shear stress `τ = ρ |u|² / C² · u/|u|`, zero where `|u| <= delta_speed`.
pub fn shear_stress(u: &VectorField2, rho: f64, friction: f64, delta_speed: f64) -> VectorField2 {
    let k = rho / (friction * friction);
    let (mut tx, mut ty) = (Vec::with_capacity(u.x().len()), Vec::with_capacity(u.x().len()));
    for (&ux, &uy) in u.x().iter().zip(u.y()) {
        let s = ux.hypot(uy);
        if s > delta_speed {
            // |τ| u/|u| = k s u
            tx.push(k * s * ux);
            ty.push(k * s * uy);
        } else {
            tx.push(0.0);
            ty.push(0.0);
        }
    }
    VectorField2::from_vecs_unchecked(*u.grid(), tx, ty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;

    #[test]
    fn shear_stress_cases() {
        let g = TorusGrid::unit(4).unwrap();
        let zero = shear_stress(&VectorField2::zeros(g), 1.0, 2.0, DEFAULT_DELTA_SPEED);
        assert!(zero.x().iter().chain(zero.y()).all(|v| *v == 0.0));

        let u = VectorField2::constant(g, 0.6, 0.8);
        let tau = shear_stress(&u, 1.0, 2.0, DEFAULT_DELTA_SPEED);
        assert!((tau.magnitude().max() - 0.25).abs() < 1e-15);

        let tau2 = shear_stress(&u.scaled(2.0), 1.0, 2.0, DEFAULT_DELTA_SPEED);
        for k in 0..16 {
            assert!((tau2.x()[k] - 4.0 * tau.x()[k]).abs() < 1e-15);
            assert!((tau2.y()[k] / tau2.x()[k] - 0.8 / 0.6).abs() < 1e-14);
        }
    }
}
