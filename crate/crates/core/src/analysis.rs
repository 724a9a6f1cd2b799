//! Post-processing of ε-sweeps: two-scale pairings, homogenization errors,
//! a priori norm families and log-log rate fits.

use crate::cell::CellFamily;
use crate::error::{Error, Result};
use crate::grid::{inner_product, l2_norm, ScalarField, TorusGrid};
use crate::physics::reduce_phase;
use crate::solver::SolveResult;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Time factor `φ_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TimeFactor {
    One,
    /// `sin²(π t / horizon)`; vanishes with zero slope at both ends.
    Bump { horizon: f64 },
}

/// 1-periodic phase factor `φ_θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhaseFactor {
    One,
    /// `cos(2π (k θ − shift))`
    Harmonic { k: u32, shift: f64 },
}

/// Space factor `φ_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpaceFactor {
    One,
    /// `cos(2π (kx x/lx − sx)) cos(2π (ky y/ly − sy))`
    Wave { kx: u32, ky: u32, sx: f64, sy: f64 },
}

impl TimeFactor {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Self::One => 1.0,
            Self::Bump { horizon } => (PI * t / horizon).sin().powi(2),
        }
    }
}

impl PhaseFactor {
    pub fn eval(&self, theta: f64) -> f64 {
        match *self {
            Self::One => 1.0,
            Self::Harmonic { k, shift } => {
                (2.0 * PI * (k as f64 * reduce_phase(theta) - shift)).cos()
            }
        }
    }

    pub fn depends_on_phase(&self) -> bool {
        !matches!(self, Self::One)
    }
}

impl SpaceFactor {
    pub fn sample(&self, grid: &TorusGrid) -> ScalarField {
        match *self {
            Self::One => ScalarField::constant(*grid, 1.0),
            Self::Wave { kx, ky, sx, sy } => ScalarField::from_fn(*grid, |x, y| {
                (2.0 * PI * (kx as f64 * x / grid.lx() - sx)).cos()
                    * (2.0 * PI * (ky as f64 * y / grid.ly() - sy)).cos()
            }),
        }
    }
}

/// Separable test function `ψ(t, θ, x) = φ_t(t) φ_θ(θ) φ_x(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFunction {
    pub name: String,
    pub time: TimeFactor,
    pub phase: PhaseFactor,
    pub space: SpaceFactor,
}

impl TestFunction {
    /// The three shipped test functions on `[0, horizon]`.
    pub fn shipped(horizon: f64) -> Vec<TestFunction> {
        let time = TimeFactor::Bump { horizon };
        vec![
            TestFunction {
                name: "sin-theta-sin-x-cos-y".into(),
                time,
                phase: PhaseFactor::Harmonic { k: 1, shift: 0.25 },
                space: SpaceFactor::Wave { kx: 1, ky: 1, sx: 0.25, sy: 0.0 },
            },
            TestFunction {
                name: "cos-theta-sin-x-cos-y".into(),
                time,
                phase: PhaseFactor::Harmonic { k: 1, shift: 0.0 },
                space: SpaceFactor::Wave { kx: 1, ky: 1, sx: 0.25, sy: 0.0 },
            },
            TestFunction {
                name: "sin-theta-sin-2x".into(),
                time,
                phase: PhaseFactor::Harmonic { k: 1, shift: 0.25 },
                space: SpaceFactor::Wave { kx: 2, ky: 0, sx: 0.25, sy: 0.0 },
            },
        ]
    }
}

fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut w = vec![0.0; n];
    for k in 1..n {
        let h = 0.5 * (times[k] - times[k - 1]);
        w[k - 1] += h;
        w[k] += h;
    }
    w
}

/// Quadrature of `∫∫ z^ε(t, x) ψ(t, t/ε, x) dt dx`: trapezoid over snapshot
/// times, cell sums in space. Snapshots must be at most `ε/10` apart.
pub fn two_scale_pairing(result: &SolveResult, psi: &TestFunction, eps: f64) -> Result<f64> {
    let limit = eps / 10.0;
    let spacing = result
        .times
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    if spacing > limit * (1.0 + 1e-9) {
        return Err(Error::SnapshotDensity { spacing, limit });
    }
    let grid = *result.snapshots[0].grid();
    let phi_x = psi.space.sample(&grid);
    let w = trapezoid_weights(&result.times);
    Ok(result
        .times
        .iter()
        .zip(&result.snapshots)
        .zip(&w)
        .map(|((&t, z), &wk)| {
            wk * psi.time.eval(t) * psi.phase.eval(t / eps) * inner_product(z, &phi_x)
        })
        .sum())
}

/// `∫∫∫ U ψ dt dθ dx`: trapezoid over the family's slow-time nodes, periodic
/// rectangle rule over the θ samples, cell sums in space.
pub fn two_scale_limit_pairing(family: &CellFamily, psi: &TestFunction) -> f64 {
    let phi_x = psi.space.sample(family.grid());
    let w = trapezoid_weights(&family.times);
    let m = family.m();
    family
        .cells
        .iter()
        .zip(&w)
        .map(|(cell, &wt)| {
            let inner: f64 = cell
                .fields
                .iter()
                .zip(&cell.thetas)
                .map(|(u, &th)| psi.phase.eval(th) * inner_product(u, &phi_x))
                .sum();
            wt * psi.time.eval(cell.t_slow) * inner / m as f64
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorEntry {
    pub eps: f64,
    /// `sup_t ‖z^ε(t) − U(t, t/ε)‖₂`
    pub sup_error: f64,
    pub final_error: f64,
    /// `sup_error / ε`
    pub scaled_error: f64,
}

/// Compares a run against the reconstructed profile at every snapshot.
pub fn homogenization_error(result: &SolveResult, family: &CellFamily, eps: f64) -> Result<ErrorEntry> {
    if !result.snapshots[0].grid().same_as(family.grid()) {
        return Err(Error::GridMismatch);
    }
    let mut sup: f64 = 0.0;
    let mut last = 0.0;
    for (&t, z) in result.times.iter().zip(&result.snapshots) {
        let e = l2_norm(&z.sub(&family.reconstruct(eps, t))?);
        sup = sup.max(e);
        last = e;
    }
    Ok(ErrorEntry {
        eps,
        sup_error: sup,
        final_error: last,
        scaled_error: sup / eps,
    })
}

/// Least-squares line through `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
}

pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<PowerFit> {
    const NEEDED: usize = 3;
    if x.len() != y.len() {
        return Err(Error::InvalidParameter("abscissae and ordinates differ in length".into()));
    }
    if x.len() < NEEDED {
        return Err(Error::TooFewPoints {
            needed: NEEDED,
            got: x.len(),
        });
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter("log-log fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("log-log fit needs distinct abscissae".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(PowerFit {
        slope,
        intercept,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorReport {
    /// Strictly decreasing in ε.
    pub entries: Vec<ErrorEntry>,
    pub sup_fit: PowerFit,
}

impl ErrorReport {
    pub fn new(mut entries: Vec<ErrorEntry>) -> Result<Self> {
        entries.sort_by(|a, b| b.eps.total_cmp(&a.eps));
        if entries.windows(2).any(|w| w[0].eps == w[1].eps) {
            return Err(Error::InvalidParameter("duplicate eps in error report".into()));
        }
        let sup_fit = convergence_rate(&entries)?;
        Ok(Self { entries, sup_fit })
    }

    /// Ratio of largest to smallest corrector-scaled error.
    pub fn scaled_spread(&self) -> f64 {
        let (lo, hi) = self.entries.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), e| {
            (lo.min(e.scaled_error), hi.max(e.scaled_error))
        });
        hi / lo
    }

    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "eps,sup_error,final_error,scaled_error")?;
        for e in &self.entries {
            writeln!(w, "{:e},{:e},{:e},{:e}", e.eps, e.sup_error, e.final_error, e.scaled_error)?;
        }
        Ok(())
    }
}

/// Slope of `ln(sup_error)` against `ln ε`.
pub fn convergence_rate(entries: &[ErrorEntry]) -> Result<PowerFit> {
    let x: Vec<f64> = entries.iter().map(|e| e.eps).collect();
    let y: Vec<f64> = entries.iter().map(|e| e.sup_error).collect();
    fit_power_law(&x, &y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateEntry {
    pub eps: f64,
    /// `sup_t ‖z‖₂`
    pub linf_l2: f64,
    /// `∫ ‖∇z‖₂² dt`
    pub grad_sq: f64,
    /// `∫ ‖(z_k − z_{k−1})/dt‖₂² dt`
    pub dzdt_sq: f64,
}

impl EstimateEntry {
    pub fn from_result(eps: f64, result: &SolveResult) -> Self {
        let s = &result.series;
        let w = trapezoid_weights(&s.time);
        let linf_l2 = s.l2.iter().fold(0.0f64, |m, v| m.max(*v));
        let grad_sq = s.h1_semi.iter().zip(&w).map(|(g, wk)| g * g * wk).sum();
        // difference quotients live on the intervals
        let dzdt_sq = s
            .dzdt_l2
            .iter()
            .zip(&s.time)
            .skip(1)
            .zip(s.time.iter())
            .map(|((d, t1), t0)| d * d * (t1 - t0))
            .sum();
        Self {
            eps,
            linf_l2,
            grad_sq,
            dzdt_sq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateReport {
    pub j: u32,
    pub entries: Vec<EstimateEntry>,
    pub linf_l2_exponent: f64,
    pub grad_sq_exponent: f64,
    pub dzdt_sq_exponent: f64,
    /// Exponents predicted by the a priori bounds: `(0, j, j)`.
    pub expected: [f64; 3],
}

impl EstimateReport {
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "eps,linf_l2,grad_sq,dzdt_sq")?;
        for e in &self.entries {
            writeln!(w, "{:e},{:e},{:e},{:e}", e.eps, e.linf_l2, e.grad_sq, e.dzdt_sq)?;
        }
        Ok(())
    }
}

/// Fits ε-exponents of the three norm families over runs that differ only
/// in ε.
pub fn estimate_check(runs: &[(f64, &SolveResult)], j: u32) -> Result<EstimateReport> {
    let mut entries: Vec<EstimateEntry> = runs
        .iter()
        .map(|(eps, r)| EstimateEntry::from_result(*eps, r))
        .collect();
    entries.sort_by(|a, b| b.eps.total_cmp(&a.eps));
    let eps: Vec<f64> = entries.iter().map(|e| e.eps).collect();
    let fit = |f: fn(&EstimateEntry) -> f64| -> Result<f64> {
        let y: Vec<f64> = entries.iter().map(f).collect();
        fit_power_law(&eps, &y).map(|p| p.slope)
    };
    Ok(EstimateReport {
        j,
        linf_l2_exponent: fit(|e| e.linf_l2)?,
        grad_sq_exponent: fit(|e| e.grad_sq)?,
        dzdt_sq_exponent: fit(|e| e.dzdt_sq)?,
        expected: [0.0, j as f64, j as f64],
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(eps: f64, horizon: f64, dt: f64, f: impl Fn(f64, f64, f64) -> f64) -> SolveResult {
        let grid = TorusGrid::unit(8).unwrap();
        let n = (horizon / dt).round() as usize;
        let times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
        let snaps = times
            .iter()
            .map(|&t| ScalarField::from_fn(grid, |x, y| f(t, x, y) * (1.0 + 0.0 * eps)))
            .collect();
        SolveResult::from_snapshots(times, snaps).unwrap()
    }

    #[test]
    fn oscillatory_cancellation() {
        let psi = TestFunction {
            name: "cos".into(),
            time: TimeFactor::One,
            phase: PhaseFactor::Harmonic { k: 1, shift: 0.0 },
            space: SpaceFactor::One,
        };
        let t_end = 0.73;
        for eps in [0.1, 0.025] {
            let r = synthetic(eps, t_end, eps / 100.0, |_, _, _| 1.0);
            let v = two_scale_pairing(&r, &psi, eps).unwrap();
            let exact = eps / (2.0 * PI) * (2.0 * PI * t_end / eps).sin();
            assert!((v - exact).abs() < 1e-3 * eps, "eps={eps}");
            assert!(v.abs() <= eps / (2.0 * PI) + 1e-9);
        }
    }

    #[test]
    fn product_to_sum_limit() {
        // z = ζ(t,x) cos(2πt/ε) against cos(2πθ): pairing → ½ ∫∫ ζ φ_t φ_x
        let psi = TestFunction {
            name: "cos".into(),
            time: TimeFactor::Bump { horizon: 1.0 },
            phase: PhaseFactor::Harmonic { k: 1, shift: 0.0 },
            space: SpaceFactor::Wave { kx: 1, ky: 0, sx: 0.0, sy: 0.0 },
        };
        let eps = 1.0 / 64.0;
        let r = synthetic(eps, 1.0, eps / 40.0, |t, x, _| {
            (2.0 * PI * x).cos() * (2.0 * PI * t / eps).cos()
        });
        let v = two_scale_pairing(&r, &psi, eps).unwrap();
        // ½ · ∫ sin²(πt) dt · ∫ cos²(2πx) dx = ½ · ½ · ½
        assert!((v - 0.125).abs() < 2e-3);
    }

    #[test]
    fn phase_free_pairing_ignores_eps() {
        let psi = TestFunction {
            name: "plain".into(),
            time: TimeFactor::Bump { horizon: 0.5 },
            phase: PhaseFactor::One,
            space: SpaceFactor::Wave { kx: 1, ky: 1, sx: 0.0, sy: 0.0 },
        };
        let r = synthetic(0.1, 0.5, 0.005, |t, x, y| t + (2.0 * PI * x).cos() * y);
        let a = two_scale_pairing(&r, &psi, 0.1).unwrap();
        let b = two_scale_pairing(&r, &psi, 0.3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sparse_snapshots_rejected() {
        let psi = TestFunction::shipped(1.0).remove(0);
        let r = synthetic(0.1, 1.0, 0.02, |_, _, _| 0.0);
        assert!(matches!(
            two_scale_pairing(&r, &psi, 0.1),
            Err(Error::SnapshotDensity { .. })
        ));
    }

    #[test]
    fn exact_power_laws() {
        let eps = [0.1f64, 0.05, 0.025, 0.0125];
        for p in [1.0f64, 2.0] {
            let y: Vec<f64> = eps.iter().map(|e| 3.7 * e.powf(p)).collect();
            let f = fit_power_law(&eps, &y).unwrap();
            assert!((f.slope - p).abs() < 1e-12);
            assert!(f.residual < 1e-12);
        }
        assert!(matches!(
            fit_power_law(&eps[..2], &[1.0, 2.0]),
            Err(Error::TooFewPoints { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn reports_round_trip() {
        let entries = vec![
            ErrorEntry { eps: 0.025, sup_error: 0.01, final_error: 0.008, scaled_error: 0.4 },
            ErrorEntry { eps: 0.1, sup_error: 0.041, final_error: 0.03, scaled_error: 0.41 },
            ErrorEntry { eps: 0.05, sup_error: 0.0199, final_error: 0.0101, scaled_error: 0.398 },
        ];
        let rep = ErrorReport::new(entries).unwrap();
        assert!(rep.entries.windows(2).all(|w| w[0].eps > w[1].eps));
        let s = serde_json::to_string(&rep).unwrap();
        assert_eq!(serde_json::from_str::<ErrorReport>(&s).unwrap(), rep);

        let est = EstimateReport {
            j: 1,
            entries: vec![EstimateEntry { eps: 0.1, linf_l2: 1.0 / 3.0, grad_sq: 0.1, dzdt_sq: 2.0 }],
            linf_l2_exponent: 0.01,
            grad_sq_exponent: 1.02,
            dzdt_sq_exponent: 0.9,
            expected: [0.0, 1.0, 1.0],
        };
        let s = serde_json::to_string(&est).unwrap();
        assert_eq!(serde_json::from_str::<EstimateReport>(&s).unwrap(), est);
    }

    #[test]
    fn test_function_round_trip() {
        for psi in TestFunction::shipped(2.0) {
            let s = serde_json::to_string(&psi).unwrap();
            assert_eq!(serde_json::from_str::<TestFunction>(&s).unwrap(), psi);
            assert_eq!(psi.phase.eval(0.3), psi.phase.eval(1.3));
        }
    }
}
