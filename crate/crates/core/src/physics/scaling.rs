//! Characteristic scales, dimensionless coefficients and regime
//! classification (`c ≈ c₀ ε^{-n}`).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

pub const DAY: f64 = 86_400.0;
pub const YEAR: f64 = 365.0 * DAY;

/// Friction coefficient `C = ln(30 z̄ / D_G) / k`.
pub fn friction_c(kappa: f64, z_bar: f64, grain_diameter: f64) -> Result<f64> {
    if !(kappa > 0.0 && z_bar > 0.0 && grain_diameter > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "friction coefficient needs positive inputs (k={kappa}, z={z_bar}, D={grain_diameter})"
        )));
    }
    Ok((30.0 * z_bar / grain_diameter).ln() / kappa)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Gekerma,
    Komarova,
    Bagnold,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Gekerma => "gekerma",
            ModelKind::Komarova => "komarova",
            ModelKind::Bagnold => "bagnold",
        })
    }
}

/// Physical scales in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacteristicScales {
    /// grain residence time (s)
    pub t_bar: f64,
    /// horizontal length (m)
    pub l_bar: f64,
    /// dune height (m)
    pub z_bar: f64,
    /// wind speed (m/s)
    pub u_bar: f64,
    /// wind frequency (1/s)
    pub w_bar: f64,
    pub porosity: f64,
    pub alpha: f64,
    /// slope coefficient Λ (Γ)
    pub lambda: f64,
    /// grain diameter D_G (m)
    pub grain_diameter: f64,
    /// von Kármán-type constant k
    pub kappa: f64,
    /// area density; dimensionless, defaults to 1
    pub rho: f64,
}

impl CharacteristicScales {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("t_bar", self.t_bar),
            ("l_bar", self.l_bar),
            ("z_bar", self.z_bar),
            ("u_bar", self.u_bar),
            ("w_bar", self.w_bar),
            ("alpha", self.alpha),
            ("grain_diameter", self.grain_diameter),
            ("kappa", self.kappa),
            ("rho", self.rho),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.porosity > 0.0 && self.porosity < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "porosity must lie in (0,1), got {}",
                self.porosity
            )));
        }
        if !(self.lambda >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be at least 1, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    /// Raw small parameter `1/(t̄ w̄)`.
    pub fn eps_raw(&self) -> f64 {
        1.0 / (self.t_bar * self.w_bar)
    }

    pub fn friction(&self) -> Result<f64> {
        friction_c(self.kappa, self.z_bar, self.grain_diameter)
    }
}

/// Positive rational `num/den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rational {
    pub num: u32,
    pub den: u32,
}

impl Rational {
    pub fn new(num: u32, den: u32) -> Self {
        let g = gcd(num, den);
        Self {
            num: num / g,
            den: den / g,
        }
    }
    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Denominators of the snapping set `{k/den : 1 <= k <= 64}`.
pub const SNAP_DENOMINATORS: [u32; 5] = [1, 2, 4, 8, 10];
pub const SNAP_MAX_NUMERATOR: u32 = 64;
/// Relative error under which a simpler denominator wins over a closer one.
const SNAP_PREFERENCE_TOL: f64 = 0.05;
/// Values `c ε^n` outside this window are not considered snappable.
const SNAPPABLE: (f64, f64) = (0.05, 100.0);

/// Rounds a positive value to the snapping set, preferring the simplest
/// denominator within 5 %; members of the set map to themselves.
pub fn snap_rational(v: f64) -> Rational {
    let candidate = |den: u32| {
        let k = (v * den as f64).round().clamp(1.0, SNAP_MAX_NUMERATOR as f64) as u32;
        Rational::new(k, den)
    };
    for den in SNAP_DENOMINATORS {
        let r = candidate(den);
        if (r.value() - v).abs() <= 1e-12 * v {
            return r;
        }
    }
    for den in SNAP_DENOMINATORS {
        let r = candidate(den);
        if ((r.value() - v) / v).abs() <= SNAP_PREFERENCE_TOL {
            return r;
        }
    }
    SNAP_DENOMINATORS
        .iter()
        .map(|&d| candidate(d))
        .min_by(|a, b| {
            let da = (a.value() / v).ln().abs();
            let db = (b.value() / v).ln().abs();
            da.total_cmp(&db)
        })
        .expect("non-empty denominator set")
}

/// Rounds ε to the 1-2-5 series in log distance (1/184 -> 1/200).
pub fn snap_eps(eps: f64) -> f64 {
    let inv = 1.0 / eps;
    let decade = inv.log10().floor();
    let mut best = inv;
    let mut best_d = f64::INFINITY;
    for p in [decade - 1.0, decade, decade + 1.0] {
        for m in [1.0, 2.0, 5.0] {
            let c = m * 10f64.powf(p);
            let d = (c / inv).ln().abs();
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
    }
    1.0 / best.round()
}

/// `c ≈ c0 ε^{-n}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snap {
    pub c0: Rational,
    pub n: u32,
    /// Another exponent was nearly as plausible; caller should override.
    pub ambiguous: bool,
}

impl Snap {
    pub fn value(&self, eps: f64) -> f64 {
        self.c0.value() * eps.powi(-(self.n as i32))
    }
}

impl fmt::Display for Snap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.n {
            0 => write!(f, "{}", self.c0),
            1 => write!(f, "{}/eps", self.c0),
            n => write!(f, "{}/eps^{n}", self.c0),
        }
    }
}

/// Picks the exponent `n ∈ {0,1,2}` for which `c εⁿ` is snappable and
/// closest to 1 in log distance, then snaps the mantissa. Flags the result
/// as ambiguous when the runner-up is within 10 % of `|ln ε|`.
pub fn snap_coefficient(c: f64, eps: f64) -> Result<Snap> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "coefficient must be positive, got {c}"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps must lie in (0,1), got {eps}")));
    }
    let all: Vec<(u32, f64)> = (0..=2u32)
        .map(|n| (n, c * eps.powi(n as i32)))
        .collect();
    let mut cands: Vec<(u32, f64)> = all
        .iter()
        .copied()
        .filter(|(_, v)| *v >= SNAPPABLE.0 && *v <= SNAPPABLE.1)
        .collect();
    if cands.is_empty() {
        cands = all;
    }
    cands.sort_by(|a, b| a.1.ln().abs().total_cmp(&b.1.ln().abs()));
    let (n, v) = cands[0];
    let ambiguous = cands
        .get(1)
        .map(|&(_, v2)| v2.ln().abs() - v.ln().abs() < 0.1 * eps.ln().abs())
        .unwrap_or(false);
    Ok(Snap {
        c0: snap_rational(v),
        n,
        ambiguous,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub raw: f64,
    pub snap: Snap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionlessModel {
    pub kind: ModelKind,
    pub eps_raw: f64,
    pub eps: f64,
    /// friction coefficient C, when the model uses one
    pub friction: Option<f64>,
    pub diffusion: Coefficient,
    pub source: Coefficient,
}

/// Raw `(diffusion, source)` coefficients of the dimensionless model.
pub fn raw_coefficients(s: &CharacteristicScales, kind: ModelKind) -> Result<(f64, f64, Option<f64>)> {
    s.validate()?;
    let q = 1.0 / (1.0 - s.porosity);
    let (t, l, z, u) = (s.t_bar, s.l_bar, s.z_bar, s.u_bar);
    Ok(match kind {
        ModelKind::Gekerma => (
            t * s.lambda * q / (l * l),
            t * s.alpha * u.powi(3) * q / (z * l),
            None,
        ),
        ModelKind::Komarova => {
            let c3 = s.friction()?.powi(3);
            (
                u * s.rho.sqrt() * t * s.lambda * s.alpha * q / (c3 * l * l),
                s.alpha * u.powi(3) * s.rho.powf(1.5) * t * q / (z * c3 * l),
                Some(s.friction()?),
            )
        }
        ModelKind::Bagnold => {
            let c3 = s.friction()?.powi(3);
            let common = s.alpha * s.rho.powf(1.5) * u.powi(3) * t * q / c3;
            (
                s.lambda * common / (l * l),
                common / (l * z),
                Some(s.friction()?),
            )
        }
    })
}

pub fn nondimensionalize(s: &CharacteristicScales, kind: ModelKind) -> Result<DimensionlessModel> {
    let (d, src, friction) = raw_coefficients(s, kind)?;
    let eps_raw = s.eps_raw();
    let eps = snap_eps(eps_raw);
    Ok(DimensionlessModel {
        kind,
        eps_raw,
        eps,
        friction,
        diffusion: Coefficient {
            raw: d,
            snap: snap_coefficient(d, eps)?,
        },
        source: Coefficient {
            raw: src,
            snap: snap_coefficient(src, eps)?,
        },
    })
}

/// Parameters of `∂z/∂t − (a/ε^j) ∇·((g+ν)∇z) = (b/ε^i) ∇·f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeParams {
    pub a: f64,
    pub b: f64,
    pub i: u32,
    pub j: u32,
    pub eps: f64,
    pub nu: f64,
    pub porosity: f64,
}

impl RegimeParams {
    pub fn new(a: f64, b: f64, i: u32, j: u32, eps: f64, nu: f64) -> Result<Self> {
        let r = Self {
            a,
            b,
            i,
            j,
            eps,
            nu,
            porosity: 0.5,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::InvalidParameter(format!("a must be positive, got {}", self.a)));
        }
        if !self.b.is_finite() {
            return Err(Error::InvalidParameter("b must be finite".into()));
        }
        if self.i > 2 || self.j > 2 {
            return Err(Error::InvalidParameter(format!(
                "exponents must lie in 0..=2, got i={}, j={}",
                self.i, self.j
            )));
        }
        if !(self.eps > 0.0 && self.eps <= 0.5) {
            return Err(Error::InvalidParameter(format!(
                "eps must lie in (0, 1/2], got {}",
                self.eps
            )));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(Error::InvalidParameter(format!("nu must be >= 0, got {}", self.nu)));
        }
        Ok(())
    }

    pub fn with_eps(self, eps: f64) -> Self {
        Self { eps, ..self }
    }

    /// Effective diffusion factor `a/ε^j`.
    pub fn diffusion_factor(&self) -> f64 {
        self.a / self.eps.powi(self.j as i32)
    }

    /// Effective source factor `b/ε^i`.
    pub fn source_factor(&self) -> f64 {
        self.b / self.eps.powi(self.i as i32)
    }
}

/// Classifies raw coefficients into `(a, j)` and `(b, i)` with the snapped
/// ε. Ambiguous snaps are an error; override them explicitly.
pub fn classify_regime(
    scales: &CharacteristicScales,
    diffusion_raw: f64,
    source_raw: f64,
) -> Result<RegimeParams> {
    scales.validate()?;
    let eps = snap_eps(scales.eps_raw());
    let mut snaps = Vec::with_capacity(2);
    for c in [diffusion_raw, source_raw] {
        let s = snap_coefficient(c, eps)?;
        if s.ambiguous {
            let alt = if s.n == 0 { 1 } else { s.n - 1 };
            return Err(Error::AmbiguousSnap {
                value: c,
                first: s.n,
                second: alt,
            });
        }
        snaps.push(s);
    }
    let r = RegimeParams {
        a: snaps[0].c0.value(),
        j: snaps[0].n,
        b: snaps[1].c0.value(),
        i: snaps[1].n,
        eps: eps.min(0.5),
        nu: 0.0,
        porosity: scales.porosity,
    };
    r.validate()?;
    Ok(r)
}

/// One sub-model of the short/mean/long-term tables, with the values the
/// original tables report next to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimePreset {
    pub id: &'static str,
    pub label: &'static str,
    pub kind: ModelKind,
    pub scales: CharacteristicScales,
    pub reported_eps: f64,
    pub reported_diffusion: Snap,
    pub reported_source: Snap,
    /// reported friction coefficient, when the table lists one
    pub reported_friction: Option<f64>,
}

const fn reported(num: u32, den: u32, n: u32) -> Snap {
    Snap {
        c0: Rational { num, den },
        n,
        ambiguous: false,
    }
}

fn base_scales() -> CharacteristicScales {
    CharacteristicScales {
        t_bar: 100.0 * DAY,
        l_bar: 300.0,
        z_bar: 1.0,
        u_bar: 1.0,
        w_bar: 1.0 / 4.7e4,
        porosity: 0.5,
        alpha: 1e-4,
        lambda: 3.0,
        grain_diameter: 3e-4,
        kappa: 0.4,
        rho: 1.0,
    }
}

pub fn regime_presets() -> Vec<RegimePreset> {
    let a = base_scales();
    let kom = |s: CharacteristicScales| CharacteristicScales {
        alpha: 100.0,
        lambda: 6.0,
        ..s
    };
    let b = CharacteristicScales {
        t_bar: 8.0 * YEAR,
        w_bar: 1.0 / (4.0 * DAY),
        z_bar: 10.0,
        l_bar: 30.0,
        ..a
    };
    let c = CharacteristicScales {
        t_bar: 200.0 * YEAR,
        w_bar: 1.0 / YEAR,
        z_bar: 50.0,
        l_bar: 300.0,
        ..a
    };
    vec![
        RegimePreset {
            id: "A-1",
            label: "short term, Gekerma",
            kind: ModelKind::Gekerma,
            scales: a,
            reported_eps: 1.0 / 200.0,
            reported_diffusion: reported(3, 1, 1),
            reported_source: reported(6, 1, 0),
            reported_friction: None,
        },
        RegimePreset {
            id: "A-2",
            label: "short term, Komarova",
            kind: ModelKind::Komarova,
            scales: kom(a),
            reported_eps: 1.0 / 200.0,
            reported_diffusion: reported(3, 1, 1),
            reported_source: reported(3, 2, 1),
            reported_friction: Some(33.5),
        },
        RegimePreset {
            id: "B-1",
            label: "mean term, Gekerma",
            kind: ModelKind::Gekerma,
            scales: b,
            reported_eps: 1e-3,
            reported_diffusion: reported(16, 1, 1),
            reported_source: reported(1, 4, 1),
            reported_friction: None,
        },
        RegimePreset {
            id: "B-2",
            label: "mean term, Komarova",
            kind: ModelKind::Komarova,
            scales: kom(CharacteristicScales { l_bar: 100.0, ..b }),
            reported_eps: 1e-3,
            reported_diffusion: reported(39, 1, 1),
            reported_source: reported(1, 10, 1),
            reported_friction: Some(34.5),
        },
        RegimePreset {
            id: "C-1",
            label: "long term, Gekerma",
            kind: ModelKind::Gekerma,
            scales: c,
            reported_eps: 1.0 / 200.0,
            reported_diffusion: reported(5, 1, 2),
            reported_source: reported(1, 2, 1),
            reported_friction: None,
        },
        RegimePreset {
            id: "C-2",
            label: "long term, Komarova",
            kind: ModelKind::Komarova,
            scales: kom(c),
            reported_eps: 1.0 / 200.0,
            reported_diffusion: reported(5, 8, 2),
            reported_source: reported(9, 1, 1),
            reported_friction: Some(39.0),
        },
    ]
}

pub fn regime_preset(id: &str) -> Option<RegimePreset> {
    regime_presets().into_iter().find(|p| p.id == id)
}

/// Comparison of one coefficient against its reported snapped value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermComparison {
    pub raw: f64,
    pub snapped: Snap,
    pub reported: Snap,
    pub reported_value: f64,
    /// raw / reported_value
    pub ratio: f64,
}

impl TermComparison {
    pub fn within_factor(&self, factor: f64) -> bool {
        self.ratio <= factor && self.ratio >= 1.0 / factor
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub id: String,
    pub kind: ModelKind,
    pub eps_raw: f64,
    pub eps: f64,
    pub reported_eps: f64,
    pub friction: Option<f64>,
    pub reported_friction: Option<f64>,
    pub diffusion: TermComparison,
    pub source: TermComparison,
}

pub fn scale_row(p: &RegimePreset) -> Result<ScaleRow> {
    let m = nondimensionalize(&p.scales, p.kind)?;
    let cmp = |c: &Coefficient, rep: Snap| {
        let rv = rep.value(p.reported_eps);
        TermComparison {
            raw: c.raw,
            snapped: c.snap,
            reported: rep,
            reported_value: rv,
            ratio: c.raw / rv,
        }
    };
    Ok(ScaleRow {
        id: p.id.to_string(),
        kind: p.kind,
        eps_raw: m.eps_raw,
        eps: m.eps,
        reported_eps: p.reported_eps,
        friction: m.friction,
        reported_friction: p.reported_friction,
        diffusion: cmp(&m.diffusion, p.reported_diffusion),
        source: cmp(&m.source, p.reported_source),
    })
}
