//! Experiment configuration read from TOML.
//!
//! Every block is optional and falls back to its default. Unknown keys are
//! rejected so that typos surface as errors rather than silent defaults.

use anyhow::{anyhow, bail, Context, Result};
use dunes::cell::CellConfig;
use dunes::grid::{ScalarField, TorusGrid};
use dunes::physics::{
    regime_preset, Amplitude, ClosureParams, FluxClosure, ModelKind, RegimeParams, WindFamily,
    WindModel,
};
use dunes::solver::{default_dt, default_nu, LinearSolveOptions, SolveConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub grid: GridBlock,
    #[serde(default)]
    pub closure: ClosureBlock,
    #[serde(default)]
    pub wind: WindBlock,
    #[serde(default = "RegimeBlock::fallback")]
    pub regime: RegimeBlock,
    #[serde(default)]
    pub solve: SolveBlock,
    #[serde(default)]
    pub cell: CellBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
    #[serde(default)]
    pub initial: InitialBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            grid: GridBlock::default(),
            closure: ClosureBlock::default(),
            wind: WindBlock::default(),
            regime: RegimeBlock::fallback(),
            solve: SolveBlock::default(),
            cell: CellBlock::default(),
            sweep: SweepBlock::default(),
            initial: InitialBlock::default(),
            output: OutputBlock::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridBlock {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
}

impl Default for GridBlock {
    fn default() -> Self {
        Self {
            nx: 32,
            ny: 32,
            lx: 1.0,
            ly: 1.0,
        }
    }
}

/// Per-field overrides of a closure preset.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosureOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_thr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_thr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_exp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friction: Option<f64>,
}

impl ClosureOverrides {
    fn apply(&self, p: &mut ClosureParams) {
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut p.d, self.d);
        set(&mut p.u_thr, self.u_thr);
        set(&mut p.g_thr, self.g_thr);
        set(&mut p.g_floor, self.g_floor);
        set(&mut p.u_max, self.u_max);
        set(&mut p.u_c, self.u_c);
        set(&mut p.b_exp, self.b_exp);
        set(&mut p.lambda, self.lambda);
        set(&mut p.alpha, self.alpha);
        set(&mut p.rho, self.rho);
        set(&mut p.friction, self.friction);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClosureBlock {
    pub id: String,
    #[serde(default)]
    pub overrides: ClosureOverrides,
}

impl Default for ClosureBlock {
    fn default() -> Self {
        Self {
            id: "smooth-saturating".into(),
            overrides: ClosureOverrides::default(),
        }
    }
}

impl ClosureBlock {
    pub fn resolve(&self) -> Result<FluxClosure> {
        let mut c = FluxClosure::preset(&self.id).ok_or_else(|| {
            anyhow!(
                "unknown closure `{}`; known: {}",
                self.id,
                FluxClosure::VALID_PRESETS
                    .iter()
                    .chain(FluxClosure::COUNTEREXAMPLES.iter())
                    .copied()
                    .collect::<Vec<_>>()
                    .join(", ")
            )
        })?;
        self.overrides.apply(&mut c.params);
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindBlock {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<WindFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gust: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slow_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<Amplitude>,
}

impl Default for WindBlock {
    fn default() -> Self {
        Self {
            id: "alternating-drift".into(),
            family: None,
            direction: None,
            gust: None,
            slow_rate: None,
            amplitude: None,
        }
    }
}

impl WindBlock {
    pub fn resolve(&self) -> Result<WindModel> {
        let mut w = WindModel::preset(&self.id).ok_or_else(|| {
            anyhow!("unknown wind `{}`; known: {}", self.id, WindModel::PRESETS.join(", "))
        })?;
        if let Some(f) = self.family {
            w.family = f;
        }
        if let Some(a) = self.amplitude {
            w.amplitude = a;
        }
        w.direction = self.direction.unwrap_or(w.direction);
        w.gust = self.gust.unwrap_or(w.gust);
        w.slow_rate = self.slow_rate.unwrap_or(w.slow_rate);
        Ok(w)
    }
}

/// Either a tabulated regime (`preset = "A-1"`, or `preset = "A"` with a
/// model kind) or explicit coefficients. Explicit fields override a preset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
}

impl RegimeBlock {
    /// Used when the block is absent: `a = b = 1`, `i = j = 1`, `ε = 1/10`.
    pub fn fallback() -> Self {
        Self {
            a: Some(1.0),
            b: Some(1.0),
            i: Some(1),
            j: Some(1),
            eps: Some(0.1),
            ..Self::default()
        }
    }

    pub fn preset_id(&self) -> Result<Option<String>> {
        let Some(p) = &self.preset else {
            return Ok(None);
        };
        if p.contains('-') {
            return Ok(Some(p.clone()));
        }
        let suffix = match self.model {
            Some(ModelKind::Gekerma) => "1",
            Some(ModelKind::Komarova) => "2",
            Some(ModelKind::Bagnold) => bail!("no tabulated regime for the Bagnold model"),
            None => bail!("regime preset `{p}` needs `model` (gekerma or komarova)"),
        };
        Ok(Some(format!("{p}-{suffix}")))
    }

    pub fn resolve(&self, closure: &FluxClosure) -> Result<RegimeParams> {
        let base = match self.preset_id()? {
            Some(id) => {
                let p = regime_preset(&id).ok_or_else(|| {
                    anyhow!("unknown regime preset `{id}`; known: A-1, A-2, B-1, B-2, C-1, C-2")
                })?;
                Some((
                    p.reported_diffusion.c0.value(),
                    p.reported_source.c0.value(),
                    p.reported_source.n,
                    p.reported_diffusion.n,
                    p.reported_eps,
                ))
            }
            None => None,
        };
        let pick = |name: &str, explicit: Option<f64>, preset: Option<f64>| {
            explicit
                .or(preset)
                .ok_or_else(|| anyhow!("regime: `{name}` is required when no preset is given"))
        };
        let a = pick("a", self.a, base.map(|b| b.0))?;
        let b = pick("b", self.b, base.map(|b| b.1))?;
        let i = pick("i", self.i.map(f64::from), base.map(|b| b.2 as f64))? as u32;
        let j = pick("j", self.j.map(f64::from), base.map(|b| b.3 as f64))? as u32;
        let eps = pick("eps", self.eps, base.map(|b| b.4))?;
        let mut r = RegimeParams::new(a, b, i, j, eps, 0.0)?;
        r.nu = match self.nu {
            Some(nu) => nu,
            None => default_nu(&r, closure),
        };
        r.validate()?;
        Ok(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveBlock {
    /// Defaults to `ε/50`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub t_end: f64,
    pub tol_lin: f64,
    pub max_iter: usize,
    pub stride: usize,
}

impl Default for SolveBlock {
    fn default() -> Self {
        let lin = LinearSolveOptions::default();
        Self {
            dt: None,
            t_end: 1.0,
            tol_lin: lin.tol,
            max_iter: lin.max_iter,
            stride: 1,
        }
    }
}

impl SolveBlock {
    pub fn linear(&self) -> LinearSolveOptions {
        LinearSolveOptions {
            tol: self.tol_lin,
            max_iter: self.max_iter,
        }
    }

    pub fn resolve(&self, regime: &RegimeParams) -> SolveConfig {
        SolveConfig {
            dt: self.dt.unwrap_or_else(|| default_dt(regime)),
            t_end: self.t_end,
            linear: self.linear(),
            stride: self.stride,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellBlock {
    pub m: usize,
    pub tol_per: f64,
    pub max_periods: usize,
    /// Slow time of the `cell` subcommand.
    pub t_slow: f64,
    /// Forward-difference step of the corrector source.
    pub dt_slow: f64,
    /// Spacing of the slow-time nodes of a cell family.
    pub family_step: f64,
}

impl Default for CellBlock {
    fn default() -> Self {
        let c = CellConfig::default();
        Self {
            m: c.m,
            tol_per: c.tol_per,
            max_periods: c.max_periods,
            t_slow: 0.0,
            dt_slow: 0.1,
            family_step: 0.05,
        }
    }
}

impl CellBlock {
    pub fn resolve(&self, solve: &SolveBlock) -> CellConfig {
        CellConfig {
            m: self.m,
            tol_per: self.tol_per,
            max_periods: self.max_periods,
            linear: solve.linear(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepBlock {
    pub eps: Vec<f64>,
}

impl Default for SweepBlock {
    fn default() -> Self {
        Self {
            eps: vec![0.1, 0.05, 0.025],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    Zero,
    /// `amplitude · cos(2π kx x/lx) · cos(2π ky y/ly)`
    Cosine,
    /// Uniform in `[−amplitude, amplitude]` from `seed`.
    Random,
    /// Periodic cell profile at slow time and phase zero.
    Cell,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialBlock {
    pub kind: InitialKind,
    pub amplitude: f64,
    pub kx: u32,
    pub ky: u32,
    pub seed: u64,
}

impl Default for InitialBlock {
    fn default() -> Self {
        Self {
            kind: InitialKind::Cosine,
            amplitude: 1.0,
            kx: 1,
            ky: 0,
            seed: 0,
        }
    }
}

impl InitialBlock {
    pub fn build(
        &self,
        grid: TorusGrid,
        cell: impl FnOnce() -> Result<ScalarField>,
    ) -> Result<ScalarField> {
        let a = self.amplitude;
        Ok(match self.kind {
            InitialKind::Zero => ScalarField::zeros(grid),
            InitialKind::Cosine => ScalarField::from_fn(grid, |x, y| {
                a * (2.0 * PI * self.kx as f64 * x / grid.lx()).cos()
                    * (2.0 * PI * self.ky as f64 * y / grid.ly()).cos()
            }),
            InitialKind::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let v = (0..grid.len()).map(|_| rng.gen_range(-a..=a)).collect();
                ScalarField::new(grid, v)?
            }
            InitialKind::Cell => cell()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: PathBuf,
    /// Write PGM previews next to the raw dumps.
    pub pgm: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            pgm: true,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        let g = &self.grid;
        Ok(TorusGrid::new(g.nx, g.ny, g.lx, g.ly)?)
    }

    /// Checks every cross-reference without running anything.
    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        let closure = self.closure.resolve()?;
        self.wind.resolve()?;
        let regime = self.regime.resolve(&closure)?;
        self.solve.resolve(&regime).validate()?;
        self.cell.resolve(&self.solve).validate()?;
        if self.sweep.eps.is_empty() {
            bail!("sweep: eps list is empty");
        }
        for &e in &self.sweep.eps {
            regime.with_eps(e).validate().context("sweep")?;
        }
        if !(self.cell.dt_slow > 0.0 && self.cell.family_step > 0.0) {
            bail!("cell: dt_slow and family_step must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let c = ExperimentConfig::parse("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn partial_blocks_keep_other_defaults() {
        let c = ExperimentConfig::parse("[grid]\nnx = 16\n[cell]\nm = 16\n").unwrap();
        assert_eq!((c.grid.nx, c.grid.ny), (16, 32));
        assert_eq!(c.cell.m, 16);
        assert_eq!(c.cell.tol_per, CellBlock::default().tol_per);
    }

    #[test]
    fn echo_round_trips() {
        let text = r#"
            [grid]
            nx = 16
            ny = 8
            lx = 2.0
            ly = 1.0
            [closure]
            id = "gekerma-clamped"
            overrides = { u_max = 4.5 }
            [wind]
            id = "rotating"
            slow_rate = 0.25
            amplitude = { base = 1.0, depth = 0.3, kx = 2, ky = 1 }
            [regime]
            preset = "A"
            model = "gekerma"
            nu = 1e-6
            [sweep]
            eps = [0.1, 0.05, 0.025, 0.0125]
            [initial]
            kind = "random"
            amplitude = 0.1
            kx = 0
            ky = 0
            seed = 7
        "#;
        let c = ExperimentConfig::parse(text).unwrap();
        let echo = c.to_toml().unwrap();
        assert_eq!(ExperimentConfig::parse(&echo).unwrap(), c);
        c.validate().unwrap();
    }

    #[test]
    fn preset_resolution() {
        let closure = FluxClosure::preset("smooth-saturating").unwrap();
        let r = RegimeBlock {
            preset: Some("C".into()),
            model: Some(ModelKind::Komarova),
            ..RegimeBlock::default()
        };
        let p = r.resolve(&closure).unwrap();
        assert_eq!((p.a, p.j, p.b, p.i), (0.625, 2, 9.0, 1));
        let explicit = RegimeBlock {
            a: Some(2.0),
            ..RegimeBlock::default()
        };
        let err = explicit.resolve(&closure).unwrap_err().to_string();
        assert!(err.contains("`b` is required"), "{err}");
    }

    #[test]
    fn unknown_keys_are_reported_with_location() {
        let err = ExperimentConfig::parse("[grid]\nnx = 8\nnz = 3\n").unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("nz") && msg.contains("line 3"), "{msg}");
        let err = ExperimentConfig::parse("[closure]\nid = \"nope\"\n")
            .unwrap()
            .validate()
            .unwrap_err();
        assert!(err.to_string().contains("unknown closure `nope`"));
    }
}
