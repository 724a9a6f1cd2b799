use crate::config::ExperimentConfig;
use crate::output::{Check, Outputs};
use anyhow::{bail, Context, Result};
use dunes::analysis::{
    estimate_check, homogenization_error, two_scale_limit_pairing, two_scale_pairing, ErrorReport,
    TestFunction,
};
use dunes::cell::{
    cell_coefficients, solve_cell_periodic, solve_corrector, solve_longterm_limit, CellFamily,
    CellSolution,
};
use dunes::field_io::write_dhf1;
use dunes::grid::{gradient, l2_norm, mean_value, vector_l2_norm, ScalarField};
use dunes::physics::{regime_preset, regime_presets, scale_row, validate_closure, ScaleRow};
use dunes::solver::{default_dt, mass_drift, solve_parabolic, SolveConfig, SolveResult, WindForcing};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

/// Tolerance on `|mean(z(t)) − mean(z(0))|`.
const MASS_TOL: f64 = 1e-10;
const SCALE_FACTOR: f64 = 3.0;

pub fn validate(cfg: &ExperimentConfig, out: &Outputs, samples: usize) -> Result<Vec<Check>> {
    let closure = cfg.closure.resolve()?;
    let report = validate_closure(&closure, samples)?;
    out.json("validation.json", &report)?;
    Ok(report
        .checks
        .iter()
        .map(|c| {
            Check::new(
                format!("{}/{}", cfg.closure.id, c.name),
                c.passed,
                format!("worst margin {:e} at |u| = {:.4}", c.worst_margin, c.at_speed),
            )
        })
        .collect())
}

pub fn scale(cfg: &ExperimentConfig, out: &Outputs, all: bool) -> Result<Vec<Check>> {
    let presets = match cfg.regime.preset_id()? {
        Some(id) if !all => vec![regime_preset(&id)
            .with_context(|| format!("unknown regime preset `{id}`"))?],
        _ => regime_presets(),
    };
    let rows: Vec<ScaleRow> = presets.iter().map(scale_row).collect::<dunes::Result<_>>()?;
    let mut w = out.create("scale.csv")?;
    writeln!(
        w,
        "id,kind,eps_raw,eps,reported_eps,term,raw,snapped,reported,ratio,within_factor"
    )?;
    let mut checks = Vec::new();
    for r in &rows {
        for (term, t) in [("diffusion", &r.diffusion), ("source", &r.source)] {
            let ok = t.within_factor(SCALE_FACTOR);
            writeln!(
                w,
                "{},{},{:e},{:e},{:e},{term},{:e},{},{},{:e},{ok}",
                r.id,
                r.kind,
                r.eps_raw,
                r.eps,
                r.reported_eps,
                t.raw,
                snap_label(&t.snapped),
                snap_label(&t.reported),
                t.ratio,
            )?;
            checks.push(Check::new(
                format!("{}/{term}", r.id),
                ok,
                format!(
                    "raw {:.4e} -> {}, reported {} ({:.4e}), ratio {:.3}",
                    t.raw,
                    snap_label(&t.snapped),
                    snap_label(&t.reported),
                    t.reported_value,
                    t.ratio
                ),
            ));
        }
    }
    w.flush()?;
    out.json("scale.json", &rows)?;
    Ok(checks)
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn snap_label(s: &dunes::physics::Snap) -> String {
    let c = if s.c0.den == 1 {
        s.c0.num.to_string()
    } else {
        format!("{}/{}", s.c0.num, s.c0.den)
    };
    match s.n {
        0 => c,
        1 => format!("{c}/eps"),
        n => format!("{c}/eps^{n}"),
    }
}

#[derive(Serialize)]
struct SolveSummary {
    eps: f64,
    dt: f64,
    t_end: f64,
    steps: usize,
    snapshots: usize,
    linear_iterations: usize,
    nu: f64,
    mass_drift: f64,
    max_l2: f64,
    final_l2: f64,
}

pub fn solve(cfg: &ExperimentConfig, out: &Outputs) -> Result<Vec<Check>> {
    let grid = cfg.grid()?;
    let closure = cfg.closure.resolve()?;
    let wind = cfg.wind.resolve()?;
    let regime = cfg.regime.resolve(&closure)?;
    let cell_cfg = cfg.cell.resolve(&cfg.solve);
    let z0 = cfg.initial.build(grid, || {
        Ok(solve_cell_periodic(&wind, &closure, 0.0, grid, &cell_cfg)?.fields[0].clone())
    })?;
    let sc = cfg.solve.resolve(&regime);
    let forcing = WindForcing::new(grid, wind, closure, regime.eps);
    let res = solve_parabolic(&z0, &regime, &forcing, &sc)?;

    let mut w = out.create("norms.csv")?;
    res.series.write_csv(&mut w)?;
    w.flush()?;
    let mut w = out.create("snapshots.dhf1")?;
    for s in &res.snapshots {
        write_dhf1(&mut w, s)?;
    }
    w.flush()?;
    let last = res.final_state();
    out.field("final", last, cfg.output.pgm)?;

    let drift = mass_drift(&res);
    let max_l2 = res.series.l2.iter().fold(0.0f64, |m, v| m.max(*v));
    out.json(
        "summary.json",
        &SolveSummary {
            eps: regime.eps,
            dt: res.dt,
            t_end: sc.t_end,
            steps: sc.steps(),
            snapshots: res.snapshots.len(),
            linear_iterations: res.linear_iterations,
            nu: regime.nu,
            mass_drift: drift,
            max_l2,
            final_l2: l2_norm(last),
        },
    )?;
    Ok(vec![
        Check::new("mass", drift <= MASS_TOL, format!("drift {drift:e}")),
        Check::new("finite", last.is_finite(), format!("max |z| {:e}", last.max_abs())),
    ])
}

pub fn cell(cfg: &ExperimentConfig, out: &Outputs) -> Result<Vec<Check>> {
    let grid = cfg.grid()?;
    let closure = cfg.closure.resolve()?;
    let wind = cfg.wind.resolve()?;
    let cc = cfg.cell.resolve(&cfg.solve);
    let t = cfg.cell.t_slow;
    let u = solve_cell_periodic(&wind, &closure, t, grid, &cc)?;
    write_cell(out, "cell", &u, cfg.output.pgm)?;

    let g = cell_coefficients(&wind, &closure, t, grid, cc.m)?;
    let limit = solve_longterm_limit(&g, &cc.linear)?;
    out.field("longterm", &limit, cfg.output.pgm)?;

    let worst_mean = u.fields.iter().map(|f| mean_value(f).abs()).fold(0.0, f64::max);
    let grad = vector_l2_norm(&gradient(&limit));
    Ok(vec![
        Check::new(
            "periodicity",
            u.residual < cc.tol_per,
            format!("residual {:e} after {} periods", u.residual, u.periods),
        ),
        Check::new("zero-mean", worst_mean <= MASS_TOL, format!("max |mean| {worst_mean:e}")),
        Check::new("longterm-flat", grad <= 1e-8, format!("|grad U| {grad:e}")),
    ])
}

fn write_cell(out: &Outputs, stem: &str, u: &CellSolution, pgm: bool) -> Result<()> {
    let mut w = out.create(&format!("{stem}.dhf1"))?;
    u.write_frames(&mut w)?;
    w.flush()?;
    out.jsonl(&format!("{stem}.jsonl"), std::iter::once(u.meta()))?;
    if pgm {
        out.pgm(&format!("{stem}.pgm"), &u.fields[0])?;
    }
    Ok(())
}

#[derive(Serialize)]
struct GapSeries {
    name: String,
    limit: f64,
    gaps: Vec<f64>,
}

#[derive(Serialize)]
struct SweepOutput {
    report: ErrorReport,
    pairings: Vec<GapSeries>,
    mass_drift: f64,
}

/// Runs the ε sweep against a cell family on `[0, t_end]`.
fn sweep(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    let grid = cfg.grid()?;
    let closure = cfg.closure.resolve()?;
    let wind = cfg.wind.resolve()?;
    let regime = cfg.regime.resolve(&closure)?;
    let cc = cfg.cell.resolve(&cfg.solve);
    let t_end = cfg.solve.t_end;
    let count = (t_end / cfg.cell.family_step - 1e-9).ceil() as usize;
    let nodes: Vec<f64> = (0..=count)
        .map(|k| (k as f64 * cfg.cell.family_step).min(t_end))
        .collect();
    let cells = nodes
        .par_iter()
        .map(|&t| solve_cell_periodic(&wind, &closure, t, grid, &cc))
        .collect::<dunes::Result<Vec<_>>>()?;
    let family = CellFamily::new(cells)?;
    let psis = TestFunction::shipped(t_end);
    let limits: Vec<f64> = psis.iter().map(|p| two_scale_limit_pairing(&family, p)).collect();
    let z0 = &family.cells[0].fields[0];

    // θ samples align with time steps when dt = ε/m
    let runs = cfg
        .sweep
        .eps
        .par_iter()
        .map(|&eps| -> Result<_> {
            let r = regime.with_eps(eps);
            let sc = SolveConfig {
                dt: eps / cc.m as f64,
                t_end,
                linear: cfg.solve.linear(),
                stride: 1,
            };
            let forcing = WindForcing::new(grid, wind, closure, eps);
            let res = solve_parabolic(z0, &r, &forcing, &sc)
                .with_context(|| format!("eps = {eps}"))?;
            let entry = homogenization_error(&res, &family, eps)?;
            let gaps = psis
                .iter()
                .zip(&limits)
                .map(|(p, l)| Ok((two_scale_pairing(&res, p, eps)? - l).abs()))
                .collect::<dunes::Result<Vec<_>>>()?;
            Ok((entry, gaps, mass_drift(&res)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut order: Vec<usize> = (0..runs.len()).collect();
    order.sort_by(|a, b| runs[*b].0.eps.total_cmp(&runs[*a].0.eps));
    let pairings = psis
        .iter()
        .zip(&limits)
        .enumerate()
        .map(|(k, (p, l))| GapSeries {
            name: p.name.clone(),
            limit: *l,
            gaps: order.iter().map(|&i| runs[i].1[k]).collect(),
        })
        .collect();
    let drift = runs.iter().map(|r| r.2).fold(0.0, f64::max);
    let report = ErrorReport::new(runs.into_iter().map(|r| r.0).collect())?;
    Ok(SweepOutput {
        report,
        pairings,
        mass_drift: drift,
    })
}

fn write_sweep(out: &Outputs, s: &SweepOutput) -> Result<()> {
    let mut w = out.create("errors.csv")?;
    s.report.write_csv(&mut w)?;
    w.flush()?;
    out.json("errors.json", s)
}

pub fn homogenize(cfg: &ExperimentConfig, out: &Outputs) -> Result<Vec<Check>> {
    let s = sweep(cfg)?;
    write_sweep(out, &s)?;
    let errs: Vec<f64> = s.report.entries.iter().map(|e| e.sup_error).collect();
    let slope = s.report.sup_fit.slope;
    let mut checks = vec![
        Check::new(
            "rate",
            slope >= 0.8,
            format!("slope {slope:.3}, residual {:.2e}", s.report.sup_fit.residual),
        ),
        Check::new(
            "decreasing",
            errs.windows(2).all(|w| w[1] < w[0]),
            format!("sup errors {}", fmt_list(&errs)),
        ),
        Check::new("mass", s.mass_drift <= MASS_TOL, format!("drift {:e}", s.mass_drift)),
    ];
    for p in &s.pairings {
        checks.push(Check::new(
            format!("pairing/{}", p.name),
            p.gaps.windows(2).all(|w| w[1] <= 1.1 * w[0]),
            format!("limit {:.4e}, gaps {}", p.limit, fmt_list(&p.gaps)),
        ));
    }
    Ok(checks)
}

#[derive(Serialize)]
struct CorrectorSummary {
    t_slow: f64,
    dt_slow: f64,
    slow_dependent: bool,
    max_abs: f64,
    max_l2: f64,
}

pub fn corrector(cfg: &ExperimentConfig, out: &Outputs) -> Result<Vec<Check>> {
    let grid = cfg.grid()?;
    let closure = cfg.closure.resolve()?;
    let wind = cfg.wind.resolve()?;
    let cc = cfg.cell.resolve(&cfg.solve);
    let (t, dt) = (cfg.cell.t_slow, cfg.cell.dt_slow);
    let (u0, u1) = rayon::join(
        || solve_cell_periodic(&wind, &closure, t, grid, &cc),
        || solve_cell_periodic(&wind, &closure, t + dt, grid, &cc),
    );
    let k = solve_corrector(&u0?, &u1?, &wind, &closure, dt, &cc)?;
    write_cell(out, "corrector", &k, cfg.output.pgm)?;
    let max_abs = k.fields.iter().map(ScalarField::max_abs).fold(0.0, f64::max);
    let max_l2 = k.fields.iter().map(l2_norm).fold(0.0, f64::max);
    let slow_dependent = wind.depends_on_slow_time();
    out.json(
        "corrector.json",
        &CorrectorSummary {
            t_slow: t,
            dt_slow: dt,
            slow_dependent,
            max_abs,
            max_l2,
        },
    )?;

    let s = sweep(cfg)?;
    write_sweep(out, &s)?;
    let spread = s.report.scaled_spread();
    let scaled: Vec<f64> = s.report.entries.iter().map(|e| e.scaled_error).collect();
    let mut checks = vec![Check::new(
        "scaled-spread",
        spread < 1.5,
        format!("error/eps {}, spread {spread:.3}", fmt_list(&scaled)),
    )];
    if !slow_dependent {
        checks.push(Check::new(
            "vanishes",
            max_abs <= cc.linear.tol,
            format!("wind is steady in slow time, max |U1| {max_abs:e}"),
        ));
    }
    Ok(checks)
}

pub fn estimate(cfg: &ExperimentConfig, out: &Outputs) -> Result<Vec<Check>> {
    let grid = cfg.grid()?;
    let closure = cfg.closure.resolve()?;
    let wind = cfg.wind.resolve()?;
    let regime = cfg.regime.resolve(&closure)?;
    let z0 = cfg.initial.build(grid, || bail!("estimate does not support a cell initial state"))?;
    let runs = cfg
        .sweep
        .eps
        .par_iter()
        .map(|&eps| -> Result<(f64, SolveResult)> {
            let r = regime.with_eps(eps);
            let sc = SolveConfig {
                dt: cfg.solve.dt.unwrap_or_else(|| default_dt(&r)),
                ..cfg.solve.resolve(&r)
            };
            let forcing = WindForcing::new(grid, wind, closure, eps);
            Ok((eps, solve_parabolic(&z0, &r, &forcing, &sc)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<(f64, &SolveResult)> = runs.iter().map(|(e, r)| (*e, r)).collect();
    let rep = estimate_check(&refs, regime.j)?;
    let mut w = out.create("estimate.csv")?;
    rep.write_csv(&mut w)?;
    w.flush()?;
    out.json("estimate.json", &rep)?;
    Ok(vec![
        Check::new(
            "grad-exponent",
            (rep.grad_sq_exponent - rep.expected[1]).abs() <= 0.3,
            format!("{:.3}, expected {}", rep.grad_sq_exponent, rep.expected[1]),
        ),
        Check::new(
            "linf-exponent",
            (rep.linf_l2_exponent - rep.expected[0]).abs() <= 0.2,
            format!("{:.3}, expected {}", rep.linf_l2_exponent, rep.expected[0]),
        ),
    ])
}
