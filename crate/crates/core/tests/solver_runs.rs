use dunes::field_io::{read_dhf1, write_dhf1};
use dunes::grid::{ScalarField, TorusGrid};
use dunes::physics::{regime_preset, FluxClosure, RegimeParams, WindModel};
use dunes::solver::{
    default_dt, default_nu, mass_drift, solve_parabolic, LinearSolveOptions, SolveConfig,
    WindForcing,
};
use dunes::Error;
use std::f64::consts::PI;

#[test]
fn short_term_gekerma_run_stays_bounded() {
    let preset = regime_preset("A-1").unwrap();
    let eps = preset.reported_eps;
    let (d, s) = (preset.reported_diffusion, preset.reported_source);
    let regime = RegimeParams::new(d.c0.value(), s.c0.value(), s.n, d.n, eps, 0.0).unwrap();
    let closure = FluxClosure::preset("gekerma-clamped").unwrap();
    let grid = TorusGrid::unit(64).unwrap();
    let forcing = WindForcing::new(grid, WindModel::preset("alternating").unwrap(), closure, eps);
    let z0 = ScalarField::from_fn(grid, |x, y| 0.5 * (2.0 * PI * x).cos() * (2.0 * PI * y).sin());
    let cfg = SolveConfig {
        dt: default_dt(&regime),
        t_end: 1.0,
        linear: LinearSolveOptions::default(),
        stride: 1000,
    };
    let res = solve_parabolic(&z0, &regime, &forcing, &cfg).unwrap();
    assert_eq!(res.snapshots.len(), cfg.steps() / cfg.stride + 1);
    assert!(res.series.l2.iter().all(|v| v.is_finite() && *v < 10.0));
    assert!(mass_drift(&res) <= 1e-12);

    let mut csv = Vec::new();
    res.series.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("step,time,l2,h1_semi,mean,drift\n"));
    assert_eq!(text.lines().count(), cfg.steps() + 2);
}

#[test]
fn degenerate_closure_gets_regularised() {
    let closure = FluxClosure::preset("smooth-saturating-degenerate").unwrap();
    let regime = RegimeParams::new(1.0, 1.0, 1, 1, 0.05, 0.0).unwrap();
    let nu = default_nu(&regime, &closure);
    assert!(nu >= 1e-8 && (nu - 5e-5).abs() < 1e-15);
    let elliptic = FluxClosure::preset("smooth-saturating").unwrap();
    assert_eq!(default_nu(&regime, &elliptic), 0.0);

    let regime = RegimeParams { nu, ..regime };
    let grid = TorusGrid::unit(24).unwrap();
    let forcing = WindForcing::new(grid, WindModel::preset("alternating").unwrap(), closure, 0.05);
    let z0 = ScalarField::from_fn(grid, |x, _| (2.0 * PI * x).sin());
    let cfg = SolveConfig {
        dt: default_dt(&regime),
        t_end: 0.2,
        linear: LinearSolveOptions::default(),
        stride: 10,
    };
    let res = solve_parabolic(&z0, &regime, &forcing, &cfg).unwrap();
    assert!(mass_drift(&res) <= 1e-12);
}

#[test]
fn non_finite_initial_data_rejected() {
    let grid = TorusGrid::unit(8).unwrap();
    let mut v = vec![0.0; grid.len()];
    v[3] = f64::NAN;
    assert!(ScalarField::new(grid, v).is_err());
}

#[test]
fn snapshots_round_trip_through_dhf1() {
    let grid = TorusGrid::new(12, 8, 2.0, 1.5).unwrap();
    let regime = RegimeParams::new(1.0, 1.0, 1, 1, 0.1, 0.0).unwrap();
    let forcing = WindForcing::new(
        grid,
        WindModel::preset("rotating").unwrap(),
        FluxClosure::preset("smooth-saturating").unwrap(),
        0.1,
    );
    let cfg = SolveConfig {
        dt: 0.01,
        t_end: 0.1,
        linear: LinearSolveOptions::default(),
        stride: 5,
    };
    let res = solve_parabolic(&ScalarField::zeros(grid), &regime, &forcing, &cfg).unwrap();
    let mut buf = Vec::new();
    for s in &res.snapshots {
        write_dhf1(&mut buf, s).unwrap();
    }
    let mut r = buf.as_slice();
    let mut back = Vec::new();
    while let Some(f) = read_dhf1(&mut r).unwrap() {
        back.push(f);
    }
    assert_eq!(back, res.snapshots);
    assert!(matches!(
        read_dhf1(&mut &b"DHF1 garbage"[..]),
        Err(Error::Format(_)) | Err(Error::Io(_))
    ));
}
