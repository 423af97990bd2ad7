use std::f64::consts::PI;
use std::path::Path;

use jmgt_core::config::{load_config, profile_forcing, Profile};
use jmgt_core::nonlinear::FixedPointOptions;
use jmgt_core::oracle::{time_stepping_oracle, OracleOptions};
use jmgt_core::studies::{oracle_compare, relative_l2_discrepancy, solve_state, tau_sweep, taylor_test};
use jmgt_core::{BoundaryCondition, Error, Grid, HarmonicField, Model, Nonlinearity, PhysicalParams};

fn configs() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn model(nx: usize, tau: f64, eta: f64, harmonics: usize) -> Model {
    let grid = Grid::new(1.0, nx).unwrap();
    let params = PhysicalParams::uniform(nx, tau, 0.5, 1.0, 1.0, eta, 0.0, 2.0 * PI);
    Model::new(grid, params, BoundaryCondition::dirichlet(), BoundaryCondition::absorbing(1.0, 0.5), harmonics).unwrap()
}

#[test]
fn shipped_configs_validate_and_solve() {
    for name in ["linear-dirichlet.toml", "westervelt-absorbing.toml", "kuznetsov-impedance.toml"] {
        let c = load_config(&configs().join(name), &[]).unwrap();
        let m = c.model().unwrap();
        let f = c.forcing(&m).unwrap();
        let r = solve_state(&f, &m, c.equation(), &c.fixed_point_options()).unwrap();
        assert!(r.final_residual < 1e-8, "{name}: {}", r.final_residual);
    }
}

#[test]
fn variable_sound_speed_is_read_from_file() {
    let c = load_config(&configs().join("kuznetsov-impedance.toml"), &[]).unwrap();
    let raw = c.raw_model().unwrap();
    assert_eq!(raw.c2.len(), 33);
    assert_eq!(raw.c2[0], 1.0);
    assert!((raw.c2[16] - 1.2).abs() < 1e-6);
}

#[test]
fn westervelt_oracle_agrees_with_harmonic_balance() {
    let m = model(33, 0.1, 1.0, 4);
    let f = profile_forcing(&m, Profile::Gaussian, &[3.0], &[]).unwrap();
    let fp = FixedPointOptions::default();
    let opts = OracleOptions { steps_per_period: 512, ..OracleOptions::default() };
    let s = oracle_compare(&f, &m, Nonlinearity::Westervelt, &fp, &opts).unwrap();
    let get = |k: &str| s.rows.iter().find(|r| r.metric == k).unwrap().value;
    assert!(get("l2_discrepancy") < 1e-3, "{:?}", s.rows);
    assert!(get("second_harmonic_rel") < 1e-2, "{:?}", s.rows);
    assert!(get("periodicity_gap") <= 1e-8);
}

#[test]
fn oracle_error_decreases_with_step() {
    let m = model(17, 0.1, 0.0, 2);
    let f = profile_forcing(&m, Profile::Sine, &[1.0, 0.5], &[]).unwrap();
    let hb = solve_state(&f, &m, Nonlinearity::Linear, &FixedPointOptions::default()).unwrap().u;
    let errs: Vec<f64> = [64, 128, 256]
        .iter()
        .map(|&n| {
            let o = OracleOptions { steps_per_period: n, output_samples: Some(32), ..OracleOptions::default() };
            let r = time_stepping_oracle(&f, &m, Nonlinearity::Linear, &o).unwrap();
            relative_l2_discrepancy(&hb, &r.samples, &m).unwrap()
        })
        .collect();
    // midpoint is second order in time
    assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
}

#[test]
fn tau_sweep_rows_and_rates() {
    let m = model(33, 0.4, 0.0, 2);
    let f = profile_forcing(&m, Profile::Hat, &[1.0], &[]).unwrap();
    let s = tau_sweep(&f, &m, &[0.4, 0.2, 0.1, 0.05, 0.0], Nonlinearity::Linear, &FixedPointOptions::default()).unwrap();
    assert_eq!(s.rows.len(), 5);
    assert_eq!(s.rows[4].d_lo, 0.0);
    assert_eq!(s.rows[4].rate, None);
    for r in &s.rows[1..4] {
        let rate = r.rate.unwrap();
        assert!(rate > 0.5 && rate < 1.5, "{rate}");
    }
    let hash = &s.rows[0].config_hash;
    assert!(s.rows.iter().skip(1).all(|r| &r.config_hash != hash));
    assert!(s.rows.iter().all(|r| r.d_me >= 0.0));
    assert!(matches!(
        tau_sweep(&f, &m, &[0.1, 0.2], Nonlinearity::Linear, &FixedPointOptions::default()),
        Err(Error::InvalidArgument(_))
    ));
    assert!(tau_sweep(&f, &m, &[0.9], Nonlinearity::Linear, &FixedPointOptions::default()).is_err());
}

#[test]
fn taylor_test_of_linear_problem_has_no_remainder() {
    let m = model(17, 0.1, 0.0, 2);
    let f = profile_forcing(&m, Profile::Sine, &[1.0], &[]).unwrap();
    let dir = profile_forcing(&m, Profile::Hat, &[0.0, 1.0], &[]).unwrap();
    let s = taylor_test(&f, &dir, &m, Nonlinearity::Linear, &[1e-1, 1e-2, 1e-3], &FixedPointOptions::default()).unwrap();
    for r in &s.rows {
        assert!(r.remainder <= 1e-12 * r.first_order, "{r:?}");
    }
    let slopes: Vec<f64> = s.rows.iter().filter_map(|r| r.first_order_slope).collect();
    assert!(slopes.iter().all(|s| (s - 1.0).abs() < 1e-6));
}

#[test]
fn taylor_test_wraps_perturbed_failures() {
    let m = model(17, 0.1, 1.0, 4);
    let f = profile_forcing(&m, Profile::Sine, &[0.1], &[]).unwrap();
    let dir = profile_forcing(&m, Profile::Sine, &[1.0], &[]).unwrap();
    let err = taylor_test(&f, &dir, &m, Nonlinearity::Westervelt, &[1e3, 1e-1, 1e-2], &FixedPointOptions::default())
        .unwrap_err();
    match err {
        Error::ContractionLost { eps, source } => {
            assert_eq!(eps, 1e3);
            assert!(source.is_solver_failure());
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn zero_direction_gives_zero_rows() {
    let m = model(17, 0.1, 1.0, 2);
    let f = profile_forcing(&m, Profile::Sine, &[0.1], &[]).unwrap();
    let s = taylor_test(&f, &HarmonicField::zeros(2, 17), &m, Nonlinearity::Westervelt, &[1e-1, 1e-2, 1e-3], &FixedPointOptions::default())
        .unwrap();
    assert!(s.rows.iter().all(|r| r.remainder == 0.0 && r.first_order == 0.0));
}
