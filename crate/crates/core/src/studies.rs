//! End-to-end numerical experiments: manufactured solutions, the `τ → 0`
//! sweep, Taylor tests of the source-to-state derivative and comparison
//! against the time-stepping oracle.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::diagnostics::{estimate_ratio_report, time_h1_sq, time_l2_sq, u0_lo_norm, u0_me_norm, EstimateSample};
use crate::error::{Error, Result};
use crate::field::{to_time_samples, HarmonicField};
use crate::harmonic::{solve_linearized, LinearizedOptions};
use crate::model::{BcKind, BoundaryCondition, Grid, Model, Nonlinearity, PhysicalParams};
use crate::nonlinear::{fixed_point_solve, FixedPointOptions, SolveReport};
use crate::oracle::{time_stepping_oracle, OracleOptions};

/// Unit interval, `T = 2π`, `b = c² = 1`, `τ̄ = max(0.5, τ)`, Dirichlet ends, no nonlinearity.
pub fn example_model(nx: usize, tau: f64, harmonics: usize) -> Result<Model> {
    let grid = Grid::new(1.0, nx)?;
    let params = PhysicalParams::uniform(nx, tau, tau.max(0.5), 1.0, 1.0, 0.0, 0.0, 2.0 * PI);
    let d = BoundaryCondition::dirichlet();
    Model::new(grid, params, d, d, harmonics)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StudyKind {
    Convergence,
    TauSweep,
    Taylor,
    OracleCompare,
}

/// Rows of one study plus free-form metadata (grids, tolerances, timings, seeds).
#[derive(Debug, Clone, Serialize)]
pub struct StudyResult<R> {
    pub kind: StudyKind,
    pub rows: Vec<R>,
    pub metadata: BTreeMap<String, String>,
}

impl<R> StudyResult<R> {
    fn new(kind: StudyKind) -> Self {
        Self { kind, rows: Vec::new(), metadata: BTreeMap::new() }
    }

    fn note(&mut self, key: &str, value: impl ToString) {
        self.metadata.insert(key.to_string(), value.to_string());
    }
}

pub const CASES: [&str; 4] = ["linear-dirichlet", "linear-impedance", "westervelt-dirichlet", "kuznetsov-dirichlet"];

/// Exact solution `u* = A cos(ωt) φ(x)` and the forcing that produces it.
#[derive(Debug, Clone)]
pub struct ManufacturedCase {
    pub id: String,
    pub kind: Nonlinearity,
    pub u_star: HarmonicField,
    pub f: HarmonicField,
}

/// Wavenumber `k ∈ (π/2L, π/L)` with `tan(kL) = −k/γ`, so `φ = sin(kx)` meets
/// `φ(0) = 0` and `φ'(L) + γφ(L) = 0`.
pub fn impedance_wavenumber(length: f64, gamma: f64) -> f64 {
    let g = |k: f64| gamma * (k * length).sin() + k * (k * length).cos();
    let (mut lo, mut hi) = (0.5 * PI / length, PI / length);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(lo) * g(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Builds a catalog case on the grid and boundary conditions of `model`.
pub fn manufactured_case(case_id: &str, model: &Model, amplitude: f64) -> Result<ManufacturedCase> {
    let (kind, left_ok, right_ok) = match case_id {
        "linear-dirichlet" => (Nonlinearity::Linear, BcKind::Dirichlet, BcKind::Dirichlet),
        "linear-impedance" => (Nonlinearity::Linear, BcKind::Dirichlet, BcKind::Impedance),
        "westervelt-dirichlet" => (Nonlinearity::Westervelt, BcKind::Dirichlet, BcKind::Dirichlet),
        "kuznetsov-dirichlet" => (Nonlinearity::Kuznetsov, BcKind::Dirichlet, BcKind::Dirichlet),
        other => return Err(Error::UnknownCase(other.to_string())),
    };
    if model.left().kind != left_ok || model.right().kind != right_ok {
        return Err(Error::InvalidArgument(format!(
            "case {case_id} needs ({left_ok}, {right_ok}) boundaries, model has ({}, {})",
            model.left().kind,
            model.right().kind
        )));
    }
    if kind != Nonlinearity::Linear && model.harmonics() < 2 {
        return Err(Error::InvalidArgument(format!("case {case_id} needs at least 2 harmonics")));
    }
    let g = model.grid();
    let length = g.length();
    let k = if right_ok == BcKind::Impedance {
        impedance_wavenumber(length, model.right().gamma)
    } else {
        PI / length
    };
    let phi = g.sample(|x| (k * x).sin());
    let dphi = g.sample(|x| k * (k * x).cos());
    let (w, a) = (model.omega(), amplitude);
    let p = model.params();
    let nx = g.nx();
    let harmonics = model.harmonics();

    let mut u_star = HarmonicField::zeros(harmonics, nx);
    let mut f = HarmonicField::zeros(harmonics, nx);
    for j in 0..nx {
        let half = 0.5 * a * phi[j];
        u_star.coeff_mut(1)[j] = C64::new(half, 0.0);
        let symbol = C64::new(-w * w, -p.tau * w * w * w) + C64::new(p.c2[j], w * p.b[j]) * (k * k);
        f.coeff_mut(1)[j] = -symbol * half;
        match kind {
            Nonlinearity::Linear => {}
            Nonlinearity::Westervelt => {
                f.coeff_mut(2)[j] = C64::new(p.eta[j] * a * a * w * w * phi[j] * phi[j], 0.0);
            }
            Nonlinearity::Kuznetsov => {
                let n2 = C64::new(0.0, -0.5 * w * a * a) * (p.eta_tilde[j] * w * w * phi[j] * phi[j] - dphi[j] * dphi[j]);
                f.coeff_mut(2)[j] = -n2;
            }
        }
    }
    Ok(ManufacturedCase { id: case_id.to_string(), kind, u_star, f })
}

/// Solves `Du + N(u) + f = 0`; linear models take a single direct solve.
pub fn solve_state(f: &HarmonicField, model: &Model, kind: Nonlinearity, opts: &FixedPointOptions) -> Result<SolveReport> {
    fixed_point_solve(f, model, kind, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub nx: usize,
    pub h: f64,
    /// `‖u_h − u*‖_{L²(0,T;L²)}`
    pub err_l2: f64,
    /// `‖u_h − u*‖_{L²(0,T;H¹)}`
    pub err_h1: f64,
    pub order_l2: Option<f64>,
    pub order_h1: Option<f64>,
    pub config_hash: String,
}

/// Orders within `[1.8, 2.2]` for every consecutive refinement.
pub fn convergence_passed(study: &StudyResult<ConvergenceRow>) -> bool {
    let orders: Vec<f64> = study.rows.iter().filter_map(|r| r.order_l2).collect();
    !orders.is_empty() && orders.iter().all(|o| (1.8..=2.2).contains(o))
}

pub fn convergence_study(
    case_id: &str,
    model: &Model,
    grids: &[usize],
    amplitude: f64,
    opts: &FixedPointOptions,
) -> Result<StudyResult<ConvergenceRow>> {
    if grids.len() < 3 {
        return Err(Error::InvalidArgument(format!("convergence needs at least 3 grids, got {}", grids.len())));
    }
    if grids.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("grids must be strictly increasing".into()));
    }
    let mut out = StudyResult::new(StudyKind::Convergence);
    out.note("case", case_id);
    out.note("amplitude", format!("{amplitude:e}"));
    out.note("grids", format!("{grids:?}"));
    out.note("tol", format!("{:e}", opts.tol));
    for &nx in grids {
        let m = model.regrid(nx)?;
        let case = manufactured_case(case_id, &m, amplitude)?;
        let u = solve_state(&case.f, &m, case.kind, opts)?.u;
        let e = u.sub(&case.u_star);
        out.rows.push(ConvergenceRow {
            nx,
            h: m.grid().h(),
            err_l2: time_l2_sq(&e, &m, 0).sqrt(),
            err_h1: time_h1_sq(&e, &m, 0).sqrt(),
            order_l2: None,
            order_h1: None,
            config_hash: m.config_hash(),
        });
    }
    for i in 1..out.rows.len() {
        let (a, b) = (&out.rows[i - 1], &out.rows[i]);
        let lh = (a.h / b.h).ln();
        let order_l2 = (a.err_l2 / b.err_l2).ln() / lh;
        let order_h1 = (a.err_h1 / b.err_h1).ln() / lh;
        out.rows[i].order_l2 = order_l2.is_finite().then_some(order_l2);
        out.rows[i].order_h1 = order_h1.is_finite().then_some(order_h1);
    }
    out.note("passed", convergence_passed(&out));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauSweepRow {
    pub tau: f64,
    /// `‖u^τ − u⁰‖` in the discrete `U⁰_lo` norm.
    pub d_lo: f64,
    /// Same in `U⁰_me`.
    pub d_me: f64,
    /// `log(d(τ_prev)/d(τ)) / log(τ_prev/τ)`, i.e. `log₂(d(2τ)/d(τ))` for halving sweeps.
    pub rate: Option<f64>,
    /// `E_lo(u^τ) / (τ̄‖r̃‖²_{L²(L²)} + ‖r̃‖²_{L²(H¹*)})`.
    pub e_lo_ratio: Option<f64>,
    pub config_hash: String,
}

/// Solves for each `τ` and for `τ = 0`, measuring the distance to the limit.
pub fn tau_sweep(
    f: &HarmonicField,
    model: &Model,
    taus: &[f64],
    kind: Nonlinearity,
    opts: &FixedPointOptions,
) -> Result<StudyResult<TauSweepRow>> {
    if taus.is_empty() || taus.windows(2).any(|w| w[1] >= w[0]) || taus.iter().any(|t| *t < 0.0) {
        return Err(Error::InvalidArgument("taus must be nonnegative and strictly decreasing".into()));
    }
    let mut out = StudyResult::new(StudyKind::TauSweep);
    out.note("kind", format!("{kind:?}"));
    out.note("taus", format!("{taus:?}"));
    out.note("taubar", model.params().taubar);
    out.note("tol", format!("{:e}", opts.tol));

    let reference_model = model.with_tau(0.0)?;
    let reference = solve_state(f, &reference_model, kind, opts)?.u;
    let mut samples = Vec::with_capacity(taus.len());
    let mut rows = Vec::with_capacity(taus.len());
    for &tau in taus {
        let m = model.with_tau(tau)?;
        let report = solve_state(f, &m, kind, opts)?;
        let (u, time_part) = (report.u, report.source_time_part);
        let diff = u.sub(&reference);
        rows.push(TauSweepRow {
            tau,
            d_lo: u0_lo_norm(&diff, model),
            d_me: u0_me_norm(&diff, model),
            rate: None,
            e_lo_ratio: None,
            config_hash: m.config_hash(),
        });
        samples.push(EstimateSample { tau, u, source_gradient_part: f.clone(), source_time_part: time_part });
    }
    let table = estimate_ratio_report(model, &samples)?;
    for (row, ratio) in rows.iter_mut().zip(&table.rows) {
        row.e_lo_ratio = ratio.lo;
    }
    for i in 1..rows.len() {
        let (prev, cur) = (&rows[i - 1], &rows[i]);
        let rate = (prev.d_lo / cur.d_lo).ln() / (prev.tau / cur.tau).ln();
        rows[i].rate = (cur.tau > 0.0 && rate.is_finite()).then_some(rate);
    }
    if let Some(s) = table.lo_spread {
        out.note("e_lo_ratio_spread", format!("{s:.16e}"));
    }
    out.rows = rows;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaylorRow {
    /// Perturbation size relative to `‖f‖`.
    pub eps: f64,
    /// `‖S(f + εf̲) − S(f) − εS'(f)f̲‖` in the `U⁰_lo` norm.
    pub remainder: f64,
    /// Log-log slope against the previous row.
    pub slope: Option<f64>,
    /// `‖S(f + εf̲) − S(f)‖`.
    pub first_order: f64,
    pub first_order_slope: Option<f64>,
    pub config_hash: String,
}

fn coefficient_norm(v: &HarmonicField) -> f64 {
    v.iter()
        .map(|(m, c)| if m == 0 { 1.0 } else { 2.0 } * c.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// Least-squares slope of `log y` against `log x` over the positive pairs.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Compares finite differences of the source-to-state map with the linearized solve.
pub fn taylor_test(
    f: &HarmonicField,
    f_dir: &HarmonicField,
    model: &Model,
    kind: Nonlinearity,
    eps: &[f64],
    opts: &FixedPointOptions,
) -> Result<StudyResult<TaylorRow>> {
    if eps.len() < 3 || eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidArgument("taylor test needs at least 3 positive eps values".into()));
    }
    let mut out = StudyResult::new(StudyKind::Taylor);
    out.note("kind", format!("{kind:?}"));
    out.note("eps", format!("{eps:?}"));
    out.note("tol", format!("{:e}", opts.tol));
    let hash = model.config_hash();

    let base = solve_state(f, model, kind, opts)?;
    let dir_norm = coefficient_norm(f_dir);
    let f_norm = coefficient_norm(f);
    if dir_norm == 0.0 {
        out.rows = eps
            .iter()
            .map(|&e| TaylorRow {
                eps: e,
                remainder: 0.0,
                slope: None,
                first_order: 0.0,
                first_order_slope: None,
                config_hash: hash.clone(),
            })
            .collect();
        return Ok(out);
    }
    let scale = if f_norm > 0.0 { f_norm / dir_norm } else { 1.0 / dir_norm };
    out.note("direction_scale", format!("{scale:.16e}"));
    let derivative = solve_linearized(&base.u, f_dir, model, kind, LinearizedOptions::default())?;
    out.note("linearized_method", format!("{:?}", derivative.method));
    out.note("linearized_iterations", derivative.iterations);

    for &e in eps {
        let delta = e * scale;
        let perturbed = solve_state(&f.axpy(delta, f_dir), model, kind, opts)
            .map_err(|source| Error::ContractionLost { eps: e, source: Box::new(source) })?;
        let change = perturbed.u.sub(&base.u);
        let remainder = u0_lo_norm(&change.axpy(-delta, &derivative.u), model);
        out.rows.push(TaylorRow {
            eps: e,
            remainder,
            slope: None,
            first_order: u0_lo_norm(&change, model),
            first_order_slope: None,
            config_hash: hash.clone(),
        });
    }
    for i in 1..out.rows.len() {
        let (a, b) = (&out.rows[i - 1], &out.rows[i]);
        let le = (a.eps / b.eps).ln();
        let s = (a.remainder / b.remainder).ln() / le;
        let s1 = (a.first_order / b.first_order).ln() / le;
        out.rows[i].slope = s.is_finite().then_some(s);
        out.rows[i].first_order_slope = s1.is_finite().then_some(s1);
    }
    let xs: Vec<f64> = out.rows.iter().map(|r| r.eps).collect();
    let rs: Vec<f64> = out.rows.iter().map(|r| r.remainder).collect();
    let fs: Vec<f64> = out.rows.iter().map(|r| r.first_order).collect();
    if let Some(s) = loglog_slope(&xs, &rs) {
        out.note("remainder_slope", format!("{s:.16e}"));
    }
    if let Some(s) = loglog_slope(&xs, &fs) {
        out.note("first_order_slope", format!("{s:.16e}"));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub metric: String,
    pub value: f64,
}

/// Relative `L²(0,T;L²)` distance between a harmonic field and time samples of one period.
pub fn relative_l2_discrepancy(u: &HarmonicField, samples: &crate::field::TimeField, model: &Model) -> Result<f64> {
    let reference = to_time_samples(u, samples.nt())?;
    let w = model.grid().weights();
    let (mut num, mut den) = (0.0, 0.0);
    for (a, b) in reference.values().iter().zip(samples.values()) {
        for ((x, y), q) in a.iter().zip(b).zip(&w) {
            num += q * (x - y) * (x - y);
            den += q * x * x;
        }
    }
    Ok(if den > 0.0 { (num / den).sqrt() } else { num.sqrt() })
}

/// Harmonic balance against the time-stepping oracle on the same forcing.
pub fn oracle_compare(
    f: &HarmonicField,
    model: &Model,
    kind: Nonlinearity,
    fp: &FixedPointOptions,
    opts: &OracleOptions,
) -> Result<StudyResult<OracleRow>> {
    let mut out = StudyResult::new(StudyKind::OracleCompare);
    let hb = solve_state(f, model, kind, fp)?;
    let oracle = time_stepping_oracle(f, model, kind, opts)?;
    out.note("scheme", oracle.scheme);
    out.note("steps_per_period", opts.steps_per_period);
    out.note("period_tol", format!("{:e}", opts.period_tol));
    out.note("config_hash", model.config_hash());
    let mut push = |metric: &str, value: f64| out.rows.push(OracleRow { metric: metric.to_string(), value });
    push("l2_discrepancy", relative_l2_discrepancy(&hb.u, &oracle.samples, model)?);
    push("periodicity_gap", oracle.gap);
    push("periods", oracle.periods as f64);
    if model.harmonics() >= 2 {
        let a = crate::spatial::l2_sq(model.grid(), hb.u.coeff(2)).sqrt();
        let d: Vec<C64> = hb.u.coeff(2).iter().zip(oracle.harmonics.coeff(2)).map(|(x, y)| x - y).collect();
        let diff = crate::spatial::l2_sq(model.grid(), &d).sqrt();
        push("second_harmonic_rel", if a > 0.0 { diff / a } else { diff });
    }
    push("hb_iterations", hb.iterations as f64);
    Ok(out)
}
