//! Pseudospectral nonlinearities, the Picard fixed-point map and `α` monitoring.
//!
//! Quadratic products are formed on `N_t = dealiased_samples(M)` time samples,
//! where truncation back to order `M` is exact. The fixed point lags the
//! whole nonlinearity into the source, so every iteration is one linear
//! solve with `α = 1`:
//!
//! ```text
//! u^{k+1} = θ·S_lin(f + N(u^k)) + (1 − θ)·u^k,   u^0 = 0.
//! ```

use serde::Serialize;

use crate::diagnostics::u0_lo_norm;
use crate::error::{Error, Result};
use crate::field::{dealiased_samples, to_harmonics, to_time_samples, HarmonicField, TimeField};
use crate::harmonic::LinearMgtSolver;
use crate::model::{Model, Nonlinearity};
use crate::spatial::gradient;

fn check_shape(u: &HarmonicField, model: &Model) -> Result<()> {
    if u.harmonics() != model.harmonics() || u.nx() != model.grid().nx() {
        return Err(Error::ShapeMismatch(format!(
            "field has order {} on {} nodes, model has order {} on {} nodes",
            u.harmonics(),
            u.nx(),
            model.harmonics(),
            model.grid().nx()
        )));
    }
    Ok(())
}

fn spatial_gradient(u: &HarmonicField, model: &Model) -> HarmonicField {
    u.map_spatial(|c| gradient(model.grid(), c))
}

/// Nodewise product of time samples weighted by a nodal coefficient.
fn weighted_product(a: &TimeField, b: &TimeField, weight: &[f64]) -> TimeField {
    let rows = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(ra, rb)| ra.iter().zip(rb).zip(weight).map(|((x, y), w)| w * x * y).collect())
        .collect();
    TimeField::new(rows).expect("shapes agree")
}

fn add_samples(a: &TimeField, b: &TimeField) -> TimeField {
    a.zip_map(b, |x, y| x + y)
}

/// `N(u)`: Westervelt `η(u²)_tt`, Kuznetsov `(η̃u_t² + |∇u|²)_t`, zero for linear models.
pub fn eval_nonlinearity(u: &HarmonicField, kind: Nonlinearity, model: &Model) -> Result<HarmonicField> {
    check_shape(u, model)?;
    let m = model.harmonics();
    let nt = dealiased_samples(m);
    let omega = model.omega();
    let p = model.params();
    match kind {
        Nonlinearity::Linear => Ok(HarmonicField::zeros(m, u.nx())),
        Nonlinearity::Westervelt => {
            let s = to_time_samples(u, nt)?;
            let sq = weighted_product(&s, &s, &p.eta);
            Ok(to_harmonics(&sq, m)?.time_derivative(omega, 2))
        }
        Nonlinearity::Kuznetsov => {
            let ut = to_time_samples(&u.time_derivative(omega, 1), nt)?;
            let gu = to_time_samples(&spatial_gradient(u, model), nt)?;
            let ones = vec![1.0; u.nx()];
            let q = add_samples(&weighted_product(&ut, &ut, &p.eta_tilde), &weighted_product(&gu, &gu, &ones));
            Ok(to_harmonics(&q, m)?.time_derivative(omega, 1))
        }
    }
}

/// Directional derivative `N'(u)[v]` of the nonlinearity.
pub fn linearized_coupling(
    u: &HarmonicField,
    v: &HarmonicField,
    model: &Model,
    kind: Nonlinearity,
) -> Result<HarmonicField> {
    check_shape(u, model)?;
    check_shape(v, model)?;
    let m = model.harmonics();
    let nt = dealiased_samples(m);
    let omega = model.omega();
    let p = model.params();
    match kind {
        Nonlinearity::Linear => Ok(HarmonicField::zeros(m, u.nx())),
        Nonlinearity::Westervelt => {
            let two_eta: Vec<f64> = p.eta.iter().map(|e| 2.0 * e).collect();
            let prod = weighted_product(&to_time_samples(u, nt)?, &to_time_samples(v, nt)?, &two_eta);
            Ok(to_harmonics(&prod, m)?.time_derivative(omega, 2))
        }
        Nonlinearity::Kuznetsov => {
            let two_eta: Vec<f64> = p.eta_tilde.iter().map(|e| 2.0 * e).collect();
            let twos = vec![2.0; u.nx()];
            let ut = to_time_samples(&u.time_derivative(omega, 1), nt)?;
            let vt = to_time_samples(&v.time_derivative(omega, 1), nt)?;
            let gu = to_time_samples(&spatial_gradient(u, model), nt)?;
            let gv = to_time_samples(&spatial_gradient(v, model), nt)?;
            let q = add_samples(&weighted_product(&ut, &vt, &two_eta), &weighted_product(&gu, &gv, &twos));
            Ok(to_harmonics(&q, m)?.time_derivative(omega, 1))
        }
    }
}

/// `α` on `nt` time samples: `1 + 2ηu` (Westervelt), `1 + 2η̃u_t` (Kuznetsov), `1` otherwise.
pub fn alpha_samples(u: &HarmonicField, kind: Nonlinearity, model: &Model, nt: usize) -> Result<TimeField> {
    let p = model.params();
    match kind {
        Nonlinearity::Linear => Ok(TimeField::new(vec![vec![1.0; u.nx()]; nt])?),
        Nonlinearity::Westervelt => Ok(to_time_samples(u, nt)?.map(|j, x| 1.0 + 2.0 * p.eta[j] * x)),
        Nonlinearity::Kuznetsov => {
            let ut = to_time_samples(&u.time_derivative(model.omega(), 1), nt)?;
            Ok(ut.map(|j, x| 1.0 + 2.0 * p.eta_tilde[j] * x))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegeneracyReport {
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// `min (b/c² − τ̄/α)` over samples and nodes; `−∞` once `α ≤ 0`.
    pub stability_margin_min: f64,
}

/// Extrema of `α` and the a-posteriori stability margin on the dealiased time grid.
pub fn degeneracy_monitor(u: &HarmonicField, model: &Model, kind: Nonlinearity) -> Result<DegeneracyReport> {
    degeneracy_monitor_sampled(u, model, kind, dealiased_samples(model.harmonics()))
}

/// [`degeneracy_monitor`] on a caller-chosen number of time samples.
pub fn degeneracy_monitor_sampled(
    u: &HarmonicField,
    model: &Model,
    kind: Nonlinearity,
    nt: usize,
) -> Result<DegeneracyReport> {
    check_shape(u, model)?;
    let alpha = alpha_samples(u, kind, model, nt)?;
    let p = model.params();
    let mut out = DegeneracyReport {
        alpha_min: f64::INFINITY,
        alpha_max: f64::NEG_INFINITY,
        stability_margin_min: f64::INFINITY,
    };
    for row in alpha.values() {
        for (j, &a) in row.iter().enumerate() {
            out.alpha_min = out.alpha_min.min(a);
            out.alpha_max = out.alpha_max.max(a);
            let margin = if a > 0.0 { p.b[j] / p.c2[j] - p.taubar / a } else { f64::NEG_INFINITY };
            out.stability_margin_min = out.stability_margin_min.min(margin);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPointOptions {
    /// Stop when the relative update drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// `θ ∈ (0, 1]`.
    pub relaxation: f64,
    /// Smallest admissible `α` at the converged state.
    pub degeneracy_floor: f64,
    /// Abort once an iterate leaves this ball in the update norm.
    pub ball_radius: Option<f64>,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { tol: 1e-11, max_iter: 100, relaxation: 1.0, degeneracy_floor: 0.1, ball_radius: None }
    }
}

impl FixedPointOptions {
    fn check(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 || !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "need tol > 0, max_iter >= 1, 0 < relaxation <= 1; got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Ratios at or above one for this many consecutive iterations abort the solve.
const NON_CONTRACTING_STREAK: usize = 5;

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub u: HarmonicField,
    pub iterations: usize,
    /// Relative update per iteration.
    pub update_norms: Vec<f64>,
    /// `‖u^{k+1} − u^k‖ / ‖u^k − u^{k−1}‖`, one fewer entry than iterations.
    pub contraction_ratios: Vec<f64>,
    /// `‖Du + N(u) + f‖ / ‖f‖` on the unknowns.
    pub final_residual: f64,
    /// Minimum of `α` over samples and nodes.
    pub degeneracy_margin: f64,
    pub alpha_max: f64,
    pub stability_margin: f64,
    /// Gradient-type part of the source, `r̃^∇ = f`.
    pub source_gradient_part: HarmonicField,
    /// Time-derivative part of the source, `r̃^t = N(u)`.
    pub source_time_part: HarmonicField,
}

impl SolveReport {
    /// `r̃ = f + N(u)`.
    pub fn rtilde(&self) -> HarmonicField {
        self.source_gradient_part.add(&self.source_time_part)
    }
}

fn coefficient_norm(v: &HarmonicField, dofs: &[usize]) -> f64 {
    v.iter()
        .map(|(m, c)| {
            let w = if m == 0 { 1.0 } else { 2.0 };
            w * dofs.iter().map(|&j| c[j].norm_sqr()).sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

/// `‖Du + N(u) + f‖ / ‖f‖` over the unknowns (absolute when `f = 0`).
pub fn pde_residual(u: &HarmonicField, f: &HarmonicField, model: &Model, kind: Nonlinearity) -> Result<f64> {
    let solver = LinearMgtSolver::new(model)?;
    pde_residual_with(&solver, u, f, kind)
}

fn pde_residual_with(solver: &LinearMgtSolver, u: &HarmonicField, f: &HarmonicField, kind: Nonlinearity) -> Result<f64> {
    let model = solver.model();
    let r = solver.apply(u)?.add(&eval_nonlinearity(u, kind, model)?).add(f);
    let dofs = model.dofs();
    let fnorm = coefficient_norm(f, &dofs);
    let rnorm = coefficient_norm(&r, &dofs);
    Ok(if fnorm > 0.0 { rnorm / fnorm } else { rnorm })
}

/// Picard iteration from `u⁰ = 0`.
pub fn fixed_point_solve(
    f: &HarmonicField,
    model: &Model,
    kind: Nonlinearity,
    opts: &FixedPointOptions,
) -> Result<SolveReport> {
    fixed_point_solve_from(f, model, kind, opts, None)
}

/// Picard iteration from a given initial iterate.
pub fn fixed_point_solve_from(
    f: &HarmonicField,
    model: &Model,
    kind: Nonlinearity,
    opts: &FixedPointOptions,
    initial: Option<&HarmonicField>,
) -> Result<SolveReport> {
    opts.check()?;
    check_shape(f, model)?;
    let solver = LinearMgtSolver::new(model)?;
    let mut u = match initial {
        Some(u0) => {
            check_shape(u0, model)?;
            u0.clone()
        }
        None => HarmonicField::zeros(model.harmonics(), model.grid().nx()),
    };

    let mut update_norms = Vec::new();
    let mut contraction_ratios = Vec::new();
    let mut previous_step: Option<f64> = None;
    let mut streak = 0;
    let mut converged = false;

    for k in 1..=opts.max_iter {
        let n = eval_nonlinearity(&u, kind, model)?;
        let t = solver.solve(&f.add(&n))?;
        let next = t.scaled(opts.relaxation).axpy(1.0 - opts.relaxation, &u);
        let step = u0_lo_norm(&next.sub(&u), model);
        let size = u0_lo_norm(&next, model);
        let relative = if size > 0.0 { step / size } else { step };
        update_norms.push(relative);

        if !step.is_finite() || !size.is_finite() {
            return Err(Error::NonContraction {
                iterations: k,
                last_ratio: f64::INFINITY,
                update_norms,
            });
        }
        if let Some(prev) = previous_step {
            let ratio = if prev > 0.0 { step / prev } else if step == 0.0 { 0.0 } else { f64::INFINITY };
            contraction_ratios.push(ratio);
            streak = if ratio >= 1.0 { streak + 1 } else { 0 };
            if streak >= NON_CONTRACTING_STREAK {
                return Err(Error::NonContraction { iterations: k, last_ratio: ratio, update_norms });
            }
        }
        if let Some(radius) = opts.ball_radius {
            if size > radius {
                let last_ratio = contraction_ratios.last().copied().unwrap_or(f64::NAN);
                return Err(Error::NonContraction { iterations: k, last_ratio, update_norms });
            }
        }
        previous_step = Some(step);
        u = next;
        if relative < opts.tol || step == 0.0 {
            converged = true;
            break;
        }
    }

    let iterations = update_norms.len();
    if !converged {
        return Err(Error::MaxIterExceeded { iterations, last_update: *update_norms.last().unwrap_or(&f64::NAN) });
    }

    let degeneracy = degeneracy_monitor(&u, model, kind)?;
    if degeneracy.alpha_min < opts.degeneracy_floor {
        return Err(Error::DegeneracyDetected { alpha_min: degeneracy.alpha_min, floor: opts.degeneracy_floor });
    }
    let final_residual = pde_residual_with(&solver, &u, f, kind)?;
    let source_time_part = eval_nonlinearity(&u, kind, model)?;
    Ok(SolveReport {
        iterations,
        update_norms,
        contraction_ratios,
        final_residual,
        degeneracy_margin: degeneracy.alpha_min,
        alpha_max: degeneracy.alpha_max,
        stability_margin: degeneracy.stability_margin_min,
        source_gradient_part: f.clone(),
        source_time_part,
        u,
    })
}
