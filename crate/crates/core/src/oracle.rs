//! Independent time-domain reference: integrate the initial-value problem
//! from rest until it settles on a periodic orbit.
//!
//! The state `y = (u, v, w) = (u, u_t, u_tt)` obeys
//!
//! ```text
//! u_t = v,  v_t = w,  τw_t = −αw − b(Kv + Bw) − c²(Ku + Bv) − r,
//! ```
//!
//! where `K + B∂_t` is `−Δ_h` with the Robin rows split into the `γ` part
//! (`K`) and the `β` part (`B = 2β/h` on boundary rows). One implicit
//! midpoint step eliminates `ū`, `v̄` in favour of the stage value `w̄`,
//! leaving a tridiagonal solve; with `τ = 0` the same formula is the
//! algebraic constraint for `w` and only `(u, v)` are propagated.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::field::{dealiased_samples, to_harmonics, HarmonicField, TimeField};
use crate::model::{Model, Nonlinearity};
use crate::spatial::{absorbing_diagonal, assemble_laplacian, gradient_real};
use crate::tridiag::Tridiagonal;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub steps_per_period: usize,
    pub max_periods: usize,
    pub period_tol: f64,
    /// Samples per period in the returned trajectory; must divide `steps_per_period`.
    pub output_samples: Option<usize>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { steps_per_period: 512, max_periods: 400, period_tol: 1e-8, output_samples: None }
    }
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    /// Last period, `nt` uniform samples starting at a multiple of `T`.
    pub samples: TimeField,
    pub harmonics: HarmonicField,
    /// Relative state change over the last period.
    pub gap: f64,
    pub periods: usize,
    pub scheme: &'static str,
}

const STAGE_TOL: f64 = 1e-13;
const STAGE_MAX_ITER: usize = 100;

struct Stepper<'a> {
    model: &'a Model,
    kind: Nonlinearity,
    dofs: Vec<usize>,
    stiffness: Tridiagonal,
    damping: Vec<f64>,
    b: Vec<f64>,
    c2: Vec<f64>,
    delta: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl<'a> Stepper<'a> {
    fn new(model: &'a Model, kind: Nonlinearity, dt: f64) -> Self {
        let lap = assemble_laplacian(model.grid(), model.left(), model.right(), 0, 0.0);
        let damping = absorbing_diagonal(model.grid(), model.left(), model.right(), &lap);
        let p = model.params();
        let b = lap.dofs.iter().map(|&j| p.b[j]).collect();
        let c2 = lap.dofs.iter().map(|&j| p.c2[j]).collect();
        Self { model, kind, stiffness: lap.matrix, dofs: lap.dofs, damping, b, c2, delta: 0.5 * dt }
    }

    fn full(&self, reduced: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.model.grid().nx()];
        for (&j, x) in self.dofs.iter().zip(reduced) {
            out[j] = *x;
        }
        out
    }

    /// `α` and the lagged source at the stage, on the unknowns.
    fn coefficients(&self, u_bar: &[f64], v_bar: &[f64], forcing: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = self.model.params();
        let n = self.dofs.len();
        match self.kind {
            Nonlinearity::Linear => (vec![1.0; n], forcing.to_vec()),
            Nonlinearity::Westervelt => {
                let alpha = self.dofs.iter().zip(u_bar).map(|(&j, u)| 1.0 + 2.0 * p.eta[j] * u).collect();
                let r = self
                    .dofs
                    .iter()
                    .zip(v_bar)
                    .zip(forcing)
                    .map(|((&j, v), f)| 2.0 * p.eta[j] * v * v + f)
                    .collect();
                (alpha, r)
            }
            Nonlinearity::Kuznetsov => {
                let alpha = self.dofs.iter().zip(v_bar).map(|(&j, v)| 1.0 + 2.0 * p.eta_tilde[j] * v).collect();
                let g = self.model.grid();
                let gu = gradient_real(g, &self.full(u_bar));
                let gv = gradient_real(g, &self.full(v_bar));
                let r = self.dofs.iter().zip(forcing).map(|(&j, f)| 2.0 * gu[j] * gv[j] + f).collect();
                (alpha, r)
            }
        }
    }

    /// Solves for the stage value `w̄` given `α` and `r̄`.
    fn stage(&self, u: &[f64], v: &[f64], w: &[f64], alpha: &[f64], r: &[f64]) -> Option<Vec<f64>> {
        let d = self.delta;
        let tau = self.model.params().tau;
        let n = self.dofs.len();
        let k_scale: Vec<C64> = (0..n).map(|i| C64::new(d * d * self.b[i] + d * d * d * self.c2[i], 0.0)).collect();
        let diag: Vec<C64> = (0..n)
            .map(|i| C64::new(tau + d * alpha[i] + (d * self.b[i] + d * d * self.c2[i]) * self.damping[i], 0.0))
            .collect();
        let a = self.stiffness.scale_rows(&k_scale).shifted(&diag);
        let u_pred: Vec<f64> = (0..n).map(|i| u[i] + d * v[i]).collect();
        let ku = self.stiffness.apply_real(&u_pred);
        let kv = self.stiffness.apply_real(v);
        let rhs: Vec<f64> = (0..n)
            .map(|i| {
                tau * w[i]
                    - d * self.b[i] * kv[i]
                    - d * self.c2[i] * ku[i]
                    - d * self.c2[i] * self.damping[i] * v[i]
                    - d * r[i]
            })
            .collect();
        let lu = a.factor()?;
        let x = lu.solve_real(&rhs);
        x.iter().all(|z| z.is_finite()).then_some(x)
    }

    /// One step; returns `(u, v, w)` at the new time level.
    fn step(&self, step: usize, u: &[f64], v: &[f64], w: &[f64], forcing: &[f64]) -> Result<[Vec<f64>; 3]> {
        let d = self.delta;
        let n = self.dofs.len();
        let bars = |wb: &[f64]| -> (Vec<f64>, Vec<f64>) {
            let vb: Vec<f64> = (0..n).map(|i| v[i] + d * wb[i]).collect();
            let ub: Vec<f64> = (0..n).map(|i| u[i] + d * v[i] + d * d * wb[i]).collect();
            (ub, vb)
        };
        let mut w_bar = w.to_vec();
        let linear = self.kind == Nonlinearity::Linear;
        let mut iterations = 0;
        loop {
            iterations += 1;
            let (ub, vb) = bars(&w_bar);
            let (alpha, r) = self.coefficients(&ub, &vb, forcing);
            let next = self.stage(u, v, w, &alpha, &r).ok_or(Error::StepRejected { step, iterations })?;
            let change: Vec<f64> = next.iter().zip(&w_bar).map(|(a, b)| a - b).collect();
            let scale = norm(&next);
            w_bar = next;
            if linear || norm(&change) <= STAGE_TOL * scale.max(f64::MIN_POSITIVE) {
                break;
            }
            if iterations >= STAGE_MAX_ITER {
                return Err(Error::StepRejected { step, iterations });
            }
        }
        let (ub, vb) = bars(&w_bar);
        let un = ub.iter().zip(u).map(|(a, b)| 2.0 * a - b).collect();
        let vn = vb.iter().zip(v).map(|(a, b)| 2.0 * a - b).collect();
        let wn = if self.model.params().tau > 0.0 {
            w_bar.iter().zip(w).map(|(a, b)| 2.0 * a - b).collect()
        } else {
            w_bar
        };
        Ok([un, vn, wn])
    }
}

/// Integrates from rest until the state repeats over one period to `period_tol`.
pub fn time_stepping_oracle(
    f: &HarmonicField,
    model: &Model,
    kind: Nonlinearity,
    opts: &OracleOptions,
) -> Result<OracleResult> {
    if f.nx() != model.grid().nx() || f.harmonics() != model.harmonics() {
        return Err(Error::ShapeMismatch("forcing does not match the model".into()));
    }
    let nt_out = opts.output_samples.unwrap_or_else(|| dealiased_samples(model.harmonics()));
    if opts.steps_per_period == 0 || nt_out == 0 || opts.steps_per_period % nt_out != 0 {
        return Err(Error::InvalidArgument(format!(
            "steps_per_period = {} must be a positive multiple of {nt_out} output samples",
            opts.steps_per_period
        )));
    }
    let period = model.period();
    let omega = model.omega();
    let dt = period / opts.steps_per_period as f64;
    let stepper = Stepper::new(model, kind, dt);
    let n = stepper.dofs.len();
    let carry_w = model.params().tau > 0.0;
    let (mut u, mut v, mut w) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let stride = opts.steps_per_period / nt_out;
    let state = |u: &[f64], v: &[f64], w: &[f64]| -> Vec<f64> {
        let mut s = [u, v].concat();
        if carry_w {
            s.extend_from_slice(w);
        }
        s
    };
    let mut previous = state(&u, &v, &w);
    let mut gap = f64::INFINITY;
    let mut step_index = 0;

    for period_index in 1..=opts.max_periods {
        let mut samples = Vec::with_capacity(nt_out);
        for k in 0..opts.steps_per_period {
            if k % stride == 0 {
                samples.push(stepper.full(&u));
            }
            let t_mid = (k as f64 + 0.5) * dt;
            let forcing_full = f.evaluate(omega, t_mid);
            let forcing: Vec<f64> = stepper.dofs.iter().map(|&j| forcing_full[j]).collect();
            let [un, vn, wn] = stepper.step(step_index, &u, &v, &w, &forcing)?;
            step_index += 1;
            (u, v, w) = (un, vn, wn);
        }
        let current = state(&u, &v, &w);
        if current.iter().any(|x| !x.is_finite()) {
            return Err(Error::StepRejected { step: step_index, iterations: 0 });
        }
        let diff: Vec<f64> = current.iter().zip(&previous).map(|(a, b)| a - b).collect();
        let (dn, cn) = (norm(&diff), norm(&current));
        gap = if cn > 0.0 { dn / cn } else if dn == 0.0 { 0.0 } else { f64::INFINITY };
        previous = current;
        if gap < opts.period_tol || (dn == 0.0 && cn == 0.0) {
            let samples = TimeField::new(samples)?;
            let harmonics = to_harmonics(&samples, model.harmonics().min((nt_out - 2) / 2))?
                .resized(model.harmonics());
            return Ok(OracleResult { samples, harmonics, gap, periods: period_index, scheme: "implicit-midpoint" });
        }
    }
    Err(Error::NoPeriodicAttractor { periods: opts.max_periods, gap })
}
