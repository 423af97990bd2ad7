//! Energy functionals, multiplier choice and energy-identity residuals.
//!
//! Time norms come from Parseval with the one-sided convention
//!
//! ```text
//! ‖∂_t^k u‖²_{L²(0,T;X)} = T · Σ_m w_m (mω)^{2k} ‖û_m‖²_X,   w_0 = 1, w_m = 2,
//! ```
//!
//! and space norms from trapezoidal quadrature. In one dimension the boundary
//! `Γ = Γ_a ∪ Γ_i` is a set of endpoints, so `L²(Γ)` norms are sums of squared
//! endpoint values.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::HarmonicField;
use crate::model::{BcKind, BoundaryCondition, Grid, Model, PhysicalParams};
use crate::spatial::{
    assemble_laplacian, gradient, gradient_real, h1_semi_sq, l2_inner, l2_sq, laplacian_free, laplacian_free_real,
    H1DualNorm, SpatialOperator,
};

fn weight(m: usize) -> f64 {
    if m == 0 {
        1.0
    } else {
        2.0
    }
}

/// `T · Σ_m w_m (mω)^{2k} s(m, û_m)` for a squared spatial norm `s`.
fn parseval(u: &HarmonicField, model: &Model, k: i32, space: impl Fn(usize, &[C64]) -> f64) -> f64 {
    let omega = model.omega();
    model.period()
        * u.iter()
            .map(|(m, c)| {
                let factor = (m as f64 * omega).powi(2 * k);
                if factor == 0.0 {
                    0.0
                } else {
                    weight(m) * factor * space(m, c)
                }
            })
            .sum::<f64>()
}

/// `∫_0^T p q dt` for real fields given by their harmonics, at one node or integrated in space.
fn parseval_inner(p: &HarmonicField, q: &HarmonicField, model: &Model, space: impl Fn(&[C64], &[C64]) -> f64) -> f64 {
    model.period() * p.iter().zip(q.coeffs()).map(|((m, a), b)| weight(m) * space(a, b)).sum::<f64>()
}

/// `‖∂_t^k u‖²_{L²(0,T;L²(Ω))}`.
pub fn time_l2_sq(u: &HarmonicField, model: &Model, k: i32) -> f64 {
    parseval(u, model, k, |_, c| l2_sq(model.grid(), c))
}

/// `‖∂_t^k u‖²_{L²(0,T;H¹(Ω))}` with the full `H¹` norm.
pub fn time_h1_sq(u: &HarmonicField, model: &Model, k: i32) -> f64 {
    let g = model.grid();
    parseval(u, model, k, |_, c| l2_sq(g, c) + h1_semi_sq(g, c))
}

/// `‖∂_t^k ∇u‖²_{L²(0,T;L²(Ω))}`.
pub fn time_h1_semi_sq(u: &HarmonicField, model: &Model, k: i32) -> f64 {
    parseval(u, model, k, |_, c| h1_semi_sq(model.grid(), c))
}

/// Discrete `U⁰_lo = H²(L²) ∩ H¹(H¹)` norm.
pub fn u0_lo_norm(u: &HarmonicField, model: &Model) -> f64 {
    let g = model.grid();
    let omega = model.omega();
    let sum: f64 = u
        .iter()
        .map(|(m, c)| {
            let s = (m as f64 * omega).powi(2);
            let l2 = l2_sq(g, c);
            let semi = h1_semi_sq(g, c);
            weight(m) * (l2 * (1.0 + s + s * s) + (l2 + semi) * (1.0 + s))
        })
        .sum();
    (model.period() * sum).sqrt()
}

/// Discrete `U⁰_me = H²(H¹) ∩ H¹(H²_Δ)` norm.
pub fn u0_me_norm(u: &HarmonicField, model: &Model) -> f64 {
    let g = model.grid();
    let omega = model.omega();
    let ops = operators(model);
    let sum: f64 = u
        .iter()
        .map(|(m, c)| {
            let s = (m as f64 * omega).powi(2);
            let h1 = l2_sq(g, c) + h1_semi_sq(g, c);
            let lap = l2_sq(g, &ops[m].nodal_laplacian(g, c));
            weight(m) * (h1 * (1.0 + s + s * s) + (h1 + lap) * (1.0 + s))
        })
        .sum();
    (model.period() * sum).sqrt()
}

fn operators(model: &Model) -> Vec<SpatialOperator> {
    (0..=model.harmonics())
        .map(|m| assemble_laplacian(model.grid(), model.left(), model.right(), m, model.omega()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyTerm {
    pub name: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyLevel {
    pub terms: Vec<EnergyTerm>,
    pub total: f64,
}

impl EnergyLevel {
    fn new(terms: Vec<EnergyTerm>) -> Self {
        let total = terms.iter().map(|t| t.value).sum();
        Self { terms, total }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }
}

/// The three energy functionals, split into their summands.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub lo: EnergyLevel,
    pub me: EnergyLevel,
    pub hi: EnergyLevel,
}

impl EnergyReport {
    /// `(level, term, value)` rows, totals included.
    pub fn rows(&self) -> Vec<(&'static str, &'static str, f64)> {
        let mut out = Vec::new();
        for (level, e) in [("lo", &self.lo), ("me", &self.me), ("hi", &self.hi)] {
            for t in &e.terms {
                out.push((level, t.name, t.value));
            }
            out.push((level, "total", e.total));
        }
        out
    }
}

fn endpoints(model: &Model) -> [(usize, &BoundaryCondition); 2] {
    [(0, model.left()), (model.grid().nx() - 1, model.right())]
}

/// Sum over the endpoints selected by `pick` of `weight·|v(x_e)|²`.
fn trace_sq(model: &Model, c: &[C64], pick: impl Fn(&BoundaryCondition) -> Option<f64>) -> f64 {
    endpoints(model).iter().filter_map(|(j, bc)| pick(bc).map(|w| w * c[*j].norm_sqr())).sum()
}

fn absorbing(bc: &BoundaryCondition) -> Option<f64> {
    (bc.kind == BcKind::Absorbing).then_some(1.0)
}

fn gamma_weight(bc: &BoundaryCondition) -> Option<f64> {
    bc.on_gamma().then_some(bc.gamma)
}

fn gamma_sq_weight(bc: &BoundaryCondition) -> Option<f64> {
    bc.on_gamma().then_some(bc.gamma * bc.gamma)
}

/// Low, medium and high energies of `u` for the relaxation time of `model`.
pub fn compute_energies(u: &HarmonicField, model: &Model) -> EnergyReport {
    let g = model.grid();
    let p = model.params();
    let (tau, taubar) = (p.tau, p.taubar);
    let ops = operators(model);
    let dual = H1DualNorm::new(g, model.left(), model.right());
    let lap = HarmonicField::from_coeffs(u.iter().map(|(m, c)| ops[m].nodal_laplacian(g, c)).collect())
        .expect("shapes preserved");
    let l2 = |_: usize, c: &[C64]| l2_sq(g, c);
    let h1 = |_: usize, c: &[C64]| l2_sq(g, c) + h1_semi_sq(g, c);
    let semi = |_: usize, c: &[C64]| h1_semi_sq(g, c);
    let h1dual = |_: usize, c: &[C64]| dual.norm_sq(c);
    let sum_k = |f: &HarmonicField, ks: std::ops::RangeInclusive<i32>, s: &dyn Fn(usize, &[C64]) -> f64| {
        ks.map(|k| parseval(f, model, k, s)).sum::<f64>()
    };
    let tr_a = |_: usize, c: &[C64]| trace_sq(model, c, absorbing);
    let tr_g = |_: usize, c: &[C64]| trace_sq(model, c, gamma_weight);
    let tr_g2 = |_: usize, c: &[C64]| trace_sq(model, c, gamma_sq_weight);

    let uttt_dual = taubar * tau * tau * parseval(u, model, 3, h1dual);
    let lo = EnergyLevel::new(vec![
        EnergyTerm { name: "taubar_tau2_uttt_h1dual", value: uttt_dual },
        EnergyTerm { name: "taubar_utt_l2", value: taubar * parseval(u, model, 2, l2) },
        EnergyTerm { name: "u_h1_h1", value: sum_k(u, 0..=1, &h1) },
        EnergyTerm { name: "taubar_utt_gamma_a", value: taubar * parseval(u, model, 2, tr_a) },
        EnergyTerm { name: "sqrt_gamma_u_h1_gamma", value: sum_k(u, 0..=1, &tr_g) },
    ]);
    let me = EnergyLevel::new(vec![
        EnergyTerm { name: "taubar_tau2_uttt_l2", value: taubar * tau * tau * parseval(u, model, 3, l2) },
        EnergyTerm { name: "taubar_utt_h1", value: taubar * parseval(u, model, 2, h1) },
        EnergyTerm { name: "lap_u_h1_l2", value: sum_k(&lap, 0..=1, &l2) },
        EnergyTerm { name: "taubar_tau_uttt_gamma_a", value: taubar * tau * parseval(u, model, 3, tr_a) },
        EnergyTerm { name: "sqrt_gamma_u_h2_gamma", value: sum_k(u, 0..=2, &tr_g) },
    ]);
    let hi = EnergyLevel::new(vec![
        EnergyTerm { name: "taubar_tau2_uttt_h1dual", value: uttt_dual },
        EnergyTerm { name: "taubar_lap_utt_l2", value: taubar * parseval(&lap, model, 2, l2) },
        EnergyTerm { name: "grad_lap_u_h1_l2", value: sum_k(&lap, 0..=1, &semi) },
        EnergyTerm { name: "taubar_lap_utt_gamma_a", value: taubar * parseval(&lap, model, 2, tr_a) },
        EnergyTerm { name: "gamma_lap_u_h1_gamma", value: sum_k(&lap, 0..=1, &tr_g2) },
    ]);
    EnergyReport { lo, me, hi }
}

/// Multipliers of the test function `τ̄u_tt + σu_t + ρu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Multipliers {
    pub sigma: f64,
    pub rho: f64,
}

/// Picks `σ` midway in `(τ̄·max c²/b, α)` and `ρ` at half its admissible bound,
/// then re-checks every positivity condition.
pub fn choose_multipliers(params: &PhysicalParams) -> Result<Multipliers> {
    choose_multipliers_for_alpha(params, 1.0)
}

/// [`choose_multipliers`] for a lower bound `alpha_min` of `α`.
pub fn choose_multipliers_for_alpha(params: &PhysicalParams, alpha_min: f64) -> Result<Multipliers> {
    let ratio = |f: fn(f64, f64) -> f64, init: f64| {
        params.c2.iter().zip(&params.b).map(|(c2, b)| c2 / b).fold(init, f)
    };
    let max_c2_b = ratio(f64::max, f64::NEG_INFINITY);
    let min_c2_b = ratio(f64::min, f64::INFINITY);
    let taubar = params.taubar;
    if !(taubar * max_c2_b < alpha_min) {
        return Err(Error::StabilityViolation { margin: params.stability_margin(alpha_min) });
    }
    let sigma = 0.5 * (taubar * max_c2_b + alpha_min);
    let tau_bound = if taubar > 0.0 { sigma * alpha_min / taubar } else { f64::INFINITY };
    let rho = 0.5 * (sigma * min_c2_b).min(tau_bound);

    let ok = taubar * max_c2_b < sigma
        && sigma < alpha_min
        && rho > 0.0
        && rho / min_c2_b < sigma
        && rho <= tau_bound;
    if !ok {
        return Err(Error::StabilityViolation { margin: params.stability_margin(alpha_min) });
    }
    Ok(Multipliers { sigma, rho })
}

/// Summands of the low-order energy identity; they add up to zero for exact solutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityTerms {
    /// `(τ̄ − τσ)∫∫u_tt²`
    pub second_derivative: f64,
    /// `−ρ∫∫u_t²`
    pub velocity: f64,
    /// `∫∫r̃ v`
    pub source: f64,
    /// `−∫∫∇·(∇b u_t + ∇c² u) v`
    pub coefficient_gradient: f64,
    /// `∫∫(σb − τ̄c²)|∇u_t|² + ρc²|∇u|²`
    pub gradient: f64,
    /// `Γ` terms with `β`, `γ` weights
    pub boundary: f64,
    /// `∫_{∂Ω}(∂_ν b u_t + ∂_ν c² u) v`
    pub normal_derivative: f64,
}

impl IdentityTerms {
    pub fn total(&self) -> f64 {
        self.second_derivative
            + self.velocity
            + self.source
            + self.coefficient_gradient
            + self.gradient
            + self.boundary
            + self.normal_derivative
    }

    /// Sum of magnitudes, a natural scale for the residual.
    pub fn scale(&self) -> f64 {
        [
            self.second_derivative,
            self.velocity,
            self.source,
            self.coefficient_gradient,
            self.gradient,
            self.boundary,
            self.normal_derivative,
        ]
        .iter()
        .map(|v| v.abs())
        .sum()
    }
}

/// `∫ w |∇c|²` by the trapezoidal rule.
fn weighted_semi_sq(g: &Grid, w: &[f64], c: &[C64]) -> f64 {
    let gc = gradient(g, c);
    g.weights().iter().zip(w).zip(&gc).map(|((q, a), z)| q * a * z.norm_sqr()).sum()
}

/// Evaluates the low-order identity for `α = 1` term by term, with the test function
/// `v = τ̄u_tt + σu_t + ρu`.
pub fn energy_identity_terms(
    u: &HarmonicField,
    rtilde: &HarmonicField,
    mult: &Multipliers,
    model: &Model,
) -> Result<IdentityTerms> {
    let nx = model.grid().nx();
    for f in [u, rtilde] {
        if f.nx() != nx || f.harmonics() != model.harmonics() {
            return Err(Error::ShapeMismatch("field does not match the model".into()));
        }
    }
    let g = model.grid();
    let p = model.params();
    let (tau, taubar) = (p.tau, p.taubar);
    let Multipliers { sigma, rho } = *mult;
    let omega = model.omega();
    let ut = u.time_derivative(omega, 1);
    let utt = u.time_derivative(omega, 2);
    let v = utt.scaled(taubar).axpy(sigma, &ut).axpy(rho, u);

    let second_derivative = (taubar - tau * sigma) * time_l2_sq(u, model, 2);
    let velocity = -rho * time_l2_sq(u, model, 1);
    let source = parseval_inner(rtilde, &v, model, |a, b| l2_inner(g, a, b));

    let gb = gradient_real(g, &p.b);
    let gc = gradient_real(g, &p.c2);
    let lb = laplacian_free_real(g, &p.b);
    let lc = laplacian_free_real(g, &p.c2);
    let divergence = HarmonicField::from_coeffs(
        (0..=model.harmonics())
            .map(|m| {
                let a = ut.coeff(m);
                let z = u.coeff(m);
                let ga = gradient(g, a);
                let gz = gradient(g, z);
                (0..nx).map(|j| a[j] * lb[j] + ga[j] * gb[j] + z[j] * lc[j] + gz[j] * gc[j]).collect()
            })
            .collect(),
    )?;
    let coefficient_gradient = -parseval_inner(&divergence, &v, model, |a, b| l2_inner(g, a, b));

    let w_ut: Vec<f64> = p.b.iter().zip(&p.c2).map(|(b, c2)| sigma * b - taubar * c2).collect();
    let w_u: Vec<f64> = p.c2.iter().map(|c2| rho * c2).collect();
    let gradient_term =
        parseval(u, model, 1, |_, c| weighted_semi_sq(g, &w_ut, c)) + parseval(u, model, 0, |_, c| weighted_semi_sq(g, &w_u, c));

    let mut boundary = 0.0;
    let mut normal_derivative = 0.0;
    for (side, (j, bc)) in endpoints(model).into_iter().enumerate() {
        let at = |f: &HarmonicField| {
            HarmonicField::from_coeffs(f.coeffs().iter().map(|c| vec![c[j]]).collect()).expect("single node")
        };
        let (u_e, ut_e, utt_e, v_e) = (at(u), at(&ut), at(&utt), at(&v));
        let point_sq = |f: &HarmonicField| parseval(f, model, 0, |_, c| c[0].norm_sqr());
        let point_inner = |a: &HarmonicField, b: &HarmonicField| parseval_inner(a, b, model, |x, y| (x[0] * y[0].conj()).re);
        let (b, c2) = (p.b[j], p.c2[j]);
        if bc.on_gamma() {
            let (beta, gamma) = (bc.beta, bc.gamma);
            boundary += taubar * beta * b * point_sq(&utt_e)
                + (beta * (sigma * c2 - rho * b) + gamma * (sigma * b - taubar * c2)) * point_sq(&ut_e)
                + rho * gamma * c2 * point_sq(&u_e);
        }
        let normal = if side == 0 { -1.0 } else { 1.0 };
        let flux = ut_e.scaled(normal * gb[j]).axpy(normal * gc[j], &u_e);
        normal_derivative += point_inner(&flux, &v_e);
    }

    Ok(IdentityTerms {
        second_derivative,
        velocity,
        source,
        coefficient_gradient,
        gradient: gradient_term,
        boundary,
        normal_derivative,
    })
}

/// `|Σ terms|` of the low-order identity; vanishes for exact periodic solutions.
pub fn energy_identity_residual(
    u: &HarmonicField,
    rtilde: &HarmonicField,
    mult: &Multipliers,
    model: &Model,
) -> Result<f64> {
    Ok(energy_identity_terms(u, rtilde, mult, model)?.total().abs())
}

/// Discrete derivative norms of the coefficients; reported without thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoefficientNorms {
    pub grad_b_max: f64,
    pub grad_b_l2: f64,
    pub grad_c2_max: f64,
    /// `‖∇c²‖_{L²(0,T;L²)}`, i.e. `√T‖∇c²‖_{L²}`.
    pub grad_c2_l2_l2: f64,
    pub lap_b_max: f64,
    pub lap_b_l2: f64,
    pub lap_c2_max: f64,
    pub lap_c2_l2: f64,
    /// Derivatives of `α = 1` vanish.
    pub grad_alpha_max: f64,
    pub lap_alpha_max: f64,
}

impl CoefficientNorms {
    pub fn rows(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("grad_b_max", self.grad_b_max),
            ("grad_b_l2", self.grad_b_l2),
            ("grad_c2_max", self.grad_c2_max),
            ("grad_c2_l2_l2", self.grad_c2_l2_l2),
            ("lap_b_max", self.lap_b_max),
            ("lap_b_l2", self.lap_b_l2),
            ("lap_c2_max", self.lap_c2_max),
            ("lap_c2_l2", self.lap_c2_l2),
            ("grad_alpha_max", self.grad_alpha_max),
            ("lap_alpha_max", self.lap_alpha_max),
        ]
    }
}

pub fn coefficient_smallness_report(params: &PhysicalParams, grid: &Grid) -> CoefficientNorms {
    let max = |v: &[f64]| v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let l2 = |v: &[f64]| grid.weights().iter().zip(v).map(|(w, x)| w * x * x).sum::<f64>().sqrt();
    let gb = gradient_real(grid, &params.b);
    let gc = gradient_real(grid, &params.c2);
    let lb = laplacian_free_real(grid, &params.b);
    let lc = laplacian_free_real(grid, &params.c2);
    CoefficientNorms {
        grad_b_max: max(&gb),
        grad_b_l2: l2(&gb),
        grad_c2_max: max(&gc),
        grad_c2_l2_l2: params.period().sqrt() * l2(&gc),
        lap_b_max: max(&lb),
        lap_b_l2: l2(&lb),
        lap_c2_max: max(&lc),
        lap_c2_l2: l2(&lc),
        grad_alpha_max: 0.0,
        lap_alpha_max: 0.0,
    }
}

/// One solve of a `τ` family with its source split `r̃ = r̃^∇ + r̃^t`.
#[derive(Debug, Clone)]
pub struct EstimateSample {
    pub tau: f64,
    pub u: HarmonicField,
    pub source_gradient_part: HarmonicField,
    pub source_time_part: HarmonicField,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRatioRow {
    pub tau: f64,
    /// `E_lo / (τ̄‖r̃‖²_{L²(L²)} + ‖r̃‖²_{L²(H¹*)})`; `None` when both sides vanish.
    pub lo: Option<f64>,
    pub me: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRatioTable {
    pub rows: Vec<EstimateRatioRow>,
    /// Max over min of each ratio column across the defined rows.
    pub lo_spread: Option<f64>,
    pub me_spread: Option<f64>,
    pub hi_spread: Option<f64>,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0 && num.is_finite()).then(|| num / den)
}

fn spread(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    if v.is_empty() {
        return None;
    }
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    ratio(hi, lo)
}

/// Ratios of the energies to the right-hand sides of the a-priori estimates across a `τ` family.
pub fn estimate_ratio_report(model: &Model, samples: &[EstimateSample]) -> Result<EstimateRatioTable> {
    let g = model.grid();
    let dual = H1DualNorm::new(g, model.left(), model.right());
    let mut rows = Vec::with_capacity(samples.len());
    for s in samples {
        let m = model.with_tau(s.tau)?;
        let taubar = m.params().taubar;
        let e = compute_energies(&s.u, &m);
        let r = s.source_gradient_part.add(&s.source_time_part);
        let r_l2 = time_l2_sq(&r, &m, 0);
        let r_dual = parseval(&r, &m, 0, |_, c| dual.norm_sq(c));
        let lo = ratio(e.lo.total, taubar * r_l2 + r_dual);

        let grad_t = time_l2_sq(&s.source_gradient_part, &m, 1);
        let nabla_time = time_h1_semi_sq(&s.source_time_part, &m, 0);
        let time_trace = parseval(&s.source_time_part, &m, 0, |_, c| trace_sq(&m, c, |bc| bc.on_gamma().then_some(1.0)));
        let me = ratio(
            e.me.total + e.lo.total,
            e.lo.total + taubar * taubar * grad_t + taubar * nabla_time + time_trace + r_l2,
        );

        let lap_r = r.map_spatial(|c| laplacian_free(g, c));
        let hi = ratio(
            e.hi.total + e.me.total + e.lo.total,
            e.me.total + taubar * time_l2_sq(&lap_r, &m, 0) + parseval(&lap_r, &m, 0, |_, c| dual.norm_sq(c)),
        );
        rows.push(EstimateRatioRow { tau: s.tau, lo, me, hi });
    }
    Ok(EstimateRatioTable {
        lo_spread: spread(rows.iter().map(|r| r.lo)),
        me_spread: spread(rows.iter().map(|r| r.me)),
        hi_spread: spread(rows.iter().map(|r| r.hi)),
        rows,
    })
}
