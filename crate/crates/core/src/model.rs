//! Physical and discrete data model.
//!
//! The spatial domain is the interval `(0, L)` discretized by a uniform grid.
//! Coefficients are nodal arrays; a scalar coefficient is broadcast to every
//! node. A [`Model`] can only be obtained through validation, so every solver
//! entry point can rely on positivity of `b` and `c²`, the ordering
//! `0 ≤ τ ≤ τ̄` and a nonsingular mean-mode problem.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Uniform grid on `[0, L]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    length: f64,
    nx: usize,
}

impl Grid {
    pub fn new(length: f64, nx: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) || nx < 3 {
            return Err(Error::Validation(vec![Violation::BadGrid(format!(
                "need L > 0 and Nx >= 3, got L = {length}, Nx = {nx}"
            ))]));
        }
        Ok(Self { length, nx })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn h(&self) -> f64 {
        self.length / (self.nx - 1) as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        if j + 1 == self.nx {
            self.length
        } else {
            j as f64 * self.h()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.nx).map(|j| self.x(j)).collect()
    }

    /// Trapezoidal quadrature weights.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.h();
        let mut w = vec![h; self.nx];
        w[0] = 0.5 * h;
        w[self.nx - 1] = 0.5 * h;
        w
    }

    /// Samples `f` at the grid nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.nx).map(|j| f(self.x(j))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BcKind {
    Absorbing,
    Impedance,
    Neumann,
    Dirichlet,
}

impl fmt::Display for BcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BcKind::Absorbing => "absorbing",
            BcKind::Impedance => "impedance",
            BcKind::Neumann => "neumann",
            BcKind::Dirichlet => "dirichlet",
        };
        f.write_str(s)
    }
}

/// Homogeneous boundary condition `∂_ν u + β u_t + γ u = 0`, or `u = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    pub kind: BcKind,
    pub beta: f64,
    pub gamma: f64,
}

impl BoundaryCondition {
    pub fn dirichlet() -> Self {
        Self { kind: BcKind::Dirichlet, beta: 0.0, gamma: 0.0 }
    }

    pub fn neumann() -> Self {
        Self { kind: BcKind::Neumann, beta: 0.0, gamma: 0.0 }
    }

    pub fn impedance(gamma: f64) -> Self {
        Self { kind: BcKind::Impedance, beta: 0.0, gamma }
    }

    pub fn absorbing(beta: f64, gamma: f64) -> Self {
        Self { kind: BcKind::Absorbing, beta, gamma }
    }

    pub fn is_dirichlet(&self) -> bool {
        self.kind == BcKind::Dirichlet
    }

    /// Endpoints belonging to `Γ = Γ_a ∪ Γ_i`.
    pub fn on_gamma(&self) -> bool {
        matches!(self.kind, BcKind::Absorbing | BcKind::Impedance)
    }

    fn check(&self, side: Side, out: &mut Vec<Violation>) {
        let bad = |msg: &str| Violation::BadBoundary { side, message: msg.to_string() };
        if !(self.beta.is_finite() && self.gamma.is_finite()) || self.beta < 0.0 || self.gamma < 0.0 {
            out.push(bad("beta and gamma must be finite and nonnegative"));
            return;
        }
        match self.kind {
            BcKind::Neumann if self.gamma != 0.0 || self.beta != 0.0 => {
                out.push(bad("neumann requires beta = 0 and gamma = 0"))
            }
            BcKind::Impedance if self.beta != 0.0 => out.push(bad("impedance requires beta = 0")),
            BcKind::Impedance if self.gamma <= 0.0 => out.push(bad("impedance requires gamma > 0")),
            BcKind::Absorbing if self.beta <= 0.0 => out.push(bad("absorbing requires beta > 0")),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

/// Which equation is being solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    /// Linear MGT equation with `α = 1`.
    Linear,
    /// `η (u²)_tt`, pressure form.
    Westervelt,
    /// `(η̃ u_t² + |∇u|²)_t`, velocity-potential form.
    Kuznetsov,
}

/// Coefficients of the equation. `ω = 2π/T` is derived from the period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub tau: f64,
    pub taubar: f64,
    pub b: Vec<f64>,
    pub c2: Vec<f64>,
    pub eta: Vec<f64>,
    pub eta_tilde: Vec<f64>,
    period: f64,
}

impl PhysicalParams {
    /// Spatially constant coefficients broadcast over `nx` nodes.
    pub fn uniform(nx: usize, tau: f64, taubar: f64, b: f64, c2: f64, eta: f64, eta_tilde: f64, period: f64) -> Self {
        Self {
            tau,
            taubar,
            b: vec![b; nx],
            c2: vec![c2; nx],
            eta: vec![eta; nx],
            eta_tilde: vec![eta_tilde; nx],
            period,
        }
    }

    pub fn from_nodal(
        tau: f64,
        taubar: f64,
        b: Vec<f64>,
        c2: Vec<f64>,
        eta: Vec<f64>,
        eta_tilde: Vec<f64>,
        period: f64,
    ) -> Self {
        Self { tau, taubar, b, c2, eta, eta_tilde, period }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI / self.period
    }

    /// `min_x (b/c² − τ̄/α)` for a constant `α`.
    pub fn stability_margin(&self, alpha: f64) -> f64 {
        self.b
            .iter()
            .zip(&self.c2)
            .map(|(b, c2)| b / c2 - self.taubar / alpha)
            .fold(f64::INFINITY, f64::min)
    }

    /// Interpolates the nodal coefficients of `from` onto `to`, piecewise linearly.
    pub fn regrid(&self, from: &Grid, to: &Grid) -> Self {
        let interp = |v: &[f64]| -> Vec<f64> {
            let h = from.h();
            (0..to.nx())
                .map(|j| {
                    let s = (to.x(j) / h).clamp(0.0, (from.nx() - 1) as f64);
                    let i = (s.floor() as usize).min(from.nx() - 2);
                    let t = s - i as f64;
                    (1.0 - t) * v[i] + t * v[i + 1]
                })
                .collect()
        };
        Self {
            tau: self.tau,
            taubar: self.taubar,
            b: interp(&self.b),
            c2: interp(&self.c2),
            eta: interp(&self.eta),
            eta_tilde: interp(&self.eta_tilde),
            period: self.period,
        }
    }
}

/// A structural assumption that a configuration fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    NonPositiveCoefficient { name: String, node: usize, value: f64 },
    StabilityViolation { margin: f64 },
    MeasureAssumptionViolation,
    BadGrid(String),
    BadBoundary { side: Side, message: String },
    BadParameter(String),
}

impl Violation {
    pub fn kind(&self) -> &'static str {
        match self {
            Violation::NonPositiveCoefficient { .. } => "NonPositiveCoefficient",
            Violation::StabilityViolation { .. } => "StabilityViolation",
            Violation::MeasureAssumptionViolation => "MeasureAssumptionViolation",
            Violation::BadGrid(_) => "BadGrid",
            Violation::BadBoundary { .. } => "BadBoundary",
            Violation::BadParameter(_) => "BadParameter",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveCoefficient { name, node, value } => {
                write!(f, "{name} must be positive and finite, got {value} at node {node}")
            }
            Violation::StabilityViolation { margin } => {
                write!(f, "b/c2 - taubar must be positive, minimum is {margin}")
            }
            Violation::MeasureAssumptionViolation => {
                f.write_str("at least one endpoint must be impedance or dirichlet")
            }
            Violation::BadGrid(m) => write!(f, "bad grid: {m}"),
            Violation::BadBoundary { side, message } => write!(f, "bad {side} boundary: {message}"),
            Violation::BadParameter(m) => write!(f, "bad parameter: {m}"),
        }
    }
}

/// Unvalidated model description, as read from a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RawModel {
    pub length: f64,
    pub nx: usize,
    pub period: f64,
    pub harmonics: usize,
    pub tau: f64,
    pub taubar: f64,
    pub b: Vec<f64>,
    pub c2: Vec<f64>,
    pub eta: Vec<f64>,
    pub eta_tilde: Vec<f64>,
    pub left: BoundaryCondition,
    pub right: BoundaryCondition,
}

/// Validated discrete model: grid, coefficients, boundary data and harmonic order `M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    grid: Grid,
    params: PhysicalParams,
    left: BoundaryCondition,
    right: BoundaryCondition,
    harmonics: usize,
}

#[derive(Debug, Clone)]
pub struct ValidatedModel {
    pub model: Model,
    /// `min_x (b/c² − τ̄)`: the a-priori check with `α = 1`.
    pub stability_margin: f64,
}

/// Checks every structural assumption and collects all violations.
pub fn validate_config(raw: &RawModel) -> std::result::Result<ValidatedModel, Vec<Violation>> {
    let mut out = Vec::new();

    if !(raw.length.is_finite() && raw.length > 0.0) {
        out.push(Violation::BadGrid(format!("L must be positive, got {}", raw.length)));
    }
    if raw.nx < 3 {
        out.push(Violation::BadGrid(format!("Nx must be at least 3, got {}", raw.nx)));
    }
    if !(raw.period.is_finite() && raw.period > 0.0) {
        out.push(Violation::BadParameter(format!("T must be positive, got {}", raw.period)));
    }
    if !(raw.tau.is_finite() && raw.tau >= 0.0) {
        out.push(Violation::BadParameter(format!("tau must be >= 0, got {}", raw.tau)));
    }
    if !(raw.taubar.is_finite() && raw.taubar >= raw.tau) {
        out.push(Violation::BadParameter(format!(
            "taubar must be >= tau, got taubar = {}, tau = {}",
            raw.taubar, raw.tau
        )));
    }

    for (name, values, positive) in [
        ("b", &raw.b, true),
        ("c2", &raw.c2, true),
        ("eta", &raw.eta, false),
        ("eta_tilde", &raw.eta_tilde, false),
    ] {
        if values.len() != raw.nx {
            out.push(Violation::BadParameter(format!(
                "{name} has {} values, expected {}",
                values.len(),
                raw.nx
            )));
            continue;
        }
        for (node, &value) in values.iter().enumerate() {
            if !value.is_finite() || (positive && value <= 0.0) {
                out.push(Violation::NonPositiveCoefficient { name: name.to_string(), node, value });
                break;
            }
        }
    }

    raw.left.check(Side::Left, &mut out);
    raw.right.check(Side::Right, &mut out);
    let anchored = |bc: &BoundaryCondition| matches!(bc.kind, BcKind::Impedance | BcKind::Dirichlet);
    if !anchored(&raw.left) && !anchored(&raw.right) {
        out.push(Violation::MeasureAssumptionViolation);
    }

    let coefficients_ok = raw.b.len() == raw.nx
        && raw.c2.len() == raw.nx
        && raw.b.iter().chain(&raw.c2).all(|v| v.is_finite() && *v > 0.0);
    let mut margin = f64::NAN;
    if coefficients_ok && raw.taubar.is_finite() {
        margin = raw
            .b
            .iter()
            .zip(&raw.c2)
            .map(|(b, c2)| b / c2 - raw.taubar)
            .fold(f64::INFINITY, f64::min);
        if margin <= 0.0 {
            out.push(Violation::StabilityViolation { margin });
        }
    }

    if !out.is_empty() {
        return Err(out);
    }

    let model = Model {
        grid: Grid { length: raw.length, nx: raw.nx },
        params: PhysicalParams {
            tau: raw.tau,
            taubar: raw.taubar,
            b: raw.b.clone(),
            c2: raw.c2.clone(),
            eta: raw.eta.clone(),
            eta_tilde: raw.eta_tilde.clone(),
            period: raw.period,
        },
        left: raw.left,
        right: raw.right,
        harmonics: raw.harmonics,
    };
    Ok(ValidatedModel { model, stability_margin: margin })
}

impl Model {
    pub fn new(
        grid: Grid,
        params: PhysicalParams,
        left: BoundaryCondition,
        right: BoundaryCondition,
        harmonics: usize,
    ) -> Result<Self> {
        let raw = RawModel {
            length: grid.length,
            nx: grid.nx,
            period: params.period,
            harmonics,
            tau: params.tau,
            taubar: params.taubar,
            b: params.b,
            c2: params.c2,
            eta: params.eta,
            eta_tilde: params.eta_tilde,
            left,
            right,
        };
        validate_config(&raw).map(|v| v.model).map_err(Error::Validation)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn left(&self) -> &BoundaryCondition {
        &self.left
    }

    pub fn right(&self) -> &BoundaryCondition {
        &self.right
    }

    pub fn harmonics(&self) -> usize {
        self.harmonics
    }

    pub fn omega(&self) -> f64 {
        self.params.omega()
    }

    pub fn period(&self) -> f64 {
        self.params.period
    }

    /// Same model with a different relaxation time; `τ̄` is kept.
    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        if !(tau >= 0.0 && tau <= self.params.taubar) {
            return Err(Error::InvalidArgument(format!(
                "tau = {tau} outside [0, taubar = {}]",
                self.params.taubar
            )));
        }
        let mut m = self.clone();
        m.params.tau = tau;
        Ok(m)
    }

    pub fn with_harmonics(&self, harmonics: usize) -> Self {
        let mut m = self.clone();
        m.harmonics = harmonics;
        m
    }

    pub fn with_boundaries(&self, left: BoundaryCondition, right: BoundaryCondition) -> Result<Self> {
        Model::new(self.grid.clone(), self.params.clone(), left, right, self.harmonics)
    }

    pub fn with_params(&self, params: PhysicalParams) -> Result<Self> {
        Model::new(self.grid.clone(), params, self.left, self.right, self.harmonics)
    }

    /// Same physics on another grid, coefficients interpolated.
    pub fn regrid(&self, nx: usize) -> Result<Self> {
        let grid = Grid::new(self.grid.length, nx)?;
        let params = self.params.regrid(&self.grid, &grid);
        Model::new(grid, params, self.left, self.right, self.harmonics)
    }

    /// Spatial degrees of freedom: every node except Dirichlet endpoints.
    pub fn dofs(&self) -> Vec<usize> {
        let n = self.grid.nx;
        let lo = usize::from(self.left.is_dirichlet());
        let hi = n - usize::from(self.right.is_dirichlet());
        (lo..hi).collect()
    }

    /// Stable hex digest of the full model, used to tag study rows.
    pub fn config_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("model serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
