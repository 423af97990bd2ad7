//! Per-harmonic Helmholtz-type systems for the linear MGT operator and the
//! block-coupled system of the linearized nonlinear equations.
//!
//! With `u = Σ û_m e^{imωt}` the operator `τ∂_t³ + ∂_t² − (c² + b∂_t)Δ`
//! acts on harmonic `m` as
//!
//! ```text
//! A_m = (−iτm³ω³ − m²ω²)·I + diag(c² + imωb)·(−Δ_h),
//! ```
//!
//! where `−Δ_h` carries the harmonic-`m` Robin rows. Solving the periodic
//! problem `Du + r̃ = 0` is then `A_m û_m = −r̂_m` for every `m`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::field::HarmonicField;
use crate::krylov::{gmres, GmresOptions};
use crate::model::{Model, Nonlinearity};
use crate::nonlinear::linearized_coupling;
use crate::spatial::{assemble_laplacian, SpatialOperator};
use crate::tridiag::{Tridiagonal, TridiagonalLu};

/// `κ_m² = (m²ω² + iτm³ω³)/(c² + imωb)` for constant coefficients.
pub fn kappa_squared(m: usize, tau: f64, omega: f64, b: f64, c2: f64) -> C64 {
    let mw = m as f64 * omega;
    C64::new(mw * mw, tau * mw.powi(3)) / C64::new(c2, mw * b)
}

/// `A_m û_m = rhs` restricted to the non-Dirichlet nodes.
#[derive(Debug, Clone)]
pub struct HarmonicSystem {
    pub m: usize,
    pub laplacian: SpatialOperator,
    pub matrix: Tridiagonal,
    /// `−r̂_m` on the unknowns.
    pub rhs: Vec<C64>,
    nx: usize,
}

fn system_matrix(model: &Model, m: usize, tau: f64) -> (SpatialOperator, Tridiagonal) {
    let omega = model.omega();
    let p = model.params();
    let lap = assemble_laplacian(model.grid(), model.left(), model.right(), m, omega);
    let mw = m as f64 * omega;
    let scale: Vec<C64> = lap.dofs.iter().map(|&j| C64::new(p.c2[j], mw * p.b[j])).collect();
    let shift = vec![C64::new(-mw * mw, -tau * mw.powi(3)); lap.n()];
    let a = lap.matrix.scale_rows(&scale).shifted(&shift);
    (lap, a)
}

/// Assembles harmonic `m` for the right-hand side `r̂_m` given at every node.
pub fn assemble_harmonic_system(model: &Model, m: usize, rhs_harmonic: &[C64]) -> Result<HarmonicSystem> {
    if rhs_harmonic.len() != model.grid().nx() {
        return Err(Error::ShapeMismatch(format!(
            "right-hand side has {} nodes, grid has {}",
            rhs_harmonic.len(),
            model.grid().nx()
        )));
    }
    let (laplacian, matrix) = system_matrix(model, m, model.params().tau);
    let rhs = laplacian.dofs.iter().map(|&j| -rhs_harmonic[j]).collect();
    Ok(HarmonicSystem { m, laplacian, matrix, rhs, nx: model.grid().nx() })
}

impl HarmonicSystem {
    /// Solves and scatters to a full nodal vector (zero at Dirichlet nodes).
    pub fn solve(&self) -> Result<Vec<C64>> {
        let lu = factor(&self.matrix, self.m)?;
        let x = solve_checked(&self.matrix, &lu, &self.rhs, self.m)?;
        Ok(self.laplacian.scatter(&x, self.nx))
    }
}

fn factor(a: &Tridiagonal, m: usize) -> Result<TridiagonalLu> {
    a.factor().ok_or(if m == 0 {
        Error::SingularMeanMode
    } else {
        Error::SolveFailure { harmonic: m, residual: f64::INFINITY, condition_estimate: f64::INFINITY }
    })
}

fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Solves with one step of iterative refinement if the residual contract
/// `‖Ax − b‖ ≤ 1e−10 (‖A‖‖x‖ + ‖b‖)` is missed.
fn solve_checked(a: &Tridiagonal, lu: &TridiagonalLu, b: &[C64], m: usize) -> Result<Vec<C64>> {
    let mut x = lu.solve(b);
    let bound = |x: &[C64]| 1e-10 * (a.norm_inf() * norm2(x) + norm2(b));
    let residual = |x: &[C64]| -> Vec<C64> { a.apply(x).iter().zip(b).map(|(p, q)| p - q).collect() };
    let mut r = residual(&x);
    if norm2(&r) > bound(&x) {
        let d = lu.solve(&r);
        x.iter_mut().zip(d).for_each(|(xi, di)| *xi -= di);
        r = residual(&x);
    }
    let rn = norm2(&r);
    if !rn.is_finite() || rn > bound(&x) {
        return Err(Error::SolveFailure { harmonic: m, residual: rn, condition_estimate: lu.pivot_ratio() });
    }
    Ok(x)
}

/// Factorized linear MGT operator (`α = 1`) for every harmonic of a model.
#[derive(Debug, Clone)]
pub struct LinearMgtSolver {
    model: Model,
    tau: f64,
    blocks: Vec<(SpatialOperator, Tridiagonal, TridiagonalLu)>,
}

impl LinearMgtSolver {
    pub fn new(model: &Model) -> Result<Self> {
        Self::with_tau(model, model.params().tau)
    }

    /// Same operator with the relaxation time replaced, e.g. `τ = 0` for the
    /// classical second-order limit.
    pub fn with_tau(model: &Model, tau: f64) -> Result<Self> {
        let blocks = (0..=model.harmonics())
            .map(|m| {
                let (lap, a) = system_matrix(model, m, tau);
                let lu = factor(&a, m)?;
                Ok((lap, a, lu))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { model: model.clone(), tau, blocks })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    fn check_shape(&self, f: &HarmonicField) -> Result<()> {
        if f.harmonics() != self.model.harmonics() || f.nx() != self.model.grid().nx() {
            return Err(Error::ShapeMismatch(format!(
                "field has order {} on {} nodes, model has order {} on {} nodes",
                f.harmonics(),
                f.nx(),
                self.model.harmonics(),
                self.model.grid().nx()
            )));
        }
        Ok(())
    }

    /// `u` with `Du + r = 0`.
    pub fn solve(&self, r: &HarmonicField) -> Result<HarmonicField> {
        self.check_shape(r)?;
        let nx = r.nx();
        let mut out = HarmonicField::zeros(r.harmonics(), nx);
        for (m, (lap, a, lu)) in self.blocks.iter().enumerate() {
            let rhs: Vec<C64> = lap.dofs.iter().map(|&j| -r.coeff(m)[j]).collect();
            let x = solve_checked(a, lu, &rhs, m)?;
            for (&j, z) in lap.dofs.iter().zip(x) {
                out.coeff_mut(m)[j] = if m == 0 { C64::new(z.re, 0.0) } else { z };
            }
        }
        Ok(out)
    }

    /// `Du` on the unknowns; zero at Dirichlet nodes.
    pub fn apply(&self, u: &HarmonicField) -> Result<HarmonicField> {
        self.check_shape(u)?;
        let mut out = HarmonicField::zeros(u.harmonics(), u.nx());
        for (m, (lap, a, _)) in self.blocks.iter().enumerate() {
            let y = a.apply(&lap.restrict(u.coeff(m)));
            for (&j, z) in lap.dofs.iter().zip(y) {
                out.coeff_mut(m)[j] = z;
            }
        }
        Ok(out)
    }

    /// `A_m^{-1}` applied to a reduced vector.
    fn solve_block(&self, m: usize, rhs: &[C64]) -> Vec<C64> {
        self.blocks[m].2.solve(rhs)
    }

    pub fn dofs(&self) -> &[usize] {
        &self.blocks[0].0.dofs
    }
}

/// Solves the periodic linear MGT problem `Du + f = 0` with `α = 1`.
pub fn solve_linear_mgt(f: &HarmonicField, model: &Model) -> Result<HarmonicField> {
    LinearMgtSolver::new(model)?.solve(f)
}

#[derive(Debug, Clone, Copy)]
pub struct LinearizedOptions {
    /// Relative residual target of the preconditioned iteration.
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
    /// Complex unknown count `(M+1)·n_dofs` at or below which a dense factorization is used.
    pub dense_threshold: usize,
    /// Keep `τ∂_t³` in the linearized operator.
    pub include_relaxation: bool,
}

impl Default for LinearizedOptions {
    fn default() -> Self {
        Self { tol: 1e-12, restart: 60, max_iter: 600, dense_threshold: 400, include_relaxation: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockMethod {
    Decoupled,
    Dense,
    Gmres,
}

#[derive(Debug, Clone)]
pub struct LinearizedReport {
    pub u: HarmonicField,
    pub iterations: usize,
    /// Relative residual of `(I + D⁻¹C)u̲ = −D⁻¹f̲`.
    pub residual: f64,
    pub method: BlockMethod,
}

/// Real-flattened coordinates: `(Re, Im)` per unknown per harmonic.
struct Flat {
    dofs: Vec<usize>,
    nx: usize,
    harmonics: usize,
}

impl Flat {
    fn len(&self) -> usize {
        2 * self.dofs.len() * (self.harmonics + 1)
    }

    fn pack(&self, u: &HarmonicField) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for m in 0..=self.harmonics {
            for &j in &self.dofs {
                let z = u.coeff(m)[j];
                out.push(z.re);
                out.push(z.im);
            }
        }
        out
    }

    fn unpack_reduced(&self, x: &[f64]) -> Vec<Vec<C64>> {
        let n = self.dofs.len();
        (0..=self.harmonics)
            .map(|m| (0..n).map(|k| C64::new(x[2 * (m * n + k)], x[2 * (m * n + k) + 1])).collect())
            .collect()
    }

    fn unpack(&self, x: &[f64]) -> HarmonicField {
        HarmonicField::from_reduced(self.unpack_reduced(x), &self.dofs, self.nx)
    }
}

/// Solves the linearized periodic equation around `u_base`:
///
/// * Westervelt: `τu̲_ttt + (u̲ + 2ηu·u̲)_tt − c²Δu̲ − bΔu̲_t + f̲ = 0`
/// * Kuznetsov: `τu̲_ttt + (u̲_t + 2η̃u_t·u̲_t + 2∇u·∇u̲)_t − c²Δu̲ − bΔu̲_t + f̲ = 0`
///
/// The coupling terms mix harmonics; the decoupled operator `D` preconditions
/// the block system. Linear models reduce to [`solve_linear_mgt`].
pub fn solve_linearized(
    u_base: &HarmonicField,
    f_dir: &HarmonicField,
    model: &Model,
    kind: Nonlinearity,
    opts: LinearizedOptions,
) -> Result<LinearizedReport> {
    let tau = if opts.include_relaxation { model.params().tau } else { 0.0 };
    let solver = LinearMgtSolver::with_tau(model, tau)?;
    solver.check_shape(u_base)?;
    solver.check_shape(f_dir)?;

    let trivially_decoupled = kind == Nonlinearity::Linear || u_base.is_zero();
    if trivially_decoupled {
        return Ok(LinearizedReport {
            u: solver.solve(f_dir)?,
            iterations: 0,
            residual: 0.0,
            method: BlockMethod::Decoupled,
        });
    }

    let flat = Flat { dofs: solver.dofs().to_vec(), nx: model.grid().nx(), harmonics: model.harmonics() };
    let precond_coupling = |x: &[f64]| -> Result<Vec<f64>> {
        let v = flat.unpack(x);
        let c = linearized_coupling(u_base, &v, model, kind)?;
        let mut out = Vec::with_capacity(x.len());
        for m in 0..=flat.harmonics {
            let rhs: Vec<C64> = flat.dofs.iter().map(|&j| c.coeff(m)[j]).collect();
            for z in solver.solve_block(m, &rhs) {
                out.push(z.re);
                out.push(z.im);
            }
        }
        Ok(out)
    };

    let b: Vec<f64> = flat.pack(&solver.solve(f_dir)?);
    let n = flat.len();
    let failure = std::cell::RefCell::new(None);
    let mut apply = |x: &[f64]| -> Vec<f64> {
        match precond_coupling(x) {
            Ok(y) => x.iter().zip(y).map(|(a, c)| a + c).collect(),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                vec![f64::NAN; x.len()]
            }
        }
    };

    let complex_unknowns = flat.dofs.len() * (flat.harmonics + 1);
    let (x, iterations, method) = if complex_unknowns <= opts.dense_threshold {
        let mut dense = DMatrix::<f64>::zeros(n, n);
        let mut e = vec![0.0; n];
        for k in 0..n {
            e[k] = 1.0;
            let col = apply(&e);
            dense.set_column(k, &nalgebra::DVector::from_vec(col));
            e[k] = 0.0;
        }
        let lu = dense.clone().lu();
        let x = lu
            .solve(&nalgebra::DVector::from_vec(b.clone()))
            .ok_or(Error::NonConvergedIteration { iterations: 0, residual: f64::INFINITY })?;
        (x.as_slice().to_vec(), 1, BlockMethod::Dense)
    } else {
        let out = gmres(&mut apply, &b, GmresOptions { tol: opts.tol, restart: opts.restart, max_iter: opts.max_iter });
        if !out.converged {
            return Err(Error::NonConvergedIteration { iterations: out.iterations, residual: out.residual });
        }
        (out.x, out.iterations, BlockMethod::Gmres)
    };
    let ax = apply(&x);
    if let Some(e) = failure.borrow_mut().take() {
        return Err(e);
    }
    let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let rn = ax.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let residual = if bn == 0.0 { rn } else { rn / bn };
    if !residual.is_finite() || residual > 1e-10 {
        return Err(Error::NonConvergedIteration { iterations, residual });
    }
    Ok(LinearizedReport { u: flat.unpack(&x), iterations, residual, method })
}
