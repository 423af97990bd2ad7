//! Finite-difference spatial operators on the uniform grid.
//!
//! The negative Laplacian uses the `(−1, 2, −1)/h²` stencil in the interior.
//! At a non-Dirichlet endpoint the condition `∂_ν u + κ u = 0` with the
//! per-harmonic Robin coefficient `κ_m = imωβ + γ` is imposed by eliminating a
//! ghost node, which keeps the row second-order accurate. Dirichlet endpoints
//! are removed from the unknowns.
//!
//! Ghost-node rows are not symmetric as written; scaling them by `1/2` (the
//! trapezoidal weight) gives a symmetric matrix, i.e. the operator is
//! self-adjoint in the trapezoidal inner product. [`SpatialOperator::weights`]
//! holds those row weights.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::{BoundaryCondition, Grid};
use crate::tridiag::{Tridiagonal, TridiagonalLu};

/// `κ_m = imωβ + γ`.
pub fn robin_coefficient(bc: &BoundaryCondition, m: usize, omega: f64) -> C64 {
    C64::new(bc.gamma, m as f64 * omega * bc.beta)
}

/// Discrete `−Δ` for one harmonic, restricted to the non-Dirichlet nodes.
#[derive(Debug, Clone)]
pub struct SpatialOperator {
    pub matrix: Tridiagonal,
    pub harmonic: usize,
    /// Full-grid node index of each unknown.
    pub dofs: Vec<usize>,
    /// Row weights making `diag(weights)·matrix` symmetric.
    pub weights: Vec<f64>,
}

pub fn assemble_laplacian(
    grid: &Grid,
    left: &BoundaryCondition,
    right: &BoundaryCondition,
    m: usize,
    omega: f64,
) -> SpatialOperator {
    let nx = grid.nx();
    let h = grid.h();
    let ih2 = 1.0 / (h * h);
    let lo = usize::from(left.is_dirichlet());
    let hi = nx - usize::from(right.is_dirichlet());
    let dofs: Vec<usize> = (lo..hi).collect();
    let n = dofs.len();
    let mut a = Tridiagonal::zeros(n);
    let mut weights = vec![1.0; n];

    for (r, &j) in dofs.iter().enumerate() {
        if j == 0 {
            let kappa = robin_coefficient(left, m, omega);
            a.diag[r] = C64::new(2.0 * ih2, 0.0) + kappa * (2.0 / h);
            a.upper[r] = C64::new(-2.0 * ih2, 0.0);
            weights[r] = 0.5;
        } else if j == nx - 1 {
            let kappa = robin_coefficient(right, m, omega);
            a.diag[r] = C64::new(2.0 * ih2, 0.0) + kappa * (2.0 / h);
            a.lower[r - 1] = C64::new(-2.0 * ih2, 0.0);
            weights[r] = 0.5;
        } else {
            a.diag[r] = C64::new(2.0 * ih2, 0.0);
            if r > 0 {
                a.lower[r - 1] = C64::new(-ih2, 0.0);
            }
            if r + 1 < n {
                a.upper[r] = C64::new(-ih2, 0.0);
            }
        }
    }
    SpatialOperator { matrix: a, harmonic: m, dofs, weights }
}

impl SpatialOperator {
    pub fn n(&self) -> usize {
        self.dofs.len()
    }

    /// `diag(weights)·matrix`.
    pub fn symmetric_form(&self) -> Tridiagonal {
        let w: Vec<C64> = self.weights.iter().map(|&w| C64::new(w, 0.0)).collect();
        self.matrix.scale_rows(&w)
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.matrix.apply(x)
    }

    pub fn restrict(&self, full: &[C64]) -> Vec<C64> {
        self.dofs.iter().map(|&j| full[j]).collect()
    }

    pub fn scatter(&self, reduced: &[C64], nx: usize) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); nx];
        for (&j, z) in self.dofs.iter().zip(reduced) {
            out[j] = *z;
        }
        out
    }

    /// `Δ_h v` at every node of a full-grid vector: the boundary-condition
    /// rows where the node is an unknown, a one-sided second difference at
    /// Dirichlet nodes.
    pub fn nodal_laplacian(&self, grid: &Grid, v: &[C64]) -> Vec<C64> {
        let nx = grid.nx();
        let neg = self.apply(&self.restrict(v));
        let mut out = laplacian_free(grid, v);
        for (&j, z) in self.dofs.iter().zip(neg) {
            out[j] = -z;
        }
        let _ = nx;
        out
    }
}

/// Boundary rows of `−Δ_h` carry `(2/h)·β·u_t` for absorbing endpoints;
/// returns that diagonal (zero elsewhere) on the unknowns of `op`.
pub fn absorbing_diagonal(grid: &Grid, left: &BoundaryCondition, right: &BoundaryCondition, op: &SpatialOperator) -> Vec<f64> {
    let nx = grid.nx();
    let h = grid.h();
    op.dofs
        .iter()
        .map(|&j| {
            if j == 0 {
                2.0 * left.beta / h
            } else if j == nx - 1 {
                2.0 * right.beta / h
            } else {
                0.0
            }
        })
        .collect()
}

/// Nodal gradient: central differences inside, second-order one-sided at the ends.
pub fn gradient(grid: &Grid, v: &[C64]) -> Vec<C64> {
    let n = v.len();
    let h = grid.h();
    let mut g = vec![C64::new(0.0, 0.0); n];
    for j in 1..n - 1 {
        g[j] = (v[j + 1] - v[j - 1]) / (2.0 * h);
    }
    g[0] = (v[1] * 4.0 - v[0] * 3.0 - v[2]) / (2.0 * h);
    g[n - 1] = (v[n - 1] * 3.0 - v[n - 2] * 4.0 + v[n - 3]) / (2.0 * h);
    g
}

pub fn gradient_real(grid: &Grid, v: &[f64]) -> Vec<f64> {
    let z: Vec<C64> = v.iter().map(|&x| C64::new(x, 0.0)).collect();
    gradient(grid, &z).into_iter().map(|z| z.re).collect()
}

/// `Δv` without boundary conditions: central inside, one-sided at the ends
/// (second order when `Nx ≥ 4`).
pub fn laplacian_free(grid: &Grid, v: &[C64]) -> Vec<C64> {
    let n = v.len();
    let ih2 = 1.0 / (grid.h() * grid.h());
    let mut out = vec![C64::new(0.0, 0.0); n];
    for j in 1..n - 1 {
        out[j] = (v[j - 1] - v[j] * 2.0 + v[j + 1]) * ih2;
    }
    if n >= 4 {
        out[0] = (v[0] * 2.0 - v[1] * 5.0 + v[2] * 4.0 - v[3]) * ih2;
        out[n - 1] = (v[n - 1] * 2.0 - v[n - 2] * 5.0 + v[n - 3] * 4.0 - v[n - 4]) * ih2;
    } else {
        out[0] = out[1];
        out[n - 1] = out[n - 2];
    }
    out
}

pub fn laplacian_free_real(grid: &Grid, v: &[f64]) -> Vec<f64> {
    let z: Vec<C64> = v.iter().map(|&x| C64::new(x, 0.0)).collect();
    laplacian_free(grid, &z).into_iter().map(|z| z.re).collect()
}

/// Trapezoidal `∫ |v|²`.
pub fn l2_sq(grid: &Grid, v: &[C64]) -> f64 {
    grid.weights().iter().zip(v).map(|(w, z)| w * z.norm_sqr()).sum()
}

/// Trapezoidal `∫ weight·|v|²` with a nodal weight.
pub fn weighted_l2_sq(grid: &Grid, weight: &[f64], v: &[C64]) -> f64 {
    grid.weights().iter().zip(weight).zip(v).map(|((w, a), z)| w * a * z.norm_sqr()).sum()
}

/// Trapezoidal `∫ Re(p·conj(q))`.
pub fn l2_inner(grid: &Grid, p: &[C64], q: &[C64]) -> f64 {
    grid.weights().iter().zip(p).zip(q).map(|((w, a), b)| w * (a * b.conj()).re).sum()
}

pub fn h1_semi_sq(grid: &Grid, v: &[C64]) -> f64 {
    l2_sq(grid, &gradient(grid, v))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialNorms {
    pub l2: f64,
    pub h1_semi: f64,
    pub left: C64,
    pub right: C64,
}

pub fn spatial_norms(v: &[C64], grid: &Grid) -> SpatialNorms {
    SpatialNorms {
        l2: l2_sq(grid, v).sqrt(),
        h1_semi: h1_semi_sq(grid, v).sqrt(),
        left: v[0],
        right: v[v.len() - 1],
    }
}

pub fn spatial_norms_real(v: &[f64], grid: &Grid) -> SpatialNorms {
    let z: Vec<C64> = v.iter().map(|&x| C64::new(x, 0.0)).collect();
    spatial_norms(&z, grid)
}

/// Discrete `H¹(Ω)*` norm: `‖v‖² = ⟨v, z⟩` with `(I − Δ_h) z = v` under the
/// mean-mode boundary rows.
#[derive(Debug, Clone)]
pub struct H1DualNorm {
    op: SpatialOperator,
    lu: TridiagonalLu,
    grid: Grid,
}

impl H1DualNorm {
    pub fn new(grid: &Grid, left: &BoundaryCondition, right: &BoundaryCondition) -> Self {
        let op = assemble_laplacian(grid, left, right, 0, 0.0);
        let shift = vec![C64::new(1.0, 0.0); op.n()];
        // I − Δ_h is an M-matrix shift of a nonnegative operator
        let lu = op.matrix.shifted(&shift).factor().expect("I - Δ_h is nonsingular");
        Self { op, lu, grid: grid.clone() }
    }

    /// Squared norm of a full-grid vector; Dirichlet nodes are ignored.
    pub fn norm_sq(&self, v: &[C64]) -> f64 {
        let w = self.grid.weights();
        let reduced = self.op.restrict(v);
        let z = self.lu.solve(&reduced);
        let s: f64 = self
            .op
            .dofs
            .iter()
            .zip(reduced.iter().zip(&z))
            .map(|(&j, (a, b))| w[j] * (a.conj() * b).re)
            .sum();
        s.max(0.0)
    }

    pub fn norm(&self, v: &[C64]) -> f64 {
        self.norm_sq(v).sqrt()
    }
}

pub fn dual_norm_h1star(v: &[C64], grid: &Grid, left: &BoundaryCondition, right: &BoundaryCondition) -> Result<f64> {
    if v.len() != grid.nx() {
        return Err(Error::ShapeMismatch(format!("vector has {} entries, grid has {}", v.len(), grid.nx())));
    }
    Ok(H1DualNorm::new(grid, left, right).norm(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn real(v: &[f64]) -> Vec<C64> {
        v.iter().map(|&x| C64::new(x, 0.0)).collect()
    }

    #[test]
    fn dirichlet_stencil() {
        let g = Grid::new(1.0, 5).unwrap();
        let d = BoundaryCondition::dirichlet();
        let op = assemble_laplacian(&g, &d, &d, 3, 2.0);
        assert_eq!(op.n(), 3);
        assert_eq!(op.dofs, vec![1, 2, 3]);
        let h2 = 0.25 * 0.25;
        for z in &op.matrix.diag {
            assert!((z - C64::new(2.0 / h2, 0.0)).norm() < 1e-12);
        }
        for z in op.matrix.lower.iter().chain(&op.matrix.upper) {
            assert!((z - C64::new(-1.0 / h2, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn impedance_solution_is_second_order() {
        // the ghost-node row has a first-order local error, the solution is still second order
        let gamma = 1.0;
        let k = crate::studies::impedance_wavenumber(1.0, gamma);
        let mut errs = vec![];
        for nx in [33, 65, 129] {
            let g = Grid::new(1.0, nx).unwrap();
            let op = assemble_laplacian(&g, &BoundaryCondition::dirichlet(), &BoundaryCondition::impedance(gamma), 0, 1.0);
            let exact = real(&g.sample(|x| (k * x).sin()));
            let rhs: Vec<C64> = op.restrict(&exact).iter().map(|z| z * (k * k)).collect();
            let v = op.matrix.factor().unwrap().solve(&rhs);
            let e = v.iter().zip(op.restrict(&exact)).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            errs.push(e);
        }
        assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
    }

    #[test]
    fn absorbing_coefficient_is_frequency_dependent() {
        let bc = BoundaryCondition::absorbing(1.0, 0.0);
        assert_eq!(robin_coefficient(&bc, 1, 1.0), C64::new(0.0, 1.0));
        assert_eq!(robin_coefficient(&bc, 0, 1.0), C64::new(0.0, 0.0));
        let bc = BoundaryCondition::absorbing(1.0, 0.5);
        assert_eq!(robin_coefficient(&bc, 2, 3.0), C64::new(0.5, 6.0));
    }

    #[test]
    fn symmetric_for_real_robin_data() {
        let g = Grid::new(2.0, 9).unwrap();
        for (l, r) in [
            (BoundaryCondition::impedance(0.7), BoundaryCondition::neumann()),
            (BoundaryCondition::absorbing(2.0, 0.3), BoundaryCondition::impedance(1.5)),
            (BoundaryCondition::dirichlet(), BoundaryCondition::impedance(1.0)),
        ] {
            let s = assemble_laplacian(&g, &l, &r, 0, 3.0).symmetric_form();
            for i in 0..s.n() - 1 {
                assert!((s.lower[i] - s.upper[i]).norm() <= 1e-13 * s.norm_inf());
            }
        }
    }

    #[test]
    fn consistency_order() {
        // f = sin(πx) with Dirichlet: −f'' = π² f
        let mut errs = vec![];
        for nx in [17, 33, 65, 129] {
            let g = Grid::new(1.0, nx).unwrap();
            let d = BoundaryCondition::dirichlet();
            let op = assemble_laplacian(&g, &d, &d, 0, 1.0);
            let f = real(&g.sample(|x| (PI * x).sin()));
            let got = op.apply(&op.restrict(&f));
            let e = op
                .dofs
                .iter()
                .zip(&got)
                .map(|(&j, z)| (z.re - PI * PI * f[j].re).abs())
                .fold(0.0, f64::max);
            errs.push(e);
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.8, "{errs:?}");
        }
    }

    #[test]
    fn neumann_mean_mode_is_singular() {
        let g = Grid::new(1.0, 9).unwrap();
        let n = BoundaryCondition::neumann();
        assert!(assemble_laplacian(&g, &n, &n, 0, 1.0).matrix.factor().is_none());
        // absorbing endpoints also lose their anchor at m = 0
        let a = BoundaryCondition::absorbing(1.0, 0.0);
        assert!(assemble_laplacian(&g, &a, &n, 0, 1.0).matrix.factor().is_none());
        assert!(assemble_laplacian(&g, &a, &n, 1, 1.0).matrix.factor().is_some());
    }

    #[test]
    fn norms_of_simple_profiles() {
        let g = Grid::new(1.0, 2049).unwrap();
        let s = spatial_norms_real(&g.sample(|x| (PI * x).sin()), &g);
        assert!((s.l2 - 0.5f64.sqrt()).abs() < 1e-6);
        assert!((s.h1_semi - PI * 0.5f64.sqrt()).abs() < 1e-5);

        let g2 = Grid::new(3.0, 11).unwrap();
        let k = spatial_norms_real(&vec![2.0; 11], &g2);
        assert!((k.l2 - 2.0 * 3f64.sqrt()).abs() < 1e-14);
        assert_eq!(k.h1_semi, 0.0);

        let lin = spatial_norms_real(&g.sample(|x| x), &g);
        assert!((lin.h1_semi - 1.0).abs() < 1e-12);
        assert_eq!(lin.right.re, 1.0);
    }

    #[test]
    fn dual_norm_of_eigenfunction() {
        let d = BoundaryCondition::dirichlet();
        let exact = 0.5 / (1.0 + PI * PI);
        let mut errs = vec![];
        for nx in [33, 65, 129, 257] {
            let g = Grid::new(1.0, nx).unwrap();
            let v = real(&g.sample(|x| (PI * x).sin()));
            let n = dual_norm_h1star(&v, &g, &d, &d).unwrap();
            errs.push((n * n - exact).abs());
        }
        assert!(errs[3] < 1e-5, "{errs:?}");
        assert!(errs[0] / errs[1] > 3.5);
        assert!((exact - 0.0460).abs() < 1e-5);
    }

    #[test]
    fn dual_norm_basic_properties() {
        let g = Grid::new(1.0, 21).unwrap();
        let l = BoundaryCondition::impedance(1.0);
        let r = BoundaryCondition::neumann();
        let zero = vec![C64::new(0.0, 0.0); 21];
        assert_eq!(dual_norm_h1star(&zero, &g, &l, &r).unwrap(), 0.0);
        let v: Vec<C64> = (0..21).map(|j| C64::new((j as f64).sin(), (j as f64 * 0.3).cos())).collect();
        let n1 = dual_norm_h1star(&v, &g, &l, &r).unwrap();
        let sv: Vec<C64> = v.iter().map(|z| z * -2.5).collect();
        assert!((dual_norm_h1star(&sv, &g, &l, &r).unwrap() - 2.5 * n1).abs() < 1e-13);
        assert!(dual_norm_h1star(&v[..5], &g, &l, &r).is_err());
    }

    #[test]
    fn dual_norm_bounded_by_l2_uniformly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let l = BoundaryCondition::dirichlet();
        let r = BoundaryCondition::impedance(2.0);
        let mut worst = 0.0f64;
        for nx in [17, 65, 257, 1025] {
            let g = Grid::new(1.0, nx).unwrap();
            let dn = H1DualNorm::new(&g, &l, &r);
            for _ in 0..20 {
                let v: Vec<C64> = (0..nx).map(|_| C64::new(rng.random_range(-1.0..1.0), 0.0)).collect();
                worst = worst.max(dn.norm(&v) / l2_sq(&g, &v).sqrt());
            }
        }
        assert!(worst <= 1.0 + 1e-12, "ratio {worst}");
    }

    #[test]
    fn nodal_laplacian_uses_boundary_rows() {
        let g = Grid::new(1.0, 65).unwrap();
        let d = BoundaryCondition::dirichlet();
        let op = assemble_laplacian(&g, &d, &d, 0, 1.0);
        let v = real(&g.sample(|x| (PI * x).sin()));
        let lap = op.nodal_laplacian(&g, &v);
        for (j, z) in lap.iter().enumerate() {
            assert!((z.re + PI * PI * v[j].re).abs() < 5e-3, "node {j}");
        }
    }

    proptest! {
        #[test]
        fn gradient_is_exact_for_quadratics(a in -2.0..2.0f64, b in -2.0..2.0f64, c in -2.0..2.0f64) {
            let g = Grid::new(1.5, 13).unwrap();
            let v = real(&g.sample(|x| a + b * x + c * x * x));
            let gv = gradient(&g, &v);
            for j in 0..13 {
                prop_assert!((gv[j].re - (b + 2.0 * c * g.x(j))).abs() < 1e-11);
            }
            let lap = laplacian_free(&g, &v);
            for z in lap {
                prop_assert!((z.re - 2.0 * c).abs() < 1e-9);
            }
        }
    }
}
