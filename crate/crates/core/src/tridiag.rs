//! Complex tridiagonal matrices and their LU factorization with partial
//! pivoting (the `gttrf`/`gttrs` scheme: row interchanges create one extra
//! superdiagonal).

use num_complex::Complex64 as C64;

#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    /// Subdiagonal, `lower[i] = A[i+1][i]`.
    pub lower: Vec<C64>,
    pub diag: Vec<C64>,
    /// Superdiagonal, `upper[i] = A[i][i+1]`.
    pub upper: Vec<C64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        let z = C64::new(0.0, 0.0);
        Self { lower: vec![z; n.saturating_sub(1)], diag: vec![z; n], upper: vec![z; n.saturating_sub(1)] }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let n = self.n();
        assert_eq!(x.len(), n);
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Applies the matrix to a real vector.
    pub fn apply_real(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].re * x[i];
                if i > 0 {
                    s += self.lower[i - 1].re * x[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i].re * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Max-row-sum norm.
    pub fn norm_inf(&self) -> f64 {
        let n = self.n();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].norm();
                if i > 0 {
                    s += self.lower[i - 1].norm();
                }
                if i + 1 < n {
                    s += self.upper[i].norm();
                }
                s
            })
            .fold(0.0, f64::max)
    }

    /// `D·A` for a diagonal `D`.
    pub fn scale_rows(&self, d: &[C64]) -> Self {
        let mut out = self.clone();
        for i in 0..self.n() {
            out.diag[i] *= d[i];
            if i > 0 {
                out.lower[i - 1] *= d[i];
            }
            if i + 1 < self.n() {
                out.upper[i] *= d[i];
            }
        }
        out
    }

    /// Adds a diagonal.
    pub fn shifted(&self, d: &[C64]) -> Self {
        let mut out = self.clone();
        out.diag.iter_mut().zip(d).for_each(|(a, b)| *a += b);
        out
    }

    pub fn factor(&self) -> Option<TridiagonalLu> {
        TridiagonalLu::new(self)
    }
}

#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    dl: Vec<C64>,
    d: Vec<C64>,
    du: Vec<C64>,
    du2: Vec<C64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    /// Returns `None` if a pivot vanishes or is not finite.
    pub fn new(a: &Tridiagonal) -> Option<Self> {
        let n = a.n();
        let mut dl = a.lower.clone();
        let mut d = a.diag.clone();
        let mut du = a.upper.clone();
        let mut du2 = vec![C64::new(0.0, 0.0); n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];

        for i in 0..n.saturating_sub(1) {
            if d[i].l1_norm() >= dl[i].l1_norm() {
                if d[i].l1_norm() == 0.0 {
                    return None;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if d.iter().any(|p| p.l1_norm() == 0.0 || !p.is_finite()) {
            return None;
        }
        Some(Self { dl, d, du, du2, swapped })
    }

    pub fn solve_in_place(&self, b: &mut [C64]) {
        let n = self.d.len();
        assert_eq!(b.len(), n);
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] = b[i + 1] - self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves with a real right-hand side, for real matrices.
    pub fn solve_real(&self, b: &[f64]) -> Vec<f64> {
        let mut x: Vec<C64> = b.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.solve_in_place(&mut x);
        x.into_iter().map(|z| z.re).collect()
    }

    /// Ratio of the largest to the smallest pivot magnitude.
    pub fn pivot_ratio(&self) -> f64 {
        let (lo, hi) = self
            .d
            .iter()
            .map(|p| p.norm())
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
        hi / lo
    }
}
