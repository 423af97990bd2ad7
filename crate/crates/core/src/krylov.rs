//! Restarted GMRES for real systems given as a matrix-free operator.

#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    /// Target for `‖b − Ax‖ / ‖b‖`.
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self { tol: 1e-12, restart: 60, max_iter: 600 }
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final true relative residual.
    pub residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `A x = b` from `x = 0` with modified Gram-Schmidt Arnoldi and Givens rotations.
pub fn gmres(mut apply: impl FnMut(&[f64]) -> Vec<f64>, b: &[f64], opts: GmresOptions) -> GmresOutcome {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return GmresOutcome { x, iterations: 0, residual: 0.0, converged: true };
    }
    let mut iterations = 0;
    let mut rel = 1.0;

    while iterations < opts.max_iter {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= opts.tol {
            return GmresOutcome { x, iterations, residual: rel, converged: true };
        }
        let k_max = opts.restart.min(opts.max_iter - iterations).max(1);
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut h = vec![vec![0.0; k_max]; k_max + 1];
        let mut cs = vec![0.0; k_max];
        let mut sn = vec![0.0; k_max];
        let mut g = vec![0.0; k_max + 1];
        g[0] = beta;
        let mut k_used = 0;

        for k in 0..k_max {
            let mut w = apply(&v[k]);
            for (i, vi) in v.iter().enumerate() {
                let hik = dot(&w, vi);
                h[i][k] = hik;
                w.iter_mut().zip(vi).for_each(|(wj, vj)| *wj -= hik * vj);
            }
            let wn = norm(&w);
            h[k + 1][k] = wn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            iterations += 1;
            if g[k + 1].abs() / bnorm <= opts.tol * 0.5 || wn == 0.0 {
                break;
            }
            v.push(w.iter().map(|wj| wj / wn).collect());
        }

        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = ((i + 1)..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (yi, vi) in y.iter().zip(&v) {
            x.iter_mut().zip(vi).for_each(|(xj, vj)| *xj += yi * vj);
        }
        if k_used == 0 {
            break;
        }
    }
    let ax = apply(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let final_rel = norm(&r) / bnorm;
    let _ = rel;
    GmresOutcome { converged: final_rel <= opts.tol, x, iterations, residual: final_rel }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_nonsymmetric_system() {
        let n = 30;
        let a = |x: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let mut s = 4.0 * x[i];
                    if i > 0 {
                        s -= 1.5 * x[i - 1];
                    }
                    if i + 1 < n {
                        s += 0.7 * x[i + 1];
                    }
                    s
                })
                .collect()
        };
        let xs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = a(&xs);
        let out = gmres(a, &b, GmresOptions { tol: 1e-13, restart: 7, max_iter: 300 });
        assert!(out.converged);
        let err = xs.iter().zip(&out.x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-11, "{err}");
    }

    #[test]
    fn zero_rhs() {
        let out = gmres(|x| x.to_vec(), &[0.0; 4], GmresOptions::default());
        assert_eq!(out.x, vec![0.0; 4]);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn reports_non_convergence() {
        // rotation by 90 degrees stalls GMRES(1)
        let rot = |x: &[f64]| vec![-x[1], x[0]];
        let out = gmres(rot, &[1.0, 0.0], GmresOptions { tol: 1e-12, restart: 1, max_iter: 20 });
        assert!(!out.converged);
        assert!(out.residual > 0.5);
    }
}
