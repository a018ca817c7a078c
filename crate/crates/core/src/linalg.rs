//! Small linear-algebra kernels: restarted GMRES and a periodic tridiagonal
//! solver.

use crate::error::{HomogError, Result};

#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    pub restart: usize,
    pub max_iter: usize,
    /// Relative residual target `‖b − Ax‖ ≤ rel_tol ‖b‖`.
    pub rel_tol: f64,
    /// Absolute floor on the residual target.
    pub abs_tol: f64,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            restart: 40,
            max_iter: 2000,
            rel_tol: 1e-12,
            abs_tol: 1e-300,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GmresOutcome {
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Right-preconditioned restarted GMRES for `A x = b`.
///
/// `apply` writes `A v` into its second argument, `precond` writes `M^{-1} v`.
/// `x` holds the initial guess on entry and the solution on exit.
pub fn gmres<A, P>(
    mut apply: A,
    mut precond: P,
    b: &[f64],
    x: &mut [f64],
    opts: GmresOptions,
) -> Result<GmresOutcome>
where
    A: FnMut(&[f64], &mut [f64]),
    P: FnMut(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = norm(b);
    let target = (opts.rel_tol * bnorm).max(opts.abs_tol);
    let m = opts.restart.max(1);

    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut hess = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];
    let mut total = 0;

    loop {
        apply(x, &mut w);
        for i in 0..n {
            r[i] = b[i] - w[i];
        }
        let beta = norm(&r);
        if beta <= target {
            return Ok(GmresOutcome {
                iterations: total,
                residual: beta,
            });
        }
        if total >= opts.max_iter {
            return Err(HomogError::LinearSolverFailed {
                iterations: total,
                residual: beta,
            });
        }
        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;
        let mut k_used = 0;
        let mut resid = beta;
        for k in 0..m {
            precond(&basis[k], &mut z);
            apply(&z, &mut w);
            for (j, vj) in basis.iter().enumerate() {
                let hjk = dot(&w, vj);
                hess[j][k] = hjk;
                for i in 0..n {
                    w[i] -= hjk * vj[i];
                }
            }
            let hnext = norm(&w);
            hess[k + 1][k] = hnext;
            for j in 0..k {
                let t = cs[j] * hess[j][k] + sn[j] * hess[j + 1][k];
                hess[j + 1][k] = -sn[j] * hess[j][k] + cs[j] * hess[j + 1][k];
                hess[j][k] = t;
            }
            let denom = (hess[k][k].powi(2) + hess[k + 1][k].powi(2)).sqrt();
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = hess[k][k] / denom;
                sn[k] = hess[k + 1][k] / denom;
            }
            hess[k][k] = cs[k] * hess[k][k] + sn[k] * hess[k + 1][k];
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            resid = g[k + 1].abs();
            total += 1;
            k_used = k + 1;
            if resid <= target || hnext == 0.0 || total >= opts.max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }
        // back-substitution for the Krylov coefficients
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= hess[i][j] * y[j];
            }
            y[i] = s / hess[i][i];
        }
        let mut update = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                update[i] += yj * basis[j][i];
            }
        }
        precond(&update, &mut z);
        for i in 0..n {
            x[i] += z[i];
        }
        let _ = resid;
    }
}

/// Geometrically decaying sweeps otherwise get stuck at the smallest
/// subnormal, which is two orders of magnitude slower to operate on.
#[inline]
fn flush(v: f64) -> f64 {
    if v.abs() < 1e-280 {
        0.0
    } else {
        v
    }
}

/// Solver for periodic tridiagonal systems
/// `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]` (indices mod n),
/// using the Sherman–Morrison correction of the Thomas algorithm.
pub struct CyclicTridiagonal {
    n: usize,
    cprime: Vec<f64>,
    work: Vec<f64>,
    u: Vec<f64>,
}

impl CyclicTridiagonal {
    pub fn new(n: usize) -> Self {
        assert!(n >= 3, "cyclic tridiagonal needs n >= 3");
        Self {
            n,
            cprime: vec![0.0; n],
            work: vec![0.0; n],
            u: vec![0.0; n],
        }
    }

    fn thomas(
        cprime: &mut [f64],
        lower: &[f64],
        diag: &[f64],
        upper: &[f64],
        rhs: &mut [f64],
    ) {
        let n = rhs.len();
        cprime[0] = upper[0] / diag[0];
        rhs[0] /= diag[0];
        for i in 1..n {
            let m = diag[i] - lower[i] * cprime[i - 1];
            cprime[i] = upper[i] / m;
            rhs[i] = flush((rhs[i] - lower[i] * rhs[i - 1]) / m);
        }
        for i in (0..n - 1).rev() {
            rhs[i] = flush(rhs[i] - cprime[i] * rhs[i + 1]);
        }
    }

    /// Solve in place: `x` holds the right-hand side on entry.
    pub fn solve(&mut self, lower: &[f64], diag: &[f64], upper: &[f64], x: &mut [f64]) {
        let n = self.n;
        debug_assert!(lower.len() == n && diag.len() == n && upper.len() == n && x.len() == n);
        let alpha = upper[n - 1]; // couples row n-1 to x[0]
        let beta = lower[0]; // couples row 0 to x[n-1]
        let gamma = -diag[0];
        // modified diagonal
        self.work.copy_from_slice(diag);
        self.work[0] -= gamma;
        self.work[n - 1] -= alpha * beta / gamma;
        let mdiag = std::mem::take(&mut self.work);

        Self::thomas(&mut self.cprime, lower, &mdiag, upper, x);
        self.u.iter_mut().for_each(|v| *v = 0.0);
        self.u[0] = gamma;
        self.u[n - 1] = alpha;
        Self::thomas(&mut self.cprime, lower, &mdiag, upper, &mut self.u);
        let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + self.u[0] + beta * self.u[n - 1] / gamma);
        for i in 0..n {
            x[i] -= fact * self.u[i];
        }
        self.work = mdiag;
    }
}
