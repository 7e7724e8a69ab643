//! Matrix-free linear algebra: a minimal vector-space abstraction and a
//! full-memory GMRES iteration with Givens rotations.

use crate::error::{Result, TorusError};
use crate::grid::TorusField;

/// The operations GMRES needs from a vector type.
pub trait LinVec: Clone {
    /// Euclidean inner product.
    fn dot(&self, other: &Self) -> f64;
    /// In-place scaling `self *= c`.
    fn scale_mut(&mut self, c: f64);
    /// In-place update `self += c * other`.
    fn axpy_mut(&mut self, c: f64, other: &Self);
    /// Euclidean norm.
    fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

impl LinVec for TorusField {
    fn dot(&self, other: &Self) -> f64 {
        self.values()
            .iter()
            .zip(other.values())
            .map(|(a, b)| a * b)
            .sum()
    }

    fn scale_mut(&mut self, c: f64) {
        for v in self.values_mut() {
            *v *= c;
        }
    }

    fn axpy_mut(&mut self, c: f64, other: &Self) {
        for (a, b) in self.values_mut().iter_mut().zip(other.values()) {
            *a += c * b;
        }
    }
}

/// GMRES stopping parameters.
#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    /// Relative residual tolerance (against the right-hand side norm).
    pub tol: f64,
    /// Maximum Krylov dimension (no restarts).
    pub max_iter: usize,
}

/// Solve `A x = b` for the operator given by `apply`, starting from zero.
///
/// Returns the solution and the Krylov dimension used. Errors with
/// [`TorusError::NonConvergence`] when the relative residual has not
/// reached `opts.tol` within `opts.max_iter` steps.
pub fn gmres<V, F>(apply: &F, b: &V, opts: &GmresOptions) -> Result<(V, usize)>
where
    V: LinVec,
    F: Fn(&V) -> Result<V>,
{
    let beta = b.norm();
    let zero = {
        let mut z = b.clone();
        z.scale_mut(0.0);
        z
    };
    if beta == 0.0 {
        return Ok((zero, 0));
    }
    let mut basis: Vec<V> = Vec::with_capacity(opts.max_iter + 1);
    {
        let mut v0 = b.clone();
        v0.scale_mut(1.0 / beta);
        basis.push(v0);
    }
    // Upper-triangular columns of R after Givens rotations.
    let mut r_cols: Vec<Vec<f64>> = Vec::with_capacity(opts.max_iter);
    let mut cs: Vec<f64> = Vec::with_capacity(opts.max_iter);
    let mut sn: Vec<f64> = Vec::with_capacity(opts.max_iter);
    let mut g: Vec<f64> = vec![beta];
    let mut residual = beta;

    for j in 0..opts.max_iter {
        let mut w = apply(&basis[j])?;
        let mut col = vec![0.0; j + 1];
        for (i, vi) in basis.iter().enumerate().take(j + 1) {
            let hij = w.dot(vi);
            w.axpy_mut(-hij, vi);
            col[i] = hij;
        }
        let h_next = w.norm();
        for i in 0..j {
            let t = cs[i] * col[i] + sn[i] * col[i + 1];
            col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
            col[i] = t;
        }
        let r = col[j].hypot(h_next);
        let breakdown = r < 1e-300;
        let (c_j, s_j) = if breakdown {
            (1.0, 0.0)
        } else {
            (col[j] / r, h_next / r)
        };
        col[j] = r;
        cs.push(c_j);
        sn.push(s_j);
        g.push(-s_j * g[j]);
        g[j] *= c_j;
        residual = g[j + 1].abs();
        r_cols.push(col);

        let lucky = h_next < 1e-300;
        if !lucky {
            w.scale_mut(1.0 / h_next);
            basis.push(w);
        }
        if residual <= opts.tol * beta || lucky || breakdown {
            // Back-substitute R y = g.
            let m = r_cols.len();
            let mut y = vec![0.0; m];
            for i in (0..m).rev() {
                let mut s = g[i];
                for k in (i + 1)..m {
                    s -= r_cols[k][i] * y[k];
                }
                let d = r_cols[i][i];
                y[i] = if d.abs() < 1e-300 { 0.0 } else { s / d };
            }
            let mut x = zero;
            for (i, yi) in y.iter().enumerate() {
                x.axpy_mut(*yi, &basis[i]);
            }
            return Ok((x, m));
        }
    }
    Err(TorusError::NonConvergence {
        iters: opts.max_iter,
        residual: residual / beta,
    })
}
