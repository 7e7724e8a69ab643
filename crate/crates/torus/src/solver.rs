//! Residuals, Newton solvers, and Morse index counts for the two-parameter
//! mean field equation and its equivalent Liouville-type system.
//!
//! The scalar equation for the mean-zero unknown \(u\) is
//! \[
//!   F(u) = \Delta u + \rho_1\Big(\frac{h_1 e^u}{\int h_1 e^u} - 1\Big)
//!        - \rho_2\Big(\frac{h_2 e^{-u}}{\int h_2 e^{-u}} - 1\Big) = 0,
//! \]
//! and the associated system in \((v_1, v_2)\) with \(u = v_1 - v_2\) is
//! \[
//!   \Delta v_1 + \rho_1(k_1 - 1) = 0, \qquad
//!   \Delta v_2 + \rho_2(k_2 - 1) = 0,
//! \]
//! where \(k_1 = h_1 e^{v_1 - v_2}/\int h_1 e^{v_1 - v_2}\) and
//! \(k_2 = h_2 e^{v_2 - v_1}/\int h_2 e^{v_2 - v_1}\). The linearization of
//! \(F\) is \(\Delta + \rho_1 P_1 + \rho_2 P_2\) with the positive
//! semidefinite projectors \(P_i \phi = k_i(\phi - \int k_i \phi)\), and the
//! Morse index of a solution is the number of positive eigenvalues of the
//! linearization (equivalently, negative directions of the energy Hessian).
//!
//! Linear solves use dense LU factorizations up to resolution 48 and a
//! Laplacian-preconditioned matrix-free GMRES beyond; eigenvalue counts use
//! dense LAPACK routines and are therefore restricted to resolutions at
//! most 48.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, TorusError};
use crate::fft::Spectral;
use crate::grid::{torus_distance, TorusField, TorusGrid};
use crate::linalg::{gmres, GmresOptions, LinVec};

/// Largest resolution for dense linear algebra (assembled Jacobians,
/// eigenvalue counts).
pub const DENSE_LIMIT: usize = 48;
/// Eigenvalues within this distance of zero count as degenerate.
pub const EIG_THRESHOLD: f64 = 1e-8;
/// Iterates with `|u|` beyond this are treated as numerical blow-up.
pub const BLOWUP_GUARD: f64 = 50.0;

/// Problem data: coupling constants and positive weight fields on a common
/// grid.
#[derive(Debug, Clone)]
pub struct ProblemParams {
    rho1: f64,
    rho2: f64,
    h1: TorusField,
    h2: TorusField,
}

impl ProblemParams {
    /// Validate and bundle problem data.
    ///
    /// Requires `rho1 > 0`, `rho2 >= 0`, strictly positive weights, and
    /// matching grids.
    pub fn new(rho1: f64, rho2: f64, h1: TorusField, h2: TorusField) -> Result<Self> {
        if !(rho1 > 0.0) || !rho1.is_finite() {
            return Err(TorusError::InvalidParameter {
                name: "rho1",
                value: rho1,
            });
        }
        if !(rho2 >= 0.0) || !rho2.is_finite() {
            return Err(TorusError::InvalidParameter {
                name: "rho2",
                value: rho2,
            });
        }
        if h1.grid().n() != h2.grid().n() {
            return Err(TorusError::GridMismatch {
                left: h1.grid().n(),
                right: h2.grid().n(),
            });
        }
        if h1.min() <= 0.0 {
            return Err(TorusError::NonPositiveWeight {
                name: "h1",
                min: h1.min(),
            });
        }
        if h2.min() <= 0.0 {
            return Err(TorusError::NonPositiveWeight {
                name: "h2",
                min: h2.min(),
            });
        }
        Ok(Self { rho1, rho2, h1, h2 })
    }

    /// First coupling constant.
    pub fn rho1(&self) -> f64 {
        self.rho1
    }

    /// Second coupling constant.
    pub fn rho2(&self) -> f64 {
        self.rho2
    }

    /// First weight field.
    pub fn h1(&self) -> &TorusField {
        &self.h1
    }

    /// Second weight field.
    pub fn h2(&self) -> &TorusField {
        &self.h2
    }

    /// The common grid.
    pub fn grid(&self) -> TorusGrid {
        self.h1.grid()
    }

    /// Copy with a different first coupling constant.
    pub fn with_rho1(&self, rho1: f64) -> Result<Self> {
        Self::new(rho1, self.rho2, self.h1.clone(), self.h2.clone())
    }
}

/// Normalized density \(h e^{s u} / \int h e^{s u}\) with a blow-up guard on
/// the exponent.
fn normalized_density(h: &TorusField, u: &TorusField, sign: f64) -> Result<TorusField> {
    let max_abs = u.linf();
    if max_abs > 700.0 {
        return Err(TorusError::BlowUp { max_abs });
    }
    let e = u.map(|v| (sign * v).exp());
    let w = h.mul(&e)?;
    let total = w.mean();
    if !total.is_finite() || total <= 0.0 {
        return Err(TorusError::BlowUp { max_abs });
    }
    Ok(w.scaled(1.0 / total))
}

/// Scalar residual \(F(u)\), projected to mean zero (the analytic residual
/// integrates to zero; projection removes roundoff).
pub fn residual_scalar(
    spectral: &Spectral,
    params: &ProblemParams,
    u: &TorusField,
) -> Result<TorusField> {
    let k1 = normalized_density(&params.h1, u, 1.0)?;
    let k2 = normalized_density(&params.h2, u, -1.0)?;
    let mut res = spectral.laplacian(u)?;
    res.axpy(params.rho1, &k1)?;
    res.axpy(-params.rho2, &k2)?;
    let shift = params.rho2 - params.rho1;
    Ok(res.map(|v| v + shift).project_mean_zero())
}

/// System residual \((\Delta v_1 + \rho_1(k_1 - 1),\ \Delta v_2 +
/// \rho_2(k_2 - 1))\), each component projected to mean zero.
pub fn residual_system(
    spectral: &Spectral,
    params: &ProblemParams,
    v1: &TorusField,
    v2: &TorusField,
) -> Result<(TorusField, TorusField)> {
    let u = v1.sub(v2)?;
    let k1 = normalized_density(&params.h1, &u, 1.0)?;
    let k2 = normalized_density(&params.h2, &u, -1.0)?;
    let mut r1 = spectral.laplacian(v1)?;
    r1.axpy(params.rho1, &k1)?;
    let r1 = r1.map(|v| v - params.rho1).project_mean_zero();
    let mut r2 = spectral.laplacian(v2)?;
    r2.axpy(params.rho2, &k2)?;
    let r2 = r2.map(|v| v - params.rho2).project_mean_zero();
    Ok((r1, r2))
}

/// Decompose a scalar state into system variables: \(v_1\) solves
/// \(-\Delta v_1 = \rho_1(k_1(u) - 1)\) with mean zero, and
/// \(v_2 = v_1 - u\). By construction the first system residual vanishes
/// and the second equals \(-F(u)\).
pub fn decompose(
    spectral: &Spectral,
    params: &ProblemParams,
    u: &TorusField,
) -> Result<(TorusField, TorusField)> {
    let k1 = normalized_density(&params.h1, u, 1.0)?;
    let rhs = k1
        .map(|v| params.rho1 * (v - 1.0))
        .project_mean_zero();
    let v1 = spectral.inv_neg_laplacian(&rhs)?;
    let v2 = v1.sub(u)?;
    Ok((v1, v2))
}

/// Cached data for applying the scalar linearization
/// \(L \phi = \Delta\phi + \rho_1 P_1 \phi + \rho_2 P_2 \phi\).
pub struct ScalarLinearization {
    rho1: f64,
    rho2: f64,
    k1: TorusField,
    k2: TorusField,
}

impl ScalarLinearization {
    /// Linearize the scalar residual at `u`.
    pub fn new(params: &ProblemParams, u: &TorusField) -> Result<Self> {
        Ok(Self {
            rho1: params.rho1,
            rho2: params.rho2,
            k1: normalized_density(&params.h1, u, 1.0)?,
            k2: normalized_density(&params.h2, u, -1.0)?,
        })
    }

    /// Apply \(L\) to a direction.
    pub fn apply(&self, spectral: &Spectral, phi: &TorusField) -> Result<TorusField> {
        let mut out = spectral.laplacian(phi)?;
        for (rho, k) in [(self.rho1, &self.k1), (self.rho2, &self.k2)] {
            let avg = k.inner(phi)?;
            let p = k.mul(phi)?.sub(&k.scaled(avg))?;
            out.axpy(rho, &p)?;
        }
        Ok(out)
    }
}

/// Cached data for applying the system linearization
/// \[
///   \begin{pmatrix}\Delta + \rho_1 P_1 & -\rho_1 P_1\\
///                  -\rho_2 P_2 & \Delta + \rho_2 P_2\end{pmatrix}.
/// \]
pub struct SystemLinearization {
    rho1: f64,
    rho2: f64,
    k1: TorusField,
    k2: TorusField,
}

impl SystemLinearization {
    /// Linearize the system residual at \((v_1, v_2)\).
    pub fn new(params: &ProblemParams, v1: &TorusField, v2: &TorusField) -> Result<Self> {
        let u = v1.sub(v2)?;
        Ok(Self {
            rho1: params.rho1,
            rho2: params.rho2,
            k1: normalized_density(&params.h1, &u, 1.0)?,
            k2: normalized_density(&params.h2, &u, -1.0)?,
        })
    }

    /// Apply the block operator to a direction pair.
    pub fn apply(
        &self,
        spectral: &Spectral,
        phi1: &TorusField,
        phi2: &TorusField,
    ) -> Result<(TorusField, TorusField)> {
        let d = phi1.sub(phi2)?;
        let p1 = {
            let avg = self.k1.inner(&d)?;
            self.k1.mul(&d)?.sub(&self.k1.scaled(avg))?
        };
        let md = phi2.sub(phi1)?;
        let p2 = {
            let avg = self.k2.inner(&md)?;
            self.k2.mul(&md)?.sub(&self.k2.scaled(avg))?
        };
        let mut r1 = spectral.laplacian(phi1)?;
        r1.axpy(self.rho1, &p1)?;
        let mut r2 = spectral.laplacian(phi2)?;
        r2.axpy(self.rho2, &p2)?;
        Ok((r1, r2))
    }
}

/// Options for the damped Newton solvers.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Convergence threshold on the sup norm of the residual.
    pub tol: f64,
    /// Maximum Newton iterations.
    pub max_iter: usize,
    /// Relative GMRES tolerance for the inner linear solves.
    pub gmres_tol: f64,
    /// Maximum GMRES iterations.
    pub gmres_max: usize,
    /// Smallest Armijo step before declaring stagnation.
    pub min_step: f64,
    /// Iterates whose sup norm exceeds this are treated as blow-up.
    pub blowup_guard: f64,
    /// Force the matrix-free path even on small grids (used by tests to
    /// cross-check the dense path).
    pub force_gmres: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 50,
            gmres_tol: 1e-10,
            gmres_max: 400,
            min_step: 1.0 / 1024.0,
            blowup_guard: BLOWUP_GUARD,
            force_gmres: false,
        }
    }
}

/// Outcome of a Newton solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Whether the tolerance was met.
    pub converged: bool,
    /// Newton iterations performed.
    pub newton_iters: usize,
    /// Final residual sup norm.
    pub residual_norm: f64,
    /// Residual sup norm after each iteration, starting with the initial
    /// residual.
    pub residual_history: Vec<f64>,
    /// Morse index (positive eigenvalue count of the linearization) when
    /// requested; `None` when skipped.
    pub neg_eigs: Option<usize>,
}

/// Assemble the dense matrix of a linear operator from its action on the
/// coordinate basis.
pub(crate) fn assemble_dense(
    dim: usize,
    mut apply: impl FnMut(usize) -> Result<Vec<f64>>,
) -> Result<DMatrix<f64>> {
    let mut mat = DMatrix::<f64>::zeros(dim, dim);
    for j in 0..dim {
        let col = apply(j)?;
        for (i, v) in col.iter().enumerate() {
            mat[(i, j)] = *v;
        }
    }
    Ok(mat)
}

/// Rank-one regularization that moves the constant kernel direction(s) away
/// from zero so a dense LU solve with mean-zero data is well posed.
fn regularize_constants(mat: &mut DMatrix<f64>, blocks: usize, block_len: usize) {
    let mu = 4.0 * core::f64::consts::PI.powi(2);
    let w = mu / block_len as f64;
    for b in 0..blocks {
        let off = b * block_len;
        for i in 0..block_len {
            for j in 0..block_len {
                mat[(off + i, off + j)] += w;
            }
        }
    }
}

fn dense_solve(mat: &DMatrix<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let lu = mat.clone().lu();
    let sol = lu
        .solve(&DVector::from_column_slice(rhs))
        .ok_or(TorusError::NonConvergence {
            iters: 0,
            residual: f64::INFINITY,
        })?;
    Ok(sol.as_slice().to_vec())
}

pub(crate) fn basis_field(grid: TorusGrid, j: usize) -> TorusField {
    let mut f = TorusField::zeros(grid);
    f.values_mut()[j] = 1.0;
    f
}

/// Damped Newton iteration for the scalar equation, starting from `u0`
/// (projected to mean zero). Returns the solution and a report; errors with
/// [`TorusError::NonConvergence`] when the line search stagnates or the
/// iteration budget is exhausted, and [`TorusError::BlowUp`] when the
/// iterate leaves the guarded region.
pub fn newton_scalar(
    spectral: &Spectral,
    params: &ProblemParams,
    u0: &TorusField,
    opts: &SolveOptions,
) -> Result<(TorusField, SolveReport)> {
    let grid = params.grid();
    let n2 = grid.len();
    let dense = grid.n() <= DENSE_LIMIT && !opts.force_gmres;
    let mut u = u0.project_mean_zero();
    let mut history = Vec::new();
    for iter in 0..=opts.max_iter {
        if u.linf() > opts.blowup_guard {
            return Err(TorusError::BlowUp { max_abs: u.linf() });
        }
        let res = residual_scalar(spectral, params, &u)?;
        let rn = res.linf();
        history.push(rn);
        if rn <= opts.tol {
            return Ok((
                u,
                SolveReport {
                    converged: true,
                    newton_iters: iter,
                    residual_norm: rn,
                    residual_history: history,
                    neg_eigs: None,
                },
            ));
        }
        if iter == opts.max_iter {
            break;
        }
        let lin = ScalarLinearization::new(params, &u)?;
        let delta = if dense {
            let mut mat = assemble_dense(n2, |j| {
                let e = basis_field(grid, j);
                Ok(lin.apply(spectral, &e)?.values().to_vec())
            })?;
            regularize_constants(&mut mat, 1, n2);
            let neg: Vec<f64> = res.values().iter().map(|v| -v).collect();
            TorusField::from_values(grid, dense_solve(&mat, &neg)?)?
        } else {
            // Left-preconditioned system: solve (Delta^{-1} L) d = Delta^{-1}(-r).
            let rhs = spectral.poisson(&res.scaled(-1.0).project_mean_zero())?;
            let apply = |phi: &TorusField| -> Result<TorusField> {
                let lp = lin.apply(spectral, phi)?.project_mean_zero();
                spectral.poisson(&lp)
            };
            let gopts = GmresOptions {
                tol: opts.gmres_tol,
                max_iter: opts.gmres_max,
            };
            gmres(&apply, &rhs, &gopts)?.0
        };
        let delta = delta.project_mean_zero();
        // Armijo backtracking on the squared L2 residual norm.
        let f0 = res.l2().powi(2);
        let mut step = 1.0;
        let mut accepted = None;
        while step >= opts.min_step {
            let trial = {
                let mut t = u.clone();
                t.axpy(step, &delta)?;
                t.project_mean_zero()
            };
            match residual_scalar(spectral, params, &trial) {
                Ok(r) => {
                    let f = r.l2().powi(2);
                    if f <= (1.0 - 1e-4 * step) * f0 {
                        accepted = Some(trial);
                        break;
                    }
                }
                Err(TorusError::BlowUp { .. }) => {}
                Err(e) => return Err(e),
            }
            step *= 0.5;
        }
        match accepted {
            Some(t) => u = t,
            None => {
                return Err(TorusError::NonConvergence {
                    iters: iter,
                    residual: rn,
                })
            }
        }
    }
    Err(TorusError::NonConvergence {
        iters: opts.max_iter,
        residual: *history.last().unwrap_or(&f64::INFINITY),
    })
}

/// Damped Newton iteration for the system, starting from \((v_1^0, v_2^0)\)
/// (each component projected to mean zero).
pub fn newton_system(
    spectral: &Spectral,
    params: &ProblemParams,
    v0: (&TorusField, &TorusField),
    opts: &SolveOptions,
) -> Result<((TorusField, TorusField), SolveReport)> {
    let grid = params.grid();
    let n2 = grid.len();
    let dense = grid.n() <= DENSE_LIMIT && !opts.force_gmres;
    let mut v1 = v0.0.project_mean_zero();
    let mut v2 = v0.1.project_mean_zero();
    let mut history = Vec::new();
    let sup = |a: &TorusField, b: &TorusField| a.linf().max(b.linf());
    for iter in 0..=opts.max_iter {
        if sup(&v1, &v2) > 2.0 * opts.blowup_guard {
            return Err(TorusError::BlowUp {
                max_abs: sup(&v1, &v2),
            });
        }
        let (r1, r2) = residual_system(spectral, params, &v1, &v2)?;
        let rn = sup(&r1, &r2);
        history.push(rn);
        if rn <= opts.tol {
            return Ok((
                (v1, v2),
                SolveReport {
                    converged: true,
                    newton_iters: iter,
                    residual_norm: rn,
                    residual_history: history,
                    neg_eigs: None,
                },
            ));
        }
        if iter == opts.max_iter {
            break;
        }
        let lin = SystemLinearization::new(params, &v1, &v2)?;
        let (d1, d2) = if dense {
            let mut mat = assemble_dense(2 * n2, |j| {
                let (e1, e2) = if j < n2 {
                    (basis_field(grid, j), TorusField::zeros(grid))
                } else {
                    (TorusField::zeros(grid), basis_field(grid, j - n2))
                };
                let (a, b) = lin.apply(spectral, &e1, &e2)?;
                let mut col = a.values().to_vec();
                col.extend_from_slice(b.values());
                Ok(col)
            })?;
            regularize_constants(&mut mat, 2, n2);
            let mut neg: Vec<f64> = r1.values().iter().map(|v| -v).collect();
            neg.extend(r2.values().iter().map(|v| -v));
            let sol = dense_solve(&mat, &neg)?;
            (
                TorusField::from_values(grid, sol[..n2].to_vec())?,
                TorusField::from_values(grid, sol[n2..].to_vec())?,
            )
        } else {
            let rhs = (
                spectral.poisson(&r1.scaled(-1.0).project_mean_zero())?,
                spectral.poisson(&r2.scaled(-1.0).project_mean_zero())?,
            );
            let apply = |phi: &(TorusField, TorusField)| -> Result<(TorusField, TorusField)> {
                let (a, b) = lin.apply(spectral, &phi.0, &phi.1)?;
                Ok((
                    spectral.poisson(&a.project_mean_zero())?,
                    spectral.poisson(&b.project_mean_zero())?,
                ))
            };
            let gopts = GmresOptions {
                tol: opts.gmres_tol,
                max_iter: opts.gmres_max,
            };
            gmres(&apply, &rhs, &gopts)?.0
        };
        let d1 = d1.project_mean_zero();
        let d2 = d2.project_mean_zero();
        let f0 = r1.l2().powi(2) + r2.l2().powi(2);
        let mut step = 1.0;
        let mut accepted = None;
        while step >= opts.min_step {
            let t1 = {
                let mut t = v1.clone();
                t.axpy(step, &d1)?;
                t.project_mean_zero()
            };
            let t2 = {
                let mut t = v2.clone();
                t.axpy(step, &d2)?;
                t.project_mean_zero()
            };
            match residual_system(spectral, params, &t1, &t2) {
                Ok((a, b)) => {
                    let f = a.l2().powi(2) + b.l2().powi(2);
                    if f <= (1.0 - 1e-4 * step) * f0 {
                        accepted = Some((t1, t2));
                        break;
                    }
                }
                Err(TorusError::BlowUp { .. }) => {}
                Err(e) => return Err(e),
            }
            step *= 0.5;
        }
        match accepted {
            Some((t1, t2)) => {
                v1 = t1;
                v2 = t2;
            }
            None => {
                return Err(TorusError::NonConvergence {
                    iters: iter,
                    residual: rn,
                })
            }
        }
    }
    Err(TorusError::NonConvergence {
        iters: opts.max_iter,
        residual: *history.last().unwrap_or(&f64::INFINITY),
    })
}

/// Result of a Morse index computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorseCount {
    /// Number of eigenvalues with real part above [`EIG_THRESHOLD`].
    pub positive: usize,
    /// Number of eigenvalues within [`EIG_THRESHOLD`] of the imaginary
    /// axis; nonzero values indicate a degenerate (non-hyperbolic) point.
    pub near_zero: usize,
    /// Largest imaginary part encountered (exactly zero for the symmetric
    /// scalar linearization; a roundoff-scale diagnostic for the system).
    pub max_imag: f64,
}

/// Morse index of the scalar linearization at `u`: the number of positive
/// eigenvalues of \(\Delta + \rho_1 P_1 + \rho_2 P_2\) on the mean-zero
/// subspace. Dense, so restricted to `n <= 48`.
pub fn morse_count_scalar(
    spectral: &Spectral,
    params: &ProblemParams,
    u: &TorusField,
) -> Result<MorseCount> {
    let grid = params.grid();
    if grid.n() > DENSE_LIMIT {
        return Err(TorusError::DenseSizeLimit {
            n: grid.n(),
            limit: DENSE_LIMIT,
        });
    }
    let n2 = grid.len();
    let lin = ScalarLinearization::new(params, u)?;
    let mut mat = assemble_dense(n2, |j| {
        let e = basis_field(grid, j);
        Ok(lin.apply(spectral, &e)?.values().to_vec())
    })?;
    // The operator is symmetric in the node basis; symmetrize away roundoff
    // and push the spurious constant direction far into the negative.
    let sym = (&mat + mat.transpose()) * 0.5;
    mat = sym;
    let defl = -1e3 / n2 as f64;
    for i in 0..n2 {
        for j in 0..n2 {
            mat[(i, j)] += defl;
        }
    }
    // `SymmetricEigen::try_new` requests eigenvectors as well; the
    // values-only entry point passes an invalid job code to LAPACK in the
    // bindings release pinned here.
    let eigen =
        nalgebra_lapack::SymmetricEigen::try_new(mat).ok_or(TorusError::NonConvergence {
            iters: 0,
            residual: f64::INFINITY,
        })?;
    let mut positive = 0;
    let mut near_zero = 0;
    for &l in eigen.eigenvalues.iter() {
        if l > EIG_THRESHOLD {
            positive += 1;
        }
        if l.abs() <= EIG_THRESHOLD {
            near_zero += 1;
        }
    }
    Ok(MorseCount {
        positive,
        near_zero,
        max_imag: 0.0,
    })
}

/// Morse index of the system linearization at \((v_1, v_2)\): the number of
/// eigenvalues with positive real part of the block operator. The block
/// matrix is not symmetric, but its spectrum is real whenever the state
/// decomposes a scalar state; `max_imag` reports the numerical deviation.
/// Dense, so restricted to `n <= 48`.
pub fn morse_count_system(
    spectral: &Spectral,
    params: &ProblemParams,
    v1: &TorusField,
    v2: &TorusField,
) -> Result<MorseCount> {
    let grid = params.grid();
    if grid.n() > DENSE_LIMIT {
        return Err(TorusError::DenseSizeLimit {
            n: grid.n(),
            limit: DENSE_LIMIT,
        });
    }
    let n2 = grid.len();
    let lin = SystemLinearization::new(params, v1, v2)?;
    let mut mat = assemble_dense(2 * n2, |j| {
        let (e1, e2) = if j < n2 {
            (basis_field(grid, j), TorusField::zeros(grid))
        } else {
            (TorusField::zeros(grid), basis_field(grid, j - n2))
        };
        let (a, b) = lin.apply(spectral, &e1, &e2)?;
        let mut col = a.values().to_vec();
        col.extend_from_slice(b.values());
        Ok(col)
    })?;
    // Push the two per-component constant directions into the negative.
    let defl = -1e3 / n2 as f64;
    for blk in 0..2 {
        let off = blk * n2;
        for i in 0..n2 {
            for j in 0..n2 {
                mat[(off + i, off + j)] += defl;
            }
        }
    }
    let eig = nalgebra_lapack::Eigen::new(mat, false, false).ok_or(
        TorusError::NonConvergence {
            iters: 0,
            residual: f64::INFINITY,
        },
    )?;
    let mut positive = 0;
    let mut near_zero = 0;
    let mut max_imag: f64 = 0.0;
    for (&re, &im) in eig.eigenvalues_re.iter().zip(eig.eigenvalues_im.iter()) {
        max_imag = max_imag.max(im.abs());
        if re > EIG_THRESHOLD {
            positive += 1;
        }
        if re.abs() <= EIG_THRESHOLD {
            near_zero += 1;
        }
    }
    Ok(MorseCount {
        positive,
        near_zero,
        max_imag,
    })
}

/// Normalized local masses \(\sigma_i(r) = \frac{1}{2\pi}\int_{B_r(c)}
/// \rho_i k_i\) of the two normalized densities around a center point.
pub fn local_mass(
    params: &ProblemParams,
    u: &TorusField,
    center: (f64, f64),
    radius: f64,
) -> Result<(f64, f64)> {
    if !(radius > 0.0) {
        return Err(TorusError::InvalidParameter {
            name: "radius",
            value: radius,
        });
    }
    let k1 = normalized_density(&params.h1, u, 1.0)?;
    let k2 = normalized_density(&params.h2, u, -1.0)?;
    let grid = params.grid();
    let n = grid.n();
    let cell = 1.0 / (n * n) as f64;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for iy in 0..n {
        for ix in 0..n {
            if torus_distance(grid.point(ix, iy), center) <= radius {
                s1 += k1.at(ix, iy);
                s2 += k2.at(ix, iy);
            }
        }
    }
    let c = cell / (2.0 * core::f64::consts::PI);
    Ok((params.rho1 * s1 * c, params.rho2 * s2 * c))
}

/// One row of a continuation trace.
#[derive(Debug, Clone)]
pub struct ContinuationRecord {
    /// First coupling constant at this record.
    pub rho1: f64,
    /// Second coupling constant.
    pub rho2: f64,
    /// Residual sup norm of the converged state.
    pub residual: f64,
    /// Sup norm of the state.
    pub max_u: f64,
    /// Morse index when computed.
    pub neg_eigs: Option<usize>,
    /// Local mass of the first density around the tracked maximum.
    pub sigma1: f64,
    /// Local mass of the second density around the tracked maximum.
    pub sigma2: f64,
}

/// Options for parameter continuation in \(\rho_1\).
#[derive(Debug, Clone)]
pub struct ContinuationOptions {
    /// Newton options for each correction solve.
    pub solve: SolveOptions,
    /// Smallest parameter step before giving up.
    pub min_param_step: f64,
    /// Radius of the local mass diagnostic.
    pub mass_radius: f64,
    /// Whether to compute the Morse index at each target (dense grids
    /// only).
    pub with_morse: bool,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            solve: SolveOptions::default(),
            min_param_step: 1e-5,
            mass_radius: 0.125,
            with_morse: false,
        }
    }
}

/// Continue a solution branch of the scalar equation over a list of target
/// values of \(\rho_1\), halving the parameter step on Newton failure.
/// Returns one record per reached target together with the final state.
pub fn continue_rho1(
    spectral: &Spectral,
    params: &ProblemParams,
    u0: &TorusField,
    targets: &[f64],
    opts: &ContinuationOptions,
) -> Result<(Vec<ContinuationRecord>, TorusField)> {
    let mut records = Vec::new();
    let mut u = u0.project_mean_zero();
    let mut rho1 = params.rho1();
    for &target in targets {
        if !(target > 0.0) || !target.is_finite() {
            return Err(TorusError::InvalidParameter {
                name: "rho1 target",
                value: target,
            });
        }
        while (rho1 - target).abs() > 1e-14 {
            let mut step = target - rho1;
            loop {
                let trial_params = params.with_rho1(rho1 + step)?;
                match newton_scalar(spectral, &trial_params, &u, &opts.solve) {
                    Ok((next, _)) => {
                        u = next;
                        rho1 += step;
                        break;
                    }
                    Err(TorusError::NonConvergence { .. })
                    | Err(TorusError::BlowUp { .. }) => {
                        step *= 0.5;
                        if step.abs() < opts.min_param_step {
                            return Err(TorusError::NonConvergence {
                                iters: records.len(),
                                residual: (target - rho1).abs(),
                            });
                        }
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        let here = params.with_rho1(rho1)?;
        let res = residual_scalar(spectral, &here, &u)?;
        let neg_eigs = if opts.with_morse {
            Some(morse_count_scalar(spectral, &here, &u)?.positive)
        } else {
            None
        };
        let (cx, cy) = u.argmax();
        let center = params.grid().point(cx, cy);
        let (s1, s2) = local_mass(&here, &u, center, opts.mass_radius)?;
        records.push(ContinuationRecord {
            rho1,
            rho2: params.rho2(),
            residual: res.linf(),
            max_u: u.linf(),
            neg_eigs,
            sigma1: s1,
            sigma2: s2,
        });
    }
    Ok((records, u))
}

impl LinVec for (TorusField, TorusField) {
    fn dot(&self, other: &Self) -> f64 {
        let a: f64 = self
            .0
            .values()
            .iter()
            .zip(other.0.values())
            .map(|(x, y)| x * y)
            .sum();
        let b: f64 = self
            .1
            .values()
            .iter()
            .zip(other.1.values())
            .map(|(x, y)| x * y)
            .sum();
        a + b
    }

    fn scale_mut(&mut self, c: f64) {
        for v in self.0.values_mut() {
            *v *= c;
        }
        for v in self.1.values_mut() {
            *v *= c;
        }
    }

    fn axpy_mut(&mut self, c: f64, other: &Self) {
        for (a, b) in self.0.values_mut().iter_mut().zip(other.0.values()) {
            *a += c * b;
        }
        for (a, b) in self.1.values_mut().iter_mut().zip(other.1.values()) {
            *a += c * b;
        }
    }
}
