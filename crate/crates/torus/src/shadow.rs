//! The reduced (shadow) system coupling a concentration point with a mean
//! field equation carrying a weight-two singular source.
//!
//! When the first component of the two-parameter mean field system
//! concentrates at a point `p` with local mass `8 pi`, the limit of the
//! second component is a mean-zero field `w` that together with `p`
//! satisfies
//!
//! ```text
//! Delta w + rho2 (h2 e^{w - 8 pi G(., p)} / int h2 e^{w - 8 pi G(., p)} - 1) = 0,
//! grad (log h1 - w)(p) = 0,
//! ```
//!
//! where `G` is the torus Green function (on the flat torus the
//! self-regular part `R(x, x)` is constant and drops out of the point
//! equation). The singular source vanishes to fourth order at `p`; it is
//! evaluated everywhere in the stable product form `d^4 e^{-8 pi R}` so the
//! vanishing never degrades into an overflow of the bare `e^{-8 pi G}`.
//!
//! This module provides the residual of the system, its linearization in
//! `(w, p)` (the field block, the two point-transport columns, and the
//! two-by-two Hessian block), a joint damped Newton solver with a dense
//! non-degeneracy certificate (smallest singular value of the full
//! linearization), and a Morse-sign census over collections of solutions.

use crate::error::{Result, TorusError};
use crate::fft::{Spectral, SpectralField};
use crate::green::{weight2_factor, weight2_green_grad};
use crate::grid::{TorusField, TorusGrid};
use crate::solver::{
    assemble_dense, basis_field, ProblemParams, BLOWUP_GUARD, DENSE_LIMIT, EIG_THRESHOLD,
};
use nalgebra::{DMatrix, DVector};

/// Smallest singular value below which a linearization is treated as
/// degenerate and Morse data is withheld.
pub const ND_THRESHOLD: f64 = 1e-6;

/// Weight given to the constant direction when regularizing dense solves
/// and singular-value computations on the mean-zero subspace.
const CONSTANT_WEIGHT: f64 = 1e3;

/// A candidate (or converged) state of the shadow system: a mean-zero
/// field paired with a concentration point.
#[derive(Debug, Clone)]
pub struct ShadowState {
    w: TorusField,
    p: (f64, f64),
}

impl ShadowState {
    /// Wrap a field/point pair, enforcing the mean-zero invariant on the
    /// field (means up to `1e-10` are scrubbed, larger ones rejected) and
    /// wrapping the point into the fundamental domain.
    pub fn new(w: TorusField, p: (f64, f64)) -> Result<Self> {
        let mean = w.mean();
        if mean.abs() > 1e-10 {
            return Err(TorusError::NotMeanZero { mean });
        }
        Ok(Self {
            w: w.project_mean_zero(),
            p: wrap_point(p),
        })
    }

    /// The mean-zero field component.
    pub fn w(&self) -> &TorusField {
        &self.w
    }

    /// The concentration point, in `[0, 1)^2`.
    pub fn p(&self) -> (f64, f64) {
        self.p
    }
}

/// Outcome of a shadow Newton solve: the converged state, its residual
/// norms, and the non-degeneracy certificate.
#[derive(Debug, Clone)]
pub struct ShadowReport {
    /// Converged state.
    pub state: ShadowState,
    /// L2 norm of the field part of the residual.
    pub field_residual: f64,
    /// Euclidean norm of the point part of the residual.
    pub gradient_residual: f64,
    /// Smallest singular value of the full linearization on the mean-zero
    /// subspace (values are capped at the constant-direction weight `1e3`).
    pub smallest_singular_value: f64,
    /// `(-1)^{N_w + N_p}`, where `N_w` counts the unstable directions of
    /// the symmetric field block and `N_p` the negative eigenvalues of the
    /// point Hessian; `None` when the linearization is degenerate.
    pub morse_sign: Option<i8>,
    /// Newton iterations performed.
    pub iterations: usize,
}

/// Newton solve controls.
#[derive(Debug, Clone, Copy)]
pub struct ShadowNewtonOptions {
    /// Residual tolerance required of both parts.
    pub tol: f64,
    /// Maximum Newton iterations.
    pub max_iter: usize,
    /// Solve the end point of the decoupling deformation instead: the point
    /// equation drops its `w` dependence and becomes `grad log h1 (p) = 0`,
    /// while the field equation is unchanged (the system turns triangular).
    pub decoupled: bool,
}

impl Default for ShadowNewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 40,
            decoupled: false,
        }
    }
}

/// Linearization of the shadow system at a state: the symmetric field
/// block, the two transport columns (derivatives of the field equation in
/// the point), and the point-equation row data.
pub struct ShadowLinearization {
    rho2: f64,
    p: (f64, f64),
    khat: TorusField,
    bx: TorusField,
    by: TorusField,
    /// Hessian of the point-equation potential, `(f_xx, f_xy, f_yy)`.
    hess: (f64, f64, f64),
    /// Whether the point equation carries the `-grad phi(p)` coupling.
    coupled_phi: bool,
}

fn wrap_point(p: (f64, f64)) -> (f64, f64) {
    (p.0.rem_euclid(1.0), p.1.rem_euclid(1.0))
}

fn check_grids(spectral: &Spectral, w: &TorusField, params: &ProblemParams) -> Result<()> {
    let n = spectral.grid().n();
    if w.grid().n() != n {
        return Err(TorusError::GridMismatch {
            left: w.grid().n(),
            right: n,
        });
    }
    if params.grid().n() != n {
        return Err(TorusError::GridMismatch {
            left: params.grid().n(),
            right: n,
        });
    }
    Ok(())
}

/// The singular source `h2 e^w e^{-8 pi G(., p)}` in stable product form.
fn weighted_source(w: &TorusField, p: (f64, f64), h2: &TorusField) -> Result<TorusField> {
    if w.linf() > BLOWUP_GUARD {
        return Err(TorusError::BlowUp { max_abs: w.linf() });
    }
    let grid = w.grid();
    let n = grid.n();
    let mut vals = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let x = grid.point(i, j);
            vals.push(h2.at(i, j) * w.at(i, j).exp() * weight2_factor(x, p));
        }
    }
    TorusField::from_values(grid, vals)
}

/// The potential whose critical points the point equation selects.
fn point_potential(w: &TorusField, params: &ProblemParams, decoupled: bool) -> TorusField {
    let logh1 = params.h1().map(f64::ln);
    if decoupled {
        logh1
    } else {
        logh1
            .sub(w)
            .expect("fields share a grid by construction")
    }
}

fn residual_parts(
    spectral: &Spectral,
    w: &TorusField,
    p: (f64, f64),
    params: &ProblemParams,
    decoupled: bool,
) -> Result<(TorusField, [f64; 2])> {
    let kay = weighted_source(w, p, params.h2())?;
    let mass = kay.mean();
    if !mass.is_finite() || mass <= 0.0 {
        return Err(TorusError::BlowUp { max_abs: w.linf() });
    }
    let lap = spectral.laplacian(w)?;
    let rho2 = params.rho2();
    let mut vals = Vec::with_capacity(kay.values().len());
    for (l, k) in lap.values().iter().zip(kay.values()) {
        vals.push(l + rho2 * (k / mass - 1.0));
    }
    let field = TorusField::from_values(w.grid(), vals)?;
    let potential = SpectralField::new(spectral, &point_potential(w, params, decoupled))?;
    let grad = potential.grad(p);
    Ok((field, [grad.0, grad.1]))
}

/// Residual of the shadow system at a state: the field part (mean-zero up
/// to roundoff) and the point part `grad (log h1 - w)(p)`.
pub fn shadow_residual(
    spectral: &Spectral,
    state: &ShadowState,
    params: &ProblemParams,
) -> Result<(TorusField, [f64; 2])> {
    check_grids(spectral, &state.w, params)?;
    residual_parts(spectral, &state.w, state.p, params, false)
}

fn linearize_parts(
    spectral: &Spectral,
    w: &TorusField,
    p: (f64, f64),
    params: &ProblemParams,
    decoupled: bool,
) -> Result<ShadowLinearization> {
    let grid = w.grid();
    let n = grid.n();
    let rho2 = params.rho2();
    let kay = weighted_source(w, p, params.h2())?;
    let mass = kay.mean();
    if !mass.is_finite() || mass <= 0.0 {
        return Err(TorusError::BlowUp { max_abs: w.linf() });
    }
    let khat = kay.scaled(1.0 / mass);

    // Transport columns: the source depends on the point through
    // G(x, p) = G0(x - p), so the p-derivative flips the sign of the
    // x-gradient and the field equation's derivative in the point is
    // +8 pi rho2 (khat grad_x G . e - khat mean(khat grad_x G . e)); the
    // product khat grad_x G is assembled in its stable form.
    let h2 = params.h2();
    let mut px = Vec::with_capacity(n * n);
    let mut py = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let x = grid.point(i, j);
            let (gx, gy) = weight2_green_grad(x, p);
            let scale = h2.at(i, j) * w.at(i, j).exp() / mass;
            px.push(scale * gx);
            py.push(scale * gy);
        }
    }
    let px = TorusField::from_values(grid, px)?;
    let py = TorusField::from_values(grid, py)?;
    let mx = px.mean();
    let my = py.mean();
    let eight_pi = 8.0 * core::f64::consts::PI;
    let build = |prod: &TorusField, m: f64| -> TorusField {
        let vals: Vec<f64> = prod
            .values()
            .iter()
            .zip(khat.values())
            .map(|(pv, kv)| eight_pi * rho2 * (pv - kv * m))
            .collect();
        TorusField::from_values(grid, vals).expect("length preserved")
    };
    let bx = build(&px, mx);
    let by = build(&py, my);

    let potential = SpectralField::new(spectral, &point_potential(w, params, decoupled))?;
    let hess = potential.hessian(p);

    Ok(ShadowLinearization {
        rho2,
        p,
        khat,
        bx,
        by,
        hess,
        coupled_phi: !decoupled,
    })
}

/// Linearization of the shadow system at a state.
pub fn shadow_linearize(
    spectral: &Spectral,
    state: &ShadowState,
    params: &ProblemParams,
) -> Result<ShadowLinearization> {
    check_grids(spectral, &state.w, params)?;
    linearize_parts(spectral, &state.w, state.p, params, false)
}

impl ShadowLinearization {
    /// The symmetric field block alone: `Delta phi + rho2 (khat phi - khat
    /// mean(khat phi))`.
    pub fn field_block(&self, spectral: &Spectral, phi: &TorusField) -> Result<TorusField> {
        let lap = spectral.laplacian(phi)?;
        let mkphi = self
            .khat
            .values()
            .iter()
            .zip(phi.values())
            .map(|(k, f)| k * f)
            .sum::<f64>()
            / phi.values().len() as f64;
        let vals: Vec<f64> = lap
            .values()
            .iter()
            .zip(self.khat.values().iter().zip(phi.values()))
            .map(|(l, (k, f))| l + self.rho2 * k * (f - mkphi))
            .collect();
        TorusField::from_values(phi.grid(), vals)
    }

    /// Action of the full linearization on a direction `(phi, nu)`.
    pub fn apply(
        &self,
        spectral: &Spectral,
        phi: &TorusField,
        nu: (f64, f64),
    ) -> Result<(TorusField, [f64; 2])> {
        let mut field = self.field_block(spectral, phi)?;
        for (f, (bx, by)) in field
            .values_mut()
            .iter_mut()
            .zip(self.bx.values().iter().zip(self.by.values()))
        {
            *f += nu.0 * bx + nu.1 * by;
        }
        let (hxx, hxy, hyy) = self.hess;
        let mut point = [hxx * nu.0 + hxy * nu.1, hxy * nu.0 + hyy * nu.1];
        if self.coupled_phi {
            let interp = SpectralField::new(spectral, phi)?;
            let grad = interp.grad(self.p);
            point[0] -= grad.0;
            point[1] -= grad.1;
        }
        Ok((field, point))
    }

    /// Hessian block of the point equation, `(f_xx, f_xy, f_yy)`.
    pub fn hessian(&self) -> (f64, f64, f64) {
        self.hess
    }
}

/// Dense node-basis matrix of the full linearization, with the constant
/// direction of the field block given weight [`CONSTANT_WEIGHT`] (the true
/// operator annihilates constants, maps the mean-zero subspace into itself,
/// and has mean-zero transport columns, so this regularization leaves every
/// other singular value untouched).
fn dense_jacobian(
    lap: &DMatrix<f64>,
    lin: &ShadowLinearization,
    spectral: &Spectral,
    grid: TorusGrid,
) -> Result<DMatrix<f64>> {
    let n = grid.n();
    let n2 = n * n;
    let dim = n2 + 2;
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    m.view_mut((0, 0), (n2, n2)).copy_from(lap);
    let khat = lin.khat.values();
    let scale = lin.rho2 / n2 as f64;
    let mu = CONSTANT_WEIGHT / n2 as f64;
    for i in 0..n2 {
        m[(i, i)] += lin.rho2 * khat[i];
        for j in 0..n2 {
            m[(i, j)] += mu - scale * khat[i] * khat[j];
        }
    }
    for i in 0..n2 {
        m[(i, n2)] = lin.bx.values()[i];
        m[(i, n2 + 1)] = lin.by.values()[i];
    }
    if lin.coupled_phi {
        // Row of phi -> -grad (Interp phi)(p): the interpolation is
        // lattice-translation equivariant, so every cardinal function is a
        // shift of the one at the origin.
        let mut delta = TorusField::zeros(grid);
        delta.values_mut()[0] = 1.0;
        let cardinal = SpectralField::new(spectral, &delta)?;
        for l in 0..n2 {
            let node = grid.point(l % n, l / n);
            let (gx, gy) = cardinal.grad((lin.p.0 - node.0, lin.p.1 - node.1));
            m[(n2, l)] = -gx;
            m[(n2 + 1, l)] = -gy;
        }
    }
    let (hxx, hxy, hyy) = lin.hess;
    m[(n2, n2)] = hxx;
    m[(n2, n2 + 1)] = hxy;
    m[(n2 + 1, n2)] = hxy;
    m[(n2 + 1, n2 + 1)] = hyy;
    Ok(m)
}

/// Negative-eigenvalue count of the symmetric two-by-two Hessian.
fn hessian_negatives(hess: (f64, f64, f64)) -> usize {
    let (a, b, c) = hess;
    let tr = a + c;
    let disc = ((a - c) * (a - c) + 4.0 * b * b).sqrt();
    let lo = 0.5 * (tr - disc);
    let hi = 0.5 * (tr + disc);
    [lo, hi].iter().filter(|&&l| l < -EIG_THRESHOLD).count()
}

/// Non-degeneracy certificate: smallest singular value of the dense
/// linearization and, when above threshold, the Morse sign.
fn certificate(
    spectral: &Spectral,
    lap: &DMatrix<f64>,
    lin: &ShadowLinearization,
    grid: TorusGrid,
) -> Result<(f64, Option<i8>)> {
    let n2 = grid.len();
    let jac = dense_jacobian(lap, lin, spectral, grid)?;
    let svd = nalgebra_lapack::SVD::new(jac).ok_or(TorusError::NonConvergence {
        iters: 0,
        residual: f64::INFINITY,
    })?;
    let sigma = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if sigma <= ND_THRESHOLD {
        return Ok((sigma, None));
    }

    // Unstable directions of the field block: positive eigenvalues of the
    // symmetric operator on the mean-zero subspace (the constant direction
    // is deflated far into the negative).
    let khat = lin.khat.values();
    let mut sym = lap.clone();
    let scale = lin.rho2 / n2 as f64;
    let defl = -CONSTANT_WEIGHT / n2 as f64;
    for i in 0..n2 {
        sym[(i, i)] += lin.rho2 * khat[i];
        for j in 0..n2 {
            sym[(i, j)] += defl - scale * khat[i] * khat[j];
        }
    }
    let sym = (&sym + sym.transpose()) * 0.5;
    let eigen = nalgebra_lapack::SymmetricEigen::try_new(sym).ok_or(
        TorusError::NonConvergence {
            iters: 0,
            residual: f64::INFINITY,
        },
    )?;
    let n_w = eigen
        .eigenvalues
        .iter()
        .filter(|&&l| l > EIG_THRESHOLD)
        .count();
    let n_p = hessian_negatives(lin.hess);
    let sign = if (n_w + n_p) % 2 == 0 { 1 } else { -1 };
    Ok((sigma, Some(sign)))
}

/// Joint damped Newton iteration on `(w, p)`, starting from `start`.
///
/// Converges when both residual parts fall below `opts.tol`; the returned
/// report carries the smallest singular value of the linearization at the
/// solution and the Morse sign when non-degenerate. Dense linear algebra
/// restricts the solve to grids with `n <= 48`.
pub fn shadow_newton(
    spectral: &Spectral,
    start: &ShadowState,
    params: &ProblemParams,
    opts: &ShadowNewtonOptions,
) -> Result<ShadowReport> {
    check_grids(spectral, &start.w, params)?;
    let grid = start.w.grid();
    let n = grid.n();
    if n > DENSE_LIMIT {
        return Err(TorusError::DenseSizeLimit {
            n,
            limit: DENSE_LIMIT,
        });
    }
    let n2 = grid.len();
    let lap = assemble_dense(n2, |j| {
        Ok(spectral.laplacian(&basis_field(grid, j))?.values().to_vec())
    })?;

    let mut w = start.w.clone();
    let mut p = start.p;
    let mut iterations = 0usize;
    loop {
        let (f, g) = residual_parts(spectral, &w, p, params, opts.decoupled)?;
        let fr = f.l2();
        let gr = g[0].hypot(g[1]);
        if fr <= opts.tol && gr <= opts.tol {
            let lin = linearize_parts(spectral, &w, p, params, opts.decoupled)?;
            let (sigma, sign) = certificate(spectral, &lap, &lin, grid)?;
            return Ok(ShadowReport {
                state: ShadowState { w, p },
                field_residual: fr,
                gradient_residual: gr,
                smallest_singular_value: sigma,
                morse_sign: sign,
                iterations,
            });
        }
        if iterations >= opts.max_iter {
            return Err(TorusError::NonConvergence {
                iters: iterations,
                residual: fr.max(gr),
            });
        }

        let lin = linearize_parts(spectral, &w, p, params, opts.decoupled)?;
        let jac = dense_jacobian(&lap, &lin, spectral, grid)?;
        let mut rhs = Vec::with_capacity(n2 + 2);
        rhs.extend(f.values().iter().map(|v| -v));
        rhs.push(-g[0]);
        rhs.push(-g[1]);
        let lu = jac.lu();
        let delta = lu
            .solve(&DVector::from_column_slice(&rhs))
            .ok_or(TorusError::NonConvergence {
                iters: iterations,
                residual: fr.max(gr),
            })?;
        let dw = TorusField::from_values(grid, delta.as_slice()[..n2].to_vec())?;
        let dp = (delta[n2], delta[n2 + 1]);

        let merit0 = fr * fr + gr * gr;
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut wt = w.clone();
            for (a, b) in wt.values_mut().iter_mut().zip(dw.values()) {
                *a += step * b;
            }
            let wt = wt.project_mean_zero();
            let pt = wrap_point((p.0 + step * dp.0, p.1 + step * dp.1));
            match residual_parts(spectral, &wt, pt, params, opts.decoupled) {
                Ok((ft, gt)) => {
                    let mt = ft.l2().powi(2) + gt[0].hypot(gt[1]).powi(2);
                    if mt <= (1.0 - 1e-4 * step) * merit0 {
                        accepted = Some((wt, pt));
                        break;
                    }
                }
                Err(TorusError::BlowUp { .. }) => {}
                Err(e) => return Err(e),
            }
            step *= 0.5;
        }
        match accepted {
            Some((wt, pt)) => {
                w = wt;
                p = pt;
            }
            None => {
                return Err(TorusError::NonConvergence {
                    iters: iterations,
                    residual: fr.max(gr),
                })
            }
        }
        iterations += 1;
    }
}

/// Sum of Morse signs over a collection of solutions.
///
/// Refuses collections containing a degenerate report. On the torus the
/// total degree of the shadow system vanishes (the Euler characteristic
/// factor is zero), so a consistent census of found solutions sums to 0;
/// exhaustiveness of the collection is the caller's responsibility.
pub fn morse_census(reports: &[ShadowReport]) -> Result<i64> {
    let mut sum = 0i64;
    for r in reports {
        match r.morse_sign {
            Some(s) => sum += s as i64,
            None => {
                return Err(TorusError::Degenerate {
                    sigma: r.smallest_singular_value,
                    threshold: ND_THRESHOLD,
                })
            }
        }
    }
    Ok(sum)
}

/// Fitted radial decay exponent of the singular source factor
/// `e^{w - 8 pi G(., p)}` over the near-pole window `d in [1/n, 4/n]`:
/// the slope of the angle-averaged `log` value against `log d`. For a
/// faithful weight-two source the fit is 4 up to smooth-variation error.
pub fn radial_source_exponent(
    spectral: &Spectral,
    state: &ShadowState,
    params: &ProblemParams,
) -> Result<f64> {
    check_grids(spectral, &state.w, params)?;
    let n = state.w.grid().n() as f64;
    let wf = SpectralField::new(spectral, &state.w)?;
    let p = state.p;
    let radii = 12usize;
    let angles = 16usize;
    let lo = (1.0 / n).ln();
    let hi = (4.0 / n).ln();
    let mut xs = Vec::with_capacity(radii);
    let mut ys = Vec::with_capacity(radii);
    for r in 0..radii {
        let ld = lo + (hi - lo) * r as f64 / (radii - 1) as f64;
        let d = ld.exp();
        let mut acc = 0.0;
        for a in 0..angles {
            let th = 2.0 * core::f64::consts::PI * a as f64 / angles as f64;
            let x = (p.0 + d * th.cos(), p.1 + d * th.sin());
            acc += wf.eval(x) + weight2_factor(x, p).ln();
        }
        xs.push(ld);
        ys.push(acc / angles as f64);
    }
    let xbar = xs.iter().sum::<f64>() / radii as f64;
    let ybar = ys.iter().sum::<f64>() / radii as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        sxy += (x - xbar) * (y - ybar);
        sxx += (x - xbar) * (x - xbar);
    }
    Ok(sxy / sxx)
}
