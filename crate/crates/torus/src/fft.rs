//! Fourier-spectral operators on torus grids.
//!
//! All differential operators act through the discrete Fourier transform of
//! the node values. With nodes at \(x = i/n\) the transform pairs a field
//! with coefficients indexed by integer wavenumbers
//! \(k \in \{-n/2, \dots, n/2 - 1\}\) per axis, and
//!
//! * the Laplacian multiplies mode \(k\) by \(-4\pi^2 |k|^2\),
//! * first derivatives multiply by \(2\pi i k\) with the asymmetric Nyquist
//!   mode \(k = -n/2\) zeroed (its derivative has no consistent real
//!   representation on the grid),
//! * the Poisson solve divides by \(-4\pi^2|k|^2\) away from \(k = 0\) and
//!   requires a mean-zero right-hand side.
//!
//! [`SpectralField`] caches the transform of a field so it can be evaluated,
//! differentiated, and second-differentiated at arbitrary points of the
//! torus by direct mode summation (trigonometric interpolation).

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, TorusError};
use crate::grid::{TorusField, TorusGrid};

/// Integer wavenumber represented by transform index `a` on an `n`-grid.
fn wavenumber(a: usize, n: usize) -> i64 {
    if a < n / 2 {
        a as i64
    } else {
        a as i64 - n as i64
    }
}

/// Cached FFT plans and spectral operators for one grid resolution.
pub struct Spectral {
    grid: TorusGrid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Spectral {
    /// Plan transforms for `grid`.
    pub fn new(grid: TorusGrid) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.n());
        let inv = planner.plan_fft_inverse(grid.n());
        Self { grid, fwd, inv }
    }

    /// The grid these plans target.
    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    fn check(&self, f: &TorusField) -> Result<()> {
        if f.grid().n() != self.grid.n() {
            return Err(TorusError::GridMismatch {
                left: self.grid.n(),
                right: f.grid().n(),
            });
        }
        Ok(())
    }

    /// Transform a column-index/row-index array in place: rows first, then
    /// columns via transpose.
    fn fft2(&self, data: &mut [Complex<f64>], plan: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n();
        for row in data.chunks_exact_mut(n) {
            plan.process(row);
        }
        transpose_square(data, n);
        for row in data.chunks_exact_mut(n) {
            plan.process(row);
        }
        transpose_square(data, n);
    }

    /// Unnormalized forward transform. Entry `b * n + a` holds the
    /// coefficient of \(e^{2\pi i (k_a x + k_b y)}\) times \(n^2\).
    pub fn forward(&self, f: &TorusField) -> Result<Vec<Complex<f64>>> {
        self.check(f)?;
        let mut data: Vec<Complex<f64>> = f
            .values()
            .iter()
            .map(|&v| Complex::new(v, 0.0))
            .collect();
        self.fft2(&mut data, &self.fwd);
        Ok(data)
    }

    /// Inverse of [`Spectral::forward`], taking the real part.
    pub fn inverse(&self, mut spec: Vec<Complex<f64>>) -> Result<TorusField> {
        let n = self.grid.n();
        if spec.len() != n * n {
            return Err(TorusError::Format(format!(
                "spectrum has {} entries, expected {}",
                spec.len(),
                n * n
            )));
        }
        self.fft2(&mut spec, &self.inv);
        let scale = 1.0 / (n * n) as f64;
        let values = spec.iter().map(|c| c.re * scale).collect();
        TorusField::from_values(self.grid, values)
    }

    /// Apply a real multiplier `m(kx, ky)` in spectral space.
    fn apply_multiplier(
        &self,
        f: &TorusField,
        m: impl Fn(i64, i64) -> f64,
    ) -> Result<TorusField> {
        let n = self.grid.n();
        let mut spec = self.forward(f)?;
        for b in 0..n {
            let ky = wavenumber(b, n);
            for a in 0..n {
                let kx = wavenumber(a, n);
                spec[b * n + a] *= m(kx, ky);
            }
        }
        self.inverse(spec)
    }

    /// Apply a purely imaginary multiplier `i * m(kx, ky)`.
    fn apply_imag_multiplier(
        &self,
        f: &TorusField,
        m: impl Fn(i64, i64) -> f64,
    ) -> Result<TorusField> {
        let n = self.grid.n();
        let mut spec = self.forward(f)?;
        for b in 0..n {
            let ky = wavenumber(b, n);
            for a in 0..n {
                let kx = wavenumber(a, n);
                let c = spec[b * n + a];
                spec[b * n + a] = Complex::new(0.0, m(kx, ky)) * c;
            }
        }
        self.inverse(spec)
    }

    /// Spectral Laplacian \(\Delta f\).
    pub fn laplacian(&self, f: &TorusField) -> Result<TorusField> {
        let c = -4.0 * core::f64::consts::PI.powi(2);
        self.apply_multiplier(f, |kx, ky| c * (kx * kx + ky * ky) as f64)
    }

    /// Solve \(\Delta u = g\) for the mean-zero `u`.
    ///
    /// Fails with [`TorusError::NotMeanZero`] when `|mean(g)| > 1e-10`,
    /// since the periodic Laplacian only inverts mean-zero data.
    pub fn poisson(&self, g: &TorusField) -> Result<TorusField> {
        let mean = g.mean();
        if mean.abs() > 1e-10 {
            return Err(TorusError::NotMeanZero { mean });
        }
        let n = self.grid.n();
        let mut spec = self.forward(g)?;
        let c = -4.0 * core::f64::consts::PI.powi(2);
        for b in 0..n {
            let ky = wavenumber(b, n);
            for a in 0..n {
                let kx = wavenumber(a, n);
                let k2 = (kx * kx + ky * ky) as f64;
                if k2 == 0.0 {
                    spec[b * n + a] = Complex::new(0.0, 0.0);
                } else {
                    spec[b * n + a] /= c * k2;
                }
            }
        }
        self.inverse(spec)
    }

    /// Solve \(-\Delta u = g\) for the mean-zero `u`.
    pub fn inv_neg_laplacian(&self, g: &TorusField) -> Result<TorusField> {
        Ok(self.poisson(g)?.scaled(-1.0))
    }

    /// Spectral derivative \(\partial_x f\) (Nyquist mode zeroed).
    pub fn dx(&self, f: &TorusField) -> Result<TorusField> {
        let n2 = self.grid.n() as i64 / 2;
        let c = 2.0 * core::f64::consts::PI;
        self.apply_imag_multiplier(f, |kx, _| if kx == -n2 { 0.0 } else { c * kx as f64 })
    }

    /// Spectral derivative \(\partial_y f\) (Nyquist mode zeroed).
    pub fn dy(&self, f: &TorusField) -> Result<TorusField> {
        let n2 = self.grid.n() as i64 / 2;
        let c = 2.0 * core::f64::consts::PI;
        self.apply_imag_multiplier(f, |_, ky| if ky == -n2 { 0.0 } else { c * ky as f64 })
    }

    /// Squared \(H^1\) seminorm \(\int |\nabla f|^2\), computed in spectral
    /// space (Nyquist modes zeroed, consistent with [`Spectral::dx`]).
    pub fn grad_norm_sq(&self, f: &TorusField) -> Result<f64> {
        let n = self.grid.n();
        let spec = self.forward(f)?;
        let n2 = n as i64 / 2;
        let mut acc = 0.0;
        for b in 0..n {
            let ky = wavenumber(b, n);
            for a in 0..n {
                let kx = wavenumber(a, n);
                let gx = if kx == -n2 { 0.0 } else { kx as f64 };
                let gy = if ky == -n2 { 0.0 } else { ky as f64 };
                acc += (gx * gx + gy * gy) * spec[b * n + a].norm_sqr();
            }
        }
        Ok(4.0 * core::f64::consts::PI.powi(2) * acc / (n as f64).powi(4))
    }

    /// Resample a field on a grid of a different power-of-two resolution by
    /// spectral zero-padding (upsampling) or mode truncation (downsampling).
    pub fn resample(&self, f: &TorusField, target: TorusGrid) -> Result<TorusField> {
        let n = self.grid.n();
        let m = target.n();
        if m == n {
            return Ok(f.clone());
        }
        let spec = self.forward(f)?;
        let mut out = vec![Complex::new(0.0, 0.0); m * m];
        let half = n.min(m) as i64 / 2;
        for b in 0..m {
            let ky = wavenumber(b, m);
            if ky < -half || ky >= half {
                continue;
            }
            let bs = ky.rem_euclid(n as i64) as usize;
            for a in 0..m {
                let kx = wavenumber(a, m);
                if kx < -half || kx >= half {
                    continue;
                }
                let as_ = kx.rem_euclid(n as i64) as usize;
                out[b * m + a] = spec[bs * n + as_];
            }
        }
        let fine = Spectral::new(target);
        let scale = (m * m) as f64 / (n * n) as f64;
        let mut field = fine.inverse(out)?;
        for v in field.values_mut() {
            *v *= scale;
        }
        Ok(field)
    }
}

fn transpose_square(data: &mut [Complex<f64>], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// A field together with its cached Fourier coefficients, supporting
/// trigonometric interpolation at arbitrary points.
///
/// The interpolant treats the asymmetric Nyquist mode \(k = -n/2\) as a
/// cosine so that point values are real and agree with the node values at
/// the nodes.
pub struct SpectralField {
    grid: TorusGrid,
    /// Coefficients normalized so that `field(x) = sum c * basis`, row-major
    /// `b * n + a`.
    coeff: Vec<Complex<f64>>,
    values: TorusField,
}

/// Basis factor for axis index `a`: \(e^{2\pi i k t}\), or \(\cos(\pi n t)\)
/// at the Nyquist index.
fn basis(a: usize, n: usize, t: f64) -> Complex<f64> {
    let k = wavenumber(a, n);
    if k == -(n as i64) / 2 {
        Complex::new((core::f64::consts::PI * n as f64 * t).cos(), 0.0)
    } else {
        let ang = 2.0 * core::f64::consts::PI * k as f64 * t;
        Complex::new(ang.cos(), ang.sin())
    }
}

/// First derivative factor for axis index `a` (zero at Nyquist).
fn basis_d1(a: usize, n: usize, t: f64) -> Complex<f64> {
    let k = wavenumber(a, n);
    if k == -(n as i64) / 2 {
        Complex::new(0.0, 0.0)
    } else {
        let w = 2.0 * core::f64::consts::PI * k as f64;
        Complex::new(0.0, w) * basis(a, n, t)
    }
}

/// Second derivative factor for axis index `a` (cosine rule at Nyquist).
fn basis_d2(a: usize, n: usize, t: f64) -> Complex<f64> {
    let k = wavenumber(a, n);
    if k == -(n as i64) / 2 {
        let w = core::f64::consts::PI * n as f64;
        Complex::new(-w * w * (w * t).cos(), 0.0)
    } else {
        let w = 2.0 * core::f64::consts::PI * k as f64;
        basis(a, n, t) * (-w * w)
    }
}

impl SpectralField {
    /// Cache the transform of `f`.
    pub fn new(spectral: &Spectral, f: &TorusField) -> Result<Self> {
        let n = f.grid().n();
        let spec = spectral.forward(f)?;
        let scale = 1.0 / (n * n) as f64;
        let coeff = spec.into_iter().map(|c| c * scale).collect();
        Ok(Self {
            grid: f.grid(),
            coeff,
            values: f.clone(),
        })
    }

    /// The sampled node values.
    pub fn field(&self) -> &TorusField {
        &self.values
    }

    /// The grid of the underlying samples.
    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    fn sum_separable(
        &self,
        fx: impl Fn(usize, usize, f64) -> Complex<f64>,
        fy: impl Fn(usize, usize, f64) -> Complex<f64>,
        p: (f64, f64),
    ) -> f64 {
        let n = self.grid.n();
        let bx: Vec<Complex<f64>> = (0..n).map(|a| fx(a, n, p.0)).collect();
        let mut acc = Complex::new(0.0, 0.0);
        for b in 0..n {
            let fyv = fy(b, n, p.1);
            let mut row = Complex::new(0.0, 0.0);
            for a in 0..n {
                row += self.coeff[b * n + a] * bx[a];
            }
            acc += row * fyv;
        }
        acc.re
    }

    /// Interpolated value at an arbitrary point.
    pub fn eval(&self, p: (f64, f64)) -> f64 {
        self.sum_separable(basis, basis, p)
    }

    /// Interpolated gradient at an arbitrary point.
    pub fn grad(&self, p: (f64, f64)) -> (f64, f64) {
        (
            self.sum_separable(basis_d1, basis, p),
            self.sum_separable(basis, basis_d1, p),
        )
    }

    /// Interpolated Laplacian at an arbitrary point.
    pub fn laplacian_at(&self, p: (f64, f64)) -> f64 {
        self.sum_separable(basis_d2, basis, p) + self.sum_separable(basis, basis_d2, p)
    }

    /// Interpolated Hessian `(f_xx, f_xy, f_yy)` at an arbitrary point.
    pub fn hessian(&self, p: (f64, f64)) -> (f64, f64, f64) {
        (
            self.sum_separable(basis_d2, basis, p),
            self.sum_separable(basis_d1, basis_d1, p),
            self.sum_separable(basis, basis_d2, p),
        )
    }
}
