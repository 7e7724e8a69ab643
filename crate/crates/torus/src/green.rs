//! The Green function of the Laplacian on the flat unit torus.
//!
//! `G(x, p)` is the mean-zero solution of
//! \(-\Delta_x G = \delta_p - 1\). It splits as
//! \(G(x, p) = -\frac{1}{2\pi}\log d(x, p) + R(x, p)\) with `d` the geodesic
//! distance and `R` the smooth regular part, which satisfies
//! \(\Delta_x R = 1\) and, by translation invariance,
//! \(\nabla_x R(x, p)|_{x = p} = 0\).
//!
//! Two evaluation routes are provided.
//!
//! 1. **Exact point evaluation** by splitting the defining heat-kernel
//!    integral at time \(s = 1/(4\pi)\). The short-time part becomes a
//!    rapidly converging lattice sum of exponential integrals
//!    \(\frac{1}{4\pi} E_1(\pi |y - m|^2)\), the long-time part a Gaussian
//!    tapered Fourier sum, and both are truncated far below `f64` roundoff.
//!    These evaluators are used wherever sub-grid accuracy matters
//!    (concentration-scale quadrature, pointwise ansatz assembly).
//! 2. **Band-limited grid fields** via the FFT, representing the delta
//!    source by the discrete Dirac that spans all grid modes. The regular
//!    part at the pole is then recovered by Richardson extrapolation of
//!    \(G + \frac{1}{2\pi}\log d\) over two probe distances.

use std::sync::OnceLock;

use rustfft::num_complex::Complex;

use crate::error::Result;
use crate::fft::Spectral;
use crate::grid::{min_image, TorusField, TorusGrid};

const PI: f64 = core::f64::consts::PI;
/// Euler-Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
/// Lattice and frequency truncation radius for the exact evaluators. Terms
/// beyond this radius are below 1e-18.
const EWALD_RANGE: i64 = 4;

/// Exponential integral \(E_1(z) = \int_z^\infty e^{-t}/t \, dt\) for
/// `z > 0`.
///
/// Power series around zero for `z <= 3`, modified Lentz continued fraction
/// beyond.
fn exp_int_e1(z: f64) -> f64 {
    assert!(z > 0.0, "E1 requires a positive argument");
    if z <= 3.0 {
        entire_ein(z) - EULER_GAMMA - z.ln()
    } else {
        // Continued fraction e^{-z} / (z + 1 - 1/(z + 3 - 4/(z + 5 - ...))).
        let tiny = 1e-300;
        let mut b = z + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..200u32 {
            let a = -((i as f64) * (i as f64));
            b += 2.0;
            d = 1.0 / (b + a * d);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-z).exp()
    }
}

/// Entire part \(\mathrm{Ein}(z) = \sum_{j \ge 1} (-1)^{j+1} z^j / (j \cdot j!)\),
/// satisfying \(E_1(z) = \mathrm{Ein}(z) - \gamma - \log z\).
fn entire_ein(z: f64) -> f64 {
    debug_assert!((0.0..=3.5).contains(&z));
    let mut sum = 0.0;
    let mut term = 1.0;
    for j in 1..80u32 {
        term *= -z / j as f64;
        let contrib = -term / j as f64;
        sum += contrib;
        if contrib.abs() < 1e-18 * sum.abs().max(1.0) {
            break;
        }
    }
    sum
}

/// Derivative helper \(\mathrm{Ein}'(z) = (1 - e^{-z})/z\), stable near 0.
fn ein_prime(z: f64) -> f64 {
    if z < 1e-12 {
        1.0 - 0.5 * z
    } else {
        -(-z).exp_m1() / z
    }
}

/// Gaussian-tapered Fourier tail \(\sum_{k \ne 0} e^{-\pi |k|^2}
/// e^{2\pi i k \cdot y} / (4\pi^2 |k|^2)\) (real by symmetry).
fn fourier_tail(y: (f64, f64)) -> f64 {
    let mut acc = 0.0;
    for kx in -EWALD_RANGE..=EWALD_RANGE {
        for ky in -EWALD_RANGE..=EWALD_RANGE {
            if kx == 0 && ky == 0 {
                continue;
            }
            let k2 = (kx * kx + ky * ky) as f64;
            let phase = 2.0 * PI * (kx as f64 * y.0 + ky as f64 * y.1);
            acc += (-PI * k2).exp() * phase.cos() / (4.0 * PI * PI * k2);
        }
    }
    acc
}

/// Gradient of [`fourier_tail`].
fn fourier_tail_grad(y: (f64, f64)) -> (f64, f64) {
    let mut gx = 0.0;
    let mut gy = 0.0;
    for kx in -EWALD_RANGE..=EWALD_RANGE {
        for ky in -EWALD_RANGE..=EWALD_RANGE {
            if kx == 0 && ky == 0 {
                continue;
            }
            let k2 = (kx * kx + ky * ky) as f64;
            let phase = 2.0 * PI * (kx as f64 * y.0 + ky as f64 * y.1);
            let common = -(-PI * k2).exp() * phase.sin() / (2.0 * PI * k2);
            gx += common * kx as f64;
            gy += common * ky as f64;
        }
    }
    (gx, gy)
}

/// Short-range lattice sum over image charges `m != (0,0)`.
fn image_sum(y: (f64, f64)) -> f64 {
    let mut acc = 0.0;
    for mx in -EWALD_RANGE..=EWALD_RANGE {
        for my in -EWALD_RANGE..=EWALD_RANGE {
            if mx == 0 && my == 0 {
                continue;
            }
            let vx = y.0 - mx as f64;
            let vy = y.1 - my as f64;
            let r2 = vx * vx + vy * vy;
            acc += exp_int_e1(PI * r2) / (4.0 * PI);
        }
    }
    acc
}

/// Gradient of [`image_sum`].
fn image_sum_grad(y: (f64, f64)) -> (f64, f64) {
    let mut gx = 0.0;
    let mut gy = 0.0;
    for mx in -EWALD_RANGE..=EWALD_RANGE {
        for my in -EWALD_RANGE..=EWALD_RANGE {
            if mx == 0 && my == 0 {
                continue;
            }
            let vx = y.0 - mx as f64;
            let vy = y.1 - my as f64;
            let r2 = vx * vx + vy * vy;
            let common = -(-PI * r2).exp() / (2.0 * PI * r2);
            gx += common * vx;
            gy += common * vy;
        }
    }
    (gx, gy)
}

/// Exact Green function `G(x, p)` at a point with `x != p`.
///
/// # Examples
///
/// ```
/// use mfe_torus::green::exact_green;
/// // Symmetry in the arguments.
/// let a = exact_green((0.3, 0.7), (0.1, 0.2));
/// let b = exact_green((0.1, 0.2), (0.3, 0.7));
/// assert!((a - b).abs() < 1e-14);
/// ```
pub fn exact_green(x: (f64, f64), p: (f64, f64)) -> f64 {
    let y = min_image(x, p);
    let r2 = y.0 * y.0 + y.1 * y.1;
    debug_assert!(r2 > 0.0, "Green function evaluated at its pole");
    exp_int_e1(PI * r2) / (4.0 * PI) + image_sum(y) - 1.0 / (4.0 * PI) + fourier_tail(y)
}

/// Exact regular part `R(x, p)`, smooth across `x = p`.
pub fn exact_green_regular(x: (f64, f64), p: (f64, f64)) -> f64 {
    let y = min_image(x, p);
    let r2 = y.0 * y.0 + y.1 * y.1;
    (entire_ein(PI * r2) - EULER_GAMMA - PI.ln()) / (4.0 * PI) + image_sum(y) - 1.0 / (4.0 * PI)
        + fourier_tail(y)
}

/// Exact gradient \(\nabla_x G(x, p)\) with `x != p`.
pub fn exact_green_grad(x: (f64, f64), p: (f64, f64)) -> (f64, f64) {
    let y = min_image(x, p);
    let r2 = y.0 * y.0 + y.1 * y.1;
    debug_assert!(r2 > 0.0, "Green gradient evaluated at the pole");
    // d/dy of E1(pi r^2)/(4 pi) = -y e^{-pi r^2} / (2 pi r^2).
    let common = -(-PI * r2).exp() / (2.0 * PI * r2);
    let (ix, iy) = image_sum_grad(y);
    let (fx, fy) = fourier_tail_grad(y);
    (common * y.0 + ix + fx, common * y.1 + iy + fy)
}

/// Exact gradient \(\nabla_x R(x, p)\), smooth across `x = p` (where it
/// vanishes).
pub fn exact_green_regular_grad(x: (f64, f64), p: (f64, f64)) -> (f64, f64) {
    let y = min_image(x, p);
    let r2 = y.0 * y.0 + y.1 * y.1;
    // d/dy of Ein(pi r^2)/(4 pi) = y/2 * Ein'(pi r^2).
    let common = 0.5 * ein_prime(PI * r2);
    let (ix, iy) = image_sum_grad(y);
    let (fx, fy) = fourier_tail_grad(y);
    (common * y.0 + ix + fx, common * y.1 + iy + fy)
}

/// The Robin constant `R(p, p)`, independent of `p` by translation
/// invariance.
pub fn robin_constant() -> f64 {
    static ROBIN: OnceLock<f64> = OnceLock::new();
    *ROBIN.get_or_init(|| exact_green_regular((0.0, 0.0), (0.0, 0.0)))
}

/// The weight-two concentration factor \(e^{-8\pi G(x,p)} = d(x,p)^4
/// e^{-8\pi R(x,p)}\), evaluated in the stable product form (vanishing of
/// fourth order at the pole, no overflow).
pub fn weight2_factor(x: (f64, f64), p: (f64, f64)) -> f64 {
    let y = min_image(x, p);
    let r2 = y.0 * y.0 + y.1 * y.1;
    if r2 == 0.0 {
        return 0.0;
    }
    r2 * r2 * (-8.0 * PI * exact_green_regular(x, p)).exp()
}

/// The stable product \(e^{-8\pi G(x,p)}\,\nabla_x G(x,p)\).
///
/// Written out through the regular part it is
/// \(e^{-8\pi R}\,(-d^2 y/(2\pi) + d^4 \nabla R)\), which vanishes to third
/// order at the pole even though the bare gradient blows up there.
pub fn weight2_green_grad(x: (f64, f64), p: (f64, f64)) -> (f64, f64) {
    let y = min_image(x, p);
    let r2 = y.0 * y.0 + y.1 * y.1;
    if r2 == 0.0 {
        return (0.0, 0.0);
    }
    let damp = (-8.0 * PI * exact_green_regular(x, p)).exp();
    let (rx, ry) = exact_green_regular_grad(x, p);
    (
        damp * (-r2 * y.0 / (2.0 * PI) + r2 * r2 * rx),
        damp * (-r2 * y.1 / (2.0 * PI) + r2 * r2 * ry),
    )
}

/// Band-limited Green function of an `n`-grid at an arbitrary point: the
/// Fourier sum of `e^{2 pi i k (y)} / (4 pi^2 |k|^2)` restricted to the
/// grid's wavenumbers.
fn band_limited_green(n: usize, y: (f64, f64)) -> f64 {
    let half = n as i64 / 2;
    let mut acc = 0.0;
    for kx in (-half + 1)..half {
        for ky in (-half + 1)..half {
            if kx == 0 && ky == 0 {
                continue;
            }
            let k2 = (kx * kx + ky * ky) as f64;
            let phase = 2.0 * PI * (kx as f64 * y.0 + ky as f64 * y.1);
            acc += phase.cos() / (4.0 * PI * PI * k2);
        }
    }
    acc
}

/// Grid indices of the pole when it coincides with a node, else `None`.
fn pole_node(grid: TorusGrid, pole: (f64, f64)) -> Option<(usize, usize)> {
    let n = grid.n();
    let nf = n as f64;
    let px = pole.0 * nf;
    let py = pole.1 * nf;
    if (px - px.round()).abs() < 1e-9 && (py - py.round()).abs() < 1e-9 {
        let wrap = |t: f64| (t.round().rem_euclid(nf)) as usize % n;
        Some((wrap(px), wrap(py)))
    } else {
        None
    }
}

/// Magnitude (in node units, at most `n/2`) and sign of a wrapped node
/// offset `d mod n`. The sign at exactly `n/2` is arbitrary; odd symmetry
/// makes every quantity folded with it vanish there.
fn fold_offset(d: usize, n: usize) -> (usize, f64) {
    let m = d % n;
    if m <= n - m {
        (m, 1.0)
    } else {
        (n - m, -1.0)
    }
}

/// Node values of the exact gradient \(\nabla_x G(x, p)\) as a pair of
/// fields (the two components), with the pole node zeroed.
///
/// For an on-node pole only one octant of offsets is evaluated: the first
/// component is odd in the first offset, even in the second, and swapping
/// the offsets swaps the components.
pub fn exact_green_grad_field(grid: TorusGrid, pole: (f64, f64)) -> (TorusField, TorusField) {
    let n = grid.n();
    let nf = n as f64;
    match pole_node(grid, pole) {
        Some((pi, pj)) => {
            let half = n / 2;
            let idx = |a: usize, b: usize| b * (b + 1) / 2 + a;
            let mut octant = vec![(0.0, 0.0); idx(half, half) + 1];
            for b in 0..=half {
                for a in 0..=b {
                    octant[idx(a, b)] = if a == 0 && b == 0 {
                        (0.0, 0.0)
                    } else {
                        exact_green_grad((a as f64 / nf, b as f64 / nf), (0.0, 0.0))
                    };
                }
            }
            let mut gx = vec![0.0; n * n];
            let mut gy = vec![0.0; n * n];
            for j in 0..n {
                let (b, sb) = fold_offset(j + n - pj, n);
                for i in 0..n {
                    let (a, sa) = fold_offset(i + n - pi, n);
                    let (vx, vy) = if a <= b {
                        let g = octant[idx(a, b)];
                        (sa * g.0, sb * g.1)
                    } else {
                        let g = octant[idx(b, a)];
                        (sa * g.1, sb * g.0)
                    };
                    gx[j * n + i] = vx;
                    gy[j * n + i] = vy;
                }
            }
            (
                TorusField::from_values(grid, gx).expect("octant fill length"),
                TorusField::from_values(grid, gy).expect("octant fill length"),
            )
        }
        None => {
            let mut gx = vec![0.0; n * n];
            let mut gy = vec![0.0; n * n];
            for j in 0..n {
                for i in 0..n {
                    let x = grid.point(i, j);
                    let m = min_image(x, pole);
                    if m.0 * m.0 + m.1 * m.1 < 1e-24 {
                        continue;
                    }
                    let g = exact_green_grad(x, pole);
                    gx[j * n + i] = g.0;
                    gy[j * n + i] = g.1;
                }
            }
            (
                TorusField::from_values(grid, gx).expect("length matches"),
                TorusField::from_values(grid, gy).expect("length matches"),
            )
        }
    }
}

/// A grid-sampled Green function with a pole, plus its extrapolated regular
/// part at the pole.
pub struct GreenData {
    pole: (f64, f64),
    field: TorusField,
    regular_self: f64,
}

impl GreenData {
    /// Band-limited construction through the FFT: the delta source carries
    /// every symmetric Fourier mode of the grid, and the regular part at the
    /// pole is recovered from circular means. Because \(\Delta R = 1\)
    /// exactly, the circular mean of \(R\) at radius `d` equals
    /// \(R(0) + d^2/4\) with no higher Taylor terms, so the only error is
    /// band truncation, which scales like \(1/n^2\) and is removed by
    /// Richardson extrapolation over the grid refinement \(n/2 \to n\).
    pub fn band_limited(spectral: &Spectral, pole: (f64, f64)) -> Result<Self> {
        let grid = spectral.grid();
        let n = grid.n();
        let mut spec = vec![Complex::new(0.0, 0.0); n * n];
        let half = n as i64 / 2;
        let norm = (n * n) as f64;
        for b in 0..n {
            let ky = if b < n / 2 { b as i64 } else { b as i64 - n as i64 };
            for a in 0..n {
                let kx = if a < n / 2 { a as i64 } else { a as i64 - n as i64 };
                if kx == 0 && ky == 0 {
                    continue;
                }
                // Zero the asymmetric Nyquist lines so the inverse transform
                // is exactly real and matches the pointwise band sum.
                if kx == -half || ky == -half {
                    continue;
                }
                let k2 = (kx * kx + ky * ky) as f64;
                let ang = -2.0 * PI * (kx as f64 * pole.0 + ky as f64 * pole.1);
                let coeff = Complex::new(ang.cos(), ang.sin()) / (4.0 * PI * PI * k2);
                spec[b * n + a] = coeff * norm;
            }
        }
        let field = spectral.inverse(spec)?;
        let regular_self = Self::extrapolate_regular(n, pole);
        Ok(Self {
            pole,
            field,
            regular_self,
        })
    }

    /// Construction through the exact evaluators: node values of `G(x, pole)`
    /// with the singular node (if the pole lies on the grid) set to zero,
    /// and the exact Robin constant. Callers multiply the field by cutoffs
    /// that vanish at the pole.
    ///
    /// When the pole sits on a grid node the node offsets form a lattice
    /// with the full square symmetry of the torus (`G` depends only on the
    /// sorted absolute offsets), so only one octant is evaluated and the
    /// rest is filled by reflection; this cuts the Ewald-evaluation count
    /// eightfold.
    pub fn exact(grid: TorusGrid, pole: (f64, f64)) -> Self {
        let field = match pole_node(grid, pole) {
            Some((pi, pj)) => {
                let n = grid.n();
                let nf = n as f64;
                let half = n / 2;
                let idx = |a: usize, b: usize| b * (b + 1) / 2 + a;
                let mut octant = vec![0.0; idx(half, half) + 1];
                for b in 0..=half {
                    for a in 0..=b {
                        octant[idx(a, b)] = if a == 0 && b == 0 {
                            0.0
                        } else {
                            exact_green((a as f64 / nf, b as f64 / nf), (0.0, 0.0))
                        };
                    }
                }
                let mut values = vec![0.0; n * n];
                for j in 0..n {
                    let b = fold_offset(j + n - pj, n).0;
                    for i in 0..n {
                        let a = fold_offset(i + n - pi, n).0;
                        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                        values[j * n + i] = octant[idx(lo, hi)];
                    }
                }
                TorusField::from_values(grid, values).expect("octant fill length")
            }
            None => TorusField::from_fn(grid, |x, y| {
                let d2 = {
                    let m = min_image((x, y), pole);
                    m.0 * m.0 + m.1 * m.1
                };
                if d2 < 1e-24 {
                    0.0
                } else {
                    exact_green((x, y), pole)
                }
            }),
        };
        Self {
            pole,
            field,
            regular_self: robin_constant(),
        }
    }

    /// Circular-mean estimate of the regular part at the pole from one band
    /// limit: \(\langle G \rangle_{|y| = d} + \frac{1}{2\pi}\log d - d^2/4\).
    /// The trapezoidal angular rule with `4 n` nodes is exact for the
    /// band-limited integrand.
    fn circle_regular(n: usize, d: f64) -> f64 {
        let m = 4 * n;
        let mut acc = 0.0;
        for i in 0..m {
            let th = 2.0 * PI * i as f64 / m as f64;
            acc += band_limited_green(n, (d * th.cos(), d * th.sin()));
        }
        acc / m as f64 + d.ln() / (2.0 * PI) - d * d / 4.0
    }

    fn extrapolate_regular(n: usize, pole: (f64, f64)) -> f64 {
        let _ = pole; // The regular part is translation invariant.
        let d = 1.0 / 8.0;
        let coarse = Self::circle_regular(n / 2, d);
        let fine = Self::circle_regular(n, d);
        (4.0 * fine - coarse) / 3.0
    }

    /// The pole location.
    pub fn pole(&self) -> (f64, f64) {
        self.pole
    }

    /// Node values of `G(x, pole)`.
    pub fn field(&self) -> &TorusField {
        &self.field
    }

    /// The regular part at the pole, `R(pole, pole)`.
    pub fn regular_self(&self) -> f64 {
        self.regular_self
    }
}
