//! Fourier-spectral operators against closed forms and a naive DFT oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mfe_torus::{Spectral, SpectralField, TorusError, TorusField, TorusGrid};

const PI: f64 = std::f64::consts::PI;

/// Seeded band-limited test field: random modes up to `kmax` per axis.
fn random_band_field(grid: TorusGrid, kmax: i64, seed: u64) -> TorusField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for kx in -kmax..=kmax {
        for ky in -kmax..=kmax {
            if kx == 0 && ky == 0 {
                continue;
            }
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            modes.push((kx, ky, a, b));
        }
    }
    TorusField::from_fn(grid, move |x, y| {
        modes
            .iter()
            .map(|&(kx, ky, a, b)| {
                let ang = 2.0 * PI * (kx as f64 * x + ky as f64 * y);
                a * ang.cos() + b * ang.sin()
            })
            .sum()
    })
}

#[test]
fn laplacian_of_eigenfunctions() {
    let grid = TorusGrid::new(32).unwrap();
    let sp = Spectral::new(grid);
    let u = TorusField::from_fn(grid, |x, y| {
        (2.0 * PI * x).cos() + 3.0 * (2.0 * PI * 2.0 * y).sin()
    });
    let lap = sp.laplacian(&u).unwrap();
    let expect = TorusField::from_fn(grid, |x, y| {
        -4.0 * PI * PI * (2.0 * PI * x).cos() - 3.0 * 16.0 * PI * PI * (2.0 * PI * 2.0 * y).sin()
    });
    assert!(lap.sub(&expect).unwrap().linf() < 1e-10);
}

#[test]
fn derivatives_of_trigonometric_fields() {
    let grid = TorusGrid::new(32).unwrap();
    let sp = Spectral::new(grid);
    let u = TorusField::from_fn(grid, |x, y| (2.0 * PI * (x + 3.0 * y)).sin());
    let ux = sp.dx(&u).unwrap();
    let uy = sp.dy(&u).unwrap();
    let ex = TorusField::from_fn(grid, |x, y| 2.0 * PI * (2.0 * PI * (x + 3.0 * y)).cos());
    let ey = TorusField::from_fn(grid, |x, y| 6.0 * PI * (2.0 * PI * (x + 3.0 * y)).cos());
    assert!(ux.sub(&ex).unwrap().linf() < 1e-10);
    assert!(uy.sub(&ey).unwrap().linf() < 1e-10);
}

#[test]
fn poisson_inverts_laplacian_on_mean_zero_data() {
    let grid = TorusGrid::new(64).unwrap();
    let sp = Spectral::new(grid);
    let g = random_band_field(grid, 5, 7).project_mean_zero();
    let u = sp.poisson(&g).unwrap();
    assert!(u.mean().abs() < 1e-14);
    let back = sp.laplacian(&u).unwrap();
    assert!(back.sub(&g).unwrap().linf() < 1e-11);
    let v = sp.inv_neg_laplacian(&g).unwrap();
    assert!(sp.laplacian(&v).unwrap().add(&g).unwrap().linf() < 1e-11);
}

#[test]
fn poisson_rejects_nonzero_mean() {
    let grid = TorusGrid::new(16).unwrap();
    let sp = Spectral::new(grid);
    let g = TorusField::constant(grid, 0.5);
    assert!(matches!(
        sp.poisson(&g),
        Err(TorusError::NotMeanZero { .. })
    ));
}

#[test]
fn forward_transform_matches_naive_dft() {
    let n = 16usize;
    let grid = TorusGrid::new(n).unwrap();
    let sp = Spectral::new(grid);
    let f = random_band_field(grid, 7, 13);
    let spec = sp.forward(&f).unwrap();
    for (b, a) in [(0usize, 0usize), (1, 3), (8, 8), (15, 2), (5, 11)] {
        let mut re = 0.0;
        let mut im = 0.0;
        for iy in 0..n {
            for ix in 0..n {
                let ang = -2.0 * PI * ((a * ix) as f64 + (b * iy) as f64) / n as f64;
                re += f.at(ix, iy) * ang.cos();
                im += f.at(ix, iy) * ang.sin();
            }
        }
        let got = spec[b * n + a];
        assert!(
            (got.re - re).abs() < 1e-9 && (got.im - im).abs() < 1e-9,
            "mode ({a},{b}): got {got}, naive ({re},{im})"
        );
    }
}

#[test]
fn inverse_undoes_forward() {
    let grid = TorusGrid::new(32).unwrap();
    let sp = Spectral::new(grid);
    let f = random_band_field(grid, 9, 21);
    let back = sp.inverse(sp.forward(&f).unwrap()).unwrap();
    assert!(back.sub(&f).unwrap().linf() < 1e-11);
}

#[test]
fn integrals_of_smooth_fields() {
    let grid = TorusGrid::new(32).unwrap();
    assert!((TorusField::constant(grid, 1.0).integral() - 1.0).abs() < 1e-15);
    let c = TorusField::from_fn(grid, |x, _| (2.0 * PI * x).cos());
    assert!(c.integral().abs() < 1e-15);
    // The trapezoidal rule converges faster than any power for analytic
    // periodic integrands: at n = 32 the integral of e^{cos(2 pi x)} already
    // equals the modified Bessel value I_0(1) to machine precision.
    let e = TorusField::from_fn(grid, |x, _| (2.0 * PI * x).cos().exp());
    assert!((e.integral() - 1.266_065_877_752_008_4).abs() < 1e-12);
}

#[test]
fn trigonometric_interpolation_matches_closed_forms() {
    let grid = TorusGrid::new(32).unwrap();
    let sp = Spectral::new(grid);
    let u = TorusField::from_fn(grid, |x, y| {
        (2.0 * PI * x).cos() * (2.0 * PI * 2.0 * y).sin()
    });
    let sf = SpectralField::new(&sp, &u).unwrap();
    // Node values reproduce exactly.
    assert!((sf.eval(grid.point(7, 12)) - u.at(7, 12)).abs() < 1e-12);
    // Off-grid evaluation, gradient, Laplacian, Hessian against closed
    // forms.
    let p = (0.2371, 0.5813);
    let c = (2.0 * PI * p.0).cos();
    let s = (2.0 * PI * p.0).sin();
    let c2 = (4.0 * PI * p.1).cos();
    let s2 = (4.0 * PI * p.1).sin();
    assert!((sf.eval(p) - c * s2).abs() < 1e-11);
    let (gx, gy) = sf.grad(p);
    assert!((gx - (-2.0 * PI * s * s2)).abs() < 1e-10);
    assert!((gy - 4.0 * PI * c * c2).abs() < 1e-10);
    let lap = sf.laplacian_at(p);
    assert!((lap - (-(4.0 * PI * PI) * c * s2 - 16.0 * PI * PI * c * s2)).abs() < 1e-9);
    let (hxx, hxy, hyy) = sf.hessian(p);
    assert!((hxx - (-4.0 * PI * PI * c * s2)).abs() < 1e-9);
    assert!((hxy - (-8.0 * PI * PI * s * c2)).abs() < 1e-9);
    assert!((hyy - (-16.0 * PI * PI * c * s2)).abs() < 1e-9);
}

#[test]
fn gradient_seminorm_matches_mode_sum() {
    let grid = TorusGrid::new(32).unwrap();
    let sp = Spectral::new(grid);
    let u = TorusField::from_fn(grid, |x, _| (2.0 * PI * x).cos());
    // integral |grad cos(2 pi x)|^2 = (2 pi)^2 / 2.
    assert!((sp.grad_norm_sq(&u).unwrap() - 2.0 * PI * PI).abs() < 1e-9);
}

#[test]
fn resampling_preserves_band_limited_fields() {
    let coarse = TorusGrid::new(16).unwrap();
    let fine = TorusGrid::new(64).unwrap();
    let sp_c = Spectral::new(coarse);
    let sp_f = Spectral::new(fine);
    let f = random_band_field(coarse, 5, 3);
    let up = sp_c.resample(&f, fine).unwrap();
    // Upsampling evaluates the same trigonometric polynomial on more nodes.
    let exact = random_band_field(fine, 5, 3);
    assert!(up.sub(&exact).unwrap().linf() < 1e-11);
    // Downsampling back recovers the original samples.
    let down = sp_f.resample(&up, coarse).unwrap();
    assert!(down.sub(&f).unwrap().linf() < 1e-11);
}
