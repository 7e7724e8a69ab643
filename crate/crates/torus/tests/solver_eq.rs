//! Newton solvers, decomposition, linearizations, and Morse index counts
//! for the scalar equation and the equivalent system.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mfe_torus::solver::{
    self, ContinuationOptions, ProblemParams, ScalarLinearization, SolveOptions,
    SystemLinearization,
};
use mfe_torus::{Spectral, TorusError, TorusField, TorusGrid};

const PI: f64 = std::f64::consts::PI;

fn random_band_field(grid: TorusGrid, kmax: i64, seed: u64, amp: f64) -> TorusField {
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
    let norm = amp / modes.len() as f64;
    TorusField::from_fn(grid, move |x, y| {
        modes
            .iter()
            .map(|&(kx, ky, a, b)| {
                let ang = 2.0 * PI * (kx as f64 * x + ky as f64 * y);
                a * ang.cos() + b * ang.sin()
            })
            .sum::<f64>()
            * norm
    })
}

fn test_params(grid: TorusGrid, rho1: f64, rho2: f64) -> ProblemParams {
    let h1 = TorusField::from_fn(grid, |x, _| 1.0 + 0.5 * (2.0 * PI * x).cos());
    let h2 = TorusField::from_fn(grid, |_, y| 1.0 + 0.3 * (2.0 * PI * y).cos());
    ProblemParams::new(rho1, rho2, h1, h2).unwrap()
}

#[test]
fn parameter_validation() {
    let grid = TorusGrid::new(8).unwrap();
    let one = TorusField::constant(grid, 1.0);
    assert!(matches!(
        ProblemParams::new(-1.0, 1.0, one.clone(), one.clone()),
        Err(TorusError::InvalidParameter { name: "rho1", .. })
    ));
    assert!(matches!(
        ProblemParams::new(1.0, -0.1, one.clone(), one.clone()),
        Err(TorusError::InvalidParameter { name: "rho2", .. })
    ));
    let neg = TorusField::constant(grid, -0.5);
    assert!(matches!(
        ProblemParams::new(1.0, 1.0, neg, one.clone()),
        Err(TorusError::NonPositiveWeight { name: "h1", .. })
    ));
    assert!(ProblemParams::new(1.0, 0.0, one.clone(), one).is_ok());
}

#[test]
fn flat_state_solves_constant_weight_problem() {
    // With h1 = h2 = 1 the zero state is an exact solution for any
    // couplings.
    let grid = TorusGrid::new(16).unwrap();
    let sp = Spectral::new(grid);
    let one = TorusField::constant(grid, 1.0);
    let params = ProblemParams::new(4.0 * PI, 4.0 * PI, one.clone(), one).unwrap();
    let u = TorusField::zeros(grid);
    let res = solver::residual_scalar(&sp, &params, &u).unwrap();
    assert!(res.linf() < 1e-13);
    let (r1, r2) = solver::residual_system(&sp, &params, &u, &u).unwrap();
    assert!(r1.linf() < 1e-13 && r2.linf() < 1e-13);
}

#[test]
fn decomposition_roundtrip_and_residual_identity() {
    let grid = TorusGrid::new(32).unwrap();
    let sp = Spectral::new(grid);
    let params = test_params(grid, 4.0 * PI, 4.0 * PI);
    let u = random_band_field(grid, 4, 11, 1.5);
    let started = std::time::Instant::now();
    let (v1, v2) = solver::decompose(&sp, &params, &u).unwrap();
    // Reconstruction.
    let back = v1.sub(&v2).unwrap();
    assert!(back.sub(&u).unwrap().linf() < 1e-12, "u = v1 - v2 roundtrip");
    // First system residual vanishes by construction of v1.
    let (r1, r2) = solver::residual_system(&sp, &params, &v1, &v2).unwrap();
    assert!(r1.linf() < 1e-10, "r1 = {:e}", r1.linf());
    // Second system residual is exactly the negated scalar residual.
    let rs = solver::residual_scalar(&sp, &params, &u).unwrap();
    let diff = r2.add(&rs).unwrap();
    assert!(diff.linf() < 1e-10, "r2 + F(u) = {:e}", diff.linf());
    assert!(started.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn scalar_jacobian_matches_finite_differences() {
    let grid = TorusGrid::new(32).unwrap();
    let sp = Spectral::new(grid);
    let params = test_params(grid, 4.0 * PI, 4.0 * PI);
    let u = random_band_field(grid, 3, 5, 1.0);
    let lin = ScalarLinearization::new(&params, &u).unwrap();
    let eps = 1e-5;
    for seed in 0..10u64 {
        let phi = random_band_field(grid, 4, 100 + seed, 1.0);
        let up = {
            let mut t = u.clone();
            t.axpy(eps, &phi).unwrap();
            t
        };
        let um = {
            let mut t = u.clone();
            t.axpy(-eps, &phi).unwrap();
            t
        };
        let fp = solver::residual_scalar(&sp, &params, &up).unwrap();
        let fm = solver::residual_scalar(&sp, &params, &um).unwrap();
        let fd = fp.sub(&fm).unwrap().scaled(1.0 / (2.0 * eps));
        let lp = lin.apply(&sp, &phi).unwrap();
        let err = fd.sub(&lp).unwrap().linf();
        assert!(err <= 1e-6, "direction {seed}: FD error {err:e}");
    }
}

#[test]
fn system_jacobian_matches_finite_differences() {
    let grid = TorusGrid::new(32).unwrap();
    let sp = Spectral::new(grid);
    let params = test_params(grid, 4.0 * PI, 4.0 * PI);
    let v1 = random_band_field(grid, 3, 6, 0.8);
    let v2 = random_band_field(grid, 3, 7, 0.8);
    let lin = SystemLinearization::new(&params, &v1, &v2).unwrap();
    let eps = 1e-5;
    for seed in 0..10u64 {
        let p1 = random_band_field(grid, 4, 200 + seed, 1.0);
        let p2 = random_band_field(grid, 4, 300 + seed, 1.0);
        let shift = |s: f64| -> (TorusField, TorusField) {
            let mut a = v1.clone();
            a.axpy(s, &p1).unwrap();
            let mut b = v2.clone();
            b.axpy(s, &p2).unwrap();
            (a, b)
        };
        let (a_p, b_p) = shift(eps);
        let (a_m, b_m) = shift(-eps);
        let (fp1, fp2) = solver::residual_system(&sp, &params, &a_p, &b_p).unwrap();
        let (fm1, fm2) = solver::residual_system(&sp, &params, &a_m, &b_m).unwrap();
        let fd1 = fp1.sub(&fm1).unwrap().scaled(1.0 / (2.0 * eps));
        let fd2 = fp2.sub(&fm2).unwrap().scaled(1.0 / (2.0 * eps));
        let (l1, l2) = lin.apply(&sp, &p1, &p2).unwrap();
        let e1 = fd1.sub(&l1).unwrap().linf();
        let e2 = fd2.sub(&l2).unwrap().linf();
        assert!(e1 <= 1e-6 && e2 <= 1e-6, "direction {seed}: {e1:e}, {e2:e}");
    }
}

#[test]
fn newton_scalar_converges_quadratically() {
    let grid = TorusGrid::new(32).unwrap();
    let sp = Spectral::new(grid);
    let params = test_params(grid, 4.0 * PI, 4.0 * PI);
    let opts = SolveOptions::default();
    let (u, report) =
        solver::newton_scalar(&sp, &params, &TorusField::zeros(grid), &opts).unwrap();
    assert!(report.converged);
    assert!(report.residual_norm <= 1e-9);
    assert!(report.newton_iters <= 10, "iters = {}", report.newton_iters);
    assert!(u.mean().abs() < 1e-12);
    // Quadratic tail: the last step at least squares-ish the residual,
    // up to a generous constant and the spectral roundoff floor.
    let h = &report.residual_history;
    if h.len() >= 3 {
        let a = h[h.len() - 2];
        let b = h[h.len() - 1];
        let bound = (50.0 * a * a / h[0].max(1e-30)).max(1e-11);
        assert!(b <= bound, "tail not quadratic: {h:?}");
    }
}

#[test]
fn gmres_path_agrees_with_dense_path() {
    let grid = TorusGrid::new(32).unwrap();
    let sp = Spectral::new(grid);
    let params = test_params(grid, 4.0 * PI, 4.0 * PI);
    let dense_opts = SolveOptions::default();
    let gmres_opts = SolveOptions {
        force_gmres: true,
        ..SolveOptions::default()
    };
    let (ud, _) = solver::newton_scalar(&sp, &params, &TorusField::zeros(grid), &dense_opts).unwrap();
    let (ug, _) = solver::newton_scalar(&sp, &params, &TorusField::zeros(grid), &gmres_opts).unwrap();
    assert!(ud.sub(&ug).unwrap().linf() < 1e-8);
}

#[test]
fn newton_system_converges_from_decomposed_start() {
    let grid = TorusGrid::new(32).unwrap();
    let sp = Spectral::new(grid);
    let params = test_params(grid, 4.0 * PI, 4.0 * PI);
    let opts = SolveOptions::default();
    let (u, _) = solver::newton_scalar(&sp, &params, &TorusField::zeros(grid), &opts).unwrap();
    // Perturb the decomposition slightly so the system solver has work to
    // do.
    let (v1, v2) = solver::decompose(&sp, &params, &u).unwrap();
    let mut v1p = v1.clone();
    v1p.axpy(0.05, &random_band_field(grid, 2, 42, 1.0)).unwrap();
    let ((w1, w2), report) =
        solver::newton_system(&sp, &params, (&v1p, &v2), &opts).unwrap();
    assert!(report.converged);
    let u_sys = w1.sub(&w2).unwrap();
    assert!(u_sys.sub(&u).unwrap().linf() < 1e-7, "system and scalar states agree");
}

#[test]
fn blow_up_initial_data_is_detected() {
    let grid = TorusGrid::new(16).unwrap();
    let sp = Spectral::new(grid);
    let params = test_params(grid, 4.0 * PI, 4.0 * PI);
    let u0 = TorusField::from_fn(grid, |x, _| 60.0 * (2.0 * PI * x).cos());
    match solver::newton_scalar(&sp, &params, &u0, &SolveOptions::default()) {
        Err(TorusError::BlowUp { max_abs }) => assert!(max_abs > 50.0),
        other => panic!("expected blow-up, got {other:?}"),
    }
}

#[test]
fn exhausted_iteration_budget_is_nonconvergence() {
    let grid = TorusGrid::new(16).unwrap();
    let sp = Spectral::new(grid);
    let params = test_params(grid, 4.0 * PI, 4.0 * PI);
    let opts = SolveOptions {
        max_iter: 0,
        ..SolveOptions::default()
    };
    assert!(matches!(
        solver::newton_scalar(&sp, &params, &TorusField::zeros(grid), &opts),
        Err(TorusError::NonConvergence { .. })
    ));
}

#[test]
fn morse_counts_at_flat_states_match_mode_counting() {
    // With h = 1 and u = 0 the scalar linearization acts diagonally on
    // Fourier modes: -4 pi^2 |k|^2 + rho1 + rho2 on mean-zero modes.
    let grid = TorusGrid::new(16).unwrap();
    let sp = Spectral::new(grid);
    let one = TorusField::constant(grid, 1.0);
    let u = TorusField::zeros(grid);

    // rho1 + rho2 = 8 pi < 4 pi^2: no positive modes.
    let p0 = ProblemParams::new(4.0 * PI, 4.0 * PI, one.clone(), one.clone()).unwrap();
    let m0 = solver::morse_count_scalar(&sp, &p0, &u).unwrap();
    assert_eq!((m0.positive, m0.near_zero), (0, 0));

    // rho1 + rho2 = 44 between 4 pi^2 and 8 pi^2: the four |k|^2 = 1 modes
    // cross.
    let p4 = ProblemParams::new(22.0, 22.0, one.clone(), one.clone()).unwrap();
    let m4 = solver::morse_count_scalar(&sp, &p4, &u).unwrap();
    assert_eq!((m4.positive, m4.near_zero), (4, 0));

    // rho1 + rho2 = 4 pi^2 exactly: those modes are degenerate.
    let pd = ProblemParams::new(2.0 * PI * PI, 2.0 * PI * PI, one.clone(), one.clone()).unwrap();
    let md = solver::morse_count_scalar(&sp, &pd, &u).unwrap();
    assert_eq!((md.positive, md.near_zero), (0, 4));

    // The system block operator has per-mode eigenvalues -mu and
    // -mu + rho1 + rho2, so the positive counts agree.
    let ms = solver::morse_count_system(&sp, &p4, &u, &u).unwrap();
    assert_eq!(ms.positive, 4);
    assert!(ms.max_imag < 1e-7);
}

#[test]
fn scalar_and_system_morse_indices_agree_at_a_solution() {
    let grid = TorusGrid::new(32).unwrap();
    let sp = Spectral::new(grid);
    let params = test_params(grid, 4.0 * PI, 4.0 * PI);
    let t0 = std::time::Instant::now();
    let (u, _) =
        solver::newton_scalar(&sp, &params, &TorusField::zeros(grid), &SolveOptions::default())
            .unwrap();
    let scalar = solver::morse_count_scalar(&sp, &params, &u).unwrap();
    let (v1, v2) = solver::decompose(&sp, &params, &u).unwrap();
    let system = solver::morse_count_system(&sp, &params, &v1, &v2).unwrap();
    println!(
        "morse equivalence: scalar = {}, system = {}, max imag = {:e}, elapsed = {:.1?}",
        scalar.positive,
        system.positive,
        system.max_imag,
        t0.elapsed()
    );
    assert_eq!(scalar.positive, system.positive);
    assert_eq!(scalar.near_zero, 0);
    assert_eq!(system.near_zero, 0);
    assert!(system.max_imag < 1e-6);
    assert!(t0.elapsed().as_secs_f64() < 120.0, "criterion budget is two minutes");
}

#[test]
fn local_mass_of_flat_density_scales_with_disc_area() {
    let grid = TorusGrid::new(64).unwrap();
    let one = TorusField::constant(grid, 1.0);
    let params = ProblemParams::new(4.0 * PI, 2.0 * PI, one.clone(), one).unwrap();
    let u = TorusField::zeros(grid);
    let center = (0.5, 0.5);
    let mut last = 0.0;
    for r in [0.1, 0.2, 0.3] {
        let (s1, s2) = solver::local_mass(&params, &u, center, r).unwrap();
        // sigma_i = rho_i r^2 / 2 for the uniform density.
        let expect1 = 4.0 * PI * r * r / 2.0;
        let expect2 = 2.0 * PI * r * r / 2.0;
        let tol = 4.0 * PI * r * grid.spacing();
        assert!((s1 - expect1).abs() < tol, "r = {r}: {s1} vs {expect1}");
        assert!((s2 - expect2).abs() < tol);
        assert!(s1 > last);
        last = s1;
    }
}

#[test]
fn continuation_walks_the_requested_targets() {
    let grid = TorusGrid::new(16).unwrap();
    let sp = Spectral::new(grid);
    let params = test_params(grid, 4.0 * PI, 4.0 * PI);
    let targets = [4.5 * PI, 5.0 * PI, 6.0 * PI];
    let opts = ContinuationOptions {
        with_morse: true,
        ..ContinuationOptions::default()
    };
    let (records, u_final) =
        solver::continue_rho1(&sp, &params, &TorusField::zeros(grid), &targets, &opts).unwrap();
    assert_eq!(records.len(), 3);
    for (rec, want) in records.iter().zip(targets) {
        assert!((rec.rho1 - want).abs() < 1e-12);
        assert!((rec.rho2 - 4.0 * PI).abs() < 1e-15);
        assert!(rec.residual <= 1e-9);
        assert!(rec.max_u.is_finite() && rec.max_u < 10.0);
        assert!(rec.neg_eigs.is_some());
        assert!(rec.sigma1 >= 0.0 && rec.sigma2 >= 0.0);
    }
    // The final state solves the last target.
    let last = params.with_rho1(6.0 * PI).unwrap();
    let res = solver::residual_scalar(&sp, &last, &u_final).unwrap();
    assert!(res.linf() <= 1e-9);
}

#[test]
fn dense_morse_rejects_large_grids() {
    let grid = TorusGrid::new(64).unwrap();
    let sp = Spectral::new(grid);
    let one = TorusField::constant(grid, 1.0);
    let params = ProblemParams::new(1.0, 1.0, one.clone(), one).unwrap();
    assert!(matches!(
        solver::morse_count_scalar(&sp, &params, &TorusField::zeros(grid)),
        Err(TorusError::DenseSizeLimit { limit: 48, .. })
    ));
}
