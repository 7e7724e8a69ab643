//! `mfe shadow`: joint Newton solve of the reduced point-field system
//! coupling a mean field equation with a weight-two singular source to the
//! stationarity condition for the source location.
//!
//! Artifacts: `shadow_w.bin` (the field component) and a `shadow.json`
//! sidecar with the point, residual norms, the smallest singular value of
//! the linearization, and the Morse sign (`null` when the linearization is
//! degenerate).

use mfe_torus::shadow::{radial_source_exponent, shadow_newton, ShadowNewtonOptions, ShadowState};
use mfe_torus::solver::ProblemParams;
use mfe_torus::{Spectral, TorusField, TorusGrid};
use serde::Serialize;

use super::EIGHT_PI;
use crate::config::{parse_point, CommonConfig, Format, ShadowArgs};
use crate::error::AppError;
use crate::expr::field_from_expr;
use crate::output;

#[derive(Serialize)]
struct ResolvedShadow {
    n: usize,
    rho2: f64,
    h1: String,
    h2: String,
    p: (f64, f64),
    decoupled: bool,
    tol: f64,
    max_iter: usize,
}

#[derive(Serialize)]
struct Sidecar {
    p: [f64; 2],
    field_residual: f64,
    gradient_residual: f64,
    smallest_singular_value: f64,
    morse_sign: Option<i8>,
    iterations: usize,
    radial_exponent: f64,
    decoupled: bool,
}

/// Run the shadow subcommand.
pub fn run(args: &ShadowArgs, common: &CommonConfig) -> Result<(), AppError> {
    let n = args.n.unwrap_or(32);
    let rho2 = args.rho2.unwrap_or(0.5);
    let h1_src = args.h1.as_deref().unwrap_or("1");
    let h2_src = args.h2.as_deref().unwrap_or("1");
    let p = parse_point(args.p.as_deref().unwrap_or("0.25,0.25"), "p")?;
    let tol = args.tol.unwrap_or(1e-10);
    let max_iter = args.max_iter.unwrap_or(40);

    let resolved = ResolvedShadow {
        n,
        rho2,
        h1: h1_src.to_string(),
        h2: h2_src.to_string(),
        p,
        decoupled: args.decoupled,
        tol,
        max_iter,
    };
    crate::config::echo_config("shadow", common, &resolved)?;

    let grid = TorusGrid::new(n)?;
    let spectral = Spectral::new(grid);
    let h1 = field_from_expr(grid, h1_src)?;
    let h2 = field_from_expr(grid, h2_src)?;
    // The shadow system involves only the second coupling; the first is a
    // placeholder required by the shared parameter pack.
    let params = ProblemParams::new(EIGHT_PI, rho2 * EIGHT_PI, h1, h2)?;
    let start = ShadowState::new(TorusField::zeros(grid), p)?;
    let opts = ShadowNewtonOptions {
        tol,
        max_iter,
        decoupled: args.decoupled,
    };
    let report = shadow_newton(&spectral, &start, &params, &opts)?;
    let radial_exponent = radial_source_exponent(&spectral, &report.state, &params)?;

    let sidecar = Sidecar {
        p: [report.state.p().0, report.state.p().1],
        field_residual: report.field_residual,
        gradient_residual: report.gradient_residual,
        smallest_singular_value: report.smallest_singular_value,
        morse_sign: report.morse_sign,
        iterations: report.iterations,
        radial_exponent,
        decoupled: args.decoupled,
    };

    let dir = output::artifact_dir(common)?;
    report.state.w().write_binary(&dir.join("shadow_w.bin"))?;
    let mut json = serde_json::to_string_pretty(&sidecar)?;
    json.push('\n');
    output::write_text(&dir.join("shadow.json"), &json)?;

    match common.format {
        Format::Json => print!("{json}"),
        Format::Csv => {
            let headers = [
                "p_x",
                "p_y",
                "field_residual",
                "gradient_residual",
                "smallest_singular_value",
                "morse_sign",
                "iterations",
                "radial_exponent",
            ];
            let row = vec![
                output::fmt_f64(sidecar.p[0]),
                output::fmt_f64(sidecar.p[1]),
                output::fmt_f64(sidecar.field_residual),
                output::fmt_f64(sidecar.gradient_residual),
                output::fmt_f64(sidecar.smallest_singular_value),
                sidecar.morse_sign.map_or(String::new(), |s| s.to_string()),
                sidecar.iterations.to_string(),
                output::fmt_f64(sidecar.radial_exponent),
            ];
            print!("{}", output::render_csv(&headers, &[row]));
        }
        Format::Table => {
            let rows = vec![
                vec![
                    "p".to_string(),
                    format!("({}, {})", output::fmt_f64(sidecar.p[0]), output::fmt_f64(sidecar.p[1])),
                ],
                vec![
                    "field_residual".to_string(),
                    output::fmt_f64(sidecar.field_residual),
                ],
                vec![
                    "gradient_residual".to_string(),
                    output::fmt_f64(sidecar.gradient_residual),
                ],
                vec![
                    "smallest_singular_value".to_string(),
                    output::fmt_f64(sidecar.smallest_singular_value),
                ],
                vec![
                    "morse_sign".to_string(),
                    sidecar
                        .morse_sign
                        .map_or("degenerate".to_string(), |s| s.to_string()),
                ],
                vec!["iterations".to_string(), sidecar.iterations.to_string()],
                vec![
                    "radial_exponent".to_string(),
                    output::fmt_f64(sidecar.radial_exponent),
                ],
                vec![
                    "files".to_string(),
                    "shadow_w.bin shadow.json".to_string(),
                ],
            ];
            print!("{}", output::render_table(&["field", "value"], &rows));
        }
    }
    Ok(())
}
