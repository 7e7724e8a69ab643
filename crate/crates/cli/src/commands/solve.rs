//! `mfe solve`: damped Newton solves of the mean field equation, in scalar
//! or system form, with an optional continuation sweep in the first
//! coupling.
//!
//! Artifacts (in the `--out` directory, default `.`):
//!
//! * `trace.csv` with fixed columns
//!   `rho1,rho2,residual,max_u,neg_eigs,sigma1,sigma2` — one row for the
//!   starting state, then one per converged state (every reached
//!   continuation target, or the final solve). `neg_eigs` is `-1` when the
//!   Morse index was not computed; couplings are in units of 8π; `sigma1`,
//!   `sigma2` are the local masses around the solution maximum at the
//!   `--mass-radius` radius. On failure the rows reached so far are still
//!   written, so a blow-up leaves a partial trace behind (exit code 4).
//! * `u.bin` (scalar) or `v1.bin`/`v2.bin` (system) with the solution.

use std::path::{Path, PathBuf};

use mfe_torus::solver::{
    continue_rho1, local_mass, morse_count_scalar, morse_count_system, newton_scalar,
    newton_system, residual_scalar, residual_system, ContinuationOptions, ProblemParams,
    SolveOptions,
};
use mfe_torus::{Spectral, TorusField, TorusGrid};
use serde::Serialize;

use super::EIGHT_PI;
use crate::config::{parse_f64_list, CommonConfig, Format, SolveArgs};
use crate::error::AppError;
use crate::expr::field_from_expr;
use crate::output;

#[derive(Serialize)]
struct ResolvedSolve {
    n: usize,
    rho1: f64,
    rho2: f64,
    h1: String,
    h2: String,
    system: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    continue_to: Option<Vec<f64>>,
    morse: bool,
    mass_radius: f64,
    tol: f64,
    max_iter: usize,
    blowup_guard: f64,
}

struct TraceRow {
    rho1: f64,
    rho2: f64,
    residual: f64,
    max_u: f64,
    neg_eigs: Option<usize>,
    sigma1: f64,
    sigma2: f64,
}

const TRACE_HEADERS: [&str; 7] = [
    "rho1", "rho2", "residual", "max_u", "neg_eigs", "sigma1", "sigma2",
];

fn trace_cells(rows: &[TraceRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                output::fmt_f64(r.rho1),
                output::fmt_f64(r.rho2),
                output::fmt_f64(r.residual),
                output::fmt_f64(r.max_u),
                r.neg_eigs.map_or("-1".to_string(), |k| k.to_string()),
                output::fmt_f64(r.sigma1),
                output::fmt_f64(r.sigma2),
            ]
        })
        .collect()
}

fn write_trace(dir: &Path, rows: &[TraceRow]) -> Result<(), AppError> {
    output::write_text(
        &dir.join("trace.csv"),
        &output::render_csv(&TRACE_HEADERS, &trace_cells(rows)),
    )
}

/// Diagnostics of a scalar state `u` under `params`: residual sup norm and
/// local masses around the maximum of `u`.
fn scalar_row(
    spectral: &Spectral,
    params: &ProblemParams,
    u: &TorusField,
    neg_eigs: Option<usize>,
    mass_radius: f64,
) -> Result<TraceRow, AppError> {
    let res = residual_scalar(spectral, params, u)?;
    let (cx, cy) = u.argmax();
    let center = params.grid().point(cx, cy);
    let (sigma1, sigma2) = local_mass(params, u, center, mass_radius)?;
    Ok(TraceRow {
        rho1: params.rho1() / EIGHT_PI,
        rho2: params.rho2() / EIGHT_PI,
        residual: res.linf(),
        max_u: u.linf(),
        neg_eigs,
        sigma1,
        sigma2,
    })
}

/// Load a weight field from an expression or a field file (`.csv` or
/// binary); the file's grid must match the run's grid.
pub fn load_weight(
    grid: TorusGrid,
    expr: &Option<String>,
    file: &Option<PathBuf>,
    what: &'static str,
) -> Result<(TorusField, String), AppError> {
    match (expr, file) {
        (Some(_), Some(_)) => Err(AppError::input(format!(
            "{what} given both as expression and as file"
        ))),
        (None, Some(path)) => {
            let field = if path.extension().map(|e| e == "csv").unwrap_or(false) {
                TorusField::read_csv(path)?
            } else {
                TorusField::read_binary(path)?
            };
            if field.grid().n() != grid.n() {
                return Err(AppError::input(format!(
                    "{what} file has resolution {}, run uses {}",
                    field.grid().n(),
                    grid.n()
                )));
            }
            Ok((field, format!("file:{}", path.display())))
        }
        (expr, None) => {
            let src = expr.as_deref().unwrap_or("1");
            Ok((field_from_expr(grid, src)?, src.to_string()))
        }
    }
}

#[derive(Serialize)]
struct SolveSummary {
    mode: &'static str,
    converged: bool,
    iterations: usize,
    residual: f64,
    max_u: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    neg_eigs: Option<usize>,
    sigma1: f64,
    sigma2: f64,
    trace_rows: usize,
    files: Vec<String>,
}

fn print_summary(summary: &SolveSummary, format: Format) -> Result<(), AppError> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(summary)?;
            s.push('\n');
            print!("{s}");
        }
        Format::Csv => {
            let headers = [
                "mode",
                "converged",
                "iterations",
                "residual",
                "max_u",
                "neg_eigs",
                "sigma1",
                "sigma2",
            ];
            let row = vec![
                summary.mode.to_string(),
                summary.converged.to_string(),
                summary.iterations.to_string(),
                output::fmt_f64(summary.residual),
                output::fmt_f64(summary.max_u),
                summary.neg_eigs.map_or("-1".to_string(), |k| k.to_string()),
                output::fmt_f64(summary.sigma1),
                output::fmt_f64(summary.sigma2),
            ];
            print!("{}", output::render_csv(&headers, &[row]));
        }
        Format::Table => {
            let rows = vec![
                vec!["mode".to_string(), summary.mode.to_string()],
                vec!["converged".to_string(), summary.converged.to_string()],
                vec!["iterations".to_string(), summary.iterations.to_string()],
                vec!["residual".to_string(), output::fmt_f64(summary.residual)],
                vec!["max_u".to_string(), output::fmt_f64(summary.max_u)],
                vec![
                    "neg_eigs".to_string(),
                    summary
                        .neg_eigs
                        .map_or("not computed".to_string(), |k| k.to_string()),
                ],
                vec!["sigma1".to_string(), output::fmt_f64(summary.sigma1)],
                vec!["sigma2".to_string(), output::fmt_f64(summary.sigma2)],
                vec!["files".to_string(), summary.files.join(" ")],
            ];
            print!("{}", output::render_table(&["field", "value"], &rows));
        }
    }
    Ok(())
}

/// Run the solve subcommand.
pub fn run(args: &SolveArgs, common: &CommonConfig) -> Result<(), AppError> {
    let n = args.n.unwrap_or(32);
    let rho1 = args.rho1.unwrap_or(0.5);
    let rho2 = args.rho2.unwrap_or(0.5);
    let mass_radius = args.mass_radius.unwrap_or(0.125);
    let tol = args.tol.unwrap_or(1e-9);
    let max_iter = args.max_iter.unwrap_or(50);
    let blowup_guard = args.blowup_guard.unwrap_or(mfe_torus::solver::BLOWUP_GUARD);
    let continue_to = match &args.continue_to {
        Some(src) => Some(parse_f64_list(src, "continue-to")?),
        None => None,
    };

    let grid = TorusGrid::new(n)?;
    let spectral = Spectral::new(grid);
    let (h1, h1_desc) = load_weight(grid, &args.h1, &args.h1_file, "h1")?;
    let (h2, h2_desc) = load_weight(grid, &args.h2, &args.h2_file, "h2")?;

    let resolved = ResolvedSolve {
        n,
        rho1,
        rho2,
        h1: h1_desc,
        h2: h2_desc,
        system: args.system,
        continue_to: continue_to.clone(),
        morse: args.morse,
        mass_radius,
        tol,
        max_iter,
        blowup_guard,
    };
    crate::config::echo_config("solve", common, &resolved)?;

    if args.system && continue_to.is_some() {
        return Err(AppError::input(
            "--continue-to applies to the scalar equation only",
        ));
    }

    let params = ProblemParams::new(rho1 * EIGHT_PI, rho2 * EIGHT_PI, h1, h2)?;
    let opts = SolveOptions {
        tol,
        max_iter,
        blowup_guard,
        ..SolveOptions::default()
    };
    let dir = output::artifact_dir(common)?;
    let zero = TorusField::zeros(grid);

    let mut trace: Vec<TraceRow> = Vec::new();
    let mut files: Vec<String> = vec!["trace.csv".to_string()];

    if args.system {
        trace.push(scalar_row(&spectral, &params, &zero, None, mass_radius)?);
        let ((v1, v2), report) =
            match newton_system(&spectral, &params, (&zero, &zero), &opts) {
                Ok(ok) => ok,
                Err(e) => {
                    write_trace(&dir, &trace)?;
                    return Err(e.into());
                }
            };
        let neg_eigs = if args.morse {
            Some(morse_count_system(&spectral, &params, &v1, &v2)?.positive)
        } else {
            None
        };
        let u = v1.sub(&v2)?;
        let mut row = scalar_row(&spectral, &params, &u, neg_eigs, mass_radius)?;
        let (r1, r2) = residual_system(&spectral, &params, &v1, &v2)?;
        row.residual = r1.linf().max(r2.linf());
        trace.push(row);
        write_trace(&dir, &trace)?;
        v1.write_binary(&dir.join("v1.bin"))?;
        v2.write_binary(&dir.join("v2.bin"))?;
        files.push("v1.bin".to_string());
        files.push("v2.bin".to_string());
        let last = trace.last().expect("final row pushed above");
        print_summary(
            &SolveSummary {
                mode: "system",
                converged: report.converged,
                iterations: report.newton_iters,
                residual: last.residual,
                max_u: last.max_u,
                neg_eigs,
                sigma1: last.sigma1,
                sigma2: last.sigma2,
                trace_rows: trace.len(),
                files,
            },
            common.format,
        )?;
        return Ok(());
    }

    trace.push(scalar_row(&spectral, &params, &zero, None, mass_radius)?);
    let (u, iterations, neg_eigs) = match &continue_to {
        Some(targets) => {
            let copts = ContinuationOptions {
                solve: opts.clone(),
                mass_radius,
                with_morse: args.morse,
                ..ContinuationOptions::default()
            };
            let mut u = zero.clone();
            let mut here = params.clone();
            let mut reached = 0;
            for &target in targets {
                if !(target > 0.0) {
                    write_trace(&dir, &trace)?;
                    return Err(AppError::input(format!(
                        "continuation target {target} must be positive"
                    )));
                }
                match continue_rho1(&spectral, &here, &u, &[target * EIGHT_PI], &copts) {
                    Ok((records, unext)) => {
                        for rec in records {
                            trace.push(TraceRow {
                                rho1: rec.rho1 / EIGHT_PI,
                                rho2: rec.rho2 / EIGHT_PI,
                                residual: rec.residual,
                                max_u: rec.max_u,
                                neg_eigs: rec.neg_eigs,
                                sigma1: rec.sigma1,
                                sigma2: rec.sigma2,
                            });
                        }
                        u = unext;
                        here = here.with_rho1(target * EIGHT_PI)?;
                        reached += 1;
                    }
                    Err(e) => {
                        write_trace(&dir, &trace)?;
                        return Err(e.into());
                    }
                }
            }
            let neg_eigs = trace.last().and_then(|r| r.neg_eigs);
            (u, reached, neg_eigs)
        }
        None => {
            let (u, report) = match newton_scalar(&spectral, &params, &zero, &opts) {
                Ok(ok) => ok,
                Err(e) => {
                    write_trace(&dir, &trace)?;
                    return Err(e.into());
                }
            };
            let neg_eigs = if args.morse {
                Some(morse_count_scalar(&spectral, &params, &u)?.positive)
            } else {
                None
            };
            trace.push(scalar_row(&spectral, &params, &u, neg_eigs, mass_radius)?);
            (u, report.newton_iters, neg_eigs)
        }
    };

    write_trace(&dir, &trace)?;
    u.write_binary(&dir.join("u.bin"))?;
    files.push("u.bin".to_string());
    let last = trace.last().expect("at least the initial row exists");
    print_summary(
        &SolveSummary {
            mode: "scalar",
            converged: true,
            iterations,
            residual: last.residual,
            max_u: last.max_u,
            neg_eigs,
            sigma1: last.sigma1,
            sigma2: last.sigma2,
            trace_rows: trace.len(),
            files,
        },
        common.format,
    )?;
    Ok(())
}
