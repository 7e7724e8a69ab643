//! `mfe bubble`: asymptotic expansion checks for the concentration ansatz
//! over a ladder of bubble heights.
//!
//! `--check mass` verifies the concentrated-mass expansion; `--check
//! projections` verifies the residual projections onto the center, height,
//! and amplitude directions. Each check yields records
//! `lambda,measured,predicted,residual,fitted_exponent`, written as CSV
//! artifacts (`mass.csv`, or `projection_center.csv`,
//! `projection_height.csv`, `projection_amplitude.csv`).

use mfe_torus::bubble::{
    mass_expansion_check, projection_checks, BubbleAnsatz, ExpansionCheck,
};
use mfe_torus::{Spectral, TorusGrid};
use serde::Serialize;

use super::EIGHT_PI;
use crate::config::{parse_f64_list, parse_point, BubbleArgs, BubbleCheck, CommonConfig, Format};
use crate::error::AppError;
use crate::expr::field_from_expr;
use crate::output;

#[derive(Serialize)]
struct ResolvedBubble {
    check: BubbleCheck,
    lambdas: Vec<f64>,
    n: usize,
    q: (f64, f64),
    rho1: f64,
    r0: f64,
    h1: String,
    w: String,
}

#[derive(Serialize)]
struct CheckJson<'a> {
    lambdas: &'a [f64],
    measured: &'a [f64],
    predicted: &'a [f64],
    residuals: &'a [f64],
    fitted_exponent: f64,
}

impl<'a> CheckJson<'a> {
    fn of(check: &'a ExpansionCheck) -> Self {
        Self {
            lambdas: &check.lambdas,
            measured: &check.measured,
            predicted: &check.predicted,
            residuals: &check.residuals,
            fitted_exponent: check.fitted_exponent,
        }
    }
}

fn check_rows(check: &ExpansionCheck, label: Option<&str>) -> Vec<Vec<String>> {
    (0..check.lambdas.len())
        .map(|i| {
            let mut row = Vec::new();
            if let Some(name) = label {
                row.push(name.to_string());
            }
            row.extend([
                output::fmt_f64(check.lambdas[i]),
                output::fmt_f64(check.measured[i]),
                output::fmt_f64(check.predicted[i]),
                output::fmt_f64(check.residuals[i]),
                output::fmt_f64(check.fitted_exponent),
            ]);
            row
        })
        .collect()
}

fn check_csv(check: &ExpansionCheck) -> Result<String, AppError> {
    let mut buf = Vec::new();
    check
        .write_csv(&mut buf)
        .map_err(|e| AppError::internal(e.to_string()))?;
    String::from_utf8(buf).map_err(|e| AppError::internal(e.to_string()))
}

const COLUMNS: [&str; 5] = ["lambda", "measured", "predicted", "residual", "fitted_exponent"];

/// Run the bubble subcommand.
pub fn run(args: &BubbleArgs, common: &CommonConfig) -> Result<(), AppError> {
    let check = args
        .check
        .ok_or_else(|| AppError::input("missing --check (mass or projections)"))?;
    let lambdas = parse_f64_list(args.lambdas.as_deref().unwrap_or("8,10,12"), "lambdas")?;
    let n = args.n.unwrap_or(64);
    let q = parse_point(args.q.as_deref().unwrap_or("0.5,0.5"), "q")?;
    let rho1 = args.rho1.unwrap_or(1.0);
    let r0 = args.r0.unwrap_or(0.125);
    let h1_src = args.h1.as_deref().unwrap_or("1");
    let w_src = args.w.as_deref().unwrap_or("0");

    let resolved = ResolvedBubble {
        check,
        lambdas: lambdas.clone(),
        n,
        q,
        rho1,
        r0,
        h1: h1_src.to_string(),
        w: w_src.to_string(),
    };
    crate::config::echo_config("bubble", common, &resolved)?;

    let grid = TorusGrid::new(n)?;
    let spectral = Spectral::new(grid);
    let h1 = field_from_expr(grid, h1_src)?;
    let w = field_from_expr(grid, w_src)?;
    let first = *lambdas
        .first()
        .ok_or_else(|| AppError::input("empty lambda list"))?;
    let template = BubbleAnsatz::new(&spectral, q, first, 1.0, rho1 * EIGHT_PI, r0, &h1, &w)?;

    let dir = output::artifact_dir(common)?;
    match check {
        BubbleCheck::Mass => {
            let result = mass_expansion_check(&template, &lambdas)?;
            output::write_text(&dir.join("mass.csv"), &check_csv(&result)?)?;
            match common.format {
                Format::Csv => print!("{}", check_csv(&result)?),
                Format::Table => print!(
                    "{}",
                    output::render_table(&COLUMNS, &check_rows(&result, None))
                ),
                Format::Json => {
                    let mut s = serde_json::to_string_pretty(&serde_json::json!({
                        "check": "mass",
                        "mass": CheckJson::of(&result),
                    }))?;
                    s.push('\n');
                    print!("{s}");
                }
            }
        }
        BubbleCheck::Projections => {
            let result = projection_checks(&template, &lambdas)?;
            let parts = [
                ("center", &result.center),
                ("height", &result.height),
                ("amplitude", &result.amplitude),
            ];
            for (name, check) in &parts {
                output::write_text(
                    &dir.join(format!("projection_{name}.csv")),
                    &check_csv(check)?,
                )?;
            }
            match common.format {
                Format::Json => {
                    let mut s = serde_json::to_string_pretty(&serde_json::json!({
                        "check": "projections",
                        "center": CheckJson::of(&result.center),
                        "height": CheckJson::of(&result.height),
                        "amplitude": CheckJson::of(&result.amplitude),
                    }))?;
                    s.push('\n');
                    print!("{s}");
                }
                format => {
                    let mut headers = vec!["projection"];
                    headers.extend(COLUMNS);
                    let mut rows = Vec::new();
                    for (name, check) in &parts {
                        rows.extend(check_rows(check, Some(name)));
                    }
                    let text = match format {
                        Format::Csv => output::render_csv(&headers, &rows),
                        _ => output::render_table(&headers, &rows),
                    };
                    print!("{text}");
                }
            }
        }
    }
    Ok(())
}
