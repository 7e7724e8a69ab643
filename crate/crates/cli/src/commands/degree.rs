//! `mfe degree`: exact Leray-Schauder degree tables.
//!
//! Two modes share the output schema:
//!
//! * two-parameter (default): one row per `(chi, rho1, rho2)` from the
//!   two-parameter mean field equation, `rho1/8π ∈ (0, 2)`;
//! * singular (`--alpha`): one row per `(chi, rho)` for the single mean
//!   field equation with conical sources of the given weights, swept over
//!   the `--rho1` grid.
//!
//! Critical couplings (where the degree is not defined because compactness
//! can fail) render as `CRIT`.

use mfe_degree::series::Rational;
use mfe_degree::{degree_singular, degree_two_param, DegreeResult, SingularSet, SurfaceTopology};
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::config::{parse_i64_list, CommonConfig, DegreeArgs, Format};
use crate::error::AppError;
use crate::output;
use crate::rational::{parse_rational_list, render_rational};

#[derive(Serialize)]
struct ResolvedDegree {
    mode: &'static str,
    chi: Vec<i64>,
    rho1: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho2: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<Vec<String>>,
}

struct Row {
    chi: i64,
    rho1: String,
    second: String,
    degree: DegreeResult,
}

fn degree_cell(result: &DegreeResult) -> String {
    match result.value() {
        Some(v) => v.to_string(),
        None => "CRIT".to_string(),
    }
}

fn degree_json(result: &DegreeResult) -> serde_json::Value {
    match result.value() {
        Some(v) => match v.to_i64() {
            Some(i) => serde_json::Value::from(i),
            None => serde_json::Value::from(v.to_string()),
        },
        None => serde_json::Value::from("CRIT"),
    }
}

fn require<'a>(value: &'a Option<String>, what: &str) -> Result<&'a str, AppError> {
    value
        .as_deref()
        .ok_or_else(|| AppError::input(format!("missing {what} (flag or config file)")))
}

/// Run the degree subcommand.
pub fn run(args: &DegreeArgs, common: &CommonConfig) -> Result<(), AppError> {
    let chi = parse_i64_list(require(&args.chi, "--chi")?, "chi")?;
    let rho1 = parse_rational_list(require(&args.rho1, "--rho1")?).map_err(AppError::input)?;
    let alpha = match &args.alpha {
        Some(src) => Some(parse_rational_list(src).map_err(AppError::input)?),
        None => None,
    };
    let rho2 = match &args.rho2 {
        Some(src) => Some(parse_rational_list(src).map_err(AppError::input)?),
        None => None,
    };

    let render_list = |xs: &[Rational]| xs.iter().map(render_rational).collect::<Vec<_>>();
    let resolved = ResolvedDegree {
        mode: if alpha.is_some() { "singular" } else { "two-parameter" },
        chi: chi.clone(),
        rho1: render_list(&rho1),
        rho2: rho2.as_deref().map(render_list),
        alpha: alpha.as_deref().map(render_list),
    };
    crate::config::echo_config("degree", common, &resolved)?;

    let mut rows: Vec<Row> = Vec::new();
    let second_header: &str;
    match &alpha {
        Some(weights) => {
            if rho2.is_some() {
                return Err(AppError::input(
                    "--alpha selects the singular equation over the --rho1 grid; \
                     --rho2 does not apply",
                ));
            }
            second_header = "alpha";
            let sing = SingularSet::new(weights.clone())?;
            let alpha_cell = resolved
                .alpha
                .as_ref()
                .expect("rendered above")
                .join(";");
            for &c in &chi {
                let topo = SurfaceTopology::new(c)?;
                for r in &rho1 {
                    let degree = degree_singular(r, &topo, &sing)?;
                    rows.push(Row {
                        chi: c,
                        rho1: render_rational(r),
                        second: alpha_cell.clone(),
                        degree,
                    });
                }
            }
        }
        None => {
            second_header = "rho2";
            let rho2 = rho2.as_ref().ok_or_else(|| {
                AppError::input("two-parameter mode needs --rho2 (or --alpha for the singular equation)")
            })?;
            for &c in &chi {
                let topo = SurfaceTopology::new(c)?;
                for r1 in &rho1 {
                    for r2 in rho2 {
                        let degree = degree_two_param(r1, r2, &topo)?;
                        rows.push(Row {
                            chi: c,
                            rho1: render_rational(r1),
                            second: render_rational(r2),
                            degree,
                        });
                    }
                }
            }
        }
    }

    let headers = ["chi", "rho1", second_header, "degree"];
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.chi.to_string(),
                r.rho1.clone(),
                r.second.clone(),
                degree_cell(&r.degree),
            ]
        })
        .collect();

    let stdout_text = match common.format {
        Format::Table => output::render_table(&headers, &cells),
        Format::Csv => output::render_csv(&headers, &cells),
        Format::Json => {
            let records: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "chi": r.chi,
                        "rho1": r.rho1,
                        second_header: r.second,
                        "degree": degree_json(&r.degree),
                    })
                })
                .collect();
            let mut s = serde_json::to_string_pretty(&records)?;
            s.push('\n');
            s
        }
    };
    print!("{stdout_text}");

    if let Some(dir) = output::optional_artifact_dir(common)? {
        output::write_text(&dir.join("degree.csv"), &output::render_csv(&headers, &cells))?;
    }
    Ok(())
}
