//! Rendering helpers: aligned tables, CSV, and artifact-file plumbing.
//!
//! CSV column orders are fixed; numbers use Rust's shortest round-trip
//! formatting so identical runs produce byte-identical output.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::CommonConfig;
use crate::error::AppError;

/// Render rows as an aligned table: headers, a rule, then rows, columns
/// padded to their widest cell and separated by two spaces.
pub fn render_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let cols = headers.len();
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate().take(cols) {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    let emit = |out: &mut String, cells: &[String]| {
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            out.push_str(cell);
            for _ in cell.len()..widths[i] {
                out.push(' ');
            }
        }
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    };
    let head: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    emit(&mut out, &head);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    emit(&mut out, &rule);
    for row in rows {
        emit(&mut out, row);
    }
    out
}

/// Render rows as CSV with a header line.
pub fn render_csv(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&headers.join(","));
    out.push('\n');
    for row in rows {
        debug_assert!(row.iter().all(|c| !c.contains(',') && !c.contains('\n')));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// The artifact directory of a command that always writes files: the
/// `--out` directory when given, the current directory otherwise. Created
/// if missing.
pub fn artifact_dir(common: &CommonConfig) -> Result<PathBuf, AppError> {
    let dir = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)
        .map_err(|e| AppError::internal(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

/// Create `--out` when explicitly requested; `None` otherwise.
pub fn optional_artifact_dir(common: &CommonConfig) -> Result<Option<PathBuf>, AppError> {
    match &common.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| {
                AppError::internal(format!("cannot create {}: {e}", dir.display()))
            })?;
            Ok(Some(dir.clone()))
        }
        None => Ok(None),
    }
}

/// Write a text artifact.
pub fn write_text(path: &Path, text: &str) -> Result<(), AppError> {
    let mut f = std::fs::File::create(path)
        .map_err(|e| AppError::internal(format!("cannot create {}: {e}", path.display())))?;
    f.write_all(text.as_bytes())
        .map_err(|e| AppError::internal(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

/// Shortest round-trip rendering of a real (Rust `Display` is exact for
/// `f64`, hence deterministic across runs).
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_alignment_pads_columns() {
        let t = render_table(
            &["a", "long"],
            &[
                vec!["1".into(), "2".into()],
                vec!["100".into(), "x".into()],
            ],
        );
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines[0], "a    long");
        assert_eq!(lines[1], "---  ----");
        assert_eq!(lines[2], "1    2");
        assert_eq!(lines[3], "100  x");
    }

    #[test]
    fn csv_rendering_is_plain() {
        let c = render_csv(&["a", "b"], &[vec!["1".into(), "CRIT".into()]]);
        assert_eq!(c, "a,b\n1,CRIT\n");
    }

    #[test]
    fn float_formatting_round_trips() {
        for v in [0.1, 1.0, 1e-13, 123456.789, -0.25] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }
}
