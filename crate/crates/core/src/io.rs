//! File input and output: single-column data files, atomic writes and the
//! CSV artifacts of runs.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a value
//! read back parses to the identical `f64`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::diagnostics::DiagnosticSummary;
use crate::error::{Error, Result};
use crate::sequential::Trace;

/// Round-trip decimal text of a float.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Reads one numeric value per line. With `has_header` the first non-empty
/// line is skipped; blank lines are ignored.
pub fn read_single_column(path: &Path, has_header: bool) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(false)
        .from_path(path)?;
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != 1 {
            return Err(Error::invalid(format!(
                "{}: line {} has {} columns, expected 1",
                path.display(),
                i + 1 + usize::from(has_header),
                record.len()
            )));
        }
        let text = record[0].trim();
        if text.is_empty() {
            continue;
        }
        let v: f64 = text.parse().map_err(|_| {
            Error::invalid(format!("{}: {text:?} is not a number", path.display()))
        })?;
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::invalid(format!("{} holds no values", path.display())));
    }
    Ok(values)
}

/// Writes `contents` to a temporary file beside `path`, then renames it into
/// place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Trace CSV: one row per initial design point (iteration 0, criterion
/// `initial`) and one per loop iteration. Rows of the final iteration, which
/// acquires nothing, leave the point columns empty.
pub fn trace_csv(traces: &[(usize, &str, &Trace)], names: &[String]) -> String {
    let mut out = String::from("repeat,iteration,n,estimate,criterion");
    for name in names {
        out.push(',');
        out.push_str(name);
    }
    out.push_str(",y,criterion_value\n");
    let blanks = ",".repeat(names.len());
    for &(repeat, criterion, trace) in traces {
        for (k, (x, y)) in trace.initial.iter().enumerate() {
            let _ = write!(out, "{repeat},0,{},,initial", k + 1);
            for v in x {
                let _ = write!(out, ",{}", fmt_f64(*v));
            }
            let _ = writeln!(out, ",{},", fmt_f64(*y));
        }
        for r in &trace.records {
            let _ = write!(out, "{repeat},{},{},{},{criterion}", r.iteration, r.n, fmt_f64(r.estimate));
            match &r.selection {
                Some(s) => {
                    for v in &s.x {
                        let _ = write!(out, ",{}", fmt_f64(*v));
                    }
                    let _ = writeln!(out, ",{},{}", fmt_f64(s.y), fmt_f64(s.criterion_value));
                }
                None => {
                    let _ = writeln!(out, "{blanks},,");
                }
            }
        }
    }
    out
}

pub fn diagnostics_csv(rows: &[(usize, DiagnosticSummary)]) -> String {
    let mut out = String::from("iteration,min,q25,median,q75,max,n_excluded\n");
    for (i, s) in rows {
        let _ = writeln!(
            out,
            "{i},{},{},{},{},{},{}",
            fmt_f64(s.min),
            fmt_f64(s.q25),
            fmt_f64(s.median),
            fmt_f64(s.q75),
            fmt_f64(s.max),
            s.n_excluded
        );
    }
    out
}
