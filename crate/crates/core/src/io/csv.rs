//! Two-column signal CSV: a `t_seconds,value` header, then one row per sample.
//!
//! Values are written in scientific notation with 10 significant digits, so a
//! write/read cycle keeps every value within 5e-10 relative error.

use std::fmt::Write as _;
use std::path::Path;

use super::FormatError;

const HEADER: &str = "t_seconds,value";

pub fn format_signal_csv(times: &[f64], values: &[f64]) -> Result<String, FormatError> {
    if times.len() != values.len() {
        return Err(FormatError::Shape(format!(
            "{} timestamps for {} values",
            times.len(),
            values.len()
        )));
    }
    let mut out = String::with_capacity(32 * (times.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for (t, v) in times.iter().zip(values) {
        writeln!(out, "{t:.9e},{v:.9e}").expect("writing to String");
    }
    Ok(out)
}

/// Parses CSV text into `(times, values)`. Line numbers in errors are 1-based
/// and count the header.
pub fn parse_signal_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>), FormatError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        Some((_, h)) => {
            return Err(FormatError::Csv {
                line: 1,
                reason: format!("expected header {HEADER:?}, found {:?}", h.trim()),
            })
        }
        None => {
            return Err(FormatError::Csv {
                line: 1,
                reason: format!("empty file, expected header {HEADER:?}"),
            })
        }
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let (Some(t), Some(v), None) = (cells.next(), cells.next(), cells.next()) else {
            return Err(FormatError::Csv {
                line: line_no,
                reason: "expected exactly two columns".into(),
            });
        };
        let parse = |cell: &str| -> Result<f64, FormatError> {
            cell.trim().parse::<f64>().map_err(|_| FormatError::Csv {
                line: line_no,
                reason: format!("non-numeric cell {cell:?}"),
            })
        };
        times.push(parse(t)?);
        values.push(parse(v)?);
    }
    Ok((times, values))
}

pub fn write_signal_csv(
    path: impl AsRef<Path>,
    times: &[f64],
    values: &[f64],
) -> Result<(), FormatError> {
    std::fs::write(path, format_signal_csv(times, values)?)?;
    Ok(())
}

pub fn read_signal_csv(path: impl AsRef<Path>) -> Result<(Vec<f64>, Vec<f64>), FormatError> {
    parse_signal_csv(&std::fs::read_to_string(path)?)
}
