//! Plain-text matrix format.
//!
//! ```text
//! # optional comment lines
//! 2 2
//! 0:0 1:0
//! 0:0 0:0.5
//! ```
//!
//! The header gives rows and columns; each following line holds one row of
//! `re:im` tokens. A bare real token is accepted on input.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use super::{NumError, Operator};

/// Shortest round-trip decimal text for `x`.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Fixed 17-significant-digit scientific text, as used in CSV output.
pub fn format_sig17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn format_matrix(m: &Operator) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| {
                format!(
                    "{}:{}",
                    format_float(m[(i, j)].re),
                    format_float(m[(i, j)].im)
                )
            })
            .collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

fn parse_float(tok: &str, line: usize) -> Result<f64, NumError> {
    let v: f64 = tok.parse().map_err(|_| NumError::Parse {
        line,
        message: format!("invalid number {tok:?}"),
    })?;
    if !v.is_finite() {
        return Err(NumError::Parse {
            line,
            message: format!("non-finite number {tok:?}"),
        });
    }
    Ok(v)
}

fn parse_entry(tok: &str, line: usize) -> Result<Complex64, NumError> {
    match tok.split_once(':') {
        Some((re, im)) => Ok(Complex64::new(
            parse_float(re, line)?,
            parse_float(im, line)?,
        )),
        None => Ok(Complex64::new(parse_float(tok, line)?, 0.0)),
    }
}

pub fn parse_matrix(text: &str) -> Result<Operator, NumError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or(NumError::Parse {
        line: 1,
        message: "missing header".into(),
    })?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(NumError::Parse {
            line: hline,
            message: "header must be `rows cols`".into(),
        });
    }
    let parse_dim = |s: &str| {
        s.parse::<usize>().map_err(|_| NumError::Parse {
            line: hline,
            message: format!("invalid dimension {s:?}"),
        })
    };
    let (rows, cols) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
    let mut m = Operator::zeros(rows, cols);
    for i in 0..rows {
        let (ln, row) = lines.next().ok_or(NumError::Parse {
            line: hline + i + 1,
            message: format!("expected {rows} rows, found {i}"),
        })?;
        let toks: Vec<&str> = row.split_whitespace().collect();
        if toks.len() != cols {
            return Err(NumError::Parse {
                line: ln,
                message: format!("expected {cols} entries, found {}", toks.len()),
            });
        }
        for (j, tok) in toks.iter().enumerate() {
            m[(i, j)] = parse_entry(tok, ln)?;
        }
    }
    if let Some((ln, _)) = lines.next() {
        return Err(NumError::Parse {
            line: ln,
            message: "trailing data after matrix".into(),
        });
    }
    Ok(m)
}

pub fn read_matrix(path: &Path) -> Result<Operator, NumError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| NumError::Io(format!("{}: {e}", path.display())))?;
    parse_matrix(&text)
}

pub fn write_matrix(path: &Path, m: &Operator) -> Result<(), NumError> {
    std::fs::write(path, format_matrix(m))
        .map_err(|e| NumError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::c;

    #[test]
    fn golden_round_trip_is_bytewise() {
        let golden = "2 2\n0:0 1:0\n0:0 0.5:-0.25\n";
        let m = parse_matrix(golden).unwrap();
        assert_eq!(m[(1, 1)], c(0.5, -0.25));
        assert_eq!(format_matrix(&m), golden);
    }

    #[test]
    fn tiny_and_huge_entries_round_trip() {
        let m = Operator::from_fn(1, 3, |_, j| c([1e-300, 6.02e23, -1.0 / 3.0][j], 0.0));
        let back = parse_matrix(&format_matrix(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn sig17_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, 1.0] {
            let s = format_sig17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_sig17(1.0), "1.0000000000000000e0");
        assert_eq!(format_sig17(f64::INFINITY), "inf");
    }

    #[test]
    fn parse_errors_report_lines() {
        let err = parse_matrix("# c\n2 2\n1 2\n3\n").unwrap_err();
        assert_eq!(
            err,
            NumError::Parse {
                line: 4,
                message: "expected 2 entries, found 1".into()
            }
        );
        assert!(matches!(
            parse_matrix("1 1\nnan\n"),
            Err(NumError::Parse { line: 2, .. })
        ));
        assert!(matches!(parse_matrix(""), Err(NumError::Parse { .. })));
    }
}
