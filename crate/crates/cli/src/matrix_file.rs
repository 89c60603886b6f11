//! Textual complex matrices: a `dim D` header followed by D rows of D
//! whitespace-separated `re,im` pairs. `#` starts a comment.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::machine_file::ParseError;
use crate::report::sci;

fn parse_entry(line_no: usize, col: usize, tok: &str) -> Result<Complex64, ParseError> {
    let err = || ParseError {
        line: Some(line_no),
        column: Some(col),
        message: format!("expected a complex entry 're,im', found '{tok}'"),
    };
    let (re, im) = tok.split_once(',').ok_or_else(err)?;
    Ok(Complex64::new(
        re.parse().map_err(|_| err())?,
        im.parse().map_err(|_| err())?,
    ))
}

pub fn parse_matrix_file(text: &str) -> Result<DMatrix<Complex64>, ParseError> {
    let mut dim: Option<usize> = None;
    let mut rows: Vec<Vec<Complex64>> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let mut toks = Vec::new();
        let mut start: Option<usize> = None;
        for (j, ch) in line.char_indices() {
            if ch.is_whitespace() {
                if let Some(s) = start.take() {
                    toks.push((s + 1, &line[s..j]));
                }
            } else if start.is_none() {
                start = Some(j);
            }
        }
        if let Some(s) = start {
            toks.push((s + 1, &line[s..]));
        }
        if toks.is_empty() {
            continue;
        }
        match dim {
            None => {
                if toks.len() != 2 || toks[0].1 != "dim" {
                    return Err(ParseError {
                        line: Some(line_no),
                        column: Some(toks[0].0),
                        message: "expected header 'dim D'".into(),
                    });
                }
                let d: usize = toks[1].1.parse().map_err(|_| ParseError {
                    line: Some(line_no),
                    column: Some(toks[1].0),
                    message: format!("expected a dimension, found '{}'", toks[1].1),
                })?;
                if d == 0 {
                    return Err(ParseError {
                        line: Some(line_no),
                        column: Some(toks[1].0),
                        message: "dimension must be ≥ 1".into(),
                    });
                }
                dim = Some(d);
            }
            Some(d) => {
                if rows.len() == d {
                    return Err(ParseError {
                        line: Some(line_no),
                        column: Some(toks[0].0),
                        message: format!("matrix already has {d} rows"),
                    });
                }
                if toks.len() != d {
                    return Err(ParseError {
                        line: Some(line_no),
                        column: Some(toks[0].0),
                        message: format!("expected {d} entries, found {}", toks.len()),
                    });
                }
                let mut row = Vec::with_capacity(d);
                for (col, tok) in toks {
                    row.push(parse_entry(line_no, col, tok)?);
                }
                rows.push(row);
            }
        }
    }

    let dim = dim.ok_or_else(|| ParseError::whole_input("missing 'dim D' header"))?;
    if rows.len() != dim {
        return Err(ParseError::whole_input(format!(
            "expected {dim} matrix rows, found {}",
            rows.len()
        )));
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
}

/// Canonical text form with 17 significant digits per part, so the file
/// round-trips to the identical matrix.
pub fn emit_matrix(m: &DMatrix<Complex64>) -> String {
    let mut out = format!("dim {}\n", m.nrows());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{},{}", sci(m[(i, j)].re), sci(m[(i, j)].im)))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use uqtmlab_core::{gate_hadamard, gate_phase};

    #[test]
    fn parses_a_two_by_two_matrix() {
        let text = "dim 2\n0,0 1,0\n1,0 0,0\n";
        let m = parse_matrix_file(text).unwrap();
        assert_eq!(m[(0, 1)], Complex64::new(1.0, 0.0));
        assert_eq!(m[(0, 0)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn emit_parse_round_trip_is_identity() {
        for u in [gate_hadamard(), gate_phase(0.25 * std::f64::consts::PI)] {
            let text = emit_matrix(u.matrix());
            assert_eq!(&parse_matrix_file(&text).unwrap(), u.matrix());
        }
    }

    #[test]
    fn row_arity_errors_carry_positions() {
        let err = parse_matrix_file("dim 2\n1,0\n").unwrap_err();
        assert_eq!(err.line, Some(2));
        assert!(err.to_string().contains("expected 2 entries"));
        let err = parse_matrix_file("dim 2\n1,0 0,0\n0,0 bad\n").unwrap_err();
        assert_eq!(err.line, Some(3));
        assert_eq!(err.column, Some(5));
    }

    #[test]
    fn missing_rows_are_rejected() {
        let err = parse_matrix_file("dim 2\n1,0 0,0\n").unwrap_err();
        assert!(err.to_string().contains("expected 2 matrix rows"));
    }
}
