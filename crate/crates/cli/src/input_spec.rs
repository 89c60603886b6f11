//! Basis-configuration input specifications of the form
//! `head=0 proc=3 tape=0101 offset=-1`: whitespace-separated `key=value`
//! fields, all optional. `tape` lists cell contents starting at
//! `offset` (default 0), so character i describes cell `offset + i`.

use num_complex::Complex64;
use uqtmlab_core::{Config, SparseState};

use crate::machine_file::ParseError;

fn field_err(spec: &str, message: String) -> ParseError {
    ParseError::whole_input(format!("input spec '{spec}': {message}"))
}

/// Parses one basis-state specification against a machine's processor
/// width.
pub fn parse_input_spec(spec: &str, proc_qubits: usize) -> Result<Config, ParseError> {
    let mut head: i64 = 0;
    let mut proc: u32 = 0;
    let mut tape = "";
    let mut offset: i64 = 0;
    for field in spec.split_whitespace() {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| field_err(spec, format!("field '{field}' is not key=value")))?;
        match key {
            "head" => {
                head = value
                    .parse()
                    .map_err(|_| field_err(spec, format!("bad head position '{value}'")))?;
            }
            "proc" => {
                proc = value
                    .parse()
                    .map_err(|_| field_err(spec, format!("bad processor value '{value}'")))?;
            }
            "tape" => tape = value,
            "offset" => {
                offset = value
                    .parse()
                    .map_err(|_| field_err(spec, format!("bad tape offset '{value}'")))?;
            }
            other => return Err(field_err(spec, format!("unknown field '{other}'"))),
        }
    }
    if proc_qubits < 32 && proc >= (1u32 << proc_qubits) {
        return Err(field_err(
            spec,
            format!("processor value {proc} does not fit in {proc_qubits} qubits"),
        ));
    }
    let mut ones = Vec::new();
    for (i, ch) in tape.chars().enumerate() {
        match ch {
            '0' => {}
            '1' => ones.push(offset + i as i64),
            other => {
                return Err(field_err(
                    spec,
                    format!("tape uses only 0 and 1, found '{other}'"),
                ))
            }
        }
    }
    Ok(Config::new(head, proc_qubits, proc, ones))
}

/// Parses a complex weight written as `re` or `re,im`.
pub fn parse_complex(text: &str) -> Result<Complex64, ParseError> {
    let (re, im) = match text.split_once(',') {
        Some((re, im)) => (re, im),
        None => (text, "0"),
    };
    let bad = || ParseError::whole_input(format!("bad complex weight '{text}'"));
    Ok(Complex64::new(
        re.parse().map_err(|_| bad())?,
        im.parse().map_err(|_| bad())?,
    ))
}

/// Builds the (normalized) initial state from a primary spec and an
/// optional superposed second spec with weights.
pub fn build_input_state(
    primary: &str,
    superpose: Option<&str>,
    w0: Complex64,
    w1: Complex64,
    proc_qubits: usize,
) -> Result<SparseState, ParseError> {
    let c0 = parse_input_spec(primary, proc_qubits)?;
    let state = match superpose {
        None => SparseState::basis(c0),
        Some(second) => {
            let c1 = parse_input_spec(second, proc_qubits)?;
            uqtmlab_core::superpose(
                w0,
                &SparseState::basis(c0),
                w1,
                &SparseState::basis(c1),
            )
        }
    };
    state
        .normalized()
        .map_err(|_| ParseError::whole_input("input state has zero norm"))
}
