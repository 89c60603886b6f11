//! Line-oriented textual machine definitions.
//!
//! Grammar (one directive per line, `#` starts a comment):
//!
//! ```text
//! proc_qubits N
//! halt_qubit H
//! rule q s -> q' s' d re im [; q' s' d re im ...]
//! ```
//!
//! `q`/`q'` are processor values in decimal, `s`/`s'` scanned/written
//! bits, `d` is `L` or `R`, and `re im` the successor amplitude. A rule
//! line carries the complete successor superposition for its `(q, s)`
//! source, `;`-separated. The table must be total.

use std::fmt;

use num_complex::Complex64;
use uqtmlab_core::{validate_local, Dir, Error, MachineDef, Successor, TransitionRule};

use crate::report::sci;

/// A parse failure with a 1-based source position where one is known.
#[derive(Debug, Clone)]
pub struct ParseError {
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl ParseError {
    fn at(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError {
            line: Some(line),
            column: Some(column),
            message: message.into(),
        }
    }

    fn on_line(line: usize, message: impl Into<String>) -> Self {
        ParseError {
            line: Some(line),
            column: None,
            message: message.into(),
        }
    }

    pub fn whole_input(message: impl Into<String>) -> Self {
        ParseError {
            line: None,
            column: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l}, column {c}: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            _ => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ParseError {}

/// A whitespace-separated token with its 1-based starting column.
fn tokenize(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

fn parse_num<T: std::str::FromStr>(
    line_no: usize,
    tok: (usize, &str),
    what: &str,
) -> Result<T, ParseError> {
    tok.1.parse().map_err(|_| {
        ParseError::at(line_no, tok.0, format!("expected {what}, found '{}'", tok.1))
    })
}

fn parse_bit(line_no: usize, tok: (usize, &str), what: &str) -> Result<bool, ParseError> {
    match tok.1 {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(ParseError::at(
            line_no,
            tok.0,
            format!("expected {what} (0 or 1), found '{other}'"),
        )),
    }
}

/// One `q' s' d re im` group.
fn parse_successor(
    line_no: usize,
    toks: &[(usize, &str)],
) -> Result<Successor, ParseError> {
    if toks.len() != 5 {
        let col = toks.first().map(|t| t.0).unwrap_or(1);
        return Err(ParseError::at(
            line_no,
            col,
            format!(
                "a successor needs 5 fields (q' s' d re im), found {}",
                toks.len()
            ),
        ));
    }
    let to_proc: u32 = parse_num(line_no, toks[0], "a processor value")?;
    let write = parse_bit(line_no, toks[1], "a written bit")?;
    let dir = match toks[2].1 {
        "L" => Dir::Left,
        "R" => Dir::Right,
        other => {
            return Err(ParseError::at(
                line_no,
                toks[2].0,
                format!("expected direction L or R, found '{other}'"),
            ))
        }
    };
    let re: f64 = parse_num(line_no, toks[3], "a real amplitude part")?;
    let im: f64 = parse_num(line_no, toks[4], "an imaginary amplitude part")?;
    Ok(Successor {
        to_proc,
        write,
        dir,
        amp: Complex64::new(re, im),
    })
}

/// Parses a machine definition. With `validate` set (the default mode),
/// the machine must additionally pass the local well-formedness checks
/// at tolerance `tol`.
pub fn parse_machine_file(
    text: &str,
    validate: bool,
    tol: f64,
) -> Result<MachineDef, ParseError> {
    let mut proc_qubits: Option<(usize, usize)> = None; // (value, line)
    let mut halt_qubit: Option<(usize, usize)> = None;
    let mut rules: Vec<TransitionRule> = Vec::new();
    let mut seen: std::collections::BTreeSet<(u32, bool)> = Default::default();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let toks = tokenize(line);
        let Some(&(_, keyword)) = toks.first() else {
            continue;
        };
        match keyword {
            "proc_qubits" => {
                if proc_qubits.is_some() {
                    return Err(ParseError::on_line(line_no, "duplicate proc_qubits"));
                }
                if toks.len() != 2 {
                    return Err(ParseError::on_line(line_no, "usage: proc_qubits N"));
                }
                proc_qubits = Some((parse_num(line_no, toks[1], "a qubit count")?, line_no));
            }
            "halt_qubit" => {
                if halt_qubit.is_some() {
                    return Err(ParseError::on_line(line_no, "duplicate halt_qubit"));
                }
                if toks.len() != 2 {
                    return Err(ParseError::on_line(line_no, "usage: halt_qubit H"));
                }
                halt_qubit = Some((parse_num(line_no, toks[1], "a qubit index")?, line_no));
            }
            "rule" => {
                if toks.len() < 4 || toks[3].1 != "->" {
                    return Err(ParseError::on_line(
                        line_no,
                        "usage: rule q s -> q' s' d re im [; ...]",
                    ));
                }
                let from_proc: u32 = parse_num(line_no, toks[1], "a processor value")?;
                let from_bit = parse_bit(line_no, toks[2], "a scanned bit")?;
                if !seen.insert((from_proc, from_bit)) {
                    return Err(ParseError::at(
                        line_no,
                        toks[1].0,
                        format!("duplicate rule for state ({from_proc}, {})", u8::from(from_bit)),
                    ));
                }
                let mut successors = Vec::new();
                for group in toks[4..].split(|t| t.1 == ";") {
                    successors.push(parse_successor(line_no, group)?);
                }
                rules.push(TransitionRule {
                    from_proc,
                    from_bit,
                    successors,
                });
            }
            other => {
                return Err(ParseError::at(
                    line_no,
                    toks[0].0,
                    format!("unknown directive '{other}'"),
                ));
            }
        }
    }

    let (proc_qubits, _) = proc_qubits
        .ok_or_else(|| ParseError::whole_input("missing proc_qubits header"))?;
    let (halt_qubit, halt_line) =
        halt_qubit.ok_or_else(|| ParseError::whole_input("missing halt_qubit header"))?;

    let machine = MachineDef::new(proc_qubits, halt_qubit, rules).map_err(|e| match &e {
        Error::InvalidMachine(msg) if msg.contains("halt") => {
            ParseError::on_line(halt_line, msg.clone())
        }
        other => ParseError::whole_input(other.to_string()),
    })?;

    if validate {
        let report = validate_local(&machine, tol);
        if !report.pass() {
            return Err(ParseError::whole_input(format!(
                "machine fails local well-formedness at tolerance {tol:e}: \
                 column norm error {:e}, column orthogonality error {:e}",
                report.column_norm_max_err, report.column_orthogonality_max_err
            )));
        }
    }
    Ok(machine)
}

/// Canonical text form: headers, then one rule line per `(q, s)` source
/// in table order, amplitudes with 17 significant digits so the text
/// round-trips to the identical machine.
pub fn emit_machine(m: &MachineDef) -> String {
    let mut out = String::new();
    out.push_str(&format!("proc_qubits {}\n", m.proc_qubits()));
    out.push_str(&format!("halt_qubit {}\n", m.halt_index()));
    for rule in m.rules() {
        let groups: Vec<String> = rule
            .successors
            .iter()
            .map(|s| {
                format!(
                    "{} {} {} {} {}",
                    s.to_proc,
                    u8::from(s.write),
                    match s.dir {
                        Dir::Left => "L",
                        Dir::Right => "R",
                    },
                    sci(s.amp.re),
                    sci(s.amp.im),
                )
            })
            .collect();
        out.push_str(&format!(
            "rule {} {} -> {}\n",
            rule.from_proc,
            u8::from(rule.from_bit),
            groups.join(" ; ")
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use uqtmlab_core::{hadamard_split_machine, identity_machine, shift_counter_machine};

    const MINIMAL: &str = "\
# one inert qubit, head walks right
proc_qubits 1
halt_qubit 0
rule 0 0 -> 0 0 R 1.0 0.0
rule 0 1 -> 0 1 R 1.0 0.0
rule 1 0 -> 1 0 R 1.0 0.0
rule 1 1 -> 1 1 R 1.0 0.0
";

    #[test]
    fn minimal_identity_file_parses_and_matches_builder() {
        let m = parse_machine_file(MINIMAL, true, 1e-10).unwrap();
        assert_eq!(m, identity_machine());
    }

    #[test]
    fn missing_rule_is_reported_as_non_total_with_the_pair() {
        let text = MINIMAL.lines().take(6).collect::<Vec<_>>().join("\n");
        let err = parse_machine_file(&text, true, 1e-10).unwrap_err();
        assert!(err.to_string().contains("(1, 1)"), "got: {err}");
    }

    #[test]
    fn syntax_errors_carry_line_and_column() {
        let err = parse_machine_file(
            "proc_qubits 1\nhalt_qubit 0\nrule 0 0 -> 0 0 X 1.0 0.0\n",
            false,
            1e-10,
        )
        .unwrap_err();
        assert_eq!(err.line, Some(3));
        assert_eq!(err.column, Some(17));
        assert!(err.to_string().contains("direction"));
    }

    #[test]
    fn duplicate_rule_is_rejected_at_its_line() {
        let text = format!("{MINIMAL}rule 0 0 -> 0 0 L 1.0 0.0\n");
        let err = parse_machine_file(&text, false, 1e-10).unwrap_err();
        assert_eq!(err.line, Some(8));
        assert!(err.to_string().contains("duplicate rule"));
    }

    #[test]
    fn non_unitary_machine_is_rejected_only_when_validating() {
        // Sub-normalized amplitudes: structurally fine, locally ill-formed.
        let text = "\
proc_qubits 1
halt_qubit 0
rule 0 0 -> 0 0 R 0.5 0.0
rule 0 1 -> 0 1 R 1.0 0.0
rule 1 0 -> 1 0 R 1.0 0.0
rule 1 1 -> 1 1 R 1.0 0.0
";
        assert!(parse_machine_file(text, false, 1e-10).is_ok());
        let err = parse_machine_file(text, true, 1e-10).unwrap_err();
        assert!(err.to_string().contains("well-formedness"));
    }

    #[test]
    fn emit_parse_round_trip_is_identity() {
        for m in [
            identity_machine(),
            hadamard_split_machine(),
            shift_counter_machine(4, 29).unwrap(),
        ] {
            let text = emit_machine(&m);
            let back = parse_machine_file(&text, true, 1e-10).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn multi_successor_rules_round_trip() {
        let m = hadamard_split_machine();
        let text = emit_machine(&m);
        // Every rule of the split machine superposes two successors.
        assert!(text.lines().filter(|l| l.contains(';')).count() >= 4);
        assert_eq!(parse_machine_file(&text, true, 1e-10).unwrap(), m);
    }
}
