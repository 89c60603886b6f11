//! Structured experiment reports: JSON as the canonical full record and
//! CSV for the per-step series. All floating-point values are printed
//! with 17 significant digits, enough to reconstruct the exact binary
//! value, so identical runs produce byte-identical output.

use std::io;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

/// Scientific notation with 17 significant digits; −0.0 collapses to
/// 0.0 so arithmetic that merely preserves a sign bit cannot change the
/// rendering.
pub fn sci(value: f64) -> String {
    let value = if value == 0.0 { 0.0 } else { value };
    format!("{value:.16e}")
}

/// Serializer formatter that renders every float through [`sci`]
/// instead of the shortest round-trip form.
struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        writer.write_all(sci(value).as_bytes())
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        writer.write_all(sci(f64::from(value)).as_bytes())
    }
}

/// Canonical JSON rendering (compact, fixed float format, trailing
/// newline).
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFormatter);
    value
        .serialize(&mut ser)
        .expect("report serialization cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("reports are UTF-8")
}

/// Snapshot of the evolving state after one step.
#[derive(Debug, Clone, Serialize)]
pub struct StepMetrics {
    pub step: usize,
    pub halt_prob: f64,
    pub halt_entropy: f64,
    pub comp_purity: f64,
    pub norm: f64,
}

/// The canonical report envelope: what was run, with which inputs, what
/// happened per step and how it ended.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport<P: Serialize, F: Serialize> {
    pub experiment: &'static str,
    pub tool_version: &'static str,
    pub seed: Option<u64>,
    pub parameters: P,
    pub series: Vec<StepMetrics>,
    #[serde(rename = "final")]
    pub final_metrics: F,
}

pub fn envelope<P: Serialize, F: Serialize>(
    experiment: &'static str,
    seed: Option<u64>,
    parameters: P,
    series: Vec<StepMetrics>,
    final_metrics: F,
) -> RunReport<P, F> {
    RunReport {
        experiment,
        tool_version: env!("CARGO_PKG_VERSION"),
        seed,
        parameters,
        series,
        final_metrics,
    }
}

/// CSV rendering of the per-step series (header plus one row per step).
pub fn series_csv(series: &[StepMetrics]) -> String {
    let mut out = String::from("step,halt_prob,halt_entropy,comp_purity,norm\n");
    for row in series {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.step,
            sci(row.halt_prob),
            sci(row.halt_entropy),
            sci(row.comp_purity),
            sci(row.norm)
        ));
    }
    out
}

/// Complex vector as `[re, im]` pairs for JSON embedding.
pub fn complex_pairs(v: &DVector<Complex64>) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_are_printed_with_17_significant_digits() {
        #[derive(Serialize)]
        struct S {
            x: f64,
        }
        let json = to_json(&S { x: 0.5 });
        assert_eq!(json, "{\"x\":5.0000000000000000e-1}\n");
    }

    #[test]
    fn json_round_trips_through_a_generic_parser() {
        let report = envelope(
            "demo",
            Some(7),
            serde_json::json!({"steps": 3}),
            vec![StepMetrics {
                step: 1,
                halt_prob: 1.0 / 3.0,
                halt_entropy: 0.8112781244591328,
                comp_purity: 0.625,
                norm: 1.0,
            }],
            serde_json::json!({"ok": true}),
        );
        let text = to_json(&report);
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["series"][0]["halt_prob"].as_f64().unwrap(), 1.0 / 3.0);
        assert_eq!(
            value["series"][0]["halt_entropy"].as_f64().unwrap(),
            0.8112781244591328
        );
        assert_eq!(value["seed"].as_u64().unwrap(), 7);
        // Re-rendering the parsed value reproduces the float texts.
        assert!(to_json(&value).contains("8.1127812445913283e-1"));
    }

    #[test]
    fn empty_series_is_valid_json_with_an_empty_array() {
        let report = envelope(
            "demo",
            None,
            serde_json::json!({}),
            Vec::new(),
            serde_json::json!({}),
        );
        let value: serde_json::Value = serde_json::from_str(&to_json(&report)).unwrap();
        assert!(value["series"].as_array().unwrap().is_empty());
        assert!(value["seed"].is_null());
    }

    #[test]
    fn csv_has_header_plus_one_row_per_step() {
        let series: Vec<StepMetrics> = (1..=4)
            .map(|step| StepMetrics {
                step,
                halt_prob: 0.0,
                halt_entropy: 0.0,
                comp_purity: 1.0,
                norm: 1.0,
            })
            .collect();
        let csv = series_csv(&series);
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("step,halt_prob"));
        assert!(csv.lines().nth(1).unwrap().starts_with("1,0.0000000000000000e0"));
    }
}
