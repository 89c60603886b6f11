//! Command-line driver: machine validation, unmonitored and monitored
//! evolution, the halt-entanglement demonstration, branch
//! synchronization, program search, gate-array experiments and the
//! cycled-array simulation. Exit codes: 0 on success, 1 when a check
//! fails, 2 on usage, parse or I/O errors.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use uqtmlab::input_spec::{build_input_state, parse_complex, parse_input_spec};
use uqtmlab::machine_file::{emit_machine, parse_machine_file, ParseError};
use uqtmlab::matrix_file::{emit_matrix, parse_matrix_file};
use uqtmlab::report::{
    complex_pairs, envelope, series_csv, to_json, StepMetrics,
};
use uqtmlab_core as core;
use uqtmlab_core::{
    DenseUnitary, GateArrayModel, MachineDef, ProgramVector, QubitId, SparseState,
};

// ---------------------------------------------------------------------
// Error plumbing
// ---------------------------------------------------------------------

#[derive(Debug)]
enum CliError {
    Usage(String),
    Parse(ParseError),
    Io { path: PathBuf, source: std::io::Error },
    Core(core::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Parse(e) => write!(f, "{e}"),
            CliError::Io { path, source } => {
                write!(f, "{}: {source}", path.display())
            }
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::Parse(e)
    }
}

impl From<core::Error> for CliError {
    fn from(e: core::Error) -> Self {
        CliError::Core(e)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

// ---------------------------------------------------------------------
// Shared argument bundles
// ---------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Report format; CSV carries only the per-step series.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OutputArgs {
    fn emit_report<T: Serialize>(
        &self,
        report: &T,
        series: Option<&[StepMetrics]>,
    ) -> Result<(), CliError> {
        let text = match self.format {
            Format::Json => to_json(report),
            Format::Csv => match series {
                Some(series) => series_csv(series),
                None => {
                    return Err(usage(
                        "this experiment has no per-step series; use --format json",
                    ))
                }
            },
        };
        self.write(&text)
    }

    fn write(&self, text: &str) -> Result<(), CliError> {
        match &self.out {
            Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            }),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

#[derive(Args, Debug)]
struct MachineArgs {
    /// Machine definition file.
    #[arg(long)]
    machine: PathBuf,
    /// Skip the local well-formedness checks normally run at parse time.
    #[arg(long)]
    no_validate: bool,
    /// Tolerance for the parse-time well-formedness checks.
    #[arg(long, default_value_t = core::DEFAULT_UNITARY_TOL)]
    machine_tol: f64,
}

impl MachineArgs {
    fn load(&self) -> Result<MachineDef, CliError> {
        let text = read_file(&self.machine)?;
        Ok(parse_machine_file(
            &text,
            !self.no_validate,
            self.machine_tol,
        )?)
    }
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Initial basis configuration, e.g. "head=0 proc=0 tape=0101".
    #[arg(long, default_value = "")]
    input: String,
    /// Second basis configuration to superpose with the first.
    #[arg(long)]
    superpose: Option<String>,
    /// Weight of the primary configuration ("re" or "re,im").
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    w0: String,
    /// Weight of the superposed configuration ("re" or "re,im").
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    w1: String,
}

impl InputArgs {
    fn state(&self, proc_qubits: usize) -> Result<SparseState, CliError> {
        Ok(build_input_state(
            &self.input,
            self.superpose.as_deref(),
            parse_complex(&self.w0)?,
            parse_complex(&self.w1)?,
            proc_qubits,
        )?)
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "input": self.input,
            "superpose": self.superpose,
            "w0": self.w0,
            "w1": self.w1,
        })
    }
}

/// Selects a gate array: a swap array, a controlled array over a gate
/// list, or a raw unitary file with an explicit data-register split.
#[derive(Args, Debug)]
struct GateArrayArgs {
    /// Use the m-qubit swap array.
    #[arg(long)]
    swap: Option<usize>,
    /// Build a controlled array over these gates (builtin names or
    /// @FILE matrix paths, comma separated).
    #[arg(long, value_delimiter = ',')]
    controlled: Vec<String>,
    /// Read the full array from a matrix file (requires --m-data).
    #[arg(long)]
    array: Option<PathBuf>,
    /// Number of data qubits of --array.
    #[arg(long)]
    m_data: Option<usize>,
}

impl GateArrayArgs {
    fn resolve(&self) -> Result<GateArrayModel, CliError> {
        let picked = usize::from(self.swap.is_some())
            + usize::from(!self.controlled.is_empty())
            + usize::from(self.array.is_some());
        if picked > 1 {
            return Err(usage(
                "--swap, --controlled and --array are mutually exclusive",
            ));
        }
        if let Some(m) = self.swap {
            return Ok(core::build_swap_array(m)?);
        }
        if !self.controlled.is_empty() {
            let units = self
                .controlled
                .iter()
                .map(|name| load_gate(name))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(core::build_controlled_u_array(&units)?);
        }
        if let Some(path) = &self.array {
            let m_data = self
                .m_data
                .ok_or_else(|| usage("--array requires --m-data"))?;
            let g = DenseUnitary::new(parse_matrix_file(&read_file(path)?)?)?;
            let qubits = g.n_qubits().ok_or_else(|| {
                usage("the array dimension must be a power of two")
            })?;
            if m_data == 0 || m_data >= qubits {
                return Err(usage(format!(
                    "--m-data must leave at least one program qubit of the {qubits}"
                )));
            }
            return Ok(GateArrayModel::new(g, m_data, qubits - m_data)?);
        }
        Err(usage("select a gate array with --swap, --controlled or --array"))
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "swap": self.swap,
            "controlled": self.controlled,
            "array": self.array.as_ref().map(|p| p.display().to_string()),
            "m_data": self.m_data,
        })
    }
}

/// A gate by builtin name (`identity`, `x`, `hadamard`, `phase:PHI`,
/// `ry:THETA`) or from a matrix file (`@PATH`).
fn load_gate(name: &str) -> Result<DenseUnitary, CliError> {
    if let Some(path) = name.strip_prefix('@') {
        return Ok(DenseUnitary::new(parse_matrix_file(&read_file(
            Path::new(path),
        )?)?)?);
    }
    let gate = match name.split_once(':') {
        None => match name {
            "identity" => core::gate_identity(),
            "x" => core::gate_x(),
            "hadamard" => core::gate_hadamard(),
            other => {
                return Err(usage(format!(
                    "unknown gate '{other}' (try identity, x, hadamard, phase:PHI, \
                     ry:THETA or @FILE)"
                )))
            }
        },
        Some((kind, arg)) => {
            let angle: f64 = arg
                .parse()
                .map_err(|_| usage(format!("bad gate angle '{arg}'")))?;
            match kind {
                "phase" => core::gate_phase(angle),
                "ry" => core::gate_ry(angle),
                other => return Err(usage(format!("unknown gate family '{other}'"))),
            }
        }
    };
    Ok(gate)
}

fn parse_qubit_list(text: &str) -> Result<Vec<QubitId>, CliError> {
    text.split(',')
        .map(|tok| {
            let tok = tok.trim();
            if let Some(idx) = tok.strip_prefix('p') {
                idx.parse()
                    .map(QubitId::Proc)
                    .map_err(|_| usage(format!("bad processor qubit '{tok}'")))
            } else if let Some(cell) = tok.strip_prefix('t') {
                cell.parse()
                    .map(QubitId::Tape)
                    .map_err(|_| usage(format!("bad tape qubit '{tok}'")))
            } else {
                Err(usage(format!(
                    "qubit '{tok}' must be pN (processor) or tN (tape cell)"
                )))
            }
        })
        .collect()
}

fn parse_cell_list(text: &str) -> Result<Vec<i64>, CliError> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse()
                .map_err(|_| usage(format!("bad tape cell '{tok}'")))
        })
        .collect()
}

fn exit_check(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

// ---------------------------------------------------------------------
// Command definitions
// ---------------------------------------------------------------------

#[derive(Parser, Debug)]
#[command(
    name = "uqtmlab",
    version,
    about = "Quantum Turing machine and programmable gate array testbed"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check local well-formedness and windowed global unitarity.
    Validate {
        #[command(flatten)]
        machine: MachineArgs,
        /// Unitarity tolerance.
        #[arg(long, default_value_t = core::DEFAULT_UNITARY_TOL)]
        tol: f64,
        /// Cyclic window lengths to certify (comma separated).
        #[arg(long, value_delimiter = ',', default_values_t = vec![2usize, 3, 4])]
        window: Vec<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Evolve an input without observation and report per-step metrics.
    Run {
        #[command(flatten)]
        machine: MachineArgs,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        steps: usize,
        /// Drop terms with squared amplitude below this after each step.
        #[arg(long, default_value_t = core::DEFAULT_PRUNE_THRESHOLD)]
        prune: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Evolve with a projective halt measurement after every step.
    Monitor {
        #[command(flatten)]
        machine: MachineArgs,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Two-branch halt-entanglement demonstration.
    Myers {
        /// Steps until the blank-tape branch halts.
        #[arg(long)]
        na: usize,
        /// Steps until the marked-tape branch halts.
        #[arg(long)]
        nb: usize,
        /// Step at which the diagnostics are reported.
        #[arg(long)]
        probe: usize,
        /// Guaranteed halt-stability horizon (default 2·nb).
        #[arg(long)]
        horizon: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Check whether two branches reach their targets after the same
    /// number of steps, and that the superposed run then also does.
    BranchSync {
        #[command(flatten)]
        machine: MachineArgs,
        /// Program bits written ahead of both branches ("" for none).
        #[arg(long, default_value = "")]
        program: String,
        #[arg(long, default_value_t = 0)]
        program_offset: i64,
        /// Branch inputs and targets as input specs.
        #[arg(long)]
        branch0: String,
        #[arg(long)]
        branch1: String,
        #[arg(long)]
        target0: String,
        #[arg(long)]
        target1: String,
        #[arg(long, default_value_t = 1e-9)]
        epsilon: f64,
        #[arg(long)]
        horizon: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Enumerate classical programs (shortest first) until one drives
    /// the data register to the target.
    ConcatSearch {
        #[command(flatten)]
        machine: MachineArgs,
        /// Data-register input spec (must be blank on the program cells).
        #[arg(long, default_value = "")]
        data: String,
        #[arg(long)]
        data_superpose: Option<String>,
        #[arg(long, default_value = "1", allow_hyphen_values = true)]
        dw0: String,
        #[arg(long, default_value = "1", allow_hyphen_values = true)]
        dw1: String,
        /// Target state spec for the data register.
        #[arg(long)]
        target: String,
        #[arg(long)]
        target_superpose: Option<String>,
        #[arg(long, default_value = "1", allow_hyphen_values = true)]
        tw0: String,
        #[arg(long, default_value = "1", allow_hyphen_values = true)]
        tw1: String,
        /// Data register qubits, e.g. "p1" or "p1,t3".
        #[arg(long)]
        data_qubits: String,
        /// Tape cells candidate programs are written to (default 0..max-len).
        #[arg(long)]
        program_cells: Option<String>,
        #[arg(long)]
        max_len: usize,
        #[arg(long)]
        horizon: usize,
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
        /// Evaluate candidates serially instead of in parallel.
        #[arg(long)]
        serial: bool,
        /// Cap on (program, step) evaluations.
        #[arg(long, default_value_t = 1_000_000)]
        budget: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Verify that a program implements a target gate on every data state.
    GateCheck {
        #[command(flatten)]
        array: GateArrayArgs,
        /// Target gate (builtin name or @FILE).
        #[arg(long)]
        target: String,
        /// Program register basis state to check.
        #[arg(long, default_value_t = 0)]
        program_basis: usize,
        #[arg(long, default_value_t = 1e-9)]
        epsilon: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Overlap matrix of the programs implementing a controlled array's
    /// gate list; distinct gates must use orthogonal programs.
    GateOrth {
        /// Gates of the controlled array (builtin names or @FILE); the
        /// default is the identity/x/phase:π4/hadamard set.
        #[arg(long, value_delimiter = ',')]
        gates: Vec<String>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 1e-9)]
        epsilon: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Maximize data-register fidelity to a target gate over program
    /// vectors.
    GateOptimize {
        #[command(flatten)]
        array: GateArrayArgs,
        /// Target gate (builtin name or @FILE).
        #[arg(long)]
        target: String,
        /// Data register basis state.
        #[arg(long, default_value_t = 0)]
        data_basis: usize,
        /// Draw a seeded random data state instead.
        #[arg(long)]
        data_random: Option<u64>,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        #[arg(long, default_value_t = 500)]
        iters: usize,
        #[arg(long, default_value_t = 1e-6)]
        epsilon: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Data-dependent programs on the swap array: exact effect with a
    /// small program register, non-orthogonal programs for distinct gates.
    SwapDemo {
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Apply the windowed step operator repeatedly with a halt check
    /// each cycle.
    Cycle {
        #[command(flatten)]
        machine: MachineArgs,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        window: usize,
        #[arg(long)]
        max_iters: usize,
        /// exact: stop at the halt-probability threshold, no collapse;
        /// sampled: projectively measure each cycle.
        #[arg(long, value_enum, default_value_t = CycleMode::Exact)]
        mode: CycleMode,
        #[arg(long, default_value_t = core::DEFAULT_HALT_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Squared distance between the windowed cycle and the sparse run.
    Equiv {
        #[command(flatten)]
        machine: MachineArgs,
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        window: usize,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Program-register size demanded by the counting argument.
    Params {
        #[arg(long)]
        m: u32,
        /// plain prints the bare tuple; json wraps it in a full report.
        #[arg(long, value_enum, default_value_t = ParamsFormat::Plain)]
        format: ParamsFormat,
        /// Write the output here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a bundled machine or gate in its canonical text form.
    EmitBuiltin {
        /// machine:identity, machine:hadamard_split, machine:myers_2_5,
        /// gate:identity, gate:x, gate:hadamard, gate:phase:PHI or
        /// gate:ry:THETA.
        #[arg(long)]
        what: String,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CycleMode {
    Exact,
    Sampled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ParamsFormat {
    Plain,
    Json,
}

// ---------------------------------------------------------------------
// Metric helpers
// ---------------------------------------------------------------------

fn metrics_row(
    state: &SparseState,
    halt_index: usize,
    step: usize,
) -> Result<StepMetrics, CliError> {
    let m = core::state_metrics(state, halt_index)?;
    Ok(StepMetrics {
        step,
        halt_prob: m.halt_prob,
        halt_entropy: m.halt_entropy,
        comp_purity: m.comp_purity,
        norm: m.norm,
    })
}

fn program_pairs(p: &ProgramVector) -> Vec<[f64; 2]> {
    complex_pairs(p.as_vector())
}

// ---------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------

fn cmd_validate(
    machine: MachineArgs,
    tol: f64,
    windows: Vec<usize>,
    output: OutputArgs,
) -> Result<ExitCode, CliError> {
    let text = read_file(&machine.machine)?;
    // Structural parse only; this command reports the checks itself.
    let m = parse_machine_file(&text, false, tol)?;
    let local = core::validate_local(&m, tol);
    let mut window_errs = Vec::new();
    let mut pass = local.pass();
    for len in &windows {
        let err = core::window_unitarity_err(&m, *len)?;
        pass &= err <= tol;
        window_errs.push(serde_json::json!({
            "window_len": len,
            "unitarity_err": err,
        }));
    }
    let report = envelope(
        "validate",
        None,
        serde_json::json!({
            "machine": machine.machine.display().to_string(),
            "tol": tol,
            "windows": windows,
        }),
        Vec::new(),
        serde_json::json!({
            "proc_qubits": m.proc_qubits(),
            "halt_qubit": m.halt_index(),
            "column_norm_max_err": local.column_norm_max_err,
            "column_orthogonality_max_err": local.column_orthogonality_max_err,
            "window_unitarity": window_errs,
            "pass": pass,
        }),
    );
    output.emit_report(&report, None)?;
    Ok(exit_check(pass))
}

fn cmd_run(
    machine: MachineArgs,
    input: InputArgs,
    steps: usize,
    prune: f64,
    output: OutputArgs,
) -> Result<ExitCode, CliError> {
    let m = machine.load()?;
    let mut state = input.state(m.proc_qubits())?;
    let mut series = Vec::with_capacity(steps);
    for k in 1..=steps {
        state = core::step_with_threshold(&m, &state, prune);
        series.push(metrics_row(&state, m.halt_index(), k)?);
    }
    let last = series.last().cloned();
    let report = envelope(
        "run",
        None,
        serde_json::json!({
            "machine": machine.machine.display().to_string(),
            "state": input.describe(),
            "steps": steps,
            "prune": prune,
        }),
        series,
        serde_json::json!({
            "support": state.len(),
            "metrics": last,
        }),
    );
    output.emit_report(&report, Some(&report.series))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_monitor(
    machine: MachineArgs,
    input: InputArgs,
    steps: usize,
    seed: u64,
    output: OutputArgs,
) -> Result<ExitCode, CliError> {
    let m = machine.load()?;
    let state = input.state(m.proc_qubits())?;
    let outcome = core::run_monitored(&m, &state, steps, seed);
    let trajectory: Vec<serde_json::Value> = outcome
        .trajectory
        .iter()
        .map(|(step, p)| serde_json::json!({"step": step, "halt_prob": p}))
        .collect();
    let report = envelope(
        "monitor",
        Some(seed),
        serde_json::json!({
            "machine": machine.machine.display().to_string(),
            "state": input.describe(),
            "steps": steps,
        }),
        Vec::new(),
        serde_json::json!({
            "halted": outcome.halted,
            "steps_used": outcome.steps_used,
            "trajectory": trajectory,
        }),
    );
    output.emit_report(&report, None)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_myers(
    na: usize,
    nb: usize,
    probe: usize,
    horizon: Option<usize>,
    output: OutputArgs,
) -> Result<ExitCode, CliError> {
    let spec = core::MyersSpec::new(na, nb)?;
    let mm = match horizon {
        Some(h) => core::build_myers_machine_with_horizon(spec, h)?,
        None => core::build_myers_machine(spec)?,
    };
    let m = mm.machine();
    let mut state = mm.superposed_input();
    let mut series = Vec::with_capacity(probe);
    for k in 1..=probe {
        state = core::step(m, &state);
        series.push(metrics_row(&state, m.halt_index(), k)?);
    }
    let demo = core::myers_demo(&mm, probe)?;
    let report = envelope(
        "myers",
        None,
        serde_json::json!({
            "n_a": na,
            "n_b": nb,
            "probe": probe,
            "horizon": mm.horizon(),
            "counter_bits": mm.counter_bits(),
            "v0": mm.v0(),
            "jump": mm.jump(),
            "proc_qubits": m.proc_qubits(),
            "halt_qubit": m.halt_index(),
        }),
        series,
        serde_json::json!({
            "halt_prob": demo.halt_prob,
            "halt_entropy": demo.halt_entropy,
            "comp_purity": demo.comp_purity,
        }),
    );
    output.emit_report(&report, Some(&report.series))?;
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_branch_sync(
    machine: MachineArgs,
    program: String,
    program_offset: i64,
    branch0: String,
    branch1: String,
    target0: String,
    target1: String,
    epsilon: f64,
    horizon: usize,
    output: OutputArgs,
) -> Result<ExitCode, CliError> {
    let m = machine.load()?;
    let p = core::ProgramString::parse(&program)?;
    let b0 = SparseState::basis(parse_input_spec(&branch0, m.proc_qubits())?);
    let b1 = SparseState::basis(parse_input_spec(&branch1, m.proc_qubits())?);
    let t0 = SparseState::basis(parse_input_spec(&target0, m.proc_qubits())?);
    let t1 = SparseState::basis(parse_input_spec(&target1, m.proc_qubits())?);
    let r = core::branch_sync_check(
        &m,
        &p,
        program_offset,
        &b0,
        &b1,
        (&t0, &t1),
        epsilon,
        horizon,
    )?;
    let report = envelope(
        "branch-sync",
        None,
        serde_json::json!({
            "machine": machine.machine.display().to_string(),
            "program": program,
            "program_offset": program_offset,
            "branch0": branch0,
            "branch1": branch1,
            "target0": target0,
            "target1": target1,
            "epsilon": epsilon,
            "horizon": horizon,
        }),
        Vec::new(),
        serde_json::json!({
            "s0": r.s0,
            "s1": r.s1,
            "synchronized": r.synchronized,
            "fidelity0": r.fidelity0,
            "fidelity1": r.fidelity1,
            "superposed_fidelity": r.superposed_fidelity,
        }),
    );
    output.emit_report(&report, None)?;
    Ok(exit_check(r.synchronized))
}

#[allow(clippy::too_many_arguments)]
fn cmd_concat_search(
    machine: MachineArgs,
    data: (String, Option<String>, String, String),
    target: (String, Option<String>, String, String),
    data_qubits: String,
    program_cells: Option<String>,
    max_len: usize,
    horizon: usize,
    epsilon: f64,
    serial: bool,
    budget: u64,
    output: OutputArgs,
) -> Result<ExitCode, CliError> {
    let m = machine.load()?;
    let data_state = build_input_state(
        &data.0,
        data.1.as_deref(),
        parse_complex(&data.2)?,
        parse_complex(&data.3)?,
        m.proc_qubits(),
    )?;
    let target_state = build_input_state(
        &target.0,
        target.1.as_deref(),
        parse_complex(&target.2)?,
        parse_complex(&target.3)?,
        m.proc_qubits(),
    )?;
    let cells = match &program_cells {
        Some(text) => parse_cell_list(text)?,
        None => (0..max_len as i64).collect(),
    };
    let spec = core::ConcatSpec {
        program_cells: cells.clone(),
        data_qubits: parse_qubit_list(&data_qubits)?,
        max_len,
        horizon,
        epsilon,
        parallel: !serial,
        eval_budget: budget,
    };
    let outcome = core::concat_search(&m, &data_state, &target_state, &spec)?;
    let (found, final_metrics) = match &outcome {
        core::ConcatOutcome::Found {
            program,
            steps,
            fidelity,
            purity,
        } => (
            true,
            serde_json::json!({
                "status": "found",
                "program": program.to_string(),
                "steps": steps,
                "fidelity": fidelity,
                "purity": purity,
            }),
        ),
        core::ConcatOutcome::NotFound => {
            (false, serde_json::json!({"status": "not_found"}))
        }
        core::ConcatOutcome::Exhausted { required, budget } => (
            false,
            serde_json::json!({
                "status": "exhausted",
                "required": required,
                "budget": budget,
            }),
        ),
    };
    let report = envelope(
        "concat-search",
        None,
        serde_json::json!({
            "machine": machine.machine.display().to_string(),
            "data": {"input": data.0, "superpose": data.1, "w0": data.2, "w1": data.3},
            "target": {
                "input": target.0, "superpose": target.1, "w0": target.2, "w1": target.3,
            },
            "data_qubits": data_qubits,
            "program_cells": cells,
            "max_len": max_len,
            "horizon": horizon,
            "epsilon": epsilon,
            "parallel": !serial,
            "budget": budget,
        }),
        Vec::new(),
        final_metrics,
    );
    output.emit_report(&report, None)?;
    Ok(exit_check(found))
}

fn cmd_gate_check(
    array: GateArrayArgs,
    target: String,
    program_basis: usize,
    epsilon: f64,
    output: OutputArgs,
) -> Result<ExitCode, CliError> {
    let model = array.resolve()?;
    let u = load_gate(&target)?;
    if program_basis >= model.program_dim() {
        return Err(usage(format!(
            "program basis index {program_basis} outside the {}-dimensional register",
            model.program_dim()
        )));
    }
    let program = ProgramVector::basis(model.p_program(), program_basis);
    let r = core::check_deterministic_program(&model, &u, &program, epsilon)?;
    let report = envelope(
        "gate-check",
        None,
        serde_json::json!({
            "array": array.describe(),
            "target": target,
            "program_basis": program_basis,
            "epsilon": epsilon,
        }),
        Vec::new(),
        serde_json::json!({
            "ok": r.ok,
            "min_fidelity": r.min_fidelity,
            "program_out": r.program_out.as_ref().map(program_pairs),
        }),
    );
    output.emit_report(&report, None)?;
    Ok(exit_check(r.ok))
}

fn cmd_gate_orth(
    gates: Vec<String>,
    tol: f64,
    epsilon: f64,
    output: OutputArgs,
) -> Result<ExitCode, CliError> {
    let units = if gates.is_empty() {
        core::standard_repertoire()
    } else {
        gates
            .iter()
            .map(|name| load_gate(name))
            .collect::<Result<Vec<_>, _>>()?
    };
    let model = core::build_controlled_u_array(&units)?;
    let mut programs = Vec::with_capacity(units.len());
    let mut all_ok = true;
    for (k, u) in units.iter().enumerate() {
        let program = ProgramVector::basis(model.p_program(), k);
        let r = core::check_deterministic_program(&model, u, &program, epsilon)?;
        all_ok &= r.ok;
        programs.push(program);
    }
    let n = units.len();
    let mut overlaps = vec![vec![0.0f64; n]; n];
    let mut violations = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let ov = core::program_overlap(&programs[i], &programs[j]).norm();
            overlaps[i][j] = ov;
            if i != j && !core::phase_equivalent(&units[i], &units[j]) && ov > tol {
                violations.push(serde_json::json!({
                    "i": i,
                    "j": j,
                    "overlap": ov,
                }));
            }
        }
    }
    let pass = all_ok && violations.is_empty();
    let report = envelope(
        "gate-orth",
        None,
        serde_json::json!({
            "gates": gates,
            "gate_count": n,
            "tol": tol,
            "epsilon": epsilon,
        }),
        Vec::new(),
        serde_json::json!({
            "programs_deterministic": all_ok,
            "overlaps": overlaps,
            "violations": violations,
            "pass": pass,
        }),
    );
    output.emit_report(&report, None)?;
    Ok(exit_check(pass))
}

#[allow(clippy::too_many_arguments)]
fn cmd_gate_optimize(
    array: GateArrayArgs,
    target: String,
    data_basis: usize,
    data_random: Option<u64>,
    restarts: usize,
    iters: usize,
    epsilon: f64,
    seed: u64,
    output: OutputArgs,
) -> Result<ExitCode, CliError> {
    let model = array.resolve()?;
    let u = load_gate(&target)?;
    let data = match data_random {
        Some(s) => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(s);
            core::random_state(model.data_dim(), &mut rng)
        }
        None => {
            if data_basis >= model.data_dim() {
                return Err(usage(format!(
                    "data basis index {data_basis} outside the {}-dimensional register",
                    model.data_dim()
                )));
            }
            let mut v = DVector::from_element(model.data_dim(), Complex64::new(0.0, 0.0));
            v[data_basis] = Complex64::new(1.0, 0.0);
            v
        }
    };
    let cfg = core::OptimizeConfig {
        restarts,
        max_iters: iters,
        seed,
    };
    let r = core::optimize_program(&model, &u, &data, epsilon, &cfg)?;
    let report = envelope(
        "gate-optimize",
        Some(seed),
        serde_json::json!({
            "array": array.describe(),
            "target": target,
            "data_basis": data_basis,
            "data_random": data_random,
            "restarts": restarts,
            "iters": iters,
            "epsilon": epsilon,
        }),
        Vec::new(),
        serde_json::json!({
            "fidelity": r.fidelity,
            "converged": r.converged,
            "accepted_iterations": r.trace.len(),
            "program": program_pairs(&r.best),
        }),
    );
    output.emit_report(&report, None)?;
    Ok(exit_check(r.converged))
}

fn cmd_swap_demo(
    m: usize,
    samples: usize,
    seed: u64,
    tol: f64,
    output: OutputArgs,
) -> Result<ExitCode, CliError> {
    let r = core::swap_demo(m, samples, seed)?;
    let pass = r.max_data_distance_sq <= tol;
    let report = envelope(
        "swap-demo",
        Some(seed),
        serde_json::json!({
            "m": m,
            "samples": samples,
            "tol": tol,
        }),
        Vec::new(),
        serde_json::json!({
            "max_data_distance_sq": r.max_data_distance_sq,
            "max_overlap": r.max_overlap,
            "max_overlap_phase_distance": r.max_overlap_phase_distance,
            "max_overlap_sample": r.max_overlap_sample,
            "pass": pass,
        }),
    );
    output.emit_report(&report, None)?;
    Ok(exit_check(pass))
}

#[allow(clippy::too_many_arguments)]
fn cmd_cycle(
    machine: MachineArgs,
    input: InputArgs,
    window: usize,
    max_iters: usize,
    mode: CycleMode,
    threshold: f64,
    seed: u64,
    output: OutputArgs,
) -> Result<ExitCode, CliError> {
    let m = machine.load()?;
    let state = input.state(m.proc_qubits())?;
    let ws = core::WindowStep::new(&m, window)?;
    let v = core::sparse_to_window(&state, ws.layout())?;
    let cfg = core::CycleConfig {
        max_iters,
        mode: match mode {
            CycleMode::Exact => core::HaltMode::Exact { threshold },
            CycleMode::Sampled => core::HaltMode::Sampled { seed },
        },
    };
    let r = core::cycle_run(&ws, ws.layout(), &v, &cfg)?;
    let report = envelope(
        "cycle",
        matches!(mode, CycleMode::Sampled).then_some(seed),
        serde_json::json!({
            "machine": machine.machine.display().to_string(),
            "state": input.describe(),
            "window": window,
            "max_iters": max_iters,
            "mode": match mode {
                CycleMode::Exact => "exact",
                CycleMode::Sampled => "sampled",
            },
            "threshold": threshold,
        }),
        Vec::new(),
        serde_json::json!({
            "halted": r.halted,
            "iterations": r.iterations,
            "per_iter_halt_prob": r.per_iter_halt_prob,
        }),
    );
    output.emit_report(&report, None)?;
    Ok(exit_check(r.halted))
}

fn cmd_equiv(
    machine: MachineArgs,
    input: InputArgs,
    window: usize,
    steps: usize,
    tol: f64,
    output: OutputArgs,
) -> Result<ExitCode, CliError> {
    let m = machine.load()?;
    let state = input.state(m.proc_qubits())?;
    let parameters = serde_json::json!({
        "machine": machine.machine.display().to_string(),
        "state": input.describe(),
        "window": window,
        "steps": steps,
        "tol": tol,
    });
    let (pass, final_metrics) = match core::equivalence_check(&m, window, &state, steps) {
        Ok(d) => (
            d <= tol,
            serde_json::json!({"distance_sq": d, "pass": d <= tol}),
        ),
        Err(core::Error::WindowEscape { step, window_len }) => (
            false,
            serde_json::json!({
                "escaped_at_step": step,
                "window_len": window_len,
                "pass": false,
            }),
        ),
        Err(other) => return Err(other.into()),
    };
    let report = envelope("equiv", None, parameters, Vec::new(), final_metrics);
    output.emit_report(&report, None)?;
    Ok(exit_check(pass))
}

fn cmd_params(
    m: u32,
    format: ParamsFormat,
    out: Option<PathBuf>,
) -> Result<ExitCode, CliError> {
    let (data, unitary, program) = core::program_parameter_count(m)?;
    let output = OutputArgs {
        format: Format::Json,
        out,
    };
    match format {
        ParamsFormat::Json => {
            let report = envelope(
                "params",
                None,
                serde_json::json!({"m": m}),
                Vec::new(),
                serde_json::json!({
                    "data_state_parameters": data,
                    "unitary_family_parameters": unitary,
                    "program_parameters": program,
                }),
            );
            output.emit_report(&report, None)?;
        }
        ParamsFormat::Plain => {
            output.write(&format!("({data}, {unitary}, {program})\n"))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn builtin_machine(name: &str) -> Result<MachineDef, CliError> {
    fn num<T: std::str::FromStr>(tok: &str) -> Result<T, CliError> {
        tok.parse()
            .map_err(|_| usage(format!("bad machine parameter '{tok}'")))
    }
    match name.split(':').collect::<Vec<_>>().as_slice() {
        ["identity"] => Ok(core::identity_machine()),
        ["hadamard_split"] => Ok(core::hadamard_split_machine()),
        ["zigzag_identity"] => Ok(core::zigzag_identity_machine()),
        ["myers_2_5"] => Ok(core::build_myers_machine(core::MyersSpec::new(2, 5)?)?
            .machine()
            .clone()),
        ["myers", na, nb] => {
            Ok(core::build_myers_machine(core::MyersSpec::new(num(na)?, num(nb)?)?)?
                .machine()
                .clone())
        }
        ["shift_counter", bits, jump] => {
            Ok(core::shift_counter_machine(num(bits)?, num(jump)?)?)
        }
        ["program_driven", t0, t1] => {
            Ok(core::program_driven_machine(num(t0)?, num(t1)?))
        }
        _ => Err(usage(format!(
            "unknown builtin machine '{name}' (try identity, hadamard_split, \
             zigzag_identity, myers_2_5, myers:NA:NB, shift_counter:BITS:JUMP or \
             program_driven:THETA0:THETA1)"
        ))),
    }
}

fn cmd_emit_builtin(what: String, output: OutputArgs) -> Result<ExitCode, CliError> {
    let text = match what.strip_prefix("machine:") {
        Some(name) => emit_machine(&builtin_machine(name)?),
        None => match what.strip_prefix("gate:") {
            Some(name) => emit_matrix(load_gate(name)?.matrix()),
            None => {
                return Err(usage(
                    "expected machine:NAME or gate:NAME (see --help for names)",
                ))
            }
        },
    };
    output.write(&text)?;
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Validate {
            machine,
            tol,
            window,
            output,
        } => cmd_validate(machine, tol, window, output),
        Command::Run {
            machine,
            input,
            steps,
            prune,
            output,
        } => cmd_run(machine, input, steps, prune, output),
        Command::Monitor {
            machine,
            input,
            steps,
            seed,
            output,
        } => cmd_monitor(machine, input, steps, seed, output),
        Command::Myers {
            na,
            nb,
            probe,
            horizon,
            output,
        } => cmd_myers(na, nb, probe, horizon, output),
        Command::BranchSync {
            machine,
            program,
            program_offset,
            branch0,
            branch1,
            target0,
            target1,
            epsilon,
            horizon,
            output,
        } => cmd_branch_sync(
            machine,
            program,
            program_offset,
            branch0,
            branch1,
            target0,
            target1,
            epsilon,
            horizon,
            output,
        ),
        Command::ConcatSearch {
            machine,
            data,
            data_superpose,
            dw0,
            dw1,
            target,
            target_superpose,
            tw0,
            tw1,
            data_qubits,
            program_cells,
            max_len,
            horizon,
            epsilon,
            serial,
            budget,
            output,
        } => cmd_concat_search(
            machine,
            (data, data_superpose, dw0, dw1),
            (target, target_superpose, tw0, tw1),
            data_qubits,
            program_cells,
            max_len,
            horizon,
            epsilon,
            serial,
            budget,
            output,
        ),
        Command::GateCheck {
            array,
            target,
            program_basis,
            epsilon,
            output,
        } => cmd_gate_check(array, target, program_basis, epsilon, output),
        Command::GateOrth {
            gates,
            tol,
            epsilon,
            output,
        } => cmd_gate_orth(gates, tol, epsilon, output),
        Command::GateOptimize {
            array,
            target,
            data_basis,
            data_random,
            restarts,
            iters,
            epsilon,
            seed,
            output,
        } => cmd_gate_optimize(
            array,
            target,
            data_basis,
            data_random,
            restarts,
            iters,
            epsilon,
            seed,
            output,
        ),
        Command::SwapDemo {
            m,
            samples,
            seed,
            tol,
            output,
        } => cmd_swap_demo(m, samples, seed, tol, output),
        Command::Cycle {
            machine,
            input,
            window,
            max_iters,
            mode,
            threshold,
            seed,
            output,
        } => cmd_cycle(machine, input, window, max_iters, mode, threshold, seed, output),
        Command::Equiv {
            machine,
            input,
            window,
            steps,
            tol,
            output,
        } => cmd_equiv(machine, input, window, steps, tol, output),
        Command::Params { m, format, out } => cmd_params(m, format, out),
        Command::EmitBuiltin { what, output } => cmd_emit_builtin(what, output),
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("UQTMLAB_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
