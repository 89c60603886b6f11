//! Halt-qubit scenario analysis: the two-branch entanglement experiment,
//! monitored-versus-unmonitored comparison, branch synchronization and
//! the brute-force concatenated-program search.

use std::collections::BTreeSet;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{trace_distance, von_neumann_entropy, DensityMatrix};
use crate::machine::{halt_probability, project_halt, run, step, MachineDef};
use crate::machines::shift_counter_machine;
use crate::state::{
    fidelity_pure, marginal_fidelity, marginal_purity, raw_kept_gram, reduced_density,
    superpose, Config, QubitId, SparseState,
};

fn c_re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Halting times of the two tape branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MyersSpec {
    pub n_a: usize,
    pub n_b: usize,
}

impl MyersSpec {
    pub fn new(n_a: usize, n_b: usize) -> Result<Self> {
        if n_a < 1 || n_a >= n_b {
            return Err(Error::InvalidParameter(format!(
                "branch halting times must satisfy 1 ≤ n_a < n_b, got ({n_a}, {n_b})"
            )));
        }
        Ok(MyersSpec { n_a, n_b })
    }
}

/// The two-branch machine together with its construction parameters.
///
/// The machine is a shift counter: the processor register `V` (halt
/// qubit on top) performs `V ← V + 1 + scanned·jump` each step while the
/// head scans rightward. Starting from `V₀ = 2^K − n_a`, a blank tape
/// raises the halt bit after exactly `n_a` steps; a 1 in cell 0 adds the
/// jump once, retuning the countdown to `n_b`. Being a permutation per
/// scanned bit, the step is exactly unitary on every cyclic window and
/// the two branches stay exactly orthogonal.
#[derive(Debug, Clone)]
pub struct MyersMachine {
    machine: MachineDef,
    spec: MyersSpec,
    horizon: usize,
    counter_bits: usize,
    v0: u32,
    jump: u32,
}

impl MyersMachine {
    pub fn machine(&self) -> &MachineDef {
        &self.machine
    }

    pub fn spec(&self) -> MyersSpec {
        self.spec
    }

    /// Steps for which the raised halt bit is guaranteed stable.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn counter_bits(&self) -> usize {
        self.counter_bits
    }

    pub fn v0(&self) -> u32 {
        self.v0
    }

    pub fn jump(&self) -> u32 {
        self.jump
    }

    /// Branch-A basis input: blank tape.
    pub fn input_a(&self) -> SparseState {
        SparseState::basis(Config::new(
            0,
            self.machine.proc_qubits(),
            self.v0,
            [],
        ))
    }

    /// Branch-B basis input: a 1 in tape cell 0.
    pub fn input_b(&self) -> SparseState {
        SparseState::basis(Config::new(
            0,
            self.machine.proc_qubits(),
            self.v0,
            [0i64],
        ))
    }

    /// (|A⟩ + |B⟩)/√2.
    pub fn superposed_input(&self) -> SparseState {
        let w = c_re(1.0 / 2.0_f64.sqrt());
        superpose(w, &self.input_a(), w, &self.input_b())
    }
}

/// Builds the two-branch machine with the default stability horizon of
/// `2·n_b` steps.
pub fn build_myers_machine(spec: MyersSpec) -> Result<MyersMachine> {
    build_myers_machine_with_horizon(spec, 2 * spec.n_b)
}

/// Builds the two-branch machine sized so the halt bit, once raised,
/// stays raised for at least `horizon` steps from the input state.
pub fn build_myers_machine_with_horizon(
    spec: MyersSpec,
    horizon: usize,
) -> Result<MyersMachine> {
    MyersSpec::new(spec.n_a, spec.n_b)?;
    // The counter must (a) start below the halt threshold, (b) keep
    // branch B below it until step n_b, and (c) not wrap back before the
    // horizon: 2^K ≥ max(n_a, n_b − 1, horizon − n_a + 1).
    let need = spec
        .n_a
        .max(spec.n_b - 1)
        .max(horizon.saturating_sub(spec.n_a) + 1);
    let counter_bits = (usize::BITS - (need - 1).leading_zeros()) as usize;
    if counter_bits > 16 {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} with halting times ({}, {}) needs a {counter_bits}-bit \
             counter, above the 16-bit cap",
            spec.n_a, spec.n_b
        )));
    }
    let modulus = 1u32 << (counter_bits + 1);
    let v0 = (1u32 << counter_bits) - spec.n_a as u32;
    // One scanned 1 must retune the countdown from n_a to n_b.
    let jump = (modulus - (spec.n_b - spec.n_a) as u32) % modulus;
    let machine = shift_counter_machine(counter_bits, jump)?;
    Ok(MyersMachine {
        machine,
        spec,
        horizon,
        counter_bits,
        v0,
        jump,
    })
}

/// Snapshot diagnostics of one evolved state.
#[derive(Debug, Clone)]
pub struct StateMetrics {
    pub halt_prob: f64,
    /// Entropy of the halt-qubit marginal, in bits.
    pub halt_entropy: f64,
    /// Purity of the computational marginal (non-halt processor qubits
    /// plus every stored tape cell).
    pub comp_purity: f64,
    pub norm: f64,
}

/// Qubits of the computational register: every non-halt processor qubit
/// followed by the stored tape cells, ascending.
pub fn computational_register(s: &SparseState, halt_index: usize) -> Result<Vec<QubitId>> {
    let proc_len = s
        .proc_len()
        .ok_or_else(|| Error::InvalidState("empty state".into()))?;
    let mut keep: Vec<QubitId> = (0..proc_len)
        .filter(|i| *i != halt_index)
        .map(QubitId::Proc)
        .collect();
    keep.extend(s.tape_support().into_iter().map(QubitId::Tape));
    Ok(keep)
}

/// Halt probability, halt-marginal entropy and computational-marginal
/// purity of a state (normalized internally before the marginals).
pub fn state_metrics(s: &SparseState, halt_index: usize) -> Result<StateMetrics> {
    let norm = s.norm();
    let normalized = s.normalized()?;
    let halt_prob = halt_probability(&normalized, halt_index);
    let halt_rho = reduced_density(&normalized, &[QubitId::Proc(halt_index)])?;
    let keep = computational_register(&normalized, halt_index)?;
    let comp_purity = marginal_purity(&normalized, &keep)?;
    Ok(StateMetrics {
        halt_prob,
        halt_entropy: von_neumann_entropy(&halt_rho),
        comp_purity,
        norm,
    })
}

#[derive(Debug, Clone)]
pub struct MyersDemoReport {
    pub n_probe: usize,
    pub halt_prob: f64,
    pub halt_entropy: f64,
    pub comp_purity: f64,
}

/// Runs the equal superposition of the two branch inputs for `n_probe`
/// steps unmonitored and reports the entanglement diagnostics.
pub fn myers_demo(mm: &MyersMachine, n_probe: usize) -> Result<MyersDemoReport> {
    let state = run(mm.machine(), &mm.superposed_input(), n_probe);
    let metrics = state_metrics(&state, mm.machine().halt_index())?;
    Ok(MyersDemoReport {
        n_probe,
        halt_prob: metrics.halt_prob,
        halt_entropy: metrics.halt_entropy,
        comp_purity: metrics.comp_purity,
    })
}

/// Comparison of the unmonitored computational marginal against the
/// ensemble produced by measuring the halt qubit at the probe step.
#[derive(Debug, Clone)]
pub struct MonitoredComparison {
    pub n_probe: usize,
    pub trials: usize,
    pub halt_prob: f64,
    /// Trace distance of the probability-weighted (infinite-trial)
    /// measurement ensemble to the unmonitored marginal.
    pub exact_trace_distance: f64,
    /// Trace distance of the `trials`-sample ensemble to the unmonitored
    /// marginal.
    pub sampled_trace_distance: f64,
    /// (outcome 0 count, outcome 1 count) over the sampled trials.
    pub outcome_counts: (usize, usize),
    /// Renormalized post-measurement branch states, when the branch has
    /// nonzero probability.
    pub post_unhalted: Option<SparseState>,
    pub post_halted: Option<SparseState>,
}

/// Measures the halt qubit at `n_probe` (a) exactly, via the
/// probability-weighted ensemble, and (b) over `trials` seeded runs, and
/// compares both ensembles to the unmonitored computational marginal.
pub fn monitored_vs_unmonitored(
    m: &MachineDef,
    input: &SparseState,
    n_probe: usize,
    trials: usize,
    seed: u64,
) -> Result<MonitoredComparison> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be ≥ 1".into()));
    }
    let state = run(m, input, n_probe).normalized()?;
    let halt = m.halt_index();
    let keep = computational_register(&state, halt)?;
    let rho_u = reduced_density(&state, &keep)?;
    let p1 = halt_probability(&state, halt);

    let branch = |outcome: bool| project_halt(&state, halt, outcome);
    let post0 = branch(false);
    let post1 = branch(true);

    // Exact ensemble: Σ_o p_o · ρ_o equals the Gram of the unnormalized
    // projections, summed. Kept cells may fall outside a branch's own
    // stored windows; those cells are blank there, which the raw Gram
    // handles exactly.
    let dim = 1usize << keep.len();
    let mut exact = nalgebra::DMatrix::<Complex64>::zeros(dim, dim);
    for post in [&post0, &post1].into_iter().flatten() {
        let weighted = post.0.scaled(c_re(post.1.sqrt()));
        exact += raw_kept_gram(&weighted, &keep);
    }
    let rho_exact = DensityMatrix::new(exact)?;
    let exact_td = trace_distance(&rho_u, &rho_exact)?;

    // Sampled ensemble over seeded Born draws.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut n1 = 0usize;
    for _ in 0..trials {
        let u: f64 = rng.random();
        let saw_halt = if p1 < 1e-12 {
            false
        } else if p1 > 1.0 - 1e-12 {
            true
        } else {
            u < p1
        };
        if saw_halt {
            n1 += 1;
        }
    }
    let n0 = trials - n1;
    let mut sampled = nalgebra::DMatrix::<Complex64>::zeros(dim, dim);
    for (count, post) in [(n0, &post0), (n1, &post1)] {
        if count == 0 {
            continue;
        }
        let p = post
            .as_ref()
            .expect("an observed outcome has nonzero probability");
        let weight = (count as f64 / trials as f64).sqrt();
        sampled += raw_kept_gram(&p.0.scaled(c_re(weight)), &keep);
    }
    let rho_sampled = DensityMatrix::new(sampled)?;
    let sampled_td = trace_distance(&rho_u, &rho_sampled)?;

    Ok(MonitoredComparison {
        n_probe,
        trials,
        halt_prob: p1,
        exact_trace_distance: exact_td,
        sampled_trace_distance: sampled_td,
        outcome_counts: (n0, n1),
        post_unhalted: post0.map(|(s, _)| s),
        post_halted: post1.map(|(s, _)| s),
    })
}

/// A classical program: a finite bit string written onto a designated
/// tape region.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ProgramString {
    bits: Vec<bool>,
}

impl ProgramString {
    pub fn new(bits: Vec<bool>) -> Self {
        ProgramString { bits }
    }

    pub fn empty() -> Self {
        ProgramString { bits: Vec::new() }
    }

    /// Parses a string of `0`/`1` characters (empty string allowed).
    pub fn parse(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for ch in s.chars() {
            match ch {
                '0' => bits.push(false),
                '1' => bits.push(true),
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "program strings use only 0 and 1, found '{other}'"
                    )))
                }
            }
        }
        Ok(ProgramString { bits })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Writes the program onto cells `offset + i` of every configuration.
    /// The target region must be blank in every stored configuration, so
    /// that the write is a reversible relabeling of basis states.
    pub fn write_to(&self, s: &SparseState, offset: i64) -> Result<SparseState> {
        let region: BTreeSet<i64> = (0..self.bits.len() as i64).map(|i| offset + i).collect();
        for (cfg, _) in s.iter() {
            for cell in &region {
                if cfg.tape_bit(*cell) {
                    return Err(Error::InvalidState(format!(
                        "program region cell {cell} is not blank in the input state"
                    )));
                }
            }
        }
        let mut out = SparseState::new();
        for (cfg, amp) in s.iter() {
            let mut cur = cfg.clone();
            for (i, bit) in self.bits.iter().enumerate() {
                if *bit {
                    cur = cur.with_tape_bit(offset + i as i64, true);
                }
            }
            out.add(cur, *amp);
        }
        Ok(out)
    }
}

impl std::fmt::Display for ProgramString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for bit in &self.bits {
            write!(f, "{}", if *bit { '1' } else { '0' })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct BranchSyncReport {
    /// Smallest step at which branch 0 reaches its target, if any.
    pub s0: Option<usize>,
    pub s1: Option<usize>,
    pub synchronized: bool,
    /// Fidelity at the found step (or the best seen within the horizon).
    pub fidelity0: f64,
    pub fidelity1: f64,
    /// Fidelity of the superposed run against the superposed targets at
    /// the common step; present only when synchronized.
    pub superposed_fidelity: Option<f64>,
}

/// Finds the earliest steps s0, s1 ≤ `horizon` at which the two branch
/// inputs (with `program` written at `program_offset`) reach their
/// respective targets with fidelity ≥ 1−ε. When s0 = s1, additionally
/// runs the equal superposition of the branches and checks it against
/// the equal superposition of the targets at that step.
#[allow(clippy::too_many_arguments)]
pub fn branch_sync_check(
    m: &MachineDef,
    program: &ProgramString,
    program_offset: i64,
    branch0: &SparseState,
    branch1: &SparseState,
    targets: (&SparseState, &SparseState),
    epsilon: f64,
    horizon: usize,
) -> Result<BranchSyncReport> {
    let prepared0 = program.write_to(branch0, program_offset)?.normalized()?;
    let prepared1 = program.write_to(branch1, program_offset)?.normalized()?;
    let target0 = targets.0.normalized()?;
    let target1 = targets.1.normalized()?;

    let scan = |input: &SparseState, target: &SparseState| -> (Option<usize>, f64) {
        let mut state = input.clone();
        let mut best = fidelity_pure(&state, target);
        if best >= 1.0 - epsilon {
            return (Some(0), best);
        }
        for s in 1..=horizon {
            state = step(m, &state);
            let fid = fidelity_pure(&state, target);
            if fid >= 1.0 - epsilon {
                return (Some(s), fid);
            }
            best = best.max(fid);
        }
        (None, best)
    };
    let (s0, fidelity0) = scan(&prepared0, &target0);
    let (s1, fidelity1) = scan(&prepared1, &target1);
    let synchronized = s0.is_some() && s0 == s1;

    let superposed_fidelity = if synchronized {
        let w = c_re(1.0 / 2.0_f64.sqrt());
        let input = superpose(w, &prepared0, w, &prepared1).normalized()?;
        let target = superpose(w, &target0, w, &target1).normalized()?;
        Some(fidelity_pure(
            &run(m, &input, s0.expect("synchronized")),
            &target,
        ))
    } else {
        None
    };
    Ok(BranchSyncReport {
        s0,
        s1,
        synchronized,
        fidelity0,
        fidelity1,
        superposed_fidelity,
    })
}

/// Search-space description for [`concat_search`].
#[derive(Debug, Clone)]
pub struct ConcatSpec {
    /// Tape cells (in order) onto which candidate programs are written;
    /// a length-ℓ candidate occupies the first ℓ cells.
    pub program_cells: Vec<i64>,
    /// The data register whose marginal must reach the target.
    pub data_qubits: Vec<QubitId>,
    pub max_len: usize,
    pub horizon: usize,
    pub epsilon: f64,
    /// Evaluate candidates in parallel (the result is identical either
    /// way; candidates are merged in enumeration order).
    pub parallel: bool,
    /// Cap on (program, step) evaluations; a search space above the cap
    /// yields [`ConcatOutcome::Exhausted`] without searching.
    pub eval_budget: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConcatOutcome {
    Found {
        program: ProgramString,
        steps: usize,
        fidelity: f64,
        purity: f64,
    },
    NotFound,
    Exhausted {
        required: u64,
        budget: u64,
    },
}

fn program_from_rank(len: usize, rank: u64) -> ProgramString {
    let bits = (0..len)
        .map(|i| (rank >> (len - 1 - i)) & 1 == 1)
        .collect();
    ProgramString::new(bits)
}

/// Extracts the pure data-register target vector from a sparse state: all
/// configurations must agree outside the data register.
fn data_target_vector(
    target: &SparseState,
    data_qubits: &[QubitId],
) -> Result<Vec<Complex64>> {
    let normalized = target.normalized()?;
    let groups = crate::state::kept_group_vectors(&normalized, data_qubits);
    if groups.len() != 1 {
        return Err(Error::InvalidState(
            "target must be a pure state of the data register (all terms must agree \
             outside it)"
                .into(),
        ));
    }
    let vec = groups.into_values().next().expect("one group");
    let mut t = vec![Complex64::new(0.0, 0.0); 1 << data_qubits.len()];
    for (i, a) in vec {
        t[i] = a;
    }
    Ok(t)
}

/// Exhaustively enumerates classical programs (shortest first, then
/// lexicographic) and returns the first whose evolution brings the data
/// register within ε of the target — in squared distance, minimized over
/// the unobservable marginal phase — while staying in product form with
/// the rest (data-marginal purity ≥ 1−ε). Steps are scanned smallest
/// first, so the tie-break order is (length, lexicographic, step).
pub fn concat_search(
    m: &MachineDef,
    data: &SparseState,
    target: &SparseState,
    spec: &ConcatSpec,
) -> Result<ConcatOutcome> {
    if spec.max_len > spec.program_cells.len() {
        return Err(Error::InvalidParameter(format!(
            "max_len {} exceeds the {} designated program cells",
            spec.max_len,
            spec.program_cells.len()
        )));
    }
    if spec.max_len >= 63 {
        return Err(Error::InvalidParameter(
            "program length cap must be below 63 bits".into(),
        ));
    }
    let data = data.normalized()?;
    let target_vec = data_target_vector(target, &spec.data_qubits)?;

    let per_program = (spec.horizon + 1) as u64;
    let mut required = 0u64;
    for len in 0..=spec.max_len {
        required = required.saturating_add((1u64 << len).saturating_mul(per_program));
    }
    if required > spec.eval_budget {
        return Ok(ConcatOutcome::Exhausted {
            required,
            budget: spec.eval_budget,
        });
    }

    let evaluate = |program: &ProgramString| -> Result<Option<(usize, f64, f64)>> {
        let mut state = data.clone();
        for (i, bit) in program.bits().iter().enumerate() {
            if *bit {
                // Region blankness was checked once on `data` below.
                state = SparseState::from_terms(
                    state
                        .iter()
                        .map(|(c, a)| (c.with_tape_bit(spec.program_cells[i], true), *a)),
                );
            }
        }
        for s in 0..=spec.horizon {
            if s > 0 {
                state = step(m, &state);
            }
            let fid = marginal_fidelity(&state, &spec.data_qubits, &target_vec)?;
            let dist = (2.0 - 2.0 * fid.max(0.0).sqrt()).max(0.0);
            if dist < spec.epsilon {
                let purity = marginal_purity(&state, &spec.data_qubits)?;
                if 1.0 - purity < spec.epsilon {
                    return Ok(Some((s, fid, purity)));
                }
            }
        }
        Ok(None)
    };

    // The program region must start blank so writes are injective.
    for cell in &spec.program_cells[..spec.max_len] {
        for (cfg, _) in data.iter() {
            if cfg.tape_bit(*cell) {
                return Err(Error::InvalidState(format!(
                    "program region cell {cell} is not blank in the data state"
                )));
            }
        }
    }

    for len in 0..=spec.max_len {
        let candidates: Vec<ProgramString> = (0..(1u64 << len))
            .map(|rank| program_from_rank(len, rank))
            .collect();
        let results: Vec<Option<(usize, f64, f64)>> = if spec.parallel {
            candidates
                .par_iter()
                .map(&evaluate)
                .collect::<Result<Vec<_>>>()?
        } else {
            let mut out = Vec::with_capacity(candidates.len());
            for p in &candidates {
                let r = evaluate(p)?;
                let hit = r.is_some();
                out.push(r);
                if hit {
                    break;
                }
            }
            out
        };
        for (program, result) in candidates.into_iter().zip(results) {
            if let Some((steps, fidelity, purity)) = result {
                return Ok(ConcatOutcome::Found {
                    program,
                    steps,
                    fidelity,
                    purity,
                });
            }
        }
    }
    Ok(ConcatOutcome::NotFound)
}
