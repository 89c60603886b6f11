//! Machine definitions and their sparse evolution.
//!
//! A machine has `P` processor qubits (one of which is the halt qubit)
//! and a two-way infinite binary tape. One step reads the processor
//! register `q` and the scanned bit `s`, then replaces the pair by a
//! superposition of `(q', write, move)` successors. The transition table
//! must be total over `(q, s)` and is the only place amplitudes enter.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::state::{Config, Dir, SparseState, DEFAULT_PRUNE_THRESHOLD};

/// One target of a transition: new processor content, written bit, head
/// move and amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct Successor {
    pub to_proc: u32,
    pub write: bool,
    pub dir: Dir,
    pub amp: Complex64,
}

/// All successors of one `(processor, scanned bit)` source.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRule {
    pub from_proc: u32,
    pub from_bit: bool,
    pub successors: Vec<Successor>,
}

/// A complete machine: processor width, halt-qubit index and a total
/// transition table.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineDef {
    proc_qubits: usize,
    halt_index: usize,
    /// Indexed by `from_proc * 2 + from_bit`.
    rules: Vec<TransitionRule>,
}

impl MachineDef {
    /// Validates structure only (totality, ranges); numeric
    /// well-formedness is a separate, tolerance-parameterised check.
    pub fn new(
        proc_qubits: usize,
        halt_index: usize,
        rules: Vec<TransitionRule>,
    ) -> Result<Self> {
        if !(1..=24).contains(&proc_qubits) {
            return Err(Error::InvalidMachine(format!(
                "processor width {proc_qubits} outside 1..=24"
            )));
        }
        if halt_index >= proc_qubits {
            return Err(Error::InvalidMachine(format!(
                "halt qubit index {halt_index} out of range for {proc_qubits} processor qubits"
            )));
        }
        let n_proc_states = 1usize << proc_qubits;
        let mut table: Vec<Option<TransitionRule>> = vec![None; n_proc_states * 2];
        for rule in rules {
            if rule.from_proc as usize >= n_proc_states {
                return Err(Error::InvalidMachine(format!(
                    "rule source processor value {} out of range",
                    rule.from_proc
                )));
            }
            if rule.successors.is_empty() {
                return Err(Error::InvalidMachine(format!(
                    "rule ({}, {}) has no successors",
                    rule.from_proc, u8::from(rule.from_bit)
                )));
            }
            let mut seen = std::collections::BTreeSet::new();
            for succ in &rule.successors {
                if succ.to_proc as usize >= n_proc_states {
                    return Err(Error::InvalidMachine(format!(
                        "successor processor value {} out of range",
                        succ.to_proc
                    )));
                }
                if !seen.insert((succ.to_proc, succ.write, succ.dir)) {
                    return Err(Error::InvalidMachine(format!(
                        "rule ({}, {}) lists target ({}, {}, {}) twice",
                        rule.from_proc,
                        u8::from(rule.from_bit),
                        succ.to_proc,
                        u8::from(succ.write),
                        succ.dir
                    )));
                }
            }
            let slot = rule.from_proc as usize * 2 + usize::from(rule.from_bit);
            if table[slot].is_some() {
                return Err(Error::InvalidMachine(format!(
                    "duplicate rule for source ({}, {})",
                    rule.from_proc,
                    u8::from(rule.from_bit)
                )));
            }
            table[slot] = Some(rule);
        }
        let mut rules = Vec::with_capacity(table.len());
        for (slot, entry) in table.into_iter().enumerate() {
            match entry {
                Some(rule) => rules.push(rule),
                None => {
                    return Err(Error::InvalidMachine(format!(
                        "missing rule for source ({}, {})",
                        slot / 2,
                        slot % 2
                    )))
                }
            }
        }
        Ok(MachineDef {
            proc_qubits,
            halt_index,
            rules,
        })
    }

    pub fn proc_qubits(&self) -> usize {
        self.proc_qubits
    }

    pub fn halt_index(&self) -> usize {
        self.halt_index
    }

    pub fn rule(&self, from_proc: u32, from_bit: bool) -> &TransitionRule {
        &self.rules[from_proc as usize * 2 + usize::from(from_bit)]
    }

    pub fn rules(&self) -> impl Iterator<Item = &TransitionRule> {
        self.rules.iter()
    }

    /// Blank-tape start configuration with the given processor content.
    pub fn start_config(&self, proc: u32) -> Config {
        Config::new(0, self.proc_qubits, proc, [])
    }
}

/// Outcome of the local well-formedness checks, with optional windowed
/// global-unitarity errors appended by the caller.
#[derive(Debug, Clone)]
pub struct WellFormedReport {
    pub tol: f64,
    /// max over sources of |Σ|amp|² − 1|.
    pub column_norm_max_err: f64,
    /// max over distinct source pairs of |⟨column_i, column_j⟩|, where
    /// columns are keyed by (target processor, written bit, direction).
    pub column_orthogonality_max_err: f64,
    /// (window length, ‖U†U − I‖_F) for each checked cyclic window.
    pub global_unitarity: Vec<(usize, f64)>,
}

impl WellFormedReport {
    pub fn norm_pass(&self) -> bool {
        self.column_norm_max_err <= self.tol
    }

    pub fn orthogonality_pass(&self) -> bool {
        self.column_orthogonality_max_err <= self.tol
    }

    /// `None` when no windows were checked.
    pub fn global_pass(&self) -> Option<bool> {
        if self.global_unitarity.is_empty() {
            None
        } else {
            Some(self.global_unitarity.iter().all(|(_, e)| *e <= self.tol))
        }
    }

    pub fn pass(&self) -> bool {
        self.norm_pass() && self.orthogonality_pass() && self.global_pass().unwrap_or(true)
    }
}

/// Local necessary conditions for unitarity of the induced global step:
/// every source's successor amplitudes form a unit vector, and distinct
/// sources have orthogonal successor vectors when compared on matching
/// (target, write, direction) components.
///
/// These conditions do not certify unitarity by themselves; the windowed
/// global check (see [`crate::window`]) covers the composite operator.
pub fn validate_local(m: &MachineDef, tol: f64) -> WellFormedReport {
    let mut norm_err = 0.0f64;
    // Successor vectors keyed for overlap comparison.
    let columns: Vec<BTreeMap<(u32, bool, Dir), Complex64>> = m
        .rules()
        .map(|rule| {
            let mut col = BTreeMap::new();
            for s in &rule.successors {
                col.insert((s.to_proc, s.write, s.dir), s.amp);
            }
            col
        })
        .collect();
    for col in &columns {
        let n: f64 = col.values().map(|a| a.norm_sqr()).sum();
        norm_err = norm_err.max((n - 1.0).abs());
    }
    let mut orth_err = 0.0f64;
    for i in 0..columns.len() {
        for j in (i + 1)..columns.len() {
            let (small, large) = if columns[i].len() <= columns[j].len() {
                (&columns[i], &columns[j])
            } else {
                (&columns[j], &columns[i])
            };
            let mut dot = Complex64::new(0.0, 0.0);
            for (k, a) in small {
                if let Some(b) = large.get(k) {
                    dot += a.conj() * b;
                }
            }
            orth_err = orth_err.max(dot.norm());
        }
    }
    WellFormedReport {
        tol,
        column_norm_max_err: norm_err,
        column_orthogonality_max_err: orth_err,
        global_unitarity: Vec::new(),
    }
}

/// One time step of the machine applied to a sparse state, with pruning
/// at [`DEFAULT_PRUNE_THRESHOLD`].
pub fn step(m: &MachineDef, s: &SparseState) -> SparseState {
    step_with_threshold(m, s, DEFAULT_PRUNE_THRESHOLD)
}

pub fn step_with_threshold(m: &MachineDef, s: &SparseState, threshold: f64) -> SparseState {
    let mut out = SparseState::new();
    for (cfg, amp) in s.iter() {
        debug_assert_eq!(cfg.proc_len(), m.proc_qubits(), "state/machine width mismatch");
        let rule = m.rule(cfg.proc_index(), cfg.scanned());
        for succ in &rule.successors {
            out.add(cfg.successor(succ.to_proc, succ.write, succ.dir), amp * succ.amp);
        }
    }
    out.prune(threshold);
    out
}

/// `steps` applications of [`step`].
pub fn run(m: &MachineDef, s: &SparseState, steps: usize) -> SparseState {
    let mut cur = s.clone();
    for _ in 0..steps {
        cur = step(m, &cur);
    }
    cur
}

/// Probability that the halt qubit reads 1.
pub fn halt_probability(s: &SparseState, halt_index: usize) -> f64 {
    // fold rather than sum: the empty f64 sum is −0.0.
    s.iter()
        .filter(|(c, _)| c.proc_bit(halt_index))
        .map(|(_, a)| a.norm_sqr())
        .fold(0.0, |acc, p| acc + p)
}

/// Projects onto the halt qubit reading `outcome` and renormalizes.
/// Returns `None` when the branch has (numerically) zero probability.
pub fn project_halt(
    s: &SparseState,
    halt_index: usize,
    outcome: bool,
) -> Option<(SparseState, f64)> {
    let proj = SparseState::from_terms(
        s.iter()
            .filter(|(c, _)| c.proc_bit(halt_index) == outcome)
            .map(|(c, a)| (c.clone(), *a)),
    );
    let p = proj.norm_sqr();
    if p < 1e-12 {
        return None;
    }
    let normalized = proj.scaled(Complex64::new(1.0 / p.sqrt(), 0.0));
    Some((normalized, p))
}

/// Result of one projective halt measurement.
#[derive(Debug, Clone)]
pub struct MeasureOutcome {
    pub outcome: bool,
    /// Probability of the observed outcome before collapse.
    pub prob: f64,
    pub post: SparseState,
}

/// Samples a halt measurement with a fresh generator seeded by `seed`.
pub fn measure_halt(s: &SparseState, halt_index: usize, seed: u64) -> MeasureOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    measure_halt_with(s, halt_index, &mut rng)
}

/// Samples a halt measurement, drawing one uniform variate from `rng`.
/// Degenerate branches (probability below 1e-12) are never selected.
pub fn measure_halt_with(
    s: &SparseState,
    halt_index: usize,
    rng: &mut impl Rng,
) -> MeasureOutcome {
    let p1 = halt_probability(s, halt_index) / s.norm_sqr();
    let u: f64 = rng.random();
    let want = if p1 < 1e-12 {
        false
    } else if p1 > 1.0 - 1e-12 {
        true
    } else {
        u < p1
    };
    let (post, prob) =
        project_halt(s, halt_index, want).expect("selected branch has nonzero probability");
    MeasureOutcome {
        outcome: want,
        prob,
        post,
    }
}

/// Trajectory of a monitored run: the halt qubit is measured after every
/// step; the run stops at the first outcome 1 or after `max_steps`.
#[derive(Debug, Clone)]
pub struct MonitorOutcome {
    /// (step number, halt probability immediately before that step's
    /// measurement), for every executed step.
    pub trajectory: Vec<(usize, f64)>,
    pub final_state: SparseState,
    pub halted: bool,
    pub steps_used: usize,
}

/// Runs the machine under per-step halt monitoring with a seeded
/// generator; all randomness comes from `seed`.
pub fn run_monitored(
    m: &MachineDef,
    input: &SparseState,
    max_steps: usize,
    seed: u64,
) -> MonitorOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = input.clone();
    let mut trajectory = Vec::new();
    for k in 1..=max_steps {
        state = step(m, &state);
        let p1 = halt_probability(&state, m.halt_index()) / state.norm_sqr();
        trajectory.push((k, p1));
        let measured = measure_halt_with(&state, m.halt_index(), &mut rng);
        state = measured.post;
        if measured.outcome {
            return MonitorOutcome {
                trajectory,
                final_state: state,
                halted: true,
                steps_used: k,
            };
        }
    }
    MonitorOutcome {
        trajectory,
        final_state: state,
        halted: false,
        steps_used: max_steps,
    }
}

/// Worst halted→unhalted amplitude leakage over a horizon, per probe.
#[derive(Debug, Clone)]
pub struct HaltStabilityReport {
    pub horizon: usize,
    pub tol: f64,
    /// max over probes and steps of the squared-amplitude mass that one
    /// step moves from the halted subspace back to the unhalted one.
    pub max_backflow: f64,
    /// (probe index, step at which the worst backflow occurred).
    pub worst: Option<(usize, usize)>,
}

impl HaltStabilityReport {
    pub fn pass(&self) -> bool {
        self.max_backflow <= self.tol
    }
}

/// Checks that the halt qubit, once set, stays set: at every step up to
/// `horizon`, the halted component of the evolving probe is stepped in
/// isolation and the squared mass arriving in unhalted configurations is
/// recorded as backflow.
pub fn check_halt_stability(
    m: &MachineDef,
    probes: &[SparseState],
    horizon: usize,
    tol: f64,
) -> HaltStabilityReport {
    let mut max_backflow = 0.0f64;
    let mut worst = None;
    for (pi, probe) in probes.iter().enumerate() {
        let mut state = probe.clone();
        for t in 0..horizon {
            let halted = SparseState::from_terms(
                state
                    .iter()
                    .filter(|(c, _)| c.proc_bit(m.halt_index()))
                    .map(|(c, a)| (c.clone(), *a)),
            );
            if !halted.is_empty() {
                // Unpruned step, so even tiny leaks are visible.
                let stepped = step_with_threshold(m, &halted, 0.0);
                let leak: f64 = stepped
                    .iter()
                    .filter(|(c, _)| !c.proc_bit(m.halt_index()))
                    .map(|(_, a)| a.norm_sqr())
                    .sum();
                if leak > max_backflow {
                    max_backflow = leak;
                    worst = Some((pi, t + 1));
                }
            }
            state = step(m, &state);
        }
    }
    HaltStabilityReport {
        horizon,
        tol,
        max_backflow,
        worst,
    }
}
