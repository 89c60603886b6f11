//! Reusable machine constructions.
//!
//! Everything here is built so that the induced global step is exactly
//! unitary on every cyclic window, not merely locally well formed. Two
//! patterns achieve that:
//!
//! * **uniform direction** — every rule moves the same way, and for each
//!   scanned bit the map `(processor, scanned) → (processor', write)` is
//!   unitary; the global step is then a tape shift composed with a local
//!   unitary, both unitary on any window;
//! * **controlled zigzag** — one processor qubit (the "phase") selects
//!   the direction and is flipped every step, so right-movers and
//!   left-movers land in disjoint processor sectors and cannot interfere.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::machine::{MachineDef, Successor, TransitionRule};
use crate::state::Dir;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// One processor qubit (the halt qubit, always 0), every step writes the
/// scanned bit back and moves right. The global step is a pure shift.
pub fn identity_machine() -> MachineDef {
    let mut rules = Vec::new();
    for q in 0..2u32 {
        for s in [false, true] {
            rules.push(TransitionRule {
                from_proc: q,
                from_bit: s,
                successors: vec![Successor {
                    to_proc: q,
                    write: s,
                    dir: Dir::Right,
                    amp: re(1.0),
                }],
            });
        }
    }
    MachineDef::new(1, 0, rules).expect("identity machine is structurally valid")
}

/// Builds a zigzag machine whose processor is (phase qubit `P-1`,
/// lower qubits) and whose step applies, at the scanned cell, the map
/// `rotate(lower, scanned) → Σ amp · (lower', write)` given by `local`,
/// then moves right when the phase is 0 and left when it is 1, flipping
/// the phase. `local[s]` lists, for each scanned bit and each lower
/// processor value, the successor superposition as `(lower', write, amp)`.
///
/// If each `(lower, s) → Σ (lower', w)` table is unitary the whole step
/// is exactly unitary on every cyclic window of length ≥ 2.
fn zigzag_machine(
    lower_qubits: usize,
    halt_index: usize,
    local: impl Fn(u32, bool) -> Vec<(u32, bool, Complex64)>,
) -> Result<MachineDef> {
    let proc_qubits = lower_qubits + 1;
    let phase_bit = 1u32 << lower_qubits;
    let mut rules = Vec::new();
    for phase in [false, true] {
        let dir = if phase { Dir::Left } else { Dir::Right };
        for lower in 0..(1u32 << lower_qubits) {
            let from_proc = if phase { lower | phase_bit } else { lower };
            for s in [false, true] {
                let successors = local(lower, s)
                    .into_iter()
                    .map(|(lower2, write, amp)| Successor {
                        to_proc: if phase { lower2 } else { lower2 | phase_bit },
                        write,
                        dir,
                        amp,
                    })
                    .collect();
                rules.push(TransitionRule {
                    from_proc,
                    from_bit: s,
                    successors,
                });
            }
        }
    }
    MachineDef::new(proc_qubits, halt_index, rules)
}

/// Two processor qubits: an inert halt qubit (index 0) and a direction
/// phase (index 1). Each step applies a Hadamard to the scanned bit and
/// bounces the head between two adjacent cells. Because the Hadamard is
/// self-inverse, the support never exceeds a handful of configurations
/// even though every step branches.
pub fn hadamard_split_machine() -> MachineDef {
    let inv = re(1.0 / 2.0_f64.sqrt());
    zigzag_machine(1, 0, |halt, s| {
        // Hadamard on the scanned bit: |0⟩ → (|0⟩+|1⟩)/√2,
        // |1⟩ → (|0⟩−|1⟩)/√2; the halt qubit rides along unchanged.
        vec![
            (halt, false, inv),
            (halt, true, if s { -inv } else { inv }),
        ]
    })
    .expect("hadamard split machine is structurally valid")
}

/// Zigzag machine that copies the scanned bit back unchanged: a
/// reversible "do nothing" with nontrivial head motion, useful as a
/// dense-embedding test subject.
pub fn zigzag_identity_machine() -> MachineDef {
    zigzag_machine(1, 0, |halt, s| vec![(halt, s, re(1.0))])
        .expect("zigzag identity machine is structurally valid")
}

/// Shift-counter machine: the processor is a `counter_bits + 1`-bit
/// register `V` whose top bit is the halt qubit; every step writes the
/// scanned bit back, moves right and performs
/// `V ← V + 1 + scanned·jump  (mod 2^(counter_bits+1))`.
///
/// For each scanned bit this is a permutation of the processor, so the
/// machine is exactly unitary on every window. Starting from
/// `V = 2^counter_bits − n`, the halt bit first becomes 1 after exactly
/// `n` steps on a blank tape and stays 1 for the next `2^counter_bits`
/// steps.
pub fn shift_counter_machine(counter_bits: usize, jump: u32) -> Result<MachineDef> {
    if counter_bits == 0 || counter_bits > 16 {
        return Err(Error::InvalidParameter(format!(
            "counter width {counter_bits} outside 1..=16"
        )));
    }
    let proc_qubits = counter_bits + 1;
    let modulus = 1u32 << proc_qubits;
    if jump >= modulus {
        return Err(Error::InvalidParameter(format!(
            "jump {jump} out of range for a {proc_qubits}-bit register"
        )));
    }
    let mut rules = Vec::new();
    for v in 0..modulus {
        for s in [false, true] {
            let inc = 1 + if s { jump } else { 0 };
            rules.push(TransitionRule {
                from_proc: v,
                from_bit: s,
                successors: vec![Successor {
                    to_proc: (v + inc) % modulus,
                    write: s,
                    dir: Dir::Right,
                    amp: re(1.0),
                }],
            });
        }
    }
    MachineDef::new(proc_qubits, counter_bits, rules)
}

/// Program-driven machine: the processor is (halt qubit 0, data qubit 1);
/// each step reads the scanned program bit `s`, applies the single-qubit
/// rotation `W_s = Ry(θ_s)` to the data qubit, writes `s` back and moves
/// right. Consecutive tape cells therefore select which member of the
/// two-gate repertoire acts at each step, and running over a program
/// string applies the corresponding gate word to the data qubit.
pub fn program_driven_machine(theta0: f64, theta1: f64) -> MachineDef {
    let mut rules = Vec::new();
    for s in [false, true] {
        let t = if s { theta1 } else { theta0 };
        let (cos, sin) = ((t / 2.0).cos(), (t / 2.0).sin());
        // Ry(θ) = [[cos, −sin], [sin, cos]] on the data qubit.
        for halt in [false, true] {
            for data in [false, true] {
                let from_proc = u32::from(halt) | (u32::from(data) << 1);
                let mk = |data2: bool, amp: f64| Successor {
                    to_proc: u32::from(halt) | (u32::from(data2) << 1),
                    write: s,
                    dir: Dir::Right,
                    amp: re(amp),
                };
                let successors = if data {
                    vec![mk(false, -sin), mk(true, cos)]
                } else {
                    vec![mk(false, cos), mk(true, sin)]
                };
                rules.push(TransitionRule {
                    from_proc,
                    from_bit: s,
                    successors,
                });
            }
        }
    }
    MachineDef::new(2, 0, rules).expect("program driven machine is structurally valid")
}
