//! Repeated application of a fixed step operator with a halt-qubit
//! stopping rule — the "cycle the same array and watch the halt flag"
//! execution model, as opposed to unrolling a fresh circuit per step.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::machine::MachineDef;
use crate::state::SparseState;
use crate::window::{sparse_to_window, window_index, StepOperator, WindowLayout, WindowStep};

/// Exact mode stops once the halt probability reaches this, by default.
pub const DEFAULT_HALT_THRESHOLD: f64 = 1.0 - 1e-9;

/// How the halt qubit is read between cycles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HaltMode {
    /// Stop when the halt probability reaches `threshold`; no collapse.
    Exact { threshold: f64 },
    /// Projectively measure the halt qubit after every cycle with a
    /// generator seeded once from `seed`.
    Sampled { seed: u64 },
}

#[derive(Debug, Clone)]
pub struct CycleConfig {
    pub max_iters: usize,
    pub mode: HaltMode,
}

#[derive(Debug, Clone)]
pub struct CycleReport {
    /// State after the last executed cycle (collapsed, in sampled mode).
    pub output: DVector<Complex64>,
    pub iterations: usize,
    pub halted: bool,
    /// Halt probability right after each cycle, before any measurement.
    pub per_iter_halt_prob: Vec<f64>,
}

fn halt_probability_window(v: &DVector<Complex64>, layout: &WindowLayout) -> f64 {
    let n = v.norm_squared();
    if n == 0.0 {
        return 0.0;
    }
    let p1: f64 = v
        .iter()
        .enumerate()
        .filter(|(idx, _)| layout.halt_bit(*idx))
        .map(|(_, a)| a.norm_sqr())
        .sum();
    p1 / n
}

fn project_halt_window(
    v: &DVector<Complex64>,
    layout: &WindowLayout,
    outcome: bool,
) -> (DVector<Complex64>, f64) {
    let mut out = v.clone();
    let mut p = 0.0;
    for (idx, a) in out.iter_mut().enumerate() {
        if layout.halt_bit(idx) == outcome {
            p += a.norm_sqr();
        } else {
            *a = Complex64::new(0.0, 0.0);
        }
    }
    if p > 0.0 {
        out /= Complex64::new(p.sqrt(), 0.0);
    }
    (out, p)
}

/// Applies `step` up to `max_iters` times, reading the halt qubit
/// between cycles according to the configured mode.
pub fn cycle_run(
    step: &impl StepOperator,
    layout: &WindowLayout,
    input: &DVector<Complex64>,
    cfg: &CycleConfig,
) -> Result<CycleReport> {
    if cfg.max_iters == 0 {
        return Err(Error::InvalidParameter("max_iters must be ≥ 1".into()));
    }
    if let HaltMode::Exact { threshold } = cfg.mode {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "halt threshold {threshold} outside (0, 1]"
            )));
        }
    }
    if input.len() != step.dim() || layout.dim() != step.dim() {
        return Err(Error::InvalidState(format!(
            "cycle input length {} does not match operator dimension {}",
            input.len(),
            step.dim()
        )));
    }
    if (input.norm_squared() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidState(
            "cycle input must be normalized".into(),
        ));
    }
    let mut rng = match cfg.mode {
        HaltMode::Sampled { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        HaltMode::Exact { .. } => None,
    };
    let mut v = input.clone();
    let mut probs = Vec::new();
    for k in 1..=cfg.max_iters {
        v = step.apply(&v);
        let p1 = halt_probability_window(&v, layout);
        probs.push(p1);
        match cfg.mode {
            HaltMode::Exact { threshold } => {
                if p1 >= threshold {
                    return Ok(CycleReport {
                        output: v,
                        iterations: k,
                        halted: true,
                        per_iter_halt_prob: probs,
                    });
                }
            }
            HaltMode::Sampled { .. } => {
                let rng = rng.as_mut().expect("sampled mode carries a generator");
                let u: f64 = rng.random();
                let saw_halt = if p1 < 1e-12 {
                    false
                } else if p1 > 1.0 - 1e-12 {
                    true
                } else {
                    u < p1
                };
                let (post, _) = project_halt_window(&v, layout, saw_halt);
                v = post;
                if saw_halt {
                    return Ok(CycleReport {
                        output: v,
                        iterations: k,
                        halted: true,
                        per_iter_halt_prob: probs,
                    });
                }
            }
        }
    }
    Ok(CycleReport {
        output: v,
        iterations: cfg.max_iters,
        halted: false,
        per_iter_halt_prob: probs,
    })
}

/// Drives the sparse infinite-tape evolution and the cyclic-window
/// operator side by side for `steps` steps and returns the squared
/// distance between the window state and the embedded sparse state.
///
/// Fails with [`Error::WindowEscape`] as soon as any sparse term touches
/// a head position or tape cell outside the window, because from then on
/// the wrapped operator no longer represents the machine.
pub fn equivalence_check(
    m: &MachineDef,
    window_len: usize,
    input: &SparseState,
    steps: usize,
) -> Result<f64> {
    let ws = WindowStep::new(m, window_len)?;
    let layout = ws.layout().clone();
    let ensure_in_window = |s: &SparseState, step: usize| -> Result<()> {
        for (cfg, _) in s.iter() {
            if window_index(cfg, &layout).is_err() {
                return Err(Error::WindowEscape { step, window_len });
            }
        }
        Ok(())
    };
    ensure_in_window(input, 0)?;
    let mut v = sparse_to_window(input, &layout)?;
    let mut s = input.clone();
    for k in 1..=steps {
        s = crate::machine::step(m, &s);
        ensure_in_window(&s, k)?;
        v = ws.apply(&v);
    }
    let expected = sparse_to_window(&s, &layout)?;
    Ok((v - expected).norm_squared())
}
