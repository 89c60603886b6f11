//! Finite cyclic-window embedding of a machine step.
//!
//! The infinite tape is replaced by `L` cells with wraparound and the
//! head position becomes part of the state, giving the finite dimension
//! `L · 2^P · 2^L`. Basis index convention:
//!
//! ```text
//! index = (head · 2^P + proc) · 2^L + tape,   tape bit j = cell j (LSB = cell 0)
//! ```
//!
//! The step operator is stored column-sparse because realistic windows
//! are far too large for dense matrices (a five-qubit processor on an
//! eight-cell window already has dimension 65536).

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::DenseUnitary;
use crate::machine::MachineDef;
use crate::state::{Config, QubitId, RegisterLayout, SparseState};

/// Default cap on the dimension of dense matrices materialised from the
/// sparse window operator.
pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Hard cap on the window state-space size for the sparse operator.
pub const MAX_WINDOW_DIM: usize = 1 << 22;

/// Anything that can advance a window-basis state vector by one step.
pub trait StepOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &DVector<Complex64>) -> DVector<Complex64>;
}

impl StepOperator for DenseUnitary {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn apply(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        DenseUnitary::apply(self, v)
    }
}

/// Shape of the window state space and the index conventions above.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowLayout {
    pub window_len: usize,
    pub proc_qubits: usize,
    pub halt_index: usize,
}

impl WindowLayout {
    pub fn new(window_len: usize, proc_qubits: usize, halt_index: usize) -> Result<Self> {
        if window_len < 2 {
            return Err(Error::InvalidParameter(format!(
                "window length {window_len} must be at least 2"
            )));
        }
        if halt_index >= proc_qubits {
            return Err(Error::InvalidParameter(format!(
                "halt index {halt_index} out of range for {proc_qubits} processor qubits"
            )));
        }
        let layout = WindowLayout {
            window_len,
            proc_qubits,
            halt_index,
        };
        if window_len > 26 || layout.checked_dim().is_none() {
            return Err(Error::DimensionCap {
                dim: usize::MAX,
                cap: MAX_WINDOW_DIM,
                context: format!(
                    "window of {window_len} cells with {proc_qubits} processor qubits"
                ),
            });
        }
        Ok(layout)
    }

    fn checked_dim(&self) -> Option<usize> {
        let d = self
            .window_len
            .checked_mul(1usize.checked_shl((self.proc_qubits + self.window_len) as u32)?)?;
        (d <= MAX_WINDOW_DIM).then_some(d)
    }

    pub fn dim(&self) -> usize {
        self.window_len << (self.proc_qubits + self.window_len)
    }

    pub fn encode(&self, head: usize, proc: u32, tape: u32) -> usize {
        debug_assert!(head < self.window_len);
        debug_assert!((proc as usize) < (1 << self.proc_qubits));
        debug_assert!((tape as usize) < (1 << self.window_len));
        ((head << self.proc_qubits) | proc as usize) << self.window_len | tape as usize
    }

    pub fn decode(&self, idx: usize) -> (usize, u32, u32) {
        let tape = (idx & ((1 << self.window_len) - 1)) as u32;
        let rest = idx >> self.window_len;
        let proc = (rest & ((1 << self.proc_qubits) - 1)) as u32;
        let head = rest >> self.proc_qubits;
        (head, proc, tape)
    }

    /// Whether the halt qubit reads 1 in basis state `idx`.
    pub fn halt_bit(&self, idx: usize) -> bool {
        let (_, proc, _) = self.decode(idx);
        (proc >> self.halt_index) & 1 == 1
    }

    /// Named register map over the window qubits: "halt" plus, when
    /// non-empty, "processor" (remaining processor qubits), "data" and
    /// "program" (caller-designated tape cells).
    pub fn register_layout(
        &self,
        data_cells: &[usize],
        program_cells: &[usize],
    ) -> Result<RegisterLayout> {
        for c in data_cells.iter().chain(program_cells) {
            if *c >= self.window_len {
                return Err(Error::InvalidParameter(format!(
                    "cell {c} outside window of length {}",
                    self.window_len
                )));
            }
        }
        let mut layout = RegisterLayout::new();
        layout.add_group("halt", vec![QubitId::Proc(self.halt_index)])?;
        let rest: Vec<QubitId> = (0..self.proc_qubits)
            .filter(|i| *i != self.halt_index)
            .map(QubitId::Proc)
            .collect();
        if !rest.is_empty() {
            layout.add_group("processor", rest)?;
        }
        if !data_cells.is_empty() {
            layout.add_group(
                "data",
                data_cells.iter().map(|c| QubitId::Tape(*c as i64)).collect(),
            )?;
        }
        if !program_cells.is_empty() {
            layout.add_group(
                "program",
                program_cells.iter().map(|c| QubitId::Tape(*c as i64)).collect(),
            )?;
        }
        Ok(layout)
    }
}

/// Column-sparse one-step operator on the cyclic window.
#[derive(Debug, Clone)]
pub struct WindowStep {
    layout: WindowLayout,
    /// `cols[i]` lists the nonzero `(row, amplitude)` entries of column i.
    cols: Vec<Vec<(u32, Complex64)>>,
}

impl WindowStep {
    pub fn new(m: &MachineDef, window_len: usize) -> Result<Self> {
        let layout = WindowLayout::new(window_len, m.proc_qubits(), m.halt_index())?;
        let dim = layout.dim();
        let mut cols = Vec::with_capacity(dim);
        for idx in 0..dim {
            let (head, proc, tape) = layout.decode(idx);
            let scanned = (tape >> head) & 1 == 1;
            let rule = m.rule(proc, scanned);
            let mut col = Vec::with_capacity(rule.successors.len());
            for succ in &rule.successors {
                let tape2 = if succ.write {
                    tape | (1 << head)
                } else {
                    tape & !(1 << head)
                };
                let head2 = (head as i64 + succ.dir.displacement())
                    .rem_euclid(window_len as i64) as usize;
                col.push((
                    layout.encode(head2, succ.to_proc, tape2) as u32,
                    succ.amp,
                ));
            }
            cols.push(col);
        }
        Ok(WindowStep { layout, cols })
    }

    pub fn layout(&self) -> &WindowLayout {
        &self.layout
    }

    /// ‖U†U − I‖_F computed without materialising the matrix: column
    /// norms give the diagonal of the Gram matrix and row buckets give
    /// the off-diagonal inner products.
    pub fn unitarity_error(&self) -> f64 {
        let mut acc = 0.0f64;
        for col in &self.cols {
            let n: f64 = col.iter().map(|(_, a)| a.norm_sqr()).sum();
            acc += (n - 1.0).powi(2);
        }
        // Bucket entries by row; only columns sharing a row can have a
        // nonzero mutual inner product.
        let mut rows: BTreeMap<u32, Vec<(u32, Complex64)>> = BTreeMap::new();
        for (j, col) in self.cols.iter().enumerate() {
            for (r, a) in col {
                rows.entry(*r).or_default().push((j as u32, *a));
            }
        }
        let mut dots: BTreeMap<(u32, u32), Complex64> = BTreeMap::new();
        for entries in rows.values() {
            for (pos, (i, ai)) in entries.iter().enumerate() {
                for (j, aj) in &entries[pos + 1..] {
                    let (key, val) = if i < j {
                        ((*i, *j), ai.conj() * aj)
                    } else {
                        ((*j, *i), aj.conj() * ai)
                    };
                    *dots
                        .entry(key)
                        .or_insert_with(|| Complex64::new(0.0, 0.0)) += val;
                }
            }
        }
        acc += 2.0 * dots.values().map(|d| d.norm_sqr()).sum::<f64>();
        acc.sqrt()
    }

    /// Dense matrix form, capped at `cap` rows.
    pub fn to_matrix(&self, cap: usize) -> Result<DMatrix<Complex64>> {
        let dim = self.layout.dim();
        if dim > cap {
            return Err(Error::DimensionCap {
                dim,
                cap,
                context: "dense window step".into(),
            });
        }
        let mut mat = DMatrix::<Complex64>::zeros(dim, dim);
        for (j, col) in self.cols.iter().enumerate() {
            for (r, a) in col {
                mat[(*r as usize, j)] += a;
            }
        }
        Ok(mat)
    }
}

impl StepOperator for WindowStep {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn apply(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        assert_eq!(v.len(), self.dim(), "vector length mismatch");
        let mut out = DVector::from_element(self.dim(), Complex64::new(0.0, 0.0));
        for (j, col) in self.cols.iter().enumerate() {
            let x = v[j];
            if x.norm_sqr() == 0.0 {
                continue;
            }
            for (r, a) in col {
                out[*r as usize] += a * x;
            }
        }
        out
    }
}

/// ‖U†U − I‖_F of the cyclic window step, without densifying.
pub fn window_unitarity_err(m: &MachineDef, window_len: usize) -> Result<f64> {
    Ok(WindowStep::new(m, window_len)?.unitarity_error())
}

/// Dense, certified-unitary global step on the cyclic window. Fails when
/// the dimension exceeds `cap` or the operator is not unitary.
pub fn build_global_step(m: &MachineDef, window_len: usize, cap: usize) -> Result<DenseUnitary> {
    let step = WindowStep::new(m, window_len)?;
    DenseUnitary::new(step.to_matrix(cap)?)
}

/// Dense global step together with the layout describing its index
/// conventions — the bridge from machine language to gate-array language.
pub fn embed_qtm_step(
    m: &MachineDef,
    window_len: usize,
    cap: usize,
) -> Result<(DenseUnitary, WindowLayout)> {
    let step = WindowStep::new(m, window_len)?;
    let u = DenseUnitary::new(step.to_matrix(cap)?)?;
    Ok((u, step.layout))
}

/// Encodes a sparse machine state into the window basis. Every stored
/// configuration must lie inside `[0, window_len)` (head and tape alike).
pub fn sparse_to_window(s: &SparseState, layout: &WindowLayout) -> Result<DVector<Complex64>> {
    let mut v = DVector::from_element(layout.dim(), Complex64::new(0.0, 0.0));
    for (cfg, amp) in s.iter() {
        v[window_index(cfg, layout)?] += *amp;
    }
    Ok(v)
}

/// Index of a single in-window configuration.
pub fn window_index(cfg: &Config, layout: &WindowLayout) -> Result<usize> {
    if cfg.proc_len() != layout.proc_qubits {
        return Err(Error::InvalidState(format!(
            "configuration has {} processor qubits, window expects {}",
            cfg.proc_len(),
            layout.proc_qubits
        )));
    }
    let l = layout.window_len as i64;
    if cfg.head() < 0 || cfg.head() >= l {
        return Err(Error::InvalidState(format!(
            "head {} outside window 0..{l}",
            cfg.head()
        )));
    }
    let mut tape = 0u32;
    for cell in cfg.ones() {
        if cell < 0 || cell >= l {
            return Err(Error::InvalidState(format!(
                "tape cell {cell} outside window 0..{l}"
            )));
        }
        tape |= 1 << cell;
    }
    Ok(layout.encode(cfg.head() as usize, cfg.proc_index(), tape))
}

/// Decodes a window vector back into a sparse machine state, dropping
/// squared amplitudes below `threshold`.
pub fn window_to_sparse(
    v: &DVector<Complex64>,
    layout: &WindowLayout,
    threshold: f64,
) -> SparseState {
    let mut s = SparseState::new();
    for (idx, amp) in v.iter().enumerate() {
        if amp.norm_sqr() < threshold {
            continue;
        }
        let (head, proc, tape) = layout.decode(idx);
        let ones = (0..layout.window_len)
            .filter(|j| (tape >> j) & 1 == 1)
            .map(|j| j as i64);
        s.add(
            Config::new(head as i64, layout.proc_qubits, proc, ones),
            *amp,
        );
    }
    s
}
