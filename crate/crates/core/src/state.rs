//! Sparse representation of machine states.
//!
//! A basis configuration records the head position, the finite processor
//! register and the tape content. Only a finite window of the tape is
//! stored: the minimal contiguous span that covers every non-blank cell
//! *and* the head cell (so the scanned bit is always materialised, even
//! when it is blank). Cells outside the window are blank (`0`).
//!
//! A state is a complex superposition of configurations, held in a
//! `BTreeMap` so iteration order — and therefore every serialised report —
//! is deterministic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::DensityMatrix;

/// Amplitudes with squared magnitude below this are dropped when pruning.
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 1e-14;

/// Largest kept-register size (in qubits) for dense reduced densities.
pub const MAX_REDUCED_QUBITS: usize = 10;

/// Address of a single qubit of the model: a processor qubit (by index)
/// or a tape cell (by absolute cell coordinate).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QubitId {
    Proc(usize),
    Tape(i64),
}

impl fmt::Display for QubitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QubitId::Proc(i) => write!(f, "proc[{i}]"),
            QubitId::Tape(c) => write!(f, "tape[{c}]"),
        }
    }
}

/// Named, disjoint groups of qubits (e.g. "halt", "data", "program").
#[derive(Debug, Clone, Default)]
pub struct RegisterLayout {
    groups: BTreeMap<String, Vec<QubitId>>,
}

impl RegisterLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a named group; fails if the name is taken or any qubit is
    /// already a member of another group.
    pub fn add_group(&mut self, name: &str, qubits: Vec<QubitId>) -> Result<()> {
        if self.groups.contains_key(name) {
            return Err(Error::InvalidParameter(format!(
                "register group '{name}' already defined"
            )));
        }
        let mut seen: BTreeSet<QubitId> = self.groups.values().flatten().copied().collect();
        for q in &qubits {
            if !seen.insert(*q) {
                return Err(Error::InvalidParameter(format!(
                    "qubit {q} assigned to more than one register group"
                )));
            }
        }
        self.groups.insert(name.to_string(), qubits);
        Ok(())
    }

    pub fn group(&self, name: &str) -> Option<&[QubitId]> {
        self.groups.get(name).map(|v| v.as_slice())
    }

    pub fn groups(&self) -> impl Iterator<Item = (&str, &[QubitId])> {
        self.groups.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

/// Direction of a single head move. There is no "stay" move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dir {
    Left,
    Right,
}

impl Dir {
    pub fn displacement(self) -> i64 {
        match self {
            Dir::Left => -1,
            Dir::Right => 1,
        }
    }
}

impl fmt::Display for Dir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dir::Left => write!(f, "L"),
            Dir::Right => write!(f, "R"),
        }
    }
}

/// One classical configuration: head position, processor register content
/// and the canonical tape window.
///
/// Two configurations describing the same physical situation always
/// compare equal because the window is canonical.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Config {
    head: i64,
    proc: u32,
    proc_len: u8,
    tape_start: i64,
    tape: Vec<bool>,
}

impl Config {
    /// Builds a configuration from the set of non-blank cells.
    ///
    /// `proc_len` counts processor qubits (halt qubit included) and must
    /// be in `1..=24`; `proc` must fit in that many bits.
    pub fn new(
        head: i64,
        proc_len: usize,
        proc: u32,
        ones: impl IntoIterator<Item = i64>,
    ) -> Self {
        assert!(
            (1..=24).contains(&proc_len),
            "processor width {proc_len} outside 1..=24"
        );
        assert!(
            proc_len == 32 || proc < (1u32 << proc_len),
            "processor value {proc} does not fit in {proc_len} qubits"
        );
        let ones: BTreeSet<i64> = ones.into_iter().collect();
        let start = ones.iter().next().copied().unwrap_or(head).min(head);
        let end = ones.iter().next_back().copied().unwrap_or(head).max(head);
        let len = usize::try_from(end - start + 1).expect("tape window too wide");
        let mut tape = vec![false; len];
        for c in ones {
            tape[(c - start) as usize] = true;
        }
        Config {
            head,
            proc,
            proc_len: proc_len as u8,
            tape_start: start,
            tape,
        }
    }

    /// Builds a configuration from an explicit window of bits starting at
    /// `tape_start`; the window is re-canonicalised.
    pub fn from_window(
        head: i64,
        proc_len: usize,
        proc: u32,
        tape_start: i64,
        bits: &[bool],
    ) -> Self {
        let ones = bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| tape_start + i as i64);
        Config::new(head, proc_len, proc, ones)
    }

    pub fn head(&self) -> i64 {
        self.head
    }

    pub fn proc_index(&self) -> u32 {
        self.proc
    }

    pub fn proc_len(&self) -> usize {
        self.proc_len as usize
    }

    /// Bit `i` of the processor register (little-endian: qubit 0 is the
    /// least significant bit).
    pub fn proc_bit(&self, i: usize) -> bool {
        assert!(i < self.proc_len(), "processor qubit {i} out of range");
        (self.proc >> i) & 1 == 1
    }

    /// Tape content at an arbitrary cell; cells outside the stored window
    /// are blank.
    pub fn tape_bit(&self, cell: i64) -> bool {
        if cell < self.tape_start {
            return false;
        }
        let off = (cell - self.tape_start) as usize;
        self.tape.get(off).copied().unwrap_or(false)
    }

    /// The bit currently under the head.
    pub fn scanned(&self) -> bool {
        self.tape_bit(self.head)
    }

    /// The canonical stored window: start cell and bits.
    pub fn window(&self) -> (i64, &[bool]) {
        (self.tape_start, &self.tape)
    }

    /// Coordinates of all non-blank cells, ascending.
    pub fn ones(&self) -> Vec<i64> {
        self.tape
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| self.tape_start + i as i64)
            .collect()
    }

    /// Copy with one tape cell overwritten (re-canonicalised).
    pub fn with_tape_bit(&self, cell: i64, bit: bool) -> Config {
        let mut ones: BTreeSet<i64> = self.ones().into_iter().collect();
        if bit {
            ones.insert(cell);
        } else {
            ones.remove(&cell);
        }
        Config::new(self.head, self.proc_len(), self.proc, ones)
    }

    /// Copy with the processor register replaced.
    pub fn with_proc(&self, proc: u32) -> Config {
        Config::new(self.head, self.proc_len(), proc, self.ones())
    }

    /// The configuration reached by writing `write` at the head, moving
    /// the head one cell in `dir` and loading `to_proc` into the
    /// processor.
    pub fn successor(&self, to_proc: u32, write: bool, dir: Dir) -> Config {
        let mut ones: BTreeSet<i64> = self.ones().into_iter().collect();
        if write {
            ones.insert(self.head);
        } else {
            ones.remove(&self.head);
        }
        Config::new(
            self.head + dir.displacement(),
            self.proc_len(),
            self.proc,
            ones,
        )
        .with_proc(to_proc)
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bits: String = self
            .tape
            .iter()
            .map(|b| if *b { '1' } else { '0' })
            .collect();
        write!(
            f,
            "head={} proc={:0width$b} tape[{}..]={}",
            self.head,
            self.proc,
            self.tape_start,
            bits,
            width = self.proc_len()
        )
    }
}

/// A sparse complex superposition of configurations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseState {
    terms: BTreeMap<Config, Complex64>,
}

impl SparseState {
    pub fn new() -> Self {
        Self::default()
    }

    /// The basis state |config⟩ with amplitude 1.
    pub fn basis(config: Config) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(config, Complex64::new(1.0, 0.0));
        SparseState { terms }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Config, Complex64)>) -> Self {
        let mut s = SparseState::new();
        for (c, a) in terms {
            s.add(c, a);
        }
        s
    }

    /// Adds `amp` to the coefficient of `config`, merging duplicates.
    pub fn add(&mut self, config: Config, amp: Complex64) {
        *self
            .terms
            .entry(config)
            .or_insert_with(|| Complex64::new(0.0, 0.0)) += amp;
    }

    pub fn contains(&self, config: &Config) -> bool {
        self.terms.contains_key(config)
    }

    pub fn amplitude(&self, config: &Config) -> Complex64 {
        self.terms
            .get(config)
            .copied()
            .unwrap_or_else(|| Complex64::new(0.0, 0.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Config, &Complex64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Drops terms with squared magnitude below `threshold`.
    pub fn prune(&mut self, threshold: f64) {
        self.terms.retain(|_, a| a.norm_sqr() >= threshold);
    }

    /// Same state scaled to unit norm; fails on (numerically) zero states.
    pub fn normalized(&self) -> Result<SparseState> {
        let n = self.norm();
        if n < 1e-12 {
            return Err(Error::InvalidState(
                "cannot normalize a zero state".into(),
            ));
        }
        Ok(self.scaled(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, factor: Complex64) -> SparseState {
        SparseState {
            terms: self
                .terms
                .iter()
                .map(|(c, a)| (c.clone(), a * factor))
                .collect(),
        }
    }

    /// Common processor width of all stored configurations, if any term
    /// is present. Mixed widths are a construction bug.
    pub fn proc_len(&self) -> Option<usize> {
        let mut it = self.terms.keys();
        let first = it.next()?.proc_len();
        debug_assert!(it.all(|c| c.proc_len() == first));
        Some(first)
    }

    /// Union of the stored tape windows over all terms (ascending cells).
    pub fn tape_support(&self) -> BTreeSet<i64> {
        let mut cells = BTreeSet::new();
        for c in self.terms.keys() {
            let (start, bits) = c.window();
            for i in 0..bits.len() {
                cells.insert(start + i as i64);
            }
        }
        cells
    }
}

/// ⟨a|b⟩ over the shared configuration basis.
pub fn inner_product(a: &SparseState, b: &SparseState) -> Complex64 {
    // Iterate over the smaller support.
    let (small, large, conj_small) = if a.len() <= b.len() {
        (a, b, true)
    } else {
        (b, a, false)
    };
    let mut acc = Complex64::new(0.0, 0.0);
    for (c, amp) in small.iter() {
        let other = large.amplitude(c);
        if conj_small {
            acc += amp.conj() * other;
        } else {
            acc += other.conj() * amp;
        }
    }
    acc
}

/// ‖a − b‖², summed term by term over the union of the two supports.
/// (The inner-product expansion would cancel catastrophically for
/// nearly equal states; direct summation stays accurate down to the
/// squared machine epsilon.)
pub fn distance_sq(a: &SparseState, b: &SparseState) -> f64 {
    let mut acc = 0.0;
    for (c, amp) in a.iter() {
        acc += (amp - b.amplitude(c)).norm_sqr();
    }
    for (c, amp) in b.iter() {
        if !a.contains(c) {
            acc += amp.norm_sqr();
        }
    }
    acc
}

/// |⟨a|b⟩|² for normalized pure states.
pub fn fidelity_pure(a: &SparseState, b: &SparseState) -> f64 {
    inner_product(a, b).norm_sqr()
}

/// c_a·|a⟩ + c_b·|b⟩ with duplicate configurations merged.
pub fn superpose(
    c_a: Complex64,
    a: &SparseState,
    c_b: Complex64,
    b: &SparseState,
) -> SparseState {
    let mut s = a.scaled(c_a);
    for (c, amp) in b.iter() {
        s.add(c.clone(), amp * c_b);
    }
    s
}

/// Index of a configuration in the kept register, with `keep[0]` the most
/// significant qubit.
pub(crate) fn kept_index(c: &Config, keep: &[QubitId]) -> usize {
    let mut idx = 0usize;
    for q in keep {
        let bit = match q {
            QubitId::Proc(i) => c.proc_bit(*i),
            QubitId::Tape(cell) => c.tape_bit(*cell),
        };
        idx = (idx << 1) | usize::from(bit);
    }
    idx
}

/// The configuration with every kept qubit forced to 0: states sharing
/// this key (and only those) interfere inside one reduced-density block.
fn rest_key(c: &Config, keep: &[QubitId]) -> Config {
    let mut proc = c.proc_index();
    let mut ones: BTreeSet<i64> = c.ones().into_iter().collect();
    for q in keep {
        match q {
            QubitId::Proc(i) => proc &= !(1u32 << i),
            QubitId::Tape(cell) => {
                ones.remove(cell);
            }
        }
    }
    Config::new(c.head(), c.proc_len(), proc, ones)
}

fn check_keep(s: &SparseState, keep: &[QubitId]) -> Result<()> {
    if keep.is_empty() {
        return Err(Error::InvalidParameter(
            "reduced density needs at least one kept qubit".into(),
        ));
    }
    let mut seen = BTreeSet::new();
    for q in keep {
        if !seen.insert(*q) {
            return Err(Error::InvalidParameter(format!(
                "kept qubit {q} listed twice"
            )));
        }
    }
    let Some(proc_len) = s.proc_len() else {
        return Err(Error::InvalidState("empty state".into()));
    };
    let support = s.tape_support();
    for q in keep {
        match q {
            QubitId::Proc(i) => {
                if *i >= proc_len {
                    return Err(Error::UndefinedQubit(format!(
                        "{q} but the processor has {proc_len} qubits"
                    )));
                }
            }
            QubitId::Tape(cell) => {
                if !support.contains(cell) {
                    return Err(Error::UndefinedQubit(format!(
                        "{q} lies outside every stored tape window"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Gram accumulation behind both the dense reduced density and the sparse
/// purity: groups terms by their traced-out remainder and returns, per
/// group, the sparse kept-register vector.
pub(crate) fn kept_group_vectors(
    s: &SparseState,
    keep: &[QubitId],
) -> BTreeMap<Config, BTreeMap<usize, Complex64>> {
    let mut groups: BTreeMap<Config, BTreeMap<usize, Complex64>> = BTreeMap::new();
    for (c, amp) in s.iter() {
        let key = rest_key(c, keep);
        let idx = kept_index(c, keep);
        *groups
            .entry(key)
            .or_default()
            .entry(idx)
            .or_insert_with(|| Complex64::new(0.0, 0.0)) += *amp;
    }
    groups
}

/// Reduced density matrix over the kept qubits, tracing out everything
/// else (remaining processor qubits, the rest of the tape and the head).
///
/// `keep[0]` is the most significant bit of the matrix index. The state
/// must be normalized, each kept tape cell must lie inside the union of
/// the stored tape windows, and the kept register is capped at
/// [`MAX_REDUCED_QUBITS`] qubits.
pub fn reduced_density(s: &SparseState, keep: &[QubitId]) -> Result<DensityMatrix> {
    check_keep(s, keep)?;
    if keep.len() > MAX_REDUCED_QUBITS {
        return Err(Error::DimensionCap {
            dim: 1usize << keep.len(),
            cap: 1usize << MAX_REDUCED_QUBITS,
            context: "reduced density matrix".into(),
        });
    }
    if (s.norm_sqr() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidState(format!(
            "reduced density needs a normalized state (norm² = {})",
            s.norm_sqr()
        )));
    }
    let dim = 1usize << keep.len();
    let mut rho = nalgebra::DMatrix::<Complex64>::zeros(dim, dim);
    for vec in kept_group_vectors(s, keep).values() {
        for (&i, &ai) in vec {
            for (&j, &aj) in vec {
                rho[(i, j)] += ai * aj.conj();
            }
        }
    }
    DensityMatrix::new(rho)
}

/// Purity Tr ρ² of the kept-register marginal, computed without forming
/// the (possibly huge) dense matrix: Tr ρ² = Σ_{g,h} |⟨v_g|v_h⟩|² over the
/// per-remainder kept vectors.
pub fn marginal_purity(s: &SparseState, keep: &[QubitId]) -> Result<f64> {
    check_keep(s, keep)?;
    if (s.norm_sqr() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidState(format!(
            "marginal purity needs a normalized state (norm² = {})",
            s.norm_sqr()
        )));
    }
    let groups: Vec<BTreeMap<usize, Complex64>> =
        kept_group_vectors(s, keep).into_values().collect();
    let mut acc = 0.0;
    for g in &groups {
        for h in &groups {
            let mut dot = Complex64::new(0.0, 0.0);
            // Walk the smaller map.
            let (a, b, conj_a) = if g.len() <= h.len() {
                (g, h, true)
            } else {
                (h, g, false)
            };
            for (i, ai) in a {
                if let Some(bi) = b.get(i) {
                    if conj_a {
                        dot += ai.conj() * bi;
                    } else {
                        dot += bi.conj() * ai;
                    }
                }
            }
            acc += dot.norm_sqr();
        }
    }
    Ok(acc)
}

/// ⟨t|ρ|t⟩ where ρ is the kept-register marginal of `s` and `t` a pure
/// target on that register (length 2^k, `keep[0]` most significant):
/// computed sparsely as Σ_groups |⟨t|v_g⟩|².
pub fn marginal_fidelity(
    s: &SparseState,
    keep: &[QubitId],
    target: &[Complex64],
) -> Result<f64> {
    check_keep(s, keep)?;
    if target.len() != 1usize << keep.len() {
        return Err(Error::InvalidParameter(format!(
            "target length {} does not match {} kept qubits",
            target.len(),
            keep.len()
        )));
    }
    let t_norm: f64 = target.iter().map(|a| a.norm_sqr()).sum();
    if (t_norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidState(format!(
            "marginal fidelity target has norm² = {t_norm}"
        )));
    }
    if (s.norm_sqr() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidState(format!(
            "marginal fidelity needs a normalized state (norm² = {})",
            s.norm_sqr()
        )));
    }
    let mut acc = 0.0;
    for vec in kept_group_vectors(s, keep).values() {
        let mut dot = Complex64::new(0.0, 0.0);
        for (i, ai) in vec {
            dot += target[*i].conj() * ai;
        }
        acc += dot.norm_sqr();
    }
    Ok(acc.min(1.0))
}

/// Raw (unvalidated) Gram matrix over the kept register; used internally
/// for ensemble averages where sub-normalized branches are combined
/// before the density-matrix checks run.
pub(crate) fn raw_kept_gram(
    s: &SparseState,
    keep: &[QubitId],
) -> nalgebra::DMatrix<Complex64> {
    let dim = 1usize << keep.len();
    let mut rho = nalgebra::DMatrix::<Complex64>::zeros(dim, dim);
    for vec in kept_group_vectors(s, keep).values() {
        for (&i, &ai) in vec {
            for (&j, &aj) in vec {
                rho[(i, j)] += ai * aj.conj();
            }
        }
    }
    rho
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn canonical_window_covers_head_and_ones() {
        // Head far from the written cells: window spans both.
        let cfg = Config::new(5, 2, 0b10, [1i64, 2]);
        let (start, bits) = cfg.window();
        assert_eq!(start, 1);
        assert_eq!(bits, &[true, true, false, false, false]);
        assert!(!cfg.scanned());

        // Blank tape: the window is exactly the head cell.
        let blank = Config::new(-3, 1, 0, []);
        assert_eq!(blank.window(), (-3, &[false][..]));
    }

    #[test]
    fn equal_content_compares_equal() {
        let a = Config::new(0, 2, 1, [2i64]);
        let b = Config::from_window(0, 2, 1, -1, &[false, false, false, true, false]);
        assert_eq!(a, b);
    }

    #[test]
    fn successor_writes_and_moves() {
        let cfg = Config::new(0, 2, 0b01, []);
        let next = cfg.successor(0b10, true, Dir::Right);
        assert_eq!(next.head(), 1);
        assert_eq!(next.proc_index(), 0b10);
        assert!(next.tape_bit(0));
        assert!(!next.scanned());

        let back = next.successor(0b01, false, Dir::Left);
        assert_eq!(back.head(), 0);
        assert!(!back.tape_bit(1));
        assert!(back.tape_bit(0));
    }

    #[test]
    fn tape_bits_outside_window_are_blank() {
        let cfg = Config::new(0, 1, 0, [0i64]);
        assert!(cfg.tape_bit(0));
        assert!(!cfg.tape_bit(100));
        assert!(!cfg.tape_bit(-100));
    }

    #[test]
    fn superpose_merges_amplitudes() {
        let cfg = Config::new(0, 1, 0, []);
        let s = SparseState::basis(cfg.clone());
        let merged = superpose(c(0.5, 0.0), &s, c(0.5, 0.0), &s);
        assert_eq!(merged.len(), 1);
        assert_abs_diff_eq!(merged.amplitude(&cfg).re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn distance_sq_matches_inner_product_identity() {
        let c0 = Config::new(0, 1, 0, []);
        let c1 = Config::new(0, 1, 1, []);
        let inv = 1.0 / 2.0_f64.sqrt();
        let a = superpose(
            c(inv, 0.0),
            &SparseState::basis(c0.clone()),
            c(inv, 0.0),
            &SparseState::basis(c1.clone()),
        );
        let b = SparseState::basis(c0);
        // ‖a‖² = ‖b‖² = 1, ⟨a|b⟩ = 1/√2 → distance² = 2 − √2.
        assert_abs_diff_eq!(distance_sq(&a, &b), 2.0 - 2.0_f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(fidelity_pure(&a, &b), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn prune_drops_tiny_terms_only() {
        let c0 = Config::new(0, 1, 0, []);
        let c1 = Config::new(0, 1, 1, []);
        let mut s = SparseState::from_terms([
            (c0.clone(), c(1.0, 0.0)),
            (c1.clone(), c(1e-8, 0.0)),
        ]);
        s.prune(DEFAULT_PRUNE_THRESHOLD);
        // 1e-16 squared magnitude < 1e-14 threshold: dropped.
        assert_eq!(s.len(), 1);
        assert_eq!(s.amplitude(&c0), c(1.0, 0.0));
    }

    #[test]
    fn reduced_density_of_product_state_is_pure() {
        // (|0⟩+|1⟩)/√2 on proc qubit 0, blank tape: keeping that qubit
        // gives the pure projector with purity 1.
        let inv = 1.0 / 2.0_f64.sqrt();
        let s = SparseState::from_terms([
            (Config::new(0, 1, 0, []), c(inv, 0.0)),
            (Config::new(0, 1, 1, []), c(inv, 0.0)),
        ]);
        let rho = reduced_density(&s, &[QubitId::Proc(0)]).unwrap();
        assert_abs_diff_eq!(crate::linalg::purity(&rho), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rho.entry(0, 1).re, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn reduced_density_of_correlated_state_is_mixed() {
        // (|0⟩|tape 0⟩ + |1⟩|tape 1 at cell 0⟩)/√2: the processor marginal
        // is maximally mixed because the tape records the branch.
        let inv = 1.0 / 2.0_f64.sqrt();
        let s = SparseState::from_terms([
            (Config::new(0, 1, 0, []), c(inv, 0.0)),
            (Config::new(0, 1, 1, [0i64]), c(inv, 0.0)),
        ]);
        let rho = reduced_density(&s, &[QubitId::Proc(0)]).unwrap();
        assert_abs_diff_eq!(crate::linalg::purity(&rho), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rho.entry(0, 1).norm(), 0.0, epsilon = 1e-12);
        // Sparse purity agrees with the dense route.
        let p = marginal_purity(&s, &[QubitId::Proc(0)]).unwrap();
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn reduced_density_keep_order_is_msb_first() {
        // proc = 0b01 (qubit 0 set, qubit 1 clear). Keeping [q1, q0]
        // indexes the basis as q1·2 + q0 = 1.
        let s = SparseState::basis(Config::new(0, 2, 0b01, []));
        let rho = reduced_density(&s, &[QubitId::Proc(1), QubitId::Proc(0)]).unwrap();
        assert_abs_diff_eq!(rho.entry(1, 1).re, 1.0, epsilon = 1e-12);
        // Reversed keep order moves the population to index 2.
        let rho = reduced_density(&s, &[QubitId::Proc(0), QubitId::Proc(1)]).unwrap();
        assert_abs_diff_eq!(rho.entry(2, 2).re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn reduced_density_rejects_undefined_tape_cell() {
        let s = SparseState::basis(Config::new(0, 1, 0, []));
        // Cell 7 was never part of any stored window.
        let err = reduced_density(&s, &[QubitId::Tape(7)]).unwrap_err();
        assert!(matches!(err, Error::UndefinedQubit(_)), "got {err:?}");
    }

    #[test]
    fn reduced_density_rejects_unnormalized_state() {
        let s = SparseState::basis(Config::new(0, 1, 0, [])).scaled(c(2.0, 0.0));
        assert!(reduced_density(&s, &[QubitId::Proc(0)]).is_err());
    }

    #[test]
    fn marginal_purity_matches_dense_on_tape_qubits() {
        // Head entangles with a tape cell after a branch-dependent write.
        let inv = 1.0 / 2.0_f64.sqrt();
        let s = SparseState::from_terms([
            (Config::new(1, 1, 0, [0i64]), c(inv, 0.0)),
            (Config::new(-1, 1, 1, [0i64]), c(0.0, inv)),
        ]);
        let keep = [QubitId::Proc(0), QubitId::Tape(0)];
        let dense = crate::linalg::purity(&reduced_density(&s, &keep).unwrap());
        let sparse = marginal_purity(&s, &keep).unwrap();
        assert_abs_diff_eq!(dense, sparse, epsilon = 1e-12);
        // Head positions differ across branches, so the marginal is mixed.
        assert_abs_diff_eq!(sparse, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn marginal_fidelity_matches_density_expectation() {
        let inv = 1.0 / 2.0_f64.sqrt();
        let s = SparseState::from_terms([
            (Config::new(0, 1, 0, []), c(inv, 0.0)),
            (Config::new(0, 1, 1, []), c(inv, 0.0)),
        ]);
        let plus = [c(inv, 0.0), c(inv, 0.0)];
        let zero = [c(1.0, 0.0), c(0.0, 0.0)];
        let keep = [QubitId::Proc(0)];
        assert_abs_diff_eq!(marginal_fidelity(&s, &keep, &plus).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(marginal_fidelity(&s, &keep, &zero).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn register_layout_rejects_overlap() {
        let mut layout = RegisterLayout::new();
        layout.add_group("halt", vec![QubitId::Proc(0)]).unwrap();
        let err = layout
            .add_group("data", vec![QubitId::Proc(0), QubitId::Proc(1)])
            .unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }
}
