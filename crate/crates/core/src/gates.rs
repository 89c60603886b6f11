//! Programmable gate arrays on dense registers.
//!
//! A fixed unitary `G` acts on a data register of `m` qubits and a
//! program register of `p` qubits (data qubits are the most significant
//! index block: joint index = data·2^p + program). The module provides
//! the deterministic-program check, the controlled-repertoire and
//! register-swap constructions, data-dependent program optimization and
//! the program-register parameter counting.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{random_state, DenseUnitary};

/// Two unitaries closer than this (minimized over a global phase) are
/// treated as the same transformation.
pub const PHASE_EQUIV_TOL: f64 = 1e-8;

/// Fixed seed for the pseudo-random probe states of
/// [`check_deterministic_program`]; part of the deterministic contract.
const PROBE_SEED: u64 = 0x7f4a_7c15_9e37_79b9;

fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// A fixed gate array with a declared data/program split.
#[derive(Debug, Clone)]
pub struct GateArrayModel {
    g: DenseUnitary,
    m_data: usize,
    p_program: usize,
}

impl GateArrayModel {
    pub fn new(g: DenseUnitary, m_data: usize, p_program: usize) -> Result<Self> {
        if m_data == 0 {
            return Err(Error::InvalidParameter(
                "gate array needs at least one data qubit".into(),
            ));
        }
        let expected = 1usize
            .checked_shl((m_data + p_program) as u32)
            .ok_or_else(|| Error::InvalidParameter("register too large".into()))?;
        if g.dim() != expected {
            return Err(Error::InvalidMatrix(format!(
                "array dimension {} does not match {m_data}+{p_program} qubits",
                g.dim()
            )));
        }
        Ok(GateArrayModel {
            g,
            m_data,
            p_program,
        })
    }

    pub fn gate(&self) -> &DenseUnitary {
        &self.g
    }

    pub fn m_data(&self) -> usize {
        self.m_data
    }

    pub fn p_program(&self) -> usize {
        self.p_program
    }

    pub fn data_dim(&self) -> usize {
        1 << self.m_data
    }

    pub fn program_dim(&self) -> usize {
        1 << self.p_program
    }
}

/// A unit-norm program register state.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgramVector {
    amps: DVector<Complex64>,
}

impl ProgramVector {
    pub fn new(amps: DVector<Complex64>) -> Result<Self> {
        if !amps.len().is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "program register length {} is not a power of two",
                amps.len()
            )));
        }
        let norm = amps.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!(
                "program vector norm {norm} is not 1"
            )));
        }
        Ok(ProgramVector { amps })
    }

    /// Normalizes an arbitrary nonzero vector into a program state.
    pub fn normalized(amps_raw: DVector<Complex64>) -> Result<Self> {
        let n = amps_raw.norm();
        if n < 1e-12 {
            return Err(Error::InvalidState("zero program vector".into()));
        }
        ProgramVector::new(amps_raw / Complex64::new(n, 0.0))
    }

    /// Basis program |k⟩ on `p_qubits` qubits.
    pub fn basis(p_qubits: usize, k: usize) -> Self {
        let dim = 1 << p_qubits;
        assert!(k < dim, "basis index {k} out of range");
        let mut amps = DVector::from_element(dim, czero());
        amps[k] = Complex64::new(1.0, 0.0);
        ProgramVector { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.amps.len().trailing_zeros() as usize
    }

    pub fn as_vector(&self) -> &DVector<Complex64> {
        &self.amps
    }
}

/// ⟨p1|p2⟩.
pub fn program_overlap(p1: &ProgramVector, p2: &ProgramVector) -> Complex64 {
    assert_eq!(p1.dim(), p2.dim(), "program dimension mismatch");
    p1.as_vector().dotc(p2.as_vector())
}

/// G·(data ⊗ program).
pub fn apply(
    model: &GateArrayModel,
    data: &DVector<Complex64>,
    program: &ProgramVector,
) -> Result<DVector<Complex64>> {
    if data.len() != model.data_dim() || program.dim() != model.program_dim() {
        return Err(Error::InvalidState(format!(
            "apply expects data dim {} and program dim {}, got {} and {}",
            model.data_dim(),
            model.program_dim(),
            data.len(),
            program.dim()
        )));
    }
    let joint = data.kronecker(program.as_vector());
    Ok(model.gate().apply(&joint))
}

/// (⟨data_ref| ⊗ I) applied to a joint output: the (unnormalized)
/// program-register component along a fixed data state.
pub fn project_program(
    model: &GateArrayModel,
    joint: &DVector<Complex64>,
    data_ref: &DVector<Complex64>,
) -> DVector<Complex64> {
    let pd = model.program_dim();
    let mut out = DVector::from_element(pd, czero());
    for d in 0..model.data_dim() {
        let w = data_ref[d].conj();
        if w == czero() {
            continue;
        }
        for q in 0..pd {
            out[q] += w * joint[d * pd + q];
        }
    }
    out
}

/// (I ⊗ ⟨program_ref|) applied to a joint output: the (unnormalized)
/// data-register component along a fixed program state.
pub fn project_data(
    model: &GateArrayModel,
    joint: &DVector<Complex64>,
    program_ref: &DVector<Complex64>,
) -> DVector<Complex64> {
    let pd = model.program_dim();
    let mut out = DVector::from_element(model.data_dim(), czero());
    for d in 0..model.data_dim() {
        let mut acc = czero();
        for q in 0..pd {
            acc += program_ref[q].conj() * joint[d * pd + q];
        }
        out[d] = acc;
    }
    out
}

/// Fidelity ⟨t|ρ_data|t⟩ of the data marginal of a joint state against a
/// pure data target, computed as Σ_q |⟨t ⊗ e_q | joint⟩|².
pub fn data_marginal_fidelity(
    model: &GateArrayModel,
    joint: &DVector<Complex64>,
    target_data: &DVector<Complex64>,
) -> f64 {
    project_program(model, joint, target_data).norm_squared()
}

/// Purity of the data marginal of a joint pure state.
pub fn data_marginal_purity(model: &GateArrayModel, joint: &DVector<Complex64>) -> f64 {
    let (dd, pd) = (model.data_dim(), model.program_dim());
    let mut rho = DMatrix::<Complex64>::zeros(dd, dd);
    for q in 0..pd {
        for i in 0..dd {
            for j in 0..dd {
                rho[(i, j)] += joint[i * pd + q] * joint[j * pd + q].conj();
            }
        }
    }
    rho.iter().map(|z| z.norm_sqr()).sum()
}

/// Outcome of the deterministic-program verification.
#[derive(Debug, Clone)]
pub struct DeterministicProgramReport {
    pub ok: bool,
    /// Worst factorization fidelity over all probed data states.
    pub min_fidelity: f64,
    /// Residual program state extracted from the first basis probe, when
    /// it exists.
    pub program_out: Option<ProgramVector>,
}

/// Checks whether `program` implements `target` on the data register for
/// *every* data state, with one common residual program state: probes all
/// computational basis states plus eight seeded pseudo-random states, and
/// reports the worst overlap with (target·data) ⊗ P'.
pub fn check_deterministic_program(
    model: &GateArrayModel,
    target: &DenseUnitary,
    program: &ProgramVector,
    epsilon: f64,
) -> Result<DeterministicProgramReport> {
    if target.dim() != model.data_dim() {
        return Err(Error::InvalidMatrix(format!(
            "target dimension {} does not match data register {}",
            target.dim(),
            model.data_dim()
        )));
    }
    if program.dim() != model.program_dim() {
        return Err(Error::InvalidState(format!(
            "program dimension {} does not match program register {}",
            program.dim(),
            model.program_dim()
        )));
    }
    let dd = model.data_dim();
    let mut probes: Vec<DVector<Complex64>> = (0..dd)
        .map(|i| {
            let mut v = DVector::from_element(dd, czero());
            v[i] = Complex64::new(1.0, 0.0);
            v
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED);
    probes.extend((0..8).map(|_| random_state(dd, &mut rng)));

    // Residual program extracted from the first basis probe.
    let first_out = apply(model, &probes[0], program)?;
    let expected0 = target.apply(&probes[0]);
    let raw = project_program(model, &first_out, &expected0);
    let raw_norm = raw.norm();
    let program_out = if raw_norm > 1e-9 {
        Some(ProgramVector::new(raw / Complex64::new(raw_norm, 0.0))?)
    } else {
        None
    };

    let mut min_fidelity = f64::INFINITY;
    match &program_out {
        Some(p_out) => {
            for probe in &probes {
                let out = apply(model, probe, program)?;
                let expected = target.apply(probe).kronecker(p_out.as_vector());
                let fid = expected.dotc(&out).norm_sqr();
                min_fidelity = min_fidelity.min(fid);
            }
        }
        None => min_fidelity = 0.0,
    }
    Ok(DeterministicProgramReport {
        ok: min_fidelity >= 1.0 - epsilon,
        min_fidelity,
        program_out,
    })
}

/// G = Σ_k U_k ⊗ |k⟩⟨k| with the repertoire padded by identities up to
/// the next power of two. Each basis program |k⟩ then deterministically
/// implements U_k on the data register.
pub fn build_controlled_u_array(units: &[DenseUnitary]) -> Result<GateArrayModel> {
    if units.is_empty() {
        return Err(Error::InvalidParameter(
            "controlled array needs at least one unitary".into(),
        ));
    }
    let dd = units[0].dim();
    if !dd.is_power_of_two() {
        return Err(Error::InvalidMatrix(format!(
            "repertoire member dimension {dd} is not a power of two"
        )));
    }
    let m = dd.trailing_zeros() as usize;
    for u in units {
        if u.dim() != dd {
            return Err(Error::InvalidMatrix(
                "repertoire members must share one dimension".into(),
            ));
        }
    }
    let p = (units.len() as f64).log2().ceil() as usize;
    let pd = 1usize << p;
    let dim = dd * pd;
    let mut g = DMatrix::<Complex64>::zeros(dim, dim);
    for k in 0..pd {
        let ident = DenseUnitary::identity(dd);
        let u = units.get(k).unwrap_or(&ident).matrix();
        for i in 0..dd {
            for j in 0..dd {
                g[(i * pd + k, j * pd + k)] = u[(i, j)];
            }
        }
    }
    GateArrayModel::new(DenseUnitary::new(g)?, m, p)
}

/// G that exchanges the data and program registers (p = m). For any
/// unitary 𝒰 and data D, the data-dependent program P = 𝒰·D yields
/// output data exactly 𝒰·D with residual program D.
pub fn build_swap_array(m: usize) -> Result<GateArrayModel> {
    if m == 0 {
        return Err(Error::InvalidParameter(
            "swap array needs m ≥ 1 data qubits".into(),
        ));
    }
    if m > 8 {
        return Err(Error::DimensionCap {
            dim: 1usize << (2 * m),
            cap: 1usize << 16,
            context: "swap array".into(),
        });
    }
    let dd = 1usize << m;
    let dim = dd * dd;
    let mut g = DMatrix::<Complex64>::zeros(dim, dim);
    for d in 0..dd {
        for q in 0..dd {
            // |d⟩|q⟩ → |q⟩|d⟩
            g[(q * dd + d, d * dd + q)] = Complex64::new(1.0, 0.0);
        }
    }
    GateArrayModel::new(DenseUnitary::new(g)?, m, m)
}

/// min over a global phase of ‖U1 − e^{iφ}U2‖_F.
pub fn phase_distance(u1: &DenseUnitary, u2: &DenseUnitary) -> f64 {
    assert_eq!(u1.dim(), u2.dim(), "phase distance dimension mismatch");
    let n1: f64 = u1.matrix().iter().map(|z| z.norm_sqr()).sum();
    let n2: f64 = u2.matrix().iter().map(|z| z.norm_sqr()).sum();
    let tr = (u2.matrix().adjoint() * u1.matrix()).trace();
    (n1 + n2 - 2.0 * tr.norm()).max(0.0).sqrt()
}

/// Whether two unitaries agree up to a global phase (within
/// [`PHASE_EQUIV_TOL`]).
pub fn phase_equivalent(u1: &DenseUnitary, u2: &DenseUnitary) -> bool {
    phase_distance(u1, u2) <= PHASE_EQUIV_TOL
}

#[derive(Debug, Clone)]
pub struct OptimizeConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig {
            restarts: 4,
            max_iters: 400,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub best: ProgramVector,
    pub fidelity: f64,
    pub converged: bool,
    /// Best-so-far fidelity after each accepted iteration of the winning
    /// restart (monotone non-decreasing).
    pub trace: Vec<f64>,
}

fn raw_to_program(raw: &[f64]) -> Option<ProgramVector> {
    let dim = raw.len() / 2;
    let v = DVector::from_fn(dim, |i, _| Complex64::new(raw[2 * i], raw[2 * i + 1]));
    ProgramVector::normalized(v).ok()
}

/// Maximizes the data-marginal fidelity F(P) = ⟨𝒰D|ρ_D(P)|𝒰D⟩ over
/// unit-norm program vectors by seeded multi-restart projected gradient
/// ascent with finite-difference gradients. Deterministic for a fixed
/// seed; restarts are merged by (fidelity, restart index).
pub fn optimize_program(
    model: &GateArrayModel,
    target: &DenseUnitary,
    data: &DVector<Complex64>,
    epsilon: f64,
    cfg: &OptimizeConfig,
) -> Result<OptimizeResult> {
    if target.dim() != model.data_dim() || data.len() != model.data_dim() {
        return Err(Error::InvalidState(format!(
            "optimizer expects data dimension {}, got target {} / data {}",
            model.data_dim(),
            target.dim(),
            data.len()
        )));
    }
    if cfg.restarts == 0 {
        return Err(Error::InvalidParameter("restarts must be ≥ 1".into()));
    }
    if (data.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidState("data state must be normalized".into()));
    }
    let target_data = target.apply(data);
    let objective = |raw: &[f64]| -> f64 {
        match raw_to_program(raw) {
            Some(p) => {
                let joint = apply(model, data, &p).expect("dimensions checked above");
                data_marginal_fidelity(model, &joint, &target_data)
            }
            None => 0.0,
        }
    };
    let n = 2 * model.program_dim();
    // Pre-draw every restart's start point from one master stream so the
    // parallel map below cannot affect the sequence.
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let starts: Vec<Vec<f64>> = (0..cfg.restarts)
        .map(|_| {
            let v: Vec<f64> = (0..n)
                .map(|_| master.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            v
        })
        .collect();

    let runs: Vec<(f64, Vec<f64>, Vec<f64>)> = starts
        .into_par_iter()
        .map(|mut x| {
            let mut f = objective(&x);
            let mut lr = 0.25f64;
            let mut trace = vec![f];
            let h = 1e-5;
            for _ in 0..cfg.max_iters {
                // Central-difference gradient.
                let mut grad = vec![0.0f64; n];
                for i in 0..n {
                    let keep = x[i];
                    x[i] = keep + h;
                    let fp = objective(&x);
                    x[i] = keep - h;
                    let fm = objective(&x);
                    x[i] = keep;
                    grad[i] = (fp - fm) / (2.0 * h);
                }
                let gnorm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if gnorm < 1e-12 {
                    break;
                }
                // Backtracking line search on the projected step.
                let mut accepted = false;
                while lr > 1e-13 {
                    let cand: Vec<f64> = x
                        .iter()
                        .zip(&grad)
                        .map(|(xi, gi)| xi + lr * gi)
                        .collect();
                    let fc = objective(&cand);
                    if fc > f + 1e-15 {
                        x = cand;
                        f = fc;
                        lr *= 1.5;
                        accepted = true;
                        break;
                    }
                    lr *= 0.5;
                }
                trace.push(f);
                if !accepted || 1.0 - f <= epsilon * 1e-2 {
                    break;
                }
            }
            (f, x, trace)
        })
        .collect();

    let mut best_idx = 0usize;
    for (i, run) in runs.iter().enumerate() {
        if run.0 > runs[best_idx].0 {
            best_idx = i;
        }
    }
    let (fidelity, raw, trace) = runs.into_iter().nth(best_idx).expect("restarts ≥ 1");
    let best = raw_to_program(&raw).ok_or_else(|| {
        Error::InvalidState("optimizer produced a degenerate program vector".into())
    })?;
    Ok(OptimizeResult {
        best,
        fidelity,
        converged: 1.0 - fidelity <= epsilon,
        trace,
    })
}

/// Register sizes from the universality counting argument: a data state
/// on m qubits takes 2^(m+1)−1 real parameters, the unitaries form a
/// 2^(2m)-parameter family, and a program register serving them all needs
/// 2^(2m)·(2^(m+1)−1) real parameters.
pub fn program_parameter_count(m: u32) -> Result<(u64, u64, u64)> {
    if m == 0 {
        return Err(Error::InvalidParameter(
            "parameter counting needs m ≥ 1 data qubits".into(),
        ));
    }
    if m > 20 {
        return Err(Error::InvalidParameter(format!(
            "m = {m} exceeds the overflow guard (m ≤ 20)"
        )));
    }
    let data = (1u64 << (m + 1)) - 1;
    let unitary = 1u64 << (2 * m);
    Ok((data, unitary, unitary * data))
}

/// Summary of the data-dependent-program demonstration on the swap array.
#[derive(Debug, Clone)]
pub struct SwapDemoReport {
    pub samples: usize,
    /// Worst squared distance between the extracted output data register
    /// and 𝒰·D over all samples.
    pub max_data_distance_sq: f64,
    /// Largest |⟨P(𝒰₂,D)|P(𝒰₁,D)⟩| among sampled pairs of
    /// phase-inequivalent unitaries sharing the same data state.
    pub max_overlap: f64,
    /// Phase distance of the unitary pair attaining `max_overlap`.
    pub max_overlap_phase_distance: f64,
    pub max_overlap_sample: usize,
}

/// Runs `samples` seeded (𝒰, D) experiments on the swap array: checks
/// that the program P = 𝒰·D reproduces 𝒰·D on the data register
/// exactly, and records how non-orthogonal programs for two distinct
/// unitaries on the same data can be.
pub fn swap_demo(m: usize, samples: usize, seed: u64) -> Result<SwapDemoReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be ≥ 1".into()));
    }
    let model = build_swap_array(m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_dist = 0.0f64;
    let mut max_overlap = -1.0f64;
    let mut max_overlap_phase = 0.0;
    let mut max_overlap_sample = 0;
    for i in 0..samples {
        let u1 = crate::linalg::random_unitary(model.data_dim(), &mut rng);
        let u2 = crate::linalg::random_unitary(model.data_dim(), &mut rng);
        let d = random_state(model.data_dim(), &mut rng);
        let p1 = ProgramVector::new(u1.apply(&d))?;
        let p2 = ProgramVector::new(u2.apply(&d))?;
        let out = apply(&model, &d, &p1)?;
        // Swap semantics: the residual program is exactly D.
        let data_out = project_data(&model, &out, &d);
        let dist = (&data_out - u1.apply(&d)).norm_squared();
        max_dist = max_dist.max(dist);
        if !phase_equivalent(&u1, &u2) {
            let ov = program_overlap(&p2, &p1).norm();
            if ov > max_overlap {
                max_overlap = ov;
                max_overlap_phase = phase_distance(&u1, &u2);
                max_overlap_sample = i;
            }
        }
    }
    Ok(SwapDemoReport {
        samples,
        max_data_distance_sq: max_dist,
        max_overlap,
        max_overlap_phase_distance: max_overlap_phase,
        max_overlap_sample,
    })
}

/// 2×2 identity.
pub fn gate_identity() -> DenseUnitary {
    DenseUnitary::identity(2)
}

/// Pauli X.
pub fn gate_x() -> DenseUnitary {
    let mut m = DMatrix::<Complex64>::zeros(2, 2);
    m[(0, 1)] = Complex64::new(1.0, 0.0);
    m[(1, 0)] = Complex64::new(1.0, 0.0);
    DenseUnitary::new(m).expect("X is unitary")
}

/// Hadamard.
pub fn gate_hadamard() -> DenseUnitary {
    let inv = 1.0 / 2.0_f64.sqrt();
    let m = DMatrix::from_row_slice(2, 2, &[
        Complex64::new(inv, 0.0), Complex64::new(inv, 0.0),
        Complex64::new(inv, 0.0), Complex64::new(-inv, 0.0),
    ]);
    DenseUnitary::new(m).expect("Hadamard is unitary")
}

/// diag(1, e^{iφ}).
pub fn gate_phase(phi: f64) -> DenseUnitary {
    let mut m = DMatrix::<Complex64>::zeros(2, 2);
    m[(0, 0)] = Complex64::new(1.0, 0.0);
    m[(1, 1)] = Complex64::from_polar(1.0, phi);
    DenseUnitary::new(m).expect("phase gate is unitary")
}

/// Real rotation Ry(θ) = [[cos θ/2, −sin θ/2], [sin θ/2, cos θ/2]].
pub fn gate_ry(theta: f64) -> DenseUnitary {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let m = DMatrix::from_row_slice(2, 2, &[
        Complex64::new(c, 0.0), Complex64::new(-s, 0.0),
        Complex64::new(s, 0.0), Complex64::new(c, 0.0),
    ]);
    DenseUnitary::new(m).expect("Ry is unitary")
}

/// The four-member single-qubit repertoire used by the demos: identity,
/// X, a quarter phase and Hadamard.
pub fn standard_repertoire() -> Vec<DenseUnitary> {
    vec![
        gate_identity(),
        gate_x(),
        gate_phase(std::f64::consts::FRAC_PI_4),
        gate_hadamard(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn apply_identity_gives_product_state() {
        let model = GateArrayModel::new(DenseUnitary::identity(4), 1, 1).unwrap();
        let data = DVector::from_vec(vec![Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0)]);
        let program = ProgramVector::basis(1, 1);
        let out = apply(&model, &data, &program).unwrap();
        let expected = data.kronecker(program.as_vector());
        assert!((out - expected).norm() < 1e-15);
    }

    #[test]
    fn controlled_x_flips_data_on_program_one() {
        let model = build_controlled_u_array(&[gate_identity(), gate_x()]).unwrap();
        let data = DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let out = apply(&model, &data, &ProgramVector::basis(1, 1)).unwrap();
        // Expect |1⟩ ⊗ |1⟩ at joint index 1·2 + 1 = 3.
        assert_abs_diff_eq!(out[3].re, 1.0, epsilon = 1e-12);
        let out0 = apply(&model, &data, &ProgramVector::basis(1, 0)).unwrap();
        assert_abs_diff_eq!(out0[0].re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn apply_preserves_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = crate::linalg::random_unitary(8, &mut rng);
        let model = GateArrayModel::new(g, 2, 1).unwrap();
        let data = random_state(4, &mut rng);
        let program = ProgramVector::new(random_state(2, &mut rng)).unwrap();
        let out = apply(&model, &data, &program).unwrap();
        assert_abs_diff_eq!(out.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn deterministic_check_accepts_basis_programs() {
        let model = build_controlled_u_array(&standard_repertoire()).unwrap();
        for (k, u) in standard_repertoire().iter().enumerate() {
            let report = check_deterministic_program(
                &model,
                u,
                &ProgramVector::basis(2, k),
                1e-9,
            )
            .unwrap();
            assert!(report.ok, "member {k} failed: {}", report.min_fidelity);
            assert_abs_diff_eq!(report.min_fidelity, 1.0, epsilon = 1e-12);
            let p_out = report.program_out.unwrap();
            let overlap = program_overlap(&p_out, &ProgramVector::basis(2, k));
            assert_abs_diff_eq!(overlap.norm(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn deterministic_check_rejects_superposed_program() {
        let model = build_controlled_u_array(&[gate_identity(), gate_x()]).unwrap();
        let inv = 1.0 / 2.0_f64.sqrt();
        let program = ProgramVector::new(DVector::from_vec(vec![
            Complex64::new(inv, 0.0),
            Complex64::new(inv, 0.0),
        ]))
        .unwrap();
        let report =
            check_deterministic_program(&model, &gate_identity(), &program, 1e-6).unwrap();
        assert!(!report.ok, "min fidelity {}", report.min_fidelity);
        // |0⟩ data entangles with the program: fidelity collapses to ~1/2
        // against any fixed product reference.
        assert!(report.min_fidelity < 0.75);
    }

    #[test]
    fn deterministic_check_identity_array_returns_program() {
        let model = GateArrayModel::new(DenseUnitary::identity(4), 1, 1).unwrap();
        let program = ProgramVector::new(DVector::from_vec(vec![
            Complex64::new(0.6, 0.0),
            Complex64::new(0.0, 0.8),
        ]))
        .unwrap();
        let report =
            check_deterministic_program(&model, &gate_identity(), &program, 1e-9).unwrap();
        assert!(report.ok);
        let p_out = report.program_out.unwrap();
        assert_abs_diff_eq!(
            program_overlap(&p_out, &program).norm(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn extracted_programs_for_distinct_targets_are_orthogonal() {
        let model = build_controlled_u_array(&standard_repertoire()).unwrap();
        let members = standard_repertoire();
        let mut extracted = Vec::new();
        for (k, u) in members.iter().enumerate() {
            let report =
                check_deterministic_program(&model, u, &ProgramVector::basis(2, k), 1e-9)
                    .unwrap();
            extracted.push(report.program_out.unwrap());
        }
        for i in 0..members.len() {
            for j in (i + 1)..members.len() {
                assert!(!phase_equivalent(&members[i], &members[j]));
                let ov = program_overlap(&extracted[i], &extracted[j]).norm();
                assert!(ov <= 1e-10, "({i},{j}) overlap {ov}");
            }
        }
    }

    #[test]
    fn phase_distance_ignores_global_phase() {
        let u = gate_hadamard();
        let mut m = u.matrix().clone();
        let phase = Complex64::from_polar(1.0, 1.234);
        for z in m.iter_mut() {
            *z *= phase;
        }
        let v = DenseUnitary::new(m).unwrap();
        assert!(phase_distance(&u, &v) < 1e-12);
        assert!(phase_equivalent(&u, &v));
        assert!(!phase_equivalent(&u, &gate_x()));
    }

    #[test]
    fn swap_array_reproduces_target_exactly() {
        let model = build_swap_array(1).unwrap();
        let u = gate_hadamard();
        let d = DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let p = ProgramVector::new(u.apply(&d)).unwrap();
        let out = apply(&model, &d, &p).unwrap();
        let data_out = project_data(&model, &out, &d);
        assert!((data_out - u.apply(&d)).norm() < 1e-14);
    }

    #[test]
    fn swap_demo_finds_nonorthogonal_programs() {
        let report = swap_demo(1, 100, 2024).unwrap();
        assert!(report.max_data_distance_sq <= 1e-12);
        assert!(
            report.max_overlap > 0.5,
            "max overlap {}",
            report.max_overlap
        );
        assert!(report.max_overlap_phase_distance > PHASE_EQUIV_TOL);
    }

    #[test]
    fn optimizer_recovers_known_optimum_on_controlled_array() {
        let model = build_controlled_u_array(&standard_repertoire()).unwrap();
        let data = DVector::from_vec(vec![
            Complex64::new(0.8, 0.0),
            Complex64::new(0.0, 0.6),
        ]);
        let result = optimize_program(
            &model,
            &gate_hadamard(),
            &data,
            1e-6,
            &OptimizeConfig::default(),
        )
        .unwrap();
        assert!(result.converged, "fidelity {}", result.fidelity);
        assert!(result.fidelity >= 1.0 - 1e-6);
        // Monotone best-so-far trace.
        for w in result.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }

    #[test]
    fn optimizer_is_deterministic_per_seed() {
        let model = build_swap_array(1).unwrap();
        let data = DVector::from_vec(vec![Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0)]);
        let cfg = OptimizeConfig {
            restarts: 3,
            max_iters: 120,
            seed: 9,
        };
        let a = optimize_program(&model, &gate_hadamard(), &data, 1e-6, &cfg).unwrap();
        let b = optimize_program(&model, &gate_hadamard(), &data, 1e-6, &cfg).unwrap();
        assert_eq!(a.fidelity, b.fidelity);
        assert_eq!(a.best.as_vector(), b.best.as_vector());
        assert!(a.converged);
    }

    #[test]
    fn parameter_count_matches_formulas() {
        assert_eq!(program_parameter_count(1).unwrap(), (3, 4, 12));
        assert_eq!(program_parameter_count(2).unwrap(), (7, 16, 112));
        assert!(program_parameter_count(0).is_err());
        assert!(program_parameter_count(21).is_err());
        // Largest guarded value stays in range.
        let (_, _, total) = program_parameter_count(20).unwrap();
        assert_eq!(total, (1u64 << 40) * ((1u64 << 21) - 1));
    }
}
