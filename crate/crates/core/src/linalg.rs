//! Dense linear algebra: validated unitaries, density matrices and the
//! spectral functionals (entropy, purity, trace distance) built on them.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Frobenius-norm unitarity tolerance used when none is given.
pub const DEFAULT_UNITARY_TOL: f64 = 1e-10;

/// ‖U†U − I‖_F for an arbitrary square matrix.
pub fn unitarity_error(u: &DMatrix<Complex64>) -> f64 {
    assert_eq!(u.nrows(), u.ncols(), "unitarity error needs a square matrix");
    let dim = u.nrows();
    let mut gram = u.adjoint() * u;
    for i in 0..dim {
        gram[(i, i)] -= Complex64::new(1.0, 0.0);
    }
    gram.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Checks ‖U†U − I‖_F ≤ tol and reports the error alongside the verdict.
pub fn check_global_unitarity(u: &DMatrix<Complex64>, tol: f64) -> (bool, f64) {
    let err = unitarity_error(u);
    (err <= tol, err)
}

/// A square matrix certified unitary at construction time.
#[derive(Debug, Clone)]
pub struct DenseUnitary {
    mat: DMatrix<Complex64>,
}

impl DenseUnitary {
    /// Validates ‖U†U − I‖_F ≤ [`DEFAULT_UNITARY_TOL`].
    pub fn new(mat: DMatrix<Complex64>) -> Result<Self> {
        Self::with_tol(mat, DEFAULT_UNITARY_TOL)
    }

    pub fn with_tol(mat: DMatrix<Complex64>, tol: f64) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::InvalidMatrix(format!(
                "expected a square matrix, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.nrows() == 0 {
            return Err(Error::InvalidMatrix("empty matrix".into()));
        }
        let err = unitarity_error(&mat);
        if err > tol {
            return Err(Error::InvalidMatrix(format!(
                "not unitary: ||U†U - I||_F = {err:.3e} > {tol:.3e}"
            )));
        }
        Ok(DenseUnitary { mat })
    }

    pub fn identity(dim: usize) -> Self {
        DenseUnitary {
            mat: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// Number of qubits if the dimension is a power of two.
    pub fn n_qubits(&self) -> Option<usize> {
        let d = self.dim();
        d.is_power_of_two().then(|| d.trailing_zeros() as usize)
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.mat
    }

    pub fn apply(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        assert_eq!(v.len(), self.dim(), "vector length mismatch");
        &self.mat * v
    }

    /// Residual unitarity error of the stored matrix.
    pub fn unitarity_error(&self) -> f64 {
        unitarity_error(&self.mat)
    }

    /// U·V (validated composition of certified unitaries).
    pub fn compose(&self, rhs: &DenseUnitary) -> Result<DenseUnitary> {
        if self.dim() != rhs.dim() {
            return Err(Error::InvalidMatrix(format!(
                "cannot compose {}x{} with {}x{}",
                self.dim(),
                self.dim(),
                rhs.dim(),
                rhs.dim()
            )));
        }
        DenseUnitary::new(&self.mat * &rhs.mat)
    }
}

/// A validated density matrix: Hermitian, unit trace, positive
/// semi-definite (all within small tolerances).
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    mat: DMatrix<Complex64>,
    /// Eigenvalues sorted descending; cached from validation.
    eigs: Vec<f64>,
}

impl DensityMatrix {
    pub fn new(mat: DMatrix<Complex64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(Error::InvalidMatrix(format!(
                "density matrix must be square and non-empty, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let herm_err: f64 = (&mat - mat.adjoint())
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt();
        if herm_err > 1e-9 {
            return Err(Error::InvalidMatrix(format!(
                "density matrix not Hermitian: ||ρ - ρ†||_F = {herm_err:.3e}"
            )));
        }
        let trace = mat.trace();
        if (trace.re - 1.0).abs() > 1e-9 || trace.im.abs() > 1e-9 {
            return Err(Error::InvalidMatrix(format!(
                "density matrix trace {} ≠ 1",
                trace
            )));
        }
        let eigs = hermitian_eigenvalues(&mat);
        if let Some(min) = eigs.last() {
            if *min < -1e-9 {
                return Err(Error::InvalidMatrix(format!(
                    "density matrix has negative eigenvalue {min:.3e}"
                )));
            }
        }
        Ok(DensityMatrix { mat, eigs })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.mat[(i, j)]
    }

    /// Eigenvalues sorted descending (real, clamped only by validation).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigs
    }
}

/// Real eigenvalues of a Hermitian matrix, sorted descending.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let se = m.clone().symmetric_eigen();
    let mut eigs: Vec<f64> = se.eigenvalues.iter().copied().collect();
    eigs.sort_by(|a, b| b.partial_cmp(a).expect("NaN eigenvalue"));
    eigs
}

/// Von Neumann entropy −Σ λ log₂ λ in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    let h: f64 = rho
        .eigenvalues()
        .iter()
        .filter(|l| **l > 1e-15)
        .map(|l| -l * l.log2())
        .sum();
    // Eigenvalues a hair above 1 would contribute ~-1e-16; clamp.
    h.max(0.0)
}

/// Purity Tr ρ² = Σ |ρ_ij|².
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.matrix().iter().map(|z| z.norm_sqr()).sum()
}

/// Trace distance ½‖A − B‖₁ = ½ Σ |λ_i(A − B)|.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::InvalidMatrix(format!(
            "trace distance dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let diff = a.matrix() - b.matrix();
    let sum: f64 = hermitian_eigenvalues(&diff).iter().map(|l| l.abs()).sum();
    Ok(0.5 * sum)
}

/// ⟨t|ρ|t⟩ — fidelity of a density matrix against a pure target vector.
pub fn fidelity_to_pure(rho: &DensityMatrix, target: &DVector<Complex64>) -> Result<f64> {
    if target.len() != rho.dim() {
        return Err(Error::InvalidMatrix(format!(
            "target length {} does not match density dimension {}",
            target.len(),
            rho.dim()
        )));
    }
    let v = rho.matrix() * target;
    Ok(target.dotc(&v).re.max(0.0))
}

/// Haar-ish random unitary: QR of a complex Gaussian matrix with the R
/// diagonal phases folded into Q. Deterministic given the generator.
pub fn random_unitary(dim: usize, rng: &mut impl Rng) -> DenseUnitary {
    assert!(dim >= 1, "random unitary needs dim >= 1");
    let g = DMatrix::<Complex64>::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    DenseUnitary::new(q).expect("QR factor should be unitary")
}

/// Random normalized complex vector (Gaussian direction).
pub fn random_state(dim: usize, rng: &mut impl Rng) -> DVector<Complex64> {
    assert!(dim >= 1, "random state needs dim >= 1");
    loop {
        let v = DVector::<Complex64>::from_fn(dim, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let n = v.norm();
        if n > 1e-9 {
            return v / Complex64::new(n, 0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn unitarity_error_flags_zeroed_row() {
        // Identity with one row zeroed: U†U = diag(0,1), error exactly 1.
        let mut m = DMatrix::<Complex64>::identity(2, 2);
        m[(0, 0)] = c(0.0, 0.0);
        let (ok, err) = check_global_unitarity(&m, 1e-10);
        assert!(!ok);
        assert!(err >= 1.0, "err = {err}");
    }

    #[test]
    fn dense_unitary_accepts_hadamard() {
        let inv = 1.0 / 2.0_f64.sqrt();
        let h = DMatrix::from_row_slice(2, 2, &[
            c(inv, 0.0), c(inv, 0.0),
            c(inv, 0.0), c(-inv, 0.0),
        ]);
        let u = DenseUnitary::new(h).unwrap();
        assert!(u.unitarity_error() < 1e-15);
        assert_eq!(u.n_qubits(), Some(1));
    }

    #[test]
    fn dense_unitary_rejects_scaled_identity() {
        let m = DMatrix::<Complex64>::identity(2, 2) * c(1.1, 0.0);
        assert!(DenseUnitary::new(m).is_err());
    }

    #[test]
    fn hermitian_eigenvalues_of_2x2() {
        // [[a, b], [b, a]] with a = 0.5, b = 0.25 → eigenvalues a ± b.
        let m = DMatrix::from_row_slice(2, 2, &[
            c(0.5, 0.0), c(0.25, 0.0),
            c(0.25, 0.0), c(0.5, 0.0),
        ]);
        let eigs = hermitian_eigenvalues(&m);
        assert_abs_diff_eq!(eigs[0], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(eigs[1], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn hermitian_eigenvalues_with_complex_off_diagonal() {
        // [[0.5, ib], [-ib, 0.5]] has the same spectrum a ± |b|.
        let m = DMatrix::from_row_slice(2, 2, &[
            c(0.5, 0.0), c(0.0, 0.25),
            c(0.0, -0.25), c(0.5, 0.0),
        ]);
        let eigs = hermitian_eigenvalues(&m);
        assert_abs_diff_eq!(eigs[0], 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(eigs[1], 0.25, epsilon = 1e-12);
    }

    #[test]
    fn entropy_and_purity_of_diag_mixture() {
        // diag(0.75, 0.25): entropy = H₂(0.25) = 0.8112781244591328 bits,
        // purity = 0.75² + 0.25² = 0.625.
        let m = DMatrix::from_row_slice(2, 2, &[
            c(0.75, 0.0), c(0.0, 0.0),
            c(0.0, 0.0), c(0.25, 0.0),
        ]);
        let rho = DensityMatrix::new(m).unwrap();
        assert_abs_diff_eq!(
            von_neumann_entropy(&rho),
            0.8112781244591328,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(purity(&rho), 0.625, epsilon = 1e-12);
    }

    #[test]
    fn entropy_extremes() {
        let pure = DensityMatrix::new(DMatrix::from_row_slice(2, 2, &[
            c(1.0, 0.0), c(0.0, 0.0),
            c(0.0, 0.0), c(0.0, 0.0),
        ]))
        .unwrap();
        assert_abs_diff_eq!(von_neumann_entropy(&pure), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(purity(&pure), 1.0, epsilon = 1e-12);

        let mixed = DensityMatrix::new(DMatrix::from_row_slice(2, 2, &[
            c(0.5, 0.0), c(0.0, 0.0),
            c(0.0, 0.0), c(0.5, 0.0),
        ]))
        .unwrap();
        assert_abs_diff_eq!(von_neumann_entropy(&mixed), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(purity(&mixed), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn density_matrix_validation_rejects_bad_inputs() {
        // Non-Hermitian.
        let m = DMatrix::from_row_slice(2, 2, &[
            c(0.5, 0.0), c(0.4, 0.0),
            c(0.0, 0.0), c(0.5, 0.0),
        ]);
        assert!(DensityMatrix::new(m).is_err());
        // Wrong trace.
        let m = DMatrix::from_row_slice(2, 2, &[
            c(0.9, 0.0), c(0.0, 0.0),
            c(0.0, 0.0), c(0.5, 0.0),
        ]);
        assert!(DensityMatrix::new(m).is_err());
        // Hermitian, trace one, but indefinite.
        let m = DMatrix::from_row_slice(2, 2, &[
            c(1.2, 0.0), c(0.0, 0.0),
            c(0.0, 0.0), c(-0.2, 0.0),
        ]);
        assert!(DensityMatrix::new(m).is_err());
    }

    #[test]
    fn trace_distance_between_basis_projectors_is_one() {
        let p0 = DensityMatrix::new(DMatrix::from_row_slice(2, 2, &[
            c(1.0, 0.0), c(0.0, 0.0),
            c(0.0, 0.0), c(0.0, 0.0),
        ]))
        .unwrap();
        let p1 = DensityMatrix::new(DMatrix::from_row_slice(2, 2, &[
            c(0.0, 0.0), c(0.0, 0.0),
            c(0.0, 0.0), c(1.0, 0.0),
        ]))
        .unwrap();
        assert_abs_diff_eq!(trace_distance(&p0, &p1).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(trace_distance(&p0, &p0).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn random_unitary_is_unitary_and_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = random_unitary(8, &mut rng);
        assert!(u.unitarity_error() < 1e-12);
        let mut rng2 = ChaCha8Rng::seed_from_u64(11);
        let v = random_unitary(8, &mut rng2);
        assert_eq!(u.matrix(), v.matrix(), "same seed must reproduce");
    }

    #[test]
    fn fidelity_to_pure_matches_projector_overlap() {
        let half = c(0.5, 0.0);
        let rho = DensityMatrix::new(DMatrix::from_row_slice(2, 2, &[
            half, half,
            half, half,
        ]))
        .unwrap();
        let plus = DVector::from_vec(vec![c(1.0 / 2.0_f64.sqrt(), 0.0); 2]);
        assert_abs_diff_eq!(fidelity_to_pure(&rho, &plus).unwrap(), 1.0, epsilon = 1e-12);
        let zero = DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        assert_abs_diff_eq!(fidelity_to_pure(&rho, &zero).unwrap(), 0.5, epsilon = 1e-12);
    }
}
