//! Dense complex linear algebra shared by the rest of the crate.
//!
//! Everything here works on `nalgebra` matrices of [`C64`]. Hermitian inputs
//! are wrapped in [`HermitianMatrix`], which is validated once at construction
//! so the spectral routines downstream can stay infallible.

mod lowrank;
mod quadrature;
mod tridiagonal;

pub use lowrank::{low_rank_eigenvalues, trace_norm_low_rank, PureMixture};
pub use quadrature::{gauss_legendre, pairwise_sum, GridPoint, PolarGrid};
pub use tridiagonal::HermitianTridiagonal;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;
pub type ComplexVector = DVector<C64>;

/// Relative tolerance for the Hermiticity check.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues above `-PSD_CLAMP` are treated as numerical zero.
pub const PSD_CLAMP: f64 = 1e-10;
/// Eigenvalues below `-PSD_REJECT` make a state invalid.
pub const PSD_REJECT: f64 = 1e-8;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// A square matrix equal to its conjugate transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    /// Validates Hermiticity within [`HERMITIAN_TOL`] relative to the largest
    /// entry magnitude, then stores the exactly symmetrized matrix.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::validation(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::validation("empty matrix"));
        }
        let (worst, at) = hermiticity_defect(&m);
        let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if worst > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::validation(format!(
                "matrix is not Hermitian: |a[{},{}] - conj(a[{},{}])| = {:.3e} (max entry {:.3e})",
                at.0, at.1, at.1, at.0, worst, scale
            )));
        }
        Ok(Self::symmetrized(m))
    }

    /// Averages `m` with its adjoint. Used internally where Hermiticity holds
    /// by construction and only rounding noise needs removing.
    pub(crate) fn symmetrized(m: ComplexMatrix) -> Self {
        let adj = m.adjoint();
        HermitianMatrix((m + adj).scale(0.5))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        HermitianMatrix(ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j {
                c64(diag[i], 0.0)
            } else {
                C64::default()
            }
        }))
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianMatrix(ComplexMatrix::zeros(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn sub(&self, other: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix(&self.0 - &other.0)
    }

    /// `U · self · U†`.
    pub fn conjugate_by(&self, u: &ComplexMatrix) -> HermitianMatrix {
        HermitianMatrix::symmetrized(u * &self.0 * u.adjoint())
    }
}

fn hermiticity_defect(m: &ComplexMatrix) -> (f64, (usize, usize)) {
    let n = m.nrows();
    let mut worst = 0.0;
    let mut at = (0, 0);
    for i in 0..n {
        for j in i..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > worst {
                worst = d;
                at = (i, j);
            }
        }
    }
    (worst, at)
}

/// Eigenvalues in ascending order with matching eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl EigenSystem {
    /// `V · f(Λ) · V†` for a complex-valued spectral function.
    pub fn apply(&self, f: impl Fn(f64) -> C64) -> ComplexMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let fk = f(lambda);
            for z in scaled.column_mut(k).iter_mut() {
                *z *= fk;
            }
        }
        scaled * v.adjoint()
    }
}

/// Entries below this fraction of the largest one are zeroed before an
/// eigensolve. Values around 1e-160 underflow when squared inside the
/// Householder reduction and turn the whole spectrum into NaN; dropping
/// them moves eigenvalues by at most `dim · 1e-30 · max|a_ij|`.
const FLUSH_RELATIVE: f64 = 1e-30;

fn flushed(m: &ComplexMatrix) -> ComplexMatrix {
    let max = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let thr = max * FLUSH_RELATIVE;
    m.map(|z| if z.norm() < thr { C64::default() } else { z })
}

pub fn hermitian_eig(h: &HermitianMatrix) -> EigenSystem {
    let eig = flushed(&h.0).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let n = h.dim();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |i, k| eig.eigenvectors[(i, order[k])]);
    EigenSystem {
        eigenvalues,
        eigenvectors,
    }
}

/// Ascending eigenvalues only; cheaper than [`hermitian_eig`].
pub fn hermitian_eigenvalues(h: &HermitianMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = flushed(&h.0).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `exp(i·h)` through the spectral decomposition, unitary to eigensolver precision.
pub fn unitary_exp(h: &HermitianMatrix) -> ComplexMatrix {
    hermitian_eig(h).apply(|lambda| C64::from_polar(1.0, lambda))
}

/// Sum of singular values. Hermitian inputs take the eigenvalue path.
pub fn trace_norm(a: &ComplexMatrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::validation(format!(
            "trace norm needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    match HermitianMatrix::new(a.clone()) {
        Ok(h) => Ok(trace_norm_hermitian(&h)),
        Err(_) => Ok(flushed(a).singular_values().iter().sum()),
    }
}

pub fn trace_norm_hermitian(h: &HermitianMatrix) -> f64 {
    hermitian_eigenvalues(h).iter().map(|l| l.abs()).sum()
}

/// Eigen-decomposition of a density matrix with small negative eigenvalues
/// clamped to zero.
fn psd_eig(rho: &HermitianMatrix, name: &str) -> Result<EigenSystem> {
    let mut eig = hermitian_eig(rho);
    if let Some(&min) = eig.eigenvalues.first() {
        if min < -PSD_REJECT {
            return Err(Error::validation(format!(
                "{name} is not positive semidefinite: eigenvalue {min:.3e}"
            )));
        }
    }
    for l in eig.eigenvalues.iter_mut() {
        if *l < 0.0 {
            *l = 0.0;
        }
    }
    Ok(eig)
}

/// Uhlmann fidelity `Tr √(√ρ σ √ρ)`, clamped to `[0, 1]`.
pub fn fidelity(rho: &HermitianMatrix, sigma: &HermitianMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::validation(format!(
            "fidelity of states with dimensions {} and {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    let rho_eig = psd_eig(rho, "rho")?;
    psd_eig(sigma, "sigma")?;
    let sqrt_rho = rho_eig.apply(|l| c64(l.sqrt(), 0.0));
    let inner = HermitianMatrix::symmetrized(&sqrt_rho * sigma.as_matrix() * &sqrt_rho);
    let f: f64 = hermitian_eigenvalues(&inner)
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .sum();
    Ok(f.clamp(0.0, 1.0))
}

/// Projector `|v⟩⟨v|` as a dense matrix.
pub fn outer(v: &ComplexVector) -> ComplexMatrix {
    v * v.adjoint()
}
