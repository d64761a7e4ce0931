use super::{c64, ComplexVector, C64};

/// Hermitian tridiagonal operator, stored as its real diagonal and complex
/// subdiagonal (`sub[k] = H[k+1, k]`).
///
/// The SU(2) generators in the x–y plane and the oscillator displacement
/// generators are both of this form, so applying their exponentials to a few
/// vectors costs `O(dim)` per Taylor term instead of a full eigensolve.
#[derive(Debug, Clone)]
pub struct HermitianTridiagonal {
    diag: Vec<f64>,
    sub: Vec<C64>,
}

const STEP_NORM: f64 = 0.5;
const MAX_TERMS: usize = 40;

impl HermitianTridiagonal {
    pub fn new(diag: Vec<f64>, sub: Vec<C64>) -> Self {
        assert_eq!(sub.len() + 1, diag.len().max(1), "subdiagonal length must be dim - 1");
        Self { diag, sub }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Restriction to the first `k` basis vectors.
    pub fn leading(&self, k: usize) -> Self {
        let k = k.min(self.dim());
        Self {
            diag: self.diag[..k].to_vec(),
            sub: self.sub[..k.saturating_sub(1)].to_vec(),
        }
    }

    /// Gershgorin bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|k| {
                let mut r = self.diag[k].abs();
                if k > 0 {
                    r += self.sub[k - 1].norm();
                }
                if k + 1 < n {
                    r += self.sub[k].norm();
                }
                r
            })
            .fold(0.0, f64::max)
    }

    fn matvec_into(&self, x: &[C64], out: &mut [C64]) {
        let n = self.dim();
        for k in 0..n {
            let mut acc = x[k] * self.diag[k];
            if k > 0 {
                acc += self.sub[k - 1] * x[k - 1];
            }
            if k + 1 < n {
                acc += self.sub[k].conj() * x[k + 1];
            }
            out[k] = acc;
        }
    }

    pub fn to_dense(&self) -> super::ComplexMatrix {
        let n = self.dim();
        super::ComplexMatrix::from_fn(n, n, |i, j| {
            if i == j {
                c64(self.diag[i], 0.0)
            } else if i == j + 1 {
                self.sub[j]
            } else if j == i + 1 {
                self.sub[i].conj()
            } else {
                C64::default()
            }
        })
    }

    /// `exp(i·t·H)·v`, by Taylor series on sub-steps of norm at most 0.5.
    pub fn exp_i_apply(&self, t: f64, v: &ComplexVector) -> ComplexVector {
        assert_eq!(v.len(), self.dim());
        let n = self.dim();
        let total = t.abs() * self.norm_bound();
        if total == 0.0 || n == 0 {
            return v.clone();
        }
        let steps = (total / STEP_NORM).ceil().max(1.0) as usize;
        let tau = t / steps as f64;
        let mut acc: Vec<C64> = v.iter().copied().collect();
        let mut term = vec![C64::default(); n];
        let mut next = vec![C64::default(); n];
        for _ in 0..steps {
            term.copy_from_slice(&acc);
            let scale = acc.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            for m in 1..=MAX_TERMS {
                self.matvec_into(&term, &mut next);
                let factor = c64(0.0, tau / m as f64);
                let mut size = 0.0;
                for k in 0..n {
                    term[k] = next[k] * factor;
                    acc[k] += term[k];
                    size += term[k].norm_sqr();
                }
                if size.sqrt() <= 1e-18 * scale {
                    break;
                }
            }
        }
        ComplexVector::from_vec(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{unitary_exp, HermitianMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn taylor_path_matches_eigendecomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 30;
        let diag: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let sub: Vec<C64> = (0..n - 1).map(|_| c64(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0))).collect();
        let tri = HermitianTridiagonal::new(diag, sub);
        let t = 1.7;
        let dense = HermitianMatrix::new(tri.to_dense().scale(t)).unwrap();
        let u = unitary_exp(&dense);
        for col in [0, 5, 29] {
            let mut e = ComplexVector::zeros(n);
            e[col] = c64(1.0, 0.0);
            let got = tri.exp_i_apply(t, &e);
            let want = u.column(col).into_owned();
            assert!((got - want).norm() < 1e-11);
        }
    }

    #[test]
    fn zero_time_is_identity() {
        let tri = HermitianTridiagonal::new(vec![1.0, 2.0], vec![c64(0.5, 0.5)]);
        let v = ComplexVector::from_vec(vec![c64(0.3, 0.1), c64(-0.2, 0.9)]);
        assert_eq!(tri.exp_i_apply(0.0, &v), v);
    }
}
