use super::{hermitian_eigenvalues, ComplexMatrix, ComplexVector, HermitianMatrix, C64};

/// A state stored as `Σ_k w_k |v_k⟩⟨v_k|`.
///
/// Thermal-type spin blocks and displaced thermal states have geometrically
/// decaying populations, so a handful of rotated basis vectors represents
/// them to machine precision. Vectors may have different lengths; shorter
/// ones are implicitly zero-padded.
#[derive(Debug, Clone, Default)]
pub struct PureMixture {
    pub weights: Vec<f64>,
    pub vectors: Vec<ComplexVector>,
}

impl PureMixture {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, weight: f64, vector: ComplexVector) {
        self.weights.push(weight);
        self.vectors.push(vector);
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn max_len(&self) -> usize {
        self.vectors.iter().map(|v| v.len()).max().unwrap_or(0)
    }

    pub fn trace(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.vectors)
            .map(|(w, v)| w * v.norm_squared())
            .sum()
    }

    /// `⟨x| ρ |x⟩`, using only the overlapping coordinates.
    pub fn expectation(&self, x: &[C64]) -> f64 {
        self.weights
            .iter()
            .zip(&self.vectors)
            .map(|(w, v)| {
                let n = v.len().min(x.len());
                let mut amp = C64::default();
                for k in 0..n {
                    amp += v[k].conj() * x[k];
                }
                w * amp.norm_sqr()
            })
            .sum()
    }

    /// Accumulates `scale · ρ` into the top-left corner of `out`, cropping
    /// vectors longer than `out`.
    pub fn add_to(&self, out: &mut ComplexMatrix, scale: f64) {
        let dim = out.nrows();
        for (w, v) in self.weights.iter().zip(&self.vectors) {
            let n = v.len().min(dim);
            let ws = w * scale;
            for c in 0..n {
                let vc = v[c].conj() * ws;
                if vc == C64::default() {
                    continue;
                }
                for r in 0..n {
                    out[(r, c)] += v[r] * vc;
                }
            }
        }
    }

    pub fn to_dense(&self, dim: usize) -> HermitianMatrix {
        let mut m = ComplexMatrix::zeros(dim, dim);
        self.add_to(&mut m, 1.0);
        HermitianMatrix::symmetrized(m)
    }
}

/// Nonzero spectrum (ascending, padded with zeros up to the rank) of
/// `Σ_k w_k |v_k⟩⟨v_k|` with signed weights.
///
/// With `X = QR`, the operator equals `Q (R W R†) Q†`, so its nonzero
/// spectrum is that of the small matrix `R W R†`.
pub fn low_rank_eigenvalues(weights: &[f64], vectors: &[ComplexVector]) -> Vec<f64> {
    assert_eq!(weights.len(), vectors.len());
    let dim = vectors.iter().map(|v| v.len()).max().unwrap_or(0);
    let rank = vectors.len();
    if rank == 0 || dim == 0 {
        return Vec::new();
    }
    if rank >= dim {
        let mut m = ComplexMatrix::zeros(dim, dim);
        for (w, v) in weights.iter().zip(vectors) {
            let mut mix = PureMixture::new();
            mix.push(*w, v.clone());
            mix.add_to(&mut m, 1.0);
        }
        return hermitian_eigenvalues(&HermitianMatrix::symmetrized(m));
    }
    let x = ComplexMatrix::from_fn(dim, rank, |r, c| {
        let v = &vectors[c];
        if r < v.len() {
            v[r]
        } else {
            C64::default()
        }
    });
    let r = x.qr().r();
    let mut rw = r.clone();
    for (c, w) in weights.iter().enumerate() {
        for z in rw.column_mut(c).iter_mut() {
            *z *= *w;
        }
    }
    hermitian_eigenvalues(&HermitianMatrix::symmetrized(rw * r.adjoint()))
}

/// Trace norm of `Σ_k w_k |v_k⟩⟨v_k|` with signed weights.
pub fn trace_norm_low_rank(weights: &[f64], vectors: &[ComplexVector]) -> f64 {
    low_rank_eigenvalues(weights, vectors).iter().map(|l| l.abs()).sum()
}
