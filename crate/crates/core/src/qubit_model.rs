//! The `n`-qubit family `ρ^u_n = (ρ^{u/√n})^{⊗n}` in block form.
//!
//! Permutation invariance splits `ρ^u_n` into SU(2) irreps labelled by the
//! total spin `j`; each block carries a probability `p_n(j)` and a
//! `(2j+1)`-dimensional density matrix, with the symmetric-group factor
//! maximally mixed. Nothing here ever touches the `2^n`-dimensional space.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::irreps::{rotate_top_basis, HalfInteger, LocalParam};
use crate::numerics::{HermitianMatrix, PureMixture};

pub const DEFAULT_EPSILON: f64 = 0.1;

/// Populations below this are dropped from low-rank block representations.
pub const POPULATION_CUTOFF: f64 = 1e-18;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: u32,
    /// Larger eigenvalue of the single-qubit state `diag(μ, 1-μ)`.
    pub mu: f64,
    /// Exponent of the concentration window `n^{1/2+ε}`.
    pub epsilon: f64,
}

impl ModelParams {
    pub fn new(n: u32, mu: f64, epsilon: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("number of qubits must be positive"));
        }
        if !(mu > 0.5 && mu <= 1.0) {
            return Err(Error::domain(format!("mu must lie in (1/2, 1], got {mu}")));
        }
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::domain(format!("epsilon must lie in (0, 1/2), got {epsilon}")));
        }
        Ok(Self { n, mu, epsilon })
    }

    pub fn with_n(self, n: u32) -> Result<Self> {
        Self::new(n, self.mu, self.epsilon)
    }

    /// Ratio `p = (1-μ)/μ` of the two single-qubit eigenvalues.
    pub fn p(&self) -> f64 {
        (1.0 - self.mu) / self.mu
    }

    pub fn is_pure(&self) -> bool {
        self.mu == 1.0
    }

    /// Centre `j_n = n(μ - 1/2)` of the spin distribution.
    pub fn j_center(&self) -> f64 {
        self.n as f64 * (self.mu - 0.5)
    }

    pub fn max_spin(&self) -> HalfInteger {
        HalfInteger::from_twice(self.n)
    }

    /// All spins `j ∈ {n mod 2 / 2, …, n/2}` in ascending order.
    pub fn spins(&self) -> impl Iterator<Item = HalfInteger> + Clone {
        spins(self.n)
    }

    pub fn check_spin(&self, j: HalfInteger) -> Result<()> {
        check_spin(self.n, j)
    }
}

pub fn spins(n: u32) -> impl Iterator<Item = HalfInteger> + Clone {
    (n % 2..=n).step_by(2).map(HalfInteger::from_twice)
}

fn check_spin(n: u32, j: HalfInteger) -> Result<()> {
    if j.twice() > n {
        return Err(Error::domain(format!("spin {j} exceeds n/2 = {}", n as f64 / 2.0)));
    }
    if j.twice() % 2 != n % 2 {
        return Err(Error::domain(format!("spin {j} has the wrong parity for n = {n}")));
    }
    Ok(())
}

/// Spin of the right parity nearest to `target`, clipped to `[0, n/2]`.
pub fn nearest_spin(n: u32, target: f64) -> HalfInteger {
    let lo = (n % 2) as f64;
    let two_target = (2.0 * target).clamp(lo, n as f64);
    // candidate values of 2j share the parity of n
    let k = ((two_target - lo) / 2.0).round();
    HalfInteger::from_twice((lo + 2.0 * k) as u32)
}

/// Dimension `n_j` of the symmetric-group irrep paired with spin `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Multiplicity {
    pub ln: f64,
    /// Exact integer value when it fits comfortably (`n ≤ 120`).
    pub exact: Option<u128>,
}

const EXACT_MULTIPLICITY_MAX_N: u32 = 120;

fn binomial_u128(n: u32, k: u32) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at every step: acc·(n-i) is divisible by (i+1)
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// `n_j = C(n, n/2 - j) - C(n, n/2 - j - 1)`, the second term zero when its
/// lower index is negative.
pub fn multiplicity(n: u32, j: HalfInteger) -> Result<Multiplicity> {
    check_spin(n, j)?;
    let k = (n - j.twice()) / 2;
    // C(n,k) - C(n,k-1) = C(n,k)·(2j+1)/(n/2+j+1)
    let ln = ln_binomial(n as u64, k as u64) + ((j.twice() + 1) as f64).ln()
        - ((n as f64 + j.twice() as f64) / 2.0 + 1.0).ln();
    let exact = (n <= EXACT_MULTIPLICITY_MAX_N).then(|| {
        let second = if k == 0 { 0 } else { binomial_u128(n, k - 1) };
        binomial_u128(n, k) - second
    });
    Ok(Multiplicity { ln, exact })
}

/// `p_n(j) = n_j/(2μ-1) (1-μ)^{n/2-j} μ^{n/2+j+1} (1 - p^{2j+1})`, evaluated
/// in log space. The pure case `μ = 1` puts all weight on `j = n/2`.
pub fn block_weight(params: &ModelParams, j: HalfInteger) -> Result<f64> {
    params.check_spin(j)?;
    if params.is_pure() {
        return Ok(if j == params.max_spin() { 1.0 } else { 0.0 });
    }
    Ok(ln_block_weight(params, j)?.exp())
}

fn ln_block_weight(params: &ModelParams, j: HalfInteger) -> Result<f64> {
    let mu = params.mu;
    let n_half = params.n as f64 / 2.0;
    let jv = j.value();
    let ln_p = params.p().ln();
    let ln_tail = (-((2.0 * jv + 1.0) * ln_p).exp_m1()).ln();
    Ok(multiplicity(params.n, j)?.ln - (2.0 * mu - 1.0).ln()
        + (n_half - jv) * (1.0 - mu).ln()
        + (n_half + jv + 1.0) * mu.ln()
        + ln_tail)
}

/// Binomial law `B_{n,μ}(k) = C(n,k) μ^k (1-μ)^{n-k}`.
pub fn binomial_pmf(n: u32, mu: f64, k: u32) -> f64 {
    if mu == 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    (ln_binomial(n as u64, k as u64) + k as f64 * mu.ln() + (n - k) as f64 * (1.0 - mu).ln()).exp()
}

/// Correction factor `K(j,n,μ)` with `p_n(j) = B_{n,μ}(n/2+j)·K(j,n,μ)`:
///
/// `K = (1 - p^{2j+1}) · (n + (2(j-j_n)+1)/(2μ-1)) / (n + (j-j_n+1)/μ)`.
pub fn binomial_factor(params: &ModelParams, j: HalfInteger) -> f64 {
    let n = params.n as f64;
    let mu = params.mu;
    let dj = j.value() - params.j_center();
    let tail = if params.is_pure() {
        1.0
    } else {
        -((j.twice() as f64 + 1.0) * params.p().ln()).exp_m1()
    };
    tail * (n + (2.0 * dj + 1.0) / (2.0 * mu - 1.0)) / (n + (dj + 1.0) / mu)
}

/// Spins in `[j_n - n^{1/2+ε}, j_n + n^{1/2+ε}]`, ascending.
pub fn concentration_set(params: &ModelParams) -> Vec<HalfInteger> {
    let radius = (params.n as f64).powf(0.5 + params.epsilon);
    let lo2 = 2.0 * (params.j_center() - radius);
    let hi2 = 2.0 * (params.j_center() + radius);
    let set: Vec<HalfInteger> = params
        .spins()
        .filter(|j| {
            let t = j.twice() as f64;
            t >= lo2 && t <= hi2
        })
        .collect();
    if set.is_empty() {
        vec![nearest_spin(params.n, params.j_center())]
    } else {
        set
    }
}

/// Total weight `p_n(J_{n,ε})` of the concentration set.
pub fn concentration_weight(params: &ModelParams) -> Result<f64> {
    concentration_set(params)
        .into_iter()
        .map(|j| block_weight(params, j))
        .sum()
}

/// Diagonal of `ρ⁰_{j,n} = c_j(p) Σ_m p^{j-m} |j,m⟩⟨j,m|`, index `i` holding `c_j(p) p^i`.
pub fn block_populations(params: &ModelParams, j: HalfInteger) -> Vec<f64> {
    let d = j.dim();
    if params.is_pure() {
        let mut v = vec![0.0; d];
        v[0] = 1.0;
        return v;
    }
    let p = params.p();
    let ln_p = p.ln();
    // c_j(p) = (1-p)/(1-p^{2j+1})
    let c = (1.0 - p) / -((d as f64) * ln_p).exp_m1();
    (0..d).map(|i| c * (i as f64 * ln_p).exp()).collect()
}

pub fn block_state_zero(params: &ModelParams, j: HalfInteger) -> Result<HermitianMatrix> {
    params.check_spin(j)?;
    Ok(HermitianMatrix::from_real_diagonal(&block_populations(params, j)))
}

/// Low-rank form of `ρ^u_{j,n} = U_j(u/√n) ρ⁰_{j,n} U_j(u/√n)†`: the
/// populations `c_j p^i` above [`POPULATION_CUTOFF`] paired with the rotated
/// basis vectors `U_j(u/√n)|j, j-i⟩`.
#[derive(Debug, Clone)]
pub struct RotatedBlock {
    pub j: HalfInteger,
    pub state: PureMixture,
    /// Population mass dropped by the cutoff.
    pub dropped: f64,
}

impl RotatedBlock {
    pub fn new(params: &ModelParams, j: HalfInteger, u: LocalParam) -> Result<Self> {
        params.check_spin(j)?;
        let pops = block_populations(params, j);
        let w = u.scaled(1.0 / (params.n as f64).sqrt());
        // populations decrease with i, so the kept ones form a prefix
        let kept = pops.iter().take_while(|&&p| p >= POPULATION_CUTOFF).count();
        let dropped = pops[kept..].iter().sum();
        let mut state = PureMixture::new();
        for (pop, v) in pops.iter().zip(rotate_top_basis(j, w, kept)) {
            state.push(*pop, v);
        }
        Ok(Self { j, state, dropped })
    }

    pub fn to_dense(&self) -> HermitianMatrix {
        self.state.to_dense(self.j.dim())
    }
}

pub fn block_state(params: &ModelParams, j: HalfInteger, u: LocalParam) -> Result<HermitianMatrix> {
    Ok(RotatedBlock::new(params, j, u)?.to_dense())
}

/// One summand `p_n(j) ρ^u_{j,n}` of the block decomposition.
#[derive(Debug, Clone)]
pub struct BlockState {
    pub j: HalfInteger,
    pub weight: f64,
    pub matrix: HermitianMatrix,
}

/// Block-diagonal state over all spins of the right parity.
///
/// `u` is `None` for states that are not members of the family, such as the
/// output of the inverse channel.
#[derive(Debug, Clone)]
pub struct EnsembleState {
    pub params: ModelParams,
    pub u: Option<LocalParam>,
    pub blocks: Vec<BlockState>,
}

impl EnsembleState {
    pub fn total_weight(&self) -> f64 {
        self.blocks.iter().map(|b| b.weight).sum()
    }

    pub fn block(&self, j: HalfInteger) -> Option<&BlockState> {
        self.blocks.iter().find(|b| b.j == j)
    }

    /// `Σ_j p_n(j) Tr ρ_{j,n}`.
    pub fn trace(&self) -> f64 {
        self.blocks.iter().map(|b| b.weight * b.matrix.trace()).sum()
    }
}

pub fn ensemble(params: &ModelParams, u: LocalParam) -> Result<EnsembleState> {
    let spins: Vec<HalfInteger> = params.spins().collect();
    let blocks = spins
        .par_iter()
        .map(|&j| {
            Ok(BlockState {
                j,
                weight: block_weight(params, j)?,
                matrix: block_state(params, j, u)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleState {
        params: *params,
        u: Some(u),
        blocks,
    })
}
