//! Channels between the block-decomposed qubit family and the oscillator.
//!
//! `T_n` embeds each spin block into the Fock space through the index map
//! `|j, m⟩ ↦ |j - m⟩`; `S_n` compresses a Fock state onto each block and
//! sends whatever falls outside to `|j, j⟩`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irreps::{basis_vector, rotate_vector, spin_coherent_coords, HalfInteger, LocalParam};
use crate::numerics::{
    c64, trace_norm_hermitian, trace_norm_low_rank, ComplexMatrix, ComplexVector, HermitianMatrix, PureMixture,
};
use crate::oscillator::{coherent_vector, truncation_policy, DisplacedThermal, FockOperator, FockTruncation};
use crate::qubit_model::{
    block_weight, concentration_set, nearest_spin, BlockState, EnsembleState, ModelParams, RotatedBlock,
};

/// Blocks lighter than this are left out of sweeps; their weight is added to
/// the reported error bound.
pub const SWEEP_WEIGHT_CUTOFF: f64 = 1e-18;

/// The isometry `V_j` from spin `j` into an `N`-level oscillator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingMap {
    pub j: HalfInteger,
    pub trunc: FockTruncation,
}

impl EmbeddingMap {
    pub fn new(j: HalfInteger, trunc: FockTruncation) -> Result<Self> {
        if trunc.dim < j.dim() {
            return Err(Error::truncation(
                format!("spin {j} does not fit into {} Fock levels", trunc.dim),
                j.dim(),
            ));
        }
        Ok(Self { j, trunc })
    }

    /// `V_j† X V_j`, the leading `(2j+1)`-block of `X`.
    pub fn project(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let d = self.j.dim();
        x.view((0, 0), (d, d)).into_owned()
    }
}

pub fn embed_block(rho_j: &HermitianMatrix, emb: EmbeddingMap) -> Result<FockOperator> {
    let d = emb.j.dim();
    if rho_j.dim() != d {
        return Err(Error::validation(format!(
            "block matrix has dimension {}, spin {} needs {d}",
            rho_j.dim(),
            emb.j
        )));
    }
    let n = emb.trunc.dim;
    let mut m = ComplexMatrix::zeros(n, n);
    m.view_mut((0, 0), (d, d)).copy_from(rho_j.as_matrix());
    Ok(FockOperator { trunc: emb.trunc, matrix: m })
}

/// Which spin blocks the forward channel keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BlockSelection {
    #[default]
    All,
    /// Only the concentration set `J_{n,ε}`.
    Concentrated,
}

#[derive(Debug, Clone)]
pub struct ForwardImage {
    pub state: FockOperator,
    /// Total block weight left out by the selection.
    pub excluded_weight: f64,
}

fn selected_spins(params: &ModelParams, selection: BlockSelection) -> Vec<HalfInteger> {
    match selection {
        BlockSelection::All => params.spins().collect(),
        BlockSelection::Concentrated => concentration_set(params),
    }
}

/// `T_n(ρ) = Σ_j p_n(j) V_j ρ_j V_j†`.
pub fn forward_channel(
    ens: &EnsembleState,
    trunc: FockTruncation,
    selection: BlockSelection,
) -> Result<ForwardImage> {
    let keep = selected_spins(&ens.params, selection);
    if let Some(&top) = keep.iter().max() {
        EmbeddingMap::new(top, trunc)?;
    }
    let n = trunc.dim;
    let mut m = ComplexMatrix::zeros(n, n);
    let mut excluded = 0.0;
    for b in &ens.blocks {
        if !keep.contains(&b.j) {
            excluded += b.weight;
            continue;
        }
        let d = b.j.dim();
        let mut view = m.view_mut((0, 0), (d, d));
        view += b.matrix.as_matrix().scale(b.weight);
    }
    Ok(ForwardImage {
        state: FockOperator { trunc, matrix: m },
        excluded_weight: excluded,
    })
}

/// `S_n^j(φ) = V_j† P_j φ P_j V_j + Tr((1-P_j)φ)·|j,j⟩⟨j,j|`.
pub fn inverse_channel_block(phi: &FockOperator, emb: EmbeddingMap) -> HermitianMatrix {
    let mut block = emb.project(&phi.matrix);
    let inside: f64 = block.diagonal().iter().map(|z| z.re).sum();
    let total: f64 = phi.matrix.diagonal().iter().map(|z| z.re).sum();
    block[(0, 0)] += c64(total - inside, 0.0);
    HermitianMatrix::symmetrized(block)
}

/// `S_n(φ) = ⊕_j p_n(j) S_n^j(φ)`.
pub fn inverse_channel(phi: &FockOperator, params: &ModelParams) -> Result<EnsembleState> {
    let spins: Vec<HalfInteger> = params.spins().collect();
    let blocks = spins
        .par_iter()
        .map(|&j| {
            let emb = EmbeddingMap::new(j, phi.trunc)?;
            Ok(BlockState {
                j,
                weight: block_weight(params, j)?,
                matrix: inverse_channel_block(phi, emb),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleState {
        params: *params,
        u: None,
        blocks,
    })
}

/// Low-rank `S_n^j(φ)` for a state of known total trace given as a mixture.
fn inverse_block_mixture(phi: &PureMixture, total_trace: f64, j: HalfInteger) -> PureMixture {
    let d = j.dim();
    let mut out = PureMixture::new();
    let mut inside = 0.0;
    for (w, v) in phi.weights.iter().zip(&phi.vectors) {
        let cropped = v.rows(0, d.min(v.len())).into_owned();
        inside += w * cropped.norm_squared();
        out.push(*w, cropped);
    }
    out.push((total_trace - inside).max(0.0), basis_vector(j, 0));
    out
}

fn mixture_difference_norm(a: &PureMixture, b: &PureMixture) -> f64 {
    let weights: Vec<f64> = a.weights.iter().copied().chain(b.weights.iter().map(|w| -w)).collect();
    let vectors: Vec<ComplexVector> = a.vectors.iter().chain(&b.vectors).cloned().collect();
    trace_norm_low_rank(&weights, &vectors)
}

/// `‖V_j U_j(u/√n)|j,j⟩ - |√(2j/n)·α_u⟩‖` on `N` Fock levels.
///
/// The coherent amplitude uses `2j/n` in place of `2μ-1`, so scanning `j`
/// follows the matching oscillator state.
pub fn coherent_vector_distance(j: HalfInteger, u: LocalParam, n: u32, trunc: FockTruncation) -> Result<f64> {
    const LEAKAGE_TOL: f64 = 1e-12;
    if n == 0 {
        return Err(Error::domain("number of qubits must be positive"));
    }
    let emb = EmbeddingMap::new(j, trunc)?;
    let w = u.scaled(1.0 / (n as f64).sqrt());
    let spin = spin_coherent_coords(j, w)?;
    let z = u.alpha() * (j.twice() as f64 / n as f64).sqrt();
    let coh = coherent_vector(z, emb.trunc.dim);
    let leakage = (1.0 - coh.norm_squared()).max(0.0);
    if leakage > LEAKAGE_TOL {
        let mut need = emb.trunc.dim;
        while (1.0 - coherent_vector(z, need).norm_squared()) > LEAKAGE_TOL {
            need += need / 2 + 1;
        }
        return Err(Error::truncation(
            format!("coherent state with |z| = {:.3} leaks {leakage:.3e}", z.norm()),
            need,
        ));
    }
    let mut diff = coh;
    for (k, s) in spin.iter().enumerate() {
        diff[k] -= s;
    }
    Ok(diff.norm())
}

/// Trace distance between `U_j(u/√n)U_j(v/√n)|j,j⟩` and `U_j((u+v)/√n)|j,j⟩`.
pub fn composition_defect(j: HalfInteger, u: LocalParam, v: LocalParam, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("number of qubits must be positive"));
    }
    if v == LocalParam::ZERO {
        return Ok(0.0);
    }
    let s = 1.0 / (n as f64).sqrt();
    let top = basis_vector(j, 0);
    let a = rotate_vector(j, u.scaled(s), &rotate_vector(j, v.scaled(s), &top));
    let b = rotate_vector(j, u.plus(v).scaled(s), &top);
    let a = a.unscale(a.norm());
    let b = b.unscale(b.norm());
    // ‖|a⟩⟨a| - |b⟩⟨b|‖₁ = 2√(1 - |⟨b|a⟩|²), with the root taken from the
    // orthogonal residual to keep precision near zero.
    let overlap = b.dotc(&a);
    let residual = &a - &b * overlap;
    Ok(2.0 * residual.norm())
}

/// Inclusive axis `min:max:steps`; `steps = 1` means the single point `min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl AxisSpec {
    pub fn new(min: f64, max: f64, steps: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || steps == 0 || max < min {
            return Err(Error::validation(format!("invalid axis {min}:{max}:{steps}")));
        }
        Ok(Self { min, max, steps })
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let h = (self.max - self.min) / (self.steps - 1) as f64;
        (0..self.steps).map(|k| self.min + h * k as f64).collect()
    }
}

impl FromStr for AxisSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::validation(format!("grid axis '{s}' is not min:max:steps")));
        }
        let num = |t: &str| t.parse::<f64>().map_err(|_| Error::validation(format!("bad number '{t}' in grid '{s}'")));
        let steps = parts[2]
            .parse::<usize>()
            .map_err(|_| Error::validation(format!("bad step count '{}' in grid '{s}'", parts[2])))?;
        Self::new(num(parts[0])?, num(parts[1])?, steps)
    }
}

impl fmt::Display for AxisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.min, self.max, self.steps)
    }
}

/// Product grid of local parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UGrid {
    pub x: AxisSpec,
    pub y: AxisSpec,
}

impl UGrid {
    pub fn square(axis: AxisSpec) -> Self {
        Self { x: axis, y: axis }
    }

    /// The nine points `{-1, 0, 1}²`.
    pub fn unit_square() -> Self {
        Self::square(AxisSpec { min: -1.0, max: 1.0, steps: 3 })
    }

    /// Points in x-major order.
    pub fn points(&self) -> Vec<LocalParam> {
        let ys = self.y.values();
        self.x
            .values()
            .into_iter()
            .flat_map(|x| ys.iter().map(move |&y| LocalParam::new(x, y)))
            .collect()
    }

    pub fn max_norm(&self) -> f64 {
        self.points().iter().map(|u| u.norm()).fold(0.0, f64::max)
    }
}

impl fmt::Display for UGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepOptions {
    pub selection: BlockSelection,
    /// Overrides the Fock cutoff from [`truncation_policy`].
    pub trunc: Option<usize>,
}

/// Distances at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointDistances {
    pub u: LocalParam,
    /// `‖T_n(ρ^u_n) - φ^u‖₁`.
    pub forward: f64,
    /// `‖S_n(φ^u) - ρ^u_n‖₁`.
    pub reverse: f64,
    /// `max_{j ∈ J_{n,ε}} ‖V_j ρ^u_{j,n} V_j† - φ^u‖₁`.
    pub blockwise: f64,
    /// `Σ_j p_n(j) ‖V_j ρ^u_{j,n} V_j† - φ^u‖₁` over the concentration set.
    pub blockwise_mean: f64,
    /// Trace of `φ^u` lost to the Fock cutoff.
    pub fock_deficit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub n: u32,
    pub mu: f64,
    pub epsilon: f64,
    pub grid: UGrid,
    pub fock_dim: usize,
    pub forward_sup: f64,
    pub forward_argmax: LocalParam,
    pub forward_blockwise_sup: f64,
    pub reverse_sup: f64,
    /// `1 - p_n(J_{n,ε})`.
    pub concentration_deficit: f64,
    /// Weight of blocks left out of the forward image.
    pub excluded_weight: f64,
    /// Bound on the error in every distance from dropped blocks, dropped
    /// populations and the Fock cutoff.
    pub error_bound: f64,
    pub points: Vec<PointDistances>,
}

struct PointResult {
    dist: PointDistances,
    excluded: f64,
    error_bound: f64,
}

fn point_distances(
    params: &ModelParams,
    u: LocalParam,
    trunc: FockTruncation,
    selection: BlockSelection,
) -> Result<PointResult> {
    let n = trunc.dim;
    let phi = DisplacedThermal::new(u, params.mu, n)?;
    let keep = selected_spins(params, selection);
    let conc = concentration_set(params);

    let mut t_image = ComplexMatrix::zeros(n, n);
    let mut reverse = 0.0;
    let mut blockwise: f64 = 0.0;
    let mut blockwise_mean = 0.0;
    let mut excluded = 0.0;
    let mut skipped = 0.0;
    let mut dropped = 0.0;
    for j in params.spins() {
        let w = block_weight(params, j)?;
        let in_conc = conc.contains(&j);
        if w < SWEEP_WEIGHT_CUTOFF && !in_conc {
            skipped += w;
            if !keep.contains(&j) {
                excluded += w;
            }
            continue;
        }
        EmbeddingMap::new(j, trunc)?;
        let block = RotatedBlock::new(params, j, u)?;
        dropped += w * block.dropped;
        if keep.contains(&j) {
            block.state.add_to(&mut t_image, w);
        } else {
            excluded += w;
        }
        let s_j = inverse_block_mixture(&phi.state, 1.0, j);
        reverse += w * mixture_difference_norm(&s_j, &block.state);
        if in_conc {
            let d = mixture_difference_norm(&block.state, &phi.state);
            blockwise = blockwise.max(d);
            blockwise_mean += w * d;
        }
    }
    let phi_dense = phi.state.to_dense(n);
    let forward = trace_norm_hermitian(&HermitianMatrix::symmetrized(t_image).sub(&phi_dense));
    // A cropped state differs from the full one by at most 2√δ + δ in trace norm.
    let fock = phi.trace_deficit;
    let error_bound = 2.0 * skipped + dropped + 2.0 * fock.sqrt() + fock;
    Ok(PointResult {
        dist: PointDistances {
            u,
            forward,
            reverse,
            blockwise,
            blockwise_mean,
            fock_deficit: fock,
        },
        excluded,
        error_bound,
    })
}

/// Forward, reverse and blockwise distances for every `n` in `n_list` over the grid.
pub fn convergence_sweep(
    params: &ModelParams,
    grid: &UGrid,
    n_list: &[u32],
    options: SweepOptions,
) -> Result<Vec<ConvergenceRecord>> {
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation("n list must be strictly ascending"));
    }
    let points = grid.points();
    let per_n: Vec<(ModelParams, FockTruncation)> = n_list
        .iter()
        .map(|&n| {
            let p = params.with_n(n)?;
            let t = match options.trunc {
                Some(d) => FockTruncation::new(d),
                None => truncation_policy(p.mu, Some(p.max_spin()), grid.max_norm()),
            };
            Ok((p, t))
        })
        .collect::<Result<_>>()?;
    let tasks: Vec<(usize, LocalParam)> = (0..per_n.len())
        .flat_map(|i| points.iter().map(move |&u| (i, u)))
        .collect();
    let results = tasks
        .par_iter()
        .map(|&(i, u)| point_distances(&per_n[i].0, u, per_n[i].1, options.selection))
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::with_capacity(per_n.len());
    for (i, (p, t)) in per_n.iter().enumerate() {
        let chunk = &results[i * points.len()..(i + 1) * points.len()];
        let mut best = &chunk[0];
        for r in chunk {
            if r.dist.forward > best.dist.forward {
                best = r;
            }
        }
        let conc = concentration_set(p)
            .into_iter()
            .map(|j| block_weight(p, j))
            .sum::<Result<f64>>()?;
        records.push(ConvergenceRecord {
            n: p.n,
            mu: p.mu,
            epsilon: p.epsilon,
            grid: *grid,
            fock_dim: t.dim,
            forward_sup: best.dist.forward,
            forward_argmax: best.dist.u,
            forward_blockwise_sup: chunk.iter().map(|r| r.dist.blockwise).fold(0.0, f64::max),
            reverse_sup: chunk.iter().map(|r| r.dist.reverse).fold(0.0, f64::max),
            concentration_deficit: (1.0 - conc).max(0.0),
            excluded_weight: chunk.iter().map(|r| r.excluded).fold(0.0, f64::max),
            error_bound: chunk.iter().map(|r| r.error_bound).fold(0.0, f64::max),
            points: chunk.iter().map(|r| r.dist).collect(),
        });
    }
    Ok(records)
}

/// Spin nearest `j_n = n(μ - 1/2)` with the parity of `n`.
pub fn central_spin(params: &ModelParams) -> HalfInteger {
    nearest_spin(params.n, params.j_center())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{hermitian_eigenvalues, trace_norm};
    use crate::oscillator::{displaced_thermal, thermal_state};
    use crate::qubit_model::{block_state, block_state_zero, ensemble};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(dim: usize, rng: &mut impl Rng) -> HermitianMatrix {
        let a = ComplexMatrix::from_fn(dim, dim, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let m = &a * a.adjoint();
        let tr = m.trace().re;
        HermitianMatrix::symmetrized(m.unscale(tr))
    }

    fn half(two_j: u32) -> HalfInteger {
        HalfInteger::from_twice(two_j)
    }

    #[test]
    fn embedding_examples() {
        let t = FockTruncation::new(5);
        let emb = EmbeddingMap::new(half(1), t).unwrap();
        let rho = HermitianMatrix::from_real_diagonal(&[0.75, 0.25]);
        let out = embed_block(&rho, emb).unwrap();
        let want = HermitianMatrix::from_real_diagonal(&[0.75, 0.25, 0.0, 0.0, 0.0]);
        assert_eq!(out.matrix, want.into_matrix());
        assert_eq!(emb.project(&out.matrix), rho.as_matrix().clone());

        assert!(matches!(
            EmbeddingMap::new(half(10), FockTruncation::new(10)),
            Err(Error::Truncation { required: 11, .. })
        ));
        assert!(embed_block(&HermitianMatrix::zeros(3), emb).is_err());
    }

    #[test]
    fn embedded_zero_block_vs_thermal_state() {
        let params = ModelParams::new(40, 0.75, 0.1).unwrap();
        let p = params.p();
        let t = FockTruncation::new(60);
        let thermal = thermal_state(p, t).unwrap();
        for two_j in [0u32, 4, 10, 20] {
            let j = half(two_j);
            let emb = EmbeddingMap::new(j, t).unwrap();
            let embedded = embed_block(&block_state_zero(&params, j).unwrap(), emb).unwrap();
            let dist = trace_norm(&(embedded.matrix - &thermal.matrix)).unwrap();
            let pd = p.powi(j.dim() as i32);
            // exact: p^{2j+1} inside the block plus p^{2j+1} - p^N above it
            assert_abs_diff_eq!(dist, 2.0 * pd - p.powi(60), epsilon = 1e-13);
            assert!(dist <= pd / (1.0 - pd) + pd + 1e-15);
        }
    }

    #[test]
    fn forward_channel_examples() {
        let params = ModelParams::new(1, 0.75, 0.1).unwrap();
        let ens = ensemble(&params, LocalParam::ZERO).unwrap();
        let img = forward_channel(&ens, FockTruncation::new(4), BlockSelection::All).unwrap();
        let want = HermitianMatrix::from_real_diagonal(&[0.75, 0.25, 0.0, 0.0]).into_matrix();
        assert!((img.state.matrix - want).norm() < 1e-15);
        assert_eq!(img.excluded_weight, 0.0);

        let params = ModelParams::new(30, 0.8, 0.05).unwrap();
        let ens = ensemble(&params, LocalParam::new(0.4, -0.9)).unwrap();
        let t = FockTruncation::new(40);
        let all = forward_channel(&ens, t, BlockSelection::All).unwrap();
        assert_abs_diff_eq!(all.state.trace().re, 1.0, epsilon = 1e-10);
        assert!(hermitian_eigenvalues(&all.state.to_hermitian().unwrap())[0] > -1e-12);
        let conc = forward_channel(&ens, t, BlockSelection::Concentrated).unwrap();
        let included: f64 = concentration_set(&params)
            .iter()
            .map(|&j| block_weight(&params, j).unwrap())
            .sum();
        assert_abs_diff_eq!(conc.state.trace().re, included, epsilon = 1e-12);
        assert_abs_diff_eq!(conc.excluded_weight, 1.0 - included, epsilon = 1e-12);

        let small = forward_channel(&ens, FockTruncation::new(20), BlockSelection::All);
        assert!(matches!(small, Err(Error::Truncation { required: 31, .. })));
    }

    #[test]
    fn inverse_channel_examples() {
        let t = FockTruncation::new(8);
        let j1 = half(2);
        let emb = EmbeddingMap::new(j1, t).unwrap();
        let vac = thermal_state(0.0, t).unwrap();
        let out = inverse_channel_block(&vac, emb);
        assert_eq!(out.as_matrix(), HermitianMatrix::from_real_diagonal(&[1.0, 0.0, 0.0]).as_matrix());

        let mut upper = ComplexMatrix::zeros(8, 8);
        upper[(3, 3)] = c64(1.0, 0.0);
        let out = inverse_channel_block(&FockOperator { trunc: t, matrix: upper }, emb);
        assert_eq!(out.as_matrix(), HermitianMatrix::from_real_diagonal(&[1.0, 0.0, 0.0]).as_matrix());

        let params = ModelParams::new(1, 0.75, 0.1).unwrap();
        let phi = thermal_state(params.p(), FockTruncation::new(60)).unwrap();
        let ens = inverse_channel(&phi, &params).unwrap();
        assert_eq!(ens.blocks.len(), 1);
        assert!(ens.u.is_none());
        let b = &ens.blocks[0];
        let p = params.p();
        // the thermal mass above level 1 is routed to |1/2, 1/2⟩
        assert_abs_diff_eq!(b.weight, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.matrix.as_matrix()[(0, 0)].re, 1.0 - p + p * p, epsilon = 1e-15);
        assert_abs_diff_eq!(b.matrix.as_matrix()[(1, 1)].re, p - p * p, epsilon = 1e-15);
        assert_abs_diff_eq!(b.matrix.as_matrix()[(0, 1)].norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn round_trip_restores_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = FockTruncation::new(110);
        for two_j in [0u32, 1, 2, 7, 30, 63, 100] {
            let j = half(two_j);
            let rho = random_state(j.dim(), &mut rng);
            let emb = EmbeddingMap::new(j, t).unwrap();
            let back = inverse_channel_block(&embed_block(&rho, emb).unwrap(), emb);
            assert!((back.as_matrix() - rho.as_matrix()).norm() < 1e-14);
        }
    }

    #[test]
    fn inverse_of_forward_image_matches_blocks() {
        let params = ModelParams::new(24, 0.75, 0.1).unwrap();
        let ens = ensemble(&params, LocalParam::ZERO).unwrap();
        let t = FockTruncation::new(25);
        let img = forward_channel(&ens, t, BlockSelection::All).unwrap();
        let back = inverse_channel(&img.state, &params).unwrap();
        assert_abs_diff_eq!(back.total_weight(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(back.trace(), 1.0, epsilon = 1e-10);
        let p = params.p();
        // S^j is a contraction with S^j(V_j ρ V_j†) = ρ, so each embedded
        // block j' lands within 2p^{2j'+1} + 2p^{2j+1} of ρ⁰_j.
        let spread: f64 = ens.blocks.iter().map(|b| b.weight * 2.0 * p.powi(b.j.dim() as i32)).sum();
        for (b, orig) in back.blocks.iter().zip(&ens.blocks) {
            let d = trace_norm_hermitian(&b.matrix.sub(&orig.matrix));
            assert!(d <= 2.0 * p.powi(b.j.dim() as i32) + spread + 1e-12, "j = {}: {d}", b.j);
        }
    }

    #[test]
    fn low_rank_inverse_matches_dense() {
        let params = ModelParams::new(20, 0.75, 0.1).unwrap();
        let u = LocalParam::new(0.7, -0.4);
        let t = FockTruncation::new(60);
        let phi_lr = DisplacedThermal::new(u, params.mu, 60).unwrap();
        let phi = displaced_thermal(u, params.mu, t).unwrap();
        for two_j in [4u32, 10, 20] {
            let j = half(two_j);
            let dense = inverse_channel_block(&phi, EmbeddingMap::new(j, t).unwrap());
            let lr = inverse_block_mixture(&phi_lr.state, phi_lr.state.trace(), j).to_dense(j.dim());
            assert!((dense.as_matrix() - lr.as_matrix()).norm() < 1e-12);
            let rho = block_state(&params, j, u).unwrap();
            let want = trace_norm_hermitian(&dense.sub(&rho));
            let got = mixture_difference_norm(
                &inverse_block_mixture(&phi_lr.state, phi_lr.state.trace(), j),
                &RotatedBlock::new(&params, j, u).unwrap().state,
            );
            assert_abs_diff_eq!(got, want, epsilon = 1e-10);
        }
    }

    #[test]
    fn coherent_vector_distance_examples() {
        let t = FockTruncation::new(600);
        assert_eq!(coherent_vector_distance(half(32), LocalParam::ZERO, 64, t).unwrap(), 0.0);
        let u = LocalParam::new(1.0, 0.0);
        let d: Vec<f64> = [64u32, 256, 1024]
            .iter()
            .map(|&n| {
                let j = central_spin(&ModelParams::new(n, 0.75, 0.1).unwrap());
                coherent_vector_distance(j, u, n, t).unwrap()
            })
            .collect();
        assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
        assert!(d[2] < 0.5 * d[0], "{d:?}");
        assert!(matches!(coherent_vector_distance(half(10), LocalParam::new(2.0, 0.0), 1, t), Err(Error::Domain(_))));
    }

    #[test]
    fn composition_defect_examples() {
        let u = LocalParam::new(0.5, 0.0);
        let v = LocalParam::new(0.0, 0.5);
        for n in [16u32, 64, 1024] {
            let j = central_spin(&ModelParams::new(n, 0.75, 0.1).unwrap());
            assert_eq!(composition_defect(j, u, LocalParam::ZERO, n).unwrap(), 0.0);
            assert!(composition_defect(j, u, LocalParam::new(1.3, 0.0), n).unwrap() <= 1e-8);
            assert!(composition_defect(j, LocalParam::new(0.3, -0.2), LocalParam::new(-0.9, 0.6), n).unwrap() <= 1e-8);
        }
        let d: Vec<f64> = [64u32, 256, 1024]
            .iter()
            .map(|&n| {
                let j = central_spin(&ModelParams::new(n, 0.75, 0.1).unwrap());
                composition_defect(j, u, v, n).unwrap()
            })
            .collect();
        assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
    }

    #[test]
    fn axis_parsing() {
        let a: AxisSpec = "-1:1:3".parse().unwrap();
        assert_eq!(a.values(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(a.to_string(), "-1:1:3");
        assert_eq!("0.5:0.5:1".parse::<AxisSpec>().unwrap().values(), vec![0.5]);
        for bad in ["1:0:3", "0:1", "0:1:0", "a:1:2", "0:1:2.5"] {
            assert!(bad.parse::<AxisSpec>().is_err(), "{bad}");
        }
        assert_eq!(UGrid::unit_square().points().len(), 9);
    }

    #[test]
    fn small_sweep_is_consistent() {
        let params = ModelParams::new(16, 0.75, 0.1).unwrap();
        let grid = UGrid::square("-1:1:2".parse().unwrap());
        let recs = convergence_sweep(&params, &grid, &[8, 16, 32], SweepOptions::default()).unwrap();
        assert_eq!(recs.len(), 3);
        for r in &recs {
            assert_eq!(r.points.len(), 4);
            for p in &r.points {
                // T_n and S_n are convex combinations of blockwise maps, and
                // S_n^j is a contraction that inverts V_j
                assert!(p.forward <= p.blockwise_mean + 2.0 * r.concentration_deficit + r.error_bound + 1e-10);
                assert!(p.reverse <= p.blockwise_mean + 2.0 * r.concentration_deficit + r.error_bound + 1e-10);
                assert!(p.forward >= 0.0 && p.forward <= 2.0 + 1e-10);
                assert!(p.reverse >= 0.0 && p.reverse <= 2.0 + 1e-10);
            }
        }
        let dense = {
            let p = params.with_n(16).unwrap();
            let u = LocalParam::new(1.0, -1.0);
            let t = FockTruncation::new(recs[1].fock_dim);
            let ens = ensemble(&p, u).unwrap();
            let img = forward_channel(&ens, t, BlockSelection::All).unwrap();
            let phi = displaced_thermal(u, p.mu, t).unwrap();
            let fwd = trace_norm(&(img.state.matrix - &phi.matrix)).unwrap();
            let back = inverse_channel(&phi, &p).unwrap();
            let rev: f64 = back
                .blocks
                .iter()
                .zip(&ens.blocks)
                .map(|(a, b)| a.weight * trace_norm_hermitian(&a.matrix.sub(&b.matrix)))
                .sum();
            (fwd, rev)
        };
        let pt = recs[1].points.iter().find(|p| p.u == LocalParam::new(1.0, -1.0)).unwrap();
        assert_abs_diff_eq!(pt.forward, dense.0, epsilon = 1e-9);
        assert_abs_diff_eq!(pt.reverse, dense.1, epsilon = 1e-6);
    }

    #[test]
    fn pure_case_at_origin_is_exact() {
        let params = ModelParams::new(16, 1.0, 0.1).unwrap();
        let grid = UGrid::square("0:0:1".parse().unwrap());
        let recs = convergence_sweep(&params, &grid, &[16, 64], SweepOptions::default()).unwrap();
        for r in recs {
            assert!(r.forward_sup < 1e-10);
            assert!(r.reverse_sup < 1e-10);
        }
    }

    #[test]
    fn sweep_rejects_unsorted_n() {
        let params = ModelParams::new(16, 0.75, 0.1).unwrap();
        assert!(convergence_sweep(&params, &UGrid::unit_square(), &[64, 16], SweepOptions::default()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn embed_then_project_is_identity(two_j in 0u32..40, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let j = half(two_j);
            let rho = random_state(j.dim(), &mut rng);
            let emb = EmbeddingMap::new(j, FockTruncation::new(j.dim() + 5)).unwrap();
            let img = embed_block(&rho, emb).unwrap();
            prop_assert_eq!(emb.project(&img.matrix), rho.as_matrix().clone());
            prop_assert!((img.trace().re - rho.trace()).abs() < 1e-14);
        }

        #[test]
        fn inverse_channel_preserves_trace(seed in any::<u64>(), n in 1u32..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let phi = random_state(24, &mut rng);
            let phi = FockOperator { trunc: FockTruncation::new(24), matrix: phi.into_matrix() };
            let params = ModelParams::new(n, 0.7, 0.1).unwrap();
            let ens = inverse_channel(&phi, &params).unwrap();
            prop_assert!((ens.trace() - 1.0).abs() < 1e-10);
            for b in &ens.blocks {
                prop_assert!(hermitian_eigenvalues(&b.matrix)[0] > -1e-12);
            }
        }
    }
}
