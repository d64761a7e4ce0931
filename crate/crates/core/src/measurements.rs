//! Discrimination and estimation on the qubit family and its oscillator limit.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use libm::erf;
use statrs::function::factorial::ln_binomial;

use crate::channels::EmbeddingMap;
use crate::error::{Error, Result};
use crate::irreps::{qubit_rotation, spin_coherent_coords, HalfInteger, LocalParam};
use crate::numerics::{
    c64, hermitian_eigenvalues, low_rank_eigenvalues, pairwise_sum, ComplexVector, GridPoint, HermitianMatrix,
    PolarGrid, C64,
};
use crate::oscillator::{
    coherent_vector, heterodyne_pdf, heterodyne_sigma, DisplacedThermal, Displacement, FockTruncation,
    QuadratureSpec,
};
use crate::qubit_model::{block_weight, concentration_set, EnsembleState, ModelParams, RotatedBlock};

const TRACE_TOL: f64 = 1e-6;
const PSD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryTestResult {
    /// Average error probability of the best test at equal priors.
    pub risk: f64,
    /// Rank of the projector onto the positive part of `ρ⁺ - ρ⁻`.
    pub optimal_projector_rank: usize,
    pub n: Option<u32>,
    pub u: Option<LocalParam>,
    pub mu: Option<f64>,
    /// Bound on the risk error from blocks and populations left out.
    pub error_bound: f64,
}

impl BinaryTestResult {
    fn from_spectrum(eigenvalues: &[f64], error_bound: f64) -> Self {
        let norm: f64 = eigenvalues.iter().map(|l| l.abs()).sum();
        let scale = eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max);
        let rank = eigenvalues.iter().filter(|&&l| l > 1e-12 * scale.max(1e-300)).count();
        Self {
            risk: (0.5 * (1.0 - 0.5 * norm)).clamp(0.0, 0.5),
            optimal_projector_rank: rank,
            n: None,
            u: None,
            mu: None,
            error_bound,
        }
    }
}

fn check_state(rho: &HermitianMatrix, name: &str) -> Result<()> {
    let tr = rho.trace();
    if (tr - 1.0).abs() > TRACE_TOL {
        return Err(Error::validation(format!("{name} has trace {tr}, expected 1")));
    }
    let min = hermitian_eigenvalues(rho)[0];
    if min < -PSD_TOL {
        return Err(Error::validation(format!("{name} has eigenvalue {min:e}")));
    }
    Ok(())
}

/// `½(1 - ½‖ρ⁺ - ρ⁻‖₁)`.
pub fn helstrom_risk(rho_plus: &HermitianMatrix, rho_minus: &HermitianMatrix) -> Result<BinaryTestResult> {
    if rho_plus.dim() != rho_minus.dim() {
        return Err(Error::validation(format!(
            "states have dimensions {} and {}",
            rho_plus.dim(),
            rho_minus.dim()
        )));
    }
    check_state(rho_plus, "first state")?;
    check_state(rho_minus, "second state")?;
    Ok(BinaryTestResult::from_spectrum(&hermitian_eigenvalues(&rho_plus.sub(rho_minus)), 0.0))
}

/// Helstrom risk for two block-diagonal states, block by block.
pub fn helstrom_risk_ensembles(plus: &EnsembleState, minus: &EnsembleState) -> Result<BinaryTestResult> {
    let same = plus.blocks.len() == minus.blocks.len()
        && plus.blocks.iter().zip(&minus.blocks).all(|(a, b)| a.j == b.j);
    if !same {
        return Err(Error::validation("ensembles have different block structures"));
    }
    for (name, e) in [("first ensemble", plus), ("second ensemble", minus)] {
        if (e.trace() - 1.0).abs() > TRACE_TOL {
            return Err(Error::validation(format!("{name} has trace {}", e.trace())));
        }
    }
    let spectrum: Vec<f64> = plus
        .blocks
        .par_iter()
        .zip(&minus.blocks)
        .flat_map_iter(|(a, b)| {
            let m = HermitianMatrix::symmetrized(a.matrix.as_matrix().scale(a.weight) - b.matrix.as_matrix().scale(b.weight));
            hermitian_eigenvalues(&m)
        })
        .collect();
    let mut r = BinaryTestResult::from_spectrum(&spectrum, 0.0);
    if plus.params == minus.params {
        r.n = Some(plus.params.n);
        r.mu = Some(plus.params.mu);
    }
    r.u = plus.u;
    Ok(r)
}

/// Limit risk `½(1 - √(1 - e^{-4|u|²}))` for the pure family, from the
/// coherent-state overlap `⟨ψ_u|ψ_{-u}⟩ = e^{-2|u|²}`.
pub fn discrimination_limit(u: LocalParam) -> f64 {
    // 1 - e^{-4|u|²} via expm1 keeps precision for small u
    0.5 * (1.0 - (-(-4.0 * u.norm().powi(2)).exp_m1()).sqrt())
}

/// Helstrom risk between `φ^u` and `φ^{-u}` on `N` Fock levels.
pub fn limit_model_risk(u: LocalParam, mu: f64, trunc: FockTruncation) -> Result<BinaryTestResult> {
    let plus = DisplacedThermal::new(u, mu, trunc.dim)?;
    let minus = DisplacedThermal::new(u.neg(), mu, trunc.dim)?;
    let weights: Vec<f64> = plus.state.weights.iter().copied().chain(minus.state.weights.iter().map(|w| -w)).collect();
    let vectors: Vec<ComplexVector> = plus.state.vectors.iter().chain(&minus.state.vectors).cloned().collect();
    let bound = plus.trace_deficit + minus.trace_deficit;
    let mut r = BinaryTestResult::from_spectrum(&low_rank_eigenvalues(&weights, &vectors), bound);
    r.u = Some(u);
    r.mu = Some(mu);
    Ok(r)
}

/// Helstrom risk between `ρ^u_n` and `ρ^{-u}_n`.
///
/// Both states share the block weights `p_n(j)`, so the trace norm splits
/// into `Σ_j p_n(j) ‖ρ^u_{j,n} - ρ^{-u}_{j,n}‖₁`. Blocks lighter than
/// `1e-18` are skipped and counted in the error bound.
pub fn finite_n_discrimination(params: &ModelParams, u: LocalParam) -> Result<BinaryTestResult> {
    let spins: Vec<HalfInteger> = params.spins().collect();
    let parts = spins
        .par_iter()
        .map(|&j| {
            let w = block_weight(params, j)?;
            if w < 1e-18 {
                return Ok((Vec::new(), w));
            }
            let plus = RotatedBlock::new(params, j, u)?;
            let minus = RotatedBlock::new(params, j, u.neg())?;
            let weights: Vec<f64> = plus
                .state
                .weights
                .iter()
                .map(|x| w * x)
                .chain(minus.state.weights.iter().map(|x| -w * x))
                .collect();
            let vectors: Vec<ComplexVector> = plus.state.vectors.iter().chain(&minus.state.vectors).cloned().collect();
            Ok((low_rank_eigenvalues(&weights, &vectors), w * (plus.dropped + minus.dropped)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut spectrum = Vec::new();
    let mut bound = 0.0;
    for (j, (ev, b)) in spins.iter().zip(parts) {
        if ev.is_empty() && j.dim() > 0 {
            // skipped block: its weight bounds its share of ½‖·‖₁
            bound += b;
        } else {
            bound += 0.5 * b;
        }
        spectrum.extend(ev);
    }
    let mut r = BinaryTestResult::from_spectrum(&spectrum, bound);
    r.n = Some(params.n);
    r.u = Some(u);
    r.mu = Some(params.mu);
    Ok(r)
}

/// Risk `½ - erf(|u|)/2` of guessing the sign from a position measurement.
///
/// Written with the half-normalized error function `∫₀ˣ e^{-t²}/√π dt`
/// this is `½ - erf(|u|)`.
pub fn position_measurement_risk(u: LocalParam) -> f64 {
    0.5 - 0.5 * erf(u.norm())
}

/// How [`heterodyne_estimation_risk`] integrates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RiskMethod {
    /// Polar quadrature of the Fock-space outcome density.
    Quadrature(QuadratureSpec),
    /// Seeded sampling of heterodyne outcomes.
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub mu: f64,
    pub u: LocalParam,
    /// Estimate of `E‖û - u‖²`.
    pub value: f64,
    /// Standard error (Monte Carlo) or out-of-disk mass (quadrature).
    pub error: f64,
    pub method: RiskMethod,
}

/// Closed-form heterodyne risk `μ/(2μ-1)²`.
pub fn heterodyne_risk_reference(mu: f64) -> f64 {
    mu / (2.0 * mu - 1.0).powi(2)
}

/// Relative tolerance on the quadrature mass and Monte-Carlo standard error.
pub const RISK_ACCURACY: f64 = 1e-3;

const MC_CHUNK: usize = 1 << 14;

/// Draws a heterodyne outcome for `φ^u`: a point of the Glauber mixture
/// (Gaussian with per-axis variance `s² = p/(2(1-p))` around `z_u`) plus
/// vacuum noise of per-axis variance `1/2`, mapped back through
/// `z = √(2μ-1)·α_û`.
pub fn sample_heterodyne(u: LocalParam, mu: f64, rng: &mut ChaCha8Rng) -> LocalParam {
    let p = (1.0 - mu) / mu;
    let s2 = p / (2.0 * (1.0 - p));
    let sd = (s2 + 0.5).sqrt();
    let gx: f64 = StandardNormal.sample(rng);
    let gy: f64 = StandardNormal.sample(rng);
    let z = Displacement::for_param(u, mu).z + c64(sd * gx, sd * gy);
    let alpha = z / (2.0 * mu - 1.0).sqrt();
    LocalParam::new(alpha.im, -alpha.re)
}

/// Independent stream per fixed-size chunk, so results do not depend on
/// how rayon schedules the chunks.
pub fn heterodyne_samples(u: LocalParam, mu: f64, samples: usize, seed: u64) -> Vec<LocalParam> {
    let chunks = samples.div_ceil(MC_CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = MC_CHUNK.min(samples - c * MC_CHUNK);
            (0..len).map(move |_| sample_heterodyne(u, mu, &mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

/// `E‖û - u‖²` for heterodyne outcomes on `φ^u`.
pub fn heterodyne_estimation_risk(mu: f64, u: LocalParam, method: RiskMethod) -> Result<RiskEstimate> {
    if !(mu > 0.5 && mu <= 1.0) {
        return Err(Error::domain(format!("mu must lie in (1/2, 1], got {mu}")));
    }
    let (value, error) = match method {
        RiskMethod::Quadrature(spec) => {
            let state = DisplacedThermal::new(u, mu, heterodyne_fock_dim(mu, u))?;
            let grid = PolarGrid::new((u.x, u.y), spec.radius_sigmas * heterodyne_sigma(mu), spec.n_radial, spec.n_angular);
            let pts = grid.points();
            let (mass, moment): (Vec<f64>, Vec<f64>) = pts
                .par_iter()
                .map(|pt| {
                    let q = pt.weight * heterodyne_pdf(&state.state, LocalParam::new(pt.x, pt.y), mu);
                    let d2 = (pt.x - u.x).powi(2) + (pt.y - u.y).powi(2);
                    (q, q * d2)
                })
                .unzip();
            let mass = pairwise_sum(&mass);
            let missing = (1.0 - mass).abs();
            if missing > RISK_ACCURACY {
                return Err(Error::Accuracy(format!(
                    "quadrature disk holds {mass:.6} of the outcome density"
                )));
            }
            (pairwise_sum(&moment) / mass, missing)
        }
        RiskMethod::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::validation("Monte Carlo needs at least two samples"));
            }
            let d2: Vec<f64> = heterodyne_samples(u, mu, samples, seed)
                .iter()
                .map(|s| (s.x - u.x).powi(2) + (s.y - u.y).powi(2))
                .collect();
            let m = pairwise_sum(&d2) / samples as f64;
            let sq: Vec<f64> = d2.iter().map(|x| (x - m).powi(2)).collect();
            let se = (pairwise_sum(&sq) / (samples - 1) as f64 / samples as f64).sqrt();
            (m, se)
        }
    };
    Ok(RiskEstimate {
        mu,
        u,
        value,
        error,
        method,
    })
}

/// Levels needed for `φ^u` itself; coherent vectors at far outcomes only
/// meet the populated levels, so the outcome grid needs nothing more.
fn heterodyne_fock_dim(mu: f64, u: LocalParam) -> usize {
    crate::oscillator::truncation_policy(mu, None, u.norm()).dim
}

/// Radius of the disk on which `û ↦ |j, û/√n⟩` is one-to-one.
pub fn covariant_disk_radius(n: u32) -> f64 {
    0.5 * PI * (n as f64).sqrt()
}

/// Area factor of `û ↦ (θ, φ) = (2|û|/√n, arg û)` onto the unit sphere.
pub fn sphere_jacobian(u_hat: LocalParam, n: u32) -> f64 {
    let sn = (n as f64).sqrt();
    let r = u_hat.norm();
    if r == 0.0 {
        return 4.0 / n as f64;
    }
    2.0 * (2.0 * r / sn).sin() / (sn * r)
}

fn check_disk(u_hat: LocalParam, n: u32) -> Result<()> {
    let r = covariant_disk_radius(n);
    if !(u_hat.norm() < r) {
        return Err(Error::domain(format!(
            "outcome {:?} lies outside the disk of radius {r:.4}",
            (u_hat.x, u_hat.y)
        )));
    }
    Ok(())
}

/// Outcome density of the covariant measurement `(2j+1)/(4π)|j,ŝ⟩⟨j,ŝ| dŝ`
/// pulled to the plane: `(2j+1)/(4π)·⟨j, û/√n|ρ_j|j, û/√n⟩·Jac(û)`.
pub fn covariant_block_density(j: HalfInteger, n: u32, rho_j: &HermitianMatrix, u_hat: LocalParam) -> Result<f64> {
    check_disk(u_hat, n)?;
    if rho_j.dim() != j.dim() {
        return Err(Error::validation(format!("block matrix has dimension {}, expected {}", rho_j.dim(), j.dim())));
    }
    let v = spin_coherent_coords(j, u_hat.scaled(1.0 / (n as f64).sqrt()))?;
    let e = v.dotc(&(rho_j.as_matrix() * &v)).re.max(0.0);
    Ok(j.dim() as f64 / (4.0 * PI) * e * sphere_jacobian(u_hat, n))
}

/// Plane points that land on the same sphere point as `û` (`k = 1` fold),
/// with their area factors `r'/r`.
fn fold_points(u_hat: LocalParam, n: u32) -> Vec<(LocalParam, f64)> {
    let r = u_hat.norm();
    if r == 0.0 {
        return Vec::new();
    }
    let period = PI * (n as f64).sqrt();
    let dir = u_hat.scaled(1.0 / r);
    let outer = period + r;
    let inner = period - r;
    vec![(dir.scaled(outer), outer / r), (dir.scaled(-inner), inner / r)]
}

/// Mass of the limit heterodyne density beyond the first fold, the
/// Gaussian bound `exp(-(2μ-1)²(π√n - R - |u|)²/μ)`.
pub fn fold_mass_bound(mu: f64, n: u32, grid_radius: f64, u: LocalParam) -> f64 {
    let t = (PI * (n as f64).sqrt() - grid_radius - u.norm()).max(0.0);
    (-(2.0 * mu - 1.0).powi(2) * t * t / mu).exp()
}

/// Folds are evaluated only when their bound exceeds this.
pub const FOLD_TOL: f64 = 1e-10;

/// `Tr(V_j ρ_j V_j† h(û))`, with `k = 1` fold terms added when they matter.
pub fn heterodyne_pullback_density(
    j: HalfInteger,
    rho_j: &HermitianMatrix,
    mu: f64,
    n: u32,
    u_hat: LocalParam,
    trunc: FockTruncation,
) -> Result<f64> {
    check_disk(u_hat, n)?;
    EmbeddingMap::new(j, trunc)?;
    if rho_j.dim() != j.dim() {
        return Err(Error::validation(format!("block matrix has dimension {}, expected {}", rho_j.dim(), j.dim())));
    }
    let at = |p: LocalParam| {
        let z = Displacement::for_param(p, mu).z;
        let v = coherent_vector(z, j.dim());
        (2.0 * mu - 1.0) / PI * v.dotc(&(rho_j.as_matrix() * &v)).re.max(0.0)
    };
    let mut total = at(u_hat);
    for (p, factor) in fold_points(u_hat, n) {
        let t = at(p) * factor;
        if t > FOLD_TOL * 1e-3 {
            total += t;
        }
    }
    Ok(total)
}

/// Settings for comparing the two outcome densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonGrid {
    pub n_radial: usize,
    pub n_angular: usize,
    /// Disk radius in heterodyne standard deviations beyond `|u|`, capped at
    /// the injectivity radius.
    pub radius_sigmas: f64,
}

impl Default for ComparisonGrid {
    fn default() -> Self {
        Self {
            n_radial: 100,
            n_angular: 128,
            radius_sigmas: 8.0,
        }
    }
}

impl ComparisonGrid {
    pub fn polar(&self, params: &ModelParams, u: LocalParam) -> PolarGrid {
        let r = (u.norm() + self.radius_sigmas * heterodyne_sigma(params.mu)).min(covariant_disk_radius(params.n));
        PolarGrid::new((0.0, 0.0), r, self.n_radial, self.n_angular)
    }
}

/// Nonzero stretch of a vector.
struct Support {
    start: usize,
    values: Vec<C64>,
}

impl Support {
    fn of(v: &ComplexVector) -> Self {
        let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let thr = 1e-17 * max;
        let start = v.iter().position(|z| z.norm() > thr).unwrap_or(0);
        let end = v.iter().rposition(|z| z.norm() > thr).map_or(0, |e| e + 1);
        Self {
            start,
            values: v.iter().skip(start).take(end.saturating_sub(start)).copied().collect(),
        }
    }

    /// `⟨other|self⟩` over the shared stretch.
    fn overlap(&self, other: &Support) -> C64 {
        let lo = self.start.max(other.start);
        let hi = (self.start + self.values.len()).min(other.start + other.values.len());
        let mut s = C64::default();
        for k in lo..hi {
            s += other.values[k - other.start].conj() * self.values[k - self.start];
        }
        s
    }
}

/// Both outcome densities of one block on the grid points.
struct BlockDensities {
    j: HalfInteger,
    weight: f64,
    covariant: Vec<f64>,
    heterodyne: Vec<f64>,
}

/// Densities for the family state `ρ^u_{j,n}`: the covariant one through
/// `|⟨j,j-i|π(g)|j,j⟩|² = C(2j,i) a^{2j-i}(1-a)^i` with `g = U(-û/√n)U(u/√n)`,
/// the heterodyne one through overlaps with the rotated basis vectors.
fn block_densities(
    params: &ModelParams,
    j: HalfInteger,
    u: LocalParam,
    points: &[GridPoint],
    coherent: &[Support],
    folds: Option<&[Vec<(Support, f64)>]>,
) -> Result<BlockDensities> {
    let weight = block_weight(params, j)?;
    let block = RotatedBlock::new(params, j, u)?;
    let sn = (params.n as f64).sqrt();
    let mu = params.mu;
    let two_j = j.twice() as u64;
    let pops = &block.state.weights;
    let ln_pop: Vec<f64> = pops
        .iter()
        .enumerate()
        .map(|(i, p)| p.ln() + ln_binomial(two_j, i as u64))
        .collect();
    let supports: Vec<Support> = block.state.vectors.iter().map(Support::of).collect();
    let g_right = qubit_rotation(u.scaled(1.0 / sn));
    let pref = j.dim() as f64 / (4.0 * PI);
    let het_pref = (2.0 * mu - 1.0) / PI;

    let mut covariant = Vec::with_capacity(points.len());
    let mut heterodyne = Vec::with_capacity(points.len());
    for (k, pt) in points.iter().enumerate() {
        let u_hat = LocalParam::new(pt.x, pt.y);
        let g = qubit_rotation(u_hat.scaled(-1.0 / sn)) * g_right;
        let a = g[(0, 0)].norm_sqr().clamp(0.0, 1.0);
        let (ln_a, ln_b) = (a.ln(), (1.0 - a).ln());
        let mut e = 0.0;
        for (i, lp) in ln_pop.iter().enumerate() {
            let up = (two_j - i as u64) as f64;
            let term_a = if up == 0.0 { 0.0 } else { up * ln_a };
            let term_b = if i == 0 { 0.0 } else { i as f64 * ln_b };
            e += (lp + term_a + term_b).exp();
        }
        covariant.push(pref * e * sphere_jacobian(u_hat, params.n));

        let mut h: f64 = pops
            .iter()
            .zip(&supports)
            .map(|(w, s)| w * s.overlap(&coherent[k]).norm_sqr())
            .sum();
        if let Some(f) = folds {
            for (coh, factor) in &f[k] {
                let t: f64 = pops.iter().zip(&supports).map(|(w, s)| w * s.overlap(coh).norm_sqr()).sum();
                h += t * factor;
            }
        }
        heterodyne.push(het_pref * h);
    }
    Ok(BlockDensities {
        j,
        weight,
        covariant,
        heterodyne,
    })
}

fn coherent_window(u_hat: LocalParam, mu: f64, len: usize) -> Support {
    Support::of(&coherent_vector(Displacement::for_param(u_hat, mu).z, len))
}

/// Outcome densities of both measurements on a polar grid, summed over the
/// concentration set with weights `p_n(j)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutcomeDensityField {
    pub n: u32,
    pub mu: f64,
    pub u: LocalParam,
    pub grid_radius: f64,
    pub n_radial: usize,
    pub n_angular: usize,
    pub points: Vec<(f64, f64, f64)>,
    pub covariant: Vec<f64>,
    pub heterodyne: Vec<f64>,
    pub block_weights: Vec<(HalfInteger, f64)>,
}

impl OutcomeDensityField {
    pub fn covariant_mass(&self) -> f64 {
        self.mass(&self.covariant)
    }

    pub fn heterodyne_mass(&self) -> f64 {
        self.mass(&self.heterodyne)
    }

    fn mass(&self, d: &[f64]) -> f64 {
        let v: Vec<f64> = self.points.iter().zip(d).map(|(p, x)| p.2 * x).collect();
        pairwise_sum(&v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementComparison {
    pub n: u32,
    pub mu: f64,
    pub u: LocalParam,
    /// `Σ_{j ∈ J} p_n(j) ∫_disk |m_j - h_j|` on the grid.
    pub tv: f64,
    /// Upper-bound terms: out-of-grid mass of both densities, fold mass and
    /// twice the concentration deficit.
    pub error_bound: f64,
    pub concentration_deficit: f64,
    /// Grid mass of each density, normalized by `p_n(J)`.
    pub covariant_mass: f64,
    pub heterodyne_mass: f64,
    pub fold_bound: f64,
    pub blocks: Vec<(HalfInteger, f64, f64)>,
}

struct Comparison {
    grid: PolarGrid,
    points: Vec<GridPoint>,
    blocks: Vec<BlockDensities>,
    fold_bound: f64,
}

fn compare(params: &ModelParams, u: LocalParam, grid: &ComparisonGrid) -> Result<Comparison> {
    let polar = grid.polar(params, u);
    let points = polar.points();
    let spins = concentration_set(params);
    let top = spins.iter().max().copied().unwrap_or(HalfInteger::from_twice(0));
    let len = top.dim();
    let coherent: Vec<Support> = points
        .par_iter()
        .map(|p| coherent_window(LocalParam::new(p.x, p.y), params.mu, len))
        .collect();
    let fold_bound = fold_mass_bound(params.mu, params.n, polar.radius, u);
    let folds: Option<Vec<Vec<(Support, f64)>>> = (fold_bound > FOLD_TOL).then(|| {
        points
            .par_iter()
            .map(|p| {
                fold_points(LocalParam::new(p.x, p.y), params.n)
                    .into_iter()
                    .map(|(q, f)| (coherent_window(q, params.mu, len), f))
                    .collect()
            })
            .collect()
    });
    let blocks = spins
        .par_iter()
        .map(|&j| block_densities(params, j, u, &points, &coherent, folds.as_deref()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Comparison {
        grid: polar,
        points,
        blocks,
        fold_bound: if folds.is_some() { 0.0 } else { fold_bound },
    })
}

fn integrate(points: &[GridPoint], f: impl Fn(usize) -> f64) -> f64 {
    let v: Vec<f64> = points.iter().enumerate().map(|(k, p)| p.weight * f(k)).collect();
    pairwise_sum(&v)
}

/// Total-variation distance between the covariant and the pulled-back
/// heterodyne outcome distributions on `ρ^u_n`.
pub fn measurement_tv_distance(params: &ModelParams, u: LocalParam, grid: &ComparisonGrid) -> Result<MeasurementComparison> {
    let c = compare(params, u, grid)?;
    let mut tv = 0.0;
    let mut cov_mass = 0.0;
    let mut het_mass = 0.0;
    let mut conc = 0.0;
    let mut outside = 0.0;
    let mut blocks = Vec::with_capacity(c.blocks.len());
    for b in &c.blocks {
        let d = integrate(&c.points, |k| (b.covariant[k] - b.heterodyne[k]).abs());
        let mc = integrate(&c.points, |k| b.covariant[k]);
        let mh = integrate(&c.points, |k| b.heterodyne[k]);
        tv += b.weight * d;
        cov_mass += b.weight * mc;
        het_mass += b.weight * mh;
        conc += b.weight;
        outside += b.weight * ((1.0 - mc).abs() + (1.0 - mh).abs());
        blocks.push((b.j, b.weight, d));
    }
    let deficit = (1.0 - conc).max(0.0);
    Ok(MeasurementComparison {
        n: params.n,
        mu: params.mu,
        u,
        tv,
        error_bound: outside + c.fold_bound + 2.0 * deficit,
        concentration_deficit: deficit,
        covariant_mass: cov_mass / conc,
        heterodyne_mass: het_mass / conc,
        fold_bound: c.fold_bound,
        blocks,
    })
}

pub fn outcome_density_field(params: &ModelParams, u: LocalParam, grid: &ComparisonGrid) -> Result<OutcomeDensityField> {
    let c = compare(params, u, grid)?;
    let np = c.points.len();
    let mut cov = vec![0.0; np];
    let mut het = vec![0.0; np];
    for b in &c.blocks {
        for k in 0..np {
            cov[k] += b.weight * b.covariant[k];
            het[k] += b.weight * b.heterodyne[k];
        }
    }
    Ok(OutcomeDensityField {
        n: params.n,
        mu: params.mu,
        u,
        grid_radius: c.grid.radius,
        n_radial: c.grid.n_radial,
        n_angular: c.grid.n_angular,
        points: c.points.iter().map(|p| (p.x, p.y, p.weight)).collect(),
        covariant: cov,
        heterodyne: het,
        block_weights: c.blocks.iter().map(|b| (b.j, b.weight)).collect(),
    })
}
