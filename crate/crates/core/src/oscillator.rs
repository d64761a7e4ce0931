//! Truncated Fock-space states of one oscillator mode.
//!
//! States live on levels `0..N`. Whatever probability a construction pushes
//! above level `N - 1` is reported through [`FockTruncation::tail_bound`]
//! rather than renormalized away.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::irreps::{HalfInteger, LocalParam};
use crate::numerics::{
    c64, outer, pairwise_sum, unitary_exp, ComplexMatrix, ComplexVector, HermitianMatrix, HermitianTridiagonal,
    PolarGrid, PureMixture, C64,
};

/// Thermal tail targeted by [`truncation_policy`].
pub const THERMAL_TAIL_TARGET: f64 = 1e-8;
/// Extra leakage a displacement may add on top of the thermal tail.
pub const DISPLACEMENT_LEAKAGE_TOL: f64 = 1e-6;

const THERMAL_CUTOFF: f64 = 1e-18;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FockTruncation {
    pub dim: usize,
    /// Upper bound on the trace missing from a state on this truncation.
    pub tail_bound: f64,
}

impl FockTruncation {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "Fock truncation needs at least one level");
        Self { dim, tail_bound: 0.0 }
    }

    fn with_tail(self, tail_bound: f64) -> Self {
        Self { tail_bound, ..self }
    }
}

/// Cutoff large enough for every block of the concentration set, the
/// thermal tail and a displacement of size `√(2μ-1)·u_max`.
pub fn truncation_policy(mu: f64, j_max: Option<HalfInteger>, u_max: f64) -> FockTruncation {
    let block = j_max.map_or(1, |j| j.dim());
    let p = (1.0 - mu) / mu;
    let thermal = if p <= 0.0 {
        1
    } else {
        (THERMAL_TAIL_TARGET.ln() / p.ln()).floor() as usize + 1
    };
    let shift = ((2.0 * mu - 1.0).sqrt() * u_max + 6.0).powi(2).ceil() as usize;
    FockTruncation::new(block.max(thermal).max(shift))
}

/// Padding used when building displacements on a larger space before cropping.
pub fn default_padding(z: C64) -> usize {
    16usize.max((8.0 * z.norm()).ceil() as usize)
}

/// Operator on the truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    pub trunc: FockTruncation,
    pub matrix: ComplexMatrix,
}

impl FockOperator {
    pub fn dim(&self) -> usize {
        self.trunc.dim
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn to_hermitian(&self) -> Result<HermitianMatrix> {
        HermitianMatrix::new(self.matrix.clone())
    }

    /// `Tr(ρ X)`.
    pub fn expectation(&self, x: &ComplexMatrix) -> C64 {
        (&self.matrix * x).trace()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Displacement {
    pub z: C64,
}

impl Displacement {
    pub fn new(z: C64) -> Self {
        Self { z }
    }

    /// `z = √(2μ-1)·α_u`, the displacement matching local parameter `u`.
    pub fn for_param(u: LocalParam, mu: f64) -> Self {
        Self::new(u.alpha() * (2.0 * mu - 1.0).sqrt())
    }
}

pub fn annihilation(dim: usize) -> ComplexMatrix {
    let mut a = ComplexMatrix::zeros(dim, dim);
    for k in 1..dim {
        a[(k - 1, k)] = c64((k as f64).sqrt(), 0.0);
    }
    a
}

pub fn number_basis_state(k: usize, trunc: FockTruncation) -> Result<FockOperator> {
    if k >= trunc.dim {
        return Err(Error::domain(format!("level {k} outside a {}-level truncation", trunc.dim)));
    }
    let mut m = ComplexMatrix::zeros(trunc.dim, trunc.dim);
    m[(k, k)] = c64(1.0, 0.0);
    Ok(FockOperator { trunc, matrix: m })
}

fn check_thermal_parameter(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::domain(format!("thermal parameter must lie in [0, 1), got {p}")));
    }
    Ok(())
}

/// Populations `(1-p) p^k` for `k < count`.
pub fn thermal_populations(p: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    let mut w = 1.0 - p;
    for _ in 0..count {
        out.push(w);
        w *= p;
    }
    out
}

/// `φ⁰ = (1-p) Σ_k p^k |k⟩⟨k|`, cut at `N` levels with trace `1 - p^N`.
pub fn thermal_state(p: f64, trunc: FockTruncation) -> Result<FockOperator> {
    check_thermal_parameter(p)?;
    let pops = thermal_populations(p, trunc.dim);
    let m = HermitianMatrix::from_real_diagonal(&pops).into_matrix();
    Ok(FockOperator {
        trunc: trunc.with_tail(p.powi(trunc.dim as i32)),
        matrix: m,
    })
}

/// Coefficients `e^{-|z|²/2} z^k / √k!` for `k < dim`.
pub fn coherent_vector(z: C64, dim: usize) -> ComplexVector {
    let r = z.norm();
    if r == 0.0 {
        let mut v = ComplexVector::zeros(dim);
        v[0] = c64(1.0, 0.0);
        return v;
    }
    let ln_r = r.ln();
    let theta = z.arg();
    let half_r2 = 0.5 * r * r;
    ComplexVector::from_fn(dim, |k, _| {
        let ln_mag = -half_r2 + k as f64 * ln_r - 0.5 * ln_factorial(k as u64);
        C64::from_polar(ln_mag.exp(), theta * k as f64)
    })
}

/// Probability a coherent state puts on levels `>= dim`.
pub fn coherent_leakage(z: C64, dim: usize) -> f64 {
    (1.0 - coherent_vector(z, dim).norm_squared()).max(0.0)
}

/// Rank-one `|z⟩⟨z|` on the truncation, not renormalized.
pub fn coherent_state(z: C64, trunc: FockTruncation, tol: f64) -> Result<FockOperator> {
    let v = coherent_vector(z, trunc.dim);
    let leakage = (1.0 - v.norm_squared()).max(0.0);
    if leakage > tol {
        let mut need = trunc.dim;
        while coherent_leakage(z, need) > tol {
            need = need * 2;
        }
        let required = (trunc.dim..=need).find(|&d| coherent_leakage(z, d) <= tol).unwrap_or(need);
        return Err(Error::truncation(
            format!("coherent state z = {z} leaks {leakage:.3e} above level {}", trunc.dim - 1),
            required,
        ));
    }
    Ok(FockOperator {
        trunc: trunc.with_tail(leakage),
        matrix: outer(&v),
    })
}

/// Hermitian `H` with `exp(iH) = D(z) = exp(z a† - z̄ a)` on `dim` levels.
pub fn displacement_generator(z: C64, dim: usize) -> HermitianTridiagonal {
    // H[k+1,k] = -i z √(k+1)
    let sub = (0..dim.saturating_sub(1))
        .map(|k| c64(0.0, -1.0) * z * ((k + 1) as f64).sqrt())
        .collect();
    HermitianTridiagonal::new(vec![0.0; dim], sub)
}

#[derive(Debug, Clone)]
pub struct DisplacementOperator {
    pub op: FockOperator,
    /// Largest norm loss `1 - ‖D|k⟩‖²` over the lower half of the kept levels,
    /// the block on which the cropped operator is used.
    pub unitarity_deficit: f64,
}

/// `D(z)` built on `N + pad` levels and cropped to `N`.
pub fn displacement_operator(
    d: Displacement,
    trunc: FockTruncation,
    pad: Option<usize>,
    tol: f64,
) -> Result<DisplacementOperator> {
    if !(d.z.re.is_finite() && d.z.im.is_finite()) {
        return Err(Error::domain("displacement must be finite"));
    }
    let pad = pad.unwrap_or_else(|| default_padding(d.z));
    let n = trunc.dim;
    let big = n + pad;
    let gen = HermitianMatrix::symmetrized(displacement_generator(d.z, big).to_dense());
    let full = unitary_exp(&gen);
    let cropped = full.view((0, 0), (n, n)).into_owned();
    let checked = n.div_ceil(2);
    let deficit = (0..checked)
        .map(|k| 1.0 - cropped.column(k).norm_squared())
        .fold(0.0, f64::max);
    if deficit > tol {
        return Err(Error::truncation(
            format!("displacement by {} loses {deficit:.3e} of unitarity on {n} levels", d.z),
            n + (4.0 * d.z.norm() * (n as f64).sqrt()).ceil() as usize,
        ));
    }
    Ok(DisplacementOperator {
        op: FockOperator {
            trunc: trunc.with_tail(deficit),
            matrix: cropped,
        },
        unitarity_deficit: deficit,
    })
}

/// Displaced thermal state as a mixture of displaced number states,
/// `Σ_i (1-p) p^i D|i⟩⟨i|D†`, with vectors cropped to `dim` levels.
#[derive(Debug, Clone)]
pub struct DisplacedThermal {
    pub state: PureMixture,
    /// Trace missing from `state`: thermal tail plus displacement leakage.
    pub trace_deficit: f64,
}

impl DisplacedThermal {
    pub fn new(u: LocalParam, mu: f64, dim: usize) -> Result<Self> {
        check_mu(mu)?;
        let p = (1.0 - mu) / mu;
        let z = Displacement::for_param(u, mu).z;
        let big = dim + default_padding(z);
        let gen = displacement_generator(z, big);
        let mut state = PureMixture::new();
        for (i, w) in thermal_populations(p, big).into_iter().enumerate() {
            if w < THERMAL_CUTOFF {
                break;
            }
            let mut e = ComplexVector::zeros(big);
            e[i] = c64(1.0, 0.0);
            let v = gen.exp_i_apply(1.0, &e);
            state.push(w, v.rows(0, dim).into_owned());
        }
        let trace_deficit = (1.0 - state.trace()).max(0.0);
        Ok(Self { state, trace_deficit })
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.5 && mu <= 1.0) {
        return Err(Error::domain(format!("mu must lie in (1/2, 1], got {mu}")));
    }
    Ok(())
}

/// `φ^u = D(z) φ⁰ D(z)†` with `z = √(2μ-1)·α_u`.
pub fn displaced_thermal(u: LocalParam, mu: f64, trunc: FockTruncation) -> Result<FockOperator> {
    let dt = DisplacedThermal::new(u, mu, trunc.dim)?;
    let p = (1.0 - mu) / mu;
    let thermal_tail = p.powi(trunc.dim as i32);
    if dt.trace_deficit > thermal_tail + DISPLACEMENT_LEAKAGE_TOL {
        let z = Displacement::for_param(u, mu).z;
        return Err(Error::truncation(
            format!(
                "displaced thermal state (z = {z}) loses {:.3e} of trace on {} levels",
                dt.trace_deficit, trunc.dim
            ),
            truncation_policy(mu, None, u.norm()).dim.max(trunc.dim + 1),
        ));
    }
    Ok(FockOperator {
        trunc: trunc.with_tail(dt.trace_deficit),
        matrix: dt.state.to_dense(trunc.dim).into_matrix(),
    })
}

/// Plane quadrature settings: Gauss–Legendre radial nodes, uniform angles,
/// radius in units of the relevant standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub n_radial: usize,
    pub n_angular: usize,
    pub radius_sigmas: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            n_radial: 200,
            n_angular: 256,
            radius_sigmas: 6.0,
        }
    }
}

/// Tolerance on the Gaussian tail left outside the Glauber quadrature disk.
pub const GLAUBER_TAIL_TOL: f64 = 1e-4;

/// Thermal state rebuilt as a Gaussian mixture of coherent states,
/// `(2πs²)^{-1} ∫ e^{-|z|²/2s²} |z⟩⟨z| d²z` with `s² = p/(2(1-p))`,
/// integrated numerically on a disk of radius `radius_sigmas·s`.
pub fn glauber_mixture(mu: f64, trunc: FockTruncation, spec: QuadratureSpec) -> Result<FockOperator> {
    check_mu(mu)?;
    let n = trunc.dim;
    let p = (1.0 - mu) / mu;
    if p == 0.0 {
        return number_basis_state(0, trunc);
    }
    let s2 = p / (2.0 * (1.0 - p));
    let s = s2.sqrt();
    let radius = spec.radius_sigmas * s;
    let tail = (-radius * radius / (2.0 * s2)).exp();
    if tail > GLAUBER_TAIL_TOL {
        return Err(Error::Accuracy(format!(
            "Glauber quadrature radius {:.2} s leaves {tail:.3e} of the mixing density outside",
            spec.radius_sigmas
        )));
    }
    let grid = PolarGrid::new((0.0, 0.0), radius, spec.n_radial, spec.n_angular);
    let mut acc = ComplexMatrix::zeros(n, n);
    for pt in grid.points() {
        let r2 = pt.x * pt.x + pt.y * pt.y;
        let w = pt.weight * (-r2 / (2.0 * s2)).exp() / (2.0 * PI * s2);
        let v = coherent_vector(c64(pt.x, pt.y), n);
        for c in 0..n {
            let vc = v[c].conj() * w;
            for r in 0..n {
                acc[(r, c)] += v[r] * vc;
            }
        }
    }
    Ok(FockOperator {
        trunc: trunc.with_tail(tail + p.powi(n as i32)),
        matrix: acc,
    })
}

/// Heterodyne POVM density `(2μ-1)/π · |z_û⟩⟨z_û|`, `z_û = √(2μ-1)·α_û`.
pub fn heterodyne_density(u_hat: LocalParam, mu: f64, trunc: FockTruncation) -> Result<FockOperator> {
    check_mu(mu)?;
    let z = Displacement::for_param(u_hat, mu).z;
    let v = coherent_vector(z, trunc.dim);
    let leakage = (1.0 - v.norm_squared()).max(0.0);
    Ok(FockOperator {
        trunc: trunc.with_tail(leakage),
        matrix: outer(&v).scale((2.0 * mu - 1.0) / PI),
    })
}

/// Outcome density `Tr(ρ h(û))` for a state in low-rank form.
pub fn heterodyne_pdf(state: &PureMixture, u_hat: LocalParam, mu: f64) -> f64 {
    let z = Displacement::for_param(u_hat, mu).z;
    let v = coherent_vector(z, state.max_len());
    (2.0 * mu - 1.0) / PI * state.expectation(v.as_slice())
}

/// Closed-form heterodyne outcome density on the displaced thermal family,
/// `(2μ-1)²/(πμ) exp(-(2μ-1)²|û-u|²/μ)`.
pub fn heterodyne_gaussian_pdf(u_hat: LocalParam, u: LocalParam, mu: f64) -> f64 {
    let k = (2.0 * mu - 1.0).powi(2);
    let d2 = (u_hat.x - u.x).powi(2) + (u_hat.y - u.y).powi(2);
    k / (PI * mu) * (-k * d2 / mu).exp()
}

/// Per-axis standard deviation `√(μ/2)/(2μ-1)` of heterodyne outcomes.
pub fn heterodyne_sigma(mu: f64) -> f64 {
    (mu / 2.0).sqrt() / (2.0 * mu - 1.0)
}

/// `∫ h(û) d²û` over a disk, entrywise.
pub fn heterodyne_completeness(mu: f64, trunc: FockTruncation, grid: &PolarGrid) -> Result<ComplexMatrix> {
    check_mu(mu)?;
    let n = trunc.dim;
    let mut entries: Vec<Vec<f64>> = vec![Vec::new(); 2 * n * n];
    for pt in grid.points() {
        let z = Displacement::for_param(LocalParam::new(pt.x, pt.y), mu).z;
        let v = coherent_vector(z, n);
        let w = pt.weight * (2.0 * mu - 1.0) / PI;
        for c in 0..n {
            for r in 0..n {
                let e = v[r] * v[c].conj() * w;
                entries[2 * (r * n + c)].push(e.re);
                entries[2 * (r * n + c) + 1].push(e.im);
            }
        }
    }
    Ok(ComplexMatrix::from_fn(n, n, |r, c| {
        c64(pairwise_sum(&entries[2 * (r * n + c)]), pairwise_sum(&entries[2 * (r * n + c) + 1]))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{hermitian_eigenvalues, trace_norm};
    use approx::assert_abs_diff_eq;

    fn quadrature_means(op: &FockOperator) -> (f64, f64) {
        let a = annihilation(op.dim());
        let ad = a.adjoint();
        let q = (&a + &ad).scale(1.0 / 2f64.sqrt());
        let p = (&a - &ad) * c64(0.0, -1.0 / 2f64.sqrt());
        (op.expectation(&q).re, op.expectation(&p).re)
    }

    #[test]
    fn number_states() {
        let t = FockTruncation::new(5);
        let s0 = number_basis_state(0, t).unwrap();
        assert_eq!(s0.matrix[(0, 0)], c64(1.0, 0.0));
        assert_eq!(s0.trace(), c64(1.0, 0.0));
        for k in 0..5 {
            for l in 0..5 {
                let a = number_basis_state(k, t).unwrap().matrix;
                let b = number_basis_state(l, t).unwrap().matrix;
                let overlap = (a * b).trace().re;
                assert_eq!(overlap, if k == l { 1.0 } else { 0.0 });
            }
        }
        assert!(number_basis_state(5, t).is_err());
    }

    #[test]
    fn thermal_examples() {
        let vac = thermal_state(0.0, FockTruncation::new(4)).unwrap();
        assert_eq!(vac.matrix[(0, 0)].re, 1.0);
        assert_eq!(vac.trace().re, 1.0);

        let t = thermal_state(1.0 / 3.0, FockTruncation::new(3)).unwrap();
        let expected = [2.0 / 3.0, 2.0 / 9.0, 2.0 / 27.0];
        for k in 0..3 {
            assert_abs_diff_eq!(t.matrix[(k, k)].re, expected[k], epsilon = 1e-15);
        }
        assert_abs_diff_eq!(1.0 - t.trace().re, 1.0 / 27.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.trunc.tail_bound, 1.0 / 27.0, epsilon = 1e-15);
        assert!(thermal_state(1.0, FockTruncation::new(3)).is_err());
    }

    #[test]
    fn coherent_examples() {
        let t = FockTruncation::new(64);
        let vac = coherent_state(C64::default(), t, 1e-12).unwrap();
        assert_eq!(vac.matrix[(0, 0)].re, 1.0);

        let zs = [c64(0.3, -1.2), c64(-1.5, 0.9), c64(1.1, 1.1), c64(0.0, 2.0)];
        for &a in &zs {
            for &b in &zs {
                let va = coherent_vector(a, 64);
                let vb = coherent_vector(b, 64);
                let overlap = va.dotc(&vb).norm();
                assert_abs_diff_eq!(overlap, (-(a - b).norm_sqr() / 2.0).exp(), epsilon = 1e-12);
            }
            let rho = coherent_state(a, t, 1e-12).unwrap();
            let a_op = annihilation(64);
            let number = a_op.adjoint() * &a_op;
            assert_abs_diff_eq!(rho.expectation(&number).re, a.norm_sqr(), epsilon = 1e-8);
        }

        let err = coherent_state(c64(3.0, 0.0), FockTruncation::new(5), 1e-6).unwrap_err();
        match err {
            Error::Truncation { required, .. } => assert!(coherent_leakage(c64(3.0, 0.0), required) <= 1e-6),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn displacement_examples() {
        let t = FockTruncation::new(64);
        let id = displacement_operator(Displacement::new(C64::default()), t, Some(32), 1e-8).unwrap();
        assert!((id.op.matrix - ComplexMatrix::identity(64, 64)).norm() < 1e-12);

        for z in [c64(2.0, 0.0), c64(-1.0, 1.5), c64(1.5, 0.0), c64(0.5, -0.3)] {
            let d = displacement_operator(Displacement::new(z), t, Some(32), 1e-3).unwrap();
            let dm = displacement_operator(Displacement::new(-z), t, Some(32), 1e-3).unwrap();
            let prod = &d.op.matrix * &dm.op.matrix;
            // Cropping both factors to 64 levels loses the products routed
            // through levels >= 64; for |z| = 2 that reaches the upper corner
            // of the 32-level block at ~1e-4.
            let block = if z.norm() <= 1.5 { 32 } else { 24 };
            let err = prod.view((0, 0), (block, block)).into_owned() - ComplexMatrix::identity(block, block);
            assert!(err.norm() < 1e-8, "z = {z}: {:e}", err.norm());

            let first = d.op.matrix.column(0).into_owned();
            assert!((first - coherent_vector(z, 64)).norm() < 1e-8);
        }
    }

    fn laguerre(n: usize, alpha: f64, x: f64) -> f64 {
        let (mut l0, mut l1) = (1.0, 1.0 + alpha - x);
        if n == 0 {
            return l0;
        }
        for k in 1..n {
            let k = k as f64;
            let l2 = ((2.0 * k + 1.0 + alpha - x) * l1 - (k + alpha) * l0) / (k + 1.0);
            l0 = l1;
            l1 = l2;
        }
        l1
    }

    #[test]
    fn displacement_matrix_elements_match_laguerre_formula() {
        let z = c64(1.2, -0.7);
        let d = displacement_operator(Displacement::new(z), FockTruncation::new(48), None, 1e-3).unwrap();
        let x = z.norm_sqr();
        for m in 0..20 {
            for n in 0..20 {
                let (hi, lo) = (m.max(n), m.min(n));
                let k = hi - lo;
                let mag = (0.5 * (ln_factorial(lo as u64) - ln_factorial(hi as u64)) - 0.5 * x).exp()
                    * laguerre(lo, k as f64, x);
                let phase = if m >= n { z.powu(k as u32) } else { (-z.conj()).powu(k as u32) };
                let want = phase * mag;
                assert!((d.op.matrix[(m, n)] - want).norm() < 1e-10, "({m},{n})");
            }
        }
    }

    #[test]
    fn displacement_reports_inadequate_truncation() {
        let err = displacement_operator(Displacement::new(c64(4.0, 0.0)), FockTruncation::new(16), Some(4), 1e-8);
        assert!(matches!(err, Err(Error::Truncation { .. })));
    }

    #[test]
    fn displaced_thermal_examples() {
        let t = FockTruncation::new(40);
        let mu = 0.75;
        let p = 1.0 / 3.0;
        let u0 = displaced_thermal(LocalParam::ZERO, mu, t).unwrap();
        let th = thermal_state(p, t).unwrap();
        assert!((u0.matrix - th.matrix).norm() < 1e-14);

        let u = LocalParam::new(0.4, -0.7);
        let pure = displaced_thermal(u, 1.0, t).unwrap();
        let coh = coherent_state(u.alpha(), t, 1e-12).unwrap();
        assert!((pure.matrix - coh.matrix).norm() < 1e-12);

        let big = FockTruncation::new(128);
        for u in [LocalParam::new(0.5, 0.5), LocalParam::new(-1.0, 0.3)] {
            let rho = displaced_thermal(u, mu, big).unwrap();
            let (q, pm) = quadrature_means(&rho);
            let s = (2.0 * mu - 1.0).sqrt();
            assert_abs_diff_eq!(q, -2f64.sqrt() * s * u.y, epsilon = 1e-6);
            assert_abs_diff_eq!(pm, 2f64.sqrt() * s * u.x, epsilon = 1e-6);
        }
    }

    #[test]
    fn displaced_thermal_matches_dense_conjugation() {
        let t = FockTruncation::new(48);
        let mu = 0.8;
        let u = LocalParam::new(0.9, 0.4);
        let fast = displaced_thermal(u, mu, t).unwrap();
        let big = FockTruncation::new(48 + 32);
        let d = displacement_operator(Displacement::for_param(u, mu), big, Some(32), 1.0).unwrap();
        let th = thermal_state((1.0 - mu) / mu, big).unwrap();
        let full = &d.op.matrix * &th.matrix * d.op.matrix.adjoint();
        let cropped = full.view((0, 0), (48, 48)).into_owned();
        assert!(trace_norm(&(cropped - fast.matrix)).unwrap() < 1e-9);
    }

    #[test]
    fn factories_are_psd_with_bounded_trace() {
        let t = FockTruncation::new(60);
        let states = vec![
            thermal_state(0.2, t).unwrap(),
            coherent_state(c64(1.0, -0.5), t, 1e-10).unwrap(),
            displaced_thermal(LocalParam::new(1.0, 1.0), 0.75, t).unwrap(),
            displaced_thermal(LocalParam::new(-0.3, 0.8), 0.9, t).unwrap(),
        ];
        for s in states {
            let h = s.to_hermitian().unwrap();
            let min = hermitian_eigenvalues(&h)[0];
            assert!(min >= -1e-10, "min eigenvalue {min}");
            let tr = h.trace();
            assert!(tr <= 1.0 + 1e-10 && tr >= 1.0 - s.trunc.tail_bound - 1e-12, "trace {tr}");
        }
    }

    #[test]
    fn parity_relates_opposite_displacements() {
        let t = FockTruncation::new(50);
        let u = LocalParam::new(0.6, -0.8);
        let plus = displaced_thermal(u, 0.75, t).unwrap();
        let minus = displaced_thermal(u.neg(), 0.75, t).unwrap();
        let parity = ComplexMatrix::from_fn(50, 50, |i, j| {
            if i == j {
                c64(if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
            } else {
                C64::default()
            }
        });
        let conj = &parity * &plus.matrix * &parity;
        assert!((conj - minus.matrix).norm() < 1e-8);
    }

    #[test]
    fn glauber_mixture_reproduces_thermal_state() {
        let t = FockTruncation::new(32);
        let spec = QuadratureSpec {
            n_radial: 200,
            n_angular: 256,
            radius_sigmas: 5.0,
        };
        let g = glauber_mixture(0.75, t, spec).unwrap();
        let th = thermal_state(1.0 / 3.0, t).unwrap();
        assert!(trace_norm(&(&g.matrix - &th.matrix)).unwrap() < 1e-4);
        let off = (0..32)
            .flat_map(|r| (0..32).map(move |c| (r, c)))
            .filter(|(r, c)| r != c)
            .map(|(r, c)| g.matrix[(r, c)].norm())
            .fold(0.0, f64::max);
        assert!(off < 1e-8, "largest off-diagonal {off}");

        let vac = glauber_mixture(1.0, t, spec).unwrap();
        assert_eq!(vac.matrix[(0, 0)].re, 1.0);

        let narrow = QuadratureSpec {
            radius_sigmas: 2.0,
            ..spec
        };
        assert!(matches!(glauber_mixture(0.75, t, narrow), Err(Error::Accuracy(_))));
    }

    #[test]
    fn heterodyne_povm_is_complete() {
        let t = FockTruncation::new(16);
        let grid = PolarGrid::new((0.0, 0.0), 8.0, 120, 64);
        let m = heterodyne_completeness(0.9, t, &grid).unwrap();
        for r in 0..16 {
            for c in 0..16 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((m[(r, c)] - c64(want, 0.0)).norm() < 1e-3, "({r},{c}) = {}", m[(r, c)]);
            }
        }
    }

    #[test]
    fn heterodyne_pdf_is_gaussian_q_function() {
        let mu = 0.75;
        let u = LocalParam::new(0.5, -0.4);
        let dt = DisplacedThermal::new(u, mu, 128).unwrap();
        for u_hat in [LocalParam::new(0.0, 0.0), LocalParam::new(1.5, -2.0), LocalParam::new(-3.0, 2.5)] {
            let got = heterodyne_pdf(&dt.state, u_hat, mu);
            let want = heterodyne_gaussian_pdf(u_hat, u, mu);
            assert_abs_diff_eq!(got, want, epsilon = 1e-6);
        }
        let dense = heterodyne_density(LocalParam::new(1.5, -2.0), mu, FockTruncation::new(128)).unwrap();
        let rho = displaced_thermal(u, mu, FockTruncation::new(128)).unwrap();
        let via_dense = rho.expectation(&dense.matrix).re;
        assert_abs_diff_eq!(via_dense, heterodyne_gaussian_pdf(LocalParam::new(1.5, -2.0), u, mu), epsilon = 1e-6);

        let sigma = heterodyne_sigma(mu);
        let grid = PolarGrid::new((u.x, u.y), 8.0 * sigma, 120, 96);
        let mass = grid.integrate(|x, y| heterodyne_pdf(&dt.state, LocalParam::new(x, y), mu));
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-4);
    }

    #[test]
    fn policy_covers_blocks_and_tails() {
        let t = truncation_policy(0.75, Some(HalfInteger::from_twice(40)), 1.5);
        assert!(t.dim >= 41);
        assert!((1.0f64 / 3.0).powi(t.dim as i32) < THERMAL_TAIL_TARGET);
        let pure = truncation_policy(1.0, None, 0.0);
        assert_eq!(pure.dim, 36);
        let dt = DisplacedThermal::new(LocalParam::new(1.0, 1.0), 0.75, t.dim).unwrap();
        assert!(dt.trace_deficit < 1e-8);
    }
}
