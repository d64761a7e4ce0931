//! SU(2) irreducible representations in the x–y rotation plane.
//!
//! Basis convention: index `i` of a spin-`j` vector holds the amplitude of
//! `|j, m⟩` with `m = j - i`, so index 0 is the highest-weight vector.
//! Rotation generators are normalized as images of the Pauli matrices,
//! `U_j(u) = exp(i(u_x·π_j(σ_x) + u_y·π_j(σ_y)))`, which makes the spin-½
//! case the textbook `cos|u| 1 + i sin|u| (û·σ)`.

use std::fmt;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::numerics::{c64, unitary_exp, ComplexMatrix, ComplexVector, HermitianMatrix, HermitianTridiagonal, C64};

/// Total spin `j`, stored as the integer `2j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HalfInteger {
    two_j: u32,
}

impl HalfInteger {
    pub const fn from_twice(two_j: u32) -> Self {
        Self { two_j }
    }

    pub const fn twice(self) -> u32 {
        self.two_j
    }

    pub fn value(self) -> f64 {
        self.two_j as f64 / 2.0
    }

    /// Dimension `2j + 1` of the irrep.
    pub const fn dim(self) -> usize {
        self.two_j as usize + 1
    }

    pub const fn is_integer(self) -> bool {
        self.two_j % 2 == 0
    }
}

impl fmt::Display for HalfInteger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.two_j / 2)
        } else {
            write!(f, "{}/2", self.two_j)
        }
    }
}

/// Local rotation parameter `u = (u_x, u_y)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalParam {
    pub x: f64,
    pub y: f64,
}

impl LocalParam {
    pub const ZERO: LocalParam = LocalParam { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn try_new(x: f64, y: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::domain(format!("local parameter ({x}, {y}) is not finite")));
        }
        Ok(Self { x, y })
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// `Arg(-u_y + i u_x)`; undefined at the origin.
    pub fn angle(self) -> Option<f64> {
        (self.norm() > 0.0).then(|| self.alpha().arg())
    }

    /// Complex displacement amplitude `-u_y + i u_x`.
    pub fn alpha(self) -> C64 {
        c64(-self.y, self.x)
    }

    pub fn scaled(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    pub fn plus(self, other: Self) -> Self {
        Self::new(self.x + other.x, self.y + other.y)
    }

    pub fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Raising, lowering and `J_z` matrices of one irrep.
#[derive(Debug, Clone)]
pub struct LadderOps {
    pub plus: ComplexMatrix,
    pub minus: ComplexMatrix,
    pub z: ComplexMatrix,
}

/// `√((j - m)(j + m + 1))` for the transition into row `r - 1` from column `r`.
fn ladder_coefficient(j: HalfInteger, r: usize) -> f64 {
    let r_f = r as f64;
    (r_f * (j.two_j as f64 - r_f + 1.0)).sqrt()
}

pub fn ladder_ops(j: HalfInteger) -> LadderOps {
    let d = j.dim();
    let mut plus = ComplexMatrix::zeros(d, d);
    let mut z = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        z[(i, i)] = c64(j.value() - i as f64, 0.0);
        if i > 0 {
            plus[(i - 1, i)] = c64(ladder_coefficient(j, i), 0.0);
        }
    }
    let minus = plus.adjoint();
    LadderOps { plus, minus, z }
}

/// Generator `u_x π_j(σ_x) + u_y π_j(σ_y) = (u_x - i u_y) J₊ + (u_x + i u_y) J₋`.
pub fn generator_tridiagonal(j: HalfInteger, u: LocalParam) -> HermitianTridiagonal {
    let d = j.dim();
    let coeff = c64(u.x, u.y);
    let sub = (1..d).map(|r| coeff * ladder_coefficient(j, r)).collect();
    HermitianTridiagonal::new(vec![0.0; d], sub)
}

pub fn generator(j: HalfInteger, u: LocalParam) -> HermitianMatrix {
    HermitianMatrix::symmetrized(generator_tridiagonal(j, u).to_dense())
}

/// `U_j(u)` as a dense matrix, through the spectral exponential.
pub fn rotation_unitary(j: HalfInteger, u: LocalParam) -> ComplexMatrix {
    unitary_exp(&generator(j, u))
}

/// `U_j(u)·v` without forming the matrix.
pub fn rotate_vector(j: HalfInteger, u: LocalParam, v: &ComplexVector) -> ComplexVector {
    generator_tridiagonal(j, u).exp_i_apply(1.0, v)
}

/// Amplitude allowed on the last levels of a cropped rotation.
const CROP_EDGE_TOL: f64 = 1e-20;
const CROP_EDGE_WIDTH: usize = 8;

/// `U_j(u)|j, j-i⟩` for `i < count`.
///
/// Small rotations keep these vectors near the top of the ladder, so the
/// exponential is taken on the leading levels only, doubling the window until
/// the amplitude on its last levels is below `1e-20`.
pub fn rotate_top_basis(j: HalfInteger, u: LocalParam, count: usize) -> Vec<ComplexVector> {
    let d = j.dim();
    let count = count.min(d);
    let full = generator_tridiagonal(j, u);
    let mut k = (2 * count + 32).min(d);
    loop {
        let gen = full.leading(k);
        let rotated: Vec<ComplexVector> = (0..count)
            .map(|i| {
                let mut e = ComplexVector::zeros(k);
                e[i] = c64(1.0, 0.0);
                gen.exp_i_apply(1.0, &e)
            })
            .collect();
        let edge = rotated
            .iter()
            .map(|v| v.rows(k.saturating_sub(CROP_EDGE_WIDTH), k.min(CROP_EDGE_WIDTH)).norm())
            .fold(0.0, f64::max);
        if k == d || edge < CROP_EDGE_TOL {
            return rotated
                .into_iter()
                .map(|v| {
                    let mut out = ComplexVector::zeros(d);
                    out.rows_mut(0, k).copy_from(&v);
                    out
                })
                .collect();
        }
        k = (2 * k).min(d);
    }
}

/// Closed-form spin-½ rotation `U(u)`.
pub fn qubit_rotation(u: LocalParam) -> Matrix2<C64> {
    let r = u.norm();
    let (s, c) = r.sin_cos();
    let e = if r > 0.0 { u.alpha() / r } else { C64::default() };
    Matrix2::new(c64(c, 0.0), -e.conj() * s, e * s, c64(c, 0.0))
}

/// Basis vector `|j, m⟩` with `m = j - index`.
pub fn basis_vector(j: HalfInteger, index: usize) -> ComplexVector {
    let mut v = ComplexVector::zeros(j.dim());
    v[index] = c64(1.0, 0.0);
    v
}

/// Coordinates of `|j, w⟩ = U_j(w)|j, j⟩` in the `|j, m⟩` basis:
/// `√C(2j, j+m) ζ^{j-m} (1 - |ζ|²)^{(j+m)/2}` with `ζ = e^{iφ_w} sin|w|`.
pub fn spin_coherent_coords(j: HalfInteger, w: LocalParam) -> Result<ComplexVector> {
    let r = w.norm();
    if !(r < std::f64::consts::FRAC_PI_2) {
        return Err(Error::domain(format!(
            "spin-coherent coordinates need |w| < pi/2, got {r}"
        )));
    }
    let d = j.dim();
    let two_j = j.two_j as u64;
    if r == 0.0 {
        return Ok(basis_vector(j, 0));
    }
    let zeta = w.alpha() / r * r.sin();
    let ln_abs_zeta = r.sin().ln();
    let ln_rest = 0.5 * r.cos().powi(2).ln();
    let phase = zeta.arg();
    let v = (0..d)
        .map(|i| {
            let ln_mag = 0.5 * ln_binomial(two_j, i as u64)
                + i as f64 * ln_abs_zeta
                + (two_j - i as u64) as f64 * ln_rest;
            C64::from_polar(ln_mag.exp(), phase * i as f64)
        })
        .collect();
    Ok(ComplexVector::from_vec(v))
}

/// Populations `|⟨j, j-i| π_j(g) |j, j⟩|²` for `g ∈ SU(2)` with
/// `|⟨↑|g|↑⟩|² = a_sq`: the binomial law `C(2j, i) a_sq^{2j-i} (1-a_sq)^i`.
pub fn highest_weight_populations(j: HalfInteger, a_sq: f64, count: usize) -> Vec<f64> {
    let two_j = j.two_j as u64;
    let a_sq = a_sq.clamp(0.0, 1.0);
    let b_sq = 1.0 - a_sq;
    let count = count.min(j.dim());
    let ln_a = a_sq.ln();
    let ln_b = b_sq.ln();
    (0..count)
        .map(|i| {
            let i64_ = i as u64;
            let pa = if two_j - i64_ == 0 { 0.0 } else { (two_j - i64_) as f64 * ln_a };
            let pb = if i == 0 { 0.0 } else { i as f64 * ln_b };
            (ln_binomial(two_j, i64_) + pa + pb).exp()
        })
        .collect()
}
