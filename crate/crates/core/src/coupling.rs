//! Free-space Green's tensor and the dispersive/dissipative coupling
//! matrices it induces between emitters.

use nalgebra::Matrix3;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{DipoleArray, Vec3, COINCIDENCE_TOL};

/// Dyadic Green's tensor of an oscillating unit dipole in free space,
///
/// `G(r) = e^{ik r} [ (1/kr + i/(kr)² − 1/(kr)³) 𝟙 − r̂r̂ᵀ (1/kr + 3i/(kr)² − 3/(kr)³) ]`.
pub fn greens_tensor(r: &Vec3, k0: f64) -> Result<Matrix3<C64>> {
    let dist = r.norm();
    if !(dist > 0.0) {
        return Err(Error::Singularity("Green's tensor evaluated at zero separation".into()));
    }
    let x = k0 * dist;
    let (x2, x3) = (x * x, x * x * x);
    let phase = C64::from_polar(1.0, x);
    let isotropic = phase * C64::new(1.0 / x - 1.0 / x3, 1.0 / x2);
    let projected = phase * C64::new(1.0 / x - 3.0 / x3, 3.0 / x2);
    let rhat = r / dist;
    Ok(Matrix3::from_fn(|a, b| {
        let delta = if a == b { isotropic } else { C64::new(0.0, 0.0) };
        delta - projected * (rhat[a] * rhat[b])
    }))
}

/// `μ_i* · G(r_i − r_j) · μ_j` for two distinct sites.
pub fn dipole_overlap(array: &DipoleArray, i: usize, j: usize) -> Result<C64> {
    let r = array.positions()[i] - array.positions()[j];
    if r.norm() < COINCIDENCE_TOL {
        return Err(Error::Singularity(format!("sites {i} and {j} coincide")));
    }
    let g = greens_tensor(&r, array.k0())?;
    let mu = array.orientations();
    Ok(mu[i].dotc(&(g * mu[j])))
}

/// Coherent (Ω) and dissipative (Γ) couplings in units of Γ0.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrices {
    pub omega: Array2<f64>,
    pub gamma: Array2<f64>,
}

impl CouplingMatrices {
    pub fn len(&self) -> usize {
        self.omega.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `Ω_ij − iΓ_ij/2`.
    pub fn hamiltonian_element(&self, i: usize, j: usize) -> C64 {
        C64::new(self.omega[[i, j]], -0.5 * self.gamma[[i, j]])
    }
}

/// Pairwise couplings
/// `Ω_ij = −(3Γ0/4) Re{μ_i*·G·μ_j}`, `Γ_ij = (3Γ0/2) Im{μ_i*·G·μ_j}`,
/// with `Ω_ii = 0` and `Γ_ii = Γ0`.
pub fn coupling_rates(array: &DipoleArray) -> Result<CouplingMatrices> {
    let n = array.len();
    let gamma0 = array.gamma0();
    let rows: Vec<Vec<(f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        return Ok((0.0, gamma0));
                    }
                    let g = dipole_overlap(array, i, j)?;
                    Ok((-0.75 * gamma0 * g.re, 1.5 * gamma0 * g.im))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let omega = Array2::from_shape_fn((n, n), |(i, j)| rows[i][j].0);
    let gamma = Array2::from_shape_fn((n, n), |(i, j)| rows[i][j].1);
    Ok(CouplingMatrices { omega, gamma })
}

/// Leading near-field (`1/(k0 r)³`) part of Ω,
/// `−(3Γ0/4)(k0 r)⁻³ Re{3(μ_i*·r̂)(μ_j·r̂) − μ_i*·μ_j}`, with zero diagonal.
pub fn short_range_omega(array: &DipoleArray) -> Result<Array2<f64>> {
    let n = array.len();
    let (pos, mu) = (array.positions(), array.orientations());
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let r = pos[i] - pos[j];
            let dist = r.norm();
            if dist < COINCIDENCE_TOL {
                return Err(Error::Singularity(format!("sites {i} and {j} coincide")));
            }
            let rhat = (r / dist).map(|x| C64::new(x, 0.0));
            let angular = 3.0 * mu[i].dotc(&rhat) * rhat.dot(&mu[j]) - mu[i].dotc(&mu[j]);
            let x = array.k0() * dist;
            out[[i, j]] = -0.75 * array.gamma0() * angular.re / (x * x * x);
        }
    }
    Ok(out)
}
