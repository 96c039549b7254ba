//! Electric field radiated by a single-excitation state, sampled on
//! far-field spheres and planar cuts.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coupling::{coupling_rates, greens_tensor};
use crate::error::{Error, Result};
use crate::dynamics::StateVector;
use crate::geometry::{CVec3, DipoleArray, Vec3, COINCIDENCE_TOL};
use crate::spectrum::{diagonalize, effective_hamiltonian, ring_modes, Basis, Manifold, ModeSet};

/// `E⁺(r) = (3Γ0/4) Σ_j G(r − r_j)·μ_j c_j` for a single-excitation state.
pub fn emitted_field(array: &DipoleArray, psi: &StateVector, r: &Vec3) -> Result<CVec3> {
    if psi.basis != Basis::Sites(array.len()) {
        return Err(Error::InvalidArgument("field needs a single-excitation state of the array".into()));
    }
    let mut e = CVec3::zeros();
    for (j, (p, mu)) in array.positions().iter().zip(array.orientations()).enumerate() {
        let c = psi.amplitudes[j];
        let sep = r - p;
        if sep.norm() < COINCIDENCE_TOL {
            return Err(Error::Singularity(format!("field point coincides with site {j}")));
        }
        if c == C64::new(0.0, 0.0) {
            continue;
        }
        e += greens_tensor(&sep, array.k0())? * mu * c;
    }
    Ok(e * C64::new(0.75 * array.gamma0(), 0.0))
}

/// `Σ_a |E_a|²`.
pub fn intensity(e: &CVec3) -> f64 {
    e.iter().map(|z| z.norm_sqr()).sum()
}

/// Hex SHA-256 of the site positions and orientations.
pub fn geometry_hash(array: &DipoleArray) -> String {
    let mut h = Sha256::new();
    for p in array.positions() {
        p.iter().for_each(|x| h.update(x.to_le_bytes()));
    }
    for mu in array.orientations() {
        mu.iter().for_each(|z| {
            h.update(z.re.to_le_bytes());
            h.update(z.im.to_le_bytes());
        });
    }
    hex::encode(h.finalize())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldMapKind {
    Sphere,
    Plane,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMetadata {
    pub kind: FieldMapKind,
    pub state: String,
    pub geometry_hash: String,
    pub n_sites: usize,
    pub center: [f64; 3],
    /// Sphere radius, or plane height above the centre.
    pub distance: f64,
    /// `(n_theta, n_phi)` or `(n_x, n_y)`.
    pub shape: [usize; 2],
    pub max_intensity: f64,
    pub n_masked: usize,
}

/// Raw intensities `|E⁺|²` on a list of sample points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMap {
    pub points: Vec<[f64; 3]>,
    pub intensity: Vec<f64>,
    /// Points sitting on an emitter, reported with zero intensity.
    pub masked: Vec<bool>,
    pub metadata: FieldMetadata,
}

impl FieldMap {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the brightest point.
    pub fn argmax(&self) -> usize {
        (0..self.len()).max_by(|&a, &b| self.intensity[a].total_cmp(&self.intensity[b])).unwrap_or(0)
    }

    /// Intensities divided by the map maximum (all zero for a dark map).
    pub fn normalized(&self) -> Vec<f64> {
        let m = self.metadata.max_intensity;
        self.intensity.iter().map(|&i| if m > 0.0 { i / m } else { 0.0 }).collect()
    }
}

/// `(normal, axis, binormal)` of the first ring, or the lab frame.
fn map_frame(array: &DipoleArray) -> (Vec3, Vec3, Vec3) {
    match array.rings().first().and_then(|r| r.frame.as_ref()) {
        Some(f) => (f.normal, f.axis, f.binormal()),
        None => (Vec3::z(), Vec3::x(), Vec3::y()),
    }
}

fn sample(
    array: &DipoleArray,
    psi: &StateVector,
    points: Vec<Vec3>,
    mask_sites: bool,
) -> Result<(Vec<f64>, Vec<bool>)> {
    let vals: Vec<(f64, bool)> = points
        .par_iter()
        .map(|r| match emitted_field(array, psi, r) {
            Ok(e) => Ok((intensity(&e), false)),
            Err(Error::Singularity(_)) if mask_sites => Ok((0.0, true)),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().unzip())
}

fn finish(
    points: Vec<Vec3>,
    (intensity, masked): (Vec<f64>, Vec<bool>),
    array: &DipoleArray,
    kind: FieldMapKind,
    state: &str,
    distance: f64,
    shape: [usize; 2],
) -> FieldMap {
    let c = array.centroid();
    FieldMap {
        points: points.iter().map(|p| [p.x, p.y, p.z]).collect(),
        metadata: FieldMetadata {
            kind,
            state: state.to_string(),
            geometry_hash: geometry_hash(array),
            n_sites: array.len(),
            center: [c.x, c.y, c.z],
            distance,
            shape,
            max_intensity: intensity.iter().cloned().fold(0.0, f64::max),
            n_masked: masked.iter().filter(|&&m| m).count(),
        },
        intensity,
        masked,
    }
}

/// Intensity on a sphere about the array centroid. The polar axis is the
/// first ring's normal; `θ` runs over `n_theta` points from 0 to π inclusive
/// and `φ = 2πk/n_phi`. The radius defaults to 200 times the array extent.
pub fn farfield_map(
    array: &DipoleArray,
    psi: &StateVector,
    radius: Option<f64>,
    n_theta: usize,
    n_phi: usize,
    state: &str,
) -> Result<FieldMap> {
    if n_theta < 2 || n_phi < 1 {
        return Err(Error::InvalidArgument(format!("sphere grid {n_theta}x{n_phi} is too small")));
    }
    let radius = radius.unwrap_or(200.0 * array.extent());
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!("sphere radius must be positive, got {radius}")));
    }
    let (n, a, b) = map_frame(array);
    let c = array.centroid();
    let points: Vec<Vec3> = (0..n_theta)
        .flat_map(|i| (0..n_phi).map(move |k| (i, k)))
        .map(|(i, k)| {
            let theta = PI * i as f64 / (n_theta - 1) as f64;
            let phi = TAU * k as f64 / n_phi as f64;
            c + (a * phi.cos() * theta.sin() + b * phi.sin() * theta.sin() + n * theta.cos()) * radius
        })
        .collect();
    let vals = sample(array, psi, points.clone(), false)?;
    Ok(finish(points, vals, array, FieldMapKind::Sphere, state, radius, [n_theta, n_phi]))
}

/// Intensity on a square grid of half-width `extent`, parallel to the first
/// ring's plane and `z_offset` above the centroid. Points on an emitter are
/// masked.
pub fn plane_map(
    array: &DipoleArray,
    psi: &StateVector,
    z_offset: f64,
    extent: f64,
    n_x: usize,
    n_y: usize,
    state: &str,
) -> Result<FieldMap> {
    if n_x < 2 || n_y < 2 || !(extent > 0.0) {
        return Err(Error::InvalidArgument(format!("plane grid {n_x}x{n_y} with half-width {extent} is invalid")));
    }
    let (n, a, b) = map_frame(array);
    let c = array.centroid() + n * z_offset;
    let coord = |k: usize, m: usize| -extent + 2.0 * extent * k as f64 / (m - 1) as f64;
    let points: Vec<Vec3> = (0..n_y)
        .flat_map(|iy| (0..n_x).map(move |ix| (ix, iy)))
        .map(|(ix, iy)| c + a * coord(ix, n_x) + b * coord(iy, n_y))
        .collect();
    let vals = sample(array, psi, points.clone(), true)?;
    Ok(finish(points, vals, array, FieldMapKind::Plane, state, z_offset, [n_x, n_y]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeChoice {
    Superradiant,
    Subradiant,
}

impl ModeChoice {
    pub fn index(self, ms: &ModeSet) -> usize {
        match self {
            ModeChoice::Superradiant => ms.most_superradiant(),
            ModeChoice::Subradiant => ms.most_subradiant(),
        }
    }
}

impl std::str::FromStr for ModeChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "superradiant" | "super" => Ok(ModeChoice::Superradiant),
            "subradiant" | "sub" => Ok(ModeChoice::Subradiant),
            _ => Err(Error::InvalidArgument(format!("unknown mode choice {s:?}"))),
        }
    }
}

/// Single-excitation modes of every ring taken in isolation. Rings with a
/// frame get labelled modes, so degenerate `±m` pairs are pure spin waves.
pub fn ring_mode_sets(array: &DipoleArray) -> Result<Vec<ModeSet>> {
    (0..array.rings().len())
        .into_par_iter()
        .map(|id| match array.ring(id)?.spec() {
            Some(spec) => ring_modes(&spec),
            None => {
                let ring = array.ring_array(id)?;
                diagonalize(&effective_hamiltonian(&coupling_rates(&ring)?, Manifold::Single)?)
            }
        })
        .collect()
}

/// Equal-weight superposition of one isolated-ring eigenmode per ring,
/// embedded in the full site basis.
pub fn superposition_state(array: &DipoleArray, mode_sets: &[ModeSet], choices: &[ModeChoice]) -> Result<StateVector> {
    let rings = array.rings();
    if mode_sets.len() != rings.len() || choices.len() != rings.len() {
        return Err(Error::InvalidArgument(format!(
            "{} rings but {} mode sets and {} choices",
            rings.len(),
            mode_sets.len(),
            choices.len()
        )));
    }
    let mut amps = ndarray::Array1::zeros(array.len());
    for ((ring, ms), choice) in rings.iter().zip(mode_sets).zip(choices) {
        if ms.basis != Basis::Sites(ring.n_sites) {
            return Err(Error::InvalidArgument(format!("mode set does not match ring at offset {}", ring.offset)));
        }
        let v = ms.vector(choice.index(ms));
        for (j, c) in ring.range().zip(v.iter()) {
            amps[j] = *c;
        }
    }
    StateVector::new(amps, Basis::Sites(array.len()))?.normalized()
}
