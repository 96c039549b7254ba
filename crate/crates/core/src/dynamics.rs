//! Pure-state evolution under the effective Hamiltonian, disorder-averaged
//! decay, and ring-to-ring wave-packet transfer.

use ndarray::{Array1, Array2, ArrayView1};
use ndarray_linalg::{Eig, Inverse};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{coupling_rates, CouplingMatrices};
use crate::error::{Error, Result};
use crate::geometry::{apply_disorder, build_ring, realization_seed, DipoleArray, DisorderKind, RingSpec};
use crate::spectrum::{diagonalize, effective_hamiltonian, Basis, Hamiltonian, Manifold};

/// Eigenvector matrices worse conditioned than this are treated as
/// defective and propagated with the matrix exponential instead.
pub const MAX_CONDITION: f64 = 1e12;

/// Amplitudes of a pure state together with the time it refers to (1/Γ0).
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub amplitudes: Array1<C64>,
    pub basis: Basis,
    pub time: f64,
}

impl StateVector {
    pub fn new(amplitudes: Array1<C64>, basis: Basis) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::InvalidArgument(format!(
                "{} amplitudes for a basis of dimension {}",
                amplitudes.len(),
                basis.dim()
            )));
        }
        Ok(Self { amplitudes, basis, time: 0.0 })
    }

    /// Single excitation localized on `site`.
    pub fn site(n_sites: usize, site: usize) -> Self {
        let mut a = Array1::zeros(n_sites);
        a[site] = C64::new(1.0, 0.0);
        Self { amplitudes: a, basis: Basis::Sites(n_sites), time: 0.0 }
    }

    pub fn from_vector(v: ArrayView1<'_, C64>, basis: Basis) -> Result<Self> {
        Self::new(v.to_owned(), basis)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// `‖ψ‖²`, the total excited-state population.
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) {
            return Err(Error::InvalidArgument("cannot normalize a zero state".into()));
        }
        self.amplitudes.mapv_inplace(|z| z / n);
        Ok(self)
    }

    /// `⟨φ|ψ⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes.iter().zip(other.amplitudes.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    /// Probability that `site` is excited.
    pub fn population(&self, site: usize) -> f64 {
        match &self.basis {
            Basis::Sites(_) => self.amplitudes[site].norm_sqr(),
            Basis::Pairs(p) => p
                .iter()
                .zip(self.amplitudes.iter())
                .filter(|((i, j), _)| *i == site || *j == site)
                .map(|(_, z)| z.norm_sqr())
                .sum(),
        }
    }

    /// Instantaneous loss rate `⟨ψ|Γ|ψ⟩ = −d‖ψ‖²/dt` of a single-excitation
    /// state.
    pub fn decay_rate(&self, c: &CouplingMatrices) -> Result<f64> {
        if self.basis != Basis::Sites(c.len()) {
            return Err(Error::InvalidArgument("decay rate needs a single-excitation state of matching size".into()));
        }
        let a = &self.amplitudes;
        let gpsi = c.gamma.mapv(|g| C64::new(g, 0.0)).dot(a);
        Ok(a.iter().zip(gpsi.iter()).map(|(x, y)| x.conj() * y).sum::<C64>().re)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PropagationMethod {
    /// `V e^{−iΛt} V⁻¹`.
    Eigen,
    /// Scaling-and-squaring Taylor exponential, stepped between grid points.
    Expm,
}

/// Time-evolution operator of a fixed effective Hamiltonian.
#[derive(Clone, Debug)]
pub struct Propagator {
    matrix: Array2<C64>,
    basis: Basis,
    method: PropagationMethod,
    eigen: Option<(Array1<C64>, Array2<C64>, Array2<C64>)>,
    condition: Option<f64>,
}

fn one_norm(a: &Array2<C64>) -> f64 {
    a.columns().into_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Dense matrix exponential by scaling and squaring of a Taylor series.
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    let norm = one_norm(a);
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a.mapv(|z| z / 2f64.powi(s));
    let mut result = Array2::<C64>::eye(n);
    let mut term = Array2::<C64>::eye(n);
    for k in 1..=40 {
        term = term.dot(&scaled).mapv(|z| z / k as f64);
        result += &term;
        if one_norm(&term) <= f64::EPSILON * 1e-3 * one_norm(&result) {
            break;
        }
    }
    for _ in 0..s {
        result = result.dot(&result);
    }
    result
}

impl Propagator {
    /// Eigendecomposition-based propagator, falling back to the matrix
    /// exponential when the eigenvectors are nearly dependent.
    pub fn new(h: &Hamiltonian) -> Result<Self> {
        let m = &h.matrix;
        if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::numerical("non-finite Hamiltonian entries", format!("dim {}", m.nrows())));
        }
        let attempt = m.eig().ok().and_then(|(vals, vecs)| {
            let inv = vecs.inv().ok()?;
            let cond = one_norm(&vecs) * one_norm(&inv);
            Some((vals, vecs, inv, cond))
        });
        match attempt {
            Some((vals, vecs, inv, cond)) if cond.is_finite() && cond <= MAX_CONDITION => Ok(Self {
                matrix: m.clone(),
                basis: h.basis.clone(),
                method: PropagationMethod::Eigen,
                eigen: Some((vals, vecs, inv)),
                condition: Some(cond),
            }),
            other => {
                let cond = other.map(|o| o.3);
                log::warn!(
                    "eigenvector matrix condition number {} exceeds {MAX_CONDITION:e}; using matrix-exponential stepping",
                    cond.map_or("n/a".to_string(), |c| format!("{c:e}"))
                );
                Ok(Self::expm_only(h, cond))
            }
        }
    }

    /// Propagator that always steps with the matrix exponential.
    pub fn with_expm(h: &Hamiltonian) -> Self {
        Self::expm_only(h, None)
    }

    fn expm_only(h: &Hamiltonian, condition: Option<f64>) -> Self {
        Self {
            matrix: h.matrix.clone(),
            basis: h.basis.clone(),
            method: PropagationMethod::Expm,
            eigen: None,
            condition,
        }
    }

    pub fn method(&self) -> PropagationMethod {
        self.method
    }

    /// `‖V‖₁‖V⁻¹‖₁` of the eigenvector matrix, when it could be formed.
    pub fn condition_number(&self) -> Option<f64> {
        self.condition
    }

    /// `ψ(t)` for every `t` in `times` (ascending, starting at 0).
    pub fn trajectory(&self, psi0: &StateVector, times: &[f64]) -> Result<Vec<StateVector>> {
        check_times(times)?;
        if psi0.dim() != self.matrix.nrows() {
            return Err(Error::InvalidArgument(format!(
                "state of dimension {} for a Hamiltonian of dimension {}",
                psi0.dim(),
                self.matrix.nrows()
            )));
        }
        let states: Vec<Array1<C64>> = match &self.eigen {
            Some((vals, vecs, inv)) => {
                let c = inv.dot(&psi0.amplitudes);
                times
                    .iter()
                    .map(|&t| {
                        let phased: Array1<C64> =
                            vals.iter().zip(c.iter()).map(|(l, ci)| ci * (C64::new(0.0, -t) * l).exp()).collect();
                        vecs.dot(&phased)
                    })
                    .collect()
            }
            None => {
                let mut out = Vec::with_capacity(times.len());
                let mut psi = psi0.amplitudes.clone();
                let mut last = 0.0;
                for &t in times {
                    if t > last {
                        let step = expm(&self.matrix.mapv(|h| C64::new(0.0, -(t - last)) * h));
                        psi = step.dot(&psi);
                        last = t;
                    }
                    out.push(psi.clone());
                }
                out
            }
        };
        states
            .into_iter()
            .zip(times)
            .map(|(a, &t)| {
                if !a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::numerical("non-finite amplitudes during evolution", format!("t = {t}")));
                }
                Ok(StateVector { amplitudes: a, basis: self.basis.clone(), time: t })
            })
            .collect()
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.first() != Some(&0.0) {
        return Err(Error::InvalidArgument("time grid must start at 0".into()));
    }
    if !times.iter().all(|t| t.is_finite()) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("time grid must be finite and ascending".into()));
    }
    Ok(())
}

/// `ψ(t) = e^{−iHt} ψ0` on a time grid.
pub fn evolve(h: &Hamiltonian, psi0: &StateVector, times: &[f64]) -> Result<Vec<StateVector>> {
    Propagator::new(h)?.trajectory(psi0, times)
}

/// `0` followed by `n` log-spaced points from `t_min` to `t_max`.
pub fn geometric_times(t_min: f64, t_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max > t_min) || n < 2 {
        return Err(Error::InvalidArgument(format!("bad geometric grid [{t_min}, {t_max}] with {n} points")));
    }
    let (a, b) = (t_min.ln(), t_max.ln());
    let mut t = vec![0.0];
    t.extend((0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()));
    Ok(t)
}

/// `n` equally spaced points from 0 to `t_max`.
pub fn linear_times(t_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(t_max > 0.0) || n < 2 {
        return Err(Error::InvalidArgument(format!("bad linear grid [0, {t_max}] with {n} points")));
    }
    Ok((0..n).map(|k| t_max * k as f64 / (n - 1) as f64).collect())
}

/// Default grid for decay studies: 1e-3 … 1e4 in units of 1/Γ0.
pub fn default_decay_times() -> Vec<f64> {
    geometric_times(1e-3, 1e4, 71).expect("valid grid")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayCurve {
    pub times: Vec<f64>,
    pub population: Vec<f64>,
    pub n_realizations: usize,
    pub kind: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderStudy {
    pub curve: DecayCurve,
    pub reference: DecayCurve,
    /// Realizations that aborted with an error.
    pub failed: usize,
}

fn subradiant_population(array: &DipoleArray, times: &[f64]) -> Result<Vec<f64>> {
    let h = effective_hamiltonian(&coupling_rates(array)?, Manifold::Single)?;
    let ms = diagonalize(&h)?;
    let psi0 = StateVector::from_vector(ms.vector(ms.most_subradiant()), ms.basis.clone())?;
    Ok(evolve(&h, &psi0, times)?.iter().map(|s| s.norm_sqr()).collect())
}

/// Mean of per-realization curves, summed in index order. Fails when more
/// than 10 % of the runs abort; returns the mean and the number of aborts.
fn average_realizations<F>(n_real: usize, len: usize, run: F) -> Result<(Vec<f64>, usize)>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync + Send,
{
    let runs: Vec<Result<Vec<f64>>> = (0..n_real).into_par_iter().map(run).collect();
    let failed = runs.iter().filter(|r| r.is_err()).count();
    if failed * 10 > n_real {
        let first = runs.iter().find_map(|r| r.as_ref().err()).map(|e| e.to_string()).unwrap_or_default();
        return Err(Error::Study { failed, total: n_real, first });
    }
    for (i, r) in runs.iter().enumerate() {
        if let Err(e) = r {
            log::warn!("realization {i} aborted: {e}");
        }
    }
    let mut sum = vec![0.0; len];
    for pop in runs.iter().filter_map(|r| r.as_ref().ok()) {
        sum.iter_mut().zip(pop).for_each(|(s, p)| *s += p);
    }
    let ok = (n_real - failed) as f64;
    Ok((sum.into_iter().map(|s| s / ok).collect(), failed))
}

/// Excited-state population of the most subradiant mode, averaged over
/// disorder realizations, alongside the unperturbed ring's curve.
///
/// Realization `i` draws its displacements from `realization_seed(seed, i)`.
/// The study fails when more than 10 % of the realizations abort.
pub fn disorder_decay_study(
    spec: &RingSpec,
    kind: DisorderKind,
    max_shift: f64,
    n_real: usize,
    seed: u64,
    times: &[f64],
) -> Result<DisorderStudy> {
    if n_real == 0 {
        return Err(Error::InvalidArgument("at least one realization is required".into()));
    }
    check_times(times)?;
    let ring = build_ring(spec)?;
    let reference = subradiant_population(&ring, times)?;
    let (mean, failed) = average_realizations(n_real, times.len(), |i| {
        let disordered = apply_disorder(&ring, kind, max_shift, realization_seed(seed, i as u64))?;
        subradiant_population(&disordered, times)
    })?;
    let ok = n_real - failed;
    Ok(DisorderStudy {
        curve: DecayCurve {
            times: times.to_vec(),
            population: mean,
            n_realizations: ok,
            kind: kind.to_string(),
        },
        reference: DecayCurve {
            times: times.to_vec(),
            population: reference,
            n_realizations: 1,
            kind: "unperturbed".into(),
        },
        failed,
    })
}

/// Gaussian wave packet of angular momentum `m` on one ring, centred on
/// global site `k`:
/// `c_j ∝ e^{imθ_j} exp(−|r_j − r_k|² / (2R²Δθ²))`.
pub fn gaussian_wavepacket(array: &DipoleArray, ring_id: usize, m: i64, k: usize, dtheta: f64) -> Result<StateVector> {
    let ring = array.ring(ring_id)?;
    if !ring.contains(k) {
        return Err(Error::InvalidArgument(format!("site {k} is not on ring {ring_id}")));
    }
    if !(dtheta > 0.0) {
        return Err(Error::InvalidArgument(format!("packet width must be positive, got {dtheta}")));
    }
    let radius = ring
        .frame
        .as_ref()
        .map(|f| f.radius)
        .ok_or_else(|| Error::InvalidArgument(format!("group {ring_id} is not a ring")))?;
    let pos = array.positions();
    let width = 2.0 * (radius * dtheta).powi(2);
    let mut a = Array1::zeros(array.len());
    for j in ring.range() {
        let envelope = (-(pos[j] - pos[k]).norm_squared() / width).exp();
        a[j] = C64::from_polar(envelope, m as f64 * ring.spin_angle(j));
    }
    StateVector::new(a, Basis::Sites(array.len()))?.normalized()
}

/// `Σ_{j∈ring} |c_j|²`.
pub fn ring_population(array: &DipoleArray, psi: &StateVector, ring_id: usize) -> Result<f64> {
    let ring = array.ring(ring_id)?;
    if psi.basis != Basis::Sites(array.len()) {
        return Err(Error::InvalidArgument("ring population needs a single-excitation state of the array".into()));
    }
    Ok(ring.range().map(|j| psi.amplitudes[j].norm_sqr()).sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferCurve {
    pub times: Vec<f64>,
    pub fidelity: Vec<f64>,
    /// Ring-2 population.
    pub population: Vec<f64>,
    /// Ring-2 site whose packet attains the fidelity at each time.
    pub best_site: Vec<usize>,
}

impl TransferCurve {
    pub fn max_fidelity(&self) -> f64 {
        self.fidelity.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_population(&self) -> f64 {
        self.population.iter().cloned().fold(0.0, f64::max)
    }
}

/// Transfer of a packet with momentum `m` from ring 0 to ring 1, scored
/// against packets of momentum `−m` on ring 1.
pub fn transfer_fidelity(system: &DipoleArray, m: i64, dtheta: f64, times: &[f64]) -> Result<TransferCurve> {
    transfer_fidelity_to(system, m, -m, dtheta, times)
}

/// `F(t) = max_k |⟨Ψ_{2,k}^{m_target}|ψ(t)⟩|`, starting from a packet on the
/// ring-0 site farthest from ring 1.
pub fn transfer_fidelity_to(
    system: &DipoleArray,
    m: i64,
    target_m: i64,
    dtheta: f64,
    times: &[f64],
) -> Result<TransferCurve> {
    if system.rings().len() != 2 {
        return Err(Error::InvalidArgument(format!("transfer needs two rings, got {}", system.rings().len())));
    }
    let pos = system.positions();
    let (r1, r2) = (system.ring(0)?, system.ring(1)?);
    let centre2 = r2.range().map(|j| pos[j]).sum::<nalgebra::Vector3<f64>>() / r2.n_sites as f64;
    let start = r1
        .range()
        .max_by(|&a, &b| (pos[a] - centre2).norm().total_cmp(&(pos[b] - centre2).norm()))
        .expect("nonempty ring");
    let psi0 = gaussian_wavepacket(system, 0, m, start, dtheta)?;
    let targets: Vec<StateVector> =
        r2.range().map(|k| gaussian_wavepacket(system, 1, target_m, k, dtheta)).collect::<Result<_>>()?;
    let h = effective_hamiltonian(&coupling_rates(system)?, Manifold::Single)?;
    let traj = evolve(&h, &psi0, times)?;
    let mut curve = TransferCurve {
        times: times.to_vec(),
        fidelity: Vec::with_capacity(times.len()),
        population: Vec::with_capacity(times.len()),
        best_site: Vec::with_capacity(times.len()),
    };
    for psi in &traj {
        let (k, f) = targets
            .iter()
            .enumerate()
            .map(|(k, t)| (k, t.inner(psi).norm()))
            .fold((0, f64::NEG_INFINITY), |best, x| if x.1 > best.1 { x } else { best });
        curve.fidelity.push(f);
        curve.best_site.push(r2.offset + k);
        curve.population.push(ring_population(system, psi, 1)?);
    }
    Ok(curve)
}
