//! Effective non-Hermitian Hamiltonian in the one- and two-excitation
//! manifolds, its eigenmodes, angular-momentum labels, and the scans built
//! on top of them.

use std::cmp::Ordering;
use std::f64::consts::TAU;

use ndarray::{Array1, Array2, ArrayView1};
use ndarray_linalg::{Eig, EigVals};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{coupling_rates, dipole_overlap, CouplingMatrices};
use crate::error::{Error, Result};
use crate::geometry::{build_ring, PolSpec, RingSpec};

/// Rates below this are numerical noise and dropped from scaling fits.
pub const GAMMA_FLOOR: f64 = 1e-15;

/// Default cap on ring size for two-excitation scans (C(40, 2) = 780 states).
pub const MANIFOLD2_MAX_SITES: usize = 40;

/// Labels are dropped when some eigenvector overlaps its best spin-wave
/// sector by less than this.
pub const LABEL_OVERLAP_MIN: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Manifold {
    Single,
    Double,
}

impl Manifold {
    pub fn excitations(self) -> u8 {
        match self {
            Manifold::Single => 1,
            Manifold::Double => 2,
        }
    }
}

impl TryFrom<u8> for Manifold {
    type Error = Error;

    fn try_from(k: u8) -> Result<Self> {
        match k {
            1 => Ok(Manifold::Single),
            2 => Ok(Manifold::Double),
            _ => Err(Error::InvalidArgument(format!("excitation manifold must be 1 or 2, got {k}"))),
        }
    }
}

/// Basis of an excitation manifold: single excited sites, or lexicographically
/// ordered site pairs `(i, j)` with `i < j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Basis {
    Sites(usize),
    Pairs(Vec<(usize, usize)>),
}

impl Basis {
    pub fn pairs(n_sites: usize) -> Self {
        Basis::Pairs((0..n_sites).flat_map(|i| (i + 1..n_sites).map(move |j| (i, j))).collect())
    }

    pub fn dim(&self) -> usize {
        match self {
            Basis::Sites(n) => *n,
            Basis::Pairs(p) => p.len(),
        }
    }

    pub fn manifold(&self) -> Manifold {
        match self {
            Basis::Sites(_) => Manifold::Single,
            Basis::Pairs(_) => Manifold::Double,
        }
    }
}

/// Position of pair `(i, j)`, `i < j`, in the lexicographic pair basis.
fn pair_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Hamiltonian {
    pub matrix: Array2<C64>,
    pub basis: Basis,
}

impl Hamiltonian {
    /// Wraps a raw single-excitation matrix.
    pub fn from_matrix(matrix: Array2<C64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidArgument(format!("Hamiltonian must be square, got {:?}", matrix.shape())));
        }
        let n = matrix.nrows();
        Ok(Self { matrix, basis: Basis::Sites(n) })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// `H = Σ (Ω_ij − iΓ_ij/2) σ_i†σ_j` restricted to one or two excitations.
///
/// In the pair basis the diagonal is `−i(Γ_ii + Γ_jj)/2` and an excitation
/// hops from `j` to `k` with amplitude `Ω_kj − iΓ_kj/2` while the partner
/// stays put; disjoint pairs do not couple.
pub fn effective_hamiltonian(c: &CouplingMatrices, manifold: Manifold) -> Result<Hamiltonian> {
    let n = c.len();
    let h = Array2::from_shape_fn((n, n), |(i, j)| c.hamiltonian_element(i, j));
    match manifold {
        Manifold::Single => Ok(Hamiltonian { matrix: h, basis: Basis::Sites(n) }),
        Manifold::Double => {
            if n < 2 {
                return Err(Error::InvalidArgument("the two-excitation manifold needs at least 2 sites".into()));
            }
            let basis = Basis::pairs(n);
            let dim = basis.dim();
            let mut m = Array2::zeros((dim, dim));
            let Basis::Pairs(pairs) = &basis else { unreachable!() };
            for (col, &(i, j)) in pairs.iter().enumerate() {
                m[[col, col]] = h[[i, i]] + h[[j, j]];
                for k in (0..n).filter(|&k| k != i && k != j) {
                    m[[pair_index(n, i, k), col]] += h[[k, j]];
                    m[[pair_index(n, j, k), col]] += h[[k, i]];
                }
            }
            Ok(Hamiltonian { matrix: m, basis })
        }
    }
}

/// Eigenmodes of an effective Hamiltonian.
///
/// Modes are stored sorted by rate, then shift, then label. Column `k` of
/// `vectors` is the unit-norm right eigenvector of mode `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSet {
    pub eigenvalues: Vec<C64>,
    /// `J_m = Re λ_m`.
    pub shifts: Vec<f64>,
    /// `Γ_m = −2 Im λ_m`.
    pub rates: Vec<f64>,
    pub vectors: Array2<C64>,
    pub labels: Option<Vec<i64>>,
    /// Smallest eigenvector overlap with its assigned spin-wave sector, when
    /// labelling was attempted.
    pub label_overlap: Option<f64>,
    pub basis: Basis,
}

impl ModeSet {
    fn new(eigenvalues: Vec<C64>, vectors: Array2<C64>, basis: Basis, labels: Option<Vec<i64>>) -> Self {
        let mut ms = ModeSet {
            shifts: eigenvalues.iter().map(|l| l.re).collect(),
            rates: eigenvalues.iter().map(|l| -2.0 * l.im).collect(),
            eigenvalues,
            vectors,
            labels,
            label_overlap: None,
            basis,
        };
        ms.sort();
        ms
    }

    fn sort(&mut self) {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.rates[a]
                .total_cmp(&self.rates[b])
                .then(self.shifts[a].total_cmp(&self.shifts[b]))
                .then_with(|| match &self.labels {
                    Some(l) => l[a].cmp(&l[b]),
                    None => Ordering::Equal,
                })
        });
        let pick = |v: &[f64]| order.iter().map(|&k| v[k]).collect::<Vec<_>>();
        self.shifts = pick(&self.shifts);
        self.rates = pick(&self.rates);
        self.eigenvalues = order.iter().map(|&k| self.eigenvalues[k]).collect();
        self.labels = self.labels.as_ref().map(|l| order.iter().map(|&k| l[k]).collect());
        self.vectors = Array2::from_shape_fn(self.vectors.dim(), |(r, c)| self.vectors[[r, order[c]]]);
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn manifold(&self) -> Manifold {
        self.basis.manifold()
    }

    pub fn vector(&self, k: usize) -> ArrayView1<'_, C64> {
        self.vectors.column(k)
    }

    /// Index of the longest-lived mode.
    pub fn most_subradiant(&self) -> usize {
        0
    }

    /// Index of the fastest-decaying mode (the first one on rate ties).
    pub fn most_superradiant(&self) -> usize {
        let max = self.rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        self.rates.iter().position(|&r| r == max).unwrap_or(0)
    }

    pub fn min_rate(&self) -> f64 {
        self.rates[0]
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Indices of the modes carrying angular momentum `m`.
    pub fn modes_with_label(&self, m: i64) -> Vec<usize> {
        match &self.labels {
            Some(l) => (0..l.len()).filter(|&k| l[k] == m).collect(),
            None => Vec::new(),
        }
    }
}

fn matrix_diagnostics(h: &Array2<C64>) -> String {
    let max = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let frob = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let finite = h.iter().all(|z| z.re.is_finite() && z.im.is_finite());
    format!("dim {}, max |H_ij| {max:e}, Frobenius norm {frob:e}, all finite: {finite}", h.nrows())
}

/// Full dense non-Hermitian eigendecomposition.
pub fn diagonalize(h: &Hamiltonian) -> Result<ModeSet> {
    if !h.matrix.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::numerical("non-finite Hamiltonian entries", matrix_diagnostics(&h.matrix)));
    }
    let (values, mut vectors) = h
        .matrix
        .eig()
        .map_err(|e| Error::numerical(format!("eigensolver failed: {e}"), matrix_diagnostics(&h.matrix)))?;
    for mut col in vectors.columns_mut() {
        let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        col.mapv_inplace(|z| z / norm);
    }
    Ok(ModeSet::new(values.to_vec(), vectors, h.basis.clone(), None))
}

/// Eigenvalues only, for scans that need just the rates.
pub fn eigenvalues(h: &Hamiltonian) -> Result<Vec<C64>> {
    h.matrix
        .eigvals()
        .map(|v| v.to_vec())
        .map_err(|e| Error::numerical(format!("eigensolver failed: {e}"), matrix_diagnostics(&h.matrix)))
}

/// Angular momenta of a ring of `n` sites: `0, ±1, …, ±⌊(N−1)/2⌋`, plus
/// `N/2` for even `N`, in ascending order.
pub fn ring_momenta(n: usize) -> Vec<i64> {
    let half = ((n as i64) - 1) / 2;
    let mut m: Vec<i64> = (-half..=half).collect();
    if n.is_multiple_of(2) {
        m.push(n as i64 / 2);
    }
    m
}

/// Exciton quasi-momentum in units of 1/d: `k_m d = 2πm/N`.
pub fn exciton_momentum(m: i64, n: usize) -> f64 {
    TAU * m as f64 / n as f64
}

/// `ψ_m(j) = e^{imθ_j}/√N` with `θ_j = 2πj/N`.
pub fn spin_wave(n: usize, m: i64) -> Array1<C64> {
    let norm = (n as f64).sqrt();
    Array1::from_shape_fn(n, |j| C64::from_polar(1.0 / norm, m as f64 * TAU * j as f64 / n as f64))
}

/// Closed-form spectrum of a rotationally symmetric ring.
///
/// The effective Hamiltonian of such a ring is circulant, so the spin waves
/// diagonalize it and
/// `λ_m = −iΓ0/2 − (3Γ0/4) Σ_{s≠0} e^{imθ_s} μ_0*·G(r_0 − r_s)·μ_s`,
/// evaluated straight from the Green's tensor.
pub fn analytic_ring_spectrum(spec: &RingSpec) -> Result<ModeSet> {
    let array = build_ring(spec)?;
    let n = spec.n_sites;
    let gamma0 = array.gamma0();
    let row: Vec<C64> = (0..n)
        .map(|s| {
            if s == 0 {
                Ok(C64::new(0.0, -0.5 * gamma0))
            } else {
                Ok(-0.75 * gamma0 * dipole_overlap(&array, 0, s)?)
            }
        })
        .collect::<Result<_>>()?;
    let momenta = ring_momenta(n);
    let eigenvalues = momenta
        .iter()
        .map(|&m| {
            row.iter()
                .enumerate()
                .map(|(s, h)| h * C64::from_polar(1.0, m as f64 * TAU * s as f64 / n as f64))
                .sum()
        })
        .collect();
    let mut vectors = Array2::zeros((n, n));
    for (k, &m) in momenta.iter().enumerate() {
        vectors.column_mut(k).assign(&spin_wave(n, m));
    }
    let mut ms = ModeSet::new(eigenvalues, vectors, Basis::Sites(n), Some(momenta));
    ms.label_overlap = Some(1.0);
    Ok(ms)
}

/// Assigns angular-momentum labels to numerically obtained single-ring
/// modes.
///
/// Each eigenvector is matched to the spin-wave sector `{ψ_m, ψ_−m}` it
/// overlaps most; the sign goes to whichever of `±m` dominates. Exactly
/// degenerate `±m` pairs are replaced by the pure spin waves. If some
/// overlap falls below [`LABEL_OVERLAP_MIN`] the labels are omitted and the
/// offending overlap is reported in `label_overlap`.
pub fn label_modes(ms: ModeSet, spec: &RingSpec) -> Result<ModeSet> {
    let n = spec.n_sites;
    if ms.basis != Basis::Sites(n) {
        return Err(Error::InvalidArgument(format!(
            "labelling needs single-excitation modes of a {n}-site ring"
        )));
    }
    let momenta = ring_momenta(n);
    let waves: Vec<Array1<C64>> = momenta.iter().map(|&m| spin_wave(n, m)).collect();
    let sector = |m: i64| m.unsigned_abs() as usize;
    let n_sectors = n / 2 + 1;
    let capacity = |s: usize| if s == 0 || 2 * s == n { 1 } else { 2 };

    // amp[k][q] = <ψ_{m_q} | v_k>
    let amp: Vec<Vec<C64>> = (0..ms.len())
        .map(|k| {
            let v = ms.vector(k);
            waves.iter().map(|w| w.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum()).collect()
        })
        .collect();
    let weight = |k: usize, s: usize| -> f64 {
        momenta.iter().enumerate().filter(|(_, &m)| sector(m) == s).map(|(q, _)| amp[k][q].norm_sqr()).sum()
    };

    let mut candidates: Vec<(f64, usize, usize)> =
        (0..ms.len()).flat_map(|k| (0..n_sectors).map(move |s| (k, s))).map(|(k, s)| (weight(k, s), k, s)).collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assigned: Vec<Option<(usize, f64)>> = vec![None; ms.len()];
    let mut used = vec![0usize; n_sectors];
    for (w, k, s) in candidates {
        if assigned[k].is_none() && used[s] < capacity(s) {
            assigned[k] = Some((s, w));
            used[s] += 1;
        }
    }
    let min_overlap = assigned.iter().map(|a| a.map_or(0.0, |(_, w)| w.sqrt())).fold(1.0, f64::min);

    let mut out = ms;
    if min_overlap < LABEL_OVERLAP_MIN {
        log::warn!("mode labels omitted: spin-wave overlap {min_overlap:.3} below {LABEL_OVERLAP_MIN}");
        out.labels = None;
        out.label_overlap = Some(min_overlap);
        return Ok(out);
    }

    let index_of = |m: i64| momenta.iter().position(|&x| x == m).unwrap();
    let mut labels = vec![0i64; out.len()];
    for s in 0..n_sectors {
        let members: Vec<usize> = (0..out.len()).filter(|&k| assigned[k].map(|a| a.0) == Some(s)).collect();
        match members.as_slice() {
            [k] => labels[*k] = if 2 * s == n { n as i64 / 2 } else { s as i64 },
            [a, b] => {
                let m = s as i64;
                let pref = |k: usize| amp[k][index_of(m)].norm_sqr() - amp[k][index_of(-m)].norm_sqr();
                let (plus, minus) = if pref(*a) >= pref(*b) { (*a, *b) } else { (*b, *a) };
                labels[plus] = m;
                labels[minus] = -m;
                let (la, lb) = (out.eigenvalues[plus], out.eigenvalues[minus]);
                let degenerate = (la - lb).norm() <= 1e-9 * la.norm().max(1.0);
                let pure = assigned[plus].unwrap().1 >= 1.0 - 1e-9 && assigned[minus].unwrap().1 >= 1.0 - 1e-9;
                if degenerate && pure {
                    out.vectors.column_mut(plus).assign(&waves[index_of(m)]);
                    out.vectors.column_mut(minus).assign(&waves[index_of(-m)]);
                }
            }
            _ => {}
        }
    }
    out.labels = Some(labels);
    out.label_overlap = Some(min_overlap);
    out.sort();
    Ok(out)
}

/// Tilt angle at which all collective shifts of a dense ring vanish,
/// `cos φ = 1/√(3β²)`; exists only for `β ≥ 1/√3`.
pub fn magic_angle(beta: f64) -> Option<f64> {
    if !(0.0..=1.0).contains(&beta) || 3.0 * beta * beta < 1.0 - 1e-12 {
        return None;
    }
    Some((1.0 / (3f64.sqrt() * beta)).min(1.0).acos())
}

/// Numerically diagonalized and labelled single-excitation modes of a ring.
pub fn ring_modes(spec: &RingSpec) -> Result<ModeSet> {
    let array = build_ring(spec)?;
    let h = effective_hamiltonian(&coupling_rates(&array)?, Manifold::Single)?;
    label_modes(diagonalize(&h)?, spec)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleSweepRow {
    pub n: usize,
    pub d: f64,
    pub phi: f64,
    pub m: i64,
    pub shift: f64,
    pub rate: f64,
}

/// Shifts and rates of every labelled mode as the dipoles are tilted through
/// `phis`, keeping the template's in-plane weights α, β.
pub fn angle_sweep(template: &RingSpec, phis: &[f64]) -> Result<Vec<AngleSweepRow>> {
    if phis.is_empty() {
        return Err(Error::InvalidArgument("angle grid is empty".into()));
    }
    let per_phi: Vec<Vec<AngleSweepRow>> = phis
        .par_iter()
        .map(|&phi| {
            let pol = PolSpec::new(template.pol.alpha, template.pol.beta, phi)?;
            let spec = template.with_pol(pol);
            let ms = ring_modes(&spec)?;
            let labels = ms.labels.clone().ok_or_else(|| {
                Error::numerical("could not label ring modes", format!("phi {phi}, overlap {:?}", ms.label_overlap))
            })?;
            let mut rows: Vec<AngleSweepRow> = (0..ms.len())
                .map(|k| AngleSweepRow {
                    n: spec.n_sites,
                    d: spec.spacing,
                    phi,
                    m: labels[k],
                    shift: ms.shifts[k],
                    rate: ms.rates[k],
                })
                .collect();
            rows.sort_by_key(|r| r.m);
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(per_phi.into_iter().flatten().collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub d: f64,
    pub gamma_min: f64,
    pub manifold: u8,
}

/// Least-squares fit of `ln Γ_min = c − ξ N` at one spacing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiFit {
    pub d: f64,
    pub xi: f64,
    pub r2: f64,
    pub n_points: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalingResult {
    /// Retained rows, ordered by spacing then ring size.
    pub table: Vec<ScalingRow>,
    pub fits: Vec<XiFit>,
    /// Spacings with fewer than three retained points.
    pub unfitted: Vec<f64>,
    /// Number of rows dropped below [`GAMMA_FLOOR`].
    pub dropped: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some(LinearFit { slope, intercept, r2 })
}

/// Smallest decay rate of an `n`-site ring in the given manifold.
///
/// Single excitations use the closed-form circulant spectrum; pairs are
/// diagonalized densely.
pub fn min_decay_rate(n: usize, d: f64, manifold: Manifold, pol: PolSpec) -> Result<f64> {
    let spec = RingSpec::new(n, d, pol);
    match manifold {
        Manifold::Single => Ok(analytic_ring_spectrum(&spec)?.min_rate()),
        Manifold::Double => {
            let array = build_ring(&spec)?;
            let h = effective_hamiltonian(&coupling_rates(&array)?, Manifold::Double)?;
            Ok(eigenvalues(&h)?.iter().map(|l| -2.0 * l.im).fold(f64::INFINITY, f64::min))
        }
    }
}

/// Minimal decay rate over a grid of ring sizes and spacings, with a
/// per-spacing exponential fit `Γ_min ∝ exp(−ξN)` for single excitations.
pub fn min_decay_scan(ns: &[usize], ds: &[f64], manifold: Manifold, pol: PolSpec) -> Result<ScalingResult> {
    if ns.is_empty() || ds.is_empty() {
        return Err(Error::InvalidArgument("scan grids must be nonempty".into()));
    }
    if manifold == Manifold::Double {
        if let Some(&n) = ns.iter().find(|&&n| n > MANIFOLD2_MAX_SITES) {
            return Err(Error::InvalidArgument(format!(
                "two-excitation scans are capped at N = {MANIFOLD2_MAX_SITES}, got {n}"
            )));
        }
    }
    let grid: Vec<(f64, usize)> = ds.iter().flat_map(|&d| ns.iter().map(move |&n| (d, n))).collect();
    let rates: Vec<f64> = grid
        .par_iter()
        .map(|&(d, n)| min_decay_rate(n, d, manifold, pol))
        .collect::<Result<_>>()?;

    let mut result = ScalingResult::default();
    for (&(d, n), &gamma_min) in grid.iter().zip(&rates) {
        if gamma_min < GAMMA_FLOOR {
            result.dropped += 1;
        } else {
            result.table.push(ScalingRow { n, d, gamma_min, manifold: manifold.excitations() });
        }
    }
    if manifold == Manifold::Single {
        for &d in ds {
            let rows: Vec<&ScalingRow> = result.table.iter().filter(|r| r.d == d).collect();
            let x: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
            let y: Vec<f64> = rows.iter().map(|r| r.gamma_min.ln()).collect();
            match (rows.len() >= 3).then(|| linear_fit(&x, &y)).flatten() {
                Some(fit) => result.fits.push(XiFit { d, xi: -fit.slope, r2: fit.r2, n_points: rows.len() }),
                None => {
                    log::warn!("xi fit omitted at d = {d}: {} retained points", rows.len());
                    result.unfitted.push(d);
                }
            }
        }
    }
    Ok(result)
}
