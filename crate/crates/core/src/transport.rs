//! Mode-to-mode couplings between two rings and the resulting transfer
//! efficiency.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{coupling_rates, CouplingMatrices};
use crate::error::{Error, Result};
use crate::geometry::{two_ring_layout, DipoleArray, PolSpec, RingSpec};
use crate::spectrum::{analytic_ring_spectrum, ring_momenta, ModeSet};

fn check_two_rings(system: &DipoleArray) -> Result<()> {
    if system.rings().len() != 2 {
        return Err(Error::InvalidArgument(format!("expected two rings, got {}", system.rings().len())));
    }
    Ok(())
}

fn check_label(m: i64, n: usize, ring: usize) -> Result<()> {
    if !ring_momenta(n).contains(&m) {
        return Err(Error::InvalidArgument(format!("m = {m} is not a mode of ring {ring} with {n} sites")));
    }
    Ok(())
}

/// `λ_{m1,m2} = (N1N2)^{−1/2} Σ_{i∈R1, j∈R2} (Ω_ij − iΓ_ij/2) e^{i(m1θ_i − m2θ_j)}`.
pub fn mode_coupling(system: &DipoleArray, m1: i64, m2: i64) -> Result<C64> {
    check_two_rings(system)?;
    mode_coupling_with(system, &coupling_rates(system)?, m1, m2)
}

/// [`mode_coupling`] with precomputed site couplings.
pub fn mode_coupling_with(system: &DipoleArray, c: &CouplingMatrices, m1: i64, m2: i64) -> Result<C64> {
    check_two_rings(system)?;
    if c.len() != system.len() {
        return Err(Error::InvalidArgument("coupling matrices do not match the system".into()));
    }
    let (r1, r2) = (system.ring(0)?, system.ring(1)?);
    check_label(m1, r1.n_sites, 0)?;
    check_label(m2, r2.n_sites, 1)?;
    let phase2: Vec<C64> = r2.range().map(|j| C64::from_polar(1.0, -(m2 as f64) * r2.spin_angle(j))).collect();
    let sum: C64 = r1
        .range()
        .map(|i| {
            let p1 = C64::from_polar(1.0, m1 as f64 * r1.spin_angle(i));
            p1 * r2.range().zip(&phase2).map(|(j, p2)| c.hamiltonian_element(i, j) * p2).sum::<C64>()
        })
        .sum();
    Ok(sum / ((r1.n_sites * r2.n_sites) as f64).sqrt())
}

/// `η = J²/(4Δ² + max(Γ_{m1}², Γ_{m2}²))` with `Δ = J_{m1} − J_{m2}`.
///
/// `J = 0` gives 0; a vanishing denominator otherwise gives `+∞`.
pub fn coupling_efficiency(j: f64, shift1: f64, shift2: f64, rate1: f64, rate2: f64) -> f64 {
    if j == 0.0 {
        return 0.0;
    }
    let delta = shift1 - shift2;
    let den = 4.0 * delta * delta + (rate1 * rate1).max(rate2 * rate2);
    if den == 0.0 {
        f64::INFINITY
    } else {
        j * j / den
    }
}

/// Couplings and efficiencies for every pair of single-ring modes.
///
/// Row `a` refers to `m1_values[a]`, column `b` to `m2_values[b]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeCouplingTable {
    pub m1_values: Vec<i64>,
    pub m2_values: Vec<i64>,
    pub j: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub eta: Vec<Vec<f64>>,
    /// Entries whose efficiency hit the zero-denominator guard.
    pub flagged: Vec<(i64, i64)>,
}

impl ModeCouplingTable {
    pub fn eta_at(&self, m1: i64, m2: i64) -> Option<f64> {
        let a = self.m1_values.iter().position(|&m| m == m1)?;
        let b = self.m2_values.iter().position(|&m| m == m2)?;
        Some(self.eta[a][b])
    }

    /// Largest finite efficiency and where it occurs.
    pub fn eta_max(&self) -> Option<(f64, i64, i64)> {
        let mut best: Option<(f64, i64, i64)> = None;
        for (a, row) in self.eta.iter().enumerate() {
            for (b, &e) in row.iter().enumerate() {
                if e.is_finite() && best.is_none_or(|x| e > x.0) {
                    best = Some((e, self.m1_values[a], self.m2_values[b]));
                }
            }
        }
        best
    }
}

fn ring_spectra(system: &DipoleArray) -> Result<(ModeSet, ModeSet)> {
    let spec = |id: usize| {
        system.ring(id)?.spec().ok_or_else(|| Error::InvalidArgument(format!("group {id} is not a ring")))
    };
    Ok((analytic_ring_spectrum(&spec(0)?)?, analytic_ring_spectrum(&spec(1)?)?))
}

fn shift_and_rate(ms: &ModeSet, m: i64) -> (f64, f64) {
    let k = ms.modes_with_label(m)[0];
    (ms.shifts[k], ms.rates[k])
}

/// Full `(m1, m2)` table of a two-ring system.
pub fn coupling_table(system: &DipoleArray) -> Result<ModeCouplingTable> {
    check_two_rings(system)?;
    let c = coupling_rates(system)?;
    let (ms1, ms2) = ring_spectra(system)?;
    let m1_values = ring_momenta(system.ring(0)?.n_sites);
    let m2_values = ring_momenta(system.ring(1)?.n_sites);
    let rows: Vec<Vec<(C64, f64, bool)>> = m1_values
        .par_iter()
        .map(|&m1| {
            let (s1, g1) = shift_and_rate(&ms1, m1);
            m2_values
                .iter()
                .map(|&m2| {
                    let lambda = mode_coupling_with(system, &c, m1, m2)?;
                    let (s2, g2) = shift_and_rate(&ms2, m2);
                    let eta = coupling_efficiency(lambda.re, s1, s2, g1, g2);
                    Ok((lambda, eta, eta.is_infinite()))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut flagged = Vec::new();
    for (a, row) in rows.iter().enumerate() {
        for (b, x) in row.iter().enumerate() {
            if x.2 {
                flagged.push((m1_values[a], m2_values[b]));
            }
        }
    }
    if !flagged.is_empty() {
        log::warn!("{} efficiency entries have a vanishing denominator", flagged.len());
    }
    Ok(ModeCouplingTable {
        j: rows.iter().map(|r| r.iter().map(|x| x.0.re).collect()).collect(),
        g: rows.iter().map(|r| r.iter().map(|x| -2.0 * x.0.im).collect()).collect(),
        eta: rows.iter().map(|r| r.iter().map(|x| x.1).collect()).collect(),
        m1_values,
        m2_values,
        flagged,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub x: f64,
    pub eta_max: f64,
}

/// Efficiency of the `m1 = ⌊N1/2⌋`, `m2 = ⌊N2/2⌋` channel versus ring gap.
pub fn efficiency_sweep(spec1: &RingSpec, spec2: &RingSpec, xs: &[f64], pol: PolSpec) -> Result<Vec<SweepPoint>> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument("separation grid is empty".into()));
    }
    let (s1, s2) = (spec1.with_pol(pol), spec2.with_pol(pol));
    let (m1, m2) = ((s1.n_sites / 2) as i64, (s2.n_sites / 2) as i64);
    let (sh1, g1) = shift_and_rate(&analytic_ring_spectrum(&s1)?, m1);
    let (sh2, g2) = shift_and_rate(&analytic_ring_spectrum(&s2)?, m2);
    xs.par_iter()
        .map(|&x| {
            let system = two_ring_layout(&s1, &s2, x)?;
            let lambda = mode_coupling(&system, m1, m2)?;
            Ok(SweepPoint { x, eta_max: coupling_efficiency(lambda.re, sh1, sh2, g1, g2) })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pair(n1: usize, n2: usize, d: f64, x: f64, pol: PolSpec) -> DipoleArray {
        two_ring_layout(&RingSpec::new(n1, d, pol), &RingSpec::new(n2, d, pol), x).unwrap()
    }

    #[test]
    fn efficiency_guards() {
        assert_eq!(coupling_efficiency(0.0, 1.0, 1.0, 0.0, 0.0), 0.0);
        assert_eq!(coupling_efficiency(0.3, 1.0, 1.0, 0.0, 0.0), f64::INFINITY);
        assert_abs_diff_eq!(coupling_efficiency(1.0, 0.5, 0.0, 0.1, 0.2), 1.0 / (1.0 + 0.04));
        assert_abs_diff_eq!(coupling_efficiency(-2.0, 0.0, 0.0, 0.0, 1.0), 4.0);
    }

    #[test]
    fn labels_are_checked() {
        let sys = pair(6, 5, 0.1, 0.2, PolSpec::transverse());
        assert!(mode_coupling(&sys, 4, 0).is_err());
        assert!(mode_coupling(&sys, 3, 3).is_err());
        assert!(mode_coupling(&sys, 3, 2).is_ok());
        let one = crate::geometry::build_ring(&RingSpec::new(6, 0.1, PolSpec::transverse())).unwrap();
        assert!(mode_coupling(&one, 0, 0).is_err());
    }

    #[test]
    fn coupling_vanishes_far_apart() {
        let near = mode_coupling(&pair(6, 6, 0.1, 0.1, PolSpec::transverse()), 0, 0).unwrap();
        let far = mode_coupling(&pair(6, 6, 0.1, 1e4, PolSpec::transverse()), 0, 0).unwrap();
        assert!(far.norm() < 1e-3 * near.norm());
    }

    #[test]
    fn identical_rings_are_symmetric() {
        let sys = pair(8, 8, 0.1, 0.15, PolSpec::magic());
        for m1 in ring_momenta(8) {
            for m2 in ring_momenta(8) {
                let a = mode_coupling(&sys, m1, m2).unwrap().norm();
                let b = mode_coupling(&sys, m2, m1).unwrap().norm();
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn equal_rings_peak_on_anti_diagonal() {
        let table = coupling_table(&pair(10, 10, 0.1, 0.12, PolSpec::tangential())).unwrap();
        // each row peaks where m2 ≡ −m1 (mod N)
        for (a, row) in table.eta.iter().enumerate() {
            let b = (0..row.len()).max_by(|&x, &y| row[x].total_cmp(&row[y])).unwrap();
            assert_eq!((table.m1_values[a] + table.m2_values[b]).rem_euclid(10), 0);
        }
    }

    #[test]
    fn unequal_rings_are_far_less_efficient() {
        let eq = coupling_table(&pair(16, 16, 0.1, 0.12, PolSpec::transverse())).unwrap().eta_max().unwrap().0;
        let uneq = coupling_table(&pair(16, 9, 0.1, 0.12, PolSpec::transverse())).unwrap().eta_max().unwrap().0;
        assert!(uneq < 1e-2 * eq, "{uneq} vs {eq}");
    }

    #[test]
    fn table_shape() {
        let t = coupling_table(&pair(5, 4, 0.2, 0.3, PolSpec::radial())).unwrap();
        assert_eq!(t.m1_values, vec![-2, -1, 0, 1, 2]);
        assert_eq!(t.m2_values, vec![-1, 0, 1, 2]);
        assert_eq!((t.j.len(), t.j[0].len()), (5, 4));
        assert!(t.eta.iter().flatten().all(|&e| e >= 0.0));
    }

    #[test]
    fn sweep_decays() {
        let s = RingSpec::new(8, 0.1, PolSpec::tangential());
        let xs: Vec<f64> = (1..=30).map(|k| 0.05 * k as f64).collect();
        let curve = efficiency_sweep(&s, &s, &xs, PolSpec::tangential()).unwrap();
        let head = curve[..5].iter().map(|p| p.eta_max).fold(0.0, f64::max);
        let tail = curve[25..].iter().map(|p| p.eta_max).fold(0.0, f64::max);
        assert!(tail < head);
        assert!(efficiency_sweep(&s, &s, &[], PolSpec::tangential()).is_err());
    }
}
