//! Emitter arrays: single rings, two-ring systems, the bio-inspired
//! multi-ring complex, and positional disorder.
//!
//! Lengths are in units of the transition wavelength λ0, so the wavenumber
//! is fixed to `k0 = 2π`. Sites belonging to one ring are stored
//! contiguously, and each ring keeps the local frame it was built in so that
//! spin-wave phases and disorder can be expressed relative to it.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::{Rotation3, Vector3};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type CVec3 = Vector3<C64>;

/// Transition wavenumber in units of 1/λ0.
pub const K0: f64 = TAU;
/// Single-emitter linewidth; every rate and energy is expressed in it.
pub const GAMMA0: f64 = 1.0;

/// Two sites closer than this are considered coincident.
pub const COINCIDENCE_TOL: f64 = 1e-9;

const UNIT_TOL: f64 = 1e-12;

/// Dipole orientation relative to a ring's local cylindrical basis:
/// `μ = cos φ (α ê_r + β ê_t) + sin φ ê_z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolSpec {
    pub alpha: C64,
    pub beta: C64,
    pub phi: f64,
}

impl PolSpec {
    pub fn new(alpha: C64, beta: C64, phi: f64) -> Result<Self> {
        let pol = Self { alpha, beta, phi };
        pol.validate()?;
        Ok(pol)
    }

    /// Every dipole along the ring normal (φ = π/2).
    pub fn transverse() -> Self {
        Self { alpha: C64::new(0.0, 0.0), beta: C64::new(1.0, 0.0), phi: FRAC_PI_2 }
    }

    pub fn tangential() -> Self {
        Self::tilted(0.0)
    }

    pub fn radial() -> Self {
        Self { alpha: C64::new(1.0, 0.0), beta: C64::new(0.0, 0.0), phi: 0.0 }
    }

    /// Tangential dipoles tilted out of the plane by `phi`.
    pub fn tilted(phi: f64) -> Self {
        Self { alpha: C64::new(0.0, 0.0), beta: C64::new(1.0, 0.0), phi }
    }

    /// Tangential dipoles tilted to the angle where all collective shifts
    /// cancel in the dense-ring limit.
    pub fn magic() -> Self {
        Self::tilted((1.0 / 3f64.sqrt()).acos())
    }

    pub fn validate(&self) -> Result<()> {
        let norm = self.alpha.norm_sqr() + self.beta.norm_sqr();
        if !((norm - 1.0).abs() <= UNIT_TOL) {
            return Err(Error::InvalidSpec(format!(
                "polarization weights must satisfy |alpha|^2 + |beta|^2 = 1, got {norm}"
            )));
        }
        if !(0.0..=FRAC_PI_2 + UNIT_TOL).contains(&self.phi) {
            return Err(Error::InvalidSpec(format!(
                "elevation angle phi must lie in [0, pi/2], got {}",
                self.phi
            )));
        }
        Ok(())
    }

    pub fn orientation(&self, radial: &Vec3, tangential: &Vec3, normal: &Vec3) -> CVec3 {
        let (s, c) = self.phi.sin_cos();
        let lift = |v: &Vec3, w: C64| v.map(|x| w * x);
        lift(radial, self.alpha * c) + lift(tangential, self.beta * c) + lift(normal, C64::new(s, 0.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingSpec {
    pub n_sites: usize,
    /// Nearest-neighbour distance d.
    pub spacing: f64,
    pub pol: PolSpec,
    pub center: Vec3,
    pub normal: Vec3,
    /// Azimuth of site 0 in the ring plane.
    pub start_angle: f64,
}

impl RingSpec {
    /// A ring in the xy-plane centred at the origin with site 0 on the x axis.
    pub fn new(n_sites: usize, spacing: f64, pol: PolSpec) -> Self {
        Self { n_sites, spacing, pol, center: Vec3::zeros(), normal: Vec3::z(), start_angle: 0.0 }
    }

    pub fn with_pol(&self, pol: PolSpec) -> Self {
        Self { pol, ..self.clone() }
    }

    /// Circumradius of the regular polygon, `d = 2R sin(π/N)`.
    pub fn radius(&self) -> f64 {
        ring_radius(self.n_sites, self.spacing)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::InvalidSpec(format!("a ring needs at least 2 sites, got {}", self.n_sites)));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::InvalidSpec(format!("ring spacing must be positive, got {}", self.spacing)));
        }
        if !(self.normal.norm() > 0.0 && self.normal.iter().all(|x| x.is_finite())) {
            return Err(Error::InvalidSpec("ring normal must be a non-zero finite vector".into()));
        }
        if !self.center.iter().all(|x| x.is_finite()) || !self.start_angle.is_finite() {
            return Err(Error::InvalidSpec("ring center and start angle must be finite".into()));
        }
        self.pol.validate()
    }
}

pub fn ring_radius(n_sites: usize, spacing: f64) -> f64 {
    spacing / (2.0 * (PI / n_sites as f64).sin())
}

/// The local frame a ring was built in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RingFrame {
    pub center: Vec3,
    pub normal: Vec3,
    /// In-plane reference direction; azimuths are measured from it towards
    /// `normal × axis`.
    pub axis: Vec3,
    pub radius: f64,
    pub spacing: f64,
    pub start_angle: f64,
    pub pol: PolSpec,
}

impl RingFrame {
    pub fn binormal(&self) -> Vec3 {
        self.normal.cross(&self.axis)
    }

    fn radial(&self, azimuth: f64) -> Vec3 {
        let (s, c) = azimuth.sin_cos();
        self.axis * c + self.binormal() * s
    }

    fn tangential(&self, azimuth: f64) -> Vec3 {
        let (s, c) = azimuth.sin_cos();
        self.binormal() * c - self.axis * s
    }

    fn orientation(&self, azimuth: f64) -> CVec3 {
        self.pol.orientation(&self.radial(azimuth), &self.tangential(azimuth), &self.normal)
    }

    /// Cylindrical coordinates `(rho, azimuth, height)` of `p` in this frame.
    fn cylindrical(&self, p: &Vec3) -> (f64, f64, f64) {
        let rel = p - self.center;
        let u = rel.dot(&self.axis);
        let v = rel.dot(&self.binormal());
        (u.hypot(v), v.atan2(u), rel.dot(&self.normal))
    }

    fn point(&self, rho: f64, azimuth: f64, height: f64) -> Vec3 {
        self.center + self.radial(azimuth) * rho + self.normal * height
    }
}

/// A contiguous block of sites. Rings built by the layout constructors carry
/// their frame; arrays assembled by hand from raw positions do not.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ring {
    pub offset: usize,
    pub n_sites: usize,
    pub frame: Option<RingFrame>,
}

impl Ring {
    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.n_sites
    }

    pub fn contains(&self, site: usize) -> bool {
        self.range().contains(&site)
    }

    /// Spin-wave angle `θ_j = 2π j / N` of the site, with `j` counted from
    /// the ring's site 0.
    pub fn spin_angle(&self, site: usize) -> f64 {
        TAU * (site - self.offset) as f64 / self.n_sites as f64
    }

    /// The ring as an isolated spec, if it has a frame.
    pub fn spec(&self) -> Option<RingSpec> {
        self.frame.as_ref().map(|f| RingSpec {
            n_sites: self.n_sites,
            spacing: f.spacing,
            pol: f.pol,
            center: f.center,
            normal: f.normal,
            start_angle: f.start_angle,
        })
    }

    fn frame_or_err(&self) -> Result<&RingFrame> {
        self.frame.as_ref().ok_or_else(|| {
            Error::InvalidArgument(format!("ring at offset {} has no ring frame", self.offset))
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DipoleArray {
    positions: Vec<Vec3>,
    orientations: Vec<CVec3>,
    ring_membership: Vec<usize>,
    rings: Vec<Ring>,
    k0: f64,
    gamma0: f64,
}

impl DipoleArray {
    /// An array assembled from raw sites (e.g. a chain), treated as one group
    /// without ring geometry.
    pub fn from_sites(positions: Vec<Vec3>, orientations: Vec<CVec3>) -> Result<Self> {
        if positions.len() != orientations.len() {
            return Err(Error::InvalidSpec(format!(
                "{} positions but {} orientations",
                positions.len(),
                orientations.len()
            )));
        }
        if positions.is_empty() {
            return Err(Error::InvalidSpec("an array needs at least one site".into()));
        }
        let n = positions.len();
        Self::assemble(positions, orientations, vec![Ring { offset: 0, n_sites: n, frame: None }])
    }

    fn assemble(positions: Vec<Vec3>, orientations: Vec<CVec3>, rings: Vec<Ring>) -> Result<Self> {
        let ring_membership = rings
            .iter()
            .enumerate()
            .flat_map(|(id, r)| std::iter::repeat_n(id, r.n_sites))
            .collect();
        let array = Self { positions, orientations, ring_membership, rings, k0: K0, gamma0: GAMMA0 };
        array.validate()?;
        Ok(array)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, mu) in self.orientations.iter().enumerate() {
            let norm = mu.norm();
            if (norm - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidSpec(format!("orientation of site {i} has norm {norm}")));
            }
        }
        if let Some((dist, i, j)) = self.min_pair_distance() {
            if dist < COINCIDENCE_TOL {
                return Err(Error::Geometry(format!("sites {i} and {j} coincide (distance {dist:e})")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn orientations(&self) -> &[CVec3] {
        &self.orientations
    }

    pub fn ring_membership(&self) -> &[usize] {
        &self.ring_membership
    }

    pub fn rings(&self) -> &[Ring] {
        &self.rings
    }

    pub fn ring(&self, id: usize) -> Result<&Ring> {
        self.rings
            .get(id)
            .ok_or_else(|| Error::InvalidArgument(format!("ring {id} does not exist ({} rings)", self.rings.len())))
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    /// Spin-wave angle of a site within its own ring.
    pub fn spin_angle(&self, site: usize) -> f64 {
        self.rings[self.ring_membership[site]].spin_angle(site)
    }

    /// Copy of a single ring, detached from the rest of the array.
    pub fn ring_array(&self, id: usize) -> Result<DipoleArray> {
        let ring = self.ring(id)?;
        let r = ring.range();
        Self::assemble(
            self.positions[r.clone()].to_vec(),
            self.orientations[r].to_vec(),
            vec![Ring { offset: 0, ..ring.clone() }],
        )
    }

    pub fn centroid(&self) -> Vec3 {
        self.positions.iter().sum::<Vec3>() / self.len() as f64
    }

    /// Largest distance of a site from the centroid.
    pub fn extent(&self) -> f64 {
        let c = self.centroid();
        self.positions.iter().map(|p| (p - c).norm()).fold(0.0, f64::max)
    }

    /// Smallest pairwise site distance and the pair realizing it.
    pub fn min_pair_distance(&self) -> Option<(f64, usize, usize)> {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                let dist = (self.positions[i] - self.positions[j]).norm();
                if best.is_none_or(|(b, _, _)| dist < b) {
                    best = Some((dist, i, j));
                }
            }
        }
        best
    }

    /// Smallest distance between a site of ring `a` and a site of ring `b`.
    pub fn min_ring_distance(&self, a: usize, b: usize) -> Result<f64> {
        let (ra, rb) = (self.ring(a)?.range(), self.ring(b)?.range());
        let mut best = f64::INFINITY;
        for i in ra {
            for j in rb.clone() {
                best = best.min((self.positions[i] - self.positions[j]).norm());
            }
        }
        Ok(best)
    }

    /// Applies the rigid motion `p ↦ R p + t` to positions, orientations and
    /// ring frames.
    pub fn transformed(&self, rotation: &Rotation3<f64>, translation: &Vec3) -> DipoleArray {
        let rot = rotation.matrix();
        let crot = rot.map(|x| C64::new(x, 0.0));
        let rings = self
            .rings
            .iter()
            .map(|r| Ring {
                frame: r.frame.as_ref().map(|f| RingFrame {
                    center: rot * f.center + translation,
                    normal: rot * f.normal,
                    axis: rot * f.axis,
                    ..f.clone()
                }),
                ..r.clone()
            })
            .collect();
        DipoleArray {
            positions: self.positions.iter().map(|p| rot * p + translation).collect(),
            orientations: self.orientations.iter().map(|mu| crot * mu).collect(),
            ring_membership: self.ring_membership.clone(),
            rings,
            k0: self.k0,
            gamma0: self.gamma0,
        }
    }
}

/// A unit in-plane direction for a ring with the given normal: the x axis
/// projected into the plane (y if the normal is along x).
fn in_plane_axis(normal: &Vec3) -> Vec3 {
    let x = Vec3::x();
    let projected = x - normal * normal.dot(&x);
    if projected.norm() > 1e-6 {
        projected.normalize()
    } else {
        let y = Vec3::y();
        (y - normal * normal.dot(&y)).normalize()
    }
}

struct PlacedRing {
    positions: Vec<Vec3>,
    orientations: Vec<CVec3>,
    frame: RingFrame,
}

fn place_ring(n_sites: usize, spacing: f64, pol: PolSpec, center: Vec3, normal: Vec3, axis: Vec3, start_angle: f64) -> PlacedRing {
    let frame = RingFrame {
        center,
        normal,
        axis,
        radius: ring_radius(n_sites, spacing),
        spacing,
        start_angle,
        pol,
    };
    let azimuths = (0..n_sites).map(|j| start_angle + TAU * j as f64 / n_sites as f64);
    let (positions, orientations) = azimuths.map(|a| (frame.point(frame.radius, a, 0.0), frame.orientation(a))).unzip();
    PlacedRing { positions, orientations, frame }
}

fn assemble_rings(placed: Vec<PlacedRing>) -> Result<DipoleArray> {
    let mut positions = Vec::new();
    let mut orientations = Vec::new();
    let mut rings = Vec::new();
    for p in placed {
        rings.push(Ring { offset: positions.len(), n_sites: p.positions.len(), frame: Some(p.frame) });
        positions.extend(p.positions);
        orientations.extend(p.orientations);
    }
    DipoleArray::assemble(positions, orientations, rings)
}

/// Regular polygon of `n_sites` emitters with rotationally symmetric
/// orientations.
pub fn build_ring(spec: &RingSpec) -> Result<DipoleArray> {
    spec.validate()?;
    let normal = spec.normal.normalize();
    let ring = place_ring(
        spec.n_sites,
        spec.spacing,
        spec.pol,
        spec.center,
        normal,
        in_plane_axis(&normal),
        spec.start_angle,
    );
    assemble_rings(vec![ring])
}

/// Azimuth of site 0 when a companion ring sits along the frame axis: the
/// site farthest from it (for odd N, the first of the two tied sites).
fn far_side_start(n_sites: usize) -> f64 {
    TAU * (n_sites / 2) as f64 / n_sites as f64
}

/// Two coplanar rings in site-site configuration separated by `gap`.
///
/// Ring 1 is centred at `spec1.center`; ring 2 is placed along ring 1's
/// in-plane axis so that exactly one site of each ring faces the other.
/// Ring 1's site 0 is the site farthest from ring 2 and ring 2's site 0 is
/// the site nearest to ring 1; both rings are indexed counter-clockwise about
/// the common normal. `spec2.center` and both start angles are ignored.
pub fn two_ring_layout(spec1: &RingSpec, spec2: &RingSpec, gap: f64) -> Result<DipoleArray> {
    spec1.validate()?;
    spec2.validate()?;
    if !(gap > 0.0 && gap.is_finite()) {
        return Err(Error::Geometry(format!("ring-to-ring gap must be positive, got {gap}")));
    }
    let normal = spec1.normal.normalize();
    let n2 = spec2.normal.normalize();
    if normal.cross(&n2).norm() > 1e-12 || normal.dot(&n2) < 0.0 {
        return Err(Error::Geometry("two-ring layouts need parallel ring normals".into()));
    }
    let axis = in_plane_axis(&normal);
    let (r1, r2) = (spec1.radius(), spec2.radius());
    let c2 = spec1.center + axis * (r1 + r2 + gap);
    let rings = vec![
        place_ring(spec1.n_sites, spec1.spacing, spec1.pol, spec1.center, normal, axis, far_side_start(spec1.n_sites)),
        place_ring(spec2.n_sites, spec2.spacing, spec2.pol, c2, normal, axis, PI),
    ];
    assemble_rings(rings)
}

/// Central ring of `n_inner` sites surrounded by `n_rings_outer` rings of
/// `n_outer` sites, evenly spread in azimuth, each at minimal site distance
/// `d` from the centre ring and turned to face it with one site.
///
/// All rings lie in the xy-plane around the origin; outer ring `k` sits at
/// azimuth `2πk / n_rings_outer`. With one outer ring this is exactly
/// [`two_ring_layout`] with `gap = d`.
pub fn lhc_layout(n_inner: usize, n_outer: usize, n_rings_outer: usize, d: f64, pol: PolSpec) -> Result<DipoleArray> {
    if n_inner < 2 || n_outer < 2 || n_rings_outer == 0 {
        return Err(Error::InvalidSpec(format!(
            "ring counts must be positive with at least 2 sites per ring (inner {n_inner}, outer {n_outer}, rings {n_rings_outer})"
        )));
    }
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::InvalidSpec(format!("spacing must be positive, got {d}")));
    }
    pol.validate()?;
    let normal = Vec3::z();
    let axis = Vec3::x();
    let centre = place_ring(n_inner, d, pol, Vec3::zeros(), normal, axis, far_side_start(n_inner));
    let r_out = ring_radius(n_outer, d);

    let mut placed = Vec::with_capacity(n_rings_outer + 1);
    let mut centers = Vec::with_capacity(n_rings_outer);
    for k in 0..n_rings_outer {
        let psi = TAU * k as f64 / n_rings_outer as f64;
        let dir = Vec3::new(psi.cos(), psi.sin(), 0.0);
        let dist = outer_ring_distance(&centre.positions, n_outer, d, pol, dir, psi)?;
        let center = dir * dist;
        centers.push(center);
        placed.push(place_ring(n_outer, d, pol, center, normal, axis, psi + PI));
    }
    for a in 0..centers.len() {
        for b in a + 1..centers.len() {
            if (centers[a] - centers[b]).norm() < 2.0 * r_out {
                return Err(Error::Geometry(format!("outer rings {a} and {b} overlap")));
            }
        }
    }
    placed.insert(0, centre);
    assemble_rings(placed)
}

/// Centre distance at which an outer ring along `dir` comes within exactly
/// `d` of the central ring.
fn outer_ring_distance(central: &[Vec3], n_outer: usize, d: f64, pol: PolSpec, dir: Vec3, psi: f64) -> Result<f64> {
    let r_in = central[0].norm();
    let r_out = ring_radius(n_outer, d);
    let min_dist = |dist: f64| {
        let ring = place_ring(n_outer, d, pol, dir * dist, Vec3::z(), Vec3::x(), psi + PI);
        let mut best = f64::INFINITY;
        for p in &ring.positions {
            for q in central {
                best = best.min((p - q).norm());
            }
        }
        best
    };
    let upper = r_in + r_out + d;
    // A central site facing the outer ring realizes the gap exactly.
    if (min_dist(upper) - d).abs() <= 1e-12 {
        return Ok(upper);
    }
    let step = d / 64.0;
    let mut hi = upper;
    let mut lo = upper - step;
    while min_dist(lo) > d {
        hi = lo;
        lo -= step;
        if lo <= 0.0 {
            return Err(Error::Geometry("could not place outer ring at the requested distance".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if min_dist(mid) > d {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisorderKind {
    /// Along the ring arc, keeping the ring shape.
    Angular,
    Radial,
    /// Out of the ring plane.
    Vertical,
}

impl DisorderKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DisorderKind::Angular => "angular",
            DisorderKind::Radial => "radial",
            DisorderKind::Vertical => "vertical",
        }
    }
}

impl fmt::Display for DisorderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DisorderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "angular" | "theta" => Ok(DisorderKind::Angular),
            "radial" | "r" => Ok(DisorderKind::Radial),
            "vertical" | "z" => Ok(DisorderKind::Vertical),
            other => Err(Error::InvalidArgument(format!(
                "unknown disorder kind '{other}' (expected angular, radial or vertical)"
            ))),
        }
    }
}

/// Displaces every site by an independent uniform amount in
/// `[-max_shift, max_shift]` along its ring arc, ring radius or ring normal.
///
/// In-plane displacements recompute the orientation in the displaced local
/// frame; vertical ones leave orientations untouched. The result depends
/// only on `seed`.
pub fn apply_disorder(array: &DipoleArray, kind: DisorderKind, max_shift: f64, seed: u64) -> Result<DipoleArray> {
    if !(max_shift >= 0.0 && max_shift.is_finite()) {
        return Err(Error::InvalidArgument(format!("max_shift must be non-negative, got {max_shift}")));
    }
    if max_shift == 0.0 {
        return Ok(array.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = array.clone();
    for (id, ring) in array.rings.iter().enumerate() {
        let frame = ring.frame_or_err().map_err(|_| {
            Error::InvalidArgument(format!("ring {id} has no frame; disorder needs ring geometry"))
        })?;
        for i in ring.range() {
            let shift: f64 = rng.random_range(-max_shift..=max_shift);
            let (mut rho, mut azimuth, mut height) = frame.cylindrical(&array.positions[i]);
            match kind {
                DisorderKind::Angular => azimuth += shift / rho,
                DisorderKind::Radial => rho += shift,
                DisorderKind::Vertical => height += shift,
            }
            out.positions[i] = frame.point(rho, azimuth, height);
            if kind != DisorderKind::Vertical {
                out.orientations[i] = frame.orientation(azimuth);
            }
        }
    }
    out.validate()?;
    Ok(out)
}

/// Seed for realization `index` of a study seeded with `master`
/// (splitmix64 finalizer over the pair).
pub fn realization_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ring(n: usize, d: f64, pol: PolSpec) -> DipoleArray {
        build_ring(&RingSpec::new(n, d, pol)).unwrap()
    }

    #[test]
    fn hexagon_radius_equals_spacing() {
        assert_abs_diff_eq!(RingSpec::new(6, 0.1, PolSpec::transverse()).radius(), 0.1, epsilon = 1e-15);
        let a = ring(6, 0.1, PolSpec::transverse());
        for p in a.positions() {
            assert_abs_diff_eq!(p.norm(), 0.1, epsilon = 1e-15);
        }
    }

    #[test]
    fn square_radius() {
        let spec = RingSpec::new(4, 0.37, PolSpec::tangential());
        assert_abs_diff_eq!(spec.radius(), 0.37 / 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn transverse_orientation_is_normal_everywhere() {
        let pol = PolSpec::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0), FRAC_PI_2).unwrap();
        for mu in ring(7, 0.2, pol).orientations() {
            assert_abs_diff_eq!(mu[0].norm(), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(mu[1].norm(), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(mu[2].re, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn neighbour_spacing_matches_spec() {
        let a = ring(9, 0.13, PolSpec::radial());
        for j in 0..9 {
            let d = (a.positions()[j] - a.positions()[(j + 1) % 9]).norm();
            assert_abs_diff_eq!(d, 0.13, epsilon = 1e-14);
        }
    }

    #[test]
    fn rejects_degenerate_ring() {
        assert!(matches!(
            build_ring(&RingSpec::new(1, 0.1, PolSpec::transverse())),
            Err(Error::InvalidSpec(_))
        ));
        assert!(build_ring(&RingSpec::new(5, 0.0, PolSpec::transverse())).is_err());
        assert!(PolSpec::new(C64::new(1.0, 0.0), C64::new(1.0, 0.0), 0.0).is_err());
        assert!(PolSpec::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0), 2.0).is_err());
    }

    #[test]
    fn rotation_maps_site_j_to_j_plus_one() {
        let pol = PolSpec::new(C64::new(0.6, 0.0), C64::new(0.0, 0.8), 0.4).unwrap();
        let n = 11;
        let a = ring(n, 0.15, pol);
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), TAU / n as f64);
        let crot = rot.matrix().map(|x| C64::new(x, 0.0));
        for j in 0..n {
            let k = (j + 1) % n;
            assert!((rot * a.positions()[j] - a.positions()[k]).norm() < 1e-12);
            assert!((crot * a.orientations()[j] - a.orientations()[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn tilted_ring_about_arbitrary_normal() {
        let mut spec = RingSpec::new(6, 0.2, PolSpec::transverse());
        spec.normal = Vec3::new(1.0, 1.0, 0.0);
        spec.center = Vec3::new(0.3, -0.2, 1.0);
        let a = build_ring(&spec).unwrap();
        let n = spec.normal.normalize();
        for (p, mu) in a.positions().iter().zip(a.orientations()) {
            assert_abs_diff_eq!((p - spec.center).dot(&n), 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!((mu.map(|z| z.re) - n).norm(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn two_ring_gap_is_minimal_distance() {
        for (n1, n2) in [(8, 8), (16, 9), (9, 16), (5, 7)] {
            let s1 = RingSpec::new(n1, 0.1, PolSpec::tangential());
            let s2 = RingSpec::new(n2, 0.1, PolSpec::tangential());
            let a = two_ring_layout(&s1, &s2, 0.12).unwrap();
            assert_eq!(a.rings().len(), 2);
            assert_abs_diff_eq!(a.min_ring_distance(0, 1).unwrap(), 0.12, epsilon = 1e-12);
            // ring 2 site 0 faces ring 1
            let nearest = a.ring(1).unwrap().range().min_by(|&i, &j| {
                let di = (a.positions()[i] - a.ring(0).unwrap().frame.as_ref().unwrap().center).norm();
                let dj = (a.positions()[j] - a.ring(0).unwrap().frame.as_ref().unwrap().center).norm();
                di.total_cmp(&dj)
            });
            assert_eq!(nearest, Some(n1));
        }
    }

    #[test]
    fn ring_one_site_zero_is_farthest() {
        for n1 in [8, 9] {
            let s1 = RingSpec::new(n1, 0.1, PolSpec::tangential());
            let s2 = RingSpec::new(10, 0.1, PolSpec::tangential());
            let a = two_ring_layout(&s1, &s2, 0.2).unwrap();
            let c2 = a.ring(1).unwrap().frame.as_ref().unwrap().center;
            let dist = |i: usize| (a.positions()[i] - c2).norm();
            let far = (0..n1).map(dist).fold(0.0, f64::max);
            assert_abs_diff_eq!(dist(0), far, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_gap_is_rejected() {
        let s = RingSpec::new(8, 0.1, PolSpec::transverse());
        assert!(matches!(two_ring_layout(&s, &s, 0.0), Err(Error::Geometry(_))));
    }

    #[test]
    fn lhc_has_88_sites() {
        let a = lhc_layout(16, 9, 8, 0.25, PolSpec::tangential()).unwrap();
        assert_eq!(a.len(), 88);
        assert_eq!(a.rings().len(), 9);
        for k in 1..9 {
            assert_abs_diff_eq!(a.min_ring_distance(0, k).unwrap(), 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn lhc_with_one_outer_ring_is_two_ring_layout() {
        let pol = PolSpec::magic();
        let a = lhc_layout(16, 9, 1, 0.2, pol).unwrap();
        let b = two_ring_layout(&RingSpec::new(16, 0.2, pol), &RingSpec::new(9, 0.2, pol), 0.2).unwrap();
        assert_eq!(a.len(), b.len());
        for i in 0..a.len() {
            assert!((a.positions()[i] - b.positions()[i]).norm() < 1e-14);
            assert!((a.orientations()[i] - b.orientations()[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn lhc_without_facing_sites_still_reaches_gap() {
        let a = lhc_layout(10, 6, 3, 0.2, PolSpec::transverse()).unwrap();
        for k in 1..4 {
            assert_abs_diff_eq!(a.min_ring_distance(0, k).unwrap(), 0.2, epsilon = 1e-9);
        }
    }

    #[test]
    fn crowded_outer_rings_overlap() {
        assert!(matches!(
            lhc_layout(4, 16, 8, 0.1, PolSpec::transverse()),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn zero_disorder_is_identity() {
        let a = ring(8, 0.4, PolSpec::transverse());
        for kind in [DisorderKind::Angular, DisorderKind::Radial, DisorderKind::Vertical] {
            assert_eq!(apply_disorder(&a, kind, 0.0, 3).unwrap(), a);
        }
    }

    #[test]
    fn angular_disorder_keeps_radius() {
        let spec = RingSpec::new(8, 0.4, PolSpec::tangential());
        let a = build_ring(&spec).unwrap();
        let b = apply_disorder(&a, DisorderKind::Angular, 0.4 * 0.4, 11).unwrap();
        assert_ne!(a, b);
        for p in b.positions() {
            assert_abs_diff_eq!(p.norm(), spec.radius(), epsilon = 1e-12);
        }
        // orientations follow the local tangent
        for (p, mu) in b.positions().iter().zip(b.orientations()) {
            assert_abs_diff_eq!(mu.map(|z| z.re).dot(p), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn vertical_disorder_keeps_xy() {
        let a = ring(8, 0.4, PolSpec::tangential());
        let b = apply_disorder(&a, DisorderKind::Vertical, 0.08, 5).unwrap();
        for (p, q) in a.positions().iter().zip(b.positions()) {
            assert_abs_diff_eq!(p[0], q[0], epsilon = 1e-14);
            assert_abs_diff_eq!(p[1], q[1], epsilon = 1e-14);
        }
        assert_eq!(a.orientations(), b.orientations());
    }

    #[test]
    fn disorder_is_seeded() {
        let a = ring(8, 0.4, PolSpec::transverse());
        let b1 = apply_disorder(&a, DisorderKind::Radial, 0.1, 42).unwrap();
        let b2 = apply_disorder(&a, DisorderKind::Radial, 0.1, 42).unwrap();
        let b3 = apply_disorder(&a, DisorderKind::Radial, 0.1, 43).unwrap();
        assert_eq!(b1, b2);
        assert_ne!(b1, b3);
    }

    #[test]
    fn unknown_disorder_kind() {
        assert!(matches!("sideways".parse::<DisorderKind>(), Err(Error::InvalidArgument(_))));
        assert_eq!("Radial".parse::<DisorderKind>().unwrap(), DisorderKind::Radial);
    }

    #[test]
    fn negative_shift_rejected() {
        let a = ring(4, 0.3, PolSpec::transverse());
        assert!(apply_disorder(&a, DisorderKind::Radial, -0.1, 0).is_err());
    }

    #[test]
    fn chain_from_sites() {
        let pos = (0..4).map(|i| Vec3::new(0.1 * i as f64, 0.0, 0.0)).collect();
        let mu = vec![CVec3::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)); 4];
        let chain = DipoleArray::from_sites(pos, mu).unwrap();
        assert_eq!(chain.rings().len(), 1);
        assert!(chain.rings()[0].frame.is_none());
        assert!(apply_disorder(&chain, DisorderKind::Radial, 0.01, 0).is_err());
    }

    #[test]
    fn coincident_sites_rejected() {
        let pos = vec![Vec3::zeros(), Vec3::zeros()];
        let mu = vec![CVec3::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)); 2];
        assert!(matches!(DipoleArray::from_sites(pos, mu), Err(Error::Geometry(_))));
    }

    #[test]
    fn realization_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| realization_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(realization_seed(7, 0), realization_seed(8, 0));
    }
}
