use nalgebra::{Rotation3, Unit};
use ndarray::Array1;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

use nanoring::coupling::coupling_rates;
use nanoring::dynamics::{evolve, gaussian_wavepacket, geometric_times, StateVector};
use nanoring::field::emitted_field;
use nanoring::geometry::{apply_disorder, build_ring, two_ring_layout, DipoleArray, DisorderKind, PolSpec, RingSpec, Vec3};
use nanoring::spectrum::{diagonalize, effective_hamiltonian, Basis, Manifold};
use nanoring::transport::mode_coupling;

fn pol() -> impl Strategy<Value = PolSpec> {
    (0.0..std::f64::consts::TAU, 0.0..std::f64::consts::FRAC_PI_2, 0.0..std::f64::consts::FRAC_PI_2).prop_map(
        |(chi, tilt, phi)| {
            let alpha = C64::from_polar(tilt.cos(), chi);
            let beta = C64::new(tilt.sin(), 0.0);
            PolSpec::new(alpha, beta, phi).unwrap()
        },
    )
}

fn real_pol() -> impl Strategy<Value = PolSpec> {
    (0.0..std::f64::consts::TAU, 0.0..std::f64::consts::FRAC_PI_2)
        .prop_map(|(chi, phi)| PolSpec::new(C64::new(chi.cos(), 0.0), C64::new(chi.sin(), 0.0), phi).unwrap())
}

fn ring() -> impl Strategy<Value = RingSpec> {
    (3usize..12, 0.05..0.6f64, pol()).prop_map(|(n, d, p)| RingSpec::new(n, d, p))
}

fn motion() -> impl Strategy<Value = (Rotation3<f64>, Vec3)> {
    (prop::array::uniform3(-1.0..1.0f64), 0.0..3.0f64, prop::array::uniform3(-5.0..5.0f64)).prop_filter_map(
        "degenerate axis",
        |(axis, angle, shift)| {
            let axis = Vec3::from(axis);
            (axis.norm() > 1e-3).then(|| (Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle), Vec3::from(shift)))
        },
    )
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn spectrum(a: &DipoleArray) -> (Vec<f64>, Vec<f64>) {
    let ms = diagonalize(&effective_hamiltonian(&coupling_rates(a).unwrap(), Manifold::Single).unwrap()).unwrap();
    (sorted(ms.shifts), sorted(ms.rates))
}

fn random_amplitudes(n: usize) -> impl Strategy<Value = Array1<C64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n)
        .prop_filter("zero state", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
        .prop_map(|v| v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn spectrum_is_invariant_under_rigid_motion(spec in ring(), (rot, shift) in motion()) {
        let a = build_ring(&spec).unwrap();
        let (s0, r0) = spectrum(&a);
        let (s1, r1) = spectrum(&a.transformed(&rot, &shift));
        let scale = s0.iter().chain(&r0).fold(1.0f64, |m, x| m.max(x.abs()));
        for (x, y) in s0.iter().zip(&s1).chain(r0.iter().zip(&r1)) {
            prop_assert!((x - y).abs() < 1e-9 * scale, "{x} vs {y}");
        }
    }

    #[test]
    fn couplings_are_symmetric(n in 3usize..12, d in 0.05..0.6f64, p in real_pol()) {
        let c = coupling_rates(&build_ring(&RingSpec::new(n, d, p)).unwrap()).unwrap();
        let n = c.len();
        for i in 0..n {
            prop_assert_eq!(c.gamma[[i, i]], 1.0);
            prop_assert_eq!(c.omega[[i, i]], 0.0);
            for j in 0..n {
                prop_assert!((c.omega[[i, j]] - c.omega[[j, i]]).abs() < 1e-12);
                prop_assert!((c.gamma[[i, j]] - c.gamma[[j, i]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eigenvalues_sum_to_the_trace(spec in ring(), double in any::<bool>()) {
        let c = coupling_rates(&build_ring(&spec).unwrap()).unwrap();
        let manifold = if double { Manifold::Double } else { Manifold::Single };
        let h = effective_hamiltonian(&c, manifold).unwrap();
        let ms = diagonalize(&h).unwrap();
        let total: C64 = ms.eigenvalues.iter().sum();
        let expected = -0.5 * h.dim() as f64 * f64::from(manifold.excitations());
        prop_assert!(total.re.abs() < 1e-9, "{total}");
        prop_assert!((total.im - expected).abs() < 1e-9, "{total} vs {expected}");
    }

    #[test]
    fn norm_never_grows(spec in ring(), amps in random_amplitudes(12)) {
        let n = spec.n_sites;
        let a = build_ring(&spec).unwrap();
        let h = effective_hamiltonian(&coupling_rates(&a).unwrap(), Manifold::Single).unwrap();
        let psi0 = StateVector::new(amps.slice(ndarray::s![..n]).to_owned(), Basis::Sites(n));
        prop_assume!(psi0.is_ok());
        let Ok(psi0) = psi0.unwrap().normalized() else { return Ok(()) };
        let traj = evolve(&h, &psi0, &geometric_times(1e-2, 1e2, 40).unwrap()).unwrap();
        for w in traj.windows(2) {
            prop_assert!(w[1].norm_sqr() <= w[0].norm_sqr() + 1e-12);
        }
    }

    #[test]
    fn mode_coupling_is_invariant_under_rigid_motion(
        n in 4usize..12, d in 0.05..0.3f64, gap in 0.05..0.5f64, p in pol(), (rot, shift) in motion(),
    ) {
        let s = RingSpec::new(n, d, p);
        let sys = two_ring_layout(&s, &s, gap).unwrap();
        let moved = sys.transformed(&rot, &shift);
        let m = (n / 2) as i64;
        for (m1, m2) in [(0, 0), (1, -1), (m, m), (1, 2)] {
            let a = mode_coupling(&sys, m1, m2).unwrap().norm();
            let b = mode_coupling(&moved, m1, m2).unwrap().norm();
            prop_assert!((a - b).abs() < 1e-9 * a.max(1.0), "({m1},{m2}): {a} vs {b}");
        }
    }

    #[test]
    fn mode_coupling_is_symmetric_for_identical_rings(n in 5usize..12, d in 0.05..0.3f64, gap in 0.05..0.5f64, p in real_pol()) {
        let s = RingSpec::new(n, d, p);
        let sys = two_ring_layout(&s, &s, gap).unwrap();
        for m1 in -2i64..=2 {
            for m2 in -2i64..=2 {
                let a = mode_coupling(&sys, m1, m2).unwrap().norm();
                let b = mode_coupling(&sys, -m2, -m1).unwrap().norm();
                prop_assert!((a - b).abs() < 1e-10 * a.max(1.0), "({m1},{m2}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn field_is_linear_in_the_amplitudes(
        spec in ring(), u in random_amplitudes(12), v in random_amplitudes(12),
        w in (-2.0..2.0f64, -2.0..2.0f64), r in prop::array::uniform3(2.0..10.0f64),
    ) {
        let n = spec.n_sites;
        let a = build_ring(&spec).unwrap();
        let w = C64::new(w.0, w.1);
        let u = u.slice(ndarray::s![..n]).to_owned();
        let v = v.slice(ndarray::s![..n]).to_owned();
        let state = |x: Array1<C64>| StateVector::new(x, Basis::Sites(n)).unwrap();
        let r = Vec3::from(r);
        let eu = emitted_field(&a, &state(u.clone()), &r).unwrap();
        let ev = emitted_field(&a, &state(v.clone()), &r).unwrap();
        let ec = emitted_field(&a, &state(&u + &v.mapv(|x| x * w)), &r).unwrap();
        let expect = eu + ev * w;
        prop_assert!((ec - expect).norm() <= 1e-12 * (eu.norm() + ev.norm() * w.norm()).max(1e-300));
    }

    #[test]
    fn wavepackets_are_normalized(spec in ring(), m in -5i64..=5, k in 0usize..12, dtheta in 0.1..7.0f64) {
        let a = build_ring(&spec).unwrap();
        let psi = gaussian_wavepacket(&a, 0, m, k % spec.n_sites, dtheta).unwrap();
        prop_assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disorder_depends_only_on_the_seed(spec in ring(), seed in any::<u64>(), frac in 0.0..0.4f64, kind in 0usize..3) {
        let kind = [DisorderKind::Angular, DisorderKind::Radial, DisorderKind::Vertical][kind];
        let a = build_ring(&spec).unwrap();
        let shift = frac * spec.spacing;
        let x = apply_disorder(&a, kind, shift, seed).unwrap();
        let y = apply_disorder(&a, kind, shift, seed).unwrap();
        prop_assert_eq!(x.positions(), y.positions());
        prop_assert_eq!(x.orientations(), y.orientations());
        prop_assert_eq!(x.len(), a.len());
    }
}
