use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use iontrap_duffing::coefficients::{closed_form_terms, taylor_terms};
use iontrap_duffing::multipole::{
    aggregate_electrodes, build_basis, find_equilibrium, potential_dc, potential_rf_envelope,
    pseudopotential, restoring_force, Electrode, ElectrodeConfig, MultipoleCoefficients,
    PseudoForce, TrapParams, N_MULTIPOLES,
};
use iontrap_duffing::poly::{Axis, TrivariatePolynomial, Unit};

const R0: f64 = 1e-3;

fn random_mc(rng: &mut ChaCha8Rng, first: usize) -> MultipoleCoefficients {
    let mut mc = MultipoleCoefficients::new(R0, 2.0 * PI * 24e6).unwrap();
    for j in first..=N_MULTIPOLES {
        mc.set_u(j, rng.random_range(-500.0..500.0))
            .set_v(j, rng.random_range(-500.0..500.0))
            .set_m(j, rng.random_range(0.1..10.0));
    }
    mc
}

fn random_point(rng: &mut ChaCha8Rng, radius: f64) -> [f64; 3] {
    [0, 1, 2].map(|_| rng.random_range(-radius..radius))
}

#[test]
fn every_basis_entry_is_harmonic() {
    let basis = build_basis();
    assert_eq!(basis.len(), 25);
    for e in basis.entries() {
        assert!(e.polynomial.laplacian().is_zero(), "j = {}", e.index);
        assert_eq!(e.polynomial.degree(), e.degree);
    }
    let counts: Vec<usize> = (0..=4)
        .map(|l| basis.entries().iter().filter(|e| e.degree == l).count())
        .collect();
    assert_eq!(counts, [1, 3, 5, 7, 9]);
}

#[test]
fn random_potentials_are_harmonic() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let mc = random_mc(&mut rng, 1);
        for p in [potential_dc(&mc), potential_rf_envelope(&mc)] {
            let lap = p.laplacian();
            let scale = p.max_abs_coeff() / (R0 * R0);
            assert!(lap.max_abs_coeff() <= 1e-12 * scale);
        }
    }
}

#[test]
fn pseudopotential_gradient_matches_finite_differences() {
    let trap = TrapParams::singly_charged(40.0);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mc = random_mc(&mut rng, 5);
    let psi = pseudopotential(&mc, &trap);
    let force = restoring_force(&mc, &trap, PseudoForce::Gradient);
    let h = 1e-7 * R0;
    for _ in 0..100 {
        let r = random_point(&mut rng, 0.2 * R0);
        let mut scale: f64 = 0.0;
        let mut fd = [0.0; 3];
        for (i, a) in Axis::ALL.into_iter().enumerate() {
            let mut p = r;
            p[i] += h;
            let fp = psi.eval(p);
            p[i] -= 2.0 * h;
            let fm = psi.eval(p);
            fd[i] = (fp - fm) / (2.0 * h) / trap.mass;
            scale = scale.max(force[a.index()].eval(r).abs());
        }
        for i in 0..3 {
            assert!(
                (fd[i] - force[i].eval(r)).abs() <= 1e-6 * scale,
                "axis {i} at {r:?}"
            );
        }
    }
}

#[test]
fn gradient_form_agrees_with_explicit_assembly() {
    let trap = TrapParams::singly_charged(40.0);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mc = random_mc(&mut rng, 5);
    let rf = potential_rf_envelope(&mc);
    let dc = potential_dc(&mc);
    let mut sq = TrivariatePolynomial::zero(Unit::Derived);
    for g in rf.gradient() {
        sq = &sq + &(&g * &g);
    }
    let pref = trap.charge * trap.charge / (4.0 * trap.mass * mc.omega_rf * mc.omega_rf);
    let force = restoring_force(&mc, &trap, PseudoForce::Gradient);
    for _ in 0..100 {
        let r = random_point(&mut rng, 0.2 * R0);
        for a in Axis::ALL {
            let expect = (pref * sq.derivative(a).eval(r) + trap.charge * dc.derivative(a).eval(r))
                / trap.mass;
            let got = force[a.index()].eval(r);
            assert!(
                (got - expect).abs() <= 1e-9 * expect.abs().max(1e-300),
                "{a}"
            );
        }
    }
}

#[test]
fn closed_forms_match_taylor_expansion_without_u21() {
    let trap = TrapParams::singly_charged(40.0);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..50 {
        let mut mc = random_mc(&mut rng, 5);
        mc.set_u(21, 0.0).set_v(21, 0.0);
        let taylor = taylor_terms(
            &restoring_force(&mc, &trap, PseudoForce::PerAxis)[Axis::Z.index()],
            Axis::Z,
        );
        let d = closed_form_terms(&mc, &trap).relative_discrepancy(&taylor);
        assert!(d <= 1e-9, "{d:e}");
    }
}

#[test]
fn forms_agree_on_the_axis_for_pure_quadrupole() {
    let trap = TrapParams::singly_charged(40.0);
    let mut mc = MultipoleCoefficients::new(R0, 2.0 * PI * 24e6).unwrap();
    mc.set_u(7, 139.0).set_v(7, 0.15);
    let g = restoring_force(&mc, &trap, PseudoForce::Gradient);
    let p = restoring_force(&mc, &trap, PseudoForce::PerAxis);
    for a in Axis::ALL {
        let (tg, tp) = (
            taylor_terms(&g[a.index()], a),
            taylor_terms(&p[a.index()], a),
        );
        assert!(tg.relative_discrepancy(&tp) < 1e-12);
        assert!(tg.omega0_sq > 0.0);
        assert_eq!(tg.alpha3, 0.0);
    }
}

#[test]
fn electrodes_superpose_linearly() {
    let w = |j: usize| {
        (0..N_MULTIPOLES)
            .map(|i| if i + 1 == j { 1.0 } else { 0.1 * i as f64 })
            .collect::<Vec<_>>()
    };
    let cfg = ElectrodeConfig {
        electrodes: vec![
            Electrode {
                label: "a".into(),
                dc: 2.0,
                rf: 100.0,
            },
            Electrode {
                label: "b".into(),
                dc: -1.0,
                rf: 50.0,
            },
        ],
        weights: vec![w(7), w(13)],
    };
    let (u, v) = aggregate_electrodes(&cfg).unwrap();
    for j in 0..N_MULTIPOLES {
        assert!((u[j] - (100.0 * cfg.weights[0][j] + 50.0 * cfg.weights[1][j])).abs() < 1e-12);
        assert!((v[j] - (2.0 * cfg.weights[0][j] - cfg.weights[1][j])).abs() < 1e-12);
    }
}

#[test]
fn equilibrium_is_a_force_zero() {
    let trap = TrapParams::singly_charged(40.0);
    let mut mc = MultipoleCoefficients::new(R0, 2.0 * PI * 24e6).unwrap();
    mc.set_u(9, 139.0)
        .set_v(7, 0.15)
        .set_v(13, 0.05)
        .set_v(3, 0.002);
    let eq = find_equilibrium(&mc, &trap, None).unwrap();
    assert!(eq[2].abs() > 0.0);
    let force = restoring_force(&mc, &trap, PseudoForce::Gradient);
    for f in &force {
        let scale = f.derivative(Axis::Z).eval(eq).abs() * R0;
        assert!(f.eval(eq).abs() <= 1e-9 * scale);
    }
}

fn small_poly() -> impl Strategy<Value = TrivariatePolynomial> {
    prop::collection::vec(((0u8..4, 0u8..4, 0u8..4), -10.0f64..10.0), 0..6).prop_map(|terms| {
        TrivariatePolynomial::from_terms(
            terms.into_iter().map(|((a, b, c), k)| ([a, b, c], k)),
            Unit::Dimensionless,
        )
    })
}

proptest! {
    #[test]
    fn product_rule(p in small_poly(), q in small_poly(), axis in 0usize..3) {
        let a = Axis::from_index(axis);
        let lhs = (&p * &q).derivative(a);
        let rhs = &(&p.derivative(a) * &q) + &(&p * &q.derivative(a));
        let diff = &lhs - &rhs;
        prop_assert!(diff.max_abs_coeff() <= 1e-9 * (1.0 + lhs.max_abs_coeff()));
    }

    #[test]
    fn evaluation_is_a_ring_homomorphism(p in small_poly(), q in small_poly(),
                                         r in prop::array::uniform3(-1.5f64..1.5)) {
        let prod = (&p * &q).eval(r);
        let sum = (&p + &q).eval(r);
        prop_assert!((prod - p.eval(r) * q.eval(r)).abs() <= 1e-9 * (1.0 + prod.abs()));
        prop_assert!((sum - p.eval(r) - q.eval(r)).abs() <= 1e-9 * (1.0 + sum.abs()));
    }

    #[test]
    fn shifting_is_translation(p in small_poly(), c in prop::array::uniform3(-1.0f64..1.0),
                               r in prop::array::uniform3(-1.0f64..1.0)) {
        let at = [r[0] + c[0], r[1] + c[1], r[2] + c[2]];
        let expect = p.eval(at);
        prop_assert!((p.shifted(c).eval(r) - expect).abs() <= 1e-9 * (1.0 + expect.abs()));
    }
}
