use std::f64::consts::PI;

use iontrap_duffing::coefficients::{AxisCoefficients, Drive, Model3D};
use iontrap_duffing::dynamics::{
    integrate, jump, steady_amplitude, sweep, trajectory_image, IntegrationOptions, Plane, State,
    SweepProtocol,
};
use iontrap_duffing::poly::Axis;

fn reference_z_model(alpha3: f64, omega: f64) -> Model3D {
    let w0 = 2.0 * PI * 191.7e3;
    let z = AxisCoefficients::duffing(Axis::Z, w0, 177.1, alpha3, 7.5e4);
    let x = AxisCoefficients::duffing(Axis::X, 2.0 * PI * 425e3, 177.1, 0.0, 0.0);
    let y = AxisCoefficients::duffing(Axis::Y, 2.0 * PI * 925e3, 177.1, 0.0, 0.0);
    Model3D::from_axis_coefficients(
        [x, y, z],
        Drive {
            axis: Axis::Z,
            k: 7.5e4,
            omega,
        },
    )
    .unwrap()
}

#[test]
fn linear_resonance_amplitude() {
    let w0 = 2.0 * PI * 191.7e3;
    let m = reference_z_model(0.0, w0);
    let traj = integrate(&m, &State::at_rest(), 0.045, &IntegrationOptions::default()).unwrap();
    let st = steady_amplitude(&traj, (0.04, 0.045)).unwrap();
    assert!((st.amplitude[2] / 1.758e-4 - 1.0).abs() < 5e-3);
}

fn coupled_driven(alpha5: f64, alpha8: f64) -> AxisCoefficients {
    let w0 = 2.0 * PI * 191.7e3;
    let mut c = AxisCoefficients::duffing(Axis::Z, w0, 177.1, 0.1959e18, 7.5e4);
    c.alpha5 = alpha5;
    c.alpha8 = alpha8;
    c.omega0_p = 2.0 * w0;
    c.omega0_q = 2.0 * PI * 925e3;
    c
}

fn energy(m: &Model3D, pos: [f64; 3], vel: [f64; 3]) -> f64 {
    let kinetic: f64 = vel.iter().map(|v| 0.5 * v * v).sum();
    kinetic + m.potential().unwrap().eval(pos)
}

#[test]
fn undamped_undriven_motion_conserves_energy() {
    let c = coupled_driven(1e16, 1e13);
    let w0 = c.omega0;
    let m = Model3D::from_reduced_potential(
        &c,
        [0.0; 3],
        Drive {
            axis: Axis::Z,
            k: 0.0,
            omega: w0,
        },
    )
    .unwrap();
    assert!(m.potential_consistency() < 1e-12);
    let start = State {
        pos: [2e-5, 1e-5, 1e-4],
        ..State::at_rest()
    };
    let e0 = energy(&m, start.pos, start.vel);
    let opts = IntegrationOptions {
        rtol: 1e-12,
        atol_pos: 1e-20,
        ..IntegrationOptions::default()
    };
    let periods = 1e4;
    let traj = integrate(&m, &start, periods * 2.0 * PI / w0, &opts).unwrap();
    let drift = traj
        .samples
        .iter()
        .map(|s| (energy(&m, s.pos, s.vel) / e0 - 1.0).abs())
        .fold(0.0, f64::max);
    assert!(drift < 1e-7, "{drift:e}");
}

#[test]
fn uncoupled_transverse_axes_stay_at_rest() {
    let w0 = 2.0 * PI * 191.7e3;
    for m in [
        reference_z_model(0.1959e18, w0),
        Model3D::from_reduced_potential(
            &coupled_driven(0.0, 0.0),
            [177.1; 3],
            Drive {
                axis: Axis::Z,
                k: 7.5e4,
                omega: w0,
            },
        )
        .unwrap(),
    ] {
        let traj = integrate(&m, &State::at_rest(), 0.01, &IntegrationOptions::default()).unwrap();
        let a = steady_amplitude(&traj, (0.005, 0.01)).unwrap().amplitude;
        assert!(a[0] < 1e-9 && a[1] < 1e-9, "{a:?}");
        assert!(a[2] > 1e-5);
    }
}

#[test]
fn internal_resonance_pumps_the_transverse_axis() {
    let w0 = 2.0 * PI * 191.7e3;
    let drive = Drive {
        axis: Axis::Z,
        k: 7.5e4,
        omega: w0,
    };
    let m =
        Model3D::from_reduced_potential(&coupled_driven(1e16, 1e13), [177.1; 3], drive).unwrap();
    // the pump needs a seed; an exactly zero transverse state is invariant
    let start = State {
        pos: [1e-9, 0.0, 0.0],
        ..State::at_rest()
    };
    let traj = integrate(&m, &start, 0.03, &IntegrationOptions::default()).unwrap();
    let a = steady_amplitude(&traj, (0.025, 0.03)).unwrap().amplitude;
    assert!(a[0] > 0.1 * a[2], "{a:?}");
}

#[test]
fn sweeps_are_deterministic_and_hysteretic() {
    let m = reference_z_model(0.1959e18, 2.0 * PI * 191.7e3);
    let up = SweepProtocol {
        start_hz: 191.7e3 - 200.0,
        end_hz: 191.7e3 + 500.0,
        step_hz: 100.0,
        settle_time: 0.02,
        measure_time: 0.005,
        reset_phase: false,
    };
    let opts = IntegrationOptions::default();
    let a = sweep(&m, &up, None, &opts).unwrap();
    let b = sweep(&m, &up, None, &opts).unwrap();
    assert_eq!(a.records, b.records);
    let down = sweep(&m, &up.reversed(), None, &opts).unwrap();
    let at = |recs: &[iontrap_duffing::dynamics::SweepRecord], f: f64| {
        recs.iter()
            .find(|r| (r.freq_hz - f).abs() < 1e-6)
            .unwrap()
            .a(Axis::Z)
    };
    // inside the bistable band the scans sit on different branches
    let f = 191.7e3 + 200.0;
    assert!(at(&a.records, f) > 3.0 * at(&down.records, f));
    let (_, after, ratio) = jump(&a.records, Axis::Z, 1.5).unwrap();
    assert_eq!(after, 191.7e3 + 300.0);
    assert!(ratio > 5.0);
}

#[test]
fn rectangle_image_follows_amplitudes() {
    let w0 = 2.0 * PI * 191.7e3;
    let mut c = coupled_driven(1e15, 1e12);
    c.omega0_p = 2.0 * PI * 425e3;
    let m = Model3D::from_reduced_potential(
        &c,
        [0.0, 177.1, 177.1],
        Drive {
            axis: Axis::Z,
            k: 7.5e4,
            omega: w0,
        },
    )
    .unwrap();
    let seeded = State {
        pos: [3e-5, 0.0, 0.0],
        ..State::at_rest()
    };
    let settle = integrate(&m, &seeded, 0.02, &IntegrationOptions::default()).unwrap();
    let fine = IntegrationOptions {
        samples_per_period: 512,
        ..IntegrationOptions::default()
    };
    let traj = integrate(&m, &settle.final_state, 0.005, &fine).unwrap();
    let a = steady_amplitude(&traj, (traj.samples[0].t, traj.final_state.t))
        .unwrap()
        .amplitude;
    let img = trajectory_image(&traj, Plane::Xz, 64).unwrap();
    let (w, h) = img.support_size().unwrap();
    assert!(((w / h) / (a[0] / a[2]) - 1.0).abs() < 0.1);
    assert!(img.fill_fraction() > 0.9);
}
