//! Direct integration of the coupled secular equations, frequency sweeps with
//! carried state, steady-amplitude extraction and time-averaged images.

use std::f64::consts::PI;
use std::io::Write;

use thiserror::Error;

use crate::coefficients::Model3D;
use crate::integrate::{Dopri5, IntegrateError, Tolerances};
use crate::multiscale::Direction;
use crate::poly::{power_table, Axis};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("integration failed: {0}")]
    Integrate(#[from] IntegrateError),
    #[error("window of {periods:.1} drive periods is too short (need {required})")]
    WindowTooShort { periods: f64, required: f64 },
    #[error("trajectory has no samples")]
    EmptyTrajectory,
    #[error("invalid sweep protocol: {0}")]
    InvalidProtocol(String),
    #[error("invalid request: {0}")]
    Invalid(String),
}

/// Full state of the secular motion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct State {
    /// Displacement from equilibrium, m, indexed by [`Axis::index`].
    pub pos: [f64; 3],
    /// Velocity, m/s.
    pub vel: [f64; 3],
    /// Time, s.
    pub t: f64,
    /// Drive phase at `t`, rad; the drive is `k cos(phase)`.
    pub phase: f64,
}

impl State {
    pub fn at_rest() -> Self {
        Self {
            pos: [0.0; 3],
            vel: [0.0; 3],
            t: 0.0,
            phase: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.pos.iter().chain(&self.vel).all(|v| v.is_finite())
            && self.t.is_finite()
            && self.phase.is_finite()
    }
}

/// `−2μ v − G(r) + k cos(phase)` on the driven axis, m/s².
pub fn acceleration(model: &Model3D, pos: [f64; 3], vel: [f64; 3], phase: f64) -> [f64; 3] {
    let f = model.compiled_force();
    let max_pow = f.iter().map(|c| c.max_pow()).max().unwrap_or(0);
    let pw = power_table(pos, max_pow);
    let d = model.drive.axis.index();
    let drive = model.drive.k * phase.cos();
    std::array::from_fn(|i| {
        let mut a = -2.0 * model.mu[i] * vel[i] - f[i].eval_with_powers(&pw);
        if i == d {
            a += drive;
        }
        a
    })
}

/// Energy per unit mass `V(r) + |v|²/2`, when the model has a potential.
pub fn specific_energy(model: &Model3D, pos: [f64; 3], vel: [f64; 3]) -> Option<f64> {
    model
        .potential()
        .map(|v| v.eval(pos) + 0.5 * vel.iter().map(|x| x * x).sum::<f64>())
}

/// Sampled position and velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub pos: [f64; 3],
    pub vel: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// Sampling stride, s.
    pub dt: f64,
    /// Reference period (drive period, or the driven axis' natural period
    /// without drive), s.
    pub period: f64,
    pub final_state: State,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrationOptions {
    pub rtol: f64,
    /// Absolute position tolerance, m; velocities use it times `ω0`.
    pub atol_pos: f64,
    pub samples_per_period: usize,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol_pos: 1e-18,
            samples_per_period: 64,
        }
    }
}

fn reference_period(model: &Model3D) -> f64 {
    if model.drive.omega > 0.0 {
        2.0 * PI / model.drive.omega
    } else {
        let w = model.driven().omega0;
        if w > 0.0 {
            2.0 * PI / w
        } else {
            1.0
        }
    }
}

/// Integrator bound to one model; keeps step-size history across calls.
pub struct Propagator<'m> {
    model: &'m Model3D,
    solver: Dopri5<6>,
}

impl<'m> Propagator<'m> {
    pub fn new(model: &'m Model3D, opts: &IntegrationOptions) -> Self {
        let wmax = model
            .axes
            .iter()
            .map(|a| a.omega0)
            .fold(0.0, f64::max)
            .max(model.drive.omega)
            .max(1.0);
        let a = opts.atol_pos;
        let tol = Tolerances::new(opts.rtol, [a, a, a, a * wmax, a * wmax, a * wmax]);
        Self {
            model,
            solver: Dopri5::new(tol),
        }
    }

    pub fn model(&self) -> &Model3D {
        self.model
    }

    /// Advance `state` by `duration`; `observer` sees samples every `stride` seconds.
    pub fn advance<O>(
        &mut self,
        state: &State,
        duration: f64,
        stride: Option<f64>,
        observer: &mut O,
    ) -> Result<State, DynamicsError>
    where
        O: FnMut(Sample),
    {
        if !(duration > 0.0) {
            return Err(DynamicsError::Invalid("duration must be positive".into()));
        }
        if !state.is_finite() {
            return Err(DynamicsError::Invalid("initial state is not finite".into()));
        }
        let model = self.model;
        let w = model.drive.omega;
        let phase0 = state.phase;
        let t0 = state.t;
        // integrate in local time τ = t − t0 so long runs keep full precision
        let mut rhs = |tau: f64, y: &[f64; 6]| {
            let pos = [y[0], y[1], y[2]];
            let vel = [y[3], y[4], y[5]];
            let a = acceleration(model, pos, vel, phase0 + w * tau);
            [vel[0], vel[1], vel[2], a[0], a[1], a[2]]
        };
        let y0 = [
            state.pos[0],
            state.pos[1],
            state.pos[2],
            state.vel[0],
            state.vel[1],
            state.vel[2],
        ];
        let mut obs = |tau: f64, y: &[f64; 6]| {
            observer(Sample {
                t: t0 + tau,
                pos: [y[0], y[1], y[2]],
                vel: [y[3], y[4], y[5]],
            });
        };
        let y = self
            .solver
            .run(&mut rhs, 0.0, y0, duration, stride, &mut obs)
            .map_err(|e| match e {
                IntegrateError::StepUnderflow { t, h } => {
                    IntegrateError::StepUnderflow { t: t + t0, h }
                }
                IntegrateError::NonFinite { t } => IntegrateError::NonFinite { t: t + t0 },
                IntegrateError::MaxSteps { t, max_steps } => IntegrateError::MaxSteps {
                    t: t + t0,
                    max_steps,
                },
                other => other,
            })?;
        let phase = (phase0 + w * duration).rem_euclid(2.0 * PI);
        Ok(State {
            pos: [y[0], y[1], y[2]],
            vel: [y[3], y[4], y[5]],
            t: t0 + duration,
            phase,
        })
    }
}

/// Integrate `duration` seconds from `state0`, sampled on a fixed stride.
pub fn integrate(
    model: &Model3D,
    state0: &State,
    duration: f64,
    opts: &IntegrationOptions,
) -> Result<Trajectory, DynamicsError> {
    let period = reference_period(model);
    let dt = period / opts.samples_per_period.max(4) as f64;
    let mut samples = Vec::with_capacity((duration / dt) as usize + 2);
    let mut prop = Propagator::new(model, opts);
    let final_state = prop.advance(state0, duration, Some(dt), &mut |s| samples.push(s))?;
    Ok(Trajectory {
        samples,
        dt,
        period,
        final_state,
    })
}

/// Half peak-to-peak amplitudes over a window and its two halves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyAmplitude {
    /// Per axis, m, indexed by [`Axis::index`].
    pub amplitude: [f64; 3],
    pub first_half: [f64; 3],
    pub second_half: [f64; 3],
    /// Both halves agree within 1% on every axis.
    pub converged: bool,
}

/// Relative agreement needed between the two half-window estimates.
pub const CONVERGENCE_TOL: f64 = 0.01;
/// Minimum window length in reference periods.
pub const MIN_WINDOW_PERIODS: f64 = 20.0;

/// Running extrema of each axis, refined between samples.
#[derive(Clone, Copy, Debug)]
struct Extrema {
    hi: [f64; 3],
    lo: [f64; 3],
}

impl Extrema {
    fn new() -> Self {
        Self {
            hi: [f64::NEG_INFINITY; 3],
            lo: [f64::INFINITY; 3],
        }
    }

    fn push_point(&mut self, i: usize, x: f64) {
        self.hi[i] = self.hi[i].max(x);
        self.lo[i] = self.lo[i].min(x);
    }

    fn push(&mut self, prev: Option<&Sample>, s: &Sample) {
        for i in 0..3 {
            self.push_point(i, s.pos[i]);
            if let Some(p) = prev {
                let (v0, v1) = (p.vel[i], s.vel[i]);
                if v0 * v1 < 0.0 {
                    // extremum between the samples: locate the velocity zero
                    // linearly, evaluate the position Hermite cubic there
                    let h = s.t - p.t;
                    let th = v0 / (v0 - v1);
                    let h00 = (1.0 + 2.0 * th) * (1.0 - th).powi(2);
                    let h10 = th * (1.0 - th).powi(2);
                    let h01 = th * th * (3.0 - 2.0 * th);
                    let h11 = th * th * (th - 1.0);
                    let x = h00 * p.pos[i] + h10 * h * v0 + h01 * s.pos[i] + h11 * h * v1;
                    self.push_point(i, x);
                }
            }
        }
    }

    fn amplitude(&self) -> [f64; 3] {
        std::array::from_fn(|i| {
            if self.hi[i] >= self.lo[i] {
                0.5 * (self.hi[i] - self.lo[i])
            } else {
                0.0
            }
        })
    }
}

fn halves_agree(a: &[f64; 3], b: &[f64; 3]) -> bool {
    let scale = a.iter().chain(b).fold(0.0f64, |m, v| m.max(*v));
    (0..3).all(|i| {
        let d = (a[i] - b[i]).abs();
        d <= CONVERGENCE_TOL * a[i].max(b[i]) || d <= 1e-6 * scale || d <= 1e-15
    })
}

/// Steady amplitude over samples with `t` in `[window.0, window.1]`.
pub fn steady_amplitude(
    traj: &Trajectory,
    window: (f64, f64),
) -> Result<SteadyAmplitude, DynamicsError> {
    let (ta, tb) = window;
    let periods = (tb - ta) / traj.period;
    if !(periods >= MIN_WINDOW_PERIODS * (1.0 - 1e-9)) {
        return Err(DynamicsError::WindowTooShort {
            periods,
            required: MIN_WINDOW_PERIODS,
        });
    }
    let tm = 0.5 * (ta + tb);
    let (mut all, mut first, mut second) = (Extrema::new(), Extrema::new(), Extrema::new());
    let mut prev: Option<&Sample> = None;
    let mut prev_half: Option<&Sample> = None;
    let mut count = 0usize;
    for s in traj.samples.iter().filter(|s| s.t >= ta && s.t <= tb) {
        count += 1;
        all.push(prev, s);
        let half = if s.t < tm { &mut first } else { &mut second };
        let crosses = prev.is_some_and(|p| (p.t < tm) != (s.t < tm));
        half.push(if crosses { None } else { prev_half }, s);
        prev = Some(s);
        prev_half = Some(s);
    }
    if count < 4 {
        return Err(DynamicsError::EmptyTrajectory);
    }
    let (f, s) = (first.amplitude(), second.amplitude());
    Ok(SteadyAmplitude {
        amplitude: all.amplitude(),
        first_half: f,
        second_half: s,
        converged: halves_agree(&f, &s),
    })
}

/// Quasi-static sweep of the drive frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepProtocol {
    pub start_hz: f64,
    pub end_hz: f64,
    pub step_hz: f64,
    /// Integration time before measuring at each step, s.
    pub settle_time: f64,
    /// Length of one measurement window, s.
    pub measure_time: f64,
    /// Reset the drive phase to zero at every step instead of carrying it.
    pub reset_phase: bool,
}

impl SweepProtocol {
    pub fn direction(&self) -> Direction {
        if self.end_hz >= self.start_hz {
            Direction::Positive
        } else {
            Direction::Negative
        }
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let n = ((self.end_hz - self.start_hz).abs() / self.step_hz + 1e-9).floor() as usize;
        let sgn = if self.direction() == Direction::Positive {
            1.0
        } else {
            -1.0
        };
        (0..=n)
            .map(|i| self.start_hz + sgn * self.step_hz * i as f64)
            .collect()
    }

    /// Same protocol scanned the other way.
    pub fn reversed(&self) -> Self {
        Self {
            start_hz: self.end_hz,
            end_hz: self.start_hz,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.step_hz > 0.0) || !self.step_hz.is_finite() {
            return Err(DynamicsError::InvalidProtocol(
                "step must be positive".into(),
            ));
        }
        if !(self.start_hz > 0.0 && self.end_hz > 0.0)
            || !self.start_hz.is_finite()
            || !self.end_hz.is_finite()
        {
            return Err(DynamicsError::InvalidProtocol(
                "frequencies must be positive".into(),
            ));
        }
        let f_min = self.start_hz.min(self.end_hz);
        for (name, t) in [("settle", self.settle_time), ("measure", self.measure_time)] {
            if !(t * f_min >= 50.0) {
                return Err(DynamicsError::InvalidProtocol(format!(
                    "{name} time covers {:.1} drive periods, need at least 50",
                    t * f_min
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRecord {
    pub freq_hz: f64,
    /// `f − ω0/2π` of the driven axis, Hz.
    pub sigma_hz: f64,
    /// Indexed by [`Axis::index`].
    pub amplitude: [f64; 3],
    pub converged: bool,
}

impl SweepRecord {
    pub fn a(&self, axis: Axis) -> f64 {
        self.amplitude[axis.index()]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutcome {
    pub direction: Direction,
    pub records: Vec<SweepRecord>,
    pub final_state: State,
    /// Frequency and error of a step that failed; earlier records are kept.
    pub failure: Option<(f64, DynamicsError)>,
}

/// Measurement-window cap as a multiple of the settle time.
pub const SETTLE_CAP: f64 = 20.0;

/// Run a sweep from `initial` (equilibrium at rest by default), carrying the
/// full state from one step to the next.
pub fn sweep(
    model: &Model3D,
    protocol: &SweepProtocol,
    initial: Option<State>,
    opts: &IntegrationOptions,
) -> Result<SweepOutcome, DynamicsError> {
    sweep_observed(model, protocol, initial, opts, &mut |_, _| {})
}

/// [`sweep`], handing each step's record and last measurement window to `observer`.
pub fn sweep_observed<O>(
    model: &Model3D,
    protocol: &SweepProtocol,
    initial: Option<State>,
    opts: &IntegrationOptions,
    observer: &mut O,
) -> Result<SweepOutcome, DynamicsError>
where
    O: FnMut(&SweepRecord, &Trajectory),
{
    protocol.validate()?;
    let mut state = initial.unwrap_or_else(State::at_rest);
    let mut records = Vec::new();
    let f0 = model.driven().omega0 / (2.0 * PI);
    let mut stepped = model.clone();
    let mut tol_history: Option<Dopri5<6>> = None;
    for f in protocol.frequencies() {
        stepped = stepped.with_drive_omega(2.0 * PI * f);
        if protocol.reset_phase {
            state.phase = 0.0;
        }
        match sweep_step(&stepped, protocol, &state, opts, &mut tol_history) {
            Ok((rec_amp, converged, traj)) => {
                state = traj.final_state;
                let rec = SweepRecord {
                    freq_hz: f,
                    sigma_hz: f - f0,
                    amplitude: rec_amp,
                    converged,
                };
                observer(&rec, &traj);
                records.push(rec);
            }
            Err(e) => {
                return Ok(SweepOutcome {
                    direction: protocol.direction(),
                    records,
                    final_state: state,
                    failure: Some((f, e)),
                })
            }
        }
    }
    Ok(SweepOutcome {
        direction: protocol.direction(),
        records,
        final_state: state,
        failure: None,
    })
}

fn sweep_step(
    model: &Model3D,
    protocol: &SweepProtocol,
    state: &State,
    opts: &IntegrationOptions,
    history: &mut Option<Dopri5<6>>,
) -> Result<([f64; 3], bool, Trajectory), DynamicsError> {
    let mut prop = Propagator::new(model, opts);
    if let Some(h) = history.take() {
        prop.solver = h;
    }
    let period = 2.0 * PI / model.drive.omega;
    let dt = period / opts.samples_per_period.max(4) as f64;
    let mut s = prop.advance(state, protocol.settle_time, None, &mut |_| {})?;
    let mut elapsed = 0.0;
    let cap = SETTLE_CAP * protocol.settle_time;
    let result = loop {
        let mut samples = Vec::with_capacity((protocol.measure_time / dt) as usize + 2);
        let start = s.t;
        s = prop.advance(&s, protocol.measure_time, Some(dt), &mut |x| {
            samples.push(x)
        })?;
        elapsed += protocol.measure_time;
        let traj = Trajectory {
            samples,
            dt,
            period,
            final_state: s,
        };
        let st = steady_amplitude(&traj, (start, s.t))?;
        if st.converged || elapsed + protocol.measure_time > cap {
            break (st.amplitude, st.converged, traj);
        }
    };
    *history = Some(prop.solver);
    Ok(result)
}

/// Largest single-step amplitude change along `axis` as
/// `(frequency before, frequency after, ratio)`, when the ratio exceeds `min_ratio`.
pub fn jump(records: &[SweepRecord], axis: Axis, min_ratio: f64) -> Option<(f64, f64, f64)> {
    records
        .windows(2)
        .filter_map(|w| {
            let (a, b) = (w[0].a(axis), w[1].a(axis));
            let r = a.max(b) / a.min(b).max(f64::MIN_POSITIVE);
            (r > min_ratio).then_some((w[0].freq_hz, w[1].freq_hz, r))
        })
        .max_by(|x, y| x.2.total_cmp(&y.2))
}

/// Projection plane of a trajectory image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    Xz,
    Xy,
    Yz,
}

impl Plane {
    /// (horizontal, vertical) axes.
    pub fn axes(self) -> (Axis, Axis) {
        match self {
            Plane::Xz => (Axis::X, Axis::Z),
            Plane::Xy => (Axis::X, Axis::Y),
            Plane::Yz => (Axis::Y, Axis::Z),
        }
    }
}

impl std::str::FromStr for Plane {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "xz" | "zx" => Ok(Plane::Xz),
            "xy" | "yx" => Ok(Plane::Xy),
            "yz" | "zy" => Ok(Plane::Yz),
            other => Err(format!("unknown plane '{other}' (expected xz, xy or yz)")),
        }
    }
}

/// Time-averaged 2D histogram of positions.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryImage {
    pub plane: Plane,
    /// Horizontal bin edges, m.
    pub u_edges: Vec<f64>,
    /// Vertical bin edges, m.
    pub v_edges: Vec<f64>,
    /// Row-major, `counts[row * nu + col]`, row 0 at the lowest `v`.
    pub counts: Vec<u64>,
    /// Time covered by the samples, s.
    pub exposure: f64,
}

/// Histogram the trajectory on a square `bins × bins` grid centered on the
/// mean position, wide enough for every sample.
pub fn trajectory_image(
    traj: &Trajectory,
    plane: Plane,
    bins: usize,
) -> Result<TrajectoryImage, DynamicsError> {
    if traj.samples.is_empty() {
        return Err(DynamicsError::EmptyTrajectory);
    }
    if bins == 0 {
        return Err(DynamicsError::Invalid("need at least one bin".into()));
    }
    let (ua, va) = plane.axes();
    let n = traj.samples.len() as f64;
    let cu = traj.samples.iter().map(|s| s.pos[ua.index()]).sum::<f64>() / n;
    let cv = traj.samples.iter().map(|s| s.pos[va.index()]).sum::<f64>() / n;
    let mut half = traj
        .samples
        .iter()
        .map(|s| {
            (s.pos[ua.index()] - cu)
                .abs()
                .max((s.pos[va.index()] - cv).abs())
        })
        .fold(0.0, f64::max);
    half = if half > 0.0 {
        half * (1.0 + 1e-9)
    } else {
        1e-12
    };
    let edges = |c: f64| {
        (0..=bins)
            .map(|i| c - half + 2.0 * half * i as f64 / bins as f64)
            .collect::<Vec<_>>()
    };
    let u_edges = edges(cu);
    let v_edges = edges(cv);
    let mut counts = vec![0u64; bins * bins];
    let idx = |x: f64, c: f64| {
        (((x - (c - half)) / (2.0 * half) * bins as f64).floor() as isize)
            .clamp(0, bins as isize - 1) as usize
    };
    for s in &traj.samples {
        let col = idx(s.pos[ua.index()], cu);
        let row = idx(s.pos[va.index()], cv);
        counts[row * bins + col] += 1;
    }
    let exposure = traj.samples.last().unwrap().t - traj.samples[0].t;
    Ok(TrajectoryImage {
        plane,
        u_edges,
        v_edges,
        counts,
        exposure,
    })
}

impl TrajectoryImage {
    pub fn nu(&self) -> usize {
        self.u_edges.len() - 1
    }

    pub fn nv(&self) -> usize {
        self.v_edges.len() - 1
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn count(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.nu() + col]
    }

    /// Occupied bin ranges `((col_min, col_max), (row_min, row_max))`.
    pub fn support(&self) -> Option<((usize, usize), (usize, usize))> {
        let (mut c0, mut c1, mut r0, mut r1) = (usize::MAX, 0, usize::MAX, 0);
        for r in 0..self.nv() {
            for c in 0..self.nu() {
                if self.count(r, c) > 0 {
                    c0 = c0.min(c);
                    c1 = c1.max(c);
                    r0 = r0.min(r);
                    r1 = r1.max(r);
                }
            }
        }
        (c0 != usize::MAX).then_some(((c0, c1), (r0, r1)))
    }

    /// Physical width and height of the occupied region, m.
    pub fn support_size(&self) -> Option<(f64, f64)> {
        let ((c0, c1), (r0, r1)) = self.support()?;
        let du = self.u_edges[1] - self.u_edges[0];
        let dv = self.v_edges[1] - self.v_edges[0];
        Some(((c1 - c0 + 1) as f64 * du, (r1 - r0 + 1) as f64 * dv))
    }

    /// Fraction of bins inside the support's bounding box with nonzero count.
    pub fn fill_fraction(&self) -> f64 {
        let Some(((c0, c1), (r0, r1))) = self.support() else {
            return 0.0;
        };
        let mut filled = 0usize;
        for r in r0..=r1 {
            for c in c0..=c1 {
                filled += usize::from(self.count(r, c) > 0);
            }
        }
        filled as f64 / ((c1 - c0 + 1) * (r1 - r0 + 1)) as f64
    }

    /// CSV rows `u_m, v_m, count` at bin centers.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let (ua, va) = self.plane.axes();
        writeln!(w, "{}_m,{}_m,count", ua.label(), va.label())?;
        for r in 0..self.nv() {
            let v = 0.5 * (self.v_edges[r] + self.v_edges[r + 1]);
            for c in 0..self.nu() {
                let u = 0.5 * (self.u_edges[c] + self.u_edges[c + 1]);
                writeln!(w, "{u:.6e},{v:.6e},{}", self.count(r, c))?;
            }
        }
        Ok(())
    }

    /// Binary 8-bit graymap, brightest at the maximum count, top row = highest `v`.
    /// `comments` go into the header as `#` lines.
    pub fn write_pgm<W: Write>(&self, w: &mut W, comments: &[String]) -> std::io::Result<()> {
        let max = self.counts.iter().copied().max().unwrap_or(0).max(1);
        writeln!(w, "P5")?;
        for c in comments {
            writeln!(w, "# {}", c.replace('\n', " "))?;
        }
        write!(w, "{} {}\n255\n", self.nu(), self.nv())?;
        let mut row = Vec::with_capacity(self.nu());
        for r in (0..self.nv()).rev() {
            row.clear();
            for c in 0..self.nu() {
                row.push(((self.count(r, c) as f64 / max as f64) * 255.0).round() as u8);
            }
            w.write_all(&row)?;
        }
        Ok(())
    }
}

/// State on a steady oscillation `ξ = a cos(phase − γ)` of the driven axis.
pub fn state_on_orbit(model: &Model3D, a: f64, gamma: f64, phase: f64) -> State {
    let mut s = State {
        phase,
        ..State::at_rest()
    };
    let d = model.drive.axis.index();
    s.pos[d] = a * (phase - gamma).cos();
    s.vel[d] = -a * model.drive.omega * (phase - gamma).sin();
    s
}
