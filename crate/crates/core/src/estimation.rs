//! Parameter recovery from swept response data.
//!
//! [`fit_response`] fits `μ`, `k`, `α_total` and optionally a lumped coupling
//! value by Levenberg–Marquardt on the branch a quasi-static scan in the given
//! direction would follow. Initial values come from the data alone:
//!
//! * `k0` from the far tails, where `a ≈ k / (2 ω0 |σ|)`, by a regression
//!   through the origin over the lowest 20% of amplitudes;
//! * `μ0 = k0 / (2 ω0 a_max)` from the largest observed amplitude;
//! * `α0` from [`fit_peak`] at the largest observed amplitude.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coefficients::AxisCoefficients;
use crate::multiscale::{tracked_response, Coupling, Direction, ResponseInputs};
use crate::poly::Axis;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("least squares did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("Jacobian is rank deficient; parameters are not identifiable from these data")]
    DegenerateJacobian,
    #[error("the amplitude maximum lies at the edge of the data; no resonance peak in range")]
    NoPeak,
    #[error("peak amplitude must be nonzero")]
    ZeroAmplitude,
    #[error("need at least {needed} usable points, have {have}")]
    TooFewPoints { needed: usize, have: usize },
    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),
    #[error("measurement file: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One measured point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRow {
    pub freq_hz: f64,
    pub amplitude_m: f64,
    pub axis: Axis,
    pub direction: Direction,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Measurement {
    pub rows: Vec<MeasurementRow>,
}

impl Measurement {
    /// Read `freq_hz, amplitude_m, axis, direction` rows; lines starting with `#` are skipped.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, FitError> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let rows = rdr
            .deserialize()
            .collect::<Result<Vec<MeasurementRow>, _>>()?;
        if rows.is_empty() {
            return Err(FitError::InvalidMeasurement("no data rows".into()));
        }
        let m = Self { rows };
        m.validate()?;
        Ok(m)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), FitError> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Contiguous runs of rows sharing axis and direction, as index ranges.
    pub fn scans(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.rows.len() {
            let split = i == self.rows.len()
                || self.rows[i].axis != self.rows[start].axis
                || self.rows[i].direction != self.rows[start].direction;
            if split {
                if i > start {
                    out.push(start..i);
                }
                start = i;
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), FitError> {
        for (i, r) in self.rows.iter().enumerate() {
            if !(r.amplitude_m >= 0.0) || !r.amplitude_m.is_finite() {
                return Err(FitError::InvalidMeasurement(format!(
                    "row {}: amplitude must be finite and >= 0",
                    i + 1
                )));
            }
            if !(r.freq_hz > 0.0) || !r.freq_hz.is_finite() {
                return Err(FitError::InvalidMeasurement(format!(
                    "row {}: frequency must be positive",
                    i + 1
                )));
            }
        }
        for scan in self.scans() {
            let rows = &self.rows[scan.clone()];
            for (j, w) in rows.windows(2).enumerate() {
                let ok = match w[0].direction {
                    Direction::Positive => w[1].freq_hz > w[0].freq_hz,
                    Direction::Negative => w[1].freq_hz < w[0].freq_hz,
                };
                if !ok {
                    return Err(FitError::InvalidMeasurement(format!(
                        "row {}: frequencies must be strictly {} within a {} scan",
                        scan.start + j + 2,
                        if w[0].direction == Direction::Positive {
                            "increasing"
                        } else {
                            "decreasing"
                        },
                        w[0].direction
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Jump detection: consecutive amplitude ratio above this marks a jump.
pub const JUMP_RATIO: f64 = 1.5;

/// Per-row weights, zero within two scan steps of a detected jump.
pub fn jump_weights(m: &Measurement) -> Vec<f64> {
    let mut w = vec![1.0; m.rows.len()];
    for scan in m.scans() {
        let r = &m.rows[scan.clone()];
        for i in 0..r.len().saturating_sub(1) {
            let (a, b) = (r[i].amplitude_m, r[i + 1].amplitude_m);
            let jump = if a.min(b) > 0.0 {
                a.max(b) / a.min(b) > JUMP_RATIO
            } else {
                a != b
            };
            if jump {
                // jump sits between i and i + 1; clear points closer than two steps
                for j in i.saturating_sub(1)..=(i + 2).min(r.len() - 1) {
                    w[scan.start + j] = 0.0;
                }
            }
        }
    }
    w
}

/// `a(σ) = k / (2 ω0 √(σ² + μ²))`.
pub fn linear_response(sigma: f64, mu: f64, k: f64, omega0: f64) -> f64 {
    k / (2.0 * omega0 * (sigma * sigma + mu * mu).sqrt())
}

/// Least-squares `(μ, k)` from near-resonance data in the linear regime.
/// `sigma` is the detuning in rad/s.
pub fn fit_linear(sigma: &[f64], amplitude: &[f64], omega0: f64) -> Result<(f64, f64), FitError> {
    if sigma.len() != amplitude.len() {
        return Err(FitError::InvalidMeasurement(
            "sigma and amplitude lengths differ".into(),
        ));
    }
    if sigma.len() < 3 {
        return Err(FitError::TooFewPoints {
            needed: 3,
            have: sigma.len(),
        });
    }
    let mut idx: Vec<usize> = (0..sigma.len()).collect();
    idx.sort_by(|a, b| sigma[*a].total_cmp(&sigma[*b]));
    let (imax, amax) = idx
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (pos, &i)| {
            if amplitude[i] > best.1 {
                (pos, amplitude[i])
            } else {
                best
            }
        });
    if imax == 0 || imax == idx.len() - 1 {
        return Err(FitError::NoPeak);
    }
    if !(amax > 0.0) {
        return Err(FitError::ZeroAmplitude);
    }
    // width from the points above a_max / √2
    let above: Vec<f64> = idx
        .iter()
        .filter(|&&i| amplitude[i] >= amax / 2f64.sqrt())
        .map(|&i| sigma[i])
        .collect();
    let span = above.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - above.iter().cloned().fold(f64::INFINITY, f64::min);
    let step = (sigma[idx[idx.len() - 1]] - sigma[idx[0]]) / (sigma.len() - 1) as f64;
    let mu0 = (0.5 * span).max(0.5 * step).max(1e-12);
    let k0 = 2.0 * omega0 * mu0 * amax;
    let resid = |p: &[f64]| -> Vec<f64> {
        let (mu, k) = (p[0].exp(), p[1].exp());
        sigma
            .iter()
            .zip(amplitude)
            .map(|(s, a)| (linear_response(*s, mu, k, omega0) - a) / amax)
            .collect()
    };
    let out = levenberg_marquardt(&resid, &[mu0.ln(), k0.ln()], &LmOptions::default());
    if !out.converged {
        return Err(FitError::NonConvergence {
            iterations: out.iterations,
        });
    }
    Ok((out.x[0].exp(), out.x[1].exp()))
}

/// `α3 + Δα2 = 8 ω0 σ_m / (3 a_m²)`; `σ_m` in rad/s, sign preserved.
pub fn fit_peak(a_m: f64, sigma_m: f64, omega0: f64) -> Result<f64, FitError> {
    if a_m == 0.0 || !a_m.is_finite() {
        return Err(FitError::ZeroAmplitude);
    }
    Ok(crate::multiscale::alpha_from_peak(a_m, sigma_m, omega0))
}

/// Options of [`fit_response`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    pub fixed_mu: Option<f64>,
    pub fixed_k: Option<f64>,
    /// Fit a lumped coupling active over this detuning window (rad/s).
    pub coupling_window: Option<(f64, f64)>,
    /// Soft-L1 loss instead of plain least squares.
    pub robust: bool,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            fixed_mu: None,
            fixed_k: None,
            coupling_window: None,
            robust: false,
            max_iterations: 200,
        }
    }
}

/// Estimate with a 95% half-width from the local quadratic model of the loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// `None` when the parameter was held fixed.
    pub half_width: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub omega0: f64,
    pub mu: Estimate,
    pub k: Estimate,
    /// `α3 + Δα2` (uncoupled part), Hz²/m².
    pub alpha_total: Estimate,
    pub coupling: Option<Estimate>,
    pub coupling_window: Option<(f64, f64)>,
    /// `√Σ w r²` in metres.
    pub residual_norm: f64,
    /// Root-mean-square residual over used points, m.
    pub rms: f64,
    pub points: usize,
    pub used: usize,
    pub iterations: usize,
}

impl FitResult {
    /// Response inputs of the fitted model.
    pub fn inputs(&self) -> ResponseInputs {
        let c = AxisCoefficients::duffing(
            Axis::Z,
            self.omega0,
            self.mu.value,
            self.alpha_total.value,
            self.k.value,
        );
        let coupling = match (self.coupling, self.coupling_window) {
            (Some(e), Some(w)) => Coupling::Lumped {
                value: e.value,
                window: w,
            },
            _ => Coupling::None,
        };
        ResponseInputs {
            coeffs: c,
            coupling,
        }
    }

    fn entries(&self) -> Vec<(&'static str, &'static str, Estimate)> {
        let mut v = vec![
            ("mu", "1/s", self.mu),
            ("k", "m/s^2", self.k),
            ("alpha_total", "Hz^2/m^2", self.alpha_total),
        ];
        if let Some(c) = self.coupling {
            v.push(("coupling", "Hz^2/m^2", c));
        }
        v
    }

    /// Human-readable report.
    pub fn report(&self) -> String {
        let mut s = String::new();
        s.push_str("response fit\n");
        s.push_str(&format!(
            "  omega0/2pi    {:.6e} Hz\n",
            self.omega0 / (2.0 * PI)
        ));
        for (name, unit, e) in self.entries() {
            match e.half_width {
                Some(h) => s.push_str(&format!(
                    "  {name:<13} {:.6e} +/- {:.2e} {unit} (95%)\n",
                    e.value, h
                )),
                None => s.push_str(&format!("  {name:<13} {:.6e} {unit} (fixed)\n", e.value)),
            }
        }
        if let Some((lo, hi)) = self.coupling_window {
            s.push_str(&format!(
                "  window        [{:.4e}, {:.4e}] Hz detuning\n",
                lo / (2.0 * PI),
                hi / (2.0 * PI)
            ));
        }
        s.push_str(&format!(
            "  residual norm {:.4e} m over {} of {} points\n",
            self.residual_norm, self.used, self.points
        ));
        s.push_str(&format!("  rms residual  {:.4e} m\n", self.rms));
        s.push_str(&format!("  iterations    {}\n", self.iterations));
        s
    }

    /// `key = value` lines.
    pub fn key_values(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("omega0_hz = {:.12e}\n", self.omega0 / (2.0 * PI)));
        for (name, _, e) in self.entries() {
            s.push_str(&format!("{name} = {:.12e}\n", e.value));
            if let Some(h) = e.half_width {
                s.push_str(&format!("{name}_half_width = {h:.6e}\n"));
            }
        }
        s.push_str(&format!("residual_norm = {:.6e}\n", self.residual_norm));
        s.push_str(&format!("rms = {:.6e}\n", self.rms));
        s.push_str(&format!(
            "points = {}\nused = {}\niterations = {}\n",
            self.points, self.used, self.iterations
        ));
        s
    }
}

struct Layout {
    mu: Option<usize>,
    k: Option<usize>,
    alpha: usize,
    coupling: Option<usize>,
    alpha_scale: f64,
    coupling_scale: f64,
}

/// Fit the multiple-scales response curve to swept amplitude data.
pub fn fit_response(
    m: &Measurement,
    omega0: f64,
    opts: &FitOptions,
) -> Result<FitResult, FitError> {
    m.validate()?;
    let n = m.rows.len();
    if n < 10 {
        return Err(FitError::TooFewPoints {
            needed: 10,
            have: n,
        });
    }
    let sigma: Vec<f64> = m
        .rows
        .iter()
        .map(|r| 2.0 * PI * r.freq_hz - omega0)
        .collect();
    let amp: Vec<f64> = m.rows.iter().map(|r| r.amplitude_m).collect();
    let dir: Vec<Direction> = m.rows.iter().map(|r| r.direction).collect();
    let weights = jump_weights(m);
    let used = weights.iter().filter(|w| **w > 0.0).count();

    let (imax, amax) =
        amp.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |b, (i, a)| if *a > b.1 { (i, *a) } else { b },
        );
    if !(amax > 0.0) {
        return Err(FitError::ZeroAmplitude);
    }
    let smax = sigma[imax];
    let k0 = match opts.fixed_k {
        Some(k) => k,
        None => tail_drive_estimate(&sigma, &amp, omega0).unwrap_or(2.0 * omega0 * amax * 1e3),
    };
    let mu0 = opts.fixed_mu.unwrap_or(k0 / (2.0 * omega0 * amax));
    let mut alpha0 = fit_peak(amax, smax, omega0)?;
    if alpha0 == 0.0 {
        alpha0 = 1.0;
    }

    let mut names = 0usize;
    let mut slot = || {
        names += 1;
        names - 1
    };
    let lay = Layout {
        mu: opts.fixed_mu.is_none().then(&mut slot),
        k: opts.fixed_k.is_none().then(&mut slot),
        alpha: slot(),
        coupling: opts.coupling_window.is_some().then(&mut slot),
        alpha_scale: alpha0.abs(),
        coupling_scale: 1.0,
    };
    let p = names;
    if used < p + 2 {
        return Err(FitError::TooFewPoints {
            needed: p + 2,
            have: used,
        });
    }

    let unpack = |x: &[f64], lay: &Layout| -> (f64, f64, f64, f64) {
        let mu = lay.mu.map_or(mu0, |i| x[i].exp());
        let k = lay.k.map_or(k0, |i| x[i].exp());
        let alpha = x[lay.alpha] * lay.alpha_scale;
        let c = lay.coupling.map_or(0.0, |i| x[i] * lay.coupling_scale);
        (mu, k, alpha, c)
    };
    let robust_scale = 0.02 * amax;
    let model_residuals = |x: &[f64], lay: &Layout| -> Vec<f64> {
        let (mu, k, alpha, c) = unpack(x, lay);
        let coeffs = AxisCoefficients::duffing(Axis::Z, omega0, mu, alpha, k);
        let coupling = match opts.coupling_window {
            Some(w) => Coupling::Lumped {
                value: c,
                window: w,
            },
            None => Coupling::None,
        };
        let inputs = ResponseInputs { coeffs, coupling };
        (0..n)
            .map(|i| {
                if weights[i] == 0.0 {
                    return 0.0;
                }
                let pred = tracked_response(sigma[i], &inputs, dir[i]).unwrap_or(0.0);
                let r = (pred - amp[i]) / amax;
                if opts.robust {
                    let s = robust_scale / amax;
                    r.signum() * s * (2.0 * ((1.0 + (r / s).powi(2)).sqrt() - 1.0)).sqrt()
                } else {
                    r
                }
            })
            .collect()
    };

    let mut x0 = vec![0.0; p];
    if let Some(i) = lay.mu {
        x0[i] = mu0.ln();
    }
    if let Some(i) = lay.k {
        x0[i] = k0.ln();
    }
    x0[lay.alpha] = alpha0 / lay.alpha_scale;
    let mut lay = lay;
    if let Some(ci) = lay.coupling {
        // coarse scan of the coupling magnitude on a log grid, both signs
        let mut best = (f64::INFINITY, 0.0);
        let base = alpha0.abs().max(1.0);
        for e in -3..=30 {
            let mag = base * 10f64.powf(e as f64 / 6.0);
            for c in [mag, -mag] {
                lay.coupling_scale = 1.0;
                let mut x = x0.clone();
                x[ci] = c;
                let cost: f64 = model_residuals(&x, &lay).iter().map(|r| r * r).sum();
                if cost < best.0 {
                    best = (cost, c);
                }
            }
        }
        lay.coupling_scale = best.1.abs();
        x0[ci] = best.1.signum();
    }

    let f = |x: &[f64]| model_residuals(x, &lay);
    let lm_opts = LmOptions {
        max_iterations: opts.max_iterations,
        ..LmOptions::default()
    };
    let mut out = levenberg_marquardt(&f, &x0, &lm_opts);
    if !out.converged {
        return Err(FitError::NonConvergence {
            iterations: out.iterations,
        });
    }
    // the loss has cliffs where a model fold crosses a sample; restart from nearby points
    let cost = |o: &LmOutcome| o.residuals.norm_squared();
    for (dmu, dalpha) in [
        (-0.08, 0.0),
        (0.08, 0.0),
        (0.0, -0.15),
        (0.0, 0.15),
        (-0.08, -0.15),
        (0.08, 0.15),
    ] {
        let mut x = out.x.clone();
        match lay.mu {
            Some(i) => x[i] += dmu,
            None if dmu != 0.0 => continue,
            None => {}
        }
        x[lay.alpha] *= 1.0 + dalpha;
        let trial = levenberg_marquardt(&f, &x, &lm_opts);
        if trial.converged && cost(&trial) < cost(&out) {
            out = trial;
        }
    }
    let (mu, k, alpha, c) = unpack(&out.x, &lay);

    let jtj = &out.jacobian.transpose() * &out.jacobian;
    let dof = used.saturating_sub(p).max(1) as f64;
    let s2 = out.residuals.norm_squared() / dof;
    let cov = jtj
        .clone()
        .try_inverse()
        .ok_or(FitError::DegenerateJacobian)?;
    let diag_scale = jtj.diagonal().max();
    if !(diag_scale > 0.0) || (0..p).any(|i| !(cov[(i, i)] >= 0.0) || !cov[(i, i)].is_finite()) {
        return Err(FitError::DegenerateJacobian);
    }
    let hw = |i: usize| 1.96 * (s2 * cov[(i, i)]).sqrt();
    let est = |value: f64, idx: Option<usize>, to_phys: &dyn Fn(f64) -> f64| Estimate {
        value,
        half_width: idx.map(|i| to_phys(hw(i))),
    };
    let raw = {
        let coeffs = AxisCoefficients::duffing(Axis::Z, omega0, mu, alpha, k);
        let coupling = match opts.coupling_window {
            Some(w) => Coupling::Lumped {
                value: c,
                window: w,
            },
            None => Coupling::None,
        };
        let inputs = ResponseInputs { coeffs, coupling };
        (0..n)
            .filter(|&i| weights[i] > 0.0)
            .map(|i| tracked_response(sigma[i], &inputs, dir[i]).unwrap_or(0.0) - amp[i])
            .collect::<Vec<f64>>()
    };
    let residual_norm = raw.iter().map(|r| r * r).sum::<f64>().sqrt();
    Ok(FitResult {
        omega0,
        mu: est(mu, lay.mu, &|h| mu * h),
        k: est(k, lay.k, &|h| k * h),
        alpha_total: est(alpha, Some(lay.alpha), &|h| h * lay.alpha_scale),
        coupling: lay.coupling.map(|i| Estimate {
            value: c,
            half_width: Some(hw(i) * lay.coupling_scale),
        }),
        coupling_window: opts.coupling_window,
        residual_norm,
        rms: residual_norm / (raw.len().max(1) as f64).sqrt(),
        points: n,
        used,
        iterations: out.iterations,
    })
}

/// Drive amplitude from the tails: regression of `a` on `1/(2 ω0 |σ|)`
/// through the origin, over the lowest 20% of amplitudes.
fn tail_drive_estimate(sigma: &[f64], amp: &[f64], omega0: f64) -> Option<f64> {
    let mut idx: Vec<usize> = (0..amp.len()).filter(|&i| sigma[i] != 0.0).collect();
    idx.sort_by(|a, b| amp[*a].total_cmp(&amp[*b]));
    let take = ((idx.len() as f64 * 0.2).ceil() as usize)
        .max(2)
        .min(idx.len());
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &i in &idx[..take] {
        let x = 1.0 / (2.0 * omega0 * sigma[i].abs());
        sxy += x * amp[i];
        sxx += x * x;
    }
    (sxx > 0.0 && sxy > 0.0).then(|| sxy / sxx)
}

/// Synthetic scan: stable-branch amplitude along `direction` with
/// multiplicative Gaussian noise of relative size `noise`.
pub fn synthesize(
    inputs: &ResponseInputs,
    freqs_hz: &[f64],
    direction: Direction,
    noise: f64,
    seed: u64,
) -> Measurement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise.max(0.0)).expect("finite noise level");
    let w0 = inputs.coeffs.omega0;
    let rows = freqs_hz
        .iter()
        .map(|&f| {
            let sigma = 2.0 * PI * f - w0;
            let a = tracked_response(sigma, inputs, direction).unwrap_or(0.0);
            let eps: f64 = if noise > 0.0 {
                normal.sample(&mut rng)
            } else {
                0.0
            };
            MeasurementRow {
                freq_hz: f,
                amplitude_m: (a * (1.0 + eps)).max(0.0),
                axis: inputs.coeffs.axis,
                direction,
            }
        })
        .collect();
    Measurement { rows }
}

/// Scan grid `f0 + σ/2π` over `[lo_hz, hi_hz]` detuning in `direction` order.
pub fn scan_grid(
    f0_hz: f64,
    lo_hz: f64,
    hi_hz: f64,
    step_hz: f64,
    direction: Direction,
) -> Vec<f64> {
    let n = ((hi_hz - lo_hz) / step_hz + 1e-9).floor() as usize;
    let mut f: Vec<f64> = (0..=n)
        .map(|i| f0_hz + lo_hz + step_hz * i as f64)
        .collect();
    if direction == Direction::Negative {
        f.reverse();
    }
    f
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when the relative cost decrease falls below this.
    pub ftol: f64,
    /// Stop when the relative step falls below this.
    pub xtol: f64,
    pub fd_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            ftol: 1e-14,
            xtol: 1e-12,
            fd_step: 1e-7,
        }
    }
}

const STALL_WINDOW: usize = 10;
const STALL_RTOL: f64 = 1e-6;

pub struct LmOutcome {
    pub x: Vec<f64>,
    pub residuals: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn jacobian<F: Fn(&[f64]) -> Vec<f64>>(
    f: &F,
    x: &[f64],
    f0: &DVector<f64>,
    h: f64,
) -> DMatrix<f64> {
    let m = f0.len();
    let mut j = DMatrix::zeros(m, x.len());
    let mut xp = x.to_vec();
    for c in 0..x.len() {
        let step = h * x[c].abs().max(1.0);
        xp[c] = x[c] + step;
        let fp = f(&xp);
        xp[c] = x[c] - step;
        let fm = f(&xp);
        xp[c] = x[c];
        for r in 0..m {
            let fwd = (fp[r] - f0[r]) / step;
            let bwd = (f0[r] - fm[r]) / step;
            // a residual that switches branch inside the stencil shows up as
            // wildly different one-sided slopes; keep the smooth side
            j[(r, c)] = if (fwd - bwd).abs() > 0.5 * (fwd.abs() + bwd.abs()) + 1e-300
                && (fwd.abs() > 10.0 * bwd.abs() || bwd.abs() > 10.0 * fwd.abs())
            {
                if fwd.abs() < bwd.abs() {
                    fwd
                } else {
                    bwd
                }
            } else {
                0.5 * (fwd + bwd)
            };
        }
    }
    j
}

/// Levenberg–Marquardt with Marquardt's diagonal scaling and a central
/// finite-difference Jacobian.
pub fn levenberg_marquardt<F: Fn(&[f64]) -> Vec<f64>>(
    f: &F,
    x0: &[f64],
    opts: &LmOptions,
) -> LmOutcome {
    let mut x = x0.to_vec();
    let mut r = DVector::from_vec(f(&x));
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut jac = jacobian(f, &x, &r, opts.fd_step);
    let mut converged = false;
    let mut it = 0;
    let mut history = vec![cost];
    while it < opts.max_iterations {
        it += 1;
        // stalled on a non-smooth ridge
        if history.len() > STALL_WINDOW
            && history[history.len() - 1 - STALL_WINDOW] - cost <= STALL_RTOL * cost
        {
            converged = true;
            break;
        }
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        if g.amax() <= 1e-15 * cost.max(1e-300) {
            converged = true;
            break;
        }
        let mut improved = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..x.len() {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(delta) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let xn: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
            let rn = DVector::from_vec(f(&xn));
            let cn = rn.norm_squared();
            if cn.is_finite() && cn < cost {
                let rel = (cost - cn) / cost.max(1e-300);
                let step = delta.norm() / (x.iter().map(|v| v * v).sum::<f64>().sqrt() + opts.xtol);
                x = xn;
                r = rn;
                cost = cn;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if rel < opts.ftol || step < opts.xtol {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // no downhill step at any damping: a (possibly non-smooth) minimum
            converged = true;
            break;
        }
        history.push(cost);
        jac = jacobian(f, &x, &r, opts.fd_step);
        if converged {
            break;
        }
    }
    LmOutcome {
        x,
        residuals: r,
        jacobian: jac,
        iterations: it,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const W0: f64 = 2.0 * PI * 191.7e3;

    #[test]
    fn lm_solves_exponential_fit() {
        let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| 2.5 * (-1.3 * t).exp()).collect();
        let f = |p: &[f64]| {
            t.iter()
                .zip(&y)
                .map(|(t, y)| p[0] * (-p[1] * t).exp() - y)
                .collect::<Vec<_>>()
        };
        let out = levenberg_marquardt(&f, &[1.0, 0.5], &LmOptions::default());
        assert!(out.converged);
        assert!((out.x[0] - 2.5).abs() < 1e-8 && (out.x[1] - 1.3).abs() < 1e-8);
    }

    #[test]
    fn linear_fit_exact() {
        let sig: Vec<f64> = (-25..=25).map(|i| 40.0 * i as f64).collect();
        let a: Vec<f64> = sig
            .iter()
            .map(|s| linear_response(*s, 177.1, 7.5e4, W0))
            .collect();
        let (mu, k) = fit_linear(&sig, &a, W0).unwrap();
        assert!((mu / 177.1 - 1.0).abs() < 1e-8);
        assert!((k / 7.5e4 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn linear_fit_needs_peak() {
        let sig: Vec<f64> = (1..=25).map(|i| 40.0 * i as f64).collect();
        let a: Vec<f64> = sig
            .iter()
            .map(|s| linear_response(*s, 177.1, 7.5e4, W0))
            .collect();
        assert!(matches!(fit_linear(&sig, &a, W0), Err(FitError::NoPeak)));
    }

    #[test]
    fn peak_fit_properties() {
        let a = fit_peak(1.758e-4, 1.885e3, W0).unwrap();
        assert!((a / 0.1959e18 - 1.0).abs() < 2e-3);
        assert!(fit_peak(1.758e-4, -1.885e3, W0).unwrap() < 0.0);
        let s = 3.7;
        let b = fit_peak(1.758e-4 * s, 1.885e3 * s * s, W0).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
        assert!(matches!(
            fit_peak(0.0, 1.0, W0),
            Err(FitError::ZeroAmplitude)
        ));
    }

    #[test]
    fn csv_roundtrip_and_validation() {
        let m = Measurement {
            rows: vec![
                MeasurementRow {
                    freq_hz: 1.0e5,
                    amplitude_m: 1e-6,
                    axis: Axis::Z,
                    direction: Direction::Positive,
                },
                MeasurementRow {
                    freq_hz: 1.1e5,
                    amplitude_m: 2e-6,
                    axis: Axis::Z,
                    direction: Direction::Positive,
                },
                MeasurementRow {
                    freq_hz: 1.1e5,
                    amplitude_m: 2e-6,
                    axis: Axis::Z,
                    direction: Direction::Negative,
                },
            ],
        };
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("freq_hz,amplitude_m,axis,direction"));
        assert_eq!(Measurement::read_csv(&buf[..]).unwrap(), m);
        assert_eq!(m.scans().len(), 2);
        let bad = "freq_hz,amplitude_m,axis,direction\n2,1e-6,z,positive\n1,1e-6,z,positive\n";
        assert!(Measurement::read_csv(bad.as_bytes()).is_err());
        assert!(Measurement::read_csv("freq_hz,amplitude_m,axis,direction\n".as_bytes()).is_err());
        assert!(Measurement::read_csv("".as_bytes()).is_err());
    }

    #[test]
    fn jump_neighbourhood_is_zero_weighted() {
        let amps = [1.0, 1.1, 1.2, 1.3, 0.3, 0.28, 0.26, 0.25];
        let m = Measurement {
            rows: amps
                .iter()
                .enumerate()
                .map(|(i, a)| MeasurementRow {
                    freq_hz: 1.0 + i as f64,
                    amplitude_m: *a,
                    axis: Axis::Z,
                    direction: Direction::Positive,
                })
                .collect(),
        };
        assert_eq!(
            jump_weights(&m),
            vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0]
        );
    }

    #[test]
    fn synthesis_is_deterministic() {
        let c = AxisCoefficients::duffing(Axis::Z, W0, 177.1, 0.1959e18, 7.5e4);
        let inputs = ResponseInputs::uncoupled(c);
        let f = scan_grid(191.7e3, -3000.0, 1500.0, 100.0, Direction::Positive);
        let a = synthesize(&inputs, &f, Direction::Positive, 0.02, 7);
        let b = synthesize(&inputs, &f, Direction::Positive, 0.02, 7);
        let c2 = synthesize(&inputs, &f, Direction::Positive, 0.02, 8);
        assert_eq!(a, b);
        assert_ne!(a, c2);
    }
}
