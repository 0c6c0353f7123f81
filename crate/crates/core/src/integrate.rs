//! Adaptive Dormand–Prince 5(4) integrator with dense output.
//!
//! Generic over the state dimension. The error estimate of each component is
//! scaled by `atol_i + rtol · max(|y_i|, |y_new_i|, peak_i)` where `peak_i` is
//! the largest `|y_i|` seen so far, so that oscillating components passing
//! through zero are not held to an absolute tolerance only. Output is produced
//! on a fixed stride through the method's fourth-order continuous extension.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error("step size underflow at t = {t:e} s (h = {h:e} s)")]
    StepUnderflow { t: f64, h: f64 },
    #[error("non-finite state at t = {t:e} s")]
    NonFinite { t: f64 },
    #[error("step budget of {max_steps} exhausted at t = {t:e} s")]
    MaxSteps { t: f64, max_steps: usize },
    #[error("invalid integration request: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances<const N: usize> {
    pub rtol: f64,
    pub atol: [f64; N],
    /// Upper bound on the step, if any.
    pub h_max: Option<f64>,
    pub max_steps: usize,
}

impl<const N: usize> Tolerances<N> {
    pub fn new(rtol: f64, atol: [f64; N]) -> Self {
        Self {
            rtol,
            atol,
            h_max: None,
            max_steps: 500_000_000,
        }
    }
}

impl<const N: usize> Default for Tolerances<N> {
    fn default() -> Self {
        Self::new(1e-9, [0.0; N])
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// error weights: b5 - b4
const E1: f64 = 35.0 / 384.0 - 5179.0 / 57600.0;
const E3: f64 = 500.0 / 1113.0 - 7571.0 / 16695.0;
const E4: f64 = 125.0 / 192.0 - 393.0 / 640.0;
const E5: f64 = -2187.0 / 6784.0 + 92097.0 / 339200.0;
const E6: f64 = 11.0 / 84.0 - 187.0 / 2100.0;
const E7: f64 = -1.0 / 40.0;
// continuous extension
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Dense-output polynomial over one accepted step.
#[derive(Clone, Copy, Debug)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    r: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    pub fn eval(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let r = &self.r;
        std::array::from_fn(|i| {
            r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])))
        })
    }
}

/// Counters of one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Stateful solver; keeps the step size and running peaks between calls so
/// that an integration split into consecutive chunks behaves like one run.
#[derive(Clone, Debug)]
pub struct Dopri5<const N: usize> {
    pub tol: Tolerances<N>,
    h: Option<f64>,
    peak: [f64; N],
    pub stats: Stats,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

impl<const N: usize> Dopri5<N> {
    pub fn new(tol: Tolerances<N>) -> Self {
        Self {
            tol,
            h: None,
            peak: [0.0; N],
            stats: Stats::default(),
        }
    }

    /// Forget the step-size history and peaks.
    pub fn reset(&mut self) {
        self.h = None;
        self.peak = [0.0; N];
    }

    fn initial_step<F>(&self, f: &mut F, t: f64, y: &[f64; N], dy: &[f64; N], span: f64) -> f64
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
    {
        // Hairer–Wanner starting step heuristic
        let sc: [f64; N] = std::array::from_fn(|i| {
            self.tol.atol[i] + self.tol.rtol * y[i].abs().max(self.peak[i])
        });
        let norm = |v: &[f64; N]| {
            (v.iter()
                .zip(&sc)
                .map(|(a, s)| if *s > 0.0 { (a / s).powi(2) } else { 0.0 })
                .sum::<f64>()
                / N as f64)
                .sqrt()
        };
        let d0 = norm(y);
        let d1 = norm(dy);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6 * span
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(span);
        let y1 = axpy(y, h0, &[(1.0, dy)]);
        let dy1 = f(t + h0, &y1);
        let diff: [f64; N] = std::array::from_fn(|i| dy1[i] - dy[i]);
        let d2 = norm(&diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6 * span)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(span)
    }

    /// Integrate from `(t0, y0)` to `t1`. `observer(t, y)` is called at
    /// `t0 + i·stride` for every such time not past `t1` (including `t0`);
    /// pass `None` for no sampling. Returns the state at `t1`.
    pub fn run<F, O>(
        &mut self,
        f: &mut F,
        t0: f64,
        y0: [f64; N],
        t1: f64,
        stride: Option<f64>,
        observer: &mut O,
    ) -> Result<[f64; N], IntegrateError>
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
        O: FnMut(f64, &[f64; N]),
    {
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(IntegrateError::Invalid(format!(
                "need t1 > t0, got [{t0}, {t1}]"
            )));
        }
        if let Some(s) = stride {
            if !(s > 0.0) {
                return Err(IntegrateError::Invalid(
                    "sampling stride must be positive".into(),
                ));
            }
        }
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(IntegrateError::NonFinite { t: t0 });
        }
        let span = t1 - t0;
        let mut next_sample = 0usize;
        let sample_time = |i: usize| t0 + i as f64 * stride.unwrap_or(f64::INFINITY);
        if stride.is_some() {
            observer(t0, &y0);
            next_sample = 1;
        }
        let mut t = t0;
        let mut y = y0;
        for (p, v) in self.peak.iter_mut().zip(&y) {
            *p = p.max(v.abs());
        }
        let mut k1 = f(t, &y);
        self.stats.evaluations += 1;
        let mut h = match self.h {
            Some(h) => h.min(span),
            None => {
                self.stats.evaluations += 1;
                self.initial_step(f, t, &y, &k1, span)
            }
        };
        if let Some(hm) = self.tol.h_max {
            h = h.min(hm);
        }
        let mut steps = 0usize;
        loop {
            steps += 1;
            if steps > self.tol.max_steps {
                return Err(IntegrateError::MaxSteps {
                    t,
                    max_steps: self.tol.max_steps,
                });
            }
            let last = t + h >= t1 || (t1 - (t + h)) < 1e-12 * span;
            if last {
                h = t1 - t;
            }
            if h <= 16.0 * f64::EPSILON * t.abs().max(span) {
                return Err(IntegrateError::StepUnderflow { t, h });
            }
            let k2 = f(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
            let k3 = f(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
            let k4 = f(
                t + C4 * h,
                &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            );
            let k5 = f(
                t + C5 * h,
                &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            );
            let k6 = f(
                t + h,
                &axpy(
                    &y,
                    h,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                ),
            );
            let y_new = axpy(
                &y,
                h,
                &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
            );
            let k7 = f(t + h, &y_new);
            self.stats.evaluations += 6;

            let mut err = 0.0;
            let mut finite = true;
            for i in 0..N {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.tol.atol[i]
                    + self.tol.rtol * y[i].abs().max(y_new[i].abs()).max(self.peak[i]);
                if !y_new[i].is_finite() || !e.is_finite() {
                    finite = false;
                }
                let r = if sc > 0.0 {
                    e / sc
                } else if e == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
                err += r * r;
            }
            let err = (err / N as f64).sqrt();
            if !finite {
                if h <= 1e-300 {
                    return Err(IntegrateError::NonFinite { t });
                }
                self.stats.rejected += 1;
                h *= 0.1;
                continue;
            }
            if err <= 1.0 {
                self.stats.accepted += 1;
                let t_new = if last { t1 } else { t + h };
                if stride.is_some() && sample_time(next_sample) <= t_new {
                    let ydiff: [f64; N] = std::array::from_fn(|i| y_new[i] - y[i]);
                    let bspl: [f64; N] = std::array::from_fn(|i| h * k1[i] - ydiff[i]);
                    let dense = DenseStep {
                        t0: t,
                        h,
                        r: [
                            y,
                            ydiff,
                            bspl,
                            std::array::from_fn(|i| ydiff[i] - h * k7[i] - bspl[i]),
                            std::array::from_fn(|i| {
                                h * (D1 * k1[i]
                                    + D3 * k3[i]
                                    + D4 * k4[i]
                                    + D5 * k5[i]
                                    + D6 * k6[i]
                                    + D7 * k7[i])
                            }),
                        ],
                    };
                    while sample_time(next_sample) <= t_new {
                        let ts = sample_time(next_sample);
                        let ys = if ts == t_new { y_new } else { dense.eval(ts) };
                        observer(ts, &ys);
                        next_sample += 1;
                    }
                }
                t = t_new;
                y = y_new;
                k1 = k7;
                for (p, v) in self.peak.iter_mut().zip(&y) {
                    *p = p.max(v.abs());
                }
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                let h_next = h * fac;
                if last {
                    // keep the step-size history unless the final step was clipped short
                    self.h = Some(
                        self.h
                            .map_or(h_next, |old| if h < 0.5 * old { old } else { h_next }),
                    );
                    return Ok(y);
                }
                h = h_next;
                if let Some(hm) = self.tol.h_max {
                    h = h.min(hm);
                }
                self.h = Some(h);
            } else {
                self.stats.rejected += 1;
                h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn harmonic_one_period() {
        let w = 2.0 * PI * 191.7e3;
        let mut f = |_t: f64, y: &[f64; 2]| [y[1], -w * w * y[0]];
        let mut s = Dopri5::new(Tolerances::default());
        let y = s
            .run(&mut f, 0.0, [1e-4, 0.0], 2.0 * PI / w, None, &mut |_, _| {})
            .unwrap();
        assert!((y[0] - 1e-4).abs() < 1e-8 * 1e-4);
        assert!(y[1].abs() < 1e-8 * 1e-4 * w);
    }

    #[test]
    fn dense_output_tracks_exact_solution() {
        let mut f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let mut s = Dopri5::new(Tolerances::new(1e-10, [0.0; 2]));
        let mut worst: f64 = 0.0;
        let mut n = 0;
        s.run(&mut f, 0.0, [1.0, 0.0], 20.0, Some(0.013), &mut |t, y| {
            worst = worst
                .max((y[0] - t.cos()).abs())
                .max((y[1] + t.sin()).abs());
            n += 1;
        })
        .unwrap();
        assert_eq!(n, (20.0f64 / 0.013).floor() as usize + 1);
        assert!(worst < 1e-8, "dense error {worst:e}");
    }

    #[test]
    fn chunked_run_matches_single_run() {
        let mut f = |t: f64, y: &[f64; 2]| [y[1], -y[0] - 0.1 * y[1] + (1.3 * t).cos()];
        let mut a = Dopri5::new(Tolerances::default());
        let ya = a
            .run(&mut f, 0.0, [0.0, 0.0], 30.0, None, &mut |_, _| {})
            .unwrap();
        let mut b = Dopri5::new(Tolerances::default());
        let mut y = [0.0, 0.0];
        for i in 0..10 {
            y = b
                .run(
                    &mut f,
                    3.0 * i as f64,
                    y,
                    3.0 * (i + 1) as f64,
                    None,
                    &mut |_, _| {},
                )
                .unwrap();
        }
        assert!((ya[0] - y[0]).abs() < 1e-8);
    }

    #[test]
    fn zero_state_stays_zero() {
        let mut f = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let mut s = Dopri5::new(Tolerances::default());
        let mut all_zero = true;
        let y = s
            .run(&mut f, 0.0, [0.0, 0.0], 10.0, Some(0.1), &mut |_, y| {
                all_zero &= y[0] == 0.0 && y[1] == 0.0
            })
            .unwrap();
        assert!(all_zero);
        assert_eq!(y, [0.0, 0.0]);
    }

    #[test]
    fn blow_up_is_reported() {
        // y' = y², y(0) = 1 explodes at t = 1
        let mut f = |_t: f64, y: &[f64; 1]| [y[0] * y[0]];
        let mut s = Dopri5::new(Tolerances::new(1e-9, [1e-12]));
        let r = s.run(&mut f, 0.0, [1.0], 2.0, None, &mut |_, _| {});
        assert!(matches!(
            r,
            Err(IntegrateError::StepUnderflow { .. }) | Err(IntegrateError::NonFinite { .. })
        ));
        if let Err(IntegrateError::StepUnderflow { t, .. }) = r {
            assert!((t - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn rejects_empty_interval() {
        let mut f = |_t: f64, y: &[f64; 1]| [y[0]];
        let mut s = Dopri5::new(Tolerances::default());
        assert!(s
            .run(&mut f, 1.0, [1.0], 1.0, None, &mut |_, _| {})
            .is_err());
    }
}
