//! Multiple-scales steady state of the driven Duffing equation.
//!
//! With the driven axis' coefficients the amplitude `a` and phase `γ` of
//! `ξ ≈ a cos(ωt − γ)`, `ω = ω0 + σ`, obey the slow flow
//!
//! ```text
//! da/dT = k sin γ / (2ω0) − μ a
//! dγ/dT = σ − (K a² + D)/ω0 + k cos γ / (2 a ω0)
//! ```
//!
//! where `K = 3 α_total / 8` and `D = (3/8)(χ c² + ψ b²)` collects the
//! coupling to transverse amplitudes `c` (axis `p`) and `b` (axis `q`).
//! Fixed points satisfy
//!
//! ```text
//! A [(K A + D − ω0 σ)² + ω0² μ²] = k² / 4,   A = a²,
//! ```
//!
//! a cubic in `A` with one or three positive roots.

use crate::coefficients::AxisCoefficients;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MultiscaleError {
    #[error("phase is undefined at zero amplitude with nonzero drive")]
    ZeroAmplitude,
    #[error("invalid response inputs: {0}")]
    Invalid(String),
}

/// `Δα2 = −10 α2² / (9 ω0²)`.
pub fn delta_alpha2(c: &AxisCoefficients) -> f64 {
    -10.0 * c.alpha2 * c.alpha2 / (9.0 * c.omega0 * c.omega0)
}

/// `χ = −2 α8 α2_p / (3 ω0_p²) + 2 α5 / 3`, weight of `(c/a)²`.
pub fn chi(c: &AxisCoefficients) -> f64 {
    let quad = if c.omega0_p > 0.0 {
        -2.0 * c.alpha8 * c.alpha2_p / (3.0 * c.omega0_p * c.omega0_p)
    } else {
        0.0
    };
    quad + 2.0 * c.alpha5 / 3.0
}

/// `ψ = −2 α7 α2_q / (3 ω0_q²) + 2 α4 / 3`, weight of `(b/a)²`.
pub fn psi(c: &AxisCoefficients) -> f64 {
    let quad = if c.omega0_q > 0.0 {
        -2.0 * c.alpha7 * c.alpha2_q / (3.0 * c.omega0_q * c.omega0_q)
    } else {
        0.0
    };
    quad + 2.0 * c.alpha4 / 3.0
}

/// `α_total = α3 + Δα2 + χ (c/a)² + ψ (b/a)²`.
pub fn alpha_total(c: &AxisCoefficients, b_over_a: f64, c_over_a: f64) -> f64 {
    c.alpha3 + delta_alpha2(c) + chi(c) * c_over_a * c_over_a + psi(c) * b_over_a * b_over_a
}

/// How transverse motion enters the driven-axis response.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Coupling {
    /// `b = c = 0`.
    None,
    /// Fixed transverse amplitudes (m): `c` along `p`, `b` along `q`.
    Explicit { b: f64, c: f64 },
    /// Constant `χ c² / a²` (Hz²/m²) added to `α_total` for detunings in
    /// `[window.0, window.1]` (rad/s).
    Lumped { value: f64, window: (f64, f64) },
}

impl Coupling {
    /// Lumped coupling over `σ ≤ upper`, unbounded below.
    pub fn lumped_below(value: f64, upper: f64) -> Self {
        Coupling::Lumped {
            value,
            window: (f64::NEG_INFINITY, upper),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResponseInputs {
    pub coeffs: AxisCoefficients,
    pub coupling: Coupling,
}

impl ResponseInputs {
    pub fn new(coeffs: AxisCoefficients, coupling: Coupling) -> Result<Self, MultiscaleError> {
        if !(coeffs.omega0 > 0.0) || !coeffs.is_finite() {
            return Err(MultiscaleError::Invalid(
                "ω0 must be positive and all coefficients finite".into(),
            ));
        }
        if coeffs.mu < 0.0 {
            return Err(MultiscaleError::Invalid("μ must be non-negative".into()));
        }
        match coupling {
            Coupling::Explicit { b, c } if !(b >= 0.0 && c >= 0.0) => {
                return Err(MultiscaleError::Invalid(
                    "coupled amplitudes b, c must be non-negative".into(),
                ))
            }
            Coupling::Lumped { value, window } if !value.is_finite() || window.0 > window.1 => {
                return Err(MultiscaleError::Invalid(
                    "lumped coupling needs a finite value and an ordered window".into(),
                ))
            }
            _ => {}
        }
        Ok(Self { coeffs, coupling })
    }

    pub fn uncoupled(coeffs: AxisCoefficients) -> Self {
        Self {
            coeffs,
            coupling: Coupling::None,
        }
    }

    fn in_window(&self, sigma: f64) -> bool {
        match self.coupling {
            Coupling::Lumped { window, .. } => sigma >= window.0 && sigma <= window.1,
            _ => false,
        }
    }

    /// Effective constants at detuning `sigma`.
    pub fn effective(&self, sigma: f64) -> EffectiveDuffing {
        self.effective_with(self.in_window(sigma))
    }

    /// Effective constants with the lumped coupling forced on or off.
    pub fn effective_with(&self, lumped_on: bool) -> EffectiveDuffing {
        let c = &self.coeffs;
        let base = c.alpha3 + delta_alpha2(c);
        let (alpha, shift) = match self.coupling {
            Coupling::None => (base, 0.0),
            Coupling::Explicit { b, c: cc } => (base, 0.375 * (chi(c) * cc * cc + psi(c) * b * b)),
            Coupling::Lumped { value, .. } => (if lumped_on { base + value } else { base }, 0.0),
        };
        EffectiveDuffing {
            omega0: c.omega0,
            mu: c.mu,
            k: c.k,
            alpha_total: alpha,
            shift,
        }
    }
}

/// Response constants after collapsing the coupling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveDuffing {
    pub omega0: f64,
    pub mu: f64,
    pub k: f64,
    pub alpha_total: f64,
    /// `D`, rad²/s² (`ω0 σ` units).
    pub shift: f64,
}

impl EffectiveDuffing {
    pub fn kappa(&self) -> f64 {
        0.375 * self.alpha_total
    }

    /// `K A + D − ω0 σ`.
    fn detune_term(&self, a: f64, sigma: f64) -> f64 {
        self.kappa() * a * a + self.shift - self.omega0 * sigma
    }

    /// Left side minus right side of the fixed-point equation, m²·rad⁴/s⁴.
    pub fn residual(&self, sigma: f64, a: f64) -> f64 {
        let s = self.detune_term(a, sigma);
        a * a * (s * s + (self.omega0 * self.mu).powi(2)) - 0.25 * self.k * self.k
    }

    /// `σ` at the response peak of amplitude `a`.
    pub fn backbone(&self, a: f64) -> f64 {
        (self.kappa() * a * a + self.shift) / self.omega0
    }

    /// The two detunings at which amplitude `a` is a fixed point, `(σ+, σ−)`.
    pub fn steady_detuning(&self, a: f64) -> Option<(f64, f64)> {
        if !(a > 0.0) {
            return None;
        }
        let rad = self.k * self.k / (4.0 * self.omega0 * self.omega0 * a * a) - self.mu * self.mu;
        if rad < 0.0 {
            return None;
        }
        let r = rad.sqrt();
        let b = self.backbone(a);
        Some((b + r, b - r))
    }

    /// Peak amplitude `k / (2 μ ω0)`.
    pub fn peak_amplitude(&self) -> f64 {
        peak_relations(self.k, self.mu, self.omega0)
    }

    /// Positive amplitudes solving the fixed-point equation at `sigma`, ascending.
    pub fn amplitudes(&self, sigma: f64) -> Vec<f64> {
        if self.k == 0.0 {
            return Vec::new();
        }
        let k = self.k.abs();
        let s0 = self.shift - self.omega0 * sigma;
        let kap = self.kappa();
        if self.mu == 0.0 {
            // undamped: a (K a² + s0) = ± k / 2
            let mut roots = Vec::new();
            for rhs in [0.5 * k, -0.5 * k] {
                for a in real_cubic_roots(kap, 0.0, s0, -rhs) {
                    if a > 0.0 {
                        roots.push(a);
                    }
                }
            }
            roots.sort_by(f64::total_cmp);
            roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs());
            return roots;
        }
        let wm = self.omega0 * self.mu;
        let a_m2 = (k / (2.0 * wm)).powi(2);
        let s = -s0 / wm;
        let kd = kap * a_m2 / wm;
        // κ² u³ − 2κS u² + (S² + 1) u − 1 = 0
        let coeffs = [kd * kd, -2.0 * kd * s, s * s + 1.0, -1.0];
        let mut us: Vec<f64> = if kd == 0.0 {
            vec![1.0 / (s * s + 1.0)]
        } else {
            real_cubic_roots(coeffs[0], coeffs[1], coeffs[2], coeffs[3])
        };
        for u in us.iter_mut() {
            *u = polish(&coeffs, *u);
        }
        us.retain(|u| *u > 0.0 && u.is_finite());
        us.sort_by(f64::total_cmp);
        us.dedup_by(|a, b| (*a - *b).abs() <= 1e-10 * a.abs());
        us.into_iter().map(|u| (u * a_m2).sqrt()).collect()
    }

    /// Linearization of the slow flow at a fixed point `(sigma, a)`.
    pub fn stability(&self, sigma: f64, a: f64) -> Stability {
        let s = self.detune_term(a, sigma);
        let ka2 = 2.0 * self.kappa() * a * a;
        let wm2 = (self.omega0 * self.mu).powi(2);
        let det = wm2 + s * (ka2 + s);
        let scale = wm2 + s * s + ka2.abs() * s.abs();
        if det.abs() <= 1e-9 * scale || self.mu == 0.0 {
            Stability::Marginal
        } else if det > 0.0 {
            Stability::Stable
        } else {
            Stability::Unstable
        }
    }

    /// Detunings at which two fixed points merge, ascending.
    pub fn fold_points(&self) -> Vec<f64> {
        if self.kappa() == 0.0 || self.mu == 0.0 || self.k == 0.0 {
            return Vec::new();
        }
        let wm = self.omega0 * self.mu;
        let kd = self.kappa() * (self.k / (2.0 * wm)).powi(2) / wm;
        // folds need |κ| > 8 / (3√3) and lie in sign(κ)·[√3, 3|κ|]
        if kd.abs() <= 8.0 / (3.0 * 3f64.sqrt()) {
            return Vec::new();
        }
        let disc = |s: f64| cubic_discriminant(kd * kd, -2.0 * kd * s, s * s + 1.0, -1.0);
        let lo = 3f64.sqrt() * (1.0 - 1e-6);
        let hi = 3.0 * kd.abs() * (1.0 + 1e-6);
        let n = 4000;
        let mut folds = Vec::new();
        let sgn = kd.signum();
        let mut prev_s = sgn * lo;
        let mut prev = disc(prev_s);
        for i in 1..=n {
            let s = sgn * (lo + (hi - lo) * i as f64 / n as f64);
            let d = disc(s);
            if prev == 0.0 {
                folds.push(prev_s);
            } else if prev.signum() != d.signum() && d != 0.0 {
                let (mut a, mut b, mut fa) = (prev_s, s, prev);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    let fm = disc(m);
                    if fm == 0.0 || (b - a).abs() <= 1e-15 * m.abs() {
                        a = m;
                        b = m;
                        break;
                    }
                    if fm.signum() == fa.signum() {
                        a = m;
                        fa = fm;
                    } else {
                        b = m;
                    }
                }
                folds.push(0.5 * (a + b));
            }
            prev_s = s;
            prev = d;
        }
        let mut out: Vec<f64> = folds
            .into_iter()
            .map(|s| (s * wm + self.shift) / self.omega0)
            .collect();
        out.sort_by(f64::total_cmp);
        out
    }

    /// Slow-flow vector field `(da/dT, dγ/dT)` at detuning `sigma`.
    pub fn slow_flow(
        &self,
        state: SlowFlowState,
        sigma: f64,
    ) -> Result<(f64, f64), MultiscaleError> {
        let a = state.a;
        if a < 0.0 {
            return Err(MultiscaleError::Invalid(
                "amplitude must be non-negative".into(),
            ));
        }
        let (sg, cg) = state.gamma.sin_cos();
        let da = self.k * sg / (2.0 * self.omega0) - a * self.mu;
        if a == 0.0 {
            if self.k != 0.0 {
                return Err(MultiscaleError::ZeroAmplitude);
            }
            return Ok((0.0, sigma - self.shift / self.omega0));
        }
        let dg = sigma - (self.kappa() * a * a + self.shift) / self.omega0
            + self.k * cg / (2.0 * a * self.omega0);
        Ok((da, dg))
    }

    /// Phase `γ` of the fixed point `(sigma, a)`.
    pub fn fixed_point_phase(&self, sigma: f64, a: f64) -> f64 {
        let s = self.detune_term(a, sigma);
        (2.0 * a * self.omega0 * self.mu).atan2(2.0 * a * s)
    }
}

/// Linear stability of a fixed point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stability {
    Stable,
    Unstable,
    /// Singular Jacobian (fold point) or zero damping.
    Marginal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlowFlowState {
    pub a: f64,
    pub gamma: f64,
}

/// One fixed point of the response curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResponsePoint {
    /// Detuning `ω − ω0`, rad/s.
    pub sigma: f64,
    /// Amplitude, m.
    pub a: f64,
    /// Index in ascending amplitude order.
    pub branch: usize,
    pub stable: bool,
}

/// `σ` at the response peak of amplitude `a`, coupling included.
///
/// Lumped coupling is always applied here; use
/// [`ResponseInputs::effective_with`] to choose.
pub fn backbone(inputs: &ResponseInputs, a: f64) -> f64 {
    inputs.effective_with(true).backbone(a)
}

/// Both detuning branches for amplitude `a` (lumped coupling applied).
pub fn steady_detuning(a: f64, inputs: &ResponseInputs) -> Option<(f64, f64)> {
    inputs.effective_with(true).steady_detuning(a)
}

/// All fixed points at `sigma`, with stability.
pub fn response_amplitudes(sigma: f64, inputs: &ResponseInputs) -> Vec<ResponsePoint> {
    let eff = inputs.effective(sigma);
    eff.amplitudes(sigma)
        .into_iter()
        .enumerate()
        .map(|(branch, a)| ResponsePoint {
            sigma,
            a,
            branch,
            stable: eff.stability(sigma, a) == Stability::Stable,
        })
        .collect()
}

pub fn stability(point: &ResponsePoint, inputs: &ResponseInputs) -> Stability {
    inputs
        .effective(point.sigma)
        .stability(point.sigma, point.a)
}

pub fn slow_flow(
    state: SlowFlowState,
    sigma: f64,
    inputs: &ResponseInputs,
) -> Result<(f64, f64), MultiscaleError> {
    inputs.effective(sigma).slow_flow(state, sigma)
}

/// Fold detunings. With lumped coupling, folds of the coupled curve are kept
/// inside the window and folds of the uncoupled curve outside it.
pub fn fold_points(inputs: &ResponseInputs) -> Vec<f64> {
    match inputs.coupling {
        Coupling::Lumped { .. } => {
            let mut f: Vec<f64> = inputs
                .effective_with(true)
                .fold_points()
                .into_iter()
                .filter(|s| inputs.in_window(*s))
                .collect();
            f.extend(
                inputs
                    .effective_with(false)
                    .fold_points()
                    .into_iter()
                    .filter(|s| !inputs.in_window(*s)),
            );
            f.sort_by(f64::total_cmp);
            f
        }
        _ => inputs.effective(0.0).fold_points(),
    }
}

/// Sweep direction of the drive frequency.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Positive,
    Negative,
}

impl Direction {
    pub fn label(self) -> &'static str {
        match self {
            Direction::Positive => "positive",
            Direction::Negative => "negative",
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Direction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" | "up" | "+" => Ok(Direction::Positive),
            "negative" | "down" | "-" => Ok(Direction::Negative),
            other => Err(format!("unknown scan direction '{other}'")),
        }
    }
}

/// Amplitude a quasi-static sweep in `direction` sits on at `sigma`.
///
/// In the three-root region a positive scan stays on the largest root of a
/// hardening curve (smallest when softening) and a negative scan on the
/// other outer root.
pub fn tracked_amplitude(sigma: f64, eff: &EffectiveDuffing, direction: Direction) -> Option<f64> {
    let roots = eff.amplitudes(sigma);
    match roots.len() {
        0 => None,
        1 => Some(roots[0]),
        _ => {
            let largest = (direction == Direction::Positive) == (eff.alpha_total > 0.0);
            Some(if largest {
                *roots.last().unwrap()
            } else {
                roots[0]
            })
        }
    }
}

/// [`tracked_amplitude`] with the coupling evaluated at `sigma`.
pub fn tracked_response(sigma: f64, inputs: &ResponseInputs, direction: Direction) -> Option<f64> {
    tracked_amplitude(sigma, &inputs.effective(sigma), direction)
}

/// `a_m = k / (2 μ ω0)`.
pub fn peak_relations(k: f64, mu: f64, omega0: f64) -> f64 {
    k / (2.0 * mu * omega0)
}

/// `α3 + Δα2 = 8 ω0 σ_m / (3 a_m²)`.
pub fn alpha_from_peak(a_m: f64, sigma_m: f64, omega0: f64) -> f64 {
    8.0 * omega0 * sigma_m / (3.0 * a_m * a_m)
}

fn cubic_discriminant(a: f64, b: f64, c: f64, d: f64) -> f64 {
    18.0 * a * b * c * d - 4.0 * b.powi(3) * d + b * b * c * c
        - 4.0 * a * c.powi(3)
        - 27.0 * a * a * d * d
}

fn polish(c: &[f64; 4], mut u: f64) -> f64 {
    for _ in 0..8 {
        let f = ((c[0] * u + c[1]) * u + c[2]) * u + c[3];
        let df = (3.0 * c[0] * u + 2.0 * c[1]) * u + c[2];
        if df == 0.0 {
            break;
        }
        let step = f / df;
        u -= step;
        if step.abs() <= 1e-16 * u.abs() {
            break;
        }
    }
    u
}

/// Real roots of `a x³ + b x² + c x + d` (a may be zero), closed form.
pub fn real_cubic_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    if a == 0.0 {
        if b == 0.0 {
            return if c == 0.0 { Vec::new() } else { vec![-d / c] };
        }
        let disc = c * c - 4.0 * b * d;
        if disc < 0.0 {
            return Vec::new();
        }
        let q = -0.5 * (c + c.signum() * disc.sqrt());
        let mut r = Vec::new();
        if q != 0.0 {
            r.push(q / b);
            r.push(d / q);
        } else {
            r.push(0.0);
        }
        return r;
    }
    let (b, c, d) = (b / a, c / a, d / a);
    // depressed cubic t³ + p t + q with x = t − b/3
    let p = c - b * b / 3.0;
    let q = 2.0 * b.powi(3) / 27.0 - b * c / 3.0 + d;
    let shift = -b / 3.0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let scale = (q / 2.0).powi(2).max((p / 3.0).powi(3).abs());
    if disc > 1e-14 * scale {
        let sq = disc.sqrt();
        let u = (-q / 2.0 + sq).cbrt();
        let v = (-q / 2.0 - sq).cbrt();
        vec![u + v + shift]
    } else if p == 0.0 {
        vec![shift]
    } else {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let th = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (th - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + shift)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Axis;
    use std::f64::consts::PI;

    pub(crate) fn reference_z() -> AxisCoefficients {
        AxisCoefficients::duffing(Axis::Z, 2.0 * PI * 191.7e3, 177.1, 0.1959e18, 0.075e6)
    }

    #[test]
    fn cubic_roots_known() {
        let mut r = real_cubic_roots(1.0, -6.0, 11.0, -6.0);
        r.sort_by(f64::total_cmp);
        for (a, b) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(real_cubic_roots(1.0, 0.0, 1.0, 0.0).len(), 1);
    }

    #[test]
    fn alpha_total_limits() {
        let mut c = reference_z();
        assert_eq!(alpha_total(&c, 0.0, 0.0), c.alpha3);
        c.alpha2 = 1e11;
        assert!((alpha_total(&c, 0.0, 0.0) - (c.alpha3 + delta_alpha2(&c))).abs() < 1.0);
    }

    #[test]
    fn linear_response_peak() {
        let mut c = reference_z();
        c.alpha3 = 0.0;
        let eff = ResponseInputs::uncoupled(c).effective(0.0);
        let r = eff.amplitudes(0.0);
        assert_eq!(r.len(), 1);
        assert!((r[0] - c.k / (2.0 * c.omega0 * c.mu)).abs() < 1e-12 * r[0]);
        assert!(eff.fold_points().is_empty());
    }

    #[test]
    fn backbone_numbers() {
        let eff = ResponseInputs::uncoupled(reference_z()).effective(0.0);
        let s = eff.backbone(1e-4);
        assert!((s - 3.0 * 0.1959e18 * 1e-8 / (8.0 * 2.0 * PI * 191.7e3)).abs() < 1e-9 * s);
        assert!((s - 610.0).abs() < 1.0);
    }

    #[test]
    fn three_roots_below_peak_and_residuals() {
        let inputs = ResponseInputs::uncoupled(reference_z());
        let eff = inputs.effective(0.0);
        let sm = eff.backbone(eff.peak_amplitude());
        let pts = response_amplitudes(0.99 * sm, &inputs);
        assert_eq!(pts.len(), 3);
        assert!(pts[0].stable && !pts[1].stable && pts[2].stable);
        for p in &pts {
            assert!(eff.residual(p.sigma, p.a).abs() < 1e-9 * 0.25 * eff.k * eff.k);
            let (sp, sn) = eff.steady_detuning(p.a).unwrap();
            let best = (sp - p.sigma).abs().min((sn - p.sigma).abs());
            assert!(best < 1e-9 * p.sigma.abs());
        }
    }

    #[test]
    fn slow_flow_vanishes_at_fixed_points() {
        let inputs = ResponseInputs::uncoupled(reference_z());
        let eff = inputs.effective(0.0);
        for sigma in [-2000.0, 0.0, 900.0, 1500.0] {
            for a in eff.amplitudes(sigma) {
                let g = eff.fixed_point_phase(sigma, a);
                let (da, dg) = eff.slow_flow(SlowFlowState { a, gamma: g }, sigma).unwrap();
                assert!(da.abs() < 1e-10 * a * eff.mu, "da {da}");
                assert!(dg.abs() < 1e-10 * eff.mu, "dg {dg}");
            }
        }
    }

    #[test]
    fn slow_flow_pure_decay_and_zero_amplitude() {
        let mut c = reference_z();
        c.k = 0.0;
        let eff = ResponseInputs::uncoupled(c).effective(0.0);
        let (da, _) = eff
            .slow_flow(
                SlowFlowState {
                    a: 1e-5,
                    gamma: 0.3,
                },
                10.0,
            )
            .unwrap();
        assert!((da + 1e-5 * c.mu).abs() < 1e-18);
        assert!(eff
            .slow_flow(SlowFlowState { a: 0.0, gamma: 0.0 }, 1.0)
            .is_ok());
        let eff = ResponseInputs::uncoupled(reference_z()).effective(0.0);
        assert_eq!(
            eff.slow_flow(SlowFlowState { a: 0.0, gamma: 0.0 }, 1.0),
            Err(MultiscaleError::ZeroAmplitude)
        );
    }

    #[test]
    fn heavy_damping_removes_bistability() {
        let mut c = reference_z();
        c.mu = 2000.0;
        let inputs = ResponseInputs::uncoupled(c);
        assert!(fold_points(&inputs).is_empty());
        for i in -50..50 {
            let pts = response_amplitudes(100.0 * i as f64, &inputs);
            assert_eq!(pts.len(), 1);
            assert!(pts[0].stable);
        }
    }

    #[test]
    fn peak_inverse_roundtrip() {
        let w = 2.0 * PI * 191.7e3;
        let am = peak_relations(0.075e6, 177.1, w);
        assert!((am - 1.758e-4).abs() < 5e-8);
        assert!((peak_relations(0.15e6, 177.1, w) - 2.0 * am).abs() < 1e-18);
        let sm = 3.0 * 0.1959e18 * am * am / (8.0 * w);
        assert!((alpha_from_peak(am, sm, w) / 0.1959e18 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softening_peak_is_below_resonance() {
        let mut c = reference_z();
        c.alpha3 = -c.alpha3;
        let eff = ResponseInputs::uncoupled(c).effective(0.0);
        assert!(eff.backbone(eff.peak_amplitude()) < 0.0);
        let f = eff.fold_points();
        assert_eq!(f.len(), 2);
        assert!(f.iter().all(|s| *s < 0.0));
    }

    #[test]
    fn direction_parses() {
        assert_eq!(
            "Positive".parse::<Direction>().unwrap(),
            Direction::Positive
        );
        assert!("sideways".parse::<Direction>().is_err());
    }
}
