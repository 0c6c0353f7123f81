//! Duffing-model coefficients of the secular equations of motion.
//!
//! For a driven axis `ξ` with transverse axes `(p, q)` the equation of motion is
//!
//! ```text
//! ξ̈ + 2μ ξ̇ + ω0² ξ + α2 ξ² + α3 ξ³ + α21 ξ²q + α22 ξ²p + α4 ξq² + α5 ξp²
//!    + α6 ξpq + α7 ξq + α8 ξp = k cos(ωt)
//! ```
//!
//! with `(p, q) = (x, y)` for the z axis, `(z, y)` for the x axis and `(x, z)`
//! for the y axis.
//!
//! The coefficients are produced two ways: the closed forms in
//! [`closed_form_terms`] (z axis only) and a Taylor read-off of the restoring
//! force polynomial in [`taylor_terms`]. Everything beyond cubic total order is
//! dropped, as are force terms outside the list above (for example a pure `x²`
//! term in the z equation); [`Model3D`] keeps the full cubic force.

use thiserror::Error;

use crate::multipole::{
    find_equilibrium_of, restoring_force, EquilibriumError, MultipoleCoefficients, PseudoForce,
    TrapParams,
};
use crate::poly::{Axis, CompiledPolynomial, Exponents, TrivariatePolynomial, Unit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoefficientError {
    #[error("{axis} axis is not confining (ω0² = {omega0_sq:e} rad²/s²)")]
    NonConfining { axis: Axis, omega0_sq: f64 },
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error("invalid model: {0}")]
    Invalid(String),
}

/// Transverse axes `(p, q)` of the equation for `axis`.
pub fn transverse(axis: Axis) -> (Axis, Axis) {
    match axis {
        Axis::Z => (Axis::X, Axis::Y),
        Axis::X => (Axis::Z, Axis::Y),
        Axis::Y => (Axis::X, Axis::Z),
    }
}

/// Raw coefficients of one equation, before any confinement check.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ForceTerms {
    pub omega0_sq: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha21: f64,
    pub alpha22: f64,
    pub alpha4: f64,
    pub alpha5: f64,
    pub alpha6: f64,
    pub alpha7: f64,
    pub alpha8: f64,
}

impl ForceTerms {
    pub const NAMES: [&'static str; 10] = [
        "omega0_sq",
        "alpha2",
        "alpha3",
        "alpha21",
        "alpha22",
        "alpha4",
        "alpha5",
        "alpha6",
        "alpha7",
        "alpha8",
    ];

    pub fn to_array(&self) -> [f64; 10] {
        [
            self.omega0_sq,
            self.alpha2,
            self.alpha3,
            self.alpha21,
            self.alpha22,
            self.alpha4,
            self.alpha5,
            self.alpha6,
            self.alpha7,
            self.alpha8,
        ]
    }

    /// Exponents `(ξ, p, q)` of each entry of [`ForceTerms::to_array`].
    pub const POWERS: [(u8, u8, u8); 10] = [
        (1, 0, 0),
        (2, 0, 0),
        (3, 0, 0),
        (2, 0, 1),
        (2, 1, 0),
        (1, 0, 2),
        (1, 2, 0),
        (1, 1, 1),
        (1, 0, 1),
        (1, 1, 0),
    ];

    /// Largest component-wise relative difference. Entries are compared
    /// against the larger of the two magnitudes, floored at `1e-12` of the
    /// largest entry of the same total degree so roundoff on a vanishing
    /// term does not count.
    pub fn relative_discrepancy(&self, other: &Self) -> f64 {
        let (a, b) = (self.to_array(), other.to_array());
        let degree = |i: usize| {
            let p = Self::POWERS[i];
            p.0 + p.1 + p.2
        };
        let mut worst: f64 = 0.0;
        for i in 0..10 {
            let scale = (0..10)
                .filter(|&j| degree(j) == degree(i))
                .map(|j| a[j].abs().max(b[j].abs()))
                .fold(0.0, f64::max);
            let denom = a[i].abs().max(b[i].abs()).max(1e-12 * scale);
            if denom > 0.0 {
                worst = worst.max((a[i] - b[i]).abs() / denom);
            }
        }
        worst
    }

    fn from_array(a: [f64; 10]) -> Self {
        Self {
            omega0_sq: a[0],
            alpha2: a[1],
            alpha3: a[2],
            alpha21: a[3],
            alpha22: a[4],
            alpha4: a[5],
            alpha5: a[6],
            alpha6: a[7],
            alpha7: a[8],
            alpha8: a[9],
        }
    }
}

/// Monomial `ξ^i p^j q^k` as an exponent triple.
pub fn axis_monomial(axis: Axis, powers: (u8, u8, u8)) -> Exponents {
    let (p, q) = transverse(axis);
    let mut e = [0u8; 3];
    e[axis.index()] = powers.0;
    e[p.index()] = powers.1;
    e[q.index()] = powers.2;
    e
}

/// Read the Duffing coefficients of the `axis` equation off a restoring force
/// `G_axis` (so that `ξ̈ = -G_axis`).
pub fn taylor_terms(force: &TrivariatePolynomial, axis: Axis) -> ForceTerms {
    ForceTerms::from_array(ForceTerms::POWERS.map(|pw| force.coeff(axis_monomial(axis, pw))))
}

/// Closed forms for the z equation, written out term by term.
///
/// Only the degree-2 to degree-4 multipoles enter. The `ω0²` term and the nine
/// nonlinear coefficients are rational functions of `e, m, r0, Ω, M_j, U_j*, V_j*`.
/// The `α4` and `α5` forms carry extra `U21` and `V21` terms that the Taylor
/// read-off of the harmonic basis does not produce.
pub fn closed_form_terms(mc: &MultipoleCoefficients, trap: &TrapParams) -> ForceTerms {
    let e = trap.charge;
    let m = trap.mass;
    let r0 = mc.r0;
    let w = mc.omega_rf;
    let u = |j| mc.u(j);
    let v = |j| mc.v(j);
    let mm = |j| mc.m(j);
    let r2 = r0 * r0;
    let r3 = r2 * r0;
    let r4 = r2 * r2;
    let r5 = r4 * r0;
    let r6 = r4 * r2;
    let w2 = w * w;
    let den = m * m * r4 * r4 * w2;

    let omega0_sq =
        e * (8.0 * e * r4 * u(7).powi(2) * mm(7).powi(2) + 4.0 * m * r6 * v(7) * w2 * mm(7)) / den;

    let alpha3 = 36.0 * e * e * r2 * u(13).powi(2) * mm(13).powi(2) / den
        + 140.0 * e * mm(21) * (m * r4 * v(21) * w2 + 8.0 * e * r2 * u(21) * u(7) * mm(7)) / den;

    let alpha2 =
        6.0 * e * r0 * mm(13) * (m * r4 * v(13) * w2 + 6.0 * e * r2 * u(7) * u(13) * mm(7)) / den;

    let alpha21 = 3.0
        * e
        * (70.0 * e * r2 * mm(6) * mm(21) * u(6) * u(21)
            + 42.0 * e * r2 * mm(7) * mm(20) * u(7) * u(20))
        / den
        + 3.0
            * e
            * (24.0 * e * r2 * mm(12) * mm(13) * u(12) * u(13)
                + 7.0 * m * r4 * w2 * mm(20) * v(20))
            / den;

    let alpha22 = 3.0
        * e
        * (70.0 * e * r2 * mm(8) * mm(21) * u(8) * u(21)
            + 42.0 * e * r2 * mm(7) * mm(22) * u(7) * u(22))
        / den
        + 3.0
            * e
            * (24.0 * e * r2 * mm(13) * mm(14) * u(13) * u(14)
                + 7.0 * m * r4 * w2 * mm(22) * v(22))
            / den;

    let alpha4 = e
        * (32.0 * e * r2 * u(12).powi(2) * mm(12).powi(2)
            - 18.0 * e * r2 * u(13).powi(2) * mm(13).powi(2)
            - 6.0 * e * r2 * u(13) * u(15) * mm(13) * mm(15)
            + 21.0 * e * r2 * u(6) * u(20) * mm(6) * mm(20))
        / den
        + e * (-60.0 * m * r4 * v(21) * w2 * mm(21)
            - 14.0 * m * r4 * v(23) * w2 * mm(23)
            - 240.0 * e * r2 * u(7) * u(21) * mm(7) * mm(21)
            - 56.0 * e * r2 * u(7) * u(23) * mm(7) * mm(23))
            / den;

    let alpha5 = e
        * (32.0 * e * r2 * u(14).powi(2) * mm(14).powi(2)
            - 18.0 * e * r2 * u(13).powi(2) * mm(13).powi(2)
            + 6.0 * e * r2 * u(13) * u(15) * mm(13) * mm(15)
            + 21.0 * e * r2 * mm(8) * mm(22) * u(8) * u(22))
        / den
        + e * (-60.0 * m * r4 * v(21) * w2 * mm(21) + 14.0 * m * r4 * v(23) * w2 * mm(23)
            - 240.0 * e * r2 * u(7) * u(21) * mm(7) * mm(21)
            + 56.0 * e * r2 * u(7) * u(23) * mm(7) * mm(23))
            / den;

    let alpha6 = e
        * (6.0 * e * r2 * u(13) * u(11) * mm(13) * mm(11)
            + 14.0 * m * r4 * v(19) * w2 * mm(19)
            + 21.0 * e * r2 * u(6) * u(22) * mm(6) * mm(22))
        / den
        + e * (64.0 * e * r2 * u(12) * u(14) * mm(12) * mm(14)
            + 56.0 * e * r2 * u(7) * u(19) * mm(7) * mm(19)
            + 21.0 * e * r2 * mm(8) * mm(20) * u(8) * u(20))
            / den;

    let alpha7 = e
        * (6.0 * e * r3 * u(13) * u(6) * mm(13) * mm(6)
            + 8.0 * m * r5 * v(12) * w2 * mm(12)
            + 32.0 * e * r3 * u(12) * u(7) * mm(12) * mm(7))
        / den;

    let alpha8 = e / den
        * (8.0 * m * r5 * v(14) * w2 * mm(14)
            + 32.0 * e * r3 * u(14) * u(7) * mm(14) * mm(7)
            + 6.0 * e * r3 * mm(8) * mm(13) * u(8) * u(13));

    ForceTerms {
        omega0_sq,
        alpha2,
        alpha3,
        alpha21,
        alpha22,
        alpha4,
        alpha5,
        alpha6,
        alpha7,
        alpha8,
    }
}

/// Axial secular frequency from the quadrupole amplitudes alone.
pub fn omega0z_closed_form(
    mc: &MultipoleCoefficients,
    trap: &TrapParams,
) -> Result<f64, CoefficientError> {
    let w2 = closed_form_terms(mc, trap).omega0_sq;
    if !(w2 > 0.0) {
        return Err(CoefficientError::NonConfining {
            axis: Axis::Z,
            omega0_sq: w2,
        });
    }
    Ok(w2.sqrt())
}

/// rf quadrupole amplitude `U7*` that gives axial frequency `omega0` with no dc quadrupole.
pub fn calibrate_u7(omega0: f64, trap: &TrapParams, r0: f64, omega_rf: f64, m7: f64) -> f64 {
    omega0 * trap.mass * r0 * r0 * omega_rf / (8f64.sqrt() * trap.charge * m7)
}

/// Per-axis Duffing model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisCoefficients {
    pub axis: Axis,
    /// Secular angular frequency, rad/s.
    pub omega0: f64,
    /// Damping rate, 1/s (the velocity term is `2μ ξ̇`).
    pub mu: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha21: f64,
    pub alpha22: f64,
    pub alpha4: f64,
    pub alpha5: f64,
    pub alpha6: f64,
    pub alpha7: f64,
    pub alpha8: f64,
    /// Secular frequency of transverse axis `p` (x for the z equation).
    pub omega0_p: f64,
    /// Secular frequency of transverse axis `q` (y for the z equation).
    pub omega0_q: f64,
    /// Quadratic self-coefficient of the `p` equation (`α2x` for the z axis).
    pub alpha2_p: f64,
    /// Quadratic self-coefficient of the `q` equation (`α2y` for the z axis).
    pub alpha2_q: f64,
    /// Drive amplitude, m/s².
    pub k: f64,
}

impl AxisCoefficients {
    /// A bare Duffing oscillator: only `ω0`, `μ`, `α3` and `k`.
    pub fn duffing(axis: Axis, omega0: f64, mu: f64, alpha3: f64, k: f64) -> Self {
        Self {
            axis,
            omega0,
            mu,
            alpha2: 0.0,
            alpha3,
            alpha21: 0.0,
            alpha22: 0.0,
            alpha4: 0.0,
            alpha5: 0.0,
            alpha6: 0.0,
            alpha7: 0.0,
            alpha8: 0.0,
            omega0_p: 0.0,
            omega0_q: 0.0,
            alpha2_p: 0.0,
            alpha2_q: 0.0,
            k,
        }
    }

    pub fn terms(&self) -> ForceTerms {
        ForceTerms {
            omega0_sq: self.omega0 * self.omega0,
            alpha2: self.alpha2,
            alpha3: self.alpha3,
            alpha21: self.alpha21,
            alpha22: self.alpha22,
            alpha4: self.alpha4,
            alpha5: self.alpha5,
            alpha6: self.alpha6,
            alpha7: self.alpha7,
            alpha8: self.alpha8,
        }
    }

    fn from_terms(axis: Axis, t: ForceTerms) -> Result<Self, CoefficientError> {
        if !(t.omega0_sq > 0.0) {
            return Err(CoefficientError::NonConfining {
                axis,
                omega0_sq: t.omega0_sq,
            });
        }
        let mut c = Self::duffing(axis, t.omega0_sq.sqrt(), 0.0, t.alpha3, 0.0);
        c.alpha2 = t.alpha2;
        c.alpha21 = t.alpha21;
        c.alpha22 = t.alpha22;
        c.alpha4 = t.alpha4;
        c.alpha5 = t.alpha5;
        c.alpha6 = t.alpha6;
        c.alpha7 = t.alpha7;
        c.alpha8 = t.alpha8;
        Ok(c)
    }

    /// Restoring-force polynomial `G` of this equation (`ξ̈ = -G - 2μ ξ̇ + drive`).
    pub fn force_polynomial(&self) -> TrivariatePolynomial {
        let t = self.terms().to_array();
        TrivariatePolynomial::from_terms(
            ForceTerms::POWERS
                .iter()
                .zip(t)
                .map(|(pw, c)| (axis_monomial(self.axis, *pw), c)),
            Unit::Acceleration,
        )
    }

    pub fn is_finite(&self) -> bool {
        [
            self.omega0,
            self.mu,
            self.alpha2,
            self.alpha3,
            self.alpha21,
            self.alpha22,
            self.alpha4,
            self.alpha5,
            self.alpha6,
            self.alpha7,
            self.alpha8,
            self.omega0_p,
            self.omega0_q,
            self.alpha2_p,
            self.alpha2_q,
            self.k,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Closed-form z-axis coefficients. Transverse fields are left at zero, the
/// closed forms do not cover them.
pub fn closed_form_coefficients(
    mc: &MultipoleCoefficients,
    trap: &TrapParams,
) -> Result<AxisCoefficients, CoefficientError> {
    AxisCoefficients::from_terms(Axis::Z, closed_form_terms(mc, trap))
}

/// Restoring forces about the equilibrium, truncated to cubic order, plus the equilibrium.
pub fn expanded_force(
    mc: &MultipoleCoefficients,
    trap: &TrapParams,
    form: PseudoForce,
) -> Result<([TrivariatePolynomial; 3], [f64; 3]), CoefficientError> {
    let grad = restoring_force(mc, trap, PseudoForce::Gradient);
    let eq = find_equilibrium_of(&grad, [0.0; 3], mc.r0)?;
    let force = match form {
        PseudoForce::Gradient => grad,
        PseudoForce::PerAxis => restoring_force(mc, trap, PseudoForce::PerAxis),
    };
    Ok((force.map(|g| g.shifted(eq).truncated(3)), eq))
}

/// Taylor-expansion coefficients of `axis` about the pseudopotential minimum.
///
/// Transverse frequencies and quadratic self-terms are read from the `p` and
/// `q` equations of the same expansion. `μ` and `k` are left at zero.
pub fn derive_axis(
    mc: &MultipoleCoefficients,
    trap: &TrapParams,
    axis: Axis,
    form: PseudoForce,
) -> Result<AxisCoefficients, CoefficientError> {
    let (force, _) = expanded_force(mc, trap, form)?;
    axis_from_forces(&force, axis)
}

fn axis_from_forces(
    force: &[TrivariatePolynomial; 3],
    axis: Axis,
) -> Result<AxisCoefficients, CoefficientError> {
    let mut c = AxisCoefficients::from_terms(axis, taylor_terms(&force[axis.index()], axis))?;
    let (p, q) = transverse(axis);
    let tp = taylor_terms(&force[p.index()], p);
    let tq = taylor_terms(&force[q.index()], q);
    for (ax, t) in [(p, tp), (q, tq)] {
        if !(t.omega0_sq > 0.0) {
            return Err(CoefficientError::NonConfining {
                axis: ax,
                omega0_sq: t.omega0_sq,
            });
        }
    }
    c.omega0_p = tp.omega0_sq.sqrt();
    c.omega0_q = tq.omega0_sq.sqrt();
    c.alpha2_p = tp.alpha2;
    c.alpha2_q = tq.alpha2;
    Ok(c)
}

/// Harmonic drive applied to one axis: `k cos(ω t + φ0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Drive {
    pub axis: Axis,
    /// Amplitude, m/s².
    pub k: f64,
    /// Angular frequency, rad/s.
    pub omega: f64,
}

/// Coupled three-axis secular model.
#[derive(Clone, Debug)]
pub struct Model3D {
    /// Indexed by [`Axis::index`].
    pub axes: [AxisCoefficients; 3],
    pub mu: [f64; 3],
    pub drive: Drive,
    force: [TrivariatePolynomial; 3],
    compiled: [CompiledPolynomial; 3],
    potential: Option<TrivariatePolynomial>,
}

impl Model3D {
    fn assemble(
        axes: [AxisCoefficients; 3],
        mu: [f64; 3],
        drive: Drive,
        force: [TrivariatePolynomial; 3],
        potential: Option<TrivariatePolynomial>,
    ) -> Result<Self, CoefficientError> {
        if mu.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(CoefficientError::Invalid(
                "damping rates must be finite and non-negative".into(),
            ));
        }
        if !drive.k.is_finite() || !drive.omega.is_finite() || drive.omega < 0.0 {
            return Err(CoefficientError::Invalid(
                "drive amplitude and frequency must be finite".into(),
            ));
        }
        if force.iter().any(|f| f.degree() > 7) {
            return Err(CoefficientError::Invalid(
                "force polynomial degree above 7".into(),
            ));
        }
        let compiled = force.clone().map(|f| f.compile());
        Ok(Self {
            axes,
            mu,
            drive,
            force,
            compiled,
            potential,
        })
    }

    /// Model from the pseudopotential: gradient force about the equilibrium,
    /// truncated to cubic order, conservative.
    pub fn from_potential(
        mc: &MultipoleCoefficients,
        trap: &TrapParams,
        mu: [f64; 3],
        drive: Drive,
    ) -> Result<Self, CoefficientError> {
        let (force, eq) = expanded_force(mc, trap, PseudoForce::Gradient)?;
        let psi = crate::multipole::pseudopotential(mc, trap);
        let mut potential = psi
            .shifted(eq)
            .truncated(4)
            .scale(1.0 / trap.mass)
            .with_unit(Unit::SpecificEnergy);
        potential.add_term([0, 0, 0], -potential.coeff([0, 0, 0]));
        let [x, y, z] = [Axis::X, Axis::Y, Axis::Z].map(|a| axis_from_forces(&force, a));
        let mut axes = [x?, y?, z?];
        for (i, a) in axes.iter_mut().enumerate() {
            a.mu = mu[i];
            if a.axis == drive.axis {
                a.k = drive.k;
            }
        }
        Self::assemble(axes, mu, drive, force, Some(potential))
    }

    /// Model built from the per-axis term lists alone. Not conservative in general.
    pub fn from_axis_coefficients(
        axes: [AxisCoefficients; 3],
        drive: Drive,
    ) -> Result<Self, CoefficientError> {
        for (i, a) in axes.iter().enumerate() {
            if a.axis.index() != i {
                return Err(CoefficientError::Invalid(format!(
                    "axis slot {i} holds {} coefficients",
                    a.axis
                )));
            }
            if !(a.omega0 > 0.0) || !a.is_finite() {
                return Err(CoefficientError::NonConfining {
                    axis: a.axis,
                    omega0_sq: a.omega0 * a.omega0,
                });
            }
        }
        let mu = axes.map(|a| a.mu);
        let force = axes.map(|a| a.force_polynomial());
        Self::assemble(axes, mu, drive, force, None)
    }

    /// Conservative model whose driven-axis equation carries exactly the
    /// coefficients of `driven`.
    ///
    /// The potential per unit mass is the integral of the driven equation's
    /// terms along the driven coordinate, plus harmonic and quadratic
    /// self-terms for the transverse axes. The transverse equations then pick
    /// up the matching cross terms, e.g. `α8 ξ²/2` and `α5 ξ² p` in the `p`
    /// equation.
    pub fn from_reduced_potential(
        driven: &AxisCoefficients,
        mu: [f64; 3],
        drive: Drive,
    ) -> Result<Self, CoefficientError> {
        let axis = driven.axis;
        if drive.axis != axis {
            return Err(CoefficientError::Invalid(
                "drive axis must be the driven equation's axis".into(),
            ));
        }
        let (p, q) = transverse(axis);
        for (ax, w) in [
            (axis, driven.omega0),
            (p, driven.omega0_p),
            (q, driven.omega0_q),
        ] {
            if !(w > 0.0) {
                return Err(CoefficientError::NonConfining {
                    axis: ax,
                    omega0_sq: w * w,
                });
            }
        }
        let mut v = TrivariatePolynomial::zero(Unit::SpecificEnergy);
        for (pw, c) in ForceTerms::POWERS.iter().zip(driven.terms().to_array()) {
            let e = axis_monomial(axis, (pw.0 + 1, pw.1, pw.2));
            v.add_term(e, c / f64::from(pw.0 + 1));
        }
        for (ax, w, a2) in [
            (p, driven.omega0_p, driven.alpha2_p),
            (q, driven.omega0_q, driven.alpha2_q),
        ] {
            let mut e = [0u8; 3];
            e[ax.index()] = 2;
            v.add_term(e, 0.5 * w * w);
            e[ax.index()] = 3;
            v.add_term(e, a2 / 3.0);
        }
        let force = v.gradient().map(|g| g.with_unit(Unit::Acceleration));
        let mut axes = [Axis::X, Axis::Y, Axis::Z].map(|a| {
            let mut c = AxisCoefficients::from_terms(a, taylor_terms(&force[a.index()], a))
                .unwrap_or_else(|_| AxisCoefficients::duffing(a, 0.0, 0.0, 0.0, 0.0));
            c.mu = mu[a.index()];
            c
        });
        axes[axis.index()] = AxisCoefficients {
            mu: mu[axis.index()],
            k: drive.k,
            ..*driven
        };
        Self::assemble(axes, mu, drive, force, Some(v))
    }

    /// Restoring-force polynomials `G_ξ`.
    pub fn force(&self) -> &[TrivariatePolynomial; 3] {
        &self.force
    }

    pub fn compiled_force(&self) -> &[CompiledPolynomial; 3] {
        &self.compiled
    }

    /// Potential energy per unit mass (m²/s²) when the force is conservative.
    pub fn potential(&self) -> Option<&TrivariatePolynomial> {
        self.potential.as_ref()
    }

    pub fn driven(&self) -> &AxisCoefficients {
        &self.axes[self.drive.axis.index()]
    }

    pub fn with_drive_omega(mut self, omega: f64) -> Self {
        self.drive.omega = omega;
        self
    }

    /// Largest violation of `∂G_a/∂x_b = ∂G_b/∂x_a` over all coefficient
    /// pairs, relative to the largest coefficient involved; zero for a force
    /// derived from one scalar potential.
    pub fn potential_consistency(&self) -> f64 {
        mixed_partial_violation(&self.force)
    }
}

/// `max |c_a(e + 1_b) (e_b + 1) - c_b(e + 1_a) (e_a + 1)| / scale` over monomials
/// `e` and axis pairs, i.e. the coefficient form of `∂_b G_a = ∂_a G_b`.
pub fn mixed_partial_violation(force: &[TrivariatePolynomial; 3]) -> f64 {
    let mut worst: f64 = 0.0;
    for a in Axis::ALL {
        for b in Axis::ALL {
            if b <= a {
                continue;
            }
            let da = force[a.index()].derivative(b);
            let db = force[b.index()].derivative(a);
            let diff = &da - &db;
            let scale = da.max_abs_coeff().max(db.max_abs_coeff());
            if scale > 0.0 {
                worst = worst.max(diff.max_abs_coeff() / scale);
            }
        }
    }
    worst
}
