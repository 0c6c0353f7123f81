//! Multipole description of the trap potential.
//!
//! The electrode potentials are expanded on a fixed table of 25 real solid
//! harmonics `Y_j` (degrees 0 through 4) in the dimensionless coordinates
//! `x/r0, y/r0, z/r0`. Aggregated amplitudes `U_j*` (rf) and `V_j*` (dc),
//! together with normalization constants `M_j`, give
//!
//! ```text
//! Φ_dc(r) = Σ_j V_j* M_j Y_j(r / r0)
//! Φ_rf(r, t) = Σ_j U_j* M_j Y_j(r / r0) cos(Ω t)
//! ```
//!
//! The time-averaged (secular) motion sees the pseudopotential
//! `Ψ = e Φ_dc + e² |∇Φ_rf|² / (4 m Ω²)`, where `Φ_rf` here denotes the rf
//! envelope.
//!
//! # Basis table
//!
//! Indices are grouped by degree and, inside a degree, ordered by azimuthal
//! number `m = -ℓ..ℓ` (negative `m` carries the `sin(mφ)`, i.e. `y`-like,
//! dependence). The overall scale of each polynomial is fixed so that the
//! monomials that feed the axial equation of motion carry the coefficients
//! used by the closed-form axial coefficients in [`crate::coefficients`].
//! With `ρ² = x² + y²`:
//!
//! | j | ℓ | Y_j |
//! |---|---|-----|
//! | 1 | 0 | 1 |
//! | 2 | 1 | y |
//! | 3 | 1 | z |
//! | 4 | 1 | x |
//! | 5 | 2 | xy |
//! | 6 | 2 | yz |
//! | 7 | 2 | 2z² − ρ² |
//! | 8 | 2 | xz |
//! | 9 | 2 | x² − y² |
//! | 10 | 3 | y(3x² − y²) |
//! | 11 | 3 | xyz |
//! | 12 | 3 | y(4z² − ρ²) |
//! | 13 | 3 | z(2z² − 3ρ²) |
//! | 14 | 3 | x(4z² − ρ²) |
//! | 15 | 3 | z(x² − y²) |
//! | 16 | 3 | x(x² − 3y²) |
//! | 17 | 4 | xy(x² − y²) |
//! | 18 | 4 | yz(3x² − y²) |
//! | 19 | 4 | (7/6) xy(6z² − ρ²) |
//! | 20 | 4 | (7/4) yz(4z² − 3ρ²) |
//! | 21 | 4 | (35/8)(8z⁴ − 24z²ρ² + 3ρ⁴) |
//! | 22 | 4 | (7/4) xz(4z² − 3ρ²) |
//! | 23 | 4 | (7/6)(x² − y²)(6z² − ρ²) |
//! | 24 | 4 | xz(x² − 3y²) |
//! | 25 | 4 | x⁴ − 6x²y² + y⁴ |
//!
//! `cargo run -- basis` prints the expanded monomial list.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use thiserror::Error;

use crate::poly::{Axis, Exponents, TrivariatePolynomial, Unit};

/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Unified atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Number of multipole slots (j = 1..=25).
pub const N_MULTIPOLES: usize = 25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MultipoleError {
    #[error("weight matrix has {rows} rows but {electrodes} electrodes are listed")]
    DimensionMismatch { rows: usize, electrodes: usize },
    #[error("weight row {row} has {len} entries, expected {N_MULTIPOLES}")]
    RowLength { row: usize, len: usize },
    #[error("multipole index {0} outside 1..=25")]
    Index(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriumError {
    #[error("force field is degenerate (singular Jacobian) at {point:?}; no isolated minimum")]
    Degenerate { point: [f64; 3] },
    #[error(
        "equilibrium search did not converge after {iterations} iterations (|F| = {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("stationary point at {point:?} is not a minimum (curvatures {curvatures:?})")]
    Saddle {
        point: [f64; 3],
        curvatures: [f64; 3],
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct BasisEntry {
    pub index: usize,
    pub degree: u32,
    pub polynomial: TrivariatePolynomial,
}

/// The 25-entry real-solid-harmonic table, dimensionless arguments.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicBasis {
    entries: Vec<BasisEntry>,
}

impl HarmonicBasis {
    pub fn entries(&self) -> &[BasisEntry] {
        &self.entries
    }

    /// Entry for 1-based index `j`.
    pub fn get(&self, j: usize) -> Option<&BasisEntry> {
        j.checked_sub(1).and_then(|i| self.entries.get(i))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Degree of basis index `j` (1-based).
pub fn degree_of_index(j: usize) -> Option<u32> {
    match j {
        1 => Some(0),
        2..=4 => Some(1),
        5..=9 => Some(2),
        10..=16 => Some(3),
        17..=25 => Some(4),
        _ => None,
    }
}

fn poly(terms: &[(Exponents, f64)]) -> TrivariatePolynomial {
    TrivariatePolynomial::from_terms(terms.iter().copied(), Unit::Dimensionless)
}

pub fn build_basis() -> HarmonicBasis {
    let s19 = 7.0 / 6.0;
    let s20 = 7.0 / 4.0;
    let s21 = 35.0 / 8.0;
    let table: Vec<TrivariatePolynomial> = vec![
        // ℓ = 0
        poly(&[([0, 0, 0], 1.0)]),
        // ℓ = 1
        poly(&[([0, 1, 0], 1.0)]),
        poly(&[([0, 0, 1], 1.0)]),
        poly(&[([1, 0, 0], 1.0)]),
        // ℓ = 2
        poly(&[([1, 1, 0], 1.0)]),
        poly(&[([0, 1, 1], 1.0)]),
        poly(&[([0, 0, 2], 2.0), ([2, 0, 0], -1.0), ([0, 2, 0], -1.0)]),
        poly(&[([1, 0, 1], 1.0)]),
        poly(&[([2, 0, 0], 1.0), ([0, 2, 0], -1.0)]),
        // ℓ = 3
        poly(&[([2, 1, 0], 3.0), ([0, 3, 0], -1.0)]),
        poly(&[([1, 1, 1], 1.0)]),
        poly(&[([0, 1, 2], 4.0), ([2, 1, 0], -1.0), ([0, 3, 0], -1.0)]),
        poly(&[([0, 0, 3], 2.0), ([2, 0, 1], -3.0), ([0, 2, 1], -3.0)]),
        poly(&[([1, 0, 2], 4.0), ([3, 0, 0], -1.0), ([1, 2, 0], -1.0)]),
        poly(&[([2, 0, 1], 1.0), ([0, 2, 1], -1.0)]),
        poly(&[([3, 0, 0], 1.0), ([1, 2, 0], -3.0)]),
        // ℓ = 4
        poly(&[([3, 1, 0], 1.0), ([1, 3, 0], -1.0)]),
        poly(&[([2, 1, 1], 3.0), ([0, 3, 1], -1.0)]),
        poly(&[([1, 1, 2], 6.0 * s19), ([3, 1, 0], -s19), ([1, 3, 0], -s19)]),
        poly(&[
            ([0, 1, 3], 4.0 * s20),
            ([2, 1, 1], -3.0 * s20),
            ([0, 3, 1], -3.0 * s20),
        ]),
        poly(&[
            ([0, 0, 4], 8.0 * s21),
            ([2, 0, 2], -24.0 * s21),
            ([0, 2, 2], -24.0 * s21),
            ([4, 0, 0], 3.0 * s21),
            ([2, 2, 0], 6.0 * s21),
            ([0, 4, 0], 3.0 * s21),
        ]),
        poly(&[
            ([1, 0, 3], 4.0 * s20),
            ([3, 0, 1], -3.0 * s20),
            ([1, 2, 1], -3.0 * s20),
        ]),
        poly(&[
            ([2, 0, 2], 6.0 * s19),
            ([0, 2, 2], -6.0 * s19),
            ([4, 0, 0], -s19),
            ([0, 4, 0], s19),
        ]),
        poly(&[([3, 0, 1], 1.0), ([1, 2, 1], -3.0)]),
        poly(&[([4, 0, 0], 1.0), ([2, 2, 0], -6.0), ([0, 4, 0], 1.0)]),
    ];
    let entries = table
        .into_iter()
        .enumerate()
        .map(|(i, polynomial)| {
            let index = i + 1;
            BasisEntry {
                index,
                degree: degree_of_index(index).expect("index in range"),
                polynomial,
            }
        })
        .collect();
    HarmonicBasis { entries }
}

/// Charge and mass of the trapped particle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrapParams {
    /// Charge, C.
    pub charge: f64,
    /// Mass, kg.
    pub mass: f64,
}

impl TrapParams {
    pub fn new(charge: f64, mass: f64) -> Result<Self, MultipoleError> {
        if charge == 0.0 || !charge.is_finite() {
            return Err(MultipoleError::InvalidParameter(
                "charge must be finite and nonzero".into(),
            ));
        }
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(MultipoleError::InvalidParameter(
                "mass must be positive".into(),
            ));
        }
        Ok(Self { charge, mass })
    }

    /// Singly charged ion of the given mass in atomic mass units.
    pub fn singly_charged(mass_u: f64) -> Self {
        Self {
            charge: ELEMENTARY_CHARGE,
            mass: mass_u * ATOMIC_MASS_UNIT,
        }
    }
}

/// Aggregated multipole amplitudes. Index slots are 1-based through the accessors.
#[derive(Clone, Debug, PartialEq)]
pub struct MultipoleCoefficients {
    /// Length scale r0, m.
    pub r0: f64,
    /// rf drive angular frequency Ω, rad/s.
    pub omega_rf: f64,
    /// rf amplitudes U_j*, V.
    pub u_star: [f64; N_MULTIPOLES],
    /// dc amplitudes V_j*, V.
    pub v_star: [f64; N_MULTIPOLES],
    /// Normalization constants M_j.
    pub norm: [f64; N_MULTIPOLES],
}

impl MultipoleCoefficients {
    pub fn new(r0: f64, omega_rf: f64) -> Result<Self, MultipoleError> {
        if !(r0 > 0.0) || !r0.is_finite() {
            return Err(MultipoleError::InvalidParameter(
                "r0 must be positive".into(),
            ));
        }
        if !(omega_rf > 0.0) || !omega_rf.is_finite() {
            return Err(MultipoleError::InvalidParameter(
                "rf frequency must be positive".into(),
            ));
        }
        Ok(Self {
            r0,
            omega_rf,
            u_star: [0.0; N_MULTIPOLES],
            v_star: [0.0; N_MULTIPOLES],
            norm: [1.0; N_MULTIPOLES],
        })
    }

    fn slot(j: usize) -> usize {
        assert!(
            (1..=N_MULTIPOLES).contains(&j),
            "multipole index {j} outside 1..=25"
        );
        j - 1
    }

    pub fn u(&self, j: usize) -> f64 {
        self.u_star[Self::slot(j)]
    }

    pub fn v(&self, j: usize) -> f64 {
        self.v_star[Self::slot(j)]
    }

    pub fn m(&self, j: usize) -> f64 {
        self.norm[Self::slot(j)]
    }

    pub fn set_u(&mut self, j: usize, value: f64) -> &mut Self {
        self.u_star[Self::slot(j)] = value;
        self
    }

    pub fn set_v(&mut self, j: usize, value: f64) -> &mut Self {
        self.v_star[Self::slot(j)] = value;
        self
    }

    pub fn set_m(&mut self, j: usize, value: f64) -> &mut Self {
        self.norm[Self::slot(j)] = value;
        self
    }

    pub fn with_amplitudes(mut self, amps: (Vec<f64>, Vec<f64>)) -> Result<Self, MultipoleError> {
        let (u, v) = amps;
        if u.len() != N_MULTIPOLES || v.len() != N_MULTIPOLES {
            return Err(MultipoleError::RowLength {
                row: 0,
                len: u.len().min(v.len()),
            });
        }
        self.u_star.copy_from_slice(&u);
        self.v_star.copy_from_slice(&v);
        Ok(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Electrode {
    pub label: String,
    /// dc voltage V_i, V.
    pub dc: f64,
    /// rf amplitude U_i, V.
    pub rf: f64,
}

/// Electrode voltages plus the weight matrix `g[i][j]` projecting each
/// electrode onto the multipole basis.
#[derive(Clone, Debug, PartialEq)]
pub struct ElectrodeConfig {
    pub electrodes: Vec<Electrode>,
    pub weights: Vec<Vec<f64>>,
}

/// `U_j* = Σ_i U_i g_ij`, `V_j* = Σ_i V_i g_ij`.
pub fn aggregate_electrodes(cfg: &ElectrodeConfig) -> Result<(Vec<f64>, Vec<f64>), MultipoleError> {
    if cfg.weights.len() != cfg.electrodes.len() {
        return Err(MultipoleError::DimensionMismatch {
            rows: cfg.weights.len(),
            electrodes: cfg.electrodes.len(),
        });
    }
    let mut u = vec![0.0; N_MULTIPOLES];
    let mut v = vec![0.0; N_MULTIPOLES];
    for (row, (el, g)) in cfg.electrodes.iter().zip(&cfg.weights).enumerate() {
        if g.len() != N_MULTIPOLES {
            return Err(MultipoleError::RowLength { row, len: g.len() });
        }
        for j in 0..N_MULTIPOLES {
            u[j] += el.rf * g[j];
            v[j] += el.dc * g[j];
        }
    }
    Ok((u, v))
}

fn superpose(mc: &MultipoleCoefficients, amplitudes: &[f64; N_MULTIPOLES]) -> TrivariatePolynomial {
    let basis = build_basis();
    let inv = 1.0 / mc.r0;
    let mut out = TrivariatePolynomial::zero(Unit::Volt);
    for entry in basis.entries() {
        let a = amplitudes[entry.index - 1] * mc.norm[entry.index - 1];
        if a == 0.0 {
            continue;
        }
        let physical = entry.polynomial.rescale_variables([inv; 3]).scale(a);
        out = &out + &physical;
    }
    out.with_unit(Unit::Volt)
}

/// Static potential Φ_dc in volts, physical coordinates (m).
pub fn potential_dc(mc: &MultipoleCoefficients) -> TrivariatePolynomial {
    superpose(mc, &mc.v_star)
}

/// Amplitude of the `cos(Ωt)` rf potential in volts.
pub fn potential_rf_envelope(mc: &MultipoleCoefficients) -> TrivariatePolynomial {
    superpose(mc, &mc.u_star)
}

/// Time-averaged pseudopotential energy `e Φ_dc + e² |∇Φ_rf|² / (4 m Ω²)` in joules.
pub fn pseudopotential(mc: &MultipoleCoefficients, trap: &TrapParams) -> TrivariatePolynomial {
    let dc = potential_dc(mc).scale(trap.charge);
    let rf = potential_rf_envelope(mc);
    let grad = rf.gradient();
    let mut sq = TrivariatePolynomial::zero(Unit::Derived);
    for g in &grad {
        sq = &sq + &(g * g);
    }
    let pref = trap.charge * trap.charge / (4.0 * trap.mass * mc.omega_rf * mc.omega_rf);
    (&dc + &sq.scale(pref)).with_unit(Unit::Joule)
}

/// How the rf contribution enters each axis' equation of motion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PseudoForce {
    /// Force is `-∇Ψ / m` with the full pseudopotential Ψ; conservative.
    #[default]
    Gradient,
    /// Each axis ξ only feels `(e² / 4m²Ω²) ∂_ξ (∂_ξ Φ_rf)²`, the one-dimensional
    /// averaged form. This is the form the closed-form axial coefficients follow.
    PerAxis,
}

/// Restoring accelerations `G_ξ` with `ξ̈ = -G_ξ(r)` (m/s²), one polynomial per axis.
pub fn restoring_force(
    mc: &MultipoleCoefficients,
    trap: &TrapParams,
    form: PseudoForce,
) -> [TrivariatePolynomial; 3] {
    match form {
        PseudoForce::Gradient => {
            let psi = pseudopotential(mc, trap);
            psi.gradient()
                .map(|g| g.scale(1.0 / trap.mass).with_unit(Unit::Acceleration))
        }
        PseudoForce::PerAxis => {
            let dc = potential_dc(mc);
            let rf = potential_rf_envelope(mc);
            let pref = trap.charge * trap.charge
                / (4.0 * trap.mass * trap.mass * mc.omega_rf * mc.omega_rf);
            Axis::ALL.map(|a| {
                let d = rf.derivative(a);
                let rf_term = (&d * &d).derivative(a).scale(pref);
                let dc_term = dc.derivative(a).scale(trap.charge / trap.mass);
                (&dc_term + &rf_term).with_unit(Unit::Acceleration)
            })
        }
    }
}

/// Newton solve of `G(r) = 0` from `seed`, requiring a confining stationary point.
///
/// `length_scale` sets the step tolerance (`1e-13 · length_scale`).
pub fn find_equilibrium_of(
    force: &[TrivariatePolynomial; 3],
    seed: [f64; 3],
    length_scale: f64,
) -> Result<[f64; 3], EquilibriumError> {
    const MAX_ITER: usize = 100;
    let jac: [[TrivariatePolynomial; 3]; 3] = force.clone().map(|g| g.gradient());
    let mut r = seed;
    let mut last_residual = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let f = Vector3::from_fn(|i, _| force[i].eval(r));
        let j = Matrix3::from_fn(|i, k| jac[i][k].eval(r));
        last_residual = f.norm();
        let scale = j.abs().max();
        if scale == 0.0 || j.determinant().abs() <= 1e-14 * scale.powi(3) {
            return Err(EquilibriumError::Degenerate { point: r });
        }
        let step = j
            .lu()
            .solve(&(-f))
            .ok_or(EquilibriumError::Degenerate { point: r })?;
        for i in 0..3 {
            r[i] += step[i];
        }
        if step.norm() <= 1e-13 * length_scale {
            let j = Matrix3::from_fn(|i, k| jac[i][k].eval(r));
            let sym = (j + j.transpose()) * 0.5;
            let eig = SymmetricEigen::new(sym).eigenvalues;
            let curv = [eig[0], eig[1], eig[2]];
            if curv.iter().any(|&c| c <= 0.0) {
                return Err(EquilibriumError::Saddle {
                    point: r,
                    curvatures: curv,
                });
            }
            return Ok(r);
        }
    }
    Err(EquilibriumError::NoConvergence {
        iterations: MAX_ITER,
        residual: last_residual,
    })
}

/// Minimum of the pseudopotential (gradient form) nearest `seed`.
pub fn find_equilibrium(
    mc: &MultipoleCoefficients,
    trap: &TrapParams,
    seed: Option<[f64; 3]>,
) -> Result<[f64; 3], EquilibriumError> {
    let force = restoring_force(mc, trap, PseudoForce::Gradient);
    find_equilibrium_of(&force, seed.unwrap_or([0.0; 3]), mc.r0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trap() -> TrapParams {
        TrapParams::singly_charged(40.0)
    }

    fn quad(u7: f64, v7: f64) -> MultipoleCoefficients {
        let mut mc = MultipoleCoefficients::new(8e-4, 2.0 * std::f64::consts::PI * 15e6).unwrap();
        mc.set_u(7, u7).set_v(7, v7);
        mc
    }

    #[test]
    fn basis_degrees_follow_index_ranges() {
        let b = build_basis();
        assert_eq!(b.len(), 25);
        assert_eq!(b.get(7).unwrap().degree, 2);
        assert_eq!(b.entries().iter().filter(|e| e.degree == 4).count(), 9);
        for e in b.entries() {
            assert_eq!(e.polynomial.degree(), e.degree, "j = {}", e.index);
            assert!(
                e.polynomial.laplacian().is_zero(),
                "j = {} not harmonic",
                e.index
            );
        }
    }

    #[test]
    fn aggregation_identity_weight() {
        let mut g = vec![0.0; 25];
        g[6] = 1.0;
        let cfg = ElectrodeConfig {
            electrodes: vec![Electrode {
                label: "rf".into(),
                dc: 0.0,
                rf: 400.0,
            }],
            weights: vec![g],
        };
        let (u, v) = aggregate_electrodes(&cfg).unwrap();
        assert_eq!(u[6], 400.0);
        assert!(u.iter().enumerate().all(|(i, x)| i == 6 || *x == 0.0));
        assert!(v.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn aggregation_cancels_opposite_voltages() {
        let g = vec![0.3; 25];
        let cfg = ElectrodeConfig {
            electrodes: vec![
                Electrode {
                    label: "a".into(),
                    dc: 1.0,
                    rf: 100.0,
                },
                Electrode {
                    label: "b".into(),
                    dc: -1.0,
                    rf: -100.0,
                },
            ],
            weights: vec![g.clone(), g],
        };
        let (u, v) = aggregate_electrodes(&cfg).unwrap();
        assert!(u.iter().chain(&v).all(|x| *x == 0.0));
    }

    #[test]
    fn aggregation_rejects_mismatch() {
        let cfg = ElectrodeConfig {
            electrodes: vec![Electrode {
                label: "a".into(),
                dc: 1.0,
                rf: 0.0,
            }],
            weights: vec![],
        };
        assert!(matches!(
            aggregate_electrodes(&cfg),
            Err(MultipoleError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_amplitudes_give_zero_potentials() {
        let mc = MultipoleCoefficients::new(1e-3, 1e8).unwrap();
        assert!(potential_dc(&mc).is_zero());
        assert!(potential_rf_envelope(&mc).is_zero());
        assert!(pseudopotential(&mc, &trap()).is_zero());
    }

    #[test]
    fn single_slot_potentials_have_expected_degree() {
        let mut mc = MultipoleCoefficients::new(1e-3, 1e8).unwrap();
        mc.set_v(7, 2.0);
        let p = potential_dc(&mc);
        assert!(p.terms().all(|(e, _)| crate::poly::total_degree(e) == 2));
        let mut mc = MultipoleCoefficients::new(1e-3, 1e8).unwrap();
        mc.set_u(13, 2.0);
        let p = potential_rf_envelope(&mc);
        assert!(p.terms().all(|(e, _)| crate::poly::total_degree(e) == 3));
        let mut other = mc.clone();
        other.omega_rf = 3e8;
        assert_eq!(potential_rf_envelope(&other), p);
    }

    #[test]
    fn pure_quadrupole_pseudopotential_is_even_quadratic() {
        let mc = quad(300.0, 0.0);
        let psi = pseudopotential(&mc, &trap());
        for (e, _) in psi.terms() {
            assert_eq!(crate::poly::total_degree(e), 2);
            assert!(e.iter().all(|p| p % 2 == 0));
        }
        // |∇(U M Y7)|² = U² M² (4x² + 4y² + 16z²) / r0⁴
        let pref = trap().charge.powi(2) / (4.0 * trap().mass * mc.omega_rf.powi(2))
            * 300.0f64.powi(2)
            / mc.r0.powi(4);
        assert!((psi.coeff([0, 0, 2]) - 16.0 * pref).abs() < 1e-12 * 16.0 * pref);
        assert!((psi.coeff([2, 0, 0]) - 4.0 * pref).abs() < 1e-12 * 4.0 * pref);
    }

    #[test]
    fn equilibrium_of_symmetric_quadrupole_is_origin() {
        let mc = quad(300.0, 0.0);
        let r = find_equilibrium(&mc, &trap(), Some([1e-5, -2e-5, 3e-5])).unwrap();
        assert!(r.iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn uniform_field_shifts_equilibrium_against_force() {
        // add V3 (∝ z): force along -z for positive charge and V3 > 0
        let mut mc = quad(300.0, 0.0);
        mc.set_v(3, 1e-3);
        let t = trap();
        let r = find_equilibrium(&mc, &t, None).unwrap();
        // 1D analytic minimum of (1/2) k z² + c z: z* = -c/k
        let psi = pseudopotential(&mc, &t);
        let kz = 2.0 * psi.coeff([0, 0, 2]);
        let c = psi.coeff([0, 0, 1]);
        assert!(r[2] < 0.0);
        assert!((r[2] + c / kz).abs() < 1e-12 * (c / kz).abs());
    }

    #[test]
    fn zero_potential_has_no_minimum() {
        let mc = MultipoleCoefficients::new(1e-3, 1e8).unwrap();
        assert!(matches!(
            find_equilibrium(&mc, &trap(), None),
            Err(EquilibriumError::Degenerate { .. })
        ));
    }

    #[test]
    fn dc_saddle_is_reported() {
        // a pure dc quadrupole is a saddle in 3D
        let mut mc = MultipoleCoefficients::new(1e-3, 1e8).unwrap();
        mc.set_v(7, 1.0);
        assert!(matches!(
            find_equilibrium(&mc, &trap(), None),
            Err(EquilibriumError::Saddle { .. })
        ));
    }
}
