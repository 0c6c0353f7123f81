//! Run configuration.
//!
//! A TOML file with the sections below. Unknown keys are rejected.
//! Frequencies are given in Hz and converted to rad/s here and nowhere else;
//! everything else is SI (damping `mu` in 1/s, drive `k` in m/s², nonlinear
//! coefficients in s⁻²·m⁻ⁿ⁺¹).
//!
//! ```toml
//! seed = 7
//!
//! [trap]
//! mass_u = 40.0
//! rf_hz = 24.0e6
//! r0_m = 1.0e-3
//! norm = { "7" = 0.5 }        # M_j overrides, default 1
//!
//! [multipole]                 # or [[electrode]] tables, or [axes]
//! rf = { "7" = 300.0 }        # U_j*, V
//! dc = { "1" = 2.0 }          # V_j*, V
//!
//! [model]
//! drive_axis = "z"
//! k = 7.5e4
//! mu = 177.1                  # or { x = .., y = .., z = .. }
//! coupling = { mode = "lumped", value = 4.5e18, upper_hz = 250.0 }
//!
//! [protocol]
//! lo_hz = 190.7e3
//! hi_hz = 192.2e3
//! step_hz = 100.0
//! settle_s = 0.02
//! measure_s = 0.005
//! direction = "both"
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coefficients::{derive_axis, AxisCoefficients, CoefficientError, Drive, Model3D};
use crate::dynamics::{IntegrationOptions, Plane, SweepProtocol};
use crate::estimation::FitOptions;
use crate::multipole::{
    aggregate_electrodes, Electrode, ElectrodeConfig, MultipoleCoefficients, PseudoForce,
    TrapParams, ATOMIC_MASS_UNIT, ELEMENTARY_CHARGE, N_MULTIPOLES,
};
use crate::multiscale::{Coupling, Direction, ResponseInputs};
use crate::poly::Axis;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("invalid `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("missing section [{0}]")]
    Missing(&'static str),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl ConfigError {
    fn invalid(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Invalid {
            key: key.into(),
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed of every random draw; required by commands that draw.
    pub seed: Option<u64>,
    pub trap: Option<TrapSection>,
    pub multipole: Option<MultipoleSection>,
    pub electrode: Option<Vec<ElectrodeEntry>>,
    pub axes: Option<AxesSection>,
    #[serde(default)]
    pub model: ModelSection,
    pub protocol: Option<ProtocolSection>,
    pub response: Option<ResponseSection>,
    pub simulate: Option<SimulateSection>,
    pub synth: Option<SynthSection>,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub integration: IntegrationSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSection {
    /// Ion mass, u.
    pub mass_u: f64,
    /// Charge in elementary charges.
    #[serde(default = "one")]
    pub charge_e: f64,
    pub rf_hz: f64,
    pub r0_m: f64,
    /// `M_j` overrides keyed by index.
    #[serde(default)]
    pub norm: BTreeMap<String, f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultipoleSection {
    /// `U_j*` in V keyed by index, absent entries 0.
    #[serde(default)]
    pub rf: BTreeMap<String, f64>,
    /// `V_j*` in V keyed by index.
    #[serde(default)]
    pub dc: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectrodeEntry {
    pub label: String,
    #[serde(default)]
    pub dc_v: f64,
    #[serde(default)]
    pub rf_v: f64,
    /// Weights `g_ij`, 25 entries.
    pub weights: Vec<f64>,
}

/// Explicit per-axis coefficients in place of a trap description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxesSection {
    #[serde(default)]
    pub model: AxesModel,
    pub x: AxisSpec,
    pub y: AxisSpec,
    pub z: AxisSpec,
}

/// How the three-axis equations are assembled from `[axes]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxesModel {
    /// Conservative: the driven axis' terms plus transverse self-terms from one potential.
    #[default]
    Reduced,
    /// Each axis carries its own term list.
    Independent,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub f0_hz: f64,
    #[serde(default)]
    pub alpha2: f64,
    #[serde(default)]
    pub alpha3: f64,
    #[serde(default)]
    pub alpha21: f64,
    #[serde(default)]
    pub alpha22: f64,
    #[serde(default)]
    pub alpha4: f64,
    #[serde(default)]
    pub alpha5: f64,
    #[serde(default)]
    pub alpha6: f64,
    #[serde(default)]
    pub alpha7: f64,
    #[serde(default)]
    pub alpha8: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_axis")]
    pub drive_axis: Axis,
    /// Drive amplitude, m/s².
    #[serde(default)]
    pub k: f64,
    #[serde(default)]
    pub mu: Damping,
    #[serde(default)]
    pub pseudo_force: PseudoForce,
    #[serde(default)]
    pub coupling: CouplingSpec,
}

fn default_axis() -> Axis {
    Axis::Z
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            drive_axis: Axis::Z,
            k: 0.0,
            mu: Damping::default(),
            pseudo_force: PseudoForce::default(),
            coupling: CouplingSpec::default(),
        }
    }
}

/// Damping rate, 1/s: one value for all axes or one per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Damping {
    Uniform(f64),
    PerAxis { x: f64, y: f64, z: f64 },
}

impl Default for Damping {
    fn default() -> Self {
        Damping::Uniform(0.0)
    }
}

impl Damping {
    pub fn per_axis(&self) -> [f64; 3] {
        match *self {
            Damping::Uniform(m) => [m; 3],
            Damping::PerAxis { x, y, z } => [x, y, z],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum CouplingSpec {
    #[default]
    None,
    /// Fixed transverse amplitudes in m.
    Explicit {
        #[serde(default)]
        b: f64,
        c: f64,
    },
    /// Constant `χ c²/a²` (Hz²/m²) over a detuning window in Hz.
    Lumped {
        value: f64,
        #[serde(default)]
        lower_hz: Option<f64>,
        #[serde(default = "default_upper_hz")]
        upper_hz: f64,
    },
}

fn default_upper_hz() -> f64 {
    250.0
}

/// Scan directions of a sweep or synthetic data set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scan {
    Positive,
    Negative,
    #[default]
    Both,
}

impl Scan {
    pub fn directions(self) -> Vec<Direction> {
        match self {
            Scan::Positive => vec![Direction::Positive],
            Scan::Negative => vec![Direction::Negative],
            Scan::Both => vec![Direction::Positive, Direction::Negative],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    pub lo_hz: f64,
    pub hi_hz: f64,
    pub step_hz: f64,
    pub settle_s: f64,
    pub measure_s: f64,
    #[serde(default)]
    pub direction: Scan,
    #[serde(default)]
    pub reset_phase: bool,
}

/// Detuning range of the multiple-scales response curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseSection {
    pub lo_hz: f64,
    pub hi_hz: f64,
    pub step_hz: f64,
}

/// Single fixed-frequency integration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// Drive detuning from the driven axis' secular frequency.
    pub detuning_hz: f64,
    pub duration_s: f64,
    /// Trailing window used for the steady amplitude.
    pub window_s: f64,
    /// Initial displacement, m.
    #[serde(default)]
    pub initial_m: [f64; 3],
}

/// Synthetic measurement generated from the response model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub lo_hz: f64,
    pub hi_hz: f64,
    pub step_hz: f64,
    /// Relative multiplicative noise.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub direction: Scan,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// Secular frequency of the data; defaults to the model's driven axis.
    pub f0_hz: Option<f64>,
    pub fixed_mu: Option<f64>,
    pub fixed_k: Option<f64>,
    /// Fit a lumped coupling over the window of `model.coupling` (or the default window).
    #[serde(default)]
    pub coupling: bool,
    #[serde(default)]
    pub robust: bool,
    pub max_iterations: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationSection {
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol_m: f64,
    #[serde(default = "default_samples")]
    pub samples_per_period: usize,
}

fn default_rtol() -> f64 {
    IntegrationOptions::default().rtol
}

fn default_atol() -> f64 {
    IntegrationOptions::default().atol_pos
}

fn default_samples() -> usize {
    IntegrationOptions::default().samples_per_period
}

impl Default for IntegrationSection {
    fn default() -> Self {
        Self {
            rtol: default_rtol(),
            atol_m: default_atol(),
            samples_per_period: default_samples(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    #[default]
    Pgm,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: String,
    /// Emit trajectory images at sweep steps with |detuning| ≤ this.
    pub images_within_hz: Option<f64>,
    #[serde(default = "default_plane")]
    pub image_plane: Plane,
    #[serde(default = "default_bins")]
    pub image_bins: usize,
    #[serde(default)]
    pub image_format: ImageFormat,
}

fn default_dir() -> String {
    "out".into()
}

fn default_plane() -> Plane {
    Plane::Xz
}

fn default_bins() -> usize {
    64
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            images_within_hz: None,
            image_plane: default_plane(),
            image_bins: default_bins(),
            image_format: ImageFormat::default(),
        }
    }
}

/// Where the trap geometry comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Multipole(Box<MultipoleCoefficients>, TrapParams),
    Axes(Box<AxesSection>),
}

pub fn hz_to_rad(f: f64) -> f64 {
    2.0 * PI * f
}

pub fn rad_to_hz(w: f64) -> f64 {
    w / (2.0 * PI)
}

fn parse_index(map_key: &str, key: &str) -> Result<usize, ConfigError> {
    match map_key.trim().parse::<usize>() {
        Ok(j) if (1..=N_MULTIPOLES).contains(&j) => Ok(j),
        _ => Err(ConfigError::invalid(
            format!("{key}.{map_key}"),
            "multipole index must be 1..=25",
        )),
    }
}

fn finite(key: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(key, "must be finite"))
    }
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(key, "must be positive"))
    }
}

fn range(key: &str, lo: f64, hi: f64, step: f64) -> Result<(), ConfigError> {
    finite(&format!("{key}.lo_hz"), lo)?;
    finite(&format!("{key}.hi_hz"), hi)?;
    if !(hi > lo) {
        return Err(ConfigError::invalid(
            format!("{key}.hi_hz"),
            "must exceed lo_hz",
        ));
    }
    positive(&format!("{key}.step_hz"), step)
}

impl RunConfig {
    /// Parse and validate.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok((Self::parse(&text)?, text))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let sources = [
            self.multipole.is_some(),
            self.electrode.is_some(),
            self.axes.is_some(),
        ];
        match sources.iter().filter(|s| **s).count() {
            0 => {
                return Err(ConfigError::invalid(
                    "multipole",
                    "one of [multipole], [[electrode]] or [axes] is required",
                ))
            }
            1 => {}
            _ => {
                return Err(ConfigError::invalid(
                    "multipole",
                    "give exactly one of [multipole], [[electrode]] or [axes]",
                ))
            }
        }
        if self.axes.is_none() {
            let trap = self.trap.as_ref().ok_or(ConfigError::Missing("trap"))?;
            positive("trap.mass_u", trap.mass_u)?;
            finite("trap.charge_e", trap.charge_e)?;
            if trap.charge_e == 0.0 {
                return Err(ConfigError::invalid("trap.charge_e", "must be nonzero"));
            }
            positive("trap.rf_hz", trap.rf_hz)?;
            positive("trap.r0_m", trap.r0_m)?;
            for (k, v) in &trap.norm {
                parse_index(k, "trap.norm")?;
                positive(&format!("trap.norm.{k}"), *v)?;
            }
        } else if self.trap.is_some() {
            return Err(ConfigError::invalid("trap", "not used with [axes]"));
        }
        if let Some(m) = &self.multipole {
            for (name, map) in [("multipole.rf", &m.rf), ("multipole.dc", &m.dc)] {
                for (k, v) in map {
                    parse_index(k, name)?;
                    finite(&format!("{name}.{k}"), *v)?;
                }
            }
        }
        if let Some(els) = &self.electrode {
            if els.is_empty() {
                return Err(ConfigError::invalid(
                    "electrode",
                    "at least one electrode is required",
                ));
            }
            for (i, e) in els.iter().enumerate() {
                if e.weights.len() != N_MULTIPOLES {
                    return Err(ConfigError::invalid(
                        format!("electrode[{i}].weights"),
                        format!("expected {N_MULTIPOLES} entries, found {}", e.weights.len()),
                    ));
                }
                finite(&format!("electrode[{i}].dc_v"), e.dc_v)?;
                finite(&format!("electrode[{i}].rf_v"), e.rf_v)?;
            }
        }
        if let Some(a) = &self.axes {
            for (name, s) in [("axes.x", &a.x), ("axes.y", &a.y), ("axes.z", &a.z)] {
                positive(&format!("{name}.f0_hz"), s.f0_hz)?;
                for (k, v) in [
                    ("alpha2", s.alpha2),
                    ("alpha3", s.alpha3),
                    ("alpha21", s.alpha21),
                    ("alpha22", s.alpha22),
                    ("alpha4", s.alpha4),
                    ("alpha5", s.alpha5),
                    ("alpha6", s.alpha6),
                    ("alpha7", s.alpha7),
                    ("alpha8", s.alpha8),
                ] {
                    finite(&format!("{name}.{k}"), v)?;
                }
            }
        }
        finite("model.k", self.model.k)?;
        for m in self.model.mu.per_axis() {
            if !(m >= 0.0) || !m.is_finite() {
                return Err(ConfigError::invalid(
                    "model.mu",
                    "damping must be finite and non-negative",
                ));
            }
        }
        match self.model.coupling {
            CouplingSpec::None => {}
            CouplingSpec::Explicit { b, c } => {
                finite("model.coupling.b", b)?;
                finite("model.coupling.c", c)?;
            }
            CouplingSpec::Lumped {
                value,
                lower_hz,
                upper_hz,
            } => {
                finite("model.coupling.value", value)?;
                finite("model.coupling.upper_hz", upper_hz)?;
                if let Some(lo) = lower_hz {
                    finite("model.coupling.lower_hz", lo)?;
                    if lo > upper_hz {
                        return Err(ConfigError::invalid(
                            "model.coupling.lower_hz",
                            "must not exceed upper_hz",
                        ));
                    }
                }
            }
        }
        if let Some(p) = &self.protocol {
            range("protocol", p.lo_hz, p.hi_hz, p.step_hz)?;
            positive("protocol.lo_hz", p.lo_hz)?;
            positive("protocol.settle_s", p.settle_s)?;
            positive("protocol.measure_s", p.measure_s)?;
        }
        if let Some(r) = &self.response {
            range("response", r.lo_hz, r.hi_hz, r.step_hz)?;
        }
        if let Some(s) = &self.synth {
            range("synth", s.lo_hz, s.hi_hz, s.step_hz)?;
            if !(s.noise >= 0.0) || !s.noise.is_finite() {
                return Err(ConfigError::invalid("synth.noise", "must be non-negative"));
            }
        }
        if let Some(s) = &self.simulate {
            finite("simulate.detuning_hz", s.detuning_hz)?;
            positive("simulate.duration_s", s.duration_s)?;
            positive("simulate.window_s", s.window_s)?;
            if s.window_s > s.duration_s {
                return Err(ConfigError::invalid(
                    "simulate.window_s",
                    "must not exceed duration_s",
                ));
            }
        }
        if let Some(f) = self.fit.f0_hz {
            positive("fit.f0_hz", f)?;
        }
        for (k, v) in [
            ("fit.fixed_mu", self.fit.fixed_mu),
            ("fit.fixed_k", self.fit.fixed_k),
        ] {
            if let Some(v) = v {
                positive(k, v)?;
            }
        }
        positive("integration.rtol", self.integration.rtol)?;
        positive("integration.atol_m", self.integration.atol_m)?;
        if self.integration.samples_per_period < 8 {
            return Err(ConfigError::invalid(
                "integration.samples_per_period",
                "must be at least 8",
            ));
        }
        if self.output.image_bins < 2 {
            return Err(ConfigError::invalid(
                "output.image_bins",
                "must be at least 2",
            ));
        }
        Ok(())
    }

    pub fn trap_params(&self) -> Result<TrapParams, ConfigError> {
        let t = self.trap.as_ref().ok_or(ConfigError::Missing("trap"))?;
        TrapParams::new(t.charge_e * ELEMENTARY_CHARGE, t.mass_u * ATOMIC_MASS_UNIT)
            .map_err(|e| ConfigError::invalid("trap", e.to_string()))
    }

    /// Aggregated multipole amplitudes from `[multipole]` or `[[electrode]]`.
    pub fn multipole_coefficients(&self) -> Result<Option<MultipoleCoefficients>, ConfigError> {
        let Some(t) = &self.trap else { return Ok(None) };
        let mut mc = MultipoleCoefficients::new(t.r0_m, hz_to_rad(t.rf_hz))
            .map_err(|e| ConfigError::invalid("trap", e.to_string()))?;
        for (k, v) in &t.norm {
            mc.set_m(parse_index(k, "trap.norm")?, *v);
        }
        if let Some(m) = &self.multipole {
            for (k, v) in &m.rf {
                mc.set_u(parse_index(k, "multipole.rf")?, *v);
            }
            for (k, v) in &m.dc {
                mc.set_v(parse_index(k, "multipole.dc")?, *v);
            }
        } else if let Some(els) = &self.electrode {
            let cfg = ElectrodeConfig {
                electrodes: els
                    .iter()
                    .map(|e| Electrode {
                        label: e.label.clone(),
                        dc: e.dc_v,
                        rf: e.rf_v,
                    })
                    .collect(),
                weights: els.iter().map(|e| e.weights.clone()).collect(),
            };
            let amps = aggregate_electrodes(&cfg)
                .map_err(|e| ConfigError::invalid("electrode", e.to_string()))?;
            mc = mc
                .with_amplitudes(amps)
                .map_err(|e| ConfigError::invalid("electrode", e.to_string()))?;
        } else {
            return Ok(None);
        }
        Ok(Some(mc))
    }

    pub fn source(&self) -> Result<Source, ConfigError> {
        if let Some(a) = &self.axes {
            return Ok(Source::Axes(Box::new(a.clone())));
        }
        let mc = self
            .multipole_coefficients()?
            .ok_or(ConfigError::Missing("multipole"))?;
        Ok(Source::Multipole(Box::new(mc), self.trap_params()?))
    }

    fn axis_from_spec(&self, axis: Axis) -> AxisCoefficients {
        let a = self.axes.as_ref().expect("axes source");
        let s = match axis {
            Axis::X => &a.x,
            Axis::Y => &a.y,
            Axis::Z => &a.z,
        };
        let mut c = AxisCoefficients::duffing(axis, hz_to_rad(s.f0_hz), 0.0, s.alpha3, 0.0);
        c.alpha2 = s.alpha2;
        c.alpha21 = s.alpha21;
        c.alpha22 = s.alpha22;
        c.alpha4 = s.alpha4;
        c.alpha5 = s.alpha5;
        c.alpha6 = s.alpha6;
        c.alpha7 = s.alpha7;
        c.alpha8 = s.alpha8;
        let (p, q) = crate::coefficients::transverse(axis);
        let spec = |ax: Axis| match ax {
            Axis::X => &a.x,
            Axis::Y => &a.y,
            Axis::Z => &a.z,
        };
        c.omega0_p = hz_to_rad(spec(p).f0_hz);
        c.omega0_q = hz_to_rad(spec(q).f0_hz);
        c.alpha2_p = spec(p).alpha2;
        c.alpha2_q = spec(q).alpha2;
        c
    }

    /// Coefficients of `axis` with the configured damping and, on the driven axis, drive.
    pub fn axis_coefficients(&self, axis: Axis) -> Result<AxisCoefficients, CoefficientError> {
        let mut c = match self
            .source()
            .map_err(|e| CoefficientError::Invalid(e.to_string()))?
        {
            Source::Axes(_) => self.axis_from_spec(axis),
            Source::Multipole(mc, trap) => derive_axis(&mc, &trap, axis, self.model.pseudo_force)?,
        };
        c.mu = self.model.mu.per_axis()[axis.index()];
        c.k = if axis == self.model.drive_axis {
            self.model.k
        } else {
            0.0
        };
        Ok(c)
    }

    pub fn driven_coefficients(&self) -> Result<AxisCoefficients, CoefficientError> {
        self.axis_coefficients(self.model.drive_axis)
    }

    /// Coupling with the window converted to rad/s.
    pub fn coupling(&self) -> Coupling {
        match self.model.coupling {
            CouplingSpec::None => Coupling::None,
            CouplingSpec::Explicit { b, c } => Coupling::Explicit { b, c },
            CouplingSpec::Lumped {
                value,
                lower_hz,
                upper_hz,
            } => Coupling::Lumped {
                value,
                window: self.lumped_window(lower_hz, upper_hz),
            },
        }
    }

    fn lumped_window(&self, lower_hz: Option<f64>, upper_hz: f64) -> (f64, f64) {
        (
            lower_hz.map_or(f64::NEG_INFINITY, hz_to_rad),
            hz_to_rad(upper_hz),
        )
    }

    pub fn response_inputs(&self) -> Result<ResponseInputs, CoefficientError> {
        let c = self.driven_coefficients()?;
        ResponseInputs::new(c, self.coupling())
            .map_err(|e| CoefficientError::Invalid(e.to_string()))
    }

    /// Three-axis model driven at the driven axis' secular frequency.
    pub fn model(&self) -> Result<Model3D, CoefficientError> {
        let mu = self.model.mu.per_axis();
        let driven = self.driven_coefficients()?;
        let drive = Drive {
            axis: self.model.drive_axis,
            k: self.model.k,
            omega: driven.omega0,
        };
        match self
            .source()
            .map_err(|e| CoefficientError::Invalid(e.to_string()))?
        {
            Source::Multipole(mc, trap) => Model3D::from_potential(&mc, &trap, mu, drive),
            Source::Axes(a) => match a.model {
                AxesModel::Reduced => Model3D::from_reduced_potential(&driven, mu, drive),
                AxesModel::Independent => {
                    let axes = [Axis::X, Axis::Y, Axis::Z].map(|ax| {
                        let mut c = self.axis_from_spec(ax);
                        c.mu = mu[ax.index()];
                        c.k = if ax == drive.axis { drive.k } else { 0.0 };
                        c
                    });
                    Model3D::from_axis_coefficients(axes, drive)
                }
            },
        }
    }

    pub fn integration_options(&self) -> IntegrationOptions {
        IntegrationOptions {
            rtol: self.integration.rtol,
            atol_pos: self.integration.atol_m,
            samples_per_period: self.integration.samples_per_period,
        }
    }

    /// Sweep protocols in the configured scan order.
    pub fn protocols(&self) -> Result<Vec<SweepProtocol>, ConfigError> {
        let p = self
            .protocol
            .as_ref()
            .ok_or(ConfigError::Missing("protocol"))?;
        let up = SweepProtocol {
            start_hz: p.lo_hz,
            end_hz: p.hi_hz,
            step_hz: p.step_hz,
            settle_time: p.settle_s,
            measure_time: p.measure_s,
            reset_phase: p.reset_phase,
        };
        up.validate()
            .map_err(|e| ConfigError::invalid("protocol", e.to_string()))?;
        Ok(p.direction
            .directions()
            .into_iter()
            .map(|d| {
                if d == Direction::Positive {
                    up
                } else {
                    up.reversed()
                }
            })
            .collect())
    }

    pub fn fit_options(&self) -> FitOptions {
        let window = self.fit.coupling.then(|| match self.model.coupling {
            CouplingSpec::Lumped {
                lower_hz, upper_hz, ..
            } => self.lumped_window(lower_hz, upper_hz),
            _ => self.lumped_window(None, default_upper_hz()),
        });
        let d = FitOptions::default();
        FitOptions {
            fixed_mu: self.fit.fixed_mu,
            fixed_k: self.fit.fixed_k,
            coupling_window: window,
            robust: self.fit.robust,
            max_iterations: self.fit.max_iterations.unwrap_or(d.max_iterations),
        }
    }

    pub fn seed(&self) -> Result<u64, ConfigError> {
        self.seed.ok_or_else(|| {
            ConfigError::invalid("seed", "required for commands that draw random numbers")
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE_Z: &str = r#"
        seed = 1
        [axes.x]
        f0_hz = 425e3
        [axes.y]
        f0_hz = 925e3
        [axes.z]
        f0_hz = 191.7e3
        alpha3 = 0.1959e18
        [model]
        k = 7.5e4
        mu = 177.1
    "#;

    #[test]
    fn axes_config_builds_response() {
        let cfg = RunConfig::parse(REFERENCE_Z).unwrap();
        let inp = cfg.response_inputs().unwrap();
        assert!((rad_to_hz(inp.coeffs.omega0) - 191.7e3).abs() < 1e-6);
        assert_eq!(inp.coeffs.k, 7.5e4);
        assert!((rad_to_hz(inp.coeffs.omega0_p) - 425e3).abs() < 1e-6);
        let m = cfg.model().unwrap();
        assert!(m.potential_consistency() < 1e-12);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::parse(&format!("{REFERENCE_Z}\nmass = 3\n"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("mass"), "{err}");
        let err = RunConfig::parse(&REFERENCE_Z.replace("mu = 177.1", "mu = 177.1\nkk = 1"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("kk"), "{err}");
    }

    #[test]
    fn exactly_one_source() {
        let text = format!("{REFERENCE_Z}\n[multipole]\nrf = {{ \"7\" = 1.0 }}\n");
        assert!(matches!(
            RunConfig::parse(&text),
            Err(ConfigError::Invalid { .. })
        ));
        assert!(RunConfig::parse("[model]\nk = 1.0\n").is_err());
    }

    #[test]
    fn multipole_indices_are_checked() {
        let text =
            "[trap]\nmass_u = 40\nrf_hz = 2e7\nr0_m = 1e-3\n[multipole]\nrf = { \"26\" = 1.0 }\n";
        let err = RunConfig::parse(text).unwrap_err().to_string();
        assert!(err.contains("multipole.rf.26"), "{err}");
    }

    #[test]
    fn lumped_window_converts_to_rad() {
        let text = REFERENCE_Z.replace(
            "mu = 177.1",
            "mu = 177.1\ncoupling = { mode = \"lumped\", value = 4.5e18 }",
        );
        let cfg = RunConfig::parse(&text).unwrap();
        match cfg.coupling() {
            Coupling::Lumped { value, window } => {
                assert_eq!(value, 4.5e18);
                assert_eq!(window.0, f64::NEG_INFINITY);
                assert!((window.1 - 2.0 * PI * 250.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn per_axis_damping() {
        let text = REFERENCE_Z.replace("mu = 177.1", "mu = { x = 1.0, y = 2.0, z = 3.0 }");
        let cfg = RunConfig::parse(&text).unwrap();
        assert_eq!(cfg.model.mu.per_axis(), [1.0, 2.0, 3.0]);
    }
}
