//! Command-line front end. [`run`] maps every failure onto an exit code:
//! 0 success, 1 validation, 2 numerical failure, 3 I/O.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::coefficients::{
    closed_form_terms, taylor_terms, AxisCoefficients, CoefficientError, ForceTerms,
};
use crate::config::{hz_to_rad, rad_to_hz, ConfigError, ImageFormat, RunConfig, Source};
use crate::dynamics::{
    integrate, jump, steady_amplitude, sweep_observed, trajectory_image, DynamicsError, State,
    SweepOutcome,
};
use crate::estimation::{fit_response, synthesize, FitError, Measurement};
use crate::multipole::{build_basis, find_equilibrium, restoring_force, PseudoForce};
use crate::multiscale::{
    fold_points, peak_relations, response_amplitudes, tracked_response, ResponsePoint,
};
use crate::output::{
    with_header, write_fit_curve_csv, write_response_csv, write_sweep_csv, write_trajectory_csv,
    Header,
};
use crate::poly::Axis;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<CoefficientError> for CliError {
    fn from(e: CoefficientError) -> Self {
        match e {
            CoefficientError::Invalid(_) => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::InvalidProtocol(_) | DynamicsError::Invalid(_) => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::Io(_) => CliError::Io(e.to_string()),
            FitError::Csv(_) | FitError::InvalidMeasurement(_) | FitError::TooFewPoints { .. } => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "iontrap-duffing",
    version,
    about = "Nonlinear secular resonance of a trapped ion"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(short, long)]
    pub config: PathBuf,
    /// Output directory, overriding `output.dir`.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Nonlinear coefficients: closed forms against the Taylor expansion.
    Coeffs(Common),
    /// Steady-state response curve with stability.
    Response(Common),
    /// Integrate at one drive frequency.
    Simulate(Common),
    /// Quasi-static frequency sweep of the equations of motion.
    Sweep(Common),
    /// Fit the response model to measured amplitudes.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Measurement CSV: freq_hz,amplitude_m,axis,direction.
        #[arg(short, long)]
        data: PathBuf,
    },
    /// Synthetic measurement from the response model.
    Synth(Common),
    /// Print the harmonic basis table as markdown.
    Basis,
}

/// Parse arguments, run, and report errors on stderr.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(msg) => {
            print!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct Run {
    cfg: RunConfig,
    text: String,
    out: PathBuf,
}

impl Run {
    fn load(common: &Common) -> Result<Self, CliError> {
        let (cfg, text) = RunConfig::load(&common.config).map_err(|e| match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Validation(format!("{}: {other}", common.config.display())),
        })?;
        let out = common
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
        Ok(Self { cfg, text, out })
    }

    fn header(&self, command: &str) -> Header {
        Header::new(command, &self.text)
    }

    fn create(&self, name: &str) -> Result<(PathBuf, fs::File), CliError> {
        fs::create_dir_all(&self.out)
            .map_err(|e| CliError::Io(format!("{}: {e}", self.out.display())))?;
        let path = self.out.join(name);
        let f = fs::File::create(&path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok((path, f))
    }

    fn write_bytes(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let (path, mut f) = self.create(name)?;
        f.write_all(bytes)?;
        Ok(path)
    }
}

pub fn execute(cmd: &Command) -> Result<String, CliError> {
    match cmd {
        Command::Coeffs(c) => cmd_coeffs(&Run::load(c)?),
        Command::Response(c) => cmd_response(&Run::load(c)?),
        Command::Simulate(c) => cmd_simulate(&Run::load(c)?),
        Command::Sweep(c) => cmd_sweep(&Run::load(c)?),
        Command::Fit { common, data } => cmd_fit(&Run::load(common)?, data),
        Command::Synth(c) => cmd_synth(&Run::load(c)?),
        Command::Basis => Ok(basis_markdown()),
    }
}

/// Markdown table of the basis: index, degree, polynomial.
pub fn basis_markdown() -> String {
    let mut s = String::from("| j | degree | polynomial |\n|---|---|---|\n");
    for e in build_basis().entries() {
        let _ = writeln!(s, "| {} | {} | `{}` |", e.index, e.degree, e.polynomial);
    }
    s
}

fn axis_block(s: &mut String, c: &AxisCoefficients) {
    let _ = writeln!(
        s,
        "axis {}: f0 = {:.6e} Hz, mu = {:.6e} 1/s, k = {:.6e} m/s^2",
        c.axis,
        rad_to_hz(c.omega0),
        c.mu,
        c.k
    );
    for (name, v) in ForceTerms::NAMES.iter().zip(c.terms().to_array()).skip(1) {
        let _ = writeln!(s, "  {name:<8} {v:+.9e}");
    }
}

fn cmd_coeffs(run: &Run) -> Result<String, CliError> {
    let cfg = &run.cfg;
    let mut s = String::new();
    if let Source::Multipole(mc, trap) = cfg.source()? {
        let closed = closed_form_terms(&mc, &trap);
        let per_axis = taylor_terms(
            &restoring_force(&mc, &trap, PseudoForce::PerAxis)[Axis::Z.index()],
            Axis::Z,
        );
        let _ = writeln!(s, "z equation at the origin");
        let _ = writeln!(s, "  {:<10} {:>17} {:>17}", "term", "closed form", "taylor");
        for ((name, a), b) in ForceTerms::NAMES
            .iter()
            .zip(closed.to_array())
            .zip(per_axis.to_array())
        {
            let _ = writeln!(s, "  {name:<10} {a:+.9e} {b:+.9e}");
        }
        let _ = writeln!(
            s,
            "max relative discrepancy {:.3e}",
            closed.relative_discrepancy(&per_axis)
        );
        let eq =
            find_equilibrium(&mc, &trap, None).map_err(|e| CliError::Numerical(e.to_string()))?;
        let _ = writeln!(
            s,
            "equilibrium [{:.6e}, {:.6e}, {:.6e}] m",
            eq[0], eq[1], eq[2]
        );
    }
    let _ = writeln!(
        s,
        "expansion about the equilibrium ({:?} pseudo-force)",
        cfg.model.pseudo_force
    );
    for axis in Axis::ALL {
        axis_block(&mut s, &cfg.axis_coefficients(axis)?);
    }
    let (path, mut f) = run.create("coeffs.txt")?;
    run.header("coeffs").write(&mut f)?;
    f.write_all(s.as_bytes())?;
    let _ = writeln!(s, "wrote {}", path.display());
    Ok(s)
}

fn summary(inputs: &crate::multiscale::ResponseInputs) -> String {
    let c = &inputs.coeffs;
    let eff = inputs.effective_with(false);
    let mut s = String::new();
    if c.mu > 0.0 {
        let a_m = peak_relations(c.k, c.mu, c.omega0);
        let _ = writeln!(
            s,
            "peak amplitude {a_m:.6e} m at detuning {:.4} Hz",
            rad_to_hz(eff.backbone(a_m))
        );
    }
    let _ = writeln!(s, "alpha_total {:.6e}", eff.alpha_total);
    let folds = fold_points(inputs);
    if !folds.is_empty() {
        let list: Vec<String> = folds
            .iter()
            .map(|f| format!("{:.4}", rad_to_hz(*f)))
            .collect();
        let _ = writeln!(s, "folds at detuning [{}] Hz", list.join(", "));
    }
    s
}

fn cmd_response(run: &Run) -> Result<String, CliError> {
    let cfg = &run.cfg;
    let r = cfg
        .response
        .as_ref()
        .ok_or(ConfigError::Missing("response"))?;
    let inputs = cfg.response_inputs()?;
    let n = ((r.hi_hz - r.lo_hz) / r.step_hz + 1e-9).floor() as usize;
    let points: Vec<ResponsePoint> = (0..=n)
        .flat_map(|i| response_amplitudes(hz_to_rad(r.lo_hz + r.step_hz * i as f64), &inputs))
        .collect();
    let (path, mut f) = run.create("response.csv")?;
    write_response_csv(&mut f, &run.header("response"), &points)?;
    let mut s = summary(&inputs);
    let _ = writeln!(s, "wrote {}", path.display());
    Ok(s)
}

fn cmd_simulate(run: &Run) -> Result<String, CliError> {
    let cfg = &run.cfg;
    let sim = cfg
        .simulate
        .as_ref()
        .ok_or(ConfigError::Missing("simulate"))?;
    let base = cfg.model()?;
    let omega = base.driven().omega0 + hz_to_rad(sim.detuning_hz);
    let model = base.with_drive_omega(omega);
    let state = State {
        pos: sim.initial_m,
        ..State::at_rest()
    };
    let mut traj = integrate(&model, &state, sim.duration_s, &cfg.integration_options())?;
    let t_end = traj.final_state.t;
    let window = (t_end - sim.window_s, t_end);
    let st = steady_amplitude(&traj, window)?;
    traj.samples.retain(|x| x.t >= window.0);
    let (path, mut f) = run.create("trajectory.csv")?;
    write_trajectory_csv(&mut f, &run.header("simulate"), &traj)?;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "steady amplitude x {:.6e} y {:.6e} z {:.6e} m (halves agree: {})",
        st.amplitude[0], st.amplitude[1], st.amplitude[2], st.converged
    );
    let _ = writeln!(s, "wrote {}", path.display());
    Ok(s)
}

fn cmd_sweep(run: &Run) -> Result<String, CliError> {
    let cfg = &run.cfg;
    let base = cfg.model()?;
    let axis = cfg.model.drive_axis;
    let opts = cfg.integration_options();
    let out = &cfg.output;
    let header = run.header("sweep");
    let mut s = String::new();
    let mut failure = None;
    for protocol in cfg.protocols()? {
        let dir = protocol.direction();
        let mut images: Vec<(String, Vec<u8>)> = Vec::new();
        let mut image_err = None;
        let outcome: SweepOutcome =
            sweep_observed(&base, &protocol, None, &opts, &mut |rec, traj| {
                let Some(within) = out.images_within_hz else {
                    return;
                };
                if rec.sigma_hz.abs() > within || image_err.is_some() {
                    return;
                }
                match trajectory_image(traj, out.image_plane, out.image_bins) {
                    Ok(img) => {
                        let mut buf = Vec::new();
                        let ext = match out.image_format {
                            ImageFormat::Pgm => {
                                img.write_pgm(&mut buf, &header.lines()).map(|_| "pgm")
                            }
                            ImageFormat::Csv => header
                                .write(&mut buf)
                                .and_then(|_| img.write_csv(&mut buf))
                                .map(|_| "csv"),
                        };
                        match ext {
                            Ok(ext) => images.push((
                                format!("image_{}_{:.3}hz.{ext}", dir.label(), rec.sigma_hz),
                                buf,
                            )),
                            Err(e) => image_err = Some(CliError::Io(e.to_string())),
                        }
                    }
                    Err(e) => image_err = Some(e.into()),
                }
            })?;
        if let Some(e) = image_err {
            return Err(e);
        }
        let (path, mut f) = run.create(&format!("sweep_{}.csv", dir.label()))?;
        write_sweep_csv(&mut f, &header, &outcome.records)?;
        let _ = writeln!(
            s,
            "{} scan: {} steps, wrote {}",
            dir.label(),
            outcome.records.len(),
            path.display()
        );
        if let Some((lo, hi, ratio)) = jump(&outcome.records, axis, 1.5) {
            let f0 = rad_to_hz(base.driven().omega0);
            let _ = writeln!(
                s,
                "  jump between {:.3} and {:.3} Hz detuning (ratio {ratio:.2})",
                lo - f0,
                hi - f0
            );
        }
        for (name, bytes) in images {
            run.write_bytes(&name, &bytes)?;
        }
        if let Some((freq, e)) = outcome.failure {
            let _ = writeln!(s, "  stopped at {freq:.3} Hz: {e}");
            failure.get_or_insert(CliError::Numerical(format!(
                "sweep failed at {freq:.3} Hz: {e}"
            )));
        }
    }
    match failure {
        Some(e) => {
            eprint!("{s}");
            Err(e)
        }
        None => Ok(s),
    }
}

fn fit_omega0(cfg: &RunConfig) -> Result<f64, CliError> {
    match cfg.fit.f0_hz {
        Some(f) => Ok(hz_to_rad(f)),
        None => Ok(cfg.driven_coefficients()?.omega0),
    }
}

fn cmd_fit(run: &Run, data: &Path) -> Result<String, CliError> {
    let cfg = &run.cfg;
    let file =
        fs::File::open(data).map_err(|e| CliError::Io(format!("{}: {e}", data.display())))?;
    let m = Measurement::read_csv(file).map_err(|e| match e {
        FitError::Io(_) => CliError::Io(format!("{}: {e}", data.display())),
        other => CliError::Validation(format!("{}: {other}", data.display())),
    })?;
    if m.rows.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: no data rows",
            data.display()
        )));
    }
    let omega0 = fit_omega0(cfg)?;
    let r = fit_response(&m, omega0, &cfg.fit_options())?;
    let header = run.header("fit");
    let report = r.report();
    run.write_bytes("fit_report.txt", &with_header(&header, &report)?)?;
    run.write_bytes("fit.kv", &with_header(&header, &r.key_values())?)?;
    let inputs = r.inputs();
    let curve: Vec<(f64, f64, &str, f64)> = m
        .rows
        .iter()
        .map(|row| {
            let sigma = hz_to_rad(row.freq_hz) - omega0;
            let a = tracked_response(sigma, &inputs, row.direction).unwrap_or(0.0);
            (row.freq_hz, rad_to_hz(sigma), row.direction.label(), a)
        })
        .collect();
    let (path, mut f) = run.create("fit_curve.csv")?;
    write_fit_curve_csv(&mut f, &header, &curve)?;
    Ok(format!(
        "{report}wrote {}\n",
        path.parent().unwrap_or(Path::new(".")).display()
    ))
}

fn cmd_synth(run: &Run) -> Result<String, CliError> {
    let cfg = &run.cfg;
    let sy = cfg.synth.as_ref().ok_or(ConfigError::Missing("synth"))?;
    let seed = cfg.seed()?;
    let inputs = cfg.response_inputs()?;
    let f0 = rad_to_hz(inputs.coeffs.omega0);
    let mut m = Measurement::default();
    for (i, d) in sy.direction.directions().into_iter().enumerate() {
        let freqs = crate::estimation::scan_grid(f0, sy.lo_hz, sy.hi_hz, sy.step_hz, d);
        m.rows
            .extend(synthesize(&inputs, &freqs, d, sy.noise, seed.wrapping_add(i as u64)).rows);
    }
    let (path, mut f) = run.create("measurement.csv")?;
    run.header("synth").write(&mut f)?;
    m.write_csv(&mut f)?;
    Ok(format!("{} rows, wrote {}\n", m.rows.len(), path.display()))
}
