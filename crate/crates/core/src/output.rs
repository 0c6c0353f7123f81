//! File emission. Every file starts with `#` comment lines carrying the
//! crate version and the SHA-256 of the configuration text.

use std::io::{self, Write};

use sha2::{Digest, Sha256};

use crate::config::rad_to_hz;
use crate::dynamics::{SweepRecord, Trajectory};
use crate::multiscale::ResponsePoint;
use crate::poly::Axis;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Hex SHA-256 of the configuration text.
pub fn config_digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Header {
    pub command: String,
    pub digest: String,
}

impl Header {
    pub fn new(command: &str, config_text: &str) -> Self {
        Self {
            command: command.to_string(),
            digest: config_digest(config_text),
        }
    }

    /// Header lines without the comment marker.
    pub fn lines(&self) -> Vec<String> {
        vec![
            format!("iontrap-duffing {VERSION} {}", self.command),
            format!("config-sha256 {}", self.digest),
        ]
    }

    pub fn write<W: Write>(&self, w: &mut W) -> io::Result<()> {
        for l in self.lines() {
            writeln!(w, "# {l}")?;
        }
        Ok(())
    }
}

/// `freq_hz,sigma_hz,a_z_m,a_x_m,a_y_m,converged`.
pub fn write_sweep_csv<W: Write>(
    w: &mut W,
    header: &Header,
    records: &[SweepRecord],
) -> io::Result<()> {
    header.write(w)?;
    writeln!(w, "freq_hz,sigma_hz,a_z_m,a_x_m,a_y_m,converged")?;
    for r in records {
        writeln!(
            w,
            "{:.6},{:.6},{:.9e},{:.9e},{:.9e},{}",
            r.freq_hz,
            r.sigma_hz,
            r.a(Axis::Z),
            r.a(Axis::X),
            r.a(Axis::Y),
            r.converged
        )?;
    }
    Ok(())
}

/// `sigma_hz,a_m,branch,stable`; `sigma` in the points is rad/s.
pub fn write_response_csv<W: Write>(
    w: &mut W,
    header: &Header,
    points: &[ResponsePoint],
) -> io::Result<()> {
    header.write(w)?;
    writeln!(w, "sigma_hz,a_m,branch,stable")?;
    for p in points {
        writeln!(
            w,
            "{:.6},{:.9e},{},{}",
            rad_to_hz(p.sigma),
            p.a,
            p.branch,
            p.stable
        )?;
    }
    Ok(())
}

/// `t_s,x_m,y_m,z_m,vx_m_s,vy_m_s,vz_m_s`.
pub fn write_trajectory_csv<W: Write>(
    w: &mut W,
    header: &Header,
    traj: &Trajectory,
) -> io::Result<()> {
    header.write(w)?;
    writeln!(w, "t_s,x_m,y_m,z_m,vx_m_s,vy_m_s,vz_m_s")?;
    for s in &traj.samples {
        writeln!(
            w,
            "{:.12e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
            s.t, s.pos[0], s.pos[1], s.pos[2], s.vel[0], s.vel[1], s.vel[2]
        )?;
    }
    Ok(())
}

/// Fitted curve along each scan: `freq_hz,sigma_hz,direction,a_fit_m`.
pub fn write_fit_curve_csv<W: Write>(
    w: &mut W,
    header: &Header,
    rows: &[(f64, f64, &str, f64)],
) -> io::Result<()> {
    header.write(w)?;
    writeln!(w, "freq_hz,sigma_hz,direction,a_fit_m")?;
    for (f, s, d, a) in rows {
        writeln!(w, "{f:.6},{s:.6},{d},{a:.9e}")?;
    }
    Ok(())
}

/// Header followed by `body`.
pub fn with_header(header: &Header, body: &str) -> io::Result<Vec<u8>> {
    let mut out = Vec::new();
    header.write(&mut out)?;
    out.extend_from_slice(body.as_bytes());
    Ok(out)
}
