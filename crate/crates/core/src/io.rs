//! Trajectory CSV and raw state snapshots.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::linalg::{self, C64};
use crate::projectors::Projector;

pub const TRAJECTORY_HEADER: &str = "t,constraint_error_sq,norm";

pub fn write_trajectory_csv(traj: &Trajectory, measure: &Projector, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER.split(','))?;
    for (t, v) in traj.times.iter().zip(&traj.states) {
        let e = measure.quadratic_form(v)?.max(0.0);
        w.write_record([
            format!("{t:e}"),
            format!("{e:e}"),
            format!("{:e}", linalg::norm(v)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Interleaved little-endian `f64` real/imaginary pairs.
pub fn write_snapshot(v: &[C64], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for z in v {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<Vec<C64>> {
    let mut buf = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut buf)?;
    if buf.len() % 16 != 0 {
        return Err(Error::InvalidArgument(format!(
            "snapshot length {} is not a multiple of 16",
            buf.len()
        )));
    }
    Ok(buf
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            C64::new(re, im)
        })
        .collect())
}
