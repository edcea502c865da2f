//! Trajectory CSV, plot data and JSON writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrate::Trajectory;

use super::config::PlotPair;

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

const AXES: [&str; 3] = ["x", "y", "z"];

pub fn csv_header(dim: usize) -> Vec<String> {
    let mut h = vec!["t".to_string(), "s_clock".to_string()];
    h.extend(AXES[..dim].iter().map(|a| a.to_string()));
    h.extend(AXES[..dim].iter().map(|a| format!("v{a}")));
    h.extend(["r", "energy", "angular_momentum", "gamma", "region"].map(String::from));
    h
}

/// Indices of the kept samples: every `every`-th plus the last.
fn kept(len: usize, every: usize) -> impl Iterator<Item = usize> {
    (0..len).filter(move |i| i % every == 0 || *i + 1 == len)
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory, every: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    let field = &traj.field;
    let dim = field.space_dim();
    w.write_record(csv_header(dim))
        .map_err(|e| io_err(path, e))?;
    for i in kept(traj.len(), every) {
        let s = &traj.samples[i];
        let d = &traj.diagnostics[i];
        let x = field.position(&s.y);
        let v = field.velocity(&s.y);
        let mut row = vec![
            fmt_f64(s.t),
            field.clock_value(&s.y).map(fmt_f64).unwrap_or_default(),
        ];
        row.extend(x.as_slice().iter().map(|c| fmt_f64(*c)));
        row.extend(v.as_slice().iter().map(|c| fmt_f64(*c)));
        row.push(fmt_f64(x.norm()));
        row.push(fmt_f64(d.energy));
        row.push(fmt_f64(d.angular_momentum.magnitude()));
        row.push(d.gamma.map(fmt_f64).unwrap_or_default());
        row.push(d.region.map(|r| r.as_str().to_string()).unwrap_or_default());
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_plot(dir: &Path, traj: &Trajectory, pair: PlotPair, every: usize) -> Result<()> {
    let path = dir.join(pair.file_name());
    let file = File::create(&path).map_err(|e| io_err(&path, e))?;
    let mut w = BufWriter::new(file);
    let field = &traj.field;
    let e0 = traj.diagnostics.first().map_or(0.0, |d| d.energy);
    let scale = e0.abs().max(f64::MIN_POSITIVE);
    for i in kept(traj.len(), every) {
        let s = &traj.samples[i];
        let (a, b) = match pair {
            PlotPair::ThetaR => (traj.angles[i], field.position(&s.y).norm()),
            PlotPair::TEnergyDrift => (s.t, (traj.diagnostics[i].energy - e0) / scale),
            PlotPair::XY => {
                let x = field.position(&s.y);
                (x.as_slice()[0], x.as_slice()[1])
            }
        };
        writeln!(w, "{} {}", fmt_f64(a), fmt_f64(b)).map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value) + "\n").map_err(|e| io_err(path, e))
}
