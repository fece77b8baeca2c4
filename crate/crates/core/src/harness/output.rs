//! CSV and JSON result files.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{SchemeId, SweepStats};
use crate::{DualPol, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub sweep_value: f64,
    pub scheme: SchemeId,
    pub run: usize,
    pub frame: usize,
    pub bmi_h: f64,
    pub bmi_v: f64,
    pub bmi_mean: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub sweep_value: f64,
    pub scheme: SchemeId,
    pub failed_pct: f64,
    /// Empty when every run failed.
    pub k_bar: Option<f64>,
    pub final_bmi_mean: f64,
}

pub fn write_trajectories<W: Write>(w: W, stats: &SweepStats) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for p in &stats.points {
        for (run, r) in p.runs.iter().enumerate() {
            for (f, lr) in r.stats.trajectory.iter().zip(&r.learning_rates) {
                out.serialize(TrajectoryRow {
                    sweep_value: p.value,
                    scheme: p.scheme,
                    run,
                    frame: f.frame,
                    bmi_h: f.bmi[0],
                    bmi_v: f.bmi[1],
                    bmi_mean: f.bmi_mean,
                    lr: *lr,
                })?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_summary<W: Write>(w: W, stats: &SweepStats) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for p in &stats.points {
        out.serialize(SummaryRow {
            sweep_value: p.value,
            scheme: p.scheme,
            failed_pct: p.aggregate.failed_pct,
            k_bar: p.aggregate.k_bar,
            final_bmi_mean: p.final_bmi_mean(),
        })?;
    }
    out.flush()?;
    Ok(())
}

fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(r: R) -> Result<Vec<T>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for row in rd.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

pub fn read_trajectories<R: Read>(r: R) -> Result<Vec<TrajectoryRow>> {
    read_rows(r)
}

pub fn read_summary<R: Read>(r: R) -> Result<Vec<SummaryRow>> {
    read_rows(r)
}

/// Equalized symbols of one frame, `pol,index,re,im`.
pub fn write_constellation_csv<W: Write>(w: W, z: &DualPol) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["pol", "index", "re", "im"])?;
    for (p, name) in ["h", "v"].iter().enumerate() {
        for (i, s) in z[p].iter().enumerate() {
            out.write_record([name.to_string(), i.to_string(), s.re.to_string(), s.im.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Resolved configuration of every sweep point plus the conventions
/// needed to read the CSV files.
pub fn write_meta<W: Write>(w: W, stats: &SweepStats) -> Result<()> {
    let points: Vec<_> = stats
        .points
        .iter()
        .map(|p| {
            json!({
                "sweep_value": p.value,
                "scheme": p.scheme,
                "runs": p.runs.len(),
                "seeds": p.runs.iter().map(|r| r.seed).collect::<Vec<_>>(),
                "config": p.config,
            })
        })
        .collect();
    let meta = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "sweep_param": stats.param.map(|p| p.name()),
        "sweep_unit": stats.param.map(|p| p.unit()),
        "conventions": {
            "frame": "1-based frame index; frame k uses learning rate lr",
            "k_bar": "mean first frame with bmi_mean >= bmi_thr over non-failed runs; empty if all failed",
            "failed": "final-frame bmi_mean below bmi_thr",
            "units": "channel in SI units (s, m, s^2/m); snr_db null means noiseless",
            "seeds": "run r uses base_seed + r",
        },
        "points": points,
    });
    serde_json::to_writer_pretty(w, &meta)?;
    Ok(())
}
