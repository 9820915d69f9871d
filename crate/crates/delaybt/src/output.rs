//! CSV tables, run manifests and the plot script emitted by studies and
//! simulations.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use delaybt_core::bench::{ExampleConfig, StudyReport};
use delaybt_core::{DMatrix, TrajectoryEnsemble};
use serde::Serialize;

use crate::error::FileError;

pub const STUDY_CSV: &str = "study.csv";
pub const RUN_MANIFEST: &str = "run_manifest.toml";
pub const PLOT_SCRIPT: &str = "plot.py";

pub const STUDY_COLUMNS: [&str; 12] = [
    "example",
    "d",
    "r",
    "dt",
    "T",
    "n_paths",
    "seed",
    "trace_norm",
    "bound",
    "measured_error",
    "measured_std_error",
    "certified",
];

fn num(v: f64) -> String {
    format!("{:e}", v)
}

pub fn write_study_csv<W: Write>(report: &StudyReport, out: W) -> Result<(), FileError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STUDY_COLUMNS)?;
    let cfg = &report.manifest.config;
    for row in &report.rows {
        w.write_record([
            report.example.clone(),
            report.manifest.dim_state.to_string(),
            row.r.to_string(),
            num(report.grid.dt),
            num(report.grid.horizon()),
            cfg.n_paths.to_string(),
            cfg.seed.to_string(),
            num(row.trace_norm),
            num(row.bound),
            num(row.measured_error),
            num(row.measured_std_error),
            row.certified.to_string(),
        ])?;
    }
    w.flush().map_err(FileError::io("<csv>"))?;
    Ok(())
}

/// Columns `t, path, x_1..x_d` (when states were recorded) and `y_1..y_m`.
pub fn write_trajectory_csv<W: Write>(ens: &TrajectoryEnsemble, out: W) -> Result<(), FileError> {
    let mut w = csv::Writer::from_writer(out);
    let d = ens.states.as_ref().and_then(|s| s.first()).map_or(0, |s| s.ncols());
    let m = ens.outputs.first().map_or(0, |y| y.ncols());
    let mut header = vec!["t".to_string(), "path".to_string()];
    header.extend((1..=d).map(|i| format!("x_{}", i)));
    header.extend((1..=m).map(|i| format!("y_{}", i)));
    w.write_record(&header)?;
    for (p, y) in ens.outputs.iter().enumerate() {
        let x = ens.states.as_ref().map(|s| &s[p]);
        for j in 0..y.nrows() {
            let mut rec = vec![num(ens.grid.time(j)), p.to_string()];
            if let Some(x) = x {
                rec.extend(x.row(j).iter().map(|v| num(*v)));
            }
            rec.extend(y.row(j).iter().map(|v| num(*v)));
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(FileError::io("<csv>"))?;
    Ok(())
}

fn write_overlay_csv<W: Write>(dt: f64, full: &DMatrix<f64>, reduced: &DMatrix<f64>, out: W) -> Result<(), FileError> {
    let mut w = csv::Writer::from_writer(out);
    let m = full.ncols();
    let mut header = vec!["t".to_string()];
    header.extend((1..=m).map(|i| format!("full_y_{}", i)));
    header.extend((1..=m).map(|i| format!("reduced_y_{}", i)));
    w.write_record(&header)?;
    for j in 0..full.nrows() {
        let mut rec = vec![num(j as f64 * dt)];
        rec.extend(full.row(j).iter().map(|v| num(*v)));
        rec.extend(reduced.row(j).iter().map(|v| num(*v)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(FileError::io("<csv>"))?;
    Ok(())
}

pub fn overlay_file_name(r: usize) -> String {
    format!("overlay_r{}.csv", r)
}

#[derive(Debug, Serialize)]
struct ManifestRow {
    r: usize,
    hsv_tail_sum: f64,
    trace_norm: f64,
    bound: f64,
    measured_error: f64,
    measured_std_error: f64,
    relative_error: f64,
    certified: bool,
    near_degenerate_gap: bool,
    unmet_assumptions: Vec<String>,
}

#[derive(Debug, Serialize)]
struct MsRecord {
    delta1: f64,
    delta2: f64,
    delta3: f64,
    tau_max: f64,
    g_norm: f64,
    lyap_ok: bool,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct Envelope {
    m: f64,
    omega: f64,
    sampled: bool,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    example: &'a str,
    kind: &'a str,
    dim_state: usize,
    gramian_variant: &'a str,
    dt: f64,
    steps: usize,
    gramian_iterations: [usize; 2],
    volterra_q: Option<f64>,
    hsv: &'a [f64],
    initial_coordinates: &'a [f64],
    warnings: &'a [String],
    envelope: Option<Envelope>,
    sdde_ms: Option<MsRecord>,
    config: &'a ExampleConfig,
    rows: Vec<ManifestRow>,
}

pub fn run_manifest_toml(report: &StudyReport) -> Result<String, FileError> {
    let man = &report.manifest;
    let doc = RunManifest {
        example: &report.example,
        kind: man.kind.as_str(),
        dim_state: man.dim_state,
        gramian_variant: man.variant.as_str(),
        dt: report.grid.dt,
        steps: report.grid.steps,
        gramian_iterations: [man.gramian_iterations.0, man.gramian_iterations.1],
        volterra_q: man.volterra_q,
        hsv: &man.hsv,
        initial_coordinates: &man.initial_coordinates,
        warnings: &man.warnings,
        envelope: man.envelope.map(|e| Envelope {
            m: e.m,
            omega: e.omega,
            sampled: e.sampled,
        }),
        sdde_ms: man.sdde_ms.map(|s| MsRecord {
            delta1: s.delta1,
            delta2: s.delta2,
            delta3: s.delta3,
            tau_max: s.tau_max,
            g_norm: s.g_norm,
            lyap_ok: s.lyap_ok,
            pass: s.pass,
        }),
        config: &man.config,
        rows: report
            .rows
            .iter()
            .map(|row| ManifestRow {
                r: row.r,
                hsv_tail_sum: row.hsv_tail_sum,
                trace_norm: row.trace_norm,
                bound: row.bound,
                measured_error: row.measured_error,
                measured_std_error: row.measured_std_error,
                relative_error: row.relative_error,
                certified: row.certified,
                near_degenerate_gap: row.near_degenerate_gap,
                unmet_assumptions: row
                    .assumptions
                    .iter()
                    .filter(|a| !a.satisfied)
                    .map(|a| a.name.to_string())
                    .collect(),
            })
            .collect(),
    };
    toml::to_string(&doc).map_err(|e| FileError::Manifest {
        path: PathBuf::from(RUN_MANIFEST),
        msg: e.to_string(),
    })
}

pub const PLOT_PY: &str = r#"#!/usr/bin/env python3
"""Plots a reduction study: errors against bounds, and output overlays."""
import csv
import glob
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
out = sys.argv[1] if len(sys.argv) > 1 else here


def read(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


rows = read(os.path.join(here, "study.csv"))
r = [int(row["r"]) for row in rows]
err = [float(row["measured_error"]) for row in rows]
bound = [float(row["bound"]) for row in rows]
fig, ax = plt.subplots()
ax.semilogy(r, err, "o-", label="measured L2 error")
if any(b != float("inf") for b in bound):
    ax.semilogy(r, bound, "s--", label="bound")
ax.set_xlabel("reduced order r")
ax.set_ylabel("output error")
ax.set_title(rows[0]["example"] if rows else "")
ax.legend()
fig.savefig(os.path.join(out, "errors.png"), dpi=150)

for path in sorted(glob.glob(os.path.join(here, "overlay_r*.csv"))):
    data = read(path)
    t = [float(d["t"]) for d in data]
    fig, ax = plt.subplots()
    for key in [k for k in data[0] if k.startswith("full_y_")][:3]:
        idx = key[len("full_y_"):]
        line, = ax.plot(t, [float(d[key]) for d in data], label="full y_" + idx)
        ax.plot(t, [float(d["reduced_y_" + idx]) for d in data], "--", color=line.get_color(), label="reduced y_" + idx)
    ax.set_xlabel("t")
    ax.legend()
    name = os.path.splitext(os.path.basename(path))[0]
    ax.set_title(name)
    fig.savefig(os.path.join(out, name + ".png"), dpi=150)
"#;

/// Writes `study.csv`, `run_manifest.toml`, one overlay CSV per kept order and
/// `plot.py` into `dir`.
pub fn write_study_outputs(report: &StudyReport, dir: &Path) -> Result<Vec<PathBuf>, FileError> {
    fs::create_dir_all(dir).map_err(FileError::io(dir))?;
    let mut written = Vec::new();
    let create = |name: &str| -> Result<(fs::File, PathBuf), FileError> {
        let p = dir.join(name);
        let f = fs::File::create(&p).map_err(FileError::io(&p))?;
        Ok((f, p))
    };
    let (f, p) = create(STUDY_CSV)?;
    write_study_csv(report, f)?;
    written.push(p);
    for o in &report.overlays {
        let (f, p) = create(&overlay_file_name(o.r))?;
        write_overlay_csv(report.grid.dt, &o.full, &o.reduced, f)?;
        written.push(p);
    }
    let p = dir.join(RUN_MANIFEST);
    fs::write(&p, run_manifest_toml(report)?).map_err(FileError::io(&p))?;
    written.push(p);
    let p = dir.join(PLOT_SCRIPT);
    fs::write(&p, PLOT_PY).map_err(FileError::io(&p))?;
    written.push(p);
    Ok(written)
}
