//! CSV output. Floats are written with 17 significant digits so that
//! reading them back gives the same `f64`.

use std::fmt::Write as _;

use sdstab::certify::{Certificate, GridEntry, GridOutcome};
use sdstab::simloop::{Sample, Trajectory};
use sdstab::synth::MDerivatives;

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn header_x(dim: usize) -> String {
    (1..=dim).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",")
}

fn row_x(x: &[f64]) -> String {
    x.iter().map(|v| num(*v)).collect::<Vec<_>>().join(",")
}

/// Columns `t, x1..xn, V, segment_index, is_checkpoint`.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = format!("t,{},V,segment_index,is_checkpoint\n", header_x(traj.dim));
    for s in &traj.samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            num(s.t),
            row_x(&s.x),
            num(s.v),
            s.segment,
            u8::from(s.checkpoint)
        );
    }
    out
}

/// Inverse of [`trajectory_csv`].
pub fn parse_trajectory_csv(text: &str) -> Result<Vec<Sample>, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 5 || cols[0] != "t" || cols[cols.len() - 1] != "is_checkpoint" {
        return Err(format!("unexpected header '{header}'"));
    }
    let dim = cols.len() - 4;
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols.len() {
            return Err(format!("row {} has {} fields", i + 2, f.len()));
        }
        let float = |s: &str| s.parse::<f64>().map_err(|e| format!("row {}: {e}", i + 2));
        out.push(Sample {
            t: float(f[0])?,
            x: f[1..=dim].iter().map(|s| float(s)).collect::<Result<_, _>>()?,
            v: float(f[dim + 1])?,
            segment: f[dim + 2].parse().map_err(|e| format!("row {}: {e}", i + 2))?,
            checkpoint: f[dim + 3] == "1",
        });
    }
    Ok(out)
}

/// Long format: one row per witness, columns
/// `x1..xn, case, N, gV, fV, witness_name, witness_value`.
pub fn certificate_rows(out: &mut String, x: &[f64], cert: &Certificate) {
    let base = format!("{},{},{},{},{}", row_x(x), cert.case, cert.n, num(cert.gv()), opt(cert.witness("fV")));
    if cert.witnesses.is_empty() {
        let _ = writeln!(out, "{base},,");
    }
    for w in &cert.witnesses {
        let _ = writeln!(out, "{base},{},{}", text_field(&w.name), num(w.value));
    }
}

/// Quotes a text field when it holds a comma or a quote (bracket names
/// such as `[f,g]V` do).
pub fn text_field(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn certificate_header(dim: usize) -> String {
    format!("{},case,N,gV,fV,witness_name,witness_value\n", header_x(dim))
}

pub fn certificate_csv(x: &[f64], cert: &Certificate) -> String {
    let mut out = certificate_header(x.len());
    certificate_rows(&mut out, x, cert);
    out
}

/// Grid results in the certificate format; skipped and failed points get
/// a single row with the case `SkippedOrigin` or `Error`.
pub fn grid_csv(dim: usize, entries: &[GridEntry]) -> String {
    let mut out = certificate_header(dim);
    for e in entries {
        let x = e.point.coords();
        match &e.outcome {
            GridOutcome::Certified(c) => certificate_rows(&mut out, x, c),
            GridOutcome::SkippedOrigin => {
                let _ = writeln!(out, "{},SkippedOrigin,0,,,,", row_x(x));
            }
            GridOutcome::Failed(_) => {
                let _ = writeln!(out, "{},Error,0,,,,", row_x(x));
            }
        }
    }
    out
}

pub fn m_derivatives_csv(d: &MDerivatives) -> String {
    let mut out = String::from("order,value,noise,truncation,ill_conditioned\n");
    for i in 0..d.values.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            i + 1,
            num(d.values[i]),
            num(d.noise[i]),
            num(d.truncation[i]),
            u8::from(d.ill_conditioned[i])
        );
    }
    out
}

pub fn cbh_csv(k: usize, rows: &[(f64, f64)]) -> String {
    let mut out = String::from("k,t,residual\n");
    for (t, r) in rows {
        let _ = writeln!(out, "{k},{},{}", num(*t), num(*r));
    }
    out
}

/// A matplotlib script that plots a trajectory CSV written next to it.
pub fn plot_script(csv_name: &str, dim: usize) -> String {
    let xs = (1..=dim).map(|i| format!("\"x{i}\"")).collect::<Vec<_>>().join(", ");
    format!(
        r#"#!/usr/bin/env python3
# Plots {csv_name}: states and V over time, checkpoints marked.
import csv
import os
import sys

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
rows = list(csv.DictReader(open(os.path.join(here, "{csv_name}"))))
t = [float(r["t"]) for r in rows]
fig, (ax_x, ax_v) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
for name in [{xs}]:
    ax_x.plot(t, [float(r[name]) for r in rows], label=name)
ax_x.set_ylabel("state")
ax_x.legend()
v = [float(r["V"]) for r in rows]
ax_v.semilogy(t, [max(x, 1e-300) for x in v], label="V")
cp = [(ti, vi) for ti, vi, r in zip(t, v, rows) if r["is_checkpoint"] == "1"]
if cp:
    ax_v.semilogy([c[0] for c in cp], [max(c[1], 1e-300) for c in cp], "o", ms=2, label="checkpoints")
ax_v.set_xlabel("t")
ax_v.set_ylabel("V")
ax_v.legend()
fig.tight_layout()
out = os.path.join(here, "trajectory.png")
fig.savefig(out, dpi=150)
print(out)
if "--show" in sys.argv:
    plt.show()
"#
    )
}
