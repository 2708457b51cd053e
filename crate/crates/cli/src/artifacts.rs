//! Plot-ready CSV and JSON artifacts.
//!
//! Every CSV starts with one `#` line naming and explaining its columns,
//! followed by a plain header row. Floats are written in Rust's shortest
//! round-trip form, so identical numbers give identical bytes.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use wavemap_core::diagnostics::identity_residual_series;
use wavemap_core::{BoundReport, EnergyTrace};

pub const TRACE_COLUMNS: &str = "t,L,H,K,Kprime,D,E,grad,r";
pub const TRACE_DOC: &str = "# t: rescaled time; L: int |u_tt|^2 + eps^2 |grad u|^2; H: int_t^T e^-s L ds; \
K: 1/2 int |u_t|^2; Kprime: int <u_t,u_tt>; D: int |u_tt|^2; E: K - Kprime + 1/2 e^t H; \
grad: int |grad u|^2 (no eps^2); r: E' + 2D (empty at the ends)";

pub const BOUND_COLUMNS: &str = "name,lhs,rhs,ratio,tol,pass";
pub const BOUND_DOC: &str = "# name: inequality; lhs, rhs: its two sides (rhs uses constants frozen at the \
reference eps); ratio: lhs/rhs; tol: allowed excess; pass: ratio <= 1 + tol";

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    fs::write(path, text + "\n")
}

pub fn trace_csv(trace: &EnergyTrace) -> String {
    let r = identity_residual_series(trace);
    let mut out = format!("{TRACE_DOC}\n{TRACE_COLUMNS}\n");
    for j in 0..trace.len() {
        let res = if j == 0 || j + 1 == trace.len() {
            String::new()
        } else {
            r[j - 1].to_string()
        };
        out += &format!(
            "{},{},{},{},{},{},{},{},{}\n",
            trace.t[j], trace.l[j], trace.h[j], trace.k[j], trace.kprime[j], trace.d[j], trace.e[j], trace.grad[j], res
        );
    }
    out
}

pub fn bounds_csv(bounds: &[BoundReport]) -> String {
    let mut out = format!("{BOUND_DOC}\n{BOUND_COLUMNS}\n");
    for b in bounds {
        out += &format!("{},{},{},{},{},{}\n", b.name, b.lhs, b.rhs, b.ratio, b.tol, b.pass);
    }
    out
}

/// Generic table with a `#` documentation line.
pub fn table_csv(doc: &str, columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = format!("# {doc}\n{}\n", columns.join(","));
    for r in rows {
        out += &r.join(",");
        out.push('\n');
    }
    out
}

/// Formats an optional number; missing values become empty cells.
pub fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
