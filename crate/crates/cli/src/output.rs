use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use doblab::metrics::MetricsReport;
use doblab::observer::{ErrorDynamics, ObserverGains};
use doblab::sim::{Trace, TraceRow};

use crate::error::{CliError, CliResult};

pub const TRACE_HEADER: [&str; 11] = [
    "k",
    "t",
    "ref_pos",
    "theta",
    "omega",
    "u_pd",
    "u",
    "tau_d_true",
    "tau_dn_true",
    "tau_hat",
    "est_err",
];

/// Per-variant columns appended in compare mode, suffixed with `_<label>`.
pub const COMPARE_COLUMNS: [&str; 4] = ["theta", "tau_dn_true", "tau_hat", "est_err"];

/// 17 significant digits: enough to reload every f64 bit-exactly.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn base_fields(r: &TraceRow) -> Vec<String> {
    let mut f = vec![r.k.to_string()];
    f.extend(
        [
            r.t,
            r.ref_pos,
            r.theta,
            r.omega,
            r.u_pd,
            r.u,
            r.tau_d_true,
            r.tau_dn_true,
            r.tau_hat,
            r.est_err,
        ]
        .into_iter()
        .map(num),
    );
    f
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| write_error(path, e))
}

fn write_error(path: &Path, e: csv::Error) -> CliError {
    let source = match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::other(format!("{other:?}")),
    };
    CliError::Write {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_trace_csv(path: &Path, trace: &Trace) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    let wrap = |e| write_error(path, e);
    w.write_record(TRACE_HEADER).map_err(wrap)?;
    for r in &trace.rows {
        w.write_record(base_fields(r)).map_err(wrap)?;
    }
    w.flush().map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Base columns come from the first run; every run contributes its suffixed columns.
pub fn write_compare_csv(path: &Path, runs: &[(String, Trace)]) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    let wrap = |e| write_error(path, e);
    let mut header: Vec<String> = TRACE_HEADER.iter().map(|s| s.to_string()).collect();
    for (label, _) in runs {
        header.extend(COMPARE_COLUMNS.iter().map(|c| format!("{c}_{label}")));
    }
    w.write_record(&header).map_err(wrap)?;
    let base = &runs[0].1;
    for (i, r) in base.rows.iter().enumerate() {
        let mut fields = base_fields(r);
        for (_, tr) in runs {
            let o = &tr.rows[i];
            fields.extend([o.theta, o.tau_dn_true, o.tau_hat, o.est_err].into_iter().map(num));
        }
        w.write_record(&fields).map_err(wrap)?;
    }
    w.flush().map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn vec_text(v: &doblab::numkit::Vec2) -> String {
    format!("[{}, {}]", num(v.0[0]), num(v.0[1]))
}

pub fn gains_text(gains: &ObserverGains) -> String {
    match gains {
        ObserverGains::Conventional { gain } => format!("L = {}", vec_text(gain)),
        ObserverGains::Hp { gain1, gain2 } => format!("L1 = {}\nL2 = {}", vec_text(gain1), vec_text(gain2)),
    }
}

/// `key: value` lines describing one run.
pub fn metrics_text(label: &str, trace: &Trace, m: &MetricsReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "observer: {label}");
    let _ = writeln!(s, "rows: {}", trace.len());
    let _ = writeln!(s, "Ts: {}", num(trace.ts));
    if let Some(g) = &trace.gains {
        for line in gains_text(g).lines() {
            let _ = writeln!(s, "{}", line.replacen(" = ", ": ", 1));
        }
    }
    if let Some(ed) = &trace.error_dynamics {
        let _ = writeln!(s, "spectral_radius: {}", num(ed.spectral_radius));
    }
    let _ = writeln!(s, "rms_est_err: {}", num(m.rms_est_err));
    let _ = writeln!(s, "max_est_err: {}", num(m.max_est_err));
    let _ = writeln!(s, "rms_track_err: {}", num(m.rms_track_err));
    let _ = writeln!(s, "max_track_err: {}", num(m.max_track_err));
    let settle = m.settle_step.map_or_else(|| "none".to_string(), |k| k.to_string());
    let _ = writeln!(s, "settle_step: {settle}");
    let _ = writeln!(s, "ss_est_err: {}", num(m.ss_est_err));
    s
}

pub struct SummaryEntry<'a> {
    pub label: &'a str,
    pub metrics: MetricsReport,
    pub dynamics: Option<&'a ErrorDynamics>,
}

/// Ranks by `rms_est_err` (stable, so ties keep input order) and renders a table.
///
/// `margin` is how far the next entry's error exceeds this one's, relative to the next.
pub fn summary_table(entries: &[SummaryEntry]) -> String {
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by(|&a, &b| {
        entries[a]
            .metrics
            .rms_est_err
            .total_cmp(&entries[b].metrics.rms_est_err)
    });
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<4} {:<24} {:>12} {:>12} {:>12} {:>12} {:>8} {:>12} {:>9} {:>8}",
        "rank",
        "label",
        "rms_est_err",
        "max_est_err",
        "rms_track",
        "max_track",
        "settle",
        "ss_est_err",
        "radius",
        "margin"
    );
    for (rank, &i) in order.iter().enumerate() {
        let e = &entries[i];
        let m = &e.metrics;
        let margin = order.get(rank + 1).map_or_else(
            || "-".to_string(),
            |&j| {
                let next = entries[j].metrics.rms_est_err;
                if next > 0.0 {
                    format!("{:.1}%", 100.0 * (next - m.rms_est_err) / next)
                } else {
                    "0.0%".to_string()
                }
            },
        );
        let radius = e
            .dynamics
            .map_or_else(|| "-".to_string(), |d| format!("{:.3}", d.spectral_radius));
        let settle = m.settle_step.map_or_else(|| "none".to_string(), |k| k.to_string());
        let _ = writeln!(
            s,
            "{:<4} {:<24} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>8} {:>12.4e} {:>9} {:>8}",
            rank + 1,
            e.label,
            m.rms_est_err,
            m.max_est_err,
            m.rms_track_err,
            m.max_track_err,
            settle,
            m.ss_est_err,
            radius,
            margin
        );
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let mut f = fs::File::create(path).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })?;
    f.write_all(text.as_bytes()).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}
