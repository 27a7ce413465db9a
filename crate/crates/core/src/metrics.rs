//! Trace evaluation and error-bound helpers.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::numkit::{Mat2, Vec2};
use crate::observer::ErrorDynamics;
use crate::sim::Trace;

pub const DEFAULT_WINDOW: f64 = 0.2;
pub const DEFAULT_BAND_FRACTION: f64 = 0.02;

/// Cap on the number of series terms summed by [`uub_bound`].
const MAX_SERIES_TERMS: usize = 10_000_000;
const SERIES_TOL: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub rms_est_err: f64,
    pub max_est_err: f64,
    pub rms_track_err: f64,
    pub max_track_err: f64,
    /// First step after which `|est_err|` stays inside the settling band.
    pub settle_step: Option<usize>,
    /// Mean (signed) estimation error over the final window.
    pub ss_est_err: f64,
}

/// Settling band for `settle_step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SettleBand {
    /// Fraction of the peak `|est_err|`.
    FractionOfPeak(f64),
    Absolute(f64),
}

impl Default for SettleBand {
    fn default() -> Self {
        SettleBand::FractionOfPeak(DEFAULT_BAND_FRACTION)
    }
}

pub fn first_difference(seq: &[f64]) -> Result<Vec<f64>> {
    if seq.len() < 2 {
        return Err(invalid("first difference needs at least 2 samples"));
    }
    Ok(seq.windows(2).map(|w| w[1] - w[0]).collect())
}

pub fn second_difference(seq: &[f64]) -> Result<Vec<f64>> {
    if seq.len() < 3 {
        return Err(invalid("second difference needs at least 3 samples"));
    }
    Ok(seq.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect())
}

fn rms(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut sum_sq, mut max, mut n) = (0.0, 0.0f64, 0usize);
    for v in values {
        sum_sq += v * v;
        max = max.max(v.abs());
        n += 1;
    }
    ((sum_sq / n as f64).sqrt(), max)
}

/// Index from which every `|errors[i]|` is within `band`; `None` if the last sample is outside.
pub fn settle_step(errors: &[f64], band: f64) -> Option<usize> {
    match errors.iter().rposition(|e| e.abs() > band) {
        None => Some(0),
        Some(i) if i + 1 < errors.len() => Some(i + 1),
        Some(_) => None,
    }
}

pub fn evaluate(trace: &Trace, window: f64) -> Result<MetricsReport> {
    evaluate_with_band(trace, window, SettleBand::default())
}

pub fn evaluate_with_band(trace: &Trace, window: f64, band: SettleBand) -> Result<MetricsReport> {
    if trace.is_empty() {
        return Err(invalid("cannot evaluate an empty trace"));
    }
    if !(window > 0.0 && window <= 0.5) {
        return Err(invalid(format!("window fraction must be in (0, 0.5], got {window}")));
    }
    let est = trace.column(|r| r.est_err);
    let (rms_est_err, max_est_err) = rms(est.iter().copied());
    let (rms_track_err, max_track_err) = rms(trace.rows.iter().map(|r| r.ref_pos - r.theta));

    let band = match band {
        SettleBand::FractionOfPeak(f) => f * max_est_err,
        SettleBand::Absolute(v) => v,
    };
    let tail = ((window * est.len() as f64).ceil() as usize).clamp(1, est.len());
    let ss_est_err = est[est.len() - tail..].iter().sum::<f64>() / tail as f64;

    Ok(MetricsReport {
        rms_est_err,
        max_est_err,
        rms_track_err,
        max_track_err,
        settle_step: settle_step(&est, band),
        ss_est_err,
    })
}

fn require_stable(ed: &ErrorDynamics) -> Result<()> {
    if ed.is_stable() {
        Ok(())
    } else {
        Err(Error::Unstable {
            radius: ed.spectral_radius,
        })
    }
}

/// `(sup_k ‖Mᵏ‖∞, Σ_k ‖Mᵏ‖∞)`, summed until the term drops below tolerance.
fn power_norm_series(m: &Mat2) -> (f64, f64) {
    let mut power = Mat2::IDENTITY;
    let mut sup = 0.0f64;
    let mut sum = 0.0;
    for _ in 0..MAX_SERIES_TERMS {
        let term = power.norm_inf();
        sup = sup.max(term);
        sum += term;
        if term < SERIES_TOL {
            break;
        }
        power = power * *m;
    }
    (sup, sum)
}

/// Uniform bound on `‖e_k‖∞` over all steps:
/// `sup_k ‖Mᵏ‖∞ ‖e₀‖∞ + forcing_sup · Σ_i ‖Mⁱ‖∞`.
pub fn uub_bound(ed: &ErrorDynamics, forcing_sup: f64, e0: Vec2) -> Result<f64> {
    require_stable(ed)?;
    let (sup, sum) = power_norm_series(&ed.matrix);
    Ok(sup * e0.norm_inf() + forcing_sup.abs() * sum)
}

/// Step-wise envelope `‖Mᵏ‖∞ ‖e₀‖∞ + forcing_sup · Σ_{i<k} ‖Mⁱ‖∞` for `k = 0..steps`.
pub fn uub_envelope(ed: &ErrorDynamics, forcing_sup: f64, e0: Vec2, steps: usize) -> Result<Vec<f64>> {
    require_stable(ed)?;
    let mut out = Vec::with_capacity(steps);
    let mut power = Mat2::IDENTITY;
    let mut partial = 0.0;
    for _ in 0..steps {
        let norm = power.norm_inf();
        out.push(norm * e0.norm_inf() + forcing_sup.abs() * partial);
        partial += norm;
        power = power * ed.matrix;
    }
    Ok(out)
}
