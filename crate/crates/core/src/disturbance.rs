//! Disturbance torque generators.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// External disturbance torque `τ_d(t)` in N·m.
///
/// Time-shifted components (`Step`, `Ramp`, `Parabola`) are zero before `t0`
/// and active from `t0` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceSignal {
    Constant {
        amp: f64,
    },
    Step {
        t0: f64,
        amp: f64,
    },
    Ramp {
        slope: f64,
        #[serde(default)]
        t0: f64,
    },
    /// `½ · accel · (t − t0)²`, so `accel` is the second derivative.
    Parabola {
        accel: f64,
        #[serde(default)]
        t0: f64,
    },
    Sine {
        amp: f64,
        freq: f64,
        #[serde(default)]
        phase: f64,
    },
    Sum {
        terms: Vec<DisturbanceSignal>,
    },
}

impl DisturbanceSignal {
    pub fn none() -> Self {
        DisturbanceSignal::Constant { amp: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        use DisturbanceSignal::*;
        let finite = |vals: &[f64]| vals.iter().all(|v| v.is_finite());
        match self {
            Constant { amp } => {
                if !finite(&[*amp]) {
                    return Err(invalid("constant disturbance must be finite"));
                }
            }
            Step { t0, amp } | Ramp { slope: amp, t0 } | Parabola { accel: amp, t0 } => {
                if !finite(&[*t0, *amp]) {
                    return Err(invalid("disturbance parameters must be finite"));
                }
            }
            Sine { amp, freq, phase } => {
                if !finite(&[*amp, *freq, *phase]) {
                    return Err(invalid("sine disturbance parameters must be finite"));
                }
                if *freq < 0.0 {
                    return Err(invalid(format!("sine frequency must be >= 0, got {freq}")));
                }
            }
            Sum { terms } => {
                if terms.is_empty() {
                    return Err(invalid("sum disturbance needs at least one term"));
                }
                for t in terms {
                    t.validate()?;
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        use DisturbanceSignal::*;
        match self {
            Constant { amp } => *amp,
            Step { t0, amp } => {
                if t >= *t0 {
                    *amp
                } else {
                    0.0
                }
            }
            Ramp { slope, t0 } => {
                if t >= *t0 {
                    slope * (t - t0)
                } else {
                    0.0
                }
            }
            Parabola { accel, t0 } => {
                if t >= *t0 {
                    let dt = t - t0;
                    0.5 * accel * dt * dt
                } else {
                    0.0
                }
            }
            Sine { amp, freq, phase } => amp * (TAU * freq * t + phase).sin(),
            Sum { terms } => terms.iter().map(|s| s.eval(t)).sum(),
        }
    }

    /// Samples at `k · ts` for `k = 0..n`.
    pub fn sample_sequence(&self, ts: f64, n: usize) -> Result<Vec<f64>> {
        if !(ts.is_finite() && ts > 0.0) {
            return Err(invalid(format!("sampling period must be > 0, got {ts}")));
        }
        if n == 0 {
            return Err(invalid("sample count must be >= 1"));
        }
        Ok((0..n).map(|k| self.eval(k as f64 * ts)).collect())
    }
}
