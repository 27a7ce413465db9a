//! Outer-loop PD controller and inner-loop disturbance compensation.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::plant::StateVec;

pub const DEFAULT_KP: f64 = 50.0;
pub const DEFAULT_KD: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeOn {
    /// `Kd (ω_ref − ω)`
    #[default]
    Error,
    /// `−Kd ω`, ignoring the reference velocity.
    Measurement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdGains {
    #[serde(rename = "Kp")]
    pub kp: f64,
    #[serde(rename = "Kd")]
    pub kd: f64,
}

impl Default for PdGains {
    fn default() -> Self {
        PdGains {
            kp: DEFAULT_KP,
            kd: DEFAULT_KD,
        }
    }
}

impl PdGains {
    pub fn validate(&self) -> Result<()> {
        if !(self.kp.is_finite() && self.kp >= 0.0 && self.kd.is_finite() && self.kd >= 0.0) {
            return Err(invalid(format!(
                "PD gains must be finite and >= 0, got Kp={} Kd={}",
                self.kp, self.kd
            )));
        }
        Ok(())
    }
}

/// `u_pd = Kp (θ_ref − θ) + Kd (ω_ref − ω)`
pub fn pd_control(g: &PdGains, ref_pos: f64, ref_vel: f64, x: StateVec) -> f64 {
    g.kp * (ref_pos - x.theta) + g.kd * (ref_vel - x.omega)
}

/// Adds the disturbance estimate to the control input.
///
/// The nominal input and disturbance channels coincide, so this cancels the
/// lumped disturbance when the estimate is exact.
pub fn compensate(u_pd: f64, tau_hat: f64) -> f64 {
    u_pd + tau_hat
}

/// PD controller configuration as it appears in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdConfig {
    #[serde(rename = "Kp", default = "default_kp")]
    pub kp: f64,
    #[serde(rename = "Kd", default = "default_kd")]
    pub kd: f64,
    #[serde(default)]
    pub derivative_on: DerivativeOn,
    /// Symmetric actuator limit on the compensated input; `None` disables saturation.
    #[serde(default)]
    pub u_max: Option<f64>,
}

fn default_kp() -> f64 {
    DEFAULT_KP
}

fn default_kd() -> f64 {
    DEFAULT_KD
}

impl Default for PdConfig {
    fn default() -> Self {
        PdConfig {
            kp: DEFAULT_KP,
            kd: DEFAULT_KD,
            derivative_on: DerivativeOn::Error,
            u_max: None,
        }
    }
}

impl PdConfig {
    pub fn gains(&self) -> PdGains {
        PdGains {
            kp: self.kp,
            kd: self.kd,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.gains().validate()?;
        if let Some(m) = self.u_max {
            if !(m.is_finite() && m > 0.0) {
                return Err(invalid(format!("u_max must be > 0, got {m}")));
            }
        }
        Ok(())
    }

    pub fn output(&self, ref_pos: f64, ref_vel: f64, x: StateVec) -> f64 {
        let vel = match self.derivative_on {
            DerivativeOn::Error => ref_vel,
            DerivativeOn::Measurement => 0.0,
        };
        pd_control(&self.gains(), ref_pos, vel, x)
    }

    pub fn saturate(&self, u: f64) -> f64 {
        match self.u_max {
            Some(m) => u.clamp(-m, m),
            None => u,
        }
    }
}

/// Position reference. Velocity is the analytic derivative of the position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Reference {
    SetPoint {
        pos: f64,
    },
    /// `offset + amp · sin(2π freq t + phase)`
    Sine {
        amp: f64,
        freq: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `Σ coeffs[i] tⁱ`
    Polynomial {
        coeffs: Vec<f64>,
    },
}

impl Reference {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Reference::SetPoint { pos } => pos.is_finite(),
            Reference::Sine {
                amp,
                freq,
                phase,
                offset,
            } => [amp, freq, phase, offset].iter().all(|v| v.is_finite()) && *freq >= 0.0,
            Reference::Polynomial { coeffs } => !coeffs.is_empty() && coeffs.iter().all(|v| v.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid reference: {self:?}")))
        }
    }

    /// `(position, velocity)` at time `t`.
    pub fn sample(&self, t: f64) -> (f64, f64) {
        match self {
            Reference::SetPoint { pos } => (*pos, 0.0),
            Reference::Sine {
                amp,
                freq,
                phase,
                offset,
            } => {
                let w = TAU * freq;
                let arg = w * t + phase;
                (offset + amp * arg.sin(), amp * w * arg.cos())
            }
            Reference::Polynomial { coeffs } => {
                let pos = coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c);
                let vel = coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (i, c)| acc * t + i as f64 * c);
                (pos, vel)
            }
        }
    }
}
