//! Servo plant models.
//!
//! The servo is `ẋ = A x + B u − D τ_d` with `x = (θ, ω)`, `A = [[0, 1], [0, −b/J]]`
//! and `B = D = [0, 1/J]ᵀ`. The observers work on the zero-order-hold
//! discretization of the nominal model, where the lumped disturbance is held
//! constant over each sample.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numkit::{expm2, phi_integral, Mat2, Vec2};

/// Shipped default nominal inertia (kg·m²). An artifact choice, not a measured value.
pub const DEFAULT_NOMINAL_INERTIA: f64 = 0.005;
/// Shipped default nominal viscous friction (N·m·s/rad). An artifact choice.
pub const DEFAULT_NOMINAL_FRICTION: f64 = 0.001;

/// Inertia and viscous friction of a servo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServoParams {
    /// Inertia (kg·m²), strictly positive.
    #[serde(rename = "J")]
    pub inertia: f64,
    /// Viscous friction (N·m·s/rad), non-negative.
    #[serde(rename = "b")]
    pub friction: f64,
}

impl ServoParams {
    pub fn new(inertia: f64, friction: f64) -> Result<Self> {
        let p = ServoParams { inertia, friction };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.inertia.is_finite() && self.inertia > 0.0) {
            return Err(invalid(format!("inertia J must be > 0, got {}", self.inertia)));
        }
        if !(self.friction.is_finite() && self.friction >= 0.0) {
            return Err(invalid(format!("friction b must be >= 0, got {}", self.friction)));
        }
        Ok(())
    }
}

impl Default for ServoParams {
    fn default() -> Self {
        ServoParams {
            inertia: DEFAULT_NOMINAL_INERTIA,
            friction: DEFAULT_NOMINAL_FRICTION,
        }
    }
}

/// Position and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateVec {
    pub theta: f64,
    pub omega: f64,
}

impl StateVec {
    pub const ZERO: StateVec = StateVec { theta: 0.0, omega: 0.0 };

    pub fn new(theta: f64, omega: f64) -> Self {
        StateVec { theta, omega }
    }

    pub fn as_vec(&self) -> Vec2 {
        Vec2::new(self.theta, self.omega)
    }

    pub fn from_vec(v: Vec2) -> Self {
        StateVec {
            theta: v.0[0],
            omega: v.0[1],
        }
    }
}

/// Continuous-time servo matrices. Only constructible through [`build_continuous`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousModel {
    a: Mat2,
    b: Vec2,
    d: Vec2,
}

impl ContinuousModel {
    pub fn a(&self) -> &Mat2 {
        &self.a
    }
    pub fn b(&self) -> &Vec2 {
        &self.b
    }
    pub fn d(&self) -> &Vec2 {
        &self.d
    }
}

/// Zero-order-hold discretization of a [`ContinuousModel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteModel {
    ad: Mat2,
    bd: Vec2,
    dd: Vec2,
    ts: f64,
}

impl DiscreteModel {
    pub fn ad(&self) -> &Mat2 {
        &self.ad
    }
    pub fn bd(&self) -> &Vec2 {
        &self.bd
    }
    /// Disturbance input vector under the constant-over-sample assumption.
    pub fn dd(&self) -> &Vec2 {
        &self.dd
    }
    pub fn ts(&self) -> f64 {
        self.ts
    }

    /// `x⁺ = Ad x + Bd u − Dd τ`
    pub fn step(&self, x: StateVec, u: f64, tau: f64) -> StateVec {
        let next = self.ad * x.as_vec() + u * self.bd - tau * self.dd;
        StateVec::from_vec(next)
    }
}

pub fn build_continuous(p: &ServoParams) -> Result<ContinuousModel> {
    p.validate()?;
    let inv_j = 1.0 / p.inertia;
    Ok(ContinuousModel {
        a: Mat2::new(0.0, 1.0, 0.0, -p.friction * inv_j),
        b: Vec2::new(0.0, inv_j),
        d: Vec2::new(0.0, inv_j),
    })
}

pub fn discretize(m: &ContinuousModel, ts: f64) -> Result<DiscreteModel> {
    if !(ts.is_finite() && ts > 0.0) {
        return Err(invalid(format!("sampling period must be > 0, got {ts}")));
    }
    let ad = expm2(&(m.a.scale(ts)))?;
    let phi = phi_integral(&m.a, ts)?;
    Ok(DiscreteModel {
        ad,
        bd: phi * m.b,
        dd: phi * m.d,
        ts,
    })
}

/// Lumped disturbance seen by the nominal model, projected onto its input channel.
///
/// `J_n [ (b/J − b_n/J_n) ω + (1/J_n − 1/J) u + τ_d / J ]`
pub fn lumped_disturbance(truth: &ServoParams, nominal: &ServoParams, x: StateVec, u: f64, tau_d: f64) -> f64 {
    let friction_gap = truth.friction / truth.inertia - nominal.friction / nominal.inertia;
    let input_gap = 1.0 / nominal.inertia - 1.0 / truth.inertia;
    nominal.inertia * (friction_gap * x.omega + input_gap * u + tau_d / truth.inertia)
}
