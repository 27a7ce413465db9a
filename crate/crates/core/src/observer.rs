//! Discrete-time disturbance observers.
//!
//! Both observers estimate the lumped disturbance `τ_dn,k` of the nominal
//! discrete model `x⁺ = Ad x + Bd u − Dd τ_dn`, through auxiliary variables
//! that mix the unknown disturbance with the measured state:
//!
//! * conventional: `z_k = τ_dn,k + Lᵀx_k`. Its estimation error is forced by
//!   the first difference `τ_dn,k+1 − τ_dn,k`, so any ramp leaves a bias.
//! * high-performance: `z1_k = τ_dn,k−1 + L1ᵀx_k`, `z2_k = τ_dn,k + L2ᵀx_k`.
//!   The error vector obeys `e⁺ = M e + [0, Δ²τ]ᵀ` with
//!   `M = [[0, 1 − L1ᵀDd], [−1, 2 − L2ᵀDd]]`, forced only by the second
//!   difference, so ramps are tracked without bias.
//!
//! Gains always point along `[1, 1]ᵀ`, scaled by `1/‖Dd‖₁`, so only the dot
//! products `LᵀDd` enter the error dynamics.
//!
//! Timing: the estimate at step `k` is read from the state *before* it is
//! advanced with `(x_k, u_k)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numkit::{eig2, EigPair2, Mat2, Vec2};
use crate::plant::{DiscreteModel, StateVec};

/// Tolerance for accepting a desired-eigenvalue pair as real or conjugate.
const CONJUGATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StabilityPolicy {
    /// Reject requests with any eigenvalue on or outside the unit circle.
    #[default]
    Enforce,
    Allow,
}

fn gain_direction(dd: &Vec2) -> Result<f64> {
    let n = dd.norm1();
    if !(n.is_finite() && n > 0.0) {
        return Err(invalid("disturbance input vector has zero L1 norm"));
    }
    Ok(1.0 / n)
}

/// Nudges `s` by a few ulps so that `[s, s]ᵀ·Dd` rounds to `target` when reachable.
///
/// Repeated error-matrix eigenvalues move by the square root of any error in
/// the dot product, so the last ulp matters.
fn fit_scalar(s: f64, target: f64, dd: &Vec2) -> f64 {
    let dot = |s: f64| Vec2::new(s, s).dot(dd);
    let increasing = dd.0[0] + dd.0[1] > 0.0;
    let mut best = s;
    let mut cur = s;
    for _ in 0..16 {
        let d = dot(cur);
        if d == target {
            return cur;
        }
        if (d - target).abs() < (dot(best) - target).abs() {
            best = cur;
        }
        cur = if (d < target) == increasing {
            cur.next_up()
        } else {
            cur.next_down()
        };
    }
    best
}

/// `L = k / ‖Dd‖₁ · [1, 1]ᵀ`; for non-negative `Dd` this gives `LᵀDd = k`.
pub fn conv_gain(k: f64, dd: &Vec2) -> Result<Vec2> {
    if !k.is_finite() {
        return Err(invalid(format!("observer gain k must be finite, got {k}")));
    }
    let s = k * gain_direction(dd)?;
    let s = if dd.0.iter().all(|v| *v >= 0.0) {
        fit_scalar(s, k, dd)
    } else {
        s
    };
    Ok(Vec2::new(s, s))
}

/// Assigns the high-performance error-matrix eigenvalues.
///
/// Solves `L1ᵀDd = 1 − λ1λ2` and `L2ᵀDd = 2 − λ1 − λ2` along `[1, 1]ᵀ`.
pub fn hp_gains(eigs: &EigPair2, dd: &Vec2, policy: StabilityPolicy) -> Result<(Vec2, Vec2)> {
    if !eigs.is_self_conjugate(CONJUGATE_TOL) {
        return Err(invalid(format!(
            "desired eigenvalues must be real or a conjugate pair, got {} and {}",
            eigs.0, eigs.1
        )));
    }
    let radius = eigs.spectral_radius();
    if !radius.is_finite() {
        return Err(invalid("desired eigenvalues must be finite"));
    }
    if policy == StabilityPolicy::Enforce && radius >= 1.0 {
        return Err(Error::Unstable { radius });
    }
    let dir = gain_direction(dd)?;
    let row_sum = dd.0[0] + dd.0[1];
    if row_sum == 0.0 {
        return Err(invalid(
            "[1, 1] direction is orthogonal to the disturbance input vector",
        ));
    }
    // Equals 1 for non-negative Dd; otherwise corrects so the dot products still hit k1, k2.
    let sign = dd.norm1() / row_sum;
    let k1 = 1.0 - eigs.product().re;
    let k2 = 2.0 - eigs.sum().re;
    let l1 = fit_scalar(k1 * dir * sign, k1, dd);
    let l2 = fit_scalar(k2 * dir * sign, k2, dd);
    Ok((Vec2::new(l1, l1), Vec2::new(l2, l2)))
}

/// Conventional observer state: auxiliary estimate and gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvDobState {
    pub z_hat: f64,
    pub gain: Vec2,
}

impl ConvDobState {
    /// Starts from a zero disturbance estimate at `x0`.
    pub fn new(gain: Vec2, x0: StateVec) -> Self {
        ConvDobState {
            z_hat: gain.dot(&x0.as_vec()),
            gain,
        }
    }

    pub fn estimate(&self, x: StateVec) -> f64 {
        self.z_hat - self.gain.dot(&x.as_vec())
    }

    /// Definitional auxiliary variable `τ + Lᵀx` for a known disturbance.
    pub fn auxiliary(&self, tau: f64, x: StateVec) -> f64 {
        tau + self.gain.dot(&x.as_vec())
    }

    /// Returns the advanced state and the estimate for step `k`.
    pub fn step(&self, x: StateVec, u: f64, dm: &DiscreteModel) -> (Self, f64) {
        let xv = x.as_vec();
        let l = self.gain;
        let tau_hat = self.z_hat - l.dot(&xv);
        let ld = l.dot(dm.dd());
        // Lᵀ(Ad + Dd Lᵀ − I) x
        let coupling = *dm.ad() + Mat2::outer(dm.dd(), &l) - Mat2::IDENTITY;
        let z_next = (1.0 - ld) * self.z_hat + l.left_mul(&coupling).dot(&xv) + l.dot(dm.bd()) * u;
        (ConvDobState { z_hat: z_next, gain: l }, tau_hat)
    }
}

/// High-performance observer state: two auxiliary estimates and their gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HpDobState {
    pub z1_hat: f64,
    pub z2_hat: f64,
    pub gain1: Vec2,
    pub gain2: Vec2,
}

impl HpDobState {
    /// Starts from a zero disturbance estimate at `x0`.
    pub fn new(gain1: Vec2, gain2: Vec2, x0: StateVec) -> Self {
        let xv = x0.as_vec();
        HpDobState {
            z1_hat: gain1.dot(&xv),
            z2_hat: gain2.dot(&xv),
            gain1,
            gain2,
        }
    }

    pub fn estimate(&self, x: StateVec) -> f64 {
        self.z2_hat - self.gain2.dot(&x.as_vec())
    }

    /// Definitional `(τ_prev + L1ᵀx, τ + L2ᵀx)`.
    pub fn auxiliary(&self, tau_prev: f64, tau: f64, x: StateVec) -> Vec2 {
        let xv = x.as_vec();
        Vec2::new(tau_prev + self.gain1.dot(&xv), tau + self.gain2.dot(&xv))
    }

    pub fn z_hat(&self) -> Vec2 {
        Vec2::new(self.z1_hat, self.z2_hat)
    }

    /// Returns the advanced state and the estimate for step `k`.
    pub fn step(&self, x: StateVec, u: f64, dm: &DiscreteModel) -> (Self, f64) {
        let xv = x.as_vec();
        let (l1, l2) = (self.gain1, self.gain2);
        let tau_hat = self.z2_hat - l2.dot(&xv);

        let l1d = l1.dot(dm.dd());
        let l2d = l2.dot(dm.dd());
        let l1ad = l1.left_mul(dm.ad());
        let l2ad = l2.left_mul(dm.ad());

        // L1ᵀAd + (L1ᵀDd) L2ᵀ − L2ᵀ
        let x_coef1 = l1ad + l1d * l2 - l2;
        // L1ᵀ + L2ᵀAd + (L2ᵀDd) L2ᵀ − 2 L2ᵀ
        let x_coef2 = l1 + l2ad + l2d * l2 - 2.0 * l2;

        let z1_next = (1.0 - l1d) * self.z2_hat + l1.dot(dm.bd()) * u + x_coef1.dot(&xv);
        let z2_next = -self.z1_hat + (2.0 - l2d) * self.z2_hat + l2.dot(dm.bd()) * u + x_coef2.dot(&xv);

        let next = HpDobState {
            z1_hat: z1_next,
            z2_hat: z2_next,
            gain1: l1,
            gain2: l2,
        };
        (next, tau_hat)
    }
}

/// A running observer, or none.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observer {
    None,
    Conventional(ConvDobState),
    Hp(HpDobState),
}

impl Observer {
    pub fn estimate(&self, x: StateVec) -> f64 {
        match self {
            Observer::None => 0.0,
            Observer::Conventional(s) => s.estimate(x),
            Observer::Hp(s) => s.estimate(x),
        }
    }

    pub fn step(&self, x: StateVec, u: f64, dm: &DiscreteModel) -> (Self, f64) {
        match self {
            Observer::None => (Observer::None, 0.0),
            Observer::Conventional(s) => {
                let (s, e) = s.step(x, u, dm);
                (Observer::Conventional(s), e)
            }
            Observer::Hp(s) => {
                let (s, e) = s.step(x, u, dm);
                (Observer::Hp(s), e)
            }
        }
    }

    /// Internal auxiliary estimates; the second slot is zero for the conventional observer.
    pub fn z_hat(&self) -> [f64; 2] {
        match self {
            Observer::None => [0.0, 0.0],
            Observer::Conventional(s) => [s.z_hat, 0.0],
            Observer::Hp(s) => [s.z1_hat, s.z2_hat],
        }
    }

    pub fn gains(&self) -> Option<ObserverGains> {
        match self {
            Observer::None => None,
            Observer::Conventional(s) => Some(ObserverGains::Conventional { gain: s.gain }),
            Observer::Hp(s) => Some(ObserverGains::Hp {
                gain1: s.gain1,
                gain2: s.gain2,
            }),
        }
    }
}

/// A desired eigenvalue: a plain number or `{ "re": .., "im": .. }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Eigenvalue {
    Real(f64),
    Complex { re: f64, im: f64 },
}

impl Eigenvalue {
    pub fn to_complex(self) -> Complex64 {
        match self {
            Eigenvalue::Real(v) => Complex64::new(v, 0.0),
            Eigenvalue::Complex { re, im } => Complex64::new(re, im),
        }
    }
}

/// Observer selection as written in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObserverSpec {
    None,
    Conventional {
        k: f64,
        #[serde(default)]
        allow_unstable: bool,
    },
    Hp {
        lambda1: Eigenvalue,
        lambda2: Eigenvalue,
        #[serde(default)]
        allow_unstable: bool,
    },
}

impl ObserverSpec {
    pub fn conventional(k: f64) -> Self {
        ObserverSpec::Conventional {
            k,
            allow_unstable: false,
        }
    }

    pub fn hp(lambda1: f64, lambda2: f64) -> Self {
        ObserverSpec::Hp {
            lambda1: Eigenvalue::Real(lambda1),
            lambda2: Eigenvalue::Real(lambda2),
            allow_unstable: false,
        }
    }

    pub fn label(&self) -> String {
        match self {
            ObserverSpec::None => "none".to_string(),
            ObserverSpec::Conventional { k, .. } => format!("conventional(k={k})"),
            ObserverSpec::Hp { lambda1, lambda2, .. } => {
                format!("hp(l1={}, l2={})", lambda1.to_complex(), lambda2.to_complex())
            }
        }
    }

    /// Builds gains against the nominal model and starts with a zero estimate at `x0`.
    pub fn build(&self, dm: &DiscreteModel, x0: StateVec) -> Result<Observer> {
        match *self {
            ObserverSpec::None => Ok(Observer::None),
            ObserverSpec::Conventional { k, allow_unstable } => {
                let gain = conv_gain(k, dm.dd())?;
                if !allow_unstable {
                    let ed = error_dynamics(&ObserverGains::Conventional { gain }, dm.dd());
                    if !ed.is_stable() {
                        return Err(Error::Unstable {
                            radius: ed.spectral_radius,
                        });
                    }
                }
                Ok(Observer::Conventional(ConvDobState::new(gain, x0)))
            }
            ObserverSpec::Hp {
                lambda1,
                lambda2,
                allow_unstable,
            } => {
                let eigs = EigPair2(lambda1.to_complex(), lambda2.to_complex());
                let policy = if allow_unstable {
                    StabilityPolicy::Allow
                } else {
                    StabilityPolicy::Enforce
                };
                let (g1, g2) = hp_gains(&eigs, dm.dd(), policy)?;
                Ok(Observer::Hp(HpDobState::new(g1, g2, x0)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObserverGains {
    Conventional { gain: Vec2 },
    Hp { gain1: Vec2, gain2: Vec2 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicsKind {
    Conventional,
    Hp,
}

/// Homogeneous error propagation of an observer.
///
/// The conventional scalar coefficient sits in the `(0, 0)` slot of an
/// otherwise zero matrix, so matrix powers apply to both kinds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorDynamics {
    pub kind: DynamicsKind,
    pub matrix: Mat2,
    pub spectral_radius: f64,
}

impl ErrorDynamics {
    pub fn is_stable(&self) -> bool {
        self.spectral_radius < 1.0
    }

    pub fn eigenvalues(&self) -> EigPair2 {
        match self.kind {
            DynamicsKind::Conventional => EigPair2::real(self.matrix.get(0, 0), 0.0),
            DynamicsKind::Hp => eig2(&self.matrix).expect("finite error matrix"),
        }
    }

    /// One step of `e⁺ = M e + forcing`, with forcing entering the last error component.
    pub fn propagate(&self, e: Vec2, forcing: f64) -> Vec2 {
        let f = match self.kind {
            DynamicsKind::Conventional => Vec2::new(forcing, 0.0),
            DynamicsKind::Hp => Vec2::new(0.0, forcing),
        };
        self.matrix * e + f
    }

    /// Order of the finite difference that drives the error: 1 or 2.
    pub fn forcing_order(&self) -> usize {
        match self.kind {
            DynamicsKind::Conventional => 1,
            DynamicsKind::Hp => 2,
        }
    }
}

pub fn error_dynamics(gains: &ObserverGains, dd: &Vec2) -> ErrorDynamics {
    match gains {
        ObserverGains::Conventional { gain } => {
            let c = 1.0 - gain.dot(dd);
            ErrorDynamics {
                kind: DynamicsKind::Conventional,
                matrix: Mat2::new(c, 0.0, 0.0, 0.0),
                spectral_radius: c.abs(),
            }
        }
        ObserverGains::Hp { gain1, gain2 } => {
            let matrix = Mat2::new(0.0, 1.0 - gain1.dot(dd), -1.0, 2.0 - gain2.dot(dd));
            let spectral_radius = eig2(&matrix).map(|e| e.spectral_radius()).unwrap_or(f64::INFINITY);
            ErrorDynamics {
                kind: DynamicsKind::Hp,
                matrix,
                spectral_radius,
            }
        }
    }
}

/// Polynomial disturbance classes with known steady-state estimation error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalClass {
    /// Slope in N·m/s.
    Ramp { slope: f64 },
    /// Second derivative in N·m/s².
    Parabola { accel: f64 },
}

/// Fixed point of the estimation error `τ_dn − τ̂` for a polynomial disturbance.
pub fn predicted_ss_error(ed: &ErrorDynamics, ts: f64, class: SignalClass) -> Result<f64> {
    if !ed.is_stable() {
        return Err(Error::Unstable {
            radius: ed.spectral_radius,
        });
    }
    if !(ts.is_finite() && ts > 0.0) {
        return Err(invalid(format!("sampling period must be > 0, got {ts}")));
    }
    match (ed.kind, class) {
        (DynamicsKind::Conventional, SignalClass::Ramp { slope }) => Ok(slope * ts / (1.0 - ed.matrix.get(0, 0))),
        (DynamicsKind::Conventional, SignalClass::Parabola { accel }) => {
            if accel == 0.0 {
                Ok(0.0)
            } else {
                Err(invalid(
                    "conventional observer error grows without bound under a parabolic disturbance",
                ))
            }
        }
        (DynamicsKind::Hp, SignalClass::Ramp { .. }) => Ok(0.0),
        (DynamicsKind::Hp, SignalClass::Parabola { accel }) => {
            let rhs = Vec2::new(0.0, accel * ts * ts);
            let e = (Mat2::IDENTITY - ed.matrix)
                .solve(&rhs)
                .ok_or_else(|| invalid("error matrix has an eigenvalue at 1"))?;
            Ok(e.0[1])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{build_continuous, discretize, ServoParams};

    fn model(j: f64, b: f64, ts: f64) -> DiscreteModel {
        discretize(&build_continuous(&ServoParams::new(j, b).unwrap()).unwrap(), ts).unwrap()
    }

    #[test]
    fn conv_gain_examples() {
        let dd = Vec2::new(0.5, 0.5);
        let l = conv_gain(1.0, &dd).unwrap();
        assert_eq!(l, Vec2::new(1.0, 1.0));
        assert_eq!(l.dot(&dd), 1.0);
        assert_eq!(conv_gain(0.0, &dd).unwrap(), Vec2::ZERO);
        assert!(conv_gain(1.0, &Vec2::ZERO).is_err());

        let dm = model(1.0, 0.0, 1e-3);
        assert!((dm.dd().0[0] - 5e-7).abs() < 1e-20);
        let l = conv_gain(0.5, dm.dd()).unwrap();
        assert!((l.dot(dm.dd()) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn hp_gain_examples() {
        let dm = model(0.005, 0.001, 1e-3);
        let dd = dm.dd();
        for (l1, l2, p1, p2) in [(0.0, 0.0, 1.0, 2.0), (0.5, 0.5, 0.75, 1.0)] {
            let (g1, g2) = hp_gains(&EigPair2::real(l1, l2), dd, StabilityPolicy::Enforce).unwrap();
            assert!((g1.dot(dd) - p1).abs() < 1e-12);
            assert!((g2.dot(dd) - p2).abs() < 1e-12);
        }
        let marginal = EigPair2::real(1.0, 1.0);
        assert!(matches!(
            hp_gains(&marginal, dd, StabilityPolicy::Enforce),
            Err(Error::Unstable { .. })
        ));
        let (g1, g2) = hp_gains(&marginal, dd, StabilityPolicy::Allow).unwrap();
        assert!(g1.dot(dd).abs() < 1e-12 && g2.dot(dd).abs() < 1e-12);
        let ed = error_dynamics(&ObserverGains::Hp { gain1: g1, gain2: g2 }, dd);
        assert!(ed.matrix.max_abs_diff(&Mat2::new(0.0, 1.0, -1.0, 2.0)) < 1e-12);
        assert!((ed.spectral_radius - 1.0).abs() < 1e-6);
    }

    #[test]
    fn hp_gains_reject_bad_requests() {
        let dd = Vec2::new(1e-4, 0.2);
        let not_conj = EigPair2(Complex64::new(0.2, 0.1), Complex64::new(0.2, 0.3));
        assert!(hp_gains(&not_conj, &dd, StabilityPolicy::Allow).is_err());
        assert!(hp_gains(&EigPair2::real(0.0, 0.0), &Vec2::ZERO, StabilityPolicy::Allow).is_err());
    }

    #[test]
    fn hp_gains_mixed_sign_direction() {
        let dd = Vec2::new(-0.1, 0.3);
        let (g1, g2) = hp_gains(&EigPair2::real(0.2, 0.4), &dd, StabilityPolicy::Enforce).unwrap();
        assert!((g1.dot(&dd) - (1.0 - 0.08)).abs() < 1e-12);
        assert!((g2.dot(&dd) - (2.0 - 0.6)).abs() < 1e-12);
    }

    #[test]
    fn error_dynamics_examples() {
        let dd = Vec2::new(1e-4, 0.2);
        let ed = error_dynamics(
            &ObserverGains::Conventional {
                gain: conv_gain(1.0, &dd).unwrap(),
            },
            &dd,
        );
        assert!(ed.spectral_radius < 1e-15);

        let (g1, g2) = hp_gains(&EigPair2::real(0.0, 0.0), &dd, StabilityPolicy::Enforce).unwrap();
        let ed = error_dynamics(&ObserverGains::Hp { gain1: g1, gain2: g2 }, &dd);
        assert!(ed.matrix.max_abs_diff(&Mat2::new(0.0, 0.0, -1.0, 0.0)) < 1e-12);
        assert!(ed.spectral_radius < 1e-6);

        let (g1, g2) = hp_gains(&EigPair2::real(0.3, 0.6), &dd, StabilityPolicy::Enforce).unwrap();
        let ed = error_dynamics(&ObserverGains::Hp { gain1: g1, gain2: g2 }, &dd);
        assert!(ed.eigenvalues().distance(&EigPair2::real(0.3, 0.6)) < 1e-10);
    }

    #[test]
    fn frozen_observers() {
        let dm = model(0.005, 0.001, 1e-3);
        let s = ConvDobState {
            z_hat: 1.5,
            gain: Vec2::ZERO,
        };
        let (next, est) = s.step(StateVec::new(0.3, 2.0), 4.0, &dm);
        assert_eq!(next.z_hat, 1.5);
        assert_eq!(est, 1.5);

        let s = HpDobState::new(Vec2::ZERO, Vec2::ZERO, StateVec::ZERO);
        let (next, est) = s.step(StateVec::ZERO, 0.0, &dm);
        assert_eq!((next.z1_hat, next.z2_hat, est), (0.0, 0.0, 0.0));
    }

    /// Open-loop drive of the nominal discrete plant with a known disturbance sequence.
    fn drive<F>(dm: &DiscreteModel, mut obs: Observer, tau: F, steps: usize) -> Vec<f64>
    where
        F: Fn(usize) -> f64,
    {
        let mut x = StateVec::ZERO;
        let mut errs = Vec::new();
        for k in 0..steps {
            let u = 0.3 * (k as f64 * 0.01).sin();
            let (next, est) = obs.step(x, u, dm);
            errs.push(tau(k) - est);
            x = dm.step(x, u, tau(k));
            obs = next;
        }
        errs
    }

    #[test]
    fn conventional_deadbeat_constant() {
        let dm = model(0.005, 0.001, 1e-3);
        let obs = ObserverSpec::conventional(1.0).build(&dm, StateVec::ZERO).unwrap();
        let errs = drive(&dm, obs, |_| 3.0, 5);
        assert_eq!(errs[0], 3.0);
        for e in &errs[1..] {
            assert!(e.abs() < 1e-12, "{e}");
        }
    }

    #[test]
    fn conventional_geometric_decay() {
        let dm = model(0.005, 0.001, 1e-3);
        let obs = ObserverSpec::conventional(0.5).build(&dm, StateVec::ZERO).unwrap();
        let errs = drive(&dm, obs, |_| 3.0, 20);
        // Error is τ − τ̂ = 3·0.5^j with τ̂ starting at zero.
        for (j, e) in errs.iter().enumerate() {
            assert!((e - 3.0 * 0.5f64.powi(j as i32)).abs() < 1e-12, "step {j}: {e}");
        }
    }

    #[test]
    fn hp_deadbeat_exact_after_two_steps() {
        let dm = model(0.005, 0.001, 1e-3);
        for tau in [&(|_k: usize| 3.0) as &dyn Fn(usize) -> f64, &|k| {
            0.5 + 2.0 * k as f64 * 1e-3
        }] {
            let obs = ObserverSpec::hp(0.0, 0.0).build(&dm, StateVec::ZERO).unwrap();
            let errs = drive(&dm, obs, tau, 12);
            for e in &errs[2..] {
                assert!(e.abs() < 1e-11, "{errs:?}");
            }
        }
    }

    #[test]
    fn predicted_errors() {
        let dd = model(0.005, 0.001, 1e-3).dd().to_owned();
        let ed = error_dynamics(
            &ObserverGains::Conventional {
                gain: conv_gain(0.5, &dd).unwrap(),
            },
            &dd,
        );
        let ss = predicted_ss_error(&ed, 1e-3, SignalClass::Ramp { slope: 5.0 }).unwrap();
        assert!((ss - 0.01).abs() < 1e-14);
        assert!(predicted_ss_error(&ed, 1e-3, SignalClass::Parabola { accel: 1.0 }).is_err());

        let (g1, g2) = hp_gains(&EigPair2::real(0.5, 0.5), &dd, StabilityPolicy::Enforce).unwrap();
        let ed = error_dynamics(&ObserverGains::Hp { gain1: g1, gain2: g2 }, &dd);
        assert_eq!(
            predicted_ss_error(&ed, 1e-3, SignalClass::Ramp { slope: 5.0 }).unwrap(),
            0.0
        );
        let ss = predicted_ss_error(&ed, 1e-3, SignalClass::Parabola { accel: 100.0 }).unwrap();
        assert!((ss - 4e-4).abs() < 1e-15);

        let unstable = error_dynamics(
            &ObserverGains::Conventional {
                gain: conv_gain(2.5, &dd).unwrap(),
            },
            &dd,
        );
        assert!(matches!(
            predicted_ss_error(&unstable, 1e-3, SignalClass::Ramp { slope: 1.0 }),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn spec_rejects_unstable_unless_allowed() {
        let dm = model(0.005, 0.001, 1e-3);
        assert!(ObserverSpec::conventional(2.5).build(&dm, StateVec::ZERO).is_err());
        let allowed = ObserverSpec::Conventional {
            k: 2.5,
            allow_unstable: true,
        };
        assert!(allowed.build(&dm, StateVec::ZERO).is_ok());
        assert!(ObserverSpec::hp(1.0, 0.2).build(&dm, StateVec::ZERO).is_err());
    }

    #[test]
    fn observer_spec_json() {
        let spec: ObserverSpec =
            serde_json::from_str(r#"{"kind":"hp","lambda1":{"re":0.5,"im":0.2},"lambda2":{"re":0.5,"im":-0.2}}"#)
                .unwrap();
        let dm = model(0.005, 0.001, 1e-3);
        let obs = spec.build(&dm, StateVec::ZERO).unwrap();
        let ed = error_dynamics(&obs.gains().unwrap(), dm.dd());
        assert!(ed.eigenvalues().distance(&EigPair2::conjugate(0.5, 0.2)) < 1e-10);
        let spec: ObserverSpec = serde_json::from_str(r#"{"kind":"conventional","k":0.5}"#).unwrap();
        assert_eq!(spec, ObserverSpec::conventional(0.5));
    }
}
