//! Fixed-step closed-loop simulation.
//!
//! Each step reads the state, forms the disturbance estimate, applies the
//! PD + compensation law, advances the plant, then advances the observer with
//! the same measurement and input.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::control::{compensate, PdConfig, Reference};
use crate::disturbance::DisturbanceSignal;
use crate::error::{invalid, Error, Result};
use crate::numkit::{expm2, phi_integral, Mat2, Vec2};
use crate::observer::{error_dynamics, ErrorDynamics, ObserverGains, ObserverSpec};
use crate::plant::{build_continuous, discretize, lumped_disturbance, ContinuousModel, ServoParams, StateVec};

pub const DEFAULT_TS: f64 = 1e-3;
pub const DEFAULT_SUBSTEPS: usize = 10;
/// Magnitude of θ or ω beyond which a run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SimMode {
    /// The nominal ZOH model driven by the sampled lumped disturbance.
    #[serde(rename = "discrete")]
    DiscreteNominal,
    /// The true plant integrated exactly between substeps with a midpoint-held disturbance.
    #[serde(rename = "continuous")]
    ContinuousTruth {
        #[serde(default = "default_substeps")]
        substeps: usize,
    },
}

fn default_substeps() -> usize {
    DEFAULT_SUBSTEPS
}

impl Default for SimMode {
    fn default() -> Self {
        SimMode::ContinuousTruth {
            substeps: DEFAULT_SUBSTEPS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timing {
    #[serde(rename = "Ts", default = "default_ts")]
    pub ts: f64,
    pub duration: f64,
}

fn default_ts() -> f64 {
    DEFAULT_TS
}

impl Timing {
    /// Index of the last sample, `floor(duration / Ts)`.
    pub fn last_step(&self) -> usize {
        // The epsilon absorbs representation error in ratios like 2.0 / 0.001.
        (self.duration / self.ts + 1e-9).floor() as usize
    }
}

/// Additive Gaussian noise on the velocity measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Noise {
    pub omega_std: f64,
}

fn default_observer() -> ObserverSpec {
    ObserverSpec::None
}

/// A complete closed-loop experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Free-form remarks; ignored by the simulator.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub plant_truth: ServoParams,
    #[serde(default)]
    pub plant_nominal: ServoParams,
    pub timing: Timing,
    #[serde(default)]
    pub mode: SimMode,
    #[serde(default = "default_observer")]
    pub observer: ObserverSpec,
    #[serde(default)]
    pub pd: PdConfig,
    pub reference: Reference,
    pub disturbance: DisturbanceSignal,
    #[serde(default)]
    pub noise: Option<Noise>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub initial_state: StateVec,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.plant_truth.validate()?;
        self.plant_nominal.validate()?;
        let Timing { ts, duration } = self.timing;
        if !(ts.is_finite() && ts > 0.0 && duration.is_finite() && duration > ts) {
            return Err(invalid(format!(
                "timing requires duration > Ts > 0, got Ts={ts} duration={duration}"
            )));
        }
        if let SimMode::ContinuousTruth { substeps } = self.mode {
            if substeps < 1 {
                return Err(invalid("substeps must be >= 1"));
            }
        }
        self.pd.validate()?;
        self.reference.validate()?;
        self.disturbance.validate()?;
        if let Some(n) = self.noise {
            if !(n.omega_std.is_finite() && n.omega_std >= 0.0) {
                return Err(invalid(format!("noise std must be >= 0, got {}", n.omega_std)));
            }
        }
        if !(self.initial_state.theta.is_finite() && self.initial_state.omega.is_finite()) {
            return Err(invalid("initial state must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TraceRow {
    pub k: usize,
    pub t: f64,
    pub ref_pos: f64,
    pub ref_vel: f64,
    pub theta: f64,
    pub omega: f64,
    pub u_pd: f64,
    pub u: f64,
    pub tau_d_true: f64,
    pub tau_dn_true: f64,
    pub tau_hat: f64,
    pub est_err: f64,
    /// Observer auxiliary estimates before the update at this step.
    pub z_hat: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub ts: f64,
    pub rows: Vec<TraceRow>,
    pub gains: Option<ObserverGains>,
    /// Error dynamics of the observer that produced the trace, if any.
    pub error_dynamics: Option<ErrorDynamics>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, f: impl Fn(&TraceRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }
}

/// Exact propagation of an LTI model over a fixed substep.
#[derive(Debug, Clone, Copy)]
struct SubstepPropagator {
    transition: Mat2,
    input: Vec2,
    disturbance: Vec2,
    h: f64,
}

impl SubstepPropagator {
    fn new(m: &ContinuousModel, h: f64) -> Result<Self> {
        let phi = phi_integral(m.a(), h)?;
        Ok(SubstepPropagator {
            transition: expm2(&m.a().scale(h))?,
            input: phi * *m.b(),
            disturbance: phi * *m.d(),
            h,
        })
    }

    fn step(&self, x: StateVec, u: f64, sig: &DisturbanceSignal, t: f64) -> StateVec {
        let tau = sig.eval(t + 0.5 * self.h);
        StateVec::from_vec(self.transition * x.as_vec() + u * self.input - tau * self.disturbance)
    }
}

/// Advances the continuous plant over `[t, t + h]` with `u` held and the
/// disturbance held at its midpoint value.
pub fn step_plant_continuous(
    m: &ContinuousModel,
    x: StateVec,
    u: f64,
    sig: &DisturbanceSignal,
    t: f64,
    h: f64,
) -> Result<StateVec> {
    Ok(SubstepPropagator::new(m, h)?.step(x, u, sig, t))
}

pub fn run(sc: &Scenario) -> Result<Trace> {
    sc.validate()?;
    let ts = sc.timing.ts;
    let last = sc.timing.last_step();

    let nominal = discretize(&build_continuous(&sc.plant_nominal)?, ts)?;
    let truth = build_continuous(&sc.plant_truth)?;
    let substeps = match sc.mode {
        SimMode::DiscreteNominal => None,
        SimMode::ContinuousTruth { substeps } => {
            Some((SubstepPropagator::new(&truth, ts / substeps as f64)?, substeps))
        }
    };

    let mut x = sc.initial_state;
    let mut observer = sc.observer.build(&nominal, x)?;
    let gains = observer.gains();
    let ed = gains.map(|g| error_dynamics(&g, nominal.dd()));

    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let noise = match sc.noise {
        Some(n) if n.omega_std > 0.0 => {
            Some(Normal::new(0.0, n.omega_std).map_err(|e| invalid(format!("noise: {e}")))?)
        }
        _ => None,
    };

    let mut rows = Vec::with_capacity(last + 1);
    for k in 0..=last {
        let t = k as f64 * ts;
        let measured = match &noise {
            Some(dist) => StateVec::new(x.theta, x.omega + dist.sample(&mut rng)),
            None => x,
        };
        let (ref_pos, ref_vel) = sc.reference.sample(t);
        let tau_hat = observer.estimate(measured);
        let u_pd = sc.pd.output(ref_pos, ref_vel, measured);
        let u = sc.pd.saturate(compensate(u_pd, tau_hat));
        let tau_d = sc.disturbance.eval(t);
        let tau_dn = lumped_disturbance(&sc.plant_truth, &sc.plant_nominal, x, u, tau_d);

        rows.push(TraceRow {
            k,
            t,
            ref_pos,
            ref_vel,
            theta: x.theta,
            omega: x.omega,
            u_pd,
            u,
            tau_d_true: tau_d,
            tau_dn_true: tau_dn,
            tau_hat,
            est_err: tau_dn - tau_hat,
            z_hat: observer.z_hat(),
        });
        if k == last {
            break;
        }

        x = match &substeps {
            None => nominal.step(x, u, tau_dn),
            Some((prop, n)) => (0..*n).fold(x, |xs, i| prop.step(xs, u, &sc.disturbance, t + i as f64 * prop.h)),
        };
        let bad = |v: f64| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT;
        if bad(x.theta) || bad(x.omega) {
            return Err(Error::Divergence {
                step: k + 1,
                time: (k + 1) as f64 * ts,
            });
        }
        observer = observer.step(measured, u, &nominal).0;
    }

    Ok(Trace {
        ts,
        rows,
        gains,
        error_dynamics: ed,
    })
}

/// Runs scenarios concurrently; results come back in input order.
pub fn run_many(scenarios: &[Scenario]) -> Vec<Result<Trace>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = scenarios.iter().map(|sc| scope.spawn(move || run(sc))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation worker panicked"))
            .collect()
    })
}
