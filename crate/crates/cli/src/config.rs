use std::collections::HashSet;
use std::fs;
use std::path::Path;

use doblab::observer::ObserverSpec;
use doblab::sim::{Scenario, SimMode, Timing};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::{usage, CliError, CliResult};

pub const SEED_ENV: &str = "DOBLAB_SEED";

fn load_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_scenario(path: &Path) -> CliResult<Scenario> {
    load_json(path)
}

/// Overrides applied on top of a scenario file before it runs.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<ModeArg>,
    pub substeps: Option<usize>,
    pub observer: Option<ObserverSpec>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Discrete,
    Continuous,
}

impl Overrides {
    pub fn apply(&self, sc: &mut Scenario) -> CliResult<()> {
        match (self.mode, self.substeps) {
            (Some(ModeArg::Discrete), Some(_)) => {
                return Err(usage("--substeps only applies to continuous mode"));
            }
            (Some(ModeArg::Discrete), None) => sc.mode = SimMode::DiscreteNominal,
            (Some(ModeArg::Continuous), n) => {
                let current = match sc.mode {
                    SimMode::ContinuousTruth { substeps } => substeps,
                    SimMode::DiscreteNominal => doblab::sim::DEFAULT_SUBSTEPS,
                };
                sc.mode = SimMode::ContinuousTruth {
                    substeps: n.unwrap_or(current),
                }
            }
            (None, Some(n)) => match &mut sc.mode {
                SimMode::ContinuousTruth { substeps } => *substeps = n,
                SimMode::DiscreteNominal => {
                    return Err(usage("--substeps given but the scenario runs in discrete mode"));
                }
            },
            (None, None) => {}
        }
        if let Some(obs) = self.observer {
            sc.observer = obs;
        }
        if let Some(seed) = self.seed {
            sc.seed = seed;
        }
        sc.validate()?;
        Ok(())
    }
}

/// Reads the seed override from the environment, if set.
pub fn seed_from_env() -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(usage(format!("{SEED_ENV}: {e}"))),
    }
}

/// A comparison: one shared scenario and the observer variants to run on it.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// Free-form remarks; ignored.
    #[serde(default)]
    #[allow(dead_code)]
    pub notes: Vec<String>,
    pub base: Scenario,
    pub variants: Vec<Variant>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    #[serde(default)]
    pub label: Option<String>,
    pub observer: ObserverSpec,
    #[serde(default)]
    pub timing: Option<Timing>,
    #[serde(default)]
    pub mode: Option<SimMode>,
}

fn default_label(obs: &ObserverSpec) -> &'static str {
    match obs {
        ObserverSpec::None => "pd_only",
        ObserverSpec::Conventional { .. } => "conventional",
        ObserverSpec::Hp { .. } => "hp",
    }
}

fn valid_label(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl CompareConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        load_json(path)
    }

    /// Expands the variants into labelled scenarios, applying `overrides` to each.
    pub fn expand(&self, overrides: &Overrides) -> CliResult<Vec<(String, Scenario)>> {
        if self.variants.len() < 2 {
            return Err(usage("compare needs at least 2 variants"));
        }
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(self.variants.len());
        for (i, v) in self.variants.iter().enumerate() {
            let label = match &v.label {
                Some(l) if !valid_label(l) => {
                    return Err(usage(format!(
                        "variant label {l:?} may only contain letters, digits, '_' or '-'"
                    )))
                }
                Some(l) if seen.contains(l) => return Err(usage(format!("duplicate variant label {l:?}"))),
                Some(l) => l.clone(),
                None => {
                    let base = default_label(&v.observer);
                    if seen.contains(base) {
                        format!("{base}_{}", i + 1)
                    } else {
                        base.to_string()
                    }
                }
            };
            seen.insert(label.clone());

            let mut sc = self.base.clone();
            sc.observer = v.observer;
            if let Some(t) = v.timing {
                sc.timing = t;
            }
            if let Some(m) = v.mode {
                sc.mode = m;
            }
            let mut ov = overrides.clone();
            ov.observer = None;
            ov.apply(&mut sc)?;
            out.push((label, sc));
        }
        let first = out[0].1.timing;
        for (label, sc) in &out[1..] {
            if sc.timing.ts != first.ts {
                return Err(usage(format!(
                    "variant {label} uses Ts={} but {} uses Ts={}",
                    sc.timing.ts, out[0].0, first.ts
                )));
            }
            if sc.timing.duration != first.duration {
                return Err(usage(format!(
                    "variant {label} uses duration={} but {} uses duration={}",
                    sc.timing.duration, out[0].0, first.duration
                )));
            }
        }
        Ok(out)
    }
}
