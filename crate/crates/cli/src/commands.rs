use std::fs;
use std::path::Path;

use doblab::metrics::{evaluate, MetricsReport};
use doblab::numkit::{EigPair2, Mat2, Vec2};
use doblab::observer::{conv_gain, error_dynamics, hp_gains, Eigenvalue, ObserverGains, ObserverSpec, StabilityPolicy};
use doblab::plant::{build_continuous, discretize as zoh, DiscreteModel, ServoParams};
use doblab::sim::{run, run_many, Trace};
use num_complex::Complex64;

use crate::config::{seed_from_env, CompareConfig, Overrides};
use crate::error::{usage, CliError, CliResult};
use crate::output::{
    gains_text, metrics_text, summary_table, write_compare_csv, write_text, write_trace_csv, SummaryEntry,
};
use crate::{Emit, ObserverArgs, ObserverKind, PlantArgs, RunArgs};

/// Spectral radii within this of 0 or 1 are reported as deadbeat or marginal.
const VERDICT_TOL: f64 = 1e-9;

fn model(p: &PlantArgs) -> CliResult<DiscreteModel> {
    let params = ServoParams::new(p.inertia, p.friction)?;
    Ok(zoh(&build_continuous(&params)?, p.ts)?)
}

/// 12 significant digits.
fn sig12(v: f64) -> String {
    format!("{v:.11e}")
}

fn mat_lines(name: &str, m: &Mat2) -> String {
    format!(
        "{name} =\n  [{}, {}]\n  [{}, {}]\n",
        sig12(m.0[0][0]),
        sig12(m.0[0][1]),
        sig12(m.0[1][0]),
        sig12(m.0[1][1])
    )
}

fn vec_lines(name: &str, v: &Vec2) -> String {
    format!("{name} =\n  [{}]\n  [{}]\n", sig12(v.0[0]), sig12(v.0[1]))
}

pub fn discretize(p: &PlantArgs) -> CliResult<()> {
    let dm = model(p)?;
    print!("{}", mat_lines("Ad", dm.ad()));
    print!("{}", vec_lines("Bd", dm.bd()));
    print!("{}", vec_lines("Dd", dm.dd()));
    Ok(())
}

fn parse_eigenvalue(flag: &str, s: &str) -> CliResult<Eigenvalue> {
    let c: Complex64 = s.trim().parse().map_err(|_| {
        usage(format!(
            "{flag}: cannot parse {s:?} as a real or complex number (e.g. 0.3, 0.2+0.4i)"
        ))
    })?;
    Ok(if c.im == 0.0 {
        Eigenvalue::Real(c.re)
    } else {
        Eigenvalue::Complex { re: c.re, im: c.im }
    })
}

fn observer_spec(kind: ObserverKind, a: &ObserverArgs) -> CliResult<ObserverSpec> {
    let lambdas = a.lambda1.is_some() || a.lambda2.is_some();
    match kind {
        ObserverKind::None => {
            if a.k.is_some() || lambdas {
                return Err(usage("--k/--lambda1/--lambda2 do not apply to --observer none"));
            }
            Ok(ObserverSpec::None)
        }
        ObserverKind::Conventional => {
            if lambdas {
                return Err(usage("the conventional observer takes --k, not --lambda1/--lambda2"));
            }
            let k = a.k.ok_or_else(|| usage("--observer conventional requires --k"))?;
            Ok(ObserverSpec::Conventional {
                k,
                allow_unstable: a.allow_unstable,
            })
        }
        ObserverKind::Hp => {
            if a.k.is_some() {
                return Err(usage("the hp observer takes --lambda1/--lambda2, not --k"));
            }
            let (Some(l1), Some(l2)) = (&a.lambda1, &a.lambda2) else {
                return Err(usage("--observer hp requires --lambda1 and --lambda2"));
            };
            Ok(ObserverSpec::Hp {
                lambda1: parse_eigenvalue("--lambda1", l1)?,
                lambda2: parse_eigenvalue("--lambda2", l2)?,
                allow_unstable: a.allow_unstable,
            })
        }
    }
}

fn observer_override(a: &ObserverArgs) -> CliResult<Option<ObserverSpec>> {
    match a.observer {
        Some(kind) => observer_spec(kind, a).map(Some),
        None if a.k.is_some() || a.lambda1.is_some() || a.lambda2.is_some() || a.allow_unstable => {
            Err(usage("observer parameters need --observer"))
        }
        None => Ok(None),
    }
}

fn verdict(radius: f64) -> &'static str {
    if radius <= VERDICT_TOL {
        "stable (deadbeat)"
    } else if radius < 1.0 - VERDICT_TOL {
        "stable"
    } else if radius <= 1.0 + VERDICT_TOL {
        "marginal"
    } else {
        "unstable"
    }
}

pub fn tune(p: &PlantArgs, a: &ObserverArgs) -> CliResult<()> {
    let dm = model(p)?;
    let kind = a
        .observer
        .ok_or_else(|| usage("tune requires --observer conventional|hp"))?;
    let gains = match observer_spec(kind, a)? {
        ObserverSpec::None => return Err(usage("tune requires --observer conventional|hp")),
        ObserverSpec::Conventional { k, .. } => ObserverGains::Conventional {
            gain: conv_gain(k, dm.dd())?,
        },
        ObserverSpec::Hp { lambda1, lambda2, .. } => {
            let eigs = EigPair2(lambda1.to_complex(), lambda2.to_complex());
            // Report unstable requests too; the verdict flags them.
            let (gain1, gain2) = hp_gains(&eigs, dm.dd(), StabilityPolicy::Allow)?;
            ObserverGains::Hp { gain1, gain2 }
        }
    };
    let ed = error_dynamics(&gains, dm.dd());
    println!(
        "observer: {}",
        if matches!(gains, ObserverGains::Hp { .. }) {
            "hp"
        } else {
            "conventional"
        }
    );
    println!("{}", gains_text(&gains));
    match gains {
        ObserverGains::Conventional { .. } => println!("coefficient: {}", sig12(ed.matrix.get(0, 0))),
        ObserverGains::Hp { .. } => {
            let m = &ed.matrix;
            println!(
                "M = [[{}, {}], [{}, {}]]",
                sig12(m.0[0][0]),
                sig12(m.0[0][1]),
                sig12(m.0[1][0]),
                sig12(m.0[1][1])
            );
            let e = ed.eigenvalues();
            println!("eigenvalues: {}, {}", fmt_complex(e.0), fmt_complex(e.1));
        }
    }
    println!("spectral_radius: {}", sig12(ed.spectral_radius));
    let v = verdict(ed.spectral_radius);
    println!("verdict: {v}");
    if !v.starts_with("stable") {
        println!("warning: error dynamics are {v}; estimates will not converge");
    }
    Ok(())
}

fn fmt_complex(c: Complex64) -> String {
    if c.im == 0.0 {
        sig12(c.re)
    } else {
        format!(
            "{}{}{}i",
            sig12(c.re),
            if c.im < 0.0 { "-" } else { "+" },
            sig12(c.im.abs())
        )
    }
}

fn overrides(r: &RunArgs, observer: Option<ObserverSpec>) -> CliResult<Overrides> {
    Ok(Overrides {
        mode: r.mode,
        substeps: r.substeps,
        observer,
        seed: seed_from_env()?,
    })
}

fn prepare_out(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_path_buf(),
        source,
    })
}

fn metrics(trace: &Trace, window: f64) -> CliResult<MetricsReport> {
    evaluate(trace, window).map_err(|e| usage(format!("--ss-window: {e}")))
}

pub fn sim(r: &RunArgs, a: &ObserverArgs) -> CliResult<()> {
    let obs = observer_override(a)?;
    let mut sc = crate::config::load_scenario(&r.config)?;
    overrides(r, obs)?.apply(&mut sc)?;
    let trace = run(&sc)?;
    let m = metrics(&trace, r.ss_window)?;
    let label = sc.observer.label();
    prepare_out(&r.out)?;
    if r.emit.contains(&Emit::Trace) {
        write_trace_csv(&r.out.join("trace.csv"), &trace)?;
    }
    let text = metrics_text(&label, &trace, &m);
    if r.emit.contains(&Emit::Metrics) {
        write_text(&r.out.join("metrics.txt"), &text)?;
    }
    if r.emit.contains(&Emit::Summary) {
        print!("{text}");
    }
    Ok(())
}

pub fn compare(r: &RunArgs) -> CliResult<()> {
    let cfg = CompareConfig::load(&r.config)?;
    let variants = cfg.expand(&overrides(r, None)?)?;
    let scenarios: Vec<_> = variants.iter().map(|(_, sc)| sc.clone()).collect();
    let mut runs = Vec::with_capacity(variants.len());
    for ((label, _), result) in variants.iter().zip(run_many(&scenarios)) {
        let trace = result.map_err(|e| match e {
            doblab::Error::Divergence { .. } => CliError::Model(e),
            other => usage(format!("variant {label}: {other}")),
        })?;
        runs.push((label.clone(), trace));
    }
    let reports = runs
        .iter()
        .map(|(_, t)| metrics(t, r.ss_window))
        .collect::<CliResult<Vec<_>>>()?;

    prepare_out(&r.out)?;
    if r.emit.contains(&Emit::Trace) {
        write_compare_csv(&r.out.join("compare.csv"), &runs)?;
    }
    if r.emit.contains(&Emit::Metrics) {
        let text: Vec<String> = runs
            .iter()
            .zip(&reports)
            .map(|((label, t), m)| metrics_text(label, t, m))
            .collect();
        write_text(&r.out.join("metrics.txt"), &text.join("\n"))?;
    }
    if r.emit.contains(&Emit::Summary) {
        let entries: Vec<SummaryEntry> = runs
            .iter()
            .zip(&reports)
            .map(|((label, t), m)| SummaryEntry {
                label,
                metrics: *m,
                dynamics: t.error_dynamics.as_ref(),
            })
            .collect();
        let table = summary_table(&entries);
        write_text(&r.out.join("summary.txt"), &table)?;
        print!("{table}");
    }
    Ok(())
}
