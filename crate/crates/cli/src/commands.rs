//! Command implementations. Each returns a JSON report and whether every
//! enabled assertion passed.

use std::fs;
use std::path::Path;

use evoq_core::control::{
    certify_duality, closed_loop_residual, null_control, observability_constant,
    pointwise_certify, pointwise_null_control, ControlResult,
};
use evoq_core::io::write_signal;
use evoq_core::solver::timestep_oracle;
use evoq_core::{Direction, EvoProblem, WeightedSignal};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::VariantName;
use crate::harness;
use crate::instance::{CliError, Instance};
use crate::suite;

/// Outcome of one command.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub pass: bool,
    pub report: Value,
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn ensure_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))
}

fn save_signal(out: &Path, stem: &str, f: &WeightedSignal) -> Result<(), CliError> {
    write_signal(&out.join(stem), f).map_err(CliError::from)
}

/// Forward (`solve`) or ν-adjoint (`adjoint`) solve of the configured data.
pub fn solve(inst: &Instance, direction: Direction, out: Option<&Path>) -> Result<Outcome, CliError> {
    let weight = match direction {
        Direction::Forward => inst.system.nu,
        Direction::Adjoint => -inst.system.nu,
    };
    let rhs = inst.rhs(weight)?;
    let report = inst.system.operator()?.solve(direction, &rhs)?;
    let oracle = if inst.system.law.first_order().is_ok() {
        let p = match direction {
            Direction::Forward => EvoProblem::forward(inst.system.clone(), rhs)?,
            Direction::Adjoint => EvoProblem::adjoint(inst.system.clone(), rhs)?,
        };
        Some(timestep_oracle(&p)?.relative_distance(&report.solution)?)
    } else {
        None
    };
    let leakage_ok = report.support_leakage() <= report.wraparound_tolerance();
    let bound_ok = report.norm_ratio() <= 1.05 / inst.certificate.c_est;
    let value = json!({
        "instance": inst.name,
        "certificate": inst.recertify()?,
        "summary": report.summary,
        "oracle_relative_difference": oracle,
        "checks": {
            "support_leakage_within_wraparound": leakage_ok,
            "norm_ratio_within_bound": bound_ok,
        },
    });
    if let Some(out) = out {
        ensure_dir(out)?;
        save_signal(out, "solution", &report.solution)?;
        write_json(&out.join("report.json"), &value)?;
    }
    Ok(Outcome {
        pass: leakage_ok && bound_ok,
        report: value,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum VerifySuite {
    Duality,
    Causality,
    Reversal,
    NuIndependence,
}

pub fn verify(inst: &Instance, which: VerifySuite, out: Option<&Path>) -> Result<Outcome, CliError> {
    let tol = inst.tolerances;
    let seed = inst.config.seed;
    let (pass, measured, name) = match which {
        VerifySuite::Duality => {
            let sol = harness::solution_duality(inst, 100, seed)?;
            let sys = harness::system_adjoint(inst, 20, seed)?;
            (
                sol.max_relative_gap <= tol.pairing && sys.max_relative_gap <= tol.pairing,
                json!({
                    "duality_residual": sol.max_relative_gap,
                    "solution_operators": sol,
                    "system_operators": sys,
                    "tolerance": tol.pairing,
                }),
                "duality",
            )
        }
        VerifySuite::Causality => {
            let r = harness::causality(inst)?;
            (r.pass(1e-6), serde_json::to_value(r).expect("serializable"), "causality")
        }
        VerifySuite::Reversal => {
            let r = harness::reversal(inst, 8, seed)?;
            (
                r.max_discrepancy() < tol.conjugation,
                json!({ "report": r, "tolerance": tol.conjugation }),
                "reversal",
            )
        }
        VerifySuite::NuIndependence => {
            let nu = inst.system.nu;
            let [f, a] = harness::nu_independence(inst, nu, 2.0 * nu)?;
            (
                f.relative_difference < tol.cross_nu && a.relative_difference < tol.cross_nu,
                json!({ "forward": f, "adjoint": a, "tolerance": tol.cross_nu }),
                "nu-independence",
            )
        }
    };
    let value = json!({
        "instance": inst.name,
        "suite": name,
        "pass": pass,
        "certificate": inst.recertify()?,
        "measured": measured,
    });
    if let Some(out) = out {
        ensure_dir(out)?;
        write_json(&out.join(format!("verify_{name}.json")), &value)?;
    }
    Ok(Outcome {
        pass,
        report: value,
    })
}

fn control_json(r: &ControlResult) -> Value {
    serde_json::to_value(r.summary()).expect("serializable")
}

/// Null-control synthesis; infeasibility is reported, not failed.
pub fn control(
    inst: &Instance,
    variant: Option<VariantName>,
    certify: bool,
    out: Option<&Path>,
) -> Result<Outcome, CliError> {
    let mut inst = inst.clone();
    if let Some(v) = variant {
        let ctl = inst
            .config
            .control
            .as_mut()
            .ok_or_else(|| CliError::Schema("this command needs a [control] section".into()))?;
        ctl.variant = v;
    }
    let cp = inst.control_problem()?;
    let variant = inst.config.control.as_ref().map(|c| c.variant).expect("checked above");
    let mut pass = true;
    let mut value = json!({
        "instance": inst.name,
        "variant": variant,
        "certificate": inst.recertify()?,
    });
    let result = match variant {
        VariantName::Supported => {
            let r = null_control(&cp)?;
            if r.feasible {
                let closed = closed_loop_residual(&cp, &r.g)?;
                value["closed_loop_residual"] = json!(closed);
            }
            let obs = observability_constant(&cp)?;
            value["observability"] = serde_json::to_value(obs.summary()).expect("serializable");
            if let Some(out) = out {
                ensure_dir(out)?;
                write_json(&out.join("observability.json"), &obs.summary())?;
            }
            if certify {
                let cert = certify_duality(&cp)?;
                pass &= cert.verdict.agree;
                value["duality"] = serde_json::to_value(&cert.verdict).expect("serializable");
            }
            r
        }
        VariantName::Pointwise => {
            let r = pointwise_null_control(&cp)?;
            if certify {
                let cert = pointwise_certify(&cp)?;
                pass &= cert.consistent;
                value["pointwise_certificate"] = json!({
                    "feasible_per_state": cert.feasible_per_state,
                    "douglas_included": cert.douglas.included,
                    "consistent": cert.consistent,
                });
            }
            r
        }
    };
    value["control"] = control_json(&result);
    if let Some(out) = out {
        ensure_dir(out)?;
        save_signal(out, "control", &result.g)?;
        write_json(&out.join("control.json"), &value)?;
    }
    Ok(Outcome {
        pass,
        report: value,
    })
}

/// Runs the acceptance suite, or one criterion of it.
pub fn acceptance(criterion: Option<u8>, out: Option<&Path>) -> Result<Outcome, CliError> {
    let report = match criterion {
        Some(id) => {
            if !suite::CRITERIA.iter().any(|(i, _)| *i == id) {
                return Err(CliError::Schema(format!("no criterion {id}; expected 1..=10")));
            }
            let row = suite::run_criterion(id);
            suite::SuiteReport {
                pass: row.pass,
                rows: vec![row],
            }
        }
        None => suite::run_acceptance(),
    };
    let value = serde_json::to_value(&report).expect("serializable");
    if let Some(out) = out {
        ensure_dir(out)?;
        write_json(&out.join("acceptance.json"), &value)?;
    }
    Ok(Outcome {
        pass: report.pass,
        report: value,
    })
}
