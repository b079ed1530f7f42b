//! Browser bindings for `triphase`: an equilibrium sweep along an isochore,
//! a hyperbolicity map and a shock-tube run, each driven by config text and
//! answering in JSON.

use serde_json::{json, Value};
use triphase::config::ConfigFile;
use triphase::equilibrium::{equilibrate_npt, equilibrate_pt};
use triphase::fv1d;
use triphase::hem::Mode;
use triphase::{cli, Error};
use wasm_bindgen::prelude::*;

fn parse_mode(mode: &str) -> Result<Mode, String> {
    match mode {
        "npt" => Ok(Mode::Npt),
        "pt" => Ok(Mode::Pt),
        other => Err(format!("unknown mode `{other}`")),
    }
}

fn linspace(min: f64, max: f64, count: usize) -> Result<Vec<f64>, String> {
    match count {
        0 => Err("count must be positive".into()),
        1 => Ok(vec![min]),
        n => Ok((0..n)
            .map(|i| min + (max - min) * i as f64 / (n - 1) as f64)
            .collect()),
    }
}

fn number(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn text_error(err: Error) -> String {
    err.to_string()
}

/// Equilibrium states at fixed `τ` for `count` energies in `[e_min, e_max]`.
/// Points where the solver fails carry an `error` field instead of values.
#[allow(clippy::too_many_arguments)]
pub fn equilibrium_sweep_json(
    config: &str,
    mode: &str,
    tau: f64,
    e_min: f64,
    e_max: f64,
    count: usize,
    phi_l: f64,
    phi_g: f64,
) -> Result<String, String> {
    let eos = ConfigFile::parse(config)
        .and_then(|c| c.eos())
        .map_err(text_error)?;
    let mode = parse_mode(mode)?;
    let points: Vec<Value> = linspace(e_min, e_max, count)?
        .into_iter()
        .map(|e| {
            let r = match mode {
                Mode::Npt => equilibrate_npt(&eos, tau, e, phi_l, phi_g),
                Mode::Pt => equilibrate_pt(&eos, tau, e, phi_g),
            };
            match r {
                Ok(r) => json!({
                    "e": e,
                    "p": number(r.pressure),
                    "T": number(r.temperature),
                    "c": number(r.sound_speed_squared().max(0.0).sqrt()),
                    "phi_l": r.comp.phi_l,
                    "phi_v": r.comp.phi_v,
                    "alpha_l": r.y_eq.alpha_l,
                    "regime": r.regime.as_str(),
                }),
                Err(err) => json!({ "e": e, "error": err.to_string() }),
            }
        })
        .collect();
    Ok(json!({ "tau": tau, "points": points }).to_string())
}

/// Eigenvalue check of the equilibrium model on an `n × n` grid in `(τ, e)`.
/// `status` is `pass`, `fail` or `skipped` for states outside the domain.
#[allow(clippy::too_many_arguments)]
pub fn hyperbolicity_map_json(
    config: &str,
    mode: &str,
    tau_min: f64,
    tau_max: f64,
    e_min: f64,
    e_max: f64,
    n: usize,
    phi_l: f64,
    phi_g: f64,
    u: f64,
) -> Result<String, String> {
    let eos = ConfigFile::parse(config)
        .and_then(|c| c.eos())
        .map_err(text_error)?;
    let mode = parse_mode(mode)?;
    let taus = linspace(tau_min, tau_max, n)?;
    let es = linspace(e_min, e_max, n)?;
    let rows = cli::hyperbolicity_scan(&eos, mode, &taus, &es, &[phi_l], &[phi_g], u);
    let cells: Vec<Value> = rows
        .iter()
        .map(|r| {
            let (c, err) = r.report.as_ref().map_or((Value::Null, Value::Null), |rep| {
                (number(rep.sound_speed), number(rep.spectrum_error))
            });
            json!({ "tau": r.tau, "e": r.e, "status": r.status(), "c": c, "spectrum_error": err })
        })
        .collect();
    Ok(json!({ "taus": taus, "es": es, "cells": cells }).to_string())
}

/// Runs the configured case to its end time and returns the final profiles.
pub fn riemann_run_json(config: &str) -> Result<String, String> {
    let run = ConfigFile::parse(config)
        .and_then(|c| c.run_config())
        .map_err(text_error)?;
    let out = fv1d::run(&run).map_err(text_error)?;
    let last = out.snapshots.last().ok_or("run produced no snapshot")?;
    let col = |f: fn(&fv1d::Primitives) -> f64| -> Vec<Value> {
        last.column(f).into_iter().map(number).collect()
    };
    Ok(json!({
        "model": run.model.as_str(),
        "t": last.t,
        "steps": last.step,
        "x": last.x,
        "rho": col(|r| r.rho),
        "u": col(|r| r.u),
        "p": col(|r| r.p),
        "T": col(|r| r.t),
        "phi_l": col(|r| r.comp.phi_l),
        "phi_v": col(|r| r.comp.phi_v),
        "summary": out.summary.to_text(),
    })
    .to_string())
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn equilibrium_sweep(
    config: &str,
    mode: &str,
    tau: f64,
    e_min: f64,
    e_max: f64,
    count: usize,
    phi_l: f64,
    phi_g: f64,
) -> Result<String, String> {
    equilibrium_sweep_json(config, mode, tau, e_min, e_max, count, phi_l, phi_g)
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn hyperbolicity_map(
    config: &str,
    mode: &str,
    tau_min: f64,
    tau_max: f64,
    e_min: f64,
    e_max: f64,
    n: usize,
    phi_l: f64,
    phi_g: f64,
    u: f64,
) -> Result<String, String> {
    hyperbolicity_map_json(
        config, mode, tau_min, tau_max, e_min, e_max, n, phi_l, phi_g, u,
    )
}

#[wasm_bindgen]
pub fn riemann_run(config: &str) -> Result<String, String> {
    riemann_run_json(config)
}
