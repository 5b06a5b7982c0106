//! Executes a resolved [`RunSpec`] and writes its artifacts.

use std::fs;
use std::io::Write;
use std::path::Path;

use uavsim_core::energy::{
    calibrate_drag_coeff, laser_breakeven_range, laser_harvest_power, propulsion_power, Breakeven,
};
use uavsim_core::engine::generate_for;
use uavsim_core::metrics::{aggregate, episode_metrics, movement_csv, summary_csv};
use uavsim_core::policy::MAX_LASER_RANGE;
use uavsim_core::{
    run_episode_with, run_monte_carlo, ConfigError, MonteCarloSpec, PowerModel, Sweep,
};

use crate::spec::{Mode, RunSpec};
use crate::CliError;

pub const THREADS_VAR: &str = "UAVSIM_THREADS";

/// Worker cap from the environment; `None` leaves rayon's default.
pub fn threads_from_env() -> Result<Option<usize>, ConfigError> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(ConfigError::invalid(
                THREADS_VAR,
                format!("expected a positive integer, got `{v}`"),
            )),
        },
    }
}

fn write_file(path: &Path, contents: &str, log: &mut dyn Write) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))?;
    writeln!(log, "wrote {}", path.display()).map_err(|e| CliError::io("<stdout>", e))
}

pub fn run(spec: &RunSpec, threads: Option<usize>, log: &mut dyn Write) -> Result<(), CliError> {
    spec.validate()?;
    if spec.mode == Mode::Calibrate {
        return calibrate(&spec.settings.power, spec, log).map_err(|e| CliError::io("<stdout>", e));
    }
    fs::create_dir_all(&spec.out).map_err(|e| CliError::io(&spec.out, e))?;
    match spec.mode {
        Mode::Episode => episodes(spec, log),
        _ => monte_carlo(spec, threads, log),
    }
}

fn episodes(spec: &RunSpec, log: &mut dyn Write) -> Result<(), CliError> {
    let settings = &spec.settings;
    let sc = generate_for(spec.seed, settings)?;
    write_file(
        &spec.out.join(format!("scenario_{}.json", spec.seed)),
        &sc.to_json(),
        log,
    )?;
    let mut rows = Vec::new();
    for &policy in &spec.policies {
        let trace = run_episode_with(&sc, policy, settings)?;
        let path = spec.out.join(format!("trace_{policy}_{}.jsonl", spec.seed));
        write_file(&path, &trace.to_jsonl(), log)?;
        rows.push(aggregate(
            policy,
            "none",
            None,
            &[episode_metrics(&trace, &sc)],
        ));
    }
    write_file(&spec.out.join("summary.csv"), &summary_csv(&rows), log)
}

fn monte_carlo(
    spec: &RunSpec,
    threads: Option<usize>,
    log: &mut dyn Write,
) -> Result<(), CliError> {
    let sweep = match spec.mode {
        Mode::SweepStations | Mode::SweepWindow => spec.sweep.clone(),
        _ => None,
    };
    // The stations sweep draws the largest site list and flies prefixes of it.
    let mut first = spec.settings.clone();
    if let Some(Sweep::Stations(ks)) = &sweep {
        first.world.stations = ks.iter().copied().max().unwrap_or(0);
    }
    let sc = generate_for(spec.seed, &first)?;
    let result = run_monte_carlo(&MonteCarloSpec {
        n_trials: spec.trials,
        base_seed: spec.seed,
        sweep,
        policies: spec.policies.clone(),
        settings: spec.settings.clone(),
        threads,
    })?;
    write_file(
        &spec.out.join(format!("scenario_{}.json", spec.seed)),
        &sc.to_json(),
        log,
    )?;
    write_file(
        &spec.out.join("summary.csv"),
        &summary_csv(&result.rows),
        log,
    )?;
    write_file(
        &spec.out.join("movement.csv"),
        &movement_csv(&result.movement),
        log,
    )
}

fn calibrate(model: &PowerModel, spec: &RunSpec, log: &mut dyn Write) -> std::io::Result<()> {
    let target = spec.settings.drone.v_cruise;
    match calibrate_drag_coeff(model, target) {
        Some(c) => writeln!(
            log,
            "calibrated drag_coeff = {c:.6} (minimum-power speed {target} m/s)"
        )?,
        None => writeln!(
            log,
            "calibrated drag_coeff = none (target {target} m/s not reachable)"
        )?,
    }

    let (mut argmin, mut best) = (0.0, f64::INFINITY);
    for i in 0..=2000 {
        let v = i as f64 * 0.01;
        let p = propulsion_power(model, v);
        if p < best {
            (argmin, best) = (v, p);
        }
    }
    let ok = (argmin - 6.2f64).abs() <= 0.3;
    writeln!(log, "configured drag_coeff = {}", model.drag_coeff)?;
    writeln!(
        log,
        "argmin speed = {argmin:.2} m/s on [0, 20] step 0.01 ({})",
        if ok {
            "ok, within 6.2 +/- 0.3"
        } else {
            "outside 6.2 +/- 0.3"
        }
    )?;
    writeln!(log, "hover power = {:.2} W", model.hover_power())?;
    writeln!(
        log,
        "cruise power = {:.2} W at {target} m/s",
        propulsion_power(model, target)
    )?;

    let link = &spec.settings.laser;
    writeln!(
        log,
        "laser harvest at 325 m = {:.2} W",
        laser_harvest_power(link, 325.0)
    )?;
    match laser_breakeven_range(link, model, MAX_LASER_RANGE) {
        Breakeven::Range(r) => writeln!(log, "laser break-even range = {r:.1} m"),
        Breakeven::NeverChargeable => writeln!(
            log,
            "laser break-even range = none (harvest never covers hover)"
        ),
        Breakeven::NeverDischarging(cap) => writeln!(log, "laser break-even range > {cap} m"),
    }
}
