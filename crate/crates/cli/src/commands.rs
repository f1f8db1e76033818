//! Command implementations. Each writes its files into the output directory and
//! returns the run summary plus the names of any failed checks.

use std::path::Path;

use fwpath::bounds::admissibility_band;
use fwpath::instanton::{
    analytic_phi_of_theta, analytic_uniaxial_action, check_invariants, compare_to_oracle, InvariantReport,
};
use fwpath::stats::{ks_p_value, ks_statistic, mean, silverman_test, std_dev};
use fwpath::*;
use std::result::Result;
use serde_json::{json, Value};

use crate::acceptance;
use crate::config::{planar_space, planar_stable, Command, Model, ModelConfig, RunConfig};
use crate::error::CliError;
use crate::output::{jnum, num, write_json, Table};

pub struct Outcome {
    pub summary: Value,
    pub failures: Vec<String>,
}

impl Outcome {
    fn ok(summary: Value) -> Self {
        Self { summary, failures: Vec::new() }
    }
}

/// Runs the resolved config, writing `config.toml`, the command's data files and
/// `summary.json` into `out`.
pub fn execute(cfg: &RunConfig, out: &Path) -> Result<Value, CliError> {
    let command = cfg.command.ok_or_else(|| CliError::Validation("no command".into()))?;
    std::fs::create_dir_all(out)?;
    let embedded = cfg.embedded().to_toml();
    std::fs::write(out.join("config.toml"), &embedded)?;
    let outcome = match command {
        Command::Instanton => instanton(cfg, out)?,
        Command::NormMap => norm_map(cfg, out)?,
        Command::Bifurcation => bifurcation(cfg, out)?,
        Command::Langevin => langevin(cfg, out)?,
        Command::OracleCheck => oracle_check(cfg, out)?,
        Command::Report => report(out, &acceptance::SuiteOptions::default())?,
    };
    let mut summary = outcome.summary;
    summary["command"] = json!(command.label());
    summary["resolved_config"] = json!(embedded);
    summary["failed"] = json!(outcome.failures);
    write_json(&out.join("summary.json"), summary.clone())?;
    if outcome.failures.is_empty() {
        Ok(summary)
    } else {
        Err(CliError::Criteria(outcome.failures))
    }
}

fn model_of(cfg: &RunConfig) -> Result<(ModelConfig, Model), CliError> {
    let m = cfg.model.ok_or_else(|| CliError::Validation("missing [model] block".into()))?;
    Ok((m, m.build()?))
}

fn trajectory_table(trajectories: &[Trajectory]) -> Table {
    let mut t = Table::new(&[
        "trajectory", "t", "s", "chart", "x0", "x1", "p0", "p1", "pos_x", "pos_y", "pos_z", "mom_x", "mom_y", "mom_z",
        "action", "energy", "drift_norm_sq", "speed_sq", "psi", "gamma",
    ]);
    for (k, tr) in trajectories.iter().enumerate() {
        for p in &tr.points {
            t.push(vec![
                k.to_string(),
                num(p.t),
                num(p.s),
                p.chart.to_string(),
                num(p.x[0]),
                num(p.x[1]),
                num(p.p[0]),
                num(p.p[1]),
                num(p.position[0]),
                num(p.position[1]),
                num(p.position[2]),
                num(p.momentum[0]),
                num(p.momentum[1]),
                num(p.momentum[2]),
                num(p.action),
                num(p.energy),
                num(p.drift_norm_sq),
                num(p.speed_sq),
                num(p.psi),
                num(p.gamma),
            ]);
        }
    }
    t
}

fn fan_table(space: &dyn PhaseSpace, trajectories: &[Trajectory]) -> (Table, InvariantReport) {
    let mut t = Table::new(&[
        "trajectory", "seed_angle", "stop", "action", "points", "closest_approach", "energy_residual", "speed_mismatch",
        "lorentz_mismatch",
    ]);
    let mut worst = InvariantReport { energy: 0.0, speed: 0.0, lorentz: 0.0 };
    for (k, tr) in trajectories.iter().enumerate() {
        let r = check_invariants(space, tr, 1);
        worst.energy = worst.energy.max(r.energy);
        worst.speed = worst.speed.max(r.speed);
        worst.lorentz = worst.lorentz.max(r.lorentz);
        t.push(vec![
            k.to_string(),
            num(tr.seed.angle),
            tr.stop.label().into(),
            num(tr.action()),
            tr.points.len().to_string(),
            tr.closest_approach.map(num).unwrap_or_default(),
            num(r.energy),
            num(r.speed),
            num(r.lorentz),
        ]);
    }
    (t, worst)
}

fn crossing_table(report: &CrossingReport) -> Table {
    let mut t = Table::new(&["first", "second", "x", "y", "z", "momentum_mismatch"]);
    for c in &report.crossings {
        t.push(vec![
            c.first.to_string(),
            c.second.to_string(),
            num(c.point[0]),
            num(c.point[1]),
            num(c.point[2]),
            num(c.momentum_mismatch),
        ]);
    }
    t
}

fn invariants_json(r: &InvariantReport) -> Value {
    json!({ "energy": jnum(r.energy), "speed": jnum(r.speed), "lorentz": jnum(r.lorentz) })
}

fn fan_json(fan: &Fan) -> Value {
    json!({
        "trajectories": fan.trajectories.len(),
        "seed_mode": fan.seed_mode,
        "fallback_reason": fan.fallback_reason,
        "rejected": fan.rejected.iter().map(|(k, why)| json!({"seed": k, "reason": why})).collect::<Vec<_>>(),
        "stops": fan.trajectories.iter().map(|t| t.stop.label()).collect::<Vec<_>>(),
    })
}

fn instanton(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let (mc, model) = model_of(cfg)?;
    match model {
        Model::MaierStein(m) => planar_instanton(&planar_space(m), planar_stable(&model), cfg, out),
        Model::DoubleWell => planar_instanton(&planar_space(DoubleWell), planar_stable(&model), cfg, out),
        Model::Macrospin(m) => sphere_instanton(&mc, m, cfg, out),
    }
    .map(|mut o| {
        o.summary["model"] = json!(mc.name());
        o
    })
}

/// Fan from the well at `(1, 0)` plus the least-action path into the saddle at the origin.
fn planar_instanton(space: &dyn PhaseSpace, stable: Vec2, cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let problem = EscapeProblem::new(space, 0, stable).with_target(Vec3::zeros());
    let fan = fan_shoot(&problem, &cfg.solver)?;
    let crossings = detect_crossings(&fan.trajectories, &cfg.crossing);
    let opt = optimal_escape(&problem, &cfg.solver)?;
    let best = opt.optimal();

    trajectory_table(&fan.trajectories).write(&out.join("trajectories.csv"))?;
    trajectory_table(&opt.candidates).write(&out.join("candidates.csv"))?;
    crossing_table(&crossings).write(&out.join("crossings.csv"))?;
    let (table, fan_inv) = fan_table(space, &fan.trajectories);
    table.write(&out.join("fan.csv"))?;
    let (_, opt_inv) = fan_table(space, &opt.candidates);

    Ok(Outcome::ok(json!({
        "fan": fan_json(&fan),
        "crossings": crossings.len(),
        "crossing_match_tol": jnum(crossings.match_tol),
        "optimal": {
            "candidate": opt.optimal_index,
            "action": jnum(best.action()),
            "max_abs_y": jnum(best.max_abs_y()),
            "on_axis": best.max_abs_y() <= 1e-3,
            "stop": best.stop.label(),
        },
        "candidates": opt.candidates.iter().map(|t| json!({
            "action": jnum(t.action()), "max_abs_y": jnum(t.max_abs_y()), "stop": t.stop.label(),
        })).collect::<Vec<_>>(),
        "invariants": { "fan": invariants_json(&fan_inv), "candidates": invariants_json(&opt_inv) },
    })))
}

fn oracle_effective(cfg: &RunConfig, model: &Macrospin) -> bool {
    cfg.oracle.as_ref().and_then(|o| o.effective).unwrap_or(model.omega != 0.0)
}

fn oracle_window(cfg: &RunConfig) -> Option<(f64, f64)> {
    cfg.oracle.as_ref().and_then(|o| o.window).map(|w| (w[0], w[1]))
}

fn sphere_fan(model: Macrospin, cfg: &RunConfig) -> Result<(SphereSpace, Fan, CrossingReport), CliError> {
    let space = SphereSpace::new(model);
    let m0 = model.stable_point()?;
    let chart = space.best_chart(&m0);
    let problem = EscapeProblem::new(&space, chart, space.locate(chart, &m0));
    let fan = fan_shoot(&problem, &cfg.solver)?;
    let crossings = detect_crossings(&fan.trajectories, &CrossingOptions { spherical: true, ..cfg.crossing });
    Ok((space, fan, crossings))
}

fn sphere_instanton(mc: &ModelConfig, model: Macrospin, cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let (space, fan, crossings) = sphere_fan(model, cfg)?;
    trajectory_table(&fan.trajectories).write(&out.join("trajectories.csv"))?;
    crossing_table(&crossings).write(&out.join("crossings.csv"))?;
    let (table, inv) = fan_table(&space, &fan.trajectories);
    table.write(&out.join("fan.csv"))?;

    let optimal = fan.least_action(StopReason::Separatrix);
    let mut summary = json!({
        "fan": fan_json(&fan),
        "crossings": crossings.len(),
        "crossing_match_tol": jnum(crossings.match_tol),
        "optimal": optimal.map(|t| json!({
            "trajectory": fan.trajectories.iter().position(|u| std::ptr::eq(u, t)),
            "action": jnum(t.action()),
            "stop": t.stop.label(),
        })),
        "all_reach_separatrix": fan.trajectories.iter().all(|t| t.stop == StopReason::Separatrix),
        "invariants": invariants_json(&inv),
        "current": jnum(model.current),
        "omega": jnum(model.omega),
    });
    if matches!(mc, ModelConfig::Macrospin { anisotropy, .. } if *anisotropy == 0.0) {
        let effective = oracle_effective(cfg, &model);
        let window = oracle_window(cfg);
        let devs: Vec<Value> = fan
            .trajectories
            .iter()
            .map(|t| match compare_to_oracle(t, &model, effective, window) {
                Ok(d) => json!({"rms": jnum(d.rms), "max_abs": jnum(d.max_abs), "points": d.points}),
                Err(e) => json!({"error": e.to_string()}),
            })
            .collect();
        let worst = devs.iter().filter_map(|d| d["rms"].as_f64()).fold(0.0, f64::max);
        summary["oracle"] = json!({ "effective": effective, "max_rms": jnum(worst), "trajectories": devs });
    }
    Ok(Outcome::ok(summary))
}

fn extrema_table(rows: &[(Option<f64>, Extremum)]) -> Table {
    let mut t = Table::new(&[
        "parameter", "x", "y", "kind", "value", "lambda_min", "lambda_max", "gradient_norm", "refined", "degenerate",
    ]);
    for (param, e) in rows {
        t.push(vec![
            param.map(num).unwrap_or_default(),
            num(e.location[0]),
            num(e.location[1]),
            e.kind.label().into(),
            num(e.value),
            num(e.hessian_eigenvalues[0]),
            num(e.hessian_eigenvalues[1]),
            num(e.gradient_norm),
            e.refined.to_string(),
            e.degenerate.to_string(),
        ]);
    }
    t
}

fn extremum_json(e: &Extremum) -> Value {
    json!({
        "x": jnum(e.location[0]),
        "y": jnum(e.location[1]),
        "kind": e.kind.label(),
        "value": jnum(e.value),
        "hessian_eigenvalues": [jnum(e.hessian_eigenvalues[0]), jnum(e.hessian_eigenvalues[1])],
        "refined": e.refined,
        "degenerate": e.degenerate,
    })
}

fn counts_json(extrema: &[Extremum]) -> Value {
    let count = |k: ExtremumKind| extrema.iter().filter(|e| e.kind == k).count();
    json!({
        "min": count(ExtremumKind::Min),
        "max": count(ExtremumKind::Max),
        "saddle": count(ExtremumKind::Saddle),
    })
}

fn norm_map(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let (mc, model) = model_of(cfg)?;
    let grid = cfg.grid.unwrap_or_else(|| mc.default_grid());
    let landscape = match &model {
        Model::MaierStein(m) => analyze_landscape(m, &grid)?,
        Model::DoubleWell => analyze_landscape(&DoubleWell, &grid)?,
        Model::Macrospin(m) => {
            let mut l = macrospin_norm_grid(m, &grid)?;
            l.extrema = find_and_classify_extrema(&m.chart(PolarAxis::Z), &l);
            l
        }
    };

    let mut header = vec!["i", "j", "x", "y", "norm_sq"];
    if landscape.terms.is_some() {
        header.extend(["m_x", "m_y", "m_z", "precessional", "nongradient", "remainder"]);
    }
    let mut t = Table::new(&header);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let x = grid.node(i, j);
            let mut row = vec![i.to_string(), j.to_string(), num(x[0]), num(x[1]), num(landscape.value(i, j))];
            if let (Some(terms), Some(emb)) = (&landscape.terms, &landscape.embedded) {
                let k = j * grid.nx + i;
                let (m, n) = (emb[k], terms[k]);
                row.extend([m[0], m[1], m[2], n.precessional, n.nongradient, n.remainder].map(num));
            }
            t.push(row);
        }
    }
    t.write(&out.join("landscape.csv"))?;
    let rows: Vec<_> = landscape.extrema.iter().map(|e| (None, *e)).collect();
    extrema_table(&rows).write(&out.join("extrema.csv"))?;

    let mut summary = json!({
        "model": mc.name(),
        "grid": grid,
        "counts": counts_json(&landscape.extrema),
        "extrema": landscape.extrema.iter().map(extremum_json).collect::<Vec<_>>(),
    });
    if let Model::Macrospin(m) = model {
        let band = admissibility_band(m.anisotropy, m.omega, m.alpha)?;
        summary["admissibility_band"] = json!({
            "regime": band.regime.label(),
            "intervals": band.intervals.iter().map(|(a, b)| [jnum(*a), jnum(*b)]).collect::<Vec<_>>(),
            "caution": band.caution,
        });
    }
    Ok(Outcome::ok(summary))
}

fn bifurcation(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let b = cfg.bifurcation.clone().ok_or_else(|| CliError::Validation("missing [bifurcation] block".into()))?;
    let grid = cfg.grid.unwrap_or_else(|| ModelConfig::MaierStein { alpha: 1.0 }.default_grid());
    let report = bifurcation_scan(
        MaierStein::new,
        Vec2::new(b.start[0], b.start[1]),
        (b.range[0], b.range[1]),
        b.steps,
        b.tables.then_some(&grid),
    )?;

    let mut t = Table::new(&["parameter", "x", "y", "kind", "lambda_min", "lambda_max"]);
    let mut rows = Vec::new();
    for s in &report.steps {
        let e = &s.tracked;
        t.push(vec![
            num(s.parameter),
            num(e.location[0]),
            num(e.location[1]),
            e.kind.label().into(),
            num(e.hessian_eigenvalues[0]),
            num(e.hessian_eigenvalues[1]),
        ]);
        rows.extend(s.extrema.iter().map(|e| (Some(s.parameter), *e)));
    }
    t.write(&out.join("steps.csv"))?;
    extrema_table(&rows).write(&out.join("extrema.csv"))?;

    Ok(Outcome::ok(json!({
        "model": "maier_stein",
        "parameter": "alpha",
        "found": report.found(),
        "threshold": report.threshold.map(jnum),
        "bracket": report.bracket.map(|(a, c)| [jnum(a), jnum(c)]),
        "steps": report.steps.iter().map(|s| json!({
            "parameter": jnum(s.parameter),
            "tracked": extremum_json(&s.tracked),
            "counts": counts_json(&s.extrema),
        })).collect::<Vec<_>>(),
    })))
}

fn langevin(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let (mc, model) = model_of(cfg)?;
    let sim = cfg.langevin.clone().ok_or_else(|| CliError::Validation("missing [langevin] block".into()))?;
    let result = match &model {
        Model::MaierStein(m) => simulate_escapes(m, &sim)?,
        Model::Macrospin(m) => simulate_escapes(m, &sim)?,
        Model::DoubleWell => return Err(CliError::Validation("langevin supports maier_stein and macrospin".into())),
    };

    let mut t = Table::new(&["realization", "exit_time", "exit_x", "exit_y", "exit_z", "probe_x", "probe_y", "probe_z"]);
    for e in &result.events {
        let mut row = vec![e.realization.to_string(), num(e.exit_time)];
        row.extend(e.exit_point.map(num));
        row.extend(match e.probe_point {
            Some(p) => p.map(num),
            None => Default::default(),
        });
        t.push(row);
    }
    t.write(&out.join("events.csv"))?;
    if sim.path_stride.is_some() {
        let mut p = Table::new(&["realization", "t", "x", "y", "z"]);
        for e in &result.events {
            for (time, s) in &e.path {
                p.push(vec![e.realization.to_string(), num(*time), num(s[0]), num(s[1]), num(s[2])]);
            }
        }
        p.write(&out.join("paths.csv"))?;
    }

    let times: Vec<f64> = result.events.iter().map(|e| e.exit_time).collect();
    let stats = |v: &[f64]| {
        if v.len() >= 2 {
            json!({"mean": jnum(mean(v)), "std_dev": jnum(std_dev(v)), "samples": v.len()})
        } else {
            json!({"samples": v.len()})
        }
    };
    let mut summary = json!({
        "model": mc.name(),
        "noise": jnum(sim.noise),
        "realizations": sim.realizations,
        "escaped": result.events.len(),
        "censored": { "count": result.censored.len(), "realizations": result.censored },
        "aborted": result.aborted.iter().map(|(k, why)| json!({"realization": k, "reason": why})).collect::<Vec<_>>(),
        "escape_fraction": jnum(result.escape_fraction()),
        "exit_time": stats(&times),
    });

    if let Some(probe) = sim.probe {
        let modality = cfg.modality.clone().unwrap_or_default();
        let coordinate = if probe.axis == 1 { 0 } else { 1 };
        let values = result.probe_values(coordinate);
        let mut record = json!({ "axis": probe.axis, "level": jnum(probe.level), "coordinate": coordinate });
        record["values"] = stats(&values);
        if values.len() >= 3 {
            match silverman_test(&values, modality.bootstrap, sim.seed) {
                Ok(test) => {
                    record["modality"] = json!({
                        "critical_bandwidth": jnum(test.critical_bandwidth),
                        "p_value": jnum(test.p_value),
                        "bootstrap": test.bootstrap,
                        "confidence": jnum(modality.confidence),
                        "multimodal": test.multimodal_at(modality.confidence),
                    })
                }
                Err(e) => record["modality"] = json!({"error": e.to_string()}),
            }
        }
        summary["probe"] = record;
    }

    if let (Some(st), Model::Macrospin(m)) = (&cfg.stationary, &model) {
        let energies = sample_stationary(m, &sim, st.burn_in, st.every, st.per_realization, |s: &Vec3| m.energy(s))?;
        let law = StationaryEnergyLaw::new(m, sim.noise, st.resolution)?;
        let naive = StationaryEnergyLaw::with_beta(m, 1.0 / sim.noise, st.resolution)?;
        let d = ks_statistic(&energies, |e| law.cdf(e));
        let d_naive = ks_statistic(&energies, |e| naive.cdf(e));
        let mut s = Table::new(&["sample", "energy"]);
        for (k, e) in energies.iter().enumerate() {
            s.push(vec![k.to_string(), num(*e)]);
        }
        s.write(&out.join("stationary.csv"))?;
        summary["stationary"] = json!({
            "samples": energies.len(),
            "beta": jnum(law.beta),
            "ks_statistic": jnum(d),
            "p_value": jnum(ks_p_value(d, energies.len())),
            "naive_beta": jnum(naive.beta),
            "naive_p_value": jnum(ks_p_value(d_naive, energies.len())),
        });
    }
    Ok(Outcome::ok(summary))
}

/// Shoots a `D = 0` fan and compares each trajectory with the closed-form azimuth
/// and action.
fn oracle_check(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let (mc, model) = model_of(cfg)?;
    let Model::Macrospin(m) = model else {
        return Err(CliError::Validation("oracle-check needs a macrospin".into()));
    };
    let effective = oracle_effective(cfg, &m);
    let window = oracle_window(cfg);
    let rms_tol = cfg.oracle.as_ref().and_then(|o| o.rms_tol).unwrap_or(if effective { 5e-2 } else { 1e-2 });
    let action_rtol = cfg.oracle.as_ref().map_or(1e-4, |o| o.action_rtol);
    let (_, fan, _) = sphere_fan(m, cfg)?;
    let current = if effective { m.effective_current() } else { m.current };
    let expected_action = m.alpha * (1.0 + current).powi(2);

    let mut t = Table::new(&["trajectory", "theta", "phi", "closed_form", "residual"]);
    let mut records = Vec::new();
    let mut worst_rms: f64 = 0.0;
    let mut worst_action: f64 = 0.0;
    for (k, tr) in fan.trajectories.iter().enumerate() {
        let dev = compare_to_oracle(tr, &m, effective, window)?;
        worst_rms = worst_rms.max(dev.rms);
        let action_err = (tr.action() - expected_action).abs() / expected_action;
        worst_action = worst_action.max(action_err);
        let mut phi = 0.0;
        let mut prev: Option<f64> = None;
        for p in &tr.points {
            let raw = p.position[1].atan2(p.position[0]);
            phi += prev.map_or(raw, |q| {
                let d = raw - q;
                d - std::f64::consts::TAU * (d / std::f64::consts::TAU).round()
            });
            prev = Some(raw);
            let theta = p.position[2].clamp(-1.0, 1.0).acos();
            if theta >= dev.window.0 && theta <= dev.window.1 {
                let closed = analytic_phi_of_theta(theta, m.alpha, current)?;
                t.push(vec![k.to_string(), num(theta), num(phi), num(dev.offset - closed), num(phi + closed - dev.offset)]);
            }
        }
        records.push(json!({
            "rms": jnum(dev.rms),
            "max_abs": jnum(dev.max_abs),
            "points": dev.points,
            "window": [jnum(dev.window.0), jnum(dev.window.1)],
            "restricted": dev.restricted,
            "averaged": dev.averaged,
            "action": jnum(tr.action()),
            "action_rel_err": jnum(action_err),
            "stop": tr.stop.label(),
        }));
    }
    t.write(&out.join("oracle.csv"))?;

    let separatrix = (-current).acos();
    let mut failures = Vec::new();
    if !(worst_rms <= rms_tol) {
        failures.push(format!("oracle rms {worst_rms:e} > {rms_tol:e}"));
    }
    // the projected drive reproduces the azimuth only, not the action
    if !effective && !(worst_action <= action_rtol) {
        failures.push(format!("action error {worst_action:e} > {action_rtol:e}"));
    }
    Ok(Outcome {
        summary: json!({
            "model": mc.name(),
            "effective": effective,
            "current": jnum(current),
            "expected_action": jnum(expected_action),
            "closed_form_action_at_separatrix": jnum(analytic_uniaxial_action(separatrix, m.alpha, current)?),
            "max_rms": jnum(worst_rms),
            "rms_tol": jnum(rms_tol),
            "max_action_rel_err": jnum(worst_action),
            "action_rtol": jnum(action_rtol),
            "trajectories": records,
        }),
        failures,
    })
}

/// Runs the acceptance suite and writes `report.json`.
pub fn report(out: &Path, options: &acceptance::SuiteOptions) -> Result<Outcome, CliError> {
    let report = acceptance::run_suite(options)?;
    for line in report.lines() {
        println!("{line}");
    }
    let failures = report.failed();
    let value = serde_json::to_value(&report).map_err(|e| CliError::Io(e.to_string()))?;
    write_json(&out.join("report.json"), value.clone())?;
    Ok(Outcome { summary: value, failures })
}
