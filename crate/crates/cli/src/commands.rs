use std::fs;
use std::io::{self, Write};
use std::path::Path;

use log::info;
use nalgebra::DMatrix;
use nullrec_core::estimate::{mle, naive_estimator, restricted_mle};
use nullrec_core::harness::{
    emit_report, run_experiment, ExperimentConfig, ExperimentKind, ExperimentOptions, Tolerances,
};
use nullrec_core::limits::{limit_risk, sample_stable, LimitLawSpec, Loss};
use nullrec_core::linalg::{is_positive_definite, to_matrix, to_rows};
use nullrec_core::model::*;
use nullrec_core::rng::StreamKey;
use nullrec_core::simulate::{accumulate_stats, cycle_threshold, simulate_path, DiffusionPath};
use nullrec_core::stats::{ks_statistic, MeanEstimate};
use serde_json::{json, Map, Value};

use crate::args::*;
use crate::error::CliError;

pub type Outcome = Result<bool, CliError>;

fn print_json(v: &Value) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn optional_window(flag: &str, text: &Option<String>) -> Result<Option<Window>, CliError> {
    text.as_deref().map(|t| parse_window(flag, t)).transpose()
}

pub fn constants(args: &ConstantsArgs) -> Outcome {
    let spec = args.model.spec()?;
    let theta = args.model.theta(&spec)?;
    let window = optional_window("--window", &args.window)?;
    let c = asymptotic_constants(&spec, &theta)?;
    let lam = mu_moment_matrix(&spec, &theta, None)?;
    let mut out = json!({
        "spec": spec,
        "theta": theta.to_vec(),
        "recurrence": classify_recurrence(&spec, theta.theta1),
        "lambda1": c.lambda1,
        "lambda2": c.lambda2,
        "alpha": c.alpha,
        "psi_plus": c.psi_plus,
        "psi_minus": c.psi_minus,
        "d_weight": c.d_weight,
        "information_factor": c.information_factor(),
        "cycle_threshold": cycle_threshold(&spec, &theta)?,
        "cycle_tail_constant": c.cycle_tail_constant(spec.sigma),
        "lambda": to_rows(&lam),
        "scaled_information": to_rows(&(lam * c.information_factor())),
    });
    if spec.m() > 0 {
        out["naive_bias"] = json!(nullrec_core::estimate::predicted_naive_bias(&spec, &theta)?);
    }
    if let Some(w) = window {
        out["window"] = json!(w);
        out["lambda_window"] = json!(to_rows(&mu_moment_matrix(&spec, &theta, Some(w))?));
    }
    if let Some(n) = args.n {
        if n == 0 {
            return Err(CliError::flag("--n", "must be at least 1"));
        }
        out["norming"] = json!(norming_at(&c, n as f64));
    }
    print_json(&out)?;
    Ok(true)
}

fn check_steps(horizon_flag: &str, horizon: f64, dt: f64) -> Result<(), CliError> {
    positive("--dt", dt)?;
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(CliError::flag(
            horizon_flag,
            format!("must be finite and nonnegative, got {horizon}"),
        ));
    }
    if horizon > 0.0 && horizon < dt {
        return Err(CliError::flag(
            horizon_flag,
            format!("{horizon} is shorter than --dt {dt}"),
        ));
    }
    Ok(())
}

fn write_path(path: &DiffusionPath, out: Option<&Path>) -> Result<(), CliError> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["t", "x"])?;
    for (k, x) in path.values.iter().enumerate() {
        w.serialize((path.time(k), x))?;
    }
    w.flush()?;
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Outcome {
    let spec = args.model.spec()?;
    let theta = args.model.theta(&spec)?;
    check_steps("--horizon", args.horizon, args.dt)?;
    let window = optional_window("--window", &args.window)?;
    let path = simulate_path(&spec, &theta, args.horizon, args.dt, args.seed)?;
    info!("simulated {} steps", path.values.len() - 1);
    if args.stats {
        print_json(&json!(accumulate_stats(&spec, &path, window)?))?;
    } else {
        write_path(&path, args.output.as_deref())?;
    }
    Ok(true)
}

fn read_path(file: &Path, dt: Option<f64>) -> Result<DiffusionPath, CliError> {
    let mut r = csv::Reader::from_path(file).map_err(|e| CliError::flag("--input", e.to_string()))?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for rec in r.deserialize::<(f64, f64)>() {
        let (t, x) = rec.map_err(|e| CliError::flag("--input", e.to_string()))?;
        if !(t.is_finite() && x.is_finite()) {
            return Err(CliError::flag("--input", "non-finite entry"));
        }
        times.push(t);
        values.push(x);
    }
    if values.len() < 2 {
        return Err(CliError::flag("--input", "need at least two observations"));
    }
    let dt = match dt {
        Some(d) => positive("--dt", d)?,
        None => positive("--input", times[1] - times[0])?,
    };
    let uniform = times
        .iter()
        .enumerate()
        .all(|(k, t)| (t - times[0] - k as f64 * dt).abs() <= 1e-6 * dt);
    if !uniform {
        return Err(CliError::flag(
            "--input",
            format!("times are not on a grid of step {dt}"),
        ));
    }
    Ok(DiffusionPath {
        dt,
        horizon: (values.len() - 1) as f64 * dt,
        seed: 0,
        spec_ref: String::new(),
        theta_ref: String::new(),
        values,
    })
}

pub fn estimate(args: &EstimateArgs) -> Outcome {
    let mut spec = args.model.spec()?;
    let window = optional_window("--window", &args.window)?;
    let (path, truth) = match &args.input {
        Some(file) => {
            if args.horizon.is_some() {
                return Err(CliError::flag("--horizon", "cannot be combined with --input"));
            }
            (read_path(file, args.dt)?, None)
        }
        None => {
            let theta = args.model.theta(&spec)?;
            let horizon = args
                .horizon
                .ok_or_else(|| CliError::flag("--horizon", "required unless --input is given"))?;
            let dt = args.dt.unwrap_or(0.01);
            check_steps("--horizon", horizon, dt)?;
            (simulate_path(&spec, &theta, horizon, dt, args.seed)?, Some(theta))
        }
    };
    spec.x0 = path.values[0];
    let stats = accumulate_stats(&spec, &path, None)?;
    let mut out = json!({
        "horizon": path.horizon,
        "dt": path.dt,
        "steps": path.values.len() - 1,
        "mle": mle(&stats)?,
        "stats": stats,
    });
    if let Some(t) = &truth {
        out["theta_true"] = json!(t.to_vec());
    }
    if spec.m() > 0 && stats.j[0][0] > 0.0 {
        out["naive"] = json!(naive_estimator(&stats, &spec, truth.as_ref())?);
    }
    if let Some(w) = window {
        let ws = accumulate_stats(&spec, &path, Some(w))?;
        out["restricted"] = json!(restricted_mle(&ws, &spec).map_err(|e| CliError::flag("--window", e.to_string()))?);
    }
    print_json(&out)?;
    Ok(true)
}

fn read_cov(file: &Path) -> Result<DMatrix<f64>, CliError> {
    let text = fs::read_to_string(file).map_err(|e| CliError::flag("--cov", format!("{}: {e}", file.display())))?;
    let rows: Vec<Vec<f64>> = serde_json::from_str(&text).map_err(|e| CliError::flag("--cov", e.to_string()))?;
    let m = to_matrix(&rows).map_err(|e| CliError::flag("--cov", e.to_string()))?;
    if !is_positive_definite(&m) {
        return Err(CliError::flag("--cov", "matrix is not symmetric positive definite"));
    }
    Ok(m)
}

pub fn limits(args: &LimitsArgs) -> Outcome {
    let (alpha, cov) = if args.from_model {
        if args.alpha.is_some() || args.cov.is_some() {
            return Err(CliError::flag(
                "--from-model",
                "cannot be combined with --alpha or --cov",
            ));
        }
        let spec = args.model.spec()?;
        let theta = args.model.theta(&spec)?;
        (
            asymptotic_constants(&spec, &theta)?.alpha,
            scaled_information(&spec, &theta)?,
        )
    } else {
        let alpha = args
            .alpha
            .ok_or_else(|| CliError::flag("--alpha", "required unless --from-model is given"))?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(CliError::flag("--alpha", format!("must lie in (0, 1), got {alpha}")));
        }
        let cov = match &args.cov {
            Some(f) => read_cov(f)?,
            None if args.dim >= 1 => DMatrix::identity(args.dim, args.dim),
            None => return Err(CliError::flag("--dim", "must be at least 1")),
        };
        (alpha, cov)
    };
    let law = LimitLawSpec::from_matrix(alpha, &cov)?;
    let key = StreamKey::new(args.seed);
    if args.risk {
        if args.n < 2 {
            return Err(CliError::flag("--n", "risk estimation needs at least 2 draws"));
        }
        let loss = Loss::from_name(&args.loss).map_err(|e| CliError::flag("--loss", e.to_string()))?;
        let est = limit_risk(&law, loss, args.n, key)?;
        print_json(&json!({ "alpha": alpha, "cov": law.cov, "loss": loss, "risk": est }))?;
        return Ok(true);
    }
    if args.n == 0 {
        return Err(CliError::flag("--n", "must be at least 1"));
    }
    let sampler = law.sampler()?;
    let mut rng = key.rng();
    let sink: Box<dyn Write> = match &args.output {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record((0..law.dim()).map(|i| format!("z{i}")))?;
    for _ in 0..args.n {
        w.serialize(sampler.sample(&mut rng))?;
    }
    w.flush()?;
    Ok(true)
}

fn parse_kind(text: &str) -> Result<ExperimentKind, CliError> {
    serde_json::from_value(json!(text)).map_err(|_| {
        CliError::flag(
            "--kind",
            format!("unknown experiment `{text}` (expected identity, rate, tail, rlt or risk)"),
        )
    })
}

fn split_assignment<'a>(flag: &str, text: &'a str) -> Result<(&'a str, &'a str), CliError> {
    text.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| CliError::flag(flag, format!("expected NAME=VALUE, got `{text}`")))
}

/// Sets `section.name` after checking `name` against the known keys.
fn override_field(root: &mut Value, section: &str, flag: &str, known: &Value, text: &str) -> Result<(), CliError> {
    let (name, raw) = split_assignment(flag, text)?;
    let known = known.as_object().expect("struct serializes to an object");
    if !known.contains_key(name) {
        let names: Vec<&str> = known.keys().map(String::as_str).collect();
        return Err(CliError::flag(
            flag,
            format!("unknown name `{name}` (expected one of {})", names.join(", ")),
        ));
    }
    let value = if name == "loss" {
        json!(Loss::from_name(raw).map_err(|e| CliError::flag(flag, e.to_string()))?)
    } else {
        serde_json::from_str::<Value>(raw)
            .map_err(|_| CliError::flag(flag, format!("`{name}` needs a number, got `{raw}`")))?
    };
    let obj = root
        .as_object_mut()
        .ok_or_else(|| CliError::flag("--config", "top level must be an object"))?
        .entry(section)
        .or_insert_with(|| Value::Object(Map::new()));
    obj.as_object_mut()
        .ok_or_else(|| CliError::flag("--config", format!("`{section}` must be an object")))?
        .insert(name.to_string(), value);
    Ok(())
}

/// The config file (or the defaults for `--kind`) with the flags applied on top.
pub fn merged_config(args: &ExperimentArgs) -> Result<ExperimentConfig, CliError> {
    let mut root = match &args.config {
        Some(file) => {
            let text =
                fs::read_to_string(file).map_err(|e| CliError::flag("--config", format!("{}: {e}", file.display())))?;
            let mut v: Value = serde_json::from_str(&text).map_err(|e| CliError::flag("--config", e.to_string()))?;
            if let Some(k) = &args.kind {
                v["kind"] = json!(parse_kind(k)?);
            }
            v
        }
        None => {
            let kind = args
                .kind
                .as_deref()
                .ok_or_else(|| CliError::flag("--kind", "required when no --config is given"))?;
            serde_json::to_value(ExperimentConfig::default_for(parse_kind(kind)?))?
        }
    };
    if !root.is_object() {
        return Err(CliError::flag("--config", "top level must be an object"));
    }
    if let Some(r) = args.replications {
        root["replications"] = json!(r);
    }
    if let Some(h) = &args.horizons {
        root["horizons"] = json!(h);
    }
    if let Some(dt) = args.dt {
        root["dt"] = json!(positive("--dt", dt)?);
    }
    if let Some(s) = args.seed {
        root["master_seed"] = json!(s);
    }
    if let Some(t1) = args.theta1 {
        root["theta"]["theta1"] = json!(t1);
    }
    if let Some(t2) = &args.theta2 {
        root["theta"]["theta2"] = json!(t2);
    }
    if let Some(w) = &args.window {
        root["window"] = if w == "none" {
            Value::Null
        } else {
            json!(parse_window("--window", w)?)
        };
    }
    if let Some(o) = &args.output {
        root["output"] = json!(o);
    }
    let tol_names = serde_json::to_value(Tolerances::default())?;
    for t in &args.tolerances {
        override_field(&mut root, "tolerances", "--tolerance", &tol_names, t)?;
    }
    let opt_names = serde_json::to_value(ExperimentOptions::default())?;
    for o in &args.options {
        override_field(&mut root, "options", "--option", &opt_names, o)?;
    }
    let config: ExperimentConfig =
        serde_json::from_value(root).map_err(|e| CliError::flag("--config", e.to_string()))?;
    if config.theta.check_in_domain(&config.spec).is_err() {
        let (lo, hi) = config.spec.theta1_range();
        return Err(CliError::flag(
            "--theta1",
            format!(
                "{} is outside ({lo}, {hi}) or theta2 has the wrong length",
                config.theta.theta1
            ),
        ));
    }
    config
        .validate()
        .map_err(|e| CliError::Other(format!("invalid experiment config: {e}")))?;
    Ok(config)
}

pub fn experiment(args: &ExperimentArgs) -> Outcome {
    let config = merged_config(args)?;
    if args.print_config {
        print_json(&serde_json::to_value(&config)?)?;
        return Ok(true);
    }
    info!(
        "running {} with {} replications (seed {})",
        config.kind.name(),
        config.replications,
        config.master_seed
    );
    let report = run_experiment(&config)?;
    info!("finished in {:.1}s", report.wall_clock_seconds);
    let mut err = io::stderr().lock();
    for row in report.failures() {
        writeln!(
            err,
            "FAIL {} coord={} horizon={}: {} (tolerance {})",
            row.stat_name,
            row.coord.map_or("-".into(), |c| c.to_string()),
            row.horizon,
            row.value,
            row.tolerance.map_or("-".into(), |t| t.to_string()),
        )?;
    }
    let verdict = if report.passed { "PASS" } else { "FAIL" };
    writeln!(
        err,
        "{}: {verdict} ({} rows, {:.1}s)",
        config.kind.name(),
        report.rows.len(),
        report.wall_clock_seconds
    )?;
    match &config.output {
        Some(stem) => {
            let (j, c) = emit_report(&report, stem)?;
            writeln!(err, "wrote {} and {}", j.display(), c.display())?;
        }
        None => print_json(&serde_json::to_value(&report)?)?,
    }
    Ok(report.passed)
}

pub fn check(args: &CheckArgs) -> Outcome {
    let mut ok = true;
    let mut line = |name: &str, pass: bool, detail: String| {
        ok &= pass;
        println!("{} {name}: {detail}", if pass { "ok  " } else { "FAIL" });
    };

    let cfg = ExperimentConfig {
        master_seed: args.seed,
        ..ExperimentConfig::default_for(ExperimentKind::Identity)
    };
    let r = run_experiment(&cfg)?;
    let worst = r
        .rows
        .iter()
        .filter(|row| row.tolerance.is_some())
        .map(|row| row.value)
        .fold(0.0, f64::max);
    line("identity suite", r.passed, format!("max residual {worst:.2e}"));

    let n = 20_000;
    for (i, alpha) in [0.25, 0.5, 0.75].into_iter().enumerate() {
        let mut rng = StreamKey::derive(args.seed, &[i as u64]).rng();
        let vals: Vec<f64> = (0..n)
            .map(|_| (-sample_stable(alpha, &mut rng).unwrap()).exp())
            .collect();
        let m = MeanEstimate::from_sample(&vals)?;
        let z = (m.mean - (-1.0f64).exp()).abs() / m.stderr;
        line(
            &format!("stable Laplace transform alpha={alpha}"),
            z <= 4.0,
            format!("{z:.2} standard errors"),
        );
    }

    let law = LimitLawSpec::new(0.5, vec![vec![1.0, 0.3], vec![0.3, 2.0]])?;
    let s = law.sampler()?;
    let mut a = StreamKey::derive(args.seed, &[10]).rng();
    let mut b = StreamKey::derive(args.seed, &[11]).rng();
    let draws = 2000;
    let xa: Vec<Vec<f64>> = (0..draws).map(|_| s.sample(&mut a)).collect();
    let xb: Vec<Vec<f64>> = (0..draws).map(|_| s.sample(&mut b)).collect();
    // 0.1% critical value of the two-sample test
    let crit = 1.95 * (2.0 / draws as f64).sqrt();
    for c in 0..2 {
        let ca: Vec<f64> = xa.iter().map(|v| v[c]).collect();
        let cb: Vec<f64> = xb.iter().map(|v| v[c]).collect();
        let ks = ks_statistic(&ca, &cb)?;
        line(
            &format!("limit sampler calibration coord {c}"),
            ks < crit,
            format!("KS {ks:.4} < {crit:.4}"),
        );
    }
    Ok(ok)
}
