//! Command bodies. Each returns the exit code of a successful run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::manifest::{sha256_file, RunManifest};
use super::{
    CapacityCmd, CliError, Command, EvalArgs, LearnArgs, LineCmd, LineGenerateArgs, Method,
    OracleCmd, OracleQueryArgs, PhmArgs, PhmCmd, ReplayArgs, SweepArgs, VolumeArgs,
    EXIT_INFEASIBLE, EXIT_OK,
};
use crate::learner::{
    accuracy, active_learn, baseline_build, classification_report, estimate_volume,
    generate_test_set, ActiveParams, CapacityModel, Classifier, ForestParams, OracleClassifier,
    SampleSet, VolumeEstimate,
};
use crate::line_model::{preset, Degradation, LineConfig};
use crate::oracle::{Oracle, OracleBudget, Provenance};
use crate::phm::{rul_over_time, PhmRunParams, TruthParams};
use crate::textfmt::{fmt_num, fmt_opt, report_json};

pub(super) fn execute(cmd: &Command) -> Result<i32, CliError> {
    match cmd {
        Command::Line(LineCmd::Generate(a)) => line_generate(a),
        Command::Oracle(OracleCmd::Query(a)) => oracle_query(a),
        Command::Capacity(CapacityCmd::Learn(a)) => capacity_learn(a),
        Command::Capacity(CapacityCmd::Eval(a)) => capacity_eval(a),
        Command::Capacity(CapacityCmd::Volume(a)) => capacity_volume(a),
        Command::Phm(PhmCmd::Simulate(a)) => phm_simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Replay(a) => replay(a),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn schema_at(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Schema(format!("{}: {e}", path.display()))
}

fn load_line(path: &Path) -> Result<LineConfig, CliError> {
    LineConfig::from_json(&read_text(path)?).map_err(|e| schema_at(path, e))
}

fn load_oracle(path: &Path) -> Result<Oracle, CliError> {
    Ok(Oracle::new(load_line(path)?)?)
}

fn load_model(path: &Path, dim: Option<usize>) -> Result<CapacityModel, CliError> {
    let m = CapacityModel::from_json(&read_text(path)?).map_err(|e| schema_at(path, e))?;
    if let Some(d) = dim.filter(|&d| d != m.dim()) {
        return Err(schema_at(
            path,
            format!("model has dimension {}, line has {d} machines", m.dim()),
        ));
    }
    Ok(m)
}

fn with_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn line_generate(a: &LineGenerateArgs) -> Result<i32, CliError> {
    let line = match (&a.preset, &a.from) {
        (Some(name), None) => preset(name)?,
        (None, Some(path)) => load_line(path)?,
        _ => return Err(CliError::Usage("give exactly one of --preset and --from".into())),
    };
    write_text(&a.out, &with_newline(line.to_json()))?;
    println!(
        "line with {} machines in {} stages written to {}",
        line.dim(),
        line.stages.len(),
        a.out.display()
    );
    Ok(EXIT_OK)
}

fn parse_vector(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Usage(format!("bad degradation entry {s:?}: {e}")))
        })
        .collect()
}

#[derive(Serialize)]
struct QueryRecord<'a> {
    d: &'a [f64],
    label: &'a str,
    status: &'a str,
}

fn oracle_query(a: &OracleQueryArgs) -> Result<i32, CliError> {
    let oracle = load_oracle(&a.line)?;
    let d = Degradation::new(parse_vector(&a.d)?).map_err(|e| CliError::Usage(e.to_string()))?;
    oracle
        .line()
        .check_degradation(&d)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let r = oracle.check_feasibility(&d, &OracleBudget::new(1))?;
    let status = match r.provenance {
        Provenance::Solver(s) => format!("{s:?}").to_lowercase(),
        Provenance::Structural => "structural".into(),
    };
    let label = if r.label.is_feasible() { "feasible" } else { "infeasible" };
    println!("{label} (lp status: {status})");
    if let Some(out) = &a.out {
        let record = QueryRecord {
            d: d.as_slice(),
            label,
            status: &status,
        };
        write_text(out, &report_json(&record))?;
    }
    Ok(if r.label.is_feasible() { EXIT_OK } else { EXIT_INFEASIBLE })
}

struct Learned {
    model: CapacityModel,
    samples: SampleSet,
    partial: bool,
}

fn learn(
    oracle: &Oracle,
    method: Method,
    budget: &OracleBudget,
    seed: u64,
    params: &ActiveParams,
) -> Result<Learned, CliError> {
    Ok(match method {
        Method::Active => {
            let out = active_learn(oracle, budget, params, seed)?;
            Learned {
                model: CapacityModel::Active(out.model),
                samples: out.samples,
                partial: false,
            }
        }
        Method::Baseline => {
            let out = baseline_build(oracle, budget, seed)?;
            Learned {
                model: CapacityModel::Baseline(out.model),
                samples: out.samples,
                partial: out.partial,
            }
        }
    })
}

fn capacity_learn(a: &LearnArgs) -> Result<i32, CliError> {
    if a.trees == 0 || a.retrain_every == 0 {
        return Err(CliError::Usage("--trees and --retrain-every must be at least 1".into()));
    }
    let oracle = load_oracle(&a.line)?;
    let budget = OracleBudget::new(a.budget);
    let params = ActiveParams {
        retrain_every: a.retrain_every,
        charge_seeds: a.charge_seeds,
        forest: ForestParams {
            n_trees: a.trees,
            ..ForestParams::default()
        },
        ..ActiveParams::default()
    };
    let learned = learn(&oracle, a.method, &budget, a.seed, &params)?;
    if learned.partial {
        eprintln!("warning: the budget ran out before every axis boundary point was found");
    }
    write_text(&a.out, &with_newline(learned.model.to_json()))?;
    if let Some(path) = &a.samples {
        write_text(path, &learned.samples.to_csv_string())?;
    }
    let [inf, feas] = learned.samples.class_counts();
    println!(
        "{} model: {} of {} oracle calls, {} samples ({inf} infeasible, {feas} feasible)",
        a.method.as_str(),
        budget.used(),
        a.budget,
        learned.samples.len()
    );
    Ok(EXIT_OK)
}

fn capacity_eval(a: &EvalArgs) -> Result<i32, CliError> {
    let oracle = load_oracle(&a.line)?;
    let model = load_model(&a.model, Some(oracle.dim()))?;
    let test = generate_test_set(&oracle, a.test_size, a.seed, a.balanced)?;
    let report = classification_report(&model, &test)?;
    write_text(&a.report, &report_json(&report))?;
    if let Some(path) = &a.test_out {
        write_text(path, &test.to_csv_string())?;
    }
    println!(
        "accuracy {} on {} test points (f1 infeasible {}, feasible {})",
        fmt_num(report.accuracy),
        test.len(),
        fmt_num(report.infeasible.f1_score),
        fmt_num(report.feasible.f1_score)
    );
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct VolumeRecord<'a> {
    source: &'a str,
    #[serde(flatten)]
    estimate: VolumeEstimate,
}

fn capacity_volume(a: &VolumeArgs) -> Result<i32, CliError> {
    let oracle = a.line.as_deref().map(load_oracle).transpose()?;
    let (source, est) = match &a.model {
        Some(path) => {
            let model = load_model(path, oracle.as_ref().map(Oracle::dim))?;
            let est = estimate_volume(
                model.dim(),
                |d| Ok(model.predict(d)?.is_feasible()),
                a.samples,
                a.seed,
            )?;
            ("model", est)
        }
        None => {
            let oracle = oracle.ok_or_else(|| CliError::Usage("give --model or --line".into()))?;
            let est = estimate_volume(
                oracle.dim(),
                |d| Ok(oracle.label(d)?.is_feasible()),
                a.samples,
                a.seed,
            )?;
            ("oracle", est)
        }
    };
    println!(
        "volume {} ± {} ({} samples, {source})",
        fmt_num(est.mean),
        fmt_num(est.half_width_95),
        est.n_samples
    );
    if let Some(out) = &a.out {
        write_text(out, &report_json(&VolumeRecord { source, estimate: est }))?;
    }
    Ok(EXIT_OK)
}

/// `start, start + step, …` up to `end`, counted in integers to avoid drift.
fn schedule(start: f64, step: f64, end: f64) -> Vec<f64> {
    let n = ((end - start) / step + 1e-9).floor();
    if n < 0.0 {
        return Vec::new();
    }
    (0..=n as usize).map(|k| start + k as f64 * step).collect()
}

fn phm_params(a: &PhmArgs) -> Result<PhmRunParams, CliError> {
    let positive = [
        ("--obs-step", a.obs_step),
        ("--refit-step", a.refit_step),
        ("--dt", a.dt),
    ];
    for (flag, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            return Err(CliError::Usage(format!("{flag} must be positive")));
        }
    }
    if !(a.obs_noise >= 0.0 && a.obs_noise.is_finite()) {
        return Err(CliError::Usage("--obs-noise must be ≥ 0".into()));
    }
    if !(a.obs_end >= 0.0 && a.refit_start >= 0.0) {
        return Err(CliError::Usage("--obs-end and --refit-start must be ≥ 0".into()));
    }
    if a.horizon_steps == 0 || a.n_mc == 0 {
        return Err(CliError::Usage("--horizon-steps and --n-mc must be at least 1".into()));
    }
    let refit_times = schedule(a.refit_start, a.refit_step, a.obs_end);
    if refit_times.is_empty() {
        return Err(CliError::Usage("no refit falls within the observation window".into()));
    }
    Ok(PhmRunParams {
        observation_times: schedule(0.0, a.obs_step, a.obs_end),
        refit_times,
        sigma_obs: a.obs_noise,
        dt: a.dt,
        horizon_steps: a.horizon_steps,
        n_mc: a.n_mc,
    })
}

pub const RUL_HEADER: &str = "now,mean,ml,q05,q95,ground_truth,survival_mass";

fn phm_simulate(a: &PhmArgs) -> Result<i32, CliError> {
    let params = phm_params(a)?;
    let oracle = load_oracle(&a.line)?;
    let truth = TruthParams::from_json(&read_text(&a.truth)?).map_err(|e| schema_at(&a.truth, e))?;
    let points = match &a.model {
        Some(path) => {
            let model = load_model(path, Some(oracle.dim()))?;
            rul_over_time(&truth, &oracle, &model, &params, a.seed)?
        }
        None => rul_over_time(&truth, &oracle, &OracleClassifier(&oracle), &params, a.seed)?,
    };
    let mut csv = format!("{RUL_HEADER}\n");
    for p in &points {
        let s = &p.summary;
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            fmt_num(p.now),
            fmt_opt(s.mean),
            fmt_opt(s.ml),
            fmt_opt(s.q_low),
            fmt_opt(s.q_high),
            fmt_opt(p.ground_truth),
            fmt_num(s.survival)
        )
        .expect("writing to a string");
    }
    write_text(&a.out, &csv)?;
    if let Some(last) = points.last() {
        println!(
            "{} refits; at t = {}: ML RUL {}, band [{}, {}], ground truth {}",
            points.len(),
            fmt_num(last.now),
            fmt_opt(last.summary.ml),
            fmt_opt(last.summary.q_low),
            fmt_opt(last.summary.q_high),
            fmt_opt(last.ground_truth)
        );
    }
    Ok(EXIT_OK)
}

pub const SWEEP_HEADER: &str = "budget,method,seed,accuracy";

fn sweep(a: &SweepArgs) -> Result<i32, CliError> {
    if a.budgets.is_empty() || a.methods.is_empty() || a.seeds.is_empty() {
        return Err(CliError::Usage("budgets, methods and seeds must be non-empty".into()));
    }
    let oracle = load_oracle(&a.line)?;
    let test = generate_test_set(&oracle, a.test_size, a.test_seed, a.balanced)?;
    let jobs: Vec<(usize, Method, u64)> = a
        .budgets
        .iter()
        .flat_map(|&b| {
            a.methods
                .iter()
                .flat_map(move |&m| a.seeds.iter().map(move |&s| (b, m, s)))
        })
        .collect();
    let params = ActiveParams::default();
    let acc: Vec<f64> = jobs
        .par_iter()
        .map(|&(b, m, s)| {
            let learned = learn(&oracle, m, &OracleBudget::new(b), s, &params)?;
            Ok(accuracy(&learned.model, &test)?)
        })
        .collect::<Result<_, CliError>>()?;
    let mut csv = format!("{SWEEP_HEADER}\n");
    for ((b, m, s), v) in jobs.iter().zip(&acc) {
        writeln!(csv, "{b},{},{s},{}", m.as_str(), fmt_num(*v)).expect("writing to a string");
    }
    write_text(&a.out, &csv)?;
    for &b in &a.budgets {
        let means: Vec<String> = a
            .methods
            .iter()
            .map(|&m| {
                let v: Vec<f64> = jobs
                    .iter()
                    .zip(&acc)
                    .filter(|((jb, jm, _), _)| *jb == b && *jm == m)
                    .map(|(_, &v)| v)
                    .collect();
                format!("{} {}", m.as_str(), fmt_num(v.iter().sum::<f64>() / v.len() as f64))
            })
            .collect();
        println!("budget {b}: mean accuracy {}", means.join(", "));
    }
    Ok(EXIT_OK)
}

pub(super) fn replay(a: &ReplayArgs) -> Result<i32, CliError> {
    let m = RunManifest::read(&a.manifest)?;
    if matches!(m.command, Command::Replay(_)) {
        return Err(CliError::Schema("a replay cannot be replayed".into()));
    }
    for input in &m.inputs {
        let now = sha256_file(&input.path)?;
        if now != input.sha256 {
            return Err(CliError::ReplayMismatch(format!(
                "input {} ({}) changed since the recorded run",
                input.role,
                input.path.display()
            )));
        }
    }
    let dir = a.out_dir.clone().unwrap_or_else(|| {
        let mut s = a.manifest.as_os_str().to_os_string();
        s.push(".replay");
        PathBuf::from(s)
    });
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut cmd = m.command.clone();
    cmd.redirect_outputs(&dir);
    let code = execute(&cmd)?;
    let mut mismatches = Vec::new();
    if code != m.exit_code {
        mismatches.push(format!("exit code {code}, recorded {}", m.exit_code));
    }
    let fresh = cmd.outputs();
    if fresh.len() != m.outputs.len() {
        mismatches.push(format!(
            "{} outputs, recorded {}",
            fresh.len(),
            m.outputs.len()
        ));
    }
    for (rec, (role, path)) in m.outputs.iter().zip(&fresh) {
        let same = rec.role == *role && sha256_file(path)? == rec.sha256;
        println!(
            "{} {role}: {}",
            if same { "identical" } else { "DIFFERS" },
            path.display()
        );
        if !same {
            mismatches.push(format!("{role} differs from {}", rec.path.display()));
        }
    }
    if mismatches.is_empty() {
        println!("replay of `{}` reproduced every output", m.command.name());
        Ok(EXIT_OK)
    } else {
        Err(CliError::ReplayMismatch(mismatches.join("; ")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules_count_without_drift() {
        assert_eq!(schedule(0.0, 1.0, 45.0).len(), 46);
        assert_eq!(schedule(5.0, 5.0, 45.0), (1..=9).map(|k| 5.0 * k as f64).collect::<Vec<_>>());
        assert_eq!(schedule(0.0, 0.1, 1.0).len(), 11);
        assert!(schedule(5.0, 1.0, 4.0).is_empty());
    }

    #[test]
    fn default_phm_flags_match_library_defaults() {
        use clap::Parser;
        let cli = super::super::Cli::try_parse_from([
            "rescap", "phm", "simulate", "--line", "l", "--truth", "t", "--out", "o",
        ])
        .unwrap();
        let Command::Phm(PhmCmd::Simulate(a)) = cli.command else {
            panic!("parsed another command")
        };
        assert_eq!(phm_params(&a).unwrap(), PhmRunParams::default());
    }

    #[test]
    fn vector_parsing() {
        assert_eq!(parse_vector("0.1, 0.2").unwrap(), vec![0.1, 0.2]);
        assert!(matches!(parse_vector("0.1,x"), Err(CliError::Usage(_))));
    }
}
