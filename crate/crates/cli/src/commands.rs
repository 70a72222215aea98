use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};

use blocksim::montecarlo::{derived_metrics, predicted_p};
use blocksim::validate::{run_validation, Fault, ValidationOptions};

use crate::args::{resolve_seed, Cli, Command, ExperimentArgs, PredictArgs, RerunArgs, SimulateArgs, ValidateArgs};
use crate::manifest::{manifest_path_for, rerun, RunManifest};
use crate::request::{Invocation, RunResult};

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    /// A check or a digest comparison failed.
    Failed = 1,
}

pub fn run(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Experiment(a) => experiment(&a),
        Command::Validate(a) => validate(&a),
        Command::Rerun(a) => rerun_cmd(&a),
        Command::Predict(a) => predict(&a),
    }
}

fn emit(result: &RunResult) -> Result<()> {
    for artifact in &result.artifacts {
        match &artifact.path {
            Some(path) => {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                }
                fs::write(path, &artifact.bytes).with_context(|| format!("writing {}", path.display()))?;
            }
            None => std::io::stdout().write_all(&artifact.bytes)?,
        }
    }
    Ok(())
}

/// Runs, writes the outputs and, when there is a file to pair it with, the
/// manifest.
fn execute_and_record(
    invocation: Invocation,
    jobs: Option<usize>,
    primary_out: Option<&Path>,
    manifest_out: Option<&Path>,
) -> Result<()> {
    let started = Instant::now();
    let result = invocation.execute(jobs)?;
    emit(&result)?;
    let manifest_path = manifest_out.map(Path::to_path_buf).or_else(|| primary_out.map(manifest_path_for));
    if let Some(path) = manifest_path {
        RunManifest::new(&invocation, &result, jobs, started.elapsed()).write(&path)?;
    }
    if !result.summary.is_null() {
        eprintln!("{}", result.summary);
    }
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<Status> {
    let request = args.resolve()?;
    let out = request.out.clone();
    execute_and_record(Invocation::Simulate(request), None, out.as_deref(), args.manifest.as_deref())?;
    Ok(Status::Ok)
}

fn experiment(args: &ExperimentArgs) -> Result<Status> {
    let request = args.resolve()?;
    let out = request.out.clone();
    execute_and_record(Invocation::Experiment(request), args.jobs, out.as_deref(), args.manifest.as_deref())?;
    Ok(Status::Ok)
}

fn validate(args: &ValidateArgs) -> Result<Status> {
    let opts = ValidationOptions {
        configs: args.configs,
        quick: args.quick,
        seed: resolve_seed(args.seed, None)?,
        fault: args.inject_fault.then_some(Fault::NonStrictVisibility),
    };
    let report = run_validation(&opts)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", report.summary());
    }
    Ok(if report.passed() { Status::Ok } else { Status::Failed })
}

fn rerun_cmd(args: &RerunArgs) -> Result<Status> {
    let manifest = RunManifest::load(&args.manifest)?;
    let checks = rerun(&manifest, args.out_dir.as_deref(), args.jobs)?;
    let mut ok = true;
    for c in &checks {
        let status = if c.matches() { "match" } else { "MISMATCH" };
        ok &= c.matches();
        match &c.written_to {
            Some(p) => println!("{status} {} {} -> {}", c.role, c.actual, p.display()),
            None => println!("{status} {} {}", c.role, c.actual),
        }
    }
    Ok(if ok { Status::Ok } else { Status::Failed })
}

fn predict(args: &PredictArgs) -> Result<Status> {
    if !(args.alpha_mean > 0.0) || !(args.beta_mean >= 0.0) {
        anyhow::bail!("need alpha mean > 0 and beta mean >= 0");
    }
    let p = predicted_p(args.alpha_mean, args.beta_mean);
    let value = serde_json::json!({
        "ratio": p.ratio,
        "regime": p.regime,
        "predicted_p": p.p,
        "chaotic_warning": p.chaotic_warning,
        "derived": derived_metrics(p.p, args.alpha_mean),
    });
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(Status::Ok)
}
