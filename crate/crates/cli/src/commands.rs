use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use fdal_core::functional::default_names;
use fdal_core::io::{
    load_dataset, read_json_file, read_surfaces, write_dataset, write_json, write_surfaces, DataFormat,
    Dataset, Response, SCHEMA_VERSION,
};
use fdal_core::model::FunctionalModel;
use fdal_core::pipeline::{
    fit_path, fit_scalar_path, fit_scalar_single, fit_single, FunctionalFit, LambdaChoice, ScalarFit,
};
use fdal_core::simulation::{
    gen_scenario, metrics_from_parts, Bump, CoefficientSurface, GroundTruth, Metrics,
};
use serde::{Deserialize, Serialize};

use crate::args::{EvaluateArgs, FitArgs, FormatArg, ModelArgs, SimulateArgs};
use crate::config::{resolve_scenario, Mode, RunConfig};
use crate::failure::{Failure, ResultExt};
use crate::report::{
    curve_rows, print_summary, stage_name, surface_rows, write_fit_diagnostics, write_path_diagnostics,
    write_scalar_model, FitReport, PathReport, RunManifest,
};

/// `truth/truth.json` written by `simulate`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthRecord {
    pub schema_version: u32,
    pub p: usize,
    pub active: Vec<usize>,
    pub names: Vec<String>,
    /// Bumps of each active surface, aligned with `active`.
    pub bumps: Vec<Vec<Bump>>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

pub fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let cfg = resolve_scenario(args)?;
    let grid = cfg.grid().usage()?;
    let scenario = gen_scenario(&cfg, &grid)?;
    let out = &args.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_json(&out.join("scenario.json"), &cfg)?;

    let format = match args.format {
        FormatArg::Csv => DataFormat::Csv,
        FormatArg::Binary => DataFormat::Binary,
    };
    let names = default_names(cfg.p);
    for (dir, sample) in [("train", &scenario.train), ("test", &scenario.test)] {
        write_dataset(
            &out.join(dir),
            &Response::Curves(sample.response.clone()),
            &sample.features,
            &names,
            format,
        )?;
    }

    let truth = &scenario.truth;
    let model = FunctionalModel::new(
        grid.clone(),
        truth.p,
        truth.active.clone(),
        truth.surfaces.iter().map(|s| s.values.clone()).collect(),
        vec![0.0; grid.len()],
    )?;
    let truth_dir = out.join("truth");
    write_surfaces(&truth_dir, &model, &names)?;
    let record = TruthRecord {
        schema_version: SCHEMA_VERSION,
        p: truth.p,
        active: truth.active.clone(),
        names: truth.active.iter().map(|&j| names[j].clone()).collect(),
        bumps: truth.surfaces.iter().map(|s| s.bumps.clone()).collect(),
        signal_variance: truth.signal_variance,
        noise_variance: truth.noise_variance,
    };
    write_json(&truth_dir.join("truth.json"), &record)?;

    println!(
        "scenario written to {}: n = {} train / {} test, p = {}, active = {:?}",
        out.display(),
        scenario.train.response.n(),
        scenario.test.response.n(),
        cfg.p,
        truth.active
    );
    Ok(())
}

struct Prepared {
    cfg: RunConfig,
    mode: Mode,
    input: PathBuf,
    out: PathBuf,
    data: Dataset,
}

fn prepare(args: &ModelArgs, threads: Option<usize>) -> Result<Prepared, Failure> {
    let cfg = RunConfig::resolve(args, threads)?;
    if let (None, Some(t)) = (threads, cfg.threads) {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let input = cfg.input.clone().expect("checked by resolve");
    let out = cfg.output.clone().expect("checked by resolve");
    let data = load_dataset(&input)
        .with_context(|| format!("loading {}", input.display()))
        .usage()?;
    let kind = match data.response {
        Response::Curves(_) => Mode::Functional,
        Response::Scalar(_) => Mode::Scalar,
    };
    let mode = cfg.mode.unwrap_or(kind);
    if mode != kind {
        return Err(Failure::usage(format!(
            "mode {mode:?} does not match the {kind:?} response in {}",
            input.display()
        )));
    }
    let mut cfg = cfg;
    cfg.mode = Some(mode);
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok(Prepared { cfg, mode, input, out, data })
}

fn names_of(data: &Dataset) -> Option<Vec<String>> {
    Some(data.manifest.feature_names.clone())
}

#[allow(clippy::too_many_arguments)]
fn run_manifest(
    prep: &Prepared,
    command: &'static str,
    k: usize,
    estimation_k: usize,
    selected: &[usize],
    names: &[String],
    elapsed_ms: f64,
    files: &[&str],
) -> RunManifest {
    let m = &prep.data.manifest;
    RunManifest {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        command,
        mode: prep.mode,
        input: prep.input.display().to_string(),
        config: prep.cfg.clone(),
        n: m.n,
        m: m.m,
        p: m.p,
        k,
        estimation_k,
        selected: selected.to_vec(),
        selected_names: selected.iter().map(|&j| names[j].clone()).collect(),
        elapsed_ms,
        files: files.iter().map(|s| s.to_string()).collect(),
    }
}

fn write_functional(prep: &Prepared, fit: &FunctionalFit, command: &'static str) -> Result<(), Failure> {
    let out = &prep.out;
    let names = &fit.block_names;
    write_surfaces(out, &fit.model, names)?;
    let mut files = vec!["manifest.json", "surfaces.json", "intercept.csv", "diagnostics.jsonl"];
    if let Some(outcome) = &fit.selection {
        let report = PathReport::new(
            prep.mode,
            fit.basis.k(),
            fit.estimation_basis.k(),
            &fit.k_errors,
            outcome,
            names,
        );
        write_json(&out.join("path.json"), &report)?;
        write_path_diagnostics(&out.join("diagnostics.jsonl"), outcome)?;
        files.push("path.json");
    }
    if let Some(single) = &fit.single {
        write_json(&out.join("fit.json"), &FitReport::new(prep.mode, fit.basis.k(), single, names))?;
        write_fit_diagnostics(&out.join("diagnostics.jsonl"), &single.diagnostics)?;
        files.push("fit.json");
    }
    let manifest = run_manifest(
        prep,
        command,
        fit.basis.k(),
        fit.estimation_basis.k(),
        fit.selected(),
        names,
        fit.elapsed_ms,
        &files,
    );
    write_json(&out.join("manifest.json"), &manifest)?;

    let rows = surface_rows(fit.model.grid(), fit.model.selected(), fit.model.surfaces(), names);
    let header = format!(
        "{command}: k = {} (estimation k = {}), {} of {} features selected, {:.0} ms",
        fit.basis.k(),
        fit.estimation_basis.k(),
        rows.len(),
        fit.model.p(),
        fit.elapsed_ms
    );
    print_summary(fit.selection.as_ref(), &rows, &header);
    report_single(fit.single.as_ref());
    if let Some(outcome) = &fit.selection {
        println!("final stage: {}", stage_name(outcome));
    }
    println!("results written to {}", out.display());
    Ok(())
}

fn write_scalar(prep: &Prepared, fit: &ScalarFit, command: &'static str) -> Result<(), Failure> {
    let out = &prep.out;
    let names = &fit.block_names;
    write_scalar_model(out, &fit.model, names)?;
    let mut files = vec!["manifest.json", "coefficients.json", "diagnostics.jsonl"];
    if let Some(outcome) = &fit.selection {
        let report = PathReport::new(prep.mode, fit.k, fit.k, &[], outcome, names);
        write_json(&out.join("path.json"), &report)?;
        write_path_diagnostics(&out.join("diagnostics.jsonl"), outcome)?;
        files.push("path.json");
    }
    if let Some(single) = &fit.single {
        write_json(&out.join("fit.json"), &FitReport::new(prep.mode, fit.k, single, names))?;
        write_fit_diagnostics(&out.join("diagnostics.jsonl"), &single.diagnostics)?;
        files.push("fit.json");
    }
    let manifest = run_manifest(
        prep,
        command,
        fit.k,
        fit.k,
        fit.selected(),
        names,
        fit.elapsed_ms,
        &files,
    );
    write_json(&out.join("manifest.json"), &manifest)?;

    let rows = curve_rows(&fit.model, names);
    let header = format!(
        "{command} (scalar response): k = {}, {} of {} features selected, intercept = {:.4e}, {:.0} ms",
        fit.k,
        rows.len(),
        fit.model.p(),
        fit.model.intercept(),
        fit.elapsed_ms
    );
    print_summary(fit.selection.as_ref(), &rows, &header);
    report_single(fit.single.as_ref());
    println!("results written to {}", out.display());
    Ok(())
}

fn report_single(single: Option<&fdal_core::pipeline::SingleFit>) {
    if let Some(s) = single {
        println!(
            "lambda1 = {:.4e}, lambda2 = {:.4e} (lambda_max = {:.4e}), converged = {}, outer iterations = {}",
            s.lambda1,
            s.lambda2,
            s.lambda_max,
            s.diagnostics.converged,
            s.diagnostics.outer_iterations()
        );
        if let Some(e) = &s.error {
            eprintln!("warning: {e}");
        }
    }
}

pub fn path(args: &ModelArgs, threads: Option<usize>) -> Result<(), Failure> {
    let prep = prepare(args, threads)?;
    let opts = &prep.cfg.fit;
    let names = names_of(&prep.data);
    match &prep.data.response {
        Response::Curves(y) => {
            let fit = fit_path(y, &prep.data.features, names, opts)?;
            write_functional(&prep, &fit, "path")
        }
        Response::Scalar(y) => {
            let fit = fit_scalar_path(y, &prep.data.features, names, opts)?;
            write_scalar(&prep, &fit, "path")
        }
    }
}

pub fn fit(args: &FitArgs, threads: Option<usize>) -> Result<(), Failure> {
    let choice = match (args.c_lambda, args.lambda1, args.lambda2) {
        (Some(c), _, _) => LambdaChoice::Relative(c),
        (None, Some(lambda1), Some(lambda2)) => LambdaChoice::Absolute { lambda1, lambda2 },
        _ => return Err(Failure::usage("either --c-lambda or --lambda1 with --lambda2 is required")),
    };
    let prep = prepare(&args.model, threads)?;
    let opts = &prep.cfg.fit;
    let names = names_of(&prep.data);
    match &prep.data.response {
        Response::Curves(y) => {
            let fit = fit_single(y, &prep.data.features, names, opts, choice).usage()?;
            write_functional(&prep, &fit, "fit")
        }
        Response::Scalar(y) => {
            let fit = fit_scalar_single(y, &prep.data.features, names, opts, choice).usage()?;
            write_scalar(&prep, &fit, "fit")
        }
    }
}

/// `metrics.json` written by `evaluate`.
#[derive(Debug, Serialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub elapsed_ms: Option<f64>,
}

#[derive(Deserialize)]
struct ElapsedOnly {
    elapsed_ms: f64,
}

fn truth_dir(path: &Path) -> PathBuf {
    if path.join("surfaces.json").exists() {
        path.to_path_buf()
    } else {
        path.join("truth")
    }
}

pub fn evaluate(args: &EvaluateArgs) -> Result<(), Failure> {
    let estimate = read_surfaces(&args.estimate)
        .with_context(|| format!("reading the estimate in {}", args.estimate.display()))
        .usage()?;
    let tdir = truth_dir(&args.truth);
    let truth_model = read_surfaces(&tdir)
        .with_context(|| format!("reading the truth in {}", tdir.display()))
        .usage()?;
    let record: Option<TruthRecord> = {
        let p = tdir.join("truth.json");
        if p.exists() {
            Some(read_json_file(&p).usage()?)
        } else {
            None
        }
    };
    let test = load_dataset(&args.test)
        .with_context(|| format!("loading {}", args.test.display()))
        .usage()?;
    let observed = match &test.response {
        Response::Curves(c) => c.values(),
        Response::Scalar(_) => return Err(Failure::usage("evaluate needs a functional response")),
    };
    if estimate.p() != truth_model.p() || estimate.p() != test.features.len() {
        return Err(Failure::usage(format!(
            "feature counts differ: estimate {}, truth {}, test {}",
            estimate.p(),
            truth_model.p(),
            test.features.len()
        )));
    }
    if !estimate.grid().approx_eq(&test.grid) || !truth_model.grid().approx_eq(&test.grid) {
        return Err(Failure::usage("estimate, truth and test data use different grids"));
    }

    let truth = GroundTruth {
        p: truth_model.p(),
        active: truth_model.selected().to_vec(),
        surfaces: truth_model
            .surfaces()
            .iter()
            .enumerate()
            .map(|(i, s)| CoefficientSurface {
                bumps: record.as_ref().map(|r| r.bumps[i].clone()).unwrap_or_default(),
                values: s.clone(),
            })
            .collect(),
        signal_variance: record.as_ref().map_or(f64::NAN, |r| r.signal_variance),
        noise_variance: record.as_ref().map_or(f64::NAN, |r| r.noise_variance),
    };
    let predictions = estimate.predict(&test.features).usage()?;
    let pairs: Vec<(usize, &nalgebra::DMatrix<f64>)> =
        estimate.selected().iter().copied().zip(estimate.surfaces()).collect();
    let metrics = metrics_from_parts(&test.grid, &pairs, &truth, &predictions, observed)?;
    let elapsed_ms = read_json_file::<ElapsedOnly>(&args.estimate.join("manifest.json"))
        .ok()
        .map(|e| e.elapsed_ms);
    let report = MetricsReport {
        schema_version: SCHEMA_VERSION,
        metrics,
        elapsed_ms,
    };
    let text = serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?;
    println!("{text}");
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    Ok(())
}
