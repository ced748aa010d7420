use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use fdal_core::dal::DalDiagnostics;
use fdal_core::functional::Grid;
use fdal_core::io::{write_csv_matrix, write_json, SCHEMA_VERSION};
use fdal_core::model::ScalarModel;
use fdal_core::pipeline::SingleFit;
use fdal_core::selection::{PathPoint, PathResult, SelectionOutcome};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::{Mode, RunConfig};

/// `manifest.json` of a run directory.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: &'static str,
    pub command: &'static str,
    pub mode: Mode,
    pub input: String,
    pub config: RunConfig,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    /// FPCs used for selection.
    pub k: usize,
    /// FPCs used for the final estimate.
    pub estimation_k: usize,
    pub selected: Vec<usize>,
    pub selected_names: Vec<String>,
    pub elapsed_ms: f64,
    pub files: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct KError {
    pub k: usize,
    pub error: f64,
}

/// `path.json`: both path stages with per-point diagnostics.
#[derive(Debug, Serialize)]
pub struct PathReport<'a> {
    pub schema_version: u32,
    pub mode: Mode,
    pub k: usize,
    pub estimation_k: usize,
    /// Cross-validated curve error per candidate basis size (soft mode).
    pub k_errors: Vec<KError>,
    pub null_model: bool,
    pub final_stage: &'static str,
    pub block_names: &'a [String],
    pub initial: &'a PathResult,
    pub adaptive: Option<&'a PathResult>,
}

impl<'a> PathReport<'a> {
    pub fn new(
        mode: Mode,
        k: usize,
        estimation_k: usize,
        k_errors: &[(usize, f64)],
        outcome: &'a SelectionOutcome,
        block_names: &'a [String],
    ) -> Self {
        PathReport {
            schema_version: SCHEMA_VERSION,
            mode,
            k,
            estimation_k,
            k_errors: k_errors.iter().map(|&(k, error)| KError { k, error }).collect(),
            null_model: outcome.null_model,
            final_stage: stage_name(outcome),
            block_names,
            initial: &outcome.initial,
            adaptive: outcome.adaptive.as_ref(),
        }
    }
}

pub fn stage_name(outcome: &SelectionOutcome) -> &'static str {
    if outcome.adaptive.is_some() {
        "adaptive"
    } else {
        "initial"
    }
}

/// `fit.json`: result of a single-penalty solve.
#[derive(Debug, Serialize)]
pub struct FitReport<'a> {
    pub schema_version: u32,
    pub mode: Mode,
    pub k: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda_max: f64,
    pub c_lambda: f64,
    pub selected: &'a [usize],
    pub selected_names: Vec<String>,
    pub converged: bool,
    pub outer_iterations: usize,
    pub newton_steps: usize,
    pub res1: f64,
    pub res3: f64,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub relative_gap: f64,
    pub error: Option<&'a str>,
    pub elapsed_ms: f64,
}

impl<'a> FitReport<'a> {
    pub fn new(mode: Mode, k: usize, single: &'a SingleFit, names: &[String]) -> Self {
        let d = &single.diagnostics;
        FitReport {
            schema_version: SCHEMA_VERSION,
            mode,
            k,
            lambda1: single.lambda1,
            lambda2: single.lambda2,
            lambda_max: single.lambda_max,
            c_lambda: if single.lambda_max > 0.0 {
                single.lambda1 / single.lambda_max
            } else {
                f64::NAN
            },
            selected: &single.selected,
            selected_names: single.selected.iter().map(|&j| names[j].clone()).collect(),
            converged: d.converged,
            outer_iterations: d.outer_iterations(),
            newton_steps: d.newton_steps,
            res1: d.res1,
            res3: d.res3,
            primal_obj: d.primal_obj,
            dual_obj: d.dual_obj,
            relative_gap: d.relative_gap(),
            error: single.error.as_deref(),
            elapsed_ms: d.elapsed_ms,
        }
    }
}

#[derive(Serialize)]
struct PointLine<'a> {
    stage: &'static str,
    index: usize,
    best: bool,
    #[serde(flatten)]
    point: &'a PathPoint,
}

#[derive(Serialize)]
struct OuterLine<'a> {
    stage: &'static str,
    index: usize,
    #[serde(flatten)]
    record: &'a fdal_core::dal::OuterRecord,
}

fn jsonl_writer(path: &Path) -> std::io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_line<T: Serialize>(w: &mut impl Write, value: &T) -> anyhow::Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// One line per solved path point, initial stage first.
pub fn write_path_diagnostics(path: &Path, outcome: &SelectionOutcome) -> anyhow::Result<()> {
    let mut w = jsonl_writer(path)?;
    let stages = [("initial", Some(&outcome.initial)), ("adaptive", outcome.adaptive.as_ref())];
    for (stage, result) in stages {
        let Some(result) = result else { continue };
        for (index, point) in result.points.iter().enumerate() {
            let best = result.best_index == Some(index);
            write_line(&mut w, &PointLine { stage, index, best, point })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One line per outer DAL iteration.
pub fn write_fit_diagnostics(path: &Path, diagnostics: &DalDiagnostics) -> anyhow::Result<()> {
    let mut w = jsonl_writer(path)?;
    for (index, record) in diagnostics.outer.iter().enumerate() {
        write_line(&mut w, &OuterLine { stage: "single", index, record })?;
    }
    w.flush()?;
    Ok(())
}

/// `coefficients.json`: index of the curves of a scalar-response model.
#[derive(Debug, Serialize)]
pub struct ScalarCoefficients {
    pub schema_version: u32,
    pub p: usize,
    pub m: usize,
    pub grid_start: f64,
    pub grid_end: f64,
    pub selected: Vec<usize>,
    pub names: Vec<String>,
    /// One row of `m` values per selected feature.
    pub files: Vec<String>,
    pub intercept: f64,
}

pub fn write_scalar_model(dir: &Path, model: &ScalarModel, names: &[String]) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(dir.join("blocks"))?;
    let mut files = Vec::new();
    for (&j, curve) in model.selected().iter().zip(model.curves()) {
        let file = format!("blocks/{}.csv", names[j]);
        write_csv_matrix(&dir.join(&file), &DMatrix::from_row_slice(1, curve.len(), curve))?;
        files.push(file);
    }
    let grid = model.grid();
    let index = ScalarCoefficients {
        schema_version: SCHEMA_VERSION,
        p: model.p(),
        m: grid.len(),
        grid_start: grid.start(),
        grid_end: grid.end(),
        selected: model.selected().to_vec(),
        names: model.selected().iter().map(|&j| names[j].clone()).collect(),
        files,
        intercept: model.intercept(),
    };
    let path = dir.join("coefficients.json");
    write_json(&path, &index)?;
    Ok(path)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4e}")).unwrap_or_else(|| "-".into())
}

/// Stage summary and a per-feature table of the final model.
pub fn print_summary(
    outcome: Option<&SelectionOutcome>,
    features: &[(usize, &str, f64)],
    header: &str,
) {
    println!("{header}");
    if let Some(outcome) = outcome {
        println!(
            "{:<10} {:>6} {:>10} {:>11} {:>11} {:>9} {:>11}",
            "stage", "point", "c_lambda", "lambda1", "lambda2", "selected", "score"
        );
        let stages = [("initial", Some(&outcome.initial)), ("adaptive", outcome.adaptive.as_ref())];
        for (stage, result) in stages {
            let Some(result) = result else { continue };
            match result.best() {
                Some(b) => println!(
                    "{:<10} {:>6} {:>10.4} {:>11.4e} {:>11.4e} {:>9} {:>11}",
                    stage,
                    result.best_index.unwrap_or(0),
                    b.c_lambda,
                    b.lambda1,
                    b.lambda2,
                    b.selected_blocks.len(),
                    fmt_opt(b.criterion_score)
                ),
                None => println!("{stage:<10} no scored point"),
            }
        }
        if outcome.null_model {
            println!("the initial path selected no features");
        }
    }
    if features.is_empty() {
        println!("selected features: none");
        return;
    }
    println!("{:<8} {:<20} {:>12}", "index", "name", "l2 norm");
    for (j, name, norm) in features {
        println!("{j:<8} {name:<20} {norm:>12.4e}");
    }
}

/// `(index, name, L2 norm)` for each surface of a functional model.
pub fn surface_rows<'a>(
    grid: &Grid,
    selected: &[usize],
    surfaces: &[DMatrix<f64>],
    names: &'a [String],
) -> Vec<(usize, &'a str, f64)> {
    selected
        .iter()
        .zip(surfaces)
        .map(|(&j, s)| (j, names[j].as_str(), grid.surface_norm(s)))
        .collect()
}

pub fn curve_rows<'a>(model: &ScalarModel, names: &'a [String]) -> Vec<(usize, &'a str, f64)> {
    model
        .selected()
        .iter()
        .zip(model.curves())
        .map(|(&j, c)| (j, names[j].as_str(), model.grid().norm(c)))
        .collect()
}
