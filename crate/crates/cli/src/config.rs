use std::path::{Path, PathBuf};

use fdal_core::dal::SolverMode;
use fdal_core::pipeline::FitOptions;
use fdal_core::selection::{AdaptiveMode, Criterion};
use fdal_core::simulation::{Regime, ScenarioConfig};
use serde::{Deserialize, Serialize};

use crate::args::{
    AdaptiveArg, CriterionArg, ModeArg, ModelArgs, RegimeArg, SimulateArgs, SolverModeArg,
};
use crate::failure::{Failure, ResultExt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Functional,
    Scalar,
}

/// Settings of a `fit` or `path` run, as read from `--config` and
/// overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub mode: Option<Mode>,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
    pub fit: FitOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: fdal_core::io::SCHEMA_VERSION,
            mode: None,
            input: None,
            output: None,
            threads: None,
            fit: FitOptions::default(),
        }
    }
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("invalid config {}: {e}", path.display())))
}

impl RunConfig {
    pub fn resolve(args: &ModelArgs, threads: Option<usize>) -> Result<Self, Failure> {
        let mut cfg: RunConfig = match &args.config {
            Some(p) => read_config(p)?,
            None => RunConfig::default(),
        };
        if cfg.schema_version != fdal_core::io::SCHEMA_VERSION {
            return Err(Failure::usage(format!(
                "unsupported config schema version {}",
                cfg.schema_version
            )));
        }
        if let Some(m) = args.mode {
            cfg.mode = Some(match m {
                ModeArg::Functional => Mode::Functional,
                ModeArg::Scalar => Mode::Scalar,
            });
        }
        if args.input.is_some() {
            cfg.input = args.input.clone();
        }
        if args.out.is_some() {
            cfg.output = args.out.clone();
        }
        if threads.is_some() {
            cfg.threads = threads;
        }

        let fit = &mut cfg.fit;
        if let Some(v) = args.variance_threshold {
            fit.variance_threshold = v;
        }
        if args.k.is_some() {
            fit.k = args.k;
        }
        if let Some(v) = args.k_max {
            fit.k_max = v;
        }
        let path = &mut fit.path;
        if let Some(v) = args.alpha {
            path.alpha = v;
        }
        if let Some(v) = args.n_lambda {
            path.n_lambda = v;
        }
        if let Some(v) = args.c_min {
            path.c_min = v;
        }
        if args.max_selected.is_some() {
            path.max_selected = args.max_selected;
        }
        if let Some(v) = args.criterion {
            path.criterion = match v {
                CriterionArg::Gcv => Criterion::Gcv,
                CriterionArg::Cv => Criterion::Cv,
            };
        }
        if let Some(v) = args.cv_folds {
            path.cv_folds = v;
        }
        if let Some(v) = args.adaptive {
            path.adaptive = match v {
                AdaptiveArg::None => AdaptiveMode::None,
                AdaptiveArg::Full => AdaptiveMode::Full,
                AdaptiveArg::Soft => AdaptiveMode::Soft,
            };
        }
        if let Some(v) = args.seed {
            path.seed = v;
        }
        if args.no_screening {
            path.screening = false;
        }
        let solver = &mut path.solver;
        if let Some(v) = args.tol {
            solver.tol_kkt1 = v;
            solver.tol_kkt3 = v;
        }
        if args.sigma0.is_some() {
            solver.sigma0 = args.sigma0;
        }
        if let Some(v) = args.sigma_growth {
            solver.sigma_growth = v;
        }
        if let Some(v) = args.solver_mode {
            solver.mode = match v {
                SolverModeArg::Auto => SolverMode::Auto,
                SolverModeArg::Direct => SolverMode::Direct,
                SolverModeArg::Woodbury => SolverMode::Woodbury,
            };
        }

        cfg.fit.validate().usage()?;
        if cfg.threads == Some(0) {
            return Err(Failure::usage("--threads must be positive"));
        }
        if cfg.input.is_none() {
            return Err(Failure::usage("an input manifest is required (--input)"));
        }
        if cfg.output.is_none() {
            return Err(Failure::usage("an output directory is required (--out)"));
        }
        Ok(cfg)
    }
}

pub fn resolve_scenario(args: &SimulateArgs) -> Result<ScenarioConfig, Failure> {
    let mut cfg: ScenarioConfig = match &args.config {
        Some(p) => read_config(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(v) = args.n {
        cfg.n = v;
    }
    if let Some(v) = args.p {
        cfg.p = v;
    }
    if let Some(v) = args.p0 {
        cfg.p0 = v;
    }
    if let Some(v) = args.snr {
        cfg.snr = v;
    }
    if let Some(v) = args.regime {
        cfg.regime = match v {
            RegimeArg::Easy => Regime::Easy,
            RegimeArg::Difficult => Regime::Difficult,
        };
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.m {
        cfg.m = v;
    }
    cfg.validate().usage()?;
    Ok(cfg)
}
