use std::time::Instant;

use nalgebra::DMatrix;

use super::newton::NewtonSystem;
use super::objective::{
    block_norm_sum, dual_objective, primal_objective, prox_with_norms, psi_from_parts,
    res1_denominator, row_norm_sum, shifted, x_times, xt_v, z_from_parts,
};
use super::{DalConfig, DalDiagnostics, DalSolution, DalState, OuterRecord};
use crate::error::{Error, Result};
use crate::functional::ScoreDesign;
use crate::penalty::{BlockMatrix, PenaltyParams};

const MAX_HALVINGS: usize = 20;
const DESCENT_SLACK: f64 = 1e-12;

/// Inner-loop quantities evaluated at the current `V`.
struct InnerEval {
    t: BlockMatrix,
    prox_t: BlockMatrix,
    norms: Vec<f64>,
    gradient: DMatrix<f64>,
    psi: f64,
}

fn evaluate(
    v: &DMatrix<f64>,
    xtv: &BlockMatrix,
    b: &BlockMatrix,
    b_norm_sq: f64,
    sigma: f64,
    design: &ScoreDesign,
    params: &PenaltyParams,
) -> InnerEval {
    let t = shifted(b, xtv, sigma);
    let (prox_t, norms) = prox_with_norms(&t, sigma, params);
    let gradient = v + design.y() - x_times(design, &prox_t);
    let psi = psi_from_parts(v, design.y(), &prox_t, b_norm_sq, sigma, params);
    InnerEval {
        t,
        prox_t,
        norms,
        gradient,
        psi,
    }
}

fn psi_only(
    v: &DMatrix<f64>,
    xtv: &BlockMatrix,
    b: &BlockMatrix,
    b_norm_sq: f64,
    sigma: f64,
    design: &ScoreDesign,
    params: &PenaltyParams,
) -> f64 {
    let t = shifted(b, xtv, sigma);
    let (prox_t, _) = prox_with_norms(&t, sigma, params);
    psi_from_parts(v, design.y(), &prox_t, b_norm_sq, sigma, params)
}

fn check_inputs(design: &ScoreDesign, params: &PenaltyParams, config: &DalConfig) -> Result<()> {
    config.validate()?;
    if params.p() != design.p() {
        return Err(Error::DimensionMismatch(format!(
            "penalty has {} weights, design has {} blocks",
            params.p(),
            design.p()
        )));
    }
    if !params.lambda2().is_finite() || params.lambda2() <= 0.0 {
        return Err(Error::InvalidParameter("lambda2 must be positive".into()));
    }
    if design.x().iter().chain(design.y().iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("design contains non-finite values".into()));
    }
    Ok(())
}

fn initial_state(
    design: &ScoreDesign,
    config: &DalConfig,
    warm: Option<&DalState>,
) -> Result<DalState> {
    let (n, p, k, q) = (design.n(), design.p(), design.k(), design.q());
    let sigma0 = config.initial_sigma(p);
    match warm {
        None => Ok(DalState {
            v: DMatrix::zeros(n, q),
            z: BlockMatrix::zeros(p, k, q),
            b: BlockMatrix::zeros(p, k, q),
            sigma: sigma0,
            active: Vec::new(),
        }),
        Some(w) => {
            if w.v.shape() != (n, q)
                || w.b.data().shape() != (p * k, q)
                || w.z.data().shape() != (p * k, q)
            {
                return Err(Error::DimensionMismatch(
                    "warm start does not match the design".into(),
                ));
            }
            let mut s = w.clone();
            s.sigma = w.sigma.clamp(sigma0, config.sigma_cap);
            Ok(s)
        }
    }
}

/// Solves `min_B ||Y - XB||^2/2 + pi(B)` through its dual.
///
/// Each outer iteration minimizes `psi` over `V` by Newton steps, sets
/// `Z` in closed form, moves the multiplier to `B = prox_{sigma pi}(T)` and
/// grows `sigma`. Stops when `res(kkt3) <= tol_kkt3`.
pub fn solve(
    design: &ScoreDesign,
    params: &PenaltyParams,
    config: &DalConfig,
    warm: Option<&DalState>,
) -> Result<DalSolution> {
    check_inputs(design, params, config)?;
    let start = Instant::now();
    let state = initial_state(design, config, warm)?;
    let DalState {
        mut v,
        mut z,
        mut b,
        mut sigma,
        ..
    } = state;

    let denom1 = res1_denominator(design);
    let mut diag = DalDiagnostics::default();
    let mut first_r = None;

    for s in 0..config.max_outer {
        let inner_tol = config.tol_kkt1.min(0.1f64.powi(s as i32));
        let b_norm_sq = b.data().norm_squared();
        let mut xtv = xt_v(design, &v);
        let mut cur = evaluate(&v, &xtv, &b, b_norm_sq, sigma, design, params);
        let mut steps = 0usize;
        let mut res1 = row_norm_sum(&cur.gradient) / denom1;

        while res1 > inner_tol && steps < config.max_inner {
            let t_solve = Instant::now();
            let system = NewtonSystem::from_parts(
                design,
                &cur.t,
                &cur.norms,
                cur.gradient.clone(),
                sigma,
                params,
                config.mode,
            );
            let d = system.direction()?;
            diag.newton_time_ms += t_solve.elapsed().as_secs_f64() * 1e3;
            diag.newton_solves += 1;

            let xtd = xt_v(design, &d);
            let slack = DESCENT_SLACK * cur.psi.abs().max(1.0);
            let mut step = 1.0;
            let mut accepted = None;
            for halving in 0..=MAX_HALVINGS {
                let v_new = &v + &d * step;
                let mut xtv_new = xtv.clone();
                *xtv_new.data_mut() += xtd.data() * step;
                let psi_new = psi_only(&v_new, &xtv_new, &b, b_norm_sq, sigma, design, params);
                if psi_new <= cur.psi + slack {
                    if halving > 0 {
                        diag.safeguard_steps += 1;
                    }
                    accepted = Some((v_new, xtv_new));
                    break;
                }
                step *= 0.5;
            }
            steps += 1;
            match accepted {
                Some((v_new, xtv_new)) => {
                    v = v_new;
                    xtv = xtv_new;
                    cur = evaluate(&v, &xtv, &b, b_norm_sq, sigma, design, params);
                    res1 = row_norm_sum(&cur.gradient) / denom1;
                }
                None => {
                    // No decrease is attainable in floating point; the
                    // direction is numerically zero.
                    diag.stalled_inner += 1;
                    break;
                }
            }
        }
        diag.newton_steps += steps;

        let r = cur
            .norms
            .iter()
            .enumerate()
            .filter(|&(j, &nrm)| nrm >= sigma * params.weight(j) * params.lambda1())
            .count();
        first_r.get_or_insert(r);

        z = z_from_parts(&cur.t, &cur.prox_t, sigma);
        let mut gap = b.clone();
        *gap.data_mut() -= cur.prox_t.data();
        let res3 =
            block_norm_sum(&gap) / sigma / (1.0 + row_norm_sum(&v) + block_norm_sum(&z));
        b = cur.prox_t;

        let primal = primal_objective(&b, design, params);
        let mut feasible = xtv;
        feasible.data_mut().neg_mut();
        let dual = dual_objective(&v, &feasible, design, params);
        diag.outer.push(OuterRecord {
            sigma,
            r,
            res1,
            res3,
            psi: cur.psi,
            primal_obj: primal,
            dual_obj: dual,
            newton_steps: steps,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });

        if res3 <= config.tol_kkt3 {
            diag.converged = true;
            diag.res1 = res1;
            diag.res3 = res3;
            diag.primal_obj = primal;
            diag.dual_obj = dual;
            diag.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
            let active = b.nonzero_blocks();
            return Ok(DalSolution {
                state: DalState {
                    v,
                    z,
                    b,
                    sigma,
                    active,
                },
                diagnostics: diag,
            });
        }
        sigma = (sigma * config.sigma_growth).min(config.sigma_cap);
        diag.res1 = res1;
        diag.res3 = res3;
        diag.primal_obj = primal;
        diag.dual_obj = dual;
    }

    diag.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    let active = b.nonzero_blocks();
    let res3 = diag.res3;
    Err(Error::MaxIterations {
        iterations: config.max_outer,
        res3,
        best: Box::new(DalSolution {
            state: DalState {
                v,
                z,
                b,
                sigma,
                active,
            },
            diagnostics: diag,
        }),
    })
}
