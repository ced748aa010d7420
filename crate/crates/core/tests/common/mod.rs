//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use fdal_core::functional::ScoreDesign;
use fdal_core::penalty::{BlockMatrix, PenaltyParams};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// Minimizer of a unimodal function on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, lo0: f64, hi0: f64) -> f64 {
    let (mut lo, mut hi) = (lo0, hi0);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..300 {
        if hi - lo <= 1e-15 * (1.0 + hi.abs()) {
            break;
        }
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    // The endpoints can beat the interior bracket when the minimum sits on one.
    [0.5 * (lo + hi), lo0, hi0]
        .into_iter()
        .min_by(|x, y| f(*x).partial_cmp(&f(*y)).unwrap())
        .unwrap()
}

/// `0.5 ||U - B||^2 + sigma w (l1 ||U|| + l2/2 ||U||^2)` for one block.
pub fn prox_objective(u: &DMatrix<f64>, b: &DMatrix<f64>, sigma: f64, w: f64, l1: f64, l2: f64) -> f64 {
    let nu = u.norm();
    0.5 * (u - b).norm_squared() + sigma * w * (l1 * nu + 0.5 * l2 * nu * nu)
}

/// Numerical minimizer of the block prox objective.
///
/// The objective is rotation invariant around `B`, so the minimizer is
/// `t B / ||B||` for a scalar `t` found by golden-section search.
pub fn prox_oracle(b: &DMatrix<f64>, sigma: f64, w: f64, l1: f64, l2: f64) -> DMatrix<f64> {
    let nb = b.norm();
    if nb == 0.0 {
        return b.clone();
    }
    let f = |t: f64| 0.5 * (nb - t).powi(2) + sigma * w * (l1 * t + 0.5 * l2 * t * t);
    let t = golden_section(f, 0.0, nb);
    b * (t / nb)
}

/// `sup_U <Z, U> - w (l1 ||U|| + l2/2 ||U||^2)` by a scalar search along `Z`.
pub fn conjugate_oracle(z_norm: f64, w: f64, l1: f64, l2: f64) -> f64 {
    let g = |t: f64| -(t * z_norm - w * (l1 * t + 0.5 * l2 * t * t));
    let hi = 2.0 * z_norm / (w * l2) + 1.0;
    let t = golden_section(g, 0.0, hi);
    -g(t)
}

pub fn random_design(n: usize, p: usize, k: usize, q: usize, rng: &mut ChaCha8Rng) -> ScoreDesign {
    let x = normal(n, p * k, rng);
    let mut b = DMatrix::zeros(p * k, q);
    for j in 0..p.min(3) {
        let blk = normal(k, q, rng);
        b.view_mut((j * k, 0), (k, q)).copy_from(&blk);
    }
    let y = &x * &b + normal(n, q, rng) * 0.5;
    ScoreDesign::unnamed(y, x, k).unwrap()
}

/// `0.5 ||Y - XB||^2 + sum_j w_j (l1 ||B_j|| + l2/2 ||B_j||^2)`.
pub fn primal(design: &ScoreDesign, b: &DMatrix<f64>, params: &PenaltyParams) -> f64 {
    let k = design.k();
    let r = design.y() - design.x() * b;
    let mut pen = 0.0;
    for j in 0..design.p() {
        let nb = b.rows(j * k, k).norm();
        pen += params.weight(j) * (params.lambda1() * nb + 0.5 * params.lambda2() * nb * nb);
    }
    0.5 * r.norm_squared() + pen
}

/// Accelerated proximal gradient on the primal problem, run until the
/// iterates change by less than `tol` relative.
pub fn proximal_gradient(design: &ScoreDesign, params: &PenaltyParams, tol: f64) -> BlockMatrix {
    let (x, y, k) = (design.x(), design.y(), design.k());
    let lip = x.tr_mul(x).symmetric_eigenvalues().max();
    let step = 1.0 / lip;
    let mut b = DMatrix::zeros(x.ncols(), y.ncols());
    let mut z = b.clone();
    let mut t = 1.0_f64;
    let mut last_obj = f64::INFINITY;
    for _ in 0..500_000 {
        let grad = x.tr_mul(&(x * &z - y));
        let mut next = &z - grad * step;
        for j in 0..design.p() {
            let w = params.weight(j);
            let mut blk = next.rows_mut(j * k, k);
            let nv = blk.norm();
            let shrink = if nv > 0.0 {
                (1.0 - step * w * params.lambda1() / nv).max(0.0) / (1.0 + step * w * params.lambda2())
            } else {
                0.0
            };
            blk *= shrink;
        }
        let obj = primal(design, &next, params);
        // Restart momentum when the objective goes up.
        let t_next = if obj > last_obj { 1.0 } else { (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0 };
        let delta = (&next - &b).norm();
        z = &next + (&next - &b) * ((t - 1.0) / t_next);
        t = t_next;
        b = next;
        last_obj = obj;
        if delta <= tol * (1.0 + b.norm()) {
            break;
        }
    }
    BlockMatrix::new(b, k).unwrap()
}

/// Cyclic coordinate descent for the weighted elastic net
/// `0.5 ||y - Xb||^2 + sum_j w_j (l1 |b_j| + l2/2 b_j^2)`.
pub fn coordinate_descent(x: &DMatrix<f64>, y: &[f64], w: &[f64], l1: f64, l2: f64) -> Vec<f64> {
    let (n, p) = x.shape();
    let mut b = vec![0.0; p];
    let mut r: Vec<f64> = y.to_vec();
    let sq: Vec<f64> = (0..p).map(|j| x.column(j).norm_squared()).collect();
    for _ in 0..100_000 {
        let mut change = 0.0_f64;
        for j in 0..p {
            let col = x.column(j);
            let rho: f64 = (0..n).map(|i| col[i] * r[i]).sum::<f64>() + sq[j] * b[j];
            let thr = w[j] * l1;
            let soft = if rho > thr {
                rho - thr
            } else if rho < -thr {
                rho + thr
            } else {
                0.0
            };
            let nb = soft / (sq[j] + w[j] * l2);
            let d = nb - b[j];
            if d != 0.0 {
                for i in 0..n {
                    r[i] -= col[i] * d;
                }
                b[j] = nb;
            }
            change = change.max(d.abs());
        }
        if change < 1e-15 {
            break;
        }
    }
    b
}

/// `K_nu(x)` from `int_0^inf exp(-x cosh u) cosh(nu u) du` (composite Simpson).
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    // The integrand is below 1e-300 once x cosh u > 700.
    let upper = (700.0 / x).acosh().max(1.0) + 1.0;
    let steps = 200_000;
    let h = upper / steps as f64;
    let f = |u: f64| (-x * u.cosh()).exp() * (nu * u).cosh();
    let mut acc = f(0.0) + f(upper);
    for i in 1..steps {
        let u = i as f64 * h;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(u);
    }
    acc * h / 3.0
}

/// General Matern covariance at lag `d` through the Bessel integral.
pub fn matern_reference(d: f64, eta2: f64, length: f64, nu: f64) -> f64 {
    if d == 0.0 {
        return eta2;
    }
    let z = (2.0 * nu).sqrt() * d / length;
    eta2 * 2f64.powf(1.0 - nu) / statrs::function::gamma::gamma(nu) * z.powf(nu) * bessel_k(nu, z)
}
