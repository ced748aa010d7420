//! Scalar objectives, gradients and KKT residuals of the primal/dual pair
//! `min_B h(XB) + pi(B)` and `min_{V,Z} h*(V) + pi*(Z) s.t. X^T V + Z = 0`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::functional::ScoreDesign;
use crate::penalty::{
    conjugate_value, frobenius, penalty_value, prox_scale, BlockMatrix, PenaltyParams,
};

/// `h*(V) = ||V||^2 / 2 + <Y, V>`.
pub fn h_star(v: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    0.5 * v.norm_squared() + y.dot(v)
}

/// `X^T V` as a block matrix.
pub(crate) fn xt_v(design: &ScoreDesign, v: &DMatrix<f64>) -> BlockMatrix {
    BlockMatrix::new(design.x().tr_mul(v), design.k()).expect("design block size")
}

/// `sum_j X_j B_j` over blocks with a nonzero coefficient.
pub(crate) fn x_times(design: &ScoreDesign, b: &BlockMatrix) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(design.n(), b.q());
    for j in b.nonzero_blocks() {
        out.gemm(1.0, &design.block(j), &b.block(j), 1.0);
    }
    out
}

/// `T = B - sigma X^T V` given a precomputed `X^T V`.
pub(crate) fn shifted(b: &BlockMatrix, xtv: &BlockMatrix, sigma: f64) -> BlockMatrix {
    let mut t = b.clone();
    *t.data_mut() -= xtv.data() * sigma;
    t
}

/// `prox_{sigma pi}(T)` together with the block norms of `T`.
pub(crate) fn prox_with_norms(
    t: &BlockMatrix,
    sigma: f64,
    params: &PenaltyParams,
) -> (BlockMatrix, Vec<f64>) {
    let norms = t.block_norms();
    let mut out = t.clone();
    for (j, &nrm) in norms.iter().enumerate() {
        let s = prox_scale(nrm, sigma, params.weight(j), params);
        if s == 0.0 {
            out.block_mut(j).fill(0.0);
        } else {
            out.block_mut(j).scale_mut(s);
        }
    }
    (out, norms)
}

/// `psi` from a precomputed prox and `||B||^2`.
pub(crate) fn psi_from_parts(
    v: &DMatrix<f64>,
    y: &DMatrix<f64>,
    prox_t: &BlockMatrix,
    b_norm_sq: f64,
    sigma: f64,
    params: &PenaltyParams,
) -> f64 {
    let mut acc = 0.0;
    for j in prox_t.nonzero_blocks() {
        let nrm = prox_t.block_norm(j);
        acc += (1.0 + sigma * params.weight(j) * params.lambda2()) * nrm * nrm;
    }
    h_star(v, y) + (acc - b_norm_sq) / (2.0 * sigma)
}

/// `psi(V) = L_sigma(V, Zbar(V) | B)`, the inner objective after the Z
/// variable has been minimized out.
pub fn psi_value(
    v: &DMatrix<f64>,
    b: &BlockMatrix,
    sigma: f64,
    design: &ScoreDesign,
    params: &PenaltyParams,
) -> f64 {
    let t = shifted(b, &xt_v(design, v), sigma);
    let (prox_t, _) = prox_with_norms(&t, sigma, params);
    psi_from_parts(v, design.y(), &prox_t, b.data().norm_squared(), sigma, params)
}

/// `grad psi(V) = V + Y - X prox_{sigma pi}(T)`.
pub fn psi_gradient(
    v: &DMatrix<f64>,
    b: &BlockMatrix,
    sigma: f64,
    design: &ScoreDesign,
    params: &PenaltyParams,
) -> DMatrix<f64> {
    let t = shifted(b, &xt_v(design, v), sigma);
    let (prox_t, _) = prox_with_norms(&t, sigma, params);
    v + design.y() - x_times(design, &prox_t)
}

/// Closed-form Z minimizer `B/sigma - X^T V - prox_{sigma pi}(B - sigma X^T V)/sigma`.
pub fn z_update(
    v: &DMatrix<f64>,
    b: &BlockMatrix,
    sigma: f64,
    design: &ScoreDesign,
    params: &PenaltyParams,
) -> BlockMatrix {
    let t = shifted(b, &xt_v(design, v), sigma);
    let (prox_t, _) = prox_with_norms(&t, sigma, params);
    z_from_parts(&t, &prox_t, sigma)
}

pub(crate) fn z_from_parts(t: &BlockMatrix, prox_t: &BlockMatrix, sigma: f64) -> BlockMatrix {
    let mut z = t.clone();
    *z.data_mut() -= prox_t.data();
    z.data_mut().scale_mut(1.0 / sigma);
    z
}

/// Augmented Lagrangian
/// `h*(V) + pi*(Z) - <B, X^T V + Z> + sigma/2 ||X^T V + Z||^2`.
pub fn augmented_lagrangian(
    v: &DMatrix<f64>,
    z: &BlockMatrix,
    b: &BlockMatrix,
    sigma: f64,
    design: &ScoreDesign,
    params: &PenaltyParams,
) -> f64 {
    let mut c = xt_v(design, v);
    *c.data_mut() += z.data();
    h_star(v, design.y()) + conjugate_value(z, params) - b.data().dot(c.data())
        + 0.5 * sigma * c.data().norm_squared()
}

/// Primal objective `||Y - XB||^2 / 2 + pi(B)`.
pub fn primal_objective(b: &BlockMatrix, design: &ScoreDesign, params: &PenaltyParams) -> f64 {
    let r = design.y() - x_times(design, b);
    0.5 * r.norm_squared() + penalty_value(b, params)
}

/// Dual objective `h*(V) + pi*(Z)`; at a primal-dual optimum it equals
/// minus the primal objective.
pub fn dual_objective(
    v: &DMatrix<f64>,
    z: &BlockMatrix,
    design: &ScoreDesign,
    params: &PenaltyParams,
) -> f64 {
    h_star(v, design.y()) + conjugate_value(z, params)
}

/// Standardized residuals of the first and third KKT equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    pub res1: f64,
    pub res3: f64,
}

pub(crate) fn row_norm_sum(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.norm()).sum()
}

pub(crate) fn block_norm_sum(b: &BlockMatrix) -> f64 {
    (0..b.p()).map(|j| b.block_norm(j)).sum()
}

/// `1 + sum_i ||Y_i|| + sum_j ||X_j||`, fixed for a design.
pub(crate) fn res1_denominator(design: &ScoreDesign) -> f64 {
    let xs: f64 = (0..design.p()).map(|j| frobenius(design.block(j))).sum();
    1.0 + row_norm_sum(design.y()) + xs
}

/// `res(kkt3) = sum_j ||X_j^T V + Z_j|| / (1 + sum_i ||V_i|| + sum_j ||Z_j||)` and
/// `res(kkt1) = sum_i ||(V + Y - XB)_i|| / (1 + sum_i ||Y_i|| + sum_j ||X_j||)`.
pub fn kkt_residuals(
    v: &DMatrix<f64>,
    z: &BlockMatrix,
    b: &BlockMatrix,
    design: &ScoreDesign,
) -> KktResiduals {
    let mut c = xt_v(design, v);
    *c.data_mut() += z.data();
    let res3 = block_norm_sum(&c) / (1.0 + row_norm_sum(v) + block_norm_sum(z));
    let r1 = v + design.y() - x_times(design, b);
    let res1 = row_norm_sum(&r1) / res1_denominator(design);
    KktResiduals { res1, res3 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0))
    }

    fn instance(seed: u64) -> (ScoreDesign, PenaltyParams) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, p, k) = (7, 3, 2);
        let d = ScoreDesign::unnamed(random(n, k, &mut rng), random(n, p * k, &mut rng), k).unwrap();
        let params = PenaltyParams::new(0.4, 0.3, vec![1.0, 0.5, 2.0]).unwrap();
        (d, params)
    }

    #[test]
    fn h_star_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = random(4, 3, &mut rng);
        assert_eq!(h_star(&DMatrix::zeros(4, 3), &y), 0.0);
        assert!((h_star(&(-&y), &y) + 0.5 * y.norm_squared()).abs() < 1e-14);
        let v = random(4, 3, &mut rng);
        let mut naive = 0.0;
        for i in 0..4 {
            for c in 0..3 {
                naive += 0.5 * v[(i, c)] * v[(i, c)] + y[(i, c)] * v[(i, c)];
            }
        }
        assert!((h_star(&v, &y) - naive).abs() < 1e-12);
    }

    #[test]
    fn psi_at_origin_is_zero() {
        let (d, params) = instance(2);
        let v = DMatrix::zeros(d.n(), d.q());
        let b = BlockMatrix::zeros(d.p(), d.k(), d.q());
        assert_eq!(psi_value(&v, &b, 0.7, &d, &params), 0.0);
    }

    #[test]
    fn psi_with_all_blocks_thresholded() {
        let (d, _) = instance(3);
        let params = PenaltyParams::uniform(1e6, 0.3, d.p()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = random(d.n(), d.q(), &mut rng);
        let b = BlockMatrix::new(random(d.p() * d.k(), d.q(), &mut rng), d.k()).unwrap();
        let sigma = 0.8;
        let expect = h_star(&v, d.y()) - b.data().norm_squared() / (2.0 * sigma);
        assert!((psi_value(&v, &b, sigma, &d, &params) - expect).abs() < 1e-12);
        let g = psi_gradient(&v, &b, sigma, &d, &params);
        assert!((g - (&v + d.y())).abs().max() < 1e-14);
    }

    #[test]
    fn psi_equals_lagrangian_at_z_minimizer() {
        for seed in 0..5 {
            let (d, params) = instance(10 + seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = random(d.n(), d.q(), &mut rng);
            let b = BlockMatrix::new(random(d.p() * d.k(), d.q(), &mut rng), d.k()).unwrap();
            let sigma = 0.5 + seed as f64 * 0.3;
            let z = z_update(&v, &b, sigma, &d, &params);
            let lag = augmented_lagrangian(&v, &z, &b, sigma, &d, &params);
            let psi = psi_value(&v, &b, sigma, &d, &params);
            assert!((lag - psi).abs() < 1e-9 * (1.0 + psi.abs()), "{lag} vs {psi}");
        }
    }

    #[test]
    fn z_update_examples() {
        let (d, params) = instance(5);
        let v = DMatrix::zeros(d.n(), d.q());
        let b = BlockMatrix::zeros(d.p(), d.k(), d.q());
        assert_eq!(z_update(&v, &b, 1.0, &d, &params).data().abs().max(), 0.0);
        // inside every threshold: Z = T / sigma
        let big = PenaltyParams::uniform(1e6, 0.3, d.p()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let v = random(d.n(), d.q(), &mut rng);
        let b = BlockMatrix::new(random(d.p() * d.k(), d.q(), &mut rng), d.k()).unwrap();
        let sigma = 2.0;
        let t = shifted(&b, &xt_v(&d, &v), sigma);
        let z = z_update(&v, &b, sigma, &d, &big);
        assert!((z.data() - t.data() / sigma).abs().max() < 1e-14);
    }

    #[test]
    fn kkt_examples() {
        let (d, _) = instance(7);
        let v = -d.y();
        let b = BlockMatrix::zeros(d.p(), d.k(), d.q());
        let mut z = xt_v(&d, &v);
        z.data_mut().neg_mut();
        let r = kkt_residuals(&v, &z, &b, &d);
        assert!(r.res1 < 1e-15 && r.res3 < 1e-15);

        let zero_v = DMatrix::zeros(d.n(), d.q());
        let zero_z = BlockMatrix::zeros(d.p(), d.k(), d.q());
        let r = kkt_residuals(&zero_v, &zero_z, &b, &d);
        let ys = row_norm_sum(d.y());
        let xs: f64 = (0..d.p()).map(|j| d.block(j).norm()).sum();
        assert!((r.res1 - ys / (1.0 + ys + xs)).abs() < 1e-14);
        assert_eq!(r.res3, 0.0);
    }
}
