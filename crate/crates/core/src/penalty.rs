//! Adaptive group elastic-net penalty
//! `pi(B) = sum_j w_j (lambda1 ||B_j|| + lambda2/2 ||B_j||^2)`,
//! its Fenchel conjugate, and the proximal operators of both.
//!
//! Every operator is separable over blocks, so everything here works one
//! block at a time; `||.||` is the Frobenius norm of a block.

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Blocks with more entries than this use compensated summation for norms.
const COMPENSATED_NORM_MIN_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    lambda1: f64,
    lambda2: f64,
    weights: Vec<f64>,
}

impl PenaltyParams {
    pub fn new(lambda1: f64, lambda2: f64, weights: Vec<f64>) -> Result<Self> {
        if !(lambda1 >= 0.0) || !lambda1.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda1 must be finite and nonnegative, got {lambda1}"
            )));
        }
        if !(lambda2 > 0.0) || !lambda2.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda2 must be finite and positive, got {lambda2}"
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "weights must be finite and positive, got {w}"
            )));
        }
        Ok(PenaltyParams {
            lambda1,
            lambda2,
            weights,
        })
    }

    /// Unit weights for `p` blocks.
    pub fn uniform(lambda1: f64, lambda2: f64, p: usize) -> Result<Self> {
        Self::new(lambda1, lambda2, vec![1.0; p])
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, j: usize) -> f64 {
        self.weights[j]
    }

    pub fn p(&self) -> usize {
        self.weights.len()
    }

    /// Same weights with new penalty levels.
    pub fn with_lambdas(&self, lambda1: f64, lambda2: f64) -> Result<Self> {
        Self::new(lambda1, lambda2, self.weights.clone())
    }
}

/// Coefficient-shaped matrix of `p` stacked `k x q` blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    data: DMatrix<f64>,
    k: usize,
}

impl BlockMatrix {
    pub fn new(data: DMatrix<f64>, k: usize) -> Result<Self> {
        if k == 0 || data.nrows() % k != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} rows are not a multiple of k = {k}",
                data.nrows()
            )));
        }
        Ok(BlockMatrix { data, k })
    }

    pub fn zeros(p: usize, k: usize, q: usize) -> Self {
        BlockMatrix {
            data: DMatrix::zeros(p * k, q),
            k,
        }
    }

    pub fn p(&self) -> usize {
        self.data.nrows() / self.k
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn q(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }

    pub fn block(&self, j: usize) -> DMatrixView<'_, f64> {
        self.data.rows(j * self.k, self.k)
    }

    pub fn block_mut(&mut self, j: usize) -> DMatrixViewMut<'_, f64> {
        self.data.rows_mut(j * self.k, self.k)
    }

    pub fn block_norm(&self, j: usize) -> f64 {
        frobenius(self.block(j))
    }

    pub fn block_norms(&self) -> Vec<f64> {
        (0..self.p()).map(|j| self.block_norm(j)).collect()
    }

    /// Indices of blocks with at least one nonzero entry.
    pub fn nonzero_blocks(&self) -> Vec<usize> {
        (0..self.p())
            .filter(|&j| self.block(j).iter().any(|v| *v != 0.0))
            .collect()
    }

    /// Scatters blocks of a smaller matrix into positions `blocks` of a `p`-block matrix.
    pub fn scatter(&self, blocks: &[usize], p: usize) -> BlockMatrix {
        let mut out = BlockMatrix::zeros(p, self.k, self.q());
        for (local, &j) in blocks.iter().enumerate() {
            out.block_mut(j).copy_from(&self.block(local));
        }
        out
    }

    /// Gathers the listed blocks into a new matrix.
    pub fn gather(&self, blocks: &[usize]) -> BlockMatrix {
        let mut out = BlockMatrix::zeros(blocks.len(), self.k, self.q());
        for (local, &j) in blocks.iter().enumerate() {
            out.block_mut(local).copy_from(&self.block(j));
        }
        out
    }
}

/// Frobenius norm; compensated (Neumaier) summation for large blocks.
pub fn frobenius(block: DMatrixView<'_, f64>) -> f64 {
    if block.len() <= COMPENSATED_NORM_MIN_LEN {
        return block.iter().map(|v| v * v).sum::<f64>().sqrt();
    }
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in block.iter() {
        let term = v * v;
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    (sum + comp).sqrt()
}

fn check_blocks(b: &BlockMatrix, params: &PenaltyParams) {
    assert_eq!(
        b.p(),
        params.p(),
        "block matrix has {} blocks, penalty has {} weights",
        b.p(),
        params.p()
    );
}

/// `pi(B)`.
pub fn penalty_value(b: &BlockMatrix, params: &PenaltyParams) -> f64 {
    check_blocks(b, params);
    (0..b.p())
        .map(|j| {
            let nrm = b.block_norm(j);
            params.weight(j) * (params.lambda1 * nrm + 0.5 * params.lambda2 * nrm * nrm)
        })
        .sum()
}

/// Conjugate of one block's penalty as a function of its norm.
#[inline]
pub fn conjugate_block(norm: f64, weight: f64, params: &PenaltyParams) -> f64 {
    let excess = norm - weight * params.lambda1;
    if excess > 0.0 {
        excess * excess / (2.0 * weight * params.lambda2)
    } else {
        0.0
    }
}

/// `pi*(Z) = sum_j (2 w_j lambda2)^-1 ([||Z_j|| - w_j lambda1]_+)^2`.
pub fn conjugate_value(z: &BlockMatrix, params: &PenaltyParams) -> f64 {
    check_blocks(z, params);
    (0..z.p())
        .map(|j| conjugate_block(z.block_norm(j), params.weight(j), params))
        .sum()
}

/// Gradient of `pi*` at `Z`.
pub fn conjugate_gradient(z: &BlockMatrix, params: &PenaltyParams) -> BlockMatrix {
    check_blocks(z, params);
    let mut out = z.clone();
    for j in 0..z.p() {
        let w = params.weight(j);
        let nrm = z.block_norm(j);
        let excess = nrm - w * params.lambda1;
        let scale = if excess > 0.0 {
            excess / (w * params.lambda2 * nrm)
        } else {
            0.0
        };
        out.block_mut(j).scale_mut(scale);
    }
    out
}

/// Multiplier applied by `prox_{sigma pi}` to a block of norm `norm`.
///
/// Zero on and inside the threshold sphere `norm <= sigma w lambda1`.
#[inline]
pub fn prox_scale(norm: f64, sigma: f64, weight: f64, params: &PenaltyParams) -> f64 {
    let threshold = sigma * weight * params.lambda1;
    if norm > threshold {
        (1.0 - threshold / norm) / (1.0 + sigma * weight * params.lambda2)
    } else {
        0.0
    }
}

/// `prox_{sigma pi}(B)`, blockwise group soft-threshold followed by ridge shrinkage.
pub fn prox_penalty(b: &BlockMatrix, sigma: f64, params: &PenaltyParams) -> BlockMatrix {
    assert!(sigma > 0.0, "sigma must be positive");
    check_blocks(b, params);
    let mut out = b.clone();
    for j in 0..b.p() {
        let scale = prox_scale(b.block_norm(j), sigma, params.weight(j), params);
        if scale == 0.0 {
            out.block_mut(j).fill(0.0);
        } else {
            out.block_mut(j).scale_mut(scale);
        }
    }
    out
}

/// `prox_{pi*/sigma}(A) = A - prox_{sigma pi}(sigma A) / sigma` (Moreau).
pub fn prox_conjugate(a: &BlockMatrix, sigma: f64, params: &PenaltyParams) -> BlockMatrix {
    assert!(sigma > 0.0, "sigma must be positive");
    check_blocks(a, params);
    let mut out = a.clone();
    for j in 0..a.p() {
        // prox_{sigma pi}(sigma A_j) / sigma = scale(sigma ||A_j||) * A_j
        let scale = prox_scale(sigma * a.block_norm(j), sigma, params.weight(j), params);
        out.block_mut(j).scale_mut(1.0 - scale);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(v: f64) -> BlockMatrix {
        BlockMatrix::new(DMatrix::from_element(1, 1, v), 1).unwrap()
    }

    fn block_of_norm(norm: f64, k: usize) -> BlockMatrix {
        let mut d = DMatrix::from_fn(k, k, |i, j| 1.0 + (i * k + j) as f64);
        let s = norm / d.norm();
        d *= s;
        BlockMatrix::new(d, k).unwrap()
    }

    #[test]
    fn params_reject_zero_ridge_and_bad_weights() {
        assert!(PenaltyParams::uniform(1.0, 0.0, 2).is_err());
        assert!(PenaltyParams::new(1.0, 1.0, vec![1.0, 0.0]).is_err());
        assert!(PenaltyParams::new(-1.0, 1.0, vec![1.0]).is_err());
    }

    #[test]
    fn penalty_examples() {
        let p = PenaltyParams::uniform(1.0, 1.0, 1).unwrap();
        assert_eq!(penalty_value(&BlockMatrix::zeros(1, 2, 2), &p), 0.0);
        let b = block_of_norm(2.0, 2);
        assert!((penalty_value(&b, &p) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn penalty_matches_naive_loop() {
        let d = DMatrix::from_fn(6, 2, |i, j| ((i * 3 + j) as f64).sin());
        let b = BlockMatrix::new(d.clone(), 2).unwrap();
        let p = PenaltyParams::new(0.7, 0.3, vec![1.0, 2.0, 0.5]).unwrap();
        let mut expect = 0.0;
        for j in 0..3 {
            let mut sq = 0.0;
            for r in 0..2 {
                for c in 0..2 {
                    sq += d[(2 * j + r, c)] * d[(2 * j + r, c)];
                }
            }
            expect += p.weight(j) * (0.7 * sq.sqrt() + 0.15 * sq);
        }
        assert!((penalty_value(&b, &p) - expect).abs() < 1e-12);
    }

    #[test]
    fn conjugate_examples() {
        let p = PenaltyParams::uniform(1.0, 2.0, 1).unwrap();
        assert!((conjugate_value(&single(3.0), &p) - 1.0).abs() < 1e-15);
        assert_eq!(conjugate_value(&single(0.5), &p), 0.0);
        assert_eq!(conjugate_value(&block_of_norm(1.0, 2), &p), 0.0);
    }

    #[test]
    fn prox_examples() {
        let p = PenaltyParams::uniform(1.0, 1.0, 1).unwrap();
        assert!((prox_penalty(&single(2.0), 1.0, &p).data()[(0, 0)] - 0.5).abs() < 1e-15);
        assert_eq!(prox_penalty(&BlockMatrix::zeros(1, 2, 2), 1.0, &p).data().abs().max(), 0.0);
        let small = block_of_norm(0.5, 2);
        assert_eq!(prox_penalty(&small, 1.0, &p).data().abs().max(), 0.0);
        // exact tie maps to zero
        let tie = block_of_norm(1.0, 1);
        assert_eq!(prox_penalty(&tie, 1.0, &p).data()[(0, 0)], 0.0);
    }

    #[test]
    fn prox_conjugate_examples() {
        let p = PenaltyParams::uniform(1.0, 1.0, 1).unwrap();
        assert_eq!(prox_conjugate(&BlockMatrix::zeros(1, 2, 2), 2.0, &p).data().abs().max(), 0.0);
        // sigma * A inside the threshold ball: output equals A.
        let a = block_of_norm(0.3, 2);
        let out = prox_conjugate(&a, 2.0, &p);
        assert!((out.data() - a.data()).abs().max() < 1e-15);
    }

    #[test]
    fn compensated_norm_agrees_with_plain() {
        let d = DMatrix::from_fn(10, 10, |i, j| 1e-3 * ((i + 7 * j) as f64).cos());
        let plain = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((frobenius(d.as_view()) - plain).abs() < 1e-15);
    }

    fn arb_instance() -> impl Strategy<Value = (DMatrix<f64>, f64, Vec<f64>, f64, f64)> {
        (1usize..=3, 1usize..=3).prop_flat_map(|(p, k)| {
            (
                prop::collection::vec(-3.0..3.0f64, p * k * k)
                    .prop_map(move |v| DMatrix::from_vec(p * k, k, v)),
                0.1..3.0f64,
                prop::collection::vec(0.2..3.0f64, p),
                0.0..2.0f64,
                0.05..2.0f64,
            )
        })
    }

    proptest! {
        #[test]
        fn moreau_identity((d, sigma, w, l1, l2) in arb_instance()) {
            let k = d.ncols();
            let a = BlockMatrix::new(d, k).unwrap();
            let p = PenaltyParams::new(l1, l2, w).unwrap();
            let mut sa = a.clone();
            sa.data_mut().scale_mut(sigma);
            let lhs = prox_conjugate(&a, sigma, &p).into_inner()
                + prox_penalty(&sa, sigma, &p).into_inner() / sigma;
            prop_assert!((lhs - a.data()).abs().max() < 1e-12);
        }

        #[test]
        fn prox_is_nonexpansive(
            (d1, sigma, w, l1, l2) in arb_instance(),
            shift in prop::collection::vec(-1.0..1.0f64, 27),
        ) {
            let k = d1.ncols();
            let mut d2 = d1.clone();
            for (v, s) in d2.iter_mut().zip(shift.iter().cycle()) {
                *v += s;
            }
            let p = PenaltyParams::new(l1, l2, w).unwrap();
            let b1 = BlockMatrix::new(d1.clone(), k).unwrap();
            let b2 = BlockMatrix::new(d2.clone(), k).unwrap();
            let gap = (prox_penalty(&b1, sigma, &p).into_inner() - prox_penalty(&b2, sigma, &p).into_inner()).norm();
            prop_assert!(gap <= (d1 - d2).norm() + 1e-12);
        }

        #[test]
        fn operators_are_separable((d, sigma, w, l1, l2) in arb_instance()) {
            let k = d.ncols();
            let b = BlockMatrix::new(d, k).unwrap();
            let p = PenaltyParams::new(l1, l2, w.clone()).unwrap();
            let whole = prox_penalty(&b, sigma, &p);
            let mut conj = 0.0;
            for j in 0..b.p() {
                let bj = b.gather(&[j]);
                let pj = PenaltyParams::new(l1, l2, vec![w[j]]).unwrap();
                let local = prox_penalty(&bj, sigma, &pj);
                prop_assert!((local.data() - whole.block(j)).abs().max() < 1e-15);
                conj += conjugate_value(&bj, &pj);
            }
            prop_assert!((conj - conjugate_value(&b, &p)).abs() < 1e-12);
        }

        #[test]
        fn conjugate_gradient_matches_finite_differences((d, _s, w, l1, l2) in arb_instance()) {
            let k = d.ncols();
            let z = BlockMatrix::new(d, k).unwrap();
            let p = PenaltyParams::new(l1, l2, w.clone()).unwrap();
            // Skip points near the threshold sphere where the gradient kinks.
            for j in 0..z.p() {
                prop_assume!((z.block_norm(j) - w[j] * l1).abs() > 1e-3);
            }
            let g = conjugate_gradient(&z, &p);
            let h = 1e-6;
            for idx in 0..z.data().len() {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp.data_mut()[idx] += h;
                zm.data_mut()[idx] -= h;
                let fd = (conjugate_value(&zp, &p) - conjugate_value(&zm, &p)) / (2.0 * h);
                prop_assert!((fd - g.data()[idx]).abs() < 1e-6 * (1.0 + fd.abs()));
            }
        }
    }
}
