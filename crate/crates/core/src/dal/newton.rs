//! Newton system for the inner V-update.
//!
//! The Hessian of `psi` is `H = I + sigma * Xhat_J Q_J Xhat_J^T`, where
//! `Xhat_J` maps stacked coefficient blocks of the active set to `vec(X B)`
//! and `Q_J` is block diagonal with
//! `P_j = c_j ((1 - a_j/||T_j||) I + a_j/||T_j||^3 vec(T_j) vec(T_j)^T)`,
//! `c_j = 1/(1 + sigma w_j lambda2)`, `a_j = sigma w_j lambda1`.
//!
//! Vectorization is column-major throughout, so `vec(M)` is `M.as_slice()`.
//! `Q_J` is never formed; each `P_j` is handled through its
//! scaled-identity-plus-rank-one structure.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::objective::{prox_with_norms, shifted, x_times, xt_v};
use crate::error::{Error, Result};
use crate::functional::ScoreDesign;
use crate::penalty::{BlockMatrix, PenaltyParams};

/// How the Newton system is factorized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    /// Woodbury when `r * k < n`, dense otherwise.
    #[default]
    Auto,
    Direct,
    Woodbury,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NewtonMode {
    Direct,
    Woodbury,
}

#[derive(Debug, Clone)]
pub struct ActiveBlock {
    pub index: usize,
    /// `T_j`, `k x q`.
    pub t: DMatrix<f64>,
    pub norm: f64,
    /// `c_j = 1 / (1 + sigma w_j lambda2)`.
    pub shrink: f64,
    /// `a_j = sigma w_j lambda1`.
    pub threshold: f64,
}

impl ActiveBlock {
    /// Coefficient of the identity part of `P_j`.
    pub fn alpha(&self) -> f64 {
        if self.threshold == 0.0 {
            self.shrink
        } else {
            (self.shrink * (1.0 - self.threshold / self.norm)).max(0.0)
        }
    }

    /// Coefficient of the rank-one part of `P_j` (relative to unnormalized `vec(T_j)`).
    pub fn beta(&self) -> f64 {
        if self.threshold == 0.0 {
            0.0
        } else {
            self.shrink * self.threshold / (self.norm * self.norm * self.norm)
        }
    }

    /// `P_j M = alpha M + beta <T_j, M> T_j`.
    pub fn apply_p(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let beta = self.beta();
        let mut out = m * self.alpha();
        if beta != 0.0 {
            out += &self.t * (beta * self.t.dot(m));
        }
        out
    }

    /// Dense `P_j` (`kq x kq`).
    pub fn p_dense(&self) -> DMatrix<f64> {
        let dim = self.t.len();
        let tv = DVector::from_column_slice(self.t.as_slice());
        DMatrix::identity(dim, dim) * self.alpha() + &tv * tv.transpose() * self.beta()
    }

    /// `(sigma P_j)^{1/2} = sqrt(sigma c_j) (s I + (1 - s) that that^T)`, `s = sqrt(1 - a_j/||T_j||)`.
    fn sqrt_scaled_p(&self, sigma: f64) -> DMatrix<f64> {
        let dim = self.t.len();
        let root = (sigma * self.shrink).sqrt();
        if self.threshold == 0.0 {
            return DMatrix::identity(dim, dim) * root;
        }
        let s = (1.0 - self.threshold / self.norm).max(0.0).sqrt();
        let that = DVector::from_column_slice(self.t.as_slice()) / self.norm;
        (DMatrix::identity(dim, dim) * s + &that * that.transpose() * (1.0 - s)) * root
    }
}

/// Linear system `H vec(D) = -vec(grad psi)` at the current iterate.
#[derive(Debug, Clone)]
pub struct NewtonSystem<'a> {
    design: &'a ScoreDesign,
    sigma: f64,
    active: Vec<ActiveBlock>,
    gradient: DMatrix<f64>,
    mode: NewtonMode,
}

impl<'a> NewtonSystem<'a> {
    pub(crate) fn from_parts(
        design: &'a ScoreDesign,
        t: &BlockMatrix,
        norms: &[f64],
        gradient: DMatrix<f64>,
        sigma: f64,
        params: &PenaltyParams,
        preference: SolverMode,
    ) -> Self {
        let active: Vec<ActiveBlock> = norms
            .iter()
            .enumerate()
            .filter_map(|(j, &nrm)| {
                let w = params.weight(j);
                let threshold = sigma * w * params.lambda1();
                (nrm >= threshold).then(|| ActiveBlock {
                    index: j,
                    t: t.block(j).into_owned(),
                    norm: nrm,
                    shrink: 1.0 / (1.0 + sigma * w * params.lambda2()),
                    threshold,
                })
            })
            .collect();
        let mode = match preference {
            SolverMode::Direct => NewtonMode::Direct,
            SolverMode::Woodbury => NewtonMode::Woodbury,
            SolverMode::Auto => {
                if active.len() * design.k() < design.n() {
                    NewtonMode::Woodbury
                } else {
                    NewtonMode::Direct
                }
            }
        };
        NewtonSystem {
            design,
            sigma,
            active,
            gradient,
            mode,
        }
    }

    pub fn active(&self) -> &[ActiveBlock] {
        &self.active
    }

    pub fn active_set(&self) -> Vec<usize> {
        self.active.iter().map(|a| a.index).collect()
    }

    pub fn gradient(&self) -> &DMatrix<f64> {
        &self.gradient
    }

    pub fn mode(&self) -> NewtonMode {
        self.mode
    }

    pub fn with_mode(mut self, mode: NewtonMode) -> Self {
        self.mode = mode;
        self
    }

    /// `H D = D + sigma sum_j X_j P_j (X_j^T D)`.
    pub fn apply_hessian(&self, d: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = d.clone();
        for a in &self.active {
            let xj = self.design.block(a.index);
            let m = xj.tr_mul(d);
            let pm = a.apply_p(&m);
            out.gemm(self.sigma, &xj, &pm, 1.0);
        }
        out
    }

    /// Dense `nq x nq` Hessian.
    pub fn assemble_dense(&self) -> DMatrix<f64> {
        let n = self.design.n();
        let q = self.design.q();
        let dim = n * q;
        let mut h = DMatrix::identity(dim, dim);
        if self.active.is_empty() {
            return h;
        }
        // Identity part of every P_j contributes I_q (x) X_J diag(sigma alpha) X_J^T.
        let k = self.design.k();
        let mut xs = DMatrix::zeros(n, self.active.len() * k);
        for (l, a) in self.active.iter().enumerate() {
            let s = (self.sigma * a.alpha()).sqrt();
            xs.columns_mut(l * k, k).copy_from(&(self.design.block(a.index) * s));
        }
        let gram = &xs * xs.transpose();
        for c in 0..q {
            let mut view = h.view_mut((c * n, c * n), (n, n));
            view += &gram;
        }
        // Rank-one parts: sigma beta_j vec(X_j T_j) vec(X_j T_j)^T.
        let mut u = DMatrix::zeros(dim, self.active.len());
        let mut any = false;
        for (l, a) in self.active.iter().enumerate() {
            let beta = a.beta();
            if beta == 0.0 {
                continue;
            }
            any = true;
            let xt = self.design.block(a.index) * &a.t;
            let col = DVector::from_column_slice(xt.as_slice()) * (self.sigma * beta).sqrt();
            u.set_column(l, &col);
        }
        if any {
            h.gemm(1.0, &u, &u.transpose(), 1.0);
        }
        h
    }

    /// Newton direction `D` solving `H vec(D) = -vec(grad)`.
    pub fn direction(&self) -> Result<DMatrix<f64>> {
        let rhs = -&self.gradient;
        if self.active.is_empty() {
            return Ok(rhs);
        }
        match self.mode {
            NewtonMode::Direct => self.solve_direct(&rhs),
            NewtonMode::Woodbury => self.solve_woodbury(&rhs),
        }
    }

    fn solve_direct(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let h = self.assemble_dense();
        let chol = Cholesky::new(h).ok_or_else(|| {
            Error::FactorizationFailure(format!(
                "dense Newton system ({} active blocks) is not positive definite",
                self.active.len()
            ))
        })?;
        let x = chol.solve(&DVector::from_column_slice(rhs.as_slice()));
        Ok(DMatrix::from_column_slice(rhs.nrows(), rhs.ncols(), x.as_slice()))
    }

    /// `H^{-1} = I - Xhat S (I + S Xhat^T Xhat S)^{-1} S Xhat^T` with
    /// `S = (sigma Q_J)^{1/2}`, factorizing an `rkq x rkq` matrix.
    fn solve_woodbury(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let k = self.design.k();
        let q = self.design.q();
        let r = self.active.len();
        let kq = k * q;
        let n = self.design.n();

        let idx: Vec<usize> = self
            .active
            .iter()
            .flat_map(|a| (a.index * k)..((a.index + 1) * k))
            .collect();
        let xj = self.design.x().select_columns(&idx);
        let gram = xj.tr_mul(&xj);
        let roots: Vec<DMatrix<f64>> = self
            .active
            .iter()
            .map(|a| a.sqrt_scaled_p(self.sigma))
            .collect();

        // M = I + S (I_q (x) Gram) S, assembled block by block.
        let mut m = DMatrix::identity(r * kq, r * kq);
        let mut kron = DMatrix::zeros(kq, kq);
        for j in 0..r {
            for l in j..r {
                let g = gram.view((j * k, l * k), (k, k));
                kron.fill(0.0);
                for c in 0..q {
                    kron.view_mut((c * k, c * k), (k, k)).copy_from(&g);
                }
                let block = &roots[j] * &kron * &roots[l];
                let mut target = m.view_mut((j * kq, l * kq), (kq, kq));
                target += &block;
                if l != j {
                    m.view_mut((l * kq, j * kq), (kq, kq))
                        .copy_from(&block.transpose());
                }
            }
        }
        let chol = Cholesky::new(m).ok_or_else(|| {
            Error::FactorizationFailure(format!(
                "Woodbury inner matrix ({r} active blocks) is not positive definite"
            ))
        })?;

        // S Xhat^T rhs
        let xtr = xj.tr_mul(rhs);
        let mut w = DVector::zeros(r * kq);
        for (l, root) in roots.iter().enumerate() {
            let block = xtr.rows(l * k, k).into_owned();
            let v = root * DVector::from_column_slice(block.as_slice());
            w.rows_mut(l * kq, kq).copy_from(&v);
        }
        let z = chol.solve(&w);
        // Xhat S z
        let mut stacked = DMatrix::zeros(r * k, q);
        for (l, root) in roots.iter().enumerate() {
            let v = root * z.rows(l * kq, kq);
            stacked
                .rows_mut(l * k, k)
                .copy_from(&DMatrix::from_column_slice(k, q, v.as_slice()));
        }
        let correction = &xj * stacked;
        debug_assert_eq!(correction.nrows(), n);
        Ok(rhs - correction)
    }
}

/// Newton system at `(V, B)` for the inner problem with multiplier `B`.
pub fn build_newton_system<'a>(
    v: &DMatrix<f64>,
    b: &BlockMatrix,
    sigma: f64,
    design: &'a ScoreDesign,
    params: &PenaltyParams,
    preference: SolverMode,
) -> NewtonSystem<'a> {
    let t = shifted(b, &xt_v(design, v), sigma);
    let (prox_t, norms) = prox_with_norms(&t, sigma, params);
    let gradient = v + design.y() - x_times(design, &prox_t);
    NewtonSystem::from_parts(design, &t, &norms, gradient, sigma, params, preference)
}

/// Solves `H vec(D) = -vec(grad psi)` for the given system.
pub fn newton_direction(system: &NewtonSystem<'_>) -> Result<DMatrix<f64>> {
    system.direction()
}
