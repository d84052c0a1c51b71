//! Bayesian logistic reward model with a streaming Laplace posterior.
//!
//! The posterior over the weight vector is kept Gaussian,
//! `theta ~ N(mean, cov)`, initialized at `mean = 0`,
//! `cov = I / gamma_prior`. Each observed pair `(x, r)` applies one
//! rank-one step: with `p = sigmoid(mean . x)` and curvature weight
//! `w = clip(p (1 - p), 1e-4, 0.25)`,
//!
//! ```text
//! cov'  = cov - w (cov x)(cov x)' / (1 + w x' cov x)
//! mean' = mean + cov' (r - p) x
//! ```
//!
//! which is the Sherman-Morrison form of adding `w x x'` to the precision.
//! The residual `r - p` uses the unclipped probability; the clip only guards
//! the curvature term. The covariance is re-symmetrized after every update.

use alloc::vec::Vec;

use rand::Rng;

use super::sigmoid;
use crate::error::Error;
use crate::linalg::{dot, Matrix};
use crate::math;
use crate::Result;

const WEIGHT_CLIP: (f64, f64) = (1e-4, 0.25);
const JITTER: f64 = 1e-8;
const MAX_JITTER_RETRIES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LogisticPosterior {
    mean: Vec<f64>,
    cov: Matrix,
    /// Exploration scale for Thompson draws: `theta ~ N(mean, kappa^2 cov)`.
    kappa: f64,
    observations: u64,
}

impl LogisticPosterior {
    /// Zero-mean prior with covariance `I / gamma_prior`.
    pub fn new(dim: usize, gamma_prior: f64, kappa: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        if !(gamma_prior.is_finite() && gamma_prior > 0.0) {
            return Err(Error::NonFinite {
                place: "gamma_prior",
            });
        }
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::NonFinite { place: "kappa" });
        }
        Ok(Self {
            mean: alloc::vec![0.0; dim],
            cov: Matrix::scaled_identity(dim, 1.0 / gamma_prior),
            kappa,
            observations: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix {
        &self.cov
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn observations(&self) -> u64 {
        self.observations
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// MAP point prediction `sigmoid(mean . x)`.
    pub fn predict_greedy(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(sigmoid(dot(&self.mean, x)))
    }

    /// Thompson draw: `theta ~ N(mean, kappa^2 cov)` via the Cholesky factor
    /// of the covariance, then `sigmoid(theta . x)`.
    pub fn sample_ts<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<f64> {
        self.check_dim(x)?;
        let theta = self.sample_theta(rng)?;
        Ok(sigmoid(dot(&theta, x)))
    }

    /// Draws a weight vector from `N(mean, kappa^2 cov)`.
    ///
    /// If the factorization fails, `1e-8 I` is added and retried up to three
    /// times before reporting [`Error::CholeskyFailure`]. The jitter is local
    /// to the draw; the stored covariance is untouched.
    pub fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let chol = self.jittered_cholesky()?;
        let d = self.mean.len();
        let z: Vec<f64> = (0..d).map(|_| math::standard_normal(rng)).collect();
        let mut theta = self.mean.clone();
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += chol.get(i, j) * z[j];
            }
            theta[i] += self.kappa * acc;
        }
        Ok(theta)
    }

    fn jittered_cholesky(&self) -> Result<Matrix> {
        if let Some(l) = self.cov.cholesky() {
            return Ok(l);
        }
        let mut work = self.cov.clone();
        for _ in 0..MAX_JITTER_RETRIES {
            work.add_diagonal(JITTER);
            if let Some(l) = work.cholesky() {
                return Ok(l);
            }
        }
        Err(Error::CholeskyFailure {
            retries: MAX_JITTER_RETRIES,
        })
    }

    /// One rank-one posterior step for reward `r` in {0, 1}.
    pub fn update(&mut self, x: &[f64], r: f64) -> Result<()> {
        self.check_dim(x)?;
        let p = sigmoid(dot(&self.mean, x));
        let w = (p * (1.0 - p)).clamp(WEIGHT_CLIP.0, WEIGHT_CLIP.1);
        let cov_x = self.cov.matvec(x);
        let denom = 1.0 + w * dot(&cov_x, x);
        self.cov.sub_outer_symmetrize(w / denom, &cov_x);
        let new_cov_x = self.cov.matvec(x);
        let gain = r - p;
        for (m, cx) in self.mean.iter_mut().zip(&new_cov_x) {
            *m += gain * cx;
        }
        self.observations += 1;
        Ok(())
    }
}
