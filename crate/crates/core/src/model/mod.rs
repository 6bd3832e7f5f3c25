//! Per-class Gaussian observation model.

mod init;

pub use init::{init_params, kmeans, Initialization};

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the Gaussian normalizing constant is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMode {
    /// The proper d-dimensional normal density.
    #[default]
    Corrected,
    /// `|Σ|^{-1/2} exp(-q/2) / sqrt(2π)` for every dimension. Differs from
    /// `Corrected` by the constant `(d-1)/2 · ln 2π`.
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// Identity covariances, means on the ladder `(2j, …, 2j)`, uniform priors.
    Paper,
    /// k-means++ seeding followed by Lloyd iterations.
    #[default]
    Kmeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceUpdate {
    #[default]
    Full,
    /// Covariances stay at the identity.
    FixedIdentity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_classes: usize,
    pub density_mode: DensityMode,
    pub init_mode: InitMode,
    pub covariance_update: CovarianceUpdate,
    pub ridge: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_classes: 2,
            density_mode: DensityMode::Corrected,
            init_mode: InitMode::Kmeans,
            covariance_update: CovarianceUpdate::Full,
            ridge: 1e-6,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes == 0 {
            return Err(Error::Invalid("n_classes must be at least 1".into()));
        }
        if !(self.ridge > 0.0 && self.ridge.is_finite()) {
            return Err(Error::Invalid(format!(
                "ridge must be positive, got {}",
                self.ridge
            )));
        }
        Ok(())
    }
}

/// Mean, covariance and prior of one class.
///
/// The covariance is checked positive definite at construction and its
/// Cholesky factor is kept alongside, so density evaluation cannot fail on
/// a constructed value.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassParams {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    prior: f64,
    chol_lower: DMatrix<f64>,
    log_det: f64,
}

impl ClassParams {
    pub fn new(mean: Vec<f64>, covariance: DMatrix<f64>, prior: f64) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::Invalid("empty mean vector".into()));
        }
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::Shape(format!(
                "covariance is {}x{}, mean has dimension {d}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if mean.iter().chain(covariance.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Numerical("non-finite class parameter".into()));
        }
        if !(0.0..=1.0).contains(&prior) {
            return Err(Error::Invalid(format!("prior {prior} outside [0, 1]")));
        }
        let scale = covariance.amax().max(f64::MIN_POSITIVE);
        for i in 0..d {
            for j in 0..i {
                if (covariance[(i, j)] - covariance[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::NotPositiveDefinite(format!(
                        "covariance is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let chol = covariance
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
        let chol_lower = chol.l();
        let log_det = 2.0 * chol_lower.diagonal().iter().map(|x| x.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::NotPositiveDefinite(
                "log-determinant is not finite".into(),
            ));
        }
        Ok(Self {
            mean: DVector::from_vec(mean),
            covariance,
            prior,
            chol_lower,
            log_det,
        })
    }

    pub fn with_identity(mean: Vec<f64>, prior: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(mean, DMatrix::identity(d, d), prior)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn prior(&self) -> f64 {
        self.prior
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `(x-μ)ᵀ Σ⁻¹ (x-μ)` via forward substitution on the Cholesky factor.
    pub fn mahalanobis_sq(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let l = &self.chol_lower;
        let mut z = vec![0.0; d];
        let mut total = 0.0;
        for i in 0..d {
            let mut acc = x[i] - self.mean[i];
            for k in 0..i {
                acc -= l[(i, k)] * z[k];
            }
            z[i] = acc / l[(i, i)];
            total += z[i] * z[i];
        }
        total
    }
}

/// Adds `ridge · (trace(Σ)/d) · I` to a covariance. A zero-trace matrix
/// (all scatter collapsed) gets `ridge · I`.
pub fn apply_ridge(covariance: &mut DMatrix<f64>, ridge: f64) {
    let d = covariance.nrows();
    let mean_var = covariance.trace() / d as f64;
    let scale = if mean_var > 0.0 { mean_var } else { 1.0 };
    for i in 0..d {
        covariance[(i, i)] += ridge * scale;
    }
}

pub fn log_density(x: &[f64], params: &ClassParams, mode: DensityMode) -> Result<f64> {
    if x.len() != params.dim() {
        return Err(Error::Shape(format!(
            "feature has dimension {}, class mean has {}",
            x.len(),
            params.dim()
        )));
    }
    Ok(log_density_unchecked(x, params, mode))
}

pub(crate) fn log_density_unchecked(x: &[f64], params: &ClassParams, mode: DensityMode) -> f64 {
    let normalizer_dims = match mode {
        DensityMode::Corrected => params.dim() as f64,
        DensityMode::Paper => 1.0,
    };
    -0.5 * normalizer_dims * (2.0 * PI).ln() - 0.5 * params.log_det - 0.5 * params.mahalanobis_sq(x)
}

/// JSON form of a parameter list: `{"means", "covariances", "priors"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsDocument {
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<Vec<f64>>>,
    pub priors: Vec<f64>,
}

impl ParamsDocument {
    pub fn from_params(params: &[ClassParams]) -> Self {
        Self {
            means: params.iter().map(|p| p.mean().to_vec()).collect(),
            covariances: params
                .iter()
                .map(|p| {
                    p.covariance()
                        .row_iter()
                        .map(|r| r.iter().copied().collect())
                        .collect()
                })
                .collect(),
            priors: params.iter().map(ClassParams::prior).collect(),
        }
    }

    pub fn into_params(self) -> Result<Vec<ClassParams>> {
        let k = self.means.len();
        if self.covariances.len() != k || self.priors.len() != k {
            return Err(Error::Shape(format!(
                "{k} means, {} covariances, {} priors",
                self.covariances.len(),
                self.priors.len()
            )));
        }
        self.means
            .into_iter()
            .zip(self.covariances)
            .zip(self.priors)
            .map(|((mean, cov), prior)| {
                let d = mean.len();
                if cov.len() != d || cov.iter().any(|r| r.len() != d) {
                    return Err(Error::Shape(format!("covariance is not {d}x{d}")));
                }
                ClassParams::new(
                    mean,
                    DMatrix::from_row_iterator(d, d, cov.into_iter().flatten()),
                    prior,
                )
            })
            .collect()
    }
}
