//! Expectation-maximization for the Gaussian mixture, coupled to the hidden
//! label field through a neighbor-disagreement prior.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmrf::{map_labels, LabelField, UnaryCosts};
use crate::math::log_sum_exp;
use crate::mesh::{AdjacencyGraph, FeatureMatrix};
use crate::model::{
    apply_ridge, init_params, log_density_unchecked, ClassParams, CovarianceUpdate, DensityMode,
    ModelConfig, ParamsDocument,
};

/// Class mass below which a class is treated as empty and re-seeded.
pub const EMPTY_CLASS_MASS: f64 = 1e-12;

/// Posterior class probabilities, one row per site.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    n_classes: usize,
    data: Vec<f64>,
}

impl Responsibilities {
    pub fn zeros(n_sites: usize, n_classes: usize) -> Self {
        Self {
            n_classes,
            data: vec![0.0; n_sites * n_classes],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::Shape(
                "responsibility rows must be non-empty and equal length".into(),
            ));
        }
        if rows.iter().flatten().any(|q| !(0.0..=1.0).contains(q)) {
            return Err(Error::Invalid("responsibility outside [0, 1]".into()));
        }
        Ok(Self {
            n_classes: k,
            data: rows.concat(),
        })
    }

    pub fn n_sites(&self) -> usize {
        self.data.len() / self.n_classes
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, site: usize) -> &[f64] {
        &self.data[site * self.n_classes..(site + 1) * self.n_classes]
    }

    pub fn row_mut(&mut self, site: usize) -> &mut [f64] {
        &mut self.data[site * self.n_classes..(site + 1) * self.n_classes]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_classes)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Most probable class per site, ties toward the smallest label.
    pub fn argmax_labels(&self) -> LabelField {
        let labels = self
            .rows()
            .map(|r| {
                let mut best = 0;
                for (j, &q) in r.iter().enumerate().skip(1) {
                    if q > r[best] {
                        best = j;
                    }
                }
                best
            })
            .collect();
        LabelField::new(labels, self.n_classes).expect("argmax is within range")
    }
}

fn check_params(features: &FeatureMatrix, params: &[ClassParams]) -> Result<()> {
    if features.n_rows() == 0 {
        return Err(Error::Invalid("empty feature set".into()));
    }
    if params.is_empty() {
        return Err(Error::Invalid("no classes".into()));
    }
    if let Some(p) = params.iter().find(|p| p.dim() != features.dim()) {
        return Err(Error::Shape(format!(
            "features have dimension {}, class mean has {}",
            features.dim(),
            p.dim()
        )));
    }
    Ok(())
}

/// `ln π_j + ln f(y_i; θ_j)` for every site and class, row-major.
pub fn joint_log_terms(
    features: &FeatureMatrix,
    params: &[ClassParams],
    mode: DensityMode,
) -> Result<Vec<f64>> {
    check_params(features, params)?;
    let log_priors: Vec<f64> = params.iter().map(|p| p.prior().ln()).collect();
    let mut out = Vec::with_capacity(features.n_rows() * params.len());
    for row in features.rows() {
        for (p, lp) in params.iter().zip(&log_priors) {
            out.push(lp + log_density_unchecked(row, p, mode));
        }
    }
    Ok(out)
}

/// `ln f(y_i; θ_j)` for every site and class, row-major.
pub fn class_log_densities(
    features: &FeatureMatrix,
    params: &[ClassParams],
    mode: DensityMode,
) -> Result<Vec<f64>> {
    check_params(features, params)?;
    Ok(features
        .rows()
        .flat_map(|row| {
            params
                .iter()
                .map(move |p| log_density_unchecked(row, p, mode))
        })
        .collect())
}

/// Unary costs for the label field: `-(ln π_j + ln f(y_i; θ_j))`.
pub fn unary_costs(
    features: &FeatureMatrix,
    params: &[ClassParams],
    mode: DensityMode,
) -> Result<UnaryCosts> {
    let terms = joint_log_terms(features, params, mode)?;
    UnaryCosts::new(params.len(), terms.into_iter().map(|t| -t).collect())
}

fn check_priors(params: &[ClassParams]) -> Result<()> {
    let total: f64 = params.iter().map(ClassParams::prior).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Invalid(format!("priors sum to {total}, not 1")));
    }
    Ok(())
}

/// `Σ_i ln Σ_j π_j f(y_i; θ_j)`.
pub fn log_likelihood(
    features: &FeatureMatrix,
    params: &[ClassParams],
    mode: DensityMode,
) -> Result<f64> {
    check_priors(params)?;
    let terms = joint_log_terms(features, params, mode)?;
    Ok(terms.chunks_exact(params.len()).map(log_sum_exp).sum())
}

/// Posterior class probabilities. With `beta > 0` each class is additionally
/// weighted by `exp(-beta · #neighbors labeled differently)`.
pub fn e_step(
    features: &FeatureMatrix,
    params: &[ClassParams],
    mode: DensityMode,
    labels: &LabelField,
    graph: &AdjacencyGraph,
    beta: f64,
) -> Result<Responsibilities> {
    let n = features.n_rows();
    if labels.len() != n || graph.site_count() != n {
        return Err(Error::Shape(format!(
            "{n} feature rows, {} labels, {} graph sites",
            labels.len(),
            graph.site_count()
        )));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Invalid(format!(
            "beta must be finite and nonnegative, got {beta}"
        )));
    }
    let k = params.len();
    let mut terms = joint_log_terms(features, params, mode)?;
    if beta > 0.0 {
        let current = labels.labels();
        for i in 0..n {
            let neighbors = graph.neighbors_of(i);
            for (j, t) in terms[i * k..(i + 1) * k].iter_mut().enumerate() {
                let disagree = neighbors.iter().filter(|&&s| current[s] != j).count();
                *t -= beta * disagree as f64;
            }
        }
    }
    for (i, row) in terms.chunks_exact_mut(k).enumerate() {
        let norm = log_sum_exp(row);
        if !norm.is_finite() {
            return Err(Error::Numerical(format!(
                "site {i}: every class has zero weight"
            )));
        }
        for t in row.iter_mut() {
            *t = (*t - norm).exp();
        }
    }
    Ok(Responsibilities {
        n_classes: k,
        data: terms,
    })
}

/// Closed-form parameter update from responsibilities.
///
/// A class whose total mass falls below [`EMPTY_CLASS_MASS`] is re-seeded at
/// the site whose largest responsibility is smallest, with a reset
/// covariance, and the priors are renormalized.
pub fn m_step(
    features: &FeatureMatrix,
    responsibilities: &Responsibilities,
    config: &ModelConfig,
) -> Result<Vec<ClassParams>> {
    config.validate()?;
    let n = features.n_rows();
    let d = features.dim();
    let k = config.n_classes;
    if n == 0 {
        return Err(Error::Invalid("empty feature set".into()));
    }
    if responsibilities.n_sites() != n || responsibilities.n_classes() != k {
        return Err(Error::Shape(format!(
            "responsibilities are {}x{}, expected {n}x{k}",
            responsibilities.n_sites(),
            responsibilities.n_classes()
        )));
    }

    let mut masses = vec![0.0; k];
    let mut means = vec![vec![0.0; d]; k];
    for (row, q) in features.rows().zip(responsibilities.rows()) {
        for j in 0..k {
            masses[j] += q[j];
            for t in 0..d {
                means[j][t] += q[j] * row[t];
            }
        }
    }

    let empty: Vec<usize> = (0..k)
        .filter(|&j| masses[j].is_nan() || masses[j] < EMPTY_CLASS_MASS)
        .collect();
    let mut reseed_sites = Vec::with_capacity(empty.len());
    if !empty.is_empty() {
        // least confidently assigned sites first, ties toward the lower index
        let mut order: Vec<(f64, usize)> = responsibilities
            .rows()
            .enumerate()
            .map(|(i, r)| (r.iter().copied().fold(f64::NEG_INFINITY, f64::max), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        reseed_sites.extend(order.iter().take(empty.len()).map(|&(_, i)| i));
    }

    let mut covariances = Vec::with_capacity(k);
    let mut priors = Vec::with_capacity(k);
    for j in 0..k {
        if let Some(slot) = empty.iter().position(|&e| e == j) {
            // sites are reused cyclically when there are more empty classes than sites
            let site = reseed_sites[slot % reseed_sites.len().max(1)];
            means[j] = features.row(site).to_vec();
            let cov = match config.covariance_update {
                CovarianceUpdate::FixedIdentity => DMatrix::identity(d, d),
                CovarianceUpdate::Full => {
                    let mut c = data_covariance(features);
                    apply_ridge(&mut c, config.ridge);
                    c
                }
            };
            covariances.push(cov);
            priors.push(1.0 / n as f64);
            continue;
        }
        for m in means[j].iter_mut() {
            *m /= masses[j];
        }
        let cov = match config.covariance_update {
            CovarianceUpdate::FixedIdentity => DMatrix::identity(d, d),
            CovarianceUpdate::Full => {
                let mut c = DMatrix::zeros(d, d);
                for (row, q) in features.rows().zip(responsibilities.rows()) {
                    let w = q[j];
                    if w == 0.0 {
                        continue;
                    }
                    for a in 0..d {
                        let da = row[a] - means[j][a];
                        for b in 0..=a {
                            c[(a, b)] += w * da * (row[b] - means[j][b]);
                        }
                    }
                }
                for a in 0..d {
                    for b in 0..=a {
                        let v = c[(a, b)] / masses[j];
                        c[(a, b)] = v;
                        c[(b, a)] = v;
                    }
                }
                apply_ridge(&mut c, config.ridge);
                c
            }
        };
        covariances.push(cov);
        priors.push(masses[j] / n as f64);
    }

    if !empty.is_empty() {
        let total: f64 = priors.iter().sum();
        for p in &mut priors {
            *p /= total;
        }
    }

    means
        .into_iter()
        .zip(covariances)
        .zip(priors)
        .map(|((mean, cov), prior)| ClassParams::new(mean, cov, prior.min(1.0)))
        .collect()
}

fn data_covariance(features: &FeatureMatrix) -> DMatrix<f64> {
    let n = features.n_rows() as f64;
    let d = features.dim();
    let mut mean = vec![0.0; d];
    for row in features.rows() {
        for t in 0..d {
            mean[t] += row[t];
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut c = DMatrix::zeros(d, d);
    for row in features.rows() {
        for a in 0..d {
            for b in 0..d {
                c[(a, b)] += (row[a] - mean[a]) * (row[b] - mean[b]);
            }
        }
    }
    c / n
}

/// `Σ_i Σ_j Q_ij (ln π_j + ln f(y_i; θ_j) − ln Q_ij)`, with `0 · ln 0 = 0`.
pub fn lower_bound(
    features: &FeatureMatrix,
    responsibilities: &Responsibilities,
    params: &[ClassParams],
    mode: DensityMode,
) -> Result<f64> {
    if responsibilities.n_sites() != features.n_rows()
        || responsibilities.n_classes() != params.len()
    {
        return Err(Error::Shape(
            "responsibilities do not match features and params".into(),
        ));
    }
    let terms = joint_log_terms(features, params, mode)?;
    let mut total = 0.0;
    for (q_row, t_row) in responsibilities
        .rows()
        .zip(terms.chunks_exact(params.len()))
    {
        for (&q, &t) in q_row.iter().zip(t_row) {
            if q > 0.0 {
                total += q * (t - q.ln());
            }
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub beta: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub icm_sweeps_per_iteration: usize,
    pub seed: u64,
    pub model: ModelConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            beta: 0.0,
            max_iterations: 100,
            tolerance: 1e-6,
            icm_sweeps_per_iteration: 10,
            seed: 0,
            model: ModelConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Invalid(format!(
                "beta must be finite and nonnegative, got {}",
                self.beta
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Invalid("max_iterations must be at least 1".into()));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::Invalid(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.icm_sweeps_per_iteration == 0 {
            return Err(Error::Invalid(
                "icm_sweeps_per_iteration must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// The driver's state between iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct EmState {
    pub responsibilities: Responsibilities,
    pub params: Vec<ClassParams>,
    pub labels: LabelField,
    pub bound_trace: Vec<f64>,
    pub iteration: usize,
}

impl EmState {
    /// State before the first iteration: initial parameters and
    /// responsibilities, labels at the per-site cost minimum.
    pub fn initialize(
        features: &FeatureMatrix,
        graph: &AdjacencyGraph,
        config: &RunConfig,
    ) -> Result<Self> {
        config.validate()?;
        if graph.site_count() != features.n_rows() {
            return Err(Error::Shape(format!(
                "{} feature rows for {} graph sites",
                features.n_rows(),
                graph.site_count()
            )));
        }
        let init = init_params(features, &config.model, config.seed)?;
        let labels =
            unary_costs(features, &init.params, config.model.density_mode)?.argmin_labels();
        Ok(Self {
            responsibilities: init.responsibilities,
            params: init.params,
            labels,
            bound_trace: Vec::new(),
            iteration: 0,
        })
    }

    /// One HMRF-EM iteration; returns the new lower bound.
    pub fn step(
        &mut self,
        features: &FeatureMatrix,
        graph: &AdjacencyGraph,
        config: &RunConfig,
    ) -> Result<f64> {
        let mode = config.model.density_mode;
        if config.beta > 0.0 {
            let unaries = unary_costs(features, &self.params, mode)?;
            self.labels = map_labels(
                &self.labels,
                graph,
                &unaries,
                config.beta,
                config.icm_sweeps_per_iteration,
            )?;
        }
        self.responsibilities = e_step(
            features,
            &self.params,
            mode,
            &self.labels,
            graph,
            config.beta,
        )?;
        self.params = m_step(features, &self.responsibilities, &config.model)?;
        let bound = lower_bound(features, &self.responsibilities, &self.params, mode)?;
        self.iteration += 1;
        if !bound.is_finite() {
            return Err(Error::Numerical(format!(
                "lower bound is {bound} at iteration {}",
                self.iteration
            )));
        }
        self.bound_trace.push(bound);
        Ok(bound)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassPrior {
    pub label: usize,
    pub prior: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    pub labels: LabelField,
    pub params: Vec<ClassParams>,
    pub bound_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub argmax_prior_class: ClassPrior,
}

/// JSON layout of a [`SegmentationResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub labels: Vec<usize>,
    pub params: ParamsDocument,
    pub bound_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub argmax_prior_class: ClassPrior,
}

impl SegmentationResult {
    pub fn to_document(&self) -> ResultDocument {
        ResultDocument {
            labels: self.labels.labels().to_vec(),
            params: ParamsDocument::from_params(&self.params),
            bound_trace: self.bound_trace.clone(),
            converged: self.converged,
            iterations: self.iterations,
            argmax_prior_class: self.argmax_prior_class,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("result serializes")
    }

    pub fn final_bound(&self) -> f64 {
        self.bound_trace.last().copied().unwrap_or(f64::NAN)
    }

    /// `iters=<n> bound=<value> converged=<bool>`
    pub fn summary_line(&self) -> String {
        format!(
            "iters={} bound={} converged={}",
            self.iterations,
            self.final_bound(),
            self.converged
        )
    }
}

fn argmax_prior(params: &[ClassParams]) -> ClassPrior {
    let mut best = 0;
    for (j, p) in params.iter().enumerate().skip(1) {
        if p.prior() > params[best].prior() {
            best = j;
        }
    }
    ClassPrior {
        label: best,
        prior: params[best].prior(),
    }
}

/// Runs HMRF-EM until `|Δbound| / (1 + |bound|) < tolerance` or the
/// iteration cap. A single class is converged after one iteration since its
/// responsibilities cannot change.
pub fn run(
    features: &FeatureMatrix,
    graph: &AdjacencyGraph,
    config: &RunConfig,
) -> Result<SegmentationResult> {
    let mut state = EmState::initialize(features, graph, config)?;
    let mut converged = false;
    while state.iteration < config.max_iterations {
        let bound = state.step(features, graph, config)?;
        if config.model.n_classes == 1 {
            converged = true;
        } else if let [.., prev, _] = state.bound_trace.as_slice() {
            converged = (bound - prev).abs() / (1.0 + bound.abs()) < config.tolerance;
        }
        if converged {
            break;
        }
    }

    let labels = if config.beta > 0.0 {
        let unaries = unary_costs(features, &state.params, config.model.density_mode)?;
        map_labels(
            &state.labels,
            graph,
            &unaries,
            config.beta,
            config.icm_sweeps_per_iteration,
        )?
    } else {
        state.responsibilities.argmax_labels()
    };
    Ok(SegmentationResult {
        labels,
        argmax_prior_class: argmax_prior(&state.params),
        params: state.params,
        bound_trace: state.bound_trace,
        converged,
        iterations: state.iteration,
    })
}
