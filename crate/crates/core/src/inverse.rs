//! Approximate inverse-Ising methods for systems beyond enumeration reach.
//!
//! The mean-field family (naive, TAP-corrected, third-order with a
//! diagnostic diagonal) inverts the regularized covariance matrix; the
//! pseudo-likelihood route maximizes per-spin conditional likelihoods with an
//! L2 penalty and symmetrizes the result.

use crate::error::{CoreError, CoreResult};
use crate::exact::CouplingModel;
use crate::moments::{empirical_moments, MomentSet};
use crate::spin::SpinMatrix;
use crate::util::{sigmoid, softplus};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// Inversion method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InversionMethod {
    Nmf,
    Tap,
    Tanaka,
    Rplm,
}

impl InversionMethod {
    pub fn name(&self) -> &'static str {
        match self {
            InversionMethod::Nmf => "nmf",
            InversionMethod::Tap => "tap",
            InversionMethod::Tanaka => "tanaka",
            InversionMethod::Rplm => "rplm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "nmf" => Some(Self::Nmf),
            "tap" => Some(Self::Tap),
            "tanaka" => Some(Self::Tanaka),
            "rplm" => Some(Self::Rplm),
            _ => None,
        }
    }
}

/// Options shared by the approximate inversions.
#[derive(Debug, Clone, Copy)]
pub struct InversionOptions {
    pub method: InversionMethod,
    /// Scale-aware ridge: the covariance receives `ridge * trace(C)/N` on the
    /// diagonal before inversion.
    pub ridge: f64,
    /// L2 penalty weight on the pseudo-likelihood parameters.
    pub rplm_lambda: f64,
    /// Stop when the per-sample gradient norm falls below this.
    pub rplm_tolerance: f64,
    pub rplm_max_iterations: usize,
}

impl InversionOptions {
    pub fn new(method: InversionMethod) -> Self {
        Self {
            method,
            ridge: 1e-8,
            rplm_lambda: 1e-3,
            rplm_tolerance: 1e-6,
            rplm_max_iterations: 10_000,
        }
    }
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self::new(InversionMethod::Rplm)
    }
}

impl InversionOptions {
    fn validate(&self) -> CoreResult<()> {
        if self.ridge < 0.0 || !self.ridge.is_finite() {
            return Err(CoreError::InvalidInput(format!(
                "ridge must be nonnegative, got {}",
                self.ridge
            )));
        }
        if self.rplm_lambda < 0.0 || !self.rplm_lambda.is_finite() {
            return Err(CoreError::InvalidInput(format!(
                "rplm lambda must be nonnegative, got {}",
                self.rplm_lambda
            )));
        }
        if !(self.rplm_tolerance > 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "rplm tolerance must be positive, got {}",
                self.rplm_tolerance
            )));
        }
        Ok(())
    }
}

/// An inverted model plus bookkeeping: per-pair fallbacks, convergence state
/// of iterative methods.
#[derive(Debug, Clone)]
pub struct InversionReport {
    pub model: CouplingModel,
    pub warnings: Vec<String>,
    pub converged: bool,
    pub iterations: usize,
    /// Final per-sample gradient norm of the pseudo-likelihood (iterative
    /// methods only).
    pub gradient_norm: Option<f64>,
}

fn check_unsaturated(moments: &MomentSet) -> CoreResult<()> {
    for (i, q) in moments.mean().iter().enumerate() {
        if q.abs() >= 1.0 {
            return Err(CoreError::DegenerateMoments(format!(
                "mean orientation {i} is saturated at {q}; the external field is \
                 unbounded (smooth the moments first)"
            )));
        }
    }
    Ok(())
}

/// Inverse of `C + r I` with the scale-aware ridge `r = ridge * trace(C)/N`;
/// the result is symmetrized exactly. Errors carry the smallest eigenvalue.
fn regularized_inverse(
    covariance: &DMatrix<f64>,
    ridge: f64,
) -> CoreResult<(DMatrix<f64>, f64)> {
    let n = covariance.nrows();
    let effective = ridge * covariance.trace() / n as f64;
    let mut regularized = covariance.clone();
    for i in 0..n {
        regularized[(i, i)] += effective;
    }
    let inverse = regularized.clone().try_inverse().ok_or_else(|| {
        let smallest = nalgebra::SymmetricEigen::new(regularized.clone())
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        CoreError::IllConditioned {
            smallest_eigenvalue: smallest,
            ridge: effective,
        }
    })?;
    if inverse.iter().any(|v| !v.is_finite()) {
        let smallest = nalgebra::SymmetricEigen::new(regularized)
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b));
        return Err(CoreError::IllConditioned {
            smallest_eigenvalue: smallest,
            ridge: effective,
        });
    }
    let symmetric = (&inverse + inverse.transpose()) * 0.5;
    Ok((symmetric, effective))
}

/// Naive mean-field inversion: `J = -C^{-1}` off the diagonal,
/// `h_i = atanh(q_i) - sum_j J_ij q_j`.
pub fn invert_nmf(
    moments: &MomentSet,
    options: &InversionOptions,
) -> CoreResult<InversionReport> {
    options.validate()?;
    check_unsaturated(moments)?;
    let n = moments.len();
    let (inv, _) = regularized_inverse(&moments.covariance(), options.ridge)?;
    let mut couplings = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                couplings[(i, j)] = -inv[(i, j)];
            }
        }
    }
    let fields = nmf_fields(moments, &couplings);
    let model = CouplingModel::new(labels_of(moments, n), couplings, fields)?;
    Ok(InversionReport {
        model,
        warnings: Vec::new(),
        converged: true,
        iterations: 0,
        gradient_norm: None,
    })
}

fn labels_of(_moments: &MomentSet, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("a{i}")).collect()
}

fn nmf_fields(moments: &MomentSet, couplings: &DMatrix<f64>) -> DVector<f64> {
    let n = moments.len();
    DVector::from_fn(n, |i, _| {
        let mut h = moments.mean()[i].atanh();
        for j in 0..n {
            if j != i {
                h -= couplings[(i, j)] * moments.mean()[j];
            }
        }
        h
    })
}

/// TAP inversion: the Onsager-corrected root
/// `J_ij = -2 A_ij / (1 + sqrt(1 - 8 A_ij q_i q_j))` with `A = C^{-1}`,
/// falling back to the naive value when the discriminant is negative.
pub fn invert_tap(
    moments: &MomentSet,
    options: &InversionOptions,
) -> CoreResult<InversionReport> {
    options.validate()?;
    check_unsaturated(moments)?;
    let n = moments.len();
    let (inv, _) = regularized_inverse(&moments.covariance(), options.ridge)?;
    let q = moments.mean();
    let mut couplings = DMatrix::zeros(n, n);
    let mut warnings = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let a = inv[(i, j)];
            let discriminant = 1.0 - 8.0 * a * q[i] * q[j];
            let value = if discriminant >= 0.0 {
                -2.0 * a / (1.0 + discriminant.sqrt())
            } else {
                warnings.push(format!(
                    "pair ({i}, {j}): negative TAP discriminant {discriminant:e}; \
                     using the naive mean-field value"
                ));
                -a
            };
            couplings[(i, j)] = value;
            couplings[(j, i)] = value;
        }
    }
    let fields = tap_fields(moments, &couplings);
    let model = CouplingModel::new(labels_of(moments, n), couplings, fields)?;
    Ok(InversionReport {
        model,
        warnings,
        converged: true,
        iterations: 0,
        gradient_norm: None,
    })
}

fn tap_fields(moments: &MomentSet, couplings: &DMatrix<f64>) -> DVector<f64> {
    let n = moments.len();
    let q = moments.mean();
    DVector::from_fn(n, |i, _| {
        let mut h = q[i].atanh();
        let mut reaction = 0.0;
        for j in 0..n {
            if j != i {
                h -= couplings[(i, j)] * q[j];
                reaction += couplings[(i, j)].powi(2) * (1.0 - q[j] * q[j]);
            }
        }
        h + q[i] * reaction
    })
}

/// Third-order inversion with the diagnostic diagonal.
///
/// Off-diagonal couplings solve, per pair, the third-order relation
/// `A_ij = -J - 2 q_i q_j J^2 - (2/3)(1 - 3 q_i^2)(1 - 3 q_j^2) J^3`
/// (the root continuous with the naive value; three-site terms vanish at
/// zero magnetization and are not carried). The diagonal stores
/// `1/(1 - q_i^2) - A_ii`, the residual the naive relation leaves behind,
/// which collects the second-order reaction term and the pair part of the
/// third order; its trace is the order-disorder diagnostic.
pub fn invert_tanaka(
    moments: &MomentSet,
    options: &InversionOptions,
) -> CoreResult<InversionReport> {
    options.validate()?;
    check_unsaturated(moments)?;
    let n = moments.len();
    let (inv, _) = regularized_inverse(&moments.covariance(), options.ridge)?;
    let q = moments.mean();
    let mut couplings = DMatrix::zeros(n, n);
    let mut warnings = Vec::new();
    for i in 0..n {
        couplings[(i, i)] = 1.0 / (1.0 - q[i] * q[i]) - inv[(i, i)];
        for j in (i + 1)..n {
            let a = inv[(i, j)];
            let alpha = q[i] * q[j];
            let beta = (1.0 - 3.0 * q[i] * q[i]) * (1.0 - 3.0 * q[j] * q[j]);
            let tap_start = {
                let d = 1.0 - 8.0 * a * alpha;
                if d >= 0.0 {
                    -2.0 * a / (1.0 + d.sqrt())
                } else {
                    -a
                }
            };
            let value = match solve_pair_cubic(a, alpha, beta, tap_start) {
                Some(v) => v,
                None => {
                    warnings.push(format!(
                        "pair ({i}, {j}): third-order root search failed; \
                         using the TAP value"
                    ));
                    tap_start
                }
            };
            couplings[(i, j)] = value;
            couplings[(j, i)] = value;
        }
    }
    let fields = tanaka_fields(moments, &couplings);
    let model =
        CouplingModel::with_meaningful_diagonal(labels_of(moments, n), couplings, fields)?;
    Ok(InversionReport {
        model,
        warnings,
        converged: true,
        iterations: 0,
        gradient_norm: None,
    })
}

/// Newton solve of `g(J) = -J - 2 alpha J^2 - (2/3) beta J^3 = a`, seeded at
/// the TAP value. Returns `None` when the iteration stalls or leaves the
/// perturbative region.
fn solve_pair_cubic(a: f64, alpha: f64, beta: f64, start: f64) -> Option<f64> {
    let g = |j: f64| -j - 2.0 * alpha * j * j - (2.0 / 3.0) * beta * j * j * j;
    let dg = |j: f64| -1.0 - 4.0 * alpha * j - 2.0 * beta * j * j;
    let bound = 10.0 * (a.abs() + 1.0);
    let mut j = start;
    for _ in 0..100 {
        let residual = g(j) - a;
        if residual.abs() <= 1e-14 * (1.0 + a.abs()) {
            return Some(j);
        }
        let slope = dg(j);
        if slope.abs() < 1e-12 {
            return None;
        }
        j -= residual / slope;
        if !j.is_finite() || j.abs() > bound {
            return None;
        }
    }
    None
}

fn tanaka_fields(moments: &MomentSet, couplings: &DMatrix<f64>) -> DVector<f64> {
    let n = moments.len();
    let q = moments.mean();
    DVector::from_fn(n, |i, _| {
        let mut h = q[i].atanh();
        let mut reaction = 0.0;
        let mut third = 0.0;
        for j in 0..n {
            if j != i {
                let jij = couplings[(i, j)];
                h -= jij * q[j];
                reaction += jij * jij * (1.0 - q[j] * q[j]);
                third += jij * jij * jij * q[j] * (1.0 - q[j] * q[j]);
            }
        }
        h + q[i] * reaction - (2.0 / 3.0) * (1.0 - 3.0 * q[i] * q[i]) * third
    })
}

/// Per-spin logistic subproblem solved by gradient ascent with backtracking.
struct SpinProblem<'a> {
    /// Column-major spins as f64, shared across subproblems.
    columns: &'a [Vec<f64>],
    target: usize,
    lambda: f64,
    tolerance: f64,
    max_iterations: usize,
}

struct SpinSolution {
    /// `theta[0]` is the field, `theta[1 + k]` the coupling to the k-th
    /// non-target spin.
    theta: Vec<f64>,
    converged: bool,
    iterations: usize,
    gradient_norm: f64,
}

impl SpinProblem<'_> {
    fn others(&self) -> Vec<usize> {
        (0..self.columns.len()).filter(|&j| j != self.target).collect()
    }

    fn activations(&self, theta: &[f64], out: &mut [f64]) {
        out.fill(theta[0]);
        for (k, &j) in self.others().iter().enumerate() {
            let w = theta[1 + k];
            if w != 0.0 {
                for (o, &s) in out.iter_mut().zip(&self.columns[j]) {
                    *o += w * s;
                }
            }
        }
    }

    /// Per-sample objective: mean log-likelihood minus the scaled penalty.
    fn objective_from_activations(&self, theta: &[f64], activations: &[f64]) -> f64 {
        let t = activations.len() as f64;
        let target = &self.columns[self.target];
        let mut ll = 0.0;
        for (&a, &s) in activations.iter().zip(target) {
            // ln sigma(2 s a) = -softplus(-2 s a)
            ll -= softplus(-2.0 * s * a);
        }
        let penalty: f64 = theta.iter().map(|v| v * v).sum();
        ll / t - self.lambda * penalty / t
    }

    fn gradient(&self, theta: &[f64], activations: &[f64], grad: &mut [f64]) -> f64 {
        let t = activations.len() as f64;
        let target = &self.columns[self.target];
        // residual_t = 2 s_t sigma(-2 s_t a_t)
        let residuals: Vec<f64> = activations
            .iter()
            .zip(target)
            .map(|(&a, &s)| 2.0 * s * sigmoid(-2.0 * s * a))
            .collect();
        grad[0] = residuals.iter().sum::<f64>() / t - 2.0 * self.lambda * theta[0] / t;
        for (k, &j) in self.others().iter().enumerate() {
            let dot: f64 = residuals
                .iter()
                .zip(&self.columns[j])
                .map(|(&r, &s)| r * s)
                .sum();
            grad[1 + k] = dot / t - 2.0 * self.lambda * theta[1 + k] / t;
        }
        grad.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    fn solve(&self) -> SpinSolution {
        let t = self.columns[0].len();
        let dim = self.columns.len();
        let mut theta = vec![0.0f64; dim];
        let mut activations = vec![0.0f64; t];
        let mut trial_activations = vec![0.0f64; t];
        let mut direction_activations = vec![0.0f64; t];
        let mut grad = vec![0.0f64; dim];

        self.activations(&theta, &mut activations);
        let mut objective = self.objective_from_activations(&theta, &activations);

        for iteration in 0..self.max_iterations {
            let norm = self.gradient(&theta, &activations, &mut grad);
            if norm <= self.tolerance {
                return SpinSolution {
                    theta,
                    converged: true,
                    iterations: iteration,
                    gradient_norm: norm,
                };
            }
            // Activation change per unit step along the gradient, so each
            // backtracking trial costs one pass instead of a full rebuild.
            direction_activations.fill(grad[0]);
            for (k, &j) in self.others().iter().enumerate() {
                let g = grad[1 + k];
                if g != 0.0 {
                    for (o, &s) in direction_activations.iter_mut().zip(&self.columns[j]) {
                        *o += g * s;
                    }
                }
            }
            let mut step = 1.0f64;
            let slope = norm * norm;
            let mut accepted = false;
            while step > 1e-12 {
                let trial: Vec<f64> =
                    theta.iter().zip(&grad).map(|(&p, &g)| p + step * g).collect();
                for ((ta, &a), &d) in trial_activations
                    .iter_mut()
                    .zip(&activations)
                    .zip(&direction_activations)
                {
                    *ta = a + step * d;
                }
                let trial_objective = self.objective_from_activations(&trial, &trial_activations);
                if trial_objective >= objective + 1e-4 * step * slope {
                    theta = trial;
                    std::mem::swap(&mut activations, &mut trial_activations);
                    objective = trial_objective;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                let norm = self.gradient(&theta, &activations, &mut grad);
                return SpinSolution {
                    theta,
                    converged: norm <= self.tolerance,
                    iterations: iteration,
                    gradient_norm: norm,
                };
            }
        }
        let norm = self.gradient(&theta, &activations, &mut grad);
        SpinSolution {
            theta,
            converged: norm <= self.tolerance,
            iterations: self.max_iterations,
            gradient_norm: norm,
        }
    }
}

/// Regularized pseudo-likelihood maximization.
///
/// Each spin maximizes its conditional log-likelihood
/// `sum_t ln sigma(2 s_i^t (h_i + sum_{j != i} K_ij s_j^t))` minus
/// `lambda (h_i^2 + sum_j K_ij^2)`; the penalty covers the field as well so
/// the optimum stays finite even on constant data. Couplings are
/// symmetrized as `(K_ij + K_ji) / 2`.
pub fn invert_rplm(
    spins: &SpinMatrix,
    options: &InversionOptions,
) -> CoreResult<InversionReport> {
    options.validate()?;
    let t = spins.num_days();
    let n = spins.num_assets();
    if t < 2 {
        return Err(CoreError::InsufficientData(format!(
            "pseudo-likelihood needs at least 2 observations, got {t}"
        )));
    }
    let columns: Vec<Vec<f64>> = (0..n)
        .map(|j| spins.spins().column(j).iter().map(|&s| s as f64).collect())
        .collect();

    let solutions: Vec<SpinSolution> = (0..n)
        .into_par_iter()
        .map(|i| {
            SpinProblem {
                columns: &columns,
                target: i,
                lambda: options.rplm_lambda,
                tolerance: options.rplm_tolerance,
                max_iterations: options.rplm_max_iterations,
            }
            .solve()
        })
        .collect();

    let mut asymmetric = DMatrix::zeros(n, n);
    let mut fields = DVector::zeros(n);
    let mut warnings = Vec::new();
    let mut converged = true;
    let mut iterations = 0;
    let mut worst_norm = 0.0f64;
    for (i, sol) in solutions.iter().enumerate() {
        fields[i] = sol.theta[0];
        for (k, j) in (0..n).filter(|&j| j != i).enumerate() {
            asymmetric[(i, j)] = sol.theta[1 + k];
        }
        iterations = iterations.max(sol.iterations);
        worst_norm = worst_norm.max(sol.gradient_norm);
        if !sol.converged {
            converged = false;
            warnings.push(format!(
                "spin {i}: pseudo-likelihood stopped at gradient norm {:e}",
                sol.gradient_norm
            ));
        }
    }
    let mut couplings = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (asymmetric[(i, j)] + asymmetric[(j, i)]);
            couplings[(i, j)] = v;
            couplings[(j, i)] = v;
        }
    }
    let model = CouplingModel::new(spins.labels().to_vec(), couplings, fields)?;
    Ok(InversionReport {
        model,
        warnings,
        converged,
        iterations,
        gradient_norm: Some(worst_norm),
    })
}

/// Dispatches on `options.method`. Mean-field methods receive the sample
/// moments, smoothed first when saturated; the pseudo-likelihood route
/// consumes the raw spins.
pub fn invert(spins: &SpinMatrix, options: &InversionOptions) -> CoreResult<InversionReport> {
    match options.method {
        InversionMethod::Rplm => invert_rplm(spins, options),
        method => {
            let raw = empirical_moments(spins);
            let saturated = raw.is_saturated();
            let moments = raw.smoothed()?;
            let mut report = match method {
                InversionMethod::Nmf => invert_nmf(&moments, options)?,
                InversionMethod::Tap => invert_tap(&moments, options)?,
                InversionMethod::Tanaka => invert_tanaka(&moments, options)?,
                InversionMethod::Rplm => unreachable!(),
            };
            if saturated {
                report
                    .warnings
                    .push("saturated moments; pseudocount smoothing applied".into());
            }
            // Mean-field labels default to indices; carry the data's labels.
            report.model = if report.model.diagonal_meaningful() {
                CouplingModel::with_meaningful_diagonal(
                    spins.labels().to_vec(),
                    report.model.couplings().clone(),
                    report.model.fields().clone(),
                )?
            } else {
                CouplingModel::new(
                    spins.labels().to_vec(),
                    report.model.couplings().clone(),
                    report.model.fields().clone(),
                )?
            };
            Ok(report)
        }
    }
}
