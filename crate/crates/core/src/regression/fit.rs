//! Maximum-likelihood fitting of the candidate count models.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::design::Design;
use super::family::Family;
use super::inference::wald_p;
use super::laplace::{Evaluation, LaplaceObjective};
use super::model::{FittedModel, ModelSpec, OccupationFit, RandomEffectModes, RandomEffects};
use super::optim::{minimize, BfgsOptions};
use crate::error::{Error, Result};
use crate::market::PredictorRow;

/// Variances below this are reported as sitting on the boundary.
pub const BOUNDARY_VARIANCE: f64 = 1e-8;
/// Starting value for every variance component.
const START_VARIANCE: f64 = 0.5;
const SE_METHOD: &str = "Wald, inverse of the finite-difference Hessian of the analytic gradient";

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub bfgs: BfgsOptions,
    /// Log-likelihood loss tolerated when snapping a small variance to zero.
    pub boundary_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            bfgs: BfgsOptions::default(),
            boundary_tolerance: 1e-6,
        }
    }
}

struct PoissonFit {
    beta: Vec<f64>,
    cov: DMatrix<f64>,
    loglik: f64,
    pearson: f64,
    iterations: usize,
    converged: bool,
}

/// Newton-Raphson (IRLS) for the Poisson log-linear model with offset.
fn poisson_newton(design: &Design) -> Result<PoissonFit> {
    let n = design.n();
    let p = design.p;
    let total_y: f64 = design.y.iter().map(|y| *y as f64).sum();
    if total_y <= 0.0 {
        return Err(Error::Degenerate("all transition counts are zero".into()));
    }
    let total_e: f64 = design.offset.iter().map(|o| o.exp()).sum();
    let mut beta = vec![0.0; p];
    beta[0] = (total_y / total_e).ln();

    let loglik = |beta: &[f64]| -> f64 {
        (0..n)
            .map(|i| super::family::poisson_derivs(design.y[i], design.linear(i, beta)).loglik)
            .sum()
    };
    let mut ll = loglik(&beta);
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..100 {
        iterations = it + 1;
        let mut info = DMatrix::<f64>::zeros(p, p);
        let mut score = DVector::<f64>::zeros(p);
        for i in 0..n {
            let mu = design.linear(i, &beta).exp();
            let r = design.row(i);
            for a in 0..p {
                score[a] += (design.y[i] as f64 - mu) * r[a];
                for b in 0..p {
                    info[(a, b)] += mu * r[a] * r[b];
                }
            }
        }
        let chol = info.clone().cholesky().ok_or(Error::RankDeficient)?;
        let step = chol.solve(&score);
        let mut t = 1.0;
        let mut next = beta.clone();
        let mut next_ll = f64::NEG_INFINITY;
        for _ in 0..40 {
            next = beta.iter().zip(step.iter()).map(|(b, s)| b + t * s).collect();
            next_ll = loglik(&next);
            if next_ll.is_finite() && next_ll >= ll - 1e-12 * ll.abs() {
                break;
            }
            t *= 0.5;
        }
        let change = step.iter().fold(0.0_f64, |m, s| m.max((t * s).abs()));
        beta = next;
        ll = next_ll;
        if change < 1e-11 {
            converged = true;
            break;
        }
    }
    let mut info = DMatrix::<f64>::zeros(p, p);
    let mut pearson = 0.0;
    for i in 0..n {
        let mu = design.linear(i, &beta).exp();
        let r = design.row(i);
        pearson += (design.y[i] as f64 - mu).powi(2) / mu;
        for a in 0..p {
            for b in 0..p {
                info[(a, b)] += mu * r[a] * r[b];
            }
        }
    }
    let cov = info.try_inverse().ok_or(Error::RankDeficient)?;
    Ok(PoissonFit {
        beta,
        cov,
        loglik: ll,
        pearson,
        iterations,
        converged,
    })
}

/// Method-of-moments dispersion from Poisson Pearson residuals.
fn moment_alpha(design: &Design, family: Family, beta: &[f64]) -> f64 {
    let n = design.n();
    let dof = (n.saturating_sub(design.p)).max(1) as f64;
    let raw = match family {
        Family::Nb1 => {
            let chi2: f64 = (0..n)
                .map(|i| {
                    let mu = design.linear(i, beta).exp();
                    (design.y[i] as f64 - mu).powi(2) / mu
                })
                .sum();
            chi2 / dof - 1.0
        }
        Family::Nb2 => {
            (0..n)
                .map(|i| {
                    let mu = design.linear(i, beta).exp();
                    ((design.y[i] as f64 - mu).powi(2) - mu) / (mu * mu)
                })
                .sum::<f64>()
                / dof
        }
        _ => 0.0,
    };
    raw.clamp(0.05, 50.0)
}

fn occupation_fit(
    design: &Design,
    beta: &[f64],
    occ_modes: &[f64],
    year_modes: &[f64],
) -> BTreeMap<String, OccupationFit> {
    let j_n = design.occ_levels.len();
    let mut obs = vec![0.0; j_n];
    let mut exp = vec![0.0; j_n];
    let mut count = vec![0usize; j_n];
    for i in 0..design.n() {
        let j = design.occ[i];
        let u = year_modes.get(design.year[i]).copied().unwrap_or(0.0);
        obs[j] += design.y[i] as f64;
        exp[j] += (design.linear(i, beta) + u).exp();
        count[j] += 1;
    }
    design
        .occ_levels
        .iter()
        .enumerate()
        .map(|(j, code)| {
            let c = count[j].max(1) as f64;
            (
                code.clone(),
                OccupationFit {
                    intercept: occ_modes.get(j).copied().unwrap_or(0.0),
                    observed_mean: obs[j] / c,
                    expected_mean: exp[j] / c,
                },
            )
        })
        .collect()
}

fn empty_modes() -> RandomEffectModes {
    RandomEffectModes::default()
}

/// Fits a fixed-effects-only model: Poisson and quasi-Poisson by Newton-Raphson,
/// NB1 and NB2 by quasi-Newton maximisation over `(beta, log alpha)`.
pub fn fit_glm(spec: &ModelSpec, rows: &[PredictorRow]) -> Result<FittedModel> {
    fit_glm_with(spec, rows, &FitOptions::default())
}

pub fn fit_glm_with(spec: &ModelSpec, rows: &[PredictorRow], opts: &FitOptions) -> Result<FittedModel> {
    spec.validate()?;
    if spec.random_effects != RandomEffects::None {
        return Err(Error::InvalidParameter("fit_glm takes models without random effects".into()));
    }
    let design = Design::new(rows, spec)?;
    let pois = poisson_newton(&design)?;
    let p = design.p;
    let n = design.n();

    match spec.family {
        Family::Poisson | Family::QuasiPoisson => {
            let quasi = spec.family == Family::QuasiPoisson;
            let phi = pois.pearson / (n.saturating_sub(p)).max(1) as f64;
            let scale = if quasi { phi } else { 1.0 };
            let se: Vec<f64> = (0..p).map(|k| (pois.cov[(k, k)] * scale).sqrt()).collect();
            let pv = pois.beta.iter().zip(&se).map(|(b, s)| wald_p(*b, *s)).collect();
            let (loglik, aic) = if quasi {
                (None, None)
            } else {
                (Some(pois.loglik), Some(-2.0 * pois.loglik + 2.0 * p as f64))
            };
            let mut grad = vec![0.0; p];
            for i in 0..n {
                let mu = design.linear(i, &pois.beta).exp();
                for (k, g) in grad.iter_mut().enumerate() {
                    *g += (design.y[i] as f64 - mu) * design.row(i)[k];
                }
            }
            Ok(FittedModel {
                id: spec.id(),
                spec: spec.clone(),
                terms: design.terms.clone(),
                se,
                p: pv,
                sigma2_occ: None,
                sigma2_year: None,
                alpha: None,
                dispersion: quasi.then_some(phi),
                loglik,
                aic,
                n_params: p,
                n_obs: n,
                converged: pois.converged,
                iterations: pois.iterations,
                gradient_max_norm: grad.iter().fold(0.0, |m, g| m.max(g.abs())),
                message: if pois.converged { "Newton-Raphson converged".into() } else { "Newton-Raphson hit iteration limit".into() },
                boundary: Vec::new(),
                se_method: if quasi {
                    "Wald, Poisson information scaled by Pearson dispersion".into()
                } else {
                    "Wald, inverse Fisher information".into()
                },
                random_effect_modes: empty_modes(),
                occupation_fit: occupation_fit(&design, &pois.beta, &[], &[]),
                beta: pois.beta,
            })
        }
        Family::Nb1 | Family::Nb2 => {
            let objective = LaplaceObjective::new(&design, spec.family, false, false);
            let mut theta0 = pois.beta.clone();
            theta0.push(moment_alpha(&design, spec.family, &pois.beta).ln());
            optimise(spec, &design, objective, theta0, opts)
        }
    }
}

/// Fits a mixed model by maximising the Laplace-approximated marginal likelihood
/// over `(beta, log sigma2_occ, log sigma2_year, log alpha)`.
pub fn fit_glmm(spec: &ModelSpec, rows: &[PredictorRow]) -> Result<FittedModel> {
    fit_glmm_with(spec, rows, &FitOptions::default())
}

pub fn fit_glmm_with(spec: &ModelSpec, rows: &[PredictorRow], opts: &FitOptions) -> Result<FittedModel> {
    spec.validate()?;
    if spec.random_effects == RandomEffects::None {
        return Err(Error::InvalidParameter("fit_glmm needs at least one random intercept".into()));
    }
    let design = Design::new(rows, spec)?;
    if design.occ_levels.len() < 2 {
        return Err(Error::Degenerate("need at least two occupations for random intercepts".into()));
    }
    if spec.random_effects.has_year() && design.year_levels.len() < 2 {
        return Err(Error::Degenerate("need at least two years for year intercepts".into()));
    }
    let pois = poisson_newton(&design)?;
    let objective = LaplaceObjective::new(
        &design,
        spec.family,
        spec.random_effects.has_occupation(),
        spec.random_effects.has_year(),
    );
    let mut theta0 = pois.beta.clone();
    theta0.push(START_VARIANCE.ln());
    if spec.random_effects.has_year() {
        theta0.push(START_VARIANCE.ln());
    }
    if spec.family.has_dispersion() {
        theta0.push(moment_alpha(&design, spec.family, &pois.beta).ln());
    }
    optimise(spec, &design, objective, theta0, opts)
}

fn run_bfgs(objective: &LaplaceObjective<'_>, theta0: &[f64], opts: &FitOptions) -> Result<super::optim::BfgsResult> {
    minimize(
        |theta| {
            objective
                .evaluate(theta)
                .ok()
                .map(|e| (-e.value, e.gradient.iter().map(|g| -g).collect()))
        },
        theta0,
        &opts.bfgs,
    )
    .ok_or_else(|| Error::Convergence("objective undefined at the starting values".into()))
}

fn optimise(
    spec: &ModelSpec,
    design: &Design,
    mut objective: LaplaceObjective<'_>,
    theta0: Vec<f64>,
    opts: &FitOptions,
) -> Result<FittedModel> {
    let p = design.p;
    let mut result = run_bfgs(&objective, &theta0, opts)?;
    let mut boundary: Vec<String> = Vec::new();

    // Variance components: snap to zero when the objective does not prefer a
    // positive value, then re-optimise the remaining parameters.
    if spec.random_effects != RandomEffects::None {
        let mut fix_occ = false;
        let mut fix_year = false;
        let current = objective.decode(&result.x);
        let l_hat = -result.f;
        let (s2o, s2y) = (current.sd_occ.powi(2), current.sd_year.powi(2));
        if objective.layout.occ {
            let l0 = objective.value_at(&current.beta, 0.0, s2y, current.log_alpha)?;
            fix_occ = s2o < BOUNDARY_VARIANCE || l0 >= l_hat - opts.boundary_tolerance;
        }
        if objective.layout.year {
            let l0 = objective.value_at(&current.beta, s2o, 0.0, current.log_alpha)?;
            fix_year = s2y < BOUNDARY_VARIANCE || l0 >= l_hat - opts.boundary_tolerance;
        }
        if fix_occ || fix_year {
            let old = objective.layout;
            let mut theta: Vec<f64> = result.x[..p].to_vec();
            if old.occ && !fix_occ {
                theta.push(result.x[old.occ_index().unwrap()]);
            }
            if old.year && !fix_year {
                theta.push(result.x[old.year_index().unwrap()]);
            }
            if let Some(ai) = old.alpha_index() {
                theta.push(result.x[ai]);
            }
            objective.fix_at_zero(fix_occ, fix_year);
            result = run_bfgs(&objective, &theta, opts)?;
            if fix_occ {
                boundary.push("sigma2_occ".into());
            }
            if fix_year {
                boundary.push("sigma2_year".into());
            }
        }
    }

    let (theta, polished) = polish(&objective, result.x.clone(), opts)?;
    let eval: Evaluation = objective.evaluate(&theta)?;
    let params = objective.decode(&theta);
    let hess = observed_information(&objective, &theta)?;
    let cov = hess.clone().cholesky().map(|c| c.inverse());
    let mut message = result.message.clone();
    if polished > 0 {
        message.push_str(&format!("; {polished} Newton refinement step(s)"));
    }
    let se: Vec<f64> = match &cov {
        Some(c) => (0..p).map(|i| c[(i, i)].sqrt()).collect(),
        None => {
            message.push_str("; observed information not positive definite, standard errors unavailable");
            vec![f64::NAN; p]
        }
    };
    let beta = params.beta.clone();
    let pv = beta.iter().zip(&se).map(|(b, s)| wald_p(*b, *s)).collect();

    let n_var = spec.random_effects.count();
    let n_params = p + n_var + usize::from(spec.family.has_dispersion());
    let loglik = eval.value;
    let gmax = max_abs(&eval.gradient);

    let mut modes = RandomEffectModes::default();
    if spec.random_effects.has_occupation() {
        modes.occupation = design.occ_levels.iter().cloned().zip(eval.occ_modes.iter().copied()).collect();
    }
    if spec.random_effects.has_year() {
        modes.year = design.year_levels.iter().copied().zip(eval.year_modes.iter().copied()).collect();
    }

    Ok(FittedModel {
        id: spec.id(),
        spec: spec.clone(),
        terms: design.terms.clone(),
        se,
        p: pv,
        sigma2_occ: spec.random_effects.has_occupation().then(|| params.sd_occ.powi(2)),
        sigma2_year: spec.random_effects.has_year().then(|| params.sd_year.powi(2)),
        alpha: spec.family.has_dispersion().then(|| params.log_alpha.exp()),
        dispersion: None,
        loglik: Some(loglik),
        aic: Some(-2.0 * loglik + 2.0 * n_params as f64),
        n_params,
        n_obs: design.n(),
        converged: (result.converged || gmax < opts.bfgs.grad_tol) && cov.is_some(),
        iterations: result.iterations + polished,
        gradient_max_norm: gmax,
        message,
        boundary,
        se_method: SE_METHOD.into(),
        occupation_fit: occupation_fit(design, &beta, &eval.occ_modes, &eval.year_modes),
        random_effect_modes: modes,
        beta,
    })
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, g| m.max(g.abs()))
}

/// Negative Hessian of the objective by central differences of its analytic gradient.
fn observed_information(objective: &LaplaceObjective<'_>, theta: &[f64]) -> Result<DMatrix<f64>> {
    let k = theta.len();
    let mut hess = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        let h = 1e-4 * theta[j].abs().max(1.0);
        let mut up = theta.to_vec();
        up[j] += h;
        let mut dn = theta.to_vec();
        dn[j] -= h;
        let gu = objective.evaluate(&up)?.gradient;
        let gd = objective.evaluate(&dn)?.gradient;
        for i in 0..k {
            hess[(i, j)] = -(gu[i] - gd[i]) / (2.0 * h);
        }
    }
    // restore the warm start at theta
    objective.evaluate(theta)?;
    Ok((&hess + hess.transpose()) * 0.5)
}

/// Newton steps on the observed information until the gradient tolerance is
/// met. BFGS tends to stall a little short of it on flat likelihoods.
fn polish(objective: &LaplaceObjective<'_>, mut theta: Vec<f64>, opts: &FitOptions) -> Result<(Vec<f64>, usize)> {
    let mut steps = 0;
    let mut current = objective.evaluate(&theta)?;
    for _ in 0..10 {
        let gmax = max_abs(&current.gradient);
        if gmax < opts.bfgs.grad_tol {
            break;
        }
        let info = observed_information(objective, &theta)?;
        let Some(chol) = info.cholesky() else { break };
        let step = chol.solve(&DVector::from_column_slice(&current.gradient));
        let noise = 1e-11 * current.value.abs().max(1.0);
        let mut t = 1.0;
        let mut next = None;
        for _ in 0..10 {
            let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
            if let Ok(e) = objective.evaluate(&cand) {
                if e.value >= current.value - noise && max_abs(&e.gradient) < gmax {
                    next = Some((cand, e));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((cand, e)) = next else {
            objective.evaluate(&theta)?;
            break;
        };
        theta = cand;
        current = e;
        steps += 1;
    }
    Ok((theta, steps))
}

/// Fits any spec, dispatching on whether it has random effects.
pub fn fit_model(spec: &ModelSpec, rows: &[PredictorRow]) -> Result<FittedModel> {
    if spec.random_effects == RandomEffects::None {
        fit_glm(spec, rows)
    } else {
        fit_glmm(spec, rows)
    }
}
