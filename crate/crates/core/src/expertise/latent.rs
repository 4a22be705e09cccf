//! EM over binary labels with per-model expertise and per-superpixel
//! difficulty as latent parameters.
//!
//! A model labels superpixel `n` correctly with probability
//! `sigmoid(beta_p / pi_n)`. Difficulty is optimized through
//! `d_n = ln(1 / pi_n)`, so the logit of a correct label is
//! `beta_p * exp(d_n)`. Both `beta_p` and `d_n` carry Gaussian priors, and
//! the true labels have a uniform prior.

use crate::config::EmConfig;
use crate::error::{Error, Result};

const MAX_HALVINGS: usize = 50;

/// Result of an EM fit.
#[derive(Debug, Clone)]
pub struct LatentFit {
    /// Expertise of each model, any real value.
    pub beta: Vec<f64>,
    /// Difficulty `pi_n > 0` of each superpixel.
    pub difficulty: Vec<f64>,
    /// Posterior probability that each superpixel is foreground.
    pub posterior: Vec<f64>,
    /// Penalized marginal log-likelihood after initialization and after
    /// every round.
    pub objective: Vec<f64>,
    pub rounds: usize,
    pub converged: bool,
}

/// Probability that a model of expertise `beta` labels a superpixel of
/// difficulty `pi` correctly; certain when `pi == 0`.
pub fn correct_probability(beta: f64, pi: f64) -> f64 {
    if pi == 0.0 {
        1.0
    } else {
        sigmoid(beta / pi)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

struct Problem<'a> {
    labels: &'a [Vec<bool>],
    models: usize,
    items: usize,
    prior_mean: f64,
    prior_var: f64,
}

/// Parameters laid out as `[beta_0..beta_P, d_0..d_N]`.
type Params = Vec<f64>;

/// `(ln sigmoid(x), ln sigmoid(-x))` from a single exponential.
fn log_sigmoid_pair(x: f64) -> (f64, f64) {
    let t = (-x.abs()).exp().ln_1p();
    (-((-x).max(0.0) + t), -(x.max(0.0) + t))
}

impl Problem<'_> {
    /// `exp(d_n)` for every item.
    fn scales(&self, params: &[f64]) -> Vec<f64> {
        params[self.models..].iter().map(|d| d.exp()).collect()
    }

    fn log_prior(&self, params: &[f64]) -> f64 {
        -params
            .iter()
            .map(|v| (v - self.prior_mean).powi(2))
            .sum::<f64>()
            / (2.0 * self.prior_var)
    }

    /// Posterior foreground probability of each item.
    fn e_step(&self, params: &[f64]) -> Vec<f64> {
        let scales = self.scales(params);
        (0..self.items)
            .map(|n| {
                let evidence: f64 = (0..self.models)
                    .map(|p| {
                        let x = params[p] * scales[n];
                        if self.labels[p][n] {
                            x
                        } else {
                            -x
                        }
                    })
                    .sum();
                sigmoid(evidence)
            })
            .collect()
    }

    /// Probability that model `p` labelled item `n` correctly under the posterior.
    fn agreement(&self, posterior: &[f64], p: usize, n: usize) -> f64 {
        if self.labels[p][n] {
            posterior[n]
        } else {
            1.0 - posterior[n]
        }
    }

    /// Expected complete-data log-likelihood plus log-priors.
    fn q(&self, params: &[f64], posterior: &[f64]) -> f64 {
        let mut total = self.log_prior(params);
        let scales = self.scales(params);
        for (p, beta) in params[..self.models].iter().enumerate() {
            for (n, scale) in scales.iter().enumerate() {
                let (right, wrong) = log_sigmoid_pair(beta * scale);
                let c = self.agreement(posterior, p, n);
                total += c * right + (1.0 - c) * wrong;
            }
        }
        total
    }

    fn q_gradient(&self, params: &[f64], posterior: &[f64]) -> Params {
        let mut grad: Params = params
            .iter()
            .map(|v| -(v - self.prior_mean) / self.prior_var)
            .collect();
        let scales = self.scales(params);
        for p in 0..self.models {
            for (n, &scale) in scales.iter().enumerate() {
                let x = params[p] * scale;
                let residual = self.agreement(posterior, p, n) - sigmoid(x);
                grad[p] += residual * scale;
                grad[self.models + n] += residual * x;
            }
        }
        grad
    }

    /// Penalized marginal log-likelihood, the quantity EM never decreases.
    fn objective(&self, params: &[f64]) -> f64 {
        let mut total = self.log_prior(params);
        let scales = self.scales(params);
        for (n, scale) in scales.iter().enumerate() {
            let (mut fg, mut bg) = (0.0, 0.0);
            for (beta, labels) in params[..self.models].iter().zip(self.labels) {
                let (right, wrong) = log_sigmoid_pair(beta * scale);
                if labels[n] {
                    fg += right;
                    bg += wrong;
                } else {
                    fg += wrong;
                    bg += right;
                }
            }
            let hi = fg.max(bg);
            total += 0.5f64.ln() + hi + ((fg - hi).exp() + (bg - hi).exp()).ln();
        }
        total
    }

    /// Gradient ascent on `q` with a backtracking step per move.
    fn m_step(&self, params: &mut Params, posterior: &[f64], config: &EmConfig) {
        let mut current = self.q(params, posterior);
        for _ in 0..config.inner_steps {
            let grad = self.q_gradient(params, posterior);
            if grad.iter().all(|g| g.abs() < 1e-12) {
                break;
            }
            let mut step = config.initial_step;
            let mut accepted = false;
            for _ in 0..MAX_HALVINGS {
                let trial: Params = params
                    .iter()
                    .zip(&grad)
                    .map(|(v, g)| v + step * g)
                    .collect();
                let value = self.q(&trial, posterior);
                if value >= current {
                    *params = trial;
                    current = value;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
    }
}

/// Fits expertise and difficulty to a `P x N` matrix of 0/1 labels.
pub fn em_fit(labels: &[Vec<f64>], config: &EmConfig) -> Result<LatentFit> {
    let first = labels
        .first()
        .ok_or_else(|| Error::Input("EM needs at least one labelling model".into()))?;
    let mut binary = Vec::with_capacity(labels.len());
    for row in labels {
        if row.len() != first.len() {
            return Err(Error::Length {
                expected: first.len(),
                actual: row.len(),
            });
        }
        binary.push(
            row.iter()
                .map(|&v| match v {
                    0.0 => Ok(false),
                    1.0 => Ok(true),
                    other => Err(Error::Input(format!(
                        "EM labels must be 0 or 1, got {other}"
                    ))),
                })
                .collect::<Result<Vec<bool>>>()?,
        );
    }
    if first.is_empty() {
        return Err(Error::Input("EM needs at least one superpixel".into()));
    }
    Ok(fit(&binary, config))
}

pub(crate) fn fit(labels: &[Vec<bool>], config: &EmConfig) -> LatentFit {
    let problem = Problem {
        labels,
        models: labels.len(),
        items: labels.first().map_or(0, Vec::len),
        prior_mean: config.prior_mean,
        prior_var: config.prior_std * config.prior_std,
    };
    let mut params: Params = vec![config.prior_mean; problem.models + problem.items];
    let mut objective = vec![problem.objective(&params)];
    let mut converged = false;
    let mut rounds = 0;
    while rounds < config.max_rounds {
        let posterior = problem.e_step(&params);
        problem.m_step(&mut params, &posterior, config);
        rounds += 1;
        let value = problem.objective(&params);
        let previous = *objective.last().expect("objective starts nonempty");
        objective.push(value);
        if (value - previous).abs() < config.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        log::debug!("EM stopped after {rounds} rounds without converging");
    }

    let posterior = problem.e_step(&params);
    let (beta, log_inv_difficulty) = params.split_at(problem.models);
    LatentFit {
        beta: beta.to_vec(),
        difficulty: log_inv_difficulty.iter().map(|d| (-d).exp()).collect(),
        posterior,
        objective,
        rounds,
        converged,
    }
}
