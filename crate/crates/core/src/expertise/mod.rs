//! Per-model expertise estimated without ground truth.

mod latent;
mod stats;

pub use latent::{correct_probability, em_fit, LatentFit};
pub use stats::{likelihood_ratio, stats_alpha, stats_beta};

use crate::config::{ExpertiseMode, FusionConfig};
use crate::fusion::CandidateStack;

/// Expertise of every candidate model for one generation.
#[derive(Debug, Clone)]
pub struct Expertise {
    pub mode: ExpertiseMode,
    /// Expertise of each intensity map.
    pub alpha: Vec<f64>,
    /// Expertise of each binary map.
    pub beta: Vec<f64>,
    /// Difficulty and posterior labels, present in latent mode.
    pub latent: Option<LatentFit>,
}

impl Expertise {
    /// Estimates expertise of the stack's models in the configured mode.
    /// Statistics mode counts against `reference`; latent mode only reads
    /// the binary maps.
    pub fn estimate(stack: &CandidateStack, reference: &[f64], config: &FusionConfig) -> Self {
        match config.mode {
            ExpertiseMode::Stats => {
                let beta = stats_beta(stack, reference, config.lambda, config.smoothing)
                    .expect("stack and reference share a length");
                let alpha =
                    stats_alpha(stack, reference, &config.alpha_thresholds, config.smoothing)
                        .expect("stack and reference share a length");
                Self {
                    mode: ExpertiseMode::Stats,
                    alpha,
                    beta,
                    latent: None,
                }
            }
            ExpertiseMode::Latent => {
                let fit = latent::fit(stack.binary(), &config.em);
                Self {
                    mode: ExpertiseMode::Latent,
                    alpha: fit.beta.clone(),
                    beta: fit.beta.clone(),
                    latent: Some(fit),
                }
            }
            ExpertiseMode::Uniform => Self {
                mode: ExpertiseMode::Uniform,
                alpha: vec![1.0; stack.len()],
                beta: vec![1.0; stack.len()],
                latent: None,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }
}

/// Log-domain weights `(w_alpha, w_beta)` used by the automaton.
///
/// Ratio-valued expertise (statistics and uniform modes) enters through its
/// logarithm. Latent expertise is already a log-odds of labelling correctly
/// at unit difficulty and is used as is, so a negative value makes a model
/// vote against its own labels.
pub fn log_weights(expertise: &Expertise) -> (Vec<f64>, Vec<f64>) {
    match expertise.mode {
        ExpertiseMode::Latent => (expertise.alpha.clone(), expertise.beta.clone()),
        ExpertiseMode::Stats | ExpertiseMode::Uniform => {
            let ln = |v: &[f64]| -> Vec<f64> {
                v.iter()
                    .map(|&x| {
                        assert!(x > 0.0, "ratio expertise must be positive, got {x}");
                        x.ln()
                    })
                    .collect()
            };
            (ln(&expertise.alpha), ln(&expertise.beta))
        }
    }
}
