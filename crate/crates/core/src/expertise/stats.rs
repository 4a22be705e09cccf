use crate::error::{check_len, Result};
use crate::fusion::CandidateStack;

/// Smoothed likelihood ratio `P(label = 1 | F) / P(label = 1 | not F)`,
/// where `F` holds for superpixels with `reference >= threshold`.
///
/// Joint and marginal frequencies are fractions of all superpixels, each
/// with `eps` added so the ratio stays finite and positive on small or
/// one-sided samples.
pub fn likelihood_ratio(labels: &[bool], reference: &[f64], threshold: f64, eps: f64) -> f64 {
    let n = labels.len() as f64;
    let (mut fg, mut fg_hit, mut bg_hit) = (0usize, 0usize, 0usize);
    for (&label, &r) in labels.iter().zip(reference) {
        let salient = r >= threshold;
        fg += usize::from(salient);
        if label {
            if salient {
                fg_hit += 1;
            } else {
                bg_hit += 1;
            }
        }
    }
    let bg = labels.len() - fg;
    let p_fg = fg as f64 / n + eps;
    let p_bg = bg as f64 / n + eps;
    let joint_fg = fg_hit as f64 / n + eps;
    let joint_bg = bg_hit as f64 / n + eps;
    (joint_fg / p_fg) / (joint_bg / p_bg)
}

fn warn_if_empty(reference: &[f64], threshold: f64) {
    if reference.iter().all(|&r| r < threshold) {
        log::warn!("reference map lies entirely below {threshold}; expertise ratios are smoothing-dominated");
    }
}

/// Binary-map expertise of each model, with the reference thresholded at `lambda`.
pub fn stats_beta(
    stack: &CandidateStack,
    reference: &[f64],
    lambda: f64,
    eps: f64,
) -> Result<Vec<f64>> {
    check_len(stack.superpixels(), reference.len())?;
    warn_if_empty(reference, lambda);
    Ok(stack
        .binary()
        .iter()
        .map(|labels| likelihood_ratio(labels, reference, lambda, eps))
        .collect())
}

/// Intensity-map expertise of each model: the mean of the smoothed ratios
/// obtained with the reference thresholded at each of `thresholds`.
pub fn stats_alpha(
    stack: &CandidateStack,
    reference: &[f64],
    thresholds: &[f64],
    eps: f64,
) -> Result<Vec<f64>> {
    check_len(stack.superpixels(), reference.len())?;
    if let Some(&lowest) = thresholds.iter().min_by(|a, b| a.total_cmp(b)) {
        warn_if_empty(reference, lowest);
    }
    Ok(stack
        .binary()
        .iter()
        .map(|labels| {
            thresholds
                .iter()
                .map(|&t| likelihood_ratio(labels, reference, t, eps))
                .sum::<f64>()
                / thresholds.len() as f64
        })
        .collect())
}
