//! Pixel-level metrics, convergence summaries and CSV reporting.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::raster::Raster;

/// Weight of precision against recall in the F-measure.
pub const BETA_SQUARED: f64 = 0.3;

/// Largest final reference change for which a run counts as converged.
pub const CONVERGENCE_TOLERANCE: f64 = 0.01;

fn same_shape(sal: &Raster, gt: &Raster) -> Result<()> {
    gt.ensure_dimensions(sal.width(), sal.height())
}

/// Twice the mean saliency, capped at 1.
pub fn adaptive_threshold(sal: &Raster) -> f64 {
    (2.0 * sal.mean()).min(1.0)
}

pub fn f_score(precision: f64, recall: f64, beta_squared: f64) -> f64 {
    let denom = beta_squared * precision + recall;
    if denom > 0.0 {
        (1.0 + beta_squared) * precision * recall / denom
    } else {
        0.0
    }
}

/// F-measure of `sal` binarized at the adaptive threshold against a binary
/// ground truth. `None` when the ground truth has no foreground.
pub fn f_measure(sal: &Raster, gt: &Raster, beta_squared: f64) -> Result<Option<f64>> {
    same_shape(sal, gt)?;
    let threshold = adaptive_threshold(sal);
    let (mut tp, mut fp, mut fg) = (0usize, 0usize, 0usize);
    for (&s, &g) in sal.data().iter().zip(gt.data()) {
        let truth = g >= 0.5;
        let predicted = s >= threshold;
        fg += usize::from(truth);
        if predicted {
            if truth {
                tp += 1;
            } else {
                fp += 1;
            }
        }
    }
    if fg == 0 {
        return Ok(None);
    }
    if tp == 0 {
        return Ok(Some(0.0));
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / fg as f64;
    Ok(Some(f_score(precision, recall, beta_squared)))
}

/// Mean absolute per-pixel difference.
pub fn mae(sal: &Raster, gt: &Raster) -> Result<f64> {
    same_shape(sal, gt)?;
    Ok(sal
        .data()
        .iter()
        .zip(gt.data())
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / sal.data().len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Convergence {
    pub series: Vec<f64>,
    /// Whether the last change is within tolerance; vacuously true for an
    /// empty series.
    pub converged: bool,
}

pub fn convergence_trace(trace: &[f64], tolerance: f64) -> Convergence {
    Convergence {
        series: trace.to_vec(),
        converged: trace.last().is_none_or(|&v| v <= tolerance),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodScore {
    pub method: String,
    pub f_measure: f64,
    pub mae: f64,
    /// Final reference change for automaton methods.
    pub final_change: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageResult {
    pub image: String,
    /// `None` when the image was skipped for having an empty ground truth.
    pub scores: Option<Vec<MethodScore>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    pub images: usize,
    pub mean_f_measure: f64,
    pub mean_mae: f64,
    /// Runs with a recorded trace, and how many of them converged.
    pub traced: usize,
    pub converged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<(String, MethodScore)>,
    pub summaries: Vec<MethodSummary>,
    pub skipped: Vec<String>,
}

/// Aggregates per-image scores. Methods keep their first-appearance order.
pub fn report(results: &[ImageResult]) -> Result<EvalReport> {
    if results.is_empty() {
        return Err(Error::Input("no evaluated images".into()));
    }
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    let mut methods: Vec<String> = Vec::new();
    for result in results {
        match &result.scores {
            None => skipped.push(result.image.clone()),
            Some(scores) => {
                for s in scores {
                    if !methods.contains(&s.method) {
                        methods.push(s.method.clone());
                    }
                    rows.push((result.image.clone(), s.clone()));
                }
            }
        }
    }
    let summaries = methods
        .into_iter()
        .map(|method| {
            let scores: Vec<&MethodScore> = rows
                .iter()
                .map(|(_, s)| s)
                .filter(|s| s.method == method)
                .collect();
            let k = scores.len() as f64;
            let changes: Vec<f64> = scores.iter().filter_map(|s| s.final_change).collect();
            MethodSummary {
                images: scores.len(),
                mean_f_measure: scores.iter().map(|s| s.f_measure).sum::<f64>() / k,
                mean_mae: scores.iter().map(|s| s.mae).sum::<f64>() / k,
                traced: changes.len(),
                converged: changes
                    .iter()
                    .filter(|&&c| c <= CONVERGENCE_TOLERANCE)
                    .count(),
                method,
            }
        })
        .collect();
    Ok(EvalReport {
        rows,
        summaries,
        skipped,
    })
}

impl EvalReport {
    /// `image,method,f_measure,mae` rows followed by one `mean` row per method.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("image,method,f_measure,mae\n");
        for (image, s) in &self.rows {
            writeln!(out, "{image},{},{:.6},{:.6}", s.method, s.f_measure, s.mae).unwrap();
        }
        for m in &self.summaries {
            writeln!(
                out,
                "mean,{},{:.6},{:.6}",
                m.method, m.mean_f_measure, m.mean_mae
            )
            .unwrap();
        }
        out
    }
}
