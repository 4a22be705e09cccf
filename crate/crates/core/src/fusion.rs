//! The cellular automaton that fuses candidate maps, and the averaging baseline.
//!
//! Every superpixel of every candidate map is a cell. In one generation each
//! cell's logit is rebuilt from the reference map, its own intensity
//! weighted by the model's intensity expertise, and the binary votes of the
//! other models at the same superpixel weighted by their binary expertise.
//! All cells update from the same frozen snapshot.

use crate::config::FusionConfig;
use crate::error::{check_len, Error, Result};
use crate::expertise::{log_weights, Expertise};
use crate::knowledge::KnowledgeBundle;
use crate::preprocess::{binarize, otsu};
use crate::raster::min_max_normalize;

/// Logit sums are clipped to this magnitude so the logistic stays strictly
/// inside (0, 1) in double precision.
const LOGIT_LIMIT: f64 = 30.0;

/// Superpixel-level candidate maps with their Otsu thresholds and binary maps.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateStack {
    maps: Vec<Vec<f64>>,
    thresholds: Vec<f64>,
    binary: Vec<Vec<bool>>,
}

impl CandidateStack {
    /// Thresholds every map with Otsu.
    pub fn new(maps: Vec<Vec<f64>>) -> Result<Self> {
        let thresholds = maps
            .iter()
            .map(|m| if m.is_empty() { 0.0 } else { otsu(m) })
            .collect();
        Self::with_thresholds(maps, thresholds)
    }

    pub fn with_thresholds(maps: Vec<Vec<f64>>, thresholds: Vec<f64>) -> Result<Self> {
        let first = maps
            .first()
            .ok_or_else(|| Error::Input("at least one candidate map is required".into()))?;
        if first.is_empty() {
            return Err(Error::Input("candidate maps must be nonempty".into()));
        }
        check_len(maps.len(), thresholds.len())?;
        for m in &maps {
            check_len(first.len(), m.len())?;
            if m.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Input(
                    "candidate intensities must lie in [0, 1]".into(),
                ));
            }
        }
        let binary = maps
            .iter()
            .zip(&thresholds)
            .map(|(m, &t)| binarize(m, t))
            .collect();
        Ok(Self {
            maps,
            thresholds,
            binary,
        })
    }

    /// Number of candidate models.
    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn superpixels(&self) -> usize {
        self.maps[0].len()
    }

    pub fn maps(&self) -> &[Vec<f64>] {
        &self.maps
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn binary(&self) -> &[Vec<bool>] {
        &self.binary
    }
}

/// One generation of the automaton.
#[derive(Debug, Clone)]
pub struct FusionState {
    pub generation: usize,
    pub stack: CandidateStack,
    pub reference: Vec<f64>,
    pub expertise: Expertise,
    pub config: FusionConfig,
}

impl FusionState {
    /// Generation 0: the input stack, the initial reference and the
    /// expertise estimated against it.
    pub fn new(stack: CandidateStack, reference: Vec<f64>, config: &FusionConfig) -> Result<Self> {
        check_len(stack.superpixels(), reference.len())?;
        if reference.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Input("reference values must lie in [0, 1]".into()));
        }
        let expertise = Expertise::estimate(&stack, &reference, config);
        Ok(Self {
            generation: 0,
            stack,
            reference,
            expertise,
            config: config.clone(),
        })
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// New candidate maps from one synchronous update of `state`.
fn updated_maps(state: &FusionState) -> Vec<Vec<f64>> {
    let eps = state.config.logit_clamp;
    let (w_alpha, w_beta) = log_weights(&state.expertise);
    let prior: Vec<f64> = state
        .reference
        .iter()
        .map(|&r| logit(r.clamp(eps, 1.0 - eps)))
        .collect();
    let binary = state.stack.binary();
    let maps = state.stack.maps();
    (0..maps.len())
        .map(|p| {
            (0..prior.len())
                .map(|n| {
                    let votes: f64 = (0..maps.len())
                        .filter(|&q| q != p)
                        .map(|q| if binary[q][n] { w_beta[q] } else { -w_beta[q] })
                        .sum();
                    let z = prior[n] + w_alpha[p] * maps[p][n] + votes;
                    sigmoid(z.clamp(-LOGIT_LIMIT, LOGIT_LIMIT))
                })
                .collect()
        })
        .collect()
}

/// Advances the automaton by one generation: updates every map, re-thresholds
/// it, refreshes the reference as the mean map and re-estimates expertise
/// against the new reference.
pub fn ca_step(state: &FusionState) -> FusionState {
    let stack = CandidateStack::new(updated_maps(state)).expect("updated maps keep their shape");
    let reference = update_reference(&stack);
    let expertise = Expertise::estimate(&stack, &reference, &state.config);
    FusionState {
        generation: state.generation + 1,
        stack,
        reference,
        expertise,
        config: state.config.clone(),
    }
}

/// Elementwise mean of the candidate maps.
pub fn update_reference(stack: &CandidateStack) -> Vec<f64> {
    let p = stack.len() as f64;
    (0..stack.superpixels())
        .map(|n| (stack.maps().iter().map(|m| m[n]).sum::<f64>() / p).clamp(0.0, 1.0))
        .collect()
}

/// The averaging baseline: normalized mean of the candidate maps.
pub fn average_baseline(stack: &CandidateStack) -> Vec<f64> {
    min_max_normalize(&update_reference(stack))
}

/// Snapshot of one generation kept for diagnostics.
#[derive(Debug, Clone)]
pub struct GenerationRecord {
    pub generation: usize,
    pub reference: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub expertise: Expertise,
}

#[derive(Debug, Clone)]
pub struct FusionOutcome {
    /// Normalized mean of the final candidate maps.
    pub final_map: Vec<f64>,
    /// Mean absolute change of the reference map at each generation.
    pub trace: Vec<f64>,
    /// Generations `0..=T`.
    pub history: Vec<GenerationRecord>,
}

fn record(state: &FusionState) -> GenerationRecord {
    GenerationRecord {
        generation: state.generation,
        reference: state.reference.clone(),
        thresholds: state.stack.thresholds().to_vec(),
        expertise: state.expertise.clone(),
    }
}

/// Runs `config.generations` automaton steps from the knowledge bundle's
/// reference map.
pub fn run_fusion(
    stack: CandidateStack,
    knowledge: &KnowledgeBundle,
    config: &FusionConfig,
) -> Result<FusionOutcome> {
    config.validate()?;
    let mut state = FusionState::new(stack, knowledge.reference.clone(), config)?;
    let mut history = vec![record(&state)];
    let mut trace = Vec::with_capacity(config.generations);
    for _ in 0..config.generations {
        let next = ca_step(&state);
        let change = next
            .reference
            .iter()
            .zip(&state.reference)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / next.reference.len() as f64;
        trace.push(change);
        history.push(record(&next));
        state = next;
    }
    Ok(FusionOutcome {
        final_map: average_baseline(&state.stack),
        trace,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ExpertiseMode, KnowledgeSource};
    use crate::expertise::Expertise;

    fn state_with_weights(
        maps: Vec<Vec<f64>>,
        thresholds: Vec<f64>,
        reference: Vec<f64>,
        alpha: Vec<f64>,
        beta: Vec<f64>,
    ) -> FusionState {
        let config = FusionConfig::default();
        FusionState {
            generation: 0,
            stack: CandidateStack::with_thresholds(maps, thresholds).unwrap(),
            reference,
            expertise: Expertise {
                mode: ExpertiseMode::Stats,
                alpha,
                beta,
                latent: None,
            },
            config,
        }
    }

    fn bundle(reference: Vec<f64>) -> KnowledgeBundle {
        KnowledgeBundle {
            source: KnowledgeSource::Boundary,
            external: reference.clone(),
            majority: reference.clone(),
            consensus: reference.clone(),
            reference,
        }
    }

    #[test]
    fn neutral_reference_and_weights_give_half() {
        let s = state_with_weights(
            vec![vec![0.1, 0.9, 0.4], vec![0.7, 0.2, 0.6]],
            vec![0.5, 0.5],
            vec![0.5; 3],
            vec![1.0; 2],
            vec![1.0; 2],
        );
        for m in updated_maps(&s) {
            assert!(m.iter().all(|&v| v == 0.5));
        }
    }

    #[test]
    fn single_superpixel_worked_example() {
        // w_alpha = 1 and w_beta = 0.3 for the neighbour, which votes +1.
        let e = std::f64::consts::E;
        let s = state_with_weights(
            vec![vec![0.8], vec![0.9]],
            vec![0.5, 0.5],
            vec![0.5],
            vec![e, 1.0],
            vec![1.0, 0.3f64.exp()],
        );
        let maps = updated_maps(&s);
        assert!((maps[0][0] - 0.7503).abs() < 1e-4);
        assert!((maps[0][0] - sigmoid(1.1)).abs() < 1e-12);
    }

    #[test]
    fn clamped_reference_is_finite() {
        let eps: f64 = 1e-4;
        assert!((logit((1.0f64).clamp(eps, 1.0 - eps)) - 9.2102).abs() < 1e-4);
        let s = state_with_weights(
            vec![vec![0.2], vec![0.3]],
            vec![0.5, 0.5],
            vec![1.0],
            vec![1.0; 2],
            vec![1.0; 2],
        );
        let maps = updated_maps(&s);
        assert!((maps[0][0] - (1.0 - eps)).abs() < 1e-12);
    }

    #[test]
    fn outputs_stay_strictly_inside_unit_interval() {
        let s = state_with_weights(
            vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]],
            vec![0.5; 3],
            vec![1.0, 0.0],
            vec![1e9; 3],
            vec![1e9; 3],
        );
        for m in updated_maps(&s) {
            assert!(m.iter().all(|&v| v > 0.0 && v < 1.0), "{m:?}");
        }
    }

    #[test]
    fn reference_is_elementwise_mean() {
        let stack = CandidateStack::new(vec![vec![0.2, 0.9], vec![0.6, 0.1]]).unwrap();
        let r = update_reference(&stack);
        assert!((r[0] - 0.4).abs() < 1e-15);
        assert!((r[1] - 0.5).abs() < 1e-15);
        let same = CandidateStack::new(vec![vec![0.3, 0.7]; 3]).unwrap();
        let r = update_reference(&same);
        assert!((r[0] - 0.3).abs() < 1e-15 && (r[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn baseline_of_complementary_maps_is_flat() {
        let m = vec![0.1, 0.35, 0.8, 0.6];
        let c: Vec<f64> = m.iter().map(|v| 1.0 - v).collect();
        let stack = CandidateStack::new(vec![m, c]).unwrap();
        assert_eq!(average_baseline(&stack), vec![0.0; 4]);
        let single = CandidateStack::new(vec![vec![0.2, 0.4, 0.6]]).unwrap();
        assert_eq!(
            average_baseline(&single),
            min_max_normalize(&[0.2, 0.4, 0.6])
        );
    }

    #[test]
    fn zero_generations_is_the_average_baseline() {
        let stack = CandidateStack::new(vec![vec![0.2, 0.9, 0.4], vec![0.6, 0.1, 0.5]]).unwrap();
        let config = FusionConfig {
            generations: 0,
            ..FusionConfig::default()
        };
        let out = run_fusion(stack.clone(), &bundle(vec![0.3, 0.6, 0.9]), &config).unwrap();
        assert_eq!(out.final_map, average_baseline(&stack));
        assert!(out.trace.is_empty());
        assert_eq!(out.history.len(), 1);
    }

    #[test]
    fn trace_has_one_entry_per_generation() {
        let stack = CandidateStack::new(vec![
            vec![0.2, 0.9, 0.4],
            vec![0.6, 0.8, 0.1],
            vec![0.1, 0.7, 0.3],
        ])
        .unwrap();
        for mode in [ExpertiseMode::Stats, ExpertiseMode::Latent] {
            let config = FusionConfig {
                mode,
                ..FusionConfig::default()
            };
            let out = run_fusion(stack.clone(), &bundle(vec![0.1, 1.0, 0.2]), &config).unwrap();
            assert_eq!(out.trace.len(), 5);
            assert!(out.trace.iter().all(|&t| t >= 0.0));
            assert_eq!(out.history.len(), 6);
            assert!(out.final_map.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn stack_validation() {
        assert!(CandidateStack::new(vec![]).is_err());
        assert!(CandidateStack::new(vec![vec![]]).is_err());
        assert!(CandidateStack::new(vec![vec![0.1], vec![0.1, 0.2]]).is_err());
        assert!(CandidateStack::new(vec![vec![1.2]]).is_err());
        let s = CandidateStack::with_thresholds(vec![vec![0.2, 0.5, 0.7]], vec![0.5]).unwrap();
        assert_eq!(s.binary()[0], vec![false, true, true]);
    }
}
