//! Run configuration and its plain-text `key = value` form.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// How per-model expertise is estimated each generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpertiseMode {
    /// Likelihood ratios counted against the thresholded reference map.
    Stats,
    /// Expertise and superpixel difficulty as latent variables fitted by EM.
    Latent,
    /// Every model gets a zero log-weight, so only the reference drives updates.
    Uniform,
}

impl ExpertiseMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ExpertiseMode::Stats => "stats",
            ExpertiseMode::Latent => "latent",
            ExpertiseMode::Uniform => "uniform",
        }
    }
}

impl fmt::Display for ExpertiseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExpertiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "stats" => Ok(ExpertiseMode::Stats),
            "latent" => Ok(ExpertiseMode::Latent),
            "uniform" => Ok(ExpertiseMode::Uniform),
            other => Err(Error::Config(format!("unknown expertise mode {other:?}"))),
        }
    }
}

/// Where the external knowledge map comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnowledgeSource {
    /// Colour contrast against clustered image-border superpixels.
    Boundary,
    /// A precomputed single-channel map supplied next to the image.
    File,
}

impl KnowledgeSource {
    pub fn as_str(self) -> &'static str {
        match self {
            KnowledgeSource::Boundary => "boundary",
            KnowledgeSource::File => "file",
        }
    }
}

impl fmt::Display for KnowledgeSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KnowledgeSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "boundary" => Ok(KnowledgeSource::Boundary),
            "file" => Ok(KnowledgeSource::File),
            other => Err(Error::Config(format!("unknown knowledge source {other:?}"))),
        }
    }
}

/// Hyperparameters of the latent-variable EM fit.
#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub max_rounds: usize,
    /// Stop once the penalized log-likelihood changes by less than this.
    pub tolerance: f64,
    pub inner_steps: usize,
    pub initial_step: f64,
    /// Mean and standard deviation of the Gaussian priors on expertise and
    /// log inverse difficulty.
    pub prior_mean: f64,
    pub prior_std: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_rounds: 50,
            tolerance: 1e-6,
            inner_steps: 25,
            initial_step: 0.1,
            prior_mean: 1.0,
            prior_std: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    pub superpixels: usize,
    pub compactness: f64,
    pub clusters: usize,
    pub theta: f64,
    pub propagation_iters: usize,
    pub generations: usize,
    pub lambda: f64,
    pub alpha_thresholds: Vec<f64>,
    pub logit_clamp: f64,
    pub smoothing: f64,
    pub mode: ExpertiseMode,
    pub knowledge: KnowledgeSource,
    pub seed: u64,
    pub em: EmConfig,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            superpixels: 400,
            compactness: 10.0,
            clusters: 3,
            theta: 0.25,
            propagation_iters: 5,
            generations: 5,
            lambda: 0.1,
            alpha_thresholds: (1..=9).map(|j| j as f64 / 10.0).collect(),
            logit_clamp: 1e-4,
            smoothing: 1e-6,
            mode: ExpertiseMode::Stats,
            knowledge: KnowledgeSource::Boundary,
            seed: 0,
            em: EmConfig::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse {key} = {value:?}")))
}

impl FusionConfig {
    /// Keys accepted by [`FusionConfig::set`], in the order [`FusionConfig::to_kv`] prints them.
    pub const KEYS: [&'static str; 19] = [
        "superpixels",
        "compactness",
        "clusters",
        "theta",
        "propagation_iters",
        "generations",
        "lambda",
        "alpha_thresholds",
        "logit_clamp",
        "smoothing",
        "mode",
        "knowledge",
        "seed",
        "em_max_rounds",
        "em_tolerance",
        "em_inner_steps",
        "em_initial_step",
        "em_prior_mean",
        "em_prior_std",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.trim() {
            "superpixels" => self.superpixels = parse(key, value)?,
            "compactness" => self.compactness = parse(key, value)?,
            "clusters" => self.clusters = parse(key, value)?,
            "theta" => self.theta = parse(key, value)?,
            "propagation_iters" => self.propagation_iters = parse(key, value)?,
            "generations" => self.generations = parse(key, value)?,
            "lambda" => self.lambda = parse(key, value)?,
            "alpha_thresholds" => {
                self.alpha_thresholds = value
                    .split(',')
                    .map(|v| parse(key, v))
                    .collect::<Result<_>>()?
            }
            "logit_clamp" => self.logit_clamp = parse(key, value)?,
            "smoothing" => self.smoothing = parse(key, value)?,
            "mode" => self.mode = value.parse()?,
            "knowledge" => self.knowledge = value.parse()?,
            "seed" => self.seed = parse(key, value)?,
            "em_max_rounds" => self.em.max_rounds = parse(key, value)?,
            "em_tolerance" => self.em.tolerance = parse(key, value)?,
            "em_inner_steps" => self.em.inner_steps = parse(key, value)?,
            "em_initial_step" => self.em.initial_step = parse(key, value)?,
            "em_prior_mean" => self.em.prior_mean = parse(key, value)?,
            "em_prior_std" => self.em.prior_std = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines. Blank lines and `#` comments are ignored.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn to_kv(&self) -> String {
        let thresholds: Vec<String> = self
            .alpha_thresholds
            .iter()
            .map(|t| t.to_string())
            .collect();
        let values = [
            self.superpixels.to_string(),
            self.compactness.to_string(),
            self.clusters.to_string(),
            self.theta.to_string(),
            self.propagation_iters.to_string(),
            self.generations.to_string(),
            self.lambda.to_string(),
            thresholds.join(","),
            self.logit_clamp.to_string(),
            self.smoothing.to_string(),
            self.mode.to_string(),
            self.knowledge.to_string(),
            self.seed.to_string(),
            self.em.max_rounds.to_string(),
            self.em.tolerance.to_string(),
            self.em.inner_steps.to_string(),
            self.em.initial_step.to_string(),
            self.em.prior_mean.to_string(),
            self.em.prior_std.to_string(),
        ];
        Self::KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("compactness", self.compactness),
            ("theta", self.theta),
            ("lambda", self.lambda),
            ("logit_clamp", self.logit_clamp),
            ("smoothing", self.smoothing),
            ("em_tolerance", self.em.tolerance),
            ("em_initial_step", self.em.initial_step),
            ("em_prior_std", self.em.prior_std),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.superpixels < 2 {
            return Err(Error::Config("superpixels must be at least 2".into()));
        }
        if self.clusters == 0 {
            return Err(Error::Config("clusters must be at least 1".into()));
        }
        if self.logit_clamp >= 0.5 {
            return Err(Error::Config("logit_clamp must be below 0.5".into()));
        }
        if self.lambda > 1.0 {
            return Err(Error::Config("lambda must lie in (0, 1]".into()));
        }
        if self.alpha_thresholds.is_empty()
            || self
                .alpha_thresholds
                .iter()
                .any(|t| !(*t > 0.0 && *t <= 1.0))
        {
            return Err(Error::Config(
                "alpha_thresholds must be nonempty values in (0, 1]".into(),
            ));
        }
        if self.em.max_rounds == 0 || self.em.inner_steps == 0 {
            return Err(Error::Config(
                "EM round and step counts must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_kv() {
        let cfg = FusionConfig::default();
        let mut parsed = FusionConfig {
            superpixels: 7,
            mode: ExpertiseMode::Latent,
            ..FusionConfig::default()
        };
        parsed.apply_kv(&cfg.to_kv()).unwrap();
        assert_eq!(parsed, cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn kv_comments_and_errors() {
        let mut cfg = FusionConfig::default();
        cfg.apply_kv("# header\n\ngenerations = 3 # trailing\nmode=latent\n")
            .unwrap();
        assert_eq!(cfg.generations, 3);
        assert_eq!(cfg.mode, ExpertiseMode::Latent);
        assert!(cfg.apply_kv("bogus = 1").is_err());
        assert!(cfg.apply_kv("generations").is_err());
        assert!(cfg.apply_kv("theta = abc").is_err());
    }

    #[test]
    fn validation_rejects_bad_values() {
        for cfg in [
            FusionConfig {
                logit_clamp: 0.5,
                ..FusionConfig::default()
            },
            FusionConfig {
                theta: 0.0,
                ..FusionConfig::default()
            },
            FusionConfig {
                superpixels: 1,
                ..FusionConfig::default()
            },
        ] {
            assert!(cfg.validate().is_err());
        }
    }
}
