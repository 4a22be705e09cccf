//! Per-image orchestration from decoded inputs to fused maps.

use std::fmt::Write;

use image::RgbImage;

use crate::config::{FusionConfig, KnowledgeSource};
use crate::error::{Error, Result};
use crate::expertise::{Expertise, LatentFit};
use crate::fusion::{average_baseline, run_fusion, CandidateStack, FusionOutcome};
use crate::knowledge::{
    boundary_knowledge, build_knowledge, external_from_raster, KnowledgeBundle,
};
use crate::preprocess::{pool, slic_segment, to_lab, unpool, SuperpixelGrid};
use crate::raster::Raster;

/// Superpixels, pooled candidates and the initial reference of one image.
#[derive(Debug, Clone)]
pub struct PreparedImage {
    pub grid: SuperpixelGrid,
    pub stack: CandidateStack,
    pub knowledge: KnowledgeBundle,
}

/// Segments the image, pools the candidate maps and builds the knowledge
/// bundle. `external` is required when the configuration asks for a
/// file-supplied knowledge map.
pub fn prepare(
    image: &RgbImage,
    candidates: &[Raster],
    external: Option<&Raster>,
    config: &FusionConfig,
) -> Result<PreparedImage> {
    config.validate()?;
    if candidates.is_empty() {
        return Err(Error::Input(
            "at least one candidate map is required".into(),
        ));
    }
    let lab = to_lab(image)?;
    let n_pixels = lab.width() * lab.height();
    let grid = slic_segment(&lab, config.superpixels.min(n_pixels), config.compactness)?;
    let maps = candidates
        .iter()
        .map(|c| pool(c, &grid))
        .collect::<Result<Vec<_>>>()?;
    let stack = CandidateStack::new(maps)?;
    let external = match config.knowledge {
        KnowledgeSource::Boundary => boundary_knowledge(&grid, config.clusters, config.seed)?,
        KnowledgeSource::File => {
            let map = external.ok_or_else(|| {
                Error::Config("knowledge source is file but no knowledge map was given".into())
            })?;
            external_from_raster(map, &grid)?
        }
    };
    let knowledge = build_knowledge(&grid, stack.binary(), external, config.knowledge, config)?;
    Ok(PreparedImage {
        grid,
        stack,
        knowledge,
    })
}

#[derive(Debug, Clone)]
pub struct FusedImage {
    pub outcome: FusionOutcome,
    /// The fused map painted back onto pixels.
    pub saliency: Raster,
}

impl PreparedImage {
    /// Runs the automaton with `config`'s expertise mode and generation count.
    pub fn fuse(&self, config: &FusionConfig) -> Result<FusedImage> {
        let outcome = run_fusion(self.stack.clone(), &self.knowledge, config)?;
        let saliency = unpool(&outcome.final_map, &self.grid)?;
        Ok(FusedImage { outcome, saliency })
    }

    /// The averaging baseline painted onto pixels.
    pub fn average(&self) -> Result<Raster> {
        unpool(&average_baseline(&self.stack), &self.grid)
    }

    pub fn reference_raster(&self, values: &[f64]) -> Result<Raster> {
        unpool(values, &self.grid)
    }
}

/// Full per-image run: prepare then fuse.
pub fn fuse_image(
    image: &RgbImage,
    candidates: &[Raster],
    external: Option<&Raster>,
    config: &FusionConfig,
) -> Result<(PreparedImage, FusedImage)> {
    let prepared = prepare(image, candidates, external, config)?;
    let fused = prepared.fuse(config)?;
    Ok((prepared, fused))
}

/// `model,alpha,beta` rows.
pub fn expertise_csv(models: &[String], expertise: &Expertise) -> String {
    let mut out = String::from("model,alpha,beta\n");
    for ((m, a), b) in models.iter().zip(&expertise.alpha).zip(&expertise.beta) {
        writeln!(out, "{m},{a:.9},{b:.9}").unwrap();
    }
    out
}

/// `superpixel,pi,posterior` rows of a latent fit.
pub fn difficulty_csv(fit: &LatentFit) -> String {
    let mut out = String::from("superpixel,pi,posterior\n");
    for (n, (pi, q)) in fit.difficulty.iter().zip(&fit.posterior).enumerate() {
        writeln!(out, "{n},{pi:.9},{q:.9}").unwrap();
    }
    out
}

/// `generation,mean_abs_change` rows.
pub fn trace_csv(trace: &[f64]) -> String {
    let mut out = String::from("generation,mean_abs_change\n");
    for (t, v) in trace.iter().enumerate() {
        writeln!(out, "{},{v:.9}", t + 1).unwrap();
    }
    out
}
