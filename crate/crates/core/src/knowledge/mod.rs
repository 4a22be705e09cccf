//! Reference map generation: external knowledge, majority vote, consensus
//! and geodesic propagation.

mod graph;
mod kmeans;

use std::path::Path;

pub use graph::{build_affinity, propagate, propagate_raw, AffinityGraph};

use crate::config::{FusionConfig, KnowledgeSource};
use crate::error::{check_len, Error, Result};
use crate::preprocess::{pool, SuperpixelGrid};
use crate::raster::{min_max_normalize, Raster};

/// The maps feeding the initial reference.
#[derive(Debug, Clone)]
pub struct KnowledgeBundle {
    pub source: KnowledgeSource,
    pub external: Vec<f64>,
    pub majority: Vec<f64>,
    pub consensus: Vec<f64>,
    pub reference: Vec<f64>,
}

impl KnowledgeBundle {
    pub fn len(&self) -> usize {
        self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty()
    }
}

/// Boundary-prior saliency: each superpixel's colour contrast against the
/// nearest cluster of image-border superpixels, min-max normalized.
///
/// The border superpixels are grouped by k-means (k-means++ seeded from
/// `seed`); a superpixel's raw score is the smallest, over clusters, of its
/// mean Lab distance to the cluster members. `k` is reduced to the number
/// of border superpixels when there are fewer.
pub fn boundary_knowledge(grid: &SuperpixelGrid, k: usize, seed: u64) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::Config("cluster count must be at least 1".into()));
    }
    let seeds: Vec<usize> = (0..grid.len()).filter(|&n| grid.boundary()[n]).collect();
    if seeds.is_empty() {
        return Err(Error::Input("grid has no boundary superpixels".into()));
    }
    let k = k.min(seeds.len());
    let features: Vec<[f64; 3]> = seeds.iter().map(|&n| grid.features()[n]).collect();
    let assignment = kmeans::kmeans(&features, k, seed);
    let clusters: Vec<Vec<usize>> = (0..k)
        .map(|c| {
            seeds
                .iter()
                .zip(&assignment)
                .filter(|(_, &a)| a == c)
                .map(|(&n, _)| n)
                .collect()
        })
        .filter(|members: &Vec<usize>| !members.is_empty())
        .collect();

    let raw: Vec<f64> = (0..grid.len())
        .map(|n| {
            clusters
                .iter()
                .map(|members| {
                    members
                        .iter()
                        .map(|&b| grid.color_distance(n, b))
                        .sum::<f64>()
                        / members.len() as f64
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(min_max_normalize(&raw))
}

/// Pools a precomputed knowledge map onto the grid and min-max normalizes it.
pub fn external_from_raster(map: &Raster, grid: &SuperpixelGrid) -> Result<Vec<f64>> {
    Ok(min_max_normalize(&pool(map, grid)?))
}

/// Loads a single-channel 8-bit knowledge map (value `v` read as `v / 255`).
pub fn load_external_map(path: &Path, grid: &SuperpixelGrid) -> Result<Vec<f64>> {
    let map = crate::io::read_map(path)?;
    external_from_raster(&map, grid).map_err(|e| e.at_path(path))
}

/// 1 where strictly more than half of the binary maps vote foreground.
pub fn majority_vote(binary: &[Vec<bool>]) -> Result<Vec<f64>> {
    let first = binary
        .first()
        .ok_or_else(|| Error::Input("majority vote needs at least one map".into()))?;
    for map in binary {
        check_len(first.len(), map.len())?;
    }
    let p = binary.len();
    Ok((0..first.len())
        .map(|n| {
            let votes = binary.iter().filter(|m| m[n]).count();
            if 2 * votes > p {
                1.0
            } else {
                0.0
            }
        })
        .collect())
}

/// Elementwise product of the external knowledge and majority maps.
pub fn consensus(external: &[f64], majority: &[f64]) -> Result<Vec<f64>> {
    check_len(external.len(), majority.len())?;
    Ok(external.iter().zip(majority).map(|(e, m)| e * m).collect())
}

/// Runs majority vote, consensus and propagation on top of a given
/// external knowledge map.
pub fn build_knowledge(
    grid: &SuperpixelGrid,
    binary: &[Vec<bool>],
    external: Vec<f64>,
    source: KnowledgeSource,
    config: &FusionConfig,
) -> Result<KnowledgeBundle> {
    check_len(grid.len(), external.len())?;
    let majority = majority_vote(binary)?;
    check_len(grid.len(), majority.len())?;
    let consensus = consensus(&external, &majority)?;
    let graph = build_affinity(grid, config.theta);
    let reference = propagate(&consensus, &graph, config.propagation_iters)?;
    Ok(KnowledgeBundle {
        source,
        external,
        majority,
        consensus,
        reference,
    })
}
