//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use arbitrator::eval::{self, ImageResult, MethodScore};
use arbitrator::io::{read_map, read_mask, read_rgb, OutputSet};
use arbitrator::pipeline::{difficulty_csv, expertise_csv, prepare, trace_csv, PreparedImage};
use arbitrator::{ExpertiseMode, FusionConfig, KnowledgeSource, Raster};
use clap::ValueEnum;
use image::RgbImage;
use rayon::prelude::*;

use crate::dataset;
use crate::manifest::RunManifest;

/// Configuration layers shared by every subcommand: defaults, then the
/// config file, then manifest overrides, then command-line flags.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub base: FusionConfig,
    pub flags: Vec<(String, String)>,
    pub jobs: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl Settings {
    pub fn resolve(&self, manifest: Option<&RunManifest>) -> Result<FusionConfig> {
        let mut config = self.base.clone();
        if let Some(m) = manifest {
            m.apply_overrides(&mut config)?;
        }
        for (k, v) in &self.flags {
            config.set(k, v)?;
        }
        config.validate()?;
        Ok(config)
    }

    fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs.unwrap_or(0))
            .build()
            .context("cannot start worker pool")
    }
}

struct Inputs {
    image: RgbImage,
    maps: Vec<Raster>,
    gt: Option<Raster>,
    knowledge: Option<Raster>,
}

fn check_size(path: &Path, map: &Raster, image: &RgbImage) -> Result<()> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    ensure!(
        map.width() == w && map.height() == h,
        "{}: size {}x{} does not match image size {w}x{h}",
        path.display(),
        map.width(),
        map.height()
    );
    Ok(())
}

fn load(manifest: &RunManifest, config: &FusionConfig) -> Result<Inputs> {
    let image = read_rgb(&manifest.image)?;
    let mut maps = Vec::with_capacity(manifest.maps.len());
    for (_, path) in &manifest.maps {
        let map = read_map(path)?;
        check_size(path, &map, &image)?;
        maps.push(map);
    }
    let gt = match &manifest.gt {
        Some(path) => {
            let gt = read_mask(path)?;
            check_size(path, &gt, &image)?;
            Some(gt)
        }
        None => None,
    };
    let knowledge = match (&manifest.knowledge, config.knowledge) {
        (Some(path), KnowledgeSource::File) => {
            let k = read_map(path)?;
            check_size(path, &k, &image)?;
            Some(k)
        }
        (None, KnowledgeSource::File) => bail!(
            "{}: knowledge source is file but no knowledge map is given",
            manifest.id
        ),
        _ => None,
    };
    Ok(Inputs {
        image,
        maps,
        gt,
        knowledge,
    })
}

fn prepare_inputs(
    manifest: &RunManifest,
    config: &FusionConfig,
) -> Result<(Inputs, PreparedImage)> {
    let inputs = load(manifest, config)?;
    let prepared = prepare(
        &inputs.image,
        &inputs.maps,
        inputs.knowledge.as_ref(),
        config,
    )
    .with_context(|| format!("{}: fusion failed", manifest.id))?;
    Ok((inputs, prepared))
}

/// Runs `f` over `items` on the worker pool and returns results in input
/// order; the first failure in input order wins.
fn run_parallel<T, R, F>(settings: &Settings, items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    let pool = settings.pool()?;
    pool.install(|| items.par_iter().map(&f).collect::<Vec<_>>())
        .into_iter()
        .collect()
}

fn fuse_outputs(
    manifest: &RunManifest,
    config: &FusionConfig,
    out: &Path,
    dump: bool,
) -> Result<OutputSet> {
    let (_, prepared) = prepare_inputs(manifest, config)?;
    let fused = prepared.fuse(config)?;
    let id = &manifest.id;
    let models = manifest.models();
    let mut files = OutputSet::new();
    files.add_png(out.join(format!("{id}.png")), &fused.saliency)?;
    let last = fused
        .outcome
        .history
        .last()
        .expect("history includes generation 0");
    files.add(
        out.join(format!("{id}_expertise.csv")),
        expertise_csv(&models, &last.expertise).into_bytes(),
    );
    if let Some(fit) = &last.expertise.latent {
        files.add(
            out.join(format!("{id}_difficulty.csv")),
            difficulty_csv(fit).into_bytes(),
        );
    }
    if dump {
        let dir = out.join(id);
        for record in &fused.outcome.history {
            let t = record.generation;
            files.add_png(
                dir.join(format!("reference_{t}.png")),
                &prepared.reference_raster(&record.reference)?,
            )?;
            files.add(
                dir.join(format!("expertise_{t}.csv")),
                expertise_csv(&models, &record.expertise).into_bytes(),
            );
        }
    }
    Ok(files)
}

fn load_manifests(paths: &[PathBuf]) -> Result<Vec<RunManifest>> {
    let manifests = paths
        .iter()
        .map(|p| RunManifest::load(p))
        .collect::<Result<Vec<_>>>()?;
    for (i, m) in manifests.iter().enumerate() {
        ensure!(
            manifests[..i].iter().all(|o| o.id != m.id),
            "duplicate output id {:?}",
            m.id
        );
        m.validate()?;
    }
    Ok(manifests)
}

pub fn fuse(settings: &Settings, manifests: &[PathBuf], dump: bool) -> Result<()> {
    let manifests = load_manifests(manifests)?;
    let out = settings.out_dir();
    let sets = run_parallel(settings, &manifests, |m| {
        let config = settings.resolve(Some(m))?;
        fuse_outputs(m, &config, &out, dump)
    })?;
    let mut all = OutputSet::new();
    for set in sets {
        all.extend(set);
    }
    let n = all.len();
    all.commit()?;
    log::info!("wrote {n} files to {}", out.display());
    Ok(())
}

pub fn trace(settings: &Settings, manifest: &Path) -> Result<()> {
    let manifest = load_manifests(&[manifest.to_path_buf()])?.remove(0);
    let config = settings.resolve(Some(&manifest))?;
    let (_, prepared) = prepare_inputs(&manifest, &config)?;
    let fused = prepared.fuse(&config)?;
    let csv = trace_csv(&fused.outcome.trace);
    if let Some(dir) = &settings.out_dir {
        let mut files = OutputSet::new();
        files.add(
            dir.join(format!("{}_trace.csv", manifest.id)),
            csv.clone().into_bytes(),
        );
        files.commit()?;
    }
    print!("{csv}");
    let summary = eval::convergence_trace(&fused.outcome.trace, eval::CONVERGENCE_TOLERANCE);
    log::info!("converged: {}", summary.converged);
    Ok(())
}

pub fn defaults(settings: &Settings) -> Result<()> {
    print!("{}", settings.resolve(None)?.to_kv());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    AmStats,
    AmLatent,
    Ave,
    /// Every raw candidate map, under its model id.
    Candidates,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::AmStats => "am-stats",
            Method::AmLatent => "am-latent",
            Method::Ave => "ave",
            Method::Candidates => "candidates",
        }
    }
}

struct Evaluated {
    files: OutputSet,
    result: Option<ImageResult>,
    traces: Vec<(String, Vec<f64>)>,
}

fn evaluate_one(
    manifest: &RunManifest,
    config: &FusionConfig,
    methods: &[Method],
    out: &Path,
) -> Result<Evaluated> {
    let (inputs, prepared) = prepare_inputs(manifest, config)?;
    let id = &manifest.id;
    let mut files = OutputSet::new();
    let mut maps: Vec<(String, Raster, Option<f64>)> = Vec::new();
    let mut traces = Vec::new();
    for &method in methods {
        match method {
            Method::AmStats | Method::AmLatent => {
                let mode = if method == Method::AmStats {
                    ExpertiseMode::Stats
                } else {
                    ExpertiseMode::Latent
                };
                let config = FusionConfig {
                    mode,
                    ..config.clone()
                };
                let fused = prepared.fuse(&config)?;
                files.add_png(
                    out.join(method.name()).join(format!("{id}.png")),
                    &fused.saliency,
                )?;
                traces.push((method.name().to_string(), fused.outcome.trace.clone()));
                maps.push((
                    method.name().to_string(),
                    fused.saliency,
                    fused.outcome.trace.last().copied(),
                ));
            }
            Method::Ave => {
                let ave = prepared.average()?;
                files.add_png(out.join(method.name()).join(format!("{id}.png")), &ave)?;
                maps.push((method.name().to_string(), ave, None));
            }
            Method::Candidates => {
                for ((model, _), map) in manifest.maps.iter().zip(&inputs.maps) {
                    maps.push((model.clone(), map.clone(), None));
                }
            }
        }
    }
    let result = match &inputs.gt {
        None => None,
        Some(gt) => {
            let mut scores = Vec::with_capacity(maps.len());
            let mut skipped = false;
            for (method, sal, final_change) in maps {
                match eval::f_measure(&sal, gt, eval::BETA_SQUARED)? {
                    None => skipped = true,
                    Some(f_measure) => scores.push(MethodScore {
                        method,
                        f_measure,
                        mae: eval::mae(&sal, gt)?,
                        final_change,
                    }),
                }
            }
            Some(ImageResult {
                image: id.clone(),
                scores: (!skipped).then_some(scores),
            })
        }
    };
    Ok(Evaluated {
        files,
        result,
        traces,
    })
}

fn convergence_csv(rows: &[(String, String, Vec<f64>)]) -> String {
    let mut out = String::from("image,method,generation,mean_abs_change\n");
    for (image, method, trace) in rows {
        for (t, v) in trace.iter().enumerate() {
            writeln!(out, "{image},{method},{},{v:.9}", t + 1).unwrap();
        }
    }
    out
}

pub fn evaluate(settings: &Settings, root: &Path, methods: &[Method]) -> Result<()> {
    ensure!(!methods.is_empty(), "no methods requested");
    let mut methods = methods.to_vec();
    let mut seen = Vec::new();
    methods.retain(|m| {
        let fresh = !seen.contains(m);
        seen.push(*m);
        fresh
    });
    let config = settings.resolve(None)?;
    let data = dataset::scan(root, config.knowledge == KnowledgeSource::File)?;
    if methods.contains(&Method::Candidates) {
        for model in &data.models {
            let clash = [Method::AmStats, Method::AmLatent, Method::Ave]
                .iter()
                .any(|m| m.name() == model);
            ensure!(
                !clash,
                "model directory {model:?} collides with a method name"
            );
        }
    }
    for entry in &data.entries {
        entry.validate()?;
    }
    if !data.has_gt {
        log::warn!(
            "{}: no gt directory; writing fused maps without metrics",
            root.display()
        );
    }
    let out = settings.out_dir();
    let evaluated = run_parallel(settings, &data.entries, |m| {
        evaluate_one(m, &config, &methods, &out)
    })?;

    let mut files = OutputSet::new();
    let mut results = Vec::new();
    let mut traces = Vec::new();
    for (entry, e) in data.entries.iter().zip(evaluated) {
        files.extend(e.files);
        results.extend(e.result);
        traces.extend(e.traces.into_iter().map(|(m, t)| (entry.id.clone(), m, t)));
    }
    if !traces.is_empty() {
        files.add(
            out.join("convergence.csv"),
            convergence_csv(&traces).into_bytes(),
        );
    }
    let report = if data.has_gt {
        let report = eval::report(&results)?;
        files.add(out.join("report.csv"), report.to_csv().into_bytes());
        Some(report)
    } else {
        None
    };
    files.commit()?;

    if let Some(report) = report {
        for s in &report.summaries {
            let mut line = format!(
                "{:<12} F={:.4} MAE={:.4} images={}",
                s.method, s.mean_f_measure, s.mean_mae, s.images
            );
            if s.traced > 0 {
                write!(line, " converged={}/{}", s.converged, s.traced).unwrap();
            }
            println!("{line}");
        }
        if !report.skipped.is_empty() {
            log::warn!(
                "skipped {} image(s) with empty ground truth: {}",
                report.skipped.len(),
                report.skipped.join(", ")
            );
        }
    }
    Ok(())
}
