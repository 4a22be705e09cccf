//! Benchmark directory walking.
//!
//! ```text
//! <root>/images/<id>.(png|jpg|jpeg)
//! <root>/maps/<model>/<id>.png
//! <root>/gt/<id>.png            optional
//! <root>/knowledge/<id>.png     optional
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};

use crate::manifest::RunManifest;

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Debug, Clone)]
pub struct Dataset {
    pub models: Vec<String>,
    pub entries: Vec<RunManifest>,
    pub has_gt: bool,
}

fn sorted_dir(path: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(path)
        .with_context(|| format!("{}: cannot list directory", path.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()
        .with_context(|| format!("{}: cannot list directory", path.display()))?;
    entries.sort();
    Ok(entries)
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Lists images and models in sorted order and resolves every per-image
/// path. Missing per-image files surface later in [`RunManifest::validate`].
pub fn scan(root: &Path, want_knowledge: bool) -> Result<Dataset> {
    let images_dir = root.join("images");
    let mut images = Vec::new();
    for path in sorted_dir(&images_dir)? {
        let ext = path
            .extension()
            .map(|e| e.to_string_lossy().to_ascii_lowercase());
        if path.is_file() && ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            ensure!(
                images
                    .iter()
                    .all(|(other, _): &(String, PathBuf)| *other != id),
                "{}: more than one image with id {id:?}",
                images_dir.display()
            );
            images.push((id, path));
        }
    }
    ensure!(
        !images.is_empty(),
        "{}: no matching images",
        images_dir.display()
    );

    let models: Vec<String> = sorted_dir(&root.join("maps"))?
        .into_iter()
        .filter(|p| p.is_dir())
        .map(|p| file_name(&p))
        .collect();
    ensure!(
        !models.is_empty(),
        "{}: no candidate model directories",
        root.join("maps").display()
    );

    let gt_dir = root.join("gt");
    let has_gt = gt_dir.is_dir();
    let entries = images
        .into_iter()
        .map(|(id, image)| RunManifest {
            maps: models
                .iter()
                .map(|m| {
                    (
                        m.clone(),
                        root.join("maps").join(m).join(format!("{id}.png")),
                    )
                })
                .collect(),
            gt: has_gt.then(|| gt_dir.join(format!("{id}.png"))),
            knowledge: want_knowledge.then(|| root.join("knowledge").join(format!("{id}.png"))),
            overrides: Vec::new(),
            image,
            id,
        })
        .collect();
    Ok(Dataset {
        models,
        entries,
        has_gt,
    })
}
