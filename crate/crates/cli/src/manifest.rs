//! Per-image run manifests.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use arbitrator::FusionConfig;

/// One image with its candidate maps, parsed from `key = value` lines.
///
/// Recognised keys are `image`, `map.<model>`, `gt`, `knowledge` and `id`;
/// anything else is forwarded to the fusion configuration. Relative paths
/// resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub id: String,
    pub image: PathBuf,
    pub maps: Vec<(String, PathBuf)>,
    pub gt: Option<PathBuf>,
    pub knowledge: Option<PathBuf>,
    pub overrides: Vec<(String, String)>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("{}: cannot read manifest", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::parse(&text, base, &stem)
            .with_context(|| format!("{}: invalid manifest", path.display()))
    }

    pub fn parse(text: &str, base: &Path, default_id: &str) -> Result<Self> {
        let mut id = None;
        let mut image = None;
        let mut maps: Vec<(String, PathBuf)> = Vec::new();
        let mut gt = None;
        let mut knowledge = None;
        let mut overrides = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected key = value", lineno + 1);
            };
            let (key, value) = (key.trim(), value.trim());
            ensure!(
                !value.is_empty(),
                "line {}: empty value for {key}",
                lineno + 1
            );
            let resolve = || base.join(value);
            match key {
                "id" => id = Some(value.to_string()),
                "image" => image = Some(resolve()),
                "gt" => gt = Some(resolve()),
                "knowledge" => knowledge = Some(resolve()),
                _ => match key.strip_prefix("map.") {
                    Some(model) => {
                        ensure!(!model.is_empty(), "line {}: empty model id", lineno + 1);
                        ensure!(
                            maps.iter().all(|(m, _)| m != model),
                            "duplicate model {model:?}"
                        );
                        maps.push((model.to_string(), resolve()));
                    }
                    None => {
                        ensure!(
                            FusionConfig::KEYS.contains(&key),
                            "line {}: unknown key {key:?}",
                            lineno + 1
                        );
                        overrides.push((key.to_string(), value.to_string()));
                    }
                },
            }
        }
        let image = image.context("missing `image`")?;
        ensure!(
            !maps.is_empty(),
            "at least one `map.<model>` entry is required"
        );
        Ok(Self {
            id: id.unwrap_or_else(|| default_id.to_string()),
            image,
            maps,
            gt,
            knowledge,
            overrides,
        })
    }

    /// Every referenced file must exist before any work starts.
    pub fn validate(&self) -> Result<()> {
        let files = std::iter::once(&self.image)
            .chain(self.maps.iter().map(|(_, p)| p))
            .chain(&self.gt)
            .chain(&self.knowledge);
        for path in files {
            ensure!(path.is_file(), "{}: file not found", path.display());
        }
        Ok(())
    }

    pub fn apply_overrides(&self, config: &mut FusionConfig) -> Result<()> {
        for (k, v) in &self.overrides {
            config.set(k, v)?;
        }
        Ok(())
    }

    pub fn models(&self) -> Vec<String> {
        self.maps.iter().map(|(m, _)| m.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_paths_relative_to_base() {
        let text = "image = a.png\nmap.rc = maps/rc.png # comment\nmap.ft = ft.png\ngt=g.png\ngenerations = 2\n";
        let m = RunManifest::parse(text, Path::new("/data"), "a").unwrap();
        assert_eq!(m.id, "a");
        assert_eq!(m.image, PathBuf::from("/data/a.png"));
        assert_eq!(m.models(), vec!["rc", "ft"]);
        assert_eq!(m.gt, Some(PathBuf::from("/data/g.png")));
        assert_eq!(m.overrides, vec![("generations".into(), "2".into())]);
        let mut config = FusionConfig::default();
        m.apply_overrides(&mut config).unwrap();
        assert_eq!(config.generations, 2);
    }

    #[test]
    fn rejects_bad_manifests() {
        let base = Path::new(".");
        assert!(RunManifest::parse("map.a = x.png", base, "x").is_err());
        assert!(RunManifest::parse("image = i.png", base, "x").is_err());
        assert!(RunManifest::parse("image = i.png\nmap.a = x\nmap.a = y", base, "x").is_err());
        assert!(RunManifest::parse("image = i.png\nmap.a = x\nbogus = 1", base, "x").is_err());
        assert!(RunManifest::parse("image i.png", base, "x").is_err());
    }
}
