//! Image and map file access.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::{GrayImage, RgbImage};

use crate::error::{Error, Result};
use crate::raster::Raster;

fn open(path: &Path) -> Result<image::DynamicImage> {
    if !path.exists() {
        return Err(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        });
    }
    image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads an 8-bit colour image (PNG, JPEG or PNM).
pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    let img = open(path)?.to_rgb8();
    if img.width() == 0 || img.height() == 0 {
        return Err(Error::File {
            path: path.to_path_buf(),
            message: "image has zero size".into(),
        });
    }
    Ok(img)
}

/// Reads a single-channel 8-bit map, mapping value `v` to `v / 255`.
/// Colour files are reduced to luma.
pub fn read_map(path: &Path) -> Result<Raster> {
    let img = open(path)?.to_luma8();
    Raster::from_bytes(img.width() as usize, img.height() as usize, img.as_raw())
        .map_err(|e| e.at_path(path))
}

/// Reads a ground-truth mask: any nonzero value is foreground.
pub fn read_mask(path: &Path) -> Result<Raster> {
    let img = open(path)?.to_luma8();
    let data = img
        .as_raw()
        .iter()
        .map(|&v| if v > 0 { 1.0 } else { 0.0 })
        .collect();
    Raster::new(img.width() as usize, img.height() as usize, data).map_err(|e| e.at_path(path))
}

/// Encodes a raster as an 8-bit grayscale PNG.
pub fn encode_png(map: &Raster) -> Result<Vec<u8>> {
    let img = GrayImage::from_raw(map.width() as u32, map.height() as u32, map.to_bytes())
        .expect("raster buffer matches its dimensions");
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)
        .map_err(|e| Error::Input(format!("PNG encoding failed: {e}")))?;
    Ok(buf.into_inner())
}

/// Collects output files in memory and moves them into place only on
/// [`OutputSet::commit`], each via a temporary file and a rename.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, path: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.push((path.into(), bytes));
    }

    pub fn add_png(&mut self, path: impl Into<PathBuf>, map: &Raster) -> Result<()> {
        let bytes = encode_png(map)?;
        self.add(path, bytes);
        Ok(())
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn extend(&mut self, other: OutputSet) {
        self.files.extend(other.files);
    }

    pub fn commit(self) -> Result<()> {
        let io_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| Error::Io { path, source }
        };
        let mut staged = Vec::with_capacity(self.files.len());
        for (path, bytes) in &self.files {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(io_err(dir))?;
            }
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy())
                .unwrap_or_default();
            let tmp = path.with_file_name(format!(".{name}.tmp"));
            let write = || -> std::io::Result<()> {
                let mut f = fs::File::create(&tmp)?;
                f.write_all(bytes)?;
                f.sync_all()
            };
            if let Err(e) = write() {
                for t in &staged {
                    let _ = fs::remove_file(t);
                }
                let _ = fs::remove_file(&tmp);
                return Err(Error::Io {
                    path: tmp,
                    source: e,
                });
            }
            staged.push(tmp);
        }
        for (tmp, (path, _)) in staged.iter().zip(&self.files) {
            fs::rename(tmp, path).map_err(io_err(path))?;
        }
        Ok(())
    }
}
