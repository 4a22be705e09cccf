//! Procedural scenes: a coloured blob on a textured background, its mask,
//! and noisy candidate maps.

#![allow(dead_code)]

use std::fs;
use std::path::Path;

use arbitrator::Raster;
use image::{GrayImage, Luma, Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Scene {
    pub image: RgbImage,
    pub gt: Raster,
    pub candidates: Vec<Raster>,
}

pub struct Ellipse {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
}

impl Ellipse {
    fn contains(&self, x: usize, y: usize) -> bool {
        let dx = (x as f64 + 0.5 - self.cx) / self.rx;
        let dy = (y as f64 + 0.5 - self.cy) / self.ry;
        dx * dx + dy * dy <= 1.0
    }
}

fn noise(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    // Sum of uniforms, close enough to Gaussian for texture.
    (0..4).map(|_| rng.random::<f64>() - 0.5).sum::<f64>() * sd * 3f64.sqrt()
}

fn jitter(rng: &mut ChaCha8Rng, c: [f64; 3], sd: f64) -> Rgb<u8> {
    Rgb(c.map(|v| (v + noise(rng, sd)).round().clamp(0.0, 255.0) as u8))
}

fn palette(rng: &mut ChaCha8Rng) -> ([f64; 3], [f64; 3]) {
    let fg = [
        200.0 + 40.0 * rng.random::<f64>(),
        40.0 + 60.0 * rng.random::<f64>(),
        40.0 + 40.0 * rng.random::<f64>(),
    ];
    let bg = [
        40.0 + 50.0 * rng.random::<f64>(),
        90.0 + 60.0 * rng.random::<f64>(),
        140.0 + 60.0 * rng.random::<f64>(),
    ];
    (fg, bg)
}

fn random_blob(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Ellipse {
    Ellipse {
        cx: w as f64 * (0.4 + 0.2 * rng.random::<f64>()),
        cy: h as f64 * (0.4 + 0.2 * rng.random::<f64>()),
        rx: w as f64 * (0.15 + 0.1 * rng.random::<f64>()),
        ry: h as f64 * (0.15 + 0.1 * rng.random::<f64>()),
    }
}

fn mask_of(w: usize, h: usize, inside: impl Fn(usize, usize) -> bool) -> Raster {
    Raster::from_fn(w, h, |x, y| if inside(x, y) { 1.0 } else { 0.0 }).unwrap()
}

/// Candidate with foreground level `hi`, background level `lo` and per-pixel
/// noise, clamped to `[0, 1]`.
fn noisy_candidate(rng: &mut ChaCha8Rng, gt: &Raster, hi: f64, lo: f64, sd: f64) -> Raster {
    Raster::from_fn(gt.width(), gt.height(), |x, y| {
        let base = if gt.get(x, y) > 0.5 { hi } else { lo };
        (base + noise(rng, sd)).clamp(0.0, 1.0)
    })
    .unwrap()
}

/// One blob scene with `p` candidates of mixed quality.
pub fn blob_scene(seed: u64, w: usize, h: usize, p: usize) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (fg, bg) = palette(&mut rng);
    let blob = random_blob(&mut rng, w, h);
    let image = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let c = if blob.contains(x as usize, y as usize) {
            fg
        } else {
            bg
        };
        jitter(&mut rng, c, 12.0)
    });
    let gt = mask_of(w, h, |x, y| blob.contains(x, y));
    let candidates = (0..p)
        .map(|_| {
            let hi = 0.55 + 0.4 * rng.random::<f64>();
            let lo = 0.05 + 0.3 * rng.random::<f64>();
            noisy_candidate(&mut rng, &gt, hi, lo, 0.15)
        })
        .collect();
    Scene {
        image,
        gt,
        candidates,
    }
}

/// Large blob with three candidates. Two of them miss whatever part of the
/// object falls in a fixed image region (the left 45% of the columns); the
/// object's colour stays distinct from the border, so the boundary prior
/// still marks it salient.
pub fn missing_part_scene(seed: u64, w: usize, h: usize) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (fg, bg) = palette(&mut rng);
    let blob = Ellipse {
        cx: w as f64 * (0.45 + 0.1 * rng.random::<f64>()),
        cy: h as f64 * (0.45 + 0.1 * rng.random::<f64>()),
        rx: w as f64 * (0.25 + 0.06 * rng.random::<f64>()),
        ry: h as f64 * (0.29 + 0.06 * rng.random::<f64>()),
    };
    let region = |x: usize| x * 100 < w * 45;
    corrupted(
        &mut rng,
        w,
        h,
        fg,
        bg,
        &blob,
        |x, y| blob.contains(x, y) && region(x),
        0.05,
    )
}

/// Like [`missing_part_scene`] but the two corrupted candidates fire on a
/// fixed background patch instead, so the wrong majority is a false
/// positive in a border-coloured region.
pub fn false_patch_scene(seed: u64, w: usize, h: usize) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (fg, bg) = palette(&mut rng);
    let blob = Ellipse {
        cx: w as f64 * (0.6 + 0.05 * rng.random::<f64>()),
        cy: h as f64 * (0.45 + 0.1 * rng.random::<f64>()),
        rx: w as f64 * (0.2 + 0.05 * rng.random::<f64>()),
        ry: h as f64 * (0.25 + 0.06 * rng.random::<f64>()),
    };
    let patch =
        |x: usize, y: usize| (w / 10..w / 4).contains(&x) && (h / 5..4 * h / 5).contains(&y);
    corrupted(&mut rng, w, h, fg, bg, &blob, patch, 0.95)
}

#[allow(clippy::too_many_arguments)]
fn corrupted(
    rng: &mut ChaCha8Rng,
    w: usize,
    h: usize,
    fg: [f64; 3],
    bg: [f64; 3],
    blob: &Ellipse,
    region: impl Fn(usize, usize) -> bool,
    level: f64,
) -> Scene {
    let image = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let c = if blob.contains(x as usize, y as usize) {
            fg
        } else {
            bg
        };
        jitter(rng, c, 12.0)
    });
    let gt = mask_of(w, h, |x, y| blob.contains(x, y));
    let candidates = (0..3)
        .map(|p| {
            let clean = noisy_candidate(rng, &gt, 0.8, 0.15, 0.12);
            if p == 0 {
                return clean;
            }
            Raster::from_fn(w, h, |x, y| {
                if region(x, y) {
                    (level + noise(rng, 0.05)).clamp(0.0, 1.0)
                } else {
                    clean.get(x, y)
                }
            })
            .unwrap()
        })
        .collect();
    Scene {
        image,
        gt,
        candidates,
    }
}

pub fn to_gray(map: &Raster) -> GrayImage {
    GrayImage::from_fn(map.width() as u32, map.height() as u32, |x, y| {
        Luma([(map.get(x as usize, y as usize) * 255.0).round() as u8])
    })
}

pub fn model_name(p: usize) -> String {
    format!("m{p}")
}

/// Writes scenes in the dataset layout the `evaluate` subcommand reads.
pub fn write_dataset(root: &Path, scenes: &[Scene], with_gt: bool) {
    fs::create_dir_all(root.join("images")).unwrap();
    if with_gt {
        fs::create_dir_all(root.join("gt")).unwrap();
    }
    for (i, scene) in scenes.iter().enumerate() {
        let id = format!("img{i:03}");
        scene
            .image
            .save(root.join("images").join(format!("{id}.png")))
            .unwrap();
        if with_gt {
            to_gray(&scene.gt)
                .save(root.join("gt").join(format!("{id}.png")))
                .unwrap();
        }
        for (p, map) in scene.candidates.iter().enumerate() {
            let dir = root.join("maps").join(model_name(p));
            fs::create_dir_all(&dir).unwrap();
            to_gray(map).save(dir.join(format!("{id}.png"))).unwrap();
        }
    }
}

/// Writes one scene plus a run manifest; returns the manifest path.
pub fn write_manifest(dir: &Path, scene: &Scene, extra: &str) -> std::path::PathBuf {
    fs::create_dir_all(dir).unwrap();
    scene.image.save(dir.join("image.png")).unwrap();
    let mut text = String::from("image = image.png\n");
    for (p, map) in scene.candidates.iter().enumerate() {
        let name = format!("{}.png", model_name(p));
        to_gray(map).save(dir.join(&name)).unwrap();
        text.push_str(&format!("map.{} = {name}\n", model_name(p)));
    }
    text.push_str(extra);
    let path = dir.join("scene.txt");
    fs::write(&path, text).unwrap();
    path
}
