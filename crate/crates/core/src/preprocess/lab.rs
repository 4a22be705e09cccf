use image::RgbImage;

use crate::error::{Error, Result};

// D65 reference white.
const WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];
const EPSILON: f64 = 216.0 / 24389.0;
const KAPPA: f64 = 24389.0 / 27.0;

/// Per-pixel CIELab with each channel rescaled to `[0, 1]`:
/// `L / 100`, `(a + 128) / 255`, `(b + 128) / 255`.
#[derive(Debug, Clone)]
pub struct LabImage {
    width: usize,
    height: usize,
    pixels: Vec<[f64; 3]>,
}

impl LabImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[f64; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Input("image dimensions must be nonzero".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::Length {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        if pixels.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::Input("Lab channels must lie in [0, 1]".into()));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }
}

fn linearize(c: u8) -> f64 {
    let c = f64::from(c) / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    if t > EPSILON {
        t.cbrt()
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

/// sRGB (D65) to unscaled CIELab `(L*, a*, b*)`.
pub fn rgb_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(linearize);
    let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    let fx = lab_f(x / WHITE[0]);
    let fy = lab_f(y / WHITE[1]);
    let fz = lab_f(z / WHITE[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

pub fn to_lab(image: &RgbImage) -> Result<LabImage> {
    let (w, h) = image.dimensions();
    let pixels = image
        .pixels()
        .map(|p| {
            let [l, a, b] = rgb_to_lab(p.0);
            [
                (l / 100.0).clamp(0.0, 1.0),
                ((a + 128.0) / 255.0).clamp(0.0, 1.0),
                ((b + 128.0) / 255.0).clamp(0.0, 1.0),
            ]
        })
        .collect();
    LabImage::new(w as usize, h as usize, pixels)
}
