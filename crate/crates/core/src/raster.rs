use crate::error::{Error, Result};

/// Spread below which a vector counts as constant during min-max normalization.
const FLAT_SPREAD: f64 = 1e-12;

/// Single-channel pixel map with values in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Input("raster dimensions must be nonzero".into()));
        }
        if data.len() != width * height {
            return Err(Error::Length {
                expected: width * height,
                actual: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Input(format!("raster value {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    /// Maps 8-bit values `v` to `v / 255`.
    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(
            width,
            height,
            bytes.iter().map(|&b| f64::from(b) / 255.0).collect(),
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Quantizes to 8 bits with rounding.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub(crate) fn ensure_dimensions(&self, width: usize, height: usize) -> Result<()> {
        if self.width == width && self.height == height {
            Ok(())
        } else {
            Err(Error::Dimensions {
                expected_width: width,
                expected_height: height,
                width: self.width,
                height: self.height,
            })
        }
    }
}

/// Rescales to `[0, 1]`; a (numerically) constant vector maps to all zeros.
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let spread = hi - lo;
    if spread.is_nan() || spread <= FLAT_SPREAD {
        return vec![0.0; values.len()];
    }
    values
        .iter()
        .map(|&v| ((v - lo) / spread).clamp(0.0, 1.0))
        .collect()
}
