use std::collections::VecDeque;

use super::lab::LabImage;
use crate::error::{Error, Result};

pub const SLIC_ITERATIONS: usize = 10;

/// Rescaled Lab distances are multiplied by this to recover L* units, the
/// scale on which the usual compactness values are calibrated.
const COLOR_SCALE: f64 = 100.0;

/// Pixel-to-superpixel labeling plus per-superpixel features.
#[derive(Debug, Clone)]
pub struct SuperpixelGrid {
    width: usize,
    height: usize,
    labels: Vec<u32>,
    features: Vec<[f64; 3]>,
    sizes: Vec<usize>,
    boundary: Vec<bool>,
    adjacency: Vec<(usize, usize)>,
}

impl SuperpixelGrid {
    /// Builds a grid from an explicit labeling and the per-pixel Lab colours
    /// it is averaged over.
    ///
    /// Labels must cover `0..N` with every superpixel nonempty and
    /// 4-connected.
    pub fn from_labels(
        width: usize,
        height: usize,
        labels: Vec<u32>,
        lab: &[[f64; 3]],
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Input("grid dimensions must be nonzero".into()));
        }
        let n_pixels = width * height;
        if labels.len() != n_pixels || lab.len() != n_pixels {
            return Err(Error::Length {
                expected: n_pixels,
                actual: labels.len().min(lab.len()),
            });
        }
        let count = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
        let mut sizes = vec![0usize; count];
        let mut sums = vec![[0.0f64; 3]; count];
        let mut boundary = vec![false; count];
        for (i, (&l, c)) in labels.iter().zip(lab).enumerate() {
            let l = l as usize;
            sizes[l] += 1;
            for ch in 0..3 {
                sums[l][ch] += c[ch];
            }
            let (x, y) = (i % width, i / width);
            if x == 0 || y == 0 || x + 1 == width || y + 1 == height {
                boundary[l] = true;
            }
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::Input(format!("superpixel {empty} has no pixels")));
        }
        let features = sums
            .iter()
            .zip(&sizes)
            .map(|(s, &n)| s.map(|v| v / n as f64))
            .collect();

        let mut edges = Vec::new();
        for y in 0..height {
            for x in 0..width {
                let a = labels[y * width + x] as usize;
                if x + 1 < width {
                    let b = labels[y * width + x + 1] as usize;
                    if a != b {
                        edges.push((a.min(b), a.max(b)));
                    }
                }
                if y + 1 < height {
                    let b = labels[(y + 1) * width + x] as usize;
                    if a != b {
                        edges.push((a.min(b), a.max(b)));
                    }
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();

        let grid = Self {
            width,
            height,
            labels,
            features,
            sizes,
            boundary,
            adjacency: edges,
        };
        let components = connected_components(width, height, &grid.labels);
        if components.sizes.len() != count {
            return Err(Error::Input("superpixels must be 4-connected".into()));
        }
        Ok(grid)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of superpixels.
    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Mean rescaled Lab colour of each superpixel.
    pub fn features(&self) -> &[[f64; 3]] {
        &self.features
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Whether each superpixel touches the image border.
    pub fn boundary(&self) -> &[bool] {
        &self.boundary
    }

    /// Sorted, deduplicated pairs `(a, b)` with `a < b`.
    pub fn adjacency(&self) -> &[(usize, usize)] {
        &self.adjacency
    }

    #[cfg(test)]
    pub(crate) fn strip_adjacency_for_tests(&mut self) {
        self.adjacency.clear();
    }

    /// Euclidean distance between two superpixels' mean colours.
    pub fn color_distance(&self, a: usize, b: usize) -> f64 {
        let (p, q) = (self.features[a], self.features[b]);
        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
    }
}

struct Components {
    /// Component index per pixel, numbered in scan order of first pixel.
    ids: Vec<usize>,
    sizes: Vec<usize>,
    labels: Vec<u32>,
}

fn connected_components(width: usize, height: usize, labels: &[u32]) -> Components {
    let mut ids = vec![usize::MAX; labels.len()];
    let mut sizes = Vec::new();
    let mut comp_labels = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..labels.len() {
        if ids[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let label = labels[start];
        ids[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let (x, y) = (i % width, i / width);
            let mut visit = |j: usize| {
                if ids[j] == usize::MAX && labels[j] == label {
                    ids[j] = id;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < width {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - width);
            }
            if y + 1 < height {
                visit(i + width);
            }
        }
        sizes.push(size);
        comp_labels.push(label);
    }
    Components {
        ids,
        sizes,
        labels: comp_labels,
    }
}

/// Keeps the largest component of every label and merges each remaining
/// fragment into the adjacent superpixel with the most pixels, then
/// renumbers labels by first appearance in scan order.
fn enforce_connectivity(width: usize, height: usize, labels: &mut [u32]) {
    let comps = connected_components(width, height, labels);
    let n_comps = comps.sizes.len();
    let n_labels = comps
        .labels
        .iter()
        .map(|&l| l as usize + 1)
        .max()
        .unwrap_or(0);

    let mut main = vec![usize::MAX; n_labels];
    for c in 0..n_comps {
        let l = comps.labels[c] as usize;
        if main[l] == usize::MAX || comps.sizes[c] > comps.sizes[main[l]] {
            main[l] = c;
        }
    }

    let mut neighbours: Vec<Vec<usize>> = vec![Vec::new(); n_comps];
    for y in 0..height {
        for x in 0..width {
            let a = comps.ids[y * width + x];
            let right = (x + 1 < width).then(|| comps.ids[y * width + x + 1]);
            let down = (y + 1 < height).then(|| comps.ids[(y + 1) * width + x]);
            for b in [right, down].into_iter().flatten() {
                if a != b {
                    neighbours[a].push(b);
                    neighbours[b].push(a);
                }
            }
        }
    }
    for n in &mut neighbours {
        n.sort_unstable();
        n.dedup();
    }

    // Final label of each component once resolved, and total size per label.
    let mut resolved: Vec<Option<u32>> = vec![None; n_comps];
    let mut label_size = vec![0usize; n_labels];
    for (l, &c) in main.iter().enumerate() {
        if c != usize::MAX {
            resolved[c] = Some(l as u32);
            label_size[l] = comps.sizes[c];
        }
    }
    loop {
        let mut changed = false;
        let mut pending = false;
        for c in 0..n_comps {
            if resolved[c].is_some() {
                continue;
            }
            let target = neighbours[c]
                .iter()
                .filter_map(|&nb| resolved[nb])
                .max_by(|&a, &b| {
                    label_size[a as usize]
                        .cmp(&label_size[b as usize])
                        .then(b.cmp(&a))
                });
            match target {
                Some(l) => {
                    resolved[c] = Some(l);
                    label_size[l as usize] += comps.sizes[c];
                    changed = true;
                }
                None => pending = true,
            }
        }
        if !pending || !changed {
            break;
        }
    }

    let mut remap = vec![u32::MAX; n_labels];
    let mut next = 0u32;
    for (i, label) in labels.iter_mut().enumerate() {
        let l = resolved[comps.ids[i]].expect("every fragment borders a kept region") as usize;
        if remap[l] == u32::MAX {
            remap[l] = next;
            next += 1;
        }
        *label = remap[l];
    }
}

struct Center {
    lab: [f64; 3],
    x: f64,
    y: f64,
}

/// SLIC over-segmentation into roughly `n_target` superpixels.
///
/// Seeds are laid out on rows so that exactly `n_target` are placed; the
/// clustering distance combines colour (in L* units) and position
/// normalized by the seed spacing, weighted by `compactness`. The result is
/// deterministic.
pub fn slic_segment(lab: &LabImage, n_target: usize, compactness: f64) -> Result<SuperpixelGrid> {
    let (w, h) = (lab.width(), lab.height());
    let n_pixels = w * h;
    if n_target < 2 || n_target > n_pixels {
        return Err(Error::Config(format!(
            "superpixel target {n_target} outside [2, {n_pixels}]"
        )));
    }
    if compactness.is_nan() || compactness <= 0.0 {
        return Err(Error::Config("compactness must be positive".into()));
    }

    let rows = ((n_target as f64 * h as f64 / w as f64).sqrt().round() as usize)
        .clamp(1, h.min(n_target))
        .max(n_target.div_ceil(w));
    let per_row: Vec<usize> = (0..rows)
        .map(|r| n_target / rows + usize::from(r < n_target % rows))
        .collect();

    let mut centers = Vec::with_capacity(n_target);
    let mut labels = vec![0u32; n_pixels];
    let row_height = h as f64 / rows as f64;
    let mut max_spacing = row_height;
    let mut first_in_row = Vec::with_capacity(rows);
    for (r, &k) in per_row.iter().enumerate() {
        first_in_row.push(centers.len());
        let col_width = w as f64 / k as f64;
        max_spacing = max_spacing.max(col_width);
        let cy = (r as f64 + 0.5) * row_height;
        for i in 0..k {
            let cx = (i as f64 + 0.5) * col_width;
            centers.push(Center {
                lab: lab.get(cx as usize, cy as usize),
                x: cx,
                y: cy,
            });
        }
    }
    for y in 0..h {
        let r = ((y as f64 / row_height) as usize).min(rows - 1);
        let k = per_row[r];
        for x in 0..w {
            let i = ((x as f64 * k as f64 / w as f64) as usize).min(k - 1);
            labels[y * w + x] = (first_in_row[r] + i) as u32;
        }
    }

    let step = (n_pixels as f64 / n_target as f64).sqrt();
    let spatial_weight = (compactness / step).powi(2);
    let radius = max_spacing.ceil() as isize;
    let pixels = lab.pixels();
    let mut distance = vec![f64::INFINITY; n_pixels];

    for _ in 0..SLIC_ITERATIONS {
        distance.fill(f64::INFINITY);
        for (ci, c) in centers.iter().enumerate() {
            let (cx, cy) = (c.x.floor() as isize, c.y.floor() as isize);
            let x0 = (cx - radius).max(0) as usize;
            let x1 = ((cx + radius).min(w as isize - 1)) as usize;
            let y0 = (cy - radius).max(0) as usize;
            let y1 = ((cy + radius).min(h as isize - 1)) as usize;
            for y in y0..=y1 {
                let dy = y as f64 + 0.5 - c.y;
                for x in x0..=x1 {
                    let i = y * w + x;
                    let p = pixels[i];
                    let dc = (p[0] - c.lab[0]).powi(2)
                        + (p[1] - c.lab[1]).powi(2)
                        + (p[2] - c.lab[2]).powi(2);
                    let dx = x as f64 + 0.5 - c.x;
                    let d = dc * COLOR_SCALE * COLOR_SCALE + (dx * dx + dy * dy) * spatial_weight;
                    if d < distance[i] {
                        distance[i] = d;
                        labels[i] = ci as u32;
                    }
                }
            }
        }

        let mut sums = vec![[0.0f64; 5]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (i, &l) in labels.iter().enumerate() {
            let s = &mut sums[l as usize];
            let p = pixels[i];
            s[0] += p[0];
            s[1] += p[1];
            s[2] += p[2];
            s[3] += (i % w) as f64 + 0.5;
            s[4] += (i / w) as f64 + 0.5;
            counts[l as usize] += 1;
        }
        for ((c, s), &n) in centers.iter_mut().zip(&sums).zip(&counts) {
            if n > 0 {
                let n = n as f64;
                c.lab = [s[0] / n, s[1] / n, s[2] / n];
                c.x = s[3] / n;
                c.y = s[4] / n;
            }
        }
    }

    enforce_connectivity(w, h, &mut labels);
    SuperpixelGrid::from_labels(w, h, labels, pixels)
}
