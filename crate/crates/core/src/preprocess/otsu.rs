const BINS: usize = 256;

fn bin_of(v: f64) -> usize {
    ((v * BINS as f64).floor().max(0.0) as usize).min(BINS - 1)
}

/// Scaled between-class variance of a split as the fraction
/// `(s0*w1 - s1*w0)^2 / (w0*w1)`, in bin-index units.
#[derive(Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn exceeds(self, other: Score) -> bool {
        match (
            self.num.checked_mul(other.den),
            other.num.checked_mul(self.den),
        ) {
            (Some(a), Some(b)) => a > b,
            _ => self.num as f64 / self.den as f64 > other.num as f64 / other.den as f64,
        }
    }
}

/// Otsu threshold over a 256-bin histogram of values in `[0, 1]`.
///
/// A split before bin `k` yields `gamma = k / 256`, so that
/// `v >= gamma` exactly when `v` falls in bin `k` or above. Among splits of
/// equal between-class variance the smallest `gamma` wins. When every value
/// lands in one bin the minimum value is returned and all entries binarize
/// to foreground.
///
/// # Panics
///
/// Panics on an empty slice.
pub fn otsu(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "otsu on an empty vector");
    let mut hist = [0u64; BINS];
    for &v in values {
        hist[bin_of(v)] += 1;
    }
    let total = values.len() as u128;
    let total_sum: u128 = hist
        .iter()
        .enumerate()
        .map(|(i, &h)| i as u128 * h as u128)
        .sum();

    let mut best: Option<(usize, Score)> = None;
    let (mut w0, mut s0) = (0u128, 0u128);
    for k in 1..BINS {
        w0 += hist[k - 1] as u128;
        s0 += (k as u128 - 1) * hist[k - 1] as u128;
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let s1 = total_sum - s0;
        let diff = (s0 * w1).abs_diff(s1 * w0);
        let score = Score {
            num: diff.saturating_mul(diff),
            den: w0 * w1,
        };
        if best.is_none_or(|(_, b)| score.exceeds(b)) {
            best = Some((k, score));
        }
    }

    match best {
        Some((k, _)) => k as f64 / BINS as f64,
        None => values.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

/// `true` where `value >= threshold`.
pub fn binarize(values: &[f64], threshold: f64) -> Vec<bool> {
    values.iter().map(|&v| v >= threshold).collect()
}
