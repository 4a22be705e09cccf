use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MAX_ITERATIONS: usize = 100;
const SHIFT_TOLERANCE: f64 = 1e-6;

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

fn nearest(p: &[f64; 3], centroids: &[[f64; 3]]) -> usize {
    let mut best = 0;
    for (k, c) in centroids.iter().enumerate().skip(1) {
        if dist2(p, c) < dist2(p, &centroids[best]) {
            best = k;
        }
    }
    best
}

/// k-means++ seeding followed by Lloyd iterations. Returns the cluster index
/// of every point; clusters may end up empty when points repeat.
pub(crate) fn kmeans(points: &[[f64; 3]], k: usize, seed: u64) -> Vec<usize> {
    assert!(k >= 1 && k <= points.len(), "k-means needs 1 <= k <= n");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![rng.random_range(0..points.len())];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| dist2(p, &points[chosen[0]]))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            (0..points.len())
                .find(|i| !chosen.contains(i))
                .expect("k <= n")
        };
        chosen.push(next);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &points[next]));
        }
    }

    let mut centroids: Vec<[f64; 3]> = chosen.iter().map(|&i| points[i]).collect();
    let mut assignment = vec![0; points.len()];
    for _ in 0..MAX_ITERATIONS {
        for (a, p) in assignment.iter_mut().zip(points) {
            *a = nearest(p, &centroids);
        }
        let mut sums = vec![[0.0; 3]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assignment.iter().zip(points) {
            for ch in 0..3 {
                sums[a][ch] += p[ch];
            }
            counts[a] += 1;
        }
        let mut shift: f64 = 0.0;
        for ((c, s), &n) in centroids.iter_mut().zip(&sums).zip(&counts) {
            if n > 0 {
                let updated = s.map(|v| v / n as f64);
                shift = shift.max(dist2(c, &updated).sqrt());
                *c = updated;
            }
        }
        if shift < SHIFT_TOLERANCE {
            break;
        }
    }
    for (a, p) in assignment.iter_mut().zip(points) {
        *a = nearest(p, &centroids);
    }
    assignment
}
