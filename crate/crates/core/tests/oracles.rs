//! Library results against independent reference implementations.

use arbitrator::expertise::{stats_alpha, stats_beta};
use arbitrator::fusion::CandidateStack;
use arbitrator::knowledge::build_affinity;
use arbitrator::preprocess::{otsu, slic_segment, LabImage, SuperpixelGrid};
use num_bigint::BigInt;
use num_rational::BigRational;
use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn block_grid(rng: &mut ChaCha8Rng) -> SuperpixelGrid {
    let cols = rng.random_range(1..=7usize);
    let rows = rng.random_range(1..=(50 / cols).min(7));
    let widths: Vec<usize> = (0..cols).map(|_| rng.random_range(1..=3)).collect();
    let heights: Vec<usize> = (0..rows).map(|_| rng.random_range(1..=3)).collect();
    let (w, h) = (widths.iter().sum::<usize>(), heights.iter().sum::<usize>());
    let col_of: Vec<usize> = widths
        .iter()
        .enumerate()
        .flat_map(|(i, &k)| std::iter::repeat_n(i, k))
        .collect();
    let row_of: Vec<usize> = heights
        .iter()
        .enumerate()
        .flat_map(|(i, &k)| std::iter::repeat_n(i, k))
        .collect();
    let labels = (0..w * h)
        .map(|i| (row_of[i / w] * cols + col_of[i % w]) as u32)
        .collect();
    let lab: Vec<[f64; 3]> = (0..w * h)
        .map(|_| [rng.random(), rng.random(), rng.random()])
        .collect();
    SuperpixelGrid::from_labels(w, h, labels, &lab).unwrap()
}

fn slic_grid(rng: &mut ChaCha8Rng) -> SuperpixelGrid {
    let (w, h) = (rng.random_range(12..30), rng.random_range(12..30));
    let pixels = (0..w * h)
        .map(|i| {
            let band = ((i % w) * 3 / w) as f64 / 3.0;
            [
                band + 0.05 * rng.random::<f64>(),
                0.5,
                0.2 + 0.1 * rng.random::<f64>(),
            ]
        })
        .collect();
    let lab = LabImage::new(w, h, pixels).unwrap();
    slic_segment(&lab, rng.random_range(4..40), 10.0).unwrap()
}

/// All-pairs distances through petgraph's Dijkstra, with the edge cost
/// derived from the grid's features.
fn petgraph_geodesics(grid: &SuperpixelGrid) -> Vec<Vec<f64>> {
    let f = grid.features();
    let colour = |a: usize, b: usize| {
        ((f[a][0] - f[b][0]).powi(2) + (f[a][1] - f[b][1]).powi(2) + (f[a][2] - f[b][2]).powi(2))
            .sqrt()
    };
    let adjacency = grid.adjacency();
    let a =
        adjacency.iter().map(|&(x, y)| colour(x, y)).sum::<f64>() / adjacency.len().max(1) as f64;
    let mut graph = UnGraph::<(), f64>::new_undirected();
    let nodes: Vec<NodeIndex> = (0..grid.len()).map(|_| graph.add_node(())).collect();
    for &(x, y) in adjacency {
        graph.add_edge(nodes[x], nodes[y], (colour(x, y) - a).max(0.0));
    }
    (0..grid.len())
        .map(|s| {
            let dist = dijkstra(&graph, nodes[s], None, |e| *e.weight());
            (0..grid.len()).map(|t| dist[&nodes[t]]).collect()
        })
        .collect()
}

#[test]
fn geodesics_match_petgraph_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for round in 0..60 {
        let grid = if round % 2 == 0 {
            block_grid(&mut rng)
        } else {
            slic_grid(&mut rng)
        };
        let graph = build_affinity(&grid, 0.25);
        let oracle = petgraph_geodesics(&grid);
        let n = grid.len();
        for i in 0..n {
            assert_eq!(graph.distance(i, i), 0.0);
            for j in i + 1..n {
                assert_eq!(
                    graph.distance(i, j),
                    oracle[i][j],
                    "round {round}: G({i},{j})"
                );
                assert_eq!(graph.distance(j, i), graph.distance(i, j));
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let (ij, jk, ik) = (
                        graph.distance(i, j),
                        graph.distance(j, k),
                        graph.distance(i, k),
                    );
                    assert!(
                        ik <= ij + jk + 1e-12,
                        "triangle inequality at ({i},{j},{k})"
                    );
                }
            }
        }
    }
}

#[test]
fn affinity_rows_are_stochastic() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let grid = block_grid(&mut rng);
        let graph = build_affinity(&grid, 0.25);
        for i in 0..grid.len() {
            assert_eq!(graph.weight(i, i), 1.0);
            let row: f64 = (0..grid.len()).map(|j| graph.weight(i, j)).sum();
            assert!((row / graph.degrees()[i] - 1.0).abs() < 1e-12);
            for j in 0..grid.len() {
                let w = graph.weight(i, j);
                assert!(w > 0.0 && w <= 1.0);
                assert_eq!(w, graph.weight(j, i));
            }
        }
    }
}

fn rational(v: f64) -> BigRational {
    BigRational::from_float(v).unwrap()
}

/// Exhaustive Otsu over the 256 bin edges, with class means and between-class
/// variance in exact rational arithmetic.
fn rational_otsu(values: &[f64]) -> f64 {
    let bins: Vec<i64> = values
        .iter()
        .map(|&v| ((v * 256.0).floor() as i64).clamp(0, 255))
        .collect();
    let mut best: Option<(usize, BigRational)> = None;
    for k in 1..256i64 {
        let (lo, hi): (Vec<i64>, Vec<i64>) = bins.iter().partition(|&&b| b < k);
        if lo.is_empty() || hi.is_empty() {
            continue;
        }
        let n = BigRational::from_integer(BigInt::from(values.len()));
        let mean = |c: &[i64]| {
            BigRational::new(BigInt::from(c.iter().sum::<i64>()), BigInt::from(c.len()))
        };
        let w0 = BigRational::from_integer(BigInt::from(lo.len())) / &n;
        let w1 = BigRational::from_integer(BigInt::from(hi.len())) / &n;
        let diff = mean(&lo) - mean(&hi);
        let variance = w0 * w1 * &diff * &diff;
        if best.as_ref().is_none_or(|(_, b)| variance > *b) {
            best = Some((k as usize, variance));
        }
    }
    match best {
        Some((k, _)) => k as f64 / 256.0,
        None => values.iter().copied().fold(f64::INFINITY, f64::min),
    }
}

#[test]
fn otsu_matches_rational_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for t in 0..150 {
        let n = rng.random_range(1..=300);
        let values: Vec<f64> = match t % 4 {
            0 => (0..n).map(|_| rng.random()).collect(),
            1 => (0..n)
                .map(|_| (rng.random::<f64>() * 6.0).floor() / 5.0)
                .collect(),
            2 => (0..n)
                .map(|_| if rng.random::<bool>() { 0.1 } else { 0.9 })
                .collect(),
            _ => (0..n).map(|_| 0.5 + 0.003 * rng.random::<f64>()).collect(),
        };
        assert_eq!(otsu(&values), rational_otsu(&values), "vector {t}");
    }
}

/// The smoothed ratio with every count fraction and smoothing term exact.
fn rational_ratio(labels: &[bool], reference: &[f64], threshold: f64, eps: f64) -> BigRational {
    let n = BigInt::from(labels.len());
    let eps = rational(eps);
    let frac = |count: usize| BigRational::new(BigInt::from(count), n.clone()) + &eps;
    let mut counts = [0usize; 4];
    for (&l, &r) in labels.iter().zip(reference) {
        counts[usize::from(r >= threshold) * 2 + usize::from(l)] += 1;
    }
    let (fg, bg) = (counts[2] + counts[3], counts[0] + counts[1]);
    (frac(counts[3]) / frac(fg)) / (frac(counts[1]) / frac(bg))
}

#[test]
fn stats_match_exact_rational_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let (lambda, eps) = (0.1, 1e-6);
    let thresholds: Vec<f64> = (1..=9).map(|j| j as f64 / 10.0).collect();
    for _ in 0..200 {
        let n = rng.random_range(1..=32);
        let p = rng.random_range(1..=6);
        let maps: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..n).map(|_| rng.random()).collect())
            .collect();
        let reference: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let stack = CandidateStack::new(maps).unwrap();
        let beta = stats_beta(&stack, &reference, lambda, eps).unwrap();
        let alpha = stats_alpha(&stack, &reference, &thresholds, eps).unwrap();
        for (q, labels) in stack.binary().iter().enumerate() {
            let exact_beta = rational_ratio(labels, &reference, lambda, eps);
            let sum = thresholds
                .iter()
                .map(|&t| rational_ratio(labels, &reference, t, eps))
                .fold(BigRational::from_integer(BigInt::from(0)), |a, b| a + b);
            let exact_alpha = sum / BigRational::from_integer(BigInt::from(thresholds.len()));
            for (got, exact) in [(beta[q], exact_beta), (alpha[q], exact_alpha)] {
                let one = BigRational::from_integer(BigInt::from(1));
                let diff = rational(got) - &exact;
                let diff = if diff < BigRational::from_integer(BigInt::from(0)) {
                    -diff
                } else {
                    diff
                };
                // Ratios are positive; scale by max(1, |exact|).
                let err = diff / exact.max(one);
                assert!(
                    err < rational(1e-12),
                    "got {got}, relative error above 1e-12"
                );
            }
        }
    }
}
