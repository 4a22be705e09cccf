use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{check_len, Result};
use crate::preprocess::SuperpixelGrid;
use crate::raster::min_max_normalize;

/// Dense geodesic affinity between all superpixel pairs.
#[derive(Debug, Clone)]
pub struct AffinityGraph {
    n: usize,
    distances: Vec<f64>,
    weights: Vec<f64>,
    degrees: Vec<f64>,
    threshold: f64,
    theta: f64,
    edges: Vec<(usize, usize, f64)>,
}

impl AffinityGraph {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Geodesic distance between superpixels `a` and `b`.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.distances[a * self.n + b]
    }

    pub fn weight(&self, a: usize, b: usize) -> f64 {
        self.weights[a * self.n + b]
    }

    /// Row sums of the affinity matrix.
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// The adaptive threshold subtracted from every edge's colour distance.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Graph edges `(a, b, cost)` the shortest paths run over, including
    /// any bridges added between disconnected components.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }
}

#[derive(PartialEq)]
struct Entry {
    dist: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Entry {
        dist: 0.0,
        node: source,
    });
    while let Some(Entry { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        for &(next, cost) in &adj[node] {
            let nd = d + cost;
            if nd < dist[next] {
                dist[next] = nd;
                heap.push(Entry {
                    dist: nd,
                    node: next,
                });
            }
        }
    }
    dist
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Links disconnected components of the adjacency graph by one edge each,
/// between the closest-colour pair of superpixels.
fn bridges(grid: &SuperpixelGrid) -> Vec<(usize, usize)> {
    let n = grid.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for &(a, b) in grid.adjacency() {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut index = vec![usize::MAX; n];
    for v in 0..n {
        let r = find(&mut parent, v);
        if index[r] == usize::MAX {
            index[r] = components.len();
            components.push(Vec::new());
        }
        components[index[r]].push(v);
    }

    let mut added = Vec::new();
    let mut joined: Vec<usize> = components.first().cloned().unwrap_or_default();
    for comp in components.iter().skip(1) {
        let mut best = (f64::INFINITY, 0, 0);
        for &u in &joined {
            for &v in comp {
                let d = grid.color_distance(u, v);
                if d < best.0 {
                    best = (d, u.min(v), u.max(v));
                }
            }
        }
        added.push((best.1, best.2));
        joined.extend(comp);
    }
    added
}

/// Geodesic distances over the superpixel adjacency graph with edge cost
/// `max(colour distance - a, 0)`, where `a` is the mean colour distance over
/// adjacent pairs, and affinities `exp(-G^2 / (2 theta^2))`.
///
/// `G(n, m)` is taken from the shortest-path tree rooted at `min(n, m)`,
/// which keeps the matrix exactly symmetric.
pub fn build_affinity(grid: &SuperpixelGrid, theta: f64) -> AffinityGraph {
    let n = grid.len();
    let adjacency = grid.adjacency();
    let threshold = if adjacency.is_empty() {
        0.0
    } else {
        adjacency
            .iter()
            .map(|&(a, b)| grid.color_distance(a, b))
            .sum::<f64>()
            / adjacency.len() as f64
    };

    let edges: Vec<(usize, usize, f64)> = adjacency
        .iter()
        .copied()
        .chain(bridges(grid))
        .map(|(a, b)| (a, b, (grid.color_distance(a, b) - threshold).max(0.0)))
        .collect();
    let mut adj = vec![Vec::new(); n];
    for &(a, b, cost) in &edges {
        adj[a].push((b, cost));
        adj[b].push((a, cost));
    }

    let mut distances = vec![0.0; n * n];
    for source in 0..n {
        let dist = dijkstra(&adj, source);
        for target in source + 1..n {
            distances[source * n + target] = dist[target];
            distances[target * n + source] = dist[target];
        }
    }

    let denom = 2.0 * theta * theta;
    let weights: Vec<f64> = distances.iter().map(|g| (-g * g / denom).exp()).collect();
    let degrees = weights
        .chunks(n.max(1))
        .map(|row| row.iter().sum())
        .collect();

    AffinityGraph {
        n,
        distances,
        weights,
        degrees,
        threshold,
        theta,
        edges,
    }
}

/// `iters` applications of the row-stochastic operator `D^-1 W`, without
/// normalization.
pub fn propagate_raw(values: &[f64], graph: &AffinityGraph, iters: usize) -> Result<Vec<f64>> {
    check_len(graph.len(), values.len())?;
    let n = graph.len();
    let mut current = values.to_vec();
    let mut next = vec![0.0; n];
    for _ in 0..iters {
        for (row, out) in next.iter_mut().enumerate() {
            let w = &graph.weights[row * n..(row + 1) * n];
            let s: f64 = w.iter().zip(&current).map(|(a, b)| a * b).sum();
            *out = s / graph.degrees[row];
        }
        std::mem::swap(&mut current, &mut next);
    }
    Ok(current)
}

/// Diffuses a consensus map over the affinity graph and min-max normalizes
/// the result into the initial reference map.
pub fn propagate(values: &[f64], graph: &AffinityGraph, iters: usize) -> Result<Vec<f64>> {
    Ok(min_max_normalize(&propagate_raw(values, graph, iters)?))
}
