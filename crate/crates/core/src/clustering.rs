//! PAM k-medoids over a precomputed distance matrix, silhouette validation
//! and k sweeps.
//!
//! Initialization is the greedy BUILD step. The swap phase evaluates every
//! (medoid, non-medoid) exchange per iteration and applies the single best
//! one; the per-candidate cost change for all medoids at once is computed
//! from each item's nearest and second-nearest medoid distance, so one
//! iteration costs `O(N²)` independent of `k`.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};
use crate::model::Interval;

pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub k: usize,
    /// Item indices of the medoids, ascending.
    pub medoid_indices: Vec<usize>,
    /// For each item, the item index of its medoid.
    pub labels: Vec<usize>,
    pub total_cost: f64,
    /// Total cost after initialization and after every accepted swap.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl ClusterAssignment {
    /// Position of each item's medoid within `medoid_indices`.
    pub fn cluster_ids(&self) -> Vec<usize> {
        let pos: BTreeMap<usize, usize> = self
            .medoid_indices
            .iter()
            .enumerate()
            .map(|(p, &m)| (m, p))
            .collect();
        self.labels.iter().map(|l| pos[l]).collect()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for c in self.cluster_ids() {
            sizes[c] += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// Greedy cost-minimizing seeding.
    Build,
    /// `k` distinct items drawn uniformly with a seeded generator.
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMedoidsOptions {
    pub init: Init,
    pub max_iter: usize,
}

impl Default for KMedoidsOptions {
    fn default() -> Self {
        Self {
            init: Init::Build,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// PAM with BUILD initialization.
///
/// BUILD is deterministic, so `seed` only matters through
/// [`k_medoids_with`] and [`Init::Random`]; it is accepted here so every
/// clustering entry point records the same run parameters.
pub fn k_medoids(d: &DistanceMatrix, k: usize, _seed: u64, max_iter: usize) -> Result<ClusterAssignment> {
    k_medoids_with(
        d,
        k,
        KMedoidsOptions {
            init: Init::Build,
            max_iter,
        },
    )
}

pub fn k_medoids_with(d: &DistanceMatrix, k: usize, opts: KMedoidsOptions) -> Result<ClusterAssignment> {
    let n = d.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} is outside [1, {n}]")));
    }
    let mut medoids = match opts.init {
        Init::Build => build(d, k),
        Init::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample(&mut rng, n, k).into_vec()
        }
    };
    medoids.sort_unstable();

    let mut cost = assignment_cost(d, &medoids);
    let mut history = vec![cost];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let Some((delta, slot, candidate)) = best_swap(d, &medoids) else {
            converged = true;
            break;
        };
        let tol = 1e-12 * cost.abs().max(1.0);
        if delta >= -tol {
            converged = true;
            break;
        }
        let mut next = medoids.clone();
        next[slot] = candidate;
        next.sort_unstable();
        let next_cost = assignment_cost(d, &next);
        if next_cost >= cost {
            // the predicted gain was rounding noise
            converged = true;
            break;
        }
        medoids = next;
        cost = next_cost;
        history.push(cost);
    }

    let labels = assign(d, &medoids);
    Ok(ClusterAssignment {
        k,
        total_cost: cost,
        medoid_indices: medoids,
        labels,
        cost_history: history,
        iterations,
        converged,
    })
}

fn build(d: &DistanceMatrix, k: usize) -> Vec<usize> {
    let n = d.len();
    let first = (0..n)
        .map(|i| (d.row(i).iter().sum::<f64>(), i))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, i)| i)
        .expect("n >= 1");
    let mut medoids = vec![first];
    let mut is_medoid = vec![false; n];
    is_medoid[first] = true;
    let mut nearest: Vec<f64> = d.row(first).to_vec();
    while medoids.len() < k {
        let c = (0..n)
            .into_par_iter()
            .filter(|&c| !is_medoid[c])
            .map(|c| {
                let gain: f64 = nearest
                    .iter()
                    .zip(d.row(c))
                    .map(|(&near, &dc)| (near - dc).max(0.0))
                    .sum();
                (gain, c)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)))
            .map(|(_, c)| c)
            .expect("k <= n leaves a candidate");
        medoids.push(c);
        is_medoid[c] = true;
        for (near, &dc) in nearest.iter_mut().zip(d.row(c)) {
            if dc < *near {
                *near = dc;
            }
        }
    }
    medoids
}

/// Nearest-medoid labels; medoids label themselves and other ties go to the
/// lowest medoid index. `medoids` must be ascending.
fn assign(d: &DistanceMatrix, medoids: &[usize]) -> Vec<usize> {
    (0..d.len())
        .map(|i| {
            if medoids.binary_search(&i).is_ok() {
                return i;
            }
            let mut best = medoids[0];
            let mut best_d = d.get(i, best);
            for &m in &medoids[1..] {
                let dm = d.get(i, m);
                if dm < best_d {
                    best = m;
                    best_d = dm;
                }
            }
            best
        })
        .collect()
}

fn assignment_cost(d: &DistanceMatrix, medoids: &[usize]) -> f64 {
    (0..d.len())
        .map(|i| medoids.iter().map(|&m| d.get(i, m)).fold(f64::INFINITY, f64::min))
        .sum()
}

/// Best (cost change, medoid slot, candidate) over all single swaps, ties to
/// the lower medoid item index and then the lower candidate index.
fn best_swap(d: &DistanceMatrix, medoids: &[usize]) -> Option<(f64, usize, usize)> {
    let n = d.len();
    let k = medoids.len();
    // nearest slot, nearest distance, second-nearest distance
    let near: Vec<(usize, f64, f64)> = (0..n)
        .map(|i| {
            let mut best = (0, f64::INFINITY);
            let mut second = f64::INFINITY;
            for (slot, &m) in medoids.iter().enumerate() {
                let dm = d.get(i, m);
                if dm < best.1 {
                    second = best.1;
                    best = (slot, dm);
                } else if dm < second {
                    second = dm;
                }
            }
            (best.0, best.1, second)
        })
        .collect();
    let mut removal = vec![0.0; k];
    if k > 1 {
        for &(slot, dn, ds) in &near {
            removal[slot] += ds - dn;
        }
    }

    let mut is_medoid = vec![false; n];
    for &m in medoids {
        is_medoid[m] = true;
    }
    let per_candidate: Vec<Option<(f64, usize, usize)>> = (0..n)
        .into_par_iter()
        .map(|c| {
            if is_medoid[c] {
                return None;
            }
            let mut delta = removal.clone();
            let mut shared = 0.0;
            for (o, &(slot, dn, ds)) in near.iter().enumerate() {
                let doc = d.get(o, c);
                if doc < dn {
                    shared += doc - dn;
                    delta[slot] += dn - ds;
                } else if doc < ds {
                    delta[slot] += doc - ds;
                }
            }
            let mut best: Option<(f64, usize)> = None;
            for (slot, &dm) in delta.iter().enumerate() {
                let total = dm + shared;
                let better = match best {
                    None => true,
                    Some((b, bs)) => total < b || (total == b && medoids[slot] < medoids[bs]),
                };
                if better {
                    best = Some((total, slot));
                }
            }
            best.map(|(t, slot)| (t, slot, c))
        })
        .collect();

    per_candidate.into_iter().flatten().fold(None, |acc, cand| match acc {
        None => Some(cand),
        Some(cur) => {
            let key = |s: &(f64, usize, usize)| (medoids[s.1], s.2);
            if cand.0 < cur.0 || (cand.0 == cur.0 && key(&cand) < key(&cur)) {
                Some(cand)
            } else {
                Some(cur)
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteReport {
    pub per_item: Vec<f64>,
    pub mean: f64,
}

/// Per-item `(b - a) / max(a, b)` silhouette widths.
///
/// Items in singleton clusters score 0, as do items where `a = b = 0`.
pub fn silhouette(d: &DistanceMatrix, assignment: &ClusterAssignment) -> Result<SilhouetteReport> {
    silhouette_labels(d, &assignment.cluster_ids())
}

pub fn silhouette_labels(d: &DistanceMatrix, clusters: &[usize]) -> Result<SilhouetteReport> {
    let n = d.len();
    if clusters.len() != n {
        return Err(Error::InvalidArgument("label count does not match matrix size".into()));
    }
    let k = clusters.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &c in clusters {
        sizes[c] += 1;
    }
    let populated = sizes.iter().filter(|&&s| s > 0).count();
    if populated < 2 {
        return Err(Error::Undefined("silhouette needs at least 2 non-empty clusters".into()));
    }

    let per_item: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = clusters[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for (j, &c) in clusters.iter().enumerate() {
                sums[c] += d.get(i, j);
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .collect();
    let mean = per_item.iter().sum::<f64>() / n as f64;
    Ok(SilhouetteReport { per_item, mean })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub k: usize,
    pub mean_silhouette: f64,
    pub assignment: ClusterAssignment,
}

/// Clusters at every feasible k in `k_range`, clipped to `[2, N]`.
pub fn sweep_k(d: &DistanceMatrix, k_range: Interval, seed: u64, max_iter: usize) -> Result<Vec<SweepEntry>> {
    let lo = (k_range.lo as usize).max(2);
    let hi = (k_range.hi as usize).min(d.len());
    if lo > hi {
        return Err(Error::InvalidArgument(format!(
            "no feasible k in {k_range} for {} items",
            d.len()
        )));
    }
    (lo..=hi)
        .map(|k| {
            let assignment = k_medoids(d, k, seed, max_iter)?;
            let mean_silhouette = silhouette(d, &assignment)?.mean;
            Ok(SweepEntry {
                k,
                mean_silhouette,
                assignment,
            })
        })
        .collect()
}

/// Entry with the highest mean silhouette, ties to the smaller k.
pub fn best_by_silhouette(sweep: &[SweepEntry]) -> Option<&SweepEntry> {
    sweep.iter().fold(None, |best: Option<&SweepEntry>, e| match best {
        Some(b) if b.mean_silhouette >= e.mean_silhouette => Some(b),
        _ => Some(e),
    })
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same items");
    let n = a.len() as f64;
    let mut table: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, f64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, f64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1.0;
        *rows.entry(x).or_default() += 1.0;
        *cols.entry(y).or_default() += 1.0;
    }
    let pairs = |v: f64| v * (v - 1.0) / 2.0;
    let index: f64 = table.values().copied().map(pairs).sum();
    let sum_rows: f64 = rows.values().copied().map(pairs).sum();
    let sum_cols: f64 = cols.values().copied().map(pairs).sum();
    let expected = sum_rows * sum_cols / pairs(n);
    let max = (sum_rows + sum_cols) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}
