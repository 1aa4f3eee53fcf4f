//! Lloyd's K-Means over planar points with farthest-point seeding.
//!
//! The first centroid is a seeded uniform pick; every further centroid is
//! the point farthest from its nearest chosen centroid (lowest index on
//! ties). Assignment ties go to the lowest centroid index. A cluster left
//! empty by an assignment step takes over the point farthest from its
//! current centroid among clusters that can spare one.
//!
//! A single Lloyd run can settle in a poor local optimum, so [`kmeans`]
//! performs [`RESTARTS`] seeded runs and keeps the one with the lowest final
//! WCSS (earliest run on ties). Run 0 uses farthest-point seeding; later runs
//! draw each further seed with probability proportional to its squared
//! distance from the chosen ones, so restarts explore distinct starts even
//! on tiny point sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::Point;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 100;
pub const RESTARTS: u64 = 20;

#[derive(Debug, Error, PartialEq)]
pub enum KMeansError {
    #[error("k = {k} is outside 1..={n}")]
    InvalidK { k: usize, n: usize },
    #[error("only {distinct} distinct points for k = {k}")]
    TooFewDistinct { distinct: usize, k: usize },
    #[error("tolerance must be finite and non-negative, got {0}")]
    InvalidTolerance(f64),
    #[error("max_iter must be at least 1")]
    InvalidMaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Point>,
    /// WCSS after the initial assignment, then after every iteration.
    pub wcss_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl KMeans {
    pub fn wcss(&self) -> f64 {
        *self.wcss_history.last().expect("history starts non-empty")
    }
}

pub fn wcss(points: &[Point], assignments: &[usize], centroids: &[Point]) -> f64 {
    points
        .iter()
        .zip(assignments)
        .map(|(p, &a)| p.distance_sq(&centroids[a]))
        .sum()
}

fn distinct_count(points: &[Point]) -> usize {
    let mut sorted: Vec<(f64, f64)> = points.iter().map(|p| (p.x, p.y)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    sorted.dedup();
    sorted.len()
}

fn initial_seeds(points: &[Point], k: usize, seed: u64, weighted: bool) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.gen_range(0..points.len());
    let mut centroids = vec![points[first]];
    let mut nearest: Vec<f64> = points.iter().map(|p| p.distance_sq(&points[first])).collect();
    while centroids.len() < k {
        let mut pick = 0;
        for (i, &d) in nearest.iter().enumerate() {
            if d > nearest[pick] {
                pick = i;
            }
        }
        if weighted {
            let mut r = rng.gen::<f64>() * nearest.iter().sum::<f64>();
            for (i, &d) in nearest.iter().enumerate() {
                if d > 0.0 && r < d {
                    pick = i;
                    break;
                }
                r -= d;
            }
        }
        let c = points[pick];
        centroids.push(c);
        for (d, p) in nearest.iter_mut().zip(points) {
            *d = d.min(p.distance_sq(&c));
        }
    }
    centroids
}

fn nearest_centroid(p: &Point, centroids: &[Point]) -> usize {
    let mut best = 0;
    let mut best_d = p.distance_sq(&centroids[0]);
    for (j, c) in centroids.iter().enumerate().skip(1) {
        let d = p.distance_sq(c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

/// Assigns every point to its nearest centroid, then repairs empty clusters.
/// A repair moves the chosen point's centroid onto it, which is why the
/// centroids are taken mutably.
fn assign(points: &[Point], centroids: &mut [Point]) -> Vec<usize> {
    let k = centroids.len();
    let mut assignments: Vec<usize> = points.iter().map(|p| nearest_centroid(p, centroids)).collect();
    loop {
        let mut sizes = vec![0usize; k];
        for &a in &assignments {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return assignments;
        };
        let mut donor: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            if sizes[assignments[i]] < 2 {
                continue;
            }
            let d = p.distance_sq(&centroids[assignments[i]]);
            if donor.map_or(true, |(_, best)| d > best) {
                donor = Some((i, d));
            }
        }
        let (i, _) = donor.expect("k <= n leaves a cluster with a spare point");
        assignments[i] = empty;
        centroids[empty] = points[i];
    }
}

fn update(points: &[Point], assignments: &[usize], previous: &[Point]) -> Vec<Point> {
    let k = previous.len();
    let mut sums = vec![(0.0, 0.0, 0usize); k];
    for (p, &a) in points.iter().zip(assignments) {
        sums[a].0 += p.x;
        sums[a].1 += p.y;
        sums[a].2 += 1;
    }
    sums.iter()
        .zip(previous)
        .map(|(&(sx, sy, n), prev)| {
            if n == 0 {
                *prev
            } else {
                Point::new(sx / n as f64, sy / n as f64)
            }
        })
        .collect()
}

pub fn kmeans(
    points: &[Point],
    k: usize,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> Result<KMeans, KMeansError> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(KMeansError::InvalidK { k, n });
    }
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(KMeansError::InvalidTolerance(tol));
    }
    if max_iter == 0 {
        return Err(KMeansError::InvalidMaxIter);
    }
    let distinct = distinct_count(points);
    if distinct < k {
        return Err(KMeansError::TooFewDistinct { distinct, k });
    }
    let mut best: Option<KMeans> = None;
    for restart in 0..RESTARTS {
        let run = lloyd(points, k, restart_seed(seed, restart), restart > 0, tol, max_iter);
        if best.as_ref().map_or(true, |b| run.wcss() < b.wcss()) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn restart_seed(seed: u64, restart: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed.wrapping_add(restart.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One Lloyd run. Inputs are validated by [`kmeans`].
fn lloyd(points: &[Point], k: usize, seed: u64, weighted: bool, tol: f64, max_iter: usize) -> KMeans {
    let mut centroids = initial_seeds(points, k, seed, weighted);
    let mut assignments = assign(points, &mut centroids);
    let mut wcss_history = vec![wcss(points, &assignments, &centroids)];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        let moved = update(points, &assignments, &centroids);
        let shift = moved
            .iter()
            .zip(&centroids)
            .map(|(a, b)| a.distance(b))
            .fold(0.0, f64::max);
        centroids = moved;
        let next = assign(points, &mut centroids);
        wcss_history.push(wcss(points, &next, &centroids));
        iterations += 1;
        let stable = next == assignments;
        assignments = next;
        if stable && shift <= tol {
            converged = true;
            break;
        }
    }

    KMeans {
        assignments,
        centroids,
        wcss_history,
        iterations,
        converged,
    }
}
