//! Lloyd-style k-Means baseline with the membership-change convergence
//! criterion, in sequential and parallel variants.
//!
//! The parallel variant parallelizes the assignment step only. Points are
//! processed in fixed-size chunks and the per-chunk centroid sums are folded
//! in chunk order, so sequential and parallel runs produce bit-identical
//! results for the same seed regardless of worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid_input, Result};
use crate::grid::{Point2, PointSet};
use crate::kms::Engine;

/// Chunk length for the assignment step; fixed so the reduction order never
/// depends on the worker count.
const ASSIGN_CHUNK: usize = 4096;

#[derive(Clone, Debug)]
pub struct KMeansConfig {
    pub k: usize,
    /// Fraction of instances allowed to change membership at convergence.
    /// Zero means the run only stops once no instance changes at all.
    pub threshold: f64,
    pub max_iterations: usize,
    pub rng_seed: u64,
    pub engine: Engine,
}

impl KMeansConfig {
    pub fn new(k: usize) -> Self {
        Self { k, threshold: 0.0, max_iterations: 1000, rng_seed: 0, engine: Engine::Sequential }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_seed(mut self, rng_seed: u64) -> Self {
        self.rng_seed = rng_seed;
        self
    }

    pub fn with_engine(mut self, engine: Engine) -> Self {
        self.engine = engine;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    pub centroids: Vec<Point2>,
    pub assignments: Vec<usize>,
    /// Sum of squared Euclidean distances from each instance to its centroid.
    pub error: f64,
    pub iterations: usize,
    /// True when the run stopped on the membership criterion rather than the
    /// iteration cap.
    pub converged: bool,
    /// Error after each iteration; never increases between entries.
    pub error_trace: Vec<f64>,
}

/// The clustering error: sum over instances of the squared Euclidean
/// distance to the assigned centroid.
pub fn clustering_error(
    points: &PointSet,
    centroids: &[Point2],
    assignments: &[usize],
) -> Result<f64> {
    if assignments.len() != points.len() {
        return Err(invalid_input("one assignment per instance required"));
    }
    let mut total = 0.0;
    for (p, &m) in points.points().iter().zip(assignments) {
        let c = centroids
            .get(m)
            .ok_or_else(|| invalid_input(format!("assignment {m} out of range")))?;
        total += squared_distance(*p, *c);
    }
    Ok(total)
}

#[inline]
fn squared_distance(a: Point2, b: Point2) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    dx * dx + dy * dy
}

/// Lloyd's algorithm: seeded uniform sampling of `k` distinct instances as
/// initial centroids, then alternating nearest-centroid assignment and
/// mean updates until fewer than `threshold * len` instances change
/// membership (or none at all), or the iteration cap is reached.
pub fn lloyd_kmeans(points: &PointSet, config: &KMeansConfig) -> Result<KMeansResult> {
    let n = points.len();
    if config.k < 1 {
        return Err(invalid_input("k must be at least 1"));
    }
    if config.k > n {
        return Err(invalid_input(format!(
            "k = {} exceeds the number of instances ({n})",
            config.k
        )));
    }
    if !(config.threshold.is_finite() && (0.0..1.0).contains(&config.threshold)) {
        return Err(invalid_input("threshold must lie in [0, 1)"));
    }
    if config.max_iterations < 1 {
        return Err(invalid_input("max_iterations must be at least 1"));
    }
    if points.points().iter().any(|p| !p.is_finite()) {
        return Err(invalid_input("point coordinates must be finite"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut centroids: Vec<Point2> = rand::seq::index::sample(&mut rng, n, config.k)
        .into_iter()
        .map(|i| points.points()[i])
        .collect();

    let mut assignments = vec![usize::MAX; n];
    let mut error_trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < config.max_iterations {
        iterations += 1;
        let sweep = assign_step(points, &centroids, &mut assignments, config.engine);

        let mut counts = vec![0usize; config.k];
        for ((sx, sy, c), (count, centroid)) in
            sweep.sums.iter().zip(counts.iter_mut().zip(centroids.iter_mut()))
        {
            *count = *c;
            if *c > 0 {
                *centroid = Point2::new(sx / *c as f64, sy / *c as f64);
            }
        }
        if counts.contains(&0) {
            repair_empty_clusters(points, &mut centroids, &mut assignments, &mut counts);
        }

        error_trace.push(clustering_error(points, &centroids, &assignments)?);

        let fraction = sweep.changed as f64 / n as f64;
        if sweep.changed == 0 || fraction < config.threshold {
            converged = true;
            break;
        }
    }

    let error = *error_trace.last().expect("at least one iteration runs");
    Ok(KMeansResult { centroids, assignments, error, iterations, converged, error_trace })
}

struct SweepOutcome {
    changed: usize,
    /// Per-centroid (sum_x, sum_y, member count).
    sums: Vec<(f64, f64, usize)>,
}

fn assign_step(
    points: &PointSet,
    centroids: &[Point2],
    assignments: &mut [usize],
    engine: Engine,
) -> SweepOutcome {
    let chunks: Vec<SweepOutcome> = match engine {
        Engine::Sequential => points
            .points()
            .chunks(ASSIGN_CHUNK)
            .zip(assignments.chunks_mut(ASSIGN_CHUNK))
            .map(|(pts, asg)| assign_chunk(pts, asg, centroids))
            .collect(),
        Engine::Parallel => points
            .points()
            .par_chunks(ASSIGN_CHUNK)
            .zip(assignments.par_chunks_mut(ASSIGN_CHUNK))
            .map(|(pts, asg)| assign_chunk(pts, asg, centroids))
            .collect(),
    };
    let mut total = SweepOutcome { changed: 0, sums: vec![(0.0, 0.0, 0); centroids.len()] };
    for chunk in chunks {
        total.changed += chunk.changed;
        for (acc, part) in total.sums.iter_mut().zip(chunk.sums) {
            acc.0 += part.0;
            acc.1 += part.1;
            acc.2 += part.2;
        }
    }
    total
}

fn assign_chunk(points: &[Point2], assignments: &mut [usize], centroids: &[Point2]) -> SweepOutcome {
    let mut changed = 0;
    let mut sums = vec![(0.0, 0.0, 0usize); centroids.len()];
    for (p, slot) in points.iter().zip(assignments.iter_mut()) {
        let mut best = 0usize;
        let mut best_dist = f64::INFINITY;
        for (m, c) in centroids.iter().enumerate() {
            let d = squared_distance(*p, *c);
            if d < best_dist {
                best_dist = d;
                best = m;
            }
        }
        if *slot != best {
            changed += 1;
            *slot = best;
        }
        sums[best].0 += p.x;
        sums[best].1 += p.y;
        sums[best].2 += 1;
    }
    SweepOutcome { changed, sums }
}

/// A centroid that lost all members moves onto the instance currently
/// farthest from its own centroid (skipping singleton donors) and adopts it;
/// means are then recomputed so every centroid is the mean of its members.
fn repair_empty_clusters(
    points: &PointSet,
    centroids: &mut [Point2],
    assignments: &mut [usize],
    counts: &mut [usize],
) {
    let k = centroids.len();
    for m in 0..k {
        if counts[m] > 0 {
            continue;
        }
        let mut farthest: Option<(usize, f64)> = None;
        for (i, p) in points.points().iter().enumerate() {
            let owner = assignments[i];
            if counts[owner] <= 1 {
                continue;
            }
            let d = squared_distance(*p, centroids[owner]);
            if farthest.is_none_or(|(_, best)| d > best) {
                farthest = Some((i, d));
            }
        }
        if let Some((i, _)) = farthest {
            counts[assignments[i]] -= 1;
            assignments[i] = m;
            counts[m] = 1;
            centroids[m] = points.points()[i];
        }
    }
    // Recompute means so the invariant holds exactly after a repair.
    let mut sums = vec![(0.0, 0.0, 0usize); k];
    for (p, &m) in points.points().iter().zip(assignments.iter()) {
        sums[m].0 += p.x;
        sums[m].1 += p.y;
        sums[m].2 += 1;
    }
    for (centroid, (sx, sy, c)) in centroids.iter_mut().zip(sums) {
        if c > 0 {
            *centroid = Point2::new(sx / c as f64, sy / c as f64);
        }
    }
}
