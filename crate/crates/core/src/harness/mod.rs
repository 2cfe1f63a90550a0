//! Benchmark harness: synthetic dataset generation and the timing sweep
//! comparing k-MS against the k-Means baseline, plus the file formats the
//! command line speaks (see [`io`]).

pub mod io;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baseline::{lloyd_kmeans, KMeansConfig};
use crate::error::{invalid_input, Result};
use crate::grid::{cell_to_point, BinaryGrid, GridSpec, PointSet};
use crate::kms::{kms_cluster, Engine, KmsConfig};
use crate::morphology::StructuringElement;

/// One grid size of a benchmark sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchGrid {
    pub width: usize,
    pub height: usize,
    /// Number of instances L placed at random distinct cells.
    pub instances: usize,
}

/// Algorithm/engine combinations a sweep can time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BenchAlgorithm {
    #[serde(rename = "kms-seq")]
    KmsSeq,
    #[serde(rename = "kms-par")]
    KmsPar,
    #[serde(rename = "kmeans-seq")]
    KmeansSeq,
    #[serde(rename = "kmeans-par")]
    KmeansPar,
}

impl BenchAlgorithm {
    pub fn algorithm(self) -> &'static str {
        match self {
            BenchAlgorithm::KmsSeq | BenchAlgorithm::KmsPar => "kms",
            BenchAlgorithm::KmeansSeq | BenchAlgorithm::KmeansPar => "kmeans",
        }
    }

    pub fn engine(self) -> Engine {
        match self {
            BenchAlgorithm::KmsSeq | BenchAlgorithm::KmeansSeq => Engine::Sequential,
            BenchAlgorithm::KmsPar | BenchAlgorithm::KmeansPar => Engine::Parallel,
        }
    }
}

fn default_kmeans_threshold() -> f64 {
    1e-12
}

fn default_kmeans_max_iterations() -> usize {
    300
}

/// A benchmark sweep: grids x k values x algorithms, repeated. Use at least
/// three repetitions when the timings matter; medians are taken per cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub grids: Vec<BenchGrid>,
    pub ks: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
    pub algorithms: Vec<BenchAlgorithm>,
    /// Membership-change threshold handed to the k-Means baseline; the
    /// default is low enough that only full stability stops it.
    #[serde(default = "default_kmeans_threshold")]
    pub kmeans_threshold: f64,
    #[serde(default = "default_kmeans_max_iterations")]
    pub kmeans_max_iterations: usize,
}

impl BenchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grids.is_empty() || self.ks.is_empty() || self.algorithms.is_empty() {
            return Err(invalid_input("bench spec needs grids, ks and algorithms"));
        }
        if self.repetitions < 1 {
            return Err(invalid_input("bench spec needs at least one repetition"));
        }
        for g in &self.grids {
            if g.width == 0 || g.height == 0 {
                return Err(invalid_input("bench grid dimensions must be positive"));
            }
        }
        Ok(())
    }
}

/// One timed run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub engine: String,
    pub width: usize,
    pub height: usize,
    pub instances: usize,
    pub k: usize,
    pub repetition: usize,
    pub wall_time_s: f64,
    pub cluster_count: usize,
    pub converged: bool,
}

/// Median wall time of the repetitions of one sweep cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchSummary {
    pub algorithm: String,
    pub engine: String,
    pub width: usize,
    pub height: usize,
    pub instances: usize,
    pub k: usize,
    pub median_wall_time_s: f64,
    pub cluster_count: usize,
    pub converged: bool,
}

/// Exactly `instances` distinct cells set true, drawn uniformly without
/// replacement; the same seed always produces the same grid.
pub fn generate_random_instances(
    width: usize,
    height: usize,
    instances: usize,
    seed: u64,
) -> Result<BinaryGrid> {
    let spec = GridSpec::unit(width, height)?;
    let capacity = spec.cell_count();
    if instances > capacity {
        return Err(invalid_input(format!(
            "cannot place {instances} instances on {capacity} cells"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = vec![false; capacity];
    for idx in rand::seq::index::sample(&mut rng, capacity, instances) {
        cells[idx] = true;
    }
    BinaryGrid::from_cells(spec, cells)
}

/// Runs the sweep, one record per (algorithm, grid, k, repetition). Wall
/// time covers the clustering call only; dataset generation is excluded.
/// A run that fails or does not converge is recorded with `converged =
/// false` rather than aborting the sweep.
pub fn bench_run(spec: &BenchSpec) -> Result<Vec<RunRecord>> {
    spec.validate()?;
    let mut records = Vec::new();
    for grid_spec in &spec.grids {
        let grid = generate_random_instances(
            grid_spec.width,
            grid_spec.height,
            grid_spec.instances,
            spec.seed,
        )?;
        let points: PointSet = grid
            .foreground_indices()
            .iter()
            .map(|&idx| {
                cell_to_point(idx / grid.width(), idx % grid.width(), grid.spec())
                    .expect("foreground index in range")
            })
            .collect();
        for &k in &spec.ks {
            for &algorithm in &spec.algorithms {
                for repetition in 0..spec.repetitions {
                    let record =
                        run_one(spec, grid_spec, &grid, &points, k, algorithm, repetition);
                    records.push(record);
                }
            }
        }
    }
    Ok(records)
}

fn run_one(
    spec: &BenchSpec,
    grid_spec: &BenchGrid,
    grid: &BinaryGrid,
    points: &PointSet,
    k: usize,
    algorithm: BenchAlgorithm,
    repetition: usize,
) -> RunRecord {
    let engine = algorithm.engine();
    let start = Instant::now();
    let (cluster_count, converged) = match algorithm {
        BenchAlgorithm::KmsSeq | BenchAlgorithm::KmsPar => {
            let config = KmsConfig::new(k, StructuringElement::b1()).with_engine(engine);
            match kms_cluster(grid, &config) {
                Ok(result) => (result.cluster_count(), result.converged),
                Err(_) => (0, false),
            }
        }
        BenchAlgorithm::KmeansSeq | BenchAlgorithm::KmeansPar => {
            let config = KMeansConfig::new(k)
                .with_threshold(spec.kmeans_threshold)
                .with_max_iterations(spec.kmeans_max_iterations)
                .with_seed(spec.seed)
                .with_engine(engine);
            match lloyd_kmeans(points, &config) {
                Ok(result) => {
                    let mut distinct = result.assignments.clone();
                    distinct.sort_unstable();
                    distinct.dedup();
                    (distinct.len(), result.converged)
                }
                Err(_) => (0, false),
            }
        }
    };
    let wall_time_s = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
    RunRecord {
        algorithm: algorithm.algorithm().to_string(),
        engine: engine.to_string(),
        width: grid_spec.width,
        height: grid_spec.height,
        instances: grid_spec.instances,
        k,
        repetition,
        wall_time_s,
        cluster_count,
        converged,
    }
}

/// Collapses repetition records into per-cell medians, preserving first-seen
/// cell order.
pub fn summarize(records: &[RunRecord]) -> Vec<BenchSummary> {
    let mut order: Vec<(String, String, usize, usize, usize, usize)> = Vec::new();
    let mut groups: std::collections::HashMap<_, Vec<&RunRecord>> = std::collections::HashMap::new();
    for r in records {
        let key =
            (r.algorithm.clone(), r.engine.clone(), r.width, r.height, r.instances, r.k);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let group = &groups[&key];
            let mut times: Vec<f64> = group.iter().map(|r| r.wall_time_s).collect();
            times.sort_by(f64::total_cmp);
            let median = times[times.len() / 2];
            let first = group[0];
            BenchSummary {
                algorithm: key.0,
                engine: key.1,
                width: key.2,
                height: key.3,
                instances: key.4,
                k: key.5,
                median_wall_time_s: median,
                cluster_count: first.cluster_count,
                converged: group.iter().all(|r| r.converged),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturated_grid_is_all_true() {
        let grid = generate_random_instances(4, 3, 12, 9).unwrap();
        assert_eq!(grid.foreground_count(), 12);
    }

    #[test]
    fn single_instance_lands_somewhere() {
        let grid = generate_random_instances(8, 8, 1, 3).unwrap();
        assert_eq!(grid.foreground_count(), 1);
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let a = generate_random_instances(16, 16, 40, 1234).unwrap();
        let b = generate_random_instances(16, 16, 40, 1234).unwrap();
        assert_eq!(a, b);
        let c = generate_random_instances(16, 16, 40, 1235).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generation_rejects_overflow() {
        assert!(generate_random_instances(2, 2, 5, 0).is_err());
    }

    fn tiny_spec() -> BenchSpec {
        BenchSpec {
            grids: vec![BenchGrid { width: 16, height: 16, instances: 30 }],
            ks: vec![4],
            repetitions: 1,
            seed: 7,
            algorithms: vec![
                BenchAlgorithm::KmsSeq,
                BenchAlgorithm::KmsPar,
                BenchAlgorithm::KmeansSeq,
                BenchAlgorithm::KmeansPar,
            ],
            kmeans_threshold: 0.0,
            kmeans_max_iterations: 50,
        }
    }

    #[test]
    fn one_cell_one_repetition_yields_one_record_per_algorithm() {
        let records = bench_run(&tiny_spec()).unwrap();
        assert_eq!(records.len(), 4);
        assert!(records.iter().all(|r| r.wall_time_s > 0.0));
    }

    #[test]
    fn cluster_counts_are_stable_across_repetitions() {
        let mut spec = tiny_spec();
        spec.repetitions = 3;
        let records = bench_run(&spec).unwrap();
        for pair in records.chunks(3) {
            assert!(pair.iter().all(|r| r.cluster_count == pair[0].cluster_count));
        }
        let summaries = summarize(&records);
        assert_eq!(summaries.len(), 4);
    }

    #[test]
    fn spec_round_trips_through_json_with_defaults() {
        let json = r#"{
            "grids": [{"width": 512, "height": 512, "instances": 36529}],
            "ks": [2, 4, 8],
            "repetitions": 3,
            "seed": 42,
            "algorithms": ["kms-seq", "kmeans-par"]
        }"#;
        let spec: BenchSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.kmeans_threshold, 1e-12);
        assert_eq!(spec.kmeans_max_iterations, 300);
        assert_eq!(spec.algorithms, vec![BenchAlgorithm::KmsSeq, BenchAlgorithm::KmeansPar]);
        let back = serde_json::to_string(&spec).unwrap();
        let again: BenchSpec = serde_json::from_str(&back).unwrap();
        assert_eq!(spec, again);
    }
}
