//! Command-line interface: cluster datasets or images with k-MS, remove
//! noise, run the k-Means baseline, render label grids and time benchmark
//! sweeps.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use kms_core::baseline::{lloyd_kmeans, KMeansConfig};
use kms_core::grid::{
    cell_to_point, discretize, discretize_point, grid_from_image, BinaryGrid, GridSpec, Point2,
    PointSet,
};
use kms_core::harness::io::{
    read_bench_spec, read_label_grid, read_points_csv, read_structuring_element, write_bench_csv,
    write_label_grid, write_labels_csv, write_stats_json, StatsReport,
};
use kms_core::harness::{bench_run, summarize};
use kms_core::kms::{intrinsic_max_clusters, kms_cluster, Engine, KmsConfig};
use kms_core::morphology::{BoundaryMode, StructuringElement};
use kms_core::postprocess::{census, compact_relabel, remove_small_clusters, render_colormap};

#[derive(Parser)]
#[command(name = "kms", version, about = "k-MS morphological clustering toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a points CSV or an image into at most k clusters.
    Cluster(ClusterArgs),
    /// Erase every cluster of a label grid with tau or fewer cells.
    Denoise(DenoiseArgs),
    /// Run the k-Means baseline on a points CSV.
    Kmeans(KmeansArgs),
    /// Time k-MS and k-Means over a sweep described by a JSON spec.
    Bench(BenchArgs),
    /// Render a label grid to a PNG.
    Render(RenderArgs),
    /// Report the maximum number of clusters the input can yield.
    Components(ComponentsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Clamp,
    Wrap,
}

impl From<BoundaryArg> for BoundaryMode {
    fn from(value: BoundaryArg) -> Self {
        match value {
            BoundaryArg::Clamp => BoundaryMode::Clamp,
            BoundaryArg::Wrap => BoundaryMode::Wrap,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Seq,
    Par,
}

impl From<EngineArg> for Engine {
    fn from(value: EngineArg) -> Self {
        match value {
            EngineArg::Seq => Engine::Sequential,
            EngineArg::Par => Engine::Parallel,
        }
    }
}

#[derive(Args)]
struct InputArgs {
    /// Points CSV (header `x,y`) or a greyscale image (PNG/PGM).
    #[arg(long)]
    input: PathBuf,
    /// Precision factor for discretizing CSV points.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Darkness threshold for image inputs: pixels below it are instances.
    #[arg(long, default_value_t = 128)]
    threshold: u8,
    /// Empty border cells added on each side of the discretized grid.
    #[arg(long, default_value_t = 0)]
    pad: usize,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Maximum number of clusters.
    #[arg(long)]
    k: usize,
    /// Structuring element: `b1`, `b2`, or a path to a `dy dx value` file.
    #[arg(long, default_value = "b1")]
    se: String,
    #[arg(long, value_enum, default_value_t = BoundaryArg::Clamp)]
    boundary: BoundaryArg,
    /// Cap on the growth factor; defaults to max(width, height).
    #[arg(long)]
    delta_max: Option<u32>,
    #[arg(long, value_enum, default_value_t = EngineArg::Seq)]
    engine: EngineArg,
    /// Output prefix; writes <out>.labels.csv, <out>.labels.pgm (+ .json
    /// sidecar), <out>.png and <out>.stats.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DenoiseArgs {
    /// Label grid PGM written by `cluster` (sidecar JSON expected next to it).
    #[arg(long)]
    input: PathBuf,
    /// Clusters with this many cells or fewer are erased.
    #[arg(long)]
    tau: usize,
    /// Output prefix; writes <out>.labels.pgm (+ sidecar) and <out>.png.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct KmeansArgs {
    /// Points CSV (header `x,y`).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    k: usize,
    /// Fraction of instances allowed to change membership at convergence.
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    max_iterations: usize,
    #[arg(long, value_enum, default_value_t = EngineArg::Seq)]
    engine: EngineArg,
    /// Output prefix; writes <out>.assignments.csv and <out>.stats.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Sweep description (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Records CSV to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ComponentsArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "b1")]
    se: String,
    #[arg(long, value_enum, default_value_t = BoundaryArg::Clamp)]
    boundary: BoundaryArg,
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Cluster(args) => cluster(args),
        Command::Denoise(args) => denoise(args),
        Command::Kmeans(args) => kmeans(args),
        Command::Bench(args) => bench(args),
        Command::Render(args) => render(args),
        Command::Components(args) => components(args),
    }
}

struct LoadedInput {
    grid: BinaryGrid,
    /// Original instances when the input was a CSV.
    points: Option<PointSet>,
    /// Spec before padding, for mapping instances to cells.
    base_spec: GridSpec,
    pad: usize,
}

fn load_input(args: &InputArgs) -> Result<LoadedInput> {
    let is_csv = args
        .input
        .extension()
        .map(|e| e.eq_ignore_ascii_case("csv"))
        .unwrap_or(false);
    let (grid, points) = if is_csv {
        let points = read_points_csv(&args.input)
            .with_context(|| format!("reading {}", args.input.display()))?;
        let grid = discretize(&points, args.gamma)?;
        (grid, Some(points))
    } else {
        let image = image::open(&args.input)
            .with_context(|| format!("reading {}", args.input.display()))?
            .to_luma8();
        let (width, height) = image.dimensions();
        let grid = grid_from_image(image.as_raw(), width as usize, height as usize, args.threshold)?;
        (grid, None)
    };
    let base_spec = grid.spec().clone();
    let grid = grid.padded(args.pad)?;
    Ok(LoadedInput { grid, points, base_spec, pad: args.pad })
}

fn parse_se(name: &str) -> Result<StructuringElement> {
    match name {
        "b1" => Ok(StructuringElement::b1()),
        "b2" => Ok(StructuringElement::b2()),
        path => read_structuring_element(Path::new(path))
            .with_context(|| format!("loading structuring element {path}")),
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{}{suffix}", prefix.display()))
}

fn cluster(args: ClusterArgs) -> Result<()> {
    let loaded = load_input(&args.input)?;
    let se = parse_se(&args.se)?;
    let mut config = KmsConfig::new(args.k, se)
        .with_boundary(args.boundary.into())
        .with_engine(args.engine.into());
    if let Some(delta_max) = args.delta_max {
        config = config.with_delta_max(delta_max);
    }

    let start = Instant::now();
    let mut result = kms_cluster(&loaded.grid, &config)?;
    let wall_time_s = start.elapsed().as_secs_f64();

    compact_relabel(&mut result.labels);
    let spec = result.labels.spec().clone();

    // One row per instance for CSV inputs, one per foreground cell for
    // images; coordinates are the cell-center preimages.
    let rows: Vec<(Point2, i32)> = match &loaded.points {
        Some(points) => points
            .points()
            .iter()
            .map(|p| {
                let (row, col) = discretize_point(
                    *p,
                    loaded.base_spec.gamma,
                    loaded.base_spec.min_x,
                    loaded.base_spec.min_y,
                );
                let (row, col) = (row + loaded.pad, col + loaded.pad);
                Ok((cell_to_point(row, col, &spec)?, result.labels.get(row, col).value()))
            })
            .collect::<Result<_, kms_core::Error>>()?,
        None => loaded
            .grid
            .foreground_indices()
            .iter()
            .map(|&idx| {
                let (row, col) = (idx / spec.width, idx % spec.width);
                Ok((cell_to_point(row, col, &spec)?, result.labels.get(row, col).value()))
            })
            .collect::<Result<_, kms_core::Error>>()?,
    };
    write_labels_csv(&with_suffix(&args.out, ".labels.csv"), &rows)?;
    write_label_grid(&with_suffix(&args.out, ".labels.pgm"), &result.labels)?;
    render_colormap(&result.labels).save(with_suffix(&args.out, ".png"))?;

    let stats = StatsReport {
        cluster_count: result.cluster_count(),
        converged: result.converged,
        passes: result.passes,
        delta_max_reached: !result.converged,
        wall_time_s,
        k: args.k,
        gamma: loaded.base_spec.gamma,
        boundary: config.boundary,
        engine: config.engine,
    };
    write_stats_json(&with_suffix(&args.out, ".stats.json"), &stats)?;
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(())
}

fn denoise(args: DenoiseArgs) -> Result<()> {
    let mut grid = read_label_grid(&args.input)?;
    let before = census(&grid);
    let removed = remove_small_clusters(&mut grid, args.tau);
    let after = census(&grid);
    write_label_grid(&with_suffix(&args.out, ".labels.pgm"), &grid)?;
    render_colormap(&grid).save(with_suffix(&args.out, ".png"))?;
    println!(
        "{}",
        serde_json::json!({
            "tau": args.tau,
            "removed_clusters": removed.len(),
            "remaining_clusters": after.len(),
            "removed_cells": before.total_foreground() - after.total_foreground(),
            "remaining_cells": after.total_foreground(),
        })
    );
    Ok(())
}

fn kmeans(args: KmeansArgs) -> Result<()> {
    let points = read_points_csv(&args.input)?;
    let config = KMeansConfig::new(args.k)
        .with_threshold(args.threshold)
        .with_max_iterations(args.max_iterations)
        .with_seed(args.seed)
        .with_engine(args.engine.into());
    let start = Instant::now();
    let result = lloyd_kmeans(&points, &config)?;
    let wall_time_s = start.elapsed().as_secs_f64();

    let rows: Vec<(Point2, i32)> = points
        .points()
        .iter()
        .zip(&result.assignments)
        .map(|(p, &m)| (*p, m as i32))
        .collect();
    write_labels_csv(&with_suffix(&args.out, ".assignments.csv"), &rows)?;

    let stats = serde_json::json!({
        "k": args.k,
        "error": result.error,
        "iterations": result.iterations,
        "converged": result.converged,
        "threshold": args.threshold,
        "seed": args.seed,
        "wall_time_s": wall_time_s,
    });
    std::fs::write(
        with_suffix(&args.out, ".stats.json"),
        serde_json::to_vec_pretty(&stats)?,
    )?;
    println!("{stats:#}");
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let spec = read_bench_spec(&args.spec)?;
    if spec.repetitions < 3 {
        eprintln!("warning: fewer than 3 repetitions; timings will be noisy");
    }
    let records = bench_run(&spec)?;
    write_bench_csv(&args.out, &records)?;
    for summary in summarize(&records) {
        println!(
            "{} {} {}x{} L={} k={} median={:.4}s clusters={} converged={}",
            summary.algorithm,
            summary.engine,
            summary.width,
            summary.height,
            summary.instances,
            summary.k,
            summary.median_wall_time_s,
            summary.cluster_count,
            summary.converged
        );
    }
    Ok(())
}

fn render(args: RenderArgs) -> Result<()> {
    let grid = read_label_grid(&args.input)?;
    render_colormap(&grid).save(&args.out)?;
    Ok(())
}

fn components(args: ComponentsArgs) -> Result<()> {
    let loaded = load_input(&args.input)?;
    if loaded.grid.foreground_count() == 0 {
        bail!("input has no foreground cells");
    }
    let se = parse_se(&args.se)?;
    let count = intrinsic_max_clusters(&loaded.grid, &se, args.boundary.into());
    println!("{count}");
    Ok(())
}
