//! C ABI for the k-MS clustering toolkit.
//!
//! Every object crosses the boundary as an opaque handle created and freed
//! here; every fallible call returns a [`KmsStatus`] and writes its result
//! through an out-pointer. Label buffers are row-major `int32_t` with `-1`
//! for background, matching the core representation.

use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use kms_core::grid::{discretize, grid_from_image, BinaryGrid, Point2, PointSet};
use kms_core::harness::generate_random_instances;
use kms_core::kms::{intrinsic_max_clusters, kms_cluster, Engine, KmsConfig, KmsResult};
use kms_core::morphology::{BoundaryMode, SeOffset, StructuringElement};
use kms_core::postprocess::remove_small_clusters;

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum KmsStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Arguments violated a precondition (bad k, empty grid, bad element...).
    InvalidInput = 2,
    /// A caller-provided buffer does not have the required length.
    BufferSize = 3,
    /// An unexpected internal failure; the operation did not complete.
    Internal = 4,
}

/// Built-in structuring elements.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum KmsSeKind {
    /// Flat 3x3 neighborhood including the center.
    B1 = 0,
    /// Flat cross with diagonal reach pushed to distance 10.
    B2 = 1,
}

/// Grid edge handling.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum KmsBoundary {
    /// Out-of-range neighbors are dropped.
    Clamp = 0,
    /// Neighbor coordinates fold modulo the grid dimensions.
    Wrap = 1,
}

/// Execution engine.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum KmsEngine {
    Sequential = 0,
    Parallel = 1,
}

/// Clustering parameters. `delta_max = 0` selects the default guard,
/// `max(width, height)` of the grid.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct KmsOptions {
    pub k: u32,
    pub se: KmsSeKind,
    pub boundary: KmsBoundary,
    pub engine: KmsEngine,
    pub delta_max: u32,
}

/// Opaque occupancy grid handle.
pub struct KmsGrid {
    inner: BinaryGrid,
}

/// Opaque clustering-result handle.
pub struct KmsClustering {
    inner: KmsResult,
}

impl From<KmsBoundary> for BoundaryMode {
    fn from(value: KmsBoundary) -> Self {
        match value {
            KmsBoundary::Clamp => BoundaryMode::Clamp,
            KmsBoundary::Wrap => BoundaryMode::Wrap,
        }
    }
}

impl From<KmsEngine> for Engine {
    fn from(value: KmsEngine) -> Self {
        match value {
            KmsEngine::Sequential => Engine::Sequential,
            KmsEngine::Parallel => Engine::Parallel,
        }
    }
}

impl From<KmsSeKind> for StructuringElement {
    fn from(value: KmsSeKind) -> Self {
        match value {
            KmsSeKind::B1 => StructuringElement::b1(),
            KmsSeKind::B2 => StructuringElement::b2(),
        }
    }
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn kms_status_message(status: KmsStatus) -> *const c_char {
    let message: &'static [u8] = match status {
        KmsStatus::Ok => b"ok\0",
        KmsStatus::NullPointer => b"null pointer argument\0",
        KmsStatus::InvalidInput => b"invalid input\0",
        KmsStatus::BufferSize => b"buffer has the wrong length\0",
        KmsStatus::Internal => b"internal error\0",
    };
    message.as_ptr().cast()
}

fn emit<T>(out: *mut *mut T, value: T) -> KmsStatus {
    if out.is_null() {
        return KmsStatus::NullPointer;
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    KmsStatus::Ok
}

/// Builds a grid by discretizing `len` points given as parallel x/y arrays.
///
/// # Safety
/// `xs` and `ys` must point to `len` readable doubles; `out` must be a valid
/// pointer to receive the handle. The handle must be freed with
/// [`kms_grid_free`].
#[no_mangle]
pub unsafe extern "C" fn kms_grid_from_points(
    xs: *const f64,
    ys: *const f64,
    len: usize,
    gamma: f64,
    out: *mut *mut KmsGrid,
) -> KmsStatus {
    if xs.is_null() || ys.is_null() || out.is_null() {
        return KmsStatus::NullPointer;
    }
    let xs = std::slice::from_raw_parts(xs, len);
    let ys = std::slice::from_raw_parts(ys, len);
    let points: PointSet =
        xs.iter().zip(ys).map(|(&x, &y)| Point2::new(x, y)).collect();
    match discretize(&points, gamma) {
        Ok(grid) => emit(out, KmsGrid { inner: grid }),
        Err(_) => KmsStatus::InvalidInput,
    }
}

/// Builds a grid from 8-bit grey pixels (row-major, `width * height` bytes);
/// a pixel strictly below `threshold` becomes an instance.
///
/// # Safety
/// `pixels` must point to `width * height` readable bytes; `out` must be
/// valid. Free the handle with [`kms_grid_free`].
#[no_mangle]
pub unsafe extern "C" fn kms_grid_from_pixels(
    pixels: *const u8,
    width: u32,
    height: u32,
    threshold: u8,
    out: *mut *mut KmsGrid,
) -> KmsStatus {
    if pixels.is_null() || out.is_null() {
        return KmsStatus::NullPointer;
    }
    let len = width as usize * height as usize;
    let pixels = std::slice::from_raw_parts(pixels, len);
    match grid_from_image(pixels, width as usize, height as usize, threshold) {
        Ok(grid) => emit(out, KmsGrid { inner: grid }),
        Err(_) => KmsStatus::InvalidInput,
    }
}

/// Builds a grid with exactly `instances` distinct random cells set,
/// deterministic per `seed`.
///
/// # Safety
/// `out` must be valid. Free the handle with [`kms_grid_free`].
#[no_mangle]
pub unsafe extern "C" fn kms_grid_random(
    width: u32,
    height: u32,
    instances: u64,
    seed: u64,
    out: *mut *mut KmsGrid,
) -> KmsStatus {
    if out.is_null() {
        return KmsStatus::NullPointer;
    }
    match generate_random_instances(width as usize, height as usize, instances as usize, seed) {
        Ok(grid) => emit(out, KmsGrid { inner: grid }),
        Err(_) => KmsStatus::InvalidInput,
    }
}

/// Grid width in cells; 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn kms_grid_width(grid: *const KmsGrid) -> u32 {
    unsafe { grid.as_ref() }.map_or(0, |g| g.inner.width() as u32)
}

/// Grid height in cells; 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn kms_grid_height(grid: *const KmsGrid) -> u32 {
    unsafe { grid.as_ref() }.map_or(0, |g| g.inner.height() as u32)
}

/// Number of instance cells; 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn kms_grid_foreground_count(grid: *const KmsGrid) -> u64 {
    unsafe { grid.as_ref() }.map_or(0, |g| g.inner.foreground_count() as u64)
}

/// Releases a grid handle. Null is ignored.
///
/// # Safety
/// `grid` must be a handle returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kms_grid_free(grid: *mut KmsGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

fn run_cluster(
    grid: &KmsGrid,
    options: &KmsOptions,
    se: StructuringElement,
) -> Result<KmsResult, KmsStatus> {
    let mut config = KmsConfig::new(options.k as usize, se)
        .with_boundary(options.boundary.into())
        .with_engine(options.engine.into());
    if options.delta_max > 0 {
        config = config.with_delta_max(options.delta_max);
    }
    let outcome = catch_unwind(AssertUnwindSafe(|| kms_cluster(&grid.inner, &config)));
    match outcome {
        Ok(Ok(result)) => Ok(result),
        Ok(Err(_)) => Err(KmsStatus::InvalidInput),
        Err(_) => Err(KmsStatus::Internal),
    }
}

/// Clusters a grid with a built-in structuring element.
///
/// # Safety
/// `grid` must be a live grid handle; `options` and `out` must be valid
/// pointers. Free the result with [`kms_clustering_free`].
#[no_mangle]
pub unsafe extern "C" fn kms_cluster_run(
    grid: *const KmsGrid,
    options: *const KmsOptions,
    out: *mut *mut KmsClustering,
) -> KmsStatus {
    let (Some(grid), Some(options)) = (grid.as_ref(), options.as_ref()) else {
        return KmsStatus::NullPointer;
    };
    if out.is_null() {
        return KmsStatus::NullPointer;
    }
    match run_cluster(grid, options, options.se.into()) {
        Ok(result) => emit(out, KmsClustering { inner: result }),
        Err(status) => status,
    }
}

/// Clusters a grid with a caller-supplied flat structuring element given as
/// `offset_count` (dy, dx) pairs. The element must contain the origin and
/// reach in all four directions.
///
/// # Safety
/// `offsets` must point to `2 * offset_count` readable `int32_t`; the other
/// arguments follow [`kms_cluster_run`].
#[no_mangle]
pub unsafe extern "C" fn kms_cluster_run_custom(
    grid: *const KmsGrid,
    options: *const KmsOptions,
    offsets: *const i32,
    offset_count: usize,
    out: *mut *mut KmsClustering,
) -> KmsStatus {
    let (Some(grid), Some(options)) = (grid.as_ref(), options.as_ref()) else {
        return KmsStatus::NullPointer;
    };
    if offsets.is_null() || out.is_null() {
        return KmsStatus::NullPointer;
    }
    let raw = std::slice::from_raw_parts(offsets, offset_count * 2);
    let entries: Vec<SeOffset> =
        raw.chunks_exact(2).map(|pair| SeOffset::flat(pair[0], pair[1])).collect();
    let se = match StructuringElement::new(entries) {
        Ok(se) => se,
        Err(_) => return KmsStatus::InvalidInput,
    };
    match run_cluster(grid, options, se) {
        Ok(result) => emit(out, KmsClustering { inner: result }),
        Err(status) => status,
    }
}

/// Number of clusters in the result; 0 for a null handle.
///
/// # Safety
/// `clustering` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn kms_clustering_cluster_count(clustering: *const KmsClustering) -> u32 {
    unsafe { clustering.as_ref() }.map_or(0, |c| c.inner.cluster_count() as u32)
}

/// Whether the run converged (false when the delta guard tripped).
///
/// # Safety
/// `clustering` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn kms_clustering_converged(clustering: *const KmsClustering) -> bool {
    unsafe { clustering.as_ref() }.is_some_and(|c| c.inner.converged)
}

/// Number of sweeps the run executed; 0 for a null handle.
///
/// # Safety
/// `clustering` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn kms_clustering_passes(clustering: *const KmsClustering) -> u64 {
    unsafe { clustering.as_ref() }.map_or(0, |c| c.inner.passes as u64)
}

/// Grid width of the result; 0 for a null handle.
///
/// # Safety
/// `clustering` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn kms_clustering_width(clustering: *const KmsClustering) -> u32 {
    unsafe { clustering.as_ref() }.map_or(0, |c| c.inner.labels.width() as u32)
}

/// Grid height of the result; 0 for a null handle.
///
/// # Safety
/// `clustering` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn kms_clustering_height(clustering: *const KmsClustering) -> u32 {
    unsafe { clustering.as_ref() }.map_or(0, |c| c.inner.labels.height() as u32)
}

/// Length of the delta history (one entry per pass).
///
/// # Safety
/// `clustering` must be null or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn kms_clustering_delta_history_len(clustering: *const KmsClustering) -> usize {
    unsafe { clustering.as_ref() }.map_or(0, |c| c.inner.delta_history.len())
}

/// Copies the delta history into `buffer`.
///
/// # Safety
/// `buffer` must point to at least `len` writable `uint32_t`, where `len`
/// is [`kms_clustering_delta_history_len`].
#[no_mangle]
pub unsafe extern "C" fn kms_clustering_copy_delta_history(
    clustering: *const KmsClustering,
    buffer: *mut u32,
    len: usize,
) -> KmsStatus {
    let Some(clustering) = clustering.as_ref() else {
        return KmsStatus::NullPointer;
    };
    if buffer.is_null() {
        return KmsStatus::NullPointer;
    }
    if len != clustering.inner.delta_history.len() {
        return KmsStatus::BufferSize;
    }
    std::slice::from_raw_parts_mut(buffer, len).copy_from_slice(&clustering.inner.delta_history);
    KmsStatus::Ok
}

/// Copies the final labels row-major into `buffer` (`-1` is background).
///
/// # Safety
/// `buffer` must point to `len` writable `int32_t`, where `len` is exactly
/// `width * height` of the result.
#[no_mangle]
pub unsafe extern "C" fn kms_clustering_copy_labels(
    clustering: *const KmsClustering,
    buffer: *mut i32,
    len: usize,
) -> KmsStatus {
    let Some(clustering) = clustering.as_ref() else {
        return KmsStatus::NullPointer;
    };
    if buffer.is_null() {
        return KmsStatus::NullPointer;
    }
    let cells = clustering.inner.labels.cells();
    if len != cells.len() {
        return KmsStatus::BufferSize;
    }
    let out = std::slice::from_raw_parts_mut(buffer, len);
    for (slot, label) in out.iter_mut().zip(cells) {
        *slot = label.value();
    }
    KmsStatus::Ok
}

/// Erases every cluster with `tau` or fewer cells from the result, writing
/// the number of erased clusters to `removed` when non-null. The handle's
/// cluster census is updated in place.
///
/// # Safety
/// `clustering` must be a live, exclusively-owned handle.
#[no_mangle]
pub unsafe extern "C" fn kms_clustering_remove_small(
    clustering: *mut KmsClustering,
    tau: u64,
    removed: *mut u64,
) -> KmsStatus {
    let Some(clustering) = clustering.as_mut() else {
        return KmsStatus::NullPointer;
    };
    let erased = remove_small_clusters(&mut clustering.inner.labels, tau as usize);
    clustering.inner.cluster_labels.retain(|label| !erased.contains(label));
    if !removed.is_null() {
        *removed = erased.len() as u64;
    }
    KmsStatus::Ok
}

/// Releases a clustering handle. Null is ignored.
///
/// # Safety
/// `clustering` must be a handle returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kms_clustering_free(clustering: *mut KmsClustering) {
    if !clustering.is_null() {
        drop(Box::from_raw(clustering));
    }
}

/// Number of connected components of the foreground under the element
/// adjacency — the most clusters any k can produce for this grid.
///
/// # Safety
/// `grid` must be a live grid handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kms_grid_intrinsic_max_clusters(
    grid: *const KmsGrid,
    se: KmsSeKind,
    boundary: KmsBoundary,
    out: *mut u32,
) -> KmsStatus {
    let Some(grid) = grid.as_ref() else {
        return KmsStatus::NullPointer;
    };
    if out.is_null() {
        return KmsStatus::NullPointer;
    }
    let count = intrinsic_max_clusters(&grid.inner, &se.into(), boundary.into());
    *out = count as u32;
    KmsStatus::Ok
}
