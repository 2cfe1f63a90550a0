//! The k-MS control loop: delta growth and reset, bounded cluster counting,
//! convergence detection, and the sequential and parallel execution engines.
//!
//! Each pass dilates the labels of the foreground cells in place with the
//! delta-scaled structuring element. After a pass, delta grows by one if
//! nothing changed and resets to one otherwise; the loop finishes on the
//! first unchanged pass whose grid holds at most `k` distinct labels. The
//! engines track dirty cells and label multiplicities so a pass only touches
//! what can change, but every pass outcome and every stop decision is
//! identical to sweeping all cells and re-counting each time.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, Result};
use crate::grid::{seed_labels, BinaryGrid, Label, LabelGrid};
use crate::morphology::{gather_max, BoundaryMode, StructuringElement};

/// Number of foreground cells each parallel band processes. Fixed so results
/// and censuses never depend on the worker count.
const PARALLEL_BAND: usize = 8192;

/// Execution engine: in-place raster sweeps, or synchronous double-buffered
/// sweeps over bands of the foreground list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Engine {
    #[serde(rename = "seq")]
    Sequential,
    #[serde(rename = "par")]
    Parallel,
}

impl std::fmt::Display for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Engine::Sequential => write!(f, "seq"),
            Engine::Parallel => write!(f, "par"),
        }
    }
}

/// Parameters of one clustering run.
#[derive(Clone, Debug)]
pub struct KmsConfig {
    /// Maximum number of clusters to produce.
    pub k: usize,
    pub se: StructuringElement,
    pub boundary: BoundaryMode,
    pub engine: Engine,
    /// Divergence guard on the delta growth; `None` selects
    /// `max(width, height)` of the grid being clustered.
    pub delta_max: Option<u32>,
}

impl KmsConfig {
    pub fn new(k: usize, se: StructuringElement) -> Self {
        Self { k, se, boundary: BoundaryMode::Clamp, engine: Engine::Sequential, delta_max: None }
    }

    pub fn with_boundary(mut self, boundary: BoundaryMode) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_engine(mut self, engine: Engine) -> Self {
        self.engine = engine;
        self
    }

    pub fn with_delta_max(mut self, delta_max: u32) -> Self {
        self.delta_max = Some(delta_max);
        self
    }
}

/// A capacity-bounded set of distinct labels. Offering more than `capacity`
/// distinct labels raises the sticky `overflowed` flag; offered every label
/// of a grid, overflow means the grid holds more than `capacity` clusters.
#[derive(Clone, Debug)]
pub struct BoundedLabelSet {
    capacity: usize,
    labels: Vec<Label>,
    overflowed: bool,
}

impl BoundedLabelSet {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, labels: Vec::with_capacity(capacity.min(1024)), overflowed: false }
    }

    /// Offers a label: duplicates change nothing, new labels take a vacant
    /// slot, and a new label with no vacancy left sets `overflowed`. Returns
    /// the current overflow flag. Offering the background sentinel is an
    /// error; the background is never a cluster.
    pub fn offer(&mut self, label: Label) -> Result<bool> {
        if label.is_background() {
            return Err(invalid_input("the background sentinel cannot be offered as a cluster"));
        }
        Ok(self.insert(label))
    }

    /// Same as [`offer`](Self::offer) for labels already known to be
    /// foreground.
    #[inline]
    fn insert(&mut self, label: Label) -> bool {
        if !self.labels.contains(&label) {
            if self.labels.len() < self.capacity {
                self.labels.push(label);
            } else {
                self.overflowed = true;
            }
        }
        self.overflowed
    }

    pub fn overflowed(&self) -> bool {
        self.overflowed
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }
}

/// Result of a clustering run.
#[derive(Clone, Debug, PartialEq)]
pub struct KmsResult {
    /// Final label grid. Satisfies mask agreement with the input grid, and
    /// every label is the seed index of some foreground cell.
    pub labels: LabelGrid,
    /// Distinct non-background labels in the final grid, ascending.
    pub cluster_labels: Vec<Label>,
    /// True when the loop finished because a pass changed nothing with at
    /// most `k` distinct labels; false when the delta guard tripped first.
    pub converged: bool,
    /// Number of sweeps executed.
    pub passes: usize,
    /// Delta used by each pass: starts at 1, each entry is the previous + 1
    /// (after an unchanged pass) or a reset to 1 (after a merge).
    pub delta_history: Vec<u32>,
}

impl KmsResult {
    pub fn cluster_count(&self) -> usize {
        self.cluster_labels.len()
    }

    /// Largest delta any pass used.
    pub fn delta_reached(&self) -> u32 {
        self.delta_history.iter().copied().max().unwrap_or(0)
    }
}

struct LoopOutcome {
    converged: bool,
    delta_history: Vec<u32>,
}

/// Clusters the foreground of `mask` into at most `k` clusters.
///
/// Labels are seeded with unique cell indices and repeatedly dilated in-place
/// under the mask; an unchanged pass with at most `k` distinct labels left in
/// the grid ends the loop. Returns a non-converged partial result instead of
/// looping forever if delta outgrows the guard, which can happen when
/// leftover components are not aligned with any scaled offset.
pub fn kms_cluster(mask: &BinaryGrid, config: &KmsConfig) -> Result<KmsResult> {
    if config.k < 1 {
        return Err(invalid_input("k must be at least 1"));
    }
    config.se.validate_for_kms()?;
    let foreground = mask.foreground_indices();
    if foreground.is_empty() {
        return Err(invalid_input("cannot cluster a grid with no foreground cells"));
    }
    let delta_max = config
        .delta_max
        .unwrap_or_else(|| mask.width().max(mask.height()).min(u32::MAX as usize) as u32)
        .max(1);

    let mut grid = seed_labels(mask);
    let outcome = match config.engine {
        Engine::Sequential => run_sequential(&mut grid, &foreground, config, delta_max),
        Engine::Parallel => run_parallel(&mut grid, &foreground, config, delta_max),
    };

    let cluster_labels: Vec<Label> = foreground
        .iter()
        .map(|&idx| grid.cells()[idx])
        .collect::<BTreeSet<Label>>()
        .into_iter()
        .collect();

    Ok(KmsResult {
        labels: grid,
        cluster_labels,
        converged: outcome.converged,
        passes: outcome.delta_history.len(),
        delta_history: outcome.delta_history,
    })
}

/// Exact distinct-label bookkeeping. Labels are cell indices, so a flat
/// refcount vector suffices; `distinct` tracks how many labels currently
/// have a nonzero count. At an unchanged pass, `distinct > k` is exactly the
/// kArray-overflow predicate, so deciding from it preserves every decision
/// while costing O(1) per relabel instead of a scan per pass.
struct DistinctCount {
    refs: Vec<u32>,
    distinct: usize,
}

impl DistinctCount {
    fn from_seeded(foreground: &[usize], cell_count: usize) -> Self {
        let mut refs = vec![0u32; cell_count];
        for &idx in foreground {
            refs[idx] = 1;
        }
        Self { refs, distinct: foreground.len() }
    }

    #[inline]
    fn relabel(&mut self, old: Label, new: Label) {
        let old = old.value() as usize;
        let new = new.value() as usize;
        self.refs[old] -= 1;
        if self.refs[old] == 0 {
            self.distinct -= 1;
        }
        self.refs[new] += 1;
        if self.refs[new] == 1 {
            self.distinct += 1;
        }
    }
}

/// Append-only log of cells whose label changed, with one cursor per delta
/// value. The cells that can change in a pass at delta are exactly the
/// cells reading, through the delta-scaled element, some cell that changed
/// since the previous pass at the same delta; everything else provably
/// re-gathers to its current value. A delta with no cursor yet has never
/// swept, so its first pass covers every foreground cell.
struct ChangeLog {
    entries: Vec<u32>,
    cursors: Vec<Option<usize>>,
}

impl ChangeLog {
    fn new() -> Self {
        Self { entries: Vec::new(), cursors: Vec::new() }
    }

    fn cursor(&mut self, delta: u32) -> Option<usize> {
        let slot = delta as usize;
        if self.cursors.len() <= slot {
            self.cursors.resize(slot + 1, None);
        }
        self.cursors[slot]
    }

    fn set_cursor(&mut self, delta: u32, position: usize) {
        self.cursors[delta as usize] = Some(position);
    }
}

/// Foreground cells that read any logged change through the scaled element,
/// deduplicated. `flags` is a scratch bitmap, returned clean.
fn cells_reading_changes(
    changes: &[u32],
    cells: &[Label],
    offsets: &[(i32, i32)],
    width: usize,
    height: usize,
    mode: BoundaryMode,
    flags: &mut [bool],
) -> Vec<usize> {
    let mut out = Vec::new();
    for &q in changes {
        let q = q as usize;
        let row = q / width;
        let col = q % width;
        for &(dy, dx) in offsets {
            let Some(reader) = offset_index(row, col, -dy, -dx, width, height, mode) else {
                continue;
            };
            if !flags[reader] && !cells[reader].is_background() {
                flags[reader] = true;
                out.push(reader);
            }
        }
    }
    for &idx in &out {
        flags[idx] = false;
    }
    out
}

fn run_sequential(
    grid: &mut LabelGrid,
    foreground: &[usize],
    config: &KmsConfig,
    delta_max: u32,
) -> LoopOutcome {
    let width = grid.width();
    let height = grid.height();
    let cell_count = width * height;
    let mode = config.boundary;
    let k = config.k;
    let fg_cols: Vec<i32> = foreground.iter().map(|&idx| (idx % width) as i32).collect();
    let cells = grid.cells_mut();

    let mut census = DistinctCount::from_seeded(foreground, cell_count);
    let mut log = ChangeLog::new();
    let mut scratch = vec![false; cell_count];
    let mut queued = vec![false; cell_count];
    let mut delta = 1u32;
    let mut history = Vec::new();
    loop {
        if delta > delta_max {
            return LoopOutcome { converged: false, delta_history: history };
        }
        let offsets = config.se.scaled_pairs(delta);
        let log_start = log.entries.len();
        let changed = match log.cursor(delta) {
            None => seq_full_pass(
                cells, foreground, &fg_cols, &offsets, width, height, mode, &mut log.entries,
                &mut census,
            ),
            Some(from) => {
                let seeds = cells_reading_changes(
                    &log.entries[from..log_start],
                    cells,
                    &offsets,
                    width,
                    height,
                    mode,
                    &mut scratch,
                );
                seq_dirty_pass(
                    cells, seeds, &offsets, width, height, mode, &mut log.entries, &mut census,
                    &mut queued,
                )
            }
        };
        log.set_cursor(delta, log_start);
        history.push(delta);
        if !changed && census.distinct <= k {
            return LoopOutcome { converged: true, delta_history: history };
        }
        delta = if changed { 1 } else { delta + 1 };
    }
}

/// One in-place raster sweep over every foreground cell.
#[allow(clippy::too_many_arguments)]
fn seq_full_pass(
    cells: &mut [Label],
    foreground: &[usize],
    fg_cols: &[i32],
    offsets: &[(i32, i32)],
    width: usize,
    height: usize,
    mode: BoundaryMode,
    log: &mut Vec<u32>,
    census: &mut DistinctCount,
) -> bool {
    let mut changed = false;
    for (&idx, &col) in foreground.iter().zip(fg_cols) {
        let current = cells[idx];
        let best = gather_clamp_or_wrap(cells, idx, col, current, offsets, width, height, mode);
        if best != current {
            cells[idx] = best;
            census.relabel(current, best);
            log.push(idx as u32);
            changed = true;
        }
    }
    changed
}

/// The same in-place raster sweep restricted to the seed cells, processed in
/// ascending raster order. When a cell grows, readers of it at larger
/// indices join this sweep (exactly the cells that would have seen the new
/// value later in a full sweep); readers at smaller indices are reached
/// through the change log on the next pass at this delta.
#[allow(clippy::too_many_arguments)]
fn seq_dirty_pass(
    cells: &mut [Label],
    seeds: Vec<usize>,
    offsets: &[(i32, i32)],
    width: usize,
    height: usize,
    mode: BoundaryMode,
    log: &mut Vec<u32>,
    census: &mut DistinctCount,
    queued: &mut [bool],
) -> bool {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let mut heap: BinaryHeap<Reverse<usize>> = BinaryHeap::with_capacity(seeds.len());
    for idx in seeds {
        queued[idx] = true;
        heap.push(Reverse(idx));
    }
    let mut changed = false;
    while let Some(Reverse(idx)) = heap.pop() {
        if !queued[idx] {
            continue;
        }
        queued[idx] = false;
        let row = idx / width;
        let col = idx % width;
        let current = cells[idx];
        let best = gather_max(cells, row, col, current, offsets, width, height, mode);
        if best > current {
            cells[idx] = best;
            census.relabel(current, best);
            log.push(idx as u32);
            changed = true;
            for &(dy, dx) in offsets {
                let Some(reader) = offset_index(row, col, -dy, -dx, width, height, mode) else {
                    continue;
                };
                if reader > idx && !queued[reader] && !cells[reader].is_background() {
                    queued[reader] = true;
                    heap.push(Reverse(reader));
                }
            }
        }
    }
    changed
}

fn run_parallel(
    grid: &mut LabelGrid,
    foreground: &[usize],
    config: &KmsConfig,
    delta_max: u32,
) -> LoopOutcome {
    let width = grid.width();
    let height = grid.height();
    let cell_count = width * height;
    let mode = config.boundary;
    let k = config.k;
    let mut cur: Vec<Label> = grid.cells().to_vec();

    let mut census = DistinctCount::from_seeded(foreground, cell_count);
    let mut log = ChangeLog::new();
    let mut scratch = vec![false; cell_count];
    // Pass-start values of cells changed during the current pass, recorded
    // lazily: `epoch[cell] == pass` means `old_value[cell]` holds the value
    // the cell had when the pass began.
    let mut old_value = vec![Label::BACKGROUND; cell_count];
    let mut epoch = vec![0u64; cell_count];
    let mut pass: u64 = 0;
    let mut delta = 1u32;
    let mut history = Vec::new();

    let outcome = loop {
        if delta > delta_max {
            break LoopOutcome { converged: false, delta_history: history };
        }
        let offsets = config.se.scaled_pairs(delta);
        let log_start = log.entries.len();
        pass += 1;

        // Cells the first sweep of this pass must evaluate.
        let mut sweep: Vec<usize> = match log.cursor(delta) {
            None => foreground.to_vec(),
            Some(from) => cells_reading_changes(
                &log.entries[from..log_start],
                &cur,
                &offsets,
                width,
                height,
                mode,
                &mut scratch,
            ),
        };
        log.set_cursor(delta, log_start);

        // The pass settles to the exact state one in-place raster sweep
        // would produce: that sweep solves `x[p] = max(start[p], x[q] for
        // earlier q, start[q] for later q)` by forward substitution, and
        // synchronous re-evaluation of the same equation over the cells
        // whose earlier-q sources changed ascends to the identical least
        // fixed point. Both engines therefore visit the same pass states
        // and take identical decisions. Each sweep reads only state frozen
        // between sweeps, so bands are race-free and worker-count
        // independent.
        let mut pass_changed = false;
        while !sweep.is_empty() {
            sweep.sort_unstable();
            let mut updates: Vec<(usize, Label)> = {
                let cur = &cur;
                let old_value = &old_value;
                let epoch = &epoch;
                let offsets = &offsets;
                let start_of = |q: usize| -> Label {
                    if epoch[q] == pass {
                        old_value[q]
                    } else {
                        cur[q]
                    }
                };
                let eval = move |idx: usize| -> Option<(usize, Label)> {
                    let row = idx / width;
                    let col = idx % width;
                    let mut best = start_of(idx);
                    for &(dy, dx) in offsets.iter() {
                        let Some(q) = offset_index(row, col, dy, dx, width, height, mode) else {
                            continue;
                        };
                        // Earlier cells count as already visited by the
                        // in-place sweep; later ones read pass-start values.
                        let candidate = if q < idx { cur[q] } else { start_of(q) };
                        if candidate > best {
                            best = candidate;
                        }
                    }
                    (best > cur[idx]).then_some((idx, best))
                };
                if sweep.len() >= PARALLEL_BAND {
                    sweep.par_iter().copied().filter_map(eval).collect()
                } else {
                    sweep.iter().copied().filter_map(eval).collect()
                }
            };
            if updates.is_empty() {
                break;
            }
            pass_changed = true;
            updates.sort_unstable_by_key(|&(idx, _)| idx);
            for &(idx, value) in &updates {
                if epoch[idx] != pass {
                    epoch[idx] = pass;
                    old_value[idx] = cur[idx];
                }
                census.relabel(cur[idx], value);
                cur[idx] = value;
                log.entries.push(idx as u32);
            }
            // Next sweep: cells reading an updated cell as an already
            // visited source, i.e. readers at larger raster indices.
            let mut next = Vec::new();
            for &(idx, _) in &updates {
                let row = idx / width;
                let col = idx % width;
                for &(dy, dx) in &offsets {
                    let Some(reader) = offset_index(row, col, -dy, -dx, width, height, mode)
                    else {
                        continue;
                    };
                    if reader > idx && !scratch[reader] && !cur[reader].is_background() {
                        scratch[reader] = true;
                        next.push(reader);
                    }
                }
            }
            for &idx in &next {
                scratch[idx] = false;
            }
            sweep = next;
        }

        history.push(delta);
        if !pass_changed && census.distinct <= k {
            break LoopOutcome { converged: true, delta_history: history };
        }
        delta = if pass_changed { 1 } else { delta + 1 };
    };
    grid.cells_mut().copy_from_slice(&cur);
    outcome
}

/// Gather with a division-free clamp fast path; wrap falls back to the
/// generic resolver.
#[allow(clippy::too_many_arguments)]
#[inline]
fn gather_clamp_or_wrap(
    cells: &[Label],
    idx: usize,
    col: i32,
    current: Label,
    offsets: &[(i32, i32)],
    width: usize,
    height: usize,
    mode: BoundaryMode,
) -> Label {
    match mode {
        BoundaryMode::Clamp => {
            let mut best = current;
            let len = cells.len() as isize;
            let w = width as i32;
            for &(dy, dx) in offsets {
                let ncol = col + dx;
                if ncol < 0 || ncol >= w {
                    continue;
                }
                let nidx = idx as isize + dy as isize * width as isize + dx as isize;
                if nidx < 0 || nidx >= len {
                    continue;
                }
                let candidate = cells[nidx as usize];
                if candidate > best {
                    best = candidate;
                }
            }
            best
        }
        BoundaryMode::Wrap => {
            gather_max(cells, idx / width, idx % width, current, offsets, width, height, mode)
        }
    }
}

/// Number of connected components of the foreground under the adjacency
/// `p ~ p + b` at delta = 1 — the most clusters k-MS can ever return for
/// this grid and element. Requesting any `k` at or above this value yields
/// exactly this many clusters.
pub fn intrinsic_max_clusters(
    mask: &BinaryGrid,
    se: &StructuringElement,
    mode: BoundaryMode,
) -> usize {
    let foreground = mask.foreground_indices();
    if foreground.is_empty() {
        return 0;
    }
    let width = mask.width();
    let height = mask.height();
    let mut sets = DisjointSets::new(foreground.len());
    for (rank, &idx) in foreground.iter().enumerate() {
        let row = idx / width;
        let col = idx % width;
        for off in se.offsets() {
            if off.is_origin() {
                continue;
            }
            let target = match offset_index(row, col, off.dy, off.dx, width, height, mode) {
                Some(t) => t,
                None => continue,
            };
            if let Ok(other_rank) = foreground.binary_search(&target) {
                sets.union(rank, other_rank);
            }
        }
    }
    sets.component_count()
}

#[inline]
fn offset_index(
    row: usize,
    col: usize,
    dy: i32,
    dx: i32,
    width: usize,
    height: usize,
    mode: BoundaryMode,
) -> Option<usize> {
    let (mut r, mut c) = (row as i64 + dy as i64, col as i64 + dx as i64);
    match mode {
        BoundaryMode::Clamp => {
            if r < 0 || c < 0 || r >= height as i64 || c >= width as i64 {
                return None;
            }
        }
        BoundaryMode::Wrap => {
            r = r.rem_euclid(height as i64);
            c = c.rem_euclid(width as i64);
        }
    }
    Some(r as usize * width + c as usize)
}

struct DisjointSets {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new(len: usize) -> Self {
        Self { parent: (0..len as u32).collect(), rank: vec![0; len] }
    }

    fn find(&mut self, mut i: u32) -> u32 {
        while self.parent[i as usize] != i {
            let grandparent = self.parent[self.parent[i as usize] as usize];
            self.parent[i as usize] = grandparent;
            i = grandparent;
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a as u32), self.find(b as u32));
        if ra == rb {
            return;
        }
        match self.rank[ra as usize].cmp(&self.rank[rb as usize]) {
            std::cmp::Ordering::Less => self.parent[ra as usize] = rb,
            std::cmp::Ordering::Greater => self.parent[rb as usize] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb as usize] = ra;
                self.rank[ra as usize] += 1;
            }
        }
    }

    fn component_count(&mut self) -> usize {
        (0..self.parent.len() as u32).filter(|&i| self.find(i) == i).count()
    }
}
