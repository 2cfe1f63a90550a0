//! Structuring elements, classical binary and grey-scale dilation, and the
//! masked max-label dilation pass that k-MS reconstruction is built on.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, Result};
use crate::grid::{BinaryGrid, Label, LabelGrid};

/// One structuring-element entry: a relative offset `(dy, dx)` and the grey
/// value the general grey-scale dilation adds at that offset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeOffset {
    pub dy: i32,
    pub dx: i32,
    pub value: i32,
}

impl SeOffset {
    pub fn new(dy: i32, dx: i32, value: i32) -> Self {
        Self { dy, dx, value }
    }

    /// Flat entry (value 0), the only kind k-MS accepts.
    pub fn flat(dy: i32, dx: i32) -> Self {
        Self::new(dy, dx, 0)
    }

    pub fn is_origin(self) -> bool {
        self.dy == 0 && self.dx == 0
    }
}

/// A set of offsets probed around each cell, scalable by the growth factor
/// `delta`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructuringElement {
    offsets: Vec<SeOffset>,
}

impl StructuringElement {
    pub fn new(offsets: Vec<SeOffset>) -> Result<Self> {
        if offsets.is_empty() {
            return Err(invalid_input("structuring element needs at least one offset"));
        }
        Ok(Self { offsets })
    }

    /// The flat 3x3 neighborhood including the center.
    pub fn b1() -> Self {
        let offsets = [
            (0, 0),
            (0, 1),
            (0, -1),
            (1, 0),
            (-1, 0),
            (-1, -1),
            (1, -1),
            (-1, 1),
            (1, 1),
        ]
        .iter()
        .map(|&(dy, dx)| SeOffset::flat(dy, dx))
        .collect();
        Self { offsets }
    }

    /// The flat cross with diagonal reach pushed out to distance 10.
    pub fn b2() -> Self {
        let offsets = [
            (0, 0),
            (0, 1),
            (0, -1),
            (1, 0),
            (-1, 0),
            (-10, -10),
            (10, -10),
            (-10, 10),
            (10, 10),
        ]
        .iter()
        .map(|&(dy, dx)| SeOffset::flat(dy, dx))
        .collect();
        Self { offsets }
    }

    pub fn offsets(&self) -> &[SeOffset] {
        &self.offsets
    }

    pub fn contains_origin(&self) -> bool {
        self.offsets.iter().any(|o| o.is_origin())
    }

    /// True when the offsets reach left, right, up and down of the origin —
    /// the convergence precondition for k-MS.
    pub fn spans_all_directions(&self) -> bool {
        let up = self.offsets.iter().any(|o| o.dy < 0);
        let down = self.offsets.iter().any(|o| o.dy > 0);
        let left = self.offsets.iter().any(|o| o.dx < 0);
        let right = self.offsets.iter().any(|o| o.dx > 0);
        up && down && left && right
    }

    pub fn is_flat(&self) -> bool {
        self.offsets.iter().all(|o| o.value == 0)
    }

    /// Hard check applied at k-MS entry: origin present, all four directions
    /// present, all values zero.
    pub fn validate_for_kms(&self) -> Result<()> {
        if !self.contains_origin() {
            return Err(invalid_input("k-MS structuring element must contain the origin"));
        }
        if !self.spans_all_directions() {
            return Err(invalid_input(
                "k-MS structuring element must contain all four directions",
            ));
        }
        if !self.is_flat() {
            return Err(invalid_input("k-MS structuring element must have all values 0"));
        }
        Ok(())
    }

    /// Multiplies every offset by `delta`, carrying values over. The origin
    /// maps to the origin.
    pub fn scaled(&self, delta: u32) -> Result<Self> {
        if delta < 1 {
            return Err(invalid_input("delta must be at least 1"));
        }
        let d = delta as i32;
        let offsets = self
            .offsets
            .iter()
            .map(|o| SeOffset::new(o.dy * d, o.dx * d, o.value))
            .collect();
        Ok(Self { offsets })
    }

    /// Scaled `(dy, dx)` pairs with the origin dropped; the max-gather always
    /// starts from the cell's own value, so the origin contributes nothing.
    pub(crate) fn scaled_pairs(&self, delta: u32) -> Vec<(i32, i32)> {
        let d = delta as i32;
        self.offsets
            .iter()
            .filter(|o| !o.is_origin())
            .map(|o| (o.dy * d, o.dx * d))
            .collect()
    }
}

/// How neighbor lookups treat the grid edge: `Clamp` drops out-of-range
/// neighbors, `Wrap` folds them modulo the grid dimensions per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    Clamp,
    Wrap,
}

impl std::fmt::Display for BoundaryMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryMode::Clamp => write!(f, "clamp"),
            BoundaryMode::Wrap => write!(f, "wrap"),
        }
    }
}

#[inline]
fn resolve_axis(pos: i64, len: usize, mode: BoundaryMode) -> Option<usize> {
    match mode {
        BoundaryMode::Clamp => {
            if pos >= 0 && pos < len as i64 {
                Some(pos as usize)
            } else {
                None
            }
        }
        BoundaryMode::Wrap => Some(pos.rem_euclid(len as i64) as usize),
    }
}

/// Outcome of one masked dilation pass: whether any cell's label increased.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PassOutcome {
    pub changed: bool,
}

/// Max over the labels at `(row, col) + (dy, dx)` for each scaled offset,
/// starting from `current`. Background reads are harmless: the sentinel is
/// strictly smaller than every label.
#[inline]
#[allow(clippy::too_many_arguments)]
pub(crate) fn gather_max(
    cells: &[Label],
    row: usize,
    col: usize,
    current: Label,
    offsets: &[(i32, i32)],
    width: usize,
    height: usize,
    mode: BoundaryMode,
) -> Label {
    let mut best = current;
    for &(dy, dx) in offsets {
        let r = match resolve_axis(row as i64 + dy as i64, height, mode) {
            Some(r) => r,
            None => continue,
        };
        let c = match resolve_axis(col as i64 + dx as i64, width, mode) {
            Some(c) => c,
            None => continue,
        };
        let candidate = cells[r * width + c];
        if candidate > best {
            best = candidate;
        }
    }
    best
}

/// One in-place raster-order sweep over the listed foreground cells.
pub(crate) fn raster_pass(
    cells: &mut [Label],
    foreground: &[usize],
    offsets: &[(i32, i32)],
    width: usize,
    height: usize,
    mode: BoundaryMode,
) -> bool {
    let mut changed = false;
    for &idx in foreground {
        let row = idx / width;
        let col = idx % width;
        let current = cells[idx];
        let new = gather_max(cells, row, col, current, offsets, width, height, mode);
        if new != current {
            cells[idx] = new;
            changed = true;
        }
    }
    changed
}

/// Binary dilation: the union of the input translated by every offset.
/// Output cell `c` is true iff the input is true at `c - b` for some offset
/// `b`. Under `Clamp`, translates falling outside the grid are dropped;
/// under `Wrap` they fold around.
pub fn binary_dilate(a: &BinaryGrid, b: &StructuringElement, mode: BoundaryMode) -> BinaryGrid {
    let width = a.width();
    let height = a.height();
    let mut out = vec![false; width * height];
    for idx in a.foreground_indices() {
        let row = idx / width;
        let col = idx % width;
        for off in b.offsets() {
            let r = match resolve_axis(row as i64 + off.dy as i64, height, mode) {
                Some(r) => r,
                None => continue,
            };
            let c = match resolve_axis(col as i64 + off.dx as i64, width, mode) {
                Some(c) => c,
                None => continue,
            };
            out[r * width + c] = true;
        }
    }
    BinaryGrid::from_cells(a.spec().clone(), out).expect("dimensions preserved")
}

/// Grey-scale dilation of a row-major value grid: each output cell is the
/// supremum of `value(cell + b) + value(b)` over the offsets. Out-of-range
/// neighbors are excluded under `Clamp`; a cell with no in-range neighbor at
/// all keeps its input value.
pub fn gray_dilate(
    values: &[i32],
    width: usize,
    height: usize,
    b: &StructuringElement,
    mode: BoundaryMode,
) -> Result<Vec<i32>> {
    if width == 0 || height == 0 || values.len() != width * height {
        return Err(invalid_input(format!(
            "value buffer has {} entries, expected {width}x{height}",
            values.len()
        )));
    }
    let mut out = Vec::with_capacity(values.len());
    for row in 0..height {
        for col in 0..width {
            let mut best: Option<i32> = None;
            for off in b.offsets() {
                let r = match resolve_axis(row as i64 + off.dy as i64, height, mode) {
                    Some(r) => r,
                    None => continue,
                };
                let c = match resolve_axis(col as i64 + off.dx as i64, width, mode) {
                    Some(c) => c,
                    None => continue,
                };
                let candidate = values[r * width + c] + off.value;
                best = Some(best.map_or(candidate, |b: i32| b.max(candidate)));
            }
            out.push(best.unwrap_or(values[row * width + col]));
        }
    }
    Ok(out)
}

/// One full in-place raster-order masked dilation pass at scale `delta`.
///
/// Every foreground cell takes the max of its own label and the labels at
/// `cell + delta * b` for each offset; background cells are untouched and
/// never win a max (the sentinel is strictly smaller than any label). Values
/// on the element are ignored here: label propagation is flat.
pub fn masked_label_dilate_pass(
    g: &mut LabelGrid,
    mask: &BinaryGrid,
    b: &StructuringElement,
    delta: u32,
    mode: BoundaryMode,
) -> Result<PassOutcome> {
    check_pair(g, mask, delta)?;
    debug_assert!(g.matches_mask(mask), "label grid out of mask agreement");
    let offsets = b.scaled_pairs(delta);
    let foreground = mask.foreground_indices();
    let width = mask.width();
    let height = mask.height();
    let changed = raster_pass(g.cells_mut(), &foreground, &offsets, width, height, mode);
    Ok(PassOutcome { changed })
}

/// Repeats masked dilation passes until one changes nothing, leaving `g` at
/// a fixed point of the `delta`-scaled dilation. Returns the number of
/// passes executed (at least 1; the final pass is the one that confirms
/// idempotence).
pub fn reconstruct(
    g: &mut LabelGrid,
    mask: &BinaryGrid,
    b: &StructuringElement,
    delta: u32,
    mode: BoundaryMode,
) -> Result<usize> {
    check_pair(g, mask, delta)?;
    debug_assert!(g.matches_mask(mask), "label grid out of mask agreement");
    let offsets = b.scaled_pairs(delta);
    let foreground = mask.foreground_indices();
    let width = mask.width();
    let height = mask.height();
    let mut passes = 0;
    loop {
        passes += 1;
        if !raster_pass(g.cells_mut(), &foreground, &offsets, width, height, mode) {
            return Ok(passes);
        }
    }
}

fn check_pair(g: &LabelGrid, mask: &BinaryGrid, delta: u32) -> Result<()> {
    if g.spec() != mask.spec() {
        return Err(invalid_input("label grid and mask have different specs"));
    }
    if delta < 1 {
        return Err(invalid_input("delta must be at least 1"));
    }
    Ok(())
}
