//! Grid domain types: points, discretization, the boolean occupancy grid and
//! the uniquely-seeded label grid.
//!
//! Real-valued instances are snapped onto a regular grid by the affine map
//! `cell = round(gamma * (coord - min))`, rounding half away from zero. Every
//! occupied cell then receives a label equal to its own raster index
//! (`row * width + col`), which makes foreground labels distinct by
//! construction; the background sentinel is `-1` and therefore can never
//! collide with a seed index.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, Result};

/// Upper bound on `width * height` so every cell index fits an `i32` label.
pub const MAX_CELLS: usize = i32::MAX as usize;

/// A 2-D instance. `x` is the horizontal attribute (grid column direction),
/// `y` the vertical attribute (grid row direction).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// An ordered collection of instances. Duplicates are permitted; they simply
/// collapse onto the same cell when discretized.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointSet {
    points: Vec<Point2>,
}

impl PointSet {
    pub fn new(points: Vec<Point2>) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl From<Vec<Point2>> for PointSet {
    fn from(points: Vec<Point2>) -> Self {
        Self::new(points)
    }
}

impl FromIterator<Point2> for PointSet {
    fn from_iter<I: IntoIterator<Item = Point2>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

/// Grid geometry plus the affine map back to original coordinates.
///
/// `width`/`height` are tight: exactly large enough to contain the largest
/// discretized coordinate. `gamma` is the precision factor of the
/// discretization; `min_x`/`min_y` are the dataset minima it subtracted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub gamma: f64,
    pub min_x: f64,
    pub min_y: f64,
}

impl GridSpec {
    pub fn new(width: usize, height: usize, gamma: f64, min_x: f64, min_y: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid_input("grid dimensions must be at least 1x1"));
        }
        match width.checked_mul(height) {
            Some(cells) if cells <= MAX_CELLS => {}
            _ => {
                return Err(invalid_input(format!(
                    "grid {width}x{height} exceeds the supported cell count ({MAX_CELLS})"
                )))
            }
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(invalid_input("gamma must be a positive finite number"));
        }
        if !min_x.is_finite() || !min_y.is_finite() {
            return Err(invalid_input("grid minima must be finite"));
        }
        Ok(Self { width, height, gamma, min_x, min_y })
    }

    /// Spec for grids that live directly in cell coordinates (images,
    /// synthetic benchmarks): `gamma = 1`, minima at the origin.
    pub fn unit(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, 1.0, 0.0, 0.0)
    }

    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }
}

/// A cluster label: the raster index of some foreground cell, or the
/// background sentinel. The sentinel is strictly smaller than every valid
/// index, so it can never win a max.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(transparent)]
pub struct Label(i32);

impl Label {
    pub const BACKGROUND: Label = Label(-1);

    pub fn from_cell(row: usize, col: usize, width: usize) -> Self {
        Label((row * width + col) as i32)
    }

    pub fn from_raw(value: i32) -> Self {
        Label(value)
    }

    pub fn value(self) -> i32 {
        self.0
    }

    pub fn is_background(self) -> bool {
        self.0 < 0
    }
}

/// Boolean occupancy matrix: `true` cells are instances. Doubles as the mask
/// that restricts label dilation.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryGrid {
    spec: GridSpec,
    cells: Vec<bool>,
}

impl BinaryGrid {
    pub fn from_cells(spec: GridSpec, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != spec.cell_count() {
            return Err(invalid_input(format!(
                "cell buffer has {} entries, expected {}",
                cells.len(),
                spec.cell_count()
            )));
        }
        Ok(Self { spec, cells })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn width(&self) -> usize {
        self.spec.width
    }

    pub fn height(&self) -> usize {
        self.spec.height
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.spec.width + col]
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn foreground_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Raster indices of the foreground cells, in raster (row-major) order.
    pub fn foreground_indices(&self) -> Vec<usize> {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, &c)| c.then_some(i))
            .collect()
    }

    /// Copy of the grid with `border` empty cells added on every side. The
    /// spec minima shift by `border / gamma` so cell-to-point inversion keeps
    /// reporting the same original coordinates.
    pub fn padded(&self, border: usize) -> Result<BinaryGrid> {
        if border == 0 {
            return Ok(self.clone());
        }
        let shift = border as f64 / self.spec.gamma;
        let spec = GridSpec::new(
            self.spec.width + 2 * border,
            self.spec.height + 2 * border,
            self.spec.gamma,
            self.spec.min_x - shift,
            self.spec.min_y - shift,
        )?;
        let mut cells = vec![false; spec.cell_count()];
        for row in 0..self.spec.height {
            for col in 0..self.spec.width {
                if self.get(row, col) {
                    cells[(row + border) * spec.width + (col + border)] = true;
                }
            }
        }
        BinaryGrid::from_cells(spec, cells)
    }
}

/// Integer label matrix paired with a [`BinaryGrid`]: background exactly
/// where the mask is false, a label in `[0, width * height)` elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelGrid {
    spec: GridSpec,
    cells: Vec<Label>,
}

impl LabelGrid {
    pub fn from_cells(spec: GridSpec, cells: Vec<Label>) -> Result<Self> {
        if cells.len() != spec.cell_count() {
            return Err(invalid_input(format!(
                "cell buffer has {} entries, expected {}",
                cells.len(),
                spec.cell_count()
            )));
        }
        let limit = spec.cell_count() as i32;
        for &label in &cells {
            if label != Label::BACKGROUND && !(0..limit).contains(&label.value()) {
                return Err(invalid_input(format!(
                    "label {} outside [0, {limit}) and not the background sentinel",
                    label.value()
                )));
            }
        }
        Ok(Self { spec, cells })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn width(&self) -> usize {
        self.spec.width
    }

    pub fn height(&self) -> usize {
        self.spec.height
    }

    pub fn get(&self, row: usize, col: usize) -> Label {
        self.cells[row * self.spec.width + col]
    }

    pub fn cells(&self) -> &[Label] {
        &self.cells
    }

    pub(crate) fn cells_mut(&mut self) -> &mut [Label] {
        &mut self.cells
    }

    /// Distinct non-background labels, ascending.
    pub fn distinct_labels(&self) -> Vec<Label> {
        let set: BTreeSet<Label> =
            self.cells.iter().copied().filter(|l| !l.is_background()).collect();
        set.into_iter().collect()
    }

    /// True when this grid is background exactly where `mask` is false.
    pub fn matches_mask(&self, mask: &BinaryGrid) -> bool {
        self.spec == *mask.spec()
            && self
                .cells
                .iter()
                .zip(mask.cells())
                .all(|(l, &fg)| fg != l.is_background())
    }
}

/// Discretizes a point set into a boolean occupancy grid using precision
/// factor `gamma`. Cell `(round(gamma * (y - min_y)), round(gamma * (x -
/// min_x)))` becomes true for every instance; rounding is half away from
/// zero. Grid dimensions are tight (largest coordinate + 1) and points
/// falling on the same cell collapse.
pub fn discretize(points: &PointSet, gamma: f64) -> Result<BinaryGrid> {
    if points.is_empty() {
        return Err(invalid_input("cannot discretize an empty point set"));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(invalid_input("gamma must be a positive finite number"));
    }
    let mut min_x = f64::INFINITY;
    let mut min_y = f64::INFINITY;
    for p in points.points() {
        if !p.is_finite() {
            return Err(invalid_input("point coordinates must be finite"));
        }
        min_x = min_x.min(p.x);
        min_y = min_y.min(p.y);
    }
    let mut coords = Vec::with_capacity(points.len());
    let mut max_row = 0usize;
    let mut max_col = 0usize;
    for p in points.points() {
        let (row, col) = discretize_point(*p, gamma, min_x, min_y);
        max_row = max_row.max(row);
        max_col = max_col.max(col);
        coords.push((row, col));
    }
    let spec = GridSpec::new(max_col + 1, max_row + 1, gamma, min_x, min_y)?;
    let mut cells = vec![false; spec.cell_count()];
    for (row, col) in coords {
        cells[row * spec.width + col] = true;
    }
    BinaryGrid::from_cells(spec, cells)
}

/// Cell coordinates of a single point under a discretization. Exposed so the
/// harness can map instances back to the cells they landed on.
pub fn discretize_point(p: Point2, gamma: f64, min_x: f64, min_y: f64) -> (usize, usize) {
    let row = (gamma * (p.y - min_y)).round();
    let col = (gamma * (p.x - min_x)).round();
    (row as usize, col as usize)
}

/// Seeds a label grid from an occupancy grid: every foreground cell gets its
/// own raster index as label, every background cell gets the sentinel.
pub fn seed_labels(mask: &BinaryGrid) -> LabelGrid {
    let cells = mask
        .cells()
        .iter()
        .enumerate()
        .map(|(i, &fg)| if fg { Label::from_raw(i as i32) } else { Label::BACKGROUND })
        .collect();
    LabelGrid { spec: mask.spec().clone(), cells }
}

/// Builds an occupancy grid from 8-bit grey pixels: a cell is foreground when
/// its pixel is darker than `threshold` (strictly less).
pub fn grid_from_image(pixels: &[u8], width: usize, height: usize, threshold: u8) -> Result<BinaryGrid> {
    let spec = GridSpec::unit(width, height)?;
    if pixels.len() != spec.cell_count() {
        return Err(invalid_input(format!(
            "pixel buffer has {} entries, expected {}x{} = {}",
            pixels.len(),
            width,
            height,
            spec.cell_count()
        )));
    }
    let cells = pixels.iter().map(|&p| p < threshold).collect();
    BinaryGrid::from_cells(spec, cells)
}

/// Maps a cell back to original coordinates: the cell-center preimage of the
/// discretization, `(col / gamma + min_x, row / gamma + min_y)`.
pub fn cell_to_point(row: usize, col: usize, spec: &GridSpec) -> Result<Point2> {
    if row >= spec.height || col >= spec.width {
        return Err(invalid_input(format!(
            "cell ({row}, {col}) outside a {}x{} grid",
            spec.height, spec.width
        )));
    }
    Ok(Point2::new(
        col as f64 / spec.gamma + spec.min_x,
        row as f64 / spec.gamma + spec.min_y,
    ))
}
