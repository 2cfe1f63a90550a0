//! Cluster census, compact relabeling, noise removal by size threshold, and
//! deterministic color rendering of label grids.

use std::collections::{BTreeMap, BTreeSet};

use image::{Rgb, RgbImage};

use crate::grid::{Label, LabelGrid};

/// Golden angle in degrees; stepping the hue by this keeps consecutive
/// cluster colors far apart.
const GOLDEN_ANGLE_DEG: f64 = 137.50776405003785;

/// Per-label cell counts of a grid.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClusterCensus {
    entries: BTreeMap<Label, usize>,
    total_foreground: usize,
}

impl ClusterCensus {
    pub fn entries(&self) -> &BTreeMap<Label, usize> {
        &self.entries
    }

    pub fn total_foreground(&self) -> usize {
        self.total_foreground
    }

    pub fn size_of(&self, label: Label) -> Option<usize> {
        self.entries.get(&label).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Counts the cells of every cluster.
pub fn census(g: &LabelGrid) -> ClusterCensus {
    let mut entries = BTreeMap::new();
    let mut total = 0usize;
    for &label in g.cells() {
        if !label.is_background() {
            *entries.entry(label).or_insert(0) += 1;
            total += 1;
        }
    }
    ClusterCensus { entries, total_foreground: total }
}

/// Erases every cluster whose size is `tau` or less, setting its cells to
/// background. Returns the erased labels, ascending. Clusters strictly
/// larger than `tau` are untouched.
pub fn remove_small_clusters(g: &mut LabelGrid, tau: usize) -> Vec<Label> {
    let counts = census(g);
    let doomed: BTreeSet<Label> = counts
        .entries()
        .iter()
        .filter(|&(_, &size)| size <= tau)
        .map(|(&label, _)| label)
        .collect();
    if !doomed.is_empty() {
        for cell in g.cells_mut() {
            if !cell.is_background() && doomed.contains(cell) {
                *cell = Label::BACKGROUND;
            }
        }
    }
    doomed.into_iter().collect()
}

/// Remaps the distinct labels to `0..count` in ascending order of the old
/// label. The partition is unchanged; the mapping is returned.
pub fn compact_relabel(g: &mut LabelGrid) -> BTreeMap<Label, Label> {
    let mapping: BTreeMap<Label, Label> = g
        .distinct_labels()
        .into_iter()
        .enumerate()
        .map(|(rank, old)| (old, Label::from_raw(rank as i32)))
        .collect();
    for cell in g.cells_mut() {
        if !cell.is_background() {
            *cell = mapping[cell];
        }
    }
    mapping
}

/// Deterministic color for the cluster at compacted index `index`: golden
/// angle hue stepping at full saturation and value. The palette repeats
/// after 360 steps.
pub fn palette_color(index: usize) -> Rgb<u8> {
    let hue = ((index % 360) as f64 * GOLDEN_ANGLE_DEG).rem_euclid(360.0);
    hsv_to_rgb(hue, 1.0, 1.0)
}

fn hsv_to_rgb(hue_deg: f64, saturation: f64, value: f64) -> Rgb<u8> {
    let c = value * saturation;
    let h = hue_deg / 60.0;
    let x = c * (1.0 - (h.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = value - c;
    let to_byte = |v: f64| ((v + m) * 255.0).round() as u8;
    Rgb([to_byte(r), to_byte(g), to_byte(b)])
}

/// Renders a label grid as an RGB image: background cells are white, every
/// distinct label gets the palette color of its compacted index. A given
/// grid always renders to the same bytes.
pub fn render_colormap(g: &LabelGrid) -> RgbImage {
    let ranks: BTreeMap<Label, usize> =
        g.distinct_labels().into_iter().enumerate().map(|(rank, label)| (label, rank)).collect();
    let mut image = RgbImage::from_pixel(g.width() as u32, g.height() as u32, Rgb([255, 255, 255]));
    for row in 0..g.height() {
        for col in 0..g.width() {
            let label = g.get(row, col);
            if !label.is_background() {
                image.put_pixel(col as u32, row as u32, palette_color(ranks[&label]));
            }
        }
    }
    image
}
