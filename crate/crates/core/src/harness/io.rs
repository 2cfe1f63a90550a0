//! File formats: points CSV, label CSV, the 16-bit PGM label-grid format
//! with its JSON sidecar, structuring-element files, bench records CSV and
//! the stats report.
//!
//! Label grids are stored as binary PGM (`P5`, maxval 65535) holding the
//! compacted label + 1 per cell with 0 for background, next to a sidecar
//! JSON carrying the grid spec. The encoding is fixed here byte for byte so
//! files round-trip exactly.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{format_err, invalid_input, Result};
use crate::grid::{GridSpec, Label, LabelGrid, Point2, PointSet};
use crate::harness::RunRecord;
use crate::kms::Engine;
use crate::morphology::{BoundaryMode, SeOffset, StructuringElement};

/// Largest label storable in 16-bit PGM after the +1 shift.
const MAX_PGM_LABEL: i32 = u16::MAX as i32 - 1;

/// Reads a points CSV with header `x,y`, one instance per row.
pub fn read_points_csv(path: &Path) -> Result<PointSet> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    {
        let headers = reader.headers()?;
        if headers.len() < 2 || headers.get(0) != Some("x") || headers.get(1) != Some("y") {
            return Err(format_err(format!(
                "{}: expected header starting with `x,y`, found {:?}",
                path.display(),
                headers
            )));
        }
    }
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record?;
        let parse = |field: Option<&str>, name: &str| -> Result<f64> {
            field
                .and_then(|f| f.trim().parse::<f64>().ok())
                .ok_or_else(|| format_err(format!("{}: bad {name} value", path.display())))
        };
        points.push(Point2::new(parse(record.get(0), "x")?, parse(record.get(1), "y")?));
    }
    Ok(PointSet::new(points))
}

pub fn write_points_csv(path: &Path, points: &PointSet) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["x", "y"])?;
    for p in points.points() {
        writer.write_record([p.x.to_string(), p.y.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes a label CSV with header `x,y,cluster`.
pub fn write_labels_csv(path: &Path, rows: &[(Point2, i32)]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["x", "y", "cluster"])?;
    for (p, cluster) in rows {
        writer.write_record([p.x.to_string(), p.y.to_string(), cluster.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

/// Path of the JSON sidecar next to a label PGM.
pub fn sidecar_path(pgm_path: &Path) -> PathBuf {
    pgm_path.with_extension("json")
}

/// Writes a label grid as 16-bit binary PGM plus the spec sidecar. Labels
/// must already be compact (below 65535); run compaction first.
pub fn write_label_grid(pgm_path: &Path, grid: &LabelGrid) -> Result<()> {
    for &label in grid.cells() {
        if label.value() > MAX_PGM_LABEL {
            return Err(invalid_input(format!(
                "label {} does not fit 16-bit PGM; compact the grid first",
                label.value()
            )));
        }
    }
    let file = fs::File::create(pgm_path)?;
    let mut out = BufWriter::new(file);
    write!(out, "P5\n{} {}\n65535\n", grid.width(), grid.height())?;
    for &label in grid.cells() {
        let sample = if label.is_background() { 0u16 } else { (label.value() + 1) as u16 };
        out.write_all(&sample.to_be_bytes())?;
    }
    out.flush()?;
    fs::write(sidecar_path(pgm_path), serde_json::to_vec_pretty(grid.spec())?)?;
    Ok(())
}

/// Reads a label grid written by [`write_label_grid`], restoring the spec
/// from the sidecar.
pub fn read_label_grid(pgm_path: &Path) -> Result<LabelGrid> {
    let sidecar = sidecar_path(pgm_path);
    let spec: GridSpec = serde_json::from_slice(&fs::read(&sidecar).map_err(|e| {
        format_err(format!("{}: missing sidecar ({e})", sidecar.display()))
    })?)?;
    let bytes = fs::read(pgm_path)?;
    let (width, height, maxval, data) = parse_pgm(&bytes)
        .map_err(|msg| format_err(format!("{}: {msg}", pgm_path.display())))?;
    if width != spec.width || height != spec.height {
        return Err(format_err(format!(
            "{}: PGM is {width}x{height} but sidecar says {}x{}",
            pgm_path.display(),
            spec.width,
            spec.height
        )));
    }
    let samples = read_samples(data, width * height, maxval)
        .map_err(|msg| format_err(format!("{}: {msg}", pgm_path.display())))?;
    let cells = samples
        .into_iter()
        .map(|s| if s == 0 { Label::BACKGROUND } else { Label::from_raw(s as i32 - 1) })
        .collect();
    LabelGrid::from_cells(spec, cells)
}

fn parse_pgm(bytes: &[u8]) -> std::result::Result<(usize, usize, u32, &[u8]), String> {
    let mut pos = 0usize;
    let magic = take_token(bytes, &mut pos).ok_or("truncated header")?;
    if magic != b"P5" {
        return Err("not a binary PGM (P5)".into());
    }
    let width = parse_header_number(bytes, &mut pos)?;
    let height = parse_header_number(bytes, &mut pos)?;
    let maxval = parse_header_number(bytes, &mut pos)? as u32;
    if maxval == 0 || maxval > 65535 {
        return Err(format!("unsupported maxval {maxval}"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= bytes.len() {
        return Err("missing raster".into());
    }
    pos += 1;
    Ok((width, height, maxval, &bytes[pos..]))
}

fn parse_header_number(bytes: &[u8], pos: &mut usize) -> std::result::Result<usize, String> {
    let token = take_token(bytes, pos).ok_or("truncated header")?;
    std::str::from_utf8(token)
        .ok()
        .and_then(|t| t.parse::<usize>().ok())
        .ok_or_else(|| "bad header number".into())
}

/// Advances past whitespace and `#` comments, returning the next token.
/// Leaves `pos` on the whitespace byte that ended the token.
fn take_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    if *pos >= bytes.len() {
        return None;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    Some(&bytes[start..*pos])
}

fn read_samples(data: &[u8], count: usize, maxval: u32) -> std::result::Result<Vec<u16>, String> {
    if maxval < 256 {
        if data.len() < count {
            return Err(format!("raster holds {} bytes, expected {count}", data.len()));
        }
        Ok(data[..count].iter().map(|&b| b as u16).collect())
    } else {
        if data.len() < 2 * count {
            return Err(format!("raster holds {} bytes, expected {}", data.len(), 2 * count));
        }
        Ok(data[..2 * count]
            .chunks_exact(2)
            .map(|pair| u16::from_be_bytes([pair[0], pair[1]]))
            .collect())
    }
}

/// Loads a structuring element from a text file: one `dy dx value` triple
/// per line; blank lines and `#` comments are skipped.
pub fn read_structuring_element(path: &Path) -> Result<StructuringElement> {
    let mut text = String::new();
    fs::File::open(path)?.read_to_string(&mut text)?;
    let mut offsets = Vec::new();
    for (number, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(format_err(format!(
                "{}:{}: expected `dy dx value`, found {line:?}",
                path.display(),
                number + 1
            )));
        }
        let parse = |f: &str| -> Result<i32> {
            f.parse().map_err(|_| {
                format_err(format!("{}:{}: bad integer {f:?}", path.display(), number + 1))
            })
        };
        offsets.push(SeOffset::new(parse(fields[0])?, parse(fields[1])?, parse(fields[2])?));
    }
    StructuringElement::new(offsets)
}

/// The report the `cluster` command prints and writes.
#[derive(Clone, Debug, Serialize)]
pub struct StatsReport {
    pub cluster_count: usize,
    pub converged: bool,
    pub passes: usize,
    pub delta_max_reached: bool,
    pub wall_time_s: f64,
    pub k: usize,
    pub gamma: f64,
    pub boundary: BoundaryMode,
    pub engine: Engine,
}

pub fn write_stats_json(path: &Path, stats: &StatsReport) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(stats)?)?;
    Ok(())
}

/// Writes bench records as CSV with a fixed header, one row per record.
pub fn write_bench_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for record in records {
        writer.serialize(record)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_bench_spec(path: &Path) -> Result<crate::harness::BenchSpec> {
    let spec: crate::harness::BenchSpec = serde_json::from_slice(&fs::read(path)?)?;
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use tempfile::tempdir;

    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn points_csv_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("points.csv");
        let points: PointSet =
            vec![Point2::new(0.5, -1.25), Point2::new(3.0, 4.0)].into_iter().collect();
        write_points_csv(&path, &points).unwrap();
        assert_eq!(read_points_csv(&path).unwrap(), points);
    }

    #[test]
    fn points_csv_rejects_wrong_header() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(read_points_csv(&path).is_err());
    }

    #[test]
    fn label_grid_round_trip_is_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("labels.pgm");
        let spec = GridSpec::new(3, 2, 2.0, -1.5, 4.0).unwrap();
        let cells = vec![0, -1, 1, 2, -1, 3].into_iter().map(Label::from_raw).collect();
        let grid = LabelGrid::from_cells(spec, cells).unwrap();
        write_label_grid(&path, &grid).unwrap();
        let back = read_label_grid(&path).unwrap();
        assert_eq!(back, grid);

        // Byte-stable: writing again produces identical files.
        let first = fs::read(&path).unwrap();
        write_label_grid(&path, &grid).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn label_grid_rejects_uncompacted_labels() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("labels.pgm");
        // 65535 would collide with the +1 shift.
        let spec_wide = GridSpec::unit(70000, 1).unwrap();
        let mut cells = vec![Label::BACKGROUND; 70000];
        cells[65535] = Label::from_raw(65535);
        let grid = LabelGrid::from_cells(spec_wide, cells).unwrap();
        assert!(write_label_grid(&path, &grid).is_err());

        cells = vec![Label::BACKGROUND; 70000];
        cells[42] = Label::from_raw(65534);
        let grid = LabelGrid::from_cells(GridSpec::unit(70000, 1).unwrap(), cells).unwrap();
        assert!(write_label_grid(&path, &grid).is_ok());
    }

    #[test]
    fn structuring_element_file_parses_triples() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("se.txt");
        fs::write(&path, "# cross\n0 0 0\n0 1 0\n0 -1 0\n1 0 0\n-1 0 0  # up\n\n").unwrap();
        let se = read_structuring_element(&path).unwrap();
        assert_eq!(se.offsets().len(), 5);
        assert!(se.contains_origin());
        assert!(se.spans_all_directions());

        fs::write(&path, "0 0\n").unwrap();
        assert!(read_structuring_element(&path).is_err());
    }

    #[test]
    fn bench_csv_has_fixed_header() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("records.csv");
        let record = RunRecord {
            algorithm: "kms".into(),
            engine: "seq".into(),
            width: 16,
            height: 16,
            instances: 30,
            k: 4,
            repetition: 0,
            wall_time_s: 0.001,
            cluster_count: 4,
            converged: true,
        };
        write_bench_csv(&path, &[record]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "algorithm,engine,width,height,instances,k,repetition,wall_time_s,cluster_count,converged"
        );
        assert_eq!(lines.count(), 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn label_grid_round_trips(values in prop::collection::vec(prop_oneof![Just(-1i32), 0..24i32], 24)) {
            let dir = tempdir().unwrap();
            let path = dir.path().join("grid.pgm");
            let spec = GridSpec::new(6, 4, 3.0, 1.0, -2.0).unwrap();
            let grid = LabelGrid::from_cells(spec, values.into_iter().map(Label::from_raw).collect()).unwrap();
            write_label_grid(&path, &grid).unwrap();
            prop_assert_eq!(read_label_grid(&path).unwrap(), grid);
        }
    }
}
