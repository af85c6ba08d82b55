//! Spatial datasets, sampling designs and CSV ingestion.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// A planar location. Both axes share one (caller-defined) length unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn key(&self) -> (u64, u64) {
        // +0.0 folds -0.0 onto 0.0
        ((self.x + 0.0).to_bits(), (self.y + 0.0).to_bits())
    }
}

/// Axis-aligned rectangle `[x_min, x_max] × [y_min, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub const fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    pub const fn square(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, lo, hi)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidDesign("rectangle bounds must be finite".into()));
        }
        if self.x_max <= self.x_min || self.y_max <= self.y_min {
            return Err(Error::InvalidDesign(format!(
                "degenerate rectangle [{}, {}] x [{}, {}]",
                self.x_min, self.x_max, self.y_min, self.y_max
            )));
        }
        Ok(())
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }
}

/// Sampling design used to place observation sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Design {
    Grid { rect: Rect, k: usize },
    UniformRandom { rect: Rect, n: usize, seed: u64 },
    Subsample { n: usize, seed: u64 },
}

/// `n` distinct planar positions paired with observed values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialDataset {
    positions: Vec<Point>,
    values: Vec<f64>,
}

impl SpatialDataset {
    pub fn new(positions: Vec<Point>, values: Vec<f64>) -> Result<Self> {
        if positions.len() != values.len() {
            return Err(Error::InvalidDataset(format!(
                "{} positions but {} values",
                positions.len(),
                values.len()
            )));
        }
        if positions.is_empty() {
            return Err(Error::InvalidDataset("dataset is empty".into()));
        }
        for (i, (p, v)) in positions.iter().zip(&values).enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && v.is_finite()) {
                return Err(Error::InvalidDataset(format!("row {i} is not finite")));
            }
        }
        if let Some(i) = first_duplicate(&positions) {
            return Err(Error::InvalidDataset(format!("row {i} repeats an earlier position")));
        }
        Ok(Self { positions, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Same positions, new values (e.g. after an affine transform).
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.positions.clone(), values)
    }

    /// Dataset without row `i`.
    pub fn without(&self, i: usize) -> Result<Self> {
        if i >= self.len() {
            return Err(Error::InvalidSize {
                requested: i,
                available: self.len(),
            });
        }
        let mut positions = self.positions.clone();
        let mut values = self.values.clone();
        positions.remove(i);
        values.remove(i);
        Self::new(positions, values)
    }

    /// Rows at the given indices, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut positions = Vec::with_capacity(indices.len());
        let mut values = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::InvalidSize {
                    requested: i,
                    available: self.len(),
                });
            }
            positions.push(self.positions[i]);
            values.push(self.values[i]);
        }
        Self::new(positions, values)
    }

    /// Smallest and largest pairwise distances; `None` for a single point.
    pub fn distance_range(&self) -> Option<(f64, f64)> {
        distance_range(&self.positions)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }
}

fn first_duplicate(positions: &[Point]) -> Option<usize> {
    let mut seen = HashSet::with_capacity(positions.len());
    positions.iter().position(|p| !seen.insert(p.key()))
}

pub fn distance_range(positions: &[Point]) -> Option<(f64, f64)> {
    if positions.len() < 2 {
        return None;
    }
    let mut d_min = f64::INFINITY;
    let mut d_max = 0.0f64;
    for (i, a) in positions.iter().enumerate() {
        for b in &positions[i + 1..] {
            let d = a.distance(b);
            d_min = d_min.min(d);
            d_max = d_max.max(d);
        }
    }
    Some((d_min, d_max))
}

/// `k × k` equidistant grid over `rect`, corners included, row-major (y outer, x inner).
pub fn make_grid(rect: Rect, k: usize) -> Result<Vec<Point>> {
    rect.validate()?;
    if k < 2 {
        return Err(Error::InvalidDesign(format!("grid needs k >= 2, got {k}")));
    }
    let step = |lo: f64, hi: f64, j: usize| {
        if j == k - 1 {
            hi
        } else {
            lo + (hi - lo) * j as f64 / (k - 1) as f64
        }
    };
    let mut points = Vec::with_capacity(k * k);
    for iy in 0..k {
        let y = step(rect.y_min, rect.y_max, iy);
        for ix in 0..k {
            points.push(Point::new(step(rect.x_min, rect.x_max, ix), y));
        }
    }
    Ok(points)
}

/// `n` i.i.d. uniform points in `rect`; exact duplicates are redrawn.
pub fn sample_uniform(rect: Rect, n: usize, seed: u64) -> Result<Vec<Point>> {
    rect.validate()?;
    if n == 0 {
        return Err(Error::InvalidDesign("uniform design needs n >= 1".into()));
    }
    let mut rng = rng::stream(seed, &[rng::label("uniform-design")]);
    let mut seen = HashSet::with_capacity(n);
    let mut points = Vec::with_capacity(n);
    while points.len() < n {
        let p = Point::new(
            rng.random_range(rect.x_min..=rect.x_max),
            rng.random_range(rect.y_min..=rect.y_max),
        );
        if seen.insert(p.key()) {
            points.push(p);
        }
    }
    Ok(points)
}

/// Indices of `n` distinct rows out of `parent_len`, deterministic in `seed`.
pub fn subsample_indices(parent_len: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n == 0 || n > parent_len {
        return Err(Error::InvalidSize {
            requested: n,
            available: parent_len,
        });
    }
    let mut rng = rng::stream(seed, &[rng::label("subsample")]);
    Ok(index::sample(&mut rng, parent_len, n).into_vec())
}

/// `n` rows of `parent` drawn without replacement, positions and values kept paired.
pub fn subsample(parent: &SpatialDataset, n: usize, seed: u64) -> Result<SpatialDataset> {
    let idx = subsample_indices(parent.len(), n, seed)?;
    parent.select(&idx)
}

/// Reads a `x,y,value` CSV file.
pub fn read_csv(path: impl AsRef<Path>) -> Result<SpatialDataset> {
    let path = path.as_ref();
    let file = File::open(path)?;
    read_csv_from(file, path)
}

pub fn read_csv_from<R: std::io::Read>(reader: R, path: &Path) -> Result<SpatialDataset> {
    let parse_err = |row: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(1, format!("missing column `{name}`")))
    };
    let (cx, cy, cv) = (col("x")?, col("y")?, col("value")?);

    let mut positions = Vec::new();
    let mut values = Vec::new();
    let mut seen = HashSet::new();
    for (i, record) in rdr.records().enumerate() {
        // header is line 1
        let line = i + 2;
        let record = record.map_err(|e| parse_err(line, e.to_string()))?;
        let cell = |c: usize, name: &str| -> Result<f64> {
            let raw = record
                .get(c)
                .ok_or_else(|| parse_err(line, format!("missing `{name}` cell")))?;
            let v: f64 = raw
                .parse()
                .map_err(|_| parse_err(line, format!("`{name}` is not numeric: {raw:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("`{name}` is not finite")));
            }
            Ok(v)
        };
        let p = Point::new(cell(cx, "x")?, cell(cy, "y")?);
        let v = cell(cv, "value")?;
        if !seen.insert(p.key()) {
            return Err(parse_err(line, format!("duplicate position ({}, {})", p.x, p.y)));
        }
        positions.push(p);
        values.push(v);
    }
    if positions.is_empty() {
        return Err(parse_err(1, "no data rows".into()));
    }
    SpatialDataset::new(positions, values)
}

/// Writes `x,y,value` with shortest round-trip float formatting and `\n` line endings.
pub fn write_csv(ds: &SpatialDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv_to(ds, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_csv_to<W: Write>(ds: &SpatialDataset, w: &mut W) -> Result<()> {
    writeln!(w, "x,y,value")?;
    for (p, v) in ds.positions.iter().zip(&ds.values) {
        writeln!(w, "{},{},{}", p.x, p.y, v)?;
    }
    Ok(())
}

/// Reads target locations from a CSV with `x,y` columns (extra columns ignored).
pub fn read_points_csv(path: impl AsRef<Path>) -> Result<Vec<Point>> {
    let path = path.as_ref();
    let parse_err = |row: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(File::open(path)?);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(1, format!("missing column `{name}`")))
    };
    let (cx, cy) = (col("x")?, col("y")?);
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| parse_err(line, e.to_string()))?;
        let get = |c: usize| -> Result<f64> {
            record
                .get(c)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(line, "non-numeric coordinate".into()))
        };
        out.push(Point::new(get(cx)?, get(cy)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_4x4_spacing_and_corners() {
        let g = make_grid(Rect::square(0.0, 10.0), 4).unwrap();
        assert_eq!(g.len(), 16);
        assert_eq!(g[0], Point::new(0.0, 0.0));
        assert_eq!(g[15], Point::new(10.0, 10.0));
        assert!((g[1].x - 10.0 / 3.0).abs() < 1e-12);
        // row-major: y constant along the first row
        assert!(g[..4].iter().all(|p| p.y == 0.0));
    }

    #[test]
    fn grid_sizes_used_by_the_studies() {
        assert_eq!(make_grid(Rect::square(0.0, 10.0), 9).unwrap().len(), 81);
        assert_eq!(make_grid(Rect::square(-1.0, 1.0), 12).unwrap().len(), 144);
    }

    #[test]
    fn degenerate_rect_rejected() {
        let r = Rect::new(0.0, 0.0, 0.0, 1.0);
        assert!(matches!(make_grid(r, 3), Err(Error::InvalidDesign(_))));
        assert!(matches!(sample_uniform(r, 3, 1), Err(Error::InvalidDesign(_))));
        assert!(make_grid(Rect::square(0.0, 1.0), 1).is_err());
    }

    #[test]
    fn uniform_design_is_deterministic_and_contained() {
        let rect = Rect::square(-1.0, 1.0);
        let a = sample_uniform(rect, 150, 11).unwrap();
        let b = sample_uniform(rect, 150, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 150);
        assert!(a.iter().all(|p| rect.contains(p)));
        let one = sample_uniform(rect, 1, 3).unwrap();
        assert!(rect.contains(&one[0]));
        assert_ne!(a, sample_uniform(rect, 150, 12).unwrap());
    }

    fn parent(n: usize) -> SpatialDataset {
        let pts = sample_uniform(Rect::new(0.0, 6.0, 0.0, 4.0), n, 5).unwrap();
        let vals = (0..n).map(|i| i as f64 * 0.5).collect();
        SpatialDataset::new(pts, vals).unwrap()
    }

    #[test]
    fn subsample_keeps_rows_paired() {
        let p = parent(70);
        for seed in 0..100 {
            let s = subsample(&p, 30, seed).unwrap();
            assert_eq!(s.len(), 30);
            for (pt, v) in s.positions().iter().zip(s.values()) {
                let j = p.positions().iter().position(|q| q == pt).unwrap();
                assert_eq!(p.values()[j], *v);
            }
        }
        let full = subsample(&p, 70, 1).unwrap();
        let mut a: Vec<f64> = full.values().to_vec();
        a.sort_by(f64::total_cmp);
        assert_eq!(a, p.values());
        assert!(matches!(subsample(&p, 71, 1), Err(Error::InvalidSize { .. })));
        assert_eq!(subsample(&p, 20, 9).unwrap(), subsample(&p, 20, 9).unwrap());
    }

    #[test]
    fn duplicate_positions_rejected() {
        let pts = vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(-0.0, 0.0)];
        assert!(SpatialDataset::new(pts, vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn csv_parse_small_file() {
        let text = "x,y,value\n0,0,1.5\n1,0,2.0\n";
        let ds = read_csv_from(text.as_bytes(), Path::new("mem")).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.values(), &[1.5, 2.0]);
    }

    #[test]
    fn csv_errors_name_the_row() {
        let dup = "x,y,value\n0,0,1\n1,0,2\n0,0,3\n";
        match read_csv_from(dup.as_bytes(), Path::new("mem")) {
            Err(Error::Parse { row, message, .. }) => {
                assert_eq!(row, 4);
                assert!(message.contains("duplicate"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let bad = "x,y,value\n0,0,abc\n";
        assert!(matches!(
            read_csv_from(bad.as_bytes(), Path::new("mem")),
            Err(Error::Parse { row: 2, .. })
        ));
        let missing = "x,value\n0,1\n";
        assert!(matches!(
            read_csv_from(missing.as_bytes(), Path::new("mem")),
            Err(Error::Parse { row: 1, .. })
        ));
    }

    #[test]
    fn seventy_row_dataset_accepted() {
        let p = parent(70);
        let mut buf = Vec::new();
        write_csv_to(&p, &mut buf).unwrap();
        let back = read_csv_from(buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back.len(), 70);
        assert!(back
            .positions()
            .iter()
            .all(|q| Rect::new(0.0, 6.0, 0.0, 4.0).contains(q)));
    }
}
