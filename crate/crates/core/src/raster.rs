//! Uniform planar rasters.
//!
//! Values are stored row-major with row 0 at the top (northern) edge, the
//! same order as an ESRI ASCII grid body. Missing cells are held as NaN
//! internally and surface as `None`.

use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RasterError {
    #[error("invalid header: {0}")]
    Header(&'static str),
    #[error("expected {expected} values for a {ncols}x{nrows} grid, found {found}")]
    ValueCount {
        ncols: usize,
        nrows: usize,
        expected: usize,
        found: usize,
    },
    #[error("{kind} value {value} out of range at cell {index} (row {row}, col {col})")]
    OutOfRange {
        kind: LayerKind,
        value: f64,
        index: usize,
        row: usize,
        col: usize,
    },
    #[error("point ({x}, {y}) lies outside the grid")]
    OutOfBounds { x: f64, y: f64 },
    #[error("rasters are not aligned")]
    Unaligned,
}

/// Spatial frame of a raster.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridHeader {
    pub ncols: usize,
    pub nrows: usize,
    /// Lower-left corner x, metres.
    pub xll: f64,
    /// Lower-left corner y, metres.
    pub yll: f64,
    pub cellsize: f64,
    pub nodata: f64,
}

const ALIGN_RTOL: f64 = 1e-6;

fn close(a: f64, b: f64) -> bool {
    if a == b {
        return true;
    }
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= ALIGN_RTOL * scale
}

impl GridHeader {
    pub fn validate(&self) -> Result<(), RasterError> {
        if self.ncols == 0 {
            return Err(RasterError::Header("ncols must be at least 1"));
        }
        if self.nrows == 0 {
            return Err(RasterError::Header("nrows must be at least 1"));
        }
        if !(self.cellsize > 0.0) || !self.cellsize.is_finite() {
            return Err(RasterError::Header("cellsize must be positive"));
        }
        if !self.xll.is_finite() || !self.yll.is_finite() {
            return Err(RasterError::Header("corner coordinates must be finite"));
        }
        Ok(())
    }

    /// Two headers are aligned when all six fields agree within 1e-6
    /// relative tolerance.
    pub fn is_aligned(&self, other: &GridHeader) -> bool {
        self.ncols == other.ncols
            && self.nrows == other.nrows
            && close(self.xll, other.xll)
            && close(self.yll, other.yll)
            && close(self.cellsize, other.cellsize)
            && close(self.nodata, other.nodata)
    }

    pub fn len(&self) -> usize {
        self.ncols * self.nrows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width_m(&self) -> f64 {
        self.ncols as f64 * self.cellsize
    }

    pub fn height_m(&self) -> f64 {
        self.nrows as f64 * self.cellsize
    }

    pub fn xmax(&self) -> f64 {
        self.xll + self.width_m()
    }

    pub fn ymax(&self) -> f64 {
        self.yll + self.height_m()
    }

    /// Area of one cell in km².
    pub fn cell_area_km2(&self) -> f64 {
        self.cellsize * self.cellsize / 1.0e6
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.xll && p.x <= self.xmax() && p.y >= self.yll && p.y <= self.ymax()
    }

    /// Cell `(row, col)` containing `p`. Points on the far right or top
    /// edge belong to the last cell.
    pub fn cell_of(&self, p: Point) -> Result<(usize, usize), RasterError> {
        if !self.contains(p) || !p.x.is_finite() || !p.y.is_finite() {
            return Err(RasterError::OutOfBounds { x: p.x, y: p.y });
        }
        let col = (libm::floor((p.x - self.xll) / self.cellsize) as usize).min(self.ncols - 1);
        let from_bottom =
            (libm::floor((p.y - self.yll) / self.cellsize) as usize).min(self.nrows - 1);
        Ok((self.nrows - 1 - from_bottom, col))
    }

    pub fn cell_center(&self, row: usize, col: usize) -> Point {
        Point::new(
            self.xll + (col as f64 + 0.5) * self.cellsize,
            self.yll + ((self.nrows - 1 - row) as f64 + 0.5) * self.cellsize,
        )
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.ncols + col
    }

    /// Cells crossed by the segment `a → b`, in order from `a`, using a
    /// grid traversal. Both endpoints must be inside the grid.
    pub fn cells_on_segment(&self, a: Point, b: Point) -> Result<Vec<(usize, usize)>, RasterError> {
        let (mut row, mut col) = self.cell_of(a)?;
        let (end_row, end_col) = self.cell_of(b)?;
        let mut cells = Vec::new();
        cells.push((row, col));

        let dx = b.x - a.x;
        let dy = b.y - a.y;
        let step_col: isize = if dx > 0.0 { 1 } else { -1 };
        // rows increase southwards
        let step_row: isize = if dy > 0.0 { -1 } else { 1 };

        let cs = self.cellsize;
        let col_edge = |c: usize| {
            let base = self.xll + c as f64 * cs;
            if dx > 0.0 { base + cs } else { base }
        };
        let row_edge = |r: usize| {
            let base = self.yll + (self.nrows - 1 - r) as f64 * cs;
            if dy > 0.0 { base + cs } else { base }
        };
        let mut t_max_x = if dx != 0.0 { (col_edge(col) - a.x) / dx } else { f64::INFINITY };
        let mut t_max_y = if dy != 0.0 { (row_edge(row) - a.y) / dy } else { f64::INFINITY };
        let t_delta_x = if dx != 0.0 { cs / dx.abs() } else { f64::INFINITY };
        let t_delta_y = if dy != 0.0 { cs / dy.abs() } else { f64::INFINITY };

        let limit = self.ncols + self.nrows + 2;
        while (row, col) != (end_row, end_col) && cells.len() <= limit {
            if t_max_x < t_max_y {
                let next = col as isize + step_col;
                if next < 0 || next >= self.ncols as isize {
                    break;
                }
                col = next as usize;
                t_max_x += t_delta_x;
            } else {
                let next = row as isize + step_row;
                if next < 0 || next >= self.nrows as isize {
                    break;
                }
                row = next as usize;
                t_max_y += t_delta_y;
            }
            cells.push((row, col));
        }
        Ok(cells)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LayerKind {
    Elevation,
    Population,
    Vegetation,
    Canopy,
    RegionId,
}

impl LayerKind {
    pub const ALL: [LayerKind; 5] = [
        LayerKind::Elevation,
        LayerKind::Population,
        LayerKind::Vegetation,
        LayerKind::Canopy,
        LayerKind::RegionId,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::Elevation => "elevation_m",
            LayerKind::Population => "population_per_cell",
            LayerKind::Vegetation => "vegetation_fraction",
            LayerKind::Canopy => "canopy_height_m",
            LayerKind::RegionId => "region_id",
        }
    }

    fn accepts(&self, v: f64) -> bool {
        if !v.is_finite() {
            return false;
        }
        match self {
            LayerKind::Elevation => true,
            LayerKind::Population | LayerKind::Canopy => v >= 0.0,
            LayerKind::Vegetation => (0.0..=1.0).contains(&v),
            LayerKind::RegionId => v >= 0.0 && libm::floor(v) == v,
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An immutable, validated raster layer.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterGrid {
    header: GridHeader,
    kind: LayerKind,
    values: Vec<f64>,
}

impl RasterGrid {
    /// Builds a grid from raw values. Cells equal to `header.nodata` (or NaN)
    /// become missing; every other cell must be in range for `kind`.
    pub fn new(header: GridHeader, kind: LayerKind, mut values: Vec<f64>) -> Result<Self, RasterError> {
        header.validate()?;
        if values.len() != header.len() {
            return Err(RasterError::ValueCount {
                ncols: header.ncols,
                nrows: header.nrows,
                expected: header.len(),
                found: values.len(),
            });
        }
        for (index, v) in values.iter_mut().enumerate() {
            if v.is_nan() || *v == header.nodata {
                *v = f64::NAN;
                continue;
            }
            if !kind.accepts(*v) {
                return Err(RasterError::OutOfRange {
                    kind,
                    value: *v,
                    index,
                    row: index / header.ncols,
                    col: index % header.ncols,
                });
            }
        }
        Ok(Self { header, kind, values })
    }

    /// A grid where every cell holds `value`.
    pub fn filled(header: GridHeader, kind: LayerKind, value: f64) -> Result<Self, RasterError> {
        Self::new(header, kind, alloc::vec![value; header.len()])
    }

    /// Builds a grid by evaluating `f` at every cell centre.
    pub fn from_fn(
        header: GridHeader,
        kind: LayerKind,
        mut f: impl FnMut(Point) -> f64,
    ) -> Result<Self, RasterError> {
        let mut values = Vec::with_capacity(header.len());
        for row in 0..header.nrows {
            for col in 0..header.ncols {
                values.push(f(header.cell_center(row, col)));
            }
        }
        Self::new(header, kind, values)
    }

    pub fn header(&self) -> &GridHeader {
        &self.header
    }

    pub fn kind(&self) -> LayerKind {
        self.kind
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        if row >= self.header.nrows || col >= self.header.ncols {
            return None;
        }
        let v = self.values[self.header.index(row, col)];
        (!v.is_nan()).then_some(v)
    }

    /// Nearest-cell sample. `Ok(None)` means the cell is nodata.
    pub fn sample_at(&self, p: Point) -> Result<Option<f64>, RasterError> {
        let (row, col) = self.header.cell_of(p)?;
        Ok(self.get(row, col))
    }

    /// Raw values with missing cells as NaN.
    pub fn raw_values(&self) -> &[f64] {
        &self.values
    }

    /// Values with missing cells replaced by the header's nodata sentinel.
    pub fn values_with_nodata(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .map(|v| if v.is_nan() { self.header.nodata } else { *v })
    }

    /// `(row, col, value)` for every valid cell.
    pub fn valid_cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let ncols = self.header.ncols;
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_nan())
            .map(move |(i, v)| (i / ncols, i % ncols, *v))
    }

    pub fn ensure_aligned(&self, other: &RasterGrid) -> Result<(), RasterError> {
        if self.header.is_aligned(&other.header) {
            Ok(())
        } else {
            Err(RasterError::Unaligned)
        }
    }

    /// Mean of the valid cells, if any.
    pub fn mean(&self) -> Option<f64> {
        let (sum, n) = self
            .valid_cells()
            .fold((0.0, 0usize), |(s, n), (_, _, v)| (s + v, n + 1));
        (n > 0).then(|| sum / n as f64)
    }
}
