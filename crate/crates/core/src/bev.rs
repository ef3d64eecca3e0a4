//! Depth back-projection and the top-view semantic grid.
//!
//! The grid covers 24 m ahead of the vehicle and 24 m to each side at
//! 0.1875 m per cell (128 rows x 256 columns), with the vehicle anchored at
//! the bottom-center cell. Cells hold class ids from the 20-class palette in
//! [`class`]; empty cells are [`class::NONE`].

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Rows in the grid (forward extent).
pub const BEV_ROWS: usize = 128;
/// Columns in the grid (lateral extent).
pub const BEV_COLS: usize = 256;
/// Cell edge length, meters.
pub const BEV_CELL_M: f64 = 0.1875;
/// Coverage ahead and to each side, meters.
pub const BEV_COVERAGE_M: f64 = 24.0;
/// Points below this height above ground are discarded.
pub const BEV_Z_MIN_M: f64 = -0.5;
/// Points above this height are discarded (sky, overhangs).
pub const BEV_Z_MAX_M: f64 = 3.0;

/// Number of classes in the palette.
pub const CLASS_COUNT: usize = 20;

/// The 20-class palette shared by segmentation rasters, the BEV grid, and
/// world ground truth.
pub mod class {
    pub const NONE: u8 = 0;
    pub const ROAD: u8 = 1;
    pub const SIDEWALK: u8 = 2;
    pub const BUILDING: u8 = 3;
    pub const WALL: u8 = 4;
    pub const FENCE: u8 = 5;
    pub const POLE: u8 = 6;
    pub const TRAFFIC_LIGHT: u8 = 7;
    pub const TRAFFIC_SIGN: u8 = 8;
    pub const VEGETATION: u8 = 9;
    pub const TERRAIN: u8 = 10;
    pub const SKY: u8 = 11;
    pub const PERSON: u8 = 12;
    pub const RIDER: u8 = 13;
    pub const CAR: u8 = 14;
    pub const TRUCK: u8 = 15;
    pub const BUS: u8 = 16;
    pub const TRAIN: u8 = 17;
    pub const MOTORCYCLE: u8 = 18;
    pub const BICYCLE: u8 = 19;
}

/// Dynamic and barrier classes a path must not cross.
pub fn default_obstacle_classes() -> Vec<u8> {
    vec![
        class::WALL,
        class::FENCE,
        class::POLE,
        class::PERSON,
        class::RIDER,
        class::CAR,
        class::TRUCK,
        class::BUS,
        class::TRAIN,
        class::MOTORCYCLE,
        class::BICYCLE,
    ]
}

#[derive(Debug, Error)]
pub enum BevError {
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error(
        "raster dimension mismatch: depth {depth_rows}x{depth_cols}, seg {seg_rows}x{seg_cols}"
    )]
    DimensionMismatch {
        depth_rows: usize,
        depth_cols: usize,
        seg_rows: usize,
        seg_cols: usize,
    },
    #[error("class id {0} outside the {CLASS_COUNT}-class palette")]
    InvalidClassId(u8),
    #[error("raster i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad raster file: {0}")]
    Format(String),
}

/// Pinhole camera model plus its mounting pose on the vehicle. Positive
/// pitch tilts the optical axis down toward the ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub cam_height_m: f64,
    pub cam_pitch_deg: f64,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self {
            fx: 256.0,
            fy: 256.0,
            cx: 256.0,
            cy: 128.0,
            width: 512,
            height: 256,
            cam_height_m: 0.9,
            cam_pitch_deg: 0.0,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<(), BevError> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(BevError::InvalidIntrinsics(format!(
                "focal lengths must be positive: fx={}, fy={}",
                self.fx, self.fy
            )));
        }
        if !(0.0..self.width as f64).contains(&self.cx)
            || !(0.0..self.height as f64).contains(&self.cy)
        {
            return Err(BevError::InvalidIntrinsics(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }
}

/// Row-major raster of depth in meters along the optical axis. Non-finite
/// and non-positive entries mark invalid pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl DepthMap {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Self {
        assert_eq!(data.len(), rows * cols, "depth raster size mismatch");
        Self { rows, cols, data }
    }

    pub fn filled(rows: usize, cols: usize, value: f32) -> Self {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    pub fn depth(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f32) {
        self.data[row * self.cols + col] = value;
    }
}

/// Row-major raster of class ids.
#[derive(Debug, Clone, PartialEq)]
pub struct SegMap {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<u8>,
}

impl SegMap {
    pub fn new(rows: usize, cols: usize, data: Vec<u8>) -> Result<Self, BevError> {
        assert_eq!(data.len(), rows * cols, "seg raster size mismatch");
        if let Some(&bad) = data.iter().find(|&&c| c as usize >= CLASS_COUNT) {
            return Err(BevError::InvalidClassId(bad));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn filled(rows: usize, cols: usize, class_id: u8) -> Result<Self, BevError> {
        Self::new(rows, cols, vec![class_id; rows * cols])
    }

    pub fn class_at(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, class_id: u8) {
        self.data[row * self.cols + col] = class_id;
    }
}

/// Top-view class grid; the vehicle sits at the bottom-center cell
/// `(BEV_ROWS - 1, BEV_COLS / 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BevGrid {
    pub data: Vec<u8>,
}

impl Default for BevGrid {
    fn default() -> Self {
        Self::empty()
    }
}

impl BevGrid {
    pub fn empty() -> Self {
        Self {
            data: vec![class::NONE; BEV_ROWS * BEV_COLS],
        }
    }

    pub fn class_at(&self, row: usize, col: usize) -> u8 {
        self.data[row * BEV_COLS + col]
    }

    pub fn set(&mut self, row: usize, col: usize, class_id: u8) {
        self.data[row * BEV_COLS + col] = class_id;
    }

    /// Grid cell for a vehicle-frame ground position, if it is covered.
    pub fn cell_of(x_m: f64, y_m: f64) -> Option<(usize, usize)> {
        if !(-BEV_COVERAGE_M..BEV_COVERAGE_M).contains(&x_m)
            || !(0.0..BEV_COVERAGE_M).contains(&y_m)
        {
            return None;
        }
        let row = (BEV_ROWS as isize - 1) - (y_m / BEV_CELL_M).floor() as isize;
        let col = (BEV_COLS as isize / 2) + (x_m / BEV_CELL_M).floor() as isize;
        debug_assert!((0..BEV_ROWS as isize).contains(&row));
        debug_assert!((0..BEV_COLS as isize).contains(&col));
        Some((row as usize, col as usize))
    }

    /// Center of a grid cell in the vehicle frame.
    pub fn cell_center(row: usize, col: usize) -> (f64, f64) {
        let x = (col as f64 - BEV_COLS as f64 / 2.0 + 0.5) * BEV_CELL_M;
        let y = (BEV_ROWS as f64 - 1.0 - row as f64 + 0.5) * BEV_CELL_M;
        (x, y)
    }
}

/// A back-projected point in the vehicle frame (x right, y forward, z up),
/// tagged with its source pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehiclePoint {
    pub x_m: f64,
    pub y_m: f64,
    pub z_m: f64,
    pub row: usize,
    pub col: usize,
}

/// Back-projects every valid depth pixel through the pinhole model into the
/// ground-anchored vehicle frame. Invalid (non-finite or non-positive)
/// depths are skipped.
pub fn depth_to_points(
    depth: &DepthMap,
    intr: &CameraIntrinsics,
) -> Result<Vec<VehiclePoint>, BevError> {
    intr.validate()?;
    let (sin_p, cos_p) = intr.cam_pitch_deg.to_radians().sin_cos();
    let mut points = Vec::new();
    for row in 0..depth.rows {
        for col in 0..depth.cols {
            let d = depth.depth(row, col) as f64;
            if !d.is_finite() || d <= 0.0 {
                continue;
            }
            // Camera frame: x right, y down, z along the optical axis.
            let xc = (col as f64 - intr.cx) / intr.fx * d;
            let yc = (row as f64 - intr.cy) / intr.fy * d;
            let zc = d;
            points.push(VehiclePoint {
                x_m: xc,
                y_m: zc * cos_p - yc * sin_p,
                z_m: intr.cam_height_m - yc * cos_p - zc * sin_p,
                row,
                col,
            });
        }
    }
    Ok(points)
}

/// Projects tagged points into the grid, labeling each cell with the class
/// of its highest point so obstacles standing on road win over the road
/// beneath them. Equal heights break toward the smaller class id, keeping
/// the result independent of point order.
pub fn project_to_bev(points: &[VehiclePoint], seg: &SegMap) -> Result<BevGrid, BevError> {
    let mut best: Vec<Option<(f64, u8)>> = vec![None; BEV_ROWS * BEV_COLS];
    for p in points {
        if !(BEV_Z_MIN_M..=BEV_Z_MAX_M).contains(&p.z_m) {
            continue;
        }
        let Some((row, col)) = BevGrid::cell_of(p.x_m, p.y_m) else {
            continue;
        };
        if p.row >= seg.rows || p.col >= seg.cols {
            return Err(BevError::DimensionMismatch {
                depth_rows: p.row + 1,
                depth_cols: p.col + 1,
                seg_rows: seg.rows,
                seg_cols: seg.cols,
            });
        }
        let class_id = seg.class_at(p.row, p.col);
        let slot = &mut best[row * BEV_COLS + col];
        let replace = match *slot {
            None => true,
            Some((z, c)) => p.z_m > z || (p.z_m == z && class_id < c),
        };
        if replace {
            *slot = Some((p.z_m, class_id));
        }
    }
    let mut grid = BevGrid::empty();
    for (cell, slot) in grid.data.iter_mut().zip(best) {
        if let Some((_, c)) = slot {
            *cell = c;
        }
    }
    Ok(grid)
}

/// Analytic depth of the flat ground plane for every pixel; pixels at or
/// above the horizon are invalid (NaN).
pub fn ground_plane_depth(intr: &CameraIntrinsics) -> DepthMap {
    let (sin_p, cos_p) = intr.cam_pitch_deg.to_radians().sin_cos();
    let mut depth = DepthMap::filled(intr.height, intr.width, f32::NAN);
    for row in 0..intr.height {
        let denom = (row as f64 - intr.cy) / intr.fy * cos_p + sin_p;
        if denom <= 1e-9 {
            continue;
        }
        let d = intr.cam_height_m / denom;
        for col in 0..intr.width {
            depth.set(row, col, d as f32);
        }
    }
    depth
}

// ---------------------------------------------------------------------------
// Raster file formats
// ---------------------------------------------------------------------------

const DEPTH_MAGIC: &[u8; 4] = b"DPF1";

impl DepthMap {
    /// Writes the 16-byte header (magic, LE rows, LE cols, reserved) followed
    /// by row-major little-endian f32 samples.
    pub fn write_file(&self, path: &Path) -> Result<(), BevError> {
        let mut buf = Vec::with_capacity(16 + self.data.len() * 4);
        buf.extend_from_slice(DEPTH_MAGIC);
        buf.extend_from_slice(&(self.rows as u32).to_le_bytes());
        buf.extend_from_slice(&(self.cols as u32).to_le_bytes());
        buf.extend_from_slice(&[0u8; 4]);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self, BevError> {
        let mut file = std::fs::File::open(path)?;
        let mut header = [0u8; 16];
        file.read_exact(&mut header)?;
        if &header[0..4] != DEPTH_MAGIC {
            return Err(BevError::Format(format!(
                "bad depth magic {:?} in {}",
                &header[0..4],
                path.display()
            )));
        }
        let rows = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let mut raw = Vec::new();
        file.read_to_end(&mut raw)?;
        if raw.len() != rows * cols * 4 {
            return Err(BevError::Format(format!(
                "depth payload {} bytes, expected {} for {rows}x{cols}",
                raw.len(),
                rows * cols * 4
            )));
        }
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self { rows, cols, data })
    }
}

fn write_pgm(path: &Path, rows: usize, cols: usize, data: &[u8]) -> Result<(), BevError> {
    let mut file = std::fs::File::create(path)?;
    write!(file, "P5\n{cols} {rows}\n255\n")?;
    file.write_all(data)?;
    Ok(())
}

fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>), BevError> {
    let raw = std::fs::read(path)?;
    let bad = |msg: &str| BevError::Format(format!("{msg} in {}", path.display()));
    if raw.len() < 2 || &raw[0..2] != b"P5" {
        return Err(bad("not a binary PGM (P5)"));
    }
    // Header: three whitespace-separated tokens (width, height, maxval) with
    // optional '#' comment lines, then a single whitespace byte.
    let mut pos = 2;
    let mut tokens = Vec::new();
    while tokens.len() < 3 {
        while pos < raw.len() && raw[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < raw.len() && raw[pos] == b'#' {
            while pos < raw.len() && raw[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < raw.len() && !raw[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated PGM header"));
        }
        tokens.push(std::str::from_utf8(&raw[start..pos]).map_err(|_| bad("bad header token"))?);
    }
    pos += 1; // single whitespace after maxval
    let cols: usize = tokens[0].parse().map_err(|_| bad("bad width"))?;
    let rows: usize = tokens[1].parse().map_err(|_| bad("bad height"))?;
    if tokens[2] != "255" {
        return Err(bad("maxval must be 255"));
    }
    if raw.len() < pos + rows * cols {
        return Err(bad("PGM payload shorter than header promises"));
    }
    Ok((rows, cols, raw[pos..pos + rows * cols].to_vec()))
}

impl SegMap {
    /// Binary PGM (P5, maxval 255) with class ids as pixel values.
    pub fn write_file(&self, path: &Path) -> Result<(), BevError> {
        write_pgm(path, self.rows, self.cols, &self.data)
    }

    pub fn read_file(path: &Path) -> Result<Self, BevError> {
        let (rows, cols, data) = read_pgm(path)?;
        Self::new(rows, cols, data)
    }
}

impl BevGrid {
    /// Same PGM convention as segmentation rasters.
    pub fn write_file(&self, path: &Path) -> Result<(), BevError> {
        write_pgm(path, BEV_ROWS, BEV_COLS, &self.data)
    }

    pub fn read_file(path: &Path) -> Result<Self, BevError> {
        let (rows, cols, data) = read_pgm(path)?;
        if rows != BEV_ROWS || cols != BEV_COLS {
            return Err(BevError::Format(format!(
                "BEV grid must be {BEV_ROWS}x{BEV_COLS}, file is {rows}x{cols}"
            )));
        }
        if let Some(&bad) = data.iter().find(|&&c| c as usize >= CLASS_COUNT) {
            return Err(BevError::InvalidClassId(bad));
        }
        Ok(Self { data })
    }
}
