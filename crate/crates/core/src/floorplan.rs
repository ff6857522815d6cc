//! Semantic occupancy grids built from raster floorplans.
//!
//! Grid convention: cell `(col, row)` covers `[col, col+1) × [row, row+1)` in
//! cell units of the grid frame, whose origin and heading are given by the
//! plan's `origin` pose. Rows grow along +y, so image row 0 (the top of the
//! raster) becomes the last grid row when loading.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use image::{GrayImage, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose2D;
use crate::kv::KeyValues;

pub const DEFAULT_OCCUPIED_THRESH: f64 = 0.65;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Wall,
    Door,
    Window,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Wall, Label::Door, Label::Window];

    pub fn index(self) -> usize {
        match self {
            Label::Wall => 0,
            Label::Door => 1,
            Label::Window => 2,
        }
    }

    /// Raster / log code: 1 = wall, 2 = door, 3 = window.
    pub fn code(self) -> u8 {
        self.index() as u8 + 1
    }

    /// `Ok(None)` for code 0 (no label), an error for anything above 3.
    pub fn from_code(code: u8) -> Option<Option<Label>> {
        match code {
            0 => Some(None),
            1 => Some(Some(Label::Wall)),
            2 => Some(Some(Label::Door)),
            3 => Some(Some(Label::Window)),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Wall => "wall",
            Label::Door => "door",
            Label::Window => "window",
        }
    }
}

pub fn label_code(label: Option<Label>) -> u8 {
    label.map_or(0, Label::code)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Cell {
    pub occupancy: f64,
    /// Indexed by [`Label::index`].
    pub labels: [f64; 3],
}

impl Cell {
    pub const FREE: Cell = Cell {
        occupancy: 0.0,
        labels: [0.0; 3],
    };

    pub fn occupied() -> Self {
        Cell {
            occupancy: 1.0,
            labels: [0.0; 3],
        }
    }

    pub fn labelled(label: Label) -> Self {
        let mut labels = [0.0; 3];
        labels[label.index()] = 1.0;
        Cell {
            occupancy: 1.0,
            labels,
        }
    }

    pub fn label_likelihood(&self, label: Label) -> f64 {
        self.labels[label.index()]
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let unit = 0.0..=1.0;
        if !unit.contains(&self.occupancy) {
            return Err(format!("occupancy {} outside [0, 1]", self.occupancy));
        }
        for (i, &l) in self.labels.iter().enumerate() {
            if !unit.contains(&l) {
                return Err(format!("label likelihood {l} outside [0, 1]"));
            }
            if l > 0.0 && self.occupancy <= 0.0 {
                return Err(format!(
                    "{} likelihood {l} on a cell with zero occupancy",
                    Label::ALL[i].name()
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridIndex {
    pub col: usize,
    pub row: usize,
}

impl GridIndex {
    pub fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }
}

/// Resolution, origin and threshold of a plan; mirrors the metadata file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapMeta {
    pub resolution: f64,
    pub origin: Pose2D,
    pub occupied_thresh: f64,
}

impl MapMeta {
    pub fn new(resolution: f64) -> Self {
        Self {
            resolution,
            origin: Pose2D::default(),
            occupied_thresh: DEFAULT_OCCUPIED_THRESH,
        }
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        Ok(Self {
            resolution: kv.require("resolution")?,
            origin: Pose2D::new(
                kv.get_or("origin_x", 0.0)?,
                kv.get_or("origin_y", 0.0)?,
                kv.get_or("origin_theta", 0.0)?,
            ),
            occupied_thresh: kv.get_or("occupied_thresh", DEFAULT_OCCUPIED_THRESH)?,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_key_values(&KeyValues::read(path)?)
    }

    pub fn to_text(&self) -> String {
        format!(
            "resolution: {}\norigin_x: {}\norigin_y: {}\norigin_theta: {}\noccupied_thresh: {}\n",
            self.resolution,
            self.origin.x,
            self.origin.y,
            self.origin.theta,
            self.occupied_thresh
        )
    }
}

/// An occupancy grid whose structure cells also carry wall/door/window
/// likelihoods. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticFloorplan {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Pose2D,
    occupied_thresh: f64,
    cells: Vec<Cell>,
    // Derived once so the hot loops avoid re-thresholding.
    occupied: Vec<bool>,
    dominant: Vec<Option<Label>>,
    origin_sin_cos: (f64, f64),
}

impl SemanticFloorplan {
    pub fn new(
        width: usize,
        height: usize,
        resolution: f64,
        origin: Pose2D,
        occupied_thresh: f64,
        cells: Vec<Cell>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidPlan(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::InvalidPlan(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        if !(occupied_thresh > 0.0 && occupied_thresh < 1.0) {
            return Err(Error::InvalidPlan(format!(
                "occupied_thresh must lie in (0, 1), got {occupied_thresh}"
            )));
        }
        if cells.len() != width * height {
            return Err(Error::InvalidPlan(format!(
                "expected {} cells, got {}",
                width * height,
                cells.len()
            )));
        }
        for (i, cell) in cells.iter().enumerate() {
            cell.validate().map_err(|msg| {
                Error::InvalidPlan(format!("cell ({}, {}): {msg}", i % width, i / width))
            })?;
        }
        let occupied = cells
            .iter()
            .map(|c| c.occupancy >= occupied_thresh)
            .collect();
        let dominant = cells
            .iter()
            .map(|c| dominant_label(c, occupied_thresh))
            .collect();
        Ok(Self {
            width,
            height,
            resolution,
            origin,
            occupied_thresh,
            cells,
            occupied,
            dominant,
            origin_sin_cos: origin.theta.sin_cos(),
        })
    }

    pub fn from_meta(width: usize, height: usize, meta: &MapMeta, cells: Vec<Cell>) -> Result<Self> {
        Self::new(
            width,
            height,
            meta.resolution,
            meta.origin,
            meta.occupied_thresh,
            cells,
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Pose2D {
        self.origin
    }

    pub fn occupied_thresh(&self) -> f64 {
        self.occupied_thresh
    }

    pub fn meta(&self) -> MapMeta {
        MapMeta {
            resolution: self.resolution,
            origin: self.origin,
            occupied_thresh: self.occupied_thresh,
        }
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    pub fn linear(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    pub fn contains(&self, idx: GridIndex) -> bool {
        idx.col < self.width && idx.row < self.height
    }

    pub fn cell(&self, idx: GridIndex) -> Option<&Cell> {
        self.contains(idx)
            .then(|| &self.cells[self.linear(idx.col, idx.row)])
    }

    /// Eq. 2 style thresholded occupancy.
    #[inline]
    pub fn is_occupied(&self, col: usize, row: usize) -> bool {
        self.occupied[self.linear(col, row)]
    }

    #[inline]
    pub(crate) fn occupied_mask(&self) -> &[bool] {
        &self.occupied
    }

    /// Label with the highest likelihood, if it reaches the threshold.
    #[inline]
    pub fn dominant_label(&self, col: usize, row: usize) -> Option<Label> {
        self.dominant[self.linear(col, row)]
    }

    /// Map-frame point to continuous grid coordinates in cell units.
    #[inline]
    pub fn world_to_local(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.origin_sin_cos;
        let dx = x - self.origin.x;
        let dy = y - self.origin.y;
        (
            (c * dx + s * dy) / self.resolution,
            (-s * dx + c * dy) / self.resolution,
        )
    }

    #[inline]
    pub fn local_to_world(&self, u: f64, v: f64) -> (f64, f64) {
        let (s, c) = self.origin_sin_cos;
        let (u, v) = (u * self.resolution, v * self.resolution);
        (self.origin.x + c * u - s * v, self.origin.y + s * u + c * v)
    }

    /// Cell containing a map-frame point, or `None` when it falls off the grid.
    #[inline]
    pub fn world_to_grid(&self, x: f64, y: f64) -> Option<GridIndex> {
        let (u, v) = self.world_to_local(x, y);
        self.local_to_grid(u, v)
    }

    #[inline]
    pub fn local_to_grid(&self, u: f64, v: f64) -> Option<GridIndex> {
        if !(u >= 0.0 && v >= 0.0) {
            return None;
        }
        let (col, row) = (u.floor(), v.floor());
        if col >= self.width as f64 || row >= self.height as f64 {
            return None;
        }
        Some(GridIndex::new(col as usize, row as usize))
    }

    /// Map-frame centre of a cell.
    pub fn grid_to_world(&self, idx: GridIndex) -> Result<(f64, f64)> {
        if !self.contains(idx) {
            return Err(Error::IndexOutOfBounds {
                col: idx.col,
                row: idx.row,
                width: self.width,
                height: self.height,
            });
        }
        Ok(self.local_to_world(idx.col as f64 + 0.5, idx.row as f64 + 0.5))
    }

    /// Fraction of occupied cells whose dominant label is `label`.
    ///
    /// Each occupied cell counts towards at most one label, so the priors of
    /// all labels sum to at most one.
    pub fn label_prior(&self, label: Label) -> Result<f64> {
        let mut occupied = 0usize;
        let mut labelled = 0usize;
        for (occ, dom) in self.occupied.iter().zip(&self.dominant) {
            if *occ {
                occupied += 1;
                if *dom == Some(label) {
                    labelled += 1;
                }
            }
        }
        if occupied == 0 {
            return Err(Error::EmptyPlan);
        }
        Ok(labelled as f64 / occupied as f64)
    }

    pub fn label_priors(&self) -> Result<[f64; 3]> {
        Ok([
            self.label_prior(Label::Wall)?,
            self.label_prior(Label::Door)?,
            self.label_prior(Label::Window)?,
        ])
    }

    pub fn free_cells(&self) -> impl Iterator<Item = GridIndex> + '_ {
        self.occupied
            .iter()
            .enumerate()
            .filter(|(_, occ)| !**occ)
            .map(|(i, _)| GridIndex::new(i % self.width, i / self.width))
    }

    /// Same plan with resolution and origin translation scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let origin = Pose2D::new(self.origin.x * factor, self.origin.y * factor, self.origin.theta);
        Self::new(
            self.width,
            self.height,
            self.resolution * factor,
            origin,
            self.occupied_thresh,
            self.cells.clone(),
        )
    }

    /// Occupancy raster (dark = occupied) with image row 0 at the top.
    pub fn occupancy_image(&self) -> GrayImage {
        GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            let row = self.height - 1 - y as usize;
            let occ = self.cells[self.linear(x as usize, row)].occupancy;
            Luma([((1.0 - occ) * 255.0).round().clamp(0.0, 255.0) as u8])
        })
    }

    /// Label raster of codes `{0, 1, 2, 3}`.
    pub fn label_image(&self) -> GrayImage {
        GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            let row = self.height - 1 - y as usize;
            Luma([label_code(self.dominant_label(x as usize, row))])
        })
    }

    /// Write `<stem>_occ.png`, `<stem>_labels.png` and `<stem>.meta` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<MapPaths> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let paths = MapPaths {
            occupancy: dir.join(format!("{stem}_occ.png")),
            labels: dir.join(format!("{stem}_labels.png")),
            meta: dir.join(format!("{stem}.meta")),
        };
        self.occupancy_image()
            .save(&paths.occupancy)
            .map_err(|e| Error::Image {
                path: paths.occupancy.clone(),
                source: e,
            })?;
        self.label_image()
            .save(&paths.labels)
            .map_err(|e| Error::Image {
                path: paths.labels.clone(),
                source: e,
            })?;
        std::fs::write(&paths.meta, self.meta().to_text()).map_err(|e| Error::io(&paths.meta, e))?;
        Ok(paths)
    }
}

fn dominant_label(cell: &Cell, thresh: f64) -> Option<Label> {
    if cell.occupancy < thresh {
        return None;
    }
    let mut best: Option<(Label, f64)> = None;
    for label in Label::ALL {
        let l = cell.label_likelihood(label);
        if l >= thresh && best.is_none_or(|(_, b)| l > b) {
            best = Some((label, l));
        }
    }
    best.map(|(label, _)| label)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapPaths {
    pub occupancy: std::path::PathBuf,
    pub labels: std::path::PathBuf,
    pub meta: std::path::PathBuf,
}

/// Build a plan from an occupancy raster (grey, dark = occupied) and a label
/// raster of codes `{0 = none, 1 = wall, 2 = door, 3 = window}`.
pub fn from_rasters(occupancy: &GrayImage, labels: &GrayImage, meta: &MapMeta) -> Result<SemanticFloorplan> {
    if occupancy.dimensions() != labels.dimensions() {
        return Err(Error::DimensionMismatch {
            occupancy: occupancy.dimensions(),
            labels: labels.dimensions(),
        });
    }
    let (w, h) = occupancy.dimensions();
    let (width, height) = (w as usize, h as usize);
    let mut cells = vec![Cell::FREE; width * height];
    for y in 0..h {
        let row = height - 1 - y as usize;
        for x in 0..w {
            let grey = occupancy.get_pixel(x, y)[0];
            let code = labels.get_pixel(x, y)[0];
            let label = Label::from_code(code).ok_or(Error::UnknownLabelCode {
                code,
                col: x,
                row: y,
            })?;
            let cell = &mut cells[row * width + x as usize];
            cell.occupancy = 1.0 - f64::from(grey) / 255.0;
            if let Some(label) = label {
                cell.labels[label.index()] = 1.0;
            }
        }
    }
    SemanticFloorplan::from_meta(width, height, meta, cells)
}

/// Load a plan from raster files and a metadata file.
pub fn load_floorplan(occupancy: &Path, labels: &Path, meta: &Path) -> Result<SemanticFloorplan> {
    let meta = MapMeta::read(meta)?;
    let occ = read_gray(occupancy)?;
    let lab = read_codes(labels)?;
    from_rasters(&occ, &lab, &meta)
}

pub fn load_paths(paths: &MapPaths) -> Result<SemanticFloorplan> {
    load_floorplan(&paths.occupancy, &paths.labels, &paths.meta)
}

fn read_gray(path: &Path) -> Result<GrayImage> {
    image::open(path)
        .map(|img| img.into_luma8())
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            source: e,
        })
}

/// Raw 8-bit codes. Palette PNGs are read as indices rather than expanded
/// to colours.
fn read_codes(path: &Path) -> Result<GrayImage> {
    let is_png = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if !is_png {
        return read_gray(path);
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let bad = |msg: String| Error::parse(path.display().to_string(), msg);
    let mut reader = decoder.read_info().map_err(|e| bad(e.to_string()))?;
    let info = reader.info();
    let (w, h) = (info.width, info.height);
    let (color, depth) = (info.color_type, info.bit_depth);
    if depth != png::BitDepth::Eight
        || !matches!(color, png::ColorType::Indexed | png::ColorType::Grayscale)
    {
        return Err(bad(format!(
            "label raster must be 8-bit indexed or greyscale, got {color:?} {depth:?}"
        )));
    }
    let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| bad("image too large".into()))?];
    let frame = reader.next_frame(&mut buf).map_err(|e| bad(e.to_string()))?;
    buf.truncate(frame.buffer_size());
    let stride = frame.line_size;
    let mut data = Vec::with_capacity((w * h) as usize);
    for y in 0..h as usize {
        data.extend_from_slice(&buf[y * stride..y * stride + w as usize]);
    }
    GrayImage::from_raw(w, h, data).ok_or_else(|| bad("truncated image data".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn plan_from(width: usize, height: usize, res: f64, origin: Pose2D, cells: Vec<Cell>) -> SemanticFloorplan {
        SemanticFloorplan::new(width, height, res, origin, DEFAULT_OCCUPIED_THRESH, cells).unwrap()
    }

    #[test]
    fn white_raster_is_free_and_black_is_occupied() {
        let occ = GrayImage::from_pixel(4, 3, Luma([255]));
        let lab = GrayImage::new(4, 3);
        let plan = from_rasters(&occ, &lab, &MapMeta::new(0.1)).unwrap();
        assert!(plan.cells().iter().all(|c| c.occupancy == 0.0));

        let occ = GrayImage::from_pixel(2, 2, Luma([0]));
        let plan = from_rasters(&occ, &GrayImage::new(2, 2), &MapMeta::new(0.1)).unwrap();
        assert!(plan.cells().iter().all(|c| c.occupancy == 1.0));
    }

    #[test]
    fn centre_door_fixture() {
        let mut occ = GrayImage::from_pixel(3, 3, Luma([255]));
        let mut lab = GrayImage::new(3, 3);
        occ.put_pixel(1, 1, Luma([0]));
        lab.put_pixel(1, 1, Luma([2]));
        let plan = from_rasters(&occ, &lab, &MapMeta::new(1.0)).unwrap();
        for row in 0..3 {
            for col in 0..3 {
                let cell = plan.cell(GridIndex::new(col, row)).unwrap();
                if (col, row) == (1, 1) {
                    assert_eq!(cell.occupancy, 1.0);
                    assert_eq!(cell.label_likelihood(Label::Door), 1.0);
                    assert_eq!(cell.label_likelihood(Label::Wall), 0.0);
                } else {
                    assert_eq!(*cell, Cell::FREE);
                }
            }
        }
    }

    #[test]
    fn loader_rejects_bad_inputs() {
        let occ = GrayImage::from_pixel(3, 3, Luma([255]));
        let err = from_rasters(&occ, &GrayImage::new(3, 2), &MapMeta::new(1.0)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));

        let mut lab = GrayImage::new(3, 3);
        lab.put_pixel(0, 0, Luma([7]));
        let err = from_rasters(&occ, &lab, &MapMeta::new(1.0)).unwrap_err();
        assert!(matches!(err, Error::UnknownLabelCode { code: 7, .. }));

        let err = load_floorplan(Path::new("/nonexistent/a.png"), Path::new("/nonexistent/b.png"), Path::new("/nonexistent/m.meta"))
            .unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn image_rows_are_flipped_into_grid_rows() {
        let mut occ = GrayImage::from_pixel(2, 3, Luma([255]));
        occ.put_pixel(0, 0, Luma([0]));
        let plan = from_rasters(&occ, &GrayImage::new(2, 3), &MapMeta::new(1.0)).unwrap();
        assert!(plan.is_occupied(0, 2));
        assert!(!plan.is_occupied(0, 0));
    }

    #[test]
    fn world_grid_conversions() {
        let plan = plan_from(16, 16, 0.05, Pose2D::default(), vec![Cell::FREE; 256]);
        assert_eq!(plan.world_to_grid(0.0, 0.0), Some(GridIndex::new(0, 0)));
        assert_eq!(plan.world_to_grid(2.5 * 0.05, 3.5 * 0.05), Some(GridIndex::new(2, 3)));
        assert_eq!(plan.world_to_grid(-0.001, 0.0), None);
        assert_eq!(plan.world_to_grid(0.0, 16.0 * 0.05 + 1e-9), None);
        let (x, y) = plan.grid_to_world(GridIndex::new(0, 0)).unwrap();
        assert!((x - 0.025).abs() < 1e-15 && (y - 0.025).abs() < 1e-15);
        assert!(plan.grid_to_world(GridIndex::new(16, 0)).is_err());

        let unit = plan_from(4, 4, 1.0, Pose2D::default(), vec![Cell::FREE; 16]);
        assert_eq!(unit.grid_to_world(GridIndex::new(2, 3)).unwrap(), (2.5, 3.5));
    }

    #[test]
    fn rotated_origin() {
        let origin = Pose2D::new(1.0, 2.0, FRAC_PI_2);
        let res = 0.5;
        let plan = plan_from(4, 4, res, origin, vec![Cell::FREE; 16]);
        let (x, y) = plan.grid_to_world(GridIndex::new(1, 0)).unwrap();
        // Rotating (1.5 res, 0.5 res) by +90° gives (-0.5 res, 1.5 res).
        assert!((x - (1.0 - 0.5 * res)).abs() < 1e-12);
        assert!((y - (2.0 + 1.5 * res)).abs() < 1e-12);
        assert_eq!(plan.world_to_grid(x, y), Some(GridIndex::new(1, 0)));
    }

    #[test]
    fn grid_round_trip_is_exhaustive_identity() {
        for origin in [Pose2D::default(), Pose2D::new(-3.0, 1.25, 0.4), Pose2D::new(0.5, 0.5, -2.9)] {
            let plan = plan_from(16, 16, 0.05, origin, vec![Cell::FREE; 256]);
            for row in 0..16 {
                for col in 0..16 {
                    let idx = GridIndex::new(col, row);
                    let (x, y) = plan.grid_to_world(idx).unwrap();
                    assert_eq!(plan.world_to_grid(x, y), Some(idx));
                }
            }
        }
    }

    #[test]
    fn label_priors_count_occupied_cells() {
        let mut cells = vec![Cell::FREE; 200];
        for (i, cell) in cells.iter_mut().take(100).enumerate() {
            *cell = match i {
                0..80 => Cell::labelled(Label::Wall),
                80..95 => Cell::labelled(Label::Door),
                _ => Cell::labelled(Label::Window),
            };
        }
        let plan = plan_from(20, 10, 0.1, Pose2D::default(), cells);
        let p = plan.label_priors().unwrap();
        assert_eq!(p, [0.80, 0.15, 0.05]);

        let mut cells = vec![Cell::occupied(); 10];
        cells[3] = Cell::labelled(Label::Door);
        cells[7] = Cell::labelled(Label::Door);
        let plan = plan_from(10, 1, 0.1, Pose2D::default(), cells);
        assert_eq!(plan.label_prior(Label::Door).unwrap(), 0.2);
        assert_eq!(plan.label_prior(Label::Wall).unwrap(), 0.0);

        let walls = plan_from(3, 1, 0.1, Pose2D::default(), vec![Cell::labelled(Label::Wall); 3]);
        assert_eq!(walls.label_priors().unwrap(), [1.0, 0.0, 0.0]);

        let empty = plan_from(3, 1, 0.1, Pose2D::default(), vec![Cell::FREE; 3]);
        assert!(matches!(empty.label_prior(Label::Wall), Err(Error::EmptyPlan)));
    }

    #[test]
    fn invalid_plans_are_rejected() {
        assert!(SemanticFloorplan::new(0, 1, 1.0, Pose2D::default(), 0.5, vec![]).is_err());
        assert!(SemanticFloorplan::new(1, 1, 0.0, Pose2D::default(), 0.5, vec![Cell::FREE]).is_err());
        assert!(SemanticFloorplan::new(1, 1, 1.0, Pose2D::default(), 1.0, vec![Cell::FREE]).is_err());
        assert!(SemanticFloorplan::new(2, 1, 1.0, Pose2D::default(), 0.5, vec![Cell::FREE]).is_err());
        let bad = Cell {
            occupancy: 0.0,
            labels: [1.0, 0.0, 0.0],
        };
        assert!(SemanticFloorplan::new(1, 1, 1.0, Pose2D::default(), 0.5, vec![bad]).is_err());
    }

    #[test]
    fn save_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut cells = vec![Cell::FREE; 12];
        cells[1] = Cell::labelled(Label::Window);
        cells[5] = Cell::occupied();
        cells[6] = Cell::labelled(Label::Door);
        let meta = MapMeta {
            resolution: 0.05,
            origin: Pose2D::new(-1.0, 2.0, 0.25),
            occupied_thresh: 0.6,
        };
        let plan = SemanticFloorplan::from_meta(4, 3, &meta, cells).unwrap();
        let paths = plan.save(dir.path(), "m").unwrap();
        let loaded = load_paths(&paths).unwrap();
        assert_eq!(loaded, plan);
        let again = load_paths(&paths).unwrap();
        assert_eq!(loaded, again);
    }

    #[test]
    fn palette_label_png_reads_indices() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pal.png");
        {
            let file = File::create(&path).unwrap();
            let mut enc = png::Encoder::new(std::io::BufWriter::new(file), 3, 1);
            enc.set_color(png::ColorType::Indexed);
            enc.set_depth(png::BitDepth::Eight);
            enc.set_palette(vec![255, 255, 255, 0, 0, 0, 0, 255, 0, 0, 0, 255]);
            let mut w = enc.write_header().unwrap();
            w.write_image_data(&[0, 2, 3]).unwrap();
        }
        let codes = read_codes(&path).unwrap();
        assert_eq!(codes.as_raw(), &vec![0, 2, 3]);
    }
}
