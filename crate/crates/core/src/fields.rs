//! Likelihood fields: exact Euclidean distance maps to occupied structure and
//! to each label, plus the label-prior driven standard deviations.

use std::path::Path;

use image::{ImageBuffer, Luma};

use crate::error::{Error, Result};
use crate::floorplan::{Label, SemanticFloorplan};

/// Which cells act as sources of a distance map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Occupancy,
    Label(Label),
}

/// Distances in metres from each cell centre to the nearest source cell
/// centre. `+∞` everywhere when there is no source.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub values: Vec<f64>,
    /// False when no cell satisfied the source predicate.
    pub has_source: bool,
}

impl DistanceMap {
    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// 16-bit greyscale dump, one grey level per cell of distance.
    pub fn to_image(&self) -> ImageBuffer<Luma<u16>, Vec<u16>> {
        ImageBuffer::from_fn(self.width as u32, self.height as u32, |x, y| {
            let row = self.height - 1 - y as usize;
            let cells = self.get(x as usize, row) / self.resolution;
            Luma([cells.min(65535.0).round() as u16])
        })
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        self.to_image().save(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            source: e,
        })
    }
}

pub fn source_mask(plan: &SemanticFloorplan, source: Source) -> Vec<bool> {
    let tau = plan.occupied_thresh();
    match source {
        Source::Occupancy => plan.cells().iter().map(|c| c.occupancy >= tau).collect(),
        Source::Label(label) => plan
            .cells()
            .iter()
            .map(|c| c.label_likelihood(label) >= tau)
            .collect(),
    }
}

pub fn build_distance_map(plan: &SemanticFloorplan, source: Source) -> DistanceMap {
    distance_map_from_mask(
        &source_mask(plan, source),
        plan.width(),
        plan.height(),
        plan.resolution(),
    )
}

/// Exact EDT of a row-major source mask.
pub fn distance_map_from_mask(mask: &[bool], width: usize, height: usize, resolution: f64) -> DistanceMap {
    assert_eq!(mask.len(), width * height);
    let squared = squared_edt(mask, width, height);
    let has_source = mask.iter().any(|&m| m);
    let values = squared
        .into_iter()
        .map(|d2| if d2.is_finite() { d2.sqrt() * resolution } else { f64::INFINITY })
        .collect();
    DistanceMap {
        width,
        height,
        resolution,
        values,
        has_source,
    }
}

/// Squared distances in cell units. Separable: a lower-envelope pass down
/// each column followed by one along each row. All finite intermediate
/// values are integers, so the result is exact.
pub fn squared_edt(mask: &[bool], width: usize, height: usize) -> Vec<f64> {
    let mut grid: Vec<f64> = mask
        .iter()
        .map(|&m| if m { 0.0 } else { f64::INFINITY })
        .collect();
    let n = width.max(height);
    let mut scratch = Envelope::with_capacity(n);
    let mut column = vec![0.0; height];
    let mut out = vec![0.0; n];
    for col in 0..width {
        for row in 0..height {
            column[row] = grid[row * width + col];
        }
        scratch.transform(&column, &mut out[..height]);
        for row in 0..height {
            grid[row * width + col] = out[row];
        }
    }
    for row in 0..height {
        let line = &mut grid[row * width..(row + 1) * width];
        scratch.transform(line, &mut out[..width]);
        line.copy_from_slice(&out[..width]);
    }
    grid
}

/// Reusable buffers for the 1-D lower envelope of parabolas.
struct Envelope {
    vertices: Vec<usize>,
    bounds: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Self {
            vertices: Vec::with_capacity(n),
            bounds: Vec::with_capacity(n + 1),
        }
    }

    /// `out[q] = min_p f[p] + (q - p)^2` over finite `f[p]`.
    fn transform(&mut self, f: &[f64], out: &mut [f64]) {
        let v = &mut self.vertices;
        let z = &mut self.bounds;
        v.clear();
        z.clear();
        for (p, &fp) in f.iter().enumerate() {
            if !fp.is_finite() {
                continue;
            }
            let pf = p as f64;
            loop {
                let Some(&top) = v.last() else {
                    v.push(p);
                    z.push(f64::NEG_INFINITY);
                    break;
                };
                let tf = top as f64;
                let s = ((fp + pf * pf) - (f[top] + tf * tf)) / (2.0 * pf - 2.0 * tf);
                if s <= *z.last().unwrap() {
                    v.pop();
                    z.pop();
                    continue;
                }
                v.push(p);
                z.push(s);
                break;
            }
        }
        if v.is_empty() {
            out.fill(f64::INFINITY);
            return;
        }
        let mut k = 0;
        for (q, slot) in out.iter_mut().enumerate() {
            let qf = q as f64;
            while k + 1 < v.len() && z[k + 1] < qf {
                k += 1;
            }
            let d = qf - v[k] as f64;
            *slot = d * d + f[v[k]];
        }
    }
}

/// `sigma_base / prior`; `+∞` marks a label absent from the map.
pub fn sigma_for_label(prior: f64, sigma_base: f64) -> f64 {
    debug_assert!(sigma_base > 0.0);
    if prior <= 0.0 {
        f64::INFINITY
    } else {
        sigma_base / prior
    }
}

/// Gaussian likelihood-field score `exp(-d² / 2σ²)`.
#[inline]
pub fn field_likelihood(distance: f64, sigma: f64) -> f64 {
    (-(distance * distance) / (2.0 * sigma * sigma)).exp()
}

/// Per-label and occupancy distance maps with their standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodFieldSet {
    pub occ: DistanceMap,
    /// Indexed by [`Label::index`].
    pub per_label: [DistanceMap; 3],
    pub sigma_occ: f64,
    pub sigma_base: f64,
    pub sigma: [f64; 3],
    pub priors: [f64; 3],
}

impl LikelihoodFieldSet {
    pub fn build(plan: &SemanticFloorplan, sigma_occ: f64, sigma_base: f64) -> Result<Self> {
        if !(sigma_occ > 0.0) || !(sigma_base > 0.0) {
            return Err(Error::Config(format!(
                "sigma_occ and sigma_base must be positive (got {sigma_occ}, {sigma_base})"
            )));
        }
        // A plan without structure has no informative labels.
        let priors = plan.label_priors().unwrap_or([0.0; 3]);
        let per_label = Label::ALL.map(|l| build_distance_map(plan, Source::Label(l)));
        Ok(Self {
            occ: build_distance_map(plan, Source::Occupancy),
            per_label,
            sigma_occ,
            sigma_base,
            sigma: priors.map(|p| sigma_for_label(p, sigma_base)),
            priors,
        })
    }

    pub fn label_map(&self, label: Label) -> &DistanceMap {
        &self.per_label[label.index()]
    }

    pub fn sigma(&self, label: Label) -> f64 {
        self.sigma[label.index()]
    }

    /// True when the label exists in the map and can discriminate poses.
    pub fn is_informative(&self, label: Label) -> bool {
        self.sigma[label.index()].is_finite() && self.per_label[label.index()].has_source
    }

    /// Label likelihood at a cell, or `None` when the label is uninformative.
    #[inline]
    pub fn label_likelihood_at(&self, label: Label, col: usize, row: usize) -> Option<f64> {
        let i = label.index();
        let sigma = self.sigma[i];
        if !sigma.is_finite() {
            return None;
        }
        let d = self.per_label[i].get(col, row);
        d.is_finite().then(|| field_likelihood(d, sigma))
    }

    /// Same fields for a plan whose metric size is multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |m: &DistanceMap| DistanceMap {
            resolution: m.resolution * factor,
            values: m.values.iter().map(|v| v * factor).collect(),
            ..m.clone()
        };
        Self {
            occ: scale(&self.occ),
            per_label: [
                scale(&self.per_label[0]),
                scale(&self.per_label[1]),
                scale(&self.per_label[2]),
            ],
            sigma_occ: self.sigma_occ * factor,
            sigma_base: self.sigma_base * factor,
            sigma: self.sigma.map(|s| s * factor),
            priors: self.priors,
        }
    }

    /// Dump every map as `<stem>_{occ,wall,door,window}.png` into `dir`.
    pub fn save_debug(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.occ.save_png(&dir.join(format!("{stem}_occ.png")))?;
        for label in Label::ALL {
            self.label_map(label)
                .save_png(&dir.join(format!("{stem}_{}.png", label.name())))?;
        }
        Ok(())
    }
}
