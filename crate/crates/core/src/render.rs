//! Raster frames: the floorplan with tinted labels, particles as oriented
//! points, and truth/estimate markers.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::floorplan::{Label, SemanticFloorplan};
use crate::geometry::Pose2D;
use crate::mcl::Particle;

const WALL: Rgb<u8> = Rgb([60, 60, 70]);
const DOOR: Rgb<u8> = Rgb([40, 160, 60]);
const WINDOW: Rgb<u8> = Rgb([60, 140, 220]);
const PARTICLE: Rgb<u8> = Rgb([220, 40, 40]);
const TRUTH: Rgb<u8> = Rgb([0, 170, 0]);
const ESTIMATE: Rgb<u8> = Rgb([30, 60, 230]);

/// Pixels per cell and marker sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderStyle {
    pub scale: u32,
    pub heading_len: f64,
    pub marker_radius: i64,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self {
            scale: 2,
            heading_len: 3.0,
            marker_radius: 4,
        }
    }
}

struct Canvas<'a> {
    img: RgbImage,
    plan: &'a SemanticFloorplan,
    scale: f64,
}

impl Canvas<'_> {
    /// World point to pixel coordinates (top row is the highest grid row).
    fn pixel(&self, x: f64, y: f64) -> (f64, f64) {
        let (u, v) = self.plan.world_to_local(x, y);
        (u * self.scale, (self.plan.height() as f64 - v) * self.scale)
    }

    fn put(&mut self, px: i64, py: i64, color: Rgb<u8>) {
        if px >= 0 && py >= 0 && (px as u32) < self.img.width() && (py as u32) < self.img.height() {
            self.img.put_pixel(px as u32, py as u32, color);
        }
    }

    fn line(&mut self, (x0, y0): (f64, f64), (x1, y1): (f64, f64), color: Rgb<u8>) {
        let n = (x1 - x0).abs().max((y1 - y0).abs()).ceil().max(1.0) as usize;
        for i in 0..=n {
            let s = i as f64 / n as f64;
            self.put((x0 + s * (x1 - x0)).floor() as i64, (y0 + s * (y1 - y0)).floor() as i64, color);
        }
    }

    fn oriented(&mut self, pose: &Pose2D, len: f64, color: Rgb<u8>) {
        let a = self.pixel(pose.x, pose.y);
        let th = pose.theta - self.plan.origin().theta;
        self.line(a, (a.0 + len * th.cos(), a.1 - len * th.sin()), color);
    }

    fn ring(&mut self, pose: &Pose2D, r: i64, color: Rgb<u8>) {
        let (cx, cy) = self.pixel(pose.x, pose.y);
        let (cx, cy) = (cx.floor() as i64, cy.floor() as i64);
        for dy in -r..=r {
            for dx in -r..=r {
                let d2 = dx * dx + dy * dy;
                if d2 <= r * r && d2 >= (r - 1) * (r - 1) {
                    self.put(cx + dx, cy + dy, color);
                }
            }
        }
        self.oriented(pose, 2.0 * r as f64, color);
    }
}

/// Draw one frame. Particles outside the map are skipped.
pub fn render_frame(
    plan: &SemanticFloorplan,
    particles: &[Particle],
    truth: Option<&Pose2D>,
    estimate: Option<&Pose2D>,
    style: &RenderStyle,
) -> RgbImage {
    let s = style.scale.max(1);
    let (w, h) = (plan.width() as u32, plan.height() as u32);
    let mut img = RgbImage::new(w * s, h * s);
    for (px, py, pixel) in img.enumerate_pixels_mut() {
        let (col, row) = ((px / s) as usize, (h - 1 - py / s) as usize);
        *pixel = match plan.dominant_label(col, row) {
            Some(Label::Wall) => WALL,
            Some(Label::Door) => DOOR,
            Some(Label::Window) => WINDOW,
            None => {
                let g = (255.0 * (1.0 - plan.cells()[plan.linear(col, row)].occupancy)).round() as u8;
                Rgb([g, g, g])
            }
        };
    }
    let mut canvas = Canvas {
        img,
        plan,
        scale: s as f64,
    };
    for p in particles {
        if plan.world_to_grid(p.pose.x, p.pose.y).is_some() {
            canvas.oriented(&p.pose, style.heading_len, PARTICLE);
        }
    }
    if let Some(t) = truth {
        canvas.ring(t, style.marker_radius, TRUTH);
    }
    if let Some(e) = estimate {
        canvas.ring(e, style.marker_radius, ESTIMATE);
    }
    canvas.img
}

pub fn save_frame(img: &RgbImage, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    img.save_with_format(path, image::ImageFormat::Png).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floorplan::Cell;

    fn plan() -> SemanticFloorplan {
        let mut cells = vec![Cell::FREE; 20 * 10];
        cells[0] = Cell::labelled(Label::Door);
        cells[19] = Cell::labelled(Label::Window);
        cells[199] = Cell::labelled(Label::Wall);
        SemanticFloorplan::new(20, 10, 0.1, Pose2D::default(), 0.65, cells).unwrap()
    }

    #[test]
    fn map_only_frame() {
        let p = plan();
        let img = render_frame(&p, &[], None, None, &RenderStyle::default());
        assert_eq!(img.dimensions(), (40, 20));
        // Grid row 0 is drawn at the bottom.
        assert_eq!(*img.get_pixel(0, 19), DOOR);
        assert_eq!(*img.get_pixel(39, 19), WINDOW);
        assert_eq!(*img.get_pixel(39, 0), WALL);
        assert_eq!(*img.get_pixel(10, 10), Rgb([255, 255, 255]));
    }

    #[test]
    fn particles_and_markers_stay_on_canvas() {
        let p = plan();
        let particles: Vec<_> = (0..20)
            .map(|i| Particle::new(Pose2D::new(0.05 + 0.1 * i as f64, 0.5, 0.3 * i as f64), 0.05))
            .collect();
        let style = RenderStyle::default();
        let a = render_frame(&p, &particles, Some(&Pose2D::new(1.0, 0.5, 0.0)), Some(&Pose2D::new(1.2, 0.4, 1.0)), &style);
        let b = render_frame(&p, &particles, Some(&Pose2D::new(1.0, 0.5, 0.0)), Some(&Pose2D::new(1.2, 0.4, 1.0)), &style);
        assert_eq!(a, b);
        assert!(a.pixels().any(|px| *px == PARTICLE));
        assert!(a.pixels().any(|px| *px == TRUTH));
        assert!(a.pixels().any(|px| *px == ESTIMATE));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f/frame_0.png");
        save_frame(&a, &path).unwrap();
        let first = std::fs::read(&path).unwrap();
        save_frame(&b, &path).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());
    }
}
