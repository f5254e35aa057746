//! Procedural street scenes for desk-scale runs.
//!
//! A scene is painted back to front: sky, a building band with skyline
//! blocks, sidewalk, road, then optional foreground agents (trees, fence,
//! poles with signs, cars, pedestrians, bicyclists, and a void band along
//! the bottom edge). Every shape is drawn into the image and the label map
//! together, so the label map is exact by construction.

use rand::Rng;

use super::palette::class;
use super::{Image, LabelMap, Palette};
use crate::error::{Error, Result};
use crate::rng::{self, SeededRng};

pub const MIN_SCENE_SIZE: usize = 16;

struct Canvas<'a> {
    image: Image,
    labels: LabelMap,
    palette: &'a Palette,
}

impl Canvas<'_> {
    fn width(&self) -> usize {
        self.image.width()
    }

    fn height(&self) -> usize {
        self.image.height()
    }

    fn paint(&mut self, x: usize, y: usize, class: u8) {
        let rgb = self.palette.color(class as usize).expect("class in palette");
        self.image.set(x, y, rgb);
        self.labels.set(x, y, class);
    }

    /// Fills `[x0, x1) × [y0, y1)`, clipped to the canvas.
    fn rect(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, class: u8) {
        for y in y0..y1.min(self.height()) {
            for x in x0..x1.min(self.width()) {
                self.paint(x, y, class);
            }
        }
    }

    fn ellipse(&mut self, cx: f32, cy: f32, rx: f32, ry: f32, class: u8) {
        let (w, h) = (self.width(), self.height());
        let y0 = (cy - ry).floor().max(0.0) as usize;
        let y1 = ((cy + ry).ceil() as usize).min(h);
        let x0 = (cx - rx).floor().max(0.0) as usize;
        let x1 = ((cx + rx).ceil() as usize).min(w);
        for y in y0..y1 {
            for x in x0..x1 {
                let dx = (x as f32 + 0.5 - cx) / rx;
                let dy = (y as f32 + 0.5 - cy) / ry;
                if dx * dx + dy * dy <= 1.0 {
                    self.paint(x, y, class);
                }
            }
        }
    }
}

fn frac(rng: &mut SeededRng, len: usize, lo: f32, hi: f32) -> usize {
    (rng.random_range(lo..hi) * len as f32).round() as usize
}

/// Generates a deterministic scene and its exact label map.
///
/// The palette must contain at least the 12 street classes (indices 0..12).
pub fn generate_synthetic_scene(
    width: usize,
    height: usize,
    seed: u64,
    palette: &Palette,
) -> Result<(Image, LabelMap)> {
    if width < MIN_SCENE_SIZE || height < MIN_SCENE_SIZE {
        return Err(Error::Parameter(format!(
            "scene must be at least {MIN_SCENE_SIZE}x{MIN_SCENE_SIZE}, got {width}x{height}"
        )));
    }
    if palette.len() < 12 {
        return Err(Error::Parameter(format!(
            "scene generator needs a 12-class palette, got {} classes",
            palette.len()
        )));
    }
    let mut rng = rng::seeded(seed);
    let (w, h) = (width, height);
    let mut c = Canvas {
        image: Image::filled(w, h, palette.color(class::SKY as usize).expect("sky")),
        labels: LabelMap::filled(w, h, class::SKY),
        palette,
    };
    let unit = (w.min(h) / 16).max(1);

    let horizon = frac(&mut rng, h, 0.30, 0.42);
    let road_top = frac(&mut rng, h, 0.66, 0.74);
    let walk_top = road_top - frac(&mut rng, h, 0.10, 0.14);

    // Building band with a stepped skyline.
    c.rect(0, horizon, w, walk_top, class::BUILDING);
    let mut x = 0;
    while x < w {
        let bw = frac(&mut rng, w, 0.15, 0.35).max(2 * unit);
        let top = frac(&mut rng, h, 0.08, 0.30);
        if rng.random_bool(0.7) {
            c.rect(x, top, x + bw, horizon, class::BUILDING);
        }
        x += bw;
    }
    c.rect(0, walk_top, w, road_top, class::SIDEWALK);
    c.rect(0, road_top, w, h, class::ROAD);

    if rng.random_bool(0.7) {
        let cx = rng.random_range(0.1..0.9) * w as f32;
        let rx = rng.random_range(0.10..0.16) * w as f32;
        let ry = rng.random_range(0.12..0.20) * h as f32;
        c.ellipse(cx, horizon as f32, rx, ry, class::TREE);
    }
    if rng.random_bool(0.6) {
        let x0 = frac(&mut rng, w, 0.0, 0.6);
        let fw = frac(&mut rng, w, 0.2, 0.35);
        let fh = (2 * unit).max((walk_top - horizon) / 3);
        c.rect(x0, walk_top - fh, x0 + fw, walk_top, class::FENCE);
    }
    if rng.random_bool(0.7) {
        let px = frac(&mut rng, w, 0.05, 0.9);
        let pw = (2 * unit).max(2);
        let top = frac(&mut rng, h, 0.15, 0.3);
        c.rect(px, top, px + pw, road_top, class::POLE);
        if rng.random_bool(0.8) {
            let sw = 4 * unit;
            let sx = (px + pw / 2).saturating_sub(sw / 2);
            c.rect(sx, top, sx + sw, top + 3 * unit, class::SIGN);
        }
    }
    if rng.random_bool(0.6) {
        let px = frac(&mut rng, w, 0.05, 0.85);
        let pw = (3 * unit).max(2);
        let ph = frac(&mut rng, h, 0.18, 0.26);
        let foot = road_top;
        c.rect(px, foot.saturating_sub(ph), px + pw, foot, class::PEDESTRIAN);
    }
    let cars = rng.random_range(0..=2u32);
    for _ in 0..cars {
        let cw = frac(&mut rng, w, 0.22, 0.34);
        let ch = frac(&mut rng, h, 0.10, 0.16);
        let cx = rng.random_range(0..w.saturating_sub(cw / 2).max(1));
        let cy = road_top + frac(&mut rng, h, 0.0, 0.10);
        c.rect(cx, cy.saturating_sub(ch / 2), cx + cw, cy + ch, class::CAR);
    }
    if rng.random_bool(0.5) {
        let bx = frac(&mut rng, w, 0.05, 0.8);
        let bw = frac(&mut rng, w, 0.12, 0.18).max(2 * unit);
        let bh = frac(&mut rng, h, 0.14, 0.20);
        let by = road_top + frac(&mut rng, h, 0.04, 0.10);
        c.rect(bx, by.saturating_sub(bh), bx + bw, by, class::BICYCLIST);
    }
    if rng.random_bool(0.5) {
        let band = frac(&mut rng, h, 0.06, 0.10).max(unit);
        c.rect(0, h - band, w, h, class::VOID);
    }

    Ok((c.image, c.labels))
}
