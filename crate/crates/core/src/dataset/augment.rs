use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Image, LabelMap};
use crate::error::{Error, Result};

/// Lossless geometric transforms. Rotations are clockwise and limited to
/// multiples of 90° so label maps never need interpolation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentOp {
    HFlip,
    VFlip,
    Rot90,
    Rot180,
    Rot270,
}

impl AugmentOp {
    pub const ALL: [AugmentOp; 5] = [
        AugmentOp::HFlip,
        AugmentOp::VFlip,
        AugmentOp::Rot90,
        AugmentOp::Rot180,
        AugmentOp::Rot270,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AugmentOp::HFlip => "hflip",
            AugmentOp::VFlip => "vflip",
            AugmentOp::Rot90 => "rot90",
            AugmentOp::Rot180 => "rot180",
            AugmentOp::Rot270 => "rot270",
        }
    }

    /// Output `(width, height)` for an input of the given size.
    pub fn output_dims(self, width: usize, height: usize) -> (usize, usize) {
        match self {
            AugmentOp::Rot90 | AugmentOp::Rot270 => (height, width),
            _ => (width, height),
        }
    }

    /// Source coordinate `(x, y)` for output coordinate `(x, y)`.
    fn source(self, x: usize, y: usize, width: usize, height: usize) -> (usize, usize) {
        match self {
            AugmentOp::HFlip => (width - 1 - x, y),
            AugmentOp::VFlip => (x, height - 1 - y),
            AugmentOp::Rot90 => (y, height - 1 - x),
            AugmentOp::Rot180 => (width - 1 - x, height - 1 - y),
            AugmentOp::Rot270 => (width - 1 - y, x),
        }
    }

    fn apply_raster<T: Copy>(self, data: &[T], width: usize, height: usize, channels: usize) -> Vec<T> {
        let (ow, oh) = self.output_dims(width, height);
        let mut out = Vec::with_capacity(data.len());
        for y in 0..oh {
            for x in 0..ow {
                let (sx, sy) = self.source(x, y, width, height);
                let i = (sy * width + sx) * channels;
                out.extend_from_slice(&data[i..i + channels]);
            }
        }
        out
    }

    pub fn apply_image(self, image: &Image) -> Image {
        let (w, h) = self.output_dims(image.width(), image.height());
        let px = self.apply_raster(image.pixels(), image.width(), image.height(), 3);
        Image::new(w, h, px).expect("transform preserves pixel count")
    }

    pub fn apply_labels(self, labels: &LabelMap) -> LabelMap {
        let (w, h) = self.output_dims(labels.width(), labels.height());
        let data = self.apply_raster(labels.labels(), labels.width(), labels.height(), 1);
        LabelMap::new(w, h, data).expect("transform preserves pixel count")
    }
}

impl fmt::Display for AugmentOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AugmentOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AugmentOp::ALL
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown augmentation {s:?}")))
    }
}

/// Applies the same transform to an image and its label map.
pub fn augment(image: &Image, labels: &LabelMap, op: AugmentOp) -> Result<(Image, LabelMap)> {
    if image.width() != labels.width() || image.height() != labels.height() {
        return Err(Error::Data(format!(
            "image is {}x{} but labels are {}x{}",
            image.width(),
            image.height(),
            labels.width(),
            labels.height()
        )));
    }
    Ok((op.apply_image(image), op.apply_labels(labels)))
}
