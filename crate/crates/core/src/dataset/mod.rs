//! Rasters, file formats, the class palette, augmentation, splitting, and
//! the synthetic scene generator.

mod augment;
mod palette;
mod pnm;
mod raster;
mod split;
mod synthetic;

pub use augment::{augment, AugmentOp};
pub use palette::{class, decode_labels, encode_labels, Palette, PaletteEntry};
pub use pnm::{
    decode_pgm, decode_ppm, encode_pgm, encode_ppm, load_image, load_labels, save_image,
    save_labels,
};
pub use raster::{Image, LabelMap};
pub use split::{split_dataset, DatasetSplit, DEFAULT_SPLIT_RATIO};
pub use synthetic::{generate_synthetic_scene, MIN_SCENE_SIZE};
