//! Class palette: class index ↔ name ↔ RGB color.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Image, LabelMap};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaletteEntry {
    pub class_index: usize,
    pub name: String,
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl PaletteEntry {
    pub fn rgb(&self) -> [u8; 3] {
        [self.r, self.g, self.b]
    }
}

/// Ordered class table. Indices run `0..len` exactly once and colors are
/// pairwise distinct.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Palette {
    entries: Vec<PaletteEntry>,
}

/// The default 12-class street-scene table (CamVid-style colors).
const STREET_CLASSES: [(&str, [u8; 3]); 12] = [
    ("sky", [128, 128, 128]),
    ("building", [128, 0, 0]),
    ("pole", [192, 192, 128]),
    ("road", [128, 64, 128]),
    ("sidewalk", [60, 40, 222]),
    ("tree", [128, 128, 0]),
    ("sign", [192, 128, 128]),
    ("fence", [64, 64, 128]),
    ("car", [64, 0, 128]),
    ("pedestrian", [64, 64, 0]),
    ("bicyclist", [0, 128, 192]),
    ("void", [0, 0, 0]),
];

pub mod class {
    pub const SKY: u8 = 0;
    pub const BUILDING: u8 = 1;
    pub const POLE: u8 = 2;
    pub const ROAD: u8 = 3;
    pub const SIDEWALK: u8 = 4;
    pub const TREE: u8 = 5;
    pub const SIGN: u8 = 6;
    pub const FENCE: u8 = 7;
    pub const CAR: u8 = 8;
    pub const PEDESTRIAN: u8 = 9;
    pub const BICYCLIST: u8 = 10;
    pub const VOID: u8 = 11;
}

fn dist2(a: [u8; 3], b: [u8; 3]) -> u32 {
    a.iter()
        .zip(b)
        .map(|(&x, y)| {
            let d = x as i32 - y as i32;
            (d * d) as u32
        })
        .sum()
}

impl Palette {
    pub fn new(mut entries: Vec<PaletteEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Data("palette has no entries".into()));
        }
        if entries.len() > 256 {
            return Err(Error::Data("palette has more than 256 classes".into()));
        }
        entries.sort_by_key(|e| e.class_index);
        for (i, e) in entries.iter().enumerate() {
            if e.class_index != i {
                return Err(Error::Data(format!(
                    "palette class indices must be 0..{} exactly once; found {} at position {i}",
                    entries.len(),
                    e.class_index
                )));
            }
        }
        let mut seen = HashMap::new();
        for e in &entries {
            if let Some(prev) = seen.insert(e.rgb(), e.class_index) {
                return Err(Error::Data(format!(
                    "classes {prev} and {} share color {:?}",
                    e.class_index,
                    e.rgb()
                )));
            }
        }
        Ok(Palette { entries })
    }

    /// The built-in 12-class table.
    pub fn street() -> Self {
        let entries = STREET_CLASSES
            .iter()
            .enumerate()
            .map(|(i, (name, [r, g, b]))| PaletteEntry {
                class_index: i,
                name: name.to_string(),
                r: *r,
                g: *g,
                b: *b,
            })
            .collect();
        Palette { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PaletteEntry] {
        &self.entries
    }

    pub fn color(&self, class: usize) -> Option<[u8; 3]> {
        self.entries.get(class).map(PaletteEntry::rgb)
    }

    pub fn name(&self, class: usize) -> Option<&str> {
        self.entries.get(class).map(|e| e.name.as_str())
    }

    pub fn colors(&self) -> Vec<[u8; 3]> {
        self.entries.iter().map(PaletteEntry::rgb).collect()
    }

    /// Class whose color is nearest in squared RGB distance, lowest index on ties.
    pub fn nearest(&self, rgb: [u8; 3]) -> u8 {
        let mut best = (u32::MAX, 0usize);
        for (i, e) in self.entries.iter().enumerate() {
            let d = dist2(rgb, e.rgb());
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1 as u8
    }

    pub fn from_csv_reader(reader: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Data(format!("palette header: {e}")))?
            .clone();
        let expected = ["class_index", "name", "r", "g", "b"];
        if headers.iter().ne(expected) {
            return Err(Error::Data(format!(
                "palette header must be {}, found {}",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let entries = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<PaletteEntry>, _>>()
            .map_err(|e| Error::Data(format!("palette row: {e}")))?;
        Palette::new(entries)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class_index,name,r,g,b\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{},{},{}\n", e.class_index, e.name, e.r, e.g, e.b));
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Maps each pixel to its class: exact palette colors directly, anything
/// else to the nearest palette color.
pub fn encode_labels(image: &Image, palette: &Palette) -> LabelMap {
    let exact: HashMap<[u8; 3], u8> = palette
        .entries()
        .iter()
        .map(|e| (e.rgb(), e.class_index as u8))
        .collect();
    let labels = image
        .rgb_iter()
        .map(|px| exact.get(&px).copied().unwrap_or_else(|| palette.nearest(px)))
        .collect();
    LabelMap::new(image.width(), image.height(), labels).expect("dimensions come from a valid image")
}

/// Paints each pixel with its class color.
pub fn decode_labels(labels: &LabelMap, palette: &Palette) -> Result<Image> {
    labels.check_classes(palette.len())?;
    let colors = palette.colors();
    let pixels = labels
        .labels()
        .iter()
        .flat_map(|&l| colors[l as usize])
        .collect();
    Image::new(labels.width(), labels.height(), pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(i: usize, rgb: [u8; 3]) -> PaletteEntry {
        PaletteEntry {
            class_index: i,
            name: format!("c{i}"),
            r: rgb[0],
            g: rgb[1],
            b: rgb[2],
        }
    }

    #[test]
    fn street_palette_is_valid() {
        let p = Palette::street();
        assert_eq!(Palette::new(p.entries().to_vec()).unwrap(), p);
        assert_eq!(p.len(), 12);
        assert_eq!(p.name(3), Some("road"));
    }

    #[test]
    fn rejects_duplicate_colors_and_gaps() {
        assert!(Palette::new(vec![entry(0, [1, 2, 3]), entry(1, [1, 2, 3])]).is_err());
        assert!(Palette::new(vec![entry(0, [1, 2, 3]), entry(2, [4, 5, 6])]).is_err());
        assert!(Palette::new(vec![entry(1, [1, 2, 3]), entry(0, [4, 5, 6])]).is_ok());
    }

    #[test]
    fn uniform_class_image() {
        let p = Palette::street();
        let img = Image::filled(4, 3, p.color(4).unwrap());
        assert_eq!(encode_labels(&img, &p), LabelMap::filled(4, 3, 4));
        assert_eq!(decode_labels(&LabelMap::filled(4, 3, 4), &p).unwrap(), img);
    }

    #[test]
    fn off_palette_pixel_goes_to_nearest() {
        let p = Palette::new(vec![entry(0, [0, 0, 0]), entry(1, [255, 255, 255])]).unwrap();
        let img = Image::new(1, 1, vec![0, 0, 1]).unwrap();
        assert_eq!(encode_labels(&img, &p).labels(), &[0]);
        // 1 vs 255² + 255² + 254²
        assert_eq!(dist2([0, 0, 1], [255, 255, 255]), 194_566);
        // equidistant: lowest index wins
        let p = Palette::new(vec![entry(0, [0, 0, 0]), entry(1, [2, 0, 0])]).unwrap();
        assert_eq!(p.nearest([1, 0, 0]), 0);
    }

    #[test]
    fn decode_out_of_range_is_data_error() {
        let r = decode_labels(&LabelMap::filled(2, 2, 12), &Palette::street());
        assert!(matches!(r, Err(Error::Data(_))));
    }

    #[test]
    fn csv_round_trip_and_header_check() {
        let p = Palette::street();
        let text = p.to_csv();
        assert!(text.starts_with("class_index,name,r,g,b\n"));
        assert_eq!(Palette::from_csv_reader(text.as_bytes()).unwrap(), p);
        let bad = "index,name,r,g,b\n0,a,1,2,3\n";
        assert!(Palette::from_csv_reader(bad.as_bytes()).is_err());
        let bad = "class_index,name,r,g,b\n0,a,1,2,300\n";
        assert!(Palette::from_csv_reader(bad.as_bytes()).is_err());
    }
}
