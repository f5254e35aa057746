//! Data directories: a sample `<id>` is the image `<id>.ppm` and, when
//! labelled, the label map `<id>.pgm` next to it.

use std::fs;
use std::path::{Path, PathBuf};

use segpipe_core::dataset::{load_image, load_labels, Image, Palette};
use segpipe_core::network::Sample;
use segpipe_core::Error;

use crate::error::{CliError, CliResult};

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(Error::Data(format!("{}: {e}", path.display())))
}

/// Sorted ids of the files in `dir` with extension `ext`.
pub fn ids_with_ext(dir: &Path, ext: &str) -> CliResult<Vec<String>> {
    let mut ids = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

pub fn image_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.ppm"))
}

pub fn labels_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.pgm"))
}

/// Ids that have both an image and a label map.
pub fn labelled_ids(dir: &Path) -> CliResult<Vec<String>> {
    let ids: Vec<String> = ids_with_ext(dir, "ppm")?
        .into_iter()
        .filter(|id| labels_path(dir, id).is_file())
        .collect();
    if ids.is_empty() {
        return Err(Error::Data(format!("{}: no labelled samples (<id>.ppm + <id>.pgm)", dir.display())).into());
    }
    Ok(ids)
}

pub fn load_images(dir: &Path, ids: &[String]) -> CliResult<Vec<Image>> {
    ids.iter().map(|id| Ok(load_image(image_path(dir, id))?)).collect()
}

pub fn load_samples(dir: &Path, ids: &[String]) -> CliResult<Vec<Sample>> {
    ids.iter()
        .map(|id| {
            Ok(Sample {
                image: load_image(image_path(dir, id))?,
                labels: load_labels(labels_path(dir, id))?,
            })
        })
        .collect()
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn palette_or_street(path: Option<&Path>) -> CliResult<Palette> {
    Ok(match path {
        Some(p) => Palette::load(p)?,
        None => Palette::street(),
    })
}
