use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_SPLIT_RATIO: f64 = 0.8;

/// Partition of sample ids into training and validation sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub ratio: f64,
    pub seed: u64,
}

/// Shuffles `ids` with the seeded generator and puts the first
/// `⌈ratio·n⌉` into the training set.
pub fn split_dataset(ids: &[String], ratio: f64, seed: u64) -> Result<DatasetSplit> {
    if ids.is_empty() {
        return Err(Error::Data("cannot split an empty sample list".into()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Parameter(format!("split ratio {ratio} not in (0, 1)")));
    }
    let mut shuffled = ids.to_vec();
    shuffled.shuffle(&mut rng::seeded(seed));
    let n_train = ((ratio * ids.len() as f64).ceil() as usize).min(ids.len());
    let val = shuffled.split_off(n_train);
    Ok(DatasetSplit {
        train: shuffled,
        val,
        ratio,
        seed,
    })
}

impl DatasetSplit {
    /// `# ratio <r> seed <s>` followed by one `train <id>` / `val <id>` line per sample.
    pub fn to_text(&self) -> String {
        let mut out = format!("# ratio {} seed {}\n", self.ratio, self.seed);
        for id in &self.train {
            let _ = writeln!(out, "train {id}");
        }
        for id in &self.val {
            let _ = writeln!(out, "val {id}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut split = DatasetSplit {
            train: Vec::new(),
            val: Vec::new(),
            ratio: f64::NAN,
            seed: rng::DEFAULT_SEED,
        };
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(meta) = line.strip_prefix('#') {
                let words: Vec<&str> = meta.split_whitespace().collect();
                for pair in words.chunks(2) {
                    match pair {
                        ["ratio", v] => split.ratio = v.parse().unwrap_or(f64::NAN),
                        ["seed", v] => split.seed = v.parse().unwrap_or(split.seed),
                        _ => {}
                    }
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            match line.split_once(char::is_whitespace) {
                Some(("train", id)) => split.train.push(id.trim().to_string()),
                Some(("val", id)) => split.val.push(id.trim().to_string()),
                _ => {
                    return Err(Error::Data(format!(
                        "split line {}: expected `train <id>` or `val <id>`, got {line:?}",
                        lineno + 1
                    )))
                }
            }
        }
        if split.ratio.is_nan() {
            let total = split.train.len() + split.val.len();
            split.ratio = if total == 0 {
                0.0
            } else {
                split.train.len() as f64 / total as f64
            };
        }
        Ok(split)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}
