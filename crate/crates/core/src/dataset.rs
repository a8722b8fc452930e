//! Class-per-directory dataset inventory and seeded stratified splitting.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::pipeline::PipelineMode;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_RATIOS: [f64; 3] = [0.8, 0.1, 0.1];

const IMAGE_EXTENSIONS: [&str; 4] = ["bmp", "png", "jpg", "jpeg"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    Unassigned,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the manifest root, `/`-separated.
    pub path: String,
    pub class: usize,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub classes: Vec<String>,
    pub seed: u64,
    pub ratios: [f64; 3],
    /// Enhancement applied to the images under `root`, if known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<PipelineMode>,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::FileNotFound {
                path: path.to_path_buf(),
            });
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| Error::Malformed {
                what: "manifest",
                path: path.to_path_buf(),
                cause: e.to_string(),
            })?;
        manifest.validate().map_err(|e| Error::Malformed {
            what: "manifest",
            path: path.to_path_buf(),
            cause: e.to_string(),
        })?;
        Ok(manifest)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        validate_ratios(&self.ratios)?;
        if let Some(bad) = self.entries.iter().find(|e| e.class >= self.classes.len()) {
            return Err(Error::InvalidParameter(format!(
                "entry {} has class index {} but only {} classes exist",
                bad.path,
                bad.class,
                self.classes.len()
            )));
        }
        Ok(())
    }

    pub fn full_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.path)
    }

    /// `(train, val, test)` counts for one class.
    pub fn split_counts(&self, class: usize) -> (usize, usize, usize) {
        self.entries
            .iter()
            .filter(|e| e.class == class)
            .fold((0, 0, 0), |(tr, va, te), e| match e.split {
                Split::Train => (tr + 1, va, te),
                Split::Val => (tr, va + 1, te),
                Split::Test => (tr, va, te + 1),
                Split::Unassigned => (tr, va, te),
            })
    }
}

pub fn validate_ratios(ratios: &[f64; 3]) -> Result<()> {
    if ratios.iter().any(|&r| r.is_nan() || r <= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "split ratios must be positive, got {ratios:?}"
        )));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "split ratios must sum to 1, got {sum}"
        )));
    }
    Ok(())
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

/// Inventories `root`: each immediate subdirectory is a class, and every image
/// file below it (at any depth) is an entry of that class.
pub fn scan_dataset(root: impl AsRef<Path>) -> Result<DatasetManifest> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::FileNotFound {
            path: root.to_path_buf(),
        });
    }
    let unreadable = |path: &Path, e: &dyn std::fmt::Display| Error::UnreadableDirectory {
        path: path.to_path_buf(),
        cause: e.to_string(),
    };

    let mut classes = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| unreadable(root, &e))? {
        let entry = entry.map_err(|e| unreadable(root, &e))?;
        if entry.file_type().map_err(|e| unreadable(root, &e))?.is_dir() {
            classes.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    classes.sort();

    let mut entries = Vec::new();
    for (class, name) in classes.iter().enumerate() {
        let dir = root.join(name);
        for item in WalkDir::new(&dir).follow_links(true) {
            let item = item.map_err(|e| unreadable(&dir, &e))?;
            if !item.file_type().is_file() || !is_image(item.path()) {
                continue;
            }
            let rel = item
                .path()
                .strip_prefix(root)
                .expect("walk stays under root")
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            entries.push(ManifestEntry {
                path: rel,
                class,
                split: Split::Unassigned,
            });
        }
    }
    if entries.is_empty() {
        return Err(Error::EmptyDataset {
            root: root.to_path_buf(),
        });
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));

    Ok(DatasetManifest {
        root: root.to_path_buf(),
        classes,
        seed: DEFAULT_SEED,
        ratios: DEFAULT_RATIOS,
        mode: None,
        entries,
    })
}

/// Split sizes for a class of `n`: validation and test take `floor(n * ratio)`
/// each, training takes the rest.
pub fn split_sizes(n: usize, ratios: &[f64; 3]) -> (usize, usize, usize) {
    // tolerance keeps exact products such as 10 * 0.1 from flooring low
    let take = |r: f64| ((n as f64 * r) + 1e-9).floor() as usize;
    let val = take(ratios[1]).min(n);
    let test = take(ratios[2]).min(n - val);
    (n - val - test, val, test)
}

/// Stratified split. Each class is shuffled independently with a ChaCha8
/// generator seeded by `seed ^ class_index` (Fisher-Yates, drawing the swap
/// index uniformly from `0..=i` for `i` descending), then the first
/// validation-count entries go to `val`, the next test-count to `test`, and
/// the rest to `train`. Classes with fewer than 3 entries are split anyway
/// and logged.
pub fn split_dataset(manifest: &DatasetManifest, ratios: [f64; 3], seed: u64) -> Result<DatasetManifest> {
    validate_ratios(&ratios)?;
    if manifest.entries.is_empty() {
        return Err(Error::EmptyDataset {
            root: manifest.root.clone(),
        });
    }
    let mut out = manifest.clone();
    out.ratios = ratios;
    out.seed = seed;

    for class in 0..out.classes.len() {
        let mut members: Vec<usize> = out
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.class == class)
            .map(|(i, _)| i)
            .collect();
        members.sort_by(|&a, &b| out.entries[a].path.cmp(&out.entries[b].path));
        let n = members.len();
        if n < 3 {
            log::warn!(
                "class '{}' has {n} image(s); at least one split will be empty",
                out.classes[class]
            );
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ class as u64);
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            members.swap(i, j);
        }

        let (_, val, test) = split_sizes(n, &ratios);
        for (rank, &idx) in members.iter().enumerate() {
            out.entries[idx].split = if rank < val {
                Split::Val
            } else if rank < val + test {
                Split::Test
            } else {
                Split::Train
            };
        }
    }
    Ok(out)
}
