//! CSV manifest of a corpus on disk, plus train/validation splitting.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nrrd::{read_nrrd, write_nrrd};
use super::variants::Sample;
use super::DatasetError;
use crate::geometry::VoxelGrid;

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const METADATA_FILE: &str = "manifest.json";
pub const GRID_DIR: &str = "grids";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            other => Err(DatasetError::Csv(format!("split tag `{other}` is not train or val"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub id: String,
    pub text: String,
    /// Relative to the manifest's directory unless absolute.
    pub nrrd_path: String,
    pub split: Split,
}

/// Corpus-level facts stored next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMeta {
    pub schema_version: u32,
    pub resolution: usize,
    pub seed: u64,
    pub bases: Vec<String>,
    pub val_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub rows: Vec<ManifestRow>,
    pub meta: Option<CorpusMeta>,
    /// Directory relative paths resolve against.
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn grid_path(&self, row: &ManifestRow) -> PathBuf {
        self.root.join(&row.nrrd_path)
    }

    pub fn load_grid(&self, row: &ManifestRow) -> Result<VoxelGrid, DatasetError> {
        let path = self.grid_path(row);
        let bytes = std::fs::read(&path).map_err(|e| DatasetError::io(&path, e))?;
        Ok(read_nrrd(&bytes)?.with_source(row.id.clone()))
    }

    pub fn rows_in(&self, split: Split) -> impl Iterator<Item = &ManifestRow> {
        self.rows.iter().filter(move |r| r.split == split)
    }
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a str>) -> Result<(), DatasetError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(DatasetError::DuplicateId(id.to_string()));
        }
    }
    Ok(())
}

/// Serializes rows as `id,text,nrrd_path,split` with RFC 4180 quoting.
pub fn manifest_to_csv(rows: &[ManifestRow]) -> Result<String, DatasetError> {
    check_unique(rows.iter().map(|r| r.id.as_str()))?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["id", "text", "nrrd_path", "split"]).map_err(DatasetError::csv)?;
    for r in rows {
        w.write_record([r.id.as_str(), r.text.as_str(), r.nrrd_path.as_str(), r.split.as_str()])
            .map_err(DatasetError::csv)?;
    }
    let bytes = w.into_inner().map_err(|e| DatasetError::Csv(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| DatasetError::Csv(e.to_string()))
}

pub fn manifest_from_csv(text: &str) -> Result<Vec<ManifestRow>, DatasetError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = r.headers().map_err(DatasetError::csv)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["id", "text", "nrrd_path", "split"] {
        return Err(DatasetError::Csv(format!(
            "expected header id,text,nrrd_path,split, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record.map_err(DatasetError::csv)?;
        rows.push(ManifestRow {
            id: record[0].to_string(),
            text: record[1].to_string(),
            nrrd_path: record[2].to_string(),
            split: record[3].parse()?,
        });
    }
    check_unique(rows.iter().map(|r| r.id.as_str()))?;
    Ok(rows)
}

/// Writes the CSV and, when given, the metadata sidecar into `dir`.
pub fn write_manifest(dir: &Path, rows: &[ManifestRow], meta: Option<&CorpusMeta>) -> Result<PathBuf, DatasetError> {
    let csv = manifest_to_csv(rows)?;
    std::fs::create_dir_all(dir).map_err(|e| DatasetError::io(dir, e))?;
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, csv).map_err(|e| DatasetError::io(&path, e))?;
    if let Some(meta) = meta {
        let meta_path = dir.join(METADATA_FILE);
        let json = serde_json::to_string_pretty(meta).expect("metadata serializes") + "\n";
        std::fs::write(&meta_path, json).map_err(|e| DatasetError::io(&meta_path, e))?;
    }
    Ok(path)
}

/// Reads a manifest (file path or corpus directory) and checks that every
/// grid file exists.
pub fn read_manifest(path: &Path) -> Result<DatasetManifest, DatasetError> {
    let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
    let text = std::fs::read_to_string(&file).map_err(|e| DatasetError::io(&file, e))?;
    let rows = manifest_from_csv(&text)?;
    let root = file.parent().map(Path::to_path_buf).unwrap_or_default();
    let meta_path = root.join(METADATA_FILE);
    let meta = if meta_path.exists() {
        let t = std::fs::read_to_string(&meta_path).map_err(|e| DatasetError::io(&meta_path, e))?;
        Some(serde_json::from_str(&t).map_err(|e| DatasetError::Csv(format!("{}: {e}", meta_path.display())))?)
    } else {
        None
    };
    let manifest = DatasetManifest { rows, meta, root };
    let missing: Vec<String> = manifest
        .rows
        .iter()
        .map(|r| manifest.grid_path(r))
        .filter(|p| !p.is_file())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(DatasetError::MissingFiles(missing));
    }
    Ok(manifest)
}

/// Writes every grid as `grids/<id>.nrrd` plus the manifest into `dir`.
pub fn write_corpus(
    dir: &Path,
    samples: &[Sample],
    splits: &[Split],
    meta: &CorpusMeta,
) -> Result<DatasetManifest, DatasetError> {
    if samples.len() != splits.len() {
        return Err(DatasetError::Config("one split tag per sample required".into()));
    }
    check_unique(samples.iter().map(|s| s.id.as_str()))?;
    let grid_dir = dir.join(GRID_DIR);
    std::fs::create_dir_all(&grid_dir).map_err(|e| DatasetError::io(&grid_dir, e))?;
    let mut rows = Vec::with_capacity(samples.len());
    for (s, &split) in samples.iter().zip(splits) {
        let rel = format!("{GRID_DIR}/{}.nrrd", s.id);
        let path = dir.join(&rel);
        std::fs::write(&path, write_nrrd(&s.grid)).map_err(|e| DatasetError::io(&path, e))?;
        rows.push(ManifestRow { id: s.id.clone(), text: s.text.clone(), nrrd_path: rel, split });
    }
    write_manifest(dir, &rows, Some(meta))?;
    Ok(DatasetManifest { rows, meta: Some(meta.clone()), root: dir.to_path_buf() })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub warnings: Vec<String>,
}

impl SplitAssignment {
    /// Per-item tags in input order.
    pub fn tags(&self, len: usize) -> Vec<Split> {
        let mut tags = vec![Split::Train; len];
        for &i in &self.val {
            tags[i] = Split::Val;
        }
        tags
    }
}

/// Stratified split by group (base code). `round(n · val_fraction)` items
/// go to validation, apportioned over groups by largest remainder; every
/// group with two or more items lands in both splits when possible.
pub fn split(groups: &[&str], val_fraction: f64, seed: u64) -> Result<SplitAssignment, DatasetError> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(DatasetError::Config(format!("val_fraction must lie in (0, 1), got {val_fraction}")));
    }
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut order: Vec<&str> = Vec::new();
    for (i, g) in groups.iter().enumerate() {
        let k = order.iter().position(|o| o == g).unwrap_or_else(|| {
            order.push(g);
            order.len() - 1
        });
        members.entry(k).or_default().push(i);
    }
    let sizes: Vec<usize> = (0..order.len()).map(|k| members[&k].len()).collect();
    let target = (groups.len() as f64 * val_fraction).round() as usize;

    let exact: Vec<f64> = sizes.iter().map(|&n| n as f64 * val_fraction).collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut rest: Vec<usize> = (0..sizes.len()).collect();
    rest.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).expect("finite").then(a.cmp(&b))
    });
    let mut missing = target.saturating_sub(quota.iter().sum());
    for &k in rest.iter().cycle().take(rest.len() * 2) {
        if missing == 0 {
            break;
        }
        if quota[k] < sizes[k] {
            quota[k] += 1;
            missing -= 1;
        }
    }

    let mut warnings = Vec::new();
    for k in 0..sizes.len() {
        if sizes[k] == 1 {
            if quota[k] == 1 {
                // Hand the slot to the largest group that can take it.
                quota[k] = 0;
                if let Some(j) = (0..sizes.len()).filter(|&j| quota[j] + 1 < sizes[j]).max_by_key(|&j| (sizes[j], usize::MAX - j)) {
                    quota[j] += 1;
                }
            }
            warnings.push(format!("group `{}` has a single sample; assigned to train", order[k]));
        } else if quota[k] == 0 {
            if let Some(j) = (0..sizes.len()).filter(|&j| quota[j] > 1).max_by_key(|&j| (quota[j], usize::MAX - j)) {
                quota[j] -= 1;
                quota[k] = 1;
            }
        } else if quota[k] == sizes[k] {
            quota[k] -= 1;
        }
    }

    let mut train = Vec::new();
    let mut val = Vec::new();
    for (k, idx) in &members {
        let mut shuffled = idx.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ (*k as u64).wrapping_mul(0xA24B_AED4_963E_E407)));
        val.extend_from_slice(&shuffled[..quota[*k]]);
        train.extend_from_slice(&shuffled[quota[*k]..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok(SplitAssignment { train, val, warnings })
}
