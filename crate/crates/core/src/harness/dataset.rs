use std::collections::BTreeSet;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;

/// One reference with one or more candidate parallelizations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub id: String,
    pub reference: String,
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    /// One JSON object per line: `{"id", "reference", "candidates": [..]}`.
    #[default]
    Jsonl,
    /// `ref/NAME` paired with `gen/NAME`; `gen/NAME` may be a directory of candidates.
    Dirs,
}

/// A record that could not be loaded or scored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecordError {
    pub id: String,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct LoadedDataset {
    pub records: Vec<DatasetRecord>,
    pub errors: Vec<RecordError>,
}

impl LoadedDataset {
    fn accept(&mut self, seen: &mut BTreeSet<String>, record: DatasetRecord) {
        if record.candidates.is_empty() {
            self.errors.push(RecordError {
                id: record.id,
                message: "record has no candidates".into(),
            });
        } else if !seen.insert(record.id.clone()) {
            self.errors.push(RecordError {
                message: format!("duplicate record id `{}`", record.id),
                id: record.id,
            });
        } else {
            self.records.push(record);
        }
    }
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<LoadedDataset, HarnessError> {
    let loaded = match format {
        DatasetFormat::Jsonl => load_jsonl(path)?,
        DatasetFormat::Dirs => load_dirs(path)?,
    };
    if loaded.records.is_empty() && loaded.errors.is_empty() {
        return Err(HarnessError::NoRecords);
    }
    Ok(loaded)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn load_jsonl(path: &Path) -> Result<LoadedDataset, HarnessError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    parse_jsonl(std::io::BufReader::new(file)).map_err(io_err(path))
}

/// Malformed lines become error entries; only I/O failures abort.
pub fn parse_jsonl(reader: impl BufRead) -> std::io::Result<LoadedDataset> {
    let mut out = LoadedDataset::default();
    let mut seen = BTreeSet::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<DatasetRecord>(&line) {
            Ok(r) => out.accept(&mut seen, r),
            Err(e) => out.errors.push(RecordError {
                id: format!("line {}", n + 1),
                message: format!("malformed record: {e}"),
            }),
        }
    }
    Ok(out)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut v = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(io_err(dir))?;
    v.sort();
    Ok(v)
}

fn read_text(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

pub fn load_dirs(root: &Path) -> Result<LoadedDataset, HarnessError> {
    let (ref_dir, gen_dir) = (root.join("ref"), root.join("gen"));
    let mut out = LoadedDataset::default();
    let mut seen = BTreeSet::new();
    for r in sorted_entries(&ref_dir)? {
        if !r.is_file() {
            continue;
        }
        let Some(name) = r.file_name().map(|n| n.to_string_lossy().into_owned()) else {
            continue;
        };
        let stem = r
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let gen = gen_dir.join(&name);
        let gen_alt = gen_dir.join(&stem);
        let candidates: Result<Vec<String>, String> = if gen.is_file() {
            read_text(&gen).map(|t| vec![t])
        } else if gen.is_dir() || gen_alt.is_dir() {
            let d = if gen.is_dir() { gen } else { gen_alt };
            sorted_entries(&d)?
                .iter()
                .filter(|p| p.is_file())
                .map(|p| read_text(p))
                .collect()
        } else {
            Err(format!("no generated counterpart for {}", r.display()))
        };
        match (read_text(&r), candidates) {
            (Ok(reference), Ok(candidates)) => out.accept(
                &mut seen,
                DatasetRecord {
                    id: name,
                    reference,
                    candidates,
                },
            ),
            (Err(message), _) | (_, Err(message)) => out.errors.push(RecordError { id: name, message }),
        }
    }
    Ok(out)
}
