//! JSON dataset manifests pointing at individual sample files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_sample, write_sample, DataError, DenseSample, EventSample, Preprocess};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the manifest's directory.
    pub file: String,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub split: String,
    pub n_classes: usize,
    pub n_channels: usize,
    pub samples: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| DataError::Io { path: path.into(), source })?;
        let manifest: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| DataError::Manifest(format!("{}: {e}", path.display())))?;
        if let Some(e) = manifest.samples.iter().find(|e| e.label >= manifest.n_classes) {
            return Err(DataError::LabelOutOfRange { label: e.label, classes: manifest.n_classes });
        }
        Ok(manifest)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| DataError::Manifest(e.to_string()))?;
        fs::write(path, text).map_err(|source| DataError::Io { path: path.into(), source })
    }
}

/// An in-memory split: manifest metadata plus decoded samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub split: String,
    pub n_classes: usize,
    pub n_channels: usize,
    pub samples: Vec<EventSample>,
}

impl Dataset {
    /// Load a manifest and every sample it references. Fails on the first
    /// unreadable file or on a label disagreement between file and manifest.
    pub fn load(manifest_path: impl AsRef<Path>) -> Result<Self, DataError> {
        let manifest_path = manifest_path.as_ref();
        let manifest = DatasetManifest::read(manifest_path)?;
        let root = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut samples = Vec::with_capacity(manifest.samples.len());
        for entry in &manifest.samples {
            let sample = read_sample(root.join(&entry.file))?;
            if sample.label as usize != entry.label {
                return Err(DataError::Manifest(format!(
                    "{}: file label {} disagrees with manifest label {}",
                    entry.file, sample.label, entry.label
                )));
            }
            if let Some(ev) = sample.events.iter().find(|e| e.unit as usize >= manifest.n_channels) {
                return Err(DataError::UnitOutOfRange { unit: ev.unit as usize, channels: manifest.n_channels });
            }
            samples.push(sample);
        }
        Ok(Self {
            name: manifest.name,
            split: manifest.split,
            n_classes: manifest.n_classes,
            n_channels: manifest.n_channels,
            samples,
        })
    }

    /// Write `<dir>/<stem>.json` and one sample file per entry under
    /// `<dir>/<stem>/`. Returns the manifest path.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<PathBuf, DataError> {
        let dir = dir.as_ref();
        let sample_dir = dir.join(stem);
        fs::create_dir_all(&sample_dir).map_err(|source| DataError::Io { path: sample_dir.clone(), source })?;
        let mut entries = Vec::with_capacity(self.samples.len());
        for (k, sample) in self.samples.iter().enumerate() {
            let file = format!("{stem}/{k:06}.snne");
            write_sample(sample, dir.join(&file))?;
            entries.push(ManifestEntry { file, label: sample.label as usize });
        }
        let manifest = DatasetManifest {
            name: self.name.clone(),
            split: self.split.clone(),
            n_classes: self.n_classes,
            n_channels: self.n_channels,
            samples: entries,
        };
        let path = dir.join(format!("{stem}.json"));
        manifest.write(&path)?;
        Ok(path)
    }

    pub fn to_dense(&self, pre: &Preprocess) -> Result<Vec<DenseSample>, DataError> {
        self.samples.iter().map(|s| pre.apply(s)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Event;

    fn tiny() -> Dataset {
        Dataset {
            name: "tiny".into(),
            split: "train".into(),
            n_classes: 3,
            n_channels: 4,
            samples: vec![
                EventSample { events: vec![Event { time_ms: 1.0, unit: 2 }], label: 2, duration_ms: 10.0 },
                EventSample { events: vec![], label: 0, duration_ms: 5.0 },
            ],
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = tiny().save(dir.path(), "train").unwrap();
        assert_eq!(Dataset::load(&path).unwrap(), tiny());
    }

    #[test]
    fn bad_label_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = tiny().save(dir.path(), "train").unwrap();
        let mut m = DatasetManifest::read(&path).unwrap();
        m.samples[0].label = 9;
        m.write(&path).unwrap();
        assert!(matches!(Dataset::load(&path), Err(DataError::LabelOutOfRange { label: 9, classes: 3 })));
    }

    #[test]
    fn missing_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = tiny().save(dir.path(), "train").unwrap();
        fs::remove_file(dir.path().join("train/000001.snne")).unwrap();
        assert!(matches!(Dataset::load(&path), Err(DataError::Io { .. })));
    }
}
