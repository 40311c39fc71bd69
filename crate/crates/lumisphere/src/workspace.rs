//! On-disk layout shared by the CLI and the service.
//!
//! ```text
//! <root>/images/<id>.png|jpg   source images
//! <root>/annotations/<id>.json one annotation or a list (one per sphere)
//! <root>/results/<id>.json     latest fit + lighting per image
//! <root>/truth/<id>.json       fixture ground truth (optional)
//! <root>/params.json           EM parameters (optional)
//! <root>/sets.json             image ids of the two cross-set groups (optional)
//! ```

use std::path::{Path, PathBuf};

use lumisphere_core::circle::EmParams;
use serde::{Deserialize, Serialize};

use crate::schema::{read_json, write_json, Annotation, AnnotationDoc, Failure, ImageRecord, SetsDoc};
use crate::{Error, Result};

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// Stored outcome of fitting every sphere of one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ImageResults {
    pub image_id: String,
    /// Hash of the annotation document and parameters the results came from.
    pub annotation_hash: String,
    pub records: Vec<ImageRecord>,
    #[serde(default)]
    pub failures: Vec<Failure>,
}

#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::read_dir(&root).map_err(|e| Error::io(&root, e))?;
        Ok(Self { root })
    }

    /// Creates the directory skeleton if needed.
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for sub in ["images", "annotations", "results"] {
            let dir = root.join(sub);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn images_dir(&self) -> PathBuf {
        self.root.join("images")
    }

    pub fn annotation_path(&self, id: &str) -> PathBuf {
        self.root.join("annotations").join(format!("{id}.json"))
    }

    pub fn results_path(&self, id: &str) -> PathBuf {
        self.root.join("results").join(format!("{id}.json"))
    }

    pub fn truth_path(&self, id: &str) -> PathBuf {
        self.root.join("truth").join(format!("{id}.json"))
    }

    /// `(id, path)` of every image, sorted by id.
    pub fn images(&self) -> Result<Vec<(String, PathBuf)>> {
        let dir = self.images_dir();
        let entries = match std::fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(Error::io(&dir, e)),
        };
        let mut out = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
            if !ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
                continue;
            }
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push((stem.to_string(), path.clone()));
            }
        }
        out.sort();
        Ok(out)
    }

    pub fn image_path(&self, id: &str) -> Result<Option<PathBuf>> {
        Ok(self.images()?.into_iter().find(|(i, _)| i == id).map(|(_, p)| p))
    }

    pub fn read_annotations(&self, id: &str) -> Result<Option<Vec<Annotation>>> {
        let path = self.annotation_path(id);
        if !path.exists() {
            return Ok(None);
        }
        Ok(Some(read_json::<AnnotationDoc>(&path)?.into_vec()))
    }

    pub fn write_annotations(&self, id: &str, annotations: &[Annotation]) -> Result<()> {
        let doc = match annotations {
            [one] => AnnotationDoc::One(one.clone()),
            many => AnnotationDoc::Many(many.to_vec()),
        };
        write_json(&self.annotation_path(id), &doc)
    }

    pub fn read_results(&self, id: &str) -> Result<Option<ImageResults>> {
        let path = self.results_path(id);
        if !path.exists() {
            return Ok(None);
        }
        read_json(&path).map(Some)
    }

    pub fn write_results(&self, results: &ImageResults) -> Result<()> {
        write_json(&self.results_path(&results.image_id), results)
    }

    /// Parameters from `params.json`, or the defaults.
    pub fn params(&self) -> Result<EmParams> {
        let path = self.root.join("params.json");
        if !path.exists() {
            return Ok(EmParams::default());
        }
        read_json(&path)
    }

    pub fn sets(&self) -> Result<Option<SetsDoc>> {
        let path = self.root.join("sets.json");
        if !path.exists() {
            return Ok(None);
        }
        read_json(&path).map(Some)
    }
}
