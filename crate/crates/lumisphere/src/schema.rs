//! JSON documents shared by the CLI, the batch runner and the HTTP service.
//!
//! Field names are camelCase and lighting coefficients are always nine-element
//! arrays in canonical order `l00 l1m1 l10 l11 l2m2 l2m1 l20 l21 l22`.

use std::path::Path;

use lumisphere_core::analysis::{CrossSetReport, WithinImageReport};
use lumisphere_core::circle::FitResult;
use lumisphere_core::estimate::ChannelLighting;
use lumisphere_core::{Circle, NormalizedLighting};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl std::fmt::Display for CropBox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {}x{})", self.x, self.y, self.w, self.h)
    }
}

/// Rough manual circle around one sphere. Coordinates refer to the
/// post-crop (600x600) frame when `crop_box` is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Annotation {
    pub image_id: String,
    pub approx: Circle,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop_box: Option<CropBox>,
}

/// An annotation file holds one sphere or a list of spheres of one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnnotationDoc {
    One(Annotation),
    Many(Vec<Annotation>),
}

impl AnnotationDoc {
    pub fn into_vec(self) -> Vec<Annotation> {
        match self {
            Self::One(a) => vec![a],
            Self::Many(v) => v,
        }
    }
}

/// Everything measured for one sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ImageRecord {
    pub image_id: String,
    /// Index of the sphere within its annotation file.
    pub sphere: usize,
    pub fit: FitResult,
    pub channels: ChannelLighting,
    /// Derived from `channels.gray`.
    pub normalized: NormalizedLighting,
}

/// A sphere whose pipeline stopped with an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Failure {
    pub image_id: String,
    pub sphere: usize,
    pub kind: String,
    pub module: String,
    pub message: String,
}

impl Failure {
    pub fn new(image_id: &str, sphere: usize, err: &Error) -> Self {
        Self {
            image_id: image_id.to_string(),
            sphere,
            kind: err.kind().to_string(),
            module: err.module().to_string(),
            message: err.to_string(),
        }
    }
}

/// Top-level report document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub records: Vec<ImageRecord>,
    #[serde(default)]
    pub failures: Vec<Failure>,
    #[serde(default)]
    pub within_image: Option<WithinImageReport>,
    #[serde(default)]
    pub cross_set: Option<CrossSetReport>,
}

/// Either a full report or a bare list of records.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
#[allow(clippy::large_enum_variant)]
pub enum RecordsDoc {
    Report(Report),
    Records(Vec<ImageRecord>),
}

impl RecordsDoc {
    pub fn into_records(self) -> Vec<ImageRecord> {
        match self {
            Self::Report(r) => r.records,
            Self::Records(v) => v,
        }
    }
}

/// Image ids grouped into the two sets of a cross-set comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SetsDoc {
    pub set_a: Vec<String>,
    pub set_b: Vec<String>,
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types always serialize");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, to_json_string(value)).map_err(|e| Error::io(path, e))
}
