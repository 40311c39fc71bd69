//! Per-sphere fit, estimate and normalize; batch runs over a workspace.

use std::path::Path;

use lumisphere_core::circle::{fit_circle_em, EmParams};
use lumisphere_core::estimate::{estimate_all_channels, normalize_env, EstimateOptions};
use lumisphere_core::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::crop::crop_resize;
use crate::io::load_rgb;
use crate::schema::{Annotation, Failure, ImageRecord};
use crate::workspace::{ImageResults, Workspace};
use crate::{Error, Result};

/// Caps the number of worker threads of a batch run.
pub const THREADS_VAR: &str = "LUMISPHERE_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct PipelineOptions {
    pub em: EmParams,
    pub estimate: EstimateOptions,
}

/// The frame an annotation refers to: the crop when one is given.
pub fn analysis_frame(image: &RgbImage, annotation: &Annotation) -> Result<RgbImage> {
    match &annotation.crop_box {
        Some(b) => crop_resize(image, b),
        None => Ok(image.clone()),
    }
}

fn check_annotation(frame: &RgbImage, annotation: &Annotation) -> Result<()> {
    let c = &annotation.approx;
    let inside =
        c.cx >= 0.0 && c.cy >= 0.0 && c.cx <= frame.width() as f64 - 1.0 && c.cy <= frame.height() as f64 - 1.0;
    if !(c.r > 0.0 && c.r.is_finite()) || !inside {
        return Err(Error::InvalidAnnotation(format!(
            "circle ({}, {}, {}) is not inside the {}x{} frame",
            c.cx,
            c.cy,
            c.r,
            frame.width(),
            frame.height()
        )));
    }
    Ok(())
}

/// Fit, estimate and normalize one annotated sphere of an already loaded image.
pub fn process_sphere(
    image: &RgbImage,
    annotation: &Annotation,
    sphere: usize,
    opts: &PipelineOptions,
) -> Result<ImageRecord> {
    let frame = analysis_frame(image, annotation)?;
    check_annotation(&frame, annotation)?;
    let fit = fit_circle_em(&frame, &annotation.approx, &opts.em)?;
    let channels = estimate_all_channels(&frame, &fit.circle, &opts.estimate)?;
    let normalized = normalize_env(&channels.gray)?;
    Ok(ImageRecord {
        image_id: annotation.image_id.clone(),
        sphere,
        fit,
        channels,
        normalized,
    })
}

/// Single-sphere pipeline from an image file.
pub fn run_image_pipeline(path: &Path, annotation: &Annotation, opts: &PipelineOptions) -> Result<ImageRecord> {
    let image = load_rgb(path)?;
    process_sphere(&image, annotation, 0, opts)
}

/// Hex SHA-256 of the inputs a fit depends on.
pub fn annotation_hash(annotations: &[Annotation], opts: &PipelineOptions) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(annotations).expect("annotations serialize"));
    h.update(serde_json::to_vec(opts).expect("options serialize"));
    hex::encode(h.finalize())
}

/// Runs every annotated sphere of one image. Per-sphere errors become
/// failures; only errors reading the workspace itself are returned.
pub fn process_image(
    image_id: &str,
    path: &Path,
    annotations: &[Annotation],
    opts: &PipelineOptions,
) -> Result<ImageResults> {
    let mut results = ImageResults {
        image_id: image_id.to_string(),
        annotation_hash: annotation_hash(annotations, opts),
        records: Vec::new(),
        failures: Vec::new(),
    };
    let image = match load_rgb(path) {
        Ok(img) => img,
        Err(e) if e.is_fatal() => return Err(e),
        Err(e) => {
            results.failures = (0..annotations.len()).map(|i| Failure::new(image_id, i, &e)).collect();
            return Ok(results);
        }
    };
    for (sphere, annotation) in annotations.iter().enumerate() {
        if annotation.image_id != image_id {
            let e = Error::InvalidAnnotation(format!("annotation names image {:?}", annotation.image_id));
            results.failures.push(Failure::new(image_id, sphere, &e));
            continue;
        }
        match process_sphere(&image, annotation, sphere, opts) {
            Ok(record) => results.records.push(record),
            Err(e) if e.is_fatal() => return Err(e),
            Err(e) => results.failures.push(Failure::new(image_id, sphere, &e)),
        }
    }
    Ok(results)
}

/// Outcome of a batch run, sorted by image id then sphere index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BatchOutcome {
    pub images: Vec<ImageResults>,
}

impl BatchOutcome {
    pub fn records(&self) -> Vec<ImageRecord> {
        self.images.iter().flat_map(|r| r.records.iter().cloned()).collect()
    }

    pub fn failures(&self) -> Vec<Failure> {
        self.images.iter().flat_map(|r| r.failures.iter().cloned()).collect()
    }
}

/// Worker count from [`THREADS_VAR`], if set.
pub fn thread_limit() -> Result<Option<usize>> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!(
                "{THREADS_VAR} must be a positive integer, got {v:?}"
            ))),
        },
    }
}

/// Processes every image of the workspace, in parallel, and stores each
/// image's results under `results/`.
pub fn run_batch(ws: &Workspace, opts: &PipelineOptions) -> Result<BatchOutcome> {
    let mut jobs = Vec::new();
    let mut images = Vec::new();
    for (id, path) in ws.images()? {
        match ws.read_annotations(&id)? {
            Some(a) if !a.is_empty() => jobs.push((id, path, a)),
            _ => images.push(ImageResults {
                image_id: id.clone(),
                annotation_hash: String::new(),
                records: Vec::new(),
                failures: vec![Failure {
                    image_id: id,
                    sphere: 0,
                    kind: "missing-annotation".into(),
                    module: "pipeline".into(),
                    message: "image has no annotation".into(),
                }],
            }),
        }
    }

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_limit()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    let done: Vec<Result<ImageResults>> = pool.install(|| {
        jobs.par_iter()
            .map(|(id, path, a)| process_image(id, path, a, opts))
            .collect()
    });
    for result in done {
        let result = result?;
        ws.write_results(&result)?;
        images.push(result);
    }
    images.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    for r in &mut images {
        r.records.sort_by_key(|x| x.sphere);
        r.failures.sort_by_key(|x| x.sphere);
    }
    Ok(BatchOutcome { images })
}
