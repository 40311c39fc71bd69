//! Report assembly and emission.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use lumisphere_core::analysis::{
    cross_set_report_with, within_image_report_with, CrossSetPairing, CrossSetReport, PairOrientation,
    WithinImageReport,
};
use lumisphere_core::estimate::ChannelLighting;
use lumisphere_core::sh::LABELS;
use lumisphere_core::{LightingEnv, NormalizedLighting};

use crate::schema::{read_json, to_json_string, Failure, ImageRecord, Report, SetsDoc};
use crate::{Error, Result};

pub const REPORT_FILE: &str = "report.json";
pub const RECORDS_FILE: &str = "records.csv";

/// Gray environments of every image with at least two spheres, grouped by
/// image id and ordered by sphere index.
pub fn group_by_image(records: &[ImageRecord]) -> Vec<(String, Vec<LightingEnv>)> {
    let mut groups: BTreeMap<&str, Vec<&ImageRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(&r.image_id).or_default().push(r);
    }
    groups
        .into_iter()
        .filter(|(_, v)| v.len() >= 2)
        .map(|(id, mut v)| {
            v.sort_by_key(|r| r.sphere);
            (id.to_string(), v.iter().map(|r| r.channels.gray).collect())
        })
        .collect()
}

/// Within-image comparison over every multi-sphere image, or `None` if there is none.
pub fn within_from_records(records: &[ImageRecord], orientation: PairOrientation) -> Result<Option<WithinImageReport>> {
    let groups: Vec<Vec<LightingEnv>> = group_by_image(records).into_iter().map(|(_, v)| v).collect();
    if groups.is_empty() {
        return Ok(None);
    }
    Ok(Some(within_image_report_with(&groups, orientation)?))
}

fn normalized_of(records: &[ImageRecord], ids: &[String]) -> Vec<NormalizedLighting> {
    records
        .iter()
        .filter(|r| ids.contains(&r.image_id))
        .map(|r| r.normalized)
        .collect()
}

/// Cross-set comparison of the records named by `sets`.
pub fn cross_from_records(records: &[ImageRecord], sets: &SetsDoc, pairing: CrossSetPairing) -> Result<CrossSetReport> {
    let a = normalized_of(records, &sets.set_a);
    let b = normalized_of(records, &sets.set_b);
    Ok(cross_set_report_with(&a, &b, pairing)?)
}

/// Bundles records with whichever analyses the inputs support.
///
/// The within-image study runs when some image has two spheres; the
/// cross-set study runs when `sets` is given and both sets have records.
pub fn build_report(
    mut records: Vec<ImageRecord>,
    mut failures: Vec<Failure>,
    sets: Option<&SetsDoc>,
) -> Result<Report> {
    if records.is_empty() && failures.is_empty() {
        return Err(Error::EmptyInput);
    }
    records.sort_by(|a, b| (&a.image_id, a.sphere).cmp(&(&b.image_id, b.sphere)));
    failures.sort_by(|a, b| (&a.image_id, a.sphere).cmp(&(&b.image_id, b.sphere)));
    let within_image = within_from_records(&records, PairOrientation::Mirrored)?;
    let cross_set = match sets {
        Some(s) if !normalized_of(&records, &s.set_a).is_empty() && !normalized_of(&records, &s.set_b).is_empty() => {
            Some(cross_from_records(&records, s, CrossSetPairing::Medians)?)
        }
        _ => None,
    };
    Ok(Report {
        records,
        failures,
        within_image,
        cross_set,
    })
}

/// One row per `(imageId, sphere, channel)` with the nine coefficients.
pub fn records_csv(records: &[ImageRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["imageId".to_string(), "sphere".into(), "channel".into()];
    header.extend(LABELS.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for r in records {
        for (name, env) in ChannelLighting::NAMES.iter().zip(r.channels.as_array()) {
            let mut row = vec![r.image_id.clone(), r.sphere.to_string(), name.to_string()];
            row.extend(env.coeffs().iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// `(imageId, sphere, channel, coefficients)`.
pub type CsvRow = (String, usize, String, [f64; 9]);

/// Parses [`records_csv`] output back into rows.
pub fn parse_records_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or_default();
        let num = |i: usize| -> Result<f64> {
            field(i)
                .parse()
                .map_err(|_| Error::Config(format!("bad number {:?} in records table", field(i))))
        };
        let mut coeffs = [0.0; 9];
        for (k, c) in coeffs.iter_mut().enumerate() {
            *c = num(k + 3)?;
        }
        let sphere = field(1)
            .parse()
            .map_err(|_| Error::Config(format!("bad sphere index {:?}", field(1))))?;
        out.push((field(0).to_string(), sphere, field(2).to_string(), coeffs));
    }
    Ok(out)
}

/// Writes `report.json` and `records.csv` into `dir`; returns both paths.
pub fn emit_report(report: &Report, dir: &Path) -> Result<[PathBuf; 2]> {
    if report.records.is_empty() {
        return Err(Error::EmptyInput);
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = dir.join(REPORT_FILE);
    let table = dir.join(RECORDS_FILE);
    std::fs::write(&json, to_json_string(report)).map_err(|e| Error::io(&json, e))?;
    std::fs::write(&table, records_csv(&report.records)?).map_err(|e| Error::io(&table, e))?;
    Ok([json, table])
}

pub fn read_report(dir: &Path) -> Result<Report> {
    read_json(&dir.join(REPORT_FILE))
}
