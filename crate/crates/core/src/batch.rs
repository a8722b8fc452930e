//! Batch enhancement of a dataset and per-image quality reports.
//!
//! Images are processed on a dedicated thread pool; records are sorted by
//! path before they are returned, so output is independent of `jobs`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetManifest;
use crate::error::{Error, Result};
use crate::pipeline::{enhance, ConfigFile, PipelineConfig, PipelineMode};
use crate::quality::{ceiq_features, ceiq_score, QualityFeatures, ScoreModel};
use crate::raster::{load_image, save_image};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessingRecord {
    pub path: String,
    pub output: String,
    pub status: RecordStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub milliseconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessingReport {
    pub mode: PipelineMode,
    pub config: ConfigFile,
    pub ok: usize,
    pub failed: usize,
    pub records: Vec<ProcessingRecord>,
}

impl ProcessingReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["path", "output", "status", "error", "milliseconds"])
            .expect("in-memory write");
        for r in &self.records {
            let status = match r.status {
                RecordStatus::Ok => "ok",
                RecordStatus::Failed => "failed",
            };
            w.write_record([
                r.path.as_str(),
                r.output.as_str(),
                status,
                r.error.as_deref().unwrap_or(""),
                &format!("{:.3}", r.milliseconds),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {jobs} worker(s): {e}")))
}

fn png_path(rel: &str) -> String {
    match rel.rsplit_once('.') {
        Some((stem, _)) if !stem.is_empty() && !stem.ends_with('/') => format!("{stem}.png"),
        _ => format!("{rel}.png"),
    }
}

/// Enhances every manifest entry into a mirrored tree under `out_root`.
///
/// Writes the enhanced PNGs, `report.json`, `report.csv` and a
/// `manifest.json` pointing at the outputs (failed images are left out of
/// it). Per-image failures are recorded and never abort the batch; only
/// failures to create or write `out_root` itself are errors.
pub fn process_dataset(
    manifest: &DatasetManifest,
    config: &PipelineConfig,
    out_root: impl AsRef<Path>,
    jobs: usize,
) -> Result<ProcessingReport> {
    config.validate()?;
    let out_root = out_root.as_ref();
    fs::create_dir_all(out_root).map_err(|e| Error::io(out_root, e))?;

    let mut records: Vec<ProcessingRecord> = pool(jobs)?.install(|| {
        manifest
            .entries
            .par_iter()
            .map(|entry| {
                let started = Instant::now();
                let output = png_path(&entry.path);
                let result = load_image(manifest.full_path(entry))
                    .and_then(|img| enhance(&img, config))
                    .and_then(|img| save_image(&img, out_root.join(&output)));
                let milliseconds = started.elapsed().as_secs_f64() * 1e3;
                match result {
                    Ok(()) => ProcessingRecord {
                        path: entry.path.clone(),
                        output,
                        status: RecordStatus::Ok,
                        error: None,
                        milliseconds,
                    },
                    Err(e) => {
                        log::warn!("{}: {e}", entry.path);
                        ProcessingRecord {
                            path: entry.path.clone(),
                            output,
                            status: RecordStatus::Failed,
                            error: Some(e.to_string()),
                            milliseconds,
                        }
                    }
                }
            })
            .collect()
    });
    records.sort_by(|a, b| a.path.cmp(&b.path));

    let ok = records.iter().filter(|r| r.status == RecordStatus::Ok).count();
    let report = ProcessingReport {
        mode: config.mode,
        config: config.to_file(),
        ok,
        failed: records.len() - ok,
        records,
    };

    let mut out_manifest = manifest.clone();
    out_manifest.root = out_root.to_path_buf();
    out_manifest.mode = Some(config.mode);
    let by_path: HashMap<&str, &ProcessingRecord> =
        report.records.iter().map(|r| (r.path.as_str(), r)).collect();
    out_manifest.entries = manifest
        .entries
        .iter()
        .filter_map(|e| {
            let r = by_path[e.path.as_str()];
            (r.status == RecordStatus::Ok).then(|| {
                let mut e = e.clone();
                e.path = r.output.clone();
                e
            })
        })
        .collect();

    out_manifest.save(out_root.join("manifest.json"))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    let report_json = out_root.join("report.json");
    fs::write(&report_json, json).map_err(|e| Error::io(&report_json, e))?;
    let report_csv = out_root.join("report.csv");
    fs::write(&report_csv, report.to_csv()).map_err(|e| Error::io(&report_csv, e))?;
    Ok(report)
}

/// One image to measure, labelled with the enhancement that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QualityInput {
    pub path: PathBuf,
    pub mode: String,
}

pub fn quality_inputs_from_manifest(manifest: &DatasetManifest) -> Vec<QualityInput> {
    let mode = manifest
        .mode
        .map_or_else(|| PipelineMode::Original.to_string(), |m| m.to_string());
    manifest
        .entries
        .iter()
        .map(|e| QualityInput {
            path: manifest.full_path(e),
            mode: mode.clone(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityRow {
    pub path: String,
    pub mode: String,
    #[serde(flatten)]
    pub features: QualityFeatures,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityMean {
    pub mode: String,
    pub count: usize,
    #[serde(flatten)]
    pub features: QualityFeatures,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityFailure {
    pub path: String,
    pub mode: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    pub rows: Vec<QualityRow>,
    pub means: Vec<QualityMean>,
    pub failures: Vec<QualityFailure>,
}

impl QualityReport {
    pub fn has_scores(&self) -> bool {
        self.model.is_some()
    }

    /// Per-image rows followed by one `MEAN` row per mode.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["path", "mode"];
        header.extend(QualityFeatures::NAMES);
        if self.has_scores() {
            header.push("score");
        }
        w.write_record(&header).expect("in-memory write");
        let fmt = |path: &str, mode: &str, f: &QualityFeatures, score: Option<f64>| {
            let mut rec = vec![path.to_string(), mode.to_string()];
            rec.extend(f.to_array().iter().map(|v| format!("{v:.6}")));
            if self.has_scores() {
                rec.push(score.map(|s| format!("{s:.6}")).unwrap_or_default());
            }
            rec
        };
        for r in &self.rows {
            w.write_record(fmt(&r.path, &r.mode, &r.features, r.score))
                .expect("in-memory write");
        }
        for m in &self.means {
            w.write_record(fmt("MEAN", &m.mode, &m.features, m.score))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

/// Quality features (and scores, given a model) for each input, plus per-mode means.
pub fn quality_report(
    inputs: &[QualityInput],
    model: Option<&ScoreModel>,
    jobs: usize,
) -> Result<QualityReport> {
    let results: Vec<(QualityInput, Result<QualityFeatures>)> = pool(jobs)?.install(|| {
        inputs
            .par_iter()
            .map(|input| {
                let features = load_image(&input.path).and_then(|img| ceiq_features(&img));
                (input.clone(), features)
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (input, result) in results {
        let path = input.path.display().to_string();
        match result {
            Ok(features) => rows.push(QualityRow {
                path,
                mode: input.mode,
                score: model.map(|m| ceiq_score(&features, m)),
                features,
            }),
            Err(e) => failures.push(QualityFailure {
                path,
                mode: input.mode,
                error: e.to_string(),
            }),
        }
    }
    rows.sort_by(|a, b| (&a.mode, &a.path).cmp(&(&b.mode, &b.path)));
    failures.sort_by(|a, b| (&a.mode, &a.path).cmp(&(&b.mode, &b.path)));

    let mut modes: Vec<&str> = rows.iter().map(|r| r.mode.as_str()).collect();
    modes.dedup();
    let means = modes
        .into_iter()
        .map(|mode| {
            let group: Vec<&QualityRow> = rows.iter().filter(|r| r.mode == mode).collect();
            let feats: Vec<QualityFeatures> = group.iter().map(|r| r.features).collect();
            QualityMean {
                mode: mode.to_string(),
                count: group.len(),
                features: QualityFeatures::mean(&feats).expect("group is non-empty"),
                score: model.map(|_| {
                    group.iter().filter_map(|r| r.score).sum::<f64>() / group.len() as f64
                }),
            }
        })
        .collect();

    Ok(QualityReport {
        model: model.map(|m| m.name.clone()),
        rows,
        means,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_paths_become_png() {
        assert_eq!(png_path("a/b/c.bmp"), "a/b/c.png");
        assert_eq!(png_path("a/b.c/d.JPG"), "a/b.c/d.png");
        assert_eq!(png_path("a/noext"), "a/noext.png");
        assert_eq!(png_path("a/.hidden"), "a/.hidden.png");
    }
}
