//! Classification metrics from confusion matrices, and cross-mode comparison.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let n = counts.len();
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        if counts.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "confusion matrix must be square, got {n} rows of lengths {:?}",
                counts.iter().map(Vec::len).collect::<Vec<_>>()
            )));
        }
        if !labels.is_empty() && labels.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for a {n}x{n} matrix",
                labels.len()
            )));
        }
        let labels = if labels.is_empty() {
            (0..n).map(|i| format!("class_{i}")).collect()
        } else {
            labels
        };
        Ok(Self { labels, counts })
    }

    pub fn unlabeled(counts: Vec<Vec<u64>>) -> Result<Self> {
        Self::new(Vec::new(), counts)
    }

    pub fn size(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Unweighted mean over classes.
    #[default]
    Macro,
    /// Mean over classes weighted by true-class support.
    Weighted,
}

/// Percentages in `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Accuracy, and precision/recall/F1 averaged over classes. F1 is the mean of
/// per-class F1 scores. Classes with a zero denominator contribute 0.
pub fn compute_metrics(cm: &ConfusionMatrix, averaging: Averaging) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyMatrix);
    }
    let n = cm.size();
    let trace: u64 = (0..n).map(|i| cm.counts[i][i]).sum();

    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let (mut precision, mut recall, mut f1, mut weight_sum) = (0.0, 0.0, 0.0, 0.0);
    for c in 0..n {
        let tp = cm.counts[c][c];
        let support: u64 = cm.counts[c].iter().sum();
        let predicted: u64 = cm.counts.iter().map(|row| row[c]).sum();
        let p = ratio(tp, predicted);
        let r = ratio(tp, support);
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        let weight = match averaging {
            Averaging::Macro => 1.0,
            Averaging::Weighted => support as f64,
        };
        precision += weight * p;
        recall += weight * r;
        f1 += weight * f;
        weight_sum += weight;
    }

    Ok(Metrics {
        accuracy: 100.0 * trace as f64 / total as f64,
        precision: 100.0 * precision / weight_sum,
        recall: 100.0 * recall / weight_sum,
        f1: 100.0 * f1 / weight_sum,
    })
}

/// On-disk metrics document. Either `confusion` or all four metric fields must
/// be present; metrics are computed from the matrix whenever it is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub architecture: String,
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<Vec<Vec<u64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_time_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub architecture: String,
    pub mode: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub training_time: f64,
}

impl MetricsRecord {
    pub fn resolve(&self, averaging: Averaging) -> Result<MetricsReport> {
        let metrics = match &self.confusion {
            Some(counts) => {
                let cm = ConfusionMatrix::new(self.labels.clone().unwrap_or_default(), counts.clone())?;
                compute_metrics(&cm, averaging)?
            }
            None => match (self.accuracy, self.precision, self.recall, self.f1) {
                (Some(accuracy), Some(precision), Some(recall), Some(f1)) => Metrics {
                    accuracy,
                    precision,
                    recall,
                    f1,
                },
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "{}/{}: needs a confusion matrix or all of accuracy, precision, recall, f1",
                        self.architecture, self.mode
                    )))
                }
            },
        };
        for (name, v) in [
            ("accuracy", metrics.accuracy),
            ("precision", metrics.precision),
            ("recall", metrics.recall),
            ("f1", metrics.f1),
        ] {
            if !(0.0..=100.0).contains(&v) {
                return Err(Error::InvalidParameter(format!(
                    "{}/{}: {name} = {v} is outside [0, 100]",
                    self.architecture, self.mode
                )));
            }
        }
        Ok(MetricsReport {
            architecture: self.architecture.clone(),
            mode: self.mode.clone(),
            accuracy: metrics.accuracy,
            precision: metrics.precision,
            recall: metrics.recall,
            f1: metrics.f1,
            training_time: self.training_time_s.unwrap_or(0.0),
        })
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(MetricsRecord),
    Many(Vec<MetricsRecord>),
}

/// Reads a metrics file holding one record or an array of records.
pub fn load_metrics_file(path: impl AsRef<Path>, averaging: Averaging) -> Result<Vec<MetricsReport>> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::FileNotFound {
            path: path.to_path_buf(),
        });
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let malformed = |cause: String| Error::Malformed {
        what: "metrics file",
        path: path.to_path_buf(),
        cause,
    };
    let records = match serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))? {
        OneOrMany::One(r) => vec![r],
        OneOrMany::Many(v) => v,
    };
    records
        .iter()
        .map(|r| r.resolve(averaging).map_err(|e| malformed(e.to_string())))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Accuracy,
    Precision,
    Recall,
    F1,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::Accuracy,
        MetricKind::Precision,
        MetricKind::Recall,
        MetricKind::F1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Accuracy => "accuracy",
            MetricKind::Precision => "precision",
            MetricKind::Recall => "recall",
            MetricKind::F1 => "f1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricDeltas {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub training_time: f64,
}

impl MetricDeltas {
    pub fn get(&self, kind: MetricKind) -> f64 {
        match kind {
            MetricKind::Accuracy => self.accuracy,
            MetricKind::Precision => self.precision,
            MetricKind::Recall => self.recall,
            MetricKind::F1 => self.f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureDelta {
    pub architecture: String,
    pub deltas: MetricDeltas,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricMaximum {
    pub metric: MetricKind,
    pub architecture: String,
    pub delta: f64,
}

/// A claimed maximum improvement that the computed deltas do not reproduce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub metric: MetricKind,
    pub claimed: f64,
    pub computed: f64,
    pub architecture: String,
}

/// Expected maximum per-metric improvements, e.g. as stated alongside published tables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimedMaxima {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    #[serde(default = "default_claim_tolerance")]
    pub tolerance: f64,
}

fn default_claim_tolerance() -> f64 {
    0.01
}

impl ClaimedMaxima {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::FileNotFound {
                path: path.to_path_buf(),
            });
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Malformed {
            what: "claims file",
            path: path.to_path_buf(),
            cause: e.to_string(),
        })
    }

    pub fn get(&self, kind: MetricKind) -> Option<f64> {
        match kind {
            MetricKind::Accuracy => self.accuracy,
            MetricKind::Precision => self.precision,
            MetricKind::Recall => self.recall,
            MetricKind::F1 => self.f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub baseline_mode: String,
    pub candidate_mode: String,
    pub rows: Vec<ArchitectureDelta>,
    pub maxima: Vec<MetricMaximum>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub discrepancies: Vec<Discrepancy>,
}

fn mode_label(reports: &[MetricsReport]) -> String {
    let modes: BTreeSet<&str> = reports.iter().map(|r| r.mode.as_str()).collect();
    modes.into_iter().collect::<Vec<_>>().join("+")
}

/// Per-architecture `candidate - baseline` deltas and the largest delta per metric.
pub fn compare_reports(baseline: &[MetricsReport], candidate: &[MetricsReport]) -> Result<ComparisonReport> {
    let index: HashMap<&str, &MetricsReport> = candidate
        .iter()
        .map(|r| (r.architecture.as_str(), r))
        .collect();
    let base_names: BTreeSet<&str> = baseline.iter().map(|r| r.architecture.as_str()).collect();
    let cand_names: BTreeSet<&str> = index.keys().copied().collect();
    if base_names != cand_names || base_names.len() != baseline.len() || cand_names.len() != candidate.len() {
        let only_base: Vec<_> = base_names.difference(&cand_names).collect();
        let only_cand: Vec<_> = cand_names.difference(&base_names).collect();
        return Err(Error::UnmatchedArchitecture(format!(
            "only in baseline: {only_base:?}; only in candidate: {only_cand:?}{}",
            if only_base.is_empty() && only_cand.is_empty() {
                " (duplicate architecture names)"
            } else {
                ""
            }
        )));
    }

    let rows: Vec<ArchitectureDelta> = baseline
        .iter()
        .map(|a| {
            let b = index[a.architecture.as_str()];
            ArchitectureDelta {
                architecture: a.architecture.clone(),
                deltas: MetricDeltas {
                    accuracy: b.accuracy - a.accuracy,
                    precision: b.precision - a.precision,
                    recall: b.recall - a.recall,
                    f1: b.f1 - a.f1,
                    training_time: b.training_time - a.training_time,
                },
            }
        })
        .collect();

    let maxima = if rows.is_empty() {
        Vec::new()
    } else {
        MetricKind::ALL
            .iter()
            .map(|&kind| {
                let best = rows
                    .iter()
                    .reduce(|best, r| if r.deltas.get(kind) > best.deltas.get(kind) { r } else { best })
                    .expect("rows non-empty");
                MetricMaximum {
                    metric: kind,
                    architecture: best.architecture.clone(),
                    delta: best.deltas.get(kind),
                }
            })
            .collect()
    };

    Ok(ComparisonReport {
        baseline_mode: mode_label(baseline),
        candidate_mode: mode_label(candidate),
        rows,
        maxima,
        discrepancies: Vec::new(),
    })
}

impl ComparisonReport {
    pub fn maximum(&self, kind: MetricKind) -> Option<&MetricMaximum> {
        self.maxima.iter().find(|m| m.metric == kind)
    }

    /// Records every claimed maximum that differs from the computed one by more
    /// than the claim tolerance.
    pub fn check_claims(&mut self, claims: &ClaimedMaxima) {
        self.discrepancies = self
            .maxima
            .iter()
            .filter_map(|m| {
                let claimed = claims.get(m.metric)?;
                ((claimed - m.delta).abs() > claims.tolerance).then(|| Discrepancy {
                    metric: m.metric,
                    claimed,
                    computed: m.delta,
                    architecture: m.architecture.clone(),
                })
            })
            .collect();
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} -> {}", self.baseline_mode, self.candidate_mode);
        let _ = writeln!(
            out,
            "{:<18} {:>10} {:>10} {:>10} {:>10} {:>12}",
            "architecture", "accuracy", "precision", "recall", "f1", "train_s"
        );
        for r in &self.rows {
            let mark = |kind: MetricKind| {
                let is_max = self
                    .maximum(kind)
                    .is_some_and(|m| m.architecture == r.architecture);
                format!("{:+.2}{}", r.deltas.get(kind), if is_max { "*" } else { " " })
            };
            let _ = writeln!(
                out,
                "{:<18} {:>10} {:>10} {:>10} {:>10} {:>12.1}",
                r.architecture,
                mark(MetricKind::Accuracy),
                mark(MetricKind::Precision),
                mark(MetricKind::Recall),
                mark(MetricKind::F1),
                r.deltas.training_time
            );
        }
        for m in &self.maxima {
            let _ = writeln!(out, "max {:<10} {:+.2} ({})", m.metric.name(), m.delta, m.architecture);
        }
        for d in &self.discrepancies {
            let _ = writeln!(
                out,
                "DISCREPANCY {}: claimed {:.2}, computed {:.2} ({})",
                d.metric.name(),
                d.claimed,
                d.computed,
                d.architecture
            );
        }
        out
    }
}
