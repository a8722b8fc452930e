//! Per-channel enhancement: split RGB, filter each plane, merge.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clahe::{clahe_apply, CeilingRule, ClaheParams};
use crate::error::{Error, Result};
use crate::pmd::{pmd_filter, PmdParams};
use crate::raster::{merge_channels, split_channels, ImageBuffer, ImagePlane};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum PipelineMode {
    Original,
    Pmd,
    Clahe,
    #[default]
    #[serde(rename = "hybrid")]
    HybridPmdClahe,
}

impl PipelineMode {
    pub const ALL: [PipelineMode; 4] = [
        PipelineMode::Original,
        PipelineMode::Pmd,
        PipelineMode::Clahe,
        PipelineMode::HybridPmdClahe,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PipelineMode::Original => "original",
            PipelineMode::Pmd => "pmd",
            PipelineMode::Clahe => "clahe",
            PipelineMode::HybridPmdClahe => "hybrid",
        }
    }
}

impl fmt::Display for PipelineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PipelineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PipelineMode::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "unknown mode '{s}', expected one of: original, pmd, clahe, hybrid"
                ))
            })
    }
}

/// Stage order inside the hybrid mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HybridOrder {
    #[default]
    PmdFirst,
    ClaheFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PipelineConfig {
    pub mode: PipelineMode,
    pub pmd: PmdParams,
    pub clahe: ClaheParams,
    pub hybrid_order: HybridOrder,
}

impl PipelineConfig {
    pub fn with_mode(mode: PipelineMode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pmd.validate()?;
        self.clahe.validate()
    }

    /// Applies the configured mode to one plane.
    pub fn enhance_plane(&self, plane: &ImagePlane) -> Result<ImagePlane> {
        match self.mode {
            PipelineMode::Original => Ok(plane.clone()),
            PipelineMode::Pmd => Ok(pmd_filter(plane, &self.pmd)),
            PipelineMode::Clahe => clahe_apply(plane, &self.clahe),
            PipelineMode::HybridPmdClahe => match self.hybrid_order {
                HybridOrder::PmdFirst => {
                    let smoothed = pmd_filter(plane, &self.pmd).quantized();
                    clahe_apply(&smoothed, &self.clahe)
                }
                HybridOrder::ClaheFirst => {
                    let stretched = clahe_apply(plane, &self.clahe)?.quantized();
                    Ok(pmd_filter(&stretched, &self.pmd))
                }
            },
        }
    }

    pub fn to_file(&self) -> ConfigFile {
        let ceiling = match self.clahe.ceiling {
            CeilingRule::MeanMultiplier => None,
            CeilingRule::Slope { alpha, s_max } => Some(SlopeSection { alpha, s_max }),
        };
        ConfigFile {
            mode: Some(self.mode),
            pmd: Some(PmdSection {
                iterations: Some(self.pmd.iterations),
                kappa: Some(self.pmd.kappa),
                lambda: Some(self.pmd.lambda),
            }),
            clahe: Some(ClaheSection {
                clip_limit: Some(self.clahe.clip_limit),
                grid: Some([self.clahe.grid_cols, self.clahe.grid_rows]),
                slope_ceiling: ceiling,
            }),
            hybrid_order: (self.hybrid_order != HybridOrder::PmdFirst).then_some(self.hybrid_order),
        }
    }
}

/// Enhances an image channel by channel. Grey images are a single plane.
pub fn enhance(image: &ImageBuffer, config: &PipelineConfig) -> Result<ImageBuffer> {
    config.validate()?;
    if config.mode == PipelineMode::Original {
        return Ok(image.clone());
    }
    match image.channels() {
        1 => {
            let out = config.enhance_plane(&image.to_plane()?)?;
            Ok(ImageBuffer::from_plane(&out))
        }
        _ => {
            let (r, g, b) = split_channels(image)?;
            let (r, (g, b)) = rayon::join(
                || config.enhance_plane(&r),
                || rayon::join(|| config.enhance_plane(&g), || config.enhance_plane(&b)),
            );
            merge_channels(&r?, &g?, &b?)
        }
    }
}

/// JSON config document. Every field is optional; missing ones keep their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<PipelineMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmd: Option<PmdSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clahe: Option<ClaheSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hybrid_order: Option<HybridOrder>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmdSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaheSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_limit: Option<f64>,
    /// `[cols, rows]`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_ceiling: Option<SlopeSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeSection {
    pub alpha: f64,
    pub s_max: f64,
}

impl ConfigFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::FileNotFound {
                path: path.to_path_buf(),
            });
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Malformed {
            what: "config",
            path: path.to_path_buf(),
            cause: e.to_string(),
        })
    }

    /// Overlays the fields present in `self` onto `base`.
    pub fn apply_to(&self, base: &mut PipelineConfig) {
        if let Some(mode) = self.mode {
            base.mode = mode;
        }
        if let Some(pmd) = &self.pmd {
            if let Some(v) = pmd.iterations {
                base.pmd.iterations = v;
            }
            if let Some(v) = pmd.kappa {
                base.pmd.kappa = v;
            }
            if let Some(v) = pmd.lambda {
                base.pmd.lambda = v;
            }
        }
        if let Some(clahe) = &self.clahe {
            if let Some(v) = clahe.clip_limit {
                base.clahe.clip_limit = v;
            }
            if let Some([cols, rows]) = clahe.grid {
                base.clahe.grid_cols = cols;
                base.clahe.grid_rows = rows;
            }
            if let Some(s) = clahe.slope_ceiling {
                base.clahe.ceiling = CeilingRule::Slope {
                    alpha: s.alpha,
                    s_max: s.s_max,
                };
            }
        }
        if let Some(order) = self.hybrid_order {
            base.hybrid_order = order;
        }
    }
}
