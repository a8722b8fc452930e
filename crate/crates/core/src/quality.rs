//! No-reference contrast quality features.
//!
//! Features compare an image's luminance with its globally equalized version:
//! structural similarity to the equalized image, the two histogram entropies,
//! and the cross-entropies between the two histograms in both directions. A
//! linear [`ScoreModel`] loaded from JSON maps the features to a scalar score;
//! no weights are built in.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clahe::{he_lut, tile_histogram, Histogram, Region};
use crate::error::{Error, Result};
use crate::raster::{luminance, quantize_u8, ImageBuffer, ImagePlane};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const SSIM_RANGE: f64 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityFeatures {
    pub ssim_he: f64,
    pub entropy: f64,
    pub entropy_he: f64,
    pub cross_entropy: f64,
    pub cross_entropy_rev: f64,
}

impl QualityFeatures {
    pub const NAMES: [&'static str; 5] = [
        "ssim_he",
        "entropy",
        "entropy_he",
        "cross_entropy",
        "cross_entropy_rev",
    ];

    pub fn to_array(&self) -> [f64; 5] {
        [
            self.ssim_he,
            self.entropy,
            self.entropy_he,
            self.cross_entropy,
            self.cross_entropy_rev,
        ]
    }

    pub fn from_array(v: [f64; 5]) -> Self {
        Self {
            ssim_he: v[0],
            entropy: v[1],
            entropy_he: v[2],
            cross_entropy: v[3],
            cross_entropy_rev: v[4],
        }
    }

    /// Element-wise mean, `None` for an empty slice.
    pub fn mean(items: &[QualityFeatures]) -> Option<QualityFeatures> {
        if items.is_empty() {
            return None;
        }
        let mut acc = [0.0; 5];
        for f in items {
            for (a, v) in acc.iter_mut().zip(f.to_array()) {
                *a += v;
            }
        }
        Some(Self::from_array(acc.map(|a| a / items.len() as f64)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureWeights {
    pub ssim_he: f64,
    pub entropy: f64,
    pub entropy_he: f64,
    pub cross_entropy: f64,
    pub cross_entropy_rev: f64,
}

/// Affine regression head: `intercept + weights . features`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreModel {
    pub name: String,
    pub provenance: String,
    pub intercept: f64,
    pub weights: FeatureWeights,
}

impl ScoreModel {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ModelMismatch(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::FileNotFound {
                path: path.to_path_buf(),
            });
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
            .map_err(|e| Error::ModelMismatch(format!("{}: {e}", path.display())))
    }

    fn weight_array(&self) -> [f64; 5] {
        let w = &self.weights;
        [w.ssim_he, w.entropy, w.entropy_he, w.cross_entropy, w.cross_entropy_rev]
    }
}

pub fn ceiq_score(features: &QualityFeatures, model: &ScoreModel) -> f64 {
    model.intercept
        + model
            .weight_array()
            .iter()
            .zip(features.to_array())
            .map(|(w, f)| w * f)
            .sum::<f64>()
}

/// 256-bin histogram of the whole plane after quantization.
pub fn plane_histogram(plane: &ImagePlane) -> Histogram {
    let full = Region {
        x: 0,
        y: 0,
        width: plane.width(),
        height: plane.height(),
    };
    tile_histogram(plane, full).expect("full region is in bounds")
}

/// Global histogram equalization (single tile, no clipping).
pub fn global_he(plane: &ImagePlane) -> ImagePlane {
    let hist = plane_histogram(plane);
    let lut = he_lut(&hist, (plane.width() * plane.height()) as u64);
    let data = plane
        .data()
        .iter()
        .map(|&v| lut.map(quantize_u8(v)) as f64)
        .collect();
    ImagePlane::new(plane.width(), plane.height(), data).expect("dimensions preserved")
}

/// Shannon entropy in bits of a count histogram.
pub fn entropy_bits(hist: &[u64]) -> f64 {
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    -hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            p * p.log2()
        })
        .sum::<f64>()
}

pub fn histogram_entropy(plane: &ImagePlane) -> f64 {
    entropy_bits(&plane_histogram(plane))
}

/// `-sum p_i log2 q'_i` where `q'` is `q` normalized, smoothed by
/// `eps = 1 / (total_q * bins)` per bin, and renormalized.
pub fn cross_entropy(p: &[u64], q: &[u64]) -> Result<f64> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "histograms have {} and {} bins",
            p.len(),
            q.len()
        )));
    }
    let total_p: u64 = p.iter().sum();
    let total_q: u64 = q.iter().sum();
    if total_p == 0 || total_q == 0 {
        return Err(Error::DimensionMismatch("empty histogram".into()));
    }
    let bins = q.len() as f64;
    let eps = 1.0 / (total_q as f64 * bins);
    let norm = 1.0 + bins * eps;
    Ok(-p
        .iter()
        .zip(q)
        .filter(|(&pc, _)| pc > 0)
        .map(|(&pc, &qc)| {
            let pi = pc as f64 / total_p as f64;
            let qi = (qc as f64 / total_q as f64 + eps) / norm;
            pi * qi.log2()
        })
        .sum::<f64>())
}

fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let mut taps = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - half;
        *t = (-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = taps.iter().sum();
    taps.map(|t| t / sum)
}

/// Separable valid-mode filtering of `values` (w x h) with `taps`.
fn filter_valid(values: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (ow, oh) = (w + 1 - k, h + 1 - k);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let src = &values[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().zip(&src[x..x + k]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(i, t)| t * rows[(y + i) * ow + x])
                .sum();
        }
    }
    out
}

/// Mean SSIM over every fully-contained 11x11 Gaussian window.
pub fn ssim(a: &ImagePlane, b: &ImagePlane) -> Result<f64> {
    if !a.same_dims(b) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: SSIM_WINDOW,
        });
    }
    let taps = gaussian_taps();
    let (ad, bd) = (a.data(), b.data());
    let sq = |x: &[f64]| x.iter().map(|v| v * v).collect::<Vec<_>>();
    let prod: Vec<f64> = ad.iter().zip(bd).map(|(x, y)| x * y).collect();

    let mu_a = filter_valid(ad, w, h, &taps);
    let mu_b = filter_valid(bd, w, h, &taps);
    let e_aa = filter_valid(&sq(ad), w, h, &taps);
    let e_bb = filter_valid(&sq(bd), w, h, &taps);
    let e_ab = filter_valid(&prod, w, h, &taps);

    let c1 = (SSIM_K1 * SSIM_RANGE).powi(2);
    let c2 = (SSIM_K2 * SSIM_RANGE).powi(2);
    let n = mu_a.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = e_aa[i] - ma * ma;
            let var_b = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2))
        })
        .sum();
    Ok(total / n as f64)
}

pub fn ceiq_features(image: &ImageBuffer) -> Result<QualityFeatures> {
    let (w, h) = (image.width(), image.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: SSIM_WINDOW,
        });
    }
    let lum = luminance(image);
    let he = global_he(&lum);
    let hist = plane_histogram(&lum);
    let hist_he = plane_histogram(&he);
    Ok(QualityFeatures {
        ssim_he: ssim(&lum, &he)?,
        entropy: entropy_bits(&hist),
        entropy_he: entropy_bits(&hist_he),
        cross_entropy: cross_entropy(&hist, &hist_he)?,
        cross_entropy_rev: cross_entropy(&hist_he, &hist)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(intercept: f64, w: [f64; 5]) -> ScoreModel {
        ScoreModel {
            name: "test".into(),
            provenance: "unit test".into(),
            intercept,
            weights: FeatureWeights {
                ssim_he: w[0],
                entropy: w[1],
                entropy_he: w[2],
                cross_entropy: w[3],
                cross_entropy_rev: w[4],
            },
        }
    }

    fn ramp(w: usize, h: usize) -> ImagePlane {
        ImagePlane::from_fn(w, h, |x, y| ((x * 7 + y * 13) % 256) as f64).unwrap()
    }

    #[test]
    fn global_he_two_levels() {
        let p = ImagePlane::new(2, 2, vec![0.0, 255.0, 0.0, 255.0]).unwrap();
        assert_eq!(global_he(&p).data(), &[128.0, 255.0, 128.0, 255.0]);
    }

    #[test]
    fn global_he_constant() {
        let p = ImagePlane::filled(5, 3, 77.0).unwrap();
        let out = global_he(&p);
        assert!(out.data().iter().all(|&v| v == out.data()[0]));
    }

    #[test]
    fn entropy_cases() {
        assert_eq!(histogram_entropy(&ImagePlane::filled(4, 4, 9.0).unwrap()), 0.0);
        let two = ImagePlane::new(2, 1, vec![0.0, 200.0]).unwrap();
        assert!((histogram_entropy(&two) - 1.0).abs() < 1e-12);
        let uniform = ImagePlane::from_fn(16, 16, |x, y| (y * 16 + x) as f64).unwrap();
        assert!((histogram_entropy(&uniform) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_two_bin_hand_value() {
        let eps: f64 = 1.0 / (4.0 * 2.0);
        let norm: f64 = 1.0 + 2.0 * eps;
        let expect = -(0.5 * ((0.75 + eps) / norm).log2() + 0.5 * ((0.25 + eps) / norm).log2());
        let got = cross_entropy(&[2, 2], &[3, 1]).unwrap();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_finite_on_disjoint_support() {
        let v = cross_entropy(&[10, 0, 0], &[0, 0, 10]).unwrap();
        assert!(v.is_finite() && v > 3.0);
    }

    #[test]
    fn cross_entropy_rejects_mismatch() {
        assert!(cross_entropy(&[1, 2], &[1, 2, 3]).is_err());
        assert!(cross_entropy(&[0, 0], &[1, 2]).is_err());
    }

    #[test]
    fn ssim_identity_and_inversion() {
        let a = ramp(32, 24);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        let inv = ImagePlane::new(32, 24, a.data().iter().map(|v| 255.0 - v).collect()).unwrap();
        assert!(ssim(&a, &inv).unwrap() < 1.0 - 1e-3);
    }

    #[test]
    fn ssim_errors() {
        let small = ImagePlane::filled(10, 20, 1.0).unwrap();
        assert!(matches!(ssim(&small, &small), Err(Error::ImageTooSmall { .. })));
        let a = ramp(12, 12);
        let b = ramp(12, 13);
        assert!(matches!(ssim(&a, &b), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn features_of_constant_image() {
        let img = ImageBuffer::new(16, 16, 1, vec![128; 256]).unwrap();
        let f = ceiq_features(&img).unwrap();
        assert_eq!(f.entropy, 0.0);
        assert_eq!(f.entropy_he, 0.0);
        // zero variance: only the luminance term of SSIM survives; HE sends the
        // single level to 255
        let c1 = (SSIM_K1 * SSIM_RANGE).powi(2);
        let expect = (2.0 * 128.0 * 255.0 + c1) / (128.0f64 * 128.0 + 255.0 * 255.0 + c1);
        assert!((f.ssim_he - expect).abs() < 1e-9);

        let white = ImageBuffer::new(16, 16, 1, vec![255; 256]).unwrap();
        assert!((ceiq_features(&white).unwrap().ssim_he - 1.0).abs() < 1e-9);
    }

    #[test]
    fn features_require_window_size() {
        let img = ImageBuffer::new(10, 30, 1, vec![1; 300]).unwrap();
        assert!(matches!(ceiq_features(&img), Err(Error::ImageTooSmall { .. })));
    }

    #[test]
    fn score_is_affine() {
        let f = QualityFeatures::from_array([0.9, 6.5, 7.8, 6.7, 8.1]);
        assert_eq!(ceiq_score(&f, &model(3.5, [0.0; 5])), 3.5);
        assert_eq!(ceiq_score(&f, &model(0.0, [0.0, 1.0, 0.0, 0.0, 0.0])), 6.5);
        let g = QualityFeatures::from_array([0.5, 4.0, 7.0, 5.0, 9.0]);
        let m = model(1.25, [0.3, -0.2, 0.7, 0.1, -0.05]);
        let diff: f64 = [0.3, -0.2, 0.7, 0.1, -0.05]
            .iter()
            .zip(f.to_array().iter().zip(g.to_array()))
            .map(|(w, (a, b))| w * (a - b))
            .sum();
        assert!((ceiq_score(&f, &m) - ceiq_score(&g, &m) - diff).abs() < 1e-12);
    }

    #[test]
    fn model_json_schema() {
        let ok = r#"{"name":"m","provenance":"p","intercept":1.0,
            "weights":{"ssim_he":1,"entropy":0,"entropy_he":0,"cross_entropy":0,"cross_entropy_rev":0}}"#;
        assert!(ScoreModel::from_json(ok).is_ok());
        let missing = r#"{"name":"m","provenance":"p","intercept":1.0,
            "weights":{"ssim_he":1,"entropy":0}}"#;
        assert!(matches!(ScoreModel::from_json(missing), Err(Error::ModelMismatch(_))));
        let extra = r#"{"name":"m","provenance":"p","intercept":1.0,
            "weights":{"ssim_he":1,"entropy":0,"entropy_he":0,"cross_entropy":0,"cross_entropy_rev":0,"sharpness":2}}"#;
        assert!(matches!(ScoreModel::from_json(extra), Err(Error::ModelMismatch(_))));
    }
}
