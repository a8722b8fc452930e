//! Independent reference implementations and seeded fixtures shared by the
//! integration and acceptance tests. Nothing here calls into the library's
//! filter code.

#![allow(dead_code, clippy::needless_range_loop)]

use pap_enhance::ImagePlane;

/// SplitMix64: small, fully specified generator so fixtures never depend on
/// a crate version.
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }

    /// Standard normal via Box-Muller.
    pub fn gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

pub fn noise_plane(w: usize, h: usize, mean: f64, sigma: f64, seed: u64) -> ImagePlane {
    let mut rng = SplitMix64::new(seed);
    let data = (0..w * h).map(|_| mean + sigma * rng.gaussian()).collect();
    ImagePlane::new(w, h, data).unwrap()
}

pub fn uniform_plane(w: usize, h: usize, lo: f64, hi: f64, seed: u64) -> ImagePlane {
    let mut rng = SplitMix64::new(seed);
    let data = (0..w * h).map(|_| lo + (hi - lo) * rng.next_f64()).collect();
    ImagePlane::new(w, h, data).unwrap()
}

pub fn integer_plane(w: usize, h: usize, lo: u64, hi: u64, seed: u64) -> ImagePlane {
    let mut rng = SplitMix64::new(seed);
    let data = (0..w * h).map(|_| (lo + rng.below(hi - lo + 1)) as f64).collect();
    ImagePlane::new(w, h, data).unwrap()
}

/// Low-contrast noisy RGB fixture: smooth blobs in a narrow band plus noise.
pub fn low_contrast_rgb(w: usize, h: usize, seed: u64) -> pap_enhance::ImageBuffer {
    let mut rng = SplitMix64::new(seed);
    let cx = w as f64 * (0.3 + 0.4 * rng.next_f64());
    let cy = h as f64 * (0.3 + 0.4 * rng.next_f64());
    let radius = w.min(h) as f64 * (0.15 + 0.15 * rng.next_f64());
    let base = [100.0 + 20.0 * rng.next_f64(), 105.0 + 20.0 * rng.next_f64(), 110.0 + 20.0 * rng.next_f64()];
    let mut data = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            let blob = 25.0 * (-(d / radius).powi(2)).exp();
            for b in base {
                let v = b + blob + 4.0 * rng.gaussian();
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    pap_enhance::ImageBuffer::new(w, h, 3, data).unwrap()
}

/// Scalar Perona-Malik step written directly from the stencil definition.
pub fn oracle_pmd_step(input: &[Vec<f64>], kappa: f64, lambda: f64) -> Vec<Vec<f64>> {
    let h = input.len();
    let w = input[0].len();
    let mut out = vec![vec![0.0; w]; h];
    for y in 0..h {
        for x in 0..w {
            let center = input[y][x];
            let north = input[y.saturating_sub(1)][x];
            let south = input[(y + 1).min(h - 1)][x];
            let east = input[y][(x + 1).min(w - 1)];
            let west = input[y][x.saturating_sub(1)];
            let mut sum = 0.0;
            for n in [north, south, east, west] {
                let d = n - center;
                let c = (-(d / kappa) * (d / kappa)).exp();
                sum += c * d;
            }
            out[y][x] = center + lambda * sum;
        }
    }
    out
}

pub fn to_rows(p: &ImagePlane) -> Vec<Vec<f64>> {
    p.data().chunks(p.width()).map(|r| r.to_vec()).collect()
}

pub fn sample_std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    (values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Mean SSIM evaluated window by window (no separable filtering).
pub fn oracle_ssim(a: &ImagePlane, b: &ImagePlane) -> f64 {
    let k = 11usize;
    let sigma = 1.5f64;
    let mut weights = vec![vec![0.0; k]; k];
    let mut total = 0.0;
    for (i, row) in weights.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let di = i as f64 - 5.0;
            let dj = j as f64 - 5.0;
            *v = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
            total += *v;
        }
    }
    for row in weights.iter_mut() {
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let (w, h) = (a.width(), a.height());
    let mut acc = 0.0;
    let mut count = 0usize;
    for y0 in 0..=h - k {
        for x0 in 0..=w - k {
            let (mut ma, mut mb) = (0.0, 0.0);
            for i in 0..k {
                for j in 0..k {
                    ma += weights[i][j] * a.get(x0 + j, y0 + i);
                    mb += weights[i][j] * b.get(x0 + j, y0 + i);
                }
            }
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..k {
                for j in 0..k {
                    let da = a.get(x0 + j, y0 + i) - ma;
                    let db = b.get(x0 + j, y0 + i) - mb;
                    va += weights[i][j] * da * da;
                    vb += weights[i][j] * db * db;
                    cov += weights[i][j] * da * db;
                }
            }
            acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    acc / count as f64
}

/// Macro precision/recall/F1 by explicit per-sample tally over expanded labels.
pub fn oracle_macro_metrics(counts: &[Vec<u64>]) -> (f64, f64, f64, f64) {
    let n = counts.len();
    let mut samples = Vec::new();
    for (t, row) in counts.iter().enumerate() {
        for (p, &c) in row.iter().enumerate() {
            for _ in 0..c {
                samples.push((t, p));
            }
        }
    }
    let correct = samples.iter().filter(|(t, p)| t == p).count();
    let accuracy = 100.0 * correct as f64 / samples.len() as f64;
    let (mut ps, mut rs, mut fs) = (0.0, 0.0, 0.0);
    for c in 0..n {
        let tp = samples.iter().filter(|&&(t, p)| t == c && p == c).count() as f64;
        let fp = samples.iter().filter(|&&(t, p)| t != c && p == c).count() as f64;
        let fneg = samples.iter().filter(|&&(t, p)| t == c && p != c).count() as f64;
        let prec = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let rec = if tp + fneg > 0.0 { tp / (tp + fneg) } else { 0.0 };
        let f1 = if prec + rec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 };
        ps += prec;
        rs += rec;
        fs += f1;
    }
    let n = n as f64;
    (accuracy, 100.0 * ps / n, 100.0 * rs / n, 100.0 * fs / n)
}

pub fn fixtures_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}
