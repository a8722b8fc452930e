//! Contrast-limited adaptive histogram equalization on a single channel.
//!
//! The plane is cut into a `grid_cols x grid_rows` grid of tiles. Each tile's
//! 256-bin histogram is clipped at a ceiling, the clipped mass is spread back
//! over all bins, and the result is turned into an equalization table. Output
//! pixels blend the tables of the four nearest tile centres bilinearly.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{quantize_u8, ImagePlane};

/// Number of grey levels in every histogram and table.
pub const BINS: usize = 256;

pub type Histogram = [u64; BINS];

/// How the per-tile clip ceiling is derived.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum CeilingRule {
    /// `clip_limit` times the mean bin height of the tile.
    #[default]
    MeanMultiplier,
    /// Region-size formula with a clip factor in `[0, 100]` and a maximum slope.
    Slope { alpha: f64, s_max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaheParams {
    pub clip_limit: f64,
    pub grid_cols: usize,
    pub grid_rows: usize,
    pub ceiling: CeilingRule,
}

impl Default for ClaheParams {
    fn default() -> Self {
        Self {
            clip_limit: 2.0,
            grid_cols: 8,
            grid_rows: 8,
            ceiling: CeilingRule::MeanMultiplier,
        }
    }
}

impl ClaheParams {
    pub fn new(clip_limit: f64, grid_cols: usize, grid_rows: usize) -> Result<Self> {
        let params = Self {
            clip_limit,
            grid_cols,
            grid_rows,
            ceiling: CeilingRule::MeanMultiplier,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clip_limit >= 1.0 && self.clip_limit.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "clip limit must be at least 1.0, got {}",
                self.clip_limit
            )));
        }
        if self.grid_cols == 0 || self.grid_rows == 0 {
            return Err(Error::InvalidParameter(format!(
                "grid must be at least 1x1, got {}x{}",
                self.grid_cols, self.grid_rows
            )));
        }
        if let CeilingRule::Slope { alpha, s_max } = self.ceiling {
            if !(0.0..=100.0).contains(&alpha) || s_max.is_nan() || s_max < 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "slope ceiling needs 0 <= alpha <= 100 and s_max >= 1, got alpha={alpha}, s_max={s_max}"
                )));
            }
        }
        Ok(())
    }

    /// Ceiling for a tile holding `tile_pixels` pixels.
    pub fn ceiling_for(&self, tile_pixels: usize) -> f64 {
        match self.ceiling {
            CeilingRule::MeanMultiplier => clip_ceiling(tile_pixels, self),
            // region pixels over grey levels, i.e. the mean bin height
            CeilingRule::Slope { alpha, s_max } => {
                clip_ceiling_slope(tile_pixels as f64, BINS as f64, alpha, s_max).max(1.0)
            }
        }
    }
}

/// Monotone 256-entry equalization table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EqLut {
    table: [u8; BINS],
}

impl EqLut {
    pub fn table(&self) -> &[u8; BINS] {
        &self.table
    }

    #[inline]
    pub fn map(&self, level: u8) -> u8 {
        self.table[level as usize]
    }

    pub fn is_monotone(&self) -> bool {
        self.table.windows(2).all(|w| w[0] <= w[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Region {
    pub fn area(&self) -> usize {
        self.width * self.height
    }
}

/// Counts quantized levels inside `region`.
pub fn tile_histogram(plane: &ImagePlane, region: Region) -> Result<Histogram> {
    if region.width == 0
        || region.height == 0
        || region.x + region.width > plane.width()
        || region.y + region.height > plane.height()
    {
        return Err(Error::RegionOutOfBounds {
            x: region.x,
            y: region.y,
            width: region.width,
            height: region.height,
            plane_width: plane.width(),
            plane_height: plane.height(),
        });
    }
    let mut hist = [0u64; BINS];
    let w = plane.width();
    let data = plane.data();
    for y in region.y..region.y + region.height {
        for &v in &data[y * w + region.x..y * w + region.x + region.width] {
            hist[quantize_u8(v) as usize] += 1;
        }
    }
    Ok(hist)
}

/// Clips every bin at `floor(beta)` and returns the excess: first an equal
/// share to every bin, then the integer remainder one count per bin from bin 0.
/// The total count is preserved exactly.
pub fn clip_and_redistribute<const B: usize>(hist: &[u64; B], beta: f64) -> [u64; B] {
    let limit = beta.max(1.0).floor() as u64;
    let mut out = *hist;
    let mut excess = 0u64;
    for bin in out.iter_mut() {
        if *bin > limit {
            excess += *bin - limit;
            *bin = limit;
        }
    }
    if excess == 0 {
        return out;
    }
    let share = excess / B as u64;
    let remainder = (excess % B as u64) as usize;
    for (i, bin) in out.iter_mut().enumerate() {
        *bin += share + u64::from(i < remainder);
    }
    out
}

/// Default ceiling: `clip_limit * tile_pixels / 256`, never below 1.
pub fn clip_ceiling(tile_pixels: usize, params: &ClaheParams) -> f64 {
    (params.clip_limit * tile_pixels as f64 / BINS as f64).max(1.0)
}

/// `beta = (m / n) * (1 + alpha / 100 * (s_max - 1))`, evaluated literally.
///
/// With `m` as grey levels and `n` as pixels this is the reciprocal of a bin
/// height; [`ClaheParams::ceiling_for`] passes the region size as `m` and the
/// number of levels as `n` so the result is in counts.
pub fn clip_ceiling_slope(m: f64, n: f64, alpha: f64, s_max: f64) -> f64 {
    (m / n) * (1.0 + alpha / 100.0 * (s_max - 1.0))
}

/// Equalization table `round(cdf[i] * 255 / total)`.
pub fn he_lut(hist: &Histogram, total: u64) -> EqLut {
    let total = total.max(1) as f64;
    let mut table = [0u8; BINS];
    let mut cdf = 0u64;
    for (entry, &count) in table.iter_mut().zip(hist) {
        cdf += count;
        *entry = quantize_u8(cdf as f64 * 255.0 / total);
    }
    EqLut { table }
}

/// Tile layout along one axis: start offsets and sizes, remainder to the last tile.
fn tile_spans(len: usize, count: usize) -> Vec<(usize, usize)> {
    let base = len / count;
    (0..count)
        .map(|i| {
            let size = if i + 1 == count { base + len % count } else { base };
            (i * base, size)
        })
        .collect()
}

/// For each coordinate along an axis: lower tile index, upper tile index and
/// the weight of the upper one, clamped outside the outermost centres.
fn axis_weights(len: usize, spans: &[(usize, usize)]) -> Vec<(usize, usize, f64)> {
    let centres: Vec<f64> = spans
        .iter()
        .map(|&(start, size)| start as f64 + (size as f64 - 1.0) / 2.0)
        .collect();
    let last = centres.len() - 1;
    (0..len)
        .map(|p| {
            let p = p as f64;
            if p <= centres[0] {
                (0, 0, 0.0)
            } else if p >= centres[last] {
                (last, last, 0.0)
            } else {
                let i = centres.partition_point(|&c| c <= p) - 1;
                let t = (p - centres[i]) / (centres[i + 1] - centres[i]);
                (i, i + 1, t)
            }
        })
        .collect()
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

pub fn clahe_apply(plane: &ImagePlane, params: &ClaheParams) -> Result<ImagePlane> {
    params.validate()?;
    let (w, h) = (plane.width(), plane.height());
    if w / params.grid_cols < 2 || h / params.grid_rows < 2 {
        return Err(Error::GridTooFine {
            cols: params.grid_cols,
            rows: params.grid_rows,
            width: w,
            height: h,
        });
    }

    let levels: Vec<u8> = plane.data().iter().map(|&v| quantize_u8(v)).collect();
    let cols = tile_spans(w, params.grid_cols);
    let rows = tile_spans(h, params.grid_rows);

    let luts: Vec<EqLut> = rows
        .iter()
        .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&((y0, th), (x0, tw))| {
            let mut hist = [0u64; BINS];
            for y in y0..y0 + th {
                for &v in &levels[y * w + x0..y * w + x0 + tw] {
                    hist[v as usize] += 1;
                }
            }
            let area = tw * th;
            let clipped = clip_and_redistribute(&hist, params.ceiling_for(area));
            he_lut(&clipped, area as u64)
        })
        .collect();

    let xw = axis_weights(w, &cols);
    let yw = axis_weights(h, &rows);
    let ncols = cols.len();
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let (r0, r1, ty) = yw[y];
        for (x, o) in row.iter_mut().enumerate() {
            let (c0, c1, tx) = xw[x];
            let v = levels[y * w + x];
            let at = |r: usize, c: usize| luts[r * ncols + c].map(v) as f64;
            let top = lerp(at(r0, c0), at(r0, c1), tx);
            let bottom = lerp(at(r1, c0), at(r1, c1), tx);
            *o = lerp(top, bottom, ty);
        }
    });

    ImagePlane::new(w, h, out)
}
