//! Perona-Malik anisotropic diffusion on a single channel.
//!
//! Explicit 4-neighbour scheme with the exponential edge-stopping function.
//! Borders replicate the edge pixel, so the outward difference there is zero
//! and the update is a pure flux exchange between neighbours: the total
//! intensity is conserved and each output is a convex combination of the
//! pixel and its neighbours whenever `lambda <= 0.25`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::ImagePlane;

/// Largest stable time step for the 4-neighbour explicit scheme.
pub const MAX_LAMBDA: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmdParams {
    pub iterations: usize,
    pub kappa: f64,
    pub lambda: f64,
}

impl Default for PmdParams {
    fn default() -> Self {
        Self {
            iterations: 20,
            kappa: 20.0,
            lambda: 0.25,
        }
    }
}

impl PmdParams {
    pub fn new(iterations: usize, kappa: f64, lambda: f64) -> Result<Self> {
        let params = Self {
            iterations,
            kappa,
            lambda,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "kappa must be positive, got {}",
                self.kappa
            )));
        }
        if !(self.lambda > 0.0 && self.lambda <= MAX_LAMBDA) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be in (0, {MAX_LAMBDA}], got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// Edge-stopping function `exp(-(gradient / kappa)^2)`.
#[inline]
pub fn diffusion_coefficient(gradient: f64, kappa: f64) -> f64 {
    let r = gradient / kappa;
    (-(r * r)).exp()
}

/// One explicit diffusion step. Never updates in place.
pub fn pmd_step(plane: &ImagePlane, params: &PmdParams) -> ImagePlane {
    let (w, h) = (plane.width(), plane.height());
    let src = plane.data();
    let (kappa, lambda) = (params.kappa, params.lambda);
    let mut out = vec![0.0; w * h];

    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let up = if y == 0 { 0 } else { y - 1 };
        let down = if y + 1 == h { y } else { y + 1 };
        for (x, o) in row.iter_mut().enumerate() {
            let left = if x == 0 { 0 } else { x - 1 };
            let right = if x + 1 == w { x } else { x + 1 };
            let c = src[y * w + x];
            let mut flux = 0.0;
            for n in [
                src[up * w + x],
                src[down * w + x],
                src[y * w + right],
                src[y * w + left],
            ] {
                let d = n - c;
                flux += diffusion_coefficient(d, kappa) * d;
            }
            *o = c + lambda * flux;
        }
    });

    ImagePlane::new(w, h, out).expect("dimensions preserved")
}

/// Applies [`pmd_step`] `params.iterations` times.
pub fn pmd_filter(plane: &ImagePlane, params: &PmdParams) -> ImagePlane {
    let mut current = plane.clone();
    for _ in 0..params.iterations {
        current = pmd_step(&current, params);
    }
    current
}
