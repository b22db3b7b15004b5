//! The five parametric stages. Each returns a new image clamped to `[0, 1]`.

use std::f64::consts::{LN_2, PI};

use rayon::prelude::*;

use super::params::{CONTRAST_RANGE, CURVE_RANGE, EXPOSURE_RANGE, SHARPNESS_RANGE};
use super::raster::{Grid, RasterImage};
use crate::error::{Error, Result};

pub const LUMA_WEIGHTS: [f64; 3] = [0.27, 0.67, 0.06];

/// Guard for the contrast ratio at black pixels.
pub const CONTRAST_EPSILON: f64 = 1e-6;

const ROWS_PER_TASK: usize = 32;

#[inline]
pub fn luma(r: f64, g: f64, b: f64) -> f64 {
    LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b
}

pub fn luminance(image: &RasterImage) -> Grid {
    let (r, g, b) = (image.plane(0), image.plane(1), image.plane(2));
    let values = r
        .iter()
        .zip(g)
        .zip(b)
        .map(|((&r, &g), &b)| luma(r, g, b).clamp(0.0, 1.0))
        .collect();
    Grid::new(image.width(), image.height(), values).expect("same dimensions")
}

/// Sobel gradient magnitude of one plane with edge-replicate padding.
///
/// Kernels are the 1/8-scaled horizontal and vertical Sobel filters, applied
/// as cross-correlation.
pub fn sobel_magnitude(plane: &[f64], width: usize, height: usize) -> Vec<f64> {
    let mut out = vec![0.0; width * height];
    out.par_chunks_mut(width)
        .with_min_len(ROWS_PER_TASK)
        .enumerate()
        .for_each(|(y, row_out)| {
            let up = &plane[y.saturating_sub(1) * width..][..width];
            let mid = &plane[y * width..][..width];
            let down = &plane[(y + 1).min(height - 1) * width..][..width];
            for x in 0..width {
                let xl = x.saturating_sub(1);
                let xr = (x + 1).min(width - 1);
                let gx = (up[xr] - up[xl]) + 2.0 * (mid[xr] - mid[xl]) + (down[xr] - down[xl]);
                let gy = (down[xl] + 2.0 * down[x] + down[xr]) - (up[xl] + 2.0 * up[x] + up[xr]);
                row_out[x] = (gx * gx + gy * gy).sqrt() * 0.125;
            }
        });
    out
}

/// `I + p1 * edge(I) * I`, per channel.
pub fn sharpen(image: &RasterImage, p1: f64) -> Result<RasterImage> {
    SHARPNESS_RANGE.check("sharpness", p1)?;
    let (w, h) = image.dims();
    let mut data = Vec::with_capacity(w * h * 3);
    for c in 0..3 {
        let plane = image.plane(c);
        let mut edge = sobel_magnitude(plane, w, h);
        edge.par_iter_mut()
            .with_min_len(ROWS_PER_TASK * w)
            .zip(plane.par_iter())
            .for_each(|(e, &v)| *e = (v + p1 * *e * v).clamp(0.0, 1.0));
        data.extend(edge);
    }
    Ok(RasterImage::from_clamped(w, h, data))
}

/// Multiplies by `2^p2`.
pub fn adjust_exposure(image: &RasterImage, p2: f64) -> Result<RasterImage> {
    EXPOSURE_RANGE.check("exposure", p2)?;
    let gain = (p2 * LN_2).exp();
    Ok(map_values(image, |v| (v * gain).clamp(0.0, 1.0)))
}

/// Blends toward a luminance-driven cosine S-curve: `(1 - p3) I + p3 I''`.
pub fn adjust_contrast(image: &RasterImage, p3: f64) -> Result<RasterImage> {
    CONTRAST_RANGE.check("contrast", p3)?;
    let (w, h) = image.dims();
    let n = w * h;
    let (r, g, b) = (image.plane(0), image.plane(1), image.plane(2));
    let mut data = vec![0.0; n * 3];
    let (out_r, rest) = data.split_at_mut(n);
    let (out_g, out_b) = rest.split_at_mut(n);
    out_r
        .par_chunks_mut(w)
        .with_min_len(ROWS_PER_TASK)
        .zip(out_g.par_chunks_mut(w))
        .zip(out_b.par_chunks_mut(w))
        .enumerate()
        .for_each(|(y, ((or, og), ob))| {
            let off = y * w;
            for x in 0..w {
                let i = off + x;
                let (vr, vg, vb) = (r[i], g[i], b[i]);
                let lum = luma(vr, vg, vb);
                let factor = 0.5 * (1.0 - (PI * lum).cos()) / lum.max(CONTRAST_EPSILON);
                or[x] = ((1.0 - p3) * vr + p3 * (vr * factor)).clamp(0.0, 1.0);
                og[x] = ((1.0 - p3) * vg + p3 * (vg * factor)).clamp(0.0, 1.0);
                ob[x] = ((1.0 - p3) * vb + p3 * (vb * factor)).clamp(0.0, 1.0);
            }
        });
    Ok(RasterImage::from_clamped(w, h, data))
}

/// Which curves a curve stage applies.
#[derive(Debug, Clone, Copy)]
pub enum Curves<'a> {
    /// One curve for all channels (tone adjustment).
    Shared(&'a [f64]),
    /// One curve per channel (colour adjustment).
    PerChannel(&'a [Vec<f64>; 3]),
}

/// Monotone piecewise-linear curve with `L = knots.len()` segments whose
/// slopes are the normalised knot weights.
#[derive(Debug, Clone)]
pub struct PiecewiseCurve {
    segments: f64,
    weights: Vec<f64>,
    // (sum of weights[..k] / total, weights[k] / total) per segment
    pieces: Vec<(f64, f64)>,
}

impl PiecewiseCurve {
    pub fn new(knots: &[f64]) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "curve needs at least 2 knots, got {}",
                knots.len()
            )));
        }
        for (i, &k) in knots.iter().enumerate() {
            CURVE_RANGE.check(format!("curve[{i}]"), k)?;
        }
        let total: f64 = knots.iter().sum();
        let mut acc = 0.0;
        let pieces = knots
            .iter()
            .map(|&k| {
                let piece = (acc / total, k / total);
                acc += k;
                piece
            })
            .collect();
        Ok(PiecewiseCurve {
            segments: knots.len() as f64,
            weights: knots.to_vec(),
            pieces,
        })
    }

    /// `sum_i clip(L x - i, 0, 1) p_i / sum_i p_i`, evaluated in O(1): only
    /// segment `floor(L x)` is partially filled.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let s = self.segments * x.clamp(0.0, 1.0);
        // Truncation equals floor for s >= 0 and avoids a libm call.
        let k = s as usize;
        match self.pieces.get(k) {
            Some(&(base, slope)) => (base + (s - k as f64) * slope).min(1.0),
            None => 1.0,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.weights.iter().all(|&w| w == self.weights[0])
    }
}

pub fn apply_curve(image: &RasterImage, curves: Curves<'_>) -> Result<RasterImage> {
    let built: [PiecewiseCurve; 3] = match curves {
        Curves::Shared(c) => {
            let curve = PiecewiseCurve::new(c)?;
            [curve.clone(), curve.clone(), curve]
        }
        Curves::PerChannel(cs) => [
            PiecewiseCurve::new(&cs[0])?,
            PiecewiseCurve::new(&cs[1])?,
            PiecewiseCurve::new(&cs[2])?,
        ],
    };
    Ok(apply_built_curves(image, &built))
}

pub(crate) fn apply_built_curves(image: &RasterImage, curves: &[PiecewiseCurve; 3]) -> RasterImage {
    let (w, h) = image.dims();
    let n = w * h;
    let mut data = Vec::with_capacity(n * 3);
    for (c, curve) in curves.iter().enumerate() {
        let plane: Vec<f64> = image
            .plane(c)
            .par_iter()
            .with_min_len(ROWS_PER_TASK * w)
            .map(|&v| curve.eval(v))
            .collect();
        data.extend_from_slice(&plane);
    }
    RasterImage::from_clamped(w, h, data)
}

fn map_values(image: &RasterImage, f: impl Fn(f64) -> f64 + Sync) -> RasterImage {
    let (w, h) = image.dims();
    let data: Vec<f64> = image
        .data()
        .par_iter()
        .with_min_len(ROWS_PER_TASK * w)
        .map(|&v| f(v))
        .collect();
    RasterImage::from_clamped(w, h, data)
}
