//! Separable triangle-filter resampling.
//!
//! Upsampling reduces to bilinear interpolation on pixel centres. When
//! downsampling, the triangle support widens with the scale factor so that
//! every source pixel contributes (antialiased bilinear).

use super::raster::{Grid, MaskLayer, RasterImage};

/// Precomputed taps for one axis.
#[derive(Debug, Clone)]
pub(crate) struct AxisTaps {
    starts: Vec<usize>,
    offsets: Vec<usize>,
    weights: Vec<f64>,
}

impl AxisTaps {
    pub(crate) fn new(src_len: usize, dst_len: usize) -> Self {
        let scale = src_len as f64 / dst_len as f64;
        let support = scale.max(1.0);
        let mut starts = Vec::with_capacity(dst_len);
        let mut offsets = Vec::with_capacity(dst_len + 1);
        let mut weights = Vec::new();
        offsets.push(0);
        for i in 0..dst_len {
            let center = (i as f64 + 0.5) * scale - 0.5;
            let lo = (center - support).floor().max(0.0) as usize;
            let hi = ((center + support).ceil() as usize).min(src_len - 1);
            let first = weights.len();
            let mut total = 0.0;
            let weight = |j: usize| (1.0 - ((j as f64 - center) / support).abs()).max(0.0);
            // Drop zero-weight taps at either end of the window.
            let lo = (lo..=hi).find(|&j| weight(j) > 0.0).unwrap_or(lo);
            let hi = (lo..=hi).rev().find(|&j| weight(j) > 0.0).unwrap_or(lo);
            for j in lo..=hi {
                let w = weight(j);
                weights.push(w);
                total += w;
            }
            if total <= 0.0 {
                // Degenerate tap window; fall back to the nearest source sample.
                weights.truncate(first);
                let j = center.round().clamp(0.0, (src_len - 1) as f64) as usize;
                starts.push(j);
                weights.push(1.0);
            } else {
                for w in &mut weights[first..] {
                    *w /= total;
                }
                starts.push(lo);
            }
            offsets.push(weights.len());
        }
        AxisTaps {
            starts,
            offsets,
            weights,
        }
    }

    #[inline]
    fn apply(&self, i: usize, src: impl Fn(usize) -> f64) -> f64 {
        let start = self.starts[i];
        let ws = &self.weights[self.offsets[i]..self.offsets[i + 1]];
        let mut acc = 0.0;
        for (k, w) in ws.iter().enumerate() {
            acc += w * src(start + k);
        }
        acc
    }
}

/// Two-tap linear interpolation on pixel centres for enlarging one axis;
/// identical to the triangle filter when the scale is at most one.
pub(crate) struct LinearTaps {
    pub(crate) lo: Vec<usize>,
    pub(crate) hi: Vec<usize>,
    pub(crate) frac: Vec<f64>,
}

impl LinearTaps {
    pub(crate) fn new(src_len: usize, dst_len: usize) -> Self {
        let scale = src_len as f64 / dst_len as f64;
        let last = (src_len - 1) as f64;
        let mut taps = LinearTaps {
            lo: Vec::with_capacity(dst_len),
            hi: Vec::with_capacity(dst_len),
            frac: Vec::with_capacity(dst_len),
        };
        for i in 0..dst_len {
            let c = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, last);
            let lo = c.floor();
            taps.lo.push(lo as usize);
            taps.hi.push(((lo + 1.0).min(last)) as usize);
            taps.frac.push(c - lo);
        }
        taps
    }

    /// Appends the interpolated row to `out`.
    pub(crate) fn extend_row(&self, row: &[f64], out: &mut Vec<f64>) {
        out.extend(
            self.lo
                .iter()
                .zip(&self.hi)
                .zip(&self.frac)
                .map(|((&l, &h), &f)| row[l] + f * (row[h] - row[l])),
        );
    }

    #[cfg(test)]
    fn at(&self, i: usize, row: &[f64]) -> f64 {
        let (a, b) = (row[self.lo[i]], row[self.hi[i]]);
        a + self.frac[i] * (b - a)
    }
}

/// Resamples one row-major plane from `sw x sh` to `dw x dh`.
pub fn resample_plane(src: &[f64], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<f64> {
    debug_assert_eq!(src.len(), sw * sh);
    if (sw, sh) == (dw, dh) {
        return src.to_vec();
    }
    if sw <= dw && sh <= dh {
        let xt = LinearTaps::new(sw, dw);
        let yt = LinearTaps::new(sh, dh);
        return enlarge_plane(src, sw, sh, dw, dh, &xt, &yt);
    }
    let xt = AxisTaps::new(sw, dw);
    let yt = AxisTaps::new(sh, dh);
    resample_plane_with(src, sw, sh, dw, dh, &xt, &yt)
}

fn enlarge_plane(
    src: &[f64],
    sw: usize,
    sh: usize,
    dw: usize,
    dh: usize,
    xt: &LinearTaps,
    yt: &LinearTaps,
) -> Vec<f64> {
    let mut wide = Vec::with_capacity(sh * dw);
    for y in 0..sh {
        xt.extend_row(&src[y * sw..(y + 1) * sw], &mut wide);
    }
    let mut dst = Vec::with_capacity(dw * dh);
    for y in 0..dh {
        let (i0, i1, f) = (yt.lo[y], yt.hi[y], yt.frac[y]);
        let r0 = &wide[i0 * dw..(i0 + 1) * dw];
        let r1 = &wide[i1 * dw..(i1 + 1) * dw];
        dst.extend(r0.iter().zip(r1).map(|(a, b)| a + f * (b - a)));
    }
    dst
}

pub(crate) fn resample_plane_with(
    src: &[f64],
    sw: usize,
    sh: usize,
    dw: usize,
    dh: usize,
    xt: &AxisTaps,
    yt: &AxisTaps,
) -> Vec<f64> {
    // Horizontal pass into an sh x dw buffer, then vertical.
    let mut tmp = vec![0.0; sh * dw];
    for y in 0..sh {
        let row = &src[y * sw..(y + 1) * sw];
        let out = &mut tmp[y * dw..(y + 1) * dw];
        for (x, o) in out.iter_mut().enumerate() {
            *o = xt.apply(x, |j| row[j]);
        }
    }
    let mut dst = vec![0.0; dw * dh];
    for y in 0..dh {
        let start = yt.starts[y];
        let ws = &yt.weights[yt.offsets[y]..yt.offsets[y + 1]];
        let out = &mut dst[y * dw..(y + 1) * dw];
        for (k, &w) in ws.iter().enumerate() {
            let row = &tmp[(start + k) * dw..(start + k + 1) * dw];
            for (o, &v) in out.iter_mut().zip(row) {
                *o += w * v;
            }
        }
    }
    dst
}

pub fn resize_grid(grid: &Grid, width: usize, height: usize) -> Grid {
    let values = resample_plane(grid.values(), grid.width(), grid.height(), width, height);
    Grid::new(width, height, values).expect("resampled grid has matching length")
}

/// Resizes every channel; results are clamped to `[0, 1]` to absorb rounding.
pub fn resize_image(image: &RasterImage, width: usize, height: usize) -> RasterImage {
    if image.dims() == (width, height) {
        return image.clone();
    }
    let (sw, sh) = image.dims();
    let mut data = Vec::with_capacity(width * height * 3);
    for c in 0..3 {
        let plane = resample_plane(image.plane(c), sw, sh, width, height);
        data.extend(plane.into_iter().map(|v| v.clamp(0.0, 1.0)));
    }
    RasterImage::from_clamped(width, height, data)
}

/// Bilinear (antialiased when shrinking) mask resize; soft weights are kept.
pub fn resize_mask(mask: &MaskLayer, width: usize, height: usize) -> MaskLayer {
    if mask.dims() == (width, height) {
        return mask.clone();
    }
    let values = resample_plane(mask.weights(), mask.width(), mask.height(), width, height)
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect();
    MaskLayer::new(width, height, values).expect("resampled mask stays in range")
}

/// Dimensions for scaling `(w, h)` so the longer side equals `max_dim`.
pub fn fit_within(width: usize, height: usize, max_dim: usize) -> (usize, usize) {
    let longest = width.max(height);
    if longest == max_dim {
        return (width, height);
    }
    let scale = max_dim as f64 / longest as f64;
    let w = ((width as f64 * scale).round() as usize).max(1);
    let h = ((height as f64 * scale).round() as usize).max(1);
    (w, h)
}

/// Like [`fit_within`] but never enlarges.
pub fn shrink_to_fit(width: usize, height: usize, max_dim: usize) -> (usize, usize) {
    if width.max(height) <= max_dim {
        (width, height)
    } else {
        fit_within(width, height, max_dim)
    }
}
