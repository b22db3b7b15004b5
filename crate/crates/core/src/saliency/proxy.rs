//! Built-in centre-surround saliency model.
//!
//! Three opponent channels (luminance, red-green, blue-yellow) are each
//! decomposed into a Gaussian pyramid. Centre levels `c` are compared with
//! surround levels `c + delta` after both are bilinearly upsampled to the
//! working resolution, and the absolute differences are summed.

use serde::{Deserialize, Serialize};

use super::map::{normalize_softmax, SaliencyMap, SaliencySource};
use crate::error::{Error, Result};
use crate::imaging::resample::{fit_within, resize_image, LinearTaps};
use crate::imaging::{luma, Grid, RasterImage};

pub const MIN_INPUT_SIDE: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxySaliencyConfig {
    /// Longest side of the map, in pixels.
    pub working_dim: usize,
    pub center_levels: Vec<usize>,
    pub surround_deltas: Vec<usize>,
    /// Luminance, red-green and blue-yellow weights.
    pub channel_weights: [f64; 3],
    pub temperature: f64,
}

impl Default for ProxySaliencyConfig {
    fn default() -> Self {
        ProxySaliencyConfig {
            working_dim: 256,
            center_levels: vec![1, 2],
            surround_deltas: vec![2, 3],
            channel_weights: [1.0, 1.0, 1.0],
            temperature: 1.0,
        }
    }
}

impl ProxySaliencyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.working_dim < MIN_INPUT_SIDE {
            return Err(Error::InvalidConfig(format!(
                "working dimension must be at least {MIN_INPUT_SIDE}, got {}",
                self.working_dim
            )));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.center_levels.is_empty() || self.surround_deltas.is_empty() {
            return Err(Error::InvalidConfig(
                "need at least one centre level and one surround delta".into(),
            ));
        }
        if self.center_levels.contains(&0) || self.surround_deltas.contains(&0) {
            return Err(Error::InvalidConfig(
                "centre levels and surround deltas must be positive".into(),
            ));
        }
        Ok(())
    }

    fn deepest_level(&self) -> usize {
        self.center_levels.iter().max().copied().unwrap_or(0)
            + self.surround_deltas.iter().max().copied().unwrap_or(0)
    }
}

/// Centre-surround map before normalisation, at working resolution.
pub fn proxy_raw_map(image: &RasterImage, config: &ProxySaliencyConfig) -> Result<Grid> {
    config.validate()?;
    let (iw, ih) = image.dims();
    if iw.max(ih) < MIN_INPUT_SIDE {
        return Err(Error::InputTooSmall {
            max_side: iw.max(ih),
            min: MIN_INPUT_SIDE,
        });
    }
    let (w, h) = fit_within(iw, ih, config.working_dim);
    let resized = resize_image(image, w, h);
    let n = w * h;
    let (r, g, b) = (resized.plane(0), resized.plane(1), resized.plane(2));

    let mut channels: Vec<(f64, Vec<f64>)> = Vec::with_capacity(3);
    let [wl, wrg, wby] = config.channel_weights;
    if wl != 0.0 {
        channels.push((wl, (0..n).map(|i| luma(r[i], g[i], b[i])).collect()));
    }
    if wrg != 0.0 {
        channels.push((wrg, (0..n).map(|i| r[i] - g[i]).collect()));
    }
    if wby != 0.0 {
        channels.push((wby, (0..n).map(|i| b[i] - 0.5 * (r[i] + g[i])).collect()));
    }

    let depth = config.deepest_level();
    let mut needed: Vec<usize> = Vec::new();
    for &c in &config.center_levels {
        needed.push(c);
        for &d in &config.surround_deltas {
            needed.push(c + d);
        }
    }
    needed.sort_unstable();
    needed.dedup();

    let sizes = pyramid_sizes(w, h, depth);
    let taps: Vec<Option<(LinearTaps, LinearTaps)>> = (0..=depth)
        .map(|lvl| {
            needed.contains(&lvl).then(|| {
                let (lw, lh) = sizes[lvl];
                (LinearTaps::new(lw, w), LinearTaps::new(lh, h))
            })
        })
        .collect();

    let mut raw = vec![0.0; n];
    let mut rows: Vec<Vec<f64>> = vec![Vec::new(); depth + 1];
    for (weight, plane) in channels {
        let pyramid = gaussian_pyramid(plane, w, h, depth);
        // Horizontal interpolation of every needed level to full width.
        let wide: Vec<Option<Vec<f64>>> = (0..=depth)
            .map(|lvl| {
                taps[lvl].as_ref().map(|(xt, _)| {
                    let (lw, lh) = sizes[lvl];
                    let src = &pyramid[lvl];
                    let mut out = Vec::with_capacity(lh * w);
                    for y in 0..lh {
                        xt.extend_row(&src[y * lw..(y + 1) * lw], &mut out);
                    }
                    out
                })
            })
            .collect();
        for y in 0..h {
            // Vertical interpolation one output row at a time.
            for lvl in 0..=depth {
                let (Some((_, yt)), Some(src)) = (taps[lvl].as_ref(), wide[lvl].as_ref()) else {
                    continue;
                };
                let (i0, i1, f) = (yt.lo[y], yt.hi[y], yt.frac[y]);
                let r0 = &src[i0 * w..(i0 + 1) * w];
                let r1 = &src[i1 * w..(i1 + 1) * w];
                let row = &mut rows[lvl];
                row.clear();
                row.extend(r0.iter().zip(r1).map(|(a, b)| a + f * (b - a)));
            }
            let out = &mut raw[y * w..(y + 1) * w];
            for &c in &config.center_levels {
                for &d in &config.surround_deltas {
                    let (center, surround) = (&rows[c], &rows[c + d]);
                    for ((acc, &cv), &sv) in out.iter_mut().zip(center).zip(surround) {
                        *acc += weight * (cv - sv).abs();
                    }
                }
            }
        }
    }
    Grid::new(w, h, raw)
}

pub fn compute_proxy_saliency(
    image: &RasterImage,
    config: &ProxySaliencyConfig,
) -> Result<SaliencyMap> {
    let raw = proxy_raw_map(image, config)?;
    normalize_softmax(&raw, config.temperature)
}

/// The built-in model as a [`SaliencySource`].
#[derive(Debug, Clone, Default)]
pub struct ProxySaliency {
    pub config: ProxySaliencyConfig,
}

impl ProxySaliency {
    pub fn new(config: ProxySaliencyConfig) -> Result<Self> {
        config.validate()?;
        Ok(ProxySaliency { config })
    }
}

impl SaliencySource for ProxySaliency {
    fn saliency(&self, image: &RasterImage) -> Result<SaliencyMap> {
        compute_proxy_saliency(image, &self.config)
    }
}

fn pyramid_sizes(w: usize, h: usize, depth: usize) -> Vec<(usize, usize)> {
    let mut sizes = vec![(w, h)];
    for _ in 0..depth {
        let (pw, ph) = *sizes.last().expect("non-empty");
        sizes.push(((pw + 1) / 2, (ph + 1) / 2));
    }
    sizes
}

const BINOMIAL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// Levels `0..=depth`; each level is the previous one blurred with a 5-tap
/// binomial kernel (edge replicate) and decimated by two.
fn gaussian_pyramid(base: Vec<f64>, w: usize, h: usize, depth: usize) -> Vec<Vec<f64>> {
    let mut levels = Vec::with_capacity(depth + 1);
    levels.push(base);
    let (mut cw, mut ch) = (w, h);
    for _ in 0..depth {
        let src = levels.last().expect("non-empty");
        let (nw, nh) = ((cw + 1) / 2, (ch + 1) / 2);
        // Horizontal blur evaluated only at even columns.
        let mut tmp = vec![0.0; nw * ch];
        for y in 0..ch {
            let row = &src[y * cw..(y + 1) * cw];
            let out = &mut tmp[y * nw..(y + 1) * nw];
            for (xo, o) in out.iter_mut().enumerate() {
                let x = 2 * xo;
                *o = if x >= 2 && x + 2 < cw {
                    let t = &row[x - 2..x + 3];
                    BINOMIAL[0] * t[0]
                        + BINOMIAL[1] * t[1]
                        + BINOMIAL[2] * t[2]
                        + BINOMIAL[3] * t[3]
                        + BINOMIAL[4] * t[4]
                } else {
                    let mut acc = 0.0;
                    for (k, wk) in BINOMIAL.iter().enumerate() {
                        let xi = (x as isize + k as isize - 2).clamp(0, cw as isize - 1) as usize;
                        acc += wk * row[xi];
                    }
                    acc
                };
            }
        }
        let mut next = vec![0.0; nw * nh];
        for yo in 0..nh {
            let y = (2 * yo) as isize;
            let out = &mut next[yo * nw..(yo + 1) * nw];
            for (k, wk) in BINOMIAL.iter().enumerate() {
                let yi = (y + k as isize - 2).clamp(0, ch as isize - 1) as usize;
                let row = &tmp[yi * nw..(yi + 1) * nw];
                for (o, &v) in out.iter_mut().zip(row) {
                    *o += wk * v;
                }
            }
        }
        levels.push(next);
        cw = nw;
        ch = nh;
    }
    levels
}
