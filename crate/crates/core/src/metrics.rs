//! Evaluation scores for an edit: how much attention moved into the mask,
//! how mask-like the resulting saliency map is, and how far pixels moved.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::imaging::{Grid, MaskLayer, RasterImage};
use crate::saliency::{mean_mask_saliency, SaliencyMap, SaliencySource};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaliencyIncrease {
    pub absolute: f64,
    /// `None` when the initial in-mask mean is zero.
    pub relative: Option<f64>,
}

/// Change of mean in-mask saliency from `before` to `after`.
pub fn saliency_increase(
    before: &SaliencyMap,
    after: &SaliencyMap,
    mask: &MaskLayer,
) -> Result<SaliencyIncrease> {
    if before.dims() != after.dims() {
        return Err(Error::Shape {
            expected: before.dims(),
            found: after.dims(),
        });
    }
    let initial = mean_mask_saliency(before, mask)?;
    let fin = mean_mask_saliency(after, mask)?;
    let absolute = fin - initial;
    let relative = (initial > 0.0).then(|| absolute / initial);
    Ok(SaliencyIncrease { absolute, relative })
}

fn binary_mask_at(mask: &MaskLayer, dims: (usize, usize)) -> Vec<f64> {
    mask.resample_nearest(dims.0, dims.1)
        .binarized()
        .weights()
        .to_vec()
}

/// Pearson correlation between map values and the binarized mask.
pub fn pearson_cc(map: &Grid, mask: &MaskLayer) -> Result<f64> {
    let m = binary_mask_at(mask, map.dims());
    let s = map.values();
    let n = s.len() as f64;
    let ms = s.iter().sum::<f64>() / n;
    let mm = m.iter().sum::<f64>() / n;
    let (mut cov, mut vs, mut vm) = (0.0, 0.0, 0.0);
    for (a, b) in s.iter().zip(&m) {
        let (da, db) = (a - ms, b - mm);
        cov += da * db;
        vs += da * da;
        vm += db * db;
    }
    if vs <= 0.0 {
        return Err(Error::DegenerateInput("saliency map has zero variance"));
    }
    if vm <= 0.0 {
        return Err(Error::DegenerateInput("mask has zero variance"));
    }
    Ok((cov / (vs.sqrt() * vm.sqrt())).clamp(-1.0, 1.0))
}

pub const WFB_BETA2: f64 = 1.0;
pub const WFB_SIGMA2: f64 = 5.0;
const WFB_KERNEL_SIZE: usize = 7;

/// Weighted F-measure of a foreground map against the binarized mask.
///
/// The map is min-max normalised to `[0, 1]` (a flat map becomes all zeros).
/// Errors `|map - mask|` are spread by a 7x7 Gaussian (variance `WFB_SIGMA2`,
/// zero padding) in which each background pixel borrows the error of its
/// nearest foreground pixel; foreground errors keep the smaller of the raw
/// and spread value. Background errors grow with distance from the mask as
/// `2 - exp(ln(0.5) / 5 * d)`.
pub fn weighted_fbeta(map: &Grid, mask: &MaskLayer) -> Result<f64> {
    let (w, h) = map.dims();
    let gt = binary_mask_at(mask, (w, h));
    let is_fg: Vec<bool> = gt.iter().map(|&v| v > 0.5).collect();
    if !is_fg.iter().any(|&f| f) {
        return Err(Error::EmptyMask);
    }
    let fg_map = min_max(map.values());

    let err: Vec<f64> = fg_map.iter().zip(&gt).map(|(s, g)| (s - g).abs()).collect();
    let (dist, nearest) = distance_transform(&is_fg, w, h);

    let mut borrowed = err.clone();
    for i in 0..w * h {
        if !is_fg[i] {
            borrowed[i] = err[nearest[i]];
        }
    }
    let spread = correlate_zero_pad(&borrowed, w, h, &gaussian_kernel());

    let alpha = 0.5_f64.ln() / 5.0;
    let mut weighted = vec![0.0; w * h];
    for i in 0..w * h {
        weighted[i] = if is_fg[i] {
            err[i].min(spread[i])
        } else {
            err[i] * (2.0 - (alpha * dist[i]).exp())
        };
    }

    let fg_count = is_fg.iter().filter(|&&f| f).count() as f64;
    let fg_err: f64 = (0..w * h).filter(|&i| is_fg[i]).map(|i| weighted[i]).sum();
    let bg_err: f64 = (0..w * h).filter(|&i| !is_fg[i]).map(|i| weighted[i]).sum();
    let eps = f64::EPSILON;
    let tp = fg_count - fg_err;
    let recall = 1.0 - fg_err / fg_count;
    let precision = tp / (eps + tp + bg_err);
    let q = (1.0 + WFB_BETA2) * recall * precision / (eps + recall + WFB_BETA2 * precision);
    Ok(q.clamp(0.0, 1.0))
}

fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        values.iter().map(|v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; values.len()]
    }
}

fn gaussian_kernel() -> Vec<f64> {
    let r = (WFB_KERNEL_SIZE / 2) as isize;
    let mut k = Vec::with_capacity(WFB_KERNEL_SIZE * WFB_KERNEL_SIZE);
    for dy in -r..=r {
        for dx in -r..=r {
            k.push((-((dx * dx + dy * dy) as f64) / (2.0 * WFB_SIGMA2)).exp());
        }
    }
    let sum: f64 = k.iter().sum();
    k.iter().map(|v| v / sum).collect()
}

fn correlate_zero_pad(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (WFB_KERNEL_SIZE / 2) as isize;
    let mut out = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for ky in -r..=r {
                let sy = y + ky;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for kx in -r..=r {
                    let sx = x + kx;
                    if sx < 0 || sx >= w as isize {
                        continue;
                    }
                    let kw = kernel[((ky + r) as usize) * WFB_KERNEL_SIZE + (kx + r) as usize];
                    acc += kw * src[sy as usize * w + sx as usize];
                }
            }
            out[y as usize * w + x as usize] = acc;
        }
    }
    out
}

/// Exact Euclidean distance to the nearest `true` pixel, with that pixel's
/// index (separable lower-envelope transform).
fn distance_transform(features: &[bool], w: usize, h: usize) -> (Vec<f64>, Vec<usize>) {
    const INF: f64 = 1e20;
    // Column pass: squared vertical distance and row of the nearest feature.
    let mut col_d2 = vec![INF; w * h];
    let mut col_row = vec![usize::MAX; w * h];
    for x in 0..w {
        let mut last: Option<usize> = None;
        for y in 0..h {
            if features[y * w + x] {
                last = Some(y);
            }
            if let Some(ly) = last {
                let d = (y - ly) as f64;
                col_d2[y * w + x] = d * d;
                col_row[y * w + x] = ly;
            }
        }
        let mut next: Option<usize> = None;
        for y in (0..h).rev() {
            if features[y * w + x] {
                next = Some(y);
            }
            if let Some(ny) = next {
                let d = (ny - y) as f64;
                if d * d < col_d2[y * w + x] {
                    col_d2[y * w + x] = d * d;
                    col_row[y * w + x] = ny;
                }
            }
        }
    }

    let mut dist = vec![0.0; w * h];
    let mut nearest = vec![0; w * h];
    let mut v = vec![0usize; w];
    let mut z = vec![0.0f64; w + 1];
    for y in 0..h {
        let f = |q: usize| col_d2[y * w + q];
        // Lower envelope of parabolas (q - p)^2 + f(p) over finite f only.
        let mut k: isize = -1;
        for q in 0..w {
            if f(q) >= INF {
                continue;
            }
            loop {
                if k < 0 {
                    k = 0;
                    v[0] = q;
                    z[0] = f64::NEG_INFINITY;
                    z[1] = f64::INFINITY;
                    break;
                }
                let p = v[k as usize];
                let s = ((f(q) + (q * q) as f64) - (f(p) + (p * p) as f64))
                    / (2.0 * q as f64 - 2.0 * p as f64);
                if s <= z[k as usize] {
                    k -= 1;
                    continue;
                }
                k += 1;
                v[k as usize] = q;
                z[k as usize] = s;
                z[k as usize + 1] = f64::INFINITY;
                break;
            }
        }
        if k < 0 {
            continue;
        }
        let mut j = 0usize;
        for q in 0..w {
            while z[j + 1] < q as f64 {
                j += 1;
            }
            let p = v[j];
            let dq = q as f64 - p as f64;
            let d2 = dq * dq + f(p);
            dist[y * w + q] = d2.sqrt();
            nearest[y * w + q] = col_row[y * w + p] * w + p;
        }
    }
    (dist, nearest)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FidelitySplits {
    pub full: f64,
    pub bg: f64,
    pub fg: f64,
}

/// Mean absolute per-pixel difference over the whole image, the background
/// (`m < 0.5`) and the foreground (`m >= 0.5`). An empty region scores 0.
pub fn fidelity_splits(
    original: &RasterImage,
    edited: &RasterImage,
    mask: &MaskLayer,
) -> Result<FidelitySplits> {
    if original.dims() != edited.dims() {
        return Err(Error::Shape {
            expected: original.dims(),
            found: edited.dims(),
        });
    }
    if original.dims() != mask.dims() {
        return Err(Error::Shape {
            expected: original.dims(),
            found: mask.dims(),
        });
    }
    let n = original.pixel_count();
    let (mut fg_sum, mut bg_sum, mut fg_n) = (0.0, 0.0, 0usize);
    for i in 0..n {
        let mut d = 0.0;
        for c in 0..3 {
            d += (original.plane(c)[i] - edited.plane(c)[i]).abs();
        }
        d /= 3.0;
        if mask.is_foreground(i) {
            fg_sum += d;
            fg_n += 1;
        } else {
            bg_sum += d;
        }
    }
    let bg_n = n - fg_n;
    let avg = |s: f64, k: usize| if k == 0 { 0.0 } else { s / k as f64 };
    Ok(FidelitySplits {
        full: (fg_sum + bg_sum) / n as f64,
        bg: avg(bg_sum, bg_n),
        fg: avg(fg_sum, fg_n),
    })
}

/// All scores for one (original, edited, mask) triple, unscaled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub saliency_increase_abs: f64,
    pub saliency_increase_rel: Option<f64>,
    /// `None` when the edited saliency map is flat.
    pub cc: Option<f64>,
    pub wfb: f64,
    pub fidelity_full: f64,
    pub fidelity_bg: f64,
    pub fidelity_fg: f64,
}

impl MetricsReport {
    pub const FIELDS: [&'static str; 7] = [
        "saliency_increase_abs",
        "saliency_increase_rel",
        "cc",
        "wfb",
        "fidelity_full",
        "fidelity_bg",
        "fidelity_fg",
    ];

    /// Field values in [`Self::FIELDS`] order, multiplied by 100.
    pub fn scaled_values(&self) -> [Option<f64>; 7] {
        let s = |v: f64| Some(v * 100.0);
        [
            s(self.saliency_increase_abs),
            self.saliency_increase_rel.map(|v| v * 100.0),
            self.cc.map(|v| v * 100.0),
            s(self.wfb),
            s(self.fidelity_full),
            s(self.fidelity_bg),
            s(self.fidelity_fg),
        ]
    }
}

/// Scores an edit using `source` for both saliency maps.
pub fn evaluate(
    original: &RasterImage,
    edited: &RasterImage,
    mask: &MaskLayer,
    source: &dyn SaliencySource,
) -> Result<MetricsReport> {
    let fidelity = fidelity_splits(original, edited, mask)?;
    let before = source.saliency(original)?;
    let after = source.saliency(edited)?;
    let increase = saliency_increase(&before, &after, mask)?;
    let cc = match pearson_cc(&after, mask) {
        Ok(v) => Some(v),
        Err(Error::DegenerateInput(_)) => None,
        Err(e) => return Err(e),
    };
    let wfb = weighted_fbeta(&after, mask)?;
    Ok(MetricsReport {
        saliency_increase_abs: increase.absolute,
        saliency_increase_rel: increase.relative,
        cc,
        wfb,
        fidelity_full: fidelity.full,
        fidelity_bg: fidelity.bg,
        fidelity_fg: fidelity.fg,
    })
}
