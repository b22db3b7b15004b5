use std::ops::Deref;

use crate::error::{Error, Result};
use crate::imaging::{Grid, MaskLayer, RasterImage};

/// Raw maps whose standard deviation falls below this are treated as flat.
/// Resampling a constant plane leaves rounding noise around 1e-17 that would
/// otherwise be amplified to unit variance by the z-score.
pub const RAW_STD_FLOOR: f64 = 1e-12;

/// A nonnegative attention distribution summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    grid: Grid,
}

impl SaliencyMap {
    pub const SUM_TOLERANCE: f64 = 1e-6;

    /// Wraps a grid that already is a distribution.
    pub fn new(grid: Grid) -> Result<Self> {
        if grid.values().iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFinite(
                "saliency values must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = grid.values().iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidBuffer(format!(
                "saliency map must sum to 1, sums to {sum}"
            )));
        }
        Ok(SaliencyMap { grid })
    }

    /// Rescales a nonnegative map with positive mass to sum to one.
    pub fn from_unnormalized(grid: Grid) -> Result<Self> {
        let sum: f64 = grid.values().iter().sum();
        if !(sum.is_finite() && sum > 0.0) || grid.values().iter().any(|v| *v < 0.0) {
            return Err(Error::DegenerateInput(
                "map must be nonnegative with positive mass",
            ));
        }
        let (w, h) = grid.dims();
        let values = grid.into_values().into_iter().map(|v| v / sum).collect();
        Ok(SaliencyMap {
            grid: Grid::new(w, h, values)?,
        })
    }

    pub fn uniform(width: usize, height: usize) -> Result<Self> {
        let n = (width * height) as f64;
        Ok(SaliencyMap {
            grid: Grid::filled(width, height, 1.0 / n)?,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn into_grid(self) -> Grid {
        self.grid
    }
}

impl Deref for SaliencyMap {
    type Target = Grid;

    fn deref(&self) -> &Grid {
        &self.grid
    }
}

/// Anything that predicts a saliency map for an image.
pub trait SaliencySource: Send + Sync {
    fn saliency(&self, image: &RasterImage) -> Result<SaliencyMap>;
}

impl<T: SaliencySource + ?Sized> SaliencySource for &T {
    fn saliency(&self, image: &RasterImage) -> Result<SaliencyMap> {
        (**self).saliency(image)
    }
}

impl<T: SaliencySource + ?Sized> SaliencySource for Box<T> {
    fn saliency(&self, image: &RasterImage) -> Result<SaliencyMap> {
        (**self).saliency(image)
    }
}

impl<T: SaliencySource + ?Sized> SaliencySource for std::sync::Arc<T> {
    fn saliency(&self, image: &RasterImage) -> Result<SaliencyMap> {
        (**self).saliency(image)
    }
}

/// Z-scores `raw`, then applies a softmax at temperature `temperature`.
pub fn normalize_softmax(raw: &Grid, temperature: f64) -> Result<SaliencyMap> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "softmax temperature must be positive, got {temperature}"
        )));
    }
    let values = raw.values();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("raw saliency map".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    let logits: Vec<f64> = if std > RAW_STD_FLOOR {
        values
            .iter()
            .map(|v| (v - mean) / std / temperature)
            .collect()
    } else {
        vec![0.0; values.len()]
    };
    let probs = softmax(&logits);
    Ok(SaliencyMap {
        grid: Grid::new(raw.width(), raw.height(), probs)?,
    })
}

/// Numerically stable softmax over a flat slice.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    for e in &mut exps {
        *e /= sum;
    }
    exps
}

/// Foreground pixel indices of `mask` at the resolution of a saliency map.
#[derive(Debug, Clone)]
pub struct MaskSupport {
    dims: (usize, usize),
    indices: Vec<usize>,
}

impl MaskSupport {
    pub fn new(mask: &MaskLayer, width: usize, height: usize) -> Result<Self> {
        let resampled = mask.resample_nearest(width, height);
        let indices: Vec<usize> = resampled
            .weights()
            .iter()
            .enumerate()
            .filter(|(_, &w)| w >= MaskLayer::THRESHOLD)
            .map(|(i, _)| i)
            .collect();
        if indices.is_empty() {
            return Err(Error::EmptyMask);
        }
        Ok(MaskSupport {
            dims: (width, height),
            indices,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Mean value of `values` over the support.
    pub fn mean_of(&self, values: &[f64]) -> f64 {
        let sum: f64 = self.indices.iter().map(|&i| values[i]).sum();
        sum / self.indices.len() as f64
    }
}

/// Negative area-normalised saliency mass inside the binarized mask.
pub fn attention_loss(saliency: &SaliencyMap, mask: &MaskLayer) -> Result<f64> {
    let support = MaskSupport::new(mask, saliency.width(), saliency.height())?;
    Ok(-support.mean_of(saliency.values()))
}

/// Mean saliency inside the binarized mask; the negated attention loss.
pub fn mean_mask_saliency(saliency: &SaliencyMap, mask: &MaskLayer) -> Result<f64> {
    attention_loss(saliency, mask).map(|l| -l)
}
