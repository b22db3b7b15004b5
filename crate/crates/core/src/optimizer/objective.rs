use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::config::ObjectiveConfig;
use crate::error::{Error, Result};
use crate::imaging::{
    blend, resume_stream, stream_outputs, EditRecipe, MaskLayer, Mode, ParamSet, RasterImage, Stage,
};
use crate::saliency::{MaskSupport, SaliencySource};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub total: f64,
    pub attention: f64,
    pub fidelity: f64,
    pub regularization: f64,
}

/// Evaluates the objective for one image/mask pair at a fixed resolution.
///
/// Holds the mask support at saliency resolution so repeated evaluations do
/// not resample the mask.
pub struct Problem<'a> {
    image: &'a RasterImage,
    mask: &'a MaskLayer,
    source: &'a dyn SaliencySource,
    config: ObjectiveConfig,
    support: OnceLock<MaskSupport>,
}

/// Base stream intermediates reused across finite-difference probes.
pub(crate) struct StreamCache {
    pub fg: Vec<RasterImage>,
    pub bg: Vec<RasterImage>,
}

impl<'a> Problem<'a> {
    pub fn new(
        image: &'a RasterImage,
        mask: &'a MaskLayer,
        source: &'a dyn SaliencySource,
        config: ObjectiveConfig,
    ) -> Result<Self> {
        config.validate()?;
        if image.dims() != mask.dims() {
            return Err(Error::Shape {
                expected: image.dims(),
                found: mask.dims(),
            });
        }
        Ok(Problem {
            image,
            mask,
            source,
            config,
            support: OnceLock::new(),
        })
    }

    pub fn config(&self) -> &ObjectiveConfig {
        &self.config
    }

    pub fn image(&self) -> &RasterImage {
        self.image
    }

    pub fn evaluate(&self, recipe: &EditRecipe) -> Result<ObjectiveBreakdown> {
        recipe.validate()?;
        let fg = crate::imaging::apply_param_set(self.image, &recipe.foreground, &recipe.order)?;
        let bg = crate::imaging::apply_param_set(self.image, &recipe.background, &recipe.order)?;
        self.evaluate_streams(&fg, &bg, &recipe.to_vec())
    }

    pub(crate) fn streams(&self, recipe: &EditRecipe) -> Result<StreamCache> {
        recipe.validate()?;
        Ok(StreamCache {
            fg: stream_outputs(self.image, &recipe.foreground, &recipe.order)?,
            bg: stream_outputs(self.image, &recipe.background, &recipe.order)?,
        })
    }

    /// Objective after changing flattened parameter `index` to `value`,
    /// recomputing only the affected stream from the affected stage on.
    pub(crate) fn evaluate_probe(
        &self,
        recipe: &EditRecipe,
        cache: &StreamCache,
        index: usize,
        value: f64,
    ) -> Result<ObjectiveBreakdown> {
        let half = recipe.foreground.dimension();
        let mut vec = recipe.to_vec();
        vec[index] = value;
        let probe = recipe.with_vec(&vec)?;
        let (region, local) = (index / half, index % half);
        let stage = stage_of(local, recipe.curve_resolution());
        let pos = recipe.order.position(stage);
        let (fg_owned, bg_owned);
        let (fg, bg) = if region == 0 {
            fg_owned = resume_stream(&cache.fg[pos], &probe.foreground, &probe.order, pos)?;
            (&fg_owned, &cache.bg[5])
        } else {
            bg_owned = resume_stream(&cache.bg[pos], &probe.background, &probe.order, pos)?;
            (&cache.fg[5], &bg_owned)
        };
        self.evaluate_streams(fg, bg, &vec)
    }

    pub(crate) fn evaluate_cached(
        &self,
        recipe: &EditRecipe,
        cache: &StreamCache,
    ) -> Result<ObjectiveBreakdown> {
        self.evaluate_streams(&cache.fg[5], &cache.bg[5], &recipe.to_vec())
    }

    fn evaluate_streams(
        &self,
        fg: &RasterImage,
        bg: &RasterImage,
        params: &[f64],
    ) -> Result<ObjectiveBreakdown> {
        let edited = blend(fg, bg, self.mask)?;
        let fidelity = mean_abs_diff(self.image.data(), edited.data());
        let saliency = self.source.saliency(&edited)?;
        let support = match self.support.get() {
            Some(s) if s.dims() == saliency.dims() => s,
            Some(_) => {
                // A source that changes resolution between calls; do not cache.
                let s = MaskSupport::new(self.mask, saliency.width(), saliency.height())?;
                return Ok(self.combine(-s.mean_of(saliency.values()), fidelity, params));
            }
            None => {
                let s = MaskSupport::new(self.mask, saliency.width(), saliency.height())?;
                self.support.get_or_init(|| s)
            }
        };
        let loss = -support.mean_of(saliency.values());
        Ok(self.combine(loss, fidelity, params))
    }

    fn combine(&self, attention_loss: f64, fidelity: f64, params: &[f64]) -> ObjectiveBreakdown {
        let attention = match self.config.mode {
            Mode::Increase => attention_loss,
            Mode::Decrease => -attention_loss,
        };
        let regularization = regularization(params);
        let c = &self.config;
        ObjectiveBreakdown {
            total: c.attention_weight * attention
                + c.fidelity_weight * fidelity
                + c.regularization_weight * regularization,
            attention,
            fidelity,
            regularization,
        }
    }
}

/// Stage controlled by a flattened per-region parameter index for curves of
/// `curve_resolution` knots.
pub(crate) fn stage_of(local: usize, curve_resolution: usize) -> Stage {
    match local {
        0 => Stage::Sharpen,
        1 => Stage::Exposure,
        2 => Stage::Contrast,
        i if i < 3 + curve_resolution => Stage::Tone,
        _ => Stage::Color,
    }
}

/// Mean squared distance from identity in half-width units over all
/// flattened parameters (both regions).
pub fn regularization(params: &[f64]) -> f64 {
    let half = params.len() / 2;
    let sum: f64 = params
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let local = i % half;
            let d = (v - ParamSet::identity_at(local)) / ParamSet::range_at(local).half_width();
            d * d
        })
        .sum();
    sum / params.len() as f64
}

fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    sum / a.len() as f64
}

/// One-shot objective evaluation. `image` and `mask` should already be at the
/// working resolution.
pub fn objective(
    image: &RasterImage,
    mask: &MaskLayer,
    recipe: &EditRecipe,
    source: &dyn SaliencySource,
    config: &ObjectiveConfig,
) -> Result<ObjectiveBreakdown> {
    Problem::new(image, mask, source, config.clone())?.evaluate(recipe)
}
