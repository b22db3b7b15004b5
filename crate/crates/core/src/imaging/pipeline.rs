use std::borrow::Cow;

use rayon::prelude::*;

use super::params::{EditRecipe, ParamSet, PipelineOrder, Stage};
use super::raster::{ensure_same_dims, MaskLayer, RasterImage};
use super::transforms::{
    adjust_contrast, adjust_exposure, apply_built_curves, sharpen, PiecewiseCurve,
};
use crate::error::Result;

/// Applies one stage of `params`. Stages whose parameters are the identity
/// return the input unchanged (borrowed).
pub fn apply_stage<'a>(
    image: &'a RasterImage,
    params: &ParamSet,
    stage: Stage,
) -> Result<Cow<'a, RasterImage>> {
    let out = match stage {
        Stage::Sharpen if params.sharpness != 0.0 => sharpen(image, params.sharpness)?,
        Stage::Exposure if params.exposure != 0.0 => adjust_exposure(image, params.exposure)?,
        Stage::Contrast if params.contrast != 0.0 => adjust_contrast(image, params.contrast)?,
        Stage::Tone => {
            let curve = PiecewiseCurve::new(&params.tone)?;
            if curve.is_constant() {
                return Ok(Cow::Borrowed(image));
            }
            apply_built_curves(image, &[curve.clone(), curve.clone(), curve])
        }
        Stage::Color => {
            let curves = [
                PiecewiseCurve::new(&params.color[0])?,
                PiecewiseCurve::new(&params.color[1])?,
                PiecewiseCurve::new(&params.color[2])?,
            ];
            if curves.iter().all(PiecewiseCurve::is_constant) {
                return Ok(Cow::Borrowed(image));
            }
            apply_built_curves(image, &curves)
        }
        _ => return Ok(Cow::Borrowed(image)),
    };
    Ok(Cow::Owned(out))
}

/// Runs all five stages in `order`; each stage clamps before the next.
pub fn apply_param_set(
    image: &RasterImage,
    params: &ParamSet,
    order: &PipelineOrder,
) -> Result<RasterImage> {
    params.validate()?;
    let mut current = Cow::Borrowed(image);
    for &stage in order.stages() {
        current = match apply_stage(&current, params, stage)? {
            Cow::Borrowed(_) => current,
            Cow::Owned(next) => Cow::Owned(next),
        };
    }
    Ok(current.into_owned())
}

/// Every intermediate of one stream: `outputs[k]` is the image after the
/// first `k` stages of `order`, so `outputs[0]` is the input.
pub(crate) fn stream_outputs(
    image: &RasterImage,
    params: &ParamSet,
    order: &PipelineOrder,
) -> Result<Vec<RasterImage>> {
    let mut outputs = Vec::with_capacity(6);
    outputs.push(image.clone());
    for &stage in order.stages() {
        let next = apply_stage(outputs.last().expect("non-empty"), params, stage)?.into_owned();
        outputs.push(next);
    }
    Ok(outputs)
}

/// Finishes a stream from the output of stage `from - 1`.
pub(crate) fn resume_stream(
    partial: &RasterImage,
    params: &ParamSet,
    order: &PipelineOrder,
    from: usize,
) -> Result<RasterImage> {
    let mut current = Cow::Borrowed(partial);
    for &stage in &order.stages()[from..] {
        current = match apply_stage(&current, params, stage)? {
            Cow::Borrowed(_) => current,
            Cow::Owned(next) => Cow::Owned(next),
        };
    }
    Ok(current.into_owned())
}

/// `fg * m + bg * (1 - m)` element-wise, with the mask broadcast over channels.
pub fn blend(fg: &RasterImage, bg: &RasterImage, mask: &MaskLayer) -> Result<RasterImage> {
    ensure_same_dims(fg.dims(), bg.dims())?;
    ensure_same_dims(fg.dims(), mask.dims())?;
    let (w, h) = fg.dims();
    let n = w * h;
    let m = mask.weights();
    let mut data = vec![0.0; n * 3];
    for c in 0..3 {
        let (f, b) = (fg.plane(c), bg.plane(c));
        data[c * n..(c + 1) * n]
            .par_iter_mut()
            .with_min_len(4096)
            .enumerate()
            .for_each(|(i, o)| {
                let wgt = m[i];
                *o = if wgt == 1.0 {
                    f[i]
                } else if wgt == 0.0 {
                    b[i]
                } else {
                    // Lerp form: exact wherever the two streams agree.
                    (b[i] + wgt * (f[i] - b[i])).clamp(0.0, 1.0)
                };
            });
    }
    Ok(RasterImage::from_clamped(w, h, data))
}

/// Two independent streams, one per parameter set, blended by the mask.
pub fn composite(
    image: &RasterImage,
    mask: &MaskLayer,
    recipe: &EditRecipe,
) -> Result<RasterImage> {
    ensure_same_dims(image.dims(), mask.dims())?;
    recipe.validate()?;
    let (fg, bg) = rayon::join(
        || apply_param_set(image, &recipe.foreground, &recipe.order),
        || apply_param_set(image, &recipe.background, &recipe.order),
    );
    blend(&fg?, &bg?, mask)
}
