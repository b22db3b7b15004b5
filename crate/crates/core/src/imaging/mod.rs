//! Image, mask and parameter types and the parametric edit pipeline.

mod params;
mod pipeline;
mod raster;
pub mod resample;
mod transforms;

pub use params::{
    interpolate_params, EditRecipe, Mode, ParamSet, PipelineOrder, Provenance, Range, Stage,
    TraceEntry, CONTRAST_RANGE, CURVE_RANGE, DEFAULT_CURVE_RESOLUTION, EXPOSURE_RANGE,
    SHARPNESS_RANGE,
};
pub use pipeline::{apply_param_set, apply_stage, blend, composite};
pub(crate) use pipeline::{resume_stream, stream_outputs};
pub use raster::{Grid, MaskLayer, RasterImage};
pub use transforms::{
    adjust_contrast, adjust_exposure, apply_curve, luma, luminance, sharpen, sobel_magnitude,
    Curves, PiecewiseCurve, CONTRAST_EPSILON, LUMA_WEIGHTS,
};

/// Identity parameter set with `curve_resolution` knots per curve.
pub fn identity_params(curve_resolution: usize) -> ParamSet {
    ParamSet::identity(curve_resolution)
}
