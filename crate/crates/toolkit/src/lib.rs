//! File-level plumbing around `attnshift-core`: image and mask I/O, recipe
//! documents, external saliency providers, video transfer and reports.

pub mod error;
pub mod io;
pub mod netpbm;
pub mod provider;
pub mod recipe;
pub mod report;
pub mod video;

use attnshift_core::imaging::resample::{resize_image, resize_mask, shrink_to_fit};
use attnshift_core::imaging::{composite, interpolate_params, EditRecipe, MaskLayer, RasterImage};

pub use error::{Result, ToolError};
pub use recipe::RecipeDocument;

/// Scales the recipe by `alpha` and composites at full resolution.
pub fn apply_recipe(
    image: &RasterImage,
    mask: &MaskLayer,
    recipe: &EditRecipe,
    alpha: f64,
) -> Result<RasterImage> {
    let scaled = interpolate_params(recipe, alpha)?;
    Ok(composite(image, mask, &scaled)?)
}

/// Image and mask shrunk so the longer side is at most `max_dim`.
pub fn downscale(image: &RasterImage, mask: &MaskLayer, max_dim: usize) -> (RasterImage, MaskLayer) {
    let (w, h) = shrink_to_fit(image.width(), image.height(), max_dim);
    (resize_image(image, w, h), resize_mask(mask, w, h))
}

/// Like [`apply_recipe`] after [`downscale`]. Both the CLI and the service
/// render previews through this.
pub fn render_preview(
    image: &RasterImage,
    mask: &MaskLayer,
    recipe: &EditRecipe,
    alpha: f64,
    max_dim: usize,
) -> Result<RasterImage> {
    let (small, small_mask) = downscale(image, mask, max_dim);
    apply_recipe(&small, &small_mask, recipe, alpha)
}
