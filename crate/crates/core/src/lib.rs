//! Attention-redirecting photo edits.
//!
//! An image and a region mask go in; a pair of global edit parameter sets
//! (one for the masked region, one for the rest) comes out, chosen so that a
//! saliency model predicts more (or less) attention inside the mask while the
//! edit stays subtle.
//!
//! - [`imaging`]: raster types, the five parametric stages, compositing and
//!   parameter interpolation.
//! - [`saliency`]: saliency maps, the built-in centre-surround proxy and the
//!   mask attention loss.
//! - [`optimizer`]: the objective and its projected finite-difference descent.
//! - [`metrics`]: saliency increase, mask similarity and fidelity scores.

pub mod error;
pub mod imaging;
pub mod metrics;
pub mod optimizer;
pub mod saliency;

pub use error::{Error, Result};
