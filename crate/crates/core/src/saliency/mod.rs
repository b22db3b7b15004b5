//! Attention proxy: saliency maps, the built-in centre-surround model and the
//! mask attention loss.

mod map;
mod proxy;

pub use map::{
    attention_loss, mean_mask_saliency, normalize_softmax, softmax, MaskSupport, SaliencyMap,
    SaliencySource, RAW_STD_FLOOR,
};
pub use proxy::{
    compute_proxy_saliency, proxy_raw_map, ProxySaliency, ProxySaliencyConfig, MIN_INPUT_SIDE,
};
