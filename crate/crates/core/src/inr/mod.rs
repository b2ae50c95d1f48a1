//! Implicit neural representation `z = f_θ(φ(v))`: a multi-resolution hash
//! encoding followed by a small MLP, with hand-written reverse-mode gradients.

mod encoding;
mod mlp;
mod params;
mod render;

pub use encoding::{
    hash_encode, hash_encode_backward, locate, vertex_slot, EncodingCache, HashEncodingConfig,
    HashTables, LevelLookup, HASH_PRIME,
};
pub use mlp::{mlp_backward, mlp_forward, DenseLayer, MlpCache, MlpParams};
pub use params::{init_inr, CoordGrid, InrParams, FEATURE_INIT_SCALE};
pub use render::{render, render_backward, RenderCache};
