use crate::error::Result;
use crate::numeric::{ComplexGrid, C64};

use super::encoding::{interpolate, locate_into, scatter, LevelLookup};
use super::params::{CoordGrid, InrParams};

/// Per-pixel encodings and activations from one [`render`] call.
#[derive(Clone, Debug)]
pub struct RenderCache {
    height: usize,
    width: usize,
    levels: usize,
    lookups: Vec<LevelLookup>,
    act_len: usize,
    acts: Vec<f64>,
    clamped: usize,
}

impl RenderCache {
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Number of coordinates that had to be clamped into the unit square.
    pub fn clamped(&self) -> usize {
        self.clamped
    }
}

/// Evaluates the network at every pixel center of an `height×width` grid.
pub fn render(params: &InrParams, height: usize, width: usize) -> (ComplexGrid, RenderCache) {
    let grid = CoordGrid::new(height, width);
    let levels = params.config.levels;
    let feat_len = params.config.output_dim();
    let act_len = params.mlp.activation_len();
    let mut lookups = Vec::with_capacity(grid.len() * levels);
    let mut acts = vec![0.0; grid.len() * act_len];
    let mut image = ComplexGrid::zeros(height, width);
    let mut clamped = 0;
    for (p, (v, out)) in grid.iter().zip(image.data_mut()).enumerate() {
        let start = lookups.len();
        if locate_into(v, &params.config, &mut lookups) {
            clamped += 1;
        }
        let a = &mut acts[p * act_len..(p + 1) * act_len];
        interpolate(&lookups[start..], &params.tables, &mut a[..feat_len]);
        let [re, im] = params.mlp.forward_into(a);
        *out = C64::new(re, im);
    }
    let cache = RenderCache {
        height,
        width,
        levels,
        lookups,
        act_len,
        acts,
        clamped,
    };
    (image, cache)
}

/// Gradient of `Re⟨grad_z, z⟩` over all parameters, i.e. the chain rule with
/// `∂/∂Re z = Re grad_z` and `∂/∂Im z = Im grad_z` at every pixel.
pub fn render_backward(
    params: &InrParams,
    cache: &RenderCache,
    grad_z: &ComplexGrid,
) -> Result<InrParams> {
    grad_z.check_shape((cache.height, cache.width))?;
    let mut grads = params.zeros_like();
    let mut grad_features = vec![0.0; params.config.output_dim()];
    let (mut delta, mut next) = (Vec::new(), Vec::new());
    for (p, g) in grad_z.data().iter().enumerate() {
        if g.re == 0.0 && g.im == 0.0 {
            continue;
        }
        let acts = &cache.acts[p * cache.act_len..(p + 1) * cache.act_len];
        params.mlp.backward_into(
            acts,
            [g.re, g.im],
            &mut grads.mlp,
            &mut grad_features,
            &mut delta,
            &mut next,
        );
        let lookups = &cache.lookups[p * cache.levels..(p + 1) * cache.levels];
        scatter(lookups, &grad_features, &mut grads.tables);
    }
    Ok(grads)
}
