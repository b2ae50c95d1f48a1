use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Rng;

use super::encoding::{HashEncodingConfig, HashTables};
use super::mlp::MlpParams;

/// Magnitude bound of the initial hash features.
pub const FEATURE_INIT_SCALE: f64 = 1e-4;

/// All trainable INR parameters together with the encoding layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InrParams {
    pub config: HashEncodingConfig,
    pub tables: HashTables,
    pub mlp: MlpParams,
}

/// Hash features `U(±1e-4)`, Xavier-uniform weights, zero biases.
/// `hidden` lists the hidden widths; input `L·F` and output `2` are implied.
pub fn init_inr(config: &HashEncodingConfig, hidden: &[usize], rng: &mut Rng) -> Result<InrParams> {
    config.validate()?;
    let mut widths = Vec::with_capacity(hidden.len() + 2);
    widths.push(config.output_dim());
    widths.extend_from_slice(hidden);
    widths.push(2);
    let mut mlp = MlpParams::zeros(&widths)?;

    let mut tables = HashTables::zeros(config);
    for v in &mut tables.data {
        *v = rng.uniform_range(-FEATURE_INIT_SCALE, FEATURE_INIT_SCALE);
    }
    for layer in &mut mlp.layers {
        let bound = (6.0 / (layer.in_dim + layer.out_dim) as f64).sqrt();
        for w in &mut layer.weights {
            *w = rng.uniform_range(-bound, bound);
        }
    }
    Ok(InrParams {
        config: *config,
        tables,
        mlp,
    })
}

impl InrParams {
    /// Same layout, all values zero. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config,
            tables: HashTables::zeros(&self.config),
            mlp: self.mlp.zeros_like(),
        }
    }

    /// Hidden layer widths.
    pub fn hidden_widths(&self) -> Vec<usize> {
        let w = self.mlp.widths();
        w[1..w.len() - 1].to_vec()
    }

    pub fn num_params(&self) -> usize {
        self.tables.data.len() + self.mlp.num_params()
    }

    /// Parameter blocks in a fixed order: tables, then each layer's weights
    /// and biases.
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.tables.data];
        for l in &self.mlp.layers {
            out.push(&l.weights);
            out.push(&l.biases);
        }
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![&mut self.tables.data];
        for l in &mut self.mlp.layers {
            out.push(&mut l.weights);
            out.push(&mut l.biases);
        }
        out
    }

    /// Flattens all parameters in [`blocks`](Self::blocks) order.
    pub fn pack(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        for b in self.blocks() {
            v.extend_from_slice(b);
        }
        v
    }

    /// Overwrites all parameters from a flat vector produced by [`pack`](Self::pack).
    pub fn unpack(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for b in self.blocks_mut() {
            let n = b.len();
            b.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.blocks()
            .iter()
            .all(|b| b.iter().all(|v| v.is_finite()))
    }

    /// `Σ self·other` over all parameters.
    pub fn dot(&self, other: &InrParams) -> f64 {
        self.blocks()
            .iter()
            .zip(other.blocks())
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum()
    }

    /// `self += alpha · other`.
    pub fn axpy(&mut self, alpha: f64, other: &InrParams) {
        for (a, b) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += alpha * y;
            }
        }
    }

    /// Checks internal consistency: table length, MLP chaining and input width.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.tables.data.len() != self.config.num_params()
            || self.tables.levels != self.config.levels
            || self.tables.table_size != self.config.table_size
            || self.tables.features != self.config.features
        {
            return Err(Error::invalid(
                "hash tables do not match the encoding config",
            ));
        }
        self.mlp.validate()?;
        if self.mlp.input_dim() != self.config.output_dim() {
            return Err(Error::invalid(format!(
                "MLP expects {} inputs but the encoding produces {}",
                self.mlp.input_dim(),
                self.config.output_dim()
            )));
        }
        Ok(())
    }
}

/// Normalized pixel-center coordinates of an `H×W` grid, row-major.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoordGrid {
    pub height: usize,
    pub width: usize,
}

impl CoordGrid {
    pub fn new(height: usize, width: usize) -> Self {
        Self { height, width }
    }

    /// `((c + ½)/W, (r + ½)/H)`.
    #[inline]
    pub fn coord(&self, r: usize, c: usize) -> [f64; 2] {
        [
            (c as f64 + 0.5) / self.width as f64,
            (r as f64 + 0.5) / self.height as f64,
        ]
    }

    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.height).flat_map(move |r| (0..self.width).map(move |c| self.coord(r, c)))
    }
}
