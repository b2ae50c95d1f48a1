//! Multi-resolution hash encoding of 2D coordinates.
//!
//! Level `ℓ` is a grid of resolution `N_ℓ = ⌊N_min·bˡ⌋` whose `(N_ℓ+1)²`
//! vertices are stored directly when they fit in the table, and hashed into
//! `T` slots otherwise. A coordinate's level feature is the bilinear blend of
//! its cell's four corner vectors; all levels are concatenated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multiplier applied to the second vertex coordinate by the spatial hash.
pub const HASH_PRIME: u32 = 2_654_435_761;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HashEncodingConfig {
    /// Number of resolution levels `L`.
    pub levels: usize,
    /// Table entries per level `T`.
    pub table_size: usize,
    /// Feature dimension per entry `F`.
    pub features: usize,
    /// Coarsest grid resolution `N_min`.
    pub base_resolution: usize,
    /// Per-level growth factor `b`.
    pub growth: f64,
}

impl HashEncodingConfig {
    /// Desk-scale default for an image: `L = 8, F = 2, T = 2¹⁴, N_min = 8`
    /// with `b` chosen so the finest level is about half the image size.
    pub fn for_image(height: usize, width: usize) -> Self {
        let levels = 8;
        let base_resolution = 8;
        let finest = (height.max(width) as f64 / 2.0).max(base_resolution as f64);
        let growth = if finest > base_resolution as f64 {
            (finest / base_resolution as f64).powf(1.0 / (levels - 1) as f64)
        } else {
            1.0
        };
        Self {
            levels,
            table_size: 1 << 14,
            features: 2,
            base_resolution,
            growth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels == 0
            || self.table_size == 0
            || self.features == 0
            || self.base_resolution == 0
        {
            return Err(Error::invalid(format!(
                "hash encoding dimensions must be positive: {self:?}"
            )));
        }
        if !(self.growth >= 1.0) || !self.growth.is_finite() {
            return Err(Error::invalid(format!(
                "growth factor must be finite and >= 1, got {}",
                self.growth
            )));
        }
        if self.table_size > u32::MAX as usize {
            return Err(Error::invalid("table size exceeds u32 range"));
        }
        Ok(())
    }

    /// Grid resolution of level `level`.
    pub fn resolution(&self, level: usize) -> usize {
        // The epsilon keeps exact powers (e.g. 8·2³) from flooring low.
        let n = self.base_resolution as f64 * self.growth.powi(level as i32);
        ((n * (1.0 + 1e-12)).floor() as usize).max(1)
    }

    /// True when level `level` is indexed through the spatial hash.
    pub fn is_hashed(&self, level: usize) -> bool {
        let n = self.resolution(level) + 1;
        n * n > self.table_size
    }

    /// Length of the encoded feature vector, `L·F`.
    pub fn output_dim(&self) -> usize {
        self.levels * self.features
    }

    /// Number of trainable encoding parameters, `L·T·F`.
    pub fn num_params(&self) -> usize {
        self.levels * self.table_size * self.features
    }
}

/// Trainable feature tables for all levels, stored level-major:
/// entry `(level, slot, f)` lives at `(level·T + slot)·F + f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HashTables {
    pub levels: usize,
    pub table_size: usize,
    pub features: usize,
    pub data: Vec<f64>,
}

impl HashTables {
    pub fn zeros(config: &HashEncodingConfig) -> Self {
        Self {
            levels: config.levels,
            table_size: config.table_size,
            features: config.features,
            data: vec![0.0; config.num_params()],
        }
    }

    #[inline]
    pub fn offset(&self, level: usize, slot: usize) -> usize {
        (level * self.table_size + slot) * self.features
    }

    pub fn entry(&self, level: usize, slot: usize) -> &[f64] {
        let o = self.offset(level, slot);
        &self.data[o..o + self.features]
    }

    pub fn entry_mut(&mut self, level: usize, slot: usize) -> &mut [f64] {
        let o = self.offset(level, slot);
        &mut self.data[o..o + self.features]
    }
}

/// Table slot of integer vertex `(x, y)` at a level of resolution `n`.
#[inline]
pub fn vertex_slot(x: usize, y: usize, n: usize, hashed: bool, table_size: usize) -> usize {
    if hashed {
        let h = (x as u32) ^ (y as u32).wrapping_mul(HASH_PRIME);
        (h as usize) % table_size
    } else {
        y * (n + 1) + x
    }
}

/// Corner slots and bilinear weights of one coordinate at one level.
///
/// Corner order: `(x0,y0), (x1,y0), (x0,y1), (x1,y1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelLookup {
    pub slots: [u32; 4],
    pub weights: [f64; 4],
}

/// Everything the backward pass needs from one forward encoding.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodingCache {
    pub lookups: Vec<LevelLookup>,
    /// Set when the input coordinate was outside `[0, 1]²` and clamped.
    pub clamped: bool,
}

/// Locates `v` on every level. Out-of-range coordinates are clamped to the
/// unit square and flagged.
pub fn locate(v: [f64; 2], config: &HashEncodingConfig) -> EncodingCache {
    let mut lookups = Vec::with_capacity(config.levels);
    let clamped = locate_into(v, config, &mut lookups);
    EncodingCache { lookups, clamped }
}

pub(crate) fn locate_into(
    v: [f64; 2],
    config: &HashEncodingConfig,
    out: &mut Vec<LevelLookup>,
) -> bool {
    let mut clamped = false;
    let mut clamp = |t: f64| {
        if (0.0..=1.0).contains(&t) {
            t
        } else {
            clamped = true;
            if t.is_nan() {
                0.0
            } else {
                t.clamp(0.0, 1.0)
            }
        }
    };
    let (vx, vy) = (clamp(v[0]), clamp(v[1]));
    for level in 0..config.levels {
        let n = config.resolution(level);
        let hashed = config.is_hashed(level);
        let (px, py) = (vx * n as f64, vy * n as f64);
        let x0 = (px.floor() as usize).min(n - 1);
        let y0 = (py.floor() as usize).min(n - 1);
        let (fx, fy) = (px - x0 as f64, py - y0 as f64);
        let slot = |x, y| vertex_slot(x, y, n, hashed, config.table_size) as u32;
        out.push(LevelLookup {
            slots: [
                slot(x0, y0),
                slot(x0 + 1, y0),
                slot(x0, y0 + 1),
                slot(x0 + 1, y0 + 1),
            ],
            weights: [
                (1.0 - fx) * (1.0 - fy),
                fx * (1.0 - fy),
                (1.0 - fx) * fy,
                fx * fy,
            ],
        });
    }
    clamped
}

/// Blends table entries according to `lookups` into `out` (length `L·F`).
pub(crate) fn interpolate(lookups: &[LevelLookup], tables: &HashTables, out: &mut [f64]) {
    let f = tables.features;
    for (level, lookup) in lookups.iter().enumerate() {
        let dst = &mut out[level * f..(level + 1) * f];
        dst.iter_mut().for_each(|d| *d = 0.0);
        for (&slot, &w) in lookup.slots.iter().zip(&lookup.weights) {
            let src = tables.entry(level, slot as usize);
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
}

/// Scatters `grad_features` back onto the table slots used by `lookups`.
pub(crate) fn scatter(lookups: &[LevelLookup], grad_features: &[f64], grads: &mut HashTables) {
    let f = grads.features;
    for (level, lookup) in lookups.iter().enumerate() {
        let g = &grad_features[level * f..(level + 1) * f];
        if g.iter().all(|&v| v == 0.0) {
            continue;
        }
        for (&slot, &w) in lookup.slots.iter().zip(&lookup.weights) {
            let dst = grads.entry_mut(level, slot as usize);
            for (d, gv) in dst.iter_mut().zip(g) {
                *d += w * gv;
            }
        }
    }
}

/// Encodes `v` into a feature vector of length `L·F`.
pub fn hash_encode(
    v: [f64; 2],
    config: &HashEncodingConfig,
    tables: &HashTables,
) -> (Vec<f64>, EncodingCache) {
    let cache = locate(v, config);
    let mut out = vec![0.0; config.output_dim()];
    interpolate(&cache.lookups, tables, &mut out);
    (out, cache)
}

/// Accumulates the table gradient of one encoding into `grads`; corners that
/// share a slot have their contributions summed.
pub fn hash_encode_backward(
    cache: &EncodingCache,
    grad_features: &[f64],
    grads: &mut HashTables,
) -> Result<()> {
    if grad_features.len() != cache.lookups.len() * grads.features {
        return Err(Error::invalid(format!(
            "feature gradient has length {}, expected {}",
            grad_features.len(),
            cache.lookups.len() * grads.features
        )));
    }
    scatter(&cache.lookups, grad_features, grads);
    Ok(())
}
