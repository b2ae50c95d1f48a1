//! Undersampling masks.
//!
//! Line patterns sample whole phase-encode columns (the width axis is the
//! phase-encode direction). Point patterns rasterize a continuous trajectory
//! onto the Cartesian grid by nearest neighbour.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{ComplexGrid, Rng, C64};

/// Tolerance on realized undersampling rate for trajectory patterns.
pub const TRAJECTORY_RATE_TOLERANCE: f64 = 0.01;

/// Spacing, in pixels, between consecutive trajectory samples.
const TRAJECTORY_STEP: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingPattern {
    RandomLines,
    UniformLines,
    Radial,
    Spiral,
    /// Externally supplied mask (e.g. read from disk).
    Custom,
}

impl SamplingPattern {
    pub fn is_lines(self) -> bool {
        matches!(
            self,
            SamplingPattern::RandomLines | SamplingPattern::UniformLines
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            SamplingPattern::RandomLines => "random-lines",
            SamplingPattern::UniformLines => "uniform-lines",
            SamplingPattern::Radial => "radial",
            SamplingPattern::Spiral => "spiral",
            SamplingPattern::Custom => "custom",
        }
    }
}

impl fmt::Display for SamplingPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplingPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-lines" | "random" => Ok(SamplingPattern::RandomLines),
            "uniform-lines" | "uniform" => Ok(SamplingPattern::UniformLines),
            "radial" => Ok(SamplingPattern::Radial),
            "spiral" => Ok(SamplingPattern::Spiral),
            "custom" => Ok(SamplingPattern::Custom),
            other => Err(Error::invalid(format!(
                "unknown sampling pattern '{other}'"
            ))),
        }
    }
}

/// Binary k-space sampling mask with a fully sampled calibration region.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingMask {
    height: usize,
    width: usize,
    pattern: SamplingPattern,
    acs: usize,
    sampled: Vec<bool>,
}

impl SamplingMask {
    /// Generates a mask with target acceleration `acceleration`.
    ///
    /// Line patterns keep exactly `floor(width / R)` columns, `acs` of them
    /// the central calibration block. Trajectory patterns are tuned so the
    /// realized rate is within one percentage point of `1/R`.
    pub fn generate(
        pattern: SamplingPattern,
        height: usize,
        width: usize,
        acceleration: f64,
        acs: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid("mask dimensions must be positive"));
        }
        if !(acceleration >= 1.0) || !acceleration.is_finite() {
            return Err(Error::invalid(format!(
                "acceleration must be a finite number >= 1, got {acceleration}"
            )));
        }
        if (acceleration - 1.0).abs() < 1e-12 {
            return Ok(Self::full_with(height, width, pattern, acs.min(width)));
        }
        match pattern {
            SamplingPattern::RandomLines | SamplingPattern::UniformLines => {
                lines_mask(pattern, height, width, acceleration, acs, rng)
            }
            SamplingPattern::Radial => trajectory_mask(pattern, height, width, acceleration, acs),
            SamplingPattern::Spiral => trajectory_mask(pattern, height, width, acceleration, acs),
            SamplingPattern::Custom => Err(Error::invalid("custom masks cannot be generated")),
        }
    }

    /// Fully sampled mask.
    pub fn full(height: usize, width: usize) -> Self {
        Self::full_with(height, width, SamplingPattern::RandomLines, width)
    }

    fn full_with(height: usize, width: usize, pattern: SamplingPattern, acs: usize) -> Self {
        Self {
            height,
            width,
            pattern,
            acs,
            sampled: vec![true; height * width],
        }
    }

    /// Wraps an externally supplied 0/1 mask.
    ///
    /// The calibration size is detected: for column-separable masks, the
    /// contiguous sampled run of columns around the center; otherwise the
    /// largest fully sampled central square.
    pub fn from_sampled(height: usize, width: usize, sampled: Vec<bool>) -> Result<Self> {
        if height == 0 || width == 0 || sampled.len() != height * width {
            return Err(Error::invalid(format!(
                "mask data length {} does not match {height}x{width}",
                sampled.len()
            )));
        }
        let mut mask = Self {
            height,
            width,
            pattern: SamplingPattern::Custom,
            acs: 0,
            sampled,
        };
        if mask.is_column_separable() {
            mask.pattern = SamplingPattern::RandomLines;
            mask.acs = mask.detect_acs_lines();
        } else {
            mask.acs = mask.detect_acs_square();
        }
        Ok(mask)
    }

    /// Interprets a real-valued weight grid (nonzero = sampled).
    pub fn from_weights(height: usize, width: usize, weights: &[f64]) -> Result<Self> {
        Self::from_sampled(height, width, weights.iter().map(|&w| w != 0.0).collect())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn pattern(&self) -> SamplingPattern {
        self.pattern
    }

    /// Calibration size: central column count (lines) or square side.
    pub fn acs(&self) -> usize {
        self.acs
    }

    pub fn sampled(&self) -> &[bool] {
        &self.sampled
    }

    #[inline]
    pub fn is_sampled(&self, row: usize, col: usize) -> bool {
        self.sampled[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.sampled.iter().filter(|&&s| s).count()
    }

    /// Fraction of sampled locations.
    pub fn undersampling_rate(&self) -> f64 {
        self.count() as f64 / (self.height * self.width) as f64
    }

    /// Realized acceleration `1 / undersampling_rate`.
    pub fn acceleration(&self) -> f64 {
        1.0 / self.undersampling_rate()
    }

    /// True when every column is entirely sampled or entirely skipped.
    pub fn is_column_separable(&self) -> bool {
        (0..self.width).all(|c| {
            let first = self.is_sampled(0, c);
            (1..self.height).all(|r| self.is_sampled(r, c) == first)
        })
    }

    /// Sampled column indices (meaningful for column-separable masks).
    pub fn sampled_columns(&self) -> Vec<usize> {
        (0..self.width).filter(|&c| self.is_sampled(0, c)).collect()
    }

    /// Row and column ranges of the calibration region.
    pub fn acs_region(&self) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let cols = central_range(self.width, self.acs);
        if self.pattern.is_lines() {
            (0..self.height, cols)
        } else {
            (central_range(self.height, self.acs), cols)
        }
    }

    /// Mask as 0/1 weights.
    pub fn to_grid(&self) -> ComplexGrid {
        ComplexGrid::from_fn(self.height, self.width, |r, c| {
            C64::new(if self.is_sampled(r, c) { 1.0 } else { 0.0 }, 0.0)
        })
    }

    pub fn to_weights(&self) -> Vec<f64> {
        self.sampled
            .iter()
            .map(|&s| if s { 1.0 } else { 0.0 })
            .collect()
    }

    /// Zeroes unsampled locations of `grid` in place.
    pub fn apply(&self, grid: &mut ComplexGrid) {
        for (v, &s) in grid.data_mut().iter_mut().zip(&self.sampled) {
            if !s {
                *v = C64::new(0.0, 0.0);
            }
        }
    }

    fn detect_acs_lines(&self) -> usize {
        let center = self.width / 2;
        if !self.is_sampled(0, center) {
            return 0;
        }
        // Largest symmetric block of sampled columns around the center.
        let mut best = 1;
        for size in 2..=self.width {
            let range = central_range(self.width, size);
            if range.clone().all(|c| self.is_sampled(0, c)) {
                best = size;
            } else if size > best + 1 {
                break;
            }
        }
        best
    }

    fn detect_acs_square(&self) -> usize {
        let mut best = 0;
        for size in 1..=self.height.min(self.width) {
            let rows = central_range(self.height, size);
            let cols = central_range(self.width, size);
            let full = rows
                .clone()
                .all(|r| cols.clone().all(|c| self.is_sampled(r, c)));
            if full {
                best = size;
            } else if size > best + 1 {
                break;
            }
        }
        best
    }
}

/// `size` consecutive indices containing the center index `n / 2`.
pub fn central_range(n: usize, size: usize) -> std::ops::Range<usize> {
    let size = size.min(n);
    let start = (n / 2).saturating_sub(size / 2).min(n - size);
    start..start + size
}

/// Number of phase-encode lines kept at acceleration `r`.
pub fn line_count(width: usize, acceleration: f64) -> usize {
    // The epsilon keeps exact quotients such as 320/8 from flooring low.
    ((width as f64 / acceleration) + 1e-9).floor() as usize
}

fn lines_mask(
    pattern: SamplingPattern,
    height: usize,
    width: usize,
    acceleration: f64,
    acs: usize,
    rng: &mut Rng,
) -> Result<SamplingMask> {
    if acs >= width {
        return Err(Error::invalid(format!(
            "acs ({acs}) must be smaller than the width ({width})"
        )));
    }
    let lines = line_count(width, acceleration);
    if lines < acs {
        return Err(Error::invalid(format!(
            "acceleration {acceleration} keeps {lines} lines, fewer than acs = {acs}"
        )));
    }
    let acs_cols = central_range(width, acs);
    let candidates: Vec<usize> = (0..width).filter(|c| !acs_cols.contains(c)).collect();
    let extra = lines - acs;

    let mut columns = vec![false; width];
    for c in acs_cols {
        columns[c] = true;
    }
    match pattern {
        SamplingPattern::RandomLines => {
            for i in rng.sample_indices(candidates.len(), extra) {
                columns[candidates[i]] = true;
            }
        }
        _ => {
            let m = candidates.len();
            for j in 0..extra {
                let idx = ((j as f64 + 0.5) * m as f64 / extra as f64).floor() as usize;
                columns[candidates[idx.min(m - 1)]] = true;
            }
        }
    }

    let mut sampled = vec![false; height * width];
    for r in 0..height {
        sampled[r * width..(r + 1) * width].copy_from_slice(&columns);
    }
    Ok(SamplingMask {
        height,
        width,
        pattern,
        acs,
        sampled,
    })
}

struct Raster {
    height: usize,
    width: usize,
    sampled: Vec<bool>,
    count: usize,
}

impl Raster {
    fn with_acs(height: usize, width: usize, acs: usize) -> Self {
        let mut raster = Self {
            height,
            width,
            sampled: vec![false; height * width],
            count: 0,
        };
        for r in central_range(height, acs) {
            for c in central_range(width, acs) {
                raster.mark(r as f64, c as f64);
            }
        }
        raster
    }

    /// Marks the grid point nearest to `(row, col)` when inside the grid.
    fn mark(&mut self, row: f64, col: f64) {
        let (r, c) = (row.round(), col.round());
        if r < 0.0 || c < 0.0 || r >= self.height as f64 || c >= self.width as f64 {
            return;
        }
        let idx = r as usize * self.width + c as usize;
        if !self.sampled[idx] {
            self.sampled[idx] = true;
            self.count += 1;
        }
    }

    fn rate(&self) -> f64 {
        self.count as f64 / (self.height * self.width) as f64
    }

    fn center(&self) -> (f64, f64) {
        ((self.height / 2) as f64, (self.width / 2) as f64)
    }

    /// Straight spoke through the k-space center at `angle`.
    fn spoke(&mut self, angle: f64) {
        let (cy, cx) = self.center();
        let reach =
            0.5 * ((self.height * self.height + self.width * self.width) as f64).sqrt() + 1.0;
        let steps = (reach / TRAJECTORY_STEP).ceil() as i64;
        let (s, c) = angle.sin_cos();
        for k in -steps..=steps {
            let t = k as f64 * TRAJECTORY_STEP;
            self.mark(cy + t * s, cx + t * c);
        }
    }

    /// Archimedean spiral `r = a·θ` out to the inscribed radius, sampled at
    /// (approximately) equal arc length.
    fn spiral(&mut self, turns: f64) {
        let (cy, cx) = self.center();
        let r_max = 0.5 * self.height.min(self.width) as f64;
        let a = r_max / (2.0 * PI * turns);
        let mut theta: f64 = 0.0;
        loop {
            let radius = a * theta;
            if radius > r_max {
                break;
            }
            let (s, c) = theta.sin_cos();
            self.mark(cy + radius * s, cx + radius * c);
            // ds = a·√(1+θ²)·dθ
            theta += TRAJECTORY_STEP / (a * (1.0 + theta * theta).sqrt());
        }
    }
}

fn trajectory_mask(
    pattern: SamplingPattern,
    height: usize,
    width: usize,
    acceleration: f64,
    acs: usize,
) -> Result<SamplingMask> {
    if acs > height.min(width) {
        return Err(Error::invalid(format!(
            "acs square ({acs}) does not fit in {height}x{width}"
        )));
    }
    let target = 1.0 / acceleration;
    let raster = match pattern {
        SamplingPattern::Radial => radial_raster(height, width, acs, target)?,
        _ => spiral_raster(height, width, acs, target)?,
    };
    Ok(SamplingMask {
        height,
        width,
        pattern,
        acs,
        sampled: raster.sampled,
    })
}

fn out_of_range(pattern: &str, target: f64, lo: f64, hi: f64) -> Error {
    Error::invalid(format!(
        "{pattern} mask cannot realize undersampling rate {:.2}% (achievable range {:.2}%..{:.2}%)",
        100.0 * target,
        100.0 * lo,
        100.0 * hi
    ))
}

fn radial_raster(height: usize, width: usize, acs: usize, target: f64) -> Result<Raster> {
    // Golden angle for lines through the origin (period π).
    let golden = PI * (5f64.sqrt() - 1.0) / 2.0;
    let mut raster = Raster::with_acs(height, width, acs);
    let min_rate = raster.rate();
    if min_rate > target + TRAJECTORY_RATE_TOLERANCE {
        return Err(out_of_range("radial", target, min_rate, 1.0));
    }
    let max_spokes = 8 * height.max(width);
    let mut previous = raster.sampled.clone();
    let mut previous_count = raster.count;
    for k in 0..max_spokes {
        if raster.rate() >= target {
            break;
        }
        previous.clone_from(&raster.sampled);
        previous_count = raster.count;
        raster.spoke(k as f64 * golden);
    }
    let total = (height * width) as f64;
    if raster.rate() < target {
        let hi = raster.rate();
        if target - hi > TRAJECTORY_RATE_TOLERANCE {
            return Err(out_of_range("radial", target, min_rate, hi));
        }
    } else if (previous_count as f64 / total - target).abs() < (raster.rate() - target).abs() {
        raster.sampled = previous;
        raster.count = previous_count;
    }
    if (raster.rate() - target).abs() > TRAJECTORY_RATE_TOLERANCE {
        return Err(out_of_range("radial", target, min_rate, 1.0));
    }
    Ok(raster)
}

fn spiral_raster(height: usize, width: usize, acs: usize, target: f64) -> Result<Raster> {
    let build = |turns: f64| {
        let mut raster = Raster::with_acs(height, width, acs);
        raster.spiral(turns);
        raster
    };
    let r_max = 0.5 * height.min(width) as f64;
    let (mut lo, mut hi) = (0.25, r_max / TRAJECTORY_STEP);
    let lo_rate = build(lo).rate();
    let hi_rate = build(hi).rate();
    if target < lo_rate - TRAJECTORY_RATE_TOLERANCE || target > hi_rate + TRAJECTORY_RATE_TOLERANCE
    {
        return Err(out_of_range("spiral", target, lo_rate, hi_rate));
    }
    let mut best = build(lo);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let raster = build(mid);
        let rate = raster.rate();
        if (rate - target).abs() < (best.rate() - target).abs() {
            best = raster;
            if (rate - target).abs() * (height * width) as f64 <= 0.5 {
                break;
            }
        }
        if rate < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (best.rate() - target).abs() > TRAJECTORY_RATE_TOLERANCE {
        return Err(out_of_range("spiral", target, lo_rate, hi_rate));
    }
    Ok(best)
}
