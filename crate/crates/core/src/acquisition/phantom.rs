//! Shepp–Logan head phantom (modified, high-contrast intensities).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{ComplexGrid, C64};

/// Intensity, semi-axes, center and rotation (degrees) of one ellipse.
struct Ellipse {
    intensity: f64,
    a: f64,
    b: f64,
    x0: f64,
    y0: f64,
    phi_deg: f64,
}

const ELLIPSES: [Ellipse; 10] = [
    Ellipse {
        intensity: 1.0,
        a: 0.69,
        b: 0.92,
        x0: 0.0,
        y0: 0.0,
        phi_deg: 0.0,
    },
    Ellipse {
        intensity: -0.8,
        a: 0.6624,
        b: 0.874,
        x0: 0.0,
        y0: -0.0184,
        phi_deg: 0.0,
    },
    Ellipse {
        intensity: -0.2,
        a: 0.11,
        b: 0.31,
        x0: 0.22,
        y0: 0.0,
        phi_deg: -18.0,
    },
    Ellipse {
        intensity: -0.2,
        a: 0.16,
        b: 0.41,
        x0: -0.22,
        y0: 0.0,
        phi_deg: 18.0,
    },
    Ellipse {
        intensity: 0.1,
        a: 0.21,
        b: 0.25,
        x0: 0.0,
        y0: 0.35,
        phi_deg: 0.0,
    },
    Ellipse {
        intensity: 0.1,
        a: 0.046,
        b: 0.046,
        x0: 0.0,
        y0: 0.1,
        phi_deg: 0.0,
    },
    Ellipse {
        intensity: 0.1,
        a: 0.046,
        b: 0.046,
        x0: 0.0,
        y0: -0.1,
        phi_deg: 0.0,
    },
    Ellipse {
        intensity: 0.1,
        a: 0.046,
        b: 0.023,
        x0: -0.08,
        y0: -0.605,
        phi_deg: 0.0,
    },
    Ellipse {
        intensity: 0.1,
        a: 0.023,
        b: 0.023,
        x0: 0.0,
        y0: -0.606,
        phi_deg: 0.0,
    },
    Ellipse {
        intensity: 0.1,
        a: 0.023,
        b: 0.046,
        x0: 0.06,
        y0: -0.605,
        phi_deg: 0.0,
    },
];

/// Phase applied to the phantom magnitude.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhantomPhase {
    #[default]
    Zero,
    /// `exp(i·π/2·(x² + y²))` with `x, y ∈ [-1, 1]`.
    Quadratic,
}

/// Real-valued Shepp–Logan phantom with intensities in `[0, 1]`.
pub fn shepp_logan(height: usize, width: usize) -> Result<ComplexGrid> {
    shepp_logan_with_phase(height, width, PhantomPhase::Zero)
}

pub fn shepp_logan_with_phase(
    height: usize,
    width: usize,
    phase: PhantomPhase,
) -> Result<ComplexGrid> {
    if height < 16 || width < 16 {
        return Err(Error::invalid(format!(
            "phantom needs at least 16x16 pixels, got {height}x{width}"
        )));
    }
    Ok(ComplexGrid::from_fn(height, width, |r, c| {
        // Pixel centers in [-1, 1], y pointing up.
        let x = 2.0 * (c as f64 + 0.5) / width as f64 - 1.0;
        let y = 1.0 - 2.0 * (r as f64 + 0.5) / height as f64;
        let value: f64 = ELLIPSES
            .iter()
            .filter(|e| {
                let (s, co) = (e.phi_deg * PI / 180.0).sin_cos();
                let (dx, dy) = (x - e.x0, y - e.y0);
                let u = dx * co + dy * s;
                let v = -dx * s + dy * co;
                (u / e.a).powi(2) + (v / e.b).powi(2) <= 1.0
            })
            .map(|e| e.intensity)
            .sum();
        // Summation order can leave -0.0 or 1e-17 residues.
        let value = value.max(0.0);
        match phase {
            PhantomPhase::Zero => C64::new(value, 0.0),
            PhantomPhase::Quadratic => C64::from_polar(value, 0.5 * PI * (x * x + y * y)),
        }
    }))
}
