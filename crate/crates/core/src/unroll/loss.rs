//! Training loss: normalized ℓ₂+ℓ₁ k-space data term plus weighted total variation.
//!
//! Gradients of real losses with respect to complex values use the
//! convention `∂L/∂Re + i·∂L/∂Im`.

use crate::acquisition::{AcquisitionModel, MultiCoilKspace};
use crate::error::{Error, Result};
use crate::numeric::{ComplexGrid, C64};

/// `‖y−ŷ‖₂/‖y‖₂ + ‖y−ŷ‖₁/‖y‖₁` and its gradient with respect to `ŷ`.
///
/// Both arguments are expected to be zero outside the sampled locations, so
/// the sums run over acquired samples only.
pub fn loss_dc(y: &MultiCoilKspace, y_hat: &MultiCoilKspace) -> Result<(f64, MultiCoilKspace)> {
    if y.num_coils() != y_hat.num_coils() {
        return Err(Error::invalid(format!(
            "k-space has {} coils, prediction has {}",
            y.num_coils(),
            y_hat.num_coils()
        )));
    }
    y_hat.check_shape(y.shape())?;
    let (n2, n1) = (y.norm(), y.norm_l1());
    if n2 == 0.0 || n1 == 0.0 {
        return Err(Error::invalid(
            "measured k-space is all zero; data loss is undefined",
        ));
    }
    let r = y.sub(y_hat);
    let r2 = r.norm();
    let r1 = r.norm_l1();
    let mut grad = r;
    for coil in grad.coils_mut() {
        for v in coil.data_mut() {
            let m = v.norm();
            *v = if m == 0.0 {
                C64::new(0.0, 0.0)
            } else {
                -(*v / r2 / n2 + *v / m / n1)
            };
        }
    }
    Ok((r2 / n2 + r1 / n1, grad))
}

/// Total variation `Σ|x(r+1,c)−x(r,c)| + Σ|x(r,c+1)−x(r,c)|` with the
/// complex modulus and no wraparound. Zero differences contribute no gradient.
pub fn loss_tv(x: &ComplexGrid) -> (f64, ComplexGrid) {
    let (h, w) = x.shape();
    let d = x.data();
    let mut grad = x.zeros_like();
    let g = grad.data_mut();
    let mut total = 0.0;
    let mut visit = |a: usize, b: usize, g: &mut [C64]| {
        let diff = d[b] - d[a];
        let m = diff.norm();
        if m > 0.0 {
            total += m;
            let u = diff / m;
            g[b] += u;
            g[a] -= u;
        }
    };
    for r in 0..h {
        for c in 0..w {
            let p = r * w + c;
            if r + 1 < h {
                visit(p, p + w, g);
            }
            if c + 1 < w {
                visit(p, p + 1, g);
            }
        }
    }
    (total, grad)
}

/// Value and gradients of `L_DC(y, E x̂) + λ_s·L_TV(x̂)`.
#[derive(Clone, Debug)]
pub struct LossBreakdown {
    pub total: f64,
    pub dc: f64,
    pub tv: f64,
    pub grad_x: ComplexGrid,
    /// Equals `tv`.
    pub grad_lambda_s: f64,
}

pub fn total_loss(
    y: &MultiCoilKspace,
    x_hat: &ComplexGrid,
    model: &AcquisitionModel,
    lambda_s: f64,
) -> Result<LossBreakdown> {
    let y_hat = model.forward(x_hat)?;
    let (dc, g_y) = loss_dc(y, &y_hat)?;
    let (tv, g_tv) = loss_tv(x_hat);
    let mut grad_x = model.adjoint(&g_y)?;
    if lambda_s != 0.0 {
        grad_x.axpy_real(lambda_s, &g_tv);
    }
    Ok(LossBreakdown {
        total: dc + lambda_s * tv,
        dc,
        tv,
        grad_x,
        grad_lambda_s: tv,
    })
}
