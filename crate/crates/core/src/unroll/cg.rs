//! Conjugate-gradient data consistency and its adjoint.

use crate::acquisition::{AcquisitionModel, MultiCoilKspace, NormalOperator};
use crate::error::{Error, Result};
use crate::numeric::ComplexGrid;

/// Relative residual at which CG stops before its iteration budget.
pub const CG_TOLERANCE: f64 = 1e-10;

/// Result of a CG run with its residual history.
#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: ComplexGrid,
    pub iterations: usize,
    /// `‖r_k‖` for `k = 0..=iterations`.
    pub residuals: Vec<f64>,
}

/// Solves `(EᴴE + λI) x = rhs` from `x = 0`.
pub fn cg_normal(
    op: &mut NormalOperator<'_>,
    rhs: &ComplexGrid,
    lambda: f64,
    n_iter: usize,
) -> Result<CgOutcome> {
    check_lambda(lambda)?;
    let mut x = rhs.zeros_like();
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut ap = rhs.zeros_like();
    let mut rs = r.norm_sqr();
    let rhs_norm = rs.sqrt();
    if !rhs_norm.is_finite() {
        return Err(Error::NonFinite {
            stage: "cg",
            iteration: 0,
        });
    }
    let mut residuals = vec![rhs_norm];
    let mut iterations = 0;
    if rhs_norm == 0.0 {
        return Ok(CgOutcome {
            x,
            iterations,
            residuals,
        });
    }
    for k in 1..=n_iter {
        op.apply(&p, lambda, &mut ap);
        let alpha = rs / p.real_dot(&ap);
        x.axpy_real(alpha, &p);
        r.axpy_real(-alpha, &ap);
        let rs_new = r.norm_sqr();
        if !alpha.is_finite() || !rs_new.is_finite() {
            return Err(Error::NonFinite {
                stage: "cg",
                iteration: k,
            });
        }
        iterations = k;
        residuals.push(rs_new.sqrt());
        if rs_new.sqrt() < CG_TOLERANCE * rhs_norm {
            break;
        }
        let beta = rs_new / rs;
        for (pv, rv) in p.data_mut().iter_mut().zip(r.data()) {
            *pv = rv + *pv * beta;
        }
        rs = rs_new;
    }
    Ok(CgOutcome {
        x,
        iterations,
        residuals,
    })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    Ok(())
}

/// `Eᴴy + λz`.
pub(crate) fn dc_rhs(eh_y: &ComplexGrid, z: &ComplexGrid, lambda: f64) -> ComplexGrid {
    let mut rhs = eh_y.clone();
    rhs.axpy_real(lambda, z);
    rhs
}

/// `n_iter` CG iterations on `(EᴴE + λI) x = Eᴴy + λz`, starting from zero.
pub fn cg_solve(
    z: &ComplexGrid,
    y: &MultiCoilKspace,
    model: &AcquisitionModel,
    lambda: f64,
    n_iter: usize,
) -> Result<ComplexGrid> {
    check_lambda(lambda)?;
    z.check_shape(model.shape())?;
    let eh_y = model.adjoint(y)?;
    let rhs = dc_rhs(&eh_y, z, lambda);
    Ok(cg_normal(&mut model.normal_operator(), &rhs, lambda, n_iter)?.x)
}

/// Reverse pass of the DC solve `x = A⁻¹(Eᴴy + λz)` with `A = EᴴE + λI`.
///
/// Returns `(λ·A⁻¹g, Re⟨A⁻¹g, z − x⟩)` for upstream gradient `g`.
pub fn dc_backward(
    grad_x: &ComplexGrid,
    z: &ComplexGrid,
    x: &ComplexGrid,
    model: &AcquisitionModel,
    lambda: f64,
    n_iter: usize,
) -> Result<(ComplexGrid, f64)> {
    dc_backward_with(&mut model.normal_operator(), grad_x, z, x, lambda, n_iter)
}

pub(crate) fn dc_backward_with(
    op: &mut NormalOperator<'_>,
    grad_x: &ComplexGrid,
    z: &ComplexGrid,
    x: &ComplexGrid,
    lambda: f64,
    n_iter: usize,
) -> Result<(ComplexGrid, f64)> {
    if !grad_x.is_finite() {
        return Err(Error::NonFinite {
            stage: "dc backward input",
            iteration: 0,
        });
    }
    let w = cg_normal(op, grad_x, lambda, n_iter)?.x;
    let grad_lambda = w.real_dot(&z.sub(x));
    Ok((w.scaled(lambda), grad_lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::{synth_sensitivities, SamplingMask, SamplingPattern, SensitivityMaps};
    use crate::numeric::{fft2c, Rng, C64};

    fn random_grid(h: usize, w: usize, rng: &mut Rng) -> ComplexGrid {
        ComplexGrid::from_fn(h, w, |_, _| C64::new(rng.normal(), rng.normal()))
    }

    fn random_model(h: usize, w: usize, coils: usize, rng: &mut Rng) -> AcquisitionModel {
        let maps =
            SensitivityMaps::new((0..coils).map(|_| random_grid(h, w, rng)).collect()).unwrap();
        let mask = SamplingMask::generate(SamplingPattern::RandomLines, h, w, 2.0, 2, rng).unwrap();
        AcquisitionModel::new(maps, mask).unwrap()
    }

    /// Dense `A = EᴴE + λI` assembled column by column, solved by Gaussian
    /// elimination with partial pivoting.
    fn dense_solve(model: &AcquisitionModel, rhs: &ComplexGrid, lambda: f64) -> ComplexGrid {
        let (h, w) = model.shape();
        let n = h * w;
        let mut a = vec![vec![C64::new(0.0, 0.0); n + 1]; n];
        for j in 0..n {
            let mut e = ComplexGrid::zeros(h, w);
            e.data_mut()[j] = C64::new(1.0, 0.0);
            let col = model.adjoint(&model.forward(&e).unwrap()).unwrap();
            for i in 0..n {
                a[i][j] = col.data()[i]
                    + if i == j {
                        C64::new(lambda, 0.0)
                    } else {
                        C64::new(0.0, 0.0)
                    };
            }
        }
        for i in 0..n {
            a[i][n] = rhs.data()[i];
        }
        for k in 0..n {
            let piv = (k..n)
                .max_by(|&p, &q| a[p][k].norm().partial_cmp(&a[q][k].norm()).unwrap())
                .unwrap();
            a.swap(k, piv);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..=n {
                    let v = a[k][j];
                    a[i][j] -= f * v;
                }
            }
        }
        let mut x = vec![C64::new(0.0, 0.0); n];
        for i in (0..n).rev() {
            let mut s = a[i][n];
            for j in i + 1..n {
                s -= a[i][j] * x[j];
            }
            x[i] = s / a[i][i];
        }
        ComplexGrid::from_vec(h, w, x).unwrap()
    }

    #[test]
    fn matches_dense_solve() {
        let mut rng = Rng::new(21);
        for &lambda in &[1e-3, 0.05, 10.0] {
            let model = random_model(8, 8, 2, &mut rng);
            let z = random_grid(8, 8, &mut rng);
            let y = model.forward(&random_grid(8, 8, &mut rng)).unwrap();
            let x = cg_solve(&z, &y, &model, lambda, 500).unwrap();
            let rhs = dc_rhs(&model.adjoint(&y).unwrap(), &z, lambda);
            let expected = dense_solve(&model, &rhs, lambda);
            let rel = x.sub(&expected).norm() / expected.norm();
            assert!(rel < 1e-8, "lambda {lambda}: rel {rel}");
        }
    }

    #[test]
    fn unitary_case_inverts_the_fft() {
        let mut rng = Rng::new(22);
        let maps = synth_sensitivities(1, 16, 16).unwrap();
        let model = AcquisitionModel::new(maps, SamplingMask::full(16, 16)).unwrap();
        let img = random_grid(16, 16, &mut rng);
        let y = model.forward(&img).unwrap();
        let x = cg_solve(&img.zeros_like(), &y, &model, 1e-8, 20).unwrap();
        assert!(x.sub(&img).norm() / img.norm() < 1e-5);
        assert!(y.coil(0).sub(&fft2c(&img)).norm() < 1e-10);
    }

    #[test]
    fn large_lambda_returns_prior() {
        let mut rng = Rng::new(23);
        let model = random_model(8, 8, 2, &mut rng);
        let z = random_grid(8, 8, &mut rng);
        let y = MultiCoilKspace::zeros(2, 8, 8);
        let x = cg_solve(&z, &y, &model, 1e6, 20).unwrap();
        assert!(x.sub(&z).norm() / z.norm() < 1e-5);
    }

    #[test]
    fn zero_rhs_and_bad_lambda() {
        let mut rng = Rng::new(24);
        let model = random_model(8, 8, 2, &mut rng);
        let y = MultiCoilKspace::zeros(2, 8, 8);
        let z = ComplexGrid::zeros(8, 8);
        assert_eq!(cg_solve(&z, &y, &model, 0.1, 5).unwrap(), z);
        assert!(cg_solve(&z, &y, &model, 0.0, 5).is_err());
        assert!(cg_solve(&z, &y, &model, -1.0, 5).is_err());
        assert!(cg_solve(&ComplexGrid::zeros(8, 9), &y, &model, 0.1, 5).is_err());
    }

    #[test]
    fn non_finite_input_names_iteration() {
        let mut rng = Rng::new(25);
        let model = random_model(8, 8, 2, &mut rng);
        let mut z = random_grid(8, 8, &mut rng);
        z.data_mut()[3] = C64::new(f64::NAN, 0.0);
        let err = cg_solve(&z, &MultiCoilKspace::zeros(2, 8, 8), &model, 0.1, 5).unwrap_err();
        assert!(matches!(err, Error::NonFinite { stage: "cg", .. }));
    }

    #[test]
    fn error_a_norm_is_non_increasing() {
        let mut rng = Rng::new(26);
        let model = random_model(16, 16, 2, &mut rng);
        let rhs = random_grid(16, 16, &mut rng);
        let lambda = 0.05;
        let exact = cg_normal(&mut model.normal_operator(), &rhs, lambda, 1000)
            .unwrap()
            .x;
        let mut op = model.normal_operator();
        let mut last = f64::INFINITY;
        for k in 0..15 {
            let xk = cg_normal(&mut op, &rhs, lambda, k).unwrap().x;
            let e = xk.sub(&exact);
            let mut ae = e.zeros_like();
            op.apply(&e, lambda, &mut ae);
            let a_norm = e.real_dot(&ae).sqrt();
            assert!(
                a_norm <= last * (1.0 + 1e-12) + 1e-14,
                "iteration {k}: {a_norm} > {last}"
            );
            last = a_norm;
        }
    }

    #[test]
    fn backward_zero_and_identity_limits() {
        let mut rng = Rng::new(27);
        let model = random_model(8, 8, 2, &mut rng);
        let z = random_grid(8, 8, &mut rng);
        let x = cg_solve(&z, &MultiCoilKspace::zeros(2, 8, 8), &model, 1e6, 20).unwrap();
        let (gz, gl) = dc_backward(&z.zeros_like(), &z, &x, &model, 1e6, 20).unwrap();
        assert_eq!(gz.norm(), 0.0);
        assert_eq!(gl, 0.0);

        let g = random_grid(8, 8, &mut rng);
        let (gz, _) = dc_backward(&g, &z, &x, &model, 1e6, 20).unwrap();
        assert!(gz.sub(&g).norm() / g.norm() < 1e-5);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = Rng::new(28);
        let model = random_model(8, 8, 2, &mut rng);
        let y = model.forward(&random_grid(8, 8, &mut rng)).unwrap();
        let z = random_grid(8, 8, &mut rng);
        let g = random_grid(8, 8, &mut rng);
        let lambda = 0.05;
        let iters = 500;
        let probe =
            |z: &ComplexGrid, l: f64| cg_solve(z, &y, &model, l, iters).unwrap().real_dot(&g);
        let x = cg_solve(&z, &y, &model, lambda, iters).unwrap();
        let (gz, gl) = dc_backward(&g, &z, &x, &model, lambda, iters).unwrap();

        let eps = 1e-6;
        let fd_l = (probe(&z, lambda + eps) - probe(&z, lambda - eps)) / (2.0 * eps);
        assert!(
            (fd_l - gl).abs() / gl.abs() < 1e-5,
            "lambda: fd {fd_l} vs {gl}"
        );

        // x is affine in z, so a wide step costs no truncation error and
        // keeps the probe difference far above the solver tolerance.
        let eps = 1e-2;
        for idx in [0, 9, 27, 63] {
            for (unit, part) in [(C64::new(1.0, 0.0), 0), (C64::new(0.0, 1.0), 1)] {
                let mut up = z.clone();
                up.data_mut()[idx] += unit * eps;
                let mut down = z.clone();
                down.data_mut()[idx] -= unit * eps;
                let fd = (probe(&up, lambda) - probe(&down, lambda)) / (2.0 * eps);
                let an = if part == 0 {
                    gz.data()[idx].re
                } else {
                    gz.data()[idx].im
                };
                assert!(
                    (fd - an).abs() / an.abs().max(1e-3) < 1e-5,
                    "z[{idx}] part {part}: fd {fd} vs {an}"
                );
            }
        }
    }
}
