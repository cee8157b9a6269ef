//! Square nonlinear systems `F(x) = 0` with a forward-difference Jacobian.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Powell dogleg trust region on the scaled Gauss-Newton model.
    PowellHybrid,
    /// Newton with backtracking on `‖F‖²`.
    NewtonLineSearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Convergence threshold on `‖F‖∞`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Relative forward-difference step; column `j` uses `step · max(1, |x_j|)`.
    pub fd_step: f64,
    /// Initial number of continuation increments.
    pub continuation_steps: usize,
    pub backend: Backend,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance: 1e-12,
            max_iterations: 100,
            fd_step: f64::EPSILON.sqrt(),
            continuation_steps: 20,
            backend: Backend::PowellHybrid,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::Config(format!("tolerance must be > 0, got {}", self.tolerance)));
        }
        if !(self.fd_step > 0.0 && self.fd_step < 1.0) {
            return Err(Error::Config(format!(
                "fd_step must lie in (0, 1), got {}",
                self.fd_step
            )));
        }
        if self.max_iterations == 0 || self.continuation_steps == 0 {
            return Err(Error::Config("iteration and step counts must be ≥ 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearReport {
    pub x: Vec<f64>,
    pub residual: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub residual_norm: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn check_finite(r: &[f64]) -> Result<()> {
    match r.iter().position(|v| !v.is_finite()) {
        Some(row) => Err(Error::NonFiniteResidual { row }),
        None => Ok(()),
    }
}

/// Errors a trial point may legitimately raise; the step is then rejected.
fn recoverable(err: &Error) -> bool {
    matches!(
        err,
        Error::InvertedElement { .. } | Error::Domain(_) | Error::EnergyOverflow { .. } | Error::DegenerateFace { .. }
    )
}

/// Forward-difference Jacobian, columns evaluated in parallel. A column whose
/// forward point is inadmissible falls back to a backward difference.
pub fn fd_jacobian<F>(f: &F, x: &[f64], fx: &[f64], rel_step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let n = x.len();
    let m = fx.len();
    let columns = (0..n)
        .into_par_iter()
        .map(|j| {
            let h = rel_step * x[j].abs().max(1.0);
            let mut xp = x.to_vec();
            xp[j] += h;
            let (fp, step) = match f(&xp) {
                Ok(fp) => (fp, h),
                Err(e) if recoverable(&e) => {
                    xp[j] = x[j] - h;
                    (f(&xp)?, -h)
                }
                Err(e) => return Err(e),
            };
            check_finite(&fp)?;
            Ok(fp.iter().zip(fx).map(|(a, b)| (a - b) / step).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(m, n, |i, j| columns[j][i]))
}

/// Minimum-norm least-squares solution of `J p = rhs`; LU first, SVD when singular.
fn linear_solve(j: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(p) = j.clone().lu().solve(rhs) {
        if p.iter().all(|v| v.is_finite()) {
            let back = j * &p - rhs;
            if back.norm() <= 1e-8 * rhs.norm().max(f64::MIN_POSITIVE) {
                return Ok(p);
            }
        }
    }
    let svd = j.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) {
        return Err(Error::Singular("Jacobian is zero".into()));
    }
    svd.solve(rhs, smax * 1e-13).map_err(|e| Error::Singular(e.to_string()))
}

pub fn solve_nonlinear<F>(f: &F, x0: &[f64], config: &SolverConfig) -> Result<NonlinearReport>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    config.validate()?;
    let fx = f(x0)?;
    check_finite(&fx)?;
    if fx.len() != x0.len() {
        return Err(Error::Config(format!(
            "system is not square: {} unknowns, {} residuals",
            x0.len(),
            fx.len()
        )));
    }
    match config.backend {
        Backend::PowellHybrid => dogleg(f, x0.to_vec(), fx, config),
        Backend::NewtonLineSearch => newton(f, x0.to_vec(), fx, config),
    }
}

fn dogleg<F>(f: &F, mut x: Vec<f64>, mut fx: Vec<f64>, config: &SolverConfig) -> Result<NonlinearReport>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let n = x.len();
    let mut evaluations = 1;
    let mut iterations = 0;
    let mut diag = DVector::<f64>::zeros(n);
    let mut delta = 0.0;
    let mut jac: Option<DMatrix<f64>> = None;
    let mut gn: Option<DVector<f64>> = None;

    while inf_norm(&fx) > config.tolerance && iterations < config.max_iterations {
        iterations += 1;
        let fv = DVector::from_column_slice(&fx);
        if jac.is_none() {
            let j = fd_jacobian(f, &x, &fx, config.fd_step)?;
            evaluations += n;
            for c in 0..n {
                let norm = j.column(c).norm();
                diag[c] = diag[c].max(if norm > 0.0 { norm } else { 1.0 });
            }
            if delta == 0.0 {
                let xn = DVector::from_column_slice(&x).component_mul(&diag).norm();
                delta = if xn > 0.0 { 100.0 * xn } else { 100.0 };
            }
            gn = Some(linear_solve(&j, &(-&fv))?);
            jac = Some(j);
        }
        let j = jac.as_ref().unwrap();
        let p_gn = gn.as_ref().unwrap();

        let scaled_norm = |p: &DVector<f64>| p.component_mul(&diag).norm();
        let p = if scaled_norm(p_gn) <= delta {
            p_gn.clone()
        } else {
            // steepest descent in scaled variables
            let g = (j.transpose() * &fv).component_div(&diag);
            let gnorm = g.norm();
            let dir = -g.component_div(&diag); // unscaled direction of -D⁻²Jᵀf
            let jd = j * &dir;
            let alpha = if jd.norm() > 0.0 {
                gnorm * gnorm / jd.norm_squared()
            } else {
                0.0
            };
            let p_sd = &dir * alpha;
            let sd_norm = scaled_norm(&p_sd);
            if sd_norm >= delta || alpha == 0.0 {
                &dir * (delta / gnorm.max(f64::MIN_POSITIVE))
            } else {
                let a = (p_gn - &p_sd).component_mul(&diag);
                let b = p_sd.component_mul(&diag);
                let aa = a.norm_squared();
                let ab = a.dot(&b);
                let bb = b.norm_squared();
                let tau = (-ab + (ab * ab + aa * (delta * delta - bb)).max(0.0).sqrt()) / aa;
                &p_sd + (p_gn - &p_sd) * tau
            }
        };
        let pnorm = scaled_norm(&p);
        let predicted = fv.norm_squared() - (&fv + j * &p).norm_squared();
        let trial: Vec<f64> = x.iter().zip(p.iter()).map(|(a, b)| a + b).collect();
        evaluations += 1;
        let (rho, ftrial) = match f(&trial) {
            Ok(ft) => {
                check_finite(&ft)?;
                let actual = fv.norm_squared() - ft.iter().map(|v| v * v).sum::<f64>();
                let rho = if predicted > 0.0 {
                    actual / predicted
                } else if actual > 0.0 {
                    1.0
                } else {
                    -1.0
                };
                (rho, Some(ft))
            }
            Err(e) if recoverable(&e) => (-1.0, None),
            Err(e) => return Err(e),
        };
        if rho < 0.25 {
            delta = 0.5 * delta.min(pnorm);
        } else if rho > 0.75 {
            delta = delta.max(2.0 * pnorm);
        }
        if rho > 1e-4 {
            x = trial;
            fx = ftrial.unwrap();
            jac = None;
        }
        let xn = DVector::from_column_slice(&x).component_mul(&diag).norm();
        if delta <= 1e-15 * xn.max(1.0) {
            break;
        }
    }
    let residual_norm = inf_norm(&fx);
    Ok(NonlinearReport {
        converged: residual_norm <= config.tolerance,
        x,
        residual: fx,
        iterations,
        evaluations,
        residual_norm,
    })
}

fn newton<F>(f: &F, mut x: Vec<f64>, mut fx: Vec<f64>, config: &SolverConfig) -> Result<NonlinearReport>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let n = x.len();
    let mut evaluations = 1;
    let mut iterations = 0;
    while inf_norm(&fx) > config.tolerance && iterations < config.max_iterations {
        iterations += 1;
        let j = fd_jacobian(f, &x, &fx, config.fd_step)?;
        evaluations += n;
        let fv = DVector::from_column_slice(&fx);
        let p = linear_solve(&j, &(-&fv))?;
        let phi0 = fv.norm_squared();
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(p.iter()).map(|(a, b)| a + t * b).collect();
            evaluations += 1;
            match f(&trial) {
                Ok(ft) => {
                    check_finite(&ft)?;
                    let phi = ft.iter().map(|v| v * v).sum::<f64>();
                    if phi <= (1.0 - 1e-4 * t) * phi0 {
                        x = trial;
                        fx = ft;
                        accepted = true;
                        break;
                    }
                }
                Err(e) if recoverable(&e) => {}
                Err(e) => return Err(e),
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let residual_norm = inf_norm(&fx);
    Ok(NonlinearReport {
        converged: residual_norm <= config.tolerance,
        x,
        residual: fx,
        iterations,
        evaluations,
        residual_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn both() -> [SolverConfig; 2] {
        [
            SolverConfig::default(),
            SolverConfig {
                backend: Backend::NewtonLineSearch,
                ..SolverConfig::default()
            },
        ]
    }

    #[test]
    fn linear_system_in_two_iterations() {
        let c = [1.5, -2.0, 3.25];
        let f = |x: &[f64]| Ok(x.iter().zip(&c).map(|(a, b)| a - b).collect());
        for cfg in both() {
            let r = solve_nonlinear(&f, &[0.0; 3], &cfg).unwrap();
            assert!(r.converged);
            assert!(r.iterations <= 2);
            for (a, b) in r.x.iter().zip(&c) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rosenbrock_root() {
        let f = |x: &[f64]| Ok(vec![1.0 - x[0], 10.0 * (x[1] - x[0] * x[0])]);
        for cfg in both() {
            let r = solve_nonlinear(&f, &[-1.2, 1.0], &cfg).unwrap();
            assert!(r.converged, "{cfg:?}: {r:?}");
            assert!((r.x[0] - 1.0).abs() < 1e-12 && (r.x[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rosenbrock_gradient_root() {
        // stationarity of 100 (y - x²)² + (1 - x)²; the merit function ‖∇‖²
        // has spurious minima along the valley, so start inside the basin
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            Ok(vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)])
        };
        for cfg in both() {
            let r = solve_nonlinear(&f, &[0.8, 0.6], &cfg).unwrap();
            assert!(r.converged, "{cfg:?}: {r:?}");
            assert!((r.x[0] - 1.0).abs() < 1e-10 && (r.x[1] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn nan_names_the_row() {
        let f = |x: &[f64]| Ok(vec![x[0], f64::NAN]);
        assert_eq!(
            solve_nonlinear(&f, &[1.0, 1.0], &SolverConfig::default()),
            Err(Error::NonFiniteResidual { row: 1 })
        );
    }

    #[test]
    fn inadmissible_trials_are_rejected() {
        // log barrier: trial steps into x ≤ 0 raise a domain error
        let f = |x: &[f64]| {
            if x[0] <= 0.0 {
                return Err(Error::Domain("x must be positive".into()));
            }
            Ok(vec![x[0].ln() + 5.0])
        };
        for cfg in both() {
            let r = solve_nonlinear(&f, &[1.0], &cfg).unwrap();
            assert!(r.converged);
            assert!((r.x[0] - (-5.0f64).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_jacobian_uses_min_norm_step() {
        // F = (x + y - 2, 2x + 2y - 4): rank one, consistent
        let f = |x: &[f64]| Ok(vec![x[0] + x[1] - 2.0, 2.0 * x[0] + 2.0 * x[1] - 4.0]);
        let r = solve_nonlinear(&f, &[0.0, 0.0], &SolverConfig::default()).unwrap();
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-10 && (r.x[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn bad_config_rejected() {
        let f = |x: &[f64]| Ok(x.to_vec());
        let cfg = SolverConfig {
            tolerance: 0.0,
            ..SolverConfig::default()
        };
        assert!(solve_nonlinear(&f, &[1.0], &cfg).is_err());
        let nonsquare = |_: &[f64]| Ok(vec![1.0, 2.0]);
        assert!(solve_nonlinear(&nonsquare, &[1.0], &SolverConfig::default()).is_err());
    }
}
