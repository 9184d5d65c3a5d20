//! Lyapunov–Schmidt reduction at a degenerate critical point.
//!
//! Chart coordinates: `ξ = φ + z` with `φ = Σ cᵢ kᵢ` in the kernel and
//! `z = Z y` in `K^⊥ ∩ T_v𝓑`, where the columns of `Z` are an orthonormal
//! basis of the nodal vectors annihilated by `ℓ` and by `M kᵢ`. Since `Q` is
//! zero-homogeneous, `Q(Ψ(ξ)) = Q(v + ξ)` and the correction solves
//! `Zᵀ ∇Q(v + φ + Z y) = 0`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use serde::Serialize;

use crate::energy::{
    self, ambient_gradient, ambient_hessian, chart_point, energy_deficit, w12_norm, NormalizedState,
};
use crate::error::{Error, Result};
use crate::fit::{fit_power_law, PowerFit};
use crate::linalg::{complement_basis, generalized_symmetric_eigen};
use crate::spectrum::KernelSplit;

pub const DEFAULT_NEWTON_TOL: f64 = 1e-11;
pub const DEFAULT_MAX_NEWTON: usize = 30;
/// Initial chart radius relative to `‖v‖_{W^{1,2}}`.
pub const RADIUS_FRACTION: f64 = 0.1;
pub const MAX_SHRINKS: usize = 4;
/// Reduced-energy gaps at or below this are treated as noise.
pub const NOISE_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct ReductionChart {
    v: NormalizedState,
    split: KernelSplit,
    newton_tol: f64,
    max_newton: usize,
    radius: f64,
    shrinks: usize,
    zperp: DMatrix<f64>,
    gram: Cholesky<f64, Dyn>,
}

#[derive(Debug, Clone)]
pub struct Correction {
    pub z: DVector<f64>,
    pub iterations: usize,
    /// Dual-norm `K^⊥` gradient residual at the returned point.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedSample {
    pub direction: usize,
    pub scale: f64,
    pub phi_coords: Vec<f64>,
    pub q_value: f64,
    /// `q(φ) − q(0)`, computed without cancellation.
    pub gap: f64,
    pub correction_norm: f64,
    pub newton_iters: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrability {
    Nondegenerate,
    Integrable,
    Nonintegrable,
}

impl ReductionChart {
    pub fn new(
        v: NormalizedState,
        split: KernelSplit,
        newton_tol: f64,
        max_newton: usize,
    ) -> Result<Self> {
        if split.kernel_dim == 0 {
            return Err(Error::TrivialKernel);
        }
        if !(newton_tol > 0.0) || max_newton == 0 {
            return Err(Error::InvalidInput(
                "newton_tol and max_newton must be positive".into(),
            ));
        }
        let ops = v.ops();
        let mut constraints = vec![v.tangent_functional()];
        constraints.extend(split.k_basis.iter().map(|k| ops.mass().component_mul(k)));
        let zperp = complement_basis(ops.len(), &constraints)?;
        let gram = (zperp.transpose() * ops.w12() * &zperp)
            .cholesky()
            .ok_or_else(|| {
                Error::LinearAlgebra("W^{1,2} Gram on the complement is not definite".into())
            })?;
        let radius = RADIUS_FRACTION * w12_norm(ops, v.values());
        Ok(ReductionChart {
            v,
            split,
            newton_tol,
            max_newton,
            radius,
            shrinks: 0,
            zperp,
            gram,
        })
    }

    pub fn v(&self) -> &NormalizedState {
        &self.v
    }

    pub fn split(&self) -> &KernelSplit {
        &self.split
    }

    pub fn kernel_dim(&self) -> usize {
        self.split.kernel_dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn newton_tol(&self) -> f64 {
        self.newton_tol
    }

    /// Halves the chart radius; `false` once the shrink budget is spent.
    pub fn shrink(&mut self) -> bool {
        if self.shrinks >= MAX_SHRINKS {
            return false;
        }
        self.shrinks += 1;
        self.radius *= 0.5;
        log::warn!("chart radius halved to {:.3e}", self.radius);
        true
    }

    /// `φ = Σ cᵢ kᵢ`.
    pub fn kernel_vector(&self, coords: &[f64]) -> Result<DVector<f64>> {
        if coords.len() != self.split.kernel_dim {
            return Err(Error::InvalidInput(format!(
                "{} coordinates for a {}-dimensional kernel",
                coords.len(),
                self.split.kernel_dim
            )));
        }
        let mut phi = DVector::zeros(self.v.ops().len());
        for (c, k) in coords.iter().zip(&self.split.k_basis) {
            phi.axpy(*c, k, 1.0);
        }
        Ok(phi)
    }

    fn residual(&self, u: &DVector<f64>) -> (DVector<f64>, f64) {
        let r = self.zperp.transpose() * ambient_gradient(self.v.ops(), u);
        let n = r.dot(&self.gram.solve(&r)).max(0.0).sqrt();
        (r, n)
    }

    /// The correction `F(φ) ∈ K^⊥` by damped Newton.
    pub fn solve_correction(&self, coords: &[f64]) -> Result<Correction> {
        let phi = self.kernel_vector(coords)?;
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > self.radius {
            return Err(Error::OutsideChart {
                norm,
                radius: self.radius,
            });
        }
        let len = self.v.ops().len();
        if norm == 0.0 {
            return Ok(Correction {
                z: DVector::zeros(len),
                iterations: 0,
                residual: 0.0,
            });
        }
        let base = self.v.values() + &phi;
        let mut y = DVector::zeros(self.zperp.ncols());
        let (mut r, mut res) = self.residual(&base);
        let mut iters = 0;
        while res > self.newton_tol {
            if iters >= self.max_newton {
                return Err(Error::NewtonFailed {
                    iterations: iters,
                    residual: res,
                });
            }
            let u = &base + &self.zperp * &y;
            let jac = self.zperp.transpose() * ambient_hessian(self.v.ops(), &u) * &self.zperp;
            let step = jac.lu().solve(&(-&r)).ok_or(Error::SingularHessian)?;
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..12 {
                let yc = &y + &step * t;
                let (rc, resc) = self.residual(&(&base + &self.zperp * &yc));
                if resc < res {
                    y = yc;
                    r = rc;
                    res = resc;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            iters += 1;
            if !accepted {
                return Err(Error::NewtonFailed {
                    iterations: iters,
                    residual: res,
                });
            }
        }
        Ok(Correction {
            z: &self.zperp * y,
            iterations: iters,
            residual: res,
        })
    }

    /// `q(φ) = Q(Ψ(φ + F(φ)))` with the gap to `q(0)`.
    pub fn reduced_energy(&self, coords: &[f64]) -> Result<ReducedSample> {
        let corr = self.solve_correction(coords)?;
        let xi = self.kernel_vector(coords)? + &corr.z;
        let (u, delta) = chart_point(&self.v, &xi);
        let ops = self.v.ops();
        Ok(ReducedSample {
            direction: 0,
            scale: coords.iter().map(|c| c * c).sum::<f64>().sqrt(),
            phi_coords: coords.to_vec(),
            q_value: energy::quotient(ops, &u),
            gap: energy_deficit(&self.v, &delta),
            correction_norm: w12_norm(ops, &corr.z),
            newton_iters: corr.iterations,
            residual: corr.residual,
        })
    }

    /// The state `Ψ(φ + F(φ))`.
    pub fn member(&self, coords: &[f64]) -> Result<NormalizedState> {
        let corr = self.solve_correction(coords)?;
        let xi = self.kernel_vector(coords)? + &corr.z;
        energy::normalize(self.v.ops(), &(self.v.values() + xi))
    }

    /// One sample per `(direction, scale)`, ordered by direction then scale.
    /// Directions are normalized. On a Newton failure the radius is halved and
    /// scales beyond the new radius are dropped with a warning.
    pub fn sample_reduced(
        &mut self,
        directions: &[Vec<f64>],
        scales: &[f64],
    ) -> Result<Vec<ReducedSample>> {
        if let Some(&s) = scales.iter().find(|&&s| !(s >= 0.0) || s > self.radius) {
            return Err(Error::OutsideChart {
                norm: s,
                radius: self.radius,
            });
        }
        let dirs: Vec<Vec<f64>> = directions
            .iter()
            .map(|d| {
                let n = d.iter().map(|c| c * c).sum::<f64>().sqrt();
                if n == 0.0 || d.len() != self.split.kernel_dim {
                    Err(Error::InvalidInput(
                        "direction must be a nonzero kernel vector".into(),
                    ))
                } else {
                    Ok(d.iter().map(|c| c / n).collect())
                }
            })
            .collect::<Result<_>>()?;
        let mut scales = scales.to_vec();
        loop {
            let jobs: Vec<(usize, f64)> = (0..dirs.len())
                .flat_map(|i| scales.iter().map(move |&s| (i, s)))
                .collect();
            let out: Vec<Result<ReducedSample>> = jobs
                .par_iter()
                .map(|&(i, s)| {
                    let c: Vec<f64> = dirs[i].iter().map(|x| x * s).collect();
                    self.reduced_energy(&c).map(|mut r| {
                        r.direction = i;
                        r.scale = s;
                        r
                    })
                })
                .collect();
            match out.iter().find_map(|r| r.as_ref().err()) {
                None => return out.into_iter().collect(),
                Some(Error::NewtonFailed { .. }) if self.shrink() => {
                    let before = scales.len();
                    let radius = self.radius;
                    scales.retain(|&s| s <= radius);
                    log::warn!(
                        "dropped {} scales beyond radius {radius:.3e}",
                        before - scales.len()
                    );
                }
                Some(e) => return Err(e.clone()),
            }
        }
    }

    /// Smallest `H[z,z] / ‖z‖²_{W^{1,2}}` over `K^⊥ ∩ T_v𝓑`.
    pub fn coercivity_constant(&self) -> Result<f64> {
        let h = self.zperp.transpose() * energy::hessian_form(&self.v) * &self.zperp;
        let g = self.zperp.transpose() * self.v.ops().w12() * &self.zperp;
        let ge = generalized_symmetric_eigen(&h, &g)?;
        Ok(ge.values[0])
    }

    /// Columns spanning `K^⊥ ∩ T_v𝓑`.
    pub fn complement(&self) -> &DMatrix<f64> {
        &self.zperp
    }
}

/// Growth exponent of `q(φ) − q(0)`: the minimum over directions of the
/// fitted log-log slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthFit {
    pub exponent: f64,
    pub constant: f64,
    pub r2: f64,
    pub window: (f64, f64),
    pub direction: usize,
}

pub fn fit_growth_exponent(samples: &[ReducedSample]) -> Result<GrowthFit> {
    let mut dirs: Vec<usize> = samples.iter().map(|s| s.direction).collect();
    dirs.sort_unstable();
    dirs.dedup();
    if dirs.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    let mut best: Option<GrowthFit> = None;
    for d in dirs {
        let mut pts: Vec<(f64, f64)> = samples
            .iter()
            .filter(|s| s.direction == d && s.scale > 0.0)
            .map(|s| (s.scale, s.gap))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total = pts.len();
        pts.retain(|p| p.1 > NOISE_FLOOR);
        if pts.len() < total {
            log::info!(
                "direction {d}: {} samples below the noise floor excluded",
                total - pts.len()
            );
        }
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let fit: PowerFit = fit_power_law(&x, &y, 1.0).map_err(|e| match e {
            Error::InsufficientData(m) if x.len() < total => {
                Error::BelowNoiseFloor(format!("direction {d}: {m}"))
            }
            other => other,
        })?;
        if best.is_none_or(|b| fit.exponent < b.exponent) {
            best = Some(GrowthFit {
                exponent: fit.exponent,
                constant: fit.constant,
                r2: fit.r2,
                window: fit.window,
                direction: d,
            });
        }
    }
    Ok(best.expect("at least one direction"))
}

pub fn detect_integrability(
    kernel_dim: usize,
    samples: &[ReducedSample],
    q0: f64,
    tol: f64,
) -> Integrability {
    if kernel_dim == 0 {
        return Integrability::Nondegenerate;
    }
    let worst = samples.iter().fold(0.0f64, |a, s| a.max(s.gap.abs()));
    if worst <= tol * q0.abs() {
        Integrability::Integrable
    } else {
        Integrability::Nonintegrable
    }
}

/// Geometric ladder of `steps` values from `min` to `max`.
pub fn geometric_ladder(min: f64, max: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![min],
        _ => (0..steps)
            .map(|i| min * (max / min).powf(i as f64 / (steps - 1) as f64))
            .collect(),
    }
}
