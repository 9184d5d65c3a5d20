//! Minimization of the quotient on the unit-volume constraint set.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::disc::{assemble_operators, build_grid, DiscreteOperators};
use crate::energy::{self, dual_norm, el_residual, ElResidual, NormalizedState};
use crate::error::{Error, Result};
use crate::linalg::{complement_basis, generalized_symmetric_eigen};
use crate::model::SymmetricModel;

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
const MAX_NEWTON: usize = 50;
/// Number of Laplace modes excited by random starts.
pub const START_MODES: usize = 5;
/// Sup-norm of a random start perturbation relative to the constant.
pub const START_AMPLITUDE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct MinimizeOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step0: f64,
    pub newton_polish: bool,
    pub seed: u64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            max_iters: 2000,
            grad_tol: 1e-10,
            step0: 1.0,
            newton_polish: true,
            seed: 0,
        }
    }
}

impl MinimizeOptions {
    fn check(&self) -> Result<()> {
        if self.max_iters == 0 || !(self.grad_tol > 0.0) || !(self.step0 > 0.0) {
            return Err(Error::InvalidInput(format!(
                "bad minimize options {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeReport {
    pub v: NormalizedState,
    pub y_est: f64,
    /// `W^{1,2}` dual norm of the projected gradient.
    pub grad_norm: f64,
    pub residual: ElResidual,
    pub iterations: usize,
    pub converged: bool,
    /// Quotient after every accepted step, starting with the initial state.
    pub history: Vec<f64>,
}

fn grad_norm(v: &NormalizedState) -> f64 {
    dual_norm(v.ops(), &energy::gradient(v))
}

/// Clips negatives and renormalizes; `None` if nothing positive is left.
fn retract(ops: &Arc<DiscreteOperators>, u: &DVector<f64>) -> Option<NormalizedState> {
    energy::normalize(ops, &u.map(|x| x.max(0.0))).ok()
}

fn finish(v: NormalizedState, iterations: usize, history: Vec<f64>, tol: f64) -> MinimizeReport {
    let g = grad_norm(&v);
    MinimizeReport {
        y_est: v.quotient(),
        grad_norm: g,
        residual: el_residual(&v),
        iterations,
        converged: g <= tol,
        history,
        v,
    }
}

/// Preconditioned projected gradient descent with Armijo backtracking,
/// optionally followed by a damped Newton polish in the tangent space.
pub fn minimize_energy(
    ops: &Arc<DiscreteOperators>,
    u0: &DVector<f64>,
    opts: &MinimizeOptions,
) -> Result<MinimizeReport> {
    opts.check()?;
    let mut v = energy::normalize(ops, u0)?;
    let mut q = v.quotient();
    let mut history = vec![q];
    let mut iters = 0;
    let mut g = energy::gradient(&v);
    let mut eta = -ops.w12_solve(&g);
    let mut gn = g.dot(&-&eta).max(0.0).sqrt();

    let newton_from = opts.grad_tol.max(1e-6);
    while gn > opts.grad_tol && iters < opts.max_iters {
        if opts.newton_polish && gn <= newton_from {
            break;
        }
        let slope = g.dot(&eta);
        let mut alpha = opts.step0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            if let Some(cand) = retract(ops, &(v.values() + &eta * alpha)) {
                let qc = cand.quotient();
                if qc <= q + ARMIJO * alpha * slope {
                    accepted = Some((cand, qc));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((cand, qc)) = accepted else {
            log::debug!("line search stalled at iteration {iters}");
            break;
        };
        iters += 1;
        v = cand;
        q = qc;
        history.push(q);
        g = energy::gradient(&v);
        eta = -ops.w12_solve(&g);
        gn = g.dot(&-&eta).max(0.0).sqrt();
    }

    if opts.newton_polish && gn > opts.grad_tol {
        let (nv, n_iters) = newton_polish(
            v,
            &mut history,
            opts.grad_tol,
            opts.max_iters.saturating_sub(iters),
        );
        v = nv;
        iters += n_iters;
    }
    Ok(finish(v, iters, history, opts.grad_tol))
}

/// Levenberg-damped Newton on `T_v𝓑`. Steps are accepted when they lower the
/// gradient norm without raising the quotient beyond roundoff.
fn newton_polish(
    mut v: NormalizedState,
    history: &mut Vec<f64>,
    tol: f64,
    budget: usize,
) -> (NormalizedState, usize) {
    let ops = Arc::clone(v.ops());
    let mut iters = 0;
    let mut gn = grad_norm(&v);
    while gn > tol && iters < budget.min(MAX_NEWTON) {
        let Ok(z) = complement_basis(ops.len(), &[v.tangent_functional()]) else {
            break;
        };
        let h = z.transpose() * energy::hessian_form(&v) * &z;
        let gram = z.transpose() * ops.w12() * &z;
        let rhs = -(z.transpose() * energy::gradient(&v));
        let scale = h.amax().max(1.0);
        let mut mu = 0.0;
        let mut stepped = false;
        for _ in 0..30 {
            let sys: DMatrix<f64> = &h + &gram * mu;
            if let Some(ch) = sys.cholesky() {
                let y = ch.solve(&rhs);
                if let Some(cand) = retract(&ops, &(v.values() + &z * y)) {
                    let gc = grad_norm(&cand);
                    let qc = cand.quotient();
                    let q = v.quotient();
                    if gc < gn && qc <= q + 1e-13 * q.abs().max(1.0) {
                        v = cand;
                        gn = gc;
                        history.push(qc);
                        stepped = true;
                        break;
                    }
                }
            }
            mu = if mu == 0.0 { 1e-10 * scale } else { mu * 10.0 };
        }
        if !stepped {
            break;
        }
        iters += 1;
    }
    (v, iters)
}

/// Lowest nonconstant Laplace modes `S φ = μ M φ`, each scaled to unit sup-norm.
pub fn laplace_modes(ops: &DiscreteOperators, count: usize) -> Result<Vec<DVector<f64>>> {
    let ge = generalized_symmetric_eigen(ops.stiffness(), &ops.mass_matrix())?;
    let available = ge.values.len().saturating_sub(1);
    if count > available {
        return Err(Error::ModesOutOfRange {
            requested: count,
            available,
        });
    }
    Ok((1..=count)
        .map(|j| {
            let c = ge.vectors.column(j).into_owned();
            let s = c.amax();
            c / s
        })
        .collect())
}

/// Constant plus Gaussian combination of `modes`, with sup-norm of the
/// perturbation equal to `START_AMPLITUDE`, clipped nonnegative.
pub fn random_start(modes: &[DVector<f64>], len: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let mut pert = DVector::zeros(len);
    for m in modes {
        let c: f64 = StandardNormal.sample(rng);
        pert.axpy(c, m, 1.0);
    }
    let s = pert.amax();
    if s > 0.0 {
        pert *= START_AMPLITUDE / s;
    }
    pert.map(|x| (1.0 + x).max(0.0))
}

/// Multi-start minimization on an `N`-node grid: the constant plus
/// `starts - 1` seeded random starts, run in parallel. Returns the
/// converged report with lowest quotient, then lowest gradient norm, then
/// lowest start index.
pub fn estimate_yamabe_constant(
    m: Arc<SymmetricModel>,
    n: usize,
    starts: usize,
    opts: &MinimizeOptions,
) -> Result<MinimizeReport> {
    let grid = build_grid(&m, n)?;
    let ops = assemble_operators(m, grid)?;
    estimate_on(&ops, starts, opts)
}

pub fn estimate_on(
    ops: &Arc<DiscreteOperators>,
    starts: usize,
    opts: &MinimizeOptions,
) -> Result<MinimizeReport> {
    if starts == 0 {
        return Err(Error::InvalidInput("starts must be at least 1".into()));
    }
    opts.check()?;
    let len = ops.len();
    let mut inits = vec![DVector::from_element(len, 1.0)];
    if starts > 1 {
        let modes = laplace_modes(ops, START_MODES.min(len.saturating_sub(2)))?;
        for i in 1..starts {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(i as u64);
            inits.push(random_start(&modes, len, &mut rng));
        }
    }
    let reports: Vec<(usize, Result<MinimizeReport>)> = inits
        .par_iter()
        .enumerate()
        .map(|(i, u0)| (i, minimize_energy(ops, u0, opts)))
        .collect();
    let mut best: Option<(usize, MinimizeReport)> = None;
    for (i, r) in reports {
        match r {
            Ok(rep) if rep.converged => {
                let better = match &best {
                    None => true,
                    Some((_, b)) => {
                        (rep.y_est, rep.grad_norm).partial_cmp(&(b.y_est, b.grad_norm))
                            == Some(std::cmp::Ordering::Less)
                    }
                };
                if better {
                    best = Some((i, rep));
                }
            }
            Ok(rep) => log::info!("start {i} did not converge (grad {:.3e})", rep.grad_norm),
            Err(e) => log::info!("start {i} failed: {e}"),
        }
    }
    best.map(|(_, r)| r)
        .ok_or(Error::NoStartConverged { starts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{conformal_constant, make_model, ModelSpec};
    use std::f64::consts::PI;

    fn ops(spec: ModelSpec, n: usize) -> Arc<DiscreteOperators> {
        let m = Arc::new(make_model(&spec).unwrap());
        let g = build_grid(&m, n).unwrap();
        assemble_operators(m, g).unwrap()
    }

    fn frank_y(ops: &DiscreteOperators) -> f64 {
        let n = ops.dim();
        conformal_constant(n) * ops.curvature()[0] * ops.volume().powf(2.0 / n as f64)
    }

    #[test]
    fn frank_subcritical_converges_to_constant() {
        let r = 0.8 / 3f64.sqrt();
        let ops = ops(ModelSpec::FrankProduct { d: 5, r }, 64);
        let u0 = DVector::from_iterator(
            64,
            ops.grid()
                .nodes()
                .iter()
                .map(|&t| 1.0 + 0.1 * (t / r).cos()),
        );
        let rep = minimize_energy(&ops, &u0, &MinimizeOptions::default()).unwrap();
        assert!(rep.converged);
        let y = frank_y(&ops);
        assert!((rep.y_est - y).abs() <= 1e-8 * y, "{} vs {y}", rep.y_est);
        let v = rep.v.values();
        assert!((v.max() - v.min()) < 1e-6 * v.max());
        assert!(rep.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(rep.residual.interior + rep.residual.boundary <= 10.0 * 1e-10);
    }

    #[test]
    fn critical_start_is_a_fixed_point() {
        let ops = ops(ModelSpec::Hemisphere { n: 3 }, 24);
        let u0 = DVector::from_element(24, 2.0);
        let rep = minimize_energy(&ops, &u0, &MinimizeOptions::default()).unwrap();
        assert!(rep.iterations <= 1);
        let v0 = energy::normalize(&ops, &u0).unwrap();
        assert!((rep.v.values() - v0.values()).amax() < 1e-12);
    }

    #[test]
    fn frank_bifurcation_radius_multi_start() {
        let m = Arc::new(
            make_model(&ModelSpec::FrankProduct {
                d: 5,
                r: 1.0 / 3f64.sqrt(),
            })
            .unwrap(),
        );
        let rep = estimate_yamabe_constant(
            m,
            32,
            3,
            &MinimizeOptions {
                seed: 4,
                ..Default::default()
            },
        )
        .unwrap();
        let exact = 2.25 * (8.0 * PI.powi(3) / (3.0 * 3f64.sqrt())).powf(0.4);
        assert!(
            (rep.y_est - exact).abs() <= 1e-7 * exact,
            "{} vs {exact}",
            rep.y_est
        );
    }

    #[test]
    fn cylinder_never_worse_than_constant_and_deterministic() {
        let m = Arc::new(make_model(&ModelSpec::Cylinder { n: 3, length: 1.0 }).unwrap());
        let opts = MinimizeOptions {
            seed: 7,
            grad_tol: 1e-9,
            ..Default::default()
        };
        let a = estimate_yamabe_constant(Arc::clone(&m), 24, 4, &opts).unwrap();
        let ops = assemble_operators(Arc::clone(&m), build_grid(&m, 24).unwrap()).unwrap();
        let q1 = energy::quotient(&ops, &DVector::from_element(24, 1.0));
        assert!(a.y_est <= q1 + 1e-12);
        let b = estimate_yamabe_constant(m, 24, 4, &opts).unwrap();
        assert_eq!(a.y_est.to_bits(), b.y_est.to_bits());
    }

    #[test]
    fn bad_inputs() {
        let ops = ops(ModelSpec::Ball { n: 3 }, 16);
        let z = DVector::zeros(16);
        assert_eq!(
            minimize_energy(&ops, &z, &MinimizeOptions::default()).unwrap_err(),
            Error::ZeroFunction
        );
        let bad = MinimizeOptions {
            grad_tol: 0.0,
            ..Default::default()
        };
        assert!(minimize_energy(&ops, &DVector::from_element(16, 1.0), &bad).is_err());
        assert!(estimate_on(&ops, 0, &MinimizeOptions::default()).is_err());
    }

    #[test]
    fn random_starts_are_admissible() {
        let ops = ops(ModelSpec::SphericalCap { n: 4, angle: 1.0 }, 20);
        let modes = laplace_modes(&ops, START_MODES).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_start(&modes, 20, &mut rng);
        assert!(u.iter().all(|&x| x >= 0.0));
        assert!(((&u - DVector::from_element(20, 1.0)).amax() - START_AMPLITUDE).abs() < 1e-12);
    }
}
