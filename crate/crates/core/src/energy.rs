//! The boundary Yamabe quotient on the unit-volume constraint manifold 𝓑,
//! its variations, Euler–Lagrange residuals, and conformal metric distances.
//!
//! Nodal covectors are paired with nodal vectors by the plain dot product:
//! `G[η] = g · η`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::disc::{lp_norm, DiscreteOperators};
use crate::error::{Error, Result};

/// `|x|^p`, using an integer power when `p` is integral and clamping the base
/// away from zero otherwise.
pub(crate) fn abs_pow(x: f64, p: f64) -> f64 {
    let ax = x.abs();
    let pr = p.round();
    if (p - pr).abs() < 1e-12 && pr.abs() < 64.0 {
        ax.powi(pr as i32)
    } else {
        (p * ax.max(1e-300).ln()).exp()
    }
}

/// `sign(x) |x|^p`.
fn signed_pow(x: f64, p: f64) -> f64 {
    abs_pow(x, p).copysign(x)
}

/// A nonnegative nodal function with unit `L^{2*}` norm.
#[derive(Debug, Clone)]
pub struct NormalizedState {
    u: DVector<f64>,
    ops: Arc<DiscreteOperators>,
}

impl NormalizedState {
    pub fn values(&self) -> &DVector<f64> {
        &self.u
    }

    pub fn ops(&self) -> &Arc<DiscreteOperators> {
        &self.ops
    }

    pub fn into_values(self) -> DVector<f64> {
        self.u
    }

    pub fn quotient(&self) -> f64 {
        quotient(&self.ops, &self.u)
    }

    /// `ℓ = M v^{2*-1}`: `T_v𝓑` is the kernel of `η ↦ ℓ·η`.
    pub fn tangent_functional(&self) -> DVector<f64> {
        let p = self.ops.critical_exponent();
        DVector::from_fn(self.u.len(), |i, _| {
            self.ops.mass()[i] * signed_pow(self.u[i], p - 1.0)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EnergyReport {
    pub q: f64,
    pub dirichlet: f64,
    pub curvature_term: f64,
    pub boundary_term: f64,
    pub volume_norm: f64,
}

fn check_len(ops: &DiscreteOperators, u: &DVector<f64>) -> Result<()> {
    if u.len() != ops.len() {
        return Err(Error::GridMismatch(format!(
            "function has {} values, grid has {}",
            u.len(),
            ops.len()
        )));
    }
    Ok(())
}

fn check_admissible(ops: &DiscreteOperators, u: &DVector<f64>) -> Result<()> {
    check_len(ops, u)?;
    if let Some((index, &value)) = u.iter().enumerate().find(|(_, &x)| !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite value {value} at node {index}"
        )));
    }
    if let Some((index, &value)) = u.iter().enumerate().find(|(_, &x)| x < 0.0) {
        return Err(Error::NegativeValue { index, value });
    }
    if lp_norm(ops, u, ops.critical_exponent()) == 0.0 {
        return Err(Error::ZeroFunction);
    }
    Ok(())
}

/// `∫ |u|^{2*} dvol`.
fn volume_integral(ops: &DiscreteOperators, u: &DVector<f64>) -> f64 {
    let p = ops.critical_exponent();
    ops.mass()
        .iter()
        .zip(u.iter())
        .map(|(&m, &x)| m * abs_pow(x, p))
        .sum()
}

/// `∫ |v+δ|^{2*} - |v|^{2*}`, accurate when `δ` is small relative to `v`.
fn volume_increment(ops: &DiscreteOperators, v: &DVector<f64>, delta: &DVector<f64>) -> f64 {
    let p = ops.critical_exponent();
    let mut acc = 0.0;
    for i in 0..v.len() {
        let (vi, di) = (v[i], delta[i]);
        let term = if vi > 0.0 && di.abs() < 0.5 * vi {
            abs_pow(vi, p) * (p * (di / vi).ln_1p()).exp_m1()
        } else {
            abs_pow(vi + di, p) - abs_pow(vi, p)
        };
        acc += ops.mass()[i] * term;
    }
    acc
}

/// `Q(u)` without admissibility checks. Uses `|u|` in the volume term.
pub fn quotient(ops: &DiscreteOperators, u: &DVector<f64>) -> f64 {
    let e = u.dot(&(ops.energy() * u));
    e / volume_integral(ops, u).powf(2.0 / ops.critical_exponent())
}

pub fn yamabe_quotient(ops: &DiscreteOperators, u: &DVector<f64>) -> Result<EnergyReport> {
    check_admissible(ops, u)?;
    let dirichlet = u.dot(&(ops.stiffness() * u));
    let curvature_term = u.dot(&ops.curv_mass().component_mul(u));
    let boundary_term = u.dot(&ops.bdry_mass().component_mul(u));
    let volume_norm = lp_norm(ops, u, ops.critical_exponent());
    Ok(EnergyReport {
        q: (dirichlet + curvature_term + boundary_term) / (volume_norm * volume_norm),
        dirichlet,
        curvature_term,
        boundary_term,
        volume_norm,
    })
}

pub fn normalize(ops: &Arc<DiscreteOperators>, u: &DVector<f64>) -> Result<NormalizedState> {
    check_admissible(ops, u)?;
    let norm = lp_norm(ops, u, ops.critical_exponent());
    Ok(NormalizedState {
        u: u / norm,
        ops: Arc::clone(ops),
    })
}

/// `π(u) = u - (∫ v^{2*-1} u) v`.
pub fn project_tangent(v: &NormalizedState, u: &DVector<f64>) -> DVector<f64> {
    let ell = v.tangent_functional();
    u - v.values() * ell.dot(u)
}

/// Applies `πᵀ` to a covector: `g - ℓ (v·g)`.
fn project_covector(v: &NormalizedState, ell: &DVector<f64>, g: &DVector<f64>) -> DVector<f64> {
    g - ell * v.values().dot(g)
}

/// Gradient of `Q` in the ambient nodal space at any nonzero `u`.
pub fn ambient_gradient(ops: &DiscreteOperators, u: &DVector<f64>) -> DVector<f64> {
    let p = ops.critical_exponent();
    let au = ops.energy() * u;
    let e = u.dot(&au);
    let vol = volume_integral(ops, u);
    let nrm = vol.powf(2.0 / p);
    let q = e / nrm;
    let ell = DVector::from_fn(u.len(), |i, _| ops.mass()[i] * signed_pow(u[i], p - 1.0));
    // ∇N = 2 V^{2/p - 1} ℓ
    let grad_n = ell * (2.0 * vol.powf(2.0 / p - 1.0));
    (au * 2.0 - grad_n * q) / nrm
}

/// Hessian of `Q` in the ambient nodal space at any nonzero `u`.
pub fn ambient_hessian(ops: &DiscreteOperators, u: &DVector<f64>) -> DMatrix<f64> {
    let p = ops.critical_exponent();
    let len = u.len();
    let au = ops.energy() * u;
    let e = u.dot(&au);
    let vol = volume_integral(ops, u);
    let nrm = vol.powf(2.0 / p);
    let q = e / nrm;
    let ell = DVector::from_fn(len, |i, _| ops.mass()[i] * signed_pow(u[i], p - 1.0));
    let grad_n = &ell * (2.0 * vol.powf(2.0 / p - 1.0));
    let grad_q = (&au * 2.0 - &grad_n * q) / nrm;

    // ∇²N = 2(2/p - 1) p V^{2/p-2} ℓℓᵀ + 2(p - 1) V^{2/p-1} diag(M|u|^{p-2})
    let rank_one = 2.0 * (2.0 / p - 1.0) * p * vol.powf(2.0 / p - 2.0);
    let diag_coef = 2.0 * (p - 1.0) * vol.powf(2.0 / p - 1.0);

    let mut h = ops.energy() * 2.0;
    h -= (&ell * ell.transpose()) * (q * rank_one);
    for i in 0..len {
        h[(i, i)] -= q * diag_coef * ops.mass()[i] * abs_pow(u[i], p - 2.0);
    }
    h -= &grad_q * grad_n.transpose();
    h -= &grad_n * grad_q.transpose();
    h /= nrm;
    crate::linalg::symmetrize(&mut h);
    h
}

/// Covector `G` of the first variation on 𝓑: `G[η] = ∇Q(v)[π η]`.
pub fn gradient(v: &NormalizedState) -> DVector<f64> {
    let g = ambient_gradient(&v.ops, &v.u);
    project_covector(v, &v.tangent_functional(), &g)
}

/// Dense matrix of the second variation on 𝓑,
/// `H[φ,η] = 2[πφᵀ(S+C+B)πη − (2*−1) Q(v) ∫ v^{2*−2} πφ πη]`.
pub fn hessian_form(v: &NormalizedState) -> DMatrix<f64> {
    let ell = v.tangent_functional();
    let x = ambient_hessian(&v.ops, &v.u);
    // Pᵀ X P with P = I - v ℓᵀ
    let xv = &x * &v.u;
    let vxv = v.u.dot(&xv);
    let mut h = x;
    h -= &ell * xv.transpose();
    h -= &xv * ell.transpose();
    h += (&ell * ell.transpose()) * vxv;
    crate::linalg::symmetrize(&mut h);
    h
}

/// `sqrt(gᵀ (S+M)⁻¹ g)`: the `W^{1,2}` dual norm of a covector.
pub fn dual_norm(ops: &DiscreteOperators, g: &DVector<f64>) -> f64 {
    g.dot(&ops.w12_solve(g)).max(0.0).sqrt()
}

pub fn w12_norm(ops: &DiscreteOperators, u: &DVector<f64>) -> f64 {
    u.dot(&(ops.w12() * u)).max(0.0).sqrt()
}

pub fn l2_norm(ops: &DiscreteOperators, u: &DVector<f64>) -> f64 {
    u.dot(&ops.mass().component_mul(u)).sqrt()
}

/// Strong-form residual of `L_g u = C u^{(n+2)/(n-2)}`, `B_g u = 0`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ElResidual {
    pub interior: f64,
    pub boundary: f64,
    #[serde(rename = "C")]
    pub c: f64,
}

pub fn laplacian(ops: &DiscreteOperators, u: &DVector<f64>) -> DVector<f64> {
    crate::disc::profile_laplacian(
        ops.diff(),
        ops.density(),
        ops.inv_metric(),
        ops.poles(),
        ops.dim(),
        u,
    )
}

/// Weighted `L²` norm of a pointwise residual over non-endpoint nodes.
fn interior_l2(ops: &DiscreteOperators, r: &DVector<f64>) -> f64 {
    (0..r.len())
        .filter(|&i| !ops.is_endpoint(i))
        .map(|i| ops.mass()[i] * r[i] * r[i])
        .sum::<f64>()
        .sqrt()
}

/// `Σ |∂φ/∂ν + ((n-2)/2) h φ|` over boundary endpoints.
pub(crate) fn robin_residual(ops: &DiscreteOperators, phi: &DVector<f64>) -> f64 {
    let nf = ops.dim() as f64;
    ops.boundary()
        .iter()
        .map(|b| (b.normal_deriv.dot(phi) + 0.5 * (nf - 2.0) * b.h * phi[b.node]).abs())
        .sum()
}

/// Interior residual of a linear operator `−Δφ + c_n R φ − potential·φ`.
pub(crate) fn linear_interior_residual(
    ops: &DiscreteOperators,
    phi: &DVector<f64>,
    potential: &DVector<f64>,
) -> f64 {
    let lap = laplacian(ops, phi);
    let cn = ops.conformal_constant();
    let r = DVector::from_fn(phi.len(), |i, _| {
        -lap[i] + cn * ops.curvature()[i] * phi[i] - potential[i] * phi[i]
    });
    interior_l2(ops, &r)
}

pub fn el_residual(v: &NormalizedState) -> ElResidual {
    let ops = &v.ops;
    let p = ops.critical_exponent();
    let q = v.quotient();
    let u = &v.u;
    let potential = DVector::from_fn(u.len(), |i, _| q * abs_pow(u[i], p - 2.0));
    ElResidual {
        interior: linear_interior_residual(ops, u, &potential),
        boundary: robin_residual(ops, u),
        c: q,
    }
}

/// `‖g_u − g_w‖ = (∫ |u − w|^{2*})^{1/2*}`.
pub fn metric_distance(ops: &DiscreteOperators, u: &DVector<f64>, w: &DVector<f64>) -> Result<f64> {
    check_len(ops, u)?;
    check_len(ops, w)?;
    Ok(lp_norm(ops, &(u - w), ops.critical_exponent()))
}

/// `‖g_u − g_w‖_*`: `((1/c_n)∫|∇δ|² + R δ² + 2(n−1)∫_∂ h δ²)^{1/2}`, which is
/// `(δᵀ(S+C+B)δ / c_n)^{1/2}`. Only a norm when the Yamabe constant is
/// nonnegative; a warning is logged otherwise and a negative square yields NaN.
pub fn metric_distance_star(
    ops: &DiscreteOperators,
    u: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<f64> {
    check_len(ops, u)?;
    check_len(ops, w)?;
    if ops.yamabe_sign() < 0.0 {
        log::warn!(
            "{}: Yamabe constant is negative; ‖·‖_* is not a norm",
            ops.model().label
        );
    }
    let delta = u - w;
    let sq = delta.dot(&(ops.energy() * &delta)) / ops.conformal_constant();
    Ok(if sq >= 0.0 { sq.sqrt() } else { f64::NAN })
}

/// `Ψ(ξ) = (v + ξ)/‖v + ξ‖_{2*}` together with `Ψ(ξ) − v`, the latter computed
/// without cancellation.
pub fn chart_point(v: &NormalizedState, xi: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let ops = &v.ops;
    let p = ops.critical_exponent();
    let vol_v = volume_integral(ops, &v.u);
    let dvol = volume_increment(ops, &v.u, xi);
    let nu = vol_v.powf(1.0 / p);
    // ‖v+ξ‖/ν − 1
    let nm1 = ((dvol / vol_v).ln_1p() / p).exp_m1();
    let denom = nu * (1.0 + nm1);
    let delta = (xi - &v.u * ((nu - 1.0) + nu * nm1)) / denom;
    let u = &v.u + &delta;
    (u, delta)
}

/// `Q(v + δ) − Q(v)` evaluated to high relative accuracy for small `δ`.
pub fn energy_deficit(v: &NormalizedState, delta: &DVector<f64>) -> f64 {
    let ops = &v.ops;
    let p = ops.critical_exponent();
    let av = ops.energy() * &v.u;
    let e = v.u.dot(&av);
    let de = 2.0 * av.dot(delta) + delta.dot(&(ops.energy() * delta));
    let vol = volume_integral(ops, &v.u);
    let dvol = volume_increment(ops, &v.u, delta);
    let nrm = vol.powf(2.0 / p);
    let rho = ((2.0 / p) * (dvol / vol).ln_1p()).exp_m1();
    let q = e / nrm;
    (de - q * nrm * rho) / (nrm * (1.0 + rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disc::{assemble_operators, build_grid};
    use crate::model::{make_model, ModelSpec};
    use std::f64::consts::PI;

    fn ops_for(spec: ModelSpec, n: usize) -> Arc<DiscreteOperators> {
        let m = make_model(&spec).unwrap();
        let g = build_grid(&m, n).unwrap();
        assemble_operators(Arc::new(m), g).unwrap()
    }

    fn frank(r: f64, n: usize) -> Arc<DiscreteOperators> {
        ops_for(ModelSpec::FrankProduct { d: 5, r }, n)
    }

    fn smooth(ops: &DiscreteOperators, coeffs: &[f64]) -> DVector<f64> {
        let t = ops.grid().length();
        DVector::from_iterator(
            ops.len(),
            ops.grid().nodes().iter().map(|&x| {
                let s = 2.0 * PI * x / t;
                1.0 + coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * ((k + 1) as f64 * s).cos())
                    .sum::<f64>()
            }),
        )
    }

    #[test]
    fn quotient_is_zero_homogeneous() {
        let ops = ops_for(ModelSpec::SphericalCap { n: 4, angle: 1.2 }, 40);
        let u = smooth(&ops, &[0.2, -0.1]);
        let q = yamabe_quotient(&ops, &u).unwrap().q;
        for c in [1e-3, 1.0, 3.0, 1e3] {
            let qc = yamabe_quotient(&ops, &(&u * c)).unwrap().q;
            assert!((qc - q).abs() <= 1e-12 * q.abs(), "{c}: {qc} vs {q}");
        }
    }

    #[test]
    fn report_components_add_up() {
        let ops = ops_for(ModelSpec::Ball { n: 4 }, 33);
        let u = smooth(&ops, &[0.3]);
        let r = yamabe_quotient(&ops, &u).unwrap();
        let sum = r.dirichlet + r.curvature_term + r.boundary_term;
        assert!((r.q * r.volume_norm.powi(2) - sum).abs() <= 1e-10 * sum.abs());
    }

    #[test]
    fn frank_constant_quotient() {
        let r = 1.0 / 3f64.sqrt();
        let ops = frank(r, 64);
        let ones = DVector::from_element(64, 1.0);
        let q = yamabe_quotient(&ops, &ones).unwrap().q;
        let expected = 2.25 * (8.0 * PI.powi(3) / (3.0 * 3f64.sqrt())).powf(0.4);
        assert!((q - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn ball_constant_quotient_is_boundary_only() {
        let ops = ops_for(ModelSpec::Ball { n: 3 }, 33);
        let ones = DVector::from_element(33, 1.0);
        let rep = yamabe_quotient(&ops, &ones).unwrap();
        let expected = 0.5 * 4.0 * PI / (4.0 * PI / 3.0f64).powf(1.0 / 3.0);
        assert!((rep.q - expected).abs() < 1e-12 * expected);
        assert!(rep.dirichlet.abs() < 1e-10);
        assert_eq!(rep.curvature_term, 0.0);
    }

    #[test]
    fn rejects_zero_and_negative() {
        let ops = frank(1.0, 32);
        assert_eq!(
            yamabe_quotient(&ops, &DVector::zeros(32)).unwrap_err(),
            Error::ZeroFunction
        );
        let mut u = DVector::from_element(32, 1.0);
        u[5] = -0.1;
        assert!(matches!(
            normalize(&ops, &u),
            Err(Error::NegativeValue { index: 5, .. })
        ));
        assert_eq!(
            normalize(&ops, &DVector::zeros(32)).unwrap_err(),
            Error::ZeroFunction
        );
    }

    #[test]
    fn normalize_examples() {
        let ops = ops_for(ModelSpec::Hemisphere { n: 3 }, 33);
        let p = ops.critical_exponent();
        let ones = DVector::from_element(33, 2.5);
        let v = normalize(&ops, &ones).unwrap();
        let expected = ops.volume().powf(-1.0 / p);
        assert!(v.values().iter().all(|&x| (x - expected).abs() < 1e-14));
        let again = normalize(&ops, v.values()).unwrap();
        assert!((again.values() - v.values()).amax() < 1e-15);
        let u = smooth(&ops, &[0.4]);
        let a = normalize(&ops, &u).unwrap();
        let b = normalize(&ops, &(&u * 7.0)).unwrap();
        assert!((a.values() - b.values()).amax() < 1e-14);
        assert!((lp_norm(&ops, a.values(), p) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn projection_properties() {
        let ops = ops_for(ModelSpec::SphericalCap { n: 3, angle: 1.0 }, 33);
        let v = normalize(&ops, &smooth(&ops, &[0.2, 0.1])).unwrap();
        assert!(project_tangent(&v, v.values()).amax() < 1e-13);
        let u = smooth(&ops, &[-0.5, 0.7, 0.3]);
        let pu = project_tangent(&v, &u);
        assert!((project_tangent(&v, &pu) - &pu).amax() < 1e-12);
        assert!(v.tangent_functional().dot(&pu).abs() < 1e-10);
    }

    #[test]
    fn gradient_vanishes_at_frank_constant() {
        let ops = frank(1.0 / 3f64.sqrt(), 64);
        let v = normalize(&ops, &DVector::from_element(64, 1.0)).unwrap();
        let g = gradient(&v);
        assert!(dual_norm(&ops, &g) < 1e-9);
        let res = el_residual(&v);
        assert!(res.interior < 1e-9);
        assert_eq!(res.boundary, 0.0);
    }

    #[test]
    fn gradient_kills_radial_direction() {
        let ops = ops_for(ModelSpec::Cylinder { n: 3, length: 1.0 }, 33);
        let v = normalize(&ops, &smooth(&ops, &[0.3, -0.2])).unwrap();
        let g = gradient(&v);
        assert!(g.dot(v.values()).abs() < 1e-12 * g.amax());
        let h = hessian_form(&v);
        assert!((&h * v.values()).amax() < 1e-10 * h.amax());
        assert!((&h - h.transpose()).amax() == 0.0);
    }

    #[test]
    fn hemisphere_constant_is_critical() {
        let ops = ops_for(ModelSpec::Hemisphere { n: 3 }, 65);
        let v = normalize(&ops, &DVector::from_element(65, 1.0)).unwrap();
        let res = el_residual(&v);
        assert!(res.interior < 1e-8, "{res:?}");
        assert!(res.boundary < 1e-8, "{res:?}");
    }

    #[test]
    fn non_critical_state_has_residual() {
        let ops = ops_for(ModelSpec::Hemisphere { n: 3 }, 33);
        let v = normalize(&ops, &smooth(&ops, &[0.3])).unwrap();
        assert!(el_residual(&v).interior > 1e-3);
    }

    #[test]
    fn distances() {
        let ops = frank(1.0, 32);
        let u = DVector::from_element(32, 1.0);
        let w = DVector::from_element(32, 2.0);
        assert_eq!(metric_distance(&ops, &u, &u).unwrap(), 0.0);
        assert_eq!(metric_distance_star(&ops, &u, &u).unwrap(), 0.0);
        let p = ops.critical_exponent();
        let d = metric_distance(&ops, &u, &w).unwrap();
        assert!((d - ops.volume().powf(1.0 / p)).abs() < 1e-12);
        let z = DVector::zeros(32);
        let v = smooth(&ops, &[0.5]);
        assert!((metric_distance(&ops, &v, &z).unwrap() - lp_norm(&ops, &v, p)).abs() < 1e-14);
        assert!(metric_distance(&ops, &v, &DVector::zeros(31)).is_err());
    }

    #[test]
    fn star_distance_matches_weighted_forms() {
        let ops = ops_for(ModelSpec::Ball { n: 3 }, 33);
        let u = smooth(&ops, &[0.3]);
        let w = smooth(&ops, &[-0.1, 0.2]);
        let d = &u - &w;
        let cn = ops.conformal_constant();
        let nf = 3.0;
        let bdry: f64 = ops
            .boundary()
            .iter()
            .map(|b| b.h * b.b * d[b.node].powi(2))
            .sum();
        let direct = d.dot(&(ops.stiffness() * &d)) / cn
            + d.dot(&ops.curvature().component_mul(&ops.mass().component_mul(&d)))
            + 2.0 * (nf - 1.0) * bdry;
        let star = metric_distance_star(&ops, &u, &w).unwrap();
        assert!((star * star - direct).abs() < 1e-10 * direct);
    }

    #[test]
    fn precise_deficit_matches_direct_difference() {
        let ops = ops_for(ModelSpec::Cylinder { n: 4, length: 1.5 }, 33);
        let v = normalize(&ops, &smooth(&ops, &[0.1])).unwrap();
        let xi = project_tangent(&v, &(smooth(&ops, &[0.0, 0.3, -0.2]) * 0.05));
        let (u, delta) = chart_point(&v, &xi);
        assert!((&u - v.values() - &delta).amax() < 1e-15);
        let direct = quotient(&ops, &u) - v.quotient();
        let precise = energy_deficit(&v, &delta);
        assert!((direct - precise).abs() < 1e-12 * v.quotient());
        let expected = normalize(&ops, &(v.values() + &xi)).unwrap();
        assert!((expected.values() - &u).amax() < 1e-14);
    }

    #[test]
    fn fractional_and_integer_powers_agree() {
        assert_eq!(abs_pow(2.0, 4.0), 16.0);
        assert!((abs_pow(2.0, 4.0 / 3.0) - 2f64.powf(4.0 / 3.0)).abs() < 1e-15);
        assert_eq!(abs_pow(0.0, 4.0 / 3.0), 0.0);
        assert_eq!(signed_pow(-2.0, 3.0), -8.0);
    }
}
