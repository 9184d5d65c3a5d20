//! Cohomogeneity-one model manifolds with boundary.
//!
//! Every model is a warped product over a one-dimensional profile coordinate
//! `t ∈ [0, T]` (or the circle of length `T`). Functions invariant under the
//! transverse symmetry reduce to functions of `t`, and every integral over the
//! manifold becomes a weighted integral over the profile:
//!
//! * `density`: volume density `a(t)`, so `vol(M) = ∫ a dt`;
//! * `inv_metric`: the coefficient `κ(t) = g^{tt}`, so `|∇u|² = κ u'²`;
//! * `scalar_curvature`: `R(t)`.
//!
//! Catalog models have `κ ≡ 1`; conformal deformations change it.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::disc::{profile_laplacian, Grid, GridKind};
use crate::error::{Error, Result};

/// Area of the unit sphere `S^k ⊂ R^{k+1}`: `2π^{(k+1)/2} / Γ((k+1)/2)`.
pub fn sphere_area(k: usize) -> f64 {
    let half = 0.5 * (k as f64 + 1.0);
    (std::f64::consts::LN_2 + half * PI.ln() - libm::lgamma(half)).exp()
}

/// `c_n = (n - 2) / (4(n - 1))`.
pub fn conformal_constant(n: usize) -> f64 {
    (n as f64 - 2.0) / (4.0 * (n as f64 - 1.0))
}

/// Critical Sobolev exponent `2* = 2n / (n - 2)`.
pub fn critical_exponent(n: usize) -> f64 {
    2.0 * n as f64 / (n as f64 - 2.0)
}

/// Yamabe constant of the round hemisphere `S^n_+`, the upper bound for every
/// boundary Yamabe constant in dimension `n`.
pub fn hemisphere_yamabe_constant(n: usize) -> f64 {
    let nf = n as f64;
    conformal_constant(n) * nf * (nf - 1.0) * (0.5 * sphere_area(n)).powf(2.0 / nf)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Interval,
    Circle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    /// Density vanishes like `dist^{n-1}`: a smooth fixed point of the symmetry.
    Pole,
    /// A boundary component with mean curvature `h` and area `b`.
    Boundary { h: f64, b: f64 },
}

/// A profile function of the coordinate `t`.
#[derive(Clone)]
pub enum Profile {
    Constant(f64),
    Analytic(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    /// Values known only at the nodes of one grid.
    Nodal {
        nodes: Vec<f64>,
        values: Vec<f64>,
    },
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Constant(c) => write!(f, "Constant({c})"),
            Profile::Analytic(_) => write!(f, "Analytic(..)"),
            Profile::Nodal { values, .. } => write!(f, "Nodal({} nodes)", values.len()),
        }
    }
}

impl Profile {
    pub fn analytic(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Profile::Analytic(Arc::new(f))
    }

    /// Evaluates the profile at `nodes`. Nodal profiles only accept the node
    /// set they were built on.
    pub fn sample(&self, nodes: &[f64]) -> Result<DVector<f64>> {
        match self {
            Profile::Constant(c) => Ok(DVector::from_element(nodes.len(), *c)),
            Profile::Analytic(f) => Ok(DVector::from_iterator(
                nodes.len(),
                nodes.iter().map(|&t| f(t)),
            )),
            Profile::Nodal { nodes: own, values } => {
                if own.len() != nodes.len() {
                    return Err(Error::GridMismatch(format!(
                        "nodal profile has {} nodes, grid has {}",
                        own.len(),
                        nodes.len()
                    )));
                }
                let span = own.last().copied().unwrap_or(1.0).abs().max(1.0);
                if own
                    .iter()
                    .zip(nodes)
                    .any(|(a, b)| (a - b).abs() > 1e-12 * span)
                {
                    return Err(Error::GridMismatch(
                        "nodal profile built on a different grid".into(),
                    ));
                }
                Ok(DVector::from_column_slice(values))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SymmetricModel {
    pub n: usize,
    pub topology: Topology,
    pub length: f64,
    pub density: Profile,
    pub inv_metric: Profile,
    pub scalar_curvature: Profile,
    /// `[left, right]` for intervals, `None` on circles.
    pub endpoints: Option<[Endpoint; 2]>,
    pub label: String,
}

impl SymmetricModel {
    pub fn critical_exponent(&self) -> f64 {
        critical_exponent(self.n)
    }

    pub fn conformal_constant(&self) -> f64 {
        conformal_constant(self.n)
    }

    /// Order of vanishing of the density at a pole: `n - 1`.
    pub fn pole_order(&self) -> f64 {
        self.n as f64 - 1.0
    }

    pub fn endpoint(&self, side: Side) -> Option<Endpoint> {
        self.endpoints.map(|e| e[side as usize])
    }

    fn check(self) -> Result<Self> {
        if self.n < 3 {
            return Err(Error::InvalidModel(format!("dimension {} < 3", self.n)));
        }
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::InvalidModel(format!(
                "length {} not positive",
                self.length
            )));
        }
        match (self.topology, self.endpoints) {
            (Topology::Circle, Some(_)) => {
                Err(Error::InvalidModel("circles have no endpoints".into()))
            }
            (Topology::Interval, None) => {
                Err(Error::InvalidModel("intervals need endpoint data".into()))
            }
            _ => Ok(self),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left = 0,
    Right = 1,
}

/// Catalog entry: model kind plus its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "kind",
    content = "params",
    rename_all = "snake_case",
    deny_unknown_fields
)]
pub enum ModelSpec {
    Hemisphere {
        n: usize,
    },
    Ball {
        n: usize,
    },
    /// Geodesic ball of radius `angle` in the unit sphere.
    SphericalCap {
        n: usize,
        angle: f64,
    },
    /// `S¹(r) × S^{d-1}_+`, restricted to functions of the circle coordinate.
    FrankProduct {
        d: usize,
        r: f64,
    },
    /// `[0, length] × S^{n-1}`.
    Cylinder {
        n: usize,
        length: f64,
    },
}

impl ModelSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ModelSpec::Hemisphere { .. } => "hemisphere",
            ModelSpec::Ball { .. } => "ball",
            ModelSpec::SphericalCap { .. } => "spherical_cap",
            ModelSpec::FrankProduct { .. } => "frank_product",
            ModelSpec::Cylinder { .. } => "cylinder",
        }
    }
}

fn need_dim(n: usize) -> Result<()> {
    if n < 3 {
        Err(Error::InvalidModel(format!("dimension {n} < 3")))
    } else {
        Ok(())
    }
}

fn sphere_profile(n: usize, label: String, cap: f64) -> SymmetricModel {
    let area = sphere_area(n - 1);
    let nf = n as f64;
    let power = n as i32 - 1;
    let h = if (cap - PI / 2.0).abs() < 1e-15 {
        0.0
    } else {
        1.0 / cap.tan()
    };
    SymmetricModel {
        n,
        topology: Topology::Interval,
        length: cap,
        density: Profile::analytic(move |t| area * t.sin().powi(power)),
        inv_metric: Profile::Constant(1.0),
        scalar_curvature: Profile::Constant(nf * (nf - 1.0)),
        endpoints: Some([
            Endpoint::Pole,
            Endpoint::Boundary {
                h,
                b: area * cap.sin().powi(power),
            },
        ]),
        label,
    }
}

pub fn make_model(spec: &ModelSpec) -> Result<SymmetricModel> {
    let model = match *spec {
        ModelSpec::Hemisphere { n } => {
            need_dim(n)?;
            sphere_profile(n, format!("hemisphere(n={n})"), PI / 2.0)
        }
        ModelSpec::SphericalCap { n, angle } => {
            need_dim(n)?;
            if !(angle > 0.0 && angle <= PI / 2.0) {
                return Err(Error::InvalidModel(format!(
                    "cap angle {angle} outside (0, pi/2]"
                )));
            }
            sphere_profile(n, format!("spherical_cap(n={n},angle={angle})"), angle)
        }
        ModelSpec::Ball { n } => {
            need_dim(n)?;
            let area = sphere_area(n - 1);
            let power = n as i32 - 1;
            SymmetricModel {
                n,
                topology: Topology::Interval,
                length: 1.0,
                density: Profile::analytic(move |t| area * t.powi(power)),
                inv_metric: Profile::Constant(1.0),
                scalar_curvature: Profile::Constant(0.0),
                endpoints: Some([Endpoint::Pole, Endpoint::Boundary { h: 1.0, b: area }]),
                label: format!("ball(n={n})"),
            }
        }
        ModelSpec::FrankProduct { d, r } => {
            need_dim(d)?;
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "circle radius {r} not positive"
                )));
            }
            let df = d as f64;
            SymmetricModel {
                n: d,
                topology: Topology::Circle,
                length: 2.0 * PI * r,
                density: Profile::Constant(0.5 * sphere_area(d - 1)),
                inv_metric: Profile::Constant(1.0),
                scalar_curvature: Profile::Constant((df - 1.0) * (df - 2.0)),
                endpoints: None,
                label: format!("frank_product(d={d},r={r})"),
            }
        }
        ModelSpec::Cylinder { n, length } => {
            need_dim(n)?;
            if !(length.is_finite() && length > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "cylinder length {length} not positive"
                )));
            }
            let nf = n as f64;
            let area = sphere_area(n - 1);
            let end = Endpoint::Boundary { h: 0.0, b: area };
            SymmetricModel {
                n,
                topology: Topology::Interval,
                length,
                density: Profile::Constant(area),
                inv_metric: Profile::Constant(1.0),
                scalar_curvature: Profile::Constant((nf - 1.0) * (nf - 2.0)),
                endpoints: Some([end, end]),
                label: format!("cylinder(n={n},length={length})"),
            }
        }
    };
    model.check()
}

/// Checks that `grid` discretizes the coordinate domain of `m`.
pub fn check_grid(m: &SymmetricModel, grid: &Grid) -> Result<()> {
    let expected = match m.topology {
        Topology::Interval => GridKind::LobattoInterval,
        Topology::Circle => GridKind::UniformPeriodic,
    };
    if grid.kind() != expected {
        return Err(Error::GridMismatch(format!(
            "{:?} grid for {:?} topology",
            grid.kind(),
            m.topology
        )));
    }
    if (grid.length() - m.length).abs() > 1e-12 * m.length {
        return Err(Error::GridMismatch(format!(
            "grid length {} vs model length {}",
            grid.length(),
            m.length
        )));
    }
    Ok(())
}

/// The model for `g̃ = w^{4/(n-2)} g`, with `w` given at the nodes of `grid`.
///
/// The new profiles are nodal on `grid`:
/// `ã = a w^{2*}`, `κ̃ = κ w^{-4/(n-2)}`,
/// `R̃ = w^{1-2*} (-(4(n-1)/(n-2)) Δw + R w)`, and at each boundary endpoint
/// `b̃ = b w^{2(n-1)/(n-2)}`, `h̃ = (2/(n-2)) w^{-n/(n-2)} (∂_ν w + (n-2)/2 h w)`.
pub fn conformal_deform(
    m: &SymmetricModel,
    w: &DVector<f64>,
    grid: &Grid,
) -> Result<SymmetricModel> {
    check_grid(m, grid)?;
    let len = grid.len();
    if w.len() != len {
        return Err(Error::GridMismatch(format!(
            "factor has {} values, grid has {len}",
            w.len()
        )));
    }
    if let Some((i, &x)) = w
        .iter()
        .enumerate()
        .find(|(_, &x)| !(x > 0.0 && x.is_finite()))
    {
        return Err(Error::InvalidInput(format!(
            "conformal factor {x} not positive at node {i}"
        )));
    }

    let nodes = grid.nodes();
    let a = m.density.sample(nodes)?;
    let kappa = m.inv_metric.sample(nodes)?;
    let r = m.scalar_curvature.sample(nodes)?;
    let nf = m.n as f64;
    let crit = m.critical_exponent();

    let diff = grid.diff_matrix();
    let dw = &diff * w;
    let poles: Vec<usize> = match m.endpoints {
        Some(ends) => ends
            .iter()
            .enumerate()
            .filter(|(_, e)| matches!(e, Endpoint::Pole))
            .map(|(side, _)| if side == 0 { 0 } else { len - 1 })
            .collect(),
        None => Vec::new(),
    };
    let laplacian = profile_laplacian(&diff, &a, &kappa, &poles, m.n, w);

    let new_a: Vec<f64> = (0..len).map(|i| a[i] * w[i].powf(crit)).collect();
    let new_kappa: Vec<f64> = (0..len)
        .map(|i| kappa[i] * w[i].powf(-4.0 / (nf - 2.0)))
        .collect();
    let new_r: Vec<f64> = (0..len)
        .map(|i| {
            w[i].powf(1.0 - crit) * (-(4.0 * (nf - 1.0) / (nf - 2.0)) * laplacian[i] + r[i] * w[i])
        })
        .collect();

    let endpoints = m.endpoints.map(|ends| {
        let mut out = ends;
        for (side, end) in ends.iter().enumerate() {
            if let Endpoint::Boundary { h, b } = *end {
                let (idx, sign) = if side == 0 { (0, -1.0) } else { (len - 1, 1.0) };
                let we = w[idx];
                let dnu = sign * kappa[idx].sqrt() * dw[idx];
                out[side] = Endpoint::Boundary {
                    h: (2.0 / (nf - 2.0))
                        * we.powf(-nf / (nf - 2.0))
                        * (dnu + 0.5 * (nf - 2.0) * h * we),
                    b: b * we.powf(2.0 * (nf - 1.0) / (nf - 2.0)),
                };
            }
        }
        out
    });

    let nodal = |values: Vec<f64>| Profile::Nodal {
        nodes: nodes.to_vec(),
        values,
    };
    Ok(SymmetricModel {
        n: m.n,
        topology: m.topology,
        length: m.length,
        density: nodal(new_a),
        inv_metric: nodal(new_kappa),
        scalar_curvature: nodal(new_r),
        endpoints,
        label: format!("{}~conformal", m.label),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disc::build_grid;

    fn boundary(m: &SymmetricModel, side: Side) -> (f64, f64) {
        match m.endpoint(side) {
            Some(Endpoint::Boundary { h, b }) => (h, b),
            other => panic!("expected boundary, got {other:?}"),
        }
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0 * PI).abs() < 1e-13);
        assert!((sphere_area(2) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_area(3) - 2.0 * PI * PI).abs() < 1e-12);
        assert!((sphere_area(4) - 8.0 * PI * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn hemisphere_data() {
        let m = make_model(&ModelSpec::Hemisphere { n: 3 }).unwrap();
        let r = m.scalar_curvature.sample(&[0.1, 1.0]).unwrap();
        assert_eq!(r[0], 6.0);
        assert_eq!(r[1], 6.0);
        let (h, b) = boundary(&m, Side::Right);
        assert_eq!(h, 0.0);
        assert!((b - 4.0 * PI).abs() < 1e-12);
        assert_eq!(m.endpoint(Side::Left), Some(Endpoint::Pole));
    }

    #[test]
    fn frank_product_data() {
        let r = 1.0 / 3f64.sqrt();
        let m = make_model(&ModelSpec::FrankProduct { d: 5, r }).unwrap();
        assert_eq!(m.topology, Topology::Circle);
        assert!((m.length - 2.0 * PI / 3f64.sqrt()).abs() < 1e-14);
        match m.scalar_curvature {
            Profile::Constant(c) => assert_eq!(c, 12.0),
            _ => panic!("constant curvature expected"),
        }
    }

    #[test]
    fn cap_mean_curvature() {
        let m = make_model(&ModelSpec::SphericalCap { n: 4, angle: 1.0 }).unwrap();
        let (h, b) = boundary(&m, Side::Right);
        assert!((h - 1.0 / 1f64.tan()).abs() < 1e-14);
        assert!((b - sphere_area(3) * 1f64.sin().powi(3)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(make_model(&ModelSpec::Hemisphere { n: 2 }).is_err());
        assert!(make_model(&ModelSpec::SphericalCap { n: 3, angle: 0.0 }).is_err());
        assert!(make_model(&ModelSpec::SphericalCap { n: 3, angle: 1.6 }).is_err());
        assert!(make_model(&ModelSpec::FrankProduct { d: 5, r: -1.0 }).is_err());
        assert!(make_model(&ModelSpec::FrankProduct { d: 2, r: 1.0 }).is_err());
        assert!(make_model(&ModelSpec::Cylinder { n: 3, length: 0.0 }).is_err());
    }

    #[test]
    fn pole_density_order_matches_loglog_slope() {
        for spec in [
            ModelSpec::Hemisphere { n: 3 },
            ModelSpec::Hemisphere { n: 5 },
            ModelSpec::Ball { n: 4 },
            ModelSpec::SphericalCap { n: 6, angle: 0.7 },
        ] {
            let m = make_model(&spec).unwrap();
            let ts = [1e-4, 1e-3];
            let a = m.density.sample(&ts).unwrap();
            let slope = (a[1].ln() - a[0].ln()) / (ts[1].ln() - ts[0].ln());
            assert!(
                (slope - m.pole_order()).abs() < 0.05,
                "{spec:?}: slope {slope}"
            );
        }
    }

    #[test]
    fn identity_factor_leaves_model_unchanged() {
        let m = make_model(&ModelSpec::SphericalCap { n: 3, angle: 1.2 }).unwrap();
        let grid = build_grid(&m, 33).unwrap();
        let w = DVector::from_element(grid.len(), 1.0);
        let d = conformal_deform(&m, &w, &grid).unwrap();
        let nodes = grid.nodes();
        let r = d.scalar_curvature.sample(nodes).unwrap();
        assert!(r.iter().all(|&x| (x - 6.0).abs() < 1e-9));
        let a0 = m.density.sample(nodes).unwrap();
        let a1 = d.density.sample(nodes).unwrap();
        assert!((a0 - a1).amax() < 1e-15);
        assert_eq!(boundary(&m, Side::Right).0, boundary(&d, Side::Right).0);
    }

    #[test]
    fn constant_factor_scales_curvatures() {
        let m = make_model(&ModelSpec::SphericalCap { n: 5, angle: 0.9 }).unwrap();
        let grid = build_grid(&m, 33).unwrap();
        let c: f64 = 1.7;
        let nf = 5.0;
        let w = DVector::from_element(grid.len(), c);
        let d = conformal_deform(&m, &w, &grid).unwrap();
        let r = d.scalar_curvature.sample(grid.nodes()).unwrap();
        let expected_r = c.powf(-4.0 / (nf - 2.0)) * 20.0;
        assert!(r
            .iter()
            .all(|&x| (x - expected_r).abs() < 1e-9 * expected_r));
        let (h0, _) = boundary(&m, Side::Right);
        let (h1, _) = boundary(&d, Side::Right);
        assert!((h1 - c.powf(-2.0 / (nf - 2.0)) * h0).abs() < 1e-10);
    }

    #[test]
    fn bubble_maps_ball_to_round_hemisphere() {
        let m = make_model(&ModelSpec::Ball { n: 3 }).unwrap();
        let grid = build_grid(&m, 48).unwrap();
        let w = DVector::from_iterator(
            grid.len(),
            grid.nodes()
                .iter()
                .map(|&t| 2f64.sqrt() / (1.0 + t * t).sqrt()),
        );
        let d = conformal_deform(&m, &w, &grid).unwrap();
        let r = d.scalar_curvature.sample(grid.nodes()).unwrap();
        assert!(r.iter().all(|&x| (x - 6.0).abs() < 1e-8), "{r}");
        let (h, b) = boundary(&d, Side::Right);
        assert!(h.abs() < 1e-9);
        // the unit ball maps onto the unit hemisphere: boundary is a great S²
        assert!((b - 4.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn deform_rejects_nonpositive_factor_and_foreign_grid() {
        let m = make_model(&ModelSpec::Hemisphere { n: 3 }).unwrap();
        let grid = build_grid(&m, 17).unwrap();
        let mut w = DVector::from_element(grid.len(), 1.0);
        w[3] = 0.0;
        assert!(conformal_deform(&m, &w, &grid).is_err());
        let other = make_model(&ModelSpec::Ball { n: 3 }).unwrap();
        let g2 = build_grid(&other, 17).unwrap();
        let w = DVector::from_element(g2.len(), 1.0);
        assert!(matches!(
            conformal_deform(&m, &w, &g2),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn deform_then_inverse_recovers_profiles() {
        let m = make_model(&ModelSpec::SphericalCap { n: 4, angle: 1.1 }).unwrap();
        let grid = build_grid(&m, 40).unwrap();
        let nodes = grid.nodes();
        let w = DVector::from_iterator(
            grid.len(),
            nodes.iter().map(|&t| 1.0 + 0.3 * (2.0 * t).cos()),
        );
        let once = conformal_deform(&m, &w, &grid).unwrap();
        let back = conformal_deform(&once, &w.map(|x| 1.0 / x), &grid).unwrap();

        // exact R̃ on the round cap: Δw = w'' + 3 cot t w' = -1.2 cos 2t - 3.6 cos² t
        let exact = DVector::from_iterator(
            grid.len(),
            nodes.iter().map(|&t| {
                let wt = 1.0 + 0.3 * (2.0 * t).cos();
                let lap = -1.2 * (2.0 * t).cos() - 3.6 * t.cos().powi(2);
                wt.powf(1.0 - 4.0) * (-6.0 * lap + 12.0 * wt)
            }),
        );
        let r1 = once.scalar_curvature.sample(nodes).unwrap();
        let single = (&r1 - &exact).amax();
        let r0 = m.scalar_curvature.sample(nodes).unwrap();
        let r2 = back.scalar_curvature.sample(nodes).unwrap();
        assert!(single < 1e-8 * r0.amax());
        assert!((&r2 - &r0).amax() < 1e-8 * r0.amax());

        let a0 = m.density.sample(nodes).unwrap();
        let a2 = back.density.sample(nodes).unwrap();
        assert!((a2 - a0).amax() < 1e-12);
        let (h0, b0) = boundary(&m, Side::Right);
        let (h2, b2) = boundary(&back, Side::Right);
        assert!((h0 - h2).abs() < 1e-8);
        assert!((b0 - b2).abs() < 1e-12);
    }
}
