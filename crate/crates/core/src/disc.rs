//! Grids, quadrature, spectral differentiation, and the bilinear forms of the
//! boundary Yamabe energy.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::linalg::{generalized_symmetric_eigen, symmetrize};
use crate::model::{check_grid, Endpoint, SymmetricModel, Topology};

pub const MIN_NODES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    /// Chebyshev–Lobatto nodes with Clenshaw–Curtis weights on `[0, T]`.
    LobattoInterval,
    /// Equispaced nodes on the circle of length `T`.
    UniformPeriodic,
}

#[derive(Debug, Clone)]
pub struct Grid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    kind: GridKind,
    length: f64,
}

impl Grid {
    /// Chebyshev–Lobatto grid with `n` nodes on `[0, length]`, increasing.
    pub fn lobatto(length: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid(format!("{n} nodes")));
        }
        let m = n - 1;
        let nodes = (0..n)
            .map(|k| {
                let s = (0.5 * PI * k as f64 / m as f64).sin();
                // T (1 - cos θ)/2 = T sin²(θ/2), exact at both ends
                length * s * s
            })
            .collect();
        let weights = clenshaw_curtis(m)
            .into_iter()
            .map(|w| 0.5 * length * w)
            .collect();
        Ok(Grid {
            nodes,
            weights,
            kind: GridKind::LobattoInterval,
            length,
        })
    }

    /// Uniform periodic grid with `n` nodes on the circle of length `length`.
    pub fn periodic(length: f64, n: usize) -> Result<Self> {
        if n == 0 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "periodic grids need an even node count, got {n}"
            )));
        }
        let h = length / n as f64;
        Ok(Grid {
            nodes: (0..n).map(|j| j as f64 * h).collect(),
            weights: vec![h; n],
            kind: GridKind::UniformPeriodic,
            length,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }

    /// Dense spectral first-derivative matrix on this grid.
    pub fn diff_matrix(&self) -> DMatrix<f64> {
        match self.kind {
            GridKind::LobattoInterval => chebyshev_diff(self.len(), self.length),
            GridKind::UniformPeriodic => fourier_diff(self.len(), self.length),
        }
    }
}

/// Clenshaw–Curtis weights on `[-1, 1]` for the `m + 1` points `cos(πk/m)`.
fn clenshaw_curtis(m: usize) -> Vec<f64> {
    let mf = m as f64;
    let mut w = vec![0.0; m + 1];
    if m == 0 {
        w[0] = 2.0;
        return w;
    }
    let theta = |k: usize| PI * k as f64 / mf;
    let mut v = vec![1.0; m.saturating_sub(1)];
    if m.is_multiple_of(2) {
        w[0] = 1.0 / (mf * mf - 1.0);
        w[m] = w[0];
        for k in 1..(m / 2) {
            let kf = k as f64;
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * kf * theta(i + 1)).cos() / (4.0 * kf * kf - 1.0);
            }
        }
        for (i, vi) in v.iter_mut().enumerate() {
            *vi -= (mf * theta(i + 1)).cos() / (mf * mf - 1.0);
        }
    } else {
        w[0] = 1.0 / (mf * mf);
        w[m] = w[0];
        for k in 1..=((m - 1) / 2) {
            let kf = k as f64;
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= 2.0 * (2.0 * kf * theta(i + 1)).cos() / (4.0 * kf * kf - 1.0);
            }
        }
    }
    for (i, vi) in v.iter().enumerate() {
        w[i + 1] = 2.0 * vi / mf;
    }
    w
}

/// Chebyshev differentiation on `t = T(1 - cos(πk/m))/2`, `k = 0..m`.
fn chebyshev_diff(n: usize, length: f64) -> DMatrix<f64> {
    let m = n - 1;
    let mf = m as f64;
    let c = |k: usize| if k == 0 || k == m { 2.0 } else { 1.0 };
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            // x_i - x_j via a product of sines to avoid cancellation
            let dx = 2.0
                * (PI * (i + j) as f64 / (2.0 * mf)).sin()
                * (PI * (j as f64 - i as f64) / (2.0 * mf)).sin();
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            d[(i, j)] = c(i) / c(j) * sign / dx;
        }
    }
    for i in 0..n {
        let s: f64 = (0..n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    // d/dt = -(2/T) d/dx
    d * (-2.0 / length)
}

/// Fourier differentiation for an even number of equispaced nodes.
fn fourier_diff(n: usize, length: f64) -> DMatrix<f64> {
    let h = 2.0 * PI / n as f64;
    let scale = 2.0 * PI / length;
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            let k = i as f64 - j as f64;
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            scale * 0.5 * sign / (0.5 * k * h).tan()
        }
    })
}

pub fn build_grid(m: &SymmetricModel, n: usize) -> Result<Grid> {
    if n < MIN_NODES {
        return Err(Error::InvalidGrid(format!("N below minimum {MIN_NODES}")));
    }
    match m.topology {
        Topology::Interval => Grid::lobatto(m.length, n),
        Topology::Circle => Grid::periodic(m.length, n),
    }
}

/// Linear functional approximating the outward normal derivative at one
/// boundary endpoint.
#[derive(Debug, Clone)]
pub struct BoundaryNode {
    pub node: usize,
    pub h: f64,
    pub b: f64,
    pub normal_deriv: DVector<f64>,
}

/// Assembled quadratic forms of the energy on one grid.
///
/// * `stiffness`: `uᵀSu ≈ ∫ |∇u|² dvol`
/// * `mass` (diagonal): `uᵀMu ≈ ∫ u² dvol`
/// * `curv_mass` (diagonal): `uᵀCu ≈ c_n ∫ R u² dvol`
/// * `bdry_mass` (diagonal): `uᵀBu = Σ ((n-2)/2) h b u(end)²`
#[derive(Debug)]
pub struct DiscreteOperators {
    model: Arc<SymmetricModel>,
    grid: Grid,
    diff: DMatrix<f64>,
    density: DVector<f64>,
    inv_metric: DVector<f64>,
    curvature: DVector<f64>,
    mass: DVector<f64>,
    stiffness: DMatrix<f64>,
    curv_mass: DVector<f64>,
    bdry_mass: DVector<f64>,
    boundary: Vec<BoundaryNode>,
    poles: Vec<usize>,
    energy: DMatrix<f64>,
    w12: DMatrix<f64>,
    w12_chol: Cholesky<f64, Dyn>,
    yamabe_sign: OnceLock<f64>,
}

pub fn assemble_operators(
    model: Arc<SymmetricModel>,
    grid: Grid,
) -> Result<Arc<DiscreteOperators>> {
    check_grid(&model, &grid)?;
    let len = grid.len();
    let nodes = grid.nodes();
    let density = model.density.sample(nodes)?;
    let inv_metric = model.inv_metric.sample(nodes)?;
    let curvature = model.scalar_curvature.sample(nodes)?;

    let mut poles = Vec::new();
    let mut boundary_ends = Vec::new();
    if let Some(ends) = model.endpoints {
        for (side, end) in ends.iter().enumerate() {
            let (idx, sign) = if side == 0 { (0, -1.0) } else { (len - 1, 1.0) };
            match *end {
                Endpoint::Pole => poles.push(idx),
                Endpoint::Boundary { h, b } => boundary_ends.push((idx, sign, h, b)),
            }
        }
    }
    for i in 0..len {
        if poles.contains(&i) {
            continue;
        }
        if !(density[i] > 0.0 && density[i].is_finite()) {
            return Err(Error::InvalidInput(format!(
                "density {} not positive at node {i}",
                density[i]
            )));
        }
        if !(inv_metric[i] > 0.0 && inv_metric[i].is_finite()) {
            return Err(Error::InvalidInput(format!(
                "metric coefficient {} not positive at node {i}",
                inv_metric[i]
            )));
        }
    }

    let weights = DVector::from_column_slice(grid.weights());
    let mass = weights.component_mul(&density);
    let diff = grid.diff_matrix();

    // S = Dᵀ diag(w a κ) D
    let flux_w = mass.component_mul(&inv_metric);
    let mut scaled = diff.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row *= flux_w[i];
    }
    let mut stiffness = diff.transpose() * scaled;
    if grid.kind() == GridKind::UniformPeriodic {
        add_nyquist_energy(&mut stiffness, &flux_w, grid.length());
    }
    symmetrize(&mut stiffness);

    let n = model.n as f64;
    let cn = model.conformal_constant();
    let curv_mass = DVector::from_fn(len, |i, _| cn * curvature[i] * mass[i]);
    let mut bdry_mass = DVector::zeros(len);
    let mut boundary = Vec::new();
    for &(idx, sign, h, b) in &boundary_ends {
        bdry_mass[idx] += 0.5 * (n - 2.0) * h * b;
        let row = diff.row(idx).transpose() * (sign * inv_metric[idx].sqrt());
        boundary.push(BoundaryNode {
            node: idx,
            h,
            b,
            normal_deriv: row,
        });
    }

    let mut energy = stiffness.clone();
    let mut w12 = stiffness.clone();
    for i in 0..len {
        energy[(i, i)] += curv_mass[i] + bdry_mass[i];
        w12[(i, i)] += mass[i];
    }
    let w12_chol = Cholesky::new(w12.clone()).ok_or_else(|| {
        Error::LinearAlgebra("W^{1,2} Gram matrix is not positive definite".into())
    })?;

    Ok(Arc::new(DiscreteOperators {
        model,
        grid,
        diff,
        density,
        inv_metric,
        curvature,
        mass,
        stiffness,
        curv_mass,
        bdry_mass,
        boundary,
        poles,
        energy,
        w12,
        w12_chol,
        yamabe_sign: OnceLock::new(),
    }))
}

/// The Fourier first derivative annihilates the Nyquist mode `(-1)^j`; give
/// it the energy `k_N² ∫ a κ` of its trigonometric interpolant instead, so
/// the discrete form has no spurious zero-energy oscillation.
fn add_nyquist_energy(stiffness: &mut DMatrix<f64>, flux_w: &DVector<f64>, length: f64) {
    let len = flux_w.len();
    let k_nyq = PI * len as f64 / length;
    let coef = k_nyq * k_nyq * flux_w.sum() / (len as f64 * len as f64);
    for i in 0..len {
        for j in 0..len {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            stiffness[(i, j)] += coef * sign;
        }
    }
}

impl DiscreteOperators {
    pub fn model(&self) -> &Arc<SymmetricModel> {
        &self.model
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.model.n
    }

    pub fn critical_exponent(&self) -> f64 {
        self.model.critical_exponent()
    }

    pub fn conformal_constant(&self) -> f64 {
        self.model.conformal_constant()
    }

    pub fn diff(&self) -> &DMatrix<f64> {
        &self.diff
    }

    pub fn density(&self) -> &DVector<f64> {
        &self.density
    }

    pub fn inv_metric(&self) -> &DVector<f64> {
        &self.inv_metric
    }

    pub fn curvature(&self) -> &DVector<f64> {
        &self.curvature
    }

    /// Diagonal of the mass matrix: quadrature weight times density.
    pub fn mass(&self) -> &DVector<f64> {
        &self.mass
    }

    pub fn mass_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.mass)
    }

    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    pub fn curv_mass(&self) -> &DVector<f64> {
        &self.curv_mass
    }

    pub fn bdry_mass(&self) -> &DVector<f64> {
        &self.bdry_mass
    }

    pub fn boundary(&self) -> &[BoundaryNode] {
        &self.boundary
    }

    /// Node indices sitting on a pole of the symmetry.
    pub fn poles(&self) -> &[usize] {
        &self.poles
    }

    /// Whether node `i` is an interval endpoint.
    pub fn is_endpoint(&self, i: usize) -> bool {
        self.grid.kind() == GridKind::LobattoInterval && (i == 0 || i + 1 == self.len())
    }

    /// `S + C + B`: the quadratic form of the numerator of the quotient.
    pub fn energy(&self) -> &DMatrix<f64> {
        &self.energy
    }

    /// `S + M`: the `W^{1,2}(M)` Gram matrix.
    pub fn w12(&self) -> &DMatrix<f64> {
        &self.w12
    }

    /// Solves `(S + M) x = g`.
    pub fn w12_solve(&self, g: &DVector<f64>) -> DVector<f64> {
        self.w12_chol.solve(g)
    }

    pub fn volume(&self) -> f64 {
        self.mass.sum()
    }

    /// Sign of the lowest eigenvalue of the conformal Laplacian with the
    /// Robin condition, which is the sign of the Yamabe constant.
    pub fn yamabe_sign(&self) -> f64 {
        *self.yamabe_sign.get_or_init(|| {
            match generalized_symmetric_eigen(&self.energy, &self.mass_matrix()) {
                Ok(eig) => eig.values.first().copied().unwrap_or(0.0).signum(),
                Err(_) => f64::NAN,
            }
        })
    }
}

/// Profile Laplace–Beltrami operator `(1/a)(a κ u')'`, evaluated as
/// `(κ u')' + (a'/a) κ u'` away from poles and by its regular limit
/// `n κ u''` at poles.
pub fn profile_laplacian(
    diff: &DMatrix<f64>,
    density: &DVector<f64>,
    inv_metric: &DVector<f64>,
    poles: &[usize],
    dim: usize,
    u: &DVector<f64>,
) -> DVector<f64> {
    let du = diff * u;
    let flux = inv_metric.component_mul(&du);
    let dflux = diff * &flux;
    let da = diff * density;
    let nf = dim as f64;
    let d2u = if poles.is_empty() {
        None
    } else {
        Some(diff * &du)
    };
    DVector::from_fn(u.len(), |i, _| {
        if poles.contains(&i) {
            nf * inv_metric[i] * d2u.as_ref().map_or(0.0, |x| x[i])
        } else {
            dflux[i] + da[i] / density[i] * flux[i]
        }
    })
}

/// `(∫ |u|^p dvol)^{1/p}` by the grid quadrature.
pub fn lp_norm(ops: &DiscreteOperators, u: &DVector<f64>, p: f64) -> f64 {
    ops.mass()
        .iter()
        .zip(u.iter())
        .map(|(&m, &x)| m * x.abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}
