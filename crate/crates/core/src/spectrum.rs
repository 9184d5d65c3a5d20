//! Second variation at a critical point: eigenpairs, kernel and `λ₁`.

use nalgebra::{DMatrix, DVector};

use crate::energy::{self, dual_norm, NormalizedState};
use crate::error::{Error, Result};
use crate::linalg::{complement_basis, generalized_symmetric_eigen};

pub const DEFAULT_KERNEL_TOL: f64 = 1e-6;
pub const MIN_GAP_RATIO: f64 = 10.0;
/// Gradient norm above which a state is flagged as non-critical.
pub const CRITICAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `M`-orthonormal columns in `T_v𝓑`.
    pub eigenvectors: DMatrix<f64>,
    pub v: NormalizedState,
    pub critical: bool,
}

impl SpectrumReport {
    pub fn eigenvector(&self, j: usize) -> DVector<f64> {
        self.eigenvectors.column(j).into_owned()
    }
}

#[derive(Debug, Clone)]
pub struct KernelSplit {
    pub k_basis: Vec<DVector<f64>>,
    pub lambda1: f64,
    pub kernel_dim: usize,
    /// `λ₁ / max |λ|` over the kernel; infinite for an exactly zero kernel.
    pub gap_ratio: f64,
    pub threshold: f64,
}

/// Fixes the sign so that the first coefficient above `1e-8·max` is positive.
fn fix_sign(x: &mut DVector<f64>) {
    let cut = 1e-8 * x.amax();
    if let Some(&first) = x.iter().find(|c| c.abs() > cut) {
        if first < 0.0 {
            x.neg_mut();
        }
    }
}

/// `k` lowest eigenpairs of `H w = λ M w` on `T_v𝓑`.
///
/// The tangent space is parametrized by an orthonormal basis of `ker ℓ`, so
/// the normal direction never enters the reduced pencil.
pub fn eigen_decompose(v: &NormalizedState, k: usize) -> Result<SpectrumReport> {
    let ops = v.ops();
    let gn = dual_norm(ops, &energy::gradient(v));
    let critical = gn <= CRITICAL_TOL;
    if !critical {
        log::warn!("spectrum requested at a non-critical state (gradient {gn:.3e})");
    }
    let z = complement_basis(ops.len(), &[v.tangent_functional()])?;
    let h = z.transpose() * energy::hessian_form(v) * &z;
    let m = z.transpose() * ops.mass_matrix() * &z;
    let ge = generalized_symmetric_eigen(&h, &m)?;
    let available = ge.values.len();
    if k == 0 || k > available {
        return Err(Error::ModesOutOfRange {
            requested: k,
            available,
        });
    }
    let mut vecs = &z * ge.vectors.columns(0, k);
    for mut col in vecs.column_iter_mut() {
        let mut c = col.clone_owned();
        fix_sign(&mut c);
        col.copy_from(&c);
    }
    Ok(SpectrumReport {
        eigenvalues: ge.values[..k].to_vec(),
        eigenvectors: vecs,
        v: v.clone(),
        critical,
    })
}

/// Index split of an ascending spectrum: `(kernel indices, λ₁, gap ratio, threshold)`.
pub fn split_eigenvalues(values: &[f64], tol_rel: f64) -> Result<(Vec<usize>, f64, f64, f64)> {
    let scale = values.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let threshold = tol_rel * scale;
    let kernel: Vec<usize> = (0..values.len())
        .filter(|&i| values[i].abs() <= threshold)
        .collect();
    let lambda1 = values
        .iter()
        .copied()
        .find(|&l| l > threshold)
        .ok_or_else(|| {
            Error::InvalidInput(
                "no eigenvalue above the kernel threshold; request more modes".into(),
            )
        })?;
    let kmax = kernel.iter().fold(0.0f64, |a, &i| a.max(values[i].abs()));
    let gap_ratio = if kernel.is_empty() || kmax == 0.0 {
        f64::INFINITY
    } else {
        lambda1 / kmax
    };
    if !kernel.is_empty() && gap_ratio < MIN_GAP_RATIO {
        return Err(Error::ClusterSplit { gap_ratio });
    }
    Ok((kernel, lambda1, gap_ratio, threshold))
}

pub fn kernel_split(spec: &SpectrumReport, tol_rel: f64) -> Result<KernelSplit> {
    let (idx, lambda1, gap_ratio, threshold) = split_eigenvalues(&spec.eigenvalues, tol_rel)?;
    let mass = spec.v.ops().mass();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(idx.len());
    for &i in &idx {
        let mut x = spec.eigenvector(i);
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&mass.component_mul(&x));
                x.axpy(-c, b, 1.0);
            }
        }
        let nrm = x.dot(&mass.component_mul(&x)).sqrt();
        basis.push(x / nrm);
    }
    Ok(KernelSplit {
        kernel_dim: basis.len(),
        k_basis: basis,
        lambda1,
        gap_ratio,
        threshold,
    })
}

/// Kernel-equation residual `−Δφ + c_n R φ − (2*−1) Q v^{2*−2} φ` (interior `L²`)
/// plus the Robin endpoint residual.
pub fn kernel_residual(v: &NormalizedState, phi: &DVector<f64>) -> f64 {
    let ops = v.ops();
    let p = ops.critical_exponent();
    let q = v.quotient();
    let pot = v
        .values()
        .map(|x| (p - 1.0) * q * crate::energy::abs_pow(x, p - 2.0));
    energy::linear_interior_residual(ops, phi, &pot) + energy::robin_residual(ops, phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disc::{assemble_operators, build_grid};
    use crate::model::{make_model, ModelSpec};
    use std::sync::Arc;

    fn constant_state(spec: ModelSpec, n: usize) -> NormalizedState {
        let m = Arc::new(make_model(&spec).unwrap());
        let g = build_grid(&m, n).unwrap();
        let ops = assemble_operators(m, g).unwrap();
        energy::normalize(&ops, &DVector::from_element(n, 1.0)).unwrap()
    }

    #[test]
    fn frank_bifurcation_kernel_is_two_dimensional() {
        let r = 1.0 / 3f64.sqrt();
        let v = constant_state(ModelSpec::FrankProduct { d: 5, r }, 64);
        let spec = eigen_decompose(&v, 8).unwrap();
        let scale = spec.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        assert!(
            spec.eigenvalues[0].abs() <= 1e-6 * scale && spec.eigenvalues[1].abs() <= 1e-6 * scale
        );
        let split = kernel_split(&spec, DEFAULT_KERNEL_TOL).unwrap();
        assert_eq!(split.kernel_dim, 2);
        // λ = 2(k²/r² − 3) for the S¹ mode k
        assert!((split.lambda1 - 18.0).abs() < 1e-8);
        let nodes = v.ops().grid().nodes();
        let cos = DVector::from_iterator(64, nodes.iter().map(|&t| (t / r).cos()));
        let sin = DVector::from_iterator(64, nodes.iter().map(|&t| (t / r).sin()));
        let mass = v.ops().mass();
        for k in &split.k_basis {
            let a = cos.dot(&mass.component_mul(k)) / cos.dot(&mass.component_mul(&cos));
            let b = sin.dot(&mass.component_mul(k)) / sin.dot(&mass.component_mul(&sin));
            assert!((k - &cos * a - &sin * b).amax() < 1e-9);
            assert!(kernel_residual(&v, k) < 1e-6 * crate::energy::l2_norm(v.ops(), k));
        }
        let g = split.k_basis[0].dot(&mass.component_mul(&split.k_basis[1]));
        assert!(g.abs() < 1e-12);
    }

    #[test]
    fn frank_subcritical_is_nondegenerate() {
        let r = 0.8 / 3f64.sqrt();
        let v = constant_state(ModelSpec::FrankProduct { d: 5, r }, 64);
        let spec = eigen_decompose(&v, 6).unwrap();
        assert!(spec.eigenvalues.iter().all(|&l| l > 0.0));
        assert!((spec.eigenvalues[0] - 2.0 * (1.0 / (r * r) - 3.0)).abs() < 1e-6);
        let split = kernel_split(&spec, DEFAULT_KERNEL_TOL).unwrap();
        assert_eq!(split.kernel_dim, 0);
        assert!((split.lambda1 - 3.375).abs() < 1e-8);
    }

    #[test]
    fn eigenvectors_are_tangent_and_rayleigh_consistent() {
        let v = constant_state(ModelSpec::FrankProduct { d: 5, r: 0.7 }, 32);
        let spec = eigen_decompose(&v, 10).unwrap();
        let ell = v.tangent_functional();
        let h = energy::hessian_form(&v);
        let mass = v.ops().mass();
        for (j, &lam) in spec.eigenvalues.iter().enumerate() {
            let w = spec.eigenvector(j);
            assert!(ell.dot(&w).abs() <= 1e-9);
            let mw = w.dot(&mass.component_mul(&w));
            assert!((mw - 1.0).abs() < 1e-10);
            let hw = w.dot(&(&h * &w));
            assert!((hw - lam * mw).abs() <= 1e-8 * lam.abs().max(1.0));
        }
        assert!(spec.eigenvalues.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn synthetic_positive_spectrum() {
        let (k, l1, gap, _) = split_eigenvalues(&[1.0, 2.0, 3.0], 1e-6).unwrap();
        assert!(k.is_empty());
        assert_eq!(l1, 1.0);
        assert!(gap.is_infinite());
    }

    #[test]
    fn near_degenerate_cluster_is_refused() {
        // 1e-6 lies inside the threshold, 5e-6 just outside it
        let err = split_eigenvalues(&[1e-6, 5e-6, 1.0], 3e-6)
            .map(|_| ())
            .unwrap_err();
        assert!(matches!(err, Error::ClusterSplit { .. }));
        assert!(split_eigenvalues(&[0.0, 0.0], 1e-6).is_err());
    }

    #[test]
    fn modes_out_of_range() {
        let v = constant_state(ModelSpec::Hemisphere { n: 3 }, 17);
        assert!(matches!(
            eigen_decompose(&v, 0),
            Err(Error::ModesOutOfRange { .. })
        ));
        assert!(matches!(
            eigen_decompose(&v, 100),
            Err(Error::ModesOutOfRange { .. })
        ));
    }

    #[test]
    fn hemisphere_spectrum_at_poles() {
        // the massless pole node is condensed out
        let v = constant_state(ModelSpec::Hemisphere { n: 3 }, 25);
        let spec = eigen_decompose(&v, 5).unwrap();
        assert!(spec.critical);
        let w = spec.eigenvector(0);
        assert!(v.tangent_functional().dot(&w).abs() < 1e-9);
    }
}
