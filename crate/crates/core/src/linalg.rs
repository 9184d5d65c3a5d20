//! Dense linear algebra helpers not provided directly by nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Replaces `m` by `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Orthonormal (Euclidean) basis of the orthogonal complement of the span of
/// `constraints`, returned as the columns of an `n × (n - k)` matrix.
///
/// Built from a full Householder QR of the `n × k` constraint matrix.
pub fn complement_basis(n: usize, constraints: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    let k = constraints.len();
    if k >= n {
        return Err(Error::LinearAlgebra(format!(
            "{k} constraints leave no complement in dimension {n}"
        )));
    }
    let mut a = DMatrix::zeros(n, k);
    for (j, c) in constraints.iter().enumerate() {
        if c.len() != n {
            return Err(Error::LinearAlgebra("constraint length mismatch".into()));
        }
        a.set_column(j, c);
    }
    let scale = a.amax().max(f64::MIN_POSITIVE);

    let mut reflectors: Vec<DVector<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let col = a.view((j, j), (n - j, 1)).column(0).into_owned();
        let norm = col.norm();
        if norm <= 1e-13 * scale {
            return Err(Error::LinearAlgebra(
                "constraints are linearly dependent".into(),
            ));
        }
        let alpha = if col[0] >= 0.0 { -norm } else { norm };
        let mut w = col;
        w[0] -= alpha;
        let wn = w.norm();
        w /= wn;
        // apply H = I - 2 w wᵀ to the trailing block
        for c in j..k {
            let mut view = a.view_mut((j, c), (n - j, 1));
            let dot = w.dot(&view.column(0));
            view.column_mut(0).axpy(-2.0 * dot, &w, 1.0);
        }
        let mut full = DVector::zeros(n);
        full.rows_mut(j, n - j).copy_from(&w);
        reflectors.push(full);
    }

    // Q e_c for c >= k, with Q = H_1 H_2 ... H_k.
    let mut q = DMatrix::zeros(n, n - k);
    for c in 0..(n - k) {
        let mut x = DVector::zeros(n);
        x[k + c] = 1.0;
        for w in reflectors.iter().rev() {
            let dot = w.dot(&x);
            x.axpy(-2.0 * dot, w, 1.0);
        }
        q.set_column(c, &x);
    }
    Ok(q)
}

/// Solution of the symmetric pencil `A x = λ B x`.
#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    /// Finite eigenvalues, ascending.
    pub values: Vec<f64>,
    /// Matching eigenvectors as columns, `B`-orthonormal.
    pub vectors: DMatrix<f64>,
}

/// Symmetric generalized eigenproblem with `B` positive semidefinite.
///
/// Directions in the null space of `B` carry infinite eigenvalues; they are
/// removed by static condensation (Schur complement of `A` on the null space)
/// before the reduced standard problem is solved.
pub fn generalized_symmetric_eigen(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<GeneralizedEigen> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(Error::LinearAlgebra("pencil dimensions differ".into()));
    }
    let mut bs = b.clone();
    symmetrize(&mut bs);
    let beig = bs.symmetric_eigen();
    let bmax = beig.eigenvalues.amax();
    if bmax <= 0.0 {
        return Err(Error::LinearAlgebra("mass matrix vanishes".into()));
    }
    let tol = 1e-13 * bmax;
    let pos: Vec<usize> = (0..n).filter(|&i| beig.eigenvalues[i] > tol).collect();
    let nul: Vec<usize> = (0..n).filter(|&i| beig.eigenvalues[i] <= tol).collect();
    if beig.eigenvalues.iter().any(|&l| l < -1e-10 * bmax) {
        return Err(Error::LinearAlgebra("mass matrix is indefinite".into()));
    }

    let u = &beig.eigenvectors;
    let up = u.select_columns(pos.iter());
    let at_pp = up.transpose() * a * &up;
    let dp: Vec<f64> = pos.iter().map(|&i| beig.eigenvalues[i]).collect();

    let (schur, condense) = if nul.is_empty() {
        (at_pp, None)
    } else {
        let u0 = u.select_columns(nul.iter());
        let a00 = u0.transpose() * a * &u0;
        let a0p = u0.transpose() * a * &up;
        let lu = a00.lu();
        let solved = lu
            .solve(&a0p)
            .ok_or_else(|| Error::LinearAlgebra("massless block is singular".into()))?;
        (&at_pp - a0p.transpose() * &solved, Some((u0, solved)))
    };

    let np = pos.len();
    let mut c = schur;
    for i in 0..np {
        for j in 0..np {
            c[(i, j)] /= (dp[i] * dp[j]).sqrt();
        }
    }
    symmetrize(&mut c);
    let ceig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..np).collect();
    order.sort_by(|&i, &j| ceig.eigenvalues[i].total_cmp(&ceig.eigenvalues[j]));

    let mut xp = DMatrix::zeros(np, np);
    for (col, &idx) in order.iter().enumerate() {
        for i in 0..np {
            xp[(i, col)] = ceig.eigenvectors[(i, idx)] / dp[i].sqrt();
        }
    }
    let mut vectors = &up * &xp;
    if let Some((u0, solved)) = condense {
        // x_0 = -A_00^{-1} A_0p x_p
        vectors -= u0 * (solved * &xp);
    }
    let values = order.iter().map(|&i| ceig.eigenvalues[i]).collect();
    Ok(GeneralizedEigen { values, vectors })
}
