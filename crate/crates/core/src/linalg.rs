//! Dense Hermitian helpers shared by the spectral and threshold code.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen, SVD};

use crate::error::{Error, Result};
use crate::C64;

pub fn hermitize(a: &DMatrix<C64>) -> DMatrix<C64> {
    let mut h = a + a.adjoint();
    h.scale_mut(0.5);
    h
}

fn check_finite(a: &DMatrix<C64>) -> Result<()> {
    if a.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalBreakdown("non-finite matrix entry".into()))
    }
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigenvalues(a: &DMatrix<C64>) -> Result<Vec<f64>> {
    check_finite(a)?;
    let mut v: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

pub fn min_eigenvalue(a: &DMatrix<C64>) -> Result<f64> {
    if a.nrows() == 0 {
        return Ok(f64::INFINITY);
    }
    Ok(eigenvalues(a)?[0])
}

/// Full Hermitian eigendecomposition, ascending eigenvalues.
pub fn eigen(a: &DMatrix<C64>) -> Result<(Vec<f64>, DMatrix<C64>)> {
    check_finite(a)?;
    let e = SymmetricEigen::try_new(a.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::NumericalBreakdown("Hermitian eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..e.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| e.eigenvalues[i].total_cmp(&e.eigenvalues[j]).then(i.cmp(&j)));
    let vals = order.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(a.nrows(), order.len(), |r, c| e.eigenvectors[(r, order[c])]);
    Ok((vals, vecs))
}

pub fn min_eigenpair(a: &DMatrix<C64>) -> Result<(f64, DVector<C64>)> {
    let (vals, vecs) = eigen(a)?;
    Ok((vals[0], vecs.column(0).into_owned()))
}

/// Rotate `x` so its largest-magnitude entry (first on ties) is real positive.
pub fn canonical_phase(x: &mut DVector<C64>) {
    let mut best = 0;
    let mut bv = -1.0;
    for (i, v) in x.iter().enumerate() {
        let a = v.norm();
        if a > bv * (1.0 + 1e-12) {
            bv = a;
            best = i;
        }
    }
    if bv > 0.0 {
        let ph = x[best].conj() / bv;
        for v in x.iter_mut() {
            *v *= ph;
        }
        x[best] = C64::new(x[best].norm(), 0.0);
    }
}

/// Divide each row by its Euclidean norm; returns the norms.
pub fn normalize_rows(c: &DMatrix<C64>) -> (DMatrix<C64>, Vec<f64>) {
    let mut out = c.clone();
    let mut scales = Vec::with_capacity(c.nrows());
    for i in 0..c.nrows() {
        let s = c.row(i).norm();
        if s > 0.0 {
            out.row_mut(i).unscale_mut(s);
        }
        scales.push(s);
    }
    (out, scales)
}

/// Orthonormal basis of `ker c` from a full SVD; the numerical rank must equal
/// `expected_rank`.
pub fn null_space(c: &DMatrix<C64>, expected_rank: usize) -> Result<DMatrix<C64>> {
    let (m, n) = c.shape();
    let padded = if m < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (m, n)).copy_from(c);
        p
    } else {
        c.clone()
    };
    check_finite(&padded)?;
    let svd = SVD::try_new(padded, false, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::NumericalBreakdown("SVD did not converge".into()))?;
    let sv = &svd.singular_values;
    let smax = sv.iter().fold(0.0f64, |a, &v| a.max(v));
    let rank = sv.iter().filter(|&&v| v > 1e-10 * smax).count();
    if rank != expected_rank {
        return Err(Error::RankDeficiency {
            found: rank,
            expected: expected_rank,
        });
    }
    let vt = svd.v_t.expect("v_t requested");
    let k = n - rank;
    // singular values are sorted descending, so the kernel is the tail
    Ok(DMatrix::from_fn(n, k, |r, j| vt[(rank + j, r)].conj()))
}

pub fn cholesky(a: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let h = hermitize(a);
    check_finite(&h)?;
    Cholesky::new(h)
        .map(|c| c.l())
        .ok_or_else(|| Error::NumericalBreakdown("mass form is not positive definite".into()))
}

/// `L^{-1} A L^{-H}` for lower-triangular `L`.
pub fn congruence(l: &DMatrix<C64>, a: &DMatrix<C64>) -> DMatrix<C64> {
    let x = l.solve_lower_triangular(a).expect("nonsingular Cholesky factor");
    let y = l
        .solve_lower_triangular(&x.adjoint())
        .expect("nonsingular Cholesky factor");
    hermitize(&y.adjoint())
}

/// `L^{-H} y`.
pub fn lift(l: &DMatrix<C64>, y: &DVector<C64>) -> DVector<C64> {
    l.ad_solve_lower_triangular(y).expect("nonsingular Cholesky factor")
}

pub fn frobenius(a: &DMatrix<C64>) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest `sigma` with `N x = sigma D x`, `D` Hermitian positive semidefinite.
///
/// Directions in the null space of `D` must also be annihilated by `N`;
/// otherwise the quotient is unbounded and `IndefiniteDenominator` is returned.
pub fn sup_quotient(num: &DMatrix<C64>, den: &DMatrix<C64>) -> Result<f64> {
    let k = den.nrows();
    if k == 0 {
        return Ok(0.0);
    }
    let nmax = num.iter().fold(0.0f64, |a, v| a.max(v.norm()));
    let (vals, vecs) = eigen(&hermitize(den))?;
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let tol = 1e-11 * scale;
    if vals[0] < -tol {
        return Err(Error::IndefiniteDenominator);
    }
    let range: Vec<usize> = (0..k).filter(|&i| vals[i] > tol).collect();
    let null: Vec<usize> = (0..k).filter(|&i| vals[i] <= tol).collect();
    if !null.is_empty() && nmax > 0.0 {
        let un = DMatrix::from_fn(k, null.len(), |r, c| vecs[(r, null[c])]);
        let leak = (num * &un).iter().fold(0.0f64, |a, v| a.max(v.norm()));
        if leak > 1e-9 * nmax {
            return Err(Error::IndefiniteDenominator);
        }
    }
    if range.is_empty() || nmax == 0.0 {
        return Ok(0.0);
    }
    let ur = DMatrix::from_fn(k, range.len(), |r, c| vecs[(r, range[c])] / vals[range[c]].sqrt());
    let red = hermitize(&(ur.adjoint() * num * &ur));
    let ev = eigenvalues(&red)?;
    Ok(*ev.last().unwrap())
}

/// Least-squares solve through an SVD, `(x, residual norm)`.
pub fn lstsq(a: &DMatrix<C64>, b: &DVector<C64>) -> Result<DVector<C64>> {
    let svd = SVD::<C64, Dyn, Dyn>::try_new(a.clone(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::NumericalBreakdown("SVD did not converge".into()))?;
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &v| a.max(v));
    svd.solve(b, 1e-13 * smax)
        .map_err(|e| Error::NumericalBreakdown(e.to_string()))
}
