use super::matrix::{axpy, dot, norm, scale, Matrix};
use super::Rng;
use crate::error::{Error, Result};

/// Cyclic Jacobi rotation sweeps on a symmetric matrix.
///
/// Returns eigenvalues (unsorted) and the orthogonal eigenvector matrix with
/// eigenvectors in columns: `A = V diag(λ) Vᵀ`.
pub fn jacobi_symmetric_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    assert_eq!(n, a.cols(), "jacobi eigen needs a square matrix");
    let mut a = a.clone();
    let mut v = Matrix::identity(n);
    if n <= 1 {
        return ((0..n).map(|i| a.get(i, i)).collect(), v);
    }

    let frob: f64 = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| a.get(i, j).powi(2))
        .sum::<f64>()
        .sqrt();
    let tol = 1e-15 * frob.max(1e-300);

    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a.get(i, j).powi(2);
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= tol * 1e-3 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                // stable tangent of the rotation angle
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    ((0..n).map(|i| a.get(i, i)).collect(), v)
}

/// Thin SVD keeping components with `σ > rel_cutoff · σ_max`.
///
/// Computed through the Gram matrix `M Mᵀ`: the row count here is K·G, far
/// below the column count D, so the small symmetric eigenproblem is exact and
/// cheap. Returns descending singular values and the matching right-singular
/// vectors as rows.
pub fn thin_svd(m: &Matrix, rel_cutoff: f64) -> Result<(Vec<f64>, Matrix)> {
    m.check_finite("thin_svd")?;
    if !(rel_cutoff > 0.0 && rel_cutoff < 1.0) {
        return Err(Error::InvalidInput(format!(
            "thin_svd: rel_cutoff must lie in (0,1), got {rel_cutoff}"
        )));
    }
    let (eigvals, u) = jacobi_symmetric_eigen(&m.gram());
    let mut order: Vec<usize> = (0..eigvals.len()).collect();
    order.sort_by(|&a, &b| eigvals[b].total_cmp(&eigvals[a]));

    let sigma_max = eigvals[order[0]].max(0.0).sqrt();
    let mut sigmas = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    if sigma_max > 0.0 {
        for &idx in &order {
            let s = eigvals[idx].max(0.0).sqrt();
            if s <= rel_cutoff * sigma_max {
                break;
            }
            let u_col: Vec<f64> = (0..m.rows()).map(|i| u.get(i, idx)).collect();
            let mut v = m.rows_combination(&u_col);
            scale(1.0 / s, &mut v);
            sigmas.push(s);
            rows.push(v);
        }
    }
    // polish: the v_u are orthonormal up to roundoff; one Gram-Schmidt pass
    // brings them within the 1e-8 contract even near the cutoff
    let basis = orthonormalize_rows(&rows, 1e-12, m.cols());
    if basis.rows() < sigmas.len() {
        sigmas.truncate(basis.rows());
    }
    Ok((sigmas, basis))
}

/// Modified Gram-Schmidt over the rows of `M` in row order. Rows whose
/// residual norm falls to `rel_cutoff` times their original norm are dropped.
pub fn qr_orthonormalize(m: &Matrix, rel_cutoff: f64) -> Result<Matrix> {
    m.check_finite("qr_orthonormalize")?;
    let rows: Vec<Vec<f64>> = (0..m.rows()).map(|i| m.row(i).to_vec()).collect();
    Ok(orthonormalize_rows(&rows, rel_cutoff, m.cols()))
}

fn orthonormalize_rows(rows: &[Vec<f64>], rel_cutoff: f64, cols: usize) -> Matrix {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for row in rows {
        let orig = norm(row);
        let mut v = row.clone();
        // two projection passes keep orthogonality near machine precision
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&v, b);
                axpy(-c, b, &mut v);
            }
        }
        let res = norm(&v);
        if res > rel_cutoff * orig && res > 0.0 {
            scale(1.0 / res, &mut v);
            basis.push(v);
        }
    }
    if basis.is_empty() {
        Matrix::zeros(0, cols)
    } else {
        Matrix::from_rows(&basis)
    }
}

/// `r` orthonormal rows in `R^d`, Gram-Schmidt of i.i.d. standard normals.
pub fn random_orthonormal(r: usize, d: usize, rng: &mut Rng) -> Result<Matrix> {
    if r > d {
        return Err(Error::InvalidInput(format!(
            "random_orthonormal: r={r} exceeds d={d}"
        )));
    }
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while basis.len() < r {
        let mut v = rng.normal_vec(d);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&v, b);
                axpy(-c, b, &mut v);
            }
        }
        let n = norm(&v);
        if n > 1e-8 {
            scale(1.0 / n, &mut v);
            basis.push(v);
        }
        // a residual this small has probability ~0; redraw
    }
    if basis.is_empty() {
        Ok(Matrix::zeros(0, d))
    } else {
        Ok(Matrix::from_rows(&basis))
    }
}

/// Randomized range finder for the row space of `M`.
///
/// Draws a Gaussian test matrix Ω (cols × (target_r + oversample)), forms
/// Y = MΩ, and orthonormalizes the rows of YᵀM. Every such row is a linear
/// combination of rows of M, so the result spans the row space whenever
/// rank(M) ≤ target_r.
pub fn randomized_range_basis(
    m: &Matrix,
    target_r: usize,
    oversample: usize,
    rng: &mut Rng,
) -> Result<Matrix> {
    m.check_finite("randomized_range_basis")?;
    if target_r < 1 {
        return Err(Error::InvalidInput(
            "randomized_range_basis: target_r must be >= 1".into(),
        ));
    }
    let l = target_r + oversample;
    let mut omega = Matrix::zeros(m.cols(), l);
    for i in 0..m.cols() {
        for j in 0..l {
            omega.set(i, j, rng.standard_normal());
        }
    }
    let y = m.matmul(&omega); // rows × l
    let mut sketch = Matrix::zeros(l, m.cols());
    for j in 0..l {
        let coeffs: Vec<f64> = (0..m.rows()).map(|i| y.get(i, j)).collect();
        let row = m.rows_combination(&coeffs);
        sketch.row_mut(j).copy_from_slice(&row);
    }
    // normalize sketch rows so the drop criterion is scale-free
    for j in 0..l {
        let n = norm(sketch.row(j));
        if n > 0.0 {
            scale(1.0 / n, sketch.row_mut(j));
        }
    }
    qr_orthonormalize(&sketch, 1e-10)
}
