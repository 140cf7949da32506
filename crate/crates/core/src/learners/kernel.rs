use nalgebra::DMatrix;

use super::LearnerError;

const BLOCK: usize = 96;

/// Pairwise squared Euclidean distances, `a.len() × b.len()`.
pub fn sq_dists(a: &[Vec<f64>], b: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| a[i].iter().zip(&b[j]).map(|(p, q)| (p - q) * (p - q)).sum())
}

/// `exp(-gamma · d)` elementwise.
pub fn rbf_from_sq(sq: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    sq.map(|d| (-gamma * d).exp())
}

pub fn rbf_kernel(a: &[Vec<f64>], b: &[Vec<f64>], gamma: f64) -> DMatrix<f64> {
    rbf_from_sq(&sq_dists(a, b), gamma)
}

/// Lower Cholesky factor written into the lower triangle of `a`.
///
/// Right-looking blocked variant; the strict upper triangle is left
/// unspecified.
pub fn cholesky_in_place(a: &mut DMatrix<f64>) -> Result<(), LearnerError> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut k = 0;
    while k < n {
        let b = BLOCK.min(n - k);
        // diagonal block
        for j in k..k + b {
            let mut s = a[(j, j)];
            for p in k..j {
                s -= a[(j, p)] * a[(j, p)];
            }
            if s.is_nan() || s <= 0.0 {
                return Err(LearnerError::NotPositiveDefinite(j));
            }
            let ljj = s.sqrt();
            a[(j, j)] = ljj;
            for i in j + 1..k + b {
                let mut v = a[(i, j)];
                for p in k..j {
                    v -= a[(i, p)] * a[(j, p)];
                }
                a[(i, j)] = v / ljj;
            }
        }
        let rest = n - k - b;
        if rest > 0 {
            // panel below the diagonal block, column by column
            for j in k..k + b {
                for p in k..j {
                    let f = a[(j, p)];
                    let (src, mut dst) = a.columns_range_pair_mut(p, j);
                    let src = src.rows(k + b, rest);
                    let mut dst = dst.rows_mut(k + b, rest);
                    dst.axpy(-f, &src, 1.0);
                }
                let inv = 1.0 / a[(j, j)];
                a.view_mut((k + b, j), (rest, 1)).scale_mut(inv);
            }
            let panel = a.view((k + b, k), (rest, b)).clone_owned();
            let panel_t = panel.transpose();
            a.view_mut((k + b, k + b), (rest, rest)).gemm(-1.0, &panel, &panel_t, 1.0);
        }
        k += b;
    }
    Ok(())
}

/// Solves `L Lᵀ x = rhs` given the factor from [`cholesky_in_place`].
pub fn cholesky_solve(l: &DMatrix<f64>, rhs: &[f64]) -> Vec<f64> {
    let n = l.nrows();
    let mut z = rhs.to_vec();
    for j in 0..n {
        z[j] /= l[(j, j)];
        let zj = z[j];
        let col = l.column(j);
        for i in j + 1..n {
            z[i] -= zj * col[i];
        }
    }
    for j in (0..n).rev() {
        let col = l.column(j);
        let mut v = z[j];
        for i in j + 1..n {
            v -= col[i] * z[i];
        }
        z[j] = v / l[(j, j)];
    }
    z
}
