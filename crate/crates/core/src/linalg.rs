//! Dense column-major storage, Householder QR and Cholesky.
//!
//! Only what the restricted least-squares fits and the covariance oracle need.
//! Columns are contiguous so the Householder sweeps run over unit-stride slices.

/// Dense real matrix stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct ColMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl ColMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    /// Build from column-major data. Panics if the length does not match.
    pub fn from_col_major(nrows: usize, ncols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), nrows * ncols, "column-major data length");
        Self { nrows, ncols, data }
    }

    pub fn from_row_major(nrows: usize, ncols: usize, rows: &[f64]) -> Self {
        assert_eq!(rows.len(), nrows * ncols, "row-major data length");
        let mut m = Self::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                m.data[j * nrows + i] = rows[i * ncols + j];
            }
        }
        m
    }

    pub fn from_columns(nrows: usize, columns: &[Vec<f64>]) -> Self {
        let mut data = Vec::with_capacity(nrows * columns.len());
        for c in columns {
            assert_eq!(c.len(), nrows, "column length");
            data.extend_from_slice(c);
        }
        Self {
            nrows,
            ncols: columns.len(),
            data,
        }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nrows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.nrows + i] = v;
    }

    pub fn as_col_major(&self) -> &[f64] {
        &self.data
    }

    /// Copy of the listed columns, in the listed order.
    pub fn select_columns(&self, cols: &[usize]) -> ColMatrix {
        let mut data = Vec::with_capacity(self.nrows * cols.len());
        for &j in cols {
            data.extend_from_slice(self.col(j));
        }
        ColMatrix {
            nrows: self.nrows,
            ncols: cols.len(),
            data,
        }
    }

    /// `self * v` for a vector of length `ncols`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.ncols);
        let mut out = vec![0.0; self.nrows];
        for (j, &vj) in v.iter().enumerate() {
            if vj != 0.0 {
                axpy(vj, self.col(j), &mut out);
            }
        }
        out
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Householder QR of a tall matrix, factored in place.
///
/// Column `j` keeps the Householder vector in rows `j..` and the strict upper
/// part of `R` in rows `..j`; the diagonal of `R` lives in `rdiag`.
#[derive(Debug, Clone)]
pub(crate) struct HouseholderQr {
    a: ColMatrix,
    /// `vᵀv` per reflector, zero when the reflector is the identity.
    vnorm_sq: Vec<f64>,
    rdiag: Vec<f64>,
}

impl HouseholderQr {
    pub fn factor(mut a: ColMatrix) -> Self {
        let n = a.nrows();
        let k = a.ncols().min(n);
        let mut vnorm_sq = vec![0.0; k];
        let mut rdiag = vec![0.0; k];
        for j in 0..k {
            let (head, tail) = a.data.split_at_mut((j + 1) * n);
            let v = &mut head[j * n + j..];
            let xnorm = norm_sq(v).sqrt();
            if xnorm == 0.0 {
                continue;
            }
            let x0 = v[0];
            let alpha = if x0 >= 0.0 { -xnorm } else { xnorm };
            v[0] = x0 - alpha;
            let vtv = 2.0 * xnorm * (xnorm + x0.abs());
            vnorm_sq[j] = vtv;
            rdiag[j] = alpha;
            let v: &[f64] = v;
            for c in tail.chunks_exact_mut(n) {
                let col = &mut c[j..];
                let s = 2.0 * dot(v, col) / vtv;
                if s != 0.0 {
                    axpy(-s, v, col);
                }
            }
        }
        Self { a, vnorm_sq, rdiag }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.a.nrows()
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.rdiag.len()
    }

    /// Entry `R[i, j]` for `i <= j`.
    #[inline]
    pub fn r(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i <= j);
        if i == j {
            self.rdiag[j]
        } else {
            self.a.get(i, j)
        }
    }

    /// Overwrite `y` with `Qᵀy`.
    pub fn apply_qt(&self, y: &mut [f64]) {
        let n = self.nrows();
        assert_eq!(y.len(), n);
        for j in 0..self.ncols() {
            let vtv = self.vnorm_sq[j];
            if vtv == 0.0 {
                continue;
            }
            let v = &self.a.col(j)[j..];
            let seg = &mut y[j..];
            let s = 2.0 * dot(v, seg) / vtv;
            axpy(-s, v, seg);
        }
    }

    /// Numerical rank of the leading `k` columns, using the tolerance
    /// `eps * max(n, k) * max |R_ii|` over that leading block.
    pub fn leading_rank(&self, k: usize) -> usize {
        let diag = &self.rdiag[..k];
        let scale = diag.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        if scale == 0.0 {
            return 0;
        }
        let tol = f64::EPSILON * self.nrows().max(k) as f64 * scale;
        diag.iter().filter(|d| d.abs() > tol).count()
    }

    /// Solve `R[..k, ..k] x = rhs[..k]` by back substitution.
    pub fn solve_leading(&self, k: usize, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs[..k].to_vec();
        for i in (0..k).rev() {
            let mut s = x[i];
            for j in i + 1..k {
                s -= self.r(i, j) * x[j];
            }
            x[i] = s / self.rdiag[i];
        }
        x
    }

    /// Rows of `R⁻¹` for the leading `k×k` block, as a row-major `k×k` buffer.
    pub fn inverse_r(&self, k: usize) -> Vec<f64> {
        // Column j of R⁻¹ solves R x = e_j; only rows <= j are nonzero.
        let mut inv = vec![0.0; k * k];
        for j in 0..k {
            inv[j * k + j] = 1.0 / self.rdiag[j];
            for i in (0..j).rev() {
                let mut s = 0.0;
                for l in i + 1..=j {
                    s += self.r(i, l) * inv[l * k + j];
                }
                inv[i * k + j] = -s / self.rdiag[i];
            }
        }
        inv
    }
}

/// Lower Cholesky factor of a symmetric positive-definite row-major matrix.
/// Returns `None` when a pivot is not strictly positive.
pub(crate) fn cholesky(a: &[f64], p: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), p * p);
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = a[i * p + j];
            for t in 0..j {
                s -= l[i * p + t] * l[j * p + t];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    Some(l)
}

/// Solve `L z = b` in place for lower-triangular row-major `L`.
pub(crate) fn forward_substitute(l: &[f64], p: usize, b: &mut [f64]) {
    for i in 0..p {
        let mut s = b[i];
        for t in 0..i {
            s -= l[i * p + t] * b[t];
        }
        b[i] = s / l[i * p + i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn qr_reproduces_least_squares_solution() {
        // x = [1 0; 1 1; 1 2], y = (1, 2, 4): normal equations give (5/6, 3/2).
        let a = ColMatrix::from_row_major(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let qr = HouseholderQr::factor(a);
        let mut y = vec![1.0, 2.0, 4.0];
        qr.apply_qt(&mut y);
        let b = qr.solve_leading(2, &y);
        assert_relative_eq!(b[0], 5.0 / 6.0, epsilon = 1e-14);
        assert_relative_eq!(b[1], 1.5, epsilon = 1e-14);
        assert_relative_eq!(y[2] * y[2], 1.0 / 6.0, epsilon = 1e-14);
    }

    #[test]
    fn inverse_r_is_inverse() {
        let a = ColMatrix::from_row_major(
            4,
            3,
            &[2.0, 1.0, 0.5, 0.0, 3.0, 1.0, 1.0, 0.0, 4.0, -1.0, 2.0, 1.0],
        );
        let qr = HouseholderQr::factor(a);
        let inv = qr.inverse_r(3);
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for l in 0..3 {
                    let r = if i <= l { qr.r(i, l) } else { 0.0 };
                    s += r * inv[l * 3 + j];
                }
                let want = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(s, want, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn collinear_columns_lose_rank() {
        let a = ColMatrix::from_row_major(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let qr = HouseholderQr::factor(a);
        assert_eq!(qr.leading_rank(2), 1);
        assert_eq!(qr.leading_rank(1), 1);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        assert!(cholesky(&[1.0, 2.0, 2.0, 1.0], 2).is_none());
        let l = cholesky(&[4.0, 2.0, 2.0, 5.0], 2).unwrap();
        assert_eq!(l, vec![2.0, 0.0, 1.0, 2.0]);
    }
}
