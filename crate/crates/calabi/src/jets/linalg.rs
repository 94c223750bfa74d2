//! Dense linear algebra over jet-valued matrices.
//!
//! Matrices are `Vec<Vec<Jet>>` in row-major layout. Factorizations use
//! partial pivoting on the value parts; a pivot whose value part is zero means
//! the matrix is singular at the base point and the factorization fails.

use super::{Jet, JetError};

/// LU factorization (with row pivoting) of a square jet matrix.
pub struct JetLu {
    n: usize,
    /// Combined L (unit lower, below diagonal) and U factors.
    lu: Vec<Vec<Jet>>,
    perm: Vec<usize>,

    sign: f64,
}

impl JetLu {
    pub fn factor(mut a: Vec<Vec<Jet>>) -> Result<JetLu, JetError> {
        let n = a.len();
        assert!(a.iter().all(|row| row.len() == n), "jet matrix must be square");
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let (pivot_row, pivot_abs) = (k..n)
                .map(|r| (r, a[r][k].value().abs()))
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .expect("non-empty column");
            if pivot_abs == 0.0 {
                return Err(JetError::SingularMatrix { pivot: pivot_abs, step: k });
            }
            if pivot_row != k {
                a.swap(k, pivot_row);
                perm.swap(k, pivot_row);
                sign = -sign;
            }
            let pivot_inv = a[k][k].recip()?;
            for r in k + 1..n {
                let factor = a[r][k].mul(&pivot_inv);
                for c in k + 1..n {
                    let delta = factor.mul(&a[k][c]);
                    a[r][c] = &a[r][c] - delta;
                }
                a[r][k] = factor;
            }
        }
        Ok(JetLu { n, lu: a, perm, sign })
    }

    /// Determinant as a jet (product of pivots, with permutation sign).
    pub fn det(&self) -> Jet {
        let mut d = self.lu[0][0].clone();
        for k in 1..self.n {
            d = d.mul(&self.lu[k][k]);
        }
        d.scaled(self.sign)
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[Jet]) -> Result<Vec<Jet>, JetError> {
        assert_eq!(b.len(), self.n);
        let mut y: Vec<Jet> = self.perm.iter().map(|&p| b[p].clone()).collect();
        for k in 0..self.n {
            for r in k + 1..self.n {
                let delta = self.lu[r][k].mul(&y[k]);
                y[r] = &y[r] - delta;
            }
        }
        for k in (0..self.n).rev() {
            for c in k + 1..self.n {
                let delta = self.lu[k][c].mul(&y[c]);
                y[k] = &y[k] - delta;
            }
            y[k] = y[k].try_div(&self.lu[k][k])?;
        }
        Ok(y)
    }

    /// Inverse matrix, column by column.
    pub fn inverse(&self) -> Result<Vec<Vec<Jet>>, JetError> {
        let space = self.lu[0][0].space().clone();
        let mut cols = Vec::with_capacity(self.n);
        for j in 0..self.n {
            let mut e: Vec<Jet> = (0..self.n).map(|_| space.zero()).collect();
            e[j] = space.constant(1.0);
            cols.push(self.solve(&e)?);
        }
        // Transpose column solutions into rows.
        Ok((0..self.n)
            .map(|i| (0..self.n).map(|j| cols[j][i].clone()).collect())
            .collect())
    }
}

/// Determinant of a square jet matrix.
pub fn jet_det(a: Vec<Vec<Jet>>) -> Result<Jet, JetError> {
    Ok(JetLu::factor(a)?.det())
}

/// Cofactor row of a bordered rectangular matrix: given `n` jet columns of
/// length `n+1` and a constant completion column `u`, returns weights `w` such
/// that `det([cols | v]) = Σ_k w_k v_k` for any jet column `v`.
///
/// `u` must make the completed matrix nonsingular at the base point; the
/// natural choice is (an approximation of) the normal direction to the value
/// columns.
pub fn border_cofactors(cols: &[Vec<Jet>], u: &[f64]) -> Result<Vec<Jet>, JetError> {
    let m = cols.len() + 1;
    assert!(cols.iter().all(|c| c.len() == m), "columns must have length n+1");
    assert_eq!(u.len(), m);
    let space = cols[0][0].space().clone();
    // Rows of S^T are the columns of S = [cols | u].
    let mut st: Vec<Vec<Jet>> = cols.to_vec();
    st.push(u.iter().map(|&ui| space.constant(ui)).collect());
    let lu = JetLu::factor(st)?;
    let det = lu.det();
    let mut rhs: Vec<Jet> = (0..m).map(|_| space.zero()).collect();
    rhs[m - 1] = space.constant(1.0);
    // Solving S^T y = e_m yields the last row of S^{-1}; scaling by det(S)
    // turns it into the cofactors of the last column of S, which do not
    // depend on the completion column u.
    let y = lu.solve(&rhs)?;
    Ok(y.into_iter().map(|yk| yk.mul(&det)).collect())
}
