//! Small dense complex-matrix helpers: products, matrix exponential, and the
//! complex-orthogonal Jacobi diagonalization used to factor symmetric
//! diffusion matrices. Sizes here are a handful of modes, so everything is
//! straightforward O(n³) with no external backend.

use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Dense row-major complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[&[C64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map(|row| row.len()).unwrap_or(0);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c);
            data.extend_from_slice(row);
        }
        CMatrix { rows: r, cols: c, data }
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        let mut m = CMatrix::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut t = CMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "matrix product dimension mismatch");
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += aik * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        CMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Horizontal concatenation [self, other].
    pub fn hconcat(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.rows, other.rows);
        let mut out = CMatrix::zeros(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self[(i, j)];
            }
            for j in 0..other.cols {
                out[(i, self.cols + j)] = other[(i, j)];
            }
        }
        out
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let scale = self.max_abs().max(1.0);
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if (self[(i, j)] - self[(j, i)]).norm() > tol * scale {
                    return false;
                }
            }
        }
        true
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Matrix exponential by scaling-and-squaring with a truncated Taylor series.
/// Accurate to ~1e-13 relative for the small generators used by diffusion
/// gauges.
pub fn expm(a: &CMatrix) -> CMatrix {
    assert_eq!(a.rows, a.cols);
    let norm = a
        .data
        .chunks(a.cols)
        .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = 2.0f64.powi(-(s as i32));
    let t = CMatrix {
        rows: a.rows,
        cols: a.cols,
        data: a.data.iter().map(|z| z * scale).collect(),
    };
    let mut result = CMatrix::identity(a.rows);
    let mut term = CMatrix::identity(a.rows);
    for k in 1..=30 {
        term = term.mul(&t);
        for z in term.data.iter_mut() {
            *z /= k as f64;
        }
        for (r, w) in result.data.iter_mut().zip(&term.data) {
            *r += w;
        }
        if term.max_abs() < 1e-18 * result.max_abs().max(1.0) {
            break;
        }
    }
    for _ in 0..s {
        result = result.mul(&result);
    }
    result
}

/// Diagonalizes a complex symmetric matrix by a complex-orthogonal similarity,
/// returning (O, λ) with `a = O diag(λ) Oᵀ` and `O Oᵀ = I`.
///
/// Jacobi sweeps with complex rotation angles; the construction exists for
/// generic (diagonalizable) symmetric matrices and fails on the measure-zero
/// defective set, which is reported as an unsupported input.
pub fn complex_orthogonal_diagonalize(a: &CMatrix) -> Result<(CMatrix, Vec<C64>)> {
    if a.rows != a.cols {
        return Err(Error::Dimension("matrix must be square".into()));
    }
    if !a.is_symmetric(1e-12) {
        return Err(Error::Unsupported(
            "matrix is not symmetric to 1e-12".into(),
        ));
    }
    let n = a.rows;
    let mut m = a.clone();
    let mut o = CMatrix::identity(n);

    // Classical Jacobi: always annihilate the largest off-diagonal element.
    let max_rotations = 100 * n * n;
    for _ in 0..=max_rotations {
        let mut off = 0.0f64;
        let (mut p, mut q) = (0usize, 1usize);
        for i in 0..n {
            for j in (i + 1)..n {
                let norm = m[(i, j)].norm();
                if norm > off {
                    off = norm;
                    (p, q) = (i, j);
                }
            }
        }
        let scale = (0..n)
            .map(|i| m[(i, i)].norm())
            .fold(m.max_abs() * 1e-3, f64::max)
            .max(f64::MIN_POSITIVE);
        if off <= 1e-14 * scale {
            let lambda = (0..n).map(|i| m[(i, i)]).collect();
            return Ok((o, lambda));
        }

        // Annihilate (p,q): with the rotation applied as G A Gᵀ, t = s/c
        // solves t² − 2τt − 1 = 0, τ = (a_qq − a_pp)/(2 a_pq); the smaller
        // root keeps the rotation bounded.
        let apq = m[(p, q)];
        let tau = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
        let root = (tau * tau + 1.0).sqrt();
        let t1 = tau + root;
        let t2 = tau - root;
        let t = if t1.norm() <= t2.norm() { t1 } else { t2 };
        let csq = 1.0 + t * t;
        if csq.norm() < 1e-12 || t.norm() > 1e8 {
            return Err(Error::Unsupported(
                "defective symmetric matrix: no bounded complex-orthogonal rotation".into(),
            ));
        }
        let c = 1.0 / csq.sqrt();
        let s = t * c;
        // m ← G m Gᵀ with the rotation in the (p,q) plane.
        for k in 0..n {
            let mp = m[(p, k)];
            let mq = m[(q, k)];
            m[(p, k)] = c * mp + s * mq;
            m[(q, k)] = -s * mp + c * mq;
        }
        for k in 0..n {
            let mp = m[(k, p)];
            let mq = m[(k, q)];
            m[(k, p)] = c * mp + s * mq;
            m[(k, q)] = -s * mp + c * mq;
        }
        // Accumulate O ← O Gᵀ.
        for k in 0..n {
            let op = o[(k, p)];
            let oq = o[(k, q)];
            o[(k, p)] = c * op + s * oq;
            o[(k, q)] = -s * op + c * oq;
        }
    }
    Err(Error::Unsupported(
        "complex-orthogonal Jacobi did not converge (matrix may be defective)".into(),
    ))
}

/// Eigenvalues of a real symmetric matrix (cyclic Jacobi, values only).
pub fn symmetric_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let idx = |i: usize, j: usize| i * n + j;
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[idx(i, j)] * m[idx(i, j)];
            }
        }
        if off.sqrt() < 1e-12 * (1.0 + m.iter().map(|x| x.abs()).fold(0.0, f64::max)) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[idx(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let tau = (m[idx(q, q)] - m[idx(p, p)]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mp = m[idx(p, k)];
                    let mq = m[idx(q, k)];
                    m[idx(p, k)] = c * mp + s * mq;
                    m[idx(q, k)] = -s * mp + c * mq;
                }
                for k in 0..n {
                    let mp = m[idx(k, p)];
                    let mq = m[idx(k, q)];
                    m[idx(k, p)] = c * mp + s * mq;
                    m[idx(k, q)] = -s * mp + c * mq;
                }
            }
        }
    }
    (0..n).map(|i| m[idx(i, i)]).collect()
}
