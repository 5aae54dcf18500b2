use std::ops::{Deref, Index};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest supported matrix order.
pub const MAX_ORDER: usize = 64;

/// Dense real vector.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Vector<T>(Vec<T>);

impl<T: Scalar> Vector<T> {
    pub fn new(data: Vec<T>) -> Self {
        Vector(data)
    }

    pub fn zeros(n: usize) -> Self {
        Vector(vec![T::zero(); n])
    }

    pub fn from_f64(data: &[f64]) -> Self {
        Vector(data.iter().map(|&v| T::lit(v)).collect())
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn dot(&self, other: &[T]) -> T {
        debug_assert_eq!(self.0.len(), other.len());
        self.0.iter().zip(other).map(|(&a, &b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> T {
        self.dot(&self.0)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn sub(&self, other: &[T]) -> Vector<T> {
        Vector(self.0.iter().zip(other).map(|(&a, &b)| a - b).collect())
    }

    /// `self + scale * other`
    pub fn add_scaled(&self, scale: T, other: &[T]) -> Vector<T> {
        Vector(self.0.iter().zip(other).map(|(&a, &b)| a + scale * b).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|v| v.as_f64()).collect()
    }
}

impl<T> Deref for Vector<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

impl<T> From<Vec<T>> for Vector<T> {
    fn from(v: Vec<T>) -> Self {
        Vector(v)
    }
}

/// Dense symmetric matrix stored row-major in full, with both triangles
/// always written together so `a[i][j] == a[j][i]` holds bit-for-bit.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix<T> {
    n: usize,
    data: Vec<T>,
}

fn check_order(n: usize) -> Result<()> {
    if n == 0 || n > MAX_ORDER {
        return Err(Error::Domain(format!(
            "matrix order must be in 1..={MAX_ORDER}, got {n}"
        )));
    }
    Ok(())
}

impl<T: Scalar> SymMatrix<T> {
    pub fn zeros(n: usize) -> Result<Self> {
        check_order(n)?;
        Ok(SymMatrix {
            n,
            data: vec![T::zero(); n * n],
        })
    }

    pub fn scaled_identity(n: usize, scale: T) -> Result<Self> {
        let mut m = Self::zeros(n)?;
        for i in 0..n {
            m.data[i * n + i] = scale;
        }
        Ok(m)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::scaled_identity(n, T::one())
    }

    pub fn from_diag(diag: &[T]) -> Result<Self> {
        let mut m = Self::zeros(diag.len())?;
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * m.n + i] = d;
        }
        Ok(m)
    }

    /// Builds from the upper triangle of `f(i, j)`, `i <= j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut m = Self::zeros(n)?;
        for i in 0..n {
            for j in i..n {
                m.set(i, j, f(i, j));
            }
        }
        Ok(m)
    }

    /// Rows must form an exactly symmetric square matrix.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        check_order(n)?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            for j in 0..i {
                if row[j] != rows[j][i] {
                    return Err(Error::Domain(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(SymMatrix {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul_vec(&self, v: &[T]) -> Vector<T> {
        debug_assert_eq!(v.len(), self.n);
        Vector::new(
            (0..self.n)
                .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
                .collect(),
        )
    }

    /// `vᵀ A v`
    pub fn quad_form(&self, v: &[T]) -> T {
        self.mul_vec(v).dot(v)
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `self += weight * v vᵀ`
    pub fn add_outer(&mut self, weight: T, v: &[T]) {
        debug_assert_eq!(v.len(), self.n);
        for i in 0..self.n {
            for j in i..self.n {
                let val = self.get(i, j) + weight * v[i] * v[j];
                self.set(i, j, val);
            }
        }
    }

    pub fn add(&self, other: &SymMatrix<T>) -> SymMatrix<T> {
        SymMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn scale(&self, s: T) -> SymMatrix<T> {
        SymMatrix {
            n: self.n,
            data: self.data.iter().map(|&a| a * s).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &SymMatrix<T>) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &a| m.max(a.abs()))
    }

    /// `max |(self · other − I)_ij|`
    pub fn product_identity_residual(&self, other: &SymMatrix<T>) -> T {
        let n = self.n;
        let mut worst = T::zero();
        for i in 0..n {
            for j in 0..n {
                let mut acc = T::zero();
                for k in 0..n {
                    acc = acc + self.get(i, k) * other.get(k, j);
                }
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((acc - target).abs());
            }
        }
        worst
    }

    /// Principal submatrix on `idx`.
    pub fn submatrix(&self, idx: &[usize]) -> Result<SymMatrix<T>> {
        SymMatrix::from_fn(idx.len(), |a, b| self.get(idx[a], idx[b]))
    }

    /// Eigenvalues in ascending order (cyclic Jacobi rotations).
    pub fn eigenvalues(&self) -> Vec<T> {
        let n = self.n;
        let mut a = self.data.clone();
        let tol = T::epsilon() * T::epsilon();
        for _sweep in 0..100 {
            let mut off = T::zero();
            for i in 0..n {
                for j in (i + 1)..n {
                    off = off + a[i * n + j] * a[i * n + j];
                }
            }
            let scale: T = (0..n).map(|i| a[i * n + i] * a[i * n + i]).sum();
            if off <= tol * scale || off == T::zero() {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (a[q * n + q] - a[p * n + p]) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<T> = (0..n).map(|i| a[i * n + i]).collect();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        ev
    }

    pub fn cholesky(&self) -> Result<Cholesky<T>> {
        Cholesky::factor(self)
    }

    pub fn inverse(&self) -> Result<SymMatrix<T>> {
        let chol = self.cholesky()?;
        let n = self.n;
        let mut cols = Vec::with_capacity(n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            cols.push(chol.solve(&e));
        }
        // average the two triangles to restore exact symmetry
        SymMatrix::from_fn(n, |i, j| (cols[j][i] + cols[i][j]) / T::lit(2.0))
    }
}

impl<T: Scalar> Index<(usize, usize)> for SymMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

/// Lower-triangular Cholesky factor `A = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    n: usize,
    lower: Vec<T>,
}

impl<T: Scalar> Cholesky<T> {
    pub fn factor(a: &SymMatrix<T>) -> Result<Self> {
        let n = a.order();
        let mut l = vec![T::zero(); n * n];
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d = d - l[j * n + k] * l[j * n + k];
            }
            if !(d > T::zero()) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s = s - l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(Cholesky { n, lower: l })
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let l = &self.lower;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s = s - l[i * n + k] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s = s - l[k * n + i] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        y
    }
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn sym_invert<T: Scalar>(a: &SymMatrix<T>) -> Result<SymMatrix<T>> {
    a.inverse()
}

/// Rank-one gain downdate `P − a β (Pφ)(Pφ)ᵀ` with `a = 1 / (1 + β φᵀPφ)`.
///
/// Returns the updated matrix together with `a`. The inverse satisfies
/// `P_new⁻¹ = P⁻¹ + β φ φᵀ`.
pub fn rank_one_downdate<T: Scalar>(p: &SymMatrix<T>, phi: &[T], beta: T) -> Result<(SymMatrix<T>, T)> {
    if phi.len() != p.order() {
        return Err(Error::DimensionMismatch {
            expected: p.order(),
            found: phi.len(),
        });
    }
    if !(beta > T::zero()) || !beta.is_finite() {
        return Err(Error::Domain(format!("beta must be finite and positive, got {beta}")));
    }
    let p_phi = p.mul_vec(phi);
    let quad = p_phi.dot(phi);
    let nonzero = phi.iter().any(|v| *v != T::zero());
    if quad < T::zero() || (nonzero && quad == T::zero()) || !quad.is_finite() {
        return Err(Error::NotPositiveDefinite { pivot: 0 });
    }
    let a = T::one() / (T::one() + beta * quad);
    let mut out = p.clone();
    out.add_outer(-(a * beta), &p_phi);
    Ok((out, a))
}
