use crate::error::{Error, Result};
use crate::model::BoxDomain;
use crate::numerics::{SymMatrix, Vector};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Bound {
    Free,
    Lower,
    Upper,
    Fixed,
}

/// `argmin_{z in box} (z − x)ᵀ Q (z − x)` for symmetric positive definite `Q`.
///
/// Primal active-set method started from the clipped point: each iteration
/// solves the equality-constrained problem on the free coordinates, steps
/// toward it until a bound blocks, and releases the bound with the worst
/// multiplier once the step is unblocked. Terminates when the KKT
/// conditions hold to a relative tolerance of 1e-10.
pub fn project<T: Scalar>(x: &[T], q: &SymMatrix<T>, domain: &BoxDomain<T>) -> Result<Vector<T>> {
    let n = domain.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x.len(),
        });
    }
    if q.order() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: q.order(),
        });
    }
    if domain.contains(x) {
        return Ok(Vector::new(x.to_vec()));
    }
    let (lo, hi) = (domain.lo(), domain.hi());

    let mut z = domain.clip(x).into_inner();
    let mut status: Vec<Bound> = (0..n)
        .map(|i| {
            if lo[i] == hi[i] {
                Bound::Fixed
            } else if x[i] < lo[i] {
                Bound::Lower
            } else if x[i] > hi[i] {
                Bound::Upper
            } else {
                Bound::Free
            }
        })
        .collect();

    let tol_base = T::lit(1e-10) * q.max_abs();
    let max_iter = 10 * n + 100;
    for _ in 0..max_iter {
        let free: Vec<usize> = (0..n).filter(|&i| status[i] == Bound::Free).collect();
        let mut target = z.clone();
        if !free.is_empty() {
            // Q_FF d_F = −Q_FB d_B with d = z − x
            let rhs: Vec<T> = free
                .iter()
                .map(|&i| {
                    -(0..n)
                        .filter(|&j| status[j] != Bound::Free)
                        .map(|j| q.get(i, j) * (z[j] - x[j]))
                        .sum::<T>()
                })
                .collect();
            let d_free = q.submatrix(&free)?.cholesky()?.solve(&rhs);
            for (&i, d) in free.iter().zip(d_free) {
                target[i] = x[i] + d;
            }
        }

        let mut step = T::one();
        let mut blocking: Option<(usize, Bound)> = None;
        for &i in &free {
            let dir = target[i] - z[i];
            if target[i] < lo[i] && dir < T::zero() {
                let t = (lo[i] - z[i]) / dir;
                if t < step {
                    step = t;
                    blocking = Some((i, Bound::Lower));
                }
            } else if target[i] > hi[i] && dir > T::zero() {
                let t = (hi[i] - z[i]) / dir;
                if t < step {
                    step = t;
                    blocking = Some((i, Bound::Upper));
                }
            }
        }

        match blocking {
            Some((b, side)) => {
                let step = step.max(T::zero());
                for &i in &free {
                    z[i] = (z[i] + step * (target[i] - z[i])).max(lo[i]).min(hi[i]);
                }
                z[b] = if side == Bound::Lower { lo[b] } else { hi[b] };
                status[b] = side;
            }
            None => {
                for &i in &free {
                    z[i] = target[i];
                }
                let d: Vec<T> = z.iter().zip(x).map(|(&a, &b)| a - b).collect();
                let grad = q.mul_vec(&d);
                let tol = tol_base * (d.iter().fold(T::zero(), |m, v| m.max(v.abs())) + T::one());
                // a lower bound needs grad >= 0, an upper bound grad <= 0
                let worst = (0..n)
                    .filter_map(|i| match status[i] {
                        Bound::Lower if grad[i] < -tol => Some((i, -grad[i])),
                        Bound::Upper if grad[i] > tol => Some((i, grad[i])),
                        _ => None,
                    })
                    .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
                match worst {
                    Some((i, _)) => status[i] = Bound::Free,
                    None => break,
                }
            }
        }
    }
    Ok(Vector::new(z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_square() -> BoxDomain<f64> {
        BoxDomain::from_f64(&[0.0, 0.0], &[1.0, 1.0]).unwrap()
    }

    fn objective(z: &[f64], x: &[f64], q: &SymMatrix<f64>) -> f64 {
        let d: Vec<f64> = z.iter().zip(x).map(|(a, b)| a - b).collect();
        q.quad_form(&d)
    }

    #[test]
    fn interior_point_is_fixed() {
        let q = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let x = [0.3, 0.7];
        assert_eq!(&*project(&x, &q, &unit_square()).unwrap(), &x);
    }

    #[test]
    fn diagonal_metric_clips() {
        let q = SymMatrix::from_diag(&[5.0, 0.1]).unwrap();
        let x = [1.7, -0.4];
        assert_eq!(&*project(&x, &q, &unit_square()).unwrap(), &[1.0, 0.0]);
    }

    #[test]
    fn coupled_metric_hand_solution() {
        let q = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let x = [1.2, 0.5];
        let z = project(&x, &q, &unit_square()).unwrap();
        assert_abs_diff_eq!(z[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(z[1], 0.6, epsilon = 1e-14);

        // grid search at 1e-3 then local refinement
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..=1000 {
            for j in 0..=1000 {
                let z = [i as f64 * 1e-3, j as f64 * 1e-3];
                let v = objective(&z, &x, &q);
                if v < best.0 {
                    best = (v, z[0], z[1]);
                }
            }
        }
        let (mut a, mut b) = (best.1, best.2);
        let mut h = 1e-3;
        while h > 1e-9 {
            let mut improved = false;
            for (da, db) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)] {
                let c = [(a + da).clamp(0.0, 1.0), (b + db).clamp(0.0, 1.0)];
                if objective(&c, &x, &q) < objective(&[a, b], &x, &q) {
                    a = c[0];
                    b = c[1];
                    improved = true;
                }
            }
            if !improved {
                h /= 2.0;
            }
        }
        assert_abs_diff_eq!(z[0], a, epsilon = 1e-6);
        assert_abs_diff_eq!(z[1], b, epsilon = 1e-6);
    }

    #[test]
    fn clipped_coordinate_moves_to_opposite_bound() {
        // x1 lies above the box, yet the strong negative coupling pushes the
        // minimizer to the lower bound of that coordinate
        let q = SymMatrix::from_rows(&[vec![1.0, -0.9], vec![-0.9, 1.0]]).unwrap();
        let z = project(&[3.0, 1.2], &q, &unit_square()).unwrap();
        assert_eq!(&*z, &[1.0, 0.0]);
    }

    #[test]
    fn degenerate_interval() {
        let dom = BoxDomain::from_f64(&[0.5, 0.0], &[0.5, 1.0]).unwrap();
        let q = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let z = project(&[0.0, 0.3], &q, &dom).unwrap();
        assert_eq!(z[0], 0.5);
        // free coordinate: 2 d1 = −1·(0.5) → d1 = −0.25
        assert_abs_diff_eq!(z[1], 0.05, epsilon = 1e-14);
    }

    #[test]
    fn dimension_checks() {
        let q = SymMatrix::<f64>::identity(2).unwrap();
        assert!(project(&[1.0], &q, &unit_square()).is_err());
        let q3 = SymMatrix::<f64>::identity(3).unwrap();
        assert!(project(&[1.0, 1.0], &q3, &unit_square()).is_err());
    }
}
