//! Reference solvers used to check the iteration: dense elimination, a Jacobi
//! eigensolver, the Moore–Penrose route for semidefinite systems, composite
//! Simpson quadrature and central differences.

use crate::error::{FairingError, Result};
use crate::matrix::Mat;
use crate::scalar::Scalar;

/// Solves `A X = RHS` by Gaussian elimination with partial pivoting.
pub fn direct_solve<T: Scalar>(a: &Mat<T>, rhs: &Mat<T>) -> Result<Mat<T>> {
    let n = a.rows();
    if !a.is_square() || rhs.rows() != n {
        return Err(FairingError::InvalidSize(format!(
            "cannot solve {}×{} system with {} right-hand rows",
            a.rows(),
            a.cols(),
            rhs.rows()
        )));
    }
    let threshold = T::tol(1e-14, 1.0) * a.norm_inf();
    let d = rhs.cols();
    let mut m = a.clone();
    let mut x = rhs.clone();
    for col in 0..n {
        let (piv, pval) =
            (col..n)
                .map(|r| (r, m[(r, col)].abs()))
                .fold((col, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(pval > threshold) {
            return Err(FairingError::Singular { pivot: pval.as_f64(), column: col });
        }
        if piv != col {
            for c in 0..n {
                let tmp = m[(col, c)];
                m[(col, c)] = m[(piv, c)];
                m[(piv, c)] = tmp;
            }
            for c in 0..d {
                let tmp = x[(col, c)];
                x[(col, c)] = x[(piv, c)];
                x[(piv, c)] = tmp;
            }
        }
        let p = m[(col, col)];
        for r in col + 1..n {
            let f = m[(r, col)] / p;
            if f == T::zero() {
                continue;
            }
            for c in col..n {
                m[(r, c)] = m[(r, c)] - f * m[(col, c)];
            }
            for c in 0..d {
                x[(r, c)] = x[(r, c)] - f * x[(col, c)];
            }
        }
    }
    for col in (0..n).rev() {
        for c in 0..d {
            let mut s = x[(col, c)];
            for k in col + 1..n {
                s = s - m[(col, k)] * x[(k, c)];
            }
            x[(col, c)] = s / m[(col, col)];
        }
    }
    Ok(x)
}

/// Minimizer of the equal-weight energy: solves `B P = (1 − ω) NᵀQ`.
pub fn energy_min_solve<T: Scalar>(b: &Mat<T>, omega: T, ntq: &Mat<T>) -> Result<Mat<T>> {
    direct_solve(b, &ntq.scale(T::one() - omega))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenDecomposition<T> {
    /// Descending.
    pub eigenvalues: Vec<T>,
    /// Columns are the eigenvectors.
    pub eigenvectors: Mat<T>,
}

impl<T: Scalar> EigenDecomposition<T> {
    /// `V diag(f(λ)) Vᵀ`
    pub fn reconstruct_with(&self, f: impl Fn(T) -> T) -> Mat<T> {
        let v = &self.eigenvectors;
        let n = v.rows();
        let lam: Vec<T> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        Mat::from_fn(n, n, |i, j| (0..n).fold(T::zero(), |s, k| s + v[(i, k)] * lam[k] * v[(j, k)]))
    }

    pub fn reconstruct(&self) -> Mat<T> {
        self.reconstruct_with(|l| l)
    }
}

pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops
/// below `1e−12 ‖B‖_F`.
pub fn symmetric_eigen<T: Scalar>(b: &Mat<T>) -> Result<EigenDecomposition<T>> {
    if !b.is_square() {
        return Err(FairingError::InvalidSize(format!("{}×{} matrix is not square", b.rows(), b.cols())));
    }
    let asym = b.asymmetry();
    if asym > T::tol(1e-10, 10.0) * b.max_abs().max(T::one()) {
        return Err(FairingError::NotSymmetric(asym.as_f64()));
    }
    let n = b.rows();
    let mut a = b.clone();
    let mut v = Mat::identity(n);
    let target = T::tol(1e-12, 4.0) * b.norm_fro();
    let off = |a: &Mat<T>| {
        let mut s = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s = s + a[(i, j)] * a[(i, j)];
                }
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    while off(&a) > target {
        sweeps += 1;
        if sweeps > JACOBI_MAX_SWEEPS {
            log::warn!("Jacobi eigensolver stopped after {JACOBI_MAX_SWEEPS} sweeps");
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap_or(std::cmp::Ordering::Equal));
    let eigenvalues = order.iter().map(|&i| a[(i, i)]).collect();
    let eigenvectors = Mat::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(EigenDecomposition { eigenvalues, eigenvectors })
}

/// Eigenvalues below this fraction of the largest count as zero.
pub const RANK_CUTOFF: f64 = 1e-10;

/// `B⁺` from the eigendecomposition of a symmetric PSD matrix.
pub fn pseudo_inverse<T: Scalar>(b: &Mat<T>) -> Result<Mat<T>> {
    let eig = symmetric_eigen(b)?;
    let lmax = eig.eigenvalues.iter().fold(T::zero(), |m, &l| m.max(l.abs()));
    let cut = T::lit(RANK_CUTOFF) * lmax;
    Ok(eig.reconstruct_with(|l| if l.abs() > cut && l != T::zero() { T::one() / l } else { T::zero() }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PseudoInverseSolution<T> {
    pub solution: Mat<T>,
    /// Whether `B B⁺ rhs = rhs`, i.e. the system is solvable.
    pub consistent: bool,
}

/// `(1 − ω) B⁺ NᵀQ`, with `rhs = NᵀQ`.
pub fn pseudo_inverse_solution<T: Scalar>(b: &Mat<T>, rhs: &Mat<T>, omega: T) -> Result<PseudoInverseSolution<T>> {
    let pinv = pseudo_inverse(b)?;
    let rhs = rhs.scale(T::one() - omega);
    let solution = pinv.matmul(&rhs);
    let scale = rhs.max_abs().max(T::min_positive_value());
    let consistent = b.matmul(&solution).sub(&rhs).max_abs() <= T::tol(1e-8, 100.0) * scale;
    Ok(PseudoInverseSolution { solution, consistent })
}

/// Composite Simpson rule with an even number of subintervals.
pub fn simpson_integral(f: impl Fn(f64) -> f64, a: f64, b: f64, subintervals: usize) -> Result<f64> {
    if subintervals < 2 || subintervals % 2 == 1 {
        return Err(FairingError::Config(format!("Simpson needs an even count ≥ 2, got {subintervals}")));
    }
    let h = (b - a) / subintervals as f64;
    let mut s = f(a) + f(b);
    for i in 1..subintervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    Ok(s * h / 3.0)
}

/// Central difference of order 1..3 on `[0, 1]`, `O(h²)` accurate.
pub fn finite_difference(f: impl Fn(f64) -> Vec<f64>, t: f64, order: usize, h: f64) -> Result<Vec<f64>> {
    let (stencil, denom): (&[(f64, f64)], f64) = match order {
        1 => (&[(-1.0, -0.5), (1.0, 0.5)], h),
        2 => (&[(-1.0, 1.0), (0.0, -2.0), (1.0, 1.0)], h * h),
        3 => (&[(-2.0, -0.5), (-1.0, 1.0), (1.0, -1.0), (2.0, 0.5)], h * h * h),
        _ => return Err(FairingError::Unsupported(format!("finite difference of order {order}"))),
    };
    let reach = stencil.iter().fold(0.0f64, |m, &(o, _)| m.max(o.abs())) * h;
    if t - reach < 0.0 || t + reach > 1.0 {
        return Err(FairingError::Domain(if t - reach < 0.0 { t - reach } else { t + reach }));
    }
    let mut out: Vec<f64> = Vec::new();
    for &(offset, w) in stencil {
        let v = f(t + offset * h);
        if out.is_empty() {
            out = vec![0.0; v.len()];
        }
        for (o, x) in out.iter_mut().zip(v) {
            *o += w * x;
        }
    }
    Ok(out.into_iter().map(|v| v / denom).collect())
}
