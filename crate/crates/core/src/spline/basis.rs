//! Cox–de Boor evaluation of B-spline basis functions and their derivatives.

use crate::error::Result;
use crate::scalar::Scalar;
use crate::spline::knots::KnotVector;

/// The `p + 1` possibly nonzero basis values at one parameter.
///
/// `values[i]` belongs to basis function `first + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisValues<T> {
    pub first: usize,
    pub values: Vec<T>,
}

impl<T: Scalar> BasisValues<T> {
    pub fn iter(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.values.iter().enumerate().map(move |(i, &v)| (self.first + i, v))
    }

    /// Expands to a dense vector of length `n`.
    pub fn to_dense(&self, n: usize) -> Vec<T> {
        let mut out = vec![T::zero(); n];
        for (j, v) in self.iter() {
            out[j] = v;
        }
        out
    }
}

/// Values of the `r`-th derivative of every basis function that can be
/// nonzero at `t`.
pub fn basis_all<T: Scalar>(knots: &KnotVector<T>, t: T, r: usize) -> Result<BasisValues<T>> {
    let (span, mut ders) = basis_derivatives(knots, t, r)?;
    Ok(BasisValues { first: span - knots.degree(), values: ders.swap_remove(r) })
}

/// All derivatives `0..=max_order` at `t`; `ders[k][i]` is the `k`-th
/// derivative of basis `span − p + i`. Orders above the degree are zero.
pub fn basis_derivatives<T: Scalar>(knots: &KnotVector<T>, t: T, max_order: usize) -> Result<(usize, Vec<Vec<T>>)> {
    let span = knots.find_span(t)?;
    let p = knots.degree();
    let u = knots.knots();

    // ndu[j][r]: basis values (upper triangle incl. diagonal) and knot
    // differences (lower triangle).
    let mut ndu = vec![vec![T::zero(); p + 1]; p + 1];
    let mut left = vec![T::zero(); p + 1];
    let mut right = vec![T::zero(); p + 1];
    ndu[0][0] = T::one();
    for j in 1..=p {
        left[j] = t - u[span + 1 - j];
        right[j] = u[span + j] - t;
        let mut saved = T::zero();
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }

    let mut ders = vec![vec![T::zero(); p + 1]; max_order + 1];
    for j in 0..=p {
        ders[0][j] = ndu[j][p];
    }

    let top = max_order.min(p);
    let mut a = vec![vec![T::zero(); p + 1]; 2];
    for r in 0..=p {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = T::one();
        for k in 1..=top {
            let mut d = T::zero();
            let rk = r as isize - k as isize;
            let pk = p - k;
            if r >= k {
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                d = a[s2][0] * ndu[rk as usize][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                d = d + a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d = d + a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }

    let mut factor = T::lit(p as f64);
    for (k, row) in ders.iter_mut().enumerate().take(top + 1).skip(1) {
        for v in row.iter_mut() {
            *v = *v * factor;
        }
        factor = factor * T::lit((p - k) as f64);
    }
    Ok((span, ders))
}
