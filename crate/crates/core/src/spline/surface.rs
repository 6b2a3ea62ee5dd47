use serde::{Deserialize, Serialize};

use crate::error::{FairingError, Result};
use crate::matrix::Mat;
use crate::scalar::Scalar;
use crate::spline::basis::basis_all;
use crate::spline::knots::KnotVector;

/// Tensor-product B-spline surface.
///
/// The `n1 × n2` control net is stored flattened in lexicographic order:
/// grid cell `(h, l)` lives in row `h · n2 + l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplineSurface<T> {
    knots_s: KnotVector<T>,
    knots_t: KnotVector<T>,
    control: Mat<T>,
}

#[inline]
pub fn lex_index(h: usize, l: usize, n2: usize) -> usize {
    h * n2 + l
}

#[inline]
pub fn lex_cell(j: usize, n2: usize) -> (usize, usize) {
    (j / n2, j % n2)
}

/// Flattens a grid of points (`grid[h][l]` is a point) lexicographically.
pub fn flatten_grid<T: Scalar>(grid: &[Vec<Vec<T>>]) -> Result<Mat<T>> {
    let n2 = grid.first().map_or(0, Vec::len);
    let d = grid.first().and_then(|r| r.first()).map_or(0, Vec::len);
    let mut rows = Vec::with_capacity(grid.len() * n2);
    for row in grid {
        if row.len() != n2 {
            return Err(FairingError::InvalidSize("ragged control grid".into()));
        }
        for p in row {
            if p.len() != d {
                return Err(FairingError::InvalidSize("mixed point dimensions".into()));
            }
            rows.push(p.as_slice());
        }
    }
    Ok(Mat::from_rows(&rows))
}

/// Inverse of [`flatten_grid`].
pub fn unflatten_grid<T: Scalar>(flat: &Mat<T>, n1: usize, n2: usize) -> Result<Vec<Vec<Vec<T>>>> {
    if flat.rows() != n1 * n2 {
        return Err(FairingError::InvalidSize(format!("{} rows cannot form a {n1}×{n2} grid", flat.rows())));
    }
    Ok((0..n1).map(|h| (0..n2).map(|l| flat.row(lex_index(h, l, n2)).to_vec()).collect()).collect())
}

impl<T: Scalar> SplineSurface<T> {
    pub fn new(knots_s: KnotVector<T>, knots_t: KnotVector<T>, control: Mat<T>) -> Result<Self> {
        let expected = knots_s.count() * knots_t.count();
        if control.rows() != expected {
            return Err(FairingError::InvalidSize(format!(
                "{} control points for a {}×{} net",
                control.rows(),
                knots_s.count(),
                knots_t.count()
            )));
        }
        if !control.is_finite() {
            return Err(FairingError::DegenerateData("non-finite control point".into()));
        }
        Ok(Self { knots_s, knots_t, control })
    }

    pub fn knots_s(&self) -> &KnotVector<T> {
        &self.knots_s
    }

    pub fn knots_t(&self) -> &KnotVector<T> {
        &self.knots_t
    }

    pub fn control(&self) -> &Mat<T> {
        &self.control
    }

    pub fn net_size(&self) -> (usize, usize) {
        (self.knots_s.count(), self.knots_t.count())
    }

    pub fn dim(&self) -> usize {
        self.control.cols()
    }

    /// Partial derivative `∂^{r_s + r_t} / ∂s^{r_s} ∂t^{r_t}` at `(s, t)`.
    pub fn eval(&self, s: T, t: T, r_s: usize, r_t: usize) -> Result<Vec<T>> {
        let bs = basis_all(&self.knots_s, s, r_s)?;
        let bt = basis_all(&self.knots_t, t, r_t)?;
        let n2 = self.knots_t.count();
        let mut out = vec![T::zero(); self.dim()];
        for (h, ws) in bs.iter() {
            for (l, wt) in bt.iter() {
                let w = ws * wt;
                for (o, &c) in out.iter_mut().zip(self.control.row(lex_index(h, l, n2))) {
                    *o = *o + w * c;
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_net_reproduces_constant() {
        let ks = KnotVector::<f64>::uniform(5, 3).unwrap();
        let kt = KnotVector::uniform(4, 2).unwrap();
        let ctrl = Mat::from_fn(20, 3, |_, j| [0.5, 1.0, -3.0][j]);
        let srf = SplineSurface::new(ks, kt, ctrl).unwrap();
        let v = srf.eval(0.37, 0.81, 0, 0).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-14 && (v[1] - 1.0).abs() < 1e-14 && (v[2] + 3.0).abs() < 1e-14);
    }

    #[test]
    fn plane_has_no_second_partials() {
        let ks = KnotVector::<f64>::uniform(5, 3).unwrap();
        let kt = KnotVector::uniform(6, 3).unwrap();
        let (gs, gt) = (ks.greville(), kt.greville());
        let ctrl = Mat::from_fn(30, 3, |j, c| {
            let (h, l) = lex_cell(j, 6);
            [gs[h], gt[l], 0.0][c]
        });
        let srf = SplineSurface::new(ks, kt, ctrl).unwrap();
        for (rs, rt) in [(2, 0), (1, 1), (0, 2)] {
            let v = srf.eval(0.3, 0.6, rs, rt).unwrap();
            assert!(v.iter().all(|x| x.abs() < 1e-12));
        }
    }

    #[test]
    fn grid_flattening_round_trips() {
        let grid: Vec<Vec<Vec<f64>>> =
            (0..3).map(|h| (0..4).map(|l| vec![h as f64, l as f64, (h * l) as f64]).collect()).collect();
        let flat = flatten_grid(&grid).unwrap();
        assert_eq!(flat.row(lex_index(2, 1, 4)), &[2.0, 1.0, 2.0]);
        assert_eq!(unflatten_grid(&flat, 3, 4).unwrap(), grid);
    }
}
