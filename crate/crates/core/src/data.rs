use serde::{Deserialize, Serialize};

use crate::error::{FairingError, Result};
use crate::matrix::Mat;
use crate::scalar::Scalar;
use crate::spline::Parametrization;

/// Ordered data points with nondecreasing parameters in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataSet<T> {
    points: Mat<T>,
    params: Vec<T>,
}

fn check_params<T: Scalar>(params: &[T]) -> Result<()> {
    if params.iter().any(|t| !(*t >= T::zero() && *t <= T::one())) {
        return Err(FairingError::DegenerateData("parameters must lie in [0, 1]".into()));
    }
    if params.windows(2).any(|w| w[1] < w[0]) {
        return Err(FairingError::DegenerateData("parameters must be nondecreasing".into()));
    }
    Ok(())
}

/// Rescales nondecreasing parameters onto `[0, 1]`.
pub fn normalize_params<T: Scalar>(raw: &[T]) -> Result<Vec<T>> {
    let (Some(&lo), Some(&hi)) = (raw.first(), raw.last()) else {
        return Err(FairingError::InvalidSize("no parameters".into()));
    };
    if raw.windows(2).any(|w| w[1] < w[0]) {
        return Err(FairingError::DegenerateData("parameters must be nondecreasing".into()));
    }
    if !(hi > lo) {
        return Err(FairingError::DegenerateData("parameter range is empty".into()));
    }
    let mut out: Vec<T> = raw.iter().map(|&t| (t - lo) / (hi - lo)).collect();
    let last = out.len() - 1;
    out[0] = T::zero();
    out[last] = T::one();
    Ok(out)
}

impl<T: Scalar> DataSet<T> {
    pub fn new(points: Mat<T>, params: Vec<T>) -> Result<Self> {
        if points.rows() != params.len() {
            return Err(FairingError::InvalidSize(format!("{} points but {} parameters", points.rows(), params.len())));
        }
        if points.rows() < 2 {
            return Err(FairingError::InvalidSize("need at least two data points".into()));
        }
        if !points.is_finite() {
            return Err(FairingError::DegenerateData("non-finite coordinate".into()));
        }
        check_params(&params)?;
        Ok(Self { points, params })
    }

    /// Assigns parameters with the given rule.
    pub fn parametrized(points: Mat<T>, rule: Parametrization) -> Result<Self> {
        let params = rule.apply(&points)?;
        Self::new(points, params)
    }

    pub fn points(&self) -> &Mat<T> {
        &self.points
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn reparametrized(&self, rule: Parametrization) -> Result<Self> {
        Self::parametrized(self.points.clone(), rule)
    }
}

/// Data sampled on an `m1 × m2` parameter grid, points flattened
/// lexicographically (`i = a · m2 + b` has parameters `(s[a], t[b])`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDataSet<T> {
    points: Mat<T>,
    s: Vec<T>,
    t: Vec<T>,
}

impl<T: Scalar> GridDataSet<T> {
    pub fn new(points: Mat<T>, s: Vec<T>, t: Vec<T>) -> Result<Self> {
        if points.rows() != s.len() * t.len() {
            return Err(FairingError::InvalidSize(format!(
                "{} points do not fill a {}×{} grid",
                points.rows(),
                s.len(),
                t.len()
            )));
        }
        if s.len() < 2 || t.len() < 2 {
            return Err(FairingError::InvalidSize("grid needs at least 2 samples per direction".into()));
        }
        if !points.is_finite() {
            return Err(FairingError::DegenerateData("non-finite coordinate".into()));
        }
        check_params(&s)?;
        check_params(&t)?;
        Ok(Self { points, s, t })
    }

    pub fn points(&self) -> &Mat<T> {
        &self.points
    }

    pub fn s(&self) -> &[T] {
        &self.s
    }

    pub fn t(&self) -> &[T] {
        &self.t
    }

    pub fn grid_size(&self) -> (usize, usize) {
        (self.s.len(), self.t.len())
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.rows() == 0
    }

    /// Parameter pairs in lexicographic order.
    pub fn param_pairs(&self) -> Vec<(T, T)> {
        self.s.iter().flat_map(|&a| self.t.iter().map(move |&b| (a, b))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_maps_onto_unit_interval() {
        assert_eq!(normalize_params(&[2.0, 3.0, 3.0, 6.0]).unwrap(), vec![0.0, 0.25, 0.25, 1.0]);
        assert!(normalize_params(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn rejects_decreasing_params() {
        let pts = Mat::from_rows(&[[0.0], [1.0], [2.0]]);
        assert!(DataSet::new(pts, vec![0.0, 0.6, 0.5]).is_err());
    }

    #[test]
    fn grid_pairs_are_lexicographic() {
        let g = GridDataSet::new(Mat::zeros(6, 3), vec![0.0, 0.5, 1.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(g.param_pairs()[3], (0.5, 1.0));
    }
}
