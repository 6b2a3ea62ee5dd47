use serde::{Deserialize, Serialize};

use crate::error::{FairingError, Result};
use crate::matrix::Mat;
use crate::scalar::Scalar;

/// How data parameters are assigned when a dataset carries none.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parametrization {
    #[default]
    ChordLength,
    Centripetal,
    Uniform,
}

impl Parametrization {
    pub fn apply<T: Scalar>(self, points: &Mat<T>) -> Result<Vec<T>> {
        match self {
            Parametrization::ChordLength => chord_length_params(points),
            Parametrization::Centripetal => centripetal_params(points),
            Parametrization::Uniform => uniform_params(points.rows()),
        }
    }
}

fn distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + (x - y) * (x - y)).sqrt()
}

fn cumulative_params<T: Scalar>(points: &Mat<T>, exponent: T) -> Result<Vec<T>> {
    let m = points.rows();
    if m < 2 {
        return Err(FairingError::InvalidSize(format!("need at least 2 points, got {m}")));
    }
    let mut acc = Vec::with_capacity(m);
    acc.push(T::zero());
    let mut total = T::zero();
    for i in 1..m {
        total = total + distance(points.row(i - 1), points.row(i)).powf(exponent);
        acc.push(total);
    }
    if !(total > T::zero()) || !total.is_finite() {
        return Err(FairingError::DegenerateData("all points coincide".into()));
    }
    for a in acc.iter_mut() {
        *a = *a / total;
    }
    acc[m - 1] = T::one();
    Ok(acc)
}

/// Parameters proportional to cumulative chord length, normalized to `[0, 1]`.
pub fn chord_length_params<T: Scalar>(points: &Mat<T>) -> Result<Vec<T>> {
    cumulative_params(points, T::one())
}

/// Centripetal parameters (square root of chord lengths).
pub fn centripetal_params<T: Scalar>(points: &Mat<T>) -> Result<Vec<T>> {
    cumulative_params(points, T::lit(0.5))
}

pub fn uniform_params<T: Scalar>(m: usize) -> Result<Vec<T>> {
    if m < 2 {
        return Err(FairingError::InvalidSize(format!("need at least 2 points, got {m}")));
    }
    let last = T::lit((m - 1) as f64);
    Ok((0..m).map(|i| if i + 1 == m { T::one() } else { T::lit(i as f64) / last }).collect())
}

/// Zero-based data indices of `n` initial control points spread over `m`
/// data points: `round(j (m − 1) / (n − 1))`, always including both ends.
pub fn select_initial_indices(m: usize, n: usize, degree: usize) -> Result<Vec<usize>> {
    if n > m {
        return Err(FairingError::InvalidSize(format!("n = {n} exceeds m = {m} data points")));
    }
    if n < degree + 1 {
        return Err(FairingError::InvalidSize(format!("n = {n} < degree + 1 = {}", degree + 1)));
    }
    let step = (m - 1) as f64 / (n - 1) as f64;
    Ok((0..n).map(|j| (j as f64 * step).round() as usize).collect())
}

/// Selected indices together with the matching rows of `points` as the
/// initial control matrix.
pub fn select_initial_controls<T: Scalar>(points: &Mat<T>, n: usize, degree: usize) -> Result<(Vec<usize>, Mat<T>)> {
    let indices = select_initial_indices(points.rows(), n, degree)?;
    let rows: Vec<&[T]> = indices.iter().map(|&i| points.row(i)).collect();
    Ok((indices, Mat::from_rows(&rows)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chord_length_examples() {
        let p = Mat::from_rows(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        assert_eq!(chord_length_params(&p).unwrap(), vec![0.0, 0.5, 1.0]);
        let p = Mat::from_rows(&[[0.0, 0.0], [3.0, 0.0], [4.0, 0.0]]);
        assert_eq!(chord_length_params(&p).unwrap(), vec![0.0, 0.75, 1.0]);
    }

    #[test]
    fn identical_points_are_degenerate() {
        let p = Mat::from_rows(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]);
        assert!(matches!(chord_length_params(&p), Err(FairingError::DegenerateData(_))));
    }

    #[test]
    fn duplicate_points_give_repeated_params() {
        let p = Mat::from_rows(&[[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [2.0, 0.0]]);
        assert_eq!(chord_length_params(&p).unwrap(), vec![0.0, 0.5, 0.5, 1.0]);
    }

    #[test]
    fn selection_examples() {
        assert_eq!(select_initial_indices(5, 5, 3).unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(select_initial_indices(9, 3, 2).unwrap(), vec![0, 4, 8]);
        assert!(select_initial_indices(4, 5, 3).is_err());
        assert!(select_initial_indices(10, 3, 3).is_err());
    }
}
