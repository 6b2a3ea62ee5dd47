use serde::{Deserialize, Serialize};

use crate::error::{FairingError, Result};
use crate::matrix::Mat;
use crate::scalar::Scalar;
use crate::spline::basis::basis_all;
use crate::spline::knots::KnotVector;

/// B-spline curve: clamped knots plus an `n × d` control matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplineCurve<T> {
    knots: KnotVector<T>,
    control: Mat<T>,
}

/// Where a knot landed during insertion; needed to carry per-control
/// attributes (smoothing weights) across the refinement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Insertion {
    pub span: usize,
    pub multiplicity: usize,
    pub degree: usize,
}

impl<T: Scalar> SplineCurve<T> {
    pub fn new(knots: KnotVector<T>, control: Mat<T>) -> Result<Self> {
        if control.rows() != knots.count() {
            return Err(FairingError::InvalidSize(format!(
                "{} control points for {} basis functions",
                control.rows(),
                knots.count()
            )));
        }
        if control.cols() == 0 {
            return Err(FairingError::InvalidSize("control points have zero dimension".into()));
        }
        if !control.is_finite() {
            return Err(FairingError::DegenerateData("non-finite control point".into()));
        }
        Ok(Self { knots, control })
    }

    pub fn knots(&self) -> &KnotVector<T> {
        &self.knots
    }

    pub fn control(&self) -> &Mat<T> {
        &self.control
    }

    pub fn degree(&self) -> usize {
        self.knots.degree()
    }

    pub fn dim(&self) -> usize {
        self.control.cols()
    }

    pub fn control_count(&self) -> usize {
        self.control.rows()
    }

    /// `r`-th derivative at `t`.
    pub fn eval(&self, t: T, r: usize) -> Result<Vec<T>> {
        let basis = basis_all(&self.knots, t, r)?;
        let mut out = vec![T::zero(); self.dim()];
        for (j, w) in basis.iter() {
            for (o, &c) in out.iter_mut().zip(self.control.row(j)) {
                *o = *o + w * c;
            }
        }
        Ok(out)
    }

    /// Evaluates at `count` uniformly spaced parameters including both ends.
    pub fn sample(&self, count: usize) -> Vec<Vec<T>> {
        let last = T::lit(count.saturating_sub(1).max(1) as f64);
        (0..count)
            .map(|i| {
                let t = if i + 1 == count { T::one() } else { T::lit(i as f64) / last };
                self.eval(t, 0).expect("sample parameter inside domain")
            })
            .collect()
    }

    /// Boehm single-knot insertion. The curve shape is unchanged.
    pub fn insert_knot(&self, u: T) -> Result<Self> {
        self.insert_knot_traced(u).map(|(c, _)| c)
    }

    pub fn insert_knot_traced(&self, u: T) -> Result<(Self, Insertion)> {
        if !(u > T::zero() && u < T::one()) {
            return Err(FairingError::Domain(u.as_f64()));
        }
        let p = self.degree();
        let s = self.knots.multiplicity(u);
        if s >= p {
            return Err(FairingError::KnotMultiplicity { u: u.as_f64(), degree: p });
        }
        let k = self.knots.find_span(u)?;
        let knots = self.knots.knots();
        let n = self.control_count();
        let d = self.dim();

        let mut control = Mat::zeros(n + 1, d);
        for i in 0..=n {
            let row: Vec<T> = if i + p <= k {
                self.control.row(i).to_vec()
            } else if i + s <= k {
                let alpha = (u - knots[i]) / (knots[i + p] - knots[i]);
                self.control
                    .row(i)
                    .iter()
                    .zip(self.control.row(i - 1))
                    .map(|(&a, &b)| alpha * a + (T::one() - alpha) * b)
                    .collect()
            } else {
                self.control.row(i - 1).to_vec()
            };
            control.row_mut(i).copy_from_slice(&row);
        }
        let curve = Self { knots: self.knots.with_inserted(k + 1, u), control };
        Ok((curve, Insertion { span: k, multiplicity: s, degree: p }))
    }
}

impl Insertion {
    /// Maps per-control values onto the refined control polygon: untouched
    /// points keep their value, each blended point takes the larger value
    /// of the two points it was blended from.
    pub fn remap<T: Scalar>(&self, values: &[T]) -> Vec<T> {
        let n = values.len();
        (0..=n)
            .map(|i| {
                if i + self.degree <= self.span {
                    values[i]
                } else if i + self.multiplicity <= self.span {
                    values[i].max(values[i - 1])
                } else {
                    values[i - 1]
                }
            })
            .collect()
    }
}
