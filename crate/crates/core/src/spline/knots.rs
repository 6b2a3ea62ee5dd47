use serde::{Deserialize, Serialize};

use crate::error::{FairingError, Result};
use crate::scalar::Scalar;

/// Clamped knot vector on `[0, 1]`.
///
/// Holds `n + p + 1` nondecreasing knots where `n` is the number of control
/// points. The first and last `p + 1` knots are exactly `0` and `1`, and no
/// interior value repeats more than `p` times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnotVector<T> {
    degree: usize,
    knots: Vec<T>,
}

impl<T: Scalar> KnotVector<T> {
    pub fn new(degree: usize, knots: Vec<T>) -> Result<Self> {
        if degree < 1 {
            return Err(FairingError::InvalidKnots("degree must be at least 1".into()));
        }
        if knots.len() < 2 * (degree + 1) {
            return Err(FairingError::InvalidKnots(format!(
                "need at least {} knots for degree {degree}, got {}",
                2 * (degree + 1),
                knots.len()
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(FairingError::InvalidKnots("non-finite knot".into()));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(FairingError::InvalidKnots("knots must be nondecreasing".into()));
        }
        let len = knots.len();
        let clamped_lo = knots[..=degree].iter().all(|&k| k == T::zero());
        let clamped_hi = knots[len - degree - 1..].iter().all(|&k| k == T::one());
        if !clamped_lo || !clamped_hi {
            return Err(FairingError::InvalidKnots("knot vector must be clamped to [0, 1]".into()));
        }
        let interior = &knots[degree + 1..len - degree - 1];
        if interior.iter().any(|&k| k <= T::zero() || k >= T::one()) {
            return Err(FairingError::InvalidKnots("interior knots must lie strictly inside (0, 1)".into()));
        }
        let mut run = 1;
        for w in interior.windows(2) {
            run = if w[0] == w[1] { run + 1 } else { 1 };
            if run > degree {
                return Err(FairingError::InvalidKnots(format!(
                    "interior knot {} repeated more than {degree} times",
                    w[0]
                )));
            }
        }
        Ok(Self { degree, knots })
    }

    /// Knots `{0,…,0, 1,…,1}` of a single Bézier segment with `degree + 1`
    /// control points.
    pub fn bezier(degree: usize) -> Self {
        let mut knots = vec![T::zero(); degree + 1];
        knots.extend(std::iter::repeat_n(T::one(), degree + 1));
        Self::new(degree, knots).expect("bezier knots are valid")
    }

    /// Clamped knots with uniformly spaced interior values for `n` controls.
    pub fn uniform(n: usize, degree: usize) -> Result<Self> {
        if n < degree + 1 {
            return Err(FairingError::InvalidSize(format!("n = {n} < degree + 1 = {}", degree + 1)));
        }
        let spans = n - degree;
        let mut knots = vec![T::zero(); degree + 1];
        for i in 1..spans {
            knots.push(T::lit(i as f64 / spans as f64));
        }
        knots.extend(std::iter::repeat_n(T::one(), degree + 1));
        Self::new(degree, knots)
    }

    #[inline]
    pub fn degree(&self) -> usize {
        self.degree
    }

    #[inline]
    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    /// Number of basis functions (control points).
    #[inline]
    pub fn count(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn interior(&self) -> &[T] {
        &self.knots[self.degree + 1..self.knots.len() - self.degree - 1]
    }

    /// Index `k` of the span `[u_k, u_{k+1})` containing `t`.
    ///
    /// Interior knots use the right limit; `t = 1` maps to the last nonempty
    /// span.
    pub fn find_span(&self, t: T) -> Result<usize> {
        if !(t >= T::zero() && t <= T::one()) {
            return Err(FairingError::Domain(t.as_f64()));
        }
        let n = self.count();
        if t >= self.knots[n] {
            let mut k = n - 1;
            while self.knots[k] >= self.knots[k + 1] {
                k -= 1;
            }
            return Ok(k);
        }
        let upper = self.knots.partition_point(|&u| u <= t);
        Ok((upper - 1).clamp(self.degree, n - 1))
    }

    /// Start/end of every nonempty span, in order.
    pub fn spans(&self) -> impl Iterator<Item = (usize, T, T)> + '_ {
        (self.degree..self.count()).filter_map(move |k| {
            let (a, b) = (self.knots[k], self.knots[k + 1]);
            (b > a).then_some((k, a, b))
        })
    }

    pub fn multiplicity(&self, u: T) -> usize {
        self.knots.iter().filter(|&&k| k == u).count()
    }

    /// Greville abscissae: control coefficients that reproduce `f(t) = t`.
    pub fn greville(&self) -> Vec<T> {
        let p = self.degree;
        let denom = T::lit(p as f64);
        (0..self.count()).map(|j| self.knots[j + 1..=j + p].iter().copied().sum::<T>() / denom).collect()
    }

    pub(crate) fn with_inserted(&self, pos: usize, u: T) -> Self {
        let mut knots = self.knots.clone();
        knots.insert(pos, u);
        Self { degree: self.degree, knots }
    }
}

/// Clamped knot vector whose interior knots average `p` consecutive
/// parameters of the selected data points.
///
/// For a cubic with selected parameters `τ_1 … τ_n` the interior knots are
/// `(τ_{j−3} + τ_{j−2} + τ_{j−1}) / 3` for `j = 5 … n`.
pub fn make_knot_vector<T: Scalar>(params: &[T], indices: &[usize], degree: usize) -> Result<KnotVector<T>> {
    let n = indices.len();
    if n < degree + 1 {
        return Err(FairingError::InvalidSize(format!("n = {n} < degree + 1 = {}", degree + 1)));
    }
    let selected: Vec<T> = indices
        .iter()
        .map(|&i| params.get(i).copied().ok_or_else(|| FairingError::InvalidSize(format!("index {i} out of range"))))
        .collect::<Result<_>>()?;
    let denom = T::lit(degree as f64);
    let mut knots = vec![T::zero(); degree + 1];
    for start in 1..n - degree {
        let avg = selected[start..start + degree].iter().copied().sum::<T>() / denom;
        knots.push(avg);
    }
    knots.extend(std::iter::repeat_n(T::one(), degree + 1));
    KnotVector::new(degree, knots).map_err(|e| FairingError::DegenerateData(format!("knot construction failed: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bezier_case_has_no_interior_knots() {
        let kv = make_knot_vector(&[0.0, 0.3, 0.6, 1.0], &[0, 1, 2, 3], 3).unwrap();
        assert_eq!(kv.knots(), &[0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn single_interior_knot_is_three_point_average() {
        let kv = make_knot_vector::<f64>(&[0.0, 0.2, 0.5, 0.8, 1.0], &[0, 1, 2, 3, 4], 3).unwrap();
        assert_eq!(kv.interior().len(), 1);
        assert!((kv.interior()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_unclamped_and_decreasing() {
        assert!(KnotVector::new(1, vec![0.0, 0.1, 1.0, 1.0]).is_err());
        assert!(KnotVector::new(1, vec![0.0, 0.0, 0.6, 0.4, 1.0, 1.0]).is_err());
        assert!(KnotVector::new(2, vec![0.0, 0.0, 0.0, 0.5, 0.5, 0.5, 1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn span_conventions() {
        let kv = KnotVector::new(2, vec![0.0, 0.0, 0.0, 0.4, 0.7, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(kv.find_span(0.0).unwrap(), 2);
        assert_eq!(kv.find_span(0.4).unwrap(), 3);
        assert_eq!(kv.find_span(0.69).unwrap(), 3);
        assert_eq!(kv.find_span(1.0).unwrap(), 4);
        assert!(kv.find_span(1.0 + 1e-12).is_err());
        assert!(kv.find_span(f64::NAN).is_err());
    }

    #[test]
    fn greville_of_bezier_is_uniform() {
        let g = KnotVector::<f64>::bezier(3).greville();
        assert_eq!(g, vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
    }
}
