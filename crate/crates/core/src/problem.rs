//! A dataset together with the spline space it is fitted in.

use crate::assembly::{
    collocation_matrix, collocation_matrix_surface, gram_matrix_curve, gram_matrix_surface, AssemblyBundle,
    CollocationMatrix, GramMatrix, MuPolicy,
};
use crate::data::{DataSet, GridDataSet};
use crate::error::{FairingError, Result};
use crate::iteration::{Init, IterationState};
use crate::matrix::Mat;
use crate::scalar::Scalar;
use crate::spline::{make_knot_vector, select_initial_indices, KnotVector, SplineCurve, SplineSurface};

#[derive(Clone, Debug)]
pub enum Problem<T> {
    Curve {
        data: DataSet<T>,
        knots: KnotVector<T>,
        /// Data indices the initial control points were taken from.
        indices: Vec<usize>,
    },
    Surface {
        data: GridDataSet<T>,
        knots_s: KnotVector<T>,
        knots_t: KnotVector<T>,
        indices_s: Vec<usize>,
        indices_t: Vec<usize>,
    },
}

impl<T: Scalar> Problem<T> {
    /// `n` control points of degree `degree` selected from the data.
    pub fn curve(data: DataSet<T>, n: usize, degree: usize) -> Result<Self> {
        let indices = select_initial_indices(data.len(), n, degree)?;
        let knots = make_knot_vector(data.params(), &indices, degree)?;
        Ok(Problem::Curve { data, knots, indices })
    }

    /// An `n1 × n2` net selected from a gridded dataset.
    pub fn surface(data: GridDataSet<T>, n1: usize, n2: usize, degree: usize) -> Result<Self> {
        let (m1, m2) = data.grid_size();
        let indices_s = select_initial_indices(m1, n1, degree)?;
        let indices_t = select_initial_indices(m2, n2, degree)?;
        let knots_s = make_knot_vector(data.s(), &indices_s, degree)?;
        let knots_t = make_knot_vector(data.t(), &indices_t, degree)?;
        Ok(Problem::Surface { data, knots_s, knots_t, indices_s, indices_t })
    }

    pub fn data_points(&self) -> &Mat<T> {
        match self {
            Problem::Curve { data, .. } => data.points(),
            Problem::Surface { data, .. } => data.points(),
        }
    }

    pub fn dim(&self) -> usize {
        self.data_points().cols()
    }

    pub fn data_shape(&self) -> Vec<usize> {
        match self {
            Problem::Curve { data, .. } => vec![data.len()],
            Problem::Surface { data, .. } => {
                let (a, b) = data.grid_size();
                vec![a, b]
            }
        }
    }

    pub fn control_shape(&self) -> Vec<usize> {
        match self {
            Problem::Curve { knots, .. } => vec![knots.count()],
            Problem::Surface { knots_s, knots_t, .. } => vec![knots_s.count(), knots_t.count()],
        }
    }

    pub fn control_count(&self) -> usize {
        self.control_shape().iter().product()
    }

    pub fn is_surface(&self) -> bool {
        matches!(self, Problem::Surface { .. })
    }

    pub fn collocation(&self) -> Result<CollocationMatrix<T>> {
        match self {
            Problem::Curve { data, knots, .. } => collocation_matrix(knots, data.params()),
            Problem::Surface { data, knots_s, knots_t, .. } => {
                collocation_matrix_surface(knots_s, knots_t, data.s(), data.t())
            }
        }
    }

    /// Curve Gram matrix of order `r`; surfaces always use the thin-plate functional.
    pub fn gram(&self, r: usize) -> Result<GramMatrix<T>> {
        match self {
            Problem::Curve { knots, .. } => gram_matrix_curve(knots, r),
            Problem::Surface { knots_s, knots_t, .. } => gram_matrix_surface(knots_s, knots_t),
        }
    }

    pub fn initial_state(&self, init: Init) -> IterationState<T> {
        match init {
            Init::Zero => IterationState::zeros(self.control_count(), self.dim()),
            Init::Data => {
                let pts = self.data_points();
                let rows: Vec<&[T]> = match self {
                    Problem::Curve { indices, .. } => indices.iter().map(|&i| pts.row(i)).collect(),
                    Problem::Surface { indices_s, indices_t, data, .. } => {
                        let m2 = data.grid_size().1;
                        indices_s.iter().flat_map(|&a| indices_t.iter().map(move |&b| pts.row(a * m2 + b))).collect()
                    }
                };
                IterationState::new(Mat::from_rows(&rows))
            }
        }
    }

    pub fn bundle(&self, r: usize, omega: Vec<T>, policy: &MuPolicy<T>) -> Result<AssemblyBundle<T>> {
        AssemblyBundle::new(self.collocation()?, self.gram(r)?, self.data_points(), omega, policy)
    }

    pub fn curve_with(&self, control: &Mat<T>) -> Result<SplineCurve<T>> {
        match self {
            Problem::Curve { knots, .. } => SplineCurve::new(knots.clone(), control.clone()),
            Problem::Surface { .. } => Err(FairingError::Unsupported("surface problem has no curve".into())),
        }
    }

    pub fn surface_with(&self, control: &Mat<T>) -> Result<SplineSurface<T>> {
        match self {
            Problem::Surface { knots_s, knots_t, .. } => {
                SplineSurface::new(knots_s.clone(), knots_t.clone(), control.clone())
            }
            Problem::Curve { .. } => Err(FairingError::Unsupported("curve problem has no surface".into())),
        }
    }

    /// Replaces the knot vector of a curve problem (after knot insertion).
    pub fn with_curve_knots(&self, new_knots: KnotVector<T>) -> Result<Self> {
        match self {
            Problem::Curve { data, indices, .. } => {
                Ok(Problem::Curve { data: data.clone(), knots: new_knots, indices: indices.clone() })
            }
            Problem::Surface { .. } => Err(FairingError::Unsupported("knot insertion on surfaces".into())),
        }
    }
}
