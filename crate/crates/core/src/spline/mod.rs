//! B-spline primitives: knot vectors, basis evaluation, curves, surfaces,
//! parametrization and initial control selection.

pub mod basis;
pub mod curve;
pub mod knots;
pub mod params;
pub mod surface;

pub use basis::{basis_all, basis_derivatives, BasisValues};
pub use curve::{Insertion, SplineCurve};
pub use knots::{make_knot_vector, KnotVector};
pub use params::{
    centripetal_params, chord_length_params, select_initial_controls, select_initial_indices, uniform_params,
    Parametrization,
};
pub use surface::{flatten_grid, lex_cell, lex_index, unflatten_grid, SplineSurface};
