//! Fairing of B-spline curves and surfaces by progressive iterative
//! approximation (fairing-PIA).
//!
//! Every control point is moved by a blend of a fitting vector, pulling the
//! spline towards the data, and a fairing vector, the gradient of an energy
//! `∫‖P⁽ʳ⁾‖²`. Per-point smoothing weights `ω_j` choose the blend and the
//! normalization weights `μ_j` the step size.
//!
//! ```
//! use fairpia::{datasets, Problem, MuPolicy, StoppingRule, Init, run};
//!
//! let data = datasets::sample_starfish::<f64>(100).unwrap();
//! let problem = Problem::curve(data, 34, 3).unwrap();
//! let bundle = problem.bundle(2, vec![1e-5; 34], &MuPolicy::PerRow).unwrap();
//! let start = problem.initial_state(Init::Data);
//! let (state, trace) = run(&bundle, problem.data_points(), start, &StoppingRule::default()).unwrap();
//! assert!(trace.last().energy_abs < trace.first().energy_abs);
//! assert_eq!(state.control.rows(), 34);
//! ```

// `!(x > 0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod data;
pub mod datasets;
pub mod error;
pub mod geometry;
pub mod iteration;
pub mod job;
pub mod matrix;
pub mod oracle;
pub mod problem;
pub mod quadrature;
pub mod scalar;
pub mod sparse;
pub mod spline;

pub use assembly::{AssemblyBundle, CollocationMatrix, Diagnostics, GramMatrix, MuPolicy};
pub use data::{DataSet, GridDataSet};
pub use error::{FairingError, Result};
pub use iteration::{run, step, Advance, Init, IterationState, IterationTrace, StopReason, StoppingRule, Tracker};
pub use job::{JobConfig, RunReport};
pub use matrix::Mat;
pub use problem::Problem;
pub use scalar::Scalar;
pub use spline::{KnotVector, Parametrization, SplineCurve, SplineSurface};

/// Double-precision instantiations.
pub type Matrix = Mat<f64>;
pub type Knots = KnotVector<f64>;
pub type Curve = SplineCurve<f64>;
pub type Surface = SplineSurface<f64>;
pub type Data = DataSet<f64>;
pub type Bundle = AssemblyBundle<f64>;
pub type State = IterationState<f64>;
