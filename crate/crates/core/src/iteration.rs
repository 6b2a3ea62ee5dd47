//! The fairing-PIA iteration
//! `P_j ← P_j + μ_j [(1 − ω_j) δ_j − ω_j η_j]` and its metrics.

use serde::{Deserialize, Serialize};

use crate::assembly::{AssemblyBundle, CollocationMatrix, GramMatrix};
use crate::error::{FairingError, Result};
use crate::matrix::Mat;
use crate::scalar::Scalar;
use crate::spline::select_initial_controls;

/// Relative iteration error above which a run is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationState<T> {
    pub control: Mat<T>,
    pub k: usize,
}

impl<T: Scalar> IterationState<T> {
    pub fn new(control: Mat<T>) -> Self {
        Self { control, k: 0 }
    }

    /// `P⁰` taken from the data points at the selected indices.
    pub fn from_data(points: &Mat<T>, n: usize, degree: usize) -> Result<(Vec<usize>, Self)> {
        let (indices, control) = select_initial_controls(points, n, degree)?;
        Ok((indices, Self::new(control)))
    }

    pub fn zeros(n: usize, dim: usize) -> Self {
        Self::new(Mat::zeros(n, dim))
    }
}

/// Initial control points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    #[default]
    Data,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StoppingRule {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self { tol: 1e-6, max_iters: 10_000 }
    }
}

impl StoppingRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol >= 0.0) || !self.tol.is_finite() {
            return Err(FairingError::Config(format!("tolerance {} must be finite and nonnegative", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(FairingError::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIters,
    Diverged,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::MaxIters => "max_iters",
            StopReason::Diverged => "diverged",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub fit_abs: f64,
    pub energy_abs: f64,
    pub fit_rel: f64,
    pub energy_rel: f64,
    pub iter_rel: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub stop_reason: StopReason,
}

impl IterationTrace {
    pub fn first(&self) -> &IterationRecord {
        &self.records[0]
    }

    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("trace holds the initial record")
    }

    pub fn iterations(&self) -> usize {
        self.last().k - self.first().k
    }
}

/// `Q − N P`
pub fn difference_vectors<T: Scalar>(collocation: &CollocationMatrix<T>, data: &Mat<T>, control: &Mat<T>) -> Mat<T> {
    data.sub(&collocation.apply(control))
}

/// `δ_j = Σ_{h ∈ I_j} N_j(t_h) d_h`, summed over each group.
pub fn fitting_vectors<T: Scalar>(diff: &Mat<T>, groups: &[Vec<usize>], collocation: &CollocationMatrix<T>) -> Mat<T> {
    let mut out = Mat::zeros(groups.len(), diff.cols());
    for (j, group) in groups.iter().enumerate() {
        let row = out.row_mut(j);
        for &h in group {
            let w = collocation.row(h).find(|&(c, _)| c == j).map_or(T::zero(), |(_, v)| v);
            for (o, &d) in row.iter_mut().zip(diff.row(h)) {
                *o = *o + w * d;
            }
        }
    }
    out
}

/// `η = D P`
pub fn fairing_vectors<T: Scalar>(gram: &GramMatrix<T>, control: &Mat<T>) -> Mat<T> {
    gram.matrix().matmul(control)
}

/// One update in the per-control-point form.
pub fn step<T: Scalar>(
    bundle: &AssemblyBundle<T>,
    data: &Mat<T>,
    state: &IterationState<T>,
) -> Result<IterationState<T>> {
    let diff = difference_vectors(&bundle.collocation, data, &state.control);
    let delta = fitting_vectors(&diff, &bundle.groups, &bundle.collocation);
    let eta = fairing_vectors(&bundle.gram, &state.control);
    let mut next = state.control.clone();
    for j in 0..next.rows() {
        let (mu, w) = (bundle.lambda[j], bundle.omega[j]);
        let row = next.row_mut(j);
        for (c, (&dl, &et)) in row.iter_mut().zip(delta.row(j).iter().zip(eta.row(j))) {
            *c = *c + mu * ((T::one() - w) * dl - w * et);
        }
    }
    if !next.is_finite() {
        return Err(FairingError::Diverged(state.k + 1));
    }
    Ok(IterationState { control: next, k: state.k + 1 })
}

/// One update as `P ← (I − ΛA) P + Λ (I − Ω) NᵀQ`.
pub fn step_matrix_form<T: Scalar>(bundle: &AssemblyBundle<T>, state: &IterationState<T>) -> Result<IterationState<T>> {
    let n = bundle.control_count();
    let m = Mat::identity(n).sub(&bundle.a.scale_rows(&bundle.lambda));
    let next = m.matmul(&state.control).add(&bundle.rhs.scale_rows(&bundle.lambda));
    if !next.is_finite() {
        return Err(FairingError::Diverged(state.k + 1));
    }
    Ok(IterationState { control: next, k: state.k + 1 })
}

/// Root mean square of the point residuals.
pub fn absolute_fitting_error<T: Scalar>(collocation: &CollocationMatrix<T>, data: &Mat<T>, control: &Mat<T>) -> T {
    let m = T::from_usize(data.rows()).expect("count fits the scalar type");
    (difference_vectors(collocation, data, control).sum_sq() / m).sqrt()
}

/// `trace(Pᵀ D P)`
pub fn absolute_energy<T: Scalar>(gram: &GramMatrix<T>, control: &Mat<T>) -> T {
    gram.energy(control)
}

/// `‖(I − Ω)NᵀQ − A P‖_F`
pub fn iteration_error<T: Scalar>(bundle: &AssemblyBundle<T>, control: &Mat<T>) -> T {
    bundle.residual(control).norm_fro()
}

/// Absolute values a relative metric is measured against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub fit: f64,
    pub energy: f64,
    pub iter: f64,
}

fn ratio(num: f64, den: f64, what: &str) -> Result<f64> {
    if den != 0.0 {
        Ok(num / den)
    } else if num == 0.0 {
        Ok(0.0)
    } else {
        Err(FairingError::DegenerateData(format!("initial {what} is zero, relative value undefined")))
    }
}

fn absolute_values<T: Scalar>(bundle: &AssemblyBundle<T>, data: &Mat<T>, control: &Mat<T>) -> Baseline {
    Baseline {
        fit: absolute_fitting_error(&bundle.collocation, data, control).as_f64(),
        energy: absolute_energy(&bundle.gram, control).as_f64(),
        iter: iteration_error(bundle, control).as_f64(),
    }
}

/// Metrics of `state` relative to `baseline` (the iteration-0 values).
pub fn relative_metrics<T: Scalar>(
    bundle: &AssemblyBundle<T>,
    data: &Mat<T>,
    state: &IterationState<T>,
    baseline: &Baseline,
) -> Result<IterationRecord> {
    let abs = absolute_values(bundle, data, &state.control);
    Ok(IterationRecord {
        k: state.k,
        fit_abs: abs.fit,
        energy_abs: abs.energy,
        fit_rel: ratio(abs.fit, baseline.fit, "fitting error")?,
        energy_rel: ratio(abs.energy, baseline.energy, "energy")?,
        iter_rel: ratio(abs.iter, baseline.iter, "iteration error")?,
    })
}

pub fn baseline<T: Scalar>(bundle: &AssemblyBundle<T>, data: &Mat<T>, state: &IterationState<T>) -> Baseline {
    absolute_values(bundle, data, &state.control)
}

/// Iterates until `|ΔE_iter| < tol`, the iteration cap, or divergence.
///
/// Relative metrics are measured against `state` as given, so a run that
/// continues from an earlier round starts a fresh trace.
pub fn run<T: Scalar>(
    bundle: &AssemblyBundle<T>,
    data: &Mat<T>,
    state: IterationState<T>,
    stop: &StoppingRule,
) -> Result<(IterationState<T>, IterationTrace)> {
    stop.validate()?;
    let mut tracker = Tracker::start(bundle, data, &state)?;
    let mut state = state;
    let start = state.k;
    loop {
        if state.k - start >= stop.max_iters {
            return Ok((state, tracker.finish(StopReason::MaxIters)));
        }
        match tracker.advance(bundle, data, &state, Some(stop.tol))? {
            Advance::Continue(next) => state = next,
            Advance::Stop(next, reason) => return Ok((next, tracker.finish(reason))),
        }
    }
}

pub enum Advance<T> {
    Continue(IterationState<T>),
    Stop(IterationState<T>, StopReason),
}

/// Steps one iteration at a time while recording metrics against the state
/// the tracker was started from.
#[derive(Clone, Debug)]
pub struct Tracker {
    base: Baseline,
    records: Vec<IterationRecord>,
}

impl Tracker {
    pub fn start<T: Scalar>(bundle: &AssemblyBundle<T>, data: &Mat<T>, state: &IterationState<T>) -> Result<Self> {
        let base = baseline(bundle, data, state);
        let first = relative_metrics(bundle, data, state, &base)?;
        Ok(Self { base, records: vec![first] })
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("tracker holds the initial record")
    }

    /// One step. With `tol = None` only divergence stops the iteration.
    ///
    /// When the new iterate is not finite the previous state is returned
    /// with [`StopReason::Diverged`] and no record is added.
    pub fn advance<T: Scalar>(
        &mut self,
        bundle: &AssemblyBundle<T>,
        data: &Mat<T>,
        state: &IterationState<T>,
        tol: Option<f64>,
    ) -> Result<Advance<T>> {
        let next = match step(bundle, data, state) {
            Ok(s) => s,
            Err(FairingError::Diverged(_)) => return Ok(Advance::Stop(state.clone(), StopReason::Diverged)),
            Err(e) => return Err(e),
        };
        let rec = relative_metrics(bundle, data, &next, &self.base)?;
        if !(rec.fit_abs.is_finite() && rec.energy_abs.is_finite() && rec.iter_rel.is_finite()) {
            return Ok(Advance::Stop(state.clone(), StopReason::Diverged));
        }
        let prev = self.last().iter_rel;
        self.records.push(rec);
        if rec.iter_rel > DIVERGENCE_LIMIT {
            return Ok(Advance::Stop(next, StopReason::Diverged));
        }
        if tol.is_some_and(|tol| (rec.iter_rel - prev).abs() < tol) {
            return Ok(Advance::Stop(next, StopReason::Converged));
        }
        Ok(Advance::Continue(next))
    }

    pub fn finish(self, stop_reason: StopReason) -> IterationTrace {
        IterationTrace { records: self.records, stop_reason }
    }
}
