//! Interactive fairing sessions, independent of the HTTP layer.

use serde::{Deserialize, Serialize};

use fairpia::assembly::{AssemblyBundle, Diagnostics, MuPolicy};
use fairpia::datasets::{sample_starfish, sample_viviani, PointFile, VIVIANI_NOISE};
use fairpia::geometry::{curvature_comb, CurvatureComb};
use fairpia::iteration::{Advance, IterationRecord, IterationState, StopReason, StoppingRule, Tracker};
use fairpia::job::{apply_weight_ranges, WeightRange, WeightSpec};
use fairpia::{DataSet, FairingError, Init, KnotVector, Parametrization, Problem, SplineCurve};

/// How often (in iterations) a long run reports progress.
pub const PROGRESS_EVERY: usize = 64;

fn viviani_noise() -> f64 {
    VIVIANI_NOISE
}

fn default_degree() -> usize {
    3
}

fn default_r() -> usize {
    2
}

fn default_samples() -> usize {
    400
}

fn default_comb_scale() -> f64 {
    0.01
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    Invalid(#[from] FairingError),
    #[error("session diverged: {0}")]
    Diverged(String),
}

pub type SessionResult<T> = std::result::Result<T, SessionError>;

/// Inline points or one of the analytic test models. File paths are not accepted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SessionData {
    Points {
        points: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        params: Option<Vec<f64>>,
    },
    Starfish {
        m: usize,
    },
    Viviani {
        m: usize,
        #[serde(default = "viviani_noise")]
        sigma: f64,
        #[serde(default)]
        seed: u64,
    },
}

impl SessionData {
    fn dataset(&self, rule: Parametrization) -> fairpia::Result<DataSet<f64>> {
        match self {
            SessionData::Points { points, params } => {
                let dim = points.first().map_or(0, Vec::len);
                PointFile { dim, points: points.clone(), params: params.clone() }.into_dataset(rule)
            }
            SessionData::Starfish { m } => sample_starfish(*m)?.reparametrized(rule),
            SessionData::Viviani { m, sigma, seed } => sample_viviani(*m, *sigma, *seed)?.reparametrized(rule),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    pub data: SessionData,
    pub n: usize,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_r")]
    pub r: usize,
    #[serde(default)]
    pub parametrization: Parametrization,
    #[serde(default)]
    pub weights: WeightSpec,
    #[serde(default)]
    pub mu_policy: MuPolicy<f64>,
    #[serde(default = "default_samples")]
    pub curve_samples: usize,
    #[serde(default = "default_samples")]
    pub comb_samples: usize,
    #[serde(default = "default_comb_scale")]
    pub comb_scale: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsRequest {
    #[serde(default)]
    pub ranges: Vec<WeightRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_omega: Option<f64>,
}

/// A mutation that succeeded, in the order it was applied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Weights(WeightsRequest),
    Step {
        count: usize,
    },
    /// `steps` is the number of iterations the run actually took.
    Run {
        tol: f64,
        max_iters: usize,
        steps: usize,
    },
    Knots {
        values: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Status {
    Idle,
    Running,
    Diverged { reason: String },
}

/// One fairing round: fixed knots and weights, iterated from `initial_control`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Round {
    pub index: usize,
    pub start_k: usize,
    pub knots: Vec<f64>,
    pub omega: Vec<f64>,
    pub initial_control: Vec<Vec<f64>>,
    pub records: Vec<IterationRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub id: String,
    pub status: Status,
    pub k: usize,
    pub round: usize,
    pub n: usize,
    pub degree: usize,
    pub r: usize,
    pub dim: usize,
    pub data_count: usize,
    pub knots: Vec<f64>,
    pub control: Vec<Vec<f64>>,
    pub omega: Vec<f64>,
    pub curve: Vec<Vec<f64>>,
    pub comb: CurvatureComb,
    pub metrics: IterationRecord,
    pub diagnostics: Diagnostics,
}

impl Snapshot {
    pub fn spline(&self) -> fairpia::Result<SplineCurve<f64>> {
        SplineCurve::new(KnotVector::new(self.degree, self.knots.clone())?, fairpia::Mat::from_rows(&self.control))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub snapshot: Snapshot,
    /// Records added by this request.
    pub trace: Vec<IterationRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_reason: Option<StopReason>,
    #[serde(default)]
    pub cancelled: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub id: String,
    pub create: CreateRequest,
    pub actions: Vec<Action>,
    pub rounds: Vec<Round>,
}

struct Iterated {
    steps: usize,
    stop_reason: Option<StopReason>,
    cancelled: bool,
}

pub struct Session {
    id: String,
    request: CreateRequest,
    problem: Problem<f64>,
    omega: Vec<f64>,
    bundle: AssemblyBundle<f64>,
    state: IterationState<f64>,
    tracker: Tracker,
    rounds: Vec<Round>,
    actions: Vec<Action>,
    status: Status,
}

impl Session {
    pub fn create(id: String, request: CreateRequest) -> SessionResult<Self> {
        if !(1..=3).contains(&request.r) {
            return Err(FairingError::Config(format!("derivative order r = {} outside 1..=3", request.r)).into());
        }
        if request.curve_samples < 2 {
            return Err(FairingError::Config("curve_samples must be at least 2".into()).into());
        }
        let data = request.data.dataset(request.parametrization)?;
        let problem = Problem::curve(data, request.n, request.degree)?;
        let omega = request.weights.resolve(&problem, &[])?;
        let bundle = problem.bundle(request.r, omega.clone(), &request.mu_policy)?;
        let state = problem.initial_state(Init::Data);
        let tracker = Tracker::start(&bundle, problem.data_points(), &state)?;
        let mut session = Self {
            id,
            request,
            problem,
            omega,
            bundle,
            state,
            tracker,
            rounds: Vec::new(),
            actions: Vec::new(),
            status: Status::Idle,
        };
        session.open_round();
        // validates the comb settings up front
        session.snapshot()?;
        Ok(session)
    }

    /// Rebuilds a session from its creation request and recorded actions.
    pub fn replay(id: String, request: CreateRequest, actions: &[Action]) -> SessionResult<Self> {
        let mut session = Self::create(id, request)?;
        for action in actions {
            match action {
                Action::Weights(req) => {
                    session.set_weights(req)?;
                }
                Action::Step { count } => {
                    session.step(*count)?;
                }
                Action::Run { tol, max_iters, steps } => {
                    session.ensure_live()?;
                    let it = session.iterate(*steps, None, |_| true)?;
                    session.actions.push(Action::Run { tol: *tol, max_iters: *max_iters, steps: it.steps });
                }
                Action::Knots { values } => {
                    session.insert_knots(values)?;
                }
            }
        }
        Ok(session)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn status(&self) -> &Status {
        &self.status
    }

    pub fn state(&self) -> &IterationState<f64> {
        &self.state
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn dataset(&self) -> PointFile {
        match &self.problem {
            Problem::Curve { data, .. } => PointFile::from_dataset(data),
            Problem::Surface { .. } => unreachable!("sessions hold curves"),
        }
    }

    fn curve(&self) -> fairpia::Result<SplineCurve<f64>> {
        self.problem.curve_with(&self.state.control)
    }

    fn knots(&self) -> Vec<f64> {
        match &self.problem {
            Problem::Curve { knots, .. } => knots.knots().to_vec(),
            Problem::Surface { .. } => unreachable!("sessions hold curves"),
        }
    }

    pub fn snapshot(&self) -> fairpia::Result<Snapshot> {
        self.snapshot_with(self.status.clone())
    }

    pub fn snapshot_with(&self, status: Status) -> fairpia::Result<Snapshot> {
        let curve = self.curve()?;
        let comb = curvature_comb(&curve, self.request.comb_samples, self.request.comb_scale)?;
        Ok(Snapshot {
            id: self.id.clone(),
            status,
            k: self.state.k,
            round: self.rounds.len(),
            n: curve.control_count(),
            degree: curve.degree(),
            r: self.request.r,
            dim: curve.dim(),
            data_count: self.problem.data_points().rows(),
            knots: self.knots(),
            control: self.state.control.row_vecs(),
            omega: self.omega.clone(),
            curve: curve.sample(self.request.curve_samples),
            comb,
            metrics: *self.tracker.last(),
            diagnostics: self.bundle.diagnostics.clone(),
        })
    }

    pub fn history(&self) -> History {
        History {
            id: self.id.clone(),
            create: self.request.clone(),
            actions: self.actions.clone(),
            rounds: self.rounds.clone(),
        }
    }

    fn ensure_live(&self) -> SessionResult<()> {
        match &self.status {
            Status::Diverged { reason } => Err(SessionError::Diverged(reason.clone())),
            _ => Ok(()),
        }
    }

    /// Starts a new round from the current control points. A round with no
    /// iterations yet is replaced rather than kept.
    fn open_round(&mut self) {
        if self.rounds.last().is_some_and(|r| r.records.len() <= 1) {
            self.rounds.pop();
        }
        self.rounds.push(Round {
            index: self.rounds.len() + 1,
            start_k: self.state.k,
            knots: self.knots(),
            omega: self.omega.clone(),
            initial_control: self.state.control.row_vecs(),
            records: self.tracker.records().to_vec(),
        });
    }

    fn rebuild(&mut self, problem: Problem<f64>, omega: Vec<f64>, state: IterationState<f64>) -> SessionResult<()> {
        let bundle = problem.bundle(self.request.r, omega.clone(), &self.request.mu_policy)?;
        let tracker = Tracker::start(&bundle, problem.data_points(), &state)?;
        self.problem = problem;
        self.omega = omega;
        self.bundle = bundle;
        self.state = state;
        self.tracker = tracker;
        self.open_round();
        Ok(())
    }

    /// Paints smoothing weights. Control points are left where they are.
    pub fn set_weights(&mut self, req: &WeightsRequest) -> SessionResult<Snapshot> {
        self.ensure_live()?;
        let mut omega = self.omega.clone();
        if let Some(base) = req.base_omega {
            if !(0.0..=1.0).contains(&base) {
                return Err(FairingError::Config(format!("smoothing weight {base} outside [0, 1]")).into());
            }
            omega.fill(base);
        }
        apply_weight_ranges(&mut omega, &req.ranges)?;
        if omega != self.omega {
            self.rebuild(self.problem.clone(), omega, self.state.clone())?;
        }
        self.actions.push(Action::Weights(req.clone()));
        Ok(self.snapshot()?)
    }

    /// Inserts knots one after another. New control points take the larger
    /// weight of their two neighbours.
    pub fn insert_knots(&mut self, values: &[f64]) -> SessionResult<Snapshot> {
        self.ensure_live()?;
        if !values.is_empty() {
            let mut curve = self.curve()?;
            let mut omega = self.omega.clone();
            for &u in values {
                let (refined, ins) = curve.insert_knot_traced(u)?;
                omega = ins.remap(&omega);
                curve = refined;
            }
            let problem = self.problem.with_curve_knots(curve.knots().clone())?;
            let state = IterationState { control: curve.control().clone(), k: self.state.k };
            self.rebuild(problem, omega, state)?;
        }
        self.actions.push(Action::Knots { values: values.to_vec() });
        Ok(self.snapshot()?)
    }

    pub fn step(&mut self, count: usize) -> SessionResult<StepOutcome> {
        self.ensure_live()?;
        let before = self.tracker.records().len();
        let it = self.iterate(count, None, |_| true)?;
        self.actions.push(Action::Step { count: it.steps });
        self.outcome(before, it)
    }

    /// Iterates until the stopping rule fires. `progress` is called every
    /// [`PROGRESS_EVERY`] iterations; returning `false` cancels the run.
    pub fn run(&mut self, stop: &StoppingRule, progress: impl FnMut(&Self) -> bool) -> SessionResult<StepOutcome> {
        self.ensure_live()?;
        stop.validate()?;
        let before = self.tracker.records().len();
        let it = self.iterate(stop.max_iters, Some(stop.tol), progress)?;
        let stop_reason = it.stop_reason.or((!it.cancelled).then_some(StopReason::MaxIters));
        self.actions.push(Action::Run { tol: stop.tol, max_iters: stop.max_iters, steps: it.steps });
        self.outcome(before, Iterated { stop_reason, ..it })
    }

    fn outcome(&self, before: usize, it: Iterated) -> SessionResult<StepOutcome> {
        Ok(StepOutcome {
            snapshot: self.snapshot()?,
            trace: self.tracker.records()[before..].to_vec(),
            stop_reason: it.stop_reason,
            cancelled: it.cancelled,
        })
    }

    fn iterate(
        &mut self,
        count: usize,
        tol: Option<f64>,
        mut progress: impl FnMut(&Self) -> bool,
    ) -> SessionResult<Iterated> {
        let mut steps = 0;
        let mut stop_reason = None;
        let mut cancelled = false;
        while steps < count {
            if steps > 0 && steps % PROGRESS_EVERY == 0 && !progress(self) {
                cancelled = true;
                break;
            }
            let seen = self.tracker.records().len();
            let advanced = self.tracker.advance(&self.bundle, self.problem.data_points(), &self.state, tol)?;
            steps += 1;
            let next = match advanced {
                Advance::Continue(next) => next,
                Advance::Stop(next, reason) => {
                    if reason == StopReason::Diverged {
                        let reason = if next.k == self.state.k {
                            format!("non-finite iterate after iteration {}", next.k)
                        } else {
                            format!("relative iteration error above the divergence limit at iteration {}", next.k)
                        };
                        log::warn!("session {}: {reason}", self.id);
                        self.status = Status::Diverged { reason };
                    }
                    stop_reason = Some(reason);
                    self.state = next;
                    self.sync_round(seen);
                    break;
                }
            };
            self.state = next;
            self.sync_round(seen);
        }
        Ok(Iterated { steps, stop_reason, cancelled })
    }

    fn sync_round(&mut self, seen: usize) {
        let new = &self.tracker.records()[seen..];
        if let Some(round) = self.rounds.last_mut() {
            round.records.extend_from_slice(new);
        }
    }
}
