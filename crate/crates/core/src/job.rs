//! Batch jobs: configuration, execution, reports and oracle comparison.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::assembly::{validate_omega, Diagnostics, MuPolicy};
use crate::datasets::{load_points, sample_bumpy_patch, sample_starfish, sample_viviani, VIVIANI_NOISE};
use crate::error::{FairingError, Result};
use crate::geometry::{asod_weights, curvature_comb, CurvatureComb};
use crate::iteration::{run, Init, IterationState, IterationTrace, StopReason, StoppingRule};
use crate::matrix::Mat;
use crate::oracle::{energy_min_solve, pseudo_inverse_solution};
use crate::problem::Problem;
use crate::spline::{Parametrization, SplineCurve};

fn viviani_noise() -> f64 {
    VIVIANI_NOISE
}

/// Where the data points come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSpec {
    /// CSV or JSON point file, relative paths resolved against the config file.
    File {
        path: PathBuf,
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
    BumpyPatch {
        m1: usize,
        m2: usize,
        #[serde(default)]
        noise: f64,
        #[serde(default)]
        seed: u64,
    },
}

impl InputSpec {
    pub fn model_name(&self) -> String {
        match self {
            InputSpec::File { path } => {
                path.file_stem().map_or_else(|| "data".to_string(), |s| s.to_string_lossy().into_owned())
            }
            InputSpec::Starfish { .. } => "Starfish".into(),
            InputSpec::Viviani { .. } => "Viviani".into(),
            InputSpec::BumpyPatch { .. } => "Bumpy patch".into(),
        }
    }

    pub fn set_seed(&mut self, new_seed: u64) {
        if let InputSpec::Viviani { seed, .. } | InputSpec::BumpyPatch { seed, .. } = self {
            *seed = new_seed;
        }
    }
}

/// `n` for curves, `[n1, n2]` for surfaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ControlCount {
    Curve(usize),
    Surface([usize; 2]),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    Uniform {
        omega: f64,
    },
    Explicit {
        values: Vec<f64>,
    },
    /// The `high_count` control points at the roughest data get `high_omega`.
    Asod {
        high_count: usize,
        high_omega: f64,
        base_omega: f64,
    },
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec::Uniform { omega: 0.0 }
    }
}

impl WeightSpec {
    /// One weight per control point of `problem`, with `overrides` applied on top.
    pub fn resolve(&self, problem: &Problem<f64>, overrides: &[WeightRange]) -> Result<Vec<f64>> {
        let n = problem.control_count();
        let mut omega = match self {
            WeightSpec::Uniform { omega } => vec![*omega; n],
            WeightSpec::Explicit { values } => values.clone(),
            WeightSpec::Asod { high_count, high_omega, base_omega } => match problem {
                Problem::Curve { data, indices, .. } => {
                    asod_weights(data.points(), indices, *high_count, *high_omega, *base_omega)?
                }
                Problem::Surface { .. } => {
                    return Err(FairingError::Unsupported("ASOD weights for surfaces".into()));
                }
            },
        };
        validate_omega(&omega, n)?;
        apply_weight_ranges(&mut omega, overrides)?;
        Ok(omega)
    }
}

/// `omega` for control points `from_index ..= to_index`, counted from 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightRange {
    pub from_index: usize,
    pub to_index: usize,
    pub omega: f64,
}

/// Applies ranges in order, so a later range overrides an earlier one.
pub fn apply_weight_ranges(omega: &mut [f64], ranges: &[WeightRange]) -> Result<()> {
    let n = omega.len();
    for r in ranges {
        if r.from_index < 1 || r.to_index > n || r.from_index > r.to_index {
            return Err(FairingError::Config(format!(
                "weight range {}..={} outside 1..={n}",
                r.from_index, r.to_index
            )));
        }
        if !(0.0..=1.0).contains(&r.omega) {
            return Err(FairingError::Config(format!("smoothing weight {} outside [0, 1]", r.omega)));
        }
    }
    for r in ranges {
        omega[r.from_index - 1..r.to_index].fill(r.omega);
    }
    Ok(())
}

fn default_comb_samples() -> usize {
    400
}

fn default_comb_scale() -> f64 {
    0.01
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub markdown: Option<PathBuf>,
    #[serde(default = "default_comb_samples")]
    pub comb_samples: usize,
    #[serde(default = "default_comb_scale")]
    pub comb_scale: f64,
    /// Leaves timestamp and timings out of the report.
    #[serde(default)]
    pub no_timestamp: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            report: None,
            svg: None,
            markdown: None,
            comb_samples: default_comb_samples(),
            comb_scale: default_comb_scale(),
            no_timestamp: false,
        }
    }
}

fn default_degree() -> usize {
    3
}

fn default_r() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub input: InputSpec,
    #[serde(default)]
    pub parametrization: Parametrization,
    pub n: ControlCount,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_r")]
    pub r: usize,
    #[serde(default)]
    pub weights: WeightSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weight_overrides: Vec<WeightRange>,
    #[serde(default)]
    pub mu_policy: MuPolicy<f64>,
    #[serde(default)]
    pub stop: StoppingRule,
    #[serde(default)]
    pub init: Init,
    /// Lets the comparison fall back to the pseudoinverse when `B` is singular.
    #[serde(default)]
    pub pseudo_inverse: bool,
    #[serde(default)]
    pub output: OutputSpec,
}

impl JobConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: JobConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config and resolves a relative input path against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json(&std::fs::read_to_string(path)?)?;
        if let InputSpec::File { path: p } = &mut cfg.input {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.r) {
            return Err(FairingError::Config(format!("r = {} must be 1, 2 or 3", self.r)));
        }
        if self.degree < 1 {
            return Err(FairingError::Config("degree must be at least 1".into()));
        }
        self.stop.validate()?;
        match (&self.input, self.n) {
            (InputSpec::BumpyPatch { .. }, ControlCount::Curve(_)) => {
                Err(FairingError::Config("surface input needs n = [n1, n2]".into()))
            }
            (InputSpec::BumpyPatch { .. }, _) => Ok(()),
            (_, ControlCount::Surface(_)) => Err(FairingError::Config("curve input needs a single n".into())),
            _ => Ok(()),
        }
    }

    pub fn model_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.input.model_name())
    }

    pub fn problem(&self) -> Result<Problem<f64>> {
        self.validate()?;
        match (&self.input, self.n) {
            (InputSpec::BumpyPatch { m1, m2, noise, seed }, ControlCount::Surface([n1, n2])) => {
                Problem::surface(sample_bumpy_patch(*m1, *m2, *noise, *seed)?, n1, n2, self.degree)
            }
            (input, ControlCount::Curve(n)) => {
                let data = match input {
                    InputSpec::File { path } => load_points(path)?.into_dataset(self.parametrization)?,
                    InputSpec::Starfish { m } => sample_starfish(*m)?.reparametrized(self.parametrization)?,
                    InputSpec::Viviani { m, sigma, seed } => {
                        sample_viviani(*m, *sigma, *seed)?.reparametrized(self.parametrization)?
                    }
                    InputSpec::BumpyPatch { .. } => unreachable!("validated above"),
                };
                Problem::curve(data, n, self.degree)
            }
            _ => unreachable!("validated above"),
        }
    }

    /// Smoothing weights for every control point of `problem`.
    pub fn resolve_weights(&self, problem: &Problem<f64>) -> Result<Vec<f64>> {
        self.weights.resolve(problem, &self.weight_overrides)
    }

    /// The single weight shared by all control points, if there is one.
    pub fn constant_omega(&self) -> Option<f64> {
        match (&self.weights, self.weight_overrides.is_empty()) {
            (WeightSpec::Uniform { omega }, true) => Some(*omega),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: String,
    pub config: JobConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp_unix: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
    pub data_shape: Vec<usize>,
    pub control_shape: Vec<usize>,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub initial_fitting_error: f64,
    pub final_fitting_error: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub diagnostics: Diagnostics,
    pub omega: Vec<f64>,
    pub final_control: Vec<Vec<f64>>,
    pub trace: IterationTrace,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Everything a finished job produced.
#[derive(Clone, Debug)]
pub struct JobOutcome {
    pub report: RunReport,
    pub problem: Problem<f64>,
    pub state: IterationState<f64>,
    /// Final curve and its comb, for curve problems.
    pub curve: Option<(SplineCurve<f64>, CurvatureComb)>,
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn run_job(config: &JobConfig) -> Result<JobOutcome> {
    let problem = config.problem()?;
    let omega = config.resolve_weights(&problem)?;
    let started = Instant::now();
    let bundle = problem.bundle(config.r, omega.clone(), &config.mu_policy)?;
    let state = problem.initial_state(config.init);
    let (state, trace) = run(&bundle, problem.data_points(), state, &config.stop)?;
    let elapsed = started.elapsed().as_secs_f64();

    let curve = match &problem {
        Problem::Curve { .. } => {
            let c = problem.curve_with(&state.control)?;
            let comb = curvature_comb(&c, config.output.comb_samples.max(2), config.output.comb_scale)?;
            Some((c, comb))
        }
        Problem::Surface { .. } => None,
    };
    let (first, last) = (*trace.first(), *trace.last());
    let stamp = !config.output.no_timestamp;
    let report = RunReport {
        model: config.model_name(),
        config: config.clone(),
        timestamp_unix: stamp.then(now_unix),
        wall_time_s: stamp.then_some(elapsed),
        data_shape: problem.data_shape(),
        control_shape: problem.control_shape(),
        iterations: trace.iterations(),
        stop_reason: trace.stop_reason,
        initial_fitting_error: first.fit_abs,
        final_fitting_error: last.fit_abs,
        initial_energy: first.energy_abs,
        final_energy: last.energy_abs,
        diagnostics: bundle.diagnostics.clone(),
        omega,
        final_control: state.control.row_vecs(),
        trace,
    };
    Ok(JobOutcome { report, problem, state, curve })
}

fn fmt_shape(shape: &[usize]) -> String {
    shape.iter().map(usize::to_string).collect::<Vec<_>>().join("×")
}

fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else if x.abs() >= 1e5 || x.abs() < 1e-3 {
        format!("{x:.4e}")
    } else {
        format!("{x:.6}")
    }
}

/// Markdown table with the iteration statistics and the error/energy columns.
pub fn markdown_report(reports: &[RunReport]) -> String {
    let mut s = String::new();
    s.push_str("| Model | # Data points | # Control points | # Iterations | Time (s) | Stop |\n");
    s.push_str("|---|---|---|---|---|---|\n");
    for r in reports {
        let time = r.wall_time_s.map_or_else(|| "n/a".to_string(), |t| format!("{t:.4}"));
        s.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} |\n",
            r.model,
            fmt_shape(&r.data_shape),
            fmt_shape(&r.control_shape),
            r.iterations,
            time,
            r.stop_reason.as_str()
        ));
    }
    s.push('\n');
    s.push_str("| Model | Initial fitting error | Final fitting error | Initial energy | Final energy |\n");
    s.push_str("|---|---|---|---|---|\n");
    for r in reports {
        let label =
            if r.control_shape.len() == 1 { format!("{} (r={})", r.model, r.config.r) } else { r.model.clone() };
        s.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            label,
            fmt_num(r.initial_fitting_error),
            fmt_num(r.final_fitting_error),
            fmt_num(r.initial_energy),
            fmt_num(r.final_energy)
        ));
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSolver {
    Direct,
    PseudoInverse { consistent: bool },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub model: String,
    pub omega: f64,
    pub iterations: usize,
    pub stop_reason: StopReason,
    /// `‖P_PIA − P_ref‖∞ / ‖P_ref‖∞`
    pub relative_gap: f64,
    pub solver: ReferenceSolver,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pia_time_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direct_time_s: Option<f64>,
}

/// Runs the iteration and the energy-minimization solve on the same
/// equal-weight problem and reports how far apart the results are.
pub fn compare(config: &JobConfig) -> Result<CompareReport> {
    let omega = config
        .constant_omega()
        .ok_or_else(|| FairingError::Config("comparison needs one uniform smoothing weight".into()))?;
    let problem = config.problem()?;
    let weights = config.resolve_weights(&problem)?;

    let started = Instant::now();
    let bundle = problem.bundle(config.r, weights, &config.mu_policy)?;
    let (state, trace) = run(&bundle, problem.data_points(), problem.initial_state(config.init), &config.stop)?;
    let pia_time = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let ntq = bundle.collocation.apply_transpose(problem.data_points());
    let (reference, solver) = match energy_min_solve(&bundle.a, omega, &ntq) {
        Ok(p) => (p, ReferenceSolver::Direct),
        Err(FairingError::Singular { .. }) if config.pseudo_inverse => {
            let s = pseudo_inverse_solution(&bundle.a, &ntq, omega)?;
            (s.solution, ReferenceSolver::PseudoInverse { consistent: s.consistent })
        }
        Err(e) => return Err(e),
    };
    let direct_time = started.elapsed().as_secs_f64();
    let stamp = !config.output.no_timestamp;
    Ok(CompareReport {
        model: config.model_name(),
        omega,
        iterations: trace.iterations(),
        stop_reason: trace.stop_reason,
        relative_gap: relative_gap(&state.control, &reference),
        solver,
        pia_time_s: stamp.then_some(pia_time),
        direct_time_s: stamp.then_some(direct_time),
    })
}

/// `‖a − b‖∞ / ‖b‖∞`, or the absolute gap when `b = 0`.
pub fn relative_gap(a: &Mat<f64>, b: &Mat<f64>) -> f64 {
    let num = a.sub(b).norm_inf();
    let den = b.norm_inf();
    if den > 0.0 {
        num / den
    } else {
        num
    }
}
