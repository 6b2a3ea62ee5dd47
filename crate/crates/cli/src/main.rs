use std::io::Write;
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fairpia::datasets::export_svg;
use fairpia::job::{compare, markdown_report, run_job, ControlCount, JobConfig, WeightSpec};
use fairpia::{FairingError, RunReport, StopReason};

const EXIT_CONVERGED: u8 = 0;
const EXIT_ERROR: u8 = 1;
const EXIT_MAX_ITERS: u8 = 2;
const EXIT_DIVERGED: u8 = 3;
const EXIT_SINGULAR: u8 = 4;

#[derive(Parser)]
#[command(name = "fairpia", version, about = "B-spline fitting and fairing by progressive iterative approximation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a fairing job and write its report.
    Fair {
        #[command(flatten)]
        job: JobArgs,
        /// Uniform smoothing weight for every control point; replaces the configured weights.
        #[arg(long)]
        omega: Option<f64>,
    },
    /// Run the job as a plain least-squares fit (all smoothing weights zero).
    Fit {
        #[command(flatten)]
        job: JobArgs,
    },
    /// Compare the iteration against a direct energy-minimization solve.
    Compare {
        #[command(flatten)]
        job: JobArgs,
        #[arg(long)]
        omega: Option<f64>,
        /// Fall back to the pseudoinverse when the system is singular.
        #[arg(long)]
        pinv: bool,
    },
    /// Render saved report JSON files as Markdown tables.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Start the HTTP session service.
    Serve {
        /// Port to bind; 0 picks a free one.
        #[arg(long, env = "PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
}

#[derive(Args)]
struct JobArgs {
    /// Job configuration (JSON).
    config: PathBuf,
    /// Derivative order of the fairing energy (1, 2 or 3).
    #[arg(long)]
    r: Option<usize>,
    /// Control point count, `N` for curves or `N1,N2` for surfaces.
    #[arg(long, value_parser = parse_count)]
    n: Option<ControlCount>,
    /// Noise seed of the analytic models.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Where to write the JSON report (stdout when unset).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long)]
    markdown: Option<PathBuf>,
    /// Leave timestamps and timings out so repeated runs produce identical reports.
    #[arg(long)]
    no_timestamp: bool,
}

fn parse_count(s: &str) -> Result<ControlCount, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| p.parse::<usize>().map_err(|e| format!("{p:?}: {e}"));
    match parts.as_slice() {
        [n] => Ok(ControlCount::Curve(num(n)?)),
        [a, b] => Ok(ControlCount::Surface([num(a)?, num(b)?])),
        _ => Err("expected N or N1,N2".into()),
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl From<FairingError> for Failure {
    fn from(e: FairingError) -> Self {
        let code = if matches!(e, FairingError::Singular { .. }) { EXIT_SINGULAR } else { EXIT_ERROR };
        let message = if code == EXIT_SINGULAR {
            format!("{e}; rerun with --pinv to use the pseudoinverse")
        } else {
            e.to_string()
        };
        Self { code, message }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self { code: EXIT_ERROR, message: e.to_string() }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self { code: EXIT_ERROR, message: e.to_string() }
    }
}

type CliResult = Result<u8, Failure>;

fn exit_code(reason: StopReason) -> u8 {
    match reason {
        StopReason::Converged => EXIT_CONVERGED,
        StopReason::MaxIters => EXIT_MAX_ITERS,
        StopReason::Diverged => EXIT_DIVERGED,
    }
}

impl JobArgs {
    fn load(&self, omega: Option<f64>) -> Result<JobConfig, Failure> {
        let mut cfg = JobConfig::load(&self.config)
            .map_err(|e| Failure { code: EXIT_ERROR, message: format!("{}: {e}", self.config.display()) })?;
        if let Some(r) = self.r {
            cfg.r = r;
        }
        if let Some(n) = self.n {
            cfg.n = n;
        }
        if let Some(seed) = self.seed {
            cfg.input.set_seed(seed);
        }
        if let Some(max_iters) = self.max_iters {
            cfg.stop.max_iters = max_iters;
        }
        if let Some(tol) = self.tol {
            cfg.stop.tol = tol;
        }
        if let Some(omega) = omega {
            cfg.weights = WeightSpec::Uniform { omega };
            cfg.weight_overrides.clear();
        }
        if self.out.is_some() {
            cfg.output.report = self.out.clone();
        }
        if self.svg.is_some() {
            cfg.output.svg = self.svg.clone();
        }
        if self.markdown.is_some() {
            cfg.output.markdown = self.markdown.clone();
        }
        cfg.output.no_timestamp |= self.no_timestamp;
        cfg.validate()?;
        cfg.stop.validate()?;
        Ok(cfg)
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| Failure { code: EXIT_ERROR, message: format!("{}: {e}", p.display()) })
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn fair(cfg: &JobConfig) -> CliResult {
    let outcome = run_job(cfg)?;
    let report = &outcome.report;
    eprintln!(
        "{}: {} after {} iterations; fitting error {:.6e} -> {:.6e}, energy {:.6e} -> {:.6e}",
        report.model,
        report.stop_reason.as_str(),
        report.iterations,
        report.initial_fitting_error,
        report.final_fitting_error,
        report.initial_energy,
        report.final_energy
    );
    emit(cfg.output.report.as_deref(), &report.to_json()?)?;
    if let Some(path) = &cfg.output.markdown {
        emit(Some(path), &markdown_report(std::slice::from_ref(report)))?;
    }
    if let Some(path) = &cfg.output.svg {
        let (curve, comb) = outcome
            .curve
            .as_ref()
            .ok_or_else(|| Failure { code: EXIT_ERROR, message: "SVG export needs a curve job".into() })?;
        export_svg(curve, Some(comb), Some(outcome.problem.data_points()), path)?;
    }
    Ok(exit_code(report.stop_reason))
}

fn run_compare(cfg: &JobConfig) -> CliResult {
    let report = compare(cfg)?;
    eprintln!(
        "{}: relative gap {:.3e} after {} iterations ({})",
        report.model,
        report.relative_gap,
        report.iterations,
        report.stop_reason.as_str()
    );
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    emit(cfg.output.report.as_deref(), &text)?;
    Ok(exit_code(report.stop_reason))
}

fn report(paths: &[PathBuf], out: Option<&Path>) -> CliResult {
    let reports = paths
        .iter()
        .map(|p| {
            std::fs::read_to_string(p)
                .map_err(FairingError::from)
                .and_then(|text| RunReport::from_json(&text))
                .map_err(|e| Failure { code: EXIT_ERROR, message: format!("{}: {e}", p.display()) })
        })
        .collect::<Result<Vec<_>, _>>()?;
    emit(out, &markdown_report(&reports))?;
    Ok(EXIT_CONVERGED)
}

fn serve(host: IpAddr, port: u16) -> CliResult {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port)).await?;
        let addr = listener.local_addr()?;
        println!("listening on http://{addr}");
        std::io::stdout().flush()?;
        fairpia_server::serve(listener).await?;
        Ok(EXIT_CONVERGED)
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // usage errors share the config-error exit code; 2 means max_iters here
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { EXIT_CONVERGED });
        }
    };
    let result = match &cli.command {
        Command::Fair { job, omega } => job.load(*omega).and_then(|cfg| fair(&cfg)),
        Command::Fit { job } => job.load(Some(0.0)).and_then(|cfg| fair(&cfg)),
        Command::Compare { job, omega, pinv } => job.load(*omega).and_then(|mut cfg| {
            cfg.pseudo_inverse |= *pinv;
            run_compare(&cfg)
        }),
        Command::Report { reports, out } => report(reports, out.as_deref()),
        Command::Serve { port, host } => serve(*host, *port),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
