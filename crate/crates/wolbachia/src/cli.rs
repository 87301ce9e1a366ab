//! `wolbachia` command line.

use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wolbachia_core::{IntegrationOptions, ModelParameters, Release, ReleaseSchedule, StopRule};

use crate::analysis::{
    self, EquilibriaInput, ImpulsiveInput, MinReleaseInput, PlanInput, SeparatrixInput,
    SeparatrixMethod, SimulateInput, Tolerances,
};
use crate::check;
use crate::error::{AppError, AppResult};
use crate::formats::{self, Format, Metadata, Render};
use crate::params;
use crate::service;
use crate::sweep::Cancel;

#[derive(Debug, Parser)]
#[command(name = "wolbachia", version, about = "Wolbachia invasion model: thresholds and release planning")]
pub struct Cli {
    /// Parameter file (JSON with the six rates); defaults to the wMelPop set.
    #[arg(long, global = true)]
    pub params: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Output file, written atomically with a `.meta.json` sidecar; stdout if absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StopRuleArg {
    /// Stop once a release lands above the separatrix.
    Crossing,
    /// Always spend the whole budget.
    Fixed,
}

impl From<StopRuleArg> for StopRule {
    fn from(a: StopRuleArg) -> Self {
        match a {
            StopRuleArg::Crossing => StopRule::OnSeparatrixCrossing,
            StopRuleArg::Fixed => StopRule::FixedCount,
        }
    }
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = IntegrationOptions::default().rel_tol)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = IntegrationOptions::default().abs_tol)]
    pub abs_tol: f64,
    #[arg(long, default_value_t = IntegrationOptions::default().max_step)]
    pub max_step: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Steady states, their eigenvalues and classification.
    Equilibria,
    /// Integrate the release-free system from (n0, w0).
    #[command(allow_negative_numbers = true)]
    Simulate {
        #[arg(long)]
        n0: f64,
        #[arg(long, default_value_t = 0.0)]
        w0: f64,
        #[arg(long, default_value_t = IntegrationOptions::default().t_max)]
        t_max: f64,
        /// Uniform output spacing in days (default: every solver step).
        #[arg(long)]
        dt: Option<f64>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Threshold curve separating the two basins.
    Separatrix {
        #[arg(long, value_enum, default_value_t = SeparatrixMethod::Backward)]
        method: SeparatrixMethod,
        /// Bisection grid size over [0, n_sharp].
        #[arg(long, default_value_t = 32)]
        points: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        /// Backward tracing sample spacing as a fraction of n_sharp.
        #[arg(long, default_value_t = 1e-3)]
        arc_step: f64,
        /// Include the heteroclinic orbits leaving the saddle (JSON only).
        #[arg(long)]
        unstable_manifold: bool,
    },
    /// Minimal single release for each initial wild population.
    MinRelease {
        /// Initial wild populations as fractions of n_sharp.
        #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5, 0.75, 1.0])]
        n0_frac: Vec<f64>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Minimal periodic release size over a grid of (n0, tau).
    Plan {
        #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5, 0.75, 1.0])]
        n0_frac: Vec<f64>,
        /// Days between releases.
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 3.0])]
        tau: Vec<f64>,
        /// Most releases allowed.
        #[arg(long, default_value_t = 30)]
        budget: u32,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = StopRuleArg::Crossing)]
        stop_rule: StopRuleArg,
    },
    /// Simulate one release campaign, periodic or from a release list.
    #[command(allow_negative_numbers = true)]
    SimulateImpulsive {
        #[arg(long)]
        n0: f64,
        /// Release size (individuals).
        #[arg(long, required_unless_present = "releases_file")]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
        #[arg(long, default_value_t = 30)]
        releases: u32,
        #[arg(long, value_enum, default_value_t = StopRuleArg::Crossing)]
        stop_rule: StopRuleArg,
        /// JSON list of {"t", "size"} releases instead of a periodic schedule.
        #[arg(long, conflicts_with = "lambda")]
        releases_file: Option<PathBuf>,
        /// Initial infected population (release lists only).
        #[arg(long, default_value_t = 0.0)]
        w0: f64,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
    /// Seeded randomized property checks of the model implementation.
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        cases: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Equilibria => "equilibria",
            Command::Simulate { .. } => "simulate",
            Command::Separatrix { .. } => "separatrix",
            Command::MinRelease { .. } => "min-release",
            Command::Plan { .. } => "plan",
            Command::SimulateImpulsive { .. } => "simulate-impulsive",
            Command::Serve { .. } => "serve",
            Command::Check { .. } => "check",
        }
    }
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn emit(cli: &Cli, p: &ModelParameters, report: &dyn Render, tolerances: &Tolerances) -> AppResult<()> {
    let bytes = report.render(cli.format)?;
    match &cli.out {
        Some(path) => {
            formats::write_atomic(path, &bytes)?;
            let meta = Metadata::new(cli.command.name(), cli.format, p, tolerances);
            formats::write_atomic(&formats::sidecar_path(path), &formats::json(&meta))
        }
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(&bytes).and_then(|_| out.flush()) {
                // A closed pipe (e.g. `| head`) is the reader's choice, not an error.
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                r => Ok(r?),
            }
        }
    }
}

pub fn run(cli: &Cli) -> AppResult<ExitCode> {
    let p = match &cli.params {
        Some(path) => params::load(path)?,
        None => ModelParameters::WMELPOP,
    };
    let cancel = Cancel::default();
    match &cli.command {
        Command::Equilibria => {
            let r = analysis::run_equilibria(&p, &EquilibriaInput::default())?;
            emit(cli, &p, &r.value, &r.tolerances)?;
        }
        Command::Simulate { n0, w0, t_max, dt, solver } => {
            let options = IntegrationOptions {
                rel_tol: solver.rel_tol,
                abs_tol: solver.abs_tol,
                max_step: solver.max_step,
                ..Default::default()
            };
            let input = SimulateInput { n0: *n0, w0: *w0, t_max: *t_max, dt: *dt, options: Some(options) };
            let r = analysis::run_simulate(&p, &input)?;
            emit(cli, &p, &r.value, &r.tolerances)?;
        }
        Command::Separatrix { method, points, tol, arc_step, unstable_manifold } => {
            let input = SeparatrixInput {
                method: *method,
                points: *points,
                tol: *tol,
                arc_step: *arc_step,
                unstable_manifold: *unstable_manifold,
            };
            let r = analysis::run_separatrix(&p, &input, &cancel)?;
            emit(cli, &p, &r.value, &r.tolerances)?;
        }
        Command::MinRelease { n0_frac, tol } => {
            let input = MinReleaseInput { n0_frac: n0_frac.clone(), tol: *tol };
            let r = analysis::run_min_release(&p, &input, &cancel)?;
            emit(cli, &p, &r.value, &r.tolerances)?;
        }
        Command::Plan { n0_frac, tau, budget, tol, stop_rule } => {
            let input = PlanInput {
                n0_frac: n0_frac.clone(),
                tau: tau.clone(),
                budget: *budget,
                tol: *tol,
                stop_rule: (*stop_rule).into(),
            };
            let r = analysis::run_plan(&p, &input, &cancel)?;
            emit(cli, &p, &r.value, &r.tolerances)?;
        }
        Command::SimulateImpulsive { n0, lambda, tau, releases, stop_rule, releases_file, w0 } => {
            let input = match (lambda, releases_file) {
                (Some(lambda), None) => ImpulsiveInput {
                    n0: *n0,
                    w0: *w0,
                    schedule: Some(ReleaseSchedule {
                        lambda_size: *lambda,
                        tau: *tau,
                        max_releases: *releases,
                        stop_rule: (*stop_rule).into(),
                    }),
                    releases: None,
                },
                (None, Some(path)) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| AppError::Input(format!("{}: {e}", path.display())))?;
                    let list: Vec<Release> = serde_json::from_str(&text)
                        .map_err(|e| AppError::Input(format!("{}: {e}", path.display())))?;
                    ImpulsiveInput { n0: *n0, w0: *w0, schedule: None, releases: Some(list) }
                }
                _ => return Err(AppError::Input("give --lambda or --releases-file".into())),
            };
            let r = analysis::run_impulsive(&p, &input)?;
            emit(cli, &p, &r.value, &r.tolerances)?;
        }
        Command::Serve { port, host } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(service::serve(SocketAddr::new(*host, *port)))?;
        }
        Command::Check { seed, cases } => {
            params::check(&p, false)?;
            let report = check::run(&p, *seed, *cases)?;
            let tolerances = Tolerances::from([
                ("jacobian_rel", "1e-6".to_owned()),
                ("order_eps", format!("{:e}", 1e-6 * p.scale())),
            ]);
            emit(cli, &p, &report, &tolerances)?;
            if !report.passed {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
