use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use homog_core::harness::{run_experiment, write_report, ExperimentConfig, ExperimentId, RateReport};
use homog_core::io::{save_kernel_sample, CorrectorBundle};
use homog_core::kernels::{
    adjoint_column, gamma_eps_column, gamma_eps_gradients, gamma_eps_pole_derivative, EvalSpec, ResolutionPolicy,
};
use homog_core::{
    flux_identity_residual, oracle, solve_corrector, solve_dual_correctors, CellSolveOptions, CoefficientFamily,
    CoefficientField, HomogError, Scheme, SpaceTimeTorusGrid,
};
use serde_json::json;

type Result<T> = std::result::Result<T, HomogError>;

/// Correctors, fundamental solutions and convergence-rate experiments for
/// periodic parabolic homogenization.
#[derive(Parser, Debug)]
#[command(name = "homog", version)]
struct Cli {
    /// Discretization of the cell problems: spectral or fd.
    #[arg(long, global = true)]
    scheme: Option<Scheme>,
    /// Kernel resolution: default, coarse, fine, or a JSON file.
    #[arg(long, global = true)]
    resolution_policy: Option<String>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the cell problem and write a corrector bundle.
    Corrector(CorrectorArgs),
    /// Add dual correctors to a corrector bundle.
    Dual(DualArgs),
    /// Run rate experiments and write their reports.
    Run(RunArgs),
    /// List or run the brute-force oracles.
    Oracle(OracleArgs),
    /// Sample one fundamental-solution column.
    Kernel(KernelArgs),
}

#[derive(Args, Debug)]
struct CorrectorArgs {
    /// Family name (`space_time`, `space_time:0.3`, ...), JSON object or JSON file.
    #[arg(long, default_value = "space_time")]
    coeff: String,
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long, default_value_t = 64)]
    nt: usize,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug)]
struct DualArgs {
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Experiment id, repeatable; `all` runs every experiment.
    #[arg(long, required = true)]
    experiment: Vec<String>,
    #[arg(long)]
    coeff: Option<String>,
    /// Comma-separated ε ladder.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long)]
    t: Option<f64>,
    /// Comma-separated time ladder (`cor`).
    #[arg(long, value_delimiter = ',')]
    t_ladder: Option<Vec<f64>>,
    /// JSON experiment configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long)]
    list: bool,
    /// Oracle id or `all`.
    #[arg(long)]
    run: Option<String>,
}

#[derive(Args, Debug)]
struct KernelArgs {
    #[arg(long, default_value = "space_time")]
    coeff: String,
    #[arg(long)]
    eps: f64,
    /// Pole `y,s`.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.0])]
    pole: Vec<f64>,
    /// Comma-separated evaluation times (pole times `s` with `--adjoint`).
    #[arg(long, value_delimiter = ',', required = true)]
    times: Vec<f64>,
    #[arg(long, default_value_t = -4.0, allow_hyphen_values = true)]
    x_min: f64,
    #[arg(long, default_value_t = 4.0)]
    x_max: f64,
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long)]
    gradients: bool,
    /// Sample `∂_y Γ_ε` from a dipole source.
    #[arg(long, conflicts_with = "adjoint")]
    pole_derivative: bool,
    /// Treat the pole as `(x₀, t₀)` and sample over `(y, s)`.
    #[arg(long)]
    adjoint: bool,
}

fn parse_coefficient(spec: &str) -> Result<CoefficientField> {
    let text = if Path::new(spec).is_file() {
        std::fs::read_to_string(spec)?
    } else {
        spec.to_string()
    };
    CoefficientField::make_builtin(text.parse::<CoefficientFamily>()?)
}

fn parse_policy(spec: Option<&str>) -> Result<ResolutionPolicy> {
    let base = ResolutionPolicy::default();
    Ok(match spec {
        None | Some("default") => base,
        Some("coarse") => ResolutionPolicy {
            points_per_period: 16,
            steps_per_period: 32,
            ..base
        },
        Some("fine") => base.refined(2),
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(false)` when a reported pass flag is false.
fn dispatch(cli: &Cli) -> Result<bool> {
    let scheme = cli.scheme.unwrap_or_default();
    match &cli.command {
        Command::Corrector(a) => {
            let field = parse_coefficient(&a.coeff)?;
            let grid = SpaceTimeTorusGrid::new(field.d(), a.n, a.nt)?;
            let mut opts = CellSolveOptions::new(scheme);
            if let Some(tol) = a.tol {
                opts = opts.with_tol(tol);
            }
            let set = solve_corrector(&field, grid, &opts)?;
            let bundle = CorrectorBundle {
                correctors: set,
                duals: None,
            };
            let path = cli.out.clone().unwrap_or_else(|| PathBuf::from("corrector.hgb"));
            bundle.save(&path)?;
            let c = &bundle.correctors;
            let out = json!({
                "a_hat": c.a_hat.a_hat.data(),
                "d": c.a_hat.d(),
                "m": c.a_hat.m(),
                "mu_check": c.a_hat.mu_check,
                "solve_residual": c.solve_residual,
                "scheme": c.scheme,
                "bundle": path,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(true)
        }
        Command::Dual(a) => {
            let mut bundle = CorrectorBundle::load(&a.input)?;
            let b = &bundle.correctors.b_flux;
            let duals = solve_dual_correctors(b, cli.scheme.unwrap_or(bundle.correctors.scheme))?;
            let res = flux_identity_residual(&duals, b)?;
            let out = json!({
                "harmonic_defect": duals.harmonic_defect,
                "flux_residual": res.flux,
                "antisymmetry": res.antisymmetry,
                "phi_sup": duals.phi_sup(),
            });
            bundle.duals = Some(duals);
            let path = cli.out.clone().unwrap_or_else(|| a.input.clone());
            bundle.save(&path)?;
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(true)
        }
        Command::Run(a) => run(cli, a),
        Command::Oracle(a) => {
            if a.list || a.run.is_none() {
                for (id, what) in oracle::ORACLES {
                    println!("{id}\t{what}");
                }
            }
            if let Some(which) = &a.run {
                let ids: Vec<&str> = if which == "all" {
                    oracle::ORACLES.iter().map(|p| p.0).collect()
                } else {
                    vec![which.as_str()]
                };
                for id in ids {
                    let r = oracle::run(id)?;
                    let text = serde_json::to_string_pretty(&r)?;
                    if let Some(dir) = &cli.out {
                        std::fs::create_dir_all(dir)?;
                        std::fs::write(dir.join(format!("{id}.json")), format!("{text}\n"))?;
                    }
                    println!("{text}");
                }
            }
            Ok(true)
        }
        Command::Kernel(a) => {
            let field = parse_coefficient(&a.coeff)?;
            let policy = parse_policy(cli.resolution_policy.as_deref())?;
            if a.pole.len() != 2 {
                return Err(HomogError::InvalidParameter("--pole takes y,s".into()));
            }
            let pole = (a.pole[0], a.pole[1]);
            let mut spec = EvalSpec::new(a.times.clone(), a.x_min, a.x_max).with_stride(a.stride);
            if a.gradients {
                spec = spec.with_gradients();
            }
            let sample = if a.adjoint {
                adjoint_column(&field, a.eps, pole, &spec, &policy)?
            } else if a.pole_derivative {
                gamma_eps_pole_derivative(&field, a.eps, pole, &spec, &policy)?
            } else if a.gradients {
                gamma_eps_gradients(&field, a.eps, pole, &spec, &policy)?
            } else {
                gamma_eps_column(&field, a.eps, pole, &spec, &policy)?
            };
            let stem = cli.out.clone().unwrap_or_else(|| PathBuf::from("kernel"));
            let (csv, meta) = save_kernel_sample(&stem, &sample)?;
            println!("{}", serde_json::to_string_pretty(&json!({ "csv": csv, "meta": meta, "mass": sample.mass }))?);
            Ok(true)
        }
    }
}

fn run(cli: &Cli, a: &RunArgs) -> Result<bool> {
    let mut base = match &a.config {
        Some(path) => serde_json::from_str::<ExperimentConfig>(&std::fs::read_to_string(path)?)?,
        None => ExperimentConfig::default(),
    };
    if let Some(c) = &a.coeff {
        base.coefficient = Some(parse_coefficient(c)?.family().clone());
    }
    if let Some(e) = &a.eps {
        base.eps = e.clone();
    }
    if let Some(t) = a.t {
        base.t = t;
    }
    if let Some(tl) = &a.t_ladder {
        base.t_ladder = tl.clone();
    }
    if let Some(s) = cli.scheme {
        base.scheme = s;
    }
    if cli.resolution_policy.is_some() {
        base.policy = parse_policy(cli.resolution_policy.as_deref())?;
    }
    let mut ids = Vec::new();
    for e in &a.experiment {
        if e == "all" {
            ids.extend(ExperimentId::ALL);
        } else {
            ids.push(e.parse::<ExperimentId>()?);
        }
    }
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    let mut all_pass = true;
    for id in ids {
        let cfg = ExperimentConfig {
            experiment: id,
            ..base.clone()
        };
        let report = run_experiment(&cfg)?;
        let files = write_report(&report, &dir)?;
        println!("{}  -> {}", summary(&report), files.json.display());
        all_pass &= report.pass;
    }
    Ok(all_pass)
}

fn summary(r: &RateReport) -> String {
    let mut s = format!("{:<10} {}", r.experiment.name(), if r.pass { "PASS" } else { "FAIL" });
    if let Some(f) = &r.fit {
        s.push_str(&format!("  slope {:.3}  r2 {:.4}", f.slope, f.r2));
    }
    if let Some(note) = &r.fit_note {
        s.push_str(&format!("  ({note})"));
    }
    for c in &r.checks {
        s.push_str(&format!("  {}={:.4e}{}", c.name, c.value, if c.pass { "" } else { "!" }));
    }
    s
}
