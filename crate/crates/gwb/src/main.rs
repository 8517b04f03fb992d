use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gwb_core::linalg::SymMatrix;
use gwb_core::mvo::{solve_mvo_certified, MvoProblem};
use gwb_core::posterior::{bl1_update, bl2_update, gwb1_update, gwb2_update, Method, PosteriorUpdate};
use gwb_core::views::confidence_to_lambda;
use gwb_core::{DMatrix, DVector, PriorSpec, ViewSet, ViewTarget};

use gwb::json::{read_json, to_canonical, write_canonical, PosteriorFile, PriorFile, ViewsFile, WeightsFile};
use gwb::panel::load_returns_csv;
use gwb::report::RunReport;
use gwb::selftest::{run_suite, SuiteSize};
use gwb::stage1::{run_stage1, Stage1Config};
use gwb::stage2::{run_stage2, Stage2Config};
use gwb::{AppError, Result};

#[derive(Parser)]
#[command(name = "gwb", version, about = "Black-Litterman and Wasserstein-barycenter portfolio updates")]
struct Cli {
    /// Worker threads for path-parallel runs (default: logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Bl1,
    Bl2,
    Gwb1,
    Gwb2,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Bl1 => Method::Bl1,
            MethodArg::Bl2 => Method::Bl2,
            MethodArg::Gwb1 => Method::Gwb1,
            MethodArg::Gwb2 => Method::Gwb2,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Replaces `master_seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Posterior mean and covariance from a prior and a set of views.
    Update {
        #[arg(long)]
        prior: PathBuf,
        #[arg(long)]
        views: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Confidence in [0, 1]; overrides the views file.
        #[arg(long)]
        confidence: Option<f64>,
        /// Drift uncertainty scale; overrides the prior file.
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Long-only mean-variance weights for a posterior.
    Allocate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 2.5)]
        gamma: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Back-validation on simulated return paths.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Walk-forward backtests on random subsets of a historical universe.
    Backtest {
        #[arg(long)]
        config: PathBuf,
        /// Universe CSV; overrides `universe_csv` in the config.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Render a run report.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Output file (json) or directory (csv); stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in invariant suite.
    Selftest {
        /// Use the full instance counts instead of the quick ones.
        #[arg(long)]
        full: bool,
    },
}

fn matrix(field: &str, rows: &[Vec<f64>]) -> Result<SymMatrix> {
    SymMatrix::from_rows(rows).map_err(|e| AppError::validation(field, e.to_string()))
}

fn dense(field: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(AppError::validation(field, "expected a non-empty rectangular matrix"));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn confidence_flag(t: Option<f64>, from_file: Option<f64>, needed: bool) -> Result<f64> {
    match t.or(from_file) {
        Some(t) => confidence_to_lambda(t).map_err(|e| AppError::validation("--confidence", e.to_string())),
        None if needed => Err(AppError::validation("--confidence", "required for gwb1/gwb2 (or set `confidence` in the views file)")),
        None => Ok(0.0),
    }
}

fn update(prior: &Path, views: &Path, method: Method, confidence: Option<f64>, tau: Option<f64>, out: &Path) -> Result<()> {
    let pf: PriorFile = read_json(prior)?;
    let vf: ViewsFile = read_json(views)?;
    let mu = DVector::from_vec(pf.mean.clone());
    let cov = matrix("cov", &pf.cov)?;
    let target = match method {
        Method::Bl1 | Method::Gwb1 => ViewTarget::DriftSpace,
        Method::Bl2 | Method::Gwb2 => ViewTarget::ReturnSpace,
    };
    let lambda = confidence_flag(confidence, vf.confidence, matches!(method, Method::Gwb1 | Method::Gwb2))?;
    let vset = ViewSet::new(
        dense("pick", &vf.pick)?,
        DVector::from_vec(vf.nu.clone()),
        matrix("views cov", &vf.cov)?,
        target,
        vf.confidence.unwrap_or(0.0),
    )
    .map_err(|e| AppError::core(views.display().to_string(), e))?;
    let spec = || -> Result<PriorSpec> {
        let tau = tau
            .or(pf.tau)
            .ok_or_else(|| AppError::validation("--tau", "required for bl1/gwb1 (or set `tau` in the prior file)"))?;
        PriorSpec::new(mu.clone(), cov.clone(), tau, pf.gamma.unwrap_or(2.5), pf.rf.unwrap_or(0.0))
            .map_err(|e| AppError::core(prior.display().to_string(), e))
    };
    let ctx = |e| AppError::core(format!("{} update", method.as_str()), e);
    let post: PosteriorUpdate = match method {
        Method::Bl1 => bl1_update(&spec()?, &vset).map_err(ctx)?,
        Method::Bl2 => bl2_update(&mu, &cov, &vset).map_err(ctx)?,
        Method::Gwb1 => gwb1_update(&spec()?, &vset, lambda).map_err(ctx)?,
        Method::Gwb2 => gwb2_update(&mu, &cov, &vset, lambda).map_err(ctx)?,
    };
    let file = PosteriorFile {
        method: method.as_str().into(),
        mean: post.mean.iter().copied().collect(),
        cov: post.cov.to_rows(),
        lambda: post.lambda_used.into(),
    };
    write_canonical(out, &file)
}

fn allocate(input: &Path, gamma: f64, out: &Path) -> Result<()> {
    let post: PosteriorFile = read_json(input)?;
    let cov = matrix("cov", &post.cov)?;
    let problem = MvoProblem::new(DVector::from_vec(post.mean), cov, gamma, 0.0)
        .map_err(|e| AppError::validation("--gamma", e.to_string()))?;
    let sol = solve_mvo_certified(&problem).map_err(|e| AppError::core("mean-variance solve", e))?;
    let file = WeightsFile {
        weights: sol.weights.w.iter().copied().collect(),
        gamma,
        objective: sol.objective,
        stationarity: sol.stationarity,
        slackness: sol.slackness,
    };
    write_canonical(out, &file)
}

fn simulate(config: &Path, out: &Path, o: &Overrides) -> Result<()> {
    let mut cfg: Stage1Config = read_json(config)?;
    if o.tau.is_some() {
        cfg.tau = o.tau;
    }
    cfg.gamma = o.gamma.unwrap_or(cfg.gamma);
    cfg.master_seed = o.seed.unwrap_or(cfg.master_seed);
    let report = run_stage1(&cfg)?;
    report.save_json(out)
}

fn backtest(config: &Path, data: Option<&Path>, out: &Path, o: &Overrides) -> Result<()> {
    let mut cfg: Stage2Config = read_json(config)?;
    if o.tau.is_some() {
        cfg.tau = o.tau;
    }
    cfg.gamma = o.gamma.unwrap_or(cfg.gamma);
    cfg.master_seed = o.seed.unwrap_or(cfg.master_seed);
    if let Some(d) = data {
        cfg.universe_csv = Some(d.to_path_buf());
    }
    cfg.validate()?;
    let csv = cfg
        .universe_csv
        .clone()
        .ok_or_else(|| AppError::validation("--data", "no universe CSV given on the command line or in the config"))?;
    let (panel, dropped) = load_returns_csv(&csv, cfg.cells, cfg.min_history())?;
    if !dropped.dropped_tickers.is_empty() || dropped.dropped_rows > 0 {
        log::warn!(
            "{}: dropped {} tickers with short history and {} incomplete rows",
            csv.display(),
            dropped.dropped_tickers.len(),
            dropped.dropped_rows
        );
    }
    let report = run_stage2(&cfg, &panel)?;
    report.save_json(out)
}

fn text_report(r: &RunReport) -> String {
    let mut out = format!("{} paths, critical |t| {}\n\n", r.sharpe.len(), r.t_critical);
    let width = r.methods.iter().map(String::len).max().unwrap_or(0).max(6);
    for (i, m) in r.methods.iter().enumerate() {
        let col: Vec<f64> = r.sharpe.iter().map(|row| row[i]).collect();
        let mean = col.iter().sum::<f64>() / col.len().max(1) as f64;
        out.push_str(&format!("{m:<width$}  mean Sharpe {mean:+.4}\n"));
    }
    out.push_str("\nmethod_a vs method_b: delta_s (t)\n");
    for (i, a) in r.methods.iter().enumerate() {
        for (j, b) in r.methods.iter().enumerate() {
            if i < j {
                let t = r.tstat[i][j];
                let mark = if t.abs() > r.t_critical { " *" } else { "" };
                out.push_str(&format!("{a:<width$} vs {b:<width$}: {:+.4} ({t:+.2}){mark}\n", r.delta_s[i][j]));
            }
        }
    }
    for (a, b) in &r.zero_variance_pairs {
        out.push_str(&format!("note: {a} and {b} agree on every path\n"));
    }
    out
}

fn report(input: &Path, format: Format, out: Option<&Path>) -> Result<()> {
    let r = RunReport::load_json(input)?;
    match (format, out) {
        (Format::Json, Some(p)) => r.save_json(p),
        (Format::Json, None) => {
            print!("{}", to_canonical(&r));
            Ok(())
        }
        (Format::Csv, Some(dir)) => r.save_csv(dir),
        (Format::Csv, None) => {
            print!("{}", r.pairs_csv());
            Ok(())
        }
        (Format::Text, Some(p)) => std::fs::write(p, text_report(&r)).map_err(|e| AppError::io(p, e)),
        (Format::Text, None) => {
            print!("{}", text_report(&r));
            Ok(())
        }
    }
}

fn selftest(full: bool) -> Result<bool> {
    let size = if full { SuiteSize::FULL } else { SuiteSize::QUICK };
    let mut ok = true;
    for c in run_suite(size) {
        println!("{}", c.line());
        ok &= c.passed;
    }
    Ok(ok)
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(AppError::validation("--threads", "must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| AppError::validation("--threads", e.to_string()))?;
    }
    match cli.command {
        Command::Update {
            prior,
            views,
            method,
            confidence,
            tau,
            out,
        } => update(&prior, &views, method.into(), confidence, tau, &out)?,
        Command::Allocate { input, gamma, out } => allocate(&input, gamma, &out)?,
        Command::Simulate { config, out, overrides } => simulate(&config, &out, &overrides)?,
        Command::Backtest {
            config,
            data,
            out,
            overrides,
        } => backtest(&config, data.as_deref(), &out, &overrides)?,
        Command::Report { input, format, out } => report(&input, format, out.as_deref())?,
        Command::Selftest { full } => return selftest(full),
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GWB_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let mut msg = format!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                msg.push_str(&format!("\n  caused by: {s}"));
                source = s.source();
            }
            eprintln!("{msg}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
