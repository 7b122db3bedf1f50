use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use covertsim_cli::config::{parse_config, Scenario};
use covertsim_cli::experiments::{columns, run};

const CONFIG_ERROR: u8 = 2;
const RUNTIME_ERROR: u8 = 1;

#[derive(Parser)]
#[command(
    name = "covertsim",
    version,
    about = "Covert communication experiments on Poisson packet channels",
    after_help = "Every subcommand also reads `key = value` files via --config; flags win over the file.\n\
                  COVERTSIM_THREADS caps the number of worker threads.\n\
                  Exit status: 0 success, 1 runtime or capability error, 2 configuration error."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Divergence closed forms and error-sum floor per horizon.
    #[command(after_help = kl_help())]
    Kl(Opts),
    /// Count-detector error rates against a covert insertion schedule.
    #[command(after_help = detect_help())]
    Detect(Opts),
    /// Square-root-law sweep at the covert insertion budget.
    #[command(after_help = sqrtlaw_help())]
    Sqrtlaw(Opts),
    /// Covertness of buffering by slowdown, T being the buffering window.
    #[command(after_help = buffering_help())]
    Buffering(Opts),
    /// Random-walk survival: simulation, exact sum and erf limit.
    #[command(after_help = walk_help())]
    Walk(Opts),
    /// Phase plan and closed forms of the timing channel.
    #[command(after_help = timing_help())]
    Timing(Opts),
    /// End-to-end buffering, codeword release, queue and decoding.
    #[command(after_help = e2e_help())]
    E2e(Opts),
    /// Runs the scenario named by the config file's `scenario` key.
    Run(Opts),
}

macro_rules! help_fns {
    ($($name:ident => $sc:expr),* $(,)?) => {
        $(fn $name() -> String {
            format!("CSV columns: {}", columns($sc))
        })*
    };
}

help_fns! {
    kl_help => Scenario::Kl,
    detect_help => Scenario::Detect,
    sqrtlaw_help => Scenario::Sqrtlaw,
    buffering_help => Scenario::Buffering,
    walk_help => Scenario::Walk,
    timing_help => Scenario::Timing,
    e2e_help => Scenario::E2e,
}

#[derive(Args, Debug, Default)]
struct Opts {
    /// `key = value` file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overt packet rate λ (packets/s).
    #[arg(long)]
    lambda: Option<String>,
    /// Queue service rate μ (packets/s).
    #[arg(long)]
    mu: Option<String>,
    /// Horizon(s) in seconds; comma-separated where a sweep is allowed.
    #[arg(long = "T")]
    horizons: Option<String>,
    /// Covertness ε in (0, 1).
    #[arg(long)]
    epsilon: Option<String>,
    /// Failure target ζ in (0, 1).
    #[arg(long)]
    zeta: Option<String>,
    /// Chebyshev detector level (default 0.05).
    #[arg(long)]
    alpha: Option<String>,
    /// Monte Carlo trials.
    #[arg(long)]
    trials: Option<String>,
    /// Codebook size.
    #[arg(long = "M")]
    codebook_size: Option<String>,
    /// Master seed.
    #[arg(long)]
    seed: Option<String>,
    /// Walk barrier offset (barrier at m + 1).
    #[arg(long)]
    m: Option<String>,
    /// Walk length.
    #[arg(long)]
    steps: Option<String>,
    /// detect: `overload` (4(λT)^{3/4} packets, default) or `budget`.
    #[arg(long)]
    schedule: Option<String>,
    /// detect, sqrtlaw: `counts` (default) or `traces`.
    #[arg(long)]
    sampling: Option<String>,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Opts {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let pairs = [
            ("lambda", &self.lambda),
            ("mu", &self.mu),
            ("T", &self.horizons),
            ("epsilon", &self.epsilon),
            ("zeta", &self.zeta),
            ("alpha", &self.alpha),
            ("trials", &self.trials),
            ("M", &self.codebook_size),
            ("seed", &self.seed),
            ("m", &self.m),
            ("steps", &self.steps),
            ("schedule", &self.schedule),
            ("sampling", &self.sampling),
        ];
        let mut out: Vec<_> = pairs
            .into_iter()
            .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
            .collect();
        if let Some(path) = &self.out {
            out.push(("out", path.display().to_string()));
        }
        out
    }
}

fn init_threads() -> Result<(), String> {
    let Ok(text) = std::env::var("COVERTSIM_THREADS") else {
        return Ok(());
    };
    let n: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| format!("COVERTSIM_THREADS must be a positive integer, got `{text}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (scenario, opts) = match &cli.command {
        Command::Kl(o) => (Some(Scenario::Kl), o),
        Command::Detect(o) => (Some(Scenario::Detect), o),
        Command::Sqrtlaw(o) => (Some(Scenario::Sqrtlaw), o),
        Command::Buffering(o) => (Some(Scenario::Buffering), o),
        Command::Walk(o) => (Some(Scenario::Walk), o),
        Command::Timing(o) => (Some(Scenario::Timing), o),
        Command::E2e(o) => (Some(Scenario::E2e), o),
        Command::Run(o) => (None, o),
    };
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(CONFIG_ERROR);
    }
    let cfg = match parse_config(opts.config.as_deref(), &opts.overrides(), scenario) {
        Ok(cfg) => cfg,
        Err(err) => {
            for issue in &err.0 {
                eprintln!("config error: {issue}");
            }
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let report = match run(&cfg) {
        Ok(r) => r,
        Err(err @ covertsim::Error::Parameter { .. }) => {
            eprintln!("config error: {err}");
            return ExitCode::from(CONFIG_ERROR);
        }
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(RUNTIME_ERROR);
        }
    };
    match &cfg.output_path {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &report.csv) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(RUNTIME_ERROR);
            }
        }
        None => print!("{}", report.csv),
    }
    println!("{}", report.summary);
    ExitCode::SUCCESS
}
