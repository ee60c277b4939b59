use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tclab_core::harness::{self, config, Command, ExperimentConfig, OUT_DIR_ENV};
use tclab_core::Error;

#[derive(Parser, Debug)]
#[command(name = "tclab", version, about = "Time-changed Lévy process experiments")]
struct Cli {
    /// Output directory for artifacts.
    #[arg(long, global = true, env = OUT_DIR_ENV)]
    out_dir: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug)]
struct Target {
    /// Model, e.g. `brownian:a=1,s2=4`.
    #[arg(long)]
    model: String,
    /// Rate expression, e.g. `exp(x)`.
    #[arg(long)]
    rate: String,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Classify the boundary at +∞.
    Classify(#[command(flatten)] Target),
    /// Simulate time-changed paths on a grid.
    Simulate {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        x0: Option<String>,
        #[arg(long)]
        dt: Option<String>,
        #[arg(long)]
        steps: Option<String>,
        #[arg(long)]
        t_max: Option<String>,
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        paths: Option<String>,
    },
    /// Stabilisation of laws started from large levels.
    EntranceStudy {
        #[command(flatten)]
        target: Target,
        /// Comma-separated starting levels.
        #[arg(long)]
        levels: Option<String>,
        #[arg(long)]
        t_probe: Option<String>,
        #[arg(long)]
        b: Option<String>,
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        dt: Option<String>,
        #[arg(long)]
        max_steps: Option<String>,
    },
    /// Small-time speed of descent from +∞.
    Speed {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        x_proxy: Option<String>,
        /// Comma-separated times.
        #[arg(long)]
        t: Option<String>,
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        dt: Option<String>,
        #[arg(long)]
        max_steps: Option<String>,
    },
    /// Undershoot laws below decreasing levels.
    Undershoot {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        x_proxy: Option<String>,
        #[arg(long)]
        levels: Option<String>,
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        dt: Option<String>,
        #[arg(long)]
        max_steps: Option<String>,
    },
    /// Sample excursions from +∞.
    Excursions {
        #[command(flatten)]
        target: Target,
        /// `continuous` or `jump-in`.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        theta: Option<String>,
        #[arg(long)]
        y: Option<String>,
        /// Comma-separated decreasing stratification levels.
        #[arg(long)]
        levels: Option<String>,
        #[arg(long)]
        x_proxy: Option<String>,
        #[arg(long)]
        window: Option<String>,
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        dt: Option<String>,
        /// `a,M,bins` for the occupation-density check.
        #[arg(long)]
        occupation: Option<String>,
    },
    /// Glue excursions into a recurrent extension.
    Glue {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        theta: Option<String>,
        #[arg(long)]
        a_threshold: Option<String>,
        #[arg(long)]
        horizon: Option<String>,
        #[arg(long)]
        n_real: Option<String>,
        #[arg(long)]
        x_proxy: Option<String>,
        #[arg(long)]
        window: Option<String>,
        #[arg(long)]
        start: Option<String>,
        #[arg(long)]
        dt: Option<String>,
        #[arg(long)]
        budget: Option<String>,
    },
    /// Hitting probabilities from large starting points.
    CramerLimit {
        #[arg(long)]
        model: String,
        #[arg(long)]
        theta: Option<String>,
        #[arg(long)]
        y: Option<String>,
        /// Comma-separated starting points.
        #[arg(long)]
        x: Option<String>,
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        dt: Option<String>,
        #[arg(long)]
        max_steps: Option<String>,
    },
    /// Run the acceptance checks.
    Selftest {
        /// `quick` or `full`.
        #[arg(long)]
        suite: Option<String>,
        /// Comma-separated criterion ids.
        #[arg(long)]
        criteria: Option<String>,
    },
    /// Run an experiment described by a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

type Params = Vec<(&'static str, Option<String>)>;

macro_rules! params {
    ($($k:ident),* $(,)?) => {
        vec![$((stringify!($k), $k)),*]
    };
}

fn build(cli: Cli) -> Result<ExperimentConfig, Error> {
    let (command, target, params): (Command, Option<Target>, Params) = match cli.command {
        Cmd::Run { config } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Error::Io(format!("{}: {e}", config.display())))?;
            let mut cfg = config::parse_config(&text)?;
            if let Some(dir) = cli.out_dir {
                // explicit flag or env var wins only when the file leaves it unset
                if cfg.out_dir == config::default_out_dir() {
                    cfg.out_dir = dir;
                }
            }
            return Ok(cfg);
        }
        Cmd::Classify(t) => (Command::Classify, Some(t), vec![]),
        Cmd::Simulate { target, x0, dt, steps, t_max, grid, paths } => {
            (Command::Simulate, Some(target), params![x0, dt, steps, t_max, grid, paths])
        }
        Cmd::EntranceStudy { target, levels, t_probe, b, n, dt, max_steps } => {
            (Command::EntranceStudy, Some(target), params![levels, t_probe, b, n, dt, max_steps])
        }
        Cmd::Speed { target, x_proxy, t, n, dt, max_steps } => {
            (Command::Speed, Some(target), params![x_proxy, t, n, dt, max_steps])
        }
        Cmd::Undershoot { target, x_proxy, levels, n, dt, max_steps } => {
            (Command::Undershoot, Some(target), params![x_proxy, levels, n, dt, max_steps])
        }
        Cmd::Excursions { target, mode, theta, y, levels, x_proxy, window, n, dt, occupation } => (
            Command::Excursions,
            Some(target),
            params![mode, theta, y, levels, x_proxy, window, n, dt, occupation],
        ),
        Cmd::Glue { target, mode, theta, a_threshold, horizon, n_real, x_proxy, window, start, dt, budget } => (
            Command::Glue,
            Some(target),
            params![mode, theta, a_threshold, horizon, n_real, x_proxy, window, start, dt, budget],
        ),
        Cmd::CramerLimit { model, theta, y, x, n, dt, max_steps } => {
            let mut cfg = ExperimentConfig::new(Command::CramerLimit);
            cfg.model = Some(model);
            return Ok(finish(cfg, cli.seed, cli.out_dir, params![theta, y, x, n, dt, max_steps]));
        }
        Cmd::Selftest { suite, criteria } => (Command::Selftest, None, params![suite, criteria]),
    };
    let mut cfg = ExperimentConfig::new(command);
    if let Some(t) = target {
        cfg.model = Some(t.model);
        cfg.rate = Some(t.rate);
    }
    Ok(finish(cfg, cli.seed, cli.out_dir, params))
}

fn finish(mut cfg: ExperimentConfig, seed: u64, out_dir: Option<PathBuf>, params: Params) -> ExperimentConfig {
    cfg.seed = seed;
    if let Some(dir) = out_dir {
        cfg.out_dir = dir;
    }
    for (k, v) in params {
        if let Some(v) = v {
            cfg = cfg.with_param(k, v);
        }
    }
    cfg
}

fn report(e: &Error, cfg: Option<&ExperimentConfig>) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Parse { column, .. } => {
            if let Some(src) = cfg.and_then(|c| c.rate.as_deref()) {
                eprintln!("  {src}\n  {}^", " ".repeat(column.saturating_sub(1)));
            }
            ExitCode::from(2)
        }
        Error::Config { .. } => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match build(cli) {
        Ok(c) => c,
        Err(e) => return report(&e, None),
    };
    match harness::run(&cfg) {
        Ok(out) => {
            let _ = writeln!(std::io::stdout(), "{}", out.summary);
            eprintln!("artifacts written to {}", cfg.out_dir.display());
            ExitCode::from(out.exit_code as u8)
        }
        Err(e) => report(&e, Some(&cfg)),
    }
}
