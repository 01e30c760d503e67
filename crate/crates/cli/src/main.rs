//! Batch front door: subcommands compile into a [`config::RunConfig`] and
//! route through [`dispatch::dispatch`]. Exit codes: 0 success, 1 malformed
//! input or configuration, 2 infeasible numerics (such as an unstable
//! explicit grid), 3 a failed no-arbitrage check under `na1`.

mod config;
mod dispatch;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::{RunConfig, Selection, StepperChoice};

#[derive(Parser)]
#[command(name = "quasisure", version, about = "Robust pricing engine for nondominated market models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// Output path for the primary artifact (directory for follmer-demo).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for every randomized routine.
    #[arg(long)]
    seed: Option<u64>,
    /// Numeric tolerance (verification slack, epsilon in MC mode).
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check no-arbitrage of the first kind on a tree family.
    Na1 {
        /// Tree family JSON document.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Robust superhedging price, value process and hedge on a tree.
    PriceTree {
        #[arg(long)]
        model: PathBuf,
        /// Claim JSON document.
        #[arg(long)]
        claim: Option<PathBuf>,
        /// Inline payoff such as call:100, put:90 or const:5.
        #[arg(long)]
        payoff: Option<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Worst-case-volatility PDE price surface.
    PriceBsb {
        /// Uncertainty class JSON document.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        claim: Option<PathBuf>,
        #[arg(long)]
        payoff: Option<String>,
        /// Grid as n_t,n_s,s_max.
        #[arg(long)]
        grid: Option<String>,
        /// PDE stepper: implicit (default) or explicit.
        #[arg(long)]
        stepper: Option<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Primal price against the brute-force dual bound.
    Duality {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        claim: Option<PathBuf>,
        #[arg(long)]
        payoff: Option<String>,
        /// Simplex grid step of the dual enumeration.
        #[arg(long)]
        grid_step: Option<f64>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Replay a hedge from a price.csv (tree mode) or verify PDE deltas on
    /// simulated paths (surface mode).
    VerifyHedge {
        #[arg(long)]
        model: Option<PathBuf>,
        /// price.csv produced by price-tree.
        #[arg(long)]
        price: Option<PathBuf>,
        #[arg(long)]
        spec: Option<PathBuf>,
        /// surface.csv produced by price-bsb.
        #[arg(long)]
        surface: Option<PathBuf>,
        #[arg(long)]
        claim: Option<PathBuf>,
        #[arg(long)]
        payoff: Option<String>,
        /// Monte Carlo path count in surface mode.
        #[arg(long)]
        samples: Option<usize>,
        /// Volatility selection in surface mode: uniform or adversarial.
        #[arg(long)]
        selection: Option<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Mass-loss demo: exact inverse-Bessel endpoint sampling against the
    /// Gaussian oracle, plus lifetime announcement on absorbed walks.
    FollmerDemo {
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        horizon: Option<f64>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run a command described by a JSON configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_grid(text: &str) -> Result<(usize, usize, f64), String> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("bad grid {text:?}; expected n_t,n_s,s_max"));
    }
    let n_t = parts[0].parse().map_err(|_| format!("bad n_t {:?}", parts[0]))?;
    let n_s = parts[1].parse().map_err(|_| format!("bad n_s {:?}", parts[1]))?;
    let s_max = parts[2].parse().map_err(|_| format!("bad s_max {:?}", parts[2]))?;
    Ok((n_t, n_s, s_max))
}

fn parse_selection(text: &str) -> Result<Selection, String> {
    match text {
        "uniform" => Ok(Selection::Uniform),
        "adversarial" => Ok(Selection::Adversarial),
        other => Err(format!("bad selection {other:?}")),
    }
}

fn parse_stepper(text: &str) -> Result<StepperChoice, String> {
    match text {
        "implicit" => Ok(StepperChoice::Implicit),
        "explicit" => Ok(StepperChoice::Explicit),
        other => Err(format!("bad stepper {other:?}")),
    }
}

fn apply_common(cfg: &mut RunConfig, common: &CommonArgs) {
    cfg.out = common.out.clone();
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = common.tolerance {
        cfg.tolerance = tol;
    }
}

fn build_config(command: Command) -> Result<RunConfig, String> {
    let mut cfg = RunConfig::default();
    match command {
        Command::Na1 { model, common } => {
            cfg.command = "na1".into();
            cfg.model = Some(model);
            apply_common(&mut cfg, &common);
        }
        Command::PriceTree {
            model,
            claim,
            payoff,
            common,
        } => {
            cfg.command = "price-tree".into();
            cfg.model = Some(model);
            cfg.claim = claim;
            cfg.payoff = payoff;
            apply_common(&mut cfg, &common);
        }
        Command::PriceBsb {
            spec,
            claim,
            payoff,
            grid,
            stepper,
            common,
        } => {
            cfg.command = "price-bsb".into();
            cfg.spec = Some(spec);
            cfg.claim = claim;
            cfg.payoff = payoff;
            if let Some(g) = grid {
                cfg.grid = Some(parse_grid(&g)?);
            }
            if let Some(s) = stepper {
                cfg.stepper = parse_stepper(&s)?;
            }
            apply_common(&mut cfg, &common);
        }
        Command::Duality {
            model,
            claim,
            payoff,
            grid_step,
            common,
        } => {
            cfg.command = "duality".into();
            cfg.model = Some(model);
            cfg.claim = claim;
            cfg.payoff = payoff;
            if let Some(step) = grid_step {
                if !(step > 0.0 && step <= 0.5) {
                    return Err(format!("grid step {step} outside (0, 0.5]"));
                }
                cfg.grid_step = step;
            }
            apply_common(&mut cfg, &common);
        }
        Command::VerifyHedge {
            model,
            price,
            spec,
            surface,
            claim,
            payoff,
            samples,
            selection,
            common,
        } => {
            cfg.command = "verify-hedge".into();
            cfg.model = model;
            cfg.price = price;
            cfg.spec = spec;
            cfg.surface = surface;
            cfg.claim = claim;
            cfg.payoff = payoff;
            if let Some(n) = samples {
                cfg.samples = n;
            }
            if let Some(s) = selection {
                cfg.selection = parse_selection(&s)?;
            }
            apply_common(&mut cfg, &common);
        }
        Command::FollmerDemo {
            samples,
            horizon,
            common,
        } => {
            cfg.command = "follmer-demo".into();
            if let Some(n) = samples {
                cfg.samples = n;
            }
            if let Some(t) = horizon {
                cfg.horizon = t;
            }
            apply_common(&mut cfg, &common);
        }
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| format!("cannot read {}: {e}", config.display()))?;
            cfg = config::validate_config(&text).map_err(|errors| errors.join("\n"))?;
        }
    }
    Ok(cfg)
}

fn main() {
    let cli = Cli::parse();
    let cfg = match build_config(cli.command) {
        Ok(cfg) => cfg,
        Err(message) => {
            eprintln!("error: {message}");
            std::process::exit(1);
        }
    };
    match dispatch::dispatch(&cfg) {
        Ok(report) => {
            if let Err(e) = dispatch::write_report(&report) {
                eprintln!("error: {e}");
                std::process::exit(1);
            }
            std::process::exit(report.exit_code);
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code);
        }
    }
}
