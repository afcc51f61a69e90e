use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use iamcf::{convergence_study, run, RunConfig, OUTPUT_ROOT_ENV};

#[derive(Parser)]
#[command(name = "iamcf", version, about = "Weak inverse anisotropic mean curvature flow via the Finsler p-Laplacian")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the continuation solve and write fields, without checks.
    Solve(Common),
    /// Solve, run the configured checks and write the summary.
    Check(Common),
    /// Refinement study over several resolutions.
    Study(Common),
}

#[derive(Args)]
struct Common {
    /// TOML file or the name of a bundled configuration.
    #[arg(long, default_value = "wulff_euclid_2d")]
    config: String,
    /// Output directory; defaults to the config's `output`, then `$IAMCF_OUT/<name>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated, strictly decreasing exponents.
    #[arg(long, value_delimiter = ',')]
    p_schedule: Option<Vec<f64>>,
    /// Cells per axis; `study` accepts a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    resolution: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Root for default output directories.
    #[arg(long, env = OUTPUT_ROOT_ENV, default_value = "out", hide_env_values = true)]
    output_root: PathBuf,
}

impl Common {
    fn load(&self) -> anyhow::Result<(RunConfig, PathBuf)> {
        let mut config = RunConfig::resolve(&self.config)?;
        if let Some(schedule) = &self.p_schedule {
            config.solver.schedule = schedule.clone();
        }
        if let Some(&[resolution]) = self.resolution.as_deref() {
            config.grid.resolution = resolution;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        let out = match (&self.out, &config.output) {
            (Some(out), _) => out.clone(),
            (None, Some(out)) => out.clone(),
            (None, None) => self.output_root.join(&config.name),
        };
        config.output = Some(out.clone());
        Ok((config, out))
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Solve(args) => {
            let (mut config, out) = args.load()?;
            config.checks.clear();
            run(&config, &out)?;
            println!("fields written to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Check(args) => {
            let (config, out) = args.load()?;
            let report = run(&config, &out)?;
            print!("{}", report.summary());
            Ok(if report.failed() { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
        Command::Study(args) => {
            let (config, out) = args.load()?;
            let resolutions = args.resolution.clone().unwrap_or_else(|| {
                let r = config.grid.resolution;
                vec![r / 4, r / 2, r]
            });
            let table = convergence_study(&config, &resolutions, &config.solver.schedule)?;
            table.write(&out).with_context(|| format!("writing study tables to {}", out.display()))?;
            println!("resolution h p error limit_gap");
            for row in &table.rows {
                let gap = row.limit_gap.map_or_else(|| "-".into(), |g| format!("{g:.6e}"));
                println!("{} {:.6e} {} {:.6e} {}", row.resolution, row.h, row.p, row.error, gap);
            }
            for o in &table.orders {
                println!("order p={} h={:.4e}->{:.4e} {:.3}", o.p, o.h_coarse, o.h_fine, o.order);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
