use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hapticrrt::cli::{self, RunOptions};

#[derive(Parser)]
#[command(name = "hapticrrt", version, about = "Motion planning on quasi-static equilibrium manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `planner.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Config override `dotted.path=value`; repeatable.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    set: Vec<String>,
}

impl From<Common> for RunOptions {
    fn from(c: Common) -> Self {
        RunOptions { config: c.config, seed: c.seed, out: c.out, set: c.set }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Grow a HapticRRT tree and extract a path to the goal.
    Plan(Common),
    /// Enumerate stable equilibria over a 2-D control grid.
    Mesh {
        #[command(flatten)]
        common: Common,
        /// `name=lo:hi:n,name=lo:hi:n`
        #[arg(long)]
        grid: String,
    },
    /// Haptic metric ellipses over a 2-D control grid.
    MetricField {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        grid: String,
    },
    /// Check a run directory's hashes and invariants.
    Verify {
        dir: PathBuf,
        /// Re-execute the run and compare outputs byte for byte.
        #[arg(long)]
        rerun: bool,
    },
}

fn main() {
    let result = match Cli::parse().command {
        Command::Plan(c) => cli::cmd_plan(&c.into()),
        Command::Mesh { common, grid } => cli::cmd_mesh(&common.into(), &grid),
        Command::MetricField { common, grid } => cli::cmd_metric_field(&common.into(), &grid),
        Command::Verify { dir, rerun } => cli::cmd_verify(&dir, rerun),
    };
    std::process::exit(cli::exit_code(result));
}
