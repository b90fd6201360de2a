//! Pipelines behind the `sigvox` command: scene synthesis, mesh
//! conversion, denoiser training, progressive generation, rendering and
//! evaluation.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::Summary;
pub use config::Config;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "sigvox", version, about = "Voxel surface-field scene pipelines")]
pub struct Cli {
    /// Base seed for every random draw of the command.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// key=value configuration file.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set steps=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a procedural street-scene mesh.
    Synth(ConfigArgs),
    /// Convert a mesh into a VXF voxfield grid.
    Convert(ConfigArgs),
    /// Train the set denoiser on VXF grids.
    Train(ConfigArgs),
    /// Generate a scene for a semantic skeleton by spatial outpainting.
    Generate(ConfigArgs),
    /// Render a grid along a camera trajectory.
    Render(ConfigArgs),
    /// Chamfer sweep against a mesh, or token MMD between two corpora.
    Eval(ConfigArgs),
}

impl Command {
    fn args(&self) -> &ConfigArgs {
        match self {
            Command::Synth(a)
            | Command::Convert(a)
            | Command::Train(a)
            | Command::Generate(a)
            | Command::Render(a)
            | Command::Eval(a) => a,
        }
    }
}

pub fn run(cli: &Cli) -> Result<Summary, CliError> {
    let args = cli.command.args();
    let mut cfg = Config::load(args.config.as_deref())?;
    for o in &args.overrides {
        cfg.set(o)?;
    }
    let seed = cli.seed;
    match cli.command {
        Command::Synth(_) => commands::synth(&cfg, seed),
        Command::Convert(_) => commands::convert(&cfg, seed),
        Command::Train(_) => commands::train(&cfg, seed),
        Command::Generate(_) => commands::generate(&cfg, seed),
        Command::Render(_) => commands::render_frames(&cfg, seed),
        Command::Eval(_) => commands::eval(&cfg, seed),
    }
}
