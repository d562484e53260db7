//! Command-line experiment runner for the `plcml` library.

pub mod config;
pub mod output;
pub mod run;

use std::io::Write as _;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "plcml", version, about = "Power-line communication ML experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON experiment configuration; defaults apply to every missing key.
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,
    /// Dotted-path override such as `gan.model.epochs=200`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Root seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<std::path::PathBuf>,
    /// Worker threads, 0 for all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Echo-model channel corpus.
    ChannelGen,
    /// Noise features and SOM clustering.
    NoiseCluster,
    /// GAN channel synthesis.
    GanTrain,
    /// Autoencoder symbol error rate against PAM.
    AeSer,
    /// Optimal and learned routing.
    RouteSim,
    /// Grid anomaly classification.
    Diagnose,
    /// Print the resolved configuration.
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::ChannelGen => "channel-gen",
            Command::NoiseCluster => "noise-cluster",
            Command::GanTrain => "gan-train",
            Command::AeSer => "ae-ser",
            Command::RouteSim => "route-sim",
            Command::Diagnose => "diagnose",
            Command::Validate => "validate",
        }
    }
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Resolves the configuration from the file, the flags and the overrides.
pub fn resolve(cli: &Cli) -> Result<config::ExperimentConfig, config::ConfigError> {
    let mut doc = config::read_document(cli.config.as_deref())?;
    for o in &cli.overrides {
        config::apply_override(&mut doc, o)?;
    }
    if let Some(s) = cli.seed {
        config::set_path(&mut doc, "seed", s.into()).map_err(config::ConfigError::Input)?;
    }
    if let Some(o) = &cli.out {
        config::set_path(&mut doc, "output_dir", o.to_string_lossy().into_owned().into()).map_err(config::ConfigError::Input)?;
    }
    if let Some(t) = cli.threads {
        config::set_path(&mut doc, "threads", t.into()).map_err(config::ConfigError::Input)?;
    }
    config::ExperimentConfig::resolve(&doc)
}

/// Runs one subcommand and returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if cli.command == Command::Validate {
        let _ = writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
        return 0;
    }
    if cfg.threads > 0 {
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    let result = match cli.command {
        Command::ChannelGen => run::channel_gen(&cfg),
        Command::NoiseCluster => run::noise_cluster_run(&cfg),
        Command::GanTrain => run::gan_train_run(&cfg),
        Command::AeSer => run::ae_ser_run(&cfg),
        Command::RouteSim => run::route_sim(&cfg),
        Command::Diagnose => run::diagnose(&cfg),
        Command::Validate => unreachable!(),
    };
    let artifacts = match result {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {} failed: {e}", cli.command.name());
            return EXIT_RUNTIME;
        }
    };
    match output::commit(&cfg, cli.command.name(), artifacts) {
        Ok(paths) => {
            let mut stdout = std::io::stdout();
            for p in paths {
                let _ = writeln!(stdout, "{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: writing artifacts to {}: {e}", cfg.output_dir.display());
            EXIT_RUNTIME
        }
    }
}
