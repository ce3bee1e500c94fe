use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rotorlab_core::{PhaseMode, SimulationParams};

use crate::commands::{BackgroundChoice, BackgroundMode, Command};
use crate::config::{
    parse_config, ConfigFile, DisorderSection, LatticeSection, ModelSection, ObservablesSection,
    Variant,
};
use crate::error::CliError;

/// Environment variable selecting the number of ensemble workers.
pub const WORKERS_ENV: &str = "ROTORLAB_WORKERS";

#[derive(Debug, Parser)]
#[command(
    name = "rotorlab",
    version,
    about = "Random quantum kicked rotor: densities, backgrounds and contrasts"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Disorder-averaged density profiles at the requested times.
    Density(Common),
    /// Return amplitude, ballistic density and its decay time.
    Ballistic {
        #[command(flatten)]
        common: Common,
        /// Last time step (defaults to t_max_spectral).
        #[arg(long)]
        t_max: Option<usize>,
    },
    /// Spectral function and density of states.
    Spectral(Common),
    /// Classical background profile.
    Background {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "numeric")]
        mode: BackgroundMode,
        /// Time terms kept in the analytic spectral function.
        #[arg(long, default_value_t = 1)]
        t_terms: usize,
    },
    /// CBS and CFS contrasts against a background.
    Contrast {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "auto")]
        background: BackgroundChoice,
        #[arg(long, default_value_t = 1)]
        t_terms: usize,
        /// Also write the contrast difference to U0 on the same ensemble.
        #[arg(long)]
        difference: bool,
    },
    /// Exact diagonalization: eigenphases and steady state.
    Eigen(Common),
    /// Eigenvector moments and the infinite-time CFS contrast.
    Moments {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "auto")]
        background: BackgroundChoice,
        #[arg(long, default_value_t = 1)]
        t_terms: usize,
    },
    /// Quick invariant checks; exits with code 4 on failure.
    Validate(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML experiment file; flags override its values.
    pub config: Option<PathBuf>,
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long = "K")]
    pub kick: Option<f64>,
    #[arg(long)]
    pub hbar: Option<f64>,
    #[arg(long, value_enum)]
    pub model: Option<Variant>,
    #[arg(long)]
    pub t0: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub x0_over_pi: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub realizations: Option<usize>,
    /// Use kinetic phases instead of random ones.
    #[arg(long)]
    pub deterministic: bool,
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<usize>>,
    #[arg(long)]
    pub t_max_spectral: Option<usize>,
    #[arg(long)]
    pub n_omega: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

impl Common {
    fn overrides(&self) -> ConfigFile {
        ConfigFile {
            model: ModelSection {
                variant: self.model,
                t0: self.t0,
                r: self.r,
                kick: self.kick,
                hbar: self.hbar,
            },
            lattice: LatticeSection {
                n: self.n,
                x0_over_pi: self.x0_over_pi,
            },
            disorder: DisorderSection {
                mode: self.deterministic.then_some(PhaseMode::Deterministic),
                seed: self.seed,
                realizations: self.realizations,
            },
            observables: ObservablesSection {
                times: self.times.clone(),
                t_max_spectral: self.t_max_spectral,
                n_omega: self.n_omega,
            },
        }
    }

    /// Config file, then flags, then the worker variable.
    pub fn params(&self, workers: Option<&str>) -> Result<SimulationParams, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Io(std::io::Error::new(
                        e.kind(),
                        format!("{}: {e}", path.display()),
                    ))
                })?;
                parse_config(&text)?
            }
            None => ConfigFile::default(),
        };
        cfg.overlay(&self.overrides());
        let mut params = cfg.to_params()?;
        if let Some(w) = workers {
            let n = w.parse::<usize>().map_err(|_| {
                CliError::Config(format!("{WORKERS_ENV} = {w:?} is not a positive integer"))
            })?;
            params.workers = Some(n);
        }
        params.validate()?;
        Ok(params)
    }
}

impl Sub {
    pub fn split(&self) -> (Command, &Common) {
        match self {
            Sub::Density(c) => (Command::Density, c),
            Sub::Ballistic { common, t_max } => (Command::Ballistic { t_max: *t_max }, common),
            Sub::Spectral(c) => (Command::Spectral, c),
            Sub::Background {
                common,
                mode,
                t_terms,
            } => (
                Command::Background {
                    mode: *mode,
                    t_terms: *t_terms,
                },
                common,
            ),
            Sub::Contrast {
                common,
                background,
                t_terms,
                difference,
            } => (
                Command::Contrast {
                    background: *background,
                    t_terms: *t_terms,
                    difference: *difference,
                },
                common,
            ),
            Sub::Eigen(c) => (Command::Eigen, c),
            Sub::Moments {
                common,
                background,
                t_terms,
            } => (
                Command::Moments {
                    background: *background,
                    t_terms: *t_terms,
                },
                common,
            ),
            Sub::Validate(c) => (Command::Validate, c),
        }
    }
}
