//! TOML experiment files and command-line overrides.
//!
//! ```toml
//! [model]
//! variant = "ut0"   # u0 | ut0 | vr
//! t0 = 0.5
//! K = 20.0
//! hbar = 2.89
//!
//! [lattice]
//! N = 256
//! x0_over_pi = -0.5
//!
//! [disorder]
//! mode = "random"   # random | deterministic
//! seed = 0
//! realizations = 1000
//!
//! [observables]
//! times = [1, 5, 50]
//! t_max_spectral = 10
//! n_omega = 512
//! ```

use std::f64::consts::PI;

use rotorlab_core::params::{DEFAULT_HBAR, DEFAULT_N_OMEGA, DEFAULT_T_MAX_SPECTRAL, DEFAULT_X0};
use rotorlab_core::{Model, PhaseMode, SimulationParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    U0,
    Ut0,
    Vr,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub variant: Option<Variant>,
    pub t0: Option<f64>,
    pub r: Option<f64>,
    #[serde(rename = "K")]
    pub kick: Option<f64>,
    pub hbar: Option<f64>,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub x0_over_pi: Option<f64>,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderSection {
    pub mode: Option<PhaseMode>,
    pub seed: Option<u64>,
    pub realizations: Option<usize>,
}

#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservablesSection {
    pub times: Option<Vec<usize>>,
    pub t_max_spectral: Option<usize>,
    pub n_omega: Option<usize>,
}

/// Parsed config file; every key is optional and falls back to a default.
#[derive(Debug, Default, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub lattice: LatticeSection,
    #[serde(default)]
    pub disorder: DisorderSection,
    #[serde(default)]
    pub observables: ObservablesSection,
}

impl ConfigFile {
    /// Fills in fields of `self` from `other` where `other` has a value.
    pub fn overlay(&mut self, other: &ConfigFile) {
        fn set<T: Clone>(dst: &mut Option<T>, src: &Option<T>) {
            if src.is_some() {
                dst.clone_from(src);
            }
        }
        set(&mut self.model.variant, &other.model.variant);
        set(&mut self.model.t0, &other.model.t0);
        set(&mut self.model.r, &other.model.r);
        set(&mut self.model.kick, &other.model.kick);
        set(&mut self.model.hbar, &other.model.hbar);
        set(&mut self.lattice.n, &other.lattice.n);
        set(&mut self.lattice.x0_over_pi, &other.lattice.x0_over_pi);
        set(&mut self.disorder.mode, &other.disorder.mode);
        set(&mut self.disorder.seed, &other.disorder.seed);
        set(
            &mut self.disorder.realizations,
            &other.disorder.realizations,
        );
        set(&mut self.observables.times, &other.observables.times);
        set(
            &mut self.observables.t_max_spectral,
            &other.observables.t_max_spectral,
        );
        set(&mut self.observables.n_omega, &other.observables.n_omega);
    }

    /// Resolves defaults and validates.
    pub fn to_params(&self) -> Result<SimulationParams, CliError> {
        let d = SimulationParams::default();
        let model =
            match self.model.variant.unwrap_or(Variant::U0) {
                Variant::U0 => {
                    reject_unused("t0", self.model.t0, "u0")?;
                    reject_unused("r", self.model.r, "u0")?;
                    Model::U0
                }
                Variant::Ut0 => {
                    reject_unused("r", self.model.r, "ut0")?;
                    Model::Ut0 {
                        t0: self.model.t0.ok_or_else(|| {
                            CliError::Config("variant ut0 needs t0 in [0, 1]".into())
                        })?,
                    }
                }
                Variant::Vr => {
                    reject_unused("t0", self.model.t0, "vr")?;
                    Model::Vr {
                        r: self.model.r.ok_or_else(|| {
                            CliError::Config("variant vr needs r in [0, 1]".into())
                        })?,
                    }
                }
            };
        let n = self.lattice.n.unwrap_or(d.n);
        let x0 = match self.lattice.x0_over_pi {
            Some(v) => snap_to_grid(v * PI, n),
            None => DEFAULT_X0,
        };
        let params = SimulationParams {
            n,
            kick: self.model.kick.unwrap_or(d.kick),
            hbar: self.model.hbar.unwrap_or(DEFAULT_HBAR),
            model,
            x0,
            phase_mode: self.disorder.mode.unwrap_or(PhaseMode::Random),
            seed: self.disorder.seed.unwrap_or(d.seed),
            n_realizations: self.disorder.realizations.unwrap_or(d.n_realizations),
            times: self.observables.times.clone().unwrap_or(d.times),
            t_max_spectral: self
                .observables
                .t_max_spectral
                .unwrap_or(DEFAULT_T_MAX_SPECTRAL),
            n_omega: self.observables.n_omega.unwrap_or(DEFAULT_N_OMEGA),
            workers: None,
        };
        params.validate()?;
        Ok(params)
    }
}

fn reject_unused(key: &str, v: Option<f64>, variant: &str) -> Result<(), CliError> {
    match v {
        Some(_) => Err(CliError::Config(format!(
            "`{key}` has no meaning for variant {variant}"
        ))),
        None => Ok(()),
    }
}

/// Rounds `x` onto the nearest grid point when it is within rounding distance,
/// so that values such as `x0_over_pi = -0.5` land exactly on the grid.
fn snap_to_grid(x: f64, n: usize) -> f64 {
    if n == 0 {
        return x;
    }
    let j = (x + PI) * n as f64 / (2.0 * PI);
    if (j - j.round()).abs() < 1e-9 {
        -PI + 2.0 * PI * j.round() / n as f64
    } else {
        x
    }
}

pub fn parse_config(text: &str) -> Result<ConfigFile, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

/// Parses and validates a config file in one step.
pub fn parse_params(text: &str) -> Result<SimulationParams, CliError> {
    parse_config(text)?.to_params()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let p = parse_params("").unwrap();
        assert_eq!(p.hbar, 2.89);
        assert_eq!(p.x0, -PI / 2.0);
        assert_eq!(p.t_max_spectral, 10);
        assert_eq!(p.n_omega, 512);
        assert_eq!(p.model, Model::U0);
    }

    #[test]
    fn reference_configs_are_accepted() {
        let one = "[lattice]\nN = 1024\n[model]\nK = 20.0\nhbar = 2.89\n[disorder]\nrealizations = 20000\n";
        let p = parse_params(one).unwrap();
        assert_eq!((p.n, p.n_realizations), (1024, 20000));
        for k in [10.0, 20.0, 40.0] {
            let text = format!("[lattice]\nN = 200\n[model]\nK = {k}\nhbar = 2.89\nvariant = \"ut0\"\nt0 = 0.5\n[disorder]\nrealizations = 10000\n");
            let p = parse_params(&text).unwrap();
            assert_eq!(p.model, Model::U_HALF);
            assert_eq!(p.x0_index().unwrap(), 50);
        }
    }

    #[test]
    fn range_and_key_errors() {
        assert!(parse_params("[model]\nvariant = \"ut0\"\nt0 = 1.5\n").is_err());
        assert!(parse_params("[model]\nvariant = \"ut0\"\n").is_err());
        assert!(parse_params("[model]\nvariant = \"u0\"\nr = 0.5\n").is_err());
        let e = parse_params("[model]\nkick = 3.0\n").unwrap_err();
        assert!(e.to_string().contains("unknown field"), "{e}");
        assert!(parse_params("[extra]\na = 1\n").is_err());
        assert!(parse_params("[lattice]\nN = 64\nx0_over_pi = 0.01\n").is_err());
        assert!(parse_params("[lattice]\nN = 63\n").is_err());
        assert!(parse_params("[observables]\ntimes = [5, 1]\n").is_err());
        assert!(parse_params("[observables]\nt_max_spectral = 10\nn_omega = 20\n").is_err());
    }

    #[test]
    fn overlay_prefers_the_override() {
        let mut base = parse_config("[model]\nK = 5.0\n[lattice]\nN = 64\n").unwrap();
        let over = parse_config("[model]\nK = 7.0\n").unwrap();
        base.overlay(&over);
        let p = base.to_params().unwrap();
        assert_eq!((p.kick, p.n), (7.0, 64));
    }

    #[test]
    fn x0_is_snapped_to_grid() {
        let p = parse_params("[lattice]\nN = 800\nx0_over_pi = 0.3\n").unwrap();
        assert_eq!(p.x0_index().unwrap(), 520);
        assert!((p.x0 - 0.3 * PI).abs() < 1e-12);
    }
}
