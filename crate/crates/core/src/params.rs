use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which one-period Floquet operator drives the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum Model {
    /// Free evolution over a full period followed by a full kick.
    U0,
    /// Stroboscopic origin shifted by `t0`: `Up^t0 Ux Up^(1-t0)`.
    Ut0 { t0: f64 },
    /// Kick split into `Ux^r Up Ux^(1-r)`.
    Vr { r: f64 },
}

impl Model {
    /// Time-symmetrized variant (half free evolutions around the kick).
    pub const U_HALF: Model = Model::Ut0 { t0: 0.5 };
    /// Kick-symmetrized variant (half kicks around the free evolution).
    pub const V_HALF: Model = Model::Vr { r: 0.5 };

    pub fn validate(&self) -> Result<()> {
        match *self {
            Model::U0 => Ok(()),
            Model::Ut0 { t0 } if !(0.0..=1.0).contains(&t0) => {
                Err(Error::param("t0", format!("{t0} outside [0, 1]")))
            }
            Model::Vr { r } if !(0.0..=1.0).contains(&r) => {
                Err(Error::param("r", format!("{r} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }

    /// Short lowercase tag used in file names and CSV headers.
    pub fn tag(&self) -> String {
        match *self {
            Model::U0 => "u0".into(),
            Model::Ut0 { t0 } => format!("ut0={t0}"),
            Model::Vr { r } => format!("vr={r}"),
        }
    }
}

/// Source of the free-evolution phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseMode {
    /// i.i.d. uniform phases on [0, 2pi), one draw per realization.
    Random,
    /// Kinetic phases `p^2 hbar / 2 mod 2pi`, identical for every realization.
    Deterministic,
}

/// Full description of one numerical experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationParams {
    /// Number of momentum states (and position grid points).
    pub n: usize,
    /// Kick strength K.
    pub kick: f64,
    /// Effective Planck constant.
    pub hbar: f64,
    pub model: Model,
    /// Initial position in radians; must sit on the grid.
    pub x0: f64,
    pub phase_mode: PhaseMode,
    pub seed: u64,
    pub n_realizations: usize,
    /// Observation times (number of Floquet periods), ascending.
    pub times: Vec<usize>,
    /// Truncation of the time sum building the spectral function.
    pub t_max_spectral: usize,
    /// Number of quadrature points on the quasi-energy circle.
    pub n_omega: usize,
    /// Optional worker count for ensemble runs; `None` uses the global pool.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

pub const DEFAULT_HBAR: f64 = 2.89;
pub const DEFAULT_X0: f64 = -PI / 2.0;
pub const DEFAULT_T_MAX_SPECTRAL: usize = 10;
pub const DEFAULT_N_OMEGA: usize = 512;

impl Default for SimulationParams {
    fn default() -> Self {
        Self {
            n: 256,
            kick: 20.0,
            hbar: DEFAULT_HBAR,
            model: Model::U0,
            x0: DEFAULT_X0,
            phase_mode: PhaseMode::Random,
            seed: 0,
            n_realizations: 1000,
            times: vec![1, 5, 50],
            t_max_spectral: DEFAULT_T_MAX_SPECTRAL,
            n_omega: DEFAULT_N_OMEGA,
            workers: None,
        }
    }
}

impl SimulationParams {
    /// Kick strength in units of hbar, the argument of every Bessel function.
    pub fn kick_over_hbar(&self) -> f64 {
        self.kick / self.hbar
    }

    /// Scattering mean free path in the momentum lattice, `K / hbar`.
    pub fn mean_free_path(&self) -> f64 {
        self.kick_over_hbar()
    }

    /// Localization length estimate `K^2 / (4 hbar^2)`.
    pub fn predicted_localization_length(&self) -> f64 {
        let a = self.kick_over_hbar();
        a * a / 4.0
    }

    pub fn validate(&self) -> Result<()> {
        validate_size(self.n)?;
        if !(self.kick > 0.0 && self.kick.is_finite()) {
            return Err(Error::param("K", format!("{} must be > 0", self.kick)));
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(Error::param("hbar", format!("{} must be > 0", self.hbar)));
        }
        self.model.validate()?;
        grid_index(self.x0, self.n)?;
        if self.n_realizations == 0 {
            return Err(Error::param("realizations", "must be >= 1"));
        }
        if self.times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("times", "must be strictly increasing"));
        }
        if self.t_max_spectral == 0 {
            return Err(Error::param("t_max_spectral", "must be >= 1"));
        }
        if self.n_omega < 4 * self.t_max_spectral {
            return Err(Error::param(
                "n_omega",
                format!(
                    "{} < 4 * t_max_spectral = {}",
                    self.n_omega,
                    4 * self.t_max_spectral
                ),
            ));
        }
        if self.workers == Some(0) {
            return Err(Error::param("workers", "must be >= 1"));
        }
        Ok(())
    }

    pub fn x0_index(&self) -> Result<usize> {
        grid_index(self.x0, self.n)
    }
}

pub(crate) fn validate_size(n: usize) -> Result<()> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::param("N", format!("{n} must be even and >= 4")));
    }
    Ok(())
}

/// Index `j` with `x = -pi + 2 pi j / n`, or an error if `x` is off-grid.
pub fn grid_index(x: f64, n: usize) -> Result<usize> {
    let j = (x + PI) * n as f64 / (2.0 * PI);
    let jr = j.round();
    if !x.is_finite() || (j - jr).abs() > 1e-9 || jr < 0.0 || jr >= n as f64 {
        return Err(Error::OffGrid { x0: x, n });
    }
    Ok(jr as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        SimulationParams::default().validate().unwrap();
    }

    #[test]
    fn rejects_out_of_range_variants() {
        assert!(Model::Ut0 { t0: 1.5 }.validate().is_err());
        assert!(Model::Vr { r: -0.1 }.validate().is_err());
        assert!(Model::Ut0 { t0: 1.0 }.validate().is_ok());
    }

    #[test]
    fn grid_index_accepts_only_grid_points() {
        assert_eq!(grid_index(-PI, 4).unwrap(), 0);
        assert_eq!(grid_index(0.0, 4).unwrap(), 2);
        assert_eq!(grid_index(-PI / 2.0, 1024).unwrap(), 256);
        assert!(grid_index(0.1, 4).is_err());
        assert!(grid_index(PI, 4).is_err());
    }

    #[test]
    fn rejects_bad_sizes_and_spectral_grids() {
        let d = SimulationParams::default;
        assert!(SimulationParams { n: 5, ..d() }.validate().is_err());
        assert!(SimulationParams { n_omega: 39, ..d() }.validate().is_err());
        assert!(SimulationParams {
            times: vec![5, 1],
            ..d()
        }
        .validate()
        .is_err());
    }
}
