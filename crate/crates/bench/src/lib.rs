//! Shared fixtures for the benchmarks.

use rotorlab_core::ensemble::{sample_disorder, EnsembleSpec};
use rotorlab_core::{DisorderRealization, FloquetVariant, Lattice, Model, Result, StateVector};

pub const KICK_OVER_HBAR: f64 = 20.0 / 2.89;

pub struct Fixture {
    pub lattice: Lattice,
    pub variant: FloquetVariant,
    pub disorder: DisorderRealization,
    pub state: StateVector,
}

/// One random realization of `model` on `n` sites, started from a position delta.
pub fn fixture(n: usize, model: Model) -> Result<Fixture> {
    let lattice = Lattice::new(n)?;
    let variant = FloquetVariant::new(model)?;
    let disorder = sample_disorder(&EnsembleSpec::new(7, 1), 0, n)?;
    let state = lattice.position_state_at(n / 4);
    Ok(Fixture {
        lattice,
        variant,
        disorder,
        state,
    })
}
