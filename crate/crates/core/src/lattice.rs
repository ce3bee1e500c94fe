//! Position/momentum grids and the Fourier pair between them.
//!
//! Positions are `x_j = -pi + 2 pi j / N`, momenta `p = -N/2 .. N/2 - 1`
//! (stored at index `k = p + N/2`). The transforms are
//!
//! ```text
//! psi(x) = sum_p exp(+i x p) psi(p)
//! psi(p) = (1/N) sum_x exp(-i x p) psi(x)
//! ```
//!
//! so a unit momentum-basis state has `(1/N) sum_x |psi(x)|^2 = 1`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{grid_index, validate_size, SimulationParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    Position,
    Momentum,
}

/// Complex amplitudes of a wavefunction in a declared basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub basis: Basis,
    pub amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(basis: Basis, amplitudes: Vec<Complex64>) -> Self {
        Self { basis, amplitudes }
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    /// Norm in the convention of the current basis: `sum_p |psi|^2` in
    /// momentum space, `(1/N) sum_x |psi|^2` in position space.
    pub fn norm_sqr(&self) -> f64 {
        let s: f64 = self.amplitudes.iter().map(|a| a.norm_sqr()).sum();
        match self.basis {
            Basis::Momentum => s,
            Basis::Position => s / self.len() as f64,
        }
    }

    fn expect(&self, basis: Basis) -> Result<()> {
        if self.basis != basis {
            return Err(Error::WrongBasis {
                expected: basis,
                found: self.basis,
            });
        }
        Ok(())
    }
}

/// Paired position and momentum grids plus cached FFT plans.
#[derive(Clone)]
pub struct Lattice {
    n: usize,
    positions: Vec<f64>,
    momenta: Vec<i64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch_len: usize,
    /// `(-1)^(N/2)`
    half_sign: f64,
}

impl fmt::Debug for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Lattice").field("n", &self.n).finish()
    }
}

pub fn build_lattice(params: &SimulationParams) -> Result<Lattice> {
    let lattice = Lattice::new(params.n)?;
    lattice.index_of(params.x0)?;
    Ok(lattice)
}

impl Lattice {
    pub fn new(n: usize) -> Result<Self> {
        validate_size(n)?;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        let half = (n / 2) as i64;
        Ok(Self {
            n,
            positions: (0..n)
                .map(|j| -PI + 2.0 * PI * j as f64 / n as f64)
                .collect(),
            momenta: (0..n as i64).map(|k| k - half).collect(),
            forward,
            inverse,
            scratch_len,
            half_sign: if half % 2 == 0 { 1.0 } else { -1.0 },
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn momenta(&self) -> &[i64] {
        &self.momenta
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn index_of(&self, x: f64) -> Result<usize> {
        grid_index(x, self.n)
    }

    /// Grid index of `-x_j` (the grid is closed under reflection mod 2pi).
    pub fn mirror_index(&self, j: usize) -> usize {
        (self.n - j) % self.n
    }

    /// Index `k` of momentum `p`, wrapping periodically.
    pub fn momentum_index(&self, p: i64) -> usize {
        (p + (self.n / 2) as i64).rem_euclid(self.n as i64) as usize
    }

    pub fn scratch(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); self.scratch_len]
    }

    pub fn to_position(&self, s: &StateVector) -> Result<StateVector> {
        s.expect(Basis::Momentum)?;
        self.check_len(s.len())?;
        let mut out = s.clone();
        self.momentum_to_position(&mut out.amplitudes, &mut self.scratch());
        out.basis = Basis::Position;
        Ok(out)
    }

    pub fn to_momentum(&self, s: &StateVector) -> Result<StateVector> {
        s.expect(Basis::Position)?;
        self.check_len(s.len())?;
        let mut out = s.clone();
        self.position_to_momentum(&mut out.amplitudes, &mut self.scratch());
        out.basis = Basis::Momentum;
        Ok(out)
    }

    /// Converts `s` into `basis` in place (no-op if already there).
    pub fn convert(&self, s: &mut StateVector, basis: Basis, scratch: &mut [Complex64]) {
        if s.basis == basis {
            return;
        }
        match basis {
            Basis::Position => self.momentum_to_position(&mut s.amplitudes, scratch),
            Basis::Momentum => self.position_to_momentum(&mut s.amplitudes, scratch),
        }
        s.basis = basis;
    }

    /// In-place `psi(p) -> psi(x)`. With `p = k - N/2` and `x_j = -pi + 2 pi j/N`,
    /// `exp(i x_j p) = (-1)^(N/2) (-1)^k (-1)^j exp(2 pi i j k / N)`.
    pub fn momentum_to_position(&self, amps: &mut [Complex64], scratch: &mut [Complex64]) {
        debug_assert_eq!(amps.len(), self.n);
        for a in amps.iter_mut().skip(1).step_by(2) {
            *a = -*a;
        }
        self.inverse.process_with_scratch(amps, scratch);
        let s = self.half_sign;
        for (j, a) in amps.iter_mut().enumerate() {
            *a *= if j % 2 == 0 { s } else { -s };
        }
    }

    /// In-place `psi(x) -> psi(p)`, the exact inverse of
    /// [`Lattice::momentum_to_position`].
    pub fn position_to_momentum(&self, amps: &mut [Complex64], scratch: &mut [Complex64]) {
        debug_assert_eq!(amps.len(), self.n);
        for a in amps.iter_mut().skip(1).step_by(2) {
            *a = -*a;
        }
        self.forward.process_with_scratch(amps, scratch);
        let s = self.half_sign / self.n as f64;
        for (k, a) in amps.iter_mut().enumerate() {
            *a *= if k % 2 == 0 { s } else { -s };
        }
    }

    /// Row `exp(i x_j p)` over all momenta, so that `psi(x_j) = row . psi(p)`.
    pub fn position_row(&self, j: usize) -> Vec<Complex64> {
        let x = self.positions[j];
        self.momenta
            .iter()
            .map(|&p| Complex64::from_polar(1.0, x * p as f64))
            .collect()
    }

    /// Normalized representative of `|x0>`: `psi(p) = exp(-i x0 p) / sqrt(N)`.
    pub fn position_state(&self, x0: f64) -> Result<StateVector> {
        let j = self.index_of(x0)?;
        Ok(self.position_state_at(j))
    }

    pub fn position_state_at(&self, j: usize) -> StateVector {
        let x0 = self.positions[j];
        let norm = 1.0 / (self.n as f64).sqrt();
        StateVector::new(
            Basis::Momentum,
            self.momenta
                .iter()
                .map(|&p| Complex64::from_polar(norm, -x0 * p as f64))
                .collect(),
        )
    }

    /// Momentum eigenstate `|p>`.
    pub fn momentum_state(&self, p: i64) -> StateVector {
        let mut amps = vec![Complex64::new(0.0, 0.0); self.n];
        amps[self.momentum_index(p)] = Complex64::new(1.0, 0.0);
        StateVector::new(Basis::Momentum, amps)
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::SizeMismatch {
                expected: self.n,
                found: len,
            });
        }
        Ok(())
    }
}
