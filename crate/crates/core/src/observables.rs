//! Disorder-averaged observables: densities, return amplitudes, spectral
//! functions, backgrounds and contrasts.
//!
//! The spectral function is stored rescaled, `a(x, w) = 2 pi A(x, w)` and
//! `nu(w) = 2 pi nu`, so that `int dw/2pi a(x, w) = 1` and the background
//! `n_B(x, x0) = int dw/2pi a(x, w) a(x0, w) / nu(w)` has unit grid mean.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensemble::{ensemble_average, sample_disorder, EnsembleSpec};
use crate::error::{Error, Result};
use crate::floquet::{DisorderRealization, FloquetKernel, FloquetVariant};
use crate::lattice::{Basis, Lattice, StateVector};
use crate::params::{grid_index, PhaseMode, SimulationParams};

/// Lower bound on `a` and `nu` below which the background is unreliable.
pub const POSITIVITY_FLOOR: f64 = 1e-3;

/// Validated parameters bundled with the lattice and variant they imply.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub params: SimulationParams,
    pub lattice: Lattice,
    pub variant: FloquetVariant,
    pub spec: EnsembleSpec,
    template: FloquetKernel,
}

impl Experiment {
    pub fn new(params: &SimulationParams) -> Result<Self> {
        params.validate()?;
        let lattice = Lattice::new(params.n)?;
        let variant = FloquetVariant::new(params.model)?;
        let template = FloquetKernel::new(
            &lattice,
            &variant,
            &DisorderRealization::zeros(params.n),
            params.kick_over_hbar(),
        )?;
        Ok(Self {
            params: params.clone(),
            lattice,
            variant,
            spec: EnsembleSpec::new(params.seed, params.n_realizations)
                .with_workers(params.workers),
            template,
        })
    }

    pub fn disorder(&self, index: usize) -> Result<DisorderRealization> {
        match self.params.phase_mode {
            PhaseMode::Random => sample_disorder(&self.spec, index, self.params.n),
            PhaseMode::Deterministic => {
                if index >= self.spec.n_realizations {
                    return Err(Error::RealizationIndex {
                        index,
                        count: self.spec.n_realizations,
                    });
                }
                Ok(DisorderRealization::kinetic(
                    &self.lattice,
                    self.params.hbar,
                ))
            }
        }
    }

    pub fn kernel(&self, index: usize) -> Result<FloquetKernel> {
        let mut k = self.template.clone();
        k.set_disorder(&self.disorder(index)?)?;
        Ok(k)
    }

    /// Rows `exp(i x_j p)` for `j` in `js`, or `None` when the step already
    /// ends in the position basis.
    fn rows(&self, js: impl Iterator<Item = usize>) -> Option<Vec<Vec<Complex64>>> {
        match self.template.output_basis() {
            Basis::Position => None,
            Basis::Momentum => Some(js.map(|j| self.lattice.position_row(j)).collect()),
        }
    }

    /// `|psi(x, t)|^2` on the grid at each of `times`, for one realization.
    pub fn densities(&self, index: usize, times: &[usize]) -> Result<Vec<Vec<f64>>> {
        let mut kernel = self.kernel(index)?;
        let mut s = self.lattice.position_state(self.params.x0)?;
        let mut now = 0;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            kernel.evolve(&mut s, t - now);
            now = t;
            kernel.convert(&mut s, Basis::Position);
            out.push(s.amplitudes.iter().map(|a| a.norm_sqr()).collect());
        }
        Ok(out)
    }

    /// `(1/N) <x_j| U^t |x_j>` for `t = 1..=t_max`, one realization. `row` is
    /// needed when the step ends in the momentum basis.
    fn return_values(
        &self,
        kernel: &mut FloquetKernel,
        j: usize,
        row: Option<&[Complex64]>,
        t_max: usize,
        out: &mut Vec<Complex64>,
    ) {
        let n = self.params.n;
        let scale = 1.0 / (n as f64).sqrt();
        // position-basis delta with (1/N) sum_x |psi|^2 = 1
        let mut amps = vec![Complex64::new(0.0, 0.0); n];
        amps[j] = Complex64::new((n as f64).sqrt(), 0.0);
        let mut s = StateVector::new(Basis::Position, amps);
        for _ in 0..t_max {
            kernel.step(&mut s);
            let psi = match (s.basis, row) {
                (Basis::Position, _) => s.amplitudes[j],
                (Basis::Momentum, Some(row)) => {
                    row.iter().zip(&s.amplitudes).map(|(r, a)| r * a).sum()
                }
                (Basis::Momentum, None) => {
                    kernel.convert(&mut s, Basis::Position);
                    s.amplitudes[j]
                }
            };
            out.push(psi * scale);
        }
    }
}

/// Disorder-averaged density on the position grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub x: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Propagation time, or `None` for time-independent profiles.
    pub t: Option<usize>,
    pub x0: f64,
}

impl DensityProfile {
    /// Grid mean `(1/N) sum_x n(x)`.
    pub fn normalization(&self) -> f64 {
        self.mean.iter().sum::<f64>() / self.mean.len() as f64
    }

    pub fn index_of(&self, x: f64) -> Result<usize> {
        grid_index(x, self.x.len())
    }

    /// Value and error at a grid position.
    pub fn at(&self, x: f64) -> Result<(f64, f64)> {
        let j = self.index_of(x)?;
        Ok((self.mean[j], self.stderr[j]))
    }
}

/// Flat unit background on the grid of `lattice`.
pub fn flat_background(lattice: &Lattice, x0: f64) -> Result<DensityProfile> {
    lattice.index_of(x0)?;
    let n = lattice.len();
    Ok(DensityProfile {
        x: lattice.positions().to_vec(),
        mean: vec![1.0; n],
        stderr: vec![0.0; n],
        t: None,
        x0,
    })
}

/// Density profiles at every time in `times` from one ensemble pass.
pub fn density_series(params: &SimulationParams, times: &[usize]) -> Result<Vec<DensityProfile>> {
    let exp = Experiment::new(params)?;
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("times", "must be strictly increasing"));
    }
    if times.is_empty() {
        return Ok(Vec::new());
    }
    let n = params.n;
    let stats = ensemble_average(&exp.spec, |i| Ok(exp.densities(i, times)?.concat()))?;
    Ok(times
        .iter()
        .enumerate()
        .map(|(k, &t)| DensityProfile {
            x: exp.lattice.positions().to_vec(),
            mean: stats.mean[k * n..(k + 1) * n].to_vec(),
            stderr: stats.stderr[k * n..(k + 1) * n].to_vec(),
            t: Some(t),
            x0: params.x0,
        })
        .collect())
}

pub fn density_profile(params: &SimulationParams, t: usize) -> Result<DensityProfile> {
    Ok(density_series(params, &[t])?.remove(0))
}

/// `r(x, t) = (1/N) <x| avg(U^t) |x>` for `t = 0..=t_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnAmplitudeSeries {
    pub x: f64,
    /// Index `t`; entry 0 is exactly 1.
    pub mean: Vec<Complex64>,
    pub stderr: Vec<f64>,
}

impl ReturnAmplitudeSeries {
    pub fn t_max(&self) -> usize {
        self.mean.len() - 1
    }

    /// Ballistic density `|r(x, t)|^2`.
    pub fn ballistic(&self) -> Vec<f64> {
        self.mean.iter().map(|r| r.norm_sqr()).collect()
    }

    /// Copy truncated to `t <= t_max`.
    pub fn truncated(&self, t_max: usize) -> Self {
        let k = (t_max + 1).min(self.mean.len());
        Self {
            x: self.x,
            mean: self.mean[..k].to_vec(),
            stderr: self.stderr[..k].to_vec(),
        }
    }
}

fn check_t_max(t_max: usize) -> Result<()> {
    if t_max == 0 {
        return Err(Error::param("t_max", "must be >= 1"));
    }
    Ok(())
}

fn with_initial(x: f64, mean: &[Complex64], stderr: &[f64]) -> ReturnAmplitudeSeries {
    let mut m = vec![Complex64::new(1.0, 0.0)];
    m.extend_from_slice(mean);
    let mut e = vec![0.0];
    e.extend_from_slice(stderr);
    ReturnAmplitudeSeries {
        x,
        mean: m,
        stderr: e,
    }
}

pub fn return_amplitude(
    params: &SimulationParams,
    x: f64,
    t_max: usize,
) -> Result<ReturnAmplitudeSeries> {
    check_t_max(t_max)?;
    let exp = Experiment::new(params)?;
    let j = exp.lattice.index_of(x)?;
    let rows = exp.rows(std::iter::once(j));
    let stats = ensemble_average(&exp.spec, |i| {
        let mut kernel = exp.kernel(i)?;
        let mut out = Vec::with_capacity(t_max);
        exp.return_values(
            &mut kernel,
            j,
            rows.as_ref().map(|r| &r[0][..]),
            t_max,
            &mut out,
        );
        Ok(out)
    })?;
    Ok(with_initial(
        exp.lattice.positions()[j],
        &stats.mean,
        &stats.stderr,
    ))
}

/// Return amplitudes at every grid point, sharing one kernel per realization.
pub fn return_amplitude_all(
    params: &SimulationParams,
    t_max: usize,
) -> Result<Vec<ReturnAmplitudeSeries>> {
    check_t_max(t_max)?;
    let exp = Experiment::new(params)?;
    let n = params.n;
    let rows = exp.rows(0..n);
    let stats = ensemble_average(&exp.spec, |i| {
        let mut kernel = exp.kernel(i)?;
        let mut out = Vec::with_capacity(n * t_max);
        for j in 0..n {
            exp.return_values(
                &mut kernel,
                j,
                rows.as_ref().map(|r| &r[j][..]),
                t_max,
                &mut out,
            );
        }
        Ok(out)
    })?;
    Ok((0..n)
        .map(|j| {
            let r = j * t_max..(j + 1) * t_max;
            with_initial(
                exp.lattice.positions()[j],
                &stats.mean[r.clone()],
                &stats.stderr[r],
            )
        })
        .collect())
}

/// Rescaled spectral function on a uniform quasi-energy grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralTable {
    /// `w_k = -pi + 2 pi k / n_omega`.
    pub omega: Vec<f64>,
    pub x: Vec<f64>,
    /// `a[j][k] = a(x_j, w_k)`.
    pub a: Vec<Vec<f64>>,
    /// `nu[k] = (1/N) sum_j a[j][k]`.
    pub nu: Vec<f64>,
    pub t_max: usize,
    /// Largest imaginary residue of the Fourier sum.
    pub max_imag: f64,
    /// Number of `(x, w)` entries with `a < POSITIVITY_FLOOR`.
    pub floor_violations: usize,
}

impl SpectralTable {
    pub fn min_nu(&self) -> f64 {
        self.nu.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `int dw/2pi a(x_j, w)` by the trapezoid rule.
    pub fn weight(&self, j: usize) -> f64 {
        self.a[j].iter().sum::<f64>() / self.omega.len() as f64
    }
}

pub fn omega_grid(n_omega: usize) -> Vec<f64> {
    (0..n_omega)
        .map(|k| -PI + 2.0 * PI * k as f64 / n_omega as f64)
        .collect()
}

/// `a(x, w) = sum_{|t| <= t_max} exp(i w t) r(x, t)` with `r(x, -t) = r(x, t)*`.
pub fn spectral_function(
    series: &[ReturnAmplitudeSeries],
    n_omega: usize,
) -> Result<SpectralTable> {
    let first = series
        .first()
        .ok_or_else(|| Error::param("series", "must cover the position grid"))?;
    let t_max = first.t_max();
    check_t_max(t_max)?;
    if let Some(s) = series.iter().find(|s| s.t_max() != t_max) {
        return Err(Error::SizeMismatch {
            expected: t_max + 1,
            found: s.mean.len(),
        });
    }
    if n_omega < 4 * t_max {
        return Err(Error::param(
            "n_omega",
            format!("{n_omega} < 4 * t_max = {}", 4 * t_max),
        ));
    }
    let omega = omega_grid(n_omega);
    let phases: Vec<Vec<Complex64>> = omega
        .iter()
        .map(|&w| {
            (0..=t_max)
                .map(|t| Complex64::from_polar(1.0, w * t as f64))
                .collect()
        })
        .collect();
    let mut max_imag = 0.0f64;
    let mut floor_violations = 0;
    let a: Vec<Vec<f64>> = series
        .iter()
        .map(|s| {
            phases
                .iter()
                .map(|ph| {
                    let mut z = s.mean[0];
                    for (p, r) in ph[1..=t_max].iter().zip(&s.mean[1..=t_max]) {
                        z += p * r + p.conj() * r.conj();
                    }
                    max_imag = max_imag.max(z.im.abs());
                    if z.re < POSITIVITY_FLOOR {
                        floor_violations += 1;
                    }
                    z.re
                })
                .collect()
        })
        .collect();
    let n = series.len() as f64;
    let nu = (0..n_omega)
        .map(|k| a.iter().map(|row| row[k]).sum::<f64>() / n)
        .collect();
    Ok(SpectralTable {
        omega,
        x: series.iter().map(|s| s.x).collect(),
        a,
        nu,
        t_max,
        max_imag,
        floor_violations,
    })
}

/// `n_B(x, x0) = (1/n_omega) sum_k a(x, w_k) a(x0, w_k) / nu(w_k)`.
pub fn numeric_background(table: &SpectralTable, x0: f64) -> Result<DensityProfile> {
    let min = table.min_nu();
    if min.is_nan() || min <= POSITIVITY_FLOOR {
        return Err(Error::DensityOfStatesFloor {
            min,
            floor: POSITIVITY_FLOOR,
        });
    }
    let j0 = grid_index(x0, table.x.len())?;
    let m = table.omega.len() as f64;
    let weights: Vec<f64> = table.a[j0]
        .iter()
        .zip(&table.nu)
        .map(|(a0, nu)| a0 / nu)
        .collect();
    let mean = table
        .a
        .iter()
        .map(|row| row.iter().zip(&weights).map(|(a, w)| a * w).sum::<f64>() / m)
        .collect();
    Ok(DensityProfile {
        x: table.x.clone(),
        mean,
        stderr: vec![0.0; table.x.len()],
        t: None,
        x0,
    })
}

/// `C(x) = n(x) / n_B(x) - 1` with the CBS and CFS values picked out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastProfile {
    pub x: Vec<f64>,
    pub c: Vec<f64>,
    pub stderr: Vec<f64>,
    pub t: Option<usize>,
    pub x0: f64,
    /// `C(-x0)` and its error.
    pub cbs: (f64, f64),
    /// `C(x0)` and its error.
    pub cfs: (f64, f64),
    /// `(1/N) sum_x n_B(x) C(x)`, zero for a normalized interference part.
    pub interference_mean: f64,
}

pub fn contrast(n: &DensityProfile, background: &DensityProfile) -> Result<ContrastProfile> {
    if n.mean.len() != background.mean.len() {
        return Err(Error::SizeMismatch {
            expected: n.mean.len(),
            found: background.mean.len(),
        });
    }
    if (n.x0 - background.x0).abs() > 1e-12 {
        return Err(Error::param(
            "x0",
            "density and background use different x0",
        ));
    }
    if let Some(b) = background.mean.iter().find(|b| b.is_nan() || **b <= 0.0) {
        return Err(Error::Numerical(format!(
            "background value {b} is not positive"
        )));
    }
    let c: Vec<f64> = n
        .mean
        .iter()
        .zip(&background.mean)
        .map(|(v, b)| v / b - 1.0)
        .collect();
    let stderr: Vec<f64> = n
        .stderr
        .iter()
        .zip(&background.stderr)
        .zip(n.mean.iter().zip(&background.mean))
        .map(|((en, eb), (v, b))| ((en / b).powi(2) + (v * eb / (b * b)).powi(2)).sqrt())
        .collect();
    let j0 = n.index_of(n.x0)?;
    let jm = (n.mean.len() - j0) % n.mean.len();
    let interference_mean = n
        .mean
        .iter()
        .zip(&background.mean)
        .map(|(v, b)| v - b)
        .sum::<f64>()
        / n.mean.len() as f64;
    Ok(ContrastProfile {
        cbs: (c[jm], stderr[jm]),
        cfs: (c[j0], stderr[j0]),
        x: n.x.clone(),
        c,
        stderr,
        t: n.t,
        x0: n.x0,
        interference_mean,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastPoint {
    pub t: usize,
    pub cbs: f64,
    pub cbs_err: f64,
    pub cfs: f64,
    pub cfs_err: f64,
    /// Set at `t = 0`, where the density is still the initial delta peak.
    pub pre_scattering: bool,
}

/// CBS and CFS contrasts at every time in `params.times`.
pub fn cbs_cfs_timeseries(
    params: &SimulationParams,
    background: &DensityProfile,
) -> Result<Vec<ContrastPoint>> {
    density_series(params, &params.times)?
        .iter()
        .map(|n| {
            let c = contrast(n, background)?;
            let t = n.t.unwrap_or(0);
            Ok(ContrastPoint {
                t,
                cbs: c.cbs.0,
                cbs_err: c.cbs.1,
                cfs: c.cfs.0,
                cfs_err: c.cfs.1,
                pre_scattering: t == 0,
            })
        })
        .collect()
}

/// Exponential fit `|r(t)| ~ exp(-t / tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub tau: f64,
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

impl DecayFit {
    /// True when the decay is too slow for a spectral sum truncated at `t_max`.
    pub fn exceeds_truncation(&self, t_max: usize) -> bool {
        self.tau > t_max as f64 / 3.0
    }
}

/// Least-squares fit of `ln |r(t)|` over the leading run of `t >= 1` points
/// with `|r| > 5 stderr`.
pub fn fit_decay(series: &ReturnAmplitudeSeries) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = series
        .mean
        .iter()
        .zip(&series.stderr)
        .enumerate()
        .skip(1)
        .take_while(|(_, (r, e))| r.norm() > 5.0 * **e && r.norm() > f64::MIN_POSITIVE)
        .map(|(t, (r, _))| (t as f64, r.norm().ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData {
            found: pts.len(),
            needed: 3,
        });
    }
    let k = pts.len() as f64;
    let (mt, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (t, y)| (a + t / k, b + y / k));
    let sxy: f64 = pts.iter().map(|(t, y)| (t - mt) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| (t - mt).powi(2)).sum();
    let slope = sxy / sxx;
    if slope.is_nan() || slope >= 0.0 {
        return Err(Error::Numerical(format!(
            "|r(t)| does not decay (slope {slope:.3e})"
        )));
    }
    Ok(DecayFit {
        tau: -1.0 / slope,
        slope,
        intercept: my - slope * mt,
        points: pts.len(),
    })
}
