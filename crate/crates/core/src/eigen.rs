//! Exact diagonalization of dense Floquet matrices and eigenvector statistics.
//!
//! Eigenvalues are written `exp(-i w)` with `w` in `[-pi, pi)`. Eigenvectors
//! are stored in the momentum basis with unit norm; in position space they
//! obey `(1/N) sum_x |phi(x)|^2 = 1`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensemble::ensemble_average;
use crate::error::{Error, Result};
use crate::floquet::{
    build_dense, build_dense_kick, DisorderRealization, FloquetVariant, UnitaryMatrix, DENSE_CAP,
};
use crate::lattice::{Basis, Lattice};
use crate::observables::{DensityProfile, Experiment};
use crate::params::{grid_index, Model, SimulationParams};

/// Eigenphase gap below which two states count as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-10;
/// Tolerance on `|lambda| - 1` and on `|U phi - lambda phi|`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct FloquetSpectrum {
    /// Sorted eigenphases.
    pub omega: Vec<f64>,
    pub eigenvalues: Vec<Complex64>,
    /// Unit-norm momentum-basis eigenvectors, in the order of `omega`.
    pub vectors: Vec<Vec<Complex64>>,
    pub residuals: Vec<f64>,
}

impl FloquetSpectrum {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// True if eigenphase `n` is separated from its neighbours on the circle
    /// by more than [`DEGENERACY_GAP`].
    pub fn is_nondegenerate(&self, n: usize) -> bool {
        let m = self.len();
        if m < 2 {
            return true;
        }
        let gap = |a: f64, b: f64| {
            let d = (a - b).rem_euclid(2.0 * PI);
            d.min(2.0 * PI - d)
        };
        gap(self.omega[n], self.omega[(n + 1) % m]) > DEGENERACY_GAP
            && gap(self.omega[n], self.omega[(n + m - 1) % m]) > DEGENERACY_GAP
    }

    /// `sum_n exp(-i w_n)`.
    pub fn trace(&self) -> Complex64 {
        self.omega
            .iter()
            .map(|w| Complex64::from_polar(1.0, -w))
            .sum()
    }

    /// Eigenvectors as position amplitudes `phi_n(x_j)`.
    pub fn position_vectors(&self, lattice: &Lattice) -> Result<Vec<Vec<Complex64>>> {
        lattice.check_len(self.len())?;
        let mut scratch = lattice.scratch();
        Ok(self
            .vectors
            .iter()
            .map(|v| {
                let mut a = v.clone();
                lattice.momentum_to_position(&mut a, &mut scratch);
                a
            })
            .collect())
    }
}

pub fn diagonalize(u: &UnitaryMatrix) -> Result<FloquetSpectrum> {
    let n = u.n();
    if n > DENSE_CAP {
        return Err(Error::DenseCap { n, cap: DENSE_CAP });
    }
    let evd =
        u.0.eigen()
            .map_err(|e| Error::Numerical(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let vecs = evd.U();
    let mut states: Vec<(f64, Complex64, Vec<Complex64>)> = (0..n)
        .map(|k| {
            let lambda = s[k];
            let mut v: Vec<Complex64> = (0..n).map(|r| vecs[(r, k)]).collect();
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v.iter_mut().for_each(|z| *z /= norm);
            // arg is in (-pi, pi], so -arg is in [-pi, pi)
            (-lambda.arg(), lambda, v)
        })
        .collect();
    states.sort_by(|a, b| a.0.total_cmp(&b.0));
    let v = faer::Mat::<Complex64>::from_fn(n, n, |r, c| states[c].2[r]);
    let uv = &u.0 * &v;
    let mut residuals = Vec::with_capacity(n);
    for (k, (_, lambda, vec)) in states.iter().enumerate() {
        let res = (0..n)
            .map(|r| (uv[(r, k)] - lambda * vec[r]).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let modulus = (lambda.norm() - 1.0).abs();
        if res > RESIDUAL_TOLERANCE || modulus > RESIDUAL_TOLERANCE {
            return Err(Error::Numerical(format!(
                "eigenpair {k}: residual {res:.2e}, | |lambda| - 1 | = {modulus:.2e}"
            )));
        }
        residuals.push(res);
    }
    let mut out = FloquetSpectrum {
        omega: Vec::with_capacity(n),
        eigenvalues: Vec::with_capacity(n),
        vectors: Vec::with_capacity(n),
        residuals,
    };
    for (w, l, v) in states {
        out.omega.push(w);
        out.eigenvalues.push(l);
        out.vectors.push(v);
    }
    Ok(out)
}

/// Unconjugated self-overlap `phi^T phi`.
pub fn self_overlap(v: &[Complex64]) -> Complex64 {
    v.iter().map(|z| z * z).sum()
}

/// Multiplies `v` by the global phase that makes `phi^T phi` real and
/// non-negative. For a nondegenerate eigenvector of a complex-symmetric
/// unitary the result is real up to rounding.
pub fn gauge_fix(v: &[Complex64]) -> Vec<Complex64> {
    let s = self_overlap(v);
    let phase = Complex64::from_polar(1.0, -s.arg() / 2.0);
    v.iter().map(|z| z * phase).collect()
}

/// Sample moments of eigenvector amplitudes over (realization, state) pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenvectorMoments {
    pub x: Vec<f64>,
    /// `E |phi(x)|^2`
    pub abs2: Vec<f64>,
    /// `E |phi(x)|^4`
    pub abs4: Vec<f64>,
    pub abs4_err: Vec<f64>,
    /// `E R^2`, `E R^4` for `R = Re phi(x)` in the gauge of [`gauge_fix`].
    pub re2: Vec<f64>,
    pub re4: Vec<f64>,
    pub samples: usize,
}

impl EigenvectorMoments {
    /// Moments of a set of position-space vectors treated as one realization.
    pub fn from_vectors(x: &[f64], vectors: &[Vec<Complex64>]) -> Self {
        let n = x.len();
        let m = vectors.len() as f64;
        let mut acc = vec![0.0; 4 * n];
        for v in vectors {
            let g = gauge_fix(v);
            for j in 0..n {
                let a2 = v[j].norm_sqr();
                let r2 = g[j].re * g[j].re;
                acc[j] += a2 / m;
                acc[n + j] += a2 * a2 / m;
                acc[2 * n + j] += r2 / m;
                acc[3 * n + j] += r2 * r2 / m;
            }
        }
        Self::from_flat(x, &acc, &vec![0.0; 4 * n], vectors.len())
    }

    fn from_flat(x: &[f64], mean: &[f64], err: &[f64], samples: usize) -> Self {
        let n = x.len();
        Self {
            x: x.to_vec(),
            abs2: mean[..n].to_vec(),
            abs4: mean[n..2 * n].to_vec(),
            abs4_err: err[n..2 * n].to_vec(),
            re2: mean[2 * n..3 * n].to_vec(),
            re4: mean[3 * n..].to_vec(),
            samples,
        }
    }

    fn flat(&self) -> Vec<f64> {
        [&self.abs2[..], &self.abs4, &self.re2, &self.re4].concat()
    }

    /// Largest violation of `E|phi|^4 >= (E|phi|^2)^2` and `E R^4 >= (E R^2)^2`
    /// (zero or negative when Jensen holds everywhere).
    pub fn jensen_violation(&self) -> f64 {
        let a = self
            .abs2
            .iter()
            .zip(&self.abs4)
            .map(|(m2, m4)| m2 * m2 - m4);
        let r = self.re2.iter().zip(&self.re4).map(|(m2, m4)| m2 * m2 - m4);
        a.chain(r).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// CFS contrast estimated from eigenvector moments at `x0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfsEstimate {
    /// `E|phi|^4 / (E|phi|^2)^2 / n_B(x0) - 1`.
    pub full: f64,
    pub full_err: f64,
    /// `Gamma = E R^4 / (E R^2)^2`.
    pub gamma: f64,
    /// `(Gamma - 1) / 2`.
    pub kurtosis: f64,
}

pub fn cfs_contrast_from_eigenvectors(
    moments: &EigenvectorMoments,
    x0: f64,
    background_x0: f64,
) -> Result<CfsEstimate> {
    let j = grid_index(x0, moments.x.len())?;
    let (m2, m4, r2, r4) = (
        moments.abs2[j],
        moments.abs4[j],
        moments.re2[j],
        moments.re4[j],
    );
    if !(m2 > 0.0 && r2 > 0.0) {
        return Err(Error::Numerical(format!(
            "vanishing second moment at x0 = {x0}"
        )));
    }
    if background_x0.is_nan() || background_x0 <= 0.0 {
        return Err(Error::Numerical(format!(
            "background {background_x0} is not positive"
        )));
    }
    let gamma = r4 / (r2 * r2);
    Ok(CfsEstimate {
        full: m4 / (m2 * m2 * background_x0) - 1.0,
        full_err: moments.abs4_err[j] / (m2 * m2 * background_x0),
        gamma,
        kurtosis: (gamma - 1.0) / 2.0,
    })
}

/// Steady-state density and eigenvector moments from one ensemble pass.
#[derive(Debug, Clone)]
pub struct EigenEnsemble {
    /// `n_S(x) = (1/N) sum_n |phi_n(x)|^2 |phi_n(x0)|^2`, averaged.
    pub steady_state: DensityProfile,
    pub moments: EigenvectorMoments,
}

/// Diagonalizes `params.n_realizations` matrices.
pub fn eigen_ensemble(params: &SimulationParams) -> Result<EigenEnsemble> {
    let exp = Experiment::new(params)?;
    let n = params.n;
    if n > DENSE_CAP {
        return Err(Error::DenseCap { n, cap: DENSE_CAP });
    }
    if n * params.n_realizations < 100 {
        return Err(Error::InsufficientData {
            found: n * params.n_realizations,
            needed: 100,
        });
    }
    let j0 = exp.lattice.index_of(params.x0)?;
    let x = exp.lattice.positions().to_vec();
    let stats = ensemble_average(&exp.spec, |i| {
        let dis = exp.disorder(i)?;
        let u = build_dense(&exp.lattice, &exp.variant, &dis, params.kick_over_hbar())?;
        let phi = diagonalize(&u)?.position_vectors(&exp.lattice)?;
        let mut ns = vec![0.0; n];
        for v in &phi {
            let w = v[j0].norm_sqr() / n as f64;
            for (s, a) in ns.iter_mut().zip(v) {
                *s += a.norm_sqr() * w;
            }
        }
        let mut out = ns;
        out.extend(EigenvectorMoments::from_vectors(&x, &phi).flat());
        Ok(out)
    })?;
    Ok(EigenEnsemble {
        steady_state: DensityProfile {
            x: x.clone(),
            mean: stats.mean[..n].to_vec(),
            stderr: stats.stderr[..n].to_vec(),
            t: None,
            x0: params.x0,
        },
        moments: EigenvectorMoments::from_flat(
            &x,
            &stats.mean[n..],
            &stats.stderr[n..],
            n * params.n_realizations,
        ),
    })
}

pub fn steady_state_density(params: &SimulationParams) -> Result<DensityProfile> {
    Ok(eigen_ensemble(params)?.steady_state)
}

/// Fitted localization length for one kick strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationPoint {
    pub kick: f64,
    /// `K^2 / (4 hbar^2)`.
    pub predicted: f64,
    /// Fitted `xi` from `n(p) ~ exp(-2 |p| / xi)`; `None` when delocalized.
    pub xi: Option<f64>,
    pub ratio: Option<f64>,
    /// Momenta `|p|` used by the fit.
    pub window: Option<(usize, usize)>,
    pub delocalized: bool,
}

/// Time-averaged, disorder-averaged momentum density from `|p = 0>`.
///
/// The average runs over `samples` evenly spaced times in `(t/2, t]`.
pub fn momentum_density(params: &SimulationParams, t: usize, samples: usize) -> Result<Vec<f64>> {
    let exp = Experiment::new(params)?;
    if t < 2 || samples == 0 {
        return Err(Error::param("t", "need t >= 2 and at least one sample"));
    }
    let start = t / 2;
    let stride = ((t - start) / samples).max(1);
    let stats = ensemble_average(&exp.spec, |i| {
        let mut kernel = exp.kernel(i)?;
        let mut s = exp.lattice.momentum_state(0);
        kernel.evolve(&mut s, start);
        let mut acc = vec![0.0; params.n];
        let mut count = 0;
        let mut now = start;
        while now + stride <= t {
            kernel.evolve(&mut s, stride);
            now += stride;
            kernel.convert(&mut s, Basis::Momentum);
            for (a, z) in acc.iter_mut().zip(&s.amplitudes) {
                *a += z.norm_sqr();
            }
            count += 1;
        }
        acc.iter_mut().for_each(|a| *a /= count as f64);
        Ok(acc)
    })?;
    Ok(stats.mean)
}

/// Fits `ln n(|p|)` linearly over the tail where the symmetrized density lies
/// between `e^-2` and `e^-10` of its peak.
pub fn fit_localization_length(
    lattice: &Lattice,
    density: &[f64],
) -> Result<(f64, (usize, usize))> {
    lattice.check_len(density.len())?;
    let half = lattice.len() / 2;
    let f: Vec<f64> = (0..half)
        .map(|p| {
            let p = p as i64;
            0.5 * (density[lattice.momentum_index(p)] + density[lattice.momentum_index(-p)])
        })
        .collect();
    let peak = f.iter().copied().fold(0.0, f64::max);
    let (hi_level, lo_level) = (peak * (-2.0f64).exp(), peak * (-10.0f64).exp());
    let limit = half * 4 / 5;
    let lo = f
        .iter()
        .position(|v| *v < hi_level)
        .ok_or(Error::InsufficientData {
            found: 0,
            needed: 3,
        })?;
    let hi = (lo..limit)
        .take_while(|&p| f[p] > lo_level)
        .last()
        .unwrap_or(lo);
    let pts: Vec<(f64, f64)> = (lo..=hi)
        .filter(|&p| f[p] > 0.0)
        .map(|p| (p as f64, f[p].ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData {
            found: pts.len(),
            needed: 3,
        });
    }
    let k = pts.len() as f64;
    let (mp, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (p, y)| (a + p / k, b + y / k));
    let sxy: f64 = pts.iter().map(|(p, y)| (p - mp) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(p, _)| (p - mp).powi(2)).sum();
    let slope = sxy / sxx;
    if slope.is_nan() || slope >= 0.0 {
        return Err(Error::Numerical(format!(
            "momentum profile does not decay (slope {slope:.3e})"
        )));
    }
    Ok((-2.0 / slope, (lo, hi)))
}

/// Fitted localization length for each kick in `kicks`, with everything
/// else taken from `base`. Kicks whose predicted or fitted `xi` reaches
/// `N/4` are flagged as delocalized.
pub fn localization_scaling(
    base: &SimulationParams,
    kicks: &[f64],
    t: usize,
    samples: usize,
) -> Result<Vec<LocalizationPoint>> {
    let lattice = Lattice::new(base.n)?;
    let guard = base.n as f64 / 4.0;
    kicks
        .iter()
        .map(|&kick| {
            let params = SimulationParams {
                kick,
                ..base.clone()
            };
            let predicted = params.predicted_localization_length();
            let flagged = LocalizationPoint {
                kick,
                predicted,
                xi: None,
                ratio: None,
                window: None,
                delocalized: true,
            };
            if predicted >= guard {
                return Ok(flagged);
            }
            let density = momentum_density(&params, t, samples)?;
            let (xi, window) = fit_localization_length(&lattice, &density)?;
            if xi >= guard {
                return Ok(flagged);
            }
            Ok(LocalizationPoint {
                kick,
                predicted,
                xi: Some(xi),
                ratio: Some(xi / predicted),
                window: Some(window),
                delocalized: false,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryCheck {
    pub name: String,
    pub max_deviation: f64,
    pub threshold: f64,
    /// Whether the relation is expected to hold for this variant.
    pub expected: bool,
    pub passed: bool,
    /// States excluded as degenerate.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub model: Model,
    pub n: usize,
    pub checks: Vec<SymmetryCheck>,
}

impl SymmetryReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&SymmetryCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(
        &mut self,
        name: &str,
        max_deviation: f64,
        threshold: f64,
        expected: bool,
        skipped: usize,
    ) {
        let holds = max_deviation <= threshold;
        self.checks.push(SymmetryCheck {
            name: name.to_string(),
            max_deviation,
            threshold,
            expected,
            passed: holds == expected,
            skipped,
        });
    }
}

const ALGEBRAIC: f64 = 1e-8;
const PER_VECTOR: f64 = 1e-6;

/// Largest distance from any eigenvalue of `a` to the nearest one of `b`,
/// symmetrized.
pub fn spectrum_distance(a: &FloquetSpectrum, b: &FloquetSpectrum) -> f64 {
    let one_way = |u: &[Complex64], v: &[Complex64]| {
        u.iter()
            .map(|x| {
                v.iter()
                    .map(|y| (x - y).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    one_way(&a.eigenvalues, &b.eigenvalues).max(one_way(&b.eigenvalues, &a.eigenvalues))
}

/// Max over nondegenerate states of `| |phi(-x)|^2 - |phi(x)|^2 |`.
fn parity_deviation(
    spec: &FloquetSpectrum,
    phi: &[Vec<Complex64>],
    lattice: &Lattice,
) -> (f64, usize) {
    let mut dev = 0.0f64;
    let mut skipped = 0;
    for (k, v) in phi.iter().enumerate() {
        if !spec.is_nondegenerate(k) {
            skipped += 1;
            continue;
        }
        for j in 0..v.len() {
            dev = dev.max((v[lattice.mirror_index(j)].norm_sqr() - v[j].norm_sqr()).abs());
        }
    }
    (dev, skipped)
}

/// Circular variance of `arg[phi*(-x) exp(i sign a cos x) / phi(x)]` over
/// points with `|phi(x)| > 1e-4`, maximized over nondegenerate states.
pub fn phase_relation_deviation(
    spec: &FloquetSpectrum,
    phi: &[Vec<Complex64>],
    lattice: &Lattice,
    signed_kick: f64,
) -> (f64, usize) {
    let mut dev = 0.0f64;
    let mut skipped = 0;
    for (k, v) in phi.iter().enumerate() {
        if !spec.is_nondegenerate(k) {
            skipped += 1;
            continue;
        }
        let ratios: Vec<Complex64> = (0..v.len())
            .filter(|&j| v[j].norm() > 1e-4)
            .map(|j| {
                let x = lattice.positions()[j];
                let z = v[lattice.mirror_index(j)].conj()
                    * Complex64::from_polar(1.0, signed_kick * x.cos())
                    / v[j];
                z / z.norm()
            })
            .collect();
        if ratios.is_empty() {
            continue;
        }
        let mean: Complex64 = ratios.iter().sum::<Complex64>() / ratios.len() as f64;
        let var = ratios
            .iter()
            .map(|z| {
                let d = (z / mean).arg();
                d * d
            })
            .sum::<f64>()
            / ratios.len() as f64;
        dev = dev.max(var);
    }
    (dev, skipped)
}

/// Symmetry checks for one disorder realization of `params.model`.
///
/// Matrix symmetry is expected exactly for the PT-symmetric variants; the
/// U0-specific Theta identity and eigenfunction phase relation are only run
/// for `U0`. The isospectrality check compares `U0`, `U_{1/2}`, `V_{1/2}`.
pub fn symmetry_report(
    params: &SimulationParams,
    disorder: &DisorderRealization,
) -> Result<SymmetryReport> {
    let exp = Experiment::new(params)?;
    let l = &exp.lattice;
    let a = params.kick_over_hbar();
    let u = build_dense(l, &exp.variant, disorder, a)?;
    let spec = diagonalize(&u)?;
    let phi = spec.position_vectors(l)?;
    let mut report = SymmetryReport {
        model: params.model,
        n: params.n,
        checks: Vec::new(),
    };
    let pt = exp.variant.is_pt_symmetric();

    report.push("unitarity", u.unitarity_defect(), ALGEBRAIC, true, 0);
    report.push(
        "trace",
        (spec.trace() - u.trace()).norm(),
        ALGEBRAIC,
        true,
        0,
    );
    report.push("matrix_symmetry", u.max_asymmetry(), ALGEBRAIC, pt, 0);

    let spectra: Vec<FloquetSpectrum> = [Model::U0, Model::U_HALF, Model::V_HALF]
        .iter()
        .map(|m| diagonalize(&build_dense(l, &FloquetVariant::new(*m)?, disorder, a)?))
        .collect::<Result<_>>()?;
    let iso = spectra
        .iter()
        .map(|s| spectrum_distance(&spectra[0], s))
        .fold(0.0, f64::max);
    report.push("isospectral", iso, ALGEBRAIC, true, 0);

    let symmetric_class = matches!(params.model, Model::U0) || pt;
    if symmetric_class {
        let (dev, skipped) = parity_deviation(&spec, &phi, l);
        report.push("eigen_parity", dev, PER_VECTOR, true, skipped);
    }
    if pt {
        let (mut dev, mut skipped) = (0.0f64, 0);
        for (k, v) in spec.vectors.iter().enumerate() {
            if spec.is_nondegenerate(k) {
                dev = dev.max((self_overlap(v).norm() - 1.0).abs());
            } else {
                skipped += 1;
            }
        }
        report.push("self_overlap", dev, PER_VECTOR, true, skipped);
    }
    if matches!(params.model, Model::U0) {
        let ux = build_dense_kick(l, 1.0, a)?;
        let lhs = &(&ux * &u.conjugate()) * &ux.adjoint();
        report.push(
            "theta_identity",
            lhs.max_diff(&u.adjoint()),
            ALGEBRAIC,
            true,
            0,
        );
        let (dev, skipped) = phase_relation_deviation(&spec, &phi, l, a);
        report.push("u0_phase_relation", dev, PER_VECTOR, true, skipped);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{sample_disorder, EnsembleSpec};
    use crate::floquet::FloquetVariant;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(n: usize, model: Model) -> SimulationParams {
        SimulationParams {
            n,
            model,
            n_realizations: 4,
            seed: 11,
            ..SimulationParams::default()
        }
    }

    fn realization(n: usize, index: usize) -> DisorderRealization {
        sample_disorder(&EnsembleSpec::new(11, 10), index, n).unwrap()
    }

    fn spectrum(n: usize, model: Model, index: usize) -> (Lattice, FloquetSpectrum, UnitaryMatrix) {
        let l = Lattice::new(n).unwrap();
        let u = build_dense(
            &l,
            &FloquetVariant::new(model).unwrap(),
            &realization(n, index),
            20.0 / 2.89,
        )
        .unwrap();
        let s = diagonalize(&u).unwrap();
        (l, s, u)
    }

    #[test]
    fn zero_kick_is_diagonal() {
        let n = 16;
        let l = Lattice::new(n).unwrap();
        let dis = realization(n, 0);
        let u = build_dense(&l, &FloquetVariant::new(Model::U0).unwrap(), &dis, 0.0).unwrap();
        let s = diagonalize(&u).unwrap();
        let mut want: Vec<f64> = dis
            .alpha()
            .iter()
            .map(|a| (a + PI).rem_euclid(2.0 * PI) - PI)
            .collect();
        want.sort_by(f64::total_cmp);
        for (w, v) in s.omega.iter().zip(&want) {
            assert!((w - v).abs() < 1e-12);
        }
        for v in &s.vectors {
            let big = v.iter().filter(|z| z.norm() > 1e-12).count();
            assert_eq!(big, 1);
        }
    }

    #[test]
    fn spectrum_invariants() {
        for model in [Model::U0, Model::U_HALF, Model::Ut0 { t0: 0.2 }] {
            let (_, s, u) = spectrum(48, model, 1);
            assert!(s.omega.windows(2).all(|w| w[0] <= w[1]));
            assert!(s.omega.iter().all(|w| (-PI..PI).contains(w)));
            assert!((s.trace() - u.trace()).norm() < 1e-8);
            assert!(s.residuals.iter().all(|r| *r <= 1e-8));
            for v in &s.vectors {
                assert!((v.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn position_vectors_are_normalized() {
        let (l, s, _) = spectrum(32, Model::U0, 2);
        for v in s.position_vectors(&l).unwrap() {
            assert!((v.iter().map(|z| z.norm_sqr()).sum::<f64>() / 32.0 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_unitary_eigenvectors_are_real_in_gauge() {
        let (_, s, _) = spectrum(64, Model::U_HALF, 3);
        for (k, v) in s.vectors.iter().enumerate() {
            if !s.is_nondegenerate(k) {
                continue;
            }
            assert!((self_overlap(v).norm() - 1.0).abs() < 1e-6);
            let g = gauge_fix(v);
            assert!(g.iter().all(|z| z.im.abs() < 1e-6));
        }
    }

    #[test]
    fn u0_phase_relation_sign() {
        let (l, s, _) = spectrum(64, Model::U0, 4);
        let phi = s.position_vectors(&l).unwrap();
        let a = 20.0 / 2.89;
        let (ours, _) = phase_relation_deviation(&s, &phi, &l, a);
        let (flipped, _) = phase_relation_deviation(&s, &phi, &l, -a);
        assert!(ours < 1e-6, "{ours}");
        assert!(flipped > 1e-2, "{flipped}");
    }

    #[test]
    fn reports_for_each_variant() {
        for model in [Model::U0, Model::U_HALF, Model::V_HALF] {
            let p = params(64, model);
            let r = symmetry_report(&p, &realization(64, 5)).unwrap();
            assert!(r.passed(), "{r:#?}");
        }
        let r = symmetry_report(&params(64, Model::U0), &realization(64, 5)).unwrap();
        let sym = r.check("matrix_symmetry").unwrap();
        assert!(!sym.expected && sym.max_deviation > 1e-3);
        assert!(r.check("theta_identity").unwrap().max_deviation < 1e-10);
        let r = symmetry_report(&params(64, Model::U_HALF), &realization(64, 5)).unwrap();
        assert!(r.check("matrix_symmetry").unwrap().max_deviation < 1e-10);
        assert!(r.check("theta_identity").is_none());
    }

    #[test]
    fn degenerate_phases_are_detected() {
        let s = FloquetSpectrum {
            omega: vec![-1.0, 0.5, 0.5 + 1e-12, 3.0],
            eigenvalues: vec![Complex64::new(1.0, 0.0); 4],
            vectors: vec![vec![]; 4],
            residuals: vec![0.0; 4],
        };
        assert!(s.is_nondegenerate(0));
        assert!(!s.is_nondegenerate(1));
        assert!(!s.is_nondegenerate(2));
        let wrap = FloquetSpectrum {
            omega: vec![-PI, 0.0, PI - 1e-12],
            ..s.clone()
        };
        assert!(!wrap.is_nondegenerate(0));
    }

    #[test]
    fn moments_of_synthetic_vectors() {
        let x: Vec<f64> = (0..4).map(|j| -PI + PI * j as f64 / 2.0).collect();
        let flat = vec![vec![Complex64::new(0.0, 1.0); 4]; 10];
        let m = EigenvectorMoments::from_vectors(&x, &flat);
        let c = cfs_contrast_from_eigenvectors(&m, -PI / 2.0, 1.0).unwrap();
        assert!(c.full.abs() < 1e-14);
        assert!(m.jensen_violation() <= 1e-15);

        // Porter-Thomas: real Gaussian amplitudes with unit variance.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut gauss = || {
            let (u1, u2): (f64, f64) = (rng.random(), rng.random());
            (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * PI * u2).cos()
        };
        let real: Vec<Vec<Complex64>> = (0..200_000)
            .map(|_| (0..4).map(|_| Complex64::new(gauss(), 0.0)).collect())
            .collect();
        let m = EigenvectorMoments::from_vectors(&x, &real);
        let c = cfs_contrast_from_eigenvectors(&m, -PI / 2.0, 1.0).unwrap();
        assert!((c.gamma - 3.0).abs() < 0.1);
        assert!((c.kurtosis - 1.0).abs() < 0.05);
        assert!((c.full - 2.0).abs() < 0.1);
        assert!(m.jensen_violation() < 0.0);
        let c2 = cfs_contrast_from_eigenvectors(&m, -PI / 2.0, 1.5).unwrap();
        assert!((c2.full + 1.0 - (c.full + 1.0) / 1.5).abs() < 1e-12);

        // Complex Gaussian: full ratio 2 gives C = 1.
        let cplx: Vec<Vec<Complex64>> = (0..200_000)
            .map(|_| {
                (0..4)
                    .map(|_| Complex64::new(gauss(), gauss()) / 2f64.sqrt())
                    .collect()
            })
            .collect();
        let m = EigenvectorMoments::from_vectors(&x, &cplx);
        let c = cfs_contrast_from_eigenvectors(&m, -PI / 2.0, 1.0).unwrap();
        assert!((c.full - 1.0).abs() < 0.05);

        let zero = EigenvectorMoments::from_vectors(&x, &[vec![Complex64::new(0.0, 0.0); 4]]);
        assert!(cfs_contrast_from_eigenvectors(&zero, -PI / 2.0, 1.0).is_err());
    }

    #[test]
    fn steady_state_is_normalized_and_even() {
        let mut p = params(32, Model::U0);
        p.n_realizations = 40;
        let e = eigen_ensemble(&p).unwrap();
        assert!((e.steady_state.normalization() - 1.0).abs() < 1e-10);
        for j in 1..32 {
            let (a, b) = (e.steady_state.mean[j], e.steady_state.mean[32 - j]);
            let err =
                (e.steady_state.stderr[j].powi(2) + e.steady_state.stderr[32 - j].powi(2)).sqrt();
            assert!((a - b).abs() <= 5.0 * err + 1e-12, "j={j}");
        }
        assert!(e.moments.abs2.iter().all(|v| (v - 1.0).abs() < 1e-10));
        assert!(e.moments.jensen_violation() <= 0.0);
        p.n_realizations = 3;
        assert!(eigen_ensemble(&p).is_err());
    }

    #[test]
    fn localization_fit_on_synthetic_profile() {
        let l = Lattice::new(512).unwrap();
        let xi = 17.0;
        let d: Vec<f64> = l
            .momenta()
            .iter()
            .map(|&p| (-2.0 * (p.abs() as f64) / xi).exp())
            .collect();
        let (fit, (lo, hi)) = fit_localization_length(&l, &d).unwrap();
        assert!((fit - xi).abs() < 1e-9);
        assert!(lo > 0 && hi > lo);
    }

    #[test]
    fn delocalized_regime_is_flagged() {
        let p = SimulationParams {
            n: 64,
            n_realizations: 2,
            ..SimulationParams::default()
        };
        // K^2 / (4 hbar^2) = 64 > N / 4
        let pts = localization_scaling(&p, &[16.0 * 2.89], 100, 10).unwrap();
        assert!(pts[0].delocalized && pts[0].xi.is_none());
    }

    #[test]
    fn ratio_of_localization_length_to_mean_free_path() {
        let p = SimulationParams::default();
        let r = p.predicted_localization_length() / p.mean_free_path();
        assert!((r - p.kick / (4.0 * p.hbar)).abs() < 1e-12);
        assert!((r - 1.73).abs() < 0.01);
    }
}
