//! Closed-form disorder-averaged return amplitude and background for the
//! time-symmetrized model `U_{1/2} = sqrt(Up) Ux sqrt(Up)`.
//!
//! Only paths visiting exactly two momenta `p0 != pt` survive the disorder
//! average; their weight follows from the half-integer phase moments and a
//! binary-alloy count of the intermediate momenta. All amplitudes here are
//! reported per unit `N`, i.e. as `(1/N) <x|U^t|x>`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::bessel::{bessel_j, bessel_j_upto};
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::observables::{spectral_function, DensityProfile, ReturnAmplitudeSeries, SpectralTable};

/// Threshold below which Bessel tails are considered negligible.
const TAIL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticBackgroundParams {
    pub kick: f64,
    pub hbar: f64,
    pub n: usize,
    /// Number of time terms `1..=t_terms` kept in the spectral sum.
    pub t_terms: usize,
    /// Fourier cutoff for the `a_q(t)` series.
    pub q_max: usize,
}

impl AnalyticBackgroundParams {
    pub fn new(kick: f64, hbar: f64, n: usize) -> Self {
        let a = kick / hbar;
        Self {
            kick,
            hbar,
            n,
            t_terms: 1,
            q_max: a.ceil() as usize + 30,
        }
    }

    pub fn with_t_terms(mut self, t_terms: usize) -> Self {
        self.t_terms = t_terms;
        self
    }

    pub fn kick_over_hbar(&self) -> f64 {
        self.kick / self.hbar
    }

    pub fn validate(&self) -> Result<()> {
        if self.q_max < 1 {
            return Err(Error::param("q_max", "must be >= 1"));
        }
        if self.t_terms < 1 {
            return Err(Error::param("t_terms", "must be >= 1"));
        }
        if !(self.kick >= 0.0 && self.hbar > 0.0) {
            return Err(Error::param("K/hbar", "need K >= 0 and hbar > 0"));
        }
        Ok(())
    }
}

/// Exact binomial coefficient (product form, exact in `u128` for `n <= 120`).
pub fn binomial_exact(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

fn binomial_f64(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |c, i| c * (n - i) as f64 / (i + 1) as f64)
}

/// Number of chains of `t - 1` intermediate momenta with `k` copies of the
/// final momentum and `2m + 1` momentum jumps: `C(k, m) C(t-1-k, m)`.
pub fn alloy_configuration_count(k: usize, m: usize, t: usize) -> u128 {
    assert!(k < t);
    binomial_exact(k as u64, m as u64) * binomial_exact((t - 1 - k) as u64, m as u64)
}

/// `g(m, t) = sum_{k=m}^{t-1-m} C(k,m) C(t-k-1,m) / ((2k+1)(2t-2k-1))`.
pub fn g_coefficient(m: usize, t: usize) -> Result<f64> {
    if t < 1 {
        return Err(Error::param("t", "must be >= 1"));
    }
    if m > (t - 1) / 2 {
        return Err(Error::param(
            "m",
            format!("{m} > floor((t-1)/2) = {}", (t - 1) / 2),
        ));
    }
    let mut g = 0.0;
    for k in m..=(t - 1 - m) {
        let count = if t <= 64 {
            alloy_configuration_count(k, m, t) as f64
        } else {
            binomial_f64(k as u64, m as u64) * binomial_f64((t - 1 - k) as u64, m as u64)
        };
        g += count / ((2 * k + 1) as f64 * (2 * t - 2 * k - 1) as f64);
    }
    Ok(g)
}

fn i_pow(q: i64) -> Complex64 {
    match q.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn g_table(t: usize) -> Vec<f64> {
    (0..=(t - 1) / 2)
        .map(|m| g_coefficient(m, t).unwrap())
        .collect()
}

/// `a_q(t) / N` on the infinite momentum lattice; zero for `q = 0`.
pub fn fourier_coefficient_aq(q: i64, t: usize, params: &AnalyticBackgroundParams) -> Complex64 {
    if q == 0 || t == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let a = params.kick_over_hbar();
    coefficient_from_bessel(q, &g_table(t), t, bessel_j(0, a), bessel_j(q, a))
}

fn coefficient_from_bessel(q: i64, g: &[f64], t: usize, j0: f64, jq: f64) -> Complex64 {
    let sign = if q.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let mut s = 0.0;
    for (m, gm) in g.iter().enumerate() {
        let pm = if m % 2 == 0 { 1.0 } else { sign };
        s += gm * j0.powi((t - 2 * m - 1) as i32) * pm * jq.powi((2 * m + 1) as i32);
    }
    i_pow(q) * (-4.0 / (PI * PI) * s)
}

/// Same coefficient on a finite periodic momentum ring, from an explicit kick
/// row `kick_row[q mod N] = <p + q| Ux |p>`.
pub fn fourier_coefficient_on_ring(q: i64, t: usize, kick_row: &[Complex64]) -> Complex64 {
    let n = kick_row.len() as i64;
    if q.rem_euclid(n) == 0 || t == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let u0 = kick_row[0];
    let up = kick_row[q.rem_euclid(n) as usize];
    let um = kick_row[(-q).rem_euclid(n) as usize];
    let mut s = Complex64::new(0.0, 0.0);
    for (m, gm) in g_table(t).iter().enumerate() {
        s += u0.powi((t - 2 * m - 1) as i32) * up.powi((m + 1) as i32) * um.powi(m as i32) * *gm;
    }
    s * (-4.0 / (PI * PI))
}

/// `(1/N) <x| avg(U^t) |x>` on a finite ring with `N = kick_row.len()`.
pub fn return_amplitude_on_ring(x: f64, t: usize, kick_row: &[Complex64]) -> Complex64 {
    if t == 0 {
        return Complex64::new(1.0, 0.0);
    }
    let n = kick_row.len() as i64;
    (-n / 2..n / 2)
        .filter(|&q| q != 0)
        .map(|q| {
            Complex64::from_polar(1.0, q as f64 * x) * fourier_coefficient_on_ring(q, t, kick_row)
        })
        .sum()
}

/// `(1/N) <x| avg(U_{1/2}^t) |x> = sum_q exp(i q x) a_q(t) / N`.
pub fn return_amplitude_analytic(
    x: f64,
    t: usize,
    params: &AnalyticBackgroundParams,
) -> Result<Complex64> {
    params.validate()?;
    if t == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let a = params.kick_over_hbar();
    let j = bessel_j_upto(params.q_max + 1, a);
    if j[params.q_max + 1].abs() > TAIL_TOLERANCE {
        return Err(Error::param(
            "q_max",
            format!(
                "cutoff {} too small for K/hbar = {a:.3}: |J_(q_max+1)| = {:.2e}",
                params.q_max,
                j[params.q_max + 1].abs()
            ),
        ));
    }
    let g = g_table(t);
    let mut sum = Complex64::new(0.0, 0.0);
    for q in 1..=params.q_max as i64 {
        let jq = j[q as usize];
        let jmq = if q % 2 == 0 { jq } else { -jq };
        sum +=
            Complex64::from_polar(1.0, q as f64 * x) * coefficient_from_bessel(q, &g, t, j[0], jq);
        sum += Complex64::from_polar(1.0, -(q as f64) * x)
            * coefficient_from_bessel(-q, &g, t, j[0], jmq);
    }
    Ok(sum)
}

/// Resummed closed forms for `t = 1` and `t = 2`.
pub fn return_amplitude_closed_form(
    x: f64,
    t: usize,
    params: &AnalyticBackgroundParams,
) -> Result<Complex64> {
    let a = params.kick_over_hbar();
    let j0 = bessel_j(0, a);
    let first =
        (Complex64::new(j0, 0.0) - Complex64::from_polar(1.0, a * x.cos())) * (4.0 / (PI * PI));
    match t {
        1 => Ok(first),
        2 => Ok(first * (2.0 / 3.0 * j0)),
        _ => Err(Error::param(
            "t",
            format!("closed form only for t = 1, 2 (got {t})"),
        )),
    }
}

/// Spectral function truncated to `|t| <= 1`:
/// `1 + (8/pi^2) [cos(w) J0 - cos(w - a cos x)]`.
///
/// The numeric tables use `exp(+i w t)` and therefore carry `cos(w + a cos x)`;
/// both signs yield the same background.
pub fn approx_spectral(x: f64, omega: f64, params: &AnalyticBackgroundParams) -> f64 {
    let a = params.kick_over_hbar();
    1.0 + 8.0 / (PI * PI) * (omega.cos() * bessel_j(0, a) - (omega - a * x.cos()).cos())
}

/// Closed-form background from the `|t| <= 1` spectral function with a flat
/// density of states.
pub fn approx_background(x: f64, x0: f64, params: &AnalyticBackgroundParams) -> f64 {
    let a = params.kick_over_hbar();
    let j0 = bessel_j(0, a);
    let (c, c0) = ((a * x.cos()).cos(), (a * x0.cos()).cos());
    1.0 + 32.0 / PI.powi(4) * (j0 * j0 - j0 * (c0 + c) + (a * (x0.cos() - x.cos())).cos())
}

/// [`approx_background`] evaluated on every grid point.
pub fn approx_background_profile(
    params: &AnalyticBackgroundParams,
    lattice: &Lattice,
    x0: f64,
) -> Result<DensityProfile> {
    lattice.index_of(x0)?;
    let x = lattice.positions().to_vec();
    let mean = x
        .iter()
        .map(|&xi| approx_background(xi, x0, params))
        .collect();
    Ok(DensityProfile {
        stderr: vec![0.0; x.len()],
        x,
        mean,
        t: None,
        x0,
    })
}

/// Analytic return amplitudes for `t = 0..=t_terms` at every grid point.
pub fn analytic_series(
    params: &AnalyticBackgroundParams,
    lattice: &Lattice,
) -> Result<Vec<ReturnAmplitudeSeries>> {
    lattice
        .positions()
        .iter()
        .map(|&x| {
            let mean = (0..=params.t_terms)
                .map(|t| return_amplitude_analytic(x, t, params))
                .collect::<Result<Vec<_>>>()?;
            Ok(ReturnAmplitudeSeries {
                x,
                stderr: vec![0.0; mean.len()],
                mean,
            })
        })
        .collect()
}

/// Spectral table built from the analytic amplitudes up to `t_terms`.
pub fn analytic_spectral_table(
    params: &AnalyticBackgroundParams,
    lattice: &Lattice,
    n_omega: usize,
) -> Result<SpectralTable> {
    spectral_function(&analytic_series(params, lattice)?, n_omega)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> AnalyticBackgroundParams {
        AnalyticBackgroundParams::new(20.0, 2.89, 200)
    }

    /// Direct enumeration of all binary strings of length t-1.
    fn brute_force_alloy(k: usize, m: usize, t: usize) -> u128 {
        let len = t - 1;
        let mut count = 0;
        for mask in 0u32..(1 << len) {
            // bit set = final momentum (A); chain is A - L - B read from p_t down to p_0
            if mask.count_ones() as usize != k {
                continue;
            }
            let mut chain = vec![true];
            chain.extend((0..len).map(|i| mask >> i & 1 == 1));
            chain.push(false);
            let ab = chain.windows(2).filter(|w| w[0] && !w[1]).count();
            let ba = chain.windows(2).filter(|w| !w[0] && w[1]).count();
            if ab == m + 1 && ba == m {
                count += 1;
            }
        }
        count
    }

    #[test]
    fn alloy_count_matches_enumeration() {
        for t in 1..=10 {
            for k in 0..t {
                for m in 0..=(t - 1) / 2 {
                    assert_eq!(
                        alloy_configuration_count(k, m, t),
                        brute_force_alloy(k, m, t),
                        "t={t} k={k} m={m}"
                    );
                }
                let total_jumps_odd: u128 =
                    (0..=(t - 1) / 2).map(|m| brute_force_alloy(k, m, t)).sum();
                assert_eq!(total_jumps_odd, binomial_exact((t - 1) as u64, k as u64));
            }
        }
    }

    #[test]
    fn g_values() {
        assert!((g_coefficient(0, 1).unwrap() - 1.0).abs() < 1e-15);
        assert!((g_coefficient(0, 2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((g_coefficient(1, 3).unwrap() - 1.0 / 9.0).abs() < 1e-15);
        assert!(g_coefficient(2, 4).is_err());
        assert!(g_coefficient(0, 0).is_err());
    }

    #[test]
    fn g_switches_to_floating_point_smoothly() {
        // both sides of the exact-integer boundary agree with the float path
        for (m, t) in [(3, 64), (3, 65), (10, 80)] {
            let direct: f64 = (m..=t - 1 - m)
                .map(|k| {
                    binomial_f64(k as u64, m as u64) * binomial_f64((t - 1 - k) as u64, m as u64)
                        / ((2 * k + 1) * (2 * t - 2 * k - 1)) as f64
                })
                .sum();
            let g = g_coefficient(m, t).unwrap();
            assert!((g - direct).abs() <= 1e-12 * direct.abs());
        }
    }

    #[test]
    fn a0_vanishes() {
        for t in 1..6 {
            assert_eq!(
                fourier_coefficient_aq(0, t, &reference()),
                Complex64::new(0.0, 0.0)
            );
        }
    }

    #[test]
    fn first_order_coefficients() {
        let p = reference();
        let a = p.kick_over_hbar();
        for q in [-3i64, -1, 1, 2, 5] {
            let want = i_pow(q) * (-4.0 / (PI * PI) * bessel_j(q, a));
            assert!((fourier_coefficient_aq(q, 1, &p) - want).norm() < 1e-15);
        }
    }

    #[test]
    fn series_reproduces_closed_forms() {
        let p = reference();
        for &x in &[-PI / 2.0, -PI / 3.0, 0.0, 0.7, 2.9] {
            for t in [1, 2] {
                let s = return_amplitude_analytic(x, t, &p).unwrap();
                let c = return_amplitude_closed_form(x, t, &p).unwrap();
                assert!((s - c).norm() < 1e-12, "x={x} t={t}");
            }
        }
    }

    #[test]
    fn closed_form_at_quarter_turn() {
        let p = reference();
        let r = return_amplitude_closed_form(-PI / 2.0, 1, &p).unwrap();
        let j0 = bessel_j(0, p.kick_over_hbar());
        assert!((r - Complex64::new(4.0 / (PI * PI) * (j0 - 1.0), 0.0)).norm() < 1e-14);
        assert!((r.re - (-0.284205)).abs() < 1e-6);
        assert!((r.norm_sqr() - 0.080773).abs() < 1e-6);
        let r2 = return_amplitude_closed_form(-PI / 2.0, 2, &p).unwrap();
        assert!((r2 - r * (2.0 / 3.0 * j0)).norm() < 1e-15);
    }

    #[test]
    fn vanishing_kick_gives_no_return() {
        let p = AnalyticBackgroundParams::new(1e-12, 2.89, 64);
        assert!(
            return_amplitude_closed_form(-PI / 2.0, 1, &p)
                .unwrap()
                .norm()
                < 1e-12
        );
        assert!(return_amplitude_analytic(0.3, 3, &p).unwrap().norm() < 1e-12);
    }

    #[test]
    fn cutoff_guard() {
        let mut p = reference();
        p.q_max = 5;
        assert!(return_amplitude_analytic(0.0, 1, &p).is_err());
    }

    #[test]
    fn approx_spectral_properties() {
        let p = reference();
        let a = p.kick_over_hbar();
        let j0 = bessel_j(0, a);
        for &w in &[-2.0, 0.0, 1.3] {
            let v = approx_spectral(PI / 2.0, w, &p);
            assert!((v - (1.0 + 8.0 / (PI * PI) * w.cos() * (j0 - 1.0))).abs() < 1e-14);
        }
        let m = 64;
        let omega_mean: f64 = (0..m)
            .map(|i| approx_spectral(0.4, -PI + 2.0 * PI * i as f64 / m as f64, &p))
            .sum::<f64>()
            / m as f64;
        assert!((omega_mean - 1.0).abs() < 1e-13);
        let l = Lattice::new(64).unwrap();
        for &w in &[-3.0, -0.5, 0.0, 2.2] {
            let xm: f64 = l
                .positions()
                .iter()
                .map(|&x| approx_spectral(x, w, &p))
                .sum::<f64>()
                / 64.0;
            assert!((xm - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn approx_background_properties() {
        let p = reference();
        let a = p.kick_over_hbar();
        let j0 = bessel_j(0, a);
        let x0 = -PI / 2.0;
        let diag = approx_background(x0, x0, &p);
        assert!(
            (diag - (1.0 + 32.0 / PI.powi(4) * (j0 * j0 - 2.0 * j0 * (a * x0.cos()).cos() + 1.0)))
                .abs()
                < 1e-14
        );

        let tiny = AnalyticBackgroundParams::new(1e-9, 2.89, 64);
        assert!((approx_background(0.3, 1.1, &tiny) - 1.0).abs() < 1e-12);

        for n in [64, 200, 800] {
            let l = Lattice::new(n).unwrap();
            let prof = approx_background_profile(&p, &l, x0).unwrap();
            let mean = prof.mean.iter().sum::<f64>() / n as f64;
            assert!((mean - 1.0).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn background_equals_spectral_overlap_integral() {
        let p = reference();
        let m = 256;
        for &(x, x0) in &[(0.2, -PI / 2.0), (PI / 2.0, -PI / 3.0), (1.0, 1.0)] {
            let integral: f64 = (0..m)
                .map(|i| {
                    let w = -PI + 2.0 * PI * i as f64 / m as f64;
                    approx_spectral(x, w, &p) * approx_spectral(x0, w, &p)
                })
                .sum::<f64>()
                / m as f64;
            assert!((integral - approx_background(x, x0, &p)).abs() < 1e-12);
        }
    }

    #[test]
    fn oscillation_scale_near_quarter_turn() {
        // Near x = pi/2 the phase a cos x changes by 2 pi over dx = 2 pi / a, so
        // adjacent extrema of cos(a (cos x0 - cos x)) sit pi hbar / K apart.
        let p = AnalyticBackgroundParams::new(40.0, 2.89, 2000);
        let l = Lattice::new(4000).unwrap();
        let x0 = -PI / 2.0;
        let prof: Vec<(f64, f64)> = l
            .positions()
            .iter()
            .map(|&x| (x, approx_background(x, x0, &p)))
            .filter(|(x, _)| (x - PI / 2.0).abs() < 0.6)
            .collect();
        let maxima: Vec<f64> = prof
            .windows(3)
            .filter(|w| w[1].1 > w[0].1 && w[1].1 > w[2].1)
            .map(|w| w[1].0)
            .collect();
        let spacing = maxima
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        let expected = 2.0 * PI * p.hbar / p.kick;
        assert!(
            (spacing - expected).abs() < 0.1 * expected,
            "{spacing} vs {expected}"
        );
        assert!((PI * p.hbar / p.kick - expected / 2.0).abs() < 1e-15);
    }
}
