//! One-period Floquet operators of the kicked rotor family.
//!
//! Every variant is a product of diagonal unitaries: kicks `Ux^s`, diagonal in
//! position, and free evolutions `Up^tau`, diagonal in momentum. Fractional
//! powers are phase multiplications with a scaled exponent.

use std::f64::consts::TAU;

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{Basis, Lattice, StateVector};
use crate::params::Model;

/// Largest lattice for which dense matrices are built.
pub const DENSE_CAP: usize = 512;

/// One draw of the free-evolution phases, indexed like the momentum grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderRealization {
    alpha: Vec<f64>,
}

impl DisorderRealization {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if let Some(a) = alpha.iter().find(|a| !(0.0..TAU).contains(*a)) {
            return Err(Error::param("alpha", format!("phase {a} outside [0, 2pi)")));
        }
        Ok(Self { alpha })
    }

    /// The deterministic kicked-rotor phases `p^2 hbar / 2 mod 2pi`.
    pub fn kinetic(lattice: &Lattice, hbar: f64) -> Self {
        let alpha = lattice
            .momenta()
            .iter()
            .map(|&p| {
                let a = ((p * p) as f64 * hbar / 2.0).rem_euclid(TAU);
                if a >= TAU {
                    0.0
                } else {
                    a
                }
            })
            .collect();
        Self { alpha }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            alpha: vec![0.0; n],
        }
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

/// Elementary factor of a Floquet period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Factor {
    /// `Ux^s = exp(i s (K/hbar) cos x)`
    Kick(f64),
    /// `Up^tau = exp(-i tau alpha_p)`
    Free(f64),
}

impl Factor {
    fn basis(&self) -> Basis {
        match self {
            Factor::Kick(_) => Basis::Position,
            Factor::Free(_) => Basis::Momentum,
        }
    }
}

/// A model variant resolved into its factors, listed in the order they act.
#[derive(Debug, Clone, PartialEq)]
pub struct FloquetVariant {
    model: Model,
    factors: Vec<Factor>,
}

impl FloquetVariant {
    pub fn new(model: Model) -> Result<Self> {
        model.validate()?;
        let raw = match model {
            Model::U0 => vec![Factor::Free(1.0), Factor::Kick(1.0)],
            Model::Ut0 { t0 } => vec![Factor::Free(1.0 - t0), Factor::Kick(1.0), Factor::Free(t0)],
            Model::Vr { r } => vec![Factor::Kick(1.0 - r), Factor::Free(1.0), Factor::Kick(r)],
        };
        let factors = raw
            .into_iter()
            .filter(|f| match *f {
                Factor::Kick(s) | Factor::Free(s) => s > 0.0,
            })
            .collect();
        Ok(Self { model, factors })
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// Symmetric splittings are invariant under complex conjugation in the
    /// momentum basis, i.e. their momentum matrix is complex-symmetric.
    pub fn is_pt_symmetric(&self) -> bool {
        let f = &self.factors;
        f.len() == 3 && f[0] == f[2]
    }
}

fn kick_phases(lattice: &Lattice, fraction: f64, kick_over_hbar: f64) -> Vec<Complex64> {
    lattice
        .positions()
        .iter()
        .map(|x| Complex64::from_polar(1.0, fraction * kick_over_hbar * x.cos()))
        .collect()
}

fn free_phases(disorder: &DisorderRealization, fraction: f64) -> Vec<Complex64> {
    disorder
        .alpha()
        .iter()
        .map(|a| Complex64::from_polar(1.0, -fraction * a))
        .collect()
}

fn check_fraction(f: f64) -> Result<()> {
    if !(f > 0.0 && f <= 1.0) {
        return Err(Error::Fraction(f));
    }
    Ok(())
}

/// Multiplies the position amplitudes by `exp(i s (K/hbar) cos x)`.
pub fn apply_kick(
    lattice: &Lattice,
    s: &StateVector,
    fraction: f64,
    kick_over_hbar: f64,
) -> Result<StateVector> {
    check_fraction(fraction)?;
    lattice.check_len(s.len())?;
    let mut out = s.clone();
    lattice.convert(&mut out, Basis::Position, &mut lattice.scratch());
    for (a, ph) in out
        .amplitudes
        .iter_mut()
        .zip(kick_phases(lattice, fraction, kick_over_hbar))
    {
        *a *= ph;
    }
    Ok(out)
}

/// Multiplies the momentum amplitudes by `exp(-i tau alpha_p)`.
pub fn apply_free(
    lattice: &Lattice,
    s: &StateVector,
    fraction: f64,
    disorder: &DisorderRealization,
) -> Result<StateVector> {
    check_fraction(fraction)?;
    lattice.check_len(s.len())?;
    lattice.check_len(disorder.len())?;
    let mut out = s.clone();
    lattice.convert(&mut out, Basis::Momentum, &mut lattice.scratch());
    for (a, ph) in out
        .amplitudes
        .iter_mut()
        .zip(free_phases(disorder, fraction))
    {
        *a *= ph;
    }
    Ok(out)
}

/// Precomputed phase tables for repeated application of one Floquet operator.
#[derive(Debug, Clone)]
pub struct FloquetKernel {
    lattice: Lattice,
    factors: Vec<Factor>,
    ops: Vec<(Basis, Vec<Complex64>)>,
    scratch: Vec<Complex64>,
}

impl FloquetKernel {
    pub fn new(
        lattice: &Lattice,
        variant: &FloquetVariant,
        disorder: &DisorderRealization,
        kick_over_hbar: f64,
    ) -> Result<Self> {
        lattice.check_len(disorder.len())?;
        let ops = variant
            .factors()
            .iter()
            .map(|f| {
                let phases = match *f {
                    Factor::Kick(s) => kick_phases(lattice, s, kick_over_hbar),
                    Factor::Free(_) => Vec::new(),
                };
                (f.basis(), phases)
            })
            .collect();
        let mut kernel = Self {
            lattice: lattice.clone(),
            factors: variant.factors().to_vec(),
            ops,
            scratch: lattice.scratch(),
        };
        kernel.set_disorder(disorder)?;
        Ok(kernel)
    }

    /// Replaces the free-evolution phases, keeping the kick tables.
    pub fn set_disorder(&mut self, disorder: &DisorderRealization) -> Result<()> {
        self.lattice.check_len(disorder.len())?;
        for k in 0..self.factors.len() {
            if let Factor::Free(tau) = self.factors[k] {
                let earlier = (0..k).find(|&i| self.factors[i] == Factor::Free(tau));
                self.ops[k].1 = match earlier {
                    Some(i) => self.ops[i].1.clone(),
                    None => free_phases(disorder, tau),
                };
            }
        }
        Ok(())
    }

    /// Basis of the state after [`FloquetKernel::step`].
    pub fn output_basis(&self) -> Basis {
        self.ops.last().map_or(Basis::Momentum, |op| op.0)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// One period, rightmost operator factor first. The output basis is that
    /// of the last factor.
    pub fn step(&mut self, s: &mut StateVector) {
        for (basis, phases) in &self.ops {
            self.lattice.convert(s, *basis, &mut self.scratch);
            for (a, ph) in s.amplitudes.iter_mut().zip(phases) {
                *a *= ph;
            }
        }
    }

    pub fn evolve(&mut self, s: &mut StateVector, t: usize) {
        for _ in 0..t {
            self.step(s);
        }
    }

    pub fn convert(&mut self, s: &mut StateVector, basis: Basis) {
        self.lattice.convert(s, basis, &mut self.scratch);
    }
}

pub fn floquet_step(
    lattice: &Lattice,
    s: &StateVector,
    variant: &FloquetVariant,
    disorder: &DisorderRealization,
    kick_over_hbar: f64,
) -> Result<StateVector> {
    evolve(lattice, s, variant, disorder, 1, kick_over_hbar)
}

/// `U^t s0`; `t = 0` returns `s0` unchanged.
pub fn evolve(
    lattice: &Lattice,
    s0: &StateVector,
    variant: &FloquetVariant,
    disorder: &DisorderRealization,
    t: usize,
    kick_over_hbar: f64,
) -> Result<StateVector> {
    lattice.check_len(s0.len())?;
    let mut kernel = FloquetKernel::new(lattice, variant, disorder, kick_over_hbar)?;
    let mut s = s0.clone();
    kernel.evolve(&mut s, t);
    Ok(s)
}

/// Dense complex matrix in the momentum basis (row = output momentum index).
#[derive(Debug, Clone)]
pub struct UnitaryMatrix(pub Mat<Complex64>);

impl UnitaryMatrix {
    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }

    pub fn mat(&self) -> &Mat<Complex64> {
        &self.0
    }

    /// `max |U - U^T|`
    pub fn max_asymmetry(&self) -> f64 {
        let n = self.n();
        let mut m = 0.0f64;
        for c in 0..n {
            for r in 0..c {
                m = m.max((self.0[(r, c)] - self.0[(c, r)]).norm());
            }
        }
        m
    }

    /// `max |U^dagger U - 1|`
    pub fn unitarity_defect(&self) -> f64 {
        let prod = self.0.adjoint() * &self.0;
        max_deviation_from_identity(&prod)
    }

    pub fn adjoint(&self) -> UnitaryMatrix {
        UnitaryMatrix(self.0.adjoint().to_owned())
    }

    pub fn conjugate(&self) -> UnitaryMatrix {
        UnitaryMatrix(self.0.conjugate().to_owned())
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n()).map(|i| self.0[(i, i)]).sum()
    }

    pub fn max_diff(&self, other: &UnitaryMatrix) -> f64 {
        let n = self.n();
        let mut m = 0.0f64;
        for c in 0..n {
            for r in 0..n {
                m = m.max((self.0[(r, c)] - other.0[(r, c)]).norm());
            }
        }
        m
    }
}

impl std::ops::Mul for &UnitaryMatrix {
    type Output = UnitaryMatrix;
    fn mul(self, rhs: &UnitaryMatrix) -> UnitaryMatrix {
        UnitaryMatrix(&self.0 * &rhs.0)
    }
}

fn max_deviation_from_identity(m: &Mat<Complex64>) -> f64 {
    let mut d = 0.0f64;
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let e = if r == c { 1.0 } else { 0.0 };
            d = d.max((m[(r, c)] - Complex64::new(e, 0.0)).norm());
        }
    }
    d
}

fn dense_from_columns(
    lattice: &Lattice,
    mut apply: impl FnMut(&mut StateVector),
) -> Result<UnitaryMatrix> {
    let n = lattice.len();
    if n > DENSE_CAP {
        return Err(Error::DenseCap { n, cap: DENSE_CAP });
    }
    let mut m = Mat::<Complex64>::zeros(n, n);
    let mut scratch = lattice.scratch();
    for (col, &p) in lattice.momenta().iter().enumerate() {
        let mut s = lattice.momentum_state(p);
        apply(&mut s);
        lattice.convert(&mut s, Basis::Momentum, &mut scratch);
        for (row, a) in s.amplitudes.iter().enumerate() {
            m[(row, col)] = *a;
        }
    }
    Ok(UnitaryMatrix(m))
}

/// Dense Floquet matrix; column `k` is one step applied to `|p_k>`.
pub fn build_dense(
    lattice: &Lattice,
    variant: &FloquetVariant,
    disorder: &DisorderRealization,
    kick_over_hbar: f64,
) -> Result<UnitaryMatrix> {
    let mut kernel = FloquetKernel::new(lattice, variant, disorder, kick_over_hbar)?;
    dense_from_columns(lattice, |s| kernel.step(s))
}

/// Dense kick `Ux^fraction` in the momentum basis (finite-grid, i.e. aliased,
/// Bessel matrix elements).
pub fn build_dense_kick(
    lattice: &Lattice,
    fraction: f64,
    kick_over_hbar: f64,
) -> Result<UnitaryMatrix> {
    check_fraction(fraction)?;
    let phases = kick_phases(lattice, fraction, kick_over_hbar);
    let mut scratch = lattice.scratch();
    dense_from_columns(lattice, |s| {
        lattice.convert(s, Basis::Position, &mut scratch);
        for (a, ph) in s.amplitudes.iter_mut().zip(&phases) {
            *a *= ph;
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::bessel_j;
    use crate::ensemble::{sample_disorder, EnsembleSpec};
    use std::f64::consts::PI;

    fn random_disorder(n: usize, index: usize) -> DisorderRealization {
        sample_disorder(&EnsembleSpec::new(7, index + 1), index, n).unwrap()
    }

    fn max_diff(a: &StateVector, b: &StateVector) -> f64 {
        assert_eq!(a.basis, b.basis);
        a.amplitudes
            .iter()
            .zip(&b.amplitudes)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_kick_is_identity() {
        let l = Lattice::new(16).unwrap();
        let s = l.to_position(&l.position_state_at(3)).unwrap();
        let out = apply_kick(&l, &s, 0.7, 0.0).unwrap();
        assert!(max_diff(&s, &out) < 1e-15);
    }

    #[test]
    fn kick_phases_add() {
        let l = Lattice::new(32).unwrap();
        let s = l.momentum_state(2);
        let twice = apply_kick(&l, &apply_kick(&l, &s, 1.0, 3.0).unwrap(), 1.0, 3.0).unwrap();
        let once = apply_kick(&l, &s, 1.0, 6.0).unwrap();
        assert!(max_diff(&twice, &once) < 1e-13);
        assert!((once.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kicked_plane_wave_follows_jacobi_anger() {
        let a = 20.0 / 2.89;
        let l = Lattice::new(128).unwrap();
        let kicked = apply_kick(&l, &l.momentum_state(0), 1.0, a).unwrap();
        let p = l.to_momentum(&kicked).unwrap();
        for q in -20i64..=20 {
            let j = bessel_j(q, a);
            let expect = Complex64::i().powi(q.rem_euclid(4) as i32) * j;
            let got = p.amplitudes[l.momentum_index(q)];
            assert!((got - expect).norm() < 1e-12, "q={q}: {got} vs {expect}");
        }
    }

    #[test]
    fn rejects_bad_fractions() {
        let l = Lattice::new(8).unwrap();
        let s = l.momentum_state(0);
        let d = DisorderRealization::zeros(8);
        assert!(matches!(
            apply_kick(&l, &s, 0.0, 1.0),
            Err(Error::Fraction(_))
        ));
        assert!(matches!(
            apply_free(&l, &s, 1.5, &d),
            Err(Error::Fraction(_))
        ));
    }

    #[test]
    fn free_phase_additivity_and_identity() {
        let l = Lattice::new(32).unwrap();
        let d = random_disorder(32, 0);
        let s = l.position_state_at(5);
        let half = apply_free(&l, &apply_free(&l, &s, 0.5, &d).unwrap(), 0.5, &d).unwrap();
        let full = apply_free(&l, &s, 1.0, &d).unwrap();
        assert!(max_diff(&half, &full) < 1e-12);
        let split = apply_free(&l, &apply_free(&l, &s, 0.3, &d).unwrap(), 0.45, &d).unwrap();
        let joint = apply_free(&l, &s, 0.75, &d).unwrap();
        assert!(max_diff(&split, &joint) < 1e-12);
        let zero = apply_free(&l, &s, 1.0, &DisorderRealization::zeros(32)).unwrap();
        assert!(max_diff(&zero, &s) < 1e-15);
    }

    #[test]
    fn kinetic_phase_example() {
        let l = Lattice::new(8).unwrap();
        let d = DisorderRealization::kinetic(&l, 2.89);
        let a = d.alpha()[l.momentum_index(3)];
        // 9 * 2.89 / 2 = 13.005; 13.005 - 4 pi
        assert!((a - (13.005 - 4.0 * PI)).abs() < 1e-12);
        assert!((a - 0.4386).abs() < 1e-4);
    }

    #[test]
    fn degenerate_variants_match_u0_exactly() {
        let u0 = FloquetVariant::new(Model::U0).unwrap();
        assert_eq!(
            FloquetVariant::new(Model::Ut0 { t0: 0.0 })
                .unwrap()
                .factors(),
            u0.factors()
        );
        assert_eq!(
            FloquetVariant::new(Model::Vr { r: 1.0 }).unwrap().factors(),
            u0.factors()
        );
        let l = Lattice::new(64).unwrap();
        let d = random_disorder(64, 1);
        let s0 = l.position_state_at(16);
        let a = floquet_step(&l, &s0, &u0, &d, 6.9).unwrap();
        let b = floquet_step(
            &l,
            &s0,
            &FloquetVariant::new(Model::Ut0 { t0: 0.0 }).unwrap(),
            &d,
            6.9,
        )
        .unwrap();
        assert!(max_diff(&a, &b) < 1e-12);
    }

    #[test]
    fn pt_symmetry_classification() {
        assert!(FloquetVariant::new(Model::U_HALF)
            .unwrap()
            .is_pt_symmetric());
        assert!(FloquetVariant::new(Model::V_HALF)
            .unwrap()
            .is_pt_symmetric());
        assert!(!FloquetVariant::new(Model::U0).unwrap().is_pt_symmetric());
        assert!(!FloquetVariant::new(Model::Ut0 { t0: 0.3 })
            .unwrap()
            .is_pt_symmetric());
    }

    #[test]
    fn evolve_composes_steps() {
        let l = Lattice::new(32).unwrap();
        let d = random_disorder(32, 2);
        let v = FloquetVariant::new(Model::U_HALF).unwrap();
        let s0 = l.position_state_at(8);
        assert_eq!(evolve(&l, &s0, &v, &d, 0, 5.0).unwrap(), s0);
        let one = floquet_step(&l, &s0, &v, &d, 5.0).unwrap();
        let two = floquet_step(&l, &one, &v, &d, 5.0).unwrap();
        let direct = evolve(&l, &s0, &v, &d, 2, 5.0).unwrap();
        assert!(max_diff(&two, &direct) < 1e-12);
    }

    #[test]
    fn long_evolution_keeps_unit_norm() {
        let l = Lattice::new(256).unwrap();
        let d = random_disorder(256, 3);
        for model in [
            Model::U0,
            Model::U_HALF,
            Model::V_HALF,
            Model::Ut0 { t0: 0.3 },
        ] {
            let v = FloquetVariant::new(model).unwrap();
            let s = evolve(&l, &l.position_state_at(64), &v, &d, 1000, 20.0 / 2.89).unwrap();
            assert!((s.norm_sqr() - 1.0).abs() < 1e-9, "{model:?}");
        }
    }

    #[test]
    fn dense_matrix_columns_match_kernel() {
        let l = Lattice::new(32).unwrap();
        let d = random_disorder(32, 4);
        let a = 4.0;
        for model in [Model::U0, Model::U_HALF, Model::Vr { r: 0.2 }] {
            let v = FloquetVariant::new(model).unwrap();
            let u = build_dense(&l, &v, &d, a).unwrap();
            assert!(u.unitarity_defect() < 1e-10);
            for (col, &p) in l.momenta().iter().enumerate() {
                let mut s = floquet_step(&l, &l.momentum_state(p), &v, &d, a).unwrap();
                l.convert(&mut s, Basis::Momentum, &mut l.scratch());
                for row in 0..32 {
                    assert!((u.get(row, col) - s.amplitudes[row]).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn dense_zero_kick_is_diagonal_disorder() {
        let l = Lattice::new(16).unwrap();
        let d = random_disorder(16, 5);
        let u = build_dense(&l, &FloquetVariant::new(Model::U0).unwrap(), &d, 0.0).unwrap();
        for c in 0..16 {
            for r in 0..16 {
                let e = if r == c {
                    Complex64::from_polar(1.0, -d.alpha()[c])
                } else {
                    Complex64::new(0.0, 0.0)
                };
                assert!((u.get(r, c) - e).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn dense_u0_matches_bessel_elements_away_from_wrap() {
        let l = Lattice::new(128).unwrap();
        let d = random_disorder(128, 6);
        let a = 20.0 / 2.89;
        let u = build_dense(&l, &FloquetVariant::new(Model::U0).unwrap(), &d, a).unwrap();
        for col in [40usize, 64, 90] {
            for row in col - 15..col + 15 {
                let q = row as i64 - col as i64;
                let e = Complex64::from_polar(1.0, -d.alpha()[col])
                    * Complex64::i().powi(q.rem_euclid(4) as i32)
                    * bessel_j(q, a);
                assert!((u.get(row, col) - e).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn dense_cap_enforced() {
        let l = Lattice::new(DENSE_CAP + 2).unwrap();
        let d = DisorderRealization::zeros(DENSE_CAP + 2);
        let v = FloquetVariant::new(Model::U0).unwrap();
        assert!(matches!(
            build_dense(&l, &v, &d, 1.0),
            Err(Error::DenseCap { .. })
        ));
    }

    #[test]
    fn symmetric_splittings_give_complex_symmetric_matrices() {
        let l = Lattice::new(64).unwrap();
        let d = random_disorder(64, 7);
        let a = 20.0 / 2.89;
        for model in [Model::U_HALF, Model::V_HALF] {
            let u = build_dense(&l, &FloquetVariant::new(model).unwrap(), &d, a).unwrap();
            assert!(u.max_asymmetry() < 1e-10, "{model:?}");
        }
        let u0 = build_dense(&l, &FloquetVariant::new(Model::U0).unwrap(), &d, a).unwrap();
        assert!(u0.max_asymmetry() > 1e-3);
    }

    #[test]
    fn u0_time_reversal_identity() {
        let l = Lattice::new(64).unwrap();
        let d = random_disorder(64, 8);
        let a = 20.0 / 2.89;
        let u0 = build_dense(&l, &FloquetVariant::new(Model::U0).unwrap(), &d, a).unwrap();
        let ux = build_dense_kick(&l, 1.0, a).unwrap();
        assert!(ux.max_asymmetry() < 1e-12);
        let lhs = &(&ux * &u0.conjugate()) * &ux.adjoint();
        assert!(lhs.max_diff(&u0.adjoint()) < 1e-10);
    }

    #[test]
    fn half_kick_model_differs_from_u0_by_a_position_phase() {
        let l = Lattice::new(128).unwrap();
        let d = random_disorder(128, 9);
        let a = 20.0 / 2.89;
        let j0 = 32;
        let x0 = l.positions()[j0];
        let u0 = FloquetVariant::new(Model::U0).unwrap();
        let vh = FloquetVariant::new(Model::V_HALF).unwrap();
        for t in [1, 2, 7, 40] {
            let s0 = l.position_state_at(j0);
            let mut su = evolve(&l, &s0, &u0, &d, t, a).unwrap();
            let mut sv = evolve(&l, &s0, &vh, &d, t, a).unwrap();
            let mut scratch = l.scratch();
            l.convert(&mut su, Basis::Position, &mut scratch);
            l.convert(&mut sv, Basis::Position, &mut scratch);
            for (j, &x) in l.positions().iter().enumerate() {
                let ph = Complex64::from_polar(1.0, a / 2.0 * (x0.cos() - x.cos()));
                assert!((sv.amplitudes[j] - ph * su.amplitudes[j]).norm() < 1e-10);
            }
        }
    }
}
