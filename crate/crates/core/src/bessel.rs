//! Integer-order Bessel functions of the first kind.
//!
//! Small arguments use the power series; everything else uses Miller's
//! downward recurrence normalized by `J0 + 2 sum_k J_2k = 1`.

/// `J_n(z)` for any integer order and real argument.
pub fn bessel_j(n: i64, z: f64) -> f64 {
    let order = n.unsigned_abs() as usize;
    let mut v = *bessel_j_upto(order, z.abs()).last().unwrap();
    // J_{-n} = (-1)^n J_n and J_n(-z) = (-1)^n J_n(z)
    if n < 0 && order % 2 == 1 {
        v = -v;
    }
    if z < 0.0 && order % 2 == 1 {
        v = -v;
    }
    v
}

/// `[J_0(z), ..., J_nmax(z)]` for `z >= 0`.
pub fn bessel_j_upto(nmax: usize, z: f64) -> Vec<f64> {
    assert!(
        z >= 0.0 && z.is_finite(),
        "bessel_j_upto needs a finite z >= 0, got {z}"
    );
    if z == 0.0 {
        let mut out = vec![0.0; nmax + 1];
        out[0] = 1.0;
        return out;
    }
    if z <= 1.0 {
        return (0..=nmax).map(|n| series(n, z)).collect();
    }
    miller(nmax, z)
}

fn series(n: usize, z: f64) -> f64 {
    let h = z / 2.0;
    let mut lead = 1.0;
    for i in 1..=n {
        lead *= h / i as f64;
    }
    if lead == 0.0 {
        return 0.0;
    }
    let mut term = lead;
    let mut sum = lead;
    let h2 = h * h;
    for k in 1..40 {
        term *= -h2 / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

fn miller(nmax: usize, z: f64) -> Vec<f64> {
    const BIG: f64 = 1e200;
    let top = nmax.max(z.ceil() as usize);
    let mut start = top + 40 + (2.0 * (top as f64).sqrt()) as usize;
    if start % 2 == 1 {
        start += 1;
    }
    let mut out = vec![0.0; nmax + 1];
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-300; // J_k
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        if k <= nmax {
            out[k] = cur;
        }
        if k % 2 == 0 {
            norm += 2.0 * cur;
        }
        let prev = 2.0 * k as f64 / z * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > BIG {
            cur /= BIG;
            next /= BIG;
            norm /= BIG;
            for v in out.iter_mut() {
                *v /= BIG;
            }
        }
    }
    out[0] = cur;
    norm += cur;
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    /// Trapezoid rule on `J_n(z) = (1/2pi) int cos(n t - z sin t) dt`; exact up
    /// to aliasing terms `J_{M +- n}(z)` for `M` nodes.
    fn integral_oracle(n: i64, z: f64) -> f64 {
        let m = 4096;
        (0..m)
            .map(|i| {
                let t = TAU * i as f64 / m as f64;
                (n as f64 * t - z * t.sin()).cos()
            })
            .sum::<f64>()
            / m as f64
    }

    #[test]
    fn values_at_zero() {
        assert_eq!(bessel_j(0, 0.0), 1.0);
        assert_eq!(bessel_j(1, 0.0), 0.0);
        assert_eq!(bessel_j(7, 0.0), 0.0);
    }

    #[test]
    fn reference_values() {
        assert!((bessel_j(0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-15);
        assert!((bessel_j(1, 1.0) - 0.440_050_585_744_933_5).abs() < 1e-15);
        assert!((bessel_j(0, 10.0) - (-0.245_935_764_451_348_3)).abs() < 1e-14);
        assert!((bessel_j(5, 10.0) - (-0.234_061_528_186_793_6)).abs() < 1e-14);
    }

    #[test]
    fn j0_at_reference_kick() {
        let z = 20.0 / 2.89;
        let oracle = integral_oracle(0, z);
        assert!((bessel_j(0, z) - oracle).abs() < 1e-13);
        assert!((bessel_j(0, 6.9204) - 0.298751).abs() < 1e-6);
    }

    #[test]
    fn matches_integral_oracle_over_domain() {
        for &z in &[
            0.3, 1.0, 1.7, 3.46, 6.92, 13.84, 27.68, 55.0, 99.9, 150.0, 200.0,
        ] {
            for n in [0i64, 1, 2, 3, 5, 10, 25, 50, 100, 150, 200] {
                let got = bessel_j(n, z);
                let want = integral_oracle(n, z);
                assert!((got - want).abs() < 1e-12, "J_{n}({z}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn negative_order_and_argument() {
        for n in 1..8i64 {
            let s = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert!((bessel_j(-n, 4.2) - s * bessel_j(n, 4.2)).abs() < 1e-15);
            assert!((bessel_j(n, -4.2) - s * bessel_j(n, 4.2)).abs() < 1e-15);
        }
    }

    #[test]
    fn neumann_sum_rule() {
        for &z in &[0.5, 6.92, 80.0] {
            let j = bessel_j_upto(300, z);
            let s: f64 = j[0] * j[0] + 2.0 * j[1..].iter().map(|v| v * v).sum::<f64>();
            assert!((s - 1.0).abs() < 1e-13);
        }
    }
}
