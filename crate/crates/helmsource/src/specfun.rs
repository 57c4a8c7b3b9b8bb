//! Bessel/Hankel functions of integer order and the Helmholtz fundamental
//! solution with its normal derivative, in two and three dimensions.
//!
//! Evaluation strategy for `J_n`, `Y_n` on `z > 0`:
//!
//! * `z < 12`: ascending power series (`J_n` directly; `Y_0`, `Y_1` via the
//!   log-series with the Euler–Mascheroni term, then upward recurrence).
//! * `z >= 12`: Hankel's large-argument expansions for orders 0 and 1;
//!   upward recurrence for `J_n` while `n` stays safely below `z`,
//!   Miller's normalized downward recurrence otherwise. `Y_n` recurses
//!   upward in every regime (it is the dominant solution).
//!
//! The kernels:
//!
//! ```text
//! Φ_k(x, y) = (i/4) H_0⁽¹⁾(k r)        (2-D)
//! Φ_k(x, y) = e^{ikr} / (4π r)          (3-D)
//! ```
//!
//! with `r = |x - y|`. Evaluations inside `r_min` (default 1e-10) are hard
//! errors: measurement points must stay off the source box, so a singular
//! query indicates a configuration bug upstream.

use crate::point::{dist, dot, norm, sub, Point};
use crate::{Error, Result};

pub use num_complex::Complex64;

/// Euler–Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Default singularity clip for kernel evaluations.
pub const DEFAULT_R_MIN: f64 = 1e-10;

/// Switch point between the ascending series and the asymptotic expansions.
const SERIES_ASYMPTOTIC_SWITCH: f64 = 12.0;

fn domain_err(what: &'static str, z: f64) -> Error {
    Error::Domain {
        what,
        msg: format!("argument z = {z} must be positive"),
    }
}

/// Bessel function of the first kind `J_n(z)` for integer `n >= 0`, `z > 0`.
pub fn bessel_j(order: u32, z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(domain_err("bessel_j", z));
    }
    if z < SERIES_ASYMPTOTIC_SWITCH {
        Ok(bessel_j_series(order, z))
    } else if f64::from(order) <= z - 2.0 {
        // Upward recurrence from the asymptotic seeds is stable while n < z.
        let mut jm = bessel_j_asymptotic(0, z);
        if order == 0 {
            return Ok(jm);
        }
        let mut j = bessel_j_asymptotic(1, z);
        for n in 1..order {
            let next = 2.0 * f64::from(n) / z * j - jm;
            jm = j;
            j = next;
        }
        Ok(j)
    } else {
        Ok(bessel_j_miller(order, z))
    }
}

/// Bessel function of the second kind `Y_n(z)` for integer `n >= 0`, `z > 0`.
pub fn bessel_y(order: u32, z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(domain_err("bessel_y", z));
    }
    let (y0, y1) = if z < SERIES_ASYMPTOTIC_SWITCH {
        (bessel_y0_series(z), bessel_y1_series(z))
    } else {
        (bessel_y_asymptotic(0, z), bessel_y_asymptotic(1, z))
    };
    match order {
        0 => Ok(y0),
        1 => Ok(y1),
        _ => {
            // Y is the dominant solution: upward recurrence is stable.
            let mut ym = y0;
            let mut y = y1;
            for n in 1..order {
                let next = 2.0 * f64::from(n) / z * y - ym;
                ym = y;
                y = next;
            }
            Ok(y)
        }
    }
}

/// Hankel function of the first kind `H_n⁽¹⁾(z) = J_n(z) + i Y_n(z)`.
///
/// Orders `n >= 2` come out of the three-term upward recurrence, applied
/// per component so the `J` part is never contaminated by the growing `Y`
/// solution when `n` exceeds `z` (the `J` path falls back to the series or
/// Miller's recurrence in that regime).
pub fn hankel1(order: u32, z: f64) -> Result<Complex64> {
    if !(z > 0.0) {
        return Err(domain_err("hankel1", z));
    }
    Ok(Complex64::new(bessel_j(order, z)?, bessel_y(order, z)?))
}

/// Derivative `H_n⁽¹⁾'(z) = H_{n-1}⁽¹⁾(z) - (n/z) H_n⁽¹⁾(z)` (n >= 1),
/// `H_0⁽¹⁾'(z) = -H_1⁽¹⁾(z)`.
pub fn hankel1_derivative(order: u32, z: f64) -> Result<Complex64> {
    if order == 0 {
        return Ok(-hankel1(1, z)?);
    }
    Ok(hankel1(order - 1, z)? - f64::from(order) / z * hankel1(order, z)?)
}

/// Ascending series for `J_n`, any `n >= 0`, reliable for `z < ~16`.
fn bessel_j_series(order: u32, z: f64) -> f64 {
    let zh = 0.5 * z;
    // (z/2)^n / n! built incrementally to dodge overflow at larger n.
    let mut lead = 1.0;
    for i in 1..=order {
        lead *= zh / f64::from(i);
    }
    let zh2 = zh * zh;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for m in 1..300u32 {
        term *= -zh2 / (f64::from(m) * f64::from(m + order));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-280) {
            break;
        }
    }
    lead * sum
}

/// Ascending series for `Y_0` (log form with the Euler–Mascheroni constant).
fn bessel_y0_series(z: f64) -> f64 {
    let zh2 = 0.25 * z * z;
    let mut term = 1.0f64; // (z²/4)^m / (m!)²
    let mut harmonic = 0.0f64;
    let mut sum = 0.0f64;
    for m in 1..300u32 {
        term *= zh2 / (f64::from(m) * f64::from(m));
        harmonic += 1.0 / f64::from(m);
        let contrib = if m % 2 == 1 { term * harmonic } else { -term * harmonic };
        sum += contrib;
        if term * harmonic < 1e-17 * sum.abs().max(1e-280) {
            break;
        }
    }
    let j0 = bessel_j_series(0, z);
    std::f64::consts::FRAC_2_PI * (((0.5 * z).ln() + EULER_GAMMA) * j0 + sum)
}

/// Ascending series for `Y_1`.
fn bessel_y1_series(z: f64) -> f64 {
    let zh2 = 0.25 * z * z;
    // Σ_m (-1)^m (H_m + H_{m+1}) (z²/4)^m / (m! (m+1)!)
    let mut term = 1.0f64;
    let mut h_m = 0.0f64;
    let mut h_m1 = 1.0f64;
    let mut sum = h_m + h_m1;
    for m in 1..300u32 {
        term *= -zh2 / (f64::from(m) * f64::from(m + 1));
        h_m += 1.0 / f64::from(m);
        h_m1 += 1.0 / f64::from(m + 1);
        sum += term * (h_m + h_m1);
        if term.abs() * (h_m + h_m1) < 1e-17 * sum.abs().max(1e-280) {
            break;
        }
    }
    let j1 = bessel_j_series(1, z);
    std::f64::consts::FRAC_2_PI * ((0.5 * z).ln() * j1)
        - std::f64::consts::FRAC_2_PI / z
        - z / (2.0 * std::f64::consts::PI) * (sum - 2.0 * EULER_GAMMA * bessel_e_series(zh2))
}

/// Σ_m (-1)^m (z²/4)^m / (m!(m+1)!), the companion series in the Y_1 form.
fn bessel_e_series(zh2: f64) -> f64 {
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for m in 1..300u32 {
        term *= -zh2 / (f64::from(m) * f64::from(m + 1));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-280) {
            break;
        }
    }
    sum
}

/// Hankel's large-argument expansion, orders 0/1 only, `z >= 12`.
fn asymptotic_pq(order: u32, z: f64) -> (f64, f64) {
    let mu = 4.0 * f64::from(order) * f64::from(order);
    let mut p = 1.0f64;
    let mut q = 0.0f64;
    let mut ak = 1.0f64; // a_j / z^j, signs folded in below
    let mut prev = f64::INFINITY;
    for j in 1..40u32 {
        let twojm1 = f64::from(2 * j - 1);
        ak *= (mu - twojm1 * twojm1) / (8.0 * f64::from(j) * z);
        if ak.abs() >= prev {
            break; // past the optimal truncation point
        }
        prev = ak.abs();
        match j % 4 {
            1 => q += ak,
            2 => p -= ak,
            3 => q -= ak,
            _ => p += ak,
        }
        if ak.abs() < 1e-17 {
            break;
        }
    }
    (p, q)
}

fn bessel_j_asymptotic(order: u32, z: f64) -> f64 {
    let (p, q) = asymptotic_pq(order, z);
    let chi = z - (2.0 * f64::from(order) + 1.0) * std::f64::consts::FRAC_PI_4;
    (2.0 / (std::f64::consts::PI * z)).sqrt() * (p * chi.cos() - q * chi.sin())
}

fn bessel_y_asymptotic(order: u32, z: f64) -> f64 {
    let (p, q) = asymptotic_pq(order, z);
    let chi = z - (2.0 * f64::from(order) + 1.0) * std::f64::consts::FRAC_PI_4;
    (2.0 / (std::f64::consts::PI * z)).sqrt() * (p * chi.sin() + q * chi.cos())
}

/// Miller's normalized downward recurrence for `J_n(z)` when `n ~ z` or
/// larger, where upward recurrence would be contaminated by the `Y`
/// solution. Normalization uses `J_0 + 2 Σ J_{2k} = 1`.
fn bessel_j_miller(order: u32, z: f64) -> f64 {
    let start = {
        let base = f64::from(order).max(z) as u32;
        base + 16 + (40.0 * f64::from(order + 1)).sqrt() as u32
    };
    let mut jp = 0.0f64;
    let mut j = 1e-30f64;
    let mut target = 0.0f64;
    let mut even_sum = 0.0f64;
    for n in (0..=start).rev() {
        let jm = 2.0 * f64::from(n + 1) / z * j - jp;
        jp = j;
        j = jm;
        if n % 2 == 0 {
            even_sum += if n == 0 { j } else { 2.0 * j };
        }
        if n == order {
            target = j;
        }
        // Rescale to dodge overflow on long recurrences.
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp *= 1e-250;
            even_sum *= 1e-250;
            target *= 1e-250;
        }
    }
    target / even_sum
}

/// Arguments of a kernel evaluation: wavenumber, observation point, source
/// point, and (for the Neumann kernel) the unit outward normal at `x`.
#[derive(Debug, Clone, Copy)]
pub struct KernelQuery {
    pub k: f64,
    pub x: Point,
    pub y: Point,
    pub nu: Option<Point>,
    pub r_min: f64,
}

impl KernelQuery {
    pub fn new(k: f64, x: Point, y: Point) -> Self {
        KernelQuery { k, x, y, nu: None, r_min: DEFAULT_R_MIN }
    }

    pub fn with_normal(mut self, nu: Point) -> Self {
        self.nu = Some(nu);
        self
    }

    pub fn with_r_min(mut self, r_min: f64) -> Self {
        self.r_min = r_min;
        self
    }

    fn checked_r(&self) -> Result<f64> {
        let r = dist(self.x, self.y);
        if r <= self.r_min {
            Err(Error::Singularity { r, r_min: self.r_min })
        } else {
            Ok(r)
        }
    }
}

/// Fundamental solution `Φ_k(x, y)` of the Helmholtz operator, given the
/// separation `r = |x - y| > 0` (hot-loop form; no singularity check).
#[inline]
pub fn phi_from_r(k: f64, r: f64, dim: crate::Dim) -> Complex64 {
    match dim {
        crate::Dim::Two => {
            let h = hankel1(0, k * r).expect("k r > 0");
            Complex64::new(-0.25 * h.im, 0.25 * h.re)
        }
        crate::Dim::Three => {
            let kr = k * r;
            let scale = 1.0 / (4.0 * std::f64::consts::PI * r);
            Complex64::new(kr.cos() * scale, kr.sin() * scale)
        }
    }
}

/// Radial derivative `dΦ/dr` at separation `r` (hot-loop form).
#[inline]
pub fn phi_dr_from_r(k: f64, r: f64, dim: crate::Dim) -> Complex64 {
    match dim {
        crate::Dim::Two => {
            // d/dr (i/4) H_0(kr) = -(i k/4) H_1(kr)
            let h1 = hankel1(1, k * r).expect("k r > 0");
            Complex64::new(0.25 * k * h1.im, -0.25 * k * h1.re)
        }
        crate::Dim::Three => {
            // Φ (ik - 1/r)
            phi_from_r(k, r, crate::Dim::Three) * Complex64::new(-1.0 / r, k)
        }
    }
}

/// Fundamental solution `Φ_k(x, y)` with the singularity clip enforced.
pub fn phi(query: &KernelQuery, dim: crate::Dim) -> Result<Complex64> {
    let r = query.checked_r()?;
    Ok(phi_from_r(query.k, r, dim))
}

/// Normal derivative `∂Φ_k/∂ν(x)` at the observation point.
///
/// Both dimensions reduce to `dΦ/dr · ((x - y)·ν)/r`.
pub fn phi_normal_derivative(query: &KernelQuery, dim: crate::Dim) -> Result<Complex64> {
    let r = query.checked_r()?;
    let nu = query.nu.ok_or(Error::Domain {
        what: "phi_normal_derivative",
        msg: "query carries no normal vector".into(),
    })?;
    let proj = dot(sub(query.x, query.y), nu) / r;
    Ok(phi_dr_from_r(query.k, r, dim) * proj)
}

/// Validates that `nu` is a unit vector (used by assembly precondition
/// checks; tolerance 1e-12 on the norm).
pub fn is_unit_normal(nu: Point) -> bool {
    (norm(nu) - 1.0).abs() <= 1e-12
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Dim;
    use approx::assert_relative_eq;

    /// Independent ascending-series oracle for J_n, direct factorial form.
    /// Kept deliberately naive: it shares no code with the implementation.
    fn oracle_j(order: u32, z: f64) -> f64 {
        let zh = 0.5 * z;
        let mut sum = 0.0f64;
        for m in 0..120i64 {
            let mut log_term = 0.0f64;
            for i in 1..=m {
                log_term -= (i as f64).ln();
            }
            for i in 1..=(m + i64::from(order)) {
                log_term -= (i as f64).ln();
            }
            log_term += (2 * m + i64::from(order)) as f64 * zh.ln();
            let term = log_term.exp();
            sum += if m % 2 == 0 { term } else { -term };
        }
        sum
    }

    /// Independent oracle for Y_0 following the textbook log-series.
    fn oracle_y0(z: f64) -> f64 {
        let mut series = 0.0f64;
        let zh2 = 0.25 * z * z;
        let mut pow = 1.0f64;
        let mut fact = 1.0f64;
        let mut harmonic = 0.0f64;
        for m in 1..120u32 {
            pow *= zh2;
            fact *= f64::from(m);
            harmonic += 1.0 / f64::from(m);
            let term = harmonic * pow / (fact * fact);
            series += if m % 2 == 1 { term } else { -term };
        }
        std::f64::consts::FRAC_2_PI
            * (((0.5 * z).ln() + EULER_GAMMA) * oracle_j(0, z) + series)
    }

    #[test]
    fn j0_near_zero_limit() {
        assert_relative_eq!(bessel_j(0, 1e-9).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn j0_at_one_matches_series_oracle() {
        let oracle = oracle_j(0, 1.0);
        assert_relative_eq!(oracle, 0.765_197_686_6, max_relative = 1e-9);
        assert_relative_eq!(bessel_j(0, 1.0).unwrap(), oracle, max_relative = 1e-14);
    }

    #[test]
    fn y0_at_one_matches_series_oracle() {
        let oracle = oracle_y0(1.0);
        assert_relative_eq!(oracle, 0.088_256_964_2, epsilon = 1e-9);
        assert_relative_eq!(bessel_y(0, 1.0).unwrap(), oracle, max_relative = 1e-13);
    }

    #[test]
    fn j_matches_oracle_across_orders_small_z() {
        for order in 0..=16u32 {
            for &z in &[0.05, 0.7, 2.5, 6.0, 11.0] {
                let got = bessel_j(order, z).unwrap();
                let want = oracle_j(order, z);
                assert_relative_eq!(got, want, max_relative = 1e-10, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn branch_seam_against_frozen_references() {
        // Series (below) and asymptotic/recurrence (above) branches, pinned
        // to 25-digit reference values straddling the switch at z = 12.
        #[rustfmt::skip]
        let cases: &[(u32, f64, f64, f64)] = &[
            (0, 11.999_999, 0.047_689_087_349_695_89, -0.225_237_369_733_469_46),
            (0, 12.000_001, 0.047_689_534_243_904_87, -0.225_237_255_535_032_93),
            (1, 11.999_999, -0.223_447_170_800_422_27, -0.057_098_997_781_814_537),
            (1, 12.000_001, -0.223_447_038_180_616_59, -0.057_099_438_739_903_429),
            (7, 11.999_999, -0.170_253_659_717_097_72, 0.189_520_846_372_620_53),
            (7, 12.000_001, -0.170_253_948_537_194_02, 0.189_520_544_670_640_21),
            (14, 11.999_999, 0.065_040_186_001_413_38, -0.701_377_929_274_616_64),
            (14, 12.000_001, 0.065_040_274_536_641_94, -0.701_377_252_667_693_66),
        ];
        for &(order, z, j_ref, y_ref) in cases {
            assert_relative_eq!(bessel_j(order, z).unwrap(), j_ref, max_relative = 1e-10);
            assert_relative_eq!(bessel_y(order, z).unwrap(), y_ref, max_relative = 1e-10);
        }
    }

    #[test]
    fn extreme_arguments_against_frozen_references() {
        #[rustfmt::skip]
        let cases: &[(u32, f64, f64, f64)] = &[
            (0, 1e-3, 0.999_999_750_000_015_62, -4.471_416_611_375_923_3),
            (0, 80.0, -0.069_742_165_512_210_023, -0.055_620_339_089_77),
            (3, 2500.0, 0.015_907_426_871_279_749, 0.001_265_645_106_497_143_3),
            (14, 13.0, 0.118_760_876_673_596_84, -0.463_415_465_984_855_29),
            (20, 12.5, 4.843_377_597_586_543_9e-4, -42.202_052_321_748_141),
            (14, 9000.0, 0.001_117_967_329_920_851_1, -0.008_335_812_185_057_113),
        ];
        for &(order, z, j_ref, y_ref) in cases {
            assert_relative_eq!(bessel_j(order, z).unwrap(), j_ref, max_relative = 1e-10);
            assert_relative_eq!(bessel_y(order, z).unwrap(), y_ref, max_relative = 1e-10);
        }
    }

    #[test]
    fn domain_errors() {
        assert!(bessel_j(0, 0.0).is_err());
        assert!(bessel_j(2, -1.0).is_err());
        assert!(bessel_y(1, 0.0).is_err());
        assert!(hankel1(0, -2.0).is_err());
    }

    #[test]
    fn hankel_is_j_plus_iy() {
        for &z in &[0.3, 1.0, 4.0, 20.0, 150.0] {
            for order in 0..=6u32 {
                let h = hankel1(order, z).unwrap();
                assert_relative_eq!(h.re, bessel_j(order, z).unwrap(), max_relative = 1e-12);
                assert_relative_eq!(h.im, bessel_y(order, z).unwrap(), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn hankel_recurrence_identity() {
        // H_{n+1}(z) = (2n/z) H_n(z) - H_{n-1}(z) at n = 3, z = 2.5.
        let z = 2.5;
        let h2 = hankel1(2, z).unwrap();
        let h3 = hankel1(3, z).unwrap();
        let h4 = hankel1(4, z).unwrap();
        let rhs = 2.0 * 3.0 / z * h3 - h2;
        assert_relative_eq!(h4.re, rhs.re, max_relative = 1e-12);
        assert_relative_eq!(h4.im, rhs.im, max_relative = 1e-12);
    }

    #[test]
    fn wronskian_identity() {
        // J_n(z) Y_n'(z) - J_n'(z) Y_n(z) = 2/(π z).
        for order in 0..=2u32 {
            for i in 0..60 {
                let z = 0.1 * (1000.0f64 / 0.1).powf(i as f64 / 59.0);
                let jm = bessel_j(order.saturating_sub(1), z).unwrap();
                let jp = bessel_j(order + 1, z).unwrap();
                let ym = bessel_y(order.saturating_sub(1), z).unwrap();
                let yp = bessel_y(order + 1, z).unwrap();
                let (jd, yd) = if order == 0 {
                    (-jp, -yp)
                } else {
                    (0.5 * (jm - jp), 0.5 * (ym - yp))
                };
                let j = bessel_j(order, z).unwrap();
                let y = bessel_y(order, z).unwrap();
                let w = j * yd - jd * y;
                let expected = 2.0 / (std::f64::consts::PI * z);
                assert_relative_eq!(w, expected, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn hankel_magnitude_decreases() {
        let mut prev = hankel1(0, 0.5).unwrap().norm();
        for i in 1..200 {
            let z = 0.5 + 49.5 * (i as f64) / 199.0;
            let cur = hankel1(0, z).unwrap().norm();
            assert!(cur < prev, "|H_0| not decreasing at z = {z}");
            prev = cur;
        }
    }

    #[test]
    fn phi_3d_closed_form() {
        // k = 1, r = 1: (cos 1 + i sin 1)/(4π).
        let q = KernelQuery::new(1.0, [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]);
        let v = phi(&q, Dim::Three).unwrap();
        let s = 1.0 / (4.0 * std::f64::consts::PI);
        assert_relative_eq!(v.re, 1.0f64.cos() * s, max_relative = 1e-14);
        assert_relative_eq!(v.im, 1.0f64.sin() * s, max_relative = 1e-14);
        assert_relative_eq!(v.re, 0.04300, epsilon = 1e-5);
        assert_relative_eq!(v.im, 0.06697, epsilon = 1e-5);
    }

    #[test]
    fn phi_2d_from_hankel_oracle() {
        // (i/4) H_0(1) with H_0(1) from the two series oracles.
        let q = KernelQuery::new(1.0, [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]);
        let v = phi(&q, Dim::Two).unwrap();
        let h = Complex64::new(oracle_j(0, 1.0), oracle_y0(1.0));
        let want = Complex64::new(0.0, 0.25) * h;
        assert_relative_eq!(v.re, want.re, max_relative = 1e-12);
        assert_relative_eq!(v.im, want.im, max_relative = 1e-12);
        assert_relative_eq!(v.re, -0.02206, epsilon = 1e-5);
        assert_relative_eq!(v.im, 0.19130, epsilon = 1e-5);
    }

    #[test]
    fn phi_reciprocity() {
        let x = [0.3, -0.2, 0.9];
        let y = [-0.5, 0.4, 0.1];
        for dim in [Dim::Two, Dim::Three] {
            let (x, y) = if dim == Dim::Two {
                ([0.3, -0.2, 0.0], [-0.5, 0.4, 0.0])
            } else {
                (x, y)
            };
            let a = phi(&KernelQuery::new(3.0, x, y), dim).unwrap();
            let b = phi(&KernelQuery::new(3.0, y, x), dim).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn phi_singularity_clip() {
        let q = KernelQuery::new(1.0, [0.0; 3], [1e-11, 0.0, 0.0]);
        assert!(matches!(phi(&q, Dim::Three), Err(Error::Singularity { .. })));
    }

    #[test]
    fn helmholtz_residual_via_finite_differences() {
        // (Δ + k²) Φ must vanish away from the singularity. Central 5-point
        // (2-D) / 7-point (3-D) Laplacian with h = 1e-4 at r = 0.7, k = 5.
        let k = 5.0;
        let h = 1e-4;
        let y = [0.0; 3];
        for dim in [Dim::Two, Dim::Three] {
            let x = match dim {
                Dim::Two => [0.7 / 2f64.sqrt(), 0.7 / 2f64.sqrt(), 0.0],
                Dim::Three => [0.7 / 3f64.sqrt(), 0.7 / 3f64.sqrt(), 0.7 / 3f64.sqrt()],
            };
            let eval = |p: Point| phi(&KernelQuery::new(k, p, y), dim).unwrap();
            let center = eval(x);
            let mut lap = Complex64::new(0.0, 0.0);
            for axis in 0..dim.n() {
                let mut xp = x;
                let mut xm = x;
                xp[axis] += h;
                xm[axis] -= h;
                lap += eval(xp) + eval(xm) - 2.0 * center;
            }
            lap /= h * h;
            let residual = lap + k * k * center;
            assert!(
                residual.norm() <= 1e-4 * center.norm(),
                "{dim:?}: residual {} vs |Φ| {}",
                residual.norm(),
                center.norm()
            );
        }
    }

    #[test]
    fn normal_derivative_orthogonal_normal_vanishes() {
        let q = KernelQuery::new(2.0, [1.0, 0.0, 0.0], [0.0, 0.0, 0.0])
            .with_normal([0.0, 1.0, 0.0]);
        let v = phi_normal_derivative(&q, Dim::Three).unwrap();
        assert_eq!(v, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn normal_derivative_3d_direct_substitution() {
        // x - y = (0.5, 0, 0), ν = (1,0,0), k = 2:
        // e^{i}/(4π·0.5)·(2i - 2)·1
        let q = KernelQuery::new(2.0, [0.5, 0.0, 0.0], [0.0, 0.0, 0.0])
            .with_normal([1.0, 0.0, 0.0]);
        let v = phi_normal_derivative(&q, Dim::Three).unwrap();
        let want = Complex64::new(1.0f64.cos(), 1.0f64.sin())
            / (4.0 * std::f64::consts::PI * 0.5)
            * Complex64::new(-2.0, 2.0);
        assert_relative_eq!(v.re, want.re, max_relative = 1e-13);
        assert_relative_eq!(v.im, want.im, max_relative = 1e-13);
    }

    #[test]
    fn normal_derivative_matches_directional_finite_difference() {
        // 100 randomized queries per dimension against a central difference
        // along ν with h = 1e-6.
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for dim in [Dim::Two, Dim::Three] {
            for _ in 0..100 {
                let d = dim.n();
                let mut x = [0.0f64; 3];
                let mut y = [0.0f64; 3];
                let mut nu = [0.0f64; 3];
                for i in 0..d {
                    x[i] = rng.random_range(1.0..2.0);
                    y[i] = rng.random_range(-0.5..0.5);
                    nu[i] = rng.random_range(-1.0..1.0);
                }
                let n = norm(nu);
                for v in nu.iter_mut() {
                    *v /= n;
                }
                let k = rng.random_range(0.5..30.0);
                let q = KernelQuery::new(k, x, y).with_normal(nu);
                let analytic = phi_normal_derivative(&q, dim).unwrap();
                let h = 1e-6;
                let xp = crate::point::add(x, scale_pt(nu, h));
                let xm = crate::point::add(x, scale_pt(nu, -h));
                let fd = (phi(&KernelQuery::new(k, xp, y), dim).unwrap()
                    - phi(&KernelQuery::new(k, xm, y), dim).unwrap())
                    / (2.0 * h);
                let denom = analytic.norm().max(1e-12);
                assert!(
                    (analytic - fd).norm() / denom < 1e-6,
                    "{dim:?} rel err {}",
                    (analytic - fd).norm() / denom
                );
            }
        }
    }

    fn scale_pt(p: Point, s: f64) -> Point {
        [p[0] * s, p[1] * s, p[2] * s]
    }
}
