//! Complete elliptic integrals and Jacobi elliptic functions via the
//! arithmetic–geometric mean.
//!
//! The modulus is carried together with its complementary parameter
//! `k'² = 1 − k²`, so moduli extremely close to one (long-period cnoidal
//! waves) keep full relative precision in `k'`.

use std::f64::consts::FRAC_PI_2;

use crate::{Error, Result};

const AGM_MAX_ITER: usize = 64;
/// Below this parameter the Jacobi functions use the small-`m` trigonometric
/// expansion; its O(m²) error is then under machine precision.
const SMALL_PARAMETER: f64 = 1e-8;

/// Elliptic modulus `k ∈ [0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticModulus {
    k: f64,
    k2: f64,
    kc2: f64,
}

impl EllipticModulus {
    pub fn new(k: f64) -> Result<Self> {
        if !(k.is_finite() && (0.0..1.0).contains(&k)) {
            return Err(Error::Domain(format!("elliptic modulus k = {k} outside [0, 1)")));
        }
        let k2 = k * k;
        Ok(Self { k, k2, kc2: (1.0 - k) * (1.0 + k) })
    }

    /// Builds the modulus from the parameter `m = k²`.
    pub fn from_k2(k2: f64) -> Result<Self> {
        if !(k2.is_finite() && (0.0..1.0).contains(&k2)) {
            return Err(Error::Domain(format!("elliptic parameter k² = {k2} outside [0, 1)")));
        }
        Ok(Self { k: k2.sqrt(), k2, kc2: 1.0 - k2 })
    }

    /// Builds the modulus from the complementary parameter `k'² = 1 − k²`,
    /// which is the accurate quantity when `k` is close to one.
    pub fn from_complement(kc2: f64) -> Result<Self> {
        if !(kc2.is_finite() && kc2 > 0.0 && kc2 <= 1.0) {
            return Err(Error::Domain(format!("complementary parameter k'² = {kc2} outside (0, 1]")));
        }
        let k2 = 1.0 - kc2;
        Ok(Self { k: k2.sqrt(), k2, kc2 })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn k2(&self) -> f64 {
        self.k2
    }

    /// Complementary parameter `k'² = 1 − k²`.
    pub fn kc2(&self) -> f64 {
        self.kc2
    }

    /// Complementary modulus `k' = √(1 − k²)`.
    pub fn complement(&self) -> Self {
        Self { k: self.kc2.sqrt(), k2: self.kc2, kc2: self.k2 }
    }
}

/// Complete elliptic integrals of the first and second kind.
#[derive(Debug, Clone, Copy, PartialEq)]
#[allow(non_snake_case)]
pub struct EllipticPair {
    pub K: f64,
    pub E: f64,
}

/// `K(k)` and `E(k)` from the AGM of `(1, k')`.
///
/// `E = K·(1 − Σ 2^{n−1} c_n²)` with `c_0 = k`, `c_{n+1} = (a_n − b_n)/2`.
pub fn complete_elliptic(k: EllipticModulus) -> EllipticPair {
    let mut a = 1.0_f64;
    let mut b = k.kc2.sqrt();
    let mut sum = 0.5 * k.k2;
    let mut pow2 = 0.5;
    for _ in 0..AGM_MAX_ITER {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let c = 0.5 * (a - b);
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
        pow2 *= 2.0;
        sum += pow2 * c * c;
    }
    let big_k = FRAC_PI_2 / a;
    EllipticPair { K: big_k, E: big_k * (1.0 - sum) }
}

/// Jacobi elliptic functions `(sn, cn, dn)` at `x`.
pub fn jacobi(x: f64, k: EllipticModulus) -> Result<(f64, f64, f64)> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("non-finite argument x = {x}")));
    }
    let quarter = complete_elliptic(k).K;
    // sn and cn have real period 4K; reduce to [−2K, 2K].
    let period = 4.0 * quarter;
    let u = x - period * (x / period).round();

    if k.k2 < SMALL_PARAMETER {
        return Ok(small_parameter(u, k.k2));
    }

    let mut a = [0.0_f64; AGM_MAX_ITER + 1];
    let mut c = [0.0_f64; AGM_MAX_ITER + 1];
    a[0] = 1.0;
    c[0] = k.k;
    let mut b = k.kc2.sqrt();
    let mut n = 0;
    while n < AGM_MAX_ITER && (c[n]).abs() > 1e-16 * a[n] {
        a[n + 1] = 0.5 * (a[n] + b);
        c[n + 1] = 0.5 * (a[n] - b);
        b = (a[n] * b).sqrt();
        n += 1;
    }
    let mut phi = (2.0_f64).powi(n as i32) * a[n] * u;
    for j in (1..=n).rev() {
        phi = 0.5 * (phi + (c[j] / a[j] * phi.sin()).clamp(-1.0, 1.0).asin());
    }
    let (sn, cn) = phi.sin_cos();
    let dn = (1.0 - k.k2 * sn * sn).max(0.0).sqrt();
    Ok((sn, cn, dn))
}

/// First-order expansion in `m = k²` about the circular functions.
fn small_parameter(u: f64, m: f64) -> (f64, f64, f64) {
    let (s, c) = u.sin_cos();
    let corr = 0.25 * m * (u - s * c);
    let sn = s - corr * c;
    let cn = c + corr * s;
    let dn = 1.0 - 0.5 * m * s * s;
    (sn, cn, dn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_gauss_kronrod;
    use std::f64::consts::PI;

    // K and E by quadrature of the defining integrals in the θ = asin t form.
    fn quadrature_pair(k: f64) -> (f64, f64) {
        let k2 = k * k;
        let kk = adaptive_gauss_kronrod(|t: f64| 1.0 / (1.0 - k2 * t.sin().powi(2)).sqrt(), 0.0, FRAC_PI_2, 1e-15);
        let ee = adaptive_gauss_kronrod(|t: f64| (1.0 - k2 * t.sin().powi(2)).sqrt(), 0.0, FRAC_PI_2, 1e-15);
        (kk, ee)
    }

    // Fourier (theta-quotient) series, with K and K' from quadrature.
    fn series_triple(x: f64, k: f64) -> (f64, f64, f64) {
        let (kk, _) = quadrature_pair(k);
        let (kkp, _) = quadrature_pair((1.0 - k * k).sqrt());
        let q = (-PI * kkp / kk).exp();
        let v = PI * x / (2.0 * kk);
        let mut sn = 0.0;
        let mut cn = 0.0;
        let mut dn = PI / (2.0 * kk);
        for n in 0..40 {
            let nf = n as f64;
            let qh = q.powf(nf + 0.5);
            let q2 = q.powi(2 * n + 1);
            sn += qh / (1.0 - q2) * ((2.0 * nf + 1.0) * v).sin();
            cn += qh / (1.0 + q2) * ((2.0 * nf + 1.0) * v).cos();
            if n >= 1 {
                let qn = q.powi(n);
                dn += 2.0 * PI / kk * qn / (1.0 + qn * qn) * (2.0 * nf * v).cos();
            }
        }
        let pref = 2.0 * PI / (k * kk);
        (pref * sn, pref * cn, dn)
    }

    #[test]
    fn degenerate_modulus_gives_half_pi() {
        let p = complete_elliptic(EllipticModulus::new(0.0).unwrap());
        assert_eq!(p.K, FRAC_PI_2);
        assert_eq!(p.E, FRAC_PI_2);
    }

    #[test]
    fn k_diverges_towards_one() {
        let a = complete_elliptic(EllipticModulus::new(0.99).unwrap()).K;
        let b = complete_elliptic(EllipticModulus::new(0.9999).unwrap()).K;
        assert!(b > a);
        assert!(b > 5.0);
    }

    #[test]
    fn matches_quadrature_at_half() {
        let p = complete_elliptic(EllipticModulus::new(0.5).unwrap());
        let (kk, ee) = quadrature_pair(0.5);
        assert!((p.K - kk).abs() <= 1e-12 * kk, "{} vs {}", p.K, kk);
        assert!((p.E - ee).abs() <= 1e-12 * ee, "{} vs {}", p.E, ee);
    }

    #[test]
    fn domain_errors() {
        assert!(EllipticModulus::new(1.0).is_err());
        assert!(EllipticModulus::new(-0.1).is_err());
        assert!(EllipticModulus::new(f64::NAN).is_err());
        assert!(EllipticModulus::from_k2(1.0).is_err());
        assert!(EllipticModulus::from_complement(0.0).is_err());
        let k = EllipticModulus::new(0.3).unwrap();
        assert!(jacobi(f64::INFINITY, k).is_err());
        assert!(jacobi(f64::NAN, k).is_err());
    }

    #[test]
    fn origin_values() {
        for &k in &[0.0, 1e-5, 0.3, 0.9, 0.999999] {
            let (sn, cn, dn) = jacobi(0.0, EllipticModulus::new(k).unwrap()).unwrap();
            assert_eq!((sn, cn, dn), (0.0, 1.0, 1.0));
        }
    }

    #[test]
    fn circular_limit() {
        let k = EllipticModulus::new(0.0).unwrap();
        for &x in &[0.3, 1.0, 2.5, -4.0, 17.0] {
            let (sn, cn, dn) = jacobi(x, k).unwrap();
            assert!((sn - x.sin()).abs() < 1e-14);
            assert!((cn - x.cos()).abs() < 1e-14);
            assert_eq!(dn, 1.0);
        }
    }

    #[test]
    fn matches_theta_series() {
        let (sn, cn, dn) = jacobi(1.0, EllipticModulus::new(0.5).unwrap()).unwrap();
        assert!((sn * sn + cn * cn - 1.0).abs() < 1e-13);
        assert!((dn * dn + 0.25 * sn * sn - 1.0).abs() < 1e-13);
        let (s2, c2, d2) = series_triple(1.0, 0.5);
        assert!((sn - s2).abs() < 1e-13, "{sn} {s2}");
        assert!((cn - c2).abs() < 1e-13, "{cn} {c2}");
        assert!((dn - d2).abs() < 1e-13, "{dn} {d2}");
    }

    #[test]
    fn periodicity() {
        for &k in &[0.1, 0.5, 0.9, 0.99] {
            let m = EllipticModulus::new(k).unwrap();
            let kk = complete_elliptic(m).K;
            for &x in &[0.1, 0.77, 1.9, -2.3] {
                let c0 = jacobi(x, m).unwrap().1;
                let c2 = jacobi(x + 2.0 * kk, m).unwrap().1;
                let c4 = jacobi(x + 4.0 * kk, m).unwrap().1;
                assert!((c2 + c0).abs() < 1e-12);
                assert!((c4 - c0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn near_one_complement_keeps_precision() {
        let m = EllipticModulus::from_complement(1e-40).unwrap();
        let kk = complete_elliptic(m).K;
        // K ≈ ln(4/k') for k' → 0.
        let expect = (4.0_f64).ln() + 20.0 * (10.0_f64).ln();
        assert!((kk - expect).abs() < 1e-12 * expect);
        // cn(x) → sech(x) in the solitary limit.
        let (_, cn, _) = jacobi(1.3, m).unwrap();
        assert!((cn - 1.0 / 1.3_f64.cosh()).abs() < 1e-13);
    }
}
