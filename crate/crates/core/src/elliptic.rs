//! Jacobi elliptic functions and complete elliptic integrals.
//!
//! Everything here is computed from the arithmetic-geometric mean: `K` and
//! `E` by the AGM itself, `sn`, `cn`, `dn` by descending Landen
//! transformations, and the Jacobi Zeta function through its nome series.
//! The modulus convention is `k` (not the parameter `m = k^2`).

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Largest modulus accepted when a path approaches `k -> 1`.
pub const MAX_MODULUS: f64 = 1.0 - 1e-12;

const AGM_MAX_STEPS: usize = 64;

/// Elliptic modulus `k` in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct EllipticModulus(f64);

impl EllipticModulus {
    pub fn new(k: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&k) {
            return Err(Error::Domain(format!("elliptic modulus must lie in [0, 1), got {k}")));
        }
        Ok(Self(k))
    }

    /// Clamps `k` into `[0, MAX_MODULUS]`.
    pub fn capped(k: f64) -> Self {
        Self(k.clamp(0.0, MAX_MODULUS))
    }

    pub fn k(self) -> f64 {
        self.0
    }

    /// Complementary modulus `k' = sqrt(1 - k^2)`.
    pub fn complement(self) -> f64 {
        ((1.0 - self.0) * (1.0 + self.0)).sqrt()
    }

    pub fn big_k(self) -> f64 {
        agm_k(self.0, self.complement())
    }

    pub fn big_e(self) -> f64 {
        agm_e(self.0, self.complement())
    }

    /// Complete integral of the first kind at the complementary modulus.
    pub fn big_k_prime(self) -> f64 {
        agm_k(self.complement(), self.0)
    }

    /// Nome `q = exp(-pi K'/K)`.
    pub fn nome(self) -> f64 {
        if self.0 == 0.0 {
            return 0.0;
        }
        (-PI * self.big_k_prime() / self.big_k()).exp()
    }
}

fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..AGM_MAX_STEPS {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = next;
    }
    a
}

fn agm_k(_k: f64, kp: f64) -> f64 {
    PI / (2.0 * agm(1.0, kp))
}

fn agm_e(k: f64, kp: f64) -> f64 {
    if kp == 0.0 {
        return 1.0;
    }
    let (mut a, mut b) = (1.0, kp);
    let mut c = k;
    let mut weight = 0.5;
    let mut sum = weight * c * c;
    for _ in 0..AGM_MAX_STEPS {
        if c.abs() <= 1e-17 {
            break;
        }
        c = 0.5 * (a - b);
        let next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = next;
        weight *= 2.0;
        sum += weight * c * c;
    }
    PI / (2.0 * a) * (1.0 - sum)
}

/// Complete elliptic integral of the first kind, `0 <= k < 1`.
pub fn complete_k(k: f64) -> Result<f64> {
    Ok(EllipticModulus::new(k)?.big_k())
}

/// Complete elliptic integral of the second kind, `0 <= k <= 1`.
pub fn complete_e(k: f64) -> Result<f64> {
    if k == 1.0 {
        return Ok(1.0);
    }
    if !(0.0..1.0).contains(&k) {
        return Err(Error::Domain(format!("complete_e requires 0 <= k <= 1, got {k}")));
    }
    Ok(agm_e(k, ((1.0 - k) * (1.0 + k)).sqrt()))
}

/// `(sn, cn, dn)` of `u` at modulus `k` by descending Landen transformation.
pub fn jacobi_sn_cn_dn(u: f64, k: EllipticModulus) -> (f64, f64, f64) {
    let k = k.k();
    if k == 0.0 {
        return (u.sin(), u.cos(), 1.0);
    }
    let mut a = [0.0f64; AGM_MAX_STEPS + 1];
    let mut c = [0.0f64; AGM_MAX_STEPS + 1];
    a[0] = 1.0;
    c[0] = k;
    let mut b = ((1.0 - k) * (1.0 + k)).sqrt();
    let mut n = 0;
    while c[n].abs() > 1e-16 * a[n] && n < AGM_MAX_STEPS {
        a[n + 1] = 0.5 * (a[n] + b);
        c[n + 1] = 0.5 * (a[n] - b);
        b = (a[n] * b).sqrt();
        n += 1;
    }
    let mut phi = (2.0f64).powi(n as i32) * a[n] * u;
    for j in (1..=n).rev() {
        phi = 0.5 * (phi + (c[j] / a[j] * phi.sin()).asin());
    }
    let (sn, cn) = phi.sin_cos();
    let dn = (1.0 - k * k * sn * sn).sqrt();
    (sn, cn, dn)
}

/// Sine-series coefficients `b_n`, `n = 1..=n_max`, of the Jacobi Zeta
/// function: `Z(u; k) = sum_n b_n sin(n pi u / K)`.
pub fn zeta_fourier_coefficients(k: EllipticModulus, n_max: usize) -> Result<Vec<f64>> {
    if n_max < 1 {
        return Err(Error::Domain("zeta series needs n_max >= 1".into()));
    }
    if k.k() <= 0.0 {
        return Err(Error::Domain("zeta series needs 0 < k < 1".into()));
    }
    let q = k.nome();
    let scale = 2.0 * PI / k.big_k();
    let mut qn = 1.0;
    Ok((1..=n_max)
        .map(|_| {
            qn *= q;
            scale * qn / (1.0 - qn * qn)
        })
        .collect())
}

/// Evaluates the Zeta sine series at `u`.
pub fn zeta_from_series(coefficients: &[f64], k: EllipticModulus, u: f64) -> f64 {
    let w = PI * u / k.big_k();
    coefficients
        .iter()
        .enumerate()
        .map(|(i, b)| b * ((i + 1) as f64 * w).sin())
        .sum()
}
