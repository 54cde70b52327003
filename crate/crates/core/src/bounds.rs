//! Confidence radii from second and fourth central moments.
//!
//! For a level `γ` the three families give the half-width of an interval
//! centered at the PCE mean:
//!
//! | family  | radius                       |
//! |---------|------------------------------|
//! | `cheb2` | `√(μ₂ / (1−γ))`              |
//! | `cheb4` | `(μ₄ / (1−γ))^{1/4}`         |
//! | `gauss` | `Φ⁻¹((1+γ)/2) · √μ₂`         |
//!
//! The Chebyshev radii hold for any distribution with the given moments; the
//! Gaussian radius is exact only for normal outputs.

use std::fmt;
use std::str::FromStr;

use libm::erfc;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundFamily {
    Cheb2,
    Cheb4,
    Gauss,
}

impl BoundFamily {
    pub const ALL: [BoundFamily; 3] = [BoundFamily::Cheb2, BoundFamily::Cheb4, BoundFamily::Gauss];

    pub fn name(&self) -> &'static str {
        match self {
            BoundFamily::Cheb2 => "cheb2",
            BoundFamily::Cheb4 => "cheb4",
            BoundFamily::Gauss => "gauss",
        }
    }
}

impl fmt::Display for BoundFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cheb2" => Ok(BoundFamily::Cheb2),
            "cheb4" => Ok(BoundFamily::Cheb4),
            "gauss" => Ok(BoundFamily::Gauss),
            other => Err(Error::Domain(format!(
                "unknown bound family `{other}` (expected cheb2, cheb4 or gauss)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    pub family: BoundFamily,
    pub gamma: f64,
}

impl BoundSpec {
    pub fn new(family: BoundFamily, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(BoundSpec { family, gamma })
    }
}

pub fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "confidence level {gamma} not in (0, 1)"
        )))
    }
}

/// Interval half-width for the given variance `mu2` and fourth central moment `mu4`.
pub fn radius(spec: &BoundSpec, mu2: f64, mu4: f64) -> Result<f64> {
    check_gamma(spec.gamma)?;
    if !(mu2 >= 0.0 && mu2.is_finite()) {
        return Err(Error::Domain(format!(
            "variance {mu2} must be finite and >= 0"
        )));
    }
    let tail = 1.0 - spec.gamma;
    match spec.family {
        BoundFamily::Cheb2 => Ok((mu2 / tail).sqrt()),
        BoundFamily::Cheb4 => {
            // μ₄ ≥ μ₂² up to rounding
            if !(mu4.is_finite() && mu4 >= mu2 * mu2 * (1.0 - 1e-9)) {
                return Err(Error::Domain(format!(
                    "fourth moment {mu4} below squared variance {}",
                    mu2 * mu2
                )));
            }
            Ok((mu4 / tail).powf(0.25))
        }
        BoundFamily::Gauss => Ok(normal_quantile((1.0 + spec.gamma) / 2.0)? * mu2.sqrt()),
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    // evaluate erfc on the non-positive side, where it is small and accurate
    if x < 0.0 {
        0.5 * erfc(-x / std::f64::consts::SQRT_2)
    } else {
        1.0 - 0.5 * erfc(x / std::f64::consts::SQRT_2)
    }
}

/// Inverse standard normal CDF: rational approximation refined by one Halley step.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("probability {p} not in (0, 1)")));
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    Ok(x - u / (1.0 + x * u / 2.0))
}

/// Whether the fourth-order interval is no wider than the second-order one:
/// `μ₄ ≤ μ₂² / (1−γ)`.
pub fn cheb4_is_tighter(mu2: f64, mu4: f64, gamma: f64) -> bool {
    mu4 <= mu2 * mu2 / (1.0 - gamma)
}
