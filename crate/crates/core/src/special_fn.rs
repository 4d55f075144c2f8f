//! Special functions and the exact odds-ratio components for the three
//! non-Gaussian confounder cases.

use std::f64::consts::{E, PI};

use crate::error::{Error, Result};

/// ζ(5).
pub const ZETA5: f64 = 1.036_927_755_143_37;

const PI2_6: f64 = PI * PI / 6.0;

/// Logistic function, evaluated without overflow for any finite input.
#[inline]
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

// B_{2k} / (2k+1)! for k = 1..=10.
const BERNOULLI_COEFFS: [f64; 10] = [
    1.0 / 36.0,
    -1.0 / 3600.0,
    1.0 / 211_680.0,
    -1.0 / 10_886_400.0,
    1.0 / 526_901_760.0,
    -4.064_761_645_144_226e-11,
    8.921_691_020_456_453e-13,
    -1.993_929_586_072_108e-14,
    4.518_980_029_619_918e-16,
    -1.035_651_761_218_125e-17,
];

// Series in u = -ln(1-z); converges quickly for z in [-1, 1/2].
fn dilog_bernoulli(z: f64) -> f64 {
    let u = -(-z).ln_1p();
    let u2 = u * u;
    let mut sum = u - u2 / 4.0;
    let mut pow = u * u2;
    for c in BERNOULLI_COEFFS {
        sum += c * pow;
        pow *= u2;
    }
    sum
}

/// Real dilogarithm Li₂(z) for z ≤ 1.
pub fn dilog(z: f64) -> Result<f64> {
    if !z.is_finite() || z > 1.0 {
        return Err(Error::Domain(format!(
            "dilog is real only for z <= 1 (got {z})"
        )));
    }
    Ok(if z == 1.0 {
        PI2_6
    } else if z < -1.0 {
        let l = (-z).ln();
        -PI2_6 - 0.5 * l * l - dilog_bernoulli(1.0 / z)
    } else if z <= 0.5 {
        dilog_bernoulli(z)
    } else {
        // reflection
        PI2_6 - z.ln() * (-z).ln_1p() - dilog_bernoulli(1.0 - z)
    })
}

/// Li₅(z) by direct series, |z| < 1.
pub fn polylog5(z: f64) -> Result<f64> {
    if !(z.abs() < 1.0) {
        return Err(Error::Domain(format!(
            "polylog5 series requires |z| < 1 (got {z})"
        )));
    }
    let mut sum = 0.0;
    let mut pow = z;
    let mut k = 1.0f64;
    loop {
        let term = pow / k.powi(5);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs().max(f64::MIN_POSITIVE) || pow == 0.0 {
            break;
        }
        pow *= z;
        k += 1.0;
    }
    Ok(sum)
}

/// ζ(5) by partial sum plus Euler–Maclaurin tail.
pub fn zeta5_summed() -> f64 {
    let n = 100u32;
    let partial: f64 = (1..=n).rev().map(|k| (k as f64).powi(-5)).sum();
    let nf = n as f64;
    partial + nf.powi(-4) / 4.0 - nf.powi(-5) / 2.0 + 5.0 * nf.powi(-6) / 12.0
}

/// The three independent-confounder cases with exact odds-ratio components.
///
/// All share P(Y=1|A,C1,C2) = expit(-A + C1/2 + C2/2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedFormCase {
    /// C1 ~ U(-2, 2), C2 ~ U(-4, 0).
    UniformCase,
    /// C1 ~ Exp(1), C2 ~ Exp(2).
    ExponentialCase,
    /// C1 ~ Ga(1, scale 2), C2 ~ Ga(4, scale 2), so (C1 + C2)/2 ~ Ga(5, 1).
    GammaCase,
}

/// Exact (P(Y⁽⁰⁾=1), P(Y⁽¹⁾=1)).
pub fn closed_form_probs(case: ClosedFormCase) -> (f64, f64) {
    match case {
        ClosedFormCase::ExponentialCase => {
            let p0 = 2.0 / 3.0;
            let inner = 0.5 - 1.0 / E + (1.0 - E * E) / (E * E) * (1.0 + E).ln();
            let p1 = 4.0 / E * (2.0 / 3.0 + inner / E);
            (p0, p1)
        }
        ClosedFormCase::UniformCase => {
            let li = |z: f64| dilog(z).expect("argument within real branch");
            let p0 = 0.25 * (2.0 * li(-(-1.0f64).exp()) - li(-E) - li(-(-3.0f64).exp()));
            let p1 = 0.125 * (4.0 * li(-(-2.0f64).exp()) - 2.0 * li(-(-4.0f64).exp()) + PI2_6);
            (p0, p1)
        }
        ClosedFormCase::GammaCase => {
            debug_assert!((zeta5_summed() - ZETA5).abs() < 1e-15);
            let p0 = 15.0 / 16.0 * ZETA5;
            let li5 = polylog5(-(-1.0f64).exp()).expect("|z| < 1");
            let pi2 = PI * PI;
            let p1 = (3.0 + 10.0 * pi2 + 7.0 * pi2 * pi2 - 360.0 * li5) / (360.0 * E);
            (p0, p1)
        }
    }
}

/// Odds ratio from the two marginal probabilities.
pub fn odds_ratio(p1: f64, p0: f64) -> Result<f64> {
    for (name, p) in [("P(Y1=1)", p1), ("P(Y0=1)", p0)] {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!(
                "{name} = {p} is not strictly inside (0, 1); odds ratio undefined"
            )));
        }
    }
    Ok((p1 / (1.0 - p1)) / (p0 / (1.0 - p0)))
}
