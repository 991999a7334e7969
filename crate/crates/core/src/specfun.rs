//! Special functions behind the closed-form expected norm.
//!
//! Two families are needed: differences of log-gamma values (the norm carries
//! a `Γ(D/2 + 1/2) / Γ(D/2)` factor that overflows for data dimensions in
//! the hundreds) and Kummer's confluent hypergeometric function
//! `M(a, b, x) = ₁F₁(a; b; x)` with its derivative in `x`.
//!
//! Accuracy is only promised in the regime the metric code uses:
//! `a ∈ [-3, 1]`, `b > 0`, `x ≤ 0`, plus moderate positive `x`.

use crate::error::{Error, Result};

/// Relative size of the next series term at which a series is truncated.
pub const SERIES_REL_TOL: f64 = 1e-15;

/// Hard cap on the number of series terms.
pub const MAX_SERIES_TERMS: usize = 10_000;

/// For `-x` above this value the large-argument expansion of `M(a, b, x)` is
/// tried before the (long) Kummer-transformed series.
pub const ASYMPTOTIC_THRESHOLD: f64 = 700.0;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const STIRLING_MIN: f64 = 15.0;

// B_{2k} / (2k (2k - 1)) for k = 1..=7.
const STIRLING_COEFFS: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
];

fn stirling_tail(x: f64) -> f64 {
    let inv = x.recip();
    let inv2 = inv * inv;
    let poly = STIRLING_COEFFS
        .iter()
        .rev()
        .fold(0.0, |acc, &c| acc * inv2 + c);
    poly * inv
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {x}")))
    }
}

/// `ln Γ(x)` for `x > 0`.
///
/// Arguments below 15 are shifted up with `Γ(x + 1) = x Γ(x)` before the
/// Stirling series is applied.
pub fn ln_gamma(x: f64) -> Result<f64> {
    check_positive("ln_gamma argument", x)?;
    let mut y = x;
    let mut shift = 0.0;
    while y < STIRLING_MIN {
        shift += y.ln();
        y += 1.0;
    }
    Ok((y - 0.5) * y.ln() - y + LN_SQRT_2PI + stirling_tail(y) - shift)
}

/// `ln Γ(num) − ln Γ(den)`, evaluated without forming either log-gamma value.
///
/// The leading Stirling terms are combined as
/// `(a − ½) ln(a/b) + (a − b) ln b − (a − b)` so that nearby arguments do not
/// cancel catastrophically.
pub fn log_gamma_ratio(num: f64, den: f64) -> Result<f64> {
    check_positive("log_gamma_ratio numerator", num)?;
    check_positive("log_gamma_ratio denominator", den)?;
    if num == den {
        return Ok(0.0);
    }
    let smallest = num.min(den);
    let steps = if smallest < STIRLING_MIN {
        (STIRLING_MIN - smallest).ceil() as usize
    } else {
        0
    };

    // ln Γ(a) − ln Γ(b) = [ln Γ(a+n) − ln Γ(b+n)] − Σ_k ln((a+k)/(b+k))
    let diff = num - den;
    let correction: f64 = (0..steps)
        .map(|k| (diff / (den + k as f64)).ln_1p())
        .sum();

    let a = num + steps as f64;
    let b = den + steps as f64;
    let d = a - b;
    let main = (a - 0.5) * (d / b).ln_1p() + d * b.ln() - d + stirling_tail(a) - stirling_tail(b);
    Ok(main - correction)
}

/// Kummer's confluent hypergeometric function `₁F₁(a; b; x)`.
///
/// Negative arguments go through the Kummer transform
/// `M(a, b, x) = eˣ M(b − a, b, −x)`, whose series has positive terms. The sum
/// is carried with an explicit log-scale so that `eˣ` and the series never
/// overflow separately. For `−x > 700` the large-argument expansion is used
/// whenever it converges to working precision.
pub fn kummer_1f1(a: f64, b: f64, x: f64) -> Result<f64> {
    check_positive("1F1 parameter b", b)?;
    if !a.is_finite() || !x.is_finite() {
        return Err(Error::Domain(format!("1F1 arguments must be finite (a={a}, x={x})")));
    }
    if x == 0.0 || a == 0.0 {
        return Ok(1.0);
    }
    if x > 0.0 || b - a <= 0.0 {
        return direct_series(a, b, x);
    }
    let y = -x;
    if y > ASYMPTOTIC_THRESHOLD {
        if let Some(value) = asymptotic_negative(a, b, y)? {
            return Ok(value);
        }
    }
    kummer_transformed(a, b, y)
}

/// `∂/∂x ₁F₁(a; b; x) = (a/b) ₁F₁(a + 1; b + 1; x)`.
pub fn kummer_1f1_derivative(a: f64, b: f64, x: f64) -> Result<f64> {
    check_positive("1F1 parameter b", b)?;
    Ok(a / b * kummer_1f1(a + 1.0, b + 1.0, x)?)
}

fn direct_series(a: f64, b: f64, x: f64) -> Result<f64> {
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for k in 0..MAX_SERIES_TERMS {
        let kf = k as f64;
        let ratio = (a + kf) / (b + kf) * x / (kf + 1.0);
        term *= ratio;
        sum += term;
        if !sum.is_finite() {
            return Err(Error::Domain(format!("1F1({a}, {b}, {x}) overflows")));
        }
        if term == 0.0 || (term.abs() <= SERIES_REL_TOL * sum.abs() && ratio.abs() < 1.0) {
            return Ok(sum);
        }
    }
    Err(Error::Convergence {
        what: "1F1 power series",
        terms: MAX_SERIES_TERMS,
    })
}

/// `e^{−y} M(b − a, b, y)` for `y > 0`, `b − a > 0`.
fn kummer_transformed(a: f64, b: f64, y: f64) -> Result<f64> {
    const RESCALE: f64 = 1e280;
    let c = b - a;
    let ln_rescale = RESCALE.ln();
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    let mut log_scale = 0.0_f64;
    for k in 0..MAX_SERIES_TERMS {
        let kf = k as f64;
        let ratio = (c + kf) / (b + kf) * y / (kf + 1.0);
        term *= ratio;
        sum += term;
        if sum > RESCALE {
            sum /= RESCALE;
            term /= RESCALE;
            log_scale += ln_rescale;
        }
        if term <= SERIES_REL_TOL * sum && ratio < 1.0 {
            return Ok(if log_scale == 0.0 {
                (-y).exp() * sum
            } else {
                (log_scale + sum.ln() - y).exp()
            });
        }
    }
    Err(Error::Convergence {
        what: "Kummer-transformed 1F1 series",
        terms: MAX_SERIES_TERMS,
    })
}

/// Large-`y` expansion of `M(a, b, −y)`:
/// `Γ(b)/Γ(b − a) · y^{−a} · Σ_s (a)_s (a − b + 1)_s / s! · y^{−s}`.
///
/// Returns `None` when the terms start growing before reaching working
/// precision (the expansion is divergent and `y` is too small for it).
fn asymptotic_negative(a: f64, b: f64, y: f64) -> Result<Option<f64>> {
    let prefactor = (log_gamma_ratio(b, b - a)? - a * y.ln()).exp();
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for s in 0..200 {
        let sf = s as f64;
        let next = term * (a + sf) * (a - b + 1.0 + sf) / ((sf + 1.0) * y);
        if next == 0.0 {
            return Ok(Some(prefactor * sum));
        }
        if next.abs() > term.abs() {
            return Ok(None);
        }
        term = next;
        sum += term;
        if term.abs() <= 0.1 * SERIES_REL_TOL * sum.abs() {
            return Ok(Some(prefactor * sum));
        }
    }
    Ok(None)
}
