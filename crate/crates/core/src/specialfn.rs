//! Gamma, Beta, incomplete Beta and the Gauss hypergeometric function.
//!
//! Everything here is real-valued and scalar. `gauss_2f1` only covers the
//! half-line `z <= 0`, which is where the Volterra kernel needs it.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Convergence budget for the power series in [`gauss_2f1_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyBudget {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl AccuracyBudget {
    pub fn new(rel_tol: f64, max_terms: usize) -> Result<Self> {
        if !(rel_tol > 0.0) || max_terms < 1 {
            return Err(Error::domain(format!(
                "accuracy budget needs rel_tol > 0 and max_terms >= 1, got ({rel_tol}, {max_terms})"
            )));
        }
        Ok(Self { rel_tol, max_terms })
    }
}

impl Default for AccuracyBudget {
    fn default() -> Self {
        Self {
            rel_tol: 1e-16,
            max_terms: 20_000,
        }
    }
}

// Lanczos approximation, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;

fn lanczos_ln_gamma(x: f64) -> f64 {
    // valid for x >= 0.5
    let x = x - 1.0;
    let mut series = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        series += c / (x + i as f64);
    }
    let w = x + LANCZOS_G + 0.5;
    HALF_LN_TWO_PI + (x + 0.5) * w.ln() - w + series.ln()
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("ln_gamma requires x > 0, got {x}")));
    }
    if x == 1.0 || x == 2.0 {
        return Ok(0.0);
    }
    if x < 0.5 {
        // reflection: Γ(x)Γ(1-x) = π / sin(πx), sin(πx) > 0 on (0, 1/2)
        Ok((PI / (PI * x).sin()).ln() - lanczos_ln_gamma(1.0 - x))
    } else {
        Ok(lanczos_ln_gamma(x))
    }
}

/// `Γ(x)` for any real `x` that is not a pole.
pub fn gamma(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain(format!("gamma of non-finite {x}")));
    }
    if x > 0.0 {
        return Ok(ln_gamma(x)?.exp());
    }
    if x == x.floor() {
        return Err(Error::domain(format!("gamma has a pole at {x}")));
    }
    let s = (PI * x).sin();
    Ok(PI / (s * ln_gamma(1.0 - x)?.exp()))
}

/// `1/Γ(x)`, zero at the poles.
pub fn recip_gamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        0.0
    } else {
        // gamma only fails at poles and non-finite inputs
        gamma(x).map(|g| 1.0 / g).unwrap_or(f64::NAN)
    }
}

/// Euler Beta function `B(a, b)` through log-Gamma.
pub fn beta(a: f64, b: f64) -> Result<f64> {
    Ok(ln_beta(a, b)?.exp())
}

pub fn ln_beta(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::domain(format!(
            "beta requires positive arguments, got ({a}, {b})"
        )));
    }
    Ok(ln_gamma(a)? + ln_gamma(b)? - ln_gamma(a + b)?)
}

/// Continued fraction for the incomplete Beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Regularized incomplete Beta `I_x(a, b)` evaluated directly by the
/// continued fraction. Only accurate for `x <= (a+1)/(a+b+2)`.
fn inc_beta_lower_raw(a: f64, b: f64, x: f64, ln_b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let front = (a * x.ln() + b * (1.0 - x).ln() - ln_b).exp();
    front * beta_cf(a, b, x) / a
}

fn split_point(a: f64, b: f64) -> f64 {
    (a + 1.0) / (a + b + 2.0)
}

/// Regularized incomplete Beta function `I_x(a, b)`.
pub fn inc_beta_reg(a: f64, b: f64, x: f64) -> Result<f64> {
    let ln_b = ln_beta(a, b)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("incomplete beta needs x in [0,1], got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    if x < split_point(a, b) {
        Ok(inc_beta_lower_raw(a, b, x, ln_b))
    } else {
        Ok(1.0 - inc_beta_lower_raw(b, a, 1.0 - x, ln_b))
    }
}

/// `I_{x1}(a,b) - I_{x0}(a,b)` for `0 <= x0 <= x1 <= 1`, evaluated through
/// the complementary tail when both points sit above the split point so
/// that narrow intervals next to `x = 1` keep their relative accuracy.
pub fn inc_beta_interval(a: f64, b: f64, x0: f64, x1: f64) -> Result<f64> {
    let ln_b = ln_beta(a, b)?;
    if !(0.0 <= x0 && x0 <= x1 && x1 <= 1.0) {
        return Err(Error::domain(format!(
            "incomplete beta interval needs 0 <= x0 <= x1 <= 1, got ({x0}, {x1})"
        )));
    }
    let split = split_point(a, b);
    let lower = |x: f64| -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            inc_beta_lower_raw(a, b, x, ln_b)
        }
    };
    let upper = |x: f64| -> f64 {
        // 1 - I_x(a,b) = I_{1-x}(b,a)
        if x >= 1.0 {
            0.0
        } else if x <= 0.0 {
            1.0
        } else {
            inc_beta_lower_raw(b, a, 1.0 - x, ln_b)
        }
    };
    if x1 <= split {
        Ok(lower(x1) - lower(x0))
    } else if x0 >= split {
        Ok(upper(x0) - upper(x1))
    } else {
        Ok((1.0 - upper(x1)) - lower(x0))
    }
}

fn series_2f1(a: f64, b: f64, c: f64, w: f64, budget: &AccuracyBudget) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..budget.max_terms {
        let k = k as f64;
        term *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * w;
        sum += term;
        if term == 0.0 || term.abs() <= budget.rel_tol * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::Accuracy {
        what: "2F1 power series",
        partial: sum,
        terms: budget.max_terms,
    })
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

/// `₂F₁(a, b; c; z)` for `z <= 0`, `c > 0`, with the default budget.
pub fn gauss_2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    gauss_2f1_with(a, b, c, z, &AccuracyBudget::default())
}

/// `₂F₁(a, b; c; z)` for `z <= 0`.
///
/// Pfaff's transformation `(1-z)^{-a} ₂F₁(a, c-b; c; w)`, `w = z/(z-1)`,
/// maps the half-line onto `w ∈ [0, 1)`. For `w > 0.75` the series in `w`
/// converges slowly, so it is continued to `1 - w` with the usual Gamma
/// connection coefficients unless `c - a - b'` is (nearly) an integer.
pub fn gauss_2f1_with(a: f64, b: f64, c: f64, z: f64, budget: &AccuracyBudget) -> Result<f64> {
    if !(c > 0.0) || !(z <= 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::domain(format!(
            "gauss_2f1 requires c > 0 and z <= 0, got (a={a}, b={b}, c={c}, z={z})"
        )));
    }
    if z == 0.0 || a == 0.0 || b == 0.0 {
        return Ok(1.0);
    }
    let w = z / (z - 1.0);
    let prefactor = (1.0 - z).powf(-a);
    let bp = c - b;
    if w <= 0.75 || is_nonpositive_integer(a) || is_nonpositive_integer(bp) {
        return Ok(prefactor * series_2f1(a, bp, c, w, budget)?);
    }
    let gap = c - a - bp;
    if (gap - gap.round()).abs() < 1e-6 {
        return Ok(prefactor * series_2f1(a, bp, c, w, budget)?);
    }
    let v = 1.0 - w;
    let gc = gamma(c)?;
    let first = gc * gamma(gap)? * recip_gamma(c - a) * recip_gamma(c - bp)
        * series_2f1(a, bp, 1.0 - gap, v, budget)?;
    let second = gc * gamma(-gap)? * recip_gamma(a) * recip_gamma(bp)
        * v.powf(gap)
        * series_2f1(c - a, c - bp, 1.0 + gap, v, budget)?;
    Ok(prefactor * (first + second))
}
