//! Gamma-family special functions.
//!
//! The complete gamma function is delegated to `statrs`; the incomplete
//! functions are evaluated here because the tempered-stable tail needs the
//! upper incomplete gamma at a negative order, which `statrs` does not cover.

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 10_000;

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Series for the lower incomplete gamma `γ(a, x)`, `a > 0`.
fn lower_series(a: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (-x + a * x.ln()).exp()
}

/// Legendre continued fraction for `Γ(a, x)`; valid for any real `a` once `x` is not small.
fn upper_cf(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    (-x + a * x.ln()).exp() * h
}

/// Lower incomplete gamma `γ(a, x) = ∫₀ˣ e^{-w} w^{a-1} dw` for `a > 0`, `x ≥ 0`.
pub fn lower_gamma(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x < a + 1.0 {
        lower_series(a, x)
    } else {
        gamma(a) - upper_cf(a, x)
    }
}

/// Upper incomplete gamma `Γ(a, x) = ∫ₓ^∞ e^{-w} w^{a-1} dw` for `a > 0`, `x ≥ 0`.
pub fn upper_gamma(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x < a + 1.0 {
        gamma(a) - lower_series(a, x)
    } else {
        upper_cf(a, x)
    }
}

/// `Γ(-α, x)` for `α ∈ (0, 1)` and `x > 0`.
///
/// Continued fraction for `x ≥ 1`; below that the recurrence
/// `Γ(-α, x) = (x^{-α} e^{-x} - Γ(1-α, x)) / α` is free of cancellation.
pub fn upper_gamma_neg(alpha: f64, x: f64) -> f64 {
    debug_assert!(alpha > 0.0 && alpha < 1.0 && x > 0.0);
    if x >= 1.0 {
        upper_cf(-alpha, x)
    } else {
        ((-alpha * x.ln() - x).exp() - upper_gamma(1.0 - alpha, x)) / alpha
    }
}
