//! Bernstein functions in Lévy-triplet form `(a, b, ν̄)`.
//!
//! Every consumer works with the killing-augmented tail
//! `ν(s) = a + ν̄(s, ∞)` and its primitive `V(s) = ∫₀ˢ ν`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::quad::{self, Tol};
use crate::special::{gamma, lower_gamma, upper_gamma_neg};

/// Tabulated tail with log-log interpolation.
///
/// `values` are the full tail `ν(s_i)`, killing rate included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TailTable", into = "TailTable")]
pub struct CustomTail {
    knots: Vec<f64>,
    values: Vec<f64>,
    // per segment exponent p with ν ∝ s^p; None marks a linear segment (a zero endpoint)
    slopes: Vec<Option<f64>>,
    // V(s_i) for the excess over zero, i.e. ∫₀^{s_i} ν
    cumulative: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailTable {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
}

impl TryFrom<TailTable> for CustomTail {
    type Error = Error;
    fn try_from(t: TailTable) -> Result<Self> {
        CustomTail::new(t.knots, t.values)
    }
}

impl From<CustomTail> for TailTable {
    fn from(c: CustomTail) -> Self {
        TailTable {
            knots: c.knots,
            values: c.values,
        }
    }
}

impl CustomTail {
    /// Rejects only tables that cannot be evaluated at all; structural
    /// conditions such as monotonicity are reported by [`validate`].
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::SpecInvalid(format!(
                "{} knots but {} values",
                knots.len(),
                values.len()
            )));
        }
        if knots.len() < 2 {
            return Err(Error::SpecInvalid(
                "tail table needs at least 2 knots".into(),
            ));
        }
        if knots.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::SpecInvalid(
                "tail table has non-finite entries".into(),
            ));
        }
        if knots[0] <= 0.0 {
            return Err(Error::SpecInvalid("first knot must be positive".into()));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::SpecInvalid(
                "knots must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|&v| v < 0.0) {
            return Err(Error::SpecInvalid(
                "tail values must be non-negative".into(),
            ));
        }
        let slopes: Vec<Option<f64>> = knots
            .windows(2)
            .zip(values.windows(2))
            .map(|(s, v)| {
                if v[0] > 0.0 && v[1] > 0.0 {
                    Some((v[1] / v[0]).ln() / (s[1] / s[0]).ln())
                } else {
                    None
                }
            })
            .collect();
        let mut tail = CustomTail {
            knots,
            values,
            slopes,
            cumulative: Vec::new(),
        };
        let mut cum = Vec::with_capacity(tail.knots.len());
        cum.push(tail.head_primitive(tail.knots[0]));
        for k in 0..tail.slopes.len() {
            let next = cum[k] + tail.segment_primitive(k, tail.knots[k + 1]);
            cum.push(next);
        }
        tail.cumulative = cum;
        Ok(tail)
    }

    /// Samples `nu` at `n` log-spaced knots on `[lo, hi]`.
    pub fn from_fn<F: Fn(f64) -> f64>(nu: F, lo: f64, hi: f64, n: usize) -> Result<Self> {
        let (l0, l1) = (lo.ln(), hi.ln());
        let knots: Vec<f64> = (0..n)
            .map(|i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp())
            .collect();
        let values = knots.iter().map(|&s| nu(s)).collect();
        Self::new(knots, values)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Exponent used below the first knot.
    pub fn head_slope(&self) -> f64 {
        self.slopes[0].unwrap_or(0.0)
    }

    fn segment(&self, s: f64) -> usize {
        // index k with knots[k] <= s < knots[k+1]
        self.knots.partition_point(|&k| k <= s).saturating_sub(1)
    }

    fn head_primitive(&self, s: f64) -> f64 {
        let p = self.head_slope();
        let (s1, v1) = (self.knots[0], self.values[0]);
        if p <= -1.0 {
            return f64::INFINITY;
        }
        v1 * s1 / (p + 1.0) * (s / s1).powf(p + 1.0)
    }

    // ∫_{s_k}^{s} ν for s inside segment k
    fn segment_primitive(&self, k: usize, s: f64) -> f64 {
        let (s0, s1) = (self.knots[k], self.knots[k + 1]);
        let (v0, v1) = (self.values[k], self.values[k + 1]);
        match self.slopes[k] {
            Some(p) if (p + 1.0).abs() < 1e-12 => v0 * s0 * (s / s0).ln(),
            Some(p) => v0 * s0 / (p + 1.0) * ((s / s0).powf(p + 1.0) - 1.0),
            None => {
                let slope = (v1 - v0) / (s1 - s0);
                let d = s - s0;
                v0 * d + 0.5 * slope * d * d
            }
        }
    }

    fn eval(&self, s: f64, a: f64) -> f64 {
        let n = self.knots.len();
        if s >= self.knots[n - 1] {
            return a;
        }
        if s < self.knots[0] {
            return self.values[0] * (s / self.knots[0]).powf(self.head_slope());
        }
        let k = self.segment(s);
        let (s0, s1) = (self.knots[k], self.knots[k + 1]);
        let (v0, v1) = (self.values[k], self.values[k + 1]);
        match self.slopes[k] {
            Some(p) => v0 * (s / s0).powf(p),
            None => v0 + (v1 - v0) * (s - s0) / (s1 - s0),
        }
    }

    fn primitive(&self, s: f64, a: f64) -> f64 {
        let n = self.knots.len();
        if s < self.knots[0] {
            return self.head_primitive(s);
        }
        if s >= self.knots[n - 1] {
            return self.cumulative[n - 1] + a * (s - self.knots[n - 1]);
        }
        let k = self.segment(s);
        self.cumulative[k] + self.segment_primitive(k, s)
    }

    // sup{y : ν(y) ≥ v} for v above the clamp level
    fn inverse(&self, v: f64) -> f64 {
        if v > self.values[0] {
            let p = self.head_slope();
            if p >= 0.0 {
                return 0.0;
            }
            return self.knots[0] * (v / self.values[0]).powf(1.0 / p);
        }
        // last index with values[i] >= v
        let mut idx = 0;
        for (i, &val) in self.values.iter().enumerate() {
            if val >= v {
                idx = i;
            }
        }
        if idx + 1 >= self.knots.len() {
            return self.knots[idx];
        }
        let (s0, s1) = (self.knots[idx], self.knots[idx + 1]);
        let (v0, v1) = (self.values[idx], self.values[idx + 1]);
        if v0 == v1 {
            return s1;
        }
        match self.slopes[idx] {
            Some(p) => s0 * (v / v0).powf(1.0 / p),
            None => s0 + (v0 - v) / (v0 - v1) * (s1 - s0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Stable { alpha: f64 },
    TemperedStable { alpha: f64, theta: f64 },
    PureDrift,
    CustomTail(CustomTail),
}

/// Lévy triplet: killing rate `a`, drift `b`, jump family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernsteinSpec {
    pub a: f64,
    pub b: f64,
    pub family: Family,
}

/// A failed structural condition on a [`BernsteinSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    NegativeKillingRate,
    NegativeDrift,
    AlphaOutOfRange,
    ThetaNotPositive,
    TailNotMonotone,
    TailBelowKillingRate,
    TailNotIntegrableAtZero,
    DegenerateZeroFunction,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            Violation::NegativeKillingRate => "killing rate a must be >= 0",
            Violation::NegativeDrift => "drift b must be >= 0",
            Violation::AlphaOutOfRange => "alpha must lie strictly inside (0, 1)",
            Violation::ThetaNotPositive => "theta must be > 0",
            Violation::TailNotMonotone => "tail values must be non-increasing",
            Violation::TailBelowKillingRate => "tail values must be >= a",
            Violation::TailNotIntegrableAtZero => "tail is not integrable on (0, 1]",
            Violation::DegenerateZeroFunction => "a = b = 0 with an empty Levy measure gives f = 0",
        };
        f.write_str(msg)
    }
}

impl BernsteinSpec {
    pub fn stable(alpha: f64) -> Self {
        BernsteinSpec {
            a: 0.0,
            b: 0.0,
            family: Family::Stable { alpha },
        }
    }

    pub fn tempered(alpha: f64, theta: f64) -> Self {
        BernsteinSpec {
            a: 0.0,
            b: 0.0,
            family: Family::TemperedStable { alpha, theta },
        }
    }

    pub fn drift(a: f64, b: f64) -> Self {
        BernsteinSpec {
            a,
            b,
            family: Family::PureDrift,
        }
    }

    pub fn custom(a: f64, b: f64, tail: CustomTail) -> Self {
        BernsteinSpec {
            a,
            b,
            family: Family::CustomTail(tail),
        }
    }

    pub fn with_killing(mut self, a: f64) -> Self {
        self.a = a;
        self
    }

    pub fn with_drift(mut self, b: f64) -> Self {
        self.b = b;
        self
    }

    /// `ν(0+)`; infinite for infinite-activity specs.
    pub fn tail_at_zero(&self) -> f64 {
        match &self.family {
            Family::Stable { .. } | Family::TemperedStable { .. } => f64::INFINITY,
            Family::PureDrift => self.a,
            Family::CustomTail(c) => {
                if c.head_slope() < 0.0 {
                    f64::INFINITY
                } else {
                    c.values[0]
                }
            }
        }
    }

    /// True when `ν̄(0, ∞) = ∞`, i.e. the subordinator has absolutely continuous marginals.
    pub fn infinite_activity(&self) -> bool {
        self.tail_at_zero().is_infinite()
    }

    /// Tail `ν(s)` for `s > 0` (no argument check).
    pub fn tail(&self, s: f64) -> f64 {
        match &self.family {
            Family::Stable { alpha } => self.a + s.powf(-alpha) / gamma(1.0 - alpha),
            Family::TemperedStable { alpha, theta } => {
                self.a
                    + alpha * theta.powf(*alpha) * upper_gamma_neg(*alpha, theta * s)
                        / gamma(1.0 - alpha)
            }
            Family::PureDrift => self.a,
            Family::CustomTail(c) => c.eval(s, self.a),
        }
    }

    /// Primitive `V(s) = ∫₀ˢ ν(w) dw` for `s ≥ 0` (no argument check).
    pub fn tail_primitive(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match &self.family {
            Family::Stable { alpha } => self.a * s + s.powf(1.0 - alpha) / gamma(2.0 - alpha),
            Family::TemperedStable { alpha, theta } => {
                let x = theta * s;
                let bracket = x * upper_gamma_neg(*alpha, x) + lower_gamma(1.0 - alpha, x);
                self.a * s + alpha * theta.powf(alpha - 1.0) / gamma(1.0 - alpha) * bracket
            }
            Family::PureDrift => self.a * s,
            Family::CustomTail(c) => c.primitive(s, self.a),
        }
    }

    /// Lévy density `−ν′(s)` of the jump part, where it exists in closed form.
    pub fn levy_density(&self, s: f64) -> Option<f64> {
        match &self.family {
            Family::Stable { alpha } => Some(alpha * s.powf(-alpha - 1.0) / gamma(1.0 - alpha)),
            Family::TemperedStable { alpha, theta } => {
                Some(alpha * (-theta * s).exp() * s.powf(-alpha - 1.0) / gamma(1.0 - alpha))
            }
            Family::PureDrift => Some(0.0),
            Family::CustomTail(_) => None,
        }
    }

    /// Smallest `y` with `ν(y) ≤ v` for `v > a`: the jump size attached to level `v`.
    pub fn tail_inverse(&self, v: f64) -> f64 {
        let excess = v - self.a;
        match &self.family {
            Family::Stable { alpha } => (excess * gamma(1.0 - alpha)).powf(-1.0 / alpha),
            Family::TemperedStable { alpha, theta } => {
                tempered_inverse(self, *alpha, *theta, excess)
            }
            Family::PureDrift => 0.0,
            Family::CustomTail(c) => c.inverse(v),
        }
    }

    /// `f(λ)` for real `λ > 0`.
    pub fn f_real(&self, lambda: f64) -> f64 {
        self.f(Complex64::new(lambda, 0.0))
            .map(|z| z.re)
            .unwrap_or(f64::NAN)
    }

    /// `f(λ)` on the open right half-plane.
    pub fn f(&self, lambda: Complex64) -> Result<Complex64> {
        if !(lambda.re > 0.0) {
            return Err(Error::NonPositiveRealPart(lambda.re));
        }
        Ok(self.f0(lambda)? + self.b * lambda)
    }

    /// `f(λ) − bλ`. Closed-form families are continued analytically off the
    /// right half-plane (cut along `(−∞, 0]`, resp. `(−∞, −θ]`); tabulated
    /// tails need `Re λ > 0`.
    pub fn f0(&self, lambda: Complex64) -> Result<Complex64> {
        let jump = match &self.family {
            Family::Stable { alpha } => (alpha * lambda.ln()).exp(),
            Family::TemperedStable { alpha, theta } => tempered_symbol(*alpha, *theta, lambda),
            Family::PureDrift => Complex64::new(0.0, 0.0),
            Family::CustomTail(c) => {
                if !(lambda.re > 0.0) {
                    return Err(Error::NonPositiveRealPart(lambda.re));
                }
                return custom_symbol(c, self.a, lambda);
            }
        };
        Ok(self.a + jump)
    }

    pub fn is_closed_form(&self) -> bool {
        !matches!(self.family, Family::CustomTail(_))
    }
}

// (λ+θ)^α − θ^α without cancellation for small |λ|/θ
fn tempered_symbol(alpha: f64, theta: f64, lambda: Complex64) -> Complex64 {
    let z = lambda / theta;
    let scale = theta.powf(alpha);
    if z.norm() < 0.1 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = Complex64::new(0.0, 0.0);
        for k in 1..60 {
            term *= z * ((alpha - (k as f64 - 1.0)) / k as f64);
            sum += term;
            if term.norm() < 1e-17 * sum.norm() {
                break;
            }
        }
        scale * sum
    } else {
        scale * ((alpha * (1.0 + z).ln()).exp() - 1.0)
    }
}

// bλ-free part: a + λ ∫₀^∞ e^{−λs} (ν(s) − a) ds, the tail excess vanishing beyond the last knot
fn custom_symbol(c: &CustomTail, a: f64, lambda: Complex64) -> Result<Complex64> {
    let s1 = c.knots[0];
    let sn = *c.knots.last().expect("non-empty knots");
    let eps = s1.min(0.5 / lambda.norm());
    let p = c.head_slope();
    let v1 = c.values[0];

    // ∫₀^ε e^{−λs} v1 (s/s1)^p ds by power series, |λ|ε ≤ 1/2
    let mut head = Complex64::new(0.0, 0.0);
    let mut coef = Complex64::new(1.0, 0.0);
    for k in 0..80 {
        let kf = k as f64;
        let term = coef * eps.powf(p + kf + 1.0) / (p + kf + 1.0);
        head += term;
        if term.norm() < 1e-18 * head.norm() {
            break;
        }
        coef *= -lambda / (kf + 1.0);
    }
    head *= v1 * s1.powf(-p);
    let head_a = if a > 0.0 {
        a * (1.0 - (-lambda * eps).exp()) / lambda
    } else {
        Complex64::new(0.0, 0.0)
    };

    let mut body = Complex64::new(0.0, 0.0);
    let upper = sn.min(eps + 60.0 / lambda.re);
    if upper > eps {
        let breaks: Vec<f64> = c
            .knots
            .iter()
            .filter(|&&k| k > eps && k < upper)
            .map(|k| k.ln())
            .collect();
        let (v, _) = quad::adaptive(
            |u: f64| {
                let s = u.exp();
                (-lambda * s).exp() * ((c.eval(s, a) - a) * s)
            },
            eps.ln(),
            upper.ln(),
            &breaks,
            Tol {
                abs: 1e-300,
                rel: 1e-11,
                max_segments: 4000,
            },
        )?;
        body = v;
    }
    Ok(a + lambda * (head - head_a + body))
}

fn tempered_inverse(spec: &BernsteinSpec, alpha: f64, theta: f64, target: f64) -> f64 {
    if target <= 0.0 {
        return f64::INFINITY;
    }
    let g1 = gamma(1.0 - alpha);
    let excess = |y: f64| alpha * theta.powf(alpha) * upper_gamma_neg(alpha, theta * y) / g1;
    // the stable tail dominates the tempered one, so its inverse brackets from above
    let mut hi = (target * g1).powf(-1.0 / alpha);
    let mut lo = hi;
    while excess(lo) < target {
        lo *= 0.5;
        if lo < 1e-300 {
            return lo;
        }
    }
    if excess(hi) > target {
        // guard against rounding at the bracket
        hi *= 1.0 + 1e-12;
    }
    let mut y = 0.5 * (lo + hi);
    for _ in 0..200 {
        let r = excess(y) - target;
        if r > 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let dens = spec.levy_density(y).unwrap_or(0.0);
        let mut next = if dens > 0.0 { y + r / dens } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= 1e-13 * y || (hi - lo) <= 1e-13 * hi {
            return next;
        }
        y = next;
    }
    y
}

pub fn eval_f(spec: &BernsteinSpec, lambda: Complex64) -> Result<Complex64> {
    spec.f(lambda)
}

pub fn eval_tail(spec: &BernsteinSpec, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::DomainError(format!(
            "tail evaluated at s = {s}, need s > 0"
        )));
    }
    Ok(spec.tail(s))
}

pub fn eval_tail_primitive(spec: &BernsteinSpec, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::DomainError(format!(
            "tail primitive evaluated at s = {s}, need s >= 0"
        )));
    }
    Ok(spec.tail_primitive(s))
}

/// Lists every failed structural condition; empty means the spec is usable.
pub fn validate(spec: &BernsteinSpec) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(spec.a >= 0.0) {
        out.push(Violation::NegativeKillingRate);
    }
    if !(spec.b >= 0.0) {
        out.push(Violation::NegativeDrift);
    }
    match &spec.family {
        Family::Stable { alpha } => {
            if !(*alpha > 0.0 && *alpha < 1.0) {
                out.push(Violation::AlphaOutOfRange);
            }
        }
        Family::TemperedStable { alpha, theta } => {
            if !(*alpha > 0.0 && *alpha < 1.0) {
                out.push(Violation::AlphaOutOfRange);
            }
            if !(*theta > 0.0) {
                out.push(Violation::ThetaNotPositive);
            }
        }
        Family::PureDrift => {
            if spec.a == 0.0 && spec.b == 0.0 {
                out.push(Violation::DegenerateZeroFunction);
            }
        }
        Family::CustomTail(c) => {
            if c.values.windows(2).any(|w| w[1] > w[0]) {
                out.push(Violation::TailNotMonotone);
            }
            if c.values.iter().any(|&v| v < spec.a) {
                out.push(Violation::TailBelowKillingRate);
            }
            if !custom_integrable(c) {
                out.push(Violation::TailNotIntegrableAtZero);
            }
            if spec.a == 0.0 && spec.b == 0.0 && c.values.iter().all(|&v| v == 0.0) {
                out.push(Violation::DegenerateZeroFunction);
            }
        }
    }
    out
}

// ∫₀¹ ν < ∞ holds iff the power-law head has exponent > −1; confirm numerically
// that the primitive stays bounded as the head is refined towards 0.
fn custom_integrable(c: &CustomTail) -> bool {
    let p = c.head_slope();
    if p <= -1.0 {
        return false;
    }
    let s1 = c.knots[0];
    let near: Vec<f64> = (1..=6)
        .map(|k| c.head_primitive(s1 * 10f64.powi(-3 * k)))
        .collect();
    near.iter().all(|v| v.is_finite()) && near.windows(2).all(|w| w[1] <= w[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn closed_form_symbols() {
        let one = Complex64::new(1.0, 0.0);
        assert!((BernsteinSpec::stable(0.5).f(one).unwrap().re - 1.0).abs() < 1e-15);
        let t = BernsteinSpec::tempered(0.5, 1.0).f(one).unwrap().re;
        assert!((t - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        let d = BernsteinSpec::drift(0.3, 2.0)
            .f(Complex64::new(1.5, 2.0))
            .unwrap();
        assert!((d - Complex64::new(3.3, 4.0)).norm() < 1e-15);
        assert_eq!(
            BernsteinSpec::stable(0.5).f(Complex64::new(0.0, 1.0)),
            Err(Error::NonPositiveRealPart(0.0))
        );
    }

    #[test]
    fn tempered_symbol_small_argument() {
        // series branch against the direct formula just above the switch
        let (al, th) = (0.6f64, 2.0f64);
        let z = Complex64::new(0.199, 0.01);
        let direct = th.powf(al) * ((al * (1.0 + z / th).ln()).exp() - 1.0);
        assert!((tempered_symbol(al, th, z) - direct).norm() < 1e-14);
    }

    #[test]
    fn tails_match_quadrature() {
        let s = BernsteinSpec::stable(0.5);
        assert!((s.tail(1.0) - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-15);
        assert!((BernsteinSpec::drift(0.3, 1.0).tail(17.0) - 0.3).abs() < 1e-15);

        // tempered tail: α/Γ(1−α) ∫_s^∞ e^{−θz} z^{−α−1} dz
        let t = BernsteinSpec::tempered(0.5, 2.0);
        let q = quad::half_line(
            |z| 0.5 * (-2.0 * z).exp() * z.powf(-1.5) / gamma(0.5),
            1.0,
            1.0,
            Tol::new(1e-18, 1e-13),
        )
        .unwrap();
        assert!(rel(t.tail(1.0), q) < 1e-8);
    }

    #[test]
    fn primitives_match_quadrature() {
        let specs = [
            BernsteinSpec::stable(0.5),
            BernsteinSpec::tempered(0.5, 2.0).with_killing(0.4),
            BernsteinSpec::tempered(0.3, 0.7),
        ];
        for sp in &specs {
            for &s in &[0.01, 1.0, 3.5] {
                let q = quad::tanh_sinh(|x, _, _| sp.tail(x), 0.0, s, 1e-13).unwrap();
                assert!(rel(sp.tail_primitive(s), q) < 1e-9, "{sp:?} s={s}");
            }
        }
        assert!((BernsteinSpec::stable(0.5).tail_primitive(1.0) - 1.0 / gamma(1.5)).abs() < 1e-14);
        assert_eq!(BernsteinSpec::drift(2.0, 0.0).tail_primitive(3.0), 6.0);
        assert_eq!(BernsteinSpec::stable(0.5).tail_primitive(0.0), 0.0);
    }

    fn sampled_stable() -> BernsteinSpec {
        let g = gamma(0.5);
        let tail = CustomTail::from_fn(|s| s.powf(-0.5) / g, 1e-6, 1e4, 400).unwrap();
        BernsteinSpec::custom(0.0, 0.0, tail)
    }

    #[test]
    fn custom_tail_reproduces_stable_symbol() {
        let sp = sampled_stable();
        let v = sp.f(Complex64::new(2.0, 0.0)).unwrap();
        assert!(rel(v.re, 2f64.sqrt()) < 1e-3);
        for &l in &[0.1f64, 1.0, 10.0, 100.0] {
            assert!(rel(sp.f_real(l), l.sqrt()) < 1e-3, "λ={l}");
        }
        let z = Complex64::new(1.0, 3.0);
        assert!((sp.f(z).unwrap() - z.sqrt()).norm() / z.sqrt().norm() < 1e-3);
    }

    #[test]
    fn custom_tail_primitive_and_inverse() {
        let sp = sampled_stable();
        let st = BernsteinSpec::stable(0.5);
        for &s in &[1e-8f64, 1e-3, 0.7, 50.0] {
            assert!(rel(sp.tail(s), st.tail(s)) < 1e-10);
            assert!(rel(sp.tail_primitive(s), st.tail_primitive(s)) < 1e-8);
            let v = st.tail(s);
            assert!(rel(sp.tail_inverse(v), s) < 1e-9);
        }
    }

    #[test]
    fn validate_reports() {
        assert!(validate(&BernsteinSpec::stable(0.5)).is_empty());
        let bumped = CustomTail::new(vec![0.1, 1.0, 2.0], vec![3.0, 1.0, 2.0]).unwrap();
        assert_eq!(
            validate(&BernsteinSpec::custom(0.0, 0.0, bumped)),
            vec![Violation::TailNotMonotone]
        );
        let heavy = CustomTail::from_fn(|s| s.powf(-1.2), 1e-4, 1e3, 60).unwrap();
        assert_eq!(
            validate(&BernsteinSpec::custom(0.0, 0.0, heavy)),
            vec![Violation::TailNotIntegrableAtZero]
        );
        assert_eq!(
            validate(&BernsteinSpec::stable(1.0)),
            vec![Violation::AlphaOutOfRange]
        );
        assert_eq!(
            validate(&BernsteinSpec::tempered(0.5, 0.0)),
            vec![Violation::ThetaNotPositive]
        );
    }

    #[test]
    fn tempered_inverse_roundtrip() {
        let sp = BernsteinSpec::tempered(0.5, 1.0).with_killing(0.2);
        for &y in &[1e-6, 0.01, 1.0, 8.0] {
            let v = sp.tail(y);
            assert!(rel(sp.tail_inverse(v), y) < 1e-11, "y={y}");
        }
        let st = BernsteinSpec::stable(0.7);
        assert!(rel(st.tail_inverse(st.tail(0.3)), 0.3) < 1e-13);
    }

    fn any_spec() -> impl Strategy<Value = BernsteinSpec> {
        prop_oneof![
            (0.05f64..0.95, 0.0f64..2.0, 0.0f64..2.0).prop_map(|(al, a, b)| BernsteinSpec {
                a,
                b,
                family: Family::Stable { alpha: al }
            }),
            (0.05f64..0.95, 0.1f64..5.0, 0.0f64..2.0).prop_map(|(al, th, a)| BernsteinSpec {
                a,
                b: 0.0,
                family: Family::TemperedStable {
                    alpha: al,
                    theta: th
                }
            }),
            (0.0f64..2.0, 0.01f64..2.0).prop_map(|(a, b)| BernsteinSpec::drift(a, b)),
        ]
    }

    proptest! {
        #[test]
        fn tail_non_increasing_above_killing(sp in any_spec(), s1 in 1e-4f64..10.0, r in 1.0f64..100.0) {
            let s2 = s1 * r;
            let (t1, t2) = (sp.tail(s1), sp.tail(s2));
            prop_assert!(t1 >= t2);
            prop_assert!(t2 >= sp.a - 1e-15);
        }

        #[test]
        fn symbol_monotone_and_g_decreasing(sp in any_spec(), l in 1e-3f64..100.0, r in 1.0f64..10.0) {
            let (f1, f2) = (sp.f_real(l), sp.f_real(l * r));
            prop_assert!(f1 > 0.0);
            prop_assert!(f2 >= f1 * (1.0 - 1e-14));
            prop_assert!(f2 / (l * r) <= f1 / l * (1.0 + 1e-14));
        }

        #[test]
        fn primitive_derivative_is_tail(sp in any_spec(), s in 0.05f64..20.0) {
            let h = 1e-5 * s;
            let d = (sp.tail_primitive(s + h) - sp.tail_primitive(s - h)) / (2.0 * h);
            prop_assert!((d - sp.tail(s)).abs() <= 1e-6 * sp.tail(s).max(1.0));
        }
    }
}
