//! Convolution-type derivatives on uniform grids.
//!
//! `u` is reconstructed piecewise linearly, so on every cell the convolution
//! against the tail reduces to exact differences of the tail primitive `V`.
//! Singular tails (`ν(0+) = ∞`) are therefore integrated without loss.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::bernstein::{validate, BernsteinSpec};
use crate::error::{Error, Result};

/// Uniform samples `u(origin + i·step)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub origin: f64,
    pub step: f64,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(origin: f64, step: f64, values: Vec<f64>) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidInput(format!(
                "grid step must be positive, got {step}"
            )));
        }
        if values.len() < 3 {
            return Err(Error::GridTooCoarse(format!(
                "{} samples, at least 3 required",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("sample {i} is not finite")));
        }
        Ok(GridFunction {
            origin,
            step,
            values,
        })
    }

    /// Samples `f` at `n` nodes starting from `origin`.
    pub fn sample<F: Fn(f64) -> f64>(origin: f64, step: f64, n: usize, f: F) -> Result<Self> {
        let values = (0..n).map(|i| f(origin + step * i as f64)).collect();
        Self::new(origin, step, values)
    }

    /// Samples `f` on `n` nodes spanning `[lo, hi]`.
    pub fn linspace<F: Fn(f64) -> f64>(lo: f64, hi: f64, n: usize, f: F) -> Result<Self> {
        if n < 2 {
            return Err(Error::GridTooCoarse(format!("{n} samples")));
        }
        Self::sample(lo, (hi - lo) / (n - 1) as f64, n, f)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn node(&self, i: usize) -> f64 {
        self.origin + self.step * i as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.node(i))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        GridFunction {
            origin: self.origin,
            step: self.step,
            values,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Plus,
    Minus,
}

fn check_spec(spec: &BernsteinSpec) -> Result<()> {
    let v = validate(spec);
    if v.is_empty() {
        Ok(())
    } else {
        let names: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
        Err(Error::SpecInvalid(names.join(", ")))
    }
}

/// Fourth-order finite differences (one-sided at the edges, second order
/// below five samples).
pub fn derivative(u: &GridFunction) -> Vec<f64> {
    let v = &u.values;
    let n = v.len();
    let h = u.step;
    if n < 5 {
        let mut d = vec![0.0; n];
        d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
        for j in 1..n - 1 {
            d[j] = (v[j + 1] - v[j - 1]) / (2.0 * h);
        }
        d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h);
        return d;
    }
    let mut d = vec![0.0; n];
    let c = 12.0 * h;
    d[0] = (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / c;
    d[1] = (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4]) / c;
    for j in 2..n - 2 {
        d[j] = (-v[j + 2] + 8.0 * v[j + 1] - 8.0 * v[j - 1] + v[j - 2]) / c;
    }
    let m = n - 1;
    d[m] = (25.0 * v[m] - 48.0 * v[m - 1] + 36.0 * v[m - 2] - 16.0 * v[m - 3] + 3.0 * v[m - 4]) / c;
    d[m - 1] = (3.0 * v[m] + 10.0 * v[m - 1] - 18.0 * v[m - 2] + 6.0 * v[m - 3] - v[m - 4]) / c;
    d
}

// w_m = V(mh) − V((m−1)h), m = 1..n−1 (index 0 unused)
fn primitive_weights(spec: &BernsteinSpec, h: f64, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|m| spec.tail_primitive(m as f64 * h)).collect();
    let mut w = vec![0.0; n];
    for m in 1..n {
        w[m] = v[m] - v[m - 1];
    }
    w
}

const DIRECT_LIMIT: usize = 8192;

// c_j = Σ_{m=1}^{j} d_{j−m} w_m
fn causal_sum(d: &[f64], w: &[f64]) -> Vec<f64> {
    let n = w.len();
    if n <= DIRECT_LIMIT {
        (0..n)
            .into_par_iter()
            .map(|j| (1..=j).map(|m| d[j - m] * w[m]).sum())
            .collect()
    } else {
        // linear convolution of d[0..n−1] with w[1..n], shifted by one
        let conv = fft_convolve(&d[..n - 1], &w[1..]);
        let mut out = vec![0.0; n];
        out[1..n].copy_from_slice(&conv[..n - 1]);
        out
    }
}

// c_j = Σ_{m=0}^{n−2−j} d_{j+m} w_{m+1}
fn anticausal_sum(d: &[f64], w: &[f64]) -> Vec<f64> {
    let n = w.len();
    let rev_d: Vec<f64> = d[..n - 1].iter().rev().copied().collect();
    let rev = causal_sum_shift0(&rev_d, &w[1..]);
    // rev[i] = Σ_{m=0}^{i} rev_d[i−m] w_{m+1}; j = n−2−i
    let mut out = vec![0.0; n];
    for j in 0..n - 1 {
        out[j] = rev[n - 2 - j];
    }
    out
}

// c_i = Σ_{m=0}^{i} d_{i−m} w_m
fn causal_sum_shift0(d: &[f64], w: &[f64]) -> Vec<f64> {
    let n = d.len();
    if n <= DIRECT_LIMIT {
        (0..n)
            .into_par_iter()
            .map(|i| (0..=i).map(|m| d[i - m] * w[m]).sum())
            .collect()
    } else {
        let mut c = fft_convolve(d, w);
        c.truncate(n);
        c
    }
}

fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = (a.len() + b.len()).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut fa: Vec<Complex64> = a.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fa.resize(len, Complex64::new(0.0, 0.0));
    let mut fb: Vec<Complex64> = b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fb.resize(len, Complex64::new(0.0, 0.0));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / len as f64;
    fa.iter()
        .take(a.len() + b.len() - 1)
        .map(|z| z.re * scale)
        .collect()
}

fn cell_slopes(u: &GridFunction) -> Vec<f64> {
    let mut d: Vec<f64> = u
        .values
        .windows(2)
        .map(|w| (w[1] - w[0]) / u.step)
        .collect();
    d.push(0.0);
    d
}

/// `b·u′(t) + ∫₀^{t−c} u′(t−s) ν(s) ds` on the grid of `u`.
pub fn caputo_derivative(spec: &BernsteinSpec, u: &GridFunction) -> Result<GridFunction> {
    check_spec(spec)?;
    if u.len() < 3 {
        return Err(Error::GridTooCoarse(format!("{} samples", u.len())));
    }
    let d = cell_slopes(u);
    let w = primitive_weights(spec, u.step, u.len());
    let mut out = causal_sum(&d, &w);
    if spec.b > 0.0 {
        for (o, du) in out.iter_mut().zip(derivative(u)) {
            *o += spec.b * du;
        }
    }
    Ok(u.with_values(out))
}

/// Caputo derivative plus `ν(t−c)·u(c)`. The first node is NaN (missing)
/// when the tail is unbounded at 0.
pub fn rl_derivative(spec: &BernsteinSpec, u: &GridFunction) -> Result<GridFunction> {
    let mut out = caputo_derivative(spec, u)?;
    let u0 = u.values[0];
    for (i, o) in out.values.iter_mut().enumerate() {
        let nu = if i == 0 {
            spec.tail_at_zero()
        } else {
            spec.tail(u.step * i as f64)
        };
        *o = if nu.is_infinite() {
            f64::NAN
        } else {
            *o + nu * u0
        };
    }
    Ok(out)
}

/// Weyl-type derivative on a window, `u` clamped to its boundary values outside.
///
/// The neglected part is estimated by `(ν(S) − a)` times the oscillation of `u`
/// on the outer 5% of the window, `S` the half-width.
pub fn weyl_derivative(
    spec: &BernsteinSpec,
    u: &GridFunction,
    dir: Direction,
) -> Result<GridFunction> {
    check_spec(spec)?;
    let n = u.len();
    let half_width = 0.5 * u.step * (n - 1) as f64;
    let edge = (n / 20).max(1);
    let osc = |s: &[f64]| {
        let (lo, hi) = s
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
                (l.min(v), h.max(v))
            });
        hi - lo
    };
    let strip = match dir {
        Direction::Plus => osc(&u.values[..=edge]),
        Direction::Minus => osc(&u.values[n - 1 - edge..]),
    };
    let remainder = (spec.tail(half_width) - spec.a) * strip;
    let limit = 1e-6 * u.sup_norm();
    if remainder > limit {
        return Err(Error::WindowTooNarrow { remainder, limit });
    }

    let d = cell_slopes(u);
    let w = primitive_weights(spec, u.step, n);
    let mut out = match dir {
        Direction::Plus => causal_sum(&d, &w),
        Direction::Minus => anticausal_sum(&d, &w),
    };
    if spec.b > 0.0 {
        for (o, du) in out.iter_mut().zip(derivative(u)) {
            *o += spec.b * du;
        }
    }
    if dir == Direction::Minus {
        for o in out.iter_mut() {
            *o = -*o;
        }
    }
    Ok(u.with_values(out))
}

// ∫₀^h e^{−λτ}dτ and ∫₀^h τ e^{−λτ}dτ without cancellation
fn cell_moments(lambda: f64, h: f64) -> (f64, f64) {
    let x = lambda * h;
    if x < 0.5 {
        let (mut e0, mut e1) = (0.0, 0.0);
        let mut term = 1.0;
        for k in 0..40 {
            e0 += term / (k as f64 + 1.0);
            e1 += term / (k as f64 + 2.0);
            term *= -x / (k as f64 + 1.0);
        }
        (h * e0, h * h * e1)
    } else {
        let ex = (-x).exp();
        (
            (1.0 - ex) / lambda,
            (1.0 - ex * (1.0 + x)) / (lambda * lambda),
        )
    }
}

/// Exact Laplace transform (in `t − origin`) of the piecewise-linear interpolant.
pub fn laplace_transform(u: &GridFunction, lambda: f64) -> f64 {
    let h = u.step;
    let (e0, e1) = cell_moments(lambda, h);
    let decay = (-lambda * h).exp();
    let mut scale = 1.0;
    let mut sum = 0.0;
    for w in u.values.windows(2) {
        sum += scale * (w[0] * e0 + (w[1] - w[0]) / h * e1);
        scale *= decay;
    }
    sum
}

/// Largest relative defect of the Caputo Laplace symbol
/// `L[D u](λ) = f(λ)ũ(λ) − f(λ)u(c)/λ` over `lambdas`.
pub fn laplace_symbol_check(
    spec: &BernsteinSpec,
    u: &GridFunction,
    lambdas: &[f64],
) -> Result<f64> {
    let span = u.step * (u.len() - 1) as f64;
    let lmin = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    if !(lmin * span >= 30.0) {
        return Err(Error::TruncationTooLarge(lmin * span));
    }
    let du = caputo_derivative(spec, u)?;
    let mut worst: f64 = 0.0;
    for &l in lambdas {
        let f = spec.f_real(l);
        let ut = laplace_transform(u, l);
        let lhs = laplace_transform(&du, l);
        let rhs = f * ut - f * u.values[0] / l;
        worst = worst.max((lhs - rhs).abs() / (f * ut).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma;
    use proptest::prelude::*;

    #[test]
    fn constant_has_zero_caputo() {
        let u = GridFunction::sample(0.0, 0.01, 101, |_| 7.0).unwrap();
        for sp in [
            BernsteinSpec::stable(0.4),
            BernsteinSpec::tempered(0.5, 1.0).with_drift(1.0),
        ] {
            let d = caputo_derivative(&sp, &u).unwrap();
            assert!(d.values.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn pure_drift_is_ordinary_derivative() {
        let sp = BernsteinSpec::drift(0.0, 1.0);
        let u = GridFunction::sample(0.0, 1e-3, 1001, |t| t * t).unwrap();
        let d = caputo_derivative(&sp, &u).unwrap();
        for (t, v) in u.nodes().zip(&d.values) {
            assert!((v - 2.0 * t).abs() < 1e-10);
        }
        let e = GridFunction::sample(0.0, 1e-3, 1001, f64::exp).unwrap();
        let r = rl_derivative(&sp, &e).unwrap();
        for (t, v) in e.nodes().zip(&r.values) {
            assert!((v - t.exp()).abs() < 1e-9 * t.exp());
        }
    }

    #[test]
    fn rl_minus_caputo_is_tail_term() {
        let sp = BernsteinSpec::tempered(0.3, 2.0).with_killing(0.5);
        let u = GridFunction::sample(0.0, 0.01, 200, |t| (1.0 + t).ln() + 2.0).unwrap();
        let c = caputo_derivative(&sp, &u).unwrap();
        let r = rl_derivative(&sp, &u).unwrap();
        assert!(r.values[0].is_nan());
        for i in 1..u.len() {
            let want = sp.tail(u.step * i as f64) * u.values[0];
            assert!((r.values[i] - c.values[i] - want).abs() <= 1e-14 * r.values[i].abs().max(1.0));
        }
    }

    #[test]
    fn fft_path_matches_direct() {
        let d: Vec<f64> = (0..9000).map(|i| (i as f64 * 0.01).sin()).collect();
        let w: Vec<f64> = (0..9000).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let direct: Vec<f64> = (0..9000)
            .map(|j| (1..=j).map(|m| d[j - m] * w[m]).sum())
            .collect();
        let fast = causal_sum(&d, &w);
        for (a, b) in direct.iter().zip(&fast) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn weyl_constant_and_drift_telescoping() {
        let c = GridFunction::linspace(-8.0, 8.0, 401, |_| 3.0).unwrap();
        let w = weyl_derivative(&BernsteinSpec::stable(0.5), &c, Direction::Plus).unwrap();
        assert!(w.values.iter().all(|v| v.abs() < 1e-14));

        let g = GridFunction::linspace(-8.0, 8.0, 1601, |x| (-x * x).exp()).unwrap();
        let sp = BernsteinSpec::drift(1.0, 0.0);
        let m = weyl_derivative(&sp, &g, Direction::Minus).unwrap();
        for (a, b) in m.values.iter().zip(&g.values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn weyl_rejects_truncated_data() {
        let u = GridFunction::linspace(-2.0, 2.0, 401, |x| x.sin()).unwrap();
        let r = weyl_derivative(&BernsteinSpec::stable(0.5), &u, Direction::Plus);
        assert!(matches!(r, Err(Error::WindowTooNarrow { .. })));
    }

    #[test]
    fn drift_symbol() {
        let u = GridFunction::sample(0.0, 1e-3, 40001, |t| t).unwrap();
        let e = laplace_symbol_check(&BernsteinSpec::drift(0.0, 1.0), &u, &[1.0]).unwrap();
        assert!(e < 1e-6, "{e}");
        let short = GridFunction::sample(0.0, 1e-3, 1001, |t| t).unwrap();
        assert!(matches!(
            laplace_symbol_check(&BernsteinSpec::drift(0.0, 1.0), &short, &[1.0]),
            Err(Error::TruncationTooLarge(_))
        ));
    }

    #[test]
    fn refinement_improves_stable_caputo() {
        // Caputo of t² for α = 1/2 is 2 t^{1.5}/Γ(2.5)
        let sp = BernsteinSpec::stable(0.5);
        let err = |n: usize| {
            let u = GridFunction::linspace(0.0, 1.0, n, |t| t * t).unwrap();
            let d = caputo_derivative(&sp, &u).unwrap();
            u.nodes()
                .zip(&d.values)
                .map(|(t, v)| (v - 2.0 * t.powf(1.5) / gamma(2.5)).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(101), err(201));
        assert!(e1 / e2 >= 1.8, "{e1} {e2}");
    }

    proptest! {
        #[test]
        fn derivatives_are_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, k in 0.5f64..4.0) {
            let sp = BernsteinSpec::tempered(0.6, 1.5).with_drift(0.5);
            let u = GridFunction::linspace(-4.0, 4.0, 161, |x| (-x * x).exp()).unwrap();
            let v = GridFunction::linspace(-4.0, 4.0, 161, |x| (-k * x * x).exp() * x).unwrap();
            let mix = u.with_values(u.values.iter().zip(&v.values).map(|(p, q)| a * p + b * q).collect());
            for op in 0..3 {
                let run = |g: &GridFunction| match op {
                    0 => caputo_derivative(&sp, g).unwrap(),
                    1 => weyl_derivative(&sp, g, Direction::Plus).unwrap(),
                    _ => weyl_derivative(&sp, g, Direction::Minus).unwrap(),
                };
                let (du, dv, dm) = (run(&u), run(&v), run(&mix));
                for i in 0..u.len() {
                    let lin = a * du.values[i] + b * dv.values[i];
                    prop_assert!((dm.values[i] - lin).abs() <= 1e-12 * (1.0 + lin.abs()));
                }
            }
        }
    }
}
