//! Numerical Laplace inversion and the distributional quantities built on it:
//! subordinator densities `μ_t`, hitting-time densities `l_t`, their tails,
//! and the renewal function.
//!
//! Closed-form families are inverted by fixed Talbot in double precision and
//! cross-checked by Gaver–Stehfest with the transform evaluated in 192-bit
//! arithmetic. Tabulated tails cannot be continued into `Re λ < 0`, so they use
//! the Euler (Abate–Whitt) algorithm at two orders instead.

use astro_float::{BigFloat, Consts, RoundingMode};
use num_complex::Complex64;
use rayon::prelude::*;
use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::bernstein::{BernsteinSpec, Family};
use crate::error::{Error, Result};
use crate::quad::{self, Tol};

/// Points fully cross-checked by [`DensityField::eval_many`].
pub const SPOT_CHECKS: usize = 16;

// tolerated growth of a Talbot node over e^{rτ} before falling back to Euler
const TALBOT_GROWTH: f64 = 1e3;

const PREC: usize = 192;
const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constant cache"));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Talbot { nodes: usize },
    GaverStehfest { terms: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionConfig {
    pub method: Method,
    /// Run the second algorithm and fail on disagreement.
    pub cross_check: bool,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig {
            method: Method::Talbot { nodes: 32 },
            cross_check: true,
            rtol: 1e-4,
            atol: 1e-8,
        }
    }
}

impl InversionConfig {
    /// Primary method only; for bulk evaluation inside quadratures.
    pub fn fast() -> Self {
        InversionConfig {
            cross_check: false,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.method {
            Method::GaverStehfest { terms } if terms % 2 != 0 || !(8..=24).contains(&terms) => {
                Err(Error::InvalidInput(format!(
                    "Gaver-Stehfest needs an even term count in 8..=24, got {terms}"
                )))
            }
            Method::Talbot { nodes } if nodes < 16 => Err(Error::InvalidInput(format!(
                "Talbot needs at least 16 nodes, got {nodes}"
            ))),
            _ => Ok(()),
        }
    }

    fn check_method(&self) -> Method {
        match self.method {
            Method::Talbot { .. } => Method::GaverStehfest { terms: 24 },
            Method::GaverStehfest { .. } => Method::Talbot { nodes: 32 },
        }
    }
}

/// Which quantity a [`DensityField`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityKind {
    /// `μ_t(x)`
    SubordinatorDensity,
    /// `Pr{σ(t) ≤ x}`
    SubordinatorCdf,
    /// `l_t(s)`
    InverseDensity,
    /// `Pr{L(t) > s}`
    InverseTailCdf,
    /// `U(x)`
    RenewalFunction,
    /// `u(x) = U′(x)`
    RenewalDensity,
}

/// Transform kinds with the parameter they carry (`t` or `s`).
#[derive(Debug, Clone, Copy)]
enum Transform {
    // e^{−t f}
    Density(f64),
    // −f e^{−t f}
    DensityDt(f64),
    // e^{−t f}/λ
    SigmaCdf(f64),
    // (f/λ) e^{−s f}
    Inverse(f64),
    // −(f²/λ) e^{−s f}
    InverseDs(f64),
    // e^{−s f}/λ
    InverseTail(f64),
    // 1/(λ f)
    Renewal,
    // 1/f
    RenewalDensity,
}

impl Transform {
    // drift factor e^{−p b λ} turned into a shift of the inversion variable
    fn shift(&self, spec: &BernsteinSpec) -> f64 {
        match *self {
            Transform::Density(p)
            | Transform::DensityDt(p)
            | Transform::SigmaCdf(p)
            | Transform::Inverse(p)
            | Transform::InverseDs(p)
            | Transform::InverseTail(p) => p * spec.b,
            Transform::Renewal | Transform::RenewalDensity => 0.0,
        }
    }

    // the `p` in e^{−p f}, for transforms that carry one
    fn damping(&self) -> Option<f64> {
        match *self {
            Transform::Density(p)
            | Transform::DensityDt(p)
            | Transform::SigmaCdf(p)
            | Transform::Inverse(p)
            | Transform::InverseDs(p)
            | Transform::InverseTail(p) => Some(p),
            Transform::Renewal | Transform::RenewalDensity => None,
        }
    }

    fn eval(&self, spec: &BernsteinSpec, l: Complex64) -> Result<Complex64> {
        let f0 = spec.f0(l)?;
        let f = f0 + spec.b * l;
        Ok(match *self {
            Transform::Density(t) => (-t * f0).exp(),
            Transform::DensityDt(t) => -f * (-t * f0).exp(),
            Transform::SigmaCdf(t) => (-t * f0).exp() / l,
            Transform::Inverse(s) => f / l * (-s * f0).exp(),
            Transform::InverseDs(s) => -f * f / l * (-s * f0).exp(),
            Transform::InverseTail(s) => (-s * f0).exp() / l,
            Transform::Renewal => 1.0 / (l * f),
            Transform::RenewalDensity => 1.0 / f,
        })
    }

    fn eval_big(&self, spec: &BernsteinSpec, l: &BigFloat, cc: &mut Consts) -> BigFloat {
        let big = |x: f64| BigFloat::from_f64(x, PREC);
        let pow = |x: &BigFloat, e: f64, cc: &mut Consts| {
            x.ln(PREC, RM, cc).mul(&big(e), PREC, RM).exp(PREC, RM, cc)
        };
        let jump = match &spec.family {
            Family::Stable { alpha } => pow(l, *alpha, cc),
            Family::TemperedStable { alpha, theta } => {
                let th = big(*theta);
                pow(&l.add(&th, PREC, RM), *alpha, cc).sub(&pow(&th, *alpha, cc), PREC, RM)
            }
            Family::PureDrift => big(0.0),
            Family::CustomTail(_) => {
                unreachable!("tabulated tails are inverted in double precision")
            }
        };
        let f0 = jump.add(&big(spec.a), PREC, RM);
        let f = f0.add(&l.mul(&big(spec.b), PREC, RM), PREC, RM);
        let damp = |p: f64, cc: &mut Consts| f0.mul(&big(-p), PREC, RM).exp(PREC, RM, cc);
        match *self {
            Transform::Density(t) => damp(t, cc),
            Transform::DensityDt(t) => f.mul(&damp(t, cc), PREC, RM).neg(),
            Transform::SigmaCdf(t) => damp(t, cc).div(l, PREC, RM),
            Transform::Inverse(s) => f.div(l, PREC, RM).mul(&damp(s, cc), PREC, RM),
            Transform::InverseDs(s) => f
                .mul(&f, PREC, RM)
                .div(l, PREC, RM)
                .mul(&damp(s, cc), PREC, RM)
                .neg(),
            Transform::InverseTail(s) => damp(s, cc).div(l, PREC, RM),
            Transform::Renewal => big(1.0).div(&l.mul(&f, PREC, RM), PREC, RM),
            Transform::RenewalDensity => big(1.0).div(&f, PREC, RM),
        }
    }
}

fn big_to_f64(x: &BigFloat) -> f64 {
    format!("{x}").parse().unwrap_or(f64::NAN)
}

/// Fixed Talbot contour (Abate–Valkó) with `m` nodes.
pub fn talbot<F: FnMut(Complex64) -> Result<Complex64>>(
    mut fhat: F,
    t: f64,
    m: usize,
) -> Result<f64> {
    let r = talbot_radius(t, m);
    let mut sum = 0.5 * fhat(Complex64::new(r, 0.0))?.re * (r * t).exp();
    for (s, sigma) in talbot_nodes(t, m) {
        sum += ((t * s).exp() * fhat(s)? * Complex64::new(1.0, sigma)).re;
    }
    Ok(r / m as f64 * sum)
}

fn talbot_radius(t: f64, m: usize) -> f64 {
    2.0 * m as f64 / (5.0 * t)
}

// off-axis nodes s_k and the slope term σ_k of ds/dθ
fn talbot_nodes(t: f64, m: usize) -> impl Iterator<Item = (Complex64, f64)> {
    let mf = m as f64;
    let r = talbot_radius(t, m);
    (1..m).map(move |k| {
        let th = k as f64 * PI / mf;
        let cot = th.cos() / th.sin();
        (
            Complex64::new(r * th * cot, r * th),
            th + (th * cot - 1.0) * cot,
        )
    })
}

// The contour swings into Re λ < 0, where Re f can turn negative (α > 1/2) and
// e^{τs − p f(s)} then outgrows the e^{rτ} scale the node weights are built for.
fn talbot_contour_safe(spec: &BernsteinSpec, tr: Transform, tau: f64, m: usize) -> Result<bool> {
    let Some(p) = tr.damping() else {
        return Ok(true);
    };
    let budget = talbot_radius(tau, m) * tau + TALBOT_GROWTH.ln();
    for (s, _) in talbot_nodes(tau, m) {
        let log_mag = tau * s.re - p * spec.f0(s)?.re;
        if !(log_mag <= budget) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Euler summation of the Bromwich integral (Abate–Whitt) with `2m + 1` terms.
pub fn euler<F: FnMut(Complex64) -> Result<Complex64>>(
    mut fhat: F,
    t: f64,
    m: usize,
) -> Result<f64> {
    let mut xi = vec![0.0; 2 * m + 1];
    xi[0] = 0.5;
    for x in xi.iter_mut().take(m + 1).skip(1) {
        *x = 1.0;
    }
    let two_m = 0.5f64.powi(m as i32);
    xi[2 * m] = two_m;
    let mut binom = 1.0;
    for k in 1..m {
        binom *= (m - k + 1) as f64 / k as f64;
        xi[2 * m - k] = xi[2 * m - k + 1] + two_m * binom;
    }
    let beta0 = m as f64 * 10f64.ln() / 3.0;
    let mut sum = 0.0;
    for (k, x) in xi.iter().enumerate() {
        let beta = Complex64::new(beta0, PI * k as f64);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * x * fhat(beta / t)?.re;
    }
    Ok(10f64.powf(m as f64 / 3.0) / t * sum)
}

fn stehfest_weights(n: usize) -> Arc<Vec<BigFloat>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<BigFloat>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("weight cache");
    guard
        .entry(n)
        .or_insert_with(|| {
            let big = |x: f64| BigFloat::from_f64(x, PREC);
            let fact =
                |k: usize| (1..=k).fold(big(1.0), |acc, i| acc.mul(&big(i as f64), PREC, RM));
            let half = n / 2;
            let w = (1..=n)
                .map(|k| {
                    let mut acc = big(0.0);
                    for j in k.div_ceil(2)..=k.min(half) {
                        let num = big(j as f64)
                            .powi(half, PREC, RM)
                            .mul(&fact(2 * j), PREC, RM);
                        let den = fact(half - j)
                            .mul(&fact(j), PREC, RM)
                            .mul(&fact(j - 1), PREC, RM)
                            .mul(&fact(k - j), PREC, RM)
                            .mul(&fact(2 * j - k), PREC, RM);
                        acc = acc.add(&num.div(&den, PREC, RM), PREC, RM);
                    }
                    if (k + half) % 2 == 1 {
                        acc.neg()
                    } else {
                        acc
                    }
                })
                .collect();
            Arc::new(w)
        })
        .clone()
}

fn gaver_stehfest(spec: &BernsteinSpec, tr: Transform, t: f64, n: usize) -> f64 {
    let weights = stehfest_weights(n);
    CONSTS.with(|cc| {
        let cc = &mut *cc.borrow_mut();
        let big = |x: f64| BigFloat::from_f64(x, PREC);
        let ln2 = big(2.0).ln(PREC, RM, cc);
        let step = ln2.div(&big(t), PREC, RM);
        let mut sum = big(0.0);
        for (k, w) in weights.iter().enumerate() {
            let l = step.mul(&big((k + 1) as f64), PREC, RM);
            sum = sum.add(&w.mul(&tr.eval_big(spec, &l, cc), PREC, RM), PREC, RM);
        }
        big_to_f64(&sum.mul(&step, PREC, RM))
    })
}

fn run(spec: &BernsteinSpec, tr: Transform, t: f64, method: Method) -> Result<f64> {
    match method {
        Method::Talbot { nodes } => talbot(|l| tr.eval(spec, l), t, nodes),
        Method::GaverStehfest { terms } => Ok(gaver_stehfest(spec, tr, t, terms)),
    }
}

// Inverts `tr` at `x`, honouring the drift shift, with the configured cross-check.
fn invert(spec: &BernsteinSpec, tr: Transform, x: f64, cfg: &InversionConfig) -> Result<f64> {
    cfg.validate()?;
    let tau = x - tr.shift(spec);
    if !(tau > 0.0) {
        return Ok(0.0);
    }
    let talbot_ok = spec.is_closed_form()
        && match cfg.method {
            Method::Talbot { nodes } => talbot_contour_safe(spec, tr, tau, nodes)?,
            Method::GaverStehfest { .. } => talbot_contour_safe(spec, tr, tau, 32)?,
        };
    let (primary, check) = if talbot_ok {
        let p = run(spec, tr, tau, cfg.method)?;
        let c = if cfg.cross_check {
            Some(run(spec, tr, tau, cfg.check_method())?)
        } else {
            None
        };
        (p, c)
    } else {
        let p = euler(|l| tr.eval(spec, l), tau, 15)?;
        let c = if cfg.cross_check {
            Some(euler(|l| tr.eval(spec, l), tau, 11)?)
        } else {
            None
        };
        (p, c)
    };
    if !primary.is_finite() {
        return Err(Error::InversionUnstable {
            at: x,
            primary,
            check: check.unwrap_or(f64::NAN),
        });
    }
    if let Some(c) = check {
        if !((primary - c).abs() <= cfg.rtol * primary.abs() + cfg.atol) {
            return Err(Error::InversionUnstable {
                at: x,
                primary,
                check: c,
            });
        }
    }
    Ok(if primary.abs() < 1e-300 { 0.0 } else { primary })
}

// clip inversion noise around the exact bounds of a probability
fn clip_probability(v: f64, atol: f64) -> f64 {
    if v < 0.0 && v > -atol {
        0.0
    } else if v > 1.0 && v < 1.0 + atol {
        1.0
    } else {
        v
    }
}

fn clip_density(v: f64, atol: f64) -> f64 {
    if v < 0.0 && v > -atol {
        0.0
    } else {
        v
    }
}

fn require_infinite_activity(spec: &BernsteinSpec, what: &str) -> Result<()> {
    if spec.infinite_activity() {
        Ok(())
    } else {
        Err(Error::UnsupportedSpec(format!(
            "{what} needs an infinite-activity Levy measure; finite activity gives atoms"
        )))
    }
}

/// Pointwise evaluator for one distributional quantity of a spec.
#[derive(Debug, Clone)]
pub struct DensityField {
    pub spec: BernsteinSpec,
    pub kind: DensityKind,
    pub inversion: InversionConfig,
}

impl DensityField {
    pub fn new(spec: BernsteinSpec, kind: DensityKind) -> Self {
        DensityField {
            spec,
            kind,
            inversion: InversionConfig::default(),
        }
    }

    pub fn with_inversion(mut self, cfg: InversionConfig) -> Self {
        self.inversion = cfg;
        self
    }

    /// Bulk evaluation at `(t, x)` for every `x`: the primary method everywhere and,
    /// when cross-checking is on, the full check at up to [`SPOT_CHECKS`] spread-out points.
    pub fn eval_many(&self, t: f64, xs: &[f64]) -> Result<Vec<f64>> {
        let fast = self.clone().with_inversion(InversionConfig {
            cross_check: false,
            ..self.inversion
        });
        let out: Vec<f64> = xs
            .par_iter()
            .map(|&x| fast.eval(t, x))
            .collect::<Result<_>>()?;
        if self.inversion.cross_check && !xs.is_empty() {
            let stride = xs.len().div_ceil(SPOT_CHECKS).max(1);
            let mut picks: Vec<usize> = (0..xs.len()).step_by(stride).collect();
            picks.push(xs.len() - 1);
            picks
                .par_iter()
                .try_for_each(|&i| self.eval(t, xs[i]).map(|_| ()))?;
        }
        Ok(out)
    }

    /// Evaluates at time `t` and space/level `x`; `t` is ignored for renewal kinds.
    pub fn eval(&self, t: f64, x: f64) -> Result<f64> {
        let sp = &self.spec;
        let cfg = &self.inversion;
        match self.kind {
            DensityKind::SubordinatorDensity => {
                require_infinite_activity(sp, "subordinator density")?;
                positive_time(t)?;
                if x <= sp.b * t {
                    return Ok(0.0);
                }
                invert(sp, Transform::Density(t), x, cfg).map(|v| clip_density(v, cfg.atol))
            }
            DensityKind::SubordinatorCdf => {
                positive_time(t)?;
                if x < sp.b * t {
                    return Ok(0.0);
                }
                if matches!(sp.family, Family::PureDrift) {
                    return Ok((-sp.a * t).exp());
                }
                invert(sp, Transform::SigmaCdf(t), x, cfg).map(|v| clip_probability(v, cfg.atol))
            }
            DensityKind::InverseDensity => {
                require_infinite_activity(sp, "hitting-time density")?;
                positive_time(t)?;
                nonnegative(x)?;
                if x == 0.0 {
                    return Ok(sp.tail(t));
                }
                if sp.b > 0.0 && x >= t / sp.b {
                    return Ok(0.0);
                }
                invert(sp, Transform::Inverse(x), t, cfg).map(|v| clip_density(v, cfg.atol))
            }
            DensityKind::InverseTailCdf => {
                positive_time(t)?;
                nonnegative(x)?;
                if x == 0.0 {
                    return Ok(1.0);
                }
                if sp.b > 0.0 && x >= t / sp.b {
                    return Ok(0.0);
                }
                if matches!(sp.family, Family::PureDrift) {
                    return Ok((-sp.a * x).exp());
                }
                invert(sp, Transform::InverseTail(x), t, cfg).map(|v| clip_probability(v, cfg.atol))
            }
            DensityKind::RenewalFunction => {
                if x <= 0.0 {
                    return Ok(0.0);
                }
                if matches!(sp.family, Family::PureDrift) {
                    return Ok(drift_renewal(sp.a, sp.b, x));
                }
                invert(sp, Transform::Renewal, x, cfg)
            }
            DensityKind::RenewalDensity => {
                if !(x > 0.0) {
                    return Err(Error::DomainError(format!(
                        "renewal density at x = {x}, need x > 0"
                    )));
                }
                if matches!(sp.family, Family::PureDrift) {
                    if sp.b > 0.0 {
                        return Ok((-sp.a * x / sp.b).exp() / sp.b);
                    }
                    return Err(Error::UnsupportedSpec(
                        "renewal measure of pure killing is an atom at 0".into(),
                    ));
                }
                if sp.b == 0.0 && !sp.infinite_activity() {
                    return Err(Error::UnsupportedSpec(
                        "renewal measure has an atom at 0".into(),
                    ));
                }
                invert(sp, Transform::RenewalDensity, x, cfg).map(|v| clip_density(v, cfg.atol))
            }
        }
    }
}

fn positive_time(t: f64) -> Result<()> {
    if t > 0.0 {
        Ok(())
    } else if t < 0.0 {
        Err(Error::NegativeTime(t))
    } else {
        Err(Error::DomainError("time must be positive".into()))
    }
}

fn nonnegative(s: f64) -> Result<()> {
    if s >= 0.0 {
        Ok(())
    } else {
        Err(Error::DomainError(format!("level s = {s} must be >= 0")))
    }
}

// ∫₀ˣ e^{−aw/b}/b dw, or the occupation time 1/a of a pure killing
fn drift_renewal(a: f64, b: f64, x: f64) -> f64 {
    if b == 0.0 {
        return 1.0 / a;
    }
    if a == 0.0 {
        x / b
    } else {
        -(-a * x / b).exp_m1() / a
    }
}

/// `μ_t(x)`
pub fn subordinator_density(spec: &BernsteinSpec, t: f64, x: f64) -> Result<f64> {
    DensityField::new(spec.clone(), DensityKind::SubordinatorDensity).eval(t, x)
}

/// `l_t(s)`
pub fn inverse_density(spec: &BernsteinSpec, t: f64, s: f64) -> Result<f64> {
    DensityField::new(spec.clone(), DensityKind::InverseDensity).eval(t, s)
}

/// `Pr{L(t) > s}`
pub fn inverse_tail_cdf(spec: &BernsteinSpec, t: f64, s: f64) -> Result<f64> {
    DensityField::new(spec.clone(), DensityKind::InverseTailCdf).eval(t, s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenewalMode {
    Function,
    Density,
}

/// `U(x)` or `u(x)`.
pub fn renewal(spec: &BernsteinSpec, x: f64, mode: RenewalMode) -> Result<f64> {
    let kind = match mode {
        RenewalMode::Function => DensityKind::RenewalFunction,
        RenewalMode::Density => DensityKind::RenewalDensity,
    };
    DensityField::new(spec.clone(), kind).eval(0.0, x)
}

/// `l_t(s)` by inversion only, without the `s = 0` boundary rule.
pub fn inverse_density_inverted(
    spec: &BernsteinSpec,
    t: f64,
    s: f64,
    cfg: &InversionConfig,
) -> Result<f64> {
    require_infinite_activity(spec, "hitting-time density")?;
    positive_time(t)?;
    nonnegative(s)?;
    invert(spec, Transform::Inverse(s), t, cfg)
}

/// `∂_t μ_t(x)`
pub fn subordinator_density_dt(
    spec: &BernsteinSpec,
    t: f64,
    x: f64,
    cfg: &InversionConfig,
) -> Result<f64> {
    require_infinite_activity(spec, "subordinator density")?;
    positive_time(t)?;
    invert(spec, Transform::DensityDt(t), x, cfg)
}

/// `∂_s l_t(s)`
pub fn inverse_density_ds(
    spec: &BernsteinSpec,
    t: f64,
    s: f64,
    cfg: &InversionConfig,
) -> Result<f64> {
    require_infinite_activity(spec, "hitting-time density")?;
    positive_time(t)?;
    nonnegative(s)?;
    invert(spec, Transform::InverseDs(s), t, cfg)
}

/// `l_t(s) = b μ_s(t) + ∫₀ᵗ μ_s(t − z) ν(z) dz`, the convolution route.
pub fn inverse_density_convolution(spec: &BernsteinSpec, t: f64, s: f64) -> Result<f64> {
    require_infinite_activity(spec, "hitting-time density")?;
    positive_time(t)?;
    if s == 0.0 {
        return Ok(spec.tail(t));
    }
    nonnegative(s)?;
    let cfg = InversionConfig::fast();
    let field =
        DensityField::new(spec.clone(), DensityKind::SubordinatorDensity).with_inversion(cfg);
    // μ_s lives on (bs, ∞); with y = t − bs − z the integrand is g(y) ν(Y − y), Y = t − bs
    let span = t - spec.b * s;
    if span <= 0.0 {
        return Ok(0.0);
    }
    let g = |y: f64| field.eval(s, spec.b * s + y);
    let mut err = None;
    let mut top = quad::tanh_sinh(
        |y, _, z| match g(y) {
            Ok(v) => v * spec.tail(z),
            Err(e) => {
                err = Some(e);
                0.0
            }
        },
        0.5 * span,
        span,
        1e-8,
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    // dyadic panels towards y = 0, where μ_s vanishes
    let mut hi = 0.5 * span;
    let mut quiet = 0;
    for _ in 0..200 {
        let lo = 0.5 * hi;
        let mut perr = None;
        let part = quad::integrate(
            |y| match g(y) {
                Ok(v) => v * spec.tail(span - y),
                Err(e) => {
                    perr = Some(e);
                    0.0
                }
            },
            lo,
            hi,
            Tol::new(1e-11 * top.abs(), 1e-8),
        )?;
        if let Some(e) = perr {
            return Err(e);
        }
        top += part;
        if part.abs() <= 1e-12 * top.abs() {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
        hi = lo;
    }
    let drift = if spec.b > 0.0 { spec.b * g(span)? } else { 0.0 };
    Ok(drift + top)
}
