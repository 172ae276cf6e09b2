//! Concrete C₀-semigroups, Bochner subordination and the time-changed family 𝒯_t.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::bernstein::{BernsteinSpec, Family};
use crate::calculus::{caputo_derivative, derivative, GridFunction};
use crate::laplace::{DensityField, DensityKind, InversionConfig};
use crate::quad::gauss_legendre;
use crate::{Error, Result};

/// Tail mass discarded when truncating `μ_t` or `l_t`.
pub const TRUNCATION_MASS: f64 = 1e-8;
/// Residuals are reported on `t ≥ RESIDUAL_WINDOW·T`.
pub const RESIDUAL_WINDOW: f64 = 0.05;

const GL_ORDER: usize = 16;
const PANEL_TOL: f64 = 1e-12;
const MAX_DEPTH: u32 = 12;

/// Uniform window; `n` counts samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SemigroupSpec {
    ScalarRelaxation {
        mu: f64,
    },
    /// `u(· + t)` on the closed grid `lo..=hi`, clamped to `u(hi)` past the right end.
    LeftTranslation {
        window: Window,
    },
    /// Periodic heat flow on `[lo, hi)` with `n` equispaced nodes.
    #[serde(rename = "heat_1d", alias = "heat1_d")]
    Heat1D {
        kappa: f64,
        window: Window,
    },
    MarkovMatrix {
        q: Vec<Vec<f64>>,
    },
}

impl SemigroupSpec {
    pub fn scalar(mu: f64) -> Self {
        SemigroupSpec::ScalarRelaxation { mu }
    }

    pub fn translation(lo: f64, hi: f64, n: usize) -> Self {
        SemigroupSpec::LeftTranslation {
            window: Window { lo, hi, n },
        }
    }

    pub fn heat(kappa: f64, lo: f64, hi: f64, n: usize) -> Self {
        SemigroupSpec::Heat1D {
            kappa,
            window: Window { lo, hi, n },
        }
    }

    pub fn markov(q: Vec<Vec<f64>>) -> Self {
        SemigroupSpec::MarkovMatrix { q }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::SpecInvalid(m));
        let check_window = |w: &Window| {
            if !(w.lo.is_finite() && w.hi.is_finite() && w.hi > w.lo) || w.n < 3 {
                return bad(format!("window {w:?} needs lo < hi and n >= 3"));
            }
            Ok(())
        };
        match self {
            SemigroupSpec::ScalarRelaxation { mu } => {
                if !(*mu > 0.0 && mu.is_finite()) {
                    return bad(format!("relaxation rate mu = {mu} must be positive"));
                }
            }
            SemigroupSpec::LeftTranslation { window } => check_window(window)?,
            SemigroupSpec::Heat1D { kappa, window } => {
                if !(*kappa > 0.0 && kappa.is_finite()) {
                    return bad(format!("diffusivity kappa = {kappa} must be positive"));
                }
                check_window(window)?;
            }
            SemigroupSpec::MarkovMatrix { q } => {
                let n = q.len();
                if n == 0 || q.iter().any(|r| r.len() != n) {
                    return bad("generator matrix must be square and non-empty".into());
                }
                for (i, row) in q.iter().enumerate() {
                    if row.iter().any(|v| !v.is_finite()) {
                        return bad(format!("row {i} has non-finite entries"));
                    }
                    if row.iter().enumerate().any(|(j, &v)| j != i && v < 0.0) {
                        return bad(format!("row {i} has a negative off-diagonal rate"));
                    }
                    let scale: f64 = row.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
                    let sum: f64 = row.iter().sum();
                    if sum.abs() > 1e-12 * scale {
                        return bad(format!("row {i} sums to {sum}, not 0"));
                    }
                }
            }
        }
        Ok(())
    }

    /// State-space dimension.
    pub fn dim(&self) -> usize {
        match self {
            SemigroupSpec::ScalarRelaxation { .. } => 1,
            SemigroupSpec::LeftTranslation { window } | SemigroupSpec::Heat1D { window, .. } => {
                window.n
            }
            SemigroupSpec::MarkovMatrix { q } => q.len(),
        }
    }

    /// Grid spacing for the grid variants.
    pub fn step(&self) -> Option<f64> {
        match self {
            SemigroupSpec::LeftTranslation { window: w } => Some((w.hi - w.lo) / (w.n - 1) as f64),
            SemigroupSpec::Heat1D { window: w, .. } => Some((w.hi - w.lo) / w.n as f64),
            _ => None,
        }
    }

    /// Spatial nodes of the state, or state indices for the discrete variants.
    pub fn nodes(&self) -> Vec<f64> {
        match (self, self.step()) {
            (
                SemigroupSpec::LeftTranslation { window: w }
                | SemigroupSpec::Heat1D { window: w, .. },
                Some(h),
            ) => (0..w.n).map(|i| w.lo + i as f64 * h).collect(),
            _ => (0..self.dim()).map(|i| i as f64).collect(),
        }
    }

    /// The variant's natural norm.
    pub fn norm(&self, u: &[f64]) -> f64 {
        match self {
            SemigroupSpec::Heat1D { .. } => {
                let h = self.step().unwrap_or(1.0);
                (h * u.iter().map(|v| v * v).sum::<f64>()).sqrt()
            }
            _ => u.iter().fold(0.0, |m: f64, v| m.max(v.abs())),
        }
    }

    fn check_state(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "state has {} entries, semigroup expects {}",
                u.len(),
                self.dim()
            )));
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("state has non-finite entries".into()));
        }
        Ok(())
    }

    fn matrix(&self) -> Option<DMatrix<f64>> {
        match self {
            SemigroupSpec::MarkovMatrix { q } => {
                let n = q.len();
                Some(DMatrix::from_fn(n, n, |i, j| q[i][j]))
            }
            _ => None,
        }
    }
}

fn nonnegative_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NegativeTime(t))
    }
}

fn wavenumbers(n: usize, period: f64) -> Vec<f64> {
    let base = 2.0 * std::f64::consts::PI / period;
    (0..n)
        .map(|k| if k <= n / 2 { k as f64 } else { k as f64 - n as f64 } * base)
        .collect()
}

// ifft(m(ξ)·fft(u)) for a real even multiplier
fn spectral(u: &[f64], period: f64, mult: impl Fn(f64) -> f64) -> Vec<f64> {
    let n = u.len();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut buf);
    for (c, xi) in buf.iter_mut().zip(wavenumbers(n, period)) {
        *c *= mult(xi);
    }
    inv.process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

// u at fractional index p with clamping at both ends
fn lerp(u: &[f64], p: f64) -> f64 {
    let last = u.len() - 1;
    if p <= 0.0 {
        return u[0];
    }
    let k = p.floor() as usize;
    if k >= last {
        return u[last];
    }
    let fr = p - k as f64;
    u[k] + fr * (u[k + 1] - u[k])
}

// right-continuous slope of the interpolant at fractional index p; zero past the end
fn slope_at(u: &[f64], p: f64, h: f64) -> f64 {
    let k = p.floor();
    if k < 0.0 || k as usize >= u.len() - 1 {
        return 0.0;
    }
    let k = k as usize;
    (u[k + 1] - u[k]) / h
}

/// `T_t u`.
pub fn apply(sg: &SemigroupSpec, t: f64, u: &[f64]) -> Result<Vec<f64>> {
    nonnegative_time(t)?;
    sg.check_state(u)?;
    if t == 0.0 {
        return Ok(u.to_vec());
    }
    Ok(match sg {
        SemigroupSpec::ScalarRelaxation { mu } => vec![(-mu * t).exp() * u[0]],
        SemigroupSpec::LeftTranslation { .. } => {
            let h = sg.step().unwrap();
            let shift = t / h;
            (0..u.len()).map(|j| lerp(u, j as f64 + shift)).collect()
        }
        SemigroupSpec::Heat1D { kappa, window } => {
            spectral(u, window.hi - window.lo, |xi| (-kappa * xi * xi * t).exp())
        }
        SemigroupSpec::MarkovMatrix { .. } => {
            let q = sg.matrix().unwrap();
            let e = (q * t).exp();
            (e * DVector::from_column_slice(u)).as_slice().to_vec()
        }
    })
}

/// Generator `Au`: `−μu`, a 4th-order difference derivative, `κu''` spectrally, or `Qu`.
pub fn generator(sg: &SemigroupSpec, u: &[f64]) -> Result<Vec<f64>> {
    sg.check_state(u)?;
    Ok(match sg {
        SemigroupSpec::ScalarRelaxation { mu } => vec![-mu * u[0]],
        SemigroupSpec::LeftTranslation { window } => {
            let g = GridFunction::new(window.lo, sg.step().unwrap(), u.to_vec())?;
            derivative(&g)
        }
        SemigroupSpec::Heat1D { kappa, window } => {
            spectral(u, window.hi - window.lo, |xi| -kappa * xi * xi)
        }
        SemigroupSpec::MarkovMatrix { .. } => {
            let q = sg.matrix().unwrap();
            (q * DVector::from_column_slice(u)).as_slice().to_vec()
        }
    })
}

/// `d/ds T_s u` (right derivative for the translation grid).
pub fn velocity(sg: &SemigroupSpec, s: f64, u: &[f64]) -> Result<Vec<f64>> {
    nonnegative_time(s)?;
    sg.check_state(u)?;
    Ok(match sg {
        SemigroupSpec::ScalarRelaxation { mu } => vec![-mu * (-mu * s).exp() * u[0]],
        SemigroupSpec::LeftTranslation { .. } => {
            let h = sg.step().unwrap();
            (0..u.len())
                .map(|j| slope_at(u, j as f64 + s / h, h))
                .collect()
        }
        SemigroupSpec::Heat1D { kappa, window } => spectral(u, window.hi - window.lo, |xi| {
            let k = kappa * xi * xi;
            -k * (-k * s).exp()
        }),
        SemigroupSpec::MarkovMatrix { .. } => {
            let q = sg.matrix().unwrap();
            let e = (&q * s).exp();
            (q * (e * DVector::from_column_slice(u)))
                .as_slice()
                .to_vec()
        }
    })
}

/// Finite measure on `[0, ∞)` as weighted nodes; atoms are ordinary nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    fn dirac(s: f64, mass: f64) -> Self {
        DiscreteMeasure {
            nodes: vec![s],
            weights: vec![mass],
        }
    }

    pub fn mass(&self) -> f64 {
        crate::ctrw::neumaier_sum(self.weights.iter().copied())
    }

    fn push(&mut self, s: f64, w: f64) {
        self.nodes.push(s);
        self.weights.push(w);
    }

    // drop negative ringing and rescale to the exact total mass
    fn normalise(mut self, total: f64) -> Self {
        for w in self.weights.iter_mut() {
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let m = self.mass();
        if m > 0.0 {
            for w in self.weights.iter_mut() {
                *w *= total / m;
            }
        }
        self
    }

    /// `∫ T_s u m(ds)`.
    pub fn integrate(&self, sg: &SemigroupSpec, u: &[f64]) -> Result<Vec<f64>> {
        let pieces: Vec<Vec<f64>> = self
            .nodes
            .par_iter()
            .zip(self.weights.par_iter())
            .filter(|(_, &w)| w != 0.0)
            .map(|(&s, &w)| apply(sg, s, u).map(|v| v.into_iter().map(|x| w * x).collect()))
            .collect::<Result<_>>()?;
        Ok((0..u.len())
            .map(|j| crate::ctrw::neumaier_sum(pieces.iter().map(|p| p[j])))
            .collect())
    }
}

// GL nodes of a panel, accepted when one panel and its two halves agree on the mass
fn adaptive_panel<F: Fn(f64) -> Result<f64>>(
    f: &F,
    a: f64,
    b: f64,
    depth: u32,
    rule: &(Vec<f64>, Vec<f64>),
    out: &mut DiscreteMeasure,
) -> Result<()> {
    let eval = |lo: f64, hi: f64| -> Result<(Vec<f64>, Vec<f64>)> {
        let (c, r) = ((hi + lo) / 2.0, (hi - lo) / 2.0);
        let mut xs = Vec::with_capacity(GL_ORDER);
        let mut ws = Vec::with_capacity(GL_ORDER);
        for (x, w) in rule.0.iter().zip(&rule.1) {
            let s = c + r * x;
            xs.push(s);
            ws.push(r * w * f(s)?);
        }
        Ok((xs, ws))
    };
    let m = (a + b) / 2.0;
    let (_, w0) = eval(a, b)?;
    let (x1, w1) = eval(a, m)?;
    let (x2, w2) = eval(m, b)?;
    let coarse: f64 = w0.iter().sum();
    let fine: f64 = w1.iter().sum::<f64>() + w2.iter().sum::<f64>();
    if (coarse - fine).abs() <= PANEL_TOL || depth >= MAX_DEPTH {
        for (s, w) in x1.into_iter().zip(w1).chain(x2.into_iter().zip(w2)) {
            out.push(s, w);
        }
        return Ok(());
    }
    adaptive_panel(f, a, m, depth + 1, rule, out)?;
    adaptive_panel(f, m, b, depth + 1, rule, out)
}

fn panels<F: Fn(f64) -> Result<f64>>(
    f: &F,
    breaks: &[f64],
    out: &mut DiscreteMeasure,
) -> Result<()> {
    let rule = gauss_legendre(GL_ORDER);
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            adaptive_panel(f, w[0], w[1], 0, &rule, out)?;
        }
    }
    Ok(())
}

fn require_density(spec: &BernsteinSpec) -> Result<()> {
    if matches!(spec.family, Family::PureDrift) || spec.infinite_activity() {
        Ok(())
    } else {
        Err(Error::UnsupportedSpec(
            "time change needs an infinite-activity Levy measure or a pure drift".into(),
        ))
    }
}

// spot cross-check of the fast node evaluations at the heaviest node
fn spot_check(field: &DensityField, t: f64, m: &DiscreteMeasure) -> Result<()> {
    let Some((i, _)) = m
        .weights
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
    else {
        return Ok(());
    };
    let full = field.clone().with_inversion(InversionConfig::default());
    full.eval(t, m.nodes[i]).map(|_| ())
}

/// The law `l_t(ds)` of `L(t)`, discretised on adaptive Gauss–Legendre panels.
pub fn hitting_measure(spec: &BernsteinSpec, t: f64) -> Result<DiscreteMeasure> {
    nonnegative_time(t)?;
    require_density(spec)?;
    if t == 0.0 {
        return Ok(DiscreteMeasure::dirac(0.0, 1.0));
    }
    let (a, b) = (spec.a, spec.b);
    if matches!(spec.family, Family::PureDrift) {
        // L(t) = min(t/b, ζ) with ζ ~ Exp(a)
        let mut m = DiscreteMeasure {
            nodes: vec![],
            weights: vec![],
        };
        let top = if b > 0.0 {
            t / b
        } else {
            -TRUNCATION_MASS.ln() / a
        };
        if a > 0.0 {
            let dens = |s: f64| Ok(a * (-a * s).exp());
            let breaks: Vec<f64> = (0..=8).map(|k| top * k as f64 / 8.0).collect();
            panels(&dens, &breaks, &mut m)?;
        }
        if b > 0.0 {
            m.push(t / b, (-a * t / b).exp());
        }
        return Ok(m.normalise(1.0));
    }
    let fast = InversionConfig::fast();
    let tail = DensityField::new(spec.clone(), DensityKind::InverseTailCdf).with_inversion(fast);
    let dens = DensityField::new(spec.clone(), DensityKind::InverseDensity).with_inversion(fast);
    let cap = if b > 0.0 { t / b } else { f64::INFINITY };
    let mut top = (1.0 / spec.f_real(1.0 / t)).min(cap);
    let mut guard = 0;
    while top < cap && tail.eval(t, top)? >= TRUNCATION_MASS {
        top = (2.0 * top).min(cap);
        guard += 1;
        if guard > 200 {
            return Err(Error::QuadratureFailure(
                "could not bound the support of l_t".into(),
            ));
        }
    }
    let breaks: Vec<f64> = (0..=16).map(|k| top * k as f64 / 16.0).collect();
    let mut m = DiscreteMeasure {
        nodes: vec![],
        weights: vec![],
    };
    panels(&|s: f64| dens.eval(t, s), &breaks, &mut m)?;
    spot_check(&dens, t, &m)?;
    Ok(m.normalise(1.0))
}

/// The sub-probability law `μ_t(dx)` of `σ(t)`.
pub fn subordinator_measure(spec: &BernsteinSpec, t: f64) -> Result<DiscreteMeasure> {
    nonnegative_time(t)?;
    require_density(spec)?;
    let total = (-spec.a * t).exp();
    if t == 0.0 {
        return Ok(DiscreteMeasure::dirac(0.0, 1.0));
    }
    let shift = spec.b * t;
    if matches!(spec.family, Family::PureDrift) {
        return Ok(DiscreteMeasure::dirac(shift, total));
    }
    let fast = InversionConfig::fast();
    let cdf = DensityField::new(spec.clone(), DensityKind::SubordinatorCdf).with_inversion(fast);
    let dens =
        DensityField::new(spec.clone(), DensityKind::SubordinatorDensity).with_inversion(fast);
    let (mut lo, mut hi) = (1.0, 1.0);
    for _ in 0..200 {
        if cdf.eval(t, shift + lo)? < 1e-12 {
            break;
        }
        lo /= 2.0;
    }
    for _ in 0..400 {
        if total - cdf.eval(t, shift + hi)? < TRUNCATION_MASS {
            break;
        }
        hi *= 2.0;
    }
    let mut breaks = vec![lo];
    while *breaks.last().unwrap() < hi {
        let next = 2.0 * breaks.last().unwrap();
        breaks.push(next);
    }
    let mut m = DiscreteMeasure {
        nodes: vec![],
        weights: vec![],
    };
    panels(&|y: f64| dens.eval(t, shift + y), &breaks, &mut m)?;
    for s in m.nodes.iter_mut() {
        *s += shift;
    }
    spot_check(&dens, t, &m)?;
    Ok(m.normalise(total))
}

/// `^fT_t u = ∫ T_s u μ_t(ds)`.
pub fn subordinate_apply(
    sg: &SemigroupSpec,
    spec: &BernsteinSpec,
    t: f64,
    u: &[f64],
) -> Result<Vec<f64>> {
    sg.check_state(u)?;
    subordinator_measure(spec, t)?.integrate(sg, u)
}

/// `𝒯_t u = ∫ T_s u l_t(ds)`.
pub fn time_changed_apply(
    sg: &SemigroupSpec,
    spec: &BernsteinSpec,
    t: f64,
    u: &[f64],
) -> Result<Vec<f64>> {
    sg.check_state(u)?;
    hitting_measure(spec, t)?.integrate(sg, u)
}

fn axpy(acc: &mut [f64], a: f64, x: &[f64]) {
    for (y, v) in acc.iter_mut().zip(x) {
        *y += a * v;
    }
}

/// Phillips generator `−f(−A)u = −au + bAu + ∫ (d/ds T_s u)(ν(s) − a) ds`.
pub fn phillips_generator(sg: &SemigroupSpec, spec: &BernsteinSpec, u: &[f64]) -> Result<Vec<f64>> {
    let au = generator(sg, u)?;
    let mut out: Vec<f64> = u
        .iter()
        .zip(&au)
        .map(|(x, g)| -spec.a * x + spec.b * g)
        .collect();
    if matches!(spec.family, Family::PureDrift) {
        return Ok(out);
    }
    let jump_mass =
        |lo: f64, hi: f64| spec.tail_primitive(hi) - spec.tail_primitive(lo) - spec.a * (hi - lo);
    if let SemigroupSpec::LeftTranslation { .. } = sg {
        // the interpolant's velocity is constant on [mh, (m+1)h]
        let h = sg.step().unwrap();
        for m in 0..u.len() - 1 {
            let (s0, s1) = (m as f64 * h, (m + 1) as f64 * h);
            let w = jump_mass(s0, s1);
            let v = velocity(sg, (s0 + s1) / 2.0, u)?;
            axpy(&mut out, w, &v);
        }
        return Ok(out);
    }

    let unorm = sg.norm(u).max(f64::MIN_POSITIVE);
    let mut s_star = 1.0;
    for _ in 0..80 {
        let ts = apply(sg, s_star, u)?;
        let d: Vec<f64> = ts
            .iter()
            .zip(u)
            .zip(&au)
            .map(|((t, x), g)| t - x - s_star * g)
            .collect();
        if sg.norm(&d) <= 1e-10 * unorm {
            break;
        }
        s_star /= 2.0;
    }
    axpy(&mut out, jump_mass(0.0, s_star), &au);

    let rule = gauss_legendre(GL_ORDER);
    let mut lo = s_star;
    let mut quiet = 0;
    for _ in 0..400 {
        let hi = 2.0 * lo;
        let (c, r) = ((hi + lo) / 2.0, (hi - lo) / 2.0);
        let mut panel = vec![0.0; u.len()];
        for (x, w) in rule.0.iter().zip(&rule.1) {
            let s = c + r * x;
            let v = velocity(sg, s, u)?;
            axpy(&mut panel, r * w * (spec.tail(s) - spec.a), &v);
        }
        if panel.iter().any(|v| !v.is_finite()) {
            return Err(Error::QuadratureFailure("non-finite Phillips panel".into()));
        }
        axpy(&mut out, 1.0, &panel);
        let scale = sg.norm(&out) + unorm;
        quiet = if sg.norm(&panel) <= 1e-15 * scale {
            quiet + 1
        } else {
            0
        };
        if quiet >= 3 {
            return Ok(out);
        }
        lo = hi;
    }
    Err(Error::QuadratureFailure(
        "Phillips integral did not settle".into(),
    ))
}

/// Trajectory of the generalised Cauchy problem with its residual report.
#[derive(Debug, Clone, Serialize)]
pub struct CauchyReport {
    pub times: Vec<f64>,
    pub trajectory: Vec<Vec<f64>>,
    /// `‖𝔇q(t_k) − Aq(t_k)‖ / ‖Au₀‖` per node.
    pub residuals: Vec<f64>,
    /// Max residual over `t_k ≥ RESIDUAL_WINDOW·T`.
    pub residual: f64,
    pub generator_norm: f64,
}

/// Solves `𝔇_t q = Aq, q(0) = u0` on `t_k = kT/n` via `q(t) = 𝒯_t u0`.
pub fn solve_cauchy(
    sg: &SemigroupSpec,
    spec: &BernsteinSpec,
    u0: &[f64],
    horizon: f64,
    steps: usize,
) -> Result<CauchyReport> {
    sg.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) || steps < 2 {
        return Err(Error::InvalidInput(format!(
            "time grid needs T > 0 and at least 2 steps, got T = {horizon}, n = {steps}"
        )));
    }
    let au0 = generator(sg, u0)?;
    let generator_norm = sg.norm(&au0);
    if !generator_norm.is_finite() {
        return Err(Error::DomainProxyViolation(
            "A u0 is not finite on the grid".into(),
        ));
    }
    let h = horizon / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * h).collect();
    let trajectory: Vec<Vec<f64>> = times
        .par_iter()
        .map(|&t| time_changed_apply(sg, spec, t, u0))
        .collect::<Result<_>>()?;

    let dim = u0.len();
    let mut dq = vec![vec![0.0; dim]; times.len()];
    for j in 0..dim {
        let g = GridFunction::new(0.0, h, trajectory.iter().map(|q| q[j]).collect())?;
        let d = caputo_derivative(spec, &g)?;
        for (row, v) in dq.iter_mut().zip(d.values) {
            row[j] = v;
        }
    }
    let residuals: Vec<f64> = trajectory
        .par_iter()
        .zip(dq.par_iter())
        .map(|(q, d)| {
            let aq = generator(sg, q)?;
            let diff: Vec<f64> = d.iter().zip(&aq).map(|(x, y)| x - y).collect();
            let n = sg.norm(&diff);
            Ok(if generator_norm > 0.0 {
                n / generator_norm
            } else {
                n
            })
        })
        .collect::<Result<_>>()?;
    let residual = times
        .iter()
        .zip(&residuals)
        .filter(|(t, _)| **t >= RESIDUAL_WINDOW * horizon)
        .fold(0.0, |m: f64, (_, r)| m.max(*r));
    Ok(CauchyReport {
        times,
        trajectory,
        residuals,
        residual,
        generator_norm,
    })
}

/// Residual of [`solve_cauchy`] for each step count.
pub fn cauchy_refinement(
    sg: &SemigroupSpec,
    spec: &BernsteinSpec,
    u0: &[f64],
    horizon: f64,
    steps: &[usize],
) -> Result<Vec<(f64, f64)>> {
    steps
        .iter()
        .map(|&n| solve_cauchy(sg, spec, u0, horizon, n).map(|r| (horizon / n as f64, r.residual)))
        .collect()
}
