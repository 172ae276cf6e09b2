//! Continuous-time random walk approximation of a subordinator: drift plus a
//! compound Poisson process whose jumps follow the tail law truncated at `γ`.
//!
//! Jumps come from thinning one unit-intensity Poisson random measure on
//! `time × level`: a point at level `v` is kept when `v ≤ ν(γ)` and mapped to
//! the size `ν⁻¹(v)` (or to the killing jump when `v ≤ a`). Lowering `γ` only
//! raises the threshold, so refinements are nested path by path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::bernstein::BernsteinSpec;
use crate::error::{Error, Result};

/// Operational-time length of one independently seeded strip.
const STRIP: f64 = 1.0;
const MAX_STRIPS: usize = 1 << 20;

/// A jump size or path level on `[0, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    Infinite,
}

impl ExtReal {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            ExtReal::Finite(x) => Some(*x),
            ExtReal::Infinite => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CtrwConfig {
    pub spec: BernsteinSpec,
    pub gamma: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
}

impl CtrwConfig {
    pub fn new(spec: BernsteinSpec, gamma: f64, horizon: f64, n_paths: usize, seed: u64) -> Self {
        CtrwConfig {
            spec,
            gamma,
            horizon,
            n_paths,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidInput(format!(
                "gamma must be > 0, got {}",
                self.gamma
            )));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidInput(format!(
                "horizon must be > 0, got {}",
                self.horizon
            )));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidInput("n_paths must be >= 1".into()));
        }
        let v = crate::bernstein::validate(&self.spec);
        if !v.is_empty() {
            return Err(Error::SpecInvalid(format!("{v:?}")));
        }
        Ok(())
    }

    /// Jump intensity `ν(γ)`.
    pub fn rate(&self) -> f64 {
        self.spec.tail(self.gamma)
    }
}

/// One CTRW path on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubordinatorPath {
    pub drift: f64,
    pub epochs: Vec<f64>,
    pub sizes: Vec<ExtReal>,
    pub horizon: f64,
}

impl SubordinatorPath {
    /// First epoch of an infinite jump, if any.
    pub fn lifetime(&self) -> Option<f64> {
        self.sizes
            .iter()
            .position(|s| !s.is_finite())
            .map(|i| self.epochs[i])
    }

    pub fn n_jumps(&self) -> usize {
        self.sizes.len()
    }

    /// `b s + Σ_{τ_j ≤ s} y_j`.
    pub fn value(&self, s: f64) -> Result<ExtReal> {
        if s < 0.0 || s > self.horizon {
            return Err(Error::DomainError(format!(
                "path evaluated at {s} outside [0, {}]",
                self.horizon
            )));
        }
        let mut acc = self.drift * s;
        for (&tau, y) in self.epochs.iter().zip(&self.sizes) {
            if tau > s {
                break;
            }
            match y {
                ExtReal::Finite(v) => acc += v,
                ExtReal::Infinite => return Ok(ExtReal::Infinite),
            }
        }
        Ok(ExtReal::Finite(acc))
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// Independent generator for (seed, path, strip), reproducible in any order.
fn strip_rng(seed: u64, path: u64, strip: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut z = splitmix(seed ^ splitmix(strip.wrapping_add(0x51_7CC1_B727_220A)));
    for chunk in key.chunks_mut(8) {
        z = splitmix(z);
        chunk.copy_from_slice(&z.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(path);
    rng
}

/// Draws one jump from `p(dy) = [ν̄(dy) + a δ_∞] 1_{y>γ} / ν(γ)` by inversion.
pub fn sample_jump<R: Rng + ?Sized>(
    spec: &BernsteinSpec,
    gamma: f64,
    rng: &mut R,
) -> Result<ExtReal> {
    let rate = spec.tail(gamma);
    if !(rate > 0.0) {
        return Err(Error::DegenerateLaw);
    }
    let u: f64 = 1.0 - rng.gen::<f64>();
    Ok(level_to_jump(spec, u * rate))
}

fn level_to_jump(spec: &BernsteinSpec, v: f64) -> ExtReal {
    if v <= spec.a {
        ExtReal::Infinite
    } else {
        ExtReal::Finite(spec.tail_inverse(v))
    }
}

// Kept points of one strip, sorted by epoch.
fn strip_points(
    spec: &BernsteinSpec,
    rate: f64,
    seed: u64,
    path: u64,
    strip: usize,
) -> Vec<(f64, ExtReal)> {
    if rate <= 0.0 {
        return Vec::new();
    }
    let mut rng = strip_rng(seed, path, strip as u64);
    let start = strip as f64 * STRIP;
    let mut pts = Vec::new();
    let mut level = 0.0;
    loop {
        let e: f64 = rng.sample(Exp1);
        level += e / STRIP;
        let u: f64 = rng.gen();
        if level > rate {
            break;
        }
        pts.push((start + u * STRIP, level_to_jump(spec, level)));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts
}

fn build_path(cfg: &CtrwConfig, path: u64) -> SubordinatorPath {
    build_path_until(cfg, path, cfg.horizon)
}

// Jumps on [0, end]; strips are keyed by index, so a shorter build is a prefix.
fn build_path_until(cfg: &CtrwConfig, path: u64, end: f64) -> SubordinatorPath {
    let rate = cfg.rate();
    let n_strips = (end / STRIP).ceil() as usize;
    let mut epochs = Vec::new();
    let mut sizes = Vec::new();
    'strips: for j in 0..n_strips {
        for (tau, y) in strip_points(&cfg.spec, rate, cfg.seed, path, j) {
            if tau > end {
                break 'strips;
            }
            epochs.push(tau);
            sizes.push(y);
            if !y.is_finite() {
                break 'strips;
            }
        }
    }
    SubordinatorPath {
        drift: cfg.spec.b,
        epochs,
        sizes,
        horizon: end,
    }
}

/// Path number 0 of the configuration.
pub fn simulate_path(cfg: &CtrwConfig) -> Result<SubordinatorPath> {
    simulate_path_index(cfg, 0)
}

/// Path `index` of the ensemble defined by `cfg`.
pub fn simulate_path_index(cfg: &CtrwConfig, index: u64) -> Result<SubordinatorPath> {
    cfg.validate()?;
    Ok(build_path(cfg, index))
}

// Crossing scan shared by finished paths and streamed ensembles.
struct Crossing {
    pos: f64,
    now: f64,
}

impl Crossing {
    // Advances to a jump at `tau`; returns the hitting time if level `t` is passed.
    fn step(&mut self, b: f64, t: f64, tau: f64, y: ExtReal) -> Option<f64> {
        let before = self.pos + b * (tau - self.now);
        if b > 0.0 && before > t {
            return Some(self.now + (t - self.pos) / b);
        }
        self.now = tau;
        match y {
            ExtReal::Infinite => Some(tau),
            ExtReal::Finite(v) => {
                self.pos = before + v;
                if self.pos > t {
                    Some(tau)
                } else {
                    None
                }
            }
        }
    }

    fn drift_until(&self, b: f64, t: f64, end: f64) -> Option<f64> {
        if b > 0.0 {
            let s = self.now + (t - self.pos) / b;
            if s <= end {
                return Some(s);
            }
        }
        None
    }
}

/// `inf{s : path(s) > t}`.
pub fn hitting_time(path: &SubordinatorPath, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let mut c = Crossing { pos: 0.0, now: 0.0 };
    for (&tau, &y) in path.epochs.iter().zip(&path.sizes) {
        if let Some(s) = c.step(path.drift, t, tau, y) {
            return Ok(s);
        }
    }
    c.drift_until(path.drift, t, path.horizon)
        .ok_or(Error::NoCrossing {
            level: t,
            horizon: path.horizon,
        })
}

// Hitting time with strips generated on demand past the configured horizon.
fn streamed_hitting_time(cfg: &CtrwConfig, rate: f64, path: u64, t: f64) -> Result<f64> {
    let b = cfg.spec.b;
    let mut c = Crossing { pos: 0.0, now: 0.0 };
    for j in 0..MAX_STRIPS {
        for (tau, y) in strip_points(&cfg.spec, rate, cfg.seed, path, j) {
            if let Some(s) = c.step(b, t, tau, y) {
                return Ok(s);
            }
        }
        if let Some(s) = c.drift_until(b, t, (j + 1) as f64 * STRIP) {
            return Ok(s);
        }
    }
    Err(Error::NoCrossing {
        level: t,
        horizon: MAX_STRIPS as f64 * STRIP,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// `σ(t)` at operational time `t`.
    Subordinator,
    /// `L(t)` at level `t`.
    HittingTime,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Functional {
    Mean,
    Laplace {
        lambda: f64,
    },
    Cdf {
        grid: Vec<f64>,
    },
    /// `Pr{value < ∞}`
    Survival,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatsRow {
    pub t: f64,
    /// Grid abscissa for CDFs, `λ` for Laplace functionals, NaN otherwise.
    pub x: f64,
    pub estimate: f64,
    pub std_error: f64,
}

/// Per-path values of the target at each entry of `t_list` (rows = paths).
pub fn sample_values(
    cfg: &CtrwConfig,
    target: Target,
    t_list: &[f64],
) -> Result<Vec<Vec<ExtReal>>> {
    cfg.validate()?;
    if let Some(&t) = t_list.iter().find(|t| **t < 0.0) {
        return Err(Error::NegativeTime(t));
    }
    if target == Target::Subordinator {
        if let Some(&t) = t_list.iter().find(|t| **t > cfg.horizon) {
            return Err(Error::DomainError(format!(
                "time {t} beyond the simulation horizon {}",
                cfg.horizon
            )));
        }
    }
    let rate = cfg.rate();
    let end = t_list.iter().cloned().fold(0.0, f64::max);
    (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|p| match target {
            Target::Subordinator => {
                let path = build_path_until(cfg, p, end);
                t_list.iter().map(|&t| path.value(t)).collect()
            }
            Target::HittingTime => t_list
                .iter()
                .map(|&t| streamed_hitting_time(cfg, rate, p, t).map(ExtReal::Finite))
                .collect(),
        })
        .collect()
}

/// Compensated (Neumaier) sum.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = neumaier_sum(xs.iter().copied()) / n;
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let var = neumaier_sum(xs.iter().map(|x| (x - m) * (x - m))) / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Monte Carlo estimates with standard errors from the path-level variance.
pub fn ensemble_stats(
    cfg: &CtrwConfig,
    target: Target,
    t_list: &[f64],
    functional: &Functional,
) -> Result<Vec<StatsRow>> {
    let values = sample_values(cfg, target, t_list)?;
    let mut rows = Vec::new();
    for (k, &t) in t_list.iter().enumerate() {
        let col: Vec<ExtReal> = values.iter().map(|r| r[k]).collect();
        let row = |x: f64, per_path: Vec<f64>| {
            let (estimate, std_error) = mean_and_se(&per_path);
            StatsRow {
                t,
                x,
                estimate,
                std_error,
            }
        };
        match functional {
            Functional::Mean => {
                if col.iter().any(|v| !v.is_finite()) {
                    rows.push(StatsRow {
                        t,
                        x: f64::NAN,
                        estimate: f64::INFINITY,
                        std_error: f64::NAN,
                    });
                } else {
                    rows.push(row(
                        f64::NAN,
                        col.iter().filter_map(ExtReal::finite).collect(),
                    ));
                }
            }
            Functional::Laplace { lambda } => rows.push(row(
                *lambda,
                col.iter()
                    .map(|v| v.finite().map_or(0.0, |x| (-lambda * x).exp()))
                    .collect(),
            )),
            Functional::Cdf { grid } => {
                for &g in grid {
                    rows.push(row(
                        g,
                        col.iter()
                            .map(|v| v.finite().map_or(0.0, |x| if x <= g { 1.0 } else { 0.0 }))
                            .collect(),
                    ));
                }
            }
            Functional::Survival => rows.push(row(
                f64::NAN,
                col.iter()
                    .map(|v| if v.is_finite() { 1.0 } else { 0.0 })
                    .collect(),
            )),
        }
    }
    Ok(rows)
}

/// Sup-distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            (c - i as f64 / n).abs().max((c - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}
