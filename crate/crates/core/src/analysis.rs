//! Renewal-function moment machinery for the inverse subordinator.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::bernstein::BernsteinSpec;
use crate::laplace::{DensityField, DensityKind, InversionConfig};
use crate::quad::gauss_legendre;
use crate::{Error, Result};

/// Relative change under grid doubling that triggers `GridTooCoarse`.
pub const REFINEMENT_TOL: f64 = 1e-3;
/// Default number of τ-cells for the moment recursion.
pub const DEFAULT_CELLS: usize = 512;

const MAX_COMPONENTS: usize = 3;
const MAX_TOTAL_ORDER: u32 = 4;

fn renewal_field(spec: &BernsteinSpec, cfg: InversionConfig) -> DensityField {
    DensityField::new(spec.clone(), DensityKind::RenewalFunction).with_inversion(cfg)
}

/// `U(x)` at many points, in parallel; `U(x) = 0` for `x ≤ 0`.
pub fn renewal_values(spec: &BernsteinSpec, xs: &[f64], cfg: &InversionConfig) -> Result<Vec<f64>> {
    renewal_field(spec, *cfg).eval_many(0.0, xs)
}

/// `U(kh)` for `k = 0..=n`.
#[derive(Debug, Clone, Serialize)]
pub struct RenewalGrid {
    pub step: f64,
    pub horizon: f64,
    pub values: Vec<f64>,
}

impl RenewalGrid {
    pub fn build(spec: &BernsteinSpec, horizon: f64, cells: usize) -> Result<Self> {
        Self::build_with(spec, horizon, cells, &InversionConfig::default())
    }

    pub fn build_with(
        spec: &BernsteinSpec,
        horizon: f64,
        cells: usize,
        cfg: &InversionConfig,
    ) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) || cells == 0 {
            return Err(Error::InvalidInput(format!(
                "renewal grid needs T > 0 and cells > 0, got T = {horizon}, cells = {cells}"
            )));
        }
        let step = horizon / cells as f64;
        let xs: Vec<f64> = (0..=cells).map(|k| k as f64 * step).collect();
        let mut values = renewal_values(spec, &xs, cfg)?;
        // inversion noise must not break monotonicity
        for k in 1..values.len() {
            if values[k] < values[k - 1] {
                values[k] = values[k - 1];
            }
        }
        Ok(RenewalGrid {
            step,
            horizon,
            values,
        })
    }

    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Linear interpolation; zero for `x ≤ 0`, clamped past the horizon.
    pub fn at(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let p = x / self.step;
        let k = p.floor() as usize;
        if k + 1 >= self.values.len() {
            return *self.values.last().unwrap();
        }
        let fr = p - k as f64;
        self.values[k] + fr * (self.values[k + 1] - self.values[k])
    }
}

fn check_moment_args(times: &[f64], orders: &[u32]) -> Result<()> {
    if times.len() != orders.len() {
        return Err(Error::InvalidInput(format!(
            "{} times but {} orders",
            times.len(),
            orders.len()
        )));
    }
    if times.is_empty() || times.len() > MAX_COMPONENTS {
        return Err(Error::InvalidInput(format!(
            "mixed moments take 1 to {MAX_COMPONENTS} times, got {}",
            times.len()
        )));
    }
    if orders.iter().sum::<u32>() > MAX_TOTAL_ORDER {
        return Err(Error::InvalidInput(format!(
            "total order is capped at {MAX_TOTAL_ORDER}"
        )));
    }
    if let Some(t) = times.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(Error::DomainError(format!(
            "moment time {t} must be positive"
        )));
    }
    Ok(())
}

/// `E Π L(t_i)^{m_i}` by the renewal recursion with `cells` τ-cells over `[0, max t]`.
///
/// Components with `m_i = 0` do not enter; the integral runs to the smallest
/// time among the remaining ones.
pub fn mixed_moment_on(
    spec: &BernsteinSpec,
    times: &[f64],
    orders: &[u32],
    cells: usize,
) -> Result<f64> {
    check_moment_args(times, orders)?;
    if orders.iter().all(|&m| m == 0) {
        return Ok(1.0);
    }
    let idx: Vec<usize> = (0..times.len()).filter(|&i| orders[i] > 0).collect();
    let t: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
    let m: Vec<u32> = idx.iter().map(|&i| orders[i]).collect();
    let n = t.len();
    let tmax = t.iter().cloned().fold(0.0, f64::max);
    let h = tmax / cells as f64;

    let cfg = InversionConfig::default();
    let base: Vec<f64> = (0..=cells).map(|k| k as f64 * h).collect();
    let mut u_base = renewal_values(spec, &base, &cfg)?;
    monotone(&mut u_base);
    // U(t_i − kh), needed for partial last cells
    let u_off: Vec<Vec<f64>> = t
        .iter()
        .map(|&ti| {
            let xs: Vec<f64> = (0..=cells).map(|k| ti - k as f64 * h).collect();
            renewal_values(spec, &xs, &cfg)
        })
        .collect::<Result<_>>()?;

    // all order vectors below m, by total order
    let mut vectors: Vec<Vec<u32>> = vec![vec![]];
    for &mi in &m {
        vectors = vectors
            .into_iter()
            .flat_map(|v| {
                (0..=mi).map(move |x| {
                    let mut w = v.clone();
                    w.push(x);
                    w
                })
            })
            .collect();
    }
    vectors.sort_by_key(|v| v.iter().sum::<u32>());

    let mut tables: HashMap<Vec<u32>, Vec<f64>> = HashMap::new();
    for v in vectors {
        if v.iter().all(|&x| x == 0) {
            tables.insert(v, vec![1.0; cells + 1]);
            continue;
        }
        let active: Vec<usize> = (0..n).filter(|&i| v[i] > 0).collect();
        let jstar = *active
            .iter()
            .min_by(|&&a, &&b| t[a].total_cmp(&t[b]))
            .unwrap();
        let lowered: Vec<(f64, &Vec<f64>, bool)> = active
            .iter()
            .map(|&i| {
                let mut w = v.clone();
                w[i] -= 1;
                let keeps_jstar = w[jstar] > 0;
                (v[i] as f64, &tables[&w], keeps_jstar)
            })
            .collect();
        let g = |k: usize| -> f64 { lowered.iter().map(|(c, tab, _)| c * tab[k]).sum() };
        let row: Vec<f64> = (0..=cells)
            .into_par_iter()
            .map(|k| {
                let r = t[jstar] - k as f64 * h;
                if r <= 0.0 {
                    return 0.0;
                }
                let mut p = (r / h).floor() as usize;
                let mut frac = r / h - p as f64;
                if frac > 1.0 - 1e-9 {
                    p += 1;
                    frac = 0.0;
                }
                let p = p.min(cells - k);
                let mut acc = 0.0;
                for q in 0..p {
                    acc += 0.5 * (g(k + q) + g(k + q + 1)) * (u_base[q + 1] - u_base[q]);
                }
                if frac > 1e-9 {
                    // partial cell [ph, r]; at τ = r component jstar sits at time 0
                    let pos = k as f64 + r / h;
                    let g_end: f64 = lowered
                        .iter()
                        .map(|(c, tab, keeps)| if *keeps { 0.0 } else { c * interp(tab, pos) })
                        .sum();
                    let du = (u_off[jstar][k] - u_base[p]).max(0.0);
                    acc += 0.5 * (g(k + p) + g_end) * du;
                }
                acc
            })
            .collect();
        tables.insert(v, row);
    }
    Ok(tables[&m][0])
}

fn monotone(v: &mut [f64]) {
    for k in 1..v.len() {
        if v[k] < v[k - 1] {
            v[k] = v[k - 1];
        }
    }
}

fn interp(tab: &[f64], pos: f64) -> f64 {
    let k = pos.floor() as usize;
    if k + 1 >= tab.len() {
        return tab[tab.len() - 1];
    }
    let fr = pos - k as f64;
    tab[k] + fr * (tab[k + 1] - tab[k])
}

fn refined<F: Fn(usize) -> Result<f64>>(f: F, cells: usize, what: &str) -> Result<f64> {
    let coarse = f(cells)?;
    let fine = f(2 * cells)?;
    let rel = (fine - coarse).abs() / fine.abs().max(f64::MIN_POSITIVE);
    if rel > REFINEMENT_TOL {
        return Err(Error::GridTooCoarse(format!(
            "{what} moved by {rel:.3e} under grid doubling ({coarse} -> {fine})"
        )));
    }
    Ok(fine)
}

/// [`mixed_moment_on`] with a grid-doubling check.
pub fn mixed_moment(spec: &BernsteinSpec, times: &[f64], orders: &[u32]) -> Result<f64> {
    refined(
        |c| mixed_moment_on(spec, times, orders, c),
        DEFAULT_CELLS,
        "mixed moment",
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Covariance {
    /// `E[L(t)L(t+s)]`
    pub product: f64,
    pub cov: f64,
}

fn product_moment(
    spec: &BernsteinSpec,
    t: f64,
    s: f64,
    cells: usize,
    cfg: &InversionConfig,
) -> Result<f64> {
    let h = t / cells as f64;
    let base: Vec<f64> = (0..=cells).map(|k| k as f64 * h).collect();
    let shifted: Vec<f64> = base.iter().map(|x| t + s - x).collect();
    let mut u = renewal_values(spec, &base, cfg)?;
    monotone(&mut u);
    let us = renewal_values(spec, &shifted, cfg)?;
    // integrand at τ_k: U(t − τ_k) + U(t + s − τ_k)
    let g = |k: usize| u[cells - k] + us[k];
    Ok((0..cells)
        .map(|k| 0.5 * (g(k) + g(k + 1)) * (u[k + 1] - u[k]))
        .sum())
}

/// `E[L(t)L(t+s)] = ∫₀ᵗ (U(t−τ) + U(t+s−τ)) U(dτ)` and the covariance.
pub fn covariance(spec: &BernsteinSpec, t: f64, s: f64) -> Result<Covariance> {
    if !(t > 0.0 && t.is_finite()) || !(s >= 0.0 && s.is_finite()) {
        return Err(Error::DomainError(format!(
            "covariance needs t > 0, s >= 0, got t = {t}, s = {s}"
        )));
    }
    let cfg = InversionConfig::default();
    let product = refined(
        |c| product_moment(spec, t, s, c, &cfg),
        DEFAULT_CELLS,
        "covariance",
    )?;
    let u = renewal_values(spec, &[t, t + s], &cfg)?;
    Ok(Covariance {
        product,
        cov: product - u[0] * u[1],
    })
}

/// Extremes of `1/(f(1/x)·U(x))` over the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub pass: bool,
}

pub fn renewal_bound_check(spec: &BernsteinSpec, xs: &[f64]) -> Result<BoundReport> {
    if xs.is_empty() || xs.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::DomainError(
            "bound check needs positive grid points".into(),
        ));
    }
    let u = renewal_values(spec, xs, &InversionConfig::default())?;
    let ratios: Vec<f64> = xs
        .iter()
        .zip(&u)
        .map(|(x, ux)| 1.0 / (spec.f_real(1.0 / x) * ux))
        .collect();
    let min_ratio = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pass = min_ratio > 0.0 && max_ratio.is_finite() && min_ratio <= max_ratio;
    Ok(BoundReport {
        min_ratio,
        max_ratio,
        pass,
    })
}

/// Pairs violating `U(x+y) ≤ U(x) + U(y)` beyond `1e-8·U(x+y)`.
pub fn subadditivity_check(spec: &BernsteinSpec, pairs: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    let xs: Vec<f64> = pairs.iter().flat_map(|&(x, y)| [x, y, x + y]).collect();
    let u = renewal_values(spec, &xs, &InversionConfig::default())?;
    Ok(pairs
        .iter()
        .zip(u.chunks(3))
        .filter(|(_, v)| v[2] > v[0] + v[1] + 1e-8 * v[2])
        .map(|(p, _)| *p)
        .collect())
}

/// Partial integrals `I(S) = ∫_w^S E[L(t)L(t+s)] ds`.
#[derive(Debug, Clone, Serialize)]
pub struct LongRangeReport {
    pub s_list: Vec<f64>,
    pub integrals: Vec<f64>,
    /// Mean slope of `I` on the last segment.
    pub last_slope: f64,
    /// Mean slope of `I` over `[w, S_{n−1}]`.
    pub reference_slope: f64,
    pub min_integrand: f64,
    pub pass: bool,
}

const LONG_RANGE_CELLS: usize = 256;

pub fn long_range_diagnostic(
    spec: &BernsteinSpec,
    t: f64,
    w: f64,
    s_list: &[f64],
) -> Result<LongRangeReport> {
    if !(t > 0.0 && w > 0.0) {
        return Err(Error::DomainError(format!(
            "long-range diagnostic needs t, w > 0, got {t}, {w}"
        )));
    }
    if s_list.len() < 2 || s_list[0] <= w || s_list.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidInput(
            "S list must be increasing, above w, with >= 2 entries".into(),
        ));
    }
    let fast = InversionConfig::fast();
    let (gx, gw) = gauss_legendre(16);
    // geometric panels from w up to every S
    let mut breaks = vec![w];
    for &s in s_list {
        let mut lo = *breaks.last().unwrap();
        while 2.0 * lo < s {
            lo *= 2.0;
            breaks.push(lo);
        }
        breaks.push(s);
    }
    let panels: Vec<(f64, f64)> = breaks.windows(2).map(|p| (p[0], p[1])).collect();
    let sums: Vec<(f64, f64)> = panels
        .par_iter()
        .map(|&(a, b)| {
            let (c, r) = ((a + b) / 2.0, (b - a) / 2.0);
            let mut acc = 0.0;
            let mut low = f64::INFINITY;
            for (x, wt) in gx.iter().zip(&gw) {
                let e = product_moment(spec, t, c + r * x, LONG_RANGE_CELLS, &fast)?;
                low = low.min(e);
                acc += r * wt * e;
            }
            Ok((acc, low))
        })
        .collect::<Result<_>>()?;
    let mut integrals = Vec::with_capacity(s_list.len());
    let mut running = 0.0;
    let mut min_integrand = f64::INFINITY;
    let mut next = 0;
    for ((_, b), (v, low)) in panels.iter().zip(&sums) {
        running += v;
        min_integrand = min_integrand.min(*low);
        if next < s_list.len() && *b == s_list[next] {
            integrals.push(running);
            next += 1;
        }
    }
    let n = s_list.len();
    let last_slope = (integrals[n - 1] - integrals[n - 2]) / (s_list[n - 1] - s_list[n - 2]);
    let reference_slope = integrals[n - 2] / (s_list[n - 2] - w);
    let increasing = integrals.windows(2).all(|p| p[1] > p[0]) && integrals[0] > 0.0;
    let pass = increasing && min_integrand > 0.0 && last_slope >= 0.9 * reference_slope;
    Ok(LongRangeReport {
        s_list: s_list.to_vec(),
        integrals,
        last_slope,
        reference_slope,
        min_integrand,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma;

    fn stable_moment(alpha: f64, t: f64, m: u32) -> f64 {
        let f: f64 = (1..=m).map(|k| k as f64).product();
        f * t.powf(m as f64 * alpha) / gamma(1.0 + m as f64 * alpha)
    }

    #[test]
    fn first_moment_is_renewal_function() {
        let spec = BernsteinSpec::tempered(0.5, 1.0);
        let m = mixed_moment(&spec, &[1.3], &[1]).unwrap();
        let u = renewal_values(&spec, &[1.3], &InversionConfig::default()).unwrap()[0];
        assert!((m - u).abs() < 1e-10 * u);
        assert_eq!(mixed_moment(&spec, &[1.0, 2.0], &[0, 0]).unwrap(), 1.0);
    }

    #[test]
    fn stable_second_and_third_moments() {
        let spec = BernsteinSpec::stable(0.5);
        for (t, m) in [(1.0, 2), (2.0, 2), (1.0, 3)] {
            let v = mixed_moment(&spec, &[t], &[m]).unwrap();
            let want = stable_moment(0.5, t, m);
            assert!((v - want).abs() < 1e-3 * want, "{t} {m}: {v} vs {want}");
        }
    }

    #[test]
    fn permutation_symmetry_and_covariance_cross_check() {
        let spec = BernsteinSpec::stable(0.6);
        let a = mixed_moment(&spec, &[1.0, 1.7], &[1, 2]).unwrap();
        let b = mixed_moment(&spec, &[1.7, 1.0], &[2, 1]).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
        let c = covariance(&spec, 1.0, 0.7).unwrap();
        let m = mixed_moment(&spec, &[1.0, 1.7], &[1, 1]).unwrap();
        assert!((c.product - m).abs() < 1e-3 * m, "{} vs {m}", c.product);
        let c0 = covariance(&spec, 1.0, 0.0).unwrap();
        let m2 = mixed_moment(&spec, &[1.0], &[2]).unwrap();
        assert!((c0.product - m2).abs() < 1e-3 * m2);
    }

    #[test]
    fn drift_is_deterministic() {
        let spec = BernsteinSpec::drift(0.0, 1.0);
        let c = covariance(&spec, 1.0, 2.0).unwrap();
        assert!((c.product - 3.0).abs() < 1e-9, "{}", c.product);
        assert!(c.cov.abs() < 1e-9);
        let r = renewal_bound_check(&spec, &[0.1, 1.0, 10.0]).unwrap();
        assert!((r.min_ratio - 1.0).abs() < 1e-12 && (r.max_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bounds_and_subadditivity() {
        let spec = BernsteinSpec::stable(0.5);
        let r = renewal_bound_check(&spec, &[0.01, 1.0, 100.0]).unwrap();
        let g = gamma(1.5);
        assert!((r.min_ratio - g).abs() < 1e-6 && (r.max_ratio - g).abs() < 1e-6);
        let tempered = BernsteinSpec::tempered(0.5, 1.0);
        let xs: Vec<f64> = (0..=8).map(|k| 10f64.powf(-2.0 + 0.5 * k as f64)).collect();
        assert!(renewal_bound_check(&tempered, &xs).unwrap().pass);
        assert!(subadditivity_check(&spec, &[(1.0, 1.0), (0.3, 2.0)])
            .unwrap()
            .is_empty());
    }

    #[test]
    fn long_range_grows() {
        let spec = BernsteinSpec::stable(0.5);
        let r = long_range_diagnostic(&spec, 1.0, 1.0, &[10.0, 100.0, 1000.0]).unwrap();
        assert!(r.pass, "{r:?}");
        let killed = BernsteinSpec::stable(0.5).with_killing(0.5);
        let r = long_range_diagnostic(&killed, 1.0, 1.0, &[10.0, 100.0]).unwrap();
        assert!(r.pass && r.min_integrand > 0.0, "{r:?}");
    }
}
