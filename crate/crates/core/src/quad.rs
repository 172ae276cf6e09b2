//! Quadrature rules shared by every module: adaptive Gauss–Kronrod (7/15),
//! double-exponential (tanh-sinh) for endpoint singularities, Gauss–Legendre
//! node generation and geometric panelling of half-lines.

use num_complex::Complex64;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Values that can be integrated: closed under `+` and real scaling, with a norm.
pub trait QuadValue: Clone {
    fn zeroed(&self) -> Self;
    fn axpy(&mut self, a: f64, x: &Self);
    fn norm(&self) -> f64;
}

impl QuadValue for f64 {
    fn zeroed(&self) -> Self {
        0.0
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }
    fn norm(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zeroed(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += x * a;
    }
    fn norm(&self) -> f64 {
        Complex64::norm(*self)
    }
}

impl QuadValue for Vec<f64> {
    fn zeroed(&self) -> Self {
        vec![0.0; self.len()]
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x) {
            *s += a * v;
        }
    }
    fn norm(&self) -> f64 {
        self.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<V: QuadValue, F: FnMut(f64) -> V>(f: &mut F, a: f64, b: f64) -> (V, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc.zeroed();
    let mut g = fc.zeroed();
    k.axpy(WGK[7], &fc);
    g.axpy(WG[3], &fc);
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        k.axpy(WGK[j], &f1);
        k.axpy(WGK[j], &f2);
        if j % 2 == 1 {
            g.axpy(WG[j / 2], &f1);
            g.axpy(WG[j / 2], &f2);
        }
    }
    let mut diff = k.clone();
    diff.axpy(-1.0, &g);
    let err = diff.norm() * h.abs();
    let mut out = k.zeroed();
    out.axpy(h, &k);
    (out, err)
}

struct Segment<V> {
    a: f64,
    b: f64,
    val: V,
    err: f64,
}

impl<V> PartialEq for Segment<V> {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl<V> Eq for Segment<V> {}
impl<V> PartialOrd for Segment<V> {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl<V> Ord for Segment<V> {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Tolerances and limits for [`adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct Tol {
    pub abs: f64,
    pub rel: f64,
    pub max_segments: usize,
}

impl Default for Tol {
    fn default() -> Self {
        Tol {
            abs: 1e-14,
            rel: 1e-10,
            max_segments: 2000,
        }
    }
}

impl Tol {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tol {
            abs,
            rel,
            ..Default::default()
        }
    }
}

/// Adaptive Gauss–Kronrod integration over `[a, b]` split at `breaks`.
///
/// Returns `(value, error estimate)`.
pub fn adaptive<V, F>(mut f: F, a: f64, b: f64, breaks: &[f64], tol: Tol) -> Result<(V, f64)>
where
    V: QuadValue,
    F: FnMut(f64) -> V,
{
    let mut pts = vec![a];
    let mut bs: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    bs.sort_by(f64::total_cmp);
    bs.dedup();
    pts.extend(bs);
    pts.push(b);

    let mut heap = BinaryHeap::new();
    let mut total: Option<V> = None;
    let mut err_sum = 0.0;
    for w in pts.windows(2) {
        let (val, err) = gk15(&mut f, w[0], w[1]);
        match total.as_mut() {
            Some(t) => t.axpy(1.0, &val),
            None => total = Some(val.clone()),
        }
        err_sum += err;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            val,
            err,
        });
    }
    let mut total = total.expect("at least one segment");

    while err_sum > tol.abs.max(tol.rel * total.norm()) {
        if heap.len() >= tol.max_segments {
            return Err(Error::QuadratureFailure(format!(
                "no convergence on [{a}, {b}] after {} segments (error estimate {err_sum:e})",
                heap.len()
            )));
        }
        let seg = heap.pop().expect("non-empty heap");
        let m = 0.5 * (seg.a + seg.b);
        if !(m > seg.a && m < seg.b) {
            // Interval can no longer be halved in floating point; accept it.
            heap.push(Segment { err: 0.0, ..seg });
            err_sum = heap.iter().map(|s| s.err).sum();
            continue;
        }
        let (v1, e1) = gk15(&mut f, seg.a, m);
        let (v2, e2) = gk15(&mut f, m, seg.b);
        total.axpy(-1.0, &seg.val);
        total.axpy(1.0, &v1);
        total.axpy(1.0, &v2);
        err_sum += e1 + e2 - seg.err;
        heap.push(Segment {
            a: seg.a,
            b: m,
            val: v1,
            err: e1,
        });
        heap.push(Segment {
            a: m,
            b: seg.b,
            val: v2,
            err: e2,
        });
        if heap.len() % 64 == 0 {
            // Re-sum to avoid drift from the running update.
            err_sum = heap.iter().map(|s| s.err).sum();
        }
    }
    Ok((total, err_sum))
}

/// Scalar convenience wrapper around [`adaptive`].
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: Tol) -> Result<f64> {
    adaptive(f, a, b, &[], tol).map(|r| r.0)
}

/// Tanh-sinh quadrature on `[a, b]`.
///
/// `f` receives `(x, x - a, b - x)`, the distances being computed without
/// cancellation so integrands singular at an endpoint can use them directly.
pub fn tanh_sinh<F: FnMut(f64, f64, f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rel: f64,
) -> Result<f64> {
    use std::f64::consts::FRAC_PI_2;
    let half = 0.5 * (b - a);
    let mut eval = |t: f64| -> f64 {
        let u = FRAC_PI_2 * t.sinh();
        let ch = u.cosh();
        // 1 - tanh(u) = 2 / (1 + e^{2u}) avoids cancellation near the ends
        let d_right = 2.0 / (1.0 + (2.0 * u).exp());
        let d_left = 2.0 / (1.0 + (-2.0 * u).exp());
        let w = FRAC_PI_2 * t.cosh() / (ch * ch);
        let dl = half * d_left;
        let dr = half * d_right;
        if dl <= 0.0 || dr <= 0.0 {
            return 0.0;
        }
        let x = if dl < dr { a + dl } else { b - dr };
        let v = f(x, dl, dr);
        if v.is_finite() {
            v * w
        } else {
            0.0
        }
    };
    let tmax = 6.5;
    let mut h = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    while (k as f64) * h <= tmax {
        let t = k as f64 * h;
        sum += eval(t) + eval(-t);
        k += 1;
    }
    let mut prev = sum * h;
    for _ in 0..8 {
        h *= 0.5;
        let mut k = 1;
        while (k as f64) * h <= tmax {
            let t = k as f64 * h;
            sum += eval(t) + eval(-t);
            k += 2;
        }
        let cur = sum * h;
        if (cur - prev).abs() <= rel * cur.abs() + 1e-300 {
            return Ok(cur * half);
        }
        prev = cur;
    }
    Err(Error::QuadratureFailure(format!(
        "tanh-sinh on [{a}, {b}] did not reach rel. {rel:e}"
    )))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = nf * (z * p - p0) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// `∫_a^∞ f` over geometric panels `[a + s(2^k - 1), a + s(2^{k+1} - 1)]`,
/// stopping once two successive panels contribute below `rel` of the total.
pub fn half_line<F: FnMut(f64) -> f64>(mut f: F, a: f64, scale: f64, tol: Tol) -> Result<f64> {
    let mut total = 0.0;
    let mut lo = a;
    let mut width = scale;
    let mut quiet = 0;
    for _ in 0..200 {
        let hi = lo + width;
        let part = adaptive(&mut f, lo, hi, &[], tol)?.0;
        total += part;
        if part.abs() <= tol.rel * total.abs() + tol.abs {
            quiet += 1;
            if quiet >= 2 {
                return Ok(total);
            }
        } else {
            quiet = 0;
        }
        lo = hi;
        width *= 2.0;
    }
    Err(Error::QuadratureFailure(format!(
        "half-line integral from {a} did not settle"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk_polynomial_exact() {
        let v = integrate(|x| x.powi(5) - 3.0 * x * x, -1.0, 2.0, Tol::default()).unwrap();
        let want = (64.0 - 1.0) / 6.0 - (8.0 + 1.0);
        assert!((v - want).abs() < 1e-13);
    }

    #[test]
    fn gk_vector_and_breaks() {
        let (v, _) = adaptive(
            |x: f64| vec![x.abs(), (x - 0.3).abs()],
            -1.0,
            1.0,
            &[0.0, 0.3],
            Tol::default(),
        )
        .unwrap();
        assert!((v[0] - 1.0).abs() < 1e-14);
        assert!((v[1] - (0.5 * 1.3 * 1.3 + 0.5 * 0.7 * 0.7)).abs() < 1e-14);
    }

    #[test]
    fn tanh_sinh_endpoint_singularity() {
        // ∫₀¹ x^{-1/2} dx = 2
        let v = tanh_sinh(|_, d, _| d.powf(-0.5), 0.0, 1.0, 1e-13).unwrap();
        assert!((v - 2.0).abs() < 1e-11, "{v}");
        // ∫₀¹ (1-x)^{-0.9} dx = 10
        let v = tanh_sinh(|_, _, d| d.powf(-0.9), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 10.0).abs() < 1e-8, "{v}");
    }

    #[test]
    fn legendre_weights() {
        for n in [2, 7, 16, 33] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
            if n >= 3 {
                assert!((m4 - 0.4).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn half_line_exponential() {
        let v = half_line(|x| (-x).exp(), 0.0, 1.0, Tol::new(1e-15, 1e-12)).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }
}
