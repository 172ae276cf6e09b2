//! Closed-form oracles shared by the integration tests. Nothing here calls the library.
#![allow(dead_code)]

use std::f64::consts::PI;

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Lanczos (g = 7) gamma with reflection.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + 7.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// `E_α(z) = Σ z^k/Γ(1+αk)`, summed until terms drop below 1e-17.
pub fn mittag_leffler(alpha: f64, z: f64) -> f64 {
    let mut s = 0.0;
    let mut k = 0;
    loop {
        let term = z.powi(k) / gamma(1.0 + alpha * k as f64);
        s += term;
        if k > 5 && term.abs() < 1e-17 {
            return s;
        }
        k += 1;
        assert!(k < 400, "Mittag-Leffler series did not converge");
    }
}

/// One-sided ½-stable (Lévy) density of σ(t) for f(λ) = λ^{1/2}.
pub fn levy_half_density(t: f64, x: f64) -> f64 {
    t / (2.0 * PI.sqrt()) * x.powf(-1.5) * (-t * t / (4.0 * x)).exp()
}

/// Hitting-time density of the ½-stable subordinator.
pub fn hitting_half_density(t: f64, s: f64) -> f64 {
    (-s * s / (4.0 * t)).exp() / (PI * t).sqrt()
}

/// `ν(s) = s^{−α}/Γ(1−α)` for f(λ) = λ^α.
pub fn stable_tail(alpha: f64, s: f64) -> f64 {
    s.powf(-alpha) / gamma(1.0 - alpha)
}

/// `U(x) = x^α/Γ(1+α)`.
pub fn stable_renewal(alpha: f64, x: f64) -> f64 {
    x.powf(alpha) / gamma(1.0 + alpha)
}

/// `e^{−θx} D^α[e^{θx} x^p] − θ^α x^p` by the exponential series, `D^α` Riemann–Liouville.
pub fn tempered_rl_power(alpha: f64, theta: f64, p: f64, x: f64) -> f64 {
    let mut s = 0.0;
    let mut fact = 1.0;
    for k in 0..200 {
        if k > 0 {
            fact *= k as f64;
        }
        let q = k as f64 + p;
        let term =
            theta.powi(k) / fact * gamma(q + 1.0) / gamma(q + 1.0 - alpha) * x.powf(q - alpha);
        s += term;
        if k > 3 && term.abs() < 1e-17 * s.abs() {
            break;
        }
    }
    (-theta * x).exp() * s - theta.powf(alpha) * x.powf(p)
}

/// `(−Q)^{α}` applied to `u` for the symmetric two-state chain Q = [[−q, q], [q, −q]].
pub fn two_state_fractional_power(q: f64, alpha: f64, u: [f64; 2]) -> [f64; 2] {
    // eigenvectors (1,1)/√2 with eigenvalue 0 and (1,−1)/√2 with eigenvalue 2q of −Q
    let c = (u[0] - u[1]) / 2.0;
    let lam = (2.0 * q).powf(alpha);
    [lam * c, -lam * c]
}

#[test]
fn lanczos_matches_reference_values() {
    // mpmath, 30 digits
    for (x, want) in [
        (0.5, 1.772_453_850_905_516),
        (1.5, 0.886_226_925_452_758),
        (1.7, 0.908_638_732_853_290_4),
        (2.5, 1.329_340_388_179_137),
        (0.3, 2.991_568_987_687_591),
    ] {
        assert!((gamma(x) - want).abs() < 1e-14 * want, "{x}");
    }
}
