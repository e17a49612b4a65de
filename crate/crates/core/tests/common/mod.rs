//! Reference computations shared by the integration tests. Everything here
//! is written from the defining formulas and uses `statrs` for special
//! functions, so it shares no code path with the library.

#![allow(dead_code)]

use statrs::function::gamma::ln_gamma;

/// Log density from the closed form, evaluated term by term.
pub fn ln_density(alpha: f64, gamma: f64, looks: f64, z: f64) -> f64 {
    ln_gamma(looks - alpha) - ln_gamma(-alpha) - ln_gamma(looks) + looks * (looks / gamma).ln() + (looks - 1.0) * z.ln()
        + (alpha - looks) * (1.0 + looks * z / gamma).ln()
}

/// Composite Simpson rule on `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    assert!(n % 2 == 0);
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

/// Directed divergences `[KL, T, B, AG]` of `p` from `q` and of `q` from `p`,
/// integrated as `∫ φ(f_p/f_q) f_q dz` on a fixed grid in `u = ln z`.
pub struct DivergenceOracle {
    pub forward: [f64; 4],
    pub backward: [f64; 4],
}

fn phi(kind: usize, x: f64) -> f64 {
    match kind {
        0 => (x - 1.0) * x.ln(),
        1 => (x - 1.0).powi(2) / (x + 1.0),
        2 => -x.sqrt() + (x + 1.0) / 2.0,
        _ => (x + 1.0) / 2.0 * ((x + 1.0) / (2.0 * x)).ln() + (x - 1.0) / 2.0,
    }
}

fn h(kind: usize, y: f64) -> f64 {
    match kind {
        0 => y / 2.0,
        2 => -(1.0 - y).ln(),
        _ => y,
    }
}

pub const GRID_POINTS: usize = 1_000_000;

pub fn divergences(p: (f64, f64, f64), q: (f64, f64, f64)) -> DivergenceOracle {
    let (lo, hi) = (-60.0, 60.0);
    let h_step = (hi - lo) / GRID_POINTS as f64;
    let mut fwd = [0.0; 4];
    let mut bwd = [0.0; 4];
    for i in 0..=GRID_POINTS {
        let w = if i == 0 || i == GRID_POINTS {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let u = lo + h_step * i as f64;
        let z = u.exp();
        let ap = ln_density(p.0, p.1, p.2, z);
        let aq = ln_density(q.0, q.1, q.2, z);
        let (fp, fq) = (ap.exp(), aq.exp());
        let x = (ap - aq).exp();
        for k in 0..4 {
            if fq > 0.0 && x.is_finite() && x > 0.0 {
                fwd[k] += w * phi(k, x) * fq * z;
            }
            if fp > 0.0 && x > 0.0 && (1.0 / x).is_finite() {
                bwd[k] += w * phi(k, 1.0 / x) * fp * z;
            }
        }
    }
    let forward = std::array::from_fn(|k| h(k, fwd[k] * h_step / 3.0));
    let backward = std::array::from_fn(|k| h(k, bwd[k] * h_step / 3.0));
    DivergenceOracle { forward, backward }
}

/// `max |F̂_x - F̂_y|` over every observed point, by direct counting.
pub fn brute_force_ks(x: &[f64], y: &[f64]) -> f64 {
    let ecdf = |s: &[f64], z: f64| s.iter().filter(|&&v| v <= z).count() as f64 / s.len() as f64;
    x.iter().chain(y).map(|&z| (ecdf(x, z) - ecdf(y, z)).abs()).fold(0.0, f64::max)
}

/// Half-width of a `k`-sigma binomial band around rate `p` with `n` trials.
pub fn binomial_band(p: f64, n: usize, k: f64) -> f64 {
    k * (p * (1.0 - p) / n as f64).sqrt()
}
