//! Contrast measures between two G⁰ laws with the same number of looks.
//!
//! Each `(h, φ)`-divergence is `h(∫ φ(f_p/f_q) f_q dz)`. The integrands are
//! rewritten in terms of `f_p` and `f_q` so that they are nonnegative
//! pointwise and evaluated from log densities, which keeps them finite where
//! either density underflows.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::g0::G0Params;
use crate::quadrature::{integrate_positive, QuadOptions};
use crate::specfun::chi_square_sf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DistanceKind {
    KullbackLeibler,
    Triangular,
    Bhattacharyya,
    ArithmeticGeometric,
    KolmogorovSmirnov,
}

impl DistanceKind {
    pub const ALL: [DistanceKind; 5] = [
        DistanceKind::KullbackLeibler,
        DistanceKind::Triangular,
        DistanceKind::Bhattacharyya,
        DistanceKind::ArithmeticGeometric,
        DistanceKind::KolmogorovSmirnov,
    ];

    pub const PARAMETRIC: [DistanceKind; 4] = [
        DistanceKind::KullbackLeibler,
        DistanceKind::Triangular,
        DistanceKind::Bhattacharyya,
        DistanceKind::ArithmeticGeometric,
    ];

    /// `v = 1/(h'(0) φ''(1))`, the scaling of the test statistic. `None` for
    /// the Kolmogorov-Smirnov test.
    pub fn v(self) -> Option<f64> {
        match self {
            DistanceKind::KullbackLeibler | DistanceKind::Triangular => Some(1.0),
            DistanceKind::Bhattacharyya | DistanceKind::ArithmeticGeometric => Some(4.0),
            DistanceKind::KolmogorovSmirnov => None,
        }
    }

    pub fn is_parametric(self) -> bool {
        self.v().is_some()
    }

    /// Short tag used on the command line and in reports.
    pub fn tag(self) -> &'static str {
        match self {
            DistanceKind::KullbackLeibler => "kl",
            DistanceKind::Triangular => "t",
            DistanceKind::Bhattacharyya => "b",
            DistanceKind::ArithmeticGeometric => "ag",
            DistanceKind::KolmogorovSmirnov => "ks",
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for DistanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DistanceKind::ALL
            .into_iter()
            .find(|k| k.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParams(format!("unknown test '{s}', expected one of kl, t, b, ag, ks")))
    }
}

/// Null distribution used for the p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceLaw {
    ChiSquare { dof: u32 },
    Kolmogorov,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub kind: DistanceKind,
    pub distance: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub law: ReferenceLaw,
    pub sizes: (usize, usize),
}

impl TestResult {
    /// Builds the χ² test from an already computed distance.
    pub fn from_distance(kind: DistanceKind, distance: f64, m: usize, n: usize) -> Result<TestResult> {
        let v = kind
            .v()
            .ok_or_else(|| Error::InvalidParams("the Kolmogorov-Smirnov test works on samples, see kstest".into()))?;
        if m == 0 || n == 0 {
            return Err(Error::InvalidParams("sample sizes must be positive".into()));
        }
        let (mf, nf) = (m as f64, n as f64);
        let statistic = (2.0 * mf * nf * v / (mf + nf) * distance).max(0.0);
        let p_value = chi_square_sf(statistic, DOF)?;
        Ok(TestResult { kind, distance, statistic, p_value, law: ReferenceLaw::ChiSquare { dof: DOF }, sizes: (m, n) })
    }

    /// Rejects when `p ≤ level`; a level of zero never rejects.
    pub fn reject(&self, level: f64) -> bool {
        level > 0.0 && self.p_value <= level
    }
}

/// Degrees of freedom of the limiting χ² law: one per estimated parameter.
const DOF: u32 = 2;

fn quad_options() -> QuadOptions {
    QuadOptions { abs_tol: 1e-14, rel_tol: 1e-10, max_intervals: 4000 }
}

fn check_pair(op: &'static str, p: &G0Params, q: &G0Params) -> Result<()> {
    if p.looks() != q.looks() {
        return Err(Error::domain(op, format!("looks differ ({} vs {})", p.looks(), q.looks())));
    }
    Ok(())
}

fn natural_scale(p: &G0Params, q: &G0Params) -> f64 {
    (p.geometric_mean() * q.geometric_mean()).sqrt()
}

/// `ln((e^a + e^b)/2)` without overflow.
fn ln_mid(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    let lo = a.min(b);
    hi + (lo - hi).exp().ln_1p() - std::f64::consts::LN_2
}

/// Pointwise integrand of the inner integral, before `h`.
fn integrand(kind: DistanceKind, a: f64, b: f64) -> f64 {
    let (fp, fq) = (a.exp(), b.exp());
    match kind {
        DistanceKind::KullbackLeibler => {
            if fp == fq {
                0.0
            } else {
                (fp - fq) * (a - b)
            }
        }
        DistanceKind::Triangular => {
            let s = fp + fq;
            if s == 0.0 {
                0.0
            } else {
                (fp - fq) * (fp - fq) / s
            }
        }
        DistanceKind::Bhattacharyya => {
            let d = (0.5 * a).exp() - (0.5 * b).exp();
            0.5 * d * d
        }
        DistanceKind::ArithmeticGeometric => {
            let s = ln_mid(a, b);
            let v = s.exp() * (s - a) + 0.5 * (fp - fq);
            v.max(0.0)
        }
        DistanceKind::KolmogorovSmirnov => unreachable!("not an integral divergence"),
    }
}

fn inner_integral<F: Fn(f64, f64) -> f64>(op: &'static str, p: &G0Params, q: &G0Params, f: F) -> Result<f64> {
    let r = integrate_positive(|z| f(p.ln_pdf(z), q.ln_pdf(z)), natural_scale(p, q), &quad_options())
        .map_err(|e| Error::numerical(op, format!("quadrature failed: {e}")))?;
    Ok(r.value.max(0.0))
}

fn apply_h(kind: DistanceKind, y: f64) -> Result<f64> {
    match kind {
        DistanceKind::KullbackLeibler => Ok(0.5 * y),
        DistanceKind::Triangular | DistanceKind::ArithmeticGeometric => Ok(y),
        DistanceKind::Bhattacharyya => {
            if y >= 1.0 {
                return Err(Error::numerical("hphi_divergence", format!("Bhattacharyya inner integral {y} is not below 1")));
            }
            Ok(-(-y).ln_1p())
        }
        DistanceKind::KolmogorovSmirnov => unreachable!(),
    }
}

fn require_parametric(kind: DistanceKind) -> Result<()> {
    if kind.is_parametric() {
        Ok(())
    } else {
        Err(Error::InvalidParams("use analytic_ks_distance for the Kolmogorov-Smirnov distance".into()))
    }
}

/// Directed divergence `D(p, q)`.
pub fn hphi_divergence(kind: DistanceKind, p: &G0Params, q: &G0Params) -> Result<f64> {
    require_parametric(kind)?;
    check_pair("hphi_divergence", p, q)?;
    let y = inner_integral("hphi_divergence", p, q, |a, b| integrand(kind, a, b))?;
    apply_h(kind, y)
}

/// Symmetrized distance `(D(p,q) + D(q,p))/2`.
///
/// The Kullback-Leibler, triangular and Bhattacharyya integrands are
/// symmetric in `(p, q)`, so one integral gives both directions. The
/// arithmetic-geometric pair is integrated jointly.
pub fn hphi_distance(kind: DistanceKind, p: &G0Params, q: &G0Params) -> Result<f64> {
    require_parametric(kind)?;
    check_pair("hphi_distance", p, q)?;
    match kind {
        DistanceKind::ArithmeticGeometric => {
            let both = inner_integral("hphi_distance", p, q, |a, b| {
                let s = ln_mid(a, b);
                (s.exp() * ((s - a) + (s - b))).max(0.0)
            })?;
            Ok(0.5 * both)
        }
        _ => {
            let y = inner_integral("hphi_distance", p, q, |a, b| integrand(kind, a, b))?;
            apply_h(kind, y)
        }
    }
}

const KS_GRID: usize = 2048;
const KS_TAIL: f64 = 1e-6;

/// Finite, positive end of the search range from a quantile, falling back to
/// a value far into the tail when the quantile overflows.
fn range_end(p: &G0Params, q: f64) -> f64 {
    match p.quantile(q) {
        Ok(z) if z.is_finite() && z > 0.0 => z,
        _ if q < 0.5 => f64::MIN_POSITIVE.sqrt(),
        _ => f64::MAX.sqrt(),
    }
}

/// `sup_z |F_p(z) - F_q(z)|`, by a log-spaced grid scan of the central
/// quantile range of both laws and a golden-section refinement around the
/// best grid point.
pub fn analytic_ks_distance(p: &G0Params, q: &G0Params) -> Result<f64> {
    analytic_ks_distance_with(p, q, KS_GRID)
}

/// [`analytic_ks_distance`] with an explicit grid size.
pub fn analytic_ks_distance_with(p: &G0Params, q: &G0Params, grid: usize) -> Result<f64> {
    check_pair("analytic_ks_distance", p, q)?;
    if grid < 3 {
        return Err(Error::InvalidParams("grid needs at least 3 points".into()));
    }
    if p == q {
        return Ok(0.0);
    }
    let lo = range_end(p, KS_TAIL).min(range_end(q, KS_TAIL)).ln();
    let hi = range_end(p, 1.0 - KS_TAIL).max(range_end(q, 1.0 - KS_TAIL)).ln();
    let gap = |u: f64| -> Result<f64> {
        let z = u.exp();
        Ok((p.cdf(z)? - q.cdf(z)?).abs())
    };
    let step = (hi - lo) / (grid - 1) as f64;
    let mut best = (0, -1.0);
    for i in 0..grid {
        let g = gap(lo + step * i as f64)?;
        if g > best.1 {
            best = (i, g);
        }
    }
    // Golden-section search for the maximum on the two neighbouring cells.
    let centre = lo + step * best.0 as f64;
    let (mut a, mut b) = (centre - step, centre + step);
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut gc, mut gd) = (gap(c)?, gap(d)?);
    for _ in 0..80 {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = gap(c)?;
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = gap(d)?;
        }
        if b - a <= 1e-13 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
    }
    Ok(best.1.max(gc).max(gd).clamp(0.0, 1.0))
}

/// The χ² test of equal parameters from ML estimates on samples of sizes `m`
/// and `n`.
pub fn test_statistic(kind: DistanceKind, p_hat: &G0Params, q_hat: &G0Params, m: usize, n: usize) -> Result<TestResult> {
    let d = hphi_distance(kind, p_hat, q_hat)?;
    TestResult::from_distance(kind, d, m, n)
}

/// `D̄`, the mean of the four `(h, φ)` distances and the analytic KS distance.
pub fn mean_discrepancy(p: &G0Params, q: &G0Params) -> Result<f64> {
    let mut total = analytic_ks_distance(p, q)?;
    for kind in DistanceKind::PARAMETRIC {
        total += hphi_distance(kind, p, q)?;
    }
    Ok(total / 5.0)
}
