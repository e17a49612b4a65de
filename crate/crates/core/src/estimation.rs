//! Maximum-likelihood fitting of `(α, γ)` with the number of looks known.
//!
//! The optimizer is BFGS on an unconstrained reparametrization,
//! `α = α_floor + (α_ceiling - α_floor)·σ(u)` and `γ = e^v`, with a strong-Wolfe
//! line search. Once the score is small a Newton step with the analytic
//! Hessian finishes the job, so converged fits sit at the optimum to near
//! machine precision. A fit whose iterate runs into an `α` bound is reported
//! as not converged; the likelihood has no interior maximum there.

use crate::error::{Error, Result};
use crate::g0::{G0Params, Sample};
use crate::specfun::{digamma_unchecked, ln_gamma_unchecked, trigamma_unchecked};

/// Where the optimizer starts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StartingPoint {
    /// Two-moment inversion, see [`init_moments`].
    Moments,
    Explicit(G0Params),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Target for the max-norm of the score.
    pub gradient_tolerance: f64,
    pub init: StartingPoint,
    pub alpha_floor: f64,
    pub alpha_ceiling: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 500,
            gradient_tolerance: 1e-8,
            init: StartingPoint::Moments,
            alpha_floor: -50.0,
            alpha_ceiling: -0.01,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_floor < self.alpha_ceiling && self.alpha_ceiling < 0.0 && self.alpha_floor.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "need alpha_floor < alpha_ceiling < 0, got [{}, {}]",
                self.alpha_floor, self.alpha_ceiling
            )));
        }
        if self.max_iterations == 0 || !(self.gradient_tolerance > 0.0) {
            return Err(Error::InvalidParams("max_iterations and gradient_tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of [`fit_ml`]. A result with `converged == false` is data, not an
/// error: callers decide whether to use, discard or redraw.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: G0Params,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub score_norm: f64,
    pub diagnostic: Option<String>,
}

/// Sums that the likelihood, score and Hessian share.
struct Moments {
    mean_ln_shift: f64,
    mean_inv: f64,
    mean_inv2: f64,
}

fn shifted_sums(gamma: f64, looks: f64, s: &Sample) -> Moments {
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for &z in s.values() {
        let t = gamma + looks * z;
        a += t.ln();
        let inv = 1.0 / t;
        b += inv;
        c += inv * inv;
    }
    let n = s.len() as f64;
    Moments { mean_ln_shift: a / n, mean_inv: b / n, mean_inv2: c / n }
}

fn mean_ln(s: &Sample) -> f64 {
    s.values().iter().map(|z| z.ln()).sum::<f64>() / s.len() as f64
}

/// Per-observation log-likelihood from precomputed sums.
fn mean_loglik(alpha: f64, gamma: f64, looks: f64, mean_ln_z: f64, m: &Moments) -> f64 {
    ln_gamma_unchecked(looks - alpha) - ln_gamma_unchecked(-alpha) - ln_gamma_unchecked(looks) + looks * looks.ln()
        - alpha * gamma.ln()
        + (looks - 1.0) * mean_ln_z
        + (alpha - looks) * m.mean_ln_shift
}

fn score_from(alpha: f64, gamma: f64, looks: f64, m: &Moments) -> (f64, f64) {
    let d_alpha = digamma_unchecked(-alpha) - digamma_unchecked(looks - alpha) - gamma.ln() + m.mean_ln_shift;
    let d_gamma = -alpha / gamma + (alpha - looks) * m.mean_inv;
    (d_alpha, d_gamma)
}

/// `Σ log f(zᵢ)` over the sample.
pub fn log_likelihood(p: &G0Params, s: &Sample) -> f64 {
    s.values().iter().map(|&z| p.ln_pdf(z)).sum()
}

/// `(∂/∂α, ∂/∂γ)` of the log-likelihood divided by `n`; its zeros are the
/// ML estimates.
pub fn score(p: &G0Params, s: &Sample) -> (f64, f64) {
    let m = shifted_sums(p.gamma(), p.looks(), s);
    score_from(p.alpha(), p.gamma(), p.looks(), &m)
}

/// Hessian of the per-observation log-likelihood in `(α, γ)`.
fn hessian_from(alpha: f64, gamma: f64, looks: f64, m: &Moments) -> [[f64; 2]; 2] {
    let aa = -trigamma_unchecked(-alpha) + trigamma_unchecked(looks - alpha);
    let ag = -1.0 / gamma + m.mean_inv;
    let gg = alpha / (gamma * gamma) - (alpha - looks) * m.mean_inv2;
    [[aa, ag], [ag, gg]]
}

fn check_sample(op: &'static str, s: &Sample) -> Result<()> {
    if s.len() < 2 {
        return Err(Error::domain(op, "the sample needs at least two observations"));
    }
    Ok(())
}

fn check_looks(looks: f64) -> Result<()> {
    if !(looks.is_finite() && looks >= 1.0) {
        return Err(Error::InvalidParams(format!("number of looks must be >= 1, got {looks}")));
    }
    Ok(())
}

/// Two-moment starting point with the default `α` floor.
pub fn init_moments(s: &Sample, looks: f64) -> Result<G0Params> {
    init_moments_within(s, looks, FitOptions::default().alpha_floor)
}

/// Solves `m₂/m₁² = (L+1)/L · (-α-1)/(-α-2)` for `α`, then `γ = m₁(-α-1)`.
/// Falls back to `(-3, 2 m₁)` when the implied `α` is outside
/// `(alpha_floor, -2.05]`.
pub fn init_moments_within(s: &Sample, looks: f64, alpha_floor: f64) -> Result<G0Params> {
    check_sample("init_moments", s)?;
    check_looks(looks)?;
    let n = s.len() as f64;
    let m1 = s.mean();
    let m2 = s.values().iter().map(|z| z * z).sum::<f64>() / n;
    let ratio = m2 / (m1 * m1) * looks / (looks + 1.0);
    let fallback = || G0Params::new(-3.0, 2.0 * m1, looks);
    if !(ratio > 1.0 && ratio.is_finite()) {
        return fallback();
    }
    let big_m = (2.0 * ratio - 1.0) / (ratio - 1.0);
    let alpha = -big_m;
    if !(alpha > alpha_floor && alpha <= -2.05) {
        return fallback();
    }
    G0Params::new(alpha, m1 * (big_m - 1.0), looks)
}

struct Reparam {
    floor: f64,
    ceiling: f64,
}

impl Reparam {
    fn alpha(&self, u: f64) -> f64 {
        let sig = if u >= 0.0 { 1.0 / (1.0 + (-u).exp()) } else { u.exp() / (1.0 + u.exp()) };
        self.floor + (self.ceiling - self.floor) * sig
    }

    fn d_alpha(&self, alpha: f64) -> f64 {
        (alpha - self.floor) * (self.ceiling - alpha) / (self.ceiling - self.floor)
    }

    fn u_of(&self, alpha: f64) -> f64 {
        let frac = (alpha - self.floor) / (self.ceiling - self.floor);
        (frac / (1.0 - frac)).ln()
    }
}

struct Objective<'a> {
    sample: &'a Sample,
    looks: f64,
    mean_ln_z: f64,
    map: Reparam,
}

struct Eval {
    alpha: f64,
    gamma: f64,
    value: f64,
    grad: [f64; 2],
    score: (f64, f64),
}

impl Objective<'_> {
    /// Negative per-observation log-likelihood and its gradient at `(u, v)`.
    fn eval(&self, x: [f64; 2]) -> Eval {
        let alpha = self.map.alpha(x[0]);
        let gamma = x[1].exp();
        let m = shifted_sums(gamma, self.looks, self.sample);
        let ll = mean_loglik(alpha, gamma, self.looks, self.mean_ln_z, &m);
        let sc = score_from(alpha, gamma, self.looks, &m);
        let value = if ll.is_finite() && gamma.is_finite() && gamma > 0.0 { -ll } else { f64::INFINITY };
        Eval { alpha, gamma, value, grad: [-sc.0 * self.map.d_alpha(alpha), -sc.1 * gamma], score: sc }
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn score_norm(s: (f64, f64)) -> f64 {
    s.0.abs().max(s.1.abs())
}

/// Strong-Wolfe line search (bracketing, then zoom by safeguarded quadratic
/// interpolation). Returns the accepted step and evaluation.
fn line_search(obj: &Objective, x: [f64; 2], cur: &Eval, dir: [f64; 2], first_step: f64) -> Option<(f64, Eval)> {
    let at = |t: f64| {
        let e = obj.eval([x[0] + t * dir[0], x[1] + t * dir[1]]);
        let slope = dot(e.grad, dir);
        (e, slope)
    };
    let f0 = cur.value;
    let g0 = dot(cur.grad, dir);
    let mut prev = (0.0, f0, g0);
    let mut t = first_step;
    for i in 0..40 {
        let (e, g) = at(t);
        if !e.value.is_finite() || e.value > f0 + C1 * t * g0 || (i > 0 && e.value >= prev.1) {
            return zoom(&at, f0, g0, prev, (t, e.value));
        }
        if g.abs() <= -C2 * g0 {
            return Some((t, e));
        }
        if g >= 0.0 {
            return zoom(&at, f0, g0, (t, e.value, g), (prev.0, prev.1));
        }
        prev = (t, e.value, g);
        t *= 2.0;
    }
    None
}

const C1: f64 = 1e-4;
const C2: f64 = 0.9;

fn zoom<F: Fn(f64) -> (Eval, f64)>(at: &F, f0: f64, g0: f64, lo: (f64, f64, f64), hi: (f64, f64)) -> Option<(f64, Eval)> {
    let (mut t_lo, mut f_lo, mut g_lo) = lo;
    let (mut t_hi, mut f_hi) = hi;
    let mut best: Option<(f64, Eval)> = None;
    for _ in 0..60 {
        let width = t_hi - t_lo;
        let mut t = t_lo + 0.5 * width;
        if f_hi.is_finite() {
            let denom = 2.0 * (f_hi - f_lo - g_lo * width);
            if denom != 0.0 {
                t = t_lo - g_lo * width * width / denom;
            }
        }
        let (a, b) = if t_lo < t_hi { (t_lo, t_hi) } else { (t_hi, t_lo) };
        let margin = 0.1 * (b - a);
        if !t.is_finite() || t < a + margin || t > b - margin {
            t = 0.5 * (t_lo + t_hi);
        }
        let (e, g) = at(t);
        if !e.value.is_finite() || e.value > f0 + C1 * t * g0 || e.value >= f_lo {
            t_hi = t;
            f_hi = e.value;
        } else {
            if g.abs() <= -C2 * g0 {
                return Some((t, e));
            }
            if g * (t_hi - t_lo) >= 0.0 {
                t_hi = t_lo;
                f_hi = f_lo;
            }
            t_lo = t;
            f_lo = e.value;
            g_lo = g;
            best = Some((t, e));
        }
        if (t_hi - t_lo).abs() <= 1e-15 * t_lo.abs().max(t_hi.abs()) {
            break;
        }
    }
    best
}

/// Maximum-likelihood fit of `(α, γ)` for known `looks`.
///
/// Deterministic: the same inputs always produce the same result.
pub fn fit_ml(s: &Sample, looks: f64, opts: &FitOptions) -> Result<FitResult> {
    opts.validate()?;
    check_sample("fit_ml", s)?;
    check_looks(looks)?;
    let first = s.values()[0];
    if s.values().iter().all(|&z| z == first) {
        let params = G0Params::new(opts.alpha_floor, first * (-opts.alpha_floor - 1.0).max(1e-3), looks)?;
        return Ok(FitResult {
            params,
            converged: false,
            iterations: 0,
            log_likelihood: log_likelihood(&params, s),
            score_norm: score_norm(score(&params, s)),
            diagnostic: Some("degenerate sample: all observations are equal".into()),
        });
    }
    let start = match opts.init {
        StartingPoint::Moments => init_moments_within(s, looks, opts.alpha_floor)?,
        StartingPoint::Explicit(p) => p,
    };
    let primary = run_bfgs(s, looks, opts, start);
    if primary.converged || primary.diagnostic.as_deref().is_some_and(|d| d.starts_with("boundary")) {
        return Ok(primary);
    }
    // Retry once from a heavy-tailed start before giving up.
    let alt = G0Params::new(-2.0_f64.max(opts.alpha_floor * 0.5 + opts.alpha_ceiling * 0.5), s.mean(), looks)?;
    let second = run_bfgs(s, looks, opts, alt);
    Ok(if second.converged || second.log_likelihood > primary.log_likelihood { second } else { primary })
}

fn run_bfgs(s: &Sample, looks: f64, opts: &FitOptions, start: G0Params) -> FitResult {
    let map = Reparam { floor: opts.alpha_floor, ceiling: opts.alpha_ceiling };
    let span = opts.alpha_ceiling - opts.alpha_floor;
    let alpha0 = start.alpha().clamp(opts.alpha_floor + 1e-3 * span, opts.alpha_ceiling - 1e-3 * span);
    let obj = Objective { sample: s, looks, mean_ln_z: mean_ln(s), map };
    let mut x = [obj.map.u_of(alpha0), start.gamma().ln()];
    let mut cur = obj.eval(x);
    let mut h = [[1.0, 0.0], [0.0, 1.0]];
    let mut fresh = true;
    let mut diagnostic = None;
    let mut iterations = 0;
    let near_bound = |alpha: f64| alpha - opts.alpha_floor < 1e-7 * span || opts.alpha_ceiling - alpha < 1e-7 * span;

    while iterations < opts.max_iterations {
        if score_norm(cur.score) <= opts.gradient_tolerance {
            break;
        }
        if near_bound(cur.alpha) {
            diagnostic = Some(format!("boundary: alpha reached the search bound at {}", cur.alpha));
            break;
        }
        iterations += 1;

        if score_norm(cur.score) < 1e-3 {
            if let Some(next) = newton_step(&obj, &cur, opts) {
                x = [obj.map.u_of(next.alpha), next.gamma.ln()];
                cur = next;
                continue;
            }
        }

        let mut dir = [-(h[0][0] * cur.grad[0] + h[0][1] * cur.grad[1]), -(h[1][0] * cur.grad[0] + h[1][1] * cur.grad[1])];
        if dot(dir, cur.grad) >= 0.0 {
            h = [[1.0, 0.0], [0.0, 1.0]];
            fresh = true;
            dir = [-cur.grad[0], -cur.grad[1]];
        }
        let len = dir[0].hypot(dir[1]);
        let first_step = if len > 5.0 { 5.0 / len } else { 1.0 };
        let Some((t, next)) = line_search(&obj, x, &cur, dir, first_step) else {
            if fresh {
                diagnostic = Some("line search failed to make progress".into());
                break;
            }
            h = [[1.0, 0.0], [0.0, 1.0]];
            fresh = true;
            continue;
        };
        let step = [t * dir[0], t * dir[1]];
        let y = [next.grad[0] - cur.grad[0], next.grad[1] - cur.grad[1]];
        let sy = dot(step, y);
        if sy > 1e-14 * dot(step, step).sqrt() * dot(y, y).sqrt() {
            if fresh {
                let scale = sy / dot(y, y);
                h = [[scale, 0.0], [0.0, scale]];
                fresh = false;
            }
            let rho = 1.0 / sy;
            // H ← (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ
            let hy = [h[0][0] * y[0] + h[0][1] * y[1], h[1][0] * y[0] + h[1][1] * y[1]];
            let yhy = dot(y, hy);
            let mut next_h = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    next_h[i][j] = h[i][j] - rho * (step[i] * hy[j] + hy[i] * step[j]) + (rho * rho * yhy + rho) * step[i] * step[j];
                }
            }
            h = next_h;
        }
        x = [x[0] + step[0], x[1] + step[1]];
        cur = next;
    }

    let params = G0Params::new(cur.alpha, cur.gamma, looks).expect("iterates stay inside the valid region");
    let norm = score_norm(cur.score);
    let converged = norm <= opts.gradient_tolerance && !near_bound(cur.alpha);
    if !converged && diagnostic.is_none() {
        diagnostic = Some(format!("stopped after {iterations} iterations with score norm {norm:e}"));
    }
    FitResult {
        params,
        converged,
        iterations,
        log_likelihood: log_likelihood(&params, s),
        score_norm: norm,
        diagnostic: if converged { None } else { diagnostic },
    }
}

/// One Newton step on the score in `(α, γ)`, accepted only if it stays in
/// bounds and reduces the score norm.
fn newton_step(obj: &Objective, cur: &Eval, opts: &FitOptions) -> Option<Eval> {
    let m = shifted_sums(cur.gamma, obj.looks, obj.sample);
    let hs = hessian_from(cur.alpha, cur.gamma, obj.looks, &m);
    let det = hs[0][0] * hs[1][1] - hs[0][1] * hs[1][0];
    // Negative definite Hessian only (a maximum).
    if !(hs[0][0] < 0.0 && det > 0.0) {
        return None;
    }
    let (g0, g1) = cur.score;
    let da = -(hs[1][1] * g0 - hs[0][1] * g1) / det;
    let dg = -(-hs[1][0] * g0 + hs[0][0] * g1) / det;
    let alpha = cur.alpha + da;
    let gamma = cur.gamma + dg;
    if !(alpha > opts.alpha_floor && alpha < opts.alpha_ceiling && gamma > 0.0) {
        return None;
    }
    let next = obj.eval([obj.map.u_of(alpha), gamma.ln()]);
    (score_norm(next.score) < score_norm(cur.score) && next.value <= cur.value + 1e-12 * cur.value.abs().max(1.0)).then_some(next)
}

/// Gamma law with free shape and mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaFit {
    pub shape: f64,
    pub mean: f64,
}

impl GammaFit {
    pub fn density(&self, z: f64) -> f64 {
        if !(z.is_finite() && z > 0.0) {
            return 0.0;
        }
        let rate = self.shape / self.mean;
        (self.shape * rate.ln() + (self.shape - 1.0) * z.ln() - rate * z - ln_gamma_unchecked(self.shape)).exp()
    }
}

/// ML fit of a gamma law by Newton iteration on `ln k - ψ(k) = ln m̄ - mean(ln z)`.
pub fn fit_gamma_ml(s: &Sample) -> Result<GammaFit> {
    check_sample("fit_gamma_ml", s)?;
    let mean = s.mean();
    let target = mean.ln() - mean_ln(s);
    if !(target > 1e-14) {
        return Err(Error::domain("fit_gamma_ml", "degenerate sample: no spread to fit a shape to"));
    }
    // Minka's closed-form approximation as the starting value.
    let mut k = (3.0 - target + ((target - 3.0).powi(2) + 24.0 * target).sqrt()) / (12.0 * target);
    for _ in 0..100 {
        let f = k.ln() - digamma_unchecked(k) - target;
        let df = 1.0 / k - trigamma_unchecked(k);
        let mut next = k - f / df;
        if !(next > 0.0) {
            next = 0.5 * k;
        }
        let done = (next - k).abs() <= 1e-13 * k;
        k = next;
        if done {
            return Ok(GammaFit { shape: k, mean });
        }
    }
    Err(Error::numerical("fit_gamma_ml", format!("shape iteration stalled at {k}")))
}

/// Density-normalized histogram with equal-width bins on `[0, max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub densities: Vec<f64>,
}

impl Histogram {
    pub fn new(s: &Sample, bins: usize) -> Result<Histogram> {
        if bins < 2 {
            return Err(Error::InvalidParams(format!("need at least two bins, got {bins}")));
        }
        let top = s.max();
        let width = top / bins as f64;
        let mut counts = vec![0usize; bins];
        for &z in s.values() {
            let idx = ((z / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        let n = s.len() as f64;
        let edges = (0..=bins).map(|i| if i == bins { top } else { i as f64 * width }).collect();
        let densities = counts.iter().map(|&c| c as f64 / (n * width)).collect();
        Ok(Histogram { edges, densities })
    }

    /// Histogram value at `z`; zero outside `[0, max]`.
    pub fn density_at(&self, z: f64) -> f64 {
        let top = self.edges[self.edges.len() - 1];
        if !(0.0..=top).contains(&z) {
            return 0.0;
        }
        let bins = self.densities.len();
        self.densities[((z / self.edges[1]) as usize).min(bins - 1)]
    }

    pub fn midpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1]))
    }
}

/// Mean over the observations of `(f̂(zᵢ) - h(zᵢ))²`, where `h` is the
/// histogram density of the bin holding `zᵢ`.
pub fn sse_fit<F: Fn(f64) -> f64>(s: &Sample, density: F, bins: usize) -> Result<f64> {
    let hist = Histogram::new(s, bins)?;
    let total: f64 = s.values().iter().map(|&z| (density(z) - hist.density_at(z)).powi(2)).sum();
    Ok(total / s.len() as f64)
}
