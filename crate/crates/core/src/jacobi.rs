//! Jacobi fields and Riccati solutions along orbits, the horocycle curvatures
//! `k^u`, `k^s`, the index `lambda = min(k^s, k^u)` and its window integrals.

use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::models::{FlowModel, Point};
use serde::Serialize;

/// Scalar Jacobi data `(J, J')` with an accumulated scale: the field value is
/// `j * exp(logscale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JacobiPair {
    pub j: f64,
    pub jp: f64,
    pub logscale: f64,
}

/// Rescales by an exact power of two so that `max(|j|, |jp|)` lies in `[1/2, 2]`.
pub fn normalize(j: f64, jp: f64, logscale: f64) -> (f64, f64, f64) {
    let m = j.abs().max(jp.abs());
    if m == 0.0 || !m.is_finite() || (0.5..=2.0).contains(&m) {
        return (j, jp, logscale);
    }
    let k = m.log2().floor() as i32;
    let f = 2f64.powi(-k);
    (j * f, jp * f, logscale + k as f64 * std::f64::consts::LN_2)
}

impl JacobiPair {
    pub fn new(j: f64, jp: f64) -> Result<Self> {
        if j == 0.0 && jp == 0.0 {
            return Err(Error::Precondition("Jacobi pair (0, 0) is trivial".into()));
        }
        if !(j.is_finite() && jp.is_finite()) {
            return Err(Error::Precondition("Jacobi pair must be finite".into()));
        }
        Ok(Self::raw(j, jp, 0.0))
    }

    fn raw(j: f64, jp: f64, logscale: f64) -> Self {
        let (j, jp, logscale) = normalize(j, jp, logscale);
        JacobiPair { j, jp, logscale }
    }

    pub fn value(&self) -> f64 {
        self.j * self.logscale.exp()
    }

    pub fn derivative(&self) -> f64 {
        self.jp * self.logscale.exp()
    }

    pub fn log_abs(&self) -> f64 {
        self.j.abs().ln() + self.logscale
    }

    /// Riccati variable `J'/J`.
    pub fn ratio(&self) -> f64 {
        self.jp / self.j
    }

    fn apply(&self, m: &Mat2) -> Self {
        let [j, jp] = m.apply([self.j, self.jp]);
        Self::raw(j, jp, self.logscale)
    }
}

/// Wronskian `J1 J2' - J1' J2` with the combined scale applied.
pub fn wronskian(a: &JacobiPair, b: &JacobiPair) -> f64 {
    (a.j * b.jp - a.jp * b.j) * (a.logscale + b.logscale).exp()
}

/// Wronskian drift relative to the size of the products it is made of, in the
/// unscaled mantissas. The absolute Wronskian of two exponentially growing
/// fields carries rounding proportional to `|J1 J2'| + |J1' J2|`.
pub fn wronskian_drift(a: &JacobiPair, b: &JacobiPair, initial: f64) -> f64 {
    let scale = (a.logscale + b.logscale).exp();
    let w = (a.j * b.jp - a.jp * b.j) * scale;
    let size = ((a.j * b.jp).abs() + (a.jp * b.j).abs()) * scale;
    (w - initial).abs() / size.max(initial.abs()).max(f64::MIN_POSITIVE)
}

/// Longest piece handled by one closed-form block, in units of `1/a`.
const MAX_BLOCK_EXPONENT: f64 = 8.0;

fn segments(model: &FlowModel, p: &Point, t: f64) -> Result<Vec<(f64, f64)>> {
    let raw = match (model, p) {
        (FlowModel::Markov(m), Point::Markov(q)) => m.segments(q, t)?,
        (FlowModel::Toral(m), Point::Toral(q)) => m.segments(q, t)?,
        _ => return Err(Error::ModelMismatch(model.kind().into(), p.kind().into())),
    };
    let mut out = Vec::with_capacity(raw.len());
    for (k, d) in raw {
        let a = (-k).sqrt();
        let pieces = ((a * d.abs()) / MAX_BLOCK_EXPONENT).ceil().max(1.0) as usize;
        for _ in 0..pieces {
            out.push((k, d / pieces as f64));
        }
    }
    Ok(out)
}

/// Advances the point and every pair by `dt`.
fn advance(model: &FlowModel, p: &Point, pairs: &mut [JacobiPair], dt: f64) -> Result<Point> {
    if dt == 0.0 {
        return Ok(p.clone());
    }
    if let (FlowModel::Surface(m), Point::Surface(sp)) = (model, p) {
        let mut end = *sp;
        if pairs.is_empty() {
            return model.flow(p, dt);
        }
        for pair in pairs.iter_mut() {
            let (q, (j, jp, ls)) = m.flow_with_jacobi(sp, (pair.j, pair.jp, pair.logscale), dt, |_, _, _, _| Ok(()))?;
            *pair = JacobiPair { j, jp, logscale: ls };
            end = q;
        }
        return Ok(Point::Surface(end));
    }
    for (k, d) in segments(model, p, dt)? {
        let block = Mat2::jacobi_block(k, d);
        for pair in pairs.iter_mut() {
            *pair = pair.apply(&block);
        }
    }
    model.flow(p, dt)
}

/// Solves `J'' + K J = 0` along the orbit of `point` for time `t` (either sign).
pub fn propagate_jacobi(model: &FlowModel, point: &Point, pair: JacobiPair, t: f64) -> Result<JacobiPair> {
    let mut pairs = [pair];
    advance(model, point, &mut pairs, t)?;
    Ok(pairs[0])
}

/// Propagates two pairs together and returns them with the final point.
pub fn propagate_pairs(
    model: &FlowModel,
    point: &Point,
    pairs: [JacobiPair; 2],
    t: f64,
) -> Result<(Point, [JacobiPair; 2])> {
    let mut pairs = pairs;
    let q = advance(model, point, &mut pairs, t)?;
    Ok((q, pairs))
}

fn zero_in_block(k: f64, d: f64, j: f64, jp: f64) -> Option<f64> {
    let a = (-k).sqrt();
    let s = if a == 0.0 {
        if jp == 0.0 {
            return None;
        }
        -j / jp
    } else {
        if jp == 0.0 {
            return None;
        }
        let x = -a * j / jp;
        if x.abs() >= 1.0 {
            return None;
        }
        x.atanh() / a
    };
    let inside = if d > 0.0 { s > 0.0 && s <= d } else { s < 0.0 && s >= d };
    inside.then_some(s)
}

/// Solution at time `t` of `u' + u^2 + K = 0` with `u(0) = u0`, computed as
/// `J'/J` for the pair `(1, u0)`; `u0 = +inf` starts from `(0, 1)`. A zero of
/// `J` strictly after the start is reported as a conjugate point.
pub fn riccati_solve(model: &FlowModel, point: &Point, u0: f64, t: f64) -> Result<f64> {
    let pair = if u0 == f64::INFINITY {
        JacobiPair::new(0.0, 1.0)?
    } else if u0.is_finite() {
        JacobiPair::new(1.0, u0)?
    } else {
        return Err(Error::Precondition(format!("initial slope {u0} is not finite")));
    };
    if let (FlowModel::Surface(m), Point::Surface(sp)) = (model, point) {
        let (_, (j, jp, _)) = m.flow_with_jacobi(sp, (pair.j, pair.jp, 0.0), t, |t0, j0, t1, j1| {
            if (t0 != 0.0 || j0 != 0.0) && (j1 == 0.0 || j0 * j1 < 0.0) {
                let w = if j0 == j1 { 1.0 } else { j0 / (j0 - j1) };
                return Err(Error::ConjugatePoint(t0 + w * (t1 - t0)));
            }
            Ok(())
        })?;
        return Ok(jp / j);
    }
    let mut cur = pair;
    let mut elapsed = 0.0;
    for (k, d) in segments(model, point, t)? {
        if let Some(s) = zero_in_block(k, d, cur.j, cur.jp) {
            return Err(Error::ConjugatePoint(elapsed + s));
        }
        cur = cur.apply(&Mat2::jacobi_block(k, d));
        elapsed += d;
    }
    Ok(cur.ratio())
}

/// Result of the limit procedure for `k^u` at a point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureEstimate {
    /// `J'(0)/J(0)` for the field that was `(1, 0)` at time `-horizon`; this
    /// increases to `k^u` as the horizon grows.
    pub value: f64,
    /// The same ratio for the field that vanished at `-horizon`; this
    /// decreases to `k^u`.
    pub upper: f64,
    pub residual: f64,
    pub horizon: f64,
    pub converged: bool,
    /// Whether the lower values were nondecreasing across the horizons tried.
    pub monotone: bool,
}

pub const DEFAULT_TOL: f64 = 1e-9;
pub const MAX_HORIZON: f64 = 16384.0;

fn bracket_at(model: &FlowModel, p: &Point, horizon: f64) -> Result<(f64, f64)> {
    let start = model.flow(p, -horizon)?;
    let (_, [lo, hi]) = propagate_pairs(
        model,
        &start,
        [JacobiPair::raw(1.0, 0.0, 0.0), JacobiPair::raw(0.0, 1.0, 0.0)],
        horizon,
    )?;
    Ok((lo.ratio(), hi.ratio()))
}

/// `k^u` at `point`: the horizon doubles from `horizon` until the two-sided
/// bracket is narrower than `tol` or the horizon reaches its cap. A point
/// that does not converge is returned with `converged = false`.
pub fn unstable_curvature(model: &FlowModel, point: &Point, horizon: f64, tol: f64) -> Result<CurvatureEstimate> {
    if !(horizon > 0.0) {
        return Err(Error::Precondition(format!("horizon {horizon} must be positive")));
    }
    let cap = MAX_HORIZON.min(model.horizon_limit(point));
    let mut t = horizon.min(cap);
    let mut prev = f64::NEG_INFINITY;
    let mut monotone = true;
    loop {
        let (lo, hi) = bracket_at(model, point, t)?;
        if lo < prev - 1e-14 * prev.abs().max(1.0) {
            monotone = false;
        }
        prev = lo;
        let residual = (hi - lo).max(0.0);
        let converged = residual < tol;
        if converged || t >= cap {
            return Ok(CurvatureEstimate {
                value: lo,
                upper: hi,
                residual,
                horizon: t,
                converged,
                monotone,
            });
        }
        t = (2.0 * t).min(cap);
    }
}

/// `k^s(p) = k^u(reverse(p))`.
pub fn stable_curvature(model: &FlowModel, point: &Point, horizon: f64, tol: f64) -> Result<CurvatureEstimate> {
    unstable_curvature(model, &model.reverse(point)?, horizon, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorocycleCurvatures {
    pub k_u: f64,
    pub k_s: f64,
    pub lambda: f64,
    pub residual: f64,
    pub horizon: f64,
    pub converged: bool,
}

pub fn horocycle_curvatures(model: &FlowModel, point: &Point, horizon: f64, tol: f64) -> Result<HorocycleCurvatures> {
    let u = unstable_curvature(model, point, horizon, tol)?;
    let s = stable_curvature(model, point, horizon, tol)?;
    Ok(HorocycleCurvatures {
        k_u: u.value,
        k_s: s.value,
        lambda: u.value.min(s.value),
        residual: u.residual.max(s.residual),
        horizon: u.horizon.max(s.horizon),
        converged: u.converged && s.converged,
    })
}

/// `phi^geo = -k^u`.
pub fn geometric_potential(model: &FlowModel, point: &Point, horizon: f64, tol: f64) -> Result<f64> {
    Ok(-unstable_curvature(model, point, horizon, tol)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct SweepSample {
    lower: f64,
    upper: f64,
    log_j: f64,
}

/// Pushes `(1, 0)` and `(0, 1)` from time `start` and reads both ratios and
/// `log |J|` of the first pair at each of the increasing `times`.
fn sweep(model: &FlowModel, p: &Point, start: f64, times: &[f64]) -> Result<Vec<SweepSample>> {
    let mut cur = model.flow(p, start)?;
    let mut now = start;
    let mut pairs = [JacobiPair::raw(1.0, 0.0, 0.0), JacobiPair::raw(0.0, 1.0, 0.0)];
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        cur = advance(model, &cur, &mut pairs, t - now)?;
        now = t;
        out.push(SweepSample {
            lower: pairs[0].ratio(),
            upper: pairs[1].ratio(),
            log_j: pairs[0].log_abs(),
        });
    }
    Ok(out)
}

/// Horizon that settles `k^u` at time `t` along the orbit of `p`.
fn settling_horizon(model: &FlowModel, p: &Point, t: f64) -> Result<f64> {
    let q = model.flow(p, t)?;
    Ok(unstable_curvature(model, &q, 16.0, DEFAULT_TOL)?.horizon)
}

/// `k^u` and `k^s` sampled at the increasing times `times` along the orbit.
fn curvature_profile(model: &FlowModel, p: &Point, times: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let first = times[0];
    let last = *times.last().unwrap();
    let hu = settling_horizon(model, p, first)?;
    let ku = sweep(model, p, first - hu, times)?;
    let r = model.reverse(p)?;
    let rev_times: Vec<f64> = times.iter().rev().map(|t| -t).collect();
    let hs = settling_horizon(model, &r, -last)?;
    let ks = sweep(model, &r, -last - hs, &rev_times)?;
    let residual = ku
        .iter()
        .chain(ks.iter())
        .map(|s| (s.upper - s.lower).max(0.0))
        .fold(0.0, f64::max);
    Ok((
        ku.iter().map(|s| s.lower).collect(),
        ks.iter().rev().map(|s| s.lower).collect(),
        residual,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaIntegral {
    pub value: f64,
    /// Richardson estimate `|I_h - I_{h/2}| / 3`.
    pub error: f64,
    pub step: f64,
    pub residual: f64,
}

fn midpoint_lambda(model: &FlowModel, p: &Point, a: f64, b: f64, n: usize) -> Result<(f64, f64)> {
    let h = (b - a) / n as f64;
    let times: Vec<f64> = (0..n).map(|i| a + (i as f64 + 0.5) * h).collect();
    let (ku, ks, residual) = curvature_profile(model, p, &times)?;
    let sum: f64 = ku.iter().zip(&ks).map(|(u, s)| u.min(*s)).sum();
    Ok((sum * h, residual))
}

/// `lambda_T(p) = int_{-T}^{T} lambda(g_t p) dt` by the composite midpoint rule.
pub fn lambda_t(model: &FlowModel, point: &Point, t: f64, step: f64) -> Result<LambdaIntegral> {
    if !(t > 0.0 && step > 0.0) {
        return Err(Error::Precondition("T and the quadrature step must be positive".into()));
    }
    let n = (2.0 * t / step).ceil().max(1.0) as usize;
    let (coarse, r1) = midpoint_lambda(model, point, -t, t, n)?;
    let (fine, r2) = midpoint_lambda(model, point, -t, t, 2 * n)?;
    Ok(LambdaIntegral {
        value: coarse,
        error: (coarse - fine).abs() / 3.0,
        step: 2.0 * t / n as f64,
        residual: r1.max(r2),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityCertificate {
    pub t: f64,
    pub eta: f64,
    pub lambda_t_value: f64,
    pub member: bool,
}

/// Membership in `Reg_T(eta) = { lambda_T >= eta }`.
pub fn reg_membership(model: &FlowModel, point: &Point, t: f64, eta: f64) -> Result<RegularityCertificate> {
    if !(t > 0.0 && eta > 0.0) {
        return Err(Error::Precondition("T and eta must be positive".into()));
    }
    let v = lambda_t(model, point, t, model.base_step())?.value;
    Ok(RegularityCertificate {
        t,
        eta,
        lambda_t_value: v,
        member: v >= eta,
    })
}

/// Forward exponent `(log J^u(T) - log J^u(0)) / T` of the unstable field.
pub fn lyapunov_forward(model: &FlowModel, point: &Point, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Precondition(format!("T = {t} must be positive")));
    }
    let h = settling_horizon(model, point, 0.0)?;
    let s = sweep(model, point, -h, &[0.0, t])?;
    Ok((s[1].log_j - s[0].log_j) / t)
}

/// Backward exponent, through the reversed point.
pub fn lyapunov_backward(model: &FlowModel, point: &Point, t: f64) -> Result<f64> {
    lyapunov_forward(model, &model.reverse(point)?, t)
}

/// Largest `sqrt(-K)` the model can produce.
pub fn max_rate(model: &FlowModel) -> f64 {
    match model {
        FlowModel::Markov(m) => (0..m.len()).map(|s| m.rate(s)).fold(0.0, f64::max),
        FlowModel::Toral(m) => m.lambda.ln(),
        FlowModel::Surface(m) => {
            let (lo, hi) = m.domain;
            (0..=2000)
                .map(|i| {
                    let r = lo + (hi - lo) * i as f64 / 2000.0;
                    (-m.profile.curvature(r)).max(0.0).sqrt()
                })
                .fold(0.0, f64::max)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    pub t: f64,
    pub eta: f64,
    pub duration: f64,
    pub k_max: f64,
    /// `C = exp(2 T k_max)`.
    pub c: f64,
    pub min_lambda_t: f64,
    /// `(log |J^s(duration)| - log |J^s(0)|) / duration`.
    pub measured_slope: f64,
    /// Smallest gap `log(C e^{-eta t / 2T}) - log(|J^s(t)|/|J^s(0)|)` over the samples.
    pub margin: f64,
    pub violations: usize,
    pub samples: usize,
}

/// Checks `|J^s(t)| <= C |J^s(0)| exp(-eta t / (2T))` along an orbit segment
/// that stays in `Reg_T(eta)`.
pub fn contraction_check(
    model: &FlowModel,
    point: &Point,
    t: f64,
    eta: f64,
    duration: f64,
) -> Result<ContractionReport> {
    if !(t > 0.0 && eta > 0.0 && duration > 0.0) {
        return Err(Error::Precondition("T, eta and duration must be positive".into()));
    }
    let cells_per_t = (t / model.base_step()).ceil() as usize;
    let h = t / cells_per_t as f64;
    let steps = (duration / h).ceil() as usize;
    let total = 2 * cells_per_t + steps;
    let times: Vec<f64> = (0..total).map(|i| -t + (i as f64 + 0.5) * h).collect();
    let (ku, ks, _) = curvature_profile(model, point, &times)?;
    let lam: Vec<f64> = ku.iter().zip(&ks).map(|(u, s)| u.min(*s)).collect();
    let mut min_lt = f64::INFINITY;
    for i in 0..=steps {
        let lt: f64 = lam[i..i + 2 * cells_per_t].iter().sum::<f64>() * h;
        min_lt = min_lt.min(lt);
        // k^u is only settled to DEFAULT_TOL, so lambda_T carries 2T times that.
        if lt < eta - 2.0 * t * DEFAULT_TOL {
            return Err(Error::Precondition(format!(
                "orbit leaves Reg_T(eta) at t = {} (lambda_T = {lt:.6e} < {eta})",
                i as f64 * h
            )));
        }
    }
    let grid: Vec<f64> = (0..=steps).map(|i| (i as f64 * h).min(duration)).collect();
    let r = model.reverse(point)?;
    let rev: Vec<f64> = grid.iter().rev().map(|s| -s).collect();
    let hs = settling_horizon(model, &r, -duration)?;
    let samples = sweep(model, &r, -duration - hs, &rev)?;
    let log0 = samples.last().unwrap().log_j;
    let k_max = max_rate(model);
    let log_c = 2.0 * t * k_max;
    let mut margin = f64::INFINITY;
    let mut violations = 0;
    for (s, sample) in grid.iter().zip(samples.iter().rev()) {
        let measured = sample.log_j - log0;
        let gap = log_c - eta * s / (2.0 * t) - measured;
        if gap < 0.0 {
            violations += 1;
        }
        margin = margin.min(gap);
    }
    let end = samples[0].log_j - log0;
    Ok(ContractionReport {
        t,
        eta,
        duration,
        k_max,
        c: log_c.exp(),
        min_lambda_t: min_lt,
        measured_slope: end / duration,
        margin,
        violations,
        samples: grid.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{catalog, MarkovPoint, Profile, SurfaceModel};
    use proptest::prelude::*;

    fn periodic(model: &FlowModel, word: &str, phase: f64) -> Point {
        let m = model.as_markov().unwrap();
        Point::Markov(m.periodic_point(&m.parse_word(word).unwrap(), phase).unwrap())
    }

    fn pair(j: f64, jp: f64) -> JacobiPair {
        JacobiPair::new(j, jp).unwrap()
    }

    #[test]
    fn flat_parallel_field_is_constant() {
        let m = catalog::get("MFLAT").unwrap();
        let p = periodic(&m, "F", 0.2);
        let q = propagate_jacobi(&m, &p, pair(1.0, 0.0), 37.5).unwrap();
        assert_eq!((q.value(), q.derivative()), (1.0, 0.0));
    }

    #[test]
    fn m0_gives_sinh_and_cosh() {
        let m = catalog::get("M0").unwrap();
        let p = periodic(&m, "H", 0.0);
        for t in [1.0f64, 5.0, 20.0] {
            let q = propagate_jacobi(&m, &p, pair(0.0, 1.0), t).unwrap();
            assert!((q.j - t.sinh() * (-q.logscale).exp()).abs() / q.j.abs() < 1e-10);
            assert!((q.jp - t.cosh() * (-q.logscale).exp()).abs() / q.jp.abs() < 1e-10);
            assert!((0.5..=2.0).contains(&q.j.abs().max(q.jp.abs())));
        }
    }

    #[test]
    fn backward_propagation_inverts_forward() {
        let m = catalog::get("M2").unwrap();
        let p = periodic(&m, "AAB", 0.4);
        let q = propagate_jacobi(&m, &p, pair(0.3, -1.0), 6.3).unwrap();
        let p2 = m.flow(&p, 6.3).unwrap();
        let back = propagate_jacobi(&m, &p2, q, -6.3).unwrap();
        assert!((back.value() - 0.3).abs() < 1e-9 && (back.derivative() + 1.0).abs() < 1e-9);
    }

    #[test]
    fn wronskian_on_m2_after_seven() {
        let m = catalog::get("M2").unwrap();
        let p = periodic(&m, "ABBAB", 0.1);
        let (_, [a, b]) = propagate_pairs(&m, &p, [pair(1.0, 0.0), pair(0.0, 1.0)], 7.0).unwrap();
        assert!(wronskian_drift(&a, &b, 1.0) < 1e-10);
    }

    #[test]
    fn long_durations_do_not_overflow() {
        let m = catalog::get("M2").unwrap();
        let p = periodic(&m, "B", 0.0);
        let q = propagate_jacobi(&m, &p, pair(1.0, 0.0), 10_000.0).unwrap();
        assert!(q.j.is_finite() && (q.logscale - 20_000.0).abs() < 1.0);
    }

    #[test]
    fn riccati_closed_forms() {
        let m0 = catalog::get("M0").unwrap();
        let p = periodic(&m0, "H", 0.3);
        assert!((riccati_solve(&m0, &p, 1.0, 7.7).unwrap() - 1.0).abs() < 1e-14);
        for t in [0.5f64, 2.0, 6.0] {
            let u = riccati_solve(&m0, &p, f64::INFINITY, t).unwrap();
            assert!((u - 1.0 / t.tanh()).abs() < 1e-12);
        }
        let flat = catalog::get("MFLAT").unwrap();
        let q = periodic(&flat, "F", 0.0);
        assert_eq!(riccati_solve(&flat, &q, 0.0, 12.0).unwrap(), 0.0);
    }

    #[test]
    fn riccati_reports_conjugate_points() {
        let flat = catalog::get("MFLAT").unwrap();
        let q = periodic(&flat, "F", 0.0);
        match riccati_solve(&flat, &q, -0.5, 5.0).unwrap_err() {
            Error::ConjugatePoint(t) => assert!((t - 2.0).abs() < 1e-12),
            e => panic!("{e}"),
        }
        let m0 = catalog::get("M0").unwrap();
        let p = periodic(&m0, "H", 0.0);
        match riccati_solve(&m0, &p, -2.0, 5.0).unwrap_err() {
            Error::ConjugatePoint(t) => assert!((t - 0.5f64.atanh()).abs() < 1e-12),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unstable_solution_never_meets_a_pole() {
        let m = catalog::get("MRANK1").unwrap();
        for word in ["F", "H", "FH", "FFFH", "HHF"] {
            let p = periodic(&m, word, 0.0);
            let ku = unstable_curvature(&m, &p, 16.0, DEFAULT_TOL).unwrap().value;
            assert!(riccati_solve(&m, &p, ku, 50.0).is_ok());
        }
    }

    #[test]
    fn unstable_curvature_references() {
        let m0 = catalog::get("M0").unwrap();
        let e = unstable_curvature(&m0, &periodic(&m0, "H", 0.5), 20.0, DEFAULT_TOL).unwrap();
        assert!((e.value - 1.0).abs() < 1e-8 && e.converged && e.horizon == 20.0);
        let flat = catalog::get("MFLAT").unwrap();
        let e = unstable_curvature(&flat, &periodic(&flat, "F", 0.5), 20.0, DEFAULT_TOL).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(!e.converged && e.monotone);
        assert_eq!(e.horizon, MAX_HORIZON);
    }

    #[test]
    fn unstable_curvature_matches_monodromy_slope() {
        let m = catalog::get("MRANK1").unwrap();
        let mm = m.as_markov().unwrap();
        let mono = Mat2::jacobi_block(mm.curvatures[0], 1.0) * Mat2::jacobi_block(mm.curvatures[1], 1.0);
        let slope = mono.expanding_slope(1e-12).unwrap();
        let e = unstable_curvature(&m, &periodic(&m, "HF", 0.0), 20.0, DEFAULT_TOL).unwrap();
        assert!((e.value - slope).abs() < 1e-8, "{} vs {slope}", e.value);
    }

    #[test]
    fn stable_curvature_and_lambda() {
        let m0 = catalog::get("M0").unwrap();
        let h = horocycle_curvatures(&m0, &periodic(&m0, "H", 0.2), 20.0, DEFAULT_TOL).unwrap();
        assert!((h.k_s - 1.0).abs() < 1e-8);
        assert_eq!(h.lambda, h.k_u.min(h.k_s));
        let flat = catalog::get("MFLAT").unwrap();
        let s = stable_curvature(&flat, &periodic(&flat, "F", 0.2), 20.0, DEFAULT_TOL).unwrap();
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn lambda_integrals() {
        let m0 = catalog::get("M0").unwrap();
        let v = lambda_t(&m0, &periodic(&m0, "H", 0.0), 2.0, 0.125).unwrap();
        assert!((v.value - 4.0).abs() < 1e-8 && v.error < 1e-8);
        let flat = catalog::get("MFLAT").unwrap();
        assert_eq!(
            lambda_t(&flat, &periodic(&flat, "F", 0.0), 3.0, 0.125).unwrap().value,
            0.0
        );
        let r1 = catalog::get("MRANK1").unwrap();
        assert_eq!(lambda_t(&r1, &periodic(&r1, "F", 0.3), 5.0, 0.125).unwrap().value, 0.0);
        assert!(lambda_t(&r1, &periodic(&r1, "FH", 0.3), 5.0, 0.125).unwrap().value > 0.0);
    }

    #[test]
    fn geometric_potential_relaxes_inside_runs() {
        let m = catalog::get("M2").unwrap();
        let mm = m.as_markov().unwrap();
        let mut symbols = vec![1usize; 60];
        symbols.extend(vec![0usize; 60]);
        symbols.extend(vec![1usize; 60]);
        let deep_a = Point::Markov(mm.window_point(symbols.clone(), 110, 0.5).unwrap());
        let deep_b = Point::Markov(mm.window_point(symbols, 170, 0.5).unwrap());
        let pa = geometric_potential(&m, &deep_a, 16.0, DEFAULT_TOL).unwrap();
        let pb = geometric_potential(&m, &deep_b, 16.0, DEFAULT_TOL).unwrap();
        assert!((pa + 1.0).abs() < 1e-8, "{pa}");
        assert!((pb + 2.0).abs() < 1e-8, "{pb}");
        let m0 = catalog::get("M0").unwrap();
        assert!((geometric_potential(&m0, &periodic(&m0, "H", 0.0), 20.0, DEFAULT_TOL).unwrap() + 1.0).abs() < 1e-8);
    }

    #[test]
    fn lyapunov_references() {
        let m0 = catalog::get("M0").unwrap();
        assert!((lyapunov_forward(&m0, &periodic(&m0, "H", 0.1), 13.0).unwrap() - 1.0).abs() < 1e-9);
        let flat = catalog::get("MFLAT").unwrap();
        assert_eq!(lyapunov_forward(&flat, &periodic(&flat, "F", 0.1), 13.0).unwrap(), 0.0);
        let r1 = catalog::get("MRANK1").unwrap();
        let mm = r1.as_markov().unwrap();
        let mono = Mat2::jacobi_block(mm.curvatures[0], 1.0) * Mat2::jacobi_block(mm.curvatures[1], 1.0);
        let rho = mono.real_spectral_radius(1e-12).unwrap();
        let chi = lyapunov_forward(&r1, &periodic(&r1, "HF", 0.0), 2.0).unwrap();
        assert!((chi - rho.ln() / 2.0).abs() < 1e-8);
        let back = lyapunov_backward(&r1, &periodic(&r1, "HF", 0.0), 2.0).unwrap();
        assert!((back - rho.ln() / 2.0).abs() < 1e-8);
    }

    #[test]
    fn lyapunov_equals_mean_unstable_curvature() {
        let m = catalog::get("M2").unwrap();
        let p = periodic(&m, "AABAB", 0.25);
        let t = 3.0;
        let n = 600;
        let h = t / n as f64;
        let mut integral = 0.0;
        for i in 0..n {
            let q = m.flow(&p, (i as f64 + 0.5) * h).unwrap();
            integral += unstable_curvature(&m, &q, 16.0, DEFAULT_TOL).unwrap().value * h;
        }
        let chi = lyapunov_forward(&m, &p, t).unwrap();
        assert!((chi - integral / t).abs() < 1e-4, "{chi} vs {}", integral / t);
    }

    #[test]
    fn regularity_certificates() {
        let m0 = catalog::get("M0").unwrap();
        let p = periodic(&m0, "H", 0.0);
        let c = reg_membership(&m0, &p, 1.0, 1.0).unwrap();
        assert!(c.member && (c.lambda_t_value - 2.0).abs() < 1e-8);
        let edge = reg_membership(&m0, &p, 1.0, c.lambda_t_value).unwrap();
        assert!(edge.member);
        let flat = catalog::get("MFLAT").unwrap();
        assert!(
            !reg_membership(&flat, &periodic(&flat, "F", 0.0), 4.0, 1e-6)
                .unwrap()
                .member
        );
    }

    #[test]
    fn contraction_reports() {
        let m0 = catalog::get("M0").unwrap();
        let r = contraction_check(&m0, &periodic(&m0, "H", 0.0), 1.0, 2.0, 10.0).unwrap();
        assert!((r.c - 1f64.exp().powi(2)).abs() < 1e-12);
        assert!((r.measured_slope + 1.0).abs() < 1e-8);
        assert_eq!(r.violations, 0);
        assert!((r.margin - 2.0).abs() < 1e-6);
        let flat = catalog::get("MFLAT").unwrap();
        let err = contraction_check(&flat, &periodic(&flat, "F", 0.0), 1.0, 0.5, 5.0).unwrap_err();
        assert!(err.to_string().contains("t = 0"), "{err}");
    }

    #[test]
    fn surface_with_unit_curvature_matches_m0() {
        let s = SurfaceModel::new(
            "neck",
            Profile {
                a: 1.0,
                b: 1.0,
                c: 0.0,
                d: 0.0,
            },
            (-60.0, 60.0),
        )
        .unwrap();
        let model = FlowModel::Surface(s.clone());
        let p = Point::Surface(s.point(0.2, 0.0, 0.9));
        for t in [1.0f64, 5.0, 12.0] {
            let q = propagate_jacobi(&model, &p, pair(0.0, 1.0), t).unwrap();
            assert!((q.value() / t.sinh() - 1.0).abs() < 1e-8);
        }
        let u = riccati_solve(&model, &p, f64::INFINITY, 3.0).unwrap();
        assert!((u - 1.0 / 3f64.tanh()).abs() < 1e-8);
        assert!(riccati_solve(&model, &p, -3.0, 3.0).is_err());
    }

    fn m2_window(bits: Vec<bool>, phase: f64) -> (FlowModel, Point) {
        let m = catalog::get("M2").unwrap();
        let mm = m.as_markov().unwrap();
        let symbols: Vec<usize> = bits.into_iter().map(usize::from).collect();
        let origin = symbols.len() / 2;
        let p = MarkovPoint {
            symbols,
            origin,
            phase,
            periodic: false,
        };
        let p = mm.window_point(p.symbols, p.origin, p.phase).unwrap();
        (m, Point::Markov(p))
    }

    proptest! {
        #[test]
        fn wronskian_is_conserved(bits in proptest::collection::vec(any::<bool>(), 241),
                                  phase in 0.0f64..1.0, t in -100.0f64..100.0,
                                  a in -2.0f64..2.0, b in -2.0f64..2.0) {
            prop_assume!(a.abs() + b.abs() > 0.1);
            let (m, p) = m2_window(bits, phase);
            let p1 = pair(1.0, 0.0);
            let p2 = pair(a, b);
            let w0 = wronskian(&p1, &p2);
            let (_, [q1, q2]) = propagate_pairs(&m, &p, [p1, p2], t).unwrap();
            prop_assert!(wronskian_drift(&q1, &q2, w0) < 1e-10);
        }

        #[test]
        fn riccati_derivative_matches_equation(bits in proptest::collection::vec(any::<bool>(), 81),
                                               phase in 0.0f64..1.0, t in 0.5f64..5.0) {
            let (m, p) = m2_window(bits, phase);
            let u0 = unstable_curvature(&m, &p, 16.0, DEFAULT_TOL).unwrap().value;
            let h = 1e-5;
            let here = m.flow(&p, t).unwrap();
            let k = m.curvature_at(&here).unwrap();
            let ahead = m.flow(&p, t + h).unwrap();
            prop_assume!(m.curvature_at(&ahead).unwrap() == k);
            let behind = m.flow(&p, t - h).unwrap();
            prop_assume!(m.curvature_at(&behind).unwrap() == k);
            let u = riccati_solve(&m, &p, u0, t).unwrap();
            let d = (riccati_solve(&m, &p, u0, t + h).unwrap() - riccati_solve(&m, &p, u0, t - h).unwrap()) / (2.0 * h);
            prop_assert!((d + u * u + k).abs() < 1e-5);
        }
    }
}
