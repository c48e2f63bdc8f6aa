//! Periodic orbits of Markov models, their monodromy exponents, shadowing of
//! orbit chains, and closed orbits with small exponents.

use crate::error::{Error, Result};
use crate::jacobi::{reg_membership, RegularityCertificate};
use crate::linalg::Mat2;
use crate::models::toral::{min_image, ToralModel};
use crate::models::{FlowModel, MarkovModel, MarkovPoint, Point};
use serde::Serialize;

pub const DEFAULT_CYCLE_CAP: usize = 1_000_000;
/// Tolerance on `|trace| - 2` below which a monodromy counts as parabolic.
const PARABOLIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicOrbit {
    pub word: Vec<usize>,
    pub name: String,
    pub period: f64,
    pub monodromy: Mat2,
    pub chi: f64,
    pub parabolic: bool,
    pub mean_curvature: f64,
}

/// `(chi, parabolic)` for a unit-determinant monodromy over `period`.
pub fn chi_from_monodromy(m: &Mat2, period: f64) -> (f64, bool) {
    let tr = m.trace().abs();
    if tr <= 2.0 + PARABOLIC_TOL {
        return (0.0, true);
    }
    let rho = 0.5 * (tr + ((tr - 2.0) * (tr + 2.0)).sqrt());
    (rho.ln() / period, false)
}

/// Product of the per-symbol blocks, first symbol applied first.
pub fn monodromy(model: &MarkovModel, word: &[usize]) -> Mat2 {
    word.iter().fold(Mat2::IDENTITY, |acc, &s| {
        Mat2::jacobi_block(model.curvatures[s], model.roofs[s]) * acc
    })
}

impl PeriodicOrbit {
    pub fn from_word(model: &MarkovModel, word: &[usize]) -> Result<Self> {
        model.check_cycle(word)?;
        let period: f64 = word.iter().map(|&s| model.roofs[s]).sum();
        let integral: f64 = word.iter().map(|&s| model.curvatures[s] * model.roofs[s]).sum();
        let m = monodromy(model, word);
        let (chi, parabolic) = chi_from_monodromy(&m, period);
        Ok(PeriodicOrbit {
            word: word.to_vec(),
            name: model.word_name(word),
            period,
            monodromy: m,
            chi,
            parabolic,
            mean_curvature: integral / period,
        })
    }

    pub fn base_point(&self, model: &MarkovModel) -> Result<MarkovPoint> {
        model.periodic_point(&self.word, 0.0)
    }

    /// Integral of the geometric potential around the orbit, `-log rho`.
    pub fn potential_integral(&self) -> f64 {
        -self.chi * self.period
    }
}

/// All primitive cycles of length at most `max_len`, one per rotation class,
/// sorted by their written word.
pub fn enumerate_cycles(model: &MarkovModel, max_len: usize, cap: usize) -> Result<Vec<PeriodicOrbit>> {
    if max_len == 0 {
        return Err(Error::Precondition("max_len must be at least 1".into()));
    }
    let mut words = Vec::new();
    let mut word = Vec::with_capacity(max_len);
    lyndon(model, max_len, cap, 0, 0, &mut word, &mut words)?;
    let mut orbits = words
        .iter()
        .map(|w| PeriodicOrbit::from_word(model, w))
        .collect::<Result<Vec<_>>>()?;
    orbits.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(orbits)
}

/// Generates Lyndon words along admissible transitions (prenecklace recursion).
fn lyndon(
    model: &MarkovModel,
    max_len: usize,
    cap: usize,
    t: usize,
    p: usize,
    word: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) -> Result<()> {
    if t > 0 && p == t && model.allowed(word[t - 1], word[0]) {
        if out.len() >= cap {
            return Err(Error::CycleCap { cap });
        }
        out.push(word.clone());
    }
    if t == max_len {
        return Ok(());
    }
    let start = if t == 0 { 0 } else { word[t - p] };
    for a in start..model.len() {
        if t > 0 && !model.allowed(word[t - 1], a) {
            continue;
        }
        let np = if t == 0 || a != word[t - p] { t + 1 } else { p };
        word.push(a);
        lyndon(model, max_len, cap, t + 1, np, word, out)?;
        word.pop();
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiBound {
    pub chi: f64,
    pub bound: f64,
    pub slack: f64,
    pub holds: bool,
}

/// `chi <= sqrt(-mean K)` for a closed orbit.
pub fn chi_bound_check(orbit: &PeriodicOrbit) -> ChiBound {
    let bound = (-orbit.mean_curvature).max(0.0).sqrt();
    ChiBound {
        chi: orbit.chi,
        bound,
        slack: bound - orbit.chi,
        holds: orbit.chi <= bound + 1e-9,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSegment {
    pub point: Point,
    pub duration: f64,
}

/// Orbit segments `(v_i, t_i)` with junction gaps `d(g_{t_i} v_i, v_{i+1})`
/// and regularity certificates at both ends of every segment.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitChain {
    pub segments: Vec<ChainSegment>,
    pub periodic: bool,
    pub gaps: Vec<f64>,
    pub certificates: Vec<RegularityCertificate>,
}

impl OrbitChain {
    pub fn new(model: &FlowModel, segments: Vec<ChainSegment>, periodic: bool, t: f64, eta: f64) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Precondition("empty chain".into()));
        }
        let n = segments.len();
        let mut gaps = Vec::new();
        let mut certificates = Vec::new();
        let junctions = if periodic { n } else { n - 1 };
        for i in 0..junctions {
            let end = model.flow(&segments[i].point, segments[i].duration)?;
            gaps.push(model.distance(&end, &segments[(i + 1) % n].point)?);
        }
        for seg in &segments {
            let end = model.flow(&seg.point, seg.duration)?;
            for p in [&seg.point, &end] {
                let c = reg_membership(model, p, t, eta)?;
                if !c.member {
                    return Err(Error::Precondition(format!(
                        "chain endpoint outside Reg_T(eta): lambda_T = {:.6e} < {eta}",
                        c.lambda_t_value
                    )));
                }
                certificates.push(c);
            }
        }
        Ok(OrbitChain {
            segments,
            periodic,
            gaps,
            certificates,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShadowResult {
    pub point: Point,
    /// Block start times `T_i` along the shadow.
    pub times: Vec<f64>,
    pub period: Option<f64>,
    pub delta: f64,
    /// Largest orbit-sup distance `d(g_t shadow, g_{t - T_i} v_i)` over block
    /// start times; for Markov chains the number of symbols that differ inside
    /// the blocks.
    pub max_error: f64,
    /// Largest instantaneous distance between the shadow and the chain on the
    /// section (CAT), or the symbolic error (Markov).
    pub max_pointwise_error: f64,
}

/// Shadows a chain whose junction gaps are below `delta = eps / (4 kappa^2)`.
pub fn shadow_chain(model: &FlowModel, chain: &OrbitChain, epsilon: f64) -> Result<ShadowResult> {
    match model {
        FlowModel::Markov(m) => shadow_markov(m, chain),
        FlowModel::Toral(t) => shadow_toral(model, t, chain, epsilon),
        FlowModel::Surface(_) => Err(Error::Precondition(
            "shadowing is implemented for Markov and linear toy models".into(),
        )),
    }
}

fn block_word(m: &MarkovModel, seg: &ChainSegment) -> Result<(MarkovPoint, Vec<usize>)> {
    let p = match &seg.point {
        Point::Markov(p) => p.clone(),
        other => return Err(Error::ModelMismatch(m.name.clone(), other.kind().into())),
    };
    if p.phase != 0.0 {
        return Err(Error::Precondition("symbolic chains start blocks at phase 0".into()));
    }
    let mut word = Vec::new();
    let mut acc = 0.0;
    let mut k = 0i64;
    while acc < seg.duration - 1e-12 {
        let s = m.symbol_at(&p, k)?;
        word.push(s);
        acc += m.roofs[s];
        k += 1;
    }
    if (acc - seg.duration).abs() > 1e-9 || word.is_empty() {
        return Err(Error::Precondition(format!(
            "block duration {} is not a sum of roofs",
            seg.duration
        )));
    }
    Ok((p, word))
}

fn shadow_markov(m: &MarkovModel, chain: &OrbitChain) -> Result<ShadowResult> {
    let n = chain.segments.len();
    let mut blocks = Vec::with_capacity(n);
    for seg in &chain.segments {
        blocks.push(block_word(m, seg)?);
    }
    let junctions = if chain.periodic { n } else { n - 1 };
    for i in 0..junctions {
        let last = *blocks[i].1.last().unwrap();
        let next = blocks[(i + 1) % n].1[0];
        if !m.allowed(last, next) {
            return Err(Error::GapTooLarge {
                junction: i,
                gap: f64::INFINITY,
                delta: 0.0,
            });
        }
    }
    let mut times = Vec::with_capacity(n);
    let mut t = 0.0;
    let mut word = Vec::new();
    for (seg, (_, w)) in chain.segments.iter().zip(&blocks) {
        times.push(t);
        t += seg.duration;
        word.extend_from_slice(w);
    }
    let (point, period) = if chain.periodic {
        (m.periodic_point(&word, 0.0)?, Some(t))
    } else {
        let (first, _) = &blocks[0];
        let (last, last_word) = &blocks[n - 1];
        let mut past = Vec::new();
        let mut k = -1i64;
        while let Ok(s) = m.symbol_at(first, k) {
            past.push(s);
            if past.len() >= crate::models::markov::DEFAULT_WINDOW {
                break;
            }
            k -= 1;
        }
        past.reverse();
        let origin = past.len();
        let mut symbols = past;
        symbols.extend_from_slice(&word);
        let mut k = last_word.len() as i64;
        let mut tail = 0;
        while let Ok(s) = m.symbol_at(last, k) {
            symbols.push(s);
            tail += 1;
            if tail >= crate::models::markov::DEFAULT_WINDOW {
                break;
            }
            k += 1;
        }
        (m.window_point(symbols, origin, 0.0)?, None)
    };
    let mut mismatches = 0usize;
    let mut offset = 0i64;
    for (p, w) in &blocks {
        for (k, &s) in w.iter().enumerate() {
            if m.symbol_at(&point, offset + k as i64)? != s || m.symbol_at(p, k as i64)? != s {
                mismatches += 1;
            }
        }
        offset += w.len() as i64;
    }
    Ok(ShadowResult {
        point: Point::Markov(point),
        times,
        period,
        delta: 0.0,
        max_error: mismatches as f64,
        max_pointwise_error: mismatches as f64,
    })
}

fn shadow_toral(model: &FlowModel, t: &ToralModel, chain: &OrbitChain, epsilon: f64) -> Result<ShadowResult> {
    let kappa = t.bracket_constant();
    let delta = epsilon / (4.0 * kappa * kappa);
    for (i, &g) in chain.gaps.iter().enumerate() {
        if !(g < delta) {
            return Err(Error::GapTooLarge {
                junction: i,
                gap: g,
                delta,
            });
        }
    }
    let mut starts = Vec::new();
    let mut lens = Vec::new();
    for seg in &chain.segments {
        let p = match &seg.point {
            Point::Toral(p) => *p,
            other => return Err(Error::ModelMismatch(t.name.clone(), other.kind().into())),
        };
        let n = seg.duration.round();
        if p.s != 0.0 || (seg.duration - n).abs() > 1e-12 || n < 1.0 {
            return Err(Error::Precondition(
                "linear toy chains need section points and integer durations".into(),
            ));
        }
        starts.push(p.x);
        lens.push(n as usize);
    }
    // Pseudo-orbit on the section and its one-step defects.
    let mut ys = Vec::new();
    for (x, &n) in starts.iter().zip(&lens) {
        let mut y = *x;
        for _ in 0..n {
            ys.push(y);
            y = t.map(y);
        }
    }
    let last_end = t.iterate(*starts.last().unwrap(), *lens.last().unwrap() as i64);
    let total = ys.len();
    let next = |k: usize| -> [f64; 2] {
        if k + 1 < total {
            ys[k + 1]
        } else if chain.periodic {
            ys[0]
        } else {
            last_end
        }
    };
    let defects: Vec<[f64; 2]> = (0..total)
        .map(|k| {
            let ay = t.matrix.apply(ys[k]);
            let y1 = next(k);
            t.eigen(min_image([y1[0] - ay[0], y1[1] - ay[1]]))
        })
        .collect();
    let lam = t.lambda;
    let (eu, es) = if chain.periodic {
        let norm = 1.0 - lam.powi(-(total as i32));
        let mut u = 0.0;
        for j in 0..total {
            u += lam.powi(-(j as i32 + 1)) * defects[j % total][0];
        }
        let mut s = 0.0;
        for j in 0..total {
            s -= lam.powi(-(j as i32)) * defects[(total - 1 - j) % total][1];
        }
        (u / norm, s / norm)
    } else {
        let mut u = 0.0;
        for (j, d) in defects.iter().enumerate().take(total - 1) {
            u += lam.powi(-(j as i32 + 1)) * d[0];
        }
        (u, 0.0)
    };
    let e0 = t.from_eigen([eu, es]);
    let z0 = t.point([ys[0][0] + e0[0], ys[0][1] + e0[1]], 0.0);
    let shadow = Point::Toral(z0);
    let mut pointwise = 0.0f64;
    let mut z = z0.x;
    for y in &ys {
        pointwise = pointwise.max(t.torus_distance(z, *y));
        z = t.map(z);
    }
    if !chain.periodic {
        pointwise = pointwise.max(t.torus_distance(z, last_end));
    }
    let mut times = Vec::new();
    let mut max_error = 0.0f64;
    let mut start = 0.0;
    for (seg, &n) in chain.segments.iter().zip(&lens) {
        times.push(start);
        for j in 0..n {
            let a = model.flow(&shadow, start + j as f64)?;
            let b = model.flow(&seg.point, j as f64)?;
            max_error = max_error.max(model.distance(&a, &b)?);
        }
        start += n as f64;
    }
    Ok(ShadowResult {
        point: shadow,
        times,
        period: chain.periodic.then_some(total as f64),
        delta,
        max_error,
        max_pointwise_error: pointwise,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallExponentReport {
    pub orbits: Vec<PeriodicOrbit>,
    /// `2 sqrt(1/(n+1))` for each `n`.
    pub bounds: Vec<f64>,
    pub within_bounds: bool,
    pub strictly_decreasing: bool,
    /// First `n` with `chi(F^n H) < epsilon`.
    pub reached: Option<usize>,
}

pub const DEFAULT_N_MAX: usize = 64;

/// Cycles `F^n H` for `n = 1..=n_max`, built from a flat symbol `F` with a
/// self-loop and a hyperbolic symbol `H` linked to it in both directions.
pub fn small_exponent_orbits(model: &FlowModel, epsilon: f64, n_max: usize) -> Result<SmallExponentReport> {
    let m = model.as_markov()?;
    if !m.has_flat_loop() {
        return Err(Error::NoFlatLoop);
    }
    let (f, h) = (0..m.len())
        .filter(|&f| m.is_flat(f) && m.allowed(f, f))
        .flat_map(|f| (0..m.len()).map(move |h| (f, h)))
        .find(|&(f, h)| !m.is_flat(h) && m.allowed(f, h) && m.allowed(h, f))
        .ok_or_else(|| Error::Precondition("no hyperbolic symbol linked both ways to a flat loop".into()))?;
    let mut orbits = Vec::with_capacity(n_max);
    let mut bounds = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let mut word = vec![f; n];
        word.push(h);
        orbits.push(PeriodicOrbit::from_word(m, &word)?);
        bounds.push(2.0 * (1.0 / (n as f64 + 1.0)).sqrt());
    }
    let within_bounds = orbits.iter().zip(&bounds).all(|(o, b)| o.chi <= *b);
    let strictly_decreasing = orbits.windows(2).all(|w| w[1].chi < w[0].chi);
    let reached = orbits.iter().position(|o| o.chi < epsilon).map(|i| i + 1);
    Ok(SmallExponentReport {
        orbits,
        bounds,
        within_bounds,
        strictly_decreasing,
        reached,
    })
}

/// Least-squares slope of `log chi(F^n H)` against `log n` over `lo <= n <= hi`.
pub fn loglog_slope(report: &SmallExponentReport, lo: usize, hi: usize) -> f64 {
    let pts: Vec<(f64, f64)> = report
        .orbits
        .iter()
        .enumerate()
        .map(|(i, o)| (i + 1, o.chi))
        .filter(|(n, _)| *n >= lo && *n <= hi)
        .map(|(n, c)| ((n as f64).ln(), c.ln()))
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentRange {
    pub chi_min: f64,
    pub chi_max: f64,
    pub argmin: String,
    pub argmax: String,
}

/// Smallest positive and largest exponent over cycles up to `max_len`.
pub fn exponent_endpoint_orbits(model: &FlowModel, max_len: usize) -> Result<ExponentRange> {
    if max_len < 2 {
        return Err(Error::Precondition("max_len must be at least 2".into()));
    }
    let orbits = enumerate_cycles(model.as_markov()?, max_len, DEFAULT_CYCLE_CAP)?;
    let hyperbolic: Vec<&PeriodicOrbit> = orbits.iter().filter(|o| !o.parabolic).collect();
    let lo = hyperbolic
        .iter()
        .min_by(|a, b| a.chi.total_cmp(&b.chi))
        .ok_or_else(|| Error::Precondition("no hyperbolic cycles".into()))?;
    let hi = hyperbolic.iter().max_by(|a, b| a.chi.total_cmp(&b.chi)).unwrap();
    Ok(ExponentRange {
        chi_min: lo.chi,
        chi_max: hi.chi,
        argmin: lo.name.clone(),
        argmax: hi.name.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jacobi::lyapunov_forward;
    use crate::linalg::spectral_radius;
    use crate::models::catalog;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cycles(name: &str, len: usize) -> Vec<PeriodicOrbit> {
        enumerate_cycles(&catalog::markov(name).unwrap(), len, DEFAULT_CYCLE_CAP).unwrap()
    }

    #[test]
    fn single_symbol_cycles() {
        let c = cycles("M0", 1);
        assert_eq!(c.len(), 1);
        let (ch, sh) = (1f64.cosh(), 1f64.sinh());
        assert_eq!(c[0].monodromy, Mat2::new(ch, sh, sh, ch));
        assert!((c[0].chi - 1.0).abs() < 1e-15);
        let f = cycles("MFLAT", 1);
        assert_eq!(f[0].monodromy, Mat2::new(1.0, 1.0, 0.0, 1.0));
        assert!(f[0].parabolic && f[0].chi == 0.0);
        assert_eq!(cycles("M0", 5).len(), 1);
    }

    #[test]
    fn lyndon_counts_on_the_full_shift() {
        let c = cycles("M2", 12);
        let expected = [2, 1, 2, 3, 6, 9, 18, 30, 56, 99, 186, 335];
        for (n, &e) in expected.iter().enumerate() {
            assert_eq!(c.iter().filter(|o| o.word.len() == n + 1).count(), e);
        }
        let names: Vec<&str> = c.iter().map(|o| o.name.as_str()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
    }

    #[test]
    fn two_cycle_exponent_matches_eigenvalue_oracle() {
        let m = catalog::markov("M2").unwrap();
        let ab = PeriodicOrbit::from_word(&m, &[0, 1]).unwrap();
        let (c1, s1) = (1f64.cosh(), 1f64.sinh());
        let (c2, s2) = (2f64.cosh(), 2f64.sinh());
        let ha = [[c1, s1], [s1, c1]];
        let hb = [[c2, s2 / 2.0], [2.0 * s2, c2]];
        let prod: Vec<Vec<f64>> = (0..2)
            .map(|i| (0..2).map(|j| hb[i][0] * ha[0][j] + hb[i][1] * ha[1][j]).collect())
            .collect();
        let chi = 0.5 * spectral_radius(&prod).ln();
        assert!((ab.chi - chi).abs() < 1e-12);
    }

    #[test]
    fn monodromy_invariants_and_bound() {
        for name in ["M2", "MRANK1"] {
            for o in cycles(name, 12) {
                assert!(o.monodromy.unimodular_defect() < 1e-10, "{}", o.name);
                assert!(o.chi >= 0.0);
                let b = chi_bound_check(&o);
                assert!(b.holds, "{} {:?}", o.name, b);
                let constant = o.word.iter().all(|&s| s == o.word[0]);
                if constant {
                    assert!(b.slack.abs() < 1e-9);
                }
            }
        }
        let m = catalog::markov("MRANK1").unwrap();
        for n in 1..20 {
            let mut w = vec![0; n];
            w.push(1);
            let o = PeriodicOrbit::from_word(&m, &w).unwrap();
            assert!(o.chi < (1.0 / (n as f64 + 1.0)).sqrt());
        }
    }

    #[test]
    fn exponents_agree_with_propagated_fields() {
        let model = catalog::get("MRANK1").unwrap();
        let m = model.as_markov().unwrap();
        for o in cycles("MRANK1", 8).iter().filter(|o| !o.parabolic) {
            let p = Point::Markov(o.base_point(m).unwrap());
            let chi = lyapunov_forward(&model, &p, o.period).unwrap();
            assert!((chi - o.chi).abs() < 1e-8, "{}: {chi} vs {}", o.name, o.chi);
        }
    }

    #[test]
    fn cycle_cap_is_enforced() {
        let m = catalog::markov("M2").unwrap();
        assert_eq!(enumerate_cycles(&m, 12, 100).unwrap_err().code(), "E_CYCLE_CAP");
    }

    #[test]
    fn small_exponents_on_the_rank_one_model() {
        let model = catalog::get("MRANK1").unwrap();
        let r = small_exponent_orbits(&model, 0.1, 64).unwrap();
        assert!(r.strictly_decreasing && r.within_bounds);
        assert!(r.orbits[62].chi < 0.2);
        assert!(r.reached.is_some());
        assert_eq!(
            small_exponent_orbits(&catalog::get("M0").unwrap(), 0.1, 8).unwrap_err(),
            Error::NoFlatLoop
        );
    }

    #[test]
    fn exponent_endpoints() {
        let e = exponent_endpoint_orbits(&catalog::get("M0").unwrap(), 3).unwrap();
        assert!((e.chi_min - 1.0).abs() < 1e-15 && (e.chi_max - 1.0).abs() < 1e-15);
        let e = exponent_endpoint_orbits(&catalog::get("M2").unwrap(), 8).unwrap();
        assert!(e.chi_max <= 2.0 + 1e-12 && e.chi_min >= 1.0 - 1e-12);
        let e = exponent_endpoint_orbits(&catalog::get("MRANK1").unwrap(), 12).unwrap();
        assert!(e.chi_min < 0.3 && (e.chi_max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symbolic_chains_concatenate_exactly() {
        let model = catalog::get("M2").unwrap();
        let m = model.as_markov().unwrap();
        let seg = |w: &[usize]| ChainSegment {
            point: Point::Markov(m.periodic_point(w, 0.0).unwrap()),
            duration: w.len() as f64,
        };
        let chain = OrbitChain::new(&model, vec![seg(&[0, 0]), seg(&[1]), seg(&[0, 1, 1])], true, 1.0, 1.0).unwrap();
        let s = shadow_chain(&model, &chain, 0.1).unwrap();
        assert_eq!(s.max_error, 0.0);
        assert_eq!(s.period, Some(6.0));
        assert_eq!(s.times, vec![0.0, 2.0, 3.0]);
        let open = OrbitChain::new(&model, vec![seg(&[1, 1]), seg(&[0])], false, 1.0, 1.0).unwrap();
        assert_eq!(shadow_chain(&model, &open, 0.1).unwrap().max_error, 0.0);
    }

    #[test]
    fn forbidden_junction_is_named() {
        let golden = crate::models::MarkovModel::new(
            "golden",
            vec!["A".into(), "B".into()],
            vec![vec![true, true], vec![true, false]],
            vec![1.0, 1.0],
            vec![-1.0, -1.0],
        )
        .unwrap();
        let model = FlowModel::Markov(golden.clone());
        let seg = |w: &[usize]| ChainSegment {
            point: Point::Markov(golden.periodic_point(w, 0.0).unwrap()),
            duration: w.len() as f64,
        };
        let chain = OrbitChain::new(&model, vec![seg(&[0, 1]), seg(&[1, 0]), seg(&[0])], false, 1.0, 1.0).unwrap();
        match shadow_chain(&model, &chain, 0.1).unwrap_err() {
            Error::GapTooLarge { junction, .. } => assert_eq!(junction, 0),
            e => panic!("{e}"),
        }
    }

    fn cat_chain(rng: &mut ChaCha8Rng, model: &FlowModel, periodic: bool, gap: f64) -> (OrbitChain, f64) {
        let t = model.as_toral().unwrap();
        let blocks: Vec<usize> = (0..rng.gen_range(2..5)).map(|_| rng.gen_range(1..4)).collect();
        let total: usize = blocks.iter().sum();
        let mut x = if periodic {
            // Periodic point of A^total: (A^total - I) x = m for an integer vector m.
            let mut a = Mat2::IDENTITY;
            for _ in 0..total {
                a = t.matrix * a;
            }
            let b = a * Mat2::IDENTITY;
            let (p, q, r, s) = (b.0[0][0] - 1.0, b.0[0][1], b.0[1][0], b.0[1][1] - 1.0);
            let det = p * s - q * r;
            let m = [rng.gen_range(0..5) as f64, rng.gen_range(0..5) as f64];
            crate::models::toral::wrap2([(s * m[0] - q * m[1]) / det, (-r * m[0] + p * m[1]) / det])
        } else {
            [rng.gen(), rng.gen()]
        };
        let mut segs = Vec::new();
        let mut worst = 0.0f64;
        for (i, &n) in blocks.iter().enumerate() {
            let mut start = x;
            if i > 0 {
                // Periodic chains are perturbed along the stable direction so the closing gap stays small.
                let d = if periodic {
                    let sign = if rng.gen::<bool>() { gap } else { -gap };
                    [sign * t.e_s[0], sign * t.e_s[1]]
                } else {
                    let a = rng.gen::<f64>() * std::f64::consts::TAU;
                    [gap * a.cos(), gap * a.sin()]
                };
                start = crate::models::toral::wrap2([x[0] + d[0], x[1] + d[1]]);
                worst = worst.max(gap);
            }
            segs.push(ChainSegment {
                point: Point::Toral(t.point(start, 0.0)),
                duration: n as f64,
            });
            x = t.iterate(start, n as i64);
        }
        (OrbitChain::new(model, segs, periodic, 1.0, 1.0).unwrap(), worst)
    }

    #[test]
    fn linear_shadowing_meets_the_geometric_series_bound() {
        let model = catalog::get("CAT").unwrap();
        let t = model.as_toral().unwrap();
        let kappa = t.bracket_constant();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            // A section displacement g has window-metric size up to lambda * g.
            let (chain, gap) = cat_chain(&mut rng, &model, false, 1e-4 / t.lambda);
            assert!(chain.gaps.iter().all(|&g| g <= 1e-4 + 1e-15));
            let s = shadow_chain(&model, &chain, 2e-3).unwrap();
            let lam = t.lambda;
            let series = (1.0 + lam * lam).sqrt() * gap / (lam - 1.0);
            assert!(
                s.max_pointwise_error <= series + 1e-12,
                "{} vs {series}",
                s.max_pointwise_error
            );
            assert!(s.max_pointwise_error < kappa * 1e-4);
            assert!(s.max_error < 2e-3);
            for (w, seg) in s.times.windows(2).zip(&chain.segments) {
                assert_eq!(w[1] - w[0], seg.duration);
            }
        }
    }

    #[test]
    fn periodic_pseudo_orbits_give_periodic_shadows() {
        let model = catalog::get("CAT").unwrap();
        let t = model.as_toral().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let (chain, gap) = cat_chain(&mut rng, &model, true, 1e-4);
            let s = shadow_chain(&model, &chain, 2e-3).unwrap();
            let n: f64 = chain.segments.iter().map(|c| c.duration).sum();
            assert_eq!(s.period, Some(n));
            let Point::Toral(z) = s.point else { unreachable!() };
            assert!(t.torus_distance(t.iterate(z.x, n as i64), z.x) < 1e-9);
            // Stable-direction defects are at most (1 + 1/lambda) gap and decay geometrically.
            let lam = t.lambda;
            let bound = (1.0 + 1.0 / lam) * gap * lam / (lam - 1.0) / (1.0 - lam.powf(-n));
            assert!(s.max_pointwise_error <= bound + 1e-12);
        }
    }

    #[test]
    fn large_gaps_are_rejected() {
        let model = catalog::get("CAT").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (chain, _) = cat_chain(&mut rng, &model, false, 1e-2);
        assert_eq!(shadow_chain(&model, &chain, 2e-3).unwrap_err().code(), "E_GAP");
    }
}
