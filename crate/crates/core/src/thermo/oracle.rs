//! Pressure estimators: spectral-radius oracles for locally constant data, a
//! renewal oracle for the geometric potential, and periodic-orbit sums.

use super::Potential;
use crate::error::{Error, Result};
use crate::linalg::{spectral_radius, Mat2};
use crate::models::MarkovModel;
use crate::orbits::{enumerate_cycles, PeriodicOrbit, DEFAULT_CYCLE_CAP};
use serde::Serialize;
use std::collections::BTreeMap;

pub const BISECTION_TOL: f64 = 1e-12;
const MAX_BISECTIONS: usize = 200;
const MAX_EXPANSIONS: usize = 64;

/// Root of a decreasing function by bisection, starting from `[lo, hi]` and
/// widening the bracket geometrically when it does not straddle a sign change.
fn decreasing_root(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    let mut step = (hi - lo).max(1.0);
    let mut expansions = 0;
    while f(lo) < 0.0 {
        lo -= step;
        step *= 2.0;
        expansions += 1;
        if expansions > MAX_EXPANSIONS || !lo.is_finite() {
            return Err(Error::Bracket { lo, hi });
        }
    }
    step = (hi - lo).max(1.0);
    while f(hi) > 0.0 {
        hi += step;
        step *= 2.0;
        expansions += 1;
        if expansions > MAX_EXPANSIONS || !hi.is_finite() {
            return Err(Error::Bracket { lo, hi });
        }
    }
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= BISECTION_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn has_cycle(adj: &[Vec<bool>]) -> bool {
    spectral_radius(&to_rows(adj)) > 0.5
}

fn to_rows(adj: &[Vec<bool>]) -> Vec<Vec<f64>> {
    adj.iter()
        .map(|r| r.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Suspension pressure of locally constant data on a graph: the `P` with
/// `rho(A diag(exp(w_s - P r_s))) = 1`. Reducible graphs give the largest
/// component pressure.
pub fn graph_pressure(adj: &[Vec<bool>], roofs: &[f64], weights: &[f64]) -> Result<f64> {
    if !has_cycle(adj) {
        return Err(Error::Precondition("graph carries no cycle".into()));
    }
    let log_rho_a = spectral_radius(&to_rows(adj)).ln();
    let bounds: Vec<f64> = weights.iter().zip(roofs).map(|(w, r)| (log_rho_a + w) / r).collect();
    let lo = bounds.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let hi = bounds.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    let f = |p: f64| {
        let rows: Vec<Vec<f64>> = adj
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .map(|(j, &b)| if b { (weights[j] - p * roofs[j]).exp() } else { 0.0 })
                    .collect()
            })
            .collect();
        spectral_radius(&rows).ln()
    };
    decreasing_root(lo, hi, f)
}

/// Pressure of the locally constant potential with symbol integrals
/// `weights` on the model's own transition graph.
pub fn suspension_pressure_oracle(model: &MarkovModel, weights: &[f64]) -> Result<f64> {
    if weights.len() != model.len() || weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Precondition("one finite weight per symbol required".into()));
    }
    graph_pressure(&model.adjacency, &model.roofs, weights)
}

/// A first-return block of the induced system on hyperbolic symbols:
/// hyperbolic symbol `from`, then a flat walk of total time `duration - r_from`,
/// then entry into `to`. `count` walks share these data.
#[derive(Debug, Clone, PartialEq)]
struct Excursion {
    from: usize,
    to: usize,
    duration: f64,
    log_rho: f64,
    count: f64,
}

fn excursions(model: &MarkovModel, adj: &[Vec<bool>], n_max: usize) -> Vec<Excursion> {
    let n = model.len();
    let mut out = Vec::new();
    for h in (0..n).filter(|&h| !model.is_flat(h)) {
        let block = Mat2::jacobi_block(model.curvatures[h], model.roofs[h]);
        let log_rho = |tau: f64| {
            let m = Mat2::jacobi_block(0.0, tau) * block;
            m.real_spectral_radius(0.0).map_or(0.0, f64::ln)
        };
        for to in (0..n).filter(|&j| !model.is_flat(j) && adj[h][j]) {
            out.push(Excursion {
                from: h,
                to,
                duration: model.roofs[h],
                log_rho: log_rho(0.0),
                count: 1.0,
            });
        }
        // Flat walks keyed by (last symbol, total flat time); flat blocks commute.
        let mut states: BTreeMap<(usize, u64), f64> = BTreeMap::new();
        for f in (0..n).filter(|&f| model.is_flat(f) && adj[h][f]) {
            *states.entry((f, model.roofs[f].to_bits())).or_default() += 1.0;
        }
        for k in 1..=n_max {
            for (&(f, bits), &count) in &states {
                let tau = f64::from_bits(bits);
                for to in (0..n).filter(|&j| !model.is_flat(j) && adj[f][j]) {
                    out.push(Excursion {
                        from: h,
                        to,
                        duration: model.roofs[h] + tau,
                        log_rho: log_rho(tau),
                        count,
                    });
                }
            }
            if k == n_max {
                break;
            }
            let mut next: BTreeMap<(usize, u64), f64> = BTreeMap::new();
            for (&(f, bits), &count) in &states {
                let tau = f64::from_bits(bits);
                for g in (0..n).filter(|&g| model.is_flat(g) && adj[f][g]) {
                    *next.entry((g, (tau + model.roofs[g]).to_bits())).or_default() += count;
                }
            }
            states = next;
        }
    }
    out
}

/// Renewal pressure of the geometric potential: the larger of the induced
/// hyperbolic pressure and the flat-subgraph entropy (weight zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RenewalPressure {
    pub hyperbolic: Option<f64>,
    pub flat: Option<f64>,
    pub value: f64,
}

/// Pressure of `t * phi_geo` where each first-return excursion through flat
/// symbols (at most `n_max` of them) carries `-log rho` of its monodromy.
pub fn renewal_pressure(model: &MarkovModel, adj: &[Vec<bool>], t: f64, n_max: usize) -> Result<RenewalPressure> {
    let hyp: Vec<usize> = (0..model.len()).filter(|&s| !model.is_flat(s)).collect();
    let index: BTreeMap<usize, usize> = hyp.iter().enumerate().map(|(i, &h)| (h, i)).collect();
    let exc = excursions(model, adj, n_max);
    let induced_adj: Vec<Vec<bool>> = hyp
        .iter()
        .map(|&h| {
            hyp.iter()
                .map(|&g| exc.iter().any(|e| e.from == h && e.to == g))
                .collect()
        })
        .collect();
    let hyperbolic = if !hyp.is_empty() && has_cycle(&induced_adj) {
        let m = hyp.len();
        let f = |p: f64| {
            let mut rows = vec![vec![0.0; m]; m];
            for e in &exc {
                rows[index[&e.from]][index[&e.to]] += e.count * (-t * e.log_rho - p * e.duration).exp();
            }
            spectral_radius(&rows).ln()
        };
        Some(decreasing_root(-1.0, 1.0, f)?)
    } else {
        None
    };
    let flat_adj: Vec<Vec<bool>> = (0..model.len())
        .map(|i| {
            (0..model.len())
                .map(|j| adj[i][j] && model.is_flat(i) && model.is_flat(j))
                .collect()
        })
        .collect();
    let flat = if has_cycle(&flat_adj) {
        Some(graph_pressure(&flat_adj, &model.roofs, &vec![0.0; model.len()])?)
    } else {
        None
    };
    let value = match (hyperbolic, flat) {
        (Some(a), Some(b)) => a.max(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => return Err(Error::Precondition("graph carries no cycle".into())),
    };
    Ok(RenewalPressure {
        hyperbolic,
        flat,
        value,
    })
}

/// Exact pressure of `t * phi` on the subgraph `adj` of the model.
pub fn oracle_pressure(model: &MarkovModel, adj: &[Vec<bool>], potential: &Potential, t: f64) -> Result<f64> {
    potential.check(model)?;
    match potential {
        Potential::Proxy { weights } => {
            let w: Vec<f64> = weights.iter().map(|c| t * c).collect();
            graph_pressure(adj, &model.roofs, &w)
        }
        Potential::Geometric { n_max } => Ok(renewal_pressure(model, adj, t, *n_max)?.value),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrbitSumEstimate {
    pub value: f64,
    /// Closed orbits (counted with repetitions) whose period fell in the window.
    pub orbit_count: usize,
}

/// Closed orbits with period in `(T - delta_T, T]`, prepared once and
/// evaluated for many `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSum {
    pub period: f64,
    pub delta: f64,
    /// Primitive orbits with their repetition counts.
    orbits: Vec<(PeriodicOrbit, usize)>,
}

impl OrbitSum {
    pub fn new(model: &MarkovModel, period: f64, delta: f64) -> Result<Self> {
        if !(period > 0.0 && delta > 0.0 && delta <= period) {
            return Err(Error::Precondition("need 0 < delta_T <= T".into()));
        }
        let (lo, hi) = (period - delta, period);
        let slack = 1e-9 * period;
        let max_len = ((hi + slack) / model.min_roof()).floor() as usize;
        if max_len == 0 {
            return Err(Error::EmptyWindow { lo, hi });
        }
        let mut orbits = Vec::new();
        for o in enumerate_cycles(model, max_len, DEFAULT_CYCLE_CAP)? {
            for k in 1..=((hi + slack) / o.period).floor() as usize {
                let p = k as f64 * o.period;
                if p > lo + slack && p <= hi + slack {
                    orbits.push((o.clone(), k));
                }
            }
        }
        if orbits.is_empty() {
            return Err(Error::EmptyWindow { lo, hi });
        }
        Ok(OrbitSum { period, delta, orbits })
    }

    /// `(1/T) log sum exp(t * integral of phi)`, each orbit weighted by the
    /// number of its section points.
    pub fn evaluate(&self, model: &MarkovModel, potential: &Potential, t: f64) -> Result<OrbitSumEstimate> {
        potential.check(model)?;
        let terms: Vec<f64> = self
            .orbits
            .iter()
            .map(|(o, k)| {
                let integral = match potential {
                    Potential::Proxy { weights } => o.word.iter().map(|&s| weights[s]).sum::<f64>(),
                    Potential::Geometric { .. } => o.potential_integral(),
                };
                t * *k as f64 * integral + (o.word.len() as f64).ln()
            })
            .collect();
        let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = terms.iter().map(|x| (x - top).exp()).sum();
        Ok(OrbitSumEstimate {
            value: (top + sum.ln()) / self.period,
            orbit_count: self.orbits.len(),
        })
    }
}

pub fn pressure_orbit_sum(
    model: &MarkovModel,
    potential: &Potential,
    t: f64,
    period: f64,
    delta: f64,
) -> Result<OrbitSumEstimate> {
    OrbitSum::new(model, period, delta)?.evaluate(model, potential, t)
}
