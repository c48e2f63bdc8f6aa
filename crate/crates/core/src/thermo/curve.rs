//! Pressure curves on a `t` grid with invariant gates, plateau detection and
//! nested-subgraph convergence.

use super::oracle::{oracle_pressure, OrbitSum, BISECTION_TOL};
use super::Potential;
use crate::error::{Error, Result};
use crate::models::MarkovModel;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

pub const DEFAULT_PLATEAU_TOL: f64 = 0.02;
pub const ORACLE_TOL: f64 = 1e-10;
pub const ORBIT_SUM_TOL: f64 = 0.05;
/// Kink threshold in units of the difference-quotient noise floor.
const KINK_FACTOR: f64 = 5.0;

/// The default grid: 81 points on `[-6, 4]`.
pub fn default_grid() -> Vec<f64> {
    (0..81).map(|i| -6.0 + 0.125 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Estimator {
    Oracle {
        potential: Potential,
    },
    OrbitSum {
        potential: Potential,
        period: f64,
        delta: f64,
    },
}

impl Estimator {
    pub fn potential(&self) -> &Potential {
        match self {
            Estimator::Oracle { potential } | Estimator::OrbitSum { potential, .. } => potential,
        }
    }

    pub fn tolerance(&self) -> f64 {
        match self {
            Estimator::Oracle { .. } => ORACLE_TOL,
            Estimator::OrbitSum { .. } => ORBIT_SUM_TOL,
        }
    }

    pub fn method(&self) -> &'static str {
        match self {
            Estimator::Oracle { .. } => "oracle",
            Estimator::OrbitSum { .. } => "orbit-sum",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFailure {
    pub index: usize,
    pub t: f64,
    pub code: String,
    pub message: String,
}

/// Start of the zero-pressure plateau and the one-sided slopes there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlateauOnset {
    pub t_c: f64,
    pub grid_index: usize,
    pub level: f64,
    pub d_minus: f64,
    pub d_plus: f64,
    /// Difference-quotient noise floor from halving the step.
    pub noise: f64,
    pub kink: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PressureCurve {
    pub model: String,
    pub estimator: Estimator,
    pub estimator_tol: f64,
    pub plateau_tol: f64,
    pub t_grid: Vec<f64>,
    /// `NaN` where the estimator failed; see `failures`.
    pub p_values: Vec<f64>,
    pub d_minus: Vec<f64>,
    pub d_plus: Vec<f64>,
    pub failures: Vec<GridFailure>,
    pub monotone_ok: bool,
    pub convex_ok: bool,
    /// Largest `D_minus - D_plus` over the grid.
    pub max_derivative_violation: f64,
    /// Largest gap between three-point and two-point quotients, used as the
    /// derivative-estimation tolerance.
    pub derivative_tol: f64,
    pub derivative_ok: bool,
    pub onset: Option<PlateauOnset>,
}

/// Derivative at `xs[at]` of the quadratic through three points.
fn quadratic_slope(xs: [f64; 3], fs: [f64; 3], at: usize) -> f64 {
    let x = xs[at];
    let mut d = 0.0;
    for i in 0..3 {
        let mut num = 0.0;
        let mut den = 1.0;
        for j in (0..3).filter(|&j| j != i) {
            den *= xs[i] - xs[j];
            let other = (0..3).find(|&k| k != i && k != j).unwrap();
            num += x - xs[other];
        }
        d += fs[i] * num / den;
    }
    d
}

fn one_sided(ts: &[f64], ps: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = ts.len();
    let mut minus = vec![f64::NAN; n];
    let mut plus = vec![f64::NAN; n];
    for i in 0..n {
        if i + 2 < n {
            plus[i] = quadratic_slope([ts[i], ts[i + 1], ts[i + 2]], [ps[i], ps[i + 1], ps[i + 2]], 0);
        } else if i + 1 < n {
            plus[i] = (ps[i + 1] - ps[i]) / (ts[i + 1] - ts[i]);
        }
        if i >= 2 {
            minus[i] = quadratic_slope([ts[i - 2], ts[i - 1], ts[i]], [ps[i - 2], ps[i - 1], ps[i]], 2);
        } else if i >= 1 {
            minus[i] = (ps[i] - ps[i - 1]) / (ts[i] - ts[i - 1]);
        }
    }
    for i in 0..n {
        if minus[i].is_nan() {
            minus[i] = plus[i];
        }
        if plus[i].is_nan() {
            plus[i] = minus[i];
        }
    }
    (minus, plus)
}

fn derivative_tolerance(ts: &[f64], ps: &[f64], d_minus: &[f64], d_plus: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..ts.len() {
        if i + 1 < ts.len() {
            let q = (ps[i + 1] - ps[i]) / (ts[i + 1] - ts[i]);
            worst = worst.max((q - d_plus[i]).abs());
        }
        if i >= 1 {
            let q = (ps[i] - ps[i - 1]) / (ts[i] - ts[i - 1]);
            worst = worst.max((q - d_minus[i]).abs());
        }
    }
    if worst.is_finite() {
        worst
    } else {
        f64::INFINITY
    }
}

fn midpoint_convex(ts: &[f64], ps: &[f64], slack: f64) -> bool {
    let n = ts.len();
    for i in 0..n {
        for k in i + 2..n {
            let mid = 0.5 * (ts[i] + ts[k]);
            let Ok(j) = ts.binary_search_by(|t| t.total_cmp(&mid)).or_else(|j| {
                [j.wrapping_sub(1), j]
                    .into_iter()
                    .find(|&j| j < n && (ts[j] - mid).abs() <= 1e-12 * (1.0 + mid.abs()))
                    .ok_or(())
            }) else {
                continue;
            };
            if [ps[i], ps[j], ps[k]].iter().any(|p| !p.is_finite()) {
                continue;
            }
            if ps[j] > 0.5 * (ps[i] + ps[k]) + slack {
                return false;
            }
        }
    }
    true
}

struct Evaluator<'a> {
    model: &'a MarkovModel,
    estimator: &'a Estimator,
    sum: Option<OrbitSum>,
}

impl<'a> Evaluator<'a> {
    fn new(model: &'a MarkovModel, estimator: &'a Estimator) -> Result<Self> {
        estimator.potential().check(model)?;
        let sum = match estimator {
            Estimator::Oracle { .. } => None,
            Estimator::OrbitSum { period, delta, .. } => Some(OrbitSum::new(model, *period, *delta)?),
        };
        Ok(Evaluator { model, estimator, sum })
    }

    fn eval(&self, t: f64) -> Result<f64> {
        match (&self.sum, self.estimator) {
            (Some(sum), _) => Ok(sum.evaluate(self.model, self.estimator.potential(), t)?.value),
            (None, e) => oracle_pressure(self.model, &self.model.adjacency, e.potential(), t),
        }
    }
}

/// Pressure of `t * phi` on `t_grid` with gate flags, one-sided slopes and,
/// for models with a flat loop, the plateau onset `t_c`.
pub fn pressure_curve(
    model: &MarkovModel,
    t_grid: &[f64],
    estimator: &Estimator,
    plateau_tol: f64,
) -> Result<PressureCurve> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition(
            "t grid must be nonempty and strictly increasing".into(),
        ));
    }
    let ev = Evaluator::new(model, estimator)?;
    let tol = estimator.tolerance();
    let mut p_values = Vec::with_capacity(t_grid.len());
    let mut failures = Vec::new();
    for (index, &t) in t_grid.iter().enumerate() {
        match ev.eval(t) {
            Ok(p) => p_values.push(p),
            Err(e) => {
                failures.push(GridFailure {
                    index,
                    t,
                    code: e.code().into(),
                    message: e.to_string(),
                });
                p_values.push(f64::NAN);
            }
        }
    }
    let (d_minus, d_plus) = one_sided(t_grid, &p_values);
    let monotone_ok = p_values
        .windows(2)
        .all(|w| !(w[0].is_finite() && w[1].is_finite()) || w[1] <= w[0] + 2.0 * tol);
    let convex_ok = midpoint_convex(t_grid, &p_values, 2.0 * tol);
    let max_derivative_violation = d_minus
        .iter()
        .zip(&d_plus)
        .map(|(m, p)| m - p)
        .filter(|x| x.is_finite())
        .fold(0.0, f64::max);
    let derivative_tol = derivative_tolerance(t_grid, &p_values, &d_minus, &d_plus);
    let derivative_ok = max_derivative_violation <= derivative_tol + tol;
    let onset = if model.has_flat_loop() {
        plateau_onset(&ev, t_grid, &p_values, &d_minus, &d_plus, plateau_tol, tol)?
    } else {
        None
    };
    Ok(PressureCurve {
        model: model.name.clone(),
        estimator: estimator.clone(),
        estimator_tol: tol,
        plateau_tol,
        t_grid: t_grid.to_vec(),
        p_values,
        d_minus,
        d_plus,
        failures,
        monotone_ok,
        convex_ok,
        max_derivative_violation,
        derivative_tol,
        derivative_ok,
        onset,
    })
}

fn plateau_onset(
    ev: &Evaluator,
    ts: &[f64],
    ps: &[f64],
    d_minus: &[f64],
    d_plus: &[f64],
    plateau_tol: f64,
    tol: f64,
) -> Result<Option<PlateauOnset>> {
    let n = ts.len();
    let mut start = None;
    for i in (0..n).rev() {
        let ok = ps[i].is_finite() && ps[i].abs() < plateau_tol && (i + 1 == n || ps[i + 1] <= ps[i] + 2.0 * tol);
        if !ok {
            break;
        }
        start = Some(i);
    }
    let Some(i) = start else { return Ok(None) };
    let level = ps[i];
    if ev.sum.is_some() {
        let h = if i > 0 {
            ts[i] - ts[i - 1]
        } else {
            ts[1.min(n - 1)] - ts[0]
        };
        let noise = if h > 0.0 { tol / h } else { 0.0 };
        return Ok(Some(PlateauOnset {
            t_c: ts[i],
            grid_index: i,
            level,
            d_minus: d_minus[i],
            d_plus: d_plus[i],
            noise,
            kink: d_plus[i] - d_minus[i] > KINK_FACTOR * noise.max(1e-9),
        }));
    }
    // Oracle mode: refine the onset between grid points and re-differentiate.
    let on_plateau = |t: f64| -> Result<bool> { Ok(ev.eval(t)? <= level + 2.0 * BISECTION_TOL) };
    let mut t_c = ts[i];
    let h = if i > 0 {
        ts[i] - ts[i - 1]
    } else if n > 1 {
        ts[1] - ts[0]
    } else {
        0.125
    };
    if i > 0 {
        let (mut lo, mut hi) = (ts[i - 1], ts[i]);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if on_plateau(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        t_c = hi;
    }
    let slopes = |s: f64| -> Result<(f64, f64)> {
        let p0 = ev.eval(t_c)?;
        let (m1, m2) = (ev.eval(t_c - s)?, ev.eval(t_c - 2.0 * s)?);
        let (p1, p2) = (ev.eval(t_c + s)?, ev.eval(t_c + 2.0 * s)?);
        Ok((
            (3.0 * p0 - 4.0 * m1 + m2) / (2.0 * s),
            (-3.0 * p0 + 4.0 * p1 - p2) / (2.0 * s),
        ))
    };
    let (dm, dp) = slopes(h / 4.0)?;
    let (dm2, dp2) = slopes(h / 8.0)?;
    let noise = (dm - dm2).abs().max((dp - dp2).abs());
    Ok(Some(PlateauOnset {
        t_c,
        grid_index: i,
        level,
        d_minus: dm,
        d_plus: dp,
        noise,
        kink: dp - dm > KINK_FACTOR * noise.max(1e-9),
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseTransition {
    pub detected: bool,
    pub label: String,
    pub t_c: Option<f64>,
    /// `D_minus(t_c)`, the right endpoint `alpha_2` of the hyperbolic slopes.
    pub alpha_2: Option<f64>,
    pub d_plus: Option<f64>,
    pub kink_magnitude: Option<f64>,
}

pub fn phase_transition_report(curve: &PressureCurve) -> PhaseTransition {
    match &curve.onset {
        Some(o) if o.kink => PhaseTransition {
            detected: true,
            label: "plateau onset".into(),
            t_c: Some(o.t_c),
            alpha_2: Some(o.d_minus),
            d_plus: Some(o.d_plus),
            kink_magnitude: Some(o.d_minus.abs()),
        },
        Some(o) => PhaseTransition {
            detected: false,
            label: "plateau without kink".into(),
            t_c: Some(o.t_c),
            alpha_2: Some(o.d_minus),
            d_plus: Some(o.d_plus),
            kink_magnitude: None,
        },
        None => PhaseTransition {
            detected: false,
            label: "no phase transition".into(),
            t_c: None,
            alpha_2: None,
            d_plus: None,
            kink_magnitude: None,
        },
    }
}

/// Edges `(i, j)` lying on a closed walk of length at most `cap`, i.e. with a
/// path from `j` back to `i` of length at most `cap - 1`.
pub fn cycle_subgraph(adj: &[Vec<bool>], cap: usize) -> Vec<Vec<bool>> {
    let n = adj.len();
    let dist: Vec<Vec<usize>> = (0..n)
        .map(|s| {
            let mut d = vec![usize::MAX; n];
            d[s] = 0;
            let mut q = VecDeque::from([s]);
            while let Some(i) = q.pop_front() {
                for j in 0..n {
                    if adj[i][j] && d[j] == usize::MAX {
                        d[j] = d[i] + 1;
                        q.push_back(j);
                    }
                }
            }
            d
        })
        .collect();
    (0..n)
        .map(|i| (0..n).map(|j| adj[i][j] && dist[j][i] < cap).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NestedReport {
    pub caps: Vec<usize>,
    pub t_grid: Vec<f64>,
    pub edge_counts: Vec<usize>,
    pub flat_loop: Vec<bool>,
    /// `values[i][k]`: oracle pressure on the cap-`i` subgraph at `t_grid[k]`.
    pub values: Vec<Vec<f64>>,
    pub full: Vec<f64>,
    pub monotone: bool,
    pub reaches_full: bool,
}

/// Oracle pressure on the subgraphs spanned by cycles of length at most each
/// cap, compared with the full model.
pub fn nested_pressure_convergence(
    model: &MarkovModel,
    caps: &[usize],
    t_grid: &[f64],
    potential: &Potential,
) -> Result<NestedReport> {
    if caps.is_empty() || caps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition(
            "caps must be nonempty and strictly increasing".into(),
        ));
    }
    potential.check(model)?;
    let mut values = Vec::new();
    let mut edge_counts = Vec::new();
    let mut flat_loop = Vec::new();
    for &cap in caps {
        let sub = cycle_subgraph(&model.adjacency, cap);
        let edges = sub.iter().flatten().filter(|&&b| b).count();
        if edges == 0 {
            return Err(Error::Precondition(format!("no cycles of length at most {cap}")));
        }
        edge_counts.push(edges);
        let mut restricted = model.clone();
        restricted.adjacency = sub.clone();
        flat_loop.push(restricted.has_flat_loop());
        values.push(
            t_grid
                .iter()
                .map(|&t| oracle_pressure(model, &sub, potential, t))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let full = t_grid
        .iter()
        .map(|&t| oracle_pressure(model, &model.adjacency, potential, t))
        .collect::<Result<Vec<_>>>()?;
    let monotone = values
        .windows(2)
        .all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| *b >= a - 1e-12));
    let reaches_full = values
        .last()
        .unwrap()
        .iter()
        .zip(&full)
        .all(|(a, b)| (a - b).abs() <= 1e-12);
    Ok(NestedReport {
        caps: caps.to_vec(),
        t_grid: t_grid.to_vec(),
        edge_counts,
        flat_loop,
        values,
        full,
        monotone,
        reaches_full,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::catalog;
    use proptest::prelude::*;

    fn model(name: &str) -> MarkovModel {
        catalog::markov(name).unwrap()
    }

    fn oracle(p: Potential) -> Estimator {
        Estimator::Oracle { potential: p }
    }

    #[test]
    fn quadratic_slope_is_exact_on_parabolas() {
        let f = |x: f64| 3.0 * x * x - x + 2.0;
        let xs = [0.1, 0.4, 1.0];
        let fs = xs.map(f);
        for (at, x) in xs.iter().enumerate() {
            assert!((quadratic_slope(xs, fs, at) - (6.0 * x - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn m0_is_linear() {
        let m = model("M0");
        let c = pressure_curve(
            &m,
            &default_grid(),
            &oracle(Potential::proxy_for(&m)),
            DEFAULT_PLATEAU_TOL,
        )
        .unwrap();
        for (t, p) in c.t_grid.iter().zip(&c.p_values) {
            assert!((p + t).abs() < 1e-11);
        }
        assert!(c.onset.is_none());
        assert!(c.monotone_ok && c.convex_ok);
        assert_eq!(phase_transition_report(&c).label, "no phase transition");
    }

    #[test]
    fn m2_proxy_curve_is_strictly_convex_without_plateau() {
        let m = model("M2");
        let c = pressure_curve(
            &m,
            &default_grid(),
            &oracle(Potential::proxy_for(&m)),
            DEFAULT_PLATEAU_TOL,
        )
        .unwrap();
        for (t, p) in c.t_grid.iter().zip(&c.p_values) {
            let exact = ((-t).exp() + (-2.0 * t).exp()).ln();
            assert!((p - exact).abs() < 1e-11);
        }
        assert!(c.p_values.windows(2).all(|w| w[1] < w[0]));
        assert!(c.p_values.windows(3).all(|w| w[1] < 0.5 * (w[0] + w[2])));
        assert!(c.onset.is_none());
        assert!(!phase_transition_report(&c).detected);
    }

    #[test]
    fn rank1_geometric_curve_has_a_kinked_plateau() {
        let m = model("MRANK1");
        let est = oracle(Potential::Geometric { n_max: 64 });
        let c = pressure_curve(&m, &default_grid(), &est, DEFAULT_PLATEAU_TOL).unwrap();
        assert!(c.monotone_ok && c.convex_ok);
        assert!(c.p_values.iter().all(|&p| p >= -1e-11));
        let o = c.onset.clone().unwrap();
        assert!((o.t_c - 1.469).abs() < 5e-3, "{}", o.t_c);
        assert!(o.d_minus <= -0.1 && o.d_plus.abs() < 1e-9 && o.kink, "{o:?}");
        for (t, p) in c.t_grid.iter().zip(&c.p_values) {
            if *t >= o.t_c {
                assert!(p.abs() < DEFAULT_PLATEAU_TOL);
            }
        }
        let r = phase_transition_report(&c);
        assert!(r.detected && r.alpha_2.unwrap() < -0.1);
    }

    #[test]
    fn orbit_sum_curve_tracks_the_oracle() {
        let m = model("M2");
        let p = Potential::proxy_for(&m);
        let grid: Vec<f64> = (0..17).map(|i| -4.0 + 0.5 * i as f64).collect();
        let est = Estimator::OrbitSum {
            potential: p.clone(),
            period: 12.0,
            delta: 1.0,
        };
        let c = pressure_curve(&m, &grid, &est, DEFAULT_PLATEAU_TOL).unwrap();
        let o = pressure_curve(&m, &grid, &oracle(p), DEFAULT_PLATEAU_TOL).unwrap();
        for (a, b) in c.p_values.iter().zip(&o.p_values) {
            assert!((a - b).abs() < 0.05);
        }
    }

    #[test]
    fn failures_are_kept_per_grid_point() {
        let m = model("M2");
        let est = Estimator::OrbitSum {
            potential: Potential::proxy_for(&m),
            period: 10.5,
            delta: 0.25,
        };
        assert_eq!(
            pressure_curve(&m, &[0.0], &est, 0.02).unwrap_err().code(),
            "E_EMPTY_WINDOW"
        );
    }

    #[test]
    fn bad_grid() {
        let m = model("M2");
        let est = oracle(Potential::proxy_for(&m));
        assert!(pressure_curve(&m, &[], &est, 0.02).is_err());
        assert!(pressure_curve(&m, &[0.0, 0.0], &est, 0.02).is_err());
    }

    #[test]
    fn nested_caps_on_m2() {
        let m = model("M2");
        let r = nested_pressure_convergence(
            &m,
            &[1, 2, 4],
            &[0.0],
            &Potential::Proxy {
                weights: vec![0.0, 0.0],
            },
        )
        .unwrap();
        assert!(r.values[0][0].abs() < 1e-11);
        assert!((r.values[1][0] - 2f64.ln()).abs() < 1e-11);
        assert!(r.monotone && r.reaches_full);
        assert_eq!(r.edge_counts, vec![2, 4, 4]);
    }

    #[test]
    fn nested_rank1_keeps_the_flat_loop() {
        let m = model("MRANK1");
        let grid = default_grid();
        let r = nested_pressure_convergence(&m, &[1, 2, 3], &grid, &Potential::Geometric { n_max: 64 }).unwrap();
        assert!(r.flat_loop.iter().all(|&f| f));
        assert!(r.monotone && r.reaches_full);
        let last = *r.values[0].last().unwrap();
        assert!(last.abs() < 1e-11);
    }

    #[test]
    fn empty_smallest_cap() {
        let adj = vec![vec![false, true], vec![true, false]];
        let m = MarkovModel::new(
            "P2",
            vec!["A".into(), "B".into()],
            adj,
            vec![1.0, 1.0],
            vec![-1.0, -1.0],
        )
        .unwrap();
        let err = nested_pressure_convergence(&m, &[1, 2], &[0.0], &Potential::proxy_for(&m)).unwrap_err();
        assert_eq!(err.code(), "E_PRECONDITION");
    }

    proptest! {
        #[test]
        fn random_proxy_curves_pass_the_gates(a in -3.0f64..0.0, b in -3.0f64..0.0) {
            let m = model("M2");
            let grid: Vec<f64> = (0..21).map(|i| -3.0 + 0.3 * i as f64).collect();
            let c = pressure_curve(&m, &grid, &oracle(Potential::Proxy { weights: vec![a, b] }), 0.02).unwrap();
            prop_assert!(c.monotone_ok && c.convex_ok);
            prop_assert!(c.derivative_ok);
        }

        #[test]
        fn nested_values_are_monotone(t in -4.0f64..4.0) {
            let m = model("MRANK1");
            let r = nested_pressure_convergence(&m, &[1, 2], &[t], &Potential::Geometric { n_max: 16 }).unwrap();
            prop_assert!(r.monotone && r.reaches_full);
        }
    }
}
