//! Legendre transform of a pressure curve and the multifractal spectrum table.

use super::curve::{phase_transition_report, pressure_curve, Estimator, PhaseTransition, PressureCurve};
use super::Potential;
use crate::error::{Error, Result};
use crate::models::MarkovModel;
use crate::orbits::{enumerate_cycles, DEFAULT_CYCLE_CAP};
use serde::Serialize;

pub const ALPHA_POINTS: usize = 201;
/// Fraction of the slope range trimmed at each end of the alpha grid.
pub const ALPHA_SHRINK: f64 = 0.02;
/// Slack when deciding whether a slope lies in the observed range.
const SLOPE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum LegendreValue {
    Attained {
        e: f64,
        argmin_t: f64,
    },
    /// No supporting line of this slope: the level set is empty.
    Unattained,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub alpha: f64,
    pub e_alpha: f64,
    pub argmin_t: f64,
    /// `1 + 2 E / (-alpha)` for `alpha` strictly between `alpha_1` and 0.
    pub dim_lower: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumTable {
    pub model: String,
    pub rows: Vec<SpectrumRow>,
    /// Right slope at the left grid edge.
    pub alpha_1: f64,
    /// Change in `alpha_1` when the difference step is doubled.
    pub alpha_1_error: f64,
    /// Left slope at the plateau onset, or at the right grid edge without one.
    pub alpha_2: f64,
    pub slope_min: f64,
    pub slope_max: f64,
}

fn slope_range(curve: &PressureCurve) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let onset = curve.onset.iter().flat_map(|o| [o.d_minus, o.d_plus]);
    for d in curve.d_minus.iter().chain(&curve.d_plus).cloned().chain(onset) {
        if d.is_finite() {
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    (lo, hi)
}

fn check(curve: &PressureCurve) -> Result<()> {
    if !curve.failures.is_empty() {
        return Err(Error::Precondition(format!(
            "pressure curve has {} failed grid points",
            curve.failures.len()
        )));
    }
    if !curve.convex_ok {
        return Err(Error::NonConvex(format!(
            "{} curve fails midpoint convexity",
            curve.model
        )));
    }
    Ok(())
}

fn minimize(curve: &PressureCurve, alpha: f64) -> (f64, f64) {
    let mut best = (f64::INFINITY, f64::NAN);
    for (t, p) in curve.t_grid.iter().zip(&curve.p_values) {
        let v = p - t * alpha;
        // Strict comparison keeps the smallest t on ties.
        if v < best.0 {
            best = (v, *t);
        }
    }
    best
}

/// `E(alpha) = min_t (P(t) - t alpha)` over the curve's grid.
pub fn legendre_at(curve: &PressureCurve, alpha: f64) -> Result<LegendreValue> {
    check(curve)?;
    let (lo, hi) = slope_range(curve);
    if !(alpha >= lo - SLOPE_SLACK && alpha <= hi + SLOPE_SLACK) {
        return Ok(LegendreValue::Unattained);
    }
    let (e, argmin_t) = minimize(curve, alpha);
    Ok(LegendreValue::Attained { e, argmin_t })
}

/// Transform on an alpha grid spanning `[alpha_1, alpha_2]` shrunk by 2% at
/// each end.
pub fn legendre(curve: &PressureCurve) -> Result<SpectrumTable> {
    check(curve)?;
    let n = curve.t_grid.len();
    let alpha_1 = curve.d_plus[0];
    let alpha_1_error = if n >= 5 {
        let (t, p) = (&curve.t_grid, &curve.p_values);
        let coarse = (-3.0 * p[0] + 4.0 * p[2] - p[4]) / (t[4] - t[0]);
        (coarse - alpha_1).abs()
    } else {
        f64::NAN
    };
    let alpha_2 = match &curve.onset {
        Some(o) => o.d_minus,
        None => curve.d_minus[n - 1],
    };
    let (slope_min, slope_max) = slope_range(curve);
    let width = alpha_2 - alpha_1;
    let alphas: Vec<f64> = if width.abs() <= 1e-9 {
        vec![alpha_1]
    } else {
        let (a, b) = (alpha_1 + ALPHA_SHRINK * width, alpha_2 - ALPHA_SHRINK * width);
        (0..ALPHA_POINTS)
            .map(|i| a + (b - a) * i as f64 / (ALPHA_POINTS - 1) as f64)
            .collect()
    };
    let rows = alphas
        .into_iter()
        .map(|alpha| {
            let (e_alpha, argmin_t) = minimize(curve, alpha);
            let dim_lower = (alpha > alpha_1 && alpha < 0.0).then(|| 1.0 + 2.0 * e_alpha / (-alpha));
            SpectrumRow {
                alpha,
                e_alpha,
                argmin_t,
                dim_lower,
            }
        })
        .collect();
    Ok(SpectrumTable {
        model: curve.model.clone(),
        rows,
        alpha_1,
        alpha_1_error,
        alpha_2,
        slope_min,
        slope_max,
    })
}

/// `sup_alpha (E(alpha) + t alpha)` over the table's rows.
pub fn double_legendre(table: &SpectrumTable, t: f64) -> f64 {
    table
        .rows
        .iter()
        .map(|r| r.e_alpha + t * r.alpha)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest `|P** - P|` over grid points whose one-sided slopes lie strictly
/// inside the alpha grid, with the number of points checked.
pub fn involution_error(curve: &PressureCurve, table: &SpectrumTable) -> (f64, usize) {
    let (Some(first), Some(last)) = (table.rows.first(), table.rows.last()) else {
        return (f64::NAN, 0);
    };
    let (a, b) = (first.alpha.min(last.alpha), first.alpha.max(last.alpha));
    let mut worst = 0.0f64;
    let mut count = 0;
    for i in 0..curve.t_grid.len() {
        if curve.d_minus[i] > a && curve.d_plus[i] < b {
            worst = worst.max((double_legendre(table, curve.t_grid[i]) - curve.p_values[i]).abs());
            count += 1;
        }
    }
    (worst, count)
}

/// Entropy of periodic points whose exponent lies near `-alpha`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheck {
    pub alpha: f64,
    pub e_alpha: f64,
    pub cycle_entropy: Option<f64>,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub curve: PressureCurve,
    /// Rows with `alpha` strictly between `alpha_1` and 0.
    pub table: SpectrumTable,
    pub phase: PhaseTransition,
    pub involution_error: f64,
    pub cross_check: Vec<CrossCheck>,
}

/// Pressure curve, spectrum rows on `(alpha_1, 0)`, and a periodic-orbit
/// entropy cross-check at cycle length `cycle_len`.
pub fn spectrum_report(
    model: &MarkovModel,
    t_grid: &[f64],
    estimator: &Estimator,
    plateau_tol: f64,
    cycle_len: usize,
) -> Result<SpectrumReport> {
    let curve = pressure_curve(model, t_grid, estimator, plateau_tol)?;
    let full = legendre(&curve)?;
    let (involution_error, _) = involution_error(&curve, &full);
    let mut table = full.clone();
    table.rows.retain(|r| r.dim_lower.is_some());
    let phase = phase_transition_report(&curve);
    let cross_check = cross_check(model, estimator.potential(), &table, cycle_len)?;
    Ok(SpectrumReport {
        curve,
        table,
        phase,
        involution_error,
        cross_check,
    })
}

fn cross_check(
    model: &MarkovModel,
    potential: &Potential,
    table: &SpectrumTable,
    cycle_len: usize,
) -> Result<Vec<CrossCheck>> {
    if cycle_len == 0 || table.rows.is_empty() {
        return Ok(Vec::new());
    }
    // (time average of phi, period, multiplicity) for every periodic point of
    // symbol length exactly `cycle_len`.
    let mut points = Vec::new();
    for o in enumerate_cycles(model, cycle_len, DEFAULT_CYCLE_CAP)? {
        if !cycle_len.is_multiple_of(o.word.len()) {
            continue;
        }
        let k = (cycle_len / o.word.len()) as f64;
        let mean = match potential {
            Potential::Proxy { weights } => o.word.iter().map(|&s| weights[s]).sum::<f64>() / o.period,
            Potential::Geometric { .. } => -o.chi,
        };
        points.push((mean, k * o.period, o.word.len()));
    }
    let spacing = if table.rows.len() > 1 {
        (table.rows[1].alpha - table.rows[0].alpha).abs()
    } else {
        0.0
    };
    let half = (0.5 * spacing).max(0.05);
    Ok(table
        .rows
        .iter()
        .map(|r| {
            let hits: Vec<&(f64, f64, usize)> = points.iter().filter(|p| (p.0 - r.alpha).abs() <= half).collect();
            let count: usize = hits.iter().map(|p| p.2).sum();
            let cycle_entropy = (count > 0).then(|| {
                let period = hits.iter().map(|p| p.1).sum::<f64>() / hits.len() as f64;
                (count as f64).ln() / period
            });
            CrossCheck {
                alpha: r.alpha,
                e_alpha: r.e_alpha,
                cycle_entropy,
                points: count,
            }
        })
        .collect())
}
