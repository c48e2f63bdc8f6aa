//! Constant selection: margin, bracket and hyperbolicity constants, the
//! shadowing scale `epsilon` and the refinement depths.

use super::section::{refine, CrossSection, MEMBERSHIP_TOL};
use super::seed::Seed;
use crate::error::{Error, Result};
use crate::models::toral::wrap2;
use crate::models::FlowModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const DEFAULT_BETA: f64 = 1.05;
/// Fraction of the admissible upper bound used for `epsilon`.
const EPSILON_FRACTION: f64 = 0.9;
/// Iterates used to fit the contraction of stable-related pairs.
const CONTRACTION_STEPS: i32 = 10;
const MAX_REFINEMENT: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodingConstants {
    /// Working scale: largest rectangle diameter.
    pub delta: f64,
    pub beta: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub c: f64,
    /// `d(seed, union of rectangle boundaries)`.
    #[serde(rename = "Delta")]
    pub margin: f64,
    pub epsilon: f64,
    pub n0: usize,
    pub n1: usize,
    pub n2: usize,
    /// Radius of the neighbourhood `U` of the seed.
    pub u_radius: f64,
    /// `|gamma - log lambda| / log lambda`.
    pub gamma_relative_error: f64,
}

impl CodingConstants {
    /// `C e^{-gamma N1} < 1/2`.
    pub fn contraction_ok(&self) -> bool {
        self.c * (-self.gamma * self.n1 as f64).exp() < 0.5
    }

    /// `epsilon < Delta / (2 (1 + beta^2 kappa^2))`.
    pub fn epsilon_ok(&self) -> bool {
        self.epsilon < self.margin / (2.0 * (1.0 + self.bk2()))
    }

    /// `epsilon (1 + 2 beta^2 kappa^2) < Delta`.
    pub fn containment_ok(&self) -> bool {
        self.epsilon * (1.0 + 2.0 * self.bk2()) < self.margin
    }

    pub fn invariants_ok(&self) -> bool {
        self.contraction_ok() && self.epsilon_ok() && self.containment_ok()
    }

    /// Shadowing radius `epsilon (1 + 2 beta^2 kappa^2)`.
    pub fn shadow_bound(&self) -> f64 {
        self.epsilon * (1.0 + 2.0 * self.bk2())
    }

    fn bk2(&self) -> f64 {
        (self.beta * self.kappa).powi(2)
    }
}

/// Measures the constants on a built cross section. The section comes first
/// because `Delta` is a property of the rectangles.
pub fn choose_constants(
    model: &FlowModel,
    seed: &Seed,
    section: &CrossSection,
    u_radius: f64,
    beta: f64,
) -> Result<CodingConstants> {
    let m = model.as_toral()?;
    if beta <= 1.0 {
        return Err(Error::Precondition(format!("beta {beta} must exceed 1")));
    }
    if u_radius <= 0.0 {
        return Err(Error::Precondition(format!("U radius {u_radius} must be positive")));
    }
    let margin = section.margin(seed);
    if margin <= MEMBERSHIP_TOL {
        return Err(Error::Coding(format!(
            "seed touches a rectangle boundary (Delta = {margin:e}); adjust the rectangles"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xc0de);
    let mut kappa_measured: f64 = 0.0;
    let mut ratios = vec![Vec::new(); CONTRACTION_STEPS as usize];
    for r in &section.rectangles {
        for _ in 0..16 {
            let (x, y) = (r.sample(m, &mut rng), r.sample(m, &mut rng));
            let d = m.torus_distance(x, y);
            if d > 0.0 {
                let z = m.bracket(x, y);
                kappa_measured = kappa_measured.max(m.torus_distance(x, z).max(m.torus_distance(y, z)) / d);
            }
        }
        let v = r.center;
        let b = 0.5 * r.half_s;
        let w = wrap2([v[0] + b * m.e_s[0], v[1] + b * m.e_s[1]]);
        let d0 = m.torus_distance(v, w);
        for (n, slot) in ratios.iter_mut().enumerate() {
            let k = n as i64 + 1;
            slot.push(m.torus_distance(m.iterate(v, k), m.iterate(w, k)) / d0);
        }
    }
    let kappa = m.bracket_constant().max(kappa_measured).max(1.0);
    // Least-squares fit of log r_n = log C - gamma n on the worst ratio per n.
    let pts: Vec<(f64, f64)> = ratios
        .iter()
        .enumerate()
        .map(|(n, r)| ((n + 1) as f64, r.iter().fold(0.0f64, |a, &b| a.max(b)).ln()))
        .collect();
    let k = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / k, sy / k);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| {
        (a + (x - mx) * (y - my), b + (x - mx).powi(2))
    });
    let gamma = -sxy / sxx;
    let c = pts.iter().map(|&(x, y)| (y + gamma * x).exp()).fold(1.0f64, f64::max);
    let n1 = (1..)
        .find(|&n| c * (-gamma * n as f64).exp() < 0.5)
        .expect("gamma is positive");
    let bk2 = (beta * kappa).powi(2);
    let epsilon = EPSILON_FRACTION * margin / (2.0 * (1.0 + bk2));
    let n2 = (0..=MAX_REFINEMENT)
        .find(|&n| refine(section, seed, n).max_diameter() < epsilon)
        .ok_or_else(|| {
            Error::Coding(format!(
                "refinement did not reach diameter {epsilon:e} by N = {MAX_REFINEMENT}"
            ))
        })?;
    let log_lambda = m.lambda.ln();
    Ok(CodingConstants {
        delta: section.max_diameter(),
        beta,
        kappa,
        gamma,
        c,
        margin,
        epsilon,
        n0: n1.max(n2) + 1,
        n1,
        n2,
        u_radius,
        gamma_relative_error: (gamma - log_lambda).abs() / log_lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::super::section::{build_cross_section, SuRectangle};
    use super::super::seed::SeedSpec;
    use super::*;
    use crate::models::ToralModel;

    fn fixture() -> (FlowModel, Seed, CrossSection) {
        let model = FlowModel::Toral(ToralModel::cat());
        let seed = Seed::new(model.as_toral().unwrap(), &SeedSpec::two_orbit()).unwrap();
        let section = build_cross_section(&model, &seed, 0.2).unwrap();
        (model, seed, section)
    }

    #[test]
    fn cat_constants_satisfy_all_invariants_strictly() {
        let (model, seed, section) = fixture();
        let c = choose_constants(&model, &seed, &section, 0.25, DEFAULT_BETA).unwrap();
        assert!(c.contraction_ok() && c.epsilon_ok() && c.containment_ok(), "{c:?}");
        assert!(c.n0 > c.n1.max(c.n2));
        assert!(refine(&section, &seed, c.n2).max_diameter() < c.epsilon);
    }

    #[test]
    fn kappa_is_one_for_the_orthonormal_eigenbasis() {
        // The cat matrix is symmetric, so its eigenvectors are orthonormal and
        // the change of coordinates is an isometry.
        let (model, seed, section) = fixture();
        let m = model.as_toral().unwrap();
        assert!((m.e_u[0] * m.e_s[0] + m.e_u[1] * m.e_s[1]).abs() < 1e-15);
        let c = choose_constants(&model, &seed, &section, 0.25, DEFAULT_BETA).unwrap();
        assert!((c.kappa - 1.0).abs() < 1e-12, "{}", c.kappa);
    }

    #[test]
    fn contraction_rate_matches_log_lambda() {
        let (model, seed, section) = fixture();
        let c = choose_constants(&model, &seed, &section, 0.25, DEFAULT_BETA).unwrap();
        assert!(c.gamma_relative_error < 0.1, "{c:?}");
        assert!((c.gamma - ((3.0 + 5f64.sqrt()) / 2.0).ln()).abs() < 1e-6);
        assert!((c.c - 1.0).abs() < 1e-8, "{}", c.c);
    }

    #[test]
    fn seed_on_rectangle_edge_is_rejected() {
        let (model, seed, _) = fixture();
        let m = model.as_toral().unwrap();
        // A rectangle whose corner is the fixed point.
        let d = m.from_eigen([0.05, 0.05]);
        let r = SuRectangle::new(m, 0, [d[0], d[1]], 0.05, 0.05);
        let section = CrossSection::from_rectangles(m, 0.2, vec![r]).unwrap();
        let err = choose_constants(&model, &seed, &section, 0.25, DEFAULT_BETA).unwrap_err();
        assert_eq!(err.code(), "E_CODING");
    }
}
