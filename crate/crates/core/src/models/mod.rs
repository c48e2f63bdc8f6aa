//! Flow models: suspension flows with piecewise constant curvature along
//! orbits, geodesic flows on surfaces of revolution, and the suspended cat map.
//!
//! Every model has curvature `K <= 0`. Nonpositive curvature is a subclass of
//! the no-focal-points condition, and every algorithm in this crate reads the
//! geometry only through `K` along orbits, so the restriction loses nothing
//! for the operations implemented here.

pub mod catalog;
pub mod file;
pub mod markov;
pub mod surface;
pub mod toral;

use crate::error::{Error, Result};
pub use markov::{MarkovModel, MarkovPoint};
use rand::Rng;
use serde::Serialize;
pub use surface::{Profile, SurfaceModel, SurfacePoint};
pub use toral::{ToralModel, ToralPoint};

#[derive(Debug, Clone, PartialEq)]
pub enum FlowModel {
    Markov(MarkovModel),
    Surface(SurfaceModel),
    Toral(ToralModel),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Markov(MarkovPoint),
    Surface(SurfacePoint),
    Toral(ToralPoint),
}

impl Point {
    pub fn kind(&self) -> &'static str {
        match self {
            Point::Markov(_) => "markov-curvature",
            Point::Surface(_) => "surface-of-revolution",
            Point::Toral(_) => "linear-toy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    pub name: String,
    pub kind: String,
    pub flat_loop: bool,
    pub max_flow_defect: f64,
    pub max_reverse_defect: f64,
}

impl FlowModel {
    pub fn name(&self) -> &str {
        match self {
            FlowModel::Markov(m) => &m.name,
            FlowModel::Surface(m) => &m.name,
            FlowModel::Toral(m) => &m.name,
        }
    }

    pub fn description(&self) -> &str {
        match self {
            FlowModel::Markov(m) => &m.description,
            FlowModel::Surface(m) => &m.description,
            FlowModel::Toral(m) => &m.description,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            FlowModel::Markov(_) => "markov-curvature",
            FlowModel::Surface(_) => "surface-of-revolution",
            FlowModel::Toral(_) => "linear-toy",
        }
    }

    fn mismatch(&self, p: &Point) -> Error {
        Error::ModelMismatch(self.kind().into(), p.kind().into())
    }

    pub fn as_markov(&self) -> Result<&MarkovModel> {
        match self {
            FlowModel::Markov(m) => Ok(m),
            _ => Err(Error::Precondition(format!(
                "operation needs a markov-curvature model, `{}` is {}",
                self.name(),
                self.kind()
            ))),
        }
    }

    pub fn as_toral(&self) -> Result<&ToralModel> {
        match self {
            FlowModel::Toral(m) => Ok(m),
            _ => Err(Error::Precondition(format!(
                "operation needs the linear toy model, `{}` is {}",
                self.name(),
                self.kind()
            ))),
        }
    }

    pub fn flow(&self, p: &Point, t: f64) -> Result<Point> {
        if !t.is_finite() {
            return Err(Error::Precondition(format!("flow time {t} is not finite")));
        }
        match (self, p) {
            (FlowModel::Markov(m), Point::Markov(q)) => Ok(Point::Markov(m.flow(q, t)?)),
            (FlowModel::Surface(m), Point::Surface(q)) => Ok(Point::Surface(m.flow(q, t)?)),
            (FlowModel::Toral(m), Point::Toral(q)) => Ok(Point::Toral(m.flow(q, t))),
            _ => Err(self.mismatch(p)),
        }
    }

    pub fn curvature_at(&self, p: &Point) -> Result<f64> {
        match (self, p) {
            (FlowModel::Markov(m), Point::Markov(q)) => Ok(m.curvature_at(q)),
            (FlowModel::Surface(m), Point::Surface(q)) => Ok(m.curvature_at(q)),
            (FlowModel::Toral(m), Point::Toral(_)) => Ok(m.curvature()),
            _ => Err(self.mismatch(p)),
        }
    }

    pub fn reverse(&self, p: &Point) -> Result<Point> {
        match (self, p) {
            (FlowModel::Markov(m), Point::Markov(q)) => Ok(Point::Markov(m.reverse(q)?)),
            (FlowModel::Surface(m), Point::Surface(q)) => Ok(Point::Surface(m.reverse(q))),
            (FlowModel::Toral(m), Point::Toral(q)) => Ok(Point::Toral(m.reverse(q))),
            _ => Err(self.mismatch(p)),
        }
    }

    pub fn distance(&self, p: &Point, q: &Point) -> Result<f64> {
        match (self, p, q) {
            (FlowModel::Markov(m), Point::Markov(a), Point::Markov(b)) => {
                if a.symbols.iter().chain(&b.symbols).any(|&s| s >= m.len()) {
                    return Err(Error::ModelMismatch(
                        "point alphabet".into(),
                        format!("model `{}`", m.name),
                    ));
                }
                m.distance(a, b)
            }
            (FlowModel::Surface(m), Point::Surface(a), Point::Surface(b)) => m.distance(a, b),
            (FlowModel::Toral(m), Point::Toral(a), Point::Toral(b)) => Ok(m.distance(a, b)),
            _ if p.kind() != self.kind() => Err(self.mismatch(p)),
            _ => Err(self.mismatch(q)),
        }
    }

    pub fn has_flat_loop(&self) -> bool {
        match self {
            FlowModel::Markov(m) => m.has_flat_loop(),
            _ => false,
        }
    }

    /// Natural step for quadrature along orbits.
    pub fn base_step(&self) -> f64 {
        match self {
            FlowModel::Markov(m) => m.min_roof() / 8.0,
            _ => 1.0 / 8.0,
        }
    }

    /// Largest horizon a point can look into the past and future.
    pub fn horizon_limit(&self, p: &Point) -> f64 {
        match (self, p) {
            (FlowModel::Markov(m), Point::Markov(q)) if !q.periodic => {
                let side = q.origin.min(q.symbols.len() - 1 - q.origin);
                side.saturating_sub(1) as f64 * m.min_roof()
            }
            _ => f64::INFINITY,
        }
    }

    /// A sample point used by validators and randomized checks.
    pub fn random_point<R: Rng>(&self, rng: &mut R) -> Point {
        match self {
            FlowModel::Markov(m) => Point::Markov(m.random_point(rng, markov::DEFAULT_WINDOW)),
            FlowModel::Surface(m) => {
                let (lo, hi) = m.domain;
                let mid = 0.5 * (lo + hi);
                let r = mid + 0.1 * (hi - lo) * (rng.gen::<f64>() - 0.5);
                let theta = rng.gen::<f64>() * std::f64::consts::TAU;
                let psi = rng.gen::<f64>() * std::f64::consts::TAU;
                Point::Surface(m.point(r, theta, psi))
            }
            FlowModel::Toral(m) => Point::Toral(m.point([rng.gen(), rng.gen()], rng.gen())),
        }
    }

    /// Structural checks plus sampled flow-property and reversal checks.
    pub fn validate(&self) -> Result<ModelSummary> {
        use rand::SeedableRng;
        if let FlowModel::Markov(m) = self {
            MarkovModel::new(
                &m.name,
                m.alphabet.clone(),
                m.adjacency.clone(),
                m.roofs.clone(),
                m.curvatures.clone(),
            )?;
        }
        if let FlowModel::Surface(m) = self {
            SurfaceModel::new(&m.name, m.profile, m.domain)?;
        }
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        let mut flow_defect = 0.0f64;
        let mut reverse_defect = 0.0f64;
        for _ in 0..8 {
            let p = self.random_point(&mut rng);
            let s = rng.gen::<f64>() * 2.0 - 1.0;
            let t = rng.gen::<f64>() * 2.0 - 1.0;
            let a = self.flow(&p, s + t)?;
            let b = self.flow(&self.flow(&p, s)?, t)?;
            flow_defect = flow_defect.max(self.distance(&a, &b)?);
            let rr = self.reverse(&self.reverse(&p)?)?;
            reverse_defect = reverse_defect.max(self.distance(&p, &rr)?);
            let k = self.curvature_at(&p)?;
            if k > 0.0 {
                return Err(Error::InvalidModel(format!("positive curvature {k}")));
            }
        }
        if flow_defect > 1e-9 || reverse_defect > 1e-9 {
            return Err(Error::InvalidModel(format!(
                "flow property defect {flow_defect:e}, reversal defect {reverse_defect:e}"
            )));
        }
        Ok(ModelSummary {
            name: self.name().to_string(),
            kind: self.kind().to_string(),
            flat_loop: self.has_flat_loop(),
            max_flow_defect: flow_defect,
            max_reverse_defect: reverse_defect,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_model_distance_is_an_error() {
        let m2 = catalog::get("M2").unwrap();
        let cat = catalog::get("CAT").unwrap();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let p = cat.random_point(&mut rng);
        let q = m2.random_point(&mut rng);
        assert_eq!(m2.distance(&q, &p).unwrap_err().code(), "E_MISMATCH");
        assert_eq!(m2.distance(&p, &q).unwrap_err().code(), "E_MISMATCH");
    }

    #[test]
    fn foreign_alphabet_is_an_error() {
        let m0 = catalog::get("M0").unwrap();
        let m2 = catalog::markov("M2").unwrap();
        let p = Point::Markov(m2.periodic_point(&[1], 0.0).unwrap());
        let q = Point::Markov(m2.periodic_point(&[0], 0.0).unwrap());
        assert!(m0.distance(&p, &q).is_err());
    }
}
