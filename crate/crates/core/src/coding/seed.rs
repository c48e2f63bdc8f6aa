//! Finitary seeds for the coding construction on the cat map: periodic orbits
//! plus heteroclinic connections between them, both in closed form.

use crate::error::{Error, Result};
use crate::models::toral::{min_image, wrap2};
use crate::models::ToralModel;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Periodicity residual accepted for user supplied orbit points.
const PERIODIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSpec {
    /// Connecting orbits are sampled at iterates `-reach..=reach`.
    #[serde(default = "default_reach")]
    pub reach: i64,
    pub periodic: Vec<PeriodicSpec>,
    #[serde(default, rename = "connection")]
    pub connections: Vec<ConnectionSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicSpec {
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionSpec {
    pub from: usize,
    pub to: usize,
}

fn default_reach() -> i64 {
    40
}

impl SeedSpec {
    /// Fixed point `0` and the period-2 orbit through `(1/5, 2/5)`, joined by
    /// connections in both directions.
    pub fn two_orbit() -> Self {
        SeedSpec {
            reach: default_reach(),
            periodic: vec![
                PeriodicSpec {
                    points: vec![[0.0, 0.0]],
                },
                PeriodicSpec {
                    points: vec![[0.2, 0.4], [0.8, 0.6]],
                },
            ],
            connections: vec![ConnectionSpec { from: 0, to: 1 }, ConnectionSpec { from: 1, to: 0 }],
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("seed spec: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Heteroclinic orbit leaving `from` along its unstable line and arriving at
/// `to` along its stable line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Connection {
    pub from: usize,
    pub to: usize,
    pub from_index: usize,
    pub to_index: usize,
    /// Unstable offset from `from` at iterate 0.
    pub t0: f64,
    /// Stable offset from `to` at iterate 0.
    pub s0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SeedPoint {
    Periodic { orbit: usize, index: usize },
    Connection { connection: usize, k: i64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Seed {
    pub model: ToralModel,
    pub orbits: Vec<Vec<[f64; 2]>>,
    pub connections: Vec<Connection>,
    pub reach: i64,
}

impl Seed {
    pub fn new(model: &ToralModel, spec: &SeedSpec) -> Result<Self> {
        if spec.periodic.is_empty() {
            return Err(Error::Precondition("seed needs at least one periodic orbit".into()));
        }
        if spec.reach < 1 {
            return Err(Error::Precondition(format!("seed reach {} must be >= 1", spec.reach)));
        }
        let mut orbits = Vec::new();
        for (o, p) in spec.periodic.iter().enumerate() {
            if p.points.is_empty() {
                return Err(Error::Precondition(format!("periodic orbit {o} has no points")));
            }
            let pts: Vec<[f64; 2]> = p.points.iter().map(|&x| wrap2(x)).collect();
            for (i, &x) in pts.iter().enumerate() {
                let next = pts[(i + 1) % pts.len()];
                let r = model.torus_distance(model.map(x), next);
                if r > PERIODIC_TOL {
                    return Err(Error::Precondition(format!(
                        "periodic orbit {o}: point {i} does not map to point {} (residual {r:e})",
                        (i + 1) % pts.len()
                    )));
                }
            }
            orbits.push(pts);
        }
        let mut connections = Vec::new();
        for c in &spec.connections {
            if c.from >= orbits.len() || c.to >= orbits.len() {
                return Err(Error::Precondition(format!(
                    "connection {} -> {} names a missing orbit",
                    c.from, c.to
                )));
            }
            connections.push(connect(model, &orbits, c.from, c.to)?);
        }
        Ok(Seed {
            model: model.clone(),
            orbits,
            connections,
            reach: spec.reach,
        })
    }

    pub fn position(&self, p: SeedPoint) -> [f64; 2] {
        match p {
            SeedPoint::Periodic { orbit, index } => self.orbits[orbit][index],
            SeedPoint::Connection { connection, k } => {
                let c = &self.connections[connection];
                let m = &self.model;
                if k <= 0 {
                    let base = self.orbit_point(c.from, c.from_index as i64 + k);
                    let a = m.lambda.powi(k as i32) * c.t0;
                    wrap2([base[0] + a * m.e_u[0], base[1] + a * m.e_u[1]])
                } else {
                    let base = self.orbit_point(c.to, c.to_index as i64 + k);
                    let b = m.lambda.powi(-(k as i32)) * c.s0;
                    wrap2([base[0] + b * m.e_s[0], base[1] + b * m.e_s[1]])
                }
            }
        }
    }

    fn orbit_point(&self, orbit: usize, i: i64) -> [f64; 2] {
        let pts = &self.orbits[orbit];
        pts[i.rem_euclid(pts.len() as i64) as usize]
    }

    /// The seed point `F^j(p)`.
    pub fn shift(&self, p: SeedPoint, j: i64) -> SeedPoint {
        match p {
            SeedPoint::Periodic { orbit, index } => {
                let n = self.orbits[orbit].len() as i64;
                SeedPoint::Periodic {
                    orbit,
                    index: (index as i64 + j).rem_euclid(n) as usize,
                }
            }
            SeedPoint::Connection { connection, k } => SeedPoint::Connection { connection, k: k + j },
        }
    }

    /// Periodic points followed by the sampled connection points.
    pub fn sample(&self) -> Vec<SeedPoint> {
        let mut out = Vec::new();
        for (orbit, pts) in self.orbits.iter().enumerate() {
            out.extend((0..pts.len()).map(|index| SeedPoint::Periodic { orbit, index }));
        }
        for connection in 0..self.connections.len() {
            out.extend((-self.reach..=self.reach).map(|k| SeedPoint::Connection { connection, k }));
        }
        out
    }

    pub fn label(&self, p: SeedPoint) -> String {
        match p {
            SeedPoint::Periodic { orbit, index } => format!("O{orbit}[{index}]"),
            SeedPoint::Connection { connection, k } => format!("H{connection}[{k}]"),
        }
    }
}

/// Solves `P_b - P_a + n = t0 e_u - s0 e_s` over orbit indices and small
/// lattice shifts `n`, keeping the smallest offsets.
fn connect(model: &ToralModel, orbits: &[Vec<[f64; 2]>], from: usize, to: usize) -> Result<Connection> {
    let mut best: Option<(f64, Connection)> = None;
    for (i, pa) in orbits[from].iter().enumerate() {
        for (j, pb) in orbits[to].iter().enumerate() {
            for n0 in -3..=3 {
                for n1 in -3..=3 {
                    let d = [pb[0] - pa[0] + n0 as f64, pb[1] - pa[1] + n1 as f64];
                    let [t0, e] = model.eigen(d);
                    let s0 = -e;
                    let size = t0.abs().max(s0.abs());
                    if size < 1e-9 {
                        continue;
                    }
                    if best.as_ref().is_none_or(|(b, _)| size < *b) {
                        best = Some((
                            size,
                            Connection {
                                from,
                                to,
                                from_index: i,
                                to_index: j,
                                t0,
                                s0,
                            },
                        ));
                    }
                }
            }
        }
    }
    best.map(|(_, c)| c)
        .ok_or_else(|| Error::Precondition(format!("no connection found from orbit {from} to {to}")))
}

/// Eigen-coordinates of the minimal displacement from `a` to `b`.
pub fn offset(model: &ToralModel, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    model.eigen(min_image([b[0] - a[0], b[1] - a[1]]))
}
