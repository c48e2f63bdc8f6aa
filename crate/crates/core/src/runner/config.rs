//! Experiment configuration: strict TOML with a canonical serialization.

use crate::coding::DEFAULT_BETA;
use crate::error::{Error, Result};
use crate::jacobi::DEFAULT_TOL;
use crate::orbits::DEFAULT_N_MAX;
use crate::thermo::{Estimator, Potential, DEFAULT_PLATEAU_TOL};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Emit {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Catalog name or path to a model file.
    pub model: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub emit: Emit,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub operation: Operation,
}

fn default_seed() -> u64 {
    7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Convergence tolerance of the `k^u` limit.
    pub curvature: f64,
    /// Plateau threshold of pressure curves.
    pub plateau: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            curvature: DEFAULT_TOL,
            plateau: DEFAULT_PLATEAU_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            lo: -6.0,
            hi: 4.0,
            points: 81,
        }
    }
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.points < 3 || !(self.hi > self.lo) {
            return Err(Error::Config(format!(
                "grid needs lo < hi and at least 3 points (got [{}, {}] with {})",
                self.lo, self.hi, self.points
            )));
        }
        let h = (self.hi - self.lo) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| self.lo + h * i as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Operation {
    Validate,
    Riccati {
        horizon: f64,
        points: usize,
    },
    Lyapunov {
        t: f64,
        points: usize,
    },
    Orbits {
        max_len: usize,
        n_max: usize,
    },
    Pressure {
        estimator: Estimator,
        grid: Grid,
    },
    Spectrum {
        estimator: Estimator,
        grid: Grid,
        cycle_len: usize,
    },
    Nested {
        potential: Potential,
        caps: Vec<usize>,
        grid: Grid,
    },
    Coding {
        #[serde(default)]
        seed_file: Option<String>,
        u_radius: f64,
        alpha_rect: f64,
        beta: f64,
        samples: usize,
    },
}

impl Operation {
    pub fn name(&self) -> &'static str {
        match self {
            Operation::Validate => "validate",
            Operation::Riccati { .. } => "riccati",
            Operation::Lyapunov { .. } => "lyapunov",
            Operation::Orbits { .. } => "orbits",
            Operation::Pressure { .. } => "pressure",
            Operation::Spectrum { .. } => "spectrum",
            Operation::Nested { .. } => "nested",
            Operation::Coding { .. } => "coding",
        }
    }

    /// Default parameters for a named operation. Thermodynamic defaults use
    /// the proxy potential when `proxy` is given, else the geometric one.
    pub fn defaults(name: &str, proxy: Option<Potential>) -> Result<Self> {
        let potential = proxy.unwrap_or(Potential::Geometric {
            n_max: crate::thermo::DEFAULT_EXCURSION_CAP,
        });
        Ok(match name {
            "validate" => Operation::Validate,
            "riccati" => Operation::Riccati {
                horizon: 20.0,
                points: 8,
            },
            "lyapunov" => Operation::Lyapunov { t: 50.0, points: 8 },
            "orbits" => Operation::Orbits {
                max_len: 12,
                n_max: DEFAULT_N_MAX,
            },
            "pressure" => Operation::Pressure {
                estimator: Estimator::Oracle { potential },
                grid: Grid::default(),
            },
            "spectrum" => Operation::Spectrum {
                estimator: Estimator::Oracle { potential },
                grid: Grid::default(),
                cycle_len: 12,
            },
            "nested" => Operation::Nested {
                potential,
                caps: vec![1, 2, 4, 8],
                grid: Grid::default(),
            },
            "coding" => Operation::Coding {
                seed_file: None,
                u_radius: 0.25,
                alpha_rect: 0.2,
                beta: DEFAULT_BETA,
                samples: 200,
            },
            other => return Err(Error::Config(format!("unknown operation `{other}`"))),
        })
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Canonical TOML text; parsing it gives back an equal config and
    /// serializing again gives the same bytes.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        sha256_hex(self.to_toml().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const PRESSURE: &str = r#"
model = "M0"
seed = 3

[operation]
name = "pressure"

[operation.grid]
lo = -2.0
hi = 2.0
points = 5

[operation.estimator]
method = "oracle"

[operation.estimator.potential]
kind = "proxy"
weights = [-1.0]
"#;

    #[test]
    fn parses_and_round_trips_byte_identically() {
        let c = ExperimentConfig::parse(PRESSURE).unwrap();
        assert_eq!(c.operation.name(), "pressure");
        let text = c.to_toml();
        let again = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.to_toml(), text);
        assert_eq!(again.hash(), c.hash());
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let err = ExperimentConfig::parse(&format!("{PRESSURE}\nbogus = 1\n")).unwrap_err();
        assert_eq!(err.code(), "E_CONFIG");
        assert!(err.to_string().contains("bogus"), "{err}");
        let nested = PRESSURE.replace("points = 5", "points = 5\nstep = 0.1");
        let err = ExperimentConfig::parse(&nested).unwrap_err();
        assert!(err.to_string().contains("step"), "{err}");
    }

    #[test]
    fn unknown_operation_is_rejected() {
        let text = PRESSURE.replace("name = \"pressure\"", "name = \"teleport\"");
        assert_eq!(ExperimentConfig::parse(&text).unwrap_err().code(), "E_CONFIG");
        assert_eq!(Operation::defaults("teleport", None).unwrap_err().code(), "E_CONFIG");
    }

    #[test]
    fn every_default_operation_round_trips() {
        for name in [
            "validate", "riccati", "lyapunov", "orbits", "pressure", "spectrum", "nested", "coding",
        ] {
            let c = ExperimentConfig {
                model: "M2".into(),
                seed: 1,
                out: Some("out".into()),
                emit: Emit::Json,
                tolerances: Tolerances::default(),
                operation: Operation::defaults(name, None).unwrap(),
            };
            let text = c.to_toml();
            let back = ExperimentConfig::parse(&text).unwrap();
            assert_eq!(back, c, "{name}");
            assert_eq!(back.to_toml(), text, "{name}");
        }
    }

    #[test]
    fn grid_values_are_evenly_spaced() {
        let g = Grid {
            lo: -1.0,
            hi: 1.0,
            points: 5,
        }
        .values()
        .unwrap();
        assert_eq!(g, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!(Grid {
            lo: 1.0,
            hi: 0.0,
            points: 5
        }
        .values()
        .is_err());
    }
}
