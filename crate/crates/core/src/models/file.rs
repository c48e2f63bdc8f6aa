//! Model definition files.
//!
//! A model file is TOML with a `kind` key selecting one of three layouts:
//!
//! ```toml
//! kind = "markov-curvature"
//! name = "M3"
//! description = "optional"
//! alphabet = ["A", "B", "C"]
//! adjacency = [[1, 1, 0], [0, 1, 1], [1, 0, 1]]
//! roofs = [1.0, 0.5, 2.0]
//! curvatures = [-1.0, 0.0, -0.25]
//! ```
//!
//! ```toml
//! kind = "surface-of-revolution"
//! name = "neck"
//! domain = [-20.0, 20.0]
//! [profile]          # f(r) = a cosh(b r) + c + d r^2
//! a = 1.0
//! b = 1.0
//! c = 0.0
//! d = 0.0
//! ```
//!
//! ```toml
//! kind = "linear-toy"
//! name = "CAT"
//! ```
//!
//! Unknown keys are rejected. A reference that is not a path to an existing
//! file is looked up in the catalog (`M0`, `MFLAT`, `M2`, `MRANK1`, `CAT`).

use super::{catalog, FlowModel, MarkovModel, Profile, SurfaceModel, ToralModel};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelFile {
    MarkovCurvature {
        name: String,
        #[serde(default)]
        description: String,
        alphabet: Vec<String>,
        adjacency: Vec<Vec<u8>>,
        roofs: Vec<f64>,
        curvatures: Vec<f64>,
    },
    SurfaceOfRevolution {
        name: String,
        #[serde(default)]
        description: String,
        domain: [f64; 2],
        profile: Profile,
    },
    LinearToy {
        name: String,
        #[serde(default)]
        description: String,
    },
}

impl ModelFile {
    pub fn build(&self) -> Result<FlowModel> {
        match self {
            ModelFile::MarkovCurvature {
                name,
                description,
                alphabet,
                adjacency,
                roofs,
                curvatures,
            } => {
                let mut adj = Vec::with_capacity(adjacency.len());
                for row in adjacency {
                    let mut r = Vec::with_capacity(row.len());
                    for &v in row {
                        match v {
                            0 => r.push(false),
                            1 => r.push(true),
                            _ => {
                                return Err(Error::InvalidModel(format!(
                                    "adjacency entries must be 0 or 1, got {v}"
                                )))
                            }
                        }
                    }
                    adj.push(r);
                }
                let mut m = MarkovModel::new(name, alphabet.clone(), adj, roofs.clone(), curvatures.clone())?;
                m.description = description.clone();
                Ok(FlowModel::Markov(m))
            }
            ModelFile::SurfaceOfRevolution {
                name,
                description,
                domain,
                profile,
            } => {
                let mut m = SurfaceModel::new(name, *profile, (domain[0], domain[1]))?;
                m.description = description.clone();
                Ok(FlowModel::Surface(m))
            }
            ModelFile::LinearToy { name, description } => {
                let mut m = ToralModel::cat();
                m.name = name.clone();
                if !description.is_empty() {
                    m.description = description.clone();
                }
                Ok(FlowModel::Toral(m))
            }
        }
    }

    pub fn from_model(model: &FlowModel) -> Self {
        match model {
            FlowModel::Markov(m) => ModelFile::MarkovCurvature {
                name: m.name.clone(),
                description: m.description.clone(),
                alphabet: m.alphabet.clone(),
                adjacency: m
                    .adjacency
                    .iter()
                    .map(|r| r.iter().map(|&b| b as u8).collect())
                    .collect(),
                roofs: m.roofs.clone(),
                curvatures: m.curvatures.clone(),
            },
            FlowModel::Surface(m) => ModelFile::SurfaceOfRevolution {
                name: m.name.clone(),
                description: m.description.clone(),
                domain: [m.domain.0, m.domain.1],
                profile: m.profile,
            },
            FlowModel::Toral(m) => ModelFile::LinearToy {
                name: m.name.clone(),
                description: m.description.clone(),
            },
        }
    }
}

pub fn parse(text: &str) -> Result<FlowModel> {
    let file: ModelFile = toml::from_str(text).map_err(|e| Error::InvalidModel(e.message().to_string()))?;
    file.build()
}

pub fn load(path: &Path) -> Result<FlowModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse(&text).map_err(|e| match e {
        Error::InvalidModel(msg) => Error::InvalidModel(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Resolves a model reference: an existing file path, or a catalog name.
pub fn resolve(reference: &str) -> Result<FlowModel> {
    let path = Path::new(reference);
    if path.is_file() {
        return load(path);
    }
    if reference.ends_with(".toml") {
        return Err(Error::Io(format!("model file `{reference}` not found")));
    }
    catalog::get(reference)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markov_file_parses() {
        let text = r#"
kind = "markov-curvature"
name = "M2b"
alphabet = ["A", "B"]
adjacency = [[1, 1], [1, 1]]
roofs = [1.0, 1.0]
curvatures = [-1.0, -4.0]
"#;
        let m = parse(text).unwrap();
        assert_eq!(m.name(), "M2b");
        assert_eq!(m.as_markov().unwrap().curvatures, vec![-1.0, -4.0]);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = "kind = \"linear-toy\"\nname = \"CAT\"\ncolour = 3\n";
        let err = parse(text).unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");
    }

    #[test]
    fn surface_file_parses() {
        let text = r#"
kind = "surface-of-revolution"
name = "neck"
domain = [-5.0, 5.0]
[profile]
a = 1.0
b = 1.0
c = 0.0
d = 0.0
"#;
        assert_eq!(parse(text).unwrap().kind(), "surface-of-revolution");
    }

    #[test]
    fn catalog_round_trips_through_files() {
        for name in catalog::NAMES {
            let m = catalog::get(name).unwrap();
            let text = toml::to_string(&ModelFile::from_model(&m)).unwrap();
            assert_eq!(parse(&text).unwrap(), m);
        }
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert_eq!(resolve("no/such/model.toml").unwrap_err().code(), "E_IO");
    }
}
