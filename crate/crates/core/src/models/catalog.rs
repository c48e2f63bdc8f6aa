//! Standard desk-scale models addressable by name.

use super::{FlowModel, MarkovModel, ToralModel};
use crate::error::{Error, Result};

pub const NAMES: [&str; 5] = ["M0", "MFLAT", "M2", "MRANK1", "CAT"];

pub fn markov(name: &str) -> Result<MarkovModel> {
    let full = vec![vec![true, true], vec![true, true]];
    let (mut m, description) = match name {
        "M0" => (
            MarkovModel::new("M0", vec!["H".into()], vec![vec![true]], vec![1.0], vec![-1.0])?,
            "one hyperbolic symbol, K = -1",
        ),
        "MFLAT" => (
            MarkovModel::new("MFLAT", vec!["F".into()], vec![vec![true]], vec![1.0], vec![0.0])?,
            "one flat symbol, K = 0",
        ),
        "M2" => (
            MarkovModel::new(
                "M2",
                vec!["A".into(), "B".into()],
                full,
                vec![1.0, 1.0],
                vec![-1.0, -4.0],
            )?,
            "full 2-shift with K = -1 on A and K = -4 on B",
        ),
        "MRANK1" => (
            MarkovModel::new(
                "MRANK1",
                vec!["F".into(), "H".into()],
                full,
                vec![1.0, 1.0],
                vec![0.0, -1.0],
            )?,
            "full 2-shift with a flat symbol F and K = -1 on H",
        ),
        other => return Err(Error::UnknownModel(other.to_string())),
    };
    m.description = description.to_string();
    Ok(m)
}

pub fn get(name: &str) -> Result<FlowModel> {
    if name == "CAT" {
        return Ok(FlowModel::Toral(ToralModel::cat()));
    }
    markov(name).map(FlowModel::Markov)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_entry_builds_and_validates() {
        for name in NAMES {
            let m = get(name).unwrap();
            m.validate().unwrap();
        }
    }

    #[test]
    fn flat_loops() {
        assert!(!get("M0").unwrap().has_flat_loop());
        assert!(get("MFLAT").unwrap().has_flat_loop());
        assert!(!get("M2").unwrap().has_flat_loop());
        assert!(get("MRANK1").unwrap().has_flat_loop());
    }

    #[test]
    fn unknown_name() {
        assert_eq!(get("M7").unwrap_err().code(), "E_UNKNOWN_MODEL");
    }
}
