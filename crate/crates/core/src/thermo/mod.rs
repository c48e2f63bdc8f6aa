//! Pressure curves of the geometric potential and of locally constant
//! proxies, their Legendre transforms, and nested-subsystem convergence.

pub mod curve;
pub mod legendre;
pub mod oracle;

pub use curve::{
    default_grid, nested_pressure_convergence, phase_transition_report, pressure_curve, Estimator, NestedReport,
    PhaseTransition, PlateauOnset, PressureCurve, DEFAULT_PLATEAU_TOL,
};
pub use legendre::{
    double_legendre, involution_error, legendre, legendre_at, spectrum_report, CrossCheck, LegendreValue,
    SpectrumReport, SpectrumRow, SpectrumTable,
};
pub use oracle::{
    graph_pressure, oracle_pressure, pressure_orbit_sum, renewal_pressure, suspension_pressure_oracle, OrbitSum,
    OrbitSumEstimate, RenewalPressure,
};

use crate::error::{Error, Result};
use crate::models::MarkovModel;
use serde::{Deserialize, Serialize};

/// Potential `phi` on a Markov model; pressure curves evaluate `t * phi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Potential {
    /// Locally constant: crossing symbol `s` contributes `weights[s]`.
    Proxy { weights: Vec<f64> },
    /// The geometric potential. The oracle truncates flat excursions after
    /// `n_max` flat symbols.
    Geometric { n_max: usize },
}

pub const DEFAULT_EXCURSION_CAP: usize = 64;

impl Potential {
    /// Proxy weights `-a_s r_s`, the integral of `-sqrt(-K)` over each symbol.
    pub fn proxy_for(model: &MarkovModel) -> Self {
        Potential::Proxy {
            weights: (0..model.len()).map(|s| -model.rate(s) * model.roofs[s]).collect(),
        }
    }

    pub fn check(&self, model: &MarkovModel) -> Result<()> {
        match self {
            Potential::Proxy { weights } => {
                if weights.len() != model.len() {
                    return Err(Error::Precondition(format!(
                        "{} proxy weights for {} symbols",
                        weights.len(),
                        model.len()
                    )));
                }
                if weights.iter().any(|w| !w.is_finite()) {
                    return Err(Error::Precondition("proxy weights must be finite".into()));
                }
                Ok(())
            }
            Potential::Geometric { n_max } => {
                if *n_max == 0 {
                    return Err(Error::Precondition("n_max must be at least 1".into()));
                }
                Ok(())
            }
        }
    }
}
