//! Experiment orchestration: strict configs, one seeded generator per run,
//! flat-file outputs with a hashed manifest, and the acceptance suites.

pub mod config;
pub mod output;
pub mod suite;

pub use config::{sha256_hex, Emit, ExperimentConfig, Grid, Operation, Tolerances};
pub use output::{fmt, OutputDir, OutputFile};
pub use suite::{run_suite, Criterion, SuiteReport, SUITES};

use crate::coding::{build_cross_section, build_envelope, choose_constants, EnvelopeOptions, Seed, SeedSpec};
use crate::error::{Error, Result};
use crate::jacobi::{horocycle_curvatures, lyapunov_backward, lyapunov_forward};
use crate::models::{file, FlowModel};
use crate::orbits::{chi_bound_check, enumerate_cycles, loglog_slope, small_exponent_orbits, DEFAULT_CYCLE_CAP};
use crate::thermo::{nested_pressure_convergence, pressure_curve, spectrum_report};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::Path;
use std::time::Instant;

pub const ARTIFACT_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Threshold below which `chi(F^n H)` counts as small in the orbits operation.
const SMALL_EXPONENT: f64 = 0.2;

/// The single generator behind every randomized step of a run.
pub fn generator(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub code: String,
    pub message: String,
}

impl From<&Error> for ErrorRecord {
    fn from(e: &Error) -> Self {
        ErrorRecord {
            code: e.code().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub artifact_version: String,
    pub operation: String,
    pub model: String,
    /// Seconds; kept out of `record.json` so reruns stay byte-identical.
    #[serde(skip)]
    pub wall_time: f64,
    pub outputs: Vec<OutputFile>,
    pub checks: Vec<CheckResult>,
    pub error: Option<ErrorRecord>,
}

impl RunRecord {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.passed)
    }
}

/// Runs `config` into `out`. An unresolvable model is returned as an error
/// before anything is written; failures of the operation itself are kept in
/// the record, which is written as `record.json` either way.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<RunRecord> {
    run_with_base(config, None, out)
}

/// Model reference lookup; relative model paths are taken against `base`
/// when it is given.
pub fn resolve_model(reference: &str, base: Option<&Path>) -> Result<FlowModel> {
    match base {
        Some(dir) if reference.ends_with(".toml") && Path::new(reference).is_relative() => {
            file::resolve(&dir.join(reference).to_string_lossy())
        }
        _ => file::resolve(reference),
    }
}

/// [`run`] with relative model paths resolved against `base`.
pub fn run_with_base(config: &ExperimentConfig, base: Option<&Path>, out: &Path) -> Result<RunRecord> {
    let model = resolve_model(&config.model, base)?;
    let start = Instant::now();
    let mut dir = OutputDir::create(out, config.emit)?;
    let (checks, error) = match execute(&model, config, &mut dir) {
        Ok(checks) => (checks, None),
        Err(e) => (Vec::new(), Some(ErrorRecord::from(&e))),
    };
    let record = RunRecord {
        config_hash: config.hash(),
        artifact_version: ARTIFACT_VERSION.to_string(),
        operation: config.operation.name().to_string(),
        model: model.name().to_string(),
        wall_time: start.elapsed().as_secs_f64(),
        outputs: dir.manifest(),
        checks,
        error,
    };
    dir.write("config.toml", config.to_toml().as_bytes())?;
    dir.json("record.json", &record)?;
    Ok(record)
}

fn execute(model: &FlowModel, config: &ExperimentConfig, out: &mut OutputDir) -> Result<Vec<CheckResult>> {
    let tol = &config.tolerances;
    let mut rng = generator(config.seed);
    match &config.operation {
        Operation::Validate => {
            let summary = model.validate()?;
            out.json("report.json", &summary)?;
            Ok(vec![CheckResult::new(
                "model-valid",
                true,
                format!(
                    "flow defect {:e}, reversal defect {:e}",
                    summary.max_flow_defect, summary.max_reverse_defect
                ),
            )])
        }
        Operation::Riccati { horizon, points } => {
            let mut rows = Vec::with_capacity(*points);
            let mut estimates = Vec::with_capacity(*points);
            for _ in 0..*points {
                let p = model.random_point(&mut rng);
                let h = horocycle_curvatures(model, &p, *horizon, tol.curvature)?;
                rows.push((h.k_u, h.k_s));
                estimates.push(h);
            }
            out.series("riccati", &rows)?;
            out.json("report.json", &estimates)?;
            let negative = estimates.iter().filter(|h| h.k_u < 0.0 || h.k_s < 0.0).count();
            let unconverged = estimates.iter().filter(|h| !h.converged).count();
            Ok(vec![
                CheckResult::new("nonnegative", negative == 0, format!("{negative} points with k < 0")),
                CheckResult::new(
                    "converged",
                    unconverged == 0 || model.has_flat_loop(),
                    format!("{unconverged} of {points} points reached the horizon cap"),
                ),
            ])
        }
        Operation::Lyapunov { t, points } => {
            let mut rows = Vec::with_capacity(*points);
            for _ in 0..*points {
                let p = model.random_point(&mut rng);
                rows.push((lyapunov_forward(model, &p, *t)?, lyapunov_backward(model, &p, *t)?));
            }
            out.series("lyapunov", &rows)?;
            let negative = rows.iter().filter(|r| r.0 < -1e-12 || r.1 < -1e-12).count();
            Ok(vec![CheckResult::new(
                "nonnegative",
                negative == 0,
                format!("{negative} of {points} points with a negative exponent"),
            )])
        }
        Operation::Orbits { max_len, n_max } => {
            let m = model.as_markov()?;
            let cycles = enumerate_cycles(m, *max_len, DEFAULT_CYCLE_CAP)?;
            let rows: Vec<(f64, f64)> = cycles.iter().map(|o| (o.period, o.chi)).collect();
            out.series("orbits", &rows)?;
            let bounds: Vec<_> = cycles.iter().map(chi_bound_check).collect();
            let broken = bounds.iter().filter(|b| !b.holds).count();
            let mut checks = vec![CheckResult::new(
                "chi-bound",
                broken == 0,
                format!("{broken} of {} cycles exceed sqrt(-mean K)", cycles.len()),
            )];
            #[derive(Serialize)]
            struct Row<'a> {
                name: &'a str,
                period: f64,
                chi: f64,
                bound: f64,
                parabolic: bool,
            }
            let table: Vec<Row> = cycles
                .iter()
                .zip(&bounds)
                .map(|(o, b)| Row {
                    name: &o.name,
                    period: o.period,
                    chi: o.chi,
                    bound: b.bound,
                    parabolic: o.parabolic,
                })
                .collect();
            out.json("report.json", &table)?;
            if m.has_flat_loop() {
                let r = small_exponent_orbits(model, SMALL_EXPONENT, *n_max)?;
                let rows: Vec<(f64, f64)> = r
                    .orbits
                    .iter()
                    .enumerate()
                    .map(|(i, o)| ((i + 1) as f64, o.chi))
                    .collect();
                out.series("small_exponents", &rows)?;
                checks.push(CheckResult::new(
                    "strictly-decreasing",
                    r.strictly_decreasing,
                    format!("chi(F^n H) for n = 1..={n_max}"),
                ));
                checks.push(CheckResult::new(
                    "within-bounds",
                    r.within_bounds,
                    "chi(F^n H) <= 2 sqrt(1/(n+1))",
                ));
                if *n_max >= 64 {
                    let slope = loglog_slope(&r, 8, 64);
                    checks.push(CheckResult::new(
                        "loglog-slope",
                        (slope + 0.5).abs() <= 0.1,
                        format!("slope {slope:.6} over n in [8, 64], target -0.5 +/- 0.1"),
                    ));
                }
            }
            Ok(checks)
        }
        Operation::Pressure { estimator, grid } => {
            let m = model.as_markov()?;
            let curve = pressure_curve(m, &grid.values()?, estimator, tol.plateau)?;
            let rows: Vec<(f64, f64)> = curve
                .t_grid
                .iter()
                .cloned()
                .zip(curve.p_values.iter().cloned())
                .collect();
            out.series("pressure", &rows)?;
            out.json("report.json", &curve)?;
            Ok(vec![
                CheckResult::new(
                    "evaluated",
                    curve.failures.is_empty(),
                    format!("{} grid failures", curve.failures.len()),
                ),
                CheckResult::new(
                    "nonincreasing",
                    curve.monotone_ok,
                    "P(t) nonincreasing within estimator tolerance",
                ),
                CheckResult::new(
                    "convex",
                    curve.convex_ok,
                    "second differences nonnegative within tolerance",
                ),
                CheckResult::new(
                    "one-sided-slopes",
                    curve.derivative_ok,
                    format!("max D- minus D+ = {:e}", curve.max_derivative_violation),
                ),
            ])
        }
        Operation::Spectrum {
            estimator,
            grid,
            cycle_len,
        } => {
            let m = model.as_markov()?;
            let r = spectrum_report(m, &grid.values()?, estimator, tol.plateau, *cycle_len)?;
            let rows: Vec<(f64, f64)> = r.table.rows.iter().map(|row| (row.alpha, row.e_alpha)).collect();
            out.series("spectrum", &rows)?;
            let dims: Vec<(f64, f64)> = r
                .table
                .rows
                .iter()
                .filter_map(|row| row.dim_lower.map(|d| (row.alpha, d)))
                .collect();
            out.series("dimension", &dims)?;
            out.json("report.json", &r)?;
            Ok(vec![CheckResult::new(
                "involution",
                r.involution_error < 1e-3,
                format!("double transform error {:e}", r.involution_error),
            )])
        }
        Operation::Nested { potential, caps, grid } => {
            let m = model.as_markov()?;
            let r = nested_pressure_convergence(m, caps, &grid.values()?, potential)?;
            for (cap, values) in r.caps.iter().zip(&r.values) {
                let rows: Vec<(f64, f64)> = r.t_grid.iter().cloned().zip(values.iter().cloned()).collect();
                out.series(&format!("nested_cap{cap}"), &rows)?;
            }
            let rows: Vec<(f64, f64)> = r.t_grid.iter().cloned().zip(r.full.iter().cloned()).collect();
            out.series("nested_full", &rows)?;
            out.json("report.json", &r)?;
            Ok(vec![
                CheckResult::new(
                    "nondecreasing",
                    r.monotone,
                    "P_cap(t) nondecreasing in the cap at every t",
                ),
                CheckResult::new("reaches-full", r.reaches_full, "final cap equals the full pressure"),
            ])
        }
        Operation::Coding {
            seed_file,
            u_radius,
            alpha_rect,
            beta,
            samples,
        } => {
            let toral = model.as_toral()?;
            let spec = match seed_file {
                Some(path) => SeedSpec::load(Path::new(path))?,
                None => SeedSpec::two_orbit(),
            };
            let seed = Seed::new(toral, &spec)?;
            let section = build_cross_section(model, &seed, *alpha_rect)?;
            let constants = choose_constants(model, &seed, &section, *u_radius, *beta)?;
            let coded = build_envelope(
                &seed,
                &section,
                &constants,
                EnvelopeOptions {
                    samples: *samples,
                    rng_seed: config.seed,
                },
            )?;
            let rows: Vec<(f64, f64)> = coded
                .samples
                .iter()
                .map(|s| (s.outcome.point[0], s.outcome.point[1]))
                .collect();
            out.series("shadow_samples", &rows)?;
            #[derive(Serialize)]
            struct Envelope<'a> {
                constants: &'a crate::coding::CodingConstants,
                descriptor: &'a crate::coding::EnvelopeDescriptor,
                rectangles: usize,
                restricted: &'a [usize],
                report: &'a crate::coding::VerificationReport,
            }
            out.json(
                "envelope.json",
                &Envelope {
                    constants: &coded.constants,
                    descriptor: &coded.descriptor,
                    rectangles: section.rectangles.len(),
                    restricted: &coded.restricted,
                    report: &coded.report,
                },
            )?;
            out.json("samples.json", &coded.samples)?;
            Ok(coded
                .report
                .checks
                .iter()
                .map(|c| {
                    let detail = match &c.witness {
                        Some(w) => format!("{} (witness: {w})", c.detail),
                        None => c.detail.clone(),
                    };
                    CheckResult::new(&c.property, c.passed, detail)
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(model: &str, op: &str) -> ExperimentConfig {
        ExperimentConfig {
            model: model.into(),
            seed: 7,
            out: None,
            emit: Emit::Csv,
            tolerances: Tolerances::default(),
            operation: Operation::defaults(op, None).unwrap(),
        }
    }

    #[test]
    fn m0_pressure_is_minus_t() {
        let dir = tempfile::tempdir().unwrap();
        let c = config("M0", "pressure");
        let r = run(&c, dir.path()).unwrap();
        assert!(r.passed(), "{r:?}");
        let text = std::fs::read_to_string(dir.path().join("pressure.csv")).unwrap();
        for line in text.lines() {
            let (t, p) = line.split_once(',').unwrap();
            let (t, p): (f64, f64) = (t.parse().unwrap(), p.parse().unwrap());
            assert!((p + t).abs() < 1e-10, "{line}");
        }
        assert!(r.outputs.iter().any(|f| f.name == "pressure.csv"));
    }

    #[test]
    fn identical_configs_give_identical_files() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let c = config("M2", "riccati");
        let ra = run(&c, a.path()).unwrap();
        let rb = run(&c, b.path()).unwrap();
        assert_eq!(ra.outputs, rb.outputs);
        for name in ["riccati.csv", "record.json", "report.json"] {
            assert_eq!(
                std::fs::read(a.path().join(name)).unwrap(),
                std::fs::read(b.path().join(name)).unwrap(),
                "{name}"
            );
        }
    }

    #[test]
    fn unknown_models_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let err = run(&config("NOPE", "validate"), dir.path()).unwrap_err();
        assert_eq!(err.code(), "E_UNKNOWN_MODEL");
        assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
    }

    #[test]
    fn downstream_errors_are_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let r = run(&config("M0", "orbits"), dir.path()).unwrap();
        assert!(r.passed());
        let r = run(&config("CAT", "orbits"), dir.path()).unwrap();
        assert!(!r.passed());
        assert_eq!(r.error.as_ref().unwrap().code, "E_PRECONDITION");
        let text = std::fs::read_to_string(dir.path().join("record.json")).unwrap();
        assert!(text.contains("E_PRECONDITION") && !text.contains("wall_time"));
    }

    #[test]
    fn json_emission_replaces_csv() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config("M2", "nested");
        c.emit = Emit::Json;
        let r = run(&c, dir.path()).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(dir.path().join("nested_cap8.json").exists());
        assert!(!dir.path().join("nested_cap8.csv").exists());
    }
}
