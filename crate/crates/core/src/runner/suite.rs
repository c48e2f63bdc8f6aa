//! Acceptance batteries. Each criterion is a public function so the
//! integration tests and the `suite` subcommand run the same code.

use super::config::{ExperimentConfig, Operation};
use super::{generator, run_with_base, RunRecord};
use crate::coding::{
    build_cross_section, build_envelope, choose_constants, EnvelopeOptions, Seed, SeedSpec, DEFAULT_BETA,
};
use crate::error::{Error, Result};
use crate::jacobi::{
    contraction_check, propagate_jacobi, propagate_pairs, unstable_curvature, wronskian_drift, JacobiPair, DEFAULT_TOL,
};
use crate::models::{catalog, FlowModel, MarkovModel, Point};
use crate::orbits::{chi_bound_check, enumerate_cycles, loglog_slope, small_exponent_orbits, DEFAULT_CYCLE_CAP};
use crate::thermo::{
    involution_error, legendre, legendre_at, nested_pressure_convergence, pressure_curve, Estimator, LegendreValue,
    Potential, DEFAULT_PLATEAU_TOL,
};
use serde::Serialize;
use std::path::{Path, PathBuf};

pub const SUITES: [&str; 7] = [
    "validate-models",
    "riccati",
    "orbits",
    "pressure",
    "spectrum",
    "coding",
    "all",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Criterion {
    pub id: String,
    pub title: String,
    pub passed: bool,
    pub detail: String,
}

impl Criterion {
    fn new(id: &str, title: &str, passed: bool, detail: String) -> Self {
        Criterion {
            id: id.into(),
            title: title.into(),
            passed,
            detail,
        }
    }

    fn failed(id: &str, title: &str, e: &Error) -> Self {
        Criterion::new(id, title, false, format!("error[{}]: {e}", e.code()))
    }

    /// `PASS C1 title: detail` or `FAIL ...`.
    pub fn line(&self) -> String {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        format!("{tag} {} {}: {}", self.id, self.title, self.detail)
    }
}

fn evaluate(id: &str, title: &str, body: impl FnOnce() -> Result<(bool, String)>) -> Criterion {
    match body() {
        Ok((passed, detail)) => Criterion::new(id, title, passed, detail),
        Err(e) => Criterion::failed(id, title, &e),
    }
}

fn periodic(m: &FlowModel, word: &str, phase: f64) -> Result<Point> {
    let mm = m.as_markov()?;
    Ok(Point::Markov(mm.periodic_point(&mm.parse_word(word)?, phase)?))
}

fn markov(name: &str) -> Result<MarkovModel> {
    catalog::markov(name)
}

/// Every catalog model passes structural and sampled flow checks.
pub fn models_valid() -> Criterion {
    evaluate("models", "catalog models validate", || {
        let mut names = Vec::new();
        for name in catalog::NAMES {
            catalog::get(name)?.validate()?;
            names.push(name);
        }
        Ok((true, names.join(", ")))
    })
}

/// Closed-form Jacobi fields on `M0` and the Wronskian over `t = 100`.
pub fn criterion_1() -> Criterion {
    evaluate("C1", "Jacobi closed forms", || {
        let m = catalog::get("M0")?;
        let p = periodic(&m, "H", 0.0)?;
        let mut worst: f64 = 0.0;
        for t in [1.0f64, 5.0, 20.0] {
            let q = propagate_jacobi(&m, &p, JacobiPair::new(0.0, 1.0)?, t)?;
            let exact = t.sinh() * (-q.logscale).exp();
            worst = worst.max((q.j - exact).abs() / exact.abs());
        }
        let (_, [a, b]) = propagate_pairs(&m, &p, [JacobiPair::new(1.0, 0.0)?, JacobiPair::new(0.0, 1.0)?], 100.0)?;
        let drift = wronskian_drift(&a, &b, 1.0);
        Ok((
            worst < 1e-10 && drift < 1e-10,
            format!("max relative error {worst:.3e} (< 1e-10), Wronskian drift {drift:.3e} (< 1e-10)"),
        ))
    })
}

/// `k^u` on `M0`, `MFLAT` and on the periodic points of `MRANK1`.
pub fn criterion_2() -> Criterion {
    evaluate("C2", "unstable curvature", || {
        let m0 = catalog::get("M0")?;
        let e0 = unstable_curvature(&m0, &periodic(&m0, "H", 0.5)?, 20.0, DEFAULT_TOL)?;
        let err0 = (e0.value - 1.0).abs();
        let flat = catalog::get("MFLAT")?;
        let ef = unstable_curvature(&flat, &periodic(&flat, "F", 0.5)?, 20.0, DEFAULT_TOL)?;
        let rank1 = catalog::get("MRANK1")?;
        let mm = rank1.as_markov()?;
        let mut worst: f64 = 0.0;
        let mut count = 0;
        for o in enumerate_cycles(mm, 8, DEFAULT_CYCLE_CAP)?
            .iter()
            .filter(|o| !o.parabolic)
        {
            let slope = o
                .monodromy
                .expanding_slope(1e-12)
                .ok_or_else(|| Error::Precondition(format!("{} has no expanding direction", o.name)))?;
            let e = unstable_curvature(&rank1, &Point::Markov(o.base_point(mm)?), 20.0, DEFAULT_TOL)?;
            worst = worst.max((e.value - slope).abs());
            count += 1;
        }
        Ok((
            err0 < 1e-8 && ef.value == 0.0 && worst < 1e-8 && count > 0,
            format!(
                "M0 |k^u - 1| = {err0:.3e}, MFLAT k^u = {:e}, MRANK1 max slope gap {worst:.3e} over {count} cycles",
                ef.value
            ),
        ))
    })
}

/// `chi <= sqrt(-mean K)` on every cycle up to length 12, with equality on
/// constant-curvature cycles.
pub fn criterion_3() -> Criterion {
    evaluate("C3", "closed-orbit exponent bound", || {
        let mut parts = Vec::new();
        let mut ok = true;
        for name in ["M2", "MRANK1"] {
            let m = markov(name)?;
            let cycles = enumerate_cycles(&m, 12, DEFAULT_CYCLE_CAP)?;
            let mut broken = 0;
            let mut equality_gap: f64 = 0.0;
            let mut constant = 0;
            for o in &cycles {
                let b = chi_bound_check(o);
                if !b.holds {
                    broken += 1;
                }
                let k0 = m.curvatures[o.word[0]];
                if o.word.iter().all(|&s| m.curvatures[s] == k0) {
                    equality_gap = equality_gap.max(b.slack.abs());
                    constant += 1;
                }
            }
            ok &= broken == 0 && equality_gap < 1e-9;
            parts.push(format!(
                "{name}: {broken} of {} cycles violate, equality gap {equality_gap:.3e} on {constant} constant cycles",
                cycles.len()
            ));
        }
        Ok((ok, parts.join("; ")))
    })
}

/// `chi(F^n H)` on `MRANK1`: strictly decreasing, small at `n = 63`, and a
/// log-log slope of `-1/2 +/- 0.1` over `[8, 64]`.
pub fn criterion_4() -> Criterion {
    evaluate("C4", "small-exponent orbits", || {
        let r = small_exponent_orbits(&catalog::get("MRANK1")?, 0.2, 64)?;
        let chi63 = r.orbits[62].chi;
        let slope = loglog_slope(&r, 8, 64);
        Ok((
            r.strictly_decreasing && chi63 < 0.2 && (slope + 0.5).abs() <= 0.1,
            format!(
                "strictly decreasing: {}, chi(F^63 H) = {chi63:.6} (< 0.2), log-log slope {slope:.4} (target -0.5 +/- 0.1)",
                r.strictly_decreasing
            ),
        ))
    })
}

/// Orbit-sum pressure against the oracle on `M2` with proxy weights.
pub fn criterion_5() -> Criterion {
    evaluate("C5", "pressure oracle agreement", || {
        let m = markov("M2")?;
        let potential = Potential::proxy_for(&m);
        let grid: Vec<f64> = (0..=16).map(|i| -4.0 + 0.5 * i as f64).collect();
        let sum = Estimator::OrbitSum {
            potential: potential.clone(),
            period: 12.0,
            delta: 1.0,
        };
        let a = pressure_curve(&m, &grid, &sum, DEFAULT_PLATEAU_TOL)?;
        let b = pressure_curve(&m, &grid, &Estimator::Oracle { potential }, DEFAULT_PLATEAU_TOL)?;
        let worst = a
            .p_values
            .iter()
            .zip(&b.p_values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        Ok((
            worst < 0.05 && a.failures.is_empty(),
            format!("max |orbit-sum - oracle| = {worst:.4e} (< 0.05) on t in [-4, 4]"),
        ))
    })
}

/// Gates, plateau and kink on `MRANK1`; no plateau on `M2`.
pub fn criterion_6() -> Criterion {
    evaluate("C6", "pressure structure", || {
        let grid = crate::thermo::default_grid();
        let r1 = markov("MRANK1")?;
        let c = pressure_curve(
            &r1,
            &grid,
            &Estimator::Oracle {
                potential: Potential::Geometric {
                    n_max: crate::thermo::DEFAULT_EXCURSION_CAP,
                },
            },
            DEFAULT_PLATEAU_TOL,
        )?;
        let Some(o) = c.onset.clone() else {
            return Ok((false, "MRANK1 curve has no plateau".into()));
        };
        let plateau = c
            .t_grid
            .iter()
            .zip(&c.p_values)
            .filter(|(t, _)| **t >= o.t_c)
            .map(|(_, p)| p.abs())
            .fold(0.0, f64::max);
        let m2 = markov("M2")?;
        let c2 = pressure_curve(
            &m2,
            &grid,
            &Estimator::Oracle {
                potential: Potential::proxy_for(&m2),
            },
            DEFAULT_PLATEAU_TOL,
        )?;
        let ok = c.monotone_ok
            && c.convex_ok
            && plateau < DEFAULT_PLATEAU_TOL
            && o.d_minus <= -0.1
            && o.d_plus.abs() < 1e-9
            && o.kink
            && c2.onset.is_none();
        Ok((
            ok,
            format!(
                "MRANK1 nonincreasing {}, convex {}, t_c = {:.4}, max |P| past t_c {plateau:.3e}, D- = {:.4}, D+ = {:.1e}, kink {}; M2 plateau {}",
                c.monotone_ok,
                c.convex_ok,
                o.t_c,
                o.d_minus,
                o.d_plus,
                o.kink,
                c2.onset.is_some()
            ),
        ))
    })
}

/// `E(-1.5) = log 2`, the lower dimension bound, and the double transform on `M2`.
pub fn criterion_7() -> Criterion {
    evaluate("C7", "Legendre spectrum closed form", || {
        let m = markov("M2")?;
        let c = pressure_curve(
            &m,
            &crate::thermo::default_grid(),
            &Estimator::Oracle {
                potential: Potential::proxy_for(&m),
            },
            DEFAULT_PLATEAU_TOL,
        )?;
        let LegendreValue::Attained { e, .. } = legendre_at(&c, -1.5)? else {
            return Ok((false, "no supporting line of slope -1.5".into()));
        };
        let ln2 = std::f64::consts::LN_2;
        let e_err = (e - ln2).abs();
        let dim_err = ((1.0 + 2.0 * e / 1.5) - (1.0 + 2.0 * ln2 / 1.5)).abs();
        let (inv, n) = involution_error(&c, &legendre(&c)?);
        Ok((
            e_err < 1e-3 && dim_err < 2e-3 && inv < 1e-3 && n > 0,
            format!("|E(-1.5) - log 2| = {e_err:.3e}, dimension error {dim_err:.3e}, double transform error {inv:.3e} over {n} slopes"),
        ))
    })
}

/// Cycle-capped subgraph pressures increase to the full value.
pub fn criterion_8() -> Criterion {
    evaluate("C8", "nested convergence", || {
        let grid = crate::thermo::default_grid();
        let caps = [1, 2, 3, 4];
        let m2 = markov("M2")?;
        let a = nested_pressure_convergence(&m2, &caps, &grid, &Potential::proxy_for(&m2))?;
        let r1 = markov("MRANK1")?;
        let b = nested_pressure_convergence(
            &r1,
            &caps,
            &grid,
            &Potential::Geometric {
                n_max: crate::thermo::DEFAULT_EXCURSION_CAP,
            },
        )?;
        Ok((
            a.monotone && a.reaches_full && b.monotone && b.reaches_full,
            format!(
                "M2 nondecreasing {} reaches full {}; MRANK1 nondecreasing {} reaches full {}",
                a.monotone, a.reaches_full, b.monotone, b.reaches_full
            ),
        ))
    })
}

/// Coding construction on `CAT` with the two-orbit seed.
pub fn criterion_9() -> Criterion {
    evaluate("C9", "coding construction", || {
        let model = catalog::get("CAT")?;
        let seed = Seed::new(model.as_toral()?, &SeedSpec::two_orbit())?;
        let section = build_cross_section(&model, &seed, 0.2)?;
        let k = choose_constants(&model, &seed, &section, 0.25, DEFAULT_BETA)?;
        let coded = build_envelope(
            &seed,
            &section,
            &k,
            EnvelopeOptions {
                samples: 200,
                rng_seed: 7,
            },
        )?;
        let failed: Vec<&str> = coded
            .report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.property.as_str())
            .collect();
        let ok = k.contraction_ok()
            && k.epsilon_ok()
            && k.containment_ok()
            && failed.is_empty()
            && coded.samples.len() == 200;
        Ok((
            ok,
            format!(
                "eps = {:.4e}, N0 = {}, {} letters, {} samples, {} checks, failing: [{}]",
                k.epsilon,
                k.n0,
                coded.descriptor.alphabet_size,
                coded.samples.len(),
                coded.report.checks.len(),
                failed.join(", ")
            ),
        ))
    })
}

/// Stable Jacobi contraction along 100 sampled `M2` orbits of duration 50.
pub fn criterion_10() -> Criterion {
    evaluate("C10", "hyperbolicity certificate", || {
        let m = catalog::get("M2")?;
        let mut rng = generator(7);
        let (mut violations, mut margin) = (0, f64::INFINITY);
        for _ in 0..100 {
            let p = m.random_point(&mut rng);
            let r = contraction_check(&m, &p, 1.0, 2.0, 50.0)?;
            violations += r.violations;
            margin = margin.min(r.margin);
        }
        Ok((
            violations == 0,
            format!("{violations} violations over 100 orbits (T = 1, eta = 2), smallest log margin {margin:.4}"),
        ))
    })
}

fn criteria_for(suite: &str) -> Vec<fn() -> Criterion> {
    match suite {
        "validate-models" => vec![models_valid],
        "riccati" => vec![criterion_1, criterion_2, criterion_10],
        "orbits" => vec![criterion_3, criterion_4],
        "pressure" => vec![criterion_5, criterion_6, criterion_8],
        "spectrum" => vec![criterion_7],
        "coding" => vec![criterion_9],
        _ => vec![
            models_valid,
            criterion_1,
            criterion_2,
            criterion_3,
            criterion_4,
            criterion_5,
            criterion_6,
            criterion_7,
            criterion_8,
            criterion_9,
            criterion_10,
        ],
    }
}

fn suite_runs(suite: &str, op: &Operation) -> bool {
    let name = op.name();
    match suite {
        "all" => true,
        "validate-models" => name == "validate",
        "riccati" => name == "riccati" || name == "lyapunov",
        "pressure" => name == "pressure" || name == "nested",
        other => name == other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigRun {
    pub config: String,
    pub passed: bool,
    pub record: RunRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub artifact_version: String,
    pub passed: bool,
    pub criteria: Vec<Criterion>,
    pub runs: Vec<ConfigRun>,
    pub failures: Vec<String>,
}

/// Configs in `dir` (every `*.toml`, sorted by name) with their models
/// resolved. Any bad config or model is an error before anything runs.
pub fn load_config_tree(dir: &Path) -> Result<Vec<(String, ExperimentConfig)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    let mut configs = Vec::with_capacity(paths.len());
    for path in paths {
        let config = ExperimentConfig::load(&path)?;
        super::resolve_model(&config.model, Some(dir))
            .map_err(|e| Error::Config(format!("{}: [{}] {e}", path.display(), e.code())))?;
        let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
        configs.push((stem, config));
    }
    Ok(configs)
}

/// Runs the named battery, then the matching configs of `config_dir` into
/// `out/runs/<stem>`, and writes `out/summary.json`.
pub fn run_suite(name: &str, config_dir: Option<&Path>, out: &Path) -> Result<SuiteReport> {
    if !SUITES.contains(&name) {
        return Err(Error::Config(format!(
            "unknown suite `{name}`; expected one of {}",
            SUITES.join(", ")
        )));
    }
    let configs = match config_dir {
        Some(dir) => load_config_tree(dir)?,
        None => Vec::new(),
    };
    let criteria: Vec<Criterion> = criteria_for(name).into_iter().map(|f| f()).collect();
    let mut runs = Vec::new();
    for (stem, config) in configs.iter().filter(|(_, c)| suite_runs(name, &c.operation)) {
        let record = run_with_base(config, config_dir, &out.join("runs").join(stem))?;
        runs.push(ConfigRun {
            config: stem.clone(),
            passed: record.passed(),
            record,
        });
    }
    let mut failures: Vec<String> = criteria.iter().filter(|c| !c.passed).map(|c| c.id.clone()).collect();
    failures.extend(runs.iter().filter(|r| !r.passed).map(|r| format!("run:{}", r.config)));
    let report = SuiteReport {
        suite: name.to_string(),
        artifact_version: super::ARTIFACT_VERSION.to_string(),
        passed: failures.is_empty(),
        criteria,
        runs,
        failures,
    };
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    std::fs::create_dir_all(out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    std::fs::write(out.join("summary.json"), text).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    Ok(report)
}
