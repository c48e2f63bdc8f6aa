//! Transition graph on `R_{2 N0}`, sampled codes and the verified envelope.

use super::constants::CodingConstants;
use super::section::{refine, Alphabet, CrossSection};
use super::seed::{Seed, SeedPoint};
use super::shadow::{shadow_sequence, AdmissibleSequence, ShadowOutcome};
use crate::error::{Error, Result};
use crate::linalg::spectral_radius;
use petgraph::algo::kosaraju_scc;
use petgraph::graph::DiGraph;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Agreement required between `psi` images that should coincide exactly.
pub const IDENTITY_TOL: f64 = 1e-9;
/// Positions around 0 compared when re-coding `psi(a)`.
const RECODE_WINDOW: i64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    /// Seed point `u` with `u` in `from` and `F(u)` in `to`.
    pub witness: SeedPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionGraph {
    pub letters: usize,
    pub edges: Vec<Edge>,
    /// Strongly connected components, largest first.
    pub components: Vec<Vec<usize>>,
}

impl TransitionGraph {
    pub fn build(alphabet: &Alphabet, section: &CrossSection, seed: &Seed) -> Self {
        let mut edges: Vec<Edge> = Vec::new();
        for l in &alphabet.letters {
            for &u in &l.members {
                if let Some(to) = alphabet.letter_of(section, seed, seed.shift(u, 1)) {
                    if !edges.iter().any(|e| e.from == l.id && e.to == to) {
                        edges.push(Edge {
                            from: l.id,
                            to,
                            witness: u,
                        });
                    }
                }
            }
        }
        let mut g = DiGraph::<usize, ()>::new();
        let nodes: Vec<_> = (0..alphabet.len()).map(|i| g.add_node(i)).collect();
        for e in &edges {
            g.add_edge(nodes[e.from], nodes[e.to], ());
        }
        let mut components: Vec<Vec<usize>> = kosaraju_scc(&g)
            .into_iter()
            .map(|c| {
                let mut ids: Vec<usize> = c.into_iter().map(|n| g[n]).collect();
                ids.sort_unstable();
                ids
            })
            .collect();
        components.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        TransitionGraph {
            letters: alphabet.len(),
            edges,
            components,
        }
    }

    /// Edges inside the given letter set.
    pub fn restricted(&self, keep: &[usize]) -> Vec<&Edge> {
        self.edges
            .iter()
            .filter(|e| keep.binary_search(&e.from).is_ok() && keep.binary_search(&e.to).is_ok())
            .collect()
    }

    /// `log` of the spectral radius of the adjacency matrix on `keep`.
    pub fn entropy(&self, keep: &[usize]) -> f64 {
        let mut rows = vec![vec![0.0; keep.len()]; keep.len()];
        for e in self.restricted(keep) {
            let (i, j) = (
                keep.binary_search(&e.from).expect("restricted"),
                keep.binary_search(&e.to).expect("restricted"),
            );
            rows[i][j] = 1.0;
        }
        spectral_radius(&rows).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeOptions {
    pub samples: usize,
    pub rng_seed: u64,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        EnvelopeOptions {
            samples: 100,
            rng_seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShadowSample {
    pub index: usize,
    /// Letters on `-2..=2`.
    pub letters: Vec<usize>,
    pub outcome: ShadowOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub property: String,
    pub passed: bool,
    pub detail: String,
    /// First failing witness, when there is one.
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, property: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.property == property)
    }

    /// The first failure as an error naming the property and its witness.
    pub fn ensure(&self) -> Result<()> {
        match self.checks.iter().find(|c| !c.passed) {
            None => Ok(()),
            Some(c) => Err(Error::Coding(format!(
                "verification of `{}` failed: {} (witness: {})",
                c.property,
                c.detail,
                c.witness.as_deref().unwrap_or("none")
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeDescriptor {
    pub alphabet_size: usize,
    pub restricted_size: usize,
    pub edges: usize,
    pub components: usize,
    /// Topological entropy of the restricted transition graph.
    pub entropy: f64,
    pub sampled_codes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodedSet {
    pub constants: CodingConstants,
    pub alphabet: Alphabet,
    pub graph: TransitionGraph,
    /// Letters of the component kept after SCC restriction.
    pub restricted: Vec<usize>,
    pub samples: Vec<ShadowSample>,
    pub descriptor: EnvelopeDescriptor,
    pub report: VerificationReport,
}

struct Walker<'a> {
    out: Vec<Vec<&'a Edge>>,
    into: Vec<Vec<&'a Edge>>,
    restricted: &'a [usize],
    alphabet: &'a Alphabet,
}

impl<'a> Walker<'a> {
    fn new(graph: &'a TransitionGraph, restricted: &'a [usize], alphabet: &'a Alphabet) -> Self {
        let mut out = vec![Vec::new(); graph.letters];
        let mut into = vec![Vec::new(); graph.letters];
        for e in graph.restricted(restricted) {
            out[e.from].push(e);
            into[e.to].push(e);
        }
        Walker {
            out,
            into,
            restricted,
            alphabet,
        }
    }

    /// Random code on `-half..=half` inside the restricted component,
    /// optionally centred at a given letter.
    fn code<R: Rng>(&self, rng: &mut R, half: usize, center: Option<usize>) -> AdmissibleSequence {
        let c = center.unwrap_or_else(|| *self.restricted.choose(rng).expect("component is nonempty"));
        let (mut fl, mut fw) = (vec![c], Vec::new());
        for _ in 0..half {
            let e = self.out[*fl.last().unwrap()].choose(rng).expect("strongly connected");
            fw.push(e.witness);
            fl.push(e.to);
        }
        fw.push(self.alphabet.letters[*fl.last().unwrap()].members[0]);
        let (mut bl, mut bw) = (Vec::new(), Vec::new());
        let mut cur = c;
        for _ in 0..half {
            let e = self.into[cur].choose(rng).expect("strongly connected");
            bl.push(e.from);
            bw.push(e.witness);
            cur = e.from;
        }
        bl.reverse();
        bw.reverse();
        bl.extend(fl);
        bw.extend(fw);
        AdmissibleSequence {
            origin: half,
            letters: bl,
            witnesses: bw,
        }
    }
}

/// Half-length of sampled codes: enough `G` steps to converge past `1e-12`
/// plus the certificate window.
pub fn code_half_length(constants: &CodingConstants) -> usize {
    48 + 4 * constants.n0
}

/// Builds `R_{2 N0}`, its transition graph, samples codes and verifies the
/// envelope properties on them.
pub fn build_envelope(
    seed: &Seed,
    section: &CrossSection,
    constants: &CodingConstants,
    options: EnvelopeOptions,
) -> Result<CodedSet> {
    let m = &seed.model;
    let alphabet = refine(section, seed, 2 * constants.n0);
    if alphabet.is_empty() {
        return Err(Error::Coding("refined alphabet is empty".into()));
    }
    let graph = TransitionGraph::build(&alphabet, section, seed);
    let restricted = graph.components[0].clone();
    let mut checks = Vec::new();

    let periodic: Vec<SeedPoint> = seed
        .sample()
        .into_iter()
        .filter(|p| matches!(p, SeedPoint::Periodic { .. }))
        .collect();
    let missing = periodic.iter().find(|&&p| {
        alphabet
            .letter_of(section, seed, p)
            .is_none_or(|l| restricted.binary_search(&l).is_err())
    });
    let sub: DiGraph<(), ()> = DiGraph::from_edges(graph.restricted(&restricted).iter().map(|e| {
        (
            restricted.binary_search(&e.from).unwrap() as u32,
            restricted.binary_search(&e.to).unwrap() as u32,
        )
    }));
    let sub_components = kosaraju_scc(&sub).len();
    checks.push(Check {
        property: "strongly-connected".into(),
        passed: missing.is_none() && sub_components == 1 && sub.node_count() == restricted.len(),
        detail: format!(
            "{} of {} letters kept, {} component(s) after restriction",
            restricted.len(),
            alphabet.len(),
            sub_components
        ),
        witness: missing.map(|&p| seed.label(p)),
    });

    let half = code_half_length(constants);
    let walker = Walker::new(&graph, &restricted, &alphabet);
    let mut rng = ChaCha8Rng::seed_from_u64(options.rng_seed);
    let mut samples = Vec::new();
    let mut codes = Vec::new();
    let mut shadow_failure = None;
    for index in 0..options.samples {
        let code = walker.code(&mut rng, half, None);
        code.verify(&alphabet, seed)?;
        match shadow_sequence(&code, seed, constants) {
            Ok(outcome) => {
                samples.push(ShadowSample {
                    index,
                    letters: (-2..=2).map(|i| code.letter(i)).collect(),
                    outcome,
                });
                codes.push(code);
            }
            Err(e) => {
                shadow_failure.get_or_insert(format!("sample {index}: {e}"));
            }
        }
    }
    checks.push(Check {
        property: "halving".into(),
        passed: shadow_failure.is_none(),
        detail: format!("{} of {} sampled codes converged", samples.len(), options.samples),
        witness: shadow_failure,
    });
    let uncertified = samples.iter().find(|s| !s.outcome.certified);
    let worst = samples.iter().map(|s| s.outcome.certificate_ratio).fold(0.0, f64::max);
    checks.push(Check {
        property: "certificate".into(),
        passed: uncertified.is_none(),
        detail: format!(
            "{} of {} certified, worst d / bound = {worst:.3e}",
            samples.iter().filter(|s| s.outcome.certified).count(),
            samples.len()
        ),
        witness: uncertified.map(|s| format!("sample {}", s.index)),
    });

    // Re-coding: the orbit of psi(a) must reproduce the code around 0.
    let mut recode_failure = None;
    for (s, code) in samples.iter().zip(&codes) {
        for i in -RECODE_WINDOW..=RECODE_WINDOW {
            let got = alphabet.letter_of_point(m, section, m.iterate(s.outcome.point, i));
            if got != Some(code.letter(i)) {
                recode_failure.get_or_insert(format!(
                    "sample {} at position {i}: expected {}, got {:?}",
                    s.index,
                    code.letter(i),
                    got
                ));
            }
        }
    }
    checks.push(Check {
        property: "recoding".into(),
        passed: recode_failure.is_none(),
        detail: format!(
            "positions -{RECODE_WINDOW}..={RECODE_WINDOW} re-coded for {} samples",
            samples.len()
        ),
        witness: recode_failure,
    });

    // Seed orbits are fixed by psi.
    let mut worst_seed: f64 = 0.0;
    let mut seed_failure = None;
    for p in seed.sample() {
        let code = AdmissibleSequence::of_seed(&alphabet, section, seed, p, half as i64)?;
        let out = shadow_sequence(&code, seed, constants)?;
        let d = m.torus_distance(out.point, seed.position(p));
        worst_seed = worst_seed.max(d);
        if !(d < IDENTITY_TOL) {
            seed_failure.get_or_insert(format!("{} moved by {d:.3e}", seed.label(p)));
        }
    }
    checks.push(Check {
        property: "seed-fixed".into(),
        passed: seed_failure.is_none(),
        detail: format!("worst |psi(a(u)) - u| = {worst_seed:.3e}"),
        witness: seed_failure,
    });

    // Product structure: [psi(a), psi(b)] = psi([a, b]) for equal centres.
    let mut worst_bracket: f64 = 0.0;
    let mut bracket_failure = None;
    for (s, a) in samples.iter().zip(&codes).take(options.samples.min(50)) {
        let b = walker.code(&mut rng, half, Some(a.letter(0)));
        let (pb, spliced) = (
            shadow_sequence(&b, seed, constants)?,
            shadow_sequence(&a.splice(&b)?, seed, constants)?,
        );
        let d = m.torus_distance(m.bracket(s.outcome.point, pb.point), spliced.point);
        worst_bracket = worst_bracket.max(d);
        if !(d < IDENTITY_TOL) {
            bracket_failure.get_or_insert(format!("sample {}: {d:.3e}", s.index));
        }
    }
    checks.push(Check {
        property: "bracket-closure".into(),
        passed: bracket_failure.is_none(),
        detail: format!("worst |[psi(a), psi(b)] - psi([a, b])| = {worst_bracket:.3e}"),
        witness: bracket_failure,
    });

    // Containment in U: samples directly, all codes through the certificate.
    let seed_points: Vec<[f64; 2]> = seed.sample().into_iter().map(|p| seed.position(p)).collect();
    let outside = samples.iter().find(|s| {
        seed_points
            .iter()
            .map(|&x| m.torus_distance(x, s.outcome.point))
            .fold(f64::INFINITY, f64::min)
            >= constants.u_radius
    });
    let bound = constants.shadow_bound();
    checks.push(Check {
        property: "containment".into(),
        passed: outside.is_none() && bound < constants.u_radius,
        detail: format!("shadow radius {bound:.3e} against U radius {:.3e}", constants.u_radius),
        witness: outside
            .map(|s| format!("sample {}", s.index))
            .or_else(|| (bound >= constants.u_radius).then(|| "shadow radius".to_string())),
    });
    checks.push(Check {
        property: "constants".into(),
        passed: constants.invariants_ok(),
        detail: format!(
            "C e^(-gamma N1) = {:.3e}, epsilon = {:.3e}, Delta = {:.3e}",
            constants.c * (-constants.gamma * constants.n1 as f64).exp(),
            constants.epsilon,
            constants.margin
        ),
        witness: None,
    });

    let descriptor = EnvelopeDescriptor {
        alphabet_size: alphabet.len(),
        restricted_size: restricted.len(),
        edges: graph.edges.len(),
        components: graph.components.len(),
        entropy: graph.entropy(&restricted),
        sampled_codes: samples.len(),
    };
    Ok(CodedSet {
        constants: constants.clone(),
        alphabet,
        graph,
        restricted,
        samples,
        descriptor,
        report: VerificationReport { checks },
    })
}
