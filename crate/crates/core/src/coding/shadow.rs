//! The shadowing map `psi`: forward and backward bracket recursions along a
//! code, shared by the geometric cat-map backend and a symbolic backend.

use super::constants::CodingConstants;
use super::section::{Alphabet, CrossSection};
use super::seed::{Seed, SeedPoint};
use crate::error::{Error, Result};
use crate::models::{MarkovModel, ToralModel};
use serde::Serialize;

pub const MOVE_TOL: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 60;
/// Half-width of the window on which the certificate is checked.
pub const CERTIFICATE_WINDOW: i64 = 24;

/// Section dynamics with a local product structure.
pub trait SectionDynamics {
    type Point: Clone;
    /// `F^n(p)` for either sign of `n`.
    fn step(&self, p: &Self::Point, n: i64) -> Self::Point;
    /// `[x, y]`: the past of `x` spliced to the future of `y`.
    fn bracket(&self, x: &Self::Point, y: &Self::Point) -> Self::Point;
    fn distance(&self, x: &Self::Point, y: &Self::Point) -> f64;
}

impl SectionDynamics for ToralModel {
    type Point = [f64; 2];

    fn step(&self, p: &[f64; 2], n: i64) -> [f64; 2] {
        self.iterate(*p, n)
    }

    fn bracket(&self, x: &[f64; 2], y: &[f64; 2]) -> [f64; 2] {
        ToralModel::bracket(self, *x, *y)
    }

    fn distance(&self, x: &[f64; 2], y: &[f64; 2]) -> f64 {
        self.torus_distance(*x, *y)
    }
}

/// Finite window of a two-sided sequence: `symbols[k - start]` is the symbol
/// at index `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolWindow {
    pub start: i64,
    pub symbols: Vec<usize>,
}

impl SymbolWindow {
    pub fn end(&self) -> i64 {
        self.start + self.symbols.len() as i64
    }

    pub fn at(&self, k: i64) -> Option<usize> {
        (k >= self.start && k < self.end()).then(|| self.symbols[(k - self.start) as usize])
    }

    /// Periodic repetition of `word` on `-radius..radius`, with `word[0]` at 0.
    pub fn periodic(word: &[usize], radius: i64) -> Self {
        let p = word.len() as i64;
        SymbolWindow {
            start: -radius,
            symbols: (-radius..radius).map(|k| word[k.rem_euclid(p) as usize]).collect(),
        }
    }
}

/// Symbolic section dynamics of a Markov model: the shift with the splice
/// bracket and the metric `2^{-m}`, `m` the first disagreement index.
#[derive(Debug, Clone, Copy)]
pub struct SymbolicDynamics<'a> {
    pub model: &'a MarkovModel,
}

impl SectionDynamics for SymbolicDynamics<'_> {
    type Point = SymbolWindow;

    fn step(&self, p: &SymbolWindow, n: i64) -> SymbolWindow {
        SymbolWindow {
            start: p.start - n,
            symbols: p.symbols.clone(),
        }
    }

    fn bracket(&self, x: &SymbolWindow, y: &SymbolWindow) -> SymbolWindow {
        let (lo, hi) = (x.start.min(0), y.end().max(0));
        SymbolWindow {
            start: lo,
            symbols: (lo..hi)
                .map(|k| if k < 0 { x.at(k) } else { y.at(k) }.unwrap_or(usize::MAX))
                .collect(),
        }
    }

    fn distance(&self, x: &SymbolWindow, y: &SymbolWindow) -> f64 {
        let (lo, hi) = (x.start.max(y.start), x.end().min(y.end()));
        (lo..hi)
            .filter(|&k| x.at(k) != y.at(k))
            .map(|k| k.abs())
            .min()
            .map_or(0.0, |m| 0.5f64.powi(m as i32))
    }
}

impl SymbolicDynamics<'_> {
    /// Whether every transition inside the window is allowed.
    pub fn admissible(&self, p: &SymbolWindow) -> bool {
        p.symbols
            .windows(2)
            .all(|w| w[0] < self.model.len() && w[1] < self.model.len() && self.model.allowed(w[0], w[1]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShadowRun<P> {
    pub point: P,
    pub forward_iterations: usize,
    pub backward_iterations: usize,
    /// Last move of the forward and backward limits.
    pub final_move: f64,
    /// Number of `epsilon / 2^j` checks performed.
    pub halving_checks: usize,
}

/// Runs `w_n = [G(w_{n-1}), u_n]` over `future` and the mirrored recursion
/// over `past`, with `G = F^g`, and returns `[v, w]`. `future[n]` is the
/// witness at position `n g` and `past[n]` the one at `-n g`.
///
/// Each new `w_n` is pulled back one `G` at a time with a bracket against the
/// previous row, `G^{-j}(w_n) = [G^{-j+1}(w_{n-1}), G^{-1}(G^{-j+1}(w_n))]`,
/// which keeps every entry on the leaves of the previous limit.
///
/// The move criterion only stops a side after `min_steps` witnesses were
/// consumed: repeated witnesses give zero moves while later ones still shape
/// the orbit inside the window of interest.
pub fn shadow<D: SectionDynamics>(
    dynamics: &D,
    future: &[D::Point],
    past: &[D::Point],
    g: i64,
    epsilon: f64,
    min_steps: usize,
) -> Result<ShadowRun<D::Point>> {
    if future.is_empty() || past.is_empty() {
        return Err(Error::Precondition("shadowing needs a witness at position 0".into()));
    }
    let mut checks = 0;
    let fwd = limit(dynamics, future, g, epsilon, min_steps, Side::Future, &mut checks)?;
    let bwd = limit(dynamics, past, -g, epsilon, min_steps, Side::Past, &mut checks)?;
    Ok(ShadowRun {
        point: dynamics.bracket(&bwd.0, &fwd.0),
        forward_iterations: fwd.1,
        backward_iterations: bwd.1,
        final_move: fwd.2.max(bwd.2),
        halving_checks: checks,
    })
}

#[derive(Clone, Copy)]
enum Side {
    Future,
    Past,
}

fn limit<D: SectionDynamics>(
    dynamics: &D,
    witnesses: &[D::Point],
    g: i64,
    epsilon: f64,
    min_steps: usize,
    side: Side,
    checks: &mut usize,
) -> Result<(D::Point, usize, f64)> {
    // On the future side new points take their past from the pushed limit;
    // on the past side the roles of the bracket arguments swap.
    let join = |old: &D::Point, new: &D::Point| match side {
        Side::Future => dynamics.bracket(old, new),
        Side::Past => dynamics.bracket(new, old),
    };
    let mut prev = vec![witnesses[0].clone()];
    let mut last_move = f64::INFINITY;
    let mut iterations = 0;
    for (n, u) in witnesses.iter().enumerate().skip(1).take(MAX_ITERATIONS) {
        let mut cur = Vec::with_capacity(n + 1);
        cur.push(join(&dynamics.step(&prev[0], g), u));
        for j in 1..=n {
            let pulled = dynamics.step(&cur[j - 1], -g);
            let next = match side {
                Side::Future => dynamics.bracket(&prev[j - 1], &pulled),
                Side::Past => dynamics.bracket(&pulled, &prev[j - 1]),
            };
            let d = dynamics.distance(&prev[j - 1], &next);
            *checks += 1;
            let bound = epsilon / 2f64.powi(j as i32);
            if !(d < bound) {
                return Err(Error::Coding(format!(
                    "bracket recursion failed to halve at n = {n}, j = {j}: {d:e} >= {bound:e}; N0 is too small"
                )));
            }
            cur.push(next);
        }
        last_move = dynamics.distance(&prev[n - 1], &cur[n]);
        iterations = n;
        prev = cur;
        if n >= min_steps && last_move < MOVE_TOL {
            break;
        }
    }
    if witnesses.len() == 1 {
        last_move = 0.0;
    }
    Ok((prev.pop().expect("row is nonempty"), iterations, last_move))
}

/// Code over `R_{2 N0}` with witnesses; position `i` is stored at
/// `origin + i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibleSequence {
    pub origin: usize,
    pub letters: Vec<usize>,
    pub witnesses: Vec<SeedPoint>,
}

impl AdmissibleSequence {
    pub fn first(&self) -> i64 {
        -(self.origin as i64)
    }

    pub fn last(&self) -> i64 {
        self.letters.len() as i64 - self.origin as i64 - 1
    }

    pub fn letter(&self, i: i64) -> usize {
        self.letters[(i + self.origin as i64) as usize]
    }

    pub fn witness(&self, i: i64) -> SeedPoint {
        self.witnesses[(i + self.origin as i64) as usize]
    }

    /// Checks `u_i` in `a_i` and `F(u_i)` in `a_{i+1}` at every position.
    pub fn verify(&self, alphabet: &Alphabet, seed: &Seed) -> Result<()> {
        let m = &seed.model;
        if self.letters.len() != self.witnesses.len() || self.origin >= self.letters.len() {
            return Err(Error::Precondition("code and witness windows differ".into()));
        }
        for (idx, (&a, &u)) in self.letters.iter().zip(&self.witnesses).enumerate() {
            let letter = alphabet
                .letters
                .get(a)
                .ok_or_else(|| Error::Precondition(format!("letter {a} is not in the alphabet")))?;
            if !letter.contains(m, seed.position(u)) {
                return Err(Error::Precondition(format!(
                    "witness {} is not in letter {a} at position {}",
                    seed.label(u),
                    idx as i64 - self.origin as i64
                )));
            }
            if let Some(&b) = self.letters.get(idx + 1) {
                if !alphabet.letters[b].contains(m, seed.position(seed.shift(u, 1))) {
                    return Err(Error::Precondition(format!(
                        "image of witness {} is not in letter {b} at position {}",
                        seed.label(u),
                        idx as i64 + 1 - self.origin as i64
                    )));
                }
            }
        }
        Ok(())
    }

    /// Code of a seed orbit on `-half..=half`.
    pub fn of_seed(alphabet: &Alphabet, section: &CrossSection, seed: &Seed, p: SeedPoint, half: i64) -> Result<Self> {
        let mut letters = Vec::new();
        let mut witnesses = Vec::new();
        for i in -half..=half {
            let q = seed.shift(p, i);
            let a = alphabet.letter_of(section, seed, q).ok_or_else(|| {
                Error::Coding(format!(
                    "seed point {} has no letter in R_{}",
                    seed.label(q),
                    alphabet.n
                ))
            })?;
            letters.push(a);
            witnesses.push(q);
        }
        Ok(AdmissibleSequence {
            origin: half as usize,
            letters,
            witnesses,
        })
    }

    /// Past of `self` spliced to the future of `other`; requires equal
    /// letters at position 0.
    pub fn splice(&self, other: &AdmissibleSequence) -> Result<Self> {
        if self.letter(0) != other.letter(0) {
            return Err(Error::Precondition("splice needs equal letters at position 0".into()));
        }
        let mut letters = self.letters[..self.origin].to_vec();
        let mut witnesses = self.witnesses[..self.origin].to_vec();
        letters.extend_from_slice(&other.letters[other.origin..]);
        witnesses.extend_from_slice(&other.witnesses[other.origin..]);
        Ok(AdmissibleSequence {
            origin: self.origin,
            letters,
            witnesses,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShadowOutcome {
    pub point: [f64; 2],
    pub iterations: usize,
    pub final_move: f64,
    pub halving_checks: usize,
    /// `max_i d(F^i psi, u_i) / (epsilon (1 + 2 beta^2 kappa^2))` over the window.
    pub certificate_ratio: f64,
    /// Position attaining the certificate ratio.
    pub worst_position: i64,
    pub certified: bool,
}

/// `psi(a)` for a code over `R_{2 N0}`, with the shadowing certificate.
pub fn shadow_sequence(code: &AdmissibleSequence, seed: &Seed, constants: &CodingConstants) -> Result<ShadowOutcome> {
    let m = &seed.model;
    let g = constants.n0 as i64;
    let future: Vec<[f64; 2]> = (0..)
        .map(|n| n * g)
        .take_while(|&i| i <= code.last())
        .map(|i| seed.position(code.witness(i)))
        .collect();
    let past: Vec<[f64; 2]> = (0..)
        .map(|n| -n * g)
        .take_while(|&i| i >= code.first())
        .map(|i| seed.position(code.witness(i)))
        .collect();
    let min_steps = (CERTIFICATE_WINDOW / g + 1) as usize;
    let run = shadow(m, &future, &past, g, constants.epsilon, min_steps)?;
    let bound = constants.shadow_bound();
    let (mut worst, mut worst_position) = (0.0, 0);
    let lo = code.first().max(-CERTIFICATE_WINDOW);
    let hi = code.last().min(CERTIFICATE_WINDOW);
    for i in lo..=hi {
        let x = m.iterate(run.point, i);
        let d = m.torus_distance(x, seed.position(code.witness(i)));
        if d > worst {
            (worst, worst_position) = (d, i);
        }
    }
    Ok(ShadowOutcome {
        point: run.point,
        iterations: run.forward_iterations.max(run.backward_iterations),
        final_move: run.final_move,
        halving_checks: run.halving_checks,
        certificate_ratio: worst / bound,
        worst_position,
        certified: worst < bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::catalog;
    use proptest::prelude::*;

    #[test]
    fn symbolic_shadow_reads_off_the_code() {
        let m2 = catalog::markov("M2").unwrap();
        let dynamics = SymbolicDynamics { model: &m2 };
        let g: i64 = 2;
        let code: Vec<usize> = (0..81).map(|i: usize| (i * i + i / 3) % 2).collect();
        let at = |i: i64| code[(i + 40) as usize];
        // Witness u_i agrees with the code on i - 2g - 1 ..= i + 2g + 1 and is
        // padded with a fixed symbol, so F(u_i) and u_{i+1} share a cylinder.
        let witness = |i: i64| SymbolWindow {
            start: -64,
            symbols: (-64..64)
                .map(|k: i64| if k.abs() <= 2 * g + 1 { at(i + k) } else { 0 })
                .collect(),
        };
        let future: Vec<_> = (0..15).map(|n| witness(n * g)).collect();
        let past: Vec<_> = (0..15).map(|n| witness(-n * g)).collect();
        let run = shadow(&dynamics, &future, &past, g, 1.0, future.len()).unwrap();
        assert!(dynamics.admissible(&run.point));
        for i in -24..=24 {
            assert_eq!(run.point.at(i), Some(at(i)), "index {i}");
        }
    }

    #[test]
    fn symbolic_constant_code_is_a_fixed_point() {
        let m2 = catalog::markov("M2").unwrap();
        let dynamics = SymbolicDynamics { model: &m2 };
        let u = SymbolWindow::periodic(&[0, 1], 64);
        let future: Vec<_> = (0..8).map(|_| u.clone()).collect();
        let run = shadow(&dynamics, &future, &future, 2, 1.0, 0).unwrap();
        assert_eq!(dynamics.distance(&run.point, &u), 0.0);
        assert_eq!(run.final_move, 0.0);
    }

    #[test]
    fn halving_failure_is_reported() {
        let m = ToralModel::cat();
        let future = vec![[0.0, 0.0], [0.3, 0.1], [0.6, 0.7]];
        let err = shadow(&m, &future, &future[..1], 1, 1e-3, 0).unwrap_err();
        assert_eq!(err.code(), "E_CODING");
    }

    proptest! {
        #[test]
        fn symbolic_bracket_splices(a in prop::collection::vec(0usize..2, 20), b in prop::collection::vec(0usize..2, 20)) {
            let m2 = catalog::markov("M2").unwrap();
            let d = SymbolicDynamics { model: &m2 };
            let x = SymbolWindow { start: -10, symbols: a.clone() };
            let y = SymbolWindow { start: -10, symbols: b.clone() };
            let z = d.bracket(&x, &y);
            for k in -10..10i64 {
                let want = if k < 0 { a[(k + 10) as usize] } else { b[(k + 10) as usize] };
                prop_assert_eq!(z.at(k), Some(want));
            }
        }
    }
}
