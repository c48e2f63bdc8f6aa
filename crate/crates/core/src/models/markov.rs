use crate::error::{Error, Result};
use rand::Rng;
use std::collections::VecDeque;

/// Number of symbols stored on each side of the origin for aperiodic points.
pub const DEFAULT_WINDOW: usize = 256;
/// Symbols on each side that enter the discrete part of the distance.
const DISTANCE_REACH: i64 = 40;

/// Suspension flow over a subshift of finite type with a piecewise constant
/// curvature along orbits: symbol `s` is crossed in time `roofs[s]` under
/// curvature `curvatures[s] = -a_s^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovModel {
    pub name: String,
    pub description: String,
    pub alphabet: Vec<String>,
    pub adjacency: Vec<Vec<bool>>,
    pub roofs: Vec<f64>,
    pub curvatures: Vec<f64>,
}

/// A phase point: a symbol sequence indexed relative to `origin`, and the time
/// already spent in the current symbol. Periodic points index `symbols`
/// cyclically; all other points hold a finite window.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovPoint {
    pub symbols: Vec<usize>,
    pub origin: usize,
    pub phase: f64,
    pub periodic: bool,
}

fn reach(adj: &[Vec<bool>], start: usize, forward: bool) -> Vec<bool> {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            let edge = if forward { adj[i][j] } else { adj[j][i] };
            if edge && !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen
}

/// True when the directed graph is strongly connected and carries a cycle.
pub fn is_irreducible(adj: &[Vec<bool>]) -> bool {
    if adj.is_empty() {
        return false;
    }
    if adj.len() == 1 {
        return adj[0][0];
    }
    reach(adj, 0, true).iter().all(|&b| b) && reach(adj, 0, false).iter().all(|&b| b)
}

impl MarkovModel {
    pub fn new(
        name: &str,
        alphabet: Vec<String>,
        adjacency: Vec<Vec<bool>>,
        roofs: Vec<f64>,
        curvatures: Vec<f64>,
    ) -> Result<Self> {
        let n = alphabet.len();
        if n == 0 {
            return Err(Error::InvalidModel("alphabet is empty".into()));
        }
        if adjacency.len() != n || adjacency.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidModel(format!(
                "adjacency must be {n}x{n} to match the alphabet"
            )));
        }
        if roofs.len() != n || curvatures.len() != n {
            return Err(Error::InvalidModel(
                "roofs and curvatures need one entry per symbol".into(),
            ));
        }
        for (i, name) in alphabet.iter().enumerate() {
            if alphabet[..i].contains(name) {
                return Err(Error::InvalidModel(format!("duplicate symbol `{name}`")));
            }
        }
        for (s, &r) in roofs.iter().enumerate() {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "roof of `{}` must be positive, got {r}",
                    alphabet[s]
                )));
            }
        }
        for (s, &k) in curvatures.iter().enumerate() {
            if !(k <= 0.0 && k.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "curvature of `{}` must be nonpositive, got {k}",
                    alphabet[s]
                )));
            }
        }
        if !is_irreducible(&adjacency) {
            return Err(Error::Reducible(format!("graph of `{name}` is not strongly connected")));
        }
        Ok(MarkovModel {
            name: name.to_string(),
            description: String::new(),
            alphabet,
            adjacency,
            roofs,
            curvatures,
        })
    }

    pub fn len(&self) -> usize {
        self.alphabet.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphabet.is_empty()
    }

    /// `a_s = sqrt(-K_s)`.
    pub fn rate(&self, s: usize) -> f64 {
        (-self.curvatures[s]).sqrt()
    }

    pub fn is_flat(&self, s: usize) -> bool {
        self.curvatures[s] == 0.0
    }

    pub fn allowed(&self, i: usize, j: usize) -> bool {
        self.adjacency[i][j]
    }

    pub fn symbol_index(&self, name: &str) -> Option<usize> {
        self.alphabet.iter().position(|s| s == name)
    }

    pub fn min_roof(&self) -> f64 {
        self.roofs.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Adjacency restricted to flat symbols.
    pub fn flat_subgraph(&self) -> Vec<Vec<bool>> {
        let n = self.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| self.adjacency[i][j] && self.is_flat(i) && self.is_flat(j))
                    .collect()
            })
            .collect()
    }

    /// Whether some cycle visits flat symbols only (an orbit with `K = 0`
    /// throughout, the analog of a nonempty singular set).
    pub fn has_flat_loop(&self) -> bool {
        let flat = self.flat_subgraph();
        let n = self.len();
        (0..n).any(|i| {
            self.is_flat(i) && {
                let fwd = reach(&flat, i, true);
                (0..n).any(|j| fwd[j] && flat[j][i])
            }
        })
    }

    /// Parses a word written with single-character symbol names or
    /// whitespace-separated names.
    pub fn parse_word(&self, text: &str) -> Result<Vec<usize>> {
        let tokens: Vec<String> = if text.contains(char::is_whitespace) {
            text.split_whitespace().map(str::to_string).collect()
        } else {
            text.chars().map(|c| c.to_string()).collect()
        };
        tokens
            .iter()
            .map(|t| {
                self.symbol_index(t)
                    .ok_or_else(|| Error::InvalidModel(format!("unknown symbol `{t}`")))
            })
            .collect()
    }

    pub fn word_name(&self, word: &[usize]) -> String {
        let single = self.alphabet.iter().all(|s| s.chars().count() == 1);
        let names: Vec<&str> = word.iter().map(|&s| self.alphabet[s].as_str()).collect();
        if single {
            names.concat()
        } else {
            names.join(" ")
        }
    }

    pub fn check_cycle(&self, word: &[usize]) -> Result<()> {
        if word.is_empty() {
            return Err(Error::InvalidModel("empty cycle".into()));
        }
        for i in 0..word.len() {
            let (a, b) = (word[i], word[(i + 1) % word.len()]);
            if a >= self.len() || b >= self.len() || !self.allowed(a, b) {
                return Err(Error::InvalidModel(format!(
                    "cycle {} uses a forbidden transition at position {i}",
                    self.word_name(word)
                )));
            }
        }
        Ok(())
    }

    /// The point on the periodic orbit of `word`, at `phase` into `word[0]`.
    pub fn periodic_point(&self, word: &[usize], phase: f64) -> Result<MarkovPoint> {
        self.check_cycle(word)?;
        if !(phase >= 0.0 && phase < self.roofs[word[0]]) {
            return Err(Error::InvalidModel(format!("phase {phase} outside the roof")));
        }
        Ok(MarkovPoint {
            symbols: word.to_vec(),
            origin: 0,
            phase,
            periodic: true,
        })
    }

    /// A point holding an explicit finite window of symbols.
    pub fn window_point(&self, symbols: Vec<usize>, origin: usize, phase: f64) -> Result<MarkovPoint> {
        if origin >= symbols.len() {
            return Err(Error::InvalidModel("origin outside the symbol window".into()));
        }
        for w in symbols.windows(2) {
            if w[0] >= self.len() || w[1] >= self.len() || !self.allowed(w[0], w[1]) {
                return Err(Error::InvalidModel("window is not an admissible word".into()));
            }
        }
        if !(phase >= 0.0 && phase < self.roofs[symbols[origin]]) {
            return Err(Error::InvalidModel(format!("phase {phase} outside the roof")));
        }
        Ok(MarkovPoint {
            symbols,
            origin,
            phase,
            periodic: false,
        })
    }

    /// A uniformly branching random admissible window with `half_width`
    /// symbols on each side and a uniform phase.
    pub fn random_point<R: Rng>(&self, rng: &mut R, half_width: usize) -> MarkovPoint {
        let n = self.len();
        let start = rng.gen_range(0..n);
        let mut future = vec![start];
        for _ in 0..half_width {
            let last = *future.last().unwrap();
            let next: Vec<usize> = (0..n).filter(|&j| self.allowed(last, j)).collect();
            future.push(next[rng.gen_range(0..next.len())]);
        }
        let mut past = Vec::with_capacity(half_width);
        let mut first = start;
        for _ in 0..half_width {
            let prev: Vec<usize> = (0..n).filter(|&j| self.allowed(j, first)).collect();
            first = prev[rng.gen_range(0..prev.len())];
            past.push(first);
        }
        past.reverse();
        let origin = past.len();
        past.extend(future);
        let phase = rng.gen::<f64>() * self.roofs[start];
        MarkovPoint {
            symbols: past,
            origin,
            phase,
            periodic: false,
        }
    }

    pub fn symbol_at(&self, p: &MarkovPoint, k: i64) -> Result<usize> {
        let len = p.symbols.len() as i64;
        let idx = p.origin as i64 + k;
        if p.periodic {
            return Ok(p.symbols[idx.rem_euclid(len) as usize]);
        }
        if idx < 0 {
            return Err(Error::WindowExhausted {
                side: "past",
                required: (-k) as usize,
                available: p.origin,
            });
        }
        if idx >= len {
            return Err(Error::WindowExhausted {
                side: "future",
                required: k as usize,
                available: p.symbols.len() - 1 - p.origin,
            });
        }
        Ok(p.symbols[idx as usize])
    }

    fn shifted(&self, p: &MarkovPoint, k: i64, phase: f64) -> MarkovPoint {
        let len = p.symbols.len() as i64;
        let mut origin = p.origin as i64 + k;
        if p.periodic {
            origin = origin.rem_euclid(len);
        }
        MarkovPoint {
            symbols: p.symbols.clone(),
            origin: origin as usize,
            phase,
            periodic: p.periodic,
        }
    }

    pub fn flow(&self, p: &MarkovPoint, t: f64) -> Result<MarkovPoint> {
        if t == 0.0 {
            return Ok(p.clone());
        }
        let mut k = 0i64;
        let mut phase = p.phase + t;
        loop {
            let r = self.roofs[self.symbol_at(p, k)?];
            if phase >= r {
                phase -= r;
                k += 1;
            } else if phase < 0.0 {
                k -= 1;
                phase += self.roofs[self.symbol_at(p, k)?];
            } else {
                break;
            }
        }
        Ok(self.shifted(p, k, phase))
    }

    pub fn curvature_at(&self, p: &MarkovPoint) -> f64 {
        self.curvatures[p.symbols[p.origin]]
    }

    /// Time reversal: the sequence is read backwards and the phase mirrored.
    /// A point exactly at a symbol boundary maps to the boundary of the
    /// preceding symbol, which keeps the map an involution.
    pub fn reverse(&self, p: &MarkovPoint) -> Result<MarkovPoint> {
        let len = p.symbols.len();
        let mut symbols = p.symbols.clone();
        symbols.reverse();
        if p.phase > 0.0 {
            let r = self.roofs[p.symbols[p.origin]];
            let mut phase = r - p.phase;
            if phase >= r {
                phase = 0.0;
            }
            return Ok(MarkovPoint {
                symbols,
                origin: len - 1 - p.origin,
                phase,
                periodic: p.periodic,
            });
        }
        let origin = if p.periodic {
            (len - p.origin) % len
        } else if p.origin == 0 {
            return Err(Error::WindowExhausted {
                side: "past",
                required: 1,
                available: 0,
            });
        } else {
            len - p.origin
        };
        Ok(MarkovPoint {
            symbols,
            origin,
            phase: 0.0,
            periodic: p.periodic,
        })
    }

    fn base_distance(&self, p: &MarkovPoint, q: &MarkovPoint) -> Result<f64> {
        let mut d = (p.phase - q.phase).abs();
        for k in -DISTANCE_REACH..=DISTANCE_REACH {
            let (x, y) = (self.symbol_at(p, k)?, self.symbol_at(q, k)?);
            if x != y {
                d += 0.5f64.powi(k.abs() as i32) * 0.5 * (self.roofs[x] + self.roofs[y]);
            }
        }
        Ok(d)
    }

    /// Orbit-sup distance over the unit window, sampled at nine equally spaced
    /// times. The instantaneous metric is `|tau_p - tau_q|` plus, for every
    /// index `k` with `|k| <= 40` where the sequences disagree, the weight
    /// `2^{-|k|}` times the mean roof of the two symbols.
    pub fn distance(&self, p: &MarkovPoint, q: &MarkovPoint) -> Result<f64> {
        let mut best = 0.0f64;
        for i in 0..=8 {
            let s = i as f64 / 8.0;
            let d = self.base_distance(&self.flow(p, s)?, &self.flow(q, s)?)?;
            best = best.max(d);
        }
        Ok(best)
    }

    /// Constant-curvature pieces `(K, signed duration)` met when flowing `p`
    /// for time `t`, in traversal order.
    pub fn segments(&self, p: &MarkovPoint, t: f64) -> Result<Vec<(f64, f64)>> {
        let mut out = Vec::new();
        if t > 0.0 {
            let mut k = 0i64;
            let mut left = t;
            let mut avail = self.roofs[self.symbol_at(p, 0)?] - p.phase;
            loop {
                let s = self.symbol_at(p, k)?;
                let d = avail.min(left);
                if d > 0.0 {
                    out.push((self.curvatures[s], d));
                }
                left -= d;
                if left <= 0.0 {
                    break;
                }
                k += 1;
                avail = self.roofs[self.symbol_at(p, k)?];
            }
        } else if t < 0.0 {
            let mut k = 0i64;
            let mut left = -t;
            let mut avail = p.phase;
            loop {
                let s = self.symbol_at(p, k)?;
                let d = avail.min(left);
                if d > 0.0 {
                    out.push((self.curvatures[s], -d));
                }
                left -= d;
                if left <= 0.0 {
                    break;
                }
                k -= 1;
                avail = self.roofs[self.symbol_at(p, k)?];
            }
        }
        Ok(out)
    }
}
