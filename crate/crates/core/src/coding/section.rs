//! Cross section, eigen-aligned su-rectangles, the first-return map and the
//! refined alphabets `R_N`.

use super::seed::{offset, Seed, SeedPoint};
use crate::error::{Error, Result};
use crate::models::toral::wrap2;
use crate::models::{FlowModel, ToralModel};
use rand::Rng;
use serde::Serialize;

/// Points closer than this to an axis count as lying on it when sizing
/// periodic rectangles.
const AXIS_TOL: f64 = 1e-9;
/// Slack for membership tests in eigen-coordinates.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// Box `{c + a e_u + b e_s : |a| <= half_u, |b| <= half_s}` on the section.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuRectangle {
    pub id: usize,
    pub center: [f64; 2],
    pub half_u: f64,
    pub half_s: f64,
    /// Corners in the order `(+,+), (-,+), (-,-), (+,-)` of `(a, b)`.
    pub corners: [[f64; 2]; 4],
    pub bracket_closed: bool,
    pub section: usize,
}

impl SuRectangle {
    pub fn new(model: &ToralModel, id: usize, center: [f64; 2], half_u: f64, half_s: f64) -> Self {
        let corner = |a: f64, b: f64| {
            let d = model.from_eigen([a, b]);
            wrap2([center[0] + d[0], center[1] + d[1]])
        };
        SuRectangle {
            id,
            center,
            half_u,
            half_s,
            corners: [
                corner(half_u, half_s),
                corner(-half_u, half_s),
                corner(-half_u, -half_s),
                corner(half_u, -half_s),
            ],
            bracket_closed: false,
            section: 0,
        }
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.half_u.hypot(self.half_s)
    }

    pub fn contains(&self, model: &ToralModel, x: [f64; 2]) -> bool {
        let [a, b] = offset(model, self.center, x);
        a.abs() <= self.half_u + MEMBERSHIP_TOL && b.abs() <= self.half_s + MEMBERSHIP_TOL
    }

    /// Euclidean distance from `x` to the boundary of the box.
    pub fn boundary_distance(&self, model: &ToralModel, x: [f64; 2]) -> f64 {
        let [a, b] = offset(model, self.center, x);
        let (da, db) = (a.abs() - self.half_u, b.abs() - self.half_s);
        if da <= 0.0 && db <= 0.0 {
            (-da).min(-db)
        } else {
            da.max(0.0).hypot(db.max(0.0))
        }
    }

    /// Sup-norm gap in eigen-coordinates from `x` to the box, zero inside.
    fn gap(&self, model: &ToralModel, x: [f64; 2]) -> f64 {
        let [a, b] = offset(model, self.center, x);
        (a.abs() - self.half_u).max(b.abs() - self.half_s).max(0.0)
    }

    pub fn sample<R: Rng>(&self, model: &ToralModel, rng: &mut R) -> [f64; 2] {
        let a = rng.gen_range(-self.half_u..=self.half_u);
        let b = rng.gen_range(-self.half_s..=self.half_s);
        let d = model.from_eigen([a, b]);
        wrap2([self.center[0] + d[0], self.center[1] + d[1]])
    }

    fn overlaps(&self, model: &ToralModel, other: &SuRectangle) -> bool {
        let [a, b] = offset(model, self.center, other.center);
        a.abs() < self.half_u + other.half_u && b.abs() < self.half_s + other.half_s
    }
}

/// The single section `{s = 0}` of the suspension with its rectangles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossSection {
    pub alpha_rect: f64,
    pub rectangles: Vec<SuRectangle>,
    /// First-return time, constant for the unit roof.
    pub return_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReturnOutcome {
    pub point: [f64; 2],
    pub time: f64,
    /// Rectangle containing the image, `None` when it exited all of them.
    pub rectangle: Option<usize>,
}

impl ReturnOutcome {
    pub fn exited(&self) -> bool {
        self.rectangle.is_none()
    }
}

impl CrossSection {
    /// Wraps explicit rectangles, rejecting overlaps.
    pub fn from_rectangles(model: &ToralModel, alpha_rect: f64, rectangles: Vec<SuRectangle>) -> Result<Self> {
        for (i, r) in rectangles.iter().enumerate() {
            for s in &rectangles[i + 1..] {
                if r.overlaps(model, s) {
                    return Err(Error::Coding(format!(
                        "rectangles {} and {} overlap; shrink alpha_rect",
                        r.id, s.id
                    )));
                }
            }
        }
        Ok(CrossSection {
            alpha_rect,
            rectangles,
            return_time: 1.0,
        })
    }

    pub fn locate(&self, model: &ToralModel, x: [f64; 2]) -> Option<usize> {
        self.rectangles.iter().position(|r| r.contains(model, x))
    }

    pub fn max_diameter(&self) -> f64 {
        self.rectangles.iter().map(SuRectangle::diameter).fold(0.0, f64::max)
    }

    /// `Delta = d(seed, union of rectangle boundaries)` over the sampled seed.
    pub fn margin(&self, seed: &Seed) -> f64 {
        let m = &seed.model;
        seed.sample()
            .into_iter()
            .map(|p| seed.position(p))
            .flat_map(|x| self.rectangles.iter().map(move |r| r.boundary_distance(m, x)))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Covers the seed with disjoint eigen-aligned rectangles of diameter at most
/// `alpha_rect`. Periodic points get boxes whose edges sit at geometric means
/// between consecutive seed offsets along their axes. Remaining seed points
/// get square boxes sized by their nearest neighbours.
pub fn build_cross_section(model: &FlowModel, seed: &Seed, alpha_rect: f64) -> Result<CrossSection> {
    let m = model.as_toral()?;
    if !(alpha_rect > 0.0 && alpha_rect < 0.5) {
        return Err(Error::Precondition(format!(
            "alpha_rect {alpha_rect} must lie in (0, 0.5)"
        )));
    }
    let cap = alpha_rect / (2.0 * 2f64.sqrt());
    let sample: Vec<[f64; 2]> = seed.sample().into_iter().map(|p| seed.position(p)).collect();
    let mut rects = Vec::new();
    for pts in &seed.orbits {
        for &c in pts {
            let (mut along_u, mut along_s) = (Vec::new(), Vec::new());
            for &x in &sample {
                let [a, b] = offset(m, c, x);
                if a.abs() < AXIS_TOL && b.abs() < AXIS_TOL {
                    continue;
                }
                if b.abs() < AXIS_TOL {
                    along_u.push(a.abs());
                } else if a.abs() < AXIS_TOL {
                    along_s.push(b.abs());
                }
            }
            let (hu, hs) = (half_width(along_u, cap), half_width(along_s, cap));
            rects.push(SuRectangle::new(m, rects.len(), c, hu, hs));
        }
    }
    let periodic = rects.len();
    let isolated: Vec<[f64; 2]> = sample
        .iter()
        .copied()
        .filter(|&x| !rects[..periodic].iter().any(|r| r.contains(m, x)))
        .collect();
    for (i, &x) in isolated.iter().enumerate() {
        let mut r = cap;
        for (j, &y) in isolated.iter().enumerate() {
            if i != j {
                let [a, b] = offset(m, x, y);
                r = r.min(0.3 * a.abs().max(b.abs()));
            }
        }
        for p in &rects[..periodic] {
            r = r.min(0.45 * p.gap(m, x));
        }
        if r <= 0.0 {
            return Err(Error::Coding(format!(
                "seed point ({:.6}, {:.6}) coincides with another seed point or a rectangle",
                x[0], x[1]
            )));
        }
        rects.push(SuRectangle::new(m, rects.len(), x, r, r));
    }
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0xb7ac);
    for r in rects.iter_mut() {
        r.bracket_closed = bracket_closed(m, r, &mut rng, 64);
    }
    CrossSection::from_rectangles(m, alpha_rect, rects)
}

/// Largest geometric mean `sqrt(v_i v_{i+1})` of consecutive sorted offsets
/// that stays within `cap`, so every offset keeps a relative margin.
fn half_width(mut values: Vec<f64>, cap: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    values.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * b.abs().max(1e-300));
    let mut best = None;
    for w in values.windows(2) {
        let g = (w[0] * w[1]).sqrt();
        if g <= cap {
            best = Some(g);
        }
    }
    match (best, values.first()) {
        (Some(g), _) => g,
        (None, Some(&v0)) if v0 > cap => cap.min(v0 / 2f64.sqrt()),
        (None, Some(&v0)) => v0 * 1.5f64.min(cap / v0),
        (None, None) => cap,
    }
}

fn bracket_closed<R: Rng>(m: &ToralModel, r: &SuRectangle, rng: &mut R, samples: usize) -> bool {
    (0..samples).all(|_| {
        let (x, y) = (r.sample(m, rng), r.sample(m, rng));
        r.contains(m, m.bracket(x, y)) && r.contains(m, m.bracket(y, x))
    })
}

/// First return to the section: one application of the cat map.
pub fn first_return(model: &FlowModel, section: &CrossSection, point: [f64; 2]) -> Result<ReturnOutcome> {
    let m = model.as_toral()?;
    if section.locate(m, point).is_none() {
        return Err(Error::Precondition(format!(
            "point ({:.6}, {:.6}) lies in no rectangle",
            point[0], point[1]
        )));
    }
    let image = m.map(point);
    Ok(ReturnOutcome {
        point: image,
        time: section.return_time,
        rectangle: section.locate(m, image),
    })
}

/// Element of `R_N`: a connected component of `∩_{|j|<=N} F^{-j} R_{r_j}`
/// that meets the seed, stored as an eigen box around an anchor seed point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Letter {
    pub id: usize,
    pub itinerary: Vec<usize>,
    /// Distinguishes components sharing an itinerary.
    pub component: usize,
    pub anchor: [f64; 2],
    pub u_range: [f64; 2],
    pub s_range: [f64; 2],
    pub members: Vec<SeedPoint>,
}

impl Letter {
    pub fn diameter(&self) -> f64 {
        (self.u_range[1] - self.u_range[0]).hypot(self.s_range[1] - self.s_range[0])
    }

    pub fn contains(&self, model: &ToralModel, x: [f64; 2]) -> bool {
        let [a, b] = offset(model, self.anchor, x);
        a >= self.u_range[0] - MEMBERSHIP_TOL
            && a <= self.u_range[1] + MEMBERSHIP_TOL
            && b >= self.s_range[0] - MEMBERSHIP_TOL
            && b <= self.s_range[1] + MEMBERSHIP_TOL
    }

    pub fn sample<R: Rng>(&self, model: &ToralModel, rng: &mut R) -> [f64; 2] {
        let a = rng.gen_range(self.u_range[0]..=self.u_range[1]);
        let b = rng.gen_range(self.s_range[0]..=self.s_range[1]);
        let d = model.from_eigen([a, b]);
        wrap2([self.anchor[0] + d[0], self.anchor[1] + d[1]])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Alphabet {
    pub n: usize,
    pub letters: Vec<Letter>,
}

impl Alphabet {
    pub fn max_diameter(&self) -> f64 {
        self.letters.iter().map(Letter::diameter).fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Letter containing `x`, given its rectangle itinerary over `|j| <= n`.
    pub fn find(&self, model: &ToralModel, itinerary: &[usize], x: [f64; 2]) -> Option<usize> {
        self.letters
            .iter()
            .position(|l| l.itinerary == itinerary && l.contains(model, x))
    }

    /// Letter of a seed point, computed from its exact orbit.
    pub fn letter_of(&self, section: &CrossSection, seed: &Seed, p: SeedPoint) -> Option<usize> {
        let it = seed_itinerary(section, seed, p, self.n)?;
        self.find(&seed.model, &it, seed.position(p))
    }

    /// Letter of an arbitrary section point, computed by iterating the map.
    pub fn letter_of_point(&self, model: &ToralModel, section: &CrossSection, x: [f64; 2]) -> Option<usize> {
        let n = self.n as i64;
        let it: Option<Vec<usize>> = (-n..=n).map(|j| section.locate(model, model.iterate(x, j))).collect();
        self.find(model, &it?, x)
    }
}

/// Rectangle itinerary of a seed point over `|j| <= n`.
pub fn seed_itinerary(section: &CrossSection, seed: &Seed, p: SeedPoint, n: usize) -> Option<Vec<usize>> {
    let n = n as i64;
    (-n..=n)
        .map(|j| section.locate(&seed.model, seed.position(seed.shift(p, j))))
        .collect()
}

/// The alphabet `R_N`. Each seed point contributes its itinerary; the letter
/// box is the intersection of the pulled-back rectangles, which is exact for
/// the linear map.
pub fn refine(section: &CrossSection, seed: &Seed, n: usize) -> Alphabet {
    let m = &seed.model;
    let mut letters: Vec<Letter> = Vec::new();
    for p in seed.sample() {
        let Some(it) = seed_itinerary(section, seed, p, n) else {
            continue;
        };
        let x = seed.position(p);
        if let Some(l) = letters.iter_mut().find(|l| l.itinerary == it && l.contains(m, x)) {
            l.members.push(p);
            continue;
        }
        let (mut u_range, mut s_range) = ([f64::NEG_INFINITY, f64::INFINITY], [f64::NEG_INFINITY, f64::INFINITY]);
        for (idx, j) in (-(n as i64)..=n as i64).enumerate() {
            let r = &section.rectangles[it[idx]];
            let [a, b] = offset(m, r.center, seed.position(seed.shift(p, j)));
            let grow = m.lambda.powi(j as i32);
            u_range[0] = u_range[0].max((-r.half_u - a) / grow);
            u_range[1] = u_range[1].min((r.half_u - a) / grow);
            s_range[0] = s_range[0].max((-r.half_s - b) * grow);
            s_range[1] = s_range[1].min((r.half_s - b) * grow);
        }
        let component = letters.iter().filter(|l| l.itinerary == it).count();
        letters.push(Letter {
            id: letters.len(),
            itinerary: it,
            component,
            anchor: x,
            u_range,
            s_range,
            members: vec![p],
        });
    }
    Alphabet { n, letters }
}
