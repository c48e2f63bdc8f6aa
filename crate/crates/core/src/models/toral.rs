use crate::error::Result;
use crate::linalg::Mat2;

/// Suspension of the cat map `[[2,1],[1,1]]` on the 2-torus with roof 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ToralModel {
    pub name: String,
    pub description: String,
    pub matrix: Mat2,
    pub inverse: Mat2,
    /// Time-reversing involution `R` with `R A R = A^{-1}` and `R^2 = I`.
    pub reversal: Mat2,
    /// Expanding eigenvalue.
    pub lambda: f64,
    pub e_u: [f64; 2],
    pub e_s: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToralPoint {
    pub x: [f64; 2],
    /// Time since the last crossing of the section, in `[0, 1)`.
    pub s: f64,
}

pub fn wrap(v: f64) -> f64 {
    let w = v - v.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

pub fn wrap2(x: [f64; 2]) -> [f64; 2] {
    [wrap(x[0]), wrap(x[1])]
}

/// Minimal-image representative of a displacement on the torus.
pub fn min_image(d: [f64; 2]) -> [f64; 2] {
    [d[0] - d[0].round(), d[1] - d[1].round()]
}

pub fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub fn norm(a: [f64; 2]) -> f64 {
    dot(a, a).sqrt()
}

impl Default for ToralModel {
    fn default() -> Self {
        Self::cat()
    }
}

impl ToralModel {
    pub fn cat() -> Self {
        let lambda = (3.0 + 5f64.sqrt()) / 2.0;
        let m = lambda - 2.0;
        let n = (1.0 + m * m).sqrt();
        ToralModel {
            name: "CAT".into(),
            description: "suspension of the cat map with unit roof".into(),
            matrix: Mat2::new(2.0, 1.0, 1.0, 1.0),
            inverse: Mat2::new(1.0, -1.0, -1.0, 2.0),
            reversal: Mat2::new(1.0, 0.0, -1.0, -1.0),
            lambda,
            e_u: [1.0 / n, m / n],
            e_s: [-m / n, 1.0 / n],
        }
    }

    /// Curvature whose Jacobi growth over one unit of time equals `lambda`.
    pub fn curvature(&self) -> f64 {
        -self.lambda.ln().powi(2)
    }

    pub fn map(&self, x: [f64; 2]) -> [f64; 2] {
        wrap2(self.matrix.apply(x))
    }

    pub fn map_inverse(&self, x: [f64; 2]) -> [f64; 2] {
        wrap2(self.inverse.apply(x))
    }

    pub fn iterate(&self, x: [f64; 2], n: i64) -> [f64; 2] {
        let mut y = x;
        if n >= 0 {
            for _ in 0..n {
                y = self.map(y);
            }
        } else {
            for _ in 0..(-n) {
                y = self.map_inverse(y);
            }
        }
        y
    }

    /// Coordinates of a displacement in the orthonormal eigenbasis `(e_u, e_s)`.
    pub fn eigen(&self, d: [f64; 2]) -> [f64; 2] {
        [dot(d, self.e_u), dot(d, self.e_s)]
    }

    pub fn from_eigen(&self, c: [f64; 2]) -> [f64; 2] {
        [
            c[0] * self.e_u[0] + c[1] * self.e_s[0],
            c[0] * self.e_u[1] + c[1] * self.e_s[1],
        ]
    }

    pub fn torus_distance(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        norm(min_image([a[0] - b[0], a[1] - b[1]]))
    }

    /// Local product bracket on the section: the point of the unstable line
    /// through `a` on the stable line through `b`.
    pub fn bracket(&self, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        let d = min_image([b[0] - a[0], b[1] - a[1]]);
        let u = dot(d, self.e_u);
        wrap2([a[0] + u * self.e_u[0], a[1] + u * self.e_u[1]])
    }

    /// Lipschitz constant of the bracket, `max(|P^{-1}|, 1)` for the
    /// eigenbasis change of coordinates `P`.
    pub fn bracket_constant(&self) -> f64 {
        let p = Mat2::new(self.e_u[0], self.e_s[0], self.e_u[1], self.e_s[1]);
        let det = p.det();
        let inv = Mat2::new(p.0[1][1] / det, -p.0[0][1] / det, -p.0[1][0] / det, p.0[0][0] / det);
        spectral_norm(&inv).max(1.0)
    }

    pub fn point(&self, x: [f64; 2], s: f64) -> ToralPoint {
        ToralPoint {
            x: wrap2(x),
            s: wrap(s),
        }
    }

    pub fn flow(&self, p: &ToralPoint, t: f64) -> ToralPoint {
        if t == 0.0 {
            return *p;
        }
        let total = p.s + t;
        let n = total.floor();
        let mut s = total - n;
        let mut n = n as i64;
        if s >= 1.0 {
            s -= 1.0;
            n += 1;
        }
        ToralPoint {
            x: self.iterate(p.x, n),
            s,
        }
    }

    pub fn reverse(&self, p: &ToralPoint) -> ToralPoint {
        if p.s > 0.0 {
            ToralPoint {
                x: wrap2(self.reversal.apply(self.matrix.apply(p.x))),
                s: 1.0 - p.s,
            }
        } else {
            ToralPoint {
                x: wrap2(self.reversal.apply(p.x)),
                s: 0.0,
            }
        }
    }

    /// Orbit-sup distance over the unit window at nine sample times, with
    /// instantaneous metric `torus distance + |s - s'|`.
    pub fn distance(&self, p: &ToralPoint, q: &ToralPoint) -> f64 {
        (0..=8)
            .map(|i| {
                let t = i as f64 / 8.0;
                let (a, b) = (self.flow(p, t), self.flow(q, t));
                self.torus_distance(a.x, b.x) + (a.s - b.s).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn segments(&self, _p: &ToralPoint, t: f64) -> Result<Vec<(f64, f64)>> {
        Ok(if t == 0.0 { vec![] } else { vec![(self.curvature(), t)] })
    }
}

fn spectral_norm(m: &Mat2) -> f64 {
    let [[a, b], [c, d]] = m.0;
    let s = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    ((s + (s * s - 4.0 * det * det).max(0.0).sqrt()) / 2.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reversal_conjugates_to_inverse() {
        let t = ToralModel::cat();
        let r = t.reversal;
        assert_eq!(r * t.matrix * r, t.inverse);
        assert_eq!(r * r, Mat2::IDENTITY);
    }

    #[test]
    fn eigenbasis_is_orthonormal_and_invariant() {
        let t = ToralModel::cat();
        assert!(dot(t.e_u, t.e_s).abs() < 1e-15);
        let au = t.matrix.apply(t.e_u);
        assert!((au[0] - t.lambda * t.e_u[0]).abs() < 1e-14);
        let as_ = t.matrix.apply(t.e_s);
        assert!((as_[1] - t.e_s[1] / t.lambda).abs() < 1e-14);
        assert!((t.bracket_constant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unstable_offset_grows_by_lambda() {
        let t = ToralModel::cat();
        let p = t.point([0.3, 0.1], 0.0);
        let eps = 1e-7;
        let q = t.point([0.3 + eps * t.e_u[0], 0.1 + eps * t.e_u[1]], 0.0);
        let d0 = t.distance(&p, &q);
        let d1 = t.distance(&t.flow(&p, 1.0), &t.flow(&q, 1.0));
        assert!((d1 / d0 - t.lambda).abs() < 1e-5);
    }

    #[test]
    fn bracket_lies_on_both_leaves() {
        let t = ToralModel::cat();
        let a = [0.2, 0.3];
        let b = [0.21, 0.28];
        let c = t.bracket(a, b);
        let da = t.eigen(min_image([c[0] - a[0], c[1] - a[1]]));
        let db = t.eigen(min_image([c[0] - b[0], c[1] - b[1]]));
        assert!(da[1].abs() < 1e-15);
        assert!(db[0].abs() < 1e-15);
    }
}
