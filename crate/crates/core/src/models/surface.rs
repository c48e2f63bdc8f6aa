use crate::error::{Error, Result};
use crate::integrate::{integrate, Tolerance};
use std::f64::consts::PI;

/// Profile `f(r) = a cosh(b r) + c + d r^2` of the metric `dr^2 + f(r)^2 dtheta^2`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Profile {
    pub fn f(&self, r: f64) -> f64 {
        self.a * (self.b * r).cosh() + self.c + self.d * r * r
    }

    pub fn df(&self, r: f64) -> f64 {
        self.a * self.b * (self.b * r).sinh() + 2.0 * self.d * r
    }

    pub fn ddf(&self, r: f64) -> f64 {
        self.a * self.b * self.b * (self.b * r).cosh() + 2.0 * self.d
    }

    /// Gaussian curvature `K = -f''/f`.
    pub fn curvature(&self, r: f64) -> f64 {
        -self.ddf(r) / self.f(r)
    }
}

/// Geodesic flow on a surface of revolution.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceModel {
    pub name: String,
    pub description: String,
    pub profile: Profile,
    pub domain: (f64, f64),
    pub tolerance: Tolerance,
}

/// Unit tangent vector `(r, theta, r', theta')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub r: f64,
    pub theta: f64,
    pub rdot: f64,
    pub thetadot: f64,
}

const VALIDATION_GRID: usize = 2001;
/// Longest stretch integrated before Jacobi data is rescaled.
const CHUNK: f64 = 8.0;

fn wrap_angle(theta: f64) -> f64 {
    theta.rem_euclid(2.0 * PI)
}

impl SurfaceModel {
    pub fn new(name: &str, profile: Profile, domain: (f64, f64)) -> Result<Self> {
        let (lo, hi) = domain;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidModel(format!("bad domain [{lo}, {hi}]")));
        }
        for i in 0..VALIDATION_GRID {
            let r = lo + (hi - lo) * i as f64 / (VALIDATION_GRID - 1) as f64;
            let f = profile.f(r);
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::InvalidModel(format!("profile not positive at r = {r}")));
            }
            let k = profile.curvature(r);
            if !(k <= 0.0) {
                return Err(Error::InvalidModel(format!("positive curvature {k:e} at r = {r}")));
            }
        }
        Ok(SurfaceModel {
            name: name.to_string(),
            description: String::new(),
            profile,
            domain,
            tolerance: Tolerance::default(),
        })
    }

    /// Unit vector at `(r, theta)` making angle `psi` with the `r` direction.
    pub fn point(&self, r: f64, theta: f64, psi: f64) -> SurfacePoint {
        SurfacePoint {
            r,
            theta: wrap_angle(theta),
            rdot: psi.cos(),
            thetadot: psi.sin() / self.profile.f(r),
        }
    }

    pub fn clairaut(&self, p: &SurfacePoint) -> f64 {
        self.profile.f(p.r).powi(2) * p.thetadot
    }

    pub fn speed(&self, p: &SurfacePoint) -> f64 {
        (p.rdot * p.rdot + (self.profile.f(p.r) * p.thetadot).powi(2)).sqrt()
    }

    /// State `(r, theta, r', w, J, J')` with `w = f(r) theta'` the angular
    /// component of the velocity in an orthonormal frame.
    fn rhs(&self, y: &[f64; 6]) -> [f64; 6] {
        let pr = &self.profile;
        let f = pr.f(y[0]);
        let g = pr.df(y[0]) / f;
        [
            y[2],
            y[3] / f,
            g * y[3] * y[3],
            -g * y[2] * y[3],
            y[5],
            -pr.curvature(y[0]) * y[4],
        ]
    }

    /// Integrates the geodesic together with a scalar Jacobi pair. The pair is
    /// returned as `(J, J', log scale)` normalized so that `max(|J|,|J'|)` lies
    /// in `[1/2, 2]`. `on_step` receives `(t0, J0, t1, J1)` per accepted step.
    pub fn flow_with_jacobi<S>(
        &self,
        p: &SurfacePoint,
        pair: (f64, f64, f64),
        t: f64,
        mut on_step: S,
    ) -> Result<(SurfacePoint, (f64, f64, f64))>
    where
        S: FnMut(f64, f64, f64, f64) -> Result<()>,
    {
        let (lo, hi) = self.domain;
        let mut y = [p.r, p.theta, p.rdot, self.profile.f(p.r) * p.thetadot, pair.0, pair.1];
        let mut logscale = pair.2;
        let mut done = 0.0;
        let chunks = (t.abs() / CHUNK).ceil().max(1.0) as usize;
        for c in 0..chunks {
            let end = if c + 1 == chunks {
                t
            } else {
                t.signum() * CHUNK * (c + 1) as f64
            };
            let offset = done;
            y = integrate(
                |y| self.rhs(y),
                y,
                end - done,
                self.tolerance,
                |t0, y0, t1, y1| {
                    if y1[0] < lo || y1[0] > hi || !y1[0].is_finite() {
                        return Err(Error::OutOfDomain(y1[0]));
                    }
                    on_step(offset + t0, y0[4], offset + t1, y1[4])
                },
            )?;
            done = end;
            let (j, jp, ls) = crate::jacobi::normalize(y[4], y[5], logscale);
            y[4] = j;
            y[5] = jp;
            logscale = ls;
        }
        let q = SurfacePoint {
            r: y[0],
            theta: wrap_angle(y[1]),
            rdot: y[2],
            thetadot: y[3] / self.profile.f(y[0]),
        };
        Ok((q, (y[4], y[5], logscale)))
    }

    pub fn flow(&self, p: &SurfacePoint, t: f64) -> Result<SurfacePoint> {
        if t == 0.0 {
            return Ok(*p);
        }
        Ok(self.flow_with_jacobi(p, (1.0, 0.0, 0.0), t, |_, _, _, _| Ok(()))?.0)
    }

    pub fn curvature_at(&self, p: &SurfacePoint) -> f64 {
        self.profile.curvature(p.r)
    }

    pub fn reverse(&self, p: &SurfacePoint) -> SurfacePoint {
        SurfacePoint {
            r: p.r,
            theta: p.theta,
            rdot: -p.rdot,
            thetadot: -p.thetadot,
        }
    }

    fn base_distance(&self, p: &SurfacePoint, q: &SurfacePoint) -> f64 {
        let mut dtheta = (p.theta - q.theta).rem_euclid(2.0 * PI);
        if dtheta > PI {
            dtheta = 2.0 * PI - dtheta;
        }
        let w = self.profile.f(p.r) * p.thetadot - self.profile.f(q.r) * q.thetadot;
        ((p.r - q.r).powi(2) + dtheta.powi(2) + (p.rdot - q.rdot).powi(2) + w * w).sqrt()
    }

    /// Orbit-sup distance over the unit window at nine sample times, with the
    /// Euclidean metric in `(r, theta, r', f(r) theta')`.
    pub fn distance(&self, p: &SurfacePoint, q: &SurfacePoint) -> Result<f64> {
        let mut best = self.base_distance(p, q);
        let (mut a, mut b) = (*p, *q);
        for _ in 1..=8 {
            a = self.flow(&a, 0.125)?;
            b = self.flow(&b, 0.125)?;
            best = best.max(self.base_distance(&a, &b));
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catenoid() -> SurfaceModel {
        SurfaceModel::new(
            "neck",
            Profile {
                a: 1.0,
                b: 1.0,
                c: 0.0,
                d: 0.0,
            },
            (-150.0, 150.0),
        )
        .unwrap()
    }

    fn flare() -> SurfaceModel {
        SurfaceModel::new(
            "flare",
            Profile {
                a: 0.0,
                b: 0.0,
                c: 1.0,
                d: 0.05,
            },
            (-150.0, 150.0),
        )
        .unwrap()
    }

    #[test]
    fn positive_curvature_is_rejected() {
        let bad = Profile {
            a: 0.0,
            b: 1.0,
            c: 2.0,
            d: -0.1,
        };
        assert!(SurfaceModel::new("bulge", bad, (-1.0, 1.0)).is_err());
    }

    #[test]
    fn cosh_profile_has_unit_negative_curvature() {
        let s = catenoid();
        for r in [-2.0, 0.0, 1.5] {
            assert!((s.profile.curvature(r) + 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn conserved_quantities_over_length_100() {
        let s = flare();
        for psi in [0.1, 1.2, 2.0, 3.0] {
            let p = s.point(0.3, 1.0, psi);
            let c0 = s.clairaut(&p);
            let mut q = p;
            for _ in 0..20 {
                q = s.flow(&q, 5.0).unwrap();
                assert!((s.clairaut(&q) - c0).abs() < 1e-8);
                assert!((s.speed(&q) - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn round_trip_returns_to_start() {
        for s in [flare(), catenoid()] {
            let p = s.point(0.3, 1.0, 1.2);
            for t in [1.0, 5.0, 10.0] {
                let back = s.flow(&s.flow(&p, t).unwrap(), -t).unwrap();
                assert!(s.base_distance(&p, &back) < 1e-8, "{} t={t}", s.name);
            }
        }
    }

    #[test]
    fn leaving_the_domain_is_an_error() {
        let s = SurfaceModel::new(
            "short",
            Profile {
                a: 1.0,
                b: 1.0,
                c: 0.0,
                d: 0.0,
            },
            (-1.0, 1.0),
        )
        .unwrap();
        let p = s.point(0.0, 0.0, 0.0);
        assert_eq!(s.flow(&p, 5.0).unwrap_err().code(), "E_DOMAIN");
    }
}
