//! The string: a parametric plane curve on a closed parameter interval.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{self, Expression};
use crate::quadrature;

/// A point or vector in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

pub type Point2 = Vec2;

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamInterval {
    min: f64,
    max: f64,
}

impl ParamInterval {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min < max) {
            return Err(Error::InvalidInterval { min, max });
        }
        Ok(ParamInterval { min, max })
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.min && t <= self.max
    }

    pub fn contains_interval(&self, other: &ParamInterval) -> bool {
        self.contains(other.min) && self.contains(other.max)
    }

    pub fn check(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::OutOfInterval {
                t,
                min: self.min,
                max: self.max,
            })
        }
    }

    /// `n >= 2` equispaced points including both ends.
    pub fn linspace(&self, n: usize) -> Vec<f64> {
        assert!(n >= 2);
        let step = self.width() / (n - 1) as f64;
        let mut out: Vec<f64> = (0..n).map(|i| self.min + step * i as f64).collect();
        out[n - 1] = self.max;
        out
    }
}

/// Grid size for the construction-time regularity scan.
const REGULARITY_GRID: usize = 10_000;
const MONOTONE_GRID: usize = 1_000;

/// A C¹ curve `t ↦ (mu1(t), mu2(t))` on a closed interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    mu1: Expression,
    mu2: Expression,
    param: String,
    interval: ParamInterval,
    stationary: Vec<f64>,
}

impl Curve {
    /// Both expressions must be in the single variable `param`. Fails if
    /// the curve cannot be evaluated on a dense grid; grid points where the
    /// velocity vanishes are kept as warnings (see [`Curve::stationary_points`]).
    pub fn new(mu1: Expression, mu2: Expression, interval: ParamInterval) -> Result<Self> {
        if mu1.vars().len() != 1 || mu1.vars() != mu2.vars() {
            return Err(Error::invalid(
                "curve components must be expressions in the same single parameter",
            ));
        }
        let param = mu1.vars()[0].clone();
        let mut curve = Curve {
            mu1,
            mu2,
            param,
            interval,
            stationary: Vec::new(),
        };
        for t in interval.linspace(REGULARITY_GRID) {
            let (p, v) = curve.point_velocity_unchecked(t)?;
            if !p.is_finite() {
                return Err(Error::invalid(format!("curve is not finite at t = {t}")));
            }
            if v.x == 0.0 && v.y == 0.0 {
                curve.stationary.push(t);
            }
        }
        Ok(curve)
    }

    pub fn parse(mu1: &str, mu2: &str, param: &str, interval: ParamInterval) -> Result<Self> {
        let e1 = expr::parse(mu1, &[param])?;
        let e2 = expr::parse(mu2, &[param])?;
        Curve::new(e1, e2, interval)
    }

    pub fn mu1(&self) -> &Expression {
        &self.mu1
    }

    pub fn mu2(&self) -> &Expression {
        &self.mu2
    }

    pub fn param(&self) -> &str {
        &self.param
    }

    pub fn interval(&self) -> ParamInterval {
        self.interval
    }

    /// Grid parameters where the velocity was exactly zero at construction.
    pub fn stationary_points(&self) -> &[f64] {
        &self.stationary
    }

    pub fn point(&self, t: f64) -> Result<Point2> {
        self.interval.check(t)?;
        self.point_unchecked(t)
    }

    pub fn velocity(&self, t: f64) -> Result<Vec2> {
        self.interval.check(t)?;
        Ok(self.point_velocity_unchecked(t)?.1)
    }

    pub fn point_velocity(&self, t: f64) -> Result<(Point2, Vec2)> {
        self.interval.check(t)?;
        self.point_velocity_unchecked(t)
    }

    pub(crate) fn point_unchecked(&self, t: f64) -> Result<Point2> {
        let x = self.mu1.eval_at(&[t])?;
        let y = self.mu2.eval_at(&[t])?;
        Ok(Vec2::new(x, y))
    }

    pub(crate) fn point_velocity_unchecked(&self, t: f64) -> Result<(Point2, Vec2)> {
        let a = self.mu1.eval_dual_at(&[t], 0)?;
        let b = self.mu2.eval_dual_at(&[t], 0)?;
        Ok((Vec2::new(a.value, b.value), Vec2::new(a.deriv, b.deriv)))
    }

    /// Length of the curve between `t0` and `t1` to absolute error `tol`.
    pub fn arc_length(&self, t0: f64, t1: f64, tol: f64) -> Result<f64> {
        self.interval.check(t0)?;
        self.interval.check(t1)?;
        if t0 >= t1 {
            return Err(Error::invalid("arc_length needs t0 < t1"));
        }
        if !(tol > 0.0) {
            return Err(Error::invalid("arc_length tolerance must be positive"));
        }
        let breaks = ParamInterval::new(t0, t1)?.linspace(17);
        let speed = |t: f64| -> Result<f64> { Ok(self.point_velocity_unchecked(t)?.1.norm()) };
        match quadrature::integrate(speed, &breaks, tol, 10_000_000) {
            Ok(r) => Ok(r.value),
            Err(quadrature::QuadError::Integrand(e)) => Err(e),
            Err(quadrature::QuadError::Budget { evaluations, limit }) => {
                Err(Error::NodeBudget { evaluations, limit })
            }
        }
    }

    /// Parameter of the point on the curve nearest to `p`.
    ///
    /// A coarse scan over `grid_n` equispaced parameters picks the basin
    /// (ties go to the smaller parameter); bisection on the stationarity
    /// condition `(p - mu(t)) · mu'(t) = 0` then refines to 1e-10.
    pub fn project(&self, p: Point2, grid_n: usize) -> Result<f64> {
        if grid_n < 64 {
            return Err(Error::invalid("projection grid needs at least 64 points"));
        }
        let ts = self.interval.linspace(grid_n);
        let mut best = 0;
        let mut best_d2 = f64::INFINITY;
        for (i, &t) in ts.iter().enumerate() {
            let d2 = (p - self.point_unchecked(t)?).norm_sq();
            if d2 < best_d2 {
                best_d2 = d2;
                best = i;
            }
        }
        let slope = |t: f64| -> Result<f64> {
            let (m, v) = self.point_velocity_unchecked(t)?;
            Ok((p - m).dot(v))
        };
        // slope > 0 means the squared distance is still decreasing in t.
        let s_best = slope(ts[best])?;
        let (mut lo, mut hi) = if s_best > 0.0 && best + 1 < grid_n {
            (ts[best], ts[best + 1])
        } else if s_best < 0.0 && best > 0 {
            (ts[best - 1], ts[best])
        } else {
            return Ok(ts[best]);
        };
        if !(slope(lo)? > 0.0 && slope(hi)? < 0.0) {
            return Ok(ts[best]);
        }
        while hi - lo > 1e-10 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let s = slope(mid)?;
            if s > 0.0 {
                lo = mid;
            } else if s < 0.0 {
                hi = mid;
            } else {
                lo = mid;
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        let d2 = (p - self.point_unchecked(t)?).norm_sq();
        Ok(if d2 <= best_d2 { t } else { ts[best] })
    }

    /// The curve `r ↦ mu(phi(r))` on `new_interval`.
    ///
    /// `phi` must be strictly increasing and map the ends of `new_interval`
    /// onto the ends of the current interval (within 1e-9).
    pub fn reparameterize(&self, phi: &Expression, new_interval: ParamInterval) -> Result<Curve> {
        if phi.vars().len() != 1 {
            return Err(Error::invalid("reparameterization must be in one variable"));
        }
        let grid = new_interval.linspace(MONOTONE_GRID);
        let mut prev = f64::NEG_INFINITY;
        for &r in &grid {
            let v = phi.eval_at(&[r])?;
            if v <= prev {
                return Err(Error::NonMonotone { at: r });
            }
            prev = v;
        }
        let lo = phi.eval_at(&[new_interval.min()])?;
        let hi = phi.eval_at(&[new_interval.max()])?;
        if (lo - self.interval.min()).abs() > 1e-9 || (hi - self.interval.max()).abs() > 1e-9 {
            return Err(Error::EndpointMismatch(format!(
                "phi maps [{}, {}] to [{lo}, {hi}], expected [{}, {}]",
                new_interval.min(),
                new_interval.max(),
                self.interval.min(),
                self.interval.max()
            )));
        }
        let mu1 = self.mu1.substitute(&self.param, phi)?;
        let mu2 = self.mu2.substitute(&self.param, phi)?;
        Curve::new(mu1, mu2, new_interval)
    }
}
