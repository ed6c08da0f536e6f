//! Built-in problems with known answers: the Seidenfeld cubic, Fisher's
//! straight line and Fisher's circle.

use std::f64::consts::PI;

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::engine::Scenario;
use crate::error::{Error, Result};
use crate::expr::{self, Expression};
use crate::geometry::{Curve, ParamInterval, Point2, Vec2};
use crate::noise::GaussianNoise;

const SIMPSON_INTERVALS: usize = 200_000;

/// Normal(mean, sd) truncated to an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedGaussian1D {
    pub mean: f64,
    pub sd: f64,
    pub interval: ParamInterval,
    normal: Normal,
    lo: f64,
    mass: f64,
}

impl TruncatedGaussian1D {
    pub fn new(mean: f64, sd: f64, interval: ParamInterval) -> Result<Self> {
        let normal = Normal::new(mean, sd).map_err(|e| Error::invalid(e.to_string()))?;
        let lo = normal.cdf(interval.min());
        let mass = normal.cdf(interval.max()) - lo;
        if !(mass > 0.0) {
            return Err(Error::Underflow);
        }
        Ok(TruncatedGaussian1D {
            mean,
            sd,
            interval,
            normal,
            lo,
            mass,
        })
    }

    pub fn pdf(&self, t: f64) -> f64 {
        if self.interval.contains(t) {
            self.normal.pdf(t) / self.mass
        } else {
            0.0
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        ((self.normal.cdf(t) - self.lo) / self.mass).clamp(0.0, 1.0)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.normal
            .inverse_cdf(self.lo + p * self.mass)
            .clamp(self.interval.min(), self.interval.max())
    }
}

/// Von Mises density on `[0, 2π]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VonMises {
    pub mean_angle: f64,
    pub kappa: f64,
    i0: f64,
}

/// Modified Bessel function `I_n(x)` by its power series.
pub fn bessel_i(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = (1..=n).fold(1.0, |acc, k| acc * half / k as f64);
    let mut sum = term;
    let q = half * half;
    let mut k = 1.0;
    while term > 1e-18 * sum {
        term *= q / (k * (k + n as f64));
        sum += term;
        k += 1.0;
    }
    sum
}

impl VonMises {
    pub fn new(mean_angle: f64, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite() && mean_angle.is_finite()) {
            return Err(Error::invalid("von Mises needs finite mean and kappa ≥ 0"));
        }
        Ok(VonMises {
            mean_angle,
            kappa,
            i0: bessel_i(0, kappa),
        })
    }

    pub fn pdf(&self, t: f64) -> f64 {
        (self.kappa * (t - self.mean_angle).cos()).exp() / (2.0 * PI * self.i0)
    }

    /// CDF from 0, by the Fourier series of the density.
    pub fn cdf(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 2.0 * PI);
        let mut sum = t;
        let mut j = 1;
        loop {
            let ij = bessel_i(j, self.kappa) / self.i0;
            let jf = j as f64;
            sum +=
                2.0 * ij * ((jf * (t - self.mean_angle)).sin() + (jf * self.mean_angle).sin()) / jf;
            if ij < 1e-18 || j > 500 {
                break;
            }
            j += 1;
        }
        (sum / (2.0 * PI)).clamp(0.0, 1.0)
    }
}

/// Density `g(t) / ∫g` for an explicit expression `g`, normalized by
/// composite Simpson.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureReference {
    pub density: Expression,
    pub interval: ParamInterval,
    pub z: f64,
}

fn simpson(f: impl Fn(f64) -> Result<f64>, a: f64, b: f64, n: usize) -> Result<f64> {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a)? + f(b)?;
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h)?;
    }
    Ok(s * h / 3.0)
}

impl QuadratureReference {
    pub fn new(density: Expression, interval: ParamInterval) -> Result<Self> {
        if density.vars().len() != 1 {
            return Err(Error::invalid("reference density must be in one variable"));
        }
        let z = simpson(
            |t| Ok(density.eval_at(&[t])?),
            interval.min(),
            interval.max(),
            SIMPSON_INTERVALS,
        )?;
        Ok(QuadratureReference {
            density,
            interval,
            z,
        })
    }

    pub fn pdf(&self, t: f64) -> Result<f64> {
        self.interval.check(t)?;
        Ok(self.density.eval_at(&[t])? / self.z)
    }

    pub fn cdf(&self, t: f64) -> Result<f64> {
        let (a, b) = (self.interval.min(), self.interval.max());
        if t <= a {
            return Ok(0.0);
        }
        let t = t.min(b);
        let n = ((SIMPSON_INTERVALS as f64 * (t - a) / (b - a)).ceil() as usize).max(2);
        Ok(simpson(|s| self.pdf(s), a, t, n)?.clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReferencePosterior {
    TruncatedGaussian1D(TruncatedGaussian1D),
    VonMises(VonMises),
    Quadrature(QuadratureReference),
}

impl ReferencePosterior {
    pub fn pdf(&self, t: f64) -> Result<f64> {
        Ok(match self {
            ReferencePosterior::TruncatedGaussian1D(r) => r.pdf(t),
            ReferencePosterior::VonMises(r) => r.pdf(t),
            ReferencePosterior::Quadrature(r) => r.pdf(t)?,
        })
    }

    pub fn cdf(&self, t: f64) -> Result<f64> {
        Ok(match self {
            ReferencePosterior::TruncatedGaussian1D(r) => r.cdf(t),
            ReferencePosterior::VonMises(r) => r.cdf(t),
            ReferencePosterior::Quadrature(r) => r.cdf(t)?,
        })
    }
}

fn literal(v: f64) -> String {
    format!("({v:?})")
}

/// Seidenfeld's cubic with both shift-prior references.
#[derive(Debug, Clone)]
pub struct Seidenfeld {
    pub scenario: Scenario,
    /// `∝ f(x − μ(t))`, the Shift d=(1,0) posterior.
    pub uniform_t: QuadratureReference,
    /// `∝ 3t² f(x − μ(t))`, the Shift d=(0,1) posterior.
    pub uniform_t3: QuadratureReference,
}

/// The curve `(t³, t)` on `[−t_bound, t_bound]` with identity noise.
pub fn seidenfeld(x: Point2, t_bound: f64) -> Result<Seidenfeld> {
    if !(t_bound > 0.0) {
        return Err(Error::invalid("t_bound must be positive"));
    }
    let interval = ParamInterval::new(-t_bound, t_bound)?;
    let curve = Curve::parse("t^3", "t", "t", interval)?;
    let scenario = Scenario::new(curve, GaussianNoise::identity(), x)?;
    let kernel = format!(
        "exp(-(({} - t^3)^2 + ({} - t)^2)/2)",
        literal(x.x),
        literal(x.y)
    );
    let g1 = expr::parse(&kernel, &["t"])?;
    let g2 = expr::parse(&format!("3*t^2*{kernel}"), &["t"])?;
    Ok(Seidenfeld {
        scenario,
        uniform_t: QuadratureReference::new(g1, interval)?,
        uniform_t3: QuadratureReference::new(g2, interval)?,
    })
}

/// The line `p0 + t·e` with a Jeffreys reference under noise `noise`.
pub fn line_scenario_with_noise(
    p0: Point2,
    e: Vec2,
    interval: ParamInterval,
    x: Point2,
    noise: GaussianNoise,
) -> Result<(Scenario, TruncatedGaussian1D)> {
    if !p0.is_finite() || !e.is_finite() || (e.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("line direction must be a unit vector"));
    }
    let mu1 = format!("{} + t*{}", literal(p0.x), literal(e.x));
    let mu2 = format!("{} + t*{}", literal(p0.y), literal(e.y));
    let curve = Curve::parse(&mu1, &mu2, "t", interval)?;
    let [[a, b], [_, c]] = noise.precision();
    let pe = Vec2::new(a * e.x + b * e.y, b * e.x + c * e.y);
    let info = pe.dot(e);
    let mean = pe.dot(x - p0) / info;
    let reference = TruncatedGaussian1D::new(mean, 1.0 / info.sqrt(), interval)?;
    Ok((Scenario::new(curve, noise, x)?, reference))
}

/// The line `p0 + t·e` with identity noise.
pub fn line_scenario(
    p0: Point2,
    e: Vec2,
    interval: ParamInterval,
    x: Point2,
) -> Result<(Scenario, TruncatedGaussian1D)> {
    line_scenario_with_noise(p0, e, interval, x, GaussianNoise::identity())
}

/// The circle of radius `r` about the origin on `[0, 2π]`.
pub fn circle_scenario(r: f64, x: Point2) -> Result<(Scenario, VonMises)> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid("radius must be positive"));
    }
    if x.x == 0.0 && x.y == 0.0 {
        return Err(Error::invalid(
            "observation at the centre has no mean angle",
        ));
    }
    let interval = ParamInterval::new(0.0, 2.0 * PI)?;
    let curve = Curve::parse(
        &format!("{}*cos(t)", literal(r)),
        &format!("{}*sin(t)", literal(r)),
        "t",
        interval,
    )?;
    let reference = VonMises::new(x.y.atan2(x.x), r * x.norm())?;
    Ok((
        Scenario::new(curve, GaussianNoise::identity(), x)?,
        reference,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::normalize_default;
    use crate::priors::PriorWeight;

    fn simpson_f(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        simpson(|t| Ok(f(t)), a, b, n).unwrap()
    }

    #[test]
    fn bessel_values() {
        // scipy.special.iv
        assert!((bessel_i(0, 1.0) - 1.266_065_877_752_008_4).abs() < 1e-15);
        assert!((bessel_i(1, 2.0) - 1.590_636_854_637_329).abs() < 1e-14);
        assert!((bessel_i(0, 0.0) - 1.0).abs() == 0.0);
        assert!((bessel_i(3, 5.0) - 10.331_150_169_151_138).abs() < 1e-12);
    }

    #[test]
    fn references_are_normalized() {
        let s = seidenfeld(Vec2::new(1.0, 1.0), 2.0).unwrap();
        for r in [&s.uniform_t, &s.uniform_t3] {
            let m = simpson_f(|t| r.pdf(t).unwrap(), -2.0, 2.0, 100_000);
            assert!((m - 1.0).abs() < 1e-8);
        }
        let tg =
            TruncatedGaussian1D::new(1.0, 2.0, ParamInterval::new(-1.0, 4.0).unwrap()).unwrap();
        assert!((simpson_f(|t| tg.pdf(t), -1.0, 4.0, 10_000) - 1.0).abs() < 1e-10);
        assert_eq!(tg.cdf(4.0), 1.0);
        let vm = VonMises::new(2.0, 3.0).unwrap();
        assert!((simpson_f(|t| vm.pdf(t), 0.0, 2.0 * PI, 10_000) - 1.0).abs() < 1e-10);
        assert!((vm.cdf(2.0 * PI) - 1.0).abs() < 1e-14);
        assert!(vm.cdf(0.0).abs() < 1e-15);
    }

    #[test]
    fn von_mises_cdf_matches_quadrature() {
        let vm = VonMises::new(1.0, 4.0).unwrap();
        for t in [0.3, 1.0, 2.5, 5.9] {
            let q = simpson_f(|s| vm.pdf(s), 0.0, t, 20_000);
            assert!((vm.cdf(t) - q).abs() < 1e-12, "{t}");
        }
    }

    #[test]
    fn seidenfeld_symmetry() {
        let s = seidenfeld(Vec2::new(0.0, 0.0), 2.0).unwrap();
        assert_eq!(s.uniform_t3.pdf(0.0).unwrap(), 0.0);
        for t in [0.1, 0.7, 1.5] {
            assert!(s.uniform_t.pdf(t).unwrap() < s.uniform_t.pdf(0.0).unwrap());
            assert_eq!(s.uniform_t.pdf(t).unwrap(), s.uniform_t.pdf(-t).unwrap());
        }
        assert!(seidenfeld(Vec2::new(0.0, 0.0), 0.0).is_err());
    }

    #[test]
    fn seidenfeld_engine_matches_reference() {
        let s = seidenfeld(Vec2::new(1.0, 1.0), 2.0).unwrap();
        let rf = normalize_default(
            &s.scenario,
            &PriorWeight::shift(Vec2::new(1.0, 0.0)).unwrap(),
        )
        .unwrap();
        for t in ParamInterval::new(-2.0, 2.0).unwrap().linspace(1001) {
            assert!((rf.pdf(t).unwrap() - s.uniform_t.pdf(t).unwrap()).abs() <= 1e-10);
        }
    }

    #[test]
    fn line_references() {
        let iv = ParamInterval::new(-10.0, 10.0).unwrap();
        let (_, r) = line_scenario(
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            iv,
            Vec2::new(1.0, 1.0),
        )
        .unwrap();
        assert!((r.mean - 1.0).abs() < 1e-15 && r.sd == 1.0);
        let e = Vec2::new(0.6, 0.8);
        let (_, r) =
            line_scenario(Vec2::new(1.0, -1.0), e, iv, Vec2::new(1.0, -1.0) + e * 3.0).unwrap();
        assert!((r.mean - 3.0).abs() < 1e-14);
        let noise = GaussianNoise::isotropic(4.0).unwrap();
        let (_, r) = line_scenario_with_noise(
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            iv,
            Vec2::new(0.0, 0.0),
            noise,
        )
        .unwrap();
        assert!((r.sd - 2.0).abs() < 1e-15);
        assert!(line_scenario(
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 1.0),
            iv,
            Vec2::new(0.0, 0.0)
        )
        .is_err());
    }

    #[test]
    fn correlated_line_matches_engine() {
        let iv = ParamInterval::new(-6.0, 6.0).unwrap();
        let noise = GaussianNoise::new([[2.0, 0.7], [0.7, 1.0]]).unwrap();
        let e = Vec2::new(0.6, -0.8);
        let (s, r) =
            line_scenario_with_noise(Vec2::new(0.5, 0.2), e, iv, Vec2::new(1.0, 2.0), noise)
                .unwrap();
        let rf = normalize_default(&s, &PriorWeight::Jeffreys).unwrap();
        for t in iv.linspace(301) {
            assert!((rf.pdf(t).unwrap() - r.pdf(t)).abs() < 1e-10);
        }
        for p in [0.05, 0.5, 0.95] {
            assert!((rf.quantile(p).unwrap() - r.quantile(p)).abs() < 1e-7);
        }
    }

    #[test]
    fn circle_references() {
        let (_, vm) = circle_scenario(1.0, Vec2::new(2.0, 0.0)).unwrap();
        assert_eq!((vm.mean_angle, vm.kappa), (0.0, 2.0));
        let (_, vm) = circle_scenario(1.0, Vec2::new(0.0, 3.0)).unwrap();
        assert!((vm.mean_angle - PI / 2.0).abs() < 1e-15 && vm.kappa == 3.0);
        assert!(circle_scenario(1.0, Vec2::new(0.0, 0.0)).is_err());
        assert!(circle_scenario(0.0, Vec2::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn circle_density_ratio() {
        let (s, vm) = circle_scenario(1.0, Vec2::new(-1.0, 1.5)).unwrap();
        let rf = normalize_default(&s, &PriorWeight::Jeffreys).unwrap();
        let m = vm.mean_angle.rem_euclid(2.0 * PI);
        let opposite = (m + PI).rem_euclid(2.0 * PI);
        let ratio = rf.pdf(m).unwrap() / rf.pdf(opposite).unwrap();
        let expected = (2.0 * vm.kappa).exp();
        assert!((ratio / expected - 1.0).abs() < 1e-6);
    }
}
