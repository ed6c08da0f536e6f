//! The restricted fiducial on the string.
//!
//! The unnormalized density is `g(t) = f(x − μ(t)) · h(t)`, with `f` the
//! noise density and `h` a [`PriorWeight`]. [`normalize`] integrates `g`
//! adaptively and keeps every quadrature node, so the CDF is tabulated on
//! the same refinement that produced the normalizing constant.
//!
//! To survive observations far from the string, `g` is handled in log
//! space: the log-likelihood plus `ln h` is scouted on a 512-node grid and
//! its maximum is subtracted before exponentiating. All stored values are
//! of this rescaled density; [`RestrictedFiducial::log_z`] restores the
//! true scale.

use rand::Rng;

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::geometry::{Curve, ParamInterval, Point2};
use crate::noise::GaussianNoise;
use crate::priors::PriorWeight;
use crate::quadrature::{self, Panel, QuadError, PANEL_NODES};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_NODES: usize = 4_000_000;
const SCOUT_NODES: usize = 512;
const QUANTILE_TOL: f64 = 1e-12;
const MONOTONE_GRID: usize = 1_001;

/// Curve, noise model and one observed point.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub curve: Curve,
    pub noise: GaussianNoise,
    pub x: Point2,
}

impl Scenario {
    pub fn new(curve: Curve, noise: GaussianNoise, x: Point2) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::invalid("observation must be finite"));
        }
        Ok(Scenario { curve, noise, x })
    }

    /// `ln f(x − μ(t))` and `h(t)`.
    fn log_likelihood_and_weight(&self, prior: &PriorWeight, t: f64) -> Result<(f64, f64)> {
        let (p, v) = self.curve.point_velocity_unchecked(t)?;
        let ll = self.noise.log_density(self.x - p);
        Ok((ll, prior.weight_at(p, v, t)?))
    }
}

/// `f(x − μ(t)) · h(t)` without any rescaling.
pub fn unnormalized_density(scenario: &Scenario, prior: &PriorWeight, t: f64) -> Result<f64> {
    scenario.curve.interval().check(t)?;
    let (ll, h) = scenario.log_likelihood_and_weight(prior, t)?;
    Ok(ll.exp() * h)
}

/// Normalized density on a parameter interval, with tabulated CDF.
#[derive(Debug, Clone)]
pub struct RestrictedFiducial {
    scenario: Scenario,
    prior: PriorWeight,
    interval: ParamInterval,
    tol: f64,
    log_shift: f64,
    z_scaled: f64,
    panels: Vec<Panel>,
    nodes: Vec<f64>,
    pdf: Vec<f64>,
    cdf: Vec<f64>,
}

fn scaled_density(scenario: &Scenario, prior: &PriorWeight, shift: f64, t: f64) -> Result<f64> {
    let (ll, h) = scenario.log_likelihood_and_weight(prior, t)?;
    if h == 0.0 {
        return Ok(0.0);
    }
    let g = (ll - shift).exp() * h;
    if !g.is_finite() {
        return Err(Error::invalid(format!("density overflow at t = {t}")));
    }
    Ok(g)
}

/// Normalize `f(x − μ(t)) h(t)` over `interval` (a sub-interval of the
/// curve's) to absolute error `tol · Z`, with at most `max_nodes`
/// quadrature evaluations.
pub fn normalize(
    scenario: &Scenario,
    prior: &PriorWeight,
    interval: ParamInterval,
    tol: f64,
    max_nodes: usize,
) -> Result<RestrictedFiducial> {
    if !(1e-12..=1e-3).contains(&tol) {
        return Err(Error::invalid(format!(
            "tolerance {tol} outside [1e-12, 1e-3]"
        )));
    }
    if !scenario.curve.interval().contains_interval(&interval) {
        return Err(Error::invalid(
            "normalization interval must lie within the curve interval",
        ));
    }

    let scout = interval.linspace(SCOUT_NODES);
    let mut log_g = Vec::with_capacity(SCOUT_NODES);
    for &t in &scout {
        let (ll, h) = scenario.log_likelihood_and_weight(prior, t)?;
        log_g.push(ll + h.ln());
    }
    let shift = log_g
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(Error::Underflow);
    }
    let step = interval.width() / (SCOUT_NODES - 1) as f64;
    let trapezoid: f64 = log_g
        .windows(2)
        .map(|w| 0.5 * step * ((w[0] - shift).exp() + (w[1] - shift).exp()))
        .sum();

    let g = |t: f64| scaled_density(scenario, prior, shift, t);
    let run = |abs_tol: f64| {
        quadrature::integrate(g, &scout, abs_tol, max_nodes).map_err(|e| match e {
            QuadError::Integrand(e) => e,
            QuadError::Budget { evaluations, limit } => Error::NodeBudget { evaluations, limit },
        })
    };
    let mut abs_tol = tol * trapezoid;
    let mut result = run(abs_tol)?;
    // The scouting estimate can overstate Z for peaks narrower than the grid.
    for _ in 0..3 {
        if result.value > 1e-300 && abs_tol > tol * result.value * 1.01 {
            abs_tol = tol * result.value;
            result = run(abs_tol)?;
        } else {
            break;
        }
    }
    let z_scaled = result.value;
    if !(z_scaled.is_finite() && z_scaled > 1e-300) {
        return Err(Error::Underflow);
    }

    let panels = result.panels;
    let total = panels.len() * (PANEL_NODES + 1) + 1;
    let mut nodes = Vec::with_capacity(total);
    let mut pdf = Vec::with_capacity(total);
    let mut cdf = Vec::with_capacity(total);
    let mut acc = 0.0;
    for panel in &panels {
        nodes.push(panel.a);
        pdf.push(g(panel.a)? / z_scaled);
        cdf.push(acc / z_scaled);
        let partial = panel.cumulative();
        for ((&t, &v), &c) in panel.nodes.iter().zip(&panel.values).zip(&partial) {
            nodes.push(t);
            pdf.push(v / z_scaled);
            cdf.push((acc + c) / z_scaled);
        }
        acc += panel.integral;
    }
    nodes.push(interval.max());
    pdf.push(g(interval.max())? / z_scaled);
    cdf.push(1.0);
    cdf[0] = 0.0;
    let mut running = 0.0f64;
    for c in cdf.iter_mut() {
        running = running.max(c.clamp(0.0, 1.0));
        *c = running;
    }

    Ok(RestrictedFiducial {
        scenario: scenario.clone(),
        prior: prior.clone(),
        interval,
        tol,
        log_shift: shift,
        z_scaled,
        panels,
        nodes,
        pdf,
        cdf,
    })
}

/// [`normalize`] over the whole curve with default tolerance and budget.
pub fn normalize_default(scenario: &Scenario, prior: &PriorWeight) -> Result<RestrictedFiducial> {
    normalize(
        scenario,
        prior,
        scenario.curve.interval(),
        DEFAULT_TOL,
        DEFAULT_MAX_NODES,
    )
}

impl RestrictedFiducial {
    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn prior(&self) -> &PriorWeight {
        &self.prior
    }

    pub fn interval(&self) -> ParamInterval {
        self.interval
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// Natural log of the normalizing constant.
    pub fn log_z(&self) -> f64 {
        self.z_scaled.ln() + self.log_shift
    }

    /// The normalizing constant; may underflow to 0 where [`Self::log_z`]
    /// does not.
    pub fn z(&self) -> f64 {
        self.log_z().exp()
    }

    /// Tabulation nodes, strictly increasing.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn tabulated_pdf(&self) -> &[f64] {
        &self.pdf
    }

    pub fn tabulated_cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// Density at `t`, re-evaluated exactly.
    pub fn pdf(&self, t: f64) -> Result<f64> {
        self.interval.check(t)?;
        Ok(scaled_density(&self.scenario, &self.prior, self.log_shift, t)? / self.z_scaled)
    }

    fn segment(&self, t: f64) -> usize {
        let j = self.nodes.partition_point(|&n| n <= t);
        j.saturating_sub(1).min(self.nodes.len() - 2)
    }

    /// Monotone cubic Hermite on segment `j`, slopes from the exact pdf
    /// limited so the interpolant cannot overshoot.
    fn hermite(&self, j: usize, t: f64) -> f64 {
        let (t0, t1) = (self.nodes[j], self.nodes[j + 1]);
        let (c0, c1) = (self.cdf[j], self.cdf[j + 1]);
        let h = t1 - t0;
        let delta = (c1 - c0) / h;
        if delta <= 0.0 {
            return c0;
        }
        let (mut m0, mut m1) = (self.pdf[j], self.pdf[j + 1]);
        let (a, b) = (m0 / delta, m1 / delta);
        let r = a * a + b * b;
        if r > 9.0 {
            let tau = 3.0 / r.sqrt();
            m0 = tau * a * delta;
            m1 = tau * b * delta;
        }
        let s = (t - t0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        (h00 * c0 + h10 * h * m0 + h01 * c1 + h11 * h * m1).clamp(c0, c1)
    }

    /// CDF at `t`, clamped to 0 below and 1 above the interval.
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= self.interval.min() {
            return 0.0;
        }
        if t >= self.interval.max() {
            return 1.0;
        }
        self.hermite(self.segment(t), t).clamp(0.0, 1.0)
    }

    /// Smallest `t` with `cdf(t) >= p`, by bisection on the interpolated CDF.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid(format!("probability {p} outside (0, 1)")));
        }
        let j = self
            .cdf
            .partition_point(|&c| c < p)
            .clamp(1, self.nodes.len() - 1);
        let seg = j - 1;
        let (mut lo, mut hi) = (self.nodes[seg], self.nodes[j]);
        while hi - lo > QUANTILE_TOL {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.hermite(seg, mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `n` inverse-CDF draws.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let u = loop {
                    let u: f64 = rng.random();
                    if u > 0.0 {
                        break u;
                    }
                };
                self.quantile(u).expect("uniform draw lies in (0, 1)")
            })
            .collect()
    }

    /// Posterior mean of `t`, from the stored quadrature panels.
    pub fn mean(&self) -> f64 {
        self.panels
            .iter()
            .map(|p| p.weighted_integral(|t| t))
            .sum::<f64>()
            / self.z_scaled
    }

    /// Tabulation node with the largest density.
    pub fn mode(&self) -> f64 {
        let mut best = 0;
        for (i, &v) in self.pdf.iter().enumerate() {
            if v > self.pdf[best] {
                best = i;
            }
        }
        self.nodes[best]
    }

    /// Re-integrate the exact pdf on an independent panel layout.
    pub fn total_mass(&self) -> Result<f64> {
        let breaks = self.interval.linspace(97);
        quadrature::integrate(|t| self.pdf(t), &breaks, 1e-11, DEFAULT_MAX_NODES)
            .map(|r| r.value)
            .map_err(|e| match e {
                QuadError::Integrand(e) => e,
                QuadError::Budget { evaluations, limit } => {
                    Error::NodeBudget { evaluations, limit }
                }
            })
    }
}

/// Density of `y = φ(t)` when `t` follows a restricted fiducial.
#[derive(Debug, Clone)]
pub struct Pushforward<'a> {
    rf: &'a RestrictedFiducial,
    phi: Expression,
    increasing: bool,
    range: (f64, f64),
}

impl<'a> Pushforward<'a> {
    /// `phi` must be strictly monotone on the interval, checked on a
    /// 1001-point grid.
    pub fn new(rf: &'a RestrictedFiducial, phi: Expression) -> Result<Self> {
        if phi.vars().len() != 1 {
            return Err(Error::invalid("pushforward map must be in one variable"));
        }
        let grid = rf.interval.linspace(MONOTONE_GRID);
        let values = grid
            .iter()
            .map(|&t| phi.eval_at(&[t]))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let increasing = values[1] > values[0];
        for (w, t) in values.windows(2).zip(&grid) {
            let ok = if increasing { w[1] > w[0] } else { w[1] < w[0] };
            if !ok {
                return Err(Error::NonMonotone { at: *t });
            }
        }
        let (first, last) = (values[0], values[values.len() - 1]);
        let range = if increasing {
            (first, last)
        } else {
            (last, first)
        };
        Ok(Pushforward {
            rf,
            phi,
            increasing,
            range,
        })
    }

    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    /// `φ⁻¹(y)` by bisection.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        if !(y >= self.range.0 && y <= self.range.1) {
            return Err(Error::invalid(format!(
                "{y} outside the image [{}, {}]",
                self.range.0, self.range.1
            )));
        }
        let (mut lo, mut hi) = (self.rf.interval.min(), self.rf.interval.max());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let below = self.phi.eval_at(&[mid])? < y;
            if below == self.increasing {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `pdf(φ⁻¹(y)) / |φ'(φ⁻¹(y))|`
    pub fn pdf(&self, y: f64) -> Result<f64> {
        let t = self.inverse(y)?;
        let slope = self.phi.eval_dual_at(&[t], 0)?.deriv.abs();
        if slope == 0.0 {
            return Err(Error::invalid(format!("map is stationary at t = {t}")));
        }
        Ok(self.rf.pdf(t)? / slope)
    }
}

/// One-shot form of [`Pushforward::pdf`].
pub fn pushforward_pdf(rf: &RestrictedFiducial, phi: &Expression, y: f64) -> Result<f64> {
    Pushforward::new(rf, phi.clone())?.pdf(y)
}
