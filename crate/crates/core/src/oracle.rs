//! Monte Carlo conditioning oracles.
//!
//! Both oracles draw `θ = x − u` from the unrestricted fiducial and keep
//! the draws that land near the string. The slab oracle conditions on the
//! shift coordinate `|s| < ε` of `θ = μ(t) + s·d`; the tube oracle on
//! Euclidean distance `< ε`. In the limit they realize the Shift{d} and
//! Jeffreys restricted fiducials respectively.
//!
//! Proposals run in fixed-size batches, each with its own ChaCha stream of
//! the run seed, and merge in batch order, so output does not depend on
//! the number of threads.

use std::collections::HashMap;

use rand::SeedableRng;
use rayon::prelude::*;

use crate::engine::{self, RestrictedFiducial, Scenario};
use crate::error::{Error, Result};
use crate::expr::{self, Expression};
use crate::geometry::{Curve, Point2, Vec2};
use crate::noise::SeededRng;
use crate::priors::PriorWeight;

pub const DEFAULT_GRID: usize = 8_192;
const BATCH: u64 = 1 << 16;
const MAX_FAILURE_FRACTION: f64 = 1e-3;
const ROOT_ITERATIONS: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    Tube,
    Slab,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    pub epsilon: f64,
    pub n_proposed: u64,
    pub seed: u64,
    /// Curve sampling density for the acceptance search.
    pub grid_n: usize,
    /// Skip exact inversion for proposals the bucket grid rules out.
    pub prefilter: bool,
}

impl OracleOptions {
    pub fn new(epsilon: f64, n_proposed: u64, seed: u64) -> Self {
        OracleOptions {
            epsilon,
            n_proposed,
            seed,
            grid_n: DEFAULT_GRID,
            prefilter: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon must be positive and finite"));
        }
        if self.n_proposed == 0 {
            return Err(Error::invalid("n_proposed must be at least 1"));
        }
        if self.grid_n < 64 {
            return Err(Error::invalid("grid_n must be at least 64"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub kind: OracleKind,
    pub accepted_t: Vec<f64>,
    pub n_proposed: u64,
    pub acceptance_rate: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Proposals discarded because the slab coordinates were ambiguous.
    pub failures: u64,
    /// KS distance to the engine density of the matching prior.
    pub ks_distance: f64,
}

impl OracleResult {
    pub fn n_accepted(&self) -> usize {
        self.accepted_t.len()
    }
}

/// Curve samples shared by both oracles.
struct Samples {
    t: Vec<f64>,
    p: Vec<Point2>,
    /// Upper bound on the arc length of each cell `[t_k, t_{k+1}]`.
    arc: Vec<f64>,
}

impl Samples {
    fn new(curve: &Curve, n: usize) -> Result<Self> {
        let t = curve.interval().linspace(n);
        let mut p = Vec::with_capacity(n);
        let mut speed = Vec::with_capacity(n);
        for &ti in &t {
            let (pi, vi) = curve.point_velocity_unchecked(ti)?;
            p.push(pi);
            speed.push(vi.norm());
        }
        // Twice the larger of the endpoint speeds and the chord rate covers
        // the speed variation within a cell at any usable sampling density.
        let arc = (0..n - 1)
            .map(|k| {
                let w = t[k + 1] - t[k];
                let chord = (p[k + 1] - p[k]).norm() / w;
                2.0 * speed[k].max(speed[k + 1]).max(chord) * w
            })
            .collect();
        Ok(Samples { t, p, arc })
    }
}

/// Standard one-sample KS statistic against `cdf`.
pub fn ks_distance_by(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    assert!(!samples.is_empty(), "KS distance needs at least one sample");
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let f = cdf(t);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
        .clamp(0.0, 1.0)
}

pub fn ks_distance(samples: &[f64], rf: &RestrictedFiducial) -> f64 {
    ks_distance_by(samples, |t| rf.cdf(t))
}

/// Two-sample KS statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "KS distance needs samples");
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Per-batch outcome.
#[derive(Default)]
struct Batch {
    accepted: Vec<f64>,
    failures: u64,
}

fn run_batches(
    scenario: &Scenario,
    opts: &OracleOptions,
    decide: impl Fn(Point2) -> Result<Decision> + Sync,
) -> Result<(Vec<f64>, u64)> {
    let n_batches = opts.n_proposed.div_ceil(BATCH);
    let batches = (0..n_batches)
        .into_par_iter()
        .map(|k| {
            let mut rng = SeededRng::seed_from_u64(opts.seed);
            rng.set_stream(k);
            let size = BATCH.min(opts.n_proposed - k * BATCH);
            let mut out = Batch::default();
            for _ in 0..size {
                let theta = scenario.x - scenario.noise.draw(&mut rng);
                match decide(theta)? {
                    Decision::Accept(t) => out.accepted.push(t),
                    Decision::Reject => {}
                    Decision::Ambiguous => out.failures += 1,
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<Batch>>>()?;
    let failures = batches.iter().map(|b| b.failures).sum();
    let accepted = batches.into_iter().flat_map(|b| b.accepted).collect();
    Ok((accepted, failures))
}

enum Decision {
    Accept(f64),
    Reject,
    Ambiguous,
}

fn finish(
    kind: OracleKind,
    scenario: &Scenario,
    prior: PriorWeight,
    opts: &OracleOptions,
    accepted_t: Vec<f64>,
    failures: u64,
) -> Result<OracleResult> {
    if failures as f64 > MAX_FAILURE_FRACTION * opts.n_proposed as f64 {
        return Err(Error::InversionFailure {
            failures,
            proposals: opts.n_proposed,
        });
    }
    if accepted_t.is_empty() {
        return Err(Error::NoAcceptance);
    }
    let rf = engine::normalize_default(scenario, &prior)?;
    Ok(OracleResult {
        kind,
        ks_distance: ks_distance(&accepted_t, &rf),
        acceptance_rate: accepted_t.len() as f64 / opts.n_proposed as f64,
        accepted_t,
        n_proposed: opts.n_proposed,
        epsilon: opts.epsilon,
        seed: opts.seed,
        failures,
    })
}

// ---------------------------------------------------------------- slab

/// Strictly monotone run of `c(t) = μ(t) × d` over sample cells
/// `first..last`.
struct Piece {
    first: usize,
    last: usize,
    increasing: bool,
    lo: f64,
    hi: f64,
}

struct Slab<'a> {
    curve: &'a Curve,
    d: Vec2,
    d_sq: f64,
    samples: Samples,
    c: Vec<f64>,
    /// Cell bounds of `μ(t)·d / |d|²`, widened by the arc bound.
    a_lo: Vec<f64>,
    a_hi: Vec<f64>,
    pieces: Vec<Piece>,
}

impl<'a> Slab<'a> {
    fn new(curve: &'a Curve, d: Vec2, grid_n: usize) -> Result<Self> {
        let samples = Samples::new(curve, grid_n)?;
        let d_sq = d.norm_sq();
        let c: Vec<f64> = samples.p.iter().map(|p| p.cross(d)).collect();
        let a: Vec<f64> = samples.p.iter().map(|p| p.dot(d) / d_sq).collect();
        let n = c.len();
        let d_norm = d_sq.sqrt();
        let mut a_lo = Vec::with_capacity(n - 1);
        let mut a_hi = Vec::with_capacity(n - 1);
        for k in 0..n - 1 {
            let slack = samples.arc[k] / d_norm;
            a_lo.push(a[k].min(a[k + 1]) - slack);
            a_hi.push(a[k].max(a[k + 1]) + slack);
        }
        let mut pieces = Vec::new();
        let mut k = 0;
        while k < n - 1 {
            let diff = c[k + 1] - c[k];
            if diff == 0.0 {
                k += 1;
                continue;
            }
            let increasing = diff > 0.0;
            let first = k;
            while k < n - 1 && (c[k + 1] - c[k] > 0.0) == increasing && c[k + 1] != c[k] {
                k += 1;
            }
            let (lo, hi) = if increasing {
                (c[first], c[k])
            } else {
                (c[k], c[first])
            };
            pieces.push(Piece {
                first,
                last: k,
                increasing,
                lo,
                hi,
            });
        }
        Ok(Slab {
            curve,
            d,
            d_sq,
            samples,
            c,
            a_lo,
            a_hi,
            pieces,
        })
    }

    /// Cell `k` within `piece` whose `c` range contains `target`.
    fn cell(&self, piece: &Piece, target: f64) -> usize {
        let range = &self.c[piece.first..=piece.last];
        let j = if piece.increasing {
            range.partition_point(|&v| v <= target)
        } else {
            range.partition_point(|&v| v >= target)
        };
        piece.first + j.clamp(1, range.len() - 1) - 1
    }

    /// Root of `c(t) = target` in cell `k`, by bisection.
    fn root(&self, k: usize, target: f64) -> Result<f64> {
        let (mut lo, mut hi) = (self.samples.t[k], self.samples.t[k + 1]);
        let below_lo = self.c[k] < target;
        if self.c[k] == target {
            return Ok(lo);
        }
        if self.c[k + 1] == target {
            return Ok(hi);
        }
        for _ in 0..ROOT_ITERATIONS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let v = self.curve.point_unchecked(mid)?.cross(self.d);
            if v == target {
                return Ok(mid);
            }
            if (v < target) == below_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    fn decide(&self, theta: Point2, eps: f64, prefilter: bool) -> Result<Decision> {
        let target = theta.cross(self.d);
        let b = theta.dot(self.d) / self.d_sq;
        let mut roots = 0;
        let mut hit = None;
        for piece in &self.pieces {
            if !(target >= piece.lo && target <= piece.hi) {
                continue;
            }
            roots += 1;
            let k = self.cell(piece, target);
            if prefilter && (b - self.a_hi[k] >= eps || b - self.a_lo[k] <= -eps) {
                continue;
            }
            let t = self.root(k, target)?;
            let s = (theta - self.curve.point_unchecked(t)?).dot(self.d) / self.d_sq;
            if s.abs() < eps {
                hit = Some(t);
            }
        }
        Ok(match hit {
            Some(_) if roots > 1 => Decision::Ambiguous,
            Some(t) => Decision::Accept(t),
            None => Decision::Reject,
        })
    }
}

/// Accept `θ = μ(t) + s·d` when `|s| < ε`; compares against the engine's
/// Shift{d} density.
pub fn slab_oracle(scenario: &Scenario, d: Vec2, opts: &OracleOptions) -> Result<OracleResult> {
    opts.validate()?;
    let prior = PriorWeight::shift(d)?;
    let slab = Slab::new(&scenario.curve, d, opts.grid_n)?;
    let (accepted, failures) = run_batches(scenario, opts, |theta| {
        slab.decide(theta, opts.epsilon, opts.prefilter)
    })?;
    finish(OracleKind::Slab, scenario, prior, opts, accepted, failures)
}

// ---------------------------------------------------------------- tube

struct Tube<'a> {
    curve: &'a Curve,
    samples: Samples,
    /// Any curve point within `ε` has a sample within `reach`.
    reach: f64,
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<u32>>,
}

impl<'a> Tube<'a> {
    fn new(curve: &'a Curve, eps: f64, grid_n: usize) -> Result<Self> {
        let samples = Samples::new(curve, grid_n)?;
        let half_arc = 0.5 * samples.arc.iter().copied().fold(0.0, f64::max);
        let reach = eps + half_arc;
        let cell = reach;
        let mut buckets: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for (i, p) in samples.p.iter().enumerate() {
            buckets.entry(bucket(*p, cell)).or_default().push(i as u32);
        }
        Ok(Tube {
            curve,
            samples,
            reach,
            cell,
            buckets,
        })
    }

    /// Samples within `reach` of `p`, in index order.
    fn near(&self, p: Point2, prefilter: bool) -> Vec<usize> {
        let r2 = self.reach * self.reach;
        let mut out = Vec::new();
        if prefilter {
            let (bx, by) = bucket(p, self.cell);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(ids) = self.buckets.get(&(bx + dx, by + dy)) {
                        out.extend(
                            ids.iter()
                                .map(|&i| i as usize)
                                .filter(|&i| (p - self.samples.p[i]).norm_sq() < r2),
                        );
                    }
                }
            }
            out.sort_unstable();
        } else {
            out.extend(
                (0..self.samples.p.len()).filter(|&i| (p - self.samples.p[i]).norm_sq() < r2),
            );
        }
        out
    }

    /// Nearest point on `[t_{i−1}, t_{i+1}]`.
    fn refine(&self, p: Point2, i: usize) -> Result<(f64, f64)> {
        let ts = &self.samples.t;
        let (lo0, hi0) = (ts[i.saturating_sub(1)], ts[(i + 1).min(ts.len() - 1)]);
        let slope = |t: f64| -> Result<f64> {
            let (m, v) = self.curve.point_velocity_unchecked(t)?;
            Ok((p - m).dot(v))
        };
        let mut best = (ts[i], (p - self.samples.p[i]).norm_sq());
        for t in [lo0, hi0] {
            let d2 = (p - self.curve.point_unchecked(t)?).norm_sq();
            if d2 < best.1 {
                best = (t, d2);
            }
        }
        let (mut lo, mut hi) = (lo0, hi0);
        if slope(lo)? > 0.0 && slope(hi)? < 0.0 {
            while hi - lo > 1e-12 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if slope(mid)? > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t = 0.5 * (lo + hi);
            let d2 = (p - self.curve.point_unchecked(t)?).norm_sq();
            if d2 < best.1 {
                best = (t, d2);
            }
        }
        Ok(best)
    }

    fn decide(&self, p: Point2, eps: f64, prefilter: bool) -> Result<Decision> {
        let near = self.near(p, prefilter);
        if near.is_empty() {
            return Ok(Decision::Reject);
        }
        let dist = |i: usize| (p - self.samples.p[i]).norm_sq();
        let n = self.samples.t.len();
        let mut best: Option<(f64, f64)> = None;
        for &i in &near {
            let di = dist(i);
            let local_min = (i == 0 || di <= dist(i - 1)) && (i + 1 == n || di <= dist(i + 1));
            if !local_min {
                continue;
            }
            let cand = self.refine(p, i)?;
            if best.is_none_or(|b| cand.1 < b.1) {
                best = Some(cand);
            }
        }
        Ok(match best {
            Some((t, d2)) if d2.sqrt() < eps => Decision::Accept(t),
            _ => Decision::Reject,
        })
    }
}

fn bucket(p: Point2, cell: f64) -> (i64, i64) {
    ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
}

/// Accept `θ` within Euclidean distance `ε` of the curve and record the
/// parameter of the nearest point; compares against the engine's Jeffreys
/// density.
pub fn tube_oracle(scenario: &Scenario, opts: &OracleOptions) -> Result<OracleResult> {
    opts.validate()?;
    let tube = Tube::new(&scenario.curve, opts.epsilon, opts.grid_n)?;
    let (accepted, failures) = run_batches(scenario, opts, |theta| {
        tube.decide(theta, opts.epsilon, opts.prefilter)
    })?;
    finish(
        OracleKind::Tube,
        scenario,
        PriorWeight::Jeffreys,
        opts,
        accepted,
        failures,
    )
}

// ------------------------------------------------ slab density by Jacobian

fn literal(v: f64) -> String {
    format!("({v:?})")
}

/// `θ(t, s) = μ(t) + s·d` as expressions in the curve parameter and `nu_s`.
fn theta_map(curve: &Curve, d: Vec2) -> Result<[Expression; 2]> {
    let comp = |mu: &Expression, di: f64| -> Result<Expression> {
        let e = expr::parse(&format!("m + nu_s*{}", literal(di)), &["m", "nu_s"])?;
        Ok(e.substitute("m", mu)?)
    };
    Ok([comp(curve.mu1(), d.x)?, comp(curve.mu2(), d.y)?])
}

/// `u(t, s) = x − μ(t) − s·d`.
fn u_map(scenario: &Scenario, d: Vec2) -> Result<[Expression; 2]> {
    let comp = |xi: f64, mu: &Expression, di: f64| -> Result<Expression> {
        let e = expr::parse(
            &format!("{} - m - nu_s*{}", literal(xi), literal(di)),
            &["m", "nu_s"],
        )?;
        Ok(e.substitute("m", mu)?)
    };
    let c = &scenario.curve;
    Ok([
        comp(scenario.x.x, c.mu1(), d.x)?,
        comp(scenario.x.y, c.mu2(), d.y)?,
    ])
}

fn jacobian_at(map: &[Expression; 2], param: &str, t: f64) -> Result<(Vec2, f64)> {
    let at = [(param, t), ("nu_s", 0.0)];
    let mut value = [0.0; 2];
    let mut jac = [[0.0; 2]; 2];
    for (i, e) in map.iter().enumerate() {
        let dt = e.eval_dual(&at, param)?;
        let ds = e.eval_dual(&at, "nu_s")?;
        value[i] = dt.value;
        jac[i] = [dt.deriv, ds.deriv];
    }
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    Ok((Vec2::new(value[0], value[1]), det.abs()))
}

/// Density of `(t, s)` at `s = 0` when `θ = x − u` is pushed through the
/// inverse of `(t, s) ↦ μ(t) + s·d`.
pub fn slab_density_theta(scenario: &Scenario, d: Vec2, t: f64) -> Result<f64> {
    scenario.curve.interval().check(t)?;
    let map = theta_map(&scenario.curve, d)?;
    let (theta, jac) = jacobian_at(&map, scenario.curve.param(), t)?;
    Ok(scenario.noise.density(scenario.x - theta) * jac)
}

/// The same density built in noise coordinates `u = x − μ(t) − s·d`.
pub fn slab_density_u(scenario: &Scenario, d: Vec2, t: f64) -> Result<f64> {
    scenario.curve.interval().check(t)?;
    let map = u_map(scenario, d)?;
    let (u, jac) = jacobian_at(&map, scenario.curve.param(), t)?;
    Ok(scenario.noise.density(u) * jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ParamInterval;
    use crate::noise::{seeded_rng, GaussianNoise};

    fn seidenfeld(x: Point2) -> Scenario {
        let curve = Curve::parse("t^3", "t", "t", ParamInterval::new(-2.0, 2.0).unwrap()).unwrap();
        Scenario::new(curve, GaussianNoise::identity(), x).unwrap()
    }

    fn origin() -> Point2 {
        Vec2::new(0.0, 0.0)
    }

    #[test]
    fn ks_edge_cases() {
        let rf = engine::normalize_default(&seidenfeld(origin()), &PriorWeight::Jeffreys).unwrap();
        let median = rf.quantile(0.5).unwrap();
        assert!((ks_distance(&[median], &rf) - 0.5).abs() < 1e-9);
        assert_eq!(ks_distance_by(&[0.5], |t| t), 0.5);
        assert!((ks_distance_by(&[0.25, 0.75], |t| t) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ks_of_exact_draws_is_small() {
        let rf = engine::normalize_default(&seidenfeld(origin()), &PriorWeight::Jeffreys).unwrap();
        let n = 100_000;
        let draws = rf.sample(&mut seeded_rng(11), n);
        assert!(ks_distance(&draws, &rf) <= 1.95 / (n as f64).sqrt());
        let right = PriorWeight::shift(Vec2::new(1.0, 0.0)).unwrap();
        let other = engine::normalize_default(&seidenfeld(origin()), &right).unwrap();
        assert!(ks_distance(&draws, &other) > 0.05);
    }

    #[test]
    fn two_sample_ks() {
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert!((ks_two_sample(&[1.0, 3.0], &[2.0, 4.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn options_are_validated() {
        let s = seidenfeld(origin());
        let d = Vec2::new(1.0, 0.0);
        assert!(slab_oracle(&s, d, &OracleOptions::new(0.0, 10, 1)).is_err());
        assert!(slab_oracle(&s, d, &OracleOptions::new(0.01, 0, 1)).is_err());
        assert!(slab_oracle(&s, Vec2::new(0.0, 0.0), &OracleOptions::new(0.01, 10, 1)).is_err());
        assert!(tube_oracle(&s, &OracleOptions::new(-1.0, 10, 1)).is_err());
        let far = seidenfeld(Vec2::new(0.0, 50.0));
        assert_eq!(
            tube_oracle(&far, &OracleOptions::new(0.01, 100, 1)).unwrap_err(),
            Error::NoAcceptance
        );
    }

    #[test]
    fn prefilter_does_not_change_results() {
        let s = seidenfeld(Vec2::new(1.0, 1.0));
        let mut opts = OracleOptions::new(0.02, 40_000, 3);
        opts.grid_n = 2_048;
        let tube_fast = tube_oracle(&s, &opts).unwrap();
        let slab_fast = slab_oracle(&s, Vec2::new(0.0, 1.0), &opts).unwrap();
        opts.prefilter = false;
        let tube_slow = tube_oracle(&s, &opts).unwrap();
        let slab_slow = slab_oracle(&s, Vec2::new(0.0, 1.0), &opts).unwrap();
        assert!(tube_fast.n_accepted() > 100);
        assert!(slab_fast.n_accepted() > 100);
        assert_eq!(tube_fast, tube_slow);
        assert_eq!(slab_fast, slab_slow);
    }

    #[test]
    fn tube_matches_global_projection() {
        let s = seidenfeld(Vec2::new(1.0, 1.0));
        let tube = Tube::new(&s.curve, 0.05, 2_048).unwrap();
        let noise = GaussianNoise::identity();
        let mut rng = seeded_rng(21);
        let mut checked = 0;
        for _ in 0..20_000 {
            let p = s.x - noise.draw(&mut rng);
            if let Decision::Accept(t) = tube.decide(p, 0.05, true).unwrap() {
                let global = s.curve.project(p, 20_000).unwrap();
                assert!((t - global).abs() < 1e-8, "{t} vs {global}");
                checked += 1;
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn batches_are_seed_streams() {
        let s = seidenfeld(origin());
        let opts = OracleOptions::new(0.02, 2 * BATCH + 17, 9);
        let a = tube_oracle(&s, &opts).unwrap();
        let b = tube_oracle(&s, &opts).unwrap();
        assert_eq!(a.accepted_t, b.accepted_t);
        let single = OracleOptions::new(0.02, BATCH, 9);
        let first = tube_oracle(&s, &single).unwrap();
        assert_eq!(&a.accepted_t[..first.n_accepted()], &first.accepted_t[..]);
    }

    #[test]
    fn slab_axis_inversions_are_exact() {
        let s = seidenfeld(origin());
        let slab = Slab::new(&s.curve, Vec2::new(0.0, 1.0), 1_024).unwrap();
        // θ = μ(t) + s·(0, 1) with t = 1.3, s = 0.004
        let theta = Vec2::new(1.3f64.powi(3), 1.3 + 0.004);
        match slab.decide(theta, 0.01, true).unwrap() {
            Decision::Accept(t) => assert!((t - 1.3).abs() < 1e-12),
            _ => panic!("expected acceptance"),
        }
        let slab = Slab::new(&s.curve, Vec2::new(1.0, 0.0), 1_024).unwrap();
        let theta = Vec2::new(0.7f64.powi(3) - 0.009, 0.7);
        match slab.decide(theta, 0.01, true).unwrap() {
            Decision::Accept(t) => assert!((t - 0.7).abs() < 1e-12),
            _ => panic!("expected acceptance"),
        }
        assert!(matches!(
            slab.decide(theta, 0.005, true).unwrap(),
            Decision::Reject
        ));
    }

    #[test]
    fn ambiguous_slab_inversions_are_counted() {
        // a parabola is folded over the direction (1, 0): two roots per level
        let curve =
            Curve::parse("t^2", "t^2", "t", ParamInterval::new(-1.0, 1.0).unwrap()).unwrap();
        let slab = Slab::new(&curve, Vec2::new(1.0, 0.0), 1_024).unwrap();
        assert_eq!(slab.pieces.len(), 2);
        let theta = Vec2::new(0.25, 0.25);
        assert!(matches!(
            slab.decide(theta, 0.01, true).unwrap(),
            Decision::Ambiguous
        ));
        let s = Scenario::new(curve, GaussianNoise::identity(), Vec2::new(0.3, 0.3)).unwrap();
        assert!(matches!(
            slab_oracle(
                &s,
                Vec2::new(1.0, 0.0),
                &OracleOptions::new(0.01, 20_000, 1)
            ),
            Err(Error::InversionFailure { .. })
        ));
    }

    #[test]
    fn u_and_theta_constructions_agree() {
        for x in [origin(), Vec2::new(1.0, 1.0), Vec2::new(-2.0, 0.5)] {
            let s = seidenfeld(x);
            for d in [
                Vec2::new(1.0, 0.0),
                Vec2::new(0.0, 1.0),
                Vec2::new(0.6, -1.3),
            ] {
                let prior = PriorWeight::shift(d).unwrap();
                for i in 0..=40 {
                    let t = -2.0 + 0.1 * i as f64;
                    let a = slab_density_theta(&s, d, t).unwrap();
                    let b = slab_density_u(&s, d, t).unwrap();
                    let g = engine::unnormalized_density(&s, &prior, t).unwrap();
                    assert!((a - b).abs() <= 1e-12 * a.max(1e-300), "{a} vs {b}");
                    assert!((a - g).abs() <= 1e-12 * g.max(1e-300), "{a} vs {g}");
                }
            }
        }
    }

    #[test]
    fn seidenfeld_oracles_agree_with_engine() {
        let s = seidenfeld(origin());
        let opts = OracleOptions::new(0.01, 3_000_000, 42);
        for d in [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)] {
            let r = slab_oracle(&s, d, &opts).unwrap();
            let floor = 1.95 / (r.n_accepted() as f64).sqrt();
            assert!(
                r.ks_distance <= floor + 0.005,
                "slab {d:?}: {}",
                r.ks_distance
            );
        }
        let r = tube_oracle(&s, &opts).unwrap();
        let floor = 1.95 / (r.n_accepted() as f64).sqrt();
        assert!(r.ks_distance <= floor + 0.005, "tube: {}", r.ks_distance);
    }

    #[test]
    fn acceptance_rate_is_linear_in_epsilon() {
        let s = seidenfeld(origin());
        let rates: Vec<f64> = [0.005, 0.01, 0.02]
            .iter()
            .map(|&e| {
                let r = slab_oracle(
                    &s,
                    Vec2::new(1.0, 0.0),
                    &OracleOptions::new(e, 2_000_000, 5),
                )
                .unwrap();
                r.acceptance_rate / e
            })
            .collect();
        for r in &rates[1..] {
            assert!((r / rates[0] - 1.0).abs() < 0.1, "{rates:?}");
        }
    }
}
