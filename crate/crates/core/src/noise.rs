//! Zero-mean bivariate Gaussian error model.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::Vec2;

/// Portable seeded generator used by every sampler in the crate.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

/// `N(0, Σ)` on the plane with precomputed inverse, Cholesky factor and
/// log normalizer.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNoise {
    cov: [[f64; 2]; 2],
    inv: [[f64; 2]; 2],
    chol: [f64; 3],
    log_norm: f64,
}

impl GaussianNoise {
    pub fn new(cov: [[f64; 2]; 2]) -> Result<Self> {
        if cov.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite);
        }
        let [[a, b], [c, d]] = cov;
        if (b - c).abs() > 1e-12 {
            return Err(Error::AsymmetricCovariance);
        }
        let b = 0.5 * (b + c);
        if a <= 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        let l11 = a.sqrt();
        let l21 = b / l11;
        let rem = d - l21 * l21;
        if rem <= 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        let l22 = rem.sqrt();
        let det = a * d - b * b;
        Ok(GaussianNoise {
            cov: [[a, b], [b, d]],
            inv: [[d / det, -b / det], [-b / det, a / det]],
            chol: [l11, l21, l22],
            log_norm: -(2.0 * PI).ln() - (l11 * l22).ln(),
        })
    }

    pub fn identity() -> Self {
        GaussianNoise::new([[1.0, 0.0], [0.0, 1.0]]).unwrap()
    }

    pub fn isotropic(variance: f64) -> Result<Self> {
        GaussianNoise::new([[variance, 0.0], [0.0, variance]])
    }

    pub fn cov(&self) -> [[f64; 2]; 2] {
        self.cov
    }

    pub fn precision(&self) -> [[f64; 2]; 2] {
        self.inv
    }

    /// uᵀ Σ⁻¹ u
    pub fn mahalanobis_sq(&self, u: Vec2) -> f64 {
        let [[p, q], [_, r]] = self.inv;
        p * u.x * u.x + 2.0 * q * u.x * u.y + r * u.y * u.y
    }

    pub fn log_density(&self, u: Vec2) -> f64 {
        self.log_norm - 0.5 * self.mahalanobis_sq(u)
    }

    pub fn density(&self, u: Vec2) -> f64 {
        self.log_density(u).exp()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec2 {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let [l11, l21, l22] = self.chol;
        Vec2::new(l11 * z1, l21 * z1 + l22 * z2)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<Vec2> {
        (0..n).map(|_| self.draw(rng)).collect()
    }
}
