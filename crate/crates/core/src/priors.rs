//! Prior weights `h(t)` that multiply the likelihood along the string.

use crate::error::{Error, Result};
use crate::expr::{self, Expression};
use crate::geometry::{Curve, Point2, Vec2};

/// Variable names a condition function is written in.
pub const CONDITION_VARS: [&str; 2] = ["theta1", "theta2"];

/// How a condition `C(θ) = c` turns into a weight along the curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionMode {
    /// `h = |∇C| |μ'|`
    Product,
    /// `h = |μ'| / |∇C|`, the coarea weighting of the level set.
    Coarea,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PriorWeight {
    /// `h = |μ'|`, uniform in arc length.
    Jeffreys,
    /// `h = |c₁μ₁' + c₂μ₂'|`
    Linear { c: Vec2 },
    /// `h = |μ₁'d₂ − μ₂'d₁|`, the velocity component orthogonal to the
    /// shift direction `d`, scaled by `|d|`.
    Shift { d: Vec2 },
    Condition {
        condition: Expression,
        mode: ConditionMode,
    },
}

fn nonzero_finite(v: Vec2, what: &str) -> Result<Vec2> {
    if !v.is_finite() {
        return Err(Error::invalid(format!("{what} must be finite")));
    }
    if v.x == 0.0 && v.y == 0.0 {
        return Err(Error::invalid(format!("{what} must be non-zero")));
    }
    Ok(v)
}

impl PriorWeight {
    pub fn linear(c: Vec2) -> Result<Self> {
        Ok(PriorWeight::Linear {
            c: nonzero_finite(c, "linear prior coefficients")?,
        })
    }

    pub fn shift(d: Vec2) -> Result<Self> {
        Ok(PriorWeight::Shift {
            d: nonzero_finite(d, "shift direction")?,
        })
    }

    /// `condition` must be an expression over exactly `theta1, theta2`.
    pub fn condition(condition: Expression, mode: ConditionMode) -> Result<Self> {
        if condition.vars() != CONDITION_VARS {
            return Err(Error::invalid(
                "condition must be an expression in theta1, theta2",
            ));
        }
        Ok(PriorWeight::Condition { condition, mode })
    }

    pub fn parse_condition(source: &str, mode: ConditionMode) -> Result<Self> {
        PriorWeight::condition(expr::parse(source, &CONDITION_VARS)?, mode)
    }

    /// `h(t)` on `curve`.
    pub fn weight(&self, curve: &Curve, t: f64) -> Result<f64> {
        let (point, velocity) = curve.point_velocity(t)?;
        self.weight_at(point, velocity, t)
    }

    /// `h` given the curve point and velocity at parameter `t`.
    pub fn weight_at(&self, point: Point2, velocity: Vec2, t: f64) -> Result<f64> {
        Ok(match self {
            PriorWeight::Jeffreys => velocity.norm(),
            PriorWeight::Linear { c } => c.dot(velocity).abs(),
            PriorWeight::Shift { d } => velocity.cross(*d).abs(),
            PriorWeight::Condition { condition, mode } => {
                let grad = condition_gradient(condition, point)?.norm();
                match mode {
                    ConditionMode::Product => grad * velocity.norm(),
                    ConditionMode::Coarea => {
                        if !(grad > 1e-300) {
                            return Err(Error::SingularCondition { t });
                        }
                        velocity.norm() / grad
                    }
                }
            }
        })
    }
}

/// `∇C` at `p`, one dual pass per coordinate.
pub fn condition_gradient(condition: &Expression, p: Point2) -> Result<Vec2> {
    let at = [p.x, p.y];
    let d1 = condition.eval_dual_at(&at, 0)?;
    let d2 = condition.eval_dual_at(&at, 1)?;
    Ok(Vec2::new(d1.deriv, d2.deriv))
}
