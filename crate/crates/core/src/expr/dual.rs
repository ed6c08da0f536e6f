use std::ops::{Add, Div, Mul, Neg, Sub};

/// Forward-mode dual number: a value together with its derivative with
/// respect to a single seed variable.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dual {
    pub value: f64,
    pub deriv: f64,
}

impl Dual {
    pub const fn new(value: f64, deriv: f64) -> Self {
        Dual { value, deriv }
    }

    pub const fn constant(value: f64) -> Self {
        Dual { value, deriv: 0.0 }
    }

    pub const fn variable(value: f64) -> Self {
        Dual { value, deriv: 1.0 }
    }

    pub fn sin(self) -> Self {
        Dual::new(self.value.sin(), self.deriv * self.value.cos())
    }

    pub fn cos(self) -> Self {
        Dual::new(self.value.cos(), -self.deriv * self.value.sin())
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        Dual::new(e, self.deriv * e)
    }

    pub fn ln(self) -> Self {
        Dual::new(self.value.ln(), self.deriv / self.value)
    }

    pub fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        if self.deriv == 0.0 {
            return Dual::constant(s);
        }
        Dual::new(s, self.deriv / (2.0 * s))
    }

    /// |x| with the derivative at the kink taken as 0.
    pub fn abs(self) -> Self {
        let sign = if self.value > 0.0 {
            1.0
        } else if self.value < 0.0 {
            -1.0
        } else {
            0.0
        };
        Dual::new(self.value.abs(), sign * self.deriv)
    }

    pub fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Dual::constant(1.0);
        }
        let lower = self.value.powi(n - 1);
        Dual::new(self.value.powi(n), self.deriv * f64::from(n) * lower)
    }

    /// Real power with a constant exponent.
    pub fn powf(self, p: f64) -> Self {
        if self.deriv == 0.0 {
            return Dual::constant(self.value.powf(p));
        }
        let lower = self.value.powf(p - 1.0);
        Dual::new(self.value.powf(p), self.deriv * p * lower)
    }

    /// `self^exponent` where both sides may carry a derivative; requires a
    /// positive base.
    pub fn pow(self, exponent: Dual) -> Self {
        let value = self.value.powf(exponent.value);
        let deriv =
            value * (exponent.deriv * self.value.ln() + exponent.value * self.deriv / self.value);
        Dual::new(value, deriv)
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, rhs: Dual) -> Dual {
        Dual::new(self.value + rhs.value, self.deriv + rhs.deriv)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, rhs: Dual) -> Dual {
        Dual::new(self.value - rhs.value, self.deriv - rhs.deriv)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, rhs: Dual) -> Dual {
        Dual::new(
            self.value * rhs.value,
            self.deriv * rhs.value + self.value * rhs.deriv,
        )
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, rhs: Dual) -> Dual {
        Dual::new(
            self.value / rhs.value,
            (self.deriv * rhs.value - self.value * rhs.deriv) / (rhs.value * rhs.value),
        )
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.value, -self.deriv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_quotient_rules() {
        let x = Dual::variable(2.0);
        let y = x * x * x + x;
        assert_eq!(y, Dual::new(10.0, 13.0));
        let q = Dual::constant(1.0) / x;
        assert_eq!(q, Dual::new(0.5, -0.25));
    }

    #[test]
    fn abs_kink_has_zero_derivative() {
        assert_eq!(Dual::variable(0.0).abs().deriv, 0.0);
        assert_eq!(Dual::variable(-3.0).abs(), Dual::new(3.0, -1.0));
    }

    #[test]
    fn powi_zero_is_constant_one() {
        assert_eq!(Dual::variable(0.0).powi(0), Dual::constant(1.0));
        assert_eq!(Dual::variable(0.0).powi(1), Dual::new(0.0, 1.0));
    }
}
