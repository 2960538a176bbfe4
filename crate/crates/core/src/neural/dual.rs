//! First-order dual numbers `a + b·ε` with `ε² = 0`.
//!
//! Carrying a tangent alongside every value through the sine chain yields the
//! exact time derivative of the network output in one pass.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Dual {
    pub value: f64,
    pub tangent: f64,
}

impl Dual {
    pub const fn new(value: f64, tangent: f64) -> Self {
        Self { value, tangent }
    }

    pub const fn constant(value: f64) -> Self {
        Self { value, tangent: 0.0 }
    }

    /// The independent variable: unit tangent.
    pub const fn variable(value: f64) -> Self {
        Self { value, tangent: 1.0 }
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.value.sin_cos();
        Self::new(s, c * self.tangent)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.value.sin_cos();
        Self::new(c, -s * self.tangent)
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        Self::new(e, e * self.tangent)
    }

    pub fn scale(self, k: f64) -> Self {
        Self::new(self.value * k, self.tangent * k)
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, rhs: Dual) -> Dual {
        Dual::new(self.value + rhs.value, self.tangent + rhs.tangent)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, rhs: Dual) -> Dual {
        Dual::new(self.value - rhs.value, self.tangent - rhs.tangent)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, rhs: Dual) -> Dual {
        Dual::new(
            self.value * rhs.value,
            self.value * rhs.tangent + self.tangent * rhs.value,
        )
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.value, -self.tangent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let t = Dual::variable(0.3);
        let y = t * t.sin();
        assert!((y.tangent - (0.3f64.sin() + 0.3 * 0.3f64.cos())).abs() < 1e-15);
    }

    #[test]
    fn exp_and_cos() {
        let t = Dual::variable(1.1);
        assert!((t.exp().tangent - 1.1f64.exp()).abs() < 1e-14);
        assert!((t.cos().tangent + 1.1f64.sin()).abs() < 1e-15);
        assert_eq!((-t).tangent, -1.0);
        assert_eq!((t - t).tangent, 0.0);
    }
}
