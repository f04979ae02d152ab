use std::ops::{Add, Div, Mul, Neg, Sub};

use super::real::Real;

/// A number `primal + tangent·ε` with `ε² = 0`.
///
/// Evaluating a function on `Dual::variable(x)` yields `f(x)` in the primal
/// part and `f'(x)` in the tangent part. The component type is itself
/// [`Real`], so `Dual<Dual<f64>>` carries second derivatives and `Dual<Var>`
/// threads forward-mode tangents through a reverse-mode tape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<T = f64> {
    pub primal: T,
    pub tangent: T,
}

impl<T> Dual<T> {
    pub const fn new(primal: T, tangent: T) -> Self {
        Self { primal, tangent }
    }
}

impl<T: Real> Dual<T> {
    /// A constant: tangent is exactly zero.
    pub fn constant(primal: T) -> Self {
        let zero = primal.lift(0.0);
        Self::new(primal, zero)
    }

    /// The seeded variable: tangent is exactly one.
    pub fn variable(primal: T) -> Self {
        let one = primal.lift(1.0);
        Self::new(primal, one)
    }
}

impl Dual<f64> {
    /// Seeds `inputs[seed]` with a unit tangent and the rest with zero.
    pub fn seeded(inputs: &[f64], seed: usize) -> Vec<Self> {
        inputs
            .iter()
            .enumerate()
            .map(|(k, &x)| Self::new(x, if k == seed { 1.0 } else { 0.0 }))
            .collect()
    }
}

impl<T: Real> Add for Dual<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.primal + rhs.primal, self.tangent + rhs.tangent)
    }
}

impl<T: Real> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.primal - rhs.primal, self.tangent - rhs.tangent)
    }
}

impl<T: Real> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        // (a + bε)(c + dε) = ac + (ad + bc)ε; the bd·ε² term is dropped.
        Self::new(
            self.primal * rhs.primal,
            self.primal * rhs.tangent + self.tangent * rhs.primal,
        )
    }
}

impl<T: Real> Div for Dual<T> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let q = self.primal / rhs.primal;
        Self::new(q, (self.tangent - q * rhs.tangent) / rhs.primal)
    }
}

impl<T: Real> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.primal, -self.tangent)
    }
}

impl<T: Real> Add<f64> for Dual<T> {
    type Output = Self;
    fn add(self, rhs: f64) -> Self {
        Self::new(self.primal + rhs, self.tangent)
    }
}

impl<T: Real> Sub<f64> for Dual<T> {
    type Output = Self;
    fn sub(self, rhs: f64) -> Self {
        Self::new(self.primal - rhs, self.tangent)
    }
}

impl<T: Real> Mul<f64> for Dual<T> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        Self::new(self.primal * rhs, self.tangent * rhs)
    }
}

impl<T: Real> Div<f64> for Dual<T> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        Self::new(self.primal / rhs, self.tangent / rhs)
    }
}

impl<T: Real> Real for Dual<T> {
    fn value(self) -> f64 {
        self.primal.value()
    }

    fn lift(self, c: f64) -> Self {
        Self::constant(self.primal.lift(c))
    }

    fn exp(self) -> Self {
        let e = self.primal.exp();
        Self::new(e, self.tangent * e)
    }

    fn ln(self) -> Self {
        Self::new(self.primal.ln(), self.tangent / self.primal)
    }

    // black_box keeps the primal and tangent from fusing into one `sincos`
    // call, so the primal matches plain `sin`/`cos` bit for bit.
    fn sin(self) -> Self {
        Self::new(
            self.primal.sin(),
            self.tangent * std::hint::black_box(self.primal).cos(),
        )
    }

    fn cos(self) -> Self {
        Self::new(
            self.primal.cos(),
            -(self.tangent * std::hint::black_box(self.primal).sin()),
        )
    }

    fn tanh(self) -> Self {
        let t = self.primal.tanh();
        Self::new(t, self.tangent * (-(t * t) + 1.0))
    }

    fn softplus(self) -> Self {
        let s = self.primal.softplus();
        // d/dx softplus = sigmoid(x) = exp(x - softplus(x)), stable for both signs.
        Self::new(s, self.tangent * (self.primal - s).exp())
    }

    fn powf(self, p: f64) -> Self {
        Self::new(
            self.primal.powf(p),
            self.tangent * self.primal.powf(p - 1.0) * p,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_squared_vanishes() {
        let a = Dual::new(2.0, 3.0);
        let b = Dual::new(5.0, 7.0);
        let p = a * b;
        assert_eq!(p.primal, 10.0);
        assert_eq!(p.tangent, 2.0 * 7.0 + 3.0 * 5.0);
        let eps = Dual::new(0.0, 1.0);
        assert_eq!(eps * eps, Dual::new(0.0, 0.0));
    }

    #[test]
    fn lifting_sets_exact_tangents() {
        assert_eq!(Dual::constant(4.2).tangent, 0.0);
        assert_eq!(Dual::variable(4.2).tangent, 1.0);
        assert_eq!(Dual::variable(4.2).lift(9.0), Dual::new(9.0, 0.0));
    }

    #[test]
    fn polynomial_derivative_in_one_pass() {
        // P(x) = 1 + 2x + 3x² at x = 2: value 17, slope 14.
        let x = Dual::variable(2.0);
        let p = x * x * 3.0 + x * 2.0 + 1.0;
        assert_eq!(p, Dual::new(17.0, 14.0));
    }

    #[test]
    fn nested_duals_give_second_derivative() {
        // f = x³ at 2 → f'' = 12.
        let x = Dual::new(Dual::new(2.0, 1.0), Dual::new(1.0, 0.0));
        let y = x * x * x;
        assert_eq!(y.primal.primal, 8.0);
        assert_eq!(y.primal.tangent, 12.0);
        assert_eq!(y.tangent.tangent, 12.0);
    }

    #[test]
    fn transcendental_rules() {
        let x = 0.7;
        let d = Dual::variable(x);
        assert!((d.exp().tangent - x.exp()).abs() < 1e-15);
        assert!((d.ln().tangent - 1.0 / x).abs() < 1e-15);
        assert!((d.sin().tangent - x.cos()).abs() < 1e-15);
        assert!((d.cos().tangent + x.sin()).abs() < 1e-15);
        assert!((d.tanh().tangent - (1.0 - x.tanh().powi(2))).abs() < 1e-15);
        assert!((d.softplus().tangent - super::super::real::sigmoid(x)).abs() < 1e-15);
        assert!((d.powf(2.5).tangent - 2.5 * x.powf(1.5)).abs() < 1e-15);
        assert!(((Dual::constant(1.0) / d).tangent + 1.0 / (x * x)).abs() < 1e-14);
    }
}
