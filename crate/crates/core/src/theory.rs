//! Model parameters and the closed-form constants built from them.
//!
//! Everything here is a pure function of the five model constants. The
//! spreading-speed constants are only defined while `chi * mu < b`; the
//! functions that need that refuse otherwise instead of extrapolating.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(x)_+`, with an exact zero at `x = 0`.
#[inline]
pub fn positive_part(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Constants of `u_t = u_xx - chi (u v_x)_x + u (a - b u)`, `0 = v_xx - lambda v + mu u`.
///
/// `a`, `b`, `lambda` and `mu` must be strictly positive. `chi = 0` is accepted
/// and decouples the chemical, which gives the Fisher-KPP baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub chi: f64,
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
    pub mu: f64,
}

/// Speed constants derived from [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedConstants {
    /// `2 sqrt(a)`, the Fisher-KPP spreading speed.
    pub c0_star: f64,
    /// Largest admissible decay rate in `(0, sqrt(a)]`.
    pub a_star: f64,
    /// `(a + a_star^2) / a_star`, upper bound on the spreading speed.
    pub c_star: f64,
    /// `(a + min{a, lambda}) / min{sqrt(a), sqrt(lambda)}`, traveling waves exist above it.
    pub c_star_star: f64,
}

impl ModelParams {
    pub fn new(chi: f64, a: f64, b: f64, lambda: f64, mu: f64) -> Result<Self> {
        let p = ModelParams { chi, a, b, lambda, mu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("a", self.a), ("b", self.b), ("lambda", self.lambda), ("mu", self.mu)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be finite and > 0, got {value}")));
            }
        }
        if !(self.chi.is_finite() && self.chi >= 0.0) {
            return Err(Error::InvalidParameter(format!("chi must be finite and >= 0 (repulsion is not modelled), got {}", self.chi)));
        }
        Ok(())
    }

    pub fn chi_mu(&self) -> f64 {
        self.chi * self.mu
    }

    pub fn sqrt_a(&self) -> f64 {
        self.a.sqrt()
    }

    pub fn sqrt_lambda(&self) -> f64 {
        self.lambda.sqrt()
    }

    /// Carrying capacity `a / b`.
    pub fn carrying_capacity(&self) -> f64 {
        self.a / self.b
    }

    /// Constant chemical level `mu a / (lambda b)` at the positive equilibrium.
    pub fn equilibrium_chemical(&self) -> f64 {
        self.mu * self.a / (self.lambda * self.b)
    }

    /// `a / (b - chi mu)`; the sup-norm bound every solution eventually respects.
    pub fn damped_capacity(&self) -> Result<f64> {
        self.require_global_existence()?;
        Ok(self.a / (self.b - self.chi_mu()))
    }

    /// Solutions with bounded nonnegative data exist globally when `chi mu < b`.
    pub fn global_existence(&self) -> bool {
        self.chi_mu() < self.b
    }

    pub fn require_global_existence(&self) -> Result<()> {
        if self.global_existence() {
            Ok(())
        } else {
            Err(Error::Hypothesis(format!("global existence requires chi*mu < b (got chi*mu = {}, b = {})", self.chi_mu(), self.b)))
        }
    }

    /// `(1 + (sqrt a - sqrt lambda)_+ / (2 (sqrt a + sqrt lambda))) chi mu <= b`.
    ///
    /// Under this condition the chemotactic spreading speed is exactly `2 sqrt(a)`.
    pub fn hypothesis_h(&self) -> bool {
        let (sa, sl) = (self.sqrt_a(), self.sqrt_lambda());
        let factor = 1.0 + 0.5 * positive_part(sa - sl) / (sa + sl);
        factor * self.chi_mu() <= self.b
    }

    /// `(kappa - sqrt lambda)_+ / (kappa + sqrt lambda) <= 2 (b - chi mu) / (chi mu)`.
    pub fn kappa_admissible(&self, kappa: f64) -> bool {
        let sl = self.sqrt_lambda();
        let lhs = positive_part(kappa - sl) / (kappa + sl);
        if lhs == 0.0 {
            return true;
        }
        // Cross-multiplied so chi = 0 (infinite right side) needs no special case.
        lhs * self.chi_mu() <= 2.0 * (self.b - self.chi_mu())
    }

    /// Largest admissible `kappa` in `(0, sqrt(a)]`.
    pub fn a_star(&self) -> Result<f64> {
        self.require_global_existence()?;
        let sa = self.sqrt_a();
        if self.kappa_admissible(sa) {
            return Ok(sa);
        }
        // The constraint is nondecreasing in kappa, so the maximizer sits where it binds:
        // (k - s)/(k + s) = r  =>  k = s (1 + r) / (1 - r). Here r < 1 because sqrt(a) failed.
        let r = 2.0 * (self.b - self.chi_mu()) / self.chi_mu();
        let sl = self.sqrt_lambda();
        Ok((sl * (1.0 + r) / (1.0 - r)).min(sa))
    }

    pub fn speed_constants(&self) -> Result<SpeedConstants> {
        let a_star = self.a_star()?;
        let m = self.a.min(self.lambda);
        Ok(SpeedConstants {
            c0_star: 2.0 * self.sqrt_a(),
            a_star,
            c_star: (self.a + a_star * a_star) / a_star,
            c_star_star: (self.a + m) / m.sqrt(),
        })
    }

    /// Speed `(kappa^2 + a) / kappa` of the exponential profile `e^{-kappa (x - c t)}`.
    pub fn c_kappa(&self, kappa: f64) -> f64 {
        c_kappa(self.a, kappa)
    }

    /// Smaller root of `c_kappa(kappa) = c`; `None` below `2 sqrt(a)`.
    pub fn kappa_for_speed(&self, c: f64) -> Option<f64> {
        let disc = c * c - 4.0 * self.a;
        if disc < 0.0 || c <= 0.0 {
            return None;
        }
        // (c - sqrt(disc)) / 2 rewritten to avoid cancellation for large c.
        Some(2.0 * self.a / (c + disc.sqrt()))
    }
}

pub fn c_kappa(a: f64, kappa: f64) -> f64 {
    (kappa * kappa + a) / kappa
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(chi: f64, a: f64, b: f64, lambda: f64, mu: f64) -> ModelParams {
        ModelParams::new(chi, a, b, lambda, mu).unwrap()
    }

    #[test]
    fn global_existence_is_strict() {
        assert!(p(1.0, 1.0, 2.0, 1.0, 1.0).global_existence());
        assert!(!p(1.0, 1.0, 1.0, 1.0, 1.0).global_existence());
        assert!(p(0.4, 1.0, 1.0, 1.0, 1.0).global_existence());
    }

    #[test]
    fn hypothesis_h_examples() {
        assert!(p(0.5, 1.0, 1.0, 1.0, 1.0).hypothesis_h());
        // factor 1 + (2 - 0.5) / (2 (2 + 0.5)) = 1.3
        assert!(!p(1.0, 4.0, 1.2, 0.25, 1.0).hypothesis_h());
        assert!(p(1.0, 4.0, 1.5, 0.25, 1.0).hypothesis_h());
        // lambda >= a collapses the factor to one; non-strict at equality
        assert!(p(1.0, 1.0, 1.0, 2.0, 1.0).hypothesis_h());
    }

    #[test]
    fn kappa_admissible_examples() {
        let q = p(1.0, 4.0, 1.2, 0.25, 1.0);
        for kappa in [0.1, 0.3, 0.5] {
            assert!(q.kappa_admissible(kappa));
        }
        assert!(q.kappa_admissible(1.0));
        assert!(!q.kappa_admissible(1.5));
    }

    #[test]
    fn a_star_examples() {
        assert_relative_eq!(p(0.5, 1.0, 1.0, 1.0, 1.0).a_star().unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(p(1.0, 4.0, 1.2, 0.25, 1.0).a_star().unwrap(), 7.0 / 6.0, epsilon = 1e-12);
        assert_relative_eq!(p(0.3, 9.0, 1.0, 16.0, 1.0).a_star().unwrap(), 3.0, epsilon = 1e-15);
        assert!(p(1.0, 1.0, 1.0, 1.0, 1.0).a_star().is_err());
    }

    #[test]
    fn speed_constant_examples() {
        let s = p(0.5, 1.0, 1.0, 1.0, 1.0).speed_constants().unwrap();
        assert_eq!((s.c0_star, s.a_star, s.c_star, s.c_star_star), (2.0, 1.0, 2.0, 2.0));
        let s = p(1.0, 4.0, 1.2, 0.25, 1.0).speed_constants().unwrap();
        assert_relative_eq!(s.c_star, 193.0 / 42.0, epsilon = 1e-12);
        let s = p(0.1, 4.0, 1.0, 1.0, 1.0).speed_constants().unwrap();
        assert_relative_eq!(s.c_star_star, 5.0, epsilon = 1e-15);
    }

    #[test]
    fn c_kappa_examples() {
        assert_eq!(c_kappa(1.0, 1.0), 2.0);
        assert_eq!(c_kappa(1.0, 0.5), 2.5);
        assert_eq!(c_kappa(4.0, 2.0), 4.0);
    }

    #[test]
    fn kappa_for_speed_inverts_c_kappa() {
        let q = p(0.0, 1.0, 1.0, 1.0, 1.0);
        assert_relative_eq!(q.kappa_for_speed(2.5).unwrap(), 0.5, epsilon = 1e-15);
        assert!(q.kappa_for_speed(1.9).is_none());
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ModelParams::new(-0.1, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(0.1, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(ModelParams::new(0.1, 1.0, 1.0, f64::NAN, 1.0).is_err());
    }
}
