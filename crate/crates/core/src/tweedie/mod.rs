//! Tweedie distributions TW_p(mu, phi) with 1 < p < 2.
//!
//! The compound Poisson-gamma representation is used throughout: a Poisson
//! number of claims with rate `lambda` and gamma severities with shape `alpha`
//! and scale `theta`.

mod series;
mod table;

pub use table::CdfTable;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::error::{Error, Result};
use crate::quadrature::integrate;
use series::Kernel;

/// Smallest admissible Tweedie index.
pub const P_MIN: f64 = 1.105;
/// Largest admissible Tweedie index.
pub const P_MAX: f64 = 1.900;

/// Parameters of a Tweedie distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TweedieParams {
    mu: f64,
    phi: f64,
    p: f64,
}

impl TweedieParams {
    pub fn new(mu: f64, phi: f64, p: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::Domain(format!("mean must be positive and finite, got {mu}")));
        }
        if !(phi.is_finite() && phi > 0.0) {
            return Err(Error::Domain(format!("dispersion must be positive and finite, got {phi}")));
        }
        check_p(p)?;
        Ok(Self { mu, phi, p })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Poisson rate of the claim count.
    pub fn lambda(&self) -> f64 {
        self.mu.powf(2.0 - self.p) / (self.phi * (2.0 - self.p))
    }

    /// Gamma shape of a single severity.
    pub fn alpha(&self) -> f64 {
        (2.0 - self.p) / (self.p - 1.0)
    }

    /// Gamma scale of a single severity.
    pub fn theta(&self) -> f64 {
        self.phi * (self.p - 1.0) * self.mu.powf(self.p - 1.0)
    }

    /// `ell = -(2 - p) / (1 - p)`.
    pub fn ell(&self) -> f64 {
        -(2.0 - self.p) / (1.0 - self.p)
    }

    /// Variance function `V(mu) = mu^p`.
    pub fn variance_function(&self) -> f64 {
        self.mu.powf(self.p)
    }

    pub fn variance(&self) -> f64 {
        self.phi * self.variance_function()
    }

    /// Probability of an exact zero.
    pub fn zero_mass(&self) -> f64 {
        (-self.lambda()).exp()
    }

    /// Density of the continuous part for `y > 0`; the zero mass at `y = 0`.
    pub fn density(&self, y: f64) -> Result<f64> {
        Ok(self.log_density(y)?.exp())
    }

    /// Natural log of [`density`](Self::density).
    pub fn log_density(&self, y: f64) -> Result<f64> {
        if !y.is_finite() {
            return Err(Error::Domain(format!("density argument must be finite, got {y}")));
        }
        if y < 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        if y == 0.0 {
            return Ok(-self.lambda());
        }
        Kernel::new(self).log_density(y, Some(series::MAX_TERMS))
    }

    /// Distribution function, computed as the zero mass plus the integral of
    /// the continuous density.
    pub fn cdf(&self, y: f64) -> f64 {
        if y.is_nan() {
            return f64::NAN;
        }
        if y < 0.0 {
            return 0.0;
        }
        if y == f64::INFINITY {
            return 1.0;
        }
        let mut k = Kernel::new(self);
        let atom = self.zero_mass();
        if y == 0.0 {
            return atom;
        }
        let y = y.min(k.upper_bound());
        (atom + k.mass(0.0, k.to_s(y))).min(1.0)
    }

    /// Inverse of [`cdf`](Self::cdf); zero for `u` at or below the zero mass.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {u}")));
        }
        let atom = self.zero_mass();
        if u <= atom {
            return Ok(0.0);
        }
        let mut k = Kernel::new(self);
        Ok(k.invert(u, 0.0, atom))
    }

    /// Exact draw through the compound Poisson-gamma representation.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let n = Poisson::new(self.lambda())
            .expect("rate is positive and finite")
            .sample(rng);
        if n == 0.0 {
            return 0.0;
        }
        // a sum of n iid Gamma(alpha, theta) variates is Gamma(n alpha, theta)
        Gamma::new(n * self.alpha(), self.theta())
            .expect("shape and scale are positive")
            .sample(rng)
    }

    /// Unit deviance `d(y; mu)`.
    pub fn unit_deviance(&self, y: f64) -> f64 {
        unit_deviance(y, self.mu, self.p)
    }
}

/// Rejects a Tweedie index outside `[P_MIN, P_MAX]`.
pub fn check_p(p: f64) -> Result<()> {
    if !(P_MIN..=P_MAX).contains(&p) {
        return Err(Error::Config(format!(
            "Tweedie index p must lie in [{P_MIN}, {P_MAX}], got {p}"
        )));
    }
    Ok(())
}

/// Unit deviance `2 (y (y^(1-p) - mu^(1-p)) / (1-p) - (y^(2-p) - mu^(2-p)) / (2-p))`.
pub fn unit_deviance(y: f64, mu: f64, p: f64) -> f64 {
    let y2 = y.powf(2.0 - p);
    let d = 2.0 * ((y2 - y * mu.powf(1.0 - p)) / (1.0 - p) - (y2 - mu.powf(2.0 - p)) / (2.0 - p));
    d.max(0.0)
}

/// `P(a < Y <= b)` for `0 <= a <= b`, excluding the atom.
pub fn continuous_mass(params: &TweedieParams, a: f64, b: f64) -> f64 {
    let mut k = Kernel::new(params);
    k.mass(k.to_s(a), k.to_s(b))
}

/// Integral of the continuous density over `(0, upper)`, with no
/// breakpoints or substitution. Only for checking the kernel.
#[doc(hidden)]
pub fn naive_integral(params: &TweedieParams, upper: f64) -> f64 {
    integrate(
        |y| if y > 0.0 { params.density(y).unwrap_or(0.0) } else { 0.0 },
        0.0,
        upper,
        1e-13,
        1e-13,
        20_000,
    )
    .value
}
