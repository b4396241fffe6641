//! Series density and distribution-function integration.
//!
//! For y > 0 the density is
//!
//! ```text
//! f(y) = exp(-lambda - y/theta) / y * sum_{r>=1} [lambda (y/theta)^alpha]^r / (r! Gamma(r alpha))
//! ```
//!
//! Terms are summed in log space outward from the analytically located largest
//! term. Integration runs in `s = y^(1/m)` with `m = max(1, ceil(2/alpha))`,
//! which turns the integrable singularity of the density at zero into a
//! vanishing integrand.

use statrs::function::gamma::ln_gamma;

use super::TweedieParams;
use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre8, integrate};

pub(crate) const MAX_TERMS: usize = 50_000;
// below machine precision, so moving the cut-off never shows up as a jump in
// the integrand
const REL_TRUNCATION: f64 = 1e-17;
// beyond this the series is not attempted at all
const MAX_INDEX: f64 = 1e7;

const Z_BREAKS: [f64; 16] = [
    -8.0, -6.0, -4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0,
];
const THETA_BREAKS: [f64; 7] = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0];

pub(crate) struct Kernel {
    pub lambda: f64,
    pub alpha: f64,
    pub theta: f64,
    pub mu: f64,
    pub sd: f64,
    pub m: i32,
    ln_lambda: f64,
    ln_alpha: f64,
    // coef[r - 1] = -lnGamma(r + 1) - lnGamma(r alpha)
    coef: Vec<f64>,
    // step[r - 1] = exp(coef[r] - coef[r - 1])
    step: Vec<f64>,
    inv_step: Vec<f64>,
}

impl Kernel {
    pub fn new(t: &TweedieParams) -> Self {
        let lambda = t.lambda();
        let alpha = t.alpha();
        Kernel {
            lambda,
            alpha,
            theta: t.theta(),
            mu: t.mu(),
            sd: t.variance().sqrt(),
            m: (2.0 / alpha).ceil().max(1.0) as i32,
            ln_lambda: lambda.ln(),
            ln_alpha: alpha.ln(),
            coef: Vec::new(),
            step: Vec::new(),
            inv_step: Vec::new(),
        }
    }

    fn coef(&mut self, r: usize) -> f64 {
        self.extend(r + 1);
        self.coef[r - 1]
    }

    // makes coef and step valid up to index r
    fn extend(&mut self, r: usize) {
        while self.coef.len() < r {
            let k = (self.coef.len() + 1) as f64;
            self.coef.push(-ln_gamma(k + 1.0) - ln_gamma(k * self.alpha));
            let n = self.coef.len();
            if n >= 2 {
                let diff = self.coef[n - 1] - self.coef[n - 2];
                self.step.push(diff.exp());
                self.inv_step.push((-diff).exp());
            }
        }
    }

    /// `ln sum_r exp(r w + coef(r))`.
    fn log_series(&mut self, w: f64, cap: Option<usize>) -> Result<f64> {
        let r_star = ((w - self.alpha * self.ln_alpha) / (1.0 + self.alpha)).exp();
        if !(r_star < MAX_INDEX) {
            return Err(Error::AccuracyLoss(format!(
                "largest series term sits at index {r_star:e}"
            )));
        }
        let r0 = (r_star.round() as usize).max(1);
        let lead = r0 as f64 * w + self.coef(r0);
        let limit = cap.unwrap_or(usize::MAX);
        let too_long = || Error::AccuracyLoss(format!("series needs more than {limit} terms"));
        let mut sum = 1.0;
        let mut terms = 1usize;
        if w.abs() < 500.0 {
            // consecutive terms differ by the factor exp(w) * step[r - 1]
            let ew = w.exp();
            let iew = 1.0 / ew;
            let mut t = 1.0;
            let mut r = r0;
            loop {
                if r > self.step.len() {
                    self.extend(2 * r + 8);
                }
                t *= ew * self.step[r - 1];
                r += 1;
                sum += t;
                terms += 1;
                if t < REL_TRUNCATION * sum {
                    break;
                }
                if terms > limit {
                    return Err(too_long());
                }
            }
            let mut t = 1.0;
            for k in (1..r0).rev() {
                t *= iew * self.inv_step[k - 1];
                sum += t;
                terms += 1;
                if t < REL_TRUNCATION * sum {
                    break;
                }
                if terms > limit {
                    return Err(too_long());
                }
            }
        } else {
            let mut r = r0;
            loop {
                r += 1;
                let t = (r as f64 * w + self.coef(r) - lead).exp();
                sum += t;
                terms += 1;
                if t < REL_TRUNCATION * sum {
                    break;
                }
                if terms > limit {
                    return Err(too_long());
                }
            }
            for r in (1..r0).rev() {
                let t = (r as f64 * w + self.coef[r - 1] - lead).exp();
                sum += t;
                terms += 1;
                if t < REL_TRUNCATION * sum {
                    break;
                }
                if terms > limit {
                    return Err(too_long());
                }
            }
        }
        Ok(lead + sum.ln())
    }

    /// Log density of the continuous part at `y > 0`.
    pub fn log_density(&mut self, y: f64, cap: Option<usize>) -> Result<f64> {
        let z = y / self.theta;
        let w = self.ln_lambda + self.alpha * z.ln();
        Ok(-self.lambda - z - y.ln() + self.log_series(w, cap)?)
    }

    fn density(&mut self, y: f64) -> f64 {
        if y <= 0.0 || !y.is_finite() {
            return 0.0;
        }
        self.log_density(y, None).map(f64::exp).unwrap_or(0.0)
    }

    pub fn to_s(&self, y: f64) -> f64 {
        if self.m == 1 {
            y
        } else {
            y.powf(1.0 / self.m as f64)
        }
    }

    pub fn to_y(&self, s: f64) -> f64 {
        s.powi(self.m)
    }

    /// Integrand in s-space: `f(s^m) m s^(m-1)`.
    pub fn g(&mut self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let y = self.to_y(s);
        let jac = if self.m == 1 { 1.0 } else { self.m as f64 * s.powi(self.m - 1) };
        self.density(y) * jac
    }

    /// Point beyond which the remaining mass is negligible for typical parameters.
    pub fn upper_bound(&self) -> f64 {
        self.mu + 40.0 * self.sd + 60.0 * self.theta
    }

    /// Breakpoints in s-space strictly inside `(a, b)`, ascending.
    pub fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let mut pts: Vec<f64> = Z_BREAKS
            .iter()
            .map(|z| self.mu + z * self.sd)
            .chain(THETA_BREAKS.iter().map(|c| c * self.theta))
            .filter(|&y| y > 0.0)
            .map(|y| self.to_s(y))
            .filter(|&s| s > a && s < b)
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Fixed 8-point rule for short, smooth intervals.
    pub fn piece_short(&mut self, a: f64, b: f64) -> f64 {
        gauss_legendre8(|s| self.g(s), a, b)
    }

    /// Integral of `g` over `[a, b]` with no further splitting.
    ///
    /// For large claim rates the log density is a small difference of terms of
    /// order `lambda`, so evaluations carry relative noise of roughly
    /// `lambda * 1e-16`; the relative tolerance sits above that floor.
    pub fn piece(&mut self, a: f64, b: f64) -> f64 {
        let rel = 1e-10f64.max(64.0 * f64::EPSILON * self.lambda);
        integrate(|s| self.g(s), a, b, 1e-15, rel, 400).value
    }

    /// Continuous mass between s-coordinates `a <= b`; `b` may be infinite.
    pub fn mass(&mut self, a: f64, b: f64) -> f64 {
        if !(b > a) {
            return 0.0;
        }
        if b == f64::INFINITY {
            let ub = self.to_s(self.upper_bound()).max(a);
            let mut total = self.mass(a, ub);
            let mut lo = self.upper_bound().max(self.to_y(a));
            let mut width = lo - self.mu.min(lo) + self.theta;
            for _ in 0..64 {
                let hi = lo + width;
                if !hi.is_finite() {
                    break;
                }
                let part = self.mass(self.to_s(lo), self.to_s(hi));
                total += part;
                if part < 1e-18 {
                    break;
                }
                lo = hi;
                width *= 2.0;
            }
            return total;
        }
        let mut left = a;
        let mut total = 0.0;
        for bp in self.breakpoints(a, b).into_iter().chain(std::iter::once(b)) {
            total += self.piece(left, bp);
            left = bp;
        }
        total
    }

    /// Solves `F(y) = u` given a point `y0` whose distribution function value
    /// `f0 < u` is known. Returns `y`.
    pub fn invert(&mut self, u: f64, y0: f64, f0: f64) -> f64 {
        let mut lo = self.to_s(y0);
        let mut f_lo = f0;
        // bracket by doubling in y
        let mut hi_y = if y0 > 0.0 { 2.0 * y0 } else { self.mu };
        let mut hi;
        let mut f_hi;
        let mut guard = 0;
        loop {
            hi = self.to_s(hi_y);
            let part = self.mass(lo, hi);
            f_hi = f_lo + part;
            // past the upper bound with no mass left: u exceeds what the
            // quadrature can resolve, so the bracket end is the answer
            let exhausted = hi_y > self.upper_bound() && part == 0.0;
            if f_hi >= u || exhausted || guard > 1100 {
                break;
            }
            lo = hi;
            f_lo = f_hi;
            hi_y *= 2.0;
            guard += 1;
        }
        if f_hi < u {
            return hi_y;
        }
        // safeguarded Newton inside [lo, hi]; the derivative is g
        let mut s = lo + (u - f_lo) / (f_hi - f_lo) * (hi - lo);
        for _ in 0..200 {
            if !(s > lo && s < hi) {
                s = 0.5 * (lo + hi);
            }
            let f_s = f_lo + self.mass(lo, s);
            let err = f_s - u;
            if err.abs() <= 1e-14 {
                break;
            }
            if err < 0.0 {
                lo = s;
                f_lo = f_s;
            } else {
                hi = s;
            }
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                break;
            }
            let d = self.g(s);
            let next = s - err / d;
            s = if d > 0.0 && next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        }
        self.to_y(s)
    }
}
