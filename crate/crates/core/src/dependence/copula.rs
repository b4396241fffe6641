//! Bivariate copula families: Student t with integer degrees of freedom, and
//! independence.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

pub const MAX_NU: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CopulaFamily {
    StudentT { nu: u32, rho: f64 },
    Independence,
}

impl CopulaFamily {
    pub fn student_t(nu: u32, rho: f64) -> Result<Self> {
        if nu == 0 {
            return Err(Error::Config("t-copula degrees of freedom must be >= 1".into()));
        }
        if !(rho.abs() < 1.0) {
            return Err(Error::Config(format!("t-copula rho must satisfy |rho| < 1, got {rho}")));
        }
        Ok(CopulaFamily::StudentT { nu, rho })
    }

    pub fn log_density(&self, u: f64, v: f64) -> f64 {
        match *self {
            CopulaFamily::Independence => 0.0,
            CopulaFamily::StudentT { nu, rho } => {
                let t = t_dist(nu);
                TLogDensity::new(nu, rho).eval(t.inverse_cdf(u), t.inverse_cdf(v))
            }
        }
    }

    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        match *self {
            CopulaFamily::Independence => u * v,
            CopulaFamily::StudentT { nu, rho } => {
                if u <= 0.0 || v <= 0.0 {
                    return 0.0;
                }
                let t = t_dist(nu);
                bvt_lower(nu, t.inverse_cdf(u.min(1.0)), t.inverse_cdf(v.min(1.0)), rho)
            }
        }
    }

    /// Draws `n` pairs on the latent scale: t variates for the t family,
    /// independent normals otherwise. Ranks are those of the copula sample.
    pub fn sample_latent<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        match *self {
            CopulaFamily::Independence => {
                for _ in 0..n {
                    a.push(rng.sample(StandardNormal));
                    b.push(rng.sample(StandardNormal));
                }
            }
            CopulaFamily::StudentT { nu, rho } => {
                let chi = ChiSquared::new(nu as f64).expect("positive degrees of freedom");
                let s = (1.0 - rho * rho).sqrt();
                for _ in 0..n {
                    let z1: f64 = rng.sample(StandardNormal);
                    let z2: f64 = rng.sample(StandardNormal);
                    let scale = (nu as f64 / chi.sample(rng)).sqrt();
                    a.push(z1 * scale);
                    b.push((rho * z1 + s * z2) * scale);
                }
            }
        }
        (a, b)
    }

    /// Draws `n` pairs of uniforms.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let (a, b) = self.sample_latent(n, rng);
        let to_u: Box<dyn Fn(f64) -> f64> = match *self {
            CopulaFamily::Independence => {
                let z = statrs::distribution::Normal::standard();
                Box::new(move |x| z.cdf(x))
            }
            CopulaFamily::StudentT { nu, .. } => {
                let t = t_dist(nu);
                Box::new(move |x| t.cdf(x))
            }
        };
        (a.into_iter().map(&to_u).collect(), b.into_iter().map(&to_u).collect())
    }

    /// Kendall's tau of the copula.
    pub fn kendall_tau(&self) -> f64 {
        match *self {
            CopulaFamily::Independence => 0.0,
            CopulaFamily::StudentT { rho, .. } => 2.0 / std::f64::consts::PI * rho.asin(),
        }
    }
}

pub(crate) fn t_dist(nu: u32) -> StudentsT {
    StudentsT::new(0.0, 1.0, nu as f64).expect("positive degrees of freedom")
}

/// Log density of the t copula in terms of the t quantiles `x = t_nu^{-1}(u)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TLogDensity {
    nu: f64,
    rho: f64,
    konst: f64,
    one_m_r2: f64,
}

impl TLogDensity {
    pub fn new(nu: u32, rho: f64) -> Self {
        let nu = nu as f64;
        let one_m_r2 = 1.0 - rho * rho;
        let konst = ln_gamma(0.5 * (nu + 2.0)) + ln_gamma(0.5 * nu) - 2.0 * ln_gamma(0.5 * (nu + 1.0)) - 0.5 * one_m_r2.ln();
        TLogDensity { nu, rho, konst, one_m_r2 }
    }

    /// `x_term = ln(1 + x^2 / nu)` is passed in so callers can cache it.
    #[inline]
    pub fn eval_cached(&self, x: f64, y: f64, lx: f64, ly: f64) -> f64 {
        let q = (x * x - 2.0 * self.rho * x * y + y * y) / (self.nu * self.one_m_r2);
        self.konst - 0.5 * (self.nu + 2.0) * q.ln_1p() + 0.5 * (self.nu + 1.0) * (lx + ly)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.eval_cached(x, y, (x * x / self.nu).ln_1p(), (y * y / self.nu).ln_1p())
    }
}

/// `P(X < h, Y < k)` for the standard bivariate t with integer `nu` and
/// correlation `r` (Dunnett-Sobel series as arranged by Genz).
pub fn bvt_lower(nu: u32, h: f64, k: f64, r: f64) -> f64 {
    use std::f64::consts::PI;
    let t = t_dist(nu);
    if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
        return 0.0;
    }
    if h == f64::INFINITY {
        return if k == f64::INFINITY { 1.0 } else { t.cdf(k) };
    }
    if k == f64::INFINITY {
        return t.cdf(h);
    }
    let eps = 1e-15;
    if 1.0 - r <= eps {
        return t.cdf(h.min(k));
    }
    if r + 1.0 <= eps {
        return if h > -k { t.cdf(h) - t.cdf(-k) } else { 0.0 };
    }
    let n = nu as f64;
    let tpi = 2.0 * PI;
    let ors = 1.0 - r * r;
    let hrk = h - r * k;
    let krh = k - r * h;
    let (xnhk, xnkh) = if hrk.abs() + ors > 0.0 {
        (hrk * hrk / (hrk * hrk + ors * (n + k * k)), krh * krh / (krh * krh + ors * (n + h * h)))
    } else {
        (0.0, 0.0)
    };
    let hs = if hrk < 0.0 { -1.0 } else { 1.0 };
    let ks = if krh < 0.0 { -1.0 } else { 1.0 };
    let mut bvt;
    if nu.is_multiple_of(2) {
        bvt = ors.sqrt().atan2(-r) / tpi;
        let mut gmph = h / (16.0 * (n + h * h)).sqrt();
        let mut gmpk = k / (16.0 * (n + k * k)).sqrt();
        let mut btnckh = 2.0 * xnkh.sqrt().atan2((1.0 - xnkh).sqrt()) / PI;
        let mut btpdkh = 2.0 * (xnkh * (1.0 - xnkh)).sqrt() / PI;
        let mut btnchk = 2.0 * xnhk.sqrt().atan2((1.0 - xnhk).sqrt()) / PI;
        let mut btpdhk = 2.0 * (xnhk * (1.0 - xnhk)).sqrt() / PI;
        for j in 1..=nu / 2 {
            let j = j as f64;
            bvt += gmph * (1.0 + ks * btnckh);
            bvt += gmpk * (1.0 + hs * btnchk);
            btnckh += btpdkh;
            btpdkh = 2.0 * j * btpdkh * (1.0 - xnkh) / (2.0 * j + 1.0);
            btnchk += btpdhk;
            btpdhk = 2.0 * j * btpdhk * (1.0 - xnhk) / (2.0 * j + 1.0);
            gmph = gmph * (2.0 * j - 1.0) / (2.0 * j * (1.0 + h * h / n));
            gmpk = gmpk * (2.0 * j - 1.0) / (2.0 * j * (1.0 + k * k / n));
        }
    } else {
        let qhrk = (h * h + k * k - 2.0 * r * h * k + n * ors).sqrt();
        let hkrn = h * k + r * n;
        let hkn = h * k - n;
        let hpk = h + k;
        bvt = (-n.sqrt() * (hkn * qhrk + hpk * hkrn)).atan2(hkn * hkrn - n * hpk * qhrk) / tpi;
        if bvt < -1e-15 {
            bvt += 1.0;
        }
        let mut gmph = h / (tpi * n.sqrt() * (1.0 + h * h / n));
        let mut gmpk = k / (tpi * n.sqrt() * (1.0 + k * k / n));
        let mut btnckh = xnkh.sqrt();
        let mut btpdkh = btnckh;
        let mut btnchk = xnhk.sqrt();
        let mut btpdhk = btnchk;
        for j in 1..=(nu - 1) / 2 {
            let j = j as f64;
            bvt += gmph * (1.0 + ks * btnckh);
            bvt += gmpk * (1.0 + hs * btnchk);
            btpdkh = (2.0 * j - 1.0) * btpdkh * (1.0 - xnkh) / (2.0 * j);
            btnckh += btpdkh;
            btpdhk = (2.0 * j - 1.0) * btpdhk * (1.0 - xnhk) / (2.0 * j);
            btnchk += btpdhk;
            gmph = 2.0 * j * gmph / ((2.0 * j + 1.0) * (1.0 + h * h / n));
            gmpk = 2.0 * j * gmpk / ((2.0 * j + 1.0) * (1.0 + k * k / n));
        }
    }
    bvt.clamp(0.0, 1.0)
}
