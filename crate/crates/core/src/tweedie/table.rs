//! Tabulated distribution function for fast repeated inversion.
//!
//! The distribution function is stored at adaptively chosen nodes in the
//! same `s = y^(1/m)` coordinate used for integration, together with its
//! derivative, and interpolated by cubic Hermite segments. Nodes are refined
//! until the midpoint interpolation error is below `TOL`, or a small fraction
//! of the interval's probability mass.

use super::series::Kernel;
use super::TweedieParams;
use crate::error::{Error, Result};

const TOL: f64 = 1e-9;
const MAX_DEPTH: u32 = 30;
// from this depth on intervals are short enough for a fixed 8-point rule
const SHORT_DEPTH: u32 = 3;
// relative to the mass of the interval, for when evaluation noise exceeds TOL
const REL_TOL: f64 = 1e-9;

/// Piecewise-cubic distribution function of one Tweedie law.
#[derive(Debug, Clone)]
pub struct CdfTable {
    params: TweedieParams,
    atom: f64,
    m: i32,
    s: Vec<f64>,
    f: Vec<f64>,
    d: Vec<f64>,
}

struct Builder<'a> {
    k: &'a mut Kernel,
    s: Vec<f64>,
    f: Vec<f64>,
    d: Vec<f64>,
}

impl Builder<'_> {
    fn push(&mut self, s: f64, f: f64, d: f64) {
        self.s.push(s);
        self.f.push(f);
        self.d.push(d);
    }

    fn last(&self) -> (f64, f64, f64) {
        let n = self.s.len() - 1;
        (self.s[n], self.f[n], self.d[n])
    }

    fn refine(&mut self, a: (f64, f64, f64), b: (f64, f64, f64), depth: u32) {
        let (sa, fa, da) = a;
        let (sb, fb, db) = b;
        let h = sb - sa;
        let c = 0.5 * (sa + sb);
        if depth >= MAX_DEPTH || !(c > sa && c < sb) {
            self.push(sb, fb, db);
            return;
        }
        let part = if depth >= SHORT_DEPTH { self.k.piece_short(sa, c) } else { self.k.piece(sa, c) };
        let fc = fa + part;
        let dc = self.k.g(c);
        let predicted = 0.5 * (fa + fb) + h * (da - db) / 8.0;
        if (fc - predicted).abs() <= TOL.max(REL_TOL * (fb - fa)) && depth > 0 {
            self.push(sb, fb, db);
        } else {
            self.refine(a, (c, fc, dc), depth + 1);
            self.refine((c, fc, dc), b, depth + 1);
        }
    }
}

impl CdfTable {
    /// Fails when the tabulated mass falls short of one, which happens when the
    /// series cannot be evaluated (claim rates beyond about `1e7`).
    pub fn new(params: &TweedieParams) -> Result<Self> {
        let mut k = Kernel::new(params);
        let atom = params.zero_mass();
        let mut ub = k.upper_bound();
        // extend the range until the neglected tail is immaterial
        let mut width = ub - k.mu + k.theta;
        for _ in 0..64 {
            let tail = k.mass(k.to_s(ub), k.to_s(ub + width));
            if tail < 1e-16 {
                break;
            }
            ub += width;
            width *= 2.0;
        }
        let s_ub = k.to_s(ub);
        let mut nodes = vec![0.0];
        let bps = k.breakpoints(0.0, s_ub);
        let first = bps.first().copied().unwrap_or(s_ub);
        nodes.extend([0.125, 0.25, 0.5, 0.75].iter().map(|c| c * first));
        nodes.extend(bps);
        nodes.push(s_ub);
        nodes.dedup();

        let m = k.m;
        let mut b = Builder { k: &mut k, s: Vec::new(), f: Vec::new(), d: Vec::new() };
        b.push(0.0, atom, 0.0);
        let mut prev = (0.0, atom, 0.0);
        for &s in &nodes[1..] {
            let f = prev.1 + b.k.piece(prev.0, s);
            let next = (s, f, b.k.g(s));
            b.refine(prev, next, 0);
            prev = b.last();
        }
        let Builder { s, f, d, .. } = b;
        let total = *f.last().expect("table has nodes");
        if !((total - 1.0).abs() < 1e-6) {
            return Err(Error::AccuracyLoss(format!(
                "distribution table for mu={}, phi={}, p={} holds mass {total}",
                params.mu(),
                params.phi(),
                params.p()
            )));
        }
        Ok(CdfTable { params: *params, atom, m, s, f, d })
    }

    pub fn params(&self) -> &TweedieParams {
        &self.params
    }

    /// Largest level inverted from the table rather than exactly.
    pub fn upper_level(&self) -> f64 {
        self.f[self.f.len() - 1]
    }

    pub fn nodes(&self) -> usize {
        self.s.len()
    }

    /// Interpolated distribution function.
    pub fn cdf(&self, y: f64) -> f64 {
        if y < 0.0 {
            return 0.0;
        }
        if y == 0.0 {
            return self.atom;
        }
        let s = y.powf(1.0 / self.m as f64);
        if s >= *self.s.last().unwrap() {
            return self.params.cdf(y);
        }
        let k = self.s.partition_point(|&x| x <= s) - 1;
        let h = self.s[k + 1] - self.s[k];
        self.hermite(k, (s - self.s[k]) / h)
    }

    fn hermite(&self, k: usize, t: f64) -> f64 {
        let h = self.s[k + 1] - self.s[k];
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.f[k]
            + (t3 - 2.0 * t2 + t) * h * self.d[k]
            + (-2.0 * t3 + 3.0 * t2) * self.f[k + 1]
            + (t3 - t2) * h * self.d[k + 1]
    }

    fn hermite_slope(&self, k: usize, t: f64) -> f64 {
        let h = self.s[k + 1] - self.s[k];
        let t2 = t * t;
        (6.0 * t2 - 6.0 * t) * self.f[k]
            + (3.0 * t2 - 4.0 * t + 1.0) * h * self.d[k]
            + (-6.0 * t2 + 6.0 * t) * self.f[k + 1]
            + (3.0 * t2 - 2.0 * t) * h * self.d[k + 1]
    }

    /// Quantile by inverting the interpolant; falls back to the exact
    /// inversion beyond the tabulated range.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {u}")));
        }
        if u <= self.atom {
            return Ok(0.0);
        }
        let last = self.f.len() - 1;
        if u >= self.f[last] {
            let y0 = self.s[last].powi(self.m);
            let mut k = Kernel::new(&self.params);
            return Ok(k.invert(u, y0, self.f[last]));
        }
        let k = self.f.partition_point(|&x| x <= u) - 1;
        let (f0, f1) = (self.f[k], self.f[k + 1]);
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut t = ((u - f0) / (f1 - f0)).clamp(0.0, 1.0);
        for _ in 0..60 {
            let err = self.hermite(k, t) - u;
            if err.abs() <= 1e-15 {
                break;
            }
            if err < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            if hi - lo <= 1e-15 {
                break;
            }
            let slope = self.hermite_slope(k, t);
            let next = t - err / slope;
            t = if slope > 0.0 && next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        }
        let s = self.s[k] + t * (self.s[k + 1] - self.s[k]);
        Ok(s.powi(self.m))
    }
}
