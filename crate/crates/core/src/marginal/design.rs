//! Dummy-coded design of the mean model.
//!
//! Columns are `[iota, alpha_2..alpha_I, delta_2..delta_J]`, so every observed
//! cell has at most three nonzero entries, all equal to one. Effects whose
//! row or column holds only zero claims have no finite estimate; they are
//! removed from the active set and pinned at [`PINNED_EFFECT`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::triangles::{LossTriangle, TriangleIndex};

/// Value given to effects of all-zero rows or columns.
pub const PINNED_EFFECT: f64 = -30.0;

#[derive(Debug, Clone)]
pub(crate) struct Design {
    pub index: TriangleIndex,
    /// Full column -> position among active columns.
    pub active: Vec<Option<usize>>,
    pub n_active: usize,
    /// Cells in upper order with their full column indices.
    pub cells: Vec<(usize, usize)>,
}

impl Design {
    pub fn new(t: &LossTriangle) -> Result<Self> {
        let index = t.index();
        let size = index.semesters();
        let q = 2 * size - 1;
        let mut row_pos = vec![false; size + 1];
        let mut col_pos = vec![false; size + 1];
        for (i, j) in index.upper_cells() {
            if t.ratio(i, j) > 0.0 {
                row_pos[i] = true;
                col_pos[j] = true;
            }
        }
        if !row_pos.iter().any(|&b| b) {
            return Err(Error::Estimation(format!("line {}: every observed claim is zero", t.line_id)));
        }
        if !row_pos[1] {
            return Err(Error::Estimation(format!(
                "line {}: the first accident semester has no claims, so effects are not identifiable",
                t.line_id
            )));
        }
        if !col_pos[1] {
            return Err(Error::Estimation(format!(
                "line {}: the first development lag has no claims, so effects are not identifiable",
                t.line_id
            )));
        }
        let mut keep = vec![true; q];
        for i in 2..=size {
            keep[alpha_col(i)] = row_pos[i];
        }
        for j in 2..=size {
            keep[delta_col(size, j)] = col_pos[j];
        }
        let mut active = vec![None; q];
        let mut n_active = 0;
        for (c, &k) in keep.iter().enumerate() {
            if k {
                active[c] = Some(n_active);
                n_active += 1;
            }
        }
        Ok(Design { index, active, n_active, cells: index.upper_cells().collect() })
    }

    pub fn size(&self) -> usize {
        self.index.semesters()
    }

    /// Active-column positions of the nonzero entries of cell `(i, j)`.
    pub fn row(&self, i: usize, j: usize) -> impl Iterator<Item = usize> + '_ {
        let size = self.size();
        let a = (i >= 2).then(|| alpha_col(i));
        let d = (j >= 2).then(|| delta_col(size, j));
        std::iter::once(Some(0))
            .chain([a, d])
            .flatten()
            .filter_map(move |c| self.active[c])
    }

    pub fn alpha_active(&self, i: usize) -> bool {
        i == 1 || self.active[alpha_col(i)].is_some()
    }

    pub fn delta_active(&self, j: usize) -> bool {
        j == 1 || self.active[delta_col(self.size(), j)].is_some()
    }

    /// Cell lies in a pinned row or column.
    pub fn pinned(&self, i: usize, j: usize) -> bool {
        !self.alpha_active(i) || !self.delta_active(j)
    }

    /// Packs the active parameters of `(iota, alpha, delta)`.
    pub fn pack(&self, iota: f64, alpha: &[f64], delta: &[f64]) -> DVector<f64> {
        let size = self.size();
        let mut v = DVector::zeros(self.n_active);
        v[0] = iota;
        for i in 2..=size {
            if let Some(k) = self.active[alpha_col(i)] {
                v[k] = alpha[i - 1];
            }
        }
        for j in 2..=size {
            if let Some(k) = self.active[delta_col(size, j)] {
                v[k] = delta[j - 1];
            }
        }
        v
    }

    /// Inverse of [`pack`](Self::pack), pinning inactive effects.
    pub fn unpack(&self, v: &DVector<f64>) -> (f64, Vec<f64>, Vec<f64>) {
        let size = self.size();
        let mut alpha = vec![0.0; size];
        let mut delta = vec![0.0; size];
        for i in 2..=size {
            alpha[i - 1] = self.active[alpha_col(i)].map_or(PINNED_EFFECT, |k| v[k]);
        }
        for j in 2..=size {
            delta[j - 1] = self.active[delta_col(size, j)].map_or(PINNED_EFFECT, |k| v[k]);
        }
        (v[0], alpha, delta)
    }

    /// `X^T W X` over active columns for cell weights in upper order.
    pub fn weighted_gram(&self, w: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_active, self.n_active);
        for (&(i, j), &wc) in self.cells.iter().zip(w) {
            let cols: Vec<usize> = self.row(i, j).collect();
            for &a in &cols {
                for &b in &cols {
                    m[(a, b)] += wc;
                }
            }
        }
        m
    }

    /// Leverages `h_c = w_c x_c^T (X^T W X)^{-1} x_c`.
    pub fn leverages(&self, w: &[f64]) -> Result<Vec<f64>> {
        let gram = self.weighted_gram(w);
        let inv = gram
            .cholesky()
            .ok_or_else(|| Error::Singular { step: "dispersion leverage (X^T W X)".into() })?
            .inverse();
        Ok(self
            .cells
            .iter()
            .zip(w)
            .map(|(&(i, j), &wc)| {
                let cols: Vec<usize> = self.row(i, j).collect();
                let mut quad = 0.0;
                for &a in &cols {
                    for &b in &cols {
                        quad += inv[(a, b)];
                    }
                }
                wc * quad
            })
            .collect())
    }
}

pub(crate) fn alpha_col(i: usize) -> usize {
    i - 1
}

pub(crate) fn delta_col(size: usize, j: usize) -> usize {
    size - 1 + j - 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle(size: usize, f: impl Fn(usize, usize) -> f64) -> LossTriangle {
        let idx = TriangleIndex::new(size).unwrap();
        let ratios: Vec<f64> = idx.upper_cells().map(|(i, j)| f(i, j)).collect();
        LossTriangle::from_ratios("T", vec![1.0; size], &ratios).unwrap()
    }

    #[test]
    fn leverages_match_dense_hat_matrix() {
        let t = triangle(6, |i, j| 0.1 + 0.01 * (i * j) as f64);
        let d = Design::new(&t).unwrap();
        assert_eq!(d.n_active, 11);
        let w: Vec<f64> = (0..d.cells.len()).map(|k| 0.5 + (k % 7) as f64 * 0.3).collect();
        let h = d.leverages(&w).unwrap();

        let n = d.cells.len();
        let mut x = DMatrix::zeros(n, d.n_active);
        for (r, &(i, j)) in d.cells.iter().enumerate() {
            for c in d.row(i, j) {
                x[(r, c)] = 1.0;
            }
        }
        let sw = DMatrix::from_diagonal(&DVector::from_iterator(n, w.iter().map(|v| v.sqrt())));
        let xw = &sw * &x;
        let hat = &xw * (xw.transpose() * &xw).try_inverse().unwrap() * xw.transpose();
        for r in 0..n {
            assert!((hat[(r, r)] - h[r]).abs() < 1e-12);
        }
        let trace: f64 = h.iter().sum();
        assert!((trace - 11.0).abs() < 1e-8, "{trace}");
        // the two corner cells are the only observations of their effect
        assert!((h[d.index.upper_offset(1, 6)] - 1.0).abs() < 1e-12);
        assert!((h[d.index.upper_offset(6, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_rows_and_columns_are_pinned() {
        let t = triangle(4, |i, j| if i == 3 || j == 4 { 0.0 } else { 0.2 });
        let d = Design::new(&t).unwrap();
        assert_eq!(d.n_active, 5);
        assert!(!d.alpha_active(3));
        assert!(!d.delta_active(4));
        let v = d.pack(-1.0, &[0.0, 0.1, 0.2, 0.3], &[0.0, -0.1, -0.2, -0.3]);
        let (iota, a, dl) = d.unpack(&v);
        assert_eq!(iota, -1.0);
        assert_eq!(a, vec![0.0, 0.1, PINNED_EFFECT, 0.3]);
        assert_eq!(dl, vec![0.0, -0.1, -0.2, PINNED_EFFECT]);

        assert!(Design::new(&triangle(3, |_, _| 0.0)).is_err());
        assert!(Design::new(&triangle(3, |i, _| if i == 1 { 0.0 } else { 1.0 })).is_err());
    }
}
