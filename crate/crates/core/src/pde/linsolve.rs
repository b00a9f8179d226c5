//! Factorizations reused across time steps.
//!
//! Periodic finite-difference matrices are banded once the ring is reordered
//! as `0, n−1, 1, n−2, …`; neighbours at ring distance `s` then sit at most
//! `2s` positions apart. Such matrices get a banded LU without pivoting, which
//! is accepted only if the pivots and growth stay bounded. Everything else
//! goes through a dense partial-pivoting LU.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{Error, Result};

pub(crate) enum Factorization {
    Dense { lu: LU<f64, Dyn, Dyn>, work: DVector<f64> },
    Banded(BandedLu),
}

impl Factorization {
    pub(crate) fn new(m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if let Some((perm, bw)) = narrowest_ordering(&m) {
            if n >= 16 && bw * 4 <= n {
                if let Some(b) = BandedLu::factor(&m, perm, bw) {
                    return Ok(Factorization::Banded(b));
                }
            }
        }
        let lu = m.lu();
        let u = lu.u();
        let diag = u.diagonal();
        let max = diag.amax();
        let min = diag.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
        if !(min > f64::EPSILON * max) {
            return Err(Error::SingularSystem(format!(
                "time-stepping matrix has pivot ratio {:.3e}",
                if max > 0.0 { min / max } else { 0.0 }
            )));
        }
        Ok(Factorization::Dense { lu, work: DVector::zeros(n) })
    }

    pub(crate) fn solve_in_place(&mut self, x: &mut [f64]) {
        match self {
            Factorization::Dense { lu, work } => {
                work.as_mut_slice().copy_from_slice(x);
                lu.solve_mut(work);
                x.copy_from_slice(work.as_slice());
            }
            Factorization::Banded(b) => b.solve_in_place(x),
        }
    }

    #[cfg(test)]
    pub(crate) fn is_banded(&self) -> bool {
        matches!(self, Factorization::Banded(_))
    }
}

fn bandwidth(m: &DMatrix<f64>, position: &[usize]) -> usize {
    let mut bw = 0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)] != 0.0 {
                bw = bw.max(position[i].abs_diff(position[j]));
            }
        }
    }
    bw
}

/// Picks the natural or the ring-interleaved ordering, whichever is narrower.
/// Returns `(perm, bandwidth)` with `perm[new] = old`.
fn narrowest_ordering(m: &DMatrix<f64>) -> Option<(Vec<usize>, usize)> {
    let n = m.nrows();
    if n == 0 {
        return None;
    }
    let natural: Vec<usize> = (0..n).collect();
    let ring: Vec<usize> = (0..n).map(|p| if p % 2 == 0 { p / 2 } else { n - 1 - p / 2 }).collect();
    let position = |perm: &[usize]| {
        let mut pos = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            pos[old] = new;
        }
        pos
    };
    let bw_nat = bandwidth(m, &position(&natural));
    let bw_ring = bandwidth(m, &position(&ring));
    Some(if bw_ring < bw_nat { (ring, bw_ring) } else { (natural, bw_nat) })
}

pub(crate) struct BandedLu {
    n: usize,
    bw: usize,
    perm: Vec<usize>,
    band: Vec<f64>,
    work: Vec<f64>,
}

impl BandedLu {
    fn factor(m: &DMatrix<f64>, perm: Vec<usize>, bw: usize) -> Option<Self> {
        let n = m.nrows();
        let width = 2 * bw + 1;
        let mut band = vec![0.0; n * width];
        let mut scale = 0.0f64;
        for i in 0..n {
            for j in i.saturating_sub(bw)..(i + bw + 1).min(n) {
                let v = m[(perm[i], perm[j])];
                band[i * width + j + bw - i] = v;
                scale = scale.max(v.abs());
            }
        }
        let at = |i: usize, j: usize| i * width + j + bw - i;
        for k in 0..n {
            let pivot = band[at(k, k)];
            if !(pivot.abs() > 1e-10 * scale) {
                return None;
            }
            for i in k + 1..(k + bw + 1).min(n) {
                let l = band[at(i, k)] / pivot;
                band[at(i, k)] = l;
                if l != 0.0 {
                    for j in k + 1..(k + bw + 1).min(n) {
                        band[at(i, j)] -= l * band[at(k, j)];
                    }
                }
            }
        }
        let growth = band.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if !(growth <= 1e8 * scale) {
            return None;
        }
        Some(Self { n, bw, perm, band, work: vec![0.0; n] })
    }

    fn solve_in_place(&mut self, x: &mut [f64]) {
        let (n, bw, width) = (self.n, self.bw, 2 * self.bw + 1);
        let y = &mut self.work;
        for (new, &old) in self.perm.iter().enumerate() {
            y[new] = x[old];
        }
        for i in 0..n {
            let row = &self.band[i * width..(i + 1) * width];
            let mut acc = y[i];
            for j in i.saturating_sub(bw)..i {
                acc -= row[j + bw - i] * y[j];
            }
            y[i] = acc;
        }
        for i in (0..n).rev() {
            let row = &self.band[i * width..(i + 1) * width];
            let mut acc = y[i];
            for j in i + 1..(i + bw + 1).min(n) {
                acc -= row[j + bw - i] * y[j];
            }
            y[i] = acc / row[bw];
        }
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
    }
}

/// Row-compressed copy of a dense matrix, for repeated products with
/// mostly-zero stencil matrices.
pub(crate) struct SparseRows {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseRows {
    pub(crate) fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut s = Self { row_ptr: vec![0], cols: Vec::new(), vals: Vec::new() };
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != 0.0 {
                    s.cols.push(j);
                    s.vals.push(v);
                }
            }
            s.row_ptr.push(s.cols.len());
        }
        s
    }

    pub(crate) fn mul_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[idx] * x[self.cols[idx]];
            }
            *o = acc;
        }
    }
}
