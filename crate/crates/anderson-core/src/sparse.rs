//! Sparse symmetric storage, banded LDLᵀ and preconditioned CG.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Compressed sparse rows holding both triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a symmetric matrix from lower-triangle entries `(i, j, v)`
    /// with `i >= j`; each off-diagonal entry is mirrored, duplicates are
    /// summed.
    pub fn from_lower_triplets(n: usize, lower: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in lower {
            if i >= n || j > i {
                return Err(Error::InvalidArgument(format!("entry ({i}, {j}) is not in the lower triangle of a {n}x{n} matrix")));
            }
            rows[i].push((j, v));
            if i != j {
                rows[j].push((i, v));
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Ok(Self { n, row_ptr, cols, values })
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::InvalidArgument("matrix is not square".into()));
        }
        let mut lower = Vec::new();
        for i in 0..n {
            for j in 0..=i {
                if a[(i, j)] != a[(j, i)] {
                    return Err(Error::InvalidArgument(format!("matrix is not symmetric at ({i}, {j})")));
                }
                if a[(i, j)] != 0.0 || i == j {
                    lower.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_lower_triplets(n, &lower)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`.
    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_into(x, &mut y);
        y
    }

    /// `max_i Σ_j |a_ij|`, which bounds the spectral radius.
    pub fn row_norm_bound(&self) -> f64 {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Gershgorin lower bound on the spectrum.
    pub fn gershgorin_lower(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let mut d = 0.0;
                let mut off = 0.0;
                for (c, v) in self.row(i) {
                    if c == i {
                        d += v;
                    } else {
                        off += v.abs();
                    }
                }
                d - off
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn bandwidth(&self) -> usize {
        (0..self.n).flat_map(|i| self.row(i).map(move |(c, _)| i.abs_diff(c))).max().unwrap_or(0)
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(c, v)| self.get(c, i).to_bits() == v.to_bits()))
    }

    /// `A + s I`.
    pub fn shifted(&self, s: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            let k = (self.row_ptr[i]..self.row_ptr[i + 1]).find(|&k| self.cols[k] == i);
            match k {
                Some(k) => out.values[k] += s,
                None => {
                    let lower: Vec<_> = self.lower_triplets().into_iter().chain((0..self.n).map(|i| (i, i, s))).collect();
                    return Self::from_lower_triplets(self.n, &lower).expect("entries come from a valid matrix");
                }
            }
        }
        out
    }

    /// `A + diag(v)`.
    pub fn plus_diagonal(&self, v: &[f64]) -> Self {
        let lower: Vec<_> = self.lower_triplets().into_iter().chain(v.iter().enumerate().map(|(i, &x)| (i, i, x))).collect();
        Self::from_lower_triplets(self.n, &lower).expect("entries come from a valid matrix")
    }

    pub fn lower_triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.n).flat_map(|i| self.row(i).filter(move |&(c, _)| c <= i).map(move |(c, v)| (i, c, v))).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (c, v) in self.row(i) {
                a[(i, c)] = v;
            }
        }
        a
    }

    /// Symmetric tridiagonal `(diagonal, off-diagonal)` when the bandwidth
    /// is at most one.
    pub fn as_tridiagonal(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.bandwidth() > 1 {
            return None;
        }
        let d = self.diagonal();
        let e = (1..self.n).map(|i| self.get(i, i - 1)).collect();
        Some((d, e))
    }
}

/// `LDLᵀ` factor of a banded symmetric matrix without pivoting.
#[derive(Debug, Clone)]
pub struct BandedLdl {
    n: usize,
    band: usize,
    /// Column-major band: entry `(c + off, c)` at `c * (band + 1) + off`.
    factor: Vec<f64>,
    negative: usize,
}

impl BandedLdl {
    /// Factors `A - shift I`. Fails on a vanishing pivot.
    pub fn new(a: &CsrMatrix, shift: f64) -> Result<Self> {
        let n = a.dim();
        let b = a.bandwidth();
        let w = b + 1;
        let mut f = vec![0.0; n * w];
        for i in 0..n {
            for (c, v) in a.row(i) {
                if c <= i {
                    f[c * w + (i - c)] = v;
                }
            }
            f[i * w] -= shift;
        }
        let scale = a.row_norm_bound().max(shift.abs()).max(f64::MIN_POSITIVE);
        let mut negative = 0;
        for j in 0..n {
            let d = f[j * w];
            if !d.is_finite() || d.abs() <= 1e-14 * scale {
                return Err(Error::NotPositiveDefinite(format!("pivot {d:e} at row {j}")));
            }
            if d < 0.0 {
                negative += 1;
            }
            let reach = b.min(n - 1 - j);
            let (head, tail) = f.split_at_mut((j + 1) * w);
            let col = &mut head[j * w..];
            for i in 1..=reach {
                let ui = col[i];
                if ui == 0.0 {
                    continue;
                }
                let s = ui / d;
                let target = &mut tail[(i - 1) * w..(i - 1) * w + (reach - i) + 1];
                for (t, &u) in target.iter_mut().zip(&col[i..=reach]) {
                    *t -= s * u;
                }
            }
            for v in col[1..=reach].iter_mut() {
                *v /= d;
            }
        }
        Ok(Self { n, band: b, factor: f, negative })
    }

    /// Number of negative pivots, i.e. eigenvalues of `A` below `shift`.
    pub fn negative_pivots(&self) -> usize {
        self.negative
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let (n, b, w) = (self.n, self.band, self.band + 1);
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                let reach = b.min(n - 1 - j);
                for off in 1..=reach {
                    x[j + off] -= self.factor[j * w + off] * xj;
                }
            }
        }
        for j in 0..n {
            x[j] /= self.factor[j * w];
        }
        for j in (0..n).rev() {
            let reach = b.min(n - 1 - j);
            let mut s = x[j];
            for off in 1..=reach {
                s -= self.factor[j * w + off] * x[j + off];
            }
            x[j] = s;
        }
    }

    /// Flop estimate `n b²` of a factorisation.
    pub fn cost(a: &CsrMatrix) -> f64 {
        let b = a.bandwidth() as f64;
        a.dim() as f64 * b * b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Final `‖b - A x‖ / ‖b‖` from an explicit product.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradients for a symmetric positive definite
/// operator. Stops when the recursive residual drops to `tol ‖b‖`, then
/// confirms with an explicit product.
pub fn pcg<A, P>(apply: A, precondition: P, b: &[f64], tol: f64, max_iter: usize) -> Result<CgOutcome>
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok(CgOutcome { solution: vec![0.0; n], iterations: 0, relative_residual: 0.0 });
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut explicit = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    // Recursive residuals drift; a few explicit restarts tighten them.
    let target = 0.5 * tol * bnorm;
    loop {
        if dot(&r, &r).sqrt() <= target {
            apply(&x, &mut explicit);
            for (e, bi) in explicit.iter_mut().zip(b) {
                *e = bi - *e;
            }
            let true_res = dot(&explicit, &explicit).sqrt();
            if true_res <= tol * bnorm {
                return Ok(CgOutcome { solution: x, iterations, relative_residual: true_res / bnorm });
            }
            r.copy_from_slice(&explicit);
            precondition(&r, &mut z);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
        }
        if iterations >= max_iter {
            apply(&x, &mut explicit);
            let res = explicit.iter().zip(b).map(|(e, bi)| (bi - e).powi(2)).sum::<f64>().sqrt();
            return Err(Error::MaxIterations { iterations, residual: res / bnorm });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotPositiveDefinite(format!("curvature {pap:e} at iteration {iterations}")));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        iterations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize, periodic: bool) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
        }
        if periodic {
            t.push((n - 1, 0, -1.0));
        }
        CsrMatrix::from_lower_triplets(n, &t).unwrap()
    }

    #[test]
    fn mirrored_and_summed() {
        let a = laplacian_1d(5, true);
        assert!(a.is_symmetric());
        assert_eq!(a.get(0, 4), -1.0);
        assert_eq!(a.bandwidth(), 4);
        let two = CsrMatrix::from_lower_triplets(2, &[(0, 0, 2.0), (1, 1, 2.0), (1, 0, -1.0), (1, 0, -1.0)]).unwrap();
        assert_eq!(two.get(0, 1), -2.0);
        assert_eq!(two.nnz(), 4);
    }

    #[test]
    fn banded_solve_and_inertia() {
        let a = laplacian_1d(50, false);
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.mul(&x);
        let f = BandedLdl::new(&a, 0.0).unwrap();
        assert_eq!(f.negative_pivots(), 0);
        let y = f.solve(&b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-9);
        }
        // eigenvalues 2 - 2cos(kπ/51); three lie below 0.03
        let below = (1..=50).filter(|&k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / 51.0).cos() < 0.03).count();
        assert_eq!(BandedLdl::new(&a, 0.03).unwrap().negative_pivots(), below);
    }

    #[test]
    fn pcg_solves_spd() {
        let a = laplacian_1d(40, true).shifted(0.5);
        let b: Vec<f64> = (0..40).map(|i| 1.0 + (i % 3) as f64).collect();
        let out = pcg(|x, y| a.mul_into(x, y), |r, z| z.copy_from_slice(r), &b, 1e-12, 500).unwrap();
        assert!(out.relative_residual <= 1e-12);
        let dense = a.to_dense().cholesky().unwrap().solve(&nalgebra::DVector::from_vec(b));
        for (u, v) in out.solution.iter().zip(dense.iter()) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn pcg_rejects_indefinite() {
        let a = laplacian_1d(10, false).shifted(-1.0);
        let b = vec![1.0; 10];
        let r = pcg(|x, y| a.mul_into(x, y), |r, z| z.copy_from_slice(r), &b, 1e-12, 100);
        assert!(matches!(r, Err(Error::NotPositiveDefinite(_))));
    }
}
