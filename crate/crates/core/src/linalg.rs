//! Direct solution of the constrained system with a banded LU factorization.
//!
//! Free equations are renumbered by reverse Cuthill–McKee (or kept in natural
//! order when that is narrower) and factored with partial pivoting, so the
//! unsymmetric stabilized matrices are handled the same way as symmetric
//! ones. One step of iterative refinement follows every solve.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Smallest accepted pivot relative to the largest matrix entry.
const PIVOT_TOL: f64 = 1e-15;

/// Ordering and bandwidth of the free equations of a fixed sparsity pattern.
#[derive(Debug, Clone)]
pub struct SystemLayout {
    n_full: usize,
    /// Full dof → position in the band, or `None` for constrained dofs.
    position: Vec<Option<usize>>,
    /// Band position → full dof.
    dof: Vec<usize>,
    kl: usize,
    ku: usize,
}

impl SystemLayout {
    pub fn new(pattern: &CsrMatrix, constrained: &[bool]) -> Result<Self> {
        if constrained.len() != pattern.n {
            return Err(Error::Dimension(format!(
                "constraint mask has {} entries for {} equations",
                constrained.len(),
                pattern.n
            )));
        }
        let free: Vec<usize> = (0..pattern.n).filter(|&i| !constrained[i]).collect();
        let mut local = vec![usize::MAX; pattern.n];
        for (k, &i) in free.iter().enumerate() {
            local[i] = k;
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); free.len()];
        for (k, &i) in free.iter().enumerate() {
            for (j, _) in pattern.row(i) {
                let m = local[j];
                if m != usize::MAX && m != k {
                    adj[k].push(m);
                    adj[m].push(k);
                }
            }
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
            a.dedup();
        }
        let natural: Vec<usize> = (0..free.len()).collect();
        let rcm = reverse_cuthill_mckee(&adj);
        let (kl_n, ku_n) = bandwidths(pattern, &free, &local, &natural);
        let (kl_r, ku_r) = bandwidths(pattern, &free, &local, &rcm);
        let (order, kl, ku) = if 2 * kl_r + ku_r < 2 * kl_n + ku_n { (rcm, kl_r, ku_r) } else { (natural, kl_n, ku_n) };

        let mut position = vec![None; pattern.n];
        let dof: Vec<usize> = order.iter().map(|&k| free[k]).collect();
        for (p, &d) in dof.iter().enumerate() {
            position[d] = Some(p);
        }
        Ok(Self { n_full: pattern.n, position, dof, kl, ku })
    }

    pub fn n_free(&self) -> usize {
        self.dof.len()
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn is_free(&self, dof: usize) -> bool {
        self.position[dof].is_some()
    }

    /// Factors the free–free block of `k`.
    pub fn factor(&self, k: &CsrMatrix) -> Result<BandedLu> {
        if k.n != self.n_full {
            return Err(Error::Dimension(format!("matrix has {} rows, layout expects {}", k.n, self.n_full)));
        }
        let mut lu = BandedLu::zeros(self.n_free(), self.kl, self.ku);
        for (p, &i) in self.dof.iter().enumerate() {
            for (j, v) in k.row(i) {
                if let Some(q) = self.position[j] {
                    *lu.at_mut(p, q) += v;
                }
            }
        }
        lu.factor()?;
        Ok(lu)
    }

    /// Solves `K_ff x_f = r_f` for a full-length right-hand side.
    ///
    /// Constrained entries of `r` are ignored and zero in the result.
    pub fn solve(&self, k: &CsrMatrix, r: &[f64]) -> Result<Vec<f64>> {
        let lu = self.factor(k)?;
        self.solve_factored(k, &lu, r)
    }

    pub fn solve_factored(&self, k: &CsrMatrix, lu: &BandedLu, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.n_full {
            return Err(Error::Dimension(format!("right-hand side has {} entries, expected {}", r.len(), self.n_full)));
        }
        let b: Vec<f64> = self.dof.iter().map(|&i| r[i]).collect();
        let mut x = b.clone();
        lu.solve_in_place(&mut x);
        // One refinement step against the unfactored matrix.
        let full = self.scatter(&x);
        let kx = k.mul_vec(&full);
        let mut res: Vec<f64> = self.dof.iter().zip(&b).map(|(&i, &bi)| bi - kx[i]).collect();
        lu.solve_in_place(&mut res);
        for (xi, di) in x.iter_mut().zip(&res) {
            *xi += di;
        }
        Ok(self.scatter(&x))
    }

    fn scatter(&self, x: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_full];
        for (p, &i) in self.dof.iter().enumerate() {
            full[i] = x[p];
        }
        full
    }
}

fn bandwidths(pattern: &CsrMatrix, free: &[usize], local: &[usize], order: &[usize]) -> (usize, usize) {
    let mut pos = vec![0usize; order.len()];
    for (p, &k) in order.iter().enumerate() {
        pos[k] = p;
    }
    let (mut kl, mut ku) = (0, 0);
    for (k, &i) in free.iter().enumerate() {
        for (j, _) in pattern.row(i) {
            let m = local[j];
            if m == usize::MAX {
                continue;
            }
            let (pi, pj) = (pos[k], pos[m]);
            if pi > pj {
                kl = kl.max(pi - pj);
            } else {
                ku = ku.max(pj - pi);
            }
        }
    }
    (kl, ku)
}

/// Reverse Cuthill–McKee ordering of a symmetric adjacency structure.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let bfs_last = |start: usize| -> usize {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        let mut last = start;
        while let Some(v) = queue.pop_front() {
            last = v;
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        last
    };
    while order.len() < n {
        let seed = (0..n).filter(|&v| !visited[v]).min_by_key(|&v| adj[v].len()).expect("unvisited vertex");
        // A far vertex of the component approximates a peripheral start.
        let start = bfs_last(seed);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (adj[w].len(), w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// LU factors of a banded matrix with partial pivoting (LAPACK `gbtrf` layout).
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        Self { n, kl, ku, ld, ab: vec![0.0; ld * n], ipiv: vec![0; n] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ld + self.kl + self.ku + i - j
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.ab[self.idx(i, j)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let k = self.idx(i, j);
        &mut self.ab[k]
    }

    fn factor(&mut self) -> Result<()> {
        let scale = self.ab.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let imax = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.at(k, k).abs();
            for i in k + 1..=imax {
                let v = self.at(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            let ratio = if scale > 0.0 { best / scale } else { 0.0 };
            if !(ratio > PIVOT_TOL) || !best.is_finite() {
                return Err(Error::Singular { equation: k, pivot_ratio: ratio });
            }
            self.ipiv[k] = p;
            let jmax = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.at(k, k);
            for i in k + 1..=imax {
                *self.at_mut(i, k) /= pivot;
            }
            for j in k + 1..=jmax {
                let akj = self.at(k, j);
                if akj == 0.0 {
                    continue;
                }
                let col_k = self.idx(k + 1, k);
                let col_j = self.idx(k + 1, j);
                for r in 0..imax - k {
                    let l = self.ab[col_k + r];
                    self.ab[col_j + r] -= l * akj;
                }
            }
        }
        Ok(())
    }

    #[allow(clippy::needless_range_loop)]
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let p = self.ipiv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + kl).min(n.saturating_sub(1)) {
                    b[i] -= self.at(i, k) * bk;
                }
            }
        }
        for k in (0..n).rev() {
            b[k] /= self.at(k, k);
            let bk = b[k];
            if bk != 0.0 {
                for i in k.saturating_sub(kl + ku)..k {
                    b[i] -= self.at(i, k) * bk;
                }
            }
        }
    }
}

/// Solves `K x = r` for a square matrix with no constrained equations.
pub fn linear_solve(k: &CsrMatrix, r: &[f64]) -> Result<Vec<f64>> {
    let layout = SystemLayout::new(k, &vec![false; k.n])?;
    layout.solve(k, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn identity_and_hand_solved_unsymmetric() {
        let id = CsrMatrix::from_dense(&DMatrix::identity(3, 3));
        assert_eq!(linear_solve(&id, &[1.0, -2.0, 3.0]).unwrap(), vec![1.0, -2.0, 3.0]);
        let a = CsrMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 1.0]));
        let x = linear_solve(&a, &[3.0, 1.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pivoting_is_required_and_done() {
        let a = CsrMatrix::from_dense(&DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 2.0, 0.0, 3.0, 1.0]));
        let x = linear_solve(&a, &[1.0, 3.0, 4.0]).unwrap();
        let back = a.mul_vec(&x);
        for (u, v) in back.iter().zip([1.0, 3.0, 4.0]) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = CsrMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]));
        assert!(matches!(linear_solve(&a, &[1.0, 1.0]), Err(Error::Singular { .. })));
    }

    #[test]
    fn constrained_rows_are_skipped() {
        let a = CsrMatrix::from_dense(&DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 7.0, 1.0, 3.0, 7.0, 7.0, 7.0, 7.0]));
        let layout = SystemLayout::new(&a, &[false, false, true]).unwrap();
        let x = layout.solve(&a, &[5.0, 4.0, 100.0]).unwrap();
        assert_eq!(x[2], 0.0);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rcm_of_a_path_keeps_bandwidth_one() {
        // Path 0-3-1-4-2 scrambled; RCM must recover a unit-bandwidth order.
        let adj = vec![vec![3], vec![3, 4], vec![4], vec![0, 1], vec![1, 2]];
        let order = reverse_cuthill_mckee(&adj);
        let mut pos = [0; 5];
        for (p, &v) in order.iter().enumerate() {
            pos[v] = p;
        }
        for (v, ns) in adj.iter().enumerate() {
            for &w in ns {
                assert_eq!((pos[v] as i64 - pos[w] as i64).abs(), 1);
            }
        }
    }
}
