//! Dense eigendecomposition of unitary matrices and a banded LU solver for
//! shifted walk operators on large rings.

use std::f64::consts::TAU;

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::lattice::{SpinorField, ZERO};
use crate::walk::CoinField;

/// Eigenphases below this separation are treated as one cluster and their
/// eigenvectors re-orthonormalized.
pub const CLUSTER_TOL: f64 = 1e-7;

/// `U = V diag(e^{i theta}) V^*` with `theta` sorted in `[0, 2 pi)`.
#[derive(Debug, Clone)]
pub struct UnitaryEigen {
    pub angles: Vec<f64>,
    pub vectors: Mat<C64>,
}

impl UnitaryEigen {
    pub fn new(m: &Mat<C64>) -> Result<Self> {
        let n = m.nrows();
        if n == 0 || m.ncols() != n {
            return Err(Error::InvalidArgument("need a nonempty square matrix".into()));
        }
        let eig = m.eigen().map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
        let s = eig.S().column_vector();
        let angles: Vec<f64> = (0..n).map(|j| s[j].arg()).collect();
        Ok(Self::from_pairs(&angles, eig.U()))
    }

    /// Sorts eigenpairs by angle in `[0, 2 pi)` and orthonormalizes clusters
    /// of nearly equal angles.
    pub fn from_pairs(raw: &[f64], u: faer::MatRef<'_, C64>) -> Self {
        let n = raw.len();
        let mut order: Vec<(f64, usize)> = raw.iter().enumerate().map(|(j, a)| (a.rem_euclid(TAU), j)).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let angles: Vec<f64> = order.iter().map(|o| if o.0 >= TAU { 0.0 } else { o.0 }).collect();
        let mut vectors = Mat::<C64>::from_fn(u.nrows(), n, |i, k| u[(i, order[k].1)]);
        for cluster in clusters(&angles) {
            orthonormalize(&mut vectors, &cluster);
            orthonormalize(&mut vectors, &cluster);
        }
        Self { angles, vectors }
    }

    pub fn dim(&self) -> usize {
        self.angles.len()
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.dim()).map(|i| self.vectors[(i, j)]).collect()
    }

    /// Coefficients `(f, v_j)` for every eigenvector.
    pub fn coefficients(&self, f: &[C64]) -> Vec<C64> {
        let n = self.dim();
        (0..n)
            .map(|j| {
                let mut acc = ZERO;
                for i in 0..n {
                    acc += f[i] * self.vectors[(i, j)].conj();
                }
                acc
            })
            .collect()
    }

    /// `sum_j c_j v_j`.
    pub fn synthesize(&self, c: &[C64]) -> Vec<C64> {
        let n = self.dim();
        let mut out = vec![ZERO; n];
        for (j, cj) in c.iter().enumerate() {
            if *cj == ZERO {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.vectors[(i, j)] * cj;
            }
        }
        out
    }

    /// `f(U) v = sum_j f(theta_j) (v, v_j) v_j`.
    pub fn apply_fn(&self, v: &[C64], f: impl Fn(f64) -> C64) -> Vec<C64> {
        let c: Vec<C64> = self.coefficients(v).into_iter().zip(&self.angles).map(|(c, a)| c * f(*a)).collect();
        self.synthesize(&c)
    }
}

fn clusters(angles: &[f64]) -> Vec<Vec<usize>> {
    let n = angles.len();
    let mut out: Vec<Vec<usize>> = Vec::new();
    for j in 0..n {
        match out.last_mut() {
            Some(c) if angles[j] - angles[*c.last().unwrap()] < CLUSTER_TOL => c.push(j),
            _ => out.push(vec![j]),
        }
    }
    if out.len() > 1 && angles[0] + TAU - angles[n - 1] < CLUSTER_TOL {
        let last = out.pop().unwrap();
        out[0].extend(last);
    }
    out.retain(|c| c.len() > 1);
    out
}

fn orthonormalize(v: &mut Mat<C64>, cols: &[usize]) {
    let n = v.nrows();
    for (a, &j) in cols.iter().enumerate() {
        for &k in &cols[..a] {
            let mut p = ZERO;
            for i in 0..n {
                p += v[(i, j)] * v[(i, k)].conj();
            }
            for i in 0..n {
                let vk = v[(i, k)];
                v[(i, j)] -= p * vk;
            }
        }
        let norm: f64 = (0..n).map(|i| v[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            v[(i, j)] /= norm;
        }
    }
}

/// LU factorization with partial pivoting of a banded matrix with `kl` sub- and
/// `ku` super-diagonals.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    width: usize,
    band: Vec<C64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Factorizes the matrix whose nonzero entries are listed in `entries`.
    pub fn factor(n: usize, kl: usize, ku: usize, entries: &[(usize, usize, C64)]) -> Result<Self> {
        let width = 2 * kl + ku + 1;
        let mut lu = Self { n, kl, width, band: vec![ZERO; n * width], pivots: vec![0; n] };
        for &(i, j, v) in entries {
            if j + kl < i || j > i + kl + ku {
                return Err(Error::InvalidArgument(format!("entry ({i}, {j}) lies outside the band")));
            }
            *lu.at_mut(i, j) += v;
        }
        let reach = kl + ku;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.at(k, k).norm();
            for i in k + 1..=last {
                let a = lu.at(i, k).norm();
                if a > best {
                    best = a;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::LinearAlgebra(format!("singular banded matrix at column {k}")));
            }
            lu.pivots[k] = p;
            let jmax = (k + reach).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let t = lu.at(k, j);
                    *lu.at_mut(k, j) = lu.at(p, j);
                    *lu.at_mut(p, j) = t;
                }
            }
            let d = lu.at(k, k);
            for i in k + 1..=last {
                let l = lu.at(i, k) / d;
                *lu.at_mut(i, k) = l;
                if l == ZERO {
                    continue;
                }
                for j in k + 1..=jmax {
                    let u = lu.at(k, j);
                    *lu.at_mut(i, j) -= l * u;
                }
            }
        }
        Ok(lu)
    }

    fn at(&self, i: usize, j: usize) -> C64 {
        self.band[i * self.width + j + self.kl - i]
    }

    fn at_mut(&mut self, i: usize, j: usize) -> &mut C64 {
        &mut self.band[i * self.width + j + self.kl - i]
    }

    pub fn solve_in_place(&self, b: &mut [C64]) {
        let n = self.n;
        let reach = self.width - 1 - self.kl;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                b[i] -= self.at(i, k) * bk;
            }
        }
        for k in (0..n).rev() {
            let mut acc = b[k];
            for j in k + 1..=(k + reach).min(n - 1) {
                acc -= self.at(k, j) * b[j];
            }
            b[k] = acc / self.at(k, k);
        }
    }
}

/// Solves `(U - s) x = f` on the full ring in `O(L)` work. Sites are
/// interleaved as `0, -1, 1, -2, 2, ...` so the periodic coupling stays banded.
#[derive(Debug, Clone)]
pub struct ShiftedWalkSolver {
    half_width: i64,
    lu: BandedLu,
}

impl ShiftedWalkSolver {
    pub fn new(coin: &CoinField, s: C64) -> Result<Self> {
        let grid = coin.grid();
        let l = grid.half_width() as i64;
        let pos = |x: i64| -> usize {
            let x = (x + l).rem_euclid(2 * l) - l;
            if x >= 0 {
                (2 * x) as usize
            } else {
                (-2 * x - 1) as usize
            }
        };
        let mut entries = Vec::with_capacity(8 * grid.len());
        for x in grid.sites() {
            let row_up = 2 * pos(x);
            let row_down = 2 * pos(x) + 1;
            let cl = coin.matrix(x - 1);
            let cr = coin.matrix(x + 1);
            entries.push((row_up, 2 * pos(x - 1), cl[0][0]));
            entries.push((row_up, 2 * pos(x - 1) + 1, cl[0][1]));
            entries.push((row_up, row_up, -s));
            entries.push((row_down, 2 * pos(x + 1), cr[1][0]));
            entries.push((row_down, 2 * pos(x + 1) + 1, cr[1][1]));
            entries.push((row_down, row_down, -s));
        }
        let lu = BandedLu::factor(2 * grid.len(), 5, 5, &entries)?;
        Ok(Self { half_width: l, lu })
    }

    fn pos(&self, x: i64) -> usize {
        if x >= 0 {
            (2 * x) as usize
        } else {
            (-2 * x - 1) as usize
        }
    }

    pub fn solve(&self, f: &SpinorField) -> Result<SpinorField> {
        if f.grid().half_width() as i64 != self.half_width {
            return Err(Error::GridMismatch { left: self.half_width as usize, right: f.grid().half_width() });
        }
        let n = f.grid().len();
        let mut b = vec![ZERO; 2 * n];
        for x in f.grid().sites() {
            let p = self.pos(x);
            let v = f[x];
            b[2 * p] = v[0];
            b[2 * p + 1] = v[1];
        }
        self.lu.solve_in_place(&mut b);
        let mut out = SpinorField::zeros(f.grid());
        for x in f.grid().sites() {
            let p = self.pos(x);
            out[x] = [b[2 * p], b[2 * p + 1]];
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeGrid;
    use crate::walk::{apply_u, Preset};

    #[test]
    fn banded_lu_matches_dense_solution() {
        // Tridiagonal system with a zero leading diagonal entry forces pivoting.
        let n = 6;
        let mut entries = Vec::new();
        for i in 0..n {
            if i > 0 {
                entries.push((i, i - 1, C64::new(1.0, 0.5)));
            }
            if i + 1 < n {
                entries.push((i, i + 1, C64::new(-2.0, 0.0)));
            }
            let d = if i == 0 { 0.0 } else { 3.0 + i as f64 };
            entries.push((i, i, C64::new(d, -0.2)));
        }
        let lu = BandedLu::factor(n, 1, 1, &entries).unwrap();
        let x: Vec<C64> = (0..n).map(|i| C64::new(i as f64, 1.0 - i as f64)).collect();
        let mut b = vec![ZERO; n];
        for &(i, j, v) in &entries {
            b[i] += v * x[j];
        }
        lu.solve_in_place(&mut b);
        for i in 0..n {
            assert!((b[i] - x[i]).norm() < 1e-13);
        }
    }

    #[test]
    fn shifted_solver_inverts_u_minus_s() {
        let g = LatticeGrid::new(9).unwrap();
        let coin = Preset::KlsSmooth.coin(g).unwrap();
        let s = C64::from_polar(1.0, 0.4) * 0.999;
        let solver = ShiftedWalkSolver::new(&coin, s).unwrap();
        let f = SpinorField::from_fn(g, |x| [C64::new(x as f64, 1.0), C64::new(0.5, -(x as f64))]);
        let h = solver.solve(&f).unwrap();
        let back = &apply_u(&coin, &h).unwrap() - &h.scaled(s);
        assert!((&back - &f).norm() < 1e-11 * f.norm());
    }

    #[test]
    fn eigen_of_free_walk_is_orthonormal() {
        let g = LatticeGrid::new(8).unwrap();
        let coin = Preset::Free.coin(g).unwrap();
        let eig = UnitaryEigen::new(&coin.dense_matrix()).unwrap();
        let n = eig.dim();
        for j in 0..n {
            for k in 0..n {
                let mut p = ZERO;
                for i in 0..n {
                    p += eig.vectors[(i, j)] * eig.vectors[(i, k)].conj();
                }
                let want = if j == k { 1.0 } else { 0.0 };
                assert!((p - want).norm() < 1e-10, "({j},{k}) {p}");
            }
        }
    }
}
