//! Spectrum of the linear walk: essential band, discrete eigenpairs, the
//! transfer-matrix description of eigenfunctions, projections and resolvents.

use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use faer::{Mat, Side};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::lattice::{LatticeGrid, SpinorField, ONE, ZERO};
use crate::linalg::{ShiftedWalkSolver, UnitaryEigen};
use crate::walk::{apply_u, CoinField, Mat2};

/// Eigenvalues need `|cos lambda| - |beta_inf|` above this margin to count as
/// lying in the gap.
pub const GAP_MARGIN: f64 = 1e-8;
/// Minimum mass fraction within `|x| <= L/2` for a discrete eigenvector.
pub const LOCALIZATION_MIN: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `cos lambda > |beta_inf|`.
    Plus,
    /// `cos lambda < -|beta_inf|`.
    Minus,
}

impl Branch {
    fn label(self) -> &'static str {
        match self {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        }
    }
}

/// A discrete eigenvalue `e^{i lambda}` with its eigenfunction.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub lambda: f64,
    /// l2-normalized, with its largest component real and positive.
    pub phi: SpinorField,
    /// `P_+ phi / ||P_+ phi||`.
    pub phi_plus: SpinorField,
    /// `||P_+ phi||`.
    pub even_weight: f64,
    pub decay_rate: f64,
}

impl Eigenpair {
    fn from_vector(lambda: f64, mut phi: SpinorField, alpha_abs: f64) -> Result<Self> {
        let n = phi.norm();
        phi.scale(C64::new(1.0 / n, 0.0));
        let big = phi.values().iter().flatten().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(ONE);
        phi.scale(big.conj() / big.norm());
        let even = phi.p_plus();
        let even_weight = even.norm();
        let phi_plus = even.scaled(C64::new(1.0 / even_weight, 0.0));
        Ok(Self { lambda, phi, phi_plus, even_weight, decay_rate: decay_rate(lambda, alpha_abs)? })
    }

    /// Same eigenpair placed on a larger grid, zero outside the original sites.
    pub fn embedded(&self, grid: LatticeGrid) -> Result<Eigenpair> {
        let e = crate::lattice::Embedding::new(self.phi.grid(), grid)?;
        Ok(Eigenpair {
            lambda: self.lambda,
            phi: e.extend(&self.phi)?,
            phi_plus: e.extend(&self.phi_plus)?,
            even_weight: self.even_weight,
            decay_rate: self.decay_rate,
        })
    }
}

/// `xi = arccosh(|cos lambda| / |beta_inf|)` with `|beta_inf| = sqrt(1 - |alpha_inf|^2)`.
pub fn decay_rate(lambda: f64, alpha_abs: f64) -> Result<f64> {
    if !(alpha_abs > 0.0 && alpha_abs < 1.0) {
        return Err(Error::InvalidArgument(format!("|alpha_inf| = {alpha_abs} must lie in (0, 1)")));
    }
    let band = (1.0 - alpha_abs * alpha_abs).sqrt();
    let c = lambda.cos().abs();
    if c <= band {
        return Err(Error::InEssentialBand { lambda, band });
    }
    Ok((c / band).acosh())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolventMode {
    /// `R_U(mu) = (U e^{-i mu} - 1)^{-1}` on the whole space.
    Full,
    /// `(U - e^{i lambda})^{-1}` on the orthogonal complement of `phi`.
    OffPhi,
}

/// Dense spectral data of `U` on one grid.
#[derive(Debug, Clone)]
pub struct SpectralData {
    coin: CoinField,
    eigen: UnitaryEigen,
    localization: Vec<f64>,
    discrete: Vec<usize>,
    selected: Option<(usize, Eigenpair)>,
}

/// Dense eigendecomposition is refused above this dimension.
pub const DENSE_CAP: usize = 4096;

impl SpectralData {
    pub fn new(coin: &CoinField) -> Result<Self> {
        Self::with_cap(coin, DENSE_CAP)
    }

    pub fn with_cap(coin: &CoinField, cap: usize) -> Result<Self> {
        let grid = coin.grid();
        let dim = 2 * grid.len();
        if dim > cap {
            return Err(Error::InvalidArgument(format!(
                "dense eigendecomposition of dimension {dim} exceeds the cap {cap}"
            )));
        }
        let eigen = walk_eigen(coin)?;
        let half = grid.half_width() as i64 / 2;
        let mut localization = Vec::with_capacity(dim);
        for j in 0..dim {
            let v = SpinorField::from_flat(grid, &eigen.column(j))?;
            localization.push(v.mass_fraction_within(half));
        }
        let band = coin.beta_inf().norm();
        let discrete: Vec<usize> = (0..dim)
            .filter(|&j| eigen.angles[j].cos().abs() - band > GAP_MARGIN && localization[j] >= LOCALIZATION_MIN)
            .collect();
        let mut sd = Self { coin: coin.clone(), eigen, localization, discrete, selected: None };
        if let Some(j) = sd.branch_index(Branch::Plus) {
            let pair = sd.pair_at(j)?;
            // Keep the stored eigenvector identical to the phase-fixed phi.
            for (i, c) in pair.phi.to_flat().into_iter().enumerate() {
                sd.eigen.vectors[(i, j)] = c;
            }
            sd.selected = Some((j, pair));
        }
        Ok(sd)
    }

    pub fn grid(&self) -> LatticeGrid {
        self.coin.grid()
    }

    pub fn coin(&self) -> &CoinField {
        &self.coin
    }

    pub fn eigen(&self) -> &UnitaryEigen {
        &self.eigen
    }

    pub fn eigen_angles(&self) -> &[f64] {
        &self.eigen.angles
    }

    pub fn localization(&self) -> &[f64] {
        &self.localization
    }

    pub fn discrete_indices(&self) -> &[usize] {
        &self.discrete
    }

    /// `|beta_inf|`: the essential spectrum is `|cos lambda| <= band_edge`.
    pub fn band_edge(&self) -> f64 {
        self.coin.beta_inf().norm()
    }

    pub fn eigenvector(&self, j: usize) -> Result<SpinorField> {
        SpinorField::from_flat(self.grid(), &self.eigen.column(j))
    }

    fn branch_index(&self, branch: Branch) -> Option<usize> {
        self.discrete
            .iter()
            .copied()
            .filter(|&j| match branch {
                Branch::Plus => self.eigen.angles[j].cos() > 0.0,
                Branch::Minus => self.eigen.angles[j].cos() < 0.0,
            })
            .max_by(|&a, &b| self.eigen.angles[a].cos().abs().total_cmp(&self.eigen.angles[b].cos().abs()))
    }

    fn pair_at(&self, j: usize) -> Result<Eigenpair> {
        Eigenpair::from_vector(self.eigen.angles[j], self.eigenvector(j)?, self.coin.alpha_inf().norm())
    }

    pub fn discrete_eigenpair(&self, branch: Branch) -> Result<Eigenpair> {
        let j = self.branch_index(branch).ok_or(Error::NoDiscreteEigenvalue(branch.label()))?;
        self.pair_at(j)
    }

    /// The plus-branch eigenpair used for projections and the bound-state family.
    pub fn selected(&self) -> Result<&Eigenpair> {
        self.selected.as_ref().map(|s| &s.1).ok_or(Error::NoDiscreteEigenvalue("plus"))
    }

    /// `P_c u = u - (u, phi_+) phi_+`.
    pub fn project_continuous(&self, u: &SpinorField) -> Result<SpinorField> {
        let phi = &self.selected()?.phi_plus;
        let mut out = u.clone();
        out.axpy(-u.inner(phi)?, phi)?;
        Ok(out)
    }

    /// `P~_c u = u - (u, phi) phi` with the l2-normalized `phi`.
    pub fn project_off_phi(&self, u: &SpinorField) -> Result<SpinorField> {
        let phi = &self.selected()?.phi;
        let mut out = u.clone();
        out.axpy(-u.inner(phi)?, phi)?;
        Ok(out)
    }

    /// Removes every discrete eigenvector: the continuous spectral projection of `U`.
    pub fn project_continuous_spectrum(&self, u: &SpinorField) -> Result<SpinorField> {
        let mut out = u.clone();
        for &j in &self.discrete {
            let v = self.eigenvector(j)?;
            out.axpy(-u.inner(&v)?, &v)?;
        }
        Ok(out)
    }

    pub fn resolvent_solve(&self, mu: C64, f: &SpinorField, mode: ResolventMode) -> Result<SpinorField> {
        match mode {
            ResolventMode::Full => self.resolvent(mu, f),
            ResolventMode::OffPhi => self.resolvent_off_phi(f),
        }
    }

    /// `R_U(mu) f = sum_j (f, v_j) / (e^{i (theta_j - mu)} - 1) v_j`.
    pub fn resolvent(&self, mu: C64, f: &SpinorField) -> Result<SpinorField> {
        self.grid().check_same(&f.grid())?;
        let c = self.eigen.coefficients(&f.to_flat());
        let mut scaled = Vec::with_capacity(c.len());
        for (cj, a) in c.into_iter().zip(&self.eigen.angles) {
            let d = (C64::new(0.0, 1.0) * (C64::new(*a, 0.0) - mu)).exp() - 1.0;
            if d.norm() < 1e-10 {
                return Err(Error::NearSingular(d.norm()));
            }
            scaled.push(cj / d);
        }
        SpinorField::from_flat(self.grid(), &self.eigen.synthesize(&scaled))
    }

    /// `(U - e^{i lambda})^{-1} P~_c f`, the solution orthogonal to `phi`.
    pub fn resolvent_off_phi(&self, f: &SpinorField) -> Result<SpinorField> {
        self.grid().check_same(&f.grid())?;
        let (skip, pair) = self.selected.as_ref().ok_or(Error::NoDiscreteEigenvalue("plus"))?;
        let target = C64::from_polar(1.0, pair.lambda);
        let c = self.eigen.coefficients(&f.to_flat());
        let mut scaled = Vec::with_capacity(c.len());
        for (j, (cj, a)) in c.into_iter().zip(&self.eigen.angles).enumerate() {
            if j == *skip {
                scaled.push(ZERO);
                continue;
            }
            let d = C64::from_polar(1.0, *a) - target;
            if d.norm() < 1e-10 {
                return Err(Error::NearSingular(d.norm()));
            }
            scaled.push(cj / d);
        }
        SpinorField::from_flat(self.grid(), &self.eigen.synthesize(&scaled))
    }

    /// Re-solves the selected eigenpair on a larger lattice by inverse iteration,
    /// seeded with this (window) eigenfunction.
    pub fn refine_on(&self, coin: &CoinField, iterations: usize) -> Result<Eigenpair> {
        refine_pair_on(self.selected()?, coin, iterations)
    }

    /// Every discrete eigenpair, refined on the lattice of `coin`.
    pub fn discrete_modes_on(&self, coin: &CoinField, iterations: usize) -> Result<Vec<Eigenpair>> {
        self.discrete.iter().map(|&j| refine_pair_on(&self.pair_at(j)?, coin, iterations)).collect()
    }
}

/// Inverse iteration for `U` on the lattice of `coin`, seeded with `seed` embedded there.
pub fn refine_pair_on(seed: &Eigenpair, coin: &CoinField, iterations: usize) -> Result<Eigenpair> {
    let mut v = seed.embedded(coin.grid())?.phi;
    let mut lambda = seed.lambda;
    for _ in 0..iterations.max(1) {
        let shift = C64::from_polar(1.0 + 1e-13, lambda);
        let solver = ShiftedWalkSolver::new(coin, shift)?;
        let mut w = solver.solve(&v)?;
        w.scale(C64::new(1.0 / w.norm(), 0.0));
        let uw = apply_u(coin, &w)?;
        lambda = uw.inner(&w)?.arg().rem_euclid(TAU);
        v = w;
    }
    Eigenpair::from_vector(lambda, v, coin.alpha_inf().norm())
}

/// Spread of `cos nu` within which eigenvectors of `(V + V^*) / 2` are mixed
/// and `V` is diagonalized again.
const COS_CLUSTER_TOL: f64 = 1e-6;

/// Dense eigendecomposition of `U = S C` through the parity block of `U^2`.
///
/// `U` maps even sites to odd sites and back, so `V = U^2` restricted to even
/// sites is unitary of half the dimension. The Hermitian part of `V` is
/// diagonalized, `V` is diagonalized inside each cluster of that spectrum, and
/// each `V w = e^{i nu} w` gives the eigenvectors `(w + e^{-i lambda} U w) / sqrt 2`
/// of `U` with `lambda = nu / 2` and `nu / 2 + pi`.
pub fn walk_eigen(coin: &CoinField) -> Result<UnitaryEigen> {
    let grid = coin.grid();
    let even: Vec<usize> = (0..grid.len()).filter(|&i| grid.site(i).rem_euclid(2) == 0).collect();
    let m = 2 * even.len();
    let lift = |w: &[C64]| {
        let mut f = SpinorField::zeros(grid);
        for (k, &i) in even.iter().enumerate() {
            f.values_mut()[i] = [w[2 * k], w[2 * k + 1]];
        }
        f
    };
    let restrict = |f: &SpinorField| -> Vec<C64> { even.iter().flat_map(|&i| f.values()[i]).collect() };
    let v_apply = |w: &[C64]| -> Result<Vec<C64>> { Ok(restrict(&apply_u(coin, &apply_u(coin, &lift(w))?)?)) };

    let mut v = Mat::<C64>::zeros(m, m);
    let mut e = vec![ZERO; m];
    for j in 0..m {
        e[j] = ONE;
        for (i, c) in v_apply(&e)?.into_iter().enumerate() {
            v[(i, j)] = c;
        }
        e[j] = ZERO;
    }
    let h = Mat::<C64>::from_fn(m, m, |i, j| (v[(i, j)] + v[(j, i)].conj()) * 0.5);
    let eig = h.self_adjoint_eigen(Side::Lower).map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
    drop(h);
    let cosines: Vec<f64> = (0..m).map(|j| eig.S().column_vector()[j].re).collect();
    let mut w = eig.U().to_owned();
    let y = &v * &w;
    drop(v);

    let mut nu = vec![0.0; m];
    let mut start = 0;
    while start < m {
        let mut end = start + 1;
        while end < m && cosines[end] - cosines[end - 1] < COS_CLUSTER_TOL {
            end += 1;
        }
        let k = end - start;
        // B = W_c^* V W_c on the cluster.
        let b = Mat::<C64>::from_fn(k, k, |a, c| (0..m).map(|i| w[(i, start + a)].conj() * y[(i, start + c)]).sum());
        if k == 1 {
            nu[start] = b[(0, 0)].arg();
        } else {
            let be = b.eigen().map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
            let q = be.U();
            let rotated = Mat::<C64>::from_fn(m, k, |i, c| (0..k).map(|a| w[(i, start + a)] * q[(a, c)]).sum());
            for c in 0..k {
                nu[start + c] = be.S().column_vector()[c].arg();
                let norm = (0..m).map(|i| rotated[(i, c)].norm_sqr()).sum::<f64>().sqrt();
                for i in 0..m {
                    w[(i, start + c)] = rotated[(i, c)] / norm;
                }
            }
        }
        start = end;
    }
    drop(y);

    let dim = 2 * m;
    let mut vectors = Mat::<C64>::zeros(dim, dim);
    let mut angles = Vec::with_capacity(dim);
    for j in 0..m {
        let col: Vec<C64> = (0..m).map(|i| w[(i, j)]).collect();
        let wf = lift(&col).to_flat();
        let uw = apply_u(coin, &lift(&col))?.to_flat();
        for (s, lambda) in [0.5 * nu[j], 0.5 * nu[j] + PI].into_iter().enumerate() {
            let phase = C64::from_polar(1.0, -lambda);
            let k = 2 * j + s;
            for i in 0..dim {
                vectors[(i, k)] = (wf[i] + phase * uw[i]) * FRAC_1_SQRT_2;
            }
            angles.push(lambda);
        }
    }
    Ok(UnitaryEigen::from_pairs(&angles, vectors.as_ref()))
}

/// `T_lambda(x)` mapping `psi(x) = (phi_down(x-1), phi_up(x))` to `psi(x+1)`:
/// `(1 / conj beta) [[e^{i(lambda - theta)}, alpha], [conj alpha, e^{-i(lambda - theta)}]]`.
pub fn transfer_matrix(coin: &CoinField, lambda: f64, x: i64) -> Result<Mat2> {
    let c = coin.site(x);
    site_transfer(c.theta, c.alpha, c.beta, lambda)
}

pub fn site_transfer(theta: f64, alpha: C64, beta: C64, lambda: f64) -> Result<Mat2> {
    if beta.norm() < 1e-14 {
        return Err(Error::InvalidArgument("transfer matrix needs beta != 0".into()));
    }
    let k = ONE / beta.conj();
    let e = C64::from_polar(1.0, lambda - theta);
    Ok([[k * e, k * alpha], [k * alpha.conj(), k * e.conj()]])
}

/// Decaying solution of the eigenvalue equation for `x >= x0`, written as
/// `psi(x) = (phi_down(x-1), phi_up(x))` and normalized so that its decaying
/// mode has unit amplitude at infinity.
#[derive(Debug, Clone)]
pub struct DecayingSolution {
    pub x0: i64,
    pub psi: Vec<[C64; 2]>,
    pub decay_rate: f64,
    pub iterations: usize,
    pub tail_sum: f64,
}

impl DecayingSolution {
    pub fn at(&self, x: i64) -> [C64; 2] {
        self.psi[(x - self.x0) as usize]
    }
}

/// Builds the decaying solution on `[x0, L)` by the Volterra fixed point in
/// diagonalizing coordinates of `T_inf`.
pub fn decaying_solution(coin: &CoinField, lambda: f64, x0: i64) -> Result<DecayingSolution> {
    let grid = coin.grid();
    let l = grid.half_width() as i64;
    if !(-l..l).contains(&x0) {
        return Err(Error::InvalidArgument(format!("x0 = {x0} is outside the grid")));
    }
    let a_inf = coin.alpha_inf();
    let t_inf = site_transfer(0.0, a_inf, coin.beta_inf(), lambda)?;
    // Eigenvalues tau_pm = e^{i chi} e^{pm xi} of T_inf.
    let tr = t_inf[0][0] + t_inf[1][1];
    let det = t_inf[0][0] * t_inf[1][1] - t_inf[0][1] * t_inf[1][0];
    let disc = (tr * tr - 4.0 * det).sqrt();
    let (mut tp, mut tm) = ((tr + disc) * 0.5, (tr - disc) * 0.5);
    if tp.norm() < tm.norm() {
        std::mem::swap(&mut tp, &mut tm);
    }
    let xi = 0.5 * (tp.norm() / tm.norm()).ln();
    if xi <= GAP_MARGIN {
        return Err(Error::InEssentialBand { lambda, band: coin.beta_inf().norm() });
    }
    let phase = tp / tp.norm();
    // v_pm = (alpha, conj(beta) tau_pm - e^{i lambda}).
    let e = C64::from_polar(1.0, lambda);
    let bc = coin.beta_inf().conj();
    let p = [[a_inf, a_inf], [bc * tp - e, bc * tm - e]];
    let pdet = p[0][0] * p[1][1] - p[0][1] * p[1][0];
    let pinv = [[p[1][1] / pdet, -p[0][1] / pdet], [-p[1][0] / pdet, p[0][0] / pdet]];

    let n = (l - x0) as usize;
    // v(x) = D(x+1)^{-1} P^{-1} (T(x) - T_inf) P D(x), rescaled by e^{-i chi}.
    let mut v = Vec::with_capacity(n);
    let mut tail_sum = 0.0;
    for k in 0..n {
        let x = x0 + k as i64;
        let t = transfer_matrix(coin, lambda, x)?;
        let mut d = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                d[i][j] = t[i][j] - t_inf[i][j];
            }
        }
        let m = crate::walk::mat2_mul(&pinv, &crate::walk::mat2_mul(&d, &p));
        let s = phase.conj();
        let vm =
            [[m[0][0] * s * (-xi).exp(), m[0][1] * s * (-xi).exp()], [m[1][0] * s * xi.exp(), m[1][1] * s * xi.exp()]];
        tail_sum += vm.iter().flatten().map(|z| z.norm()).sum::<f64>();
        v.push(vm);
    }
    if tail_sum >= 0.5 {
        return Err(Error::TailNotSmall { x0, sum: tail_sum });
    }
    // Unknowns omega(x) = e^{2 xi x} w_up(x) and w_down(x):
    // omega(x) = -sum_{y>=x} e^{-2 xi (y-x)} (v11 omega + v12 w_down)(y),
    // w_down(x) = 1 - sum_{y>=x} (v21 omega + v22 w_down)(y).
    let decay = (-2.0 * xi).exp();
    let mut omega = vec![ZERO; n];
    let mut wd = vec![ONE; n];
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut new_omega = vec![ZERO; n];
        let mut new_wd = vec![ONE; n];
        let mut acc_o = ZERO;
        let mut acc_d = ZERO;
        for k in (0..n).rev() {
            acc_o = acc_o * decay + v[k][0][0] * omega[k] + v[k][0][1] * wd[k];
            acc_d += v[k][1][0] * omega[k] + v[k][1][1] * wd[k];
            new_omega[k] = -acc_o;
            new_wd[k] = ONE - acc_d;
        }
        let diff =
            new_omega.iter().zip(&omega).chain(new_wd.iter().zip(&wd)).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        omega = new_omega;
        wd = new_wd;
        if diff < 1e-12 {
            break;
        }
        if iterations >= 200 {
            return Err(Error::NoConvergence { what: "decaying solution", iterations, residual: diff });
        }
    }
    let chi = phase.arg();
    let psi = (0..n)
        .map(|k| {
            let x = (x0 + k as i64) as f64;
            let scale = C64::from_polar((-xi * x).exp(), chi * x);
            [scale * (p[0][0] * omega[k] + p[0][1] * wd[k]), scale * (p[1][0] * omega[k] + p[1][1] * wd[k])]
        })
        .collect();
    Ok(DecayingSolution { x0, psi, decay_rate: xi, iterations, tail_sum })
}

/// `psi(x) = (phi_down(x-1), phi_up(x))` read off a field.
pub fn psi_of_field(u: &SpinorField, x: i64) -> [C64; 2] {
    [u[x - 1][1], u[x][0]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::{Preset, SiteCoin};

    #[test]
    fn decay_rate_value() {
        let lambda = 0.9f64.acos();
        let xi = decay_rate(lambda, 0.6).unwrap();
        assert!((xi - 0.494_932_923_094_526_9).abs() < 1e-12);
        assert!(matches!(decay_rate(0.5f64.acos(), 0.6), Err(Error::InEssentialBand { .. })));
        assert!(decay_rate(0.1, 0.0).is_err());
    }

    #[test]
    fn transfer_matrix_reproduces_eigenfunction() {
        let g = LatticeGrid::new(24).unwrap();
        let coin = Preset::KlsSmooth.coin(g).unwrap();
        let sd = SpectralData::new(&coin).unwrap();
        let pair = sd.selected().unwrap();
        for x in -10..10 {
            let t = transfer_matrix(&coin, pair.lambda, x).unwrap();
            let a = psi_of_field(&pair.phi, x);
            let b = psi_of_field(&pair.phi, x + 1);
            let tb = crate::walk::mat_vec(&t, &a);
            assert!((tb[0] - b[0]).norm() + (tb[1] - b[1]).norm() < 1e-10);
        }
    }

    #[test]
    fn transfer_determinant_is_beta_ratio() {
        let beta = C64::new(0.6, -0.59);
        let alpha = C64::from_polar((1.0 - beta.norm_sqr()).sqrt(), 0.7);
        let t = site_transfer(0.3, alpha, beta, 1.1).unwrap();
        let det = t[0][0] * t[1][1] - t[0][1] * t[1][0];
        assert!((det - beta / beta.conj()).norm() < 1e-14);
        let real = site_transfer(0.3, C64::new(0.2, 0.5), C64::new((1.0f64 - 0.29).sqrt(), 0.0), 1.1).unwrap();
        let det = real[0][0] * real[1][1] - real[0][1] * real[1][0];
        assert!((det - 1.0).norm() < 1e-14);
    }

    #[test]
    fn free_walk_has_no_discrete_spectrum() {
        let g = LatticeGrid::new(32).unwrap();
        let sd = SpectralData::new(&Preset::Free.coin(g).unwrap()).unwrap();
        assert!(sd.discrete_indices().is_empty());
        assert!(matches!(sd.selected(), Err(Error::NoDiscreteEigenvalue(_))));
        for a in sd.eigen_angles() {
            assert!(a.cos().abs() <= sd.band_edge() + 1e-12);
        }
    }

    #[test]
    fn parity_block_solver_matches_the_general_one() {
        let g = LatticeGrid::new(21).unwrap();
        let coin = Preset::KlsOrigin.coin(g).unwrap();
        let fast = walk_eigen(&coin).unwrap();
        let slow = UnitaryEigen::new(&coin.dense_matrix()).unwrap();
        let dense = coin.dense_matrix();
        for j in 0..fast.dim() {
            let d = (fast.angles[j] - slow.angles[j]).abs();
            assert!(d.min(TAU - d) < 1e-12, "{j}: {} vs {}", fast.angles[j], slow.angles[j]);
            let v = fast.column(j);
            let e = C64::from_polar(1.0, fast.angles[j]);
            let res: f64 = (0..v.len())
                .map(|i| ((0..v.len()).map(|k| dense[(i, k)] * v[k]).sum::<C64>() - e * v[i]).norm_sqr())
                .sum();
            assert!(res.sqrt() < 1e-12, "{j}: {res}");
        }
        for j in 0..fast.dim() {
            for k in 0..fast.dim() {
                let p: C64 = (0..fast.dim()).map(|i| fast.vectors[(i, j)] * fast.vectors[(i, k)].conj()).sum();
                let want = if j == k { 1.0 } else { 0.0 };
                assert!((p - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn dense_cap_is_enforced() {
        let g = LatticeGrid::new(64).unwrap();
        let coin = Preset::Free.coin(g).unwrap();
        assert!(SpectralData::with_cap(&coin, 100).is_err());
    }

    #[test]
    fn zero_beta_is_rejected() {
        assert!(site_transfer(0.0, ONE, ZERO, 0.3).is_err());
        let _ = SiteCoin::from_angle(0.1, 0.0);
    }
}
