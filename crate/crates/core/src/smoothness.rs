//! Kato smoothness for unitary operators at finite dimension.
//!
//! `R_U(mu) = (U e^{-i mu} - 1)^{-1}`. Every quantity is evaluated at a fixed
//! regularization `eps > 0`, where the Fourier, resolvent and Stone identities
//! are exact and can be checked to rounding error.

use std::f64::consts::{PI, TAU};

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{bracket, SpinorField, ONE, ZERO};
use crate::linalg::{ShiftedWalkSolver, UnitaryEigen};
use crate::walk::{apply_u, CoinField};

/// Horizon rule: `e^{-eps T} < TAIL_TOL`.
pub const TAIL_TOL: f64 = 1e-10;

/// Bounded weight `A`.
#[derive(Debug, Clone)]
pub enum Weight {
    Identity,
    Zero,
    Diagonal(Vec<f64>),
    Matrix(Mat<C64>),
}

impl Weight {
    pub fn matrix(&self, n: usize) -> Result<Mat<C64>> {
        match self {
            Weight::Identity => Ok(Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })),
            Weight::Zero => Ok(Mat::zeros(n, n)),
            Weight::Diagonal(d) => {
                if d.len() != n {
                    return Err(Error::InvalidArgument(format!("weight has {} entries, expected {n}", d.len())));
                }
                Ok(Mat::from_fn(n, n, |i, j| if i == j { C64::new(d[i], 0.0) } else { ZERO }))
            }
            Weight::Matrix(m) => {
                if m.nrows() != n || m.ncols() != n {
                    return Err(Error::InvalidArgument(format!(
                        "weight is {}x{}, expected {n}x{n}",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                Ok(m.clone())
            }
        }
    }
}

fn mat_vec(m: &Mat<C64>, v: &[C64]) -> Vec<C64> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum()).collect()
}

fn scaled(m: &Mat<C64>, c: f64) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * c)
}

fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

pub fn max_abs_diff(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

fn op_norm(m: &Mat<C64>) -> Result<f64> {
    let s = m.singular_values().map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
    Ok(s.first().copied().unwrap_or(0.0))
}

/// `||U^* U - 1||_max`.
pub fn unitarity_defect(u: &Mat<C64>) -> f64 {
    let n = u.nrows();
    let p = u.adjoint() * u;
    let id = Weight::Identity.matrix(n).expect("identity");
    max_abs_diff(&p, &id)
}

fn check_unitary(u: &Mat<C64>) -> Result<()> {
    if u.nrows() != u.ncols() {
        return Err(Error::InvalidArgument("U must be square".into()));
    }
    let d = unitarity_defect(u);
    if d > 1e-10 {
        return Err(Error::InvalidArgument(format!("U is not unitary (defect {d:.3e})")));
    }
    Ok(())
}

/// `R_U(mu)` as a dense matrix. `Im mu != 0` is required.
pub fn resolvent(u: &Mat<C64>, mu: C64) -> Result<Mat<C64>> {
    if mu.im.abs() < 1e-14 {
        return Err(Error::NearSingular(mu.im.abs()));
    }
    let n = u.nrows();
    let k = (-C64::i() * mu).exp();
    let m = Mat::from_fn(n, n, |i, j| u[(i, j)] * k - if i == j { ONE } else { ZERO });
    Ok(m.partial_piv_lu().inverse())
}

/// `R(lambda + i eps) - R(lambda - i eps)`.
pub fn resolvent_jump(u: &Mat<C64>, lambda: f64, eps: f64) -> Result<Mat<C64>> {
    let rp = resolvent(u, C64::new(lambda, eps))?;
    let rm = resolvent(u, C64::new(lambda, -eps))?;
    Ok(rp - rm)
}

/// Smallest horizon with `e^{-eps T} < TAIL_TOL`.
pub fn horizon(eps: f64) -> usize {
    (-(TAIL_TOL.ln()) / eps).floor() as usize + 1
}

/// Trapezoid size `4 (T + 1)`.
pub fn default_nodes(eps: f64) -> usize {
    4 * (horizon(eps) + 1)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    Ok(())
}

/// `sum_{|t| <= T} e^{-2 eps |t|} ||A U^t phi||^2`.
pub fn qty_time(a: &Weight, u: &Mat<C64>, phi: &[C64], eps: f64, t_max: usize) -> Result<f64> {
    check_eps(eps)?;
    check_unitary(u)?;
    if (-eps * t_max as f64).exp() >= TAIL_TOL {
        return Err(Error::InvalidArgument(format!(
            "horizon {t_max} too small for eps = {eps}: need e^(-eps T) < {TAIL_TOL:e}"
        )));
    }
    let am = a.matrix(u.nrows())?;
    let uh = u.adjoint().to_owned();
    let mut total = norm_sqr(&mat_vec(&am, phi));
    for m in [u, &uh] {
        let mut v = phi.to_vec();
        for t in 1..=t_max {
            v = mat_vec(m, &v);
            total += (-2.0 * eps * t as f64).exp() * norm_sqr(&mat_vec(&am, &v));
        }
    }
    Ok(total)
}

/// `(1 / 2 pi) int_T (||A R(l + i eps) phi||^2 + ||A R(l - i eps) phi||^2) dl`,
/// uniform trapezoid with `m` nodes, checked against the rule on `m / 2` nodes.
pub fn qty_resolvent(a: &Weight, u: &Mat<C64>, phi: &[C64], eps: f64, m: usize) -> Result<f64> {
    check_eps(eps)?;
    check_unitary(u)?;
    if m < 4 || !m.is_multiple_of(2) {
        return Err(Error::InvalidArgument("node count must be even and >= 4".into()));
    }
    let am = a.matrix(u.nrows())?;
    let values: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let l = TAU * k as f64 / m as f64;
            let rp = resolvent(u, C64::new(l, eps))?;
            let rm = resolvent(u, C64::new(l, -eps))?;
            Ok(norm_sqr(&mat_vec(&am, &mat_vec(&rp, phi))) + norm_sqr(&mat_vec(&am, &mat_vec(&rm, phi))))
        })
        .collect::<Result<_>>()?;
    let full: f64 = values.iter().sum::<f64>() / m as f64;
    let half: f64 = values.iter().step_by(2).sum::<f64>() / (m / 2) as f64;
    if (full - half).abs() > 1e-9 * full.abs().max(1e-300) {
        return Err(Error::NoConvergence {
            what: "resolvent quadrature",
            iterations: m,
            residual: (full - half).abs(),
        });
    }
    Ok(full)
}

/// Grid supremum of `||A (R(l + i eps) - R(l - i eps)) A^*||`, with the
/// self-adjointness residual and the smallest eigenvalue of the jump.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SupResolvent {
    pub value: f64,
    pub self_adjoint_residual: f64,
    pub min_eigenvalue: f64,
}

pub fn qty_sup_resolvent(a: &Weight, u: &Mat<C64>, eps_grid: &[f64], lambda_grid: &[f64]) -> Result<SupResolvent> {
    check_unitary(u)?;
    if eps_grid.is_empty() || lambda_grid.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    let am = a.matrix(u.nrows())?;
    let pts: Vec<(f64, f64)> = eps_grid.iter().flat_map(|&e| lambda_grid.iter().map(move |&l| (e, l))).collect();
    let res: Vec<SupResolvent> = pts
        .par_iter()
        .map(|&(e, l)| -> Result<SupResolvent> {
            check_eps(e)?;
            let k = resolvent_jump(u, l, e)?;
            let b = &am * &k * am.adjoint();
            let sa = max_abs_diff(&b, &b.adjoint().to_owned());
            let herm = Mat::from_fn(k.nrows(), k.ncols(), |i, j| 0.5 * (k[(i, j)] + k[(j, i)].conj()));
            let ev =
                herm.self_adjoint_eigenvalues(faer::Side::Lower).map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
            Ok(SupResolvent { value: op_norm(&b)?, self_adjoint_residual: sa, min_eigenvalue: ev[0] })
        })
        .collect::<Result<_>>()?;
    Ok(res.into_iter().fold(
        SupResolvent { value: 0.0, self_adjoint_residual: 0.0, min_eigenvalue: f64::INFINITY },
        |acc, r| SupResolvent {
            value: acc.value.max(r.value),
            self_adjoint_residual: acc.self_adjoint_residual.max(r.self_adjoint_residual),
            min_eigenvalue: acc.min_eigenvalue.min(r.min_eigenvalue),
        },
    ))
}

/// Arcs `[a, a + w)` with `a` on a uniform grid and `w` from `widths`.
#[derive(Debug, Clone)]
pub struct IntervalGrid {
    pub starts: usize,
    pub widths: Vec<f64>,
    /// Widths below this are skipped: at finite dimension the supremum
    /// diverges as arcs shrink onto eigenphases.
    pub floor: f64,
}

/// `max ||A 1_{[a, b)}(U)||^2 / (b - a)` over the grid.
pub fn qty_interval(a: &Weight, u: &Mat<C64>, grid: &IntervalGrid) -> Result<f64> {
    check_unitary(u)?;
    let n = u.nrows();
    let am = a.matrix(n)?;
    let eig = UnitaryEigen::new(u)?;
    let mut best: f64 = 0.0;
    for &w in grid.widths.iter().filter(|&&w| w >= grid.floor && w <= TAU) {
        for k in 0..grid.starts {
            let start = TAU * k as f64 / grid.starts as f64;
            let cols: Vec<usize> = (0..n).filter(|&j| (eig.angles[j] - start).rem_euclid(TAU) < w).collect();
            if cols.is_empty() {
                continue;
            }
            // ||A P|| = ||A V_S|| for orthonormal V_S
            let v = Mat::from_fn(n, cols.len(), |i, c| eig.vectors[(i, cols[c])]);
            let nrm = op_norm(&(&am * &v))?;
            best = best.max(nrm * nrm / w);
        }
    }
    Ok(best)
}

/// `(1 / 2 pi) int_a^b (R(l + i eps) - R(l - i eps)) dl` by composite 8-point
/// Gauss-Legendre with panels no wider than `eps / 2`.
pub fn stone_integral(u: &Mat<C64>, a: f64, b: f64, eps: f64) -> Result<Mat<C64>> {
    check_eps(eps)?;
    check_unitary(u)?;
    let n = u.nrows();
    if b <= a {
        return Ok(Mat::zeros(n, n));
    }
    let panels = ((b - a) / (0.5 * eps)).ceil().max(1.0) as usize;
    let h = (b - a) / panels as f64;
    let (x, w) = gauss_legendre_8();
    let parts: Vec<Mat<C64>> = (0..panels)
        .into_par_iter()
        .map(|p| -> Result<Mat<C64>> {
            let mid = a + (p as f64 + 0.5) * h;
            let mut acc = Mat::<C64>::zeros(n, n);
            for k in 0..8 {
                let l = mid + 0.5 * h * x[k];
                let j = resolvent_jump(u, l, eps)?;
                acc += scaled(&j, 0.5 * h * w[k]);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = Mat::<C64>::zeros(n, n);
    for p in parts {
        total += p;
    }
    Ok(scaled(&total, 1.0 / TAU))
}

fn gauss_legendre_8() -> ([f64; 8], [f64; 8]) {
    let x = [
        -0.960_289_856_497_536_3,
        -0.796_666_477_413_626_7,
        -0.525_532_409_916_329,
        -0.183_434_642_495_649_8,
        0.183_434_642_495_649_8,
        0.525_532_409_916_329,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_3,
    ];
    let w = [
        0.101_228_536_290_376_26,
        0.222_381_034_453_374_48,
        0.313_706_645_877_887_3,
        0.362_683_783_378_362,
        0.362_683_783_378_362,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_48,
        0.101_228_536_290_376_26,
    ];
    (x, w)
}

#[derive(Debug, Clone)]
pub struct StoneReport {
    pub eps: Vec<f64>,
    pub integrals: Vec<Mat<C64>>,
    /// Polynomial extrapolation of the integrals to `eps = 0`.
    pub extrapolated: Mat<C64>,
}

/// Stone's formula on `[a, b]`. Without `half_weight`, eigenphases within
/// `10 eps_min` of an endpoint are rejected.
pub fn stone_projection(u: &Mat<C64>, a: f64, b: f64, eps_seq: &[f64], half_weight: bool) -> Result<StoneReport> {
    check_unitary(u)?;
    if eps_seq.is_empty() || eps_seq.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("eps sequence must be nonempty and strictly decreasing".into()));
    }
    let eps_min = *eps_seq.last().expect("nonempty");
    if !half_weight {
        let eig = UnitaryEigen::new(u)?;
        for &z in &eig.angles {
            for e in [a, b] {
                let d = (z - e).rem_euclid(TAU);
                if d.min(TAU - d) < 10.0 * eps_min {
                    return Err(Error::Precondition(format!(
                        "eigenphase {z:.6} lies within 10 eps_min of endpoint {e:.6}"
                    )));
                }
            }
        }
    }
    let integrals: Vec<Mat<C64>> = eps_seq.iter().map(|&e| stone_integral(u, a, b, e)).collect::<Result<_>>()?;
    let n = u.nrows();
    let extrapolated = Mat::from_fn(n, n, |i, j| {
        let ys: Vec<C64> = integrals.iter().map(|m| m[(i, j)]).collect();
        neville_at_zero(eps_seq, &ys)
    });
    Ok(StoneReport { eps: eps_seq.to_vec(), integrals, extrapolated })
}

fn neville_at_zero(x: &[f64], y: &[C64]) -> C64 {
    let mut p = y.to_vec();
    let n = x.len();
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (p[i + 1] * x[i] - p[i] * x[i + m]) / (x[i] - x[i + m]);
        }
    }
    p[0]
}

/// `1/2 (1_{(a,b)}(U) + 1_{[a,b]}(U))` from the eigendecomposition. Eigenphases
/// within `tol` of an endpoint get weight one half.
pub fn eigenprojection(u: &Mat<C64>, a: f64, b: f64, tol: f64) -> Result<Mat<C64>> {
    let eig = UnitaryEigen::new(u)?;
    let n = u.nrows();
    let mut p = Mat::<C64>::zeros(n, n);
    for j in 0..n {
        let z = eig.angles[j];
        // the representative of z closest to the arc
        let zz = [z - TAU, z, z + TAU]
            .into_iter()
            .min_by(|x, y| arc_distance(*x, a, b).total_cmp(&arc_distance(*y, a, b)))
            .expect("three candidates");
        let weight = if (zz - a).abs() <= tol || (zz - b).abs() <= tol {
            0.5
        } else if zz > a && zz < b {
            1.0
        } else {
            0.0
        };
        if weight > 0.0 {
            for r in 0..n {
                for c in 0..n {
                    p[(r, c)] += eig.vectors[(r, j)] * eig.vectors[(c, j)].conj() * weight;
                }
            }
        }
    }
    Ok(p)
}

fn arc_distance(z: f64, a: f64, b: f64) -> f64 {
    if z >= a && z <= b {
        0.0
    } else {
        (z - a).abs().min((z - b).abs())
    }
}

/// Max residuals of the one- and two-sided Fourier identities over a `lambda` grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FourierReport {
    /// `F(e^{-eps t} 1_{t >= 0} A U^t phi) = -(1/2pi) A R(l - i eps) phi`.
    pub forward: f64,
    /// `F(e^{eps t} 1_{t <= -1} A U^t phi) = +(1/2pi) A R(l + i eps) phi`.
    pub backward: f64,
    /// `F(e^{-eps |t|} A U^t phi) = (1/2pi) A (R(l + i eps) - R(l - i eps)) phi`.
    pub two_sided: f64,
}

/// `F u(l) = (1/2pi) sum_t e^{-i l t} u(t)`, truncated at `|t| <= t_max`.
pub fn fourier_identities_check(
    a: &Weight,
    u: &Mat<C64>,
    phi: &[C64],
    eps: f64,
    t_max: usize,
    lambdas: &[f64],
) -> Result<FourierReport> {
    check_eps(eps)?;
    check_unitary(u)?;
    let am = a.matrix(u.nrows())?;
    let uh = u.adjoint().to_owned();
    let mut fwd_orbit = Vec::with_capacity(t_max + 1);
    let mut v = phi.to_vec();
    for _ in 0..=t_max {
        fwd_orbit.push(mat_vec(&am, &v));
        v = mat_vec(u, &v);
    }
    let mut bwd_orbit = Vec::with_capacity(t_max);
    let mut v = mat_vec(&uh, phi);
    for _ in 1..=t_max {
        bwd_orbit.push(mat_vec(&am, &v));
        v = mat_vec(&uh, &v);
    }
    let n = u.nrows();
    let res: Vec<[f64; 3]> = lambdas
        .par_iter()
        .map(|&l| -> Result<[f64; 3]> {
            let mut fwd = vec![ZERO; n];
            for (t, w) in fwd_orbit.iter().enumerate() {
                let k = C64::from_polar((-eps * t as f64).exp(), -l * t as f64) / TAU;
                for i in 0..n {
                    fwd[i] += k * w[i];
                }
            }
            let mut bwd = vec![ZERO; n];
            for (s, w) in bwd_orbit.iter().enumerate() {
                let t = -(s as f64 + 1.0);
                let k = C64::from_polar((eps * t).exp(), -l * t) / TAU;
                for i in 0..n {
                    bwd[i] += k * w[i];
                }
            }
            let rp = mat_vec(&am, &mat_vec(&resolvent(u, C64::new(l, eps))?, phi));
            let rm = mat_vec(&am, &mat_vec(&resolvent(u, C64::new(l, -eps))?, phi));
            let mut r = [0.0f64; 3];
            for i in 0..n {
                r[0] = r[0].max((fwd[i] + rm[i] / TAU).norm());
                r[1] = r[1].max((bwd[i] - rp[i] / TAU).norm());
                r[2] = r[2].max((fwd[i] + bwd[i] - (rp[i] - rm[i]) / TAU).norm());
            }
            Ok(r)
        })
        .collect::<Result<_>>()?;
    let m = res.iter().fold([0.0f64; 3], |acc, r| [acc[0].max(r[0]), acc[1].max(r[1]), acc[2].max(r[2])]);
    Ok(FourierReport { forward: m[0], backward: m[1], two_sided: m[2] })
}

/// `||(R(l + i eps) - R(l - i eps)) - (1 - e^{-2 eps}) R(l - i eps)^* R(l - i eps)||_max`.
///
/// The identity uses `U^* U = 1`, and near an eigenphase its terms reach
/// `eps^{-2}`, so an f64 evaluation has a floor of a few 1e-12 set by the
/// unitarity defect of the input. It is evaluated in double-double on the
/// unitary polar factor of `u`, which differs from `u` by that defect.
pub fn resolvent_identity_residual(u: &Mat<C64>, lambda: f64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    check_unitary(u)?;
    let n = u.nrows();
    let u = dd::polar_factor(u);
    // k_- = e^{-i (l - i eps)} as stored, k_+ = 1 / conj(k_-), both exact in double-double
    let km = dd::Cdd::from(C64::from_polar((-eps).exp(), -lambda));
    let kp = dd::Cdd::one().div(km.conj());
    let factor = dd::Cdd::one().sub(dd::Cdd::real(km.norm_sqr()));
    let rm = dd::resolvent(&u, km)?;
    let rp = dd::resolvent(&u, kp)?;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut prod = dd::Cdd::zero();
            for l in 0..n {
                prod = prod.add(rm[l * n + i].conj().mul(rm[l * n + j]));
            }
            let diff = rp[i * n + j].sub(rm[i * n + j]).sub(factor.mul(prod));
            worst = worst.max(diff.to_c64().norm());
        }
    }
    Ok(worst)
}

/// Complex double-double arithmetic for the resolvent identity.
mod dd {
    use super::*;
    use twofloat::TwoFloat;

    #[derive(Debug, Clone, Copy)]
    pub struct Cdd {
        re: TwoFloat,
        im: TwoFloat,
    }

    impl From<C64> for Cdd {
        fn from(z: C64) -> Self {
            Self { re: TwoFloat::from(z.re), im: TwoFloat::from(z.im) }
        }
    }

    impl Cdd {
        pub fn zero() -> Self {
            Self::from(ZERO)
        }

        pub fn one() -> Self {
            Self::from(ONE)
        }

        pub fn real(x: TwoFloat) -> Self {
            Self { re: x, im: TwoFloat::from(0.0) }
        }

        pub fn add(self, o: Self) -> Self {
            Self { re: self.re + o.re, im: self.im + o.im }
        }

        pub fn sub(self, o: Self) -> Self {
            Self { re: self.re - o.re, im: self.im - o.im }
        }

        pub fn mul(self, o: Self) -> Self {
            Self { re: self.re * o.re - self.im * o.im, im: self.re * o.im + self.im * o.re }
        }

        pub fn conj(self) -> Self {
            Self { re: self.re, im: -self.im }
        }

        pub fn norm_sqr(self) -> TwoFloat {
            self.re * self.re + self.im * self.im
        }

        /// The library's division is only f64-accurate, so `1 / |o|^2` is
        /// refined by Newton steps on top of an f64 seed.
        pub fn div(self, o: Self) -> Self {
            let d = o.norm_sqr();
            let one = TwoFloat::from(1.0);
            let mut r = TwoFloat::from(1.0 / d.hi());
            for _ in 0..2 {
                r = r + r * (one - d * r);
            }
            let p = self.mul(o.conj());
            Self { re: p.re * r, im: p.im * r }
        }

        pub fn to_c64(self) -> C64 {
            C64::new(self.re.hi() + self.re.lo(), self.im.hi() + self.im.lo())
        }
    }

    /// Row-major square matrix.
    pub struct DdMat {
        pub n: usize,
        pub v: Vec<Cdd>,
    }

    impl DdMat {
        fn mul(&self, o: &DdMat, adjoint_self: bool) -> DdMat {
            let n = self.n;
            let mut v = vec![Cdd::zero(); n * n];
            for i in 0..n {
                for j in 0..n {
                    let mut acc = Cdd::zero();
                    for l in 0..n {
                        let a = if adjoint_self { self.v[l * n + i].conj() } else { self.v[i * n + l] };
                        acc = acc.add(a.mul(o.v[l * n + j]));
                    }
                    v[i * n + j] = acc;
                }
            }
            DdMat { n, v }
        }
    }

    /// Newton-Schulz `U <- U + U (1 - U^* U) / 2`, converging quadratically to
    /// the polar factor from an f64 unitary.
    pub fn polar_factor(u: &Mat<C64>) -> DdMat {
        let n = u.nrows();
        let mut x = DdMat { n, v: (0..n * n).map(|ij| Cdd::from(u[(ij / n, ij % n)])).collect() };
        let half = Cdd::from(C64::new(0.5, 0.0));
        for _ in 0..3 {
            let mut g = x.mul(&x, true);
            for (ij, e) in g.v.iter_mut().enumerate() {
                let id = if ij / n == ij % n { Cdd::one() } else { Cdd::zero() };
                *e = id.sub(*e).mul(half);
            }
            let c = x.mul(&g, false);
            for (a, b) in x.v.iter_mut().zip(&c.v) {
                *a = a.add(*b);
            }
        }
        x
    }

    /// `(k U - 1)^{-1}`, row-major, by Gauss-Jordan with partial pivoting.
    pub fn resolvent(u: &DdMat, k: Cdd) -> Result<Vec<Cdd>> {
        let n = u.n;
        let mut a: Vec<Cdd> = (0..n * n)
            .map(|ij| {
                let (i, j) = (ij / n, ij % n);
                let v = k.mul(u.v[ij]);
                if i == j {
                    v.sub(Cdd::one())
                } else {
                    v
                }
            })
            .collect();
        let mut inv: Vec<Cdd> = (0..n * n).map(|ij| if ij / n == ij % n { Cdd::one() } else { Cdd::zero() }).collect();
        for c in 0..n {
            let p = (c..n)
                .max_by(|&x, &y| a[x * n + c].norm_sqr().hi().total_cmp(&a[y * n + c].norm_sqr().hi()))
                .expect("nonempty");
            if a[p * n + c].norm_sqr().hi() == 0.0 {
                return Err(Error::NearSingular(0.0));
            }
            for j in 0..n {
                a.swap(c * n + j, p * n + j);
                inv.swap(c * n + j, p * n + j);
            }
            let piv = Cdd::one().div(a[c * n + c]);
            for j in 0..n {
                a[c * n + j] = a[c * n + j].mul(piv);
                inv[c * n + j] = inv[c * n + j].mul(piv);
            }
            for r in (0..n).filter(|&r| r != c) {
                let f = a[r * n + c];
                for j in 0..n {
                    a[r * n + j] = a[r * n + j].sub(f.mul(a[c * n + j]));
                    inv[r * n + j] = inv[r * n + j].sub(f.mul(inv[c * n + j]));
                }
            }
        }
        Ok(inv)
    }
}

/// `|(1/2pi) int (phi, (R(l + i eps) - R(l - i eps)) phi) dl - ||phi||^2|`, trapezoid on `m` nodes.
pub fn normalization_residual(u: &Mat<C64>, phi: &[C64], eps: f64, m: usize) -> Result<f64> {
    check_eps(eps)?;
    let vals: Vec<C64> = (0..m)
        .into_par_iter()
        .map(|k| -> Result<C64> {
            let l = TAU * k as f64 / m as f64;
            let jv = mat_vec(&resolvent_jump(u, l, eps)?, phi);
            Ok(phi.iter().zip(&jv).map(|(p, q)| p * q.conj()).sum())
        })
        .collect::<Result<_>>()?;
    let integral: C64 = vals.iter().sum::<C64>() / m as f64;
    Ok((integral - norm_sqr(phi)).norm())
}

/// `max ||A R(mu) A^*||` over `mu_grid` (all off the real axis).
pub fn kato_sufficient(a: &Weight, u: &Mat<C64>, mu_grid: &[C64]) -> Result<f64> {
    check_unitary(u)?;
    let am = a.matrix(u.nrows())?;
    let vals: Vec<f64> =
        mu_grid.par_iter().map(|&mu| op_norm(&(&am * resolvent(u, mu)? * am.adjoint()))).collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// Random unitary from the QR factorization of a matrix with uniform entries,
/// with the phases of `R`'s diagonal absorbed.
pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> Mat<C64> {
    let m = Mat::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let qr = m.qr();
    let q = qr.compute_Q();
    let r = qr.R();
    Mat::from_fn(n, n, |i, j| {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        q[(i, j)] * ph
    })
}

pub fn random_vector<R: Rng>(n: usize, rng: &mut R) -> Vec<C64> {
    let v: Vec<C64> = (0..n).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let s = norm_sqr(&v).sqrt();
    v.into_iter().map(|c| c / s).collect()
}

/// One row of the smoothness report.
#[derive(Debug, Clone, Serialize)]
pub struct SmoothnessReport {
    pub epsilon: f64,
    pub horizon: usize,
    pub nodes: usize,
    pub qty1: f64,
    pub qty2: f64,
    pub qty3: f64,
    pub qty4: f64,
    pub plancherel: f64,
    pub resolvent_identity: f64,
    pub stone: f64,
}

impl SmoothnessReport {
    /// All four quantities and the identity residuals for one `(A, U, phi, eps)`.
    pub fn compute(a: &Weight, u: &Mat<C64>, phi: &[C64], eps: f64, intervals: &IntervalGrid) -> Result<Self> {
        let t = horizon(eps);
        let m = default_nodes(eps);
        let qty1 = qty_time(a, u, phi, eps, t)?;
        let qty2 = qty_resolvent(a, u, phi, eps, m)?;
        let lambdas: Vec<f64> = (0..64).map(|k| TAU * k as f64 / 64.0).collect();
        let qty3 = qty_sup_resolvent(a, u, &[eps], &lambdas)?.value;
        let qty4 = qty_interval(a, u, intervals)?;
        let resolvent_identity = lambdas
            .iter()
            .map(|&l| resolvent_identity_residual(u, l, eps))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let stone = normalization_residual(u, phi, eps, m)?;
        let report = Self {
            epsilon: eps,
            horizon: t,
            nodes: m,
            qty1,
            qty2,
            qty3,
            qty4,
            plancherel: (qty1 - qty2).abs() / qty1.abs().max(1e-300),
            resolvent_identity,
            stone,
        };
        for v in [report.qty1, report.qty2, report.qty3, report.qty4] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!("smoothness quantity {v} is not finite and nonnegative")));
            }
        }
        Ok(report)
    }
}

/// `A = <x>^{-s} P_c(U)` for a walk, where `P_c` removes the given orthonormal modes.
#[derive(Debug, Clone)]
pub struct WalkWeight {
    pub s: f64,
    pub modes: Vec<SpinorField>,
}

impl WalkWeight {
    fn project(&self, u: &SpinorField) -> Result<SpinorField> {
        let mut out = u.clone();
        for m in &self.modes {
            out.axpy(-u.inner(m)?, m)?;
        }
        Ok(out)
    }

    fn weigh(&self, u: &SpinorField) -> SpinorField {
        let mut out = u.clone();
        for x in u.grid().sites() {
            let w = bracket(x).powf(-self.s);
            out[x] = [u[x][0] * w, u[x][1] * w];
        }
        out
    }

    pub fn apply(&self, u: &SpinorField) -> Result<SpinorField> {
        Ok(self.weigh(&self.project(u)?))
    }

    pub fn apply_adjoint(&self, u: &SpinorField) -> Result<SpinorField> {
        self.project(&self.weigh(u))
    }
}

/// `||A R(mu) A^*||` for the walk by power iteration on `B^* B`.
pub fn walk_weighted_resolvent_norm(coin: &CoinField, a: &WalkWeight, mu: C64, iterations: usize) -> Result<f64> {
    if mu.im.abs() < 1e-14 {
        return Err(Error::NearSingular(mu.im.abs()));
    }
    // R(mu) = e^{i mu} (U - e^{i mu})^{-1};  R(mu)^* = -(U - e^{i conj mu})^{-1} U
    let s = (C64::i() * mu).exp();
    let s_adj = (C64::i() * mu.conj()).exp();
    let fwd = ShiftedWalkSolver::new(coin, s)?;
    let bwd = ShiftedWalkSolver::new(coin, s_adj)?;
    let b = |v: &SpinorField| -> Result<SpinorField> {
        Ok(fwd.solve(&a.apply_adjoint(v)?)?.scaled(s)).and_then(|w| a.apply(&w))
    };
    let b_adj = |v: &SpinorField| -> Result<SpinorField> {
        let w = bwd.solve(&apply_u(coin, &a.apply_adjoint(v)?)?)?.scaled(-ONE);
        a.apply(&w)
    };
    let grid = coin.grid();
    let mut v = SpinorField::from_fn(grid, |x| {
        let w = bracket(x).powf(-a.s);
        [C64::new(w, 0.0), C64::new(0.5 * w, 0.3 * w)]
    });
    let n0 = v.norm();
    v.scale(C64::new(1.0 / n0, 0.0));
    let mut estimate = 0.0;
    for _ in 0..iterations.max(1) {
        let bv = b(&v)?;
        let val = bv.norm();
        let w = b_adj(&bv)?;
        let nw = w.norm();
        if nw == 0.0 {
            return Ok(0.0);
        }
        let done = (val - estimate).abs() <= 1e-8 * val;
        estimate = val;
        if done {
            break;
        }
        v = w.scaled(C64::new(1.0 / nw, 0.0));
    }
    Ok(estimate)
}

/// One row of the walk Kato sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KatoRow {
    pub eps: f64,
    pub sup: f64,
    pub argmax_lambda: f64,
}

/// `sup_lambda ||A R(lambda +- i eps) A^*||` on `lambda_grid` for each `eps`.
pub fn walk_kato_sweep(
    coin: &CoinField,
    a: &WalkWeight,
    eps_list: &[f64],
    lambda_grid: &[f64],
) -> Result<Vec<KatoRow>> {
    eps_list
        .iter()
        .map(|&eps| {
            check_eps(eps)?;
            let vals: Vec<(f64, f64)> = lambda_grid
                .par_iter()
                .map(|&l| -> Result<(f64, f64)> {
                    let p = walk_weighted_resolvent_norm(coin, a, C64::new(l, eps), 200)?;
                    let m = walk_weighted_resolvent_norm(coin, a, C64::new(l, -eps), 200)?;
                    Ok((p.max(m), l))
                })
                .collect::<Result<_>>()?;
            let (sup, argmax_lambda) = vals.into_iter().fold((0.0, 0.0), |acc, v| if v.0 > acc.0 { v } else { acc });
            Ok(KatoRow { eps, sup, argmax_lambda })
        })
        .collect()
}

/// Uniform grid on `[0, 2 pi)` plus the four band edges `+-acos(b)`, `pi +- acos(b)`.
pub fn lambda_grid_with_edges(n: usize, band_edge: f64) -> Vec<f64> {
    let mut g: Vec<f64> = (0..n).map(|k| TAU * k as f64 / n as f64).collect();
    let e = band_edge.clamp(-1.0, 1.0).acos();
    g.extend([e, TAU - e, PI - e, PI + e]);
    g.sort_by(f64::total_cmp);
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(theta: f64) -> Mat<C64> {
        Mat::from_fn(1, 1, |_, _| C64::from_polar(1.0, theta))
    }

    #[test]
    fn qty_time_matches_geometric_series() {
        let eps = 0.1;
        let got = qty_time(&Weight::Identity, &scalar(0.7), &[ONE], eps, horizon(eps)).unwrap();
        let want = (1.0 + (-2.0 * eps).exp()) / (1.0 - (-2.0 * eps).exp());
        assert!((got - want).abs() < 1e-9 * want);
        assert_eq!(qty_time(&Weight::Zero, &scalar(0.7), &[ONE], eps, horizon(eps)).unwrap(), 0.0);
        assert!(qty_time(&Weight::Identity, &scalar(0.7), &[ONE], eps, 10).is_err());
    }

    #[test]
    fn scalar_resolvent_quadrature_is_exact() {
        // |R(l +- i eps)|^2 for U = e^{i t0} is 1 / |e^{i(t0 - l)} e^{+-eps} - 1|^2;
        // its mean over the circle is 1 / |e^{+-2 eps} - 1|.
        let eps = 0.2;
        let got = qty_resolvent(&Weight::Identity, &scalar(1.3), &[ONE], eps, default_nodes(eps)).unwrap();
        let want = 1.0 / ((2.0 * eps).exp() - 1.0) + 1.0 / (1.0 - (-2.0 * eps).exp());
        assert!((got - want).abs() < 1e-12 * want);
        let twice = qty_resolvent(&Weight::Identity, &scalar(1.3), &[ONE], eps, 2 * default_nodes(eps)).unwrap();
        assert!((got - twice).abs() < 1e-12 * want);
    }

    #[test]
    fn plancherel_on_random_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let eps = 0.1;
        for _ in 0..3 {
            let u = random_unitary(8, &mut rng);
            assert!(unitarity_defect(&u) < 1e-13);
            let phi = random_vector(8, &mut rng);
            let a = Weight::Diagonal((0..8).map(|i| 0.2 + 0.1 * i as f64).collect());
            let q1 = qty_time(&a, &u, &phi, eps, horizon(eps)).unwrap();
            let q2 = qty_resolvent(&a, &u, &phi, eps, default_nodes(eps)).unwrap();
            assert!((q1 - q2).abs() < 1e-10 * q1);
        }
    }

    #[test]
    fn scalar_sup_is_coth_half_eps() {
        let eps = 0.05;
        let r = qty_sup_resolvent(&Weight::Identity, &scalar(0.4), &[eps], &[0.4, 1.0]).unwrap();
        assert!((r.value - 1.0 / (0.5 * eps).tanh()).abs() < 1e-9 * r.value);
        assert!(r.min_eigenvalue > 0.0);
    }

    #[test]
    fn interval_quantity_of_rank_one() {
        let g = IntervalGrid { starts: 16, widths: vec![0.5, 1.0, 2.0], floor: 0.5 };
        let v = qty_interval(&Weight::Identity, &scalar(0.1), &g).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        assert_eq!(qty_interval(&Weight::Zero, &scalar(0.1), &g).unwrap(), 0.0);
    }

    #[test]
    fn stone_full_circle_and_empty_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_unitary(4, &mut rng);
        let full = stone_integral(&u, 0.0, TAU, 0.1).unwrap();
        let id = Weight::Identity.matrix(4).unwrap();
        assert!(max_abs_diff(&full, &id) < 1e-10);
        assert!(max_abs_diff(&stone_integral(&u, 1.0, 1.0, 0.1).unwrap(), &Mat::zeros(4, 4)) == 0.0);
    }

    #[test]
    fn fourier_identities_for_identity_operator() {
        let u = Weight::Identity.matrix(2).unwrap();
        let eps = 0.3;
        let r = fourier_identities_check(&Weight::Identity, &u, &[ONE, ZERO], eps, 200, &[0.2, 1.0, 3.0]).unwrap();
        assert!(r.forward < 1e-12 && r.backward < 1e-12 && r.two_sided < 1e-12);
    }

    #[test]
    fn triangle_bound_by_kato_sufficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_unitary(6, &mut rng);
        let a = Weight::Diagonal(vec![0.3, 0.5, 0.1, 0.9, 0.4, 0.2]);
        let lambdas: Vec<f64> = (0..32).map(|k| TAU * k as f64 / 32.0).collect();
        let eps = 0.05;
        let q3 = qty_sup_resolvent(&a, &u, &[eps], &lambdas).unwrap().value;
        let mus: Vec<C64> = lambdas.iter().flat_map(|&l| [C64::new(l, eps), C64::new(l, -eps)]).collect();
        assert!(q3 <= 2.0 * kato_sufficient(&a, &u, &mus).unwrap() + 1e-12);
        assert_eq!(kato_sufficient(&Weight::Zero, &u, &mus).unwrap(), 0.0);
    }
}
