//! Shift, coin and nonlinear coin operators of the walk, together with the
//! linearization of the double step around a bound state.

use std::io::{Read, Write};

use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeGrid, Spinor, SpinorField, I, ONE, ZERO};

pub type Mat2 = [[C64; 2]; 2];

pub(crate) fn mat_vec(m: &Mat2, v: &Spinor) -> Spinor {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

pub(crate) fn adjoint(m: &Mat2) -> Mat2 {
    [[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]]
}

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

/// Largest singular value of a 2x2 matrix.
pub fn op_norm2(m: &Mat2) -> f64 {
    let fro: f64 = m.iter().flatten().map(|z| z.norm_sqr()).sum();
    let det = (m[0][0] * m[1][1] - m[0][1] * m[1][0]).norm();
    let disc = (fro * fro - 4.0 * det * det).max(0.0).sqrt();
    (0.5 * (fro + disc)).sqrt()
}

/// Real pairing `<a, b> = Re(a . conj b)` on `C^2`.
fn pair2(a: &Spinor, b: &Spinor) -> f64 {
    (a[0] * b[0].conj() + a[1] * b[1].conj()).re
}

/// `e^{i theta} [[beta, conj alpha], [-alpha, conj beta]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteCoin {
    pub theta: f64,
    pub alpha: C64,
    pub beta: C64,
}

impl SiteCoin {
    pub fn new(theta: f64, alpha: C64, beta: C64) -> Self {
        Self { theta, alpha, beta }
    }

    /// Real coin with `alpha = sin kappa`, `beta = cos kappa`.
    pub fn from_angle(kappa: f64, theta: f64) -> Self {
        Self::new(theta, C64::new(kappa.sin(), 0.0), C64::new(kappa.cos(), 0.0))
    }

    pub fn matrix(&self) -> Mat2 {
        let ph = C64::from_polar(1.0, self.theta);
        [[ph * self.beta, ph * self.alpha.conj()], [-ph * self.alpha, ph * self.beta.conj()]]
    }

    pub fn unitarity_defect(&self) -> f64 {
        (self.alpha.norm_sqr() + self.beta.norm_sqr() - 1.0).abs()
    }
}

/// Site-dependent coin `C(x)` with its asymptotic value `C_inf` (phase zero).
#[derive(Debug, Clone, PartialEq)]
pub struct CoinField {
    grid: LatticeGrid,
    sites: Vec<SiteCoin>,
    matrices: Vec<Mat2>,
    alpha_inf: C64,
    beta_inf: C64,
}

const UNITARITY_TOL: f64 = 1e-12;

impl CoinField {
    pub fn new(grid: LatticeGrid, sites: Vec<SiteCoin>, alpha_inf: C64, beta_inf: C64) -> Result<Self> {
        let a = alpha_inf.norm();
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidArgument(format!("asymptotic |alpha| = {a} must lie strictly between 0 and 1")));
        }
        Self::build(grid, sites, alpha_inf, beta_inf)
    }

    /// Coin identically equal to the identity, so `U = S`. This sits outside the
    /// standing assumption `0 < |alpha_inf| < 1` and is meant for operator checks.
    pub fn identity(grid: LatticeGrid) -> Self {
        let c = SiteCoin::new(0.0, ZERO, ONE);
        Self::build(grid, vec![c; grid.len()], ZERO, ONE).expect("identity coin is unitary")
    }

    fn build(grid: LatticeGrid, sites: Vec<SiteCoin>, alpha_inf: C64, beta_inf: C64) -> Result<Self> {
        if sites.len() != grid.len() {
            return Err(Error::InvalidArgument(format!("expected {} coins, got {}", grid.len(), sites.len())));
        }
        let inf = SiteCoin::new(0.0, alpha_inf, beta_inf);
        if inf.unitarity_defect() > UNITARITY_TOL {
            return Err(Error::NonUnitaryCoin { site: i64::MAX, deviation: inf.unitarity_defect() });
        }
        for (i, c) in sites.iter().enumerate() {
            let d = c.unitarity_defect();
            if d > UNITARITY_TOL || !c.theta.is_finite() {
                return Err(Error::NonUnitaryCoin { site: grid.site(i), deviation: d });
            }
        }
        let matrices = sites.iter().map(SiteCoin::matrix).collect();
        Ok(Self { grid, sites, matrices, alpha_inf, beta_inf })
    }

    /// `C(x) = C_inf` everywhere.
    pub fn uniform(grid: LatticeGrid, kappa_inf: f64) -> Result<Self> {
        let inf = SiteCoin::from_angle(kappa_inf, 0.0);
        Self::new(grid, vec![inf; grid.len()], inf.alpha, inf.beta)
    }

    /// Uniform coin with the single site `x = 0` replaced by `origin`.
    pub fn point_defect(grid: LatticeGrid, kappa_inf: f64, origin: SiteCoin) -> Result<Self> {
        let inf = SiteCoin::from_angle(kappa_inf, 0.0);
        let mut sites = vec![inf; grid.len()];
        sites[grid.index(0)] = origin;
        Self::new(grid, sites, inf.alpha, inf.beta)
    }

    /// Coin whose angle and phase relax to the asymptotic values with a
    /// Gaussian profile of the given width.
    pub fn gaussian_defect(grid: LatticeGrid, kappa_inf: f64, origin: SiteCoin, width: f64) -> Result<Self> {
        let inf = SiteCoin::from_angle(kappa_inf, 0.0);
        let kappa0 = origin.alpha.re.atan2(origin.beta.re);
        let sites = grid
            .sites()
            .map(|x| {
                let w = (-(x as f64 / width).powi(2)).exp();
                SiteCoin::from_angle(kappa_inf + (kappa0 - kappa_inf) * w, origin.theta * w)
            })
            .collect();
        Self::new(grid, sites, inf.alpha, inf.beta)
    }

    pub fn grid(&self) -> LatticeGrid {
        self.grid
    }

    pub fn site(&self, x: i64) -> SiteCoin {
        self.sites[self.grid.index(x)]
    }

    pub fn sites(&self) -> &[SiteCoin] {
        &self.sites
    }

    pub fn matrix(&self, x: i64) -> Mat2 {
        self.matrices[self.grid.index(x)]
    }

    pub fn alpha_inf(&self) -> C64 {
        self.alpha_inf
    }

    pub fn beta_inf(&self) -> C64 {
        self.beta_inf
    }

    pub fn asymptotic(&self) -> SiteCoin {
        SiteCoin::new(0.0, self.alpha_inf, self.beta_inf)
    }

    /// Same coin with every site replaced by `C_inf`.
    pub fn asymptotic_field(&self) -> CoinField {
        let inf = self.asymptotic();
        Self::build(self.grid, vec![inf; self.grid.len()], self.alpha_inf, self.beta_inf)
            .expect("asymptotic coin validated at construction")
    }

    /// Same profile placed on another grid; sites outside `self` get `C_inf`.
    pub fn resized(&self, grid: LatticeGrid) -> CoinField {
        let inf = self.asymptotic();
        let sites = grid.sites().map(|x| if self.grid.contains(x) { self.site(x) } else { inf }).collect();
        Self::build(grid, sites, self.alpha_inf, self.beta_inf).expect("coins validated at construction")
    }

    /// `sum_x <x> ||C(x) - C_inf||`.
    pub fn perturbation_l11(&self) -> f64 {
        let inf = self.asymptotic().matrix();
        self.grid
            .sites()
            .map(|x| {
                let m = self.matrix(x);
                let mut d = [[ZERO; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        d[i][j] = m[i][j] - inf[i][j];
                    }
                }
                crate::lattice::bracket(x) * op_norm2(&d)
            })
            .sum()
    }

    /// Dense matrix of `U = S C` in the flattened basis `2 (x + L) + component`.
    pub fn dense_matrix(&self) -> Mat<C64> {
        let n = self.grid.len();
        let mut m = Mat::<C64>::zeros(2 * n, 2 * n);
        for i in 0..n {
            let up = (i + 1) % n;
            let down = (i + n - 1) % n;
            let c = &self.matrices[i];
            m[(2 * up, 2 * i)] = c[0][0];
            m[(2 * up, 2 * i + 1)] = c[0][1];
            m[(2 * down + 1, 2 * i)] = c[1][0];
            m[(2 * down + 1, 2 * i + 1)] = c[1][1];
        }
        m
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["x", "theta", "re_alpha", "im_alpha", "re_beta", "im_beta"])?;
        for (i, c) in self.sites.iter().enumerate() {
            out.serialize((self.grid.site(i), c.theta, c.alpha.re, c.alpha.im, c.beta.re, c.beta.im))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the CSV schema written by [`CoinField::write_csv`]. Sites must cover
    /// `[-L, L)` in order; the asymptotic coin is taken from the outermost site.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut xs = Vec::new();
        let mut sites = Vec::new();
        for rec in rdr.deserialize() {
            let (x, theta, ar, ai, br, bi): (i64, f64, f64, f64, f64, f64) = rec?;
            xs.push(x);
            sites.push(SiteCoin::new(theta, C64::new(ar, ai), C64::new(br, bi)));
        }
        if sites.is_empty() || sites.len() % 2 != 0 {
            return Err(Error::InvalidArgument("coin CSV must list an even, nonzero number of sites".into()));
        }
        let grid = LatticeGrid::new(sites.len() / 2)?;
        if xs.iter().zip(grid.sites()).any(|(a, b)| *a != b) {
            return Err(Error::InvalidArgument("coin CSV sites must run from -L to L-1".into()));
        }
        let edge = sites[0];
        Self::new(grid, sites, edge.alpha, edge.beta)
    }
}

/// Named coin profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Asymptotic angle `kappa_inf` with `|alpha_inf| = 0.6`, and a single
    /// phased defect at the origin. Exactly two discrete eigenvalues.
    KlsOrigin,
    /// Same asymptotics with a Gaussian defect profile.
    KlsSmooth,
    /// `C = C_inf` everywhere: no discrete spectrum.
    Free,
}

pub const KAPPA_INF: f64 = 0.643_501_108_793_284_4; // asin(0.6)
pub const KAPPA_ORIGIN: f64 = 0.3;
pub const THETA_ORIGIN: f64 = 1.0;

impl Preset {
    pub fn coin(self, grid: LatticeGrid) -> Result<CoinField> {
        let origin = SiteCoin::from_angle(KAPPA_ORIGIN, THETA_ORIGIN);
        match self {
            Preset::KlsOrigin => CoinField::point_defect(grid, KAPPA_INF, origin),
            Preset::KlsSmooth => CoinField::gaussian_defect(grid, KAPPA_INF, origin, 2.0),
            Preset::Free => CoinField::uniform(grid, KAPPA_INF),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::KlsOrigin => "kls-origin",
            Preset::KlsSmooth => "kls-smooth",
            Preset::Free => "free",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "kls-origin" => Ok(Preset::KlsOrigin),
            "kls-smooth" => Ok(Preset::KlsSmooth),
            "free" => Ok(Preset::Free),
            _ => Err(Error::InvalidArgument(format!("unknown preset {name:?}"))),
        }
    }
}

/// `(Su)(x) = (u_up(x-1), u_down(x+1))`.
pub fn apply_shift(u: &SpinorField) -> SpinorField {
    let n = u.grid().len();
    let v = u.values();
    let mut out = SpinorField::zeros(u.grid());
    for (i, o) in out.values_mut().iter_mut().enumerate() {
        *o = [v[(i + n - 1) % n][0], v[(i + 1) % n][1]];
    }
    out
}

pub fn apply_shift_inv(u: &SpinorField) -> SpinorField {
    let n = u.grid().len();
    let v = u.values();
    let mut out = SpinorField::zeros(u.grid());
    for (i, o) in out.values_mut().iter_mut().enumerate() {
        *o = [v[(i + 1) % n][0], v[(i + n - 1) % n][1]];
    }
    out
}

pub fn apply_coin(coin: &CoinField, u: &SpinorField) -> Result<SpinorField> {
    coin.grid.check_same(&u.grid())?;
    let mut out = u.clone();
    for (o, m) in out.values_mut().iter_mut().zip(&coin.matrices) {
        *o = mat_vec(m, o);
    }
    Ok(out)
}

/// `U = S C`.
pub fn apply_u(coin: &CoinField, u: &SpinorField) -> Result<SpinorField> {
    coin.grid.check_same(&u.grid())?;
    let n = u.grid().len();
    let v = u.values();
    let m = &coin.matrices;
    let mut out = SpinorField::zeros(u.grid());
    for (i, o) in out.values_mut().iter_mut().enumerate() {
        let l = (i + n - 1) % n;
        let r = (i + 1) % n;
        o[0] = m[l][0][0] * v[l][0] + m[l][0][1] * v[l][1];
        o[1] = m[r][1][0] * v[r][0] + m[r][1][1] * v[r][1];
    }
    Ok(out)
}

/// `U^{-1} = C^* S^{-1}`.
pub fn apply_u_inv(coin: &CoinField, u: &SpinorField) -> Result<SpinorField> {
    coin.grid.check_same(&u.grid())?;
    let mut out = apply_shift_inv(u);
    for (o, m) in out.values_mut().iter_mut().zip(&coin.matrices) {
        *o = mat_vec(&adjoint(m), o);
    }
    Ok(out)
}

/// `g(s) = c s^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub c: f64,
    pub p: u32,
}

impl Monomial {
    pub fn new(c: f64, p: u32) -> Result<Self> {
        if p == 0 || !c.is_finite() {
            return Err(Error::InvalidArgument(format!("need p >= 1 and finite c, got c = {c}, p = {p}")));
        }
        Ok(Self { c, p })
    }

    pub fn value(&self, s: f64) -> f64 {
        self.c * s.powi(self.p as i32)
    }

    pub fn derivative(&self, s: f64) -> f64 {
        self.c * self.p as f64 * s.powi(self.p as i32 - 1)
    }
}

/// Nonlinear coin `N(u)(x) = exp(i g(<u(x), gamma u(x)>) gamma) u(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    gamma: Mat2,
    eigvals: [f64; 2],
    eigvecs: Mat2,
    g: Monomial,
}

impl Nonlinearity {
    pub fn new(gamma: Mat2, g: Monomial) -> Result<Self> {
        let dev = (gamma[0][1] - gamma[1][0].conj()).norm() + gamma[0][0].im.abs() + gamma[1][1].im.abs();
        if dev > 1e-12 {
            return Err(Error::NonHermitian(dev));
        }
        let m = Mat::<C64>::from_fn(2, 2, |i, j| gamma[i][j]);
        let eig = m.self_adjoint_eigen(Side::Lower).map_err(|e| Error::LinearAlgebra(format!("{e:?}")))?;
        let s = eig.S().column_vector();
        let u = eig.U();
        let eigvals = [s[0].re, s[1].re];
        let eigvecs = [[u[(0, 0)], u[(0, 1)]], [u[(1, 0)], u[(1, 1)]]];
        Ok(Self { gamma, eigvals, eigvecs, g })
    }

    /// `gamma = sigma_3`, `g(s) = s^3`.
    pub fn standard() -> Self {
        Self::sigma3(Monomial { c: 1.0, p: 3 })
    }

    pub fn sigma3(g: Monomial) -> Self {
        Self::new([[ONE, ZERO], [ZERO, -ONE]], g).expect("sigma_3 is Hermitian")
    }

    /// The zero nonlinearity, `N = Id`.
    pub fn linear() -> Self {
        Self::sigma3(Monomial { c: 0.0, p: 1 })
    }

    pub fn gamma(&self) -> Mat2 {
        self.gamma
    }

    pub fn monomial(&self) -> Monomial {
        self.g
    }

    pub fn is_linear(&self) -> bool {
        self.g.c == 0.0
    }

    /// `V diag(f(lambda_k)) V^*`.
    fn functional(&self, f: impl Fn(f64) -> C64) -> Mat2 {
        let v = &self.eigvecs;
        let d = [f(self.eigvals[0]), f(self.eigvals[1])];
        let mut out = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = v[i][0] * d[0] * v[j][0].conj() + v[i][1] * d[1] * v[j][1].conj();
            }
        }
        out
    }

    /// `exp(i s gamma)`.
    pub fn phase(&self, s: f64) -> Mat2 {
        self.functional(|l| C64::from_polar(1.0, s * l))
    }

    /// `exp(i s gamma) - 1`, accurate for small `s`.
    pub fn phase_minus_one(&self, s: f64) -> Mat2 {
        self.functional(|l| expm1_i(s * l))
    }

    pub fn gamma_apply(&self, v: &Spinor) -> Spinor {
        mat_vec(&self.gamma, v)
    }

    /// `<v, gamma v>`.
    pub fn density(&self, v: &Spinor) -> f64 {
        pair2(v, &self.gamma_apply(v))
    }

    pub fn apply_site(&self, v: &Spinor) -> Spinor {
        if self.is_linear() {
            return *v;
        }
        mat_vec(&self.phase(self.g.value(self.density(v))), v)
    }

    pub fn apply(&self, u: &SpinorField) -> SpinorField {
        let mut out = u.clone();
        if self.is_linear() {
            return out;
        }
        for o in out.values_mut() {
            *o = self.apply_site(o);
        }
        out
    }

    /// `DN(w) u = e^{i g gamma} (u + A(w) u)`, `A(w) u = 2 g'(m) <u, gamma w> i gamma w`.
    pub fn apply_derivative(&self, w: &SpinorField, u: &SpinorField) -> Result<SpinorField> {
        w.grid().check_same(&u.grid())?;
        let mut out = u.clone();
        if self.is_linear() {
            return Ok(out);
        }
        for (o, wv) in out.values_mut().iter_mut().zip(w.values()) {
            let gw = self.gamma_apply(wv);
            let m = pair2(wv, &gw);
            let a = 2.0 * self.g.derivative(m) * pair2(o, &gw);
            let v = [o[0] + I * a * gw[0], o[1] + I * a * gw[1]];
            *o = mat_vec(&self.phase(self.g.value(m)), &v);
        }
        Ok(out)
    }

    /// `A(w) u` alone.
    pub fn apply_a(&self, w: &SpinorField, u: &SpinorField) -> Result<SpinorField> {
        w.grid().check_same(&u.grid())?;
        let mut out = SpinorField::zeros(u.grid());
        for ((o, wv), uv) in out.values_mut().iter_mut().zip(w.values()).zip(u.values()) {
            let gw = self.gamma_apply(wv);
            let a = 2.0 * self.g.derivative(pair2(wv, &gw)) * pair2(uv, &gw);
            *o = [I * a * gw[0], I * a * gw[1]];
        }
        Ok(out)
    }

    /// `DN(w)^{-1} = (1 - A(w)) e^{-i g gamma}`, using `A^2 = 0`.
    pub fn apply_derivative_inv(&self, w: &SpinorField, u: &SpinorField) -> Result<SpinorField> {
        w.grid().check_same(&u.grid())?;
        let mut out = u.clone();
        if self.is_linear() {
            return Ok(out);
        }
        for (o, wv) in out.values_mut().iter_mut().zip(w.values()) {
            let gw = self.gamma_apply(wv);
            let m = pair2(wv, &gw);
            let v = mat_vec(&self.phase(-self.g.value(m)), o);
            let a = 2.0 * self.g.derivative(m) * pair2(&v, &gw);
            *o = [v[0] - I * a * gw[0], v[1] - I * a * gw[1]];
        }
        Ok(out)
    }
}

/// `e^{i x} - 1 = -2 sin^2(x/2) + i sin x`.
pub fn expm1_i(x: f64) -> C64 {
    let h = (0.5 * x).sin();
    C64::new(-2.0 * h * h, x.sin())
}

/// A coin field together with a nonlinearity.
#[derive(Debug, Clone)]
pub struct Walk {
    pub coin: CoinField,
    pub nonlinearity: Nonlinearity,
}

impl Walk {
    pub fn new(coin: CoinField, nonlinearity: Nonlinearity) -> Self {
        Self { coin, nonlinearity }
    }

    pub fn grid(&self) -> LatticeGrid {
        self.coin.grid()
    }

    pub fn u(&self, u: &SpinorField) -> Result<SpinorField> {
        apply_u(&self.coin, u)
    }

    pub fn u_inv(&self, u: &SpinorField) -> Result<SpinorField> {
        apply_u_inv(&self.coin, u)
    }

    /// One physical step `u -> U N(u)`.
    pub fn step(&self, u: &SpinorField) -> Result<SpinorField> {
        apply_u(&self.coin, &self.nonlinearity.apply(u))
    }

    /// `U N o U N`, the unit of time in nonlinear experiments.
    pub fn double_step(&self, u: &SpinorField) -> Result<SpinorField> {
        self.step(&self.step(u)?)
    }

    /// Linearization of the double step at `phi`:
    /// `L xi = U DN(U N phi) U DN(phi) xi`.
    pub fn linearization(&self, phi: &SpinorField, xi: &SpinorField) -> Result<SpinorField> {
        let mid = self.step(phi)?;
        let a = self.u(&self.nonlinearity.apply_derivative(phi, xi)?)?;
        self.u(&self.nonlinearity.apply_derivative(&mid, &a)?)
    }

    /// `L^{-1} = DN(phi)^{-1} U^{-1} DN(U N phi)^{-1} U^{-1}`.
    pub fn linearization_inv(&self, phi: &SpinorField, xi: &SpinorField) -> Result<SpinorField> {
        let mid = self.step(phi)?;
        let a = self.nonlinearity.apply_derivative_inv(&mid, &self.u_inv(xi)?)?;
        self.nonlinearity.apply_derivative_inv(phi, &self.u_inv(&a)?)
    }
}

pub(crate) fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    mat_mul(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeGrid;

    fn grid(l: usize) -> LatticeGrid {
        LatticeGrid::new(l).unwrap()
    }

    fn sample(g: LatticeGrid, seed: f64) -> SpinorField {
        SpinorField::from_fn(g, |x| {
            let t = x as f64 + seed;
            [C64::new((1.3 * t).sin(), (0.7 * t).cos()), C64::new((0.4 * t).cos(), (2.1 * t).sin())]
        })
    }

    #[test]
    fn shift_moves_components_in_opposite_directions() {
        let g = grid(4);
        let u = SpinorField::point(g, 0, [ONE, I]).unwrap();
        let s = apply_shift(&u);
        assert_eq!(s[1], [ONE, ZERO]);
        assert_eq!(s[-1], [ZERO, I]);
        assert_eq!(apply_shift_inv(&s), u);
    }

    #[test]
    fn identity_coin_is_pure_shift() {
        let g = grid(5);
        let u = sample(g, 0.3);
        let c = CoinField::identity(g);
        assert_eq!(apply_u(&c, &u).unwrap(), apply_shift(&u));
    }

    #[test]
    fn u_matches_dense_matrix() {
        let g = grid(6);
        let c = Preset::KlsSmooth.coin(g).unwrap();
        let u = sample(g, 1.1);
        let dense = c.dense_matrix();
        let flat = u.to_flat();
        let v = apply_u(&c, &u).unwrap().to_flat();
        for i in 0..flat.len() {
            let mut acc = ZERO;
            for (j, f) in flat.iter().enumerate() {
                acc += dense[(i, j)] * f;
            }
            assert!((acc - v[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn u_inverse_round_trip() {
        let g = grid(7);
        let c = Preset::KlsOrigin.coin(g).unwrap();
        let u = sample(g, -0.4);
        let back = apply_u_inv(&c, &apply_u(&c, &u).unwrap()).unwrap();
        assert!((&back - &u).norm() < 1e-14);
    }

    #[test]
    fn rejects_non_unitary_coin() {
        let g = grid(2);
        let mut sites = vec![SiteCoin::from_angle(0.5, 0.0); 4];
        sites[1].beta = C64::new(2.0, 0.0);
        let err = CoinField::new(g, sites, C64::new(0.6, 0.0), C64::new(0.8, 0.0)).unwrap_err();
        assert!(matches!(err, Error::NonUnitaryCoin { site: -1, .. }));
    }

    #[test]
    fn rejects_degenerate_asymptotics() {
        let g = grid(2);
        let s = SiteCoin::from_angle(0.0, 0.0);
        assert!(CoinField::new(g, vec![s; 4], ZERO, ONE).is_err());
    }

    #[test]
    fn op_norm_of_unitary_is_one() {
        let m = SiteCoin::from_angle(0.9, 0.4).matrix();
        assert!((op_norm2(&m) - 1.0).abs() < 1e-14);
        let d = [[C64::new(3.0, 0.0), ZERO], [ZERO, C64::new(0.0, -5.0)]];
        assert!((op_norm2(&d) - 5.0).abs() < 1e-14);
    }

    #[test]
    fn perturbation_weight_of_point_defect() {
        let g = grid(8);
        let c = Preset::KlsOrigin.coin(g).unwrap();
        let mut d = [[ZERO; 2]; 2];
        let m0 = c.matrix(0);
        let mi = c.asymptotic().matrix();
        for i in 0..2 {
            for j in 0..2 {
                d[i][j] = m0[i][j] - mi[i][j];
            }
        }
        assert!((c.perturbation_l11() - op_norm2(&d)).abs() < 1e-15);
        assert_eq!(Preset::Free.coin(g).unwrap().perturbation_l11(), 0.0);
    }

    #[test]
    fn coin_csv_round_trip() {
        let g = grid(5);
        let c = Preset::KlsSmooth.coin(g).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let back = CoinField::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.sites(), c.sites());
    }

    #[test]
    fn nonlinear_coin_preserves_local_mass() {
        let g = grid(6);
        let n = Nonlinearity::standard();
        let u = 0.7 * &sample(g, 2.0);
        let v = n.apply(&u);
        for (a, b) in u.values().iter().zip(v.values()) {
            let ma = a[0].norm_sqr() + a[1].norm_sqr();
            let mb = b[0].norm_sqr() + b[1].norm_sqr();
            assert!((ma - mb).abs() < 1e-15);
        }
    }

    #[test]
    fn phase_of_general_hermitian_gamma() {
        let gamma = [[C64::new(0.3, 0.0), C64::new(0.2, -0.5)], [C64::new(0.2, 0.5), C64::new(-1.1, 0.0)]];
        let n = Nonlinearity::new(gamma, Monomial { c: 1.0, p: 1 }).unwrap();
        // Taylor series of exp(i s gamma) as an independent oracle.
        let s = 0.37;
        let mut term = [[ONE, ZERO], [ZERO, ONE]];
        let mut sum = term;
        for k in 1..40 {
            let step = [[I * s * gamma[0][0], I * s * gamma[0][1]], [I * s * gamma[1][0], I * s * gamma[1][1]]];
            term = mat_mul(&term, &step);
            for row in term.iter_mut() {
                for z in row.iter_mut() {
                    *z /= k as f64;
                }
            }
            for i in 0..2 {
                for j in 0..2 {
                    sum[i][j] += term[i][j];
                }
            }
        }
        let p = n.phase(s);
        let pm = n.phase_minus_one(s);
        for i in 0..2 {
            for j in 0..2 {
                assert!((p[i][j] - sum[i][j]).norm() < 1e-14);
                let id = if i == j { ONE } else { ZERO };
                assert!((pm[i][j] + id - sum[i][j]).norm() < 1e-14);
            }
        }
        let bad = [[ONE, I], [I, ONE]];
        assert!(matches!(Nonlinearity::new(bad, Monomial { c: 1.0, p: 1 }), Err(Error::NonHermitian(_))));
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let g = grid(5);
        let n = Nonlinearity::sigma3(Monomial { c: 2.0, p: 3 });
        let w = 0.8 * &sample(g, 0.1);
        let u = sample(g, 3.3);
        let h = 1e-6;
        let plus = n.apply(&(&w + &(h * &u)));
        let minus = n.apply(&(&w - &(h * &u)));
        let fd = (0.5 / h) * &(&plus - &minus);
        let exact = n.apply_derivative(&w, &u).unwrap();
        assert!((&fd - &exact).norm() < 1e-8 * exact.norm());
    }

    #[test]
    fn a_is_nilpotent_and_inverse_is_exact() {
        let g = grid(5);
        let n = Nonlinearity::standard();
        let w = sample(g, 0.9);
        let u = sample(g, -2.0);
        let a2 = n.apply_a(&w, &n.apply_a(&w, &u).unwrap()).unwrap();
        assert!(a2.norm() < 1e-14 * u.norm());
        let back = n.apply_derivative_inv(&w, &n.apply_derivative(&w, &u).unwrap()).unwrap();
        assert!((&back - &u).norm() < 1e-12 * u.norm());
    }

    #[test]
    fn linearization_inverse_round_trip() {
        let g = grid(8);
        let walk = Walk::new(Preset::KlsOrigin.coin(g).unwrap(), Nonlinearity::standard());
        let phi = 0.6 * &sample(g, 0.5);
        let xi = sample(g, 1.7);
        let back = walk.linearization_inv(&phi, &walk.linearization(&phi, &xi).unwrap()).unwrap();
        assert!((&back - &xi).norm() < 1e-12 * xi.norm());
    }
}
