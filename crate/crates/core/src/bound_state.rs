//! Small-amplitude nonlinear bound states bifurcating from a discrete
//! eigenvalue. The correction `psi(r)` is found by a contraction in each
//! `r = |z|^2` and cached as a Chebyshev expansion on `[0, r_max]`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::lattice::{LatticeGrid, SpinorField, ZERO};
use crate::spectral::SpectralData;
use crate::walk::{mat_vec, CoinField, Nonlinearity, Walk};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyConfig {
    /// Number of Chebyshev-Lobatto nodes.
    pub nodes: usize,
    /// Upper end of the first candidate interval for `r`.
    pub r_cap: f64,
    /// Largest contraction ratio accepted at a cache node.
    pub contraction_margin: f64,
    pub max_iterations: usize,
    /// Midpoint interpolation error allowed against a direct solve.
    pub interpolation_tol: f64,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self { nodes: 32, r_cap: 0.25, contraction_margin: 0.5, max_iterations: 500, interpolation_tol: 1e-9 }
    }
}

/// Converged correction at one value of `r`.
#[derive(Debug, Clone)]
pub struct Correction {
    pub r: f64,
    pub psi: SpinorField,
    /// Frequency shift, `Lambda = lambda + r mu`. Real at a fixed point up to rounding.
    pub mu: C64,
    pub iterations: usize,
    /// Largest ratio of successive step sizes above the rounding floor.
    pub max_ratio: f64,
    /// Size of the last fixed-point step.
    pub residual: f64,
}

/// `w`-independent pieces of the fixed-point map at a given `r`.
struct MapContext<'a> {
    sd: &'a SpectralData,
    walk: &'a Walk,
    seed: &'a SpinorField,
    phi: &'a SpinorField,
    seed_overlap: f64,
    lambda: f64,
}

impl MapContext<'_> {
    /// `q(r, w) = r^{-1} (e^{i g(r <w, gamma w>) gamma} - 1) w`.
    fn q(&self, r: f64, w: &SpinorField) -> SpinorField {
        let nl = &self.walk.nonlinearity;
        let g = nl.monomial();
        let mut out = w.clone();
        for o in out.values_mut() {
            let m = nl.density(o);
            *o = if r > 0.0 {
                let v = mat_vec(&nl.phase_minus_one(g.value(r * m)), o);
                [v[0] / r, v[1] / r]
            } else if g.p == 1 {
                let gv = nl.gamma_apply(o);
                let k = C64::new(0.0, g.c * m);
                [k * gv[0], k * gv[1]]
            } else {
                [ZERO; 2]
            };
        }
        out
    }

    /// One application of the map. Returns the new `psi` and `x = e^{i r mu} - 1`.
    fn apply(&self, r: f64, psi: &SpinorField) -> Result<(SpinorField, C64)> {
        let mut w = self.seed.clone();
        w.axpy(C64::new(r, 0.0), psi)?;
        let uq = self.walk.u(&self.q(r, &w))?;
        let e = C64::from_polar(1.0, self.lambda);
        let x = e.conj() * uq.inner(self.phi)? * (r / self.seed_overlap);
        let mut rhs = self.sd.project_off_phi(&uq)?;
        rhs.scale(-C64::new(1.0, 0.0));
        rhs.axpy(e * x, psi)?;
        Ok((self.sd.resolvent_off_phi(&rhs)?, x))
    }

    fn mu(&self, r: f64, x: C64, psi: &SpinorField) -> Result<C64> {
        if r > 0.0 {
            return Ok(log1p_c(x) * C64::new(0.0, -1.0) / r);
        }
        // r = 0: x / r -> e^{-i lambda} (U q_0, phi) / s.
        let uq = self.walk.u(&self.q(0.0, self.seed))?;
        let _ = psi;
        Ok(C64::new(0.0, -1.0) * C64::from_polar(1.0, -self.lambda) * uq.inner(self.phi)? / self.seed_overlap)
    }

    fn solve(&self, r: f64, max_iterations: usize, start: Option<&SpinorField>) -> Result<Correction> {
        let mut psi = start.cloned().unwrap_or_else(|| SpinorField::zeros(self.seed.grid()));
        let mut prev_diff = f64::INFINITY;
        let mut max_ratio: f64 = 0.0;
        let mut x = ZERO;
        for it in 1..=max_iterations {
            let (next, xn) = self.apply(r, &psi)?;
            let diff = (&next - &psi).norm();
            if prev_diff.is_finite() && prev_diff > 1e-12 {
                max_ratio = max_ratio.max(diff / prev_diff);
            }
            if !diff.is_finite() || (max_ratio >= 1.0 && diff > 1e-10) {
                return Err(Error::NotContracting { r, ratio: max_ratio });
            }
            psi = next;
            x = xn;
            let floor = 1e-15 * psi.norm().max(1.0);
            if diff <= floor || (diff < 1e-12 && diff >= prev_diff) {
                let mu = self.mu(r, x, &psi)?;
                return Ok(Correction { r, psi, mu, iterations: it, max_ratio, residual: diff });
            }
            prev_diff = diff;
        }
        let _ = x;
        Err(Error::NoConvergence { what: "bound-state correction", iterations: max_iterations, residual: prev_diff })
    }
}

/// `log(1 + x)` accurate for small `x`.
pub fn log1p_c(x: C64) -> C64 {
    C64::new(0.5 * (2.0 * x.re + x.norm_sqr()).ln_1p(), x.im.atan2(1.0 + x.re))
}

/// The bound-state family `Phi[z] = z (phi_b + r psi(r))`, `Lambda[z] = lambda + r mu(r)`,
/// with `phi_b = phi / ||P_+ phi||` so that `P_+ phi_b = phi_+` has unit norm.
#[derive(Debug, Clone)]
pub struct BoundStateFamily {
    walk: Walk,
    spectral: SpectralData,
    lambda: f64,
    phi: SpinorField,
    seed: SpinorField,
    phi_plus: SpinorField,
    seed_overlap: f64,
    config: FamilyConfig,
    r_max: f64,
    node_r: Vec<f64>,
    node_ratio: Vec<f64>,
    psi_coeffs: Vec<SpinorField>,
    dpsi_coeffs: Vec<SpinorField>,
    mu_coeffs: Vec<C64>,
    interpolation_error: f64,
}

/// A point of the family with the pieces needed for `Phi`, `DPhi` and `Lambda`.
#[derive(Debug, Clone)]
pub struct FamilyPoint {
    pub z: C64,
    pub r: f64,
    /// `phi_b + r psi(r)`.
    pub w: SpinorField,
    /// `psi(r) + r psi'(r)`.
    pub dw: SpinorField,
    pub lambda: f64,
    pub mu_imag: f64,
}

impl FamilyPoint {
    pub fn phi(&self) -> SpinorField {
        self.w.scaled(self.z)
    }

    pub fn phi_plus(&self) -> SpinorField {
        self.phi().p_plus()
    }

    /// `DPhi[z] a = a w + 2 Re(conj(z) a) z dw` for a complex direction `a`.
    pub fn dphi(&self, a: C64) -> SpinorField {
        let mut out = self.w.scaled(a);
        let k = 2.0 * (self.z.conj() * a).re;
        out.axpy(self.z * k, &self.dw).expect("same grid");
        out
    }

    pub fn dphi_plus(&self, a: C64) -> SpinorField {
        self.dphi(a).p_plus()
    }

    pub fn lambda_plus(&self) -> f64 {
        2.0 * self.lambda
    }
}

impl BoundStateFamily {
    pub fn new(coin: &CoinField, nonlinearity: Nonlinearity, config: FamilyConfig) -> Result<Self> {
        let spectral = SpectralData::new(coin)?;
        Self::from_spectral(spectral, nonlinearity, config)
    }

    pub fn from_spectral(spectral: SpectralData, nonlinearity: Nonlinearity, config: FamilyConfig) -> Result<Self> {
        if config.nodes < 4 || !(config.r_cap > 0.0) {
            return Err(Error::InvalidArgument("need at least 4 nodes and a positive r_cap".into()));
        }
        let pair = spectral.selected()?.clone();
        let seed = pair.phi.scaled(C64::new(1.0 / pair.even_weight, 0.0));
        let walk = Walk::new(spectral.coin().clone(), nonlinearity);
        let mut fam = Self {
            walk,
            lambda: pair.lambda,
            phi: pair.phi.clone(),
            phi_plus: pair.phi_plus.clone(),
            seed,
            seed_overlap: 1.0 / pair.even_weight,
            spectral,
            config,
            r_max: config.r_cap,
            node_r: Vec::new(),
            node_ratio: Vec::new(),
            psi_coeffs: Vec::new(),
            dpsi_coeffs: Vec::new(),
            mu_coeffs: Vec::new(),
            interpolation_error: 0.0,
        };
        fam.build_cache()?;
        Ok(fam)
    }

    fn context(&self) -> MapContext<'_> {
        MapContext {
            sd: &self.spectral,
            walk: &self.walk,
            seed: &self.seed,
            phi: &self.phi,
            seed_overlap: self.seed_overlap,
            lambda: self.lambda,
        }
    }

    fn nodes_on(&self, r_max: f64) -> Vec<f64> {
        let n = self.config.nodes - 1;
        (0..=n).map(|j| 0.5 * r_max * (1.0 - (PI * j as f64 / n as f64).cos())).collect()
    }

    fn build_cache(&mut self) -> Result<()> {
        let mut r_max = self.config.r_cap;
        for _ in 0..16 {
            let nodes = self.nodes_on(r_max);
            let ctx = self.context();
            let mut sols = Vec::with_capacity(nodes.len());
            let mut failed_at = None;
            for (j, &r) in nodes.iter().enumerate() {
                let start = sols.last().map(|s: &Correction| &s.psi);
                match ctx.solve(r, self.config.max_iterations, start) {
                    Ok(c) if c.max_ratio <= self.config.contraction_margin => sols.push(c),
                    Ok(_) | Err(Error::NotContracting { .. }) | Err(Error::NoConvergence { .. }) => {
                        failed_at = Some(j);
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            match failed_at {
                None => {
                    self.install(r_max, sols)?;
                    return Ok(());
                }
                Some(0) | Some(1) => {
                    return Err(Error::NotContracting { r: nodes[failed_at.unwrap()], ratio: f64::NAN });
                }
                Some(j) => {
                    log::debug!("contraction test failed at r = {}, shrinking r_max", nodes[j]);
                    r_max = nodes[j - 1];
                }
            }
        }
        Err(Error::NoConvergence { what: "r_max selection", iterations: 16, residual: r_max })
    }

    fn install(&mut self, r_max: f64, sols: Vec<Correction>) -> Result<()> {
        let n = sols.len() - 1;
        let grid = self.grid();
        // Values are stored at t_j = -cos(pi j / n); reverse to the standard order cos(pi j / n).
        let vals: Vec<&Correction> = sols.iter().rev().collect();
        let mut psi_coeffs = vec![SpinorField::zeros(grid); n + 1];
        let mut mu_coeffs = vec![ZERO; n + 1];
        for k in 0..=n {
            let mut acc = SpinorField::zeros(grid);
            let mut acc_mu = ZERO;
            for (j, c) in vals.iter().enumerate() {
                let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                let f = w * (PI * (k * j) as f64 / n as f64).cos() * 2.0 / n as f64;
                acc.axpy(C64::new(f, 0.0), &c.psi)?;
                acc_mu += c.mu * f;
            }
            if k == 0 || k == n {
                acc.scale(C64::new(0.5, 0.0));
                acc_mu *= 0.5;
            }
            psi_coeffs[k] = acc;
            mu_coeffs[k] = acc_mu;
        }
        // Derivative coefficients in t: b_{k-1} = b_{k+1} + 2 k a_k.
        let mut d = vec![SpinorField::zeros(grid); n + 2];
        for k in (1..=n).rev() {
            let mut b = d[k + 1].clone();
            b.axpy(C64::new(2.0 * k as f64, 0.0), &psi_coeffs[k])?;
            d[k - 1] = b;
        }
        d[0].scale(C64::new(0.5, 0.0));
        d.truncate(n + 1);
        // dt/dr = 2 / r_max.
        for c in &mut d {
            c.scale(C64::new(2.0 / r_max, 0.0));
        }
        self.r_max = r_max;
        self.node_r = sols.iter().map(|c| c.r).collect();
        self.node_ratio = sols.iter().map(|c| c.max_ratio).collect();
        self.psi_coeffs = psi_coeffs;
        self.dpsi_coeffs = d;
        self.mu_coeffs = mu_coeffs;
        self.interpolation_error = self.check_midpoints()?;
        if self.interpolation_error > self.config.interpolation_tol {
            return Err(Error::InterpolationInaccurate(self.interpolation_error));
        }
        Ok(())
    }

    fn check_midpoints(&self) -> Result<f64> {
        let n = self.node_r.len() - 1;
        let ctx = self.context();
        let mut worst: f64 = 0.0;
        for j in [0, n / 4, n / 2, n - 1] {
            let r = 0.5 * (self.node_r[j] + self.node_r[j + 1]);
            let direct = ctx.solve(r, self.config.max_iterations, None)?;
            let (psi, _) = self.interpolate(r)?;
            worst = worst.max((&psi - &direct.psi).norm());
        }
        Ok(worst)
    }

    fn chebyshev_t(&self, r: f64) -> Vec<f64> {
        let n = self.psi_coeffs.len();
        let t = 2.0 * r / self.r_max - 1.0;
        let mut out = vec![1.0; n];
        if n > 1 {
            out[1] = t;
        }
        for k in 2..n {
            out[k] = 2.0 * t * out[k - 1] - out[k - 2];
        }
        out
    }

    fn check_r(&self, r: f64) -> Result<()> {
        if !(r >= 0.0 && r <= self.r_max * (1.0 + 1e-12)) {
            return Err(Error::OutOfRange { r, r_max: self.r_max });
        }
        Ok(())
    }

    /// Interpolated `(psi(r), mu(r))`.
    pub fn interpolate(&self, r: f64) -> Result<(SpinorField, C64)> {
        self.check_r(r)?;
        let t = self.chebyshev_t(r);
        let mut psi = SpinorField::zeros(self.grid());
        let mut mu = ZERO;
        for ((c, m), tk) in self.psi_coeffs.iter().zip(&self.mu_coeffs).zip(&t) {
            psi.axpy(C64::new(*tk, 0.0), c)?;
            mu += m * tk;
        }
        Ok((psi, mu))
    }

    pub fn psi_derivative(&self, r: f64) -> Result<SpinorField> {
        self.check_r(r)?;
        let t = self.chebyshev_t(r);
        let mut out = SpinorField::zeros(self.grid());
        for (c, tk) in self.dpsi_coeffs.iter().zip(&t) {
            out.axpy(C64::new(*tk, 0.0), c)?;
        }
        Ok(out)
    }

    /// Direct fixed-point solve at `r`, bypassing the cache.
    pub fn solve_correction(&self, r: f64) -> Result<Correction> {
        if !(r >= 0.0) {
            return Err(Error::OutOfRange { r, r_max: self.r_max });
        }
        self.context().solve(r, self.config.max_iterations, None)
    }

    /// `psi - N(r, psi)` for a candidate correction.
    pub fn fixed_point_defect(&self, r: f64, psi: &SpinorField) -> Result<SpinorField> {
        let (next, _) = self.context().apply(r, psi)?;
        Ok(psi - &next)
    }

    pub fn point(&self, z: C64) -> Result<FamilyPoint> {
        let r = z.norm_sqr();
        let (psi, mu) = self.interpolate(r)?;
        let dpsi = self.psi_derivative(r)?;
        let mut w = self.seed.clone();
        w.axpy(C64::new(r, 0.0), &psi)?;
        let mut dw = psi;
        dw.axpy(C64::new(r, 0.0), &dpsi)?;
        Ok(FamilyPoint { z, r, w, dw, lambda: self.lambda + r * mu.re, mu_imag: r * mu.im })
    }

    pub fn eval_phi(&self, z: C64) -> Result<SpinorField> {
        Ok(self.point(z)?.phi())
    }

    pub fn eval_phi_plus(&self, z: C64) -> Result<SpinorField> {
        Ok(self.point(z)?.phi_plus())
    }

    pub fn eval_lambda(&self, z: C64) -> Result<f64> {
        Ok(self.point(z)?.lambda)
    }

    pub fn eval_lambda_plus(&self, z: C64) -> Result<f64> {
        Ok(2.0 * self.eval_lambda(z)?)
    }

    pub fn eval_dphi(&self, z: C64, a: C64) -> Result<SpinorField> {
        Ok(self.point(z)?.dphi(a))
    }

    pub fn eval_dphi_plus(&self, z: C64, a: C64) -> Result<SpinorField> {
        Ok(self.point(z)?.dphi_plus(a))
    }

    /// `||U N(Phi[z]) - e^{i Lambda[z]} Phi[z]||`.
    pub fn residual(&self, z: C64) -> Result<f64> {
        let p = self.point(z)?;
        let phi = p.phi();
        let lhs = self.walk.step(&phi)?;
        Ok((&lhs - &phi.scaled(C64::from_polar(1.0, p.lambda))).norm())
    }

    pub fn grid(&self) -> LatticeGrid {
        self.seed.grid()
    }

    pub fn walk(&self) -> &Walk {
        &self.walk
    }

    pub fn spectral(&self) -> &SpectralData {
        &self.spectral
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda
    }

    /// l2-normalized linear eigenfunction.
    pub fn phi_hat(&self) -> &SpinorField {
        &self.phi
    }

    /// `phi_b = phi / ||P_+ phi||`, the `z`-coefficient of `Phi`.
    pub fn phi_seed(&self) -> &SpinorField {
        &self.seed
    }

    pub fn phi_plus0(&self) -> &SpinorField {
        &self.phi_plus
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn z_max(&self) -> f64 {
        self.r_max.sqrt()
    }

    pub fn node_r(&self) -> &[f64] {
        &self.node_r
    }

    pub fn node_ratios(&self) -> &[f64] {
        &self.node_ratio
    }

    pub fn interpolation_error(&self) -> f64 {
        self.interpolation_error
    }

    pub fn config(&self) -> &FamilyConfig {
        &self.config
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::{Monomial, Preset};

    fn family(p: u32) -> BoundStateFamily {
        let g = LatticeGrid::new(40).unwrap();
        let coin = Preset::KlsOrigin.coin(g).unwrap();
        BoundStateFamily::new(&coin, Nonlinearity::sigma3(Monomial { c: 1.0, p }), FamilyConfig::default()).unwrap()
    }

    #[test]
    fn log1p_matches_naive_for_moderate_arguments() {
        let x = C64::new(0.3, -0.2);
        assert!((log1p_c(x) - (C64::new(1.0, 0.0) + x).ln()).norm() < 1e-15);
        let tiny = C64::new(1e-18, 2e-18);
        assert!((log1p_c(tiny) - tiny).norm() < 1e-30);
    }

    #[test]
    fn linear_limit_is_the_eigenfunction() {
        let fam = family(3);
        let z = C64::new(0.01, 0.0);
        let phi = fam.eval_phi(z).unwrap();
        let lin = fam.phi_seed().scaled(z);
        assert!((&phi - &lin).norm() < 1e-12);
        assert!((fam.phi_seed().p_plus().norm() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn bound_state_equation_holds() {
        for p in [1, 3] {
            let fam = family(p);
            for z in [C64::new(0.05, 0.0), C64::new(0.1, -0.2)] {
                let res = fam.residual(z).unwrap();
                assert!(res < 1e-12, "p = {p}, z = {z}: residual {res}");
            }
        }
    }

    #[test]
    fn gauge_covariance() {
        let fam = family(1);
        let z = C64::new(0.12, 0.05);
        let rot = C64::from_polar(1.0, 0.7);
        let a = fam.eval_phi(z * rot).unwrap();
        let b = fam.eval_phi(z).unwrap().scaled(rot);
        assert!((&a - &b).norm() < 1e-15);
        assert!((fam.eval_lambda(z * rot).unwrap() - fam.eval_lambda(z).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let fam = family(1);
        let z = C64::new(0.2, 0.1);
        let h = 1e-6;
        for a in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)] {
            let fd = (0.5 / h) * &(&fam.eval_phi(z + a * h).unwrap() - &fam.eval_phi(z - a * h).unwrap());
            let exact = fam.eval_dphi(z, a).unwrap();
            assert!((&fd - &exact).norm() < 1e-8, "{}", (&fd - &exact).norm());
        }
    }

    #[test]
    fn interpolant_matches_direct_solves() {
        let fam = family(3);
        assert!(fam.interpolation_error() < 1e-9);
        let r = 0.37 * fam.r_max();
        let direct = fam.solve_correction(r).unwrap();
        let (psi, mu) = fam.interpolate(r).unwrap();
        assert!((&psi - &direct.psi).norm() < 1e-10);
        assert!((mu - direct.mu).norm() < 1e-10);
    }

    #[test]
    fn out_of_range_is_rejected() {
        let fam = family(3);
        let z = C64::new(fam.z_max() * 1.01, 0.0);
        assert!(matches!(fam.eval_phi(z), Err(Error::OutOfRange { .. })));
    }
}
