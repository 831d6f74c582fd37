//! Modulation coordinates `u = Phi_+[z] + xi`, `xi` in `H_c[z]`, and the time
//! series of `z(t)`, `eta(t)` and `Z(t)` along a nonlinear evolution.

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::Serialize;

use crate::bound_state::{BoundStateFamily, FamilyPoint};
use crate::error::{Error, Result};
use crate::lattice::{Embedding, SpinorField, I, ONE};
use crate::walk::{CoinField, Walk};

pub const NEWTON_TOL: f64 = 1e-11;
pub const NEWTON_MAX_ITER: usize = 25;
pub const FD_STEP: f64 = 1e-6;

/// `u = Phi_+[z] + xi` with `eta = P_c xi`.
#[derive(Debug, Clone)]
pub struct ModulationState {
    pub z: C64,
    pub xi: SpinorField,
    pub eta: SpinorField,
    pub newton_iterations: usize,
    /// `|F(z, u)|` at the returned `z`.
    pub residual: f64,
}

/// Decomposition machinery for fields on a lattice that contains the family's window.
#[derive(Debug, Clone)]
pub struct Modulation {
    family: BoundStateFamily,
    walk: Walk,
    embed: Embedding,
    tol: f64,
}

impl Modulation {
    /// `coin` is the full-lattice coin; it must agree with the family's coin on the window.
    pub fn new(family: BoundStateFamily, coin: &CoinField) -> Result<Self> {
        let embed = Embedding::new(family.grid(), coin.grid())?;
        for x in family.grid().sites() {
            if coin.site(x) != family.walk().coin.site(x) {
                return Err(Error::InvalidArgument(format!("coin differs from the family coin at site {x}")));
            }
        }
        let walk = Walk::new(coin.clone(), family.walk().nonlinearity.clone());
        Ok(Self { family, walk, embed, tol: NEWTON_TOL })
    }

    /// Uses the family's own window as the lattice.
    pub fn on_window(family: BoundStateFamily) -> Result<Self> {
        let coin = family.walk().coin.clone();
        Self::new(family, &coin)
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn family(&self) -> &BoundStateFamily {
        &self.family
    }

    pub fn walk(&self) -> &Walk {
        &self.walk
    }

    pub fn embedding(&self) -> &Embedding {
        &self.embed
    }

    /// `phi_+` on the window.
    pub fn phi_plus(&self) -> &SpinorField {
        self.family.phi_plus0()
    }

    fn f_value(&self, p: &FamilyPoint, u_w: &SpinorField) -> Result<[f64; 2]> {
        let d = u_w - &p.phi_plus();
        let b1 = p.dphi_plus(ONE).scaled(I);
        let b2 = p.dphi_plus(I).scaled(I);
        Ok([d.pairing(&b1)?, d.pairing(&b2)?])
    }

    /// `F(z, u) = (<u - Phi_+[z], i DPhi_+[z] 1>, <u - Phi_+[z], i DPhi_+[z] i>)`.
    pub fn f(&self, z: C64, u: &SpinorField) -> Result<[f64; 2]> {
        let u_w = self.embed.restrict(u)?;
        self.f_value(&self.family.point(z)?, &u_w)
    }

    /// Finite-difference Jacobian of `F` in `(z_R, z_I)`, central differences.
    pub fn jacobian(&self, z: C64, u: &SpinorField) -> Result<[[f64; 2]; 2]> {
        let u_w = self.embed.restrict(u)?;
        self.jacobian_w(z, &u_w)
    }

    fn jacobian_w(&self, z: C64, u_w: &SpinorField) -> Result<[[f64; 2]; 2]> {
        let mut j = [[0.0; 2]; 2];
        for (col, dir) in [ONE, I].into_iter().enumerate() {
            let fp = self.f_value(&self.family.point(z + dir * FD_STEP)?, u_w)?;
            let fm = self.f_value(&self.family.point(z - dir * FD_STEP)?, u_w)?;
            for row in 0..2 {
                j[row][col] = (fp[row] - fm[row]) / (2.0 * FD_STEP);
            }
        }
        Ok(j)
    }

    pub fn decompose(&self, u: &SpinorField, z_guess: C64) -> Result<ModulationState> {
        let u_w = self.embed.restrict(u)?;
        let mut z = z_guess;
        let mut f = self.f_value(&self.family.point(z)?, &u_w)?;
        let mut fnorm = f[0].hypot(f[1]);
        let mut iterations = 0;
        let mut polish = 0;
        loop {
            if fnorm < self.tol {
                if polish >= 3 || fnorm == 0.0 {
                    break;
                }
                polish += 1;
            } else if iterations >= NEWTON_MAX_ITER {
                return Err(Error::NoConvergence { what: "modulation Newton", iterations, residual: fnorm });
            }
            let j = self.jacobian_w(z, &u_w)?;
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det.abs() < 1e-14 {
                return Err(Error::LinearAlgebra(format!("singular modulation Jacobian at z = {z}")));
            }
            let dr = (j[1][1] * f[0] - j[0][1] * f[1]) / det;
            let di = (-j[1][0] * f[0] + j[0][0] * f[1]) / det;
            let zn = z - C64::new(dr, di);
            let fn_ = self.f_value(&self.family.point(zn)?, &u_w)?;
            let nn = fn_[0].hypot(fn_[1]);
            iterations += 1;
            if fnorm < self.tol && nn >= 0.5 * fnorm {
                break;
            }
            z = zn;
            f = fn_;
            fnorm = nn;
        }
        let point = self.family.point(z)?;
        let mut xi = u.clone();
        self.embed.axpy_into_large(&mut xi, -ONE, &point.phi_plus())?;
        let eta = self.project_c(&xi)?;
        Ok(ModulationState { z, xi, eta, newton_iterations: iterations, residual: fnorm })
    }

    /// `P_c u = u - (u, phi_+) phi_+` on the full lattice.
    pub fn project_c(&self, u: &SpinorField) -> Result<SpinorField> {
        let phi = self.phi_plus();
        let c = self.embed.inner_large_small(u, phi)?;
        let mut out = u.clone();
        self.embed.axpy_into_large(&mut out, -c, phi)?;
        Ok(out)
    }

    /// `2 x 2` real matrix `M_{kj} = <e_j phi_+, i DPhi_+[z] e_k>` with `e = (1, i)`.
    pub fn pairing_matrix(&self, z: C64) -> Result<[[f64; 2]; 2]> {
        let p = self.family.point(z)?;
        let phi = self.phi_plus();
        let b = [p.dphi_plus(ONE).scaled(I), p.dphi_plus(I).scaled(I)];
        let e = [phi.clone(), phi.scaled(I)];
        let mut m = [[0.0; 2]; 2];
        for k in 0..2 {
            for j in 0..2 {
                m[k][j] = e[j].pairing(&b[k])?;
            }
        }
        Ok(m)
    }

    /// `(a_R; a_I) = -M^{-1} (i DPhi_+ 1; i DPhi_+ i)`, projected by `P_c`. Window fields.
    pub fn coeffs_ar_ai(&self, z: C64) -> Result<(SpinorField, SpinorField)> {
        let (ar, ai) = self.coeffs_unprojected(z)?;
        let phi = self.phi_plus();
        let proj = |u: SpinorField| -> Result<SpinorField> {
            let mut out = u.clone();
            out.axpy(-u.inner(phi)?, phi)?;
            Ok(out)
        };
        Ok((proj(ar)?, proj(ai)?))
    }

    pub fn coeffs_unprojected(&self, z: C64) -> Result<(SpinorField, SpinorField)> {
        let p = self.family.point(z)?;
        let m = self.pairing_matrix(z)?;
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det.abs() < 1e-12 {
            return Err(Error::LinearAlgebra(format!("singular pairing matrix at z = {z}")));
        }
        let inv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
        let b1 = p.dphi_plus(ONE).scaled(I);
        let b2 = p.dphi_plus(I).scaled(I);
        let mut ar = b1.scaled(C64::new(-inv[0][0], 0.0));
        ar.axpy(C64::new(-inv[0][1], 0.0), &b2)?;
        let mut ai = b1.scaled(C64::new(-inv[1][0], 0.0));
        ai.axpy(C64::new(-inv[1][1], 0.0), &b2)?;
        Ok((ar, ai))
    }

    /// `R[z] eta = eta + <eta, a_R> phi_+ + <eta, a_I> i phi_+`.
    pub fn apply_r(&self, z: C64, eta: &SpinorField) -> Result<SpinorField> {
        let scale = eta.norm().max(f64::MIN_POSITIVE);
        let phi = self.phi_plus();
        let along = self.embed.inner_large_small(eta, phi)?.norm();
        let odd = eta.p_minus().norm();
        if along > 1e-10 * scale || odd > 1e-10 * scale {
            return Err(Error::Precondition(format!(
                "eta is not in P_c l2_+ (phi_+ component {along:.3e}, odd part {odd:.3e})"
            )));
        }
        let (ar, ai) = self.coeffs_ar_ai(z)?;
        let cr = self.embed.inner_large_small(eta, &ar)?.re;
        let ci = self.embed.inner_large_small(eta, &ai)?.re;
        let mut out = eta.clone();
        self.embed.axpy_into_large(&mut out, C64::new(cr, ci), phi)?;
        Ok(out)
    }

    /// `max_k |<xi, i DPhi_+[z] e_k>|`, unnormalized.
    pub fn hc_residual(&self, z: C64, xi: &SpinorField) -> Result<f64> {
        let p = self.family.point(z)?;
        self.hc_residual_at(&p, xi)
    }

    fn hc_residual_at(&self, p: &FamilyPoint, xi: &SpinorField) -> Result<f64> {
        let b1 = p.dphi_plus(ONE).scaled(I);
        let b2 = p.dphi_plus(I).scaled(I);
        let r1 = self.embed.inner_large_small(xi, &b1)?.re;
        let r2 = self.embed.inner_large_small(xi, &b2)?.re;
        Ok(r1.abs().max(r2.abs()))
    }

    /// `L[z] xi = U DN(U N Phi_+) U DN(Phi_+) xi` on the full lattice. The
    /// derivative factors differ from the identity only on the window.
    pub fn linearization(&self, point: &FamilyPoint, xi: &SpinorField) -> Result<SpinorField> {
        let fam_walk = self.family.walk();
        let nl = &fam_walk.nonlinearity;
        let phi = point.phi_plus();
        let mid = fam_walk.step(&phi)?;
        let mut a = xi.clone();
        let part = nl.apply_derivative(&phi, &self.embed.restrict(&a)?)?;
        self.overwrite(&mut a, &part)?;
        let mut b = self.walk.u(&a)?;
        let part = nl.apply_derivative(&mid, &self.embed.restrict(&b)?)?;
        self.overwrite(&mut b, &part)?;
        self.walk.u(&b)
    }

    fn overwrite(&self, big: &mut SpinorField, small: &SpinorField) -> Result<()> {
        let old = self.embed.restrict(big)?;
        self.embed.axpy_into_large(big, ONE, &(small - &old))
    }

    /// Largest `|<L u, i v> - <u, i L^{-1} v>| / (||u|| ||v||)` over random pairs on the window.
    pub fn check_symplectic<R: Rng>(&self, z: C64, pairs: usize, rng: &mut R) -> Result<f64> {
        let p = self.family.point(z)?;
        let phi = p.phi_plus();
        let walk = self.family.walk();
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let u = random_field(self.family.grid(), rng);
            let v = random_field(self.family.grid(), rng);
            let lu = walk.linearization(&phi, &u)?;
            let linv = walk.linearization_inv(&phi, &v)?;
            let lhs = lu.pairing(&v.scaled(I))?;
            let rhs = u.pairing(&linv.scaled(I))?;
            worst = worst.max((lhs - rhs).abs() / (u.norm() * v.norm()));
        }
        Ok(worst)
    }

    /// Same check with `DN^{-1}` replaced by the adjoint of `DN`. Not an identity.
    pub fn check_symplectic_naive<R: Rng>(&self, z: C64, pairs: usize, rng: &mut R) -> Result<f64> {
        let p = self.family.point(z)?;
        let phi = p.phi_plus();
        let walk = self.family.walk();
        let nl = &walk.nonlinearity;
        let mid = walk.step(&phi)?;
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let u = random_field(self.family.grid(), rng);
            let v = random_field(self.family.grid(), rng);
            let lu = walk.linearization(&phi, &u)?;
            // adjoint of DN(w) for the complex inner product: (1 + A)^* e^{-i g gamma}
            let adj = |w: &SpinorField, x: &SpinorField| -> Result<SpinorField> {
                let y = nl.apply_derivative_inv(w, x)?;
                let ay = nl.apply_a(w, &y)?;
                Ok(&(&y + &ay) + &ay)
            };
            let a = adj(&mid, &walk.u_inv(&v)?)?;
            let linv = adj(&phi, &walk.u_inv(&a)?)?;
            let lhs = lu.pairing(&v.scaled(I))?;
            let rhs = u.pairing(&linv.scaled(I))?;
            worst = worst.max((lhs - rhs).abs() / (u.norm() * v.norm()));
        }
        Ok(worst)
    }

    /// `H_c[z]`-membership residual of `e^{-i Lambda_+[z]} L[z] xi`, relative to `||xi||`.
    pub fn check_hc_invariance(&self, z: C64, xi: &SpinorField) -> Result<f64> {
        let p = self.family.point(z)?;
        self.hc_invariance_with_phase(&p, xi, p.lambda_plus())
    }

    /// Control variant using an arbitrary rotation phase.
    pub fn hc_invariance_with_phase(&self, p: &FamilyPoint, xi: &SpinorField, phase: f64) -> Result<f64> {
        let scale = xi.norm();
        if self.hc_residual_at(p, xi)? > 1e-9 * scale.max(1e-300) {
            return Err(Error::Precondition("xi is not in H_c[z]".into()));
        }
        let lxi = self.linearization(p, xi)?.scaled(C64::from_polar(1.0, -phase));
        Ok(self.hc_residual_at(p, &lxi)? / scale)
    }

    /// Evolves `u0` by the double step for `steps` steps, decomposing at every step.
    pub fn track(&self, u0: &SpinorField, steps: usize, diagnostics: bool) -> Result<ModulationTrace> {
        self.track_with(u0, steps, diagnostics, |_, _, _| Ok(()))
    }

    /// As [`Modulation::track`], calling `observe(t, u(t), state(t))` for `t = 0..=steps`.
    pub fn track_with<F>(
        &self,
        u0: &SpinorField,
        steps: usize,
        diagnostics: bool,
        mut observe: F,
    ) -> Result<ModulationTrace>
    where
        F: FnMut(usize, &SpinorField, &ModulationState) -> Result<()>,
    {
        let z0 = self.embed.inner_large_small(u0, self.phi_plus())?;
        let mut state = self.decompose(u0, z0)?;
        let mut u = u0.clone();
        observe(0, &u, &state)?;
        let mut rows = Vec::with_capacity(steps);
        let mut failure = None;
        for t in 0..steps {
            let p1 = self.family.point(state.z)?;
            let next_u = self.walk.double_step(&u)?;
            let guess = state.z * C64::from_polar(1.0, p1.lambda_plus());
            let next = match self.decompose(&next_u, guess) {
                Ok(s) => s,
                Err(e) => {
                    failure = Some(format!("t = {}: {e}", t + 1));
                    break;
                }
            };
            let zz = guess - next.z;
            let mut row = TraceRow {
                t,
                z_re: state.z.re,
                z_im: state.z.im,
                z_abs: state.z.norm(),
                lambda_plus: p1.lambda_plus(),
                big_z_re: zz.re,
                big_z_im: zz.im,
                eta_l2: state.eta.norm(),
                eta_l2w: state.eta.weighted_norm(2.0, -2.0)?,
                eta_linf: state.eta.sup_norm(),
                f1: f64::NAN,
                f2: f64::NAN,
                f3: f64::NAN,
                z2_residual: f64::NAN,
                newton_iters: state.newton_iterations,
                reconstruction: f64::NAN,
                boundary_mass: u.boundary_mass(10),
            };
            if diagnostics {
                self.diagnostics(&mut row, &p1, &state, &next, &next_u, zz)?;
            }
            rows.push(row);
            u = next_u;
            state = next;
            observe(t + 1, &u, &state)?;
        }
        Ok(ModulationTrace { rows, final_state: state, failure })
    }

    fn diagnostics(
        &self,
        row: &mut TraceRow,
        p1: &FamilyPoint,
        s1: &ModulationState,
        s2: &ModulationState,
        u2: &SpinorField,
        zz: C64,
    ) -> Result<()> {
        let fam_walk = self.family.walk();
        let rot = C64::from_polar(1.0, p1.lambda_plus());
        let p2 = self.family.point(s2.z)?;
        let phi1 = p1.phi_plus();
        // F1 = e^{i Lambda_+} Phi_+[z1] - Phi_+[z2]
        let f1 = &phi1.scaled(rot) - &p2.phi_plus();
        let lxi = self.linearization(p1, &s1.xi)?;
        let u2xi = self.walk.u(&self.walk.u(&s1.xi)?)?;
        // G = U(Phi_+ + xi) - U(Phi_+) - L xi
        let mut g = u2.clone();
        self.embed.axpy_into_large(&mut g, -ONE, &fam_walk.double_step(&phi1)?)?;
        g -= &lxi;
        let rxi = self.apply_r(s1.z, &s1.eta)?;
        row.reconstruction = (&rxi - &s1.xi).norm();
        row.f1 = f1.norm();
        row.f2 = (&lxi - &u2xi).norm();
        row.f3 = g.norm();
        // 0 = <G + F1, b> + <L xi, c> with b = i DPhi_+[z2](iZ), c = i (DPhi_+[z2] - DPhi_+[e^{i Lambda_+} z1])(iZ).
        let iz = I * zz;
        let b = p2.dphi_plus(iz).scaled(I);
        let prot = self.family.point(s1.z * rot)?;
        let c = (&p2.dphi_plus(iz) - &prot.dphi_plus(iz)).scaled(I);
        let gb = self.embed.inner_large_small(&g, &b)?.re;
        let f1b = f1.pairing(&b)?;
        let lc = self.embed.inner_large_small(&lxi, &c)?.re;
        let z2 = zz.norm_sqr();
        let rhs = gb + (f1b + z2) + lc;
        row.z2_residual = (z2 - rhs).abs();
        Ok(())
    }
}

/// Uniform random complex spinors in the unit square, unnormalized.
pub fn random_field<R: Rng>(grid: crate::lattice::LatticeGrid, rng: &mut R) -> SpinorField {
    SpinorField::from_fn(grid, |_| {
        [
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        ]
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub t: usize,
    #[serde(rename = "Re z")]
    pub z_re: f64,
    #[serde(rename = "Im z")]
    pub z_im: f64,
    #[serde(rename = "|z|")]
    pub z_abs: f64,
    #[serde(rename = "Lambda_plus")]
    pub lambda_plus: f64,
    #[serde(rename = "Re Z")]
    pub big_z_re: f64,
    #[serde(rename = "Im Z")]
    pub big_z_im: f64,
    pub eta_l2: f64,
    pub eta_l2w: f64,
    pub eta_linf: f64,
    #[serde(rename = "F1")]
    pub f1: f64,
    #[serde(rename = "F2")]
    pub f2: f64,
    #[serde(rename = "F3")]
    pub f3: f64,
    pub z2_residual: f64,
    pub newton_iters: usize,
    pub reconstruction: f64,
    pub boundary_mass: f64,
}

impl TraceRow {
    pub fn big_z(&self) -> C64 {
        C64::new(self.big_z_re, self.big_z_im)
    }
}

#[derive(Debug, Clone)]
pub struct ModulationTrace {
    pub rows: Vec<TraceRow>,
    pub final_state: ModulationState,
    /// Set when a decomposition failed; the trace is truncated there.
    pub failure: Option<String>,
}

impl ModulationTrace {
    /// `sum_t |Z(t)|`.
    pub fn z_l1(&self) -> f64 {
        self.rows.iter().map(|r| r.big_z().norm()).sum()
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bound_state::FamilyConfig;
    use crate::lattice::LatticeGrid;
    use crate::walk::{Monomial, Nonlinearity, Preset};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn modulation(p: u32) -> Modulation {
        let g = LatticeGrid::new(40).unwrap();
        let coin = Preset::KlsOrigin.coin(g).unwrap();
        let fam = BoundStateFamily::new(&coin, Nonlinearity::sigma3(Monomial { c: 1.0, p }), FamilyConfig::default())
            .unwrap();
        Modulation::on_window(fam).unwrap()
    }

    #[test]
    fn decomposing_a_bound_state_returns_its_parameter() {
        let m = modulation(3);
        let z0 = C64::new(0.05, 0.02);
        let u = m.family().eval_phi_plus(z0).unwrap();
        let s = m.decompose(&u, C64::new(0.04, 0.0)).unwrap();
        assert!((s.z - z0).norm() < 1e-12);
        assert!(s.xi.norm() < 1e-12);
    }

    #[test]
    fn jacobian_and_pairing_at_origin() {
        let m = modulation(3);
        let zero = SpinorField::zeros(m.family().grid());
        let j = m.jacobian(C64::new(0.0, 0.0), &zero).unwrap();
        let want = [[0.0, -1.0], [1.0, 0.0]];
        let p = m.pairing_matrix(C64::new(0.0, 0.0)).unwrap();
        let want_p = [[0.0, 1.0], [-1.0, 0.0]];
        for i in 0..2 {
            for k in 0..2 {
                assert!((j[i][k] - want[i][k]).abs() < 1e-6);
                assert!((p[i][k] - want_p[i][k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn coefficients_vanish_at_origin() {
        let m = modulation(1);
        let (ar, ai) = m.coeffs_ar_ai(C64::new(0.0, 0.0)).unwrap();
        assert!(ar.norm() < 1e-14 && ai.norm() < 1e-14);
        let (ur, ui) = m.coeffs_unprojected(C64::new(0.0, 0.0)).unwrap();
        assert!((&ur + m.phi_plus()).norm() < 1e-14);
        assert!((&ui + &m.phi_plus().scaled(I)).norm() < 1e-14);
    }

    #[test]
    fn r_maps_into_hc_and_inverts_pc() {
        let m = modulation(1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = C64::new(0.05, 0.0);
        let eta = m.project_c(&random_field(m.family().grid(), &mut rng).p_plus()).unwrap();
        let xi = m.apply_r(z, &eta).unwrap();
        assert!(m.hc_residual(z, &xi).unwrap() < 1e-9 * xi.norm());
        assert!((&m.project_c(&xi).unwrap() - &eta).norm() < 1e-11 * eta.norm());
        assert!(m.apply_r(z, &random_field(m.family().grid(), &mut rng)).is_err());
    }

    #[test]
    fn symplectic_identity_and_its_negative_control() {
        let m = modulation(3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let z = C64::new(0.3, 0.1);
        assert!(m.check_symplectic(z, 5, &mut rng).unwrap() < 1e-12);
        assert!(m.check_symplectic_naive(z, 5, &mut rng).unwrap() > 1e-6);
    }

    #[test]
    fn exact_orbit_has_no_modulation_defect() {
        let m = modulation(3);
        let z0 = C64::new(0.1, 0.0);
        let u0 = m.family().eval_phi_plus(z0).unwrap();
        let trace = m.track(&u0, 20, true).unwrap();
        for r in &trace.rows {
            assert!(r.big_z().norm() < 1e-9);
            assert!((r.z_abs - 0.1).abs() < 1e-9);
            assert!(r.eta_l2 < 1e-9);
        }
    }
}
