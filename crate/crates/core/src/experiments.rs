//! Experiment drivers: dispersive decay fit, soliton resolution, Z scaling and
//! orbital stability.

use faer::Mat;
use log::{info, warn};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bound_state::{BoundStateFamily, FamilyConfig};
use crate::config::{ExperimentConfig, Recipe, Tolerances, WrapMode};
use crate::error::{Error, Result};
use crate::io::load_snapshot;
use crate::lattice::{LatticeGrid, SpinorField};
use crate::modulation::{Modulation, ModulationState, ModulationTrace};
use crate::smoothness::{
    eigenprojection, lambda_grid_with_edges, max_abs_diff, qty_sup_resolvent, random_unitary, random_vector,
    resolvent_identity_residual, stone_projection, walk_kato_sweep, IntervalGrid, KatoRow, SmoothnessReport,
    WalkWeight, Weight,
};
use crate::spectral::SpectralData;
use crate::walk::{apply_u, apply_u_inv, CoinField, Nonlinearity, Walk};

/// Width of the boundary strip watched by the wrap guard.
pub const WRAP_STRIP: usize = 10;
/// Cauchy detection: successive differences must shrink by this factor.
pub const CAUCHY_SHRINK: f64 = 1.5;
/// Differences below this, relative to the sequence scale, sit at the
/// decomposition noise floor and count as shrinking.
pub const CAUCHY_FLOOR: f64 = 1e-9;

/// Seeded generator for run `stream` of a sweep.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Boundary-mass check applied at every checkpoint of a dynamic run.
#[derive(Debug, Clone, Copy)]
pub struct WrapGuard {
    pub tol: f64,
    pub mode: WrapMode,
}

impl WrapGuard {
    pub fn from_tolerances(t: &Tolerances) -> Self {
        Self { tol: t.wrap, mode: t.wrap_mode }
    }

    /// `Ok(None)` when clean, `Ok(Some(mass))` on a warning, `Err` on abort.
    pub fn check(&self, t: usize, u: &SpinorField) -> Result<Option<f64>> {
        let mass = u.boundary_mass(WRAP_STRIP);
        if mass < self.tol {
            return Ok(None);
        }
        match self.mode {
            WrapMode::Abort => Err(Error::WrapContamination { t, mass }),
            WrapMode::Warn => {
                warn!("boundary mass {mass:.3e} at t = {t}");
                Ok(Some(mass))
            }
        }
    }
}

/// `1, 2, 4, ...` up to `t_max`, with `t_max` itself appended.
pub fn dyadic_checkpoints(t_max: usize) -> Vec<usize> {
    let mut v = Vec::new();
    let mut t = 1;
    while t < t_max {
        v.push(t);
        t *= 2;
    }
    if t_max > 0 {
        v.push(t_max);
    }
    v
}

/// Outcome of the dyadic Cauchy test on `d_k = ||v_{k+1} - v_k||`.
#[derive(Debug, Clone, Serialize)]
pub struct CauchyTest {
    pub differences: Vec<f64>,
    pub converged: bool,
}

/// Converged when the last three differences each shrink by at least
/// [`CAUCHY_SHRINK`] and the last one is below `threshold`.
pub fn cauchy_test(differences: &[f64], threshold: f64, scale: f64) -> CauchyTest {
    let floor = CAUCHY_FLOOR * scale.max(f64::MIN_POSITIVE);
    let n = differences.len();
    let converged = n >= 3
        && differences[n - 1] <= threshold
        && (n - 3..n - 1).all(|k| {
            let (a, b) = (differences[k], differences[k + 1]);
            b <= floor || b * CAUCHY_SHRINK <= a
        });
    CauchyTest { differences: differences.to_vec(), converged }
}

/// Least-squares line `y = slope x + intercept`, with the rms residual.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::InvalidArgument("need at least two points".into()));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum::<f64>() / n as f64).sqrt();
    Ok((slope, intercept, rms))
}

/// Everything an experiment needs: the big-lattice coin, the bound-state
/// family on a window, and the modulation machinery.
#[derive(Debug, Clone)]
pub struct Lab {
    coin: CoinField,
    modulation: Modulation,
}

impl Lab {
    pub fn new(coin: CoinField, window: usize, nl: Nonlinearity) -> Result<Self> {
        Self::with_family_config(coin, window, nl, FamilyConfig::default())
    }

    pub fn with_family_config(coin: CoinField, window: usize, nl: Nonlinearity, fc: FamilyConfig) -> Result<Self> {
        let wgrid = LatticeGrid::new(window)?;
        let family = BoundStateFamily::new(&coin.resized(wgrid), nl, fc)?;
        let modulation = Modulation::new(family, &coin)?;
        Ok(Self { coin, modulation })
    }

    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let coin = cfg.coin_on(cfg.grid()?)?;
        let lab = Self::new(coin, cfg.model.window, cfg.nonlinearity.build()?)?;
        Ok(Self { modulation: lab.modulation.with_tolerance(cfg.tolerances.newton), ..lab })
    }

    pub fn coin(&self) -> &CoinField {
        &self.coin
    }

    pub fn grid(&self) -> LatticeGrid {
        self.coin.grid()
    }

    pub fn modulation(&self) -> &Modulation {
        &self.modulation
    }

    pub fn family(&self) -> &BoundStateFamily {
        self.modulation.family()
    }

    pub fn walk(&self) -> &Walk {
        self.modulation.walk()
    }

    /// `Phi_+[z]` on the big lattice.
    pub fn bound_state(&self, z: C64) -> Result<SpinorField> {
        self.modulation.embedding().extend(&self.family().eval_phi_plus(z)?)
    }

    /// Gaussian envelope of width `width` times a random spinor per site,
    /// cut at `6 width`, projected by `P_+` and `P_c` and renormalized to `eps`.
    pub fn continuous_profile<R: Rng>(&self, eps: f64, width: f64, rng: &mut R) -> Result<SpinorField> {
        let cut = (6.0 * width).ceil() as i64;
        let raw = SpinorField::from_fn(self.grid(), |x| {
            let env = if x.abs() <= cut { (-(x * x) as f64 / (2.0 * width * width)).exp() } else { 0.0 };
            let mut s = [C64::new(0.0, 0.0); 2];
            if env > 0.0 {
                for c in &mut s {
                    *c = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * env;
                }
            }
            s
        });
        let mut v = self.modulation.project_c(&raw.p_plus())?;
        let n = v.norm();
        if n == 0.0 {
            return Err(Error::InvalidArgument("continuous profile vanished after projection".into()));
        }
        v.scale(C64::new(eps / n, 0.0));
        Ok(v)
    }

    pub fn initial_data<R: Rng>(&self, recipe: &Recipe, rng: &mut R) -> Result<SpinorField> {
        match recipe {
            Recipe::BoundState { z } => self.bound_state(C64::new(z[0], z[1])),
            Recipe::ContinuousOnly { eps, width } => self.continuous_profile(*eps, *width, rng),
            Recipe::Mixed { z, eps, width } => {
                let mut u = self.bound_state(C64::new(z[0], z[1]))?;
                u += &self.continuous_profile(*eps, *width, rng)?;
                Ok(u)
            }
            Recipe::Snapshot { path } => {
                let u = load_snapshot(path)?;
                self.grid().check_same(&u.grid())?;
                Ok(u)
            }
        }
    }
}

/// Which initial datum the decay fit evolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayInitial {
    /// `P_c(U)` applied to a spinor at the origin.
    Continuous,
    /// The plus-branch eigenfunction, no projection: a negative control.
    Eigenvector,
}

#[derive(Debug, Clone)]
pub struct DecayFitOptions {
    pub t_min: usize,
    pub t_max: usize,
    /// Count physical steps instead of double steps.
    pub single_step: bool,
    pub initial: DecayInitial,
    pub window: usize,
    pub wrap_tol: f64,
}

impl Default for DecayFitOptions {
    fn default() -> Self {
        Self {
            t_min: 20,
            t_max: 400,
            single_step: false,
            initial: DecayInitial::Continuous,
            window: 96,
            wrap_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecaySample {
    pub t: usize,
    pub sup: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub rms_residual: f64,
    pub samples: Vec<DecaySample>,
}

/// Least-squares slope of `log ||U^t u0||_inf` against `log t` on the linear walk.
pub fn run_decay_fit(coin: &CoinField, opts: &DecayFitOptions) -> Result<DecayFit> {
    if opts.t_min == 0 || opts.t_min >= opts.t_max {
        return Err(Error::InvalidArgument("need 0 < t_min < t_max".into()));
    }
    let grid = coin.grid();
    let per_tick = if opts.single_step { 1 } else { 2 };
    let reach = (per_tick * opts.t_max) as f64 * coin.beta_inf().norm();
    if reach >= grid.half_width() as f64 / 2.0 {
        return Err(Error::Precondition(format!(
            "t_max = {} reaches {reach:.0} sites, beyond L/2 = {}",
            opts.t_max,
            grid.half_width() / 2
        )));
    }
    let window = LatticeGrid::new(opts.window.min(grid.half_width()))?;
    let sd = SpectralData::new(&coin.resized(window))?;
    let modes: Vec<SpinorField> = sd.discrete_modes_on(coin, 4)?.into_iter().map(|p| p.phi).collect();
    let mut u = match opts.initial {
        DecayInitial::Continuous => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let mut u = SpinorField::point(grid, 0, [C64::new(s, 0.0), C64::new(0.0, s)])?;
            let orig = u.clone();
            for m in &modes {
                u.axpy(-orig.inner(m)?, m)?;
            }
            u
        }
        DecayInitial::Eigenvector => sd.refine_on(coin, 4)?.phi,
    };
    let guard = WrapGuard { tol: opts.wrap_tol, mode: WrapMode::Abort };
    let mut samples = Vec::new();
    for t in 1..=opts.t_max {
        for _ in 0..per_tick {
            u = apply_u(coin, &u)?;
        }
        if t >= opts.t_min {
            guard.check(t, &u)?;
            samples.push(DecaySample { t, sup: u.sup_norm() });
        }
    }
    let x: Vec<f64> = samples.iter().map(|s| (s.t as f64).ln()).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.sup.ln()).collect();
    let (slope, intercept, rms_residual) = linear_fit(&x, &y)?;
    Ok(DecayFit { slope, intercept, rms_residual, samples })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Pass,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Checkpoint {
    pub t: usize,
    pub abs_z: f64,
    pub eta_l2: f64,
    /// `||U^{-2t} eta(t) - U^{-2t'} eta(t')|| ` against the previous checkpoint.
    pub eta1_difference: f64,
    pub resolution_residual: f64,
    pub boundary_mass: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub status: Status,
    pub reasons: Vec<String>,
    pub steps: usize,
    /// Tail mean of `|z(t)|` over the last quarter.
    pub rho: f64,
    /// `(max - min) / mean` of `|z(t)|` over the last quarter.
    pub rho_tail_variation: f64,
    pub z_l1: f64,
    /// Increment of the `||Z||_l1` partial sums over the last quarter, relative to the total.
    pub z_last_quarter_increment: f64,
    pub eta1: CauchyTest,
    pub eta_plus: CauchyTest,
    pub eta_plus_norm: f64,
    pub pc_u0_norm: f64,
    pub final_residual: f64,
    /// Resolution residual nonincreasing over checkpoints in `[T/10, T]`.
    pub residual_monotone_final_decade: bool,
    /// Log-log slope of the resolution residual over checkpoints in `[T/10, T]`.
    pub residual_decay_exponent: f64,
    pub checkpoints: Vec<Checkpoint>,
    pub wave_operator_horizon: usize,
    pub max_boundary_mass: f64,
}

#[derive(Debug, Clone)]
pub struct StabilityOptions {
    pub steps: usize,
    pub tolerances: Tolerances,
    pub diagnostics: bool,
}

pub struct StabilityRun {
    pub report: StabilityReport,
    pub trace: ModulationTrace,
}

impl Lab {
    /// Evolves `u0`, tracks the modulation, and tests the resolution
    /// `u(t) - Phi_+[z(t)] - U_inf^{2t} eta_+ -> 0`.
    pub fn run_stability(&self, u0: &SpinorField, opts: &StabilityOptions) -> Result<StabilityRun> {
        let t_max = opts.steps;
        let guard = WrapGuard::from_tolerances(&opts.tolerances);
        let checkpoints = dyadic_checkpoints(t_max);
        let coin = &self.coin;
        let free = coin.asymptotic_field();
        let mut eta1_iterates: Vec<SpinorField> = Vec::new();
        let mut xis: Vec<SpinorField> = Vec::new();
        let mut cps: Vec<Checkpoint> = Vec::new();
        let mut max_mass: f64 = 0.0;
        let mut next_cp = 0;
        let mut eta0_norm = f64::NAN;
        let observe = |t: usize, u: &SpinorField, s: &ModulationState| -> Result<()> {
            let m = u.boundary_mass(WRAP_STRIP);
            max_mass = max_mass.max(m);
            guard.check(t, u)?;
            if t == 0 {
                eta0_norm = s.eta.norm();
            }
            if next_cp < checkpoints.len() && t == checkpoints[next_cp] {
                next_cp += 1;
                let mut v = s.eta.clone();
                for _ in 0..2 * t {
                    v = apply_u_inv(coin, &v)?;
                }
                let diff = eta1_iterates.last().map_or(f64::NAN, |p| (&v - p).norm());
                cps.push(Checkpoint {
                    t,
                    abs_z: s.z.norm(),
                    eta_l2: s.eta.norm(),
                    eta1_difference: diff,
                    resolution_residual: f64::NAN,
                    boundary_mass: m,
                });
                eta1_iterates.push(v);
                xis.push(s.xi.clone());
            }
            Ok(())
        };
        let trace = self.modulation.track_with(u0, t_max, opts.diagnostics, observe)?;
        if let Some(f) = &trace.failure {
            return Err(Error::Precondition(format!("modulation tracking failed at {f}")));
        }
        let mut reasons = Vec::new();
        if max_mass >= opts.tolerances.wrap {
            reasons
                .push(format!("boundary mass {max_mass:.3e} reached the wrap tolerance {:.1e}", opts.tolerances.wrap));
        }
        let scale = u0.norm();
        let thr = opts.tolerances.cauchy * scale;
        let d1: Vec<f64> = cps.iter().skip(1).map(|c| c.eta1_difference).collect();
        let eta1_test = cauchy_test(&d1, thr, scale);
        if !eta1_test.converged {
            reasons.push(format!("eta_1 not Cauchy: last differences {:?}", tail(&d1, 3)));
        }
        let eta1 = eta1_iterates.last().cloned().ok_or(Error::InvalidArgument("no checkpoints".into()))?;

        // wave operator eta_+ = lim U_inf^{-2s} U^{2s} eta_1, on the ring until the
        // scattered wave could return to the defect
        let horizon = self.wave_operator_horizon(&eta1);
        let mut wave_grid = Vec::new();
        let mut s = 1;
        while s <= horizon {
            wave_grid.push(s);
            s *= 2;
        }
        let mut forward = eta1.clone();
        let mut done = 0;
        let mut wave_iterates = Vec::with_capacity(wave_grid.len());
        for &s in &wave_grid {
            for _ in done..2 * s {
                forward = apply_u(coin, &forward)?;
            }
            done = 2 * s;
            let mut back = forward.clone();
            for _ in 0..2 * s {
                back = apply_u_inv(&free, &back)?;
            }
            wave_iterates.push(back);
        }
        let d2: Vec<f64> = wave_iterates.windows(2).map(|w| (&w[1] - &w[0]).norm()).collect();
        let eta_plus_test = cauchy_test(&d2, thr, scale);
        if !eta_plus_test.converged {
            reasons.push(format!("eta_+ not Cauchy: last differences {:?}", tail(&d2, 3)));
        }
        let eta_plus = wave_iterates.last().cloned().unwrap_or_else(|| eta1.clone());

        // resolution residual ||xi(t) - U_inf^{2t} eta_+|| at the checkpoints
        let mut free_orbit = eta_plus.clone();
        let mut done = 0;
        for (c, xi) in cps.iter_mut().zip(&xis) {
            for _ in done..2 * c.t {
                free_orbit = apply_u(&free, &free_orbit)?;
            }
            done = 2 * c.t;
            c.resolution_residual = (xi - &free_orbit).norm();
        }
        let final_residual = cps.last().map_or(f64::NAN, |c| c.resolution_residual);
        let decade: Vec<f64> = cps.iter().filter(|c| 10 * c.t >= t_max).map(|c| c.resolution_residual).collect();
        let monotone = decade.windows(2).all(|w| w[1] <= w[0]);
        let (xs, ys): (Vec<f64>, Vec<f64>) = cps
            .iter()
            .filter(|c| 10 * c.t >= t_max && c.resolution_residual > 0.0)
            .map(|c| ((c.t as f64).ln(), c.resolution_residual.ln()))
            .unzip();
        let residual_decay_exponent = linear_fit(&xs, &ys).map_or(f64::NAN, |f| f.0);
        if !(final_residual <= opts.tolerances.resolution) {
            reasons.push(format!(
                "resolution residual {final_residual:.3e} above threshold {:.3e}",
                opts.tolerances.resolution
            ));
        }

        let rows = &trace.rows;
        let q = rows.len() - rows.len() / 4;
        let tail_abs: Vec<f64> = rows[q..].iter().map(|r| r.z_abs).collect();
        let rho = tail_abs.iter().sum::<f64>() / tail_abs.len().max(1) as f64;
        let (lo, hi) = tail_abs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let z_l1 = trace.z_l1();
        let z_before: f64 = rows[..q].iter().map(|r| r.big_z().norm()).sum();
        let report = StabilityReport {
            status: if reasons.is_empty() { Status::Pass } else { Status::Inconclusive },
            reasons,
            steps: t_max,
            rho,
            rho_tail_variation: if rho > 0.0 { (hi - lo) / rho } else { 0.0 },
            z_l1,
            z_last_quarter_increment: if z_l1 > 0.0 { (z_l1 - z_before) / z_l1 } else { 0.0 },
            eta1: eta1_test,
            eta_plus: eta_plus_test,
            eta_plus_norm: eta_plus.norm(),
            pc_u0_norm: eta0_norm,
            final_residual,
            residual_monotone_final_decade: monotone,
            residual_decay_exponent,
            checkpoints: cps,
            wave_operator_horizon: wave_grid.last().copied().unwrap_or(0),
            max_boundary_mass: max_mass,
        };
        info!(
            "stability run: status {:?}, rho {:.6e}, residual {:.3e}",
            report.status, report.rho, report.final_residual
        );
        Ok(StabilityRun { report, trace })
    }

    /// Largest `s` for which `U^{2s}` applied to `f` cannot bring radiation
    /// around the ring back to the defect region: `2s + 2R < 2L`, with `R` the
    /// radius holding all but `1e-14` of `f`'s mass.
    pub fn wave_operator_horizon(&self, f: &SpinorField) -> usize {
        let l = self.grid().half_width() as i64;
        let total = f.norm_sqr();
        // mass at each |x|, then the smallest radius leaving at most 1e-14 outside
        let mut shell = vec![0.0; l as usize + 1];
        for (x, s) in self.grid().sites().zip(f.values()) {
            shell[x.unsigned_abs() as usize] += s[0].norm_sqr() + s[1].norm_sqr();
        }
        let mut outside = 0.0;
        let mut r = l;
        while r > 0 && outside + shell[r as usize] <= 1e-14 * total {
            outside += shell[r as usize];
            r -= 1;
        }
        let r = r.max(self.family().grid().half_width() as i64);
        (((2 * l - 2 * r) / 2).max(1)) as usize
    }

    /// `||Z||_l1` after `steps` double steps from mixed data with `z0 = ratio eps`.
    pub fn z_l1_for(&self, eps: f64, ratio: f64, width: f64, steps: usize, seed: u64, guard: WrapGuard) -> Result<f64> {
        let mut rng = rng_for(seed, 0);
        let u0 = self.initial_data(&Recipe::Mixed { z: [ratio * eps, 0.0], eps, width }, &mut rng)?;
        let trace = self.modulation.track_with(&u0, steps, false, |t, u, _| guard.check(t, u).map(|_| ()))?;
        if let Some(f) = trace.failure {
            return Err(Error::Precondition(format!("tracking failed: {f}")));
        }
        Ok(trace.z_l1())
    }

    /// `||Z||_l1` over an eps list and the log-log slope.
    pub fn z_scaling(
        &self,
        eps_list: &[f64],
        ratio: f64,
        steps: usize,
        seed: u64,
        guard: WrapGuard,
    ) -> Result<ZScaling> {
        let values: Vec<f64> =
            eps_list.par_iter().map(|&e| self.z_l1_for(e, ratio, 8.0, steps, seed, guard)).collect::<Result<_>>()?;
        let x: Vec<f64> = eps_list.iter().map(|e| e.ln()).collect();
        let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let (slope, _, _) = linear_fit(&x, &y)?;
        Ok(ZScaling { eps: eps_list.to_vec(), z_l1: values, slope })
    }

    /// For each `delta`, perturbs `Phi_+[z0]` by `delta` times a random unit
    /// field in `P_+ l2` supported in `|x| <= 20` and records
    /// `sup_t inf_theta ||u(t) - e^{i theta} Phi_+[z0]||`.
    pub fn run_orbital(
        &self,
        z0: C64,
        deltas: &[f64],
        steps: usize,
        seed: u64,
        guard: WrapGuard,
    ) -> Result<Vec<OrbitalRow>> {
        let phi = self.bound_state(z0)?;
        let mut rng = rng_for(seed, 1);
        let raw = SpinorField::from_fn(self.grid(), |x| {
            if x.abs() <= 20 {
                [
                    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                ]
            } else {
                [C64::new(0.0, 0.0); 2]
            }
        });
        let mut dir = raw.p_plus();
        dir.scale(C64::new(1.0 / dir.norm(), 0.0));
        deltas
            .par_iter()
            .map(|&delta| {
                let mut u = phi.clone();
                u.axpy(C64::new(delta, 0.0), &dir)?;
                let mut sup: f64 = orbital_deviation(&u, &phi)?;
                let initial = sup;
                for t in 1..=steps {
                    u = self.walk().double_step(&u)?;
                    guard.check(t, &u)?;
                    sup = sup.max(orbital_deviation(&u, &phi)?);
                }
                Ok(OrbitalRow { delta, initial_deviation: initial, sup_deviation: sup })
            })
            .collect()
    }
}

fn tail(v: &[f64], n: usize) -> Vec<f64> {
    v[v.len().saturating_sub(n)..].to_vec()
}

#[derive(Debug, Clone, Serialize)]
pub struct ZScaling {
    pub eps: Vec<f64>,
    pub z_l1: Vec<f64>,
    pub slope: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OrbitalRow {
    pub delta: f64,
    pub initial_deviation: f64,
    pub sup_deviation: f64,
}

/// `inf_theta ||u - e^{i theta} v||`, attained at `theta = arg (u, v)`.
/// Evaluated as a difference norm: the expanded form
/// `||u||^2 + ||v||^2 - 2 |(u, v)|` loses half the digits near the orbit.
pub fn orbital_deviation(u: &SpinorField, v: &SpinorField) -> Result<f64> {
    let c = u.inner(v)?;
    let phase = if c.norm() > 0.0 { c / c.norm() } else { C64::new(1.0, 0.0) };
    Ok((u - &v.scaled(phase)).norm())
}

/// The minimizing phase of [`orbital_deviation`].
pub fn orbital_phase(u: &SpinorField, v: &SpinorField) -> Result<f64> {
    Ok(u.inner(v)?.arg())
}

/// Norm and boundary mass of a plain evolution, for the `evolve` command.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EvolveRow {
    pub t: usize,
    pub norm: f64,
    pub sup: f64,
    pub boundary_mass: f64,
}

pub fn evolve(walk: &Walk, u0: &SpinorField, steps: usize, guard: WrapGuard) -> Result<(SpinorField, Vec<EvolveRow>)> {
    let mut u = u0.clone();
    let mut rows =
        vec![EvolveRow { t: 0, norm: u.norm(), sup: u.sup_norm(), boundary_mass: u.boundary_mass(WRAP_STRIP) }];
    for t in 1..=steps {
        u = walk.double_step(&u)?;
        guard.check(t, &u)?;
        rows.push(EvolveRow { t, norm: u.norm(), sup: u.sup_norm(), boundary_mass: u.boundary_mass(WRAP_STRIP) });
    }
    Ok((u, rows))
}

/// `e^{i theta} u` for the norm-preserving checks.
pub fn rotate(u: &SpinorField, theta: f64) -> SpinorField {
    u.scaled(C64::from_polar(1.0, theta))
}

/// One named check with its tolerance, printed as a PASS/FAIL line.
#[derive(Debug, Clone, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckLine {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, pass: value <= tolerance }
    }

    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, pass: value >= tolerance }
    }
}

impl std::fmt::Display for CheckLine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}: {:.3e} (tolerance {:.1e})", self.name, self.value, self.tolerance)
    }
}

/// Random `n x n` weight with entries in the unit square, scaled by `1/n`.
fn random_weight<R: Rng>(n: usize, rng: &mut R) -> Weight {
    Weight::Matrix(Mat::from_fn(n, n, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) / n as f64
    }))
}

/// Worst case over `samples` random `(A, U, phi)` of the time/resolvent
/// identities, with `lambda_grid` points for the resolvent checks.
pub fn identity_checks(
    eps_list: &[f64],
    samples: usize,
    dim: usize,
    grid_size: usize,
    seed: u64,
) -> Result<Vec<CheckLine>> {
    let lambdas: Vec<f64> = (0..grid_size).map(|k| std::f64::consts::TAU * k as f64 / grid_size as f64).collect();
    let intervals = IntervalGrid { starts: 16, widths: vec![0.5, 1.0, 2.0], floor: 0.5 };
    let per_sample: Vec<[f64; 4]> = (0..samples)
        .into_par_iter()
        .map(|k| -> Result<[f64; 4]> {
            let mut rng = rng_for(seed, 100 + k as u64);
            let u = random_unitary(dim, &mut rng);
            let a = random_weight(dim, &mut rng);
            let phi = random_vector(dim, &mut rng);
            let mut worst = [0.0, 0.0, f64::INFINITY, 0.0];
            for &eps in eps_list {
                let r = SmoothnessReport::compute(&a, &u, &phi, eps, &intervals)?;
                let sup = qty_sup_resolvent(&a, &u, &[eps], &lambdas)?;
                let ident = lambdas
                    .iter()
                    .map(|&l| resolvent_identity_residual(&u, l, eps))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .fold(r.resolvent_identity, f64::max);
                worst[0] = f64::max(worst[0], r.plancherel);
                worst[1] = f64::max(worst[1], ident);
                worst[2] = f64::min(worst[2], sup.min_eigenvalue);
                worst[3] = f64::max(worst[3], r.stone);
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    let fold = |i: usize, f: fn(f64, f64) -> f64, init: f64| per_sample.iter().map(|w| w[i]).fold(init, f);
    Ok(vec![
        CheckLine::at_most("plancherel (relative)", fold(0, f64::max, 0.0), 1e-9),
        CheckLine::at_most("resolvent identity", fold(1, f64::max, 0.0), 1e-12),
        CheckLine::at_least("positivity (min eigenvalue of the jump)", fold(2, f64::min, f64::INFINITY), -1e-12),
        CheckLine::at_most("normalization", fold(3, f64::max, 0.0), 1e-10),
    ])
}

/// Stone's formula on `[1, 2.5]` against the eigenprojection, once with all
/// eigenphases interior or exterior and once with an eigenphase on the left
/// endpoint, where the weight must be one half.
pub fn stone_checks(seed: u64) -> Result<Vec<CheckLine>> {
    let dim = 8;
    let (a, b) = (1.0, 2.5);
    let eps_seq = [0.04, 0.02, 0.01, 0.005];
    let mut rng = rng_for(seed, 7);
    let v = random_unitary(dim, &mut rng);
    let build = |phases: &[f64]| -> Mat<C64> {
        let d =
            Mat::from_fn(dim, dim, |i, j| if i == j { C64::from_polar(1.0, phases[i]) } else { C64::new(0.0, 0.0) });
        &v * &d * v.adjoint()
    };
    let generic = vec![0.3, 1.4, 1.9, 3.0, 3.7, 4.4, 5.1, 5.8];
    let mut edge = generic.clone();
    edge[0] = a;
    let mut lines = Vec::new();
    let u = build(&generic);
    let rep = stone_projection(&u, a, b, &eps_seq, false)?;
    let exact = eigenprojection(&u, a, b, 1e-12)?;
    lines.push(CheckLine::at_most("stone projection", max_abs_diff(&rep.extrapolated, &exact), 1e-6));
    let u = build(&edge);
    let rep = stone_projection(&u, a, b, &eps_seq, true)?;
    let exact = eigenprojection(&u, a, b, 1e-12)?;
    lines.push(CheckLine::at_most(
        "stone projection, endpoint eigenphase",
        max_abs_diff(&rep.extrapolated, &exact),
        1e-6,
    ));
    // weight of the endpoint eigenvector at the smallest eps
    let raw = rep.integrals.last().expect("nonempty");
    let w: C64 = (0..dim)
        .flat_map(|i| (0..dim).map(move |j| (i, j)))
        .map(|(i, j)| v[(i, 0)].conj() * raw[(i, j)] * v[(j, 0)])
        .sum();
    lines.push(CheckLine::at_most("stone half weight |w - 1/2|", (w.re - 0.5).abs(), 0.02));
    Ok(lines)
}

/// `sup_lambda ||<x>^{-s} P_c R(lambda +- i eps) P_c <x>^{-s}||` across `eps_list`
/// on the walk, with the growth ratio between the smallest and largest eps.
pub fn walk_kato_check(
    coin: &CoinField,
    s: f64,
    eps_list: &[f64],
    grid_size: usize,
) -> Result<(Vec<KatoRow>, CheckLine)> {
    let sd = SpectralData::new(coin)?;
    let modes = sd.discrete_indices().iter().map(|&j| sd.eigenvector(j)).collect::<Result<Vec<_>>>()?;
    let a = WalkWeight { s, modes };
    let grid = lambda_grid_with_edges(grid_size, sd.band_edge());
    let rows = walk_kato_sweep(coin, &a, eps_list, &grid)?;
    let lo = rows.iter().map(|r| r.sup).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.sup).fold(0.0, f64::max);
    Ok((rows, CheckLine::at_most("walk weighted resolvent growth across eps", hi / lo, KATO_GROWTH)))
}

/// Largest accepted ratio of weighted-resolvent suprema across an eps sweep.
pub const KATO_GROWTH: f64 = 3.0;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::ONE;
    use crate::walk::Preset;

    #[test]
    fn cauchy_rule() {
        assert!(cauchy_test(&[1.0, 0.6, 0.3, 0.1], 0.2, 1.0).converged);
        assert!(!cauchy_test(&[1.0, 0.6, 0.5, 0.1], 0.2, 1.0).converged);
        assert!(!cauchy_test(&[1.0, 0.6, 0.3, 0.19 * 1.2], 0.2, 1.0).converged);
        assert!(cauchy_test(&[1e-3, 1e-11, 2e-11, 1e-11], 1e-6, 1.0).converged);
        assert!(!cauchy_test(&[0.1, 0.01], 1.0, 1.0).converged);
    }

    #[test]
    fn dyadic_grid() {
        assert_eq!(dyadic_checkpoints(10), vec![1, 2, 4, 8, 10]);
        assert_eq!(dyadic_checkpoints(8), vec![1, 2, 4, 8]);
    }

    #[test]
    fn orbital_phase_beats_a_theta_grid() {
        let g = LatticeGrid::new(8).unwrap();
        let mut rng = rng_for(4, 0);
        let f = |rng: &mut ChaCha8Rng| {
            SpinorField::from_fn(g, |_| {
                [C64::new(rng.random_range(-1.0..1.0), 0.3), C64::new(0.1, rng.random_range(-1.0..1.0))]
            })
        };
        let u = f(&mut rng);
        let v = f(&mut rng);
        let best = orbital_deviation(&u, &v).unwrap();
        let theta = orbital_phase(&u, &v).unwrap();
        assert!(((&u - &rotate(&v, theta)).norm() - best).abs() < 1e-12);
        let grid_min = (0..360)
            .map(|k| (&u - &rotate(&v, std::f64::consts::TAU * k as f64 / 360.0)).norm())
            .fold(f64::INFINITY, f64::min);
        assert!(best <= grid_min + 1e-10);
    }

    #[test]
    fn eigenvector_does_not_decay() {
        let coin = Preset::KlsOrigin.coin(LatticeGrid::new(512).unwrap()).unwrap();
        let opts = DecayFitOptions { t_min: 10, t_max: 100, initial: DecayInitial::Eigenvector, ..Default::default() };
        let fit = run_decay_fit(&coin, &opts).unwrap();
        assert!(fit.slope.abs() < 0.02, "{}", fit.slope);
    }

    #[test]
    fn wrap_is_detected() {
        let coin = Preset::KlsOrigin.coin(LatticeGrid::new(64).unwrap()).unwrap();
        let opts = DecayFitOptions { t_min: 5, t_max: 40, window: 32, ..Default::default() };
        assert!(matches!(run_decay_fit(&coin, &opts), Err(Error::Precondition(_))));
        let guard = WrapGuard { tol: 1e-8, mode: WrapMode::Abort };
        let walk = Walk::new(coin.clone(), Nonlinearity::linear());
        let u0 = SpinorField::point(coin.grid(), 0, [ONE, C64::new(0.0, 0.0)]).unwrap();
        assert!(matches!(evolve(&walk, &u0, 80, guard), Err(Error::WrapContamination { .. })));
    }
}
