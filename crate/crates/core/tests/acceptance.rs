//! Acceptance suite: one PASS/FAIL line per check, one verdict per criterion.
//!
//! Criteria listed in `KNOWN_BLOCKED` are run at their stated parameters and
//! reported honestly; their blocking analysis lives in the decisions ledger
//! under the quoted entry. The process fails when any other criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64 as C64;
use rand::Rng;

use nlqw::bound_state::{BoundStateFamily, FamilyConfig};
use nlqw::config::{ExperimentConfig, Recipe, Tolerances, WrapMode};
use nlqw::error::Error;
use nlqw::experiments::{
    identity_checks, linear_fit, rng_for, run_decay_fit, stone_checks, CheckLine, DecayFitOptions, Lab,
    StabilityOptions, WrapGuard,
};
use nlqw::lattice::{LatticeGrid, SpinorField};
use nlqw::modulation::{random_field, Modulation};
use nlqw::spectral::{decaying_solution, psi_of_field, SpectralData};
use nlqw::walk::{apply_u, Monomial, Nonlinearity, Preset};

const KNOWN_BLOCKED: &[(usize, &str)] = &[
    (5, "ledger: 'Criterion 5 at L = 2048 is contaminated by wrapped radiation'"),
    (6, "ledger: 'Criterion 6 slope 3 holds for p = 1, not for the default p = 3'"),
];

type Lines = Vec<CheckLine>;

fn kls(l: usize) -> nlqw::walk::CoinField {
    Preset::KlsOrigin.coin(LatticeGrid::new(l).unwrap()).unwrap()
}

fn cubic(p: u32) -> Nonlinearity {
    Nonlinearity::sigma3(Monomial::new(1.0, p).unwrap())
}

fn info(text: String) {
    println!("    info {text}");
}

/// Linear walk, L = 4096, fit window t in [20, 400].
fn dispersive_decay() -> Lines {
    let fit = run_decay_fit(&kls(4096), &DecayFitOptions::default()).unwrap();
    info(format!("fitted exponent {:.5}, rms residual {:.2e}", fit.slope, fit.rms_residual));
    vec![CheckLine::at_most("decay exponent |slope + 1/3|", (fit.slope + 1.0 / 3.0).abs(), 0.05)]
}

/// Dense eigenfunction at L = 1024 against the decay law and the transfer-matrix solution.
fn eigenfunction_decay() -> Lines {
    let coin = kls(1024);
    let sd = SpectralData::new(&coin).unwrap();
    let pair = sd.selected().unwrap();
    let xi = (pair.lambda.cos().abs() / 0.8).acosh();
    let amp = |x: i64| {
        let p = psi_of_field(&pair.phi, x);
        (p[0].norm_sqr() + p[1].norm_sqr()).sqrt()
    };
    // the coin is constant for |x| >= 1, so psi is a pure exponential mode there
    let right: Vec<i64> = (2..=40).collect();
    let left: Vec<i64> = (-40..=-2).collect();
    let slope = |xs: &[i64]| {
        let x: Vec<f64> = xs.iter().map(|&x| x as f64).collect();
        let y: Vec<f64> = xs.iter().map(|&x| amp(x).ln()).collect();
        linear_fit(&x, &y).unwrap().0
    };
    let (sr, sl) = (slope(&right), slope(&left));
    info(format!("lambda {:.12}, arccosh(cos lambda / |beta|) {xi:.10}, slopes {sr:.10} / {sl:.10}", pair.lambda));

    let sol = decaying_solution(&coin, pair.lambda, 1).unwrap();
    let window: Vec<i64> = (1..=30).collect();
    let dense: Vec<[C64; 2]> = window.iter().map(|&x| psi_of_field(&pair.phi, x)).collect();
    let tm: Vec<[C64; 2]> = window.iter().map(|&x| sol.at(x)).collect();
    let dot = |a: &[[C64; 2]], b: &[[C64; 2]]| -> C64 {
        a.iter().zip(b).map(|(u, v)| u[0] * v[0].conj() + u[1] * v[1].conj()).sum()
    };
    let c = dot(&dense, &tm) / dot(&tm, &tm).re;
    let err: f64 =
        dense.iter().zip(&tm).map(|(d, t)| (d[0] - c * t[0]).norm_sqr() + (d[1] - c * t[1]).norm_sqr()).sum();
    let rel = err.sqrt() / dot(&dense, &dense).re.sqrt();
    vec![
        CheckLine::at_most("semilog slope, x > 0, relative error", (sr + xi).abs() / xi, 0.01),
        CheckLine::at_most("semilog slope, x < 0, relative error", (sl - xi).abs() / xi, 0.01),
        CheckLine::at_most("transfer-matrix solution vs dense eigenfunction (relative)", rel, 1e-6),
    ]
}

/// Default family (p = 3) for the residual, reality and contraction; the
/// cubic law for the cubic nonlinearity p = 1.
fn bound_state_family() -> Lines {
    let coin = kls(96);
    let fam = BoundStateFamily::new(&coin, cubic(3), FamilyConfig::default()).unwrap();
    let z = C64::new(0.05, 0.0);
    let residual = fam.residual(z).unwrap();
    let im_lambda = [0.01, 0.03, 0.05, 0.1]
        .iter()
        .map(|&a| {
            let p = fam.point(C64::from_polar(a, 0.4)).unwrap();
            (p.r * p.mu_imag).abs()
        })
        .fold(0.0, f64::max);
    let ratio = fam.node_ratios().iter().copied().fold(0.0, f64::max);

    let halving = |fam: &BoundStateFamily| {
        let dev = |a: f64| {
            let z = C64::new(a, 0.0);
            (&fam.eval_phi(z).unwrap() - &fam.phi_seed().scaled(z)).norm()
        };
        dev(0.08) / dev(0.04)
    };
    let fam1 = BoundStateFamily::new(&coin, cubic(1), FamilyConfig::default()).unwrap();
    let f1 = halving(&fam1);
    info(format!("halving factor of ||Phi[z] - z phi||: p = 1 {f1:.4}, p = 3 {:.2}", halving(&fam)));
    vec![
        CheckLine::at_most("||U N(Phi) - e^{i Lambda} Phi|| at z = 0.05", residual, 1e-9),
        CheckLine::at_most("cubic law |factor / 8 - 1| (p = 1)", (f1 / 8.0 - 1.0).abs(), 0.15),
        CheckLine::at_most("max |Im Lambda|", im_lambda, 1e-12),
        CheckLine::at_most("max contraction ratio on the cache grid", ratio, 0.5),
    ]
}

/// A(w)^2, DN^{-1} DN, symplectic orthogonality, H_c invariance, and the
/// modulation Jacobian and pairing at the origin.
fn structural_identities() -> Lines {
    let nl = cubic(3);
    let g = LatticeGrid::new(64).unwrap();
    let mut rng = rng_for(1, 40);
    let (mut a2, mut inv): (f64, f64) = (0.0, 0.0);
    for _ in 0..10 {
        let w = random_field(g, &mut rng).scaled(C64::new(rng.random_range(0.1..1.0), 0.0));
        let u = random_field(g, &mut rng);
        // A(w) is 2 g'(m) |gamma w|^2 times a partial isometry at each site
        let scale = w
            .values()
            .iter()
            .map(|v| {
                let gw = nl.gamma_apply(v);
                2.0 * nl.monomial().derivative(nl.density(v)).abs() * (gw[0].norm_sqr() + gw[1].norm_sqr())
            })
            .fold(0.0, f64::max);
        let twice = nl.apply_a(&w, &nl.apply_a(&w, &u).unwrap()).unwrap();
        a2 = a2.max(twice.norm() / (scale * scale * u.norm()));
        let back = nl.apply_derivative_inv(&w, &nl.apply_derivative(&w, &u).unwrap()).unwrap();
        inv = inv.max((&back - &u).norm() / u.norm());
    }

    let fam = BoundStateFamily::new(&kls(96), nl, FamilyConfig::default()).unwrap();
    let m = Modulation::on_window(fam).unwrap();
    let z = C64::new(0.05, 0.0);
    let symp = m.check_symplectic(z, 10, &mut rng).unwrap();
    let mut hc: f64 = 0.0;
    for _ in 0..5 {
        let eta = m.project_c(&random_field(m.family().grid(), &mut rng).p_plus()).unwrap();
        let xi = m.apply_r(z, &eta).unwrap();
        hc = hc.max(m.check_hc_invariance(z, &xi).unwrap());
    }
    let zero = C64::new(0.0, 0.0);
    let jac = m.jacobian(zero, &SpinorField::zeros(m.family().grid())).unwrap();
    let pair = m.pairing_matrix(zero).unwrap();
    let dist = |a: [[f64; 2]; 2], b: [[f64; 2]; 2]| {
        (0..4).map(|k| (a[k / 2][k % 2] - b[k / 2][k % 2]).abs()).fold(0.0, f64::max)
    };
    vec![
        CheckLine::at_most("||A(w)^2 u|| / (||A(w)||^2 ||u||), rounding only", a2, 16.0 * f64::EPSILON),
        CheckLine::at_most("||DN^{-1} DN u - u|| / ||u||", inv, 1e-12),
        CheckLine::at_most("symplectic orthogonality at z = 0.05", symp, 1e-10),
        CheckLine::at_most("H_c invariance of e^{-i Lambda_+} L", hc, 1e-7),
        CheckLine::at_most("Jacobian of F at 0 vs [[0,-1],[1,0]]", dist(jac, [[0.0, -1.0], [1.0, 0.0]]), 1e-6),
        CheckLine::at_most("pairing matrix at 0 vs [[0,1],[-1,0]]", dist(pair, [[0.0, 1.0], [-1.0, 0.0]]), 1e-6),
    ]
}

fn stability_lines(cfg: &ExperimentConfig) -> Result<(Lines, f64), Error> {
    let lab = Lab::from_config(cfg)?;
    let u0 = lab.initial_data(&cfg.recipe, &mut rng_for(cfg.run.seed, 0))?;
    let run = lab.run_stability(
        &u0,
        &StabilityOptions { steps: cfg.run.steps, tolerances: cfg.tolerances.clone(), diagnostics: false },
    )?;
    let r = run.report;
    Ok((
        vec![
            CheckLine::at_most("|z| tail variation / mean over the last 25%", r.rho_tail_variation, 0.02),
            CheckLine::at_most("||Z||_l1 last-quarter increment / total", r.z_last_quarter_increment, 0.01),
            CheckLine::at_least(
                "resolution residual monotone over the final decade (1 = yes)",
                f64::from(u8::from(r.residual_monotone_final_decade)),
                1.0,
            ),
        ],
        r.final_residual,
    ))
}

/// Mixed data with eps = 0.05 for T = 4000 double steps on the stated
/// lattice L = 2048, with the wrap guard in force.
fn soliton_resolution() -> Lines {
    let mut cfg = ExperimentConfig::default();
    cfg.lattice.half_width = 2048;
    cfg.run.steps = 4000;
    cfg.recipe = Recipe::Mixed { z: [0.03, 0.0], eps: 0.05, width: 8.0 };
    cfg.tolerances = Tolerances { wrap_mode: WrapMode::Abort, ..Tolerances::default() };
    let lines = match stability_lines(&cfg) {
        Ok((lines, _)) => lines,
        Err(e) => vec![CheckLine::at_most(format!("run completes without wrap contamination ({e})"), 1.0, 0.0)],
    };
    // same data on a lattice wide enough for the radiation
    cfg.lattice.half_width = 8192;
    match stability_lines(&cfg) {
        Ok((wide, residual)) => {
            for l in wide {
                info(format!("L = 8192: {l}"));
            }
            info(format!("L = 8192: final resolution residual {residual:.3e}"));
        }
        Err(e) => info(format!("L = 8192 run failed: {e}")),
    }
    lines
}

/// log-log slope of ||Z||_l1 against eps in {0.02, 0.04, 0.08}, z0 = 0.6 eps.
fn z_scaling() -> Lines {
    let guard = WrapGuard { tol: 1e-8, mode: WrapMode::Abort };
    let eps = [0.02, 0.04, 0.08];
    let slope = |p: u32| {
        let lab = Lab::new(kls(2048), 96, cubic(p)).unwrap();
        let zs = lab.z_scaling(&eps, 0.6, 1000, 1, guard).unwrap();
        info(format!("p = {p}: ||Z||_l1 = {:?}, slope {:.4}", zs.z_l1, zs.slope));
        zs.slope
    };
    let s3 = slope(3);
    let s1 = slope(1);
    info(format!("p = 1 |slope - 3| = {:.3e}", (s1 - 3.0).abs()));
    vec![CheckLine::at_most("|slope - 3| for the default nonlinearity p = 3", (s3 - 3.0).abs(), 0.5)]
}

/// Sup orbital deviation for delta in {0.02, 0.01, 0.005} about z0 = 0.04.
fn orbital_sweep() -> Lines {
    let lab = Lab::new(kls(1024), 96, cubic(3)).unwrap();
    let guard = WrapGuard { tol: 1e-8, mode: WrapMode::Abort };
    let rows = lab.run_orbital(C64::new(0.04, 0.0), &[0.02, 0.01, 0.005], 500, 1, guard).unwrap();
    let mut lines = Vec::new();
    for w in rows.windows(2) {
        let ratio = w[1].sup_deviation / w[0].sup_deviation;
        info(format!(
            "delta {} -> {}: sup deviation {:.5e} -> {:.5e}",
            w[0].delta, w[1].delta, w[0].sup_deviation, w[1].sup_deviation
        ));
        lines.push(CheckLine::at_least(format!("halving ratio {} -> {} >= 0.3", w[0].delta, w[1].delta), ratio, 0.3));
        lines.push(CheckLine::at_most(format!("halving ratio {} -> {} <= 0.8", w[0].delta, w[1].delta), ratio, 0.8));
    }
    lines
}

fn identity_suite() -> Lines {
    let mut lines = identity_checks(&[0.1, 0.01], 20, 8, 64, 1).unwrap();
    lines.extend(stone_checks(1).unwrap());
    lines
}

/// Norm drift of the nonlinear double step, chiral anticommutation of the
/// linear walk, and parity invariance of the double step.
fn conservation_and_symmetry() -> Lines {
    let lab = Lab::new(kls(1024), 96, cubic(3)).unwrap();
    let mut rng = rng_for(1, 90);
    let u0 = lab.initial_data(&Recipe::Mixed { z: [0.03, 0.0], eps: 0.05, width: 8.0 }, &mut rng).unwrap();
    let n0 = u0.norm();
    let mut u = u0.clone();
    let mut drift: f64 = 0.0;
    for _ in 0..10_000 {
        u = lab.walk().double_step(&u).unwrap();
        drift = drift.max((u.norm() - n0).abs() / n0);
    }

    let coin = lab.coin();
    let mut chiral: f64 = 0.0;
    let mut parity: f64 = 0.0;
    for _ in 0..5 {
        let v = random_field(coin.grid(), &mut rng).scaled(C64::new(0.3, 0.0));
        let uz = apply_u(coin, &v.zigzag()).unwrap();
        let zu = apply_u(coin, &v).unwrap().zigzag();
        chiral = chiral.max((&uz + &zu).norm() / v.norm());
        let even = v.p_plus();
        parity = parity.max(lab.walk().double_step(&even).unwrap().p_minus().norm() / even.norm());
    }
    vec![
        CheckLine::at_most("relative norm drift over 10^4 double steps", drift, 1e-11),
        CheckLine::at_most("||UZ + ZU|| (relative)", chiral, 1e-14),
        CheckLine::at_most("||P_- U(P_+ u)|| / ||P_+ u||", parity, 1e-13),
    ]
}

fn main() -> ExitCode {
    let criteria: [(usize, &str, fn() -> Lines); 9] = [
        (1, "dispersive decay", dispersive_decay),
        (2, "eigenfunction decay", eigenfunction_decay),
        (3, "bound-state family", bound_state_family),
        (4, "structural identities", structural_identities),
        (5, "soliton resolution at desk scale", soliton_resolution),
        (6, "Z scaling", z_scaling),
        (7, "orbital stability sweep", orbital_sweep),
        (8, "resolvent identity suite", identity_suite),
        (9, "conservation and symmetry", conservation_and_symmetry),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut unexpected = Vec::new();
    for (k, name, run) in criteria {
        if only.is_some_and(|o| o != k) {
            continue;
        }
        println!("criterion {k}: {name}");
        let start = Instant::now();
        let lines = run();
        for l in &lines {
            println!("  {l}");
        }
        let pass = lines.iter().all(|l| l.pass);
        let blocked = KNOWN_BLOCKED.iter().find(|b| b.0 == k);
        let verdict = if pass { "PASS" } else { "FAIL" };
        match blocked {
            Some((_, why)) if !pass => {
                println!("{verdict} criterion {k} [known blocked, {why}] ({:.1?})", start.elapsed())
            }
            _ => println!("{verdict} criterion {k} ({:.1?})", start.elapsed()),
        }
        if !pass && blocked.is_none() {
            unexpected.push(k);
        }
    }
    if unexpected.is_empty() {
        println!("acceptance: all criteria outside the known-blocked list pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: unexpected failures in criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
