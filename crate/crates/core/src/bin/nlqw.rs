use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64 as C64;
use serde::Serialize;

use nlqw::config::{load_config, ExperimentConfig};
use nlqw::experiments::{
    evolve, identity_checks, rng_for, run_decay_fit, stone_checks, walk_kato_check, CheckLine, DecayFitOptions,
    DecayInitial, Lab, StabilityOptions, Status, WrapGuard,
};
use nlqw::io::{emit_csv, save_snapshot};
use nlqw::spectral::SpectralData;
use nlqw::walk::Walk;
use nlqw::{Error, Result};

#[derive(Parser)]
#[command(name = "nlqw", version, about = "Nonlinear quantum walk experiments")]
struct Cli {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `run.out_dir`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Seed, overriding `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps. Results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the configured initial data and record norms.
    Evolve {
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Spectrum of the linear walk on the bound-state window.
    Spectrum,
    /// Evaluate the nonlinear bound-state family.
    Boundstate {
        /// `re,im`
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        z: Option<C64>,
        /// Tabulate the small-z scaling instead of a single point.
        #[arg(long)]
        sweep: bool,
    },
    /// Track the modulation `u = Phi_+[z] + xi` along the evolution.
    Modulate {
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Soliton resolution run with Cauchy-tested eta_1 and eta_+.
    Stability {
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Orbital stability sweep over perturbation sizes.
    Orbital {
        #[arg(long, value_parser = parse_complex, default_value = "0.04,0", allow_hyphen_values = true)]
        z0: C64,
        #[arg(long, value_delimiter = ',', default_value = "0,0.02,0.01,0.005")]
        deltas: Vec<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Dispersive decay exponent of the linear walk.
    DecayFit {
        #[arg(long, default_value_t = 20)]
        t_min: usize,
        #[arg(long, default_value_t = 400)]
        t_max: usize,
        /// Count physical steps instead of double steps.
        #[arg(long)]
        single_step: bool,
        /// Evolve the eigenfunction instead: no decay expected.
        #[arg(long)]
        control: bool,
    },
    /// Resolvent identities and weighted resolvent bounds.
    KatoCheck {
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.01")]
        eps_list: Vec<f64>,
        /// Weight exponent in `<x>^{-s}`.
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        /// Points of the lambda grid.
        #[arg(long, default_value_t = 64)]
        grid_size: usize,
        /// Random unitaries for the identity checks.
        #[arg(long, default_value_t = 20)]
        samples: usize,
    },
}

fn parse_complex(s: &str) -> std::result::Result<C64, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |t: &str| t.parse::<f64>().map_err(|e| format!("bad number {t:?}: {e}"));
    match parts.as_slice() {
        [re] => Ok(C64::new(num(re)?, 0.0)),
        [re, im] => Ok(C64::new(num(re)?, num(im)?)),
        _ => Err(format!("expected re,im, got {s:?}")),
    }
}

enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

impl Outcome {
    fn from_lines(lines: &[CheckLine]) -> Self {
        if lines.iter().all(|l| l.pass) {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }

    fn code(&self) -> ExitCode {
        match self {
            Outcome::Pass => ExitCode::SUCCESS,
            Outcome::Fail => ExitCode::from(1),
            Outcome::Inconclusive => ExitCode::from(2),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(o) => o.code(),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => load_config(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(d) = cli.out_dir {
        cfg.run.out_dir = d;
    }
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    std::fs::create_dir_all(&cfg.run.out_dir)?;
    let out = cfg.run.out_dir.clone();
    let seed = cfg.run.seed;
    let guard = WrapGuard::from_tolerances(&cfg.tolerances);
    match cli.command {
        Command::Evolve { steps } => {
            let lab = Lab::from_config(&cfg)?;
            let u0 = lab.initial_data(&cfg.recipe, &mut rng_for(seed, 0))?;
            let walk = Walk::new(lab.coin().clone(), cfg.nonlinearity.build()?);
            let (u, rows) = evolve(&walk, &u0, steps.unwrap_or(cfg.run.steps), guard)?;
            emit_csv(&rows, &out.join("evolve.csv"))?;
            save_snapshot(&u, &out.join("final.nlqw"))?;
            let drift = (rows.last().map_or(0.0, |r| r.norm) - rows[0].norm).abs();
            println!("norm drift {drift:.3e} over {} double steps", rows.len() - 1);
            Ok(Outcome::Pass)
        }
        Command::Spectrum => spectrum(&cfg, &out),
        Command::Boundstate { z, sweep } => boundstate(&cfg, &out, z, sweep),
        Command::Modulate { steps } => {
            let lab = Lab::from_config(&cfg)?;
            let u0 = lab.initial_data(&cfg.recipe, &mut rng_for(seed, 0))?;
            let trace = lab
                .modulation()
                .track_with(&u0, steps.unwrap_or(cfg.run.steps), true, |t, u, _| guard.check(t, u).map(|_| ()))?;
            trace.write_csv(std::fs::File::create(out.join("modulation.csv"))?)?;
            println!("tracked {} double steps, ||Z||_l1 = {:.6e}", trace.rows.len(), trace.z_l1());
            match trace.failure {
                Some(f) => {
                    println!("FAIL decomposition: {f}");
                    Ok(Outcome::Fail)
                }
                None => Ok(Outcome::Pass),
            }
        }
        Command::Stability { steps } => {
            let lab = Lab::from_config(&cfg)?;
            let u0 = lab.initial_data(&cfg.recipe, &mut rng_for(seed, 0))?;
            let opts = StabilityOptions {
                steps: steps.unwrap_or(cfg.run.steps),
                tolerances: cfg.tolerances.clone(),
                diagnostics: false,
            };
            let run = lab.run_stability(&u0, &opts)?;
            let r = &run.report;
            run.trace.write_csv(std::fs::File::create(out.join("stability_trace.csv"))?)?;
            emit_csv(&r.checkpoints, &out.join("checkpoints.csv"))?;
            emit_csv(&[StabilitySummary::from(r)], &out.join("stability_summary.csv"))?;
            println!("rho {:.9e}  ||Z||_l1 {:.3e}  ||eta_+|| {:.6e}", r.rho, r.z_l1, r.eta_plus_norm);
            println!("final resolution residual {:.3e}", r.final_residual);
            for reason in &r.reasons {
                println!("  {reason}");
            }
            match r.status {
                Status::Pass => {
                    println!("PASS stability");
                    Ok(Outcome::Pass)
                }
                Status::Inconclusive => {
                    println!("INCONCLUSIVE stability");
                    Ok(Outcome::Inconclusive)
                }
            }
        }
        Command::Orbital { z0, deltas, steps } => {
            let lab = Lab::from_config(&cfg)?;
            let rows = lab.run_orbital(z0, &deltas, steps.unwrap_or(cfg.run.steps), seed, guard)?;
            emit_csv(&rows, &out.join("orbital.csv"))?;
            for r in &rows {
                println!("delta {:.4e}  sup deviation {:.6e}", r.delta, r.sup_deviation);
            }
            Ok(Outcome::Pass)
        }
        Command::DecayFit { t_min, t_max, single_step, control } => {
            let coin = cfg.coin_on(cfg.grid()?)?;
            let opts = DecayFitOptions {
                t_min,
                t_max,
                single_step,
                initial: if control { DecayInitial::Eigenvector } else { DecayInitial::Continuous },
                window: cfg.model.window,
                wrap_tol: cfg.tolerances.wrap,
            };
            let fit = run_decay_fit(&coin, &opts)?;
            emit_csv(&fit.samples, &out.join("decay.csv"))?;
            let line = if control {
                CheckLine::at_least("decay slope of the eigenfunction", fit.slope, -0.02)
            } else {
                CheckLine::at_most("decay slope |slope + 1/3|", (fit.slope + 1.0 / 3.0).abs(), 0.05)
            };
            println!("slope {:.6} (rms residual {:.3e})", fit.slope, fit.rms_residual);
            println!("{line}");
            Ok(Outcome::from_lines(&[line]))
        }
        Command::KatoCheck { eps_list, s, grid_size, samples } => {
            let mut lines = identity_checks(&eps_list, samples, 8, grid_size, seed)?;
            lines.extend(stone_checks(seed)?);
            let coin = cfg.coin_on(cfg.window_grid()?)?;
            let (rows, line) = walk_kato_check(&coin, s, &eps_list, grid_size)?;
            lines.push(line);
            emit_csv(&rows, &out.join("kato.csv"))?;
            emit_csv(&lines, &out.join("kato_checks.csv"))?;
            for l in &lines {
                println!("{l}");
            }
            Ok(Outcome::from_lines(&lines))
        }
    }
}

#[derive(Serialize)]
struct SpectrumRow {
    index: usize,
    angle: f64,
    is_discrete: bool,
    localization_mass: f64,
    gap_margin: f64,
}

fn spectrum(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let sd = SpectralData::new(&cfg.coin_on(cfg.window_grid()?)?)?;
    let band = sd.band_edge();
    let rows: Vec<SpectrumRow> = sd
        .eigen_angles()
        .iter()
        .enumerate()
        .map(|(j, &a)| SpectrumRow {
            index: j,
            angle: a,
            is_discrete: sd.discrete_indices().contains(&j),
            localization_mass: sd.localization()[j],
            gap_margin: a.cos().abs() - band,
        })
        .collect();
    emit_csv(&rows, &out.join("spectrum.csv"))?;
    for &j in sd.discrete_indices() {
        save_snapshot(&sd.eigenvector(j)?, &out.join(format!("eigenfunction_{j}.nlqw")))?;
        println!("discrete eigenvalue {j}: angle {:.12}", sd.eigen_angles()[j]);
    }
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct BoundStateRow {
    z_re: f64,
    z_im: f64,
    #[serde(rename = "Lambda")]
    lambda: f64,
    residual: f64,
    phi_minus_z_phi: f64,
}

#[derive(Serialize)]
struct SweepRow {
    abs_z: f64,
    lambda_shift: f64,
    lambda_shift_over_z2: f64,
    phi_minus_z_phi: f64,
    residual: f64,
}

fn boundstate(cfg: &ExperimentConfig, out: &Path, z: Option<C64>, sweep: bool) -> Result<Outcome> {
    let lab = Lab::new(cfg.coin_on(cfg.window_grid()?)?, cfg.model.window, cfg.nonlinearity.build()?)?;
    let fam = lab.family();
    let deviation = |z: C64| -> Result<f64> {
        let p = fam.point(z)?;
        Ok((&p.phi() - &fam.phi_seed().scaled(z)).norm())
    };
    if sweep {
        let rows: Vec<SweepRow> = (0..6)
            .map(|k| -> Result<SweepRow> {
                let a = 0.08 / f64::powi(2.0, k);
                let z = C64::new(a, 0.0);
                let shift = fam.eval_lambda(z)? - fam.lambda0();
                Ok(SweepRow {
                    abs_z: a,
                    lambda_shift: shift,
                    lambda_shift_over_z2: shift / (a * a),
                    phi_minus_z_phi: deviation(z)?,
                    residual: fam.residual(z)?,
                })
            })
            .collect::<Result<_>>()?;
        emit_csv(&rows, &out.join("boundstate_sweep.csv"))?;
        for w in rows.windows(2) {
            println!(
                "|z| {:.4e}: |Phi - z phi| ratio {:.4}, (Lambda - lambda)/|z|^2 {:.6e}",
                w[1].abs_z,
                w[0].phi_minus_z_phi / w[1].phi_minus_z_phi,
                w[1].lambda_shift_over_z2
            );
        }
        return Ok(Outcome::Pass);
    }
    let z = z.or(cfg.recipe.z()).unwrap_or(C64::new(0.05, 0.0));
    let p = fam.point(z)?;
    save_snapshot(&p.phi(), &out.join("boundstate.nlqw"))?;
    let row = BoundStateRow {
        z_re: z.re,
        z_im: z.im,
        lambda: p.lambda,
        residual: fam.residual(z)?,
        phi_minus_z_phi: deviation(z)?,
    };
    println!("Lambda {:.15}  residual {:.3e}  |Phi - z phi| {:.6e}", row.lambda, row.residual, row.phi_minus_z_phi);
    emit_csv(&[row], &out.join("boundstate.csv"))?;
    Ok(Outcome::Pass)
}

#[derive(Serialize)]
struct StabilitySummary {
    status: String,
    rho: f64,
    rho_tail_variation: f64,
    z_l1: f64,
    z_last_quarter_increment: f64,
    eta1_converged: bool,
    eta_plus_converged: bool,
    eta_plus_norm: f64,
    pc_u0_norm: f64,
    final_residual: f64,
    residual_monotone_final_decade: bool,
    residual_decay_exponent: f64,
    wave_operator_horizon: usize,
    max_boundary_mass: f64,
}

impl From<&nlqw::experiments::StabilityReport> for StabilitySummary {
    fn from(r: &nlqw::experiments::StabilityReport) -> Self {
        Self {
            status: format!("{:?}", r.status),
            rho: r.rho,
            rho_tail_variation: r.rho_tail_variation,
            z_l1: r.z_l1,
            z_last_quarter_increment: r.z_last_quarter_increment,
            eta1_converged: r.eta1.converged,
            eta_plus_converged: r.eta_plus.converged,
            eta_plus_norm: r.eta_plus_norm,
            pc_u0_norm: r.pc_u0_norm,
            final_residual: r.final_residual,
            residual_monotone_final_decade: r.residual_monotone_final_decade,
            residual_decay_exponent: r.residual_decay_exponent,
            wave_operator_horizon: r.wave_operator_horizon,
            max_boundary_mass: r.max_boundary_mass,
        }
    }
}
