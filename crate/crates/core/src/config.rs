//! TOML experiment configuration. Unknown keys are rejected.
//!
//! ```toml
//! [model]
//! preset = "kls-origin"        # or: coin_csv = "coin.csv"
//! window = 96                  # half width of the bound-state window
//!
//! [nonlinearity]
//! c = 1.0
//! p = 3
//! gamma = "sigma3"             # sigma3 | sigma1 | identity
//!
//! [lattice]
//! half_width = 2048
//!
//! [run]
//! steps = 4000                 # double steps
//! seed = 1
//! out_dir = "out"
//!
//! [recipe]
//! kind = "mixed"               # bound_state | continuous_only | mixed | snapshot
//! z = [0.03, 0.0]
//! eps = 0.05
//! width = 8.0
//!
//! [tolerances]
//! wrap = 1e-8
//! newton = 1e-11
//! cauchy = 5e-3                # relative to the initial norm
//! resolution = 5e-3
//! wrap_mode = "abort"          # abort | warn
//! ```

use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LatticeGrid, ONE, ZERO};
use crate::walk::{CoinField, Monomial, Nonlinearity, Preset};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub nonlinearity: NonlinearityConfig,
    #[serde(default)]
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub recipe: Recipe,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub coin_csv: Option<PathBuf>,
    #[serde(default = "default_window")]
    pub window: usize,
}

fn default_window() -> usize {
    96
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { preset: Some("kls-origin".into()), coin_csv: None, window: default_window() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaChoice {
    Sigma3,
    Sigma1,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub c: f64,
    pub p: u32,
    pub gamma: GammaChoice,
}

impl Default for NonlinearityConfig {
    fn default() -> Self {
        Self { c: 1.0, p: 3, gamma: GammaChoice::Sigma3 }
    }
}

impl NonlinearityConfig {
    pub fn build(&self) -> Result<Nonlinearity> {
        let g = Monomial::new(self.c, self.p)?;
        let gamma = match self.gamma {
            GammaChoice::Sigma3 => [[ONE, ZERO], [ZERO, -ONE]],
            GammaChoice::Sigma1 => [[ZERO, ONE], [ONE, ZERO]],
            GammaChoice::Identity => [[ONE, ZERO], [ZERO, ONE]],
        };
        Nonlinearity::new(gamma, g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub half_width: usize,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self { half_width: 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub steps: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { steps: 1000, seed: 1, out_dir: PathBuf::from("out") }
    }
}

/// Initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Recipe {
    /// `Phi_+[z]`.
    BoundState {
        z: [f64; 2],
    },
    /// Gaussian-enveloped random spinor of width `width`, projected by `P_+`
    /// and `P_c`, renormalized to `eps`.
    ContinuousOnly {
        eps: f64,
        #[serde(default = "default_width")]
        width: f64,
    },
    /// `Phi_+[z]` plus the continuous profile.
    Mixed {
        z: [f64; 2],
        eps: f64,
        #[serde(default = "default_width")]
        width: f64,
    },
    Snapshot {
        path: PathBuf,
    },
}

fn default_width() -> f64 {
    8.0
}

impl Default for Recipe {
    fn default() -> Self {
        Recipe::Mixed { z: [0.03, 0.0], eps: 0.05, width: default_width() }
    }
}

impl Recipe {
    pub fn z(&self) -> Option<C64> {
        match self {
            Recipe::BoundState { z } | Recipe::Mixed { z, .. } => Some(C64::new(z[0], z[1])),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WrapMode {
    Abort,
    Warn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub wrap: f64,
    pub newton: f64,
    pub cauchy: f64,
    pub resolution: f64,
    pub wrap_mode: WrapMode,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { wrap: 1e-8, newton: 1e-11, cauchy: 5e-3, resolution: 5e-3, wrap_mode: WrapMode::Abort }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::Config { path: origin.to_path_buf(), message: e.to_string() })?;
        cfg.validate(origin)?;
        Ok(cfg)
    }

    pub fn validate(&self, origin: &Path) -> Result<()> {
        let bad = |m: String| Error::Config { path: origin.to_path_buf(), message: m };
        if self.lattice.half_width == 0 || self.run.steps == 0 {
            return Err(bad("half_width and steps must be positive".into()));
        }
        if self.model.window == 0 || self.model.window > self.lattice.half_width {
            return Err(bad(format!("window {} must be in 1..={}", self.model.window, self.lattice.half_width)));
        }
        match (&self.model.preset, &self.model.coin_csv) {
            (Some(p), None) => {
                Preset::from_name(p).map_err(|e| bad(e.to_string()))?;
            }
            (None, Some(path)) => {
                if !path.exists() {
                    return Err(bad(format!("coin file {} does not exist", path.display())));
                }
            }
            _ => return Err(bad("exactly one of model.preset and model.coin_csv is required".into())),
        }
        match &self.recipe {
            Recipe::ContinuousOnly { eps, width } | Recipe::Mixed { eps, width, .. } => {
                if !(*eps >= 0.0 && *width > 0.0) {
                    return Err(bad(format!("need eps >= 0 and width > 0, got eps = {eps}, width = {width}")));
                }
            }
            Recipe::Snapshot { path } => {
                if !path.exists() {
                    return Err(bad(format!("snapshot {} does not exist", path.display())));
                }
            }
            Recipe::BoundState { .. } => {}
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<LatticeGrid> {
        LatticeGrid::new(self.lattice.half_width)
    }

    pub fn window_grid(&self) -> Result<LatticeGrid> {
        LatticeGrid::new(self.model.window)
    }

    /// The coin on a given grid. A CSV coin is extended by its outermost sites.
    pub fn coin_on(&self, grid: LatticeGrid) -> Result<CoinField> {
        match (&self.model.preset, &self.model.coin_csv) {
            (Some(p), _) => Preset::from_name(p)?.coin(grid),
            (None, Some(path)) => Ok(CoinField::read_csv(std::fs::File::open(path)?)?.resized(grid)),
            _ => Err(Error::InvalidArgument("no coin configured".into())),
        }
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config { path: path.to_path_buf(), message: e.to_string() })?;
    ExperimentConfig::from_toml(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let c = ExperimentConfig::from_toml("", Path::new("x.toml")).unwrap();
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn unknown_key_is_named() {
        let e = ExperimentConfig::from_toml(
            "[run]\nsteps = 3\nseed = 1\nout_dir = \"o\"\nbogus = 1\n",
            Path::new("x.toml"),
        )
        .unwrap_err()
        .to_string();
        assert!(e.contains("bogus"), "{e}");
        let e = ExperimentConfig::from_toml(
            "[recipe]\nkind = \"bound_state\"\nz = [0.1, 0.0]\nextra = 2\n",
            Path::new("x.toml"),
        )
        .unwrap_err()
        .to_string();
        assert!(e.contains("extra"), "{e}");
    }

    #[test]
    fn parse_errors_carry_position() {
        let e = ExperimentConfig::from_toml("[lattice]\nhalf_width = \"a\"\n", Path::new("x.toml"))
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 2"), "{e}");
    }
}
