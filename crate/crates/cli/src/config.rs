//! Run configuration: a versioned TOML schema resolved into core objects.
//!
//! Every field has a default; the resolved configuration (defaults filled
//! in) is what gets hashed and recorded into run manifests, so a manifest
//! pins the run completely.

use anyhow::{bail, Context, Result};
use perron_core::gap::RateParams;
use perron_core::lyapunov_perron::LpConfig;
use perron_core::model::{
    parabolic_preset, BoundaryModel, LinearModel, Nonlinearity, SpectralModel,
};
use perron_core::noise::{ou_stationary, sample_brownian, BrownianPath, OuProcess, TimeGrid};
use perron_core::semigroup::{CProvider, ConvolutionPlan, Quadrature};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_schema")]
    pub schema: u32,
    pub model: ModelSpec,
    #[serde(default)]
    pub nonlinearity: NonlinearitySpec,
    pub noise: NoiseSpec,
    pub rates: RatesSpec,
    pub lp: LpSpec,
    #[serde(default)]
    pub manifold: GridSpec,
    #[serde(default)]
    pub foliation: FoliationSpec,
    #[serde(default)]
    pub verify: VerifySpec,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Stochastic-parabolic preset spectrum.
    Parabolic {
        n_modes: usize,
        epsilon_star: f64,
        gamma_star: f64,
    },
    /// Explicit eigenvalue list with trichotomy band edges.
    Spectral {
        eigenvalues: Vec<f64>,
        k: f64,
        alpha: f64,
        beta: f64,
        gamma: f64,
    },
    /// Half-line finite-difference backend with a boundary slot.
    Boundary {
        n_interior: usize,
        x_max: f64,
        center_modes: usize,
    },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    #[default]
    Zero,
    LinearCoupling { eps: f64 },
    CubicSaturated { eps: f64 },
    BilinearSaturated { eps: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_seeds")]
    pub seeds: u64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_tail")]
    pub tail_cut: f64,
}

fn default_seeds() -> u64 {
    1
}

fn default_mu() -> f64 {
    1.0
}

fn default_tail() -> f64 {
    28.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSpec {
    pub eta_cu: f64,
    pub zeta: f64,
    pub eta_cs: f64,
    pub chi: f64,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub nu: f64,
    #[serde(default = "default_order")]
    pub k: u32,
}

fn default_order() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LpSpec {
    pub t_horizon_cu: f64,
    pub t_horizon_cs: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_ladder")]
    pub lambda_ladder: Vec<f64>,
    #[serde(default = "default_quadrature")]
    pub quadrature: String,
    /// Convolution constant pinned by the user; scanned when absent.
    #[serde(default)]
    pub c_direct: Option<f64>,
    #[serde(default = "default_scan_tau0")]
    pub c_scan_tau0: f64,
    /// Replace the written shifted-denominator of the foliation continuity
    /// condition by its corrected form.
    #[serde(default)]
    pub corrected_shift: bool,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    500
}

fn default_ladder() -> Vec<f64> {
    vec![1e6, 1e8, 1e10]
}

fn default_quadrature() -> String {
    "trapezoid".into()
}

fn default_scan_tau0() -> f64 {
    1.0
}

/// Cartesian sampling grid over the center-unstable basis directions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_grid_min")]
    pub min: f64,
    #[serde(default = "default_grid_max")]
    pub max: f64,
    #[serde(default = "default_grid_points")]
    pub points: usize,
}

fn default_grid_min() -> f64 {
    -0.5
}

fn default_grid_max() -> f64 {
    0.5
}

fn default_grid_points() -> usize {
    5
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            min: default_grid_min(),
            max: default_grid_max(),
            points: default_grid_points(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoliationSpec {
    /// Anchor point in state coordinates (length = model dimension).
    #[serde(default)]
    pub anchor: Vec<f64>,
    #[serde(default)]
    pub grid: GridSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    #[serde(default = "default_verify_r")]
    pub flow_time: f64,
    #[serde(default = "default_verify_samples")]
    pub samples: usize,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default = "default_invariance_tol")]
    pub invariance_tol_steps: f64,
    #[serde(default = "default_gradient_tol")]
    pub gradient_tol: f64,
    #[serde(default = "default_oracle_tol")]
    pub oracle_tol: f64,
    #[serde(default = "default_growth_tol")]
    pub leaf_growth_tol: f64,
    #[serde(default = "default_leaf_window")]
    pub leaf_window: f64,
}

fn default_verify_r() -> f64 {
    1.0
}

fn default_verify_samples() -> usize {
    4
}

fn default_fd_step() -> f64 {
    1e-5
}

fn default_invariance_tol() -> f64 {
    10.0
}

fn default_gradient_tol() -> f64 {
    1e-4
}

fn default_oracle_tol() -> f64 {
    1e-4
}

fn default_growth_tol() -> f64 {
    0.1
}

fn default_leaf_window() -> f64 {
    10.0
}

impl Default for VerifySpec {
    fn default() -> Self {
        VerifySpec {
            flow_time: default_verify_r(),
            samples: default_verify_samples(),
            fd_step: default_fd_step(),
            invariance_tol_steps: default_invariance_tol(),
            gradient_tol: default_gradient_tol(),
            oracle_tol: default_oracle_tol(),
            leaf_growth_tol: default_growth_tol(),
            leaf_window: default_leaf_window(),
        }
    }
}

/// A config with every core object resolved.
pub struct Resolved {
    pub config: RunConfig,
    pub model: Box<dyn LinearModel + Send + Sync>,
    pub nonlinearity: Nonlinearity,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text).context("parsing config")?;
        if cfg.schema != SCHEMA_VERSION {
            bail!(
                "config schema {} unsupported (expected {SCHEMA_VERSION})",
                cfg.schema
            );
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.noise;
        if !(n.dt > 0.0) {
            bail!("noise.dt must be positive, got {}", n.dt);
        }
        if n.t_min > 0.0 || n.t_max < 0.0 {
            bail!("noise window [{}, {}] must contain 0", n.t_min, n.t_max);
        }
        if n.seeds == 0 {
            bail!("noise.seeds must be at least 1");
        }
        if !(self.lp.tol > 0.0) {
            bail!("lp.tol must be positive, got {}", self.lp.tol);
        }
        match self.lp.quadrature.as_str() {
            "trapezoid" | "midpoint" => {}
            other => bail!("lp.quadrature must be trapezoid or midpoint, got {other}"),
        }
        if self.manifold.points < 1 || self.foliation.grid.points < 1 {
            bail!("grid point counts must be at least 1");
        }
        Ok(())
    }

    /// Hash of the resolved configuration (defaults included).
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        hex_string(&hasher.finalize())
    }

    pub fn resolve(self) -> Result<Resolved> {
        let model: Box<dyn LinearModel + Send + Sync> = match &self.model {
            ModelSpec::Parabolic {
                n_modes,
                epsilon_star,
                gamma_star,
            } => Box::new(parabolic_preset(*n_modes, *epsilon_star, *gamma_star)?),
            ModelSpec::Spectral {
                eigenvalues,
                k,
                alpha,
                beta,
                gamma,
            } => Box::new(SpectralModel::new(
                eigenvalues.clone(),
                *k,
                *alpha,
                *beta,
                *gamma,
            )?),
            ModelSpec::Boundary {
                n_interior,
                x_max,
                center_modes,
            } => Box::new(BoundaryModel::new(*n_interior, *x_max, *center_modes)?),
        };
        let nonlinearity = match &self.nonlinearity {
            NonlinearitySpec::Zero => Nonlinearity::zero(),
            NonlinearitySpec::LinearCoupling { eps } => Nonlinearity::linear_coupling(*eps),
            NonlinearitySpec::CubicSaturated { eps } => Nonlinearity::cubic_saturated(*eps),
            NonlinearitySpec::BilinearSaturated { eps } => Nonlinearity::bilinear_saturated(*eps),
        };
        Ok(Resolved {
            config: self,
            model,
            nonlinearity,
        })
    }
}

impl Resolved {
    pub fn rates(&self) -> RateParams {
        let r = &self.config.rates;
        RateParams {
            eta_cu: r.eta_cu,
            zeta: r.zeta,
            eta_cs: r.eta_cs,
            chi: r.chi,
            sigma: r.sigma,
            nu: r.nu,
            k: r.k,
        }
    }

    pub fn quadrature(&self) -> Quadrature {
        match self.config.lp.quadrature.as_str() {
            "midpoint" => Quadrature::Midpoint,
            _ => Quadrature::Trapezoid,
        }
    }

    pub fn plan(&self) -> Result<ConvolutionPlan> {
        Ok(ConvolutionPlan::new(
            self.config.lp.lambda_ladder.clone(),
            self.quadrature(),
            self.config.noise.dt,
        )?)
    }

    /// Convolution-constant source: pinned value or stable-band scan.
    pub fn c_provider(&self, kappa_ref: f64) -> Result<CProvider> {
        Ok(match self.config.lp.c_direct {
            Some(v) => CProvider::direct(v)?,
            None => CProvider::for_stable_band(
                self.model.as_ref(),
                kappa_ref,
                self.config.lp.c_scan_tau0,
            )?,
        })
    }

    pub fn lp_config(&self, past: bool) -> Result<LpConfig> {
        let kappa_ref = if past {
            self.config.rates.zeta
        } else {
            self.config.rates.chi
        };
        let horizon = if past {
            self.config.lp.t_horizon_cu
        } else {
            self.config.lp.t_horizon_cs
        };
        let mut cfg = LpConfig::new(
            horizon,
            self.config.noise.dt,
            self.rates(),
            self.plan()?,
            self.config.lp.tol,
            self.config.lp.max_iter,
            self.c_provider(kappa_ref)?,
        )?;
        cfg.corrected_shift = self.config.lp.corrected_shift;
        Ok(cfg)
    }

    pub fn sample_path(&self, seed: u64) -> Result<BrownianPath> {
        let n = &self.config.noise;
        let grid = TimeGrid::new(n.t_min, n.t_max, n.dt)?;
        Ok(sample_brownian(&grid, seed))
    }

    pub fn ou(&self, seed: u64) -> Result<OuProcess> {
        let n = &self.config.noise;
        Ok(ou_stationary(
            &self.sample_path(seed)?,
            n.mu,
            n.tail_cut,
        )?)
    }
}

pub fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
