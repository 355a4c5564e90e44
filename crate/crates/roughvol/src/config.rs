//! Experiment manifests.
//!
//! ```toml
//! model = "general"
//! hurst = [0.1, 0.3]
//! eta = [1.0]
//! n = [12, 13, 14, 15, 16]
//! oversample = 4
//! replications = 200
//! base_seed = 1
//!
//! [bounds]
//! h_minus = 0.1
//! h_plus = 0.5
//! eta_minus = 0.25
//! eta_plus = 4.0
//! ```

use std::path::{Path, PathBuf};

use roughvol_core::estimators::EstimatorConfig;
use roughvol_core::kappa::choose_s;
use roughvol_core::quadrature::QuadSpec;
use roughvol_core::{ModelKind, ParamBounds};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};

/// Largest fine-grid exponent a simulation may use.
pub const MAX_GRID_EXP: u32 = 24;

mod model_kind {
    use roughvol_core::ModelKind;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(kind: &ModelKind, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(kind.as_str())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ModelKind, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub h_minus: f64,
    pub h_plus: f64,
    pub eta_minus: f64,
    pub eta_plus: f64,
}

/// Overrides of the estimator defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    pub nu0: Option<f64>,
    pub order: Option<usize>,
    pub m_opt: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KappaSection {
    /// Spacing of the Hurst grid of the table.
    pub spacing: f64,
    pub quad_order: usize,
    pub quad_levels: usize,
    pub quad_interior: usize,
}

impl Default for KappaSection {
    fn default() -> Self {
        let q = QuadSpec::DEFAULT;
        Self { spacing: 0.02, quad_order: q.order, quad_levels: q.levels, quad_interior: q.interior }
    }
}

impl KappaSection {
    pub fn quad(&self) -> QuadSpec {
        QuadSpec { order: self.quad_order, levels: self.quad_levels, interior: self.quad_interior }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub kappa_cache: Option<PathBuf>,
    /// Record per-replication wall time; with `false` the `wall_ms` column
    /// is zero and repeated runs give identical files.
    pub timing: bool,
    pub svg: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("results"), kappa_cache: None, timing: true, svg: true }
    }
}

fn one() -> usize {
    1
}

/// A Monte Carlo experiment: every `(H, eta)` pair of the grid is run at
/// every sample-size exponent with `replications` seeds
/// `base_seed + rep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(with = "model_kind")]
    pub model: ModelKind,
    pub hurst: Vec<f64>,
    pub eta: Vec<f64>,
    /// Sample-size exponents `N` (`n = 2^N`), strictly increasing.
    pub n: Vec<u32>,
    /// Volatility grid exponent of the piecewise model.
    #[serde(default)]
    pub vol_exp: Option<u32>,
    /// Fine steps per observation interval (general model).
    #[serde(default = "one")]
    pub oversample: usize,
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    pub bounds: BoundsSection,
    #[serde(default)]
    pub estimator: EstimatorSection,
    #[serde(default)]
    pub kappa: KappaSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// Shape of the kappa table an experiment needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaRequirement {
    pub h_lo: f64,
    pub h_hi: f64,
    pub spacing: f64,
    pub p_max: u32,
    pub order: usize,
    pub quad: QuadSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn bounds(&self) -> Result<ParamBounds> {
        let b = self.bounds;
        let bounds = ParamBounds::new(b.h_minus, b.h_plus, b.eta_minus, b.eta_plus)?;
        bounds.validate_for(self.model)?;
        Ok(bounds)
    }

    pub fn estimator_config(&self) -> Result<EstimatorConfig> {
        let mut config = EstimatorConfig::for_model(self.model, self.bounds()?)?;
        if let Some(nu0) = self.estimator.nu0 {
            config.nu0 = nu0;
        }
        if let Some(order) = self.estimator.order {
            config.order = order;
        }
        if let Some(m) = self.estimator.m_opt {
            config.m_opt = m;
        }
        config.validate()?;
        Ok(config)
    }

    /// `None` for the piecewise model, which needs no constants.
    pub fn kappa_requirement(&self) -> Result<Option<KappaRequirement>> {
        if self.model == ModelKind::Piecewise {
            return Ok(None);
        }
        let b = self.bounds()?;
        let order = match self.estimator.order {
            Some(s) => s,
            None => choose_s(b.h_minus, b.h_plus)?,
        };
        let n_max = *self.n.last().ok_or_else(|| Error::Config("empty N list".into()))?;
        Ok(Some(KappaRequirement {
            h_lo: b.h_minus,
            h_hi: b.h_plus,
            spacing: self.kappa.spacing,
            p_max: n_max - 1,
            order,
            quad: self.kappa.quad(),
        }))
    }

    pub fn validate(&self) -> Result<()> {
        let bounds = self.bounds()?;
        if self.hurst.is_empty() || self.eta.is_empty() || self.n.is_empty() {
            return Err(Error::Config("hurst, eta and n must be non-empty".into()));
        }
        for &h in &self.hurst {
            for &eta in &self.eta {
                if !bounds.contains(h, eta) {
                    return Err(Error::Config(format!("grid point (H={h}, eta={eta}) outside the bounds")));
                }
            }
        }
        if self.n.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("N list must be strictly increasing".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        let n_min = self.n[0];
        let n_max = self.n[self.n.len() - 1];
        match self.model {
            ModelKind::Piecewise => {
                let v = self.vol_exp.ok_or_else(|| Error::Config("piecewise model needs vol_exp".into()))?;
                if v < 3 || v > n_min {
                    return Err(Error::Config(format!("vol_exp={v} must lie in 3..={n_min}")));
                }
                if n_max > MAX_GRID_EXP {
                    return Err(Error::Config(format!("N={n_max} exceeds {MAX_GRID_EXP}")));
                }
            }
            ModelKind::General => {
                if !self.oversample.is_power_of_two() {
                    return Err(Error::Config(format!("oversample={} is not a power of two", self.oversample)));
                }
                if n_min < 3 {
                    return Err(Error::Config(format!("N={n_min} too small")));
                }
                let fine = n_max + self.oversample.trailing_zeros();
                if fine > MAX_GRID_EXP {
                    return Err(Error::Config(format!("fine grid 2^{fine} exceeds 2^{MAX_GRID_EXP}")));
                }
            }
        }
        if !(self.kappa.spacing > 0.0) {
            return Err(Error::Config("kappa spacing must be positive".into()));
        }
        self.estimator_config()?;
        Ok(())
    }
}
