//! Versioned JSON experiment configuration.

use serde::{Deserialize, Serialize};
use sparc::{ChannelSpec, Error, Result, SeConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub channel: ChannelSpec,
    #[serde(default)]
    pub code: Option<CodeConfig>,
    /// Rates to sweep; falls back to `code.rate` when absent.
    #[serde(default)]
    pub rates: Option<Vec<f64>>,
    #[serde(default)]
    pub coupling: Option<CouplingConfig>,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub decoder: Option<DecoderConfig>,
    #[serde(default)]
    pub se: Option<SeOverrides>,
    /// Bisection tolerance for threshold experiments.
    #[serde(default)]
    pub rate_tol: Option<f64>,
    /// Section sizes for threshold experiments.
    #[serde(default)]
    pub b_values: Option<Vec<usize>>,
    /// Coupling windows for the saturation sweep.
    #[serde(default)]
    pub w_values: Option<Vec<usize>>,
    /// Grid size for the potential curve.
    #[serde(default)]
    pub grid_points: Option<usize>,
    /// Master seed; the CLI `--seed` flag overrides it.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeConfig {
    pub l: usize,
    pub b: usize,
    #[serde(default)]
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub gamma: usize,
    pub w: usize,
    /// Design-function samples on the window; uniform when absent.
    #[serde(default)]
    pub design: Option<Vec<f64>>,
    /// Lipschitz constant accompanying explicit samples.
    #[serde(default)]
    pub g_star: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderConfig {
    #[serde(default)]
    pub n_iter: Option<usize>,
    #[serde(default)]
    pub stop_tol: Option<f64>,
    /// "prior" (default) or "flat".
    #[serde(default)]
    pub init: Option<GampInitName>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GampInitName {
    Prior,
    Flat,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SeOverrides {
    #[serde(default)]
    pub mc_samples: Option<usize>,
    #[serde(default)]
    pub gh_nodes: Option<usize>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path)?;
        let cfg: ExperimentConfig = serde_json::from_slice(&bytes)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Precondition(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok((cfg, bytes))
    }

    /// SE controls with overrides applied and the master seed filled in.
    pub fn se_config(&self, seed: u64) -> SeConfig {
        let mut se = SeConfig {
            master_seed: seed,
            ..Default::default()
        };
        if let Some(ov) = &self.se {
            if let Some(v) = ov.mc_samples {
                se.mc_samples = v;
            }
            if let Some(v) = ov.gh_nodes {
                se.gh_nodes = v;
            }
            if let Some(v) = ov.tol {
                se.tol = v;
            }
            if let Some(v) = ov.max_iter {
                se.max_iter = v;
            }
        }
        se
    }

    pub fn gamp_config(&self) -> sparc::GampConfig {
        let mut cfg = sparc::GampConfig::default();
        if let Some(d) = &self.decoder {
            if let Some(v) = d.n_iter {
                cfg.n_iter = v;
            }
            if let Some(v) = d.stop_tol {
                cfg.stop_tol = v;
            }
            if let Some(init) = d.init {
                cfg.init = match init {
                    GampInitName::Prior => sparc::GampInit::Prior,
                    GampInitName::Flat => sparc::GampInit::Flat,
                };
            }
        }
        cfg
    }

    pub fn rate_list(&self) -> Result<Vec<f64>> {
        if let Some(rates) = &self.rates {
            if rates.is_empty() {
                return Err(Error::Precondition("rates must not be empty".into()));
            }
            return Ok(rates.clone());
        }
        if let Some(code) = &self.code {
            if let Some(rate) = code.rate {
                return Ok(vec![rate]);
            }
        }
        Err(Error::Precondition(
            "config needs either rates or code.rate".into(),
        ))
    }

    pub fn coupling_spec(&self) -> Result<Option<sparc::CouplingSpec>> {
        match &self.coupling {
            None => Ok(None),
            Some(cc) => {
                let df = match &cc.design {
                    None => sparc::DesignFunction::uniform(cc.w),
                    Some(samples) => sparc::DesignFunction::from_samples(
                        samples.clone(),
                        cc.g_star.unwrap_or(10.0),
                    )?,
                };
                Ok(Some(sparc::code::build_design_variances(
                    &df, cc.gamma, cc.w,
                )?))
            }
        }
    }
}

/// FNV-1a over the raw config bytes and the seed; binds results to inputs.
pub fn config_hash(config_bytes: &[u8], seed: u64) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let prime: u64 = 0x1000_0000_01b3;
    for &b in config_bytes.iter().chain(seed.to_le_bytes().iter()) {
        h ^= b as u64;
        h = h.wrapping_mul(prime);
    }
    format!("{h:016x}")
}
