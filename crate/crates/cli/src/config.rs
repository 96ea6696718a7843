//! Versioned JSON experiment configuration.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use metastab::initgen::{
    gen_separated, gen_separated_measure, gen_well_prepared, sample_gaussian_mixture, sample_uniform_sphere,
    MeasureSpec, SeparatedSpec,
};
use metastab::metastability::{certify, validate_separated};
use metastab::{
    CapFamily, Configuration, IntegratorSpec, MeasureCertificate, ModelKind, SeparationCertificate, UnitVector,
};

use crate::error::{invalid, CliError, CliResult};
use crate::output::sha256_hex;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default = "sa")]
    pub model: ModelKind,
    pub beta: f64,
    /// Integrator settings; commands pick their own defaults when absent.
    #[serde(default)]
    pub integrator: Option<IntegratorSpec>,
    pub init: InitSpec,
    /// Seeds of the batch; `--seed` runs a single one instead.
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub caps: Option<CapPolicy>,
}

fn sa() -> ModelKind {
    ModelKind::Sa
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitSpec {
    Uniform {
        dim: usize,
        n: usize,
    },
    Separated {
        dim: usize,
        n: usize,
        k: usize,
        eps: f64,
        #[serde(default)]
        centers: Option<Vec<UnitVector>>,
    },
    GaussianMixture {
        n: usize,
        r: f64,
        sigma: f64,
        centers: Vec<UnitVector>,
    },
    WellPrepared {
        n: usize,
        c0: f64,
    },
    SeparatedMeasure {
        dim: usize,
        k: usize,
        eps: f64,
        atoms_per_cap: usize,
        #[serde(default)]
        centers: Option<Vec<UnitVector>>,
    },
    /// A configuration document written by `sample-init`.
    File {
        path: PathBuf,
    },
}

/// Cap height and contraction rate used by the certificate checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapPolicy {
    /// Needed when the initialization does not fix it.
    #[serde(default)]
    pub eps: Option<f64>,
    /// Fixed `lambda`; the midpoint of the admissible window when absent.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Explicit caps for `file` and `uniform` initializations; discovered when absent.
    #[serde(default)]
    pub centers: Option<Vec<UnitVector>>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.schema != SCHEMA_VERSION {
            return invalid(format!("unsupported schema {} (expected {SCHEMA_VERSION})", self.schema));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return invalid(format!("beta = {} must be positive", self.beta));
        }
        if let Some(spec) = &self.integrator {
            spec.validate()?;
        }
        Ok(())
    }

    /// Hash of the canonical serialization, independent of whitespace and key order.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }

    /// `--seed` wins over the configured batch; a lone seed 0 otherwise.
    pub fn seeds(&self, seed: Option<u64>) -> Vec<u64> {
        match seed {
            Some(s) => vec![s],
            None if self.seeds.is_empty() => vec![0],
            None => self.seeds.clone(),
        }
    }
}

/// Initial state plus whatever certificate the generator produced.
pub struct Initial {
    pub config: Configuration,
    pub cert: Option<SeparationCertificate>,
    pub measure_cert: Option<MeasureCertificate>,
}

pub fn build_initial(cfg: &ExperimentConfig, seed: u64) -> CliResult<Initial> {
    let beta = cfg.beta;
    let plain = |config| Initial { config, cert: None, measure_cert: None };
    let init = match &cfg.init {
        InitSpec::Uniform { dim, n } => plain(sample_uniform_sphere(*dim, *n, seed)?),
        InitSpec::Separated { dim, n, k, eps, centers } => {
            let spec = SeparatedSpec { dim: *dim, n: *n, k: *k, eps: *eps, beta, centers: centers.clone() };
            let (config, cert) = gen_separated(&spec, seed)?;
            Initial { config, cert: Some(cert), measure_cert: None }
        }
        InitSpec::GaussianMixture { n, r, sigma, centers } => {
            plain(sample_gaussian_mixture(centers, *r, *sigma, *n, seed)?.0)
        }
        InitSpec::WellPrepared { n, c0 } => plain(gen_well_prepared(*n, *c0)?.to_configuration()?),
        InitSpec::SeparatedMeasure { dim, k, eps, atoms_per_cap, centers } => {
            let spec = MeasureSpec {
                dim: *dim,
                k: *k,
                eps: *eps,
                beta,
                atoms_per_cap: *atoms_per_cap,
                centers: centers.clone(),
            };
            let (config, cert) = gen_separated_measure(&spec, seed)?;
            Initial { config, cert: None, measure_cert: Some(cert) }
        }
        InitSpec::File { path } => {
            let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
            let config: Configuration =
                serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
            plain(config)
        }
    };
    Ok(init)
}

/// Separation certificate for a metastability run: the generator's, or one
/// checked against the configured caps, or one found by cluster discovery.
pub fn certificate(cfg: &ExperimentConfig, init: &Initial) -> CliResult<SeparationCertificate> {
    if let Some(c) = &init.cert {
        return Ok(c.clone());
    }
    let policy = cfg.caps.as_ref();
    let Some(eps) = policy.and_then(|p| p.eps) else {
        return invalid("caps.eps is required unless the initialization is `separated`");
    };
    match policy.and_then(|p| p.centers.clone()) {
        Some(centers) => Ok(certify(&init.config, &CapFamily::new(centers, eps)?, cfg.beta)?),
        None => Ok(validate_separated(&init.config, eps, cfg.beta)?),
    }
}
