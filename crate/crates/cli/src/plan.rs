//! Experiment manifests.
//!
//! A plan is a TOML file naming one experiment, its world, the privacy
//! levels to sweep and the replicate count:
//!
//! ```toml
//! experiment = "histogram"
//! replicates = 50
//! seed = 1
//! eps = [1.0, 2.0, 4.0]
//!
//! [histogram]
//! d = 1000
//! n = 2000
//! m = 200
//! clusters = [1, 10, 100, 1000]
//! p = { law = "zipf", exponent = 1.0, offset = 100 }
//! ```
//!
//! `delta` defaults to `n^-1.1` with `n` the number of users in the world.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{config, CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    HeavyHitters,
    Histogram,
    SgdSim,
    Account,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Privacy {
    Element,
    User,
    None,
}

impl fmt::Display for Privacy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Privacy::Element => "element",
            Privacy::User => "user",
            Privacy::None => "none",
        })
    }
}

/// Item probability law over `d` items (index `j = 0..d`).
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum ProbLaw {
    Uniform,
    /// `p_j` proportional to `d - j`.
    Linear,
    /// `p_j` proportional to `(j + 1 + offset)^-exponent`; `offset` drops
    /// that many head ranks.
    Zipf {
        #[serde(default = "one")]
        exponent: f64,
        #[serde(default)]
        offset: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl ProbLaw {
    pub fn probabilities(&self, d: usize) -> Result<Vec<f64>> {
        if d == 0 {
            return config("d must be positive");
        }
        let w: Vec<f64> = match *self {
            ProbLaw::Uniform => vec![1.0; d],
            ProbLaw::Linear => (0..d).map(|j| (d - j) as f64).collect(),
            ProbLaw::Zipf { exponent, offset } => {
                if !(exponent >= 0.0) || !(offset >= 0.0) {
                    return config("zipf exponent and offset must be nonnegative");
                }
                (0..d).map(|j| (j as f64 + 1.0 + offset).powf(-exponent)).collect()
            }
        };
        let total: f64 = w.iter().sum();
        Ok(w.into_iter().map(|x| x / total).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionRule {
    /// Balanced clusters over a seeded random permutation of the items.
    #[default]
    Random,
    /// Contiguous blocks in item order.
    Contiguous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SubsampleMode {
    #[default]
    Poisson,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct HeavyHittersWorld {
    pub d: usize,
    pub n: usize,
    pub m: u64,
    pub p: ProbLaw,
    /// Target in the separation threshold; defaults to `ceil(d / 10)`.
    pub t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct HistogramWorld {
    pub d: usize,
    pub n: usize,
    pub m: u64,
    pub p: ProbLaw,
    pub clusters: Vec<usize>,
    #[serde(default)]
    pub partition: PartitionRule,
    #[serde(default)]
    pub partition_seed: u64,
    #[serde(default = "default_rho_grid")]
    pub rho_grid: Vec<f64>,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
}

/// `{1..10} ∪ {15, 20, .., 50} ∪ {70, 100, 150, 200}`.
pub fn default_rho_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (1..=10).map(f64::from).collect();
    g.extend((15..=50).step_by(5).map(f64::from));
    g.extend([70.0, 100.0, 150.0, 200.0]);
    g
}

fn default_validation_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SgdWorld {
    pub dim: usize,
    pub clusters: usize,
    pub n: usize,
    pub m_user: usize,
    pub coverage: Vec<usize>,
    pub iterations: usize,
    pub beta: f64,
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Clip radius; defaults to the loss's Lipschitz constant.
    pub rho: Option<f64>,
    /// Candidate sampling rates; more than one triggers tuning.
    pub q: Vec<f64>,
    /// Candidate initial stepsizes; more than one triggers tuning.
    pub alpha0: Vec<f64>,
    #[serde(default)]
    pub tune_replicates: usize,
    #[serde(default = "one")]
    pub noise_radius: f64,
    #[serde(default)]
    pub subsample: SubsampleMode,
    /// Fixed element-level noise multiplier, used instead of an `eps` grid.
    pub sigma: Option<f64>,
}

fn default_radius() -> f64 {
    5.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccountMechanism {
    Gaussian,
    SubsampledGaussian,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct AccountStep {
    pub mechanism: AccountMechanism,
    #[serde(default = "one")]
    pub q: f64,
    pub sigma: f64,
    #[serde(rename = "T", default = "one_u64")]
    pub t: u64,
    /// L2 sensitivity for the plain Gaussian mechanism.
    #[serde(default = "one")]
    pub sensitivity: f64,
}

fn one_u64() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct AccountPlan {
    #[serde(rename = "step")]
    pub steps: Vec<AccountStep>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentPlan {
    pub experiment: ExperimentKind,
    #[serde(default = "one_usize")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub eps: Vec<f64>,
    pub delta: Option<f64>,
    #[serde(default)]
    pub privacy: Vec<Privacy>,
    pub out: Option<PathBuf>,
    /// Fill the wall-time column of SGD rows.
    #[serde(default)]
    pub timing: bool,
    pub heavy_hitters: Option<HeavyHittersWorld>,
    pub histogram: Option<HistogramWorld>,
    pub sgd: Option<SgdWorld>,
    pub account: Option<AccountPlan>,
}

fn one_usize() -> usize {
    1
}

impl ExperimentPlan {
    pub fn from_toml(text: &str, name: &str) -> Result<Self> {
        let plan: ExperimentPlan = toml::from_str(text).map_err(|e| CliError::Config(format!("{name}: {e}")))?;
        plan.validate().map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{name}: {msg}")),
            other => other,
        })?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    /// Number of users the `delta = n^-1.1` rule refers to.
    pub fn users(&self) -> Option<usize> {
        match self.experiment {
            ExperimentKind::HeavyHitters => self.heavy_hitters.as_ref().map(|w| w.n),
            ExperimentKind::Histogram => self.histogram.as_ref().map(|w| w.n),
            ExperimentKind::SgdSim => self.sgd.as_ref().map(|w| w.n),
            ExperimentKind::Account => None,
        }
    }

    pub fn delta(&self) -> Result<f64> {
        match (self.delta, self.users()) {
            (Some(d), _) => Ok(d),
            (None, Some(n)) => Ok((n as f64).powf(-1.1)),
            (None, None) => config("delta: required for this experiment"),
        }
    }

    /// Privacy modes to run; element-level when none are listed.
    pub fn privacy_modes(&self) -> Vec<Privacy> {
        if self.privacy.is_empty() {
            vec![Privacy::Element]
        } else {
            self.privacy.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return config("replicates: must be at least 1");
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d < 1.0) {
                return config(format!("delta: must lie in (0, 1), got {d}"));
            }
        }
        if let Some(e) = self.eps.iter().find(|&&e| !(e > 0.0) || !e.is_finite()) {
            return config(format!("eps: values must be positive and finite, got {e}"));
        }
        let sections = [
            ("heavy-hitters", self.heavy_hitters.is_some(), ExperimentKind::HeavyHitters),
            ("histogram", self.histogram.is_some(), ExperimentKind::Histogram),
            ("sgd", self.sgd.is_some(), ExperimentKind::SgdSim),
            ("account", self.account.is_some(), ExperimentKind::Account),
        ];
        for (name, present, kind) in sections {
            if present != (kind == self.experiment) {
                return if present {
                    config(format!("[{name}]: section does not belong to this experiment"))
                } else {
                    config(format!("[{name}]: section missing"))
                };
            }
        }
        let private = self.privacy_modes().iter().any(|&p| p != Privacy::None);
        match self.experiment {
            ExperimentKind::HeavyHitters => {
                let w = self.heavy_hitters.as_ref().expect("checked");
                positive("heavy-hitters.d", w.d)?;
                positive("heavy-hitters.n", w.n)?;
                positive("heavy-hitters.m", w.m as usize)?;
                if let Some(t) = w.t {
                    if !(t > 0.0 && t <= w.d as f64) {
                        return config(format!("heavy-hitters.t: must lie in (0, d], got {t}"));
                    }
                }
                if private && self.eps.is_empty() {
                    return config("eps: at least one privacy level is required");
                }
            }
            ExperimentKind::Histogram => {
                let w = self.histogram.as_ref().expect("checked");
                positive("histogram.d", w.d)?;
                positive("histogram.m", w.m as usize)?;
                if w.n < 2 {
                    return config("histogram.n: need at least two users to split");
                }
                if w.clusters.is_empty() || w.clusters.iter().any(|&k| k == 0 || k > w.d) {
                    return config(format!("histogram.clusters: values must lie in 1..={}", w.d));
                }
                if w.rho_grid.is_empty() || w.rho_grid.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
                    return config("histogram.rho-grid: values must be positive and finite");
                }
                let f = w.validation_fraction;
                if !(0.0..1.0).contains(&f) {
                    return config(format!("histogram.validation-fraction: must lie in [0, 1), got {f}"));
                }
                if f == 0.0 && w.rho_grid.len() > 1 {
                    return config("histogram.validation-fraction: zero leaves no data to choose rho");
                }
                if self.privacy.iter().any(|&p| p != Privacy::Element) {
                    return config("privacy: histogram runs element-level cells; K = 1 is the user-level baseline");
                }
                if self.eps.is_empty() {
                    return config("eps: at least one privacy level is required");
                }
            }
            ExperimentKind::SgdSim => {
                let w = self.sgd.as_ref().expect("checked");
                positive("sgd.dim", w.dim)?;
                positive("sgd.clusters", w.clusters)?;
                positive("sgd.n", w.n)?;
                positive("sgd.iterations", w.iterations)?;
                if w.coverage.is_empty() || w.coverage.iter().any(|&k| k == 0 || k > w.clusters || k > w.m_user) {
                    return config("sgd.coverage: values must lie in 1..=min(clusters, m-user)");
                }
                if !(w.beta > 0.5 && w.beta < 1.0) {
                    return config(format!("sgd.beta: must lie in (1/2, 1), got {}", w.beta));
                }
                if w.q.is_empty() || w.q.iter().any(|&q| !(q > 0.0 && q <= 1.0)) {
                    return config("sgd.q: values must lie in (0, 1]");
                }
                if w.alpha0.is_empty() || w.alpha0.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
                    return config("sgd.alpha0: values must be positive");
                }
                if (w.q.len() > 1 || w.alpha0.len() > 1) && w.tune_replicates == 0 {
                    return config("sgd.tune-replicates: needed to choose among several q or alpha0");
                }
                if let Some(r) = w.rho {
                    if !(r > 0.0) || !r.is_finite() {
                        return config("sgd.rho: must be positive");
                    }
                }
                if !(w.radius > 0.0) || !(w.noise_radius >= 0.0) {
                    return config("sgd.radius and sgd.noise-radius: must be positive");
                }
                if private {
                    match (self.eps.is_empty(), w.sigma) {
                        (true, None) => return config("eps: give privacy levels or sgd.sigma"),
                        (false, Some(_)) => return config("sgd.sigma: cannot be combined with an eps grid"),
                        (true, Some(s)) if !(s > 0.0) || !s.is_finite() => {
                            return config("sgd.sigma: must be positive and finite")
                        }
                        _ => {}
                    }
                }
            }
            ExperimentKind::Account => {
                let a = self.account.as_ref().expect("checked");
                if a.steps.is_empty() {
                    return config("account.step: at least one step is required");
                }
                if self.delta.is_none() {
                    return config("delta: required for accounting");
                }
                for (i, s) in a.steps.iter().enumerate() {
                    if !(s.sigma > 0.0) || !(s.q > 0.0 && s.q <= 1.0) || s.t == 0 || !(s.sensitivity >= 0.0) {
                        return config(format!("account.step[{i}]: need sigma > 0, q in (0, 1], T >= 1"));
                    }
                }
            }
        }
        Ok(())
    }
}

fn positive(field: &str, v: usize) -> Result<()> {
    if v == 0 {
        return config(format!("{field}: must be positive"));
    }
    Ok(())
}
