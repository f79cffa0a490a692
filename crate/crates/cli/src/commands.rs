//! Subcommand definitions and handlers.
//!
//! Commands that take many flags also accept `--config FILE`, a TOML table
//! whose keys are the flag names; flags given on the command line win.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use eldp::accountant::gaussian_sigma_squared;
use eldp::mechanisms::{heavy_hitters, histogram_mechanism, indicator_sensitivity, user_level_hh_sigma};
use eldp::partition::ElementPartition;
use eldp::rng::{stream_rng, STREAM_NOISE};
use eldp::simdata::{gen_logistic, gen_multinomial, LogisticWorld, MultinomialWorld};

use crate::error::{config, CliError, Result};
use crate::experiments::{build_partition, run_plan, run_sgd_on_data};
use crate::io::{
    output, read_counts, read_pairs, read_partition, read_vector, write_counts, write_pairs, write_partition,
    write_vector, CountsTable,
};
use crate::plan::{ExperimentKind, ExperimentPlan, PartitionRule, Privacy, ProbLaw, SgdWorld, SubsampleMode};
use crate::summary::summarize_csv;

#[derive(Debug, Parser)]
#[command(name = "eldp", version, about = "Element-level differential privacy: releases, accounting and simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compose the mechanisms of an account plan and print (eps, delta, alpha).
    Account(AccountArgs),
    /// Release noisy presence counts (sums of per-user item indicators).
    HeavyHitters(ReleaseArgs),
    /// Release the per-cluster projected mean count histogram.
    Histogram(ReleaseArgs),
    /// Private SGD on simulated (or supplied) logistic data.
    SgdSim(SgdSimArgs),
    /// Write synthetic data files.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Run an experiment plan and write its result table.
    RunPlan(RunPlanArgs),
    /// Mean and 1.64-stderr intervals per cell of a result table.
    Summarize(SummarizeArgs),
}

#[derive(Debug, Args)]
pub struct AccountArgs {
    /// Plan file with `experiment = "account"` and `[[account.step]]` entries.
    pub plan: PathBuf,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

macro_rules! merge_fields {
    ($a:expr, $b:expr; $($f:ident),*) => {
        $( if $a.$f.is_none() { $a.$f = $b.$f; } )*
    };
}

fn load_config<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
        }
    }
}

#[derive(Debug, Args, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ReleaseArgs {
    /// TOML file of flag values.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Counts CSV: header of item ids, one row per user.
    #[arg(long)]
    pub counts: Option<PathBuf>,
    /// Partition file: `item_id<TAB>cluster_index` (1-based).
    #[arg(long)]
    pub partition: Option<PathBuf>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Defaults to n^-1.1.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Projection radius (histogram) or sensitivity override (heavy hitters).
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub privacy: Option<Privacy>,
    /// Output CSV; the budget goes to `<out>.budget`. Stdout and stderr
    /// when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ReleaseArgs {
    fn resolved(mut self) -> Result<Self> {
        let file: ReleaseArgs = load_config(self.config.as_deref())?;
        merge_fields!(self, file; counts, partition, eps, delta, rho, seed, privacy, out);
        Ok(self)
    }
}

#[derive(Debug, Args, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SgdSimArgs {
    /// TOML file of flag values.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Points per user.
    #[arg(long)]
    pub m: Option<usize>,
    /// Number of clusters (elements).
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub k_per_user: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Defaults to n^-1.1.
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    /// Element-level noise multiplier, instead of `--eps`.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub alpha0: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub privacy: Option<Privacy>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Radius of the parameter ball.
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, value_enum)]
    pub subsample: Option<SubsampleMode>,
    /// Fill the wall-time column.
    #[arg(long)]
    #[serde(default)]
    pub timing: bool,
    /// Labeled pairs CSV to train on instead of simulating.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// True parameter for `--data` (index,value CSV).
    #[arg(long)]
    pub theta_star: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SgdSimArgs {
    fn resolved(mut self) -> Result<Self> {
        let file: SgdSimArgs = load_config(self.config.as_deref())?;
        merge_fields!(self, file; n, m, clusters, k_per_user, dim, eps, delta, q, sigma, rho, alpha0, beta,
            iterations, seed, privacy, replicates, radius, subsample, data, theta_star, out);
        self.timing |= file.timing;
        Ok(self)
    }

    fn plan(&self) -> ExperimentPlan {
        let privacy = self.privacy.unwrap_or(Privacy::Element);
        let private = privacy != Privacy::None;
        ExperimentPlan {
            experiment: ExperimentKind::SgdSim,
            replicates: self.replicates.unwrap_or(1),
            seed: self.seed.unwrap_or(0),
            eps: if private { self.eps.into_iter().collect() } else { vec![] },
            delta: self.delta,
            privacy: vec![privacy],
            out: self.out.clone(),
            timing: self.timing,
            heavy_hitters: None,
            histogram: None,
            sgd: Some(SgdWorld {
                dim: self.dim.unwrap_or(10),
                clusters: self.clusters.unwrap_or(10),
                n: self.n.unwrap_or(1000),
                m_user: self.m.unwrap_or(50),
                coverage: vec![self.k_per_user.unwrap_or(5)],
                iterations: self.iterations.unwrap_or(200),
                beta: self.beta.unwrap_or(0.55),
                radius: self.radius.unwrap_or(5.0),
                rho: self.rho,
                q: vec![self.q.unwrap_or(0.1)],
                alpha0: vec![self.alpha0.unwrap_or(1.0)],
                tune_replicates: 0,
                noise_radius: 1.0,
                subsample: self.subsample.unwrap_or_default(),
                sigma: if private { self.sigma } else { None },
            }),
            account: None,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum GenCommand {
    /// Multinomial count vectors (and optionally a partition file).
    Multinomial(GenMultinomialArgs),
    /// Labeled pairs from the clustered logistic model.
    Logistic(GenLogisticArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LawName {
    Uniform,
    Linear,
    Zipf,
}

#[derive(Debug, Args)]
pub struct GenMultinomialArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: u64,
    #[arg(long)]
    pub d: usize,
    #[arg(long, value_enum, default_value = "zipf")]
    pub law: LawName,
    #[arg(long, default_value_t = 1.0)]
    pub exponent: f64,
    #[arg(long, default_value_t = 0.0)]
    pub offset: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a partition into this many clusters.
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long, default_value = "random")]
    pub partition_rule: String,
    #[arg(long, default_value_t = 0)]
    pub partition_seed: u64,
    #[arg(long)]
    pub partition_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenLogisticArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long = "K")]
    pub clusters: usize,
    #[arg(long)]
    pub k_per_user: usize,
    #[arg(long)]
    pub dim: usize,
    #[arg(long, default_value_t = 1.0)]
    pub noise_radius: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub theta_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunPlanArgs {
    pub plan: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fill the wall-time column of SGD rows.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    /// Result CSV.
    pub input: PathBuf,
    /// Grouping columns.
    #[arg(long, value_delimiter = ',')]
    pub by: Vec<String>,
    /// Columns to summarize.
    #[arg(long, value_delimiter = ',', required = true)]
    pub value: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Account(a) => account(a),
        Command::HeavyHitters(a) => release(a.resolved()?, Release::HeavyHitters),
        Command::Histogram(a) => release(a.resolved()?, Release::Histogram),
        Command::SgdSim(a) => sgd_sim(a.resolved()?),
        Command::Gen(GenCommand::Multinomial(a)) => gen_multinomial_files(a),
        Command::Gen(GenCommand::Logistic(a)) => gen_logistic_files(a),
        Command::RunPlan(a) => run_plan_file(a),
        Command::Summarize(a) => {
            let input = File::open(&a.input).map_err(|e| CliError::io(&a.input, e))?;
            summarize_csv(input, &a.by, &a.value, output(a.out.as_deref())?)
        }
    }
}

fn account(a: AccountArgs) -> Result<()> {
    let mut plan = ExperimentPlan::load(&a.plan)?;
    if plan.experiment != ExperimentKind::Account {
        return config(format!("{}: not an account plan", a.plan.display()));
    }
    if a.delta.is_some() {
        plan.delta = a.delta;
    }
    let out = a.out.or(plan.out.clone());
    run_plan(&plan)?.write_csv(output(out.as_deref())?)
}

fn run_plan_file(a: RunPlanArgs) -> Result<()> {
    let mut plan = ExperimentPlan::load(&a.plan)?;
    if let Some(s) = a.seed {
        plan.seed = s;
    }
    if let Some(r) = a.replicates {
        plan.replicates = r;
    }
    plan.timing |= a.timing;
    let out = a.out.or(plan.out.clone());
    run_plan(&plan)?.write_csv(output(out.as_deref())?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Release {
    HeavyHitters,
    Histogram,
}

fn release(a: ReleaseArgs, kind: Release) -> Result<()> {
    let Some(counts_path) = a.counts.as_deref() else {
        return config("--counts is required");
    };
    let table = read_counts(counts_path)?;
    let part = match a.partition.as_deref() {
        Some(p) => read_partition(p, &table.items)?,
        None => ElementPartition::singletons(table.items.len()),
    };
    let n = table.users.len();
    let privacy = a.privacy.unwrap_or(Privacy::Element);
    let delta = a.delta.unwrap_or((n as f64).powf(-1.1));
    let eps = match (privacy, a.eps) {
        (Privacy::None, _) => f64::INFINITY,
        (_, Some(e)) => e,
        (_, None) => return config("--eps is required unless --privacy none"),
    };
    let unit_sigma = if privacy == Privacy::None { 0.0 } else { gaussian_sigma_squared(eps, delta)?.sqrt() };
    let mut rng = stream_rng(a.seed.unwrap_or(0), STREAM_NOISE);
    let (values, sigma, sensitivity) = match kind {
        Release::HeavyHitters => {
            let m = table.users.iter().map(|u| u.trials()).max().unwrap_or(1);
            let sens = indicator_sensitivity(&part);
            let sens = match a.rho {
                Some(r) if r < sens => {
                    return config(format!("--rho {r} is below the indicator sensitivity {sens} of this partition"))
                }
                Some(r) => r,
                None => sens,
            };
            let sigma = match privacy {
                Privacy::Element => sens * unit_sigma,
                Privacy::User => user_level_hh_sigma(m, eps, delta)?,
                Privacy::None => 0.0,
            };
            (heavy_hitters(&table.users, sigma, &mut rng)?, sigma, sens)
        }
        Release::Histogram => {
            let Some(rho) = a.rho else {
                return config("--rho is required for the histogram mechanism");
            };
            let part = if privacy == Privacy::User { ElementPartition::single_cluster(part.num_items()) } else { part };
            (histogram_mechanism(&table.users, rho, &part, unit_sigma, n, &mut rng)?, unit_sigma, rho)
        }
    };
    let mut w = csv::Writer::from_writer(output(a.out.as_deref())?);
    w.write_record(["item", "value"])?;
    for (item, v) in table.items.iter().zip(&values) {
        w.write_record([item.clone(), v.to_string()])?;
    }
    w.flush().map_err(|e| CliError::io("<output>", e))?;
    let budget = format!(
        "privacy,eps,delta,sigma,sensitivity\n{privacy},{eps},{},{sigma},{sensitivity}\n",
        if privacy == Privacy::None { 0.0 } else { delta }
    );
    match &a.out {
        Some(p) => {
            let side = PathBuf::from(format!("{}.budget", p.display()));
            std::fs::write(&side, budget).map_err(|e| CliError::io(side, e))
        }
        None => std::io::stderr().write_all(budget.as_bytes()).map_err(|e| CliError::io("<stderr>", e)),
    }
}

fn sgd_sim(a: SgdSimArgs) -> Result<()> {
    let mut plan = a.plan();
    let out = plan.out.clone();
    let table = match &a.data {
        None => run_plan(&plan)?,
        Some(path) => {
            let Some(theta_path) = a.theta_star.as_deref() else {
                return config("--theta-star is required with --data");
            };
            let users = read_pairs(path)?;
            let theta = read_vector(theta_path)?;
            let w = plan.sgd.as_mut().expect("sgd plan");
            w.n = users.len();
            w.m_user = users.iter().map(|u| u.len()).max().unwrap_or(1);
            w.dim = theta.len();
            if a.clusters.is_none() {
                w.clusters = users.iter().flat_map(|u| u.points.iter().map(|p| p.item + 1)).max().unwrap_or(1);
            }
            w.coverage = vec![1];
            run_sgd_on_data(&plan, &users, &theta)?
        }
    };
    table.write_csv(output(out.as_deref())?)
}

fn gen_multinomial_files(a: GenMultinomialArgs) -> Result<()> {
    let law = match a.law {
        LawName::Uniform => ProbLaw::Uniform,
        LawName::Linear => ProbLaw::Linear,
        LawName::Zipf => ProbLaw::Zipf { exponent: a.exponent, offset: a.offset },
    };
    let p = law.probabilities(a.d)?;
    let world = MultinomialWorld::new(a.n, a.m, p, ElementPartition::singletons(a.d))?;
    let users = gen_multinomial(&world, a.seed)?;
    let items: Vec<String> = (0..a.d).map(|j| format!("item{j}")).collect();
    write_counts(output(a.out.as_deref())?, &CountsTable { items: items.clone(), users })?;
    match (a.clusters, a.partition_out) {
        (Some(k), Some(path)) => {
            let rule = match a.partition_rule.as_str() {
                "random" => PartitionRule::Random,
                "contiguous" => PartitionRule::Contiguous,
                other => return config(format!("--partition-rule: expected random or contiguous, got '{other}'")),
            };
            if k == 0 || k > a.d {
                return config(format!("--clusters must lie in 1..={}", a.d));
            }
            let part = build_partition(a.d, k, rule, a.partition_seed)?;
            let f = File::create(&path).map_err(|e| CliError::io(&path, e))?;
            write_partition(std::io::BufWriter::new(f), &items, &part)
        }
        (None, None) => Ok(()),
        _ => config("--clusters and --partition-out go together"),
    }
}

fn gen_logistic_files(a: GenLogisticArgs) -> Result<()> {
    let mut world = LogisticWorld::new(a.dim, a.clusters, a.n, a.m, a.k_per_user)?;
    world.noise_radius = a.noise_radius;
    let data = gen_logistic(&world, a.seed)?;
    write_pairs(output(a.out.as_deref())?, &data.users)?;
    if let Some(path) = a.theta_out {
        let f = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        write_vector(std::io::BufWriter::new(f), &data.theta_star)?;
    }
    Ok(())
}
