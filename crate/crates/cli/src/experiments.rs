//! Replicated experiments.
//!
//! Replicate `i` runs under seed `seed + i`. Inside a replicate, cells that
//! differ only in privacy mode, privacy level or partition reuse the same
//! data and the same noise stream, so their comparisons are paired.
//! Replicates run on a rayon pool capped by `ELDP_THREADS`; rows come back
//! in replicate order, then cell order.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use eldp::accountant::{
    calibrate_sgd_sigma, compose_renyi, default_alpha_grid, gaussian_sigma_squared, renyi_to_dp, sgd_epsilon,
    RenyiMechanism, SubsampleSpec,
};
use eldp::mechanisms::{
    add_histogram_noise, heavy_hitters, hh_gamma_threshold, indicator_sensitivity, ordering_loss, projected_mean,
    user_level_hh_sigma, CountVector, NoiseSpec,
};
use eldp::optim::{run_private_sgd, user_level_sigma, LearningUser, LossSpec, SgdConfig};
use eldp::partition::ElementPartition;
use eldp::rng::{replicate_seed, stream_rng, STREAM_NOISE, STREAM_SPLIT};
use eldp::simdata::{gen_logistic, gen_multinomial, l2_error, LogisticWorld, MultinomialWorld};

use crate::error::{config, CliError, Result};
use crate::plan::{
    AccountMechanism, ExperimentKind, ExperimentPlan, HeavyHittersWorld, HistogramWorld, PartitionRule, Privacy,
    SgdWorld, SubsampleMode,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeavyHittersRow {
    pub replicate: usize,
    pub seed: u64,
    pub privacy: Privacy,
    pub eps: f64,
    pub delta: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub t: f64,
    pub loss: u64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramRow {
    pub replicate: usize,
    pub seed: u64,
    pub clusters: usize,
    pub eps: f64,
    pub delta: f64,
    pub sigma: f64,
    pub rho: f64,
    pub mse: f64,
    pub baseline_mse: f64,
    pub mse_ratio: f64,
    /// Ratio of the single-cluster (user-level) release in the same cell.
    pub user_mse_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SgdRow {
    pub replicate: usize,
    pub seed: u64,
    pub coverage: usize,
    pub privacy: Privacy,
    pub target_eps: f64,
    pub eps: f64,
    pub delta: f64,
    pub q: f64,
    pub alpha0: f64,
    pub sigma: f64,
    pub rho: f64,
    pub iterations: usize,
    pub error: f64,
    pub wall_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccountRow {
    pub eps: f64,
    pub delta: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResultTable {
    HeavyHitters(Vec<HeavyHittersRow>),
    Histogram(Vec<HistogramRow>),
    Sgd(Vec<SgdRow>),
    Account(Vec<AccountRow>),
}

impl ResultTable {
    pub fn len(&self) -> usize {
        match self {
            ResultTable::HeavyHitters(r) => r.len(),
            ResultTable::Histogram(r) => r.len(),
            ResultTable::Sgd(r) => r.len(),
            ResultTable::Account(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        match self {
            ResultTable::HeavyHitters(rows) => rows.iter().try_for_each(|r| w.serialize(r))?,
            ResultTable::Histogram(rows) => rows.iter().try_for_each(|r| w.serialize(r))?,
            ResultTable::Sgd(rows) => rows.iter().try_for_each(|r| w.serialize(r))?,
            ResultTable::Account(rows) => rows.iter().try_for_each(|r| w.serialize(r))?,
        }
        w.flush().map_err(|e| CliError::io("<output>", e))?;
        Ok(())
    }
}

/// Thread pool honoring `ELDP_THREADS`.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("ELDP_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("ELDP_THREADS must be a positive integer, got '{v}'")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

/// Runs a validated plan.
pub fn run_plan(plan: &ExperimentPlan) -> Result<ResultTable> {
    plan.validate()?;
    let pool = thread_pool()?;
    pool.install(|| match plan.experiment {
        ExperimentKind::HeavyHitters => run_heavy_hitters(plan).map(ResultTable::HeavyHitters),
        ExperimentKind::Histogram => run_histogram(plan).map(ResultTable::Histogram),
        ExperimentKind::SgdSim => run_sgd(plan).map(ResultTable::Sgd),
        ExperimentKind::Account => run_account(plan).map(ResultTable::Account),
    })
}

fn replicates<T, F>(plan: &ExperimentPlan, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<Vec<T>> + Sync,
{
    let chunks: Vec<Vec<T>> = (0..plan.replicates)
        .into_par_iter()
        .map(|r| f(r, replicate_seed(plan.seed, r as u64)))
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

fn run_heavy_hitters(plan: &ExperimentPlan) -> Result<Vec<HeavyHittersRow>> {
    let w: &HeavyHittersWorld = plan.heavy_hitters.as_ref().expect("validated");
    let p = w.p.probabilities(w.d)?;
    let part = ElementPartition::singletons(w.d);
    let world = MultinomialWorld::new(w.n, w.m, p.clone(), part.clone())?;
    let delta = plan.delta()?;
    let t = w.t.unwrap_or((w.d as f64 / 10.0).ceil());
    let p_max = p.iter().cloned().fold(0.0, f64::max);
    let sens = indicator_sensitivity(&part);
    let modes = plan.privacy_modes();

    // (eps, gamma, per-mode sigma), shared by every replicate
    let mut cells = Vec::new();
    let levels: Vec<f64> = if modes.iter().all(|&m| m == Privacy::None) { vec![] } else { plan.eps.clone() };
    for &eps in &levels {
        let sigma_el = sens * gaussian_sigma_squared(eps, delta)?.sqrt();
        let gamma = hh_gamma_threshold(w.n, w.m, w.d, p_max, sigma_el, t)?;
        for &mode in &modes {
            let sigma = match mode {
                Privacy::Element => sigma_el,
                Privacy::User => user_level_hh_sigma(w.m, eps, delta)?,
                Privacy::None => continue,
            };
            cells.push((mode, eps, sigma, gamma));
        }
    }
    if modes.contains(&Privacy::None) {
        let gamma = hh_gamma_threshold(w.n, w.m, w.d, p_max, 0.0, t)?;
        cells.push((Privacy::None, f64::INFINITY, 0.0, gamma));
    }

    replicates(plan, |r, seed| {
        let users = gen_multinomial(&world, seed)?;
        cells
            .iter()
            .map(|&(privacy, eps, sigma, gamma)| {
                let mut rng = stream_rng(seed, STREAM_NOISE);
                let h = heavy_hitters(&users, sigma, &mut rng)?;
                let loss = ordering_loss(&h, &p, gamma)?;
                let delta = if privacy == Privacy::None { 0.0 } else { delta };
                Ok(HeavyHittersRow { replicate: r, seed, privacy, eps, delta, sigma, gamma, t, loss, bound: t * t })
            })
            .collect()
    })
}

/// Partition of `d` items into `k` clusters under `rule`.
pub fn build_partition(d: usize, k: usize, rule: PartitionRule, seed: u64) -> Result<ElementPartition> {
    match rule {
        PartitionRule::Contiguous => Ok(ElementPartition::contiguous(d, k)?),
        PartitionRule::Random => {
            let mut perm: Vec<usize> = (0..d).collect();
            perm.shuffle(&mut stream_rng(seed, STREAM_SPLIT));
            let mut assign = vec![0; d];
            for (pos, &item) in perm.iter().enumerate() {
                assign[item] = pos % k;
            }
            Ok(ElementPartition::new(k, assign)?)
        }
    }
}

fn scaled_mean(users: &[&CountVector], d: usize, m: f64) -> Vec<f64> {
    let mut acc = vec![0.0; d];
    for u in users {
        for (a, &c) in acc.iter_mut().zip(u.counts()) {
            *a += c as f64;
        }
    }
    let scale = 1.0 / (users.len() as f64 * m);
    acc.iter_mut().for_each(|a| *a *= scale);
    acc
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct HistogramSplit {
    train: Vec<CountVector>,
    release: Vec<CountVector>,
    h0: Vec<f64>,
    h1: Vec<f64>,
    h_val: Vec<f64>,
}

/// Releases `H_hat` for one partition: `rho` is chosen on the validation
/// split, then the full release set is privatized with it.
fn histogram_cell(
    split: &HistogramSplit,
    part: &ElementPartition,
    grid: &[f64],
    sigma: f64,
    m: f64,
    noise_seed: u64,
    cache: &mut BTreeMap<u64, Vec<f64>>,
) -> Result<(f64, Vec<f64>)> {
    let mut rng = stream_rng(noise_seed, STREAM_NOISE);
    let mut best = (f64::INFINITY, grid[0]);
    if grid.len() > 1 {
        for &rho in grid {
            let mean = match cache.get(&rho.to_bits()) {
                Some(v) => v.clone(),
                None => {
                    let v = projected_mean(&split.train, rho, part)?;
                    cache.insert(rho.to_bits(), v.clone());
                    v
                }
            };
            let mut h = mean;
            add_histogram_noise(&mut h, rho, sigma, split.train.len(), &mut rng)?;
            h.iter_mut().for_each(|x| *x /= m);
            let err = sq_dist(&h, &split.h_val);
            if err < best.0 {
                best = (err, rho);
            }
        }
    }
    let rho = best.1;
    let mut h = projected_mean(&split.release, rho, part)?;
    add_histogram_noise(&mut h, rho, sigma, split.release.len(), &mut rng)?;
    h.iter_mut().for_each(|x| *x /= m);
    Ok((rho, h))
}

fn run_histogram(plan: &ExperimentPlan) -> Result<Vec<HistogramRow>> {
    let w: &HistogramWorld = plan.histogram.as_ref().expect("validated");
    let p = w.p.probabilities(w.d)?;
    let world = MultinomialWorld::new(w.n, w.m, p, ElementPartition::singletons(w.d))?;
    let delta = plan.delta()?;
    let m = w.m as f64;
    let parts: Vec<ElementPartition> =
        w.clusters.iter().map(|&k| build_partition(w.d, k, w.partition, w.partition_seed)).collect::<Result<_>>()?;
    let user_part = ElementPartition::single_cluster(w.d);
    let sigmas: Vec<f64> =
        plan.eps.iter().map(|&e| gaussian_sigma_squared(e, delta).map(f64::sqrt)).collect::<eldp::Result<_>>()?;

    replicates(plan, |r, seed| {
        let users = gen_multinomial(&world, seed)?;
        let mut order: Vec<usize> = (0..users.len()).collect();
        order.shuffle(&mut stream_rng(seed, STREAM_SPLIT));
        let (s0, s1) = order.split_at(users.len() / 2);
        let n_val = ((s1.len() as f64) * w.validation_fraction).round() as usize;
        let n_val = if w.rho_grid.len() > 1 { n_val.clamp(1, s1.len() - 1) } else { 0 };
        let (train_idx, val_idx) = s1.split_at(s1.len() - n_val);
        let pick = |idx: &[usize]| idx.iter().map(|&i| users[i].clone()).collect::<Vec<_>>();
        let refs = |idx: &[usize]| idx.iter().map(|&i| &users[i]).collect::<Vec<_>>();
        let split = HistogramSplit {
            train: pick(train_idx),
            release: pick(s1),
            h0: scaled_mean(&refs(s0), w.d, m),
            h1: scaled_mean(&refs(s1), w.d, m),
            h_val: if n_val > 0 { scaled_mean(&refs(val_idx), w.d, m) } else { vec![] },
        };
        let baseline = sq_dist(&split.h1, &split.h0);
        let mut rows = Vec::new();
        let mut user_cache = BTreeMap::new();
        let mut caches: Vec<BTreeMap<u64, Vec<f64>>> = vec![BTreeMap::new(); parts.len()];
        for (&eps, &sigma) in plan.eps.iter().zip(&sigmas) {
            let (_, user_h) = histogram_cell(&split, &user_part, &w.rho_grid, sigma, m, seed, &mut user_cache)?;
            let user_ratio = sq_dist(&user_h, &split.h0) / baseline;
            for ((part, &k), cache) in parts.iter().zip(&w.clusters).zip(caches.iter_mut()) {
                let (rho, h) = histogram_cell(&split, part, &w.rho_grid, sigma, m, seed, cache)?;
                let mse = sq_dist(&h, &split.h0);
                rows.push(HistogramRow {
                    replicate: r,
                    seed,
                    clusters: k,
                    eps,
                    delta,
                    sigma,
                    rho,
                    mse,
                    baseline_mse: baseline,
                    mse_ratio: mse / baseline,
                    user_mse_ratio: user_ratio,
                });
            }
        }
        Ok(rows)
    })
}

/// Accounted SGD budget: the noise multiplier per mode and the epsilon it
/// buys.
#[derive(Debug, Clone, Copy)]
struct SgdBudget {
    target_eps: f64,
    eps: f64,
    sigma: f64,
}

/// Noise multiplier of a cell: user-level noise is the element-level
/// multiplier scaled by `K ∧ M`.
fn sgd_sigma(mode: Privacy, level: Level, w: &SgdWorld, q: f64, calib: &BTreeMap<(u64, u64), f64>) -> f64 {
    let sigma_el = match level {
        Level::None => return 0.0,
        Level::Eps(e) => calib[&(e.to_bits(), q.to_bits())],
        Level::Sigma(s) => s,
    };
    match mode {
        Privacy::Element => sigma_el,
        Privacy::User => user_level_sigma(sigma_el, w.clusters, w.m_user),
        Privacy::None => 0.0,
    }
}

fn sgd_budget(
    mode: Privacy,
    level: Level,
    w: &SgdWorld,
    q: f64,
    delta: f64,
    calib: &BTreeMap<(u64, u64), f64>,
) -> Result<SgdBudget> {
    let sigma = sgd_sigma(mode, level, w, q, calib);
    if level == Level::None || mode == Privacy::None {
        return Ok(SgdBudget { target_eps: f64::INFINITY, eps: f64::INFINITY, sigma: 0.0 });
    }
    // recomputed from the noise actually used; at user level the
    // sensitivity grows by the same factor as the noise
    let effective = if mode == Privacy::User { sigma / user_level_sigma(1.0, w.clusters, w.m_user) } else { sigma };
    let eps = sgd_epsilon(w.iterations as u64, q, effective, delta)?.params.epsilon;
    let target_eps = match level {
        Level::Eps(e) => e,
        _ => eps,
    };
    Ok(SgdBudget { target_eps, eps, sigma })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Level {
    Eps(f64),
    Sigma(f64),
    None,
}

struct SgdRunSpec<'a> {
    w: &'a SgdWorld,
    q: f64,
    alpha0: f64,
    sigma: f64,
    rho: f64,
}

fn logistic_world(w: &SgdWorld, coverage: usize) -> Result<LogisticWorld> {
    let mut world = LogisticWorld::new(w.dim, w.clusters, w.n, w.m_user, coverage)?;
    world.noise_radius = w.noise_radius;
    world.validate()?;
    Ok(world)
}

fn sgd_error(spec: &SgdRunSpec, users: &[LearningUser], theta_star: &[f64], seed: u64) -> Result<f64> {
    let w = spec.w;
    let part = ElementPartition::singletons(w.clusters);
    let loss = LossSpec::Logistic { feature_bound: 1.0 + w.noise_radius };
    let subsample = match w.subsample {
        SubsampleMode::Poisson => SubsampleSpec::poisson(spec.q)?,
        SubsampleMode::Fixed => SubsampleSpec::fixed(((spec.q * w.n as f64).round() as usize).max(1), w.n)?,
    };
    let config = SgdConfig {
        alpha0: spec.alpha0,
        beta: w.beta,
        iterations: w.iterations,
        subsample,
        noise: NoiseSpec::new(spec.sigma, spec.rho)?,
        radius: w.radius,
        seed,
    };
    let run = run_private_sgd(users, &part, &loss, &config, None)?;
    Ok(l2_error(&run.average, theta_star)?)
}

/// Runs an `sgd-sim` plan on supplied data instead of simulating it. The
/// data is shared by every replicate; replicates differ in subsampling and
/// noise. Rows report the largest per-user coverage as `coverage`.
pub fn run_sgd_on_data(plan: &ExperimentPlan, users: &[LearningUser], theta_star: &[f64]) -> Result<ResultTable> {
    plan.validate()?;
    let w = plan.sgd.as_ref().expect("validated");
    if users.len() != w.n {
        return config(format!("sgd.n is {} but the data has {} users", w.n, users.len()));
    }
    let part = ElementPartition::singletons(w.clusters);
    let coverage = users.iter().map(|u| u.coverage(&part)).collect::<eldp::Result<Vec<_>>>()?;
    let mut plan = plan.clone();
    plan.sgd.as_mut().expect("validated").coverage = vec![coverage.into_iter().max().unwrap_or(1)];
    let pool = thread_pool()?;
    pool.install(|| run_sgd_with(&plan, Some((users, theta_star)))).map(ResultTable::Sgd)
}

fn run_sgd(plan: &ExperimentPlan) -> Result<Vec<SgdRow>> {
    run_sgd_with(plan, None)
}

type Dataset = (Vec<LearningUser>, Vec<f64>);

fn run_sgd_with(plan: &ExperimentPlan, fixed: Option<(&[LearningUser], &[f64])>) -> Result<Vec<SgdRow>> {
    let w: &SgdWorld = plan.sgd.as_ref().expect("validated");
    let dataset = |coverage: usize, seed: u64| -> Result<Dataset> {
        match fixed {
            Some((u, t)) => Ok((u.to_vec(), t.to_vec())),
            None => {
                let data = gen_logistic(&logistic_world(w, coverage)?, seed)?;
                Ok((data.users, data.theta_star))
            }
        }
    };
    let delta = plan.delta()?;
    let rho = w.rho.unwrap_or(1.0 + w.noise_radius);
    let modes = plan.privacy_modes();

    // every (mode, level) cell
    let mut cells: Vec<(Privacy, Level)> = Vec::new();
    for &mode in &modes {
        if mode == Privacy::None {
            cells.push((mode, Level::None));
        } else if let Some(s) = w.sigma {
            cells.push((mode, Level::Sigma(s)));
        } else {
            cells.extend(plan.eps.iter().map(|&e| (mode, Level::Eps(e))));
        }
    }

    // element-level noise multiplier for every (eps, q) pair in use
    let pairs: Vec<(f64, f64)> = cells
        .iter()
        .filter_map(|&(_, l)| if let Level::Eps(e) = l { Some(e) } else { None })
        .flat_map(|e| w.q.iter().map(move |&q| (e.to_bits(), q.to_bits())))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .map(|(e, q)| (f64::from_bits(e), f64::from_bits(q)))
        .collect();
    let sigmas: Vec<f64> = pairs
        .par_iter()
        .map(|&(e, q)| calibrate_sgd_sigma(e, w.iterations as u64, q, delta).map_err(CliError::from))
        .collect::<Result<_>>()?;
    let calib: BTreeMap<(u64, u64), f64> =
        pairs.iter().zip(&sigmas).map(|(&(e, q), &s)| ((e.to_bits(), q.to_bits()), s)).collect();

    // tuning: (coverage, cell) -> (q, alpha0) minimizing mean error over
    // seeds disjoint from the evaluation replicates
    let grid: Vec<(f64, f64)> = w.q.iter().flat_map(|&q| w.alpha0.iter().map(move |&a| (q, a))).collect();
    let tune_seeds: Vec<u64> =
        (0..w.tune_replicates).map(|i| replicate_seed(plan.seed, (plan.replicates + i) as u64)).collect();
    let mut jobs = Vec::new();
    for &coverage in &w.coverage {
        for (ci, _) in cells.iter().enumerate() {
            jobs.push((coverage, ci));
        }
    }
    let choices: Vec<(f64, f64)> = if grid.len() == 1 {
        vec![grid[0]; jobs.len()]
    } else {
        let tune_data: BTreeMap<(usize, u64), Dataset> = w
            .coverage
            .par_iter()
            .flat_map(|&c| tune_seeds.par_iter().map(move |&s| (c, s)))
            .map(|(c, s)| Ok(((c, s), dataset(c, s)?)))
            .collect::<Result<_>>()?;
        let scores: Vec<f64> = jobs
            .par_iter()
            .flat_map(|&(coverage, ci)| grid.par_iter().map(move |&g| (coverage, ci, g)))
            .map(|(coverage, ci, (q, alpha0))| {
                let (mode, level) = cells[ci];
                let sigma = sgd_sigma(mode, level, w, q, &calib);
                let spec = SgdRunSpec { w, q, alpha0, sigma, rho };
                let mut total = 0.0;
                for &s in &tune_seeds {
                    let (users, theta) = &tune_data[&(coverage, s)];
                    total += match sgd_error(&spec, users, theta, s) {
                        Ok(e) => e,
                        Err(CliError::Core(eldp::Error::Instability { .. })) => f64::INFINITY,
                        Err(e) => return Err(e),
                    };
                }
                Ok(total)
            })
            .collect::<Result<_>>()?;
        scores
            .chunks(grid.len())
            .map(|c| {
                let best = c.iter().enumerate().fold(0, |b, (i, &s)| if s < c[b] { i } else { b });
                grid[best]
            })
            .collect()
    };

    let budgets: Vec<SgdBudget> = jobs
        .par_iter()
        .zip(&choices)
        .map(|(&(_, ci), &(q, _))| sgd_budget(cells[ci].0, cells[ci].1, w, q, delta, &calib))
        .collect::<Result<_>>()?;

    replicates(plan, |r, seed| {
        let mut rows = Vec::new();
        for &coverage in &w.coverage {
            let (users, theta_star) = dataset(coverage, seed)?;
            for ((&(cov, ci), &(q, alpha0)), budget) in jobs.iter().zip(&choices).zip(&budgets) {
                if cov != coverage {
                    continue;
                }
                let spec = SgdRunSpec { w, q, alpha0, sigma: budget.sigma, rho };
                let start = Instant::now();
                let error = sgd_error(&spec, &users, &theta_star, seed)?;
                let elapsed = start.elapsed().as_secs_f64();
                let privacy = cells[ci].0;
                rows.push(SgdRow {
                    replicate: r,
                    seed,
                    coverage,
                    privacy,
                    target_eps: budget.target_eps,
                    eps: budget.eps,
                    delta: if privacy == Privacy::None { 0.0 } else { delta },
                    q,
                    alpha0,
                    sigma: budget.sigma,
                    rho,
                    iterations: w.iterations,
                    error,
                    wall_time: plan.timing.then_some(elapsed),
                });
            }
        }
        Ok(rows)
    })
}

fn run_account(plan: &ExperimentPlan) -> Result<Vec<AccountRow>> {
    let a = plan.account.as_ref().expect("validated");
    let delta = plan.delta()?;
    let alphas = default_alpha_grid();
    let curves = a
        .steps
        .par_iter()
        .map(|s| {
            let mech = match s.mechanism {
                AccountMechanism::Gaussian => {
                    if s.q != 1.0 {
                        return config("account: the plain Gaussian mechanism takes no sampling rate");
                    }
                    RenyiMechanism::Gaussian { sensitivity: s.sensitivity, sigma: s.sigma }
                }
                AccountMechanism::SubsampledGaussian => RenyiMechanism::SubsampledGaussian { q: s.q, sigma: s.sigma },
            };
            Ok(mech.curve(&alphas)?.scaled(s.t as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    let total = compose_renyi(&curves, &alphas)?;
    let conv = renyi_to_dp(&total, delta)?;
    Ok(vec![AccountRow { eps: conv.params.epsilon, delta: conv.params.delta, alpha: conv.alpha }])
}
