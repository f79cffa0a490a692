//! Element-level release mechanisms.
//!
//! Three mechanisms share the same calibration story: a statistic whose
//! element sensitivity is at most `rho` is released with noise scaled to
//! `rho` rather than to its (much larger) user-level sensitivity.
//!
//! * [`noisy_mean`]: Laplace or Gaussian noise on a mean of vectors.
//! * [`heavy_hitters`]: sums of per-user presence indicators.
//! * [`histogram_mechanism`]: per-cluster projected count means.
//!
//! Noise is drawn from the caller's generator, so a fixed seed gives a
//! fixed output.

use rand::Rng;

use crate::accountant::gaussian_sigma_squared;
use crate::error::{dimension, domain, Result};
use crate::partition::{ElementPartition, UserData};
use crate::rng::{laplace, standard_normal};

/// Noise multiplier and sensitivity (or projection radius).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub rho: f64,
}

impl NoiseSpec {
    pub fn new(sigma: f64, rho: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return domain(format!("noise multiplier must be finite and nonnegative, got {sigma}"));
        }
        if !(rho > 0.0) || !rho.is_finite() {
            return domain(format!("rho must be finite and positive, got {rho}"));
        }
        Ok(Self { sigma, rho })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Laplace,
    Gaussian,
}

/// One user's item counts over a vocabulary of size `d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CountVector {
    counts: Vec<u64>,
    trials: u64,
}

impl CountVector {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        let trials = counts.iter().sum();
        if trials == 0 {
            return domain("a count vector needs at least one occurrence");
        }
        Ok(Self { counts, trials })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// `m`, the total number of occurrences.
    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn to_user(&self) -> UserData {
        UserData::from_dense(&self.counts)
    }
}

fn common_dim(users: &[CountVector]) -> Result<usize> {
    let Some(first) = users.first() else {
        return domain("no users");
    };
    let d = first.dim();
    if let Some(u) = users.iter().find(|u| u.dim() != d) {
        return dimension(format!("count vectors of length {d} and {}", u.dim()));
    }
    Ok(d)
}

fn add_gaussian<R: Rng + ?Sized>(v: &mut [f64], scale: f64, rng: &mut R) {
    if scale > 0.0 {
        for x in v.iter_mut() {
            *x += scale * standard_normal(rng);
        }
    }
}

/// Mean of `values` plus noise for a statistic of element sensitivity `rho`.
///
/// Laplace noise has scale `rho / eps` per coordinate; Gaussian noise has
/// variance `rho^2 * gaussian_sigma_squared(eps, delta)`. `eps = inf`
/// releases the exact mean. `delta` is ignored for Laplace noise.
pub fn noisy_mean<R: Rng + ?Sized>(
    values: &[Vec<f64>],
    rho: f64,
    kind: NoiseKind,
    eps: f64,
    delta: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(eps > 0.0) {
        return domain(format!("epsilon must be positive, got {eps}"));
    }
    if !(rho > 0.0) {
        return domain(format!("rho must be positive, got {rho}"));
    }
    let Some(first) = values.first() else {
        return domain("no values to average");
    };
    let d = first.len();
    let mut mean = vec![0.0; d];
    for v in values {
        if v.len() != d {
            return dimension(format!("vectors of length {d} and {}", v.len()));
        }
        for (acc, x) in mean.iter_mut().zip(v) {
            *acc += x;
        }
    }
    let n = values.len() as f64;
    mean.iter_mut().for_each(|x| *x /= n);
    if eps.is_infinite() {
        return Ok(mean);
    }
    match kind {
        NoiseKind::Laplace => {
            let scale = rho / eps;
            for x in mean.iter_mut() {
                *x += laplace(rng, scale);
            }
        }
        NoiseKind::Gaussian => {
            let scale = rho * gaussian_sigma_squared(eps, delta)?.sqrt();
            add_gaussian(&mut mean, scale, rng);
        }
    }
    Ok(mean)
}

/// `1{x_j > 0}` for every coordinate.
pub fn indicator_vector(x: &CountVector) -> Vec<f64> {
    x.counts.iter().map(|&c| if c > 0 { 1.0 } else { 0.0 }).collect()
}

/// Element sensitivity of the indicator sum: replacing one cluster's data
/// moves at most `|c|` coordinates by one, so `sqrt(max |c|)`. Equals 1 for
/// per-item clusters.
pub fn indicator_sensitivity(part: &ElementPartition) -> f64 {
    (part.cluster_sizes().into_iter().max().unwrap_or(1) as f64).sqrt()
}

/// `sum_u 1(X_u) + N(0, sigma^2 I)`.
///
/// With `sigma^2 = alpha / eps` this is `(eps, alpha)`-Renyi private at the
/// element level for per-item clusters; with
/// `sigma^2 = gaussian_sigma_squared(eps, delta)` it is `(eps, delta)`-DP.
/// Coarser partitions need `sigma` scaled by [`indicator_sensitivity`].
pub fn heavy_hitters<R: Rng + ?Sized>(users: &[CountVector], sigma: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) {
        return domain(format!("sigma must be nonnegative, got {sigma}"));
    }
    let d = common_dim(users)?;
    let mut h = vec![0.0; d];
    for u in users {
        for (acc, &c) in h.iter_mut().zip(&u.counts) {
            if c > 0 {
                *acc += 1.0;
            }
        }
    }
    add_gaussian(&mut h, sigma, rng);
    Ok(h)
}

/// Noise multiplier giving the indicator sum user-level `(eps, delta)`-DP:
/// `sigma_std^2 = m * gaussian_sigma_squared(eps, delta)`.
pub fn user_level_hh_sigma(m: u64, eps: f64, delta: f64) -> Result<f64> {
    Ok((m as f64 * gaussian_sigma_squared(eps, delta)?).sqrt())
}

/// Separation above which the Gaussian indicator mechanism mis-orders at
/// most `t^2` pairs in expectation (requires `max p <= 1/(2m)`).
pub fn hh_gamma_threshold(n: usize, m: u64, d: usize, p_max: f64, sigma: f64, t: f64) -> Result<f64> {
    if !(t > 0.0 && t <= d as f64) {
        return domain(format!("t must lie in (0, d], got {t}"));
    }
    let nm = n as f64 * m as f64;
    let log_ratio = (d as f64 / t).ln();
    let root = log_ratio.sqrt();
    let a = 32.0 / nm * log_ratio;
    let b = 4.0 * 2f64.sqrt() * sigma / nm * root;
    let c = 12.0 * 2f64.sqrt() / 5f64.sqrt() * p_max.sqrt() / (m as f64 * (n as f64).sqrt()) * root;
    Ok(a.max(b).max(c))
}

/// Number of pairs `(j, l)` with `p_j - p_l >= gamma` whose scores are
/// inverted (`h_l > h_j`). Ties in `h` are not inversions.
pub fn ordering_loss(h: &[f64], p: &[f64], gamma: f64) -> Result<u64> {
    if !(gamma >= 0.0) {
        return domain(format!("gamma must be nonnegative, got {gamma}"));
    }
    if h.len() != p.len() {
        return dimension(format!("{} scores for {} probabilities", h.len(), p.len()));
    }
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| p[b].total_cmp(&p[a]));
    let mut loss = 0;
    for (pos, &j) in order.iter().enumerate() {
        for &l in &order[pos + 1..] {
            if p[j] - p[l] >= gamma && h[l] > h[j] {
                loss += 1;
            }
        }
    }
    Ok(loss)
}

/// `E[1{X_j > 0}] = 1 - (1 - p_j)^m` for `X ~ Multinomial(m, p)`.
pub fn indicator_mean(p_j: f64, m: u64) -> f64 {
    -(m as f64 * (-p_j).ln_1p()).exp_m1()
}

/// `E[1{X_j > 0} 1{X_l > 0}] = q_j + q_l - q_jl` with
/// `q_jl = 1 - (1 - p_j - p_l)^m`.
pub fn indicator_joint_mean(p_j: f64, p_l: f64, m: u64) -> f64 {
    indicator_mean(p_j, m) + indicator_mean(p_l, m) - indicator_mean(p_j + p_l, m)
}

/// Scales each cluster block of `v` into the `rho` ball.
pub fn project_clusters(v: &[f64], rho: f64, part: &ElementPartition) -> Result<Vec<f64>> {
    if !(rho > 0.0) {
        return domain(format!("rho must be positive, got {rho}"));
    }
    if v.len() != part.num_items() {
        return dimension(format!("vector of length {} for a partition of {} items", v.len(), part.num_items()));
    }
    let mut sq = vec![0.0; part.num_clusters()];
    for (&k, x) in part.assignment().iter().zip(v) {
        sq[k] += x * x;
    }
    let scale: Vec<f64> = sq.iter().map(|s| (rho / s.sqrt()).min(1.0)).collect();
    Ok(part.assignment().iter().zip(v).map(|(&k, x)| x * scale[k]).collect())
}

/// [`project_clusters`] applied to a count vector, accumulated into `acc`.
fn add_projected(acc: &mut [f64], x: &CountVector, rho: f64, part: &ElementPartition, sq: &mut [f64]) {
    sq.iter_mut().for_each(|s| *s = 0.0);
    for (j, &c) in x.counts.iter().enumerate() {
        if c > 0 {
            sq[part.assignment()[j]] += (c * c) as f64;
        }
    }
    for (j, &c) in x.counts.iter().enumerate() {
        if c > 0 {
            let s = sq[part.assignment()[j]];
            acc[j] += c as f64 * (rho / s.sqrt()).min(1.0);
        }
    }
}

/// `(1/n) sum_u pi(X_u) + N(0, rho^2 sigma^2 / n^2 I)` where `pi` projects
/// every cluster of counts onto the `rho` ball.
pub fn histogram_mechanism<R: Rng + ?Sized>(
    users: &[CountVector],
    rho: f64,
    part: &ElementPartition,
    sigma: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    NoiseSpec::new(sigma, rho)?;
    if n != users.len() {
        return dimension(format!("n = {n} but {} users supplied", users.len()));
    }
    let mut mean = projected_mean(users, rho, part)?;
    add_histogram_noise(&mut mean, rho, sigma, n, rng)?;
    Ok(mean)
}

/// `(1/n) sum_u pi(X_u)`, the noiseless part of [`histogram_mechanism`].
pub fn projected_mean(users: &[CountVector], rho: f64, part: &ElementPartition) -> Result<Vec<f64>> {
    if !(rho > 0.0) {
        return domain(format!("rho must be positive, got {rho}"));
    }
    let d = common_dim(users)?;
    if d != part.num_items() {
        return dimension(format!("{d} items but the partition covers {}", part.num_items()));
    }
    let mut acc = vec![0.0; d];
    let mut sq = vec![0.0; part.num_clusters()];
    for u in users {
        add_projected(&mut acc, u, rho, part, &mut sq);
    }
    let nf = users.len() as f64;
    acc.iter_mut().for_each(|x| *x /= nf);
    Ok(acc)
}

/// Adds the `N(0, rho^2 sigma^2 / n^2 I)` term of [`histogram_mechanism`].
pub fn add_histogram_noise<R: Rng + ?Sized>(
    mean: &mut [f64],
    rho: f64,
    sigma: f64,
    n: usize,
    rng: &mut R,
) -> Result<()> {
    NoiseSpec::new(sigma, rho)?;
    if n == 0 {
        return domain("n must be positive");
    }
    add_gaussian(mean, rho * sigma / n as f64, rng);
    Ok(())
}

/// Smallest radius satisfying `rho >= min{3 m P(c) + 3 ln m + t, m}` for
/// every cluster mass `P(c)`.
pub fn choose_rho(m: u64, cluster_probs: &[f64], t: f64) -> Result<f64> {
    if m == 0 {
        return domain("m must be positive");
    }
    if !(t >= 0.0) {
        return domain(format!("t must be nonnegative, got {t}"));
    }
    if cluster_probs.is_empty() {
        return domain("no clusters");
    }
    let mf = m as f64;
    let per = |pc: f64| (3.0 * mf * pc + 3.0 * mf.ln() + t).min(mf);
    Ok(cluster_probs.iter().map(|&pc| per(pc)).fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn cv(c: &[u64]) -> CountVector {
        CountVector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn noisy_mean_exact_without_noise() {
        let vals = vec![vec![1.0, 2.0], vec![3.0, 6.0]];
        let out = noisy_mean(&vals, 1.0, NoiseKind::Laplace, f64::INFINITY, 0.0, &mut seeded(0)).unwrap();
        assert_eq!(out, vec![2.0, 4.0]);
        assert!(noisy_mean(&vals, 1.0, NoiseKind::Laplace, 0.0, 0.0, &mut seeded(0)).is_err());
        assert!(noisy_mean(&vals, 1.0, NoiseKind::Gaussian, -1.0, 1e-5, &mut seeded(0)).is_err());
    }

    #[test]
    fn noisy_mean_laplace_trace() {
        let (rho, eps) = (2.0, 0.5);
        let out = noisy_mean(&[vec![3.0]], rho, NoiseKind::Laplace, eps, 0.0, &mut seeded(11)).unwrap();
        let draw = laplace(&mut seeded(11), 1.0);
        assert!((out[0] - (3.0 + rho / eps * draw)).abs() < 1e-12);
    }

    #[test]
    fn noisy_mean_gaussian_scale() {
        let mut rng = seeded(5);
        let (rho, eps, delta) = (1.5, 2.0, 1e-6);
        let want = rho * rho * gaussian_sigma_squared(eps, delta).unwrap();
        let draws: Vec<f64> = (0..50_000)
            .map(|_| noisy_mean(&[vec![0.0]], rho, NoiseKind::Gaussian, eps, delta, &mut rng).unwrap()[0])
            .collect();
        let var = draws.iter().map(|x| x * x).sum::<f64>() / draws.len() as f64;
        assert!((var / want - 1.0).abs() < 0.03, "{var} vs {want}");
    }

    #[test]
    fn indicator_examples() {
        assert_eq!(indicator_vector(&cv(&[0, 3, 0])), vec![0.0, 1.0, 0.0]);
        assert_eq!(indicator_vector(&cv(&[1, 2, 5])), vec![1.0; 3]);
        assert!(CountVector::new(vec![0, 0]).is_err());
    }

    #[test]
    fn heavy_hitters_without_noise() {
        let h = heavy_hitters(&[cv(&[1, 0, 2])], 0.0, &mut seeded(0)).unwrap();
        assert_eq!(h, vec![1.0, 0.0, 1.0]);
        let h = heavy_hitters(&[cv(&[1, 0, 2]), cv(&[0, 0, 4])], 0.0, &mut seeded(0)).unwrap();
        assert_eq!(h, vec![1.0, 0.0, 2.0]);
        assert!(heavy_hitters(&[cv(&[1]), cv(&[1, 1])], 0.0, &mut seeded(0)).is_err());
        assert!(heavy_hitters(&[], 0.0, &mut seeded(0)).is_err());
    }

    #[test]
    fn heavy_hitters_trace_is_reproducible() {
        let users = [cv(&[1, 0, 2]), cv(&[0, 5, 0])];
        let a = heavy_hitters(&users, 3.0, &mut seeded(42)).unwrap();
        let b = heavy_hitters(&users, 3.0, &mut seeded(42)).unwrap();
        assert_eq!(a, b);
        let mut rng = seeded(42);
        let base = [1.0, 1.0, 1.0];
        for (x, b) in a.iter().zip(base) {
            assert!((x - (b + 3.0 * standard_normal(&mut rng))).abs() < 1e-12);
        }
    }

    #[test]
    fn user_level_sigma_scales_with_root_m() {
        let s = gaussian_sigma_squared(1.0, 1e-6).unwrap().sqrt();
        assert!((user_level_hh_sigma(100, 1.0, 1e-6).unwrap() - 10.0 * s).abs() < 1e-12);
    }

    #[test]
    fn indicator_sensitivity_by_partition() {
        assert_eq!(indicator_sensitivity(&ElementPartition::singletons(5)), 1.0);
        assert_eq!(indicator_sensitivity(&ElementPartition::single_cluster(4)), 2.0);
    }

    #[test]
    fn ordering_loss_examples() {
        let p = [0.5, 0.3, 0.2];
        assert_eq!(ordering_loss(&[3.0, 2.0, 1.0], &p, 0.05).unwrap(), 0);
        assert_eq!(ordering_loss(&[1.0, 3.0, 2.0], &p, 0.05).unwrap(), 2);
        assert_eq!(ordering_loss(&[1.0, 3.0, 2.0], &p, 0.31).unwrap(), 0);
        // a close pair ahead of a separated one
        assert_eq!(ordering_loss(&[1.0, 0.0, 2.0], &[0.5, 0.48, 0.2], 0.05).unwrap(), 2);
        // ties are not inversions
        assert_eq!(ordering_loss(&[1.0, 1.0, 1.0], &p, 0.0).unwrap(), 0);
        // input order is irrelevant
        assert_eq!(ordering_loss(&[3.0, 1.0, 2.0], &[0.3, 0.5, 0.2], 0.05).unwrap(), 2);
        assert!(ordering_loss(&[1.0], &[1.0], -0.1).is_err());
    }

    #[test]
    fn gamma_threshold_takes_largest_term() {
        let (n, m, d, t) = (100usize, 10u64, 50usize, 5.0);
        let l = (d as f64 / t).ln();
        let g0 = hh_gamma_threshold(n, m, d, 0.0, 0.0, t).unwrap();
        assert!((g0 - 32.0 / 1000.0 * l).abs() < 1e-15);
        let g1 = hh_gamma_threshold(n, m, d, 0.0, 100.0, t).unwrap();
        assert!((g1 - 4.0 * 2f64.sqrt() * 100.0 / 1000.0 * l.sqrt()).abs() < 1e-14);
        assert!(hh_gamma_threshold(n, m, d, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn projection_examples() {
        let one = ElementPartition::single_cluster(2);
        assert_eq!(project_clusters(&[3.0, 4.0], 2.5, &one).unwrap(), vec![1.5, 2.0]);
        assert_eq!(project_clusters(&[0.3, 0.4], 2.5, &one).unwrap(), vec![0.3, 0.4]);
        let two = ElementPartition::new(2, vec![0, 0, 1]).unwrap();
        let v = project_clusters(&[3.0, 4.0, 10.0], 1.0, &two).unwrap();
        let again = project_clusters(&v, 1.0, &two).unwrap();
        assert_eq!(v, again);
        assert!((v[0] - 0.6).abs() < 1e-15 && (v[2] - 1.0).abs() < 1e-15);
        assert!(project_clusters(&[1.0], 1.0, &two).is_err());
    }

    #[test]
    fn histogram_plain_mean_without_noise_or_projection() {
        let users = [cv(&[2, 0, 1]), cv(&[0, 3, 0])];
        let part = ElementPartition::singletons(3);
        let h = histogram_mechanism(&users, 3.0, &part, 0.0, 2, &mut seeded(0)).unwrap();
        assert_eq!(h, vec![1.0, 1.5, 0.5]);
        assert!(histogram_mechanism(&users, 3.0, &part, 0.0, 3, &mut seeded(0)).is_err());
    }

    #[test]
    fn histogram_splits_into_mean_and_noise() {
        let users = vec![CountVector::new(vec![4, 1, 0]).unwrap(), CountVector::new(vec![0, 2, 3]).unwrap()];
        let part = ElementPartition::new(2, vec![0, 0, 1]).unwrap();
        let whole = histogram_mechanism(&users, 2.0, &part, 1.5, 2, &mut seeded(4)).unwrap();
        let mut split = projected_mean(&users, 2.0, &part).unwrap();
        add_histogram_noise(&mut split, 2.0, 1.5, 2, &mut seeded(4)).unwrap();
        assert_eq!(whole, split);
    }

    #[test]
    fn histogram_trace_is_reproducible() {
        let users = [cv(&[2, 0, 1]), cv(&[0, 3, 0])];
        let part = ElementPartition::single_cluster(3);
        let a = histogram_mechanism(&users, 1.0, &part, 2.0, 2, &mut seeded(9)).unwrap();
        let b = histogram_mechanism(&users, 1.0, &part, 2.0, 2, &mut seeded(9)).unwrap();
        assert_eq!(a, b);
        let mut rng = seeded(9);
        let s5 = 5f64.sqrt();
        let base = [(2.0 / s5) / 2.0, 0.5, (1.0 / s5) / 2.0];
        for (x, b) in a.iter().zip(base) {
            assert!((x - (b + 1.0 * 2.0 / 2.0 * standard_normal(&mut rng))).abs() < 1e-12);
        }
    }

    #[test]
    fn choose_rho_examples() {
        assert_eq!(choose_rho(100, &[1.0], 0.0).unwrap(), 100.0);
        let t = 100f64.ln();
        let want = 3.0 + 4.0 * 100f64.ln();
        assert!((choose_rho(100, &[0.01], t).unwrap() - want).abs() < 1e-12);
        assert!((want - 21.42).abs() < 0.01);
        assert!((choose_rho(50, &[0.0], 0.0).unwrap() - 3.0 * 50f64.ln()).abs() < 1e-12);
        assert!((choose_rho(100, &[0.0, 0.01, 0.002], t).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn indicator_moment_closed_forms() {
        // m = 1: exactly one coordinate fires, so E[Y_j] = p_j and E[Y_j Y_l] = 0.
        assert!((indicator_mean(0.3, 1) - 0.3).abs() < 1e-15);
        assert!(indicator_joint_mean(0.3, 0.2, 1).abs() < 1e-15);
    }
}
