//! Element-level private stochastic gradient method.
//!
//! A user's contribution to one step is computed cluster by cluster: each
//! cluster of their data yields a projected gradient step whose gradient
//! mapping is clipped to norm `rho`, and the clipped mappings are summed
//! ([`element_update`]). Replacing one cluster's data therefore moves a
//! user's contribution by at most `2 rho`, which is what the noise in
//! [`subsampled_sum`] is calibrated against.
//!
//! The iteration is
//!
//! ```text
//! theta_{k+1} = proj(theta_k + alpha_k / (q n) * M(S; theta_k))
//! ```
//!
//! with `alpha_k = alpha0 * k^-beta`. `M` sums negated gradient mappings,
//! so adding it descends.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;

use crate::accountant::SubsampleSpec;
use crate::error::{dimension, domain, Error, Result};
use crate::mechanisms::NoiseSpec;
use crate::partition::{ElementPartition, ItemId};
use crate::rng::{stream_rng, DpRng, STREAM_NOISE, STREAM_SUBSAMPLE};

/// Parameter vector constrained to the centered ball of radius `radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    theta: Vec<f64>,
    radius: f64,
}

impl ModelState {
    pub fn new(theta: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return domain(format!("domain radius must be positive and finite, got {radius}"));
        }
        if norm(&theta) > radius * (1.0 + 1e-12) {
            return domain(format!("|theta| = {} lies outside the ball of radius {radius}", norm(&theta)));
        }
        Ok(Self { theta, radius })
    }

    pub fn zeros(dim: usize, radius: f64) -> Result<Self> {
        Self::new(vec![0.0; dim], radius)
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Euclidean projection onto the centered ball of radius `radius`.
pub fn project_ball(v: &mut [f64], radius: f64) {
    let nv = norm(v);
    if nv > radius {
        let s = radius / nv;
        v.iter_mut().for_each(|x| *x *= s);
    }
}

/// A labeled datum. `item` is the identifier the partition clusters on.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    pub item: ItemId,
    pub features: Vec<f64>,
    pub label: f64,
}

/// One user's labeled data.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearningUser {
    pub points: Vec<LabeledPoint>,
}

impl LearningUser {
    pub fn new(points: Vec<LabeledPoint>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points grouped by cluster, in cluster order.
    pub fn by_cluster(&self, part: &ElementPartition) -> Result<BTreeMap<usize, Vec<&LabeledPoint>>> {
        let mut out: BTreeMap<usize, Vec<&LabeledPoint>> = BTreeMap::new();
        for pt in &self.points {
            out.entry(part.cluster_of(pt.item)?).or_default().push(pt);
        }
        Ok(out)
    }

    /// Number of distinct clusters the user's data touches.
    pub fn coverage(&self, part: &ElementPartition) -> Result<usize> {
        Ok(self.by_cluster(part)?.len())
    }
}

/// Per-example loss.
#[derive(Debug, Clone, PartialEq)]
pub enum LossSpec {
    /// `log(1 + exp(-y <x, theta>))` with labels in `{-1, +1}` and
    /// `|x| <= feature_bound`.
    Logistic { feature_bound: f64 },
    /// `(theta - x)' A (theta - x) / 2`; labels are ignored.
    Quadratic { curvature: DMatrix<f64> },
}

impl LossSpec {
    /// Gradient norm bound over the parameter domain, when one exists
    /// independently of the data.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            LossSpec::Logistic { feature_bound } => Some(*feature_bound),
            LossSpec::Quadratic { .. } => None,
        }
    }

    fn check_dim(&self, theta: &[f64], pt: &LabeledPoint) -> Result<()> {
        if pt.features.len() != theta.len() {
            return dimension(format!("{} features for {} parameters", pt.features.len(), theta.len()));
        }
        if let LossSpec::Quadratic { curvature } = self {
            if curvature.nrows() != theta.len() || curvature.ncols() != theta.len() {
                return dimension(format!(
                    "{}x{} curvature for {} parameters",
                    curvature.nrows(),
                    curvature.ncols(),
                    theta.len()
                ));
            }
        }
        Ok(())
    }

    pub fn value(&self, theta: &[f64], pt: &LabeledPoint) -> Result<f64> {
        self.check_dim(theta, pt)?;
        Ok(match self {
            LossSpec::Logistic { .. } => {
                let z = -pt.label * dot(&pt.features, theta);
                softplus(z)
            }
            LossSpec::Quadratic { curvature } => {
                let r: Vec<f64> = theta.iter().zip(&pt.features).map(|(t, x)| t - x).collect();
                let mut acc = 0.0;
                for i in 0..r.len() {
                    for j in 0..r.len() {
                        acc += r[i] * curvature[(i, j)] * r[j];
                    }
                }
                0.5 * acc
            }
        })
    }

    /// Adds `scale * grad l(theta; pt)` to `out`.
    pub fn add_gradient(&self, theta: &[f64], pt: &LabeledPoint, scale: f64, out: &mut [f64]) -> Result<()> {
        self.check_dim(theta, pt)?;
        match self {
            LossSpec::Logistic { .. } => {
                let z = -pt.label * dot(&pt.features, theta);
                let w = -pt.label * logistic(z) * scale;
                for (o, x) in out.iter_mut().zip(&pt.features) {
                    *o += w * x;
                }
            }
            LossSpec::Quadratic { curvature } => {
                let r: Vec<f64> = theta.iter().zip(&pt.features).map(|(t, x)| t - x).collect();
                for (i, o) in out.iter_mut().enumerate() {
                    *o += scale * (0..r.len()).map(|j| curvature[(i, j)] * r[j]).sum::<f64>();
                }
            }
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `1 / (1 + exp(-z))`.
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Sum over the user's nonempty clusters of the cluster's average loss.
pub fn element_loss(theta: &[f64], user: &LearningUser, part: &ElementPartition, loss: &LossSpec) -> Result<f64> {
    let mut total = 0.0;
    for pts in user.by_cluster(part)?.values() {
        let mut s = 0.0;
        for pt in pts {
            s += loss.value(theta, pt)?;
        }
        total += s / pts.len() as f64;
    }
    Ok(total)
}

/// Output of [`element_update`].
#[derive(Debug, Clone, PartialEq)]
pub struct ElementUpdate {
    /// `sum_k [Delta_k]_rho`.
    pub delta: Vec<f64>,
    /// Number of clusters whose mapping was shortened to `rho`.
    pub clipped: usize,
}

/// Per-cluster projected gradient step with clipped gradient mappings.
///
/// For each cluster `k` the user has data in:
/// `theta_k+ = proj(theta0 - alpha * mean grad)`,
/// `Delta_k = (theta_k+ - theta0) / alpha`, clipped to norm `rho`.
pub fn element_update(
    model: &ModelState,
    user: &LearningUser,
    part: &ElementPartition,
    alpha: f64,
    rho: f64,
    loss: &LossSpec,
) -> Result<ElementUpdate> {
    if !(alpha > 0.0) {
        return domain(format!("stepsize must be positive, got {alpha}"));
    }
    if !(rho > 0.0) {
        return domain(format!("rho must be positive, got {rho}"));
    }
    let theta0 = model.theta();
    let p = theta0.len();
    let mut delta = vec![0.0; p];
    let mut clipped = 0;
    let mut step = vec![0.0; p];
    for pts in user.by_cluster(part)?.values() {
        step.copy_from_slice(theta0);
        let w = -alpha / pts.len() as f64;
        for pt in pts {
            loss.add_gradient(theta0, pt, w, &mut step)?;
        }
        project_ball(&mut step, model.radius());
        step.iter_mut().zip(theta0).for_each(|(s, t)| *s = (*s - t) / alpha);
        let ns = norm(&step);
        let scale = if ns > rho {
            clipped += 1;
            rho / ns
        } else {
            1.0
        };
        delta.iter_mut().zip(&step).for_each(|(d, s)| *d += scale * s);
    }
    Ok(ElementUpdate { delta, clipped })
}

/// Which users take part in one step.
pub fn draw_mask<R: Rng + ?Sized>(n: usize, sub: SubsampleSpec, rng: &mut R) -> Result<Vec<bool>> {
    sub.validate()?;
    match sub {
        SubsampleSpec::Poisson { q } => Ok((0..n).map(|_| rng.random_bool(q)).collect()),
        SubsampleSpec::FixedWithoutReplacement { m, n: total } => {
            if total != n {
                return dimension(format!("subsample specified for {total} users, sample has {n}"));
            }
            let mut mask = vec![false; n];
            for i in rand::seq::index::sample(rng, n, m) {
                mask[i] = true;
            }
            Ok(mask)
        }
    }
}

/// Sum of a step's contributions plus its noise.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSum {
    pub sum: Vec<f64>,
    pub clipped: usize,
    pub selected: usize,
}

/// `sum_u B_u * element_update(theta0, x_u) + N(0, rho^2 sigma^2 I)` for a
/// given participation mask.
#[allow(clippy::too_many_arguments)]
pub fn masked_sum<R: Rng + ?Sized>(
    users: &[LearningUser],
    mask: &[bool],
    model: &ModelState,
    part: &ElementPartition,
    alpha: f64,
    noise: NoiseSpec,
    loss: &LossSpec,
    rng: &mut R,
) -> Result<StepSum> {
    if mask.len() != users.len() {
        return dimension(format!("mask of length {} for {} users", mask.len(), users.len()));
    }
    let mut sum = vec![0.0; model.dim()];
    let mut clipped = 0;
    let mut selected = 0;
    for (user, _) in users.iter().zip(mask).filter(|(_, &b)| b) {
        let up = element_update(model, user, part, alpha, noise.rho, loss)?;
        sum.iter_mut().zip(&up.delta).for_each(|(s, d)| *s += d);
        clipped += up.clipped;
        selected += 1;
    }
    let scale = noise.rho * noise.sigma;
    if scale > 0.0 {
        for s in sum.iter_mut() {
            *s += scale * crate::rng::standard_normal(rng);
        }
    }
    Ok(StepSum { sum, clipped, selected })
}

/// One draw of the subsampled mechanism: a fresh participation mask from
/// `sub_rng`, noise from `noise_rng`.
#[allow(clippy::too_many_arguments)]
pub fn subsampled_sum<R: Rng + ?Sized>(
    users: &[LearningUser],
    model: &ModelState,
    part: &ElementPartition,
    alpha: f64,
    sub: SubsampleSpec,
    noise: NoiseSpec,
    loss: &LossSpec,
    sub_rng: &mut R,
    noise_rng: &mut R,
) -> Result<StepSum> {
    let mask = draw_mask(users.len(), sub, sub_rng)?;
    masked_sum(users, &mask, model, part, alpha, noise, loss, noise_rng)
}

/// Settings of one private SGD run.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub alpha0: f64,
    pub beta: f64,
    pub iterations: usize,
    pub subsample: SubsampleSpec,
    pub noise: NoiseSpec,
    /// Radius of the parameter ball.
    pub radius: f64,
    pub seed: u64,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0) {
            return domain(format!("alpha0 must be positive, got {}", self.alpha0));
        }
        if !(self.beta > 0.5 && self.beta < 1.0) {
            return domain(format!("beta must lie in (1/2, 1), got {}", self.beta));
        }
        if !(self.radius > 0.0) {
            return domain(format!("radius must be positive, got {}", self.radius));
        }
        self.subsample.validate()?;
        NoiseSpec::new(self.noise.sigma, self.noise.rho)?;
        Ok(())
    }

    /// `alpha_k = alpha0 * k^-beta`, `k >= 1`.
    pub fn stepsize(&self, k: usize) -> f64 {
        self.alpha0 * (k as f64).powf(-self.beta)
    }
}

/// Result of [`run_private_sgd`].
#[derive(Debug, Clone, PartialEq)]
pub struct SgdRun {
    /// `theta_1` (the start) through `theta_{T+1}`.
    pub trajectory: Vec<Vec<f64>>,
    /// Average of the `T` released iterates `theta_2..theta_{T+1}`;
    /// the start point when `T = 0`.
    pub average: Vec<f64>,
    /// Total clipped cluster mappings over the run.
    pub clipped: usize,
}

impl SgdRun {
    pub fn last(&self) -> &[f64] {
        self.trajectory.last().expect("trajectory holds the start point")
    }
}

/// Runs the private iteration for `config.iterations` steps from `start`
/// (zeros when `None`). Masks come from the seed's subsample stream and
/// noise from its noise stream.
pub fn run_private_sgd(
    users: &[LearningUser],
    part: &ElementPartition,
    loss: &LossSpec,
    config: &SgdConfig,
    start: Option<ModelState>,
) -> Result<SgdRun> {
    let mut sub_rng = stream_rng(config.seed, STREAM_SUBSAMPLE);
    let n = users.len();
    let sub = config.subsample;
    run_with_masks(users, part, loss, config, start, |_| draw_mask(n, sub, &mut sub_rng))
}

/// [`run_private_sgd`] with caller-supplied participation masks.
pub(crate) fn run_with_masks<F>(
    users: &[LearningUser],
    part: &ElementPartition,
    loss: &LossSpec,
    config: &SgdConfig,
    start: Option<ModelState>,
    mut next_mask: F,
) -> Result<SgdRun>
where
    F: FnMut(usize) -> Result<Vec<bool>>,
{
    config.validate()?;
    if users.is_empty() {
        return domain("no users");
    }
    let dim = users
        .iter()
        .flat_map(|u| u.points.first())
        .map(|pt| pt.features.len())
        .next()
        .ok_or_else(|| Error::Domain("no user holds any data".into()))?;
    let mut model = match start {
        Some(m) => {
            if m.dim() != dim {
                return dimension(format!("start has {} parameters, data has {dim} features", m.dim()));
            }
            ModelState::new(m.theta, config.radius)?
        }
        None => ModelState::zeros(dim, config.radius)?,
    };
    let mut noise_rng: DpRng = stream_rng(config.seed, STREAM_NOISE);
    let scale = 1.0 / (config.subsample.rate() * users.len() as f64);
    let mut trajectory = Vec::with_capacity(config.iterations + 1);
    trajectory.push(model.theta.clone());
    let mut average = vec![0.0; dim];
    let mut clipped = 0;
    for k in 1..=config.iterations {
        let alpha = config.stepsize(k);
        let mask = next_mask(k)?;
        let step = masked_sum(users, &mask, &model, part, alpha, config.noise, loss, &mut noise_rng)?;
        clipped += step.clipped;
        let mut next: Vec<f64> = model.theta.iter().zip(&step.sum).map(|(t, s)| t + alpha * scale * s).collect();
        let nn = norm(&next);
        if !nn.is_finite() || nn > 1e3 * config.radius {
            return Err(Error::Instability { step: k, norm: nn });
        }
        project_ball(&mut next, config.radius);
        average.iter_mut().zip(&next).for_each(|(a, x)| *a += x);
        model.theta = next;
        trajectory.push(model.theta.clone());
    }
    if config.iterations == 0 {
        average = model.theta.clone();
    } else {
        let t = config.iterations as f64;
        average.iter_mut().for_each(|a| *a /= t);
    }
    Ok(SgdRun { trajectory, average, clipped })
}

/// Noise multiplier giving user-level privacy at the budget `sigma_element`
/// gives at the element level: users with at most `max_points` points span
/// at most `K ∧ M` clusters, so sensitivity grows by that factor.
pub fn user_level_sigma(sigma_element: f64, num_clusters: usize, max_points: usize) -> f64 {
    sigma_element * num_clusters.min(max_points) as f64
}

/// Asymptotic covariance of `sqrt(n)(theta_bar - theta*)`:
///
/// `H^-1 (S + (1/gamma)((1/m) S + (rho^2 sigma^2 / m^2) Z)) H^-1`
///
/// with `S` the gradient covariance, `Z` the noise covariance and `m` the
/// batch size. `gamma = inf` gives the sandwich `H^-1 S H^-1`.
#[allow(clippy::too_many_arguments)]
pub fn predict_covariance(
    hessian: &DMatrix<f64>,
    grad_cov: &DMatrix<f64>,
    gamma: f64,
    sigma: f64,
    rho: f64,
    m_batch: usize,
    noise_cov: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let p = hessian.nrows();
    for (name, mat) in [("hessian", hessian), ("gradient covariance", grad_cov), ("noise covariance", noise_cov)] {
        if mat.nrows() != p || mat.ncols() != p {
            return dimension(format!("{name} is {}x{}, expected {p}x{p}", mat.nrows(), mat.ncols()));
        }
    }
    if !(gamma > 0.0) {
        return domain(format!("gamma must be positive, got {gamma}"));
    }
    if m_batch == 0 {
        return domain("batch size must be positive");
    }
    if (hessian - hessian.transpose()).amax() > 1e-10 * hessian.amax().max(1.0) {
        return domain("hessian is not symmetric");
    }
    let chol = hessian.clone().cholesky().ok_or_else(|| Error::Domain("hessian is not positive definite".into()))?;
    let h_inv = chol.inverse();
    let m = m_batch as f64;
    let inner = if gamma.is_infinite() {
        grad_cov.clone()
    } else {
        grad_cov + (grad_cov / m + noise_cov * (rho * rho * sigma * sigma / (m * m))) / gamma
    };
    Ok(&h_inv * inner * &h_inv)
}
