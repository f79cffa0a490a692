//! Synthetic worlds for the simulation experiments, and their error metrics.
//!
//! Generators are pure functions of `(world, seed)`; they draw from the
//! seed's data stream only.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample;
use rand::Rng;

use crate::error::{dimension, domain, Result};
use crate::mechanisms::CountVector;
use crate::optim::{logistic, LabeledPoint, LearningUser};
use crate::partition::ElementPartition;
use crate::rng::{stream_rng, unit_sphere, STREAM_DATA};

/// `n` users, each with `m` i.i.d. draws from `p` over `d` items.
#[derive(Debug, Clone, PartialEq)]
pub struct MultinomialWorld {
    pub n: usize,
    pub m: u64,
    pub p: Vec<f64>,
    pub partition: ElementPartition,
}

impl MultinomialWorld {
    pub fn new(n: usize, m: u64, p: Vec<f64>, partition: ElementPartition) -> Result<Self> {
        if n == 0 || m == 0 {
            return domain("n and m must be positive");
        }
        if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return domain("probabilities must be finite and nonnegative");
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return domain(format!("probabilities sum to {total}, not 1"));
        }
        if partition.num_items() != p.len() {
            return dimension(format!("{} probabilities for a partition of {} items", p.len(), partition.num_items()));
        }
        Ok(Self { n, m, p, partition })
    }

    pub fn d(&self) -> usize {
        self.p.len()
    }

    /// `P(c)` for every cluster.
    pub fn cluster_probs(&self) -> Vec<f64> {
        self.partition.cluster_mass(&self.p).expect("sizes checked at construction")
    }
}

/// `n` i.i.d. `Multinomial(m, p)` count vectors.
pub fn gen_multinomial(world: &MultinomialWorld, seed: u64) -> Result<Vec<CountVector>> {
    let mut rng = stream_rng(seed, STREAM_DATA);
    draw_multinomial(world, &mut rng)
}

/// [`gen_multinomial`] drawing from an existing generator.
pub fn draw_multinomial<R: Rng + ?Sized>(world: &MultinomialWorld, rng: &mut R) -> Result<Vec<CountVector>> {
    let dist = WeightedIndex::new(&world.p).map_err(|e| crate::Error::Domain(e.to_string()))?;
    (0..world.n)
        .map(|_| {
            let mut counts = vec![0u64; world.d()];
            for _ in 0..world.m {
                counts[dist.sample(rng)] += 1;
            }
            CountVector::new(counts)
        })
        .collect()
}

/// Logistic regression world: `K` centers on the unit sphere, users
/// drawing `m_user` labeled points from `coverage` of them.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticWorld {
    pub dim: usize,
    pub num_clusters: usize,
    pub n: usize,
    pub m_user: usize,
    /// Clusters each user draws from.
    pub coverage: usize,
    /// Radius of the sphere noise around a center.
    pub noise_radius: f64,
    /// Fixed true parameter; drawn uniformly on the sphere when `None`.
    pub theta_star: Option<Vec<f64>>,
}

impl LogisticWorld {
    pub fn new(dim: usize, num_clusters: usize, n: usize, m_user: usize, coverage: usize) -> Result<Self> {
        let w = Self { dim, num_clusters, n, m_user, coverage, noise_radius: 1.0, theta_star: None };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.num_clusters == 0 || self.n == 0 {
            return domain("dim, K and n must be positive");
        }
        if self.coverage == 0 || self.coverage > self.num_clusters {
            return domain(format!("coverage {} must lie in 1..={}", self.coverage, self.num_clusters));
        }
        if self.m_user < self.coverage {
            return domain(format!("{} points cannot cover {} clusters", self.m_user, self.coverage));
        }
        if !(self.noise_radius >= 0.0) {
            return domain("noise radius must be nonnegative");
        }
        if let Some(t) = &self.theta_star {
            if t.len() != self.dim {
                return dimension(format!("theta* has {} entries, dim is {}", t.len(), self.dim));
            }
        }
        Ok(())
    }

    /// Bound on feature norms: center plus noise.
    pub fn feature_bound(&self) -> f64 {
        1.0 + self.noise_radius
    }

    /// Element-level partition: one element per center.
    pub fn element_partition(&self) -> ElementPartition {
        ElementPartition::singletons(self.num_clusters)
    }
}

/// A generated logistic dataset. Each point's `item` is its center index.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticData {
    pub centers: Vec<Vec<f64>>,
    pub theta_star: Vec<f64>,
    pub users: Vec<LearningUser>,
}

/// Draws centers, `theta*` (unless fixed) and every user's data.
///
/// Each user picks `coverage` distinct centers uniformly, places one point
/// at each, and draws the rest uniformly among them, so their data touches
/// exactly `coverage` clusters. A point is `center + r * U` with `U`
/// uniform on the sphere, labeled `+1` with probability
/// `1 / (1 + exp(-<x, theta*>))`.
pub fn gen_logistic(world: &LogisticWorld, seed: u64) -> Result<LogisticData> {
    world.validate()?;
    let mut rng = stream_rng(seed, STREAM_DATA);
    let centers: Vec<Vec<f64>> = (0..world.num_clusters).map(|_| unit_sphere(&mut rng, world.dim)).collect();
    let theta_star = match &world.theta_star {
        Some(t) => t.clone(),
        None => unit_sphere(&mut rng, world.dim),
    };
    let mut users = Vec::with_capacity(world.n);
    for _ in 0..world.n {
        let chosen = sample(&mut rng, world.num_clusters, world.coverage).into_vec();
        let mut points = Vec::with_capacity(world.m_user);
        for i in 0..world.m_user {
            let c = if i < chosen.len() { chosen[i] } else { chosen[rng.random_range(0..chosen.len())] };
            let u = unit_sphere(&mut rng, world.dim);
            let x: Vec<f64> = centers[c].iter().zip(&u).map(|(a, b)| a + world.noise_radius * b).collect();
            let p1 = logistic(x.iter().zip(&theta_star).map(|(a, b)| a * b).sum());
            let label = if rng.random_bool(p1) { 1.0 } else { -1.0 };
            points.push(LabeledPoint { item: c, features: x, label });
        }
        users.push(LearningUser::new(points));
    }
    Ok(LogisticData { centers, theta_star, users })
}

/// `|a - b|_2`.
pub fn l2_error(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return dimension(format!("vectors of length {} and {}", a.len(), b.len()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// `|h_hat - h0|^2 / |h1 - h0|^2`.
pub fn mse_ratio(h_hat: &[f64], h0: &[f64], h1: &[f64]) -> Result<f64> {
    let num = l2_error(h_hat, h0)?;
    let den = l2_error(h1, h0)?;
    if den == 0.0 {
        return domain("reference vectors coincide");
    }
    Ok((num / den).powi(2))
}
