//! Exact binomial probabilities in log space.
//!
//! Used to check the tail bounds that justify the histogram projection
//! radius without sampling.

use crate::error::{domain, Result};

fn ln_factorial(k: u64) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

fn check(m: u64, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("binomial probability must lie in [0, 1], got {p}"));
    }
    if m == 0 {
        return domain("binomial needs at least one trial");
    }
    Ok(())
}

/// `ln P(X = i)` for `X ~ Bin(m, p)`; `-inf` outside the support.
pub fn ln_pmf(m: u64, p: f64, i: u64) -> Result<f64> {
    check(m, p)?;
    if i > m {
        return Ok(f64::NEG_INFINITY);
    }
    let ln_choose = ln_factorial(m) - ln_factorial(i) - ln_factorial(m - i);
    let a = if i == 0 { 0.0 } else { i as f64 * p.ln() };
    let b = if i == m { 0.0 } else { (m - i) as f64 * (-p).ln_1p() };
    Ok(ln_choose + a + b)
}

fn ln_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `ln P(X >= i)`.
pub fn ln_sf(m: u64, p: f64, i: u64) -> Result<f64> {
    check(m, p)?;
    let terms = (i..=m).map(|k| ln_pmf(m, p, k)).collect::<Result<Vec<_>>>()?;
    Ok(ln_sum_exp(&terms))
}

/// `ln sum_{i >= l} P(X >= i)`, the tail mass that drives projection bias.
pub fn ln_tail_sum(m: u64, p: f64, l: u64) -> Result<f64> {
    check(m, p)?;
    let terms = (l..=m).map(|i| ln_sf(m, p, i)).collect::<Result<Vec<_>>>()?;
    Ok(ln_sum_exp(&terms))
}
