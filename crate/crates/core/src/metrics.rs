//! Regret and switch-cost accounting over completed episodes.
//!
//! Two stochastic estimators are provided for the same expected regret: the
//! indicator-based sample regret, and the popularity-weighted pseudo regret,
//! which conditions on the cache history and therefore has much lower
//! variance at equal trial counts. The adversarial regret compares against
//! the best static cache in hindsight.

use crate::error::{Error, Result};
use crate::generators::PopularityDistribution;
use crate::model::CacheSet;

/// Everything recorded while simulating one episode.
#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    /// Requested file per slot.
    pub requests: Vec<usize>,
    /// Whether the request hit the cache, per slot.
    pub hits: Vec<bool>,
    /// Files fetched at the start of each slot; always 0 at slot 1.
    pub fetches: Vec<u32>,
    /// Cache before each request. Retained only when a metric needs it.
    pub cache_history: Option<Vec<CacheSet>>,
    /// Total hits.
    pub reward: u64,
    /// Total files fetched after the free initial fill.
    pub total_fetches: u64,
    /// `fetch_cost * total_fetches` for the episode's configured cost.
    pub switch_cost: f64,
}

impl EpisodeRecord {
    pub fn horizon(&self) -> usize {
        self.requests.len()
    }

    /// Request counts accumulated over the whole episode.
    pub fn final_counts(&self, library_size: usize) -> Vec<u64> {
        let mut counts = vec![0u64; library_size];
        for &file in &self.requests {
            counts[file] += 1;
        }
        counts
    }
}

/// Cumulative regret and switch cost evaluated at increasing slots.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegretSeries {
    pub points: Vec<RegretPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretPoint {
    pub slot: usize,
    pub regret: f64,
    pub switch_cost: f64,
}

/// Reward of the best static cache in hindsight: the sum of the largest
/// `cache_size` request counts.
pub fn hindsight_best_reward(counts: &[u64], cache_size: usize) -> Result<u64> {
    if cache_size < 1 || cache_size > counts.len() {
        return Err(Error::InvalidConfig(format!(
            "cannot take top {cache_size} of {} counts",
            counts.len()
        )));
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    Ok(sorted[..cache_size].iter().sum())
}

/// Exhaustive oracle for [`hindsight_best_reward`]: maximizes the summed
/// counts over every cache-sized subset. Guarded against combinatorial
/// blowup; intended for validation on small instances.
pub fn hindsight_best_reward_bruteforce(counts: &[u64], cache_size: usize) -> Result<u64> {
    const LIMIT: u128 = 1_000_000;
    if cache_size < 1 || cache_size > counts.len() {
        return Err(Error::InvalidConfig(format!(
            "cannot take top {cache_size} of {} counts",
            counts.len()
        )));
    }
    let subsets = binomial(counts.len() as u128, cache_size as u128);
    if subsets > LIMIT {
        return Err(Error::CombinatorialBlowup { subsets, limit: LIMIT });
    }
    let mut best = 0u64;
    let mut chosen: Vec<usize> = (0..cache_size).collect();
    loop {
        let sum: u64 = chosen.iter().map(|&i| counts[i]).sum();
        best = best.max(sum);
        // Advance to the next combination in lexicographic order.
        let mut i = cache_size;
        loop {
            if i == 0 {
                return Ok(best);
            }
            i -= 1;
            if chosen[i] != i + counts.len() - cache_size {
                break;
            }
        }
        chosen[i] += 1;
        for j in i + 1..cache_size {
            chosen[j] = chosen[j - 1] + 1;
        }
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 0..k {
        result = result.saturating_mul(n - i) / (i + 1);
    }
    result
}

/// Single-path regret against the hindsight optimum, including switch cost:
/// `hindsight - reward + D * fetches`. May be negative on a lucky path.
pub fn adversarial_regret(
    episode: &EpisodeRecord,
    final_counts: &[u64],
    cache_size: usize,
    fetch_cost: f64,
) -> Result<f64> {
    let hindsight = hindsight_best_reward(final_counts, cache_size)?;
    Ok(hindsight as f64 - episode.reward as f64 + total_switch_cost(episode, fetch_cost))
}

/// Single-path stochastic regret: hits of the popularity-optimal static
/// cache minus the policy's hits, plus switch cost. Requires the true
/// popularity distribution.
pub fn stochastic_sample_regret(
    episode: &EpisodeRecord,
    dist: &PopularityDistribution,
    cache_size: usize,
    fetch_cost: f64,
) -> Result<f64> {
    let comparator = dist.top_c(cache_size)?;
    let mut gap = 0i64;
    for (&file, &hit) in episode.requests.iter().zip(&episode.hits) {
        if file >= dist.len() {
            return Err(Error::FileOutOfLibrary { file, library_size: dist.len() });
        }
        gap += comparator.contains(file) as i64 - hit as i64;
    }
    Ok(gap as f64 + total_switch_cost(episode, fetch_cost))
}

/// Pseudo regret: the expected per-slot hit gap given the cache history,
/// `sum_t (mu(comparator) - mu(cache_t))`, plus switch cost. Every summand
/// is nonnegative, so the running value never decreases.
pub fn stochastic_pseudo_regret(
    cache_history: &[CacheSet],
    dist: &PopularityDistribution,
    cache_size: usize,
    fetch_cost: f64,
    total_fetches: u64,
) -> Result<f64> {
    if cache_history.is_empty() {
        return Err(Error::InvalidState("pseudo regret needs cache snapshots".into()));
    }
    let comparator_mass = dist.top_c(cache_size)?.total_prob(dist.probs());
    let gap: f64 = cache_history
        .iter()
        .map(|cache| comparator_mass - cache.total_prob(dist.probs()))
        .sum();
    Ok(gap + fetch_cost * total_fetches as f64)
}

/// Total switching cost of the episode at the given per-fetch cost.
pub fn total_switch_cost(episode: &EpisodeRecord, fetch_cost: f64) -> f64 {
    fetch_cost * episode.total_fetches as f64
}
