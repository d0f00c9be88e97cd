//! Problem configuration, cache-state algebra, switch-cost arithmetic, and
//! restricted-switching update schedules.
//!
//! Time is slotted starting at 1. A cache always holds exactly `cache_size`
//! distinct files indexed `0..library_size`. Fetching a file costs
//! `fetch_cost` units, so replacing `k` files between consecutive slots costs
//! `k * fetch_cost`, which equals half the l1 distance between the cache
//! indicator vectors times `fetch_cost`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Static parameters of one caching problem instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    /// Number of distinct files `L` that can be requested.
    pub library_size: usize,
    /// Number of files `C` the cache holds, `1 <= C < L`.
    pub cache_size: usize,
    /// Number of request slots `T`.
    pub horizon: usize,
    /// Cost `D` of fetching one file into the cache.
    pub fetch_cost: f64,
}

impl ProblemConfig {
    pub fn new(library_size: usize, cache_size: usize, horizon: usize, fetch_cost: f64) -> Result<Self> {
        let config = Self { library_size, cache_size, horizon, fetch_cost };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cache_size < 1 || self.cache_size >= self.library_size {
            return Err(Error::InvalidConfig(format!(
                "cache size {} must satisfy 1 <= C < L = {}",
                self.cache_size, self.library_size
            )));
        }
        if self.horizon < 1 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        if !self.fetch_cost.is_finite() || self.fetch_cost < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "fetch cost {} must be finite and nonnegative",
                self.fetch_cost
            )));
        }
        Ok(())
    }
}

/// A cache configuration: a set of distinct file indices stored sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheSet {
    files: Vec<usize>,
}

impl CacheSet {
    /// Builds a cache set, validating distinctness and library bounds.
    pub fn new(mut files: Vec<usize>, library_size: usize) -> Result<Self> {
        files.sort_unstable();
        if files.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidState("cache set contains duplicate files".into()));
        }
        if let Some(&file) = files.last() {
            if file >= library_size {
                return Err(Error::FileOutOfLibrary { file, library_size });
            }
        }
        Ok(Self { files })
    }

    pub fn contains(&self, file: usize) -> bool {
        self.files.binary_search(&file).is_ok()
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    /// File indices in ascending order.
    pub fn files(&self) -> &[usize] {
        &self.files
    }

    /// Sum of probabilities of the cached files.
    pub fn total_prob(&self, probs: &[f64]) -> f64 {
        self.files.iter().map(|&f| probs[f]).sum()
    }
}

/// Returns the `cache_size` indices with the largest values as a cache set.
///
/// Ties are broken towards the lowest index, which makes the selection
/// deterministic. The Gaussian perturbation used by FTPL makes ties a
/// measure-zero event, so the rule only shapes LFU behavior.
pub fn top_c_indices(values: &[f64], cache_size: usize) -> Result<CacheSet> {
    if cache_size < 1 || cache_size > values.len() {
        return Err(Error::InvalidConfig(format!(
            "cannot select top {} of {} values",
            cache_size,
            values.len()
        )));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    // Total order: value descending, then index ascending.
    let by_rank = |&a: &usize, &b: &usize| values[b].total_cmp(&values[a]).then(a.cmp(&b));
    if cache_size < values.len() {
        order.select_nth_unstable_by(cache_size - 1, by_rank);
        order.truncate(cache_size);
    }
    order.sort_unstable();
    Ok(CacheSet { files: order })
}

/// Number of files `next` holds that `prev` did not: `|next \ prev|`.
///
/// Equals half the l1 distance between the indicator vectors because both
/// sets have equal cardinality.
pub fn fetch_count(prev: &CacheSet, next: &CacheSet) -> Result<usize> {
    if prev.len() != next.len() {
        return Err(Error::InvalidState(format!(
            "cache sets of unequal cardinality: {} vs {}",
            prev.len(),
            next.len()
        )));
    }
    Ok(next.files.iter().filter(|f| !prev.contains(**f)).count())
}

/// Cost of moving the cache from `prev` to `next`: `fetch_cost` per new file.
pub fn switch_cost_increment(prev: &CacheSet, next: &CacheSet, fetch_cost: f64) -> Result<f64> {
    Ok(fetch_cost * fetch_count(prev, next)? as f64)
}

/// Cumulative per-file request counts.
///
/// At the start of slot `t` the counts reflect the `t - 1` requests already
/// observed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountState {
    counts: Vec<u64>,
    slot: usize,
}

impl CountState {
    pub fn new(library_size: usize) -> Self {
        Self { counts: vec![0; library_size], slot: 1 }
    }

    /// Records one request and advances to the next slot.
    pub fn record(&mut self, file: usize) -> Result<()> {
        if file >= self.counts.len() {
            return Err(Error::FileOutOfLibrary { file, library_size: self.counts.len() });
        }
        self.counts[file] += 1;
        self.slot += 1;
        Ok(())
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// The current slot index; `slot - 1` requests have been observed.
    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn library_size(&self) -> usize {
        self.counts.len()
    }
}

/// Slots at which the cache is allowed to change its contents.
///
/// The schedule is described by inter-switching periods `r_1..r_s` summing to
/// the horizon; updates are allowed at slots `1, r_1+1, r_1+r_2+1, ...`. The
/// point after the final period falls beyond the horizon and is dropped. The
/// unrestricted setting is the special case where every period equals 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateSchedule {
    periods: Vec<usize>,
    horizon: usize,
    allowed: Vec<usize>,
}

impl UpdateSchedule {
    pub fn new(periods: Vec<usize>, horizon: usize) -> Result<Self> {
        if periods.iter().any(|&r| r < 1) {
            return Err(Error::InvalidPeriod);
        }
        let period_sum: usize = periods.iter().sum();
        if period_sum != horizon || horizon == 0 {
            return Err(Error::ScheduleMismatch { period_sum, horizon });
        }
        let mut allowed = Vec::with_capacity(periods.len());
        let mut start = 1;
        for &r in &periods {
            allowed.push(start);
            start += r;
        }
        Ok(Self { periods, horizon, allowed })
    }

    /// Equal periods of length `r`; requires `r` to divide the horizon.
    pub fn homogeneous(r: usize, horizon: usize) -> Result<Self> {
        if r < 1 {
            return Err(Error::InvalidPeriod);
        }
        if horizon % r != 0 {
            return Err(Error::IndivisibleHorizon { period: r, horizon });
        }
        Self::new(vec![r; horizon / r], horizon)
    }

    /// Every slot is an update slot.
    pub fn unrestricted(horizon: usize) -> Result<Self> {
        Self::new(vec![1; horizon], horizon)
    }

    pub fn is_update_slot(&self, slot: usize) -> Result<bool> {
        if slot < 1 || slot > self.horizon {
            return Err(Error::SlotOutOfRange { slot, horizon: self.horizon });
        }
        Ok(self.allowed.binary_search(&slot).is_ok())
    }

    pub fn allowed_slots(&self) -> &[usize] {
        &self.allowed
    }

    pub fn periods(&self) -> &[usize] {
        &self.periods
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
}
