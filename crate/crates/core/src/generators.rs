//! Request-sequence sources: i.i.d. draws from a popularity distribution,
//! the round-robin adversary, the phase-based uniform-over-2C adversary, and
//! trace replay.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::model::{top_c_indices, CacheSet, UpdateSchedule};

const PROB_SUM_TOLERANCE: f64 = 1e-12;

/// A file popularity distribution.
///
/// Probabilities are kept both in original file order and sorted descending
/// (stable, so equal probabilities keep their original relative order). The
/// sorted view defines the popularity gaps used by the theoretical bounds;
/// sampling and the top-C comparator report original file indices.
#[derive(Debug, Clone, PartialEq)]
pub struct PopularityDistribution {
    original: Vec<f64>,
    sorted: Vec<f64>,
    /// `rank -> original index` permutation for the sorted view.
    by_rank: Vec<usize>,
    /// Cumulative sums over the sorted view, used for inverse-CDF sampling.
    cdf: Vec<f64>,
}

impl PopularityDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidDistribution("need at least two files".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidDistribution("probabilities must be finite and nonnegative".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {sum}, not 1")));
        }
        let mut by_rank: Vec<usize> = (0..probs.len()).collect();
        by_rank.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
        let sorted: Vec<f64> = by_rank.iter().map(|&i| probs[i]).collect();
        let mut cdf = Vec::with_capacity(sorted.len());
        let mut acc = 0.0;
        for &p in &sorted {
            acc += p;
            cdf.push(acc);
        }
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Ok(Self { original: probs, sorted, by_rank, cdf })
    }

    /// The dyadic distribution: `mu_i = 2^-i` for `i < L` and the last file
    /// reuses `2^-(L-1)` so the masses sum to exactly 1.
    pub fn dyadic(library_size: usize) -> Result<Self> {
        if library_size < 2 {
            return Err(Error::InvalidDistribution("dyadic distribution needs L >= 2".into()));
        }
        let mut probs: Vec<f64> = (1..library_size).map(|i| 0.5f64.powi(i as i32)).collect();
        probs.push(0.5f64.powi(library_size as i32 - 1));
        Self::new(probs)
    }

    /// Zipf distribution with `mu_i` proportional to `(i+1)^-exponent`.
    /// An exponent of zero yields the uniform distribution.
    pub fn zipf(library_size: usize, exponent: f64) -> Result<Self> {
        if library_size < 2 {
            return Err(Error::InvalidDistribution("zipf distribution needs L >= 2".into()));
        }
        if !exponent.is_finite() || exponent < 0.0 {
            return Err(Error::InvalidDistribution("zipf exponent must be nonnegative".into()));
        }
        let weights: Vec<f64> = (1..=library_size).map(|i| (i as f64).powf(-exponent)).collect();
        let total: f64 = weights.iter().sum();
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn len(&self) -> usize {
        self.original.len()
    }

    pub fn is_empty(&self) -> bool {
        self.original.is_empty()
    }

    /// Probabilities in original file order.
    pub fn probs(&self) -> &[f64] {
        &self.original
    }

    /// Probabilities sorted descending.
    pub fn sorted_probs(&self) -> &[f64] {
        &self.sorted
    }

    pub fn prob(&self, file: usize) -> f64 {
        self.original[file]
    }

    /// Popularity gap between the least popular cached-by-optimal file and
    /// the most popular excluded file.
    pub fn delta_min(&self, cache_size: usize) -> Result<f64> {
        if cache_size < 1 || cache_size >= self.len() {
            return Err(Error::InvalidConfig(format!(
                "cache size {cache_size} must satisfy 1 <= C < L = {}",
                self.len()
            )));
        }
        Ok(self.sorted[cache_size - 1] - self.sorted[cache_size])
    }

    /// The optimal static cache: the top-C files by popularity, ties broken
    /// towards the lowest file index.
    pub fn top_c(&self, cache_size: usize) -> Result<CacheSet> {
        top_c_indices(&self.original, cache_size)
    }

    /// Draws one file index with probability equal to its popularity.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let rank = self.cdf.partition_point(|&c| c <= u).min(self.len() - 1);
        self.by_rank[rank]
    }
}

/// A source of one file request per slot.
///
/// Generators are deterministic given their seed and must be driven with
/// consecutive slots `1..=T`.
#[derive(Debug, Clone)]
pub enum RequestGenerator {
    Iid(IidGenerator),
    RoundRobin(RoundRobinGenerator),
    PhaseAdversary(PhaseAdversaryGenerator),
    Trace(TraceReplay),
}

impl RequestGenerator {
    pub fn next_request(&mut self, slot: usize) -> Result<usize> {
        match self {
            RequestGenerator::Iid(g) => Ok(g.next_request()),
            RequestGenerator::RoundRobin(g) => Ok(g.next_request(slot)),
            RequestGenerator::PhaseAdversary(g) => g.next_request(slot),
            RequestGenerator::Trace(g) => g.next_request(slot),
        }
    }
}

/// Independent draws from a fixed popularity distribution.
#[derive(Debug, Clone)]
pub struct IidGenerator {
    dist: Arc<PopularityDistribution>,
    rng: ChaCha12Rng,
}

impl IidGenerator {
    pub fn new(dist: Arc<PopularityDistribution>, rng: ChaCha12Rng) -> Self {
        Self { dist, rng }
    }

    pub fn next_request(&mut self) -> usize {
        self.dist.sample(&mut self.rng)
    }
}

/// Cycles `start, start+1, ... mod L`, one file per slot.
#[derive(Debug, Clone)]
pub struct RoundRobinGenerator {
    library_size: usize,
    start: usize,
}

impl RoundRobinGenerator {
    pub fn new(library_size: usize, start: usize) -> Result<Self> {
        if library_size < 2 {
            return Err(Error::InvalidConfig("round robin needs L >= 2".into()));
        }
        if start >= library_size {
            return Err(Error::FileOutOfLibrary { file: start, library_size });
        }
        Ok(Self { library_size, start })
    }

    pub fn next_request(&self, slot: usize) -> usize {
        (self.start + slot - 1) % self.library_size
    }
}

/// The lower-bound adversary: at the start of each phase it draws a file
/// uniformly from the first `2C` files and repeats it for the whole phase.
/// Phases coincide with the inter-switching periods of a schedule.
#[derive(Debug, Clone)]
pub struct PhaseAdversaryGenerator {
    cache_size: usize,
    schedule: Arc<UpdateSchedule>,
    rng: ChaCha12Rng,
    current: Option<usize>,
}

impl PhaseAdversaryGenerator {
    pub fn new(
        library_size: usize,
        cache_size: usize,
        schedule: Arc<UpdateSchedule>,
        rng: ChaCha12Rng,
    ) -> Result<Self> {
        if library_size < 2 * cache_size {
            return Err(Error::InvalidConfig(format!(
                "phase adversary needs L >= 2C, got L = {library_size}, C = {cache_size}"
            )));
        }
        Ok(Self { cache_size, schedule, rng, current: None })
    }

    pub fn next_request(&mut self, slot: usize) -> Result<usize> {
        if self.schedule.is_update_slot(slot)? {
            self.current = Some(self.rng.gen_range(0..2 * self.cache_size));
        }
        self.current
            .ok_or_else(|| Error::InvalidState("phase adversary driven from a mid-phase slot".into()))
    }
}

/// Replays a fixed request list, one entry per slot.
#[derive(Debug, Clone)]
pub struct TraceReplay {
    requests: Arc<Vec<usize>>,
}

impl TraceReplay {
    pub fn new(requests: Arc<Vec<usize>>) -> Self {
        Self { requests }
    }

    pub fn next_request(&self, slot: usize) -> Result<usize> {
        self.requests
            .get(slot - 1)
            .copied()
            .ok_or(Error::TraceExhausted { slot, trace_len: self.requests.len() })
    }
}
