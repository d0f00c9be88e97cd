//! The caching policies: LFU, FTPL, Wait-then-FTPL, and the static
//! comparator, all driven slot-by-slot through one contract.
//!
//! The sequence of events in a slot is: the policy may update its cache
//! (`step`), then one request arrives and is recorded (`record_request`).
//! Selection at slot `t` therefore sees the counts accumulated through slot
//! `t - 1`.
//!
//! FTPL perturbs the request counts with a Gaussian vector drawn once per
//! episode and rescaled by a learning rate each slot; the top-C perturbed
//! counts are cached. W-FTPL additionally freezes its initial cache until a
//! waiting slot that grows logarithmically with the fetch cost, which avoids
//! the burst of early fetches FTPL pays when fetches are expensive.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{fetch_count, top_c_indices, CacheSet, CountState, ProblemConfig, UpdateSchedule};

/// How the perturbation scale evolves over slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateKind {
    /// Constant `alpha * sqrt(T)` for the whole horizon.
    SqrtHorizon,
    /// `alpha * sqrt(t)`, growing with the slot index.
    SqrtSlot,
    /// `alpha * sqrt(t / C)`, the variant used in the experiments.
    SqrtSlotOverCache,
}

/// Learning-rate schedule `eta_t` for the FTPL family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningRateSchedule {
    kind: RateKind,
    alpha: f64,
}

impl LearningRateSchedule {
    pub fn new(kind: RateKind, alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::InvalidConfig(format!("learning rate scale {alpha} must be positive")));
        }
        Ok(Self { kind, alpha })
    }

    /// The degenerate all-zero schedule, under which FTPL reduces to LFU.
    pub fn zero() -> Self {
        Self { kind: RateKind::SqrtSlot, alpha: 0.0 }
    }

    /// Evaluates `eta_t`.
    pub fn at(&self, slot: usize, horizon: usize, cache_size: usize) -> f64 {
        match self.kind {
            RateKind::SqrtHorizon => self.alpha * (horizon as f64).sqrt(),
            RateKind::SqrtSlot => self.alpha * (slot as f64).sqrt(),
            RateKind::SqrtSlotOverCache => self.alpha * (slot as f64 / cache_size as f64).sqrt(),
        }
    }

    pub fn kind(&self) -> RateKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// The Gaussian perturbation vector, drawn once per episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation(Vec<f64>);

impl Perturbation {
    pub fn sample<R: rand::Rng + ?Sized>(library_size: usize, rng: &mut R) -> Self {
        Self((0..library_size).map(|_| StandardNormal.sample(rng)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Waiting rule for W-FTPL: no cache updates while `t <= threshold`, where
/// `threshold = scale * ln(fetch_cost)^(1 + exponent)` (0 when the fetch
/// cost is at most 1). Requests are still counted during the wait.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaitConfig {
    scale: f64,
    exponent: f64,
    threshold: f64,
}

impl WaitConfig {
    pub fn new(scale: f64, exponent: f64, fetch_cost: f64) -> Result<Self> {
        if !scale.is_finite() || scale <= 0.0 {
            return Err(Error::InvalidConfig(format!("wait scale {scale} must be positive")));
        }
        if !exponent.is_finite() || exponent <= 0.0 {
            return Err(Error::InvalidConfig(format!("wait exponent {exponent} must be positive")));
        }
        Ok(Self { scale, exponent, threshold: wait_threshold(scale, exponent, fetch_cost) })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }
}

/// `scale * ln(fetch_cost)^(1 + exponent)`, clamped to 0 when the fetch cost
/// is at most 1 (a cheap fetch needs no waiting).
pub fn wait_threshold(scale: f64, exponent: f64, fetch_cost: f64) -> f64 {
    if fetch_cost <= 1.0 {
        0.0
    } else {
        scale * fetch_cost.ln().powf(1.0 + exponent)
    }
}

/// Policy kind plus parameters, as used in experiment configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolicySpec {
    Lfu,
    Ftpl {
        rate: LearningRateSchedule,
    },
    WFtpl {
        rate: LearningRateSchedule,
        wait_scale: f64,
        wait_exponent: f64,
    },
    /// Holds a fixed cache for the whole horizon. This is the comparator
    /// replayed as a policy; it starts at its configured set (no random
    /// fill) and never fetches.
    Static { files: Vec<usize> },
}

#[derive(Debug, Clone)]
enum Flavor {
    Lfu,
    Ftpl { gamma: Perturbation, rate: LearningRateSchedule },
    WFtpl { gamma: Perturbation, rate: LearningRateSchedule, wait: WaitConfig },
    Static,
}

/// A policy instance carrying all per-episode state.
#[derive(Debug, Clone)]
pub struct Policy {
    config: ProblemConfig,
    counts: CountState,
    cache: CacheSet,
    flavor: Flavor,
    seed: u64,
}

impl Policy {
    /// Initializes a policy: counts at zero and, except for the static
    /// comparator, a uniformly random initial cache drawn from `seed`. FTPL
    /// variants also draw their perturbation vector here. The initial fill
    /// is free of switch cost.
    pub fn init(spec: &PolicySpec, config: ProblemConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let cache = match spec {
            PolicySpec::Static { files } => {
                let cache = CacheSet::new(files.clone(), config.library_size)?;
                if cache.len() != config.cache_size {
                    return Err(Error::InvalidConfig(format!(
                        "static cache holds {} files, expected {}",
                        cache.len(),
                        config.cache_size
                    )));
                }
                cache
            }
            _ => random_fill(&config, &mut rng)?,
        };
        let flavor = match spec {
            PolicySpec::Lfu => Flavor::Lfu,
            PolicySpec::Ftpl { rate } => Flavor::Ftpl {
                gamma: Perturbation::sample(config.library_size, &mut rng),
                rate: *rate,
            },
            PolicySpec::WFtpl { rate, wait_scale, wait_exponent } => Flavor::WFtpl {
                gamma: Perturbation::sample(config.library_size, &mut rng),
                rate: *rate,
                wait: WaitConfig::new(*wait_scale, *wait_exponent, config.fetch_cost)?,
            },
            PolicySpec::Static { .. } => Flavor::Static,
        };
        Ok(Self { config, counts: CountState::new(config.library_size), cache, flavor, seed })
    }

    /// Possibly updates the cache at the start of slot `t` and returns how
    /// many files were fetched. Slot 1 always keeps the initial fill at zero
    /// cost; later slots update only when the schedule allows it and, for
    /// W-FTPL, the waiting period is over.
    pub fn step(&mut self, slot: usize, schedule: &UpdateSchedule) -> Result<usize> {
        if self.counts.slot() != slot {
            return Err(Error::InvalidState(format!(
                "stepping slot {slot} but {} requests were recorded",
                self.counts.slot() - 1
            )));
        }
        if !schedule.is_update_slot(slot)? || slot == 1 {
            return Ok(0);
        }
        let next = match &self.flavor {
            Flavor::Lfu => lfu_select(self.counts.counts(), self.config.cache_size)?,
            Flavor::Ftpl { gamma, rate } => {
                let eta = rate.at(slot, self.config.horizon, self.config.cache_size);
                ftpl_select(self.counts.counts(), gamma, eta, self.config.cache_size)?
            }
            Flavor::WFtpl { gamma, rate, wait } => {
                if slot as f64 <= wait.threshold() {
                    return Ok(0);
                }
                let eta = rate.at(slot, self.config.horizon, self.config.cache_size);
                ftpl_select(self.counts.counts(), gamma, eta, self.config.cache_size)?
            }
            Flavor::Static => return Ok(0),
        };
        let fetched = fetch_count(&self.cache, &next)?;
        self.cache = next;
        Ok(fetched)
    }

    /// Records the request received in the current slot.
    pub fn record_request(&mut self, file: usize) -> Result<()> {
        self.counts.record(file)
    }

    pub fn cache(&self) -> &CacheSet {
        &self.cache
    }

    pub fn counts(&self) -> &CountState {
        &self.counts
    }

    pub fn config(&self) -> &ProblemConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The waiting threshold, when the policy has one.
    pub fn wait_threshold(&self) -> Option<f64> {
        match &self.flavor {
            Flavor::WFtpl { wait, .. } => Some(wait.threshold()),
            _ => None,
        }
    }
}

fn random_fill<R: rand::Rng + ?Sized>(config: &ProblemConfig, rng: &mut R) -> Result<CacheSet> {
    let picks = rand::seq::index::sample(rng, config.library_size, config.cache_size).into_vec();
    CacheSet::new(picks, config.library_size)
}

/// Caches the top-C files by raw request count.
pub fn lfu_select(counts: &[u64], cache_size: usize) -> Result<CacheSet> {
    let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    top_c_indices(&values, cache_size)
}

/// Caches the top-C files by perturbed count `counts + eta * gamma`.
pub fn ftpl_select(
    counts: &[u64],
    gamma: &Perturbation,
    learning_rate: f64,
    cache_size: usize,
) -> Result<CacheSet> {
    if gamma.values().len() != counts.len() {
        return Err(Error::InvalidState(format!(
            "perturbation of length {} for {} counts",
            gamma.values().len(),
            counts.len()
        )));
    }
    let values: Vec<f64> = counts
        .iter()
        .zip(gamma.values())
        .map(|(&c, &g)| c as f64 + learning_rate * g)
        .collect();
    top_c_indices(&values, cache_size)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn config(l: usize, c: usize, t: usize, d: f64) -> ProblemConfig {
        ProblemConfig::new(l, c, t, d).unwrap()
    }

    fn sqrt_slot(alpha: f64) -> LearningRateSchedule {
        LearningRateSchedule::new(RateKind::SqrtSlot, alpha).unwrap()
    }

    #[test]
    fn learning_rate_values() {
        assert_eq!(sqrt_slot(1.0).at(4, 100, 1), 2.0);
        let constant = LearningRateSchedule::new(RateKind::SqrtHorizon, 2.0).unwrap();
        assert_eq!(constant.at(7, 100, 1), 20.0);
        let over_c = LearningRateSchedule::new(RateKind::SqrtSlotOverCache, 1.0).unwrap();
        assert_eq!(over_c.at(16, 100, 4), 2.0);
        assert!(LearningRateSchedule::new(RateKind::SqrtSlot, 0.0).is_err());
        assert!(LearningRateSchedule::new(RateKind::SqrtSlot, -1.0).is_err());
    }

    #[test]
    fn wait_threshold_values() {
        // 5 * ln(30)^1.6, high-precision reference value.
        assert!((wait_threshold(5.0, 0.6, 30.0) - 35.447118903388132).abs() < 1e-9);
        assert!((wait_threshold(1.0, 1.0, std::f64::consts::E) - 1.0).abs() < 1e-12);
        assert_eq!(wait_threshold(5.0, 0.6, 0.5), 0.0);
        assert_eq!(wait_threshold(5.0, 0.6, 1.0), 0.0);
    }

    #[test]
    fn wait_config_validation() {
        assert!(WaitConfig::new(0.0, 0.6, 30.0).is_err());
        assert!(WaitConfig::new(5.0, 0.0, 30.0).is_err());
        let wait = WaitConfig::new(5.0, 0.6, 1.0).unwrap();
        assert_eq!(wait.threshold(), 0.0);
    }

    #[test]
    fn lfu_select_examples() {
        assert_eq!(lfu_select(&[5, 3, 2], 2).unwrap().files(), &[0, 1]);
        assert_eq!(lfu_select(&[0, 0, 0], 1).unwrap().files(), &[0]);
        assert_eq!(lfu_select(&[1, 4, 4, 0], 2).unwrap().files(), &[1, 2]);
    }

    #[test]
    fn ftpl_select_examples() {
        let gamma = Perturbation(vec![0.5, -0.5]);
        assert_eq!(ftpl_select(&[2, 0], &gamma, 2.0, 1).unwrap().files(), &[0]);

        let gamma = Perturbation(vec![-1.0, 3.0]);
        assert_eq!(ftpl_select(&[0, 0], &gamma, 1.0, 1).unwrap().files(), &[1]);

        // Zero learning rate reduces to LFU.
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..50 {
            let counts: Vec<u64> = (0..6).map(|_| rng.gen_range(0..5)).collect();
            let gamma = Perturbation::sample(6, &mut rng);
            let c = rng.gen_range(1..6);
            assert_eq!(
                ftpl_select(&counts, &gamma, 0.0, c).unwrap(),
                lfu_select(&counts, c).unwrap()
            );
        }
    }

    #[test]
    fn selection_is_shift_invariant() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        for _ in 0..100 {
            let counts: Vec<u64> = (0..8).map(|_| rng.gen_range(0..10)).collect();
            let shifted: Vec<u64> = counts.iter().map(|c| c + 17).collect();
            let gamma = Perturbation::sample(8, &mut rng);
            let c = rng.gen_range(1..8);
            assert_eq!(lfu_select(&counts, c).unwrap(), lfu_select(&shifted, c).unwrap());
            assert_eq!(
                ftpl_select(&counts, &gamma, 1.5, c).unwrap(),
                ftpl_select(&shifted, &gamma, 1.5, c).unwrap()
            );
        }
    }

    #[test]
    fn init_shapes() {
        let policy = Policy::init(&PolicySpec::Lfu, config(4, 2, 10, 0.0), 7).unwrap();
        assert_eq!(policy.cache().len(), 2);
        assert_eq!(policy.counts().counts(), &[0, 0, 0, 0]);

        let policy =
            Policy::init(&PolicySpec::Ftpl { rate: sqrt_slot(1.0) }, config(3, 1, 10, 0.0), 1).unwrap();
        match &policy.flavor {
            Flavor::Ftpl { gamma, .. } => assert_eq!(gamma.values().len(), 3),
            _ => panic!("expected ftpl flavor"),
        }

        let policy = Policy::init(
            &PolicySpec::WFtpl { rate: sqrt_slot(1.0), wait_scale: 5.0, wait_exponent: 0.6 },
            config(3, 1, 10, 1.0),
            1,
        )
        .unwrap();
        assert_eq!(policy.wait_threshold(), Some(0.0));
    }

    #[test]
    fn init_rejects_bad_params() {
        let cfg = config(3, 1, 10, 1.0);
        assert!(Policy::init(
            &PolicySpec::WFtpl { rate: sqrt_slot(1.0), wait_scale: -1.0, wait_exponent: 0.6 },
            cfg,
            1
        )
        .is_err());
        assert!(Policy::init(&PolicySpec::Static { files: vec![0, 1] }, cfg, 1).is_err());
        assert!(Policy::init(&PolicySpec::Static { files: vec![5] }, cfg, 1).is_err());
    }

    #[test]
    fn initial_fill_is_uniform() {
        // Every singleton should appear with frequency near 1/4.
        let cfg = config(4, 1, 10, 0.0);
        let mut counts = [0usize; 4];
        for seed in 0..4000 {
            let policy = Policy::init(&PolicySpec::Lfu, cfg, seed).unwrap();
            counts[policy.cache().files()[0]] += 1;
        }
        for &n in &counts {
            assert!((800..=1200).contains(&n), "counts {counts:?}");
        }
    }

    #[test]
    fn step_keeps_initial_fill_on_slot_one() {
        let cfg = config(4, 2, 10, 0.0);
        let schedule = UpdateSchedule::unrestricted(10).unwrap();
        let mut policy = Policy::init(&PolicySpec::Lfu, cfg, 3).unwrap();
        let before = policy.cache().clone();
        assert_eq!(policy.step(1, &schedule).unwrap(), 0);
        assert_eq!(policy.cache(), &before);
    }

    #[test]
    fn lfu_step_follows_counts() {
        let cfg = config(2, 1, 10, 0.0);
        let schedule = UpdateSchedule::unrestricted(10).unwrap();
        let mut policy = Policy::init(&PolicySpec::Lfu, cfg, 3).unwrap();
        policy.step(1, &schedule).unwrap();
        policy.record_request(1).unwrap();
        policy.step(2, &schedule).unwrap();
        policy.record_request(1).unwrap();
        policy.step(3, &schedule).unwrap();
        assert_eq!(policy.cache().files(), &[1]);
    }

    #[test]
    fn restricted_schedule_freezes_between_updates() {
        let cfg = config(3, 1, 4, 0.0);
        let schedule = UpdateSchedule::new(vec![2, 2], 4).unwrap();
        let mut policy = Policy::init(&PolicySpec::Ftpl { rate: sqrt_slot(1.0) }, cfg, 11).unwrap();
        policy.step(1, &schedule).unwrap();
        policy.record_request(2).unwrap();
        let after_one = policy.cache().clone();
        assert_eq!(policy.step(2, &schedule).unwrap(), 0);
        assert_eq!(policy.cache(), &after_one);
        policy.record_request(2).unwrap();
        policy.step(3, &schedule).unwrap();
        assert_eq!(policy.cache().files(), &[2]);
    }

    #[test]
    fn wftpl_idles_through_wait() {
        // Fetch cost chosen so the threshold lands near 35.45.
        let cfg = config(4, 2, 60, 30.0);
        let schedule = UpdateSchedule::unrestricted(60).unwrap();
        let spec = PolicySpec::WFtpl { rate: sqrt_slot(1.0), wait_scale: 5.0, wait_exponent: 0.6 };
        let mut policy = Policy::init(&spec, cfg, 9).unwrap();
        let threshold = policy.wait_threshold().unwrap();
        assert!((threshold - 35.447118903388132).abs() < 1e-9);
        let initial = policy.cache().clone();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for t in 1..=35 {
            assert_eq!(policy.step(t, &schedule).unwrap(), 0, "unexpected fetch at slot {t}");
            assert_eq!(policy.cache(), &initial);
            policy.record_request(rng.gen_range(0..4)).unwrap();
        }
        // Slot 36 is past the threshold; the cache may now move.
        policy.step(36, &schedule).unwrap();
    }

    #[test]
    fn record_request_rejects_foreign_file() {
        let cfg = config(3, 1, 10, 0.0);
        let mut policy = Policy::init(&PolicySpec::Lfu, cfg, 0).unwrap();
        assert!(matches!(policy.record_request(5), Err(Error::FileOutOfLibrary { .. })));
    }

    #[test]
    fn step_requires_consistent_slot() {
        let cfg = config(3, 1, 10, 0.0);
        let schedule = UpdateSchedule::unrestricted(10).unwrap();
        let mut policy = Policy::init(&PolicySpec::Lfu, cfg, 0).unwrap();
        policy.step(1, &schedule).unwrap();
        assert!(policy.step(3, &schedule).is_err());
    }

    #[test]
    fn static_policy_never_moves() {
        let cfg = config(4, 2, 10, 5.0);
        let schedule = UpdateSchedule::unrestricted(10).unwrap();
        let mut policy = Policy::init(&PolicySpec::Static { files: vec![1, 3] }, cfg, 0).unwrap();
        assert_eq!(policy.cache().files(), &[1, 3]);
        for t in 1..=10 {
            assert_eq!(policy.step(t, &schedule).unwrap(), 0);
            policy.record_request(0).unwrap();
        }
        assert_eq!(policy.cache().files(), &[1, 3]);
    }
}
