//! Seeded multi-trial experiment runner: drives a policy against a request
//! generator slot-by-slot, aggregates regret across trials with confidence
//! intervals, sweeps a parameter axis, and emits CSV.
//!
//! Determinism contract: trial `i` derives its seeds from `base_seed + i`,
//! and aggregation is a sequential reduce over trial-indexed results, so a
//! given configuration produces byte-identical CSV regardless of how many
//! worker threads run the trials.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::error::{Error, Result};
use crate::generators::{
    IidGenerator, PhaseAdversaryGenerator, PopularityDistribution, RequestGenerator,
    RoundRobinGenerator, TraceReplay,
};
use crate::metrics::{hindsight_best_reward, EpisodeRecord, RegretPoint, RegretSeries};
use crate::model::{ProblemConfig, UpdateSchedule};
use crate::policies::{Policy, PolicySpec, RateKind};
use crate::trace::{parse_movielens, remap_ids, TraceOrder};

/// Environment variable consulted for the default worker count.
pub const WORKERS_ENV: &str = "CACHESIM_WORKERS";

/// Which regret definition the harness reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    /// Hindsight-optimum regret plus switch cost.
    Adversarial,
    /// Indicator-based stochastic regret plus switch cost.
    StochasticSample,
    /// Popularity-weighted stochastic regret plus switch cost. Lower
    /// variance than the sample metric; the default for plots.
    StochasticPseudo,
}

/// Popularity model for the i.i.d. generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PmfSpec {
    Dyadic,
    Zipf { exponent: f64 },
    Explicit { probs: Vec<f64> },
}

impl PmfSpec {
    pub fn resolve(&self, library_size: usize) -> Result<PopularityDistribution> {
        match self {
            PmfSpec::Dyadic => PopularityDistribution::dyadic(library_size),
            PmfSpec::Zipf { exponent } => PopularityDistribution::zipf(library_size, *exponent),
            PmfSpec::Explicit { probs } => {
                if probs.len() != library_size {
                    return Err(Error::InvalidConfig(format!(
                        "{} probabilities for a library of {library_size}",
                        probs.len()
                    )));
                }
                PopularityDistribution::new(probs.clone())
            }
        }
    }
}

/// Request source selection for an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    Iid {
        pmf: PmfSpec,
    },
    RoundRobin {
        #[serde(default)]
        start: usize,
    },
    /// Uniform-over-2C phase adversary; phases follow the run's schedule.
    PhaseAdversary,
    Trace {
        path: PathBuf,
        #[serde(default)]
        max_rows: Option<usize>,
        #[serde(default)]
        order: TraceOrder,
    },
}

/// Restricted-switching schedule selection.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScheduleSpec {
    #[default]
    Unrestricted,
    Homogeneous {
        r: usize,
    },
    Periods {
        periods: Vec<usize>,
    },
}

impl ScheduleSpec {
    pub fn resolve(&self, horizon: usize) -> Result<UpdateSchedule> {
        match self {
            ScheduleSpec::Unrestricted => UpdateSchedule::unrestricted(horizon),
            ScheduleSpec::Homogeneous { r } => UpdateSchedule::homogeneous(*r, horizon),
            ScheduleSpec::Periods { periods } => UpdateSchedule::new(periods.clone(), horizon),
        }
    }
}

/// A complete experiment description; serializable as the JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub policy: PolicySpec,
    pub generator: GeneratorSpec,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    pub metric: MetricKind,
    pub trials: usize,
    pub base_seed: u64,
    /// Slots at which cumulative regret is reported; defaults to the final
    /// slot when empty.
    #[serde(default)]
    pub checkpoints: Vec<usize>,
    /// Record the mean per-slot fetch profile across trials.
    #[serde(default)]
    pub record_fetch_profile: bool,
    /// Trial-level worker threads; falls back to `CACHESIM_WORKERS`, then
    /// to the machine's available parallelism.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json_str(json: &str) -> Result<Self> {
        serde_json::from_str(json)
            .map_err(|e| Error::InvalidConfig(format!("config schema violation: {e}")))
    }

    pub fn from_json_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// An experiment with its schedule, popularity distribution, and trace
/// resolved and validated, ready to run trials.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub config: ExperimentConfig,
    pub schedule: Arc<UpdateSchedule>,
    pub dist: Option<Arc<PopularityDistribution>>,
    pub trace: Option<Arc<Vec<usize>>>,
    pub checkpoints: Vec<usize>,
}

impl ResolvedExperiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.problem.validate()?;
        if config.trials < 1 {
            return Err(Error::InvalidConfig("need at least one trial".into()));
        }
        let horizon = config.problem.horizon;
        let schedule = Arc::new(config.schedule.resolve(horizon)?);

        let mut checkpoints = if config.checkpoints.is_empty() {
            vec![horizon]
        } else {
            config.checkpoints.clone()
        };
        checkpoints.sort_unstable();
        checkpoints.dedup();
        if checkpoints.iter().any(|&t| t < 1 || t > horizon) {
            return Err(Error::InvalidConfig(format!(
                "checkpoints must lie in [1, {horizon}]"
            )));
        }

        let dist = match &config.generator {
            GeneratorSpec::Iid { pmf } => {
                Some(Arc::new(pmf.resolve(config.problem.library_size)?))
            }
            _ => None,
        };
        if dist.is_none()
            && matches!(config.metric, MetricKind::StochasticSample | MetricKind::StochasticPseudo)
        {
            return Err(Error::InvalidConfig(
                "stochastic metrics need an i.i.d. generator with a known distribution".into(),
            ));
        }

        let trace = match &config.generator {
            GeneratorSpec::Trace { path, max_rows, order } => {
                let events = parse_movielens(path, *max_rows)?;
                let trace = remap_ids(&events, *order)?;
                if trace.library_size > config.problem.library_size {
                    return Err(Error::InvalidConfig(format!(
                        "trace has {} distinct files but the library size is {}",
                        trace.library_size, config.problem.library_size
                    )));
                }
                Some(Arc::new(trace.requests))
            }
            _ => None,
        };

        if matches!(config.generator, GeneratorSpec::PhaseAdversary)
            && config.problem.library_size < 2 * config.problem.cache_size
        {
            return Err(Error::InvalidConfig("phase adversary needs L >= 2C".into()));
        }

        Ok(Self { config, schedule, dist, trace, checkpoints })
    }

    /// Seed for trial `i`.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.config.base_seed.wrapping_add(trial as u64)
    }

    fn build_generator(&self, seed: u64) -> Result<RequestGenerator> {
        let problem = &self.config.problem;
        Ok(match &self.config.generator {
            GeneratorSpec::Iid { .. } => {
                let dist = self.dist.as_ref().expect("resolved iid distribution").clone();
                RequestGenerator::Iid(IidGenerator::new(dist, ChaCha12Rng::seed_from_u64(seed)))
            }
            GeneratorSpec::RoundRobin { start } => RequestGenerator::RoundRobin(
                RoundRobinGenerator::new(problem.library_size, *start)?,
            ),
            GeneratorSpec::PhaseAdversary => {
                RequestGenerator::PhaseAdversary(PhaseAdversaryGenerator::new(
                    problem.library_size,
                    problem.cache_size,
                    self.schedule.clone(),
                    ChaCha12Rng::seed_from_u64(seed),
                )?)
            }
            GeneratorSpec::Trace { .. } => RequestGenerator::Trace(TraceReplay::new(
                self.trace.as_ref().expect("resolved trace").clone(),
            )),
        })
    }
}

const POLICY_STREAM: u64 = 1;
const GENERATOR_STREAM: u64 = 2;

/// Splits one trial seed into independent per-component seeds.
fn derive_seed(trial_seed: u64, stream: u64) -> u64 {
    let mut z = trial_seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs one seeded episode: for each slot the policy may update its cache,
/// then the request arrives, the hit is recorded, and the counts advance.
/// Returns the record plus the cumulative regret series at the resolved
/// checkpoints.
pub fn run_episode(
    resolved: &ResolvedExperiment,
    trial_seed: u64,
) -> Result<(EpisodeRecord, RegretSeries)> {
    let config = &resolved.config;
    let problem = config.problem;
    let horizon = problem.horizon;

    let mut policy = Policy::init(
        &config.policy,
        problem,
        derive_seed(trial_seed, POLICY_STREAM),
    )?;
    let mut generator = resolved.build_generator(derive_seed(trial_seed, GENERATOR_STREAM))?;

    let keep_history = config.metric == MetricKind::StochasticPseudo;
    let comparator = match config.metric {
        MetricKind::StochasticSample | MetricKind::StochasticPseudo => {
            let dist = resolved.dist.as_ref().expect("validated at resolution");
            Some(dist.top_c(problem.cache_size)?)
        }
        MetricKind::Adversarial => None,
    };
    let comparator_mass = comparator
        .as_ref()
        .zip(resolved.dist.as_ref())
        .map(|(c, d)| c.total_prob(d.probs()));

    let mut requests = Vec::with_capacity(horizon);
    let mut hits = Vec::with_capacity(horizon);
    let mut fetches = Vec::with_capacity(horizon);
    let mut history: Vec<crate::model::CacheSet> = Vec::new();
    let mut reward = 0u64;
    let mut total_fetches = 0u64;
    let mut comparator_hits = 0u64;
    let mut pseudo_gap = 0.0f64;
    let mut series = RegretSeries::default();
    let mut next_checkpoint = resolved.checkpoints.iter().copied().peekable();

    for slot in 1..=horizon {
        let fetched = policy.step(slot, &resolved.schedule)?;
        total_fetches += fetched as u64;
        fetches.push(fetched as u32);
        if keep_history {
            history.push(policy.cache().clone());
        }
        if let Some(mass) = comparator_mass {
            let dist = resolved.dist.as_ref().expect("validated at resolution");
            pseudo_gap += mass - policy.cache().total_prob(dist.probs());
        }

        let request = generator.next_request(slot)?;
        let hit = policy.cache().contains(request);
        requests.push(request);
        hits.push(hit);
        reward += hit as u64;
        if let Some(comparator) = &comparator {
            comparator_hits += comparator.contains(request) as u64;
        }
        policy.record_request(request)?;

        if next_checkpoint.peek() == Some(&slot) {
            next_checkpoint.next();
            let switch_cost = problem.fetch_cost * total_fetches as f64;
            let regret = match config.metric {
                MetricKind::Adversarial => {
                    let hindsight =
                        hindsight_best_reward(policy.counts().counts(), problem.cache_size)?;
                    hindsight as f64 - reward as f64 + switch_cost
                }
                MetricKind::StochasticSample => {
                    comparator_hits as f64 - reward as f64 + switch_cost
                }
                MetricKind::StochasticPseudo => pseudo_gap + switch_cost,
            };
            series.points.push(RegretPoint { slot, regret, switch_cost });
        }
    }

    let switch_cost = problem.fetch_cost * total_fetches as f64;
    let record = EpisodeRecord {
        requests,
        hits,
        fetches,
        cache_history: keep_history.then_some(history),
        reward,
        total_fetches,
        switch_cost,
    };
    Ok((record, series))
}

/// Aggregate over trials at one checkpoint: means with 95% normal
/// confidence half-widths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregatePoint {
    pub slot: usize,
    pub mean_regret: f64,
    pub regret_ci: f64,
    pub mean_switch_cost: f64,
    pub switch_cost_ci: f64,
}

/// Aggregated results of a multi-trial run.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateSeries {
    pub trials: usize,
    pub points: Vec<AggregatePoint>,
    /// Mean files fetched at each slot, when recording was requested.
    pub fetch_profile: Option<Vec<f64>>,
}

impl AggregateSeries {
    pub fn endpoint(&self) -> &AggregatePoint {
        self.points.last().expect("at least one checkpoint")
    }
}

fn mean_and_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

fn worker_count(config: &ExperimentConfig) -> usize {
    config
        .workers
        .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|s| s.parse().ok()))
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        })
        .max(1)
}

/// Runs all trials of an experiment and aggregates them. Trial `i` uses
/// seed `base_seed + i`; results are merged in trial order.
pub fn run_trials(config: &ExperimentConfig) -> Result<AggregateSeries> {
    let resolved = ResolvedExperiment::new(config.clone())?;
    run_trials_resolved(&resolved)
}

pub fn run_trials_resolved(resolved: &ResolvedExperiment) -> Result<AggregateSeries> {
    let trials = resolved.config.trials;
    let workers = worker_count(&resolved.config).min(trials);

    let results: Vec<(RegretSeries, Option<Vec<u32>>)> = if workers <= 1 {
        let mut out = Vec::with_capacity(trials);
        for trial in 0..trials {
            out.push(run_one(resolved, trial)?);
        }
        out
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
        pool.install(|| {
            (0..trials)
                .into_par_iter()
                .map(|trial| run_one(resolved, trial))
                .collect::<Result<Vec<_>>>()
        })?
    };

    let checkpoints = &resolved.checkpoints;
    let mut points = Vec::with_capacity(checkpoints.len());
    for (idx, &slot) in checkpoints.iter().enumerate() {
        let regrets: Vec<f64> = results.iter().map(|(s, _)| s.points[idx].regret).collect();
        let costs: Vec<f64> = results.iter().map(|(s, _)| s.points[idx].switch_cost).collect();
        let (mean_regret, regret_ci) = mean_and_ci(&regrets);
        let (mean_switch_cost, switch_cost_ci) = mean_and_ci(&costs);
        points.push(AggregatePoint { slot, mean_regret, regret_ci, mean_switch_cost, switch_cost_ci });
    }

    let fetch_profile = if resolved.config.record_fetch_profile {
        let horizon = resolved.config.problem.horizon;
        let mut profile = vec![0.0f64; horizon];
        for (_, fetches) in &results {
            for (slot, &f) in fetches.as_ref().expect("profile recorded").iter().enumerate() {
                profile[slot] += f as f64;
            }
        }
        profile.iter_mut().for_each(|v| *v /= trials as f64);
        Some(profile)
    } else {
        None
    };

    Ok(AggregateSeries { trials, points, fetch_profile })
}

fn run_one(
    resolved: &ResolvedExperiment,
    trial: usize,
) -> Result<(RegretSeries, Option<Vec<u32>>)> {
    let (record, series) = run_episode(resolved, resolved.trial_seed(trial))?;
    let fetches = resolved.config.record_fetch_profile.then_some(record.fetches);
    Ok((series, fetches))
}

/// Parameter axis for a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// Varies the horizon `T`.
    Horizon,
    /// Varies the per-fetch cost `D`.
    FetchCost,
    /// Varies the homogeneous inter-switching period `r`.
    Period,
}

/// One sweep row: the endpoint aggregate for one axis value, or the error
/// that value produced. Errors do not abort the sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub x: f64,
    pub point: Option<AggregatePoint>,
    pub error: Option<String>,
    /// `(bound name, value)` overlay columns.
    pub bounds: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub bound_names: Vec<String>,
}

fn apply_axis(template: &ExperimentConfig, axis: SweepAxis, value: f64) -> Result<ExperimentConfig> {
    let mut config = template.clone();
    let as_count = |value: f64, what: &str| -> Result<usize> {
        if value.fract() != 0.0 || value < 1.0 || value > usize::MAX as f64 {
            return Err(Error::InvalidConfig(format!("{what} {value} is not a positive integer")));
        }
        Ok(value as usize)
    };
    match axis {
        SweepAxis::Horizon => {
            config.problem.horizon = as_count(value, "horizon")?;
        }
        SweepAxis::FetchCost => {
            config.problem.fetch_cost = value;
        }
        SweepAxis::Period => {
            config.schedule = ScheduleSpec::Homogeneous { r: as_count(value, "period")? };
        }
    }
    // Endpoint semantics: report at the final slot of each row.
    config.checkpoints = vec![config.problem.horizon];
    Ok(config)
}

/// Runs the template once per axis value and collects endpoint aggregates.
/// `overlay_bounds` names extra bound columns to evaluate per row.
pub fn sweep(
    template: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
    overlay_bounds: &[String],
) -> SweepTable {
    let mut table =
        SweepTable { rows: Vec::with_capacity(values.len()), bound_names: overlay_bounds.to_vec() };
    for &value in values {
        let row = match apply_axis(template, axis, value).and_then(|config| {
            let aggregate = run_trials(&config)?;
            let mut bound_values = Vec::with_capacity(overlay_bounds.len());
            for name in overlay_bounds {
                bound_values.push((name.clone(), evaluate_bound_overlay(name, &config)?));
            }
            Ok((*aggregate.endpoint(), bound_values))
        }) {
            Ok((point, bounds)) => {
                SweepRow { x: value, point: Some(point), error: None, bounds }
            }
            Err(err) => {
                SweepRow { x: value, point: None, error: Some(err.to_string()), bounds: Vec::new() }
            }
        };
        table.rows.push(row);
    }
    table
}

/// The `alpha` in `eta_t = alpha * sqrt(t)` that a rate schedule realizes;
/// `None` for the constant-rate kind, which the adaptive bounds do not
/// cover.
fn effective_alpha(spec: &PolicySpec, cache_size: usize) -> Option<f64> {
    let rate = match spec {
        PolicySpec::Ftpl { rate } => rate,
        PolicySpec::WFtpl { rate, .. } => rate,
        _ => return None,
    };
    match rate.kind() {
        RateKind::SqrtSlot => Some(rate.alpha()),
        RateKind::SqrtSlotOverCache => Some(rate.alpha() / (cache_size as f64).sqrt()),
        RateKind::SqrtHorizon => None,
    }
}

/// Evaluates a named bound for a configuration, for use as an overlay
/// column next to simulated regret.
pub fn evaluate_bound_overlay(name: &str, config: &ExperimentConfig) -> Result<f64> {
    let problem = &config.problem;
    let dist = || -> Result<PopularityDistribution> {
        match &config.generator {
            GeneratorSpec::Iid { pmf } => pmf.resolve(problem.library_size),
            _ => Err(Error::InvalidConfig(format!(
                "bound {name} needs an i.i.d. generator with a known distribution"
            ))),
        }
    };
    let alpha = || {
        effective_alpha(&config.policy, problem.cache_size).ok_or_else(|| {
            Error::InvalidConfig(format!("bound {name} needs an adaptive-rate FTPL policy"))
        })
    };
    match name {
        "lb-adversarial" => Ok(bounds::lb_adversarial_unrestricted(
            problem.cache_size,
            problem.horizon as f64,
        )),
        "ub-lfu-stochastic" => {
            let d = dist()?;
            Ok(bounds::ub_lfu_stochastic(
                problem.library_size,
                problem.cache_size,
                d.delta_min(problem.cache_size)?,
            ))
        }
        "ub-ftpl-adaptive-stochastic" => {
            let d = dist()?;
            Ok(bounds::ub_ftpl_adaptive_stochastic(
                problem.library_size,
                problem.cache_size,
                problem.fetch_cost,
                alpha()?,
                d.delta_min(problem.cache_size)?,
            ))
        }
        "ub-wftpl-stochastic" => {
            let d = dist()?;
            let (wait_scale, wait_exponent) = match &config.policy {
                PolicySpec::WFtpl { wait_scale, wait_exponent, .. } => (*wait_scale, *wait_exponent),
                _ => {
                    return Err(Error::InvalidConfig(format!("bound {name} needs a W-FTPL policy")))
                }
            };
            Ok(bounds::ub_wftpl_stochastic(
                problem.library_size,
                problem.cache_size,
                problem.fetch_cost,
                alpha()?,
                d.delta_min(problem.cache_size)?,
                wait_scale,
                wait_exponent,
            ))
        }
        "ub-ftpl-periodic-stochastic" => {
            let d = dist()?;
            let r = match &config.schedule {
                ScheduleSpec::Homogeneous { r } => *r,
                _ => {
                    return Err(Error::InvalidConfig(format!(
                        "bound {name} needs a homogeneous schedule"
                    )))
                }
            };
            Ok(bounds::ub_ftpl_periodic_stochastic(
                r,
                problem.library_size,
                problem.cache_size,
                alpha()?,
                d.delta_min(problem.cache_size)?,
            ))
        }
        other => Err(Error::InvalidConfig(format!("unknown bound overlay: {other}"))),
    }
}

/// Formats a float with 6 significant digits.
pub fn format_sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0.00000".into();
    }
    let exponent = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&exponent) {
        format!("{x:.5e}")
    } else {
        format!("{:.*}", (5 - exponent).max(0) as usize, x)
    }
}

const CSV_HEADER: &str = "x,mean_regret,ci_lo,ci_hi,mean_switch_cost,sc_ci_lo,sc_ci_hi";

fn write_point_fields<W: Write>(out: &mut W, point: &AggregatePoint) -> Result<()> {
    write!(
        out,
        "{},{},{},{},{},{}",
        format_sig6(point.mean_regret),
        format_sig6(point.mean_regret - point.regret_ci),
        format_sig6(point.mean_regret + point.regret_ci),
        format_sig6(point.mean_switch_cost),
        format_sig6(point.mean_switch_cost - point.switch_cost_ci),
        format_sig6(point.mean_switch_cost + point.switch_cost_ci),
    )?;
    Ok(())
}

/// Writes an aggregate series as CSV with the checkpoint slot as `x`.
pub fn write_series_csv<W: Write>(series: &AggregateSeries, mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for point in &series.points {
        write!(out, "{},", point.slot)?;
        write_point_fields(&mut out, point)?;
        writeln!(out)?;
    }
    Ok(())
}

/// Writes a sweep table as CSV with the axis value as `x`; rows whose run
/// failed carry `nan` fields so the axis order stays intact.
pub fn write_sweep_csv<W: Write>(table: &SweepTable, mut out: W) -> Result<()> {
    write!(out, "{CSV_HEADER}")?;
    for name in &table.bound_names {
        write!(out, ",bound_{}", name.replace('-', "_"))?;
    }
    writeln!(out)?;
    for row in &table.rows {
        write!(out, "{}", format_sig6(row.x))?;
        match &row.point {
            Some(point) => {
                write!(out, ",")?;
                write_point_fields(&mut out, point)?;
                for (_, value) in &row.bounds {
                    write!(out, ",{}", format_sig6(*value))?;
                }
            }
            None => {
                for _ in 0..6 + table.bound_names.len() {
                    write!(out, ",nan")?;
                }
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Writes a series CSV to a file path.
pub fn emit_series_csv<P: AsRef<Path>>(series: &AggregateSeries, path: P) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    write_series_csv(series, &mut file)
}

/// Writes a sweep CSV to a file path.
pub fn emit_sweep_csv<P: AsRef<Path>>(table: &SweepTable, path: P) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    write_sweep_csv(table, &mut file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::LearningRateSchedule;

    fn base_config() -> ExperimentConfig {
        ExperimentConfig {
            problem: ProblemConfig::new(10, 4, 200, 0.0).unwrap(),
            policy: PolicySpec::Ftpl {
                rate: LearningRateSchedule::new(RateKind::SqrtSlotOverCache, 1.0).unwrap(),
            },
            generator: GeneratorSpec::Iid { pmf: PmfSpec::Dyadic },
            schedule: ScheduleSpec::Unrestricted,
            metric: MetricKind::StochasticPseudo,
            trials: 4,
            base_seed: 7,
            checkpoints: vec![50, 100, 200],
            record_fetch_profile: false,
            workers: Some(1),
        }
    }

    #[test]
    fn episode_is_deterministic() {
        let resolved = ResolvedExperiment::new(base_config()).unwrap();
        let (a_rec, a_series) = run_episode(&resolved, 99).unwrap();
        let (b_rec, b_series) = run_episode(&resolved, 99).unwrap();
        assert_eq!(a_rec.requests, b_rec.requests);
        assert_eq!(a_rec.hits, b_rec.hits);
        assert_eq!(a_rec.fetches, b_rec.fetches);
        assert_eq!(a_series, b_series);
    }

    #[test]
    fn horizon_one_has_no_switch_cost() {
        let mut config = base_config();
        config.problem.horizon = 1;
        config.problem.fetch_cost = 100.0;
        config.checkpoints = vec![1];
        let resolved = ResolvedExperiment::new(config).unwrap();
        let (record, _) = run_episode(&resolved, 3).unwrap();
        assert_eq!(record.total_fetches, 0);
        assert_eq!(record.switch_cost, 0.0);
    }

    #[test]
    fn switch_cost_is_bounded_by_update_budget() {
        let mut config = base_config();
        config.problem.fetch_cost = 3.0;
        config.schedule = ScheduleSpec::Homogeneous { r: 50 };
        let resolved = ResolvedExperiment::new(config.clone()).unwrap();
        let (record, series) = run_episode(&resolved, 5).unwrap();
        let updates = resolved.schedule.allowed_slots().len() as f64;
        let cap = config.problem.fetch_cost * config.problem.cache_size as f64 * (updates - 1.0);
        assert!(record.switch_cost <= cap);
        for pair in series.points.windows(2) {
            assert!(pair[1].switch_cost >= pair[0].switch_cost);
        }
    }

    #[test]
    fn single_period_schedule_freezes_every_policy() {
        let mut config = base_config();
        config.metric = MetricKind::StochasticPseudo;
        config.schedule = ScheduleSpec::Homogeneous { r: 200 };
        let resolved = ResolvedExperiment::new(config).unwrap();
        let (record, _) = run_episode(&resolved, 11).unwrap();
        assert_eq!(record.total_fetches, 0);
        let history = record.cache_history.unwrap();
        assert!(history.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn trials_one_has_zero_ci() {
        let mut config = base_config();
        config.trials = 1;
        let aggregate = run_trials(&config).unwrap();
        for point in &aggregate.points {
            assert_eq!(point.regret_ci, 0.0);
            assert_eq!(point.switch_cost_ci, 0.0);
        }
    }

    #[test]
    fn degenerate_episodes_have_zero_variance() {
        // A static policy on a deterministic sequence: every trial equal.
        let mut config = base_config();
        config.policy = PolicySpec::Static { files: vec![0, 1, 2, 3] };
        config.generator = GeneratorSpec::RoundRobin { start: 0 };
        config.metric = MetricKind::Adversarial;
        config.trials = 5;
        let aggregate = run_trials(&config).unwrap();
        for point in &aggregate.points {
            assert_eq!(point.regret_ci, 0.0);
        }
    }

    #[test]
    fn point_mass_keeps_pseudo_regret_small() {
        let mut config = base_config();
        config.generator = GeneratorSpec::Iid {
            pmf: PmfSpec::Explicit { probs: vec![1.0, 0.0, 0.0, 0.0] },
        };
        config.problem = ProblemConfig::new(4, 1, 100, 0.0).unwrap();
        config.policy = PolicySpec::Lfu;
        config.trials = 10;
        config.checkpoints = vec![10, 50, 100];
        let aggregate = run_trials(&config).unwrap();
        for point in &aggregate.points {
            assert!(point.mean_regret <= 1.0, "pseudo regret {}", point.mean_regret);
        }
    }

    #[test]
    fn comparator_as_policy_has_exactly_zero_regret() {
        // Round-robin over the full library: hindsight top-C is known.
        let mut config = base_config();
        config.problem = ProblemConfig::new(5, 2, 100, 0.0).unwrap();
        config.generator = GeneratorSpec::RoundRobin { start: 0 };
        config.metric = MetricKind::Adversarial;
        config.policy = PolicySpec::Static { files: vec![0, 1] };
        config.trials = 3;
        config.checkpoints = vec![100];
        let aggregate = run_trials(&config).unwrap();
        let end = aggregate.endpoint();
        assert_eq!(end.mean_regret, 0.0);
        assert_eq!(end.regret_ci, 0.0);
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let mut config = base_config();
        config.trials = 6;
        config.workers = Some(1);
        let sequential = run_trials(&config).unwrap();
        config.workers = Some(4);
        let parallel = run_trials(&config).unwrap();
        assert_eq!(sequential, parallel);

        let mut seq_csv = Vec::new();
        write_series_csv(&sequential, &mut seq_csv).unwrap();
        let mut par_csv = Vec::new();
        write_series_csv(&parallel, &mut par_csv).unwrap();
        assert_eq!(seq_csv, par_csv);
    }

    #[test]
    fn sample_and_pseudo_estimate_the_same_expectation() {
        let mut config = base_config();
        config.problem = ProblemConfig::new(5, 2, 400, 0.0).unwrap();
        config.generator =
            GeneratorSpec::Iid { pmf: PmfSpec::Zipf { exponent: 1.0 } };
        config.trials = 200;
        config.checkpoints = vec![400];
        config.metric = MetricKind::StochasticSample;
        let sample = run_trials(&config).unwrap();
        config.metric = MetricKind::StochasticPseudo;
        let pseudo = run_trials(&config).unwrap();
        let (s, p) = (sample.endpoint(), pseudo.endpoint());
        // Pooled 3-sigma agreement; CI fields are 1.96-sigma half-widths.
        let pooled = ((s.regret_ci / 1.96).powi(2) + (p.regret_ci / 1.96).powi(2)).sqrt();
        assert!(
            (s.mean_regret - p.mean_regret).abs() <= 3.0 * pooled,
            "sample {} vs pseudo {} (pooled sigma {pooled})",
            s.mean_regret,
            p.mean_regret
        );
    }

    #[test]
    fn sweep_over_horizon_and_errors() {
        let mut config = base_config();
        config.trials = 2;
        let table = sweep(&config, SweepAxis::Horizon, &[100.0, 200.0], &[]);
        assert_eq!(table.rows.len(), 2);
        assert!(table.rows.iter().all(|r| r.point.is_some()));
        assert_eq!(table.rows[0].point.unwrap().slot, 100);

        // A period that does not divide the horizon records an error row
        // and the sweep continues.
        let table = sweep(&config, SweepAxis::Period, &[7.0, 50.0], &[]);
        assert!(table.rows[0].point.is_none());
        assert!(table.rows[0].error.as_deref().unwrap().contains("divide"));
        assert!(table.rows[1].point.is_some());
    }

    #[test]
    fn sweep_fetch_cost_grid() {
        let mut config = base_config();
        config.trials = 2;
        config.problem.horizon = 100;
        let values: Vec<f64> = (1..=9).map(|i| (20 * i) as f64).collect();
        let table = sweep(&config, SweepAxis::FetchCost, &values, &[]);
        assert_eq!(table.rows.len(), 9);
        assert!(table.rows.iter().all(|r| r.point.is_some()));
    }

    #[test]
    fn overlay_bounds_evaluate() {
        let config = base_config();
        let value = evaluate_bound_overlay("ub-ftpl-adaptive-stochastic", &config).unwrap();
        assert!(value.is_finite() && value > 0.0);
        assert!(evaluate_bound_overlay("no-such-bound", &config).is_err());

        let mut restricted = base_config();
        restricted.schedule = ScheduleSpec::Homogeneous { r: 50 };
        let value = evaluate_bound_overlay("ub-ftpl-periodic-stochastic", &restricted).unwrap();
        assert!(value.is_finite() && value > 0.0);
    }

    #[test]
    fn csv_formats() {
        assert_eq!(format_sig6(1.0), "1.00000");
        assert_eq!(format_sig6(512.2825), "512.283");
        assert_eq!(format_sig6(0.004578909722), "0.00457891");
        assert_eq!(format_sig6(0.0), "0.00000");
        assert_eq!(format_sig6(f64::INFINITY), "inf");
        assert_eq!(format_sig6(1234567.0), "1.23457e6");

        let series = AggregateSeries {
            trials: 1,
            points: vec![AggregatePoint {
                slot: 10,
                mean_regret: 1.5,
                regret_ci: 0.5,
                mean_switch_cost: 0.0,
                switch_cost_ci: 0.0,
            }],
            fetch_profile: None,
        };
        let mut out = Vec::new();
        write_series_csv(&series, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "x,mean_regret,ci_lo,ci_hi,mean_switch_cost,sc_ci_lo,sc_ci_hi"
        );
        assert_eq!(
            lines.next().unwrap(),
            "10,1.50000,1.00000,2.00000,0.00000,0.00000,0.00000"
        );
        assert!(lines.next().is_none());

        // Empty sweep: header only. Overlay adds a column.
        let table = SweepTable { rows: vec![], bound_names: vec!["lb-adversarial".into()] };
        let mut out = Vec::new();
        write_sweep_csv(&table, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "x,mean_regret,ci_lo,ci_hi,mean_switch_cost,sc_ci_lo,sc_ci_hi,bound_lb_adversarial\n"
        );
    }

    #[test]
    fn config_round_trips_through_json() {
        let config = base_config();
        let json = config.to_json_string();
        let parsed = ExperimentConfig::from_json_str(&json).unwrap();
        assert_eq!(parsed, config);
        assert!(ExperimentConfig::from_json_str("{\"bogus\": 1}").is_err());
    }

    #[test]
    fn resolution_rejects_inconsistent_configs() {
        let mut config = base_config();
        config.metric = MetricKind::StochasticPseudo;
        config.generator = GeneratorSpec::RoundRobin { start: 0 };
        assert!(ResolvedExperiment::new(config).is_err());

        let mut config = base_config();
        config.checkpoints = vec![0];
        assert!(ResolvedExperiment::new(config).is_err());

        let mut config = base_config();
        config.checkpoints = vec![500];
        assert!(ResolvedExperiment::new(config).is_err());

        let mut config = base_config();
        config.trials = 0;
        assert!(ResolvedExperiment::new(config).is_err());
    }

    #[test]
    fn fetch_profile_records_mean_fetches() {
        let mut config = base_config();
        config.record_fetch_profile = true;
        config.problem.fetch_cost = 1.0;
        config.trials = 3;
        let aggregate = run_trials(&config).unwrap();
        let profile = aggregate.fetch_profile.as_ref().unwrap();
        assert_eq!(profile.len(), 200);
        assert_eq!(profile[0], 0.0);
        let total: f64 = profile.iter().sum();
        let end = aggregate.endpoint();
        assert!((total - end.mean_switch_cost).abs() < 1e-9);
    }
}
