//! Closed-form evaluators for the theoretical regret and switch-cost bounds.
//!
//! Every function here is pure and deterministic; they are used as plot
//! overlays and as reference lines in the acceptance checks. Conventions:
//!
//! - All logarithms are natural.
//! - Asymptotic correction terms only stated order-wise are dropped, so
//!   lower-bound evaluators return the leading closed form and act as
//!   optimistic reference lines.
//! - A zero popularity gap makes the stochastic upper bounds vacuous; the
//!   evaluators return infinity rather than an error so that parameter
//!   sweeps over degenerate distributions still complete.

use std::f64::consts::PI;

use crate::generators::PopularityDistribution;
use crate::policies::wait_threshold;

/// Regret lower bound for any policy under unrestricted adversarial
/// requests: `sqrt(C*T / 2pi)`.
pub fn lb_adversarial_unrestricted(cache_size: usize, horizon: f64) -> f64 {
    (cache_size as f64 * horizon / (2.0 * PI)).sqrt()
}

/// Stochastic regret upper bound for LFU:
/// `min(16 / gap^2, 4C(L-C) / gap)`.
pub fn ub_lfu_stochastic(library_size: usize, cache_size: usize, delta_min: f64) -> f64 {
    if delta_min <= 0.0 {
        return f64::INFINITY;
    }
    let linear = 4.0 * (cache_size * (library_size - cache_size)) as f64 / delta_min;
    (16.0 / (delta_min * delta_min)).min(linear)
}

/// Stochastic regret lower bound for FTPL with a constant learning rate:
/// `eta * exp(-((1 + eta) / eta)^2) / 4`.
pub fn lb_ftpl_constant_stochastic(eta: f64) -> f64 {
    if eta <= 0.0 {
        return 0.0;
    }
    let ratio = (1.0 + eta) / eta;
    eta * (-ratio * ratio).exp() / 4.0
}

/// Slot threshold after which the adaptive-rate FTPL analysis applies:
/// `max(8, 32 alpha^2) * ln(L^3) / gap^2`.
pub fn t_zero(library_size: usize, alpha: f64, delta_min: f64) -> f64 {
    let log_term = 3.0 * (library_size as f64).ln();
    let gap_sq = delta_min * delta_min;
    ((8.0 / gap_sq) * log_term).max((32.0 * alpha * alpha / gap_sq) * log_term)
}

/// Stochastic regret upper bound (including switch cost) for FTPL with the
/// adaptive rate `alpha * sqrt(t)`:
/// `(1 + DC) t0 + (1 + D/gap)(8/gap + 32 alpha^2 / gap)`.
///
/// The underlying analysis assumes `L >= 3`.
pub fn ub_ftpl_adaptive_stochastic(
    library_size: usize,
    cache_size: usize,
    fetch_cost: f64,
    alpha: f64,
    delta_min: f64,
) -> f64 {
    if delta_min <= 0.0 {
        return f64::INFINITY;
    }
    let t0 = t_zero(library_size, alpha, delta_min);
    (1.0 + fetch_cost * cache_size as f64) * t0
        + (1.0 + fetch_cost / delta_min) * (8.0 / delta_min + 32.0 * alpha * alpha / delta_min)
}

/// Stochastic regret upper bound (including switch cost) for W-FTPL with
/// rate `alpha * sqrt(t)` and wait parameters `scale`/`exponent`.
pub fn ub_wftpl_stochastic(
    library_size: usize,
    _cache_size: usize,
    fetch_cost: f64,
    alpha: f64,
    delta_min: f64,
    wait_scale: f64,
    wait_exponent: f64,
) -> f64 {
    if delta_min <= 0.0 {
        return f64::INFINITY;
    }
    let gap_sq = delta_min * delta_min;
    let alpha_sq = alpha * alpha;
    let wait = wait_threshold(wait_scale, wait_exponent, fetch_cost);
    let log_term = (library_size as f64).powi(3).ln() - std::f64::consts::LN_2;
    let t_prime = ((8.0 / gap_sq) * log_term)
        .max((32.0 * alpha_sq / gap_sq) * log_term)
        .max(wait);
    let tail = 2.0 * (library_size as f64).powi(3) * fetch_cost
        * ((-wait * gap_sq / 8.0).exp() * 8.0 / gap_sq
            + (-wait * gap_sq / (32.0 * alpha_sq)).exp() * 32.0 * alpha_sq / gap_sq);
    t_prime + 16.0 / delta_min + 64.0 * alpha_sq / delta_min + tail
}

/// Stochastic regret lower bound under restricted switching for a two-file
/// library with popularity gap `gap` and both popularities above `floor`:
/// `r1 gap / 2 + sum_{i>=2} r_i (gap/4) exp(-t_i gap^2 / floor^2)`.
pub fn lb_restricted_stochastic(periods: &[usize], gap: f64, floor: f64) -> f64 {
    if periods.is_empty() {
        return 0.0;
    }
    let mut value = periods[0] as f64 * gap / 2.0;
    let mut elapsed = periods[0];
    for &r in &periods[1..] {
        value +=
            r as f64 * gap / 4.0 * (-(elapsed as f64) * gap * gap / (floor * floor)).exp();
        elapsed += r;
    }
    value
}

/// Stochastic regret upper bound for FTPL(`alpha * sqrt(t)`) under an
/// arbitrary restricted-switching schedule: a triple sum over the sorted
/// popularity gaps and the phase boundaries.
pub fn ub_ftpl_restricted_stochastic(
    periods: &[usize],
    dist: &PopularityDistribution,
    cache_size: usize,
    alpha: f64,
) -> f64 {
    if periods.is_empty() {
        return 0.0;
    }
    let sorted = dist.sorted_probs();
    let alpha_sq = alpha * alpha;
    let mut value = periods[0] as f64;
    for j in 0..cache_size {
        for k in cache_size..sorted.len() {
            let gap = sorted[j] - sorted[k];
            let gap_sq = gap * gap;
            let mut elapsed = periods[0];
            for &r in &periods[1..] {
                let t_i = elapsed as f64;
                value += 2.0
                    * r as f64
                    * gap
                    * ((-t_i * gap_sq / 8.0).exp() + (-t_i * gap_sq / (32.0 * alpha_sq)).exp());
                elapsed += r;
            }
        }
    }
    value
}

/// Slot threshold for the homogeneous restricted analysis:
/// `max(r, max(8, 32 alpha^2) * ln(L^2) / gap^2)`.
pub fn t_zero_prime(period: usize, library_size: usize, alpha: f64, delta_min: f64) -> f64 {
    let log_term = 2.0 * (library_size as f64).ln();
    let gap_sq = delta_min * delta_min;
    (period as f64)
        .max((8.0 / gap_sq) * log_term)
        .max((32.0 * alpha * alpha / gap_sq) * log_term)
}

/// Stochastic regret upper bound for FTPL(`alpha * sqrt(t)`) when updates
/// are allowed every `period` slots:
/// `1 + t0' + 2 (8/gap + 32 alpha^2 / gap)`.
pub fn ub_ftpl_periodic_stochastic(
    period: usize,
    library_size: usize,
    _cache_size: usize,
    alpha: f64,
    delta_min: f64,
) -> f64 {
    if delta_min <= 0.0 {
        return f64::INFINITY;
    }
    1.0 + t_zero_prime(period, library_size, alpha, delta_min)
        + 2.0 * (8.0 / delta_min + 32.0 * alpha * alpha / delta_min)
}

/// Adversarial regret lower bound under restricted switching, with the flag
/// telling whether the necessary condition `4 max r_i <= sqrt(sum r_i^2)`
/// holds; when it fails the value is not a meaningful bound.
pub fn lb_restricted_adversarial(periods: &[usize], cache_size: usize) -> (f64, bool) {
    let sum_sq: f64 = periods.iter().map(|&r| (r as f64) * (r as f64)).sum();
    let sum_fourth: f64 = periods.iter().map(|&r| (r as f64).powi(4)).sum();
    let max_r = periods.iter().copied().max().unwrap_or(0);
    let c = cache_size as f64;
    let value = 0.5
        * (0.15 * (c * sum_sq).sqrt() * (1.0 - (c - 1.0) * sum_fourth / (2.0 * sum_sq * sum_sq))
            - 0.6 * c * max_r as f64);
    // Exact in integers: 16 max^2 <= sum of squares.
    let max_sq = (max_r as u128) * (max_r as u128);
    let sum_sq_int: u128 = periods.iter().map(|&r| (r as u128) * (r as u128)).sum();
    (value, 16 * max_sq <= sum_sq_int)
}

/// Adversarial regret upper bound for FTPL(`alpha * sqrt(t)`) under
/// restricted switching; the phase sum uses `r_0 = 1`.
pub fn ub_ftpl_restricted_adversarial(
    periods: &[usize],
    library_size: usize,
    cache_size: usize,
    alpha: f64,
    horizon: usize,
) -> f64 {
    let c = cache_size as f64;
    let log_ratio = (2.0 * (library_size as f64 / c).ln()).sqrt();
    let mut phase_sum = 0.0;
    let mut elapsed = 1usize; // r_0 = 1
    for &r in periods {
        phase_sum += (r as f64) * (r as f64) / (alpha * (elapsed as f64).sqrt());
        elapsed += r;
    }
    alpha * c * log_ratio
        + alpha * c * (horizon as f64).sqrt() * log_ratio
        + (2.0 / PI).sqrt() * phase_sum
}

/// Which asymptotic regime a periodic adversarial lower bound falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Sublinear,
    Linear,
}

/// Adversarial regret lower bound when updates are allowed every `period`
/// slots: `sqrt(C r T / 2pi)` while the period is a vanishing fraction of
/// the horizon; once the period reaches the horizon the regret is linear
/// and `T/2` is returned as the reference line.
pub fn lb_periodic_adversarial(period: usize, cache_size: usize, horizon: usize) -> (f64, Regime) {
    if period >= horizon {
        return (horizon as f64 / 2.0, Regime::Linear);
    }
    let value =
        (cache_size as f64 * period as f64 * horizon as f64 / (2.0 * PI)).sqrt();
    (value, Regime::Sublinear)
}

/// Expected number of files FTPL(`alpha * sqrt(t)`) fetches over the whole
/// horizon under adversarial requests. Multiply by the per-fetch cost to
/// get the switch-cost bound.
pub fn ub_ftpl_adversarial_switches(library_size: usize, alpha: f64, horizon: usize) -> f64 {
    let n = library_size as f64;
    let t = horizon as f64;
    let e = std::f64::consts::E;
    let common = 2.0 + (2.0 * e * (2.0 * n).ln()).sqrt();
    3.0 * std::f64::consts::SQRT_2 / (alpha * PI.sqrt()) * (t.sqrt() - 1.0)
        + (n - 1.0) * common / e.sqrt() * t.ln()
        + 3.0 * (n - 1.0) * common / ((2.0 * PI * e).sqrt() * alpha) * (1.0 - 1.0 / t.sqrt())
}

/// Reward-regret component of the adversarial W-FTPL bound with rate
/// `alpha * sqrt(t)` and waiting slot `t'`; add the switch bound times the
/// fetch cost for the full cost bound.
pub fn ub_wftpl_adversarial(
    library_size: usize,
    cache_size: usize,
    alpha: f64,
    horizon: usize,
    wait_slot: f64,
) -> f64 {
    let n = library_size as f64;
    let c = cache_size as f64;
    let eta_after_wait = alpha * (wait_slot + 1.0).sqrt();
    let eta_final = alpha * (horizon as f64).sqrt();
    let inverse_rate_sum: f64 =
        (1..=horizon).map(|t| 1.0 / (alpha * (t as f64).sqrt())).sum();
    2.0 * wait_slot
        + eta_after_wait * c * (2.0 * (n / c).ln()).sqrt()
        + eta_final * c * (2.0 * (n * std::f64::consts::E / c).ln()).sqrt()
        + (2.0 / PI).sqrt() * inverse_rate_sum
}
