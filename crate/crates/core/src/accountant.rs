//! Composition of per-round, per-cluster `(ε, δ)` guarantees over `N`
//! clusters and `T` rounds.
//!
//! Three regimes are reported side by side:
//!
//! * parallel: clusters hold disjoint data, so the budget is `(ε, δ)`;
//! * naive sequential: `(N·T·ε, N·T·δ)`;
//! * advanced: `δ̄ = N·T·δ + δ̀` and
//!   `ε̄ = ε·sqrt(2·N·T·ln(1/δ̄)) + N·T·ε·(e^ε − 1)`.
//!
//! The accountant only describes a run; it never stops training.

use alloc::format;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Parallel,
    NaiveSequential,
    Advanced,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Parallel => "parallel",
            Regime::NaiveSequential => "naive_sequential",
            Regime::Advanced => "advanced",
        }
    }
}

/// A composed `(ε̄, δ̄)` guarantee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    pub epsilon_bar: f64,
    /// Clamped to `[0, 1]`.
    pub delta_bar: f64,
    pub regime: Regime,
    /// Set when the raw `δ̄` exceeded 1 and was clamped ("no guarantee").
    pub delta_clamped: bool,
}

fn check_base(epsilon: f64, delta: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid("epsilon", "must be positive and finite"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", "must lie in (0, 1)"));
    }
    Ok(())
}

fn check_counts(clusters: usize, rounds: usize) -> Result<f64> {
    if clusters == 0 || rounds == 0 {
        return Err(invalid("clusters/rounds", "must be at least 1"));
    }
    Ok(clusters as f64 * rounds as f64)
}

pub fn compose_parallel(epsilon: f64, delta: f64) -> Result<PrivacyBudget> {
    check_base(epsilon, delta)?;
    Ok(PrivacyBudget {
        epsilon_bar: epsilon,
        delta_bar: delta,
        regime: Regime::Parallel,
        delta_clamped: false,
    })
}

pub fn compose_naive(epsilon: f64, delta: f64, clusters: usize, rounds: usize) -> Result<PrivacyBudget> {
    check_base(epsilon, delta)?;
    let k = check_counts(clusters, rounds)?;
    let raw = k * delta;
    Ok(PrivacyBudget {
        epsilon_bar: k * epsilon,
        delta_bar: raw.min(1.0),
        regime: Regime::NaiveSequential,
        delta_clamped: raw > 1.0,
    })
}

pub fn compose_advanced(
    epsilon: f64,
    delta: f64,
    clusters: usize,
    rounds: usize,
    delta_slack: f64,
) -> Result<PrivacyBudget> {
    check_base(epsilon, delta)?;
    let k = check_counts(clusters, rounds)?;
    if !(delta_slack >= 0.0 && delta_slack.is_finite()) {
        return Err(invalid("delta_slack", "must be nonnegative and finite"));
    }
    let delta_bar = k * delta + delta_slack;
    if delta_bar >= 1.0 {
        return Err(Error::Domain(format!(
            "composed δ̄ = {delta_bar} ≥ 1; ln(1/δ̄) is not positive"
        )));
    }
    let epsilon_bar = epsilon * libm::sqrt(2.0 * k * libm::log(1.0 / delta_bar))
        + k * epsilon * libm::expm1(epsilon);
    Ok(PrivacyBudget {
        epsilon_bar,
        delta_bar,
        regime: Regime::Advanced,
        delta_clamped: false,
    })
}

/// All three regimes for one configuration. The advanced regime is an error
/// when `N·T·δ + δ̀ ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetReport {
    pub parallel: PrivacyBudget,
    pub naive: PrivacyBudget,
    pub advanced: Result<PrivacyBudget>,
}

pub fn compose_all(
    epsilon: f64,
    delta: f64,
    clusters: usize,
    rounds: usize,
    delta_slack: f64,
) -> Result<BudgetReport> {
    Ok(BudgetReport {
        parallel: compose_parallel(epsilon, delta)?,
        naive: compose_naive(epsilon, delta, clusters, rounds)?,
        advanced: compose_advanced(epsilon, delta, clusters, rounds, delta_slack),
    })
}

/// Smallest `ε` on a geometric grid from `lo` to `hi` at which the advanced
/// bound stops beating the naive one, if the crossover lies in the range.
pub fn advanced_naive_crossover(
    delta: f64,
    clusters: usize,
    rounds: usize,
    delta_slack: f64,
    lo: f64,
    hi: f64,
    steps: usize,
) -> Result<Option<f64>> {
    if !(lo > 0.0 && hi > lo) || steps < 2 {
        return Err(invalid("grid", "need 0 < lo < hi and at least two steps"));
    }
    let ratio = libm::pow(hi / lo, 1.0 / (steps - 1) as f64);
    let mut eps = lo;
    for _ in 0..steps {
        let adv = compose_advanced(eps, delta, clusters, rounds, delta_slack)?;
        let naive = compose_naive(eps, delta, clusters, rounds)?;
        if adv.epsilon_bar >= naive.epsilon_bar {
            return Ok(Some(eps));
        }
        eps *= ratio;
    }
    Ok(None)
}
