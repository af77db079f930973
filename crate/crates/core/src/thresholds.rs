//! Belief and time thresholds.
//!
//! All of these have closed forms (linear or logarithmic solves of the
//! indifference conditions); the unit tests re-derive each one with bisection
//! on its defining equation as an independent oracle.

use serde::{Deserialize, Serialize};

use crate::env::{Environment, Quality, Regime, Stop};
use crate::scalar::Real;

/// Cached threshold constants for one environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds<T> {
    /// Smallest belief at which the agent starts working with no information.
    pub mu_bar: T,
    /// Belief at which the agent is indifferent about starting in the
    /// pessimistic case; equals `mu_bar` when the rates coincide.
    pub mu_hat: T,
    /// Required discounted disclosure weight in the principal's reduced
    /// program; lies in (0,1) exactly when `mu` is in `(0, mu_bar)`.
    pub c1: T,
    /// `1 - c1`, the budget side of the interim obedience constraints.
    pub c2: T,
}

impl<T: Real> Thresholds<T> {
    pub fn new(env: &Environment<T>) -> Self {
        Thresholds {
            mu_bar: mu_bar(env),
            mu_hat: mu_hat(env),
            c1: c1(env),
            c2: c2(env),
        }
    }
}

/// Smallest belief at which working until completion beats shirking now:
/// the root of `mu v(H) + (1-mu) v(L) = 0`.
pub fn mu_bar<T: Real>(env: &Environment<T>) -> T {
    let v_high = env.agent_value_complete(Quality::High);
    let v_low = env.agent_value_complete(Quality::Low);
    -v_low / (v_high - v_low)
}

/// Indifference belief for starting work in the pessimistic case: the root of
/// `mu (r+lambda_H) v(H) + (1-mu)(r+lambda_L) v(L) = 0`. Reduces to
/// [`mu_bar`] when the completion rates coincide.
pub fn mu_hat<T: Real>(env: &Environment<T>) -> T {
    let gain = env.agent_decay(Quality::High) * env.agent_value_complete(Quality::High);
    let loss = env.agent_decay(Quality::Low) * (-env.agent_value_complete(Quality::Low));
    loss / (gain + loss)
}

/// `1 - mu v(H) / ((1-mu) [-v(L)])`.
pub fn c1<T: Real>(env: &Environment<T>) -> T {
    T::one() - c2(env)
}

/// `mu v(H) / ((1-mu) [-v(L)])`.
pub fn c2<T: Real>(env: &Environment<T>) -> T {
    let v_high = env.agent_value_complete(Quality::High);
    let v_low = env.agent_value_complete(Quality::Low);
    env.mu() * v_high / ((T::one() - env.mu()) * (-v_low))
}

/// Smallest prior for which full disclosure delayed to `t` still motivates
/// the agent: the root of `mu v(H) + (1-mu) v(t, L) = 0` in `mu`.
pub fn mu_tilde<T: Real>(env: &Environment<T>, t: T) -> T {
    let v_high = env.agent_value_complete(Quality::High);
    let v_low_t = env.agent_value(Stop::At(t), Quality::Low);
    -v_low_t / (v_high - v_low_t)
}

/// Maximum disclosure delay keeping the agent's ex-ante value non-negative.
///
/// Stationary/optimistic: `-ln(C1)/(r+lambda_L)` for `mu < mu_bar`, `Never`
/// otherwise. Pessimistic: `-ln(1-C2)/(r+lambda_L)` for `mu <= mu_hat`, and
/// `t_bar(mu) + t_tilde(mu_hat)` above it (the constraint binds at `t_bar`,
/// so the effective delay is measured from there).
pub fn t_tilde<T: Real>(env: &Environment<T>) -> Stop<T> {
    match env.regime() {
        Regime::Pessimistic => {
            let hat = mu_hat(env);
            if env.mu() <= hat {
                Stop::At(delay_from_budget(env, c2(env)))
            } else {
                let at_hat = env
                    .with_prior(hat)
                    .expect("mu_hat lies strictly inside (0,1)");
                Stop::At(t_bar(env) + delay_from_budget(&at_hat, c2(&at_hat)))
            }
        }
        Regime::Stationary | Regime::Optimistic => {
            if env.mu() >= mu_bar(env) {
                Stop::Never
            } else {
                Stop::At(delay_from_budget(env, c2(env)))
            }
        }
    }
}

/// `-ln(1 - budget) / (r + lambda_L)`; `budget` must lie in `[0, 1)`.
fn delay_from_budget<T: Real>(env: &Environment<T>, budget: T) -> T {
    -(T::one() - budget).ln() / env.agent_decay(Quality::Low)
}

/// Time at which the no-news posterior falls to `mu_hat` (pessimistic case):
/// `(log(mu/(1-mu)) - log(mu_hat/(1-mu_hat))) / (lambda_H - lambda_L)`.
/// Returns 0 for `mu <= mu_hat` (the agent shirks immediately).
pub fn t_bar<T: Real>(env: &Environment<T>) -> T {
    let hat = mu_hat(env);
    let mu = env.mu();
    if mu <= hat {
        return T::zero();
    }
    let logit = |x: T| (x / (T::one() - x)).ln();
    (logit(mu) - logit(hat)) / env.rate_gap()
}
