//! Bayesian belief dynamics and best-response verification.
//!
//! The posterior along the no-news path and conditional on a schedule both
//! come from Bayes' rule over exponential completion times; continuation
//! values integrate the payoff functions against the surviving part of the
//! schedule. All integrals are analytic (atoms and exponential pieces).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Environment, Quality, Regime, Stop};
use crate::numeric::geometric_grid;
use crate::policies::ShirkSchedule;
use crate::scalar::{real, Real};
use crate::thresholds;

/// Default absolute tolerance for obedience checks.
pub const OBEDIENCE_TOL: f64 = 1e-7;

/// Default number of geometric grid points for obedience checks.
pub const OBEDIENCE_GRID: usize = 512;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("posterior undefined at time {at}: no survival under either quality")]
    UndefinedPosterior { at: f64 },
}

/// Posterior that the task has high quality after `t` units of silence with
/// no completion and no disclosure: `mu / (mu + e^{(lambda_H-lambda_L) t} (1-mu))`.
pub fn posterior_no_news<T: Real>(env: &Environment<T>, t: T) -> T {
    let mu = env.mu();
    mu / (mu + (env.rate_gap() * t).exp() * (T::one() - mu))
}

/// Posterior conditional on survival at `s` under a schedule: the no-news
/// update reweighted by the per-quality survival probabilities. Computed in
/// log-odds so large rate gaps cannot overflow.
pub fn posterior_under_schedule<T: Real>(
    env: &Environment<T>,
    sched: &ShirkSchedule<T>,
    s: T,
) -> Result<T, AgentError> {
    let surv_high = sched.alpha.survival(s);
    let surv_low = sched.beta.survival(s);
    if surv_high <= T::zero() && surv_low <= T::zero() {
        return Err(AgentError::UndefinedPosterior {
            at: s.to_f64().unwrap_or(f64::NAN),
        });
    }
    if surv_low <= T::zero() {
        return Ok(T::one());
    }
    if surv_high <= T::zero() {
        return Ok(T::zero());
    }
    let mu = env.mu();
    let log_odds =
        (mu / (T::one() - mu)).ln() + surv_high.ln() - surv_low.ln() - env.rate_gap() * s;
    Ok(T::one() / (T::one() + (-log_odds).exp()))
}

/// Continuation value promised by the schedule at time `s`, conditional on
/// the task being incomplete and the agent not yet told to stop.
pub fn continuation_value<T: Real>(
    env: &Environment<T>,
    sched: &ShirkSchedule<T>,
    s: T,
) -> Result<T, AgentError> {
    let posterior = posterior_under_schedule(env, sched, s)?;
    let one = T::one();
    let branch = |q: Quality| -> T {
        let dist = sched.by_quality(q);
        let surv = dist.survival(s);
        if surv <= T::zero() {
            return T::zero(); // weight on this branch is zero as well
        }
        let residual_discount = dist.discount_from(s, env.agent_decay(q)) / surv;
        env.agent_value_complete(q) * (one - residual_discount)
    };
    Ok(posterior * branch(Quality::High) + (one - posterior) * branch(Quality::Low))
}

/// The agent's best response to no information: shirk immediately below the
/// start threshold, work forever at or above `mu_bar` outside the pessimistic
/// regime, and plan to stop at `t_bar(mu)` inside it.
pub fn best_shirk_no_info<T: Real>(env: &Environment<T>) -> Stop<T> {
    match env.regime() {
        Regime::Pessimistic => {
            if env.mu() <= thresholds::mu_hat(env) {
                Stop::At(T::zero())
            } else {
                Stop::At(thresholds::t_bar(env))
            }
        }
        Regime::Stationary | Regime::Optimistic => {
            if env.mu() >= thresholds::mu_bar(env) {
                Stop::Never
            } else {
                Stop::At(T::zero())
            }
        }
    }
}

/// Grid-search oracle for the no-information stopping problem: maximizes
/// `h(tau) = mu v(tau,H) + (1-mu) v(tau,L)` over `{0} ∪ grid ∪ {Never}`.
/// Cross-validates the closed-form [`best_shirk_no_info`].
pub fn best_shirk_grid_oracle<T: Real>(env: &Environment<T>, n: usize) -> (Stop<T>, T) {
    let value = |tau: Stop<T>| {
        env.mu() * env.agent_value(tau, Quality::High)
            + (T::one() - env.mu()) * env.agent_value(tau, Quality::Low)
    };
    let mut best = (Stop::At(T::zero()), value(Stop::At(T::zero())));
    for t in geometric_grid(env.t_max(), n) {
        let v = value(Stop::At(t));
        if v > best.1 {
            best = (Stop::At(t), v);
        }
    }
    let v_never = value(Stop::Never);
    if v_never > best.1 {
        best = (Stop::Never, v_never);
    }
    best
}

/// Sampled posterior path under a schedule, for figure emission and
/// stationarity checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefPath<T> {
    /// `(time, posterior)` samples; posteriors lie in `[0, 1]`.
    pub samples: Vec<(T, T)>,
}

/// Samples the survival posterior over a time grid. Grid points where no
/// type survives are skipped.
pub fn belief_path<T: Real>(
    env: &Environment<T>,
    sched: &ShirkSchedule<T>,
    grid: &[T],
) -> BeliefPath<T> {
    let samples = grid
        .iter()
        .filter_map(|&s| posterior_under_schedule(env, sched, s).ok().map(|p| (s, p)))
        .collect();
    BeliefPath { samples }
}

/// Result of an obedience check over a time grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObedienceReport<T> {
    pub min_value: T,
    pub argmin_time: T,
    pub pass: bool,
}

/// Default check grid: `{0}`, a geometric grid on `(0, t_max]` and every CDF
/// kink of the schedule.
pub fn obedience_grid<T: Real>(
    env: &Environment<T>,
    sched: &ShirkSchedule<T>,
    n: usize,
) -> Vec<T> {
    let mut grid = vec![T::zero()];
    grid.extend(geometric_grid(env.t_max(), n));
    grid.extend(sched.event_times());
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    grid.dedup();
    grid
}

/// Checks `V_s >= -tol` on the grid. Grid points where no type survives are
/// vacuous (nobody is being asked to continue) and are skipped; a schedule
/// that stops everyone immediately passes trivially.
pub fn obedience_check<T: Real>(
    env: &Environment<T>,
    sched: &ShirkSchedule<T>,
    grid: &[T],
    tol: T,
) -> ObedienceReport<T> {
    let mut min_value = T::infinity();
    let mut argmin = T::zero();
    for &s in grid {
        if let Ok(v) = continuation_value(env, sched, s) {
            if v < min_value {
                min_value = v;
                argmin = s;
            }
        }
    }
    if min_value == T::infinity() {
        return ObedienceReport {
            min_value: T::zero(),
            argmin_time: T::zero(),
            pass: true,
        };
    }
    ObedienceReport {
        min_value,
        argmin_time: argmin,
        pass: min_value >= -tol,
    }
}

/// Obedience check with the default grid size and tolerance.
pub fn check_policy_obedience<T: Real>(
    env: &Environment<T>,
    sched: &ShirkSchedule<T>,
) -> ObedienceReport<T> {
    let grid = obedience_grid(env, sched, OBEDIENCE_GRID);
    obedience_check(env, sched, &grid, real(OBEDIENCE_TOL))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Environment;
    use crate::policies::{shirk_schedule, ExpSegment, Policy, StopDist};
    use crate::testutil::{set_a, set_b};

    #[test]
    fn no_news_posterior_cases() {
        // stationary: the passage of time is not informative
        let env = set_a();
        for t in [0.0, 0.5, 3.0, 50.0] {
            assert_eq!(posterior_no_news(&env, t), 0.2);
        }
        // pessimistic set B: at t_bar the posterior is exactly mu_hat
        let env = set_b(0.5);
        assert!((posterior_no_news(&env, 6.0f64.ln()) - 1.0 / 7.0).abs() < 1e-14);
        assert_eq!(posterior_no_news(&env, 0.0), 0.5);
    }

    #[test]
    fn optimistic_no_news_is_good_news() {
        let env = Environment::new(0.2, 0.1, 0.2, 1.0, 2.0, 1.0, 2.0, 0.2, 2.0, 0.2).unwrap();
        let mut prev = 0.0;
        for i in 0..300 {
            let t = 0.1 * i as f64;
            let p = posterior_no_news(&env, t);
            assert!(p >= prev, "posterior must be non-decreasing");
            prev = p;
        }
    }

    #[test]
    fn kg_posterior_is_mu_bar_forever() {
        let env = set_a();
        let sched = shirk_schedule(&Policy::Kg, &env).unwrap();
        for s in [0.0, 0.1, 1.0, 10.0] {
            let p = posterior_under_schedule(&env, &sched, s).unwrap();
            assert!((p - 1.0 / 3.0).abs() < 1e-12, "s={s} p={p}");
        }
    }

    #[test]
    fn ipd_posterior_pinned_at_mu_hat() {
        let env = set_b(0.1);
        let sched = shirk_schedule(&Policy::Ipd, &env).unwrap();
        for s in [0.0, 0.3, 1.0, 5.0, 20.0] {
            let p = posterior_under_schedule(&env, &sched, s).unwrap();
            assert!((p - 1.0 / 7.0).abs() < 1e-11, "no news is no news: s={s} p={p}");
        }
    }

    #[test]
    fn silent_schedule_posterior_matches_prior_when_stationary() {
        let env = set_a().with_prior(0.4).unwrap();
        let silent = ShirkSchedule {
            alpha: StopDist::degenerate(Stop::Never),
            beta: StopDist::degenerate(Stop::Never),
        };
        for s in [0.0, 1.0, 7.0] {
            assert!((posterior_under_schedule(&env, &silent, s).unwrap() - 0.4).abs() < 1e-14);
        }
    }

    #[test]
    fn posterior_errors_when_nothing_survives() {
        let env = set_a();
        let all_stop = ShirkSchedule {
            alpha: StopDist::degenerate(Stop::At(0.0)),
            beta: StopDist::degenerate(Stop::At(0.0)),
        };
        assert!(matches!(
            posterior_under_schedule(&env, &all_stop, 1.0),
            Err(AgentError::UndefinedPosterior { .. })
        ));
    }

    #[test]
    fn kg_continuation_value_is_zero_at_start() {
        let env = set_a();
        let sched = shirk_schedule(&Policy::Kg, &env).unwrap();
        let v = continuation_value(&env, &sched, 0.0).unwrap();
        assert!(v.abs() < 1e-12, "binding IR at the pooled posterior");
    }

    #[test]
    fn dd_continuation_value_at_zero_matches_direct_formula() {
        let env = set_a();
        let sched = shirk_schedule(&Policy::Dd { t: 0.3 }, &env).unwrap();
        let v = continuation_value(&env, &sched, 0.0).unwrap();
        let direct = 0.2 * env.agent_value_complete(Quality::High)
            + 0.8 * env.agent_value(Stop::At(0.3), Quality::Low);
        assert!((v - direct).abs() < 1e-13);
        assert!((v - 0.07960863033888226).abs() < 1e-12);
    }

    #[test]
    fn continuation_after_all_atoms_is_high_value() {
        let env = set_a();
        let sched = shirk_schedule(&Policy::Mdd, &env).unwrap();
        let t_tilde = std::f64::consts::LN_2 / 1.1;
        let v = continuation_value(&env, &sched, t_tilde + 0.5).unwrap();
        assert!((v - env.agent_value_complete(Quality::High)).abs() < 1e-12);
    }

    #[test]
    fn best_shirk_matches_lemma() {
        assert_eq!(best_shirk_no_info(&set_b(0.1)), Stop::At(0.0));
        match best_shirk_no_info(&set_b(0.5)) {
            Stop::At(t) => assert!((t - 6.0f64.ln()).abs() < 1e-12),
            Stop::Never => panic!("finite stop expected"),
        }
        assert_eq!(
            best_shirk_no_info(&set_a().with_prior(0.6).unwrap()),
            Stop::Never
        );
    }

    #[test]
    fn closed_form_stop_dominates_grid_oracle() {
        for env in [set_b(0.3), set_b(0.5), set_b(0.8), set_b(0.1)] {
            let h = |tau: Stop<f64>| {
                env.mu() * env.agent_value(tau, Quality::High)
                    + (1.0 - env.mu()) * env.agent_value(tau, Quality::Low)
            };
            let (_, grid_best) = best_shirk_grid_oracle(&env, 4096);
            let closed = h(best_shirk_no_info(&env));
            assert!(
                closed >= grid_best - 1e-9,
                "closed form must dominate the grid (closed={closed}, grid={grid_best})"
            );
        }
    }

    #[test]
    fn mdd_obedience_binds_at_start() {
        let env = set_a();
        let sched = shirk_schedule(&Policy::Mdd, &env).unwrap();
        let report = check_policy_obedience(&env, &sched);
        assert!(report.pass);
        assert!(report.min_value.abs() < 1e-10);
        assert_eq!(report.argmin_time, 0.0);
    }

    #[test]
    fn overdelayed_dd_fails_obedience() {
        let env = set_a();
        let t = std::f64::consts::LN_2 / 1.1 + 0.1;
        // build the schedule directly; make_dd would reject it
        let sched = ShirkSchedule {
            alpha: StopDist::degenerate(Stop::Never),
            beta: StopDist::degenerate(Stop::At(t)),
        };
        let report = check_policy_obedience(&env, &sched);
        assert!(!report.pass);
        assert!(report.min_value < 0.0);
        assert_eq!(report.argmin_time, 0.0, "stationary DD binds at time zero");
    }

    #[test]
    fn ifd_is_always_obedient() {
        let env = set_a();
        let sched = shirk_schedule(&Policy::Ifd, &env).unwrap();
        let report = check_policy_obedience(&env, &sched);
        assert!(report.pass);
        assert!(report.min_value >= 0.0);
    }

    #[test]
    fn pessimistic_mdd_interior_obedience_h2_monotone() {
        // h2(t) = mu v(H) + e^{(lH-lL)t} (1-mu) v(t_tilde - t, L) is
        // non-decreasing on [0, t_tilde] with h2(0) = 0, for mu <= mu_hat.
        for mu in [0.05, 0.1, 1.0 / 7.0] {
            let env = set_b(mu);
            let Stop::At(t_tilde) = thresholds::t_tilde(&env) else {
                panic!("finite t_tilde")
            };
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=1000 {
                let t = t_tilde * i as f64 / 1000.0;
                let h2 = mu * env.agent_value_complete(Quality::High)
                    + (env.rate_gap() * t).exp()
                        * (1.0 - mu)
                        * env.agent_value(Stop::At(t_tilde - t), Quality::Low);
                assert!(h2 >= prev - 1e-12, "h2 must be non-decreasing at t={t}");
                prev = h2;
            }
            let h2_start = mu * env.agent_value_complete(Quality::High)
                + (1.0 - mu) * env.agent_value(Stop::At(t_tilde), Quality::Low);
            assert!(h2_start.abs() < 1e-12);
        }
    }

    #[test]
    fn optimistic_kg_and_mdd_are_obedient() {
        // no news is good news: the posterior drifts up, so obedience holds
        // with slack everywhere after time zero
        let env: Environment<f64> =
            Environment::new(0.2, 0.1, 0.2, 1.0, 2.0, 1.0, 2.0, 0.2, 2.0, 0.2).unwrap();
        for policy in [Policy::Kg, Policy::Mdd] {
            let sched = shirk_schedule(&policy, &env).unwrap();
            let report = check_policy_obedience(&env, &sched);
            assert!(report.pass, "{policy:?}: min {}", report.min_value);
            let (_, v) = crate::oracle::values(&env, &sched);
            assert!(v.abs() < 1e-12, "{policy:?}: participation binds");
        }
    }

    #[test]
    fn pessimistic_mdd_and_dpd_are_obedient_above_mu_hat() {
        for mu in [0.2, 0.5, 0.9] {
            let env = set_b(mu);
            for policy in [Policy::Mdd, Policy::Dpd] {
                let sched = shirk_schedule(&policy, &env).unwrap();
                let report = check_policy_obedience(&env, &sched);
                assert!(
                    report.pass,
                    "{policy:?} at mu={mu}: min {} at {}",
                    report.min_value, report.argmin_time
                );
            }
        }
    }

    #[test]
    fn vacuous_schedule_passes() {
        let env = set_a();
        let all_stop = ShirkSchedule {
            alpha: StopDist::degenerate(Stop::At(0.0)),
            beta: StopDist::degenerate(Stop::At(0.0)),
        };
        let report = check_policy_obedience(&env, &all_stop);
        assert!(report.pass);
    }

    #[test]
    fn belief_path_is_flat_for_stationary_silence() {
        let env = set_a().with_prior(0.4).unwrap();
        let sched = shirk_schedule(&Policy::None, &env).unwrap();
        let grid: Vec<f64> = (0..64).map(|i| i as f64 * 0.25).collect();
        let path = belief_path(&env, &sched, &grid);
        assert_eq!(path.samples.len(), 64);
        assert!(path.samples.iter().all(|&(_, p)| (p - 0.4).abs() < 1e-14));
        // pessimistic DPD path: declines to mu_hat, then stays pinned there
        let env = set_b(0.5);
        let sched = shirk_schedule(&Policy::Dpd, &env).unwrap();
        let path = belief_path(&env, &sched, &grid);
        let hat = thresholds::mu_hat(&env);
        for &(s, p) in &path.samples {
            assert!((0.0..=1.0).contains(&p));
            if s >= thresholds::t_bar(&env) {
                assert!((p - hat).abs() < 1e-12, "pinned at mu_hat after t_bar");
            } else {
                assert!(p >= hat - 1e-12);
            }
        }
    }

    #[test]
    fn report_serializes_with_exact_keys() {
        let report = ObedienceReport {
            min_value: 0.0,
            argmin_time: 0.0,
            pass: true,
        };
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(
            json,
            serde_json::json!({"min_value": 0.0, "argmin_time": 0.0, "pass": true})
        );
    }

    #[test]
    fn large_rate_gap_does_not_overflow() {
        // survival decays like e^{-rho s} while the gap factor grows like
        // e^{+gap s}; the log-odds form must stay finite.
        let env: Environment<f64> =
            Environment::new(0.5, 0.02, 0.05, 3.0, 0.3, 0.4, 2.0, 0.2, 2.0, 0.2).unwrap();
        let sched = shirk_schedule(&Policy::Dpd, &env).unwrap();
        let t_max = env.t_max();
        let p = posterior_under_schedule(&env, &sched, t_max).unwrap();
        assert!(p.is_finite() && (0.0..=1.0).contains(&p));
        let v = continuation_value(&env, &sched, t_max).unwrap();
        assert!(v.is_finite());
    }

    #[test]
    fn posterior_with_partial_survival_matches_bayes() {
        let env = set_b(0.3);
        let sched = ShirkSchedule {
            alpha: StopDist::new(vec![(2.0, 0.25)], Vec::new(), 0.75).unwrap(),
            beta: StopDist::new(
                vec![(1.0, 0.4)],
                vec![ExpSegment {
                    start: 1.5,
                    rate: 0.7,
                    mass: 0.6,
                }],
                0.0,
            )
            .unwrap(),
        };
        let s = 3.0;
        let direct = {
            let sa = sched.alpha.survival(s);
            let sb = sched.beta.survival(s);
            sa * 0.3 / (sa * 0.3 + (env.rate_gap() * s).exp() * sb * 0.7)
        };
        let p = posterior_under_schedule(&env, &sched, s).unwrap();
        assert!((p - direct).abs() < 1e-12);
    }
}
