//! Seeded Monte Carlo verification: simulates (quality, completion time,
//! recommendation) draws with the agent following the policy, and estimates
//! both players' expected payoffs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent;
use crate::env::{Environment, Quality, Stop};
use crate::policies::{shirk_schedule, Policy, PolicyError, ShirkSchedule};
use crate::scalar::{real, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum McError {
    #[error("monte carlo needs at least one path (got {n})")]
    NoPaths { n: u64 },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Counter-based 64-bit generator: draw `i` of stream `seed` is the
/// SplitMix64 finalizer of `seed + (i+1) * golden`. Stateless per draw, so
/// any (path, draw) pair can be evaluated independently and in parallel.
#[derive(Debug, Clone, Copy)]
pub struct CounterRng {
    seed: u64,
}

/// Draws reserved per path.
const DRAWS_PER_PATH: u64 = 8;

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng { seed }
    }

    pub fn raw(&self, index: u64) -> u64 {
        let mut z = self
            .seed
            .wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(index.wrapping_add(1)));
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` addressed by (path, draw).
    pub fn uniform(&self, path: u64, draw: u64) -> f64 {
        debug_assert!(draw < DRAWS_PER_PATH);
        (self.raw(path * DRAWS_PER_PATH + draw) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Monte Carlo estimates with standard errors; the seed is recorded so any
/// report can be reproduced exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McReport<T> {
    pub n: u64,
    pub seed: u64,
    pub w_hat: T,
    pub w_se: T,
    pub v_hat: T,
    pub v_se: T,
    /// Number of obedience-grid times where the closed-form continuation
    /// value check fails (obedience is an interim property, not a per-path
    /// one, so it is certified analytically alongside the simulation).
    pub obedience_violations: usize,
}

/// Simulates a policy after validating it.
pub fn monte_carlo<T: Real>(
    env: &Environment<T>,
    policy: &Policy<T>,
    n: u64,
    seed: u64,
) -> Result<McReport<T>, McError> {
    let sched = shirk_schedule(policy, env)?;
    monte_carlo_schedule(env, &sched, n, seed)
}

/// Simulates a raw schedule (no obedience precondition; violations show up
/// in the report).
pub fn monte_carlo_schedule<T: Real>(
    env: &Environment<T>,
    sched: &ShirkSchedule<T>,
    n: u64,
    seed: u64,
) -> Result<McReport<T>, McError> {
    if n == 0 {
        return Err(McError::NoPaths { n });
    }
    let grid = agent::obedience_grid(env, sched, agent::OBEDIENCE_GRID);
    let tol: T = real(agent::OBEDIENCE_TOL);
    let violations = grid
        .iter()
        .filter(|&&s| matches!(agent::continuation_value(env, sched, s), Ok(v) if v < -tol))
        .count();

    let rng = CounterRng::new(seed);
    // fixed chunk count keeps the summation order independent of the number
    // of worker threads
    let chunks: u64 = 64;
    let mut partials = vec![[T::zero(); 4]; chunks as usize];
    let workers = std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
        .min(8)
        .max(1);
    std::thread::scope(|scope| {
        let chunk_per_worker = (chunks as usize).div_ceil(workers);
        let mut remaining: &mut [[T; 4]] = &mut partials;
        let mut start_chunk = 0u64;
        let mut handles = Vec::new();
        while !remaining.is_empty() {
            let take = chunk_per_worker.min(remaining.len());
            let (head, tail) = remaining.split_at_mut(take);
            remaining = tail;
            let first = start_chunk;
            start_chunk += take as u64;
            let sched = &sched;
            handles.push(scope.spawn(move || {
                for (offset, slot) in head.iter_mut().enumerate() {
                    let c = first + offset as u64;
                    let lo = c * n / chunks;
                    let hi = (c + 1) * n / chunks;
                    *slot = simulate_range(env, sched, &rng, lo, hi);
                }
            }));
        }
        for h in handles {
            h.join().expect("monte carlo worker panicked");
        }
    });

    let mut sums = [T::zero(); 4];
    for part in &partials {
        for (acc, &x) in sums.iter_mut().zip(part) {
            *acc = *acc + x;
        }
    }
    let count = real::<T>(n as f64);
    let dof = real::<T>(if n > 1 { (n - 1) as f64 } else { 1.0 });
    let w_hat = sums[0] / count;
    let v_hat = sums[2] / count;
    let w_var = ((sums[1] - sums[0] * sums[0] / count) / dof).max(T::zero());
    let v_var = ((sums[3] - sums[2] * sums[2] / count) / dof).max(T::zero());
    Ok(McReport {
        n,
        seed,
        w_hat,
        w_se: (w_var / count).sqrt(),
        v_hat,
        v_se: (v_var / count).sqrt(),
        obedience_violations: violations,
    })
}

/// Sums `(w, w^2, v, v^2)` over the path range `[lo, hi)`.
fn simulate_range<T: Real>(
    env: &Environment<T>,
    sched: &ShirkSchedule<T>,
    rng: &CounterRng,
    lo: u64,
    hi: u64,
) -> [T; 4] {
    let one = T::one();
    let mut acc = [T::zero(); 4];
    for path in lo..hi {
        let quality = if real::<T>(rng.uniform(path, 0)) < env.mu() {
            Quality::High
        } else {
            Quality::Low
        };
        let u_x: T = real(rng.uniform(path, 1));
        let x = -(one - u_x).ln() / env.lambda(quality);
        let tau = sched
            .by_quality(quality)
            .sample(real(rng.uniform(path, 2)));
        let (w, v) = match tau {
            Stop::At(t) if t < x => {
                // told to stop before completion: sunk effort, no bonus
                let v = -(env.c() / env.r()) * (one - (-env.r() * t).exp());
                (T::zero(), v)
            }
            _ => {
                let v = (-env.r() * x).exp() * env.quality(quality)
                    - (env.c() / env.r()) * (one - (-env.r() * x).exp());
                let w = (-env.r_p() * x).exp() * env.bonus(quality);
                (w, v)
            }
        };
        acc[0] = acc[0] + w;
        acc[1] = acc[1] + w * w;
        acc[2] = acc[2] + v;
        acc[3] = acc[3] + v * v;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{policy_values, values};
    use crate::policies::StopDist;
    use crate::testutil::{set_a, set_b, set_b_patient};

    fn assert_within_3se(estimate: f64, se: f64, target: f64, what: &str) {
        let band = 3.0 * se + 1e-12;
        assert!(
            (estimate - target).abs() <= band,
            "{what}: estimate {estimate} not within 3se ({band}) of {target}"
        );
    }

    #[test]
    fn rng_is_deterministic_and_counter_addressable() {
        let rng = CounterRng::new(42);
        assert_eq!(rng.raw(7), CounterRng::new(42).raw(7));
        assert_ne!(rng.raw(7), rng.raw(8));
        assert_ne!(CounterRng::new(1).raw(7), CounterRng::new(2).raw(7));
        let u = rng.uniform(3, 4);
        assert!((0.0..1.0).contains(&u));
    }

    #[test]
    fn kg_estimates_match_analytic_values() {
        let env = set_a();
        let report = monte_carlo(&env, &Policy::Kg, 200_000, 12345).unwrap();
        assert_within_3se(report.w_hat, report.w_se, 0.5, "W(KG)");
        assert_within_3se(report.v_hat, report.v_se, 0.0, "V(KG)");
        assert_eq!(report.obedience_violations, 0);
    }

    #[test]
    fn mdd_estimates_match_analytic_values() {
        let env = set_a();
        let (w, v) = policy_values(&env, &Policy::Mdd).unwrap();
        let report = monte_carlo(&env, &Policy::Mdd, 200_000, 99).unwrap();
        assert_within_3se(report.w_hat, report.w_se, w, "W(MDD)");
        assert_within_3se(report.v_hat, report.v_se, v, "V(MDD)");
    }

    #[test]
    fn none_policy_above_mu_bar_matches_full_trust_value() {
        let env = set_a().with_prior(0.5).unwrap();
        let report = monte_carlo(&env, &Policy::None, 200_000, 7).unwrap();
        let v_target = 0.5 * env.agent_value_complete(Quality::High)
            + 0.5 * env.agent_value_complete(Quality::Low);
        assert_within_3se(report.v_hat, report.v_se, v_target, "V(NONE)");
    }

    #[test]
    fn poisson_policies_match_analytic_values() {
        for (env, policy) in [
            (set_b_patient(0.1), Policy::Ipd),
            (set_b_patient(0.5), Policy::Dpd),
            (set_b(0.5), Policy::Mdd),
        ] {
            let (w, v) = policy_values(&env, &policy).unwrap();
            let report = monte_carlo(&env, &policy, 200_000, 31).unwrap();
            assert_within_3se(report.w_hat, report.w_se, w, "W");
            assert_within_3se(report.v_hat, report.v_se, v, "V");
        }
    }

    #[test]
    fn zero_paths_are_rejected() {
        let env = set_a();
        assert!(matches!(
            monte_carlo(&env, &Policy::Kg, 0, 1),
            Err(McError::NoPaths { n: 0 })
        ));
    }

    #[test]
    fn same_seed_reproduces_report_exactly() {
        let env = set_b(0.5);
        let a = monte_carlo(&env, &Policy::Mdd, 50_000, 2024).unwrap();
        let b = monte_carlo(&env, &Policy::Mdd, 50_000, 2024).unwrap();
        assert_eq!(a, b);
        let c = monte_carlo(&env, &Policy::Mdd, 50_000, 2025).unwrap();
        assert_ne!(a.w_hat, c.w_hat);
    }

    #[test]
    fn perturbed_schedule_reports_violations() {
        let env = set_a();
        let t_late = std::f64::consts::LN_2 / 1.1 + 0.1;
        let sched = ShirkSchedule {
            alpha: StopDist::degenerate(Stop::Never),
            beta: StopDist::degenerate(Stop::At(t_late)),
        };
        let report = monte_carlo_schedule(&env, &sched, 10_000, 5).unwrap();
        assert!(report.obedience_violations > 0);
        // the direct policy constructor refuses to build this schedule
        assert!(monte_carlo(&env, &Policy::Dd { t: t_late }, 10_000, 5).is_err());
    }

    #[test]
    fn memoryless_continuation_matches_completion_value() {
        // E[e^{-r(x-t)} q - (c/r)(1 - e^{-r(x-t)}) | x > t] = v(q), sampling
        // x unconditionally and filtering on survival.
        let env = set_a();
        let rng = CounterRng::new(777);
        let t = 0.8;
        let q = Quality::High;
        let (mut sum, mut sum2, mut kept) = (0.0, 0.0, 0u64);
        for path in 0..200_000u64 {
            let x = -(1.0 - rng.uniform(path, 0)).ln() / env.lambda(q);
            if x > t {
                let dt = x - t;
                let payoff = (-env.r() * dt).exp() * env.quality(q)
                    - (env.c() / env.r()) * (1.0 - (-env.r() * dt).exp());
                sum += payoff;
                sum2 += payoff * payoff;
                kept += 1;
            }
        }
        let mean = sum / kept as f64;
        let se = ((sum2 - sum * sum / kept as f64) / (kept as f64 - 1.0)).sqrt()
            / (kept as f64).sqrt();
        assert_within_3se(mean, se, env.agent_value_complete(q), "memoryless");
    }

    #[test]
    fn posterior_is_a_martingale_over_events() {
        // E[posterior at time t across completion/disclosure/no-news] = mu.
        let horizon = 0.9;
        for (env, policy) in [
            (set_a(), Policy::Kg),
            (set_b_patient(0.1), Policy::Ipd),
            (set_b(0.5), Policy::Mdd),
        ] {
            let sched = shirk_schedule(&policy, &env).unwrap();
            let rng = CounterRng::new(4242);
            let n = 200_000u64;
            let (mut sum, mut sum2) = (0.0, 0.0);
            for path in 0..n {
                let q = if rng.uniform(path, 0) < env.mu() {
                    Quality::High
                } else {
                    Quality::Low
                };
                let x = -(1.0 - rng.uniform(path, 1)).ln() / env.lambda(q);
                let tau = sched.by_quality(q).sample(rng.uniform(path, 2));
                let stopped_before = |limit: f64| match tau {
                    Stop::At(t) => t <= limit,
                    Stop::Never => false,
                };
                let posterior = if x <= horizon && !stopped_before(x) {
                    // completed: Bayes over the completion density times the
                    // per-quality survival of the recommendation process
                    let ph = sched.alpha.survival(x)
                        * env.mu()
                        * env.lambda(Quality::High)
                        * (-env.lambda(Quality::High) * x).exp();
                    let pl = sched.beta.survival(x)
                        * (1.0 - env.mu())
                        * env.lambda(Quality::Low)
                        * (-env.lambda(Quality::Low) * x).exp();
                    ph / (ph + pl)
                } else if stopped_before(horizon.min(x)) {
                    // told to stop: in these policies that reveals the quality
                    match q {
                        Quality::High => 1.0,
                        Quality::Low => 0.0,
                    }
                } else {
                    agent::posterior_under_schedule(&env, &sched, horizon).unwrap()
                };
                sum += posterior;
                sum2 += posterior * posterior;
            }
            let mean = sum / n as f64;
            let se =
                ((sum2 - sum * sum / n as f64) / (n as f64 - 1.0)).sqrt() / (n as f64).sqrt();
            assert_within_3se(mean, se, env.mu(), "martingale");
        }
    }

    #[test]
    fn estimates_agree_with_exact_integration_for_mixed_schedule() {
        // atoms + segment + never mass, exercised end to end
        let env = set_b(0.3);
        let sched = ShirkSchedule {
            alpha: StopDist::new(vec![(1.5, 0.3)], Vec::new(), 0.7).unwrap(),
            beta: StopDist::new(
                vec![(0.0, 0.2), (0.7, 0.3)],
                vec![crate::policies::ExpSegment {
                    start: 1.0,
                    rate: 0.9,
                    mass: 0.4,
                }],
                0.1,
            )
            .unwrap(),
        };
        let (w, v) = values(&env, &sched);
        let report = monte_carlo_schedule(&env, &sched, 400_000, 60601).unwrap();
        assert_within_3se(report.w_hat, report.w_se, w, "W mixed");
        assert_within_3se(report.v_hat, report.v_se, v, "V mixed");
    }
}
