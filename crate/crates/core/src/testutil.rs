//! Shared fixtures for the unit tests: the two worked parameter sets and a
//! tiny deterministic generator for random-instance sweeps.

use crate::env::Environment;

/// Set A: stationary (`lambda_H = lambda_L = 1`), impatient principal.
/// `r=0.1, r_p=0.2, c=1, H=2, L=0.5, b=q, mu=0.2`.
pub fn set_a() -> Environment<f64> {
    Environment::new(0.2, 0.1, 0.2, 1.0, 1.0, 1.0, 2.0, 0.5, 2.0, 0.5).unwrap()
}

/// Set A with a patient principal (`r_p = 0.05`).
pub fn set_a_patient() -> Environment<f64> {
    Environment::new(0.2, 0.1, 0.05, 1.0, 1.0, 1.0, 2.0, 0.5, 2.0, 0.5).unwrap()
}

/// Set B: pessimistic (`lambda_H = 2 > lambda_L = 1`), impatient principal.
/// `r=0.1, r_p=0.2, c=1, H=2, L=0.5, b=q, mu` supplied by the caller.
pub fn set_b(mu: f64) -> Environment<f64> {
    Environment::new(mu, 0.1, 0.2, 2.0, 1.0, 1.0, 2.0, 0.5, 2.0, 0.5).unwrap()
}

/// Set B with a patient principal (`r_p = 0.05`).
pub fn set_b_patient(mu: f64) -> Environment<f64> {
    Environment::new(mu, 0.1, 0.05, 2.0, 1.0, 1.0, 2.0, 0.5, 2.0, 0.5).unwrap()
}

/// SplitMix64 stream for reproducible random instances in tests.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }
}

/// Draws a valid random environment from the documented ranges:
/// `r, r_p in [0.02, 0.5]`, `lambda in [0.3, 3]`, `c in [0.3, 2]`,
/// qualities rescaled so that `v(H) > 0 > v(L)` holds, and `b(q) = q`.
/// When `stationary` is set the two completion rates coincide.
pub fn random_env(rng: &mut TestRng, stationary: bool) -> Environment<f64> {
    loop {
        let r = rng.range(0.02, 0.5);
        let r_p = rng.range(0.02, 0.5);
        let lambda_h = rng.range(0.3, 3.0);
        let lambda_l = if stationary {
            lambda_h
        } else {
            rng.range(0.3, 3.0)
        };
        let c = rng.range(0.3, 2.0);
        // H above the agent's break-even quality for lambda_h, L below it
        // for lambda_l, guaranteeing v(H) > 0 > v(L).
        let high = c / lambda_h * rng.range(1.2, 3.0);
        let low = c / lambda_l * rng.range(0.2, 0.9);
        if low >= high {
            continue;
        }
        let mu = rng.range(0.05, 0.95);
        if let Ok(env) = Environment::new(mu, r, r_p, lambda_h, lambda_l, c, high, low, high, low)
        {
            return env;
        }
    }
}
