//! Model primitives and closed-form payoff functions.
//!
//! An agent works on a task of unknown quality at flow cost `c`, discounting
//! at rate `r`; the task completes at Poisson rate `lambda_q` and pays the
//! agent `q` and the principal a bonus `b(q)` on completion (principal
//! discounts at `r_p`). Everything downstream is built from the two expected
//! payoff functions evaluated here:
//!
//! ```text
//! v(tau, q) = (1 - e^{-(r  +lambda_q) tau}) * v(q),   v(q) = (lambda_q q - c)/(r  +lambda_q)
//! w(tau, q) = (1 - e^{-(r_p+lambda_q) tau}) * w(q),   w(q) = lambda_q b(q)/(r_p+lambda_q)
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{real, Real};

/// Task quality: the agent's reward on completion is `H` or `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quality {
    High,
    Low,
}

impl Quality {
    pub const BOTH: [Quality; 2] = [Quality::High, Quality::Low];
}

/// A planned stop (shirk) time. `Never` means the agent works until the task
/// completes; it is a distinguished value, never approximated by a large
/// finite time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop<T> {
    At(T),
    Never,
}

impl<T: Real> Stop<T> {
    /// Finite stop time; rejects negative or non-finite values.
    pub fn at(t: T) -> Result<Self, EnvError> {
        if t.is_finite() && t >= T::zero() {
            Ok(Stop::At(t))
        } else {
            Err(EnvError::NegativeTime {
                t: t.to_f64().unwrap_or(f64::NAN),
            })
        }
    }

    pub fn is_never(&self) -> bool {
        matches!(self, Stop::Never)
    }
}

/// Which learning regime the completion rates induce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `lambda_H = lambda_L`: the passage of time carries no information.
    Stationary,
    /// `lambda_H < lambda_L`: no news is good news.
    Optimistic,
    /// `lambda_H > lambda_L`: no news is bad news.
    Pessimistic,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("{field} must satisfy {requirement} (got {value})")]
    InvalidField {
        field: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error("qualities must satisfy H > L > 0 (got H={high}, L={low})")]
    QualityOrder { high: f64, low: f64 },
    #[error("completion values must satisfy v(H) > 0 > v(L) (got v(H)={v_high}, v(L)={v_low})")]
    ValueSign { v_high: f64, v_low: f64 },
    #[error("stop time must be finite and non-negative (got {t})")]
    NegativeTime { t: f64 },
}

/// JSON form of the model primitives. Field names are the wire format.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub mu: f64,
    pub r: f64,
    pub r_p: f64,
    pub lambda_h: f64,
    pub lambda_l: f64,
    pub c: f64,
    #[serde(rename = "H")]
    pub high: f64,
    #[serde(rename = "L")]
    pub low: f64,
    pub b_h: f64,
    pub b_l: f64,
}

impl EnvConfig {
    pub fn build<T: Real>(&self) -> Result<Environment<T>, EnvError> {
        Environment::new(
            real(self.mu),
            real(self.r),
            real(self.r_p),
            real(self.lambda_h),
            real(self.lambda_l),
            real(self.c),
            real(self.high),
            real(self.low),
            real(self.b_h),
            real(self.b_l),
        )
    }
}

impl TryFrom<EnvConfig> for Environment<f64> {
    type Error = EnvError;

    fn try_from(cfg: EnvConfig) -> Result<Self, EnvError> {
        cfg.build()
    }
}

/// Validated model primitives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Environment<T> {
    mu: T,
    r: T,
    r_p: T,
    lambda_h: T,
    lambda_l: T,
    c: T,
    high: T,
    low: T,
    b_h: T,
    b_l: T,
}

fn require<T: Real>(
    ok: bool,
    field: &'static str,
    requirement: &'static str,
    value: T,
) -> Result<(), EnvError> {
    if ok {
        Ok(())
    } else {
        Err(EnvError::InvalidField {
            field,
            requirement,
            value: value.to_f64().unwrap_or(f64::NAN),
        })
    }
}

impl<T: Real> Environment<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mu: T,
        r: T,
        r_p: T,
        lambda_h: T,
        lambda_l: T,
        c: T,
        high: T,
        low: T,
        b_h: T,
        b_l: T,
    ) -> Result<Self, EnvError> {
        let zero = T::zero();
        let one = T::one();
        require(mu.is_finite() && mu > zero && mu < one, "mu", "0 < mu < 1", mu)?;
        require(r.is_finite() && r > zero, "r", "r > 0", r)?;
        require(r_p.is_finite() && r_p > zero, "r_p", "r_p > 0", r_p)?;
        require(
            lambda_h.is_finite() && lambda_h > zero,
            "lambda_h",
            "lambda_h > 0",
            lambda_h,
        )?;
        require(
            lambda_l.is_finite() && lambda_l > zero,
            "lambda_l",
            "lambda_l > 0",
            lambda_l,
        )?;
        require(c.is_finite() && c > zero, "c", "c > 0", c)?;
        require(b_h.is_finite() && b_h >= zero, "b_h", "b_h >= 0", b_h)?;
        require(b_l.is_finite() && b_l >= zero, "b_l", "b_l >= 0", b_l)?;
        if !(high.is_finite() && low.is_finite() && high > low && low > zero) {
            return Err(EnvError::QualityOrder {
                high: high.to_f64().unwrap_or(f64::NAN),
                low: low.to_f64().unwrap_or(f64::NAN),
            });
        }
        let env = Environment {
            mu,
            r,
            r_p,
            lambda_h,
            lambda_l,
            c,
            high,
            low,
            b_h,
            b_l,
        };
        let v_high = env.agent_value_complete(Quality::High);
        let v_low = env.agent_value_complete(Quality::Low);
        if !(v_high > zero && v_low < zero) {
            return Err(EnvError::ValueSign {
                v_high: v_high.to_f64().unwrap_or(f64::NAN),
                v_low: v_low.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(env)
    }

    /// Same primitives with a different prior; validates `0 < mu < 1`.
    pub fn with_prior(&self, mu: T) -> Result<Self, EnvError> {
        require(mu.is_finite() && mu > T::zero() && mu < T::one(), "mu", "0 < mu < 1", mu)?;
        let mut env = *self;
        env.mu = mu;
        Ok(env)
    }

    pub fn mu(&self) -> T {
        self.mu
    }
    pub fn r(&self) -> T {
        self.r
    }
    pub fn r_p(&self) -> T {
        self.r_p
    }
    pub fn c(&self) -> T {
        self.c
    }

    pub fn lambda(&self, q: Quality) -> T {
        match q {
            Quality::High => self.lambda_h,
            Quality::Low => self.lambda_l,
        }
    }

    pub fn quality(&self, q: Quality) -> T {
        match q {
            Quality::High => self.high,
            Quality::Low => self.low,
        }
    }

    pub fn bonus(&self, q: Quality) -> T {
        match q {
            Quality::High => self.b_h,
            Quality::Low => self.b_l,
        }
    }

    /// `lambda_H - lambda_L`, the no-news drift rate of the log-likelihood
    /// ratio (and the Poisson disclosure rate in the pessimistic case).
    pub fn rate_gap(&self) -> T {
        self.lambda_h - self.lambda_l
    }

    pub fn regime(&self) -> Regime {
        if self.lambda_h == self.lambda_l {
            Regime::Stationary
        } else if self.lambda_h < self.lambda_l {
            Regime::Optimistic
        } else {
            Regime::Pessimistic
        }
    }

    /// Agent's effective discount rate `r + lambda_q`.
    pub fn agent_decay(&self, q: Quality) -> T {
        self.r + self.lambda(q)
    }

    /// Principal's effective discount rate `r_p + lambda_q`.
    pub fn principal_decay(&self, q: Quality) -> T {
        self.r_p + self.lambda(q)
    }

    /// `v(q)`: the agent's expected payoff from working until completion.
    pub fn agent_value_complete(&self, q: Quality) -> T {
        (self.lambda(q) * self.quality(q) - self.c) / self.agent_decay(q)
    }

    /// `w(q)`: the principal's expected payoff from a completed task.
    pub fn principal_value_complete(&self, q: Quality) -> T {
        self.lambda(q) * self.bonus(q) / self.principal_decay(q)
    }

    /// `v(tau, q)`: agent value when shirking is planned at `tau`.
    pub fn agent_value(&self, tau: Stop<T>, q: Quality) -> T {
        match tau {
            Stop::Never => self.agent_value_complete(q),
            Stop::At(t) => {
                (T::one() - (-self.agent_decay(q) * t).exp()) * self.agent_value_complete(q)
            }
        }
    }

    /// `w(tau, q)`: principal value when the agent shirks at `tau`.
    pub fn principal_value(&self, tau: Stop<T>, q: Quality) -> T {
        match tau {
            Stop::Never => self.principal_value_complete(q),
            Stop::At(t) => {
                (T::one() - (-self.principal_decay(q) * t).exp())
                    * self.principal_value_complete(q)
            }
        }
    }

    /// Time horizon beyond which every discount factor is below 1e-40;
    /// used as the upper end of search brackets and time grids.
    pub fn t_max(&self) -> T {
        real::<T>(100.0) / (self.r + self.lambda_h.min(self.lambda_l))
    }
}
