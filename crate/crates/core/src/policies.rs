//! Information policies and the shirk-time distributions they induce.
//!
//! Every policy normalizes to a [`ShirkSchedule`]: one stopping-time CDF per
//! quality (`alpha` for H, `beta` for L). The representation — finite atoms,
//! shifted exponential pieces and a point mass at infinity — is closed under
//! all the policies in the model and integrates analytically, so payoff
//! evaluation stays exact.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Environment, Quality, Regime, Stop};
use crate::genq::CutoffSchedule;
use crate::scalar::{real, Real};
use crate::thresholds;

/// Mass-normalization tolerance for a stopping-time distribution.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("total mass must equal 1 within {MASS_TOL} (got {total})")]
    MassNotNormalized { total: f64 },
    #[error("atom times and masses must be finite, with time >= 0 and mass >= 0")]
    InvalidAtom,
    #[error("exponential segments need finite start >= 0, rate > 0 and mass >= 0")]
    InvalidSegment,
    #[error("policy is not obedient: agent continuation value {slack} at time {at}")]
    NotObedient { slack: f64, at: f64 },
    #[error("{policy} requires the pessimistic regime (lambda_H > lambda_L)")]
    RequiresPessimistic { policy: &'static str },
    #[error("static pooling to mu_bar is not a best response in the pessimistic regime; use IPD/DPD")]
    StaticPoolingNotObedient,
    #[error("IPD requires mu <= mu_hat (mu={mu}, mu_hat={mu_hat}); use DPD")]
    PriorAboveHat { mu: f64, mu_hat: f64 },
    #[error("DPD requires mu > mu_hat (mu={mu}, mu_hat={mu_hat}); use IPD")]
    PriorBelowHat { mu: f64, mu_hat: f64 },
    #[error("cutoff policies are evaluated against a quality law; use the genq module")]
    RequiresQualityLaw,
}

/// One exponential piece of a stopping-time law: conditional on landing in
/// this piece, the stop time is `start + Exp(rate)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpSegment<T> {
    pub start: T,
    pub rate: T,
    pub mass: T,
}

/// Right-continuous CDF of a stopping time on `[0, infinity]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopDist<T> {
    atoms: Vec<(T, T)>,
    segments: Vec<ExpSegment<T>>,
    never: T,
}

impl<T: Real> StopDist<T> {
    pub fn new(
        mut atoms: Vec<(T, T)>,
        segments: Vec<ExpSegment<T>>,
        never: T,
    ) -> Result<Self, PolicyError> {
        let zero = T::zero();
        atoms.retain(|&(_, m)| m != zero);
        for &(t, m) in &atoms {
            if !(t.is_finite() && t >= zero && m.is_finite() && m > zero) {
                return Err(PolicyError::InvalidAtom);
            }
        }
        for seg in &segments {
            if !(seg.start.is_finite()
                && seg.start >= zero
                && seg.rate.is_finite()
                && seg.rate > zero
                && seg.mass.is_finite()
                && seg.mass >= zero)
            {
                return Err(PolicyError::InvalidSegment);
            }
        }
        if !(never.is_finite() && never >= -real::<T>(MASS_TOL)) {
            return Err(PolicyError::MassNotNormalized {
                total: never.to_f64().unwrap_or(f64::NAN),
            });
        }
        let total = atoms.iter().fold(zero, |acc, &(_, m)| acc + m)
            + segments.iter().fold(zero, |acc, s| acc + s.mass)
            + never;
        if (total - T::one()).abs() > real(MASS_TOL) {
            return Err(PolicyError::MassNotNormalized {
                total: total.to_f64().unwrap_or(f64::NAN),
            });
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite atom times"));
        Ok(StopDist {
            atoms,
            segments,
            never,
        })
    }

    /// Degenerate distribution stopping at `tau`.
    pub fn degenerate(tau: Stop<T>) -> Self {
        match tau {
            Stop::At(t) => StopDist {
                atoms: vec![(t, T::one())],
                segments: Vec::new(),
                never: T::zero(),
            },
            Stop::Never => StopDist {
                atoms: Vec::new(),
                segments: Vec::new(),
                never: T::one(),
            },
        }
    }

    pub fn atoms(&self) -> &[(T, T)] {
        &self.atoms
    }

    pub fn segments(&self) -> &[ExpSegment<T>] {
        &self.segments
    }

    pub fn never_mass(&self) -> T {
        self.never
    }

    /// CDF value `P(tau <= t)`.
    pub fn cdf(&self, t: T) -> T {
        let mut acc = T::zero();
        for &(at, m) in &self.atoms {
            if at <= t {
                acc = acc + m;
            }
        }
        for seg in &self.segments {
            if t >= seg.start {
                acc = acc + seg.mass * (T::one() - (-seg.rate * (t - seg.start)).exp());
            }
        }
        acc
    }

    /// `P(tau > t)`, accumulated from the surviving parcels directly.
    pub fn survival(&self, t: T) -> T {
        let mut acc = self.never;
        for &(at, m) in &self.atoms {
            if at > t {
                acc = acc + m;
            }
        }
        for seg in &self.segments {
            if t < seg.start {
                acc = acc + seg.mass;
            } else {
                acc = acc + seg.mass * (-seg.rate * (t - seg.start)).exp();
            }
        }
        acc
    }

    /// `E[e^{-k tau} ; tau < infinity]`, the discounted mass of the finite
    /// part (the never-mass contributes zero).
    pub fn discount(&self, k: T) -> T {
        let mut acc = T::zero();
        for &(at, m) in &self.atoms {
            acc = acc + m * (-k * at).exp();
        }
        for seg in &self.segments {
            acc = acc + seg.mass * (-k * seg.start).exp() * seg.rate / (seg.rate + k);
        }
        acc
    }

    /// `E[e^{-k (tau - s)} ; s < tau < infinity]`.
    pub fn discount_from(&self, s: T, k: T) -> T {
        let mut acc = T::zero();
        for &(at, m) in &self.atoms {
            if at > s {
                acc = acc + m * (-k * (at - s)).exp();
            }
        }
        for seg in &self.segments {
            let factor = seg.rate / (seg.rate + k);
            if seg.start >= s {
                acc = acc + seg.mass * (-k * (seg.start - s)).exp() * factor;
            } else {
                acc = acc + seg.mass * (-seg.rate * (s - seg.start)).exp() * factor;
            }
        }
        acc
    }

    /// Atom times and segment starts; these are where the CDF is kinked.
    pub fn event_times(&self) -> Vec<T> {
        let mut times: Vec<T> = self.atoms.iter().map(|&(t, _)| t).collect();
        times.extend(self.segments.iter().map(|s| s.start));
        times
    }

    /// Inverse-mixture sampling: maps a uniform draw in `[0,1)` to a stop time.
    pub fn sample(&self, u: T) -> Stop<T> {
        let mut acc = T::zero();
        for &(at, m) in &self.atoms {
            acc = acc + m;
            if u < acc {
                return Stop::At(at);
            }
        }
        for seg in &self.segments {
            let prev = acc;
            acc = acc + seg.mass;
            if u < acc {
                let w = (u - prev) / seg.mass;
                return Stop::At(seg.start - (T::one() - w).ln() / seg.rate);
            }
        }
        Stop::Never
    }
}

/// The pair of per-quality stopping-time laws induced by a policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShirkSchedule<T> {
    /// Law of the shirk time when the task quality is high.
    pub alpha: StopDist<T>,
    /// Law of the shirk time when the task quality is low.
    pub beta: StopDist<T>,
}

impl<T: Real> ShirkSchedule<T> {
    pub fn by_quality(&self, q: Quality) -> &StopDist<T> {
        match q {
            Quality::High => &self.alpha,
            Quality::Low => &self.beta,
        }
    }

    /// All CDF kink times of either quality, used to seed check grids.
    pub fn event_times(&self) -> Vec<T> {
        let mut times = self.alpha.event_times();
        times.extend(self.beta.event_times());
        times.sort_by(|a, b| a.partial_cmp(b).expect("finite event times"));
        times.dedup();
        times
    }
}

/// Tagged description of an information policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy<T> {
    /// No disclosure at all; the agent best-responds to the prior.
    None,
    /// Optimal static pooling: posterior exactly `mu_bar` on "continue".
    Kg,
    /// Silence until `t`, then full disclosure.
    Dd { t: T },
    /// Silence until `t_tilde(mu)`, then full disclosure.
    Mdd,
    /// Initial pooling to `mu_hat`, then Poisson disclosure of low quality.
    Ipd,
    /// Silence until `t_bar(mu)`, then Poisson disclosure of low quality.
    Dpd,
    /// Full disclosure at time zero.
    Ifd,
    /// Time-varying cutoff disclosure over a continuous quality law.
    CustomCutoff { schedule: CutoffSchedule<T> },
}

/// Optimal static policy: pools low quality with high so the posterior on
/// "continue" is exactly `mu_bar`. Returns [`Policy::None`] when the prior
/// already clears `mu_bar` (no persuasion is necessary).
pub fn make_kg<T: Real>(env: &Environment<T>) -> Result<Policy<T>, PolicyError> {
    if env.regime() == Regime::Pessimistic {
        return Err(PolicyError::StaticPoolingNotObedient);
    }
    if env.mu() >= thresholds::mu_bar(env) {
        Ok(Policy::None)
    } else {
        Ok(Policy::Kg)
    }
}

/// Delayed disclosure at `t`; rejects delays past `t_tilde(mu)` with the
/// obedience slack (most-violated continuation value) attached.
pub fn make_dd<T: Real>(env: &Environment<T>, t: T) -> Result<Policy<T>, PolicyError> {
    if !(t.is_finite() && t >= T::zero()) {
        return Err(PolicyError::InvalidAtom);
    }
    match thresholds::t_tilde(env) {
        Stop::Never => Ok(Policy::Dd { t }),
        Stop::At(max_delay) if t <= max_delay => Ok(Policy::Dd { t }),
        Stop::At(_) => {
            let (slack, at) = dd_obedience_slack(env, t);
            Err(PolicyError::NotObedient {
                slack: slack.to_f64().unwrap_or(f64::NAN),
                at: at.to_f64().unwrap_or(f64::NAN),
            })
        }
    }
}

/// The binding continuation value of DD(`t`): at time zero outside the
/// pessimistic regime (and below `mu_hat`), at `t_bar(mu)` above it.
fn dd_obedience_slack<T: Real>(env: &Environment<T>, t: T) -> (T, T) {
    let one = T::one();
    if env.regime() == Regime::Pessimistic && env.mu() > thresholds::mu_hat(env) {
        let bind = thresholds::t_bar(env);
        let hat = thresholds::mu_hat(env);
        let residual = if t > bind { t - bind } else { T::zero() };
        let value = hat * env.agent_value_complete(Quality::High)
            + (one - hat) * env.agent_value(Stop::At(residual), Quality::Low);
        (value, bind)
    } else {
        let value = env.mu() * env.agent_value_complete(Quality::High)
            + (one - env.mu()) * env.agent_value(Stop::At(t), Quality::Low);
        (value, T::zero())
    }
}

/// Maximum delayed disclosure: DD at `t_tilde(mu)` (never discloses when the
/// prior already clears `mu_bar` outside the pessimistic regime).
pub fn make_mdd<T: Real>(_env: &Environment<T>) -> Policy<T> {
    Policy::Mdd
}

/// Initial & Poisson disclosure (pessimistic, `mu <= mu_hat`).
pub fn make_ipd<T: Real>(env: &Environment<T>) -> Result<Policy<T>, PolicyError> {
    if env.regime() != Regime::Pessimistic {
        return Err(PolicyError::RequiresPessimistic { policy: "IPD" });
    }
    let hat = thresholds::mu_hat(env);
    if env.mu() > hat {
        return Err(PolicyError::PriorAboveHat {
            mu: env.mu().to_f64().unwrap_or(f64::NAN),
            mu_hat: hat.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(Policy::Ipd)
}

/// Delayed Poisson disclosure (pessimistic, `mu > mu_hat`).
pub fn make_dpd<T: Real>(env: &Environment<T>) -> Result<Policy<T>, PolicyError> {
    if env.regime() != Regime::Pessimistic {
        return Err(PolicyError::RequiresPessimistic { policy: "DPD" });
    }
    let hat = thresholds::mu_hat(env);
    if env.mu() <= hat {
        return Err(PolicyError::PriorBelowHat {
            mu: env.mu().to_f64().unwrap_or(f64::NAN),
            mu_hat: hat.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(Policy::Dpd)
}

/// Initial full disclosure.
pub fn make_ifd<T: Real>(_env: &Environment<T>) -> Policy<T> {
    Policy::Ifd
}

/// Case dispatch for the optimal dynamic policy. Ties at `r_p = r` resolve
/// to the static policy (a continuum of policies is optimal there).
pub fn optimal<T: Real>(env: &Environment<T>) -> Policy<T> {
    match env.regime() {
        Regime::Stationary | Regime::Optimistic => {
            if env.mu() >= thresholds::mu_bar(env) {
                Policy::None
            } else if env.r_p() <= env.r() {
                Policy::Kg
            } else {
                Policy::Mdd
            }
        }
        Regime::Pessimistic => {
            if env.r_p() > env.r() {
                Policy::Mdd
            } else if env.mu() <= thresholds::mu_hat(env) {
                Policy::Ipd
            } else {
                Policy::Dpd
            }
        }
    }
}

/// Normalizes a policy to the `(alpha, beta)` pair it induces when the agent
/// best-responds. Obedience violations propagate as errors.
pub fn shirk_schedule<T: Real>(
    policy: &Policy<T>,
    env: &Environment<T>,
) -> Result<ShirkSchedule<T>, PolicyError> {
    let one = T::one();
    let zero = T::zero();
    match policy {
        Policy::None => {
            // without information the stop plan cannot depend on the quality
            let tau = crate::agent::best_shirk_no_info(env);
            Ok(ShirkSchedule {
                alpha: StopDist::degenerate(tau),
                beta: StopDist::degenerate(tau),
            })
        }
        Policy::Kg => {
            if env.regime() == Regime::Pessimistic {
                return Err(PolicyError::StaticPoolingNotObedient);
            }
            if env.mu() >= thresholds::mu_bar(env) {
                return shirk_schedule(&Policy::None, env);
            }
            let beta0 = thresholds::c1(env);
            Ok(ShirkSchedule {
                alpha: StopDist::degenerate(Stop::Never),
                beta: StopDist::new(vec![(zero, beta0)], Vec::new(), one - beta0)?,
            })
        }
        Policy::Dd { t } => {
            make_dd(env, *t)?;
            Ok(ShirkSchedule {
                alpha: StopDist::degenerate(Stop::Never),
                beta: StopDist::degenerate(Stop::At(*t)),
            })
        }
        Policy::Mdd => {
            let tau = thresholds::t_tilde(env);
            Ok(ShirkSchedule {
                alpha: StopDist::degenerate(Stop::Never),
                beta: StopDist::degenerate(tau),
            })
        }
        Policy::Ipd => {
            make_ipd(env)?;
            let ratio = env.agent_decay(Quality::High) / env.agent_decay(Quality::Low);
            let beta0 = one - thresholds::c2(env) * ratio;
            Ok(ShirkSchedule {
                alpha: StopDist::degenerate(Stop::Never),
                beta: StopDist::new(
                    vec![(zero, beta0)],
                    vec![ExpSegment {
                        start: zero,
                        rate: env.rate_gap(),
                        mass: one - beta0,
                    }],
                    zero,
                )?,
            })
        }
        Policy::Dpd => {
            make_dpd(env)?;
            Ok(ShirkSchedule {
                alpha: StopDist::degenerate(Stop::Never),
                beta: StopDist::new(
                    Vec::new(),
                    vec![ExpSegment {
                        start: thresholds::t_bar(env),
                        rate: env.rate_gap(),
                        mass: one,
                    }],
                    zero,
                )?,
            })
        }
        Policy::Ifd => Ok(ShirkSchedule {
            alpha: StopDist::degenerate(Stop::Never),
            beta: StopDist::degenerate(Stop::At(zero)),
        }),
        Policy::CustomCutoff { .. } => Err(PolicyError::RequiresQualityLaw),
    }
}
