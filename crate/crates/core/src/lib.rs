//! Optimal dynamic information disclosure for a principal-agent effort model.
//!
//! An agent works on a task whose reward (quality) only the principal knows;
//! effort is costly, completion is Poisson, and the principal can commit to
//! any disclosure rule over time. This crate computes the model's closed-form
//! optimal policies — static pooling (KG), delayed disclosure DD(t) and its
//! maximal version MDD, the Poisson policies IPD/DPD, full disclosure IFD,
//! gradual cutoff disclosure for continuous quality, and information/wage
//! contracts — and independently verifies each of them by discretized linear
//! programs and Monte Carlo simulation of the agent's Bayesian best response.
//!
//! Everything is generic over the scalar type (see [`scalar::Real`]); the
//! aliases below fix `f64`, which is what the CLI and the verification
//! tolerances use.
//!
//! ```
//! use disclose::{oracle, policies, EnvConfig, Environment};
//!
//! let env: Environment = serde_json::from_str::<EnvConfig>(
//!     r#"{"mu":0.2,"r":0.1,"r_p":0.2,"lambda_h":1.0,"lambda_l":1.0,
//!         "c":1.0,"H":2.0,"L":0.5,"b_h":2.0,"b_l":0.5}"#,
//! )?
//! .build()?;
//!
//! // an impatient principal optimally delays disclosure as long as the
//! // agent will tolerate, then reveals everything
//! let policy = policies::optimal(&env);
//! assert_eq!(policy, disclose::Policy::Mdd);
//!
//! let (w, v) = oracle::policy_values(&env, &policy)?;
//! assert!((w - 0.51017818).abs() < 1e-7);
//! assert!(v.abs() < 1e-12); // the agent is held exactly to his outside option
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod agent;
pub mod contracts;
pub mod env;
pub mod genq;
pub mod numeric;
pub mod oracle;
pub mod policies;
pub mod scalar;
pub mod thresholds;

#[cfg(test)]
pub(crate) mod testutil;

pub use env::{EnvConfig, Quality, Regime, Stop};

/// Model primitives at double precision.
pub type Environment = env::Environment<f64>;
/// Cached belief/time thresholds at double precision.
pub type Thresholds = thresholds::Thresholds<f64>;
/// Information policy at double precision.
pub type Policy = policies::Policy<f64>;
/// Per-quality shirk-time distributions at double precision.
pub type ShirkSchedule = policies::ShirkSchedule<f64>;
/// Sampled value curve at double precision.
pub type ValueCurve = oracle::ValueCurve<f64>;
