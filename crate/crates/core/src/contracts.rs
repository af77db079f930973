//! Information/wage contracts in the stationary case.
//!
//! A contract pairs an information policy with a wage stream bounded by a
//! flow budget `B` and an upfront payment `M`. Effort and completion are not
//! contractible, so wages only enter the participation constraint; the
//! effective discount rates are `r + lambda` (agent) and `r_p + lambda`
//! (principal) because payments stop at completion.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Environment, Quality, Regime, Stop};
use crate::numeric::geometric_grid;
use crate::oracle::{self, lp};
use crate::policies::{Policy, PolicyError};
use crate::scalar::{real, Real};
use crate::thresholds;

/// Maximum number of wage breakpoints (the optimal forms need at most two).
pub const MAX_BREAKPOINTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContractError {
    #[error("wage schedule needs 0 <= rate <= budget, strictly increasing start times from 0, and at most {MAX_BREAKPOINTS} breakpoints")]
    InvalidWageSchedule,
    #[error("contracts are only defined for the stationary case (lambda_H = lambda_L)")]
    RequiresStationary,
    #[error("outside-option assumption failed: {which}")]
    AssumptionViolated { which: &'static str },
    #[error("agent present value {pv} is not reachable with wages alone (max {max})")]
    PaymentInfeasible { pv: f64, max: f64 },
    #[error("payment timing with r_p <= r is all-upfront; no threshold time exists")]
    RequiresImpatience,
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Lp(#[from] lp::LpError),
}

/// Piecewise-constant wage stream: `(start, rate)` pieces, each rate paid
/// until the next start (the last piece runs forever).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WageSchedule<T> {
    pieces: Vec<(T, T)>,
}

impl<T: Real> WageSchedule<T> {
    pub fn new(pieces: Vec<(T, T)>, budget: T) -> Result<Self, ContractError> {
        if pieces.is_empty() || pieces.len() > MAX_BREAKPOINTS {
            return Err(ContractError::InvalidWageSchedule);
        }
        if pieces[0].0 != T::zero() {
            return Err(ContractError::InvalidWageSchedule);
        }
        let mut prev = -T::one();
        for &(start, rate) in &pieces {
            if !(start.is_finite() && rate.is_finite())
                || start <= prev
                || rate < T::zero()
                || rate > budget
            {
                return Err(ContractError::InvalidWageSchedule);
            }
            prev = start;
        }
        Ok(WageSchedule { pieces })
    }

    /// No payments at all.
    pub fn zero() -> Self {
        WageSchedule {
            pieces: vec![(T::zero(), T::zero())],
        }
    }

    /// Zero until `start`, then the constant `rate` forever.
    pub fn threshold(start: T, rate: T) -> Self {
        if start <= T::zero() {
            WageSchedule {
                pieces: vec![(T::zero(), rate)],
            }
        } else {
            WageSchedule {
                pieces: vec![(T::zero(), T::zero()), (start, rate)],
            }
        }
    }

    pub fn pieces(&self) -> &[(T, T)] {
        &self.pieces
    }

    /// `∫_0^∞ e^{-k t} p_t dt` for effective discount rate `k`.
    pub fn present_value(&self, k: T) -> T {
        let mut total = T::zero();
        for (i, &(start, rate)) in self.pieces.iter().enumerate() {
            let tail_start = (-k * start).exp();
            let tail_end = match self.pieces.get(i + 1) {
                Some(&(next, _)) => (-k * next).exp(),
                None => T::zero(),
            };
            total = total + rate * (tail_start - tail_end) / k;
        }
        total
    }
}

/// An information/wage contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contract<T> {
    pub policy: Policy<T>,
    #[serde(rename = "wage_breakpoints")]
    pub wages: WageSchedule<T>,
    #[serde(rename = "M")]
    pub upfront: T,
    #[serde(rename = "B")]
    pub budget: T,
    pub v_bar: T,
}

/// `(W, V)` of a contract: the policy payoffs adjusted by the payment
/// present values at the two effective discount rates.
pub fn contract_values<T: Real>(
    env: &Environment<T>,
    contract: &Contract<T>,
) -> Result<(T, T), ContractError> {
    if env.regime() != Regime::Stationary {
        return Err(ContractError::RequiresStationary);
    }
    let (w_base, v_base) = oracle::policy_values(env, &contract.policy)
        .map_err(|e| match e {
            oracle::OracleError::Policy(p) => ContractError::Policy(p),
            oracle::OracleError::InvalidCurve => unreachable!("policy_values never builds curves"),
        })?;
    let w = w_base - contract.wages.present_value(env.principal_decay(Quality::Low))
        - contract.upfront;
    let v = v_base + contract.wages.present_value(env.agent_decay(Quality::Low))
        + contract.upfront;
    Ok((w, v))
}

/// Cheapest way (for the principal) to deliver present value `pv` to the
/// agent: all upfront when `r_p <= r`, otherwise no upfront and the maximum
/// wage from the threshold time `T` solving `e^{-(r+lambda)T} B/(r+lambda) = pv`.
pub fn optimal_payment_timing<T: Real>(
    env: &Environment<T>,
    pv: T,
    budget: T,
) -> Result<(WageSchedule<T>, T), ContractError> {
    if pv <= T::zero() {
        return Ok((WageSchedule::zero(), T::zero()));
    }
    if env.r_p() <= env.r() {
        return Ok((WageSchedule::zero(), pv));
    }
    let k = env.agent_decay(Quality::Low);
    let capacity = budget / k;
    if pv > capacity {
        return Err(ContractError::PaymentInfeasible {
            pv: pv.to_f64().unwrap_or(f64::NAN),
            max: capacity.to_f64().unwrap_or(f64::NAN),
        });
    }
    let start = (budget / (k * pv)).ln() / k;
    Ok((WageSchedule::threshold(start, budget), T::zero()))
}

/// An optimal contract plus (for the impatient branch) the LP-certified
/// optimality margin: oracle optimum minus the contract's own objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractSolution<T> {
    pub contract: Contract<T>,
    pub certified_margin: Option<T>,
}

fn check_assumptions<T: Real>(
    env: &Environment<T>,
    v_bar: T,
    budget: T,
) -> Result<(), ContractError> {
    let fail = |which| Err(ContractError::AssumptionViolated { which });
    if env.mu() >= thresholds::mu_bar(env) {
        return fail("mu < mu_bar (persuasion must be necessary)");
    }
    let v_high = env.agent_value_complete(Quality::High);
    let w_high = env.principal_value_complete(Quality::High);
    if !(v_bar > env.mu() * v_high) {
        return fail("v_bar > mu v(H)");
    }
    if !(v_bar < env.mu() * (v_high + w_high)) {
        return fail("v_bar < mu [v(H) + w(H)]");
    }
    if !(v_bar < budget / env.agent_decay(Quality::Low)) {
        return fail("v_bar < B/(r+lambda)");
    }
    Ok(())
}

/// Optimal information/wage contract. Patient principal: all payments
/// upfront, IFD when completing the low task destroys surplus
/// (`w(L)+v(L) < 0`), KG otherwise. Impatient principal: MDD with the
/// threshold wage delivering exactly `v_bar`, certified against the LP
/// oracle ("sufficiently large B" is verified, never assumed).
pub fn optimal_contract<T: Real>(
    env: &Environment<T>,
    v_bar: T,
    budget: T,
) -> Result<ContractSolution<T>, ContractError> {
    if env.regime() != Regime::Stationary {
        return Err(ContractError::RequiresStationary);
    }
    check_assumptions(env, v_bar, budget)?;
    if env.r_p() <= env.r() {
        let surplus_low = env.principal_value_complete(Quality::Low)
            + env.agent_value_complete(Quality::Low);
        let (policy, upfront) = if surplus_low < T::zero() {
            (
                Policy::Ifd,
                v_bar - env.mu() * env.agent_value_complete(Quality::High),
            )
        } else {
            (Policy::Kg, v_bar)
        };
        return Ok(ContractSolution {
            contract: Contract {
                policy,
                wages: WageSchedule::zero(),
                upfront,
                budget,
                v_bar,
            },
            certified_margin: None,
        });
    }
    let (wages, upfront) = optimal_payment_timing(env, v_bar, budget)?;
    let contract = Contract {
        policy: Policy::Mdd,
        wages,
        upfront,
        budget,
        v_bar,
    };
    let own = mdd_threshold_objective(env, v_bar, budget);
    let (oracle_opt, _) = contract_lp_oracle(env, v_bar, budget, 512, 64)?;
    Ok(ContractSolution {
        contract,
        certified_margin: Some(oracle_opt - own),
    })
}

/// The scaled objective of (MDD, T*): `C1^{(r_p+lambda)/(r+lambda)} +
/// B e^{-(r_p+lambda) T*} / ((1-mu)(r_p+lambda) w(L))`.
pub fn mdd_threshold_objective<T: Real>(env: &Environment<T>, v_bar: T, budget: T) -> T {
    let k_a = env.agent_decay(Quality::Low);
    let k_p = env.principal_decay(Quality::Low);
    let c1 = thresholds::c1(env);
    let t_star = (budget / (k_a * v_bar)).ln() / k_a;
    let wage_term = budget * (-k_p * t_star).exp()
        / ((T::one() - env.mu()) * k_p * env.principal_value_complete(Quality::Low));
    c1.powf(k_p / k_a) + wage_term
}

/// Joint (disclosure, wage-threshold) minimization: scans `T` over a grid,
/// solving the stationary LP with the participation-tightened requirement
/// for each `T`, and returns the best total objective and its `T` (infinity
/// encodes "no wages"). The scaled objective is comparable with
/// [`mdd_threshold_objective`].
pub fn contract_lp_oracle<T: Real>(
    env: &Environment<T>,
    v_bar: T,
    budget: T,
    grid_n: usize,
    t_n: usize,
) -> Result<(T, Stop<T>), ContractError> {
    if env.regime() != Regime::Stationary {
        return Err(ContractError::RequiresStationary);
    }
    if env.r_p() <= env.r() {
        return Err(ContractError::RequiresImpatience);
    }
    let k_a = env.agent_decay(Quality::Low);
    let k_p = env.principal_decay(Quality::Low);
    let nu = (T::one() - env.mu()) * (-env.agent_value_complete(Quality::Low));
    let wage_scale = (T::one() - env.mu()) * k_p * env.principal_value_complete(Quality::Low);
    let c1 = thresholds::c1(env);
    let grid = lp::time_grid(env, grid_n);

    let mut t_grid: Vec<Stop<T>> = vec![Stop::At(T::zero())];
    t_grid.extend(geometric_grid(env.t_max(), t_n).into_iter().map(Stop::At));
    if v_bar > T::zero() {
        let t_star = (budget / (k_a * v_bar)).ln() / k_a;
        if t_star > T::zero() {
            t_grid.push(Stop::At(t_star));
        }
    }
    t_grid.push(Stop::Never);

    let mut best: Option<(T, Stop<T>)> = None;
    for &t_node in &t_grid {
        let (wage_pv_agent, wage_cost) = match t_node {
            Stop::At(t) => (
                budget * (-k_a * t).exp() / k_a,
                budget * (-k_p * t).exp() / wage_scale,
            ),
            Stop::Never => (T::zero(), T::zero()),
        };
        let shortfall = (v_bar - wage_pv_agent).max(T::zero());
        let requirement = c1 + shortfall / nu;
        if requirement > T::one() + real(1e-12) {
            continue; // no distribution can meet the tightened constraint
        }
        let program = lp::stationary_program_with_requirement(env, &grid, requirement);
        let solution = lp::solve(&program)?;
        let total = solution.objective + wage_cost;
        let better = match &best {
            Some((incumbent, _)) => total < *incumbent,
            None => true,
        };
        if better {
            best = Some((total, t_node));
        }
    }
    best.ok_or(ContractError::AssumptionViolated {
        which: "no feasible wage threshold (v_bar too large for the budget?)",
    })
}
