//! Discretized linear programs over stopping-time distributions, solved by a
//! self-contained dense two-phase simplex (no external solver).
//!
//! The programs minimize the principal's discounted disclosure weight
//! `beta(0) + ∫ e^{-(r_p+lambda_L) t} d beta(t)` over distributions supported
//! on a time grid plus a node at infinity, subject to the agent's obedience
//! constraints — a single ex-ante constraint in the stationary case, one
//! constraint per check time in the pessimistic case.

use thiserror::Error;

use crate::env::{Environment, Quality, Regime, Stop};
use crate::numeric::geometric_grid;
use crate::scalar::{real, Real};
use crate::thresholds;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("program is infeasible (phase-1 residual {residual})")]
    Infeasible { residual: f64 },
    #[error("program is unbounded below")]
    Unbounded,
    #[error("simplex iteration limit reached after {iterations} pivots")]
    IterationLimit { iterations: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct ConstraintRow<T> {
    pub coeffs: Vec<T>,
    pub sense: Sense,
    pub rhs: T,
}

/// A time-grid LP: mass variables (one per node, including the node at
/// infinity), minimization weights and constraint rows.
#[derive(Debug, Clone)]
pub struct DiscreteProgram<T> {
    pub grid: Vec<Stop<T>>,
    pub objective: Vec<T>,
    pub rows: Vec<ConstraintRow<T>>,
}

#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    pub masses: Vec<T>,
    pub objective: T,
    pub iterations: usize,
}

impl<T: Real> LpSolution<T> {
    /// Total mass on finite nodes strictly before `cutoff`.
    pub fn mass_before(&self, grid: &[Stop<T>], cutoff: T) -> T {
        self.masses
            .iter()
            .zip(grid)
            .filter_map(|(&m, node)| match node {
                Stop::At(t) if *t < cutoff => Some(m),
                _ => None,
            })
            .fold(T::zero(), |a, b| a + b)
    }
}

/// Discount weight of a node: `e^{-k t}` for finite times (1 at zero), 0 at
/// the node at infinity.
fn node_weight<T: Real>(node: Stop<T>, k: T) -> T {
    match node {
        Stop::At(t) => (-k * t).exp(),
        Stop::Never => T::zero(),
    }
}

/// Default node grid: `{0}`, `n` geometric points on `(0, t_max]`, infinity.
pub fn time_grid<T: Real>(env: &Environment<T>, n: usize) -> Vec<Stop<T>> {
    let mut grid = vec![Stop::At(T::zero())];
    grid.extend(geometric_grid(env.t_max(), n).into_iter().map(Stop::At));
    grid.push(Stop::Never);
    grid
}

/// Node grid augmented with the environment's pinned times (`t_bar` and a
/// finite `t_tilde`), so the closed-form optima are representable exactly.
pub fn time_grid_with_thresholds<T: Real>(env: &Environment<T>, n: usize) -> Vec<Stop<T>> {
    let mut times = geometric_grid(env.t_max(), n);
    if env.regime() == Regime::Pessimistic {
        let t_bar = thresholds::t_bar(env);
        if t_bar > T::zero() {
            times.push(t_bar);
        }
    }
    if let Stop::At(t) = thresholds::t_tilde(env) {
        if t > T::zero() {
            times.push(t);
        }
    }
    times.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    times.dedup();
    let mut grid = vec![Stop::At(T::zero())];
    grid.extend(times.into_iter().map(Stop::At));
    grid.push(Stop::Never);
    grid
}

/// Default constraint check times: `{0}` plus `n` geometric points.
pub fn check_times<T: Real>(env: &Environment<T>, n: usize) -> Vec<T> {
    let mut s = vec![T::zero()];
    s.extend(geometric_grid(env.t_max(), n));
    s
}

/// Check times augmented with the pinned thresholds, mirroring
/// [`time_grid_with_thresholds`]. Without `t_bar` in the check set, a node
/// sitting exactly at the last sampled time before `t_bar` is invisible to
/// the binding constraint and the LP parks spurious early mass there.
pub fn check_times_with_thresholds<T: Real>(env: &Environment<T>, n: usize) -> Vec<T> {
    let mut s = check_times(env, n);
    if env.regime() == Regime::Pessimistic {
        let t_bar = thresholds::t_bar(env);
        if t_bar > T::zero() {
            s.push(t_bar);
        }
    }
    if let Stop::At(t) = thresholds::t_tilde(env) {
        if t > T::zero() {
            s.push(t);
        }
    }
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite check times"));
    s.dedup();
    s
}

/// Stationary relaxation: minimize the principal weight subject to the
/// ex-ante obedience constraint `sum e^{-(r+lambda) t_i} x_i >= C1` and
/// `sum x_i = 1`.
pub fn stationary_program<T: Real>(env: &Environment<T>, grid: &[Stop<T>]) -> DiscreteProgram<T> {
    stationary_program_with_requirement(env, grid, thresholds::c1(env))
}

/// Stationary program with an explicit right-hand side on the obedience
/// constraint (the wage-contract oracle tightens it above `C1`).
pub fn stationary_program_with_requirement<T: Real>(
    env: &Environment<T>,
    grid: &[Stop<T>],
    requirement: T,
) -> DiscreteProgram<T> {
    let k_p = env.principal_decay(Quality::Low);
    let k_a = env.agent_decay(Quality::Low);
    let objective = grid.iter().map(|&n| node_weight(n, k_p)).collect();
    let rows = vec![
        ConstraintRow {
            coeffs: grid.iter().map(|&n| node_weight(n, k_a)).collect(),
            sense: Sense::Ge,
            rhs: requirement,
        },
        ConstraintRow {
            coeffs: vec![T::one(); grid.len()],
            sense: Sense::Eq,
            rhs: T::one(),
        },
    ];
    DiscreteProgram {
        grid: grid.to_vec(),
        objective,
        rows,
    }
}

/// Pessimistic relaxation: one interim obedience constraint per check time,
/// `K_s(beta) <= C2 e^{-(r+lambda_H) s}`, plus the unit-mass row.
pub fn pessimistic_program<T: Real>(
    env: &Environment<T>,
    grid: &[Stop<T>],
    s_grid: &[T],
) -> DiscreteProgram<T> {
    let k_p = env.principal_decay(Quality::Low);
    let k_a = env.agent_decay(Quality::Low);
    let k_h = env.agent_decay(Quality::High);
    let c2 = thresholds::c2(env);
    let objective = grid.iter().map(|&n| node_weight(n, k_p)).collect();
    let mut rows: Vec<ConstraintRow<T>> = s_grid
        .iter()
        .map(|&s| {
            let here = (-k_a * s).exp();
            let coeffs = grid
                .iter()
                .map(|&node| match node {
                    Stop::At(t) if t > s => here - (-k_a * t).exp(),
                    Stop::At(_) => T::zero(),
                    Stop::Never => here,
                })
                .collect();
            ConstraintRow {
                coeffs,
                sense: Sense::Le,
                rhs: c2 * (-k_h * s).exp(),
            }
        })
        .collect();
    rows.push(ConstraintRow {
        coeffs: vec![T::one(); grid.len()],
        sense: Sense::Eq,
        rhs: T::one(),
    });
    DiscreteProgram {
        grid: grid.to_vec(),
        objective,
        rows,
    }
}

/// Closed-form optimum of the stationary program (continuum limit):
/// `C1` for a patient principal, `C1^{(r_p+lambda)/(r+lambda)}` otherwise.
pub fn stationary_closed_form<T: Real>(env: &Environment<T>) -> T {
    let c1 = thresholds::c1(env);
    if env.r_p() <= env.r() {
        c1
    } else {
        c1.powf(env.principal_decay(Quality::Low) / env.agent_decay(Quality::Low))
    }
}

/// Closed-form optimum of the pessimistic program (continuum limit):
/// the discounted disclosure weight of IPD/DPD for a patient principal and
/// of MDD for an impatient one.
pub fn pessimistic_closed_form<T: Real>(env: &Environment<T>) -> T {
    debug_assert_eq!(env.regime(), Regime::Pessimistic);
    let one = T::one();
    let hat = thresholds::mu_hat(env);
    let c2 = thresholds::c2(env);
    let gap = env.rate_gap();
    let k_ph = env.principal_decay(Quality::High);
    let k_pl = env.principal_decay(Quality::Low);
    let k_al = env.agent_decay(Quality::Low);
    if env.r_p() <= env.r() {
        if env.mu() <= hat {
            let ratio = env.agent_decay(Quality::High) / k_al;
            (one - c2 * ratio) + c2 * ratio * gap / k_ph
        } else {
            (-k_pl * thresholds::t_bar(env)).exp() * gap / k_ph
        }
    } else {
        let theta = k_pl / k_al;
        if env.mu() <= hat {
            (one - c2).powf(theta)
        } else {
            let at_hat = env.with_prior(hat).expect("mu_hat interior");
            (-k_pl * thresholds::t_bar(env)).exp()
                * (one - thresholds::c2(&at_hat)).powf(theta)
        }
    }
}

/// Exhaustive vertex enumeration for the stationary program: every basic
/// solution is a single node or a pair of nodes with the obedience
/// constraint binding. Cross-checks the simplex.
pub fn two_point_oracle<T: Real>(
    env: &Environment<T>,
    grid: &[Stop<T>],
) -> Result<LpSolution<T>, LpError> {
    let k_p = env.principal_decay(Quality::Low);
    let k_a = env.agent_decay(Quality::Low);
    let c1 = thresholds::c1(env);
    let p: Vec<T> = grid.iter().map(|&n| node_weight(n, k_p)).collect();
    let u: Vec<T> = grid.iter().map(|&n| node_weight(n, k_a)).collect();
    let slack_tol: T = real(1e-12);
    let mut best: Option<(T, Vec<(usize, T)>)> = None;
    let mut consider = |obj: T, support: Vec<(usize, T)>| {
        let better = match &best {
            Some((incumbent, _)) => obj < *incumbent,
            None => true,
        };
        if better {
            best = Some((obj, support));
        }
    };
    for i in 0..grid.len() {
        if u[i] >= c1 - slack_tol {
            consider(p[i], vec![(i, T::one())]);
        }
        for j in (i + 1)..grid.len() {
            let spread = u[i] - u[j];
            if spread.abs() <= slack_tol {
                continue;
            }
            let x_i = (c1 - u[j]) / spread;
            if x_i < -slack_tol || x_i > T::one() + slack_tol {
                continue;
            }
            let x_i = x_i.max(T::zero()).min(T::one());
            let x_j = T::one() - x_i;
            consider(p[i] * x_i + p[j] * x_j, vec![(i, x_i), (j, x_j)]);
        }
    }
    let (objective, support) = best.ok_or(LpError::Infeasible { residual: 1.0 })?;
    let mut masses = vec![T::zero(); grid.len()];
    for (idx, m) in support {
        masses[idx] = masses[idx] + m;
    }
    Ok(LpSolution {
        masses,
        objective,
        iterations: 0,
    })
}

// ---------------------------------------------------------------------------
// Dense two-phase simplex
// ---------------------------------------------------------------------------

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-8;

/// Tolerances floor at a multiple of the scalar's epsilon so the solver
/// stays honest at f32.
fn scaled_tol<T: Real>(hard: f64, eps_multiple: f64) -> T {
    let eps = T::epsilon() * real(eps_multiple);
    real::<T>(hard).max(eps)
}

/// Solves `min c x` subject to the program rows and `x >= 0`.
pub fn solve<T: Real>(program: &DiscreteProgram<T>) -> Result<LpSolution<T>, LpError> {
    let n = program.objective.len();
    let m = program.rows.len();
    debug_assert!(program.rows.iter().all(|r| r.coeffs.len() == n));

    // Row-scale and normalize to rhs >= 0.
    let mut senses = Vec::with_capacity(m);
    let mut a: Vec<Vec<T>> = Vec::with_capacity(m);
    let mut b: Vec<T> = Vec::with_capacity(m);
    for row in &program.rows {
        let scale = row
            .coeffs
            .iter()
            .fold(T::zero(), |acc, c| acc.max(c.abs()))
            .max(row.rhs.abs());
        let scale = if scale > T::zero() { scale } else { T::one() };
        let mut coeffs: Vec<T> = row.coeffs.iter().map(|&c| c / scale).collect();
        let mut rhs = row.rhs / scale;
        let mut sense = row.sense;
        if rhs < T::zero() {
            rhs = -rhs;
            for c in &mut coeffs {
                *c = -*c;
            }
            sense = match sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
        senses.push(sense);
        a.push(coeffs);
        b.push(rhs);
    }

    // Column layout: structural | slacks | artificials.
    let n_slack = senses.iter().filter(|s| matches!(s, Sense::Le | Sense::Ge)).count();
    let n_art = senses.iter().filter(|s| matches!(s, Sense::Ge | Sense::Eq)).count();
    let ncols = n + n_slack + n_art;
    let art_start = n + n_slack;

    let mut tableau: Vec<Vec<T>> = (0..m).map(|_| vec![T::zero(); ncols]).collect();
    let mut basis = vec![0usize; m];
    let mut slack_idx = n;
    let mut art_idx = art_start;
    for r in 0..m {
        tableau[r][..n].copy_from_slice(&a[r]);
        match senses[r] {
            Sense::Le => {
                tableau[r][slack_idx] = T::one();
                basis[r] = slack_idx;
                slack_idx += 1;
            }
            Sense::Ge => {
                tableau[r][slack_idx] = -T::one();
                slack_idx += 1;
                tableau[r][art_idx] = T::one();
                basis[r] = art_idx;
                art_idx += 1;
            }
            Sense::Eq => {
                tableau[r][art_idx] = T::one();
                basis[r] = art_idx;
                art_idx += 1;
            }
        }
    }
    let mut rhs = b;

    // Phase-1 cost row (artificials) and phase-2 cost row, both reduced
    // against the initial basis.
    let mut cost1 = vec![T::zero(); ncols];
    for j in art_start..ncols {
        cost1[j] = T::one();
    }
    let mut cost1_obj = T::zero();
    for r in 0..m {
        if basis[r] >= art_start {
            for j in 0..ncols {
                cost1[j] = cost1[j] - tableau[r][j];
            }
            cost1_obj = cost1_obj + rhs[r];
        }
    }
    let mut cost2 = vec![T::zero(); ncols];
    cost2[..n].copy_from_slice(&program.objective);
    let mut cost2_obj = T::zero();

    let mut iterations = 0usize;
    let max_iter = 20 * (m + ncols) + 10_000;
    let bland_after = 5 * (m + ncols);

    let pivot_tol: T = scaled_tol(PIVOT_TOL, 8.0);
    let cost_tol: T = scaled_tol(COST_TOL, 8.0);

    // Phase 1: drive the artificial objective to zero.
    loop {
        let enter = select_entering(&cost1, ncols, cost_tol, iterations > bland_after);
        let Some(enter) = enter else { break };
        let leave = select_leaving(&tableau, &rhs, &basis, enter, pivot_tol)
            .ok_or(LpError::Unbounded)?;
        pivot(
            &mut tableau,
            &mut rhs,
            &mut basis,
            &mut [(&mut cost1, &mut cost1_obj), (&mut cost2, &mut cost2_obj)],
            leave,
            enter,
        );
        iterations += 1;
        if iterations > max_iter {
            return Err(LpError::IterationLimit { iterations });
        }
    }
    if cost1_obj.abs() > scaled_tol(FEAS_TOL, 512.0) {
        return Err(LpError::Infeasible {
            residual: cost1_obj.to_f64().unwrap_or(f64::NAN),
        });
    }

    // Pivot residual artificials out of the basis; rows that cannot be
    // pivoted are redundant and are dropped.
    let mut r = 0;
    while r < tableau.len() {
        if basis[r] >= art_start {
            let enter = (0..art_start)
                .find(|&j| tableau[r][j].abs() > pivot_tol);
            match enter {
                Some(j) => pivot(
                    &mut tableau,
                    &mut rhs,
                    &mut basis,
                    &mut [(&mut cost1, &mut cost1_obj), (&mut cost2, &mut cost2_obj)],
                    r,
                    j,
                ),
                None => {
                    tableau.remove(r);
                    rhs.remove(r);
                    basis.remove(r);
                    continue;
                }
            }
        }
        r += 1;
    }
    // Remove artificial columns for phase 2.
    for row in &mut tableau {
        row.truncate(art_start);
    }
    cost2.truncate(art_start);

    // Phase 2.
    loop {
        let enter = select_entering(&cost2, art_start, cost_tol, iterations > bland_after);
        let Some(enter) = enter else { break };
        let leave = select_leaving(&tableau, &rhs, &basis, enter, pivot_tol)
            .ok_or(LpError::Unbounded)?;
        pivot(
            &mut tableau,
            &mut rhs,
            &mut basis,
            &mut [(&mut cost2, &mut cost2_obj)],
            leave,
            enter,
        );
        iterations += 1;
        if iterations > max_iter {
            return Err(LpError::IterationLimit { iterations });
        }
    }

    let mut masses = vec![T::zero(); n];
    for (r, &bi) in basis.iter().enumerate() {
        if bi < n {
            masses[bi] = rhs[r].max(T::zero());
        }
    }
    let objective = masses
        .iter()
        .zip(&program.objective)
        .fold(T::zero(), |acc, (&x, &c)| acc + x * c);
    Ok(LpSolution {
        masses,
        objective,
        iterations,
    })
}

/// Entering column: Dantzig rule normally, Bland's smallest-index rule once
/// `use_bland` is set (anti-cycling guarantee).
fn select_entering<T: Real>(cost: &[T], limit: usize, tol: T, use_bland: bool) -> Option<usize> {
    if use_bland {
        return (0..limit).find(|&j| cost[j] < -tol);
    }
    let mut best: Option<(usize, T)> = None;
    for j in 0..limit {
        if cost[j] < -tol {
            match best {
                Some((_, incumbent)) if cost[j] >= incumbent => {}
                _ => best = Some((j, cost[j])),
            }
        }
    }
    best.map(|(j, _)| j)
}

/// Leaving row: minimum ratio, ties resolved toward the smallest basis index
/// (Bland-compatible).
fn select_leaving<T: Real>(
    tableau: &[Vec<T>],
    rhs: &[T],
    basis: &[usize],
    enter: usize,
    tol: T,
) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for r in 0..tableau.len() {
        let coef = tableau[r][enter];
        if coef > tol {
            let ratio = rhs[r] / coef;
            match best {
                Some((br, incumbent)) => {
                    if ratio < incumbent - tol || (ratio <= incumbent + tol && basis[r] < basis[br])
                    {
                        best = Some((r, ratio));
                    }
                }
                None => best = Some((r, ratio)),
            }
        }
    }
    best.map(|(r, _)| r)
}

fn pivot<T: Real>(
    tableau: &mut [Vec<T>],
    rhs: &mut [T],
    basis: &mut [usize],
    costs: &mut [(&mut Vec<T>, &mut T)],
    leave: usize,
    enter: usize,
) {
    let ncols = tableau[leave].len();
    let pivot_val = tableau[leave][enter];
    for j in 0..ncols {
        tableau[leave][j] = tableau[leave][j] / pivot_val;
    }
    rhs[leave] = rhs[leave] / pivot_val;
    tableau[leave][enter] = T::one();
    for r in 0..tableau.len() {
        if r == leave {
            continue;
        }
        let factor = tableau[r][enter];
        if factor == T::zero() {
            continue;
        }
        for j in 0..ncols {
            tableau[r][j] = tableau[r][j] - factor * tableau[leave][j];
        }
        tableau[r][enter] = T::zero();
        rhs[r] = rhs[r] - factor * rhs[leave];
        if rhs[r] < T::zero() {
            rhs[r] = T::zero(); // clamp rounding residue; ratio test kept it >= 0
        }
    }
    for (cost, obj) in costs.iter_mut() {
        let factor = cost[enter];
        if factor != T::zero() {
            for j in 0..ncols.min(cost.len()) {
                cost[j] = cost[j] - factor * tableau[leave][j];
            }
            cost[enter] = T::zero();
            // entering variable rises to rhs[leave]; reduced cost was `factor`
            **obj = **obj + factor * rhs[leave];
        }
    }
    basis[leave] = enter;
}
