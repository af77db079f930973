//! The five subcommands: solve, verify, sweep, contract, genq.

use std::path::PathBuf;

use disclose::agent;
use disclose::contracts;
use disclose::env::{Regime, Stop};
use disclose::genq;
use disclose::oracle::{self, lp, mc};
use disclose::policies;
use disclose::thresholds::{self, Thresholds};
use disclose::{Environment, Policy};
use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

fn policy_error(e: impl std::fmt::Display) -> CliError {
    CliError::invalid(e.to_string())
}

/// The case a policy dispatch landed in.
#[derive(Debug, Clone, Serialize)]
pub struct CaseReport {
    pub regime: Regime,
    pub impatient_principal: bool,
    pub persuasion_needed: bool,
}

fn case_report(env: &Environment) -> CaseReport {
    let needed = match env.regime() {
        Regime::Pessimistic => true,
        _ => env.mu() < thresholds::mu_bar(env),
    };
    CaseReport {
        regime: env.regime(),
        impatient_principal: env.r_p() > env.r(),
        persuasion_needed: needed,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub case: CaseReport,
    pub optimal_policy: Policy,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub thresholds: Thresholds<f64>,
}

pub fn cmd_solve(config: &RunConfig) -> Result<SolveReport, CliError> {
    let env = config.environment()?;
    let policy = policies::optimal(&env);
    let (w, v) = oracle::policy_values(&env, &policy).map_err(policy_error)?;
    Ok(SolveReport {
        case: case_report(&env),
        optimal_policy: policy,
        w,
        v,
        thresholds: Thresholds::new(&env),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    /// Measured quantity (gap, minimum, deviation...).
    pub value: f64,
    /// The bound it is held against.
    pub bound: f64,
}

impl CheckResult {
    fn against(name: &'static str, value: f64, bound: f64) -> Self {
        CheckResult {
            name,
            pass: value.abs() <= bound,
            value,
            bound,
        }
    }

    fn at_least(name: &'static str, value: f64, floor: f64) -> Self {
        CheckResult {
            name,
            pass: value >= floor,
            value,
            bound: floor,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub pass: bool,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn render_lines(&self) -> String {
        let mut out = String::new();
        for check in &self.checks {
            out.push_str(&format!(
                "{} {}: value {:+.3e}, bound {:.3e}\n",
                if check.pass { "PASS" } else { "FAIL" },
                check.name,
                check.value,
                check.bound
            ));
        }
        out.push_str(if self.pass { "all checks passed\n" } else { "verification FAILED\n" });
        out
    }
}

/// Runs the oracle battery against the configured environment: LP vs closed
/// form, enumeration vs simplex, obedience of the optimal policy, binding
/// participation, and Monte Carlo agreement.
pub fn cmd_verify(config: &RunConfig) -> Result<VerifyReport, CliError> {
    let env = config.environment()?;
    let n = config.grid_size()?;
    let tol = config.tolerance()?;
    let paths = config.mc_paths()?;
    let seed = config.seed();
    let mut checks = Vec::new();

    let pessimistic = env.regime() == Regime::Pessimistic;
    let mu_bar = thresholds::mu_bar(&env);
    let mu_hat = thresholds::mu_hat(&env);
    let binding = if pessimistic {
        env.mu() <= mu_hat
    } else {
        env.mu() < mu_bar
    };

    // inverse pair of the delay threshold, where the direct formula applies
    if binding {
        if let Stop::At(t) = thresholds::t_tilde(&env) {
            let dev = thresholds::mu_tilde(&env, t) - env.mu();
            checks.push(CheckResult::against("threshold_inverse_pair", dev, 1e-8));
        }
    }

    // LP oracle against the closed-form optimum
    let grid = lp::time_grid_with_thresholds(&env, n);
    if pessimistic {
        let s_grid = lp::check_times_with_thresholds(&env, n);
        let sol =
            lp::solve(&lp::pessimistic_program(&env, &grid, &s_grid)).map_err(policy_error)?;
        let closed = lp::pessimistic_closed_form(&env);
        checks.push(CheckResult::against(
            "lp_vs_closed_form",
            sol.objective - closed,
            1e-3,
        ));
        if env.mu() > mu_hat {
            let t_bar = thresholds::t_bar(&env);
            checks.push(CheckResult::against(
                "lp_mass_before_t_bar",
                sol.mass_before(&grid, t_bar - 1e-9),
                1e-6,
            ));
        }
    } else if env.mu() < mu_bar {
        let sol = lp::solve(&lp::stationary_program(&env, &grid)).map_err(policy_error)?;
        let closed = lp::stationary_closed_form(&env);
        checks.push(CheckResult::against(
            "lp_vs_closed_form",
            sol.objective - closed,
            1e-3,
        ));
        let two_point = lp::two_point_oracle(&env, &grid).map_err(policy_error)?;
        checks.push(CheckResult::against(
            "two_point_vs_simplex",
            sol.objective - two_point.objective,
            1e-6,
        ));
    }

    // obedience of the optimal policy
    let policy = policies::optimal(&env);
    let sched = policies::shirk_schedule(&policy, &env).map_err(policy_error)?;
    let grid_s = agent::obedience_grid(&env, &sched, agent::OBEDIENCE_GRID);
    let report = agent::obedience_check(&env, &sched, &grid_s, tol);
    checks.push(CheckResult::at_least(
        "optimal_policy_obedient",
        report.min_value,
        -tol,
    ));

    // binding participation when persuasion is needed
    let (w, v) = oracle::values(&env, &sched);
    if binding && policy != Policy::None {
        checks.push(CheckResult::against("binding_participation", v, 1e-8));
    }

    // Monte Carlo agreement with the exact values
    let mc_report = mc::monte_carlo_schedule(&env, &sched, paths, seed).map_err(policy_error)?;
    checks.push(CheckResult::against(
        "monte_carlo_w",
        mc_report.w_hat - w,
        3.0 * mc_report.w_se + 1e-12,
    ));
    checks.push(CheckResult::against(
        "monte_carlo_v",
        mc_report.v_hat - v,
        3.0 * mc_report.v_se + 1e-12,
    ));
    checks.push(CheckResult::against(
        "monte_carlo_obedience_violations",
        mc_report.obedience_violations as f64,
        0.0,
    ));

    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport { pass, seed, checks })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub rows: usize,
    pub file: PathBuf,
}

/// Emits the principal-value curves over the prior as RFC-4180 CSV and spot
/// re-validates one percent of the rows.
pub fn cmd_sweep(config: &RunConfig) -> Result<SweepReport, CliError> {
    let env = config.environment()?;
    let points = config.sweep_points()?;
    let rows = oracle::sweep_principal_values(&env, points);

    // spot re-validation of 1% of rows (at least one)
    let step = (rows.len() / 100).max(1);
    for (i, row) in rows.iter().enumerate().step_by(step) {
        let finite = row.mu.is_finite()
            && row.w_kg.is_finite()
            && row.w_mdd.is_finite()
            && row.w_noinfo.is_finite()
            && row.w_concavified.is_finite();
        if !finite || row.w_concavified < row.w_noinfo - 1e-9 {
            return Err(CliError::VerificationFailed(format!(
                "sweep row {i} violates curve invariants"
            )));
        }
        if let Some(p) = row.w_poisson {
            if p < row.w_kg - 1e-9 {
                return Err(CliError::VerificationFailed(format!(
                    "sweep row {i}: Poisson policy below static optimum"
                )));
            }
        }
    }

    let dir = config.out_dir();
    std::fs::create_dir_all(&dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let file = dir.join("sweep_values.csv");
    std::fs::write(&file, oracle::sweep_to_csv(&rows)).map_err(|source| CliError::Io {
        path: file.display().to_string(),
        source,
    })?;
    Ok(SweepReport {
        rows: rows.len(),
        file,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractReport {
    pub case: CaseReport,
    pub contract: contracts::Contract<f64>,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "V")]
    pub v: f64,
    /// LP-certified optimality margin (impatient branch only).
    pub certified_margin: Option<f64>,
}

pub fn cmd_contract(config: &RunConfig) -> Result<ContractReport, CliError> {
    let env = config.environment()?;
    let block = config
        .contract
        .as_ref()
        .ok_or_else(|| CliError::invalid("config is missing the \"contract\" block"))?;
    let solution =
        contracts::optimal_contract(&env, block.v_bar, block.budget).map_err(policy_error)?;
    let (w, v) = contracts::contract_values(&env, &solution.contract).map_err(policy_error)?;
    if let Some(margin) = solution.certified_margin {
        if margin < -1e-4 {
            return Err(CliError::VerificationFailed(format!(
                "LP oracle found a contract better than (MDD, T*) by {margin:e}; \
                 the budget is not large enough for the closed form"
            )));
        }
    }
    Ok(ContractReport {
        case: case_report(&env),
        contract: solution.contract,
        w,
        v,
        certified_margin: solution.certified_margin,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GenqReport {
    pub q_bar: f64,
    pub q_star: f64,
    pub c3: f64,
    pub branch: genq::CutoffLabel,
    pub schedule: genq::CutoffSchedule<f64>,
    pub program_b: genq::ProgramB<f64>,
    pub obedience: genq::CutoffReport<f64>,
    /// Written only for the impatient branches (gradual cutoffs exist).
    pub curves_file: Option<PathBuf>,
}

pub fn cmd_genq(config: &RunConfig) -> Result<GenqReport, CliError> {
    let block = config
        .genq
        .as_ref()
        .ok_or_else(|| CliError::invalid("config is missing the \"genq\" block"))?;
    let model = genq::Model::new(
        block.r,
        block.r_p,
        block.lambda,
        block.c,
        block.law.clone(),
        block.bonus,
    )
    .map_err(policy_error)?;
    let (branch, schedule) = genq::optimal_cutoff(&model).map_err(policy_error)?;
    let program_b = genq::program_b_oracle(&model, 8192).map_err(policy_error)?;
    let obedience = genq::cutoff_obedience(&model, &schedule).map_err(policy_error)?;
    if !obedience.pass {
        return Err(CliError::VerificationFailed(format!(
            "optimal cutoff schedule failed its own obedience check (min h = {})",
            obedience.min_h
        )));
    }
    if (program_b.direct - program_b.reduced).abs() > 1e-5 {
        return Err(CliError::VerificationFailed(format!(
            "program oracle routes disagree: direct {} vs reduced {}",
            program_b.direct, program_b.reduced
        )));
    }
    let curves_file = if model.r_p() > model.r() {
        let dir = config.out_dir();
        std::fs::create_dir_all(&dir).map_err(|source| CliError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let file = dir.join("genq_cutoffs.csv");
        let csv = genq::cutoff_curves_csv(&model, 256).map_err(policy_error)?;
        std::fs::write(&file, csv).map_err(|source| CliError::Io {
            path: file.display().to_string(),
            source,
        })?;
        Some(file)
    } else {
        None
    };
    Ok(GenqReport {
        q_bar: model.q_bar(),
        q_star: model.q_star(),
        c3: model.c3(),
        branch,
        schedule,
        program_b,
        obedience,
        curves_file,
    })
}
