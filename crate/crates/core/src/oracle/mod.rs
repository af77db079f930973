//! Independent verification layer: exact policy values, concavification,
//! discretized linear programs ([`lp`]) and Monte Carlo simulation ([`mc`]).

pub mod lp;
pub mod mc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Environment, Quality, Regime};
use crate::policies::{shirk_schedule, Policy, PolicyError, ShirkSchedule};
use crate::scalar::Real;
use crate::thresholds;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("curve needs at least two samples with strictly increasing finite x")]
    InvalidCurve,
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Expected principal and agent values `(W, V)` of a schedule, integrating
/// the payoff functions exactly against atoms and exponential pieces.
pub fn values<T: Real>(env: &Environment<T>, sched: &ShirkSchedule<T>) -> (T, T) {
    let one = T::one();
    let mut w = T::zero();
    let mut v = T::zero();
    for q in Quality::BOTH {
        let weight = match q {
            Quality::High => env.mu(),
            Quality::Low => one - env.mu(),
        };
        let dist = sched.by_quality(q);
        w = w + weight
            * env.principal_value_complete(q)
            * (one - dist.discount(env.principal_decay(q)));
        v = v + weight * env.agent_value_complete(q) * (one - dist.discount(env.agent_decay(q)));
    }
    (w, v)
}

/// Values of a named policy (normalizes it first).
pub fn policy_values<T: Real>(
    env: &Environment<T>,
    policy: &Policy<T>,
) -> Result<(T, T), OracleError> {
    Ok(values(env, &shirk_schedule(policy, env)?))
}

/// A sampled function used for concavification and figure emission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueCurve<T> {
    pub label: String,
    points: Vec<(T, T)>,
}

impl<T: Real> ValueCurve<T> {
    pub fn new(label: impl Into<String>, points: Vec<(T, T)>) -> Result<Self, OracleError> {
        if points.len() < 2 {
            return Err(OracleError::InvalidCurve);
        }
        for pair in points.windows(2) {
            if !(pair[0].0 < pair[1].0) {
                return Err(OracleError::InvalidCurve);
            }
        }
        if points.iter().any(|&(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(OracleError::InvalidCurve);
        }
        Ok(ValueCurve {
            label: label.into(),
            points,
        })
    }

    pub fn points(&self) -> &[(T, T)] {
        &self.points
    }

    /// Piecewise-linear evaluation; clamps outside the sampled range.
    pub fn eval(&self, x: T) -> T {
        let pts = &self.points;
        if x <= pts[0].0 {
            return pts[0].1;
        }
        if x >= pts[pts.len() - 1].0 {
            return pts[pts.len() - 1].1;
        }
        let mut lo = 0;
        let mut hi = pts.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if pts[mid].0 <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (x0, y0) = pts[lo];
        let (x1, y1) = pts[hi];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }
}

/// Upper concave envelope of a sampled curve, via a monotone-chain scan;
/// returns the envelope resampled at the input x-grid.
pub fn concavify<T: Real>(curve: &ValueCurve<T>) -> ValueCurve<T> {
    let pts = curve.points();
    let mut hull: Vec<(T, T)> = Vec::with_capacity(pts.len());
    for &p in pts {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // pop b if it lies on or below the chord a -> p
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= T::zero() {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let hull_curve = ValueCurve {
        label: format!("{}_concavified", curve.label),
        points: hull,
    };
    let resampled = pts.iter().map(|&(x, _)| (x, hull_curve.eval(x))).collect();
    ValueCurve {
        label: hull_curve.label,
        points: resampled,
    }
}

/// The principal's value when she discloses nothing and the agent
/// best-responds to the prior `mu` (0 and 1 are the closed-form limits).
pub fn no_info_value<T: Real>(env: &Environment<T>, mu: T) -> T {
    if mu <= T::zero() {
        return T::zero();
    }
    if mu >= T::one() {
        return env.principal_value_complete(Quality::High);
    }
    let at = env.with_prior(mu).expect("mu strictly inside (0,1)");
    let sched = shirk_schedule(&Policy::None, &at).expect("no-info schedule always valid");
    values(&at, &sched).0
}

/// The no-information value curve on `{0} ∪ mus ∪ {1}`.
pub fn no_info_curve<T: Real>(env: &Environment<T>, mus: &[T]) -> ValueCurve<T> {
    let mut points = Vec::with_capacity(mus.len() + 2);
    points.push((T::zero(), T::zero()));
    points.extend(mus.iter().map(|&m| (m, no_info_value(env, m))));
    points.push((T::one(), env.principal_value_complete(Quality::High)));
    ValueCurve::new("W_noinfo", points).expect("strictly increasing mu grid")
}

/// One row of the principal-value sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow<T> {
    pub mu: T,
    pub w_kg: T,
    pub w_mdd: T,
    /// IPD (mu <= mu_hat) or DPD value; only defined in the pessimistic case.
    pub w_poisson: Option<T>,
    pub w_noinfo: T,
    pub w_concavified: T,
}

/// Principal values across a prior grid of `n` interior points, computed in
/// a bounded worker pool; rows are ordered by `mu` regardless of scheduling.
///
/// `W_KG` is the optimal static value: the closed form outside the
/// pessimistic regime, the concavified no-information value inside it.
pub fn sweep_principal_values<T: Real>(env: &Environment<T>, n: usize) -> Vec<SweepRow<T>> {
    let mus = crate::numeric::interior_grid(T::zero(), T::one(), n);
    let pessimistic = env.regime() == Regime::Pessimistic;

    let noinfo: Vec<T> = run_indexed(&mus, |&mu| no_info_value(env, mu));
    let mut curve_pts: Vec<(T, T)> = Vec::with_capacity(n + 2);
    curve_pts.push((T::zero(), T::zero()));
    curve_pts.extend(mus.iter().copied().zip(noinfo.iter().copied()));
    curve_pts.push((T::one(), env.principal_value_complete(Quality::High)));
    let hull = concavify(&ValueCurve::new("W_noinfo", curve_pts).expect("increasing grid"));

    let rows: Vec<SweepRow<T>> = run_indexed(&mus, |&mu| {
        let at = env.with_prior(mu).expect("interior mu");
        let hull_value = hull.eval(mu);
        let w_kg = if pessimistic {
            hull_value
        } else {
            kg_value_closed_form(&at)
        };
        let w_mdd = policy_values(&at, &Policy::Mdd)
            .expect("MDD is always constructible")
            .0;
        let w_poisson = if pessimistic {
            let policy = if mu <= thresholds::mu_hat(&at) {
                Policy::Ipd
            } else {
                Policy::Dpd
            };
            Some(policy_values(&at, &policy).expect("Poisson policy valid in regime").0)
        } else {
            None
        };
        SweepRow {
            mu,
            w_kg,
            w_mdd,
            w_poisson,
            w_noinfo: no_info_value(env, mu),
            w_concavified: hull_value,
        }
    });
    rows
}

/// Closed-form static-optimum value outside the pessimistic regime:
/// `mu w(H) + mu (1-mu_bar)/mu_bar w(L)` below `mu_bar`, the full-trust value
/// above it.
pub fn kg_value_closed_form<T: Real>(env: &Environment<T>) -> T {
    let mu = env.mu();
    let bar = thresholds::mu_bar(env);
    let w_high = env.principal_value_complete(Quality::High);
    let w_low = env.principal_value_complete(Quality::Low);
    if mu < bar {
        mu * w_high + mu * (T::one() - bar) / bar * w_low
    } else {
        mu * w_high + (T::one() - mu) * w_low
    }
}

/// Runs `f` over the slice in a bounded worker pool, preserving input order.
fn run_indexed<I: Sync, O: Send>(items: &[I], f: impl Fn(&I) -> O + Sync) -> Vec<O> {
    let workers = std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
        .min(8)
        .max(1);
    let mut out: Vec<Option<O>> = Vec::with_capacity(items.len());
    out.resize_with(items.len(), || None);
    let slots: Vec<(usize, &I)> = items.iter().enumerate().collect();
    std::thread::scope(|scope| {
        let chunk = slots.len().div_ceil(workers);
        let mut remaining: &mut [Option<O>] = &mut out;
        let mut handles = Vec::new();
        for piece in slots.chunks(chunk.max(1)) {
            let (head, tail) = remaining.split_at_mut(piece.len());
            remaining = tail;
            let f = &f;
            handles.push(scope.spawn(move || {
                for ((_, item), slot) in piece.iter().zip(head.iter_mut()) {
                    *slot = Some(f(item));
                }
            }));
        }
        for h in handles {
            h.join().expect("sweep worker panicked");
        }
    });
    out.into_iter().map(|o| o.expect("all slots filled")).collect()
}

/// Renders sweep rows as RFC-4180 CSV (CRLF line endings, '.' decimal,
/// header row); the Poisson column is empty outside the pessimistic case.
pub fn sweep_to_csv<T: Real>(rows: &[SweepRow<T>]) -> String {
    let mut out = String::from("mu,W_KG,W_MDD,W_IPD_or_DPD,W_noinfo,W_concavified\r\n");
    for row in rows {
        let poisson = row
            .w_poisson
            .map(|v| format!("{v}"))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\r\n",
            row.mu, row.w_kg, row.w_mdd, poisson, row.w_noinfo, row.w_concavified
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Stop;
    use crate::policies::StopDist;
    use crate::testutil::{set_a, set_a_patient, set_b, set_b_patient, TestRng};
    use crate::thresholds::{mu_bar, mu_hat, mu_tilde};

    #[test]
    fn kg_values_set_a() {
        let env = set_a();
        let (w, v) = policy_values(&env, &Policy::Kg).unwrap();
        // W^KG = mu w(H) + mu (1-mu_bar)/mu_bar w(L) = 1/3 + 1/6
        assert!((w - 0.5).abs() < 1e-12);
        assert!(v.abs() < 1e-12, "binding IR");
        assert!((kg_value_closed_form(&env) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mdd_value_set_a() {
        let env = set_a();
        let (w, v) = policy_values(&env, &Policy::Mdd).unwrap();
        // W^MDD = mu w(H) + (1-mu)(1 - C1^{(r_p+l)/(r+l)}) w(L); C1 = 1/2
        let expected = 0.2 * (2.0 / 1.2)
            + 0.8 * (1.0 - 0.5f64.powf(1.2 / 1.1)) * (0.5 / 1.2);
        assert!((w - expected).abs() < 1e-12);
        assert!((w - 0.5101781815563823).abs() < 1e-10);
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn ifd_values_are_high_branch_only() {
        let env = set_a();
        let (w, v) = policy_values(&env, &Policy::Ifd).unwrap();
        assert!((w - 0.2 * (2.0 / 1.2)).abs() < 1e-14);
        assert!((v - 0.2 * env.agent_value_complete(Quality::High)).abs() < 1e-14);
    }

    #[test]
    fn all_mass_at_zero_is_worthless() {
        let env = set_a();
        let sched = ShirkSchedule {
            alpha: StopDist::degenerate(Stop::At(0.0)),
            beta: StopDist::degenerate(Stop::At(0.0)),
        };
        assert_eq!(values(&env, &sched), (0.0, 0.0));
    }

    #[test]
    fn ipd_binding_ir_set_b() {
        let env = set_b(0.1);
        let (_, v) = policy_values(&env, &Policy::Ipd).unwrap();
        assert!(v.abs() < 1e-12);
        // MDD also binds below mu_hat
        let (_, v) = policy_values(&env, &Policy::Mdd).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn concavify_fixes_nothing_on_concave_input() {
        let pts: Vec<(f64, f64)> = (0..50).map(|i| {
            let x = i as f64 / 49.0;
            (x, 1.0 - (x - 0.4) * (x - 0.4))
        }).collect();
        let curve = ValueCurve::new("concave", pts.clone()).unwrap();
        let hull = concavify(&curve);
        for (orig, hulled) in pts.iter().zip(hull.points()) {
            assert!((orig.1 - hulled.1).abs() < 1e-12);
        }
    }

    #[test]
    fn concavified_no_info_reproduces_kg_closed_form() {
        let env = set_a();
        let bar = mu_bar(&env);
        // grid that contains mu_bar exactly so the hull can touch the kink
        let mut mus: Vec<f64> = (1..200).map(|i| i as f64 / 200.0).collect();
        mus.push(bar);
        mus.sort_by(f64::total_cmp);
        mus.dedup();
        let curve = no_info_curve(&env, &mus);
        let hull = concavify(&curve);
        for &(mu, hull_val) in hull.points() {
            if mu <= 0.0 || mu >= 1.0 {
                continue;
            }
            let at = env.with_prior(mu).unwrap();
            assert!(
                (hull_val - kg_value_closed_form(&at)).abs() < 1e-10,
                "hull {hull_val} vs closed form at mu={mu}"
            );
        }
    }

    #[test]
    fn pessimistic_hull_is_a_tangent_chord_from_origin() {
        let env = set_b(0.5);
        let mus: Vec<f64> = (1..2000).map(|i| i as f64 / 2000.0).collect();
        let curve = no_info_curve(&env, &mus);
        let hull = concavify(&curve);
        // fine-grid tangency search: the target belief maximizes W(m)/m
        let (mut mu_star, mut best_slope) = (0.0, f64::NEG_INFINITY);
        for &(m, w) in curve.points().iter().skip(1) {
            if m > 0.0 && w / m > best_slope {
                best_slope = w / m;
                mu_star = m;
            }
        }
        let hat = mu_hat(&env);
        assert!(mu_star > hat && mu_star < 1.0, "tangency interior to (mu_hat, 1)");
        // below the target the hull is the chord through the origin
        for &(m, h) in hull.points() {
            if m > 0.0 && m < mu_star {
                assert!((h - best_slope * m).abs() < 1e-9, "chord mismatch at {m}");
            }
        }
        // above it the hull hugs the curve wherever the curve is concave
        let w_at_star = curve.eval(mu_star);
        assert!((hull.eval(mu_star) - w_at_star).abs() < 1e-9);
    }

    #[test]
    fn jensen_risk_attitudes_on_random_lotteries() {
        let env = set_a();
        let mut rng = TestRng::new(7);
        for _ in 0..100 {
            let t1 = rng.range(0.0, 5.0);
            let t2 = rng.range(0.0, 5.0);
            let p = rng.uniform();
            let mean_t = p * t1 + (1.0 - p) * t2;
            let e_w = p * env.principal_value(Stop::At(t1), Quality::Low)
                + (1.0 - p) * env.principal_value(Stop::At(t2), Quality::Low);
            let e_v = p * env.agent_value(Stop::At(t1), Quality::Low)
                + (1.0 - p) * env.agent_value(Stop::At(t2), Quality::Low);
            assert!(e_w <= env.principal_value(Stop::At(mean_t), Quality::Low) + 1e-12);
            assert!(e_v >= env.agent_value(Stop::At(mean_t), Quality::Low) - 1e-12);
        }
    }

    #[test]
    fn dd_beats_kg_for_some_prior_iff_impatient() {
        let t = 0.3;
        for (env, expect_gain) in [(set_a(), true), (set_a_patient(), false)] {
            let lo = mu_tilde(&env, t);
            let hi = mu_bar(&env);
            let mut found = false;
            for i in 0..=400 {
                let mu = lo + (hi - lo) * i as f64 / 401.0;
                if mu <= 0.0 {
                    continue;
                }
                let at = env.with_prior(mu).unwrap();
                let w_dd = policy_values(&at, &Policy::Dd { t }).unwrap().0;
                if w_dd > kg_value_closed_form(&at) + 1e-12 {
                    found = true;
                    break;
                }
            }
            assert_eq!(found, expect_gain, "r_p > r iff DD(t) can beat KG");
        }
    }

    #[test]
    fn regime_flip_of_mdd_versus_kg() {
        for (env, mdd_wins) in [(set_a(), true), (set_a_patient(), false)] {
            let bar = mu_bar(&env);
            for i in 1..200 {
                let mu = bar * i as f64 / 200.0;
                let at = env.with_prior(mu).unwrap();
                let w_mdd = policy_values(&at, &Policy::Mdd).unwrap().0;
                let w_kg = kg_value_closed_form(&at);
                if mdd_wins {
                    assert!(w_mdd > w_kg, "W_MDD must dominate at mu={mu}");
                } else {
                    assert!(w_mdd < w_kg, "W_KG must dominate at mu={mu}");
                }
            }
        }
    }

    #[test]
    fn sweep_rows_are_consistent() {
        let env = set_b_patient(0.3);
        let rows = sweep_principal_values(&env, 101);
        assert_eq!(rows.len(), 101);
        for row in &rows {
            assert!(row.w_concavified >= row.w_noinfo - 1e-10);
            let poisson = row.w_poisson.expect("pessimistic sweep");
            // Prop-4 comparison: the Poisson policy dominates static KG
            assert!(
                poisson >= row.w_kg - 1e-9,
                "IPD/DPD must dominate KG at mu={}",
                row.mu
            );
        }
        // stationary sweep leaves the Poisson column empty
        let rows = sweep_principal_values(&set_a(), 21);
        assert!(rows.iter().all(|r| r.w_poisson.is_none()));
    }

    #[test]
    fn csv_has_rfc4180_line_endings_and_header() {
        let rows = sweep_principal_values(&set_a(), 5);
        let csv = sweep_to_csv(&rows);
        assert!(csv.starts_with("mu,W_KG,W_MDD,W_IPD_or_DPD,W_noinfo,W_concavified\r\n"));
        assert_eq!(csv.matches("\r\n").count(), 6);
        // stationary: empty Poisson field between two commas
        assert!(csv.lines().nth(1).unwrap().contains(",,"));
    }

    #[test]
    fn curve_rejects_non_increasing_x() {
        assert!(ValueCurve::new("bad", vec![(0.0, 0.0), (0.0, 1.0)]).is_err());
        assert!(ValueCurve::new("bad", vec![(1.0, 0.0), (0.5, 1.0)]).is_err());
        assert!(ValueCurve::new("short", vec![(0.0, 0.0)]).is_err());
    }
}
