//! Continuous quality distributions and gradual cutoff-disclosure policies.
//!
//! Quality is drawn from a continuous law `F` with `E[v(q)] < 0` in a
//! stationary environment. Policies are cutoff disclosures: at each instant
//! the agent learns whether `q` is above a nondecreasing cutoff `q~(s)`, so
//! the induced shirk time is the inverse of the cutoff path. The disclosure
//! order of irrational qualities is indexed by the loss/gain ratio
//! `u(q) = [-v(q)] / w(q)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Stop;
use crate::numeric::{bisect, geometric_grid, integrate_split, NumericError};
use crate::scalar::{real, Real};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenqError {
    #[error("quality law invalid: {reason}")]
    InvalidLaw { reason: &'static str },
    #[error("rates must be positive finite (r, r_p, lambda, c)")]
    InvalidRates,
    #[error("quality law must satisfy E[v(q)] < 0 (got {mean_v}); no persuasion is needed otherwise")]
    MeanValueNotNegative { mean_v: f64 },
    #[error("law support must extend beyond q_bar = c/lambda")]
    SupportBelowQBar,
    #[error("u-ratio is infinite at q = {q}: w vanishes there (pick a bonus with b(0) > 0)")]
    InfiniteRatio { q: f64 },
    #[error("bonus ratio condition failed: [-v(q)]/w(q) must be decreasing below q_bar")]
    BonusRatioViolation,
    #[error("gradual disclosure requires an impatient principal (r_p > r)")]
    RequiresImpatience,
    #[error("IGD(0) is individually rational here; the maximum-delay branch applies")]
    InitialGradualIsRational,
    #[error("IGD(0) is not individually rational here; the optimal-initial-cutoff branch applies")]
    InitialGradualNotRational,
    #[error("cutoff schedule must be nondecreasing with values in [0, q_bar]")]
    InvalidCutoff,
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

/// Prior law of the task quality on `[0, infinity)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityLaw<T> {
    Uniform { lo: T, hi: T },
    Exponential { rate: T },
    /// Log-normal truncated (and renormalized) to `[0, hi]`.
    TruncatedLogNormal { location: T, scale: T, hi: T },
    /// Piecewise-linear density through `(q, f(q))` points; renormalized.
    Tabulated { points: Vec<(T, T)> },
}

impl<T: Real> QualityLaw<T> {
    fn validate(&self) -> Result<(), GenqError> {
        let bad = |reason| Err(GenqError::InvalidLaw { reason });
        match self {
            QualityLaw::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && *lo >= T::zero() && lo < hi) {
                    return bad("uniform needs 0 <= lo < hi");
                }
            }
            QualityLaw::Exponential { rate } => {
                if !(rate.is_finite() && *rate > T::zero()) {
                    return bad("exponential needs rate > 0");
                }
            }
            QualityLaw::TruncatedLogNormal { location, scale, hi } => {
                if !(location.is_finite()
                    && scale.is_finite()
                    && *scale > T::zero()
                    && hi.is_finite()
                    && *hi > T::zero())
                {
                    return bad("lognormal needs finite location, scale > 0, hi > 0");
                }
            }
            QualityLaw::Tabulated { points } => {
                if points.len() < 2 {
                    return bad("tabulated law needs at least two points");
                }
                for pair in points.windows(2) {
                    if !(pair[0].0 < pair[1].0) {
                        return bad("tabulated law needs strictly increasing q");
                    }
                }
                if points
                    .iter()
                    .any(|&(q, f)| !q.is_finite() || !f.is_finite() || q < T::zero() || f < T::zero())
                {
                    return bad("tabulated law needs finite q >= 0 and density >= 0");
                }
            }
        }
        Ok(())
    }

    fn support(&self) -> (T, T) {
        match self {
            QualityLaw::Uniform { lo, hi } => (*lo, *hi),
            // beyond 60 mean-lifetimes the residual mass is ~1e-26
            QualityLaw::Exponential { rate } => (T::zero(), real::<T>(60.0) / *rate),
            QualityLaw::TruncatedLogNormal { hi, .. } => (T::zero(), *hi),
            QualityLaw::Tabulated { points } => (points[0].0, points[points.len() - 1].0),
        }
    }

    /// Unnormalized density; [`Model::new`] divides by the total mass.
    fn raw_density(&self, q: T) -> T {
        let (lo, hi) = self.support();
        if q < lo || q > hi {
            return T::zero();
        }
        match self {
            QualityLaw::Uniform { lo, hi } => T::one() / (*hi - *lo),
            QualityLaw::Exponential { rate } => *rate * (-*rate * q).exp(),
            QualityLaw::TruncatedLogNormal { location, scale, .. } => {
                if q <= T::zero() {
                    return T::zero();
                }
                let z = (q.ln() - *location) / *scale;
                (-z * z / real(2.0)).exp() / (q * *scale * real(2.5066282746310002))
            }
            QualityLaw::Tabulated { points } => {
                let mut i = 0;
                while i + 2 < points.len() && points[i + 1].0 <= q {
                    i += 1;
                }
                let (q0, f0) = points[i];
                let (q1, f1) = points[i + 1];
                f0 + (f1 - f0) * (q - q0) / (q1 - q0)
            }
        }
    }

    /// Interior density kinks (integration split points).
    fn kinks(&self) -> Vec<T> {
        match self {
            QualityLaw::Tabulated { points } => points.iter().map(|&(q, _)| q).collect(),
            _ => Vec::new(),
        }
    }
}

/// Principal bonus as a function of quality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bonus<T> {
    /// `b(q) = value` (constant bonus, value > 0).
    Constant { value: T },
    /// `b(q) = q` (principal and agent share the reward scale).
    Quality,
}

impl<T: Real> Bonus<T> {
    fn eval(&self, q: T) -> T {
        match self {
            Bonus::Constant { value } => *value,
            Bonus::Quality => q,
        }
    }
}

/// Quadrature tolerance for all law integrals.
const QUAD_TOL: f64 = 1e-10;
/// Bisection tolerances: quality arguments and time arguments.
const Q_TOL: f64 = 1e-10;
const T_TOL: f64 = 1e-9;

/// Stationary continuous-quality model: rates, law and bonus, with the
/// break-even quality, the static cutoff and `C3` cached.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    r: T,
    r_p: T,
    lambda: T,
    c: T,
    law: QualityLaw<T>,
    bonus: Bonus<T>,
    mass: T,
    q_bar: T,
    q_star: T,
    c3: T,
}

impl<T: Real> Model<T> {
    pub fn new(
        r: T,
        r_p: T,
        lambda: T,
        c: T,
        law: QualityLaw<T>,
        bonus: Bonus<T>,
    ) -> Result<Self, GenqError> {
        for x in [r, r_p, lambda, c] {
            if !(x.is_finite() && x > T::zero()) {
                return Err(GenqError::InvalidRates);
            }
        }
        if let Bonus::Constant { value } = bonus {
            if !(value.is_finite() && value > T::zero()) {
                return Err(GenqError::InvalidLaw {
                    reason: "constant bonus must be positive",
                });
            }
        }
        law.validate()?;
        let q_bar = c / lambda;
        let (_, hi) = law.support();
        if hi <= q_bar {
            return Err(GenqError::SupportBelowQBar);
        }
        let mut model = Model {
            r,
            r_p,
            lambda,
            c,
            law,
            bonus,
            mass: T::one(),
            q_bar,
            q_star: T::zero(),
            c3: T::zero(),
        };
        model.mass = model.integrate(|_| T::one(), None)?;
        if !(model.mass > T::zero()) {
            return Err(GenqError::InvalidLaw {
                reason: "law has zero total mass",
            });
        }
        let mean_v = model.integrate(|q| model.v(q), None)?;
        if !(mean_v < T::zero()) {
            return Err(GenqError::MeanValueNotNegative {
                mean_v: mean_v.to_f64().unwrap_or(f64::NAN),
            });
        }
        model.c3 = -mean_v;
        model.q_star = model.solve_q_star()?;
        model.check_ratio_condition()?;
        Ok(model)
    }

    pub fn r(&self) -> T {
        self.r
    }
    pub fn r_p(&self) -> T {
        self.r_p
    }
    pub fn lambda(&self) -> T {
        self.lambda
    }
    pub fn c(&self) -> T {
        self.c
    }
    pub fn law(&self) -> &QualityLaw<T> {
        &self.law
    }

    /// `v(q) = (lambda q - c)/(r + lambda)`.
    pub fn v(&self, q: T) -> T {
        (self.lambda * q - self.c) / (self.r + self.lambda)
    }

    /// `v(tau, q)`.
    pub fn v_at(&self, tau: Stop<T>, q: T) -> T {
        match tau {
            Stop::Never => self.v(q),
            Stop::At(t) => (T::one() - (-(self.r + self.lambda) * t).exp()) * self.v(q),
        }
    }

    /// `w(q) = lambda b(q)/(r_p + lambda)`.
    pub fn w(&self, q: T) -> T {
        self.lambda * self.bonus.eval(q) / (self.r_p + self.lambda)
    }

    /// Break-even quality `q_bar = c / lambda` (where `v` crosses zero).
    pub fn q_bar(&self) -> T {
        self.q_bar
    }

    /// Static cutoff: the unique root of the tail value
    /// `∫_{q*}^∞ v dF = 0`, strictly inside `(0, q_bar)`.
    pub fn q_star(&self) -> T {
        self.q_star
    }

    /// `C3 = -E[v] > 0`.
    pub fn c3(&self) -> T {
        self.c3
    }

    /// Time horizon for delay searches.
    pub fn t_max(&self) -> T {
        real::<T>(100.0) / (self.r + self.lambda)
    }

    /// `∫ g(q) dF(q)` over the support, split at density kinks, `q_bar`,
    /// `q_star` and any extra points supplied.
    pub fn integrate(
        &self,
        g: impl Fn(T) -> T,
        extra_kinks: Option<&[T]>,
    ) -> Result<T, GenqError> {
        let (lo, hi) = self.law.support();
        let mut kinks = self.law.kinks();
        kinks.push(self.q_bar);
        kinks.push(self.q_star);
        if let Some(extra) = extra_kinks {
            kinks.extend_from_slice(extra);
        }
        let f = |q: T| g(q) * self.law.raw_density(q) / self.mass;
        Ok(integrate_split(&f, lo, hi, &kinks, real(QUAD_TOL))?)
    }

    fn solve_q_star(&self) -> Result<T, GenqError> {
        let tail = |q: T| -> T {
            let f = |x: T| self.v(x) * self.law.raw_density(x) / self.mass;
            let (_, hi) = self.law.support();
            let mut kinks = self.law.kinks();
            kinks.push(self.q_bar);
            integrate_split(&f, q, hi, &kinks, real(QUAD_TOL)).expect("tail integral")
        };
        Ok(bisect(tail, T::zero(), self.q_bar, real(Q_TOL))?)
    }

    /// `u(q) = [-v(q)] / w(q)` on `[0, q_bar]`; infinite when `w(q) = 0`.
    pub fn u_ratio(&self, q: T) -> Result<T, GenqError> {
        let w = self.w(q);
        if w <= T::zero() {
            return Err(GenqError::InfiniteRatio {
                q: q.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(-self.v(q) / w)
    }

    /// Inverse of the strictly decreasing `u` on `[0, q_bar]`; clamps to the
    /// endpoints outside the range.
    pub fn u_inverse(&self, x: T) -> T {
        if x <= T::zero() {
            return self.q_bar;
        }
        match self.u_ratio(T::zero()) {
            Ok(u0) if x >= u0 => return T::zero(),
            _ => {}
        }
        let lo = self.q_bar * real::<T>(1e-14);
        if let Ok(u_lo) = self.u_ratio(lo) {
            if x >= u_lo {
                return T::zero();
            }
        }
        bisect(
            |q| self.u_ratio(q).unwrap_or(T::infinity()) - x,
            lo,
            self.q_bar,
            real(Q_TOL),
        )
        .unwrap_or(self.q_bar)
    }

    fn check_ratio_condition(&self) -> Result<(), GenqError> {
        let n = 256;
        let mut prev = T::infinity();
        for i in 1..n {
            let q = self.q_bar * real::<T>(i as f64 / n as f64);
            let u = self.u_ratio(q)?;
            if u > prev + real(1e-12) {
                return Err(GenqError::BonusRatioViolation);
            }
            prev = u;
        }
        Ok(())
    }
}

/// Cutoff-quality path `q~(s)`: nondecreasing into `[0, q_bar]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum CutoffSchedule<T> {
    /// Constant cutoff (the static policy; `q0 = q_star` is KG).
    Constant { q0: T },
    /// Initial cutoff `q0`, then gradual disclosure: the cutoff rises so the
    /// discounted loss/gain ratio decays at rate `r_p - r`.
    InitialGradual { q0: T },
    /// No disclosure before `delay`, then gradual disclosure from cutoff 0.
    DelayedGradual { delay: T },
    /// Piecewise-linear cutoff through `(s, q)` points (constant outside).
    Tabulated { points: Vec<(T, T)> },
}

impl<T: Real> CutoffSchedule<T> {
    /// Cutoff quality at time `s`.
    pub fn cutoff_at(&self, model: &Model<T>, s: T) -> Result<T, GenqError> {
        match self {
            CutoffSchedule::Constant { q0 } => Ok(*q0),
            CutoffSchedule::InitialGradual { q0 } => {
                require_impatient(model)?;
                let u0 = model.u_ratio(*q0)?;
                Ok(model.u_inverse(u0 * (-(model.r_p - model.r) * s).exp()))
            }
            CutoffSchedule::DelayedGradual { delay } => {
                require_impatient(model)?;
                if s < *delay {
                    return Ok(T::zero());
                }
                let u0 = model.u_ratio(T::zero())?;
                Ok(model.u_inverse(u0 * (-(model.r_p - model.r) * (s - *delay)).exp()))
            }
            CutoffSchedule::Tabulated { points } => {
                if s <= points[0].0 {
                    return Ok(points[0].1);
                }
                let last = points[points.len() - 1];
                if s >= last.0 {
                    return Ok(last.1);
                }
                let i = points.partition_point(|&(t, _)| t <= s) - 1;
                let (s0, q0) = points[i];
                let (s1, q1) = points[i + 1];
                Ok(q0 + (q1 - q0) * (s - s0) / (s1 - s0))
            }
        }
    }

    /// Shirk time induced on quality `q` (the inverse of the cutoff path).
    pub fn stop_time(&self, model: &Model<T>, q: T) -> Result<Stop<T>, GenqError> {
        if q >= model.q_bar() {
            return Ok(Stop::Never);
        }
        match self {
            CutoffSchedule::Constant { q0 } => Ok(if q < *q0 {
                Stop::At(T::zero())
            } else {
                Stop::Never
            }),
            CutoffSchedule::InitialGradual { q0 } => {
                require_impatient(model)?;
                if q < *q0 {
                    return Ok(Stop::At(T::zero()));
                }
                let ratio = model.u_ratio(*q0)? / model.u_ratio(q)?;
                Ok(Stop::At(ratio.ln() / (model.r_p - model.r)))
            }
            CutoffSchedule::DelayedGradual { delay } => {
                require_impatient(model)?;
                let ratio = model.u_ratio(T::zero())? / model.u_ratio(q)?;
                Ok(Stop::At(*delay + ratio.ln() / (model.r_p - model.r)))
            }
            CutoffSchedule::Tabulated { points } => {
                // first time the cutoff strictly exceeds q
                if points[0].1 > q {
                    return Ok(Stop::At(points[0].0));
                }
                for pair in points.windows(2) {
                    let (s0, q0) = pair[0];
                    let (s1, q1) = pair[1];
                    if q1 > q {
                        // linear crossing inside the knot interval
                        let s = if q1 > q0 {
                            s0 + (s1 - s0) * (q - q0) / (q1 - q0)
                        } else {
                            s1
                        };
                        return Ok(Stop::At(s.max(s0)));
                    }
                }
                Ok(Stop::Never)
            }
        }
    }

    /// Quality values where the induced shirk time is kinked.
    fn quality_kinks(&self, model: &Model<T>) -> Vec<T> {
        match self {
            CutoffSchedule::Constant { q0 } => vec![*q0],
            CutoffSchedule::InitialGradual { q0 } => vec![*q0],
            CutoffSchedule::DelayedGradual { .. } => vec![T::zero()],
            CutoffSchedule::Tabulated { points } => {
                let mut ks: Vec<T> = points.iter().map(|&(_, q)| q).collect();
                ks.push(model.q_bar());
                ks
            }
        }
    }

    /// Validates that the cutoff path is nondecreasing into `[0, q_bar]`.
    pub fn validate(&self, model: &Model<T>) -> Result<(), GenqError> {
        let tol: T = real(1e-9);
        match self {
            CutoffSchedule::Tabulated { points } => {
                if points.len() < 2 {
                    return Err(GenqError::InvalidCutoff);
                }
                let mut prev_s = T::neg_infinity();
                let mut prev_q = T::zero() - tol;
                for &(s, q) in points {
                    if !(s.is_finite() && q.is_finite())
                        || s <= prev_s
                        || q < prev_q - tol
                        || q < -tol
                        || q > model.q_bar() + tol
                    {
                        return Err(GenqError::InvalidCutoff);
                    }
                    prev_s = s;
                    prev_q = q;
                }
                Ok(())
            }
            CutoffSchedule::Constant { q0 } | CutoffSchedule::InitialGradual { q0 } => {
                if *q0 >= T::zero() && *q0 <= model.q_bar() + tol {
                    Ok(())
                } else {
                    Err(GenqError::InvalidCutoff)
                }
            }
            CutoffSchedule::DelayedGradual { delay } => {
                if *delay >= T::zero() && delay.is_finite() {
                    Ok(())
                } else {
                    Err(GenqError::InvalidCutoff)
                }
            }
        }
    }
}

fn require_impatient<T: Real>(model: &Model<T>) -> Result<(), GenqError> {
    if model.r_p > model.r {
        Ok(())
    } else {
        Err(GenqError::RequiresImpatience)
    }
}

/// Eq-style shirk time of initial & gradual disclosure with start cutoff
/// `q0`: zero below `q0`, `log(u(q0)/u(q))/(r_p-r)` on `[q0, q_bar)`,
/// never above `q_bar`.
pub fn tau_igd<T: Real>(model: &Model<T>, q0: T, q: T) -> Result<Stop<T>, GenqError> {
    require_impatient(model)?;
    CutoffSchedule::InitialGradual { q0 }.stop_time(model, q)
}

/// Agent's ex-ante value of a cutoff schedule:
/// `∫ v(tau(q), q) dF(q)` (qualities above `q_bar` are finished for sure).
pub fn agent_value<T: Real>(
    model: &Model<T>,
    sched: &CutoffSchedule<T>,
) -> Result<T, GenqError> {
    let kinks = sched.quality_kinks(model);
    let g = |q: T| match sched.stop_time(model, q) {
        Ok(tau) => model.v_at(tau, q),
        Err(_) => T::nan(),
    };
    let value = model.integrate(g, Some(&kinks))?;
    if value.is_nan() {
        return Err(GenqError::RequiresImpatience);
    }
    Ok(value)
}

/// Discounted disclosure weight `P(tau) = ∫_0^{q_bar} e^{-(r_p+lambda)
/// tau(q)} w(q) dF(q)` — the principal's minimization objective.
pub fn disclosure_weight<T: Real>(
    model: &Model<T>,
    sched: &CutoffSchedule<T>,
) -> Result<T, GenqError> {
    let kinks = sched.quality_kinks(model);
    let k = model.r_p + model.lambda;
    let g = |q: T| {
        if q >= model.q_bar() {
            return T::zero();
        }
        match sched.stop_time(model, q) {
            Ok(Stop::At(t)) => (-k * t).exp() * model.w(q),
            Ok(Stop::Never) => T::zero(),
            Err(_) => T::nan(),
        }
    };
    let value = model.integrate(g, Some(&kinks))?;
    if value.is_nan() {
        return Err(GenqError::RequiresImpatience);
    }
    Ok(value)
}

/// Principal's ex-ante value `W(tau) = E[w] - P(tau)`.
pub fn principal_value<T: Real>(
    model: &Model<T>,
    sched: &CutoffSchedule<T>,
) -> Result<T, GenqError> {
    let mean_w = model.integrate(|q| model.w(q), None)?;
    Ok(mean_w - disclosure_weight(model, sched)?)
}

/// Whether IGD(0) is individually rational (a bonus with `w(0) = 0` makes
/// IGD(0) degenerate — it never discloses — hence not rational).
pub fn igd_zero_is_rational<T: Real>(model: &Model<T>) -> Result<bool, GenqError> {
    require_impatient(model)?;
    if model.u_ratio(T::zero()).is_err() {
        return Ok(false);
    }
    Ok(agent_value(model, &CutoffSchedule::InitialGradual { q0: T::zero() })? >= T::zero())
}

/// Optimal initial cutoff `q**`: the root of the agent value of IGD(q0) in
/// `q0` on `(0, q_star)`. Requires `r_p > r` and IGD(0) not rational.
pub fn solve_q_double_star<T: Real>(model: &Model<T>) -> Result<T, GenqError> {
    if igd_zero_is_rational(model)? {
        return Err(GenqError::InitialGradualIsRational);
    }
    let lo = model.q_bar() * real::<T>(1e-12);
    let value = |q0: T| {
        agent_value(model, &CutoffSchedule::InitialGradual { q0 })
            .expect("IGD value inside the bracket")
    };
    if value(lo) >= T::zero() {
        return Ok(lo);
    }
    Ok(bisect(value, lo, model.q_star(), real(Q_TOL))?)
}

/// Maximum delay `t~` of delayed gradual disclosure: the root of the agent
/// value of DGD(t) in `t`. Requires `r_p > r` and IGD(0) rational.
pub fn solve_t_tilde_general<T: Real>(model: &Model<T>) -> Result<T, GenqError> {
    if !igd_zero_is_rational(model)? {
        return Err(GenqError::InitialGradualNotRational);
    }
    let value = |t: T| {
        agent_value(model, &CutoffSchedule::DelayedGradual { delay: t })
            .expect("DGD value inside the bracket")
    };
    if value(T::zero()) <= T::zero() {
        return Ok(T::zero());
    }
    Ok(bisect(value, T::zero(), model.t_max(), real(T_TOL))?)
}

/// Which cutoff family is optimal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffLabel {
    Static,
    OptimalInitialGradual,
    MaximumDelayedGradual,
}

/// Optimal cutoff policy: static KG for a patient principal; for an
/// impatient one, OIGD when IGD(0) is not individually rational, MDGD when
/// it is.
pub fn optimal_cutoff<T: Real>(
    model: &Model<T>,
) -> Result<(CutoffLabel, CutoffSchedule<T>), GenqError> {
    if model.r_p <= model.r {
        return Ok((
            CutoffLabel::Static,
            CutoffSchedule::Constant { q0: model.q_star() },
        ));
    }
    if igd_zero_is_rational(model)? {
        let delay = solve_t_tilde_general(model)?;
        Ok((
            CutoffLabel::MaximumDelayedGradual,
            CutoffSchedule::DelayedGradual { delay },
        ))
    } else {
        let q0 = solve_q_double_star(model)?;
        Ok((
            CutoffLabel::OptimalInitialGradual,
            CutoffSchedule::InitialGradual { q0 },
        ))
    }
}

/// Obedience report for a cutoff schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffReport<T> {
    pub min_h: T,
    pub argmin_time: T,
    pub agent_value: T,
    pub pass: bool,
}

/// Constructive obedience check: `h(s) = ∫_{q~(s)}^∞ v(tau(q)-s, q) dF(q)`
/// must stay nonnegative on a time grid (individual rationality is `h(0)`).
pub fn cutoff_obedience<T: Real>(
    model: &Model<T>,
    sched: &CutoffSchedule<T>,
) -> Result<CutoffReport<T>, GenqError> {
    sched.validate(model)?;
    let mut grid = vec![T::zero()];
    grid.extend(geometric_grid(model.t_max(), 256));
    if let CutoffSchedule::Tabulated { points } = sched {
        grid.extend(points.iter().map(|&(s, _)| s));
    }
    if let CutoffSchedule::DelayedGradual { delay } = sched {
        grid.push(*delay);
    }
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite grid"));
    grid.dedup();

    let kinks = sched.quality_kinks(model);
    let mut min_h = T::infinity();
    let mut argmin = T::zero();
    for &s in &grid {
        let cutoff = sched.cutoff_at(model, s)?;
        let g = |q: T| {
            if q < cutoff {
                return T::zero();
            }
            match sched.stop_time(model, q) {
                Ok(Stop::Never) => model.v(q),
                Ok(Stop::At(t)) => model.v_at(Stop::At((t - s).max(T::zero())), q),
                Err(_) => T::nan(),
            }
        };
        // the integrand jumps at the current cutoff
        let mut split = kinks.clone();
        split.push(cutoff);
        let h = model.integrate(g, Some(&split))?;
        if h.is_nan() {
            return Err(GenqError::RequiresImpatience);
        }
        if h < min_h {
            min_h = h;
            argmin = s;
        }
    }
    let value = agent_value(model, sched)?;
    let tol: T = real(crate::agent::OBEDIENCE_TOL);
    Ok(CutoffReport {
        min_h,
        argmin_time: argmin,
        agent_value: value,
        pass: min_h >= -tol && value >= -tol,
    })
}

/// Both solution routes of the principal's reduced program.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProgramB<T> {
    /// Direct quality-grid discretization with per-point shirk times from
    /// the closed-form structure (binding the IR constraint by bisection).
    pub direct: T,
    /// Reduced three-constant program: left edge of the feasible region,
    /// evaluated with adaptive quadrature.
    pub reduced: T,
    /// Optimal initial threshold (`y*`): `q**` in the OIGD branch, 0 in the
    /// MDGD branch, `q_star` for a patient principal.
    pub optimal_y: T,
}

/// Exponents of the reduced program.
fn theta<T: Real>(model: &Model<T>) -> T {
    (model.r_p + model.lambda) / (model.r + model.lambda)
}

/// `z2(y) = ∫_y^{q_bar} [-v]^{(r_p+lambda)/(r_p-r)} w^{-(r+lambda)/(r_p-r)} dF`.
fn z2_of<T: Real>(model: &Model<T>, y: T) -> Result<T, GenqError> {
    let p = (model.r_p + model.lambda) / (model.r_p - model.r);
    let m = (model.r + model.lambda) / (model.r_p - model.r);
    let (_, hi) = model.law().support();
    let _ = hi;
    let g = |q: T| {
        if q < y || q >= model.q_bar() {
            T::zero()
        } else {
            (-model.v(q)).powf(p) * model.w(q).powf(-m)
        }
    };
    model.integrate(g, Some(&[y]))
}

/// `∫_0^y [-v] dF`.
fn loss_below<T: Real>(model: &Model<T>, y: T) -> Result<T, GenqError> {
    let g = |q: T| {
        if q < y && q < model.q_bar() {
            -model.v(q)
        } else {
            T::zero()
        }
    };
    model.integrate(g, Some(&[y]))
}

/// `∫_0^y w dF`.
fn gain_below<T: Real>(model: &Model<T>, y: T) -> Result<T, GenqError> {
    let g = |q: T| if q < y { model.w(q) } else { T::zero() };
    model.integrate(g, Some(&[y]))
}

/// Reduced objective `h2(y)` with the IR constraint binding.
pub fn reduced_objective<T: Real>(model: &Model<T>, y: T) -> Result<T, GenqError> {
    require_impatient(model)?;
    let z1 = model.c3() - loss_below(model, y)?;
    let z2 = z2_of(model, y)?;
    let exp2 = (model.r_p - model.r) / (model.r + model.lambda);
    Ok(gain_below(model, y)? + z1.max(T::zero()).powf(theta(model)) * z2.powf(-exp2))
}

/// Feasibility boundary `h1(y) = ∫_0^y [-v] dF + u(y)^{-(r+lambda)/(r_p-r)} z2(y)`.
pub fn feasibility_boundary<T: Real>(model: &Model<T>, y: T) -> Result<T, GenqError> {
    require_impatient(model)?;
    let m = (model.r + model.lambda) / (model.r_p - model.r);
    let u = model.u_ratio(y)?;
    let tail = (-m * u.ln()).exp() * z2_of(model, y)?;
    Ok(loss_below(model, y)? + tail)
}

/// Solves the principal's program both ways; the two routes must agree.
pub fn program_b_oracle<T: Real>(model: &Model<T>, grid_n: usize) -> Result<ProgramB<T>, GenqError> {
    if model.r_p <= model.r {
        // patient principal: bang-bang knapsack ordered by u = [-v]/w
        let direct = knapsack_direct(model, grid_n)?;
        let reduced = gain_below(model, model.q_star())?;
        return Ok(ProgramB {
            direct,
            reduced,
            optimal_y: model.q_star(),
        });
    }
    let direct = kappa_direct(model, grid_n)?;
    // the reduced objective is nondecreasing on the feasible set, so the
    // optimum sits at the left edge of feasibility
    let y_star = if model.u_ratio(T::zero()).is_err()
        || feasibility_boundary(model, T::zero())? < model.c3()
    {
        let lo = model.q_bar() * real::<T>(1e-9);
        let hi = model.q_bar() * (T::one() - real::<T>(1e-9));
        bisect(
            |y| {
                feasibility_boundary(model, y).expect("feasibility inside bracket") - model.c3()
            },
            lo,
            hi,
            real(Q_TOL),
        )?
    } else {
        T::zero()
    };
    let reduced = reduced_objective(model, y_star)?;
    Ok(ProgramB {
        direct,
        reduced,
        optimal_y: y_star,
    })
}

/// Patient-principal direct route: choose which qualities to sacrifice
/// (stop at once) in decreasing order of `u` until the IR budget is met.
/// With `u` decreasing in `q` this fills from the bottom, so the objective
/// is the gain below the budget-exhausting threshold.
fn knapsack_direct<T: Real>(model: &Model<T>, grid_n: usize) -> Result<T, GenqError> {
    let nodes = mid_grid(model, grid_n);
    let mut budget = model.c3();
    let mut objective = T::zero();
    for &(q, df) in &nodes {
        if q >= model.q_bar() {
            break;
        }
        let loss = -model.v(q) * df;
        if loss <= T::zero() {
            continue;
        }
        let take = (budget / loss).min(T::one());
        objective = objective + take * model.w(q) * df;
        budget = budget - take * loss;
        if budget <= T::zero() {
            break;
        }
    }
    Ok(objective)
}

/// Impatient-principal direct route: per-point shirk times
/// `tau(q) = max(0, kappa - log(u(q))/(r_p-r))`, with the scalar `kappa`
/// bisected until the IR constraint binds; everything on a midpoint grid.
fn kappa_direct<T: Real>(model: &Model<T>, grid_n: usize) -> Result<T, GenqError> {
    let a = T::one() / (model.r_p - model.r);
    let k_agent = model.r + model.lambda;
    let k_principal = model.r_p + model.lambda;
    let nodes: Vec<(T, T, T)> = mid_grid(model, grid_n)
        .into_iter()
        .filter(|&(q, _)| q < model.q_bar())
        .map(|(q, df)| {
            let u = (-model.v(q)) / model.w(q).max(real(1e-300));
            (q, df, u.ln())
        })
        .collect();
    let constraint = |kappa: T| -> T {
        let mut total = T::zero();
        for &(q, df, ln_u) in &nodes {
            let tau = (kappa - a * ln_u).max(T::zero());
            total = total + (-k_agent * tau).exp() * (-model.v(q)) * df;
        }
        total - model.c3()
    };
    // kappa low enough that all tau are clamped to zero, high enough that
    // the constraint is violated
    let mut lo = nodes
        .iter()
        .map(|&(_, _, ln_u)| a * ln_u)
        .fold(T::infinity(), |acc, x| acc.min(x))
        - T::one();
    let mut hi = lo + T::one();
    while constraint(hi) > T::zero() {
        hi = hi + (hi - lo);
        if !(hi < real(1e6)) {
            break;
        }
    }
    if constraint(lo) < T::zero() {
        // even immediate full disclosure cannot meet the budget on this grid
        lo = lo - T::one();
    }
    let kappa = bisect(constraint, lo, hi, real(1e-12))?;
    let mut objective = T::zero();
    for &(q, df, ln_u) in &nodes {
        let tau = (kappa - a * ln_u).max(T::zero());
        objective = objective + (-k_principal * tau).exp() * model.w(q) * df;
    }
    Ok(objective)
}

/// Midpoint grid `(q_i, dF_i)` over the support.
fn mid_grid<T: Real>(model: &Model<T>, n: usize) -> Vec<(T, T)> {
    let (lo, hi) = model.law().support();
    let step = (hi - lo) / real(n as f64);
    (0..n)
        .map(|i| {
            let q = lo + step * (real::<T>(i as f64) + real(0.5));
            (q, model.law().raw_density(q) / model.mass * step)
        })
        .collect()
}

/// Cutoff curves for the worked figures, as CSV: the static cutoff, the
/// maximal one-shot delayed cutoff, the best initial-gradual schedule and
/// the delayed-gradual schedule.
pub fn cutoff_curves_csv<T: Real>(model: &Model<T>, n_s: usize) -> Result<String, GenqError> {
    require_impatient(model)?;
    let igd0_rational = igd_zero_is_rational(model)?;
    let igd = if igd0_rational {
        CutoffSchedule::InitialGradual { q0: T::zero() }
    } else {
        CutoffSchedule::InitialGradual {
            q0: solve_q_double_star(model)?,
        }
    };
    let dgd = if igd0_rational {
        CutoffSchedule::DelayedGradual {
            delay: solve_t_tilde_general(model)?,
        }
    } else {
        CutoffSchedule::DelayedGradual { delay: T::zero() }
    };
    // maximal one-shot delay: the break-even delay of "disclose whether the
    // task is individually rational at time t"
    let loss_all = loss_below(model, model.q_bar())?;
    let t_one = -(model.c3() / loss_all).ln() / (model.r + model.lambda);
    let s_max = model.t_max().min(
        t_one.max(T::one()) * real(4.0),
    );
    let mut out = String::from("s,q_static,q_one_shot,q_igd,q_dgd\r\n");
    for i in 0..=n_s {
        let s = s_max * real::<T>(i as f64 / n_s as f64);
        let q_static = model.q_star();
        let q_one = if s < t_one { T::zero() } else { model.q_bar() };
        let q_igd = igd.cutoff_at(model, s)?;
        let q_dgd = dgd.cutoff_at(model, s)?;
        out.push_str(&format!("{s},{q_static},{q_one},{q_igd},{q_dgd}\r\n"));
    }
    Ok(out)
}
