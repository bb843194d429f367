//! Parameter sweeps checking the error estimates, activity thresholds and
//! Lavrentiev bounds on manufactured instances.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::admissible::{
    classify_with_state, feasibility, feasibility_with_state, slater, AdmissibleSet,
    LavrentievSign, SlaterInfo, EPS_ACT,
};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::manufacture::{add_noise, ManufacturedInstance};
use crate::solver::{solve, solve_from, RegularizedProblem, Solution};

/// CSV header of [`SweepRecord`] tables.
pub const CSV_COLUMNS: [&str; 13] = [
    "alpha",
    "lambda",
    "delta",
    "err_u",
    "err_Su",
    "margin_lo",
    "margin_up",
    "margin_state",
    "n_active_lo",
    "n_active_up",
    "n_active_state",
    "iters",
    "seconds",
];

/// Fits only use points whose error exceeds this multiple of the tolerance.
pub const FIT_FLOOR: f64 = 100.0;
pub const MIN_FIT_POINTS: usize = 4;

/// A manufactured instance together with the unregularized set it was built for.
#[derive(Debug, Clone)]
pub struct Scenario {
    set: AdmissibleSet,
    instance: ManufacturedInstance,
}

impl Scenario {
    pub fn new(set: AdmissibleSet, instance: ManufacturedInstance) -> Result<Self> {
        instance.u_bar.same_grid(&set.grid().zeros())?;
        Ok(Self {
            set: set.unregularized(),
            instance,
        })
    }

    pub fn set(&self) -> &AdmissibleSet {
        &self.set
    }

    pub fn instance(&self) -> &ManufacturedInstance {
        &self.instance
    }

    pub fn problem(&self, alpha: f64) -> Result<RegularizedProblem> {
        RegularizedProblem::new(self.set.clone(), self.instance.y_d.clone(), alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    pub tol: f64,
    /// Fill the `seconds` column with wall time; otherwise it is written as 0.
    pub record_timing: bool,
    pub warm_start: bool,
}

impl ExperimentOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            record_timing: false,
            warm_start: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub alpha: f64,
    pub lambda: f64,
    pub delta: f64,
    /// `‖u − ū‖`
    pub err_u: f64,
    /// `‖Su − y_d‖` against exact data
    pub err_su: f64,
    pub margin_lo: f64,
    pub margin_up: f64,
    pub margin_state: f64,
    pub n_active_lo: usize,
    pub n_active_up: usize,
    pub n_active_state: usize,
    pub iters: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub points: usize,
    /// root mean square of the log residuals
    pub residual: f64,
}

/// An inequality `lhs <= rhs` evaluated at one parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub label: String,
    pub parameter: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
}

impl BoundCheck {
    fn new(label: &str, parameter: f64, lhs: f64, rhs: f64) -> Self {
        Self {
            label: label.to_string(),
            parameter,
            lhs,
            rhs,
            passed: lhs <= rhs,
        }
    }
}

pub fn all_passed(checks: &[BoundCheck]) -> bool {
    checks.iter().all(|c| c.passed)
}

/// Least-squares line through `(ln x, ln y)`; `None` below [`MIN_FIT_POINTS`].
pub fn fit_rate(points: &[(f64, f64)]) -> Option<RateFit> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let (alpha_min, alpha_max) = pts.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), p| {
        (lo.min(p.0.exp()), hi.max(p.0.exp()))
    });
    Some(RateFit {
        slope,
        intercept,
        alpha_min,
        alpha_max,
        points: pts.len(),
        residual,
    })
}

fn fit_records(records: &[SweepRecord], tol: f64) -> Option<RateFit> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.err_u >= FIT_FLOOR * tol)
        .map(|r| (r.alpha, r.err_u))
        .collect();
    fit_rate(&pts)
}

fn record(
    scenario: &Scenario,
    set: &AdmissibleSet,
    sol: &Solution,
    alpha: f64,
    delta: f64,
    seconds: f64,
) -> SweepRecord {
    let inst = &scenario.instance;
    let u = sol.u.values();
    let su = sol.y.values();
    let margins = feasibility_with_state(u, su, set);
    let active = classify_with_state(u, su, set, EPS_ACT);
    SweepRecord {
        alpha,
        lambda: set.lambda(),
        delta,
        err_u: sol.u.distance(&inst.u_bar),
        err_su: sol.y.distance(&inst.y_d),
        margin_lo: margins.lower,
        margin_up: margins.upper,
        margin_state: margins.state,
        n_active_lo: active.lower.len(),
        n_active_up: active.upper.len(),
        n_active_state: active.state.len(),
        iters: sol.iterations,
        seconds,
    }
}

/// Solves, optionally warm-started, and reports elapsed seconds if requested.
fn timed_solve(
    problem: &RegularizedProblem,
    start: Option<&GridFunction>,
    opts: &ExperimentOptions,
) -> Result<(Solution, f64)> {
    let clock = Instant::now();
    let sol = match start {
        Some(u) if opts.warm_start => solve_from(problem, u, opts.tol)?,
        _ => solve(problem, opts.tol)?,
    };
    let secs = if opts.record_timing {
        clock.elapsed().as_secs_f64()
    } else {
        0.0
    };
    Ok((sol, secs))
}

fn check_descending(values: &[f64], name: &str, min_len: usize) -> Result<()> {
    if values.len() < min_len {
        return Err(Error::InvalidParameter(format!(
            "{name} needs at least {min_len} values"
        )));
    }
    if values.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
        return Err(Error::InvalidParameter(format!("{name} must be positive")));
    }
    if values.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter(format!(
            "{name} must be strictly decreasing"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaSweep {
    pub records: Vec<SweepRecord>,
    pub checks: Vec<BoundCheck>,
    pub fit: Option<RateFit>,
    #[serde(skip)]
    pub solutions: Vec<Solution>,
}

/// Solves at each `α` (λ = 0) and checks the a-priori error estimates.
pub fn sweep_alpha(
    scenario: &Scenario,
    alphas: &[f64],
    opts: &ExperimentOptions,
) -> Result<AlphaSweep> {
    check_descending(alphas, "alpha list", MIN_FIT_POINTS)?;
    let inst = &scenario.instance;
    let slack = 10.0 * opts.tol;
    let mut records = Vec::new();
    let mut checks = Vec::new();
    let mut solutions: Vec<Solution> = Vec::new();
    for &alpha in alphas {
        let problem = scenario.problem(alpha)?;
        let (sol, secs) = timed_solve(&problem, solutions.last().map(|s| &s.u), opts)?;
        let r = record(scenario, &scenario.set, &sol, alpha, 0.0, secs);
        let sa = alpha.sqrt();
        checks.push(BoundCheck::new(
            "err_u",
            alpha,
            r.err_u,
            sa * inst.w_norm + inst.residual / sa + slack,
        ));
        checks.push(BoundCheck::new(
            "err_Su",
            alpha,
            r.err_su,
            2.0 * alpha * inst.w_norm + inst.residual + slack,
        ));
        records.push(r);
        solutions.push(sol);
    }
    let fit = fit_records(&records, opts.tol);
    Ok(AlphaSweep {
        records,
        checks,
        fit,
        solutions,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ActivityTransition {
    /// largest listed `α` below which every solution is inactive with margins above `τ/2`
    pub alpha0: f64,
    /// every listed `α` qualifies
    pub never_active: bool,
    pub records: Vec<SweepRecord>,
}

pub fn activity_transition(
    scenario: &Scenario,
    alphas: &[f64],
    tau: f64,
    opts: &ExperimentOptions,
) -> Result<ActivityTransition> {
    check_descending(alphas, "alpha list", 1)?;
    let mut records = Vec::new();
    let mut prev: Option<GridFunction> = None;
    for &alpha in alphas {
        let problem = scenario.problem(alpha)?;
        let (sol, secs) = timed_solve(&problem, prev.as_ref(), opts)?;
        records.push(record(scenario, &scenario.set, &sol, alpha, 0.0, secs));
        prev = Some(sol.u);
    }
    let half = 0.5 * tau;
    let quiet = |r: &SweepRecord| {
        r.n_active_lo + r.n_active_up + r.n_active_state == 0
            && r.margin_lo > half
            && r.margin_up > half
            && r.margin_state > half
    };
    let qualifying = records.iter().rev().take_while(|r| quiet(r)).count();
    if qualifying == 0 {
        return Err(Error::NoTransition {
            alpha: *alphas.last().unwrap(),
        });
    }
    let alpha0 = records[records.len() - qualifying].alpha;
    Ok(ActivityTransition {
        alpha0,
        never_active: qualifying == records.len(),
        records,
    })
}

/// `α(δ) = c δ^s` with `s` in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRule {
    pub c: f64,
    pub s: f64,
}

impl Default for NoiseRule {
    fn default() -> Self {
        Self {
            c: 1.0,
            s: 2.0 / 3.0,
        }
    }
}

impl NoiseRule {
    pub fn new(c: f64, s: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidRule(format!(
                "exponent must lie in (0, 1), got {s}"
            )));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidRule(format!(
                "constant must be positive, got {c}"
            )));
        }
        Ok(Self { c, s })
    }

    pub fn alpha(&self, delta: f64) -> f64 {
        self.c * delta.powf(self.s)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NoiseStudy {
    pub records: Vec<SweepRecord>,
    pub checks: Vec<BoundCheck>,
    /// largest listed `δ` at and below which all constraints are inactive
    pub delta0: Option<f64>,
}

/// Solves with noisy data at `α(δ)` for each `δ`.
pub fn noise_study(
    scenario: &Scenario,
    deltas: &[f64],
    rule: NoiseRule,
    seed: u64,
    opts: &ExperimentOptions,
) -> Result<NoiseStudy> {
    let rule = NoiseRule::new(rule.c, rule.s)?;
    let pairs: Vec<(f64, f64)> = deltas.iter().map(|&d| (d, rule.alpha(d))).collect();
    noise_points(scenario, &pairs, seed, opts)
}

/// Noisy solves at explicit `(δ, α)` pairs.
pub fn noise_points(
    scenario: &Scenario,
    pairs: &[(f64, f64)],
    seed: u64,
    opts: &ExperimentOptions,
) -> Result<NoiseStudy> {
    let inst = &scenario.instance;
    let slack = 10.0 * opts.tol;
    let mut records = Vec::new();
    let mut checks = Vec::new();
    let mut prev: Option<GridFunction> = None;
    for &(delta, alpha) in pairs {
        let noisy = add_noise(&inst.y_d, delta, seed)?;
        let problem = RegularizedProblem::new(scenario.set.clone(), noisy.y_delta, alpha)?;
        let (sol, secs) = timed_solve(&problem, prev.as_ref(), opts)?;
        let r = record(scenario, &scenario.set, &sol, alpha, delta, secs);
        let sa = alpha.sqrt();
        let data_error = delta + inst.residual;
        checks.push(BoundCheck::new(
            "err_u",
            delta,
            r.err_u,
            sa * inst.w_norm + data_error / sa + slack,
        ));
        checks.push(BoundCheck::new(
            "err_Su",
            delta,
            r.err_su,
            2.0 * alpha * inst.w_norm + data_error + slack,
        ));
        records.push(r);
        prev = Some(sol.u);
    }
    let mut by_delta: Vec<&SweepRecord> = records.iter().collect();
    by_delta.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    let delta0 = by_delta
        .iter()
        .take_while(|r| r.n_active_lo + r.n_active_up + r.n_active_state == 0)
        .last()
        .map(|r| r.delta);
    Ok(NoiseStudy {
        records,
        checks,
        delta0,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LavrentievSweep {
    pub alpha: f64,
    pub sign: LavrentievSign,
    pub slater: SlaterInfo,
    pub records: Vec<SweepRecord>,
    /// `‖u_α^0 − u_α^λ‖` per record
    pub errors: Vec<f64>,
    /// `α‖u_α^0 − u_α^λ‖/λ` per record with `λ > 0`
    pub c_values: Vec<f64>,
    pub c_fit: f64,
    /// `max/min` of the `c` values whose error exceeds `10·tol`
    pub c_ratio: Option<f64>,
    /// largest `λ` at and below which `u_α^λ = u_α^0` within `10·tol`
    pub lambda_coincide: Option<f64>,
    pub checks: Vec<BoundCheck>,
}

/// Compares `u_α^λ` with `u_α^0` over `λ` at fixed `α`.
pub fn lavrentiev_sweep(
    scenario: &Scenario,
    alpha: f64,
    lambdas: &[f64],
    sign: LavrentievSign,
    u_hat: &GridFunction,
    opts: &ExperimentOptions,
) -> Result<LavrentievSweep> {
    if lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(Error::InvalidParameter(
            "lambda values must be finite and >= 0".into(),
        ));
    }
    let info = slater(&scenario.set, u_hat)?;
    if sign == LavrentievSign::Plus {
        if let Some(&bad) = lambdas.iter().find(|&&l| l > info.lambda_max) {
            return Err(Error::LambdaExceedsSlaterCap {
                lambda: bad,
                cap: info.lambda_max,
            });
        }
    }
    let slack = 10.0 * opts.tol;
    let base = scenario.problem(alpha)?;
    let (reference, _) = timed_solve(&base, None, opts)?;
    let region = scenario.set.state().region().indices();

    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut checks = Vec::new();
    let mut prev = reference.u.clone();
    for &lambda in lambdas {
        let set = scenario.set.with_lavrentiev(lambda, sign)?;
        let problem = base.with_set(set.clone())?;
        let (sol, secs) = timed_solve(&problem, Some(&prev), opts)?;
        let err = sol.u.distance(&reference.u);
        let unreg = feasibility(&sol.u, &scenario.set)?;
        match sign {
            LavrentievSign::Plus => {
                checks.push(BoundCheck::new(
                    "violation_of_unregularized_set",
                    lambda,
                    -unreg.tau().min(0.0),
                    0.0 + 1e-9,
                ));
                checks.push(BoundCheck::new(
                    "objective_not_below_reference",
                    lambda,
                    reference.objective,
                    sol.objective + slack,
                ));
            }
            LavrentievSign::Minus => {
                let sup = region
                    .iter()
                    .map(|&i| sol.u.values()[i].abs())
                    .fold(0.0, f64::max);
                checks.push(BoundCheck::new(
                    "state_violation",
                    lambda,
                    (-unreg.state).max(0.0),
                    lambda * sup + slack,
                ));
            }
        }
        records.push(record(scenario, &set, &sol, alpha, 0.0, secs));
        errors.push(err);
        prev = sol.u;
    }

    let c_values: Vec<f64> = lambdas
        .iter()
        .zip(&errors)
        .filter(|(l, _)| **l > 0.0)
        .map(|(l, e)| alpha * e / l)
        .collect();
    let c_fit = c_values.iter().copied().fold(0.0, f64::max);
    let significant: Vec<f64> = lambdas
        .iter()
        .zip(&errors)
        .filter(|(l, e)| **l > 0.0 && **e > slack)
        .map(|(l, e)| alpha * e / l)
        .collect();
    let c_ratio = if significant.is_empty() {
        None
    } else {
        let hi = significant.iter().copied().fold(0.0, f64::max);
        let lo = significant.iter().copied().fold(f64::INFINITY, f64::min);
        Some(hi / lo)
    };
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&a, &b| lambdas[a].total_cmp(&lambdas[b]));
    let lambda_coincide = order
        .iter()
        .take_while(|&&k| errors[k] <= slack)
        .last()
        .map(|&k| lambdas[k]);

    Ok(LavrentievSweep {
        alpha,
        sign,
        slater: info,
        records,
        errors,
        c_values,
        c_fit,
        c_ratio,
        lambda_coincide,
        checks,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TotalErrorStudy {
    pub records: Vec<SweepRecord>,
    /// `‖u_α^0 − u_α^λ‖` per record
    pub lavrentiev_errors: Vec<f64>,
    /// `‖ū − u_α^0‖` per record
    pub tikhonov_errors: Vec<f64>,
    pub fit: Option<RateFit>,
    pub checks: Vec<BoundCheck>,
}

/// Solves with `λ = min(λ_cap, α)` per `α` and fits the rate of `‖ū − u_α^λ‖`.
pub fn total_error_study(
    scenario: &Scenario,
    alphas: &[f64],
    lambda_cap: f64,
    sign: LavrentievSign,
    opts: &ExperimentOptions,
) -> Result<TotalErrorStudy> {
    check_descending(alphas, "alpha list", MIN_FIT_POINTS)?;
    if !(lambda_cap >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda cap must be >= 0, got {lambda_cap}"
        )));
    }
    let slack = 10.0 * opts.tol;
    let u_bar = &scenario.instance.u_bar;
    let mut records = Vec::new();
    let mut lav = Vec::new();
    let mut tik = Vec::new();
    let mut checks = Vec::new();
    let mut prev: Option<GridFunction> = None;
    for &alpha in alphas {
        let lambda = lambda_cap.min(alpha);
        let base = scenario.problem(alpha)?;
        let (u0, _) = timed_solve(&base, prev.as_ref(), opts)?;
        let set = scenario.set.with_lavrentiev(lambda, sign)?;
        let (ul, secs) = timed_solve(&base.with_set(set.clone())?, Some(&u0.u), opts)?;
        let r = record(scenario, &set, &ul, alpha, 0.0, secs);
        let e0 = u_bar.distance(&u0.u);
        let el = u0.u.distance(&ul.u);
        checks.push(BoundCheck::new("triangle", alpha, r.err_u, e0 + el + slack));
        records.push(r);
        tik.push(e0);
        lav.push(el);
        prev = Some(ul.u);
    }
    let fit = fit_records(&records, opts.tol);
    Ok(TotalErrorStudy {
        records,
        lavrentiev_errors: lav,
        tikhonov_errors: tik,
        fit,
        checks,
    })
}

/// `‖u_β − u_α‖ <= (|α − β|/β)‖u_α‖ + 20·tol` per pair.
pub fn alpha_continuity_check(
    template: &RegularizedProblem,
    pairs: &[(f64, f64)],
    opts: &ExperimentOptions,
) -> Result<Vec<BoundCheck>> {
    let mut checks = Vec::new();
    for &(alpha, beta) in pairs {
        if !(beta > 0.0) {
            return Err(Error::AlphaNonPositive(beta));
        }
        let (ua, _) = timed_solve(&template.with_alpha(alpha)?, None, opts)?;
        let lhs = if alpha == beta {
            0.0
        } else {
            let (ub, _) = timed_solve(&template.with_alpha(beta)?, Some(&ua.u), opts)?;
            ub.u.distance(&ua.u)
        };
        let rhs = (alpha - beta).abs() / beta * ua.u.norm() + 20.0 * opts.tol;
        checks.push(BoundCheck::new("continuity", alpha, lhs, rhs));
    }
    Ok(checks)
}

fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Writes records as CSV: `.` decimals, 17 significant digits, `\n` line ends.
pub fn write_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let io = |e: csv::Error| Error::Output(e.to_string());
    w.write_record(CSV_COLUMNS).map_err(io)?;
    for r in records {
        w.write_record([
            fmt_float(r.alpha),
            fmt_float(r.lambda),
            fmt_float(r.delta),
            fmt_float(r.err_u),
            fmt_float(r.err_su),
            fmt_float(r.margin_lo),
            fmt_float(r.margin_up),
            fmt_float(r.margin_state),
            r.n_active_lo.to_string(),
            r.n_active_up.to_string(),
            r.n_active_state.to_string(),
            r.iters.to_string(),
            fmt_float(r.seconds),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Output(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_exact_power_law() {
        let pts: Vec<(f64, f64)> = (0..6)
            .map(|k| 10f64.powi(-k))
            .map(|a| (a, 3.0 * a.sqrt()))
            .collect();
        let f = fit_rate(&pts).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert_eq!(f.points, 6);
        assert!(fit_rate(&pts[..3]).is_none());
    }

    #[test]
    fn rule_exponent_must_be_fractional() {
        assert!(matches!(
            NoiseRule::new(1.0, 1.0),
            Err(Error::InvalidRule(_))
        ));
        assert!(matches!(
            NoiseRule::new(1.0, 0.0),
            Err(Error::InvalidRule(_))
        ));
        let r = NoiseRule::default();
        assert!((r.alpha(1e-3) - 1e-2).abs() < 1e-15);
    }

    #[test]
    fn csv_layout() {
        let r = SweepRecord {
            alpha: 0.01,
            lambda: 0.0,
            delta: 0.0,
            err_u: 1.0 / 3.0,
            err_su: 2.0,
            margin_lo: 0.5,
            margin_up: f64::INFINITY,
            margin_state: 0.25,
            n_active_lo: 0,
            n_active_up: 1,
            n_active_state: 2,
            iters: 17,
            seconds: 0.0,
        };
        let mut buf = Vec::new();
        write_csv(&[r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.split('\n');
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        let row = lines.next().unwrap();
        assert!(row.starts_with("1.0000000000000000e-2,0.0000000000000000e0,"));
        assert!(row.contains("3.3333333333333331e-1"));
        assert!(row.contains(",inf,"));
        assert!(row.ends_with(",0,1,2,17,0.0000000000000000e0"));
        assert!(!text.contains('\r'));
    }
}
