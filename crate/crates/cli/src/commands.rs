use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use tikhlav::experiments::{self, SweepRecord};
use tikhlav::{
    activity_transition, alpha_continuity_check, classify_activity, feasibility, lavrentiev_sweep,
    manufacture, noise_study, optimal_alpha, projection_formula_residual, slater, solve,
    sweep_alpha, total_error_study, write_csv, Error, ExperimentOptions, LavrentievSign,
    ManufacturedInstance, NoiseRule, RegularizedProblem, Scenario,
};

use crate::config::{ExperimentSpec, Resolved, RunConfig};
use crate::report::{Check, ExperimentSummary, RunReport};
use crate::{preset, CliError, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Verify,
    Manufacture,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Verify => "verify",
            Command::Manufacture => "manufacture",
        }
    }
}

#[derive(Debug, Clone)]
pub enum Source {
    File(PathBuf),
    Preset(String),
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub source: Source,
    /// overrides the configured output directory
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

struct Context {
    config: RunConfig,
    base: PathBuf,
    out: PathBuf,
    tol: f64,
    seed: u64,
    files: Vec<PathBuf>,
}

impl Context {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.out.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::Io {
            path: path.clone(),
            message: e.to_string(),
        })?;
        self.files.push(path);
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).expect("report types serialize");
        self.write(name, text.as_bytes())
    }

    fn options(&self) -> ExperimentOptions {
        ExperimentOptions {
            record_timing: self.config.record_timing,
            ..ExperimentOptions::new(self.tol)
        }
    }
}

/// Loads and validates the configuration, runs `command`, and writes its
/// outputs. Failed checks are reported, not returned as errors.
pub fn run(command: Command, opts: &RunOptions) -> Result<RunReport, CliError> {
    let clock = Instant::now();
    let (config, base) = match &opts.source {
        Source::File(p) => {
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (RunConfig::load(p)?, base)
        }
        Source::Preset(name) => {
            let text =
                preset(name).ok_or_else(|| CliError::Config(format!("unknown preset {name:?}")))?;
            (RunConfig::parse(text)?, PathBuf::from("."))
        }
    };
    config.validate()?;
    let tol = opts.tol.or(config.tol).unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0) {
        return Err(CliError::Config(format!("tol must be positive, got {tol}")));
    }
    let out = opts
        .out
        .clone()
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("tikhlav-out"));
    let seed = opts.seed.or(config.seed).unwrap_or(0);
    let mut ctx = Context {
        config,
        base,
        out,
        tol,
        seed,
        files: Vec::new(),
    };
    let resolved = ctx.config.resolve(&ctx.base)?;
    fs::create_dir_all(&ctx.out).map_err(|e| CliError::Io {
        path: ctx.out.clone(),
        message: e.to_string(),
    })?;

    let (details, experiments, checks) = match command {
        Command::Solve => cmd_solve(&mut ctx, &resolved)?,
        Command::Manufacture => cmd_manufacture(&mut ctx, &resolved)?,
        Command::Verify => cmd_verify(&mut ctx, &resolved)?,
    };
    let report_path = ctx.out.join("report.json");
    let mut files = ctx.files.clone();
    files.push(report_path);
    let report = RunReport {
        command: command.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: ctx.config.clone(),
        tol,
        details,
        experiments,
        checks,
        files,
        runtime_seconds: clock.elapsed().as_secs_f64(),
    };
    ctx.write_json("report.json", &report)?;
    Ok(report)
}

type Outcome = (Option<Value>, Vec<ExperimentSummary>, Vec<Check>);

fn cmd_solve(ctx: &mut Context, r: &Resolved) -> Result<Outcome, CliError> {
    let alpha = ctx
        .config
        .alpha
        .ok_or_else(|| CliError::Config("alpha is required for solve".into()))?;
    let y_d = match ctx.config.observed(&r.grid, &ctx.base)? {
        Some(y) => y,
        None => build_instance(ctx, r)?.y_d,
    };
    let state = r.set.state();
    if state.lambda() > 0.0 && state.sign() == LavrentievSign::Plus {
        let info = slater(&r.set.unregularized(), &r.slater_point)?;
        if state.lambda() > info.lambda_max {
            return Err(Error::LambdaExceedsSlaterCap {
                lambda: state.lambda(),
                cap: info.lambda_max,
            }
            .into());
        }
    }
    let problem = RegularizedProblem::new(r.set.clone(), y_d, alpha)?;
    let sol = solve(&problem, ctx.tol)?;
    let margins = feasibility(&sol.u, &r.set)?;
    let active = classify_activity(&sol.u, &r.set, tikhlav::EPS_ACT)?;
    let projection = projection_formula_residual(&sol, &problem, ctx.tol)?;
    let out = json!({
        "alpha": alpha,
        "lambda": state.lambda(),
        "u": sol.u.values(),
        "y": sol.y.values(),
        "objective": sol.objective,
        "multipliers": sol.multipliers,
        "margins": margins,
        "active_sizes": active.sizes(),
        "kkt": sol.kkt,
        "iterations": sol.iterations,
        "projection_residual": projection,
    });
    ctx.write_json("solution.json", &out)?;
    let checks = vec![
        Check::new(
            "kkt",
            sol.kkt.max() <= ctx.tol,
            format!("{:.3e} <= {:.3e}", sol.kkt.max(), ctx.tol),
        ),
        Check::new(
            "projection_formula",
            projection <= 10.0 * ctx.tol,
            format!("{projection:.3e} <= {:.3e}", 10.0 * ctx.tol),
        ),
    ];
    let details = json!({
        "objective": sol.objective,
        "kkt": sol.kkt,
        "margins": margins,
        "active_sizes": active.sizes(),
        "iterations": sol.iterations,
    });
    Ok((Some(details), Vec::new(), checks))
}

fn build_instance(ctx: &Context, r: &Resolved) -> Result<ManufacturedInstance, CliError> {
    let (w, model) = ctx.config.manufactured(&r.grid, &ctx.base)?;
    Ok(manufacture(&w, &r.set.unregularized(), model, ctx.tol)?)
}

fn cmd_manufacture(ctx: &mut Context, r: &Resolved) -> Result<Outcome, CliError> {
    let inst = build_instance(ctx, r)?;
    ctx.write_json("instance.json", &inst)?;
    let alpha_star = optimal_alpha(inst.residual, inst.w_norm).ok();
    let details = json!({
        "tau": inst.tau,
        "margins": inst.margins,
        "w_norm": inst.w_norm,
        "residual": inst.residual,
        "source_gap": inst.source_gap,
        "optimality_gap": inst.optimality_gap,
        "alpha_star": alpha_star.map(|a| a.alpha),
    });
    let checks = vec![Check::new(
        "feasible",
        inst.margins.feasible,
        format!("smallest margin {:.3e}", inst.tau),
    )];
    Ok((Some(details), Vec::new(), checks))
}

/// Study outcome without its record list.
fn summarize<T: Serialize>(kind: &str, study: &T) -> ExperimentSummary {
    let mut summary = serde_json::to_value(study).expect("study types serialize");
    if let Some(map) = summary.as_object_mut() {
        map.remove("records");
    }
    ExperimentSummary {
        kind: kind.into(),
        summary,
    }
}

fn cmd_verify(ctx: &mut Context, r: &Resolved) -> Result<Outcome, CliError> {
    if ctx.config.experiments.is_empty() {
        return Err(CliError::Config(
            "experiments must list at least one experiment for verify".into(),
        ));
    }
    let inst = build_instance(ctx, r)?;
    ctx.write_json("instance.json", &inst)?;
    let scenario = Scenario::new(r.set.clone(), inst.clone())?;
    let opts = ctx.options();
    let mut records: Vec<SweepRecord> = Vec::new();
    let mut summaries = Vec::new();
    let mut checks = Vec::new();

    for (k, spec) in ctx.config.experiments.clone().iter().enumerate() {
        let tag = format!("{k}:{}", spec.kind());
        let bounds = |checks: &mut Vec<Check>, list: &[experiments::BoundCheck]| {
            checks.extend(list.iter().map(|b| Check::from_bound(&tag, b)));
        };
        match spec {
            ExperimentSpec::SweepAlpha {
                alphas,
                slope_range,
            } => {
                let s = sweep_alpha(&scenario, alphas, &opts)?;
                bounds(&mut checks, &s.checks);
                if let Some([lo, hi]) = slope_range {
                    checks.push(Check::within(
                        format!("{tag}/slope"),
                        s.fit.map(|f| f.slope),
                        *lo,
                        *hi,
                    ));
                }
                records.extend(&s.records);
                summaries.push(summarize(spec.kind(), &s));
            }
            ExperimentSpec::Activity { alphas, tau } => {
                let tau = tau.unwrap_or(inst.tau);
                match activity_transition(&scenario, alphas, tau, &opts) {
                    Ok(a) => {
                        checks.push(Check::new(
                            format!("{tag}/transition"),
                            true,
                            format!("alpha0 = {:.3e}", a.alpha0),
                        ));
                        records.extend(&a.records);
                        summaries.push(summarize(spec.kind(), &a));
                    }
                    Err(Error::NoTransition { alpha }) => {
                        checks.push(Check::new(
                            format!("{tag}/transition"),
                            false,
                            format!("constraints remain active at alpha = {alpha:.3e}"),
                        ));
                        summaries.push(ExperimentSummary {
                            kind: spec.kind().into(),
                            summary: json!({ "no_transition": true, "alpha": alpha }),
                        });
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            ExperimentSpec::Noise {
                deltas,
                c,
                s,
                expect_inactive,
            } => {
                let rule = NoiseRule::new(*c, *s)
                    .map_err(|e| CliError::Config(format!("experiments[{k}]: {e}")))?;
                let study = noise_study(&scenario, deltas, rule, ctx.seed, &opts)?;
                bounds(&mut checks, &study.checks);
                if *expect_inactive {
                    let smallest = deltas.iter().copied().fold(f64::INFINITY, f64::min);
                    let hit = study.delta0.is_some_and(|d| d >= smallest);
                    checks.push(Check::new(
                        format!("{tag}/inactive_at_smallest_delta"),
                        hit,
                        format!("delta0 = {:?}", study.delta0),
                    ));
                }
                records.extend(&study.records);
                summaries.push(summarize(spec.kind(), &study));
            }
            ExperimentSpec::Lavrentiev {
                alpha,
                lambdas,
                sign,
                u_hat,
                max_c_ratio,
                expect_coincidence,
            } => {
                let u_hat = match u_hat {
                    Some(v) => v.on_grid(&r.grid, &ctx.base, &format!("experiments[{k}].u_hat"))?,
                    None => r.slater_point.clone(),
                };
                let l = lavrentiev_sweep(&scenario, *alpha, lambdas, *sign, &u_hat, &opts)?;
                bounds(&mut checks, &l.checks);
                checks.push(Check::new(
                    format!("{tag}/c_fit_finite"),
                    l.c_fit.is_finite(),
                    format!("c_fit = {:.6e}", l.c_fit),
                ));
                if let Some(limit) = max_c_ratio {
                    let passed = l.c_ratio.is_some_and(|c| c < *limit);
                    checks.push(Check::new(
                        format!("{tag}/c_ratio"),
                        passed,
                        format!("{:?} < {limit}", l.c_ratio),
                    ));
                }
                if *expect_coincidence {
                    checks.push(Check::new(
                        format!("{tag}/coincidence"),
                        l.lambda_coincide.is_some_and(|x| x > 0.0),
                        format!("lambda_coincide = {:?}", l.lambda_coincide),
                    ));
                }
                records.extend(&l.records);
                summaries.push(summarize(spec.kind(), &l));
            }
            ExperimentSpec::TotalError {
                alphas,
                lambda_cap,
                sign,
                slope_range,
            } => {
                let t = total_error_study(
                    &scenario,
                    alphas,
                    lambda_cap.unwrap_or(f64::INFINITY),
                    *sign,
                    &opts,
                )?;
                bounds(&mut checks, &t.checks);
                if let Some([lo, hi]) = slope_range {
                    checks.push(Check::within(
                        format!("{tag}/slope"),
                        t.fit.map(|f| f.slope),
                        *lo,
                        *hi,
                    ));
                }
                records.extend(&t.records);
                summaries.push(summarize(spec.kind(), &t));
            }
            ExperimentSpec::Continuity { pairs } => {
                let pairs: Vec<(f64, f64)> = pairs.iter().map(|p| (p[0], p[1])).collect();
                let template = scenario.problem(pairs[0].0)?;
                let list = alpha_continuity_check(&template, &pairs, &opts)?;
                bounds(&mut checks, &list);
                summaries.push(ExperimentSummary {
                    kind: spec.kind().into(),
                    summary: json!({ "checks": list }),
                });
            }
        }
    }
    let mut csv = Vec::new();
    write_csv(&records, &mut csv)?;
    ctx.write("sweep.csv", &csv)?;
    let details = json!({ "tau": inst.tau, "w_norm": inst.w_norm, "residual": inst.residual });
    Ok((Some(details), summaries, checks))
}
