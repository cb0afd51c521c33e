//! Solve → verify pipeline for one scenario.

use std::path::PathBuf;

use dcu_core::bsde::{solve_lsmc, BsdeSolution};
use dcu_core::duality::{
    admissibility_check, attainability_check, axiom_suite, constant_control_grid,
    evaluate_constant_controls, AttainabilityReport, AxiomTolerances,
};
use dcu_core::inequalities::{mc_bound_check, pointwise_suite, McBound, McBoundReport};
use dcu_core::paths::{
    forward_gbm_exact, forward_sde, generate, BrownianIdentity, ConstantControl, Gbm, PathEnsemble,
    SdeCoefficients,
};
use serde::{Deserialize, Serialize};

use crate::config::{Check, Model, Scenario};
use crate::error::{InModule, RunError};
use crate::expr::Expr;
use crate::manifest::Manifest;
use crate::report::{ext, num, write_csv};

/// Headline numbers of a run, recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Headline {
    pub y0: f64,
    pub y0_std_error: f64,
    pub z_clips: usize,
    pub y_truncations: usize,
    pub duality_gap: Option<f64>,
    pub duality_std_error: Option<f64>,
    /// Smallest `penalized − Y0` over the constant controls.
    pub min_constant_gap: Option<f64>,
    /// Largest `penalized − Y0` over the constant controls.
    pub max_constant_gap: Option<f64>,
    pub worst_axiom_margin: Option<f64>,
    pub axioms_passed: Option<bool>,
    pub inequality_violations: Option<usize>,
    pub admissible: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub headline: Headline,
    pub manifest: Manifest,
    pub files: Vec<PathBuf>,
}

struct ExprSde<'a> {
    drift: &'a Expr,
    vol: &'a Expr,
}

impl SdeCoefficients for ExprSde<'_> {
    fn drift(&self, t: f64, x: f64) -> f64 {
        self.drift.eval(x, t)
    }
    fn vol(&self, t: f64, x: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        out[0] = self.vol.eval(x, t);
    }
}

pub fn simulate(s: &Scenario) -> Result<PathEnsemble, RunError> {
    let sv = &s.file.solver;
    let ens = generate(s.paths(), s.steps(), sv.dim, sv.horizon, sv.seed).in_module("paths")?;
    let ens = match &s.model {
        Model::Brownian { x0 } if *x0 == 0.0 => Ok(ens),
        Model::Brownian { x0 } => forward_sde(ens, &BrownianIdentity, *x0),
        Model::Gbm { x0, mu, sigma, exact: true } => {
            forward_gbm_exact(ens, Gbm { drift: *mu, vol: *sigma }, *x0)
        }
        Model::Gbm { x0, mu, sigma, exact: false } => {
            forward_sde(ens, &Gbm { drift: *mu, vol: *sigma }, *x0)
        }
        Model::Sde { x0, drift, vol } => forward_sde(ens, &ExprSde { drift, vol }, *x0),
    };
    ens.in_module("paths")
}

/// Runs `f` on a pool of `threads` workers, or on the default pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, RunError> {
    match threads {
        None => Ok(f()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k.max(1))
                .build()
                .map_err(|e| RunError::Manifest(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn solution_rows(sol: &BsdeSolution) -> Vec<Vec<String>> {
    let n = sol.steps();
    (0..=n)
        .map(|i| {
            let (z, r2, clips) = if i < n {
                let d = sol.diagnostics()[i];
                (num(sol.mean_z(i)), num(d.r_squared), d.z_clips + d.y_truncations)
            } else {
                (String::new(), String::new(), 0)
            };
            vec![
                i.to_string(),
                num(sol.time(i)),
                num(sol.mean_y(i)),
                z,
                r2,
                clips.to_string(),
            ]
        })
        .collect()
}

fn bound_row(r: &McBoundReport, label: &str, samples: usize) -> Vec<String> {
    let slack = 3.0 * r.lhs_std_error.hypot(r.rhs_std_error);
    let rhs = r.eps_rhs.map_or(r.rhs, |e| e.min(r.rhs));
    vec![
        r.bound.id().label().to_string(),
        label.to_string(),
        samples.to_string(),
        usize::from(!r.holds).to_string(),
        num(rhs + slack - r.lhs),
    ]
}

/// Runs `s`, writes the requested reports and the manifest into its output
/// directory.
pub fn run(s: &Scenario) -> Result<RunOutcome, RunError> {
    let dir = &s.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
    let horizon = s.file.solver.horizon;
    let ens = simulate(s)?;
    let xi = |x: f64| s.endowment.eval(x, horizon);
    let sol = solve_lsmc(&ens, &xi, &s.generator, s.basis).in_module("bsde")?;
    let mut files = Vec::new();
    let mut emit = |name: &str, header: &[&str], rows: &[Vec<String>]| -> Result<(), RunError> {
        let p = dir.join(name);
        write_csv(&p, header, rows)?;
        files.push(p);
        Ok(())
    };
    emit(
        "solution.csv",
        &["step", "t", "Y0_regression_value", "Z0", "R2", "clip_count"],
        &solution_rows(&sol),
    )?;

    let mut headline = Headline {
        y0: sol.y0(),
        y0_std_error: sol.y0_std_error(),
        z_clips: sol.total_z_clips(),
        y_truncations: sol.total_y_truncations(),
        duality_gap: None,
        duality_std_error: None,
        min_constant_gap: None,
        max_constant_gap: None,
        worst_axiom_margin: None,
        axioms_passed: None,
        inequality_violations: None,
        admissible: None,
    };

    let mut attain: Option<AttainabilityReport> = None;
    if s.wants(Check::Duality) || s.wants(Check::Admissibility) {
        attain = Some(attainability_check(&sol, &s.core, &s.generator, &ens).in_module("duality")?);
    }
    if s.wants(Check::Duality) {
        let a = attain.as_ref().expect("computed above");
        let mut rows = vec![vec![
            "optimal".to_string(),
            ext(a.estimate.value),
            num(a.estimate.std_error),
            num(a.estimate.value.to_f64() - a.y0),
            num(a.estimate.weights.effective_sample_size),
            a.estimate.admissible.label().to_string(),
        ]];
        let grid = constant_control_grid(&s.core, s.file.checks.controls);
        let evals = evaluate_constant_controls(&ens, &sol, &s.core, &grid).in_module("duality")?;
        for e in &evals {
            rows.push(vec![
                e.control_id.clone(),
                ext(e.estimate.value),
                num(e.estimate.std_error),
                num(e.gap_vs_y0),
                num(e.estimate.weights.effective_sample_size),
                e.estimate.admissible.label().to_string(),
            ]);
        }
        headline.duality_gap = Some(a.gap);
        headline.duality_std_error = Some(a.combined_std_error);
        headline.min_constant_gap = evals.iter().map(|e| e.gap_vs_y0).reduce(f64::min);
        headline.max_constant_gap = evals.iter().map(|e| e.gap_vs_y0).reduce(f64::max);
        emit(
            "duality_gaps.csv",
            &["control_id", "value", "std_error", "gap_vs_Y0", "ess", "admissible"],
            &rows,
        )?;
    }
    if s.wants(Check::Admissibility) {
        let a = attain.as_ref().expect("computed above");
        let r = admissibility_check(&ens, &xi, &s.core, &a.control).in_module("duality")?;
        headline.admissible = Some(r.verdict.label().to_string());
        emit(
            "admissibility.csv",
            &[
                "control_id",
                "verdict",
                "finite_penalty",
                "mean_weight",
                "ess",
                "ui_statistic",
                "ui_statistic_half",
                "ui_stable",
            ],
            &[vec![
                "optimal".to_string(),
                r.verdict.label().to_string(),
                r.finite_penalty.to_string(),
                num(r.weights.mean_weight),
                num(r.weights.effective_sample_size),
                num(r.ui_statistic),
                num(r.ui_statistic_half),
                r.ui_stable.to_string(),
            ]],
        )?;
    }
    if s.wants(Check::Axioms) {
        let eta = |x: f64| s.eta.eval(x, horizon);
        let checks = axiom_suite(&ens, &s.generator, &xi, &eta, s.basis, AxiomTolerances::default())
            .in_module("duality")?;
        headline.worst_axiom_margin = checks.iter().map(|c| c.margin).reduce(f64::min);
        headline.axioms_passed = Some(checks.iter().all(|c| c.passed));
        let rows: Vec<_> = checks
            .iter()
            .map(|c| {
                vec![
                    c.axiom.label().to_string(),
                    c.case.clone(),
                    num(c.margin),
                    num(c.tolerance),
                    c.passed.to_string(),
                ]
            })
            .collect();
        emit("axioms.csv", &["axiom", "case", "margin", "tolerance", "passed"], &rows)?;
    }
    if s.wants(Check::Inequalities) {
        let c = &s.file.checks;
        let reports = pointwise_suite(&s.inequalities, c.draws, c.samples, s.file.solver.seed)
            .in_module("inequalities")?;
        let mut violations = 0;
        let mut rows = Vec::new();
        for r in &reports {
            violations += r.violations;
            rows.push(vec![
                r.spec.id.label().to_string(),
                r.spec.params.to_string(),
                r.samples.to_string(),
                r.violations.to_string(),
                num(r.worst_margin),
            ]);
        }
        let params = s.core.params();
        for &q in &c.bound_controls {
            let control = ConstantControl(vec![q; params.dim]);
            for bound in [
                McBound::LlnL,
                McBound::LlnLPower { alpha_star: c.alpha_star },
                McBound::LExpLog {
                    mu: c.bound_mu,
                    eps: c.bound_eps,
                    gamma: params.gamma,
                    lambda: params.lambda,
                },
            ] {
                let r = mc_bound_check(bound, &ens, &control).in_module("inequalities")?;
                violations += usize::from(!r.holds);
                rows.push(bound_row(&r, &format!("q={q}"), ens.paths()));
            }
        }
        headline.inequality_violations = Some(violations);
        emit(
            "inequalities.csv",
            &["inequality_id", "params", "samples", "violations", "worst_margin"],
            &rows,
        )?;
    }

    let manifest = Manifest::new(s, headline.clone(), &files)?;
    let mpath = dir.join("manifest.json");
    manifest.write(&mpath)?;
    files.push(mpath);
    Ok(RunOutcome {
        headline,
        manifest,
        files,
    })
}
