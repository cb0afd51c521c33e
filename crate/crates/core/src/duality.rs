//! The dual side: penalized expectations `E_{Q^q}[ξ + ∫ f(s, q_s) ds]` under
//! reweighted paths, admissibility diagnostics, attainment at the
//! subgradient control and the axioms of a dynamic concave utility.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::bsde::{solve_lsmc, two_stage_solve, BasisSpec, BsdeSolution, Endowment};
use crate::model::{CoreFunction, EffectiveDomain, Generator};
use crate::par::for_each_row;
use crate::paths::{blocked_moments, stochastic_exponential, Control, ConstantControl, DensityPath, PathEnsemble, TabulatedControl};
use crate::regression::Design;
use crate::vector::dot;
use crate::{Error, ExtendedReal, Result};

/// Effective sample size below `ESS_FLOOR_FRACTION · M` makes an estimate
/// inconclusive.
pub const ESS_FLOOR_FRACTION: f64 = 0.01;

/// Number of standard errors `Ê[L_T]` may sit away from 1.
const MARTINGALE_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admissible {
    Yes,
    No,
    Inconclusive,
}

impl Admissible {
    pub fn label(self) -> &'static str {
        match self {
            Admissible::Yes => "yes",
            Admissible::No => "no",
            Admissible::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightDiagnostics {
    pub mean_weight: f64,
    pub mean_weight_std_error: f64,
    /// `(Σ L)² / Σ L²`.
    pub effective_sample_size: f64,
    /// `max L / Σ L`.
    pub max_weight_share: f64,
    /// True when `Ê[L_T]` is more than four standard errors from 1.
    pub martingale_flag: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenalizedEstimate {
    pub value: ExtendedReal,
    pub std_error: f64,
    pub weights: WeightDiagnostics,
    pub admissible: Admissible,
}

fn weight_diagnostics(density: &DensityPath) -> WeightDiagnostics {
    let m = density.paths();
    let n = density.steps();
    let mom = blocked_moments(m, |p| density.density(p, n));
    let max = (0..m).map(|p| density.density(p, n)).fold(0.0f64, f64::max);
    weight_summary(mom, max)
}

fn weight_summary(mom: crate::stats::Moments, max: f64) -> WeightDiagnostics {
    let (mean, se) = (mom.mean(), mom.std_error());
    let ess = if mom.sum_sq() > 0.0 { mom.sum() * mom.sum() / mom.sum_sq() } else { 0.0 };
    let off = (mean - 1.0).abs();
    WeightDiagnostics {
        mean_weight: mean,
        mean_weight_std_error: se,
        effective_sample_size: ess,
        max_weight_share: max / mom.sum(),
        martingale_flag: off > MARTINGALE_SIGMAS * se && off > 1e-12,
    }
}

/// `Σ_i f(t_i, q_i) dt` per path, or the first `(path, step)` where `f = +∞`.
fn penalties(
    ens: &PathEnsemble,
    core: &CoreFunction,
    density: &DensityPath,
) -> core::result::Result<Vec<f64>, (usize, usize)> {
    const CHUNK: usize = 1024;
    let (m, n, dt) = (ens.paths(), ens.steps(), ens.dt());
    let mut out = vec![0.0; m];
    for_each_row(&mut out, CHUNK, |chunk, rows| {
        for (j, acc) in rows.iter_mut().enumerate() {
            let p = chunk * CHUNK + j;
            let mut s = crate::stats::NeumaierSum::new();
            *acc = f64::INFINITY;
            for i in 0..n {
                match core.eval(ens.time(i), density.control(p, i)) {
                    ExtendedReal::Finite(v) => s.add(v * dt),
                    ExtendedReal::PosInfinity => break,
                }
                if i + 1 == n {
                    *acc = s.total();
                }
            }
        }
    });
    match out.iter().position(|v| !v.is_finite()) {
        None => Ok(out),
        Some(p) => {
            let step = (0..n)
                .find(|&i| !core.in_domain(ens.time(i), density.control(p, i)))
                .unwrap_or(0);
            Err((p, step))
        }
    }
}

/// `Ê[L^q_T (ξ + Σ f(t_i, q_i) dt)]` at time 0.
pub fn penalized_expectation<E: Endowment + ?Sized, C: Control + ?Sized>(
    ens: &PathEnsemble,
    endowment: &E,
    core: &CoreFunction,
    control: &C,
) -> Result<PenalizedEstimate> {
    let terminal = terminal_values(ens, endowment);
    penalized_from_terminal(ens, &terminal, core, control)
}

fn terminal_values<E: Endowment + ?Sized>(ens: &PathEnsemble, endowment: &E) -> Vec<f64> {
    let s = ens.state_or_brownian();
    let w = ens.steps() + 1;
    (0..ens.paths()).map(|p| endowment.value(s[p * w + w - 1])).collect()
}

/// As [`penalized_expectation`] with the terminal values given per path.
pub fn penalized_from_terminal<C: Control + ?Sized>(
    ens: &PathEnsemble,
    terminal: &[f64],
    core: &CoreFunction,
    control: &C,
) -> Result<PenalizedEstimate> {
    if let Some(q) = control.constant() {
        return penalized_constant(ens, terminal, core, q);
    }
    let density = stochastic_exponential(ens, control)?;
    let weights = weight_diagnostics(&density);
    let pen = match penalties(ens, core, &density) {
        Ok(p) => p,
        Err(_) => return Ok(infinite_estimate(weights)),
    };
    let n = ens.steps();
    let mom = blocked_moments(ens.paths(), |p| density.density(p, n) * (terminal[p] + pen[p]));
    Ok(finish_estimate(ens, mom, weights))
}

fn infinite_estimate(weights: WeightDiagnostics) -> PenalizedEstimate {
    PenalizedEstimate {
        value: ExtendedReal::PosInfinity,
        std_error: 0.0,
        weights,
        admissible: Admissible::No,
    }
}

/// Constant `q`: the penalty is the same on every path and
/// `L_T = exp(q·B_T − ½|q|²T)`.
fn penalized_constant(
    ens: &PathEnsemble,
    terminal: &[f64],
    core: &CoreFunction,
    q: &[f64],
) -> Result<PenalizedEstimate> {
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("control is not finite".to_string()));
    }
    let (m, n, d) = (ens.paths(), ens.steps(), ens.dim());
    let b = ens.terminal_brownian();
    let half_sq = 0.5 * dot(q, q) * ens.horizon();
    let weights: Vec<f64> = (0..m)
        .map(|p| libm::exp(dot(q, &b[p * d..(p + 1) * d]) - half_sq))
        .collect();
    let mom = blocked_moments(m, |p| weights[p]);
    let max = weights.iter().copied().fold(0.0f64, f64::max);
    let diag = weight_summary(mom, max);
    let mut pen = crate::stats::NeumaierSum::new();
    for i in 0..n {
        match core.eval(ens.time(i), q) {
            ExtendedReal::Finite(v) => pen.add(v * ens.dt()),
            ExtendedReal::PosInfinity => return Ok(infinite_estimate(diag)),
        }
    }
    let pen = pen.total();
    let mom = blocked_moments(m, |p| weights[p] * (terminal[p] + pen));
    Ok(finish_estimate(ens, mom, diag))
}

fn finish_estimate(
    ens: &PathEnsemble,
    mom: crate::stats::Moments,
    weights: WeightDiagnostics,
) -> PenalizedEstimate {
    let floor = ESS_FLOOR_FRACTION * ens.paths() as f64;
    let admissible = if weights.effective_sample_size < floor || weights.martingale_flag {
        Admissible::Inconclusive
    } else {
        Admissible::Yes
    };
    PenalizedEstimate {
        value: ExtendedReal::Finite(mom.mean()),
        std_error: mom.std_error(),
        weights,
        admissible,
    }
}

/// Per-path estimate of `E_{Q^q}[ξ + Σ_{j≥step} f dt | X_step]`, obtained by
/// regressing the reweighted integrand on the state at `step`.
pub fn conditional_penalized_expectation<E: Endowment + ?Sized, C: Control + ?Sized>(
    ens: &PathEnsemble,
    endowment: &E,
    core: &CoreFunction,
    control: &C,
    step: usize,
    degree: usize,
) -> Result<Vec<f64>> {
    let n = ens.steps();
    if step > n {
        return Err(Error::Param(alloc::format!("step {step} beyond N = {n}")));
    }
    let density = stochastic_exponential(ens, control)?;
    let terminal = terminal_values(ens, endowment);
    let dt = ens.dt();
    let m = ens.paths();
    let mut integrand = vec![0.0; m];
    for (p, v) in integrand.iter_mut().enumerate() {
        let mut pen = 0.0;
        for i in step..n {
            match core.eval(ens.time(i), density.control(p, i)) {
                ExtendedReal::Finite(f) => pen += f * dt,
                ExtendedReal::PosInfinity => {
                    return Err(Error::RejectedControl(alloc::format!(
                        "penalty is infinite on path {p} step {i}"
                    )))
                }
            }
        }
        let ratio = libm::exp(density.log_density(p, n) - density.log_density(p, step));
        *v = ratio * (terminal[p] + pen);
    }
    let s = ens.state_or_brownian();
    let x: Vec<f64> = (0..m).map(|p| s[p * (n + 1) + step]).collect();
    let design = Design::new(&x, degree)?;
    let proj = design.fit(&x, |p| integrand[p]);
    Ok(x.iter().map(|&v| proj.predict(v)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibilityReport {
    pub verdict: Admissible,
    /// `f(t_i, q_i) < +∞` on every path and step.
    pub finite_penalty: bool,
    pub weights: WeightDiagnostics,
    /// `Ê[L_T ln(1 + L_T)]` on the full sample and on its first half.
    pub ui_statistic: f64,
    pub ui_statistic_half: f64,
    pub ui_stable: bool,
}

/// Diagnoses whether `q` belongs to the admissible set: finite penalty,
/// `Ê[L_T] ≈ 1` and a stable `L ln(1+L)` moment as a uniform-integrability
/// proxy.
pub fn admissibility_check<E: Endowment + ?Sized, C: Control + ?Sized>(
    ens: &PathEnsemble,
    endowment: &E,
    core: &CoreFunction,
    control: &C,
) -> Result<AdmissibilityReport> {
    let density = stochastic_exponential(ens, control)?;
    let weights = weight_diagnostics(&density);
    let finite_penalty = penalties(ens, core, &density).is_ok();
    let n = ens.steps();
    let m = ens.paths();
    let ui = |p: usize| {
        let l = density.density(p, n);
        l * libm::log1p(l)
    };
    let full = blocked_moments(m, ui);
    let half = blocked_moments(m.div_ceil(2), ui);
    let spread = MARTINGALE_SIGMAS * (full.std_error() + half.std_error());
    let ui_stable = full.mean().is_finite()
        && half.mean().is_finite()
        && (full.mean() - half.mean()).abs() <= spread.max(1e-12);
    let terminal_finite = terminal_values(ens, endowment).iter().all(|v| v.is_finite());
    let floor = ESS_FLOOR_FRACTION * m as f64;
    let verdict = if !finite_penalty {
        Admissible::No
    } else if !weights.martingale_flag
        && ui_stable
        && terminal_finite
        && weights.effective_sample_size >= floor
    {
        Admissible::Yes
    } else {
        Admissible::Inconclusive
    };
    Ok(AdmissibilityReport {
        verdict,
        finite_penalty,
        weights,
        ui_statistic: full.mean(),
        ui_statistic_half: half.mean(),
        ui_stable,
    })
}

/// Outcome of reweighting with the subgradient control.
#[derive(Debug, Clone, PartialEq)]
pub struct AttainabilityReport {
    pub estimate: PenalizedEstimate,
    pub y0: f64,
    pub gap: f64,
    /// `sqrt(se_estimate² + se_Y0²)`.
    pub combined_std_error: f64,
    /// Mean of `f(t, q*) + g(t, Z) − Z·q*` at each step.
    pub fenchel_young_residual: Vec<f64>,
    /// The control `q*` per path and step.
    pub control: TabulatedControl,
}

impl AttainabilityReport {
    /// `gap ≤ k · combined_std_error`.
    pub fn within(&self, k: f64) -> bool {
        self.gap <= k * self.combined_std_error
    }
}

/// Builds `q*_i ∈ ∂g(t_i, Z_i)` (minimal-norm selection) on every path and
/// step, reweights with it and compares the penalized expectation with `Y0`.
pub fn attainability_check(
    solution: &BsdeSolution,
    core: &CoreFunction,
    gen: &Generator,
    ens: &PathEnsemble,
) -> Result<AttainabilityReport> {
    let (m, n, d) = (ens.paths(), ens.steps(), ens.dim());
    if solution.paths() != m || solution.steps() != n || solution.dim() != d {
        return Err(Error::Input("solution and ensemble shapes differ".to_string()));
    }
    let mut q = vec![0.0; m * n * d];
    let mut residual = vec![0.0; n];
    for i in 0..n {
        let t = ens.time(i);
        let mut acc = crate::stats::NeumaierSum::new();
        for p in 0..m {
            let z = solution.z(p, i);
            let out = &mut q[(p * n + i) * d..(p * n + i + 1) * d];
            gen.min_norm_subgradient_into(z, out)?;
            let fq = match core.eval(t, out) {
                ExtendedReal::Finite(v) => v,
                ExtendedReal::PosInfinity => {
                    return Err(Error::Attainability { path: p, step: i })
                }
            };
            acc.add(fq + gen.try_eval(t, z)? - dot(z, out));
        }
        residual[i] = acc.total() / m as f64;
    }
    let control = TabulatedControl::new(n, d, q)?;
    let estimate = penalized_from_terminal(ens, solution.y_slice(n), core, &control)?;
    let y0 = solution.y0();
    let gap = (estimate.value.to_f64() - y0).abs();
    let combined = libm::sqrt(
        estimate.std_error * estimate.std_error + solution.y0_std_error() * solution.y0_std_error(),
    );
    Ok(AttainabilityReport {
        estimate,
        y0,
        gap,
        combined_std_error: combined,
        fenchel_young_residual: residual,
        control,
    })
}

/// `count` evenly spaced constant controls along the first axis covering the
/// effective domain of `core` intersected with `[−2, 2]`. A domain unbounded
/// on one side only, such as `[1, ∞)`, is covered over a width of 2 from its
/// finite end. A one-point domain yields that single control.
pub fn constant_control_grid(core: &CoreFunction, count: usize) -> Vec<Vec<f64>> {
    let dim = core.params().dim;
    let axis = |v: f64| {
        let mut q = vec![0.0; dim];
        q[0] = v;
        q
    };
    let (lo, hi) = match core.effective_domain() {
        EffectiveDomain::Point(p) => return vec![p],
        EffectiveDomain::Whole => (-2.0, 2.0),
        EffectiveDomain::Ball { radius } => (-radius.min(2.0), radius.min(2.0)),
        EffectiveDomain::Interval { lo, hi } => match (lo.is_finite(), hi.is_finite()) {
            (true, true) => (lo.max(-2.0), hi.min(2.0)),
            (true, false) => (lo, lo + 2.0),
            (false, true) => (hi - 2.0, hi),
            (false, false) => (-2.0, 2.0),
        },
    };
    if count <= 1 || lo >= hi {
        return vec![axis(lo)];
    }
    (0..count)
        .map(|i| axis(lo + (hi - lo) * i as f64 / (count - 1) as f64))
        .collect()
}

/// Penalized expectation of one constant control next to `Y0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlEvaluation {
    pub control_id: String,
    pub control: Vec<f64>,
    pub estimate: PenalizedEstimate,
    /// `estimate − Y0`; nonnegative up to noise for admissible controls.
    pub gap_vs_y0: f64,
}

/// Evaluates each constant control against the solved `Y0`.
pub fn evaluate_constant_controls(
    ens: &PathEnsemble,
    solution: &BsdeSolution,
    core: &CoreFunction,
    controls: &[Vec<f64>],
) -> Result<Vec<ControlEvaluation>> {
    let n = ens.steps();
    controls
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let c = ConstantControl(q.clone());
            let estimate = penalized_from_terminal(ens, solution.y_slice(n), core, &c)?;
            Ok(ControlEvaluation {
                control_id: alloc::format!("const_{i:02}"),
                control: q.clone(),
                estimate,
                gap_vs_y0: estimate.value.to_f64() - solution.y0(),
            })
        })
        .collect()
}

/// Thresholds of the axiom suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxiomTolerances {
    pub monotonicity: f64,
    pub translation: f64,
    pub concavity: f64,
    pub time_consistency: f64,
}

impl Default for AxiomTolerances {
    fn default() -> Self {
        Self {
            monotonicity: 0.01,
            translation: 0.02,
            concavity: 0.02,
            time_consistency: 0.03,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axiom {
    Monotonicity,
    Translation,
    Concavity,
    TimeConsistency,
}

impl Axiom {
    pub fn label(self) -> &'static str {
        match self {
            Axiom::Monotonicity => "monotonicity",
            Axiom::Translation => "translation",
            Axiom::Concavity => "concavity",
            Axiom::TimeConsistency => "time_consistency",
        }
    }
}

/// One axiom check. `margin` is signed so that `margin ≥ −tolerance` passes:
/// for monotonicity and concavity it is the inequality's slack, for
/// translation and time consistency it is minus the absolute defect.
#[derive(Debug, Clone, PartialEq)]
pub struct AxiomCheck {
    pub axiom: Axiom,
    pub case: String,
    pub margin: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl AxiomCheck {
    fn new(axiom: Axiom, case: String, margin: f64, tolerance: f64) -> Self {
        Self {
            axiom,
            case,
            margin,
            tolerance,
            passed: margin >= -tolerance,
        }
    }
}

/// Runs the four axioms on `ξ` and `η` with common random numbers.
///
/// Monotonicity compares `ξ` with `min(ξ, η)`; translation uses `a = ±1`;
/// concavity mixes `ξ` and `η` at `θ ∈ {¼, ½, ¾}`; time consistency splits
/// at the middle grid node.
pub fn axiom_suite<E1, E2>(
    ens: &PathEnsemble,
    gen: &Generator,
    xi: &E1,
    eta: &E2,
    basis: BasisSpec,
    tol: AxiomTolerances,
) -> Result<Vec<AxiomCheck>>
where
    E1: Endowment + ?Sized,
    E2: Endowment + ?Sized,
{
    let y0 = |e: &(dyn Fn(f64) -> f64 + Sync)| -> Result<f64> {
        Ok(solve_lsmc(ens, &|x: f64| e(x), gen, basis)?.y0())
    };
    let u_xi = y0(&|x| xi.value(x))?;
    let u_eta = y0(&|x| eta.value(x))?;
    let mut out = Vec::new();

    let u_low = y0(&|x| xi.value(x).min(eta.value(x)))?;
    out.push(AxiomCheck::new(
        Axiom::Monotonicity,
        "xi>=min(xi,eta)".to_string(),
        u_xi - u_low,
        tol.monotonicity,
    ));

    for a in [1.0, -1.0] {
        let shifted = y0(&|x| xi.value(x) + a)?;
        out.push(AxiomCheck::new(
            Axiom::Translation,
            alloc::format!("a={a:+}"),
            -(shifted - u_xi - a).abs(),
            tol.translation,
        ));
    }

    for theta in [0.25, 0.5, 0.75] {
        let mix = y0(&|x| theta * xi.value(x) + (1.0 - theta) * eta.value(x))?;
        out.push(AxiomCheck::new(
            Axiom::Concavity,
            alloc::format!("theta={theta}"),
            mix - theta * u_xi - (1.0 - theta) * u_eta,
            tol.concavity,
        ));
    }

    let split = ens.steps() / 2;
    let two = two_stage_solve(ens, &|x: f64| xi.value(x), gen, basis, split)?;
    out.push(AxiomCheck::new(
        Axiom::TimeConsistency,
        alloc::format!("split_step={split}"),
        -(two.nested - two.direct).abs(),
        tol.time_consistency,
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_catalogue_entry, CatalogueTag, GrowthParams, OffsetFn};
    use crate::paths::generate;

    fn pair(tag: CatalogueTag) -> (CoreFunction, Generator) {
        build_catalogue_entry(tag, &GrowthParams::default(), OffsetFn::zero()).unwrap()
    }

    #[test]
    fn zero_control_is_plain_mean() {
        let ens = generate(5000, 8, 1, 1.0, 8).unwrap();
        let (f, _) = pair(CatalogueTag::Exponential);
        let xi = |x: f64| x * x;
        let est = penalized_expectation(&ens, &xi, &f, &ConstantControl(vec![0.0])).unwrap();
        let b = ens.state_or_brownian();
        let plain = blocked_moments(5000, |p| b[p * 9 + 8].powi(2) + 8.0 * (1.0 * 0.125)).mean();
        assert_eq!(est.value, ExtendedReal::Finite(plain));
        assert_eq!(est.weights.effective_sample_size, 5000.0);
    }

    #[test]
    fn outside_domain_is_infinite_and_inadmissible() {
        let ens = generate(100, 4, 1, 1.0, 8).unwrap();
        let (f, _) = pair(CatalogueTag::DriftBand);
        let c = ConstantControl(vec![1.5]);
        let est = penalized_expectation(&ens, &|x: f64| x, &f, &c).unwrap();
        assert_eq!(est.value, ExtendedReal::PosInfinity);
        assert_eq!(est.admissible, Admissible::No);
        let r = admissibility_check(&ens, &|x: f64| x, &f, &c).unwrap();
        assert_eq!(r.verdict, Admissible::No);
    }

    #[test]
    fn control_grids() {
        let (f, _) = pair(CatalogueTag::PiecewiseVii);
        let g = constant_control_grid(&f, 50);
        assert_eq!(g.len(), 50);
        assert_eq!(g[0], vec![1.0]);
        assert_eq!(g[49], vec![3.0]);
        let (f, _) = pair(CatalogueTag::DriftBand);
        let g = constant_control_grid(&f, 5);
        assert_eq!(g, vec![vec![-1.0], vec![-0.5], vec![0.0], vec![0.5], vec![1.0]]);
    }

    #[test]
    fn constant_endowment_attains_exactly() {
        let ens = generate(500, 8, 1, 1.0, 2).unwrap();
        let (f, g) = pair(CatalogueTag::Entropic);
        let sol = solve_lsmc(&ens, &|_x: f64| 0.7, &g, BasisSpec::default()).unwrap();
        let r = attainability_check(&sol, &f, &g, &ens).unwrap();
        assert!(r.gap < 1e-12, "{}", r.gap);
        assert!(r.fenchel_young_residual.iter().all(|v| v.abs() < 1e-12));
    }
}
