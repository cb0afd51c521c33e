//! Acceptance criteria 1–10, one PASS/FAIL line each. Exits nonzero when
//! any criterion fails.
//!
//! Confidence intervals are 95% half-widths, `1.96 × standard error`.

use std::f64::consts::LN_2;
use std::path::Path;
use std::time::Instant;

use dcu::{parse_scenario, run, with_threads};
use dcu_core::bsde::{affine_oracle, entropic_oracle, solve_lsmc, BasisSpec, BsdeSolution};
use dcu_core::conjugate::biconjugate_check;
use dcu_core::duality::{
    attainability_check, axiom_suite, constant_control_grid, evaluate_constant_controls,
    AxiomTolerances,
};
use dcu_core::inequalities::{mc_bound_check, pointwise_suite, InequalityId, McBound};
use dcu_core::model::{build_catalogue_entry, CatalogueTag, CoreFunction, Generator, GrowthParams, OffsetFn};
use dcu_core::paths::{generate, ConstantControl, PathEnsemble};

const M: usize = 200_000;
const N: usize = 64;
const SEED: u64 = 1;
const Z95: f64 = 1.96;

fn ci(se: f64) -> f64 {
    Z95 * se
}

struct Scenario {
    tag: CatalogueTag,
    core: CoreFunction,
    gen: Generator,
    oracle: f64,
    tol: f64,
}

fn scenario(tag: CatalogueTag) -> Scenario {
    let (params, h, oracle, tol) = match tag {
        CatalogueTag::DriftBand => (GrowthParams::default(), 0.0, -1.0, 0.02),
        CatalogueTag::LinearDirac => (GrowthParams { k: 0.5, ..Default::default() }, 0.2, 0.7, 0.02),
        CatalogueTag::Entropic => (GrowthParams::default(), 0.0, -0.5, 0.03),
        _ => (GrowthParams::default(), 0.0, f64::NAN, f64::NAN),
    };
    let (core, gen) = build_catalogue_entry(tag, &params, OffsetFn::constant(h)).expect("catalogue entry");
    Scenario { tag, core, gen, oracle, tol }
}

fn identity(x: f64) -> f64 {
    x
}

fn solve(ens: &PathEnsemble, s: &Scenario) -> BsdeSolution {
    solve_lsmc(ens, &identity, &s.gen, BasisSpec::default()).expect("solve")
}

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, n: usize, pass: bool, what: &str, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!("criterion {n:>2}: {} {what}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn normal_expectation(f: impl Fn(f64) -> f64) -> f64 {
    const INTERVALS: usize = 24_000;
    let (a, b) = (-12.0f64, 12.0f64);
    let h = (b - a) / INTERVALS as f64;
    let mut s = 0.0;
    for i in 0..=INTERVALS {
        let u = a + h * i as f64;
        let w = if i == 0 || i == INTERVALS { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(u) * (-0.5 * u * u).exp();
    }
    s * h / 3.0 / (2.0 * std::f64::consts::PI).sqrt()
}

fn main() {
    let start = Instant::now();
    let mut rep = Report { failures: 0 };
    let ens = generate(M, N, 1, 1.0, SEED).expect("ensemble");
    let oracle_cases = [CatalogueTag::DriftBand, CatalogueTag::LinearDirac, CatalogueTag::Entropic];
    let scenarios: Vec<Scenario> = oracle_cases
        .iter()
        .chain([CatalogueTag::PiecewiseVii].iter())
        .map(|&t| scenario(t))
        .collect();
    let solutions: Vec<BsdeSolution> = scenarios.iter().map(|s| solve(&ens, s)).collect();

    // 1–3: oracle equivalence.
    for (i, s) in scenarios.iter().take(3).enumerate() {
        let sol = &solutions[i];
        let err = (sol.y0() - s.oracle).abs();
        let clips = sol.total_z_clips();
        let mut pass = err <= s.tol && clips == 0;
        let mut detail = format!(
            "Y0 = {:.5} ± {:.5}, oracle {}, |err| = {:.5} ≤ {}, z clips {clips}",
            sol.y0(),
            sol.y0_std_error(),
            s.oracle,
            err,
            s.tol
        );
        match s.tag {
            CatalogueTag::DriftBand | CatalogueTag::LinearDirac => {
                let p = s.core.params();
                let h = if s.tag == CatalogueTag::LinearDirac { 0.2 } else { 0.0 };
                let closed = affine_oracle(1.0, 0.0, s.tag, p, h).expect("affine oracle").y0();
                pass &= (closed - s.oracle).abs() < 1e-12;
            }
            _ => {
                let (brute, se) = entropic_oracle(&ens.terminal_brownian(), 1.0).expect("oracle");
                let quad = -normal_expectation(|u| (-u).exp()).ln();
                let ok = (brute - s.oracle).abs() <= ci(se) && (quad - s.oracle).abs() < 1e-9;
                pass &= ok;
                detail.push_str(&format!(", brute force {brute:.5} ± {:.5} (CI), quadrature {quad:.10}", ci(se)));
            }
        }
        rep.line(i + 1, pass, &format!("oracle {}", s.tag), detail);
    }

    // 4: attainability and constant-control sweep.
    {
        let mut pass = true;
        let mut parts = Vec::new();
        for (s, sol) in scenarios.iter().zip(&solutions) {
            let a = attainability_check(sol, &s.core, &s.gen, &ens).expect("attainability");
            let gap_ok = a.gap <= 3.0 * ci(a.combined_std_error);
            let grid = constant_control_grid(&s.core, 50);
            let evals = evaluate_constant_controls(&ens, sol, &s.core, &grid).expect("controls");
            let floor_ok = evals.iter().all(|e| {
                let comb = e.estimate.std_error.hypot(sol.y0_std_error());
                e.gap_vs_y0 >= -3.0 * ci(comb)
            });
            let max_gap = evals.iter().map(|e| e.gap_vs_y0).fold(f64::NEG_INFINITY, f64::max);
            let spread_ok = max_gap > 0.05;
            pass &= gap_ok && floor_ok && spread_ok;
            parts.push(format!(
                "{}: gap {:.5} vs 3CI {:.5} [{}], {} controls floor [{}], max gap {:.4} [{}]",
                s.tag,
                a.gap,
                3.0 * ci(a.combined_std_error),
                ok(gap_ok),
                evals.len(),
                ok(floor_ok),
                max_gap,
                ok(spread_ok)
            ));
        }
        rep.line(4, pass, "attainability", parts.join("; "));
    }

    // 5: conjugation.
    {
        let q: Vec<f64> = (0..=40_000).map(|i| -200.0 + 0.01 * i as f64).collect();
        let z: Vec<f64> = (0..=1000).map(|i| -5.0 + 0.01 * i as f64).collect();
        let q_inner: Vec<f64> = (0..=800).map(|i| -4.0 + 0.01 * i as f64).collect();
        let z_wide: Vec<f64> = (0..=80_000).map(|i| -400.0 + 0.01 * i as f64).collect();
        let mut pass = true;
        let mut parts = Vec::new();
        let p = GrowthParams::default();
        for tag in [
            CatalogueTag::DriftBand,
            CatalogueTag::Entropic,
            CatalogueTag::CappedQuadratic,
            CatalogueTag::Quartic,
            CatalogueTag::PiecewiseVii,
        ] {
            let (f, g) = build_catalogue_entry(tag, &p, OffsetFn::zero()).expect("entry");
            let num = Generator::from_core_numeric(&f, &q, &z).expect("numeric generator");
            let mut worst = 0.0f64;
            for &zz in &z[1..z.len() - 1] {
                let slope = g.subdifferential(&[zz]).expect("subdifferential").min_norm()[0].abs();
                let tol = 3.0 * 0.01 * slope.max(1.0);
                worst = worst.max((num.eval(0.0, &[zz]) - g.eval(0.0, &[zz])).abs() / tol);
            }
            let bi = biconjugate_check(&f, &q_inner, &z_wide, 3.0 * 0.01 * 5.0).expect("biconjugate");
            pass &= worst <= 1.0 && bi.within_tolerance;
            parts.push(format!("{tag} dev/tol {worst:.3}, f** dev {:.2e}", bi.max_deviation));
        }
        let (f, _) = build_catalogue_entry(CatalogueTag::Exponential, &p, OffsetFn::zero()).expect("entry");
        let num = Generator::from_core_numeric(&f, &q, &z).expect("numeric generator");
        let (mut outer, mut inner) = (0.0f64, 0.0f64);
        for &zz in &z[1..z.len() - 1] {
            let quoted = CatalogueTag::Exponential.quoted_generator(&p, &[zz], 0.0).expect("quoted");
            let dev = (num.eval(0.0, &[zz]) - quoted).abs();
            if zz.abs() >= 1.0 {
                outer = outer.max(dev / (3.0 * 0.01 * zz.abs().ln().max(1.0)));
            } else {
                inner = inner.max(dev);
            }
        }
        pass &= outer <= 1.0;
        parts.push(format!(
            "exponential |z|≥1 dev/tol {outer:.3}; |z|<1 conjugate is −1, quoted |z|(ln|z|−1) differs by up to {inner:.3}"
        ));
        rep.line(5, pass, "conjugation", parts.join("; "));
    }

    // 6: pointwise inequalities.
    {
        let ids = [
            InequalityId::ExpPower,
            InequalityId::ExpLogPower,
            InequalityId::ExpLinear,
            InequalityId::Power,
            InequalityId::Fenchel,
            InequalityId::ClassicalYoung,
            InequalityId::GaussianTail,
            InequalityId::ExpPowerEps,
            InequalityId::ExpLogPowerEps,
        ];
        let reports = pointwise_suite(&ids, 10, 100_000, SEED).expect("inequality suite");
        let violations: usize = reports.iter().map(|r| r.violations).sum();
        let capped = reports.iter().filter(|r| r.threshold.is_some_and(|t| t.capped)).count();
        let worst = reports.iter().map(|r| r.worst_margin).fold(f64::INFINITY, f64::min);
        rep.line(
            6,
            violations == 0,
            "inequalities",
            format!(
                "{} ids × 10 draws × 1e5 samples, {violations} violations, worst relative margin {worst:.3e}, {capped} thresholds at cap",
                ids.len()
            ),
        );
    }

    // 7: stochastic-exponential moment bounds.
    {
        let small = generate(M, 16, 1, 1.0, SEED).expect("ensemble");
        let zero = mc_bound_check(McBound::LlnL, &small, &ConstantControl(vec![0.0])).expect("bound");
        let mut pass = zero.equality_case && (zero.lhs - zero.rhs).abs() <= 1e-15 && (zero.lhs - LN_2).abs() <= 1e-15;
        let mut parts = vec![format!("q≡0 |lhs − rhs| = {:.1e}", (zero.lhs - zero.rhs).abs())];
        for q in [1.0f64, 2.0] {
            let c = ConstantControl(vec![q]);
            let r = mc_bound_check(McBound::LlnL, &small, &c).expect("bound");
            let l = |u: f64| (q * u - 0.5 * q * q).exp();
            let quad = normal_expectation(|u| l(u) * l(u).ln_1p());
            let quad_ok = (r.lhs - quad).abs() <= 3.0 * r.lhs_std_error;
            let holds = r.lhs <= r.rhs + 3.0 * r.lhs_std_error.hypot(r.rhs_std_error);
            let r4 = mc_bound_check(McBound::LlnLPower { alpha_star: 4.0 }, &small, &c).expect("bound");
            pass &= quad_ok && holds && r4.holds;
            parts.push(format!(
                "q≡{q}: LlnL {:.4} ± {:.4} ≤ {:.4} [{}], quadrature {quad:.4} [{}], α*=4 {:.3} ≤ {:.3} [{}]",
                r.lhs,
                r.lhs_std_error,
                r.rhs,
                ok(holds),
                ok(quad_ok),
                r4.lhs,
                r4.rhs,
                ok(r4.holds)
            ));
        }
        rep.line(7, pass, "moment bounds", parts.join("; "));
    }

    // 8: axioms.
    {
        let mut pass = true;
        let mut parts = Vec::new();
        for s in scenarios.iter().filter(|s| matches!(s.tag, CatalogueTag::Entropic | CatalogueTag::DriftBand)) {
            let eta = |x: f64| x.max(0.0);
            let checks = axiom_suite(&ens, &s.gen, &identity, &eta, BasisSpec::default(), AxiomTolerances::default())
                .expect("axioms");
            let all = checks.iter().all(|c| c.passed);
            pass &= all;
            let worst = checks
                .iter()
                .min_by(|a, b| (a.margin + a.tolerance).total_cmp(&(b.margin + b.tolerance)))
                .expect("nonempty");
            parts.push(format!(
                "{}: {} checks, tightest {} {} margin {:.4} (tol {})",
                s.tag,
                checks.len(),
                worst.axiom.label(),
                worst.case,
                worst.margin,
                worst.tolerance
            ));
        }
        rep.line(8, pass, "axioms", parts.join("; "));
    }

    // 9: convergence trend.
    {
        let levels = [(16usize, 12_500usize), (32, 50_000), (64, 200_000)];
        let mut pass = true;
        let mut parts = Vec::new();
        for s in scenarios.iter().take(3) {
            let errs: Vec<(f64, f64)> = levels
                .iter()
                .map(|&(n, m)| {
                    let e = generate(m, n, 1, 1.0, SEED).expect("ensemble");
                    let sol = solve(&e, s);
                    ((sol.y0() - s.oracle).abs(), sol.y0_std_error())
                })
                .collect();
            let increases: Vec<f64> = errs.windows(2).map(|w| w[1].0 - w[0].0).filter(|&d| d > 0.0).collect();
            let ok_trend = errs
                .windows(2)
                .all(|w| w[1].0 <= w[0].0 + ci(w[1].1))
                && increases.len() <= 1;
            pass &= ok_trend;
            parts.push(format!(
                "{}: |err| {}",
                s.tag,
                errs.iter().map(|e| format!("{:.5}", e.0)).collect::<Vec<_>>().join(" → ")
            ));
        }
        rep.line(9, pass, "convergence", parts.join("; "));
    }

    // 10: reproducibility across thread counts.
    {
        let dir = tempfile::tempdir().expect("tempdir");
        let cfg = r#"name = "repro"
[model]
kind = "brownian"
[endowment]
expr = "x"
[core]
tag = "entropic"
[solver]
steps = 32
paths = 20000
seed = 9
[checks]
list = ["duality", "axioms", "inequalities", "admissibility"]
controls = 10
samples = 2000
draws = 2
"#;
        let mut outputs = Vec::new();
        for (i, threads) in [1usize, 4, 8, 1, 4, 8].into_iter().enumerate() {
            let out = dir.path().join(format!("run{i}"));
            let s = parse_scenario(cfg, Path::new("repro.toml"), Some(&out)).expect("scenario");
            let o = with_threads(Some(threads), || run(&s)).expect("pool").expect("run");
            let mut files: Vec<_> = o.files.iter().filter(|p| p.extension().is_some_and(|e| e == "csv")).cloned().collect();
            files.sort();
            outputs.push(files.iter().map(|p| std::fs::read(p).expect("read")).collect::<Vec<_>>());
        }
        let same = outputs.iter().all(|o| *o == outputs[0]);
        rep.line(
            10,
            same && outputs[0].len() == 5,
            "reproducibility",
            format!("{} CSV files byte-identical over 6 runs at 1/4/8 threads: {same}", outputs[0].len()),
        );
    }

    println!(
        "acceptance: {} of 10 criteria passed in {:.1} s",
        10 - rep.failures,
        start.elapsed().as_secs_f64()
    );
    if rep.failures > 0 {
        std::process::exit(1);
    }
}

fn ok(b: bool) -> &'static str {
    if b { "ok" } else { "fail" }
}
