//! Regression Monte Carlo for the scalar BSDE
//! `Y_t = ξ − ∫_t^T g(s, Z_s) ds + ∫_t^T Z_s·dB_s`
//! and closed-form oracles for the cases with known solutions.
//!
//! Both the `ds` and the `dB` terms carry the opposite sign to the textbook
//! form `Ŷ_t = ξ + ∫ f̂(s, Ẑ_s) ds − ∫ Ẑ_s·dB_s`. The two are the same
//! equation under `Ẑ = −Z` and `f̂(t, ẑ) = −g(t, −ẑ)`; [`solve_standard`]
//! and [`standard_driver`] expose that form.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::model::{CatalogueTag, Generator, GrowthParams};
use crate::par::for_each_row;
use crate::paths::{blocked_moments, PathEnsemble};
use crate::regression::{Design, Projection};
use crate::{Error, Result};

/// Paths per parallel work item when updating a time slice.
const CHUNK: usize = 1024;

/// A terminal payoff `ξ = φ(X_T)`.
pub trait Endowment: Sync {
    fn value(&self, x: f64) -> f64;
}

impl<F: Fn(f64) -> f64 + Sync> Endowment for F {
    fn value(&self, x: f64) -> f64 {
        self(x)
    }
}

/// Regression basis and safeguards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisSpec {
    /// Hermite degree in the standardized state.
    pub degree: usize,
    /// Radius of the ball `Z` is projected onto, if any.
    pub z_clip: Option<f64>,
    /// Clip regressed `Y` to the a-priori range of the solution.
    pub y_clip: bool,
}

impl Default for BasisSpec {
    fn default() -> Self {
        Self {
            degree: 4,
            z_clip: None,
            y_clip: true,
        }
    }
}

impl BasisSpec {
    pub fn family(&self) -> &'static str {
        "hermite"
    }
}

/// Per-step regression diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepDiagnostics {
    /// `R²` of the projection of `Y_{i+1}` on the state at step `i`.
    pub r_squared: f64,
    /// Basis degree actually used.
    pub degree: usize,
    /// True when a singular design forced a lower degree.
    pub degraded: bool,
    /// Paths whose regressed `Y` was clipped to the a-priori range.
    pub y_truncations: usize,
    /// Paths whose `Z` was projected onto the clip ball.
    pub z_clips: usize,
}

/// Per-path `Y` and `Z` on the grid with regression diagnostics.
#[derive(Debug, Clone)]
pub struct BsdeSolution {
    m: usize,
    n: usize,
    d: usize,
    t0: f64,
    dt: f64,
    /// Step-major: `y[step][path]`.
    y: Vec<Vec<f64>>,
    /// Step-major: `z[step][path * d + k]`.
    z: Vec<Vec<f64>>,
    y0: f64,
    y0_std_error: f64,
    basis: BasisSpec,
    steps: Vec<StepDiagnostics>,
}

impl BsdeSolution {
    pub fn paths(&self) -> usize {
        self.m
    }

    pub fn steps(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn time(&self, step: usize) -> f64 {
        self.t0 + step as f64 * self.dt
    }

    pub fn y(&self, path: usize, step: usize) -> f64 {
        self.y[step][path]
    }

    /// `Y` at `step` for all paths.
    pub fn y_slice(&self, step: usize) -> &[f64] {
        &self.y[step]
    }

    pub fn z(&self, path: usize, step: usize) -> &[f64] {
        &self.z[step][path * self.d..(path + 1) * self.d]
    }

    /// `Z` at `step` for all paths, `d` values per path.
    pub fn z_slice(&self, step: usize) -> &[f64] {
        &self.z[step]
    }

    /// Time-0 value: the regression constant at step 0.
    pub fn y0(&self) -> f64 {
        self.y0
    }

    /// Monte Carlo standard error of `Y0`, from the spread of the pathwise
    /// values `ξ − Σ_i g(t_i, Z_i) dt`.
    pub fn y0_std_error(&self) -> f64 {
        self.y0_std_error
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    /// Diagnostics for steps `0..N` (index `i` describes the regression at `t_i`).
    pub fn diagnostics(&self) -> &[StepDiagnostics] {
        &self.steps
    }

    pub fn total_z_clips(&self) -> usize {
        self.steps.iter().map(|s| s.z_clips).sum()
    }

    pub fn total_y_truncations(&self) -> usize {
        self.steps.iter().map(|s| s.y_truncations).sum()
    }

    /// Cross-path mean of `Y` at `step`.
    pub fn mean_y(&self, step: usize) -> f64 {
        blocked_moments(self.m, |p| self.y[step][p]).mean()
    }

    /// Cross-path mean of the first component of `Z` at `step < N`.
    pub fn mean_z(&self, step: usize) -> f64 {
        blocked_moments(self.m, |p| self.z[step][p * self.d]).mean()
    }
}

/// Which sign convention the backward recursion runs in.
#[derive(Clone, Copy, PartialEq)]
enum Convention {
    /// `Z_i = −Ê[ΔY ΔB]/dt`, `Y_i = Ê[Y_{i+1}] − g(t_i, Z_i) dt`.
    Paper,
    /// `Ẑ_i = Ê[ΔY ΔB]/dt`, `Y_i = Ê[Y_{i+1}] + f̂(t_i, Ẑ_i) dt`.
    Standard,
}

/// Solves the BSDE with generator `gen` and terminal value `endowment(X_T)`.
pub fn solve_lsmc<E: Endowment + ?Sized>(
    ens: &PathEnsemble,
    endowment: &E,
    gen: &Generator,
    basis: BasisSpec,
) -> Result<BsdeSolution> {
    backward(
        ens,
        endowment,
        &|t: f64, z: &[f64]| gen.eval(t, z),
        Convention::Paper,
        basis,
    )
}

/// Solves `Ŷ_t = ξ + ∫ f̂(s, Ẑ_s) ds − ∫ Ẑ_s·dB_s`; the returned `Z` is `Ẑ`.
pub fn solve_standard<E, F>(
    ens: &PathEnsemble,
    endowment: &E,
    driver: &F,
    basis: BasisSpec,
) -> Result<BsdeSolution>
where
    E: Endowment + ?Sized,
    F: Fn(f64, &[f64]) -> f64 + Sync,
{
    backward(ens, endowment, driver, Convention::Standard, basis)
}

/// The textbook driver `f̂(t, ẑ) = −g(t, −ẑ)` equivalent to `gen`.
pub fn standard_driver(gen: &Generator) -> impl Fn(f64, &[f64]) -> f64 + Sync + '_ {
    move |t, z| {
        let neg: Vec<f64> = z.iter().map(|v| -v).collect();
        -gen.eval(t, &neg)
    }
}

fn backward<E, F>(
    ens: &PathEnsemble,
    endowment: &E,
    driver: &F,
    convention: Convention,
    basis: BasisSpec,
) -> Result<BsdeSolution>
where
    E: Endowment + ?Sized,
    F: Fn(f64, &[f64]) -> f64 + Sync,
{
    let (m, n, d, dt) = (ens.paths(), ens.steps(), ens.dim(), ens.dt());
    let state = ens.state_or_brownian();
    let column = |step: usize| -> Vec<f64> { (0..m).map(|p| state[p * (n + 1) + step]).collect() };

    let mut y: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    let mut z: Vec<Vec<f64>> = vec![Vec::new(); n];
    let x_t = column(n);
    let terminal: Vec<f64> = x_t.iter().map(|&x| endowment.value(x)).collect();
    if let Some(p) = terminal.iter().position(|v| !v.is_finite()) {
        return Err(Error::Blowup {
            step: n,
            context: alloc::format!("endowment is not finite on path {p}"),
        });
    }
    let xi_min = terminal.iter().copied().fold(f64::INFINITY, f64::min);
    let xi_max = terminal.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    y[n] = terminal;

    // ξ − Σ driver·dt per path: its mean equals Y0 (the regression keeps
    // cross-path means), so its spread gives the Monte Carlo error of Y0.
    let mut pathwise = y[n].clone();
    // Running bound Σ_{j>i} max_p |driver| dt for the a-priori clip range.
    let mut drift_budget = 0.0;
    let mut steps = vec![StepDiagnostics::default(); n];
    let z_sign = match convention {
        Convention::Paper => -1.0,
        Convention::Standard => 1.0,
    };

    for i in (0..n).rev() {
        let t = ens.time(i);
        let x = column(i);
        let design = Design::new(&x, basis.degree)?;
        let next = &y[i + 1];
        let cond = design.fit(&x, |p| next[p]);
        let r_squared = design.r_squared(&x, |p| next[p], &cond);
        let fitted: Vec<f64> = x.iter().map(|&v| cond.predict(v)).collect();

        let mut z_i = vec![0.0; m * d];
        let z_fits: Vec<Projection> = (0..d)
            .map(|k| {
                design.fit(&x, |p| {
                    (next[p] - fitted[p]) * ens.increment(p, i)[k]
                })
            })
            .collect();
        for_each_row(&mut z_i, CHUNK * d, |chunk, rows| {
            for (j, zp) in rows.chunks_mut(d).enumerate() {
                let p = chunk * CHUNK + j;
                for (k, fit) in z_fits.iter().enumerate() {
                    zp[k] = z_sign * fit.predict(x[p]) / dt;
                }
            }
        });
        let mut z_clips = 0;
        if let Some(radius) = basis.z_clip {
            for zp in z_i.chunks_mut(d) {
                let r = libm::sqrt(zp.iter().map(|v| v * v).sum::<f64>());
                if r > radius {
                    zp.iter_mut().for_each(|v| *v *= radius / r);
                    z_clips += 1;
                }
            }
        }

        let (lo, hi) = (xi_min - drift_budget, xi_max + drift_budget);
        let mut y_i = vec![0.0; m];
        let mut drive = vec![0.0; m];
        for_each_row(&mut drive, CHUNK, |chunk, rows| {
            for (j, v) in rows.iter_mut().enumerate() {
                let p = chunk * CHUNK + j;
                *v = driver(t, &z_i[p * d..(p + 1) * d]);
            }
        });
        if let Some(p) = drive.iter().position(|v| !v.is_finite()) {
            return Err(Error::Blowup {
                step: i,
                context: alloc::format!("generator is not finite at Z of path {p}"),
            });
        }
        let mut y_truncations = 0;
        for (p, out) in y_i.iter_mut().enumerate() {
            let mut mean = fitted[p];
            if basis.y_clip && !(lo..=hi).contains(&mean) {
                mean = mean.clamp(lo, hi);
                y_truncations += 1;
            }
            *out = match convention {
                Convention::Paper => mean - drive[p] * dt,
                Convention::Standard => mean + drive[p] * dt,
            };
        }
        if let Some(p) = y_i.iter().position(|v| !v.is_finite()) {
            return Err(Error::Blowup {
                step: i,
                context: alloc::format!("Y is not finite on path {p}"),
            });
        }
        for (acc, v) in pathwise.iter_mut().zip(&drive) {
            match convention {
                Convention::Paper => *acc -= v * dt,
                Convention::Standard => *acc += v * dt,
            }
        }
        drift_budget += drive.iter().fold(0.0f64, |a, v| a.max(v.abs())) * dt;
        steps[i] = StepDiagnostics {
            r_squared,
            degree: design.degree(),
            degraded: design.degraded(),
            y_truncations,
            z_clips,
        };
        y[i] = y_i;
        z[i] = z_i;
    }

    let y0 = blocked_moments(m, |p| y[0][p]).mean();
    let y0_std_error = blocked_moments(m, |p| pathwise[p]).std_error();
    Ok(BsdeSolution {
        m,
        n,
        d,
        t0: ens.start_time(),
        dt,
        y,
        z,
        y0,
        y0_std_error,
        basis,
        steps,
    })
}

/// `−(1/γ) ln Ê[exp(−γξ)]` with its delta-method standard error.
///
/// Evaluated as `min ξ − (1/γ) ln Ê[exp(−γ(ξ − min ξ))]`, so the exponent is
/// never positive and constant samples are returned exactly.
pub fn entropic_oracle(samples: &[f64], gamma: f64) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::Input("no samples".to_string()));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Param(alloc::format!("gamma must be positive, got {gamma}")));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("samples must be finite".to_string()));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let mom = blocked_moments(samples.len(), |i| libm::exp(-gamma * (samples[i] - lo)));
    let mean = mom.mean();
    let value = lo - libm::log(mean) / gamma;
    let se = mom.std_error() / (mean * gamma);
    Ok((value, se))
}

/// Closed-form solution `Y_t = a·B_t + b + rate·(T − t)` for an affine
/// endowment `ξ = a·B_T + b` under a linear generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineSolution {
    pub a: f64,
    pub b: f64,
    pub rate: f64,
    pub horizon: f64,
}

impl AffineSolution {
    pub fn y0(&self) -> f64 {
        self.b + self.rate * self.horizon
    }

    pub fn y(&self, t: f64, brownian: f64) -> f64 {
        self.a * brownian + self.b + self.rate * (self.horizon - t)
    }

    /// `Z` in the paper convention (`dY = g dt − Z dB`).
    pub fn z(&self) -> f64 {
        -self.a
    }
}

/// Oracle for `ξ = a·B_T + b` (one dimension) under `linear_dirac` with
/// anchor `k` and constant offset `h`, or under `drift_band`.
pub fn affine_oracle(
    a: f64,
    b: f64,
    tag: CatalogueTag,
    params: &GrowthParams,
    h: f64,
) -> Result<AffineSolution> {
    if params.dim != 1 {
        return Err(Error::Oracle("affine oracle is one-dimensional".to_string()));
    }
    let rate = match tag {
        CatalogueTag::LinearDirac => a * params.k + h,
        CatalogueTag::DriftBand => -params.gamma * a.abs(),
        other => {
            return Err(Error::Oracle(alloc::format!(
                "no affine closed form for `{other}`"
            )))
        }
    };
    Ok(AffineSolution {
        a,
        b,
        rate,
        horizon: params.horizon,
    })
}

/// `Y0` computed directly and by solving on `[t*, T]`, fitting `x ↦ Y_{t*}`
/// and solving again on `[0, t*]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStage {
    pub direct: f64,
    pub direct_std_error: f64,
    pub nested: f64,
    pub nested_std_error: f64,
}

pub fn two_stage_solve<E: Endowment + ?Sized>(
    ens: &PathEnsemble,
    endowment: &E,
    gen: &Generator,
    basis: BasisSpec,
    split_step: usize,
) -> Result<TwoStage> {
    let n = ens.steps();
    if split_step == 0 || split_step >= n {
        return Err(Error::Param(alloc::format!(
            "split step must lie strictly inside 0..{n}, got {split_step}"
        )));
    }
    let direct = solve_lsmc(ens, endowment, gen, basis)?;
    let late_ens = ens.window(split_step, n)?;
    let late = solve_lsmc(&late_ens, endowment, gen, basis)?;
    let early_ens = ens.window(0, split_step)?;
    let x_split: Vec<f64> = {
        let s = late_ens.state_or_brownian();
        let w = late_ens.steps() + 1;
        (0..ens.paths()).map(|p| s[p * w]).collect()
    };
    let design = Design::new(&x_split, basis.degree)?;
    let value_at_split = design.fit(&x_split, |p| late.y(p, 0));
    let nested = solve_lsmc(&early_ens, &|x: f64| value_at_split.predict(x), gen, basis)?;
    Ok(TwoStage {
        direct: direct.y0(),
        direct_std_error: direct.y0_std_error(),
        nested: nested.y0(),
        nested_std_error: nested.y0_std_error(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_catalogue_entry, OffsetFn};
    use crate::paths::generate;

    fn gen(tag: CatalogueTag, gamma: f64) -> Generator {
        build_catalogue_entry(
            tag,
            &GrowthParams { gamma, ..GrowthParams::default() },
            OffsetFn::zero(),
        )
        .unwrap()
        .1
    }

    #[test]
    fn terminal_condition_is_exact() {
        let ens = generate(2000, 8, 1, 1.0, 3).unwrap();
        let g = gen(CatalogueTag::Entropic, 1.0);
        let sol = solve_lsmc(&ens, &|x: f64| x.abs(), &g, BasisSpec::default()).unwrap();
        let b = ens.state_or_brownian();
        for p in 0..2000 {
            assert_eq!(sol.y(p, 8), b[p * 9 + 8].abs());
        }
    }

    #[test]
    fn drift_band_linear_endowment() {
        let ens = generate(20_000, 16, 1, 1.0, 1).unwrap();
        let sol = solve_lsmc(&ens, &|x: f64| x, &gen(CatalogueTag::DriftBand, 1.0), BasisSpec::default())
            .unwrap();
        assert!((sol.y0() + 1.0).abs() < 0.03, "{}", sol.y0());
        for p in 0..50 {
            assert!((sol.z(p, 3)[0] + 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn standard_form_matches_bitwise() {
        let ens = generate(3000, 8, 1, 1.0, 17).unwrap();
        let g = gen(CatalogueTag::PiecewiseVii, 2.0);
        let xi = |x: f64| (x - 0.3).max(0.0);
        let a = solve_lsmc(&ens, &xi, &g, BasisSpec::default()).unwrap();
        let drv = standard_driver(&g);
        let b = solve_standard(&ens, &xi, &drv, BasisSpec::default()).unwrap();
        for step in 0..8 {
            for p in 0..3000 {
                assert_eq!(a.y(p, step).to_bits(), b.y(p, step).to_bits());
                assert_eq!(a.z(p, step)[0], -b.z(p, step)[0]);
            }
        }
    }

    #[test]
    fn constant_endowment_is_deterministic() {
        let ens = generate(500, 4, 1, 1.0, 2).unwrap();
        let g = gen(CatalogueTag::Entropic, 1.0);
        let sol = solve_lsmc(&ens, &|_x: f64| 2.5, &g, BasisSpec::default()).unwrap();
        assert!((sol.y0() - 2.5).abs() < 1e-12);
        assert!(sol.z(7, 2)[0].abs() < 1e-12);
    }

    #[test]
    fn entropic_oracle_exact_on_constants() {
        for c in [0.1, -3.7, 1e6] {
            assert_eq!(entropic_oracle(&[c; 10], 3.0).unwrap().0, c);
        }
        let (v, _) = entropic_oracle(&[-1e4, 1e4], 1.0).unwrap();
        assert!(v.is_finite());
    }

    #[test]
    fn affine_oracle_examples() {
        let p = GrowthParams { gamma: 1.0, ..GrowthParams::default() };
        assert_eq!(affine_oracle(1.0, 0.0, CatalogueTag::DriftBand, &p, 0.0).unwrap().y0(), -1.0);
        let p2 = GrowthParams { gamma: 0.5, horizon: 2.0, ..GrowthParams::default() };
        assert_eq!(affine_oracle(-2.0, 0.0, CatalogueTag::DriftBand, &p2, 0.0).unwrap().y0(), -2.0);
        let p3 = GrowthParams { k: 0.5, ..p };
        let s = affine_oracle(1.0, 0.0, CatalogueTag::LinearDirac, &p3, 0.2).unwrap();
        assert!((s.y0() - 0.7).abs() < 1e-15);
        let s = affine_oracle(0.0, 3.0, CatalogueTag::LinearDirac, &p3, 0.2).unwrap();
        assert!((s.y0() - 3.2).abs() < 1e-15);
        assert!(matches!(
            affine_oracle(1.0, 0.0, CatalogueTag::Entropic, &p, 0.0),
            Err(Error::Oracle(_))
        ));
    }

    #[test]
    fn two_stage_constant_endowment() {
        let ens = generate(400, 8, 1, 1.0, 4).unwrap();
        let g = gen(CatalogueTag::DriftBand, 1.0);
        let r = two_stage_solve(&ens, &|_x: f64| 1.0, &g, BasisSpec::default(), 4).unwrap();
        assert!((r.direct - 1.0).abs() < 1e-12);
        assert!((r.nested - 1.0).abs() < 1e-12);
    }

    #[test]
    fn z_clip_is_counted() {
        let ens = generate(2000, 8, 1, 1.0, 6).unwrap();
        let g = gen(CatalogueTag::DriftBand, 1.0);
        let basis = BasisSpec { z_clip: Some(0.5), ..BasisSpec::default() };
        let sol = solve_lsmc(&ens, &|x: f64| 2.0 * x, &g, basis).unwrap();
        assert!(sol.total_z_clips() > 0);
    }
}
