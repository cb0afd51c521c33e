//! Brownian ensembles, forward SDE states, stochastic exponentials and
//! integrability statistics.

use alloc::borrow::Cow;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::par::{for_each_row, map_blocks};
use crate::rng::{PathStream, StreamScheme};
use crate::stats::Moments;
use crate::vector::{dot, norm};
use crate::{Error, Result};

/// Default upper bound on `M·N·d` stored increments (about 1.2 GB).
pub const DEFAULT_CAPACITY: u64 = 150_000_000;

/// `M` paths of a `d`-dimensional Brownian motion on a uniform grid of `N`
/// steps, optionally with a scalar forward state `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    m: usize,
    n: usize,
    d: usize,
    t0: f64,
    horizon: f64,
    dt: f64,
    seed: u64,
    scheme: StreamScheme,
    /// Path-major: `[(path * n + step) * d + k]`.
    increments: Vec<f64>,
    /// Path-major: `[path * (n + 1) + step]`.
    state: Option<Vec<f64>>,
}

/// Simulates `M` paths with `N` steps on `[0, T]` with the default capacity.
pub fn generate(m: usize, n: usize, d: usize, horizon: f64, seed: u64) -> Result<PathEnsemble> {
    generate_capped(m, n, d, horizon, seed, DEFAULT_CAPACITY)
}

pub fn generate_capped(
    m: usize,
    n: usize,
    d: usize,
    horizon: f64,
    seed: u64,
    cap: u64,
) -> Result<PathEnsemble> {
    if m == 0 || n == 0 || d == 0 {
        return Err(Error::Param("M, N and d must all be at least 1".to_string()));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::Param(alloc::format!("horizon must be positive, got {horizon}")));
    }
    let requested = (m as u64)
        .saturating_mul(n as u64)
        .saturating_mul(d as u64);
    if requested > cap {
        return Err(Error::Capacity { requested, cap });
    }
    let dt = horizon / n as f64;
    let sqrt_dt = libm::sqrt(dt);
    let mut increments = vec![0.0; m * n * d];
    for_each_row(&mut increments, n * d, |path, row| {
        let mut stream = PathStream::new(seed, path as u64);
        for x in row.iter_mut() {
            *x = stream.standard_normal() * sqrt_dt;
        }
    });
    Ok(PathEnsemble {
        m,
        n,
        d,
        t0: 0.0,
        horizon,
        dt,
        seed,
        scheme: StreamScheme::ChaCha8PerPath,
        increments,
        state: None,
    })
}

impl PathEnsemble {
    pub fn paths(&self) -> usize {
        self.m
    }

    pub fn steps(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scheme(&self) -> StreamScheme {
        self.scheme
    }

    /// Calendar time of grid node `step`.
    pub fn time(&self, step: usize) -> f64 {
        if step == self.n {
            self.t0 + self.horizon
        } else {
            self.t0 + step as f64 * self.dt
        }
    }

    pub fn start_time(&self) -> f64 {
        self.t0
    }

    /// `ΔB` of `path` over `[t_step, t_{step+1}]`.
    pub fn increment(&self, path: usize, step: usize) -> &[f64] {
        let i = (path * self.n + step) * self.d;
        &self.increments[i..i + self.d]
    }

    /// All increments, path-major.
    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn state(&self) -> Option<&[f64]> {
        self.state.as_deref()
    }

    /// Forward state, or the first Brownian component started at 0 when no
    /// state has been simulated. Path-major, `N + 1` values per path.
    pub fn state_or_brownian(&self) -> Cow<'_, [f64]> {
        match &self.state {
            Some(s) => Cow::Borrowed(s),
            None => Cow::Owned(self.brownian_first_component()),
        }
    }

    fn brownian_first_component(&self) -> Vec<f64> {
        let (n, d) = (self.n, self.d);
        let mut out = vec![0.0; self.m * (n + 1)];
        let incs = &self.increments;
        for_each_row(&mut out, n + 1, |path, row| {
            let mut b = 0.0;
            row[0] = 0.0;
            for step in 0..n {
                b += incs[(path * n + step) * d];
                row[step + 1] = b;
            }
        });
        out
    }

    /// Terminal value `B_T` of every path (all components, path-major).
    pub fn terminal_brownian(&self) -> Vec<f64> {
        let (n, d) = (self.n, self.d);
        let mut out = vec![0.0; self.m * d];
        for (path, row) in out.chunks_mut(d).enumerate() {
            for step in 0..n {
                for (k, r) in row.iter_mut().enumerate() {
                    *r += self.increments[(path * n + step) * d + k];
                }
            }
        }
        out
    }

    /// The sub-ensemble over grid steps `[from, to]`, with its state (the
    /// Brownian component when none was simulated) carried along.
    pub fn window(&self, from: usize, to: usize) -> Result<PathEnsemble> {
        if !(from < to && to <= self.n) {
            return Err(Error::Param(alloc::format!(
                "invalid step window [{from}, {to}] for N = {}",
                self.n
            )));
        }
        let (n, d) = (self.n, self.d);
        let w = to - from;
        let mut increments = Vec::with_capacity(self.m * w * d);
        let state_src = self.state_or_brownian();
        let mut state = Vec::with_capacity(self.m * (w + 1));
        for path in 0..self.m {
            increments.extend_from_slice(
                &self.increments[(path * n + from) * d..(path * n + to) * d],
            );
            state.extend_from_slice(&state_src[path * (n + 1) + from..=path * (n + 1) + to]);
        }
        Ok(PathEnsemble {
            m: self.m,
            n: w,
            d,
            t0: self.time(from),
            horizon: self.time(to) - self.time(from),
            dt: self.dt,
            seed: self.seed,
            scheme: self.scheme,
            increments,
            state: Some(state),
        })
    }
}

/// Drift and volatility of a scalar SDE `dX = b(t,X)dt + σ(t,X)·dB`.
pub trait SdeCoefficients: Sync {
    fn drift(&self, t: f64, x: f64) -> f64;
    /// Writes the `d` volatility components into `out`.
    fn vol(&self, t: f64, x: f64, out: &mut [f64]);
}

/// `X = B¹`: zero drift, unit volatility on the first component.
#[derive(Debug, Clone, Copy, Default)]
pub struct BrownianIdentity;

impl SdeCoefficients for BrownianIdentity {
    fn drift(&self, _t: f64, _x: f64) -> f64 {
        0.0
    }
    fn vol(&self, _t: f64, _x: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        out[0] = 1.0;
    }
}

/// Geometric Brownian motion `dX = bX dt + σX dB¹`.
#[derive(Debug, Clone, Copy)]
pub struct Gbm {
    pub drift: f64,
    pub vol: f64,
}

impl SdeCoefficients for Gbm {
    fn drift(&self, _t: f64, x: f64) -> f64 {
        self.drift * x
    }
    fn vol(&self, _t: f64, x: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        out[0] = self.vol * x;
    }
}

/// Euler–Maruyama states from `x0`.
pub fn forward_sde<C: SdeCoefficients>(mut ens: PathEnsemble, coeff: &C, x0: f64) -> Result<PathEnsemble> {
    let (n, d, dt, t0) = (ens.n, ens.d, ens.dt, ens.t0);
    let mut state = vec![0.0; ens.m * (n + 1)];
    let incs = &ens.increments;
    for_each_row(&mut state, n + 1, |path, row| {
        let mut sig = vec![0.0; d];
        let mut x = x0;
        row[0] = x;
        for step in 0..n {
            let t = t0 + step as f64 * dt;
            coeff.vol(t, x, &mut sig);
            let db = &incs[(path * n + step) * d..(path * n + step + 1) * d];
            x += coeff.drift(t, x) * dt + dot(&sig, db);
            row[step + 1] = x;
        }
    });
    check_finite(&state, n)?;
    ens.state = Some(state);
    Ok(ens)
}

/// GBM through its exact log-scheme:
/// `X_t = x0·exp((b − σ²/2)t + σB¹_t)`.
pub fn forward_gbm_exact(mut ens: PathEnsemble, gbm: Gbm, x0: f64) -> Result<PathEnsemble> {
    let (n, d) = (ens.n, ens.d);
    let times: Vec<f64> = (0..=n).map(|s| ens.time(s) - ens.t0).collect();
    let mut state = vec![0.0; ens.m * (n + 1)];
    let incs = &ens.increments;
    let a = gbm.drift - 0.5 * gbm.vol * gbm.vol;
    for_each_row(&mut state, n + 1, |path, row| {
        let mut b = 0.0;
        row[0] = x0;
        for step in 0..n {
            b += incs[(path * n + step) * d];
            row[step + 1] = x0 * libm::exp(a * times[step + 1] + gbm.vol * b);
        }
    });
    check_finite(&state, n)?;
    ens.state = Some(state);
    Ok(ens)
}

fn check_finite(state: &[f64], n: usize) -> Result<()> {
    let bad = state
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_finite())
        .map(|(i, _)| i % (n + 1))
        .min();
    match bad {
        Some(step) => Err(Error::Blowup {
            step,
            context: "forward state".to_string(),
        }),
        None => Ok(()),
    }
}

/// A drift control `q`, evaluated per path and step.
pub trait Control: Sync {
    /// Writes `q(path, step)` into `out`; `x` is the state at the step start.
    fn value(&self, path: usize, step: usize, t: f64, x: f64, out: &mut [f64]);
    /// A uniform bound on `|q|`, when one is known.
    fn bound(&self) -> Option<f64>;
    /// The value of a control that does not vary with path, step or state.
    fn constant(&self) -> Option<&[f64]> {
        None
    }
}

/// `q ≡ c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantControl(pub Vec<f64>);

impl Control for ConstantControl {
    fn value(&self, _path: usize, _step: usize, _t: f64, _x: f64, out: &mut [f64]) {
        out.copy_from_slice(&self.0);
    }
    fn bound(&self) -> Option<f64> {
        Some(norm(&self.0))
    }
    fn constant(&self) -> Option<&[f64]> {
        Some(&self.0)
    }
}

/// A control `q = φ(t, x)` given by a closure, with an optional bound.
pub struct FnControl<F> {
    f: F,
    bound: Option<f64>,
}

impl<F: Fn(f64, f64, &mut [f64]) + Sync> FnControl<F> {
    pub fn new(f: F, bound: Option<f64>) -> Self {
        Self { f, bound }
    }
}

impl<F: Fn(f64, f64, &mut [f64]) + Sync> Control for FnControl<F> {
    fn value(&self, _path: usize, _step: usize, t: f64, x: f64, out: &mut [f64]) {
        (self.f)(t, x, out)
    }
    fn bound(&self) -> Option<f64> {
        self.bound
    }
}

/// A control stored per path and step, path-major `[(path*N + step)*d + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedControl {
    n: usize,
    d: usize,
    values: Vec<f64>,
    bound: f64,
}

impl TabulatedControl {
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 || !values.len().is_multiple_of(n * d) {
            return Err(Error::Input("control table has the wrong shape".to_string()));
        }
        let bound = values
            .chunks(d)
            .map(norm)
            .fold(0.0f64, |a, b| if b.is_nan() { f64::NAN } else { a.max(b) });
        Ok(Self { n, d, values, bound })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Control for TabulatedControl {
    fn value(&self, path: usize, step: usize, _t: f64, _x: f64, out: &mut [f64]) {
        let i = (path * self.n + step) * self.d;
        out.copy_from_slice(&self.values[i..i + self.d]);
    }
    fn bound(&self) -> Option<f64> {
        self.bound.is_finite().then_some(self.bound)
    }
}

/// Stochastic exponential `L^q` on the grid, with the control that drove it.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityPath {
    m: usize,
    n: usize,
    d: usize,
    /// Path-major `[path * (N + 1) + step]`.
    log_density: Vec<f64>,
    /// Path-major `[(path * N + step) * d + k]`.
    controls: Vec<f64>,
}

impl DensityPath {
    pub fn paths(&self) -> usize {
        self.m
    }

    pub fn steps(&self) -> usize {
        self.n
    }

    pub fn log_density(&self, path: usize, step: usize) -> f64 {
        self.log_density[path * (self.n + 1) + step]
    }

    pub fn density(&self, path: usize, step: usize) -> f64 {
        libm::exp(self.log_density(path, step))
    }

    pub fn control(&self, path: usize, step: usize) -> &[f64] {
        let i = (path * self.n + step) * self.d;
        &self.controls[i..i + self.d]
    }

    /// `L_T` for every path.
    pub fn terminal_weights(&self) -> Vec<f64> {
        (0..self.m).map(|p| self.density(p, self.n)).collect()
    }

    /// `Ê[L_T]` and its standard error.
    pub fn terminal_mean(&self) -> (f64, f64) {
        let m = blocked_moments(self.m, |p| self.density(p, self.n));
        (m.mean(), m.std_error())
    }
}

/// `log L_i = Σ_{j<i} (q_j·ΔB_j − ½|q_j|² dt)` per path, with `q` read at
/// the start of each step.
pub fn stochastic_exponential<C: Control + ?Sized>(ens: &PathEnsemble, control: &C) -> Result<DensityPath> {
    let (m, n, d, dt) = (ens.m, ens.n, ens.d, ens.dt);
    let state = ens.state_or_brownian();
    let mut controls = vec![0.0; m * n * d];
    for_each_row(&mut controls, n * d, |path, row| {
        for step in 0..n {
            control.value(
                path,
                step,
                ens.time(step),
                state[path * (n + 1) + step],
                &mut row[step * d..(step + 1) * d],
            );
        }
    });
    if let Some(i) = controls.iter().position(|v| !v.is_finite()) {
        return Err(Error::Input(alloc::format!(
            "control is not finite on path {} step {}",
            i / (n * d),
            (i / d) % n
        )));
    }
    let mut log_density = vec![0.0; m * (n + 1)];
    for_each_row(&mut log_density, n + 1, |path, row| {
        let mut acc = 0.0;
        row[0] = 0.0;
        for step in 0..n {
            let q = &controls[(path * n + step) * d..(path * n + step + 1) * d];
            let db = ens.increment(path, step);
            acc += dot(q, db) - 0.5 * dot(q, q) * dt;
            row[step + 1] = acc;
        }
    });
    Ok(DensityPath {
        m,
        n,
        d,
        log_density,
        controls,
    })
}

/// Integrability spaces measured by [`space_statistic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpaceFamily {
    /// `|η|(ln(1+|η|))^p`
    LlnLp,
    /// `|η| exp(μ(ln(1+|η|))^p)`
    LexpMuLnLp,
    /// `exp(μ|η|^p) − 1`
    ExpMuLp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Space {
    pub family: SpaceFamily,
    pub mu: f64,
    pub p: f64,
}

impl Space {
    pub fn integrand(&self, eta: f64) -> f64 {
        let a = eta.abs();
        match self.family {
            SpaceFamily::LlnLp => a * libm::pow(libm::log1p(a), self.p),
            SpaceFamily::LexpMuLnLp => a * libm::exp(self.mu * libm::pow(libm::log1p(a), self.p)),
            SpaceFamily::ExpMuLp => libm::expm1(self.mu * libm::pow(a, self.p)),
        }
    }
}

/// Sample mean of the integrand defining `space`.
pub fn space_statistic(samples: &[f64], space: Space) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Input("no samples".to_string()));
    }
    if !(space.mu > 0.0 && space.p > 0.0) {
        return Err(Error::Param("space parameters mu and p must be positive".to_string()));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::Input("samples contain NaN".to_string()));
    }
    let m = blocked_moments(samples.len(), |i| space.integrand(samples[i]));
    Ok(m.mean())
}

/// Moments of `f(0..len)` reduced over fixed blocks in order.
pub(crate) fn blocked_moments<F: Fn(usize) -> f64 + Sync + Send>(len: usize, f: F) -> Moments {
    let parts = map_blocks(len, |a, b| {
        let mut m = Moments::new();
        for i in a..b {
            m.push(f(i));
        }
        m
    });
    let mut total = Moments::new();
    for p in &parts {
        total.merge(p);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regeneration_is_bit_identical() {
        let a = generate(1, 1, 1, 1.0, 7).unwrap();
        let b = generate(1, 1, 1, 1.0, 7).unwrap();
        assert_eq!(a.increments()[0].to_bits(), b.increments()[0].to_bits());
    }

    #[test]
    fn path_draws_do_not_depend_on_path_count() {
        let a = generate(10, 4, 2, 1.0, 3).unwrap();
        let b = generate(1000, 4, 2, 1.0, 3).unwrap();
        assert_eq!(a.increments(), &b.increments()[..a.increments().len()]);
    }

    #[test]
    fn capacity_is_enforced() {
        assert!(matches!(
            generate_capped(100, 100, 1, 1.0, 1, 1000),
            Err(Error::Capacity { requested: 10000, cap: 1000 })
        ));
        assert!(matches!(generate(0, 1, 1, 1.0, 1), Err(Error::Param(_))));
    }

    #[test]
    fn brownian_identity_reproduces_b() {
        let ens = generate(50, 8, 1, 1.0, 11).unwrap();
        let b = ens.state_or_brownian().into_owned();
        let x = forward_sde(ens, &BrownianIdentity, 0.0).unwrap();
        assert_eq!(x.state().unwrap(), &b[..]);
    }

    #[test]
    fn exact_gbm_matches_closed_form() {
        let ens = generate(100, 16, 1, 1.0, 5).unwrap();
        let b = ens.state_or_brownian().into_owned();
        let x = forward_gbm_exact(ens, Gbm { drift: 0.05, vol: 0.2 }, 1.0).unwrap();
        for path in 0..100 {
            for step in 0..=16 {
                let t = step as f64 / 16.0;
                let want = (0.05 * t - 0.5 * 0.04 * t + 0.2 * b[path * 17 + step]).exp();
                assert!((x.state().unwrap()[path * 17 + step] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn blowup_reports_step() {
        struct Explode;
        impl SdeCoefficients for Explode {
            fn drift(&self, _t: f64, x: f64) -> f64 {
                x * 1e300
            }
            fn vol(&self, _t: f64, _x: f64, out: &mut [f64]) {
                out[0] = 0.0;
            }
        }
        let ens = generate(4, 8, 1, 1.0, 5).unwrap();
        match forward_sde(ens, &Explode, 1.0) {
            Err(Error::Blowup { step, .. }) => assert!(step >= 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_control_gives_unit_density() {
        let ens = generate(20, 5, 2, 1.0, 1).unwrap();
        let l = stochastic_exponential(&ens, &ConstantControl(vec![0.0, 0.0])).unwrap();
        assert!(l.terminal_weights().iter().all(|&w| w == 1.0));
        assert_eq!(l.terminal_mean(), (1.0, 0.0));
    }

    #[test]
    fn window_keeps_times_and_increments() {
        let ens = generate(3, 8, 1, 2.0, 9).unwrap();
        let w = ens.window(4, 8).unwrap();
        assert_eq!(w.steps(), 4);
        assert_eq!(w.time(0), 1.0);
        assert_eq!(w.time(4), 2.0);
        assert_eq!(w.increment(2, 1), ens.increment(2, 5));
        let full = ens.state_or_brownian();
        assert_eq!(w.state().unwrap()[2 * 5], full[2 * 9 + 4]);
    }

    #[test]
    fn space_statistic_examples() {
        let zeros = [0.0; 4];
        for family in [SpaceFamily::LlnLp, SpaceFamily::LexpMuLnLp, SpaceFamily::ExpMuLp] {
            let s = Space { family, mu: 1.3, p: 0.7 };
            assert_eq!(space_statistic(&zeros, s).unwrap(), 0.0);
        }
        let ones = [1.0; 3];
        let s = Space { family: SpaceFamily::LexpMuLnLp, mu: 1.0, p: 1.0 };
        assert!((space_statistic(&ones, s).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(space_statistic(&[], s), Err(Error::Input(_))));
    }
}
