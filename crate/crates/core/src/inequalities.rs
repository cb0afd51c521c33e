//! Executable versions of the Young-type inequalities and of the moment
//! bounds for stochastic exponentials used in the integrability arguments.
//!
//! Pointwise inequalities are compared in the log domain: every side is a
//! sum of nonnegative terms whose logarithms are accumulated with
//! log-sum-exp, so neither side overflows on the sampling box.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::{E, LN_2};
use core::fmt;

use crate::paths::{blocked_moments, stochastic_exponential, Control, PathEnsemble};
use crate::rng::PathStream;
use crate::stats::Moments;
use crate::vector::norm;
use crate::{Error, Result};

/// Relative slack below which a pointwise comparison counts as a violation.
pub const RELATIVE_SLACK: f64 = 1e-12;

/// Upper end of the sampling box and of the threshold searches.
pub const SAMPLE_CAP: f64 = 1e3;
/// Lower end of the log-uniform sampling range.
pub const SAMPLE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InequalityId {
    Young,
    ExpPower,
    ExpLogPower,
    ExpPowerEps,
    ExpLogPowerEps,
    ExpLinear,
    GaussianTail,
    Power,
    Fenchel,
    GaussianTailAlt,
    ClassicalYoung,
    LlnL,
    LlnLPower,
    LExpLog,
}

impl InequalityId {
    pub const POINTWISE: [InequalityId; 11] = [
        InequalityId::Young,
        InequalityId::ExpPower,
        InequalityId::ExpLogPower,
        InequalityId::ExpPowerEps,
        InequalityId::ExpLogPowerEps,
        InequalityId::ExpLinear,
        InequalityId::GaussianTail,
        InequalityId::Power,
        InequalityId::Fenchel,
        InequalityId::GaussianTailAlt,
        InequalityId::ClassicalYoung,
    ];

    /// Short label used in reports and configuration files.
    pub fn label(self) -> &'static str {
        match self {
            InequalityId::Young => "young",
            InequalityId::ExpPower => "exp_power",
            InequalityId::ExpLogPower => "exp_log_power",
            InequalityId::ExpPowerEps => "exp_power_eps",
            InequalityId::ExpLogPowerEps => "exp_log_power_eps",
            InequalityId::ExpLinear => "exp_linear",
            InequalityId::GaussianTail => "gaussian_tail",
            InequalityId::Power => "power",
            InequalityId::Fenchel => "fenchel",
            InequalityId::GaussianTailAlt => "gaussian_tail_alt",
            InequalityId::ClassicalYoung => "classical_young",
            InequalityId::LlnL => "lln_l",
            InequalityId::LlnLPower => "lln_l_power",
            InequalityId::LExpLog => "l_exp_log",
        }
    }

    pub fn from_label(s: &str) -> Result<Self> {
        let all = [
            InequalityId::LlnL,
            InequalityId::LlnLPower,
            InequalityId::LExpLog,
        ];
        InequalityId::POINTWISE
            .into_iter()
            .chain(all)
            .find(|i| i.label() == s.trim())
            .ok_or_else(|| Error::Param(alloc::format!("unknown inequality `{s}`")))
    }

    pub fn is_pointwise(self) -> bool {
        !matches!(self, InequalityId::LlnL | InequalityId::LlnLPower | InequalityId::LExpLog)
    }

    /// True when `x` ranges over all reals rather than `x ≥ 0`.
    fn x_real(self) -> bool {
        matches!(self, InequalityId::Fenchel | InequalityId::GaussianTailAlt)
    }

    fn needs_delta_above_one(self) -> bool {
        matches!(
            self,
            InequalityId::ExpLogPowerEps | InequalityId::Power | InequalityId::ClassicalYoung
        )
    }

    pub fn constant_source(self) -> ConstantSource {
        match self {
            InequalityId::ExpPowerEps | InequalityId::ExpLogPowerEps => ConstantSource::ThresholdSearch,
            InequalityId::GaussianTail | InequalityId::LlnLPower | InequalityId::LExpLog => {
                ConstantSource::ProofDerived
            }
            _ => ConstantSource::ClosedForm,
        }
    }
}

impl fmt::Display for InequalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Where an inequality's constant comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantSource {
    /// Stated in closed form.
    ClosedForm,
    /// Reconstructed from the estimate's derivation.
    ProofDerived,
    ThresholdSearch,
}

/// Parameters shared by the inequality family; each inequality reads the
/// ones it needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityParams {
    pub mu: f64,
    pub delta: f64,
    /// Exponent `q > 1` of the ε-forms and of the Gaussian tail bound.
    pub q: f64,
    pub eps: f64,
    pub alpha_star: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub horizon: f64,
}

impl Default for InequalityParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            delta: 2.0,
            q: 2.0,
            eps: 1.0,
            alpha_star: 4.0,
            gamma: 1.0,
            lambda: 1.0,
            horizon: 1.0,
        }
    }
}

impl fmt::Display for InequalityParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mu={};delta={};q={};eps={}",
            self.mu, self.delta, self.q, self.eps
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalitySpec {
    pub id: InequalityId,
    pub params: InequalityParams,
}

impl InequalitySpec {
    pub fn new(id: InequalityId, params: InequalityParams) -> Result<Self> {
        let spec = Self { id, params };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Param(alloc::format!("{name} must be positive, got {v}")))
            }
        };
        pos("mu", p.mu)?;
        pos("delta", p.delta)?;
        pos("eps", p.eps)?;
        pos("gamma", p.gamma)?;
        pos("lambda", p.lambda)?;
        pos("horizon", p.horizon)?;
        if self.id.needs_delta_above_one() && p.delta <= 1.0 {
            return Err(Error::Param(alloc::format!(
                "inequality {} needs delta > 1, got {}",
                self.id,
                p.delta
            )));
        }
        if matches!(
            self.id,
            InequalityId::ExpPowerEps | InequalityId::ExpLogPowerEps | InequalityId::GaussianTail
        ) && !(p.q > 1.0 && p.q.is_finite())
        {
            return Err(Error::Param(alloc::format!(
                "inequality {} needs q > 1, got {}",
                self.id,
                p.q
            )));
        }
        if self.id == InequalityId::LlnLPower && !(p.alpha_star > 2.0) {
            return Err(Error::Param(alloc::format!(
                "alpha* must exceed 2, got {}",
                p.alpha_star
            )));
        }
        Ok(())
    }
}

/// `ln(e^a + e^b)` with `−∞` as the log of zero.
fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + libm::log1p(libm::exp(lo - hi))
}

fn log_sum(terms: &[f64]) -> f64 {
    terms.iter().copied().fold(f64::NEG_INFINITY, log_add)
}

fn ln(x: f64) -> f64 {
    if x == 0.0 {
        f64::NEG_INFINITY
    } else {
        libm::log(x)
    }
}

/// `ln(e^v − 1)` for `v ≥ 0`.
fn ln_expm1(v: f64) -> f64 {
    if v > 30.0 {
        v + libm::log1p(-libm::exp(-v))
    } else {
        ln(libm::expm1(v))
    }
}

/// Threshold `k` beyond which the ε-term dominates, and `ln C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub k: f64,
    pub ln_constant: f64,
    /// True when the dominance fails up to the search cap and `k` was set
    /// to the cap; the resulting constant is then valid on `[0, cap]` only.
    pub capped: bool,
}

/// Searches the smallest `k ≤ cap` with `x ≤ ε·exp((q−1)·φ(x)/μ^δ)` for all
/// `x ∈ [k, cap]`, where `φ(x) = x^δ` for the plain ε-form and
/// `(ln(1+x))^δ` for the logarithmic one.
pub fn threshold_search(id: InequalityId, params: &InequalityParams, cap: f64) -> Result<Threshold> {
    let p = *params;
    let phi = match id {
        InequalityId::ExpPowerEps => |x: f64, d: f64| libm::pow(x, d),
        InequalityId::ExpLogPowerEps => |x: f64, d: f64| libm::pow(libm::log1p(x), d),
        _ => {
            return Err(Error::Param(alloc::format!(
                "inequality {id} has no threshold constant"
            )))
        }
    };
    InequalitySpec::new(id, p)?;
    let mu_d = libm::pow(p.mu, p.delta);
    // h ≥ 0 exactly where the ε-term dominates x.
    let h = |x: f64| ln(p.eps) + (p.q - 1.0) * phi(x, p.delta) / mu_d - ln(x);
    const GRID: usize = 20_000;
    let (lo, hi) = (libm::log(SAMPLE_FLOOR), libm::log(cap));
    let at = |i: usize| libm::exp(lo + (hi - lo) * i as f64 / GRID as f64);
    let last_bad = (0..=GRID).rev().find(|&i| h(at(i)) < 0.0);
    let k = match last_bad {
        None => 0.0,
        Some(GRID) => {
            let k = cap;
            return Ok(Threshold {
                k,
                ln_constant: ln(k) + phi(k, p.delta) / mu_d,
                capped: true,
            });
        }
        Some(i) => {
            let (mut a, mut b) = (at(i), at(i + 1));
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if h(mid) < 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            b
        }
    };
    Ok(Threshold {
        k,
        ln_constant: if k == 0.0 { f64::NEG_INFINITY } else { ln(k) + phi(k, p.delta) / mu_d },
        capped: false,
    })
}

/// `C̄ = exp(μ²/(2(q−1)) + (q+1)(ln 2)²/((q−1)μ²))`, returned as `ln C̄`.
pub fn gaussian_tail_ln_constant(mu: f64, q: f64) -> f64 {
    mu * mu / (2.0 * (q - 1.0)) + (q + 1.0) * LN_2 * LN_2 / ((q - 1.0) * mu * mu)
}

/// Both sides of a pointwise inequality at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEval {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs` (may be infinite when a side overflows).
    pub margin: f64,
    /// `1 − lhs/rhs`, evaluated without overflow; `≥ −slack` passes.
    pub relative_margin: f64,
    pub holds: bool,
}

/// A pointwise inequality with its constants resolved.
#[derive(Debug, Clone, Copy)]
pub struct Pointwise {
    spec: InequalitySpec,
    ln_constant: f64,
    threshold: Option<Threshold>,
}

impl Pointwise {
    pub fn new(spec: InequalitySpec) -> Result<Self> {
        spec.validate()?;
        if !spec.id.is_pointwise() {
            return Err(Error::Param(alloc::format!("{} is not pointwise", spec.id)));
        }
        let p = &spec.params;
        let (ln_constant, threshold) = match spec.id {
            InequalityId::ExpPowerEps | InequalityId::ExpLogPowerEps => {
                let t = threshold_search(spec.id, p, SAMPLE_CAP)?;
                (t.ln_constant, Some(t))
            }
            InequalityId::GaussianTail => (gaussian_tail_ln_constant(p.mu, p.q), None),
            _ => (f64::NEG_INFINITY, None),
        };
        Ok(Self { spec, ln_constant, threshold })
    }

    pub fn spec(&self) -> &InequalitySpec {
        &self.spec
    }

    pub fn threshold(&self) -> Option<Threshold> {
        self.threshold
    }

    /// `ln` of the additive constant (`−∞` when there is none).
    pub fn ln_constant(&self) -> f64 {
        self.ln_constant
    }

    /// Logs of the left side and of the right-side terms.
    fn log_sides(&self, x: f64, y: f64) -> (f64, f64) {
        let p = &self.spec.params;
        let (mu, d, q) = (p.mu, p.delta, p.q);
        let lmu = ln(mu);
        let (lx, ly) = (ln(x), ln(y));
        let l1y = libm::log1p(y);
        let xy = lx + ly;
        match self.spec.id {
            InequalityId::Young => (xy, log_add(lx + ln_expm1(x / mu), lmu + ly + ln(l1y))),
            InequalityId::ExpPower => (
                xy,
                log_add(lx + libm::pow(x / mu, d), lmu + ly + ln(l1y) / d),
            ),
            InequalityId::ExpLogPower => (
                xy,
                log_add(
                    lx + libm::pow(libm::log1p(x) / mu, d),
                    ly + mu * libm::pow(l1y, 1.0 / d),
                ),
            ),
            InequalityId::ExpPowerEps => (
                xy,
                log_sum(&[
                    ln(p.eps) + q * libm::pow(x / mu, d),
                    lmu + ly + ln(l1y) / d,
                    self.ln_constant,
                ]),
            ),
            InequalityId::ExpLogPowerEps => (
                xy,
                log_sum(&[
                    ln(p.eps) + q * libm::pow(libm::log1p(x) / mu, d),
                    ly + mu * libm::pow(l1y, 1.0 / d),
                    self.ln_constant,
                ]),
            ),
            InequalityId::ExpLinear => (xy, log_add(lmu + x / mu, lmu + ly + ln(l1y))),
            InequalityId::GaussianTail => (
                ly + x,
                log_add(self.ln_constant + q * x * x / (mu * mu), ly + mu * libm::sqrt(l1y)),
            ),
            InequalityId::Power => {
                let d_star = d / (d - 1.0);
                (xy, log_add(lmu + d * lx, -lmu / (d - 1.0) + d_star * ly))
            }
            InequalityId::GaussianTailAlt => (
                ly + x,
                log_add(x * x / (mu * mu), mu * mu + ly + mu * libm::sqrt(l1y)),
            ),
            InequalityId::ClassicalYoung => {
                let d_star = d / (d - 1.0);
                (xy, log_add(d * lx - ln(d), d_star * ly - ln(d_star)))
            }
            InequalityId::Fenchel
            | InequalityId::LlnL
            | InequalityId::LlnLPower
            | InequalityId::LExpLog => unreachable!("handled elsewhere"),
        }
    }

    pub fn evaluate(&self, x: f64, y: f64) -> PointEval {
        if self.spec.id == InequalityId::Fenchel {
            // e^x + y(ln y − 1) can be negative, so compare directly.
            let lhs = x * y;
            let rhs = libm::exp(x) + y * (libm::log(y) - 1.0);
            // rhs − lhs = y(e^u − 1 − u) with u = x − ln y, free of cancellation.
            let u = x - libm::log(y);
            let margin = y * (libm::expm1(u) - u);
            let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
            let rel = if rhs.is_infinite() { 1.0 } else { margin / scale };
            return PointEval {
                lhs,
                rhs,
                margin,
                relative_margin: rel,
                holds: rel >= -RELATIVE_SLACK,
            };
        }
        let (l, r) = self.log_sides(x, y);
        let relative_margin = if l == f64::NEG_INFINITY {
            1.0
        } else if r == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            -libm::expm1(l - r)
        };
        let (lhs, rhs) = (libm::exp(l), libm::exp(r));
        PointEval {
            lhs,
            rhs,
            margin: rhs - lhs,
            relative_margin,
            holds: l <= r + RELATIVE_SLACK,
        }
    }
}

/// Result of sampling a pointwise inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseReport {
    pub spec: InequalitySpec,
    pub samples: usize,
    pub violations: usize,
    /// Smallest relative margin `1 − lhs/rhs` seen.
    pub worst_margin: f64,
    pub worst_point: (f64, f64),
    pub first_violation: Option<(f64, f64)>,
    pub threshold: Option<Threshold>,
}

fn log_uniform(stream: &mut PathStream, lo: f64, hi: f64) -> f64 {
    let (a, b) = (libm::log(lo), libm::log(hi));
    libm::exp(a + (b - a) * stream.uniform())
}

/// Evaluates `spec` on `samples` points: the corners of the box (including
/// zero where allowed) followed by log-uniform draws of `x, y` on
/// `[1e-8, 1e3]`, with a random sign for `x` where `x` is real.
pub fn check_pointwise(spec: &InequalitySpec, samples: usize, seed: u64) -> Result<PointwiseReport> {
    let ineq = Pointwise::new(*spec)?;
    let y_floor = if spec.id == InequalityId::Fenchel { SAMPLE_FLOOR } else { 0.0 };
    let corners = [0.0, SAMPLE_FLOOR, 1.0, SAMPLE_CAP];
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(samples);
    'outer: for &x in &corners {
        for &y in &corners {
            if points.len() == samples {
                break 'outer;
            }
            points.push((x, y.max(y_floor)));
        }
    }
    let mut stream = PathStream::new(seed, 0);
    while points.len() < samples {
        let mut x = log_uniform(&mut stream, SAMPLE_FLOOR, SAMPLE_CAP);
        let y = log_uniform(&mut stream, SAMPLE_FLOOR, SAMPLE_CAP);
        if spec.id.x_real() && stream.uniform() < 0.5 {
            x = -x;
        }
        points.push((x, y));
    }
    let mut report = PointwiseReport {
        spec: *spec,
        samples: points.len(),
        violations: 0,
        worst_margin: f64::INFINITY,
        worst_point: (f64::NAN, f64::NAN),
        first_violation: None,
        threshold: ineq.threshold(),
    };
    for &(x, y) in &points {
        let e = ineq.evaluate(x, y);
        if !(e.relative_margin >= report.worst_margin) {
            report.worst_margin = e.relative_margin;
            report.worst_point = (x, y);
        }
        if !e.holds {
            report.violations += 1;
            report.first_violation.get_or_insert((x, y));
        }
    }
    Ok(report)
}

/// Draws parameters for `id` from the standard ranges: `μ ∈ [0.1, 10]`,
/// `δ ∈ [0.2, 5]` (`(1, 5]` where `δ > 1` is required), `q ∈ (1, 4]` and
/// `ε ∈ [0.01, 10]`, log-uniform except `q`.
pub fn draw_params(id: InequalityId, seed: u64, draw: u64) -> InequalityParams {
    let mut s = PathStream::new(seed, draw + 1);
    let mu = log_uniform(&mut s, 0.1, 10.0);
    let delta = if id.needs_delta_above_one() {
        1.0 + 4.0 * (1.0 - s.uniform())
    } else {
        log_uniform(&mut s, 0.2, 5.0)
    };
    let q = 1.0 + 3.0 * (1.0 - s.uniform());
    let eps = log_uniform(&mut s, 0.01, 10.0);
    InequalityParams {
        mu,
        delta,
        q,
        eps,
        ..InequalityParams::default()
    }
}

/// Runs [`check_pointwise`] over `draws` parameter draws for each id.
pub fn pointwise_suite(
    ids: &[InequalityId],
    draws: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<PointwiseReport>> {
    let mut out = Vec::with_capacity(ids.len() * draws);
    for &id in ids {
        for draw in 0..draws {
            let params = draw_params(id, seed, draw as u64);
            let spec = InequalitySpec::new(id, params)?;
            out.push(check_pointwise(&spec, samples, seed ^ (draw as u64 + 1) << 32)?);
        }
    }
    Ok(out)
}

/// Which moment bound to check on an ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum McBound {
    /// `E[L ln(1+L)] ≤ ½E∫L|q|² + ln 2`.
    LlnL,
    /// `E[L (ln(1+L))^{α*/2}] ≤ ((α*/4)E∫L|q|^{α*} + e)·exp(α*(α*−2)T/8)`.
    LlnLPower { alpha_star: f64 },
    /// `E[L exp(μ(ln(1+L))^{1/(1+2λ)})]` against the Gronwall bound and its
    /// ε-form.
    LExpLog { mu: f64, eps: f64, gamma: f64, lambda: f64 },
}

impl McBound {
    pub fn id(&self) -> InequalityId {
        match self {
            McBound::LlnL => InequalityId::LlnL,
            McBound::LlnLPower { .. } => InequalityId::LlnLPower,
            McBound::LExpLog { .. } => InequalityId::LExpLog,
        }
    }
}

/// Constants of the exponential-log moment bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LExpLogConstants {
    /// `sup_{x>1} [γ²x(ln(1+x))^{2λ} − 2γ²x(ln x)^{2λ}]⁺`.
    pub k_bar: f64,
    /// Shift of the test function `(k̃ + x)exp(μ(ln(k̃+x))^{1/(1+2λ)})`.
    pub k_tilde: f64,
    /// Gronwall factor `exp(2γ²μ^{2λ+1}T/(1+2λ))`.
    pub gronwall: f64,
    /// Coefficient of `E∫L|q|²exp(γ^{-1/λ}|q|^{1/λ})` in the proof form.
    pub integral_coefficient: f64,
    /// Additive constant of the proof form.
    pub additive: f64,
    /// `sup_x [C x² e^{a x^{1/λ}} − ε e^{2a x^{1/λ}}]⁺` with `a = γ^{-1/λ}`.
    pub c_bar_eps: f64,
}

/// `k̄ = sup_{x>1} [γ²x(ln(1+x))^{2λ} − 2γ²x(ln x)^{2λ}]⁺` on a log grid.
pub fn k_bar(gamma: f64, lambda: f64) -> f64 {
    let g2 = gamma * gamma;
    let f = |x: f64| {
        g2 * x * libm::pow(libm::log1p(x), 2.0 * lambda)
            - 2.0 * g2 * x * libm::pow(libm::log(x), 2.0 * lambda)
    };
    let mut best = 0.0f64;
    let (lo, hi) = (0.0f64, libm::log(1e12));
    const GRID: usize = 200_000;
    for i in 1..=GRID {
        let x = libm::exp(lo + (hi - lo) * i as f64 / GRID as f64);
        best = best.max(f(x));
    }
    best
}

/// Smallest `k̃` on the ladder `2, 4, 8, …` for which the first two
/// derivatives of the test function satisfy the bounds used in the
/// Gronwall argument on a log grid of `x ∈ [1e-8, 1e8]`, and
/// `μ(ln k̃)^{1/(1+2λ)} > 1`.
pub fn k_tilde(mu: f64, lambda: f64) -> Result<f64> {
    let r = 1.0 / (1.0 + 2.0 * lambda);
    let s = 2.0 * lambda * r;
    let ok = |k: f64| -> bool {
        if mu * libm::pow(libm::log(k), r) <= 1.0 {
            return false;
        }
        const GRID: usize = 4000;
        let (lo, hi) = (libm::log(1e-8), libm::log(1e8));
        (0..=GRID).all(|i| {
            let x = libm::exp(lo + (hi - lo) * i as f64 / GRID as f64);
            let lk = libm::log(k + x);
            let e = libm::exp(mu * libm::pow(lk, r));
            let l = (k + x) * e;
            let d1 = l * (mu * r + libm::pow(lk, s)) / ((k + x) * libm::pow(lk, s));
            let bracket = lk + mu * r * libm::pow(lk, r) - s;
            let d2 = l * mu * r * bracket / ((k + x) * (k + x) * libm::pow(lk, 1.0 + s));
            let cap = 2.0 * mu * r * e / (x * libm::pow(lk, s));
            d1 > 0.0 && d2 > 0.0 && d2 < cap
        })
    };
    let mut k = 2.0;
    while k < 1e300 {
        if ok(k) {
            return Ok(k);
        }
        k *= 2.0;
    }
    Err(Error::Param("no admissible test-function shift found".to_string()))
}

pub fn lexplog_constants(mu: f64, eps: f64, gamma: f64, lambda: f64, horizon: f64) -> Result<LExpLogConstants> {
    let k_bar = k_bar(gamma, lambda);
    let k_tilde = k_tilde(mu, lambda)?;
    let r = 1.0 / (1.0 + 2.0 * lambda);
    let gronwall = libm::exp(2.0 * gamma * gamma * libm::pow(mu, 2.0 * lambda + 1.0) * horizon * r);
    let integral_coefficient = gronwall * mu * r;
    let additive = gronwall
        * (mu * k_bar * horizon * r + k_tilde * libm::exp(mu * libm::pow(libm::log(k_tilde), r)));
    // sup over u = a x^{1/λ} ≥ 0 of C (u/a)^{2λ} e^u − ε e^{2u}.
    let a = libm::pow(gamma, -1.0 / lambda);
    let mut c_bar_eps = 0.0f64;
    const GRID: usize = 400_000;
    for i in 0..=GRID {
        let u = 300.0 * i as f64 / GRID as f64;
        let v = integral_coefficient * libm::pow(u / a, 2.0 * lambda) * libm::exp(u)
            - eps * libm::exp(2.0 * u);
        c_bar_eps = c_bar_eps.max(v);
    }
    Ok(LExpLogConstants {
        k_bar,
        k_tilde,
        gronwall,
        integral_coefficient,
        additive,
        c_bar_eps,
    })
}

/// Monte Carlo estimates of both sides of a moment bound.
#[derive(Debug, Clone, PartialEq)]
pub struct McBoundReport {
    pub bound: McBound,
    pub lhs: f64,
    pub lhs_std_error: f64,
    pub rhs: f64,
    pub rhs_std_error: f64,
    /// `lhs ≤ rhs + 3·sqrt(se_lhs² + se_rhs²)`.
    pub holds: bool,
    /// True when the control vanishes identically (equality case of the
    /// `L ln(1+L)` bound).
    pub equality_case: bool,
    /// For the exponential-log bound: the ε-form right side.
    pub eps_rhs: Option<f64>,
    pub constants: Option<LExpLogConstants>,
}

/// Estimates both sides of `bound` under the density of `control`, with the
/// time integral as a left-point sum over the grid.
pub fn mc_bound_check<C: Control + ?Sized>(
    bound: McBound,
    ens: &PathEnsemble,
    control: &C,
) -> Result<McBoundReport> {
    let Some(q_max) = control.bound() else {
        return Err(Error::RejectedControl(
            "moment bounds need a bounded control".to_string(),
        ));
    };
    let density = stochastic_exponential(ens, control)?;
    let (m, n, dt, horizon) = (ens.paths(), ens.steps(), ens.dt(), ens.horizon());
    let integral = |phi: &(dyn Fn(f64) -> f64 + Sync)| -> Moments {
        blocked_moments(m, |p| {
            let mut s = 0.0;
            for i in 0..n {
                s += density.density(p, i) * phi(norm(density.control(p, i))) * dt;
            }
            s
        })
    };
    let lhs_of = |psi: &(dyn Fn(f64) -> f64 + Sync)| blocked_moments(m, |p| psi(density.density(p, n)));
    let equality_case = q_max == 0.0;
    let combine = |a: f64, b: f64| libm::sqrt(a * a + b * b);

    let (lhs, rhs, rhs_se, eps_rhs, constants) = match bound {
        McBound::LlnL => {
            let lhs = lhs_of(&|l| l * libm::log1p(l));
            let int = integral(&|r| r * r);
            (lhs, 0.5 * int.mean() + LN_2, 0.5 * int.std_error(), None, None)
        }
        McBound::LlnLPower { alpha_star } => {
            if !(alpha_star > 2.0) {
                return Err(Error::Param(alloc::format!("alpha* must exceed 2, got {alpha_star}")));
            }
            let lhs = lhs_of(&|l| l * libm::pow(libm::log1p(l), alpha_star / 2.0));
            let int = integral(&|r| libm::pow(r, alpha_star));
            let growth = libm::exp(alpha_star * (alpha_star - 2.0) * horizon / 8.0);
            let rhs = (alpha_star / 4.0 * int.mean() + E) * growth;
            (lhs, rhs, alpha_star / 4.0 * int.std_error() * growth, None, None)
        }
        McBound::LExpLog { mu, eps, gamma, lambda } => {
            let c = lexplog_constants(mu, eps, gamma, lambda, horizon)?;
            let r = 1.0 / (1.0 + 2.0 * lambda);
            let a = libm::pow(gamma, -1.0 / lambda);
            let lhs = lhs_of(&|l| l * libm::exp(mu * libm::pow(libm::log1p(l), r)));
            let proof = integral(&|x| x * x * libm::exp(a * libm::pow(x, 1.0 / lambda)));
            let rhs = c.integral_coefficient * proof.mean() + c.additive;
            let eps_int = integral(&|x| libm::exp(2.0 * a * libm::pow(x, 1.0 / lambda)));
            let eps_rhs = eps * eps_int.mean() + c.additive + c.c_bar_eps * horizon;
            (
                lhs,
                rhs,
                c.integral_coefficient * proof.std_error(),
                Some(eps_rhs),
                Some(c),
            )
        }
    };
    let slack = 3.0 * combine(lhs.std_error(), rhs_se);
    let holds = lhs.mean() <= rhs + slack && eps_rhs.is_none_or(|e| lhs.mean() <= e + slack);
    Ok(McBoundReport {
        bound,
        lhs: lhs.mean(),
        lhs_std_error: lhs.std_error(),
        rhs,
        rhs_std_error: rhs_se,
        holds,
        equality_case,
        eps_rhs,
        constants,
    })
}

/// Formats `report` parameters as `key=value` pairs separated by `;`.
pub fn describe(spec: &InequalitySpec) -> String {
    spec.params.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{generate, ConstantControl, FnControl};
    use alloc::vec;

    fn spec(id: InequalityId, mu: f64, delta: f64, q: f64) -> Pointwise {
        Pointwise::new(InequalitySpec {
            id,
            params: InequalityParams { mu, delta, q, ..Default::default() },
        })
        .unwrap()
    }

    #[test]
    fn point_examples() {
        let e = spec(InequalityId::ExpLinear, 1.0, 2.0, 2.0).evaluate(0.0, 0.0);
        assert_eq!((e.lhs, e.rhs, e.margin), (0.0, 1.0, 1.0));
        let e = spec(InequalityId::Power, 0.5, 2.0, 2.0).evaluate(2.0, 1.0);
        assert!((e.lhs - 2.0).abs() < 1e-12 && (e.rhs - 4.0).abs() < 1e-12);
        let g = spec(InequalityId::GaussianTail, 1.0, 2.0, 2.0);
        let e = g.evaluate(0.0, 1.0);
        let want = (0.5 + 3.0 * LN_2 * LN_2).exp() + LN_2.sqrt().exp();
        assert!((e.rhs - want).abs() < 1e-12 * want);
        assert!(e.holds && (e.lhs - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fenchel_handles_negative_x() {
        let f = spec(InequalityId::Fenchel, 1.0, 2.0, 2.0);
        assert!(f.evaluate(-3.0, 0.5).holds);
        // Equality at y = e^x.
        let e = f.evaluate(1.0, 1f64.exp());
        assert!(e.margin.abs() < 1e-12);
    }

    #[test]
    fn threshold_decreases_with_eps() {
        let mut last = f64::INFINITY;
        for eps in [0.01, 0.1, 1.0, 10.0] {
            let p = InequalityParams { mu: 2.0, delta: 1.5, q: 1.5, eps, ..Default::default() };
            let t = threshold_search(InequalityId::ExpPowerEps, &p, SAMPLE_CAP).unwrap();
            assert!(t.k <= last);
            last = t.k;
        }
    }

    #[test]
    fn sampled_suites_have_no_violations() {
        let r = pointwise_suite(&InequalityId::POINTWISE, 2, 2000, 5).unwrap();
        for rep in r {
            assert_eq!(rep.violations, 0, "{} {:?}", rep.spec.id, rep.first_violation);
        }
    }

    #[test]
    fn delta_and_q_constraints() {
        let p = InequalityParams { delta: 0.5, ..Default::default() };
        assert!(InequalitySpec::new(InequalityId::Power, p).is_err());
        let p = InequalityParams { q: 1.0, ..Default::default() };
        assert!(InequalitySpec::new(InequalityId::GaussianTail, p).is_err());
    }

    #[test]
    fn lln_l_equality_at_zero_control() {
        let ens = generate(1000, 4, 1, 1.0, 3).unwrap();
        let r = mc_bound_check(McBound::LlnL, &ens, &ConstantControl(vec![0.0])).unwrap();
        assert!(r.equality_case);
        assert!((r.lhs - r.rhs).abs() <= 1e-15);
        let r = mc_bound_check(
            McBound::LlnLPower { alpha_star: 4.0 },
            &ens,
            &ConstantControl(vec![0.0]),
        )
        .unwrap();
        assert!((r.lhs - LN_2 * LN_2).abs() < 1e-15 && r.holds);
    }

    #[test]
    fn unbounded_control_rejected() {
        let ens = generate(10, 2, 1, 1.0, 3).unwrap();
        let c = FnControl::new(|_t: f64, x: f64, out: &mut [f64]| out[0] = x, None);
        assert!(matches!(
            mc_bound_check(McBound::LlnL, &ens, &c),
            Err(Error::RejectedControl(_))
        ));
    }

    #[test]
    fn lexplog_constants_are_finite() {
        let c = lexplog_constants(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(c.k_bar > 0.0 && c.k_bar.is_finite());
        assert!(c.k_tilde >= 2.0);
        assert!(c.additive.is_finite() && c.c_bar_eps.is_finite());
    }
}
