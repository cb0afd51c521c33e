//! Core penalty functions `f`, their conjugate generators `g`, growth classes
//! and the offset bookkeeping `h ↦ h̄`.
//!
//! Core functions are deterministic in `(t, q)`: time enters only through
//! additive offset maps, and the anchor `q̄` is a constant vector.

mod catalogue;
mod growth;

use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::conjugate::{legendre_transform, Subdifferential, TabulatedConvexFunction};
use crate::{Error, ExtendedReal, Result};

pub use catalogue::{build_catalogue_entry, build_linear_dirac, CatalogueTag};
pub(crate) use catalogue::ClosedForm;
pub use growth::{check_growth, BoundKind, GridPoint, GrowthCheck, GrowthFailure, GrowthReport};

/// Constants of the growth conditions: `γ, λ, c > 0`, `α ∈ (1, 2)` and the
/// anchor bound `k ≥ 0`, together with the dimension and horizon of the run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthParams {
    pub gamma: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub c: f64,
    pub k: f64,
    pub dim: usize,
    pub horizon: f64,
}

impl Default for GrowthParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            lambda: 1.0,
            alpha: 1.5,
            c: 1.0,
            k: 0.0,
            dim: 1,
            horizon: 1.0,
        }
    }
}

impl GrowthParams {
    /// `α* = α / (α − 1)`, the Hölder conjugate of `α`.
    pub fn alpha_star(&self) -> f64 {
        self.alpha / (self.alpha - 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Param(alloc::format!("{name} must be positive, got {v}")))
            }
        };
        positive("gamma", self.gamma)?;
        positive("lambda", self.lambda)?;
        positive("c", self.c)?;
        positive("horizon", self.horizon)?;
        if !(self.alpha > 1.0 && self.alpha < 2.0) {
            return Err(Error::Param(alloc::format!(
                "alpha must lie in (1, 2), got {}",
                self.alpha
            )));
        }
        if !(self.k.is_finite() && self.k >= 0.0) {
            return Err(Error::Param(alloc::format!("k must be nonnegative, got {}", self.k)));
        }
        if self.dim == 0 {
            return Err(Error::Param("dimension must be at least 1".to_string()));
        }
        Ok(())
    }
}

/// Lower-growth class of a core function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoreClass {
    /// `f ≥ |q|²/(2γ) − h`
    A1,
    /// `f ≥ γ^{-1/(α-1)} |q|^{α*} − h`
    A2,
    /// `f ≥ c·exp(2γ^{-1/λ}|q|^{1/λ}) − h`
    A3,
    /// `f ≥ −h` and `f = +∞` outside the ball of radius `γ`
    A4,
    Unclassified,
}

/// Upper-growth class of a generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorClass {
    /// quadratic: `|g| ≤ h̄ + γ|z|²/2`
    H1,
    /// sub-quadratic: `|g| ≤ h̄ + γ|z|^α`
    H2,
    /// super-linear: `|g| ≤ h̄ + γ|z|(ln(e + |z|))^λ`
    H3,
    /// linear: `|g| ≤ h̄ + γ|z|`
    H4,
    Unclassified,
}

impl CoreClass {
    pub fn generator_class(self) -> GeneratorClass {
        match self {
            CoreClass::A1 => GeneratorClass::H1,
            CoreClass::A2 => GeneratorClass::H2,
            CoreClass::A3 => GeneratorClass::H3,
            CoreClass::A4 => GeneratorClass::H4,
            CoreClass::Unclassified => GeneratorClass::Unclassified,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CoreClass::A1 => "A1",
            CoreClass::A2 => "A2",
            CoreClass::A3 => "A3",
            CoreClass::A4 => "A4",
            CoreClass::Unclassified => "unclassified",
        }
    }
}

impl core::str::FromStr for CoreClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A1" => Ok(CoreClass::A1),
            "A2" => Ok(CoreClass::A2),
            "A3" => Ok(CoreClass::A3),
            "A4" => Ok(CoreClass::A4),
            "UNCLASSIFIED" | "" => Ok(CoreClass::Unclassified),
            other => Err(Error::Param(alloc::format!("unknown growth class `{other}`"))),
        }
    }
}

impl GeneratorClass {
    pub fn label(self) -> &'static str {
        match self {
            GeneratorClass::H1 => "H1",
            GeneratorClass::H2 => "H2",
            GeneratorClass::H3 => "H3",
            GeneratorClass::H4 => "H4",
            GeneratorClass::Unclassified => "unclassified",
        }
    }
}

/// A deterministic nonnegative map `t ↦ h_t`.
#[derive(Clone)]
pub struct OffsetFn(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl OffsetFn {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        OffsetFn(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        OffsetFn::new(move |_| c)
    }

    pub fn zero() -> Self {
        OffsetFn::constant(0.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.0)(t)
    }

    /// `t ↦ self(t) + c`.
    pub fn shifted(&self, c: f64) -> Self {
        let inner = self.clone();
        OffsetFn::new(move |t| inner.eval(t) + c)
    }
}

impl fmt::Debug for OffsetFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OffsetFn(h(0) = {})", self.eval(0.0))
    }
}

/// Effective domain `{q : f(t, q) < +∞}` of a core function.
#[derive(Debug, Clone, PartialEq)]
pub enum EffectiveDomain {
    Whole,
    Ball { radius: f64 },
    Point(Vec<f64>),
    /// One-dimensional interval; bounds may be infinite.
    Interval { lo: f64, hi: f64 },
}

#[derive(Debug, Clone)]
pub(crate) enum Form {
    Closed(ClosedForm),
    Tabulated(TabulatedConvexFunction),
}

/// Convex, lower semicontinuous penalty `f(t, q) = base(q) + shift(t)`.
#[derive(Debug, Clone)]
pub struct CoreFunction {
    pub(crate) form: Form,
    pub(crate) shift: OffsetFn,
    h: OffsetFn,
    anchor: Vec<f64>,
    tag: Option<CatalogueTag>,
    class: CoreClass,
    params: GrowthParams,
}

impl CoreFunction {
    /// A core function given by a table in `q` (one-dimensional, or a radial
    /// profile in `|q|` when the table is radial).
    pub fn tabulated(
        table: TabulatedConvexFunction,
        h: OffsetFn,
        anchor: Vec<f64>,
        class: CoreClass,
        params: GrowthParams,
    ) -> Result<Self> {
        params.validate()?;
        if anchor.len() != params.dim {
            return Err(Error::Param(alloc::format!(
                "anchor has dimension {}, expected {}",
                anchor.len(),
                params.dim
            )));
        }
        if params.dim > 1 && !table.is_radial() {
            return Err(Error::Grid(
                "multi-dimensional core functions must be radial".to_string(),
            ));
        }
        Ok(Self {
            form: Form::Tabulated(table),
            shift: OffsetFn::zero(),
            h,
            anchor,
            tag: None,
            class,
            params,
        })
    }

    pub(crate) fn closed(
        form: ClosedForm,
        shift: OffsetFn,
        h: OffsetFn,
        anchor: Vec<f64>,
        tag: CatalogueTag,
        class: CoreClass,
        params: GrowthParams,
    ) -> Self {
        Self {
            form: Form::Closed(form),
            shift,
            h,
            anchor,
            tag: Some(tag),
            class,
            params,
        }
    }

    pub fn eval(&self, t: f64, q: &[f64]) -> ExtendedReal {
        let base = match &self.form {
            Form::Closed(c) => c.core_value(q),
            Form::Tabulated(tab) => tab.eval_point(q).unwrap_or(ExtendedReal::PosInfinity),
        };
        base.add_finite(self.shift.eval(t))
    }

    pub fn in_domain(&self, t: f64, q: &[f64]) -> bool {
        self.eval(t, q).is_finite()
    }

    pub fn effective_domain(&self) -> EffectiveDomain {
        match &self.form {
            Form::Closed(c) => c.effective_domain(),
            Form::Tabulated(tab) => {
                let (lo, hi) = tab.finite_range().unwrap_or((f64::NAN, f64::NAN));
                if tab.is_radial() {
                    EffectiveDomain::Ball { radius: hi }
                } else {
                    EffectiveDomain::Interval { lo, hi }
                }
            }
        }
    }

    /// True when `f(t, q)` depends on `q` only through `|q|`.
    pub fn is_radial(&self) -> bool {
        match &self.form {
            Form::Closed(c) => c.is_radial(),
            Form::Tabulated(tab) => tab.is_radial(),
        }
    }

    pub fn h(&self) -> &OffsetFn {
        &self.h
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn tag(&self) -> Option<CatalogueTag> {
        self.tag
    }

    pub fn class(&self) -> CoreClass {
        self.class
    }

    pub fn params(&self) -> &GrowthParams {
        &self.params
    }

    /// Tabulates `f(t, ·)` on `grid`: as a radial profile in `|q|` when `f` is
    /// radial and the grid is nonnegative, otherwise along the first axis.
    pub fn tabulate(&self, t: f64, grid: &[f64]) -> Result<TabulatedConvexFunction> {
        let radial = self.is_radial() && grid.first().is_some_and(|&g| g >= 0.0);
        if self.params.dim > 1 && !radial {
            return Err(Error::Grid(
                "a non-radial multi-dimensional core cannot be tabulated on one axis".to_string(),
            ));
        }
        let mut point = vec![0.0; self.params.dim];
        let values = grid
            .iter()
            .map(|&x| {
                point[0] = x;
                self.eval(t, &point)
            })
            .collect();
        TabulatedConvexFunction::new(grid.to_vec(), values, radial)
    }
}

/// Convex generator `g(t, z) = base(z) − shift(t)`, the conjugate of a core
/// function, with its upper-growth offset `h̄`.
#[derive(Debug, Clone)]
pub struct Generator {
    pub(crate) form: Form,
    shift: OffsetFn,
    h: OffsetFn,
    hbar: OffsetFn,
    class: GeneratorClass,
    params: GrowthParams,
    tag: Option<CatalogueTag>,
    extrapolated_points: usize,
}

impl Generator {
    /// Generator obtained by numerically conjugating `core` on `q_grid` and
    /// tabulating the result on `z_grid`.
    pub fn from_core_numeric(core: &CoreFunction, q_grid: &[f64], z_grid: &[f64]) -> Result<Self> {
        // The time-dependent shift is carried separately: conj(f + s) = conj(f) − s.
        let mut base = core.clone();
        base.shift = OffsetFn::zero();
        let table = base.tabulate(0.0, q_grid)?;
        let conj = legendre_transform(&table, z_grid)?;
        let extrapolated_points = conj.extrapolated.iter().filter(|&&e| e).count();
        let hbar = compute_hbar(core, core.params())
            .unwrap_or_else(|_| core.h().clone());
        Ok(Self {
            form: Form::Tabulated(conj.table),
            shift: core.shift.clone(),
            h: core.h.clone(),
            hbar,
            class: core.class().generator_class(),
            params: *core.params(),
            tag: core.tag(),
            extrapolated_points,
        })
    }

    pub(crate) fn closed(
        form: ClosedForm,
        core: &CoreFunction,
        hbar: OffsetFn,
    ) -> Self {
        Self {
            form: Form::Closed(form),
            shift: core.shift.clone(),
            h: core.h.clone(),
            hbar,
            class: core.class().generator_class(),
            params: *core.params(),
            tag: core.tag(),
            extrapolated_points: 0,
        }
    }

    /// `g(t, z)`. Tabulated generators evaluated outside their table return
    /// `NaN`; use [`Generator::try_eval`] to get the range error instead.
    pub fn eval(&self, t: f64, z: &[f64]) -> f64 {
        self.try_eval(t, z).unwrap_or(f64::NAN)
    }

    pub fn try_eval(&self, t: f64, z: &[f64]) -> Result<f64> {
        let base = match &self.form {
            Form::Closed(c) => c.generator_value(z),
            Form::Tabulated(tab) => tab.eval_point(z)?.to_f64(),
        };
        Ok(base - self.shift.eval(t))
    }

    /// `∂g(t, z)` and its minimal-norm element.
    pub fn subdifferential(&self, z: &[f64]) -> Result<Subdifferential> {
        match &self.form {
            Form::Closed(c) => Ok(c.subdifferential(z)),
            Form::Tabulated(tab) => tab.subdifferential(z),
        }
    }

    /// Writes the minimal-norm subgradient of `g(t, ·)` at `z` into `out`.
    pub fn min_norm_subgradient_into(&self, z: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.form {
            Form::Closed(c) => {
                c.min_norm_subgradient_into(z, out);
                Ok(())
            }
            Form::Tabulated(tab) => {
                let sel = tab.subdifferential(z)?.min_norm();
                out.copy_from_slice(&sel);
                Ok(())
            }
        }
    }

    pub fn h(&self) -> &OffsetFn {
        &self.h
    }

    pub fn hbar(&self) -> &OffsetFn {
        &self.hbar
    }

    pub fn class(&self) -> GeneratorClass {
        self.class
    }

    pub fn params(&self) -> &GrowthParams {
        &self.params
    }

    pub fn tag(&self) -> Option<CatalogueTag> {
        self.tag
    }

    /// Number of tabulation points whose conjugate maximiser sat on the edge
    /// of the `q` grid (zero for closed forms).
    pub fn extrapolated_points(&self) -> usize {
        self.extrapolated_points
    }

    /// Largest `|z|` at which the generator can be evaluated.
    pub fn z_range(&self) -> f64 {
        match &self.form {
            Form::Closed(_) => f64::INFINITY,
            Form::Tabulated(tab) => {
                let ax = tab.axis();
                ax[0].abs().max(ax[ax.len() - 1].abs())
            }
        }
    }
}

/// Offset `h̄` for which the conjugate of an `A1`–`A4` core satisfies the
/// matching `H1`–`H4` upper bound.
pub fn compute_hbar(core: &CoreFunction, params: &GrowthParams) -> Result<OffsetFn> {
    let h = core.h();
    let k = params.k;
    let gamma = params.gamma;
    match core.class() {
        CoreClass::A1 => Ok(h.shifted(k * k / (2.0 * gamma))),
        CoreClass::A2 => {
            let coef = libm::pow(gamma, -1.0 / (params.alpha - 1.0));
            Ok(h.shifted(coef * libm::pow(k, params.alpha_star())))
        }
        CoreClass::A3 => {
            let lambda = params.lambda;
            let growth = libm::exp(
                2.0 * libm::pow(gamma, -1.0 / lambda) * libm::pow(k, 1.0 / lambda),
            );
            Ok(h.shifted(growth + a3_constant(params.c, gamma, lambda)?))
        }
        CoreClass::A4 => Ok(h.clone()),
        CoreClass::Unclassified => Err(Error::Class),
    }
}

/// Working `|z|` range and resolution for the super-linear constant search.
const A3_Z_MAX: f64 = 100.0;
const A3_Z_POINTS: usize = 2001;
const A3_Q_POINTS: usize = 20001;

/// Numerical stand-in for the existential constant of the super-linear class:
/// twice the smallest `C ≥ 0` with
/// `sup_q (z q − c·exp(2γ^{-1/λ}|q|^{1/λ})) ≤ γ|z|(ln(1+|z|))^λ + C`
/// on `|z| ∈ [0, 100]`.
pub fn a3_constant(c: f64, gamma: f64, lambda: f64) -> Result<f64> {
    let a = 2.0 * libm::pow(gamma, -1.0 / lambda);
    let profile = |r: f64| c * libm::exp(a * libm::pow(r, 1.0 / lambda));
    let slope = |r: f64| {
        if r == 0.0 {
            0.0
        } else {
            profile(r) * (a / lambda) * libm::pow(r, 1.0 / lambda - 1.0)
        }
    };
    // Widen the q range until the profile's slope exceeds the largest |z|,
    // so every maximiser is interior.
    let mut r_max = 1.0;
    while slope(r_max) <= A3_Z_MAX * 1.5 {
        r_max *= 2.0;
        if r_max > 1e6 {
            return Err(Error::Param("super-linear constant search did not bracket".to_string()));
        }
    }
    let q_grid: Vec<f64> = (0..A3_Q_POINTS)
        .map(|i| r_max * i as f64 / (A3_Q_POINTS - 1) as f64)
        .collect();
    let values = q_grid.iter().map(|&r| ExtendedReal::Finite(profile(r))).collect();
    let table = TabulatedConvexFunction::new(q_grid, values, true)?;
    let z_grid: Vec<f64> = (0..A3_Z_POINTS)
        .map(|i| A3_Z_MAX * i as f64 / (A3_Z_POINTS - 1) as f64)
        .collect();
    let conj = legendre_transform(&table, &z_grid)?;
    let mut worst = 0.0f64;
    for (&z, v) in z_grid.iter().zip(conj.table.values()) {
        let bound = gamma * z * libm::pow(libm::log1p(z), lambda);
        worst = worst.max(v.to_f64() - bound);
    }
    Ok(2.0 * worst)
}
