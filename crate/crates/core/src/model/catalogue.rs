use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use super::{
    compute_hbar, CoreClass, CoreFunction, EffectiveDomain, Generator, GrowthParams,
    OffsetFn,
};
use crate::conjugate::Subdifferential;
use crate::vector::{dot, norm};
use crate::{Error, ExtendedReal, Result};

/// Relative slack used when testing membership of a closed ball, so that
/// points of the form `γ·z/|z|` produced in floating point stay inside.
const BALL_SLACK: f64 = 1e-12;

/// Names of the built-in conjugate pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CatalogueTag {
    LinearDirac,
    DriftBand,
    Entropic,
    CappedQuadratic,
    Exponential,
    Quartic,
    PiecewiseVii,
}

impl CatalogueTag {
    pub const ALL: [CatalogueTag; 7] = [
        CatalogueTag::LinearDirac,
        CatalogueTag::DriftBand,
        CatalogueTag::Entropic,
        CatalogueTag::CappedQuadratic,
        CatalogueTag::Exponential,
        CatalogueTag::Quartic,
        CatalogueTag::PiecewiseVii,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CatalogueTag::LinearDirac => "linear_dirac",
            CatalogueTag::DriftBand => "drift_band",
            CatalogueTag::Entropic => "entropic",
            CatalogueTag::CappedQuadratic => "capped_quadratic",
            CatalogueTag::Exponential => "exponential",
            CatalogueTag::Quartic => "quartic",
            CatalogueTag::PiecewiseVii => "piecewise_vii",
        }
    }

    /// The generator formula as it is usually quoted for this entry. It
    /// coincides with the true conjugate except for `exponential`, where the
    /// quoted `|z|(ln|z| − 1) − h` is only correct for `|z| ≥ 1`.
    pub fn quoted_generator(self, params: &GrowthParams, z: &[f64], h: f64) -> Result<f64> {
        match self {
            CatalogueTag::Exponential => {
                let r = norm(z);
                Ok(if r == 0.0 { -h } else { r * (libm::log(r) - 1.0) - h })
            }
            _ => {
                let (_, gen) = build_catalogue_entry(self, params, OffsetFn::constant(h))?;
                gen.try_eval(0.0, z)
            }
        }
    }
}

impl fmt::Display for CatalogueTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CatalogueTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CatalogueTag::ALL
            .into_iter()
            .find(|t| t.name() == s.trim())
            .ok_or_else(|| Error::Catalogue(s.to_string()))
    }
}

/// Closed-form conjugate pairs. Each variant evaluates the time-free part of
/// both the core function and its generator.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum ClosedForm {
    LinearDirac { anchor: Vec<f64> },
    DriftBand { gamma: f64 },
    Entropic { gamma: f64 },
    CappedQuadratic { gamma: f64 },
    Exponential,
    Quartic,
    PiecewiseVii,
}

impl ClosedForm {
    pub(crate) fn core_value(&self, q: &[f64]) -> ExtendedReal {
        use ExtendedReal::{Finite, PosInfinity};
        let r = norm(q);
        match self {
            ClosedForm::LinearDirac { anchor } => {
                if q.iter().zip(anchor).all(|(a, b)| a == b) {
                    Finite(0.0)
                } else {
                    PosInfinity
                }
            }
            ClosedForm::DriftBand { gamma } => {
                if r <= gamma * (1.0 + BALL_SLACK) {
                    Finite(0.0)
                } else {
                    PosInfinity
                }
            }
            ClosedForm::Entropic { gamma } => Finite(r * r / (2.0 * gamma)),
            ClosedForm::CappedQuadratic { gamma } => {
                if r <= gamma * (1.0 + BALL_SLACK) {
                    Finite(0.5 * r * r)
                } else {
                    PosInfinity
                }
            }
            ClosedForm::Exponential => Finite(libm::exp(r)),
            ClosedForm::Quartic => Finite(0.25 * r * r * r * r),
            ClosedForm::PiecewiseVii => {
                let x = q[0];
                if x < 1.0 {
                    PosInfinity
                } else if x <= 2.0 {
                    Finite(x - 1.0)
                } else {
                    Finite(0.25 * x * x)
                }
            }
        }
    }

    pub(crate) fn generator_value(&self, z: &[f64]) -> f64 {
        let r = norm(z);
        match self {
            ClosedForm::LinearDirac { anchor } => dot(anchor, z),
            ClosedForm::DriftBand { gamma } => gamma * r,
            ClosedForm::Entropic { gamma } => 0.5 * gamma * r * r,
            ClosedForm::CappedQuadratic { gamma } => {
                if r <= *gamma {
                    0.5 * r * r
                } else {
                    gamma * r - 0.5 * gamma * gamma
                }
            }
            ClosedForm::Exponential => {
                if r <= 1.0 {
                    -1.0
                } else {
                    r * (libm::log(r) - 1.0)
                }
            }
            ClosedForm::Quartic => 0.75 * libm::pow(r, 4.0 / 3.0),
            ClosedForm::PiecewiseVii => {
                let x = z[0];
                if x < 1.0 {
                    x
                } else {
                    x * x
                }
            }
        }
    }

    /// Radial slope `φ'(r)` of generators of the form `φ(|z|)`; `None` for
    /// the two non-radial entries.
    fn radial_slope(&self, r: f64) -> Option<f64> {
        match self {
            ClosedForm::DriftBand { gamma } => Some(*gamma),
            ClosedForm::Entropic { gamma } => Some(gamma * r),
            ClosedForm::CappedQuadratic { gamma } => Some(r.min(*gamma)),
            ClosedForm::Exponential => Some(if r <= 1.0 { 0.0 } else { libm::log(r) }),
            ClosedForm::Quartic => Some(libm::cbrt(r)),
            ClosedForm::LinearDirac { .. } | ClosedForm::PiecewiseVii => None,
        }
    }

    pub(crate) fn subdifferential(&self, z: &[f64]) -> Subdifferential {
        match self {
            ClosedForm::LinearDirac { anchor } => Subdifferential::Singleton(anchor.clone()),
            ClosedForm::PiecewiseVii => {
                let x = z[0];
                if x < 1.0 {
                    Subdifferential::Singleton(vec![1.0])
                } else if x > 1.0 {
                    Subdifferential::Singleton(vec![2.0 * x])
                } else {
                    Subdifferential::Interval { lo: 1.0, hi: 2.0 }
                }
            }
            ClosedForm::DriftBand { gamma } if norm(z) == 0.0 => {
                Subdifferential::Ball { radius: *gamma }
            }
            _ => {
                let mut out = vec![0.0; z.len()];
                self.min_norm_subgradient_into(z, &mut out);
                Subdifferential::Singleton(out)
            }
        }
    }

    pub(crate) fn min_norm_subgradient_into(&self, z: &[f64], out: &mut [f64]) {
        match self {
            ClosedForm::LinearDirac { anchor } => out.copy_from_slice(anchor),
            ClosedForm::PiecewiseVii => {
                let x = z[0];
                out[0] = if x <= 1.0 { 1.0 } else { 2.0 * x };
            }
            _ => {
                let r = norm(z);
                let slope = self.radial_slope(r).unwrap_or(0.0);
                if r == 0.0 {
                    out.iter_mut().for_each(|o| *o = 0.0);
                } else {
                    for (o, zi) in out.iter_mut().zip(z) {
                        *o = slope * zi / r;
                    }
                }
            }
        }
    }

    pub(crate) fn effective_domain(&self) -> EffectiveDomain {
        match self {
            ClosedForm::LinearDirac { anchor } => EffectiveDomain::Point(anchor.clone()),
            ClosedForm::DriftBand { gamma } | ClosedForm::CappedQuadratic { gamma } => {
                EffectiveDomain::Ball { radius: *gamma }
            }
            ClosedForm::PiecewiseVii => EffectiveDomain::Interval {
                lo: 1.0,
                hi: f64::INFINITY,
            },
            _ => EffectiveDomain::Whole,
        }
    }

    pub(crate) fn is_radial(&self) -> bool {
        match self {
            ClosedForm::LinearDirac { anchor } => anchor.iter().all(|&a| a == 0.0),
            ClosedForm::PiecewiseVii => false,
            _ => true,
        }
    }
}

/// Parameters with the constants each entry fixes substituted in.
fn effective_params(tag: CatalogueTag, params: &GrowthParams) -> GrowthParams {
    let mut p = *params;
    match tag {
        CatalogueTag::Exponential => {
            p.c = 1.0;
            p.gamma = 2.0;
            p.lambda = 1.0;
        }
        CatalogueTag::Quartic => {
            p.alpha = 4.0 / 3.0;
            p.gamma = libm::cbrt(4.0);
        }
        CatalogueTag::PiecewiseVii => {
            p.gamma = 2.0;
            p.k = p.k.max(1.0);
        }
        _ => {}
    }
    p
}

fn closed_form(tag: CatalogueTag, p: &GrowthParams, anchor: &[f64]) -> ClosedForm {
    match tag {
        CatalogueTag::LinearDirac => ClosedForm::LinearDirac {
            anchor: anchor.to_vec(),
        },
        CatalogueTag::DriftBand => ClosedForm::DriftBand { gamma: p.gamma },
        CatalogueTag::Entropic => ClosedForm::Entropic { gamma: p.gamma },
        CatalogueTag::CappedQuadratic => ClosedForm::CappedQuadratic { gamma: p.gamma },
        CatalogueTag::Exponential => ClosedForm::Exponential,
        CatalogueTag::Quartic => ClosedForm::Quartic,
        CatalogueTag::PiecewiseVii => ClosedForm::PiecewiseVii,
    }
}

/// Builds a catalogue core function and its closed-form generator.
///
/// `h` is the offset process of the entry. For `linear_dirac`, the anchor
/// is `k·e₁`; use [`build_linear_dirac`] for a general anchor vector.
pub fn build_catalogue_entry(
    tag: CatalogueTag,
    params: &GrowthParams,
    h: OffsetFn,
) -> Result<(CoreFunction, Generator)> {
    params.validate()?;
    if tag == CatalogueTag::LinearDirac {
        let mut anchor = vec![0.0; params.dim];
        anchor[0] = params.k;
        return build_linear_dirac(anchor, params, h);
    }
    if tag == CatalogueTag::PiecewiseVii && params.dim != 1 {
        return Err(Error::Param(
            "piecewise_vii is defined in dimension 1 only".to_string(),
        ));
    }
    let p = effective_params(tag, params);
    let mut anchor = vec![0.0; p.dim];
    if tag == CatalogueTag::PiecewiseVii {
        anchor[0] = 1.0;
    }
    let form = closed_form(tag, &p, &anchor);
    let (shift, core_h, class) = match tag {
        CatalogueTag::DriftBand | CatalogueTag::CappedQuadratic => {
            (OffsetFn::zero(), h, CoreClass::A4)
        }
        CatalogueTag::Entropic | CatalogueTag::PiecewiseVii => (OffsetFn::zero(), h, CoreClass::A1),
        // f(q̄) = f(0) = 1 + h, so the anchor offset is h + 1.
        CatalogueTag::Exponential => (h.clone(), h.shifted(1.0), CoreClass::A3),
        CatalogueTag::Quartic => (h.clone(), h, CoreClass::A2),
        CatalogueTag::LinearDirac => unreachable!(),
    };
    let core = CoreFunction::closed(form.clone(), shift, core_h, anchor, tag, class, p);
    let hbar = compute_hbar(&core, &p)?;
    let gen = Generator::closed(form, &core, hbar);
    Ok((core, gen))
}

/// The Dirac core `f = h` at `anchor`, `+∞` elsewhere, with generator
/// `g(z) = anchor·z − h`. Requires `|anchor| ≤ γ`.
pub fn build_linear_dirac(
    anchor: Vec<f64>,
    params: &GrowthParams,
    h: OffsetFn,
) -> Result<(CoreFunction, Generator)> {
    params.validate()?;
    if anchor.len() != params.dim {
        return Err(Error::Param(alloc::format!(
            "anchor has dimension {}, expected {}",
            anchor.len(),
            params.dim
        )));
    }
    let size = norm(&anchor);
    if size > params.gamma {
        return Err(Error::Param(alloc::format!(
            "anchor norm {size} exceeds gamma {}",
            params.gamma
        )));
    }
    let mut p = *params;
    p.k = p.k.max(size);
    let form = ClosedForm::LinearDirac { anchor: anchor.clone() };
    let core = CoreFunction::closed(
        form.clone(),
        h.clone(),
        h,
        anchor,
        CatalogueTag::LinearDirac,
        CoreClass::A4,
        p,
    );
    let hbar = compute_hbar(&core, &p)?;
    let gen = Generator::closed(form, &core, hbar);
    Ok((core, gen))
}
